//! Pseudo object-boundary generation: CRF refinement of an enhanced map,
//! Canny edges, and their fusion along the longest object contour.

pub mod canny;
pub mod contour;
pub mod crf;
pub mod pseudo;

pub use canny::{canny_edges, CannyParams};
pub use contour::{trace_contours, ContourPath};
pub use crf::{crf_refine, CrfParams};
pub use pseudo::{make_pseudo_boundary, SNAP_RADIUS};
