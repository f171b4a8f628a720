//! File formats: `.npy` arrays, PNG masks and images, JSON manifests and
//! reports.

pub mod manifest;
pub mod npy;
pub mod png;
pub mod report;

pub use manifest::{load_manifest, write_manifest, ImageRecord, Manifest};
pub use npy::{read_array, write_array, NpyArray};
pub use png::{read_mask_png, read_rgb_png, write_mask_png, write_rgb_png};
pub use report::{write_json, ReportBundle};
