//! Result reports: JSON bundle plus a one-row-per-threshold CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::direct_eval::EvalCurve;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub thresholds: Vec<u32>,
    pub mean_iou: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub peak_iou: f64,
    pub peak_t: u32,
    pub ap: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub top1_acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gtknown_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub config: Value,
    pub curve: CurveSeries,
    pub summary: Summary,
}

impl ReportBundle {
    pub fn from_curve(config: Value, curve: &EvalCurve) -> Self {
        ReportBundle {
            config,
            curve: CurveSeries {
                thresholds: (0..=255).collect(),
                mean_iou: curve.mean_iou.to_vec(),
                precision: curve.precision.to_vec(),
                recall: curve.recall.to_vec(),
            },
            summary: Summary {
                peak_iou: curve.peak_iou,
                peak_t: u32::from(curve.peak_t),
                ap: curve.ap,
                top1_acc: None,
                gtknown_acc: None,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.curve.thresholds.len();
        let series = [
            ("mean_iou", self.curve.mean_iou.len()),
            ("precision", self.curve.precision.len()),
            ("recall", self.curve.recall.len()),
        ];
        for (name, len) in series {
            if len != n {
                return Err(Error::InvalidInput(format!(
                    "report series {name} has {len} entries, threshold grid has {n}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,mean_iou,precision,recall\n");
        for i in 0..self.curve.thresholds.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.curve.thresholds[i], self.curve.mean_iou[i], self.curve.precision[i], self.curve.recall[i]
            );
        }
        out
    }
}

/// Serialize any report as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ReportBundle> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let report: ReportBundle = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    report.validate()?;
    Ok(report)
}
