//! On-disk model document and numeric formatting for the CLI.

use serde::{Deserialize, Serialize};

use crate::dataset::Task;
use crate::ensemble::Ensemble;
use crate::error::Result;

/// A fitted ensemble plus the column names it was trained on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub task: Task,
    pub ensemble: Ensemble<f64>,
}

impl ModelDocument {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(s)?;
        // re-validate the ensemble invariants
        let ensemble = Ensemble::from_json(&serde_json::to_string(&doc.ensemble)?)?;
        Ok(Self { ensemble, ..doc })
    }
}

/// Plain decimal notation with 17 significant digits.
pub fn format_sig17(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{:.16}", v);
    }
    let exp = v.abs().log10().floor() as i32;
    // log10 can land one off near powers of ten
    let exp = if v.abs() >= 10f64.powi(exp + 1) { exp + 1 } else if v.abs() < 10f64.powi(exp) { exp - 1 } else { exp };
    let decimals = (16 - exp).max(0) as usize;
    format!("{:.*}", decimals, v)
}
