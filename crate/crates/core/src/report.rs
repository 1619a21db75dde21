//! Ensemble statistics of empirical operator constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, TimeSpacing};

/// Grid summary carried by reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub dim: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub n_space: usize,
    pub n_time: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub spacing: TimeSpacing,
}

impl GridInfo {
    pub fn of(grid: &Grid) -> Self {
        let space = grid.space();
        Self {
            dim: space.dim,
            length: space.length,
            n_space: space.n,
            n_time: grid.n_time(),
            t_min: grid.t_min(),
            t_max: grid.t_max(),
            spacing: grid.spacing(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub mean: f64,
    pub max: f64,
    pub per_sample: Vec<f64>,
}

impl Constants {
    pub fn from_samples(per_sample: Vec<f64>) -> Result<Self> {
        if per_sample.is_empty() {
            return Err(Error::invalid("an ensemble needs at least one sample"));
        }
        if let Some(bad) = per_sample.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("ensemble constant {bad}")));
        }
        let mean = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
        let max = per_sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { mean, max, per_sample })
    }

    /// Index of the largest sample (first on ties).
    pub fn argmax(&self) -> usize {
        self.per_sample
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0
    }
}

/// Empirical constant of one operator over a field ensemble. `witness`
/// describes the sample attaining the maximum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub operator: String,
    pub ensemble_size: usize,
    pub grid: GridInfo,
    pub constants: Constants,
    pub witness: serde_json::Value,
}

impl EstimateReport {
    pub fn new(
        operator: impl Into<String>,
        grid: &Grid,
        per_sample: Vec<f64>,
        witness: serde_json::Value,
    ) -> Result<Self> {
        let constants = Constants::from_samples(per_sample)?;
        Ok(Self {
            operator: operator.into(),
            ensemble_size: constants.per_sample.len(),
            grid: GridInfo::of(grid),
            constants,
            witness,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn statistics_and_json_shape() {
        let g = make_grid(2, 1.0, 8, 0.01, 1.0, 4, TimeSpacing::Geometric).unwrap();
        let r = EstimateReport::new("op", &g, vec![1.0, 3.0, 2.0], serde_json::json!({"sample": 1}))
            .unwrap();
        assert_eq!(r.constants.mean, 2.0);
        assert_eq!(r.constants.max, 3.0);
        assert_eq!(r.constants.argmax(), 1);
        let v = serde_json::to_value(&r).unwrap();
        for key in ["operator", "ensemble_size", "grid", "constants", "witness"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        for key in ["mean", "max", "per_sample"] {
            assert!(v["constants"].get(key).is_some(), "{key}");
        }
        assert_eq!(v["grid"]["L"], 1.0);
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(Constants::from_samples(vec![]).is_err());
        assert!(matches!(
            Constants::from_samples(vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
    }
}
