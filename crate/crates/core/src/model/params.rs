//! Activated-parameter accounting.
//!
//! Exiting at layer `l` activates the embedding, head, and non-layer
//! overhead plus `l` layers' worth of parameters. The linear model here is
//! fitted per backbone from two anchor points: the full model (L, total
//! size) and one published (layer, size) pair.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear activated-parameter model, in billions of parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamModel {
    /// Embedding + head + non-layer overhead.
    pub base_params: f64,
    /// Parameters activated per layer.
    pub per_layer_params: f64,
}

impl ParamModel {
    pub fn new(base_params: f64, per_layer_params: f64) -> Result<Self> {
        let mut bad = vec![];
        if base_params < 0.0 {
            bad.push(format!("base_params {base_params} must be >= 0"));
        }
        if per_layer_params <= 0.0 {
            bad.push(format!("per_layer_params {per_layer_params} must be > 0"));
        }
        if !bad.is_empty() {
            return Err(Error::SpecValidation(bad));
        }
        Ok(Self {
            base_params,
            per_layer_params,
        })
    }

    /// Fits from two (layer count, billions) anchors with distinct layers.
    pub fn fit(anchor_a: (u32, f64), anchor_b: (u32, f64)) -> Result<Self> {
        if anchor_a.0 == anchor_b.0 {
            return Err(Error::SpecValidation(vec![
                "anchors must use distinct layer counts".to_string(),
            ]));
        }
        let (la, pa) = (anchor_a.0 as f64, anchor_a.1);
        let (lb, pb) = (anchor_b.0 as f64, anchor_b.1);
        let per_layer = (pb - pa) / (lb - la);
        let base = pa - la * per_layer;
        Self::new(base, per_layer)
    }

    /// Billions of parameters activated when exiting at layer `l`, rounded
    /// to two decimals for reporting.
    pub fn activated_params(&self, layer: u32) -> f64 {
        round2(self.base_params + layer as f64 * self.per_layer_params)
    }
}

/// Round half away from zero to two decimals (no_std-safe).
fn round2(x: f64) -> f64 {
    let scaled = x * 100.0;
    let rounded = if scaled >= 0.0 {
        (scaled + 0.5) as i64
    } else {
        (scaled - 0.5) as i64
    };
    rounded as f64 / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_from_dense_anchors() {
        // 32-layer 7.0B backbone anchored at (14, 3.24).
        let pm = ParamModel::fit((32, 7.0), (14, 3.24)).unwrap();
        assert!((pm.per_layer_params - 0.208_888_9).abs() < 1e-6);
        assert!((pm.base_params - 0.315_555_6).abs() < 1e-6);
        assert!((pm.activated_params(18) - 4.07).abs() <= 0.015);
        assert!((pm.activated_params(25) - 5.54).abs() <= 0.015);
    }

    #[test]
    fn fit_from_moe_anchors() {
        // 12-layer 1.0B backbone anchored at (10, 0.90).
        let pm = ParamModel::fit((12, 1.0), (10, 0.90)).unwrap();
        assert!((pm.activated_params(9) - 0.85).abs() <= 0.015);
        assert!((pm.activated_params(11) - 0.95).abs() <= 0.015);
        assert_eq!(pm.activated_params(12), 1.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ParamModel::new(-0.1, 0.2).is_err());
        assert!(ParamModel::new(0.1, 0.0).is_err());
        assert!(ParamModel::fit((10, 1.0), (10, 2.0)).is_err());
    }

    #[test]
    fn rounding_is_two_decimals() {
        let pm = ParamModel::new(0.111, 0.111).unwrap();
        assert_eq!(pm.activated_params(1), 0.22);
        assert_eq!(pm.activated_params(0), 0.11);
    }
}
