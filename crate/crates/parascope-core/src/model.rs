//! Transformer shapes, the X-family scaling law and the critical batch size.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Hyperparameters of a transformer encoder/decoder stack.
///
/// Only the repeated transformer layers are modelled; the tokenizer,
/// embedding layer and LM head are excluded from all counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    /// Layer count `d_l`.
    pub layers: u64,
    /// Attention head count `d_a`.
    pub heads: u64,
    /// Size of each attention head `d_h`.
    pub head_size: u64,
    /// Hidden width `d_m = d_a * d_h`.
    pub hidden: u64,
    /// Sequence length in tokens `d_s`.
    pub seq_len: u64,
    /// Feed-forward intermediate size factor `n_I` (intermediate = `n_I * d_m`).
    pub ff_mult: u64,
}

impl ModelShape {
    /// Build a shape from layer/head geometry; the hidden width is derived.
    pub fn new(layers: u64, heads: u64, head_size: u64, seq_len: u64) -> Result<Self> {
        Self::with_ff_mult(layers, heads, head_size, seq_len, 4)
    }

    pub fn with_ff_mult(
        layers: u64,
        heads: u64,
        head_size: u64,
        seq_len: u64,
        ff_mult: u64,
    ) -> Result<Self> {
        let shape = ModelShape {
            layers,
            heads,
            head_size,
            hidden: heads * head_size,
            seq_len,
            ff_mult,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0
            || self.heads == 0
            || self.head_size == 0
            || self.hidden == 0
            || self.seq_len == 0
            || self.ff_mult == 0
        {
            return Err(Error::InvalidShape(
                "all shape fields must be strictly positive".into(),
            ));
        }
        if self.hidden != self.heads * self.head_size {
            return Err(Error::InvalidShape(format!(
                "hidden width {} != heads {} x head size {}",
                self.hidden, self.heads, self.head_size
            )));
        }
        Ok(())
    }

    /// Feed-forward intermediate width `d_I = n_I * d_m`.
    pub fn intermediate(&self) -> u64 {
        self.ff_mult * self.hidden
    }

    /// Weight-matrix parameter count per layer, `(4 + 2 n_I) d_m^2`.
    ///
    /// This leading-order count is what the published model tables and the
    /// critical-batch calibration are based on.
    pub fn leading_layer_params(&self) -> u128 {
        let dm = self.hidden as u128;
        (4 + 2 * self.ff_mult as u128) * dm * dm
    }

    /// Leading-order total parameter count `(4 + 2 n_I) d_m^2 d_l`.
    pub fn leading_params(&self) -> u128 {
        self.leading_layer_params() * self.layers as u128
    }

    /// Exact per-layer parameter count including biases and layer norms.
    ///
    /// `(4 + 2 n_I) d_m^2` weight entries plus `9 d_m` biases and `4 d_m`
    /// layer-norm parameters. On the X family this sums to `12 x^4 + 13 x^2`
    /// per layer.
    pub fn layer_params(&self) -> u128 {
        self.leading_layer_params() + 13 * self.hidden as u128
    }

    /// Exact total parameter count; `12 x^5 + 13 x^3` on the X family.
    pub fn params(&self) -> u128 {
        self.layer_params() * self.layers as u128
    }

    /// Critical batch size in sequences, `b_c = 573 p^(1/3) / d_s`.
    ///
    /// `p` is the leading-order parameter count: the empirical law is
    /// calibrated on GPT-3's 3.2 M-token batch using that count, and the
    /// published per-model values follow it. Callers floor the result when
    /// they need an integral batch.
    pub fn critical_batch<F: Scalar>(&self) -> F {
        let p = F::from_count(self.leading_params());
        let third = F::from_f64(1.0 / 3.0).unwrap();
        F::from_f64(573.0).unwrap() * p.powf(third) / F::from_int(self.seq_len)
    }
}

/// Index into the X model family; must be even so `d_a = x/2` is integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct XFamilyIndex(pub u64);

impl XFamilyIndex {
    pub fn new(x: u64) -> Result<Self> {
        if x < 2 || !x.is_multiple_of(2) {
            return Err(Error::InvalidShape(format!(
                "X-family index must be a positive even integer, got {x}"
            )));
        }
        Ok(XFamilyIndex(x))
    }
}

/// Expand an X-family index into a concrete shape:
/// `d_a = x/2`, `d_h = 2x`, `d_l = x`, `d_s = 16x`, `d_m = x^2`.
pub fn make_x_model(x: XFamilyIndex) -> ModelShape {
    let x = x.0;
    ModelShape {
        layers: x,
        heads: x / 2,
        head_size: 2 * x,
        hidden: x * x,
        seq_len: 16 * x,
        ff_mult: 4,
    }
}

/// Convenience wrapper validating the index first.
pub fn x_model(x: u64) -> Result<ModelShape> {
    Ok(make_x_model(XFamilyIndex::new(x)?))
}

/// Shapes of the published reference models used for comparison.
pub mod reference {
    use super::ModelShape;

    pub fn bert_large() -> ModelShape {
        ModelShape {
            layers: 24,
            heads: 16,
            head_size: 64,
            hidden: 1024,
            seq_len: 512,
            ff_mult: 4,
        }
    }

    pub fn megatron_lm() -> ModelShape {
        ModelShape {
            layers: 72,
            heads: 32,
            head_size: 96,
            hidden: 3072,
            seq_len: 1024,
            ff_mult: 4,
        }
    }

    pub fn t_nlg() -> ModelShape {
        ModelShape {
            layers: 78,
            heads: 28,
            head_size: 152,
            hidden: 4256,
            seq_len: 1024,
            ff_mult: 4,
        }
    }

    pub fn gpt3() -> ModelShape {
        ModelShape {
            layers: 96,
            heads: 96,
            head_size: 128,
            hidden: 12288,
            seq_len: 2048,
            ff_mult: 4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x160_matches_published_geometry() {
        let shape = x_model(160).unwrap();
        assert_eq!(shape.seq_len, 2560);
        assert_eq!(shape.heads, 80);
        assert_eq!(shape.head_size, 320);
        assert_eq!(shape.hidden, 25600);
        assert_eq!(shape.layers, 160);
    }

    #[test]
    fn x32_and_x2_rows() {
        let x32 = x_model(32).unwrap();
        assert_eq!(
            (
                x32.seq_len,
                x32.heads,
                x32.head_size,
                x32.hidden,
                x32.layers
            ),
            (512, 16, 64, 1024, 32)
        );
        let x2 = x_model(2).unwrap();
        assert_eq!(
            (x2.seq_len, x2.heads, x2.head_size, x2.hidden, x2.layers),
            (32, 1, 4, 4, 2)
        );
    }

    #[test]
    fn odd_or_small_family_index_rejected() {
        assert!(XFamilyIndex::new(3).is_err());
        assert!(XFamilyIndex::new(0).is_err());
        assert!(XFamilyIndex::new(1).is_err());
        assert!(XFamilyIndex::new(2).is_ok());
    }

    #[test]
    fn exact_param_count_x2_is_488() {
        assert_eq!(x_model(2).unwrap().params(), 488);
    }

    #[test]
    fn exact_param_count_x160_is_1_26t() {
        let p = x_model(160).unwrap().params();
        assert_eq!(p, 1_258_344_448_000);
        let rel = (p as f64 - 1.26e12).abs() / 1.26e12;
        assert!(rel < 0.01, "p = {p} not within 1% of 1.26e12");
    }

    #[test]
    fn bert_param_count_near_published_301m() {
        let p = reference::bert_large().params() as f64;
        assert!((p - 301e6).abs() / 301e6 < 0.01, "BERT p = {p}");
    }

    #[test]
    fn layer_params_smallest_case() {
        let shape = ModelShape {
            layers: 1,
            heads: 1,
            head_size: 1,
            hidden: 1,
            seq_len: 1,
            ff_mult: 4,
        };
        assert_eq!(shape.layer_params(), 25);
    }

    #[test]
    fn layer_params_x160_and_x32() {
        let x160 = x_model(160).unwrap();
        assert_eq!(x160.layer_params(), 7_864_652_800);
        let x32 = x_model(32).unwrap();
        let rel = (x32.layer_params() as f64 - 1.2596e7).abs() / 1.2596e7;
        assert!(rel < 0.01);
    }

    #[test]
    fn critical_batch_published_rows() {
        // (shape, published b_c); tolerance 1%.
        let rows: Vec<(ModelShape, f64)> = vec![
            (x_model(2).unwrap(), 130.0),
            (reference::bert_large(), 751.0),
            (x_model(32).unwrap(), 826.0),
            (reference::megatron_lm(), 1130.0),
            (x_model(64).unwrap(), 1310.0),
            (reference::t_nlg(), 1440.0),
            (reference::gpt3(), 1560.0),
            (x_model(108).unwrap(), 1860.0),
            (x_model(160).unwrap(), 2420.0),
        ];
        for (shape, published) in rows {
            let bc: f64 = shape.critical_batch();
            let rel = (bc - published).abs() / published;
            assert!(rel < 0.01, "b_c = {bc} vs published {published}");
        }
    }

    #[test]
    fn critical_batch_monotone_in_params_at_fixed_seq_len() {
        let mut last = 0.0f64;
        for layers in [1u64, 2, 8, 32, 128] {
            let shape = ModelShape::new(layers, 16, 64, 512).unwrap();
            let bc: f64 = shape.critical_batch();
            assert!(bc > last);
            last = bc;
        }
    }

    #[test]
    fn hidden_must_match_heads_times_head_size() {
        let bad = ModelShape {
            layers: 2,
            heads: 2,
            head_size: 3,
            hidden: 7,
            seq_len: 8,
            ff_mult: 4,
        };
        assert!(bad.validate().is_err());
    }
}
