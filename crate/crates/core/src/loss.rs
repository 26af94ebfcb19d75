//! Boundary-weighted mask loss.
//!
//! Every RoI pixel contributes its binary cross-entropy `h`; pixels in the
//! boundary band B are weighted by `lambda`, interior pixels by 1, and the sum
//! is divided by `m²` (not by the weighted pixel count):
//!
//! ```text
//! L = ( Σ_{I} h + λ · Σ_{B} h ) / m²
//! h = -[ y ln ŷ + (1 - y) ln (1 - ŷ) ]
//! ```
//!
//! With `lambda = 1` this is the ordinary mean per-pixel BCE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{boundary_band, BandPartition, BinaryMask};

pub const DEFAULT_CLAMP_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda: f64,
    pub m: usize,
    pub k: usize,
    pub clamp_eps: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            m: 28,
            k: 2,
            clamp_eps: DEFAULT_CLAMP_EPS,
        }
    }
}

impl LossConfig {
    pub fn new(lambda: f64, m: usize, k: usize, clamp_eps: f64) -> Result<Self> {
        let cfg = Self {
            lambda,
            m,
            k,
            clamp_eps,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.m < 2 {
            return Err(Error::InvalidParameter(format!("m must be >= 2, got {}", self.m)));
        }
        if self.k < 1 {
            return Err(Error::InvalidParameter(format!("k must be >= 1, got {}", self.k)));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "clamp_eps must lie in (0, 0.5), got {}",
                self.clamp_eps
            )));
        }
        Ok(())
    }
}

/// Ground-truth RoI mask (`y`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskTarget {
    mask: BinaryMask,
}

impl MaskTarget {
    pub fn new(mask: BinaryMask) -> Result<Self> {
        if mask.width() != mask.height() {
            return Err(Error::DimensionMismatch {
                expected: (mask.width(), mask.width()),
                actual: mask.dims(),
            });
        }
        Ok(Self { mask })
    }

    pub fn side(&self) -> usize {
        self.mask.width()
    }

    pub fn mask(&self) -> &BinaryMask {
        &self.mask
    }

    pub fn bits(&self) -> &[bool] {
        self.mask.bits()
    }
}

/// Per-pixel foreground probabilities (`ŷ`), clamped to `[ε, 1 - ε]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPrediction {
    side: usize,
    probs: Vec<f64>,
}

impl MaskPrediction {
    pub fn from_probs(side: usize, probs: Vec<f64>, eps: f64) -> Result<Self> {
        if probs.len() != side * side {
            return Err(Error::DimensionMismatch {
                expected: (side, side),
                actual: (probs.len(), 1),
            });
        }
        if probs.iter().any(|p| p.is_nan()) {
            return Err(Error::InvalidParameter("NaN probability".into()));
        }
        let probs = probs.into_iter().map(|p| p.clamp(eps, 1.0 - eps)).collect();
        Ok(Self { side, probs })
    }

    pub fn from_logits(side: usize, logits: &[f64], eps: f64) -> Result<Self> {
        Self::from_probs(side, logits.iter().map(|&z| sigmoid(z)).collect(), eps)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Threshold at 0.5.
    pub fn to_mask(&self) -> BinaryMask {
        let bits = self.probs.iter().map(|&p| p > 0.5).collect();
        BinaryMask::new(self.side, self.side, bits).expect("square by construction")
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub interior_sum: f64,
    pub boundary_sum: f64,
    pub pixel_count_boundary: usize,
    pub pixel_count_interior: usize,
}

/// Binary cross-entropy of one pixel; `yhat` must already be clamped.
#[inline]
pub fn pixel_bce(y: bool, yhat: f64) -> f64 {
    if y {
        -yhat.ln()
    } else {
        -(1.0 - yhat).ln()
    }
}

/// Per-pixel weights: `lambda` on B, 1 on I.
pub fn pixel_weights(band: &BandPartition, lambda: f64) -> Vec<f64> {
    band.boundary_bits()
        .iter()
        .map(|&b| if b { lambda } else { 1.0 })
        .collect()
}

/// Weighted sum with an explicit membership vector; no consistency checks.
pub(crate) fn weighted_bce(
    probs: &[f64],
    target: &[bool],
    boundary: &[bool],
    lambda: f64,
    m: usize,
) -> LossBreakdown {
    let (mut interior_sum, mut boundary_sum) = (0.0, 0.0);
    let (mut nb, mut ni) = (0, 0);
    for ((&p, &y), &b) in probs.iter().zip(target).zip(boundary) {
        let h = pixel_bce(y, p);
        if b {
            boundary_sum += h;
            nb += 1;
        } else {
            interior_sum += h;
            ni += 1;
        }
    }
    LossBreakdown {
        total: (interior_sum + lambda * boundary_sum) / (m * m) as f64,
        interior_sum,
        boundary_sum,
        pixel_count_boundary: nb,
        pixel_count_interior: ni,
    }
}

fn check_side(side: usize, m: usize) -> Result<()> {
    if side != m {
        return Err(Error::DimensionMismatch {
            expected: (m, m),
            actual: (side, side),
        });
    }
    Ok(())
}

fn check_inputs(target: &MaskTarget, band: &BandPartition, cfg: &LossConfig) -> Result<()> {
    cfg.validate()?;
    check_side(target.side(), cfg.m)?;
    if band.dims() != (cfg.m, cfg.m) {
        return Err(Error::DimensionMismatch {
            expected: (cfg.m, cfg.m),
            actual: band.dims(),
        });
    }
    if band.k() != cfg.k {
        return Err(Error::BandMismatch(format!(
            "band built with k={} but config has k={}",
            band.k(),
            cfg.k
        )));
    }
    let expected = boundary_band(target.mask(), cfg.k)?;
    if expected.boundary_bits() != band.boundary_bits() {
        return Err(Error::BandMismatch(
            "band membership differs from the band of the target".into(),
        ));
    }
    Ok(())
}

/// Boundary-weighted BCE over one RoI.
pub fn edgemask_loss(
    pred: &MaskPrediction,
    target: &MaskTarget,
    band: &BandPartition,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    check_inputs(target, band, cfg)?;
    check_side(pred.side(), cfg.m)?;
    Ok(weighted_bce(
        pred.probs(),
        target.bits(),
        band.boundary_bits(),
        cfg.lambda,
        cfg.m,
    ))
}

/// Gradient of [`edgemask_loss`] with respect to the logits, where
/// `ŷ = sigmoid(logit)`: `w · (ŷ - y) / m²`.
pub fn edgemask_grad(
    logits: &[f64],
    target: &MaskTarget,
    band: &BandPartition,
    cfg: &LossConfig,
) -> Result<Vec<f64>> {
    check_inputs(target, band, cfg)?;
    if logits.len() != cfg.m * cfg.m {
        return Err(Error::DimensionMismatch {
            expected: (cfg.m, cfg.m),
            actual: (logits.len(), 1),
        });
    }
    let norm = (cfg.m * cfg.m) as f64;
    Ok(logits
        .iter()
        .zip(target.bits())
        .zip(band.boundary_bits())
        .map(|((&z, &y), &b)| {
            let w = if b { cfg.lambda } else { 1.0 };
            w * (sigmoid(z) - y as u8 as f64) / norm
        })
        .collect())
}

/// Mean BCE over all pixels.
pub fn vanilla_mask_loss(pred: &MaskPrediction, target: &MaskTarget) -> Result<f64> {
    if pred.side() != target.side() {
        return Err(Error::DimensionMismatch {
            expected: (target.side(), target.side()),
            actual: (pred.side(), pred.side()),
        });
    }
    let sum: f64 = pred
        .probs()
        .iter()
        .zip(target.bits())
        .map(|(&p, &y)| pixel_bce(y, p))
        .sum();
    Ok(sum / pred.probs().len() as f64)
}

/// Multi-task objective: classification + box regression + mask terms.
pub fn total_loss(l_cls: f64, l_box: f64, l_mask: f64) -> Result<f64> {
    for (name, value) in [("l_cls", l_cls), ("l_box", l_box), ("l_mask", l_mask)] {
        if !value.is_finite() {
            return Err(Error::NonFinite { name, value });
        }
    }
    Ok(l_cls + l_box + l_mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn random_instance(rng: &mut ChaCha8Rng, m: usize) -> (Vec<f64>, MaskTarget) {
        let logits: Vec<f64> = (0..m * m).map(|_| rng.gen_range(-4.0..4.0)).collect();
        // Blocky targets so the band is non-trivial.
        let (x0, y0) = (rng.gen_range(0..m / 2), rng.gen_range(0..m / 2));
        let (x1, y1) = (rng.gen_range(x0 + 1..=m), rng.gen_range(y0 + 1..=m));
        let mut mask = BinaryMask::empty(m, m);
        for y in y0..y1 {
            for x in x0..x1 {
                mask.set(x, y, true);
            }
        }
        for _ in 0..m {
            let (x, y) = (rng.gen_range(0..m), rng.gen_range(0..m));
            mask.set(x, y, rng.gen());
        }
        (logits, MaskTarget::new(mask).unwrap())
    }

    #[test]
    fn pixel_bce_examples() {
        assert!((pixel_bce(true, 0.5) - LN2).abs() < 1e-15);
        assert!((pixel_bce(false, 0.5) - LN2).abs() < 1e-15);
        let eps = 1e-7;
        assert!((pixel_bce(true, 1.0 - eps) - eps).abs() < 1e-13);
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::new(-1.0, 28, 2, 1e-7).is_err());
        assert!(LossConfig::new(1.0, 1, 2, 1e-7).is_err());
        assert!(LossConfig::new(1.0, 28, 0, 1e-7).is_err());
        assert!(LossConfig::new(1.0, 28, 2, 0.5).is_err());
        assert!(LossConfig::new(100.0, 28, 2, 1e-7).is_ok());
    }

    #[test]
    fn prediction_is_clamped() {
        let p = MaskPrediction::from_probs(2, vec![0.0, 1.0, 0.3, 0.7], 1e-3).unwrap();
        assert_eq!(p.probs(), &[1e-3, 1.0 - 1e-3, 0.3, 0.7]);
        assert!(MaskPrediction::from_probs(2, vec![0.5; 3], 1e-3).is_err());
    }

    #[test]
    fn hand_evaluated_two_by_two() {
        // target {T,T;T,F}, k=1: every clipped window is the whole RoI and
        // holds both values, so all four pixels are in B and I is empty.
        let target =
            MaskTarget::new(BinaryMask::new(2, 2, vec![true, true, true, false]).unwrap()).unwrap();
        let cfg = LossConfig::new(100.0, 2, 1, 1e-7).unwrap();
        let band = boundary_band(target.mask(), 1).unwrap();
        assert_eq!(band.boundary_count(), 4);
        let pred = MaskPrediction::from_probs(2, vec![0.5; 4], cfg.clamp_eps).unwrap();
        let out = edgemask_loss(&pred, &target, &band, &cfg).unwrap();
        assert!((out.boundary_sum - 4.0 * LN2).abs() < 1e-12);
        assert_eq!(out.interior_sum, 0.0);
        assert!((out.total - 100.0 * LN2).abs() < 1e-12);
    }

    #[test]
    fn lambda_one_is_mean_bce() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (logits, target) = random_instance(&mut rng, 8);
        let cfg = LossConfig::new(1.0, 8, 2, 1e-7).unwrap();
        let band = boundary_band(target.mask(), 2).unwrap();
        let pred = MaskPrediction::from_logits(8, &logits, cfg.clamp_eps).unwrap();
        let a = edgemask_loss(&pred, &target, &band, &cfg).unwrap().total;
        let b = vanilla_mask_loss(&pred, &target).unwrap();
        assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn perfect_prediction_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (_, target) = random_instance(&mut rng, 8);
        let eps = 1e-7;
        let probs = target.bits().iter().map(|&y| y as u8 as f64).collect();
        let pred = MaskPrediction::from_probs(8, probs, eps).unwrap();
        for lambda in [1.0, 100.0] {
            let cfg = LossConfig::new(lambda, 8, 1, eps).unwrap();
            let band = boundary_band(target.mask(), 1).unwrap();
            let total = edgemask_loss(&pred, &target, &band, &cfg).unwrap().total;
            let bound = -(1.0 - eps).ln() * f64::max(1.0, lambda);
            assert!(total >= 0.0 && total <= bound + 1e-18, "{total} > {bound}");
        }
        assert!(vanilla_mask_loss(&pred, &target).unwrap() < 1e-6);
    }

    #[test]
    fn uniform_half_is_ln2() {
        let target = MaskTarget::new(BinaryMask::from_rects(
            4,
            4,
            &[crate::raster::BBox::new(0, 0, 2, 4).unwrap()],
        ))
        .unwrap();
        let pred = MaskPrediction::from_probs(4, vec![0.5; 16], 1e-7).unwrap();
        assert!((vanilla_mask_loss(&pred, &target).unwrap() - LN2).abs() < 1e-15);
    }

    #[test]
    fn mismatches_rejected() {
        let target = MaskTarget::new(BinaryMask::full(4, 4)).unwrap();
        let band = boundary_band(target.mask(), 1).unwrap();
        let cfg = LossConfig::new(1.0, 4, 1, 1e-7).unwrap();
        let small = MaskPrediction::from_probs(3, vec![0.5; 9], 1e-7).unwrap();
        assert!(edgemask_loss(&small, &target, &band, &cfg).is_err());
        assert!(vanilla_mask_loss(&small, &target).is_err());

        let pred = MaskPrediction::from_probs(4, vec![0.5; 16], 1e-7).unwrap();
        let other = boundary_band(&BinaryMask::from_rects(4, 4, &[crate::raster::BBox::at(0, 0, 2, 2)]), 1).unwrap();
        assert!(matches!(
            edgemask_loss(&pred, &target, &other, &cfg),
            Err(Error::BandMismatch(_))
        ));
        let k2 = boundary_band(target.mask(), 2).unwrap();
        assert!(matches!(
            edgemask_loss(&pred, &target, &k2, &cfg),
            Err(Error::BandMismatch(_))
        ));
        assert!(edgemask_grad(&[0.0; 15], &target, &band, &cfg).is_err());
    }

    #[test]
    fn total_loss_examples() {
        assert!((total_loss(0.5, 0.2, 0.3).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(total_loss(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(total_loss(0.0, 0.0, 2.75).unwrap(), 2.75);
        assert!(total_loss(f64::NAN, 0.0, 0.0).is_err());
        assert!(total_loss(0.0, f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn gradient_weighting_ratio_is_lambda() {
        let mut mask = BinaryMask::empty(6, 6);
        for y in 0..6 {
            for x in 0..3 {
                mask.set(x, y, true);
            }
        }
        let target = MaskTarget::new(mask).unwrap();
        let cfg = LossConfig::new(100.0, 6, 1, 1e-7).unwrap();
        let band = boundary_band(target.mask(), 1).unwrap();
        // Same (ŷ - y) = -0.5 on a boundary pixel (2,0) and interior pixel (0,0).
        let logits = vec![0.0; 36];
        let g = edgemask_grad(&logits, &target, &band, &cfg).unwrap();
        assert!(band.is_boundary(2, 0) && !band.is_boundary(0, 0));
        assert!((g[2] / g[0] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn saturated_correct_pixels_have_tiny_gradient() {
        let target = MaskTarget::new(BinaryMask::from_rects(
            4,
            4,
            &[crate::raster::BBox::at(0, 0, 2, 4)],
        ))
        .unwrap();
        let cfg = LossConfig::new(100.0, 4, 1, 1e-7).unwrap();
        let band = boundary_band(target.mask(), 1).unwrap();
        let logits: Vec<f64> = target.bits().iter().map(|&y| if y { 40.0 } else { -40.0 }).collect();
        let g = edgemask_grad(&logits, &target, &band, &cfg).unwrap();
        let bound = cfg.clamp_eps * cfg.lambda / 16.0;
        assert!(g.iter().all(|v| v.abs() <= bound));
    }

    /// Central differences of the probability-space loss with respect to each logit.
    fn finite_difference(logits: &[f64], target: &MaskTarget, band: &BandPartition, cfg: &LossConfig) -> Vec<f64> {
        let h = 1e-5;
        let loss_at = |z: &[f64]| {
            let pred = MaskPrediction::from_logits(cfg.m, z, cfg.clamp_eps).unwrap();
            edgemask_loss(&pred, target, band, cfg).unwrap().total
        };
        (0..logits.len())
            .map(|i| {
                let mut plus = logits.to_vec();
                let mut minus = logits.to_vec();
                plus[i] += h;
                minus[i] -= h;
                (loss_at(&plus) - loss_at(&minus)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (logits, target) = random_instance(&mut rng, 8);
            for lambda in [1.0, 100.0] {
                let cfg = LossConfig::new(lambda, 8, 2, 1e-7).unwrap();
                let band = boundary_band(target.mask(), 2).unwrap();
                let g = edgemask_grad(&logits, &target, &band, &cfg).unwrap();
                let fd = finite_difference(&logits, &target, &band, &cfg);
                for (a, n) in g.iter().zip(&fd) {
                    let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-10);
                    assert!(rel < 1e-4, "analytic {a} vs numeric {n}");
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_case() -> impl Strategy<Value = (usize, Vec<f64>, Vec<bool>, usize)> {
            (2usize..10).prop_flat_map(|m| {
                (
                    Just(m),
                    proptest::collection::vec(0.0f64..=1.0, m * m),
                    proptest::collection::vec(any::<bool>(), m * m),
                    1usize..=3,
                )
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn lambda_one_matches_vanilla((m, probs, bits, k) in arb_case()) {
                let target = MaskTarget::new(BinaryMask::new(m, m, bits).unwrap()).unwrap();
                let pred = MaskPrediction::from_probs(m, probs, 1e-7).unwrap();
                let cfg = LossConfig::new(1.0, m, k, 1e-7).unwrap();
                let band = boundary_band(target.mask(), k).unwrap();
                let a = edgemask_loss(&pred, &target, &band, &cfg).unwrap().total;
                let b = vanilla_mask_loss(&pred, &target).unwrap();
                prop_assert!(a >= 0.0);
                prop_assert!((a - b).abs() <= 1e-12 * b.max(f64::MIN_POSITIVE));
            }

            #[test]
            fn increasing_in_lambda((m, probs, bits, k) in arb_case(), l1 in 0.0f64..50.0, dl in 0.5f64..50.0) {
                let target = MaskTarget::new(BinaryMask::new(m, m, bits).unwrap()).unwrap();
                let pred = MaskPrediction::from_probs(m, probs, 1e-7).unwrap();
                let band = boundary_band(target.mask(), k).unwrap();
                let lo = edgemask_loss(&pred, &target, &band, &LossConfig::new(l1, m, k, 1e-7).unwrap()).unwrap();
                let hi = edgemask_loss(&pred, &target, &band, &LossConfig::new(l1 + dl, m, k, 1e-7).unwrap()).unwrap();
                prop_assert!(hi.total >= lo.total);
                if lo.boundary_sum > 0.0 {
                    prop_assert!(hi.total > lo.total);
                }
                let recomposed = (lo.interior_sum + l1 * lo.boundary_sum) / (m * m) as f64;
                prop_assert!((lo.total - recomposed).abs() <= 1e-12 * lo.total.max(1e-300));
            }

            #[test]
            fn permutation_invariant((m, probs, bits, k) in arb_case(), seed in any::<u64>(), lambda in 0.0f64..200.0) {
                use rand::seq::SliceRandom;
                let target = BinaryMask::new(m, m, bits.clone()).unwrap();
                let band = boundary_band(&target, k).unwrap();
                let pred = MaskPrediction::from_probs(m, probs, 1e-7).unwrap();
                let base = weighted_bce(pred.probs(), &bits, band.boundary_bits(), lambda, m);

                let mut order: Vec<usize> = (0..m * m).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let p: Vec<f64> = order.iter().map(|&i| pred.probs()[i]).collect();
                let t: Vec<bool> = order.iter().map(|&i| bits[i]).collect();
                let b: Vec<bool> = order.iter().map(|&i| band.boundary_bits()[i]).collect();
                let permuted = weighted_bce(&p, &t, &b, lambda, m);
                prop_assert!((base.total - permuted.total).abs() <= 1e-12 * base.total.max(1e-300));
            }
        }
    }
}
