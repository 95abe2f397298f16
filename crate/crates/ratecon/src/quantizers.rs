//! Uniform scalar quantizers with optional subtractive dithering and
//! empirical rate accounting for the Monte Carlo simulator.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::Real;

/// Level placement of a uniform quantizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    /// Levels at integer multiples of the bin size (zero is a level).
    MidTread,
    /// Levels at half-integer multiples (zero is a decision boundary).
    MidRise,
}

/// Uniform scalar quantizer; unbounded unless a level count is given.
#[derive(Clone, Debug)]
pub struct UniformQuantizer<T> {
    bin_size: T,
    style: Style,
    /// Number of levels for bounded (saturating) quantizers.
    levels: Option<u32>,
    dithered: bool,
}

impl<T: Real> UniformQuantizer<T> {
    /// Unbounded mid-tread quantizer (the ECSQ front end).
    pub fn mid_tread(bin_size: T, dithered: bool) -> Result<Self> {
        if !(bin_size > T::zero()) {
            return Err(Error::InvalidConfig("bin size must be positive".into()));
        }
        Ok(UniformQuantizer { bin_size, style: Style::MidTread, levels: None, dithered })
    }

    /// Bounded mid-rise quantizer with an even number of levels.
    pub fn bounded_mid_rise(bin_size: T, levels: u32, dithered: bool) -> Result<Self> {
        if !(bin_size > T::zero()) || levels == 0 || levels % 2 != 0 {
            return Err(Error::InvalidConfig(
                "bounded mid-rise quantizer needs a positive bin and an even level count".into(),
            ));
        }
        Ok(UniformQuantizer { bin_size, style: Style::MidRise, levels: Some(levels), dithered })
    }

    pub fn bin_size(&self) -> T {
        self.bin_size
    }

    pub fn style(&self) -> Style {
        self.style
    }

    pub fn levels(&self) -> Option<u32> {
        self.levels
    }

    pub fn is_dithered(&self) -> bool {
        self.dithered
    }

    /// Largest reconstruction level (bounded quantizers only).
    pub fn max_level(&self) -> Option<T> {
        self.levels.map(|n| {
            let half = T::of(n as f64 / 2.0);
            match self.style {
                Style::MidRise => (half - T::of(0.5)) * self.bin_size,
                Style::MidTread => (half - T::one()).max(T::zero()) * self.bin_size,
            }
        })
    }

    /// Nearest reconstruction level; ties round half away from zero and
    /// bounded quantizers saturate at the extreme levels.
    pub fn quantize(&self, x: T) -> T {
        let b = self.bin_size;
        let mut idx = match self.style {
            // f64::round ties away from zero, matching the tie-break rule
            Style::MidTread => (x / b).round(),
            Style::MidRise => {
                // nearest half-integer, ties half away from zero
                let sign = if x < T::zero() { -T::one() } else { T::one() };
                sign * ((x / b).abs().floor() + T::of(0.5))
            }
        };
        if let Some(n) = self.levels {
            let lim = match self.style {
                Style::MidRise => T::of(n as f64 / 2.0) - T::of(0.5),
                Style::MidTread => T::of(n as f64 / 2.0) - T::one(),
            };
            idx = idx.min(lim).max(-lim);
        }
        idx * b
    }

    /// Subtractive dithering: transmit `Q(x + w)` with `w ~ U(-b/2, b/2)`
    /// shared with the receiver, reconstruct `Q(x + w) - w`.
    ///
    /// Returns `(reconstruction, dither)`.
    pub fn dithered_quantize(&self, x: T, rng: &mut impl Rng) -> (T, T) {
        debug_assert!(self.dithered);
        let half = self.bin_size.as_f64() / 2.0;
        let w = T::of(rng.gen_range(-half..half));
        (self.quantize(x + w) - w, w)
    }

    /// Apply the quantizer through one channel use: dithered when so
    /// configured, plain rounding otherwise.
    pub fn transmit(&self, x: T, rng: &mut impl Rng) -> T {
        if self.dithered {
            self.dithered_quantize(x, rng).0
        } else {
            self.quantize(x)
        }
    }
}

/// Fixed-rate design: `N = 2^rate` mid-rise levels spanning 12 standard
/// deviations, i.e. `b = 12 sigma / 2^rate`, subtractively dithered.
pub fn fixed_rate_quantizer_for<T: Real>(variance: T, rate: u32) -> Result<UniformQuantizer<T>> {
    if rate < 1 {
        return Err(Error::InvalidConfig("fixed rate must be at least 1 bit".into()));
    }
    if !(variance > T::zero()) {
        return Err(Error::InvalidConfig("variance must be positive".into()));
    }
    if rate > 31 {
        return Err(Error::InvalidConfig("fixed rate above 31 bits unsupported".into()));
    }
    let n = 1u32 << rate;
    let b = variance.sqrt() * T::of(12.0) / T::of(n as f64);
    UniformQuantizer::bounded_mid_rise(b, n, true)
}

/// Plug-in entropy (bits/symbol) of the empirical distribution of quantized
/// values.
pub fn empirical_entropy_rate<T: Real>(samples: &[T]) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("entropy of an empty sample set".into()));
    }
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for &s in samples {
        // adding +0.0 folds -0.0 into +0.0 so the zero level is one symbol
        *counts.entry((s.as_f64() + 0.0).to_bits()).or_default() += 1;
    }
    let n = T::of(samples.len() as f64);
    let mut h = T::zero();
    for &c in counts.values() {
        let p = T::of(c as f64) / n;
        h = h - p * p.log2();
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn mid_tread_rounding_and_ties() {
        let q: UniformQuantizer<f64> = UniformQuantizer::mid_tread(0.5, false).unwrap();
        assert_eq!(q.quantize(0.6), 0.5);
        assert_eq!(q.quantize(0.0), 0.0);
        // ties half away from zero
        assert_eq!(q.quantize(0.25), 0.5);
        assert_eq!(q.quantize(-0.25), -0.5);
        assert!((q.quantize(0.74) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bounded_mid_rise_saturates() {
        let q: UniformQuantizer<f64> = UniformQuantizer::bounded_mid_rise(1.0, 4, false).unwrap();
        assert_eq!(q.quantize(10.0), 1.5);
        assert_eq!(q.quantize(-10.0), -1.5);
        assert_eq!(q.quantize(0.2), 0.5);
        assert_eq!(q.quantize(-0.2), -0.5);
        assert_eq!(q.max_level(), Some(1.5));
    }

    #[test]
    fn quantize_error_bounded_in_range() {
        let q: UniformQuantizer<f64> = UniformQuantizer::mid_tread(0.3, false).unwrap();
        let mut rng = stream(5, &[9]);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-10.0..10.0);
            assert!((q.quantize(x) - x).abs() <= 0.15 + 1e-12);
        }
    }

    #[test]
    fn fixed_rate_design_points() {
        let q: UniformQuantizer<f64> = fixed_rate_quantizer_for(1.0, 4).unwrap();
        assert!((q.bin_size() - 0.75).abs() < 1e-15);
        assert_eq!(q.levels(), Some(16));
        let q2: UniformQuantizer<f64> = fixed_rate_quantizer_for(4.0, 1).unwrap();
        assert!((q2.bin_size() - 12.0).abs() < 1e-15);
        assert_eq!(q2.levels(), Some(2));
        assert_eq!(q2.quantize(0.1), 6.0);
        assert_eq!(q2.quantize(-0.1), -6.0);
        assert!(fixed_rate_quantizer_for(1.0_f64, 0).is_err());
        // implied distortion b^2/12 equals the dithered-uniform model value
        let m = crate::rd_models::RdModel::<f64>::dithered_uniform(12.0).unwrap();
        let b = q.bin_size();
        assert!((b * b / 12.0 - m.distortion_for_rate(1.0, 4.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn dither_moment_properties_at_one_million_samples() {
        let b = 0.25_f64;
        let q: UniformQuantizer<f64> =
            UniformQuantizer::mid_tread(b, true).unwrap();
        let mut rng = stream(123, &[crate::rng::role::DITHER]);
        let n = 1_000_000usize;
        let mut xs = Vec::with_capacity(n);
        let mut es = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = StandardNormal.sample(&mut rng);
            let (recon, _) = q.dithered_quantize(x, &mut rng);
            xs.push(x);
            es.push(recon - x);
        }
        let target_var = b * b / 12.0;
        assert!(stats::mean(&es).abs() < 0.001);
        assert!((stats::variance(&es) - target_var).abs() < 0.01 * target_var);
        assert!(stats::correlation(&xs, &es).abs() < 0.005);
        // successive errors from independent dither draws are uncorrelated
        let lag1: Vec<f64> = es[1..].to_vec();
        assert!(stats::correlation(&es[..n - 1], &lag1).abs() < 0.005);
    }

    #[test]
    fn vanishing_bin_reproduces_input() {
        let q: UniformQuantizer<f64> = UniformQuantizer::mid_tread(1e-9, true).unwrap();
        let mut rng = stream(4, &[1]);
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-3.0..3.0);
            let (recon, _) = q.dithered_quantize(x, &mut rng);
            assert!((recon - x).abs() < 1e-8);
        }
    }

    #[test]
    fn entropy_of_degenerate_and_uniform_sets() {
        assert_eq!(empirical_entropy_rate(&[1.0_f64; 10]).unwrap(), 0.0);
        let two = [0.5_f64, -0.5, 0.5, -0.5];
        assert!((empirical_entropy_rate(&two).unwrap() - 1.0).abs() < 1e-15);
        assert!(empirical_entropy_rate::<f64>(&[]).is_err());
    }

    #[test]
    fn empirical_entropy_matches_quadrature_oracle() {
        let b = 0.5_f64;
        let q: UniformQuantizer<f64> = UniformQuantizer::mid_tread(b, false).unwrap();
        let mut rng = stream(77, &[3]);
        let samples: Vec<f64> = (0..1_000_000)
            .map(|_| q.quantize(StandardNormal.sample(&mut rng)))
            .collect();
        let h = empirical_entropy_rate(&samples).unwrap();
        let oracle = crate::gauss::midtread_gaussian_entropy(1.0, b);
        assert!((h - oracle).abs() < 0.01, "{h} vs {oracle}");
        // never exceeds log2 of the observed alphabet size
        let distinct = samples
            .iter()
            .map(|x| x.to_bits())
            .collect::<std::collections::HashSet<_>>()
            .len();
        assert!(h <= (distinct as f64).log2() + 1e-12);
    }
}
