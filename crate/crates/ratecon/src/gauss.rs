//! Gaussian distribution helpers: CDF, quantile, and quadrature of
//! quantizer distortion/entropy integrals against a Gaussian density.

use crate::Real;

/// Standard normal CDF via the Abramowitz-Stegun 7.1.26 erf approximation
/// (absolute error below 2e-7, plenty for the bin-mass computations here).
pub fn normal_cdf<T: Real>(x: T) -> T {
    let half = T::of(0.5);
    half * (T::one() + erf(x / T::of(std::f64::consts::SQRT_2)))
}

fn erf<T: Real>(x: T) -> T {
    let sign = if x < T::zero() { -T::one() } else { T::one() };
    let x = x.abs();
    let t = T::one() / (T::one() + T::of(0.3275911) * x);
    let poly = t
        * (T::of(0.254829592)
            + t * (T::of(-0.284496736)
                + t * (T::of(1.421413741)
                    + t * (T::of(-1.453152027) + t * T::of(1.061405429)))));
    sign * (T::one() - poly * (-x * x).exp())
}

/// Standard normal quantile via Acklam's rational approximation (relative
/// error about 1e-9 across the full domain).
pub fn normal_quantile<T: Real>(p: T) -> T {
    assert!(p > T::zero() && p < T::one(), "quantile argument must be in (0,1)");
    T::of(acklam(p.as_f64()))
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam(1.0 - p)
    }
}

fn standard_pdf<T: Real>(x: T) -> T {
    let inv_sqrt_2pi = T::of(0.3989422804014327);
    inv_sqrt_2pi * (-x * x * T::of(0.5)).exp()
}

/// Expected square error of an (unbounded) mid-tread uniform quantizer with
/// bin size `b` applied to a zero-mean Gaussian with the given variance,
/// computed by per-bin Simpson quadrature out to 10 standard deviations.
pub fn midtread_gaussian_distortion<T: Real>(variance: T, bin: T) -> T {
    assert!(variance > T::zero() && bin > T::zero());
    let sigma = variance.sqrt();
    let limit = sigma * T::of(10.0);
    let max_level = (limit / bin).as_f64().ceil() as i64;
    let mut total = T::zero();
    for n in -max_level..=max_level {
        let center = T::of(n as f64) * bin;
        let lo = center - bin * T::of(0.5);
        let hi = center + bin * T::of(0.5);
        total = total + simpson(lo, hi, 64, |x| {
            let d = x - center;
            d * d * standard_pdf(x / sigma) / sigma
        });
    }
    total
}

/// Entropy in bits of the level distribution of an (unbounded) mid-tread
/// uniform quantizer with bin size `b` on a zero-mean Gaussian.
pub fn midtread_gaussian_entropy<T: Real>(variance: T, bin: T) -> T {
    assert!(variance > T::zero() && bin > T::zero());
    let sigma = variance.sqrt();
    let max_level = (sigma * T::of(10.0) / bin).as_f64().ceil() as i64;
    let mut h = T::zero();
    for n in -max_level..=max_level {
        let lo = (T::of(n as f64) - T::of(0.5)) * bin / sigma;
        let hi = (T::of(n as f64) + T::of(0.5)) * bin / sigma;
        let p = normal_cdf(hi) - normal_cdf(lo);
        if p > T::zero() {
            h = h - p * p.log2();
        }
    }
    h
}

fn simpson<T: Real>(lo: T, hi: T, n: usize, f: impl Fn(T) -> T) -> T {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (hi - lo) / T::of(n as f64);
    let mut acc = f(lo) + f(hi);
    for k in 1..n {
        let x = lo + h * T::of(k as f64);
        let w = if k % 2 == 1 { T::of(4.0) } else { T::of(2.0) };
        acc = acc + w * f(x);
    }
    acc * h / T::of(3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_matches_known_values() {
        assert!((normal_cdf(0.0_f64) - 0.5).abs() < 1e-8);
        assert!((normal_cdf(1.96_f64) - 0.9750021).abs() < 1e-5);
    }

    #[test]
    fn quantile_matches_known_values() {
        assert!((normal_quantile(0.995_f64) - 2.5758293).abs() < 1e-5);
        assert!((normal_quantile(0.5_f64)).abs() < 1e-12);
        assert!((normal_cdf(normal_quantile(0.8_f64)) - 0.8).abs() < 1e-6);
        assert!((normal_quantile(0.975_f64) - 1.9599640).abs() < 1e-5);
    }

    #[test]
    fn fine_bins_approach_high_rate_distortion() {
        // for small b, distortion -> b^2/12 and quantizer output entropy
        // -> h(x) - log2 b with h(x) the Gaussian differential entropy
        let b = 0.05_f64;
        let d = midtread_gaussian_distortion(1.0, b);
        assert!((d - b * b / 12.0).abs() / (b * b / 12.0) < 1e-3);
        let h = midtread_gaussian_entropy(1.0, b);
        let h_diff = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).log2();
        assert!((h - (h_diff - b.log2())).abs() < 1e-3);
    }
}
