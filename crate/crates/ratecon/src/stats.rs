//! Sample-statistic helpers shared by the simulator and the test suites.

use crate::Real;

pub fn mean<T: Real>(xs: &[T]) -> T {
    assert!(!xs.is_empty());
    xs.iter().copied().sum::<T>() / T::of(xs.len() as f64)
}

pub fn variance<T: Real>(xs: &[T]) -> T {
    let mu = mean(xs);
    xs.iter().map(|&x| (x - mu) * (x - mu)).sum::<T>() / T::of(xs.len() as f64)
}

/// Standard error of the mean (population-variance estimate over sqrt n).
pub fn standard_error<T: Real>(xs: &[T]) -> T {
    let n = T::of(xs.len() as f64);
    (variance(xs) / n).sqrt()
}

/// Pearson correlation coefficient; 0 for degenerate (zero-variance) inputs.
pub fn correlation<T: Real>(xs: &[T], ys: &[T]) -> T {
    assert_eq!(xs.len(), ys.len());
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    let mut syy = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxy = sxy + (x - mx) * (y - my);
        sxx = sxx + (x - mx) * (x - mx);
        syy = syy + (y - my) * (y - my);
    }
    if sxx == T::zero() || syy == T::zero() {
        return T::zero();
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation with midrank tie handling.
pub fn spearman<T: Real>(xs: &[T], ys: &[T]) -> T {
    let rx = midranks(xs);
    let ry = midranks(ys);
    correlation(&rx, &ry)
}

fn midranks<T: Real>(xs: &[T]) -> Vec<T> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut ranks = vec![T::zero(); n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // average rank over the tie group, 1-based
        let r = T::of((i + j) as f64 / 2.0 + 1.0);
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_detects_monotone_relations() {
        let xs = [1.0_f64, 2.0, 3.0, 4.0, 5.0];
        let inc = [2.0_f64, 4.0, 9.0, 16.0, 30.0];
        let dec = [5.0_f64, 3.0, 2.0, 1.0, 0.5];
        assert!((spearman(&xs, &inc) - 1.0).abs() < 1e-12);
        assert!((spearman(&xs, &dec) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_get_midranks() {
        let xs = [1.0_f64, 1.0, 2.0];
        assert_eq!(midranks(&xs), vec![1.5, 1.5, 3.0]);
    }
}
