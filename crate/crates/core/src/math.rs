//! Log-space numerics used by the inference routines.

/// log(exp(a) + exp(b)) without overflow.
#[inline]
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// log Σ exp(v) over a slice; NEG_INFINITY for an empty slice.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logaddexp_matches_naive_in_range() {
        let a = 0.5f64;
        let b = 2.0f64;
        let expected = (a.exp() + b.exp()).ln();
        assert!((logaddexp(a, b) - expected).abs() < 1e-12);
    }

    #[test]
    fn logaddexp_survives_large_magnitudes() {
        // naive exp overflows here
        let v = logaddexp(1234.0, 1232.0);
        let expected = 1234.0 + (1.0f64 + (-2.0f64).exp()).ln();
        assert!((v - expected).abs() < 1e-9);
    }

    #[test]
    fn logaddexp_neg_infinity_identity() {
        assert_eq!(logaddexp(f64::NEG_INFINITY, 3.0), 3.0);
        assert_eq!(logaddexp(3.0, f64::NEG_INFINITY), 3.0);
        assert_eq!(
            logaddexp(f64::NEG_INFINITY, f64::NEG_INFINITY),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn logsumexp_slice() {
        let vals = [0.0, 0.0, 0.0];
        assert!((logsumexp(&vals) - 3.0f64.ln()).abs() < 1e-12);
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
    }
}
