//! Log-space arithmetic for weights far beyond floating-point range.
//!
//! Fugacities like `(2 i^2 + 1)!` and weights `a_k ~ 1 / prod (2i)!` cannot
//! be exponentiated, so every unnormalized quantity in this crate is carried
//! as a natural logarithm, with `-inf` encoding zero. Sums of weights go
//! through [`logsumexp`], factorials through [`ln_factorial`] (log-gamma,
//! never integer multiplication).

/// `log 0`.
pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

/// The logarithm of a nonnegative quantity; `-inf` encodes zero.
///
/// Thin wrapper used on public surfaces where confusing a weight with its
/// logarithm would be an easy mistake. Internals mostly work on raw `f64`
/// logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogWeight(pub f64);

impl LogWeight {
    pub const ZERO: LogWeight = LogWeight(LOG_ZERO);
    pub const ONE: LogWeight = LogWeight(0.0);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == LOG_ZERO
    }

    /// Multiply the underlying weights.
    pub fn mul(self, other: LogWeight) -> LogWeight {
        if self.is_zero() || other.is_zero() {
            LogWeight::ZERO
        } else {
            LogWeight(self.0 + other.0)
        }
    }

    /// Add the underlying weights via log-sum-exp.
    pub fn add(self, other: LogWeight) -> LogWeight {
        LogWeight(logsumexp(self.0, other.0))
    }

    /// Exponentiate; may underflow to `0.0` or overflow to `inf`.
    pub fn exp(self) -> f64 {
        self.0.exp()
    }
}

impl From<f64> for LogWeight {
    fn from(v: f64) -> Self {
        LogWeight(v)
    }
}

/// `log(exp(a) + exp(b))` without overflow.
#[inline]
pub fn logsumexp(a: f64, b: f64) -> f64 {
    if a == LOG_ZERO {
        return b;
    }
    if b == LOG_ZERO {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// `log sum_i exp(v_i)` over a slice.
pub fn logsumexp_slice(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(LOG_ZERO, f64::max);
    if m == LOG_ZERO || m.is_nan() {
        return m;
    }
    let s: f64 = values.iter().map(|v| (v - m).exp()).sum();
    m + s.ln()
}

/// Natural log of the gamma function.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `log n!` via log-gamma.
#[inline]
pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Relative difference of two positive quantities given by their logs:
/// `|exp(la - lb) - 1|`, with zero/zero treated as equal.
pub fn rel_diff_from_logs(la: f64, lb: f64) -> f64 {
    if la == LOG_ZERO && lb == LOG_ZERO {
        0.0
    } else if la == LOG_ZERO || lb == LOG_ZERO {
        f64::INFINITY
    } else {
        (la - lb).exp_m1().abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_naive_in_range() {
        let a = 1.25_f64;
        let b = -0.5_f64;
        let expect = (a.exp() + b.exp()).ln();
        assert!((logsumexp(a, b) - expect).abs() < 1e-14);
    }

    #[test]
    fn logsumexp_survives_huge_magnitudes() {
        let v = logsumexp(1e6, 1e6 - 3.0);
        assert!((v - (1e6 + (1.0 + (-3.0_f64).exp()).ln())).abs() < 1e-9);
        assert_eq!(logsumexp(LOG_ZERO, LOG_ZERO), LOG_ZERO);
        assert_eq!(logsumexp(2.0, LOG_ZERO), 2.0);
    }

    #[test]
    fn ln_factorial_small_values_exact() {
        let mut acc = 1.0_f64;
        for n in 1..=20u64 {
            acc *= n as f64;
            assert!((ln_factorial(n) - acc.ln()).abs() < 1e-10 * acc.ln().abs().max(1.0));
        }
    }

    #[test]
    fn logsumexp_slice_agrees_with_pairwise() {
        let vals = [0.3, -2.0, 5.5, LOG_ZERO, 1.0];
        let mut acc = LOG_ZERO;
        for v in vals {
            acc = logsumexp(acc, v);
        }
        assert!((logsumexp_slice(&vals) - acc).abs() < 1e-12);
    }
}
