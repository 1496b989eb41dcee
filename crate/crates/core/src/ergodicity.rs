//! Ergodicity criteria for stationary product measures: the finite-alphabet
//! fugacity series, the countable-alphabet criterion under the
//! step-overlap boundedness condition, divergence sums for the coupling,
//! and exact Bezout certificates.
//!
//! Series divergence cannot be decided from finitely many terms, so
//! verdicts are symbolic-first: profile kinds carry their divergence class
//! and numeric partial sums are reported as evidence only.

use crate::error::{Error, Result};
use crate::logspace::{rel_diff_from_logs, LOG_ZERO};
use crate::measures::{log_a_table, marginal_log, radius, Radius};
use crate::model::{FugacityProfile, RateFunction, SeriesClass};

/// Outcome of an ergodicity criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ergodic,
    NotErgodic,
    Undecidable,
}

/// Criterion verdict with the evidence that produced it.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub outcome: Outcome,
    pub evidence: String,
    /// Partial sums of the controlling series, as numeric evidence.
    pub partial_sums: Vec<f64>,
}

fn reject_zero_profile(profile: &FugacityProfile) -> Result<()> {
    if profile.is_identically_zero(64) {
        return Err(Error::Unsupported(
            "ergodicity verdicts exclude the identically-zero fugacity (Dirac measure)".into(),
        ));
    }
    Ok(())
}

/// Finite-alphabet criterion: the measure is ergodic iff
/// `sum_{lambda_i < 1} lambda_i + sum_{lambda_i >= 1} 1/lambda_i`
/// diverges. Decided symbolically from the profile kind; profiles without
/// a divergence class get partial sums and `Undecidable`.
pub fn finite_w_criterion(profile: &FugacityProfile) -> Result<Verdict> {
    reject_zero_profile(profile)?;
    let partial_sums = profile.balanced_partial_sums(64);
    Ok(match profile.balanced_series_class() {
        Some(SeriesClass::Diverges) => Verdict {
            outcome: Outcome::Ergodic,
            evidence: "balanced fugacity series diverges".into(),
            partial_sums,
        },
        Some(SeriesClass::Converges) => Verdict {
            outcome: Outcome::NotErgodic,
            evidence: "balanced fugacity series converges".into(),
            partial_sums,
        },
        None => Verdict {
            outcome: Outcome::Undecidable,
            evidence: "profile kind carries no divergence class; partial sums reported as \
                       evidence only"
                .into(),
            partial_sums,
        },
    })
}

/// Boundedness check of `sup_k a_k^2 / (a_{k-d} a_{k+d})` for one step
/// size, computed through the weights and independently through the
/// rate-function product formula.
#[derive(Debug, Clone)]
pub struct StepOverlapCheck {
    pub d: u32,
    /// `log` of the supremum over `k <= kmax`.
    pub sup_log: f64,
    pub sup_at: u32,
    /// Max relative gap between the two formulas.
    pub max_formula_gap: f64,
    /// Ratio sequence is nonincreasing over the second half of the range.
    pub tail_nonincreasing: bool,
    /// Boundedness is certified: the supremum is attained in the data and
    /// the tail is monotone nonincreasing.
    pub certified_bounded: bool,
}

/// Report of the boundedness condition over a step set.
#[derive(Debug, Clone)]
pub struct StarStarReport {
    pub radius: Radius,
    /// The radius estimate shows a flat ratio tail, i.e. evidence of a
    /// finite radius of convergence.
    pub finite_radius_certified: bool,
    pub gcd: u64,
    pub checks: Vec<StepOverlapCheck>,
    /// The condition holds: finite radius, or gcd 1 with every step size
    /// certified bounded.
    pub holds: bool,
}

/// Evaluate the boundedness condition for each `d` in the step set. The
/// supremum ratio is computed from the weights `a_k` and cross-checked
/// against `prod_{i<d} b(k+i+1, k-i-1) / b(k-i, k+i)`; the two routes must
/// agree to relative 1e-10.
pub fn star_star_check(b: &RateFunction, dset: &[u32], kmax: u32) -> Result<StarStarReport> {
    if dset.is_empty() {
        return Err(Error::EmptySet);
    }
    if dset.iter().any(|&d| d == 0) {
        return Err(Error::invalid("step sizes must be >= 1"));
    }
    let cap = b.range().cap();
    let dmax = *dset.iter().max().unwrap();
    if kmax + dmax > cap {
        return Err(Error::TruncationExceeded {
            value: kmax + dmax,
            cap,
        });
    }
    let log_a = log_a_table(b, kmax + dmax)?;
    let mut checks = Vec::new();
    for &d in dset {
        let mut sup_log = LOG_ZERO;
        let mut sup_at = d;
        let mut max_gap = 0.0_f64;
        let mut ratios = Vec::new();
        for k in d..=kmax {
            let via_a = 2.0 * log_a[k as usize] - log_a[(k - d) as usize] - log_a[(k + d) as usize];
            let mut via_b = 0.0_f64;
            for i in 0..d {
                via_b += b.log_rate(k + i + 1, k - i - 1)? - b.log_rate(k - i, k + i)?;
            }
            max_gap = max_gap.max(rel_diff_from_logs(via_a, via_b));
            if via_a > sup_log {
                sup_log = via_a;
                sup_at = k;
            }
            ratios.push(via_a);
        }
        let half = ratios.len() / 2;
        let tail_nonincreasing = ratios[half..].windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let certified_bounded = tail_nonincreasing && !ratios.is_empty();
        checks.push(StepOverlapCheck {
            d,
            sup_log,
            sup_at,
            max_formula_gap: max_gap,
            tail_nonincreasing,
            certified_bounded,
        });
    }
    let radius = radius(b, kmax)?;
    let finite_radius_certified = matches!(
        radius,
        Radius::Estimate {
            flat_tail: true,
            ..
        }
    );
    let gcd = dset.iter().fold(0u64, |g, &d| gcd_u64(g, d as u64));
    let holds =
        finite_radius_certified || (gcd == 1 && checks.iter().all(|c| c.certified_bounded));
    Ok(StarStarReport {
        radius,
        finite_radius_certified,
        gcd,
        checks,
        holds,
    })
}

/// Countable-alphabet criterion. If the boundedness condition holds for
/// the step set, the measure is ergodic iff `sum_i lambda_i` diverges; the
/// balanced series of the finite-alphabet criterion is a sufficient
/// fallback. Anything else is `Undecidable`.
pub fn countable_w_criterion(
    b: &RateFunction,
    profile: &FugacityProfile,
    dset: &[u32],
    kmax: u32,
) -> Result<Verdict> {
    reject_zero_profile(profile)?;
    if b.range().is_finite() {
        return Err(Error::Unsupported(
            "countable-alphabet criterion called with a finite occupancy range".into(),
        ));
    }
    let ss = star_star_check(b, dset, kmax)?;
    let sum_sums: Vec<f64> = {
        let mut acc = 0.0;
        (0..profile.len_hint().map_or(64, |l| l.min(64)))
            .map(|i| {
                acc += profile.log_lambda(i).exp().min(f64::MAX);
                acc
            })
            .collect()
    };
    if ss.holds {
        let via = if ss.finite_radius_certified {
            "finite radius of convergence".to_string()
        } else {
            format!("step set {:?} certified bounded with gcd 1", dset)
        };
        return Ok(match profile.sum_lambda_class() {
            Some(SeriesClass::Diverges) => Verdict {
                outcome: Outcome::Ergodic,
                evidence: format!("{via}; sum of fugacities diverges"),
                partial_sums: sum_sums,
            },
            Some(SeriesClass::Converges) => Verdict {
                outcome: Outcome::NotErgodic,
                evidence: format!("{via}; sum of fugacities converges"),
                partial_sums: sum_sums,
            },
            None => Verdict {
                outcome: Outcome::Undecidable,
                evidence: format!(
                    "{via}, but the profile kind carries no divergence class for the fugacity sum"
                ),
                partial_sums: sum_sums,
            },
        });
    }
    if profile.balanced_series_class() == Some(SeriesClass::Diverges) {
        return Ok(Verdict {
            outcome: Outcome::Ergodic,
            evidence: "balanced fugacity series diverges (sufficient without the boundedness \
                       condition)"
                .into(),
            partial_sums: profile.balanced_partial_sums(64),
        });
    }
    let worst = ss
        .checks
        .iter()
        .max_by(|a, b| a.sup_log.partial_cmp(&b.sup_log).unwrap());
    Ok(Verdict {
        outcome: Outcome::Undecidable,
        evidence: format!(
            "boundedness condition not certified (ratio at d={} reaches exp({:.3}) by k={}); \
             under which additional assumptions a divergent fugacity sum implies ergodicity \
             is an open question",
            worst.map_or(0, |c| c.d),
            worst.map_or(f64::NAN, |c| c.sup_log),
            kmax
        ),
        partial_sums: sum_sums,
    })
}

/// Partial sums `S(I) = sum_{i <= I} sum_k min(mu_i(k), mu_i(k+d))` of the
/// coupling divergence series; monotone nondecreasing in `I` and in the
/// truncation level.
pub fn mineka_divergence_sum(
    b: &RateFunction,
    profile: &FugacityProfile,
    d: u32,
    sites: usize,
    kmax: u32,
) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::invalid("step size must be >= 1"));
    }
    let mut sums = Vec::with_capacity(sites);
    let mut acc = 0.0;
    for i in 0..sites {
        let law = marginal_log(b, profile.log_lambda(i), kmax)?;
        acc += law.min_overlap_shift(d);
        sums.push(acc);
    }
    Ok(sums)
}

/// Exact Bezout certificate: `gcd(D)` together with integer coefficients
/// `x` such that `sum x_i d_i = gcd(D)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BezoutCertificate {
    pub gcd: u64,
    pub coefficients: Vec<i64>,
}

impl BezoutCertificate {
    /// Re-verify the certificate in exact integer arithmetic.
    pub fn verify(&self, dset: &[u64]) -> bool {
        if dset.len() != self.coefficients.len() || dset.is_empty() {
            return false;
        }
        let sum: i128 = dset
            .iter()
            .zip(&self.coefficients)
            .map(|(&d, &x)| d as i128 * x as i128)
            .sum();
        sum == self.gcd as i128 && dset.iter().all(|&d| d % self.gcd == 0)
    }
}

/// Iterated extended Euclid over the set; each pairwise step uses the
/// coefficient of minimal absolute value, so the certificate is
/// deterministic.
pub fn gcd_bezout(dset: &[u64]) -> Result<BezoutCertificate> {
    if dset.is_empty() {
        return Err(Error::EmptySet);
    }
    if dset.iter().any(|&d| d == 0) {
        return Err(Error::invalid("step sizes must be positive"));
    }
    let mut g = dset[0] as i128;
    let mut coeffs: Vec<i128> = vec![1];
    for &d in &dset[1..] {
        let (g2, u, v) = ext_gcd_min(g, d as i128);
        for c in coeffs.iter_mut() {
            *c *= u;
        }
        coeffs.push(v);
        g = g2;
    }
    let cert = BezoutCertificate {
        gcd: g as u64,
        coefficients: coeffs.iter().map(|&c| c as i64).collect(),
    };
    debug_assert!(cert.verify(dset));
    Ok(cert)
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    if a == 0 {
        b
    } else {
        gcd_u64(b % a, a)
    }
}

/// Extended Euclid with `u` reduced to the minimal-absolute-value
/// representative modulo `b/g`.
fn ext_gcd_min(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i128, 0i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    let g = r0;
    let mut u = s0;
    let m = b / g;
    if m != 0 {
        u = u.rem_euclid(m);
        if u > m / 2 && (u - m).abs() < u.abs() {
            u -= m;
        }
    }
    let v = (g - u * a) / b;
    (g, u, v)
}
