//! The factorial-fugacity system: a nearest-neighbour kernel reversible
//! with respect to `lambda_i = (2 i^2 + 1)!` and the bounded rate function
//! `b(n,k) = 1/(2(k+1))!`. The resulting stationary product measure
//! concentrates on the deterministic profile `eta_k = k^2`: the sum
//! `sum_k (1 - P[eta_k = k^2])` is finite, so the measure charges each
//! deviation class with positive probability and is not ergodic even
//! though `sum_i lambda_i` diverges.
//!
//! Everything here runs in log space through log-gamma. Marginal ratios
//! are computed directly from factorial differences rather than through
//! cumulative weight tables, which keeps them accurate to ~1e-12 where the
//! tables would only give ~1e-5 at occupancies near `100^2`.
//!
//! Convention note: the weights generated by `a_k = prod b(1,i)/b(i+1,0)`
//! carry an extra factor `2^k` relative to `prod 1/(2i)!`; the two define
//! the same measure family under the rescaling `lambda -> lambda/2`. The
//! weight table is the single source of truth, and the measure spec built
//! here uses the rescaled fugacities so its marginals are exactly the
//! factorial-profile marginals; the equivalence is verified numerically at
//! build time.

use crate::error::{Error, Result};
use crate::logspace::{ln_gamma, LOG_ZERO};
use crate::measures::ProductMeasureSpec;
use crate::model::{Boundary, FugacityProfile, Kernel, RateFunction};

/// The value of `p(1,2)` forced by `p(0,1) = 1`, `lambda_0 = 1!` and
/// detailed balance at the origin pair: `1 - lambda_0/lambda_1 = 5/6`.
/// Other values stay admissible; they shift the reversible fugacity at
/// site 0 to `lambda_1 (1 - p12)`.
pub const DEFAULT_P12: f64 = 5.0 / 6.0;

/// `log lambda_i = log (2 i^2 + 1)!`.
pub fn log_lambda_paper(i: usize) -> f64 {
    ln_gamma(2.0 * (i as f64) * (i as f64) + 2.0)
}

/// The constructed system, with the kernel kept in log space (down rates
/// underflow linear `f64` beyond ~27 sites while staying exact here).
#[derive(Debug, Clone)]
pub struct CounterexampleSystem {
    pub i_max: usize,
    pub p12: f64,
    pub b: RateFunction,
    /// The factorial profile `lambda_i = (2 i^2 + 1)!`.
    pub profile: FugacityProfile,
    /// Paper fugacities per site.
    pub log_lambda: Vec<f64>,
    /// The fugacity actually reversible for the kernel: equal to
    /// `log_lambda` away from the origin, `lambda_1 (1 - p12)` at site 0.
    pub log_lambda_reversible: Vec<f64>,
    /// `log p(i, i+1)` for `i < i_max`.
    pub log_p_up: Vec<f64>,
    /// `log p(i, i-1)` for `1 <= i <= i_max` (entry 0 unused).
    pub log_p_down: Vec<f64>,
    /// Max residual of `lambda_i p(i,i+1) = lambda_{i+1} p(i+1,i)` in log
    /// units, over all window pairs, for the reversible fugacity.
    pub detailed_balance_residual: f64,
    /// Product-measure spec over the window (rescaled fugacities), with
    /// marginal supports reaching past the largest mode.
    pub spec: ProductMeasureSpec,
}

/// Build the system on sites `0..=i_max`. The kernel recursion
/// `p(i,i+1) = 1 - (lambda_{i-1}/lambda_i) p(i-1,i)` runs in log space;
/// every `p(i,i+1)` is asserted to lie in `(0,1)`.
pub fn build_counterexample(i_max: usize, p12: f64) -> Result<CounterexampleSystem> {
    if i_max < 2 {
        return Err(Error::invalid("counterexample needs i_max >= 2"));
    }
    if !(p12 > 0.0 && p12 < 1.0) {
        return Err(Error::invalid("p(1,2) must lie in (0,1)"));
    }
    let sites = i_max + 1;
    let log_lambda: Vec<f64> = (0..sites).map(log_lambda_paper).collect();

    let mut log_p_up = vec![LOG_ZERO; sites];
    let mut log_p_down = vec![LOG_ZERO; sites];
    log_p_up[0] = 0.0; // p(0,1) = 1
    log_p_down[1] = (1.0 - p12).ln();
    log_p_up[1] = p12.ln();
    for i in 2..sites {
        // p(i, i-1) = (lambda_{i-1}/lambda_i) p(i-1, i).
        let down = log_lambda[i - 1] - log_lambda[i] + log_p_up[i - 1];
        if !(down < 0.0) || down == LOG_ZERO {
            return Err(Error::NumericalUnderflow(format!(
                "log p({i},{}) = {down} is not representable",
                i - 1
            )));
        }
        log_p_down[i] = down;
        // p(i, i+1) = 1 - p(i, i-1), still in (0,1).
        log_p_up[i] = (-down.exp()).ln_1p();
        if !(log_p_up[i] <= 0.0) || log_p_up[i] == LOG_ZERO {
            return Err(Error::NumericalUnderflow(format!(
                "p({i},{}) left (0,1)",
                i + 1
            )));
        }
    }

    let mut log_lambda_reversible = log_lambda.clone();
    log_lambda_reversible[0] = log_lambda[1] + log_p_down[1] - log_p_up[0];

    // Detailed balance, grouped as (ll_i - ll_{i+1}) + (up_i - down_{i+1})
    // so adjacent log-fugacities cancel exactly.
    let mut residual = 0.0_f64;
    for i in 0..i_max {
        let r = (log_lambda_reversible[i] - log_lambda_reversible[i + 1])
            + (log_p_up[i] - log_p_down[i + 1]);
        residual = residual.max(r.abs());
    }

    let margin = 24u32;
    let truncation = (i_max * i_max) as u32 + margin;
    let b = RateFunction::inverse_even_factorial(truncation)?;
    let log_lambda_rescaled: Vec<f64> = log_lambda_reversible
        .iter()
        .map(|&l| l - std::f64::consts::LN_2)
        .collect();
    let spec = ProductMeasureSpec::build_from_log_lambdas(&b, &log_lambda_rescaled, truncation)?;

    // Verify, at small occupancy scales, that the rescaled weight-table
    // marginals equal the factorial-profile marginals computed directly.
    for k in 1..=3usize.min(i_max) {
        let law = spec.marginal(k);
        let mode = (k * k) as i64;
        let direct = mode_mass(k as u32, log_lambda[k]);
        let got = law.prob(mode);
        if (got - direct.mode_prob).abs() > 1e-9 * direct.mode_prob {
            return Err(Error::Invariant(format!(
                "weight-convention mismatch at site {k}: {got} vs {}",
                direct.mode_prob
            )));
        }
    }

    Ok(CounterexampleSystem {
        i_max,
        p12,
        b,
        profile: FugacityProfile::factorial_counterexample(),
        log_lambda,
        log_lambda_reversible,
        log_p_up,
        log_p_down,
        detailed_balance_residual: residual,
        spec,
    })
}

impl CounterexampleSystem {
    /// Materialize the kernel on a window of `sites` sites with linear
    /// rates. Down rates underflow beyond ~27 sites; larger windows are
    /// rejected rather than silently degraded.
    pub fn window_kernel(&self, sites: usize) -> Result<Kernel> {
        if sites < 2 || sites > self.i_max + 1 {
            return Err(Error::invalid(format!(
                "window must have 2..={} sites",
                self.i_max + 1
            )));
        }
        let mut edges = Vec::new();
        for i in 0..sites - 1 {
            let up = self.log_p_up[i].exp();
            if up > 0.0 {
                edges.push((i, i + 1, up));
            }
        }
        for i in 1..sites {
            let down = self.log_p_down[i].exp();
            if down == 0.0 {
                return Err(Error::NumericalUnderflow(format!(
                    "p({i},{}) underflows linear f64; choose a window of at most {i} sites",
                    i - 1
                )));
            }
            edges.push((i, i - 1, down));
        }
        Kernel::new(sites, &edges, Boundary::Closed)
    }

    /// Reversible log-fugacities over a window.
    pub fn window_log_lambda(&self, sites: usize) -> &[f64] {
        &self.log_lambda_reversible[..sites]
    }
}

struct ModeMass {
    mode_prob: f64,
    one_minus: f64,
}

/// `P[eta_k = k^2]` for the factorial-profile marginal with fugacity
/// `exp(log_lambda)`, through relative weights around the mode. Terms
/// decay at least geometrically with ratio `1/(2k^2+1)`, so a handful of
/// factorial differences suffices for full precision.
fn mode_mass(k: u32, log_lambda: f64) -> ModeMass {
    let mode = (k as u64) * (k as u64);
    let mut s = 1.0_f64; // the mode itself
    // Upward: w_{m+n}/w_m = prod_j lambda / (2(m+j))!.
    let mut rel = 0.0_f64;
    let mut n = 0u64;
    loop {
        n += 1;
        rel += log_lambda - ln_gamma(2.0 * (mode + n) as f64 + 1.0);
        let term = rel.exp();
        s += term;
        if term < 1e-18 || n > 200 {
            break;
        }
    }
    // Downward: w_{m-n}/w_m = prod_j (2(m-j))! / lambda.
    rel = 0.0;
    let mut j = 0u64;
    while j < mode {
        rel += ln_gamma(2.0 * (mode - j) as f64 + 1.0) - log_lambda;
        s += rel.exp();
        if rel.exp() < 1e-18 {
            break;
        }
        j += 1;
    }
    ModeMass {
        mode_prob: 1.0 / s,
        one_minus: (s - 1.0) / s,
    }
}

/// Report of the marginal ratio bounds
/// `P[eta_k = k^2 + n] / P[eta_k = k^2] <= (2k^2+2)^{-n}` and
/// `P[eta_k = k^2 - n] / P[eta_k = k^2] <= (2k^2+1)^{-n}`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RatioBoundsReport {
    pub k_max: u32,
    pub pairs_checked: u64,
    /// Max of `log ratio - log bound` upward (should be <= ~1e-10).
    pub max_up_excess: f64,
    pub max_down_excess: f64,
    /// `n = 1` attains the bound with equality, in both directions.
    pub equality_at_one: bool,
}

/// Verify the ratio bounds in log space for `k <= k_max`,
/// `n <= min(k^2, 50)`. The bounds hold with `<=`; at `n = 1` the ratio
/// equals the bound exactly, which is recorded rather than treated as a
/// violation.
pub fn ratio_bounds_check(k_max: u32) -> Result<RatioBoundsReport> {
    if k_max < 1 {
        return Err(Error::invalid("ratio bounds need k_max >= 1"));
    }
    let mut pairs = 0u64;
    let mut max_up = f64::NEG_INFINITY;
    let mut max_down = f64::NEG_INFINITY;
    let mut equality = true;
    for k in 1..=k_max as u64 {
        let mode = k * k;
        let log_lambda = ln_gamma(2.0 * mode as f64 + 2.0);
        let up_base = (2.0 * mode as f64 + 2.0).ln();
        let down_base = (2.0 * mode as f64 + 1.0).ln();
        let n_cap = mode.min(50);

        let mut log_ratio = 0.0_f64;
        for n in 1..=n_cap {
            log_ratio += log_lambda - ln_gamma(2.0 * (mode + n) as f64 + 1.0);
            let excess = log_ratio + n as f64 * up_base;
            max_up = max_up.max(excess);
            pairs += 1;
            if n == 1 && excess.abs() > 1e-10 * up_base {
                equality = false;
            }
        }
        log_ratio = 0.0;
        for n in 1..=n_cap {
            log_ratio += ln_gamma(2.0 * (mode - n + 1) as f64 + 1.0) - log_lambda;
            let excess = log_ratio + n as f64 * down_base;
            max_down = max_down.max(excess);
            pairs += 1;
            if n == 1 && excess.abs() > 1e-10 * down_base {
                equality = false;
            }
        }
    }
    Ok(RatioBoundsReport {
        k_max,
        pairs_checked: pairs,
        max_up_excess: max_up,
        max_down_excess: max_down,
        equality_at_one: equality,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConcentrationReport {
    pub k_max: u32,
    /// `sum_{k=1}^{k_max} (1 - P[eta_k = k^2])`.
    pub deviation_sum: f64,
    /// `2 sum_{k=1}^{k_max} 1/(2k^2)`.
    pub bound: f64,
    /// Every marginal `mu_{lambda_k}` has its unique mode at `k^2`.
    pub modes_at_square: bool,
    /// Site 0 has its mode at 0.
    pub origin_mode_at_zero: bool,
}

/// The concentration estimate behind non-ergodicity: the total deviation
/// mass from the profile `eta_k = k^2` is summable, bounded by
/// `2 sum 1/(2k^2) < pi^2/6`.
pub fn profile_concentration(k_max: u32) -> Result<ConcentrationReport> {
    if k_max < 1 {
        return Err(Error::invalid("concentration needs k_max >= 1"));
    }
    let mut deviation_sum = 0.0_f64;
    let mut bound = 0.0_f64;
    let mut modes_ok = true;
    for k in 1..=k_max {
        let mode = (k as u64) * (k as u64);
        let log_lambda = ln_gamma(2.0 * mode as f64 + 2.0);
        let m = mode_mass(k, log_lambda);
        deviation_sum += m.one_minus;
        bound += 1.0 / (k as f64 * k as f64);
        // Unique mode at k^2: the weight ratio crosses 1 there. Ratios are
        // strictly decreasing in n, so the two boundary checks certify the
        // global argmax.
        let ratio_into_mode = log_lambda - ln_gamma(2.0 * mode as f64 + 1.0);
        let ratio_past_mode = log_lambda - ln_gamma(2.0 * (mode + 1) as f64 + 1.0);
        if !(ratio_into_mode > 0.0 && ratio_past_mode < 0.0) {
            modes_ok = false;
        }
    }
    // Site 0: lambda_0 = 1, first weight ratio lambda_0 a_1/a_0 = 1/2 < 1.
    let origin = mode_mass(0, log_lambda_paper(0));
    let origin_mode_at_zero = origin.mode_prob > 0.5 - 1e-12;
    Ok(ConcentrationReport {
        k_max,
        deviation_sum,
        bound,
        modes_at_square: modes_ok,
        origin_mode_at_zero,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CertificateReport {
    pub k0: u32,
    pub k_max: u32,
    /// `log mu(eta_k = k^2 for all k >= k0)` lower bound.
    pub log_lower_bound: f64,
    pub lower_bound: f64,
    /// `log prod_{k=k0}^{k_max} P[eta_k = k^2]` (the head, computed
    /// exactly).
    pub log_head: f64,
    /// `log prod_{k>k_max} (1 - 1/k^2) = log (k_max/(k_max+1))`, from the
    /// per-site bound `1 - P[eta_k = k^2] <= 1/k^2`.
    pub log_tail_factor: f64,
}

/// A strictly positive lower bound on the probability that the
/// configuration follows the profile from `k0` on. Together with its
/// complement this exhibits disjoint invariant events of positive measure:
/// the partial-sum tail field is not trivial and the measure is not
/// ergodic, even though the fugacity sum diverges.
pub fn nontriviality_certificate(k0: u32, k_max: u32) -> Result<CertificateReport> {
    if k0 < 1 || k_max < k0 {
        return Err(Error::invalid("need 1 <= k0 <= k_max"));
    }
    let mut log_head = 0.0_f64;
    for k in k0..=k_max {
        let mode = (k as u64) * (k as u64);
        let log_lambda = ln_gamma(2.0 * mode as f64 + 2.0);
        let m = mode_mass(k, log_lambda);
        // The geometric ratio bounds give 1 - P <= 1/k^2; re-verify on the
        // computed mass before using the closed-form tail product.
        if m.one_minus > 1.0 / (k as f64 * k as f64) + 1e-12 {
            return Err(Error::Invariant(format!(
                "deviation mass at k={k} exceeds 1/k^2"
            )));
        }
        log_head += m.mode_prob.ln();
    }
    let log_tail_factor = (k_max as f64 / (k_max as f64 + 1.0)).ln();
    let log_lower_bound = log_head + log_tail_factor;
    Ok(CertificateReport {
        k0,
        k_max,
        log_lower_bound,
        lower_bound: log_lower_bound.exp(),
        log_head,
        log_tail_factor,
    })
}
