//! Stationarity of product measures: condition classification, the
//! trichotomy verdict, exact generator expectations (direct and rearranged
//! forms), Dirichlet forms and the orbit / sector decomposition of finite
//! systems.

use crate::error::{Error, Result};
use crate::logspace::{logsumexp_slice, rel_diff_from_logs, LOG_ZERO};
use crate::measures::{DiscreteLaw, ProductMeasureSpec};
use crate::model::{Kernel, RateFunction};
use crate::statespace::{communication_classes, stationary_law, EnumeratedSpace};

/// Relative tolerance for condition booleans.
pub const CONDITION_TOL: f64 = 1e-10;

/// Residuals of the balance / reversibility / mixed conditions on a
/// fugacity against a kernel.
#[derive(Debug, Clone)]
pub struct LambdaConditionReport {
    /// `sum_x lambda_x p(x,y) = lambda_y sum_x p(y,x)` at every site.
    pub balance_holds: bool,
    pub balance_residual: f64,
    /// `lambda_x p(x,y) = lambda_y p(y,x)` for every pair.
    pub reversible: bool,
    pub reversibility_residual: f64,
    /// Wherever the pair is not reversible, `lambda_x = lambda_y`.
    pub mixed_ok: bool,
    pub mixed_residual: f64,
    /// Every site has a strictly positive fugacity.
    pub all_positive: bool,
}

/// Compute the condition residuals in log space (profiles may be far
/// beyond linear `f64` range).
pub fn lambda_conditions(log_lambda: &[f64], p: &Kernel) -> Result<LambdaConditionReport> {
    if log_lambda.len() != p.sites() {
        return Err(Error::invalid("fugacity window does not match kernel"));
    }
    let all_positive = log_lambda.iter().all(|&l| l > LOG_ZERO);

    let mut balance_residual = 0.0_f64;
    for y in 0..p.sites() {
        let incoming: Vec<f64> = p
            .incoming(y)
            .iter()
            .map(|&(x, r)| log_lambda[x] + r.ln())
            .collect();
        let lhs = logsumexp_slice(&incoming);
        let out_sum: f64 = p.outgoing(y).iter().map(|&(_, r)| r).sum();
        let rhs = log_lambda[y] + out_sum.ln();
        balance_residual = balance_residual.max(rel_diff_from_logs(lhs, rhs));
    }

    let mut reversibility_residual = 0.0_f64;
    let mut mixed_residual = 0.0_f64;
    for (x, y) in p.pairs() {
        let pxy = p.rate(x, y);
        let pyx = p.rate(y, x);
        let lhs = if pxy > 0.0 {
            log_lambda[x] + pxy.ln()
        } else {
            LOG_ZERO
        };
        let rhs = if pyx > 0.0 {
            log_lambda[y] + pyx.ln()
        } else {
            LOG_ZERO
        };
        let resid = rel_diff_from_logs(lhs, rhs);
        reversibility_residual = reversibility_residual.max(resid);
        if resid > CONDITION_TOL {
            mixed_residual = mixed_residual.max(rel_diff_from_logs(log_lambda[x], log_lambda[y]));
        }
    }

    Ok(LambdaConditionReport {
        balance_holds: balance_residual <= CONDITION_TOL,
        balance_residual,
        reversible: reversibility_residual <= CONDITION_TOL,
        reversibility_residual,
        mixed_ok: mixed_residual <= CONDITION_TOL,
        mixed_residual,
        all_positive,
    })
}

/// Structural class of the rate function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateClass {
    /// `b(n,k) = b(n,0)` for all `k`.
    ZeroRange,
    /// `b(n,k) - b(k,n) = b(n,0) - b(k,0)` for all `n, k`; equivalently
    /// `b(n,k) = r(n) + s(n,k)` with `s` symmetric.
    Gradient,
    General,
}

#[derive(Debug, Clone)]
pub struct RateClassReport {
    pub class: RateClass,
    /// Max relative violation of `b(n,k) = b(n,0)`.
    pub zero_range_violation: f64,
    /// Max relative violation of the gradient identity.
    pub gradient_violation: f64,
}

/// Exhaustive identity check over `n, k <= kmax`; returns the strongest
/// class (zero range implies gradient).
pub fn classify_rate(b: &RateFunction, kmax: u32) -> Result<RateClassReport> {
    let cap = b.range().cap().min(kmax);
    let scale = b.sup_rate();
    let mut zr = 0.0_f64;
    let mut grad = 0.0_f64;
    for n in 0..=cap {
        for k in 0..=cap {
            let bnk = b.rate(n, k)?;
            let bn0 = b.rate(n, 0)?;
            zr = zr.max((bnk - bn0).abs() / scale);
            let bkn = b.rate(k, n)?;
            let bk0 = b.rate(k, 0)?;
            grad = grad.max(((bnk - bkn) - (bn0 - bk0)).abs() / scale);
        }
    }
    let class = if zr <= CONDITION_TOL {
        RateClass::ZeroRange
    } else if grad <= CONDITION_TOL {
        RateClass::Gradient
    } else {
        RateClass::General
    };
    Ok(RateClassReport {
        class,
        zero_range_violation: zr,
        gradient_violation: grad,
    })
}

/// Which clause of the stationarity trichotomy applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryCase {
    /// (a) zero-range rate function, fugacity solves the balance equation.
    ZeroRangeBalance,
    /// (b) gradient rate function, balance plus equal fugacities across
    /// non-reversible pairs.
    GradientBalance,
    /// (c) arbitrary rate function, fugacity in detailed balance.
    Reversible,
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Stationary(StationaryCase),
    NotStationary(String),
}

#[derive(Debug, Clone)]
pub struct StationarityReport {
    pub verdict: Verdict,
    pub rate_class: RateClassReport,
    pub conditions: LambdaConditionReport,
}

impl StationarityReport {
    pub fn is_stationary(&self) -> bool {
        matches!(self.verdict, Verdict::Stationary(_))
    }
}

/// The trichotomy: (a) zero range + balance, (b) gradient + balance +
/// mixed condition, (c) any rate function + reversibility; otherwise not
/// stationary, with the first violated condition named.
///
/// Identically-zero fugacities are excluded (the Dirac measure at the
/// empty configuration is a degenerate special case).
pub fn stationarity_verdict(
    b: &RateFunction,
    log_lambda: &[f64],
    p: &Kernel,
) -> Result<StationarityReport> {
    let conditions = lambda_conditions(log_lambda, p)?;
    if !conditions.all_positive {
        return Err(Error::Unsupported(
            "stationarity verdicts require a strictly positive fugacity at every site".into(),
        ));
    }
    let rate_class = classify_rate(b, b.range().cap().min(64))?;

    let verdict = if !conditions.balance_holds {
        Verdict::NotStationary(format!(
            "fugacity does not solve the balance equation (max residual {:.3e})",
            conditions.balance_residual
        ))
    } else {
        match rate_class.class {
            RateClass::ZeroRange => Verdict::Stationary(StationaryCase::ZeroRangeBalance),
            RateClass::Gradient => {
                if conditions.mixed_ok {
                    Verdict::Stationary(StationaryCase::GradientBalance)
                } else if conditions.reversible {
                    Verdict::Stationary(StationaryCase::Reversible)
                } else {
                    Verdict::NotStationary(
                        "gradient rate function needs equal fugacities across non-reversible \
                         pairs"
                            .into(),
                    )
                }
            }
            RateClass::General => {
                if conditions.reversible {
                    Verdict::Stationary(StationaryCase::Reversible)
                } else {
                    Verdict::NotStationary(
                        "general rate function needs a fugacity in detailed balance with the \
                         kernel"
                            .into(),
                    )
                }
            }
        }
    };

    Ok(StationarityReport {
        verdict,
        rate_class,
        conditions,
    })
}

/// A local function on a finite support window.
#[derive(Debug, Clone)]
pub enum LocalFn {
    /// `1{eta_T = v}`; the empty support is the constant function 1.
    Indicator { sites: Vec<usize>, values: Vec<u32> },
    /// Arbitrary values on a product box over the support, mixed-radix
    /// indexed with the first site fastest. Vanishes outside its box.
    Table {
        sites: Vec<usize>,
        caps: Vec<u32>,
        values: Vec<f64>,
    },
}

impl LocalFn {
    pub fn constant_one() -> Self {
        LocalFn::Indicator {
            sites: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn indicator(sites: Vec<usize>, values: Vec<u32>) -> Result<Self> {
        if sites.len() != values.len() {
            return Err(Error::UnsupportedFunction(
                "indicator sites/values length mismatch".into(),
            ));
        }
        Ok(LocalFn::Indicator { sites, values })
    }

    pub fn support(&self) -> &[usize] {
        match self {
            LocalFn::Indicator { sites, .. } | LocalFn::Table { sites, .. } => sites,
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match self {
            LocalFn::Indicator { .. } => 1.0,
            LocalFn::Table { values, .. } => values.iter().fold(0.0, |m, &v| m.max(v.abs())),
        }
    }

    /// Evaluate on occupancies of the support (same order as `support()`);
    /// zero outside the represented box.
    fn eval(&self, occ: &[i64]) -> f64 {
        match self {
            LocalFn::Indicator { values, .. } => {
                for (o, &v) in occ.iter().zip(values) {
                    if *o != v as i64 {
                        return 0.0;
                    }
                }
                1.0
            }
            LocalFn::Table { caps, values, .. } => {
                let mut idx = 0usize;
                let mut stride = 1usize;
                for (o, &cap) in occ.iter().zip(caps) {
                    if *o < 0 || *o > cap as i64 {
                        return 0.0;
                    }
                    idx += *o as usize * stride;
                    stride *= cap as usize + 1;
                }
                values[idx]
            }
        }
    }
}

/// Both routes to `int L f d mu`.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorExpectation {
    /// `sum_eta mu(eta) sum_{x,y} p(x,y) b(eta_x,eta_y)
    /// (f(eta^{x,y}) - f(eta))`.
    pub direct: f64,
    /// `int f sum_{x,y} b(eta_x,eta_y) [p(y,x) lambda_y/lambda_x - p(x,y)]
    /// d mu`, obtained from the change of variables through the move
    /// derivative.
    pub rearranged: f64,
    /// `C_p * sup b * sup |f|`, the natural magnitude for tolerances.
    pub scale: f64,
}

impl GeneratorExpectation {
    pub fn agreement(&self) -> f64 {
        (self.direct - self.rearranged).abs() / self.scale.max(1e-300)
    }
}

/// Exact generator expectation of a local function under a product
/// measure, together with the rearranged form. The two must agree within
/// `1e-10 * scale` for any positive fugacity (the identity does not need
/// stationarity); disagreement is returned as [`Error::FormMismatch`].
pub fn generator_expectation(
    f: &LocalFn,
    b: &RateFunction,
    spec: &ProductMeasureSpec,
    p: &Kernel,
) -> Result<GeneratorExpectation> {
    if spec.sites() != p.sites() {
        return Err(Error::invalid("measure window does not match kernel"));
    }
    if f.support().iter().any(|&t| t >= p.sites()) {
        return Err(Error::UnsupportedFunction(
            "support outside the site window".into(),
        ));
    }
    if spec.log_lambdas().iter().any(|&l| l == LOG_ZERO) {
        return Err(Error::Unsupported(
            "the rearranged form needs strictly positive fugacities".into(),
        ));
    }
    let involved: Vec<usize> = {
        let mut s: Vec<usize> = f.support().to_vec();
        for &t in f.support() {
            for &(y, _) in p.outgoing(t) {
                s.push(y);
            }
            for &(x, _) in p.incoming(t) {
                s.push(x);
            }
        }
        s.sort_unstable();
        s.dedup();
        s
    };
    for &t in &involved {
        if spec.tail_bound(t) > 1e-13 {
            return Err(Error::TruncationInsufficient {
                cap: spec.truncation(),
                reason: format!(
                    "site {t} carries tail bound {:.3e} > 1e-13",
                    spec.tail_bound(t)
                ),
            });
        }
    }

    let mut direct = 0.0_f64;
    for (x, y, pxy) in p.edges() {
        if !f.support().contains(&x) && !f.support().contains(&y) {
            continue; // f(eta^{x,y}) = f(eta)
        }
        let original = expectation_b_f(f, b, spec, x, y, false)?;
        let shifted = expectation_b_f(f, b, spec, x, y, true)?;
        direct += pxy * (shifted - original);
    }

    let mut rearranged = 0.0_f64;
    for (x, y) in p.pairs() {
        for (x, y) in [(x, y), (y, x)] {
            let pxy = p.rate(x, y);
            let pyx = p.rate(y, x);
            let ratio_term = if pyx > 0.0 {
                (pyx.ln() + spec.log_lambda(y) - spec.log_lambda(x)).exp()
            } else {
                0.0
            };
            let coeff = ratio_term - pxy;
            if coeff == 0.0 {
                continue;
            }
            rearranged += coeff * expectation_b_f(f, b, spec, x, y, false)?;
        }
    }

    let scale = p.cp() * b.sup_rate() * f.sup_abs().max(1e-300);
    let report = GeneratorExpectation {
        direct,
        rearranged,
        scale,
    };
    if (direct - rearranged).abs() > 1e-10 * scale {
        return Err(Error::FormMismatch {
            direct,
            rearranged,
        });
    }
    Ok(report)
}

/// `E[ b(eta_x, eta_y) g(eta) ]` where `g = f` or, when `shifted`,
/// `g = f(eta^{x,y})`; factorized over the product marginals.
fn expectation_b_f(
    f: &LocalFn,
    b: &RateFunction,
    spec: &ProductMeasureSpec,
    x: usize,
    y: usize,
    shifted: bool,
) -> Result<f64> {
    match f {
        LocalFn::Indicator { sites, values } => {
            let mut base = 1.0_f64;
            let mut pin_x: Option<i64> = None;
            let mut pin_y: Option<i64> = None;
            for (&t, &v) in sites.iter().zip(values) {
                if t == x {
                    pin_x = Some(v as i64 + if shifted { 1 } else { 0 });
                } else if t == y {
                    pin_y = Some(v as i64 - if shifted { 1 } else { 0 });
                } else {
                    base *= spec.marginal(t).prob(v as i64);
                }
            }
            if base == 0.0 {
                return Ok(0.0);
            }
            Ok(base * pinned_b_expectation(b, spec.marginal(x), spec.marginal(y), pin_x, pin_y)?)
        }
        LocalFn::Table { sites, .. } => {
            // Enumerate the union of the support with {x, y} over the
            // stored marginal supports.
            let mut coords: Vec<usize> = sites.clone();
            for t in [x, y] {
                if !coords.contains(&t) {
                    coords.push(t);
                }
            }
            let supports: Vec<Vec<(i64, f64)>> = coords
                .iter()
                .map(|&t| {
                    let law = spec.marginal(t);
                    (law.support_min()..=law.support_max())
                        .map(|v| (v, law.prob(v)))
                        .filter(|&(_, q)| q > 0.0)
                        .collect()
                })
                .collect();
            let xi = coords.iter().position(|&t| t == x).unwrap();
            let yi = coords.iter().position(|&t| t == y).unwrap();
            let mut occ = vec![0i64; coords.len()];
            let mut total = 0.0_f64;
            enumerate_rec(&supports, 0, 1.0, &mut occ, &mut |occ, weight| {
                let (u, w) = (occ[xi], occ[yi]);
                if u < 0 || w < 0 {
                    return Ok(());
                }
                let rate = b.rate(u as u32, w as u32)?;
                if rate == 0.0 {
                    return Ok(());
                }
                let support_occ: Vec<i64> = sites
                    .iter()
                    .map(|&t| {
                        let pos = coords.iter().position(|&c| c == t).unwrap();
                        let mut v = occ[pos];
                        if shifted {
                            if t == x {
                                v -= 1;
                            } else if t == y {
                                v += 1;
                            }
                        }
                        v
                    })
                    .collect();
                total += weight * rate * f.eval(&support_occ);
                Ok(())
            })?;
            Ok(total)
        }
    }
}

fn enumerate_rec(
    supports: &[Vec<(i64, f64)>],
    depth: usize,
    weight: f64,
    occ: &mut [i64],
    visit: &mut dyn FnMut(&[i64], f64) -> Result<()>,
) -> Result<()> {
    if depth == supports.len() {
        return visit(occ, weight);
    }
    for &(v, q) in &supports[depth] {
        occ[depth] = v;
        enumerate_rec(supports, depth + 1, weight * q, occ, visit)?;
    }
    Ok(())
}

/// `E[ q_x q_y b ]` with optional pinned coordinates; a pin outside the
/// occupancy range contributes zero.
fn pinned_b_expectation(
    b: &RateFunction,
    qx: &DiscreteLaw,
    qy: &DiscreteLaw,
    pin_x: Option<i64>,
    pin_y: Option<i64>,
) -> Result<f64> {
    let cap = b.range().cap() as i64;
    let prob_of = |law: &DiscreteLaw, v: i64| -> f64 {
        if v < 0 || v > cap {
            0.0
        } else {
            law.prob(v)
        }
    };
    match (pin_x, pin_y) {
        (Some(u), Some(w)) => {
            let quw = prob_of(qx, u) * prob_of(qy, w);
            if quw == 0.0 || u == 0 {
                return Ok(0.0);
            }
            Ok(quw * b.rate(u as u32, w as u32)?)
        }
        (Some(u), None) => {
            let qu = prob_of(qx, u);
            if qu == 0.0 || u <= 0 {
                return Ok(0.0);
            }
            let mut sum = 0.0;
            for w in qy.support_min().max(0)..=qy.support_max() {
                let q = qy.prob(w);
                if q > 0.0 {
                    sum += q * b.rate(u as u32, w as u32)?;
                }
            }
            Ok(qu * sum)
        }
        (None, Some(w)) => {
            let qw = prob_of(qy, w);
            if qw == 0.0 || w < 0 {
                return Ok(0.0);
            }
            let mut sum = 0.0;
            for u in qx.support_min().max(1)..=qx.support_max() {
                let q = qx.prob(u);
                if q > 0.0 {
                    sum += q * b.rate(u as u32, w as u32)?;
                }
            }
            Ok(qw * sum)
        }
        (None, None) => {
            let mut sum = 0.0;
            for u in qx.support_min().max(1)..=qx.support_max() {
                let qu = qx.prob(u);
                if qu == 0.0 {
                    continue;
                }
                for w in qy.support_min().max(0)..=qy.support_max() {
                    let qw = qy.prob(w);
                    if qw > 0.0 {
                        sum += qu * qw * b.rate(u as u32, w as u32)?;
                    }
                }
            }
            Ok(sum)
        }
    }
}

/// All indicator functions `1{eta_T = v}` over supports of size
/// `1..=max_support` with values `<= vmax`, a spanning set for local
/// functions on those supports.
pub fn indicator_basis(sites: usize, vmax: u32, max_support: usize) -> Vec<LocalFn> {
    let mut basis = Vec::new();
    let subsets = subsets_up_to(sites, max_support);
    for subset in subsets {
        let k = subset.len();
        let mut values = vec![0u32; k];
        loop {
            basis.push(LocalFn::Indicator {
                sites: subset.clone(),
                values: values.clone(),
            });
            let mut i = 0;
            loop {
                if i == k {
                    break;
                }
                if values[i] < vmax {
                    values[i] += 1;
                    for v in values.iter_mut().take(i) {
                        *v = 0;
                    }
                    break;
                }
                i += 1;
            }
            if i == k {
                break;
            }
        }
    }
    basis
}

fn subsets_up_to(sites: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<usize>, usize)> = vec![(Vec::new(), 0)];
    while let Some((subset, start)) = stack.pop() {
        if !subset.is_empty() {
            out.push(subset.clone());
        }
        if subset.len() == max_len {
            continue;
        }
        for next in start..sites {
            let mut s = subset.clone();
            s.push(next);
            stack.push((s, next + 1));
        }
    }
    out.sort();
    out
}

/// Dirichlet-form pair: `Q(f) = -sum mu f Lf` and
/// `R(f) = 1/2 sum mu sum_moves rate (grad f)^2` over an enumerated space
/// with an explicit pmf `mu`. They agree when `mu` is stationary for the
/// enumerated chain.
pub fn quadratic_forms(space: &EnumeratedSpace, f: &[f64], mu: &[f64]) -> Result<(f64, f64)> {
    if f.len() != space.len() || mu.len() != space.len() {
        return Err(Error::invalid("f / mu length mismatch with space"));
    }
    let mut q = 0.0_f64;
    let mut r = 0.0_f64;
    for s in 0..space.len() {
        let mut lf = 0.0;
        for &(_, _, rate, t) in &space.moves[s] {
            let grad = f[t] - f[s];
            lf += rate * grad;
            r += 0.5 * mu[s] * rate * grad * grad;
        }
        q -= mu[s] * f[s] * lf;
    }
    Ok((q, r))
}

/// Orbit decomposition of an enumerated space under the allowed moves.
#[derive(Debug, Clone)]
pub struct OrbitReport {
    pub orbits: Vec<Vec<usize>>,
    /// Each orbit coincides with a particle-count level set of the space.
    pub matches_level_sets: bool,
}

pub fn orbit_decomposition(space: &EnumeratedSpace) -> OrbitReport {
    let orbits = communication_classes(space);
    let mut by_total: std::collections::BTreeMap<u64, Vec<usize>> = Default::default();
    for (i, s) in space.states.iter().enumerate() {
        by_total.entry(s.total()).or_default().push(i);
    }
    let mut level_sets: Vec<Vec<usize>> = by_total.into_values().collect();
    level_sets.sort_by_key(|c| c[0]);
    let mut sorted = orbits.clone();
    sorted.sort_by_key(|c| c[0]);
    let matches = sorted == level_sets;
    OrbitReport {
        orbits,
        matches_level_sets: matches,
    }
}

#[derive(Debug, Clone)]
pub struct SectorReport {
    pub total: u32,
    pub states: usize,
    /// Max absolute deviation between the solved stationary law of the
    /// sector chain and the product measure conditioned on the sector.
    pub max_deviation: f64,
    /// `mu_lambda(sector)`.
    pub sector_prob: f64,
}

#[derive(Debug, Clone)]
pub struct ComponentsReport {
    pub sectors: Vec<SectorReport>,
    /// Max error of `mu(eta) = pi_m(eta) * mu(sector m)` with the solved
    /// sector laws.
    pub disintegration_max_err: f64,
    pub sector_prob_sum: f64,
}

/// For each requested particle-number sector, solve the restricted chain's
/// stationary law by linear algebra and compare it with the product
/// measure conditioned on the sector; also verify the disintegration of
/// the measure over sectors.
pub fn ergodic_components_finite(
    b: &RateFunction,
    p: &Kernel,
    spec: &ProductMeasureSpec,
    sectors: &[u32],
) -> Result<ComponentsReport> {
    if spec.sites() != p.sites() {
        return Err(Error::invalid("measure window does not match kernel"));
    }
    let log_z_total: f64 = (0..spec.sites()).map(|s| spec.log_z(s)).sum();
    let mut reports = Vec::new();
    let mut disintegration_max_err = 0.0_f64;
    let mut prob_sum = 0.0_f64;
    for &m in sectors {
        let space = crate::statespace::enumerate_sector_space(b, p, m)?;
        let pi = stationary_law(&space)?;
        let log_weights: Vec<f64> = space.states.iter().map(|s| spec.log_weight(s)).collect();
        let log_sector = logsumexp_slice(&log_weights);
        let sector_prob = (log_sector - log_z_total).exp();
        let mut max_dev = 0.0_f64;
        for (s, &lw) in log_weights.iter().enumerate() {
            let conditioned = (lw - log_sector).exp();
            max_dev = max_dev.max((pi[s] - conditioned).abs());
            let mu_direct = (lw - log_z_total).exp();
            disintegration_max_err =
                disintegration_max_err.max((mu_direct - pi[s] * sector_prob).abs());
        }
        prob_sum += sector_prob;
        reports.push(SectorReport {
            total: m,
            states: space.len(),
            max_deviation: max_dev,
            sector_prob,
        });
    }
    Ok(ComponentsReport {
        sectors: reports,
        disintegration_max_err,
        sector_prob_sum: prob_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::statespace::enumerate_box_space;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec_for(
        b: &RateFunction,
        log_lambda: &[f64],
        truncation: u32,
    ) -> ProductMeasureSpec {
        ProductMeasureSpec::build_from_log_lambdas(b, log_lambda, truncation).unwrap()
    }

    #[test]
    fn classify_known_kinds() {
        let zr = RateFunction::linear_zero_range(16).unwrap();
        assert_eq!(classify_rate(&zr, 16).unwrap().class, RateClass::ZeroRange);

        let excl = RateFunction::exclusion().unwrap();
        assert_eq!(classify_rate(&excl, 1).unwrap().class, RateClass::Gradient);

        let grad = catalog::gradient_table(3, 0.7).unwrap();
        assert_eq!(classify_rate(&grad, 3).unwrap().class, RateClass::Gradient);

        // Perturbing one entry of the gradient family breaks the identity.
        let mut values: Vec<Vec<f64>> = (0..=3u32)
            .map(|n| (0..=3u32).map(|k| n as f64 * (3 - k) as f64).collect())
            .collect();
        values[2][1] += 0.4;
        let general = RateFunction::table(
            crate::model::OccupancyRange::Finite { max: 3 },
            values,
        )
        .unwrap();
        assert_eq!(
            classify_rate(&general, 3).unwrap().class,
            RateClass::General
        );
    }

    #[test]
    fn lambda_conditions_on_cycles() {
        let sym = Kernel::cycle(4).unwrap();
        let ll = vec![0.3f64; 4];
        let rep = lambda_conditions(&ll, &sym).unwrap();
        assert!(rep.reversible && rep.balance_holds && rep.mixed_ok);

        let asym = Kernel::asymmetric_cycle(4).unwrap();
        let rep = lambda_conditions(&ll, &asym).unwrap();
        assert!(rep.balance_holds);
        assert!(!rep.reversible);
        assert!(rep.mixed_ok);
    }

    #[test]
    fn reversible_implies_balance_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let sites = rand::Rng::gen_range(&mut rng, 2..=6usize);
            let (kernel, ll) = catalog::random_reversible_pair(sites, &mut rng).unwrap();
            let rep = lambda_conditions(&ll, &kernel).unwrap();
            assert!(rep.reversible, "residual {}", rep.reversibility_residual);
            assert!(rep.balance_holds, "residual {}", rep.balance_residual);
        }
    }

    #[test]
    fn verdicts_follow_the_trichotomy() {
        // (b): exclusion, constant fugacity, asymmetric cycle.
        let excl = RateFunction::exclusion().unwrap();
        let p = Kernel::asymmetric_cycle(4).unwrap();
        let ll = vec![0.0f64; 4];
        let rep = stationarity_verdict(&excl, &ll, &p).unwrap();
        assert!(matches!(
            rep.verdict,
            Verdict::Stationary(StationaryCase::GradientBalance)
        ));

        // (c): general rate function with a reversible fugacity.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = catalog::random_misanthrope(2, &mut rng).unwrap();
        let (kernel, ll) = catalog::random_reversible_pair(3, &mut rng).unwrap();
        let rep = stationarity_verdict(&b, &ll, &kernel).unwrap();
        assert!(matches!(
            rep.verdict,
            Verdict::Stationary(StationaryCase::Reversible)
        ));

        // General b with a merely balanced fugacity is not stationary.
        let p = Kernel::asymmetric_cycle(3).unwrap();
        let rep = stationarity_verdict(&b, &[0.0, 0.0, 0.0], &p).unwrap();
        assert!(matches!(rep.verdict, Verdict::NotStationary(_)));

        // (a): zero range with balance.
        let zr = RateFunction::linear_zero_range(24).unwrap();
        let rep = stationarity_verdict(&zr, &[0.0, 0.0, 0.0], &p).unwrap();
        assert!(matches!(
            rep.verdict,
            Verdict::Stationary(StationaryCase::ZeroRangeBalance)
        ));
    }

    #[test]
    fn generator_vanishes_for_constant_f() {
        let excl = RateFunction::exclusion().unwrap();
        let p = Kernel::cycle(3).unwrap();
        let spec = spec_for(&excl, &[0.0, 0.0, 0.0], 1);
        let rep =
            generator_expectation(&LocalFn::constant_one(), &excl, &spec, &p).unwrap();
        assert_eq!(rep.direct, 0.0);
        assert!(rep.rearranged.abs() <= 1e-12 * rep.scale);
    }

    #[test]
    fn generator_detects_stationarity_and_perturbation() {
        let excl = RateFunction::exclusion().unwrap();
        let p = Kernel::cycle(3).unwrap();
        let spec = spec_for(&excl, &[0.0, 0.0, 0.0], 1);
        let f = LocalFn::indicator(vec![0], vec![1]).unwrap();
        let rep = generator_expectation(&f, &excl, &spec, &p).unwrap();
        assert!(rep.direct.abs() <= 1e-12 * rep.scale, "{:?}", rep);

        let perturbed = spec_for(&excl, &[1.1f64.ln(), 0.0, 0.0], 1);
        let rep = generator_expectation(&f, &excl, &perturbed, &p).unwrap();
        assert!(rep.direct.abs() > 1e-6, "{:?}", rep);
        // The two forms still agree: the identity holds for any product
        // measure, stationary or not.
        assert!(rep.agreement() <= 1e-10);
    }

    #[test]
    fn generator_table_and_indicator_paths_agree() {
        let b = catalog::gradient_table(2, 1.0).unwrap();
        let p = Kernel::asymmetric_cycle(3).unwrap();
        let spec = spec_for(&b, &[0.2, 0.2, 0.2], 2);
        let indicator = LocalFn::indicator(vec![0, 2], vec![1, 2]).unwrap();
        // Same function as a table.
        let mut values = vec![0.0; 9];
        values[1 + 3 * 2] = 1.0;
        let table = LocalFn::Table {
            sites: vec![0, 2],
            caps: vec![2, 2],
            values,
        };
        let a = generator_expectation(&indicator, &b, &spec, &p).unwrap();
        let t = generator_expectation(&table, &b, &spec, &p).unwrap();
        assert!((a.direct - t.direct).abs() < 1e-14);
        assert!((a.rearranged - t.rearranged).abs() < 1e-14);
    }

    #[test]
    fn quadratic_forms_match_on_stationary_measure() {
        let excl = RateFunction::exclusion().unwrap();
        let p = Kernel::cycle(3).unwrap();
        let space = enumerate_box_space(&excl, &p, 1).unwrap();
        let spec = spec_for(&excl, &[0.4, 0.4, 0.4], 1);
        let mu: Vec<f64> = space
            .states
            .iter()
            .map(|s| spec.log_prob(s).exp())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..25 {
            let f: Vec<f64> = (0..space.len())
                .map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0))
                .collect();
            let (q, r) = quadratic_forms(&space, &f, &mu).unwrap();
            assert!(
                (q - r).abs() <= 1e-10 * q.abs().max(r.abs()).max(1e-12),
                "Q {q} R {r}"
            );
        }
        // Constant f: both forms vanish.
        let ones = vec![1.0; space.len()];
        let (q, r) = quadratic_forms(&space, &ones, &mu).unwrap();
        assert_eq!((q, r), (0.0, 0.0));
    }

    #[test]
    fn quadratic_forms_differ_off_stationarity() {
        let excl = RateFunction::exclusion().unwrap();
        let p = Kernel::asymmetric_cycle(3).unwrap();
        let space = enumerate_box_space(&excl, &p, 1).unwrap();
        // A non-stationary pmf: lump extra mass on the first state.
        let n = space.len();
        let mut mu = vec![1.0 / n as f64; n];
        mu[1] += 0.3;
        mu[0] -= 0.3;
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * 0.77).sin()).collect();
        let (q, r) = quadratic_forms(&space, &f, &mu).unwrap();
        assert!((q - r).abs() > 1e-6, "Q {q} R {r}");
    }

    #[test]
    fn orbits_equal_level_sets_on_examples() {
        // 2-site exclusion, symmetric kernel.
        let excl = RateFunction::exclusion().unwrap();
        let p = Kernel::line(2).unwrap();
        let space = enumerate_box_space(&excl, &p, 1).unwrap();
        let rep = orbit_decomposition(&space);
        assert!(rep.matches_level_sets);
        assert_eq!(rep.orbits.len(), 3);

        // 3-site zero range boxed at occupancy 2 on a cycle.
        let zr = RateFunction::linear_zero_range(6).unwrap();
        let p = Kernel::cycle(3).unwrap();
        let space = enumerate_box_space(&zr, &p, 2).unwrap();
        let rep = orbit_decomposition(&space);
        assert!(rep.matches_level_sets);
        assert_eq!(rep.orbits.len(), 7); // m = 0..6
    }

    #[test]
    fn sector_laws_match_conditioned_product_measure() {
        let excl = RateFunction::exclusion().unwrap();
        let p = Kernel::cycle(3).unwrap();
        let spec = spec_for(&excl, &[0.25, 0.25, 0.25], 1);
        let report = ergodic_components_finite(&excl, &p, &spec, &[0, 1, 2, 3]).unwrap();
        for sector in &report.sectors {
            assert!(sector.max_deviation < 1e-10, "{sector:?}");
        }
        // Sector m=1 on the symmetric cycle is uniform over 3 states.
        assert_eq!(report.sectors[1].states, 3);
        assert!(report.disintegration_max_err < 1e-12);
        assert!((report.sector_prob_sum - 1.0).abs() < 1e-12);
    }
}
