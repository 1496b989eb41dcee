//! Product measures built from the rate function: weights `a_k`, partition
//! functions, radius of convergence, one-site marginals, sampling, and the
//! Radon–Nikodym derivative of the elementary move.
//!
//! Everything unnormalized is carried in log space (the counterexample
//! profile has fugacities like `(2 i^2 + 1)!`); normalization goes through
//! log-sum-exp and factorials through log-gamma.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::logspace::{logsumexp, logsumexp_slice, rel_diff_from_logs, LogWeight, LOG_ZERO};
use crate::model::{Configuration, FugacityProfile, OccupancyRange, RateFunction};

/// Tail accounting below this level is treated as exact.
pub const MASS_TOL: f64 = 1e-12;

/// A pmf on a contiguous integer support with tracked truncation loss.
///
/// `sum(pmf) + tail_mass = 1` up to floating-point drift; `tail_mass` is a
/// certified upper bound on the probability outside the stored support.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    offset: i64,
    pmf: Vec<f64>,
    tail_mass: f64,
}

/// Total variation together with the truncation slack of the operands.
#[derive(Debug, Clone, Copy)]
pub struct TvResult {
    /// `1/2 sum_j |a(j) - b(j)|` over the stored supports.
    pub tv: f64,
    /// Upper bound on how much truncated mass could move the exact value.
    pub slack: f64,
}

impl DiscreteLaw {
    pub fn new(offset: i64, pmf: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::invalid("empty pmf"));
        }
        if pmf.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("pmf entries must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&tail_mass) {
            return Err(Error::invalid(format!("tail mass {tail_mass} out of range")));
        }
        let total: f64 = pmf.iter().sum::<f64>() + tail_mass;
        // 1e-9 absorbs drift across long convolution chains; freshly built
        // marginals are checked to MASS_TOL by their constructors.
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "pmf plus tail mass sums to {total}, not 1"
            )));
        }
        Ok(DiscreteLaw {
            offset,
            pmf,
            tail_mass,
        })
    }

    pub fn point_mass(value: i64) -> Self {
        DiscreteLaw {
            offset: value,
            pmf: vec![1.0],
            tail_mass: 0.0,
        }
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn support_min(&self) -> i64 {
        self.offset
    }

    pub fn support_max(&self) -> i64 {
        self.offset + self.pmf.len() as i64 - 1
    }

    pub fn prob(&self, value: i64) -> f64 {
        if value < self.offset {
            return 0.0;
        }
        let idx = (value - self.offset) as usize;
        self.pmf.get(idx).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum::<f64>() + self.tail_mass
    }

    /// Expectation over the stored support.
    pub fn mean(&self) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(i, &p)| (self.offset + i as i64) as f64 * p)
            .sum()
    }

    /// Smallest support value attaining the maximum probability.
    pub fn mode(&self) -> i64 {
        let mut best = 0usize;
        for (i, &p) in self.pmf.iter().enumerate() {
            if p > self.pmf[best] {
                best = i;
            }
        }
        self.offset + best as i64
    }

    pub fn shifted(&self, by: i64) -> DiscreteLaw {
        DiscreteLaw {
            offset: self.offset + by,
            pmf: self.pmf.clone(),
            tail_mass: self.tail_mass,
        }
    }

    /// Exact convolution. Tail masses add (the cross term is second order
    /// and is absorbed into the bound).
    pub fn convolve(&self, other: &DiscreteLaw) -> DiscreteLaw {
        let mut pmf = vec![0.0_f64; self.pmf.len() + other.pmf.len() - 1];
        for (i, &a) in self.pmf.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.pmf.iter().enumerate() {
                pmf[i + j] += a * b;
            }
        }
        DiscreteLaw {
            offset: self.offset + other.offset,
            pmf,
            tail_mass: (self.tail_mass + other.tail_mass).min(1.0),
        }
    }

    /// Drop mass at the support edges, moving at most `budget` into
    /// `tail_mass`.
    pub fn trim(&mut self, budget: f64) {
        if budget <= 0.0 {
            return;
        }
        let mut dropped = 0.0;
        let mut lo = 0usize;
        let mut hi = self.pmf.len();
        loop {
            let advanced = if lo < hi && dropped + self.pmf[lo] <= budget {
                dropped += self.pmf[lo];
                lo += 1;
                true
            } else {
                false
            };
            let retreated = if lo < hi && dropped + self.pmf[hi - 1] <= budget {
                dropped += self.pmf[hi - 1];
                hi -= 1;
                true
            } else {
                false
            };
            if !advanced && !retreated {
                break;
            }
        }
        if lo == hi {
            // Keep one entry so the law stays well formed.
            hi = (lo + 1).min(self.pmf.len());
            lo = hi - 1;
            dropped -= self.pmf[lo];
        }
        if lo > 0 || hi < self.pmf.len() {
            self.pmf = self.pmf[lo..hi].to_vec();
            self.offset += lo as i64;
            self.tail_mass = (self.tail_mass + dropped).min(1.0);
        }
    }

    /// `1/2 sum |a - b|` over the union support, with the truncated mass
    /// reported as slack rather than folded into the value.
    pub fn tv_distance(&self, other: &DiscreteLaw) -> TvResult {
        let lo = self.support_min().min(other.support_min());
        let hi = self.support_max().max(other.support_max());
        let mut sum = 0.0;
        for v in lo..=hi {
            sum += (self.prob(v) - other.prob(v)).abs();
        }
        TvResult {
            tv: 0.5 * sum,
            slack: 0.5 * (self.tail_mass + other.tail_mass),
        }
    }

    /// `sum_k min(p(k), p(k+d))`: the step-overlap mass driving the Mineka
    /// coupling.
    pub fn min_overlap_shift(&self, d: u32) -> f64 {
        let d = d as i64;
        let mut sum = 0.0;
        for v in self.support_min() - d..=self.support_max() {
            sum += self.prob(v).min(self.prob(v + d));
        }
        sum
    }

    /// Inverse-CDF draw; deterministic given the generator state.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.gen::<f64>() * self.total_mass();
        let mut acc = 0.0;
        for (i, &p) in self.pmf.iter().enumerate() {
            acc += p;
            if u < acc {
                return self.offset + i as i64;
            }
        }
        self.support_max()
    }
}

/// Radius of convergence of the partition sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radius {
    /// Finite occupancy alphabet: the partition sum is a polynomial.
    Infinite,
    /// Running infimum of `b(j+1,0)/b(1,j)` over a burn-in window; an
    /// estimate, not a certificate.
    Estimate {
        /// `log` of the running infimum over the tail window.
        log_value: f64,
        /// `log` of the last ratio in the window.
        log_last: f64,
        /// Ratios were nondecreasing across the tail window.
        nondecreasing_tail: bool,
        /// Ratios were flat (relative spread below 1e-9) across the tail
        /// window, which is the evidence used for a finite radius.
        flat_tail: bool,
    },
}

impl Radius {
    /// Whether a fugacity with the given log value is below the radius as
    /// far as the estimate can tell. A flat ratio tail is evidence of a
    /// finite radius and gates the fugacity; a growing tail leaves the
    /// radius effectively unbounded and the truncation check governs
    /// instead.
    pub fn admits_log(&self, log_lambda: f64) -> bool {
        match *self {
            Radius::Infinite => true,
            Radius::Estimate {
                log_value,
                nondecreasing_tail,
                flat_tail,
                ..
            } => {
                if flat_tail || !nondecreasing_tail {
                    log_lambda < log_value
                } else {
                    true
                }
            }
        }
    }
}

/// `log a_k` with `a_k = prod_{i=0}^{k-1} b(1,i) / b(i+1,0)`, computed as a
/// running sum of logs.
pub fn log_a(b: &RateFunction, k: u32) -> Result<LogWeight> {
    let table = log_a_table(b, k)?;
    Ok(LogWeight(table[k as usize]))
}

/// `log a_0 .. log a_kmax` in one pass.
pub fn log_a_table(b: &RateFunction, kmax: u32) -> Result<Vec<f64>> {
    b.range().check(kmax)?;
    let mut table = Vec::with_capacity(kmax as usize + 1);
    table.push(0.0);
    let mut acc = 0.0f64;
    for i in 0..kmax {
        acc += b.log_rate(1, i)? - b.log_rate(i + 1, 0)?;
        table.push(acc);
    }
    Ok(table)
}

/// Radius of convergence: infinite for finite alphabets, otherwise the
/// running infimum of `b(j+1,0)/b(1,j)` over the second half of `[0, k)`.
pub fn radius(b: &RateFunction, k: u32) -> Result<Radius> {
    if b.range().is_finite() {
        return Ok(Radius::Infinite);
    }
    let k = k.min(b.range().cap());
    if k == 0 {
        return Err(Error::invalid("radius estimate needs k >= 1"));
    }
    let ratios: Vec<f64> = (0..k)
        .map(|j| Ok(b.log_rate(j + 1, 0)? - b.log_rate(1, j)?))
        .collect::<Result<_>>()?;
    let burn_in = (ratios.len() / 2).min(ratios.len() - 1);
    let window = &ratios[burn_in..];
    let log_value = window.iter().cloned().fold(f64::INFINITY, f64::min);
    let nondecreasing_tail = window.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let spread = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - log_value;
    Ok(Radius::Estimate {
        log_value,
        log_last: *window.last().unwrap(),
        nondecreasing_tail,
        flat_tail: spread.abs() < 1e-9,
    })
}

/// One-site marginal `mu_lambda(n) = a_n lambda^n / Z_lambda` on
/// `{0, ..., k}`, normalized through log-sum-exp against the partition sum
/// including its certified geometric tail bound. The returned law has
/// `sum(pmf) + tail_mass = 1` exactly.
pub fn marginal(b: &RateFunction, lambda: f64, k: u32) -> Result<DiscreteLaw> {
    if lambda < 0.0 {
        return Err(Error::invalid("fugacity must be >= 0"));
    }
    marginal_log(b, if lambda == 0.0 { LOG_ZERO } else { lambda.ln() }, k)
}

/// [`marginal`] with the fugacity given as `log lambda`.
pub fn marginal_log(b: &RateFunction, log_lambda: f64, k: u32) -> Result<DiscreteLaw> {
    if log_lambda == LOG_ZERO {
        return Ok(DiscreteLaw::point_mass(0));
    }
    let support_cap = match b.range() {
        OccupancyRange::Finite { max } => max,
        OccupancyRange::CountableTruncated { cap } => k.min(cap),
    };
    let radius = radius(b, k.max(2))?;
    let log_a = log_a_table(b, support_cap)?;
    marginal_from_table(&log_a, b.range().is_finite(), &radius, log_lambda)
}

/// Marginal construction from a precomputed weight table; the expensive
/// shared pieces (weight table, radius estimate) are hoisted by callers
/// building many marginals.
fn marginal_from_table(
    log_a: &[f64],
    finite: bool,
    radius: &Radius,
    log_lambda: f64,
) -> Result<DiscreteLaw> {
    if log_lambda == LOG_ZERO {
        return Ok(DiscreteLaw::point_mass(0));
    }
    if !radius.admits_log(log_lambda) {
        return Err(Error::RadiusExceeded {
            site: 0,
            log_lambda,
        });
    }
    let support_cap = log_a.len() - 1;
    let weights: Vec<f64> = log_a
        .iter()
        .enumerate()
        .map(|(n, &la)| la + n as f64 * log_lambda)
        .collect();
    let log_z_window = logsumexp_slice(&weights);

    let (log_z, tail_weight_log) = if finite {
        (log_z_window, LOG_ZERO)
    } else {
        let kk = support_cap;
        let log_ratio = log_a[kk] - log_a[kk - 1] + log_lambda;
        if log_ratio >= 0.0 {
            return Err(Error::TruncationInsufficient {
                cap: support_cap as u32,
                reason: format!(
                    "weight ratio at the truncation level is exp({log_ratio:.3}) >= 1; \
                     no geometric tail bound"
                ),
            });
        }
        // sum_{j > K} w_K r^(j-K) = w_K r / (1 - r).
        let tail_log = weights[kk] + log_ratio - (-log_ratio.exp()).ln_1p();
        (logsumexp(log_z_window, tail_log), tail_log)
    };

    let mut pmf: Vec<f64> = weights.iter().map(|&w| (w - log_z).exp()).collect();
    let mut tail_mass = if tail_weight_log == LOG_ZERO {
        0.0
    } else {
        (tail_weight_log - log_z).exp()
    };
    // Fold out normalization drift in linear space; on supports with
    // ~1e5 factorial-scale weights the log-space route alone leaves
    // ~1e-9 of it.
    let total: f64 = pmf.iter().sum::<f64>() + tail_mass;
    for p in pmf.iter_mut() {
        *p /= total;
    }
    tail_mass /= total;
    DiscreteLaw::new(0, pmf, tail_mass)
}

/// Log-space weights, per-site partition functions and cached marginals for
/// a product measure over a site window.
#[derive(Debug, Clone)]
pub struct ProductMeasureSpec {
    log_a: Vec<f64>,
    log_lambda: Vec<f64>,
    log_z: Vec<f64>,
    marginals: Vec<DiscreteLaw>,
    radius: Radius,
    truncation: u32,
    range: OccupancyRange,
}

impl ProductMeasureSpec {
    /// Build the spec for `sites` sites with per-site fugacities from the
    /// profile. For countable ranges, `truncation` bounds the marginal
    /// supports and each site's certified tail bound must stay below
    /// [`MASS_TOL`].
    pub fn build(
        b: &RateFunction,
        profile: &FugacityProfile,
        sites: usize,
        truncation: u32,
    ) -> Result<Self> {
        let log_lambda = profile.log_lambdas(sites)?;
        Self::build_from_log_lambdas(b, &log_lambda, truncation)
    }

    /// Build from explicit per-site log-fugacities.
    pub fn build_from_log_lambdas(
        b: &RateFunction,
        log_lambda: &[f64],
        truncation: u32,
    ) -> Result<Self> {
        if log_lambda.is_empty() {
            return Err(Error::invalid("product measure needs at least one site"));
        }
        let cap = match b.range() {
            OccupancyRange::Finite { max } => max,
            OccupancyRange::CountableTruncated { cap } => truncation.min(cap),
        };
        let radius = radius(b, cap.max(2))?;
        let log_a = log_a_table(b, cap)?;
        let mut log_z = Vec::with_capacity(log_lambda.len());
        let mut marginals = Vec::with_capacity(log_lambda.len());
        for (site, &ll) in log_lambda.iter().enumerate() {
            if !radius.admits_log(ll) {
                return Err(Error::RadiusExceeded {
                    site,
                    log_lambda: ll,
                });
            }
            let law = marginal_from_table(&log_a, b.range().is_finite(), &radius, ll)?;
            if law.tail_mass() > MASS_TOL {
                return Err(Error::TruncationInsufficient {
                    cap,
                    reason: format!(
                        "site {site} has certified tail bound {:.3e} > {MASS_TOL:.0e}",
                        law.tail_mass()
                    ),
                });
            }
            let z = if ll == LOG_ZERO {
                0.0
            } else {
                logsumexp_slice(
                    &log_a
                        .iter()
                        .enumerate()
                        .map(|(n, &la)| la + n as f64 * ll)
                        .collect::<Vec<_>>(),
                )
            };
            log_z.push(z);
            marginals.push(law);
        }
        Ok(ProductMeasureSpec {
            log_a,
            log_lambda: log_lambda.to_vec(),
            log_z,
            marginals,
            radius,
            truncation: cap,
            range: b.range(),
        })
    }

    pub fn sites(&self) -> usize {
        self.log_lambda.len()
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn range(&self) -> OccupancyRange {
        self.range
    }

    pub fn radius(&self) -> Radius {
        self.radius
    }

    pub fn log_a(&self, n: u32) -> f64 {
        self.log_a[n as usize]
    }

    pub fn log_lambda(&self, site: usize) -> f64 {
        self.log_lambda[site]
    }

    pub fn log_lambdas(&self) -> &[f64] {
        &self.log_lambda
    }

    pub fn log_z(&self, site: usize) -> f64 {
        self.log_z[site]
    }

    pub fn marginal(&self, site: usize) -> &DiscreteLaw {
        &self.marginals[site]
    }

    /// Certified tail bound of a site's marginal.
    pub fn tail_bound(&self, site: usize) -> f64 {
        self.marginals[site].tail_mass()
    }

    /// `log` of the product weight of a configuration (unnormalized).
    pub fn log_weight(&self, eta: &Configuration) -> f64 {
        eta.occupancies()
            .iter()
            .enumerate()
            .map(|(x, &n)| {
                let ll = self.log_lambda[x];
                if n == 0 {
                    self.log_a[0]
                } else {
                    self.log_a[n as usize] + n as f64 * ll
                }
            })
            .sum()
    }

    /// `log mu_lambda(eta)` over the window.
    pub fn log_prob(&self, eta: &Configuration) -> f64 {
        self.log_weight(eta) - self.log_z.iter().sum::<f64>()
    }

    /// Independent per-site draws from the marginals; deterministic given
    /// the seed.
    pub fn sample_configuration(&self, seed: u64) -> Configuration {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: Rng>(&self, rng: &mut R) -> Configuration {
        let occ: Vec<u32> = self
            .marginals
            .iter()
            .map(|law| law.sample(rng).max(0) as u32)
            .collect();
        Configuration::new(occ, self.range).expect("marginal support within range")
    }
}

/// The Radon–Nikodym derivative of the move `eta -> eta^{y,x}` under the
/// product measure: `b(eta_y, eta_x) / b(eta_x + 1, eta_y - 1) *
/// lambda_x / lambda_y`, which equals the direct two-coordinate weight
/// ratio `mu(eta^{y,x}) / mu(eta)` whenever the product-weight identity of
/// the rate function holds.
pub fn rn_move_derivative(
    b: &RateFunction,
    log_lambda: &[f64],
    eta: &Configuration,
    x: usize,
    y: usize,
) -> Result<f64> {
    if x == y || x >= eta.sites() || y >= eta.sites() {
        return Err(Error::invalid(format!("bad site pair ({x},{y})")));
    }
    if eta.get(y) == 0 {
        return Err(Error::MoveForbidden {
            x: y,
            y: x,
            reason: "no particle at source".into(),
        });
    }
    if let OccupancyRange::Finite { max } = eta.range() {
        if eta.get(x) == max {
            return Err(Error::MoveForbidden {
                x: y,
                y: x,
                reason: "target full".into(),
            });
        }
    }
    eta.range().check(eta.get(x) + 1)?;
    let log = b.log_rate(eta.get(y), eta.get(x))? - b.log_rate(eta.get(x) + 1, eta.get(y) - 1)?
        + log_lambda[x]
        - log_lambda[y];
    Ok(log.exp())
}

/// Report of the structural assumptions on `b`: the product-weight
/// identity `b(i+1,j-1)/b(j,i) = [b(1,j-1)/b(j,0)] [b(i+1,0)/b(1,i)]` and
/// the positive infimum `I = inf_i b(i+1,0)/b(1,i)`.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub identity_max_violation: f64,
    pub identity_worst_pair: Option<(u32, u32)>,
    pub identity_holds: bool,
    /// `log I`.
    pub inf_ratio_log: f64,
    /// Index attaining the infimum.
    pub inf_ratio_at: u32,
    /// `I > 0`.
    pub inf_positive: bool,
}

/// Check the product-weight identity for all `i, j <= k` and compute the
/// running infimum of `b(i+1,0)/b(1,i)`.
pub fn check_assumptions(b: &RateFunction, k: u32) -> Result<AssumptionReport> {
    let cap = b.range().cap().min(k);
    if cap == 0 {
        return Err(Error::invalid("assumption check needs k >= 1"));
    }
    let mut max_violation = 0.0_f64;
    let mut worst = None;
    for i in 0..cap {
        for j in 1..=cap {
            let lhs = b.log_rate(i + 1, j - 1)? - b.log_rate(j, i)?;
            let rhs = (b.log_rate(1, j - 1)? - b.log_rate(j, 0)?)
                + (b.log_rate(i + 1, 0)? - b.log_rate(1, i)?);
            let viol = rel_diff_from_logs(lhs, rhs);
            if viol > max_violation {
                max_violation = viol;
                worst = Some((i, j));
            }
        }
    }
    let mut inf_log = f64::INFINITY;
    let mut inf_at = 0u32;
    for i in 0..cap {
        let r = b.log_rate(i + 1, 0)? - b.log_rate(1, i)?;
        if r < inf_log {
            inf_log = r;
            inf_at = i;
        }
    }
    Ok(AssumptionReport {
        identity_max_violation: max_violation,
        identity_worst_pair: worst,
        identity_holds: max_violation <= 1e-10,
        inf_ratio_log: inf_log,
        inf_ratio_at: inf_at,
        inf_positive: inf_log > LOG_ZERO,
    })
}
