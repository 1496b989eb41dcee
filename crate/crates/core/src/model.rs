//! Core domain types: occupancy ranges, rate functions, kernels, fugacity
//! profiles, configurations and the elementary particle move.
//!
//! All types are immutable after construction and safe to share across
//! parallel workers. Sites are a contiguous integer window `0..m` standing
//! in for the countable site set via its ordering bijection; the boundary
//! policy (closed window vs periodic cycle) is a kernel construction
//! parameter.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::logspace::{ln_factorial, LOG_ZERO};

/// Occupancy values a single site may take.
///
/// `Finite { max }` is the hard-capped alphabet `{0, ..., max}`;
/// `CountableTruncated { cap }` enumerates `{0, ..., cap}` on behalf of the
/// full set of naturals and every computation over it reports a tail-mass
/// bound. Values beyond `cap` raise [`Error::TruncationExceeded`] rather
/// than silently extrapolating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OccupancyRange {
    Finite { max: u32 },
    CountableTruncated { cap: u32 },
}

impl OccupancyRange {
    pub fn finite(max: u32) -> Result<Self> {
        if max == 0 {
            return Err(Error::invalid("finite occupancy range needs max >= 1"));
        }
        Ok(OccupancyRange::Finite { max })
    }

    pub fn countable(cap: u32) -> Result<Self> {
        if cap == 0 {
            return Err(Error::invalid("truncation level must be >= 1"));
        }
        Ok(OccupancyRange::CountableTruncated { cap })
    }

    /// Largest representable occupancy (`max` or the truncation level).
    pub fn cap(&self) -> u32 {
        match *self {
            OccupancyRange::Finite { max } => max,
            OccupancyRange::CountableTruncated { cap } => cap,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, OccupancyRange::Finite { .. })
    }

    pub(crate) fn check(&self, value: u32) -> Result<()> {
        if value > self.cap() {
            Err(Error::TruncationExceeded {
                value,
                cap: self.cap(),
            })
        } else {
            Ok(())
        }
    }
}

/// Built-in rate function families plus table and closure escapes.
#[derive(Clone)]
pub enum RateKind {
    /// `b(n,k) = n (1 - k)` on `{0,1}`: the exclusion process.
    Exclusion,
    /// `b(n,k) = n`: linear zero range (independent walkers).
    LinearZeroRange,
    /// `b(n,k) = 1{n >= 1}`: constant-rate zero range.
    ConstantZeroRange,
    /// `b(n,k) = 1{n >= 1} / (2(k+1))!`: the rate function of the
    /// deterministic-profile counterexample.
    InverseEvenFactorial,
    /// Explicit `(cap+1) x (cap+1)` table, row = departure occupancy,
    /// column = target occupancy.
    Table(Vec<Vec<f64>>),
    /// Arbitrary closure; validated by scanning the (possibly sampled)
    /// domain.
    Custom(Arc<dyn Fn(u32, u32) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for RateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateKind::Exclusion => write!(f, "Exclusion"),
            RateKind::LinearZeroRange => write!(f, "LinearZeroRange"),
            RateKind::ConstantZeroRange => write!(f, "ConstantZeroRange"),
            RateKind::InverseEvenFactorial => write!(f, "InverseEvenFactorial"),
            RateKind::Table(_) => write!(f, "Table"),
            RateKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// The jump-rate function `b(n, k)`: `n` particles at the departure site,
/// `k` at the target site.
///
/// Structural invariants enforced at construction:
/// `b(0, k) = 0` (no particle to move), `b(n, max) = 0` for finite ranges
/// (target full), `b > 0` everywhere else, and a finite supremum over the
/// evaluated domain. Rate functions with additional zeros (partial
/// blocking) are rejected.
#[derive(Debug, Clone)]
pub struct RateFunction {
    range: OccupancyRange,
    kind: RateKind,
    sup_log: f64,
}

impl RateFunction {
    pub fn new(range: OccupancyRange, kind: RateKind) -> Result<Self> {
        let mut b = RateFunction {
            range,
            kind,
            sup_log: LOG_ZERO,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn exclusion() -> Result<Self> {
        Self::new(OccupancyRange::Finite { max: 1 }, RateKind::Exclusion)
    }

    pub fn linear_zero_range(cap: u32) -> Result<Self> {
        Self::new(OccupancyRange::countable(cap)?, RateKind::LinearZeroRange)
    }

    pub fn constant_zero_range(cap: u32) -> Result<Self> {
        Self::new(OccupancyRange::countable(cap)?, RateKind::ConstantZeroRange)
    }

    pub fn inverse_even_factorial(cap: u32) -> Result<Self> {
        Self::new(
            OccupancyRange::countable(cap)?,
            RateKind::InverseEvenFactorial,
        )
    }

    pub fn table(range: OccupancyRange, values: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(range, RateKind::Table(values))
    }

    pub fn range(&self) -> OccupancyRange {
        self.range
    }

    pub fn kind(&self) -> &RateKind {
        &self.kind
    }

    /// Supremum of `b` over the evaluated domain.
    pub fn sup_rate(&self) -> f64 {
        self.sup_log.exp()
    }

    /// `log b(n, k)`; `-inf` encodes a forbidden move.
    ///
    /// Rates whose linear value would underflow (the inverse-even-factorial
    /// family at large target occupancy) stay exact here.
    pub fn log_rate(&self, n: u32, k: u32) -> Result<f64> {
        self.range.check(n)?;
        self.range.check(k)?;
        if n == 0 {
            return Ok(LOG_ZERO);
        }
        if let OccupancyRange::Finite { max } = self.range {
            if k == max {
                return Ok(LOG_ZERO);
            }
        }
        Ok(match &self.kind {
            RateKind::Exclusion => {
                // range is {0,1}: only b(1,0) = 1 remains.
                0.0
            }
            RateKind::LinearZeroRange => (n as f64).ln(),
            RateKind::ConstantZeroRange => 0.0,
            RateKind::InverseEvenFactorial => -ln_factorial(2 * (k as u64 + 1)),
            RateKind::Table(values) => {
                let v = values[n as usize][k as usize];
                if v == 0.0 {
                    LOG_ZERO
                } else {
                    v.ln()
                }
            }
            RateKind::Custom(eval) => {
                let v = eval(n, k);
                if v == 0.0 {
                    LOG_ZERO
                } else {
                    v.ln()
                }
            }
        })
    }

    /// `b(n, k)` as a linear value; may underflow to `0.0` where the true
    /// rate is below `f64` range.
    pub fn rate(&self, n: u32, k: u32) -> Result<f64> {
        Ok(self.log_rate(n, k)?.exp())
    }

    fn validate(&mut self) -> Result<()> {
        let cap = self.range.cap();
        match (&self.kind, self.range) {
            (RateKind::Exclusion, OccupancyRange::Finite { max: 1 }) => {}
            (RateKind::Exclusion, _) => {
                return Err(Error::invalid("exclusion requires occupancy range {0,1}"));
            }
            (
                RateKind::LinearZeroRange
                | RateKind::ConstantZeroRange
                | RateKind::InverseEvenFactorial,
                OccupancyRange::Finite { .. },
            ) => {
                return Err(Error::invalid(
                    "zero-range rate functions do not vanish at a full target; \
                     they need a countable occupancy range",
                ));
            }
            (RateKind::Table(values), _) => {
                let rows = cap as usize + 1;
                if values.len() != rows || values.iter().any(|r| r.len() != rows) {
                    return Err(Error::invalid(format!(
                        "rate table must be {rows} x {rows} for this occupancy range"
                    )));
                }
                if values[0].iter().any(|&v| v != 0.0) {
                    return Err(Error::invalid("rate table must have b(0, .) = 0"));
                }
            }
            _ => {}
        }

        // Positivity and boundedness. Closed forms are positive by
        // construction; tables and closures get scanned (closures on a
        // sampled grid when the domain is large).
        let mut sup = LOG_ZERO;
        let scan_all = cap <= 1024 || matches!(self.kind, RateKind::Table(_));
        let stride = if scan_all { 1 } else { (cap / 512).max(1) };
        let mut n = 1u32;
        while n <= cap {
            let mut k = 0u32;
            while k <= cap {
                let lr = self.log_rate(n, k)?;
                if lr > sup {
                    sup = lr;
                }
                let full_target = self.range.is_finite() && k == cap;
                if !full_target && lr == LOG_ZERO {
                    return Err(Error::invalid(format!(
                        "b({n},{k}) = 0: rate functions must be positive away from \
                         the empty-source / full-target boundary"
                    )));
                }
                if !lr.is_finite() && lr != LOG_ZERO {
                    return Err(Error::invalid(format!("b({n},{k}) is not finite")));
                }
                k = k.saturating_add(stride);
            }
            n = n.saturating_add(stride);
        }
        if sup == LOG_ZERO {
            return Err(Error::invalid("rate function is identically zero"));
        }
        self.sup_log = sup;
        Ok(())
    }
}

/// Boundary policy of a site window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Closed,
    Periodic,
}

/// Finite-range transition kernel `p(x, y)` on an ordered site window.
///
/// Stores the constant `C_p = sup_x sum_y (p(x,y) + p(y,x))`, the range
/// bound, and adjacency in both directions. Construction rejects diagonal
/// entries and kernels that are not irreducible as a directed graph on the
/// window.
#[derive(Debug, Clone)]
pub struct Kernel {
    sites: usize,
    out: Vec<Vec<(usize, f64)>>,
    incoming: Vec<Vec<(usize, f64)>>,
    cp: f64,
    range_bound: usize,
    boundary: Boundary,
}

impl Kernel {
    pub fn new(sites: usize, edges: &[(usize, usize, f64)], boundary: Boundary) -> Result<Self> {
        if sites == 0 {
            return Err(Error::invalid("kernel needs at least one site"));
        }
        let mut out = vec![Vec::new(); sites];
        let mut incoming = vec![Vec::new(); sites];
        for &(x, y, r) in edges {
            if x >= sites || y >= sites {
                return Err(Error::invalid(format!(
                    "edge ({x},{y}) outside window of {sites} sites"
                )));
            }
            if x == y {
                return Err(Error::invalid("p(x,x) must be zero"));
            }
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::invalid(format!("edge ({x},{y}) has rate {r}")));
            }
            if out[x].iter().any(|&(t, _)| t == y) {
                return Err(Error::invalid(format!("duplicate edge ({x},{y})")));
            }
            out[x].push((y, r));
            incoming[y].push((x, r));
        }
        for adj in out.iter_mut().chain(incoming.iter_mut()) {
            adj.sort_by_key(|&(t, _)| t);
        }

        let kernel = Kernel {
            sites,
            out,
            incoming,
            cp: 0.0,
            range_bound: 0,
            boundary,
        };
        if !kernel.is_irreducible() {
            return Err(Error::invalid(
                "kernel is not irreducible on the declared window",
            ));
        }

        let mut cp = 0.0_f64;
        for x in 0..sites {
            let s: f64 = kernel.out[x].iter().map(|&(_, r)| r).sum::<f64>()
                + kernel.incoming[x].iter().map(|&(_, r)| r).sum::<f64>();
            cp = cp.max(s);
        }
        let mut range_bound = 0usize;
        for x in 0..sites {
            for &(y, _) in &kernel.out[x] {
                range_bound = range_bound.max(kernel.distance(x, y));
            }
        }
        Ok(Kernel {
            cp,
            range_bound,
            ..kernel
        })
    }

    /// Symmetric nearest-neighbour cycle, `p(i, i±1 mod m) = 1/2`.
    pub fn cycle(sites: usize) -> Result<Self> {
        if sites < 2 {
            return Err(Error::invalid("cycle needs at least 2 sites"));
        }
        let mut edges = Vec::new();
        for i in 0..sites {
            let j = (i + 1) % sites;
            edges.push((i, j, 0.5));
            edges.push((j, i, 0.5));
        }
        edges.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        Self::new(sites, &edges, Boundary::Periodic)
    }

    /// Totally asymmetric cycle, `p(i, i+1 mod m) = 1`.
    pub fn asymmetric_cycle(sites: usize) -> Result<Self> {
        if sites < 2 {
            return Err(Error::invalid("cycle needs at least 2 sites"));
        }
        let edges: Vec<_> = (0..sites).map(|i| (i, (i + 1) % sites, 1.0)).collect();
        Self::new(sites, &edges, Boundary::Periodic)
    }

    /// Symmetric nearest-neighbour segment with closed ends,
    /// `p(i, i±1) = 1/2` inside the window.
    pub fn line(sites: usize) -> Result<Self> {
        if sites < 2 {
            return Err(Error::invalid("line needs at least 2 sites"));
        }
        let mut edges = Vec::new();
        for i in 0..sites - 1 {
            edges.push((i, i + 1, 0.5));
            edges.push((i + 1, i, 0.5));
        }
        Self::new(sites, &edges, Boundary::Closed)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// `p(x, y)`; zero when no edge.
    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.out[x]
            .iter()
            .find(|&&(t, _)| t == y)
            .map_or(0.0, |&(_, r)| r)
    }

    /// Outgoing edges of `x` as `(y, p(x,y))`.
    pub fn outgoing(&self, x: usize) -> &[(usize, f64)] {
        &self.out[x]
    }

    /// Incoming edges of `y` as `(x, p(x,y))`.
    pub fn incoming(&self, y: usize) -> &[(usize, f64)] {
        &self.incoming[y]
    }

    /// All directed edges `(x, y, p(x,y))`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(x, adj)| adj.iter().map(move |&(y, r)| (x, y, r)))
    }

    /// Unordered site pairs carrying an edge in either direction.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for (x, y, _) in self.edges() {
            let key = (x.min(y), x.max(y));
            if !pairs.contains(&key) {
                pairs.push(key);
            }
        }
        pairs.sort_unstable();
        pairs
    }

    /// Stored `C_p`.
    pub fn cp(&self) -> f64 {
        self.cp
    }

    /// Recompute `sup_x sum_y (p(x,y) + p(y,x))` from the adjacency.
    pub fn recompute_cp(&self) -> f64 {
        (0..self.sites)
            .map(|x| {
                self.out[x].iter().map(|&(_, r)| r).sum::<f64>()
                    + self.incoming[x].iter().map(|&(_, r)| r).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn range_bound(&self) -> usize {
        self.range_bound
    }

    fn distance(&self, x: usize, y: usize) -> usize {
        let d = x.abs_diff(y);
        match self.boundary {
            Boundary::Closed => d,
            Boundary::Periodic => d.min(self.sites - d),
        }
    }

    fn is_irreducible(&self) -> bool {
        if self.sites == 1 {
            return true;
        }
        let reach = |adj: &Vec<Vec<(usize, f64)>>| -> bool {
            let mut seen = vec![false; self.sites];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(x) = stack.pop() {
                for &(y, _) in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(&self.out) && reach(&self.incoming)
    }
}

/// Symbolic divergence class of an infinite series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesClass {
    Diverges,
    Converges,
}

/// Declared divergence behaviour for profiles the library cannot classify
/// itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DivergenceTags {
    /// Class of `sum_i lambda_i`.
    pub sum_lambda: Option<SeriesClass>,
    /// Class of `sum_{lambda_i < 1} lambda_i + sum_{lambda_i >= 1} 1/lambda_i`.
    pub balanced: Option<SeriesClass>,
}

/// Fugacity profile kinds. `i` always indexes sites from the origin.
#[derive(Clone)]
pub enum ProfileKind {
    /// `lambda_i = value`.
    Constant { value: f64 },
    /// `lambda_i = ratio^i`.
    Geometric { ratio: f64 },
    /// `lambda_i = (i+1)^alpha`; `alpha = 1` is the linear profile
    /// `1, 2, 3, ...`.
    Polynomial { alpha: f64 },
    /// Per-site values; evaluation outside the list is an error caught at
    /// build time.
    ExplicitList { values: Vec<f64> },
    /// `lambda_i = (2 i^2 + 1)!`, the deterministic-profile counterexample.
    FactorialCounterexample,
    /// Closure returning `log lambda_i`, with optional declared divergence
    /// behaviour for the ergodicity criteria.
    Custom {
        log_lambda: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
        tags: DivergenceTags,
    },
}

impl std::fmt::Debug for ProfileKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProfileKind::Constant { value } => write!(f, "Constant({value})"),
            ProfileKind::Geometric { ratio } => write!(f, "Geometric({ratio})"),
            ProfileKind::Polynomial { alpha } => write!(f, "Polynomial({alpha})"),
            ProfileKind::ExplicitList { values } => write!(f, "ExplicitList(len {})", values.len()),
            ProfileKind::FactorialCounterexample => write!(f, "FactorialCounterexample"),
            ProfileKind::Custom { .. } => write!(f, "Custom"),
        }
    }
}

/// Per-site fugacities `lambda_i = scale * kind(i)`, evaluated in log
/// space so that factorial-scale profiles stay representable.
#[derive(Debug, Clone)]
pub struct FugacityProfile {
    kind: ProfileKind,
    scale: f64,
}

impl FugacityProfile {
    pub fn new(kind: ProfileKind, scale: f64) -> Result<Self> {
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(Error::invalid(format!("profile scale {scale} invalid")));
        }
        match &kind {
            ProfileKind::Constant { value } if *value < 0.0 => {
                return Err(Error::invalid("constant profile needs value >= 0"));
            }
            ProfileKind::Geometric { ratio } if !(*ratio > 0.0) => {
                return Err(Error::invalid("geometric profile needs ratio > 0"));
            }
            ProfileKind::ExplicitList { values } if values.iter().any(|&v| v < 0.0) => {
                return Err(Error::invalid("explicit profile values must be >= 0"));
            }
            _ => {}
        }
        Ok(FugacityProfile { kind, scale })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(ProfileKind::Constant { value }, 1.0)
    }

    pub fn geometric(ratio: f64) -> Result<Self> {
        Self::new(ProfileKind::Geometric { ratio }, 1.0)
    }

    pub fn polynomial(alpha: f64) -> Result<Self> {
        Self::new(ProfileKind::Polynomial { alpha }, 1.0)
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        Self::new(ProfileKind::ExplicitList { values }, 1.0)
    }

    pub fn factorial_counterexample() -> Self {
        FugacityProfile {
            kind: ProfileKind::FactorialCounterexample,
            scale: 1.0,
        }
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `log lambda_i`.
    ///
    /// # Panics
    ///
    /// For `ExplicitList` profiles evaluated outside the list; window sizes
    /// are validated when systems are assembled.
    pub fn log_lambda(&self, i: usize) -> f64 {
        let base = match &self.kind {
            ProfileKind::Constant { value } => value.ln(),
            ProfileKind::Geometric { ratio } => i as f64 * ratio.ln(),
            ProfileKind::Polynomial { alpha } => alpha * ((i + 1) as f64).ln(),
            ProfileKind::ExplicitList { values } => values
                .get(i)
                .unwrap_or_else(|| panic!("explicit profile has no value for site {i}"))
                .ln(),
            ProfileKind::FactorialCounterexample => {
                ln_factorial(2 * (i as u64) * (i as u64) + 1)
            }
            ProfileKind::Custom { log_lambda, .. } => log_lambda(i),
        };
        if self.scale == 1.0 {
            base
        } else if self.scale == 0.0 {
            LOG_ZERO
        } else {
            base + self.scale.ln()
        }
    }

    /// `lambda_i` as a linear value; overflows to `inf` for factorial-scale
    /// profiles, so prefer [`Self::log_lambda`] in computations.
    pub fn lambda(&self, i: usize) -> f64 {
        self.log_lambda(i).exp()
    }

    /// Log-fugacities over a window of sites.
    pub fn log_lambdas(&self, sites: usize) -> Result<Vec<f64>> {
        if let ProfileKind::ExplicitList { values } = &self.kind {
            if values.len() < sites {
                return Err(Error::invalid(format!(
                    "explicit profile has {} values but the window has {sites} sites",
                    values.len()
                )));
            }
        }
        Ok((0..sites).map(|i| self.log_lambda(i)).collect())
    }

    /// True if some prefix value is positive.
    pub fn is_identically_zero(&self, probe: usize) -> bool {
        match &self.kind {
            ProfileKind::Constant { value } => *value == 0.0 || self.scale == 0.0,
            ProfileKind::ExplicitList { values } => {
                self.scale == 0.0 || values.iter().all(|&v| v == 0.0)
            }
            _ => {
                self.scale == 0.0
                    || (0..probe.max(1)).all(|i| self.log_lambda(i) == LOG_ZERO)
            }
        }
    }

    /// Symbolic class of `sum_i lambda_i`, when the kind determines it.
    pub fn sum_lambda_class(&self) -> Option<SeriesClass> {
        if self.scale == 0.0 {
            return Some(SeriesClass::Converges);
        }
        match &self.kind {
            ProfileKind::Constant { value } => Some(if *value > 0.0 {
                SeriesClass::Diverges
            } else {
                SeriesClass::Converges
            }),
            ProfileKind::Geometric { ratio } => Some(if *ratio >= 1.0 {
                SeriesClass::Diverges
            } else {
                SeriesClass::Converges
            }),
            ProfileKind::Polynomial { alpha } => Some(if *alpha >= -1.0 {
                SeriesClass::Diverges
            } else {
                SeriesClass::Converges
            }),
            ProfileKind::FactorialCounterexample => Some(SeriesClass::Diverges),
            ProfileKind::ExplicitList { .. } => None,
            ProfileKind::Custom { tags, .. } => tags.sum_lambda,
        }
    }

    /// Symbolic class of the balanced series
    /// `sum_{lambda_i < 1} lambda_i + sum_{lambda_i >= 1} 1/lambda_i`,
    /// when the kind determines it. Invariant under `lambda -> c/lambda`,
    /// so in particular under the dual-profile map.
    pub fn balanced_series_class(&self) -> Option<SeriesClass> {
        if self.scale == 0.0 {
            return Some(SeriesClass::Converges);
        }
        match &self.kind {
            ProfileKind::Constant { value } => Some(if *value > 0.0 {
                SeriesClass::Diverges
            } else {
                SeriesClass::Converges
            }),
            ProfileKind::Geometric { ratio } => Some(if *ratio == 1.0 {
                SeriesClass::Diverges
            } else {
                SeriesClass::Converges
            }),
            ProfileKind::Polynomial { alpha } => Some(if alpha.abs() <= 1.0 {
                SeriesClass::Diverges
            } else {
                SeriesClass::Converges
            }),
            ProfileKind::FactorialCounterexample => Some(SeriesClass::Converges),
            ProfileKind::ExplicitList { .. } => None,
            ProfileKind::Custom { tags, .. } => tags.balanced,
        }
    }

    /// Number of sites the profile is defined on, when bounded.
    pub fn len_hint(&self) -> Option<usize> {
        match &self.kind {
            ProfileKind::ExplicitList { values } => Some(values.len()),
            _ => None,
        }
    }

    /// Partial sums of the balanced series over the first `terms` sites;
    /// numeric evidence, not a verdict.
    pub fn balanced_partial_sums(&self, terms: usize) -> Vec<f64> {
        let terms = self.len_hint().map_or(terms, |l| terms.min(l));
        let mut sums = Vec::with_capacity(terms);
        let mut acc = 0.0;
        for i in 0..terms {
            let ll = self.log_lambda(i);
            let term = if ll == LOG_ZERO {
                0.0
            } else if ll < 0.0 {
                ll.exp()
            } else {
                (-ll).exp()
            };
            acc += term;
            sums.push(acc);
        }
        sums
    }
}

/// Occupation numbers on a finite site window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    occupancies: Vec<u32>,
    range: OccupancyRange,
}

impl Configuration {
    pub fn new(occupancies: Vec<u32>, range: OccupancyRange) -> Result<Self> {
        for &n in &occupancies {
            range.check(n)?;
        }
        Ok(Configuration { occupancies, range })
    }

    pub fn zeros(sites: usize, range: OccupancyRange) -> Self {
        Configuration {
            occupancies: vec![0; sites],
            range,
        }
    }

    pub fn sites(&self) -> usize {
        self.occupancies.len()
    }

    pub fn range(&self) -> OccupancyRange {
        self.range
    }

    pub fn get(&self, x: usize) -> u32 {
        self.occupancies[x]
    }

    pub fn occupancies(&self) -> &[u32] {
        &self.occupancies
    }

    /// Total particle count on the window.
    pub fn total(&self) -> u64 {
        self.occupancies.iter().map(|&n| n as u64).sum()
    }

    pub(crate) fn set(&mut self, x: usize, value: u32) {
        self.occupancies[x] = value;
    }
}

/// `eta - delta_x + delta_y`: move one particle from `x` to `y`.
///
/// Fails with [`Error::MoveForbidden`] exactly when the rate function would
/// vanish at the move (empty source or, for finite ranges, full target),
/// and with [`Error::TruncationExceeded`] when a countable target is
/// already at the truncation level.
pub fn apply_move(eta: &Configuration, x: usize, y: usize) -> Result<Configuration> {
    let sites = eta.sites();
    if x >= sites || y >= sites {
        return Err(Error::invalid(format!(
            "sites ({x},{y}) outside window of {sites} sites"
        )));
    }
    if x == y {
        return Err(Error::MoveForbidden {
            x,
            y,
            reason: "source equals target".into(),
        });
    }
    if eta.get(x) == 0 {
        return Err(Error::MoveForbidden {
            x,
            y,
            reason: "no particle at source".into(),
        });
    }
    match eta.range() {
        OccupancyRange::Finite { max } => {
            if eta.get(y) == max {
                return Err(Error::MoveForbidden {
                    x,
                    y,
                    reason: "target full".into(),
                });
            }
        }
        OccupancyRange::CountableTruncated { cap } => {
            if eta.get(y) == cap {
                return Err(Error::TruncationExceeded {
                    value: cap + 1,
                    cap,
                });
            }
        }
    }
    let mut next = eta.clone();
    next.set(x, eta.get(x) - 1);
    next.set(y, eta.get(y) + 1);
    Ok(next)
}

/// `p(x,y) * b(eta_x, eta_y)`: the rate of the elementary move. Zero
/// exactly when the move is forbidden or the kernel has no edge.
pub fn move_rate(
    b: &RateFunction,
    p: &Kernel,
    eta: &Configuration,
    x: usize,
    y: usize,
) -> Result<f64> {
    if x == y {
        return Ok(0.0);
    }
    let pxy = p.rate(x, y);
    if pxy == 0.0 {
        return Ok(0.0);
    }
    Ok(pxy * b.rate(eta.get(x), eta.get(y))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exclusion_config(occ: Vec<u32>) -> Configuration {
        Configuration::new(occ, OccupancyRange::Finite { max: 1 }).unwrap()
    }

    #[test]
    fn apply_move_transfers_single_particle() {
        let eta = exclusion_config(vec![1, 0]);
        let moved = apply_move(&eta, 0, 1).unwrap();
        assert_eq!(moved.occupancies(), &[0, 1]);
    }

    #[test]
    fn apply_move_rejects_full_target() {
        let eta = Configuration::new(vec![2, 3], OccupancyRange::Finite { max: 3 }).unwrap();
        match apply_move(&eta, 0, 1) {
            Err(Error::MoveForbidden { .. }) => {}
            other => panic!("expected MoveForbidden, got {other:?}"),
        }
    }

    #[test]
    fn apply_move_keeps_other_coordinates() {
        let eta = exclusion_config(vec![1, 1, 0]);
        let moved = apply_move(&eta, 1, 2).unwrap();
        assert_eq!(moved.occupancies(), &[1, 0, 1]);
        assert_eq!(moved.total(), eta.total());
    }

    #[test]
    fn move_rate_matches_direct_evaluation() {
        let b = RateFunction::exclusion().unwrap();
        let p = Kernel::new(2, &[(0, 1, 1.0), (1, 0, 1.0)], Boundary::Closed).unwrap();
        let eta = exclusion_config(vec![1, 0]);
        assert_eq!(move_rate(&b, &p, &eta, 0, 1).unwrap(), 1.0);
        let blocked = exclusion_config(vec![1, 1]);
        assert_eq!(move_rate(&b, &p, &blocked, 0, 1).unwrap(), 0.0);

        let zr = RateFunction::linear_zero_range(16).unwrap();
        let p2 = Kernel::new(2, &[(0, 1, 0.5), (1, 0, 0.5)], Boundary::Closed).unwrap();
        let eta2 = Configuration::new(vec![3, 5], OccupancyRange::countable(16).unwrap()).unwrap();
        assert!((move_rate(&zr, &p2, &eta2, 0, 1).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn move_rate_positive_iff_move_allowed() {
        // Exhaustive over a small exclusion window.
        let b = RateFunction::exclusion().unwrap();
        let p = Kernel::cycle(3).unwrap();
        let range = OccupancyRange::Finite { max: 1 };
        for bits in 0..8u32 {
            let occ: Vec<u32> = (0..3).map(|i| (bits >> i) & 1).collect();
            let eta = Configuration::new(occ, range).unwrap();
            for x in 0..3 {
                for y in 0..3 {
                    if x == y {
                        continue;
                    }
                    let rate = move_rate(&b, &p, &eta, x, y).unwrap();
                    let allowed = apply_move(&eta, x, y).is_ok() && p.rate(x, y) > 0.0;
                    assert_eq!(rate > 0.0, allowed, "eta {eta:?} move {x}->{y}");
                    if let Ok(next) = apply_move(&eta, x, y) {
                        assert_eq!(next.total(), eta.total());
                    }
                }
            }
        }
    }

    #[test]
    fn kernel_stores_cp_and_rejects_bad_input() {
        let k = Kernel::asymmetric_cycle(4).unwrap();
        assert!((k.cp() - k.recompute_cp()).abs() < 1e-15);
        assert_eq!(k.cp(), 2.0);
        assert_eq!(k.range_bound(), 1);

        assert!(Kernel::new(2, &[(0, 0, 1.0)], Boundary::Closed).is_err());
        // One-directional edge only: not irreducible.
        assert!(Kernel::new(3, &[(0, 1, 1.0), (1, 0, 1.0)], Boundary::Closed).is_err());
    }

    #[test]
    fn rate_function_validation_rejects_partial_blocking() {
        let range = OccupancyRange::Finite { max: 2 };
        // b(2,1) = 0 is a zero away from the boundary.
        let table = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.5, 0.0],
            vec![2.0, 0.0, 0.0],
        ];
        assert!(RateFunction::table(range, table).is_err());

        let ok = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.5, 0.0],
            vec![2.0, 1.5, 0.0],
        ];
        let b = RateFunction::table(range, ok).unwrap();
        assert!((b.sup_rate() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn factorial_profile_stays_in_log_space() {
        let prof = FugacityProfile::factorial_counterexample();
        // lambda_0 = 1! = 1, lambda_1 = 3! = 6, lambda_2 = 9!.
        assert!((prof.log_lambda(0) - 0.0).abs() < 1e-12);
        assert!((prof.log_lambda(1) - 6.0_f64.ln()).abs() < 1e-12);
        assert!((prof.log_lambda(2) - 362880.0_f64.ln()).abs() < 1e-9);
        // i = 100 is far beyond f64 range but finite in log space.
        assert!(prof.log_lambda(100).is_finite());
    }

    #[test]
    fn series_classes_match_known_profiles() {
        use SeriesClass::*;
        let ones = FugacityProfile::constant(1.0).unwrap();
        assert_eq!(ones.balanced_series_class(), Some(Diverges));
        let geo = FugacityProfile::geometric(2.0).unwrap();
        assert_eq!(geo.balanced_series_class(), Some(Converges));
        assert_eq!(geo.sum_lambda_class(), Some(Diverges));
        let linear = FugacityProfile::polynomial(1.0).unwrap();
        assert_eq!(linear.balanced_series_class(), Some(Diverges));
        let steep = FugacityProfile::polynomial(1.5).unwrap();
        assert_eq!(steep.balanced_series_class(), Some(Converges));
        let fact = FugacityProfile::factorial_counterexample();
        assert_eq!(fact.sum_lambda_class(), Some(Diverges));
        assert_eq!(fact.balanced_series_class(), Some(Converges));
    }
}
