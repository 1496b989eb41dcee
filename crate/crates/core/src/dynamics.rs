//! Continuous-time simulation of the particle system on finite windows
//! (exact Gillespie jump chain) and Monte Carlo verification of
//! stationarity and of the anti-particle duality at the distribution
//! level.
//!
//! Replicas are embarrassingly parallel; per-replica generators are
//! derived from the master seed by xor with the replica index, so reports
//! are reproducible bit for bit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::duality::{dualize, theta};
use crate::error::{Error, Result};
use crate::measures::ProductMeasureSpec;
use crate::model::{Configuration, Kernel, RateFunction};

/// One exact trajectory of the jump chain.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `(time, from, to)` per jump, strictly increasing in time.
    pub events: Vec<(f64, usize, usize)>,
    pub end: Configuration,
    pub total_jumps: u64,
}

/// Exact-in-law jump chain: exponential holding time at the total rate,
/// move chosen proportionally to `p(x,y) b(eta_x, eta_y)`. Absorbing
/// configurations end the trajectory with no further events.
pub fn gillespie_run(
    b: &RateFunction,
    p: &Kernel,
    eta0: &Configuration,
    t_end: f64,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gillespie_with(b, p, eta0, t_end, &mut rng, true)
}

fn gillespie_with<R: Rng>(
    b: &RateFunction,
    p: &Kernel,
    eta0: &Configuration,
    t_end: f64,
    rng: &mut R,
    record: bool,
) -> Result<Trajectory> {
    if eta0.sites() != p.sites() {
        return Err(Error::invalid("configuration does not match the kernel"));
    }
    let edges: Vec<(usize, usize, f64)> = p.edges().collect();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); p.sites()];
    for (i, &(x, y, _)) in edges.iter().enumerate() {
        incident[x].push(i);
        incident[y].push(i);
    }
    let mut eta = eta0.clone();
    let mut rates: Vec<f64> = edges
        .iter()
        .map(|&(x, y, pxy)| Ok(pxy * b.rate(eta.get(x), eta.get(y))?))
        .collect::<Result<_>>()?;
    let mut total: f64 = rates.iter().sum();
    let mut t = 0.0_f64;
    let mut events = Vec::new();
    let mut total_jumps = 0u64;
    let mut since_rebuild = 0u32;

    loop {
        if total <= 0.0 {
            break;
        }
        let u: f64 = rng.gen();
        t += -(1.0 - u).ln() / total;
        if t > t_end {
            break;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut chosen = usize::MAX;
        for (i, &r) in rates.iter().enumerate() {
            if r <= 0.0 {
                continue;
            }
            target -= r;
            chosen = i;
            if target < 0.0 {
                break;
            }
        }
        let (x, y, _) = edges[chosen];
        eta.set(x, eta.get(x) - 1);
        eta.set(y, eta.get(y) + 1);
        total_jumps += 1;
        if record {
            events.push((t, x, y));
        }
        for &i in incident[x].iter().chain(&incident[y]) {
            let (ex, ey, pxy) = edges[i];
            let new_rate = pxy * b.rate(eta.get(ex), eta.get(ey))?;
            total += new_rate - rates[i];
            rates[i] = new_rate;
        }
        since_rebuild += 1;
        if since_rebuild == 4096 {
            // Fold out accumulated floating-point drift.
            total = rates.iter().sum();
            since_rebuild = 0;
        }
    }
    Ok(Trajectory {
        events,
        end: eta,
        total_jumps,
    })
}

/// Per-site comparison of an empirical occupancy law against an exact
/// marginal.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SiteLawReport {
    pub site: usize,
    /// Total variation between empirical and exact laws.
    pub tv: f64,
    pub empirical: Vec<f64>,
    pub expected: Vec<f64>,
    pub mean_empirical: f64,
    pub mean_expected: f64,
    /// Standard error of the empirical mean under the exact marginal.
    pub sigma_mean: f64,
    /// `|mean_empirical - mean_expected| / sigma_mean`.
    pub z_mean: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct StationarityMcReport {
    pub replicas: usize,
    pub t: f64,
    pub sites: Vec<SiteLawReport>,
    pub max_tv: f64,
    pub max_z: f64,
}

fn site_law_reports(
    ends: &[Configuration],
    spec: &ProductMeasureSpec,
    cap: u32,
) -> Vec<SiteLawReport> {
    let replicas = ends.len();
    let sites = spec.sites();
    let mut reports = Vec::with_capacity(sites);
    for site in 0..sites {
        let mut counts = vec![0u64; cap as usize + 1];
        for end in ends {
            counts[end.get(site) as usize] += 1;
        }
        let empirical: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 / replicas as f64)
            .collect();
        let law = spec.marginal(site);
        let expected: Vec<f64> = (0..=cap as i64).map(|v| law.prob(v)).collect();
        let tv = 0.5
            * empirical
                .iter()
                .zip(&expected)
                .map(|(e, x)| (e - x).abs())
                .sum::<f64>();
        let mean_empirical: f64 = empirical
            .iter()
            .enumerate()
            .map(|(v, &q)| v as f64 * q)
            .sum();
        let mean_expected: f64 = expected
            .iter()
            .enumerate()
            .map(|(v, &q)| v as f64 * q)
            .sum();
        let second: f64 = expected
            .iter()
            .enumerate()
            .map(|(v, &q)| (v * v) as f64 * q)
            .sum();
        let var = (second - mean_expected * mean_expected).max(0.0);
        let sigma_mean = (var / replicas as f64).sqrt();
        let z_mean = if sigma_mean > 0.0 {
            (mean_empirical - mean_expected).abs() / sigma_mean
        } else {
            0.0
        };
        reports.push(SiteLawReport {
            site,
            tv,
            empirical,
            expected,
            mean_empirical,
            mean_expected,
            sigma_mean,
            z_mean,
        });
    }
    reports
}

/// Draw `eta(0) ~ mu_lambda`, run to time `t`, and compare the empirical
/// one-site laws with the exact marginals.
pub fn stationarity_mc(
    b: &RateFunction,
    p: &Kernel,
    spec: &ProductMeasureSpec,
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<StationarityMcReport> {
    if spec.sites() != p.sites() {
        return Err(Error::invalid("measure window does not match kernel"));
    }
    let ends: Vec<Configuration> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
            let eta0 = spec.sample_with(&mut rng);
            gillespie_with(b, p, &eta0, t, &mut rng, false).map(|tr| tr.end)
        })
        .collect::<Result<_>>()?;
    let cap = b.range().cap();
    let sites = site_law_reports(&ends, spec, cap);
    let max_tv = sites.iter().map(|s| s.tv).fold(0.0, f64::max);
    let max_z = sites.iter().map(|s| s.z_mean).fold(0.0, f64::max);
    Ok(StationarityMcReport {
        replicas,
        t,
        sites,
        max_tv,
        max_z,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DualityMcReport {
    pub replicas: usize,
    pub t: f64,
    /// Per-site total variation between the law of `theta eta(t)` under
    /// the original dynamics and the law of the dual process started from
    /// `theta eta(0)`.
    pub per_site_tv: Vec<f64>,
    pub max_tv: f64,
}

/// Distribution-level check of the anti-particle duality: the hole
/// configuration of the original process and the dual process started
/// from the hole configuration must agree in law at every time.
pub fn duality_mc(
    b: &RateFunction,
    p: &Kernel,
    eta0: &Configuration,
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<DualityMcReport> {
    let (bt, pt) = dualize(b, p)?;
    let theta0 = theta(eta0)?;
    let cap = b.range().cap();
    let primal: Vec<Configuration> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (2 * i) as u64);
            gillespie_with(b, p, eta0, t, &mut rng, false).and_then(|tr| theta(&tr.end))
        })
        .collect::<Result<_>>()?;
    let dual: Vec<Configuration> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (2 * i + 1) as u64);
            gillespie_with(&bt, &pt, &theta0, t, &mut rng, false).map(|tr| tr.end)
        })
        .collect::<Result<_>>()?;
    let mut per_site_tv = Vec::with_capacity(p.sites());
    for site in 0..p.sites() {
        let mut counts_a = vec![0u64; cap as usize + 1];
        let mut counts_b = vec![0u64; cap as usize + 1];
        for c in &primal {
            counts_a[c.get(site) as usize] += 1;
        }
        for c in &dual {
            counts_b[c.get(site) as usize] += 1;
        }
        let tv = 0.5
            * counts_a
                .iter()
                .zip(&counts_b)
                .map(|(&a, &b)| (a as f64 - b as f64).abs() / replicas as f64)
                .sum::<f64>();
        per_site_tv.push(tv);
    }
    let max_tv = per_site_tv.iter().cloned().fold(0.0, f64::max);
    Ok(DualityMcReport {
        replicas,
        t,
        per_site_tv,
        max_tv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FugacityProfile, OccupancyRange};

    fn exclusion_eta(occ: Vec<u32>) -> Configuration {
        Configuration::new(occ, OccupancyRange::Finite { max: 1 }).unwrap()
    }

    #[test]
    fn blocked_configuration_has_no_events() {
        let b = RateFunction::exclusion().unwrap();
        let p = Kernel::new(
            2,
            &[(0, 1, 1.0), (1, 0, 1.0)],
            crate::model::Boundary::Closed,
        )
        .unwrap();
        let tr = gillespie_run(&b, &p, &exclusion_eta(vec![1, 1]), 10.0, 3).unwrap();
        assert_eq!(tr.total_jumps, 0);
        assert_eq!(tr.end.occupancies(), &[1, 1]);
    }

    #[test]
    fn trajectories_conserve_and_replay() {
        let b = RateFunction::exclusion().unwrap();
        let p = Kernel::asymmetric_cycle(5).unwrap();
        for seed in 0..50u64 {
            let eta0 = exclusion_eta(vec![1, 0, 1, 0, 1]);
            let tr = gillespie_run(&b, &p, &eta0, 3.0, seed).unwrap();
            assert_eq!(tr.end.total(), eta0.total());
            // Replay: every event must have had positive rate, and times
            // must increase strictly.
            let mut eta = eta0.clone();
            let mut last = 0.0;
            for &(t, x, y) in &tr.events {
                assert!(t > last);
                last = t;
                let rate = crate::model::move_rate(&b, &p, &eta, x, y).unwrap();
                assert!(rate > 0.0, "replayed event had rate 0");
                eta = crate::model::apply_move(&eta, x, y).unwrap();
            }
            assert_eq!(eta, tr.end);
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let b = RateFunction::exclusion().unwrap();
        let p = Kernel::cycle(4).unwrap();
        let eta0 = exclusion_eta(vec![1, 0, 0, 1]);
        let a = gillespie_run(&b, &p, &eta0, 5.0, 99).unwrap();
        let b2 = gillespie_run(&b, &p, &eta0, 5.0, 99).unwrap();
        assert_eq!(a.events, b2.events);
        assert_eq!(a.end, b2.end);
    }

    #[test]
    fn holding_time_mean_matches_rate() {
        // Two-site exclusion with one particle: always exactly one active
        // move at rate 1, so holding times are Exp(1).
        let b = RateFunction::exclusion().unwrap();
        let p = Kernel::new(
            2,
            &[(0, 1, 1.0), (1, 0, 1.0)],
            crate::model::Boundary::Closed,
        )
        .unwrap();
        let replicas = 4000usize;
        let mut sum = 0.0;
        let mut count = 0usize;
        for seed in 0..replicas as u64 {
            let tr = gillespie_run(&b, &p, &exclusion_eta(vec![1, 0]), 50.0, seed).unwrap();
            if let Some(&(t, _, _)) = tr.events.first() {
                sum += t;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let sigma = 1.0 / (count as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn stationary_occupations_stay_in_band() {
        let b = RateFunction::exclusion().unwrap();
        let p = Kernel::asymmetric_cycle(4).unwrap();
        let profile = FugacityProfile::constant(1.0).unwrap();
        let spec = ProductMeasureSpec::build(&b, &profile, 4, 1).unwrap();
        let report = stationarity_mc(&b, &p, &spec, 2.0, 4000, 17).unwrap();
        assert!(report.max_z < 4.0, "max z {}", report.max_z);
    }

    #[test]
    fn perturbed_profile_detected_at_scale() {
        let b = RateFunction::exclusion().unwrap();
        let p = Kernel::asymmetric_cycle(4).unwrap();
        // Start far from the stationary profile: strongly imbalanced.
        let profile = FugacityProfile::explicit(vec![9.0, 0.1, 9.0, 0.1]).unwrap();
        let start = ProductMeasureSpec::build(&b, &profile, 4, 1).unwrap();
        let ends: Vec<Configuration> = (0..4000usize)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(23 ^ i as u64);
                let eta0 = start.sample_with(&mut rng);
                gillespie_with(&b, &p, &eta0, 0.05, &mut rng, false)
                    .unwrap()
                    .end
            })
            .collect();
        // Compare against the balanced stationary marginals: at such a
        // short time the imbalance must still be visible.
        let flat = ProductMeasureSpec::build(
            &b,
            &FugacityProfile::constant(1.0).unwrap(),
            4,
            1,
        )
        .unwrap();
        let reports = site_law_reports(&ends, &flat, 1);
        let max_z = reports.iter().map(|s| s.z_mean).fold(0.0, f64::max);
        assert!(max_z > 5.0, "max z {max_z}");
    }

    #[test]
    fn duality_mc_t0_exact_and_short_time_close() {
        let b = RateFunction::exclusion().unwrap();
        let p = Kernel::asymmetric_cycle(4).unwrap();
        let eta0 = exclusion_eta(vec![1, 1, 0, 0]);
        let report = duality_mc(&b, &p, &eta0, 0.0, 200, 5).unwrap();
        assert_eq!(report.max_tv, 0.0);

        let report = duality_mc(&b, &p, &eta0, 1.0, 20_000, 5).unwrap();
        assert!(report.max_tv < 0.03, "max tv {}", report.max_tv);
    }
}
