//! The anti-particle transformation for finite occupancy alphabets:
//! instead of a particle jumping `x -> y` at rate `p(x,y) b(eta_x, eta_y)`,
//! a hole jumps `y -> x` at the same rate, giving the transformed system
//! `bt(n,k) = b(max-k, max-n)`, `pt(x,y) = p(y,x)` acting on
//! `theta eta = max - eta`. With `pi = (1/lambda) b(max,0)/b(1,max-1)` the
//! product measures satisfy `mu_lambda(max - n) = nu_pi(n)` site by site.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::{log_a_table, marginal_log};
use crate::model::{
    Configuration, DivergenceTags, FugacityProfile, Kernel, OccupancyRange, ProfileKind,
    RateFunction,
};

fn finite_max(b: &RateFunction) -> Result<u32> {
    match b.range() {
        OccupancyRange::Finite { max } => Ok(max),
        OccupancyRange::CountableTruncated { .. } => Err(Error::Unsupported(
            "the anti-particle transformation needs a finite occupancy alphabet".into(),
        )),
    }
}

/// `theta eta = max - eta`, exchanging particles and holes.
pub fn theta(eta: &Configuration) -> Result<Configuration> {
    let max = match eta.range() {
        OccupancyRange::Finite { max } => max,
        _ => {
            return Err(Error::Unsupported(
                "theta needs a finite occupancy alphabet".into(),
            ))
        }
    };
    Configuration::new(
        eta.occupancies().iter().map(|&n| max - n).collect(),
        eta.range(),
    )
}

/// Dualized rate function and kernel: `bt(n,k) = b(max-k, max-n)` and the
/// kernel transpose. The result passes all structural assumptions, and the
/// transformation is an involution.
pub fn dualize(b: &RateFunction, p: &Kernel) -> Result<(RateFunction, Kernel)> {
    let max = finite_max(b)?;
    let values: Vec<Vec<f64>> = (0..=max)
        .map(|n| {
            (0..=max)
                .map(|k| b.rate(max - k, max - n))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let bt = RateFunction::table(OccupancyRange::Finite { max }, values)?;
    let edges: Vec<(usize, usize, f64)> = p.edges().map(|(x, y, r)| (y, x, r)).collect();
    let pt = Kernel::new(p.sites(), &edges, p.boundary())?;
    Ok((bt, pt))
}

/// `log` of the duality constant `c = b(max,0) / b(1,max-1)`.
pub fn log_duality_constant(b: &RateFunction) -> Result<f64> {
    let max = finite_max(b)?;
    Ok(b.log_rate(max, 0)? - b.log_rate(1, max - 1)?)
}

/// Dual fugacities `pi_x = (1/lambda_x) b(max,0)/b(1,max-1)` in log space.
pub fn dual_fugacity_log(b: &RateFunction, log_lambda: &[f64]) -> Result<Vec<f64>> {
    let log_c = log_duality_constant(b)?;
    if log_lambda.iter().any(|&l| l == f64::NEG_INFINITY) {
        return Err(Error::Unsupported(
            "dual fugacity needs lambda > 0 at every site".into(),
        ));
    }
    Ok(log_lambda.iter().map(|&l| log_c - l).collect())
}

/// Dual profile as a symbolic kind, so that the series criteria stay
/// decidable after dualization.
pub fn dual_profile(b: &RateFunction, profile: &FugacityProfile) -> Result<FugacityProfile> {
    let log_c = log_duality_constant(b)?;
    let c = log_c.exp();
    let scale = profile.scale();
    match profile.kind() {
        ProfileKind::Constant { value } => {
            FugacityProfile::new(
                ProfileKind::Constant {
                    value: c / (value * scale),
                },
                1.0,
            )
        }
        ProfileKind::Geometric { ratio } => FugacityProfile::new(
            ProfileKind::Geometric { ratio: 1.0 / ratio },
            c / scale,
        ),
        ProfileKind::Polynomial { alpha } => FugacityProfile::new(
            ProfileKind::Polynomial { alpha: -alpha },
            c / scale,
        ),
        ProfileKind::ExplicitList { values } => FugacityProfile::explicit(
            values.iter().map(|&v| c / (v * scale)).collect(),
        ),
        ProfileKind::FactorialCounterexample => Err(Error::Unsupported(
            "the factorial profile belongs to a countable-alphabet system".into(),
        )),
        ProfileKind::Custom { log_lambda, tags } => {
            let inner = Arc::clone(log_lambda);
            let log_scale = scale.ln();
            FugacityProfile::new(
                ProfileKind::Custom {
                    log_lambda: Arc::new(move |i| log_c - log_scale - inner(i)),
                    tags: DivergenceTags {
                        sum_lambda: None,
                        // The balanced series is invariant under
                        // lambda -> c / lambda.
                        balanced: tags.balanced,
                    },
                },
                1.0,
            )
        }
    }
}

/// Check `mu_lambda(max - n) = nu_pi(n)` for every site and occupancy,
/// where `nu_pi` is built from the dualized weights; returns the max
/// absolute error.
pub fn verify_measure_duality(
    b: &RateFunction,
    p: &Kernel,
    log_lambda: &[f64],
) -> Result<f64> {
    let max = finite_max(b)?;
    let (bt, _) = dualize(b, p)?;
    let log_pi = dual_fugacity_log(b, log_lambda)?;
    let mut max_err = 0.0_f64;
    for (&ll, &lp) in log_lambda.iter().zip(&log_pi) {
        let mu = marginal_log(b, ll, max)?;
        let nu = marginal_log(&bt, lp, max)?;
        for n in 0..=max {
            let err = (mu.prob((max - n) as i64) - nu.prob(n as i64)).abs();
            max_err = max_err.max(err);
        }
    }
    Ok(max_err)
}

/// Relative error of the dual-weight identity
/// `at_n = (b(1,max-1)/b(max,0))^n a_{max-n} / a_max`.
pub fn dual_weight_identity_error(b: &RateFunction, p: &Kernel) -> Result<f64> {
    let max = finite_max(b)?;
    let (bt, _) = dualize(b, p)?;
    let a = log_a_table(b, max)?;
    let at = log_a_table(&bt, max)?;
    let log_c = log_duality_constant(b)?;
    let mut worst = 0.0_f64;
    for n in 0..=max as usize {
        let expect = -(n as f64) * log_c + a[max as usize - n] - a[max as usize];
        worst = worst.max((at[n] - expect).abs());
    }
    Ok(worst)
}

/// The finite-alphabet ergodicity verdict is invariant under dualization.
pub fn criterion_duality_check(b: &RateFunction, profile: &FugacityProfile) -> Result<bool> {
    let primal = crate::ergodicity::finite_w_criterion(profile)?;
    let dual = crate::ergodicity::finite_w_criterion(&dual_profile(b, profile)?)?;
    Ok(primal.outcome == dual.outcome)
}

/// Descriptor-level summary of a dualized system.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DualReport {
    pub max_occupancy: u32,
    pub duality_constant: f64,
    pub rate_table: Vec<Vec<f64>>,
    pub kernel_edges: Vec<(usize, usize, f64)>,
    pub dual_fugacities: Vec<f64>,
    pub measure_identity_max_error: f64,
}

/// Build the full dual system report for a finite-alphabet system.
pub fn dual_report(
    b: &RateFunction,
    p: &Kernel,
    log_lambda: &[f64],
) -> Result<DualReport> {
    let max = finite_max(b)?;
    let (bt, pt) = dualize(b, p)?;
    let table: Vec<Vec<f64>> = (0..=max)
        .map(|n| (0..=max).map(|k| bt.rate(n, k)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    Ok(DualReport {
        max_occupancy: max,
        duality_constant: log_duality_constant(b)?.exp(),
        rate_table: table,
        kernel_edges: pt.edges().collect(),
        dual_fugacities: dual_fugacity_log(b, log_lambda)?
            .iter()
            .map(|l| l.exp())
            .collect(),
        measure_identity_max_error: verify_measure_duality(b, p, log_lambda)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::ergodicity::{finite_w_criterion, Outcome};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exclusion_is_self_dual() {
        let b = RateFunction::exclusion().unwrap();
        let p = Kernel::asymmetric_cycle(4).unwrap();
        let (bt, pt) = dualize(&b, &p).unwrap();
        for n in 0..=1 {
            for k in 0..=1 {
                assert_eq!(bt.rate(n, k).unwrap(), b.rate(n, k).unwrap());
            }
        }
        // Kernel transposed: p(i, i+1) = 1 becomes pt(i+1, i) = 1.
        assert_eq!(pt.rate(1, 0), 1.0);
        assert_eq!(pt.rate(0, 1), 0.0);
    }

    #[test]
    fn dualize_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let max = rng.gen_range(1..=4u32);
            let b = catalog::random_misanthrope(max, &mut rng).unwrap();
            let p = Kernel::cycle(3).unwrap();
            let (bt, pt) = dualize(&b, &p).unwrap();
            let (btt, ptt) = dualize(&bt, &pt).unwrap();
            for n in 0..=max {
                for k in 0..=max {
                    let orig = b.rate(n, k).unwrap();
                    let round = btt.rate(n, k).unwrap();
                    assert!((orig - round).abs() <= 1e-12 * orig.max(1.0));
                }
            }
            for (x, y, r) in p.edges() {
                assert!((ptt.rate(x, y) - r).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dual_fugacity_matches_formula() {
        // Exclusion: c = b(1,0)/b(1,0) = 1, so pi = 1/lambda.
        let b = RateFunction::exclusion().unwrap();
        let pi = dual_fugacity_log(&b, &[2.0_f64.ln()]).unwrap();
        assert!((pi[0] - 0.5_f64.ln()).abs() < 1e-14);

        // Fixed point lambda = sqrt(c).
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let bt = catalog::random_misanthrope(3, &mut rng).unwrap();
        let log_c = log_duality_constant(&bt).unwrap();
        let fixed = 0.5 * log_c;
        let pi = dual_fugacity_log(&bt, &[fixed]).unwrap();
        assert!((pi[0] - fixed).abs() < 1e-12);
    }

    #[test]
    fn measure_duality_exact_for_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let max = rng.gen_range(1..=4u32);
            let b = catalog::random_misanthrope(max, &mut rng).unwrap();
            let p = Kernel::cycle(3).unwrap();
            let ll: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let err = verify_measure_duality(&b, &p, &ll).unwrap();
            assert!(err < 1e-12, "err {err}");
            let ident = dual_weight_identity_error(&b, &p).unwrap();
            assert!(ident < 1e-10, "identity err {ident}");
        }
    }

    #[test]
    fn criterion_invariant_under_dualization() {
        let b = RateFunction::exclusion().unwrap();
        for (profile, outcome) in [
            (FugacityProfile::constant(1.0).unwrap(), Outcome::Ergodic),
            (FugacityProfile::geometric(2.0).unwrap(), Outcome::NotErgodic),
            (FugacityProfile::polynomial(1.0).unwrap(), Outcome::Ergodic),
        ] {
            assert_eq!(finite_w_criterion(&profile).unwrap().outcome, outcome);
            assert!(criterion_duality_check(&b, &profile).unwrap());
        }
    }

    #[test]
    fn countable_ranges_are_rejected() {
        let zr = RateFunction::linear_zero_range(8).unwrap();
        let p = Kernel::cycle(3).unwrap();
        assert!(matches!(dualize(&zr, &p), Err(Error::Unsupported(_))));
    }
}
