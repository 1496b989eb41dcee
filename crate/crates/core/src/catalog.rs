//! Named desk-scale systems and randomized generators used by the
//! verification suites: product-form rate tables, balanced kernels and
//! reversible fugacity/kernel pairs.

use rand::Rng;

use crate::error::Result;
use crate::model::{Boundary, Kernel, OccupancyRange, RateFunction};

/// The gradient family `b(n, k) = scale * n * (max - k)` on a finite
/// alphabet; `max = 1`, `scale = 1` is the exclusion process.
pub fn gradient_table(max: u32, scale: f64) -> Result<RateFunction> {
    let values: Vec<Vec<f64>> = (0..=max)
        .map(|n| {
            (0..=max)
                .map(|k| scale * n as f64 * (max - k) as f64)
                .collect()
        })
        .collect();
    RateFunction::table(OccupancyRange::Finite { max }, values)
}

/// A random rate table satisfying the product-weight identity exactly.
///
/// The identity `b(i+1,j-1) a_{i+1} a_{j-1} = b(j,i) a_j a_i` says that
/// `G(i,j) = a_i a_j b(j,i)` is invariant under the involution
/// `(i,j) -> (j-1, i+1)`. Sampling positive weights `a_k` and one positive
/// `G` value per involution orbit therefore parametrizes the whole family;
/// the one-step-down rates `b(i+1,i)` sit on fixed points and are free.
pub fn random_misanthrope<R: Rng>(max: u32, rng: &mut R) -> Result<RateFunction> {
    let n = max as usize;
    let log_a: Vec<f64> = std::iter::once(0.0)
        .chain((0..n).map(|_| rng.gen_range(-1.0..1.0)))
        .collect();
    // G(i, j) over target i <= max-1, source 1 <= j <= max.
    let mut log_g = vec![vec![f64::NAN; n + 1]; n + 1];
    for i in 0..n {
        for j in 1..=n {
            if log_g[i][j].is_nan() {
                let v = rng.gen_range(-1.0..1.0);
                log_g[i][j] = v;
                log_g[j - 1][i + 1] = v;
            }
        }
    }
    let mut values = vec![vec![0.0_f64; n + 1]; n + 1];
    for j in 1..=n {
        for i in 0..n {
            values[j][i] = (log_g[i][j] - log_a[i] - log_a[j]).exp();
        }
    }
    RateFunction::table(OccupancyRange::Finite { max }, values)
}

/// A random zero-range table `b(n, k) = g(n)` on a truncated countable
/// alphabet.
pub fn random_zero_range<R: Rng>(cap: u32, rng: &mut R) -> Result<RateFunction> {
    let g: Vec<f64> = std::iter::once(0.0)
        .chain((1..=cap).map(|_| rng.gen_range(0.5..2.0)))
        .collect();
    let values: Vec<Vec<f64>> = (0..=cap)
        .map(|n| vec![g[n as usize]; cap as usize + 1])
        .collect();
    RateFunction::table(OccupancyRange::countable(cap)?, values)
}

/// A random kernel whose column sums equal its row sums at every site
/// (so a constant fugacity solves the balance equation), built as a
/// positive combination of directed cycles. Always contains the full cycle,
/// hence irreducible.
pub fn random_balanced_kernel<R: Rng>(sites: usize, rng: &mut R) -> Result<Kernel> {
    let mut weights: std::collections::BTreeMap<(usize, usize), f64> =
        std::collections::BTreeMap::new();
    let add_cycle = |order: &[usize], w: f64, weights: &mut std::collections::BTreeMap<(usize, usize), f64>| {
        for i in 0..order.len() {
            let a = order[i];
            let b = order[(i + 1) % order.len()];
            *weights.entry((a, b)).or_insert(0.0) += w;
        }
    };
    let base: Vec<usize> = (0..sites).collect();
    add_cycle(&base, rng.gen_range(0.2..1.0), &mut weights);
    for _ in 0..rng.gen_range(1..=3usize) {
        let len = rng.gen_range(2..=sites);
        let mut order: Vec<usize> = (0..sites).collect();
        for i in (1..sites).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        order.truncate(len);
        add_cycle(&order, rng.gen_range(0.1..0.8), &mut weights);
    }
    let edges: Vec<(usize, usize, f64)> =
        weights.into_iter().map(|((x, y), w)| (x, y, w)).collect();
    Kernel::new(sites, &edges, Boundary::Periodic)
}

/// A random kernel together with log-fugacities in detailed balance with
/// it: forward rates on a ring are sampled and the backward rates are set
/// to `p(y,x) = lambda_x p(x,y) / lambda_y`.
pub fn random_reversible_pair<R: Rng>(sites: usize, rng: &mut R) -> Result<(Kernel, Vec<f64>)> {
    let log_lambda: Vec<f64> = (0..sites).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut edges = Vec::new();
    for x in 0..sites {
        let y = (x + 1) % sites;
        if sites == 2 && x == 1 {
            break;
        }
        let forward = rng.gen_range(0.5..1.5);
        let backward = forward * (log_lambda[x] - log_lambda[y]).exp();
        edges.push((x, y, forward));
        edges.push((y, x, backward));
    }
    let kernel = Kernel::new(sites, &edges, Boundary::Periodic)?;
    Ok((kernel, log_lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::check_assumptions;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_misanthrope_satisfies_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let max = rng.gen_range(1..=5u32);
            let b = random_misanthrope(max, &mut rng).unwrap();
            let report = check_assumptions(&b, max).unwrap();
            assert!(
                report.identity_max_violation < 1e-12,
                "violation {} at {:?}",
                report.identity_max_violation,
                report.identity_worst_pair
            );
        }
    }

    #[test]
    fn balanced_kernel_has_equal_in_out_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let sites = rng.gen_range(3..=6usize);
            let k = random_balanced_kernel(sites, &mut rng).unwrap();
            for x in 0..sites {
                let out: f64 = k.outgoing(x).iter().map(|&(_, r)| r).sum();
                let inc: f64 = k.incoming(x).iter().map(|&(_, r)| r).sum();
                assert!((out - inc).abs() < 1e-12, "site {x}: {out} vs {inc}");
            }
        }
    }

    #[test]
    fn reversible_pair_satisfies_detailed_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let sites = rng.gen_range(2..=6usize);
            let (k, ll) = random_reversible_pair(sites, &mut rng).unwrap();
            for (x, y, pxy) in k.edges() {
                let lhs = ll[x].exp() * pxy;
                let rhs = ll[y].exp() * k.rate(y, x);
                assert!((lhs - rhs).abs() < 1e-12 * lhs.max(rhs));
            }
        }
    }

    #[test]
    fn gradient_table_matches_exclusion_at_one() {
        let g = gradient_table(1, 1.0).unwrap();
        let e = RateFunction::exclusion().unwrap();
        for n in 0..=1 {
            for k in 0..=1 {
                assert_eq!(g.rate(n, k).unwrap(), e.rate(n, k).unwrap());
            }
        }
    }
}
