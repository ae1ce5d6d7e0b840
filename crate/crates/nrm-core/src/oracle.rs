//! Independent brute-force references: stick-breaking Dirichlet-process
//! sampling for laws of means, set-partition enumeration, and a two-sample
//! Kolmogorov–Smirnov helper. These back the cross-checks of the inversion
//! routines and never share code with them.

use rand::Rng;

use crate::curve::{CurveKind, DistCurve};
use crate::error::{Error, Result};
use crate::exec;
use crate::measure::BaseMeasure;

/// A normalized discrete measure: weights sum to one.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    pub atoms: Vec<(f64, f64)>,
}

impl DiscreteMeasure {
    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn mean_of(&self, h: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(x, w)| w * h(x)).sum()
    }
}

/// Sethuraman stick-breaking draw of a Dirichlet process with parameter α:
/// weights w_k = v_k Π_{i<k}(1 - v_i) with v_k ~ Beta(1, a), locations i.i.d.
/// from α/a. Stops once the remaining stick is below `remainder_tol` and
/// assigns the leftover to one extra draw, keeping weights unbiased.
pub fn stick_breaking_dp(
    alpha: &BaseMeasure,
    remainder_tol: f64,
    rng: &mut impl Rng,
) -> Result<DiscreteMeasure> {
    if !(remainder_tol > 0.0 && remainder_tol < 1.0) {
        return Err(Error::Domain(format!(
            "remainder tolerance must be in (0, 1), got {remainder_tol}"
        )));
    }
    let a = alpha.total_mass();
    let mut atoms = Vec::new();
    let mut remaining = 1.0;
    while remaining >= remainder_tol {
        // Beta(1, a) by inversion: v = 1 - u^{1/a}
        let v = 1.0 - rng.random::<f64>().powf(1.0 / a);
        let w = v * remaining;
        atoms.push((alpha.sample(rng), w));
        remaining *= 1.0 - v;
        if atoms.len() > 50_000_000 {
            return Err(Error::Numeric("stick-breaking failed to terminate".into()));
        }
    }
    atoms.push((alpha.sample(rng), remaining));
    Ok(DiscreteMeasure { atoms })
}

/// Monte Carlo draws of the Dirichlet mean ∫ h dD over `samples` processes.
/// Sample i uses the i-th substream of `seed`, so results do not depend on
/// thread count.
pub fn mean_samples(
    alpha: &BaseMeasure,
    h: impl Fn(f64) -> f64 + Sync + Send,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let alpha = alpha.clone();
    let results = exec::map_indexed(samples, |i| {
        let mut rng = exec::substream(seed, i as u64);
        stick_breaking_dp(&alpha, 1e-8, &mut rng).map(|m| m.mean_of(&h))
    });
    results.into_iter().collect()
}

/// Empirical CDF of the Dirichlet mean on `grid`, with a standard-error band.
pub fn mc_mean_cdf(
    alpha: &BaseMeasure,
    h: impl Fn(f64) -> f64 + Sync + Send,
    samples: usize,
    grid: &[f64],
    seed: u64,
) -> Result<DistCurve> {
    if samples < 1_000 {
        return Err(Error::Domain(format!("need at least 1000 samples, got {samples}")));
    }
    let mut means = mean_samples(alpha, h, samples, seed)?;
    means.sort_by(f64::total_cmp);
    let n = means.len() as f64;
    let values: Vec<f64> = grid
        .iter()
        .map(|&sigma| means.partition_point(|&m| m <= sigma) as f64 / n)
        .collect();
    let stderr = values.iter().map(|&p| (p * (1.0 - p) / n).sqrt()).collect();
    let mut curve = DistCurve::new(grid.to_vec(), values, CurveKind::Cdf, 0.0);
    curve.stderr = Some(stderr);
    Ok(curve)
}

/// All set partitions of {0, .., n-1} in lexicographic restricted-growth
/// order; yields the cells of each partition.
pub struct SetPartitions {
    rgs: Vec<usize>,
    n: usize,
    done: bool,
    started: bool,
}

impl SetPartitions {
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 || n > 10 {
            return Err(Error::SizeLimit(format!("partition enumeration supports 1 ≤ n ≤ 10, got {n}")));
        }
        Ok(SetPartitions { rgs: vec![0; n], n, done: false, started: false })
    }

    fn cells(&self) -> Vec<Vec<usize>> {
        let k = self.rgs.iter().copied().max().unwrap() + 1;
        let mut cells = vec![Vec::new(); k];
        for (i, &c) in self.rgs.iter().enumerate() {
            cells[c].push(i);
        }
        cells
    }

    fn advance(&mut self) -> bool {
        // lexicographic successor of a restricted-growth string
        for j in (1..self.n).rev() {
            let prefix_max = self.rgs[..j].iter().copied().max().unwrap();
            if self.rgs[j] <= prefix_max {
                self.rgs[j] += 1;
                for v in &mut self.rgs[j + 1..] {
                    *v = 0;
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for SetPartitions {
    type Item = Vec<Vec<usize>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if self.started && !self.advance() {
            self.done = true;
            return None;
        }
        self.started = true;
        Some(self.cells())
    }
}

/// Convenience wrapper matching the enumeration contract.
pub fn enumerate_partitions(n: usize) -> Result<SetPartitions> {
    SetPartitions::new(n)
}

pub fn bell_number(n: usize) -> u64 {
    const BELL: [u64; 11] = [1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975];
    BELL[n]
}

/// Asymptotic two-sample Kolmogorov–Smirnov p-value.
pub fn ks_two_sample_p(xs: &[f64], ys: &[f64]) -> f64 {
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < m {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let mut q = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        q += 2.0 * (-1.0f64).powi(k + 1) * (-2.0 * kf * kf * lambda * lambda).exp();
    }
    q.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weights_sum_to_one() {
        let alpha = BaseMeasure::uniform(0.0, 5.0, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let m = stick_breaking_dp(&alpha, 1e-8, &mut rng).unwrap();
            assert!((m.total_weight() - 1.0).abs() < 1e-12);
            assert!(m.atoms.iter().all(|a| a.1 > 0.0));
        }
    }

    #[test]
    fn first_weight_mean_is_beta_mean() {
        // E[w1] = 1/(1+a); a = 1 gives 0.5
        let alpha = BaseMeasure::uniform(0.0, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40_000;
        let mut mean = 0.0;
        for _ in 0..n {
            mean += stick_breaking_dp(&alpha, 1e-8, &mut rng).unwrap().atoms[0].1 / n as f64;
        }
        // sd of one draw ≈ 0.29; 4 se ≈ 0.006
        assert!((mean - 0.5).abs() < 0.006, "E[w1] = {mean}");
    }

    #[test]
    fn degenerate_base_gives_that_atom() {
        let alpha = BaseMeasure::from_atoms(&[(2.0, 3.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = stick_breaking_dp(&alpha, 1e-8, &mut rng).unwrap();
        assert!(m.atoms.iter().all(|a| a.0 == 2.0));
        assert!((m.mean_of(|x| x) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_mean_identity() {
        // E[∫ h dD] = ∫ h dα / a, here with h(x) = x + 0.5: 3.0
        let alpha = BaseMeasure::uniform(0.0, 5.0, 5.0).unwrap();
        let means = mean_samples(&alpha, |x| x + 0.5, 50_000, 7).unwrap();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        // sd of one draw = sqrt(Var(h)/(a+1)) ≈ 0.59; 4 se ≈ 0.011
        assert!((m - 3.0).abs() < 0.011, "mean of Dirichlet means {m}");
    }

    #[test]
    fn mc_cdf_symmetry_point() {
        let alpha = BaseMeasure::uniform(0.0, 1.0, 1.0).unwrap();
        let grid = [0.5];
        let c = mc_mean_cdf(&alpha, |x| x, 20_000, &grid, 11).unwrap();
        let se = c.stderr.as_ref().unwrap()[0];
        assert!((c.values[0] - 0.5).abs() < 4.0 * se, "CDF(0.5) = {}", c.values[0]);
    }

    #[test]
    fn partition_counts_match_bell_numbers() {
        for n in 1..=8 {
            let count = enumerate_partitions(n).unwrap().count() as u64;
            assert_eq!(count, bell_number(n), "n = {n}");
        }
        assert!(enumerate_partitions(0).is_err());
        assert!(enumerate_partitions(11).is_err());
    }

    #[test]
    fn partitions_of_three() {
        let parts: Vec<_> = enumerate_partitions(3).unwrap().collect();
        assert_eq!(parts.len(), 5);
        assert_eq!(parts[0], vec![vec![0, 1, 2]]);
        // each partition covers all elements exactly once
        for p in &parts {
            let mut seen: Vec<usize> = p.iter().flatten().copied().collect();
            seen.sort_unstable();
            assert_eq!(seen, vec![0, 1, 2]);
        }
    }

    #[test]
    fn urn_normalization_identity() {
        // Σ over partitions of a^{N(P)} Π (c_i - 1)! equals the rising
        // factorial a (a+1) ... (a+n-1), for n ≤ 6.
        fn factorial(k: usize) -> f64 {
            (1..=k).map(|v| v as f64).product()
        }
        for a in [0.7, 1.0, 5.0] {
            for n in 1..=6 {
                let mut sum = 0.0;
                for cells in enumerate_partitions(n).unwrap() {
                    let mut term = 1.0;
                    for c in &cells {
                        term *= a * factorial(c.len() - 1);
                    }
                    sum += term;
                }
                let rising: f64 = (0..n).map(|i| a + i as f64).product();
                assert!(
                    ((sum - rising) / rising).abs() < 1e-12,
                    "a={a}, n={n}: {sum} vs {rising}"
                );
            }
        }
    }

    #[test]
    fn ks_p_value_sane() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_two_sample_p(&xs, &ys) > 0.01);
        let zs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() + 0.2).collect();
        assert!(ks_two_sample_p(&xs, &zs) < 1e-6);
    }
}
