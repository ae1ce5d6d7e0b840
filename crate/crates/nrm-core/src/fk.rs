//! Ferguson–Klass simulation of the driving jump process: jump sizes are the
//! inverse Lévy tail mass evaluated at unit-rate Poisson arrival times, so
//! they come out in decreasing order; generation stops once the relative
//! error of a new jump drops below a threshold.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::measure::BaseMeasure;
use crate::process::{BetaFn, ProcessSpec};
use crate::special::exp_integral_e1;

/// Bins used for the piecewise-constant approximation of a nonconstant β.
pub const DEFAULT_BINS: usize = 256;
const INVERSION_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub location: f64,
    pub size: f64,
}

/// A realized trajectory: random jumps in nonincreasing size order plus
/// fixed-discontinuity jumps, truncated at the observation horizon.
#[derive(Debug, Clone)]
pub struct JumpPath {
    pub random_jumps: Vec<Jump>,
    pub fixed_jumps: Vec<Jump>,
    pub upsilon: f64,
    pub threshold: f64,
}

impl JumpPath {
    pub fn all_jumps(&self) -> impl Iterator<Item = &Jump> {
        self.random_jumps.iter().chain(self.fixed_jumps.iter())
    }

    pub fn is_empty(&self) -> bool {
        self.random_jumps.is_empty() && self.fixed_jumps.is_empty()
    }

    pub fn total_random_mass(&self) -> f64 {
        self.random_jumps.iter().map(|j| j.size).sum()
    }

    /// Truncation bookkeeping: the last accepted jump still clears the
    /// relative-error threshold against the total accepted mass.
    pub fn truncation_ok(&self) -> bool {
        match self.random_jumps.last() {
            None => true,
            Some(last) => last.size / self.total_random_mass() >= self.threshold,
        }
    }
}

/// Gamma law of one fixed jump to draw in a path.
#[derive(Debug, Clone, Copy)]
pub struct FixedJumpLaw {
    pub location: f64,
    pub shape: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy)]
struct Bin {
    mass: f64,
    center: f64,
    cdf_lo: f64,
    cdf_hi: f64,
}

/// β evaluated on the sampler's bins and base-measure atoms; rebuild this
/// (cheaply) whenever β changes, e.g. for exponentially tilted updates.
#[derive(Debug, Clone)]
pub struct BetaValues {
    bins: Vec<f64>,
    atoms: Vec<f64>,
}

/// Reusable sampler state for one (base measure, horizon) pair.
#[derive(Debug, Clone)]
pub struct FkSampler {
    base: BaseMeasure,
    bins: Vec<Bin>,
    atom_entries: Vec<(f64, f64)>,
    upsilon: f64,
}

impl FkSampler {
    pub fn new(base: &BaseMeasure, upsilon: f64, n_bins: usize) -> Result<Self> {
        if !(upsilon > 0.0 && upsilon.is_finite()) {
            return Err(Error::InvalidSpec(format!("horizon must be positive, got {upsilon}")));
        }
        let n_bins = n_bins.max(1);
        let mut bins = Vec::with_capacity(n_bins);
        if base.density_support().is_some() {
            let step = upsilon / n_bins as f64;
            let mut cdf_prev = base.density_cdf(0.0);
            for i in 0..n_bins {
                let lo = step * i as f64;
                let hi = step * (i + 1) as f64;
                let cdf_hi = base.density_cdf(hi);
                let mass = cdf_hi - cdf_prev;
                if mass > 0.0 {
                    bins.push(Bin { mass, center: 0.5 * (lo + hi), cdf_lo: cdf_prev, cdf_hi });
                }
                cdf_prev = cdf_hi;
            }
        }
        let atom_entries: Vec<(f64, f64)> = base
            .atoms()
            .iter()
            .copied()
            .filter(|&(x, _)| (0.0..=upsilon).contains(&x))
            .collect();
        if bins.is_empty() && atom_entries.is_empty() {
            return Err(Error::InvalidSpec(
                "base measure has no mass on [0, horizon]".into(),
            ));
        }
        Ok(FkSampler { base: base.clone(), bins, atom_entries, upsilon })
    }

    pub fn upsilon(&self) -> f64 {
        self.upsilon
    }

    pub fn beta_values(&self, beta: &BetaFn) -> BetaValues {
        BetaValues {
            bins: self.bins.iter().map(|b| beta.eval(b.center)).collect(),
            atoms: self.atom_entries.iter().map(|&(x, _)| beta.eval(x)).collect(),
        }
    }

    /// β shifted by a location tilt, e.g. x ↦ β(x) + k(Υ, x)·Σu.
    pub fn beta_values_tilted(
        &self,
        beta: &BetaFn,
        tilt: impl Fn(f64) -> f64,
    ) -> BetaValues {
        BetaValues {
            bins: self
                .bins
                .iter()
                .map(|b| beta.eval(b.center) + tilt(b.center))
                .collect(),
            atoms: self
                .atom_entries
                .iter()
                .map(|&(x, _)| beta.eval(x) + tilt(x))
                .collect(),
        }
    }

    /// Lévy tail mass M(v) = ∫ E1(β(x) v) dα(x) over [0, horizon],
    /// with β piecewise constant over the bins.
    pub fn tail_mass(&self, beta: &BetaValues, v: f64) -> Result<f64> {
        if !(v > 0.0) {
            return Err(Error::Domain(format!("tail mass needs v > 0, got {v}")));
        }
        let mut m = 0.0;
        for (bin, &b) in self.bins.iter().zip(&beta.bins) {
            let arg = b * v;
            if arg < 700.0 {
                m += bin.mass * exp_integral_e1(arg)?;
            }
        }
        for (&(_, mass), &b) in self.atom_entries.iter().zip(&beta.atoms) {
            let arg = b * v;
            if arg < 700.0 {
                m += mass * exp_integral_e1(arg)?;
            }
        }
        Ok(m)
    }

    /// Solves M(v) = xi by bisection to relative tolerance 1e-10. `hint` is a
    /// known upper bracket (the previous, larger jump).
    fn invert_tail(&self, beta: &BetaValues, xi: f64, hint: Option<f64>) -> Result<f64> {
        let mut hi = hint.unwrap_or(1.0).max(1e-290);
        let mut guard = 0;
        while self.tail_mass(beta, hi)? >= xi {
            hi *= 2.0;
            guard += 1;
            if guard > 1100 {
                return Err(Error::Numeric("tail-mass inversion failed to bracket above".into()));
            }
        }
        let mut lo = hi * 0.5;
        guard = 0;
        while self.tail_mass(beta, lo)? < xi {
            lo *= 0.5;
            guard += 1;
            if lo < 1e-300 || guard > 1100 {
                return Err(Error::Numeric("tail-mass inversion failed to bracket below".into()));
            }
        }
        while (hi - lo) > INVERSION_REL_TOL * hi {
            let mid = 0.5 * (lo + hi);
            if self.tail_mass(beta, mid)? >= xi {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Location for a jump of size v: density ∝ e^{-v β(x)} α(dx) on the bins.
    fn sample_location(&self, beta: &BetaValues, v: f64, rng: &mut impl Rng) -> Result<f64> {
        let n = self.bins.len() + self.atom_entries.len();
        let mut logw = Vec::with_capacity(n);
        for (bin, &b) in self.bins.iter().zip(&beta.bins) {
            logw.push(bin.mass.ln() - v * b);
        }
        for (&(_, mass), &b) in self.atom_entries.iter().zip(&beta.atoms) {
            logw.push(mass.ln() - v * b);
        }
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numeric("all location weights vanished".into()));
        }
        let weights: Vec<f64> = logw.iter().map(|&l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            u -= w;
            if u <= 0.0 || i == n - 1 {
                return Ok(if i < self.bins.len() {
                    let bin = &self.bins[i];
                    self.base.sample_density_between(bin.cdf_lo, bin.cdf_hi, rng)
                } else {
                    self.atom_entries[i - self.bins.len()].0
                });
            }
        }
        unreachable!()
    }

    /// Draws a path: random jumps by tail-mass inversion at unit-rate arrival
    /// times, stopped at the first jump whose relative error
    /// size / (accumulated + size) falls below `threshold` (that jump is
    /// discarded); fixed jumps drawn from their gamma laws. Fixed jumps do
    /// not enter the stopping statistic.
    pub fn sample(
        &self,
        beta: &BetaValues,
        threshold: f64,
        fixed: &[FixedJumpLaw],
        rng: &mut impl Rng,
    ) -> Result<JumpPath> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::Domain(format!("threshold must be in (0, 1), got {threshold}")));
        }
        let exp1 = Exp::new(1.0).expect("unit-rate exponential");
        let mut random_jumps: Vec<Jump> = Vec::new();
        let mut total = 0.0;
        let mut xi = 0.0;
        let mut prev: Option<f64> = None;
        loop {
            xi += exp1.sample(rng);
            let size = self.invert_tail(beta, xi, prev)?;
            if size / (total + size) < threshold {
                break;
            }
            total += size;
            prev = Some(size);
            let location = self.sample_location(beta, size, rng)?;
            random_jumps.push(Jump { location, size });
            if random_jumps.len() > 5_000_000 {
                return Err(Error::Numeric("jump budget exhausted; threshold too small".into()));
            }
        }
        let mut fixed_jumps = Vec::with_capacity(fixed.len());
        for law in fixed {
            let gamma = Gamma::new(law.shape, 1.0 / law.rate)
                .map_err(|e| Error::Numeric(format!("gamma law ({}, {}): {e}", law.shape, law.rate)))?;
            fixed_jumps.push(Jump { location: law.location, size: gamma.sample(rng) });
        }
        Ok(JumpPath { random_jumps, fixed_jumps, upsilon: self.upsilon, threshold })
    }
}

fn bins_for(spec: &ProcessSpec) -> usize {
    // A constant β needs no piecewise approximation: one bin is exact.
    if spec.beta().as_constant().is_some() {
        1
    } else {
        DEFAULT_BINS
    }
}

/// M(v) for the spec's intensity over [0, horizon].
pub fn levy_tail_mass(spec: &ProcessSpec, v: f64) -> Result<f64> {
    let sampler = FkSampler::new(spec.base(), spec.upsilon(), bins_for(spec))?;
    let beta = sampler.beta_values(spec.beta());
    sampler.tail_mass(&beta, v)
}

/// One prior trajectory of the spec's process.
pub fn sample_jump_path(spec: &ProcessSpec, threshold: f64, rng: &mut impl Rng) -> Result<JumpPath> {
    let sampler = FkSampler::new(spec.base(), spec.upsilon(), bins_for(spec))?;
    let beta = sampler.beta_values(spec.beta());
    let fixed: Vec<FixedJumpLaw> = spec
        .fixed_jumps()
        .iter()
        .map(|j| FixedJumpLaw { location: j.location, shape: j.shape, rate: j.rate })
        .collect();
    sampler.sample(&beta, threshold, &fixed, rng)
}

/// Z(t), the normalizer Z(Υ), and the d.f./density values at t.
#[derive(Debug, Clone, Copy)]
pub struct ProcessPoint {
    pub z: f64,
    pub zbar: f64,
    pub cdf: f64,
    pub density: f64,
}

/// Evaluates the driven process on a trajectory: Z(t) = Σ k(t, x_j) J_j over
/// all jumps, with Z(Υ) as the finite-horizon normalizer.
pub fn eval_process(path: &JumpPath, kernel: &Kernel, t: f64) -> Result<ProcessPoint> {
    if path.is_empty() {
        return Err(Error::DegeneratePath("path has no jumps".into()));
    }
    let mut z = 0.0;
    let mut zbar = 0.0;
    let mut dens = 0.0;
    for j in path.all_jumps() {
        z += kernel.value(t, j.location)? * j.size;
        zbar += kernel.value(path.upsilon, j.location)? * j.size;
        dens += kernel.deriv(t, j.location)? * j.size;
    }
    if !(zbar > 0.0) {
        return Err(Error::DegeneratePath(format!("normalizer Z({}) = {zbar}", path.upsilon)));
    }
    Ok(ProcessPoint { z, zbar, cdf: z / zbar, density: dens / zbar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example_spec() -> ProcessSpec {
        let base = BaseMeasure::uniform(0.0, 5.0, 5.0).unwrap();
        ProcessSpec::gamma(base, 7.5).unwrap()
    }

    #[test]
    fn tail_mass_of_unit_rate_gamma() {
        let spec = example_spec();
        // M(v) = 5 E1(v)
        let m1 = levy_tail_mass(&spec, 1.0).unwrap();
        assert!((m1 - 1.096_919_671_977_601_4).abs() < 1e-10, "M(1) = {m1}");
        assert!(levy_tail_mass(&spec, 0.5).unwrap() >= m1);
        assert!(levy_tail_mass(&spec, 2.0).unwrap() <= m1);
        assert!(levy_tail_mass(&spec, 0.0).is_err());
    }

    #[test]
    fn tail_mass_is_linear_in_the_base_measure() {
        let spec = example_spec();
        let half = ProcessSpec::gamma(BaseMeasure::uniform(0.0, 5.0, 2.5).unwrap(), 7.5).unwrap();
        let full = levy_tail_mass(&spec, 0.8).unwrap();
        let halved = levy_tail_mass(&half, 0.8).unwrap();
        assert!((halved - 0.5 * full).abs() < 1e-10 * full);
    }

    #[test]
    fn inversion_round_trips() {
        let spec = example_spec();
        let sampler = FkSampler::new(spec.base(), spec.upsilon(), 1).unwrap();
        let beta = sampler.beta_values(spec.beta());
        for xi in [0.3, 1.0, 4.0, 20.0, 60.0] {
            let v = sampler.invert_tail(&beta, xi, None).unwrap();
            let back = sampler.tail_mass(&beta, v).unwrap();
            assert!(
                ((back - xi) / xi).abs() < 1e-8,
                "M(M^-1({xi})) = {back}"
            );
        }
    }

    #[test]
    fn same_seed_gives_identical_paths() {
        let spec = example_spec();
        let p1 = sample_jump_path(&spec, 1e-4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let p2 = sample_jump_path(&spec, 1e-4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(p1.random_jumps.len(), p2.random_jumps.len());
        for (a, b) in p1.random_jumps.iter().zip(&p2.random_jumps) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn jump_sizes_strictly_decrease_and_truncation_holds() {
        let spec = example_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = sample_jump_path(&spec, 1e-4, &mut rng).unwrap();
            assert!(!p.random_jumps.is_empty());
            for w in p.random_jumps.windows(2) {
                assert!(w[1].size < w[0].size);
            }
            assert!(p.truncation_ok());
            for j in &p.random_jumps {
                assert!(j.location >= 0.0 && j.location <= 5.0);
            }
        }
    }

    #[test]
    fn aggressive_threshold_truncates_mass() {
        let spec = example_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut mean = 0.0;
        let n = 400;
        for _ in 0..n {
            let p = sample_jump_path(&spec, 0.5, &mut rng).unwrap();
            assert!(p.random_jumps.len() <= 4, "threshold 0.5 keeps very few jumps");
            mean += p.total_random_mass() / n as f64;
        }
        assert!(mean < 4.0, "heavy truncation must underestimate the mass 5, got {mean}");
    }

    #[test]
    fn mean_total_mass_matches_intensity() {
        // E[Σ J] = ∫ (1/β) dα = 5; quick version of the moment check.
        let spec = example_spec();
        let sampler = FkSampler::new(spec.base(), spec.upsilon(), 1).unwrap();
        let beta = sampler.beta_values(spec.beta());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 2_000;
        let mut mean = 0.0;
        for _ in 0..n {
            mean += sampler.sample(&beta, 1e-4, &[], &mut rng).unwrap().total_random_mass();
        }
        mean /= n as f64;
        // sd of one path total is sqrt(5); 4 standard errors ≈ 0.2
        assert!((mean - 5.0).abs() < 0.2, "mean total mass {mean}");
    }

    #[test]
    fn eval_single_jump_normalizes() {
        let kernel = Kernel::exp_conv(2.0).unwrap();
        let path = JumpPath {
            random_jumps: vec![Jump { location: 1.0, size: 2.0 }],
            fixed_jumps: vec![],
            upsilon: 10.0,
            threshold: 1e-4,
        };
        let p = eval_process(&path, &kernel, 1.0).unwrap();
        assert_eq!(p.cdf, 0.0, "kernel vanishes at t = x");
        let p2 = eval_process(&path, &kernel, 3.0).unwrap();
        let want = kernel.value(3.0, 1.0).unwrap() / kernel.value(10.0, 1.0).unwrap();
        assert!((p2.cdf - want).abs() < 1e-15);
        let p3 = eval_process(&path, &kernel, 10.0).unwrap();
        assert!((p3.cdf - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eval_two_jumps_indicator() {
        let kernel = Kernel::indicator();
        let path = JumpPath {
            random_jumps: vec![
                Jump { location: 1.0, size: 0.7 },
                Jump { location: 3.0, size: 0.7 },
            ],
            fixed_jumps: vec![],
            upsilon: 10.0,
            threshold: 1e-4,
        };
        let p = eval_process(&path, &kernel, 2.0).unwrap();
        assert!((p.cdf - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_path_is_degenerate() {
        let kernel = Kernel::indicator();
        let path = JumpPath {
            random_jumps: vec![],
            fixed_jumps: vec![],
            upsilon: 1.0,
            threshold: 0.5,
        };
        assert!(matches!(eval_process(&path, &kernel, 0.5), Err(Error::DegeneratePath(_))));
    }

    #[test]
    fn fixed_jumps_follow_their_gamma_law() {
        let spec = example_spec();
        let sampler = FkSampler::new(spec.base(), spec.upsilon(), 1).unwrap();
        let beta = sampler.beta_values(spec.beta());
        let law = FixedJumpLaw { location: 2.0, shape: 3.0, rate: 2.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 4_000;
        let mut mean = 0.0;
        for _ in 0..n {
            let p = sampler.sample(&beta, 0.4, &[law], &mut rng).unwrap();
            assert_eq!(p.fixed_jumps.len(), 1);
            assert_eq!(p.fixed_jumps[0].location, 2.0);
            mean += p.fixed_jumps[0].size / n as f64;
        }
        // E = shape/rate = 1.5, sd of estimate = sqrt(3)/2/sqrt(n) ≈ 0.0137
        assert!((mean - 1.5).abs() < 0.05, "fixed jump mean {mean}");
    }
}
