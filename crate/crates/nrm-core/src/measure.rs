//! Finite base measures on the real line: an absolutely continuous part
//! plus finitely many atoms. All integrals against the measure run over
//! Gauss–Legendre panels split at density kinks and atom locations.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;

/// Gauss–Legendre nodes per smooth panel.
const NODES_PER_PANEL: usize = 256;
/// Resolution of the cumulative table used for sampling.
const CDF_GRID_CELLS: usize = 4096;

type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A nondegenerate finite measure: density part over an interval plus atoms.
#[derive(Clone)]
pub struct BaseMeasure {
    density_support: Option<(f64, f64)>,
    density: Option<DensityFn>,
    kinks: Vec<f64>,
    atoms: Vec<(f64, f64)>,
    total_mass: f64,
    density_mass: f64,
    panel_edges: Vec<f64>,
    panel_prefix: Vec<f64>,
    nodes: Vec<(f64, f64)>,
    cdf_grid: Vec<f64>,
}

impl std::fmt::Debug for BaseMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BaseMeasure")
            .field("density_support", &self.density_support)
            .field("atoms", &self.atoms)
            .field("total_mass", &self.total_mass)
            .finish()
    }
}

impl BaseMeasure {
    /// Uniform density carrying `mass` over [lo, hi].
    pub fn uniform(lo: f64, hi: f64, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidMeasure(format!("mass must be positive, got {mass}")));
        }
        let d = mass / (hi - lo);
        Self::from_density(lo, hi, move |_| d, &[])
    }

    /// Measure with the given density over [lo, hi]; total mass is computed.
    /// `kinks` lists interior points where the density is not smooth.
    pub fn from_density(
        lo: f64,
        hi: f64,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        kinks: &[f64],
    ) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidMeasure(format!(
                "density support must be a finite interval, got [{lo}, {hi}]"
            )));
        }
        let mut m = Self {
            density_support: Some((lo, hi)),
            density: Some(Arc::new(density)),
            kinks: kinks
                .iter()
                .copied()
                .filter(|&k| k > lo && k < hi)
                .collect(),
            atoms: Vec::new(),
            total_mass: 0.0,
            density_mass: 0.0,
            panel_edges: Vec::new(),
            panel_prefix: Vec::new(),
            nodes: Vec::new(),
            cdf_grid: Vec::new(),
        };
        m.kinks.sort_by(f64::total_cmp);
        m.rebuild()?;
        Ok(m)
    }

    /// Piecewise-linear density through `(x, value)` points; kinks at every point.
    pub fn from_table(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidMeasure("density table needs at least 2 points".into()));
        }
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidMeasure("density table has duplicate abscissae".into()));
        }
        if pts.iter().any(|&(_, v)| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidMeasure("density table values must be nonnegative".into()));
        }
        let lo = pts[0].0;
        let hi = pts[pts.len() - 1].0;
        let kinks: Vec<f64> = pts[1..pts.len() - 1].iter().map(|p| p.0).collect();
        let table = pts;
        Self::from_density(
            lo,
            hi,
            move |x| {
                let i = match table.binary_search_by(|p| p.0.total_cmp(&x)) {
                    Ok(i) => return table[i].1,
                    Err(0) => 0,
                    Err(i) if i >= table.len() => table.len() - 2,
                    Err(i) => i - 1,
                };
                let (x0, y0) = table[i];
                let (x1, y1) = table[i + 1];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            },
            &kinks,
        )
    }

    /// Purely atomic measure.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        let mut m = Self {
            density_support: None,
            density: None,
            kinks: Vec::new(),
            atoms: Vec::new(),
            total_mass: 0.0,
            density_mass: 0.0,
            panel_edges: Vec::new(),
            panel_prefix: Vec::new(),
            nodes: Vec::new(),
            cdf_grid: Vec::new(),
        };
        m.set_atoms(atoms)?;
        m.rebuild()?;
        Ok(m)
    }

    /// Adds atoms on top of the density part.
    pub fn with_atoms(mut self, atoms: &[(f64, f64)]) -> Result<Self> {
        self.set_atoms(atoms)?;
        self.rebuild()?;
        Ok(self)
    }

    fn set_atoms(&mut self, atoms: &[(f64, f64)]) -> Result<()> {
        let mut sorted = atoms.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidMeasure("atoms must have distinct locations".into()));
        }
        if sorted.iter().any(|&(x, m)| !x.is_finite() || !(m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidMeasure("atom masses must be positive and finite".into()));
        }
        self.atoms = sorted;
        Ok(())
    }

    fn rebuild(&mut self) -> Result<()> {
        self.nodes.clear();
        self.panel_edges.clear();
        self.panel_prefix.clear();
        self.cdf_grid.clear();
        self.density_mass = 0.0;
        if let (Some((lo, hi)), Some(density)) = (self.density_support, self.density.clone()) {
            let mut edges = vec![lo];
            for &k in &self.kinks {
                edges.push(k);
            }
            for &(x, _) in &self.atoms {
                if x > lo && x < hi {
                    edges.push(x);
                }
            }
            edges.push(hi);
            edges.sort_by(f64::total_cmp);
            edges.dedup();
            let rule = gauss_legendre(NODES_PER_PANEL);
            let (gx, gw) = rule.as_ref();
            self.panel_prefix.push(0.0);
            for w in edges.windows(2) {
                let (a, b) = (w[0], w[1]);
                let c = 0.5 * (a + b);
                let h = 0.5 * (b - a);
                let mut panel_mass = 0.0;
                for (x, w) in gx.iter().zip(gw) {
                    let xx = c + h * x;
                    let d = density(xx);
                    if !(d >= 0.0) || !d.is_finite() {
                        return Err(Error::InvalidMeasure(format!(
                            "density must be finite and nonnegative, got {d} at x={xx}"
                        )));
                    }
                    let weight = w * h * d;
                    panel_mass += weight;
                    self.nodes.push((xx, weight));
                }
                self.density_mass += panel_mass;
                self.panel_prefix.push(self.density_mass);
            }
            self.panel_edges = edges;
            // Cumulative table on a uniform grid, used only for sampling.
            let n = CDF_GRID_CELLS;
            let step = (hi - lo) / n as f64;
            let cell_rule = gauss_legendre(16);
            let (cx, cw) = cell_rule.as_ref();
            let mut acc = 0.0;
            self.cdf_grid.push(0.0);
            for i in 0..n {
                let a = lo + step * i as f64;
                let b = lo + step * (i + 1) as f64;
                let c = 0.5 * (a + b);
                let h = 0.5 * (b - a);
                let mut cell = 0.0;
                for (x, w) in cx.iter().zip(cw) {
                    cell += w * h * density(c + h * x);
                }
                acc += cell;
                self.cdf_grid.push(acc);
            }
        }
        let atom_mass: f64 = self.atoms.iter().map(|a| a.1).sum();
        self.total_mass = self.density_mass + atom_mass;
        if !(self.total_mass > 0.0 && self.total_mass.is_finite()) {
            return Err(Error::InvalidMeasure(format!(
                "total mass must be positive and finite, got {}",
                self.total_mass
            )));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn density_mass(&self) -> f64 {
        self.density_mass
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn density_support(&self) -> Option<(f64, f64)> {
        self.density_support
    }

    /// Smallest interval carrying all of the mass.
    pub fn bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        if let Some((a, b)) = self.density_support {
            lo = lo.min(a);
            hi = hi.max(b);
        }
        if let Some(&(first, _)) = self.atoms.first() {
            lo = lo.min(first);
        }
        if let Some(&(last, _)) = self.atoms.last() {
            hi = hi.max(last);
        }
        (lo, hi)
    }

    /// Default quadrature nodes of the density part: pairs (x, w) with the
    /// density folded into w, so ∫f dα ≈ Σ w f(x) + Σ_атom m f(loc).
    pub fn density_nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    /// Quadrature nodes with additional panel splits (integrand kinks).
    pub fn density_nodes_split(&self, splits: &[f64], nodes_per_panel: usize) -> Vec<(f64, f64)> {
        let Some((lo, hi)) = self.density_support else {
            return Vec::new();
        };
        let density = self.density.as_ref().unwrap();
        let mut edges: Vec<f64> = vec![lo, hi];
        edges.extend(self.kinks.iter().copied());
        edges.extend(splits.iter().copied().filter(|&s| s > lo && s < hi));
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let rule = gauss_legendre(nodes_per_panel);
        let (gx, gw) = rule.as_ref();
        let mut out = Vec::with_capacity(nodes_per_panel * (edges.len() - 1));
        for w in edges.windows(2) {
            let c = 0.5 * (w[0] + w[1]);
            let h = 0.5 * (w[1] - w[0]);
            for (x, gwt) in gx.iter().zip(gw) {
                let xx = c + h * x;
                out.push((xx, gwt * h * density(xx)));
            }
        }
        out
    }

    /// ∫ f dα over density part and atoms.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut sum = 0.0;
        for &(x, w) in &self.nodes {
            sum += w * f(x);
        }
        for &(x, m) in &self.atoms {
            sum += m * f(x);
        }
        sum
    }

    /// Mass of the density part on (-∞, x].
    pub fn density_cdf(&self, x: f64) -> f64 {
        let Some((lo, hi)) = self.density_support else {
            return 0.0;
        };
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return self.density_mass;
        }
        let idx = match self.panel_edges.binary_search_by(|e| e.total_cmp(&x)) {
            Ok(i) => return self.panel_prefix[i],
            Err(i) => i - 1,
        };
        let density = self.density.as_ref().unwrap();
        let (a, b) = (self.panel_edges[idx], x);
        let rule = gauss_legendre(64);
        let (gx, gw) = rule.as_ref();
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut partial = 0.0;
        for (t, w) in gx.iter().zip(gw) {
            partial += w * h * density(c + h * t);
        }
        self.panel_prefix[idx] + partial
    }

    /// Distribution function A(x) = α((-∞, x]) in mass units.
    pub fn cdf(&self, x: f64) -> f64 {
        let mut m = self.density_cdf(x);
        for &(loc, mass) in &self.atoms {
            if loc <= x {
                m += mass;
            } else {
                break;
            }
        }
        m
    }

    /// Generalized inverse of the distribution function, in mass units:
    /// inf { x : A(x) ≥ p } for p in (0, total_mass].
    pub fn quantile(&self, p: f64) -> f64 {
        let (lo, hi) = self.bounds();
        if p <= 0.0 {
            return lo;
        }
        if p >= self.total_mass {
            return hi;
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if self.cdf(mid) >= p {
                b = mid;
            } else {
                a = mid;
            }
            if (b - a) <= 1e-15 * b.abs().max(1.0) {
                break;
            }
        }
        b
    }

    /// Fast inverse of the density part via the cumulative table, for sampling.
    fn density_quantile_fast(&self, p: f64) -> f64 {
        let (lo, hi) = self.density_support.expect("no density part");
        let n = self.cdf_grid.len() - 1;
        let i = match self
            .cdf_grid
            .binary_search_by(|c| c.total_cmp(&p))
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1).min(n - 1),
        };
        let c0 = self.cdf_grid[i.min(n - 1)];
        let c1 = self.cdf_grid[(i + 1).min(n)];
        let step = (hi - lo) / n as f64;
        let x0 = lo + step * i.min(n - 1) as f64;
        if c1 > c0 {
            x0 + step * ((p - c0) / (c1 - c0)).clamp(0.0, 1.0)
        } else {
            x0
        }
    }

    /// Draw from the normalized measure α / total_mass.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let mut u = rng.random::<f64>() * self.total_mass;
        for &(loc, mass) in &self.atoms {
            if u < mass {
                return loc;
            }
            u -= mass;
        }
        if self.density.is_some() {
            self.density_quantile_fast(u.clamp(0.0, self.density_mass))
        } else {
            // Rounding pushed u past the last atom.
            self.atoms.last().expect("nonempty measure").0
        }
    }

    /// Draw from the density part conditioned on cumulative mass in (c_lo, c_hi).
    pub fn sample_density_between(&self, c_lo: f64, c_hi: f64, rng: &mut impl Rng) -> f64 {
        let p = c_lo + rng.random::<f64>() * (c_hi - c_lo);
        self.density_quantile_fast(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_mass_and_integral() {
        let m = BaseMeasure::uniform(0.0, 5.0, 5.0).unwrap();
        assert!((m.total_mass() - 5.0).abs() < 1e-12);
        // total_mass equals the integral of the density to high accuracy
        let recomputed = m.integrate(|_| 1.0);
        assert!(((recomputed - m.total_mass()) / m.total_mass()).abs() < 1e-9);
        let mean = m.integrate(|x| x) / m.total_mass();
        assert!((mean - 2.5).abs() < 1e-12);
    }

    #[test]
    fn atoms_and_density_combine() {
        let m = BaseMeasure::uniform(0.0, 1.0, 1.0)
            .unwrap()
            .with_atoms(&[(0.25, 0.5), (2.0, 1.5)])
            .unwrap();
        assert!((m.total_mass() - 3.0).abs() < 1e-12);
        assert!((m.cdf(0.25) - (0.25 + 0.5)).abs() < 1e-10);
        assert!((m.cdf(10.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_duplicate_atoms_and_zero_mass() {
        assert!(BaseMeasure::from_atoms(&[(1.0, 0.5), (1.0, 0.5)]).is_err());
        assert!(BaseMeasure::from_atoms(&[(1.0, 0.0)]).is_err());
        assert!(BaseMeasure::uniform(0.0, 1.0, 0.0).is_err());
        assert!(BaseMeasure::uniform(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn cdf_and_quantile_are_mutual_inverses() {
        let m = BaseMeasure::from_density(0.0, 2.0, |x| 0.5 + x, &[]).unwrap();
        for p_frac in [0.05, 0.2, 0.5, 0.66, 0.9, 0.99] {
            let p = p_frac * m.total_mass();
            let x = m.quantile(p);
            assert!(
                (m.cdf(x) - p).abs() < 1e-9 * m.total_mass(),
                "cdf(quantile({p})) = {}",
                m.cdf(x)
            );
        }
        for x in [0.1, 0.7, 1.3, 1.9] {
            let p = m.cdf(x);
            assert!((m.quantile(p) - x).abs() < 1e-9, "quantile(cdf({x}))");
        }
    }

    #[test]
    fn quantile_of_atomic_measure_steps() {
        let m = BaseMeasure::from_atoms(&[(0.0, 1.0), (1.0, 2.0)]).unwrap();
        assert!(m.quantile(0.5).abs() < 1e-12);
        assert!((m.quantile(1.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_matches_mean() {
        let m = BaseMeasure::uniform(0.0, 5.0, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| m.sample(&mut rng)).sum::<f64>() / n as f64;
        // sd of the estimate: 5/sqrt(12)/sqrt(n) ≈ 0.0032
        assert!((mean - 2.5).abs() < 0.01, "sample mean {mean}");
    }

    #[test]
    fn tabulated_density_integrates() {
        let m = BaseMeasure::from_table(&[(0.0, 0.0), (1.0, 2.0), (2.0, 0.0)]).unwrap();
        assert!((m.total_mass() - 2.0).abs() < 1e-10);
        assert!((m.cdf(1.0) - 1.0).abs() < 1e-10);
    }
}
