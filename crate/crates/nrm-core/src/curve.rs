//! Distribution curves on a σ grid: CDFs or densities with quadrature /
//! Monte Carlo error metadata.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Cdf,
    Density,
}

#[derive(Debug, Clone)]
pub struct DistCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: CurveKind,
    /// Achieved quadrature error estimate (max over grid points).
    pub quad_tol: f64,
    /// Pointwise standard errors for Monte Carlo curves.
    pub stderr: Option<Vec<f64>>,
    /// Effective sample size of an importance-sampling mixture.
    pub ess: Option<f64>,
    /// Set when the effective sample size fell below 10.
    pub low_ess: bool,
}

impl DistCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, kind: CurveKind, quad_tol: f64) -> Self {
        assert_eq!(grid.len(), values.len());
        DistCurve { grid, values, kind, quad_tol, stderr: None, ess: None, low_ess: false }
    }

    /// Trapezoid integral of the curve over its grid.
    pub fn trapezoid_integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
            .sum()
    }

    /// Expectation of the underlying law, assuming the grid covers its support.
    /// For a CDF: E = hi - ∫ F dσ; for a density: ∫ σ ρ dσ / ∫ ρ dσ.
    pub fn expectation(&self) -> f64 {
        match self.kind {
            CurveKind::Cdf => {
                let hi = *self.grid.last().unwrap();
                hi - self.trapezoid_integral()
            }
            CurveKind::Density => {
                let num: f64 = self
                    .grid
                    .windows(2)
                    .zip(self.values.windows(2))
                    .map(|(g, v)| 0.5 * (g[1] - g[0]) * (g[0] * v[0] + g[1] * v[1]))
                    .sum();
                num / self.trapezoid_integral()
            }
        }
    }

    /// Largest pointwise distance to another curve on the same grid.
    pub fn sup_distance(&self, other: &DistCurve) -> f64 {
        assert_eq!(self.grid.len(), other.grid.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Nondecreasing along the grid up to `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0] - slack)
    }
}

/// Strictly increasing uniform grid with `n` points over [lo, hi].
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && hi > lo);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expectation_of_uniform_cdf() {
        let grid = linspace(0.0, 1.0, 101);
        let values: Vec<f64> = grid.iter().map(|&x| x).collect();
        let c = DistCurve::new(grid, values, CurveKind::Cdf, 0.0);
        assert!((c.expectation() - 0.5).abs() < 1e-12);
        assert!(c.is_monotone(0.0));
    }

    #[test]
    fn density_normalization_and_mean() {
        let grid = linspace(0.0, 1.0, 201);
        let values: Vec<f64> = grid.iter().map(|&x| 2.0 * x).collect();
        let c = DistCurve::new(grid, values, CurveKind::Density, 0.0);
        assert!((c.trapezoid_integral() - 1.0).abs() < 1e-12);
        assert!((c.expectation() - 2.0 / 3.0).abs() < 1e-4);
    }
}
