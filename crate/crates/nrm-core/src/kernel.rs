//! Convolution kernels k(t, x): nondecreasing and right continuous in t,
//! vanishing as t → -∞, with limit k̄(x) as t → +∞. The t-derivative k'
//! turns the driving jump measure into a random density.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Value, t-derivative and t → ∞ limit of a kernel at (t, x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub value: f64,
    pub deriv: f64,
    pub limit: f64,
}

#[derive(Clone)]
pub enum Kernel {
    /// k(t, x) = (1/a)[1 - e^{-a(t-x)}] for 0 ≤ x ≤ t, else 0; k̄(x) = 1/a on x ≥ 0.
    ExpConv { rate: f64 },
    /// k(t, x) = 1 if x ≤ t else 0; the driven d.f. is then pure-jump.
    Indicator,
    /// Piecewise linear in t on a fixed grid, linear in x between rows.
    Tabulated(Arc<TabulatedKernel>),
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kernel::ExpConv { rate } => write!(f, "ExpConv {{ rate: {rate} }}"),
            Kernel::Indicator => write!(f, "Indicator"),
            Kernel::Tabulated(t) => write!(f, "Tabulated({}x{})", t.x_grid.len(), t.t_grid.len()),
        }
    }
}

#[derive(Debug)]
pub struct TabulatedKernel {
    t_grid: Vec<f64>,
    x_grid: Vec<f64>,
    /// values[i][j] = k(t_grid[j], x_grid[i])
    values: Vec<Vec<f64>>,
}

impl Kernel {
    pub fn exp_conv(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidKernel(format!("exp_conv rate must be positive, got {rate}")));
        }
        Ok(Kernel::ExpConv { rate })
    }

    pub fn indicator() -> Self {
        Kernel::Indicator
    }

    pub fn tabulated(t_grid: Vec<f64>, x_grid: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if t_grid.len() < 2 || x_grid.is_empty() {
            return Err(Error::InvalidKernel("tabulated kernel needs ≥2 t nodes and ≥1 x row".into()));
        }
        if t_grid.windows(2).any(|w| w[0] >= w[1]) || x_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidKernel("tabulated kernel grids must be strictly increasing".into()));
        }
        if values.len() != x_grid.len() || values.iter().any(|row| row.len() != t_grid.len()) {
            return Err(Error::InvalidKernel("tabulated kernel value shape mismatch".into()));
        }
        Ok(Kernel::Tabulated(Arc::new(TabulatedKernel { t_grid, x_grid, values })))
    }

    /// True when k(·, x) is absolutely continuous so that k' is a function.
    /// The indicator kernel carries a unit point mass at t = x instead.
    pub fn has_density(&self) -> bool {
        !matches!(self, Kernel::Indicator)
    }

    /// k̄ when it does not depend on x (the mixture-of-Dirichlet case),
    /// taking the measure to live on [0, ∞).
    pub fn constant_limit(&self) -> Option<f64> {
        match self {
            Kernel::ExpConv { rate } => Some(1.0 / rate),
            Kernel::Indicator => Some(1.0),
            Kernel::Tabulated(tab) => {
                let last = tab.t_grid.len() - 1;
                let first = tab.values[0][last];
                for row in &tab.values {
                    if (row[last] - first).abs() > 1e-12 * first.abs().max(1.0) {
                        return None;
                    }
                }
                Some(first)
            }
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> Result<KernelPoint> {
        match self {
            Kernel::ExpConv { rate } => {
                let a = *rate;
                let limit = if x >= 0.0 { 1.0 / a } else { 0.0 };
                if x < 0.0 || x > t {
                    Ok(KernelPoint { value: 0.0, deriv: 0.0, limit })
                } else {
                    let e = (-a * (t - x)).exp();
                    Ok(KernelPoint { value: (1.0 - e) / a, deriv: e, limit })
                }
            }
            Kernel::Indicator => Ok(KernelPoint {
                value: if x <= t { 1.0 } else { 0.0 },
                deriv: 0.0,
                limit: 1.0,
            }),
            Kernel::Tabulated(tab) => tab.eval(t, x),
        }
    }

    pub fn value(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.eval(t, x)?.value)
    }

    pub fn deriv(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.eval(t, x)?.deriv)
    }

    pub fn limit(&self, x: f64) -> Result<f64> {
        match self {
            Kernel::ExpConv { rate } => Ok(if x >= 0.0 { 1.0 / rate } else { 0.0 }),
            Kernel::Indicator => Ok(1.0),
            Kernel::Tabulated(tab) => {
                let t_last = *tab.t_grid.last().unwrap();
                Ok(tab.eval(t_last, x)?.value)
            }
        }
    }
}

impl TabulatedKernel {
    fn eval(&self, t: f64, x: f64) -> Result<KernelPoint> {
        let (t0, t1) = (self.t_grid[0], *self.t_grid.last().unwrap());
        let (x0, x1) = (self.x_grid[0], *self.x_grid.last().unwrap());
        if t < t0 || t > t1 || x < x0 || x > x1 {
            return Err(Error::OutOfDomain { t, x });
        }
        let row = |i: usize| -> (f64, f64) {
            // value and right-slope of row i at time t
            let vals = &self.values[i];
            let j = match self.t_grid.binary_search_by(|g| g.total_cmp(&t)) {
                Ok(j) => j.min(self.t_grid.len() - 2),
                Err(j) => j - 1,
            };
            let (ta, tb) = (self.t_grid[j], self.t_grid[j + 1]);
            let slope = (vals[j + 1] - vals[j]) / (tb - ta);
            (vals[j] + slope * (t - ta), slope)
        };
        let last_col = self.t_grid.len() - 1;
        let (value, deriv, limit) = if self.x_grid.len() == 1 {
            let (v, d) = row(0);
            (v, d, self.values[0][last_col])
        } else {
            let i = match self.x_grid.binary_search_by(|g| g.total_cmp(&x)) {
                Ok(i) => i.min(self.x_grid.len() - 2),
                Err(i) => i - 1,
            };
            let (xa, xb) = (self.x_grid[i], self.x_grid[i + 1]);
            let f = (x - xa) / (xb - xa);
            let (va, da) = row(i);
            let (vb, db) = row(i + 1);
            let lim = self.values[i][last_col] * (1.0 - f) + self.values[i + 1][last_col] * f;
            (va * (1.0 - f) + vb * f, da * (1.0 - f) + db * f, lim)
        };
        Ok(KernelPoint { value, deriv, limit })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_conv_closed_form() {
        let k = Kernel::exp_conv(2.0).unwrap();
        let p = k.eval(1.0, 0.0).unwrap();
        assert!((p.value - 0.5 * (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        assert!((p.value - 0.432_332_358_381_693_65).abs() < 1e-12);
        assert!((p.deriv - 0.135_335_283_236_612_7).abs() < 1e-12);
        assert!((p.limit - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exp_conv_limit_case() {
        let k = Kernel::exp_conv(2.0).unwrap();
        let p = k.eval(200.0, 0.0).unwrap();
        assert!((p.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exp_conv_vanishes_off_support() {
        let k = Kernel::exp_conv(2.0).unwrap();
        assert_eq!(k.value(1.0, 2.0).unwrap(), 0.0);
        assert_eq!(k.value(1.0, -0.5).unwrap(), 0.0);
    }

    #[test]
    fn indicator_step() {
        let k = Kernel::indicator();
        let p = k.eval(1.0, 2.0).unwrap();
        assert_eq!(p.value, 0.0);
        assert_eq!(p.limit, 1.0);
        assert_eq!(k.value(2.0, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn monotone_in_t_and_bounded_by_limit() {
        let k = Kernel::exp_conv(0.7).unwrap();
        for x in [0.0, 0.4, 2.0] {
            let mut prev = -1.0;
            for i in 0..200 {
                let t = -3.0 + 0.05 * i as f64;
                let p = k.eval(t, x).unwrap();
                assert!(p.value >= prev - 1e-15);
                assert!(p.value <= p.limit + 1e-15);
                prev = p.value;
            }
        }
    }

    #[test]
    fn tabulated_interpolates_and_errors_out_of_domain() {
        let k = Kernel::tabulated(
            vec![0.0, 1.0, 2.0],
            vec![0.0, 1.0],
            vec![vec![0.0, 0.5, 1.0], vec![0.0, 0.25, 0.5]],
        )
        .unwrap();
        let p = k.eval(0.5, 0.0).unwrap();
        assert!((p.value - 0.25).abs() < 1e-15);
        assert!((p.deriv - 0.5).abs() < 1e-15);
        assert!((p.limit - 1.0).abs() < 1e-15);
        assert!(matches!(k.eval(3.0, 0.0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(k.eval(1.0, 2.0), Err(Error::OutOfDomain { .. })));
    }
}
