//! Mean functionals ∫ g(t) dF(t) and their kernel transform
//! h(x) = ∫ g(t) k'(t, x) dt, which turns a mean of the driven d.f. into a
//! linear functional of the driving jump process.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::quad::integrate_adaptive;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum FunctionalSpec {
    /// g(t) = t
    Identity,
    /// g(t) = 1 on (lo, hi], 0 elsewhere
    IndicatorInterval { lo: f64, hi: f64 },
    /// arbitrary measurable g
    User(ScalarFn),
}

impl FunctionalSpec {
    pub fn user(g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        FunctionalSpec::User(Arc::new(g))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            FunctionalSpec::Identity => t,
            FunctionalSpec::IndicatorInterval { lo, hi } => {
                if t > *lo && t <= *hi {
                    1.0
                } else {
                    0.0
                }
            }
            FunctionalSpec::User(g) => g(t),
        }
    }
}

impl std::fmt::Debug for FunctionalSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FunctionalSpec::Identity => write!(f, "Identity"),
            FunctionalSpec::IndicatorInterval { lo, hi } => write!(f, "Indicator({lo}, {hi}]"),
            FunctionalSpec::User(_) => write!(f, "User"),
        }
    }
}

/// A functional g paired with its transform h.
#[derive(Clone)]
pub struct MeanFunctional {
    spec: FunctionalSpec,
    h: ScalarFn,
}

impl std::fmt::Debug for MeanFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeanFunctional").field("spec", &self.spec).finish()
    }
}

impl MeanFunctional {
    pub fn g(&self, t: f64) -> f64 {
        self.spec.eval(t)
    }

    pub fn h(&self, x: f64) -> f64 {
        (self.h)(x)
    }

    pub fn spec(&self) -> &FunctionalSpec {
        &self.spec
    }

    /// Builds a functional directly from its transform, for derived laws.
    pub fn from_h(spec: FunctionalSpec, h: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        MeanFunctional { spec, h: Arc::new(h) }
    }

    /// The equivalent Dirichlet-side functional b·h, where b = 1/k̄ must be
    /// constant over the support. A mean of the driven d.f. with this kernel
    /// equals in law the Dirichlet mean of b·h.
    pub fn dirichlet_scaled(&self, kernel: &Kernel) -> Result<MeanFunctional> {
        let Some(limit) = kernel.constant_limit() else {
            return Err(Error::InvalidKernel(
                "kernel limit is not constant; no Dirichlet reduction".into(),
            ));
        };
        if !(limit > 0.0) {
            return Err(Error::InvalidKernel("kernel limit must be positive".into()));
        }
        let b = 1.0 / limit;
        let h = self.h.clone();
        let spec = self.spec.clone();
        Ok(MeanFunctional {
            spec: FunctionalSpec::user(move |t| b * spec.eval(t)),
            h: Arc::new(move |x| b * h(x)),
        })
    }
}

/// Attaches h(x) = ∫ g(t) k'(t, x) dt to a functional, in closed form where
/// available and by quadrature otherwise.
pub fn h_transform(g: &FunctionalSpec, kernel: &Kernel) -> Result<MeanFunctional> {
    let h: ScalarFn = match (g, kernel) {
        // For any kernel, an interval indicator integrates k' exactly:
        // h(x) = k(hi, x) - k(lo, x).
        (FunctionalSpec::IndicatorInterval { lo, hi }, k) => {
            if !(lo < hi) {
                return Err(Error::Domain(format!("indicator interval ({lo}, {hi}] is empty")));
            }
            let (lo, hi, k) = (*lo, *hi, k.clone());
            Arc::new(move |x| {
                let a = k.value(lo, x).unwrap_or(0.0);
                let b = k.value(hi, x).unwrap_or(0.0);
                b - a
            })
        }
        // The indicator kernel's k' is a unit point mass at t = x, so h = g.
        (spec, Kernel::Indicator) => {
            let spec = spec.clone();
            Arc::new(move |x| spec.eval(x))
        }
        (FunctionalSpec::Identity, Kernel::ExpConv { rate }) => {
            let a = *rate;
            Arc::new(move |x| if x >= 0.0 { x / a + 1.0 / (a * a) } else { 0.0 })
        }
        (FunctionalSpec::User(g), Kernel::ExpConv { rate }) => {
            let a = *rate;
            let g = g.clone();
            let h = move |x: f64| -> Result<f64> {
                if x < 0.0 {
                    return Ok(0.0);
                }
                // h(x) = ∫_0^∞ g(x+s) a e^{-as} / a ds = ∫_0^∞ g(x+s) e^{-as} ds
                let cut = 40.0 / a;
                let inner = |s: f64| g(x + s) * (-a * s).exp();
                let est = integrate_adaptive(
                    &inner,
                    &[0.0, 0.25 * cut, cut],
                    1e-8,
                    1e-14,
                    4000,
                )
                .map_err(|_| {
                    Error::NonIntegrableFunctional(format!("quadrature for h({x}) failed"))
                })?;
                // A convergent integral has a negligible exponential tail;
                // anything still growing there is divergent.
                let tail = integrate_adaptive(&inner, &[cut, 2.0 * cut], 1e-6, 1e-14, 1000)
                    .map(|t| t.value)
                    .unwrap_or(f64::INFINITY);
                if !est.value.is_finite() || tail.abs() > 1e-8 * est.value.abs().max(1.0) {
                    return Err(Error::NonIntegrableFunctional(format!(
                        "∫ g(t) k'(t, x) dt does not converge at x = {x}"
                    )));
                }
                Ok(est.value)
            };
            // Probe a few abscissae so divergence surfaces at construction.
            for x in [0.0, 0.5, 1.0, 2.0, 5.0] {
                h(x)?;
            }
            Arc::new(move |x| h(x).unwrap_or(f64::NAN))
        }
        (spec, Kernel::Tabulated(_)) => {
            // k' is piecewise constant in t; integrate g over each t segment.
            let spec = spec.clone();
            let kernel = kernel.clone();
            Arc::new(move |x| {
                let probe = |t: f64| kernel.deriv(t, x).unwrap_or(f64::NAN);
                // segment edges are unknown here, integrate adaptively
                let f = |t: f64| spec.eval(t) * probe(t);
                match integrate_adaptive(&f, &[-50.0, 0.0, 50.0], 1e-8, 1e-13, 4000) {
                    Ok(est) => est.value,
                    Err(_) => f64::NAN,
                }
            })
        }
    };
    Ok(MeanFunctional { spec: g.clone(), h })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_exp_conv_closed_form() {
        let k = Kernel::exp_conv(2.0).unwrap();
        let f = h_transform(&FunctionalSpec::Identity, &k).unwrap();
        for x in [0.0, 0.5, 1.0, 3.7] {
            assert!((f.h(x) - (x / 2.0 + 0.25)).abs() < 1e-14);
        }
        // a·h(x) = x + 1/a
        assert!((2.0 * f.h(1.0) - (1.0 + 0.5)).abs() < 1e-14);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        // Identity as a user function must agree with the closed form at
        // random abscissae to relative 1e-6.
        let k = Kernel::exp_conv(2.0).unwrap();
        let f = h_transform(&FunctionalSpec::user(|t| t), &k).unwrap();
        let xs = [0.03, 0.41, 0.77, 1.19, 1.93, 2.51, 3.08, 3.66, 4.21, 4.87];
        for x in xs {
            let want = x / 2.0 + 0.25;
            assert!(
                ((f.h(x) - want) / want).abs() < 1e-6,
                "h({x}) = {} want {want}",
                f.h(x)
            );
        }
    }

    #[test]
    fn constant_pulls_out_as_limit() {
        let k = Kernel::exp_conv(2.0).unwrap();
        let f = h_transform(&FunctionalSpec::user(|_| 3.0), &k).unwrap();
        for x in [0.0, 1.0, 4.0] {
            assert!((f.h(x) - 3.0 * 0.5).abs() < 1e-7, "h({x}) = {}", f.h(x));
        }
    }

    #[test]
    fn identity_with_indicator_kernel() {
        let f = h_transform(&FunctionalSpec::Identity, &Kernel::indicator()).unwrap();
        assert_eq!(f.h(1.25), 1.25);
    }

    #[test]
    fn interval_indicator_any_kernel() {
        let k = Kernel::exp_conv(2.0).unwrap();
        let f = h_transform(&FunctionalSpec::IndicatorInterval { lo: 1.0, hi: 2.0 }, &k).unwrap();
        let want = k.value(2.0, 0.5).unwrap() - k.value(1.0, 0.5).unwrap();
        assert!((f.h(0.5) - want).abs() < 1e-15);
    }

    #[test]
    fn super_exponential_growth_is_rejected() {
        let k = Kernel::exp_conv(2.0).unwrap();
        let res = h_transform(&FunctionalSpec::user(|t: f64| (t * t).exp()), &k);
        assert!(matches!(res, Err(Error::NonIntegrableFunctional(_))));
    }

    #[test]
    fn transform_is_linear() {
        let k = Kernel::exp_conv(1.5).unwrap();
        let f1 = h_transform(&FunctionalSpec::user(|t| t), &k).unwrap();
        let f2 = h_transform(&FunctionalSpec::user(|t: f64| (-t).exp()), &k).unwrap();
        let combo = h_transform(&FunctionalSpec::user(|t: f64| 2.0 * t - 3.0 * (-t).exp()), &k).unwrap();
        for x in [0.1, 0.9, 2.3] {
            let want = 2.0 * f1.h(x) - 3.0 * f2.h(x);
            assert!(
                (combo.h(x) - want).abs() < 1e-6 * want.abs().max(1.0),
                "x={x}: {} vs {want}",
                combo.h(x)
            );
        }
    }

    #[test]
    fn dirichlet_scaling_multiplies_by_inverse_limit() {
        let k = Kernel::exp_conv(2.0).unwrap();
        let f = h_transform(&FunctionalSpec::Identity, &k).unwrap();
        let scaled = f.dirichlet_scaled(&k).unwrap();
        for x in [0.0, 1.0, 4.5] {
            assert!((scaled.h(x) - (x + 0.5)).abs() < 1e-13);
        }
    }
}
