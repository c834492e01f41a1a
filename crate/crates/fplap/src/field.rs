//! Scalar fields: callables with the metadata the operators need (a global
//! sup bound for tails, Hölder data for evolution, optional analytic
//! derivatives for local reference values).

use crate::error::{Error, Result};

/// Global Hölder data |phi(x) - phi(z)| <= l |x - z|^a.
#[derive(Debug, Clone, Copy)]
pub struct HolderData {
    pub a: f64,
    pub l: f64,
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type HessFn = dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync;

/// A real-valued function on R^d plus metadata. Construct with
/// [`ScalarField::new`] and chain `with_*` builders for the optional parts.
pub struct ScalarField {
    eval: Box<EvalFn>,
    sup_bound: Option<f64>,
    holder: Option<HolderData>,
    gradient: Option<Box<GradFn>>,
    hessian: Option<Box<HessFn>>,
}

impl ScalarField {
    pub fn new(eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField {
            eval: Box::new(eval),
            sup_bound: None,
            holder: None,
            gradient: None,
            hessian: None,
        }
    }

    pub fn with_sup_bound(mut self, bound: f64) -> Self {
        assert!(bound >= 0.0, "sup bound must be nonnegative");
        self.sup_bound = Some(bound);
        self
    }

    pub fn with_holder(mut self, a: f64, l: f64) -> Self {
        assert!(a > 0.0 && a <= 1.0, "Holder exponent must lie in (0,1]");
        assert!(l >= 0.0);
        self.holder = Some(HolderData { a, l });
        self
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Box::new(g));
        self
    }

    pub fn with_hessian(mut self, h: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static) -> Self {
        self.hessian = Some(Box::new(h));
        self
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let v = (self.eval)(x);
        debug_assert!(
            self.sup_bound.map_or(true, |b| v.abs() <= b * (1.0 + 1e-12) + 1e-300),
            "field value {v} exceeds declared sup bound {:?}",
            self.sup_bound
        );
        v
    }

    pub fn sup_bound(&self) -> Option<f64> {
        self.sup_bound
    }

    /// Sup bound, or a contract error naming the operation that needs it.
    pub fn require_sup_bound(&self, who: &str) -> Result<f64> {
        self.sup_bound
            .ok_or_else(|| Error::Contract(format!("{who} requires a sup bound on the field")))
    }

    pub fn holder(&self) -> Option<HolderData> {
        self.holder
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.gradient {
            Some(g) => Ok(g(x)),
            None => Err(Error::Contract("field has no analytic gradient".into())),
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        match &self.hessian {
            Some(h) => Ok(h(x)),
            None => Err(Error::Contract("field has no analytic hessian".into())),
        }
    }
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("sup_bound", &self.sup_bound)
            .field("holder", &self.holder)
            .field("has_gradient", &self.gradient.is_some())
            .field("has_hessian", &self.hessian.is_some())
            .finish()
    }
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|t| t * t).sum()
}

/// phi == c.
pub fn constant(c: f64) -> ScalarField {
    ScalarField::new(move |_x| c)
        .with_sup_bound(c.abs())
        .with_holder(1.0, 0.0)
        .with_gradient(|x| vec![0.0; x.len()])
        .with_hessian(|x| vec![vec![0.0; x.len()]; x.len()])
}

/// phi(x) = offset + slope . x, clamped outside |x_i| <= m to stay bounded.
/// The clamp acts per coordinate, so at the center the truncation is
/// symmetric and odd cancellation survives.
pub fn affine_truncated(slope: Vec<f64>, offset: f64, m: f64) -> ScalarField {
    assert!(m > 0.0);
    let sup = offset.abs() + slope.iter().map(|c| c.abs()).sum::<f64>() * m;
    let l = slope.iter().map(|c| c * c).sum::<f64>().sqrt();
    let s2 = slope.clone();
    ScalarField::new(move |x| {
        let mut v = offset;
        for (ci, xi) in s2.iter().zip(x) {
            v += ci * xi.clamp(-m, m);
        }
        v
    })
    .with_sup_bound(sup)
    .with_holder(1.0, l)
    .with_gradient(move |x| {
        slope
            .iter()
            .zip(x)
            .map(|(ci, xi)| if xi.abs() < m { *ci } else { 0.0 })
            .collect()
    })
    .with_hessian(|x| vec![vec![0.0; x.len()]; x.len()])
}

/// phi(x) = exp(-|x|^2). Lipschitz constant sqrt(2/e).
pub fn gauss_bump() -> ScalarField {
    ScalarField::new(|x| (-norm_sq(x)).exp())
        .with_sup_bound(1.0)
        .with_holder(1.0, (2.0f64 / std::f64::consts::E).sqrt())
        .with_gradient(|x| {
            let e = (-norm_sq(x)).exp();
            x.iter().map(|t| -2.0 * t * e).collect()
        })
        .with_hessian(|x| {
            let e = (-norm_sq(x)).exp();
            let d = x.len();
            (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| {
                            let delta = if i == j { 2.0 } else { 0.0 };
                            (4.0 * x[i] * x[j] - delta) * e
                        })
                        .collect()
                })
                .collect()
        })
}

/// phi(x) = 1 / (1 + |x|^2). Lipschitz constant 3 sqrt(3) / 8.
pub fn rational() -> ScalarField {
    ScalarField::new(|x| 1.0 / (1.0 + norm_sq(x)))
        .with_sup_bound(1.0)
        .with_holder(1.0, 3.0 * 3.0f64.sqrt() / 8.0)
        .with_gradient(|x| {
            let q = 1.0 + norm_sq(x);
            x.iter().map(|t| -2.0 * t / (q * q)).collect()
        })
        .with_hessian(|x| {
            let q = 1.0 + norm_sq(x);
            let d = x.len();
            (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| {
                            let delta = if i == j { 2.0 } else { 0.0 };
                            (8.0 * x[i] * x[j] / q - delta) / (q * q)
                        })
                        .collect()
                })
                .collect()
        })
}

/// phi(x) = min(|x|^2, 1): smooth with a vanishing gradient at the origin,
/// merely Lipschitz across |x| = 1. Analytic derivatives are the interior
/// ones (valid for |x| < 1).
pub fn minx2() -> ScalarField {
    ScalarField::new(|x| norm_sq(x).min(1.0))
        .with_sup_bound(1.0)
        .with_holder(1.0, 2.0)
        .with_gradient(|x| {
            if norm_sq(x) < 1.0 {
                x.iter().map(|t| 2.0 * t).collect()
            } else {
                vec![0.0; x.len()]
            }
        })
        .with_hessian(|x| {
            let d = x.len();
            if norm_sq(x) < 1.0 {
                (0..d)
                    .map(|i| (0..d).map(|j| if i == j { 2.0 } else { 0.0 }).collect())
                    .collect()
            } else {
                vec![vec![0.0; d]; d]
            }
        })
}

/// phi(x) = min(exp(x_1), 2).
pub fn minexp() -> ScalarField {
    ScalarField::new(|x| x[0].exp().min(2.0))
        .with_sup_bound(2.0)
        .with_holder(1.0, 2.0)
}

/// phi(x) = max(0, x_1)^s capped at truncation^s, i.e. the s-power ramp with
/// the value truncated once x_1 >= truncation. Globally s-Hölder with
/// constant 1.
pub fn heaviside_s(s: f64, truncation: f64) -> ScalarField {
    assert!(s > 0.0 && s < 1.0);
    assert!(truncation > 0.0);
    let cap = truncation.powf(s);
    ScalarField::new(move |x| x[0].clamp(0.0, truncation).powf(s))
        .with_sup_bound(cap)
        .with_holder(s, 1.0)
}

/// Builtin registry used by the CLI and the self-tests.
/// `truncation` feeds the builtins that need a cap to stay bounded.
pub fn builtin(name: &str, s: f64, truncation: f64) -> Result<ScalarField> {
    match name {
        "const" => Ok(constant(1.0)),
        "affine" => Ok(affine_truncated(vec![1.0], 0.0, truncation)),
        "gauss-bump" => Ok(gauss_bump()),
        "rational" => Ok(rational()),
        "minx2" => Ok(minx2()),
        "minexp" => Ok(minexp()),
        "heaviside-s" => Ok(heaviside_s(s, truncation)),
        other => Err(Error::Config(format!(
            "unknown builtin field '{other}' (known: const, affine, gauss-bump, rational, minx2, minexp, heaviside-s)"
        ))),
    }
}
