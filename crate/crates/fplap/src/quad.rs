//! Adaptive numerical integration over intervals, balls, spheres and
//! unbounded tails carrying the singular radial weight |y|^{-(d+sp)}.
//!
//! The workhorse is a 7-15 Gauss-Kronrod rule with QUADPACK-style error
//! rescaling, driven by worst-panel-first bisection. Panel selection breaks
//! ties by creation order, so results are deterministic for a fixed spec.
//! Dimensions d in {1,2,3}; higher-dimensional domains reduce to nested
//! one-dimensional rules in polar / spherical coordinates.

use crate::error::{Error, Result};

/// Tolerances and limits for one integration request.
#[derive(Debug, Clone, Copy)]
pub struct QuadSpec {
    /// Absolute tolerance on the total integral.
    pub abs_tol: f64,
    /// Relative tolerance on the total integral.
    pub rel_tol: f64,
    /// Panel budget per one-dimensional pass.
    pub max_subdivisions: usize,
    /// Radius below which principal-value integrands are replaced by their
    /// symmetrized (even) form by the callers that own the field.
    pub singular_split_radius: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 4000,
            singular_split_radius: 1e-3,
        }
    }
}

impl QuadSpec {
    /// Validate invariants (positive tolerances, at least one panel).
    pub fn validated(self) -> Result<Self> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::Domain("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::Domain("max_subdivisions must be >= 1".into()));
        }
        if self.singular_split_radius < 0.0 {
            return Err(Error::Domain("singular_split_radius must be >= 0".into()));
        }
        Ok(self)
    }

    /// Spec for inner integrals of nested (polar/spherical) reductions,
    /// tightened so the inner error stays below the outer budget.
    fn inner(&self) -> QuadSpec {
        QuadSpec {
            abs_tol: self.abs_tol * 0.05,
            rel_tol: (self.rel_tol * 0.1).max(1e-14),
            ..*self
        }
    }
}

/// Integral value together with a rigorous-in-practice error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

// 15-point Kronrod abscissae on [-1,1] (positive half, descending) and the
// matching Kronrod / embedded 7-point Gauss weights, from QUADPACK dqk15.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod pass over [a,b]. Returns (integral, error estimate).
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);

    let mut resg = WG[3] * fc;
    let mut resk = WGK[7] * fc;
    let mut resabs = WGK[7] * fc.abs();
    let mut fv = [0.0f64; 15];
    fv[7] = fc;

    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = f1;
        fv[14 - j] = f2;
        let sum = f1 + f2;
        resk += WGK[j] * sum;
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            // odd Kronrod indices are the embedded Gauss nodes
            resg += WG[j / 2] * sum;
        }
    }

    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv[j] - reskh).abs() + (fv[14 - j] - reskh).abs());
    }

    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * 1.0_f64.min((200.0 * err / resasc).powf(1.5));
    }
    let eps = f64::EPSILON;
    if resabs > f64::MIN_POSITIVE / (50.0 * eps) {
        err = err.max(50.0 * eps * resabs);
    }
    (value, err)
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Adaptive integration over the consecutive panels defined by `edges`
/// (strictly increasing). The worst panel is bisected until the summed error
/// estimate meets max(abs_tol, rel_tol * |value|) or the budget runs out.
pub fn integrate_panels(f: &dyn Fn(f64) -> f64, edges: &[f64], spec: &QuadSpec) -> Result<Estimate> {
    if edges.len() < 2 {
        return Err(Error::Domain("integrate_panels needs at least two edges".into()));
    }
    let mut panels: Vec<Panel> = Vec::with_capacity(edges.len().max(64));
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            return Err(Error::Domain(format!("panel edges not increasing: {a} >= {b}")));
        }
        let (value, error) = gk15(f, a, b);
        panels.push(Panel { a, b, value, error });
    }

    loop {
        let mut value = 0.0;
        let mut error = 0.0;
        for p in &panels {
            value += p.value;
            error += p.error;
        }
        let target = spec.abs_tol.max(spec.rel_tol * value.abs());
        if error <= target {
            return Ok(Estimate { value, error });
        }
        if panels.len() >= spec.max_subdivisions {
            return Err(Error::Quadrature {
                estimate: value,
                error,
                target,
                subdivisions: panels.len(),
            });
        }
        // worst panel first; ties resolved by position for determinism
        let mut worst = 0;
        for (i, p) in panels.iter().enumerate() {
            if p.error > panels[worst].error {
                worst = i;
            }
        }
        let Panel { a, b, .. } = panels[worst];
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // interval exhausted at machine precision; accept what we have
            let value: f64 = panels.iter().map(|p| p.value).sum();
            let error: f64 = panels.iter().map(|p| p.error).sum();
            return Ok(Estimate { value, error });
        }
        let (v1, e1) = gk15(f, a, mid);
        let (v2, e2) = gk15(f, mid, b);
        panels[worst] = Panel { a, b: mid, value: v1, error: e1 };
        panels.push(Panel { a: mid, b, value: v2, error: e2 });
    }
}

/// Adaptive integration of `f` over the interval [a,b].
pub fn integrate_interval(f: &dyn Fn(f64) -> f64, a: f64, b: f64, spec: &QuadSpec) -> Result<Estimate> {
    integrate_panels(f, &[a, b], spec)
}

/// Surface measure of the unit sphere in R^d, d in {1,2,3}.
pub fn unit_sphere_measure(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => std::f64::consts::TAU,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("unsupported dimension {d}"),
    }
}

fn check_dim(d: usize) -> Result<()> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(Error::Domain(format!("dimension {d} unsupported; d must be 1, 2 or 3")))
    }
}

/// Integral of `f(t w(theta)) dtheta` over the circle of radius t (d=2
/// angular factor, not multiplied by t).
fn circle_integral(f: &dyn Fn(&[f64]) -> f64, t: f64, spec: &QuadSpec) -> Result<Estimate> {
    let g = |theta: f64| f(&[t * theta.cos(), t * theta.sin()]);
    integrate_interval(&g, 0.0, std::f64::consts::TAU, spec)
}

/// Angular factor for d=3: integral of f over the unit directions scaled by
/// t, with the sin(phi) Jacobian (not multiplied by t^2).
fn sphere_angular_integral(f: &dyn Fn(&[f64]) -> f64, t: f64, spec: &QuadSpec) -> Result<Estimate> {
    let inner_spec = spec.inner();
    let inner_err = std::cell::Cell::new(0.0f64);
    let g = |phi: f64| {
        let (sin_phi, cos_phi) = phi.sin_cos();
        let ring = |theta: f64| f(&[t * sin_phi * theta.cos(), t * sin_phi * theta.sin(), t * cos_phi]);
        match integrate_interval(&ring, 0.0, std::f64::consts::TAU, &inner_spec) {
            Ok(est) => {
                inner_err.set(inner_err.get().max(est.error));
                est.value * sin_phi
            }
            Err(_) => f64::NAN,
        }
    };
    let outer = integrate_interval(&g, 0.0, std::f64::consts::PI, spec)?;
    Ok(Estimate {
        value: outer.value,
        error: outer.error + inner_err.get() * std::f64::consts::PI,
    })
}

/// Integral of `f` over the ball B_r in R^d. The integrand may have an
/// integrable singularity at the origin (panels shrink toward it; endpoint
/// values are never sampled by the open Kronrod nodes).
pub fn integrate_ball(f: &dyn Fn(&[f64]) -> f64, r: f64, d: usize, spec: &QuadSpec) -> Result<Estimate> {
    check_dim(d)?;
    if !(r > 0.0) {
        return Err(Error::Domain("ball radius must be positive".into()));
    }
    match d {
        1 => integrate_panels(&|t: f64| f(&[t]), &[-r, 0.0, r], spec),
        2 => {
            let inner_spec = spec.inner();
            let inner_err = std::cell::Cell::new(0.0f64);
            let radial = |t: f64| match circle_integral(f, t, &inner_spec) {
                Ok(est) => {
                    inner_err.set(inner_err.get().max(est.error));
                    t * est.value
                }
                Err(_) => f64::NAN,
            };
            let outer = integrate_interval(&radial, 0.0, r, spec)?;
            Ok(Estimate {
                value: outer.value,
                error: outer.error + inner_err.get() * r,
            })
        }
        3 => {
            let inner_spec = spec.inner();
            let inner_err = std::cell::Cell::new(0.0f64);
            let radial = |t: f64| match sphere_angular_integral(f, t, &inner_spec) {
                Ok(est) => {
                    inner_err.set(inner_err.get().max(est.error));
                    t * t * est.value
                }
                Err(_) => f64::NAN,
            };
            let outer = integrate_interval(&radial, 0.0, r, spec)?;
            Ok(Estimate {
                value: outer.value,
                error: outer.error + inner_err.get() * r,
            })
        }
        _ => unreachable!(),
    }
}

/// Surface integral of `f` over the sphere of radius r in R^d. Not averaged;
/// divide by `unit_sphere_measure(d) * r^{d-1}` for the mean. In d=1 this is
/// the exact two-point sum f(r) + f(-r).
pub fn integrate_sphere(f: &dyn Fn(&[f64]) -> f64, r: f64, d: usize, spec: &QuadSpec) -> Result<Estimate> {
    check_dim(d)?;
    if !(r > 0.0) {
        return Err(Error::Domain("sphere radius must be positive".into()));
    }
    match d {
        1 => Ok(Estimate {
            value: f(&[r]) + f(&[-r]),
            error: 0.0,
        }),
        2 => {
            let est = circle_integral(f, r, spec)?;
            Ok(Estimate {
                value: r * est.value,
                error: r * est.error,
            })
        }
        3 => {
            let est = sphere_angular_integral(f, r, spec)?;
            Ok(Estimate {
                value: r * r * est.value,
                error: r * r * est.error,
            })
        }
        _ => unreachable!(),
    }
}

/// Geometrically spaced edges from `a` doubling up to exactly `b`.
fn geometric_edges(a: f64, b: f64) -> Vec<f64> {
    let mut edges = vec![a];
    let mut t = a;
    while t * 2.0 < b {
        t *= 2.0;
        edges.push(t);
    }
    edges.push(b);
    edges
}

/// Integral of `f(y) |y|^{-(d+sp)}` over |y| > r_in.
///
/// The region r_in < |y| < rho_max is integrated adaptively on geometric
/// panels; rho_max is chosen so the analytic bound on the remainder,
/// `bound_f * |∂B_1| * rho_max^{-sp} / sp`, stays below abs_tol/2, and that
/// bound is added to the reported error (nothing is added to the value).
pub fn integrate_tail(
    f: &dyn Fn(&[f64]) -> f64,
    r_in: f64,
    d: usize,
    s: f64,
    p: f64,
    bound_f: f64,
    spec: &QuadSpec,
) -> Result<Estimate> {
    check_dim(d)?;
    if !(r_in > 0.0) {
        return Err(Error::Domain("tail inner radius must be positive".into()));
    }
    if !(bound_f.is_finite() && bound_f >= 0.0) {
        return Err(Error::Contract("integrate_tail requires a finite bound on |f|".into()));
    }
    let sp = s * p;
    let surface = unit_sphere_measure(d);
    // remainder bound b_f * surface * rho^{-sp}/sp <= abs_tol/2
    let rho_max = if bound_f == 0.0 {
        2.0 * r_in
    } else {
        (2.0 * bound_f * surface / (sp * spec.abs_tol))
            .powf(1.0 / sp)
            .max(2.0 * r_in)
    };
    let tail_bound = bound_f * surface * rho_max.powf(-sp) / sp;

    let edges = geometric_edges(r_in, rho_max);
    let inner_spec = spec.inner();
    let inner_err = std::cell::Cell::new(0.0f64);
    let radial: Box<dyn Fn(f64) -> f64 + '_> = match d {
        1 => Box::new(|t: f64| (f(&[t]) + f(&[-t])) * t.powf(-(1.0 + sp))),
        2 => Box::new(|t: f64| match circle_integral(f, t, &inner_spec) {
            Ok(est) => {
                inner_err.set(inner_err.get().max(est.error));
                est.value * t.powf(-(1.0 + sp))
            }
            Err(_) => f64::NAN,
        }),
        3 => Box::new(|t: f64| match sphere_angular_integral(f, t, &inner_spec) {
            Ok(est) => {
                inner_err.set(inner_err.get().max(est.error));
                est.value * t.powf(-(1.0 + sp))
            }
            Err(_) => f64::NAN,
        }),
        _ => unreachable!(),
    };
    let est = integrate_panels(&radial, &edges, spec)?;
    Ok(Estimate {
        value: est.value,
        error: est.error + tail_bound + inner_err.get() * (rho_max - r_in).min(1e3),
    })
}
