//! Continuous-level asymptotic expansions of the p-Laplacian and the
//! fractional p-Laplacian, the Bucur-Squassina baseline expansion, exact
//! quadratic identities, and the independent principal-value reference.
//!
//! Sign convention: everything here evaluates -(-Delta)^s_p phi(x) (the
//! monotone, heat-equation-friendly sign), with the usual normalization
//! constant omitted.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::kernel::{self, jp, jp_slope, OperatorParams};
use crate::quad::{self, Estimate, QuadSpec};

/// Which averaged operator an [`ExpansionResult`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ExpansionKind {
    LocalSurface,
    LocalVolume,
    Fractional,
    BucurSquassina,
}

impl std::fmt::Display for ExpansionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ExpansionKind::LocalSurface => "local-surface",
            ExpansionKind::LocalVolume => "local-volume",
            ExpansionKind::Fractional => "fractional",
            ExpansionKind::BucurSquassina => "bucur-squassina",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ExpansionResult {
    pub value: f64,
    pub quadrature_error: f64,
    pub r: f64,
    pub kind: ExpansionKind,
}

fn check_point(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::Domain(format!(
            "evaluation point has dimension {}, operator has d = {d}",
            x.len()
        )));
    }
    Ok(())
}

fn shifted<'a>(phi: &'a ScalarField, x: &[f64]) -> impl Fn(&[f64]) -> f64 + 'a {
    let base = phi.eval(x);
    let x = x.to_vec();
    move |y: &[f64]| {
        let mut z = [0.0f64; 3];
        for i in 0..x.len() {
            z[i] = x[i] + y[i];
        }
        phi.eval(&z[..x.len()]) - base
    }
}

/// Surface mean-value expansion: kappa_{p,d} / r^p times the surface average
/// of J_p(phi(x+y) - phi(x)) over the sphere of radius r. In d = 1 this is
/// the exact two-point finite difference.
pub fn mvp_local_surface(phi: &ScalarField, x: &[f64], r: f64, p: f64, spec: &QuadSpec) -> Result<ExpansionResult> {
    if !(r > 0.0) {
        return Err(Error::Domain("expansion radius must be positive".into()));
    }
    let d = x.len();
    let kappa = kernel::kappa_pd(p, d)?;
    let diff = shifted(phi, x);
    let g = |y: &[f64]| jp(diff(y), p);
    let (avg, err) = if d == 1 {
        ((g(&[r]) + g(&[-r])) * 0.5, 0.0)
    } else {
        let est = quad::integrate_sphere(&g, r, d, spec)?;
        let measure = quad::unit_sphere_measure(d) * r.powi(d as i32 - 1);
        (est.value / measure, est.error / measure)
    };
    let pref = kappa / r.powf(p);
    Ok(ExpansionResult {
        value: pref * avg,
        quadrature_error: pref.abs() * err,
        r,
        kind: ExpansionKind::LocalSurface,
    })
}

/// Volume mean-value expansion: (p+d) kappa_{p,d} / (d r^p) times the volume
/// average of J_p(phi(x+y) - phi(x)) over the ball of radius r.
pub fn mvp_local_volume(phi: &ScalarField, x: &[f64], r: f64, p: f64, spec: &QuadSpec) -> Result<ExpansionResult> {
    if !(r > 0.0) {
        return Err(Error::Domain("expansion radius must be positive".into()));
    }
    let d = x.len();
    let kappa = kernel::kappa_pd(p, d)?;
    let diff = shifted(phi, x);
    let g = |y: &[f64]| jp(diff(y), p);
    let (integral, err) = if d == 1 {
        // even part: the two rays fold onto (0, r]
        let even = |t: f64| g(&[t]) + g(&[-t]);
        let est = quad::integrate_interval(&even, 0.0, r, spec)?;
        (est.value, est.error)
    } else {
        let est = quad::integrate_ball(&g, r, d, spec)?;
        (est.value, est.error)
    };
    let volume = match d {
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        3 => 4.0 * std::f64::consts::PI * r.powi(3) / 3.0,
        _ => unreachable!(),
    };
    let pref = (p + d as f64) * kappa / (d as f64 * r.powf(p));
    Ok(ExpansionResult {
        value: pref * integral / volume,
        quadrature_error: pref.abs() * err / volume,
        r,
        kind: ExpansionKind::LocalVolume,
    })
}

/// Mean-value expansion of the fractional operator:
/// (p+d)/(p(1-s) r^{d+sp}) * integral over B_r of J_p(phi(x+y)-phi(x))
/// plus the plain kernel integral outside B_r.
pub fn mvp_fractional(
    phi: &ScalarField,
    x: &[f64],
    r: f64,
    params: &OperatorParams,
    spec: &QuadSpec,
) -> Result<ExpansionResult> {
    if !(r > 0.0) {
        return Err(Error::Domain("expansion radius must be positive".into()));
    }
    check_point(x, params.d)?;
    let sup = phi.require_sup_bound("mvp_fractional")?;
    let (d, p, s) = (params.d, params.p, params.s);
    let diff = shifted(phi, x);
    let g = |y: &[f64]| jp(diff(y), p);

    let ball = if d == 1 {
        let even = |t: f64| g(&[t]) + g(&[-t]);
        quad::integrate_interval(&even, 0.0, r, spec)?
    } else {
        quad::integrate_ball(&g, r, d, spec)?
    };
    let bound = (2.0 * sup).powf(p - 1.0);
    let tail = quad::integrate_tail(&g, r, d, s, p, bound, spec)?;

    let pref = (p + d as f64) / (p * (1.0 - s) * r.powf(d as f64 + params.sp()));
    Ok(ExpansionResult {
        value: pref * ball.value + tail.value,
        quadrature_error: pref.abs() * ball.error + tail.error,
        r,
        kind: ExpansionKind::Fractional,
    })
}

/// Baseline expansion with kernel |y|^{-(d+(p-2)s)} (|y|^2 - r^2)^{-s} outside
/// B_r. The endpoint singularity at |y| = r is removed analytically on the
/// first panel by the substitution t = (|y|^2 - r^2)^{1-s}.
pub fn bs_expansion(
    phi: &ScalarField,
    x: &[f64],
    r: f64,
    params: &OperatorParams,
    spec: &QuadSpec,
) -> Result<ExpansionResult> {
    if !(r > 0.0) {
        return Err(Error::Domain("expansion radius must be positive".into()));
    }
    check_point(x, params.d)?;
    let sup = phi.require_sup_bound("bs_expansion")?;
    let (d, p, s) = (params.d, params.p, params.s);
    let sp = params.sp();
    let diff = shifted(phi, x);
    let g = |y: &[f64]| jp(diff(y), p);

    // angular factor: integral of g over the sphere of radius t, divided by
    // t^{d-1} (exact two-point sum in d = 1)
    let inner_spec = QuadSpec {
        abs_tol: spec.abs_tol * 0.05,
        rel_tol: (spec.rel_tol * 0.1).max(1e-14),
        ..*spec
    };
    let angular_err = std::cell::Cell::new(0.0f64);
    let angular = |t: f64| -> f64 {
        if d == 1 {
            return g(&[t]) + g(&[-t]);
        }
        match quad::integrate_sphere(&g, t, d, &inner_spec) {
            Ok(est) => {
                angular_err.set(angular_err.get().max(est.error));
                est.value / t.powi(d as i32 - 1)
            }
            Err(_) => f64::NAN,
        }
    };

    let expo = d as f64 + (p - 2.0) * s;
    // first panel r < |y| < 2r via t = (y^2 - r^2)^{1-s}:
    // (y^2 - r^2)^{-s} dy = dt / (2 (1-s) y)
    let sub = |t: f64| -> f64 {
        let y = (t.powf(1.0 / (1.0 - s)) + r * r).sqrt();
        angular(y) * y.powf(d as f64 - 1.0 - expo) / (2.0 * (1.0 - s) * y)
    };
    let t_max = (3.0 * r * r).powf(1.0 - s);
    let first = quad::integrate_interval(&sub, 0.0, t_max, spec)?;

    // direct part beyond 2r, truncated where the analytic remainder bound
    // drops below abs_tol/2; for |y| >= 2r the singular factor is controlled
    // by (3/4)^{-s} |y|^{-2s}
    let bound_eff = (2.0 * sup).powf(p - 1.0) * (4.0f64 / 3.0).powf(s);
    let surface = quad::unit_sphere_measure(d);
    let rho_max = if bound_eff == 0.0 {
        4.0 * r
    } else {
        (2.0 * bound_eff * surface / (sp * spec.abs_tol))
            .powf(1.0 / sp)
            .max(4.0 * r)
    };
    let tail_bound = bound_eff * surface * rho_max.powf(-sp) / sp;
    let direct = |y: f64| -> f64 {
        angular(y) * y.powf(d as f64 - 1.0 - expo) * (y * y - r * r).powf(-s)
    };
    let mut edges = vec![2.0 * r];
    let mut t = 2.0 * r;
    while t * 2.0 < rho_max {
        t *= 2.0;
        edges.push(t);
    }
    edges.push(rho_max);
    let rest = quad::integrate_panels(&direct, &edges, spec)?;

    Ok(ExpansionResult {
        value: first.value + rest.value,
        quadrature_error: first.error + rest.error + tail_bound + angular_err.get(),
        r,
        kind: ExpansionKind::BucurSquassina,
    })
}

/// Independent principal-value oracle for -(-Delta)^s_p phi(x).
///
/// Inside B_delta the integrand is replaced by its symmetrized (even) form
/// (1/2)(J_p(phi(x+y)-phi(x)) + J_p(phi(x-y)-phi(x))) |y|^{-(d+sp)}, which is
/// absolutely integrable for C^2 fields; outside, the plain kernel integral.
pub fn reference_fraclap(
    phi: &ScalarField,
    x: &[f64],
    params: &OperatorParams,
    spec: &QuadSpec,
) -> Result<Estimate> {
    check_point(x, params.d)?;
    let sup = phi.require_sup_bound("reference_fraclap")?;
    let delta = spec.singular_split_radius;
    if !(delta > 0.0) {
        return Err(Error::Domain(
            "reference_fraclap needs a positive singular_split_radius".into(),
        ));
    }
    let (d, p, s) = (params.d, params.p, params.s);
    let sp = params.sp();
    let diff = shifted(phi, x);
    let g = |y: &[f64]| jp(diff(y), p);

    let inner = if d == 1 {
        let sym = |t: f64| (g(&[t]) + g(&[-t])) * t.powf(-(1.0 + sp));
        quad::integrate_interval(&sym, 0.0, delta, spec)?
    } else {
        let sym = |y: &[f64]| {
            let neg: Vec<f64> = y.iter().map(|t| -t).collect();
            let nrm = y.iter().map(|t| t * t).sum::<f64>().sqrt();
            0.5 * (g(y) + g(&neg)) * nrm.powf(-(d as f64 + sp))
        };
        quad::integrate_ball(&sym, delta, d, spec)?
    };
    let bound = (2.0 * sup).powf(p - 1.0);
    let outer = quad::integrate_tail(&g, delta, d, s, p, bound, spec)?;
    Ok(Estimate {
        value: inner.value + outer.value,
        error: inner.error + outer.error,
    })
}

/// Closed-form p-Laplacian from analytic derivatives:
/// |grad|^{p-2} (trace H + (p-2) <H ghat, ghat>), with the usual convention
/// of 0 at critical points for p > 2.
pub fn reference_plap(phi: &ScalarField, x: &[f64], p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("reference_plap needs p > 1, got {p}")));
    }
    let grad = phi.gradient(x)?;
    let hess = phi.hessian(x)?;
    let gn = grad.iter().map(|t| t * t).sum::<f64>().sqrt();
    let trace: f64 = (0..grad.len()).map(|i| hess[i][i]).sum();
    if gn == 0.0 {
        if p > 2.0 {
            return Ok(0.0);
        }
        if p == 2.0 {
            return Ok(trace);
        }
        return Err(Error::Domain(
            "reference_plap with p < 2 needs a nonvanishing gradient".into(),
        ));
    }
    let ghat: Vec<f64> = grad.iter().map(|t| t / gn).collect();
    let mut quad_form = 0.0;
    for i in 0..ghat.len() {
        for j in 0..ghat.len() {
            quad_form += ghat[i] * hess[i][j] * ghat[j];
        }
    }
    Ok(gn.powf(p - 2.0) * (trace + (p - 2.0) * quad_form))
}

/// Both sides of the quadratic sphere identity, for exactness testing:
/// lhs = a_{p,d} * surface average over the sphere of radius r of
/// (p-1) |g.y|^{p-2} y^T H y; rhs = the closed p-Laplacian form times r^p.
#[derive(Debug, Clone, Copy)]
pub struct IdentityPair {
    pub lhs: f64,
    pub rhs: f64,
    pub quadrature_error: f64,
}

pub fn identity_check_j2(
    g: &[f64],
    h: &[Vec<f64>],
    r: f64,
    p: f64,
    d: usize,
    spec: &QuadSpec,
) -> Result<IdentityPair> {
    if d == 0 || d > 3 {
        return Err(Error::Domain(format!("identity check supports d in 1..=3, got {d}")));
    }
    if g.len() != d || h.len() != d || h.iter().any(|row| row.len() != d) {
        return Err(Error::Domain("gradient/hessian dimensions disagree with d".into()));
    }
    if !(r > 0.0 && p > 1.0) {
        return Err(Error::Domain("identity check needs r > 0 and p > 1".into()));
    }

    let gn = g.iter().map(|t| t * t).sum::<f64>().sqrt();
    let trace: f64 = (0..d).map(|i| h[i][i]).sum();
    let rhs = if gn == 0.0 {
        0.0
    } else {
        let ghat: Vec<f64> = g.iter().map(|t| t / gn).collect();
        let mut quad_form = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad_form += ghat[i] * h[i][j] * ghat[j];
            }
        }
        gn.powf(p - 2.0) * (trace + (p - 2.0) * quad_form) * r.powf(p)
    };

    let a = kernel::a_pd(p, d)?;
    let integrand = |y: &[f64]| {
        let gy: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
        let mut yhy = 0.0;
        for i in 0..d {
            for j in 0..d {
                yhy += y[i] * h[i][j] * y[j];
            }
        }
        (p - 1.0) * jp_slope(gy, p) * yhy
    };
    let (avg, err) = if d == 1 {
        ((integrand(&[r]) + integrand(&[-r])) * 0.5, 0.0)
    } else {
        // tolerance scaled to the target magnitude so the relative check is fair
        let scaled = QuadSpec {
            abs_tol: (rhs.abs() * 1e-11).max(1e-14),
            rel_tol: 1e-12,
            ..*spec
        };
        let est = quad::integrate_sphere(&integrand, r, d, &scaled)?;
        let measure = quad::unit_sphere_measure(d) * r.powi(d as i32 - 1);
        (est.value / measure, est.error / measure)
    };
    Ok(IdentityPair {
        lhs: a * avg,
        rhs,
        quadrature_error: a * err,
    })
}
