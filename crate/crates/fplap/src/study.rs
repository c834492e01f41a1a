//! Convergence studies: EOC fitting, the h-r coupling selection, expansion
//! and discretization sweeps against the principal-value oracle, and the
//! refinement-Cauchy surrogate for the parabolic solver.

use rayon::prelude::*;
use serde::Serialize;

use crate::discrete_op::{apply_discrete, FieldSample};
use crate::error::{Error, Result};
use crate::evolve::{self, EvolutionProblem, SchemeConfig, TauMode};
use crate::expansion;
use crate::field::ScalarField;
use crate::kernel::{gamma_exponent, gamma_exponent_dim, nu_exponent, OperatorParams, RateRegime};
use crate::lattice::{build_weights, Extension, GridSpec, WeightKind};
use crate::quad::QuadSpec;

/// Fitted empirical order of convergence.
#[derive(Debug, Clone, Serialize)]
pub struct EocReport {
    /// Strictly decreasing abscissae that entered with positive errors.
    pub abscissae: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of log error vs log abscissa over the fit window.
    pub slope: f64,
    /// RMS deviation of the window points from the fit line.
    pub residual: f64,
    pub expected_slope: Option<f64>,
    pub expected_note: Option<String>,
    /// Abscissae dropped because their error was exactly zero.
    pub excluded: Vec<f64>,
    /// Number of finest points used in the fit.
    pub window: usize,
}

fn fit_loglog(abscissae: &[f64], errors: &[f64]) -> (f64, f64) {
    let xs: Vec<f64> = abscissae.iter().map(|a| a.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fit = ym + slope * (x - xm);
            (y - fit) * (y - fit)
        })
        .sum();
    (slope, (rss / n).sqrt())
}

/// Fit an EOC to (abscissa, error) pairs, using the `window` finest points
/// (all of them when window >= usable count). Zero errors are excluded and
/// flagged; fewer than 3 usable points is an error.
pub fn eoc_window(points: &[(f64, f64)], window: usize) -> Result<EocReport> {
    for w in points.windows(2) {
        if !(w[1].0 < w[0].0) {
            return Err(Error::Domain(format!(
                "abscissae must be strictly decreasing, got {} then {}",
                w[0].0, w[1].0
            )));
        }
    }
    let mut abscissae = Vec::new();
    let mut errors = Vec::new();
    let mut excluded = Vec::new();
    for &(a, e) in points {
        if !(a > 0.0) {
            return Err(Error::Domain(format!("abscissa must be positive, got {a}")));
        }
        if e == 0.0 {
            excluded.push(a);
        } else if e > 0.0 && e.is_finite() {
            abscissae.push(a);
            errors.push(e);
        } else {
            return Err(Error::Domain(format!("error value {e} at abscissa {a} unusable")));
        }
    }
    if abscissae.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "EOC fit needs at least 3 positive-error points, got {} ({} zero errors excluded)",
            abscissae.len(),
            excluded.len()
        )));
    }
    let window = window.clamp(3, abscissae.len());
    let tail_a = &abscissae[abscissae.len() - window..];
    let tail_e = &errors[errors.len() - window..];
    let (slope, residual) = fit_loglog(tail_a, tail_e);
    Ok(EocReport {
        abscissae,
        errors,
        slope,
        residual,
        expected_slope: None,
        expected_note: None,
        excluded,
        window,
    })
}

/// EOC over all usable points.
pub fn eoc(points: &[(f64, f64)]) -> Result<EocReport> {
    eoc_window(points, points.len().max(3))
}

/// Recommended h-r coupling r = h^mu and the resulting consistency order
/// in h.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MuSelection {
    pub mu: f64,
    pub expected_order_in_h: f64,
    pub gamma: f64,
}

/// The coupling table: three p-ranges, each split on whether p(1-s)
/// reaches 2.
pub fn mu_select(params: &OperatorParams, regime: RateRegime) -> Result<MuSelection> {
    let (p, s) = (params.p, params.s);
    let gamma = gamma_exponent(p, regime)?;
    let pos = p * (1.0 - s);
    let (mu, order) = if p > 3.0 {
        if pos >= 2.0 {
            (1.0, 1.0)
        } else {
            (1.0 / (gamma + 2.0), (gamma + pos) / (gamma + 2.0))
        }
    } else if p >= 2.0 {
        if pos >= 2.0 {
            (1.0 / (gamma + pos), 1.0)
        } else {
            (1.0 / (gamma + 2.0), (gamma + pos) / (gamma + 2.0))
        }
    } else {
        let mu = (p - 1.0) / (gamma + p);
        (mu, (p - 1.0) * (1.0 - s * p / (gamma + p)))
    };
    debug_assert!(mu > 0.0 && mu <= 1.0);
    Ok(MuSelection {
        mu,
        expected_order_in_h: order,
        gamma,
    })
}

/// What a sweep varies and which operator it measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepKind {
    /// (Mrs) vs the principal-value oracle over r.
    Fractional,
    /// Local surface average vs the p-Laplacian over r.
    LocalSurface,
    /// Local volume average vs the p-Laplacian over r.
    LocalVolume,
    /// Kernel-weighted baseline expansion vs the oracle over r.
    BucurSquassina,
    /// Lattice operator with cell weights over h, r coupled through mu.
    DiscreteW1,
    /// Lattice operator with collocation weights over h.
    DiscreteW2,
}

/// One consistency sweep.
pub struct SweepRequest<'a> {
    pub phi: &'a ScalarField,
    pub x: Vec<f64>,
    pub params: OperatorParams,
    pub kind: SweepKind,
    /// r values (expansion kinds) or h values (discrete kinds), strictly
    /// decreasing.
    pub abscissae: Vec<f64>,
    /// h-r coupling exponent for discrete kinds; None picks mu_select.
    pub mu: Option<f64>,
    pub regime: RateRegime,
    /// Lattice truncation radius for discrete kinds.
    pub rho_max: f64,
    /// Fit window (finest points); 3 is the default used by the CLI.
    pub window: usize,
}

fn discrete_r(h: f64, mu: f64, kind: WeightKind, d: usize) -> f64 {
    let prefactor = match kind {
        WeightKind::W1 => 4.0,
        WeightKind::W2 => 4.0 * (d as f64).sqrt(),
    };
    h.powf(mu).max(prefactor * h)
}

/// Raw sweep values (expansion or lattice operator per abscissa), no oracle.
pub fn sweep_values(req: &SweepRequest, spec: &QuadSpec) -> Result<Vec<f64>> {
    let params = &req.params;
    let phi = req.phi;
    let x = &req.x;

    match req.kind {
        SweepKind::Fractional => req
            .abscissae
            .par_iter()
            .map(|&r| expansion::mvp_fractional(phi, x, r, params, spec).map(|e| e.value))
            .collect::<Result<_>>(),
        SweepKind::LocalSurface => req
            .abscissae
            .par_iter()
            .map(|&r| expansion::mvp_local_surface(phi, x, r, params.p, spec).map(|e| e.value))
            .collect::<Result<_>>(),
        SweepKind::LocalVolume => req
            .abscissae
            .par_iter()
            .map(|&r| expansion::mvp_local_volume(phi, x, r, params.p, spec).map(|e| e.value))
            .collect::<Result<_>>(),
        SweepKind::BucurSquassina => req
            .abscissae
            .par_iter()
            .map(|&r| expansion::bs_expansion(phi, x, r, params, spec).map(|e| e.value))
            .collect::<Result<_>>(),
        SweepKind::DiscreteW1 | SweepKind::DiscreteW2 => {
            let kind = if req.kind == SweepKind::DiscreteW1 {
                WeightKind::W1
            } else {
                WeightKind::W2
            };
            let mu = match req.mu {
                Some(m) => m,
                None => mu_select(params, req.regime)?.mu,
            };
            req.abscissae
                .par_iter()
                .map(|&h| {
                    let r = discrete_r(h, mu, kind, params.d);
                    let grid = GridSpec {
                        h,
                        d: params.d,
                        rho_max: req.rho_max,
                        extension: Extension::CallerField,
                    };
                    let table = build_weights(&grid, r, params, kind, spec)?;
                    let sample = FieldSample::from_field(phi, Extension::CallerField);
                    apply_discrete(&sample, x, &table, spec)
                })
                .collect::<Result<_>>()
        }
    }
}

/// The oracle value a sweep compares against: the local p-Laplacian for the
/// local expansions, the principal-value quadrature otherwise, tightened so
/// its own error bound sits below 1% of the finest sweep error.
pub fn sweep_reference(req: &SweepRequest, values: &[f64], spec: &QuadSpec) -> Result<f64> {
    let params = &req.params;
    let local = matches!(req.kind, SweepKind::LocalSurface | SweepKind::LocalVolume);
    if local {
        return expansion::reference_plap(req.phi, &req.x, params.p);
    }
    let mut est = expansion::reference_fraclap(req.phi, &req.x, params, spec)?;
    let finest = values
        .last()
        .map(|v| (v - est.value).abs())
        .unwrap_or(f64::INFINITY);
    if est.error > 0.01 * finest && finest > 0.0 {
        let tight = QuadSpec {
            abs_tol: (0.005 * finest).min(spec.abs_tol),
            rel_tol: spec.rel_tol.min(1e-11),
            ..*spec
        };
        est = expansion::reference_fraclap(req.phi, &req.x, params, &tight)?;
    }
    Ok(est.value)
}

/// Fit the EOC of precomputed sweep values against a reference and attach
/// the expected slope for the request's kind and regime.
pub fn sweep_report(req: &SweepRequest, values: &[f64], reference: f64) -> Result<EocReport> {
    let params = &req.params;

    let points: Vec<(f64, f64)> = req
        .abscissae
        .iter()
        .zip(values)
        .map(|(&a, &v)| (a, (v - reference).abs()))
        .collect();
    let mut report = eoc_window(&points, req.window)?;

    let (expected, note) = match req.kind {
        SweepKind::Fractional => {
            let nu = nu_exponent(params, req.regime)?;
            (Some(nu), format!("nu = gamma + p(1-s) = {nu:.4}"))
        }
        SweepKind::LocalSurface | SweepKind::LocalVolume => {
            let g = gamma_exponent_dim(params.p, req.regime, params.d)?;
            (Some(g), format!("gamma = {g:.4}"))
        }
        SweepKind::BucurSquassina => {
            let e = 2.0 - 2.0 * params.s;
            (Some(e), format!("baseline 2 - 2s = {e:.4}"))
        }
        SweepKind::DiscreteW1 | SweepKind::DiscreteW2 => {
            let sel = mu_select(params, req.regime)?;
            match req.mu {
                Some(m) if (m - sel.mu).abs() > 1e-12 => {
                    (None, format!("custom coupling mu = {m}, no tabulated order"))
                }
                _ => (
                    Some(sel.expected_order_in_h),
                    format!(
                        "order {:.4} in h at mu = {:.4}",
                        sel.expected_order_in_h, sel.mu
                    ),
                ),
            }
        }
    };
    report.expected_slope = expected;
    report.expected_note = Some(note);
    Ok(report)
}

/// Run the sweep, compare against the oracle, and fit an EOC with the
/// expected slope attached.
pub fn consistency_sweep(req: &SweepRequest, spec: &QuadSpec) -> Result<EocReport> {
    let values = sweep_values(req, spec)?;
    let reference = sweep_reference(req, &values, spec)?;
    sweep_report(req, &values, reference)
}

/// Refinement-Cauchy data: consecutive-level sup differences plus the
/// per-level stability diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct CauchyReport {
    pub hs: Vec<f64>,
    pub rs: Vec<f64>,
    pub taus: Vec<f64>,
    /// sup over common lattice points and the coarser run's stored times of
    /// |U_k - U_{k+1}|, one entry per consecutive pair.
    pub diffs: Vec<f64>,
    pub linf_margins: Vec<f64>,
    pub min_brackets: Vec<f64>,
    pub blowup_steps: Vec<Option<usize>>,
    pub strictly_decreasing: bool,
}

/// Run `levels` halvings of (h, r) from the base configuration and compare
/// consecutive solutions on shared lattice points at the coarser run's
/// stored times (time interpolation on the finer run).
pub fn refinement_cauchy(
    problem: &EvolutionProblem,
    base: &SchemeConfig,
    levels: usize,
    spec: &QuadSpec,
) -> Result<CauchyReport> {
    if levels < 2 {
        return Err(Error::Config(format!(
            "refinement needs at least 2 levels, got {levels}"
        )));
    }
    match base.tau {
        TauMode::Auto | TauMode::AutoScaled(_) => {}
        TauMode::Fixed(_) => {
            return Err(Error::Config(
                "refinement recouples tau through the CFL rule; use Auto or AutoScaled".into(),
            ))
        }
    }

    let mut states = Vec::with_capacity(levels);
    let mut report = CauchyReport {
        hs: Vec::new(),
        rs: Vec::new(),
        taus: Vec::new(),
        diffs: Vec::new(),
        linf_margins: Vec::new(),
        min_brackets: Vec::new(),
        blowup_steps: Vec::new(),
        strictly_decreasing: false,
    };
    for level in 0..levels {
        let scale = 0.5f64.powi(level as i32);
        let mut config = base.clone();
        config.grid.h = base.grid.h * scale;
        config.r = base.r * scale;
        let state = evolve::run(problem, &config, spec)?;
        report.hs.push(config.grid.h);
        report.rs.push(config.r);
        report.taus.push(state.tau);
        report.linf_margins.push(state.diagnostics.min_linf_margin);
        report.min_brackets.push(state.diagnostics.min_bracket);
        report.blowup_steps.push(state.diagnostics.blowup_step);
        states.push(state);
    }

    for k in 0..levels - 1 {
        let coarse = &states[k];
        let fine = &states[k + 1];
        let mut sup = 0.0f64;
        // if either run blew up, compare only over times both actually reached
        let t_cap = coarse.t_final().min(fine.t_final());
        for (j, &t) in coarse.times.iter().enumerate() {
            if t > t_cap {
                break;
            }
            let snap = &coarse.snapshots[j];
            for flat in 0..snap.values.len() {
                let x = snap.point(flat);
                let vf = fine.interpolate(&x, t)?;
                sup = sup.max((snap.values[flat] - vf).abs());
            }
        }
        report.diffs.push(sup);
    }
    report.strictly_decreasing = report.diffs.windows(2).all(|w| w[1] < w[0]);
    Ok(report)
}
