//! Explicit time stepping for the nonlocal parabolic problem
//! u_t = -(-Delta)^s_p u + f on a truncated box, with CFL management and
//! the running diagnostics (L-infinity bound, convex bracket, Hölder and
//! time moduli, continuous dependence).

use rayon::prelude::*;
use serde::Serialize;

use crate::discrete_op::LatticeArray;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::kernel::{jp, jp_slope, s_nu, OperatorParams};
use crate::lattice::{build_weights, summability_report, Extension, GridSpec, WeightKind, WeightTable};
use crate::quad::QuadSpec;

/// Cauchy data for the evolution: bounded Hölder u0 and forcing f sharing
/// one exponent a, with p > 2.
pub struct EvolutionProblem {
    pub u0: ScalarField,
    pub f: ScalarField,
    pub params: OperatorParams,
    pub t_final: f64,
}

impl EvolutionProblem {
    pub fn new(u0: ScalarField, f: ScalarField, params: OperatorParams, t_final: f64) -> Result<Self> {
        if !(params.p > 2.0) {
            return Err(Error::Domain(format!(
                "evolution requires p > 2, got p = {}",
                params.p
            )));
        }
        if !(t_final > 0.0) {
            return Err(Error::Domain(format!("final time must be positive, got {t_final}")));
        }
        let hu = u0
            .holder()
            .ok_or_else(|| Error::Contract("u0 needs Hölder data (a, L)".into()))?;
        let hf = f
            .holder()
            .ok_or_else(|| Error::Contract("f needs Hölder data (a, L)".into()))?;
        if !(hu.a > 0.0 && hu.a <= 1.0) {
            return Err(Error::Domain(format!("Hölder exponent must lie in (0,1], got {}", hu.a)));
        }
        if hf.a != hu.a && hf.l != 0.0 {
            return Err(Error::Config(format!(
                "u0 and f must share one Hölder exponent (got {} and {})",
                hu.a, hf.a
            )));
        }
        u0.require_sup_bound("EvolutionProblem u0")?;
        f.require_sup_bound("EvolutionProblem f")?;
        Ok(EvolutionProblem {
            u0,
            f,
            params,
            t_final,
        })
    }

    pub fn a(&self) -> f64 {
        self.u0.holder().unwrap().a
    }

    /// L_{u0} = max{Hölder seminorm, sup norm}.
    pub fn l_u0(&self) -> f64 {
        let h = self.u0.holder().unwrap();
        h.l.max(self.u0.sup_bound().unwrap())
    }

    pub fn l_f(&self) -> f64 {
        let h = self.f.holder().unwrap();
        h.l.max(self.f.sup_bound().unwrap())
    }
}

/// Time-step selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauMode {
    /// CFL formula.
    Auto,
    /// CFL formula times a factor (factor > 1 needs allow_unstable).
    AutoScaled(f64),
    /// Explicit value, checked against the CFL bound.
    Fixed(f64),
}

/// Where the CFL constant K comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CflConstantMode {
    /// K = 1 / ((p-1) 2^p C_{s,p,d} (L_{u0} + T L_f + 3 K~_2 + 1)^{p-2}),
    /// with C_{s,p,d} measured from weight-table summability and
    /// K~_2 = k_lemma L_{u0}^{p-1} C_{s,p,d}.
    Derived {
        k_override: Option<f64>,
        k_lemma: f64,
    },
    /// Trust the caller's K.
    UserValue(f64),
}

impl Default for CflConstantMode {
    fn default() -> Self {
        CflConstantMode::Derived {
            k_override: None,
            k_lemma: 1.0,
        }
    }
}

/// Which CFL branch applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CflBranch {
    /// a < sp/(p-1): tau = K r^{2s + (s-a)(p-2)}.
    PowerLaw { exponent: f64 },
    /// a >= sp/(p-1): tau = K r^a / |log r|.
    LogCorrected,
}

/// The chosen time step together with every constant that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct CflReport {
    pub tau: f64,
    pub k_constant: f64,
    pub c_spd: f64,
    pub k_tilde2: f64,
    pub branch: CflBranch,
}

/// Empirical C_{s,p,d}: the largest of the three summability ratios
/// (total r^{sp}, far mass, moment(nu)/S_nu for nu in {a(p-2), a(p-1)})
/// over the calibration sweep r in {0.2, 0.1, 0.05} with h = r/4, W1 cells.
pub fn measure_c_spd(params: &OperatorParams, a: f64, spec: &QuadSpec) -> Result<f64> {
    let (p, s) = (params.p, params.s);
    let sp = params.sp();
    let nus = [a * (p - 2.0), a * (p - 1.0)];
    let mut cmax = 0.0f64;
    for r in [0.2, 0.1, 0.05] {
        let grid = GridSpec {
            h: r / 4.0,
            d: params.d,
            rho_max: 4.0,
            extension: Extension::ZeroFarField,
        };
        let table = build_weights(&grid, r, params, WeightKind::W1, spec)?;
        let rep = summability_report(&table, &nus);
        cmax = cmax.max(rep.total * r.powf(sp)).max(rep.far);
        for (nu, m) in &rep.moments {
            cmax = cmax.max(m / s_nu(*nu, r, s, p));
        }
    }
    Ok(cmax)
}

/// CFL time step for splitting radius r.
///
/// tau = K r^{2s+(s-a)(p-2)} when a < sp/(p-1), else K r^a / |log r|.
pub fn cfl_tau(
    r: f64,
    params: &OperatorParams,
    a: f64,
    l_u0: f64,
    l_f: f64,
    t_final: f64,
    mode: CflConstantMode,
    spec: &QuadSpec,
) -> Result<CflReport> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("CFL needs r in (0,1), got r = {r}")));
    }
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::Domain(format!("CFL needs a in (0,1], got a = {a}")));
    }
    if !(l_u0 > 0.0 && l_f >= 0.0) {
        return Err(Error::Domain(
            "CFL needs positive L_u0 and nonnegative L_f".into(),
        ));
    }
    let (p, s) = (params.p, params.s);
    let (k_constant, c_spd, k_tilde2) = match mode {
        CflConstantMode::UserValue(k) => {
            if !(k > 0.0) {
                return Err(Error::Domain(format!("user CFL constant must be positive, got {k}")));
            }
            (k, f64::NAN, f64::NAN)
        }
        CflConstantMode::Derived { k_override, k_lemma } => {
            let c = measure_c_spd(params, a, spec)?;
            let kt2 = k_lemma * l_u0.powf(p - 1.0) * c;
            let k = match k_override {
                Some(k) => k,
                None => {
                    1.0 / ((p - 1.0)
                        * 2.0f64.powf(p)
                        * c
                        * (l_u0 + t_final * l_f + 3.0 * kt2 + 1.0).powf(p - 2.0))
                }
            };
            (k, c, kt2)
        }
    };
    let crossover = params.sp() / (p - 1.0);
    let (tau, branch) = if a < crossover {
        let expo = 2.0 * s + (s - a) * (p - 2.0);
        (k_constant * r.powf(expo), CflBranch::PowerLaw { exponent: expo })
    } else {
        (k_constant * r.powf(a) / r.ln().abs(), CflBranch::LogCorrected)
    };
    Ok(CflReport {
        tau,
        k_constant,
        c_spd,
        k_tilde2,
        branch,
    })
}

/// Scheme parameters: spatial grid, splitting radius, weight family, time
/// stepping, and the truncation box.
#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub grid: GridSpec,
    pub r: f64,
    pub kind: WeightKind,
    pub tau: TauMode,
    pub cfl: CflConstantMode,
    /// Half-width of the computational box (rounded to a lattice multiple).
    pub box_radius: f64,
    /// Store every k-th snapshot; None means ceil(N/200).
    pub store_every: Option<usize>,
    /// Permit tau beyond the CFL bound (recorded, invariants then only
    /// monitored).
    pub allow_unstable: bool,
}

/// One evolution run: thinned snapshots plus aggregate diagnostics.
#[derive(Debug)]
pub struct EvolutionState {
    pub snapshots: Vec<LatticeArray>,
    pub times: Vec<f64>,
    pub tau: f64,
    pub n_steps: usize,
    pub h: f64,
    pub d: usize,
    pub n: i64,
    pub r: f64,
    pub exterior_value: f64,
    pub cfl: CflReport,
    pub diagnostics: RunDiagnostics,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunDiagnostics {
    /// min over steps of (||u0||_inf + t_j ||f||_inf) - sup|U^j|.
    pub min_linf_margin: f64,
    /// min over sampled steps/points of the convex-combination bracket
    /// 1 - tau (p-1) sum |U(x+y)-U(x)|^{p-2} omega.
    pub min_bracket: f64,
    pub sup_u0: f64,
    pub sup_f: f64,
    pub cfl_overridden: bool,
    /// Set when stepping produced a non-finite value under allow_unstable;
    /// the run stops at that step.
    pub blowup_step: Option<usize>,
}

fn exterior_constant(ext: Extension) -> Result<f64> {
    ext.constant_value().ok_or_else(|| {
        Error::Config("evolution requires a constant far-field extension".into())
    })
}

/// Flat offsets and weights of a table relative to a box array, with the
/// out-of-box entries kept as multi-index shifts.
struct Stencil {
    /// (flat offset, weight) for shifts that stay inside the box when the
    /// base point does; validity still checked per point.
    entries: Vec<([i64; 3], f64)>,
    tail_mass: f64,
}

fn stencil(table: &WeightTable) -> Stencil {
    let mut entries = Vec::with_capacity(table.inner.len() + table.outer.len());
    for alpha in &table.inner {
        entries.push((*alpha, table.inner_weight));
    }
    for (alpha, w) in &table.outer {
        entries.push((*alpha, *w));
    }
    Stencil {
        entries,
        tail_mass: table.tail_mass,
    }
}

fn lh_at(
    u: &LatticeArray,
    alpha: &[i64; 3],
    ux: f64,
    st: &Stencil,
    p: f64,
    c_ext: f64,
) -> f64 {
    let mut acc = 0.0f64;
    for (shift, w) in &st.entries {
        let idx = [alpha[0] + shift[0], alpha[1] + shift[1], alpha[2] + shift[2]];
        let v = match u.index(&idx) {
            Some(flat) => u.values[flat],
            None => c_ext,
        };
        acc += w * jp(v - ux, p);
    }
    acc + jp(c_ext - ux, p) * st.tail_mass
}

fn bracket_at(
    u: &LatticeArray,
    alpha: &[i64; 3],
    ux: f64,
    st: &Stencil,
    p: f64,
    c_ext: f64,
    tau: f64,
) -> f64 {
    let mut acc = 0.0f64;
    for (shift, w) in &st.entries {
        let idx = [alpha[0] + shift[0], alpha[1] + shift[1], alpha[2] + shift[2]];
        let v = match u.index(&idx) {
            Some(flat) => u.values[flat],
            None => c_ext,
        };
        acc += w * jp_slope(v - ux, p);
    }
    acc += jp_slope(c_ext - ux, p) * st.tail_mass;
    1.0 - tau * (p - 1.0) * acc
}

/// One explicit step U + tau (L_h U + f). Non-finite results abort with the
/// offending flat index and the given step number.
pub fn step(
    u: &LatticeArray,
    table: &WeightTable,
    f: &LatticeArray,
    tau: f64,
    exterior: Extension,
    step_index: usize,
) -> Result<LatticeArray> {
    let c_ext = exterior_constant(exterior)?;
    let st = stencil(table);
    let p = table.p;
    let values: Vec<f64> = (0..u.values.len())
        .into_par_iter()
        .map(|flat| {
            let alpha = u.multi_index(flat);
            let ux = u.values[flat];
            ux + tau * (lh_at(u, &alpha, ux, &st, p, c_ext) + f.values[flat])
        })
        .collect();
    if let Some(flat) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            step: step_index,
            index: flat,
            what: "non-finite update (instability)".into(),
        });
    }
    let mut out = u.clone();
    out.values = values;
    Ok(out)
}

fn min_bracket(u: &LatticeArray, st: &Stencil, p: f64, c_ext: f64, tau: f64) -> f64 {
    (0..u.values.len())
        .into_par_iter()
        .map(|flat| {
            let alpha = u.multi_index(flat);
            bracket_at(u, &alpha, u.values[flat], st, p, c_ext, tau)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Run the scheme to t = T.
///
/// With TauMode beyond the CFL bound and allow_unstable unset this is a
/// configuration error; with it set, the override is recorded and the
/// L-infinity invariant is only monitored. Snapshots are thinned but the
/// first and final states are always stored.
pub fn run(problem: &EvolutionProblem, config: &SchemeConfig, spec: &QuadSpec) -> Result<EvolutionState> {
    let params = &problem.params;
    let c_ext = exterior_constant(config.grid.extension)?;
    let table = build_weights(&config.grid, config.r, params, config.kind, spec)?;
    let cfl = cfl_tau(
        config.r,
        params,
        problem.a(),
        problem.l_u0(),
        problem.l_f(),
        problem.t_final,
        config.cfl,
        spec,
    )?;
    let tau_target = match config.tau {
        TauMode::Auto => cfl.tau,
        TauMode::AutoScaled(factor) => {
            if !(factor > 0.0) {
                return Err(Error::Config(format!("tau scale must be positive, got {factor}")));
            }
            factor * cfl.tau
        }
        TauMode::Fixed(t) => {
            if !(t > 0.0) {
                return Err(Error::Config(format!("tau must be positive, got {t}")));
            }
            t
        }
    };
    let overridden = tau_target > cfl.tau * (1.0 + 1e-12);
    if overridden && !config.allow_unstable {
        return Err(Error::Config(format!(
            "tau = {tau_target:e} violates the CFL bound {:e}; pass allow_unstable to proceed",
            cfl.tau
        )));
    }

    let h = config.grid.h;
    let n = (config.box_radius / h).round() as i64;
    if n < 1 {
        return Err(Error::Config(format!(
            "box radius {} too small for mesh width {h}",
            config.box_radius
        )));
    }
    let d = params.d;
    let n_steps = (problem.t_final / tau_target).ceil() as usize;
    let tau = problem.t_final / n_steps as f64;
    let store_every = match config.store_every {
        Some(k) if k >= 1 => k,
        Some(_) => return Err(Error::Config("store_every must be at least 1".into())),
        None => n_steps.div_ceil(200).max(1),
    };

    let mut u = LatticeArray::from_field(&problem.u0, d, n, h);
    let f_arr = LatticeArray::from_field(&problem.f, d, n, h);
    let sup_u0 = u
        .values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(c_ext.abs());
    let sup_f = f_arr.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let st = stencil(&table);
    let p = params.p;
    let mut snapshots = vec![u.clone()];
    let mut times = vec![0.0];
    let mut min_margin = f64::INFINITY;
    let mut min_br = min_bracket(&u, &st, p, c_ext, tau);
    let mut blowup_step = None;

    for j in 1..=n_steps {
        let t_j = tau * j as f64;
        match step(&u, &table, &f_arr, tau, config.grid.extension, j) {
            Ok(next) => u = next,
            Err(Error::Numerical { step, index, what }) => {
                if config.allow_unstable {
                    blowup_step = Some(step);
                    break;
                }
                return Err(Error::Numerical { step, index, what });
            }
            Err(e) => return Err(e),
        }
        let sup = u.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let margin = sup_u0 + t_j * sup_f - sup;
        min_margin = min_margin.min(margin);
        if margin < -1e-6 && !overridden && !config.allow_unstable {
            return Err(Error::Numerical {
                step: j,
                index: 0,
                what: format!(
                    "L-infinity bound violated by {:e} under a valid CFL step",
                    -margin
                ),
            });
        }
        if j % store_every == 0 || j == n_steps {
            snapshots.push(u.clone());
            times.push(t_j);
            min_br = min_br.min(min_bracket(&u, &st, p, c_ext, tau));
        }
    }

    Ok(EvolutionState {
        snapshots,
        times,
        tau,
        n_steps,
        h,
        d,
        n,
        r: config.r,
        exterior_value: c_ext,
        cfl,
        diagnostics: RunDiagnostics {
            min_linf_margin: if min_margin.is_finite() { min_margin } else { 0.0 },
            min_bracket: min_br,
            sup_u0,
            sup_f,
            cfl_overridden: overridden,
            blowup_step,
        },
    })
}

impl EvolutionState {
    pub fn t_final(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Snapshot value at a lattice point.
    pub fn value_at(&self, snapshot: usize, x: &[f64]) -> Result<f64> {
        let arr = &self.snapshots[snapshot];
        let mut alpha = [0i64; 3];
        for i in 0..self.d {
            let t = x[i] / self.h;
            let k = t.round();
            if (t - k).abs() > 1e-6 {
                return Err(Error::Domain(format!("x[{i}] = {} is off-lattice", x[i])));
            }
            alpha[i] = k as i64;
        }
        match arr.index(&alpha) {
            Some(flat) => Ok(arr.values[flat]),
            None => Ok(self.exterior_value),
        }
    }

    /// Linear-in-time interpolation between stored snapshots.
    pub fn interpolate(&self, x: &[f64], t: f64) -> Result<f64> {
        let t_end = self.t_final();
        if !(0.0..=t_end * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::Domain(format!(
                "time {t} outside the computed range [0, {t_end}]"
            )));
        }
        let t = t.min(t_end);
        let j = match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(exact) => return self.value_at(exact, x),
            Err(pos) => pos - 1,
        };
        let (t0, t1) = (self.times[j], self.times[j + 1]);
        let w = (t - t0) / (t1 - t0);
        Ok((1.0 - w) * self.value_at(j, x)? + w * self.value_at(j + 1, x)?)
    }
}

/// Worst Hölder-propagation margin over stored snapshots:
/// min over j and grid pairs of
/// Lambda_u0(|x_a - x_g|) + t_j Lambda_f(|x_a - x_g|) - |U^j_a - U^j_g|.
/// Nonnegative means the propagated modulus holds.
pub fn holder_check(state: &EvolutionState, problem: &EvolutionProblem) -> Result<f64> {
    if state.d != 1 {
        return Err(Error::Domain(
            "holder_check is implemented for d = 1 boxes".into(),
        ));
    }
    let a = problem.a();
    let l_u0 = problem.l_u0();
    let l_f = problem.l_f();
    let side = state.snapshots[0].side();
    // moduli precomputed on the distance classes k h
    let lam_u: Vec<f64> = (0..side).map(|k| l_u0 * (k as f64 * state.h).powf(a)).collect();
    let lam_f: Vec<f64> = (0..side).map(|k| l_f * (k as f64 * state.h).powf(a)).collect();

    let worst = state
        .snapshots
        .par_iter()
        .zip(&state.times)
        .map(|(snap, t)| {
            let v = &snap.values;
            let mut m = f64::INFINITY;
            for i in 0..v.len() {
                for k in 1..v.len() - i {
                    let bound = lam_u[k] + t * lam_f[k];
                    m = m.min(bound - (v[i + k] - v[i]).abs());
                }
            }
            m
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(worst)
}

/// Max observed ratio of the time modulus ||U^{j+k} - U^j||_inf to the bound
/// K~_2 t_k S_{a(p-1)}(r) + ||f||_inf t_k, over stored snapshot pairs.
#[derive(Debug, Clone, Serialize)]
pub struct TimeModulusReport {
    pub max_ratio: f64,
    pub bound_scale: f64,
}

pub fn time_modulus_check(state: &EvolutionState, problem: &EvolutionProblem) -> TimeModulusReport {
    let a = problem.a();
    let p = problem.params.p;
    let s = problem.params.s;
    let k_tilde2 = state.cfl.k_tilde2;
    let scale = k_tilde2 * s_nu(a * (p - 1.0), state.r, s, p) + state.diagnostics.sup_f;
    let mut max_ratio = 0.0f64;
    for j in 0..state.snapshots.len() {
        for k in j + 1..state.snapshots.len() {
            let dt = state.times[k] - state.times[j];
            if dt <= 0.0 {
                continue;
            }
            let diff = state.snapshots[j]
                .values
                .iter()
                .zip(&state.snapshots[k].values)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            let bound = scale * dt;
            if bound > 0.0 {
                max_ratio = max_ratio.max(diff / bound);
            } else if diff > 0.0 {
                max_ratio = f64::INFINITY;
            }
        }
    }
    TimeModulusReport {
        max_ratio,
        bound_scale: scale,
    }
}

/// Largest sup-difference over stored common times of two runs on the same
/// grid (continuous-dependence diagnostic).
pub fn continuous_dependence_gap(a: &EvolutionState, b: &EvolutionState) -> Result<f64> {
    if a.h != b.h || a.n != b.n || a.d != b.d || a.times.len() != b.times.len() {
        return Err(Error::Config(
            "continuous dependence needs two runs on the same grid and schedule".into(),
        ));
    }
    let mut worst = 0.0f64;
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        for (x, y) in sa.values.iter().zip(&sb.values) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}
