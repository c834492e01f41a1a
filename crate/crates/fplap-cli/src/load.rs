//! Translation from config sections to library types, shared by the
//! subcommands.

use fplap::evolve::{CflConstantMode, EvolutionProblem, SchemeConfig, TauMode};
use fplap::field::{self, ScalarField};
use fplap::kernel::{OperatorParams, RateRegime};
use fplap::lattice::{Extension, GridSpec, WeightKind};
use fplap::study::{SweepKind, SweepRequest};
use fplap::{Error, Result};
use serde::Serialize;

use crate::config::{ConfigFile, Section};

pub fn load_operator(cfg: &ConfigFile) -> Result<OperatorParams> {
    let sec = cfg.require_section("operator")?;
    let d: usize = sec.require("d")?;
    let p: f64 = sec.require("p")?;
    let s: f64 = sec.require("s")?;
    OperatorParams::new(d, p, s)
}

/// Echo of a field section for metadata output.
#[derive(Debug, Clone, Serialize)]
pub struct FieldDesc {
    pub name: String,
    pub truncation: f64,
    pub scale: f64,
}

/// Builtin field from a `[field]`-shaped section. `scale` multiplies the
/// field (and its Hölder/sup data); the default 1 leaves builtins as they
/// are.
pub fn load_field(sec: &Section, s_operator: f64) -> Result<(ScalarField, FieldDesc)> {
    let name = sec.require_str("name")?.to_string();
    let truncation: f64 = sec.get_or("truncation", 10.0)?;
    let scale: f64 = sec.get_or("scale", 1.0)?;
    let inner = field::builtin(&name, s_operator, truncation)?;
    let phi = if scale == 1.0 { inner } else { scaled(inner, scale) };
    Ok((
        phi,
        FieldDesc {
            name,
            truncation,
            scale,
        },
    ))
}

/// c * phi, keeping sup and Hölder data consistent. Analytic derivatives are
/// dropped; the callers that scale (forcing terms) never need them.
pub fn scaled(inner: ScalarField, c: f64) -> ScalarField {
    let sup = inner.sup_bound();
    let hol = inner.holder();
    let mut f = ScalarField::new(move |x| c * inner.eval(x));
    if let Some(b) = sup {
        f = f.with_sup_bound(b * c.abs());
    }
    if let Some(h) = hol {
        f = f.with_holder(h.a, h.l * c.abs());
    }
    f
}

/// phi + delta (the continuous-dependence perturbation).
pub fn shifted(inner: ScalarField, delta: f64) -> ScalarField {
    let sup = inner.sup_bound();
    let hol = inner.holder();
    let mut f = ScalarField::new(move |x| inner.eval(x) + delta);
    if let Some(b) = sup {
        f = f.with_sup_bound(b + delta.abs());
    }
    if let Some(h) = hol {
        f = f.with_holder(h.a, h.l);
    }
    f
}

pub fn parse_sweep_kind(sec: &Section, key: &str) -> Result<SweepKind> {
    match sec.require_str(key)? {
        "fractional" => Ok(SweepKind::Fractional),
        "local-surface" => Ok(SweepKind::LocalSurface),
        "local-volume" => Ok(SweepKind::LocalVolume),
        "bucur-squassina" => Ok(SweepKind::BucurSquassina),
        "discrete-w1" => Ok(SweepKind::DiscreteW1),
        "discrete-w2" => Ok(SweepKind::DiscreteW2),
        other => Err(Error::Config(format!(
            "{}: unknown kind '{other}' (expected fractional, local-surface, local-volume, \
             bucur-squassina, discrete-w1, discrete-w2)",
            sec.at(key)
        ))),
    }
}

pub fn parse_weight_kind(sec: &Section, key: &str, default: WeightKind) -> Result<WeightKind> {
    match sec.raw(key) {
        None => Ok(default),
        Some("w1") => Ok(WeightKind::W1),
        Some("w2") => Ok(WeightKind::W2),
        Some(other) => Err(Error::Config(format!(
            "{}: unknown weight kind '{other}' (expected w1 or w2)",
            sec.at(key)
        ))),
    }
}

pub fn parse_regime(sec: &Section) -> Result<RateRegime> {
    let epsilon: f64 = sec.get_or("epsilon", 0.05)?;
    match sec.raw("regime").unwrap_or("uniform") {
        "uniform" => Ok(RateRegime::Uniform),
        "nonvanishing" => Ok(RateRegime::NonvanishingGradient { epsilon }),
        other => Err(Error::Config(format!(
            "{}: unknown regime '{other}' (expected uniform or nonvanishing)",
            sec.at("regime")
        ))),
    }
}

pub fn regime_name(regime: RateRegime) -> &'static str {
    match regime {
        RateRegime::Uniform => "uniform",
        RateRegime::NonvanishingGradient { .. } => "nonvanishing",
    }
}

/// `[sweep]` section: what to evaluate over which abscissae.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSettings {
    pub kind: SweepKind,
    pub x: Vec<f64>,
    /// r values for expansion kinds, h values for discrete kinds.
    pub abscissae: Vec<f64>,
    pub mu: Option<f64>,
    #[serde(serialize_with = "serialize_regime")]
    pub regime: RateRegime,
    pub rho_max: f64,
    pub window: usize,
    pub oracle: bool,
}

fn serialize_regime<S: serde::Serializer>(r: &RateRegime, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(regime_name(*r))
}

impl SweepSettings {
    pub fn load(sec: &Section, d: usize) -> Result<Self> {
        let kind = parse_sweep_kind(sec, "kind")?;
        let x = sec.require_list("x")?;
        if x.len() != d {
            return Err(Error::Config(format!(
                "{}: needs {d} coordinates for d = {d}, got {}",
                sec.at("x"),
                x.len()
            )));
        }
        Ok(SweepSettings {
            kind,
            x,
            abscissae: sec.require_list("abscissae")?,
            mu: sec.get("mu")?,
            regime: parse_regime(sec)?,
            rho_max: sec.get_or("rho_max", 4.0)?,
            window: sec.get_or("window", 3)?,
            oracle: sec.get_bool("oracle", true)?,
        })
    }

    pub fn request<'a>(&self, phi: &'a ScalarField, params: OperatorParams) -> SweepRequest<'a> {
        SweepRequest {
            phi,
            x: self.x.clone(),
            params,
            kind: self.kind,
            abscissae: self.abscissae.clone(),
            mu: self.mu,
            regime: self.regime,
            rho_max: self.rho_max,
            window: self.window,
        }
    }
}

fn parse_tau(sec: &Section) -> Result<(TauMode, String)> {
    let raw = sec.raw("tau").unwrap_or("auto");
    let mode = if raw == "auto" {
        TauMode::Auto
    } else if let Some(f) = raw.strip_prefix("auto*") {
        let factor: f64 = f.parse().map_err(|e| {
            Error::Config(format!("{}: 'auto*{f}': {e}", sec.at("tau")))
        })?;
        TauMode::AutoScaled(factor)
    } else {
        let t: f64 = raw.parse().map_err(|_| {
            Error::Config(format!(
                "{}: '{raw}' is not 'auto', 'auto*FACTOR', or a number",
                sec.at("tau")
            ))
        })?;
        TauMode::Fixed(t)
    };
    Ok((mode, raw.to_string()))
}

/// Everything the evolve and refinement commands share, plus a metadata echo.
pub struct EvolveSetup {
    pub problem: EvolutionProblem,
    pub scheme: SchemeConfig,
    pub u0_desc: FieldDesc,
    pub forcing_desc: Option<FieldDesc>,
    pub tau_text: String,
    pub far_field: f64,
    pub perturb_delta: Option<f64>,
}

pub fn load_evolve(cfg: &ConfigFile, allow_unstable: bool) -> Result<EvolveSetup> {
    let params = load_operator(cfg)?;
    let (u0, u0_desc) = load_field(&cfg.require_section("u0")?, params.s)?;
    let (f, forcing_desc) = match cfg.section("forcing") {
        Some(sec) => {
            let (f, desc) = load_field(&sec, params.s)?;
            (f, Some(desc))
        }
        None => (field::constant(0.0), None),
    };

    let sec = cfg.require_section("evolve")?;
    let t_final: f64 = sec.require("t_final")?;
    let problem = EvolutionProblem::new(u0, f, params, t_final)?;

    let (tau, tau_text) = parse_tau(&sec)?;
    let k_lemma: f64 = sec.get_or("k_lemma", 1.0)?;
    let cfl = match sec.get::<f64>("k_user")? {
        Some(k) => CflConstantMode::UserValue(k),
        None => CflConstantMode::Derived {
            k_override: None,
            k_lemma,
        },
    };
    let far_field: f64 = sec.get_or("far_field", 0.0)?;
    let scheme = SchemeConfig {
        grid: GridSpec {
            h: sec.require("h")?,
            d: params.d,
            rho_max: sec.get_or("rho_max", 2.0)?,
            extension: Extension::ConstantFarField(far_field),
        },
        r: sec.require("r")?,
        kind: parse_weight_kind(&sec, "kind", WeightKind::W1)?,
        tau,
        cfl,
        box_radius: sec.require("box_radius")?,
        store_every: sec.get("store_every")?,
        allow_unstable,
    };
    let perturb_delta = sec.get::<f64>("perturb_delta")?;
    Ok(EvolveSetup {
        problem,
        scheme,
        u0_desc,
        forcing_desc,
        tau_text,
        far_field,
        perturb_delta,
    })
}
