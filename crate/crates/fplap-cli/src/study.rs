//! `fplap study`: the convergence harness. Five modes, picked by the
//! `mode` key of `[study]`:
//!
//! - `consistency`: one sweep against the oracle, EOC table per the
//!   `[sweep]` section.
//! - `refinement`: halving levels of the evolve problem, sup-differences
//!   between consecutive runs.
//! - `fig1`: table of the proved exponents (gamma, nu, mu, order in h) over
//!   a (p, s) grid; no numerics.
//! - `fig2`: fitted versus expected lattice orders for a list of (p, s)
//!   cases.
//! - `synthetic`: slope recovery on exact power-law data.

use fplap::kernel::{gamma_exponent_dim, nu_exponent, OperatorParams};
use fplap::quad::QuadSpec;
use fplap::study::{consistency_sweep, eoc, mu_select, refinement_cauchy, CauchyReport, EocReport};
use fplap::{Error, Result};
use serde::Serialize;

use crate::config::Section;
use crate::load::{self, parse_regime, parse_sweep_kind, regime_name, FieldDesc, SweepSettings};
use crate::table::{write_json, Table};
use crate::Ctx;

pub fn run(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.config()?;
    let sec = cfg.require_section("study")?;
    match sec.require_str("mode")? {
        "consistency" => consistency(ctx),
        "refinement" => refinement(ctx, &sec),
        "fig1" => fig1(ctx, &sec),
        "fig2" => fig2(ctx, &sec),
        "synthetic" => synthetic(ctx, &sec),
        other => Err(Error::Config(format!(
            "{}: unknown mode '{other}' (expected consistency, refinement, fig1, fig2, synthetic)",
            sec.at("mode")
        ))),
    }
}

fn eoc_table(report: &EocReport) -> Table {
    let mut t = Table::new(vec![
        "abscissa",
        "error",
        "expected_order",
        "fitted_order",
        "residual",
    ]);
    let expected = report.expected_slope.unwrap_or(f64::NAN);
    for (&a, &e) in report.abscissae.iter().zip(&report.errors) {
        t.push(vec![a, e, expected, report.slope, report.residual]);
    }
    t
}

#[derive(Serialize)]
struct ConsistencySummary {
    mode: &'static str,
    d: usize,
    p: f64,
    s: f64,
    field: FieldDesc,
    sweep: SweepSettings,
    eoc: EocReport,
}

fn consistency(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.config()?;
    let params = load::load_operator(cfg)?;
    let (phi, field_desc) = load::load_field(&cfg.require_section("field")?, params.s)?;
    let settings = SweepSettings::load(&cfg.require_section("sweep")?, params.d)?;
    cfg.reject_unknown()?;

    let report = consistency_sweep(&settings.request(&phi, params), &QuadSpec::default())?;
    let table_path = eoc_table(&report).write(&ctx.out_dir, "study", ctx.format)?;
    let summary = ConsistencySummary {
        mode: "consistency",
        d: params.d,
        p: params.p,
        s: params.s,
        field: field_desc,
        sweep: settings,
        eoc: report,
    };
    let summary_path = write_json(&ctx.out_dir, "study_summary", &summary)?;

    println!(
        "study consistency: fitted order {:.4}, expected {} ({})",
        summary.eoc.slope,
        summary
            .eoc
            .expected_slope
            .map(|e| format!("{e:.4}"))
            .unwrap_or_else(|| "none".into()),
        summary.eoc.expected_note.as_deref().unwrap_or("")
    );
    println!("wrote {}", table_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}

#[derive(Serialize)]
struct RefinementSummary {
    mode: &'static str,
    levels: usize,
    u0: FieldDesc,
    forcing: Option<FieldDesc>,
    report: CauchyReport,
}

fn refinement(ctx: &Ctx, sec: &Section) -> Result<()> {
    let cfg = ctx.config()?;
    let levels: usize = sec.get_or("levels", 3)?;
    let setup = load::load_evolve(cfg, ctx.allow_unstable)?;
    if setup.perturb_delta.is_some() {
        return Err(Error::Config(
            "perturb_delta applies to the evolve command, not the refinement study".into(),
        ));
    }
    cfg.reject_unknown()?;

    let report = refinement_cauchy(&setup.problem, &setup.scheme, levels, &QuadSpec::default())?;

    let mut levels_table = Table::new(vec![
        "level",
        "h",
        "r",
        "tau",
        "linf_margin",
        "min_bracket",
        "blowup_step",
    ]);
    for i in 0..report.hs.len() {
        levels_table.push(vec![
            i as f64,
            report.hs[i],
            report.rs[i],
            report.taus[i],
            report.linf_margins[i],
            report.min_brackets[i],
            report.blowup_steps[i].map(|s| s as f64).unwrap_or(-1.0),
        ]);
    }
    let mut diffs_table = Table::new(vec!["coarse_level", "fine_level", "sup_difference"]);
    for (i, &d) in report.diffs.iter().enumerate() {
        diffs_table.push(vec![i as f64, (i + 1) as f64, d]);
    }

    let levels_path = levels_table.write(&ctx.out_dir, "refinement_levels", ctx.format)?;
    let diffs_path = diffs_table.write(&ctx.out_dir, "refinement_diffs", ctx.format)?;
    let summary = RefinementSummary {
        mode: "refinement",
        levels,
        u0: setup.u0_desc,
        forcing: setup.forcing_desc,
        report,
    };
    let summary_path = write_json(&ctx.out_dir, "study_summary", &summary)?;

    println!(
        "study refinement: sup-differences {:?}, strictly decreasing: {}",
        summary.report.diffs, summary.report.strictly_decreasing
    );
    println!("wrote {}", levels_path.display());
    println!("wrote {}", diffs_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}

#[derive(Serialize)]
struct GridSummary {
    mode: &'static str,
    d: usize,
    regime: String,
    rows: usize,
}

fn fig1(ctx: &Ctx, sec: &Section) -> Result<()> {
    let cfg = ctx.config()?;
    let d: usize = sec.get_or("d", 1)?;
    let regime = parse_regime(sec)?;
    let p_values = sec.require_list("p_values")?;
    let s_values = sec.require_list("s_values")?;
    cfg.reject_unknown()?;

    let mut table = Table::new(vec!["p", "s", "gamma", "nu", "mu", "order_in_h"]);
    for &p in &p_values {
        for &s in &s_values {
            let params = OperatorParams::new(d, p, s)?;
            let gamma = gamma_exponent_dim(p, regime, d)?;
            let nu = nu_exponent(&params, regime)?;
            let sel = mu_select(&params, regime)?;
            table.push(vec![p, s, gamma, nu, sel.mu, sel.expected_order_in_h]);
        }
    }

    let table_path = table.write(&ctx.out_dir, "fig1", ctx.format)?;
    let summary = GridSummary {
        mode: "fig1",
        d,
        regime: regime_name(regime).into(),
        rows: table.rows.len(),
    };
    let summary_path = write_json(&ctx.out_dir, "study_summary", &summary)?;

    println!(
        "study fig1: {} (p, s) combinations, regime {}",
        table.rows.len(),
        summary.regime
    );
    println!("wrote {}", table_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}

#[derive(Serialize)]
struct FigTwoCase {
    p: f64,
    s: f64,
    eoc: EocReport,
}

#[derive(Serialize)]
struct FigTwoSummary {
    mode: &'static str,
    d: usize,
    regime: String,
    field: FieldDesc,
    x: Vec<f64>,
    hs: Vec<f64>,
    cases: Vec<FigTwoCase>,
}

fn parse_cases(sec: &Section) -> Result<Vec<(f64, f64)>> {
    let raw = sec.require_str("cases")?;
    let mut out = Vec::new();
    for tok in raw.split_whitespace() {
        let Some((p, s)) = tok.split_once(':') else {
            return Err(Error::Config(format!(
                "{}: '{tok}' is not a p:s pair",
                sec.at("cases")
            )));
        };
        let parse = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|e| Error::Config(format!("{}: '{tok}': {e}", sec.at("cases"))))
        };
        out.push((parse(p)?, parse(s)?));
    }
    if out.is_empty() {
        return Err(Error::Config(format!("{}: no cases listed", sec.at("cases"))));
    }
    Ok(out)
}

fn fig2(ctx: &Ctx, sec: &Section) -> Result<()> {
    let cfg = ctx.config()?;
    let d: usize = sec.get_or("d", 1)?;
    let regime = parse_regime(sec)?;
    let cases = parse_cases(sec)?;
    let kind = match sec.raw("kind") {
        None => fplap::study::SweepKind::DiscreteW1,
        Some(_) => parse_sweep_kind(sec, "kind")?,
    };
    let x = sec.require_list("x")?;
    if x.len() != d {
        return Err(Error::Config(format!(
            "{}: needs {d} coordinates for d = {d}, got {}",
            sec.at("x"),
            x.len()
        )));
    }
    let hs = sec.require_list("hs")?;
    let rho_max: f64 = sec.get_or("rho_max", 4.0)?;
    let window: usize = sec.get_or("window", 3)?;
    let (_, field_desc) = load::load_field(&cfg.require_section("field")?, cases[0].1)?;
    cfg.reject_unknown()?;

    let spec = QuadSpec::default();
    let mut table = Table::new(vec!["p", "s", "mu", "expected_order", "fitted_order", "residual"]);
    let mut summaries = Vec::new();
    for &(p, s) in &cases {
        let params = OperatorParams::new(d, p, s)?;
        // the field is rebuilt per case: builtins like heaviside-s take their
        // exponent from the case's s
        let (phi, _) = load::load_field(&cfg.require_section("field")?, s)?;
        let settings = SweepSettings {
            kind,
            x: x.clone(),
            abscissae: hs.clone(),
            mu: None,
            regime,
            rho_max,
            window,
            oracle: true,
        };
        let report = consistency_sweep(&settings.request(&phi, params), &spec)?;
        let sel = mu_select(&params, regime)?;
        table.push(vec![
            p,
            s,
            sel.mu,
            report.expected_slope.unwrap_or(f64::NAN),
            report.slope,
            report.residual,
        ]);
        summaries.push(FigTwoCase { p, s, eoc: report });
    }

    let table_path = table.write(&ctx.out_dir, "fig2", ctx.format)?;
    let summary = FigTwoSummary {
        mode: "fig2",
        d,
        regime: regime_name(regime).into(),
        field: field_desc,
        x,
        hs,
        cases: summaries,
    };
    let summary_path = write_json(&ctx.out_dir, "study_summary", &summary)?;

    for (row, case) in table.rows.iter().zip(&summary.cases) {
        println!(
            "study fig2: p = {}, s = {}: fitted {:.4}, expected {:.4} ({})",
            case.p,
            case.s,
            row[4],
            row[3],
            case.eoc.expected_note.as_deref().unwrap_or("")
        );
    }
    println!("wrote {}", table_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}

#[derive(Serialize)]
struct SyntheticSummary {
    mode: &'static str,
    abscissae: Vec<f64>,
    coefficient: f64,
    exponents: Vec<f64>,
    fitted: Vec<f64>,
    worst_gap: f64,
}

fn synthetic(ctx: &Ctx, sec: &Section) -> Result<()> {
    let cfg = ctx.config()?;
    let exponents = match sec.get_list("exponents")? {
        Some(v) => v,
        None => vec![0.5, 1.0, 2.0, 3.5],
    };
    let abscissae = match sec.get_list("abscissae")? {
        Some(v) => v,
        None => vec![0.1, 0.05, 0.025, 0.0125],
    };
    let coefficient: f64 = sec.get_or("coefficient", 1.7)?;
    cfg.reject_unknown()?;

    let mut table = Table::new(vec!["exponent", "fitted_order", "abs_gap"]);
    let mut fitted = Vec::new();
    let mut worst: f64 = 0.0;
    for &target in &exponents {
        let pts: Vec<(f64, f64)> = abscissae
            .iter()
            .map(|&a| (a, coefficient * a.powf(target)))
            .collect();
        let rep = eoc(&pts)?;
        let gap = (rep.slope - target).abs();
        worst = worst.max(gap);
        fitted.push(rep.slope);
        table.push(vec![target, rep.slope, gap]);
    }

    let table_path = table.write(&ctx.out_dir, "synthetic", ctx.format)?;
    let summary = SyntheticSummary {
        mode: "synthetic",
        abscissae,
        coefficient,
        exponents,
        fitted,
        worst_gap: worst,
    };
    let summary_path = write_json(&ctx.out_dir, "study_summary", &summary)?;

    println!("study synthetic: worst slope gap {worst:.3e}");
    println!("wrote {}", table_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}
