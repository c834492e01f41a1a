//! `fplap weights`: build weight tables over an r-sweep and report the
//! summability ratio series.

use fplap::kernel::s_nu;
use fplap::lattice::{build_weights, summability_report, Extension, GridSpec, WeightKind};
use fplap::quad::QuadSpec;
use fplap::{Error, Result};
use serde::Serialize;

use crate::load::{self, parse_weight_kind};
use crate::table::{write_json, Table};
use crate::Ctx;

#[derive(Serialize)]
struct PerRadius {
    r: f64,
    h: f64,
    total: f64,
    far: f64,
    /// (nu, moment, S_nu(r), moment / S_nu(r)) per requested nu.
    moments: Vec<(f64, f64, f64, f64)>,
    tail_mass: f64,
    tail_edge: f64,
}

#[derive(Serialize)]
struct Series {
    name: String,
    values: Vec<f64>,
    /// max/min over the sweep; bounded summability shows as a small factor.
    variation: f64,
}

#[derive(Serialize)]
struct WeightsSummary {
    d: usize,
    p: f64,
    s: f64,
    kind: WeightKind,
    rho_max: f64,
    h_ratio: f64,
    nus: Vec<f64>,
    per_radius: Vec<PerRadius>,
    series: Vec<Series>,
}

fn variation(values: &[f64]) -> f64 {
    let hi = values.iter().cloned().fold(f64::MIN, f64::max);
    let lo = values.iter().cloned().fold(f64::MAX, f64::min);
    hi / lo
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.config()?;
    let params = load::load_operator(cfg)?;
    let sec = cfg.require_section("weights")?;
    let kind = parse_weight_kind(&sec, "kind", WeightKind::W1)?;
    let radii = sec.require_list("radii")?;
    let rho_max: f64 = sec.get_or("rho_max", 4.0)?;
    let default_ratio = match kind {
        WeightKind::W1 => 4.0,
        WeightKind::W2 => 4.0 * (params.d as f64).sqrt(),
    };
    let h_ratio: f64 = sec.get_or("h_ratio", default_ratio)?;
    if !(h_ratio > 0.0) {
        return Err(Error::Config(format!(
            "{}: h_ratio must be positive",
            sec.at("h_ratio")
        )));
    }
    let sp = params.sp();
    let nus = match sec.get_list("nu")? {
        Some(v) => v,
        None => vec![0.5 * sp, sp, 2.0 * sp],
    };
    cfg.reject_unknown()?;

    let spec = QuadSpec::default();
    let mut per_radius = Vec::new();
    for &r in &radii {
        let h = r / h_ratio;
        let grid = GridSpec {
            h,
            d: params.d,
            rho_max,
            extension: Extension::ZeroFarField,
        };
        let table = build_weights(&grid, r, &params, kind, &spec)?;
        let rep = summability_report(&table, &nus);
        per_radius.push(PerRadius {
            r,
            h,
            total: rep.total,
            far: rep.far,
            moments: rep
                .moments
                .iter()
                .map(|&(nu, m)| {
                    let scale = s_nu(nu, r, params.s, params.p);
                    (nu, m, scale, m / scale)
                })
                .collect(),
            tail_mass: table.tail_mass,
            tail_edge: table.tail_edge,
        });
    }

    let mut series = vec![Series {
        name: "total_scaled".into(),
        values: per_radius.iter().map(|p| p.total * p.r.powf(sp)).collect(),
        variation: 0.0,
    }];
    series.push(Series {
        name: "far".into(),
        values: per_radius.iter().map(|p| p.far).collect(),
        variation: 0.0,
    });
    for (i, &nu) in nus.iter().enumerate() {
        series.push(Series {
            name: format!("moment_ratio(nu = {nu})"),
            values: per_radius.iter().map(|p| p.moments[i].3).collect(),
            variation: 0.0,
        });
    }
    for s in &mut series {
        s.variation = variation(&s.values);
    }

    let mut columns = vec!["r".to_string(), "h".to_string(), "total_scaled".to_string(), "far".to_string()];
    for i in 0..nus.len() {
        columns.push(format!("ratio{i}"));
    }
    let mut table = Table::new(columns);
    for (i, p) in per_radius.iter().enumerate() {
        let mut row = vec![p.r, p.h, series[0].values[i], p.far];
        for s in &series[2..] {
            row.push(s.values[i]);
        }
        table.push(row);
    }

    let table_path = table.write(&ctx.out_dir, "weights", ctx.format)?;
    let summary = WeightsSummary {
        d: params.d,
        p: params.p,
        s: params.s,
        kind,
        rho_max,
        h_ratio,
        nus,
        per_radius,
        series,
    };
    let summary_path = write_json(&ctx.out_dir, "weights_summary", &summary)?;

    let worst = summary
        .series
        .iter()
        .map(|s| s.variation)
        .fold(f64::MIN, f64::max);
    println!(
        "weights: {} radii, worst ratio variation factor {:.4}",
        summary.per_radius.len(),
        worst
    );
    println!("wrote {}", table_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}
