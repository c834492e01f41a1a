//! `fplap expand`: evaluate one expansion family (or the lattice operator)
//! over a sweep, optionally against the principal-value oracle.

use fplap::quad::QuadSpec;
use fplap::study::{self, EocReport};
use fplap::{Error, Result};
use serde::Serialize;

use crate::load::{self, FieldDesc, SweepSettings};
use crate::table::{write_json, Table};
use crate::Ctx;

#[derive(Serialize)]
struct ExpandSummary {
    d: usize,
    p: f64,
    s: f64,
    field: FieldDesc,
    sweep: SweepSettings,
    values: Vec<f64>,
    reference: Option<f64>,
    eoc: Option<EocReport>,
    note: Option<String>,
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.config()?;
    let params = load::load_operator(cfg)?;
    let (phi, field_desc) = load::load_field(&cfg.require_section("field")?, params.s)?;
    let settings = SweepSettings::load(&cfg.require_section("sweep")?, params.d)?;
    cfg.reject_unknown()?;

    let spec = QuadSpec::default();
    let req = settings.request(&phi, params);
    let values = study::sweep_values(&req, &spec)?;

    let (reference, eoc, note) = if settings.oracle {
        let reference = study::sweep_reference(&req, &values, &spec)?;
        match study::sweep_report(&req, &values, reference) {
            Ok(rep) => (Some(reference), Some(rep), None),
            // a field the operator annihilates leaves nothing to fit; that is
            // a legitimate outcome for this command, not an error
            Err(Error::InsufficientData(why)) => {
                (Some(reference), None, Some(format!("no order fitted: {why}")))
            }
            Err(e) => return Err(e),
        }
    } else {
        (None, None, None)
    };

    let table = if let Some(r) = reference {
        let mut t = Table::new(vec!["abscissa", "value", "reference", "abs_error"]);
        for (&a, &v) in settings.abscissae.iter().zip(&values) {
            t.push(vec![a, v, r, (v - r).abs()]);
        }
        t
    } else {
        let mut t = Table::new(vec!["abscissa", "value"]);
        for (&a, &v) in settings.abscissae.iter().zip(&values) {
            t.push(vec![a, v]);
        }
        t
    };

    let table_path = table.write(&ctx.out_dir, "expand", ctx.format)?;
    let summary = ExpandSummary {
        d: params.d,
        p: params.p,
        s: params.s,
        field: field_desc,
        sweep: settings,
        values,
        reference,
        eoc,
        note,
    };
    let summary_path = write_json(&ctx.out_dir, "expand_summary", &summary)?;

    match &summary.eoc {
        Some(rep) => println!(
            "expand: fitted order {:.4} (expected {}), {} points",
            rep.slope,
            rep.expected_slope
                .map(|e| format!("{e:.4}"))
                .unwrap_or_else(|| "none".into()),
            summary.values.len()
        ),
        None => println!("expand: {} points, no order fitted", summary.values.len()),
    }
    println!("wrote {}", table_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}
