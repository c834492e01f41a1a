//! `fplap selftest`: deterministic randomized checks of the kernel
//! primitives and the EOC fitter. Failures do not abort the remaining
//! suites; the command reports every suite and the caller exits 4 if any
//! failed.

use fplap::field;
use fplap::kernel::{dy_operator, jp};
use fplap::quad::QuadSpec;
use fplap::study::eoc;
use fplap::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::table::write_json;
use crate::Ctx;

#[derive(Serialize)]
struct Suite {
    name: &'static str,
    samples: usize,
    worst: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct SelftestSummary {
    seed: u64,
    suites: Vec<Suite>,
    pass: bool,
}

fn synthetic_eoc() -> Suite {
    let mut worst: f64 = 0.0;
    for target in [0.5f64, 1.0, 2.0, 3.5] {
        let pts: Vec<(f64, f64)> = [0.1f64, 0.05, 0.025, 0.0125]
            .iter()
            .map(|&a| (a, 1.7 * a.powf(target)))
            .collect();
        match eoc(&pts) {
            Ok(rep) => worst = worst.max((rep.slope - target).abs()),
            Err(_) => worst = f64::INFINITY,
        }
    }
    Suite {
        name: "eoc synthetic exponents",
        samples: 4,
        worst,
        tolerance: 1e-10,
        pass: worst < 1e-10,
    }
}

fn jp_properties(seed: u64, n: usize) -> Suite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let p: f64 = rng.gen_range(1.5..5.0);
        let xi: f64 = rng.gen_range(-1e3..1e3);
        let lambda: f64 = rng.gen_range(1e-3..1e3);

        if jp(-xi, p).to_bits() != (-jp(xi, p)).to_bits() {
            worst = f64::INFINITY;
            continue;
        }
        let lhs = jp(lambda * xi, p);
        let rhs = lambda.powf(p - 1.0) * jp(xi, p);
        let scale = lhs.abs().max(rhs.abs()).max(1e-300);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Suite {
        name: "jp antisymmetry and homogeneity",
        samples: n,
        worst,
        tolerance: 1e-12,
        pass: worst <= 1e-12,
    }
}

fn dy_affine(seed: u64, n: usize) -> Suite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let p: f64 = rng.gen_range(1.5..5.0);
        let slope: f64 = rng.gen_range(-5.0..5.0);
        let offset: f64 = rng.gen_range(-2.0..2.0);
        let x: f64 = rng.gen_range(-3.0..3.0);
        let y: f64 = rng.gen_range(1e-3..10.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let phi = field::affine_truncated(vec![slope], offset, 1e9);
        let v = match dy_operator(&phi, &[x], &[y], p) {
            Ok(v) => v,
            Err(_) => {
                worst = f64::INFINITY;
                continue;
            }
        };
        // scale of the two cancelling terms, to measure the residual against
        let scale = (jp((slope * y).abs() + 1e-12 * (slope * x).abs(), p) / y.abs().powf(p)).max(1e-300);
        worst = worst.max(v.abs() / scale);
    }
    Suite {
        name: "dy affine annihilation",
        samples: n,
        worst,
        tolerance: 1e-9,
        pass: worst <= 1e-9,
    }
}

fn identity_d1() -> Suite {
    let spec = QuadSpec::default();
    let pair = fplap::expansion::identity_check_j2(&[0.7], &[vec![1.3]], 0.3, 3.5, 1, &spec);
    let worst = match pair {
        Ok(p) => (p.lhs - p.rhs).abs() / p.rhs.abs().max(1e-300),
        Err(_) => f64::INFINITY,
    };
    Suite {
        name: "quadratic identity, d = 1",
        samples: 1,
        worst,
        tolerance: 1e-13,
        pass: worst <= 1e-13,
    }
}

/// Returns whether every suite passed.
pub fn run(ctx: &Ctx) -> Result<bool> {
    let n = 10_000;
    let suites = vec![
        synthetic_eoc(),
        jp_properties(ctx.seed, n),
        dy_affine(ctx.seed, n),
        identity_d1(),
    ];
    for s in &suites {
        println!(
            "selftest {}: {} (worst {:.3e}, tolerance {:.0e}, {} samples)",
            s.name,
            if s.pass { "ok" } else { "FAILED" },
            s.worst,
            s.tolerance,
            s.samples
        );
    }
    let pass = suites.iter().all(|s| s.pass);
    let summary = SelftestSummary {
        seed: ctx.seed,
        suites,
        pass,
    };
    let path = write_json(&ctx.out_dir, "selftest", &summary)?;
    println!("wrote {}", path.display());
    Ok(pass)
}
