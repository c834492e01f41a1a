//! Structural properties: kernel nonlinearity, quadrature error bounds,
//! weight-table invariants, scheme monotonicity, and the interpolation
//! identity.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fplap::discrete_op::{apply_discrete, FieldSample, LatticeArray};
use fplap::error::Error;
use fplap::evolve::{self, CflConstantMode, EvolutionProblem, SchemeConfig, TauMode};
use fplap::field::{self, ScalarField};
use fplap::kernel::{dy_operator, jp, s_nu, OperatorParams};
use fplap::lattice::{build_weights, summability_report, Extension, GridSpec, WeightKind, WeightTable};
use fplap::quad::{self, QuadSpec};

fn spec() -> QuadSpec {
    QuadSpec::default()
}

proptest! {
    #[test]
    fn jp_antisymmetry_exact(xi in -1e3f64..1e3, p in 1.1f64..6.0) {
        prop_assert_eq!(jp(-xi, p), -jp(xi, p));
    }

    #[test]
    fn jp_homogeneity(xi in -1e2f64..1e2, p in 1.1f64..6.0, lambda in 1e-3f64..1e3) {
        let lhs = jp(lambda * xi, p);
        let rhs = lambda.powf(p - 1.0) * jp(xi, p);
        let scale = lhs.abs().max(rhs.abs()).max(1e-300);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "lhs {} rhs {}", lhs, rhs);
    }

    #[test]
    fn jp_monotone(a in -1e2f64..1e2, b in -1e2f64..1e2, p in 1.1f64..6.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(jp(lo, p) <= jp(hi, p));
    }

    #[test]
    fn dy_affine_annihilation(
        slope in -5.0f64..5.0,
        offset in -2.0f64..2.0,
        x in -3.0f64..3.0,
        y in prop::num::f64::NORMAL.prop_filter("nonzero shift", |v| v.abs() > 1e-3 && v.abs() < 10.0),
        p in 1.5f64..5.0,
    ) {
        let phi = field::affine_truncated(vec![slope], offset, 1e9);
        let v = dy_operator(&phi, &[x], &[y], p).unwrap();
        // forward and backward differences cancel to rounding; the scale of
        // the roundoff is set by the individual J_p terms
        let scale = jp((slope * y).abs() + 1e-12 * (slope * x).abs(), p) / y.abs().powf(p);
        prop_assert!(v.abs() <= 1e-9 * scale.max(1e-300), "residual {} scale {}", v, scale);
    }

    #[test]
    fn dy_scaling(lambda in 0.1f64..10.0, x in -2.0f64..2.0, y in 0.05f64..2.0, p in 1.5f64..5.0) {
        let base = field::gauss_bump();
        let scaled = ScalarField::new(move |z: &[f64]| lambda * (-z[0] * z[0]).exp());
        let v0 = dy_operator(&base, &[x], &[y], p).unwrap();
        let v1 = dy_operator(&scaled, &[x], &[y], p).unwrap();
        let rhs = lambda.powf(p - 1.0) * v0;
        let scale = v1.abs().max(rhs.abs()).max(1e-300);
        prop_assert!((v1 - rhs).abs() <= 1e-10 * scale, "v1 {} rhs {}", v1, rhs);
    }

    #[test]
    fn dy_translation(shift in -2.0f64..2.0, x in -2.0f64..2.0, y in 0.05f64..2.0, p in 1.5f64..5.0) {
        let base = field::gauss_bump();
        let moved = ScalarField::new(move |z: &[f64]| {
            let t = z[0] - shift;
            (-t * t).exp()
        });
        let v0 = dy_operator(&base, &[x], &[y], p).unwrap();
        let v1 = dy_operator(&moved, &[x + shift], &[y], p).unwrap();
        let scale = v0.abs().max(v1.abs()).max(1e-300);
        prop_assert!((v0 - v1).abs() <= 1e-9 * scale, "v0 {} v1 {}", v0, v1);
    }

    #[test]
    fn quad_error_bounds_are_consistent(
        c1 in -3.0f64..3.0,
        c2 in -3.0f64..3.0,
        c3 in 0.5f64..4.0,
        a in -5.0f64..0.0,
        len in 0.5f64..5.0,
    ) {
        let f = move |t: f64| c1 * (c3 * t).sin() + c2 * t * t + (0.3 * t).cos();
        let loose = QuadSpec { abs_tol: 1e-6, rel_tol: 1e-6, ..spec() };
        let tight = QuadSpec { abs_tol: 1e-12, rel_tol: 1e-12, ..spec() };
        let e1 = quad::integrate_interval(&f, a, a + len, &loose).unwrap();
        let e2 = quad::integrate_interval(&f, a, a + len, &tight).unwrap();
        // both intervals around the true value must overlap
        prop_assert!((e1.value - e2.value).abs() <= e1.error + e2.error + 1e-13,
            "loose {} ± {}, tight {} ± {}", e1.value, e1.error, e2.value, e2.error);
    }

    #[test]
    fn s_nu_branches_agree_near_crossover(r in 0.01f64..0.5, s in 0.1f64..0.9, p in 1.5f64..5.0) {
        let sp = s * p;
        let at = s_nu(sp, r, s, p);
        let near = s_nu(sp + 5e-13, r, s, p);
        prop_assert_eq!(at, near);
        prop_assert!((at - r.ln().abs()).abs() < 1e-15);
    }
}

fn table_for(h: f64, r: f64, p: f64, s: f64, rho: f64, kind: WeightKind) -> WeightTable {
    let params = OperatorParams::new(1, p, s).unwrap();
    let grid = GridSpec {
        h,
        d: 1,
        rho_max: rho,
        extension: Extension::ZeroFarField,
    };
    build_weights(&grid, r, &params, kind, &spec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_symmetric_nonnegative_summable(
        p in 1.2f64..5.0,
        s in 0.1f64..0.9,
        ri in 0usize..3,
        w2 in proptest::bool::ANY,
    ) {
        let r = [0.2, 0.1, 0.3][ri];
        let h = r / 5.0;
        let kind = if w2 { WeightKind::W2 } else { WeightKind::W1 };
        let t = table_for(h, r, p, s, 2.0, kind);
        prop_assert!(t.inner_weight > 0.0 && t.tail_mass > 0.0);
        for (alpha, w) in &t.outer {
            prop_assert!(*w >= 0.0);
            let neg = [-alpha[0], -alpha[1], -alpha[2]];
            prop_assert_eq!(t.weight(&neg).unwrap().to_bits(), w.to_bits());
        }
        let rep = summability_report(&t, &[s * p]);
        prop_assert!(rep.total.is_finite() && rep.total > 0.0);
        prop_assert!(rep.far <= rep.total);
    }

    #[test]
    fn w1_mass_independent_of_truncation(p in 1.2f64..5.0, s in 0.1f64..0.9) {
        let (h, r) = (0.04, 0.2);
        let t2 = table_for(h, r, p, s, 2.0, WeightKind::W1);
        let t3 = table_for(h, r, p, s, 3.0, WeightKind::W1);
        let mass = |t: &WeightTable| t.outer.iter().map(|(_, w)| w).sum::<f64>() + t.tail_mass;
        let (m2, m3) = (mass(&t2), mass(&t3));
        prop_assert!((m2 - m3).abs() <= 1e-11 * m2.abs(), "{} vs {}", m2, m3);
    }

    #[test]
    fn weight_table_json_round_trip_bit_exact(p in 1.2f64..5.0, s in 0.1f64..0.9) {
        let t = table_for(0.05, 0.2, p, s, 2.0, WeightKind::W1);
        let back = WeightTable::from_json(&t.to_json()).unwrap();
        prop_assert_eq!(t.inner_weight.to_bits(), back.inner_weight.to_bits());
        prop_assert_eq!(t.tail_mass.to_bits(), back.tail_mass.to_bits());
        prop_assert_eq!(t.tail_edge.to_bits(), back.tail_edge.to_bits());
        prop_assert_eq!(&t.inner, &back.inner);
        prop_assert_eq!(t.outer.len(), back.outer.len());
        for ((a1, w1), (a2, w2)) in t.outer.iter().zip(&back.outer) {
            prop_assert_eq!(a1, a2);
            prop_assert_eq!(w1.to_bits(), w2.to_bits());
        }
    }

    #[test]
    fn discrete_operator_nonpositive_at_strict_max(
        seed in 0u64..1000,
        p in 2.0f64..5.0,
        s in 0.2f64..0.8,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = table_for(0.05, 0.2, p, s, 2.0, WeightKind::W1);
        let mut arr = LatticeArray::zeros(1, 60, 0.05);
        for v in arr.values.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let center = arr.index(&[0, 0, 0]).unwrap();
        arr.values[center] = 2.0; // strict maximum, exterior constant 0 below it
        let sample = FieldSample::from_array(&arr, Extension::ConstantFarField(0.0));
        let v = apply_discrete(&sample, &[0.0], &t, &spec()).unwrap();
        prop_assert!(v <= 0.0, "operator at a strict max must be nonpositive, got {}", v);
    }
}

#[test]
fn quad_polynomials_near_machine_precision() {
    for k in 0..=10u32 {
        let f = move |t: f64| t.powi(k as i32);
        let est = quad::integrate_interval(&f, -1.0, 2.0, &spec()).unwrap();
        let exact = (2.0f64.powi(k as i32 + 1) - (-1.0f64).powi(k as i32 + 1)) / (k as f64 + 1.0);
        assert!(
            (est.value - exact).abs() <= 1e-12 * exact.abs().max(1.0),
            "degree {k}: {} vs {exact}",
            est.value
        );
    }
}

#[test]
fn coverage_error_carries_offending_index() {
    let t = table_for(0.05, 0.2, 3.0, 0.5, 2.0, WeightKind::W1);
    let arr = LatticeArray::zeros(1, 10, 0.05); // box radius 0.5 < rho_max
    let sample = FieldSample::from_array(&arr, Extension::CallerField);
    match apply_discrete(&sample, &[0.0], &t, &spec()) {
        Err(Error::Coverage { alpha }) => assert!(alpha[0].abs() > 10),
        other => panic!("expected coverage failure, got {other:?}"),
    }
}

/// U(x,t) = U(x,t_j) + (t-t_j)(L_h U(x,t_j) + f(x)) on [t_j, t_{j+1}]:
/// the interpolant reproduces the generator applied to the left snapshot.
#[test]
fn interpolation_reproduces_generator() {
    let problem = EvolutionProblem::new(
        field::gauss_bump(),
        field::constant(0.0).with_holder(1.0, 0.0).with_sup_bound(0.0),
        OperatorParams::new(1, 3.0, 0.5).unwrap(),
        0.002,
    )
    .unwrap();
    let config = SchemeConfig {
        grid: GridSpec {
            h: 0.05,
            d: 1,
            rho_max: 2.0,
            extension: Extension::ConstantFarField(0.0),
        },
        r: 0.2,
        kind: WeightKind::W1,
        tau: TauMode::Auto,
        cfl: CflConstantMode::default(),
        box_radius: 2.0,
        store_every: Some(1),
        allow_unstable: false,
    };
    let qspec = spec();
    let state = evolve::run(&problem, &config, &qspec).unwrap();
    let params = OperatorParams::new(1, 3.0, 0.5).unwrap();
    let grid = config.grid;
    let table = build_weights(&grid, config.r, &params, WeightKind::W1, &qspec).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..25 {
        let j = rng.gen_range(0..state.times.len() - 1);
        let theta: f64 = rng.gen_range(0.0..1.0);
        let k = rng.gen_range(-30i64..=30);
        let x = [k as f64 * state.h];
        let t = state.times[j] + theta * (state.times[j + 1] - state.times[j]);

        let sample = FieldSample::from_array(&state.snapshots[j], Extension::ConstantFarField(0.0));
        let lh = apply_discrete(&sample, &x, &table, &qspec).unwrap();
        let predicted = state.value_at(j, &x).unwrap() + (t - state.times[j]) * lh;
        let interpolated = state.interpolate(&x, t).unwrap();
        assert!(
            (predicted - interpolated).abs() < 1e-13,
            "j = {j}, x = {}, predicted {predicted}, interpolated {interpolated}",
            x[0]
        );
    }
}
