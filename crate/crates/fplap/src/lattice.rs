//! Uniform lattice geometry, discretization weights, tail lumping, and the
//! summability diagnostics that feed the CFL constant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::OperatorParams;
use crate::quad::{self, QuadSpec};

/// How a field is continued outside the computational box / lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Extension {
    /// Constant value outside.
    ConstantFarField(f64),
    /// Shorthand for ConstantFarField(0).
    ZeroFarField,
    /// The caller's field stays valid arbitrarily far out (tails are then
    /// integrated, not lumped).
    CallerField,
}

impl Extension {
    /// The constant the exterior contributes, if the rule is a constant one.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Extension::ConstantFarField(c) => Some(*c),
            Extension::ZeroFarField => Some(0.0),
            Extension::CallerField => None,
        }
    }
}

/// Uniform grid h Z^d truncated at Euclidean radius `rho_max`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub h: f64,
    pub d: usize,
    pub rho_max: f64,
    pub extension: Extension,
}

impl GridSpec {
    pub fn validated(self) -> Result<Self> {
        if !(self.h > 0.0 && self.h < 1.0) {
            return Err(Error::Config(format!("mesh width must satisfy 0 < h < 1, got h = {}", self.h)));
        }
        if !(self.rho_max > 1.0) {
            return Err(Error::Config(format!("rho_max must exceed 1, got {}", self.rho_max)));
        }
        if self.d == 0 || self.d > 3 {
            return Err(Error::Config(format!("dimension d = {} out of range (1..=3)", self.d)));
        }
        Ok(self)
    }
}

/// The two weight families: W1 integrates the kernel over the cell around
/// each lattice point, W2 collocates it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    W1,
    W2,
}

impl std::fmt::Display for WeightKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightKind::W1 => "W1",
            WeightKind::W2 => "W2",
        })
    }
}

/// Precomputed lattice weights for one (d, p, s, h, r, rho_max, kind).
///
/// Every lattice point with 0 < |y_alpha| < r carries the same
/// `inner_weight`; points with r <= |y_alpha| <= rho_max carry individual
/// weights; the kernel mass beyond the truncation is lumped into
/// `tail_mass`, evaluated at the exact covered edge in d = 1 so that mass
/// is conserved when rho_max changes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightTable {
    pub version: u32,
    pub d: usize,
    pub p: f64,
    pub s: f64,
    pub h: f64,
    pub r: f64,
    pub rho_max: f64,
    pub kind: WeightKind,
    /// (p+d) h^d / (p (1-s) r^{d+sp}), applied to every inner point.
    pub inner_weight: f64,
    /// Multi-indices with 0 < |y_alpha| < r (both signs stored).
    pub inner: Vec<[i64; 3]>,
    /// Sorted multi-index -> weight pairs with r <= |y_alpha| <= rho_max.
    pub outer: Vec<([i64; 3], f64)>,
    /// Kernel mass beyond the covered region.
    pub tail_mass: f64,
    /// Radius at which the tail lump starts.
    pub tail_edge: f64,
}

pub const WEIGHT_TABLE_VERSION: u32 = 1;

/// Closed-form W1 weight in d = 1: integral of y^{-(1+sp)} over the cell
/// [y-h/2, y+h/2] (positive side).
fn w1_cell_1d(y: f64, h: f64, sp: f64) -> f64 {
    ((y - 0.5 * h).powf(-sp) - (y + 0.5 * h).powf(-sp)) / sp
}

/// Integral of |y|^{-(d+sp)} over the cube of side h centered at y_alpha,
/// by nested adaptive quadrature (the integrand is smooth on cells with
/// |y_alpha| >= r >= 4h).
fn w1_cell_nd(center: &[f64], h: f64, d: usize, dsp: f64, spec: &QuadSpec) -> Result<f64> {
    let half = 0.5 * h;
    match d {
        2 => {
            let outer = |u: f64| {
                let inner = |v: f64| (u * u + v * v).powf(-0.5 * dsp);
                quad::integrate_interval(&inner, center[1] - half, center[1] + half, spec)
                    .map(|e| e.value)
                    .unwrap_or(f64::NAN)
            };
            Ok(quad::integrate_interval(&outer, center[0] - half, center[0] + half, spec)?.value)
        }
        3 => {
            let outer = |u: f64| {
                let mid = |v: f64| {
                    let inner = |w: f64| (u * u + v * v + w * w).powf(-0.5 * dsp);
                    quad::integrate_interval(&inner, center[2] - half, center[2] + half, spec)
                        .map(|e| e.value)
                        .unwrap_or(f64::NAN)
                };
                quad::integrate_interval(&mid, center[1] - half, center[1] + half, spec)
                    .map(|e| e.value)
                    .unwrap_or(f64::NAN)
            };
            Ok(quad::integrate_interval(&outer, center[0] - half, center[0] + half, spec)?.value)
        }
        _ => unreachable!("1d cells use the closed form"),
    }
}

/// Build the weight table for splitting radius `r`.
///
/// Preconditions: h <= r/4 for W1 and h <= r/(4 sqrt(d)) for W2; violations
/// are reported naming the inequality.
pub fn build_weights(
    grid: &GridSpec,
    r: f64,
    params: &OperatorParams,
    kind: WeightKind,
    spec: &QuadSpec,
) -> Result<WeightTable> {
    let grid = grid.validated()?;
    if grid.d != params.d {
        return Err(Error::Config(format!(
            "grid dimension {} disagrees with operator dimension {}",
            grid.d, params.d
        )));
    }
    if !(r > 0.0 && r < grid.rho_max) {
        return Err(Error::Config(format!(
            "splitting radius must satisfy 0 < r < rho_max, got r = {r}, rho_max = {}",
            grid.rho_max
        )));
    }
    let (d, p, s) = (params.d, params.p, params.s);
    let (h, sp) = (grid.h, params.sp());
    match kind {
        WeightKind::W1 => {
            if h > r / 4.0 {
                return Err(Error::Config(format!(
                    "W1 weights require h <= r/4 (got h = {h}, r/4 = {})",
                    r / 4.0
                )));
            }
        }
        WeightKind::W2 => {
            let bound = r / (4.0 * (d as f64).sqrt());
            if h > bound {
                return Err(Error::Config(format!(
                    "W2 weights require h <= r/(4 sqrt(d)) (got h = {h}, bound = {bound})"
                )));
            }
        }
    }

    let inner_weight = (p + d as f64) * h.powi(d as i32) / (p * (1.0 - s) * r.powf(d as f64 + sp));
    let n_out = (grid.rho_max / h).floor() as i64;

    let mut inner: Vec<[i64; 3]> = Vec::new();
    let mut outer: Vec<([i64; 3], f64)> = Vec::new();

    if d == 1 {
        for a in 1..=n_out {
            let y = a as f64 * h;
            if y < r {
                inner.push([a, 0, 0]);
                inner.push([-a, 0, 0]);
            } else {
                let w = match kind {
                    WeightKind::W1 => w1_cell_1d(y, h, sp),
                    WeightKind::W2 => h / y.powf(1.0 + sp),
                };
                outer.push(([a, 0, 0], w));
                outer.push(([-a, 0, 0], w));
            }
        }
    } else {
        // canonical representatives: lexicographically positive multi-indices
        let range: Vec<i64> = (-n_out..=n_out).collect();
        let mut canon: Vec<[i64; 3]> = Vec::new();
        for &a0 in &range {
            for &a1 in &range {
                if d == 2 {
                    let alpha = [a0, a1, 0];
                    if is_canonical(&alpha) {
                        canon.push(alpha);
                    }
                } else {
                    for &a2 in &range {
                        let alpha = [a0, a1, a2];
                        if is_canonical(&alpha) {
                            canon.push(alpha);
                        }
                    }
                }
            }
        }
        let dsp = d as f64 + sp;
        let cell_spec = QuadSpec {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            ..*spec
        };
        let computed: Vec<([i64; 3], f64, bool)> = canon
            .par_iter()
            .map(|alpha| {
                let y: Vec<f64> = (0..d).map(|i| alpha[i] as f64 * h).collect();
                let norm = y.iter().map(|t| t * t).sum::<f64>().sqrt();
                if norm < r {
                    (*alpha, 0.0, true)
                } else if norm <= grid.rho_max {
                    let w = match kind {
                        WeightKind::W1 => w1_cell_nd(&y, h, d, dsp, &cell_spec).unwrap_or(f64::NAN),
                        WeightKind::W2 => h.powi(d as i32) / norm.powf(dsp),
                    };
                    (*alpha, w, false)
                } else {
                    (*alpha, f64::NAN, false)
                }
            })
            .collect();
        for (alpha, w, is_inner) in computed {
            let neg = [-alpha[0], -alpha[1], -alpha[2]];
            if is_inner {
                inner.push(alpha);
                inner.push(neg);
            } else if w.is_finite() {
                outer.push((alpha, w));
                outer.push((neg, w));
            } else if !w.is_nan() {
                unreachable!()
            }
        }
    }

    inner.sort_unstable();
    outer.sort_unstable_by(|a, b| a.0.cmp(&b.0));

    // Versioned tail: in d = 1 the W-cells cover exactly up to (n_out+1/2) h,
    // so lumping from that edge conserves total kernel mass; in d >= 2 the
    // covered region is not a ball and we lump from rho_max (the mismatch is
    // a truncation-level effect, kept below study tolerances by rho_max).
    let tail_edge = if d == 1 {
        (n_out as f64 + 0.5) * h
    } else {
        grid.rho_max
    };
    let tail_mass = quad::unit_sphere_measure(d) * tail_edge.powf(-sp) / sp;

    Ok(WeightTable {
        version: WEIGHT_TABLE_VERSION,
        d,
        p,
        s,
        h,
        r,
        rho_max: grid.rho_max,
        kind,
        inner_weight,
        inner,
        outer,
        tail_mass,
        tail_edge,
    })
}

fn is_canonical(alpha: &[i64; 3]) -> bool {
    for &a in alpha {
        if a > 0 {
            return true;
        }
        if a < 0 {
            return false;
        }
    }
    false // the origin is excluded
}

impl WeightTable {
    /// y_alpha coordinates for a stored multi-index.
    pub fn coords(&self, alpha: &[i64; 3]) -> Vec<f64> {
        (0..self.d).map(|i| alpha[i] as f64 * self.h).collect()
    }

    /// Weight lookup (inner points share `inner_weight`).
    pub fn weight(&self, alpha: &[i64; 3]) -> Option<f64> {
        if self.inner.binary_search(alpha).is_ok() {
            return Some(self.inner_weight);
        }
        self.outer
            .binary_search_by(|probe| probe.0.cmp(alpha))
            .ok()
            .map(|i| self.outer[i].1)
    }

    /// Sum of all weights including the tail lump.
    pub fn total_mass(&self) -> f64 {
        self.inner_weight * self.inner.len() as f64
            + self.outer.iter().map(|(_, w)| w).sum::<f64>()
            + self.tail_mass
    }

    /// Cache file name keyed by the build parameters (shortest round-trip
    /// float formatting keeps the key unique).
    pub fn cache_key(&self) -> String {
        format!(
            "weights-v{}-{}-d{}-p{}-s{}-h{}-r{}-rho{}.json",
            self.version, self.kind, self.d, self.p, self.s, self.h, self.r, self.rho_max
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("weight table serializes")
    }

    pub fn from_json(text: &str) -> Result<WeightTable> {
        let table: WeightTable = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("weight cache unreadable: {e}")))?;
        if table.version != WEIGHT_TABLE_VERSION {
            return Err(Error::Config(format!(
                "weight cache version {} unsupported (expected {})",
                table.version, WEIGHT_TABLE_VERSION
            )));
        }
        Ok(table)
    }
}

/// Summability diagnostics of one table: `total` = sum of all weights
/// (tail included), `far` = weights at |y_alpha| >= 1 plus tail,
/// `moments[nu]` = sum over 0 < |y_alpha| < 1 of |y_alpha|^nu omega_alpha.
#[derive(Debug, Clone, Serialize)]
pub struct SummabilityReport {
    pub total: f64,
    pub far: f64,
    pub moments: Vec<(f64, f64)>,
}

pub fn summability_report(table: &WeightTable, nus: &[f64]) -> SummabilityReport {
    let mut total = table.tail_mass;
    let mut far = table.tail_mass;
    let mut moments = vec![0.0f64; nus.len()];

    let mut absorb = |alpha: &[i64; 3], w: f64| {
        total += w;
        let norm = table
            .coords(alpha)
            .iter()
            .map(|t| t * t)
            .sum::<f64>()
            .sqrt();
        if norm >= 1.0 {
            far += w;
        } else {
            for (m, nu) in moments.iter_mut().zip(nus) {
                *m += norm.powf(*nu) * w;
            }
        }
    };
    for alpha in &table.inner {
        absorb(alpha, table.inner_weight);
    }
    for (alpha, w) in &table.outer {
        absorb(alpha, *w);
    }
    SummabilityReport {
        total,
        far,
        moments: nus.iter().copied().zip(moments).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params1(p: f64, s: f64) -> OperatorParams {
        OperatorParams::new(1, p, s).unwrap()
    }

    fn grid1(h: f64, rho: f64) -> GridSpec {
        GridSpec {
            h,
            d: 1,
            rho_max: rho,
            extension: Extension::ZeroFarField,
        }
    }

    #[test]
    fn weight_examples() {
        // W2 at y = 0.5, h = 0.1, sp = 2: 0.1 / 0.125 = 0.8
        let t = build_weights(&grid1(0.1, 2.0), 0.4, &params1(4.0, 0.5), WeightKind::W2, &QuadSpec::default()).unwrap();
        let w = t.weight(&[5, 0, 0]).unwrap();
        assert!((w - 0.8).abs() < 1e-14);

        // W1 cell integral at the same point: (0.45^-2 - 0.55^-2)/2
        let t = build_weights(&grid1(0.1, 2.0), 0.4, &params1(4.0, 0.5), WeightKind::W1, &QuadSpec::default()).unwrap();
        let w = t.weight(&[5, 0, 0]).unwrap();
        let exact = (0.45f64.powi(-2) - 0.55f64.powi(-2)) / 2.0;
        assert!((w - exact).abs() < 1e-14);
        assert!((w - 0.816243).abs() < 1e-6);

        // inner weight: (4+1)/(4*0.5) * 0.01/0.1^3 = 25
        let t = build_weights(&grid1(0.01, 2.0), 0.1, &params1(4.0, 0.5), WeightKind::W1, &QuadSpec::default()).unwrap();
        assert!((t.inner_weight - 25.0).abs() < 1e-10);
    }

    #[test]
    fn preconditions_named() {
        let err = build_weights(&grid1(0.2, 2.0), 0.4, &params1(3.0, 0.5), WeightKind::W1, &QuadSpec::default());
        match err {
            Err(Error::Config(msg)) => assert!(msg.contains("h <= r/4"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn symmetry_exact() {
        let t = build_weights(&grid1(0.05, 2.0), 0.2, &params1(3.0, 0.5), WeightKind::W1, &QuadSpec::default()).unwrap();
        for (alpha, w) in &t.outer {
            let neg = [-alpha[0], -alpha[1], -alpha[2]];
            assert_eq!(t.weight(&neg), Some(*w));
        }
        assert!(t.outer.iter().all(|(_, w)| *w >= 0.0));
        assert!(t.inner_weight >= 0.0);
    }

    #[test]
    fn mass_conservation_w1_1d() {
        // total kernel mass outside B_r is independent of rho_max for W1
        // cells in d = 1 (cells tile the line, tail lumped at the exact edge)
        let p = params1(3.0, 0.5);
        let a = build_weights(&grid1(0.05, 2.0), 0.2, &p, WeightKind::W1, &QuadSpec::default()).unwrap();
        let b = build_weights(&grid1(0.05, 3.0), 0.2, &p, WeightKind::W1, &QuadSpec::default()).unwrap();
        let outer_tail = |t: &WeightTable| t.outer.iter().map(|(_, w)| w).sum::<f64>() + t.tail_mass;
        assert!(
            (outer_tail(&a) - outer_tail(&b)).abs() < 1e-12,
            "{} vs {}",
            outer_tail(&a),
            outer_tail(&b)
        );
    }

    #[test]
    fn cube_cells_match_collocation_as_h_shrinks() {
        // in d = 2 the W1 cell integral approaches h^2 k(y_alpha)
        let p = OperatorParams::new(2, 3.0, 0.5).unwrap();
        let grid = GridSpec {
            h: 0.05,
            d: 2,
            rho_max: 1.5,
            extension: Extension::ZeroFarField,
        };
        let t1 = build_weights(&grid, 0.4, &p, WeightKind::W1, &QuadSpec::default()).unwrap();
        let t2 = build_weights(&grid, 0.4, &p, WeightKind::W2, &QuadSpec::default()).unwrap();
        let idx = [10, 3, 0];
        let w1 = t1.weight(&idx).unwrap();
        let w2 = t2.weight(&idx).unwrap();
        assert!((w1 - w2).abs() / w2 < 5e-3, "w1 {w1} w2 {w2}");
    }
}
