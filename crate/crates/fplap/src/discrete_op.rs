//! Application of a weight table to fields or lattice arrays, plus the
//! pointwise consistency check against the principal-value oracle.

use crate::error::{Error, Result};
use crate::expansion;
use crate::field::ScalarField;
use crate::kernel::{jp, OperatorParams};
use crate::lattice::{build_weights, Extension, GridSpec, WeightKind, WeightTable};
use crate::quad::{self, QuadSpec};

/// Values stored on the box lattice {-n..n}^d with spacing h, row-major.
#[derive(Debug, Clone)]
pub struct LatticeArray {
    pub d: usize,
    pub n: i64,
    pub h: f64,
    pub values: Vec<f64>,
}

impl LatticeArray {
    pub fn zeros(d: usize, n: i64, h: f64) -> Self {
        let side = (2 * n + 1) as usize;
        LatticeArray {
            d,
            n,
            h,
            values: vec![0.0; side.pow(d as u32)],
        }
    }

    pub fn from_field(phi: &ScalarField, d: usize, n: i64, h: f64) -> Self {
        let mut arr = Self::zeros(d, n, h);
        for flat in 0..arr.values.len() {
            let pt = arr.point(flat);
            arr.values[flat] = phi.eval(&pt);
        }
        arr
    }

    pub fn side(&self) -> usize {
        (2 * self.n + 1) as usize
    }

    /// Flat index of a multi-index, or None outside the box.
    pub fn index(&self, alpha: &[i64; 3]) -> Option<usize> {
        let mut flat = 0usize;
        for i in 0..self.d {
            if alpha[i].abs() > self.n {
                return None;
            }
            flat = flat * self.side() + (alpha[i] + self.n) as usize;
        }
        Some(flat)
    }

    /// Multi-index of a flat position.
    pub fn multi_index(&self, mut flat: usize) -> [i64; 3] {
        let mut alpha = [0i64; 3];
        for i in (0..self.d).rev() {
            alpha[i] = (flat % self.side()) as i64 - self.n;
            flat /= self.side();
        }
        alpha
    }

    /// Coordinates of a flat position.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let alpha = self.multi_index(flat);
        (0..self.d).map(|i| alpha[i] as f64 * self.h).collect()
    }
}

/// Where values come from when the discrete operator is applied.
#[derive(Debug)]
pub enum FieldSource<'a> {
    Field(&'a ScalarField),
    Array(&'a LatticeArray),
}

/// A value source together with its region of validity and the rule used
/// beyond it.
#[derive(Debug)]
pub struct FieldSample<'a> {
    pub source: FieldSource<'a>,
    /// Max-norm radius inside which the source is trusted.
    pub box_radius: f64,
    pub exterior: Extension,
}

impl<'a> FieldSample<'a> {
    /// A field valid everywhere (box radius infinite).
    pub fn from_field(phi: &'a ScalarField, exterior: Extension) -> Self {
        FieldSample {
            source: FieldSource::Field(phi),
            box_radius: f64::INFINITY,
            exterior,
        }
    }

    /// A field trusted only inside a finite box.
    pub fn from_field_boxed(phi: &'a ScalarField, box_radius: f64, exterior: Extension) -> Self {
        FieldSample {
            source: FieldSource::Field(phi),
            box_radius,
            exterior,
        }
    }

    /// Lattice values; the box radius is the array's own extent.
    pub fn from_array(arr: &'a LatticeArray, exterior: Extension) -> Self {
        FieldSample {
            source: FieldSource::Array(arr),
            box_radius: arr.n as f64 * arr.h,
            exterior,
        }
    }

    fn resolve(&self, alpha: &[i64; 3], d: usize, h: f64) -> Result<f64> {
        match &self.source {
            FieldSource::Field(phi) => {
                let pt: Vec<f64> = (0..d).map(|i| alpha[i] as f64 * h).collect();
                let inside = pt.iter().all(|t| t.abs() <= self.box_radius);
                if inside {
                    return Ok(phi.eval(&pt));
                }
                match self.exterior.constant_value() {
                    Some(c) => Ok(c),
                    // CallerField: the field itself is the extension
                    None => Ok(phi.eval(&pt)),
                }
            }
            FieldSource::Array(arr) => match arr.index(alpha) {
                Some(i) => Ok(arr.values[i]),
                None => match self.exterior.constant_value() {
                    Some(c) => Ok(c),
                    None => Err(Error::Coverage {
                        alpha: alpha[..d].to_vec(),
                    }),
                },
            },
        }
    }
}

/// Apply the discrete operator at a lattice point x:
/// sum over alpha of J_p(u(x + y_alpha) - u(x)) omega_alpha, plus the tail
/// term (lumped for constant far fields, integrated for CallerField).
pub fn apply_discrete(
    sample: &FieldSample,
    x: &[f64],
    table: &WeightTable,
    spec: &QuadSpec,
) -> Result<f64> {
    let d = table.d;
    if x.len() != d {
        return Err(Error::Domain(format!(
            "point has {} coordinates, operator is {}-dimensional",
            x.len(),
            d
        )));
    }
    let h = table.h;
    let mut ix = [0i64; 3];
    for i in 0..d {
        let t = x[i] / h;
        let k = t.round();
        if (t - k).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "x[{}] = {} is not aligned with the lattice of width h = {}",
                i, x[i], h
            )));
        }
        ix[i] = k as i64;
    }

    let ux = sample.resolve(&ix, d, h)?;
    let p = table.p;
    let shift = |alpha: &[i64; 3]| -> [i64; 3] {
        [ix[0] + alpha[0], ix[1] + alpha[1], ix[2] + alpha[2]]
    };

    let mut acc = 0.0f64;
    for alpha in &table.inner {
        acc += table.inner_weight * jp(sample.resolve(&shift(alpha), d, h)? - ux, p);
    }
    for (alpha, w) in &table.outer {
        acc += w * jp(sample.resolve(&shift(alpha), d, h)? - ux, p);
    }

    let tail = match sample.exterior.constant_value() {
        Some(c) => jp(c - ux, p) * table.tail_mass,
        None => match &sample.source {
            FieldSource::Field(phi) => {
                let sup = phi.require_sup_bound("apply_discrete tail")?;
                let g = |y: &[f64]| {
                    let pt: Vec<f64> = (0..d).map(|i| x[i] + y[i]).collect();
                    jp(phi.eval(&pt) - ux, p)
                };
                let bound = (2.0 * sup).powf(p - 1.0);
                quad::integrate_tail(&g, table.tail_edge, d, table.s, p, bound, spec)?.value
            }
            FieldSource::Array(arr) => {
                let mut edge = [0i64; 3];
                edge[0] = arr.n + 1;
                return Err(Error::Coverage {
                    alpha: edge[..d].to_vec(),
                });
            }
        },
    };
    Ok(acc + tail)
}

/// One pointwise consistency measurement.
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub discrete: f64,
    pub reference: f64,
    pub reference_error: f64,
    pub error: f64,
}

/// Build weights at (h, r), apply the operator to `phi` at x with the
/// caller's own field as exterior, and compare against `reference` (or, if
/// absent, the principal-value oracle evaluated on the spot).
#[allow(clippy::too_many_arguments)]
pub fn consistency_error(
    phi: &ScalarField,
    x: &[f64],
    params: &OperatorParams,
    h: f64,
    r: f64,
    kind: WeightKind,
    rho_max: f64,
    reference: Option<f64>,
    spec: &QuadSpec,
) -> Result<ConsistencyReport> {
    let grid = GridSpec {
        h,
        d: params.d,
        rho_max,
        extension: Extension::CallerField,
    };
    let table = build_weights(&grid, r, params, kind, spec)?;
    let sample = FieldSample::from_field(phi, Extension::CallerField);
    let discrete = apply_discrete(&sample, x, &table, spec)?;
    let (reference, reference_error) = match reference {
        Some(v) => (v, 0.0),
        None => {
            let est = expansion::reference_fraclap(phi, x, params, spec)?;
            (est.value, est.error)
        }
    };
    Ok(ConsistencyReport {
        discrete,
        reference,
        reference_error,
        error: (discrete - reference).abs(),
    })
}
