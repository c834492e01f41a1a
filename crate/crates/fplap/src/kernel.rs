//! Scalar building blocks: the nonlinearity J_p, the symmetric difference
//! operator D_y, normalization constants from sphere averages, rate
//! exponents, and the summability scale S_nu.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::quad::{self, QuadSpec};

/// The triple (d, p, s) every operator is parametrized by.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OperatorParams {
    pub d: usize,
    pub p: f64,
    pub s: f64,
}

impl OperatorParams {
    pub fn new(d: usize, p: f64, s: f64) -> Result<Self> {
        if d == 0 || d > 3 {
            return Err(Error::Domain(format!("dimension d={d} out of range (1..=3)")));
        }
        if !(p > 1.0) {
            return Err(Error::Domain(format!("exponent p={p} must be > 1")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain(format!("fractional order s={s} must lie in (0,1)")));
        }
        Ok(OperatorParams { d, p, s })
    }

    #[inline]
    pub fn sp(&self) -> f64 {
        self.s * self.p
    }
}

/// Regularity regime the proved rate exponents refer to.
///
/// Open gamma-ranges are realized as their supremum minus `epsilon`
/// (clamped so gamma stays inside the open interval).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateRegime {
    /// Rates uniform over smooth bounded fields (needs p >= 2).
    Uniform,
    /// Rates at points where the gradient does not vanish.
    NonvanishingGradient { epsilon: f64 },
}

impl RateRegime {
    /// Nonvanishing-gradient regime with the default margin 0.05.
    pub fn nonvanishing() -> Self {
        RateRegime::NonvanishingGradient { epsilon: 0.05 }
    }
}

/// J_p(xi) = |xi|^{p-2} xi, with J_p(0) = 0 by continuous extension
/// (the relevant limit for every p > 1, also when p < 2).
#[inline]
pub fn jp(xi: f64, p: f64) -> f64 {
    debug_assert!(p > 1.0, "jp requires p > 1, got {p}");
    // integer powers cover the common exponents without powf
    if p == 2.0 {
        return xi;
    }
    if p == 3.0 {
        return xi.abs() * xi;
    }
    if p == 4.0 {
        return xi * xi * xi;
    }
    if xi == 0.0 {
        return 0.0;
    }
    xi.abs().powf(p - 1.0) * xi.signum()
}

/// |xi|^{p-2}, the J_p derivative magnitude; same fast paths as [`jp`].
#[inline]
pub fn jp_slope(xi: f64, p: f64) -> f64 {
    if p == 2.0 {
        return 1.0;
    }
    if p == 3.0 {
        return xi.abs();
    }
    if p == 4.0 {
        return xi * xi;
    }
    if xi == 0.0 {
        return 0.0;
    }
    xi.abs().powf(p - 2.0)
}

/// D_y[phi](x) = (J_p(phi(x+y)-phi(x)) + J_p(phi(x-y)-phi(x))) / |y|^p.
pub fn dy_operator(phi: &ScalarField, x: &[f64], y: &[f64], p: f64) -> Result<f64> {
    let ysq: f64 = y.iter().map(|t| t * t).sum();
    if ysq == 0.0 {
        return Err(Error::Domain("dy_operator requires y != 0".into()));
    }
    let plus: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    let minus: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let fx = phi.eval(x);
    let num = jp(phi.eval(&plus) - fx, p) + jp(phi.eval(&minus) - fx, p);
    Ok(num / ysq.sqrt().powf(p))
}

/// Surface average of |y_1|^p over the unit sphere in R^d.
///
/// d=1 and d=3 have closed forms; d=2 reduces to a 1-D integral of
/// |cos theta|^p evaluated adaptively to 1e-12.
pub fn sphere_avg_abs_y1_p(p: f64, d: usize) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Domain(format!("sphere average needs p > 0, got {p}")));
    }
    match d {
        1 => Ok(1.0),
        2 => {
            let spec = QuadSpec {
                abs_tol: 1e-12,
                rel_tol: 1e-12,
                ..QuadSpec::default()
            };
            let est = quad::integrate_interval(
                &|theta: f64| theta.cos().abs().powf(p),
                0.0,
                std::f64::consts::FRAC_PI_2,
                &spec,
            )?;
            Ok(est.value * 2.0 / std::f64::consts::PI)
        }
        3 => Ok(1.0 / (p + 1.0)),
        _ => Err(Error::Domain(format!("dimension {d} unsupported"))),
    }
}

/// kappa_{p,d} = 2 (average of |y_1|^p over the unit sphere)^{-1}.
pub fn kappa_pd(p: f64, d: usize) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("kappa_pd needs p > 1, got {p}")));
    }
    Ok(2.0 / sphere_avg_abs_y1_p(p, d)?)
}

/// a_{s,p,d} = (1/(p(1-s)) * integral of |y_1|^p over the unit sphere)^{-1}.
pub fn a_spd(s: f64, p: f64, d: usize) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("a_spd needs s in (0,1), got {s}")));
    }
    let integral = quad::unit_sphere_measure(d) * sphere_avg_abs_y1_p(p, d)?;
    Ok(p * (1.0 - s) / integral)
}

/// a_{p,d} = (average of |y_1|^p over the unit sphere)^{-1}.
pub fn a_pd(p: f64, d: usize) -> Result<f64> {
    Ok(1.0 / sphere_avg_abs_y1_p(p, d)?)
}

/// Rate exponent gamma for the local and fractional expansions.
///
/// Uniform regime: 2 if p = 2 or p >= 4, p - 2 for p in (2,4).
/// Nonvanishing gradient: 2 if p = 2 or p >= 3, otherwise the supremum of the
/// proved open range minus epsilon.
pub fn gamma_exponent(p: f64, regime: RateRegime) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("gamma_exponent needs p > 1, got {p}")));
    }
    match regime {
        RateRegime::Uniform => {
            if p < 2.0 {
                return Err(Error::Domain(
                    "no uniform rate is available for p < 2; use the nonvanishing-gradient regime".into(),
                ));
            }
            if p == 2.0 || p >= 4.0 {
                Ok(2.0)
            } else {
                Ok(p - 2.0)
            }
        }
        RateRegime::NonvanishingGradient { epsilon } => {
            if !(epsilon > 0.0) {
                return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
            }
            if p == 2.0 || p >= 3.0 {
                Ok(2.0)
            } else if p > 2.0 {
                // proved range (1, p-1): stay strictly inside
                let eps = epsilon.min(0.5 * (p - 2.0));
                Ok(p - 1.0 - eps)
            } else {
                // proved range (0, p-1)
                let eps = epsilon.min(0.5 * (p - 1.0));
                Ok(p - 1.0 - eps)
            }
        }
    }
}

/// gamma with the dimension-one sharpening: in d = 1 the nonvanishing-gradient
/// rate is 2 for every p > 1.
pub fn gamma_exponent_dim(p: f64, regime: RateRegime, d: usize) -> Result<f64> {
    if d == 1 {
        if let RateRegime::NonvanishingGradient { .. } = regime {
            return Ok(2.0);
        }
    }
    gamma_exponent(p, regime)
}

/// Consistency order of the fractional expansion: nu = gamma + p(1-s).
pub fn nu_exponent(params: &OperatorParams, regime: RateRegime) -> Result<f64> {
    Ok(gamma_exponent_dim(params.p, regime, params.d)? + params.p * (1.0 - params.s))
}

/// Summability scale S_nu(r): r^{nu-sp} below sp, |log r| at sp, 1 above.
pub fn s_nu(nu: f64, r: f64, s: f64, p: f64) -> f64 {
    debug_assert!(r > 0.0 && r < 1.0, "s_nu needs r in (0,1), got {r}");
    debug_assert!(nu > 0.0, "s_nu needs nu > 0, got {nu}");
    let sp = s * p;
    if (nu - sp).abs() < 1e-12 {
        r.ln().abs()
    } else if nu < sp {
        r.powf(nu - sp)
    } else {
        1.0
    }
}
