//! Variable exponents `p(.)` on a finite space.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::space::Space;
use crate::{Error, Result};

/// Tolerance on the pointwise constancy of `1/p - 1/q`.
pub const ETA_TOL: f64 = 1e-12;

/// Membership class of an exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExponentClass {
    /// `1 < p_- <= p_+ < inf`
    P,
    /// `1 <= p_- <= p_+ < inf`
    P1,
    /// `0 < p_-`, anything else
    P0,
}

/// A per-point exponent. Values lie in `(0, inf]`; infinite values only
/// arise as conjugates of `p = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exponent {
    values: Vec<f64>,
    p_inf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LhReport {
    pub c0: f64,
    pub c_inf: f64,
    pub base_point: usize,
}

fn recip(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

fn conj(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

impl Exponent {
    /// A primal exponent: finite and positive everywhere. `p_inf` defaults
    /// to the value at point 0.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("exponent"));
        }
        for (point, &value) in values.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::ExponentDomain {
                    point,
                    value,
                    domain: "(0, inf)",
                });
            }
        }
        let p_inf = values[0];
        Ok(Self { values, p_inf })
    }

    pub fn constant(value: f64, n: usize) -> Result<Self> {
        Self::new(vec![value; n])
    }

    /// `p(x) = p_inf + a / log(e + 1/max(d(x0, x), d_min))` with `d_min` the
    /// smallest positive distance of the space.
    pub fn log_holder(
        space: &Space,
        p_inf: f64,
        amplitude: f64,
        base_point: usize,
    ) -> Result<Self> {
        if base_point >= space.len() {
            return Err(Error::UnknownPoint(base_point));
        }
        let d_min = if space.len() > 1 {
            space.min_dist()
        } else {
            1.0
        };
        let values = (0..space.len())
            .map(|x| {
                let d = space.dist(base_point, x).max(d_min);
                p_inf + amplitude / (E + 1.0 / d).ln()
            })
            .collect();
        Ok(Self::new(values)?.with_p_inf(p_inf))
    }

    /// Replaces the declared limit value `p_inf`.
    pub fn with_p_inf(mut self, p_inf: f64) -> Self {
        self.p_inf = p_inf;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn at(&self, x: usize) -> f64 {
        self.values[x]
    }

    pub fn p_inf(&self) -> f64 {
        self.p_inf
    }

    /// Points where the exponent is infinite.
    pub fn inf_set(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&x| self.values[x].is_infinite())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn p_minus(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Maximum value; infinite whenever the infinity set is nonempty.
    pub fn p_plus(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn class(&self) -> ExponentClass {
        let (lo, hi) = (self.p_minus(), self.p_plus());
        if lo > 1.0 && hi < f64::INFINITY {
            ExponentClass::P
        } else if lo >= 1.0 && hi < f64::INFINITY {
            ExponentClass::P1
        } else {
            ExponentClass::P0
        }
    }

    /// Pointwise `p' = p/(p-1)` with `1' = inf` and `inf' = 1`.
    pub fn conjugate(&self) -> Result<Self> {
        for (point, &value) in self.values.iter().enumerate() {
            if !(value >= 1.0) {
                return Err(Error::ExponentDomain {
                    point,
                    value,
                    domain: "[1, inf]",
                });
            }
        }
        Ok(Self {
            values: self.values.iter().map(|&p| conj(p)).collect(),
            p_inf: if self.p_inf >= 1.0 {
                conj(self.p_inf)
            } else {
                self.p_inf
            },
        })
    }

    /// `(min, max)` over a nonempty subset; infinity participates as max.
    pub fn range_on(&self, subset: &[usize]) -> Result<(f64, f64)> {
        if subset.is_empty() {
            return Err(Error::Empty("subset"));
        }
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for &x in subset {
            let v = *self.values.get(x).ok_or(Error::UnknownPoint(x))?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok((lo, hi))
    }

    /// Log-Hölder constants: `c0` over pairs with `0 < d < 1/2`, `c_inf`
    /// relative to the declared `p_inf` and `base_point`.
    pub fn lh_constants(&self, space: &Space, base_point: usize) -> Result<LhReport> {
        if self.len() != space.len() {
            return Err(Error::LengthMismatch {
                expected: space.len(),
                got: self.len(),
            });
        }
        if base_point >= space.len() {
            return Err(Error::UnknownPoint(base_point));
        }
        if let Some(point) = self.values.iter().position(|v| v.is_infinite()) {
            return Err(Error::ExponentDomain {
                point,
                value: f64::INFINITY,
                domain: "(0, inf)",
            });
        }
        let n = space.len();
        let mut c0: f64 = 0.0;
        for x in 0..n {
            for y in (x + 1)..n {
                let d = space.dist(x, y);
                if d < 0.5 {
                    c0 = c0.max((self.values[x] - self.values[y]).abs() * (E + 1.0 / d).ln());
                }
            }
        }
        let c_inf = (0..n)
            .map(|x| (self.values[x] - self.p_inf).abs() * (E + space.dist(base_point, x)).ln())
            .fold(0.0, f64::max);
        Ok(LhReport {
            c0,
            c_inf,
            base_point,
        })
    }

    /// The exponent `q` with `1/p - 1/q = eta`.
    pub fn shifted(&self, eta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::EtaOutOfRange(eta));
        }
        let mut values = Vec::with_capacity(self.len());
        for (point, &p) in self.values.iter().enumerate() {
            let r = recip(p) - eta;
            if !(r > 0.0) {
                return Err(Error::ExponentDomain {
                    point,
                    value: p,
                    domain: "(0, 1/eta)",
                });
            }
            values.push(1.0 / r);
        }
        let r_inf = recip(self.p_inf) - eta;
        let p_inf = if r_inf > 0.0 {
            1.0 / r_inf
        } else {
            f64::INFINITY
        };
        Ok(Self { values, p_inf })
    }
}

/// Validates that `1/p - 1/q` is constant and returns it as `eta in [0,1)`.
pub fn check_eta_relation(p: &Exponent, q: &Exponent) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&a, &b) in p.values().iter().zip(q.values()) {
        let d = recip(a) - recip(b);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let deviation = hi - lo;
    if !(deviation <= ETA_TOL) {
        return Err(Error::EtaNotConstant { deviation });
    }
    let mut eta = 0.5 * (lo + hi);
    if eta < 0.0 && eta > -ETA_TOL {
        eta = 0.0;
    }
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::EtaOutOfRange(eta));
    }
    Ok(eta)
}
