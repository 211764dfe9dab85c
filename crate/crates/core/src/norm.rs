//! Modular, Luxemburg norm, weighted norms and the weak-type quasi-norm.
//!
//! The norm is located by bisection on `t = log(lambda)`; the map
//! `lambda -> rho(f / lambda)` is non-increasing and continuous whenever the
//! finite part of the exponent is bounded, including when part of the
//! support sits on the infinity set of the exponent.

use crate::exponent::Exponent;
use crate::numeric::{bisect_decreasing, exact_sum};
use crate::space::Space;
use crate::weights::Weight;
use crate::{Error, Result};

/// Default relative tolerance of the norm bisection.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Iteration cap of the norm bisection.
pub const MAX_ITER: usize = 100;

/// Modular terms of one function: `(log|f(x)|, p(x), mass(x))` for the
/// finite part, and the largest `log|f(x)|` over the infinity set.
#[derive(Debug, Clone, Default)]
pub struct Terms {
    finite: Vec<(f64, f64, f64)>,
    sup_log: Option<f64>,
}

impl Terms {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            finite: Vec::with_capacity(n),
            sup_log: None,
        }
    }

    pub fn clear(&mut self) {
        self.finite.clear();
        self.sup_log = None;
    }

    /// Adds an atom with value `|f| = exp(log_abs)`. Zero values are
    /// passed as `-inf` and skipped.
    #[inline]
    pub fn push_log(&mut self, log_abs: f64, p: f64, mass: f64) {
        if log_abs == f64::NEG_INFINITY {
            return;
        }
        if p.is_infinite() {
            self.sup_log = Some(self.sup_log.map_or(log_abs, |s| s.max(log_abs)));
        } else {
            self.finite.push((log_abs, p, mass));
        }
    }

    #[inline]
    pub fn push(&mut self, value: f64, p: f64, mass: f64) {
        self.push_log(value.abs().ln(), p, mass);
    }

    pub fn is_zero(&self) -> bool {
        self.finite.is_empty() && self.sup_log.is_none()
    }

    /// `rho(f / exp(t))`.
    pub fn modular_at(&self, t: f64) -> f64 {
        let mut s = 0.0;
        for &(la, p, m) in &self.finite {
            s += m * (p * (la - t)).exp();
        }
        if let Some(sl) = self.sup_log {
            s += (sl - t).exp();
        }
        s
    }

    /// Luxemburg norm of the collected function.
    pub fn norm(&self, tol: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let (lo, hi) = self.bracket();
        let t = bisect_decreasing(
            |t| self.modular_at(t) - 1.0,
            lo,
            hi,
            std::f64::consts::LN_2,
            tol.ln_1p(),
            MAX_ITER,
        );
        t.exp()
    }

    fn bracket(&self) -> (f64, f64) {
        let (mut p_lo, mut p_hi) = (f64::INFINITY, 0.0f64);
        for &(_, p, _) in &self.finite {
            p_lo = p_lo.min(p);
            p_hi = p_hi.max(p);
        }
        if self.sup_log.is_none() {
            // rho <= 1: rho^{1/p_-} <= |f| <= rho^{1/p_+}; reversed when rho > 1
            let l1 = self.modular_at(0.0).ln();
            if l1 <= 0.0 {
                (l1 / p_lo, l1 / p_hi)
            } else {
                (l1 / p_hi, l1 / p_lo)
            }
        } else {
            let sup = self
                .finite
                .iter()
                .map(|&(la, _, _)| la)
                .chain(self.sup_log)
                .fold(f64::NEG_INFINITY, f64::max);
            let min_mass = self
                .finite
                .iter()
                .map(|&(_, _, m)| m)
                .fold(1.0f64, f64::min);
            let p_lo = if p_lo.is_finite() { p_lo } else { 1.0 };
            let lo = sup + min_mass.ln() / p_lo - std::f64::consts::LN_2;
            let l1: f64 = self.finite.iter().map(|&(la, _, m)| m * la.exp()).sum();
            let hi = (l1 + sup.exp()).ln();
            (lo, hi.max(lo))
        }
    }
}

fn check_len(space: &Space, got: usize) -> Result<()> {
    if got == space.len() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            expected: space.len(),
            got,
        })
    }
}

/// `sum_{x not in X_inf} |f(x)|^{p(x)} mu(x) + max_{X_inf} |f|`.
pub fn modular(space: &Space, p: &Exponent, f: &[f64]) -> Result<f64> {
    check_len(space, p.len())?;
    check_len(space, f.len())?;
    let mass = space.mass();
    let finite = exact_sum(
        (0..space.len())
            .filter(|&x| p.at(x).is_finite() && f[x] != 0.0)
            .map(|x| f[x].abs().powf(p.at(x)) * mass[x]),
    );
    let sup = (0..space.len())
        .filter(|&x| p.at(x).is_infinite())
        .map(|x| f[x].abs())
        .fold(0.0, f64::max);
    Ok(finite + sup)
}

/// `inf { lambda > 0 : rho(f / lambda) <= 1 }` to relative tolerance `tol`.
pub fn luxemburg_norm(space: &Space, p: &Exponent, f: &[f64], tol: f64) -> Result<f64> {
    check_len(space, p.len())?;
    check_len(space, f.len())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tol {tol} must be positive"
        )));
    }
    let mass = space.mass();
    let mut terms = Terms::with_capacity(space.len());
    for x in 0..space.len() {
        terms.push(f[x], p.at(x), mass[x]);
    }
    Ok(terms.norm(tol))
}

/// `||w f||_{p(.)}`.
pub fn weighted_norm(space: &Space, p: &Exponent, w: &Weight, f: &[f64], tol: f64) -> Result<f64> {
    check_len(space, w.len())?;
    check_len(space, f.len())?;
    let wf: Vec<f64> = (0..space.len()).map(|x| w.at(x) * f[x]).collect();
    luxemburg_norm(space, p, &wf, tol)
}

/// Generalized Hölder: `(sum |f g| mu, 4 ||f||_{p(.)} ||g||_{p'(.)})`.
pub fn holder_bound(
    space: &Space,
    p: &Exponent,
    f: &[f64],
    g: &[f64],
    tol: f64,
) -> Result<(f64, f64)> {
    check_len(space, g.len())?;
    check_len(space, f.len())?;
    let pc = p.conjugate()?;
    let lhs = exact_sum((0..space.len()).map(|x| (f[x] * g[x]).abs() * space.mass()[x]));
    let rhs = 4.0 * luxemburg_norm(space, p, f, tol)? * luxemburg_norm(space, &pc, g, tol)?;
    Ok((lhs, rhs))
}

/// `sup_{t>0} t ||w chi_{g > t}||_{q(.)}` for `g >= 0`.
///
/// The supremum is the maximum over the distinct positive values `v` of `g`
/// of `v ||w chi_{g >= v}||_{q(.)}`.
pub fn weak_norm(space: &Space, q: &Exponent, w: &Weight, g: &[f64], tol: f64) -> Result<f64> {
    Ok(weak_norm_witness(space, q, w, g, tol)?.0)
}

/// [`weak_norm`] together with the level `v` attaining it (0 when `g = 0`).
pub fn weak_norm_witness(
    space: &Space,
    q: &Exponent,
    w: &Weight,
    g: &[f64],
    tol: f64,
) -> Result<(f64, f64)> {
    check_len(space, q.len())?;
    check_len(space, w.len())?;
    check_len(space, g.len())?;
    if let Some(x) = g.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "weak norm needs a finite nonnegative function; g[{x}] = {}",
            g[x]
        )));
    }
    let mut idx: Vec<usize> = (0..space.len()).filter(|&x| g[x] > 0.0).collect();
    idx.sort_by(|&a, &b| g[b].total_cmp(&g[a]).then(a.cmp(&b)));
    let mass = space.mass();
    let mut terms = Terms::with_capacity(idx.len());
    let mut best = (0.0, 0.0);
    let mut i = 0;
    while i < idx.len() {
        let v = g[idx[i]];
        while i < idx.len() && g[idx[i]] == v {
            let x = idx[i];
            terms.push_log(w.ln_at(x), q.at(x), mass[x]);
            i += 1;
        }
        let val = v * terms.norm(tol);
        if val > best.0 {
            best = (val, v);
        }
    }
    Ok(best)
}
