//! Fractional maximal operators over balls and dyadic cubes.

use serde::{Deserialize, Serialize};

use crate::exponent::Exponent;
use crate::grid::DyadicGrid;
use crate::norm::{weak_norm, weighted_norm};
use crate::numeric::ExactSum;
use crate::space::{BallRef, Space};
use crate::weights::Weight;
use crate::{exec, Error, Result};

/// Where a maximal value is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Witness {
    /// The first `len` points of `center`'s distance order (radius `radius`).
    Ball {
        center: usize,
        len: usize,
        radius: f64,
    },
    Cube {
        id: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalResult {
    pub values: Vec<f64>,
    pub witness: Vec<Witness>,
}

/// `S * m^{eta-1}`: the fractional average of integral `S` over measure `m`.
/// Every maximal value in this crate is produced by this expression.
#[inline]
pub fn fractional_average(integral: f64, measure: f64, eta: f64) -> f64 {
    if integral == 0.0 {
        0.0
    } else {
        integral * measure.powf(eta - 1.0)
    }
}

pub(crate) fn check_eta(eta: f64) -> Result<()> {
    if (0.0..1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "eta = {eta} must lie in [0, 1)"
        )))
    }
}

fn check_fn(n: usize, f: &[f64], name: &str) -> Result<()> {
    if f.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: f.len(),
        });
    }
    if let Some(x) = f.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{name}[{x}] = {} is not finite",
            f[x]
        )));
    }
    Ok(())
}

/// `M_eta f(x) = max_{B ∋ x} mu(B)^{eta-1} sum_B |f| mu`.
///
/// Per center, prefix sums along the distance order give every ball's
/// average; a suffix maximum over the realizable cuts then answers "best ball
/// around this center containing x" by a search on x's rank.
pub fn fractional_maximal(space: &Space, eta: f64, f: &[f64]) -> Result<MaximalResult> {
    check_eta(eta)?;
    let n = space.len();
    check_fn(n, f, "f")?;
    let mass = space.mass();

    // per center: cut lengths and suffix-max (value, cut index)
    let tables: Vec<Vec<(f64, usize)>> = exec::map_range(n, |c| {
        let ord = space.order(c);
        let cuts = space.cuts(c);
        let (mut s, mut m) = (ExactSum::new(), ExactSum::new());
        let mut avgs = Vec::with_capacity(cuts.len());
        let mut pos = 0;
        for &cut in cuts {
            while pos < cut as usize {
                let p = ord[pos] as usize;
                s.add(f[p].abs() * mass[p]);
                m.add(mass[p]);
                pos += 1;
            }
            avgs.push(fractional_average(s.value(), m.value(), eta));
        }
        // ties go to the smaller ball
        let mut suffix = vec![(0.0, 0); avgs.len()];
        let mut best = (f64::NEG_INFINITY, avgs.len());
        for i in (0..avgs.len()).rev() {
            if avgs[i] >= best.0 {
                best = (avgs[i], i);
            }
            suffix[i] = best;
        }
        suffix
    });

    let per_point = exec::map_range(n, |x| {
        let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
        for c in 0..n {
            let r = space.rank(c, x) as u32;
            let cuts = space.cuts(c);
            let i = cuts.partition_point(|&len| len <= r);
            let (v, j) = tables[c][i];
            if v > best.0 {
                best = (v, c, cuts[j] as usize);
            }
        }
        let (v, c, len) = best;
        (
            v,
            Witness::Ball {
                center: c,
                len,
                radius: space.cut_radius(c, len),
            },
        )
    });
    let (values, witness) = per_point.into_iter().unzip();
    Ok(MaximalResult { values, witness })
}

/// Fractional average of `f` over a ball, recomputed from scratch.
pub fn ball_average(space: &Space, ball: &BallRef, eta: f64, f: &[f64]) -> f64 {
    let mass = space.mass();
    let mut s = ExactSum::new();
    let mut m = ExactSum::new();
    for p in space.members(ball) {
        s.add(f[p].abs() * mass[p]);
        m.add(mass[p]);
    }
    fractional_average(s.value(), m.value(), eta)
}

/// `sigma`-weighted fractional average over a cube, with `atoms = sigma * mass`.
fn cube_average(members: &[usize], atoms: &[f64], eta: f64, f: &[f64]) -> f64 {
    let mut s = ExactSum::new();
    let mut m = ExactSum::new();
    for &p in members {
        s.add(f[p].abs() * atoms[p]);
        m.add(atoms[p]);
    }
    fractional_average(s.value(), m.value(), eta)
}

/// All cube averages of `f` with respect to the atoms, indexed by cube id.
pub fn cube_averages(grid: &DyadicGrid, atoms: &[f64], eta: f64, f: &[f64]) -> Vec<f64> {
    exec::map_slice(&grid.cubes, |q| cube_average(&q.members, atoms, eta, f))
}

fn dyadic_from_atoms(grid: &DyadicGrid, atoms: &[f64], eta: f64, f: &[f64]) -> MaximalResult {
    let avgs = cube_averages(grid, atoms, eta, f);
    let n = grid.num_points();
    let mut values = Vec::with_capacity(n);
    let mut witness = Vec::with_capacity(n);
    for x in 0..n {
        // coarsest first; ties keep the larger cube
        let mut best = (f64::NEG_INFINITY, 0);
        for id in grid.chain(x) {
            if avgs[id] > best.0 {
                best = (avgs[id], id);
            }
        }
        values.push(best.0);
        witness.push(Witness::Cube { id: best.1 });
    }
    MaximalResult { values, witness }
}

/// `M^D_eta f(x) = max_{Q ∋ x} mu(Q)^{eta-1} sum_Q |f| mu`.
pub fn dyadic_fractional_maximal(
    grid: &DyadicGrid,
    space: &Space,
    eta: f64,
    f: &[f64],
) -> Result<MaximalResult> {
    check_eta(eta)?;
    check_fn(space.len(), f, "f")?;
    check_grid(grid, space)?;
    Ok(dyadic_from_atoms(grid, space.mass(), eta, f))
}

/// `M^D_{eta,sigma} f(x) = max_{Q ∋ x} sigma(Q)^{eta-1} sum_Q |f| sigma mu`,
/// with `sigma` a density against `mu`.
pub fn weighted_dyadic_maximal(
    grid: &DyadicGrid,
    space: &Space,
    eta: f64,
    sigma: &[f64],
    f: &[f64],
) -> Result<MaximalResult> {
    check_eta(eta)?;
    check_fn(space.len(), f, "f")?;
    check_grid(grid, space)?;
    let atoms = sigma_atoms(space, sigma)?;
    Ok(dyadic_from_atoms(grid, &atoms, eta, f))
}

/// `sigma(x) mu(x)`, rejecting nonpositive densities.
pub fn sigma_atoms(space: &Space, sigma: &[f64]) -> Result<Vec<f64>> {
    if sigma.len() != space.len() {
        return Err(Error::LengthMismatch {
            expected: space.len(),
            got: sigma.len(),
        });
    }
    sigma
        .iter()
        .zip(space.mass())
        .enumerate()
        .map(|(point, (&s, &m))| {
            if s > 0.0 && s.is_finite() {
                Ok(s * m)
            } else {
                Err(Error::NonPositiveWeight { point, value: s })
            }
        })
        .collect()
}

pub(crate) fn check_grid(grid: &DyadicGrid, space: &Space) -> Result<()> {
    if grid.num_points() == space.len() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            expected: space.len(),
            got: grid.num_points(),
        })
    }
}

/// `{x : values(x) > lambda}`.
pub fn superlevel_set(result: &MaximalResult, lambda: f64) -> Vec<usize> {
    (0..result.values.len())
        .filter(|&x| result.values[x] > lambda)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorEstimate {
    pub strong_ratio: f64,
    pub weak_ratio: f64,
    /// Index into the test family attaining each ratio.
    pub strong_witness: usize,
    pub weak_witness: usize,
}

/// Per-function `(strong, weak)` ratios `||w M f||_q / ||w f||_p` and
/// `||M f||_{WL^q(w)} / ||w f||_p`; `None` for functions with `||w f||_p = 0`.
pub fn operator_ratios(
    space: &Space,
    p: &Exponent,
    q: &Exponent,
    w: &Weight,
    eta: f64,
    family: &[Vec<f64>],
    tol: f64,
) -> Result<Vec<Option<(f64, f64)>>> {
    let rows = exec::map_slice(family, |f| -> Result<Option<(f64, f64)>> {
        let den = weighted_norm(space, p, w, f, tol)?;
        if den == 0.0 {
            return Ok(None);
        }
        let mf = fractional_maximal(space, eta, f)?.values;
        let strong = weighted_norm(space, q, w, &mf, tol)?;
        let weak = weak_norm(space, q, w, &mf, tol)?;
        Ok(Some((strong / den, weak / den)))
    });
    rows.into_iter().collect()
}

/// Largest strong and weak ratios over a test family.
pub fn operator_norm_estimate(
    space: &Space,
    p: &Exponent,
    q: &Exponent,
    w: &Weight,
    eta: f64,
    family: &[Vec<f64>],
    tol: f64,
) -> Result<OperatorEstimate> {
    if family.is_empty() {
        return Err(Error::Empty("test family"));
    }
    check_eta(eta)?;
    let rows = operator_ratios(space, p, q, w, eta, family, tol)?;
    let mut est = OperatorEstimate {
        strong_ratio: 0.0,
        weak_ratio: 0.0,
        strong_witness: 0,
        weak_witness: 0,
    };
    for (i, r) in rows.into_iter().enumerate() {
        if let Some((s, wk)) = r {
            if s > est.strong_ratio {
                est.strong_ratio = s;
                est.strong_witness = i;
            }
            if wk > est.weak_ratio {
                est.weak_ratio = wk;
                est.weak_witness = i;
            }
        }
    }
    Ok(est)
}

/// Realized constants of `c_low M f <= sum_i M^{D_i} f <= c_high N M f`
/// over the given functions, at every point where `M f > 0`.
pub fn domination_constants(
    space: &Space,
    grids: &[DyadicGrid],
    eta: f64,
    family: &[Vec<f64>],
) -> Result<(f64, f64)> {
    if grids.is_empty() {
        return Err(Error::Empty("grid family"));
    }
    let n_grids = grids.len() as f64;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for f in family {
        let m = fractional_maximal(space, eta, f)?.values;
        let dy: Vec<Vec<f64>> = grids
            .iter()
            .map(|g| dyadic_fractional_maximal(g, space, eta, f).map(|r| r.values))
            .collect::<Result<_>>()?;
        for x in 0..space.len() {
            if m[x] > 0.0 {
                let sum: f64 = dy.iter().map(|v| v[x]).sum();
                lo = lo.min(sum / m[x]);
                hi = hi.max(sum / (n_grids * m[x]));
            }
        }
    }
    if lo.is_infinite() {
        return Err(Error::Empty("nonzero test function"));
    }
    Ok((lo, hi))
}
