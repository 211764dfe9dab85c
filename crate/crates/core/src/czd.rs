//! Fractional Calderón–Zygmund decompositions on a dyadic grid.
//!
//! Averages are `sigma(Q)^{eta-1} sum_Q |f| sigma mu` with `sigma` a density
//! against `mu`; selected cubes are the maximal cubes whose average exceeds
//! the height.

use serde::{Deserialize, Serialize};

use crate::grid::{DyadicGrid, PropertyCheck};
use crate::maximal::{
    check_eta, check_grid, cube_averages, sigma_atoms, superlevel_set, MaximalResult, Witness,
};
use crate::numeric::exact_sum;
use crate::space::Space;
use crate::{Error, Result};

/// Relative slack on certified inequalities (rounding of the recomputed
/// averages).
pub const CERT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CzStatus {
    Ok,
    /// The height does not exceed the root average; the decomposition is
    /// the root alone and the upper stopping bound is not certified.
    RootSelected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzCube {
    pub cube: usize,
    pub generation: i32,
    pub members: Vec<usize>,
    pub average: f64,
    pub sigma_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzDecomposition {
    pub lambda: f64,
    pub eta: f64,
    /// Realized stopping constant for the `sigma` in use.
    pub c_cz: f64,
    pub status: CzStatus,
    pub cubes: Vec<CzCube>,
    /// `sigma * mu` per point.
    pub atoms: Vec<f64>,
    /// `|f|` per point.
    pub f_abs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzLevel {
    pub k: i32,
    pub lambda: f64,
    pub cubes: Vec<CzCube>,
    /// `E = Q \ X_{k+1}`, one per selected cube.
    pub cores: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzStack {
    pub a: f64,
    pub eta: f64,
    pub c_cz: f64,
    /// `sigma(X)^{eta-1} sum_X |f| sigma mu`.
    pub lambda0: f64,
    pub levels: Vec<CzLevel>,
    pub atoms: Vec<f64>,
    pub f_abs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzReport {
    pub checks: Vec<PropertyCheck>,
}

impl CzReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CzConstants {
    /// `max (sigma(P)/sigma(Q))^{1-eta}` over parent/child pairs.
    pub realized: f64,
    /// The same jump bounded through the grid's ball sandwich.
    pub generic: f64,
}

fn realized_constant(grid: &DyadicGrid, atoms: &[f64], eta: f64) -> f64 {
    let masses: Vec<f64> = grid
        .cubes
        .iter()
        .map(|q| exact_sum(q.members.iter().map(|&x| atoms[x])))
        .collect();
    let mut c: f64 = 1.0;
    for q in &grid.cubes {
        if let Some(p) = q.parent {
            c = c.max((masses[p] / masses[q.id]).powf(1.0 - eta));
        }
    }
    c
}

/// Stopping constant for `sigma = 1`.
pub fn cz_constant(grid: &DyadicGrid, space: &Space, eta: f64) -> Result<CzConstants> {
    cz_constant_sigma(grid, space, eta, &vec![1.0; space.len()])
}

pub fn cz_constant_sigma(
    grid: &DyadicGrid,
    space: &Space,
    eta: f64,
    sigma: &[f64],
) -> Result<CzConstants> {
    check_eta(eta)?;
    check_grid(grid, space)?;
    let atoms = sigma_atoms(space, sigma)?;
    Ok(CzConstants {
        realized: realized_constant(grid, &atoms, eta),
        generic: grid.sandwich_jump_bound(space, &atoms, eta),
    })
}

fn select(grid: &DyadicGrid, avgs: &[f64], atoms: &[f64], lambda: f64) -> (CzStatus, Vec<CzCube>) {
    let mk = |id: usize| {
        let q = &grid.cubes[id];
        CzCube {
            cube: id,
            generation: q.generation,
            members: q.members.clone(),
            average: avgs[id],
            sigma_mass: exact_sum(q.members.iter().map(|&x| atoms[x])),
        }
    };
    let root = grid.root().id;
    if avgs[root] > lambda {
        return (CzStatus::RootSelected, vec![mk(root)]);
    }
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if avgs[id] > lambda {
            out.push(mk(id));
        } else {
            stack.extend(grid.cubes[id].children.iter().rev());
        }
    }
    out.sort_by_key(|c| c.members[0]);
    (CzStatus::Ok, out)
}

fn prepare(
    grid: &DyadicGrid,
    space: &Space,
    eta: f64,
    sigma: &[f64],
    f: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_eta(eta)?;
    check_grid(grid, space)?;
    if f.len() != space.len() {
        return Err(Error::LengthMismatch {
            expected: space.len(),
            got: f.len(),
        });
    }
    if let Some(x) = f.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "f[{x}] = {} is not finite",
            f[x]
        )));
    }
    let atoms = sigma_atoms(space, sigma)?;
    Ok((atoms, f.iter().map(|v| v.abs()).collect()))
}

/// Maximal dyadic cubes whose `sigma`-average of `|f|` exceeds `lambda`.
pub fn cz_decompose(
    grid: &DyadicGrid,
    space: &Space,
    eta: f64,
    sigma: &[f64],
    f: &[f64],
    lambda: f64,
) -> Result<CzDecomposition> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "height {lambda} must be positive"
        )));
    }
    let (atoms, f_abs) = prepare(grid, space, eta, sigma, f)?;
    let avgs = cube_averages(grid, &atoms, eta, &f_abs);
    let (status, cubes) = select(grid, &avgs, &atoms, lambda);
    Ok(CzDecomposition {
        lambda,
        eta,
        c_cz: realized_constant(grid, &atoms, eta),
        status,
        cubes,
        atoms,
        f_abs,
    })
}

/// Decompositions at heights `a^k`. The range starts no lower than
/// `k0 = ceil(log_a lambda0)` (so the root is never selected) and by default
/// ends at the last height below the largest cube average. `a` defaults to
/// `2 C_CZ` and must exceed `C_CZ`.
pub fn cz_stack(
    grid: &DyadicGrid,
    space: &Space,
    eta: f64,
    sigma: &[f64],
    f: &[f64],
    a: Option<f64>,
    k_range: Option<(i32, i32)>,
) -> Result<CzStack> {
    let (atoms, f_abs) = prepare(grid, space, eta, sigma, f)?;
    let c_cz = realized_constant(grid, &atoms, eta);
    let a = a.unwrap_or(2.0 * c_cz);
    if !(a > c_cz) || !a.is_finite() {
        return Err(Error::StackBase { a, c_cz });
    }
    let avgs = cube_averages(grid, &atoms, eta, &f_abs);
    let lambda0 = avgs[grid.root().id];
    let max_avg = avgs.iter().copied().fold(0.0, f64::max);
    let mut stack = CzStack {
        a,
        eta,
        c_cz,
        lambda0,
        levels: Vec::new(),
        atoms,
        f_abs,
    };
    if max_avg == 0.0 {
        return Ok(stack);
    }
    let log_a = |v: f64| v.ln() / a.ln();
    let mut k0 = log_a(lambda0).ceil() as i32;
    while a.powi(k0) < lambda0 {
        k0 += 1;
    }
    while a.powi(k0 - 1) >= lambda0 {
        k0 -= 1;
    }
    let mut k_top = log_a(max_avg).ceil() as i32;
    while a.powi(k_top) >= max_avg {
        k_top -= 1;
    }
    while a.powi(k_top + 1) < max_avg {
        k_top += 1;
    }
    let (lo, hi) = match k_range {
        Some((lo, hi)) => (lo.max(k0), hi),
        None => (k0, k_top),
    };
    let mut next = if lo <= hi {
        Some(select(grid, &avgs, &stack.atoms, a.powi(lo)).1)
    } else {
        None
    };
    for k in lo..=hi {
        let cubes = next.take().expect("level computed");
        let above = select(grid, &avgs, &stack.atoms, a.powi(k + 1)).1;
        let mut in_above = vec![false; space.len()];
        for c in &above {
            for &x in &c.members {
                in_above[x] = true;
            }
        }
        let cores = cubes
            .iter()
            .map(|c| {
                c.members
                    .iter()
                    .copied()
                    .filter(|&x| !in_above[x])
                    .collect()
            })
            .collect();
        stack.levels.push(CzLevel {
            k,
            lambda: a.powi(k),
            cubes,
            cores,
        });
        next = Some(above);
    }
    Ok(stack)
}

fn check(name: &str, witness: Option<String>) -> PropertyCheck {
    PropertyCheck {
        property: name.into(),
        pass: witness.is_none(),
        witness,
    }
}

fn recompute(members: &[usize], atoms: &[f64], f_abs: &[f64], eta: f64) -> (f64, f64) {
    let m = exact_sum(members.iter().map(|&x| atoms[x]));
    let s = exact_sum(members.iter().map(|&x| f_abs[x] * atoms[x]));
    (crate::maximal::fractional_average(s, m, eta), m)
}

fn verify_level(
    grid: &DyadicGrid,
    cubes: &[CzCube],
    lambda: f64,
    eta: f64,
    c_cz: f64,
    root_selected: bool,
    atoms: &[f64],
    f_abs: &[f64],
    tag: &str,
) -> Vec<PropertyCheck> {
    let n = atoms.len();
    let mut owner = vec![usize::MAX; n];
    let mut w_disjoint = None;
    let mut w_lower = None;
    let mut w_upper = None;
    let mut w_max = None;
    for (j, c) in cubes.iter().enumerate() {
        for &x in &c.members {
            if x >= n {
                w_disjoint.get_or_insert(format!("{tag}cube {j}: unknown point {x}"));
                continue;
            }
            if owner[x] != usize::MAX {
                w_disjoint
                    .get_or_insert(format!("{tag}cubes {} and {j} share point {x}", owner[x]));
            }
            owner[x] = j;
        }
        let members: Vec<usize> = c.members.iter().copied().filter(|&x| x < n).collect();
        if members.is_empty() {
            w_lower.get_or_insert(format!("{tag}cube {j} is empty"));
            continue;
        }
        let (avg, _) = recompute(&members, atoms, f_abs, eta);
        if !(avg > lambda) {
            w_lower.get_or_insert(format!("{tag}cube {j}: average {avg} <= height {lambda}"));
        }
        if !root_selected && avg > c_cz * lambda * (1.0 + CERT_SLACK) {
            w_upper.get_or_insert(format!("{tag}cube {j}: average {avg} > {c_cz} * {lambda}"));
        }
        // maximality: the grid cube with these members has a parent at or below the height
        let mut id = grid.smallest_cover(&members);
        // a cube may repeat unchanged across generations; its parent is
        // the first strictly larger ancestor
        while let Some(p) = grid.cubes[id]
            .parent
            .filter(|&p| grid.cubes[p].members == members)
        {
            id = p;
        }
        if grid.cubes[id].members != members {
            w_max.get_or_insert(format!("{tag}cube {j} is not a grid cube"));
        } else if let Some(p) = grid.cubes[id].parent {
            let (pavg, _) = recompute(&grid.cubes[p].members, atoms, f_abs, eta);
            if pavg > lambda {
                w_max.get_or_insert(format!("{tag}cube {j}: parent average {pavg} > {lambda}"));
            }
        }
    }
    // cover identity against an independent recomputation of M^D
    let all: Vec<f64> = grid
        .cubes
        .iter()
        .map(|q| recompute(&q.members, atoms, f_abs, eta).0)
        .collect();
    let values = (0..n)
        .map(|x| {
            grid.chain(x)
                .map(|id| all[id])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let level = superlevel_set(
        &MaximalResult {
            values,
            witness: vec![Witness::Cube { id: 0 }; n],
        },
        lambda,
    );
    let covered: Vec<usize> = (0..n).filter(|&x| owner[x] != usize::MAX).collect();
    let w_cover = (level != covered).then(|| {
        let x = (0..n)
            .find(|x| level.contains(x) != covered.contains(x))
            .unwrap_or(0);
        format!(
            "{tag}point {x}: in superlevel set = {}, covered = {}",
            level.contains(&x),
            covered.contains(&x)
        )
    });
    vec![
        check("disjoint cubes", w_disjoint),
        check("cover identity", w_cover),
        check("stopping lower bound", w_lower),
        check("stopping upper bound", w_upper),
        check("maximality", w_max),
    ]
}

/// Re-checks a single-height decomposition from its raw data.
pub fn cz_verify(decomp: &CzDecomposition, grid: &DyadicGrid) -> CzReport {
    let checks = verify_level(
        grid,
        &decomp.cubes,
        decomp.lambda,
        decomp.eta,
        decomp.c_cz,
        decomp.status == CzStatus::RootSelected,
        &decomp.atoms,
        &decomp.f_abs,
        "",
    );
    CzReport { checks }
}

/// Re-checks every level of a stack plus core disjointness and the core
/// mass bound `(1 - (C_CZ/a)^{1/(1-eta)}) sigma(Q) <= sigma(E) <= sigma(Q)`.
pub fn cz_verify_stack(stack: &CzStack, grid: &DyadicGrid) -> CzReport {
    let n = stack.atoms.len();
    let mut merged: Vec<PropertyCheck> = Vec::new();
    for level in &stack.levels {
        let tag = format!("k={}: ", level.k);
        let checks = verify_level(
            grid,
            &level.cubes,
            level.lambda,
            stack.eta,
            stack.c_cz,
            false,
            &stack.atoms,
            &stack.f_abs,
            &tag,
        );
        if merged.is_empty() {
            merged = checks;
        } else {
            for (m, c) in merged.iter_mut().zip(checks) {
                if m.pass && !c.pass {
                    *m = c;
                }
            }
        }
    }
    if merged.is_empty() {
        for name in [
            "disjoint cubes",
            "cover identity",
            "stopping lower bound",
            "stopping upper bound",
            "maximality",
        ] {
            merged.push(check(name, None));
        }
    }
    let factor = 1.0 - (stack.c_cz / stack.a).powf(1.0 / (1.0 - stack.eta));
    let mut owner: Vec<Option<(i32, usize)>> = vec![None; n];
    let mut w_disjoint = None;
    let mut w_mass = None;
    for level in &stack.levels {
        if level.cores.len() != level.cubes.len() {
            w_mass.get_or_insert(format!(
                "k={}: {} cores for {} cubes",
                level.k,
                level.cores.len(),
                level.cubes.len()
            ));
        }
        for (j, (core, cube)) in level.cores.iter().zip(&level.cubes).enumerate() {
            for &x in core {
                if x >= n {
                    continue;
                }
                if let Some((k2, j2)) = owner[x] {
                    w_disjoint.get_or_insert(format!(
                        "cores (k={k2}, {j2}) and (k={}, {j}) share point {x}",
                        level.k
                    ));
                }
                owner[x] = Some((level.k, j));
            }
            let se = exact_sum(core.iter().filter(|&&x| x < n).map(|&x| stack.atoms[x]));
            let sq = exact_sum(
                cube.members
                    .iter()
                    .filter(|&&x| x < n)
                    .map(|&x| stack.atoms[x]),
            );
            if se < factor * sq * (1.0 - CERT_SLACK) || se > sq {
                w_mass.get_or_insert(format!(
                    "k={}, cube {j}: sigma(E) = {se}, sigma(Q) = {sq}, factor {factor}",
                    level.k
                ));
            }
        }
    }
    merged.push(check("core disjointness", w_disjoint));
    merged.push(check("core mass", w_mass));
    CzReport { checks: merged }
}
