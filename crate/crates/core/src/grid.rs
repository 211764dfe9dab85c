//! Dyadic grids on a finite quasi-metric space.
//!
//! Generation `k` lives at scale `d0^{-k}`; larger `k` is finer. Centers of
//! generation `k` form a maximal `d0^{-k}`-separated net, nets are nested
//! (every center of generation `k - 1` is again a center of generation `k`),
//! and every center is attached to its nearest center one generation up
//! (ties by point index). A cube is the set of points whose ancestor chain
//! passes through its center, which makes the generations nested
//! partitions by construction.
//!
//! The coarsest generation is the first whose scale exceeds the diameter (a
//! single cube), the finest the first whose scale does not exceed the
//! smallest positive distance (all singletons).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numeric::exact_sum;
use crate::space::{Ball, BallRef, Space};
use crate::{exec, Error, Result};

/// Default scale base.
pub const DEFAULT_D0: f64 = 2.0;
/// Default number of grids in a family.
pub const DEFAULT_FAMILY_SIZE: usize = 6;

/// Order in which net candidates are scanned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetOrder {
    /// Point index order; on a uniform line this reproduces the classical
    /// dyadic intervals.
    Index,
    Seeded(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicCube {
    pub id: usize,
    pub generation: i32,
    pub center: usize,
    pub members: Vec<usize>,
    pub measure: f64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DyadicGrid {
    pub d0: f64,
    pub k_min: i32,
    pub k_max: i32,
    /// Outer containment constant: `Q ⊆ closed B(x_c, c_d d0^{-k})`.
    pub c_d: f64,
    /// Inner constant: `B(x_c, c_in d0^{-k}) ⊆ Q`.
    pub c_in: f64,
    pub eps_child: f64,
    pub cubes: Vec<DyadicCube>,
    /// Cube ids per generation, `generations[k - k_min]`.
    generations: Vec<Vec<usize>>,
    /// `point_cube[k - k_min][x]`: the generation-`k` cube containing `x`.
    point_cube: Vec<Vec<usize>>,
}

/// JSON form of a grid: generations, coarsest first, each a list of cubes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDump {
    pub d0: f64,
    pub k_min: i32,
    pub k_max: i32,
    pub c_d: f64,
    pub c_in: f64,
    pub eps_child: f64,
    pub generations: Vec<GenerationDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationDump {
    pub k: i32,
    pub scale: f64,
    pub cubes: Vec<CubeDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeDump {
    pub id: usize,
    pub center: usize,
    pub members: Vec<usize>,
    pub parent: Option<usize>,
}

/// A check of one grid property with an optional witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub property: String,
    pub pass: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub checks: Vec<PropertyCheck>,
    pub c_d: f64,
    pub c_in: f64,
    pub eps_child: f64,
}

impl GridReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl DyadicGrid {
    pub fn scale(&self, k: i32) -> f64 {
        self.d0.powi(-k)
    }

    pub fn generation_ids(&self, k: i32) -> Result<&[usize]> {
        self.check_k(k)?;
        Ok(&self.generations[(k - self.k_min) as usize])
    }

    pub fn generations(&self) -> impl Iterator<Item = i32> {
        self.k_min..=self.k_max
    }

    fn check_k(&self, k: i32) -> Result<()> {
        if k < self.k_min || k > self.k_max {
            Err(Error::GenerationOutOfRange {
                k,
                min: self.k_min,
                max: self.k_max,
            })
        } else {
            Ok(())
        }
    }

    /// The generation-`k` cube containing `x`.
    pub fn cube_at(&self, x: usize, k: i32) -> Result<&DyadicCube> {
        self.check_k(k)?;
        let row = &self.point_cube[(k - self.k_min) as usize];
        let id = *row.get(x).ok_or(Error::UnknownPoint(x))?;
        Ok(&self.cubes[id])
    }

    /// Cube ids containing `x`, coarsest first.
    pub fn chain(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.point_cube.iter().map(move |row| row[x])
    }

    pub fn root(&self) -> &DyadicCube {
        &self.cubes[self.generations[0][0]]
    }

    pub fn num_points(&self) -> usize {
        self.point_cube.first().map_or(0, |r| r.len())
    }

    pub fn dump(&self) -> GridDump {
        GridDump {
            d0: self.d0,
            k_min: self.k_min,
            k_max: self.k_max,
            c_d: self.c_d,
            c_in: self.c_in,
            eps_child: self.eps_child,
            generations: self
                .generations()
                .zip(&self.generations)
                .map(|(k, ids)| GenerationDump {
                    k,
                    scale: self.scale(k),
                    cubes: ids
                        .iter()
                        .map(|&id| {
                            let c = &self.cubes[id];
                            CubeDump {
                                id,
                                center: c.center,
                                members: c.members.clone(),
                                parent: c.parent,
                            }
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Rebuilds a grid from a dump; links and constants are recomputed from
    /// the member sets, so a corrupted dump yields a grid that fails
    /// [`verify_grid`] rather than an error.
    pub fn from_dump(space: &Space, dump: &GridDump) -> Result<Self> {
        let gens = dump
            .generations
            .iter()
            .map(|g| {
                g.cubes
                    .iter()
                    .map(|c| (c.center, c.members.clone()))
                    .collect()
            })
            .collect();
        DyadicGrid::from_generations(space, dump.d0, dump.k_min, gens)
    }

    /// Assembles a grid from explicit generations of `(center, members)`,
    /// coarsest first. Parent links are resolved by containment; constants
    /// are the realized ones. Nothing is validated here — see [`verify_grid`].
    pub fn from_generations(
        space: &Space,
        d0: f64,
        k_min: i32,
        gens: Vec<Vec<(usize, Vec<usize>)>>,
    ) -> Result<Self> {
        if !(d0 > 1.0) {
            return Err(Error::InvalidParameter(format!("d0 = {d0} must exceed 1")));
        }
        if gens.is_empty() {
            return Err(Error::Empty("grid"));
        }
        let n = space.len();
        let mut cubes = Vec::new();
        let mut generations = Vec::new();
        let mut point_cube = Vec::new();
        for (gi, gen) in gens.into_iter().enumerate() {
            let k = k_min + gi as i32;
            let mut ids = Vec::new();
            let mut row = vec![usize::MAX; n];
            for (center, mut members) in gen {
                if center >= n {
                    return Err(Error::UnknownPoint(center));
                }
                members.sort_unstable();
                members.dedup();
                if let Some(&bad) = members.iter().find(|&&m| m >= n) {
                    return Err(Error::UnknownPoint(bad));
                }
                let id = cubes.len();
                for &m in &members {
                    if row[m] == usize::MAX {
                        row[m] = id;
                    }
                }
                let measure = exact_sum(members.iter().map(|&m| space.mass()[m]));
                cubes.push(DyadicCube {
                    id,
                    generation: k,
                    center,
                    members,
                    measure,
                    parent: None,
                    children: Vec::new(),
                });
                ids.push(id);
            }
            generations.push(ids);
            point_cube.push(row);
        }
        // parent: the cube one generation up containing the first member
        for gi in 1..generations.len() {
            for &id in &generations[gi] {
                let Some(&first) = cubes[id].members.first() else {
                    continue;
                };
                let pid = point_cube[gi - 1][first];
                if pid != usize::MAX && is_subset(&cubes[id].members, &cubes[pid].members) {
                    cubes[id].parent = Some(pid);
                    cubes[pid].children.push(id);
                }
            }
        }
        let k_max = k_min + generations.len() as i32 - 1;
        let mut grid = DyadicGrid {
            d0,
            k_min,
            k_max,
            c_d: 0.0,
            c_in: 0.0,
            eps_child: 1.0,
            cubes,
            generations,
            point_cube,
        };
        grid.compute_constants(space);
        Ok(grid)
    }

    fn compute_constants(&mut self, space: &Space) {
        let n = space.len();
        let mut c_d: f64 = 0.0;
        let mut c_in = f64::INFINITY;
        let mut eps: f64 = 1.0;
        let mut inside = vec![false; n];
        for q in &self.cubes {
            let s = self.d0.powi(-q.generation);
            for &m in &q.members {
                c_d = c_d.max(space.dist(q.center, m) / s);
                inside[m] = true;
            }
            for y in 0..n {
                if !inside[y] {
                    c_in = c_in.min(space.dist(q.center, y) / s);
                }
            }
            for &m in &q.members {
                inside[m] = false;
            }
            if let Some(p) = q.parent {
                eps = eps.min(q.measure / self.cubes[p].measure);
            }
        }
        self.c_d = c_d;
        self.c_in = if c_in.is_finite() { c_in } else { 1.0 };
        self.eps_child = eps;
    }

    /// Id of the smallest cube containing every point of `members`.
    pub fn smallest_cover(&self, members: &[usize]) -> usize {
        let same = |gi: usize| {
            let row = &self.point_cube[gi];
            let c = row[members[0]];
            members.iter().all(|&m| row[m] == c)
        };
        // coarser generations of a nested grid keep the property
        let (mut lo, mut hi) = (0usize, self.point_cube.len());
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if same(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.point_cube[lo][members[0]]
    }

    /// Generic parent/child average-jump bound from the ball sandwich:
    /// `max (mu(B(x_c(P), c_d s_P)) / mu(B(x_c(Q), c_in s_Q)))^{1-eta}`.
    pub fn sandwich_jump_bound(&self, space: &Space, atoms: &[f64], eta: f64) -> f64 {
        let ball_mass = |c: usize, r: f64, closed: bool| {
            exact_sum(
                (0..space.len())
                    .filter(|&y| {
                        let d = space.dist(c, y);
                        if closed {
                            d <= r
                        } else {
                            d < r
                        }
                    })
                    .map(|y| atoms[y]),
            )
        };
        let mut best: f64 = 1.0;
        for q in &self.cubes {
            if let Some(p) = q.parent {
                let p = &self.cubes[p];
                let outer = ball_mass(p.center, self.c_d * self.scale(p.generation), true);
                let inner = ball_mass(q.center, self.c_in * self.scale(q.generation), false)
                    .max(atoms[q.center]);
                best = best.max((outer / inner).powf(1.0 - eta));
            }
        }
        best
    }
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    // both sorted
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
    }
    true
}

/// Builds a grid with a seeded random net order.
pub fn build_grid(space: &Space, d0: f64, seed: u64) -> Result<DyadicGrid> {
    build_grid_with_order(space, d0, NetOrder::Seeded(seed))
}

pub fn build_grid_with_order(space: &Space, d0: f64, order: NetOrder) -> Result<DyadicGrid> {
    if !(d0 > 1.0 && d0.is_finite()) {
        return Err(Error::InvalidParameter(format!("d0 = {d0} must exceed 1")));
    }
    let n = space.len();
    let mut scan: Vec<usize> = (0..n).collect();
    if let NetOrder::Seeded(seed) = order {
        scan.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let (k_min, k_max) = generation_range(space, d0);

    // nested greedy nets
    let mut nets: Vec<Vec<usize>> = Vec::new();
    let mut is_center = vec![false; n];
    let mut current: Vec<usize> = Vec::new();
    for k in k_min..=k_max {
        let delta = d0.powi(-k);
        for &p in &scan {
            if !is_center[p] && current.iter().all(|&c| space.dist(p, c) >= delta) {
                is_center[p] = true;
                current.push(p);
            }
        }
        nets.push(current.clone());
    }
    if nets.last().map_or(0, |c| c.len()) != n {
        return Err(Error::GridConstruction(format!(
            "finest generation {k_max} has {} centers for {n} points",
            nets.last().map_or(0, |c| c.len())
        )));
    }

    // parent center of every center, one generation up
    let levels = nets.len();
    let mut parent_center: Vec<Vec<usize>> = vec![Vec::new(); levels];
    for li in 1..levels {
        let coarse = &nets[li - 1];
        let mut up = vec![usize::MAX; n];
        for &z in &nets[li] {
            up[z] = if coarse.contains(&z) {
                z
            } else {
                *coarse
                    .iter()
                    .min_by(|&&a, &&b| {
                        space
                            .dist(z, a)
                            .total_cmp(&space.dist(z, b))
                            .then(a.cmp(&b))
                    })
                    .expect("nonempty coarse net")
            };
        }
        parent_center[li] = up;
    }

    // ancestor of every point at every generation
    let mut anc = vec![vec![0usize; n]; levels];
    anc[levels - 1] = (0..n).collect();
    for li in (0..levels - 1).rev() {
        for x in 0..n {
            anc[li][x] = parent_center[li + 1][anc[li + 1][x]];
        }
    }

    let gens: Vec<Vec<(usize, Vec<usize>)>> = (0..levels)
        .map(|li| {
            let mut by_center: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
            for x in 0..n {
                by_center.entry(anc[li][x]).or_default().push(x);
            }
            let mut cubes: Vec<(usize, Vec<usize>)> = by_center.into_iter().collect();
            cubes.sort_by_key(|(_, m)| m[0]);
            cubes
        })
        .collect();
    DyadicGrid::from_generations(space, d0, k_min, gens)
}

fn generation_range(space: &Space, d0: f64) -> (i32, i32) {
    let diam = space.diameter();
    if space.len() == 1 || diam == 0.0 {
        return (0, 0);
    }
    let mut k_min = (-(diam.ln() / d0.ln())).ceil() as i32;
    while d0.powi(-k_min) <= diam {
        k_min -= 1;
    }
    while d0.powi(-(k_min + 1)) > diam {
        k_min += 1;
    }
    let dmin = space.min_dist();
    let mut k_max = k_min;
    while d0.powi(-k_max) > dmin {
        k_max += 1;
    }
    (k_min, k_max)
}

/// Derives the `i`-th seed of a family.
pub fn family_seed(seed: u64, i: usize) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n_grids` grids with independent net orders derived from `seed`.
pub fn build_grid_family(space: &Space, n_grids: usize, seed: u64) -> Result<Vec<DyadicGrid>> {
    build_grid_family_d0(space, DEFAULT_D0, n_grids, seed)
}

pub fn build_grid_family_d0(
    space: &Space,
    d0: f64,
    n_grids: usize,
    seed: u64,
) -> Result<Vec<DyadicGrid>> {
    if n_grids == 0 {
        return Err(Error::InvalidParameter("n_grids must be at least 1".into()));
    }
    exec::map_range(n_grids, |i| build_grid(space, d0, family_seed(seed, i)))
        .into_iter()
        .collect()
}

/// `K = max_B min { mu(Q)/mu(B) : Q ⊇ B, Q in some grid }`, with the
/// ball attaining it.
pub fn cover_constant(space: &Space, grids: &[DyadicGrid]) -> (f64, Option<Ball>) {
    let balls = space.balls();
    let vals = exec::map_slice(balls, |b: &BallRef| {
        let members: Vec<usize> = space.members(b).collect();
        grids
            .iter()
            .map(|g| g.cubes[g.smallest_cover(&members)].measure / b.measure)
            .fold(f64::INFINITY, f64::min)
    });
    let mut best = (0.0, None);
    for (b, v) in balls.iter().zip(vals) {
        if v > best.0 {
            best = (v, Some(b));
        }
    }
    (best.0, best.1.map(|b| space.to_ball(b)))
}

/// Checks properties (1)–(5) exhaustively from the raw member sets.
pub fn verify_grid(grid: &DyadicGrid, space: &Space) -> GridReport {
    let n = space.len();
    let words = n.div_ceil(64);
    let bits: Vec<Vec<u64>> = grid
        .cubes
        .iter()
        .map(|q| {
            let mut b = vec![0u64; words];
            for &m in &q.members {
                if m < n {
                    b[m / 64] |= 1 << (m % 64);
                }
            }
            b
        })
        .collect();
    let inter = |a: usize, b: usize| -> (bool, bool, bool) {
        // (intersects, a ⊆ b, b ⊆ a)
        let (mut any, mut ab, mut ba) = (false, true, true);
        for (x, y) in bits[a].iter().zip(&bits[b]) {
            any |= x & y != 0;
            ab &= x & !y == 0;
            ba &= y & !x == 0;
        }
        (any, ab, ba)
    };
    let gens: Vec<Vec<usize>> = grid.generations.clone();
    let mut checks = Vec::new();

    // (1) nesting
    let mut w1 = None;
    'outer: for a in 0..grid.cubes.len() {
        for b in (a + 1)..grid.cubes.len() {
            let (any, ab, ba) = inter(a, b);
            if any && !ab && !ba {
                w1 = Some(format!("cubes {a} and {b} overlap without nesting"));
                break 'outer;
            }
        }
    }
    checks.push(PropertyCheck {
        property: "(1) nested or disjoint".into(),
        pass: w1.is_none(),
        witness: w1,
    });

    // (2) every generation partitions X
    let mut w2 = None;
    'gen: for (gi, ids) in gens.iter().enumerate() {
        let k = grid.k_min + gi as i32;
        for (i, &a) in ids.iter().enumerate() {
            if grid.cubes[a].members.is_empty() {
                w2 = Some(format!("generation {k}: cube {a} is empty"));
                break 'gen;
            }
            for &b in &ids[i + 1..] {
                if inter(a, b).0 {
                    w2 = Some(format!("generation {k}: cubes {a} and {b} intersect"));
                    break 'gen;
                }
            }
        }
        let covered: usize = ids.iter().map(|&a| grid.cubes[a].members.len()).sum();
        let mut seen = vec![false; n];
        for &a in ids {
            for &m in &grid.cubes[a].members {
                if m < n {
                    seen[m] = true;
                }
            }
        }
        if let Some(x) = seen.iter().position(|s| !s) {
            w2 = Some(format!("generation {k}: point {x} not covered"));
            break;
        }
        if covered != n {
            w2 = Some(format!(
                "generation {k}: {covered} memberships for {n} points"
            ));
            break;
        }
    }
    checks.push(PropertyCheck {
        property: "(2) generations partition X".into(),
        pass: w2.is_none(),
        witness: w2,
    });

    // (3) exactly one parent one generation up, at least one child one generation down
    let mut w3 = None;
    'p3: for gi in 0..gens.len() {
        for &a in &gens[gi] {
            if gi > 0 {
                let parents = gens[gi - 1].iter().filter(|&&b| inter(a, b).1).count();
                if parents != 1 {
                    w3 = Some(format!("cube {a} has {parents} parents"));
                    break 'p3;
                }
            }
            if gi + 1 < gens.len() && !gens[gi + 1].iter().any(|&b| inter(b, a).1) {
                w3 = Some(format!("cube {a} has no child"));
                break 'p3;
            }
        }
    }
    checks.push(PropertyCheck {
        property: "(3) parents and children".into(),
        pass: w3.is_none(),
        witness: w3,
    });

    // (4) child mass ratio
    let mut eps: f64 = 1.0;
    let mut w4 = None;
    for gi in 1..gens.len() {
        for &a in &gens[gi] {
            for &b in &gens[gi - 1] {
                if inter(a, b).1 && !grid.cubes[a].members.is_empty() {
                    let ma = exact_sum(grid.cubes[a].members.iter().map(|&m| space.mass()[m]));
                    let mb = exact_sum(grid.cubes[b].members.iter().map(|&m| space.mass()[m]));
                    let r = ma / mb;
                    eps = eps.min(r);
                    if r < grid.eps_child && w4.is_none() {
                        w4 = Some(format!(
                            "child {a} of {b} has ratio {r} < eps {}",
                            grid.eps_child
                        ));
                    }
                }
            }
        }
    }
    if w4.is_none() && !(grid.eps_child > 0.0) {
        w4 = Some(format!("eps_child = {} is not positive", grid.eps_child));
    }
    checks.push(PropertyCheck {
        property: "(4) child mass ratio".into(),
        pass: w4.is_none(),
        witness: w4,
    });

    // (5) ball sandwich
    let mut w5 = None;
    if !(grid.c_in > 0.0) {
        w5 = Some(format!("inner constant {} is not positive", grid.c_in));
    }
    'p5: for q in &grid.cubes {
        let s = grid.scale(q.generation);
        let b = &bits[q.id];
        for y in 0..n {
            let d = space.dist(q.center, y);
            let member = b[y / 64] >> (y % 64) & 1 == 1;
            if d < grid.c_in * s && !member {
                w5 = Some(format!(
                    "cube {}: point {y} in inner ball but outside cube",
                    q.id
                ));
                break 'p5;
            }
            if member && d > grid.c_d * s {
                w5 = Some(format!("cube {}: member {y} outside outer ball", q.id));
                break 'p5;
            }
        }
    }
    checks.push(PropertyCheck {
        property: "(5) ball sandwich".into(),
        pass: w5.is_none(),
        witness: w5,
    });

    GridReport {
        checks,
        c_d: grid.c_d,
        c_in: grid.c_in,
        eps_child: eps,
    }
}
