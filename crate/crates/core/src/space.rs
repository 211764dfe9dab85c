//! Finite quasi-metric measure spaces.
//!
//! A [`Space`] is a finite point set carrying a symmetric quasi-distance and
//! a strictly positive atomic measure. Its quasi-triangle constant `A0` and
//! doubling constant `C_mu` are computed at construction and never supplied
//! by the caller.
//!
//! Balls are open: `B(x, r) = { y : d(x, y) < r }`. Since `r -> mu(B(x, r))`
//! is a step function whose jumps sit at the realized distances, every
//! supremum over balls is attained on the finite candidate set of realized
//! distances plus one radius above the diameter.

use std::collections::HashMap;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numeric::{exact_sum, ExactSum};
use crate::{exec, Error, Result};

/// A ball together with its members (sorted by point index) and measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
    pub members: Vec<usize>,
    pub measure: f64,
}

/// Compact handle on a ball: the first `len` points of `center`'s
/// distance order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallRef {
    pub center: usize,
    pub len: usize,
    pub radius: f64,
    pub measure: f64,
}

#[derive(Debug, Clone)]
pub struct Space {
    labels: Vec<String>,
    dist: Vec<f64>,
    mass: Vec<f64>,
    total_mass: f64,
    a0: f64,
    c_mu: f64,
    diameter: f64,
    min_dist: f64,
    /// Per center: point indices sorted by (distance, index).
    order: Vec<Vec<u32>>,
    /// Per center: position of each point in `order`.
    rank: Vec<Vec<u32>>,
    /// Per center: realizable ball sizes, ascending, ending with `n`.
    cuts: Vec<Vec<u32>>,
    balls: OnceLock<Vec<BallRef>>,
}

impl Space {
    /// Builds a space from a full distance matrix and positive atom masses.
    pub fn new(dist: Vec<Vec<f64>>, mass: Vec<f64>) -> Result<Self> {
        let n = dist.len();
        let labels = (0..n).map(|i| i.to_string()).collect();
        Self::with_labels(labels, dist, mass)
    }

    pub fn with_labels(labels: Vec<String>, dist: Vec<Vec<f64>>, mass: Vec<f64>) -> Result<Self> {
        let n = dist.len();
        if n == 0 {
            return Err(Error::InvalidSpace("no points".into()));
        }
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        if mass.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: mass.len(),
            });
        }
        for (i, row) in dist.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidSpace(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        for i in 0..n {
            if dist[i][i] != 0.0 {
                return Err(Error::InvalidSpace(format!(
                    "nonzero diagonal entry dist[{i}][{i}] = {}",
                    dist[i][i]
                )));
            }
            for j in 0..n {
                let d = dist[i][j];
                if !d.is_finite() {
                    return Err(Error::InvalidSpace(format!(
                        "non-finite entry dist[{i}][{j}]"
                    )));
                }
                if d != dist[j][i] {
                    return Err(Error::InvalidSpace(format!(
                        "asymmetric entry dist[{i}][{j}] = {d} != dist[{j}][{i}] = {}",
                        dist[j][i]
                    )));
                }
                if i != j && d <= 0.0 {
                    return Err(Error::InvalidSpace(format!(
                        "nonpositive off-diagonal entry dist[{i}][{j}] = {d}"
                    )));
                }
            }
        }
        for (i, &m) in mass.iter().enumerate() {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidSpace(format!(
                    "nonpositive mass at point {i}: {m}"
                )));
            }
        }
        let flat: Vec<f64> = dist.into_iter().flatten().collect();
        Ok(Self::from_validated(labels, flat, mass))
    }

    /// Euclidean distances between coordinate vectors.
    pub fn euclidean(coords: &[Vec<f64>], mass: Vec<f64>) -> Result<Self> {
        let n = coords.len();
        let mut dist = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                dist[i][j] = euclid(&coords[i], &coords[j]);
            }
        }
        Self::new(dist, mass)
    }

    fn from_validated(labels: Vec<String>, dist: Vec<f64>, mass: Vec<f64>) -> Self {
        let n = mass.len();
        let order: Vec<Vec<u32>> = exec::map_range(n, |c| {
            let row = &dist[c * n..(c + 1) * n];
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| row[a as usize].total_cmp(&row[b as usize]).then(a.cmp(&b)));
            idx
        });
        let rank = order
            .iter()
            .map(|ord| {
                let mut r = vec![0u32; n];
                for (pos, &p) in ord.iter().enumerate() {
                    r[p as usize] = pos as u32;
                }
                r
            })
            .collect();
        let cuts = order
            .iter()
            .enumerate()
            .map(|(c, ord)| {
                let row = &dist[c * n..(c + 1) * n];
                let mut cs: Vec<u32> = (1..n)
                    .filter(|&j| row[ord[j] as usize] > row[ord[j - 1] as usize])
                    .map(|j| j as u32)
                    .collect();
                cs.push(n as u32);
                cs
            })
            .collect();
        let diameter = dist.iter().copied().fold(0.0, f64::max);
        let min_dist = dist
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min);
        let total_mass = exact_sum(mass.iter().copied());
        let mut space = Space {
            labels,
            dist,
            mass,
            total_mass,
            a0: 1.0,
            c_mu: 1.0,
            diameter,
            min_dist,
            order,
            rank,
            cuts,
            balls: OnceLock::new(),
        };
        space.a0 = space.compute_a0();
        space.c_mu = space.compute_doubling();
        space
    }

    /// The same point set and distances with a different atomic measure.
    pub fn with_mass(&self, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: mass.len(),
            });
        }
        for (i, &m) in mass.iter().enumerate() {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidSpace(format!(
                    "nonpositive mass at point {i}: {m}"
                )));
            }
        }
        let mut s = self.clone();
        s.total_mass = exact_sum(mass.iter().copied());
        s.mass = mass;
        s.balls = OnceLock::new();
        s.c_mu = s.compute_doubling();
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn dist(&self, x: usize, y: usize) -> f64 {
        self.dist[x * self.len() + y]
    }

    pub fn dist_row(&self, x: usize) -> &[f64] {
        let n = self.len();
        &self.dist[x * n..(x + 1) * n]
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn c_mu(&self) -> f64 {
        self.c_mu
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Smallest positive distance; infinite for a one-point space.
    pub fn min_dist(&self) -> f64 {
        self.min_dist
    }

    /// A radius strictly above the diameter.
    pub fn super_radius(&self) -> f64 {
        self.diameter + 1.0
    }

    /// Points sorted by distance from `center` (ties by index).
    pub fn order(&self, center: usize) -> &[u32] {
        &self.order[center]
    }

    /// Position of `point` in `center`'s distance order.
    pub fn rank(&self, center: usize, point: usize) -> usize {
        self.rank[center][point] as usize
    }

    /// Realizable ball sizes around `center`, ascending.
    pub fn cuts(&self, center: usize) -> &[u32] {
        &self.cuts[center]
    }

    /// Radius realizing the ball of the first `len` points around `center`.
    pub fn cut_radius(&self, center: usize, len: usize) -> f64 {
        if len >= self.len() {
            self.super_radius()
        } else {
            self.dist(center, self.order[center][len] as usize)
        }
    }

    fn check_point(&self, x: usize) -> Result<()> {
        if x < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownPoint(x))
        }
    }

    /// Number of points strictly closer than `radius` to `center`.
    pub fn count_within(&self, center: usize, radius: f64) -> usize {
        let row = self.dist_row(center);
        self.order[center].partition_point(|&p| row[p as usize] < radius)
    }

    /// The open ball `B(center, radius)`.
    pub fn ball(&self, center: usize, radius: f64) -> Result<Ball> {
        self.check_point(center)?;
        if !(radius >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "radius {radius} must be >= 0"
            )));
        }
        let len = self.count_within(center, radius);
        Ok(self.materialize(center, len, radius))
    }

    fn materialize(&self, center: usize, len: usize, radius: f64) -> Ball {
        let mut members: Vec<usize> = self.order[center][..len]
            .iter()
            .map(|&p| p as usize)
            .collect();
        members.sort_unstable();
        let measure = exact_sum(members.iter().map(|&p| self.mass[p]));
        Ball {
            center,
            radius,
            members,
            measure,
        }
    }

    /// Members of a compact ball handle, in distance order.
    pub fn members(&self, ball: &BallRef) -> impl Iterator<Item = usize> + Clone + '_ {
        self.order[ball.center][..ball.len]
            .iter()
            .map(|&p| p as usize)
    }

    /// Whether `point` belongs to the ball.
    pub fn contains(&self, ball: &BallRef, point: usize) -> bool {
        self.rank(ball.center, point) < ball.len
    }

    pub fn to_ball(&self, ball: &BallRef) -> Ball {
        self.materialize(ball.center, ball.len, ball.radius)
    }

    /// One handle per distinct realizable member set, ordered by center
    /// then radius. Computed once and cached.
    pub fn balls(&self) -> &[BallRef] {
        self.balls.get_or_init(|| self.compute_balls())
    }

    fn compute_balls(&self) -> Vec<BallRef> {
        let n = self.len();
        // Two independent 64-bit keys per point; member sets are compared
        // by (key sums, size, measure).
        let mut rng = ChaCha8Rng::seed_from_u64(0x6d61_7862_616c_6c73);
        let keys: Vec<(u64, u64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
        let per_center: Vec<Vec<(BallRef, (u64, u64))>> = exec::map_range(n, |c| {
            let ord = &self.order[c];
            let mut acc = ExactSum::new();
            let (mut h1, mut h2) = (0u64, 0u64);
            let mut out = Vec::with_capacity(self.cuts[c].len());
            let mut pos = 0usize;
            for &cut in &self.cuts[c] {
                let cut = cut as usize;
                while pos < cut {
                    let p = ord[pos] as usize;
                    acc.add(self.mass[p]);
                    h1 = h1.wrapping_add(keys[p].0);
                    h2 = h2.wrapping_add(keys[p].1);
                    pos += 1;
                }
                let b = BallRef {
                    center: c,
                    len: cut,
                    radius: self.cut_radius(c, cut),
                    measure: acc.value(),
                };
                out.push((b, (h1, h2)));
            }
            out
        });
        let mut seen: HashMap<(u64, u64, usize, u64), ()> = HashMap::new();
        let mut balls = Vec::new();
        for (b, (h1, h2)) in per_center.into_iter().flatten() {
            if seen
                .insert((h1, h2, b.len, b.measure.to_bits()), ())
                .is_none()
            {
                balls.push(b);
            }
        }
        balls
    }

    fn compute_a0(&self) -> f64 {
        let n = self.len();
        let rows = exec::map_range(n, |x| {
            let mut best: f64 = 1.0;
            for y in 0..n {
                if y == x {
                    continue;
                }
                let dxy = self.dist(x, y);
                for z in 0..n {
                    let s = self.dist(x, z) + self.dist(z, y);
                    best = best.max(dxy / s);
                }
            }
            best
        });
        rows.into_iter().fold(1.0, f64::max)
    }

    /// Prefix measures of `center`'s distance order: entry `l` is the
    /// measure of the first `l` points.
    pub fn prefix_measures(&self, center: usize) -> Vec<f64> {
        let mut acc = ExactSum::new();
        let mut out = Vec::with_capacity(self.len() + 1);
        out.push(0.0);
        for &p in &self.order[center] {
            acc.add(self.mass[p as usize]);
            out.push(acc.value());
        }
        out
    }

    fn compute_doubling(&self) -> f64 {
        let n = self.len();
        let rows = exec::map_range(n, |c| {
            let pre = self.prefix_measures(c);
            let mut best: f64 = 1.0;
            for &cut in &self.cuts[c] {
                let len = cut as usize;
                let r = self.cut_radius(c, len);
                let big = self.count_within(c, 2.0 * r);
                best = best.max(pre[big] / pre[len]);
            }
            best
        });
        rows.into_iter().fold(1.0, f64::max)
    }

    /// Largest `C` with `mu(B(y,r)) / mu(B(x,R)) >= C (r/R)^{log2 C_mu}` over
    /// the sampled quadruples: `R` ranges over the candidate radii around
    /// `x`, `y` over `B(x, R)` and `r < R` over the realized distances from `y`.
    pub fn lower_mass_bound(&self) -> f64 {
        lower_mass_bound_with(self, self.c_mu.log2())
    }
}

/// Lower mass bound constant for an explicit exponent `s`.
pub fn lower_mass_bound_with(space: &Space, s: f64) -> f64 {
    let n = space.len();
    // per y: candidate radii r_j (ascending) and prefix minima of mu(B(y,r_j)) / r_j^s
    let tables: Vec<(Vec<f64>, Vec<f64>)> = exec::map_range(n, |y| {
        let pre = space.prefix_measures(y);
        let cuts = space.cuts(y);
        let mut radii = Vec::new();
        let mut mins = Vec::new();
        let mut running = f64::INFINITY;
        for &cut in cuts {
            let len = cut as usize;
            if len >= n {
                break;
            }
            let r = space.cut_radius(y, len);
            running = running.min(pre[len] / r.powf(s));
            radii.push(r);
            mins.push(running);
        }
        (radii, mins)
    });
    let rows = exec::map_range(n, |x| {
        let pre = space.prefix_measures(x);
        let mut best = f64::INFINITY;
        for &cut in space.cuts(x) {
            let len = cut as usize;
            let big_r = space.cut_radius(x, len);
            let mu_big = pre[len];
            for &y in &space.order(x)[..len] {
                let (radii, mins) = &tables[y as usize];
                let k = radii.partition_point(|&r| r < big_r);
                if k == 0 {
                    continue;
                }
                best = best.min(mins[k - 1] * big_r.powf(s) / mu_big);
            }
        }
        best
    });
    let c = rows.into_iter().fold(f64::INFINITY, f64::min);
    if c.is_finite() {
        c
    } else {
        1.0
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> Space {
        Space::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![1.0, 1.0]).unwrap()
    }

    fn line(n: usize) -> Space {
        let coords: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64]).collect();
        Space::euclidean(&coords, vec![1.0 / n as f64; n]).unwrap()
    }

    #[test]
    fn two_point_constants() {
        let s = two_point();
        assert_eq!(s.a0(), 1.0);
        assert_eq!(s.c_mu(), 2.0);
    }

    #[test]
    fn single_point_constants() {
        let s = Space::new(vec![vec![0.0]], vec![5.0]).unwrap();
        assert_eq!(s.a0(), 1.0);
        assert_eq!(s.c_mu(), 1.0);
        assert_eq!(s.balls().len(), 1);
        assert_eq!(s.balls()[0].measure, 5.0);
        assert_eq!(s.lower_mass_bound(), 1.0);
    }

    #[test]
    fn collinear_is_metric() {
        let s = Space::euclidean(&[vec![0.0], vec![0.5], vec![1.0]], vec![1.0 / 3.0; 3]).unwrap();
        assert_eq!(s.a0(), 1.0);
        let b = s.ball(0, 0.75).unwrap();
        assert_eq!(b.members, vec![0, 1]);
        assert_eq!(b.measure, exact_sum([1.0 / 3.0, 1.0 / 3.0]));
    }

    #[test]
    fn two_point_balls() {
        let s = two_point();
        let b = s.ball(0, 0.5).unwrap();
        assert_eq!((b.members.clone(), b.measure), (vec![0], 1.0));
        let b = s.ball(0, 2.0).unwrap();
        assert_eq!((b.members.clone(), b.measure), (vec![0, 1], 2.0));
        let sets: Vec<Vec<usize>> = s.balls().iter().map(|b| s.to_ball(b).members).collect();
        assert_eq!(sets, vec![vec![0], vec![0, 1], vec![1]]);
        assert!(s.ball(7, 1.0).is_err());
        assert!(s.ball(0, -1.0).is_err());
        assert_eq!(s.ball(0, 0.0).unwrap().members, Vec::<usize>::new());
    }

    #[test]
    fn validation_errors_name_entry() {
        let e = Space::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]], vec![1.0, 1.0]).unwrap_err();
        assert!(e.to_string().contains("dist[0][1]"), "{e}");
        let e = Space::new(vec![vec![1.0, 1.0], vec![1.0, 0.0]], vec![1.0, 1.0]).unwrap_err();
        assert!(e.to_string().contains("diagonal"), "{e}");
        let e = Space::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![1.0, 0.0]).unwrap_err();
        assert!(e.to_string().contains("point 1"), "{e}");
        let e = Space::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![1.0, 1.0]).unwrap_err();
        assert!(e.to_string().contains("nonpositive off-diagonal"), "{e}");
    }

    #[test]
    fn quasi_metric_a0() {
        // squared Euclidean distance on {0,1,2}: d(0,2)=4, d(0,1)+d(1,2)=2
        let d = vec![
            vec![0.0, 1.0, 4.0],
            vec![1.0, 0.0, 1.0],
            vec![4.0, 1.0, 0.0],
        ];
        let s = Space::new(d, vec![1.0; 3]).unwrap();
        assert_eq!(s.a0(), 2.0);
    }

    #[test]
    fn line_doubling_regression() {
        for k in 3..=7 {
            let s = line(1 << k);
            assert!((2.0..=4.0).contains(&s.c_mu()), "k={k} c_mu={}", s.c_mu());
            assert_eq!(s.c_mu(), 3.0);
        }
    }

    #[test]
    fn ball_count_bounded() {
        let s = line(16);
        assert!(s.balls().len() <= 16 * 16);
    }

    #[test]
    fn lower_mass_bound_stable_on_line() {
        let cs: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| line(n).lower_mass_bound())
            .collect();
        assert!(cs.iter().all(|&c| c > 0.0));
        let (lo, hi) = cs
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
        assert!(hi <= 2.0 * lo, "{cs:?}");
    }
}
