//! Small numerical kernels shared by the sweeps.

/// Correctly rounded floating-point summation (Shewchuk's partials).
///
/// The rounded value depends only on the multiset of addends, never on the
/// order they were added in. Ball and cube sums use this so that two
/// enumerations of the same member set give bit-identical measures and
/// integrals.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // half-way case: the remaining partials decide the rounding direction
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Correctly rounded sum of an iterator.
pub fn exact_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut s = ExactSum::new();
    s.extend(iter);
    s.value()
}

/// Bisection for the root of a non-increasing function on `(lo, hi)`.
///
/// `g(lo) > 0 >= g(hi)` is expected; the bracket is widened by `step` on
/// either side until it holds. Stops when `hi - lo <= tol` or after
/// `max_iter` halvings and returns the midpoint.
pub fn bisect_decreasing<G: Fn(f64) -> f64>(
    g: G,
    mut lo: f64,
    mut hi: f64,
    step: f64,
    tol: f64,
    max_iter: usize,
) -> f64 {
    let mut widen = 0;
    while g(lo) <= 0.0 && widen < 2000 {
        lo -= step;
        widen += 1;
    }
    widen = 0;
    while g(hi) > 0.0 && widen < 2000 {
        hi += step;
        widen += 1;
    }
    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
