//! End-to-end acceptance criteria. Each test prints one `PASS`/`FAIL` line
//! (straight to stderr, so it shows up without `--nocapture`) and then
//! asserts the same verdict.

use std::io::Write;
use std::time::Instant;

use fracmax::czd::{cz_decompose, cz_stack, cz_verify, cz_verify_stack};
use fracmax::experiment::{
    default_corpus, run_experiment, verify_all, Command, ExperimentConfig, GeneratorKind, QSpec,
    SpaceGen, Trend, VerifyCase,
};
use fracmax::grid::{build_grid, build_grid_family, verify_grid, DEFAULT_D0};
use fracmax::io::{ExponentSpec, WeightSpec};
use fracmax::maximal::{domination_constants, fractional_maximal, weighted_dyadic_maximal};
use fracmax::norm::{holder_bound, luxemburg_norm, modular};
use fracmax::weights::{
    a_infty_diagnostics, apq_constant, derived_measures, dual_constants, subset_bound_case,
};
use fracmax::{Exponent, Space, Weight};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-12;

fn report(id: u32, name: &str, pass: bool, detail: &str, start: Instant, limit_s: f64) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let ok = pass && secs < limit_s;
    let verdict = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr().lock(),
        "acceptance {id} [{name}]: {verdict} — {detail}; {secs:.2}s (limit {limit_s}s)"
    );
    ok
}

fn random_space(rng: &mut ChaCha8Rng, max_n: usize) -> Space {
    use GeneratorKind::*;
    let kind = *[Line, RandomMetric, CantorLike, TorusGrid]
        .choose(rng)
        .unwrap();
    let n = match kind {
        CantorLike => 1 << rng.gen_range(1..=max_n.ilog2()),
        TorusGrid => {
            let m = rng.gen_range(2..=(max_n as f64).sqrt() as usize);
            m * m
        }
        _ => rng.gen_range(2..=max_n),
    };
    let s = SpaceGen::new(kind, n, rng.gen()).build().unwrap();
    if rng.gen_bool(0.5) {
        s.with_mass((0..n).map(|_| rng.gen_range(0.1..3.0)).collect())
            .unwrap()
    } else {
        s
    }
}

/// Nonnegative-or-signed values over six orders of magnitude with some zeros.
fn random_fn(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.2) {
                0.0
            } else {
                let v = 10f64.powf(rng.gen_range(-3.0..3.0));
                if rng.gen_bool(0.5) {
                    -v
                } else {
                    v
                }
            }
        })
        .collect()
}

fn random_exponent(rng: &mut ChaCha8Rng, s: &Space, allow_one: bool) -> Exponent {
    if rng.gen_bool(0.5) {
        let p_inf = rng.gen_range(1.2..4.0);
        let amp = rng.gen_range(-(p_inf - 1.0) * 0.9..1.5);
        Exponent::log_holder(s, p_inf, amp, rng.gen_range(0..s.len())).unwrap()
    } else {
        let v = (0..s.len())
            .map(|_| {
                if allow_one && rng.gen_bool(0.2) {
                    1.0
                } else {
                    rng.gen_range(1.05..5.0)
                }
            })
            .collect();
        Exponent::new(v).unwrap()
    }
}

fn random_weight(rng: &mut ChaCha8Rng, s: &Space) -> Weight {
    match rng.gen_range(0..3) {
        0 => Weight::ones(s.len()),
        1 => Weight::power(s, rng.gen_range(-1.5..1.5), rng.gen_range(0..s.len())).unwrap(),
        _ => Weight::new(
            (0..s.len())
                .map(|_| 10f64.powf(rng.gen_range(-2.0..2.0)))
                .collect(),
        )
        .unwrap(),
    }
}

#[test]
fn criterion_1_exact_constant_bounds() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut holder_bad = Vec::new();
    for case in 0..1000 {
        let s = random_space(&mut rng, 64);
        let p = random_exponent(&mut rng, &s, true);
        let f = random_fn(&mut rng, s.len());
        let g = random_fn(&mut rng, s.len());
        let (lhs, rhs) = holder_bound(&s, &p, &f, &g, TOL).unwrap();
        if lhs > rhs {
            holder_bad.push(format!("case {case}: {lhs} > {rhs}"));
        }
    }
    // 50 weighted configurations x 20 (ball, subset) pairs
    let mut subset_bad = Vec::new();
    let mut cases = 0;
    for cfg in 0..50 {
        let s = random_space(&mut rng, 40);
        let p = random_exponent(&mut rng, &s, false);
        let eta = if rng.gen_bool(0.3) {
            0.0
        } else {
            rng.gen_range(0.0..0.9 / p.p_plus())
        };
        let q = p.shifted(eta).unwrap();
        let w = random_weight(&mut rng, &s);
        let apq = apq_constant(&s, &p, &q, &w, TOL).unwrap().value;
        let balls = s.balls();
        for _ in 0..20 {
            let b = balls[rng.gen_range(0..balls.len())];
            let members: Vec<usize> = s.members(&b).collect();
            let k = rng.gen_range(1..=members.len());
            let mut e: Vec<usize> = members.choose_multiple(&mut rng, k).copied().collect();
            e.sort_unstable();
            let (lhs, rhs) = subset_bound_case(&s, &q, &w, eta, apq, &members, &e, TOL);
            cases += 1;
            if lhs > rhs {
                subset_bad.push(format!("config {cfg}: {lhs} > {rhs}"));
            }
        }
    }
    let pass = holder_bad.is_empty() && subset_bad.is_empty() && cases == 1000;
    let detail = format!(
        "hölder 1000 cases, {} violations; subset bound {cases} cases, {} violations{}",
        holder_bad.len(),
        subset_bad.len(),
        holder_bad
            .first()
            .or(subset_bad.first())
            .map(|w| format!(" (first: {w})"))
            .unwrap_or_default()
    );
    assert!(
        report(1, "exact-constant bounds", pass, &detail, start, 60.0),
        "{detail}"
    );
}

/// Solves `sum_i a_i lambda^{-p_i} = 1` by Newton iteration in `t = ln lambda`.
fn scalar_root(a: &[f64], p: &[f64]) -> f64 {
    let mut t = 0.0f64;
    for _ in 0..200 {
        let g: f64 = a
            .iter()
            .zip(p)
            .map(|(a, p)| a * (-p * t).exp())
            .sum::<f64>()
            - 1.0;
        let dg: f64 = a.iter().zip(p).map(|(a, p)| -p * a * (-p * t).exp()).sum();
        let step = (g / dg).clamp(-5.0, 5.0);
        t -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    t.exp()
}

#[test]
fn criterion_2_norm_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_closed: f64 = 0.0;
    for _ in 0..1000 {
        let s = random_space(&mut rng, 64);
        let pv = rng.gen_range(1.0..8.0);
        let p = Exponent::constant(pv, s.len()).unwrap();
        let f = random_fn(&mut rng, s.len());
        let oracle = f
            .iter()
            .zip(s.mass())
            .map(|(v, m)| v.abs().powf(pv) * m)
            .sum::<f64>()
            .powf(1.0 / pv);
        let got = luxemburg_norm(&s, &p, &f, TOL).unwrap();
        let rel = if oracle == 0.0 {
            got
        } else {
            (got / oracle - 1.0).abs()
        };
        worst_closed = worst_closed.max(rel);
    }

    let two = Space::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![1.0, 1.0]).unwrap();
    let golden = luxemburg_norm(
        &two,
        &Exponent::new(vec![1.0, 2.0]).unwrap(),
        &[1.0, 1.0],
        TOL,
    )
    .unwrap();
    let golden_err = (golden - scalar_root(&[1.0, 1.0], &[1.0, 2.0])).abs();
    // further two-point cases against the same scalar root finder
    let mut worst_two: f64 = golden_err;
    for _ in 0..200 {
        let m = [rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0)];
        let pv = [rng.gen_range(1.0..6.0), rng.gen_range(1.0..6.0)];
        let f = [rng.gen_range(0.01..10.0), rng.gen_range(0.01..10.0)];
        let s = two.with_mass(m.to_vec()).unwrap();
        let got = luxemburg_norm(&s, &Exponent::new(pv.to_vec()).unwrap(), &f, TOL).unwrap();
        let a = [f[0].powf(pv[0]) * m[0], f[1].powf(pv[1]) * m[1]];
        let oracle = scalar_root(&a, &pv);
        worst_two = worst_two.max((got / oracle - 1.0).abs());
    }

    let mut worst_unit: f64 = 0.0;
    for _ in 0..1000 {
        let s = random_space(&mut rng, 64);
        let p = random_exponent(&mut rng, &s, true);
        let f = random_fn(&mut rng, s.len());
        let nf = luxemburg_norm(&s, &p, &f, TOL).unwrap();
        if nf > 0.0 {
            let u: Vec<f64> = f.iter().map(|v| v / nf).collect();
            worst_unit = worst_unit.max((modular(&s, &p, &u).unwrap() - 1.0).abs());
        }
    }
    let pass =
        worst_closed <= 1e-9 && golden_err <= 1e-10 && worst_two <= 1e-10 && worst_unit <= 1e-9;
    let detail = format!(
        "closed form max rel err {worst_closed:.2e} (1000 cases); golden ratio err {golden_err:.2e}, \
         two-point max rel err {worst_two:.2e}; unit ball max err {worst_unit:.2e} (1000 cases)"
    );
    assert!(
        report(2, "luxemburg norm oracles", pass, &detail, start, 10.0),
        "{detail}"
    );
}

#[test]
fn criterion_3_grid_certification() {
    use GeneratorKind::*;
    let start = Instant::now();
    let kinds = [Line, RandomMetric, CantorLike, Line, RandomMetric];
    let mut failures = Vec::new();
    let mut grids = 0;
    for n in [8, 32, 64, 128] {
        for (seed, kind) in kinds.iter().enumerate() {
            let mut s = SpaceGen::new(*kind, n, seed as u64).build().unwrap();
            if seed == 3 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
                s = s
                    .with_mass((0..n).map(|_| rng.gen_range(0.2..5.0)).collect())
                    .unwrap();
            }
            let g = build_grid(&s, DEFAULT_D0, 1000 + seed as u64).unwrap();
            let rep = verify_grid(&g, &s);
            grids += 1;
            if !rep.pass() {
                let bad: Vec<String> = rep
                    .checks
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| c.property.clone())
                    .collect();
                failures.push(format!("{kind:?} n={n} seed={seed}: {}", bad.join(", ")));
            }
        }
    }
    let detail = format!(
        "{grids} grids, {} failures{}",
        failures.len(),
        failures
            .first()
            .map(|f| format!(" ({f})"))
            .unwrap_or_default()
    );
    assert!(
        report(
            3,
            "dyadic grid certification",
            failures.is_empty(),
            &detail,
            start,
            30.0
        ),
        "{detail}"
    );
}

#[test]
fn criterion_4_cz_certificates() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = Vec::new();
    let (mut decomps, mut stacks, mut levels) = (0, 0, 0);
    for i in 0..200 {
        let s = random_space(&mut rng, 128);
        let n = s.len();
        let g = build_grid(&s, DEFAULT_D0, rng.gen()).unwrap();
        let sigma: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(rng.gen_range(-1.0..1.0)))
            .collect();
        let f: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    0.0
                } else {
                    rng.gen_range(0.0..4.0)
                }
            })
            .collect();
        let eta = rng.gen_range(0.0..0.7);
        let top = weighted_dyadic_maximal(&g, &s, eta, &sigma, &f)
            .unwrap()
            .values;
        let lo = top.iter().copied().fold(f64::INFINITY, f64::min).max(1e-12);
        let lam = lo * rng.gen_range(0.5f64..30.0);
        let d = cz_decompose(&g, &s, eta, &sigma, &f, lam).unwrap();
        let rep = cz_verify(&d, &g);
        decomps += 1;
        if !rep.pass() {
            failures.push(format!(
                "decomposition {i}: {:?}",
                rep.checks.iter().find(|c| !c.pass)
            ));
        }
        if i % 4 == 0 {
            // spikes: smooth f rarely has a height a^k between the root
            // average and the top
            let mut spiky = vec![0.0; n];
            for _ in 0..rng.gen_range(1..=3) {
                spiky[rng.gen_range(0..n)] = 10f64.powf(rng.gen_range(2.0..8.0));
            }
            let st = cz_stack(&g, &s, eta, &sigma, &spiky, None, None).unwrap();
            assert_eq!(st.a, 2.0 * st.c_cz);
            let rep = cz_verify_stack(&st, &g);
            stacks += 1;
            levels += st.levels.len();
            if !rep.pass() {
                failures.push(format!(
                    "stack {i}: {:?}",
                    rep.checks.iter().find(|c| !c.pass)
                ));
            }
        }
    }
    let pass = failures.is_empty() && decomps == 200 && stacks == 50 && levels * 2 >= stacks;
    let detail = format!(
        "{decomps} decompositions, {stacks} stacks ({levels} levels), {} violations{}",
        failures.len(),
        failures
            .first()
            .map(|f| format!(" ({f})"))
            .unwrap_or_default()
    );
    assert!(
        report(
            4,
            "calderón–zygmund certificates",
            pass,
            &detail,
            start,
            60.0
        ),
        "{detail}"
    );
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).unwrap()
}

/// Re-enumerates every ball `{y : d(c, y) < r}` over all centers and all
/// radii in the distance set (plus the whole space), sums exactly and rounds
/// once.
fn brute_maximal(s: &Space, eta: f64, f: &[f64]) -> Vec<f64> {
    let n = s.len();
    let mut best = vec![f64::NEG_INFINITY; n];
    for c in 0..n {
        let mut radii: Vec<f64> = (0..n).map(|y| s.dist(c, y)).filter(|&r| r > 0.0).collect();
        radii.push(f64::INFINITY);
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        for r in radii {
            let members: Vec<usize> = (0..n).filter(|&y| s.dist(c, y) < r).collect();
            let (mut num, mut den) = (BigRational::zero(), BigRational::zero());
            for &y in &members {
                num += exact(f[y].abs()) * exact(s.mass()[y]);
                den += exact(s.mass()[y]);
            }
            let (num, den) = (num.to_f64().unwrap(), den.to_f64().unwrap());
            let avg = if num == 0.0 {
                0.0
            } else {
                num * den.powf(eta - 1.0)
            };
            for &y in &members {
                best[y] = best[y].max(avg);
            }
        }
    }
    best
}

#[test]
fn criterion_5_maximal_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = Vec::new();
    for i in 0..100 {
        let s = random_space(&mut rng, 64);
        let n = s.len();
        // short mantissas keep every product f * mass exact in f64
        let mass: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(1024..65536) as f64 / 65536.0)
            .collect();
        let s = s.with_mass(mass).unwrap();
        let f: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    0.0
                } else {
                    rng.gen_range(1..1 << 20) as f64 / 1024.0
                }
            })
            .collect();
        let eta = if i % 3 == 0 {
            0.0
        } else {
            rng.gen_range(0.0..0.9)
        };
        let got = fractional_maximal(&s, eta, &f).unwrap().values;
        let want = brute_maximal(&s, eta, &f);
        if let Some(x) = (0..n).find(|&x| got[x] != want[x]) {
            mismatches.push(format!(
                "function {i}, point {x}: {} vs {}",
                got[x], want[x]
            ));
        }
    }
    // domination constants across refinements of the line
    let mut consts = Vec::new();
    for n in [32, 64, 128] {
        let s = SpaceGen::new(GeneratorKind::Line, n, 0).build().unwrap();
        let grids = build_grid_family(&s, 6, 7).unwrap();
        let mut frng = ChaCha8Rng::seed_from_u64(50);
        let mut family: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..n).map(|_| frng.gen_range(0.0..1.0)).collect())
            .collect();
        for k in 0..4 {
            family.push(
                (0..n)
                    .map(|x| if x * 4 / n == k { 1.0 } else { 0.0 })
                    .collect(),
            );
        }
        family.push((0..n).map(|x| if x == n / 3 { 1.0 } else { 0.0 }).collect());
        let (lo, hi) = domination_constants(&s, &grids, 0.25, &family).unwrap();
        consts.push((n, lo, hi));
    }
    let spread = |sel: fn(&(usize, f64, f64)) -> f64| {
        let v: Vec<f64> = consts.iter().map(sel).collect();
        v.iter().copied().fold(0.0, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let (s_lo, s_hi) = (spread(|c| c.1), spread(|c| c.2));
    let finite = consts
        .iter()
        .all(|c| c.1.is_finite() && c.2.is_finite() && c.1 > 0.0);
    let pass = mismatches.is_empty() && finite && s_lo <= 2.0 && s_hi <= 2.0;
    let detail = format!(
        "100 functions, {} mismatches{}; (c_low, c_high) per n: {}; spread x{s_lo:.3} / x{s_hi:.3}",
        mismatches.len(),
        mismatches
            .first()
            .map(|m| format!(" ({m})"))
            .unwrap_or_default(),
        consts
            .iter()
            .map(|(n, l, h)| format!("{n}: ({l:.4}, {h:.4})"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    assert!(
        report(5, "maximal operator oracle", pass, &detail, start, 120.0),
        "{detail}"
    );
}

#[test]
fn criterion_6_weight_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_dual: f64 = 0.0;
    for _ in 0..500 {
        let s = random_space(&mut rng, 24);
        let p = random_exponent(&mut rng, &s, false);
        let eta = if rng.gen_bool(0.3) {
            0.0
        } else {
            rng.gen_range(0.0..0.9 / p.p_plus())
        };
        let q = p.shifted(eta).unwrap();
        let w = random_weight(&mut rng, &s);
        let (a, b) = dual_constants(&s, &p, &q, &w, TOL).unwrap();
        worst_dual = worst_dual.max((a / b - 1.0).abs());
    }
    let mut unit_bad = Vec::new();
    for i in 0..200 {
        let s = random_space(&mut rng, 48);
        let pv = rng.gen_range(1.0..6.0);
        let eta = if i % 4 == 0 {
            0.0
        } else {
            rng.gen_range(0.0..0.95 / pv)
        };
        let p = Exponent::constant(pv, s.len()).unwrap();
        let q = p.shifted(eta).unwrap();
        let v = apq_constant(&s, &p, &q, &Weight::ones(s.len()), TOL)
            .unwrap()
            .value;
        if v != 1.0 {
            unit_bad.push(format!("p = {pv}, eta = {eta}: [1] = {v}"));
        }
    }
    // every weight of the verify-all corpus and of the sweep families
    let mut weights: Vec<(Space, ExponentSpec, f64, WeightSpec)> = default_corpus(0)
        .cases
        .into_iter()
        .filter_map(|c| match c {
            VerifyCase::Weight {
                space,
                p,
                eta,
                weight,
            } => Some((space.build().unwrap(), p, eta, weight)),
            _ => None,
        })
        .collect();
    for n in [32, 64] {
        let line = SpaceGen::new(GeneratorKind::Line, n, 0).build().unwrap();
        let two = ExponentSpec::Constant { value: 2.0 };
        let lh = ExponentSpec::LogHolder {
            p_inf: 2.0,
            amplitude: 0.5,
            base_point: 0,
        };
        weights.push((
            line.clone(),
            two.clone(),
            0.0,
            WeightSpec::Constant { value: 1.0 },
        ));
        weights.push((line.clone(), lh, 0.2, WeightSpec::Constant { value: 1.0 }));
        weights.push((
            line.clone(),
            two.clone(),
            0.0,
            WeightSpec::Power {
                a: 0.25,
                base_point: 0,
            },
        ));
        weights.push((
            line.clone(),
            two,
            0.0,
            WeightSpec::Power {
                a: 1.5,
                base_point: 0,
            },
        ));
    }
    let mut ainf_bad = Vec::new();
    let mut checked = 0;
    for (s, p, eta, w) in &weights {
        let p = p.resolve(s).unwrap();
        let q = p.shifted(*eta).unwrap();
        let w_ = w.resolve(s).unwrap();
        let apq = apq_constant(s, &p, &q, &w_, TOL).unwrap().value;
        if apq.is_finite() {
            checked += 1;
            let rec = derived_measures(s, &p, &q, &w_).unwrap();
            let ai = a_infty_diagnostics(s, &rec.w_atoms).unwrap();
            if !ai.is_finite() {
                ainf_bad.push(format!("{w:?} n={}: {ai:?}", s.len()));
            }
        }
    }
    let pass = worst_dual <= 1e-9 && unit_bad.is_empty() && ainf_bad.is_empty();
    let detail =
        format!(
        "duality max rel err {worst_dual:.2e} (500 cases); unit weight {} of 200 not exactly 1; \
         A-infinity fits finite for {}/{checked} weights{}",
        unit_bad.len(),
        checked - ainf_bad.len(),
        unit_bad.first().or(ainf_bad.first()).map(|m| format!(" ({m})")).unwrap_or_default()
    );
    assert!(
        report(6, "weight identities", pass, &detail, start, 120.0),
        "{detail}"
    );
}

#[test]
fn criterion_7_line_sweeps() {
    let start = Instant::now();
    let two = || ExponentSpec::Constant { value: 2.0 };
    let families = [
        (
            "unit, p = q = 2",
            two(),
            QSpec::Eta(0.0),
            WeightSpec::Constant { value: 1.0 },
            true,
        ),
        (
            "unit, log-Hölder p, eta = 0.2",
            ExponentSpec::LogHolder {
                p_inf: 2.0,
                amplitude: 0.5,
                base_point: 0,
            },
            QSpec::Eta(0.2),
            WeightSpec::Constant { value: 1.0 },
            true,
        ),
        (
            "mild |x|^0.25, p = q = 2",
            two(),
            QSpec::Eta(0.0),
            WeightSpec::Power {
                a: 0.25,
                base_point: 0,
            },
            true,
        ),
        (
            "failing |x|^1.5, p = q = 2",
            two(),
            QSpec::Eta(0.0),
            WeightSpec::Power {
                a: 1.5,
                base_point: 0,
            },
            false,
        ),
    ];
    let mut pass = true;
    let mut lines = Vec::new();
    for (name, p, q, w, stable) in families {
        let cfg = ExperimentConfig::sweep(GeneratorKind::Line, vec![32, 64, 128, 256], p, q, w);
        let (rep, _) = run_experiment(Command::Necessity, &cfg).unwrap();
        let t = &rep.trends;
        let ok_trend = if stable {
            t.strong == Trend::Stable && t.weak == Trend::Stable
        } else {
            t.apq == Trend::Exploding && t.strong == Trend::Exploding
        };
        let c_nec: Vec<f64> = rep.rows.iter().map(|r| r.c_nec).collect();
        let c_min = c_nec.iter().copied().fold(f64::INFINITY, f64::min);
        let bounded = rep
            .rows
            .iter()
            .all(|r| r.apq <= rep.c_nec_fitted * r.necessity_lower * (1.0 + 1e-12));
        let ok_nec = bounded && rep.c_nec_fitted <= 2.0 * c_min;
        pass &= ok_trend && ok_nec;
        let col = |f: fn(&fracmax::experiment::Row) -> f64| {
            rep.rows
                .iter()
                .map(|r| format!("{:.3}", f(r)))
                .collect::<Vec<_>>()
                .join(" ")
        };
        lines.push(format!(
            "{name}: apq [{}] {:?}, strong [{}] {:?}, weak [{}] {:?}, C_nec {:.3} (min {c_min:.3}) {}",
            col(|r| r.apq),
            t.apq,
            col(|r| r.strong_ratio),
            t.strong,
            col(|r| r.weak_ratio),
            t.weak,
            rep.c_nec_fitted,
            if ok_trend && ok_nec { "ok" } else { "FAILED" }
        ));
    }
    let detail = lines.join("; ");
    assert!(
        report(7, "line sweeps", pass, &detail, start, 600.0),
        "{detail}"
    );
}

#[test]
fn criterion_8_determinism() {
    let start = Instant::now();
    let corpus = default_corpus(11);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            serde_json::to_string_pretty(&verify_all(&corpus, 11, TOL).unwrap()).unwrap()
        })
    };
    let a = run(4);
    let b = run(4);
    let c = run(1);
    let cfg = ExperimentConfig::sweep(
        GeneratorKind::RandomMetric,
        vec![16, 32],
        ExponentSpec::LogHolder {
            p_inf: 2.0,
            amplitude: 0.4,
            base_point: 0,
        },
        QSpec::Eta(0.1),
        WeightSpec::Power {
            a: 0.3,
            base_point: 1,
        },
    );
    let sweep =
        || serde_json::to_string(&run_experiment(Command::Strong, &cfg).unwrap().0).unwrap();
    let (s1, s2) = (sweep(), sweep());
    let pass = a == b && a == c && s1 == s2;
    let detail = format!(
        "verify-all reports ({} bytes) identical twice: {}, identical on 1 thread: {}; sweep reports identical: {}",
        a.len(),
        a == b,
        a == c,
        s1 == s2
    );
    assert!(
        report(8, "determinism", pass, &detail, start, 60.0),
        "{detail}"
    );
}
