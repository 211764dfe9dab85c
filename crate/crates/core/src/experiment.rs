//! Generators, experiment configs and the sweep / verification drivers.
//!
//! "Bounded" and "unbounded" are operationalised on refinement sweeps: a
//! column is stable when every doubling of `n` grows it by less than
//! [`GROWTH_THRESHOLD`], and exploding when every doubling grows it by at
//! least that much over at least [`MIN_DOUBLINGS`] doublings. These are
//! artifact calibrations, not constants from the theory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::czd::{cz_decompose, cz_stack, cz_verify, cz_verify_stack};
use crate::exponent::{check_eta_relation, Exponent};
use crate::grid::{build_grid, verify_grid, DyadicGrid, GridDump, PropertyCheck};
use crate::io::{ExponentSpec, SpaceFile, WeightSpec};
use crate::maximal::{
    ball_average, fractional_maximal, operator_norm_estimate, operator_ratios, Witness,
};
use crate::norm::{holder_bound, luxemburg_norm, modular, weak_norm, weighted_norm};
use crate::space::{BallRef, Space};
use crate::weights::{
    a_infty_diagnostics, apq_constant, derived_measures, dual_constants, extremal_test_functions,
    for_each_subset, subset_bound_case, TestFunction, Weight,
};
use crate::{exec, Error, Result};

pub const GROWTH_THRESHOLD: f64 = 1.5;
pub const MIN_DOUBLINGS: usize = 3;
/// Allowed max/min spread of the fitted necessity constant across rows.
pub const C_NEC_BAND: f64 = 2.0;
pub const DEFAULT_SIZES: [usize; 4] = [32, 64, 128, 256];
pub const DEFAULT_BALL_INDICATORS: usize = 48;
pub const DEFAULT_RANDOM_FUNCTIONS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Line,
    TorusGrid,
    CantorLike,
    RandomMetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceGen {
    pub kind: GeneratorKind,
    pub n: usize,
    pub seed: u64,
}

impl SpaceGen {
    pub fn new(kind: GeneratorKind, n: usize, seed: u64) -> Self {
        Self { kind, n, seed }
    }

    pub fn file(&self) -> Result<SpaceFile> {
        generate_space(self.kind, self.n, self.seed)
    }

    pub fn build(&self) -> Result<Space> {
        self.file()?.to_space()
    }
}

/// Builds a space file. `line`: `n` atoms of mass `1/n` at `i/n`;
/// `torus-grid`: a `sqrt(n) x sqrt(n)` grid on the flat unit torus;
/// `cantor-like`: the `n = 2^L` left endpoints of the level-`L` middle-thirds
/// intervals; `random-metric`: `|x - y|^{1.5}` on random planar points with a
/// symmetric multiplicative noise in `[1, 1.25]`, snapped so that `A0 <= 2`.
pub fn generate_space(kind: GeneratorKind, n: usize, seed: u64) -> Result<SpaceFile> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let uniform = vec![1.0 / n as f64; n];
    match kind {
        GeneratorKind::Line => Ok(SpaceFile::from_coords(
            (0..n).map(|i| vec![i as f64 / n as f64]).collect(),
            uniform,
        )),
        GeneratorKind::TorusGrid => {
            let m = (n as f64).sqrt().round() as usize;
            if m * m != n {
                return Err(Error::InvalidParameter(format!(
                    "torus-grid needs a square n, got {n}"
                )));
            }
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|i| ((i % m) as f64 / m as f64, (i / m) as f64 / m as f64))
                .collect();
            let wrap = |d: f64| d.abs().min(1.0 - d.abs());
            let dist = pts
                .iter()
                .map(|a| {
                    pts.iter()
                        .map(|b| wrap(a.0 - b.0).hypot(wrap(a.1 - b.1)))
                        .collect()
                })
                .collect();
            Ok(SpaceFile::from_dist(dist, uniform))
        }
        GeneratorKind::CantorLike => {
            if !n.is_power_of_two() {
                return Err(Error::InvalidParameter(format!(
                    "cantor-like needs n = 2^L, got {n}"
                )));
            }
            let levels = n.trailing_zeros();
            let coords = (0..n)
                .map(|i| {
                    let x: f64 = (0..levels)
                        .filter(|b| i >> (levels - 1 - b) & 1 == 1)
                        .map(|b| 2.0 * 3f64.powi(-(b as i32 + 1)))
                        .sum();
                    vec![x]
                })
                .collect();
            Ok(SpaceFile::from_coords(coords, uniform))
        }
        GeneratorKind::RandomMetric => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
            let mut d = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let e = (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1).max(1e-9);
                    let v = e.powf(1.5) * rng.gen_range(1.0..1.25);
                    d[i][j] = v;
                    d[j][i] = v;
                }
            }
            // snap quasi-triangle violations until A0 <= 2
            loop {
                let mut changed = false;
                for i in 0..n {
                    for j in (i + 1)..n {
                        for k in 0..n {
                            if k != i && k != j {
                                let cap = 2.0 * (d[i][k] + d[k][j]);
                                if d[i][j] > cap {
                                    d[i][j] = cap;
                                    d[j][i] = cap;
                                    changed = true;
                                }
                            }
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            let mass: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
            let total: f64 = mass.iter().sum();
            let file = SpaceFile::from_dist(d, mass.iter().map(|m| m / total).collect());
            let space = file.to_space()?;
            if space.a0() > 2.0 {
                return Err(Error::InvalidSpace(format!(
                    "generated A0 = {} exceeds 2",
                    space.a0()
                )));
            }
            Ok(file)
        }
    }
}

/// Either an explicit `q` or the shift `1/q = 1/p - eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QSpec {
    Exponent(ExponentSpec),
    Eta(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceSource {
    /// A single space read from a file.
    File {
        path: String,
        sha256: String,
        space: SpaceFile,
    },
    /// A refinement sweep over generated spaces.
    Generated {
        kind: GeneratorKind,
        sizes: Vec<usize>,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub space: SpaceSource,
    pub p: ExponentSpec,
    pub q: QSpec,
    pub weight: WeightSpec,
    pub grids: usize,
    pub seed: u64,
    pub tol: f64,
    pub ball_indicators: usize,
    pub random_functions: usize,
    pub inputs: Vec<InputFile>,
}

impl ExperimentConfig {
    pub fn sweep(
        kind: GeneratorKind,
        sizes: Vec<usize>,
        p: ExponentSpec,
        q: QSpec,
        weight: WeightSpec,
    ) -> Self {
        Self {
            space: SpaceSource::Generated {
                kind,
                sizes,
                seed: 0,
            },
            p,
            q,
            weight,
            grids: crate::grid::DEFAULT_FAMILY_SIZE,
            seed: 0,
            tol: crate::norm::DEFAULT_TOL,
            ball_indicators: DEFAULT_BALL_INDICATORS,
            random_functions: DEFAULT_RANDOM_FUNCTIONS,
            inputs: Vec::new(),
        }
    }

    pub fn spaces(&self) -> Result<Vec<Space>> {
        match &self.space {
            SpaceSource::File { space, .. } => Ok(vec![space.to_space()?]),
            SpaceSource::Generated { kind, sizes, seed } => {
                if sizes.is_empty() {
                    return Err(Error::Empty("sizes"));
                }
                sizes
                    .iter()
                    .map(|&n| generate_space(*kind, n, *seed)?.to_space())
                    .collect()
            }
        }
    }

    /// Resolves `(p, q, w, eta)` on a space, validating the eta relation.
    pub fn resolve(&self, space: &Space) -> Result<(Exponent, Exponent, Weight, f64)> {
        let p = self.p.resolve(space)?;
        let q = match &self.q {
            QSpec::Exponent(spec) => spec.resolve(space)?,
            QSpec::Eta(eta) => p.shifted(*eta)?,
        };
        let eta = check_eta_relation(&p, &q)?;
        let w = self.weight.resolve(space)?;
        Ok((p, q, w, eta))
    }

    /// Checks everything that can be checked before a run.
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol {} must be positive",
                self.tol
            )));
        }
        if self.grids == 0 {
            return Err(Error::InvalidParameter("grids must be at least 1".into()));
        }
        for s in self.spaces()? {
            let (p, ..) = self.resolve(&s)?;
            p.conjugate()?;
        }
        Ok(())
    }
}

/// Where a set-valued quantity is attained, without the full member list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSummary {
    pub center: usize,
    pub radius: f64,
    pub size: usize,
    pub measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub n: usize,
    pub eta: f64,
    pub apq: f64,
    pub apq_witness: BallSummary,
    pub strong_ratio: f64,
    pub strong_witness: String,
    pub weak_ratio: f64,
    pub weak_witness: String,
    /// Largest weak ratio over the extremal family at the witness ball.
    pub necessity_lower: f64,
    pub necessity_witness: String,
    /// `apq / necessity_lower`.
    pub c_nec: f64,
    pub family_size: usize,
}

/// Ball indicators (a deterministic stride through the distinct balls), the
/// extremal family at `witness`, and seeded random nonnegative functions.
pub fn test_family(
    space: &Space,
    p: &Exponent,
    w: &Weight,
    witness: &crate::space::Ball,
    ball_indicators: usize,
    random_functions: usize,
    seed: u64,
) -> Result<Vec<TestFunction>> {
    let n = space.len();
    let mut out = extremal_test_functions(space, p, w, witness)?;
    let balls = space.balls();
    let take = ball_indicators.min(balls.len());
    for i in 0..take {
        let b = &balls[i * balls.len() / take];
        let mut f = vec![0.0; n];
        for x in space.members(b) {
            f[x] = 1.0;
        }
        out.push(TestFunction {
            label: format!("ball c={} size={}", b.center, b.len),
            values: f,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).rotate_left(32));
    for i in 0..random_functions {
        let f: Vec<f64> = if i % 2 == 0 {
            (0..n).map(|_| rng.gen::<f64>().powi(3)).collect()
        } else {
            // sparse: a few random atoms
            let mut f = vec![0.0; n];
            for _ in 0..3 {
                f[rng.gen_range(0..n)] = rng.gen_range(0.1..1.0);
            }
            f
        };
        out.push(TestFunction {
            label: format!("random {i}"),
            values: f,
        });
    }
    Ok(out)
}

/// One refinement row: weight constant, operator ratios and the necessity
/// lower bound on a single space.
pub fn run_row(space: &Space, cfg: &ExperimentConfig) -> Result<Row> {
    let (p, q, w, eta) = cfg.resolve(space)?;
    let apq = apq_constant(space, &p, &q, &w, cfg.tol)?;
    let family = test_family(
        space,
        &p,
        &w,
        &apq.witness,
        cfg.ball_indicators,
        cfg.random_functions,
        cfg.seed,
    )?;
    let values: Vec<Vec<f64>> = family.iter().map(|t| t.values.clone()).collect();
    let est = operator_norm_estimate(space, &p, &q, &w, eta, &values, cfg.tol)?;
    let ext = extremal_test_functions(space, &p, &w, &apq.witness)?;
    let ext_values: Vec<Vec<f64>> = ext.iter().map(|t| t.values.clone()).collect();
    let ratios = operator_ratios(space, &p, &q, &w, eta, &ext_values, cfg.tol)?;
    let (mut lower, mut lw) = (0.0, 0);
    for (i, r) in ratios.iter().enumerate() {
        if let Some((_, weak)) = r {
            if *weak > lower {
                lower = *weak;
                lw = i;
            }
        }
    }
    Ok(Row {
        n: space.len(),
        eta,
        apq: apq.value,
        apq_witness: BallSummary {
            center: apq.witness.center,
            radius: apq.witness.radius,
            size: apq.witness.members.len(),
            measure: apq.witness.measure,
        },
        strong_ratio: est.strong_ratio,
        strong_witness: family[est.strong_witness].label.clone(),
        weak_ratio: est.weak_ratio,
        weak_witness: family[est.weak_witness].label.clone(),
        necessity_lower: lower,
        necessity_witness: ext[lw].label.clone(),
        c_nec: apq.value / lower,
        family_size: family.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Stable,
    Exploding,
    Mixed,
    /// Fewer than two rows.
    Single,
}

pub fn growth_factors(col: &[f64]) -> Vec<f64> {
    col.windows(2).map(|w| w[1] / w[0]).collect()
}

pub fn classify(col: &[f64]) -> Trend {
    let g = growth_factors(col);
    if g.is_empty() {
        Trend::Single
    } else if g.iter().all(|&x| x < GROWTH_THRESHOLD) {
        Trend::Stable
    } else if g.len() >= MIN_DOUBLINGS && g.iter().all(|&x| x >= GROWTH_THRESHOLD) {
        Trend::Exploding
    } else {
        Trend::Mixed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub rule: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub growth_threshold: f64,
    pub min_doublings: usize,
    pub c_nec_band: f64,
    pub note: String,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            growth_threshold: GROWTH_THRESHOLD,
            min_doublings: MIN_DOUBLINGS,
            c_nec_band: C_NEC_BAND,
            note: "artifact-level calibrations; the theory gives no quantitative thresholds".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trends {
    pub apq: Trend,
    pub strong: Trend,
    pub weak: Trend,
    pub c_nec: Trend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Strong,
    Weak,
    Necessity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub command: Command,
    pub config: ExperimentConfig,
    pub calibration: Calibration,
    pub rows: Vec<Row>,
    pub trends: Trends,
    /// Largest `apq / L` over the rows.
    pub c_nec_fitted: f64,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub rows: Vec<(usize, f64)>,
    pub total_seconds: f64,
}

fn coherence(rule: &str, apq: Trend, op: Trend) -> Verdict {
    let pass = matches!(
        (apq, op),
        (Trend::Stable, Trend::Stable) | (Trend::Exploding, Trend::Exploding) | (_, Trend::Single)
    );
    Verdict {
        rule: rule.into(),
        pass,
        detail: format!("apq {apq:?}, operator {op:?}"),
    }
}

/// Runs every row of the sweep and evaluates the verdicts for `command`.
pub fn run_experiment(
    command: Command,
    cfg: &ExperimentConfig,
) -> Result<(ExperimentReport, Timings)> {
    let start = std::time::Instant::now();
    cfg.validate()?;
    let spaces = cfg.spaces()?;
    let mut rows = Vec::with_capacity(spaces.len());
    let mut times = Vec::with_capacity(spaces.len());
    for s in &spaces {
        let t = std::time::Instant::now();
        rows.push(run_row(s, cfg)?);
        times.push((s.len(), t.elapsed().as_secs_f64()));
    }
    let col = |f: fn(&Row) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let trends = Trends {
        apq: classify(&col(|r| r.apq)),
        strong: classify(&col(|r| r.strong_ratio)),
        weak: classify(&col(|r| r.weak_ratio)),
        c_nec: classify(&col(|r| r.c_nec)),
    };
    let c_nec = col(|r| r.c_nec);
    let c_nec_fitted = c_nec.iter().copied().fold(0.0, f64::max);
    let c_nec_min = c_nec.iter().copied().fold(f64::INFINITY, f64::min);
    let mut verdicts = vec![Verdict {
        rule: "weak ratio <= strong ratio in every row".into(),
        pass: rows
            .iter()
            .all(|r| r.weak_ratio <= r.strong_ratio * (1.0 + 1e-12)),
        detail: String::new(),
    }];
    match command {
        Command::Strong => verdicts.push(coherence(
            "strong ratio follows the weight constant",
            trends.apq,
            trends.strong,
        )),
        Command::Weak => verdicts.push(coherence(
            "weak ratio follows the weight constant",
            trends.apq,
            trends.weak,
        )),
        Command::Necessity => {
            verdicts.push(Verdict {
                rule: "apq <= C_nec * L in every row".into(),
                pass: rows
                    .iter()
                    .all(|r| r.apq <= c_nec_fitted * r.necessity_lower * (1.0 + 1e-12)),
                detail: format!("C_nec = {c_nec_fitted}"),
            });
            verdicts.push(Verdict {
                rule: format!("C_nec stable within x{C_NEC_BAND}"),
                pass: c_nec_fitted <= C_NEC_BAND * c_nec_min,
                detail: format!("C_nec range [{c_nec_min}, {c_nec_fitted}]"),
            });
        }
    }
    let pass = verdicts.iter().all(|v| v.pass);
    let report = ExperimentReport {
        command,
        config: cfg.clone(),
        calibration: Calibration::default(),
        rows,
        trends,
        c_nec_fitted,
        verdicts,
        pass,
    };
    Ok((
        report,
        Timings {
            rows: times,
            total_seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Sweep table as CSV: one line per row.
pub fn rows_csv(rows: &[Row]) -> String {
    let mut s = String::from("n,eta,apq,strong_ratio,weak_ratio,necessity_lower,c_nec\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n, r.eta, r.apq, r.strong_ratio, r.weak_ratio, r.necessity_lower, r.c_nec
        ));
    }
    s
}

// ---------------------------------------------------------------- verify-all

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum VerifyCase {
    /// Properties (1)–(5) of a generated grid.
    Grid { space: SpaceGen, seed: u64 },
    /// A grid supplied as a dump.
    InjectedGrid { space: SpaceFile, grid: GridDump },
    /// Random decompositions and stacks certified from raw data.
    Cz {
        space: SpaceGen,
        seed: u64,
        decompositions: usize,
        stacks: usize,
    },
    /// Hölder with constant 4, the unit-ball property and the norm–modular
    /// inequalities on random functions.
    Norm {
        space: SpaceGen,
        seed: u64,
        p: ExponentSpec,
        functions: usize,
    },
    /// Duality, the unit weight, the subset bound with 16 and finiteness of
    /// the A-infinity fits of `W`.
    Weight {
        space: SpaceGen,
        p: ExponentSpec,
        eta: f64,
        weight: WeightSpec,
    },
    /// Ball maximal values and witnesses against a re-enumeration.
    Maximal {
        space: SpaceGen,
        seed: u64,
        eta: f64,
        functions: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub cases: Vec<VerifyCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case: String,
    pub checks: Vec<PropertyCheck>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub results: Vec<CaseResult>,
    pub pass: bool,
}

/// The corpus run by `verify-all` when none is given.
pub fn default_corpus(seed: u64) -> Corpus {
    use GeneratorKind::*;
    let lh = |p_inf: f64, amplitude: f64| ExponentSpec::LogHolder {
        p_inf,
        amplitude,
        base_point: 0,
    };
    let mut cases = Vec::new();
    for (kind, n) in [
        (Line, 8),
        (Line, 32),
        (TorusGrid, 36),
        (CantorLike, 32),
        (RandomMetric, 24),
    ] {
        for s in 0..2 {
            cases.push(VerifyCase::Grid {
                space: SpaceGen::new(kind, n, seed),
                seed: seed.wrapping_add(s),
            });
        }
    }
    for (kind, n) in [(Line, 32), (RandomMetric, 20), (CantorLike, 16)] {
        cases.push(VerifyCase::Cz {
            space: SpaceGen::new(kind, n, seed),
            seed,
            decompositions: 8,
            stacks: 3,
        });
    }
    cases.push(VerifyCase::Norm {
        space: SpaceGen::new(Line, 16, seed),
        seed,
        p: lh(2.0, 0.5),
        functions: 20,
    });
    cases.push(VerifyCase::Norm {
        space: SpaceGen::new(RandomMetric, 12, seed),
        seed,
        p: ExponentSpec::Constant { value: 1.5 },
        functions: 20,
    });
    cases.push(VerifyCase::Weight {
        space: SpaceGen::new(Line, 16, seed),
        p: ExponentSpec::Constant { value: 2.0 },
        eta: 0.0,
        weight: WeightSpec::Constant { value: 1.0 },
    });
    cases.push(VerifyCase::Weight {
        space: SpaceGen::new(Line, 16, seed),
        p: lh(1.8, 0.3),
        eta: 0.2,
        weight: WeightSpec::Power {
            a: 0.25,
            base_point: 0,
        },
    });
    cases.push(VerifyCase::Weight {
        space: SpaceGen::new(TorusGrid, 16, seed),
        p: lh(2.5, -0.4),
        eta: 0.1,
        weight: WeightSpec::Power {
            a: -0.3,
            base_point: 5,
        },
    });
    for (kind, n, eta) in [
        (Line, 24, 0.0),
        (RandomMetric, 16, 0.3),
        (CantorLike, 16, 0.5),
    ] {
        cases.push(VerifyCase::Maximal {
            space: SpaceGen::new(kind, n, seed),
            seed,
            eta,
            functions: 6,
        });
    }
    Corpus { cases }
}

fn pc(property: &str, witness: Option<String>) -> PropertyCheck {
    PropertyCheck {
        property: property.into(),
        pass: witness.is_none(),
        witness,
    }
}

fn random_fn(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.3) {
                0.0
            } else {
                rng.gen::<f64>().powi(2) * 4.0
            }
        })
        .collect()
}

fn run_case(case: &VerifyCase, tol: f64) -> Result<CaseResult> {
    let (name, checks) = match case {
        VerifyCase::Grid { space, seed } => {
            let s = space.build()?;
            let g = build_grid(&s, crate::grid::DEFAULT_D0, *seed)?;
            (
                format!("grid {:?} n={} seed={seed}", space.kind, space.n),
                verify_grid(&g, &s).checks,
            )
        }
        VerifyCase::InjectedGrid { space, grid } => {
            let s = space.to_space()?;
            let g = DyadicGrid::from_dump(&s, grid)?;
            (
                format!("injected grid n={}", s.len()),
                verify_grid(&g, &s).checks,
            )
        }
        VerifyCase::Cz {
            space,
            seed,
            decompositions,
            stacks,
        } => {
            let s = space.build()?;
            let n = s.len();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut checks: Vec<PropertyCheck> = Vec::new();
            let mut merge = |new: Vec<PropertyCheck>| {
                for c in new {
                    match checks.iter_mut().find(|m| m.property == c.property) {
                        Some(m) if m.pass && !c.pass => *m = c,
                        Some(_) => {}
                        None => checks.push(c),
                    }
                }
            };
            for i in 0..(*decompositions).max(*stacks) {
                let g = build_grid(&s, crate::grid::DEFAULT_D0, rng.gen())?;
                let sigma: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..5.0)).collect();
                let f = random_fn(&mut rng, n);
                let eta = rng.gen_range(0.0..0.7);
                if i < *decompositions {
                    let top = crate::maximal::weighted_dyadic_maximal(&g, &s, eta, &sigma, &f)?;
                    let root = top.values.iter().copied().fold(f64::INFINITY, f64::min);
                    let lam = root.max(1e-300) * rng.gen_range(1.0f64..30.0);
                    merge(cz_verify(&cz_decompose(&g, &s, eta, &sigma, &f, lam)?, &g).checks);
                }
                if i < *stacks {
                    merge(
                        cz_verify_stack(&cz_stack(&g, &s, eta, &sigma, &f, None, None)?, &g).checks,
                    );
                }
            }
            (format!("cz {:?} n={}", space.kind, space.n), checks)
        }
        VerifyCase::Norm {
            space,
            seed,
            p,
            functions,
        } => {
            let s = space.build()?;
            let p = p.resolve(&s)?;
            let n = s.len();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let (mut w_h, mut w_u, mut w_b) = (None, None, None);
            for i in 0..*functions {
                let f = random_fn(&mut rng, n);
                let g = random_fn(&mut rng, n);
                let (l, r) = holder_bound(&s, &p, &f, &g, tol)?;
                if l > r {
                    w_h.get_or_insert(format!("function {i}: {l} > {r}"));
                }
                let nf = luxemburg_norm(&s, &p, &f, tol)?;
                if nf > 0.0 {
                    let unit: Vec<f64> = f.iter().map(|v| v / nf).collect();
                    let m = modular(&s, &p, &unit)?;
                    if (m - 1.0).abs() > 1e-9 {
                        w_u.get_or_insert(format!("function {i}: rho(f/||f||) = {m}"));
                    }
                    // rho^{1/p_-} and rho^{1/p_+} bracket the norm
                    let rho = modular(&s, &p, &f)?;
                    let (a, b) = (rho.powf(1.0 / p.p_minus()), rho.powf(1.0 / p.p_plus()));
                    let (lo, hi) = (a.min(b), a.max(b));
                    if nf < lo * (1.0 - 1e-9) || nf > hi * (1.0 + 1e-9) {
                        w_b.get_or_insert(format!("function {i}: norm {nf} outside [{lo}, {hi}]"));
                    }
                }
            }
            (
                format!("norm {:?} n={}", space.kind, space.n),
                vec![
                    pc("hölder with constant 4", w_h),
                    pc("unit ball", w_u),
                    pc("norm-modular bracket", w_b),
                ],
            )
        }
        VerifyCase::Weight {
            space,
            p,
            eta,
            weight,
        } => {
            let s = space.build()?;
            let p = p.resolve(&s)?;
            let q = p.shifted(*eta)?;
            let w = weight.resolve(&s)?;
            let (a, b) = dual_constants(&s, &p, &q, &w, tol)?;
            let w_dual = ((a / b - 1.0).abs() > 1e-9).then(|| format!("{a} vs {b}"));
            let one = apq_constant(&s, &p, &q, &Weight::ones(s.len()), tol)?.value;
            let constant = p.values().iter().all(|&v| v == p.values()[0]);
            let w_unit = if constant {
                (one != 1.0).then(|| format!("[1] = {one}"))
            } else {
                (!one.is_finite()).then(|| format!("[1] = {one}"))
            };
            let mut w_sub = None;
            let balls = s.balls();
            for (i, bref) in balls.iter().enumerate() {
                let members: Vec<usize> = s.members(bref).collect();
                for_each_subset(&members, i as u64, |e| {
                    let (l, r) = subset_bound_case(&s, &q, &w, *eta, a, &members, e, tol);
                    if l > r && w_sub.is_none() {
                        w_sub = Some(format!("ball {i}, |E| = {}: {l} > {r}", e.len()));
                    }
                });
            }
            let rec = derived_measures(&s, &p, &q, &w)?;
            let ai = a_infty_diagnostics(&s, &rec.w_atoms)?;
            let w_ai = (a.is_finite() && !ai.is_finite()).then(|| format!("{ai:?}"));
            (
                format!("weight {:?} n={} {weight:?}", space.kind, space.n),
                vec![
                    pc("duality", w_dual),
                    pc("unit weight", w_unit),
                    pc("subset bound with 16", w_sub),
                    pc("W in A-infinity", w_ai),
                ],
            )
        }
        VerifyCase::Maximal {
            space,
            seed,
            eta,
            functions,
        } => {
            let s = space.build()?;
            let n = s.len();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let (mut w_val, mut w_wit) = (None, None);
            for i in 0..*functions {
                let f = random_fn(&mut rng, n);
                let r = fractional_maximal(&s, *eta, &f)?;
                for x in 0..n {
                    let brute = s
                        .balls()
                        .iter()
                        .filter(|b| s.dist(b.center, x) < b.radius)
                        .map(|b| ball_average(&s, b, *eta, &f))
                        .fold(f64::NEG_INFINITY, f64::max);
                    if brute != r.values[x] {
                        w_val.get_or_insert(format!(
                            "function {i}, point {x}: {} vs {brute}",
                            r.values[x]
                        ));
                    }
                    if let Witness::Ball {
                        center,
                        len,
                        radius,
                    } = r.witness[x]
                    {
                        let b = BallRef {
                            center,
                            len,
                            radius,
                            measure: 0.0,
                        };
                        if !(s.dist(center, x) < radius)
                            || ball_average(&s, &b, *eta, &f) != r.values[x]
                        {
                            w_wit.get_or_insert(format!("function {i}, point {x}"));
                        }
                    }
                }
            }
            (
                format!("maximal {:?} n={} eta={eta}", space.kind, space.n),
                vec![pc("values", w_val), pc("witnesses", w_wit)],
            )
        }
    };
    let pass = checks.iter().all(|c| c.pass);
    Ok(CaseResult {
        case: name,
        checks,
        pass,
    })
}

/// Runs every case; cases are independent and run concurrently.
pub fn verify_all(corpus: &Corpus, seed: u64, tol: f64) -> Result<VerifyReport> {
    if corpus.cases.is_empty() {
        return Err(Error::NoCases);
    }
    let results = exec::map_slice(&corpus.cases, |c| run_case(c, tol))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let pass = results.iter().all(|r| r.pass);
    Ok(VerifyReport {
        seed,
        results,
        pass,
    })
}

/// Convenience for the weak-type check of a single function.
pub fn weak_and_strong(
    space: &Space,
    p: &Exponent,
    q: &Exponent,
    w: &Weight,
    eta: f64,
    f: &[f64],
    tol: f64,
) -> Result<(f64, f64)> {
    let mf = fractional_maximal(space, eta, f)?.values;
    let den = weighted_norm(space, p, w, f, tol)?;
    Ok((
        weak_norm(space, q, w, &mf, tol)? / den,
        weighted_norm(space, q, w, &mf, tol)? / den,
    ))
}
