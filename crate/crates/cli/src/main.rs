//! `fracmax` command-line driver.
//!
//! Exit codes: 0 pass, 1 verdict failure, 2 input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fracmax::czd::{cz_decompose, cz_stack, cz_verify, cz_verify_stack};
use fracmax::experiment::{
    default_corpus, generate_space, rows_csv, run_experiment, verify_all, Command as Exp, Corpus,
    ExperimentConfig, GeneratorKind, InputFile, QSpec, SpaceSource, VerifyCase,
    DEFAULT_BALL_INDICATORS, DEFAULT_RANDOM_FUNCTIONS,
};
use fracmax::grid::{build_grid, build_grid_family, cover_constant, GridDump};
use fracmax::io::{file_hash, read_json, write_json, ExponentSpec, SpaceFile, WeightSpec};
use fracmax::maximal::{dyadic_fractional_maximal, fractional_maximal, Witness};
use fracmax::norm::{luxemburg_norm, modular, weak_norm, weighted_norm};
use fracmax::weights::{
    a_infty_diagnostics, apq_constant, apq_dyadic_constant, derived_measures, dual_constants,
    specialized_constants,
};
use fracmax::{Exponent, Space, Weight};

#[derive(Parser)]
#[command(
    name = "fracmax",
    version,
    about = "Fractional maximal operators on weighted variable Lebesgue spaces"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write space, exponent and weight files.
    Generate(GenerateArgs),
    /// Modular, Luxemburg, weighted and weak norms of a function.
    Norm(RunArgs),
    /// Ball and dyadic fractional maximal functions.
    Maximal(RunArgs),
    /// Weight constants, duality, derived measures and A-infinity fits.
    Weights(RunArgs),
    /// Calderón–Zygmund decomposition at one height or a stack of heights.
    Czd(CzdArgs),
    /// Strong-type refinement sweep.
    Strong(RunArgs),
    /// Weak-type refinement sweep.
    Weak(RunArgs),
    /// Necessity experiment at the worst ball.
    Necessity(RunArgs),
    /// Run every invariant suite on a corpus.
    VerifyAll(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Line,
    TorusGrid,
    CantorLike,
    RandomMetric,
}

impl From<Kind> for GeneratorKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Line => GeneratorKind::Line,
            Kind::TorusGrid => GeneratorKind::TorusGrid,
            Kind::CantorLike => GeneratorKind::CantorLike,
            Kind::RandomMetric => GeneratorKind::RandomMetric,
        }
    }
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    n: usize,
    /// Log-Hölder exponent parameters; a constant exponent when amplitude is 0.
    #[arg(long, default_value_t = 2.0)]
    p_inf: f64,
    #[arg(long, default_value_t = 0.0)]
    amplitude: f64,
    /// Power weight exponent `a` in `max(d(x0, x), d_min)^a`.
    #[arg(long, default_value_t = 0.0)]
    power: f64,
    #[arg(long, default_value_t = 0)]
    base_point: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with_all = ["kind", "sizes"])]
    space: Option<PathBuf>,
    /// Generator for refinement sweeps (used when --space is absent).
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    p: Option<PathBuf>,
    #[arg(long, conflicts_with = "eta")]
    q: Option<PathBuf>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    weight: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    grids: usize,
    /// Function values (JSON array); defaults to a seeded random function.
    #[arg(long)]
    function: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BALL_INDICATORS)]
    ball_indicators: usize,
    #[arg(long, default_value_t = DEFAULT_RANDOM_FUNCTIONS)]
    random_functions: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CzdArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Height of a single decomposition.
    #[arg(long, conflicts_with = "stack")]
    lambda: Option<f64>,
    /// Decompose at heights a^k instead.
    #[arg(long)]
    stack: bool,
    /// Stack base; defaults to 2 C_CZ.
    #[arg(long, requires = "stack")]
    a: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Corpus file (JSON `{"cases": [...]}`); defaults to the built-in corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Add a grid dump (with --space) to the corpus.
    #[arg(long, requires = "space")]
    grid: Option<PathBuf>,
    #[arg(long)]
    space: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

/// Input problems map to exit code 2; everything else is a verdict.
struct InputError(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.into())
    }
}

type Res<T> = std::result::Result<T, InputError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(InputError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Res<bool> {
    match cli.cmd {
        Cmd::Generate(a) => generate(a),
        Cmd::Norm(a) => norm(a),
        Cmd::Maximal(a) => maximal(a),
        Cmd::Weights(a) => weights(a),
        Cmd::Czd(a) => czd(a),
        Cmd::Strong(a) => sweep(Exp::Strong, a),
        Cmd::Weak(a) => sweep(Exp::Weak, a),
        Cmd::Necessity(a) => sweep(Exp::Necessity, a),
        Cmd::VerifyAll(a) => verify(a),
    }
}

fn emit<T: Serialize>(common: &Common, name: &str, value: &T, csv: Option<String>) -> Res<()> {
    let text = match (common.format, csv) {
        (Format::Csv, Some(c)) => c,
        (Format::Csv, None) => {
            return Err(anyhow!("no CSV form for {name}; use --format json").into())
        }
        (Format::Json, _) => {
            let mut s = serde_json::to_string_pretty(value)?;
            s.push('\n');
            s
        }
    };
    match &common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let ext = match common.format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            std::fs::write(dir.join(format!("{name}.{ext}")), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn generate(a: GenerateArgs) -> Res<bool> {
    let seed = a.common.seed.unwrap_or(0);
    let file = generate_space(a.kind.into(), a.n, seed)?;
    let space = file.to_space()?;
    let p = if a.amplitude == 0.0 {
        ExponentSpec::Constant { value: a.p_inf }
    } else {
        ExponentSpec::LogHolder {
            p_inf: a.p_inf,
            amplitude: a.amplitude,
            base_point: a.base_point,
        }
    };
    p.resolve(&space)?;
    let w = if a.power == 0.0 {
        WeightSpec::Constant { value: 1.0 }
    } else {
        WeightSpec::Power {
            a: a.power,
            base_point: a.base_point,
        }
    };
    w.resolve(&space)?;
    let dir = a.common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    write_json(&dir.join("space.json"), &file)?;
    write_json(&dir.join("p.json"), &p)?;
    write_json(&dir.join("weight.json"), &w)?;
    Ok(true)
}

struct Inputs {
    space: Space,
    p: Exponent,
    q: Exponent,
    w: Weight,
    eta: f64,
}

fn load_space(path: &Path) -> Res<(SpaceFile, Space)> {
    let file: SpaceFile = read_json(path).with_context(|| format!("reading {}", path.display()))?;
    let space = file
        .to_space()
        .with_context(|| format!("validating {}", path.display()))?;
    Ok((file, space))
}

fn exponent_spec(path: &Option<PathBuf>) -> Res<ExponentSpec> {
    match path {
        Some(p) => Ok(read_json(p).with_context(|| format!("reading {}", p.display()))?),
        None => Ok(ExponentSpec::Constant { value: 2.0 }),
    }
}

fn weight_spec(path: &Option<PathBuf>) -> Res<WeightSpec> {
    match path {
        Some(p) => Ok(read_json(p).with_context(|| format!("reading {}", p.display()))?),
        None => Ok(WeightSpec::Constant { value: 1.0 }),
    }
}

fn q_spec(a: &RunArgs) -> Res<QSpec> {
    Ok(match (&a.q, a.eta) {
        (Some(q), _) => {
            QSpec::Exponent(read_json(q).with_context(|| format!("reading {}", q.display()))?)
        }
        (None, Some(eta)) => QSpec::Eta(eta),
        (None, None) => QSpec::Eta(0.0),
    })
}

fn config(a: &RunArgs) -> Res<ExperimentConfig> {
    let mut inputs = Vec::new();
    let mut record = |role: &str, path: &Option<PathBuf>| -> Res<()> {
        if let Some(p) = path {
            let sha256 = file_hash(p).with_context(|| format!("reading {}", p.display()))?;
            inputs.push(InputFile {
                role: role.into(),
                path: p.display().to_string(),
                sha256,
            });
        }
        Ok(())
    };
    record("space", &a.space)?;
    record("p", &a.p)?;
    record("q", &a.q)?;
    record("weight", &a.weight)?;
    record("function", &a.function)?;
    let seed = a.common.seed.unwrap_or(0);
    let space = match &a.space {
        Some(path) => {
            let (file, _) = load_space(path)?;
            SpaceSource::File {
                path: path.display().to_string(),
                sha256: file_hash(path)?,
                space: file,
            }
        }
        None => {
            let kind = a
                .kind
                .ok_or_else(|| anyhow!("give --space FILE or --kind with --sizes"))?;
            let sizes = a
                .sizes
                .clone()
                .unwrap_or_else(|| fracmax::experiment::DEFAULT_SIZES.to_vec());
            SpaceSource::Generated {
                kind: kind.into(),
                sizes,
                seed,
            }
        }
    };
    let cfg = ExperimentConfig {
        space,
        p: exponent_spec(&a.p)?,
        q: q_spec(a)?,
        weight: weight_spec(&a.weight)?,
        grids: a.grids,
        seed,
        tol: a.common.tol,
        ball_indicators: a.ball_indicators,
        random_functions: a.random_functions,
        inputs,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Inputs on the single space of `--space` (or the first generated size).
fn single(a: &RunArgs) -> Res<(ExperimentConfig, Inputs)> {
    let cfg = config(a)?;
    let space = cfg
        .spaces()?
        .into_iter()
        .next()
        .ok_or_else(|| anyhow!("no space"))?;
    let (p, q, w, eta) = cfg.resolve(&space)?;
    Ok((
        cfg,
        Inputs {
            space,
            p,
            q,
            w,
            eta,
        },
    ))
}

fn function(a: &RunArgs, n: usize) -> Res<Vec<f64>> {
    match &a.function {
        Some(path) => {
            let f: Vec<f64> =
                read_json(path).with_context(|| format!("reading {}", path.display()))?;
            if f.len() != n {
                return Err(anyhow!("function has {} values for {n} points", f.len()).into());
            }
            Ok(f)
        }
        None => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.common.seed.unwrap_or(0));
            Ok((0..n).map(|_| rng.gen::<f64>()).collect())
        }
    }
}

#[derive(Serialize)]
struct NormReport {
    modular: f64,
    norm: f64,
    weighted_norm: f64,
    weak_norm: f64,
    q_weighted_norm: f64,
}

fn norm(a: RunArgs) -> Res<bool> {
    let (_, i) = single(&a)?;
    let f = function(&a, i.space.len())?;
    let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    let r = NormReport {
        modular: modular(&i.space, &i.p, &f)?,
        norm: luxemburg_norm(&i.space, &i.p, &f, a.common.tol)?,
        weighted_norm: weighted_norm(&i.space, &i.p, &i.w, &f, a.common.tol)?,
        q_weighted_norm: weighted_norm(&i.space, &i.q, &i.w, &f, a.common.tol)?,
        weak_norm: weak_norm(&i.space, &i.q, &i.w, &abs, a.common.tol)?,
    };
    let csv = format!(
        "modular,norm,weighted_norm,q_weighted_norm,weak_norm\n{},{},{},{},{}\n",
        r.modular, r.norm, r.weighted_norm, r.q_weighted_norm, r.weak_norm
    );
    emit(&a.common, "norm", &r, Some(csv))?;
    Ok(true)
}

#[derive(Serialize)]
struct MaximalReport {
    eta: f64,
    values: Vec<f64>,
    witness: Vec<Witness>,
    dyadic: Vec<Vec<f64>>,
    cover_constant: f64,
}

fn maximal(a: RunArgs) -> Res<bool> {
    let (cfg, i) = single(&a)?;
    let f = function(&a, i.space.len())?;
    let r = fractional_maximal(&i.space, i.eta, &f)?;
    let grids = build_grid_family(&i.space, cfg.grids, cfg.seed)?;
    let dyadic = grids
        .iter()
        .map(|g| dyadic_fractional_maximal(g, &i.space, i.eta, &f).map(|m| m.values))
        .collect::<fracmax::Result<Vec<_>>>()?;
    let (k, _) = cover_constant(&i.space, &grids);
    let mut csv = String::from("point,value,witness\n");
    for (x, (v, w)) in r.values.iter().zip(&r.witness).enumerate() {
        let w = match w {
            Witness::Ball { center, len, .. } => format!("ball:{center}:{len}"),
            Witness::Cube { id } => format!("cube:{id}"),
        };
        csv.push_str(&format!("{},{v},{w}\n", i.space.labels()[x]));
    }
    let rep = MaximalReport {
        eta: i.eta,
        values: r.values,
        witness: r.witness,
        dyadic,
        cover_constant: k,
    };
    emit(&a.common, "maximal", &rep, Some(csv))?;
    Ok(true)
}

#[derive(Serialize)]
struct WeightsReport {
    apq: fracmax::weights::ApqResult,
    dual: (f64, f64),
    specialized: fracmax::weights::SpecializedConstants,
    dyadic_apq: Vec<f64>,
    w_measure: fracmax::weights::AInftyReport,
    sigma_measure: fracmax::weights::AInftyReport,
    duality_ok: bool,
}

fn weights(a: RunArgs) -> Res<bool> {
    let (cfg, i) = single(&a)?;
    let tol = cfg.tol;
    let apq = apq_constant(&i.space, &i.p, &i.q, &i.w, tol)?;
    let dual = dual_constants(&i.space, &i.p, &i.q, &i.w, tol)?;
    let specialized = specialized_constants(&i.space, &i.p, &i.q, &i.w, tol)?;
    let grids = build_grid_family(&i.space, cfg.grids, cfg.seed)?;
    let dyadic_apq = grids
        .iter()
        .map(|g| apq_dyadic_constant(g, &i.space, &i.p, &i.q, &i.w, tol).map(|r| r.value))
        .collect::<fracmax::Result<Vec<_>>>()?;
    let rec = derived_measures(&i.space, &i.p, &i.q, &i.w)?;
    let w_measure = a_infty_diagnostics(&i.space, &rec.w_atoms)?;
    let sigma_measure = a_infty_diagnostics(&i.space, &rec.sigma_atoms)?;
    let duality_ok = (dual.0 / dual.1 - 1.0).abs() <= 1e-9;
    let csv = format!(
        "apq,dual,a_q,a_p_dual\n{},{},{},{}\n",
        apq.value, dual.1, specialized.a_q, specialized.a_p_dual
    );
    let rep = WeightsReport {
        apq,
        dual,
        specialized,
        dyadic_apq,
        w_measure,
        sigma_measure,
        duality_ok,
    };
    emit(&a.common, "weights", &rep, Some(csv))?;
    Ok(duality_ok)
}

fn czd(a: CzdArgs) -> Res<bool> {
    let (cfg, i) = single(&a.run)?;
    let f = function(&a.run, i.space.len())?;
    let grid = build_grid(&i.space, fracmax::grid::DEFAULT_D0, cfg.seed)?;
    // sigma = w^{-p'} as a density when a weight is given
    let sigma: Vec<f64> = if a.run.weight.is_some() {
        let rec = derived_measures(&i.space, &i.p, &i.q, &i.w)?;
        rec.sigma_atoms
            .iter()
            .zip(i.space.mass())
            .map(|(s, m)| s / m)
            .collect()
    } else {
        vec![1.0; i.space.len()]
    };
    if a.stack {
        let st = cz_stack(&grid, &i.space, i.eta, &sigma, &f, a.a, None)?;
        let rep = cz_verify_stack(&st, &grid);
        #[derive(Serialize)]
        struct Out<'a> {
            stack: &'a fracmax::czd::CzStack,
            verification: &'a fracmax::czd::CzReport,
        }
        emit(
            &a.run.common,
            "czd",
            &Out {
                stack: &st,
                verification: &rep,
            },
            None,
        )?;
        Ok(rep.pass())
    } else {
        let lambda = a
            .lambda
            .ok_or_else(|| anyhow!("give --lambda or --stack"))?;
        let d = cz_decompose(&grid, &i.space, i.eta, &sigma, &f, lambda)?;
        let rep = cz_verify(&d, &grid);
        #[derive(Serialize)]
        struct Out<'a> {
            decomposition: &'a fracmax::czd::CzDecomposition,
            verification: &'a fracmax::czd::CzReport,
        }
        emit(
            &a.run.common,
            "czd",
            &Out {
                decomposition: &d,
                verification: &rep,
            },
            None,
        )?;
        Ok(rep.pass())
    }
}

fn sweep(cmd: Exp, a: RunArgs) -> Res<bool> {
    let cfg = config(&a)?;
    let (report, timings) = run_experiment(cmd, &cfg)?;
    let name = match cmd {
        Exp::Strong => "strong",
        Exp::Weak => "weak",
        Exp::Necessity => "necessity",
    };
    emit(&a.common, name, &report, Some(rows_csv(&report.rows)))?;
    if let Some(dir) = &a.common.out {
        write_json(&dir.join(format!("{name}.timings.json")), &timings)?;
    }
    Ok(report.pass)
}

fn verify(a: VerifyArgs) -> Res<bool> {
    let seed = a.common.seed.unwrap_or(0);
    let mut corpus: Corpus = match &a.corpus {
        Some(p) => read_json(p).with_context(|| format!("reading {}", p.display()))?,
        None => default_corpus(seed),
    };
    if let Some(g) = &a.grid {
        let space = a.space.as_ref().expect("clap requires --space");
        let (file, _) = load_space(space)?;
        let grid: GridDump = read_json(g).with_context(|| format!("reading {}", g.display()))?;
        corpus
            .cases
            .push(VerifyCase::InjectedGrid { space: file, grid });
    }
    if corpus.cases.is_empty() {
        bail_input("no cases")?;
    }
    let start = std::time::Instant::now();
    let report = verify_all(&corpus, seed, a.common.tol)?;
    let mut csv = String::from("case,check,pass,witness\n");
    for r in &report.results {
        for c in &r.checks {
            csv.push_str(&format!(
                "\"{}\",\"{}\",{},\"{}\"\n",
                r.case.replace('"', "'"),
                c.property,
                c.pass,
                c.witness.clone().unwrap_or_default().replace('"', "'")
            ));
        }
    }
    emit(&a.common, "verify-all", &report, Some(csv))?;
    if let Some(dir) = &a.common.out {
        #[derive(Serialize)]
        struct T {
            total_seconds: f64,
        }
        write_json(
            &dir.join("verify-all.timings.json"),
            &T {
                total_seconds: start.elapsed().as_secs_f64(),
            },
        )?;
    }
    for r in report.results.iter().filter(|r| !r.pass) {
        for c in r.checks.iter().filter(|c| !c.pass) {
            eprintln!(
                "FAIL {}: {} ({})",
                r.case,
                c.property,
                c.witness.as_deref().unwrap_or("")
            );
        }
    }
    Ok(report.pass)
}

fn bail_input(msg: &str) -> anyhow::Result<()> {
    bail!("{msg}")
}
