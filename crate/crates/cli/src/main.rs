//! `gprt`: generate instances, run experiment plans, train a single hybrid,
//! and turn histories and results into curves and tables.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gprt::experiment::{
    emit_training_curves, format_report, Block, gen_instance, load_instances, read_csv, run_experiment, sign_tests,
    summarize, write_csv, CurvePoint, DeskOverrides, ExperimentPlan, GeneratorConfig, InstanceEntry, Method,
    MethodSettings, ResultRow, RunManifest, RESULT_HEADER, SIGN_HEADER, SUMMARY_HEADER, TOKEN_HEADER,
};
use gprt::expr::write_heuristics;
use gprt::gp::{read_log, FitnessEvaluator};
use gprt::hybrid::{read_history, run_hybrid, write_history};
use gprt::nn::PolicyCheckpoint;

#[derive(Parser)]
#[command(name = "gprt", version, about = "Evolved truck-dispatch heuristics for container terminals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one instance file, or every instance file named by a plan.
    Gen(GenArgs),
    /// Run an experiment plan.
    Run(RunArgs),
    /// Run one hybrid (GP + policy) search on a plan's training set.
    Train(TrainArgs),
    /// Merge run histories into a long-format training-curve CSV.
    Curves(CurvesArgs),
    /// Print the result tables of a finished run.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Plan whose train/test files should be generated.
    #[arg(long, conflicts_with = "out")]
    plan: Option<PathBuf>,
    /// Output instance file.
    #[arg(long, required_unless_present = "plan")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the desk-scale terminal size instead of the port-scale one.
    #[arg(long)]
    desk: bool,
    #[arg(long)]
    qcs: Option<usize>,
    #[arg(long)]
    ycs: Option<usize>,
    #[arg(long)]
    trucks: Option<usize>,
    #[arg(long)]
    tasks: Option<usize>,
    /// Regenerate files that already exist.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    plan: PathBuf,
    /// Directory for results, curves, heuristics and the manifest.
    #[arg(long)]
    out: PathBuf,
    /// Apply the plan's desk-scale overrides.
    #[arg(long)]
    desk: bool,
    /// Restrict the run to these methods (repeatable).
    #[arg(long = "method")]
    methods: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "gprt")]
    method: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    desk: bool,
}

#[derive(Args)]
struct CurvesArgs {
    /// Hybrid history or GP log CSV files, one per run.
    #[arg(required = true)]
    histories: Vec<PathBuf>,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Method name for every history; defaults to each file's stem.
    #[arg(long)]
    method: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory written by `gprt run`.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run(a),
        Command::Train(a) => train(a),
        Command::Curves(a) => curves(a),
        Command::Report(a) => report(a),
    }
}

fn settings(plan: &ExperimentPlan, desk: bool) -> MethodSettings {
    if desk {
        MethodSettings::desk(&plan.desk)
    } else {
        MethodSettings::full_scale()
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let plan = a.plan.as_ref().map(ExperimentPlan::load).transpose()?;
    let base = match (&plan, a.desk) {
        (Some(p), true) => p.desk.generator(),
        (None, true) => DeskOverrides::default().generator(),
        (_, false) => GeneratorConfig::port_scale(50),
    };
    let cfg = GeneratorConfig {
        qcs: a.qcs.unwrap_or(base.qcs),
        ycs: a.ycs.unwrap_or(base.ycs),
        trucks: a.trucks.unwrap_or(base.trucks),
        tasks: a.tasks.unwrap_or(base.tasks),
        ..base
    };
    let targets: Vec<(PathBuf, u64)> = match &plan {
        Some(p) => {
            let train = p.train.iter().enumerate().map(|(i, f)| (f.clone(), a.seed + i as u64));
            let test = p.test.iter().enumerate().map(|(i, f)| (f.clone(), a.seed + 10_000 + i as u64));
            train.chain(test).collect()
        }
        None => vec![(a.out.clone().expect("required by clap"), a.seed)],
    };
    for (path, seed) in targets {
        if path.exists() && plan.is_some() && !a.force {
            println!("kept {}", path.display());
            continue;
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        gen_instance(seed, &cfg)?.save(&path).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {} (seed {seed})", path.display());
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let mut plan = ExperimentPlan::load(&a.plan).with_context(|| format!("reading {}", a.plan.display()))?;
    if !a.methods.is_empty() {
        plan.methods = a.methods.iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
        plan.sign_tests.retain(|(x, y)| plan.methods.contains(x) && plan.methods.contains(y));
    }
    plan.validate()?;
    let instances = load_instances(&plan)?;
    let res = run_experiment(&plan, &settings(&plan, a.desk), &instances)?;
    fs::create_dir_all(&a.out)?;
    let out = |name: &str| a.out.join(name);
    write_csv(fs::File::create(out("results.csv"))?, &res.rows, &RESULT_HEADER)?;
    write_csv(fs::File::create(out("summary.csv"))?, &res.summary, &SUMMARY_HEADER)?;
    write_csv(fs::File::create(out("sign_tests.csv"))?, &res.sign_tests, &SIGN_HEADER)?;
    write_csv(fs::File::create(out("tokens.csv"))?, &res.tokens, &TOKEN_HEADER)?;
    emit_training_curves(fs::File::create(out("curves.csv"))?, &res.curves)?;
    let mut text = String::new();
    for l in &res.learned {
        text.push_str(&format!("# {} seed {} fitness {}\n", l.method, l.seed, l.fitness));
        text.push_str(&write_heuristics([&l.best]));
    }
    fs::write(out("heuristics.txt"), text)?;
    RunManifest::new(&plan, a.desk, &instances).save(out("manifest.json"))?;
    print!("{}", format_report(&res.summary, &res.sign_tests, &res.tokens));
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let plan = ExperimentPlan::load(&a.plan)?;
    let method: Method = a.method.parse()?;
    let Some((kind, seeding)) = method.hybrid() else {
        bail!("`{method}` is not a hybrid method (expected gprr, gprt, gprr_star or gprt_star)");
    };
    let train: Vec<InstanceEntry> = load_instances(&plan)?.into_iter().filter(|e| e.block == Block::Train).collect();
    if train.is_empty() {
        bail!("plan has no training instances");
    }
    let cfg = settings(&plan, a.desk).hybrid(kind, seeding, a.seed);
    let mut ev = FitnessEvaluator::new(train.into_iter().map(|e| e.instance).collect())?;
    let run = run_hybrid(&cfg, &mut ev)?;
    fs::create_dir_all(&a.out)?;
    write_history(fs::File::create(a.out.join("history.csv"))?, &run.history)?;
    fs::write(a.out.join("best.txt"), write_heuristics([&run.best.tree]))?;
    PolicyCheckpoint::capture(&run.policy).save(a.out.join("policy.json"))?;
    println!(
        "{method} seed {}: best {:.3} TEU/h, {} tokens, {} heuristics simulated",
        a.seed,
        run.best.score(),
        run.best.tree.token_count(),
        run.budget.evaluations
    );
    println!("{}", run.best.tree);
    Ok(())
}

/// Reads (generation, best) pairs from a hybrid history or a GP log.
fn read_curve(path: &Path) -> Result<Vec<(usize, f64)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let header = text.lines().next().unwrap_or_default();
    if header.contains("token_count_best") {
        Ok(read_history(text.as_bytes())?.into_iter().map(|h| (h.generation, h.best)).collect())
    } else if header.contains("median") {
        Ok(read_log(text.as_bytes())?.into_iter().map(|h| (h.generation, h.best)).collect())
    } else {
        bail!("{} is neither a hybrid history nor a GP log", path.display())
    }
}

fn curves(a: CurvesArgs) -> Result<()> {
    let mut points = Vec::new();
    for (seed, path) in a.histories.iter().enumerate() {
        let method = match &a.method {
            Some(m) => m.clone(),
            None => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        };
        for (generation, best_fitness) in read_curve(path)? {
            points.push(CurvePoint { method: method.clone(), seed: seed as u64, generation, best_fitness });
        }
    }
    emit_training_curves(fs::File::create(&a.out)?, &points)?;
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let rows: Vec<ResultRow> = read_csv(fs::File::open(a.out.join("results.csv")).context("opening results.csv")?)?;
    let summary = summarize(&rows);
    let pairs = match RunManifest::load(a.out.join("manifest.json")) {
        Ok(m) => ExperimentPlan::from_toml(&m.plan)?.sign_tests,
        Err(_) => Vec::new(),
    };
    let tests = sign_tests(&pairs, &summary);
    let tokens = read_csv(fs::File::open(a.out.join("tokens.csv")).context("opening tokens.csv")?)?;
    print!("{}", format_report(&summary, &tests, &tokens));
    Ok(())
}
