//! Command-line front end: simulate networks, compute statistics, derive
//! egocentric targets, fit coefficients, and run the bootstrap scaling
//! study. Everything reads and writes plain CSV/JSON; no interactive mode.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical failure
//! (non-convergence or degeneracy), 4 partial study failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ergm::ego::{
    self, attribute_table_from_composition, bootstrap_resample, implied_stats, read_survey_csv,
    synth_population, EgoSample, ImpliedStats, SurveySchema, SynthSpec,
};
use ergm::fit::{fit_mean_value, fit_network, FitConfig, FitMethod};
use ergm::net::{AttributeTable, Network};
use ergm::sampler::{gibbs_sample, gibbs_sample_stats, InitialState, SamplerConfig};
use ergm::study::{
    run_invariance_demo, run_scaling_study, write_invariance_csv, InvarianceConfig, StudyConfig,
};
use ergm::terms::{global_stats, ModelSpec};
use ergm::{Error, Result};

#[derive(Parser)]
#[command(name = "ergm", version, about = "Size-adjusted random graph models")]
struct Cli {
    /// Worker threads for studies and demos (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for outputs that don't have an explicit path flag.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw networks (or just their statistics) from a model.
    Simulate(SimulateArgs),
    /// Evaluate a model's statistics on an observed network.
    Stats(StatsArgs),
    /// Derive implied statistics from an egocentric survey.
    EgoStats(EgoStatsArgs),
    /// Estimate coefficients from a network or from implied statistics.
    Fit(FitArgs),
    /// Generate a synthetic population (network + attributes + census).
    SynthPop(SynthPopArgs),
    /// Bootstrap resamples across sizes, fit each, tabulate estimates.
    ScalingStudy(ScalingStudyArgs),
    /// Fixed coefficients across sizes: density and mean-degree columns.
    InvarianceDemo(InvarianceDemoArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Model file (JSON); must carry theta.
    #[arg(long)]
    model: PathBuf,
    /// Node attribute CSV; omit for models without attribute terms.
    #[arg(long)]
    attrs: Option<PathBuf>,
    /// Node count (required when --attrs is not given).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    interval: Option<u64>,
    /// Write a CSV of sampled statistics here instead of edge lists.
    #[arg(long)]
    stats_out: Option<PathBuf>,
    /// Write edge lists to <prefix>_0000.csv, <prefix>_0001.csv, ...
    #[arg(long)]
    edges_prefix: Option<String>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    attrs: Option<PathBuf>,
    #[arg(long)]
    n: usize,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EgoStatsArgs {
    #[arg(long)]
    survey: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Resample to this many egos before computing statistics.
    #[arg(long)]
    resample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the (re)sampled egos as a node attribute CSV.
    #[arg(long)]
    attrs_out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    model: PathBuf,
    /// Observed network route: edge list plus attributes.
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Implied-statistics route: JSON from `ego-stats`.
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Node attributes (needed for the network route and for any
    /// implied-statistics fit whose model uses numeric attributes).
    #[arg(long)]
    attrs: Option<PathBuf>,
    #[arg(long, value_parser = parse_method)]
    method: Option<FitMethod>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthPopArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    edges_out: Option<PathBuf>,
    #[arg(long)]
    attrs_out: Option<PathBuf>,
    /// Write the egocentric census of the generated network.
    #[arg(long)]
    survey_out: Option<PathBuf>,
    #[arg(long)]
    fit_out: Option<PathBuf>,
}

#[derive(Args)]
struct ScalingStudyArgs {
    /// Full study configuration (JSON with model and fit settings inline).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Comma-separated pseudo-population sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Egocentric base sample: survey CSV plus schema JSON.
    #[arg(long)]
    survey: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Synthetic base population: spec JSON plus population size.
    #[arg(long)]
    synth: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    synth_n: usize,
    #[arg(long, value_parser = parse_method)]
    method: Option<FitMethod>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct InvarianceDemoArgs {
    /// Model file with fixed theta.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 30)]
    networks_per_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_method(s: &str) -> std::result::Result<FitMethod, String> {
    match s {
        "logistic" | "logistic_dyad_independent" => Ok(FitMethod::LogisticDyadIndependent),
        "stochastic" | "stochastic_approximation" => Ok(FitMethod::StochasticApproximation),
        other => Err(format!(
            "unknown method {other:?}; use logistic or stochastic"
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_err()
        {
            eprintln!("warning: thread pool already initialized");
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::DegenerateTargets(_) | Error::Separation(_) | Error::Infeasible(_) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => simulate(args, &cli.out_dir),
        Command::Stats(args) => stats(args),
        Command::EgoStats(args) => ego_stats(args),
        Command::Fit(args) => fit(args),
        Command::SynthPop(args) => synth_pop(args),
        Command::ScalingStudy(args) => scaling_study(args, &cli.out_dir),
        Command::InvarianceDemo(args) => invariance_demo(args),
    }
}

fn load_attrs(
    model: &ModelSpec,
    attrs: &Option<PathBuf>,
    n: Option<usize>,
) -> Result<AttributeTable> {
    match (attrs, n) {
        (Some(path), _) => {
            let n = n.ok_or_else(|| {
                Error::Parse("--n is required alongside --attrs to size the table".into())
            })?;
            AttributeTable::read_csv(path, n, &model.attributes)
        }
        (None, Some(n)) => {
            if !model.attributes.is_empty() {
                return Err(Error::Parse(
                    "model declares attributes; provide --attrs".into(),
                ));
            }
            Ok(AttributeTable::new(n))
        }
        (None, None) => Err(Error::Parse("provide --attrs with --n, or --n alone".into())),
    }
}

fn write_or_stdout(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, content)?;
            Ok(())
        }
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

fn simulate(args: SimulateArgs, out_dir: &Path) -> Result<ExitCode> {
    let model = ModelSpec::load(&args.model)?;
    if model.theta.is_none() {
        return Err(Error::Parse("model file must carry theta to simulate".into()));
    }
    let attrs = load_attrs(&model, &args.attrs, args.n)?;
    let compiled = model.compile(&attrs)?;
    let cfg = SamplerConfig {
        burn_in: args.burn_in,
        interval: args.interval,
        n_samples: args.samples,
        seed: args.seed,
        initial: InitialState::Empty,
    };
    if let Some(stats_path) = &args.stats_out {
        let samples = gibbs_sample_stats(&compiled, &cfg)?;
        let mut w = create_file(stats_path)?;
        writeln!(w, "sample,{}", compiled.term_labels().join(","))?;
        for (idx, row) in samples.iter().enumerate() {
            let cells: Vec<String> = row.as_slice().iter().map(|v| v.to_string()).collect();
            writeln!(w, "{idx},{}", cells.join(","))?;
        }
        return Ok(ExitCode::SUCCESS);
    }
    let prefix = args.edges_prefix.as_deref().unwrap_or("sample");
    let nets = gibbs_sample(&compiled, &cfg)?;
    for (idx, net) in nets.iter().enumerate() {
        let path = out_dir.join(format!("{prefix}_{idx:04}.csv"));
        let mut w = create_file(&path)?;
        net.write_edge_list_csv(&mut w)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn stats(args: StatsArgs) -> Result<ExitCode> {
    let model = ModelSpec::load(&args.model)?;
    let attrs = load_attrs(&model, &args.attrs, Some(args.n))?;
    let net = Network::read_edge_list_csv(&args.edges, args.n)?;
    let compiled = model.compile(&attrs)?;
    let values = global_stats(&net, &compiled)?;
    let payload = serde_json::json!({
        "n": args.n,
        "terms": compiled.term_labels(),
        "values": values.as_slice(),
        "edges": net.edge_count(),
        "density": net.density()?,
        "mean_degree": net.mean_degree(),
    });
    write_or_stdout(&args.out, &serde_json::to_string_pretty(&payload)?)?;
    Ok(ExitCode::SUCCESS)
}

fn ego_stats(args: EgoStatsArgs) -> Result<ExitCode> {
    let schema = SurveySchema::load(&args.schema)?;
    let model = ModelSpec::load(&args.model)?;
    let (sample, report) = read_survey_csv(&args.survey, &schema)?;
    eprintln!(
        "read {} egos ({} dropped, {} alters filtered)",
        report.egos_read, report.egos_dropped, report.alters_dropped
    );
    let sample = match args.resample {
        Some(m) => bootstrap_resample(&sample, m, args.seed)?,
        None => sample,
    };
    let implied = implied_stats(&sample, &model)?;
    if let Some(attrs_path) = &args.attrs_out {
        let table = sample.to_attribute_table()?;
        let mut w = create_file(attrs_path)?;
        table.write_csv(&mut w)?;
    }
    write_or_stdout(&args.out, &implied.to_json())?;
    Ok(ExitCode::SUCCESS)
}

fn fit(args: FitArgs) -> Result<ExitCode> {
    let model = ModelSpec::load(&args.model)?;
    let mut cfg = FitConfig {
        seed: args.seed,
        ..FitConfig::default()
    };
    if let Some(m) = args.method {
        cfg.method = m;
    } else if model.dyad_independent() {
        cfg.method = FitMethod::LogisticDyadIndependent;
    }
    if let Some(iters) = args.iterations {
        cfg.max_iterations = iters;
    }
    if let Some(tol) = args.tolerance {
        cfg.tolerance = tol;
    }
    let result = match (&args.edges, &args.targets) {
        (Some(edges), None) => {
            let attrs = load_attrs(&model, &args.attrs, args.n)?;
            let net = Network::read_edge_list_csv(edges, attrs.n())?;
            fit_network(&net, &attrs, &model, &cfg)?
        }
        (None, Some(targets_path)) => {
            let implied = ImpliedStats::from_json(&std::fs::read_to_string(targets_path)?)?;
            let attrs = match &args.attrs {
                Some(path) => AttributeTable::read_csv(path, implied.n, &model.attributes)?,
                None => attribute_table_from_composition(implied.n, &implied.composition)?,
            };
            fit_mean_value(implied.targets.as_slice(), &attrs, &model, &cfg)?
        }
        _ => {
            return Err(Error::Parse(
                "provide exactly one of --edges or --targets".into(),
            ))
        }
    };
    let converged = result.converged;
    write_or_stdout(&args.out, &result.to_json())?;
    if converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("fit did not converge");
        Ok(ExitCode::from(3))
    }
}

fn synth_pop(args: SynthPopArgs) -> Result<ExitCode> {
    let spec = SynthSpec::load(&args.spec)?;
    let (net, attrs, fit) = synth_population(&spec, args.n, args.seed)?;
    if let Some(path) = &args.edges_out {
        let mut w = create_file(path)?;
        net.write_edge_list_csv(&mut w)?;
    }
    if let Some(path) = &args.attrs_out {
        let mut w = create_file(path)?;
        attrs.write_csv(&mut w)?;
    }
    if let Some(path) = &args.survey_out {
        let census = EgoSample::census(&net, &attrs)?;
        let mut w = create_file(path)?;
        ego::write_survey_csv(&census, &mut w)?;
    }
    if let Some(path) = &args.fit_out {
        std::fs::write(path, fit.to_json())?;
    }
    eprintln!(
        "generated {} nodes, {} edges (generator fit converged: {})",
        args.n,
        net.edge_count(),
        fit.converged
    );
    Ok(ExitCode::SUCCESS)
}

fn scaling_study(args: ScalingStudyArgs, out_dir: &Path) -> Result<ExitCode> {
    let mut cfg = match &args.config {
        Some(path) => serde_json::from_str::<StudyConfig>(&std::fs::read_to_string(path)?)?,
        None => {
            let model_path = args
                .model
                .as_ref()
                .ok_or_else(|| Error::Parse("--model (or --config) is required".into()))?;
            StudyConfig {
                sizes: vec![],
                replicates: 30,
                model: ModelSpec::load(model_path)?,
                fit: FitConfig::default(),
                seed: args.seed,
            }
        }
    };
    if !args.sizes.is_empty() {
        cfg.sizes = args.sizes.clone();
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if args.seed != 0 {
        cfg.seed = args.seed;
    }
    if let Some(m) = args.method {
        cfg.fit.method = m;
    }
    if let Some(iters) = args.iterations {
        cfg.fit.max_iterations = iters;
    }
    if let Some(tol) = args.tolerance {
        cfg.fit.tolerance = tol;
    }
    if cfg.sizes.is_empty() {
        return Err(Error::Parse("no sizes given (use --sizes)".into()));
    }

    let base = match (&args.survey, &args.schema, &args.synth) {
        (Some(survey), Some(schema), None) => {
            let schema = SurveySchema::load(schema)?;
            let (sample, report) = read_survey_csv(survey, &schema)?;
            eprintln!(
                "base sample: {} egos ({} dropped, {} alters filtered)",
                report.egos_read, report.egos_dropped, report.alters_dropped
            );
            sample
        }
        (None, None, Some(spec_path)) => {
            let spec = SynthSpec::load(spec_path)?;
            let (net, attrs, gen_fit) =
                synth_population(&spec, args.synth_n, ergm::derive_seed(cfg.seed, 0x5f, 0))?;
            eprintln!(
                "synthetic base population: {} nodes, {} edges (generator converged: {})",
                args.synth_n,
                net.edge_count(),
                gen_fit.converged
            );
            EgoSample::census(&net, &attrs)?
        }
        _ => {
            return Err(Error::Parse(
                "provide either --survey with --schema, or --synth".into(),
            ))
        }
    };

    let report = run_scaling_study(&cfg, &base)?;
    std::fs::create_dir_all(out_dir)?;
    let mut long = create_file(&out_dir.join("study_long.csv"))?;
    report.write_long_csv(&mut long)?;
    let mut summary = create_file(&out_dir.join("study_summary.csv"))?;
    report.write_summary_csv(&mut summary)?;
    print!("{}", report.summary_table());
    let failures: usize = report.summaries.iter().map(|s| s.replicates_failed).sum();
    if failures > 0 {
        eprintln!("{failures} replicate fits failed; see study_long.csv");
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}

fn invariance_demo(args: InvarianceDemoArgs) -> Result<ExitCode> {
    let model = ModelSpec::load(&args.model)?;
    let cfg = InvarianceConfig {
        model,
        sizes: args.sizes.clone(),
        networks_per_size: args.networks_per_size,
        seed: args.seed,
        burn_in: None,
        interval: None,
    };
    let rows = run_invariance_demo(&cfg)?;
    let mut buf = Vec::new();
    write_invariance_csv(&rows, &mut buf)?;
    let text = String::from_utf8(buf).expect("csv is utf-8");
    write_or_stdout(&args.out, text.trim_end())?;
    Ok(ExitCode::SUCCESS)
}
