//! Command-line front end: validate, check, simulate, export, reproduce.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use featmc::auv::{
    builtin_scenario, builtin_scenario_names, overrides_from_kv, run_standard_analysis,
    scenario_from_kv, table2_csv, AnalysisReport, AuvError, Scenario,
};
use featmc::check::{
    evaluate_property, resolve_properties, run_experiment, CheckError, CheckOptions, CheckResult,
};
use featmc::lang::parser::parse_expression;
use featmc::lang::typecheck::Overrides;
use featmc::mdp::{
    compile_with_options, export_dot, export_transitions_csv, stats_report, CompileOptions,
    CompiledMdp,
};
use featmc::sim::{simulate_paths, Objective, Policy, SimError};
use featmc::TypedModel;

#[derive(Parser)]
#[command(
    name = "featmc",
    about = "Probabilistic model checker for feature-aware guarded-command models",
    version
)]
struct Cli {
    /// Worker threads for the checker and simulator (0 = all cores).
    /// Results are independent of this setting.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArgs {
    /// Model file (.pfm).
    model: PathBuf,

    /// Constant override, repeatable: -c name=value.
    #[arg(short = 'c', long = "const", value_name = "NAME=VALUE")]
    constants: Vec<String>,

    /// Cap on the explored state count (also: FEATMC_STATE_CAP).
    #[arg(long)]
    state_cap: Option<usize>,
}

#[derive(Args)]
struct CheckArgs {
    /// Convergence threshold for value iteration.
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,

    /// Iteration limit before giving up.
    #[arg(long, default_value_t = 1_000_000)]
    max_iters: usize,

    /// Use the absolute-change convergence criterion instead of relative.
    #[arg(long)]
    absolute: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and typecheck a model; print feature-model statistics.
    Validate {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Compile a model and evaluate all properties of a property file.
    Check {
        #[command(flatten)]
        model: ModelArgs,

        /// Property file (.props).
        props: PathBuf,

        #[command(flatten)]
        check: CheckArgs,

        /// Experiment range for a parameter: k=from:to[:step]. Repeatable.
        #[arg(long = "experiment", value_name = "PARAM=FROM:TO[:STEP]")]
        experiments: Vec<String>,

        /// Write one CSV (header k,value) per experiment into this
        /// directory.
        #[arg(long, value_name = "DIR")]
        csv_dir: Option<PathBuf>,
    },
    /// Monte-Carlo rollouts under a fixed policy.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,

        /// Target state set: a label name or a boolean state expression.
        #[arg(long)]
        target: String,

        /// Property file whose label definitions may be used as targets.
        #[arg(long, value_name = "PATH")]
        props: Option<PathBuf>,

        /// Estimate the expected value of this reward structure
        /// accumulated until the target (default: reach probability).
        #[arg(long, value_name = "STRUCTURE")]
        reward: Option<String>,

        /// Policy resolving nondeterminism.
        #[arg(long, default_value = "uniform", value_parser = ["uniform", "first", "last"])]
        policy: String,

        #[arg(long, default_value_t = 10_000)]
        trials: usize,

        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Write per-trial outcomes as CSV (header trial,outcome).
        #[arg(long, value_name = "PATH")]
        per_trial_csv: Option<PathBuf>,
    },
    /// Export the compiled MDP as GraphViz and/or a transitions CSV.
    Export {
        #[command(flatten)]
        model: ModelArgs,

        /// Write a GraphViz digraph here.
        #[arg(long, value_name = "PATH")]
        dot: Option<PathBuf>,

        /// Write the transition table here.
        #[arg(long, value_name = "PATH")]
        transitions_csv: Option<PathBuf>,

        /// Print state/choice/transition/label counts as key=value lines.
        #[arg(long)]
        stats: bool,
    },
    /// Run the bundled pipeline-inspection analysis for a scenario.
    Reproduce {
        /// `north_sea`, `caribbean`, `all`, or a path to a scenario .kv
        /// file.
        #[arg(default_value = "all")]
        scenario: String,

        /// Output directory for report.txt, table2.csv and the fig6 CSVs.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,

        /// Sidecar key=value file overriding the model's assumption
        /// constants.
        #[arg(long, value_name = "PATH")]
        overrides: Option<PathBuf>,

        #[command(flatten)]
        check: CheckArgs,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Model(String),
    NonConvergence(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Model(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Model(m) | CliError::NonConvergence(m) => m,
        }
    }
}

fn model_error(path: &Path, err: impl std::fmt::Display) -> CliError {
    CliError::Model(format!("{}: {err}", path.display()))
}

fn check_error(err: CheckError) -> CliError {
    match err {
        CheckError::NonConvergence { .. } => CliError::NonConvergence(err.to_string()),
        other => CliError::Model(other.to_string()),
    }
}

fn auv_error(err: AuvError) -> CliError {
    match err {
        AuvError::Check(CheckError::NonConvergence { .. }) => {
            CliError::NonConvergence(err.to_string())
        }
        other => CliError::Model(other.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version print to stdout and exit 0; everything
            // else is a usage error.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .expect("thread pool");
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("featmc: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { model } => validate(&model),
        Command::Check { model, props, check, experiments, csv_dir } => {
            run_check(&model, &props, &check, &experiments, csv_dir.as_deref())
        }
        Command::Simulate {
            model,
            target,
            props,
            reward,
            policy,
            trials,
            max_steps,
            seed,
            per_trial_csv,
        } => simulate(
            &model,
            &target,
            props.as_deref(),
            reward.as_deref(),
            &policy,
            trials,
            max_steps,
            seed,
            per_trial_csv.as_deref(),
        ),
        Command::Export { model, dot, transitions_csv, stats } => {
            export(&model, dot.as_deref(), transitions_csv.as_deref(), stats)
        }
        Command::Reproduce { scenario, out_dir, overrides, check } => {
            reproduce(&scenario, &out_dir, overrides.as_deref(), &check)
        }
    }
}

fn parse_overrides(pairs: &[String]) -> Result<Overrides, CliError> {
    let mut out = Overrides::new();
    for pair in pairs {
        let Some((name, value)) = pair.split_once('=') else {
            return Err(CliError::Usage(format!(
                "constant override `{pair}` must have the form name=value"
            )));
        };
        out.insert(name.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

fn state_cap(args: &ModelArgs) -> Result<CompileOptions, CliError> {
    let mut options = CompileOptions::default();
    if let Ok(text) = std::env::var("FEATMC_STATE_CAP") {
        options.state_cap = text.parse().map_err(|_| {
            CliError::Usage(format!("FEATMC_STATE_CAP must be an integer, got `{text}`"))
        })?;
    }
    if let Some(cap) = args.state_cap {
        options.state_cap = cap;
    }
    Ok(options)
}

fn load_model(args: &ModelArgs) -> Result<TypedModel, CliError> {
    let text = std::fs::read_to_string(&args.model).map_err(|e| model_error(&args.model, e))?;
    let overrides = parse_overrides(&args.constants)?;
    let ast = featmc::parse_model(&text).map_err(|e| model_error(&args.model, e))?;
    featmc::typecheck(&ast, &overrides).map_err(|e| model_error(&args.model, e))
}

fn load_and_compile(args: &ModelArgs) -> Result<(TypedModel, CompiledMdp), CliError> {
    let model = load_model(args)?;
    let options = state_cap(args)?;
    let mdp = compile_with_options(&model, &options).map_err(|e| model_error(&args.model, e))?;
    Ok((model, mdp))
}

fn validate(args: &ModelArgs) -> Result<(), CliError> {
    let model = load_model(args)?;
    let fm = &model.feature_model;
    let configs = fm.enumerate_configurations();
    println!("features: {}", fm.feature_count());
    println!("valid configurations: {}", configs.len());
    println!("initial configuration: {}", fm.display_config(model.initial_config));
    println!("modules: {}", model.modules.len());
    println!("variables: {}", model.vars.len());
    Ok(())
}

/// Parses `param=from:to[:step]` experiment ranges.
fn parse_experiments(specs: &[String]) -> Result<BTreeMap<String, (i64, i64, i64)>, CliError> {
    let mut out = BTreeMap::new();
    for spec in specs {
        let bad = || {
            CliError::Usage(format!(
                "experiment `{spec}` must have the form param=from:to[:step]"
            ))
        };
        let (name, range) = spec.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 2 && parts.len() != 3 {
            return Err(bad());
        }
        let from: i64 = parts[0].parse().map_err(|_| bad())?;
        let to: i64 = parts[1].parse().map_err(|_| bad())?;
        let step: i64 = if parts.len() == 3 { parts[2].parse().map_err(|_| bad())? } else { 1 };
        if from > to || step < 1 {
            return Err(CliError::Usage(format!("experiment `{spec}` has an empty range")));
        }
        out.insert(name.trim().to_string(), (from, to, step));
    }
    Ok(out)
}

fn run_check(
    args: &ModelArgs,
    props_path: &Path,
    check: &CheckArgs,
    experiment_specs: &[String],
    csv_dir: Option<&Path>,
) -> Result<(), CliError> {
    let experiments = parse_experiments(experiment_specs)?;
    let (model, mdp) = load_and_compile(args)?;
    let props_text =
        std::fs::read_to_string(props_path).map_err(|e| model_error(props_path, e))?;
    let props_ast =
        featmc::parse_properties(&props_text).map_err(|e| model_error(props_path, e))?;
    let props =
        resolve_properties(&model, &props_ast).map_err(|e| model_error(props_path, e))?;
    let options = CheckOptions {
        epsilon: check.epsilon,
        max_iters: check.max_iters,
        absolute: check.absolute,
    };

    if let Some(dir) = csv_dir {
        std::fs::create_dir_all(dir).map_err(|e| model_error(dir, e))?;
    }
    for (index, prop) in props.iter().enumerate() {
        match prop.parameter() {
            None => {
                let result = evaluate_property(&mdp, prop, &BTreeMap::new(), &options)
                    .map_err(check_error)?;
                let value = result.scalar().expect("non-experiment property");
                println!("{prop} = {value:?}");
            }
            Some(param) => {
                let Some((from, to, step)) = experiments.get(param) else {
                    return Err(CliError::Model(format!(
                        "{}: property `{prop}` needs --experiment {param}=from:to[:step]",
                        props_path.display()
                    )));
                };
                let result = run_experiment(&mdp, prop, param, *from, *to, *step, &options)
                    .map_err(check_error)?;
                let CheckResult::Series(series) = result else { unreachable!() };
                for (k, v) in &series {
                    println!("{prop} @ {param}={k} = {v:?}");
                }
                if let Some(dir) = csv_dir {
                    let path = dir.join(format!("experiment_{index}.csv"));
                    let mut text = String::from("k,value\n");
                    for (k, v) in &series {
                        text.push_str(&format!("{k},{v:?}\n"));
                    }
                    std::fs::write(&path, text).map_err(|e| model_error(&path, e))?;
                }
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    args: &ModelArgs,
    target_text: &str,
    props_path: Option<&Path>,
    reward: Option<&str>,
    policy_name: &str,
    trials: usize,
    max_steps: usize,
    seed: u64,
    per_trial_csv: Option<&Path>,
) -> Result<(), CliError> {
    let (model, mdp) = load_and_compile(args)?;

    // Labels come from the model plus an optional property file.
    let mut labels = model.labels.clone();
    if let Some(path) = props_path {
        let text = std::fs::read_to_string(path).map_err(|e| model_error(path, e))?;
        let props = featmc::parse_properties(&text).map_err(|e| model_error(path, e))?;
        for decl in &props.labels {
            let expr = model
                .resolver()
                .resolve_bool(&decl.expr)
                .map_err(|e| model_error(path, e))?;
            labels.push((decl.name.clone(), expr));
        }
    }

    // A label name (quoted or bare) or a boolean state expression.
    let label_name = target_text.trim().trim_matches('"');
    let target: Vec<bool> = if let Some((_, expr)) = labels.iter().find(|(n, _)| n == label_name) {
        mdp.states_satisfying(expr).map_err(|e| CliError::Model(e.to_string()))?
    } else {
        let expr = parse_expression(target_text)
            .and_then(|e| model.resolver().resolve_bool(&e))
            .map_err(|e| CliError::Model(format!("--target: {e}")))?;
        mdp.states_satisfying(&expr).map_err(|e| CliError::Model(e.to_string()))?
    };

    let policy = match policy_name {
        "uniform" => Policy::UniformRandom,
        "first" => Policy::from_rule(&mdp, |_, _| 0),
        "last" => Policy::from_rule(&mdp, |_, n| n - 1),
        other => return Err(CliError::Usage(format!("unknown policy `{other}`"))),
    };
    let objective = match reward {
        None => Objective::Reach,
        Some(name) => Objective::CumulatedReward(mdp.reward_index(name).ok_or_else(|| {
            CliError::Model(format!("unknown reward structure \"{name}\""))
        })?),
    };

    let estimate = simulate_paths(&mdp, &policy, objective, &target, trials, max_steps, seed)
        .map_err(|e: SimError| CliError::Model(e.to_string()))?;
    println!("{estimate}");
    if let Some(path) = per_trial_csv {
        let mut text = String::from("trial,outcome\n");
        for (i, v) in estimate.outcomes.iter().enumerate() {
            text.push_str(&format!("{i},{v:?}\n"));
        }
        std::fs::write(path, text).map_err(|e| model_error(path, e))?;
    }
    Ok(())
}

fn export(
    args: &ModelArgs,
    dot: Option<&Path>,
    transitions_csv: Option<&Path>,
    stats: bool,
) -> Result<(), CliError> {
    let (_, mdp) = load_and_compile(args)?;
    if let Some(path) = dot {
        std::fs::write(path, export_dot(&mdp)).map_err(|e| model_error(path, e))?;
    }
    if let Some(path) = transitions_csv {
        std::fs::write(path, export_transitions_csv(&mdp)).map_err(|e| model_error(path, e))?;
    }
    if stats || (dot.is_none() && transitions_csv.is_none()) {
        print!("{}", stats_report(&mdp));
    }
    Ok(())
}

fn load_scenario(name: &str) -> Result<Scenario, CliError> {
    if let Some(s) = builtin_scenario(name) {
        return Ok(s);
    }
    let path = Path::new(name);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| model_error(path, e))?;
        return scenario_from_kv(&text).map_err(|e| model_error(path, e));
    }
    Err(CliError::Usage(format!(
        "unknown scenario `{name}` (expected {}, `all`, or a .kv file)",
        builtin_scenario_names().join(", ")
    )))
}

fn reproduce(
    scenario: &str,
    out_dir: &Path,
    overrides_path: Option<&Path>,
    check: &CheckArgs,
) -> Result<(), CliError> {
    let scenarios: Vec<Scenario> = if scenario == "all" {
        builtin_scenario_names()
            .iter()
            .map(|n| builtin_scenario(n).expect("builtin"))
            .collect()
    } else {
        vec![load_scenario(scenario)?]
    };
    let extra = match overrides_path {
        None => Overrides::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| model_error(path, e))?;
            overrides_from_kv(&text).map_err(|e| model_error(path, e))?
        }
    };
    let options = CheckOptions {
        epsilon: check.epsilon,
        max_iters: check.max_iters,
        absolute: check.absolute,
    };

    std::fs::create_dir_all(out_dir).map_err(|e| model_error(out_dir, e))?;
    let mut reports: Vec<AnalysisReport> = Vec::new();
    for s in &scenarios {
        let report = run_standard_analysis(s, &extra, &options).map_err(auv_error)?;
        print!("{}", report.text());
        let fig_name = match report.scenario.as_str() {
            "north_sea" => "fig6_scenario1.csv".to_string(),
            "caribbean" => "fig6_scenario2.csv".to_string(),
            other => format!("fig6_{other}.csv"),
        };
        let fig_path = out_dir.join(fig_name);
        std::fs::write(&fig_path, report.fig6_csv()).map_err(|e| model_error(&fig_path, e))?;
        reports.push(report);
    }
    let report_path = out_dir.join("report.txt");
    let combined: String = reports.iter().map(|r| r.text() + "\n").collect();
    std::fs::write(&report_path, combined).map_err(|e| model_error(&report_path, e))?;
    let table_path = out_dir.join("table2.csv");
    std::fs::write(&table_path, table2_csv(&reports)).map_err(|e| model_error(&table_path, e))?;
    Ok(())
}
