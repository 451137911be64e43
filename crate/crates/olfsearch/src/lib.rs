//! Command-line surface for the olfactory-search solver suite.
//!
//! Subcommands: `list-cases`, `evaluate`, `solve-perseus`, `solve-drl`,
//! `replay`, and `plot`. Every run with a fixed `--seed` produces
//! byte-identical CSV artifacts; each solver/evaluation run writes a JSON
//! manifest recording the resolved configuration next to its outputs.

use clap::{Args, Parser, Subcommand};
use olfactory_search::artifact::{
    check_fingerprint, load_alpha_policy, load_weights, save_alpha_policy, save_weights,
    RunManifest,
};
use olfactory_search::belief::LikelihoodTables;
use olfactory_search::cases::{CaseSpec, PRESET_NAMES};
use olfactory_search::config::{load_case, ConfigOverlay};
use olfactory_search::drl::{train, NetPolicy, TrainerConfig};
use olfactory_search::eval::{
    trajectory_export, trajectory_import, BenchmarkReport, Evaluator, REPORT_CSV_HEADER,
};
use olfactory_search::net::NetworkSpec;
use olfactory_search::pbvi::{perseus_solve, PerseusConfig};
use olfactory_search::plot::{emit_report_plot, emit_trajectory_plot};
use olfactory_search::policy::{heuristic_by_name, Policy, HEURISTIC_NAMES};
use olfactory_search::{Error, Result};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "olfsearch",
    about = "Solvers and benchmarks for odor-source search on a grid",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Master seed; all randomness derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Key-value configuration overlay file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// List the canonical benchmark cases.
    ListCases,
    /// Evaluate a policy (heuristic name or artifact path) on a case.
    Evaluate {
        case: String,
        /// `infotaxis`, `greedy-map`, or a path to a policy artifact.
        policy: String,
        #[arg(long, default_value_t = 10_000)]
        episodes: usize,
        /// Additionally export the first N episode trajectories.
        #[arg(long, default_value_t = 0)]
        trajectories: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Solve a case with point-based value iteration.
    SolvePerseus {
        case: String,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        shaping_c: Option<f64>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Train a value network on a case.
    SolveDrl {
        case: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Verify a recorded trajectory against the case dynamics and print it.
    Replay { trajectory: PathBuf },
    /// Render a benchmark report or trajectory file to SVG + data CSV.
    Plot {
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

/// Entry point shared by `main` and the integration tests.
pub fn run<I, T>(argv: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    dispatch(cli)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ListCases => list_cases(),
        Command::Evaluate {
            case,
            policy,
            episodes,
            trajectories,
            common,
        } => evaluate(&case, &policy, episodes, trajectories, &common),
        Command::SolvePerseus {
            case,
            gamma,
            shaping_c,
            common,
        } => solve_perseus(&case, gamma, shaping_c, &common),
        Command::SolveDrl { case, common } => solve_drl(&case, &common),
        Command::Replay { trajectory } => replay(&trajectory),
        Command::Plot { input, out_dir } => plot(&input, &out_dir),
    }
}

fn list_cases() -> Result<()> {
    for name in PRESET_NAMES {
        let case = CaseSpec::preset(name)?;
        println!(
            "{name}: grid {}x{}, h_max {}, T_max {}, start ({}, {})",
            case.grid.n_x,
            case.grid.n_y,
            case.params.h_max,
            case.t_max,
            case.grid.agent_start.x,
            case.grid.agent_start.y
        );
    }
    Ok(())
}

/// Loads a policy by registered heuristic name or artifact path, enforcing
/// the case fingerprint for artifacts.
fn resolve_policy(spec: &str, case: &CaseSpec) -> Result<Box<dyn Policy>> {
    if HEURISTIC_NAMES.contains(&spec) {
        return heuristic_by_name(spec, case);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Error::UnknownPolicy(format!(
            "{spec} (not a heuristic name, and no such file)"
        )));
    }
    if let Ok(policy) = load_alpha_policy(path) {
        check_fingerprint(&policy.case_fingerprint, case)?;
        return Ok(Box::new(policy));
    }
    let (weights, fingerprint) = load_weights(path)?;
    check_fingerprint(&fingerprint, case)?;
    let tables = LikelihoodTables::new(&case.grid, &case.params)?;
    Ok(Box::new(OwnedNetPolicy { weights, tables }))
}

/// Owning wrapper so a loaded network can be used as a policy.
struct OwnedNetPolicy {
    weights: olfactory_search::net::WeightBundle,
    tables: LikelihoodTables,
}

impl Policy for OwnedNetPolicy {
    fn act(&self, b: &olfactory_search::belief::Belief) -> Result<olfactory_search::env::Action> {
        NetPolicy {
            net: &self.weights,
            tables: &self.tables,
        }
        .act(b)
    }

    fn name(&self) -> &str {
        "drl"
    }
}

fn evaluate(
    case_name: &str,
    policy_spec: &str,
    episodes: usize,
    trajectories: usize,
    common: &CommonOpts,
) -> Result<()> {
    let case = load_case(case_name, common.config.as_deref())?;
    let policy = resolve_policy(policy_spec, &case)?;
    let evaluator = Evaluator::new(&case)?;
    let report = evaluator.benchmark(policy.as_ref(), episodes, common.seed)?;
    std::fs::create_dir_all(&common.out_dir)?;
    let report_path = common.out_dir.join("report.csv");
    std::fs::write(
        &report_path,
        BenchmarkReport::csv_document(std::slice::from_ref(&report)),
    )?;
    let mut manifest = RunManifest::new(
        "evaluate",
        &case,
        common.seed,
        serde_json::json!({
            "policy": policy_spec,
            "episodes": episodes,
            "trajectories": trajectories,
        }),
    );
    manifest.artifacts.push(report_path.display().to_string());
    for i in 0..trajectories {
        let record = evaluator.episode(policy.as_ref(), common.seed, i as u64)?;
        let path = common.out_dir.join(format!("traj-{i:03}.txt"));
        std::fs::write(&path, trajectory_export(&record))?;
        manifest.artifacts.push(path.display().to_string());
    }
    manifest.save(&common.out_dir.join("manifest-evaluate.json"))?;
    println!("{REPORT_CSV_HEADER}");
    println!("{}", report.to_csv_row());
    Ok(())
}

fn solve_perseus(
    case_name: &str,
    gamma: Option<f64>,
    shaping_c: Option<f64>,
    common: &CommonOpts,
) -> Result<()> {
    let mut case = CaseSpec::preset(case_name)?;
    let mut config = PerseusConfig::default();
    if let Some(path) = &common.config {
        ConfigOverlay::from_file(path)?.apply(&mut case, None, Some(&mut config))?;
    }
    if let Some(g) = gamma {
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::InvalidParameter("gamma must be in (0, 1)".into()));
        }
        config.gamma = g;
    }
    if let Some(c) = shaping_c {
        if c < 0.0 {
            return Err(Error::InvalidParameter(
                "shaping constant must be >= 0".into(),
            ));
        }
        config.shaping_c = c;
    }
    let heuristic = heuristic_by_name("infotaxis", &case)?;
    let (policy, stats) = perseus_solve(&case, heuristic.as_ref(), &config, common.seed)?;
    std::fs::create_dir_all(&common.out_dir)?;
    let policy_path = common.out_dir.join(format!("{}.alpha", case.name));
    save_alpha_policy(&policy_path, &policy)?;
    let mut iterations_csv = String::from("iteration,vectors,backups,mean_T,pr_failure\n");
    for s in &stats {
        iterations_csv.push_str(&format!(
            "{},{},{},{},{}\n",
            s.iteration,
            s.vectors,
            s.backups,
            s.mean_t.map_or("NA".into(), |v| format!("{v:.6}")),
            s.pr_failure.map_or("NA".into(), |v| format!("{v:.6}")),
        ));
    }
    let iterations_path = common.out_dir.join("perseus-iterations.csv");
    std::fs::write(&iterations_path, iterations_csv)?;
    let mut manifest = RunManifest::new(
        "solve-perseus",
        &case,
        common.seed,
        serde_json::json!({
            "gamma": config.gamma,
            "shaping_c": config.shaping_c,
            "bank_size": config.bank_size,
            "stop_patience": config.stop_patience,
            "eval_every": config.eval_every,
            "eval_episodes": config.eval_episodes,
            "max_iterations": config.max_iterations,
        }),
    );
    manifest.artifacts.push(policy_path.display().to_string());
    manifest
        .artifacts
        .push(iterations_path.display().to_string());
    manifest.save(&common.out_dir.join("manifest-solve-perseus.json"))?;
    println!(
        "solved {} with {} alpha-vectors ({} iterations); policy written to {}",
        case.name,
        policy.alphas.len(),
        stats.len(),
        policy_path.display()
    );
    Ok(())
}

fn solve_drl(case_name: &str, common: &CommonOpts) -> Result<()> {
    let mut case = CaseSpec::preset(case_name)?;
    let mut config = TrainerConfig::default();
    // The benchmark architecture: 512 hidden units for the small isotropic
    // case, 1024 for the larger ones.
    if case.state_count() > 2000 {
        config.hidden_units = 1024;
    }
    if let Some(path) = &common.config {
        ConfigOverlay::from_file(path)?.apply(&mut case, Some(&mut config), None)?;
    }
    let spec = NetworkSpec::three_layer(case.state_count(), config.hidden_units);
    let (weights, curve) = train(&case, &spec, &config, common.seed)?;
    std::fs::create_dir_all(&common.out_dir)?;
    let weights_path = common.out_dir.join(format!("{}.weights", case.name));
    save_weights(&weights_path, &weights, &case.fingerprint())?;
    let curve_path = common.out_dir.join("training-curve.csv");
    std::fs::write(
        &curve_path,
        olfactory_search::drl::training_curve_csv(&curve),
    )?;
    let mut manifest = RunManifest::new(
        "solve-drl",
        &case,
        common.seed,
        serde_json::to_value(SerializableTrainer::from(&config))
            .map_err(|e| Error::Artifact(e.to_string()))?,
    );
    manifest.artifacts.push(weights_path.display().to_string());
    manifest.artifacts.push(curve_path.display().to_string());
    manifest.save(&common.out_dir.join("manifest-solve-drl.json"))?;
    println!(
        "trained {} ({} parameters, {} iterations); weights written to {}",
        case.name,
        weights.param_count(),
        curve.len(),
        weights_path.display()
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct SerializableTrainer {
    lr: f64,
    epsilon_init: f64,
    epsilon_floor: f64,
    epsilon_decay: f64,
    memory_size: usize,
    minibatch_size: usize,
    new_transitions_per_it: usize,
    gd_steps_per_it: usize,
    update_target_network_it: usize,
    hidden_units: usize,
    max_iterations: usize,
    eval_every: usize,
    eval_episodes: usize,
}

impl From<&TrainerConfig> for SerializableTrainer {
    fn from(c: &TrainerConfig) -> Self {
        SerializableTrainer {
            lr: c.lr,
            epsilon_init: c.epsilon_init,
            epsilon_floor: c.epsilon_floor,
            epsilon_decay: c.epsilon_decay,
            memory_size: c.memory_size,
            minibatch_size: c.minibatch_size,
            new_transitions_per_it: c.new_transitions_per_it,
            gd_steps_per_it: c.gd_steps_per_it,
            update_target_network_it: c.update_target_network_it,
            hidden_units: c.hidden_units,
            max_iterations: c.max_iterations,
            eval_every: c.eval_every,
            eval_episodes: c.eval_episodes,
        }
    }
}

fn replay(trajectory: &Path) -> Result<()> {
    let text = std::fs::read_to_string(trajectory)?;
    let record = trajectory_import(&text)?;
    let case = CaseSpec::preset(&record.case)?;
    let steps = olfactory_search::eval::replay_trajectory(&case, &record)?;
    println!(
        "case {} policy {} seed {} episode {}: {} steps, {}",
        record.case,
        record.policy,
        record.seed,
        record.episode_index,
        steps,
        if record.failed {
            "failed"
        } else {
            "source found"
        }
    );
    for s in &record.steps {
        let obs = match s.observation {
            olfactory_search::env::Observation::Terminal => "omega".to_string(),
            olfactory_search::env::Observation::Hits(h) => h.to_string(),
        };
        println!(
            "t={} pos=({},{}) action={} h={}",
            s.t,
            s.pos.x,
            s.pos.y,
            s.action.name(),
            obs
        );
    }
    println!("trajectory verified: {steps} steps consistent with case dynamics");
    Ok(())
}

fn plot(input: &Path, out_dir: &Path) -> Result<()> {
    let text = std::fs::read_to_string(input)?;
    let stem = input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("plot")
        .to_string();
    let written = if text.starts_with("# trajectory v1") {
        let record = trajectory_import(&text)?;
        let case = CaseSpec::preset(&record.case).ok();
        emit_trajectory_plot(&record, case.as_ref(), out_dir, &format!("{stem}-plot"))?
    } else if text.starts_with(REPORT_CSV_HEADER) {
        let reports = BenchmarkReport::parse_csv(&text)?;
        emit_report_plot(&reports, out_dir, &format!("{stem}-plot"))?
    } else {
        return Err(Error::Artifact(
            "input is neither a trajectory file nor a benchmark report CSV".into(),
        ));
    };
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
