use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use irsa_harness::checks;
use irsa_harness::config::ExperimentConfig;
use irsa_harness::coverage::{coverage_experiment, CoverageSpec};
use irsa_harness::convergence::{convergence_experiment, ConvergenceSpec, TraceKind};
use irsa_harness::report::{self, emit_report, Check, Table};
use irsa_harness::sweep::{run_sweep, RepSeeds, SweepSpec, Variant};
use irsa_harness::virtual_compare::{compare_virtual, VirtualCompareSpec};
use irsa_harness::waterfall::{waterfall_suite, WaterfallSpec};
use irsa_harness::{HarnessError, Result};
use irsa_rl::environment::{train, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "irsa-rl", version, about = "Decentralized Q-learning for IRSA: experiments and reports")]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV files and summary.txt.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Monte Carlo frames per evaluation.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Independent repetitions per point.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Protocol variant(s), comma separated or repeated.
    #[arg(long, global = true, value_delimiter = ',')]
    variant: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Slotted ALOHA and vanilla IRSA over the sweep loads.
    Baseline,
    /// Train learners at the configured load and dump traces and tables.
    Train,
    /// Evaluate variants at the configured load.
    Eval,
    /// Full protocol sweep.
    Sweep,
    /// In-episode ε-convergence time of the mean-reward trace.
    Convergence,
    /// Training-length grid and convergence with and without virtual experience.
    VirtualCompare,
    /// Random versus low- and high-load learned parameterizations.
    Waterfall,
}

struct Run {
    config: ExperimentConfig,
    variants: Option<Vec<Variant>>,
}

impl Run {
    fn new(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        if let Some(workers) = cli.workers {
            config.workers = workers;
        }
        if let Some(trials) = cli.trials {
            config.sweep.trials = trials;
            config.virtual_compare.trials = trials;
            config.waterfall.trials = trials;
        }
        if let Some(reps) = cli.reps {
            config.sweep.repetitions = reps;
            config.convergence.repetitions = reps;
            config.virtual_compare.repetitions = reps;
            config.waterfall.repetitions = reps;
            config.coverage.repetitions = reps;
        }
        let variants = if cli.variant.is_empty() {
            None
        } else {
            Some(cli.variant.iter().map(|v| v.parse()).collect::<Result<Vec<Variant>>>()?)
        };
        config.validate()?;
        if !config.train.load_schedule.is_empty() {
            eprintln!("note: load_schedule is parsed but runs hold the load constant");
        }
        Ok(Self { config, variants })
    }

    fn spec(&self, default: &[Variant]) -> Result<SweepSpec> {
        let mut spec = self.config.sweep_spec()?;
        spec.variants = self.variants.clone().unwrap_or_else(|| default.to_vec());
        Ok(spec)
    }

    fn base(&self) -> Result<TrainConfig<f64>> {
        self.config.train_config()
    }
}

fn baseline(run: &Run) -> Result<(Vec<Table>, Vec<Check>)> {
    let spec = run.spec(&[Variant::SlottedAloha, Variant::VanillaIrsa])?;
    let rows = run_sweep(&spec, &run.base()?, run.config.seed, run.config.workers)?;
    Ok((vec![report::sweep_table("baseline", &rows)], Vec::new()))
}

fn train_cmd(run: &Run) -> Result<(Vec<Table>, Vec<Check>)> {
    let base = run.base()?;
    let virtual_experience = match run.variants.as_deref() {
        None => base.virtual_experience,
        Some([Variant::DecRl]) => false,
        Some([Variant::DecRlVirtual]) => true,
        Some(_) => {
            return Err(HarnessError::Config(
                "train takes a single learned variant: dec_rl or dec_rl_virtual".into(),
            ))
        }
    };
    let reps = run.config.sweep.repetitions.max(1);
    let mut traces = Vec::with_capacity(reps);
    let d = base.params.max_degree;
    let mut columns: Vec<String> = vec!["trial".into(), "node".into()];
    columns.extend((1..=d).map(|l| format!("lambda_{l}")));
    let mut policies = Table {
        name: "policies".into(),
        columns,
        rows: Vec::new(),
    };
    let mut qtables = Table::new("qtables", &["trial", "node", "levels", "action", "q_value", "visits"]);
    for trial in 0..reps {
        let config = TrainConfig {
            virtual_experience,
            seed: RepSeeds::new(run.config.seed, base.load, base.n_slots, trial).train,
            ..base.clone()
        };
        let outcome = train(&config)?;
        for (node, policy) in outcome.policies().iter().enumerate() {
            let mut row = vec![trial.to_string(), node.to_string()];
            row.extend(policy.coeffs().iter().map(|&c| report::num(c)));
            policies.push(row);
        }
        for (node, state) in outcome.network.nodes.iter().enumerate() {
            for line in state.q.to_text().lines() {
                let fields: Vec<&str> = line.rsplitn(4, ',').collect();
                if let [visits, q, action, levels] = fields[..] {
                    qtables.push(vec![
                        trial.to_string(),
                        node.to_string(),
                        levels.replace(',', " "),
                        action.to_string(),
                        q.to_string(),
                        visits.to_string(),
                    ]);
                }
            }
        }
        traces.push(outcome.trace);
    }
    Ok((vec![report::trace_table("trace", &traces), policies, qtables], Vec::new()))
}

fn eval(run: &Run) -> Result<(Vec<Table>, Vec<Check>)> {
    let base = run.base()?;
    let mut spec = run.spec(&[Variant::VanillaIrsa, Variant::DecRl])?;
    spec.loads = vec![base.load];
    spec.frame_sizes = vec![base.n_slots];
    let rows = run_sweep(&spec, &base, run.config.seed, run.config.workers)?;
    Ok((vec![report::sweep_table("eval", &rows)], Vec::new()))
}

fn sweep(run: &Run) -> Result<(Vec<Table>, Vec<Check>)> {
    let spec = run.spec(&Variant::ALL)?;
    let rows = run_sweep(&spec, &run.base()?, run.config.seed, run.config.workers)?;
    let mut checks = Vec::new();
    if spec.variants.contains(&Variant::DecRl) && spec.variants.contains(&Variant::VanillaIrsa) {
        checks.push(checks::protocol_ordering(&rows, 0.6, 0.02, &[0.8, 0.9, 1.0]));
    }
    Ok((vec![report::sweep_table("sweep", &rows)], checks))
}

fn convergence(run: &Run) -> Result<(Vec<Table>, Vec<Check>)> {
    let c = &run.config.convergence;
    let spec = ConvergenceSpec {
        loads: c.loads.clone(),
        variants: vec![false],
        repetitions: c.repetitions,
        epsilon: c.epsilon,
        level: c.level,
        kind: TraceKind::Episode(c.episode),
    };
    let report = convergence_experiment(&spec, &run.base()?, run.config.seed, run.config.workers)?;
    let limits: Vec<(f64, usize)> = [(0.2, 10), (0.4, 15)]
        .into_iter()
        .filter(|(g, _)| c.loads.contains(g))
        .collect();
    let checks = if limits.is_empty() {
        Vec::new()
    } else {
        vec![checks::convergence_speed(&report, &limits)]
    };
    Ok((vec![report::convergence_table("convergence", &report)], checks))
}

fn virtual_compare(run: &Run) -> Result<(Vec<Table>, Vec<Check>)> {
    let v = &run.config.virtual_compare;
    let base = run.base()?;
    let spec = VirtualCompareSpec {
        load: v.load,
        grid: v.grid.clone(),
        repetitions: v.repetitions,
        trials: v.trials,
        level: run.config.level,
        evaluation: run.config.sweep.evaluation,
    };
    let cmp = compare_virtual(&spec, &base, run.config.seed, run.config.workers)?;
    let conv = ConvergenceSpec {
        loads: v.speedup_loads.clone(),
        variants: vec![false, true],
        repetitions: run.config.convergence.repetitions,
        epsilon: run.config.convergence.epsilon,
        level: run.config.convergence.level,
        kind: TraceKind::LearningCurve,
    };
    let report = convergence_experiment(&conv, &base, run.config.seed, run.config.workers)?;
    let c = &run.config.coverage;
    let mut cover_base = base.clone();
    cover_base.params.window = c.window;
    let cover_spec = CoverageSpec {
        load: c.load,
        repetitions: c.repetitions,
        budget: c.budget,
        level: run.config.convergence.level,
    };
    let coverage = coverage_experiment(&cover_spec, &cover_base, run.config.seed, run.config.workers)?;
    let (plain, virt) = (cmp.argmax(Variant::DecRl), cmp.argmax(Variant::DecRlVirtual));
    let checks = vec![
        Check::new(
            "virtual argmax length",
            matches!((plain, virt), (Some(p), Some(q)) if q <= p),
            format!("plain {plain:?}, virtual {virt:?}"),
        ),
        checks::virtual_speedup(&report, &v.speedup_loads, 0.5),
        Check::new(
            "coverage ratio",
            coverage.within_factor(2.0),
            format!(
                "measured {:.3} vs predicted {}",
                coverage.measured_ratio(),
                coverage.predicted_ratio.map_or("none".into(), |p| format!("{p:.3}"))
            ),
        ),
    ];
    Ok((
        vec![
            report::virtual_compare_table("virtual_compare", &cmp),
            report::convergence_table("virtual_convergence", &report),
            report::coverage_table("coverage", &coverage),
        ],
        checks,
    ))
}

fn waterfall(run: &Run) -> Result<(Vec<Table>, Vec<Check>)> {
    let w = &run.config.waterfall;
    let base = run.base()?;
    let spec = WaterfallSpec {
        loads: w.loads.clone(),
        presets: run.config.waterfall_presets(),
        repetitions: w.repetitions,
        trials: w.trials,
        level: run.config.level,
        evaluation: run.config.sweep.evaluation,
    };
    let rows = waterfall_suite(&spec, &base, run.config.seed, run.config.workers)?;
    let mut onset = run.spec(&[Variant::VanillaIrsa])?;
    onset.variants = vec![Variant::VanillaIrsa];
    onset.loads = vec![0.8, 1.0];
    onset.repetitions = w.repetitions;
    onset.trials = w.trials;
    let vanilla = run_sweep(&onset, &base, run.config.seed, run.config.workers)?;
    let checks = vec![checks::waterfall(&vanilla, &rows, 0.8, 1.0, 0.6)];
    Ok((
        vec![report::waterfall_table("waterfall", &rows), report::sweep_table("waterfall_onset", &vanilla)],
        checks,
    ))
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let run = Run::new(cli)?;
    let (tables, checks) = match cli.command {
        Command::Baseline => baseline(&run)?,
        Command::Train => train_cmd(&run)?,
        Command::Eval => eval(&run)?,
        Command::Sweep => sweep(&run)?,
        Command::Convergence => convergence(&run)?,
        Command::VirtualCompare => virtual_compare(&run)?,
        Command::Waterfall => waterfall(&run)?,
    };
    for check in &checks {
        println!("{}", check.line());
    }
    emit_report(&cli.out, &tables, &checks)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(files) => {
            let files: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
            println!("{}", serde_json::json!({ "status": "ok", "files": files }));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
