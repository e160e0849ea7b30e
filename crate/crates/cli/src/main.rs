use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qmt_cli::runner::{ensure_parent, with_suffix};
use qmt_cli::{
    apply_override, build_instance, emit_report, emit_sweep_report, parse_method, run_experiment, run_sweep,
    CliError, ExperimentConfig, ReportFormat,
};
use qmt_core::probe::generate_dataset;
use qmt_core::sgd::Fitter;
use qmt_core::{score_reconstruction, OptimConfig, PovmSet, ProbabilityTable, ProbeEnsemble};

#[derive(Parser)]
#[command(name = "qmt", version, about = "Measurement tomography by mini-batch gradient descent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the scenario and write the simulated data set only.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit a POVM to an existing data set.
    Fit {
        /// Probability table CSV (`outcome,probe,probability`).
        #[arg(long)]
        data: PathBuf,
        /// Probe ensemble JSON.
        #[arg(long)]
        probes: PathBuf,
        /// Reference POVM JSON to score against.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Full pipeline for every repeat and method of a config.
    Benchmark {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Grid over N, k, λ and methods.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed (repeat r uses seed + r).
    #[arg(long)]
    seed: Option<u64>,
    /// Output path prefix.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit timings so every output file is reproducible byte for byte.
    #[arg(long)]
    deterministic: bool,
    /// Method such as HONEST-MLE; repeat to compare several.
    #[arg(long = "method")]
    methods: Vec<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Any config field, e.g. `--set optimizer.state_batch=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl Common {
    fn raw_config(&self) -> Result<toml::Value, CliError> {
        let mut value = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => toml::Value::Table(Default::default()),
        };
        let mut sets = Vec::new();
        if let Some(s) = self.seed {
            sets.push(format!("base_seed={s}"));
            sets.push(format!("optimizer.seed={s}"));
        }
        if let Some(out) = &self.out {
            sets.push(format!("out={}", toml::Value::String(out.display().to_string())));
        }
        if self.deterministic {
            sets.push("deterministic=true".into());
        }
        if let Some(n) = self.iters {
            sets.push(format!("optimizer.max_iters={n}"));
        }
        if let Some(e) = self.eta {
            sets.push(format!("optimizer.eta={e:?}"));
        }
        if let Some(r) = self.repeats {
            sets.push(format!("repeats={r}"));
        }
        if !self.methods.is_empty() {
            let list: Vec<toml::Value> = self.methods.iter().map(|m| toml::Value::String(m.clone())).collect();
            sets.push(format!("methods={}", toml::Value::Array(list)));
        }
        for s in sets.iter().chain(&self.sets) {
            apply_override(&mut value, s)?;
        }
        Ok(value)
    }

    fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        if self.config.is_none() && !self.sets.iter().any(|s| s.starts_with("scenario.")) {
            return Err(CliError::Config("--config is required (or --set scenario.kind=...)".into()));
        }
        ExperimentConfig::from_value(self.raw_config()?)
    }
}

fn simulate(common: &Common) -> Result<(), CliError> {
    let cfg = common.experiment()?;
    let inst = build_instance(&cfg.scenario, cfg.base_seed)?;
    let table = generate_dataset(&inst.truth, &inst.probes, cfg.noise)?;
    let prefix = cfg.out_prefix();
    let data = with_suffix(&prefix, "_data.csv");
    ensure_parent(&data)?;
    table.save_csv(&data)?;
    inst.probes.save_json(&with_suffix(&prefix, "_probes.json"))?;
    inst.truth.save_json(&with_suffix(&prefix, "_truth.json"))?;
    println!("wrote {}", data.display());
    Ok(())
}

fn fit(data: &Path, probes: &Path, reference: Option<&Path>, common: &Common) -> Result<(), CliError> {
    let raw = common.raw_config()?;
    let table = raw.as_table().expect("config root is a table");
    let optimizer = table.get("optimizer").cloned().unwrap_or(toml::Value::Table(Default::default()));
    let mut opt: OptimConfig = optimizer.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    let methods: Vec<String> = match table.get("methods") {
        Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?,
        None => Vec::new(),
    };
    match methods.as_slice() {
        [] => {}
        [m] => {
            let (p, l) = parse_method(m)?;
            opt.parameterization = p;
            opt.loss = l;
        }
        _ => return Err(CliError::Config("fit takes a single method".into())),
    }
    opt.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let deterministic = table.get("deterministic").and_then(|v| v.as_bool()).unwrap_or(false);
    let prefix = table
        .get("out")
        .and_then(|v| v.as_str())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("results/fit"));

    let table = ProbabilityTable::load_csv(data)?;
    let probes = ProbeEnsemble::load_json(probes)?;
    let reference = reference.map(PovmSet::load_json).transpose()?;
    let mut fitter = Fitter::new(&table, &probes, &opt, None)?;
    if let Some(r) = &reference {
        fitter = fitter.with_reference(r, &probes);
    }
    let (est, trace) = fitter.run()?;
    let povm_path = with_suffix(&prefix, "_povm.json");
    ensure_parent(&povm_path)?;
    est.save_json(&povm_path)?;
    trace.save_csv(&with_suffix(&prefix, "_trace.csv"), !deterministic)?;
    if let Some(r) = &reference {
        let rec = score_reconstruction(r, &est, &probes)?;
        rec.save_csv(&with_suffix(&prefix, "_metrics.csv"))?;
        println!(
            "{} mean frobenius_sq {:.3e}, mean wasserstein {:.3e}",
            opt.method_name(),
            rec.mean_frobenius,
            rec.mean_wasserstein
        );
    }
    println!("wrote {}", povm_path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common } => simulate(&common),
        Command::Fit { data, probes, reference, common } => fit(&data, &probes, reference.as_deref(), &common),
        Command::Benchmark { common, format } => {
            let format = ReportFormat::parse(&format)?;
            let cfg = common.experiment()?;
            let report = run_experiment(&cfg)?;
            for r in &report.runs {
                println!(
                    "{} {} {} r{}: mean frobenius_sq {:.3e}, mean wasserstein {:.3e}",
                    r.scenario, r.param, r.method, r.repeat, r.metrics.mean_frobenius, r.metrics.mean_wasserstein
                );
            }
            println!("wrote {}", emit_report(&report, format)?.display());
            Ok(())
        }
        Command::Sweep { common, format } => {
            let format = ReportFormat::parse(&format)?;
            let cfg = common.experiment()?;
            let reports = run_sweep(&cfg)?;
            let path = emit_sweep_report(&reports, &cfg.out_prefix(), cfg.deterministic, format)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
