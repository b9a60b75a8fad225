use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use radiocount::harness::{
    p_exactly_one, p_noise, p_silence, Experiment, ExperimentConfig, ExperimentStats, Predicate, SweepConfig,
    TopologySpec,
};
use radiocount::{ProtocolKind, Trace};

/// Validation error: bad arguments, config or input files.
const EXIT_INVALID: u8 = 1;
/// A run finished but missed its success threshold, or a trace failed replay.
const EXIT_FAILED: u8 = 2;

#[derive(Parser)]
#[command(name = "radiocount", version, about = "Radio network neighbor counting simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment.
    Run(RunArgs),
    /// Run every experiment listed in a grid file.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        /// Fail (exit 2) if any run's success rate is below this.
        #[arg(long)]
        min_success_rate: Option<f64>,
    },
    /// Evaluate a closed-form channel probability.
    Oracle {
        #[arg(long, value_enum)]
        formula: Formula,
        #[arg(long)]
        n: u64,
        /// Decimal (`0.25`) or exact fraction (`1/16`).
        #[arg(long)]
        p: String,
    },
    /// Check a trace file against the channel model.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        /// Re-resolve every listener's feedback on this topology.
        #[arg(long)]
        topology: Option<TopologySpec>,
        /// Collision detection was on; without it any noise is a violation.
        #[arg(long)]
        cd: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Formula {
    One,
    Silence,
    Noise,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML file with experiment fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    protocol: Option<ProtocolKind>,
    /// clique:N, star:K, random:N:P:SEED or file:PATH, optionally @W.
    #[arg(long)]
    topology: Option<TopologySpec>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cd: bool,
    /// Protocol parameter override, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_slots: Option<u64>,
    #[arg(long)]
    predicate: Option<Predicate>,
    /// Fail (exit 2) if the success rate is below this.
    #[arg(long)]
    min_success_rate: Option<f64>,
    /// Also write the full trace of trial 0 here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> Result<(ExperimentConfig, Option<f64>, Option<PathBuf>)> {
        let base = match &self.config {
            Some(path) => Some(ExperimentConfig::from_toml(
                &fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
            )?),
            None => None,
        };
        let protocol = self
            .protocol
            .or(base.as_ref().map(|c| c.protocol))
            .context("--protocol is required")?;
        let topology = self
            .topology
            .or(base.as_ref().map(|c| c.topology.clone()))
            .context("--topology is required")?;
        let mut config = base.unwrap_or_else(|| {
            let mut c = ExperimentConfig::new(protocol, topology.clone(), 1, 0);
            c.cd = false;
            c
        });
        config.protocol = protocol;
        config.topology = topology;
        config.cd |= self.cd;
        if let Some(t) = self.trials {
            config.trials = t;
        }
        if let Some(s) = self.seed {
            config.master_seed = s;
        }
        if let Some(m) = self.max_slots {
            config.max_slots = m;
        }
        if self.predicate.is_some() {
            config.predicate = self.predicate;
        }
        if self.out.is_some() {
            config.out = self.out;
        }
        for kv in &self.params {
            let (k, v) = kv.split_once('=').with_context(|| format!("--param `{kv}` is not KEY=VALUE"))?;
            config.params.set(k.trim(), v.trim())?;
        }
        Ok((config, self.min_success_rate, self.trace))
    }
}

fn check_rate(stats: &ExperimentStats, min: Option<f64>) -> bool {
    min.is_none_or(|m| stats.success_rate >= m)
}

fn run_one(config: ExperimentConfig, min_rate: Option<f64>, trace: Option<&Path>) -> Result<bool> {
    let out = config.out.clone();
    let experiment = Experiment::new(config)?;
    if let Some(path) = trace {
        let (_, t) = experiment.run_trial_traced(0);
        fs::write(path, t.to_jsonl()).with_context(|| format!("writing {}", path.display()))?;
    }
    let stats = match &out {
        Some(dir) => experiment.run_to_dir(dir)?,
        None => experiment.summarize(),
    };
    println!("{}", serde_json::to_string_pretty(&stats)?);
    let ok = check_rate(&stats, min_rate);
    if !ok {
        eprintln!(
            "success rate {:.4} below required {:.4}",
            stats.success_rate,
            min_rate.unwrap_or_default()
        );
    }
    Ok(ok)
}

fn parse_probability(s: &str) -> Result<(f64, Option<BigRational>)> {
    if let Some((a, b)) = s.split_once('/') {
        let r = BigRational::new(a.trim().parse()?, b.trim().parse()?);
        let f = a.trim().parse::<f64>()? / b.trim().parse::<f64>()?;
        return Ok((f, Some(r)));
    }
    Ok((s.parse()?, None))
}

fn oracle(formula: Formula, n: u64, p: &str) -> Result<()> {
    let (pf, exact) = parse_probability(p)?;
    if !(0.0..=1.0).contains(&pf) {
        bail!("p must lie in [0, 1]");
    }
    let value = match formula {
        Formula::One => p_exactly_one(n, pf),
        Formula::Silence => p_silence(n, pf),
        Formula::Noise => p_noise(n, pf),
    };
    println!("{value}");
    // Exact values get unwieldy quickly; print them for small n only.
    if let Some(r) = exact.filter(|_| n <= 64) {
        let e = match formula {
            Formula::One => p_exactly_one(n, r),
            Formula::Silence => p_silence(n, r),
            Formula::Noise => p_noise(n, r),
        };
        println!("{e}");
    }
    Ok(())
}

fn replay(path: &Path, topology: Option<TopologySpec>, cd: bool) -> Result<bool> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let trace = Trace::read_jsonl(BufReader::new(file))?;
    let topo = topology.map(|t| t.build()).transpose()?;
    let violations = trace.validate(topo.as_ref(), Some(cd));
    println!("slots: {}", trace.len());
    for v in violations.iter().take(20) {
        println!("violation: {v}");
    }
    if violations.len() > 20 {
        println!("... {} more", violations.len() - 20);
    }
    println!("{}", if violations.is_empty() { "trace ok" } else { "trace invalid" });
    Ok(violations.is_empty())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let (config, min_rate, trace) = args.into_config()?;
            run_one(config, min_rate, trace.as_deref())
        }
        Command::Sweep { grid, min_success_rate } => {
            let text = fs::read_to_string(&grid).with_context(|| format!("reading {}", grid.display()))?;
            let sweep = SweepConfig::from_toml(&text)?;
            // Validate everything before running anything.
            let experiments = sweep
                .run
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let mut c = c.clone();
                    c.out = sweep.run_dir(i);
                    Experiment::new(c.clone()).map(|_| c).with_context(|| format!("run {i}"))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut all_ok = true;
            for config in experiments {
                all_ok &= run_one(config, min_success_rate, None)?;
            }
            Ok(all_ok)
        }
        Command::Oracle { formula, n, p } => oracle(formula, n, &p).map(|_| true),
        Command::Replay { trace, topology, cd } => replay(&trace, topology, cd),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
