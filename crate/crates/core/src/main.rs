use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use eh_irsa::config::ScenarioConfig;
use eh_irsa::report::{csv_string, qtables_csv, write_json, SweepRow};
use eh_irsa::simulator::{aggregate, calibrate_efficiency, mean_harvest_quanta, run_all};
use eh_irsa::sweep::{preset, run_sweep_parallel, SweepSpec, PRESETS};
use eh_irsa::{sic_decode, Aggregate, Error, FrameAlloc, Result, RunSummary};

/// Energy-harvesting IRSA simulator.
#[derive(Parser)]
#[command(name = "eh-irsa", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV path; stdout when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Independent runs per point (overrides the config)
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Frames per run (overrides the config)
    #[arg(long, global = true)]
    frames: Option<usize>,
    /// Worker threads
    #[arg(long, global = true, default_value_t = default_threads())]
    parallel: usize,
    /// Also write a JSON run-log here
    #[arg(long, global = true)]
    json: Option<PathBuf>,
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario
    Run {
        /// Scenario config; defaults apply when absent
        config: Option<PathBuf>,
        /// Write final Q-tables as CSV
        #[arg(long)]
        qtables: Option<PathBuf>,
    },
    /// Sweep one parameter
    Sweep {
        /// Sweep file
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        file: Option<PathBuf>,
        /// Bundled sweep
        #[arg(long)]
        preset: Option<String>,
    },
    /// Decode a frame graph and print the result as JSON
    Decode { file: PathBuf },
    /// Print the charge efficiency giving a target mean harvest per frame
    Calibrate {
        config: Option<PathBuf>,
        /// Target harvest per frame, in packet quanta
        #[arg(long, default_value_t = 2.5)]
        target: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
    /// List bundled sweeps, or print one
    Presets { name: Option<String> },
}

impl Global {
    fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(f) = self.frames {
            cfg.frames = f;
        }
        cfg.validate()
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => std::fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig::default()),
    }
}

#[derive(Serialize)]
struct RunLog<'a> {
    config: &'a str,
    row: &'a SweepRow,
    aggregate: &'a Aggregate,
    runs: &'a [RunSummary],
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidRequest(format!("cannot build worker pool: {e}")))
}

fn run(global: &Global, config: Option<&PathBuf>, qtables: Option<&PathBuf>) -> Result<()> {
    let mut cfg = load_config(config)?;
    global.apply(&mut cfg)?;
    let summaries = pool(global.parallel)?.install(|| run_all::<f64>(&cfg))?;
    let agg = aggregate(&summaries)?;
    let row = SweepRow {
        swept_param: "none".into(),
        value: 0.0,
        scheme: cfg.scheme.as_str().into(),
        csi_mode: cfg.csi_mode.as_str().into(),
        antennas: cfg.antennas,
        mean_success_per_frame: agg.mean_success.mean,
        std: agg.mean_success.std,
        runs: cfg.runs,
        frames: cfg.frames,
        seed: cfg.seed,
    };
    global.emit(&csv_string(std::slice::from_ref(&row)))?;
    if let Some(path) = qtables {
        std::fs::write(path, qtables_csv(&summaries))?;
    }
    if let Some(path) = &global.json {
        let emitted = cfg.emit();
        write_json(
            path,
            &RunLog {
                config: &emitted,
                row: &row,
                aggregate: &agg,
                runs: &summaries,
            },
        )?;
    }
    Ok(())
}

fn sweep(global: &Global, file: Option<&PathBuf>, preset_name: Option<&str>) -> Result<()> {
    let mut spec = match (file, preset_name) {
        (Some(path), _) => SweepSpec::load(path)?,
        (None, Some(name)) => SweepSpec::parse(
            preset(name)
                .ok_or_else(|| Error::InvalidRequest(format!("unknown preset `{name}`")))?,
        )?,
        (None, None) => unreachable!("clap requires a file or a preset"),
    };
    global.apply(&mut spec.base)?;
    spec.validate()?;
    let outcome = run_sweep_parallel(&spec, global.parallel)?;
    let text = csv_string(&outcome.rows());
    // partial results still reach the output before the error is reported
    match (&global.out, &spec.output) {
        (Some(_), _) | (None, None) => global.emit(&text)?,
        (None, Some(path)) => std::fs::write(path, &text)?,
    }
    if let Some(path) = &global.json {
        write_json(path, &outcome.points)?;
    }
    outcome.into_result().map(|_| ())
}

fn decode(global: &Global, file: &PathBuf) -> Result<()> {
    let frame = FrameAlloc::parse_graph(&std::fs::read_to_string(file)?)?;
    let result = sic_decode(&frame);
    global.emit(&(serde_json::to_string_pretty(&result)? + "\n"))
}

fn calibrate(global: &Global, config: Option<&PathBuf>, target: f64, samples: usize) -> Result<()> {
    let mut cfg = load_config(config)?;
    global.apply(&mut cfg)?;
    let eff = calibrate_efficiency(&cfg, target, samples, cfg.seed)?;
    let check = ScenarioConfig {
        charge_efficiency: eff,
        ..cfg.clone()
    };
    let reached = mean_harvest_quanta(&check, samples, cfg.seed.wrapping_add(1))?;
    global.emit(&format!(
        "charge_efficiency = {eff}\n# mean harvest per frame on fresh draws: {reached} quanta\n"
    ))
}

fn presets(global: &Global, name: Option<&str>) -> Result<()> {
    match name {
        None => {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            global.emit(&(names.join("\n") + "\n"))
        }
        Some(n) => global
            .emit(preset(n).ok_or_else(|| Error::InvalidRequest(format!("unknown preset `{n}`")))?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match &cli.command {
        Command::Run { config, qtables } => run(g, config.as_ref(), qtables.as_ref()),
        Command::Sweep { file, preset } => sweep(g, file.as_ref(), preset.as_deref()),
        Command::Decode { file } => decode(g, file),
        Command::Calibrate {
            config,
            target,
            samples,
        } => calibrate(g, config.as_ref(), *target, *samples),
        Command::Presets { name } => presets(g, name.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
