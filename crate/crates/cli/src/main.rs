use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tsnsim_core::orchestrator::export::{boxplot_svg, export, read_json, ExportError, RESULT_JSON};
use tsnsim_core::orchestrator::presets;
use tsnsim_core::{run_scenario, sweep, ConfigError, OutputFormat, RunResult, ScenarioConfig, ScenarioError};

#[derive(Parser)]
#[command(
    name = "tsnsim",
    version,
    about = "Simulate a single-switch TSN testbed and measure one-way latency"
)]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run a scenario once per value of one key.
    Sweep {
        scenario: PathBuf,
        /// `key=v1,v2,...`, e.g. `gcl.slot_units=1,3`.
        #[arg(long)]
        vary: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Summarize result directories side by side and draw a boxplot.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Boxplot destination.
        #[arg(long, default_value = "compare.svg")]
        svg: PathBuf,
    },
    /// Run a bundled scenario by id.
    Reproduce {
        /// Bundled scenario id; omit with `--list`.
        id: Option<String>,
        /// Print the bundled ids and exit.
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        opts: RunOpts,
    },
}

#[derive(Args)]
struct RunOpts {
    /// Replace the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: `results/<scenario name>`).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Output formats; repeat or comma-separate.
    #[arg(short, long, value_delimiter = ',')]
    format: Vec<Format>,
    /// Override any scenario key, e.g. `--set switch.shared_buffer_bytes=24000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Svg => OutputFormat::Svg,
        }
    }
}

fn split_pair(s: &str) -> Result<(String, String), ConfigError> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(ConfigError::Invalid {
            key: s.to_string(),
            reason: "expected KEY=VALUE".into(),
        }),
    }
}

impl RunOpts {
    fn overrides(&self) -> Result<Vec<(String, String)>, ConfigError> {
        let mut o = self.set.iter().map(|s| split_pair(s)).collect::<Result<Vec<_>, _>>()?;
        if let Some(seed) = self.seed {
            o.push(("seed".into(), seed.to_string()));
        }
        Ok(o)
    }

    fn formats(&self, cfg: &ScenarioConfig) -> Vec<OutputFormat> {
        if self.format.is_empty() {
            cfg.output.formats.clone()
        } else {
            self.format.iter().map(|&f| f.into()).collect()
        }
    }

    fn out_dir(&self, cfg: &ScenarioConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| Path::new("results").join(display_name(cfg)))
    }
}

fn display_name(cfg: &ScenarioConfig) -> &str {
    if cfg.name.is_empty() {
        "scenario"
    } else {
        &cfg.name
    }
}

fn read_scenario(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })
        .map_err(Into::into)
}

fn summarize(r: &RunResult) {
    println!(
        "{} (seed {}, {} retries, max |PTP deviation| {} ns)",
        r.scenario,
        r.seed,
        r.retry_count,
        r.max_abs_deviation_ns.map_or("n/a".into(), |d| d.to_string())
    );
    println!(
        "  {:<16} {:>8} {:>10} {:>10} {:>10} {:>10} {:>8}",
        "stream", "frames", "min", "mean", "p99.9", "max", "drops"
    );
    for s in &r.streams {
        match &s.stats {
            Some(st) => println!(
                "  {:<16} {:>8} {:>10} {:>10.1} {:>10} {:>10} {:>8}",
                s.name,
                st.count,
                st.min,
                st.mean,
                st.p999,
                st.max,
                s.tally.switch_drops + s.tally.sender_drops
            ),
            None => println!("  {:<16} {:>8}", s.name, "no samples"),
        }
    }
}

fn run_and_export(text: &str, opts: &RunOpts) -> Result<()> {
    let cfg = ScenarioConfig::from_toml_with_overrides(text, &opts.overrides()?)?;
    log::info!("running {}", display_name(&cfg));
    let result = run_scenario(&cfg)?;
    let dir = opts.out_dir(&cfg);
    let files = export(&result, &dir, &opts.formats(&cfg))?;
    summarize(&result);
    println!("  wrote {} file(s) to {}", files.len(), dir.display());
    Ok(())
}

fn cmd_sweep(path: &Path, vary: &str, opts: &RunOpts) -> Result<()> {
    let text = read_scenario(path)?;
    let (key, list) = split_pair(vary)?;
    let values: Vec<String> = list
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(ConfigError::Invalid {
            key,
            reason: "no values to sweep".into(),
        }
        .into());
    }
    let base = ScenarioConfig::from_toml_with_overrides(&text, &opts.overrides()?)?;
    let root = opts.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let formats = opts.formats(&base);
    let mut first_err = None;
    for point in sweep(&text, &key, &values, &opts.overrides()?) {
        match point.result {
            Ok(r) => {
                let dir = root.join(&r.scenario);
                export(&r, &dir, &formats)?;
                summarize(&r);
                println!("  wrote {}", dir.display());
            }
            Err(e) => {
                eprintln!("{key}={}: {e}", point.value);
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn cmd_compare(dirs: &[PathBuf], svg: &Path) -> Result<()> {
    let mut results = Vec::with_capacity(dirs.len());
    for d in dirs {
        let r = read_json(&d.join(RESULT_JSON))?;
        summarize(&r);
        results.push((r.scenario.clone(), r));
    }
    let refs: Vec<(String, &RunResult)> = results.iter().map(|(n, r)| (n.clone(), r)).collect();
    fs::write(svg, boxplot_svg(&refs)).with_context(|| format!("writing {}", svg.display()))?;
    println!("wrote {}", svg.display());
    Ok(())
}

fn cmd_reproduce(id: Option<&str>, list: bool, opts: &RunOpts) -> Result<()> {
    if list {
        for id in presets::ids() {
            println!("{id}");
        }
        return Ok(());
    }
    let Some(id) = id else {
        bail!(ConfigError::Invalid {
            key: "id".into(),
            reason: "give a scenario id or --list".into(),
        });
    };
    let Some(text) = presets::text(id) else {
        bail!(ConfigError::Invalid {
            key: id.into(),
            reason: "unknown scenario id (see `tsnsim reproduce --list`)".into(),
        });
    };
    run_and_export(text, opts)
}

/// 0 ok, 1 configuration, 2 scenario (retries exhausted), 3 I/O.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ConfigError>() {
            return if matches!(e, ConfigError::Io { .. }) { 3 } else { 1 };
        }
        if let Some(e) = cause.downcast_ref::<ScenarioError>() {
            return match e {
                ScenarioError::Config(ConfigError::Io { .. }) => 3,
                ScenarioError::Config(_) => 1,
                ScenarioError::RetryExhausted { .. } => 2,
            };
        }
        if cause.downcast_ref::<ExportError>().is_some() || cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match &cli.command {
        Command::Run { scenario, opts } => read_scenario(scenario).and_then(|t| run_and_export(&t, opts)),
        Command::Sweep { scenario, vary, opts } => cmd_sweep(scenario, vary, opts),
        Command::Compare { dirs, svg } => cmd_compare(dirs, svg),
        Command::Reproduce { id, list, opts } => cmd_reproduce(id.as_deref(), *list, opts),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
