//! `sosim` command line: `stats`, `synth`, `simulate` and `profiles`.
//!
//! Exit codes: 0 on success, 1 for input or data errors, 2 for usage errors.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::energy::EnergyProfiles;
use crate::error::Error;
use crate::sensor_frontend::quantize;
use crate::sim::{self, ReportFormat, SoConfig, Training};
use crate::smart_object::{ModelParams, DEFAULT_WINDOW_LEN};
use crate::trace::{self, ActionInterval, EventLog, SyntheticConfig};

#[derive(Debug, Parser)]
#[command(name = "sosim", version, about = "Smart-object vs transmit-all sensor network simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dataset statistics for a sensor subset.
    Stats(StatsArgs),
    /// Write a synthetic annotated trace.
    Synth(SynthArgs),
    /// Replay a trace through both architectures and report.
    Simulate(SimulateArgs),
    /// Print the default energy profiles as a loadable config file.
    Profiles(ProfilesArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Comma-separated sensor ids.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sensors: Vec<String>,
    /// Emit JSON instead of a text table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML generator config; the built-in kitchen scenario when omitted.
    #[arg(long)]
    pub synth_config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the effective generator config instead of a trace.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub synth_config: Option<PathBuf>,
    /// Sensors wired to the smart object (required with --trace).
    #[arg(long, value_delimiter = ',')]
    pub sensors: Vec<String>,
    /// Actions to learn; every annotated action when omitted.
    #[arg(long, value_delimiter = ',')]
    pub actions: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_WINDOW_LEN)]
    pub window_seconds: usize,
    #[arg(long, env = "SOSIM_PROFILE")]
    pub profile: Option<PathBuf>,
    /// Learn from the whole trace and add the count-based daily figures; with
    /// no trace, build the report from --events-per-day/--actions-per-day.
    #[arg(long)]
    pub paper_mode: bool,
    #[arg(long)]
    pub train_days: Option<u32>,
    #[arg(long, default_value_t = 1795)]
    pub events_per_day: u64,
    #[arg(long, default_value_t = 7)]
    pub actions_per_day: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Charge event-free seconds one FIFO update.
    #[arg(long)]
    pub strict_ticks: bool,
    #[arg(long, default_value_t = 60)]
    pub slack_seconds: i64,
    /// Price the full buffer traversal instead of the accumulator update.
    #[arg(long)]
    pub naive_buffer: bool,
    /// Price the unsimplified naive-Bayes evaluation.
    #[arg(long)]
    pub naive_algorithm: bool,
    /// Write the trained models as a JSON array.
    #[arg(long)]
    pub models_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfilesArgs {
    #[arg(long)]
    pub json: bool,
    /// Show a profile file merged over the defaults instead.
    #[arg(long, env = "SOSIM_PROFILE")]
    pub profile: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command, writing
/// normal output to `out`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Data(m) => eprintln!("sosim: {m}"),
            }
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> CliResult {
    match command {
        Command::Stats(a) => cmd_stats(&a, out),
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Profiles(a) => cmd_profiles(&a, out),
    }
}

fn load_log(path: &Path) -> CliResult<EventLog> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let loaded = trace::load_trace(BufReader::new(file))?;
    if !loaded.diagnostics.is_empty() {
        eprintln!("{}: skipped {} malformed lines", path.display(), loaded.diagnostics.len());
    }
    Ok(loaded.log)
}

fn load_profiles(path: Option<&Path>) -> CliResult<EnergyProfiles> {
    match path {
        None => Ok(EnergyProfiles::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            Ok(EnergyProfiles::parse(&text)?)
        }
    }
}

fn load_synth_config(path: Option<&Path>, seed: Option<u64>) -> CliResult<SyntheticConfig> {
    let mut config = match path {
        None => SyntheticConfig::kitchen(7),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            SyntheticConfig::from_toml(&text)?
        }
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

#[derive(Debug, Serialize)]
pub struct TraceStats {
    pub records: usize,
    pub sensors: usize,
    pub annotation_markers: usize,
    pub annotated_intervals: usize,
    pub days: i64,
    pub subset: Vec<String>,
    pub subset_records: u64,
    pub subset_on_events: usize,
    pub events_per_day: f64,
    pub on_events_per_day: f64,
    pub hourly_events_per_day: [f64; 24],
}

pub fn trace_stats(log: &EventLog, subset: &[usize]) -> crate::error::Result<TraceStats> {
    let names = subset
        .iter()
        .map(|&i| log.registry().name(i).unwrap_or("?").to_string())
        .collect();
    let hourly = trace::hourly_histogram(log, subset)?;
    let stream = quantize(log, subset)?;
    let days = log.span_days();
    Ok(TraceStats {
        records: log.records().len(),
        sensors: log.registry().len(),
        annotation_markers: log.records().iter().filter(|r| r.annotation.is_some()).count(),
        annotated_intervals: log.action_intervals().intervals.len(),
        days,
        subset: names,
        subset_records: trace::hourly_counts(log, subset)?.iter().sum(),
        subset_on_events: stream.len(),
        events_per_day: trace::daily_event_rate(log, subset)?,
        on_events_per_day: stream.len() as f64 / days as f64,
        hourly_events_per_day: hourly,
    })
}

fn nonempty_sensors(sensors: &[String]) -> CliResult<Vec<String>> {
    let s: Vec<String> = sensors.iter().filter(|s| !s.is_empty()).cloned().collect();
    if s.is_empty() {
        return Err(CliError::Usage("--sensors needs at least one sensor id".into()));
    }
    Ok(s)
}

pub fn cmd_stats(args: &StatsArgs, out: &mut dyn Write) -> CliResult {
    let sensors = nonempty_sensors(&args.sensors)?;
    let log = load_log(&args.trace)?;
    let subset = log.registry().resolve(&sensors)?;
    let stats = trace_stats(&log, &subset)?;
    if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&stats).map_err(Error::from)?)?;
        return Ok(());
    }
    writeln!(out, "records              {}", stats.records)?;
    writeln!(out, "sensors              {}", stats.sensors)?;
    writeln!(out, "annotation markers   {}", stats.annotation_markers)?;
    writeln!(out, "annotated intervals  {}", stats.annotated_intervals)?;
    writeln!(out, "days                 {}", stats.days)?;
    writeln!(out, "subset               {}", stats.subset.join(","))?;
    writeln!(out, "subset records       {}", stats.subset_records)?;
    writeln!(out, "subset ON events     {}", stats.subset_on_events)?;
    writeln!(out, "events/day           {:.1}", stats.events_per_day)?;
    writeln!(out, "ON events/day        {:.1}", stats.on_events_per_day)?;
    writeln!(out, "hour  events/day")?;
    for (h, v) in stats.hourly_events_per_day.iter().enumerate() {
        writeln!(out, "{h:02}    {v:.2}")?;
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> CliResult {
    let config = load_synth_config(args.synth_config.as_deref(), args.seed)?;
    if args.print_config {
        write!(out, "{}", config.to_toml())?;
        return Ok(());
    }
    let synthetic = trace::generate_synthetic(&config)?;
    match &args.out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(File::create(path)?);
            trace::write_trace(&synthetic.log, &mut f)?;
            f.flush()?;
            writeln!(
                out,
                "wrote {} records, {} annotated actions to {}",
                synthetic.log.records().len(),
                synthetic.truth.len(),
                path.display()
            )?;
        }
        None => trace::write_trace(&synthetic.log, out)?,
    }
    Ok(())
}

enum Source {
    Trace(PathBuf),
    Synthetic(SyntheticConfig),
    Counts,
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> CliResult {
    if args.trace.is_some() && args.synth_config.is_some() {
        return Err(CliError::Usage("--trace and --synth-config are mutually exclusive".into()));
    }
    if args.paper_mode && args.train_days.is_some() {
        return Err(CliError::Usage("--paper-mode trains on the whole trace; drop --train-days".into()));
    }
    if args.window_seconds == 0 {
        return Err(CliError::Usage("--window-seconds must be positive".into()));
    }
    if args.slack_seconds < 0 {
        return Err(CliError::Usage("--slack-seconds must be non-negative".into()));
    }
    let source = match (&args.trace, &args.synth_config) {
        (Some(p), _) => Source::Trace(p.clone()),
        (None, Some(_)) => Source::Synthetic(load_synth_config(args.synth_config.as_deref(), args.seed)?),
        (None, None) if args.paper_mode => Source::Counts,
        (None, None) => Source::Synthetic(load_synth_config(None, args.seed)?),
    };
    if matches!(source, Source::Trace(_)) {
        nonempty_sensors(&args.sensors)?;
    }
    let profiles = load_profiles(args.profile.as_deref())?;
    let mut config = SoConfig {
        window_len: args.window_seconds,
        params: ModelParams::default(),
        actions: args.actions.iter().filter(|a| !a.is_empty()).cloned().collect(),
        training: Training::WholeTrace,
        buffer_optimized: !args.naive_buffer,
        algorithm_optimized: !args.naive_algorithm,
        strict_tick_accounting: args.strict_ticks,
        slack_seconds: args.slack_seconds,
    };

    let (mut report, models) = match &source {
        Source::Counts => {
            let r = sim::paper_mode_report(args.events_per_day, args.actions_per_day, &config, &profiles)?;
            (r, None)
        }
        Source::Trace(_) | Source::Synthetic(_) => {
            let (log, truth): (EventLog, Vec<ActionInterval>) = match &source {
                Source::Trace(p) => {
                    let log = load_log(p)?;
                    let annotations = log.action_intervals();
                    for d in &annotations.diagnostics {
                        log::warn!("{d}");
                    }
                    (log, annotations.intervals)
                }
                Source::Synthetic(c) => {
                    let s = trace::generate_synthetic(c)?;
                    (s.log, s.truth)
                }
                Source::Counts => unreachable!(),
            };
            let subset = if args.sensors.is_empty() {
                (0..log.registry().len()).collect()
            } else {
                log.registry().resolve(&nonempty_sensors(&args.sensors)?)?
            };
            if !args.paper_mode {
                let k = args.train_days.unwrap_or_else(|| (log.span_days() / 2).max(1) as u32);
                config.training = Training::FirstDays(k);
            }
            let stream = quantize(&log, &subset)?;
            let (mut report, object) = sim::simulate(&stream, &truth, &subset, &config, &profiles)?;
            if !args.paper_mode {
                report.analytic = None;
            }
            report.config.sensors = subset
                .iter()
                .map(|&i| log.registry().name(i).unwrap_or("?").to_string())
                .collect();
            (report, Some(object.dumps()))
        }
    };

    report.config.source = match &source {
        Source::Trace(p) => format!("trace:{}", p.display()),
        Source::Synthetic(_) => "synthetic".into(),
        Source::Counts => "counts".into(),
    };
    report.config.seed = match &source {
        Source::Synthetic(c) => Some(c.seed),
        _ => args.seed,
    };
    report.config.synthetic = match source {
        Source::Synthetic(c) => Some(c),
        _ => None,
    };
    report.config.paper_mode = args.paper_mode;
    report.config.smart_object = Some(config);
    report.config.profiles = profiles;

    if let (Some(path), Some(models)) = (&args.models_out, &models) {
        let text = serde_json::to_string_pretty(models).map_err(Error::from)?;
        fs::write(path, text + "\n")?;
    }

    match &args.out {
        Some(path) => {
            sim::emit_report(&report, args.format, Some(path))?;
            let c = &report.comparison;
            writeln!(
                out,
                "transmissions/day {:.1} -> {:.1}, energy/day {:.6} J -> {:.6} J, saving {}",
                c.transmissions_per_day_baseline,
                c.transmissions_per_day_so,
                c.energy_per_day_baseline,
                c.energy_per_day_so,
                c.savings_energy_pct.map(|s| format!("{s:.2}%")).unwrap_or_else(|| "n/a".into()),
            )?;
        }
        None => match args.format {
            ReportFormat::Json => writeln!(out, "{}", report.to_json())?,
            ReportFormat::Csv => {
                sim::write_histogram_csv(&report, &mut *out)?;
                writeln!(out)?;
                sim::write_comparison_csv(&report, &mut *out)?;
            }
        },
    }
    Ok(())
}

pub fn cmd_profiles(args: &ProfilesArgs, out: &mut dyn Write) -> CliResult {
    let profiles = load_profiles(args.profile.as_deref())?;
    if args.json {
        writeln!(out, "{}", profiles.to_json())?;
    } else {
        write!(out, "{}", profiles.to_annotated_toml())?;
    }
    Ok(())
}
