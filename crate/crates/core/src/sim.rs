//! Replays an impulse stream through the transmit-all baseline and a smart
//! object, and compares what each one costs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::{self, CpuLoad, EnergyProfiles, SoDailyEnergy};
use crate::error::{Error, Result};
use crate::sensor_frontend::ImpulseStream;
use crate::smart_object::{ModelParams, SmartObject, DEFAULT_WINDOW_LEN};
use crate::trace::{ActionInterval, Tick, TickSpan, SECONDS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Architecture {
    TransmitAll,
    SmartObject,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub processing: f64,
    pub transmit: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(processing: f64, transmit: f64) -> Self {
        EnergyBreakdown {
            processing,
            transmit,
            total: processing + transmit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Emission {
    pub tick: Tick,
    pub action: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionTally {
    pub true_positives: u64,
    pub false_positives: u64,
    pub missed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureRun {
    pub kind: Architecture,
    pub span: TickSpan,
    pub days: i64,
    /// Impulse events seen by the architecture.
    pub events: u64,
    pub transmissions: u64,
    /// Absent for runs built from daily counts rather than a replay.
    pub transmissions_by_hour: Option<[u64; 24]>,
    pub energy: EnergyBreakdown,
    /// Seconds of processing charged per event (zero for the baseline).
    pub processing_time: f64,
    /// Event-free seconds charged one FIFO update under strict tick accounting.
    pub idle_ticks_charged: u64,
    pub cpu_load: Option<CpuLoad>,
    pub emitted_actions: Vec<Emission>,
    pub detection: Option<DetectionTally>,
}

impl ArchitectureRun {
    pub fn transmissions_per_day(&self) -> f64 {
        self.transmissions as f64 / self.days as f64
    }

    pub fn energy_per_day(&self) -> f64 {
        self.energy.total / self.days as f64
    }

    /// Energy re-derived from the run's counts alone.
    pub fn recompute_energy(&self, profiles: &EnergyProfiles) -> EnergyBreakdown {
        let tx = self.transmissions as f64 * energy::tx_event_energy(&profiles.radio);
        let processing = match self.kind {
            Architecture::TransmitAll => 0.0,
            Architecture::SmartObject => {
                self.events as f64 * energy::mcu_event_energy(&profiles.mcu, self.processing_time)
                    + self.idle_ticks_charged as f64
                        * energy::mcu_event_energy(&profiles.mcu, profiles.mcu.timing.fifo_optimized)
            }
        };
        EnergyBreakdown::new(processing, tx)
    }
}

fn hour_bins(ticks: impl Iterator<Item = Tick>) -> [u64; 24] {
    let mut bins = [0; 24];
    for t in ticks {
        bins[t.hour_of_day()] += 1;
    }
    bins
}

/// Every impulse event becomes one radio frame.
pub fn run_transmit_all(stream: &ImpulseStream, profiles: &EnergyProfiles) -> ArchitectureRun {
    let n = stream.len() as u64;
    ArchitectureRun {
        kind: Architecture::TransmitAll,
        span: stream.span,
        days: stream.span.calendar_days(),
        events: n,
        transmissions: n,
        transmissions_by_hour: Some(hour_bins(stream.events.iter().map(|e| e.tick))),
        energy: EnergyBreakdown::new(0.0, n as f64 * energy::tx_event_energy(&profiles.radio)),
        processing_time: 0.0,
        idle_ticks_charged: 0,
        cpu_load: None,
        emitted_actions: Vec::new(),
        detection: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Training {
    /// Learn during the first K calendar days, evaluate on the rest.
    FirstDays(u32),
    /// Learn and evaluate over the whole trace.
    WholeTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoConfig {
    pub window_len: usize,
    pub params: ModelParams,
    /// Actions to host an AI instance for; empty means every annotated action.
    pub actions: Vec<String>,
    pub training: Training,
    pub buffer_optimized: bool,
    pub algorithm_optimized: bool,
    pub strict_tick_accounting: bool,
    /// Tolerance around a truth interval when matching emissions.
    pub slack_seconds: i64,
}

impl Default for SoConfig {
    fn default() -> Self {
        SoConfig {
            window_len: DEFAULT_WINDOW_LEN,
            params: ModelParams::default(),
            actions: Vec::new(),
            training: Training::WholeTrace,
            buffer_optimized: true,
            algorithm_optimized: true,
            strict_tick_accounting: false,
            slack_seconds: 60,
        }
    }
}

impl SoConfig {
    pub fn processing_time(&self, profiles: &EnergyProfiles) -> f64 {
        energy::per_event_processing_time(&profiles.mcu.timing, self.buffer_optimized, self.algorithm_optimized)
    }

    /// First tick of the evaluation period.
    pub fn evaluation_start(&self, span: &TickSpan) -> Tick {
        match self.training {
            Training::WholeTrace => span.start,
            Training::FirstDays(k) => Tick((span.start.day() + k as i64) * SECONDS_PER_DAY),
        }
    }

    fn resolve_actions(&self, annotations: &[ActionInterval]) -> Vec<String> {
        if !self.actions.is_empty() {
            return self.actions.clone();
        }
        let mut names: Vec<String> = annotations.iter().map(|a| a.action.clone()).collect();
        names.sort();
        names.dedup();
        names
    }
}

#[derive(Debug, Clone)]
pub struct SoOutcome {
    pub run: ArchitectureRun,
    pub object: SmartObject,
}

/// Drives a smart object wired to `sensors` one second at a time over the
/// stream's whole span, learning from `annotations` during the training period.
pub fn run_smart_object(
    stream: &ImpulseStream,
    annotations: &[ActionInterval],
    sensors: &[usize],
    config: &SoConfig,
    profiles: &EnergyProfiles,
) -> Result<SoOutcome> {
    let actions = config.resolve_actions(annotations);
    let mut object = SmartObject::new(sensors.to_vec(), config.window_len, &actions, config.params)?;
    let span = stream.span;
    let eval_start = config.evaluation_start(&span);
    let n = config.window_len as i64;

    let mut learn_at: BTreeMap<Tick, Vec<&str>> = BTreeMap::new();
    let mut by_action: BTreeMap<&str, Vec<&ActionInterval>> = BTreeMap::new();
    for a in annotations.iter().filter(|a| actions.contains(&a.action)) {
        learn_at.entry(a.end).or_default().push(&a.action);
        by_action.entry(&a.action).or_default().push(a);
    }

    let mut emissions = Vec::new();
    let mut emitted = Vec::new();
    let mut idle_ticks = 0u64;
    let mut next = 0;
    let events = &stream.events;
    for t in span.start.0..=span.end.0 {
        let tick = Tick(t);
        emitted.clear();
        let mut pushed = false;
        while next < events.len() && events[next].tick == tick {
            object.predict_into(Some(events[next].sensor_index), &mut emitted)?;
            next += 1;
            pushed = true;
        }
        if !pushed {
            object.predict_into(None, &mut emitted)?;
            idle_ticks += 1;
        }
        for &i in &emitted {
            emissions.push(Emission {
                tick,
                action: object.instances()[i].action().to_string(),
            });
        }

        let training = match config.training {
            Training::WholeTrace => true,
            Training::FirstDays(_) => tick < eval_start,
        };
        if !training {
            continue;
        }
        if let Some(names) = learn_at.get(&tick) {
            for name in names {
                object.learn(name)?;
            }
        }
        if (t - span.start.0 + 1) % n == 0 {
            let from = Tick(t - n + 1);
            for action in &actions {
                let busy = by_action
                    .get(action.as_str())
                    .is_some_and(|iv| iv.iter().any(|a| a.overlaps(from, tick)));
                if !busy {
                    object.observe_negative(action)?;
                }
            }
        }
    }

    let t_proc = config.processing_time(profiles);
    let idle_ticks_charged = if config.strict_tick_accounting { idle_ticks } else { 0 };
    let truth: Vec<ActionInterval> = annotations
        .iter()
        .filter(|a| actions.contains(&a.action) && a.begin >= eval_start)
        .cloned()
        .collect();
    let evaluated: Vec<Emission> = emissions.iter().filter(|e| e.tick >= eval_start).cloned().collect();
    let detection = detection_tally(&evaluated, &truth, config.slack_seconds);

    let mut run = ArchitectureRun {
        kind: Architecture::SmartObject,
        span,
        days: span.calendar_days(),
        events: events.len() as u64,
        transmissions: emissions.len() as u64,
        transmissions_by_hour: Some(hour_bins(emissions.iter().map(|e| e.tick))),
        energy: EnergyBreakdown::default(),
        processing_time: t_proc,
        idle_ticks_charged,
        cpu_load: None,
        emitted_actions: emissions,
        detection: Some(detection),
    };
    run.energy = run.recompute_energy(profiles);
    let busy = events.len() as f64 * t_proc + idle_ticks_charged as f64 * profiles.mcu.timing.fifo_optimized;
    run.cpu_load = Some(energy::cpu_load(busy / span.seconds() as f64, 1.0));
    Ok(SoOutcome { run, object })
}

/// Matches emissions to truth intervals of the same action, one emission per
/// interval; an emission matches if it lies within the interval widened by
/// `slack` seconds on both sides.
pub fn detection_tally(emissions: &[Emission], truth: &[ActionInterval], slack: i64) -> DetectionTally {
    let mut order: Vec<&Emission> = emissions.iter().collect();
    order.sort_by_key(|e| e.tick);
    let mut intervals: Vec<&ActionInterval> = truth.iter().collect();
    intervals.sort_by_key(|a| (a.begin, a.end));
    let mut matched = vec![false; intervals.len()];
    let mut tally = DetectionTally::default();
    for e in order {
        let hit = intervals.iter().enumerate().position(|(i, a)| {
            !matched[i] && a.action == e.action && a.begin.0 - slack <= e.tick.0 && e.tick.0 <= a.end.0 + slack
        });
        match hit {
            Some(i) => {
                matched[i] = true;
                tally.true_positives += 1;
            }
            None => tally.false_positives += 1,
        }
    }
    tally.missed = matched.iter().filter(|&&m| !m).count() as u64;
    tally
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub days: i64,
    pub transmissions_per_day_baseline: f64,
    pub transmissions_per_day_so: f64,
    pub energy_per_day_baseline: f64,
    pub energy_per_day_so: f64,
    /// Undefined (null) when the baseline spends nothing.
    pub savings_energy_pct: Option<f64>,
    pub savings_transmissions_pct: Option<f64>,
    pub battery_days_baseline: Option<f64>,
    pub battery_days_so: Option<f64>,
    pub batteries_per_day_baseline: Option<f64>,
}

/// Daily figures from counts alone, independent of any classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSummary {
    pub events_per_day: f64,
    pub actions_per_day: f64,
    pub processing_time: f64,
    pub energy_per_day_baseline: f64,
    pub energy_per_day_so: SoDailyEnergy,
    pub savings_energy_pct: Option<f64>,
    pub battery_days_baseline: Option<f64>,
    pub batteries_per_day_baseline: Option<f64>,
    pub battery_days_so: Option<f64>,
}

pub fn analytic_summary(
    events_per_day: f64,
    actions_per_day: f64,
    processing_time: f64,
    profiles: &EnergyProfiles,
) -> AnalyticSummary {
    let baseline = energy::daily_energy_tx_all(events_per_day, &profiles.radio);
    let so = energy::daily_energy_so(events_per_day, actions_per_day, &profiles.mcu, &profiles.radio, processing_time);
    let base_life = energy::battery_lifetime(baseline, &profiles.battery).ok();
    AnalyticSummary {
        events_per_day,
        actions_per_day,
        processing_time,
        energy_per_day_baseline: baseline,
        energy_per_day_so: so,
        savings_energy_pct: energy::savings(baseline, so.total).ok(),
        battery_days_baseline: base_life.map(|l| l.days),
        batteries_per_day_baseline: base_life.map(|l| l.batteries_per_day),
        battery_days_so: energy::battery_lifetime(so.total, &profiles.battery).ok().map(|l| l.days),
    }
}

/// What produced the runs, echoed into the report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub source: String,
    pub sensors: Vec<String>,
    pub seed: Option<u64>,
    pub paper_mode: bool,
    pub synthetic: Option<crate::trace::SyntheticConfig>,
    pub smart_object: Option<SoConfig>,
    pub profiles: EnergyProfiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: ConfigEcho,
    pub baseline: ArchitectureRun,
    pub smart_object: ArchitectureRun,
    pub comparison: Comparison,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<AnalyticSummary>,
}

pub fn compare(
    baseline: ArchitectureRun,
    smart_object: ArchitectureRun,
    battery: &energy::BatteryProfile,
) -> Result<SimulationReport> {
    if baseline.span != smart_object.span {
        return Err(Error::MismatchedSpan {
            baseline: baseline.span.seconds(),
            candidate: smart_object.span.seconds(),
        });
    }
    let base_e = baseline.energy_per_day();
    let so_e = smart_object.energy_per_day();
    let base_life = energy::battery_lifetime(base_e, battery).ok();
    let comparison = Comparison {
        days: baseline.days,
        transmissions_per_day_baseline: baseline.transmissions_per_day(),
        transmissions_per_day_so: smart_object.transmissions_per_day(),
        energy_per_day_baseline: base_e,
        energy_per_day_so: so_e,
        savings_energy_pct: energy::savings(baseline.energy.total, smart_object.energy.total).ok(),
        savings_transmissions_pct: energy::savings(baseline.transmissions as f64, smart_object.transmissions as f64).ok(),
        battery_days_baseline: base_life.map(|l| l.days),
        battery_days_so: energy::battery_lifetime(so_e, battery).ok().map(|l| l.days),
        batteries_per_day_baseline: base_life.map(|l| l.batteries_per_day),
    };
    Ok(SimulationReport {
        config: ConfigEcho::default(),
        baseline,
        smart_object,
        comparison,
        analytic: None,
    })
}

/// Replays the stream through both architectures and compares them.
pub fn simulate(
    stream: &ImpulseStream,
    annotations: &[ActionInterval],
    sensors: &[usize],
    config: &SoConfig,
    profiles: &EnergyProfiles,
) -> Result<(SimulationReport, SmartObject)> {
    let baseline = run_transmit_all(stream, profiles);
    let outcome = run_smart_object(stream, annotations, sensors, config, profiles)?;
    let mut report = compare(baseline, outcome.run, &profiles.battery)?;
    let days = report.comparison.days as f64;
    let actions = config.resolve_actions(annotations);
    let annotated = annotations.iter().filter(|a| actions.contains(&a.action)).count() as f64;
    report.analytic = Some(analytic_summary(
        stream.len() as f64 / days,
        annotated / days,
        config.processing_time(profiles),
        profiles,
    ));
    Ok((report, outcome.object))
}

/// One-day runs built straight from daily counts, with no trace behind them.
pub fn paper_mode_report(
    events_per_day: u64,
    actions_per_day: u64,
    config: &SoConfig,
    profiles: &EnergyProfiles,
) -> Result<SimulationReport> {
    let span = TickSpan {
        start: Tick(0),
        end: Tick(SECONDS_PER_DAY - 1),
    };
    let t_proc = config.processing_time(profiles);
    let mut baseline = ArchitectureRun {
        kind: Architecture::TransmitAll,
        span,
        days: 1,
        events: events_per_day,
        transmissions: events_per_day,
        transmissions_by_hour: None,
        energy: EnergyBreakdown::default(),
        processing_time: 0.0,
        idle_ticks_charged: 0,
        cpu_load: None,
        emitted_actions: Vec::new(),
        detection: None,
    };
    baseline.energy = baseline.recompute_energy(profiles);
    let mut so = ArchitectureRun {
        kind: Architecture::SmartObject,
        transmissions: actions_per_day,
        processing_time: t_proc,
        ..baseline.clone()
    };
    so.energy = so.recompute_energy(profiles);
    so.cpu_load = Some(energy::cpu_load(events_per_day as f64 / SECONDS_PER_DAY as f64, t_proc));
    let mut report = compare(baseline, so, &profiles.battery)?;
    report.analytic = Some(analytic_summary(
        events_per_day as f64,
        actions_per_day as f64,
        t_proc,
        profiles,
    ));
    Ok(report)
}

impl SimulationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

fn run_label(kind: Architecture) -> &'static str {
    match kind {
        Architecture::TransmitAll => "transmit_all",
        Architecture::SmartObject => "smart_object",
    }
}

/// `run,hour,count` rows, 24 per replayed run.
pub fn write_histogram_csv<W: Write>(report: &SimulationReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "hour", "count"]).map_err(csv_err)?;
    for run in [&report.baseline, &report.smart_object] {
        if let Some(bins) = &run.transmissions_by_hour {
            for (hour, count) in bins.iter().enumerate() {
                w.serialize((run_label(run.kind), hour, count)).map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `metric,transmit_all,smart_object` rows.
pub fn write_comparison_csv<W: Write>(report: &SimulationReport, out: W) -> Result<()> {
    let (b, s) = (&report.baseline, &report.smart_object);
    let c = &report.comparison;
    let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let rows: [(&str, String, String); 9] = [
        ("days", c.days.to_string(), c.days.to_string()),
        ("events", b.events.to_string(), s.events.to_string()),
        ("transmissions", b.transmissions.to_string(), s.transmissions.to_string()),
        (
            "transmissions_per_day",
            c.transmissions_per_day_baseline.to_string(),
            c.transmissions_per_day_so.to_string(),
        ),
        ("energy_processing_j", b.energy.processing.to_string(), s.energy.processing.to_string()),
        ("energy_transmit_j", b.energy.transmit.to_string(), s.energy.transmit.to_string()),
        ("energy_total_j", b.energy.total.to_string(), s.energy.total.to_string()),
        (
            "energy_per_day_j",
            c.energy_per_day_baseline.to_string(),
            c.energy_per_day_so.to_string(),
        ),
        ("battery_days", fmt(c.battery_days_baseline), fmt(c.battery_days_so)),
    ];
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "transmit_all", "smart_object"]).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.serialize(("savings_energy_pct", "", fmt(c.savings_energy_pct))).map_err(csv_err)?;
    w.serialize(("savings_transmissions_pct", "", fmt(c.savings_transmissions_pct)))
        .map_err(csv_err)?;
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Io(io::Error::other(format!("{other:?}"))),
    }
}

/// Companion path holding the comparison table next to a histogram CSV.
pub fn comparison_path(histogram: &Path) -> PathBuf {
    let stem = histogram.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    histogram.with_file_name(format!("{stem}.comparison.csv"))
}

/// Writes the report to `destination`, or stdout when `None`.
///
/// CSV output is two tables: the hourly histogram goes to `destination` and
/// the comparison table to [`comparison_path`]. On stdout they are separated
/// by a blank line.
pub fn emit_report(report: &SimulationReport, format: ReportFormat, destination: Option<&Path>) -> Result<()> {
    match (format, destination) {
        (ReportFormat::Json, Some(path)) => {
            let mut f = BufWriter::new(File::create(path)?);
            writeln!(f, "{}", report.to_json())?;
            f.flush()?;
        }
        (ReportFormat::Json, None) => {
            println!("{}", report.to_json());
        }
        (ReportFormat::Csv, Some(path)) => {
            write_histogram_csv(report, BufWriter::new(File::create(path)?))?;
            write_comparison_csv(report, BufWriter::new(File::create(comparison_path(path))?))?;
        }
        (ReportFormat::Csv, None) => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_histogram_csv(report, &mut lock)?;
            writeln!(lock)?;
            write_comparison_csv(report, &mut lock)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor_frontend::SensorEvent;

    fn stream(ticks: &[(i64, usize)], span: (i64, i64)) -> ImpulseStream {
        ImpulseStream {
            events: ticks
                .iter()
                .map(|&(t, s)| SensorEvent {
                    tick: Tick(t),
                    sensor_index: s,
                })
                .collect(),
            dropped_off_events: 0,
            merged_duplicates: 0,
            span: TickSpan {
                start: Tick(span.0),
                end: Tick(span.1),
            },
        }
    }

    fn interval(action: &str, begin: i64, end: i64) -> ActionInterval {
        ActionInterval {
            action: action.into(),
            begin: Tick(begin),
            end: Tick(end),
            unterminated: false,
        }
    }

    fn emission(action: &str, tick: i64) -> Emission {
        Emission {
            tick: Tick(tick),
            action: action.into(),
        }
    }

    #[test]
    fn tally_exact_hits() {
        let truth = [interval("a", 10, 20), interval("a", 50, 60)];
        let hits = [emission("a", 20), emission("a", 60)];
        assert_eq!(
            detection_tally(&hits, &truth, 0),
            DetectionTally {
                true_positives: 2,
                false_positives: 0,
                missed: 0
            }
        );
    }

    #[test]
    fn tally_no_emissions() {
        let truth = [interval("a", 10, 20), interval("b", 50, 60)];
        assert_eq!(detection_tally(&[], &truth, 5).missed, 2);
    }

    #[test]
    fn tally_one_match_per_interval() {
        let truth = [interval("a", 10, 20)];
        let t = detection_tally(&[emission("a", 12), emission("a", 15)], &truth, 0);
        assert_eq!((t.true_positives, t.false_positives, t.missed), (1, 1, 0));
    }

    #[test]
    fn tally_respects_slack_and_action() {
        let truth = [interval("a", 10, 20)];
        assert_eq!(detection_tally(&[emission("a", 25)], &truth, 5).true_positives, 1);
        assert_eq!(detection_tally(&[emission("a", 26)], &truth, 5).true_positives, 0);
        assert_eq!(detection_tally(&[emission("b", 15)], &truth, 5).false_positives, 1);
    }

    #[test]
    fn baseline_counts_every_event() {
        let s = stream(&[(3600, 0), (3601, 1), (7300, 0)], (0, 86_399));
        let run = run_transmit_all(&s, &EnergyProfiles::default());
        assert_eq!(run.transmissions, 3);
        assert_eq!(run.transmissions_by_hour.unwrap()[1], 2);
        assert_eq!(run.transmissions_by_hour.unwrap()[2], 1);
        assert!((run.energy.total - 3.0 * 587.5e-6).abs() < 1e-15);
    }

    #[test]
    fn empty_stream_runs_are_zero() {
        let s = stream(&[], (0, 599));
        let p = EnergyProfiles::default();
        let base = run_transmit_all(&s, &p);
        let so = run_smart_object(&s, &[], &[0, 1], &SoConfig::default(), &p).unwrap().run;
        assert_eq!(base.transmissions, 0);
        assert_eq!(so.transmissions, 0);
        assert_eq!(so.energy.total, 0.0);
        let report = compare(base, so, &p.battery).unwrap();
        assert_eq!(report.comparison.savings_energy_pct, None);
        let mut csv = Vec::new();
        write_histogram_csv(&report, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + 48);
        assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));
        assert_eq!(SimulationReport::from_json(&report.to_json()).unwrap(), report);
    }

    #[test]
    fn untrained_object_only_pays_processing() {
        let s = stream(&[(10, 0), (20, 1), (30, 0)], (0, 99));
        let p = EnergyProfiles::default();
        let cfg = SoConfig {
            actions: vec!["cook".into()],
            training: Training::FirstDays(0),
            ..SoConfig::default()
        };
        let so = run_smart_object(&s, &[], &[0, 1], &cfg, &p).unwrap().run;
        assert_eq!(so.transmissions, 0);
        assert_eq!(so.energy.transmit, 0.0);
        assert!((so.energy.processing - 3.0 * 2.3424e-6).abs() < 1e-15);
    }

    #[test]
    fn foreign_sensor_is_rejected() {
        let s = stream(&[(10, 5)], (0, 99));
        let r = run_smart_object(&s, &[], &[0, 1], &SoConfig::default(), &EnergyProfiles::default());
        assert!(matches!(r, Err(Error::UnregisteredSensor(5))));
    }

    #[test]
    fn learns_and_fires() {
        // action bursts on sensors 0/1 every 100 s, sensor 2 alone in between
        let mut events = Vec::new();
        let mut truth = Vec::new();
        for k in 0..20 {
            let b = k * 100;
            events.extend([(b + 10, 0), (b + 12, 1)]);
            events.push((b + 60, 2));
            truth.push(interval("cook", b + 10, b + 12));
        }
        let s = stream(&events, (0, 1999));
        let cfg = SoConfig {
            window_len: 20,
            training: Training::WholeTrace,
            slack_seconds: 0,
            ..SoConfig::default()
        };
        let p = EnergyProfiles::default();
        let out = run_smart_object(&s, &truth, &[0, 1, 2], &cfg, &p).unwrap();
        let m = out.object.instance("cook").unwrap();
        assert!(m.weights()[0] > m.weights()[2]);
        assert!(m.weights()[1] > m.weights()[2]);
        let d = out.run.detection.unwrap();
        assert!(d.true_positives >= 15, "{d:?}");
        assert_eq!(out.run.recompute_energy(&p), out.run.energy);
    }

    #[test]
    fn strict_accounting_charges_idle_seconds() {
        let s = stream(&[(10, 0)], (0, 99));
        let p = EnergyProfiles::default();
        let cfg = SoConfig {
            strict_tick_accounting: true,
            ..SoConfig::default()
        };
        let so = run_smart_object(&s, &[], &[0], &cfg, &p).unwrap().run;
        assert_eq!(so.idle_ticks_charged, 99);
        assert_eq!(so.recompute_energy(&p), so.energy);
        assert!(so.energy.processing > 2.3424e-6);
    }

    #[test]
    fn mismatched_spans() {
        let p = EnergyProfiles::default();
        let a = run_transmit_all(&stream(&[], (0, 9)), &p);
        let b = run_transmit_all(&stream(&[], (0, 19)), &p);
        assert!(matches!(compare(a, b, &p.battery), Err(Error::MismatchedSpan { .. })));
    }

    #[test]
    fn identical_runs_save_nothing() {
        let p = EnergyProfiles::default();
        let a = run_transmit_all(&stream(&[(5, 0)], (0, 9)), &p);
        let r = compare(a.clone(), a, &p.battery).unwrap();
        assert_eq!(r.comparison.savings_energy_pct, Some(0.0));
        assert_eq!(r.comparison.savings_transmissions_pct, Some(0.0));
    }

    #[test]
    fn paper_mode_numbers() {
        let p = EnergyProfiles::default();
        let r = paper_mode_report(1795, 7, &SoConfig::default(), &p).unwrap();
        assert_eq!(r.baseline.transmissions, 1795);
        assert_eq!(r.smart_object.transmissions, 7);
        let s = r.comparison.savings_energy_pct.unwrap();
        assert!((s - 99.2113).abs() < 1e-3);
        assert_eq!(r.analytic.unwrap().savings_energy_pct, r.comparison.savings_energy_pct);
    }
}
