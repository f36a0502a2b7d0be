//! CASAS-style event logs: parsing, synthetic generation and dataset statistics.
//!
//! A log line looks like
//!
//! ```text
//! 2009-10-16 03:55:34.884888 M021 ON Kitchen_Activity begin
//! ```
//!
//! with the trailing activity/marker pair optional. Fields may be separated by
//! any run of spaces or tabs. Timestamps are naive local time.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Whole-second instant, counted from the naive epoch 1970-01-01 00:00:00.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tick(pub i64);

impl Tick {
    /// Floors a timestamp to its second.
    pub fn from_datetime(ts: &NaiveDateTime) -> Self {
        Tick(ts.and_utc().timestamp())
    }

    pub fn to_datetime(self) -> NaiveDateTime {
        chrono::DateTime::from_timestamp(self.0, 0)
            .expect("tick within chrono range")
            .naive_utc()
    }

    pub fn hour_of_day(self) -> usize {
        (self.0.rem_euclid(SECONDS_PER_DAY) / 3600) as usize
    }

    pub fn day(self) -> i64 {
        self.0.div_euclid(SECONDS_PER_DAY)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SensorValue {
    On,
    Off,
    /// Anything else: numeric readings, OPEN/CLOSE, ...
    Other(String),
}

impl SensorValue {
    pub fn parse(text: &str) -> Self {
        if text.eq_ignore_ascii_case("on") {
            SensorValue::On
        } else if text.eq_ignore_ascii_case("off") {
            SensorValue::Off
        } else {
            SensorValue::Other(text.to_string())
        }
    }

    /// ON (any case) or a numeric value above zero.
    pub fn is_on(&self) -> bool {
        match self {
            SensorValue::On => true,
            SensorValue::Off => false,
            SensorValue::Other(s) => s.parse::<f64>().map(|v| v > 0.0).unwrap_or(false),
        }
    }
}

impl fmt::Display for SensorValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SensorValue::On => f.write_str("ON"),
            SensorValue::Off => f.write_str("OFF"),
            SensorValue::Other(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Marker {
    Begin,
    End,
}

impl fmt::Display for Marker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Marker::Begin => "begin",
            Marker::End => "end",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Annotation {
    pub activity: String,
    pub marker: Marker,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawRecord {
    pub timestamp: NaiveDateTime,
    pub sensor_id: String,
    pub value: SensorValue,
    pub annotation: Option<Annotation>,
}

impl RawRecord {
    pub fn tick(&self) -> Tick {
        Tick::from_datetime(&self.timestamp)
    }
}

/// Canonical form: single-space separated, six fractional digits when the
/// timestamp has a sub-second part.
impl fmt::Display for RawRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let micros = self.timestamp.nanosecond() / 1_000;
        write!(f, "{}", self.timestamp.format("%Y-%m-%d %H:%M:%S"))?;
        if micros != 0 {
            write!(f, ".{micros:06}")?;
        }
        write!(f, " {} {}", self.sensor_id, self.value)?;
        if let Some(a) = &self.annotation {
            write!(f, " {} {}", a.activity, a.marker)?;
        }
        Ok(())
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedLine {
        line,
        reason: reason.into(),
    }
}

fn parse_timestamp(date: &str, time: &str, line: usize) -> Result<NaiveDateTime> {
    let date = NaiveDate::parse_from_str(date, "%Y-%m-%d")
        .map_err(|e| malformed(line, format!("bad date {date:?}: {e}")))?;
    let (hms, frac) = match time.split_once('.') {
        Some((hms, frac)) => (hms, Some(frac)),
        None => (time, None),
    };
    let hms = NaiveTime::parse_from_str(hms, "%H:%M:%S")
        .map_err(|e| malformed(line, format!("bad time {time:?}: {e}")))?;
    let micros = match frac {
        None => 0,
        Some(f) if (1..=6).contains(&f.len()) && f.bytes().all(|b| b.is_ascii_digit()) => {
            // right-pad to microseconds: ".5" is 500000 us
            let digits: u32 = f.parse().expect("validated digits");
            digits * 10u32.pow(6 - f.len() as u32)
        }
        Some(f) => return Err(malformed(line, format!("bad fractional seconds {f:?}"))),
    };
    let ts = date.and_time(hms);
    Ok(ts + chrono::Duration::microseconds(micros as i64))
}

/// Parses one log line; `line` is only used for error reporting.
pub fn parse_line_at(text: &str, line: usize) -> Result<RawRecord> {
    let fields: Vec<&str> = text.split([' ', '\t']).filter(|f| !f.is_empty()).collect();
    if fields.len() < 4 {
        return Err(malformed(line, format!("expected at least 4 fields, found {}", fields.len())));
    }
    let timestamp = parse_timestamp(fields[0], fields[1], line)?;
    let sensor_id = fields[2].to_string();
    let value = SensorValue::parse(fields[3]);
    let annotation = match fields.len() {
        4 => None,
        6 => {
            let marker = match fields[5] {
                m if m.eq_ignore_ascii_case("begin") => Marker::Begin,
                m if m.eq_ignore_ascii_case("end") => Marker::End,
                m => return Err(malformed(line, format!("unknown marker {m:?}"))),
            };
            Some(Annotation {
                activity: fields[4].to_string(),
                marker,
            })
        }
        n => {
            return Err(malformed(
                line,
                format!("expected 4 or 6 fields, found {n}"),
            ))
        }
    };
    Ok(RawRecord {
        timestamp,
        sensor_id,
        value,
        annotation,
    })
}

pub fn parse_line(text: &str) -> Result<RawRecord> {
    parse_line_at(text, 1)
}

/// Dense sensor-name to index mapping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SensorRegistry {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl SensorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Maps sensor names to indices, failing on the first unknown name.
    pub fn resolve<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.index_of(n.as_ref())
                    .ok_or_else(|| Error::UnknownSensor(n.as_ref().to_string()))
            })
            .collect()
    }

    /// Membership mask over the registry for a subset of indices.
    pub fn mask(&self, subset: &[usize]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.len()];
        for &s in subset {
            *mask
                .get_mut(s)
                .ok_or_else(|| Error::UnknownSensor(format!("#{s}")))? = true;
        }
        Ok(mask)
    }
}

/// Time-ordered records plus the registry of sensors they mention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLog {
    records: Vec<RawRecord>,
    registry: SensorRegistry,
}

impl EventLog {
    /// Builds a log from records in arrival order. Sensors are registered in
    /// first-appearance order, then records are stably sorted by timestamp.
    pub fn from_records(records: Vec<RawRecord>) -> Result<Self> {
        Self::with_registry(records, SensorRegistry::new())
    }

    /// Like [`EventLog::from_records`] but starts from a pre-populated registry,
    /// so declared-but-silent sensors keep their indices.
    pub fn with_registry(mut records: Vec<RawRecord>, mut registry: SensorRegistry) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyTrace);
        }
        for r in &records {
            registry.intern(&r.sensor_id);
        }
        records.sort_by_key(|r| r.timestamp);
        Ok(EventLog { records, registry })
    }

    pub fn records(&self) -> &[RawRecord] {
        &self.records
    }

    pub fn registry(&self) -> &SensorRegistry {
        &self.registry
    }

    pub fn sensor_index(&self, record: &RawRecord) -> usize {
        self.registry
            .index_of(&record.sensor_id)
            .expect("every record's sensor is registered")
    }

    pub fn first(&self) -> &NaiveDateTime {
        &self.records[0].timestamp
    }

    pub fn last(&self) -> &NaiveDateTime {
        &self.records[self.records.len() - 1].timestamp
    }

    /// Inclusive whole-second span of the log.
    pub fn tick_span(&self) -> TickSpan {
        TickSpan {
            start: Tick::from_datetime(self.first()),
            end: Tick::from_datetime(self.last()),
        }
    }

    /// Annotated action instances, paired begin/end per activity name.
    pub fn action_intervals(&self) -> Annotations {
        let mut open: BTreeMap<&str, Tick> = BTreeMap::new();
        let mut intervals = Vec::new();
        let mut diagnostics = Vec::new();
        for r in &self.records {
            let Some(a) = &r.annotation else { continue };
            match a.marker {
                Marker::Begin => {
                    if open.contains_key(a.activity.as_str()) {
                        diagnostics.push(Diagnostic::new(
                            None,
                            format!("{} begin at {} while already open; ignored", a.activity, r.timestamp),
                        ));
                    } else {
                        open.insert(&a.activity, r.tick());
                    }
                }
                Marker::End => match open.remove(a.activity.as_str()) {
                    Some(begin) => intervals.push(ActionInterval {
                        action: a.activity.clone(),
                        begin,
                        end: r.tick(),
                        unterminated: false,
                    }),
                    None => diagnostics.push(Diagnostic::new(
                        None,
                        format!("{} end at {} without begin; ignored", a.activity, r.timestamp),
                    )),
                },
            }
        }
        let end = self.tick_span().end;
        for (activity, begin) in open {
            diagnostics.push(Diagnostic::new(
                None,
                format!("{activity} begun at {} never ends; closed at trace end", begin.to_datetime()),
            ));
            intervals.push(ActionInterval {
                action: activity.to_string(),
                begin,
                end,
                unterminated: true,
            });
        }
        intervals.sort_by(|a, b| (a.begin, a.end, &a.action).cmp(&(b.begin, b.end, &b.action)));
        Annotations {
            intervals,
            diagnostics,
        }
    }

    /// Number of calendar days the log touches, first and last day included.
    pub fn span_days(&self) -> i64 {
        self.tick_span().calendar_days()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickSpan {
    pub start: Tick,
    pub end: Tick,
}

impl TickSpan {
    pub fn seconds(&self) -> i64 {
        self.end.0 - self.start.0 + 1
    }

    pub fn calendar_days(&self) -> i64 {
        self.end.day() - self.start.day() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionInterval {
    pub action: String,
    pub begin: Tick,
    pub end: Tick,
    /// Begin marker never matched by an end; closed at trace end.
    #[serde(default)]
    pub unterminated: bool,
}

impl ActionInterval {
    /// Whether the inclusive window `[from, to]` intersects this interval.
    pub fn overlaps(&self, from: Tick, to: Tick) -> bool {
        self.begin <= to && from <= self.end
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Annotations {
    pub intervals: Vec<ActionInterval>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    pub fn new(line: Option<usize>, message: impl Into<String>) -> Self {
        Diagnostic {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedTrace {
    pub log: EventLog,
    /// One entry per skipped malformed line.
    pub diagnostics: Vec<Diagnostic>,
}

/// Reads a whole log. Malformed lines are skipped and reported (also on the
/// `log` warning channel); blank lines are ignored silently.
pub fn load_trace<R: BufRead>(source: R) -> Result<LoadedTrace> {
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line_at(&line, i + 1) {
            Ok(r) => records.push(r),
            Err(Error::MalformedLine { line, reason }) => {
                log::warn!("line {line}: {reason}");
                diagnostics.push(Diagnostic::new(Some(line), reason));
            }
            Err(e) => return Err(e),
        }
    }
    let log = EventLog::from_records(records)?;
    Ok(LoadedTrace { log, diagnostics })
}

/// Writes every record in canonical form, one per line.
pub fn write_trace<W: Write>(log: &EventLog, mut out: W) -> Result<()> {
    for r in log.records() {
        writeln!(out, "{r}")?;
    }
    Ok(())
}

fn count_subset(log: &EventLog, subset: &[usize]) -> Result<Vec<usize>> {
    let mask = log.registry().mask(subset)?;
    Ok(log
        .records()
        .iter()
        .map(|r| log.sensor_index(r))
        .filter(|&i| mask[i])
        .collect())
}

/// Raw records (ON and OFF alike) of `subset` per calendar day of the log.
pub fn daily_event_rate(log: &EventLog, subset: &[usize]) -> Result<f64> {
    let count = count_subset(log, subset)?.len();
    Ok(count as f64 / log.span_days() as f64)
}

/// Per-hour record counts of `subset`, summed over all days.
pub fn hourly_counts(log: &EventLog, subset: &[usize]) -> Result<[u64; 24]> {
    let mask = log.registry().mask(subset)?;
    let mut bins = [0u64; 24];
    for r in log.records() {
        if mask[log.sensor_index(r)] {
            bins[r.tick().hour_of_day()] += 1;
        }
    }
    Ok(bins)
}

/// Mean records per day falling in each hour of the day.
pub fn hourly_histogram(log: &EventLog, subset: &[usize]) -> Result<[f64; 24]> {
    let days = log.span_days() as f64;
    Ok(hourly_counts(log, subset)?.map(|c| c as f64 / days))
}

fn default_active_from() -> u32 {
    7
}

fn default_active_until() -> u32 {
    21
}

fn default_min_gap() -> u32 {
    3600
}

fn default_max_spacing() -> u32 {
    30
}

/// A recurring annotated activity in a synthetic trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPattern {
    pub name: String,
    /// Indices into the declared sensors.
    pub sensors: Vec<usize>,
    pub mean_daily: f64,
    /// ON events per occurrence.
    pub burst_len: u32,
    /// Upper bound on the gap between consecutive burst events.
    #[serde(default = "default_max_spacing")]
    pub max_spacing_seconds: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub duration_days: u32,
    pub sensors: u32,
    #[serde(default)]
    pub action_patterns: Vec<ActionPattern>,
    /// ON events per hour per sensor during active hours.
    pub background_rate: f64,
    pub seed: u64,
    /// Activity is confined to `[active_from, active_until)` each day.
    #[serde(default = "default_active_from")]
    pub active_from: u32,
    #[serde(default = "default_active_until")]
    pub active_until: u32,
    /// Minimum quiet time between two occurrences of the same action.
    #[serde(default = "default_min_gap")]
    pub min_gap_seconds: u32,
}

impl SyntheticConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: SyntheticConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Two weeks of a ten-sensor home: a kitchen activity on sensors 0-4
    /// about seven times a day, a rarer night activity on 5-6, and light
    /// background motion everywhere.
    pub fn kitchen(seed: u64) -> Self {
        SyntheticConfig {
            duration_days: 14,
            sensors: 10,
            action_patterns: vec![
                ActionPattern {
                    name: "Kitchen_Activity".into(),
                    sensors: vec![0, 1, 2, 3, 4],
                    mean_daily: 7.0,
                    burst_len: 20,
                    max_spacing_seconds: 30,
                },
                ActionPattern {
                    name: "Bed_to_Toilet".into(),
                    sensors: vec![5, 6],
                    mean_daily: 2.0,
                    burst_len: 4,
                    max_spacing_seconds: 20,
                },
            ],
            background_rate: 0.1,
            seed,
            active_from: default_active_from(),
            active_until: default_active_until(),
            min_gap_seconds: default_min_gap(),
        }
    }

    pub fn sensor_name(index: usize) -> String {
        format!("M{:03}", index + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.duration_days == 0 {
            return bad("duration_days must be at least 1".into());
        }
        if !(self.background_rate.is_finite() && self.background_rate >= 0.0) {
            return bad(format!("background_rate {} is not a non-negative rate", self.background_rate));
        }
        if self.active_from >= self.active_until || self.active_until > 24 {
            return bad(format!(
                "active hours [{}, {}) are not a window within the day",
                self.active_from, self.active_until
            ));
        }
        let mut names = std::collections::HashSet::new();
        for p in &self.action_patterns {
            if p.name.is_empty() || p.name.contains([' ', '\t']) {
                return bad(format!("action name {:?} must be a single non-empty token", p.name));
            }
            if !names.insert(&p.name) {
                return bad(format!("duplicate action {:?}", p.name));
            }
            if p.sensors.is_empty() {
                return bad(format!("action {:?} has no sensors", p.name));
            }
            if let Some(&s) = p.sensors.iter().find(|&&s| s >= self.sensors as usize) {
                return bad(format!("action {:?} uses sensor {s} of {}", p.name, self.sensors));
            }
            if !(p.mean_daily.is_finite() && p.mean_daily >= 0.0) {
                return bad(format!("action {:?} has invalid mean_daily", p.name));
            }
            if p.burst_len < 2 {
                return bad(format!("action {:?} needs burst_len >= 2 to carry begin and end", p.name));
            }
            if p.max_spacing_seconds == 0 {
                return bad(format!("action {:?} needs max_spacing_seconds >= 1", p.name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTrace {
    pub log: EventLog,
    pub truth: Vec<ActionInterval>,
}

fn synthetic_epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2009, 10, 16)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date")
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

struct Emitter {
    epoch: NaiveDateTime,
    records: Vec<RawRecord>,
}

impl Emitter {
    /// An ON at `second` (plus random sub-second jitter) and its OFF 1-3 s later.
    fn on_off(&mut self, rng: &mut ChaCha8Rng, second: i64, sensor: &str, annotation: Option<Annotation>) -> Tick {
        let on = self.epoch
            + chrono::Duration::seconds(second)
            + chrono::Duration::microseconds(rng.random_range(0..1_000_000));
        let off = on + chrono::Duration::seconds(rng.random_range(1..=3));
        self.records.push(RawRecord {
            timestamp: on,
            sensor_id: sensor.to_string(),
            value: SensorValue::On,
            annotation,
        });
        self.records.push(RawRecord {
            timestamp: off,
            sensor_id: sensor.to_string(),
            value: SensorValue::Off,
            annotation: None,
        });
        Tick::from_datetime(&on)
    }
}

/// Generates a seeded, annotated trace. Same config, same output.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticTrace> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let names: Vec<String> = (0..config.sensors as usize).map(SyntheticConfig::sensor_name).collect();
    let mut registry = SensorRegistry::new();
    for n in &names {
        registry.intern(n);
    }
    let mut emitter = Emitter {
        epoch: synthetic_epoch(),
        records: Vec::new(),
    };
    let mut truth = Vec::new();
    let active_from = config.active_from as i64 * 3600;
    let active_until = config.active_until as i64 * 3600;
    let mut last_end: Vec<Option<i64>> = vec![None; config.action_patterns.len()];

    for day in 0..config.duration_days as i64 {
        let day_start = day * SECONDS_PER_DAY;
        for (p_idx, pattern) in config.action_patterns.iter().enumerate() {
            let k = poisson(&mut rng, pattern.mean_daily);
            let mut starts: Vec<i64> = (0..k)
                .map(|_| day_start + rng.random_range(active_from..active_until))
                .collect();
            starts.sort_unstable();
            for start in starts {
                if let Some(prev) = last_end[p_idx] {
                    if start < prev + config.min_gap_seconds as i64 {
                        continue;
                    }
                }
                let mut t = start;
                let mut begin = None;
                let mut end = Tick(0);
                for i in 0..pattern.burst_len {
                    let sensor = pattern.sensors[rng.random_range(0..pattern.sensors.len())];
                    let marker = match i {
                        0 => Some(Marker::Begin),
                        i if i + 1 == pattern.burst_len => Some(Marker::End),
                        _ => None,
                    };
                    let annotation = marker.map(|marker| Annotation {
                        activity: pattern.name.clone(),
                        marker,
                    });
                    let tick = emitter.on_off(&mut rng, t, &names[sensor], annotation);
                    begin.get_or_insert(tick);
                    end = tick;
                    t += rng.random_range(1..=pattern.max_spacing_seconds as i64);
                }
                last_end[p_idx] = Some(end.0 - Tick::from_datetime(&emitter.epoch).0);
                truth.push(ActionInterval {
                    action: pattern.name.clone(),
                    begin: begin.expect("burst_len >= 2"),
                    end,
                    unterminated: false,
                });
            }
        }
        let per_sensor_mean = config.background_rate * (config.active_until - config.active_from) as f64;
        for name in &names {
            for _ in 0..poisson(&mut rng, per_sensor_mean) {
                let second = day_start + rng.random_range(active_from..active_until);
                emitter.on_off(&mut rng, second, name, None);
            }
        }
    }

    truth.sort_by(|a, b| (a.begin, a.end, &a.action).cmp(&(b.begin, b.end, &b.action)));
    let log = EventLog::with_registry(emitter.records, registry)?;
    Ok(SyntheticTrace { log, truth })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f").unwrap()
    }

    #[test]
    fn parses_plain_record() {
        let r = parse_line("2009-10-16 02:36:22.066606 M021 ON").unwrap();
        assert_eq!(r.timestamp, ts("2009-10-16 02:36:22.066606"));
        assert_eq!(r.sensor_id, "M021");
        assert_eq!(r.value, SensorValue::On);
        assert_eq!(r.annotation, None);
    }

    #[test]
    fn parses_annotation() {
        let r = parse_line("2009-10-16 03:55:34.884888 M021 ON Kitchen_Activity begin").unwrap();
        assert_eq!(
            r.annotation,
            Some(Annotation {
                activity: "Kitchen_Activity".into(),
                marker: Marker::Begin
            })
        );
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(parse_line("foo bar"), Err(Error::MalformedLine { line: 1, .. })));
        assert!(matches!(
            parse_line_at("2009-10-16 03:55:34 M021 ON Kitchen_Activity start", 9),
            Err(Error::MalformedLine { line: 9, .. })
        ));
        assert!(parse_line("2009-10-16 03:55:34 M021 ON Kitchen_Activity").is_err());
        assert!(parse_line("2009-13-16 03:55:34 M021 ON").is_err());
        assert!(parse_line("2009-10-16 03:55:34.1234567 M021 ON").is_err());
        assert!(parse_line("2009-10-16 03:55:34. M021 ON").is_err());
    }

    #[test]
    fn tabs_and_short_fractions() {
        let r = parse_line("2009-10-16\t03:55:34.5 \t M021\tOFF").unwrap();
        assert_eq!(r.timestamp, ts("2009-10-16 03:55:34.5"));
        assert_eq!(r.value, SensorValue::Off);
        assert_eq!(r.to_string(), "2009-10-16 03:55:34.500000 M021 OFF");
        let whole = parse_line("2009-10-16 03:55:34 M021 ON").unwrap();
        assert_eq!(whole.to_string(), "2009-10-16 03:55:34 M021 ON");
    }

    #[test]
    fn on_detection() {
        assert!(SensorValue::parse("on").is_on());
        assert!(SensorValue::parse("21.5").is_on());
        assert!(!SensorValue::parse("0").is_on());
        assert!(!SensorValue::parse("OPEN").is_on());
        assert!(!SensorValue::parse("OFF").is_on());
    }

    #[test]
    fn load_counts_and_orders() {
        let text = "2009-10-16 00:00:03 M002 ON\n\
                    2009-10-16 00:00:01 M001 ON\n\
                    garbage line\n\
                    \n\
                    2009-10-16 00:00:02 M001 OFF\n";
        let t = load_trace(text.as_bytes()).unwrap();
        assert_eq!(t.log.records().len(), 3);
        assert_eq!(t.diagnostics.len(), 1);
        assert_eq!(t.diagnostics[0].line, Some(3));
        let secs: Vec<u32> = t.log.records().iter().map(|r| r.timestamp.second()).collect();
        assert_eq!(secs, vec![1, 2, 3]);
        // registry follows arrival order, not time order
        assert_eq!(t.log.registry().names(), &["M002".to_string(), "M001".to_string()]);
    }

    #[test]
    fn load_is_stable_for_equal_timestamps() {
        let text = "2009-10-16 00:00:01 M002 ON\n2009-10-16 00:00:01 M001 ON\n";
        let t = load_trace(text.as_bytes()).unwrap();
        assert_eq!(t.log.records()[0].sensor_id, "M002");
    }

    #[test]
    fn empty_trace() {
        assert!(matches!(load_trace("junk\n\n".as_bytes()), Err(Error::EmptyTrace)));
    }

    #[test]
    fn intervals_pair_and_close() {
        let text = "2009-10-16 00:00:01 M001 ON A begin\n\
                    2009-10-16 00:00:05 M001 ON A end\n\
                    2009-10-16 00:00:06 M001 ON B end\n\
                    2009-10-16 00:00:07 M002 ON B begin\n\
                    2009-10-16 00:00:09 M002 OFF\n";
        let log = load_trace(text.as_bytes()).unwrap().log;
        let a = log.action_intervals();
        assert_eq!(a.intervals.len(), 2);
        assert_eq!(a.intervals[0].action, "A");
        assert_eq!(a.intervals[0].end.0 - a.intervals[0].begin.0, 4);
        assert!(a.intervals[1].unterminated);
        assert_eq!(a.intervals[1].end, log.tick_span().end);
        assert_eq!(a.diagnostics.len(), 2);
    }

    #[test]
    fn daily_rate_over_two_days() {
        let mut lines = String::new();
        for i in 0..10 {
            let day = 16 + i / 5;
            lines.push_str(&format!("2009-10-{day} {:02}:00:00 M001 ON\n", 1 + i % 5 * 4));
        }
        let log = load_trace(lines.as_bytes()).unwrap().log;
        assert_eq!(log.span_days(), 2);
        assert_eq!(daily_event_rate(&log, &[0]).unwrap(), 5.0);
    }

    #[test]
    fn uniform_hourly_histogram() {
        let lines: String = (0..24)
            .map(|h| format!("2009-10-16 {h:02}:30:00 M001 ON\n"))
            .collect();
        let log = load_trace(lines.as_bytes()).unwrap().log;
        assert_eq!(hourly_histogram(&log, &[0]).unwrap(), [1.0; 24]);
    }

    #[test]
    fn daytime_histogram_has_quiet_nights() {
        let lines: String = (7..21)
            .map(|h| format!("2009-10-16 {h:02}:10:00 M001 ON\n"))
            .collect();
        let log = load_trace(lines.as_bytes()).unwrap().log;
        let h = hourly_histogram(&log, &[0]).unwrap();
        assert!(h[..7].iter().chain(&h[22..]).all(|&b| b == 0.0));
    }

    #[test]
    fn subset_outside_registry() {
        let log = load_trace("2009-10-16 00:00:01 M001 ON\n".as_bytes()).unwrap().log;
        assert!(matches!(daily_event_rate(&log, &[3]), Err(Error::UnknownSensor(_))));
    }

    fn kitchen_config(seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            duration_days: 1,
            sensors: 8,
            action_patterns: vec![ActionPattern {
                name: "Kitchen_Activity".into(),
                sensors: vec![0, 1, 2, 3, 4],
                mean_daily: 7.0,
                burst_len: 12,
                max_spacing_seconds: 30,
            }],
            background_rate: 0.2,
            seed,
            active_from: 7,
            active_until: 21,
            min_gap_seconds: 3600,
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic(&kitchen_config(7)).unwrap();
        let b = generate_synthetic(&kitchen_config(7)).unwrap();
        let (mut ta, mut tb) = (Vec::new(), Vec::new());
        write_trace(&a.log, &mut ta).unwrap();
        write_trace(&b.log, &mut tb).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn synthetic_annotations_match_truth() {
        let s = generate_synthetic(&kitchen_config(7)).unwrap();
        let a = s.log.action_intervals();
        assert!(a.diagnostics.is_empty());
        assert_eq!(a.intervals, s.truth);
        let mut text = Vec::new();
        write_trace(&s.log, &mut text).unwrap();
        let begins = String::from_utf8(text).unwrap().lines().filter(|l| l.ends_with(" begin")).count();
        assert_eq!(begins, s.truth.len());
        // golden count for seed 7
        assert_eq!(s.truth.len(), 5);
    }

    #[test]
    fn synthetic_bursts_use_pattern_sensors() {
        let mut cfg = kitchen_config(3);
        cfg.background_rate = 0.0;
        let s = generate_synthetic(&cfg).unwrap();
        for r in s.log.records() {
            let i = s.log.sensor_index(r);
            assert!(i < 5, "{} outside the pattern subset", r.sensor_id);
        }
    }

    #[test]
    fn synthetic_without_activity_is_empty() {
        let mut cfg = kitchen_config(1);
        cfg.action_patterns.clear();
        cfg.background_rate = 0.0;
        assert!(matches!(generate_synthetic(&cfg), Err(Error::EmptyTrace)));
    }

    #[test]
    fn synthetic_config_validation() {
        let mut cfg = kitchen_config(1);
        cfg.action_patterns[0].sensors.push(8);
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        let mut cfg = kitchen_config(1);
        cfg.background_rate = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = kitchen_config(1);
        cfg.action_patterns[0].burst_len = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn synthetic_config_toml() {
        let cfg = kitchen_config(7);
        assert_eq!(SyntheticConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let minimal = SyntheticConfig::from_toml(
            "duration_days = 2\nsensors = 3\nbackground_rate = 0.5\nseed = 1\n",
        )
        .unwrap();
        assert_eq!(minimal.active_from, 7);
        assert!(minimal.action_patterns.is_empty());
    }
}
