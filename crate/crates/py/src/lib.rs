//! Python bindings for the smart-object simulator.

use pyo3::exceptions::{PyKeyError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sosim_core::energy::{self, EnergyProfiles as CoreProfiles};
use sosim_core::sim::{self as core_sim, SoConfig};
use sosim_core::smart_object::{self as so, ModelParams};
use sosim_core::trace::{self, SyntheticConfig};
use sosim_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Slotted circular window with an O(1) per-sensor accumulator.
#[pyclass(name = "EventWindow", module = "sosim")]
struct EventWindow {
    inner: so::EventWindow,
}

#[pymethods]
impl EventWindow {
    #[new]
    #[pyo3(signature = (length, sensors))]
    fn new(length: usize, sensors: usize) -> PyResult<Self> {
        if length == 0 {
            return Err(PyValueError::new_err("window length must be positive"));
        }
        Ok(EventWindow {
            inner: so::EventWindow::new(length, sensors),
        })
    }

    /// Pushes a sensor index (or None for an empty second); returns the evicted entry.
    #[pyo3(signature = (entry=None))]
    fn push(&mut self, entry: Option<usize>) -> PyResult<Option<usize>> {
        if let Some(s) = entry {
            if s >= self.inner.sensors() {
                return Err(PyValueError::new_err(format!("sensor {s} out of range")));
            }
        }
        Ok(self.inner.push(entry))
    }

    #[getter]
    fn acc(&self) -> Vec<u32> {
        self.inner.acc().to_vec()
    }

    #[getter]
    fn ptr(&self) -> usize {
        self.inner.ptr()
    }

    fn entries(&self) -> Vec<Option<usize>> {
        self.inner.entries().collect()
    }

    fn presence(&self) -> Vec<bool> {
        self.inner.presence()
    }

    /// Score of the window under the given weights.
    fn score(&self, weights: Vec<i32>) -> PyResult<i64> {
        if weights.len() != self.inner.sensors() {
            return Err(PyValueError::new_err("one weight per sensor expected"));
        }
        let model = so::NBModel::with_weights("score", weights, 0, ModelParams::default());
        Ok(self.inner.score(&model))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// A smart object hosting one naive-Bayes detector per action.
#[pyclass(name = "SmartObject", module = "sosim")]
struct SmartObject {
    inner: so::SmartObject,
}

impl SmartObject {
    fn model(&self, action: &str) -> PyResult<&so::NBModel> {
        self.inner
            .instance(action)
            .ok_or_else(|| PyKeyError::new_err(action.to_string()))
    }
}

#[pymethods]
impl SmartObject {
    #[new]
    #[pyo3(signature = (sensors, actions, window_len=so::DEFAULT_WINDOW_LEN))]
    fn new(sensors: Vec<usize>, actions: Vec<String>, window_len: usize) -> PyResult<Self> {
        let inner = so::SmartObject::new(sensors, window_len, &actions, ModelParams::default()).map_err(py_err)?;
        Ok(SmartObject { inner })
    }

    /// Advances one second; returns the actions emitted on this tick.
    #[pyo3(signature = (sensor=None))]
    fn predict(&mut self, sensor: Option<usize>) -> PyResult<Vec<String>> {
        self.inner.predict(sensor).map_err(py_err)
    }

    fn learn(&mut self, action: &str) -> PyResult<()> {
        self.inner.learn(action).map_err(py_err)
    }

    fn observe_negative(&mut self, action: &str) -> PyResult<()> {
        self.inner.observe_negative(action).map_err(py_err)
    }

    fn weights(&self, action: &str) -> PyResult<Vec<i32>> {
        Ok(self.model(action)?.weights().to_vec())
    }

    fn threshold(&self, action: &str) -> PyResult<i32> {
        Ok(self.model(action)?.threshold())
    }

    #[getter]
    fn actions(&self) -> Vec<String> {
        self.inner.instances().iter().map(|m| m.action().to_string()).collect()
    }

    /// Model dumps as JSON strings, one per action.
    fn dumps(&self) -> Vec<String> {
        self.inner.dumps().iter().map(|d| d.to_json()).collect()
    }
}

/// Radio, MCU and battery parameters.
#[pyclass(name = "EnergyProfiles", module = "sosim")]
struct EnergyProfiles {
    inner: CoreProfiles,
}

#[pymethods]
impl EnergyProfiles {
    #[new]
    fn new() -> Self {
        EnergyProfiles {
            inner: CoreProfiles::default(),
        }
    }

    /// Parses a TOML or JSON profile; missing keys keep their defaults.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(EnergyProfiles {
            inner: CoreProfiles::parse(text).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn to_toml(&self) -> String {
        self.inner.to_annotated_toml()
    }

    fn tx_event_energy(&self) -> f64 {
        energy::tx_event_energy(&self.inner.radio)
    }

    #[pyo3(signature = (buffer_optimized=true, algorithm_optimized=true))]
    fn processing_time(&self, buffer_optimized: bool, algorithm_optimized: bool) -> f64 {
        energy::per_event_processing_time(&self.inner.mcu.timing, buffer_optimized, algorithm_optimized)
    }

    #[pyo3(signature = (processing_time=None))]
    fn mcu_event_energy(&self, processing_time: Option<f64>) -> f64 {
        let t = processing_time.unwrap_or_else(|| self.processing_time(true, true));
        energy::mcu_event_energy(&self.inner.mcu, t)
    }

    fn daily_energy_tx_all(&self, events_per_day: f64) -> f64 {
        energy::daily_energy_tx_all(events_per_day, &self.inner.radio)
    }

    /// Returns (processing, transmit, total) joules per day.
    #[pyo3(signature = (events_per_day, actions_per_day, processing_time=None))]
    fn daily_energy_so(&self, events_per_day: f64, actions_per_day: f64, processing_time: Option<f64>) -> (f64, f64, f64) {
        let t = processing_time.unwrap_or_else(|| self.processing_time(true, true));
        let e = energy::daily_energy_so(events_per_day, actions_per_day, &self.inner.mcu, &self.inner.radio, t);
        (e.processing, e.transmit, e.total)
    }

    /// Returns (days, batteries_per_day).
    fn battery_lifetime(&self, daily_energy: f64) -> PyResult<(f64, f64)> {
        let life = energy::battery_lifetime(daily_energy, &self.inner.battery).map_err(py_err)?;
        Ok((life.days, life.batteries_per_day))
    }

    fn __repr__(&self) -> String {
        format!("EnergyProfiles({})", serde_json::to_string(&self.inner).unwrap_or_default())
    }
}

/// Returns (fraction, overload).
#[pyfunction]
fn cpu_load(events_per_second: f64, processing_time: f64) -> (f64, bool) {
    let l = energy::cpu_load(events_per_second, processing_time);
    (l.fraction, l.overload)
}

#[pyfunction]
fn savings(baseline: f64, candidate: f64) -> PyResult<f64> {
    energy::savings(baseline, candidate).map_err(py_err)
}

/// Parses one log line into a dict.
#[pyfunction]
fn parse_line<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyDict>> {
    let r = trace::parse_line(text).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("timestamp", r.timestamp.format("%Y-%m-%d %H:%M:%S%.f").to_string())?;
    d.set_item("tick", r.tick().0)?;
    d.set_item("sensor", &r.sensor_id)?;
    d.set_item("value", r.value.to_string())?;
    d.set_item(
        "annotation",
        r.annotation.as_ref().map(|a| (a.activity.clone(), a.marker.to_string())),
    )?;
    Ok(d)
}

type Truth = (String, i64, i64);

/// Generates a synthetic trace; returns (trace_text, truth) where truth is a
/// list of (action, begin_tick, end_tick).
#[pyfunction]
#[pyo3(signature = (config_toml=None, seed=None))]
fn generate_synthetic(config_toml: Option<&str>, seed: Option<u64>) -> PyResult<(String, Vec<Truth>)> {
    let mut cfg = match config_toml {
        Some(t) => SyntheticConfig::from_toml(t).map_err(py_err)?,
        None => SyntheticConfig::kitchen(7),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let s = trace::generate_synthetic(&cfg).map_err(py_err)?;
    let mut buf = Vec::new();
    trace::write_trace(&s.log, &mut buf).map_err(py_err)?;
    let truth = s.truth.iter().map(|a| (a.action.clone(), a.begin.0, a.end.0)).collect();
    Ok((String::from_utf8(buf).expect("trace is UTF-8"), truth))
}

/// Report built from daily counts alone, as a JSON string.
#[pyfunction]
#[pyo3(signature = (events_per_day=1795, actions_per_day=7, profiles=None))]
fn paper_mode_report(events_per_day: u64, actions_per_day: u64, profiles: Option<PyRef<'_, EnergyProfiles>>) -> PyResult<String> {
    let p = profiles.map(|p| p.inner).unwrap_or_default();
    let r = core_sim::paper_mode_report(events_per_day, actions_per_day, &SoConfig::default(), &p).map_err(py_err)?;
    Ok(r.to_json())
}

/// Runs the `sosim` command line with `args` (without the program name);
/// returns (exit_code, stdout).
#[pyfunction]
fn run_cli(args: Vec<String>) -> (i32, String) {
    let mut out = Vec::new();
    let code = sosim_core::cli::run(std::iter::once("sosim".to_string()).chain(args), &mut out);
    (code, String::from_utf8_lossy(&out).into_owned())
}

#[pymodule]
fn sosim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<EventWindow>()?;
    m.add_class::<SmartObject>()?;
    m.add_class::<EnergyProfiles>()?;
    m.add_function(wrap_pyfunction!(cpu_load, m)?)?;
    m.add_function(wrap_pyfunction!(savings, m)?)?;
    m.add_function(wrap_pyfunction!(parse_line, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(paper_mode_report, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
