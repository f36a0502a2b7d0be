//! The smart object: a slotted circular event window with per-sensor
//! accumulators, feeding independent integer naive-Bayes detectors.
//!
//! The window holds one entry per second (a sensor or nothing). Every push
//! evicts the oldest entry and updates the accumulator in O(1), so scoring only
//! has to look at the accumulator, never at the slots:
//!
//! 1. the new entry is staged,
//! 2. the entry under `ptr` (the oldest) has its count decremented,
//! 3. the new entry has its count incremented,
//! 4. the new entry overwrites the oldest slot,
//! 5. `ptr` advances to the next-oldest slot,
//! 6. the weights of every sensor present in the window are summed,
//! 7. the sum is compared against the threshold.
//!
//! Weights are fixed-point log-likelihood ratios of binary presence features.
//! Learning uses floating-point logarithms; prediction is integer-only.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_WINDOW_LEN: usize = 1800;
pub const DEFAULT_SCALE: i32 = 256;
pub const DEFAULT_ALPHA: f64 = 1.0;
/// Largest weight magnitude, as in a 16-bit signed register.
pub const DEFAULT_W_MAX: i32 = i16::MAX as i32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Fixed-point scale applied to natural-log ratios.
    pub scale: i32,
    /// Laplace smoothing pseudo-count.
    pub alpha: f64,
    pub w_max: i32,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            scale: DEFAULT_SCALE,
            alpha: DEFAULT_ALPHA,
            w_max: DEFAULT_W_MAX,
        }
    }
}

/// Circular buffer of the last `len` entries plus per-sensor counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventWindow {
    slots: Vec<Option<u32>>,
    /// Oldest slot; the next push overwrites it.
    ptr: usize,
    acc: Vec<u32>,
    staged: Option<usize>,
}

impl EventWindow {
    /// An all-empty window over sensors `0..sensors`.
    ///
    /// Panics if `len` is zero.
    pub fn new(len: usize, sensors: usize) -> Self {
        assert!(len > 0, "window needs at least one slot");
        EventWindow {
            slots: vec![None; len],
            ptr: 0,
            acc: vec![0; sensors],
            staged: None,
        }
    }

    /// Pushes one entry and returns the evicted one.
    ///
    /// Panics if `entry` is not below the sensor count.
    pub fn push(&mut self, entry: Option<usize>) -> Option<usize> {
        self.staged = entry;
        let oldest = self.slots[self.ptr];
        if let Some(old) = oldest {
            self.acc[old as usize] -= 1;
        }
        if let Some(new) = entry {
            self.acc[new] += 1;
        }
        self.slots[self.ptr] = entry.map(|s| s as u32);
        self.ptr = (self.ptr + 1) % self.slots.len();
        oldest.map(|s| s as usize)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.acc.iter().all(|&c| c == 0)
    }

    pub fn sensors(&self) -> usize {
        self.acc.len()
    }

    pub fn ptr(&self) -> usize {
        self.ptr
    }

    pub fn acc(&self) -> &[u32] {
        &self.acc
    }

    pub fn last_received(&self) -> Option<usize> {
        self.staged
    }

    /// Slots from oldest to newest.
    pub fn entries(&self) -> impl Iterator<Item = Option<usize>> + '_ {
        let (newer, older) = self.slots.split_at(self.ptr);
        older.iter().chain(newer).map(|s| s.map(|s| s as usize))
    }

    pub fn presence(&self) -> Vec<bool> {
        self.acc.iter().map(|&c| c > 0).collect()
    }

    /// Sum of the weights of sensors present at least once. Counts above one
    /// do not multiply the weight.
    pub fn score(&self, model: &NBModel) -> i64 {
        self.acc
            .iter()
            .zip(&model.weights)
            .filter(|(&c, _)| c > 0)
            .map(|(_, &w)| w as i64)
            .sum()
    }

    /// Same score, recomputed by walking every slot instead of the accumulator.
    pub fn score_by_traversal(&self, model: &NBModel) -> i64 {
        let mut present = vec![false; model.weights.len()];
        for s in self.slots.iter().flatten() {
            present[*s as usize] = true;
        }
        present
            .iter()
            .zip(&model.weights)
            .filter(|(&p, _)| p)
            .map(|(_, &w)| w as i64)
            .sum()
    }
}

/// Unscaled fixed-point log-likelihood ratio of one presence feature.
pub fn presence_weight(c: u32, n: u32, d: u32, m: u32, params: &ModelParams) -> i64 {
    let a = params.alpha;
    let pos = ((c as f64 + a) / (n as f64 + 2.0 * a)).ln();
    let neg = ((d as f64 + a) / (m as f64 + 2.0 * a)).ln();
    (params.scale as f64 * (pos - neg)).round() as i64
}

/// Halves everything until it fits in `[-w_max, w_max]`; returns the number of halvings.
fn halve_until_bounded(weights: &mut [i64], threshold: &mut i64, w_max: i64) -> u32 {
    let mut shifts = 0;
    while weights.iter().any(|w| w.abs() > w_max) || threshold.abs() > w_max {
        weights.iter_mut().for_each(|w| *w >>= 1);
        *threshold >>= 1;
        shifts += 1;
    }
    shifts
}

/// One binary detector for one action.
#[derive(Debug, Clone, PartialEq)]
pub struct NBModel {
    action: String,
    params: ModelParams,
    weights: Vec<i32>,
    threshold: i32,
    /// Positive examples seen (n).
    positives: u32,
    /// Positive examples with each sensor present (c).
    pos_presence: Vec<u32>,
    /// Negative snapshots seen (m).
    negatives: u32,
    /// Negative snapshots with each sensor present (d).
    neg_presence: Vec<u32>,
    scale_shift: u32,
    above: bool,
}

impl NBModel {
    /// Untrained: zero weights and a threshold of one, so it never fires.
    pub fn new(action: impl Into<String>, sensors: usize, params: ModelParams) -> Self {
        NBModel {
            action: action.into(),
            params,
            weights: vec![0; sensors],
            threshold: 1,
            positives: 0,
            pos_presence: vec![0; sensors],
            negatives: 0,
            neg_presence: vec![0; sensors],
            scale_shift: 0,
            above: false,
        }
    }

    /// A model with hand-set weights and threshold and no training history.
    pub fn with_weights(action: impl Into<String>, weights: Vec<i32>, threshold: i32, params: ModelParams) -> Self {
        let mut model = Self::new(action, weights.len(), params);
        model.weights = weights;
        model.threshold = threshold;
        model
    }

    pub fn action(&self) -> &str {
        &self.action
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn weights(&self) -> &[i32] {
        &self.weights
    }

    pub fn threshold(&self) -> i32 {
        self.threshold
    }

    pub fn positives(&self) -> u32 {
        self.positives
    }

    pub fn negatives(&self) -> u32 {
        self.negatives
    }

    pub fn pos_presence(&self) -> &[u32] {
        &self.pos_presence
    }

    pub fn neg_presence(&self) -> &[u32] {
        &self.neg_presence
    }

    pub fn scale_shift(&self) -> u32 {
        self.scale_shift
    }

    pub fn is_above(&self) -> bool {
        self.above
    }

    pub fn sensors(&self) -> usize {
        self.weights.len()
    }

    /// Records a positive example and refits.
    pub fn learn(&mut self, presence: &[bool]) {
        assert_eq!(presence.len(), self.sensors(), "presence vector length");
        self.positives += 1;
        for (c, &p) in self.pos_presence.iter_mut().zip(presence) {
            *c += p as u32;
        }
        self.refit();
    }

    /// Records a background snapshot and refits.
    pub fn observe_negative(&mut self, presence: &[bool]) {
        assert_eq!(presence.len(), self.sensors(), "presence vector length");
        self.negatives += 1;
        for (d, &p) in self.neg_presence.iter_mut().zip(presence) {
            *d += p as u32;
        }
        self.refit();
    }

    /// Recomputes weights from the counts, sets the threshold halfway between
    /// the mean positive and mean negative score, then rebalances.
    fn refit(&mut self) {
        if self.positives == 0 {
            // nothing to detect yet
            self.weights.iter_mut().for_each(|w| *w = 0);
            self.threshold = 1;
            return;
        }
        let shift = self.scale_shift;
        let mut weights: Vec<i64> = self
            .pos_presence
            .iter()
            .zip(&self.neg_presence)
            .map(|(&c, &d)| presence_weight(c, self.positives, d, self.negatives, &self.params) >> shift)
            .collect();
        // score is linear in presence, so mean scores follow from the counts
        let mean_score = |counts: &[u32], total: u32| -> f64 {
            if total == 0 {
                return 0.0;
            }
            let sum: i64 = weights.iter().zip(counts).map(|(&w, &k)| w * k as i64).sum();
            sum as f64 / total as f64
        };
        let midpoint = (mean_score(&self.pos_presence, self.positives)
            + mean_score(&self.neg_presence, self.negatives))
            / 2.0;
        let mut threshold = midpoint.round() as i64;
        self.scale_shift += halve_until_bounded(&mut weights, &mut threshold, self.params.w_max as i64);
        self.weights = weights.into_iter().map(|w| w as i32).collect();
        self.threshold = threshold as i32;
    }

    /// One balance step: arithmetic-shift every weight and the threshold right by one.
    pub fn halve(&mut self) {
        self.weights.iter_mut().for_each(|w| *w >>= 1);
        self.threshold >>= 1;
        self.scale_shift += 1;
    }

    /// Arithmetic-shifts weights and threshold right until all fit in `w_max`.
    pub fn rescale(&mut self) {
        let mut weights: Vec<i64> = self.weights.iter().map(|&w| w as i64).collect();
        let mut threshold = self.threshold as i64;
        self.scale_shift += halve_until_bounded(&mut weights, &mut threshold, self.params.w_max as i64);
        self.weights = weights.into_iter().map(|w| w as i32).collect();
        self.threshold = threshold as i32;
    }

    /// Feeds one score to the edge latch; true only on a rising edge.
    pub fn latch(&mut self, score: i64) -> bool {
        let now = score > self.threshold as i64;
        let rising = now && !self.above;
        self.above = now;
        rising
    }

    pub fn reset_latch(&mut self) {
        self.above = false;
    }

    pub fn to_dump(&self, window_len: usize) -> ModelDump {
        ModelDump {
            action: self.action.clone(),
            n: self.positives,
            m: self.negatives,
            c: self.pos_presence.clone(),
            d: self.neg_presence.clone(),
            weights: self.weights.clone(),
            threshold: self.threshold,
            scale_shift: self.scale_shift,
            scale: self.params.scale,
            window_len,
            alpha: self.params.alpha,
            w_max: self.params.w_max,
        }
    }

    pub fn from_dump(dump: &ModelDump) -> Result<Self> {
        let k = dump.weights.len();
        let invalid = |msg: String| Err(Error::InvalidConfig(format!("model {:?}: {msg}", dump.action)));
        if dump.c.len() != k || dump.d.len() != k {
            return invalid(format!("c/d/weights lengths {}/{}/{k} differ", dump.c.len(), dump.d.len()));
        }
        if dump.c.iter().any(|&c| c > dump.n) || dump.d.iter().any(|&d| d > dump.m) {
            return invalid("presence count exceeds example count".into());
        }
        let w_max = dump.w_max;
        if dump.weights.iter().any(|w| w.abs() > w_max) || dump.threshold.abs() > w_max {
            return invalid(format!("weights exceed {w_max}"));
        }
        Ok(NBModel {
            action: dump.action.clone(),
            params: ModelParams {
                scale: dump.scale,
                alpha: dump.alpha,
                w_max,
            },
            weights: dump.weights.clone(),
            threshold: dump.threshold,
            positives: dump.n,
            pos_presence: dump.c.clone(),
            negatives: dump.m,
            neg_presence: dump.d.clone(),
            scale_shift: dump.scale_shift,
            above: false,
        })
    }
}

/// Serialized form of a trained detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDump {
    pub action: String,
    pub n: u32,
    pub m: u32,
    pub c: Vec<u32>,
    pub d: Vec<u32>,
    pub weights: Vec<i32>,
    pub threshold: i32,
    pub scale_shift: u32,
    #[serde(rename = "Q")]
    pub scale: i32,
    #[serde(rename = "N")]
    pub window_len: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_w_max")]
    pub w_max: i32,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_w_max() -> i32 {
    DEFAULT_W_MAX
}

impl ModelDump {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dump serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A window wired to a fixed set of sensors plus one detector per action.
#[derive(Debug, Clone)]
pub struct SmartObject {
    window: EventWindow,
    instances: Vec<NBModel>,
    sensors: Vec<usize>,
    local: HashMap<usize, usize>,
}

impl SmartObject {
    /// `sensors` are global sensor indices; their position becomes the local index.
    pub fn new<S: AsRef<str>>(sensors: Vec<usize>, window_len: usize, actions: &[S], params: ModelParams) -> Result<Self> {
        let models = actions
            .iter()
            .map(|a| NBModel::new(a.as_ref(), sensors.len(), params))
            .collect();
        Self::from_models(sensors, window_len, models)
    }

    pub fn from_models(sensors: Vec<usize>, window_len: usize, instances: Vec<NBModel>) -> Result<Self> {
        if window_len == 0 {
            return Err(Error::InvalidConfig("window length must be positive".into()));
        }
        let mut local = HashMap::new();
        for (i, &s) in sensors.iter().enumerate() {
            if local.insert(s, i).is_some() {
                return Err(Error::InvalidConfig(format!("sensor {s} wired twice")));
            }
        }
        let mut names = std::collections::HashSet::new();
        for m in &instances {
            if !names.insert(m.action()) {
                return Err(Error::InvalidConfig(format!("duplicate action {:?}", m.action())));
            }
            if m.sensors() != sensors.len() {
                return Err(Error::InvalidConfig(format!(
                    "model {:?} has {} sensors, object has {}",
                    m.action(),
                    m.sensors(),
                    sensors.len()
                )));
            }
        }
        Ok(SmartObject {
            window: EventWindow::new(window_len, sensors.len()),
            instances,
            sensors,
            local,
        })
    }

    pub fn window(&self) -> &EventWindow {
        &self.window
    }

    pub fn instances(&self) -> &[NBModel] {
        &self.instances
    }

    pub fn sensors(&self) -> &[usize] {
        &self.sensors
    }

    pub fn instance(&self, action: &str) -> Option<&NBModel> {
        self.instances.iter().find(|m| m.action() == action)
    }

    fn instance_index(&self, action: &str) -> Result<usize> {
        self.instances
            .iter()
            .position(|m| m.action() == action)
            .ok_or_else(|| Error::UnknownAction(action.to_string()))
    }

    pub fn local_index(&self, sensor: usize) -> Result<usize> {
        self.local.get(&sensor).copied().ok_or(Error::UnregisteredSensor(sensor))
    }

    /// Pushes one second's entry (a global sensor index or nothing), scores
    /// every instance and appends the index of each instance that rose above
    /// its threshold to `emitted`.
    pub fn predict_into(&mut self, sensor: Option<usize>, emitted: &mut Vec<usize>) -> Result<()> {
        let entry = sensor.map(|s| self.local_index(s)).transpose()?;
        self.window.push(entry);
        for (i, model) in self.instances.iter_mut().enumerate() {
            let score = self.window.score(model);
            if model.latch(score) {
                emitted.push(i);
            }
        }
        Ok(())
    }

    /// Like [`SmartObject::predict_into`], returning emitted action names.
    pub fn predict(&mut self, sensor: Option<usize>) -> Result<Vec<String>> {
        let mut emitted = Vec::new();
        self.predict_into(sensor, &mut emitted)?;
        Ok(emitted
            .into_iter()
            .map(|i| self.instances[i].action().to_string())
            .collect())
    }

    /// Trains `action` on the current window as a positive example.
    pub fn learn(&mut self, action: &str) -> Result<()> {
        let i = self.instance_index(action)?;
        let presence = self.window.presence();
        self.instances[i].learn(&presence);
        Ok(())
    }

    /// Trains `action` on the current window as a background snapshot.
    pub fn observe_negative(&mut self, action: &str) -> Result<()> {
        let i = self.instance_index(action)?;
        let presence = self.window.presence();
        self.instances[i].observe_negative(&presence);
        Ok(())
    }

    pub fn dumps(&self) -> Vec<ModelDump> {
        self.instances.iter().map(|m| m.to_dump(self.window.len())).collect()
    }
}
