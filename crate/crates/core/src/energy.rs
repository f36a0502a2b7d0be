//! Energy, battery, timing and CPU-load arithmetic for both architectures.
//!
//! Units are SI throughout: amperes, seconds, volts, joules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CC2420-class ZigBee transceiver cost of sending one small frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioProfile {
    pub csma_current: f64,
    pub csma_duration: f64,
    pub wake_current: f64,
    pub wake_duration: f64,
    pub tx_current: f64,
    pub tx_duration: f64,
    pub supply_voltage: f64,
}

impl Default for RadioProfile {
    fn default() -> Self {
        RadioProfile {
            csma_current: 0.0325,
            csma_duration: 0.0029,
            wake_current: 0.013,
            wake_duration: 0.013,
            tx_current: 0.0305,
            tx_duration: 0.001,
            supply_voltage: 2.0,
        }
    }
}

/// Per-event processing times measured on a 1 MHz PIC18F46J50.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingProfile {
    /// Accumulator-balanced FIFO update.
    pub fifo_optimized: f64,
    /// Summing the present sensors' weights.
    pub ai_sum_optimized: f64,
    /// Traversing a full 1800-value buffer instead.
    pub fifo_naive: f64,
    /// Unsimplified naive-Bayes evaluation.
    pub nb_naive: f64,
}

impl Default for TimingProfile {
    fn default() -> Self {
        TimingProfile {
            fifo_optimized: 0.000630,
            ai_sum_optimized: 0.000346,
            fifo_naive: 0.0385,
            nb_naive: 0.01753,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McuProfile {
    /// Current while running; idle draws nothing.
    pub run_current: f64,
    pub supply_voltage: f64,
    pub timing: TimingProfile,
}

impl Default for McuProfile {
    fn default() -> Self {
        McuProfile {
            run_current: 0.0012,
            supply_voltage: 2.0,
            timing: TimingProfile::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryProfile {
    pub capacity: f64,
}

impl Default for BatteryProfile {
    fn default() -> Self {
        // CR2032 figure used for the 81-day lifetime; real cells hold far more
        BatteryProfile { capacity: 0.675 }
    }
}

/// Every constant the simulator prices energy with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyProfiles {
    pub radio: RadioProfile,
    pub mcu: McuProfile,
    pub battery: BatteryProfile,
}

impl EnergyProfiles {
    pub fn validate(&self) -> Result<()> {
        let r = &self.radio;
        let t = &self.mcu.timing;
        let non_negative = [
            ("radio.csma_current", r.csma_current),
            ("radio.csma_duration", r.csma_duration),
            ("radio.wake_current", r.wake_current),
            ("radio.wake_duration", r.wake_duration),
            ("radio.tx_current", r.tx_current),
            ("radio.tx_duration", r.tx_duration),
            ("radio.supply_voltage", r.supply_voltage),
            ("mcu.run_current", self.mcu.run_current),
            ("mcu.supply_voltage", self.mcu.supply_voltage),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be >= 0")));
            }
        }
        let positive = [
            ("mcu.timing.fifo_optimized", t.fifo_optimized),
            ("mcu.timing.ai_sum_optimized", t.ai_sum_optimized),
            ("mcu.timing.fifo_naive", t.fifo_naive),
            ("mcu.timing.nb_naive", t.nb_naive),
            ("battery.capacity", self.battery.capacity),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be > 0")));
            }
        }
        Ok(())
    }

    /// Parses a JSON document (first non-blank char `{`) or TOML key-value text.
    /// Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let profiles: EnergyProfiles = if text.trim_start().starts_with('{') {
            serde_json::from_str(text)?
        } else {
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?
        };
        profiles.validate()?;
        Ok(profiles)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profiles serialize")
    }

    /// Annotated TOML that [`EnergyProfiles::parse`] reads back.
    pub fn to_annotated_toml(&self) -> String {
        let r = &self.radio;
        let m = &self.mcu;
        let t = &m.timing;
        format!(
            "# ZigBee transceiver, priced per transmitted 3-byte event\n\
             [radio]\n\
             csma_current = {:?}    # A, carrier-sense multiple access\n\
             csma_duration = {:?}   # s\n\
             wake_current = {:?}    # A, waking the node's microcontroller\n\
             wake_duration = {:?}   # s\n\
             tx_current = {:?}      # A, on-air transmission\n\
             tx_duration = {:?}     # s\n\
             supply_voltage = {:?}  # V, transceiver minimum operating voltage\n\
             \n\
             # Smart-object microcontroller at 1 MHz; idle draws nothing\n\
             [mcu]\n\
             run_current = {:?}     # A\n\
             supply_voltage = {:?}  # V\n\
             \n\
             # Per-event processing times\n\
             [mcu.timing]\n\
             fifo_optimized = {:?}    # s, accumulator-balanced FIFO update\n\
             ai_sum_optimized = {:?}  # s, summing five weights\n\
             fifo_naive = {:?}        # s, full traversal of 1800 buffered values\n\
             nb_naive = {:?}          # s, unsimplified naive Bayes\n\
             \n\
             # Coin cell\n\
             [battery]\n\
             capacity = {:?}  # J, CR2032\n",
            r.csma_current,
            r.csma_duration,
            r.wake_current,
            r.wake_duration,
            r.tx_current,
            r.tx_duration,
            r.supply_voltage,
            m.run_current,
            m.supply_voltage,
            t.fifo_optimized,
            t.ai_sum_optimized,
            t.fifo_naive,
            t.nb_naive,
            self.battery.capacity,
        )
    }
}

pub fn tx_event_energy(radio: &RadioProfile) -> f64 {
    (radio.csma_current * radio.csma_duration
        + radio.wake_current * radio.wake_duration
        + radio.tx_current * radio.tx_duration)
        * radio.supply_voltage
}

pub fn mcu_event_energy(mcu: &McuProfile, processing_time: f64) -> f64 {
    mcu.run_current * processing_time * mcu.supply_voltage
}
/// Buffer phase plus algorithm phase.
/// Buffer and algorithm phases run back to back, so naive variants add up.
pub fn per_event_processing_time(timing: &TimingProfile, buffer_optimized: bool, algorithm_optimized: bool) -> f64 {
    let buffer = if buffer_optimized {
        timing.fifo_optimized
    } else {
        timing.fifo_naive
    };
    let algorithm = if algorithm_optimized {
        timing.ai_sum_optimized
    } else {
        timing.nb_naive
    };
    buffer + algorithm
}

pub fn daily_energy_tx_all(events_per_day: f64, radio: &RadioProfile) -> f64 {
    events_per_day * tx_event_energy(radio)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoDailyEnergy {
    pub processing: f64,
    pub transmit: f64,
    pub total: f64,
}

pub fn daily_energy_so(
    events_per_day: f64,
    actions_per_day: f64,
    mcu: &McuProfile,
    radio: &RadioProfile,
    processing_time: f64,
) -> SoDailyEnergy {
    let processing = events_per_day * mcu_event_energy(mcu, processing_time);
    let transmit = actions_per_day * tx_event_energy(radio);
    SoDailyEnergy {
        processing,
        transmit,
        total: processing + transmit,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryLife {
    pub days: f64,
    pub batteries_per_day: f64,
}

pub fn battery_lifetime(daily_energy: f64, battery: &BatteryProfile) -> Result<BatteryLife> {
    if daily_energy <= 0.0 {
        return Err(Error::ZeroConsumption);
    }
    Ok(BatteryLife {
        days: battery.capacity / daily_energy,
        batteries_per_day: daily_energy / battery.capacity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpuLoad {
    /// Busy fraction, capped at 1.
    pub fraction: f64,
    /// Demand exceeded the processor.
    pub overload: bool,
}

pub fn cpu_load(events_per_second: f64, processing_time: f64) -> CpuLoad {
    let demand = events_per_second * processing_time;
    CpuLoad {
        fraction: demand.min(1.0),
        overload: demand > 1.0,
    }
}

/// Percentage saved by `candidate` relative to `baseline`.
pub fn savings(baseline: f64, candidate: f64) -> Result<f64> {
    if baseline <= 0.0 {
        return Err(Error::ZeroBaseline);
    }
    Ok(100.0 * (1.0 - candidate / baseline))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn transmit_energy() {
        // (32.5 mA * 2.9 ms + 13 mA * 13 ms + 30.5 mA * 1 ms) * 2 V
        let oracle = (94.25e-6 + 169e-6 + 30.5e-6) * 2.0;
        assert!(close(tx_event_energy(&RadioProfile::default()), oracle, 1e-12));
        assert!(close(oracle, 587.5e-6, 1e-12));
        let silent = RadioProfile {
            csma_duration: 0.0,
            wake_duration: 0.0,
            tx_duration: 0.0,
            ..RadioProfile::default()
        };
        assert_eq!(tx_event_energy(&silent), 0.0);
        let doubled = RadioProfile {
            supply_voltage: 4.0,
            ..RadioProfile::default()
        };
        assert!(close(tx_event_energy(&doubled), 2.0 * oracle, 1e-12));
    }

    #[test]
    fn processing_energy() {
        let mcu = McuProfile::default();
        assert!(close(mcu_event_energy(&mcu, 0.000976), 2.3424e-6, 1e-12));
        assert_eq!(mcu_event_energy(&mcu, 0.0), 0.0);
        assert!(close(mcu_event_energy(&mcu, 0.01753), 42.072e-6, 1e-12));
    }

    #[test]
    fn timing_composition() {
        let t = TimingProfile::default();
        assert!(close(per_event_processing_time(&t, true, true), 0.000976, 1e-12));
        assert!(close(per_event_processing_time(&t, false, true), 0.038846, 1e-12));
        assert!(close(per_event_processing_time(&t, true, false), 0.01816, 1e-12));
        assert!(close(per_event_processing_time(&t, false, false), 0.05603, 1e-12));
    }

    #[test]
    fn daily_baseline() {
        let r = RadioProfile::default();
        assert!(close(daily_energy_tx_all(1795.0, &r), 1.0545625, 1e-12));
        assert_eq!(daily_energy_tx_all(0.0, &r), 0.0);
        assert!(close(daily_energy_tx_all(1.0, &r), 587.5e-6, 1e-12));
    }

    #[test]
    fn daily_smart_object() {
        let (m, r) = (McuProfile::default(), RadioProfile::default());
        let e = daily_energy_so(1795.0, 7.0, &m, &r, 0.000976);
        assert!(close(e.processing, 4.204608e-3, 1e-9));
        assert!(close(e.transmit, 4.1125e-3, 1e-12));
        assert!(close(e.total, 8.317108e-3, 1e-9));
        let zero = daily_energy_so(0.0, 0.0, &m, &r, 0.000976);
        assert_eq!(zero.total, 0.0);
        let no_savings = daily_energy_so(1795.0, 1795.0, &m, &r, 0.000976);
        assert!(close(no_savings.total, daily_energy_tx_all(1795.0, &r) + e.processing, 1e-12));
        let same = daily_energy_so(1795.0, 1795.0, &m, &r, 0.0);
        assert!(close(same.total, daily_energy_tx_all(1795.0, &r), 1e-12));
    }

    #[test]
    fn battery() {
        let b = BatteryProfile::default();
        let so = battery_lifetime(8.317108e-3, &b).unwrap();
        assert!((so.days - 81.158).abs() < 1e-3);
        let base = battery_lifetime(1.0545625, &b).unwrap();
        assert!((base.days - 0.64008).abs() < 1e-4);
        assert!((base.batteries_per_day - 1.56231).abs() < 1e-4);
        assert_eq!(battery_lifetime(0.675, &b).unwrap().days, 1.0);
        assert!(matches!(battery_lifetime(0.0, &b), Err(Error::ZeroConsumption)));
    }

    #[test]
    fn load() {
        assert!(close(cpu_load(5.0, 0.000976).fraction, 0.00488, 1e-12));
        assert!(close(cpu_load(100.0, 0.000976).fraction, 0.0976, 1e-12));
        assert_eq!(cpu_load(0.0, 0.000976).fraction, 0.0);
        let over = cpu_load(2000.0, 0.000976);
        assert_eq!(over.fraction, 1.0);
        assert!(over.overload);
    }

    #[test]
    fn savings_cases() {
        assert!((savings(1.0545625, 8.317108e-3).unwrap() - 99.2113).abs() < 1e-3);
        assert_eq!(savings(3.0, 3.0).unwrap(), 0.0);
        assert_eq!(savings(3.0, 0.0).unwrap(), 100.0);
        assert!(matches!(savings(0.0, 1.0), Err(Error::ZeroBaseline)));
    }

    #[test]
    fn profiles_text_roundtrip() {
        let p = EnergyProfiles::default();
        assert_eq!(EnergyProfiles::parse(&p.to_annotated_toml()).unwrap(), p);
        assert_eq!(EnergyProfiles::parse(&p.to_json()).unwrap(), p);
        let partial = EnergyProfiles::parse("[battery]\ncapacity = 2000.0\n").unwrap();
        assert_eq!(partial.battery.capacity, 2000.0);
        assert_eq!(partial.radio, RadioProfile::default());
        assert!(EnergyProfiles::parse("[battery]\ncapacity = 0.0\n").is_err());
        assert!(EnergyProfiles::parse("[radio]\ntx_current = -1.0\n").is_err());
    }

    proptest! {
        #[test]
        fn radio_energy_is_linear(k in 0.01f64..100.0, which in 0usize..7) {
            let base = RadioProfile::default();
            let mut scaled = base;
            let field = match which {
                0 => &mut scaled.csma_current,
                1 => &mut scaled.csma_duration,
                2 => &mut scaled.wake_current,
                3 => &mut scaled.wake_duration,
                4 => &mut scaled.tx_current,
                5 => &mut scaled.tx_duration,
                _ => &mut scaled.supply_voltage,
            };
            *field *= k;
            // only the scaled term moves; check against the term-wise oracle
            let term = |r: &RadioProfile| match which {
                0 | 1 => r.csma_current * r.csma_duration * r.supply_voltage,
                2 | 3 => r.wake_current * r.wake_duration * r.supply_voltage,
                4 | 5 => r.tx_current * r.tx_duration * r.supply_voltage,
                _ => tx_event_energy(r),
            };
            let expected = tx_event_energy(&base) + (k - 1.0) * term(&base);
            prop_assert!(close(tx_event_energy(&scaled), expected, 1e-9));
        }

        #[test]
        fn mcu_energy_is_linear(k in 0.01f64..100.0, t in 0.0f64..0.1) {
            let base = McuProfile::default();
            let scaled = McuProfile { run_current: base.run_current * k, ..base };
            prop_assert!(close(mcu_event_energy(&scaled, t), k * mcu_event_energy(&base, t), 1e-12));
            prop_assert!(close(mcu_event_energy(&base, k * t), k * mcu_event_energy(&base, t), 1e-12));
            let volts = McuProfile { supply_voltage: base.supply_voltage * k, ..base };
            prop_assert!(close(mcu_event_energy(&volts, t), k * mcu_event_energy(&base, t), 1e-12));
        }

        #[test]
        fn lifetime_times_energy_is_capacity(e in 1e-6f64..1e3, cap in 1e-3f64..1e4) {
            let life = battery_lifetime(e, &BatteryProfile { capacity: cap }).unwrap();
            prop_assert!(close(life.days * e, cap, 1e-12));
        }
    }
}
