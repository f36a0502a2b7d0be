//! Raw records to impulse events: 1 Hz sampling, ON edges only, 3-byte identities.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{EventLog, RawRecord, SensorRegistry, SensorValue, Tick, TickSpan};

/// Largest index representable in a 3-byte identity, plus one.
pub const IDENTITY_LIMIT: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SensorEvent {
    pub tick: Tick,
    pub sensor_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpulseStream {
    /// Ordered by (tick, sensor_index), unique per pair.
    pub events: Vec<SensorEvent>,
    pub dropped_off_events: u64,
    pub merged_duplicates: u64,
    /// Span of the source log, including records outside the subset.
    pub span: TickSpan,
}

impl ImpulseStream {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Rebuilds an event log of whole-second ON records from the stream.
    pub fn to_event_log(&self, registry: &SensorRegistry) -> Result<EventLog> {
        let records = self
            .events
            .iter()
            .map(|e| {
                let sensor_id = registry
                    .name(e.sensor_index)
                    .ok_or_else(|| Error::UnknownSensor(format!("#{}", e.sensor_index)))?;
                Ok(RawRecord {
                    timestamp: e.tick.to_datetime(),
                    sensor_id: sensor_id.to_string(),
                    value: SensorValue::On,
                    annotation: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        EventLog::with_registry(records, registry.clone())
    }
}

/// Keeps ON records of `subset`, floors them to whole seconds and merges
/// repeats of one sensor within one second.
pub fn quantize(log: &EventLog, subset: &[usize]) -> Result<ImpulseStream> {
    let mask = log.registry().mask(subset)?;
    for &s in subset {
        if s as u64 >= IDENTITY_LIMIT {
            return Err(Error::IdentityOverflow(s as u64));
        }
    }
    let mut seen = HashSet::new();
    let mut events = Vec::new();
    let (mut dropped, mut merged) = (0, 0);
    for r in log.records() {
        let sensor_index = log.sensor_index(r);
        if !mask[sensor_index] {
            continue;
        }
        if !r.value.is_on() {
            dropped += 1;
            continue;
        }
        let event = SensorEvent {
            tick: r.tick(),
            sensor_index,
        };
        if seen.insert(event) {
            events.push(event);
        } else {
            merged += 1;
        }
    }
    events.sort_unstable();
    Ok(ImpulseStream {
        events,
        dropped_off_events: dropped,
        merged_duplicates: merged,
        span: log.tick_span(),
    })
}

/// Big-endian 3-byte payload.
pub fn encode_identity(sensor_index: u64) -> Result<[u8; 3]> {
    if sensor_index >= IDENTITY_LIMIT {
        return Err(Error::IdentityOverflow(sensor_index));
    }
    let [_, _, _, _, _, a, b, c] = sensor_index.to_be_bytes();
    Ok([a, b, c])
}

pub fn decode_identity(payload: [u8; 3]) -> u64 {
    u64::from_be_bytes([0, 0, 0, 0, 0, payload[0], payload[1], payload[2]])
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::trace::load_trace;

    fn log(text: &str) -> EventLog {
        load_trace(text.as_bytes()).unwrap().log
    }

    #[test]
    fn merges_within_one_second() {
        let l = log("2009-10-16 00:00:01.3 M001 ON\n2009-10-16 00:00:01.7 M001 ON\n");
        let s = quantize(&l, &[0]).unwrap();
        assert_eq!(s.events.len(), 1);
        assert_eq!(s.events[0].tick, l.tick_span().start);
        assert_eq!(s.merged_duplicates, 1);
    }

    #[test]
    fn drops_off_events() {
        let l = log("2009-10-16 00:00:01 M001 ON\n2009-10-16 00:00:02 M001 OFF\n");
        let s = quantize(&l, &[0]).unwrap();
        assert_eq!(s.events.len(), 1);
        assert_eq!(s.dropped_off_events, 1);
    }

    #[test]
    fn adjacent_seconds_stay_apart() {
        let l = log("2009-10-16 00:00:01.9 M001 ON\n2009-10-16 00:00:02.0 M001 ON\n");
        let s = quantize(&l, &[0]).unwrap();
        assert_eq!(s.events.len(), 2);
        assert_eq!(s.events[1].tick.0 - s.events[0].tick.0, 1);
        assert_eq!(s.merged_duplicates, 0);
    }

    #[test]
    fn ignores_sensors_outside_subset() {
        let l = log("2009-10-16 00:00:01 M001 ON\n2009-10-16 00:00:01 M002 ON\n2009-10-16 00:00:05 M002 OFF\n");
        let s = quantize(&l, &[0]).unwrap();
        assert_eq!(s.events.len(), 1);
        assert_eq!(s.dropped_off_events, 0);
        assert_eq!(s.span.seconds(), 5);
    }

    #[test]
    fn same_second_orders_by_sensor() {
        let l = log("2009-10-16 00:00:01.5 M002 ON\n2009-10-16 00:00:01.1 M001 ON\n");
        let s = quantize(&l, &[1, 0]).unwrap();
        let ids: Vec<usize> = s.events.iter().map(|e| e.sensor_index).collect();
        assert_eq!(ids, vec![0, 1]); // M002 registered first
        let l = log("2009-10-16 00:00:01.1 M001 ON\n2009-10-16 00:00:01.5 M002 ON\n2009-10-16 00:00:00.9 M002 ON\n");
        let s = quantize(&l, &[0, 1]).unwrap();
        let pairs: Vec<(i64, usize)> = s.events.iter().map(|e| (e.tick.0 % 60, e.sensor_index)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn identity_bytes() {
        assert_eq!(encode_identity(0).unwrap(), [0, 0, 0]);
        assert_eq!(encode_identity(21).unwrap(), [0x00, 0x00, 0x15]);
        assert_eq!(encode_identity((1 << 24) - 1).unwrap(), [0xff; 3]);
        assert!(matches!(encode_identity(1 << 24), Err(Error::IdentityOverflow(_))));
    }

    fn arb_log() -> impl Strategy<Value = EventLog> {
        prop::collection::vec((0u32..4, 0u32..20_000, any::<bool>()), 1..60).prop_map(|rows| {
            let text: String = rows
                .iter()
                .map(|&(s, ms, on)| {
                    format!(
                        "2009-10-16 00:00:{:02}.{:03} M{s:03} {}\n",
                        ms / 1000,
                        ms % 1000,
                        if on { "ON" } else { "OFF" }
                    )
                })
                .collect();
            log(&text)
        })
    }

    proptest! {
        #[test]
        fn identity_roundtrip(x in 0u64..IDENTITY_LIMIT) {
            prop_assert_eq!(decode_identity(encode_identity(x).unwrap()), x);
        }

        #[test]
        fn on_records_are_conserved(l in arb_log()) {
            let all: Vec<usize> = (0..l.registry().len()).collect();
            let s = quantize(&l, &all).unwrap();
            let on = l.records().iter().filter(|r| r.value.is_on()).count() as u64;
            prop_assert_eq!(on, s.events.len() as u64 + s.merged_duplicates);
            prop_assert_eq!(l.records().len() as u64 - on, s.dropped_off_events);
            prop_assert!(s.events.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn quantize_is_idempotent(l in arb_log()) {
            let all: Vec<usize> = (0..l.registry().len()).collect();
            let s = quantize(&l, &all).unwrap();
            if let Ok(rebuilt) = s.to_event_log(l.registry()) {
                let again = quantize(&rebuilt, &all).unwrap();
                prop_assert_eq!(&again.events, &s.events);
                prop_assert_eq!(again.merged_duplicates, 0);
                prop_assert_eq!(again.dropped_off_events, 0);
            } else {
                prop_assert!(s.events.is_empty());
            }
        }
    }
}
