use crate::model::{ModelError, RunMeta};
use crate::Real;

pub const MAGIC: [u8; 4] = *b"VIP2";
pub const FORMAT_VERSION: u16 = 1;
pub const QDC_CHANNELS: usize = 32;
pub const SDD_COUNT: u8 = 6;
pub const RECORD_SIZE: usize = 8 + 1 + 1 + 2 + 2 * QDC_CHANNELS + 4;

pub const TRIGGER_SDD: u8 = 1 << 0;
pub const TRIGGER_VETO_INNER: u8 = 1 << 1;
pub const TRIGGER_VETO_OUTER: u8 = 1 << 2;
/// `sdd_id` of records triggered by the veto layers alone.
pub const VETO_ONLY_SDD_ID: u8 = 255;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EventRecord {
    pub timestamp_ns: u64,
    pub trigger_flags: u8,
    pub sdd_id: u8,
    pub adc: u16,
    pub qdc: [u16; QDC_CHANNELS],
    pub sdd_timing_ns: i32,
}

impl EventRecord {
    pub fn has_sdd(&self) -> bool {
        self.trigger_flags & TRIGGER_SDD != 0
    }

    /// Both veto layers fired on this record.
    pub fn veto_coincidence(&self) -> bool {
        let both = TRIGGER_VETO_INNER | TRIGGER_VETO_OUTER;
        self.trigger_flags & both == both
    }

    pub fn check(&self) -> Result<(), String> {
        if self.has_sdd() {
            if self.sdd_id >= SDD_COUNT {
                return Err(format!("sdd_id {} outside 0..{SDD_COUNT}", self.sdd_id));
            }
        } else if self.sdd_id != VETO_ONLY_SDD_ID {
            return Err(format!(
                "record without SDD trigger must carry sdd_id {VETO_ONLY_SDD_ID}, found {}",
                self.sdd_id
            ));
        }
        Ok(())
    }

    pub(crate) fn encode(&self, buf: &mut [u8; RECORD_SIZE]) {
        buf[0..8].copy_from_slice(&self.timestamp_ns.to_le_bytes());
        buf[8] = self.trigger_flags;
        buf[9] = self.sdd_id;
        buf[10..12].copy_from_slice(&self.adc.to_le_bytes());
        for (i, q) in self.qdc.iter().enumerate() {
            buf[12 + 2 * i..14 + 2 * i].copy_from_slice(&q.to_le_bytes());
        }
        buf[76..80].copy_from_slice(&self.sdd_timing_ns.to_le_bytes());
    }

    pub(crate) fn decode(buf: &[u8; RECORD_SIZE]) -> Self {
        let u16_at = |i: usize| u16::from_le_bytes([buf[i], buf[i + 1]]);
        let mut qdc = [0u16; QDC_CHANNELS];
        for (i, q) in qdc.iter_mut().enumerate() {
            *q = u16_at(12 + 2 * i);
        }
        Self {
            timestamp_ns: u64::from_le_bytes(buf[0..8].try_into().expect("8 bytes")),
            trigger_flags: buf[8],
            sdd_id: buf[9],
            adc: u16_at(10),
            qdc,
            sdd_timing_ns: i32::from_le_bytes(buf[76..80].try_into().expect("4 bytes")),
        }
    }
}

/// File header: format identification plus the run metadata in integer units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunHeader {
    pub format_version: u16,
    pub run_id: String,
    pub current_ma: u32,
    pub live_time_s: u64,
    pub current_on: bool,
    pub event_count: u64,
}

impl RunHeader {
    /// Converts run metadata to file units: current rounded to mA, live time
    /// rounded to whole seconds.
    pub fn from_meta<T: Real>(meta: &RunMeta<T>, event_count: u64) -> Result<Self, ModelError> {
        meta.validate()?;
        let current_ma = (meta.current_a * T::lit(1000.0))
            .round()
            .to_u32()
            .ok_or_else(|| ModelError::Domain(format!("current {} A does not fit the header", meta.current_a)))?;
        let live_time_s = meta
            .live_time_s
            .round()
            .to_u64()
            .ok_or_else(|| ModelError::Domain(format!("live time {} s does not fit the header", meta.live_time_s)))?;
        Ok(Self {
            format_version: FORMAT_VERSION,
            run_id: meta.run_id.clone(),
            current_ma,
            live_time_s,
            current_on: meta.current_on,
            event_count,
        })
    }

    pub fn meta<T: Real>(&self) -> RunMeta<T> {
        RunMeta {
            run_id: self.run_id.clone(),
            current_a: T::lit(f64::from(self.current_ma) / 1000.0),
            live_time_s: T::count(self.live_time_s),
            current_on: self.current_on,
        }
    }

    /// Header bytes after magic and version.
    pub fn payload_len(&self) -> usize {
        2 + self.run_id.len() + 4 + 8 + 1 + 8
    }

    pub(crate) fn check(&self) -> Result<(), String> {
        if self.run_id.len() > usize::from(u16::MAX) {
            return Err("run_id longer than 65535 bytes".into());
        }
        if !self.current_on && self.current_ma != 0 {
            return Err(format!("current-off run carries {} mA", self.current_ma));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_size_is_80_bytes() {
        assert_eq!(RECORD_SIZE, 80);
    }

    #[test]
    fn sdd_id_invariant() {
        let mut r = EventRecord {
            timestamp_ns: 0,
            trigger_flags: TRIGGER_SDD,
            sdd_id: 5,
            adc: 0,
            qdc: [0; QDC_CHANNELS],
            sdd_timing_ns: 0,
        };
        assert!(r.check().is_ok());
        r.sdd_id = 7;
        assert!(r.check().is_err());
        r.sdd_id = VETO_ONLY_SDD_ID;
        assert!(r.check().is_err());
        r.trigger_flags = TRIGGER_VETO_INNER | TRIGGER_VETO_OUTER;
        assert!(r.check().is_ok());
        assert!(r.veto_coincidence());
        r.sdd_id = 0;
        assert!(r.check().is_err());
    }

    #[test]
    fn header_meta_conversion() {
        let meta = RunMeta::current_on("on", 100.0, 34.0 * 86_400.0).unwrap();
        let h = RunHeader::from_meta(&meta, 3).unwrap();
        assert_eq!(h.current_ma, 100_000);
        assert_eq!(h.live_time_s, 2_937_600);
        assert_eq!(h.meta::<f64>(), meta);
    }
}
