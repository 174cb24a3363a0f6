//! Binary run files for simulated DAQ events, event selection, and
//! histogramming into spectra.
//!
//! A run file is a header followed by `event_count` fixed-width records, all
//! little-endian:
//!
//! ```text
//! header:  magic "VIP2" | version u16 | run_id_len u16 | run_id utf-8
//!          | current_ma u32 | live_time_s u64 | current_on u8 | event_count u64
//! record:  timestamp_ns u64 | trigger_flags u8 | sdd_id u8 | adc u16
//!          | qdc 32 × u16 | sdd_timing_ns i32                 (80 bytes)
//! ```

mod format;
mod record;
mod select;
mod spectrum;

pub use format::{encoded_len, read_run, read_run_all, write_run, FormatError, RunReader};
pub use record::{
    EventRecord, RunHeader, FORMAT_VERSION, MAGIC, QDC_CHANNELS, RECORD_SIZE, SDD_COUNT, TRIGGER_SDD,
    TRIGGER_VETO_INNER, TRIGGER_VETO_OUTER, VETO_ONLY_SDD_ID,
};
pub use select::{select_events, TriggerFilter, VetoPolicy};
pub use spectrum::{histogram, Axis, HistogramMode, Spectrum, SpectrumError};
