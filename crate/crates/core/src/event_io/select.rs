use std::borrow::Borrow;

use serde::{Deserialize, Serialize};

use super::record::EventRecord;

/// Predicate on the trigger mask: every bit of `require_all` must be set, and
/// at least one bit of `require_any` when it is nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TriggerFilter {
    pub require_all: u8,
    pub require_any: u8,
}

impl TriggerFilter {
    pub const ANY: Self = Self {
        require_all: 0,
        require_any: 0,
    };
    /// Only records with an SDD self-trigger.
    pub const SDD: Self = Self {
        require_all: super::TRIGGER_SDD,
        require_any: 0,
    };

    pub fn accepts(&self, flags: u8) -> bool {
        flags & self.require_all == self.require_all && (self.require_any == 0 || flags & self.require_any != 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VetoPolicy {
    KeepAll,
    /// Drop records on which both veto layers fired.
    #[default]
    RejectVetoCoincidence,
}

pub fn select_events<I>(events: I, filter: TriggerFilter, policy: VetoPolicy) -> impl Iterator<Item = I::Item>
where
    I: IntoIterator,
    I::Item: Borrow<EventRecord>,
{
    events.into_iter().filter(move |e| {
        let e = e.borrow();
        filter.accepts(e.trigger_flags) && !(policy == VetoPolicy::RejectVetoCoincidence && e.veto_coincidence())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_io::{QDC_CHANNELS, TRIGGER_SDD, TRIGGER_VETO_INNER, TRIGGER_VETO_OUTER};
    use proptest::prelude::*;

    fn with_flags(flags: u8) -> EventRecord {
        EventRecord {
            timestamp_ns: 0,
            trigger_flags: flags,
            sdd_id: 0,
            adc: 0,
            qdc: [0; QDC_CHANNELS],
            sdd_timing_ns: 0,
        }
    }

    #[test]
    fn keep_all_is_identity() {
        let events: Vec<_> = (0u8..8).map(with_flags).collect();
        let out: Vec<_> = select_events(&events, TriggerFilter::ANY, VetoPolicy::KeepAll).cloned().collect();
        assert_eq!(out, events);
    }

    #[test]
    fn all_coincident_records_rejected() {
        let both = TRIGGER_SDD | TRIGGER_VETO_INNER | TRIGGER_VETO_OUTER;
        let events = vec![with_flags(both); 50];
        assert_eq!(
            select_events(&events, TriggerFilter::ANY, VetoPolicy::RejectVetoCoincidence).count(),
            0
        );
    }

    #[test]
    fn sdd_filter() {
        assert!(TriggerFilter::SDD.accepts(TRIGGER_SDD | TRIGGER_VETO_INNER));
        assert!(!TriggerFilter::SDD.accepts(TRIGGER_VETO_INNER));
        let any_veto = TriggerFilter { require_all: 0, require_any: TRIGGER_VETO_INNER | TRIGGER_VETO_OUTER };
        assert!(any_veto.accepts(TRIGGER_VETO_OUTER));
        assert!(!any_veto.accepts(TRIGGER_SDD));
    }

    proptest! {
        #[test]
        fn mixed_stream_count(flags in prop::collection::vec(0u8..8, 0..200)) {
            let events: Vec<_> = flags.iter().map(|&f| with_flags(f)).collect();
            let coincident = events.iter().filter(|e| e.trigger_flags & 6 == 6).count();
            let kept = select_events(&events, TriggerFilter::ANY, VetoPolicy::RejectVetoCoincidence).count();
            prop_assert_eq!(kept, events.len() - coincident);
        }
    }
}
