//! Event-aligned, within-agent, and stratified longitudinal analyses.

pub mod event_align;
pub mod fixed_effects;
pub mod strata;

pub use event_align::{
    event_aligned_deltas, fixed_n_comparison, EventAlignment, EventWindow, ExclusionReason,
    RegulatableThread,
};
pub use fixed_effects::{
    build_fe_panel, fit_within_fe, resolve_fe_events, FeEvent, FeFit, FeOutcome, FePanelRow,
};
pub use strata::{stratify_and_compare, EarlyFlag, StrataTable, StratumCell, ThreadStratum};
