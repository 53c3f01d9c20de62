//! Backtesting engine for parameter-based expected loss on credit
//! portfolios.
//!
//! The engine reconciles `EL = PD · EAD · LGD` with the capital a portfolio
//! actually consumed during an accounting period — the impact of risk,
//! `ΔEL + write-offs` — and decomposes every period into an EL premium, a
//! performing-book backtest of new defaults, a non-performing-book backtest
//! of recovery performance, and PD/EAD/LGD attribution terms. All
//! decompositions are exact identities, checked to tolerance on every run.
//!
//! Modules:
//!
//! * [`ledger`] — account states, snapshots, period ledgers, transition
//!   classification, CSV/JSON ingestion;
//! * [`elcore`] — expected loss, exposure at risk, risk density;
//! * [`ior`] — impact of risk and its accounting constituents
//!   (provisions, IBNR, shortfall);
//! * [`backtest`] — the decomposition, frequency views, conservativity,
//!   receivable flow, discounting bias, attribution, outliers, segments;
//! * [`synth`] — scenario generators used as oracles for the identities;
//! * [`report`] — JSON/CSV report emission.

pub mod backtest;
pub mod elcore;
pub mod error;
pub mod ior;
pub mod ledger;
pub mod numeric;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
pub use ledger::{
    classify_transitions, pair_periods, AccountEvents, AccountId, AccountState, PeriodEvents,
    PeriodLedger, PeriodSpec, ProvisionBalances, SegmentDimension, Snapshot, Status,
    TransitionClass, TransitionSet,
};
pub use numeric::DEFAULT_TOLERANCE;
