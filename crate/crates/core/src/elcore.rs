//! Expected loss, exposure at risk and risk density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{AccountState, SegmentDimension, Snapshot, Status};

/// 12-month expected loss of one account: `pd * ead * lgd`. For a
/// non-performing account this equals `ead * lgd` since pd is 1.
pub fn account_el(a: &AccountState) -> f64 {
    a.pd * a.ead * a.lgd
}

/// Expected loss with the lifetime supplement applied where present
/// (performing accounts only; non-performing EL is already lifetime).
pub fn account_el_lifetime(a: &AccountState) -> f64 {
    match a.status {
        Status::Performing => a.lifetime_el.unwrap_or_else(|| account_el(a)),
        Status::NonPerforming => account_el(a),
    }
}

/// Aggregated loss measures over a set of accounts.
///
/// `ear` is the exposure at risk (`ead * lgd` summed), `er` the expected
/// discounted recoveries `ead_total − el` (the net receivable on
/// non-performing books).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ElAggregate {
    pub el: f64,
    pub ead_total: f64,
    pub ear: f64,
    pub er: f64,
    pub count: u64,
}

/// Sums EL, EAD, EAR over the accounts matching `filter`, in ascending id
/// order. `er` is derived as `ead_total − el` so the aggregate identity is
/// exact.
pub fn aggregate_el(snapshot: &Snapshot, filter: impl Fn(&AccountState) -> bool) -> ElAggregate {
    let mut agg = ElAggregate::default();
    for account in snapshot.accounts().filter(|a| filter(a)) {
        agg.el += account_el(account);
        agg.ead_total += account.ead;
        agg.ear += account.ead * account.lgd;
        agg.count += 1;
    }
    agg.er = agg.ead_total - agg.el;
    agg
}

/// EL per unit of exposure.
pub fn risk_density(agg: &ElAggregate) -> Result<f64> {
    if agg.ead_total == 0.0 {
        return Err(Error::ZeroExposure {
            what: "risk density",
        });
    }
    Ok(agg.el / agg.ead_total)
}

/// Ready-made segment predicates.
pub mod filters {
    use super::*;

    pub fn all(_: &AccountState) -> bool {
        true
    }

    pub fn performing(a: &AccountState) -> bool {
        a.status == Status::Performing
    }

    pub fn non_performing(a: &AccountState) -> bool {
        a.status == Status::NonPerforming
    }

    /// Matches accounts whose tag for `dim` equals `value`.
    pub fn segment(dim: SegmentDimension, value: String) -> impl Fn(&AccountState) -> bool {
        move |a: &AccountState| a.segments.get(dim) == Some(value.as_str())
    }
}
