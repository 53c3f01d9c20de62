//! Portfolio snapshots, period ledgers and the transition classification.
//!
//! A [`Snapshot`] is an immutable set of account states at one as-of date.
//! A [`PeriodLedger`] pairs a begin-of-period (BOP) and end-of-period (EOP)
//! snapshot with the cash events booked in between (write-offs, recoveries)
//! and, optionally, provision balances. [`classify_transitions`] partitions
//! the union of both snapshots into the six classes every downstream
//! identity depends on:
//!
//! * `performing_both` — performing at both ends
//! * `new_npl`         — defaulted during the period (or directly written off)
//! * `old_npl`         — in default since before the period
//! * `cured`           — defaulted at BOP, performing again at EOP
//! * `closed_performing` — left the book performing (repaid at par)
//! * `new_business`    — performing and only present at EOP
//!
//! The classes are pairwise disjoint and jointly cover every account id in
//! BOP ∪ EOP, and every write-off is attributable to exactly one of the two
//! NPL buckets. Both facts are what make the decomposition identities exact.

pub mod io;

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque account identifier; ordering fixes every deterministic sum.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccountId(String);

impl AccountId {
    pub fn new(id: impl Into<String>) -> Self {
        AccountId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AccountId {
    fn from(s: &str) -> Self {
        AccountId(s.to_owned())
    }
}

/// Performing / non-performing status at one snapshot date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "P")]
    Performing,
    #[serde(rename = "N")]
    NonPerforming,
}

/// Segment tags carried for reporting splits; all optional.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentTags {
    pub pd_model: Option<String>,
    pub lgd_model: Option<String>,
    pub rating_grade: Option<String>,
    pub exposure_band: Option<String>,
    pub collateral_type: Option<String>,
    pub years_in_default: Option<String>,
}

impl SegmentTags {
    pub fn get(&self, dim: SegmentDimension) -> Option<&str> {
        match dim {
            SegmentDimension::PdModel => self.pd_model.as_deref(),
            SegmentDimension::LgdModel => self.lgd_model.as_deref(),
            SegmentDimension::RatingGrade => self.rating_grade.as_deref(),
            SegmentDimension::ExposureBand => self.exposure_band.as_deref(),
            SegmentDimension::CollateralType => self.collateral_type.as_deref(),
            SegmentDimension::YearsInDefault => self.years_in_default.as_deref(),
        }
    }
}

/// The segmentation dimensions understood by the report splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SegmentDimension {
    PdModel,
    LgdModel,
    RatingGrade,
    ExposureBand,
    CollateralType,
    YearsInDefault,
}

impl SegmentDimension {
    pub const ALL: [SegmentDimension; 6] = [
        SegmentDimension::PdModel,
        SegmentDimension::LgdModel,
        SegmentDimension::RatingGrade,
        SegmentDimension::ExposureBand,
        SegmentDimension::CollateralType,
        SegmentDimension::YearsInDefault,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SegmentDimension::PdModel => "pd_model",
            SegmentDimension::LgdModel => "lgd_model",
            SegmentDimension::RatingGrade => "rating_grade",
            SegmentDimension::ExposureBand => "exposure_band",
            SegmentDimension::CollateralType => "collateral_type",
            SegmentDimension::YearsInDefault => "years_in_default",
        }
    }
}

impl fmt::Display for SegmentDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SegmentDimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SegmentDimension::ALL
            .iter()
            .find(|d| d.name() == s)
            .copied()
            .ok_or_else(|| Error::UnknownDimension {
                dimension: s.to_owned(),
            })
    }
}

/// One account at one as-of date.
///
/// `pd` is the 12-month probability of default for performing accounts and
/// fixed at 1.0 once the account is non-performing; `lgd` is the performing
/// LGD before default and the best-estimate (lifetime) LGD afterwards.
/// `lifetime_el`, when present, carries the lifetime expected-loss
/// supplement for performing accounts and must dominate the 12-month EL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountState {
    pub account_id: AccountId,
    pub status: Status,
    pub default_date: Option<NaiveDate>,
    pub pd: f64,
    pub ead: f64,
    pub lgd: f64,
    pub lifetime_el: Option<f64>,
    #[serde(default)]
    pub segments: SegmentTags,
}

impl AccountState {
    /// Convenience constructor for a performing account without tags.
    pub fn performing(id: impl Into<String>, pd: f64, ead: f64, lgd: f64) -> Self {
        AccountState {
            account_id: AccountId::new(id),
            status: Status::Performing,
            default_date: None,
            pd,
            ead,
            lgd,
            lifetime_el: None,
            segments: SegmentTags::default(),
        }
    }

    /// Convenience constructor for a non-performing account without tags.
    pub fn non_performing(
        id: impl Into<String>,
        default_date: NaiveDate,
        ead: f64,
        lgd: f64,
    ) -> Self {
        AccountState {
            account_id: AccountId::new(id),
            status: Status::NonPerforming,
            default_date: Some(default_date),
            pd: 1.0,
            ead,
            lgd,
            lifetime_el: None,
            segments: SegmentTags::default(),
        }
    }

    fn field_err(&self, field: &'static str, reason: String, row: Option<u64>) -> Error {
        Error::FieldOutOfRange {
            account: self.account_id.to_string(),
            field,
            reason,
            row,
        }
    }

    /// Validates the per-account invariants; `row` is carried into
    /// diagnostics when loading tabular sources.
    pub fn validate(&self, row: Option<u64>) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pd) {
            return Err(self.field_err("pd", format!("{} not in [0,1]", self.pd), row));
        }
        if !(0.0..=1.0).contains(&self.lgd) {
            return Err(self.field_err("lgd", format!("{} not in [0,1]", self.lgd), row));
        }
        if !self.ead.is_finite() || self.ead < 0.0 {
            return Err(self.field_err("ead", format!("{} is negative or not finite", self.ead), row));
        }
        if self.status == Status::NonPerforming {
            if self.default_date.is_none() {
                return Err(Error::MissingDefaultDate {
                    account: self.account_id.to_string(),
                });
            }
            if self.pd != 1.0 {
                return Err(self.field_err(
                    "pd",
                    format!("{} but non-performing accounts carry pd = 1.0", self.pd),
                    row,
                ));
            }
        }
        if let Some(le) = self.lifetime_el {
            if !le.is_finite() || le < 0.0 {
                return Err(self.field_err("lifetime_el", format!("{le} is negative or not finite"), row));
            }
            let twelve_month = self.pd * self.ead * self.lgd;
            // lifetime EL dominates the 12-month EL; allow float round-trip slack
            if le < twelve_month - 1e-9 * twelve_month.max(1.0) {
                return Err(self.field_err(
                    "lifetime_el",
                    format!("{le} below 12-month EL {twelve_month}"),
                    row,
                ));
            }
        }
        Ok(())
    }
}

/// Immutable collection of account states at one as-of date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    as_of: NaiveDate,
    accounts: BTreeMap<AccountId, AccountState>,
}

impl Snapshot {
    /// Builds a validated snapshot. Rejects duplicate ids and accounts that
    /// violate the field invariants.
    pub fn new(as_of: NaiveDate, accounts: impl IntoIterator<Item = AccountState>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for account in accounts {
            account.validate(None)?;
            let id = account.account_id.clone();
            if map.insert(id.clone(), account).is_some() {
                return Err(Error::DuplicateAccount {
                    account: id.to_string(),
                    as_of,
                });
            }
        }
        Ok(Snapshot { as_of, accounts: map })
    }

    pub fn empty(as_of: NaiveDate) -> Self {
        Snapshot {
            as_of,
            accounts: BTreeMap::new(),
        }
    }

    pub fn as_of(&self) -> NaiveDate {
        self.as_of
    }

    pub fn len(&self) -> usize {
        self.accounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accounts.is_empty()
    }

    pub fn get(&self, id: &AccountId) -> Option<&AccountState> {
        self.accounts.get(id)
    }

    /// Accounts in ascending id order.
    pub fn accounts(&self) -> impl Iterator<Item = &AccountState> {
        self.accounts.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &AccountId> {
        self.accounts.keys()
    }
}

/// Cash and observation events booked for one account during a period.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccountEvents {
    /// Total write-off during the period (direct or against provisions).
    #[serde(default)]
    pub write_off: f64,
    /// Cash recoveries and collateral proceeds during the period.
    #[serde(default)]
    pub recovery: f64,
    /// Exposure observed at the time of default (new defaults only).
    pub at_default_ead: Option<f64>,
    /// Performing-model LGD at the time of default (new defaults only).
    pub at_default_lgd: Option<f64>,
    /// BOP expected loss re-simulated under a changed model; replaces the
    /// account's BOP EL in the backtests when present.
    pub restated_bop_el: Option<f64>,
}

impl AccountEvents {
    fn validate(&self, account: &AccountId) -> Result<()> {
        let check = |field: &'static str, v: f64, lo: f64, hi: f64| -> Result<()> {
            if !v.is_finite() || v < lo || v > hi {
                return Err(Error::FieldOutOfRange {
                    account: account.to_string(),
                    field,
                    reason: format!("{v} not in [{lo},{hi}]"),
                    row: None,
                });
            }
            Ok(())
        };
        check("write_off", self.write_off, 0.0, f64::INFINITY)?;
        check("recovery", self.recovery, 0.0, f64::INFINITY)?;
        if let Some(v) = self.at_default_ead {
            check("at_default_ead", v, 0.0, f64::INFINITY)?;
        }
        if let Some(v) = self.at_default_lgd {
            check("at_default_lgd", v, 0.0, 1.0)?;
        }
        if let Some(v) = self.restated_bop_el {
            check("restated_bop_el", v, 0.0, f64::INFINITY)?;
        }
        Ok(())
    }

    fn has_at_default_data(&self) -> bool {
        self.at_default_ead.is_some() || self.at_default_lgd.is_some()
    }
}

/// Per-account events for one period, keyed by account id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodEvents {
    by_account: BTreeMap<AccountId, AccountEvents>,
}

impl PeriodEvents {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: AccountId, events: AccountEvents) {
        self.by_account.insert(id, events);
    }

    pub fn get(&self, id: &AccountId) -> Option<&AccountEvents> {
        self.by_account.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AccountId, &AccountEvents)> {
        self.by_account.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.by_account.is_empty()
    }

    pub fn total_write_off(&self) -> f64 {
        self.by_account.values().map(|e| e.write_off).sum()
    }

    pub fn total_recovery(&self) -> f64 {
        self.by_account.values().map(|e| e.recovery).sum()
    }
}

impl FromIterator<(AccountId, AccountEvents)> for PeriodEvents {
    fn from_iter<T: IntoIterator<Item = (AccountId, AccountEvents)>>(iter: T) -> Self {
        PeriodEvents {
            by_account: iter.into_iter().collect(),
        }
    }
}

/// Provision balances at both period ends.
///
/// `sf_bop`/`sf_eop` optionally carry the shortfall as reported by the
/// capital system; when absent the shortfall is derived from EL − LLP − IBNR
/// and the accounting route agrees with the snapshot route by construction.
/// Supplied values make the cross-check falsifiable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProvisionBalances {
    pub llp_bop: f64,
    pub llp_eop: f64,
    pub ibnr_bop: f64,
    pub ibnr_eop: f64,
    pub sf_bop: Option<f64>,
    pub sf_eop: Option<f64>,
}

impl ProvisionBalances {
    fn validate(&self) -> Result<()> {
        let fields: [(&'static str, f64); 4] = [
            ("llp_bop", self.llp_bop),
            ("llp_eop", self.llp_eop),
            ("ibnr_bop", self.ibnr_bop),
            ("ibnr_eop", self.ibnr_eop),
        ];
        for (field, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::FieldOutOfRange {
                    account: "(provisions)".into(),
                    field,
                    reason: format!("{v} is negative or not finite"),
                    row: None,
                });
            }
        }
        Ok(())
    }
}

/// A BOP/EOP snapshot pair plus the period's events and optional provisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodLedger {
    bop: Snapshot,
    eop: Snapshot,
    events: PeriodEvents,
    provisions: Option<ProvisionBalances>,
    discount_rate: f64,
    loss_confirmation_months: u8,
}

impl PeriodLedger {
    /// Builds a validated period ledger. Beyond field ranges this checks the
    /// structural rules the decomposition relies on: every event refers to a
    /// known account, default dates are consistent with statuses, at-default
    /// observations sit on new defaults only, and write-offs sit on accounts
    /// for which a default is recorded or forced.
    pub fn new(
        bop: Snapshot,
        eop: Snapshot,
        events: PeriodEvents,
        provisions: Option<ProvisionBalances>,
        discount_rate: f64,
        loss_confirmation_months: u8,
    ) -> Result<Self> {
        if bop.as_of >= eop.as_of {
            return Err(Error::NonMonotoneDates {
                left: bop.as_of,
                right: eop.as_of,
            });
        }
        if !discount_rate.is_finite() || discount_rate < 0.0 {
            return Err(Error::ConfigInvalid {
                reason: format!("discount_rate {discount_rate} must be a finite non-negative fraction"),
            });
        }
        if loss_confirmation_months > 12 {
            return Err(Error::ConfigInvalid {
                reason: format!("loss_confirmation_months {loss_confirmation_months} must be in [0,12]"),
            });
        }
        if let Some(p) = &provisions {
            p.validate()?;
        }
        for (id, ev) in events.iter() {
            ev.validate(id)?;
            if bop.get(id).is_none() && eop.get(id).is_none() {
                return Err(Error::InvalidEvent {
                    account: id.to_string(),
                    reason: "events refer to an account absent from both snapshots".into(),
                });
            }
            if ev.restated_bop_el.is_some() && bop.get(id).is_none() {
                return Err(Error::InvalidEvent {
                    account: id.to_string(),
                    reason: "restated_bop_el on an account absent at BOP".into(),
                });
            }
        }
        let ledger = PeriodLedger {
            bop,
            eop,
            events,
            provisions,
            discount_rate,
            loss_confirmation_months,
        };
        // classification doubles as the structural validation pass
        let transitions = classify_impl(&ledger)?;
        ledger.validate_event_placement(&transitions)?;
        Ok(ledger)
    }

    fn validate_event_placement(&self, transitions: &TransitionSet) -> Result<()> {
        for (id, ev) in self.events.iter() {
            let class = transitions.class_of(id).expect("event account classified");
            if ev.has_at_default_data() && class != TransitionClass::NewNpl {
                return Err(Error::InvalidEvent {
                    account: id.to_string(),
                    reason: format!(
                        "at-default observations on a {class} account (only new defaults carry them)"
                    ),
                });
            }
            if ev.write_off > 0.0
                && matches!(
                    class,
                    TransitionClass::PerformingBoth | TransitionClass::NewBusiness
                )
            {
                return Err(Error::InvalidEvent {
                    account: id.to_string(),
                    reason: format!(
                        "write-off {} on a {class} account with no recorded or forced default",
                        ev.write_off
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn bop(&self) -> &Snapshot {
        &self.bop
    }

    pub fn eop(&self) -> &Snapshot {
        &self.eop
    }

    pub fn events(&self) -> &PeriodEvents {
        &self.events
    }

    pub fn provisions(&self) -> Option<&ProvisionBalances> {
        self.provisions.as_ref()
    }

    pub fn discount_rate(&self) -> f64 {
        self.discount_rate
    }

    pub fn loss_confirmation_months(&self) -> u8 {
        self.loss_confirmation_months
    }

    pub fn total_write_off(&self) -> f64 {
        self.events.total_write_off()
    }

    /// Events for one account, defaulting to all-zero.
    pub fn events_for(&self, id: &AccountId) -> AccountEvents {
        self.events.get(id).cloned().unwrap_or_default()
    }
}

/// The six transition classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionClass {
    PerformingBoth,
    NewNpl,
    OldNpl,
    Cured,
    ClosedPerforming,
    NewBusiness,
}

impl TransitionClass {
    pub fn name(&self) -> &'static str {
        match self {
            TransitionClass::PerformingBoth => "performing_both",
            TransitionClass::NewNpl => "new_npl",
            TransitionClass::OldNpl => "old_npl",
            TransitionClass::Cured => "cured",
            TransitionClass::ClosedPerforming => "closed_performing",
            TransitionClass::NewBusiness => "new_business",
        }
    }
}

impl fmt::Display for TransitionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Disjoint partition of BOP ∪ EOP account ids into transition classes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionSet {
    pub performing_both: BTreeSet<AccountId>,
    pub new_npl: BTreeSet<AccountId>,
    pub old_npl: BTreeSet<AccountId>,
    pub cured: BTreeSet<AccountId>,
    pub closed_performing: BTreeSet<AccountId>,
    pub new_business: BTreeSet<AccountId>,
}

impl TransitionSet {
    fn insert(&mut self, class: TransitionClass, id: AccountId) {
        match class {
            TransitionClass::PerformingBoth => self.performing_both.insert(id),
            TransitionClass::NewNpl => self.new_npl.insert(id),
            TransitionClass::OldNpl => self.old_npl.insert(id),
            TransitionClass::Cured => self.cured.insert(id),
            TransitionClass::ClosedPerforming => self.closed_performing.insert(id),
            TransitionClass::NewBusiness => self.new_business.insert(id),
        };
    }

    pub fn class_of(&self, id: &AccountId) -> Option<TransitionClass> {
        if self.performing_both.contains(id) {
            Some(TransitionClass::PerformingBoth)
        } else if self.new_npl.contains(id) {
            Some(TransitionClass::NewNpl)
        } else if self.old_npl.contains(id) {
            Some(TransitionClass::OldNpl)
        } else if self.cured.contains(id) {
            Some(TransitionClass::Cured)
        } else if self.closed_performing.contains(id) {
            Some(TransitionClass::ClosedPerforming)
        } else if self.new_business.contains(id) {
            Some(TransitionClass::NewBusiness)
        } else {
            None
        }
    }

    pub fn classes(&self) -> [(&'static str, &BTreeSet<AccountId>); 6] {
        [
            ("performing_both", &self.performing_both),
            ("new_npl", &self.new_npl),
            ("old_npl", &self.old_npl),
            ("cured", &self.cured),
            ("closed_performing", &self.closed_performing),
            ("new_business", &self.new_business),
        ]
    }

    pub fn total(&self) -> usize {
        self.classes().iter().map(|(_, s)| s.len()).sum()
    }
}

/// Partitions the accounts of a period into the six transition classes.
///
/// The rule keys on EOP status and default date: non-performing at EOP with
/// a default date inside the period is a new NPL, with an earlier date an
/// old NPL. Accounts leaving the book keep their BOP nature (old NPL when
/// defaulted, repaid at par otherwise) unless a write-off without recorded
/// default forces a new-NPL classification.
pub fn classify_transitions(ledger: &PeriodLedger) -> Result<TransitionSet> {
    classify_impl(ledger)
}

fn classify_impl(ledger: &PeriodLedger) -> Result<TransitionSet> {
    let bop = ledger.bop();
    let eop = ledger.eop();
    let mut out = TransitionSet::default();

    let ids: BTreeSet<&AccountId> = bop.ids().chain(eop.ids()).collect();
    for id in ids {
        let b = bop.get(id);
        let e = eop.get(id);
        let class = match (b, e) {
            (Some(b_state), Some(e_state)) => match (b_state.status, e_state.status) {
                (Status::Performing, Status::Performing) => TransitionClass::PerformingBoth,
                (Status::NonPerforming, Status::Performing) => TransitionClass::Cured,
                (_, Status::NonPerforming) => {
                    let date = eop_default_date(e_state, eop.as_of())?;
                    if b_state.status == Status::NonPerforming {
                        check_bop_default_date(b_state, bop.as_of())?;
                        if date > bop.as_of() {
                            return Err(Error::InconsistentDates {
                                account: id.to_string(),
                                detail: format!(
                                    "EOP default date {date} inside the period but the account \
                                     was already non-performing at BOP {}",
                                    bop.as_of()
                                ),
                            });
                        }
                        TransitionClass::OldNpl
                    } else if date > bop.as_of() {
                        TransitionClass::NewNpl
                    } else {
                        TransitionClass::OldNpl
                    }
                }
            },
            (Some(b_state), None) => match b_state.status {
                Status::NonPerforming => {
                    check_bop_default_date(b_state, bop.as_of())?;
                    TransitionClass::OldNpl
                }
                Status::Performing => {
                    // a direct write-off without a recorded default is still
                    // a credit event and must land in the new-NPL bucket
                    if ledger.events_for(id).write_off > 0.0 {
                        TransitionClass::NewNpl
                    } else {
                        TransitionClass::ClosedPerforming
                    }
                }
            },
            (None, Some(e_state)) => match e_state.status {
                Status::Performing => TransitionClass::NewBusiness,
                Status::NonPerforming => {
                    let date = eop_default_date(e_state, eop.as_of())?;
                    if date > bop.as_of() {
                        TransitionClass::NewNpl
                    } else {
                        TransitionClass::OldNpl
                    }
                }
            },
            (None, None) => unreachable!("id drawn from the union of both snapshots"),
        };
        out.insert(class, id.clone());
    }
    Ok(out)
}

fn eop_default_date(state: &AccountState, eop_date: NaiveDate) -> Result<NaiveDate> {
    let date = state.default_date.ok_or_else(|| Error::MissingDefaultDate {
        account: state.account_id.to_string(),
    })?;
    if date > eop_date {
        return Err(Error::InconsistentDates {
            account: state.account_id.to_string(),
            detail: format!("default date {date} after EOP {eop_date}"),
        });
    }
    Ok(date)
}

fn check_bop_default_date(state: &AccountState, bop_date: NaiveDate) -> Result<()> {
    let date = state.default_date.ok_or_else(|| Error::MissingDefaultDate {
        account: state.account_id.to_string(),
    })?;
    if date > bop_date {
        return Err(Error::InconsistentDates {
            account: state.account_id.to_string(),
            detail: format!("non-performing at BOP {bop_date} with default date {date} after it"),
        });
    }
    Ok(())
}

/// Events and provisions attached to one interval when chaining snapshots.
#[derive(Debug, Clone, Default)]
pub struct PeriodSpec {
    pub events: PeriodEvents,
    pub provisions: Option<ProvisionBalances>,
}

/// Chains `n` snapshots into `n − 1` period ledgers; the EOP snapshot of
/// ledger `i` is the BOP snapshot of ledger `i + 1`.
pub fn pair_periods(
    snapshots: Vec<Snapshot>,
    periods: Vec<PeriodSpec>,
    discount_rate: f64,
    loss_confirmation_months: u8,
) -> Result<Vec<PeriodLedger>> {
    for pair in snapshots.windows(2) {
        if pair[0].as_of() >= pair[1].as_of() {
            return Err(Error::NonMonotoneDates {
                left: pair[0].as_of(),
                right: pair[1].as_of(),
            });
        }
    }
    let expected = snapshots.len().saturating_sub(1);
    if periods.len() != expected {
        return Err(Error::ConfigInvalid {
            reason: format!(
                "{} snapshots need {} period specs, got {}",
                snapshots.len(),
                expected,
                periods.len()
            ),
        });
    }
    let mut ledgers = Vec::with_capacity(expected);
    for (pair, spec) in snapshots.windows(2).zip(periods) {
        ledgers.push(PeriodLedger::new(
            pair[0].clone(),
            pair[1].clone(),
            spec.events,
            spec.provisions,
            discount_rate,
            loss_confirmation_months,
        )?);
    }
    Ok(ledgers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn small_ledger(
        bop_accounts: Vec<AccountState>,
        eop_accounts: Vec<AccountState>,
        events: PeriodEvents,
    ) -> PeriodLedger {
        let bop = Snapshot::new(date(2020, 12, 31), bop_accounts).unwrap();
        let eop = Snapshot::new(date(2021, 12, 31), eop_accounts).unwrap();
        PeriodLedger::new(bop, eop, events, None, 0.0, 0).unwrap()
    }

    #[test]
    fn snapshot_rejects_out_of_range_pd() {
        let a = AccountState::performing("A1", 1.2, 100.0, 0.5);
        let err = Snapshot::new(date(2021, 12, 31), vec![a]).unwrap_err();
        assert!(matches!(err, Error::FieldOutOfRange { field: "pd", .. }));
    }

    #[test]
    fn snapshot_rejects_duplicates() {
        let a = AccountState::performing("A1", 0.02, 1.0, 0.5);
        let err = Snapshot::new(date(2021, 12, 31), vec![a.clone(), a]).unwrap_err();
        assert!(matches!(err, Error::DuplicateAccount { .. }));
    }

    #[test]
    fn snapshot_rejects_npl_without_default_date() {
        let mut a = AccountState::performing("A1", 1.0, 100.0, 0.5);
        a.status = Status::NonPerforming;
        let err = Snapshot::new(date(2021, 12, 31), vec![a]).unwrap_err();
        assert!(matches!(err, Error::MissingDefaultDate { .. }));
    }

    #[test]
    fn empty_snapshot_is_fine() {
        let s = Snapshot::new(date(2021, 12, 31), vec![]).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn identical_snapshots_classify_as_performing_both() {
        let accounts: Vec<_> = (0..5)
            .map(|i| AccountState::performing(format!("A{i}"), 0.02, 1.0, 0.5))
            .collect();
        let ledger = small_ledger(accounts.clone(), accounts, PeriodEvents::new());
        let t = classify_transitions(&ledger).unwrap();
        assert_eq!(t.performing_both.len(), 5);
        assert_eq!(t.total(), 5);
    }

    #[test]
    fn in_period_default_is_new_npl() {
        let bop: Vec<_> = (0..200)
            .map(|i| AccountState::performing(format!("A{i:04}"), 0.02, 1.0, 0.5))
            .collect();
        let eop: Vec<_> = (0..200)
            .map(|i| {
                AccountState::non_performing(format!("A{i:04}"), date(2021, 6, 30), 1.0, 0.5)
            })
            .collect();
        let ledger = small_ledger(bop, eop, PeriodEvents::new());
        let t = classify_transitions(&ledger).unwrap();
        assert_eq!(t.new_npl.len(), 200);
        assert_eq!(t.old_npl.len(), 0);
    }

    #[test]
    fn worked_out_npl_leaving_with_write_off_is_old_npl() {
        let bop = vec![AccountState::non_performing(
            "A1",
            date(2019, 3, 1),
            100.0,
            1.0,
        )];
        let mut events = PeriodEvents::new();
        events.insert(
            AccountId::from("A1"),
            AccountEvents {
                write_off: 100.0,
                ..Default::default()
            },
        );
        let ledger = small_ledger(bop, vec![], events);
        let t = classify_transitions(&ledger).unwrap();
        assert!(t.old_npl.contains(&AccountId::from("A1")));
    }

    #[test]
    fn direct_write_off_forces_new_npl() {
        let bop = vec![AccountState::performing("A1", 0.02, 100.0, 0.5)];
        let mut events = PeriodEvents::new();
        events.insert(
            AccountId::from("A1"),
            AccountEvents {
                write_off: 40.0,
                ..Default::default()
            },
        );
        let ledger = small_ledger(bop, vec![], events);
        let t = classify_transitions(&ledger).unwrap();
        assert!(t.new_npl.contains(&AccountId::from("A1")));
    }

    #[test]
    fn cure_drops_out_of_npl() {
        let bop = vec![AccountState::non_performing(
            "A1",
            date(2019, 3, 1),
            100.0,
            0.4,
        )];
        let mut cured = AccountState::performing("A1", 0.05, 100.0, 0.4);
        cured.default_date = Some(date(2019, 3, 1));
        let ledger = small_ledger(bop, vec![cured], PeriodEvents::new());
        let t = classify_transitions(&ledger).unwrap();
        assert!(t.cured.contains(&AccountId::from("A1")));
    }

    #[test]
    fn default_date_after_eop_is_rejected() {
        let bop = vec![AccountState::performing("A1", 0.02, 100.0, 0.5)];
        let eop = vec![AccountState::non_performing(
            "A1",
            date(2022, 3, 1),
            100.0,
            0.5,
        )];
        let b = Snapshot::new(date(2020, 12, 31), bop).unwrap();
        let e = Snapshot::new(date(2021, 12, 31), eop).unwrap();
        let err = PeriodLedger::new(b, e, PeriodEvents::new(), None, 0.0, 0).unwrap_err();
        assert!(matches!(err, Error::InconsistentDates { .. }));
    }

    #[test]
    fn write_off_on_performing_both_is_rejected() {
        let accounts = vec![AccountState::performing("A1", 0.02, 100.0, 0.5)];
        let b = Snapshot::new(date(2020, 12, 31), accounts.clone()).unwrap();
        let e = Snapshot::new(date(2021, 12, 31), accounts).unwrap();
        let mut events = PeriodEvents::new();
        events.insert(
            AccountId::from("A1"),
            AccountEvents {
                write_off: 5.0,
                ..Default::default()
            },
        );
        let err = PeriodLedger::new(b, e, events, None, 0.0, 0).unwrap_err();
        assert!(matches!(err, Error::InvalidEvent { .. }));
    }

    #[test]
    fn events_for_unknown_account_are_rejected() {
        let b = Snapshot::empty(date(2020, 12, 31));
        let e = Snapshot::empty(date(2021, 12, 31));
        let mut events = PeriodEvents::new();
        events.insert(AccountId::from("GHOST"), AccountEvents::default());
        let err = PeriodLedger::new(b, e, events, None, 0.0, 0).unwrap_err();
        assert!(matches!(err, Error::InvalidEvent { .. }));
    }

    #[test]
    fn pair_periods_chains_and_guards() {
        let snaps: Vec<_> = (0..5)
            .map(|i| Snapshot::empty(date(2018 + i, 12, 31)))
            .collect();
        let specs = vec![PeriodSpec::default(); 4];
        let ledgers = pair_periods(snaps.clone(), specs, 0.0, 0).unwrap();
        assert_eq!(ledgers.len(), 4);
        for w in ledgers.windows(2) {
            assert_eq!(w[0].eop().as_of(), w[1].bop().as_of());
        }

        let one = vec![Snapshot::empty(date(2020, 12, 31))];
        assert!(pair_periods(one, vec![], 0.0, 0).unwrap().is_empty());

        let bad = vec![
            Snapshot::empty(date(2021, 12, 31)),
            Snapshot::empty(date(2020, 12, 31)),
        ];
        let err = pair_periods(bad, vec![PeriodSpec::default()], 0.0, 0).unwrap_err();
        assert!(matches!(err, Error::NonMonotoneDates { .. }));
    }

    #[test]
    fn classification_is_deterministic_and_order_insensitive() {
        let mut bop: Vec<_> = (0..20)
            .map(|i| AccountState::performing(format!("A{i:02}"), 0.02, 10.0, 0.5))
            .collect();
        bop.push(AccountState::non_performing(
            "N01",
            date(2019, 5, 5),
            50.0,
            0.6,
        ));
        let eop = vec![AccountState::non_performing(
            "A05",
            date(2021, 7, 7),
            10.0,
            0.55,
        )];

        let forward = small_ledger(bop.clone(), eop.clone(), PeriodEvents::new());
        bop.reverse();
        let reversed = small_ledger(bop, eop, PeriodEvents::new());

        let t1 = classify_transitions(&forward).unwrap();
        let t2 = classify_transitions(&reversed).unwrap();
        let t3 = classify_transitions(&forward).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(t1, t3);
    }
}
