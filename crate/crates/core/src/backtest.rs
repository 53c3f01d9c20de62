//! Decomposition of the period's impact of risk.
//!
//! Every period's capital consumption splits exactly into three parts:
//!
//! ```text
//! ior = el_pl_eop + pl_backtest + npl_backtest (+ model change terms)
//! ```
//!
//! * `el_pl_eop` — the EL premium on the performing book at period end;
//! * `pl_backtest = EL_newNPL_EOP + wo_newNPL − EL_PL_BOP` — realized new
//!   defaults against the performing-book prediction (positive = shortage);
//! * `npl_backtest = EL_oldNPL_EOP + wo_oldNPL − EL_NPL_BOP` — recovery
//!   performance against the best-estimate LGD slope.
//!
//! When a model was re-estimated during the period, `restated_bop_el`
//! replaces the account's BOP EL in both backtests; the replaced amounts
//! surface as explicit model-change terms so the identity stays exact.
//!
//! On top of the split the module derives the default-frequency view, the
//! conservativity factor implied by the PL backtest, the receivable flow on
//! the old non-performing book, the structural discounting bias, and the
//! PD/EAD/LGD attribution of the PL backtest.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::elcore::account_el;
use crate::error::{Error, Result};
use crate::ior::{impact_of_risk_with_tolerance, CapitalFlows};
use crate::ledger::{
    classify_transitions, AccountEvents, AccountId, AccountState, PeriodLedger, SegmentDimension,
    Status, TransitionClass, TransitionSet,
};
use crate::numeric::{identity_holds, DEFAULT_TOLERANCE};

/// Tag value used for accounts that do not carry a given dimension.
pub const UNTAGGED: &str = "(none)";

/// One backtest leg: its value plus the per-account contributions that sum
/// to it (in ascending account-id order).
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestLeg {
    pub value: f64,
    pub contributions: Vec<(AccountId, f64)>,
}

/// Per-account line of the decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountContribution {
    pub account_id: AccountId,
    pub class: TransitionClass,
    pub el_bop: Option<f64>,
    pub el_eop: Option<f64>,
    pub write_off: f64,
    pub recovery: f64,
    pub pl_contribution: f64,
    pub npl_contribution: f64,
}

/// Default-frequency and risk-density view of the PL backtest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencyView {
    /// Realized default frequency, weighted by exposure at risk.
    pub rdf: f64,
    /// Expected default frequency (EAR-weighted portfolio PD).
    pub edf: f64,
    pub pd_impact: f64,
    /// Risk-density analogues (EAD-weighted).
    pub rd_realized: f64,
    pub rd_expected: f64,
    pub rd_impact: f64,
}

/// PD/EAD/LGD attribution of the PL backtest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSplit {
    pub delta_pd: f64,
    pub delta_ead: f64,
    pub delta_lgd: f64,
}

/// Account counts per transition class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub performing_both: usize,
    pub new_npl: usize,
    pub old_npl: usize,
    pub cured: usize,
    pub closed_performing: usize,
    pub new_business: usize,
}

/// Everything computed for one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub bop_date: NaiveDate,
    pub eop_date: NaiveDate,
    pub counts: ClassCounts,

    /// BOP expected loss as used in the backtests (restated where supplied).
    pub el_pl_bop: f64,
    pub el_npl_bop: f64,
    pub el_pl_eop: f64,
    pub el_new_npl_eop: f64,
    pub el_old_npl_eop: f64,

    pub ead_pl_bop: f64,
    pub ear_pl_bop: f64,
    pub ead_npl_bop: f64,
    pub er_npl_bop: f64,

    pub wo_new_npl: f64,
    pub wo_old_npl: f64,
    pub total_write_off: f64,
    pub total_recovery: f64,

    pub pl_backtest: f64,
    pub npl_backtest: f64,
    /// Restated minus original BOP EL, split by BOP status; both zero when
    /// no restatements were supplied.
    pub model_change_pl: f64,
    pub model_change_npl: f64,

    /// Impact of risk via the snapshot route; equals
    /// `el_pl_eop + pl_backtest + npl_backtest + model change` by identity.
    pub ior_check: f64,

    pub frequencies: FrequencyView,
    pub conservativity_c: Option<f64>,
    pub recoflow: f64,
    pub discount_bias: f64,
    pub deltas: Option<DeltaSplit>,

    pub capital: CapitalFlows,
    pub per_account: Vec<AccountContribution>,
}

/// One segment's slice of the decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDecomposition {
    pub dimension: SegmentDimension,
    pub segment: String,
    pub accounts: usize,
    pub el_pl_bop: f64,
    pub el_npl_bop: f64,
    pub el_pl_eop: f64,
    pub el_new_npl_eop: f64,
    pub el_old_npl_eop: f64,
    pub wo_new_npl: f64,
    pub wo_old_npl: f64,
    pub pl_backtest: f64,
    pub npl_backtest: f64,
    pub model_change_pl: f64,
    pub model_change_npl: f64,
    pub ior: f64,
    pub recoflow: f64,
    pub discount_bias: f64,
    pub conservativity_c: Option<f64>,
    pub frequencies: FrequencyView,
    pub deltas: Option<DeltaSplit>,
}

/// Ranked outlier lists.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    /// Largest new defaults by realized loss (EOP EL plus write-off).
    pub largest_new_defaults: Vec<OutlierEntry>,
    /// Largest positive NPL-backtest contributions (recovery shortage).
    pub npl_adverse: Vec<OutlierEntry>,
    /// Largest negative contributions (cures, better-than-modeled recoveries).
    pub npl_favorable: Vec<OutlierEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierEntry {
    pub account_id: AccountId,
    pub value: f64,
}

// ---------------------------------------------------------------------------
// per-account rows and their aggregation
// ---------------------------------------------------------------------------

struct Row<'a> {
    id: &'a AccountId,
    class: TransitionClass,
    bop: Option<&'a AccountState>,
    eop: Option<&'a AccountState>,
    el_bop_raw: f64,
    el_bop_used: f64,
    el_eop: f64,
    events: AccountEvents,
}

impl Row<'_> {
    fn bop_status(&self) -> Option<Status> {
        self.bop.map(|a| a.status)
    }

    /// BOP exposure at risk `ead * lgd` (zero when absent at BOP).
    fn bop_ear(&self) -> f64 {
        self.bop.map_or(0.0, |a| a.ead * a.lgd)
    }

    fn pl_contribution(&self) -> f64 {
        let mut v = 0.0;
        if self.class == TransitionClass::NewNpl {
            v += self.el_eop + self.events.write_off;
        }
        if self.bop_status() == Some(Status::Performing) {
            v -= self.el_bop_used;
        }
        v
    }

    fn npl_contribution(&self) -> f64 {
        let mut v = 0.0;
        match self.class {
            TransitionClass::OldNpl => v += self.el_eop + self.events.write_off,
            // a cured account's write-off is part of the old-NPL workout
            TransitionClass::Cured => v += self.events.write_off,
            _ => {}
        }
        if self.bop_status() == Some(Status::NonPerforming) {
            v -= self.el_bop_used;
        }
        v
    }
}

fn build_rows<'a>(ledger: &'a PeriodLedger, transitions: &TransitionSet) -> Vec<Row<'a>> {
    let mut ids: Vec<&AccountId> = ledger.bop().ids().collect();
    for id in ledger.eop().ids() {
        if ledger.bop().get(id).is_none() {
            ids.push(id);
        }
    }
    ids.sort_unstable();
    ids.into_iter()
        .map(|id| {
            let bop = ledger.bop().get(id);
            let eop = ledger.eop().get(id);
            let events = ledger.events_for(id);
            let el_bop_raw = bop.map_or(0.0, account_el);
            let el_bop_used = match (bop, events.restated_bop_el) {
                (Some(_), Some(restated)) => restated,
                _ => el_bop_raw,
            };
            Row {
                id,
                class: transitions.class_of(id).expect("classified account"),
                bop,
                eop,
                el_bop_raw,
                el_bop_used,
                el_eop: eop.map_or(0.0, account_el),
                events,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
struct Aggregates {
    counts: ClassCounts,
    el_pl_bop_raw: f64,
    el_pl_bop_used: f64,
    el_npl_bop_raw: f64,
    el_npl_bop_used: f64,
    el_pl_eop: f64,
    el_new_npl_eop: f64,
    el_old_npl_eop: f64,
    ead_pl_bop: f64,
    ear_pl_bop: f64,
    ead_npl_bop: f64,
    ead_old_eop: f64,
    wo_new: f64,
    wo_old: f64,
    wo_total: f64,
    recovery_total: f64,
    // PL backtest attribution sums over new defaults
    delta_bop_ear: f64,
    delta_def_ear: f64,
    delta_eop_term: f64,
    at_default_complete: bool,
    accounts: usize,
}

impl Aggregates {
    fn new() -> Self {
        Aggregates {
            at_default_complete: true,
            ..Default::default()
        }
    }

    fn add(&mut self, row: &Row<'_>) {
        self.accounts += 1;
        match row.class {
            TransitionClass::PerformingBoth => self.counts.performing_both += 1,
            TransitionClass::NewNpl => self.counts.new_npl += 1,
            TransitionClass::OldNpl => self.counts.old_npl += 1,
            TransitionClass::Cured => self.counts.cured += 1,
            TransitionClass::ClosedPerforming => self.counts.closed_performing += 1,
            TransitionClass::NewBusiness => self.counts.new_business += 1,
        }
        if let Some(b) = row.bop {
            match b.status {
                Status::Performing => {
                    self.el_pl_bop_raw += row.el_bop_raw;
                    self.el_pl_bop_used += row.el_bop_used;
                    self.ead_pl_bop += b.ead;
                    self.ear_pl_bop += b.ead * b.lgd;
                }
                Status::NonPerforming => {
                    self.el_npl_bop_raw += row.el_bop_raw;
                    self.el_npl_bop_used += row.el_bop_used;
                    self.ead_npl_bop += b.ead;
                }
            }
        }
        if let Some(e) = row.eop {
            match row.class {
                TransitionClass::NewNpl => self.el_new_npl_eop += row.el_eop,
                TransitionClass::OldNpl => {
                    self.el_old_npl_eop += row.el_eop;
                    self.ead_old_eop += e.ead;
                }
                _ => self.el_pl_eop += row.el_eop,
            }
        }
        match row.class {
            TransitionClass::NewNpl => {
                self.wo_new += row.events.write_off;
                self.delta_bop_ear += row.bop_ear();
                match (row.events.at_default_ead, row.events.at_default_lgd) {
                    (Some(ead), Some(lgd)) => {
                        self.delta_def_ear += ead * lgd;
                        self.delta_eop_term += row.el_eop + row.events.write_off;
                    }
                    _ => self.at_default_complete = false,
                }
            }
            TransitionClass::OldNpl | TransitionClass::Cured => {
                self.wo_old += row.events.write_off;
            }
            _ => {}
        }
        self.wo_total += row.events.write_off;
        self.recovery_total += row.events.recovery;
    }

    fn pl_backtest(&self) -> f64 {
        self.el_new_npl_eop + self.wo_new - self.el_pl_bop_used
    }

    fn npl_backtest(&self) -> f64 {
        self.el_old_npl_eop + self.wo_old - self.el_npl_bop_used
    }

    fn model_change_pl(&self) -> f64 {
        self.el_pl_bop_used - self.el_pl_bop_raw
    }

    fn model_change_npl(&self) -> f64 {
        self.el_npl_bop_used - self.el_npl_bop_raw
    }

    fn er_npl_bop(&self) -> f64 {
        self.ead_npl_bop - self.el_npl_bop_used
    }

    fn er_old_eop(&self) -> f64 {
        self.ead_old_eop - self.el_old_npl_eop
    }

    fn recoflow(&self) -> f64 {
        self.er_old_eop() - self.er_npl_bop()
    }

    fn frequencies(&self) -> FrequencyView {
        let realized = self.el_new_npl_eop + self.wo_new;
        let mut view = FrequencyView::default();
        if self.ear_pl_bop > 0.0 {
            view.rdf = realized / self.ear_pl_bop;
            view.edf = self.el_pl_bop_used / self.ear_pl_bop;
            view.pd_impact = view.rdf - view.edf;
        }
        if self.ead_pl_bop > 0.0 {
            view.rd_realized = realized / self.ead_pl_bop;
            view.rd_expected = self.el_pl_bop_used / self.ead_pl_bop;
            view.rd_impact = view.rd_realized - view.rd_expected;
        }
        view
    }

    fn conservativity(&self) -> Option<f64> {
        (self.el_pl_bop_used > 0.0).then(|| -self.pl_backtest() / self.el_pl_bop_used)
    }

    fn deltas(&self) -> Option<DeltaSplit> {
        self.at_default_complete.then(|| DeltaSplit {
            delta_pd: self.delta_bop_ear - self.el_pl_bop_used,
            delta_ead: self.delta_def_ear - self.delta_bop_ear,
            delta_lgd: self.delta_eop_term - self.delta_def_ear,
        })
    }

    /// Gross magnitude of the quantities entering the period identities.
    fn gross_scale(&self) -> f64 {
        self.el_pl_bop_used.abs()
            + self.el_npl_bop_used.abs()
            + self.el_pl_eop
            + self.el_new_npl_eop
            + self.el_old_npl_eop
            + self.wo_total
            + self.model_change_pl().abs()
            + self.model_change_npl().abs()
    }
}

// ---------------------------------------------------------------------------
// public operations
// ---------------------------------------------------------------------------

/// PL backtest value with per-account contributions.
pub fn pl_backtest(ledger: &PeriodLedger, transitions: &TransitionSet) -> BacktestLeg {
    let rows = build_rows(ledger, transitions);
    let contributions: Vec<(AccountId, f64)> = rows
        .iter()
        .map(|r| (r.id.clone(), r.pl_contribution()))
        .filter(|(_, v)| *v != 0.0)
        .collect();
    let mut agg = Aggregates::new();
    for row in &rows {
        agg.add(row);
    }
    BacktestLeg {
        value: agg.pl_backtest(),
        contributions,
    }
}

/// NPL backtest value with per-account contributions.
pub fn npl_backtest(ledger: &PeriodLedger, transitions: &TransitionSet) -> BacktestLeg {
    let rows = build_rows(ledger, transitions);
    let contributions: Vec<(AccountId, f64)> = rows
        .iter()
        .map(|r| (r.id.clone(), r.npl_contribution()))
        .filter(|(_, v)| *v != 0.0)
        .collect();
    let mut agg = Aggregates::new();
    for row in &rows {
        agg.add(row);
    }
    BacktestLeg {
        value: agg.npl_backtest(),
        contributions,
    }
}

/// Realized vs expected default frequencies and risk densities.
pub fn default_frequency_view(
    ledger: &PeriodLedger,
    transitions: &TransitionSet,
) -> Result<FrequencyView> {
    let mut agg = Aggregates::new();
    for row in build_rows(ledger, transitions) {
        agg.add(&row);
    }
    if agg.ear_pl_bop == 0.0 || agg.ead_pl_bop == 0.0 {
        return Err(Error::ZeroExposure {
            what: "default frequency view",
        });
    }
    Ok(agg.frequencies())
}

/// Conservativity factor implied by the PL backtest:
/// `c = −pl_backtest / el_pl_bop`. Positive values indicate conservative
/// (through-the-cycle) PDs relative to realized point-in-time defaults.
pub fn estimate_conservativity(pl_backtest: f64, el_pl_bop: f64) -> Result<f64> {
    if el_pl_bop <= 0.0 {
        return Err(Error::ZeroExposure {
            what: "conservativity estimate",
        });
    }
    Ok(-pl_backtest / el_pl_bop)
}

/// Change of the expected net receivable on the old non-performing book:
/// `ER_oldNPL_EOP − ER_NPL_BOP`. Negative values mean the receivable stock
/// is declining (healthy collections). Asserts the exposure-movement
/// identity `EAD_oldNPL_EOP + wo_oldNPL = EAD_NPL_BOP + npl_backtest + recoflow`.
pub fn recoflow(ledger: &PeriodLedger, transitions: &TransitionSet) -> Result<f64> {
    recoflow_with_tolerance(ledger, transitions, DEFAULT_TOLERANCE)
}

pub fn recoflow_with_tolerance(
    ledger: &PeriodLedger,
    transitions: &TransitionSet,
    tol: f64,
) -> Result<f64> {
    let mut agg = Aggregates::new();
    for row in build_rows(ledger, transitions) {
        agg.add(&row);
    }
    check_ead_movement(&agg, tol)?;
    Ok(agg.recoflow())
}

fn check_ead_movement(agg: &Aggregates, tol: f64) -> Result<()> {
    let lhs = agg.ead_old_eop + agg.wo_old;
    let rhs = agg.ead_npl_bop + agg.npl_backtest() + agg.recoflow();
    let scale = agg.ead_npl_bop + agg.ead_old_eop + agg.wo_old + agg.el_npl_bop_used.abs();
    if !identity_holds(lhs, rhs, scale, tol) {
        return Err(Error::IdentityBreach {
            identity: "non-performing exposure movement",
            lhs,
            rhs,
            tolerance: tol,
            scale,
        });
    }
    Ok(())
}

/// Structural deviation the discounting requirement imposes on the NPL
/// backtest: `−r · ER_NPL_BOP`, at the ledger's discount rate.
pub fn discount_bias(ledger: &PeriodLedger) -> f64 {
    let transitions = classify_transitions(ledger).expect("validated ledger classifies");
    let mut agg = Aggregates::new();
    for row in build_rows(ledger, &transitions) {
        agg.add(&row);
    }
    -ledger.discount_rate() * agg.er_npl_bop()
}

/// PD/EAD/LGD attribution of the PL backtest. Requires at-default EAD and
/// LGD observations on every new default.
pub fn delta_decomposition(
    ledger: &PeriodLedger,
    transitions: &TransitionSet,
) -> Result<DeltaSplit> {
    let rows = build_rows(ledger, transitions);
    for row in &rows {
        if row.class == TransitionClass::NewNpl
            && (row.events.at_default_ead.is_none() || row.events.at_default_lgd.is_none())
        {
            return Err(Error::MissingAtDefaultData {
                account: row.id.to_string(),
            });
        }
    }
    let mut agg = Aggregates::new();
    for row in &rows {
        agg.add(row);
    }
    Ok(agg.deltas().expect("completeness checked above"))
}

/// Computes the full decomposition and asserts the impact-of-risk identity.
pub fn decompose_ior(ledger: &PeriodLedger) -> Result<DecompositionReport> {
    decompose_ior_with_tolerance(ledger, DEFAULT_TOLERANCE)
}

pub fn decompose_ior_with_tolerance(
    ledger: &PeriodLedger,
    tol: f64,
) -> Result<DecompositionReport> {
    let transitions = classify_transitions(ledger)?;
    let rows = build_rows(ledger, &transitions);
    let mut agg = Aggregates::new();
    for row in &rows {
        agg.add(row);
    }

    let capital = impact_of_risk_with_tolerance(ledger, tol)?;

    let pl = agg.pl_backtest();
    let npl = agg.npl_backtest();
    let decomposed =
        agg.el_pl_eop + pl + npl + agg.model_change_pl() + agg.model_change_npl();
    let scale = agg.gross_scale();
    if !identity_holds(decomposed, capital.ior, scale, tol) {
        return Err(Error::IdentityBreach {
            identity: "impact-of-risk decomposition",
            lhs: decomposed,
            rhs: capital.ior,
            tolerance: tol,
            scale,
        });
    }
    check_ead_movement(&agg, tol)?;

    let per_account = rows
        .iter()
        .map(|row| AccountContribution {
            account_id: row.id.clone(),
            class: row.class,
            el_bop: row.bop.map(|_| row.el_bop_used),
            el_eop: row.eop.map(|_| row.el_eop),
            write_off: row.events.write_off,
            recovery: row.events.recovery,
            pl_contribution: row.pl_contribution(),
            npl_contribution: row.npl_contribution(),
        })
        .collect();

    Ok(DecompositionReport {
        bop_date: ledger.bop().as_of(),
        eop_date: ledger.eop().as_of(),
        counts: agg.counts,
        el_pl_bop: agg.el_pl_bop_used,
        el_npl_bop: agg.el_npl_bop_used,
        el_pl_eop: agg.el_pl_eop,
        el_new_npl_eop: agg.el_new_npl_eop,
        el_old_npl_eop: agg.el_old_npl_eop,
        ead_pl_bop: agg.ead_pl_bop,
        ear_pl_bop: agg.ear_pl_bop,
        ead_npl_bop: agg.ead_npl_bop,
        er_npl_bop: agg.er_npl_bop(),
        wo_new_npl: agg.wo_new,
        wo_old_npl: agg.wo_old,
        total_write_off: agg.wo_total,
        total_recovery: agg.recovery_total,
        pl_backtest: pl,
        npl_backtest: npl,
        model_change_pl: agg.model_change_pl(),
        model_change_npl: agg.model_change_npl(),
        ior_check: capital.ior,
        frequencies: agg.frequencies(),
        conservativity_c: agg.conservativity(),
        recoflow: agg.recoflow(),
        discount_bias: -ledger.discount_rate() * agg.er_npl_bop(),
        deltas: agg.deltas(),
        capital,
        per_account,
    })
}

/// Top-`n` outliers: largest new defaults by realized loss, and the most
/// adverse / most favorable NPL-backtest contributions. Ties break by
/// ascending account id.
pub fn rank_outliers(report: &DecompositionReport, n: usize) -> OutlierReport {
    let mut out = OutlierReport::default();
    if n == 0 {
        return out;
    }

    let mut new_defaults: Vec<OutlierEntry> = report
        .per_account
        .iter()
        .filter(|c| c.class == TransitionClass::NewNpl)
        .map(|c| OutlierEntry {
            account_id: c.account_id.clone(),
            value: c.el_eop.unwrap_or(0.0) + c.write_off,
        })
        .collect();
    new_defaults.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then_with(|| a.account_id.cmp(&b.account_id))
    });
    new_defaults.truncate(n);
    out.largest_new_defaults = new_defaults;

    let npl_rows = || {
        report.per_account.iter().filter(|c| {
            matches!(c.class, TransitionClass::OldNpl | TransitionClass::Cured)
                && c.npl_contribution != 0.0
        })
    };
    let mut adverse: Vec<OutlierEntry> = npl_rows()
        .filter(|c| c.npl_contribution > 0.0)
        .map(|c| OutlierEntry {
            account_id: c.account_id.clone(),
            value: c.npl_contribution,
        })
        .collect();
    adverse.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then_with(|| a.account_id.cmp(&b.account_id))
    });
    adverse.truncate(n);
    out.npl_adverse = adverse;

    let mut favorable: Vec<OutlierEntry> = npl_rows()
        .filter(|c| c.npl_contribution < 0.0)
        .map(|c| OutlierEntry {
            account_id: c.account_id.clone(),
            value: c.npl_contribution,
        })
        .collect();
    favorable.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then_with(|| a.account_id.cmp(&b.account_id))
    });
    favorable.truncate(n);
    out.npl_favorable = favorable;

    out
}

/// Splits the decomposition by the given dimensions. Segment membership is
/// resolved from the BOP record when the account exists at BOP, otherwise
/// from the EOP record; accounts without the tag land in [`UNTAGGED`]. The
/// per-segment additive components sum to the portfolio values.
pub fn segment_report(
    ledger: &PeriodLedger,
    transitions: &TransitionSet,
    dimensions: &[SegmentDimension],
) -> Result<Vec<SegmentDecomposition>> {
    let rows = build_rows(ledger, transitions);
    let mut out = Vec::new();
    for &dim in dimensions {
        let mut buckets: BTreeMap<String, Aggregates> = BTreeMap::new();
        for row in &rows {
            let state = row.bop.or(row.eop).expect("account present at one end");
            let key = state.segments.get(dim).unwrap_or(UNTAGGED).to_owned();
            buckets.entry(key).or_insert_with(Aggregates::new).add(row);
        }
        for (segment, agg) in buckets {
            let ior = (agg.el_pl_eop + agg.el_new_npl_eop + agg.el_old_npl_eop)
                - (agg.el_pl_bop_raw + agg.el_npl_bop_raw)
                + agg.wo_total;
            out.push(SegmentDecomposition {
                dimension: dim,
                segment,
                accounts: agg.accounts,
                el_pl_bop: agg.el_pl_bop_used,
                el_npl_bop: agg.el_npl_bop_used,
                el_pl_eop: agg.el_pl_eop,
                el_new_npl_eop: agg.el_new_npl_eop,
                el_old_npl_eop: agg.el_old_npl_eop,
                wo_new_npl: agg.wo_new,
                wo_old_npl: agg.wo_old,
                pl_backtest: agg.pl_backtest(),
                npl_backtest: agg.npl_backtest(),
                model_change_pl: agg.model_change_pl(),
                model_change_npl: agg.model_change_npl(),
                ior,
                recoflow: agg.recoflow(),
                discount_bias: -ledger.discount_rate() * agg.er_npl_bop(),
                conservativity_c: agg.conservativity(),
                frequencies: agg.frequencies(),
                deltas: agg.deltas(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{PeriodEvents, ProvisionBalances, SegmentTags, Snapshot};

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn ledger_from(
        bop: Vec<AccountState>,
        eop: Vec<AccountState>,
        events: PeriodEvents,
        provisions: Option<ProvisionBalances>,
        rate: f64,
    ) -> PeriodLedger {
        let bop = Snapshot::new(date(2020, 12, 31), bop).unwrap();
        let eop = Snapshot::new(date(2021, 12, 31), eop).unwrap();
        PeriodLedger::new(bop, eop, events, provisions, rate, 0).unwrap()
    }

    #[test]
    fn empty_ledger_decomposes_to_zeros() {
        let bop = Snapshot::empty(date(2020, 12, 31));
        let eop = Snapshot::empty(date(2021, 12, 31));
        let ledger = PeriodLedger::new(bop, eop, PeriodEvents::new(), None, 0.0, 0).unwrap();
        let report = decompose_ior(&ledger).unwrap();
        assert_eq!(report.ior_check, 0.0);
        assert_eq!(report.pl_backtest, 0.0);
        assert_eq!(report.npl_backtest, 0.0);
        assert_eq!(report.el_pl_eop, 0.0);
        assert_eq!(report.recoflow, 0.0);
        assert_eq!(report.frequencies, FrequencyView::default());
        assert!(report.conservativity_c.is_none());
        assert_eq!(
            report.deltas,
            Some(DeltaSplit {
                delta_pd: 0.0,
                delta_ead: 0.0,
                delta_lgd: 0.0
            })
        );
    }

    #[test]
    fn aggressive_pd_shows_as_pl_shortage() {
        // 10,000 unit accounts predicted at 1%, 200 defaults realized at 50% LGD
        let bop: Vec<_> = (0..10_000)
            .map(|i| AccountState::performing(format!("A{i:05}"), 0.01, 1.0, 0.5))
            .collect();
        let eop: Vec<_> = (0..200)
            .map(|i| {
                AccountState::non_performing(format!("A{i:05}"), date(2021, 6, 30), 1.0, 0.5)
            })
            .collect();
        let ledger = ledger_from(bop, eop, PeriodEvents::new(), None, 0.0);
        let report = decompose_ior(&ledger).unwrap();
        assert!((report.pl_backtest - 50.0).abs() < 1e-9);
        assert!((report.npl_backtest - 0.0).abs() < 1e-12);
        assert!((report.el_pl_eop - 0.0).abs() < 1e-12);
        assert!((report.ior_check - 50.0).abs() < 1e-9);
        // frequency view: rdf 2%, edf 1% on EAR of 5,000
        assert!((report.frequencies.rdf - 0.02).abs() < 1e-12);
        assert!((report.frequencies.edf - 0.01).abs() < 1e-12);
        assert!((report.frequencies.pd_impact - 0.01).abs() < 1e-12);
        // implied conservativity is -1 (aggressive by a factor of two)
        assert!((report.conservativity_c.unwrap() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn cured_account_contributes_negatively() {
        let bop = vec![AccountState::non_performing(
            "A1",
            date(2019, 1, 1),
            100.0,
            0.4,
        )];
        let mut cured = AccountState::performing("A1", 0.05, 100.0, 0.4);
        cured.default_date = Some(date(2019, 1, 1));
        let ledger = ledger_from(bop, vec![cured], PeriodEvents::new(), None, 0.0);
        let transitions = classify_transitions(&ledger).unwrap();
        let leg = npl_backtest(&ledger, &transitions);
        assert_eq!(leg.value, -40.0);
        assert_eq!(leg.contributions, vec![(AccountId::from("A1"), -40.0)]);
        // the cured account re-enters the performing book at EOP
        let report = decompose_ior(&ledger).unwrap();
        assert_eq!(report.el_pl_eop, 2.0);
    }

    #[test]
    fn recovery_shortage_shows_in_npl_backtest() {
        // old NPL written off above its best-estimate EL
        let bop = vec![AccountState::non_performing(
            "A1",
            date(2018, 5, 5),
            100.0,
            0.5,
        )];
        let mut events = PeriodEvents::new();
        events.insert(
            AccountId::from("A1"),
            AccountEvents {
                write_off: 100.0,
                ..Default::default()
            },
        );
        let ledger = ledger_from(bop, vec![], events, None, 0.0);
        let transitions = classify_transitions(&ledger).unwrap();
        let leg = npl_backtest(&ledger, &transitions);
        assert_eq!(leg.value, 50.0);
    }

    #[test]
    fn discount_bias_matches_dcf_construction() {
        // exposure 100, correctly predicted recoveries 50 and 30 at 10%
        let r: f64 = 0.10;
        let el_bop = 100.0 - 50.0 / (1.0 + r) - 30.0 / (1.0 + r).powi(2);
        let lgd = el_bop / 100.0;
        let bop = vec![AccountState::non_performing(
            "A1",
            date(2019, 1, 1),
            100.0,
            lgd,
        )];
        let ledger = ledger_from(bop, vec![], PeriodEvents::new(), None, r);
        let bias = discount_bias(&ledger);
        assert!((bias - (-7.024_793_388_429_752)).abs() < 1e-9);

        let no_rate = ledger_from(
            vec![AccountState::non_performing("A1", date(2019, 1, 1), 100.0, lgd)],
            vec![],
            PeriodEvents::new(),
            None,
            0.0,
        );
        assert_eq!(discount_bias(&no_rate), 0.0);
    }

    #[test]
    fn single_default_delta_attribution() {
        // one performing account defaulting with unchanged exposure and LGD
        let bop = vec![AccountState::performing("A1", 0.02, 100.0, 0.5)];
        let eop = vec![AccountState::non_performing(
            "A1",
            date(2021, 6, 30),
            100.0,
            0.5,
        )];
        let mut events = PeriodEvents::new();
        events.insert(
            AccountId::from("A1"),
            AccountEvents {
                at_default_ead: Some(100.0),
                at_default_lgd: Some(0.5),
                ..Default::default()
            },
        );
        let ledger = ledger_from(bop, eop, events, None, 0.0);
        let transitions = classify_transitions(&ledger).unwrap();
        let deltas = delta_decomposition(&ledger, &transitions).unwrap();
        assert!((deltas.delta_pd - 49.0).abs() < 1e-12);
        assert_eq!(deltas.delta_ead, 0.0);
        assert_eq!(deltas.delta_lgd, 0.0);
        let leg = pl_backtest(&ledger, &transitions);
        assert!((deltas.delta_pd + deltas.delta_ead + deltas.delta_lgd - leg.value).abs() < 1e-12);
    }

    #[test]
    fn missing_at_default_data_is_reported() {
        let bop = vec![AccountState::performing("A1", 0.02, 100.0, 0.5)];
        let eop = vec![AccountState::non_performing(
            "A1",
            date(2021, 6, 30),
            100.0,
            0.5,
        )];
        let ledger = ledger_from(bop, eop, PeriodEvents::new(), None, 0.0);
        let transitions = classify_transitions(&ledger).unwrap();
        let err = delta_decomposition(&ledger, &transitions).unwrap_err();
        assert!(matches!(err, Error::MissingAtDefaultData { .. }));
        // the full report simply marks the attribution unavailable
        let report = decompose_ior(&ledger).unwrap();
        assert!(report.deltas.is_none());
    }

    #[test]
    fn collateral_repossession_before_default_stays_in_delta_ead() {
        // exposure drops from 100 to 60 via repossession; the performing-model
        // LGD at default reflects the lost collateral coverage
        let bop = vec![AccountState::performing("A1", 0.02, 100.0, 0.5)];
        let eop = vec![AccountState::non_performing(
            "A1",
            date(2021, 6, 30),
            60.0,
            0.75,
        )];
        let mut events = PeriodEvents::new();
        events.insert(
            AccountId::from("A1"),
            AccountEvents {
                at_default_ead: Some(60.0),
                at_default_lgd: Some(0.75),
                ..Default::default()
            },
        );
        let ledger = ledger_from(bop, eop, events, None, 0.0);
        let transitions = classify_transitions(&ledger).unwrap();
        let deltas = delta_decomposition(&ledger, &transitions).unwrap();
        // 60 * 0.75 - 100 * 0.5 = -5: mild relief, no spurious conservatism
        assert!((deltas.delta_ead - (-5.0)).abs() < 1e-12);
        assert_eq!(deltas.delta_lgd, 0.0);
    }

    #[test]
    fn restatement_moves_into_model_change_terms() {
        let bop = vec![
            AccountState::performing("A1", 0.02, 100.0, 0.5),
            AccountState::performing("A2", 0.02, 100.0, 0.5),
        ];
        let eop = bop.clone();
        let mut events = PeriodEvents::new();
        // new PD model simulated per BOP halves A1's EL
        events.insert(
            AccountId::from("A1"),
            AccountEvents {
                restated_bop_el: Some(0.5),
                ..Default::default()
            },
        );
        let ledger = ledger_from(bop, eop, events, None, 0.0);
        let report = decompose_ior(&ledger).unwrap();
        assert_eq!(report.model_change_pl, -0.5);
        assert_eq!(report.model_change_npl, 0.0);
        // identity including the model-change term was asserted internally
        assert_eq!(report.ior_check, 0.0);
    }

    #[test]
    fn outliers_rank_and_tie_break() {
        let bop = vec![
            AccountState::performing("A1", 0.02, 1_000.0, 0.5),
            AccountState::performing("A2", 0.02, 1.0, 0.5),
            AccountState::performing("A3", 0.02, 1.0, 0.5),
        ];
        let eop = vec![
            AccountState::non_performing("A1", date(2021, 3, 1), 1_000.0, 0.5),
            AccountState::non_performing("A2", date(2021, 3, 1), 1.0, 0.5),
            AccountState::non_performing("A3", date(2021, 3, 1), 1.0, 0.5),
        ];
        let ledger = ledger_from(bop, eop, PeriodEvents::new(), None, 0.0);
        let report = decompose_ior(&ledger).unwrap();

        let empty = rank_outliers(&report, 0);
        assert!(empty.largest_new_defaults.is_empty());

        let top = rank_outliers(&report, 2);
        assert_eq!(top.largest_new_defaults.len(), 2);
        assert_eq!(top.largest_new_defaults[0].account_id, AccountId::from("A1"));
        assert_eq!(top.largest_new_defaults[0].value, 500.0);
        // tie between A2 and A3 breaks by id
        assert_eq!(top.largest_new_defaults[1].account_id, AccountId::from("A2"));
    }

    #[test]
    fn segments_add_up_and_single_segment_matches_portfolio() {
        let mut a1 = AccountState::performing("A1", 0.02, 100.0, 0.5);
        a1.segments = SegmentTags {
            rating_grade: Some("B".into()),
            ..Default::default()
        };
        let mut a2 = AccountState::performing("A2", 0.05, 200.0, 0.4);
        a2.segments = SegmentTags {
            rating_grade: Some("C".into()),
            ..Default::default()
        };
        let bop = vec![a1.clone(), a2.clone()];
        let mut a1_eop = AccountState::non_performing("A1", date(2021, 2, 2), 100.0, 0.6);
        a1_eop.segments = a1.segments.clone();
        let eop = vec![a1_eop, a2.clone()];
        let ledger = ledger_from(bop, eop, PeriodEvents::new(), None, 0.0);
        let transitions = classify_transitions(&ledger).unwrap();
        let report = decompose_ior(&ledger).unwrap();

        let segments =
            segment_report(&ledger, &transitions, &[SegmentDimension::RatingGrade]).unwrap();
        assert_eq!(segments.len(), 2);
        let pl_sum: f64 = segments.iter().map(|s| s.pl_backtest).sum();
        assert!((pl_sum - report.pl_backtest).abs() < 1e-12);

        // a dimension nobody carries: one untagged bucket equal to the portfolio
        let whole = segment_report(&ledger, &transitions, &[SegmentDimension::PdModel]).unwrap();
        assert_eq!(whole.len(), 1);
        assert_eq!(whole[0].segment, UNTAGGED);
        assert!((whole[0].pl_backtest - report.pl_backtest).abs() < 1e-12);
        assert!((whole[0].ior - report.ior_check).abs() < 1e-12);
    }
}
