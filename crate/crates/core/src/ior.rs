//! Impact of risk: the capital consumed by credit risk during one period.
//!
//! The primary route is snapshot-based: `ior = EL_EOP − EL_BOP + wo`. When
//! provision balances are supplied the accounting route
//! `ΔLLP + wo + ΔIBNR + ΔSF` is computed as well and both must agree; a
//! disagreement flags inconsistent provision inputs. Two variants are
//! carried alongside: `ior_npl` restricts the EL to the non-performing book
//! (neutral with respect to the one-year front-loading of performing EL),
//! and `ior_life_pl` swaps the performing EL for its lifetime supplement
//! where accounts carry one.

use serde::{Deserialize, Serialize};

use crate::elcore::{account_el, account_el_lifetime, aggregate_el, filters};
use crate::error::{Error, Result};
use crate::ledger::{PeriodLedger, ProvisionBalances, Status};
use crate::numeric::{identity_holds, DEFAULT_TOLERANCE};

/// Which period end a provision-based quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProvisionSide {
    Bop,
    Eop,
}

/// Provision expenses for the period: `LLP_EOP − LLP_BOP + total write-off`.
pub fn llp_expenses(p: &ProvisionBalances, total_write_off: f64) -> f64 {
    p.llp_eop - p.llp_bop + total_write_off
}

/// Provision expenses on the performing book: `IBNR_EOP − IBNR_BOP`.
pub fn ibnr_expenses(p: &ProvisionBalances) -> f64 {
    p.ibnr_eop - p.ibnr_bop
}

/// IBNR balance implied by a loss confirmation period of `months`:
/// `el_pl * months / 12`.
pub fn ibnr_from_lcp(el_pl: f64, months: u8) -> f64 {
    debug_assert!(months <= 12, "loss confirmation period capped at 12 months");
    el_pl * f64::from(months) / 12.0
}

/// Shortfall at one period end: `EL − LLP − IBNR`. Negative values are an
/// excess and are returned signed.
pub fn shortfall(el_total: f64, p: &ProvisionBalances, side: ProvisionSide) -> f64 {
    match side {
        ProvisionSide::Bop => el_total - p.llp_bop - p.ibnr_bop,
        ProvisionSide::Eop => el_total - p.llp_eop - p.ibnr_eop,
    }
}

/// The period's capital flows. Accounting fields are `None` when the ledger
/// carries no provisions; zeros would fake agreement of the two routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapitalFlows {
    /// Snapshot route: `EL_EOP − EL_BOP + wo`.
    pub ior: f64,
    /// EL restricted to the non-performing book: `EL_NPL_EOP − EL_NPL_BOP + wo`.
    pub ior_npl: f64,
    /// Lifetime-EL variant; present when any performing account carries a
    /// lifetime supplement at either period end.
    pub ior_life_pl: Option<f64>,
    /// Lifetime-minus-12-month EL on the performing book at BOP / EOP.
    pub el_delta_pl_bop: Option<f64>,
    pub el_delta_pl_eop: Option<f64>,
    /// Accounting route pieces, present when provisions are supplied.
    pub llp_expenses: Option<f64>,
    pub ibnr_expenses: Option<f64>,
    pub sf_bop: Option<f64>,
    pub sf_eop: Option<f64>,
    pub sf_impact: Option<f64>,
    /// `ΔLLP + wo + ΔIBNR + ΔSF`; must agree with `ior`.
    pub ior_accounting: Option<f64>,
    /// Shortfall is negative (an excess) at the respective end.
    pub excess_bop: bool,
    pub excess_eop: bool,
    /// Context totals the routes are built from.
    pub el_bop: f64,
    pub el_eop: f64,
    pub total_write_off: f64,
}

/// Computes the period's capital flows at the default tolerance.
pub fn impact_of_risk(ledger: &PeriodLedger) -> Result<CapitalFlows> {
    impact_of_risk_with_tolerance(ledger, DEFAULT_TOLERANCE)
}

pub fn impact_of_risk_with_tolerance(ledger: &PeriodLedger, tol: f64) -> Result<CapitalFlows> {
    let total_write_off = ledger.total_write_off();

    let bop_all = aggregate_el(ledger.bop(), filters::all);
    let eop_all = aggregate_el(ledger.eop(), filters::all);
    let bop_npl = aggregate_el(ledger.bop(), filters::non_performing);
    let eop_npl = aggregate_el(ledger.eop(), filters::non_performing);

    let ior = eop_all.el - bop_all.el + total_write_off;
    let ior_npl = eop_npl.el - bop_npl.el + total_write_off;

    let has_lifetime = ledger
        .bop()
        .accounts()
        .chain(ledger.eop().accounts())
        .any(|a| a.status == Status::Performing && a.lifetime_el.is_some());
    let (ior_life_pl, el_delta_pl_bop, el_delta_pl_eop) = if has_lifetime {
        let delta = |snapshot: &crate::ledger::Snapshot| {
            snapshot
                .accounts()
                .filter(|a| a.status == Status::Performing)
                .map(|a| account_el_lifetime(a) - account_el(a))
                .sum::<f64>()
        };
        let d_bop = delta(ledger.bop());
        let d_eop = delta(ledger.eop());
        let life = (eop_all.el + d_eop) - (bop_all.el + d_bop) + total_write_off;
        (Some(life), Some(d_bop), Some(d_eop))
    } else {
        (None, None, None)
    };

    let mut flows = CapitalFlows {
        ior,
        ior_npl,
        ior_life_pl,
        el_delta_pl_bop,
        el_delta_pl_eop,
        llp_expenses: None,
        ibnr_expenses: None,
        sf_bop: None,
        sf_eop: None,
        sf_impact: None,
        ior_accounting: None,
        excess_bop: false,
        excess_eop: false,
        el_bop: bop_all.el,
        el_eop: eop_all.el,
        total_write_off,
    };

    if let Some(p) = ledger.provisions() {
        let llp_exp = llp_expenses(p, total_write_off);
        let ibnr_exp = ibnr_expenses(p);
        // supplied shortfall wins over the derived one; only supplied values
        // can make the cross-check fail
        let sf_bop = p.sf_bop.unwrap_or_else(|| shortfall(bop_all.el, p, ProvisionSide::Bop));
        let sf_eop = p.sf_eop.unwrap_or_else(|| shortfall(eop_all.el, p, ProvisionSide::Eop));
        let sf_impact = sf_eop - sf_bop;
        let ior_accounting = llp_exp + ibnr_exp + sf_impact;

        let scale = eop_all.el.abs()
            + bop_all.el.abs()
            + total_write_off
            + p.llp_bop
            + p.llp_eop
            + p.ibnr_bop
            + p.ibnr_eop
            + sf_bop.abs()
            + sf_eop.abs();
        if !identity_holds(ior_accounting, ior, scale, tol) {
            return Err(Error::IdentityBreach {
                identity: "accounting vs snapshot impact of risk",
                lhs: ior_accounting,
                rhs: ior,
                tolerance: tol,
                scale,
            });
        }

        flows.llp_expenses = Some(llp_exp);
        flows.ibnr_expenses = Some(ibnr_exp);
        flows.sf_bop = Some(sf_bop);
        flows.sf_eop = Some(sf_eop);
        flows.sf_impact = Some(sf_impact);
        flows.ior_accounting = Some(ior_accounting);
        flows.excess_bop = sf_bop < 0.0;
        flows.excess_eop = sf_eop < 0.0;
    }

    Ok(flows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{AccountState, PeriodEvents, Snapshot};
    use chrono::NaiveDate;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn llp_expense_cases() {
        let p = ProvisionBalances {
            llp_bop: 100.0,
            llp_eop: 80.0,
            ..Default::default()
        };
        assert_eq!(llp_expenses(&p, 30.0), 10.0);
        assert_eq!(llp_expenses(&ProvisionBalances::default(), 0.0), 0.0);
        let steady = ProvisionBalances {
            llp_bop: 55.0,
            llp_eop: 55.0,
            ..Default::default()
        };
        assert_eq!(llp_expenses(&steady, 0.0), 0.0);
    }

    #[test]
    fn ibnr_expense_cases() {
        let up = ProvisionBalances {
            ibnr_bop: 50.0,
            ibnr_eop: 60.0,
            ..Default::default()
        };
        assert_eq!(ibnr_expenses(&up), 10.0);
        let flat = ProvisionBalances {
            ibnr_bop: 42.0,
            ibnr_eop: 42.0,
            ..Default::default()
        };
        assert_eq!(ibnr_expenses(&flat), 0.0);
        let down = ProvisionBalances {
            ibnr_bop: 25.0,
            ibnr_eop: 0.0,
            ..Default::default()
        };
        assert_eq!(ibnr_expenses(&down), -25.0);
    }

    #[test]
    fn lcp_scaling() {
        assert_eq!(ibnr_from_lcp(100.0, 6), 50.0);
        assert_eq!(ibnr_from_lcp(100.0, 0), 0.0);
        assert_eq!(ibnr_from_lcp(100.0, 12), 100.0);
    }

    #[test]
    fn shortfall_signed() {
        let p = ProvisionBalances {
            llp_eop: 80.0,
            ibnr_eop: 10.0,
            ..Default::default()
        };
        assert_eq!(shortfall(120.0, &p, ProvisionSide::Eop), 30.0);
        assert_eq!(shortfall(90.0, &p, ProvisionSide::Eop), 0.0);
        let excess = ProvisionBalances {
            llp_eop: 80.0,
            ..Default::default()
        };
        assert_eq!(shortfall(50.0, &excess, ProvisionSide::Eop), -30.0);
    }

    fn uniform_bop(n: usize, pd: f64) -> Snapshot {
        let accounts: Vec<_> = (0..n)
            .map(|i| AccountState::performing(format!("A{i:05}"), pd, 1.0, 0.5))
            .collect();
        Snapshot::new(date(2001, 12, 31), accounts).unwrap()
    }

    #[test]
    fn origination_period_incurs_full_el() {
        // empty book growing to 10,000 performing unit accounts
        let bop = Snapshot::empty(date(2000, 12, 31));
        let eop = uniform_bop(10_000, 0.02);
        let ledger = PeriodLedger::new(bop, eop, PeriodEvents::new(), None, 0.0, 0).unwrap();
        let flows = impact_of_risk(&ledger).unwrap();
        assert!((flows.ior - 100.0).abs() < 1e-9);
        assert_eq!(flows.ior_npl, flows.total_write_off);
        assert!(flows.llp_expenses.is_none());
    }

    #[test]
    fn unchanged_book_has_zero_ior() {
        let accounts: Vec<_> = (0..10)
            .map(|i| AccountState::performing(format!("A{i}"), 0.05, 10.0, 0.4))
            .collect();
        let bop = Snapshot::new(date(2020, 12, 31), accounts.clone()).unwrap();
        let eop = Snapshot::new(date(2021, 12, 31), accounts).unwrap();
        let ledger = PeriodLedger::new(bop, eop, PeriodEvents::new(), None, 0.0, 0).unwrap();
        let flows = impact_of_risk(&ledger).unwrap();
        assert_eq!(flows.ior, 0.0);
    }

    #[test]
    fn derived_shortfall_reconciles_and_supplied_breach_fails() {
        let bop = Snapshot::new(
            date(2020, 12, 31),
            vec![AccountState::performing("A1", 0.1, 1000.0, 0.5)],
        )
        .unwrap();
        let eop = Snapshot::new(
            date(2021, 12, 31),
            vec![AccountState::performing("A1", 0.2, 1000.0, 0.5)],
        )
        .unwrap();

        // consistent: supplied shortfall satisfies EL − LLP − IBNR
        let consistent = ProvisionBalances {
            llp_bop: 10.0,
            llp_eop: 12.0,
            ibnr_bop: 25.0,
            ibnr_eop: 50.0,
            sf_bop: Some(50.0 - 10.0 - 25.0),
            sf_eop: Some(100.0 - 12.0 - 50.0),
        };
        let ledger = PeriodLedger::new(
            bop.clone(),
            eop.clone(),
            PeriodEvents::new(),
            Some(consistent),
            0.0,
            6,
        )
        .unwrap();
        let flows = impact_of_risk(&ledger).unwrap();
        assert!((flows.ior_accounting.unwrap() - flows.ior).abs() < 1e-9);

        // perturbed LLP with the shortfall left as reported
        let perturbed = ProvisionBalances {
            llp_eop: 12.0 + 7.0,
            ..consistent
        };
        let ledger = PeriodLedger::new(bop, eop, PeriodEvents::new(), Some(perturbed), 0.0, 6)
            .unwrap();
        let err = impact_of_risk(&ledger).unwrap_err();
        assert!(err.is_identity_breach());
    }

    #[test]
    fn lifetime_el_variant_tracks_the_supplement() {
        let mut grown = AccountState::performing("A1", 0.1, 1000.0, 0.5);
        grown.lifetime_el = Some(80.0); // 12-month EL is 50
        let bop = Snapshot::new(date(2020, 12, 31), vec![grown.clone()]).unwrap();
        let mut eop_state = grown;
        eop_state.lifetime_el = Some(95.0);
        let eop = Snapshot::new(date(2021, 12, 31), vec![eop_state]).unwrap();
        let ledger = PeriodLedger::new(bop, eop, PeriodEvents::new(), None, 0.0, 0).unwrap();
        let flows = impact_of_risk(&ledger).unwrap();
        assert_eq!(flows.ior, 0.0);
        assert_eq!(flows.el_delta_pl_bop, Some(30.0));
        assert_eq!(flows.el_delta_pl_eop, Some(45.0));
        // Lemma-12 shape: the lifetime route differs by the supplement delta
        assert!((flows.ior_life_pl.unwrap() - (flows.ior + 15.0)).abs() < 1e-12);
    }
}
