//! Synthetic portfolio generation.
//!
//! Three generators feed the identity checks:
//!
//! * [`generate_appendix_case`] — the three canonical four-year scenarios on
//!   a 10,000-contract unit portfolio (correct parameters, aggressive PD,
//!   aggressive LGD), with exact integer aggregates;
//! * [`simulate_lifecycle`] — a seeded single-cohort lifecycle from
//!   origination to full liquidation, so cumulative impact of risk must
//!   equal cumulative write-offs;
//! * [`generate_recovery_scenario`] — a non-performing book whose ELs embed
//!   exact discounted-cash-flow values, pinning the structural discounting
//!   deviation of the NPL backtest to `−r · ER_BOP` each period.
//!
//! [`random_period_ledger`] produces arbitrary single-period ledgers (mixed
//! transitions, cures, direct write-offs, consistent provisions) for the
//! randomized property suites.
//!
//! All randomness comes from ChaCha8 seeded with a caller-supplied 64-bit
//! value, so chains are bit-identical across runs and platforms.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elcore::{account_el, aggregate_el, filters};
use crate::error::{Error, Result};
use crate::ior::ibnr_from_lcp;
use crate::ledger::{
    pair_periods, AccountEvents, AccountId, AccountState, PeriodEvents, PeriodLedger, PeriodSpec,
    ProvisionBalances, SegmentTags, Snapshot,
};

/// Parameters of a synthetic lifecycle.
///
/// `recovery_profile[i]` is the fraction of the defaulted exposure recovered
/// in the `i+1`-th year after default; the remainder is written off one year
/// after the last profile entry, so `1 − Σ profile` must equal `lgd_true`.
/// Defaults are drawn in the second period at `pd_true` as an exact count
/// (`round(n · pd_true)`, seeded account selection), which keeps planted
/// deviations recoverable without sampling noise. Model parameters
/// (`pd_model`, `lgd_model`) drive the EL columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_accounts: usize,
    pub unit_exposure: f64,
    pub pd_true: f64,
    pub pd_model: f64,
    pub lgd_true: f64,
    pub lgd_model: f64,
    pub discount_rate: f64,
    pub horizon_years: usize,
    pub recovery_profile: Vec<f64>,
    pub seed: u64,
    /// Lifetime-EL supplement factor on performing accounts (≥ 1).
    #[serde(default)]
    pub lifetime_el_factor: Option<f64>,
    #[serde(default = "default_lcp")]
    pub loss_confirmation_months: u8,
    #[serde(default = "default_true")]
    pub with_provisions: bool,
}

fn default_lcp() -> u8 {
    6
}

fn default_true() -> bool {
    true
}

impl ScenarioConfig {
    /// Periods needed to reach full liquidation: origination, default year,
    /// the recovery years, and the final write-off year.
    pub fn required_horizon(&self) -> usize {
        3 + self.recovery_profile.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::ConfigInvalid { reason });
        if self.n_accounts == 0 {
            return fail("n_accounts must be positive".into());
        }
        if !(self.unit_exposure.is_finite() && self.unit_exposure > 0.0) {
            return fail(format!("unit_exposure {} must be positive", self.unit_exposure));
        }
        for (name, v) in [
            ("pd_true", self.pd_true),
            ("pd_model", self.pd_model),
            ("lgd_true", self.lgd_true),
            ("lgd_model", self.lgd_model),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} {v} not in [0,1]"));
            }
        }
        if !(self.discount_rate.is_finite() && self.discount_rate >= 0.0) {
            return fail(format!("discount_rate {} must be non-negative", self.discount_rate));
        }
        if self.recovery_profile.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return fail("recovery_profile entries must be fractions in [0,1]".into());
        }
        let recovered: f64 = self.recovery_profile.iter().sum();
        if recovered > 1.0 + 1e-12 {
            return fail(format!("recovery_profile sums to {recovered} > 1"));
        }
        if (1.0 - recovered - self.lgd_true).abs() > 1e-9 {
            return fail(format!(
                "recovery_profile totals {recovered}, inconsistent with lgd_true {} \
                 (expected 1 − lgd_true)",
                self.lgd_true
            ));
        }
        if let Some(f) = self.lifetime_el_factor {
            if !(f.is_finite() && f >= 1.0) {
                return fail(format!("lifetime_el_factor {f} must be ≥ 1"));
            }
        }
        if self.loss_confirmation_months > 12 {
            return fail("loss_confirmation_months must be in [0,12]".into());
        }
        if self.horizon_years < self.required_horizon() {
            return fail(format!(
                "horizon_years {} too short to liquidate; the scenario needs {}",
                self.horizon_years,
                self.required_horizon()
            ));
        }
        Ok(())
    }

    /// Parameters of the three canonical appendix scenarios.
    pub fn appendix_case(case: u8) -> Result<ScenarioConfig> {
        let (pd_model, lgd_model) = match case {
            1 => (0.02, 0.5),
            2 => (0.01, 0.5),
            3 => (0.02, 0.25),
            other => {
                return Err(Error::ConfigInvalid {
                    reason: format!("appendix case {other} does not exist; pick 1, 2 or 3"),
                })
            }
        };
        Ok(ScenarioConfig {
            n_accounts: 10_000,
            unit_exposure: 1.0,
            pd_true: 0.02,
            pd_model,
            lgd_true: 0.5,
            lgd_model,
            discount_rate: 0.0,
            horizon_years: 4,
            recovery_profile: vec![0.5],
            seed: 7,
            lifetime_el_factor: None,
            loss_confirmation_months: 0,
            with_provisions: false,
        })
    }
}

// ---------------------------------------------------------------------------
// workout model
// ---------------------------------------------------------------------------

/// Best-estimate workout of one defaulted exposure. The model carries its
/// total recovery prediction forward, netting realized cash as it arrives
/// (clamped to the remaining exposure); the prediction is distributed over
/// the remaining true-profile years and discounted at `rate`.
struct Workout<'a> {
    unit: f64,
    profile: &'a [f64],
    model_total_recovery: f64,
    rate: f64,
}

impl Workout<'_> {
    fn cumulative(&self, age: usize) -> f64 {
        self.profile[..age.min(self.profile.len())].iter().sum()
    }

    fn ead_at(&self, age: usize) -> f64 {
        self.unit * (1.0 - self.cumulative(age))
    }

    /// Cash received in the `age`-th year after default (1-based).
    fn recovery_in(&self, age: usize) -> f64 {
        if age >= 1 && age <= self.profile.len() {
            self.unit * self.profile[age - 1]
        } else {
            0.0
        }
    }

    fn el_at(&self, age: usize) -> f64 {
        let ead = self.ead_at(age);
        let realized = self.unit * self.cumulative(age);
        let predicted = (self.model_total_recovery * self.unit - realized).clamp(0.0, ead);
        if predicted == 0.0 {
            return ead;
        }
        let remaining = &self.profile[age.min(self.profile.len())..];
        let remaining_total: f64 = remaining.iter().sum();
        let discounted = if remaining_total > 0.0 {
            remaining
                .iter()
                .enumerate()
                .map(|(offset, q)| {
                    predicted * (q / remaining_total)
                        / (1.0 + self.rate).powi(offset as i32 + 1)
                })
                .sum()
        } else {
            // prediction outlives the observed profile; assume one year out
            predicted / (1.0 + self.rate)
        };
        ead - discounted
    }

    fn lgd_at(&self, age: usize) -> f64 {
        let ead = self.ead_at(age);
        if ead <= 0.0 {
            1.0
        } else {
            (self.el_at(age) / ead).clamp(0.0, 1.0)
        }
    }
}

// ---------------------------------------------------------------------------
// lifecycle generator
// ---------------------------------------------------------------------------

fn year_end(year: i32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, 12, 31).expect("valid year end")
}

const BASE_YEAR: i32 = 2000;

fn lifecycle_account_id(index: usize) -> AccountId {
    AccountId::new(format!("ACCT-{index:06}"))
}

fn performing_state(cfg: &ScenarioConfig, index: usize) -> AccountState {
    let mut account = AccountState::performing(
        lifecycle_account_id(index).as_str(),
        cfg.pd_model,
        cfg.unit_exposure,
        cfg.lgd_model,
    );
    account.lifetime_el = cfg
        .lifetime_el_factor
        .map(|f| f * account_el(&account));
    account.segments = SegmentTags {
        pd_model: Some("ttc-grid".into()),
        lgd_model: Some("workout-dcf".into()),
        rating_grade: Some("B2".into()),
        exposure_band: Some("unit".into()),
        collateral_type: Some("unsecured".into()),
        years_in_default: None,
    };
    account
}

fn defaulted_state(
    index: usize,
    workout: &Workout<'_>,
    age: usize,
    default_date: NaiveDate,
) -> AccountState {
    let mut account = AccountState::non_performing(
        lifecycle_account_id(index).as_str(),
        default_date,
        workout.ead_at(age),
        workout.lgd_at(age),
    );
    account.segments = SegmentTags {
        pd_model: Some("ttc-grid".into()),
        lgd_model: Some("workout-dcf".into()),
        rating_grade: Some("B2".into()),
        exposure_band: Some("unit".into()),
        collateral_type: Some("unsecured".into()),
        years_in_default: Some(age.to_string()),
    };
    account
}

/// Generates the seeded lifecycle chain: an empty book, one origination
/// cohort, an exact-count default draw in the second period, the workout of
/// the defaulted exposures per the recovery profile, and the final
/// write-off. The closing snapshot is empty, so over the chain the summed
/// impact of risk equals the summed write-offs.
pub fn simulate_lifecycle(cfg: &ScenarioConfig) -> Result<Vec<PeriodLedger>> {
    cfg.validate()?;

    let workout = Workout {
        unit: cfg.unit_exposure,
        profile: &cfg.recovery_profile,
        model_total_recovery: 1.0 - cfg.lgd_model,
        rate: cfg.discount_rate,
    };
    let n = cfg.n_accounts;
    let defaults = {
        let count = ((n as f64) * cfg.pd_true).round() as usize;
        let mut indices: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        indices.shuffle(&mut rng);
        let mut chosen: Vec<usize> = indices.into_iter().take(count.min(n)).collect();
        chosen.sort_unstable();
        chosen
    };
    let default_date = NaiveDate::from_ymd_opt(BASE_YEAR + 2, 6, 30).expect("valid date");
    let workout_years = cfg.recovery_profile.len();
    // defaulted accounts appear in snapshots 2 ..= 2 + workout_years
    let last_npl_snapshot = 2 + workout_years;

    let mut snapshots = Vec::with_capacity(cfg.horizon_years + 1);
    let mut specs = Vec::with_capacity(cfg.horizon_years);
    for t in 0..=cfg.horizon_years {
        let date = year_end(BASE_YEAR + t as i32);
        let snapshot = if t == 0 {
            Snapshot::empty(date)
        } else if t == 1 {
            Snapshot::new(date, (0..n).map(|i| performing_state(cfg, i)))?
        } else if t <= last_npl_snapshot {
            let age = t - 2;
            if workout.ead_at(age) > 0.0 {
                Snapshot::new(
                    date,
                    defaults
                        .iter()
                        .map(|&i| defaulted_state(i, &workout, age, default_date)),
                )?
            } else {
                Snapshot::empty(date)
            }
        } else {
            Snapshot::empty(date)
        };
        snapshots.push(snapshot);
    }

    for period in 1..=cfg.horizon_years {
        let mut events = PeriodEvents::new();
        if period == 2 {
            for &i in &defaults {
                events.insert(
                    lifecycle_account_id(i),
                    AccountEvents {
                        at_default_ead: Some(cfg.unit_exposure),
                        at_default_lgd: Some(cfg.lgd_model),
                        ..Default::default()
                    },
                );
            }
        } else if (3..=2 + workout_years).contains(&period) {
            let age = period - 2;
            let cash = workout.recovery_in(age);
            if cash > 0.0 {
                for &i in &defaults {
                    events.insert(
                        lifecycle_account_id(i),
                        AccountEvents {
                            recovery: cash,
                            ..Default::default()
                        },
                    );
                }
            }
        } else if period == 3 + workout_years {
            let residual = workout.ead_at(workout_years);
            if residual > 0.0 {
                for &i in &defaults {
                    events.insert(
                        lifecycle_account_id(i),
                        AccountEvents {
                            write_off: residual,
                            ..Default::default()
                        },
                    );
                }
            }
        }

        let provisions = cfg.with_provisions.then(|| {
            consistent_provisions(&snapshots[period - 1], &snapshots[period], cfg.loss_confirmation_months)
        });
        specs.push(PeriodSpec { events, provisions });
    }

    pair_periods(snapshots, specs, cfg.discount_rate, cfg.loss_confirmation_months)
}

/// Provision balances booked exactly on the parameter-based EL: LLP covers
/// the non-performing EL, IBNR scales the performing EL by the loss
/// confirmation period, and the shortfall is reported consistently.
pub fn consistent_provisions(bop: &Snapshot, eop: &Snapshot, lcp: u8) -> ProvisionBalances {
    let side = |s: &Snapshot| {
        let pl = aggregate_el(s, filters::performing).el;
        let npl = aggregate_el(s, filters::non_performing).el;
        let llp = npl;
        let ibnr = ibnr_from_lcp(pl, lcp);
        let sf = (pl + npl) - llp - ibnr;
        (llp, ibnr, sf)
    };
    let (llp_bop, ibnr_bop, sf_bop) = side(bop);
    let (llp_eop, ibnr_eop, sf_eop) = side(eop);
    ProvisionBalances {
        llp_bop,
        llp_eop,
        ibnr_bop,
        ibnr_eop,
        sf_bop: Some(sf_bop),
        sf_eop: Some(sf_eop),
    }
}

/// Generates the appendix scenario `case` (1, 2 or 3) as four chained
/// annual ledgers.
pub fn generate_appendix_case(case: u8) -> Result<Vec<PeriodLedger>> {
    simulate_lifecycle(&ScenarioConfig::appendix_case(case)?)
}

// ---------------------------------------------------------------------------
// recovery scenario (discounting bias oracle)
// ---------------------------------------------------------------------------

/// Builds a single-exposure non-performing book whose BOP/EOP ELs embed the
/// exact discounted value of `recoveries` at `rate`, with the residual
/// written off one year after the last recovery. On such a book the NPL
/// backtest must equal `−rate · ER_BOP` every period.
pub fn generate_recovery_scenario(
    ead: f64,
    rate: f64,
    recoveries: &[f64],
) -> Result<Vec<PeriodLedger>> {
    if !(ead.is_finite() && ead > 0.0) {
        return Err(Error::ConfigInvalid {
            reason: format!("ead {ead} must be positive"),
        });
    }
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::ConfigInvalid {
            reason: format!("rate {rate} must be non-negative"),
        });
    }
    if recoveries.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::ConfigInvalid {
            reason: "recoveries must be non-negative".into(),
        });
    }
    let total: f64 = recoveries.iter().sum();
    if total > ead + 1e-9 * ead {
        return Err(Error::ConfigInvalid {
            reason: format!("recoveries {total} exceed the exposure {ead}"),
        });
    }

    let profile: Vec<f64> = recoveries.iter().map(|r| r / ead).collect();
    let workout = Workout {
        unit: ead,
        profile: &profile,
        model_total_recovery: total / ead,
        rate,
    };
    let id = AccountId::new("NPL-000001");
    let default_date = NaiveDate::from_ymd_opt(BASE_YEAR, 6, 30).expect("valid date");
    let years = recoveries.len();

    let mut snapshots = Vec::with_capacity(years + 2);
    for age in 0..=years {
        let date = year_end(BASE_YEAR + age as i32);
        if workout.ead_at(age) > 0.0 {
            let mut account = AccountState::non_performing(
                id.as_str(),
                default_date,
                workout.ead_at(age),
                workout.lgd_at(age),
            );
            account.segments.years_in_default = Some(age.to_string());
            snapshots.push(Snapshot::new(date, [account])?);
        } else {
            snapshots.push(Snapshot::empty(date));
        }
    }
    snapshots.push(Snapshot::empty(year_end(BASE_YEAR + years as i32 + 1)));

    let mut specs = Vec::with_capacity(years + 1);
    for age in 1..=years {
        let mut events = PeriodEvents::new();
        if workout.recovery_in(age) > 0.0 && workout.ead_at(age - 1) > 0.0 {
            events.insert(
                id.clone(),
                AccountEvents {
                    recovery: workout.recovery_in(age),
                    ..Default::default()
                },
            );
        }
        specs.push(PeriodSpec {
            events,
            provisions: None,
        });
    }
    let mut final_events = PeriodEvents::new();
    let residual = workout.ead_at(years);
    if residual > 0.0 {
        final_events.insert(
            id,
            AccountEvents {
                write_off: residual,
                ..Default::default()
            },
        );
    }
    specs.push(PeriodSpec {
        events: final_events,
        provisions: None,
    });

    pair_periods(snapshots, specs, rate, 0)
}

// ---------------------------------------------------------------------------
// randomized single-period ledgers
// ---------------------------------------------------------------------------

const RATING_GRADES: [&str; 5] = ["A1", "B1", "B2", "C1", "D1"];
const PD_MODELS: [&str; 3] = ["retail-v3", "corp-v2", "expert"];
const LGD_MODELS: [&str; 3] = ["secured", "unsecured", "leasing"];

fn random_tags(rng: &mut ChaCha8Rng) -> SegmentTags {
    SegmentTags {
        pd_model: Some(PD_MODELS[rng.gen_range(0..PD_MODELS.len())].into()),
        lgd_model: Some(LGD_MODELS[rng.gen_range(0..LGD_MODELS.len())].into()),
        rating_grade: Some(RATING_GRADES[rng.gen_range(0..RATING_GRADES.len())].into()),
        exposure_band: Some(if rng.gen_bool(0.5) { "small" } else { "large" }.into()),
        collateral_type: Some(if rng.gen_bool(0.3) { "mortgage" } else { "unsecured" }.into()),
        years_in_default: None,
    }
}

/// A random but structurally valid single-period ledger with the full mix
/// of transitions: survivors, repayments, new defaults (including direct
/// write-offs), ongoing workouts, cures, full work-outs, new business and
/// purchased defaulted exposure. Every new default carries at-default
/// observations; roughly half the performing accounts carry a lifetime-EL
/// supplement; provisions are supplied consistently with the shortfall
/// definition. Identical seeds give identical ledgers.
pub fn random_period_ledger(seed: u64, max_accounts: usize) -> PeriodLedger {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bop_date = year_end(2020);
    let eop_date = year_end(2021);
    let n = rng.gen_range(1..=max_accounts.max(1));

    let mut bop_accounts = Vec::new();
    let mut eop_accounts = Vec::new();
    let mut events = PeriodEvents::new();

    let performing = |rng: &mut ChaCha8Rng, id: &str| {
        let mut a = AccountState::performing(
            id,
            rng.gen_range(0.001..0.25),
            rng.gen_range(1.0..10_000.0),
            rng.gen_range(0.05..0.95),
        );
        if rng.gen_bool(0.5) {
            a.lifetime_el = Some(account_el(&a) * rng.gen_range(1.0..2.5));
        }
        a.segments = random_tags(rng);
        a
    };
    let defaulted = |rng: &mut ChaCha8Rng, id: &str, date: NaiveDate, ead: f64, age: usize| {
        let mut a = AccountState::non_performing(id, date, ead, rng.gen_range(0.1..1.0));
        a.segments = random_tags(rng);
        a.segments.years_in_default = Some(age.to_string());
        a
    };

    for i in 0..n {
        let id = format!("R-{i:05}");
        let account_id = AccountId::new(id.clone());
        if rng.gen_bool(0.78) {
            // performing at BOP
            let bop_state = performing(&mut rng, &id);
            let roll: f64 = rng.gen();
            if roll < 0.68 {
                // survives with drifted parameters
                let mut eop_state = performing(&mut rng, &id);
                eop_state.segments = bop_state.segments.clone();
                bop_accounts.push(bop_state);
                eop_accounts.push(eop_state);
            } else if roll < 0.80 {
                // defaults during the period
                let default_date = NaiveDate::from_ymd_opt(2021, 6, 30).unwrap();
                let at_default_ead = bop_state.ead * rng.gen_range(0.8..1.2);
                let at_default_lgd = (bop_state.lgd * rng.gen_range(0.9..1.1)).min(1.0);
                let mut ev = AccountEvents {
                    at_default_ead: Some(at_default_ead),
                    at_default_lgd: Some(at_default_lgd),
                    ..Default::default()
                };
                if rng.gen_bool(0.15) {
                    // direct write-off, the account leaves the book
                    ev.write_off = at_default_ead;
                    events.insert(account_id, ev);
                    bop_accounts.push(bop_state);
                } else {
                    if rng.gen_bool(0.3) {
                        ev.write_off = at_default_ead * rng.gen_range(0.0..0.4);
                    }
                    events.insert(account_id, ev);
                    let seg = bop_state.segments.clone();
                    bop_accounts.push(bop_state);
                    let mut eop_state =
                        defaulted(&mut rng, &id, default_date, at_default_ead, 0);
                    eop_state.segments = seg;
                    eop_state.segments.years_in_default = Some("0".into());
                    eop_accounts.push(eop_state);
                }
            } else {
                // repaid at par
                bop_accounts.push(bop_state);
            }
        } else {
            // non-performing at BOP
            let age = rng.gen_range(0..4usize);
            let default_date = NaiveDate::from_ymd_opt(2020 - age as i32, 5, 15).unwrap();
            let bop_ead = rng.gen_range(10.0..5_000.0);
            let bop_state = defaulted(&mut rng, &id, default_date, bop_ead, age);
            let roll: f64 = rng.gen();
            if roll < 0.55 {
                // workout continues: cash in, exposure down, LGD drifts up
                let recovery = bop_state.ead * rng.gen_range(0.0..0.5);
                let write_off = if rng.gen_bool(0.4) {
                    bop_state.ead * rng.gen_range(0.0..0.3)
                } else {
                    0.0
                };
                let remaining = (bop_state.ead - recovery - write_off).max(1.0);
                let mut eop_state =
                    defaulted(&mut rng, &id, default_date, remaining, age + 1);
                eop_state.lgd = (bop_state.lgd * rng.gen_range(1.0..1.3)).min(1.0);
                eop_state.segments = bop_state.segments.clone();
                eop_state.segments.years_in_default = Some((age + 1).to_string());
                if recovery > 0.0 || write_off > 0.0 {
                    events.insert(
                        account_id,
                        AccountEvents {
                            write_off,
                            recovery,
                            ..Default::default()
                        },
                    );
                }
                bop_accounts.push(bop_state);
                eop_accounts.push(eop_state);
            } else if roll < 0.70 {
                // cures back to performing, occasionally after a partial loss
                let mut eop_state = performing(&mut rng, &id);
                eop_state.default_date = Some(default_date);
                eop_state.segments = bop_state.segments.clone();
                eop_state.segments.years_in_default = None;
                if rng.gen_bool(0.25) {
                    events.insert(
                        account_id,
                        AccountEvents {
                            write_off: bop_state.ead * rng.gen_range(0.0..0.2),
                            recovery: bop_state.ead * rng.gen_range(0.0..0.3),
                            ..Default::default()
                        },
                    );
                }
                bop_accounts.push(bop_state);
                eop_accounts.push(eop_state);
            } else {
                // fully worked out: cash plus final write-off
                let recovered = bop_state.ead * rng.gen_range(0.0..1.0);
                events.insert(
                    account_id,
                    AccountEvents {
                        write_off: bop_state.ead - recovered,
                        recovery: recovered,
                        ..Default::default()
                    },
                );
                bop_accounts.push(bop_state);
            }
        }
    }

    // new business joins at EOP; a small slice is already defaulted
    let joiners = rng.gen_range(0..=(n / 5).max(1));
    for j in 0..joiners {
        let id = format!("R-NEW-{j:05}");
        let roll: f64 = rng.gen();
        if roll < 0.88 {
            eop_accounts.push(performing(&mut rng, &id));
        } else if roll < 0.96 {
            // originated and defaulted inside the period
            let date = NaiveDate::from_ymd_opt(2021, 9, 1).unwrap();
            let ead = rng.gen_range(10.0..2_000.0);
            let state = defaulted(&mut rng, &id, date, ead, 0);
            events.insert(
                AccountId::new(id),
                AccountEvents {
                    at_default_ead: Some(ead),
                    at_default_lgd: Some(rng.gen_range(0.1..1.0)),
                    ..Default::default()
                },
            );
            eop_accounts.push(state);
        } else {
            // purchased exposure that defaulted before the period
            let date = NaiveDate::from_ymd_opt(2019, 4, 1).unwrap();
            let ead = rng.gen_range(10.0..2_000.0);
            eop_accounts.push(defaulted(&mut rng, &id, date, ead, 2));
        }
    }

    let bop = Snapshot::new(bop_date, bop_accounts).expect("generated BOP is valid");
    let eop = Snapshot::new(eop_date, eop_accounts).expect("generated EOP is valid");
    let lcp = rng.gen_range(0..=12);
    let provisions = consistent_provisions(&bop, &eop, lcp);
    let discount_rate = rng.gen_range(0.0..0.15);
    PeriodLedger::new(bop, eop, events, Some(provisions), discount_rate, lcp)
        .expect("generated ledger is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::decompose_ior;

    fn ior_sequence(ledgers: &[PeriodLedger]) -> Vec<f64> {
        ledgers
            .iter()
            .map(|l| decompose_ior(l).unwrap().ior_check)
            .collect()
    }

    #[test]
    fn appendix_case_1_is_clean() {
        let ledgers = generate_appendix_case(1).unwrap();
        assert_eq!(ledgers.len(), 4);
        let iors = ior_sequence(&ledgers);
        let expected = [100.0, 0.0, 0.0, 0.0];
        for (got, want) in iors.iter().zip(expected) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
        for ledger in &ledgers {
            let report = decompose_ior(ledger).unwrap();
            assert!(report.pl_backtest.abs() < 1e-6);
            assert!(report.npl_backtest.abs() < 1e-6);
        }
        // full liquidation
        assert!(ledgers.last().unwrap().eop().is_empty());
    }

    #[test]
    fn appendix_case_2_delays_recognition_via_pl() {
        let ledgers = generate_appendix_case(2).unwrap();
        let iors = ior_sequence(&ledgers);
        let expected = [50.0, 50.0, 0.0, 0.0];
        for (got, want) in iors.iter().zip(expected) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
        let year2 = decompose_ior(&ledgers[1]).unwrap();
        assert!((year2.pl_backtest - 50.0).abs() < 1e-6);
    }

    #[test]
    fn appendix_case_3_delays_recognition_via_npl() {
        let ledgers = generate_appendix_case(3).unwrap();
        let iors = ior_sequence(&ledgers);
        let expected = [50.0, 0.0, 0.0, 50.0];
        for (got, want) in iors.iter().zip(expected) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
        let year2 = decompose_ior(&ledgers[1]).unwrap();
        assert!(year2.pl_backtest.abs() < 1e-6);
        let year4 = decompose_ior(&ledgers[3]).unwrap();
        assert!((year4.npl_backtest - 50.0).abs() < 1e-6);
    }

    #[test]
    fn lifecycle_is_reproducible_and_liquidates() {
        let cfg = ScenarioConfig {
            n_accounts: 500,
            unit_exposure: 10.0,
            pd_true: 0.05,
            pd_model: 0.04,
            lgd_true: 0.4,
            lgd_model: 0.45,
            discount_rate: 0.05,
            horizon_years: 6,
            recovery_profile: vec![0.35, 0.25],
            seed: 42,
            lifetime_el_factor: Some(1.5),
            loss_confirmation_months: 6,
            with_provisions: true,
        };
        let a = simulate_lifecycle(&cfg).unwrap();
        let b = simulate_lifecycle(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.last().unwrap().eop().is_empty());
        assert_eq!(a.len(), 6);
    }

    #[test]
    fn zero_pd_means_zero_cumulative_ior() {
        let cfg = ScenarioConfig {
            n_accounts: 100,
            unit_exposure: 1.0,
            pd_true: 0.0,
            pd_model: 0.02,
            lgd_true: 0.5,
            lgd_model: 0.5,
            discount_rate: 0.0,
            horizon_years: 4,
            recovery_profile: vec![0.5],
            seed: 1,
            lifetime_el_factor: None,
            loss_confirmation_months: 0,
            with_provisions: false,
        };
        let ledgers = simulate_lifecycle(&cfg).unwrap();
        let total: f64 = ior_sequence(&ledgers).iter().sum();
        assert!(total.abs() < 1e-9);
    }

    #[test]
    fn matched_parameters_have_zero_backtests() {
        let cfg = ScenarioConfig {
            n_accounts: 1_000,
            unit_exposure: 1.0,
            pd_true: 0.02,
            pd_model: 0.02,
            lgd_true: 0.5,
            lgd_model: 0.5,
            discount_rate: 0.0,
            horizon_years: 5,
            recovery_profile: vec![0.3, 0.2],
            seed: 3,
            lifetime_el_factor: None,
            loss_confirmation_months: 0,
            with_provisions: false,
        };
        for ledger in simulate_lifecycle(&cfg).unwrap() {
            let report = decompose_ior(&ledger).unwrap();
            assert!(report.pl_backtest.abs() < 1e-9, "{}", report.pl_backtest);
            assert!(report.npl_backtest.abs() < 1e-9, "{}", report.npl_backtest);
        }
    }

    #[test]
    fn short_horizon_is_rejected() {
        let cfg = ScenarioConfig {
            horizon_years: 3,
            ..ScenarioConfig::appendix_case(1).unwrap()
        };
        assert!(matches!(
            simulate_lifecycle(&cfg),
            Err(Error::ConfigInvalid { .. })
        ));
    }

    #[test]
    fn recovery_scenario_matches_dcf() {
        let ledgers = generate_recovery_scenario(100.0, 0.10, &[50.0, 30.0]).unwrap();
        assert_eq!(ledgers.len(), 3);
        let first = decompose_ior(&ledgers[0]).unwrap();
        assert!((first.npl_backtest - (-7.024_793_388_429_752)).abs() < 1e-9);

        // undiscounted book backtests flat
        for ledger in generate_recovery_scenario(100.0, 0.0, &[50.0, 30.0]).unwrap() {
            let report = decompose_ior(&ledger).unwrap();
            assert!(report.npl_backtest.abs() < 1e-9);
        }
    }

    #[test]
    fn random_ledger_is_reproducible() {
        let a = random_period_ledger(99, 200);
        let b = random_period_ledger(99, 200);
        assert_eq!(a, b);
    }
}
