//! Tabular ingestion and emission for snapshots, events and provisions.
//!
//! Snapshot CSV schema (header required):
//! `account_id,as_of,status,pd,ead,lgd,lifetime_el,default_date,pd_model,lgd_model,rating_grade,exposure_band,collateral_type,years_in_default`
//! with empty strings for absent optionals, ISO-8601 dates and status `P`/`N`.
//!
//! Events CSV schema:
//! `account_id,write_off,recovery,at_default_ead,at_default_lgd,restated_bop_el`
//!
//! Provisions are a single-record CSV (`llp_bop,llp_eop,ibnr_bop,ibnr_eop,sf_bop,sf_eop`)
//! or an equivalent JSON object. Files ending in `.json` are parsed as JSON
//! throughout; floats are written in shortest round-trip form so emitted
//! files re-ingest bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{
    AccountEvents, AccountId, AccountState, PeriodEvents, ProvisionBalances, SegmentTags,
    Snapshot, Status,
};

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotRecord {
    account_id: String,
    as_of: NaiveDate,
    status: Status,
    pd: Option<f64>,
    ead: f64,
    lgd: f64,
    lifetime_el: Option<f64>,
    default_date: Option<NaiveDate>,
    pd_model: Option<String>,
    lgd_model: Option<String>,
    rating_grade: Option<String>,
    exposure_band: Option<String>,
    collateral_type: Option<String>,
    years_in_default: Option<String>,
}

impl SnapshotRecord {
    fn into_account(self, row: u64) -> Result<AccountState> {
        // non-performing records may leave pd empty, it is 1.0 by definition
        let pd = match (self.pd, self.status) {
            (Some(pd), _) => pd,
            (None, Status::NonPerforming) => 1.0,
            (None, Status::Performing) => {
                return Err(Error::InvalidRecord {
                    row,
                    reason: format!("account `{}`: performing record without pd", self.account_id),
                })
            }
        };
        let account = AccountState {
            account_id: AccountId::new(self.account_id),
            status: self.status,
            default_date: self.default_date,
            pd,
            ead: self.ead,
            lgd: self.lgd,
            lifetime_el: self.lifetime_el,
            segments: SegmentTags {
                pd_model: none_if_empty(self.pd_model),
                lgd_model: none_if_empty(self.lgd_model),
                rating_grade: none_if_empty(self.rating_grade),
                exposure_band: none_if_empty(self.exposure_band),
                collateral_type: none_if_empty(self.collateral_type),
                years_in_default: none_if_empty(self.years_in_default),
            },
        };
        account.validate(Some(row))?;
        Ok(account)
    }

    fn from_account(a: &AccountState, as_of: NaiveDate) -> Self {
        SnapshotRecord {
            account_id: a.account_id.to_string(),
            as_of,
            status: a.status,
            pd: Some(a.pd),
            ead: a.ead,
            lgd: a.lgd,
            lifetime_el: a.lifetime_el,
            default_date: a.default_date,
            pd_model: a.segments.pd_model.clone(),
            lgd_model: a.segments.lgd_model.clone(),
            rating_grade: a.segments.rating_grade.clone(),
            exposure_band: a.segments.exposure_band.clone(),
            collateral_type: a.segments.collateral_type.clone(),
            years_in_default: a.segments.years_in_default.clone(),
        }
    }
}

fn none_if_empty(s: Option<String>) -> Option<String> {
    s.filter(|v| !v.is_empty())
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotDocument {
    as_of: NaiveDate,
    accounts: Vec<AccountState>,
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Loads a snapshot from a CSV or JSON file, validating every record.
pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Snapshot> {
    let path = path.as_ref();
    if is_json(path) {
        let doc: SnapshotDocument = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        return Snapshot::new(doc.as_of, doc.accounts);
    }
    read_snapshot_csv(BufReader::new(File::open(path)?))
}

/// Reads the snapshot CSV schema from any reader.
pub fn read_snapshot_csv(reader: impl Read) -> Result<Snapshot> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut as_of: Option<NaiveDate> = None;
    let mut accounts = Vec::new();
    for (idx, record) in csv_reader.deserialize::<SnapshotRecord>().enumerate() {
        let row = idx as u64 + 1;
        let record = record.map_err(|e| Error::InvalidRecord {
            row,
            reason: e.to_string(),
        })?;
        match as_of {
            None => as_of = Some(record.as_of),
            Some(expected) if expected != record.as_of => {
                return Err(Error::InconsistentAsOf {
                    expected,
                    found: record.as_of,
                    row,
                })
            }
            _ => {}
        }
        accounts.push(record.into_account(row)?);
    }
    let as_of = as_of.ok_or_else(|| Error::ConfigInvalid {
        reason: "snapshot file has no records; empty snapshots need the JSON form".into(),
    })?;
    Snapshot::new(as_of, accounts)
}

/// Writes a snapshot in the CSV schema (accounts in id order).
pub fn write_snapshot_csv(snapshot: &Snapshot, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for account in snapshot.accounts() {
        w.serialize(SnapshotRecord::from_account(account, snapshot.as_of()))?;
    }
    w.flush()?;
    Ok(())
}

/// Saves a snapshot to a path, choosing CSV or JSON by extension. Empty
/// snapshots must go to JSON, since a CSV with no data rows cannot carry
/// the as-of date.
pub fn save_snapshot(snapshot: &Snapshot, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_json(path) {
        let doc = SnapshotDocument {
            as_of: snapshot.as_of(),
            accounts: snapshot.accounts().cloned().collect(),
        };
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, &doc)?;
        f.write_all(b"\n")?;
        f.flush()?;
        return Ok(());
    }
    if snapshot.is_empty() {
        return Err(Error::ConfigInvalid {
            reason: format!(
                "empty snapshot cannot be written as CSV ({}); use a .json path",
                path.display()
            ),
        });
    }
    write_snapshot_csv(snapshot, BufWriter::new(File::create(path)?))
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRecord {
    account_id: String,
    write_off: Option<f64>,
    recovery: Option<f64>,
    at_default_ead: Option<f64>,
    at_default_lgd: Option<f64>,
    restated_bop_el: Option<f64>,
}

/// Loads period events from a CSV or JSON file.
pub fn load_events(path: impl AsRef<Path>) -> Result<PeriodEvents> {
    let path = path.as_ref();
    if is_json(path) {
        let records: Vec<EventRecord> =
            serde_json::from_reader(BufReader::new(File::open(path)?))?;
        return collect_events(records);
    }
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut records = Vec::new();
    for (idx, record) in reader.deserialize::<EventRecord>().enumerate() {
        records.push(record.map_err(|e| Error::InvalidRecord {
            row: idx as u64 + 1,
            reason: e.to_string(),
        })?);
    }
    collect_events(records)
}

fn collect_events(records: Vec<EventRecord>) -> Result<PeriodEvents> {
    let mut events = PeriodEvents::new();
    for record in records {
        let id = AccountId::new(record.account_id);
        if events.get(&id).is_some() {
            return Err(Error::InvalidEvent {
                account: id.to_string(),
                reason: "duplicate event record".into(),
            });
        }
        events.insert(
            id,
            AccountEvents {
                write_off: record.write_off.unwrap_or(0.0),
                recovery: record.recovery.unwrap_or(0.0),
                at_default_ead: record.at_default_ead,
                at_default_lgd: record.at_default_lgd,
                restated_bop_el: record.restated_bop_el,
            },
        );
    }
    Ok(events)
}

/// Writes period events in the CSV schema (accounts in id order).
pub fn write_events_csv(events: &PeriodEvents, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (id, ev) in events.iter() {
        w.serialize(EventRecord {
            account_id: id.to_string(),
            write_off: Some(ev.write_off),
            recovery: Some(ev.recovery),
            at_default_ead: ev.at_default_ead,
            at_default_lgd: ev.at_default_lgd,
            restated_bop_el: ev.restated_bop_el,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_events(events: &PeriodEvents, path: impl AsRef<Path>) -> Result<()> {
    write_events_csv(events, BufWriter::new(File::create(path.as_ref())?))
}

/// Loads the single-record provisions block from CSV or JSON.
pub fn load_provisions(path: impl AsRef<Path>) -> Result<ProvisionBalances> {
    let path = path.as_ref();
    if is_json(path) {
        let p: ProvisionBalances = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        return Ok(p);
    }
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut rows = reader.deserialize::<ProvisionBalances>();
    let first = rows.next().ok_or_else(|| Error::ConfigInvalid {
        reason: format!("provisions file {} has no record", path.display()),
    })?;
    let p = first.map_err(|e| Error::InvalidRecord {
        row: 1,
        reason: e.to_string(),
    })?;
    if rows.next().is_some() {
        return Err(Error::ConfigInvalid {
            reason: "provisions file must hold exactly one record".into(),
        });
    }
    Ok(p)
}

pub fn save_provisions(provisions: &ProvisionBalances, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path.as_ref())?));
    w.serialize(provisions)?;
    w.flush()?;
    Ok(())
}
