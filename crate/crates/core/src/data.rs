//! Regional count data: CSV ingestion, cleaning, and family construction.
//!
//! Input files carry one row per region with confirmed and recovered case
//! counts. Cleaning drops rows that cannot define a recovery rate and
//! reports every drop with a reason; the kept rows feed
//! [`build_family`], which classifies each region's rate against an
//! equivalence interval.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pi0::{HypothesisConfig, HypothesisFamily};

/// One cleaned region row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionRecord {
    /// Region name, kept verbatim (after whitespace trimming).
    pub region: String,
    /// Confirmed case count; at least 1 after cleaning.
    pub confirmed: u64,
    /// Recovered case count; at most `confirmed` after cleaning.
    pub recovered: u64,
}

impl RegionRecord {
    /// Observed recovery rate `recovered / confirmed`.
    pub fn rate(&self) -> f64 {
        self.recovered as f64 / self.confirmed as f64
    }
}

/// Column-name mapping for input CSVs whose headers differ from the
/// defaults `region`, `confirmed`, `recovered`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub region: String,
    pub confirmed: String,
    pub recovered: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            region: "region".into(),
            confirmed: "confirmed".into(),
            recovered: "recovered".into(),
        }
    }
}

impl FromStr for ColumnMap {
    type Err = Error;

    /// Parses comma-separated `key=value` overrides of the defaults, e.g.
    /// `region=Province_State,confirmed=Confirmed`.
    fn from_str(s: &str) -> Result<Self> {
        let mut map = ColumnMap::default();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| {
                Error::config(format!("column override '{part}' is not key=value"))
            })?;
            let value = value.trim();
            if value.is_empty() {
                return Err(Error::config(format!(
                    "column override '{part}' names an empty column"
                )));
            }
            match key.trim() {
                "region" => map.region = value.into(),
                "confirmed" => map.confirmed = value.into(),
                "recovered" => map.recovered = value.into(),
                other => {
                    return Err(Error::config(format!(
                        "unknown column key '{other}' (expected region, confirmed, or recovered)"
                    )))
                }
            }
        }
        Ok(map)
    }
}

/// Why a row was dropped during cleaning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum DropReason {
    /// A required field is empty or absent.
    MissingValue { column: String },
    /// A count field does not parse as a nonnegative integer.
    NonNumeric { column: String, value: String },
    /// `confirmed = 0`: the rate is undefined.
    NoConfirmedCases,
    /// `recovered > confirmed`: the counts are inconsistent.
    RecoveriesExceedConfirmed,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::MissingValue { column } => write!(f, "missing value in '{column}'"),
            DropReason::NonNumeric { column, value } => {
                write!(f, "non-numeric value '{value}' in '{column}'")
            }
            DropReason::NoConfirmedCases => write!(f, "no confirmed cases"),
            DropReason::RecoveriesExceedConfirmed => write!(f, "recoveries exceed confirmed"),
        }
    }
}

/// One dropped input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedRow {
    /// 1-based data-row index (header and comment lines not counted).
    pub row: u64,
    /// Region name if one was present, empty otherwise.
    pub region: String,
    pub reason: DropReason,
}

/// Outcome of loading and cleaning a regions file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CleaningReport {
    pub kept: Vec<RegionRecord>,
    pub dropped: Vec<DroppedRow>,
}

// Extracts and validates the two counts of one row; any failure names the
// drop reason in cleaning order (counts first, then consistency).
fn parse_counts(
    record: &csv::StringRecord,
    confirmed_idx: usize,
    recovered_idx: usize,
    columns: &ColumnMap,
) -> std::result::Result<(u64, u64), DropReason> {
    let count = |idx: usize, column: &str| -> std::result::Result<u64, DropReason> {
        let raw = record.get(idx).unwrap_or("");
        if raw.is_empty() {
            return Err(DropReason::MissingValue {
                column: column.to_string(),
            });
        }
        raw.parse::<u64>().map_err(|_| DropReason::NonNumeric {
            column: column.to_string(),
            value: raw.to_string(),
        })
    };
    let confirmed = count(confirmed_idx, &columns.confirmed)?;
    let recovered = count(recovered_idx, &columns.recovered)?;
    if confirmed == 0 {
        return Err(DropReason::NoConfirmedCases);
    }
    if recovered > confirmed {
        return Err(DropReason::RecoveriesExceedConfirmed);
    }
    Ok((confirmed, recovered))
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn {
            column: name.to_string(),
        })
}

/// Loads region rows from CSV and cleans them.
///
/// The reader must provide a header row naming (at least) the three mapped
/// columns; `#`-prefixed lines are comments. A row is dropped, with the
/// reason recorded, when a count is missing or non-numeric, when
/// `confirmed = 0`, or when `recovered > confirmed`. Kept rows satisfy the
/// [`RegionRecord`] invariants, so cleaning is idempotent.
///
/// # Errors
/// Rejects unreadable input, a missing mapped column, and files where rows
/// were present but none survived cleaning.
pub fn load_regions<R: Read>(reader: R, columns: &ColumnMap) -> Result<CleaningReport> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let region_idx = header_index(&headers, &columns.region)?;
    let confirmed_idx = header_index(&headers, &columns.confirmed)?;
    let recovered_idx = header_index(&headers, &columns.recovered)?;

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (i, record) in csv_reader.records().enumerate() {
        let record = record?;
        let region = record.get(region_idx).unwrap_or("").to_string();
        match parse_counts(&record, confirmed_idx, recovered_idx, columns) {
            Ok((confirmed, recovered)) => kept.push(RegionRecord {
                region,
                confirmed,
                recovered,
            }),
            Err(reason) => dropped.push(DroppedRow {
                row: i as u64 + 1,
                region,
                reason,
            }),
        }
    }
    if kept.is_empty() && !dropped.is_empty() {
        return Err(Error::AllRowsDropped {
            dropped: dropped.len(),
        });
    }
    Ok(CleaningReport { kept, dropped })
}

/// [`load_regions`] on a file path.
///
/// # Errors
/// As [`load_regions`], plus file-open failures.
pub fn load_regions_path<P: AsRef<Path>>(path: P, columns: &ColumnMap) -> Result<CleaningReport> {
    load_regions(File::open(path)?, columns)
}

/// Writes region rows as CSV with the default header.
///
/// Output from this function reloads (with the default [`ColumnMap`])
/// into exactly the same records with an empty drop report.
///
/// # Errors
/// Propagates write failures.
pub fn write_regions<W: Write>(records: &[RegionRecord], w: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(["region", "confirmed", "recovered"])?;
    for r in records {
        writer.write_record([
            r.region.as_str(),
            &r.confirmed.to_string(),
            &r.recovered.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Builds the hypothesis family testing every region's recovery rate
/// against one equivalence interval.
///
/// Each record becomes a hypothesis with `n = confirmed` and ground truth
/// `rate = recovered / confirmed`; the null holds when the rate falls
/// outside the open interval `(theta1, theta2)`.
///
/// # Errors
/// Rejects an empty record list, bounds out of order, and degenerate rates
/// (exactly 0 or 1), which cannot parameterize a simulable distribution.
pub fn build_family(
    records: &[RegionRecord],
    theta1: f64,
    theta2: f64,
) -> Result<HypothesisFamily> {
    if records.is_empty() {
        return Err(Error::Empty {
            what: "region records",
        });
    }
    let configs = records
        .iter()
        .map(|r| HypothesisConfig {
            n: r.confirmed,
            theta_true: r.rate(),
            theta1,
            theta2,
        })
        .collect();
    HypothesisFamily::new(configs)
}
