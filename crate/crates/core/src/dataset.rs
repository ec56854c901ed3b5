//! Domain records, ingestion and validation.
//!
//! Publications arrive as JSON lines, the staff roster as CSV. Once loaded, a
//! [`Dataset`] is immutable and can be shared freely between threads.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::numeric::compensated_sum;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: field `{field}`: {message}")]
    Malformed {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: duplicate pub_id `{pub_id}`")]
    DuplicatePublication { line: usize, pub_id: String },
    #[error("line {line}: fraction {fraction} for scientist `{scientist_id}` is outside [0, 1]")]
    FractionOutOfRange {
        line: usize,
        scientist_id: String,
        fraction: f64,
    },
    #[error("line {line}: duplicate entry for scientist `{scientist_id}` in year {year}")]
    DuplicateStaffYear {
        line: usize,
        scientist_id: String,
        year: i32,
    },
    #[error("line {line}: scientist `{scientist_id}` listed under more than one unit")]
    ConflictingAffiliation { line: usize, scientist_id: String },
    #[error("roster csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("empty period {start}..={end}")]
    EmptyPeriod { start: i32, end: i32 },
}

impl DatasetError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// A research unit: one scientific sector within one university.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnitKey {
    pub university_id: String,
    pub sds_id: String,
}

impl UnitKey {
    pub fn new(university_id: impl Into<String>, sds_id: impl Into<String>) -> Self {
        Self {
            university_id: university_id.into(),
            sds_id: sds_id.into(),
        }
    }
}

impl fmt::Display for UnitKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.university_id, self.sds_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Affiliation {
    Unit(UnitKey),
    External,
}

impl Affiliation {
    pub fn unit(&self) -> Option<&UnitKey> {
        match self {
            Affiliation::Unit(k) => Some(k),
            Affiliation::External => None,
        }
    }

    pub fn university(&self) -> Option<&str> {
        self.unit().map(|k| k.university_id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthorRef {
    pub author_id: String,
    pub affiliation: Affiliation,
    /// 1-based byline position.
    pub position: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PublicationRecord {
    pub pub_id: String,
    pub year: i32,
    pub citations: u64,
    pub categories: Vec<String>,
    /// Sorted by byline position; `authors[i].position == i + 1`.
    pub authors: Vec<AuthorRef>,
    pub life_science: bool,
}

impl PublicationRecord {
    pub fn n_authors(&self) -> usize {
        self.authors.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaffRecord {
    pub scientist_id: String,
    pub university_id: String,
    pub sds_id: String,
    /// Fraction of each year employed, in [0, 1].
    pub headcount_by_year: BTreeMap<i32, f64>,
}

impl StaffRecord {
    pub fn unit(&self) -> UnitKey {
        UnitKey::new(self.university_id.clone(), self.sds_id.clone())
    }

    /// Sum of yearly fractions inside `period`.
    pub fn presence(&self, period: Period) -> f64 {
        compensated_sum(self.headcount_by_year.range(period.start..=period.end).map(|(_, f)| *f))
    }
}

/// Inclusive range of years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub start: i32,
    pub end: i32,
}

impl Period {
    pub fn new(start: i32, end: i32) -> Result<Self, DatasetError> {
        if end < start {
            return Err(DatasetError::EmptyPeriod { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }

    pub fn n_years(&self) -> usize {
        (self.end - self.start + 1) as usize
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub publications: Vec<PublicationRecord>,
    pub roster: Vec<StaffRecord>,
    pub period: Period,
    pub category_lifesci: BTreeSet<String>,
}

impl Dataset {
    pub fn new(
        publications: Vec<PublicationRecord>,
        roster: Vec<StaffRecord>,
        period: Period,
        category_lifesci: BTreeSet<String>,
    ) -> Self {
        let mut ds = Self {
            publications,
            roster,
            period,
            category_lifesci,
        };
        ds.refresh_life_science();
        ds
    }

    /// Recomputes every publication's life-science flag from the configured set.
    pub fn refresh_life_science(&mut self) {
        for p in &mut self.publications {
            p.life_science = p.categories.iter().any(|c| self.category_lifesci.contains(c));
        }
    }

    /// Publications dated inside the period.
    pub fn publications_in_period(&self) -> impl Iterator<Item = &PublicationRecord> {
        self.publications.iter().filter(move |p| self.period.contains(p.year))
    }

    /// Every unit with at least one roster row.
    pub fn roster_units(&self) -> BTreeSet<UnitKey> {
        self.roster.iter().map(StaffRecord::unit).collect()
    }

    pub fn sds_ids(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.roster.iter().map(|s| s.sds_id.clone()).collect();
        for p in self.publications_in_period() {
            for a in &p.authors {
                if let Affiliation::Unit(k) = &a.affiliation {
                    out.insert(k.sds_id.clone());
                }
            }
        }
        out
    }

    /// Average research staff of every roster unit over the period.
    pub fn staff_by_unit(&self) -> BTreeMap<UnitKey, f64> {
        let mut sums: BTreeMap<UnitKey, Vec<f64>> = BTreeMap::new();
        for s in &self.roster {
            sums.entry(s.unit()).or_default().push(s.presence(self.period));
        }
        let years = self.period.n_years() as f64;
        sums.into_iter().map(|(k, v)| (k, compensated_sum(v) / years)).collect()
    }

    /// Average research staff of one unit.
    pub fn average_research_staff(&self, university_id: &str, sds_id: &str) -> StaffAverage {
        let mut known = false;
        let mut presence = Vec::new();
        for s in &self.roster {
            if s.university_id == university_id && s.sds_id == sds_id {
                known = true;
                presence.push(s.presence(self.period));
            }
        }
        StaffAverage {
            rs: compensated_sum(presence) / self.period.n_years() as f64,
            unknown_unit: !known,
        }
    }
}

/// Result of [`Dataset::average_research_staff`]. Unknown units report 0
/// with `unknown_unit` set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaffAverage {
    pub rs: f64,
    pub unknown_unit: bool,
}

// ---------------------------------------------------------------------------
// publications.jsonl

fn malformed(line: usize, field: &str, message: impl Into<String>) -> DatasetError {
    DatasetError::Malformed {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn string_field(obj: &serde_json::Map<String, Value>, key: &str, line: usize) -> Result<String, DatasetError> {
    match obj.get(key) {
        Some(Value::String(s)) if !s.is_empty() => Ok(s.clone()),
        Some(Value::String(_)) => Err(malformed(line, key, "empty string")),
        Some(other) => Err(malformed(line, key, format!("expected string, found {other}"))),
        None => Err(malformed(line, key, "missing")),
    }
}

fn optional_string_field(
    obj: &serde_json::Map<String, Value>,
    key: &str,
    line: usize,
) -> Result<Option<String>, DatasetError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) if !s.is_empty() => Ok(Some(s.clone())),
        Some(Value::String(_)) => Err(malformed(line, key, "empty string")),
        Some(other) => Err(malformed(line, key, format!("expected string or null, found {other}"))),
    }
}

fn u64_field(obj: &serde_json::Map<String, Value>, key: &str, line: usize) -> Result<u64, DatasetError> {
    obj.get(key)
        .ok_or_else(|| malformed(line, key, "missing"))?
        .as_u64()
        .ok_or_else(|| malformed(line, key, "expected non-negative integer"))
}

/// Parses one JSON line into a publication (life-science flag unset).
pub fn parse_publication_line(text: &str, line: usize) -> Result<PublicationRecord, DatasetError> {
    let value: Value = serde_json::from_str(text).map_err(|e| malformed(line, "<record>", e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| malformed(line, "<record>", "expected a JSON object"))?;

    let pub_id = string_field(obj, "pub_id", line)?;
    let year = obj
        .get("year")
        .ok_or_else(|| malformed(line, "year", "missing"))?
        .as_i64()
        .and_then(|y| i32::try_from(y).ok())
        .ok_or_else(|| malformed(line, "year", "expected integer year"))?;
    let citations = u64_field(obj, "citations", line)?;

    let categories = match obj.get("categories") {
        Some(Value::Array(items)) => items
            .iter()
            .map(|c| match c {
                Value::String(s) if !s.is_empty() => Ok(s.clone()),
                _ => Err(malformed(line, "categories", "expected non-empty strings")),
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(malformed(line, "categories", "expected array")),
        None => return Err(malformed(line, "categories", "missing")),
    };
    if categories.is_empty() {
        return Err(malformed(line, "categories", "at least one category required"));
    }

    let raw_authors = match obj.get("authors") {
        Some(Value::Array(items)) => items,
        Some(_) => return Err(malformed(line, "authors", "expected array")),
        None => return Err(malformed(line, "authors", "missing")),
    };
    if raw_authors.is_empty() {
        return Err(malformed(line, "authors", "at least one author required"));
    }
    let mut authors = Vec::with_capacity(raw_authors.len());
    for a in raw_authors {
        let a = a
            .as_object()
            .ok_or_else(|| malformed(line, "authors", "expected objects"))?;
        let author_id = string_field(a, "author_id", line)?;
        let university = optional_string_field(a, "university_id", line)?;
        let sds = optional_string_field(a, "sds_id", line)?;
        let affiliation = match (university, sds) {
            (Some(u), Some(s)) => Affiliation::Unit(UnitKey::new(u, s)),
            (None, None) => Affiliation::External,
            (None, Some(_)) => return Err(malformed(line, "university_id", "null university with non-null sds_id")),
            (Some(_), None) => return Err(malformed(line, "sds_id", "null sds_id with non-null university_id")),
        };
        let position = u64_field(a, "position", line)?;
        let position = u32::try_from(position)
            .ok()
            .filter(|p| *p >= 1)
            .ok_or_else(|| malformed(line, "position", "expected integer >= 1"))?;
        authors.push(AuthorRef {
            author_id,
            affiliation,
            position,
        });
    }
    authors.sort_by_key(|a| a.position);
    for (i, a) in authors.iter().enumerate() {
        if a.position as usize != i + 1 {
            return Err(malformed(
                line,
                "position",
                format!("positions must be 1..={} without gaps or repeats", authors.len()),
            ));
        }
    }

    Ok(PublicationRecord {
        pub_id,
        year,
        citations,
        categories,
        authors,
        life_science: false,
    })
}

/// Loads a publications file, flagging life-science records from `lifesci`.
pub fn load_publications(path: &Path, lifesci: &BTreeSet<String>) -> Result<Vec<PublicationRecord>, DatasetError> {
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    read_publications(BufReader::new(file), lifesci).map_err(|e| match e {
        DatasetError::Io { source, .. } => DatasetError::io(path, source),
        other => other,
    })
}

pub fn read_publications<R: BufRead>(
    reader: R,
    lifesci: &BTreeSet<String>,
) -> Result<Vec<PublicationRecord>, DatasetError> {
    let mut out = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, text) in reader.lines().enumerate() {
        let line = idx + 1;
        let text = text.map_err(|e| DatasetError::io(Path::new("<publications>"), e))?;
        if text.trim().is_empty() {
            continue;
        }
        let mut rec = parse_publication_line(&text, line)?;
        if seen.insert(rec.pub_id.clone(), line).is_some() {
            return Err(DatasetError::DuplicatePublication {
                line,
                pub_id: rec.pub_id,
            });
        }
        rec.life_science = rec.categories.iter().any(|c| lifesci.contains(c));
        out.push(rec);
    }
    Ok(out)
}

#[derive(Serialize)]
struct AuthorOut<'a> {
    author_id: &'a str,
    university_id: Option<&'a str>,
    sds_id: Option<&'a str>,
    position: u32,
}

#[derive(Serialize)]
struct PublicationOut<'a> {
    pub_id: &'a str,
    year: i32,
    citations: u64,
    categories: &'a [String],
    authors: Vec<AuthorOut<'a>>,
}

pub fn publication_to_json(p: &PublicationRecord) -> String {
    let out = PublicationOut {
        pub_id: &p.pub_id,
        year: p.year,
        citations: p.citations,
        categories: &p.categories,
        authors: p
            .authors
            .iter()
            .map(|a| AuthorOut {
                author_id: &a.author_id,
                university_id: a.affiliation.unit().map(|k| k.university_id.as_str()),
                sds_id: a.affiliation.unit().map(|k| k.sds_id.as_str()),
                position: a.position,
            })
            .collect(),
    };
    serde_json::to_string(&out).expect("publication serializes")
}

pub fn write_publications(path: &Path, pubs: &[PublicationRecord]) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in pubs {
        writeln!(w, "{}", publication_to_json(p)).map_err(|e| DatasetError::io(path, e))?;
    }
    w.flush().map_err(|e| DatasetError::io(path, e))
}

// ---------------------------------------------------------------------------
// roster.csv

#[derive(Debug, Serialize, Deserialize)]
struct RosterRow {
    scientist_id: String,
    university_id: String,
    sds_id: String,
    year: i32,
    fraction: f64,
}

pub fn load_roster(path: &Path) -> Result<Vec<StaffRecord>, DatasetError> {
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    read_roster(BufReader::new(file))
}

/// Reads roster rows, merging the yearly fractions of each scientist.
/// Records come back in order of first appearance.
pub fn read_roster<R: std::io::Read>(reader: R) -> Result<Vec<StaffRecord>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut records: Vec<StaffRecord> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut seen_years: HashSet<(String, i32)> = HashSet::new();
    let headers = rdr.headers()?.clone();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row: RosterRow = record.deserialize(Some(&headers))?;
        if !(0.0..=1.0).contains(&row.fraction) || row.fraction.is_nan() {
            return Err(DatasetError::FractionOutOfRange {
                line,
                scientist_id: row.scientist_id,
                fraction: row.fraction,
            });
        }
        if !seen_years.insert((row.scientist_id.clone(), row.year)) {
            return Err(DatasetError::DuplicateStaffYear {
                line,
                scientist_id: row.scientist_id,
                year: row.year,
            });
        }
        match index.get(&row.scientist_id) {
            Some(&i) => {
                let rec = &mut records[i];
                if rec.university_id != row.university_id || rec.sds_id != row.sds_id {
                    return Err(DatasetError::ConflictingAffiliation {
                        line,
                        scientist_id: row.scientist_id,
                    });
                }
                rec.headcount_by_year.insert(row.year, row.fraction);
            }
            None => {
                index.insert(row.scientist_id.clone(), records.len());
                records.push(StaffRecord {
                    scientist_id: row.scientist_id,
                    university_id: row.university_id,
                    sds_id: row.sds_id,
                    headcount_by_year: BTreeMap::from([(row.year, row.fraction)]),
                });
            }
        }
    }
    Ok(records)
}

pub fn write_roster(path: &Path, roster: &[StaffRecord]) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for s in roster {
        for (&year, &fraction) in &s.headcount_by_year {
            w.serialize(RosterRow {
                scientist_id: s.scientist_id.clone(),
                university_id: s.university_id.clone(),
                sds_id: s.sds_id.clone(),
                year,
                fraction,
            })?;
        }
    }
    w.flush().map_err(|e| DatasetError::io(path, e))
}

// ---------------------------------------------------------------------------
// validation

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrphanedAffiliation {
    pub pub_id: String,
    pub author_id: String,
    pub unit: UnitKey,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutOfPeriod {
    pub pub_id: String,
    pub year: i32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnsupportedCell {
    pub pub_id: String,
    pub year: i32,
    pub category: String,
}

/// Data-quality findings. Orphaned affiliations and out-of-period
/// publications are warnings; unsupported baseline cells block scoring.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub orphaned: Vec<OrphanedAffiliation>,
    pub out_of_period: Vec<OutOfPeriod>,
    pub unsupported_cells: Vec<UnsupportedCell>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.orphaned.is_empty() && self.out_of_period.is_empty() && self.unsupported_cells.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        !self.unsupported_cells.is_empty()
    }

    pub fn n_issues(&self) -> usize {
        self.orphaned.len() + self.out_of_period.len() + self.unsupported_cells.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return writeln!(f, "validation: no issues");
        }
        writeln!(
            f,
            "validation: {} orphaned affiliation(s), {} out-of-period publication(s), {} unsupported baseline cell(s)",
            self.orphaned.len(),
            self.out_of_period.len(),
            self.unsupported_cells.len()
        )?;
        for o in &self.orphaned {
            writeln!(
                f,
                "  warning: {} author {} at {} not in roster",
                o.pub_id, o.author_id, o.unit
            )?;
        }
        for o in &self.out_of_period {
            writeln!(f, "  warning: {} dated {} outside the period", o.pub_id, o.year)?;
        }
        for c in &self.unsupported_cells {
            writeln!(
                f,
                "  error: {} has no baseline for ({}, {})",
                c.pub_id, c.year, c.category
            )?;
        }
        Ok(())
    }
}

/// Checks cross-record consistency. Baseline support is judged against
/// cells built from in-period publications.
pub fn validate(dataset: &Dataset) -> ValidationReport {
    let cells: HashSet<(i32, &str)> = dataset
        .publications_in_period()
        .flat_map(|p| p.categories.iter().map(move |c| (p.year, c.as_str())))
        .collect();
    validate_against(dataset, |year, cat| cells.contains(&(year, cat)))
}

/// As [`validate`], judging baseline support with `has_cell`.
pub fn validate_against<F>(dataset: &Dataset, has_cell: F) -> ValidationReport
where
    F: Fn(i32, &str) -> bool,
{
    let units = dataset.roster_units();
    let mut report = ValidationReport::default();
    for p in &dataset.publications {
        if !dataset.period.contains(p.year) {
            report.out_of_period.push(OutOfPeriod {
                pub_id: p.pub_id.clone(),
                year: p.year,
            });
            continue;
        }
        for a in &p.authors {
            if let Affiliation::Unit(k) = &a.affiliation {
                if !units.contains(k) {
                    report.orphaned.push(OrphanedAffiliation {
                        pub_id: p.pub_id.clone(),
                        author_id: a.author_id.clone(),
                        unit: k.clone(),
                    });
                }
            }
        }
        for c in &p.categories {
            if !has_cell(p.year, c) {
                report.unsupported_cells.push(UnsupportedCell {
                    pub_id: p.pub_id.clone(),
                    year: p.year,
                    category: c.clone(),
                });
            }
        }
    }
    report
}
