//! Citation standardization, fractional author credit and productivity.
//!
//! A publication's citations are divided by the median citation count of all
//! publications of the same year and subject category. The standardized
//! impact is then split among the byline: equally, or by position for
//! life-science publications. A unit's fractional standardized citations
//! (FSC) are summed over its publications, and productivity is FSC per
//! average research staff.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Affiliation, Dataset, PublicationRecord, UnitKey};
use crate::numeric::{self, CompensatedSum};

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("publication `{pub_id}`: no baseline for year {year}, category `{category}`")]
    MissingBaseline {
        pub_id: String,
        year: i32,
        category: String,
    },
    #[error("baselines csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("baselines csv: {0}")]
    Io(#[from] std::io::Error),
    #[error("baselines csv: non-positive value {value} for ({year}, {category})")]
    NonPositive { year: i32, category: String, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// The cell median was positive and is used as is.
    None,
    /// The median was 0; the cell mean is used.
    Mean,
    /// Median and mean were both 0; the scaling value is 1.
    One,
}

impl Fallback {
    fn as_str(self) -> &'static str {
        match self {
            Fallback::None => "none",
            Fallback::Mean => "mean",
            Fallback::One => "one",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineCell {
    /// Strictly positive scaling value.
    pub value: f64,
    pub fallback: Fallback,
    pub n_pubs: usize,
}

/// Median-citation scaling table keyed by (year, subject category).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Baselines {
    pub cells: BTreeMap<(i32, String), BaselineCell>,
}

impl Baselines {
    pub fn get(&self, year: i32, category: &str) -> Option<&BaselineCell> {
        // BTreeMap<(i32, String)> cannot be queried with a borrowed &str key.
        self.cells.get(&(year, category.to_string()))
    }

    pub fn contains(&self, year: i32, category: &str) -> bool {
        self.get(year, category).is_some()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ScoringError> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record(["year", "category", "value", "fallback_used", "n_pubs"])?;
        for ((year, cat), cell) in &self.cells {
            w.write_record([
                year.to_string(),
                cat.clone(),
                numeric::format_sig6(cell.value),
                cell.fallback.as_str().to_string(),
                cell.n_pubs.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self, ScoringError> {
        #[derive(Deserialize)]
        struct Row {
            year: i32,
            category: String,
            value: f64,
            fallback_used: Fallback,
            n_pubs: usize,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut cells = BTreeMap::new();
        for row in rdr.deserialize::<Row>() {
            let row = row?;
            if !(row.value > 0.0) {
                return Err(ScoringError::NonPositive {
                    year: row.year,
                    category: row.category,
                    value: row.value,
                });
            }
            cells.insert(
                (row.year, row.category),
                BaselineCell {
                    value: row.value,
                    fallback: row.fallback_used,
                    n_pubs: row.n_pubs,
                },
            );
        }
        Ok(Self { cells })
    }
}

/// Scaling value of one cell: median, else mean, else 1.
pub fn baseline_cell(citations: &[u64]) -> BaselineCell {
    let values: Vec<f64> = citations.iter().map(|&c| c as f64).collect();
    let median = numeric::median(&values).unwrap_or(0.0);
    let (value, fallback) = if median > 0.0 {
        (median, Fallback::None)
    } else {
        let mean = numeric::mean(&values).unwrap_or(0.0);
        if mean > 0.0 {
            (mean, Fallback::Mean)
        } else {
            (1.0, Fallback::One)
        }
    };
    BaselineCell {
        value,
        fallback,
        n_pubs: citations.len(),
    }
}

/// Builds baselines from every in-period publication of the dataset. A
/// publication listed under k categories contributes to each of the k cells.
pub fn compute_baselines(dataset: &Dataset) -> Baselines {
    let mut by_cell: BTreeMap<(i32, String), Vec<u64>> = BTreeMap::new();
    for p in dataset.publications_in_period() {
        for c in &p.categories {
            by_cell.entry((p.year, c.clone())).or_default().push(p.citations);
        }
    }
    Baselines {
        cells: by_cell.into_iter().map(|(k, v)| (k, baseline_cell(&v))).collect(),
    }
}

/// Citations divided by the mean of the publication's category baselines.
pub fn standardized_impact(publication: &PublicationRecord, baselines: &Baselines) -> Result<f64, ScoringError> {
    let mut sum = 0.0;
    for c in &publication.categories {
        let cell = baselines
            .get(publication.year, c)
            .ok_or_else(|| ScoringError::MissingBaseline {
                pub_id: publication.pub_id.clone(),
                year: publication.year,
                category: c.clone(),
            })?;
        sum += cell.value;
    }
    if publication.citations == 0 {
        return Ok(0.0);
    }
    let scale = sum / publication.categories.len() as f64;
    Ok(publication.citations as f64 / scale)
}

/// Credit share of each byline position; `weights[i]` belongs to position `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuthorWeights {
    pub pub_id: String,
    pub weights: Vec<f64>,
}

impl AuthorWeights {
    pub fn at_position(&self, position: u32) -> Option<f64> {
        self.weights.get((position as usize).checked_sub(1)?).copied()
    }

    pub fn total(&self) -> f64 {
        numeric::compensated_sum(self.weights.iter().copied())
    }
}

/// Byline weights for an author list of `n` authors.
///
/// Outside the life sciences every author gets `1/n`. In the life sciences
/// the first and last authors get 0.40 each when they share a university,
/// the rest splitting 0.20; otherwise first and last get 0.30, second and
/// second-to-last 0.15, and the rest split 0.10. Short bylines collapse
/// positions onto the same author.
pub fn position_weights(n: usize, life_science: bool, first_last_same_university: bool) -> Vec<f64> {
    assert!(n >= 1, "byline must have at least one author");
    if !life_science {
        return vec![1.0 / n as f64; n];
    }
    match n {
        1 => return vec![1.0],
        2 => return vec![0.5, 0.5],
        _ => {}
    }
    let mut w = vec![0.0; n];
    if first_last_same_university {
        w[0] = 0.40;
        w[n - 1] = 0.40;
        let rest = 0.20 / (n - 2) as f64;
        for x in &mut w[1..n - 1] {
            *x = rest;
        }
        return w;
    }
    match n {
        3 => {
            w.copy_from_slice(&[0.30, 0.40, 0.30]);
        }
        4 => {
            w.copy_from_slice(&[0.30, 0.20, 0.20, 0.30]);
        }
        _ => {
            w[0] = 0.30;
            w[n - 1] = 0.30;
            w[1] = 0.15;
            w[n - 2] = 0.15;
            let rest = 0.10 / (n - 4) as f64;
            for x in &mut w[2..n - 2] {
                *x = rest;
            }
        }
    }
    w
}

pub fn first_last_share_university(publication: &PublicationRecord) -> bool {
    let first = publication.authors.first().and_then(|a| a.affiliation.university());
    let last = publication.authors.last().and_then(|a| a.affiliation.university());
    matches!((first, last), (Some(f), Some(l)) if f == l)
}

pub fn author_weights(publication: &PublicationRecord) -> AuthorWeights {
    AuthorWeights {
        pub_id: publication.pub_id.clone(),
        weights: position_weights(
            publication.authors.len(),
            publication.life_science,
            first_last_share_university(publication),
        ),
    }
}

/// Combined weight of the authors affiliated with the given unit.
pub fn unit_fraction(
    publication: &PublicationRecord,
    weights: &AuthorWeights,
    university_id: &str,
    sds_id: &str,
) -> f64 {
    publication
        .authors
        .iter()
        .zip(&weights.weights)
        .filter(|(a, _)| {
            matches!(&a.affiliation, Affiliation::Unit(k) if k.university_id == university_id && k.sds_id == sds_id)
        })
        .map(|(_, w)| *w)
        .sum()
}

/// Per-unit credit of one publication, in byline order of first appearance.
pub fn unit_fractions(publication: &PublicationRecord, weights: &AuthorWeights) -> Vec<(UnitKey, f64)> {
    let mut out: Vec<(UnitKey, f64)> = Vec::new();
    for (a, &w) in publication.authors.iter().zip(&weights.weights) {
        if let Affiliation::Unit(k) = &a.affiliation {
            match out.iter_mut().find(|(u, _)| u == k) {
                Some((_, acc)) => *acc += w,
                None => out.push((k.clone(), w)),
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitScore {
    pub university_id: String,
    pub sds_id: String,
    pub fsc: f64,
    pub rs: f64,
    /// `fsc / rs`; `None` when the unit has no staff in the period.
    pub productivity: Option<f64>,
    pub n_pubs: usize,
}

impl UnitScore {
    pub fn key(&self) -> UnitKey {
        UnitKey::new(self.university_id.clone(), self.sds_id.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScientistScore {
    pub scientist_id: String,
    pub university_id: String,
    pub sds_id: String,
    pub fsc: f64,
}

/// Scores every unit that has roster presence or publication credit,
/// sorted by (university, sector).
pub fn compute_unit_scores(dataset: &Dataset, baselines: &Baselines) -> Result<Vec<UnitScore>, ScoringError> {
    let mut fsc: BTreeMap<UnitKey, (CompensatedSum, usize)> = BTreeMap::new();
    for p in dataset.publications_in_period() {
        let impact = standardized_impact(p, baselines)?;
        let weights = author_weights(p);
        for (unit, fraction) in unit_fractions(p, &weights) {
            let entry = fsc.entry(unit).or_default();
            entry.0.add(impact * fraction);
            if fraction > 0.0 {
                entry.1 += 1;
            }
        }
    }
    let staff = dataset.staff_by_unit();
    let mut keys: Vec<UnitKey> = staff.keys().cloned().collect();
    keys.extend(fsc.keys().filter(|k| !staff.contains_key(*k)).cloned());
    keys.sort();

    Ok(keys
        .into_iter()
        .map(|k| {
            let (sum, n_pubs) = fsc.get(&k).copied().unwrap_or_default();
            let fsc = sum.value();
            let rs = staff.get(&k).copied().unwrap_or(0.0);
            UnitScore {
                productivity: (rs > 0.0).then(|| fsc / rs),
                university_id: k.university_id,
                sds_id: k.sds_id,
                fsc,
                rs,
                n_pubs,
            }
        })
        .collect())
}

/// Individual FSC of every roster scientist, in roster order.
pub fn compute_scientist_scores(dataset: &Dataset, baselines: &Baselines) -> Result<Vec<ScientistScore>, ScoringError> {
    let mut sums: HashMap<&str, CompensatedSum> = HashMap::new();
    for p in dataset.publications_in_period() {
        let impact = standardized_impact(p, baselines)?;
        let weights = author_weights(p);
        for (a, w) in p.authors.iter().zip(&weights.weights) {
            if a.affiliation != Affiliation::External {
                sums.entry(a.author_id.as_str()).or_default().add(impact * w);
            }
        }
    }
    Ok(dataset
        .roster
        .iter()
        .map(|s| ScientistScore {
            scientist_id: s.scientist_id.clone(),
            university_id: s.university_id.clone(),
            sds_id: s.sds_id.clone(),
            fsc: sums.get(s.scientist_id.as_str()).map_or(0.0, CompensatedSum::value),
        })
        .collect())
}

pub fn write_unit_scores(path: &Path, scores: &[UnitScore]) -> Result<(), ScoringError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["university_id", "sds_id", "fsc", "rs", "productivity", "n_pubs"])?;
    for s in scores {
        w.write_record([
            s.university_id.clone(),
            s.sds_id.clone(),
            numeric::format_sig6(s.fsc),
            numeric::format_sig6(s.rs),
            s.productivity.map_or_else(|| "NA".to_string(), numeric::format_sig6),
            s.n_pubs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scientist_scores(path: &Path, scores: &[ScientistScore]) -> Result<(), ScoringError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["scientist_id", "university_id", "sds_id", "fsc"])?;
    for s in scores {
        w.write_record([
            s.scientist_id.clone(),
            s.university_id.clone(),
            s.sds_id.clone(),
            numeric::format_sig6(s.fsc),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AuthorRef, Period, StaffRecord};
    use std::collections::BTreeSet;

    fn author(id: &str, unit: Option<(&str, &str)>, position: u32) -> AuthorRef {
        AuthorRef {
            author_id: id.into(),
            affiliation: unit.map_or(Affiliation::External, |(u, s)| Affiliation::Unit(UnitKey::new(u, s))),
            position,
        }
    }

    fn publication(id: &str, citations: u64, cats: &[&str], authors: Vec<AuthorRef>, ls: bool) -> PublicationRecord {
        PublicationRecord {
            pub_id: id.into(),
            year: 2005,
            citations,
            categories: cats.iter().map(|c| c.to_string()).collect(),
            authors,
            life_science: ls,
        }
    }

    fn approx(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn baseline_cells() {
        assert_eq!(baseline_cell(&[0, 2, 10]).value, 2.0);
        let c = baseline_cell(&[0, 0, 0, 8]);
        assert_eq!((c.value, c.fallback), (2.0, Fallback::Mean));
        assert_eq!(baseline_cell(&[3]).value, 3.0);
        let z = baseline_cell(&[0, 0]);
        assert_eq!((z.value, z.fallback, z.n_pubs), (1.0, Fallback::One, 2));
    }

    fn baselines(cells: &[(&str, f64)]) -> Baselines {
        Baselines {
            cells: cells
                .iter()
                .map(|(c, v)| {
                    (
                        (2005, c.to_string()),
                        BaselineCell {
                            value: *v,
                            fallback: Fallback::None,
                            n_pubs: 1,
                        },
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn standardized_impact_cases() {
        let b = baselines(&[("A", 12.0), ("B", 4.0), ("C", 6.0)]);
        let solo = vec![author("x", None, 1)];
        assert_eq!(
            standardized_impact(&publication("p", 24, &["A"], solo.clone(), false), &b).unwrap(),
            2.0
        );
        assert_eq!(
            standardized_impact(&publication("p", 0, &["A"], solo.clone(), false), &b).unwrap(),
            0.0
        );
        assert_eq!(
            standardized_impact(&publication("p", 10, &["B", "C"], solo.clone(), false), &b).unwrap(),
            2.0
        );
        let err = standardized_impact(&publication("p", 1, &["Z"], solo, false), &b).unwrap_err();
        assert!(matches!(err, ScoringError::MissingBaseline { year: 2005, ref category, .. } if category == "Z"));
    }

    #[test]
    fn weights_non_life_science() {
        approx(&position_weights(4, false, false), &[0.25; 4]);
    }

    #[test]
    fn weights_life_science_shared_university() {
        let third = 0.2 / 3.0;
        approx(&position_weights(5, true, true), &[0.40, third, third, third, 0.40]);
        approx(&position_weights(3, true, true), &[0.40, 0.20, 0.40]);
    }

    #[test]
    fn weights_life_science_split() {
        approx(&position_weights(6, true, false), &[0.30, 0.15, 0.05, 0.05, 0.15, 0.30]);
        approx(&position_weights(5, true, false), &[0.30, 0.15, 0.10, 0.15, 0.30]);
        approx(&position_weights(4, true, false), &[0.30, 0.20, 0.20, 0.30]);
        approx(&position_weights(3, true, false), &[0.30, 0.40, 0.30]);
        approx(&position_weights(2, true, false), &[0.5, 0.5]);
        approx(&position_weights(1, true, true), &[1.0]);
    }

    #[test]
    fn shared_university_trigger() {
        let same = publication(
            "p",
            1,
            &["A"],
            vec![
                author("a", Some(("U1", "S1")), 1),
                author("b", None, 2),
                author("c", Some(("U1", "S2")), 3),
            ],
            true,
        );
        assert!(first_last_share_university(&same));
        let ext = publication("p", 1, &["A"], vec![author("a", None, 1), author("c", None, 2)], true);
        assert!(!first_last_share_university(&ext));
    }

    #[test]
    fn unit_fraction_cases() {
        let p = publication(
            "p",
            1,
            &["A"],
            vec![
                author("a", Some(("U1", "S1")), 1),
                author("b", Some(("U1", "S1")), 2),
                author("c", Some(("U2", "S1")), 3),
                author("d", None, 4),
            ],
            false,
        );
        let w = author_weights(&p);
        assert_eq!(unit_fraction(&p, &w, "U1", "S1"), 0.5);
        assert_eq!(unit_fraction(&p, &w, "U3", "S1"), 0.0);

        let ls = publication(
            "q",
            1,
            &["A"],
            vec![
                author("a", Some(("U1", "S1")), 1),
                author("b", None, 2),
                author("c", None, 3),
                author("d", None, 4),
                author("e", Some(("U1", "S2")), 5),
            ],
            true,
        );
        let w = author_weights(&ls);
        assert!((unit_fraction(&ls, &w, "U1", "S1") - 0.40).abs() < 1e-15);
    }

    fn full_staff(id: &str, u: &str, s: &str) -> StaffRecord {
        StaffRecord {
            scientist_id: id.into(),
            university_id: u.into(),
            sds_id: s.into(),
            headcount_by_year: (2004..=2008).map(|y| (y, 1.0)).collect(),
        }
    }

    #[test]
    fn unit_scores_simple_cases() {
        // one publication with impact 2.0 shared half with an external author
        let p = publication(
            "p",
            24,
            &["A"],
            vec![author("a", Some(("U1", "S1")), 1), author("x", None, 2)],
            false,
        );
        let ds = Dataset::new(
            vec![p],
            vec![full_staff("a", "U1", "S1"), full_staff("b", "U2", "S1")],
            Period::new(2004, 2008).unwrap(),
            BTreeSet::new(),
        );
        let b = baselines(&[("A", 12.0)]);
        let scores = compute_unit_scores(&ds, &b).unwrap();
        assert_eq!(scores.len(), 2);
        assert_eq!(scores[0].fsc, 1.0);
        assert_eq!(scores[0].rs, 1.0);
        assert_eq!(scores[0].productivity, Some(1.0));
        assert_eq!(scores[0].n_pubs, 1);
        assert_eq!(scores[1].fsc, 0.0);
        assert_eq!(scores[1].productivity, Some(0.0));
        assert_eq!(scores[1].n_pubs, 0);
    }

    #[test]
    fn unit_without_staff_has_undefined_productivity() {
        let p = publication("p", 5, &["A"], vec![author("z", Some(("U9", "S9")), 1)], false);
        let ds = Dataset::new(vec![p], vec![], Period::new(2004, 2008).unwrap(), BTreeSet::new());
        let scores = compute_unit_scores(&ds, &baselines(&[("A", 5.0)])).unwrap();
        assert_eq!(scores.len(), 1);
        assert_eq!(scores[0].fsc, 1.0);
        assert_eq!(scores[0].productivity, None);
    }

    #[test]
    fn scientist_scores_cases() {
        let solo = publication("p1", 36, &["A"], vec![author("a", Some(("U1", "S1")), 1)], false);
        let ds = Dataset::new(
            vec![solo],
            vec![full_staff("a", "U1", "S1"), full_staff("b", "U1", "S1")],
            Period::new(2004, 2008).unwrap(),
            BTreeSet::new(),
        );
        let s = compute_scientist_scores(&ds, &baselines(&[("A", 12.0)])).unwrap();
        assert_eq!(s[0].fsc, 3.0);
        assert_eq!(s[1].fsc, 0.0);
    }

    #[test]
    fn scientist_hand_sum_over_three_publications() {
        // impacts: p1 = 10/5 = 2.0 (2 equal authors -> 1.0),
        // p2 = 3/6 = 0.5 (sole -> 0.5),
        // p3 = 12/4 = 3.0, life-science 5 authors, "a" last, first at U2 -> 0.30 -> 0.9
        // total 2.4
        let p1 = publication(
            "p1",
            10,
            &["A"],
            vec![author("a", Some(("U1", "S1")), 1), author("x", None, 2)],
            false,
        );
        let p2 = publication("p2", 3, &["B"], vec![author("a", Some(("U1", "S1")), 1)], false);
        let p3 = publication(
            "p3",
            12,
            &["C"],
            vec![
                author("f", Some(("U2", "S1")), 1),
                author("g", None, 2),
                author("h", None, 3),
                author("i", None, 4),
                author("a", Some(("U1", "S1")), 5),
            ],
            true,
        );
        let ds = Dataset::new(
            vec![p1, p2, p3],
            vec![full_staff("a", "U1", "S1")],
            Period::new(2004, 2008).unwrap(),
            BTreeSet::from(["C".to_string()]),
        );
        let b = baselines(&[("A", 5.0), ("B", 6.0), ("C", 4.0)]);
        let s = compute_scientist_scores(&ds, &b).unwrap();
        assert!((s[0].fsc - 2.4).abs() < 1e-12, "{}", s[0].fsc);
    }

    #[test]
    fn baselines_from_dataset_count_multi_category_publications_in_each_cell() {
        let a = vec![author("x", None, 1)];
        let ds = Dataset::new(
            vec![
                publication("p1", 0, &["A"], a.clone(), false),
                publication("p2", 2, &["A", "B"], a.clone(), false),
                publication("p3", 10, &["A"], a.clone(), false),
                publication("p4", 7, &["B"], a, false),
            ],
            vec![],
            Period::new(2004, 2008).unwrap(),
            BTreeSet::new(),
        );
        let b = compute_baselines(&ds);
        assert_eq!(b.get(2005, "A").unwrap().value, 2.0);
        assert_eq!(b.get(2005, "A").unwrap().n_pubs, 3);
        assert_eq!(b.get(2005, "B").unwrap().value, 4.5);
    }

    #[test]
    fn baselines_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        let mut b = baselines(&[("A", 2.5), ("B", 7.0)]);
        b.cells.get_mut(&(2005, "B".to_string())).unwrap().fallback = Fallback::Mean;
        b.write_csv(&path).unwrap();
        assert_eq!(Baselines::read_csv(&path).unwrap(), b);
    }
}
