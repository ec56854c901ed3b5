//! Top/inactive scientist labels and the dichotomized per-sector frames.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::{Period, StaffRecord};
use crate::numeric;
use crate::scoring::{ScientistScore, UnitScore};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("unknown variable `{0}` (expected size, productivity, top_share or inactive_share)")]
    UnknownVariable(String),
    #[error("frames csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("frames csv: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScientistLabel {
    Top,
    Inactive,
    Ordinary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScientistLabels {
    pub sds_id: String,
    pub labels: BTreeMap<String, ScientistLabel>,
    /// Individual score at the percentile rank; tops lie strictly above it.
    pub threshold: f64,
    /// Fewer than five scientists in the sector.
    pub low_support: bool,
}

impl ScientistLabels {
    pub fn get(&self, scientist_id: &str) -> Option<ScientistLabel> {
        self.labels.get(scientist_id).copied()
    }

    pub fn count(&self, label: ScientistLabel) -> usize {
        self.labels.values().filter(|&&l| l == label).count()
    }
}

/// Labels the scientists of one sector. Inactive means zero FSC; top means
/// FSC strictly above the nearest-rank `percentile` of the sector's national
/// FSC distribution, inactives included.
pub fn label_scientists(sds_id: &str, scores: &[ScientistScore], percentile: f64) -> ScientistLabels {
    let members: Vec<&ScientistScore> = scores.iter().filter(|s| s.sds_id == sds_id).collect();
    let values = numeric::sorted(&members.iter().map(|s| s.fsc).collect::<Vec<_>>());
    let threshold = numeric::nearest_rank_sorted(&values, percentile).unwrap_or(0.0);
    let labels = members
        .iter()
        .map(|s| {
            let label = if s.fsc == 0.0 {
                ScientistLabel::Inactive
            } else if s.fsc > threshold {
                ScientistLabel::Top
            } else {
                ScientistLabel::Ordinary
            };
            (s.scientist_id.clone(), label)
        })
        .collect();
    ScientistLabels {
        sds_id: sds_id.to_string(),
        labels,
        threshold,
        low_support: members.len() < 5,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameUnit {
    pub university_id: String,
    /// Average research staff.
    pub size: f64,
    pub productivity: f64,
    pub top_share: f64,
    pub inactive_share: f64,
    /// Scientists with presence in the period.
    pub n_scientists: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExclusionReason {
    NoPublications,
    NoStaff,
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExclusionReason::NoPublications => "no_publications",
            ExclusionReason::NoStaff => "no_staff",
        })
    }
}

/// Active units of one sector with national medians.
#[derive(Debug, Clone, PartialEq)]
pub struct SdsFrame {
    pub sds_id: String,
    pub units: Vec<FrameUnit>,
    pub size_median: f64,
    pub productivity_median: f64,
    pub inactive_share_median: f64,
    /// Units left out of the frame.
    pub excluded: Vec<(String, ExclusionReason)>,
}

impl SdsFrame {
    /// Frame over the given units with medians computed from them.
    pub fn from_units(sds_id: impl Into<String>, mut units: Vec<FrameUnit>) -> Self {
        units.sort_by(|a, b| a.university_id.cmp(&b.university_id));
        let med = |f: fn(&FrameUnit) -> f64| numeric::median(&units.iter().map(f).collect::<Vec<_>>()).unwrap_or(0.0);
        Self {
            sds_id: sds_id.into(),
            size_median: med(|u| u.size),
            productivity_median: med(|u| u.productivity),
            inactive_share_median: med(|u| u.inactive_share),
            units,
            excluded: Vec::new(),
        }
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn values(&self, variable: Variable) -> Vec<f64> {
        self.units.iter().map(|u| variable.value(u)).collect()
    }

    pub fn median_of(&self, variable: Variable) -> f64 {
        match variable {
            Variable::Size => self.size_median,
            Variable::Productivity => self.productivity_median,
            Variable::InactiveShare => self.inactive_share_median,
            Variable::TopShare => numeric::median(&self.values(variable)).unwrap_or(0.0),
        }
    }
}

/// Builds the frame of `sds_id`. Units with no credited publication (or no
/// staff, so no defined productivity) are listed in `excluded`.
pub fn build_frame(
    sds_id: &str,
    unit_scores: &[UnitScore],
    labels: &ScientistLabels,
    roster: &[StaffRecord],
    period: Period,
) -> SdsFrame {
    let mut members: HashMap<&str, (usize, usize, usize)> = HashMap::new();
    for s in roster.iter().filter(|s| s.sds_id == sds_id) {
        if s.presence(period) <= 0.0 {
            continue;
        }
        let e = members.entry(s.university_id.as_str()).or_default();
        e.0 += 1;
        match labels.get(&s.scientist_id) {
            Some(ScientistLabel::Top) => e.1 += 1,
            Some(ScientistLabel::Inactive) => e.2 += 1,
            _ => {}
        }
    }

    let mut units = Vec::new();
    let mut excluded = Vec::new();
    for u in unit_scores.iter().filter(|u| u.sds_id == sds_id) {
        if u.n_pubs == 0 {
            excluded.push((u.university_id.clone(), ExclusionReason::NoPublications));
            continue;
        }
        let (Some(productivity), Some(&(n, top, inactive))) = (u.productivity, members.get(u.university_id.as_str()))
        else {
            excluded.push((u.university_id.clone(), ExclusionReason::NoStaff));
            continue;
        };
        units.push(FrameUnit {
            university_id: u.university_id.clone(),
            size: u.rs,
            productivity,
            top_share: top as f64 / n as f64,
            inactive_share: inactive as f64 / n as f64,
            n_scientists: n,
        });
    }
    let mut frame = SdsFrame::from_units(sds_id, units);
    excluded.sort();
    frame.excluded = excluded;
    frame
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    Size,
    Productivity,
    TopShare,
    InactiveShare,
}

impl Variable {
    pub fn value(self, u: &FrameUnit) -> f64 {
        match self {
            Variable::Size => u.size,
            Variable::Productivity => u.productivity,
            Variable::TopShare => u.top_share,
            Variable::InactiveShare => u.inactive_share,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::Size => "size",
            Variable::Productivity => "productivity",
            Variable::TopShare => "top_share",
            Variable::InactiveShare => "inactive_share",
        }
    }
}

impl FromStr for Variable {
    type Err = ClassifyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "size" => Ok(Variable::Size),
            "productivity" => Ok(Variable::Productivity),
            "top_share" | "top" => Ok(Variable::TopShare),
            "inactive_share" | "inactive" => Ok(Variable::InactiveShare),
            other => Err(ClassifyError::UnknownVariable(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// Low iff value ≤ the sector median.
    Median,
    /// Low iff value ≤ the given constant.
    AtMost(f64),
}

/// Binary class. For size, `Low` is "small" and `High` is "large".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Low,
    High,
}

impl Level {
    pub fn index(self) -> usize {
        match self {
            Level::Low => 0,
            Level::High => 1,
        }
    }
}

/// A variable together with its cut rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dichotomy {
    pub variable: Variable,
    pub rule: ThresholdRule,
}

impl Dichotomy {
    /// Sector median for size, productivity and inactive share; the fixed
    /// `top_threshold` for top share.
    pub fn standard(variable: Variable, top_threshold: f64) -> Self {
        let rule = match variable {
            Variable::TopShare => ThresholdRule::AtMost(top_threshold),
            _ => ThresholdRule::Median,
        };
        Self { variable, rule }
    }

    pub fn class_name(&self, level: Level) -> &'static str {
        match (self.variable, level) {
            (Variable::Size, Level::Low) => "small",
            (Variable::Size, Level::High) => "large",
            (_, Level::Low) => "low",
            (_, Level::High) => "high",
        }
    }
}

/// Per-unit class of `variable`; ties with the cut go to `Low`.
pub fn dichotomize(frame: &SdsFrame, variable: Variable, rule: ThresholdRule) -> Vec<Level> {
    let cut = match rule {
        ThresholdRule::Median => frame.median_of(variable),
        ThresholdRule::AtMost(t) => t,
    };
    frame
        .units
        .iter()
        .map(|u| {
            if variable.value(u) <= cut {
                Level::Low
            } else {
                Level::High
            }
        })
        .collect()
}

/// Like [`dichotomize`], parsing the variable by name.
pub fn dichotomize_named(frame: &SdsFrame, variable: &str, rule: ThresholdRule) -> Result<Vec<Level>, ClassifyError> {
    Ok(dichotomize(frame, variable.parse()?, rule))
}

/// 2×2 frequency table. Rows are variable A (low, high); columns are
/// variable B (small/low, large/high):
///
/// ```text
///            B low   B high
/// A low        a       b
/// A high       c       d
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    pub row_label: String,
    pub col_label: String,
}

impl ContingencyTable2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self {
            a,
            b,
            c,
            d,
            row_label: "A".into(),
            col_label: "B".into(),
        }
    }

    pub fn with_labels(mut self, row: impl Into<String>, col: impl Into<String>) -> Self {
        self.row_label = row.into();
        self.col_label = col.into();
        self
    }

    /// Counts paired class labels.
    pub fn from_levels(rows: &[Level], cols: &[Level]) -> Self {
        assert_eq!(rows.len(), cols.len(), "paired labels required");
        let mut cells = [[0u64; 2]; 2];
        for (r, c) in rows.iter().zip(cols) {
            cells[r.index()][c.index()] += 1;
        }
        Self::new(cells[0][0], cells[0][1], cells[1][0], cells[1][1])
    }

    pub fn cells(&self) -> [[u64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn row_totals(&self) -> [u64; 2] {
        [self.a + self.b, self.c + self.d]
    }

    pub fn col_totals(&self) -> [u64; 2] {
        [self.a + self.c, self.b + self.d]
    }

    /// Expected counts under independence, `row_total * col_total / n`.
    pub fn expected(&self) -> [[f64; 2]; 2] {
        let n = self.n() as f64;
        let r = self.row_totals();
        let c = self.col_totals();
        let mut e = [[0.0; 2]; 2];
        for (i, row) in e.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = if n > 0.0 { r[i] as f64 * c[j] as f64 / n } else { 0.0 };
            }
        }
        e
    }

    pub fn transpose(&self) -> Self {
        Self {
            a: self.a,
            b: self.c,
            c: self.b,
            d: self.d,
            row_label: self.col_label.clone(),
            col_label: self.row_label.clone(),
        }
    }

    pub fn swap_columns(&self) -> Self {
        Self {
            a: self.b,
            b: self.a,
            c: self.d,
            d: self.c,
            ..self.clone()
        }
    }
}

impl fmt::Display for ContingencyTable2x2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = self.expected();
        let r = self.row_totals();
        let c = self.col_totals();
        writeln!(
            f,
            "{:>14} | {:>14} {:>14} | {:>6}",
            format!("{} \\ {}", self.row_label, self.col_label),
            "low/small",
            "high/large",
            "total"
        )?;
        writeln!(
            f,
            "{:>14} | {:>6} ({:>5.1}) {:>6} ({:>5.1}) | {:>6}",
            "low", self.a, e[0][0], self.b, e[0][1], r[0]
        )?;
        writeln!(
            f,
            "{:>14} | {:>6} ({:>5.1}) {:>6} ({:>5.1}) | {:>6}",
            "high", self.c, e[1][0], self.d, e[1][1], r[1]
        )?;
        write!(f, "{:>14} | {:>14} {:>14} | {:>6}", "total", c[0], c[1], self.n())
    }
}

/// Cross-tabulates two variables of a frame: rows `row`, columns `col`.
pub fn contingency(frame: &SdsFrame, row: Dichotomy, col: Dichotomy) -> ContingencyTable2x2 {
    let rows = dichotomize(frame, row.variable, row.rule);
    let cols = dichotomize(frame, col.variable, col.rule);
    ContingencyTable2x2::from_levels(&rows, &cols).with_labels(row.variable.name(), col.variable.name())
}

/// Writes `frames.csv` with the standard dichotomy of every variable.
pub fn write_frames(path: &Path, frames: &[SdsFrame], top_threshold: f64) -> Result<(), ClassifyError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record([
        "sds_id",
        "university_id",
        "size",
        "productivity",
        "top_share",
        "inactive_share",
        "size_class",
        "prod_class",
        "top_class",
        "inactive_class",
    ])?;
    let vars = [
        Variable::Size,
        Variable::Productivity,
        Variable::TopShare,
        Variable::InactiveShare,
    ];
    for frame in frames {
        let classes: Vec<(Dichotomy, Vec<Level>)> = vars
            .iter()
            .map(|&v| {
                let d = Dichotomy::standard(v, top_threshold);
                (d, dichotomize(frame, v, d.rule))
            })
            .collect();
        for (i, u) in frame.units.iter().enumerate() {
            let mut rec = vec![
                frame.sds_id.clone(),
                u.university_id.clone(),
                numeric::format_sig6(u.size),
                numeric::format_sig6(u.productivity),
                numeric::format_sig6(u.top_share),
                numeric::format_sig6(u.inactive_share),
            ];
            rec.extend(classes.iter().map(|(d, l)| d.class_name(l[i]).to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(id: &str, fsc: f64) -> ScientistScore {
        ScientistScore {
            scientist_id: id.into(),
            university_id: "U".into(),
            sds_id: "S".into(),
            fsc,
        }
    }

    #[test]
    fn top_scientists_above_nearest_rank_80th() {
        let scores: Vec<_> = (1..=10).map(|i| score(&format!("s{i:02}"), i as f64)).collect();
        let l = label_scientists("S", &scores, 0.8);
        assert_eq!(l.threshold, 8.0);
        let tops: Vec<_> = l
            .labels
            .iter()
            .filter(|(_, &v)| v == ScientistLabel::Top)
            .map(|(k, _)| k.as_str())
            .collect();
        assert_eq!(tops, vec!["s09", "s10"]);
        assert!(!l.low_support);
    }

    #[test]
    fn nil_fsc_is_inactive_never_top() {
        let scores = vec![score("a", 0.0), score("b", 0.0), score("c", 0.0)];
        let l = label_scientists("S", &scores, 0.8);
        assert_eq!(l.count(ScientistLabel::Inactive), 3);
        assert_eq!(l.count(ScientistLabel::Top), 0);
        assert!(l.low_support);

        let scores = vec![score("a", 0.0), score("b", 1.0), score("c", 2.0)];
        let l = label_scientists("S", &scores, 0.8);
        assert_eq!(l.get("a"), Some(ScientistLabel::Inactive));
    }

    #[test]
    fn labels_ignore_other_sectors() {
        let mut scores = vec![score("a", 1.0)];
        scores.push(ScientistScore {
            sds_id: "T".into(),
            ..score("b", 5.0)
        });
        let l = label_scientists("S", &scores, 0.8);
        assert_eq!(l.labels.len(), 1);
    }

    fn unit(id: &str, size: f64, prod: f64, top: f64, inactive: f64) -> FrameUnit {
        FrameUnit {
            university_id: id.into(),
            size,
            productivity: prod,
            top_share: top,
            inactive_share: inactive,
            n_scientists: size.round() as usize,
        }
    }

    #[test]
    fn frame_medians() {
        let f = SdsFrame::from_units(
            "S",
            vec![
                unit("u1", 2.0, 1.0, 0.0, 0.0),
                unit("u2", 4.0, 2.0, 0.0, 0.5),
                unit("u3", 6.0, 3.0, 0.0, 0.1),
            ],
        );
        assert_eq!(f.size_median, 4.0);
        assert_eq!(f.productivity_median, 2.0);
        assert_eq!(f.inactive_share_median, 0.1);
    }

    #[test]
    fn build_frame_shares_and_exclusions() {
        let period = Period::new(2004, 2008).unwrap();
        let staff = |id: &str, u: &str| StaffRecord {
            scientist_id: id.into(),
            university_id: u.into(),
            sds_id: "S".into(),
            headcount_by_year: (2004..=2008).map(|y| (y, 1.0)).collect(),
        };
        let roster = vec![
            staff("a", "U1"),
            staff("b", "U1"),
            staff("c", "U1"),
            staff("d", "U1"),
            staff("e", "U2"),
        ];
        let labels = ScientistLabels {
            sds_id: "S".into(),
            labels: BTreeMap::from([
                ("a".into(), ScientistLabel::Top),
                ("b".into(), ScientistLabel::Ordinary),
                ("c".into(), ScientistLabel::Inactive),
                ("d".into(), ScientistLabel::Ordinary),
                ("e".into(), ScientistLabel::Inactive),
            ]),
            threshold: 1.0,
            low_support: false,
        };
        let scores = vec![
            UnitScore {
                university_id: "U1".into(),
                sds_id: "S".into(),
                fsc: 4.0,
                rs: 4.0,
                productivity: Some(1.0),
                n_pubs: 3,
            },
            UnitScore {
                university_id: "U2".into(),
                sds_id: "S".into(),
                fsc: 0.0,
                rs: 1.0,
                productivity: Some(0.0),
                n_pubs: 0,
            },
        ];
        let f = build_frame("S", &scores, &labels, &roster, period);
        assert_eq!(f.n_units(), 1);
        assert_eq!(f.units[0].top_share, 0.25);
        assert_eq!(f.units[0].inactive_share, 0.25);
        assert_eq!(f.excluded, vec![("U2".to_string(), ExclusionReason::NoPublications)]);
    }

    #[test]
    fn ties_go_to_low() {
        let f = SdsFrame::from_units(
            "S",
            vec![
                unit("u1", 1.0, 1.0, 0.20, 0.0),
                unit("u2", 2.0, 2.0, 0.2001, 0.0),
                unit("u3", 3.0, 3.0, 0.0, 0.0),
            ],
        );
        assert_eq!(
            dichotomize(&f, Variable::Size, ThresholdRule::Median),
            vec![Level::Low, Level::Low, Level::High]
        );
        assert_eq!(
            dichotomize(&f, Variable::TopShare, ThresholdRule::AtMost(0.20)),
            vec![Level::Low, Level::High, Level::Low]
        );
        let same = SdsFrame::from_units(
            "S",
            (0..5).map(|i| unit(&format!("u{i}"), 3.0, 1.0, 0.0, 0.0)).collect(),
        );
        assert!(dichotomize(&same, Variable::Size, ThresholdRule::Median)
            .iter()
            .all(|&l| l == Level::Low));
    }

    #[test]
    fn unknown_variable_name() {
        let f = SdsFrame::from_units("S", vec![unit("u1", 1.0, 1.0, 0.0, 0.0)]);
        assert!(matches!(
            dichotomize_named(&f, "height", ThresholdRule::Median),
            Err(ClassifyError::UnknownVariable(_))
        ));
        assert!(dichotomize_named(&f, "size", ThresholdRule::Median).is_ok());
    }

    #[test]
    fn mechanics_table_layout() {
        // 11 low/small, 11 low/large, 6 high/small, 7 high/large
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        for (n, r, c) in [
            (11, Level::Low, Level::Low),
            (11, Level::Low, Level::High),
            (6, Level::High, Level::Low),
            (7, Level::High, Level::High),
        ] {
            rows.extend(std::iter::repeat_n(r, n));
            cols.extend(std::iter::repeat_n(c, n));
        }
        let t = ContingencyTable2x2::from_levels(&rows, &cols);
        assert_eq!((t.a, t.b, t.c, t.d), (11, 11, 6, 7));
        assert_eq!(t.row_totals(), [22, 13]);
        assert_eq!(t.col_totals(), [17, 18]);
        let e = t.expected();
        let rounded: Vec<i64> = e.iter().flatten().map(|x| x.round() as i64).collect();
        assert_eq!(rounded, vec![11, 11, 6, 7]);
    }

    #[test]
    fn all_small_low_table() {
        let f = SdsFrame::from_units(
            "S",
            (0..20).map(|i| unit(&format!("u{i:02}"), 5.0, 1.0, 0.0, 0.0)).collect(),
        );
        let t = contingency(
            &f,
            Dichotomy::standard(Variable::TopShare, 0.2),
            Dichotomy::standard(Variable::Size, 0.2),
        );
        assert_eq!((t.a, t.b, t.c, t.d), (20, 0, 0, 0));
    }
}
