use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::classify::{self, SdsFrame};
use crate::config::AnalysisConfig;
use crate::numeric::format_sig6;
use crate::stats::AssociationResult;

use super::{FinalClass, SdsResult};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Frames(#[from] classify::ClassifyError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub const ANALYSES: [&str; 3] = ["top", "inactive", "size_prod"];
pub const TOTAL: &str = "TOTAL";

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub uda_id: String,
    pub analysis: &'static str,
    pub n_sds: usize,
    pub n_significant: usize,
}

impl SummaryRow {
    pub fn share(&self) -> f64 {
        if self.n_sds == 0 {
            0.0
        } else {
            self.n_significant as f64 / self.n_sds as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncreasingRow {
    pub sds_id: String,
    pub uda_id: String,
    pub tau_b: f64,
    pub p_value: f64,
}

impl IncreasingRow {
    /// `**` below 0.05, `*` below 0.10.
    pub fn stars(&self) -> &'static str {
        if self.p_value < 0.05 {
            "**"
        } else if self.p_value < 0.10 {
            "*"
        } else {
            ""
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub results: Vec<SdsResult>,
    pub frames: Vec<SdsFrame>,
    pub summary: Vec<SummaryRow>,
    pub increasing: Vec<IncreasingRow>,
    pub config: AnalysisConfig,
}

fn significant(a: Option<&AssociationResult>) -> bool {
    a.is_some_and(|a| a.significant)
}

impl Report {
    pub fn new(results: Vec<SdsResult>, frames: Vec<SdsFrame>, config: AnalysisConfig) -> Self {
        let mut by_uda: BTreeMap<&str, [usize; 4]> = BTreeMap::new();
        for r in &results {
            let e = by_uda.entry(r.uda_id.as_str()).or_default();
            e[0] += 1;
            e[1] += usize::from(significant(r.screen.top.as_ref()));
            e[2] += usize::from(significant(r.screen.inactive.as_ref()));
            e[3] += usize::from(significant(r.size_prod_assoc.as_ref()));
        }
        let mut summary = Vec::new();
        let mut totals = [0usize; 4];
        for (uda, counts) in &by_uda {
            for (k, analysis) in ANALYSES.iter().enumerate() {
                summary.push(SummaryRow {
                    uda_id: uda.to_string(),
                    analysis,
                    n_sds: counts[0],
                    n_significant: counts[k + 1],
                });
            }
            for (t, c) in totals.iter_mut().zip(counts) {
                *t += c;
            }
        }
        for (k, analysis) in ANALYSES.iter().enumerate() {
            summary.push(SummaryRow {
                uda_id: TOTAL.to_string(),
                analysis,
                n_sds: totals[0],
                n_significant: totals[k + 1],
            });
        }

        let increasing = results
            .iter()
            .filter(|r| r.final_class == FinalClass::IncreasingReturns)
            .map(|r| {
                let a = r.size_prod_assoc.as_ref().expect("increasing implies association");
                IncreasingRow {
                    sds_id: r.sds_id.clone(),
                    uda_id: r.uda_id.clone(),
                    tau_b: a.tau_b,
                    p_value: a.p_value,
                }
            })
            .collect();

        Self {
            results,
            frames,
            summary,
            increasing,
            config,
        }
    }

    pub fn n_sds(&self) -> usize {
        self.results.len()
    }

    pub fn count(&self, class: FinalClass) -> usize {
        self.results.iter().filter(|r| r.final_class == class).count()
    }

    pub fn result(&self, sds_id: &str) -> Option<&SdsResult> {
        self.results.iter().find(|r| r.sds_id == sds_id)
    }

    pub fn summary_row(&self, uda_id: &str, analysis: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.uda_id == uda_id && r.analysis == analysis)
    }

    /// Human-readable per-area table of significant sectors.
    pub fn summary_table(&self) -> String {
        let counts = [
            self.count(FinalClass::Excluded),
            self.count(FinalClass::ConstantReturns),
            self.count(FinalClass::IncreasingReturns),
        ];
        format_summary(&self.summary, &self.increasing, counts)
    }

    /// Writes every report file into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut written = Vec::new();

        let path = dir.join("report_summary.csv");
        let mut w = csv_writer(&path)?;
        w.write_record(["uda_id", "analysis", "n_sds", "n_significant", "share"])?;
        for r in &self.summary {
            w.write_record([
                r.uda_id.clone(),
                r.analysis.to_string(),
                r.n_sds.to_string(),
                r.n_significant.to_string(),
                format_sig6(r.share()),
            ])?;
        }
        w.flush().map_err(io_err(&path))?;
        written.push(path);

        let path = dir.join("report_increasing.csv");
        let mut w = csv_writer(&path)?;
        w.write_record(["sds_id", "uda_id", "tau_b", "p_value", "stars"])?;
        for r in &self.increasing {
            w.write_record([
                r.sds_id.clone(),
                r.uda_id.clone(),
                format_sig6(r.tau_b),
                format_sig6(r.p_value),
                r.stars().to_string(),
            ])?;
        }
        w.flush().map_err(io_err(&path))?;
        written.push(path);

        let path = dir.join("report_sds.csv");
        self.write_sds_table(&path)?;
        written.push(path);

        let path = dir.join("frames.csv");
        classify::write_frames(&path, &self.frames, self.config.top_threshold)?;
        written.push(path);

        written.extend(self.write_plots(&dir.join("plots"))?);
        Ok(written)
    }

    fn write_sds_table(&self, path: &Path) -> Result<(), ReportError> {
        let mut w = csv_writer(path)?;
        w.write_record([
            "sds_id",
            "uda_id",
            "n_units",
            "top_g",
            "top_p",
            "top_tau_b",
            "inactive_g",
            "inactive_p",
            "inactive_tau_b",
            "screened_out",
            "size_prod_a",
            "size_prod_b",
            "size_prod_c",
            "size_prod_d",
            "size_prod_g",
            "size_prod_p",
            "size_prod_tau_b",
            "npc_p",
            "loess_verdict",
            "final_class",
        ])?;
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), format_sig6);
        for r in &self.results {
            let mut rec = vec![r.sds_id.clone(), r.uda_id.clone(), r.n_units.to_string()];
            for a in [&r.screen.top, &r.screen.inactive] {
                let a = a.as_ref();
                rec.push(opt(a.map(|a| a.g_statistic)));
                rec.push(opt(a.map(|a| a.p_value)));
                rec.push(opt(a.map(|a| a.tau_b)));
            }
            rec.push(r.screen.screened_out.to_string());
            let a = r.size_prod_assoc.as_ref();
            let cells = a.map(|a| [a.table.a, a.table.b, a.table.c, a.table.d]);
            for k in 0..4 {
                rec.push(cells.map_or_else(|| "NA".to_string(), |c| c[k].to_string()));
            }
            rec.push(opt(a.map(|a| a.g_statistic)));
            rec.push(opt(a.map(|a| a.p_value)));
            rec.push(opt(a.map(|a| a.tau_b)));
            rec.push(opt(r.npc_p()));
            rec.push(r.loess_verdict().as_str().to_string());
            rec.push(r.final_class.as_str().to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(io_err(path))
    }

    /// Box-plot and LOESS curve data for every sector that reached the
    /// confirmatory stage.
    pub fn write_plots(&self, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
        let mut written = Vec::new();
        for r in &self.results {
            let Some(c) = &r.confirmation else { continue };
            if c.quartiles.is_none() && c.loess.is_none() {
                continue;
            }
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let stem = file_stem(&r.sds_id);
            if let Some(q) = &c.quartiles {
                let path = dir.join(format!("{stem}_box.csv"));
                let mut w = csv_writer(&path)?;
                w.write_record([
                    "quartile",
                    "n",
                    "size_min",
                    "size_max",
                    "q1",
                    "median",
                    "q3",
                    "whisker_lo",
                    "whisker_hi",
                    "mean",
                    "outliers",
                ])?;
                for (i, b) in q.boxes.iter().enumerate() {
                    let (lo, hi) = q.size_ranges[i];
                    w.write_record([
                        (i + 1).to_string(),
                        b.n.to_string(),
                        format_sig6(lo),
                        format_sig6(hi),
                        format_sig6(b.q1),
                        format_sig6(b.median),
                        format_sig6(b.q3),
                        format_sig6(b.whisker_lo),
                        format_sig6(b.whisker_hi),
                        format_sig6(b.mean),
                        b.outliers.iter().map(|v| format_sig6(*v)).collect::<Vec<_>>().join(";"),
                    ])?;
                }
                w.flush().map_err(io_err(&path))?;
                written.push(path);
            }
            if let Some(fit) = &c.loess {
                let path = dir.join(format!("{stem}_loess.csv"));
                let mut w = csv_writer(&path)?;
                w.write_record(["x", "fitted", "is_outlier"])?;
                let kept = fit.kept();
                let mut rows: Vec<(f64, f64, bool)> = Vec::with_capacity(fit.points.len());
                for (k, &i) in kept.iter().enumerate() {
                    rows.push((fit.points[i].0, fit.fitted[k], false));
                }
                for &i in &fit.excluded_outliers {
                    let x = fit.points[i].0;
                    rows.push((x, fit.predict(x), true));
                }
                rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
                for (x, f, out) in rows {
                    w.write_record([format_sig6(x), format_sig6(f), u8::from(out).to_string()])?;
                }
                w.flush().map_err(io_err(&path))?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, ReportError> {
    Ok(csv::Writer::from_writer(BufWriter::new(
        File::create(path).map_err(io_err(path))?,
    )))
}

/// Sector ids with path separators or odd characters made file-safe.
pub fn file_stem(sds_id: &str) -> String {
    sds_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Table behind [`Report::summary_table`]; `counts` are excluded, constant
/// and increasing sectors.
fn format_summary(summary: &[SummaryRow], increasing: &[IncreasingRow], counts: [usize; 3]) -> String {
    let mut out = String::new();
    let cell = |r: &SummaryRow| format!("{} of {} ({:.0}%)", r.n_significant, r.n_sds, 100.0 * r.share());
    let mut udas: Vec<&str> = summary.iter().map(|r| r.uda_id.as_str()).collect();
    udas.dedup();
    let width = udas.iter().map(|u| u.len()).max().unwrap_or(4).max(4);
    let _ = writeln!(
        out,
        "{:<width$}  {:>18}  {:>18}  {:>18}",
        "area", "top vs size", "inactive vs size", "productivity vs size"
    );
    for uda in udas {
        let row = |a: &str| {
            summary
                .iter()
                .find(|r| r.uda_id == uda && r.analysis == a)
                .map(cell)
                .unwrap_or_default()
        };
        let _ = writeln!(
            out,
            "{:<width$}  {:>18}  {:>18}  {:>18}",
            uda,
            row("top"),
            row("inactive"),
            row("size_prod")
        );
    }
    let _ = writeln!(
        out,
        "\nexcluded {} / constant {} / increasing {} of {} sectors",
        counts[0],
        counts[1],
        counts[2],
        counts.iter().sum::<usize>()
    );
    if !increasing.is_empty() {
        let _ = writeln!(out, "\nincreasing returns to size:");
        for r in increasing {
            let _ = writeln!(
                out,
                "  {:<12} {:<12} tau_b {:+.4}{}",
                r.sds_id,
                r.uda_id,
                r.tau_b,
                r.stars()
            );
        }
    }
    out
}

fn bad_file(path: &Path, message: String) -> ReportError {
    ReportError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, message),
    }
}

fn parse_field<T: std::str::FromStr>(path: &Path, value: &str) -> Result<T, ReportError> {
    value
        .parse()
        .map_err(|_| bad_file(path, format!("cannot parse `{value}`")))
}

/// Re-renders the summary table from the CSVs that [`Report::write`] left
/// in `dir`.
pub fn summary_from_dir(dir: &Path) -> Result<String, ReportError> {
    let path = dir.join("report_summary.csv");
    let mut summary = Vec::new();
    for row in csv::Reader::from_path(&path)?.records() {
        let row = row?;
        let analysis = ANALYSES
            .iter()
            .find(|a| **a == &row[1])
            .ok_or_else(|| bad_file(&path, format!("unknown analysis `{}`", &row[1])))?;
        summary.push(SummaryRow {
            uda_id: row[0].to_string(),
            analysis,
            n_sds: parse_field(&path, &row[2])?,
            n_significant: parse_field(&path, &row[3])?,
        });
    }

    let path = dir.join("report_increasing.csv");
    let mut increasing = Vec::new();
    for row in csv::Reader::from_path(&path)?.records() {
        let row = row?;
        increasing.push(IncreasingRow {
            sds_id: row[0].to_string(),
            uda_id: row[1].to_string(),
            tau_b: parse_field(&path, &row[2])?,
            p_value: parse_field(&path, &row[3])?,
        });
    }

    let path = dir.join("report_sds.csv");
    let mut rdr = csv::Reader::from_path(&path)?;
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h == "final_class")
        .ok_or_else(|| bad_file(&path, "no final_class column".into()))?;
    let mut counts = [0usize; 3];
    for row in rdr.records() {
        let row = row?;
        let k = [
            FinalClass::Excluded,
            FinalClass::ConstantReturns,
            FinalClass::IncreasingReturns,
        ]
        .iter()
        .position(|c| c.as_str() == &row[col])
        .ok_or_else(|| bad_file(&path, format!("unknown class `{}`", &row[col])))?;
        counts[k] += 1;
    }
    Ok(format_summary(&summary, &increasing, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::QualityScreen;

    fn result(sds: &str, uda: &str, top: bool, prod: Option<(bool, f64)>, class: FinalClass) -> SdsResult {
        let assoc = |sig: bool, tau: f64| AssociationResult {
            table: crate::classify::ContingencyTable2x2::new(1, 1, 1, 1),
            g_statistic: 0.0,
            p_value: if sig { 0.04 } else { 0.5 },
            tau_b: tau,
            degenerate: false,
            significant: sig,
        };
        SdsResult {
            sds_id: sds.into(),
            uda_id: uda.into(),
            n_units: 20,
            screen: QualityScreen {
                top: Some(assoc(top, 0.0)),
                inactive: Some(assoc(false, 0.0)),
                screened_out: top,
                not_run: false,
            },
            size_prod_assoc: prod.map(|(s, t)| assoc(s, t)),
            confirmation: None,
            final_class: class,
        }
    }

    #[test]
    fn totals_equal_sum_of_areas() {
        let results = vec![
            result("S1", "A", true, Some((true, 0.3)), FinalClass::Excluded),
            result("S2", "A", false, Some((true, 0.4)), FinalClass::IncreasingReturns),
            result("S3", "B", false, Some((false, 0.1)), FinalClass::ConstantReturns),
        ];
        let r = Report::new(results, vec![], AnalysisConfig::default());
        for a in ANALYSES {
            let total = r.summary_row(TOTAL, a).unwrap();
            let sum_sds: usize = r
                .summary
                .iter()
                .filter(|s| s.analysis == a && s.uda_id != TOTAL)
                .map(|s| s.n_sds)
                .sum();
            let sum_sig: usize = r
                .summary
                .iter()
                .filter(|s| s.analysis == a && s.uda_id != TOTAL)
                .map(|s| s.n_significant)
                .sum();
            assert_eq!(total.n_sds, sum_sds);
            assert_eq!(total.n_significant, sum_sig);
        }
        assert_eq!(r.summary_row("A", "size_prod").unwrap().n_significant, 2);
        assert_eq!(r.summary_row("A", "top").unwrap().n_significant, 1);
        assert_eq!(r.increasing.len(), 1);
        assert_eq!(r.increasing[0].stars(), "**");
        assert!(r.summary_table().contains("2 of 2 (100%)"));
    }

    #[test]
    fn saved_report_renders_the_same_table() {
        let results = vec![
            result("S1", "A", true, Some((true, 0.3)), FinalClass::Excluded),
            result("S2", "A", false, Some((true, 0.4)), FinalClass::IncreasingReturns),
            result("S3", "B", false, Some((false, 0.1)), FinalClass::ConstantReturns),
        ];
        let r = Report::new(results, vec![], AnalysisConfig::default());
        let tmp = tempfile::tempdir().unwrap();
        r.write(tmp.path()).unwrap();
        assert_eq!(summary_from_dir(tmp.path()).unwrap(), r.summary_table());
    }

    #[test]
    fn stars() {
        let row = |p| IncreasingRow {
            sds_id: "S".into(),
            uda_id: "U".into(),
            tau_b: 0.2,
            p_value: p,
        };
        assert_eq!(row(0.01).stars(), "**");
        assert_eq!(row(0.082).stars(), "*");
        assert_eq!(row(0.2).stars(), "");
    }

    #[test]
    fn file_stems_are_safe() {
        assert_eq!(file_stem("CHIM/06 x"), "CHIM_06_x");
    }
}
