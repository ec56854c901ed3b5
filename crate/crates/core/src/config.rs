//! Project configuration: data locations, study period, life-science
//! categories, analysis thresholds and the sector → area mapping.
//!
//! Stored as TOML:
//!
//! ```toml
//! [data]
//! publications = "publications.jsonl"
//! roster = "roster.csv"
//! period_start = 2004
//! period_end = 2008
//! life_science_categories = ["BIOCHEM"]
//!
//! [analysis]
//! alpha = 0.1
//! seed = 42
//!
//! [uda]
//! CHIM06 = "Chemistry"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, Dataset, DatasetError, Period};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("sector/area map: {0}")]
    UdaMap(#[from] csv::Error),
    #[error(transparent)]
    Period(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConfirmRule {
    /// Significant positive dependence alone.
    DependenceOnly,
    /// Dependence plus either the quartile permutation test or LOESS.
    #[default]
    NpcOrLoess,
    /// Dependence plus both confirmations.
    NpcAndLoess,
    NpcOnly,
    LoessOnly,
}

impl std::str::FromStr for ConfirmRule {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "dependence_only" => ConfirmRule::DependenceOnly,
            "npc_or_loess" => ConfirmRule::NpcOrLoess,
            "npc_and_loess" => ConfirmRule::NpcAndLoess,
            "npc_only" => ConfirmRule::NpcOnly,
            "loess_only" => ConfirmRule::LoessOnly,
            other => return Err(ConfigError::Invalid(format!("unknown confirm rule `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Significance level for every association test.
    pub alpha: f64,
    /// Top-scientist share above which a unit counts as "high".
    pub top_threshold: f64,
    /// Percentile of individual scores above which a scientist is "top".
    pub top_percentile: f64,
    pub loess_span: f64,
    pub loess_degree: u8,
    pub outlier_k: f64,
    pub permutations: usize,
    pub min_units: usize,
    pub seed: u64,
    /// Minimum relative rise of the LOESS curve across the interquartile size range.
    pub practical_threshold: f64,
    pub confirm_rule: ConfirmRule,
    pub williams_correction: bool,
    /// Optional CSV `sds_id,uda_id`, merged over the inline `[uda]` table.
    pub uda_map: Option<PathBuf>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            top_threshold: 0.20,
            top_percentile: 0.80,
            loess_span: 0.75,
            loess_degree: 1,
            outlier_k: 3.0,
            permutations: 9999,
            min_units: 10,
            seed: 20110101,
            practical_threshold: 0.05,
            confirm_rule: ConfirmRule::NpcOrLoess,
            williams_correction: false,
            uda_map: None,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must be in (0, 1), got {}", self.alpha));
        }
        if !(self.loess_span > 0.0 && self.loess_span <= 1.0) {
            return bad(format!("loess_span must be in (0, 1], got {}", self.loess_span));
        }
        if !(1..=2).contains(&self.loess_degree) {
            return bad(format!("loess_degree must be 1 or 2, got {}", self.loess_degree));
        }
        if self.permutations < 999 {
            return bad(format!("permutations must be >= 999, got {}", self.permutations));
        }
        if !(0.0..=1.0).contains(&self.top_threshold) {
            return bad(format!("top_threshold must be in [0, 1], got {}", self.top_threshold));
        }
        if !(self.top_percentile > 0.0 && self.top_percentile < 1.0) {
            return bad(format!("top_percentile must be in (0, 1), got {}", self.top_percentile));
        }
        if !(self.outlier_k > 0.0) {
            return bad(format!("outlier_k must be positive, got {}", self.outlier_k));
        }
        if self.practical_threshold < 0.0 {
            return bad("practical_threshold must be non-negative".into());
        }
        if self.min_units < 2 {
            return bad("min_units must be at least 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_publications")]
    pub publications: PathBuf,
    #[serde(default = "default_roster")]
    pub roster: PathBuf,
    pub period_start: i32,
    pub period_end: i32,
    #[serde(default)]
    pub life_science_categories: BTreeSet<String>,
}

fn default_publications() -> PathBuf {
    PathBuf::from("publications.jsonl")
}

fn default_roster() -> PathBuf {
    PathBuf::from("roster.csv")
}

impl DataConfig {
    pub fn period(&self) -> Result<Period, DatasetError> {
        Period::new(self.period_start, self.period_end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Sector → disciplinary area.
    #[serde(default)]
    pub uda: BTreeMap<String, String>,
}

impl ProjectConfig {
    pub fn new(period: Period) -> Self {
        Self {
            data: DataConfig {
                publications: default_publications(),
                roster: default_roster(),
                period_start: period.start,
                period_end: period.end,
                life_science_categories: BTreeSet::new(),
            },
            analysis: AnalysisConfig::default(),
            uda: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Loads a config file. Relative data paths are resolved against the
    /// file's directory and any external sector/area map is merged in.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.data.publications = resolve(base, &cfg.data.publications);
        cfg.data.roster = resolve(base, &cfg.data.roster);
        if let Some(map) = cfg.analysis.uda_map.take() {
            let map = resolve(base, &map);
            for (sds, uda) in read_uda_map(&map)? {
                cfg.uda.entry(sds).or_insert(uda);
            }
            cfg.analysis.uda_map = Some(map);
        }
        cfg.data.period()?;
        cfg.analysis.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        fs::write(path, self.to_toml()).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads the publications and roster named in `[data]`.
    pub fn load_dataset(&self) -> Result<Dataset, DatasetError> {
        let period = self.data.period()?;
        let lifesci = &self.data.life_science_categories;
        let publications = dataset::load_publications(&self.data.publications, lifesci)?;
        let roster = dataset::load_roster(&self.data.roster)?;
        Ok(Dataset::new(publications, roster, period, lifesci.clone()))
    }

    pub fn uda_of<'a>(&'a self, sds_id: &str) -> &'a str {
        self.uda.get(sds_id).map_or("UNASSIGNED", String::as_str)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Deserialize)]
struct UdaRow {
    sds_id: String,
    uda_id: String,
}

/// Reads a `sds_id,uda_id` CSV.
pub fn read_uda_map(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<UdaRow>() {
        let row = row?;
        out.insert(row.sds_id, row.uda_id);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_published_thresholds() {
        let a = AnalysisConfig::default();
        assert_eq!(a.alpha, 0.1);
        assert_eq!(a.top_threshold, 0.20);
        assert_eq!(a.loess_span, 0.75);
        assert_eq!(a.loess_degree, 1);
        assert!(a.validate().is_ok());
    }

    #[test]
    fn parses_minimal_toml() {
        let cfg = ProjectConfig::from_toml(
            "[data]\nperiod_start = 2004\nperiod_end = 2008\nlife_science_categories = [\"MED\"]\n\n[uda]\nS1 = \"Chemistry\"\n",
        )
        .unwrap();
        assert_eq!(cfg.data.period().unwrap(), Period { start: 2004, end: 2008 });
        assert!(cfg.data.life_science_categories.contains("MED"));
        assert_eq!(cfg.uda_of("S1"), "Chemistry");
        assert_eq!(cfg.uda_of("S2"), "UNASSIGNED");
        assert_eq!(cfg.analysis, AnalysisConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ProjectConfig::new(Period::new(2004, 2008).unwrap());
        cfg.analysis.alpha = 0.05;
        cfg.uda.insert("S1".into(), "Physics".into());
        cfg.data.life_science_categories.insert("MED".into());
        let back = ProjectConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let a = AnalysisConfig {
            alpha: 1.0,
            ..AnalysisConfig::default()
        };
        assert!(a.validate().is_err());
        let a = AnalysisConfig {
            loess_span: 0.0,
            ..AnalysisConfig::default()
        };
        assert!(a.validate().is_err());
        let a = AnalysisConfig {
            permutations: 500,
            ..AnalysisConfig::default()
        };
        assert!(a.validate().is_err());
    }

    #[test]
    fn unknown_confirm_rule() {
        assert!("npc_or_loess".parse::<ConfirmRule>().is_ok());
        assert!("whatever".parse::<ConfirmRule>().is_err());
    }
}
