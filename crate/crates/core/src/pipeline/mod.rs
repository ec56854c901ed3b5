//! Two-stage returns-to-size analysis over every sector.
//!
//! 1. Quality screen: is the share of top or inactive scientists associated
//!    with unit size? If so, a size/productivity association could reflect
//!    labour quality rather than scale, and the sector is excluded.
//! 2. Dependence analysis of productivity against size on the dichotomized
//!    frame, confirmed by a quartile permutation test and a LOESS curve
//!    refitted without residual outliers.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::classify::{self, Dichotomy, SdsFrame, Variable};
use crate::config::{AnalysisConfig, ConfirmRule, ProjectConfig};
use crate::dataset::Dataset;
use crate::numeric;
use crate::scoring::{self, Baselines, ScientistScore, ScoringError, UnitScore};
use crate::stats::{self, AssociationResult, LoessFit, QuartileGroups, StatsError};

mod report;

pub use report::{summary_from_dir, IncreasingRow, Report, ReportError, SummaryRow};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dataset has no publications inside the period")]
    EmptyDataset,
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityScreen {
    pub top: Option<AssociationResult>,
    pub inactive: Option<AssociationResult>,
    pub screened_out: bool,
    /// The frame had fewer than `min_units` units.
    pub not_run: bool,
}

/// Association of top-scientist share and of inactive share with size.
/// Frames below `min_units` are not tested and count as screened out.
pub fn stage_quality_screen(frame: &SdsFrame, cfg: &AnalysisConfig) -> QualityScreen {
    if frame.n_units() < cfg.min_units {
        return QualityScreen {
            top: None,
            inactive: None,
            screened_out: true,
            not_run: true,
        };
    }
    let size = Dichotomy::standard(Variable::Size, cfg.top_threshold);
    let run = |v: Variable| {
        let table = classify::contingency(frame, Dichotomy::standard(v, cfg.top_threshold), size);
        stats::associate(table, cfg.alpha, cfg.williams_correction)
    };
    let top = run(Variable::TopShare);
    let inactive = run(Variable::InactiveShare);
    QualityScreen {
        screened_out: top.significant || inactive.significant,
        top: Some(top),
        inactive: Some(inactive),
        not_run: false,
    }
}

/// Dichotomized productivity × size association.
pub fn stage_size_productivity(frame: &SdsFrame, cfg: &AnalysisConfig) -> AssociationResult {
    let table = classify::contingency(
        frame,
        Dichotomy::standard(Variable::Productivity, cfg.top_threshold),
        Dichotomy::standard(Variable::Size, cfg.top_threshold),
    );
    stats::associate(table, cfg.alpha, cfg.williams_correction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoessVerdict {
    Increasing,
    Constant,
    NotRun,
}

impl LoessVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            LoessVerdict::Increasing => "increasing",
            LoessVerdict::Constant => "constant",
            LoessVerdict::NotRun => "not_run",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Confirmation {
    pub npc_p: Option<f64>,
    pub loess_verdict: LoessVerdict,
    /// Verdict of the first fit, before outliers were removed.
    pub loess_verdict_all_points: LoessVerdict,
    pub quartiles: Option<QuartileGroups>,
    /// Refit without outliers.
    pub loess: Option<LoessFit>,
}

/// Minimum frame size for the confirmatory stage.
pub const MIN_CONFIRM_UNITS: usize = 8;

/// Increasing iff the curve rises between the 25th and 75th size
/// percentiles of the fitted points by more than `practical_threshold`
/// relative to its value at the 25th percentile.
pub fn loess_verdict(fit: &LoessFit, practical_threshold: f64) -> LoessVerdict {
    let sizes = numeric::sorted(&fit.kept().iter().map(|&i| fit.points[i].0).collect::<Vec<_>>());
    let (Some(lo), Some(hi)) = (
        numeric::quantile_sorted(&sizes, 0.25),
        numeric::quantile_sorted(&sizes, 0.75),
    ) else {
        return LoessVerdict::NotRun;
    };
    let f_lo = fit.predict(lo);
    let f_hi = fit.predict(hi);
    if !(f_lo.is_finite() && f_hi.is_finite()) {
        return LoessVerdict::NotRun;
    }
    if hi > lo && f_hi > f_lo && f_hi - f_lo > practical_threshold * f_lo.abs() {
        LoessVerdict::Increasing
    } else {
        LoessVerdict::Constant
    }
}

/// Quartile permutation test and outlier-robust LOESS on (size, productivity).
pub fn stage_confirm(frame: &SdsFrame, cfg: &AnalysisConfig, seed: u64) -> Result<Confirmation, StatsError> {
    let not_run = Confirmation {
        npc_p: None,
        loess_verdict: LoessVerdict::NotRun,
        loess_verdict_all_points: LoessVerdict::NotRun,
        quartiles: None,
        loess: None,
    };
    if frame.n_units() < MIN_CONFIRM_UNITS {
        return Ok(not_run);
    }
    let points: Vec<(f64, f64)> = frame.units.iter().map(|u| (u.size, u.productivity)).collect();

    let quartiles = stats::quartile_split(&points)?;
    let npc_p = stats::npc_test(&quartiles.groups, cfg.permutations, seed)?;

    let first = match stats::loess_fit(&points, cfg.loess_span, cfg.loess_degree) {
        Ok(f) => f,
        Err(StatsError::TooFewPoints { .. }) => {
            return Ok(Confirmation {
                npc_p: Some(npc_p),
                quartiles: Some(quartiles),
                ..not_run
            })
        }
        Err(e) => return Err(e),
    };
    let all_points = loess_verdict(&first, cfg.practical_threshold);
    let outliers = stats::detect_outliers_residual(&first, cfg.outlier_k);
    let (loess, verdict) = match stats::loess_fit_excluding(&points, cfg.loess_span, cfg.loess_degree, outliers) {
        Ok(refit) => {
            let v = loess_verdict(&refit, cfg.practical_threshold);
            (Some(refit), v)
        }
        Err(StatsError::TooFewPoints { .. }) => (None, LoessVerdict::NotRun),
        Err(e) => return Err(e),
    };
    Ok(Confirmation {
        npc_p: Some(npc_p),
        loess_verdict: verdict,
        loess_verdict_all_points: all_points,
        quartiles: Some(quartiles),
        loess,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FinalClass {
    Excluded,
    ConstantReturns,
    IncreasingReturns,
}

impl FinalClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FinalClass::Excluded => "excluded",
            FinalClass::ConstantReturns => "constant_returns",
            FinalClass::IncreasingReturns => "increasing_returns",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdsResult {
    pub sds_id: String,
    pub uda_id: String,
    pub n_units: usize,
    pub screen: QualityScreen,
    pub size_prod_assoc: Option<AssociationResult>,
    pub confirmation: Option<Confirmation>,
    pub final_class: FinalClass,
}

impl SdsResult {
    pub fn screened_out(&self) -> bool {
        self.screen.screened_out
    }

    pub fn npc_p(&self) -> Option<f64> {
        self.confirmation.as_ref().and_then(|c| c.npc_p)
    }

    pub fn loess_verdict(&self) -> LoessVerdict {
        self.confirmation
            .as_ref()
            .map_or(LoessVerdict::NotRun, |c| c.loess_verdict)
    }
}

fn confirmed(rule: ConfirmRule, alpha: f64, c: Option<&Confirmation>) -> bool {
    let npc = c.and_then(|c| c.npc_p).is_some_and(|p| p < alpha);
    let loess = c.is_some_and(|c| c.loess_verdict == LoessVerdict::Increasing);
    match rule {
        ConfirmRule::DependenceOnly => true,
        ConfirmRule::NpcOrLoess => npc || loess,
        ConfirmRule::NpcAndLoess => npc && loess,
        ConfirmRule::NpcOnly => npc,
        ConfirmRule::LoessOnly => loess,
    }
}

/// Runs both stages on one frame. The size/productivity association is
/// computed for every frame with at least `min_units` units, screened or not.
pub fn analyze_frame(frame: &SdsFrame, uda_id: &str, cfg: &AnalysisConfig, seed: u64) -> Result<SdsResult, StatsError> {
    let screen = stage_quality_screen(frame, cfg);
    let size_prod = (!screen.not_run).then(|| stage_size_productivity(frame, cfg));
    let confirmation = if screen.screened_out {
        None
    } else {
        Some(stage_confirm(frame, cfg, seed)?)
    };
    let final_class = if screen.screened_out {
        FinalClass::Excluded
    } else {
        let positive = size_prod.as_ref().is_some_and(|a| a.significant && a.tau_b > 0.0);
        if positive && confirmed(cfg.confirm_rule, cfg.alpha, confirmation.as_ref()) {
            FinalClass::IncreasingReturns
        } else {
            FinalClass::ConstantReturns
        }
    };
    Ok(SdsResult {
        sds_id: frame.sds_id.clone(),
        uda_id: uda_id.to_string(),
        n_units: frame.n_units(),
        screen,
        size_prod_assoc: size_prod,
        confirmation,
        final_class,
    })
}

/// Scores of a dataset, computed once and shared by the later stages.
#[derive(Debug, Clone)]
pub struct Scores {
    pub baselines: Baselines,
    pub units: Vec<UnitScore>,
    pub scientists: Vec<ScientistScore>,
}

pub fn score_dataset(dataset: &Dataset) -> Result<Scores, PipelineError> {
    if dataset.publications_in_period().next().is_none() {
        return Err(PipelineError::EmptyDataset);
    }
    let baselines = scoring::compute_baselines(dataset);
    let units = scoring::compute_unit_scores(dataset, &baselines)?;
    let scientists = scoring::compute_scientist_scores(dataset, &baselines)?;
    Ok(Scores {
        baselines,
        units,
        scientists,
    })
}

/// One frame per sector, sorted by sector id.
pub fn build_frames(dataset: &Dataset, scores: &Scores, cfg: &AnalysisConfig) -> Vec<SdsFrame> {
    let mut scientists: BTreeMap<&str, Vec<ScientistScore>> = BTreeMap::new();
    for s in &scores.scientists {
        scientists.entry(s.sds_id.as_str()).or_default().push(s.clone());
    }
    let mut units: BTreeMap<&str, Vec<UnitScore>> = BTreeMap::new();
    for u in &scores.units {
        units.entry(u.sds_id.as_str()).or_default().push(u.clone());
    }
    let mut roster: BTreeMap<&str, Vec<crate::dataset::StaffRecord>> = BTreeMap::new();
    for s in &dataset.roster {
        roster.entry(s.sds_id.as_str()).or_default().push(s.clone());
    }
    let sds_ids = dataset.sds_ids();
    sds_ids
        .par_iter()
        .map(|sds| {
            let sds = sds.as_str();
            let labels = classify::label_scientists(
                sds,
                scientists.get(sds).map_or(&[][..], Vec::as_slice),
                cfg.top_percentile,
            );
            classify::build_frame(
                sds,
                units.get(sds).map_or(&[][..], Vec::as_slice),
                &labels,
                roster.get(sds).map_or(&[][..], Vec::as_slice),
                dataset.period,
            )
        })
        .collect()
}

/// Analyses every frame; results are ordered by sector id and do not
/// depend on the thread count.
pub fn analyze_frames(frames: &[SdsFrame], config: &ProjectConfig) -> Result<Vec<SdsResult>, PipelineError> {
    let cfg = &config.analysis;
    let mut results: Vec<SdsResult> = frames
        .par_iter()
        .map(|f| {
            let seed = numeric::derive_seed(cfg.seed, &f.sds_id);
            analyze_frame(f, config.uda_of(&f.sds_id), cfg, seed)
        })
        .collect::<Result<_, _>>()?;
    results.sort_by(|a, b| a.sds_id.cmp(&b.sds_id));
    Ok(results)
}

/// Scoring, classification and both analysis stages for every sector.
pub fn run_analysis(dataset: &Dataset, config: &ProjectConfig) -> Result<Report, PipelineError> {
    let scores = score_dataset(dataset)?;
    let frames = build_frames(dataset, &scores, &config.analysis);
    let results = analyze_frames(&frames, config)?;
    Ok(Report::new(results, frames, config.analysis.clone()))
}
