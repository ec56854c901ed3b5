//! Synthetic national research systems with planted returns to size.
//!
//! Every sector is generated from its own random stream, so worlds are
//! reproducible per seed and sectors can be built in parallel. The unit
//! output model is
//!
//! ```text
//! E[lead papers of scientist k in unit u] = rate · years · (RS_u / ref)^(β − 1) · noise_u · q_k / E[q]
//! ```
//!
//! so unit output grows as `RS^β` and per-capita productivity as `RS^(β−1)`.
//! Quality `q` comes from a three-way mixture (inactive, ordinary, star).
//! Stars are a fixed share of each sector; when the coupling `rho` is
//! non-zero, stars gather in large units and inactive scientists in small
//! ones.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ProjectConfig};
use crate::dataset::{
    self, Affiliation, AuthorRef, Dataset, DatasetError, Period, PublicationRecord, StaffRecord, UnitKey,
};
use crate::numeric::derive_seed;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible world: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Sectors per disciplinary area in the reference national system.
pub const AREA_WEIGHTS: [usize; 9] = [9, 8, 11, 12, 19, 47, 28, 7, 42];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub n_sds: usize,
    pub n_universities: usize,
    /// Probability that a university hosts a unit of a given sector.
    pub presence_prob: f64,
    /// Median headcount of a unit (log-normal).
    pub size_median: f64,
    pub size_sigma: f64,
    pub size_min: usize,
    pub size_max: usize,
    pub beta_default: f64,
    pub beta_overrides: BTreeMap<String, f64>,
    /// Coupling between unit size and scientist quality, in [-1, 1].
    pub rho: f64,
    /// Lead papers per scientist-year at the reference size.
    pub rate: f64,
    /// Sigma of the multiplicative unit-level output noise.
    pub unit_noise_sigma: f64,
    pub inactive_prob: f64,
    /// Share of each sector's scientists planted as stars.
    pub star_share: f64,
    pub star_quality: f64,
    pub ordinary_sigma: f64,
    pub coauthor_mean: f64,
    /// Probability that a co-author is outside the national system.
    pub external_prob: f64,
    pub max_authors: usize,
    /// Negative-binomial shape of citation counts; smaller is more skewed.
    pub citation_dispersion: f64,
    pub citation_mean_min: f64,
    pub citation_mean_max: f64,
    pub categories_per_sds: usize,
    pub multi_category_prob: f64,
    pub life_science_share: f64,
    pub partial_year_prob: f64,
    pub period_start: i32,
    pub period_end: i32,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_sds: 183,
            n_universities: 60,
            presence_prob: 0.9,
            size_median: 10.0,
            size_sigma: 0.6,
            size_min: 1,
            size_max: 80,
            beta_default: 1.0,
            beta_overrides: BTreeMap::new(),
            rho: 0.0,
            rate: 3.0,
            unit_noise_sigma: 0.2,
            inactive_prob: 0.15,
            star_share: 0.2,
            star_quality: 12.0,
            ordinary_sigma: 0.2,
            coauthor_mean: 2.0,
            external_prob: 0.8,
            max_authors: 20,
            citation_dispersion: 1.5,
            citation_mean_min: 0.7,
            citation_mean_max: 15.0,
            categories_per_sds: 2,
            multi_category_prob: 0.2,
            life_science_share: 66.0 / 183.0,
            partial_year_prob: 0.05,
            period_start: 2004,
            period_end: 2008,
            seed: 1,
        }
    }
}

impl WorldConfig {
    pub fn period(&self) -> Result<Period, SynthError> {
        Ok(Period::new(self.period_start, self.period_end)?)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Infeasible(m));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.n_sds == 0 || self.n_universities == 0 {
            return bad("n_sds and n_universities must be at least 1".into());
        }
        if self.size_min == 0 || self.size_max < self.size_min {
            return bad(format!(
                "unit size range [{}, {}] is empty",
                self.size_min, self.size_max
            ));
        }
        if !(self.size_median > 0.0 && self.size_sigma >= 0.0) {
            return bad("size_median must be positive and size_sigma non-negative".into());
        }
        for (sds, b) in std::iter::once(("default", &self.beta_default))
            .chain(self.beta_overrides.iter().map(|(k, v)| (k.as_str(), v)))
        {
            if !(*b > 0.0 && b.is_finite()) {
                return bad(format!("beta for {sds} must be positive, got {b}"));
            }
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return bad(format!("rho must be in [-1, 1], got {}", self.rho));
        }
        for (name, p) in [
            ("presence_prob", self.presence_prob),
            ("inactive_prob", self.inactive_prob),
            ("star_share", self.star_share),
            ("external_prob", self.external_prob),
            ("multi_category_prob", self.multi_category_prob),
            ("life_science_share", self.life_science_share),
            ("partial_year_prob", self.partial_year_prob),
        ] {
            if !prob(p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if self.inactive_prob + self.star_share >= 1.0 {
            return bad("inactive_prob + star_share must be below 1".into());
        }
        if !(self.rate > 0.0 && self.star_quality > 0.0 && self.citation_dispersion > 0.0) {
            return bad("rate, star_quality and citation_dispersion must be positive".into());
        }
        if !(self.citation_mean_min > 0.0 && self.citation_mean_max >= self.citation_mean_min) {
            return bad("citation mean range is empty".into());
        }
        if self.max_authors == 0 || self.categories_per_sds == 0 {
            return bad("max_authors and categories_per_sds must be at least 1".into());
        }
        if self.coauthor_mean < 0.0 || self.unit_noise_sigma < 0.0 || self.ordinary_sigma < 0.0 {
            return bad("coauthor_mean and noise sigmas must be non-negative".into());
        }
        let known: BTreeSet<String> = (0..self.n_sds).map(sds_id).collect();
        if let Some(unknown) = self.beta_overrides.keys().find(|k| !known.contains(*k)) {
            return bad(format!("beta override for unknown sector {unknown}"));
        }
        self.period()?;
        Ok(())
    }

    pub fn beta_of(&self, sds: &str) -> f64 {
        self.beta_overrides.get(sds).copied().unwrap_or(self.beta_default)
    }

    /// Mean latent quality under the unshifted mixture.
    pub fn mean_quality(&self) -> f64 {
        let ordinary = (self.ordinary_sigma * self.ordinary_sigma / 2.0).exp();
        (1.0 - self.inactive_prob - self.star_share) * ordinary + self.star_share * self.star_quality
    }
}

pub fn sds_id(i: usize) -> String {
    format!("SDS{:03}", i + 1)
}

fn university_id(i: usize) -> String {
    format!("U{:02}", i + 1)
}

pub fn area_id(i: usize) -> String {
    format!("UDA{:02}", i + 1)
}

/// Reads a `sds_id,beta` CSV.
pub fn read_beta_overrides(path: &Path) -> Result<BTreeMap<String, f64>, SynthError> {
    #[derive(Deserialize)]
    struct Row {
        sds_id: String,
        beta: f64,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<Row>() {
        let row = row?;
        out.insert(row.sds_id, row.beta);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityClass {
    Inactive,
    Ordinary,
    Star,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdsTruth {
    pub sds_id: String,
    pub uda_id: String,
    pub beta: f64,
    pub life_science: bool,
    pub n_units: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScientistTruth {
    pub scientist_id: String,
    pub sds_id: String,
    pub university_id: String,
    pub quality: f64,
    pub class: QualityClass,
    /// 1 to 10 within the sector, 10 being the best.
    pub quality_decile: u8,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub sds: Vec<SdsTruth>,
    pub scientists: Vec<ScientistTruth>,
}

impl GroundTruth {
    pub fn beta(&self, sds_id: &str) -> Option<f64> {
        self.sds.iter().find(|s| s.sds_id == sds_id).map(|s| s.beta)
    }

    pub fn planted_increasing(&self) -> BTreeSet<String> {
        self.sds
            .iter()
            .filter(|s| s.beta > 1.0)
            .map(|s| s.sds_id.clone())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub dataset: Dataset,
    pub truth: GroundTruth,
    pub config: WorldConfig,
}

impl World {
    /// Project configuration matching the world: period, life-science
    /// categories, the sector → area map and the world seed.
    pub fn project_config(&self) -> ProjectConfig {
        let mut cfg = ProjectConfig::new(self.dataset.period);
        cfg.data.life_science_categories = self.dataset.category_lifesci.clone();
        cfg.analysis.seed = self.config.seed;
        cfg.uda = self
            .truth
            .sds
            .iter()
            .map(|s| (s.sds_id.clone(), s.uda_id.clone()))
            .collect();
        cfg
    }
}

/// Largest-remainder allocation of `n` sectors over the reference areas.
fn area_assignment(n: usize) -> Vec<String> {
    let total: usize = AREA_WEIGHTS.iter().sum();
    let mut counts: Vec<usize> = AREA_WEIGHTS.iter().map(|w| w * n / total).collect();
    let mut rem: Vec<(usize, usize)> = AREA_WEIGHTS
        .iter()
        .enumerate()
        .map(|(i, w)| (w * n % total, i))
        .collect();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = n - counts.iter().sum::<usize>();
    for &(_, i) in rem.iter().take(short) {
        counts[i] += 1;
    }
    counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat_n(area_id(i), c))
        .collect()
}

/// Evenly spread life-science flags with exactly `round(n · share)` set.
fn life_science_flags(n: usize, share: f64) -> Vec<bool> {
    let target = (n as f64 * share).round() as usize;
    (0..n).map(|i| (i + 1) * target / n > i * target / n).collect()
}

struct SectorOutput {
    truth: SdsTruth,
    scientists: Vec<ScientistTruth>,
    roster: Vec<StaffRecord>,
    publications: Vec<PublicationRecord>,
    categories: Vec<String>,
}

struct Member {
    staff: StaffRecord,
    quality: f64,
    class: QualityClass,
    unit: usize,
}

/// Weighted sampling without replacement by exponential keys.
fn weighted_sample<R: Rng>(weights: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let mut keys: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, &w)| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            (u.ln() / w, i)
        })
        .collect();
    keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<usize> = keys.into_iter().take(count).map(|(_, i)| i).collect();
    out.sort_unstable();
    out
}

/// Systematic sampling with inclusion probability proportional to weight.
/// Returns at most `count` distinct indices; an item whose weight exceeds
/// the sampling step is taken once.
fn systematic_sample<R: Rng>(weights: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if count == 0 || total <= 0.0 {
        return Vec::new();
    }
    let step = total / count as f64;
    let mut next = rng.random::<f64>() * step;
    let mut cum = 0.0;
    let mut out = Vec::with_capacity(count);
    for (i, &w) in weights.iter().enumerate() {
        cum += w;
        if next < cum {
            out.push(i);
            while next < cum {
                next += step;
            }
        }
        if out.len() == count {
            break;
        }
    }
    out
}

fn poisson<R: Rng>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        0
    } else {
        Poisson::new(lambda).expect("positive rate").sample(rng) as u64
    }
}

fn generate_sector(cfg: &WorldConfig, period: Period, idx: usize, uda: &str, life_science: bool) -> SectorOutput {
    let sds = sds_id(idx);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &sds));
    let beta = cfg.beta_of(&sds);
    let mean_q = cfg.mean_quality();
    let years: Vec<i32> = (period.start..=period.end).collect();

    let categories: Vec<String> = (0..cfg.categories_per_sds)
        .map(|c| format!("{sds}-C{}", c + 1))
        .collect();
    let (lo, hi) = (cfg.citation_mean_min.ln(), cfg.citation_mean_max.ln());
    let citation_means: Vec<f64> = categories
        .iter()
        .map(|_| (lo + (hi - lo) * rng.random::<f64>()).exp())
        .collect();

    let size_dist = LogNormal::new(cfg.size_median.ln(), cfg.size_sigma).expect("valid size distribution");
    let noise_dist = LogNormal::new(-cfg.unit_noise_sigma.powi(2) / 2.0, cfg.unit_noise_sigma).expect("valid noise");
    let ordinary_dist = LogNormal::new(0.0, cfg.ordinary_sigma).expect("valid quality");

    // Units and their members.
    let mut members: Vec<Member> = Vec::new();
    let mut unit_keys: Vec<UnitKey> = Vec::new();
    let mut unit_noise: Vec<f64> = Vec::new();
    let mut shifts: Vec<f64> = Vec::new();
    for u in 0..cfg.n_universities {
        if !rng.random_bool(cfg.presence_prob) {
            continue;
        }
        let unit = unit_keys.len();
        let key = UnitKey::new(university_id(u), sds.clone());
        let size: f64 = size_dist.sample(&mut rng);
        let n = (size.round() as usize).clamp(cfg.size_min, cfg.size_max);
        let z = if cfg.size_sigma > 0.0 {
            ((n as f64).ln() - cfg.size_median.ln()) / cfg.size_sigma
        } else {
            0.0
        };
        shifts.push(2.0 * cfg.rho * z);
        for k in 0..n {
            let mut headcount: BTreeMap<i32, f64> = years.iter().map(|&y| (y, 1.0)).collect();
            if rng.random_bool(cfg.partial_year_prob) {
                let first = years[rng.random_range(0..years.len())];
                let fraction = f64::from(rng.random_range(1..10u8)) / 10.0;
                headcount.retain(|&y, _| y >= first);
                headcount.insert(first, fraction);
            }
            members.push(Member {
                staff: StaffRecord {
                    scientist_id: format!("{sds}-{}-R{:03}", key.university_id, k + 1),
                    university_id: key.university_id.clone(),
                    sds_id: sds.clone(),
                    headcount_by_year: headcount,
                },
                quality: 0.0,
                class: QualityClass::Ordinary,
                unit,
            });
        }
        unit_keys.push(key);
        unit_noise.push(noise_dist.sample(&mut rng));
    }

    // Stars are spread over units by systematic sampling, so each unit holds
    // close to its expected share; inactive scientists are drawn at random.
    let n = members.len();
    let n_star = (cfg.star_share * n as f64).floor() as usize;
    let star_w: Vec<f64> = members.iter().map(|m| shifts[m.unit].exp()).collect();
    for i in systematic_sample(&star_w, n_star, &mut rng) {
        members[i].class = QualityClass::Star;
        members[i].quality = cfg.star_quality;
    }
    let n_inactive = (cfg.inactive_prob * n as f64).round() as usize;
    let inactive_w: Vec<f64> = members
        .iter()
        .map(|m| {
            if m.class == QualityClass::Star {
                0.0
            } else {
                (-shifts[m.unit]).exp()
            }
        })
        .collect();
    for i in weighted_sample(&inactive_w, n_inactive, &mut rng) {
        members[i].class = QualityClass::Inactive;
    }
    for m in members.iter_mut().filter(|m| m.class == QualityClass::Ordinary) {
        m.quality = ordinary_dist.sample(&mut rng);
    }

    let mut unit_rs = vec![0.0; unit_keys.len()];
    for m in &members {
        unit_rs[m.unit] += m.staff.presence(period) / years.len() as f64;
    }
    let active: Vec<usize> = (0..members.len()).filter(|&i| members[i].quality > 0.0).collect();

    // Publications led by each scientist.
    let mut publications = Vec::new();
    let mut n_external = 0usize;
    for (i, m) in members.iter().enumerate() {
        if m.quality <= 0.0 {
            continue;
        }
        let scale = (unit_rs[m.unit] / cfg.size_median).powf(beta - 1.0) * unit_noise[m.unit];
        let lambda = cfg.rate * scale * m.quality / mean_q;
        for (&year, &fraction) in &m.staff.headcount_by_year {
            for _ in 0..poisson(&mut rng, lambda * fraction) {
                let n_co = (poisson(&mut rng, cfg.coauthor_mean) as usize).min(cfg.max_authors - 1);
                let mut authors = vec![AuthorRef {
                    author_id: m.staff.scientist_id.clone(),
                    affiliation: Affiliation::Unit(unit_keys[m.unit].clone()),
                    position: 1,
                }];
                let n_internal = (0..n_co).filter(|_| !rng.random_bool(cfg.external_prob)).count();
                let n_internal = n_internal.min(active.len().saturating_sub(1));
                let picks = index::sample(&mut rng, active.len(), (n_internal + 1).min(active.len()));
                let mut co: Vec<AuthorRef> = picks
                    .iter()
                    .map(|j| active[j])
                    .filter(|&j| j != i)
                    .take(n_internal)
                    .map(|j| AuthorRef {
                        author_id: members[j].staff.scientist_id.clone(),
                        affiliation: Affiliation::Unit(unit_keys[members[j].unit].clone()),
                        position: 0,
                    })
                    .collect();
                for _ in co.len()..n_co {
                    n_external += 1;
                    co.push(AuthorRef {
                        author_id: format!("{sds}-X{n_external:06}"),
                        affiliation: Affiliation::External,
                        position: 0,
                    });
                }
                // Interleave domestic and external co-authors.
                for j in (1..co.len()).rev() {
                    co.swap(j, rng.random_range(0..=j));
                }
                authors.extend(co);
                for (p, a) in authors.iter_mut().enumerate() {
                    a.position = p as u32 + 1;
                }

                let primary = rng.random_range(0..categories.len());
                let mut cats = vec![categories[primary].clone()];
                if categories.len() > 1 && rng.random_bool(cfg.multi_category_prob) {
                    let mut other = rng.random_range(0..categories.len() - 1);
                    if other >= primary {
                        other += 1;
                    }
                    cats.push(categories[other].clone());
                    cats.sort();
                }
                let mean = citation_means[primary];
                let gamma = Gamma::new(cfg.citation_dispersion, mean / cfg.citation_dispersion).expect("valid gamma");
                let expected = gamma.sample(&mut rng);
                let citations = poisson(&mut rng, expected);

                publications.push(PublicationRecord {
                    pub_id: format!("{sds}-P{:06}", publications.len() + 1),
                    year,
                    citations,
                    categories: cats,
                    authors,
                    life_science,
                });
            }
        }
    }

    // Quality deciles within the sector.
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| members[a].quality.total_cmp(&members[b].quality).then(a.cmp(&b)));
    let mut decile = vec![0u8; members.len()];
    for (rank, &i) in order.iter().enumerate() {
        decile[i] = (rank * 10 / members.len()) as u8 + 1;
    }
    let scientists = members
        .iter()
        .zip(&decile)
        .map(|(m, &d)| ScientistTruth {
            scientist_id: m.staff.scientist_id.clone(),
            sds_id: sds.clone(),
            university_id: m.staff.university_id.clone(),
            quality: m.quality,
            class: m.class,
            quality_decile: d,
        })
        .collect();

    SectorOutput {
        truth: SdsTruth {
            sds_id: sds.clone(),
            uda_id: uda.to_string(),
            beta,
            life_science,
            n_units: unit_keys.len(),
        },
        scientists,
        roster: members.into_iter().map(|m| m.staff).collect(),
        publications,
        categories,
    }
}

/// Generates a world. Identical configs give identical worlds regardless of
/// the rayon thread count.
pub fn generate_world(cfg: &WorldConfig) -> Result<World, SynthError> {
    cfg.validate()?;
    let period = cfg.period()?;
    let areas = area_assignment(cfg.n_sds);
    let lifesci = life_science_flags(cfg.n_sds, cfg.life_science_share);
    let sectors: Vec<SectorOutput> = (0..cfg.n_sds)
        .into_par_iter()
        .map(|i| generate_sector(cfg, period, i, &areas[i], lifesci[i]))
        .collect();

    let mut truth = GroundTruth::default();
    let mut publications = Vec::new();
    let mut roster = Vec::new();
    let mut category_lifesci = BTreeSet::new();
    for s in sectors {
        if s.truth.life_science {
            category_lifesci.extend(s.categories);
        }
        truth.sds.push(s.truth);
        truth.scientists.extend(s.scientists);
        publications.extend(s.publications);
        roster.extend(s.roster);
    }
    Ok(World {
        dataset: Dataset::new(publications, roster, period, category_lifesci),
        truth,
        config: cfg.clone(),
    })
}

/// Paths written by [`world_to_files`].
#[derive(Debug, Clone)]
pub struct WorldFiles {
    pub publications: PathBuf,
    pub roster: PathBuf,
    pub config: PathBuf,
    pub truth_sds: PathBuf,
    pub truth_scientists: PathBuf,
}

impl WorldFiles {
    pub fn all(&self) -> [&Path; 5] {
        [
            &self.publications,
            &self.roster,
            &self.config,
            &self.truth_sds,
            &self.truth_scientists,
        ]
    }
}

/// Writes the world in the ingestion schemas plus its ground truth.
pub fn world_to_files(world: &World, dir: &Path) -> Result<WorldFiles, SynthError> {
    fs::create_dir_all(dir).map_err(|source| SynthError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let files = WorldFiles {
        publications: dir.join("publications.jsonl"),
        roster: dir.join("roster.csv"),
        config: dir.join("config.toml"),
        truth_sds: dir.join("ground_truth_sds.csv"),
        truth_scientists: dir.join("ground_truth_scientists.csv"),
    };
    dataset::write_publications(&files.publications, &world.dataset.publications)?;
    dataset::write_roster(&files.roster, &world.dataset.roster)?;
    world.project_config().save(&files.config)?;

    let mut w = csv::Writer::from_path(&files.truth_sds)?;
    for s in &world.truth.sds {
        w.serialize(s)?;
    }
    w.flush().map_err(|source| SynthError::Io {
        path: files.truth_sds.clone(),
        source,
    })?;
    let mut w = csv::Writer::from_path(&files.truth_scientists)?;
    for s in &world.truth.scientists {
        w.serialize(s)?;
    }
    w.flush().map_err(|source| SynthError::Io {
        path: files.truth_scientists.clone(),
        source,
    })?;
    Ok(files)
}
