//! Size-quartile grouping and box-plot summaries.

use crate::numeric;

use super::StatsError;

/// Tukey box-plot summary; whiskers reach the most extreme points within
/// 1.5 × IQR of the quartiles.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: Vec<f64>,
    pub mean: f64,
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let s = numeric::sorted(values);
    let q1 = numeric::quantile_sorted(&s, 0.25)?;
    let median = numeric::median_sorted(&s)?;
    let q3 = numeric::quantile_sorted(&s, 0.75)?;
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let inside: Vec<f64> = s
        .iter()
        .copied()
        .filter(|v| (lo_fence..=hi_fence).contains(v))
        .collect();
    Some(BoxStats {
        n: s.len(),
        q1,
        median,
        q3,
        whisker_lo: inside.first().copied().unwrap_or(q1),
        whisker_hi: inside.last().copied().unwrap_or(q3),
        outliers: s.iter().copied().filter(|v| *v < lo_fence || *v > hi_fence).collect(),
        mean: numeric::mean(&s)?,
    })
}

/// Productivity values grouped by size quartile, smallest sizes first.
#[derive(Debug, Clone, PartialEq)]
pub struct QuartileGroups {
    /// Indices into the input, per group, in ascending size order.
    pub members: [Vec<usize>; 4],
    /// Productivity values per group.
    pub groups: [Vec<f64>; 4],
    pub boxes: [BoxStats; 4],
    /// Smallest and largest size in each group.
    pub size_ranges: [(f64, f64); 4],
}

impl QuartileGroups {
    pub fn sizes(&self) -> [usize; 4] {
        [0, 1, 2, 3].map(|i| self.groups[i].len())
    }
}

/// Sorts `(size, productivity)` pairs by size and cuts them into four
/// contiguous groups. Remainders go to the lower quartiles, so 47 units
/// split as 12, 12, 12, 11. Equal sizes keep input order.
pub fn quartile_split(units: &[(f64, f64)]) -> Result<QuartileGroups, StatsError> {
    let n = units.len();
    if n < 4 {
        return Err(StatsError::TooFewPoints { needed: 4, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| units[i].0.total_cmp(&units[j].0).then(i.cmp(&j)));

    let base = n / 4;
    let extra = n % 4;
    let mut members: [Vec<usize>; 4] = Default::default();
    let mut start = 0;
    for (g, m) in members.iter_mut().enumerate() {
        let len = base + usize::from(g < extra);
        *m = order[start..start + len].to_vec();
        start += len;
    }
    let groups = members
        .clone()
        .map(|m| m.iter().map(|&i| units[i].1).collect::<Vec<f64>>());
    let boxes = groups.clone().map(|g| box_stats(&g).expect("non-empty group"));
    let size_ranges = members
        .clone()
        .map(|m| (units[m[0]].0, units[*m.last().expect("non-empty")].0));
    Ok(QuartileGroups {
        members,
        groups,
        boxes,
        size_ranges,
    })
}
