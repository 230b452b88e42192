//! Inversion of simulated growth into age-given-size distributions.
//!
//! A horizontal line at some threshold volume cuts each simulated history at
//! the moments the tumor could be observed at that size. Pooling those
//! observation ages across an ensemble and taking empirical percentiles
//! yields the age distribution for each diameter on a grid. [`CrossingMode`]
//! picks what counts as an observation: the discrete scan ages spent inside
//! a size bucket (the default), or the exactly interpolated instants the
//! trajectory passes each threshold.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{diameter_to_volume, Diameter};
use crate::growth::GrowthHistory;

/// Diameter thresholds (cm) at which crossing ages are collected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiameterGrid {
    thresholds: Vec<Diameter>,
}

/// The 14 reported diameters, geometric with ratio ≈ 1.35.
const DEFAULT_GRID_CM: [f64; 14] =
    [0.3, 0.4, 0.5, 0.7, 1.0, 1.3, 1.8, 2.5, 3.3, 4.5, 6.0, 8.2, 11.0, 14.9];

impl Default for DiameterGrid {
    fn default() -> Self {
        let thresholds = DEFAULT_GRID_CM
            .iter()
            .map(|&cm| Diameter::new(cm).expect("positive"))
            .collect();
        DiameterGrid { thresholds }
    }
}

impl DiameterGrid {
    /// A grid must be nonempty and strictly increasing.
    pub fn new(thresholds: Vec<Diameter>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::EmptyInput { what: "diameter grid" });
        }
        if thresholds.windows(2).any(|w| w[1].cm() <= w[0].cm()) {
            return Err(Error::InvalidConfig {
                reason: "diameter grid must be strictly increasing".into(),
            });
        }
        Ok(DiameterGrid { thresholds })
    }

    pub fn thresholds(&self) -> &[Diameter] {
        &self.thresholds
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn min(&self) -> Diameter {
        self.thresholds[0]
    }

    pub fn max(&self) -> Diameter {
        *self.thresholds.last().expect("nonempty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossingDirection {
    Up,
    Down,
}

/// One passage of a trajectory through a threshold size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub age_years: f64,
    pub direction: CrossingDirection,
}

/// How the age pool for each grid size is collected.
///
/// The two families differ in what counts as "observed at a size":
/// crossing modes interpolate the exact instants the trajectory passes a
/// threshold, while scan occupancy pools the discrete scan ages at which
/// the trajectory sits inside a size bucket. Occupancy ages are whole
/// multiples of the scan interval, so percentile tables built from them
/// are quantized to it; exact crossings give continuous ages and are the
/// better choice when differencing two tables (quantization would mask
/// sub-interval shifts).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingMode {
    /// Pool each history's scan ages while its diameter lies in the
    /// half-open bucket `[g_k, g_{k+1})`; the last bucket extends to the
    /// history's exit. The final scan of a completed history (the first
    /// beyond the volume ceiling) is an exit marker, not an observation,
    /// and is excluded. This is the convention the reference percentile
    /// table was built with, and the table pipeline's default.
    #[default]
    ScanOccupancy,
    /// Every exact crossing, both directions — a shrinking tumor is
    /// observable at a size just as a growing one is.
    All,
    /// Only the first upward crossing per history, for sensitivity checks.
    FirstUpward,
}

/// Exact ages at which a history's volume passes through the threshold.
///
/// Log volume is linear within a scan interval, so a crossing strictly
/// inside `[t_i, t_{i+1}]` lands at `t_i + log₂(V*/v_i)/rdt_i`. A scan
/// point exactly on the threshold counts once, as the crossing of the
/// interval that ends there (so a start-of-history hit is not counted).
pub fn crossing_times(history: &GrowthHistory, threshold: Diameter) -> Vec<Crossing> {
    let v_star = diameter_to_volume(threshold).ml();
    let mut crossings = Vec::new();
    for iv in history.intervals() {
        if iv.v_end == v_star {
            if iv.v_start != v_star {
                let direction = if iv.v_start < v_star {
                    CrossingDirection::Up
                } else {
                    CrossingDirection::Down
                };
                crossings.push(Crossing { age_years: iv.t_end, direction });
            }
        } else if iv.v_start < v_star && v_star < iv.v_end {
            let age_years = iv.t_start + (v_star / iv.v_start).log2() / iv.rdt;
            crossings.push(Crossing { age_years, direction: CrossingDirection::Up });
        } else if iv.v_end < v_star && v_star < iv.v_start {
            let age_years = iv.t_start + (v_star / iv.v_start).log2() / iv.rdt;
            crossings.push(Crossing { age_years, direction: CrossingDirection::Down });
        }
    }
    crossings
}

/// Empirical quantiles by linear interpolation between the closest order
/// statistics: level `q` of `n` sorted values sits at fractional rank
/// `(n−1)·q`.
pub fn percentiles(ages: &[f64], levels: &[f64]) -> Result<Vec<f64>> {
    if ages.is_empty() {
        return Err(Error::EmptyInput { what: "percentile input" });
    }
    for &level in levels {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidProbability { range: "(0, 1)", value: level });
        }
    }
    let mut sorted = ages.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(levels.iter().map(|&level| interpolate_sorted(&sorted, level)).collect())
}

fn interpolate_sorted(sorted: &[f64], level: f64) -> f64 {
    let rank = (sorted.len() - 1) as f64 * level;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// The five reported percentiles of an age pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

impl Percentiles {
    pub fn from_ages(ages: &[f64]) -> Result<Self> {
        let p = percentiles(ages, &[0.05, 0.25, 0.50, 0.75, 0.95])?;
        Ok(Percentiles { p5: p[0], p25: p[1], p50: p[2], p75: p[3], p95: p[4] })
    }

    pub fn iqr_width(&self) -> f64 {
        self.p75 - self.p25
    }
}

/// Age distribution at one grid threshold. `percentiles` is `None` when no
/// history ever reached the size — the row is reported as missing rather
/// than fabricated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeRow {
    pub diameter_cm: Diameter,
    #[serde(flatten)]
    pub percentiles: Option<Percentiles>,
    /// Number of pooled observations: threshold crossings in the crossing
    /// modes, in-bucket scans under occupancy.
    pub n_crossings: usize,
    /// Pooled observation ages, kept for queries and diagnostics but left
    /// out of serialized output (the percentiles summarize them).
    #[serde(skip)]
    pub ages: Vec<f64>,
}

/// Percentile table over the diameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeTable {
    pub rows: Vec<AgeRow>,
}

impl AgeTable {
    /// The row at exactly this diameter, if the grid has one.
    pub fn row_at(&self, d: Diameter) -> Option<&AgeRow> {
        self.rows.iter().find(|r| r.diameter_cm.cm() == d.cm())
    }

    /// Serialize as CSV. Missing rows keep their diameter and zero count
    /// but leave the percentile cells empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "diameter_cm,p5,p25,p50,p75,p95,n_crossings")?;
        for row in &self.rows {
            match &row.percentiles {
                Some(p) => writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    row.diameter_cm.cm(),
                    p.p5,
                    p.p25,
                    p.p50,
                    p.p75,
                    p.p95,
                    row.n_crossings
                )?,
                None => writeln!(w, "{},,,,,,{}", row.diameter_cm.cm(), row.n_crossings)?,
            }
        }
        Ok(())
    }
}

/// Pool every exact crossing age across an ensemble and summarize per
/// threshold (`CrossingMode::All`).
///
/// Histories are processed in parallel but merged in index order, so the
/// result is identical regardless of worker count.
pub fn build_age_table(ensemble: &[GrowthHistory], grid: &DiameterGrid) -> Result<AgeTable> {
    build_age_table_with_mode(ensemble, grid, CrossingMode::All)
}

pub fn build_age_table_with_mode(
    ensemble: &[GrowthHistory],
    grid: &DiameterGrid,
    mode: CrossingMode,
) -> Result<AgeTable> {
    if ensemble.is_empty() {
        return Err(Error::EmptyInput { what: "ensemble" });
    }
    let per_history: Vec<Vec<Vec<f64>>> = match mode {
        CrossingMode::ScanOccupancy => {
            let volume_edges: Vec<f64> =
                grid.thresholds().iter().map(|&t| diameter_to_volume(t).ml()).collect();
            ensemble
                .par_iter()
                .map(|history| scan_occupancy_times(history, &volume_edges))
                .collect()
        }
        CrossingMode::All | CrossingMode::FirstUpward => ensemble
            .par_iter()
            .map(|history| {
                grid.thresholds()
                    .iter()
                    .map(|&threshold| {
                        let crossings = crossing_times(history, threshold);
                        match mode {
                            CrossingMode::All => {
                                crossings.iter().map(|c| c.age_years).collect()
                            }
                            _ => crossings
                                .iter()
                                .find(|c| c.direction == CrossingDirection::Up)
                                .map(|c| c.age_years)
                                .into_iter()
                                .collect(),
                        }
                    })
                    .collect()
            })
            .collect(),
    };

    let rows = grid
        .thresholds()
        .iter()
        .enumerate()
        .map(|(j, &diameter_cm)| {
            let mut ages: Vec<f64> =
                per_history.iter().flat_map(|h| h[j].iter().copied()).collect();
            ages.sort_unstable_by(f64::total_cmp);
            let percentiles =
                if ages.is_empty() { None } else { Some(Percentiles::from_ages(&ages)?) };
            Ok(AgeRow { diameter_cm, percentiles, n_crossings: ages.len(), ages })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(AgeTable { rows })
}

/// Scan ages of one history grouped by size bucket, indexed like the grid.
///
/// Diameter is monotone in volume, so bucket membership is resolved in
/// volume space against the grid's volume thresholds. The final scan of a
/// completed history is the exit observation and is skipped; truncated
/// histories never exited, so every scan of theirs counts.
fn scan_occupancy_times(history: &GrowthHistory, volume_edges: &[f64]) -> Vec<Vec<f64>> {
    let mut per_threshold = vec![Vec::new(); volume_edges.len()];
    let volumes = history.volumes();
    let observed = if history.truncated() { volumes.len() } else { volumes.len() - 1 };
    for (i, &v) in volumes[..observed].iter().enumerate() {
        let k = volume_edges.partition_point(|&edge| edge <= v);
        if k > 0 {
            per_threshold[k - 1].push(history.time_at(i));
        }
    }
    per_threshold
}
