//! Reporting layer: full table runs, interpolated age queries at arbitrary
//! diameters, and the serial-correlation sensitivity sweep.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{volume_to_diameter, Diameter};
use crate::growth::{simulate_ensemble, truncated_count, SimulationConfig};
use crate::invert::{build_age_table_with_mode, AgeTable, CrossingMode, DiameterGrid};
use crate::mixture::RdtMixture;

/// Summary of the age distribution at one queried diameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeQueryResult {
    pub diameter_cm: f64,
    /// Median age, years since the 0.01 mL origin.
    pub median: f64,
    /// 25th and 75th percentiles.
    pub iqr: (f64, f64),
    /// 5th and 95th percentiles.
    pub ci90: (f64, f64),
}

/// Look up the age distribution at a diameter, interpolating between grid
/// rows.
///
/// Percentiles vary near-linearly against log size on a geometric grid, so
/// off-grid diameters interpolate each percentile linearly in log diameter
/// between the two bracketing rows. Exact grid hits return the row
/// verbatim. Diameters outside the grid are refused — simulation support
/// thins at the extremes, so extrapolation would be guesswork.
pub fn query_age(table: &AgeTable, d: Diameter) -> Result<AgeQueryResult> {
    let rows = &table.rows;
    if rows.is_empty() {
        return Err(Error::EmptyInput { what: "age table" });
    }
    let x = d.cm();
    let min = rows[0].diameter_cm.cm();
    let max = rows[rows.len() - 1].diameter_cm.cm();
    if x < min || x > max {
        return Err(Error::OutOfRange { diameter: x, min, max });
    }

    let summarize = |row: &crate::invert::AgeRow| -> Result<AgeQueryResult> {
        let p = row.percentiles.ok_or_else(|| Error::InsufficientData {
            reason: format!("no crossings recorded at {} cm", row.diameter_cm.cm()),
        })?;
        Ok(AgeQueryResult {
            diameter_cm: x,
            median: p.p50,
            iqr: (p.p25, p.p75),
            ci90: (p.p5, p.p95),
        })
    };

    if let Some(row) = rows.iter().find(|r| r.diameter_cm.cm() == x) {
        return summarize(row);
    }

    let hi_idx = rows
        .iter()
        .position(|r| r.diameter_cm.cm() > x)
        .expect("x is below the last row");
    let (lo, hi) = (&rows[hi_idx - 1], &rows[hi_idx]);
    let (lo_sum, hi_sum) = (summarize(lo)?, summarize(hi)?);
    let w = (x.ln() - lo.diameter_cm.cm().ln())
        / (hi.diameter_cm.cm().ln() - lo.diameter_cm.cm().ln());
    let lerp = |a: f64, b: f64| a + w * (b - a);
    Ok(AgeQueryResult {
        diameter_cm: x,
        median: lerp(lo_sum.median, hi_sum.median),
        iqr: (lerp(lo_sum.iqr.0, hi_sum.iqr.0), lerp(lo_sum.iqr.1, hi_sum.iqr.1)),
        ci90: (lerp(lo_sum.ci90.0, hi_sum.ci90.0), lerp(lo_sum.ci90.1, hi_sum.ci90.1)),
    })
}

/// A complete pipeline run: the inputs that produced a table, the table
/// itself, and how many histories hit the step cap along the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRun {
    pub model: RdtMixture,
    pub config: SimulationConfig,
    pub grid: DiameterGrid,
    pub mode: CrossingMode,
    pub truncated_histories: usize,
    pub table: AgeTable,
}

/// Simulate an ensemble and invert it over the grid.
///
/// The grid must lie strictly inside the simulated size range
/// `(d(v0), d(v_max))`: thresholds at or below the common starting size are
/// never crossed upward from below, and thresholds at or beyond the
/// terminal volume are unreachable.
pub fn build_table(
    model: &RdtMixture,
    config: &SimulationConfig,
    grid: &DiameterGrid,
    mode: CrossingMode,
) -> Result<TableRun> {
    config.validate()?;
    let d_min = volume_to_diameter(config.v0);
    let d_max = volume_to_diameter(config.v_max);
    if grid.min().cm() <= d_min.cm() || grid.max().cm() >= d_max.cm() {
        return Err(Error::InvalidConfig {
            reason: format!(
                "diameter grid [{}, {}] cm must lie strictly inside the simulated range ({:.4}, {:.4}) cm",
                grid.min().cm(),
                grid.max().cm(),
                d_min.cm(),
                d_max.cm()
            ),
        });
    }
    let ensemble = simulate_ensemble(model, config)?;
    let truncated_histories = truncated_count(&ensemble);
    let table = build_age_table_with_mode(&ensemble, grid, mode)?;
    Ok(TableRun {
        model: *model,
        config: *config,
        grid: grid.clone(),
        mode,
        truncated_histories,
        table,
    })
}

/// Sensitivity of the age table to serial growth-rate correlation: one row
/// per (rho, diameter) with deltas against the rho = 0 baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub rho: f64,
    pub diameter_cm: f64,
    pub median: Option<f64>,
    pub iqr_width: Option<f64>,
    pub median_delta: Option<f64>,
    pub iqr_width_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub model: RdtMixture,
    pub config: SimulationConfig,
    pub grid: DiameterGrid,
    pub rhos: Vec<f64>,
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityReport {
    /// CSV with columns
    /// `rho,diameter_cm,median,iqr_width,median_delta,iqr_width_delta`;
    /// cells stay empty where a run recorded no crossings.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "rho,diameter_cm,median,iqr_width,median_delta,iqr_width_delta")?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                row.rho,
                row.diameter_cm,
                cell(row.median),
                cell(row.iqr_width),
                cell(row.median_delta),
                cell(row.iqr_width_delta)
            )?;
        }
        Ok(())
    }
}

/// Run the full pipeline at each requested correlation and report per-
/// diameter medians and IQR widths against the uncorrelated baseline.
///
/// A rho = 0 baseline is prepended when absent. All runs share
/// `config.seed`, so rows differ only through the correlation itself.
/// The sweep differences tables, so it pools exact crossing ages
/// (`CrossingMode::All`) rather than scan occupancy: occupancy ages are
/// quantized to the scan interval, and differencing quantized medians
/// cannot resolve shifts smaller than one interval (~0.67 years at the
/// default cadence).
pub fn sensitivity_sweep(
    model: &RdtMixture,
    config: &SimulationConfig,
    grid: &DiameterGrid,
    rhos: &[f64],
) -> Result<SensitivityReport> {
    if rhos.is_empty() {
        return Err(Error::EmptyInput { what: "rho list" });
    }
    for &rho in rhos {
        crate::copula::CorrelationConfig::new(rho)?;
    }
    let mut all_rhos: Vec<f64> = Vec::with_capacity(rhos.len() + 1);
    if !rhos.contains(&0.0) {
        all_rhos.push(0.0);
    }
    all_rhos.extend_from_slice(rhos);

    let runs: Vec<TableRun> = all_rhos
        .iter()
        .map(|&rho| build_table(model, &SimulationConfig { rho, ..*config }, grid, CrossingMode::All))
        .collect::<Result<_>>()?;
    let baseline = runs
        .iter()
        .find(|r| r.config.rho == 0.0)
        .expect("baseline is always included");

    let mut rows = Vec::with_capacity(all_rhos.len() * grid.len());
    for run in &runs {
        for (row, base) in run.table.rows.iter().zip(&baseline.table.rows) {
            let median = row.percentiles.map(|p| p.p50);
            let iqr_width = row.percentiles.map(|p| p.iqr_width());
            let base_median = base.percentiles.map(|p| p.p50);
            let base_iqr = base.percentiles.map(|p| p.iqr_width());
            rows.push(SensitivityRow {
                rho: run.config.rho,
                diameter_cm: row.diameter_cm.cm(),
                median,
                iqr_width,
                median_delta: median.zip(base_median).map(|(a, b)| a - b),
                iqr_width_delta: iqr_width.zip(base_iqr).map(|(a, b)| a - b),
            });
        }
    }

    Ok(SensitivityReport {
        model: *model,
        config: *config,
        grid: grid.clone(),
        rhos: all_rhos,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invert::{AgeRow, Percentiles};

    fn d(cm: f64) -> Diameter {
        Diameter::new(cm).unwrap()
    }

    fn flat_row(cm: f64, age: f64) -> AgeRow {
        AgeRow {
            diameter_cm: d(cm),
            percentiles: Some(Percentiles { p5: age, p25: age, p50: age, p75: age, p95: age }),
            n_crossings: 1,
            ages: vec![age],
        }
    }

    fn small_run(n: usize, seed: u64, rho: f64) -> TableRun {
        let config =
            SimulationConfig { n_histories: n, seed, rho, ..SimulationConfig::default() };
        build_table(&RdtMixture::default(), &config, &DiameterGrid::default(), CrossingMode::All)
            .unwrap()
    }

    #[test]
    fn query_at_grid_point_returns_row_verbatim() {
        let run = small_run(500, 3, 0.0);
        let row = run.table.row_at(d(6.0)).unwrap();
        let p = row.percentiles.unwrap();
        let q = query_age(&run.table, d(6.0)).unwrap();
        assert_eq!(q.median, p.p50);
        assert_eq!(q.iqr, (p.p25, p.p75));
        assert_eq!(q.ci90, (p.p5, p.p95));
    }

    #[test]
    fn query_interpolates_linearly_in_log_diameter() {
        let table = AgeTable { rows: vec![flat_row(1.0, 10.0), flat_row(2.0, 20.0)] };
        // sqrt(2) cm is the midpoint of [1, 2] in log space
        let q = query_age(&table, d(std::f64::consts::SQRT_2)).unwrap();
        assert!((q.median - 15.0).abs() < 1e-12);
        assert!((q.iqr.0 - 15.0).abs() < 1e-12);
        assert!((q.ci90.1 - 15.0).abs() < 1e-12);
    }

    #[test]
    fn query_respects_grid_bounds() {
        let run = small_run(200, 3, 0.0);
        assert!(query_age(&run.table, d(0.3)).is_ok());
        assert!(query_age(&run.table, d(14.9)).is_ok());
        assert!(matches!(
            query_age(&run.table, d(0.2)),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            query_age(&run.table, d(25.0)),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn query_ordering_invariant_holds_everywhere() {
        let run = small_run(1000, 5, 0.0);
        let mut x = 0.31;
        while x < 14.9 {
            let q = query_age(&run.table, d(x)).unwrap();
            assert!(
                q.ci90.0 <= q.iqr.0
                    && q.iqr.0 <= q.median
                    && q.median <= q.iqr.1
                    && q.iqr.1 <= q.ci90.1,
                "ordering broken at {x}: {q:?}"
            );
            x += 0.37;
        }
    }

    #[test]
    fn query_missing_bracket_row_is_an_error() {
        let mut table = AgeTable { rows: vec![flat_row(1.0, 10.0), flat_row(2.0, 20.0)] };
        table.rows[1].percentiles = None;
        assert!(matches!(
            query_age(&table, d(1.5)),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn grid_must_sit_inside_simulated_size_range() {
        let config = SimulationConfig { n_histories: 10, ..SimulationConfig::default() };
        // 0.2 cm is below the 0.01 mL starting diameter (≈ 0.267 cm)
        let low = DiameterGrid::new(vec![d(0.2), d(1.0)]).unwrap();
        assert!(build_table(&RdtMixture::default(), &config, &low, CrossingMode::All).is_err());
        // 21 cm exceeds the 4200 mL terminal diameter (≈ 20.02 cm)
        let high = DiameterGrid::new(vec![d(1.0), d(21.0)]).unwrap();
        assert!(build_table(&RdtMixture::default(), &config, &high, CrossingMode::All).is_err());
    }

    #[test]
    fn table_run_reports_truncations() {
        let config = SimulationConfig {
            n_histories: 20,
            max_steps: 3,
            ..SimulationConfig::default()
        };
        let grid = DiameterGrid::new(vec![d(1.0)]).unwrap();
        let run =
            build_table(&RdtMixture::default(), &config, &grid, CrossingMode::All).unwrap();
        assert_eq!(run.truncated_histories, 20);
    }

    #[test]
    fn sweep_includes_baseline_and_zero_deltas() {
        let config =
            SimulationConfig { n_histories: 300, seed: 6, ..SimulationConfig::default() };
        let grid = DiameterGrid::default();
        let report =
            sensitivity_sweep(&RdtMixture::default(), &config, &grid, &[0.0]).unwrap();
        assert_eq!(report.rhos, vec![0.0]);
        assert_eq!(report.rows.len(), grid.len());
        for row in &report.rows {
            assert_eq!(row.median_delta, Some(0.0));
            assert_eq!(row.iqr_width_delta, Some(0.0));
        }
    }

    #[test]
    fn sweep_prepends_missing_baseline() {
        let config =
            SimulationConfig { n_histories: 200, seed: 6, ..SimulationConfig::default() };
        let grid = DiameterGrid::new(vec![d(1.0), d(2.5)]).unwrap();
        let report =
            sensitivity_sweep(&RdtMixture::default(), &config, &grid, &[0.4]).unwrap();
        assert_eq!(report.rhos, vec![0.0, 0.4]);
        assert_eq!(report.rows.len(), 2 * grid.len());
        assert!(report.rows[..grid.len()].iter().all(|r| r.rho == 0.0));
        assert!(report.rows[grid.len()..].iter().all(|r| r.rho == 0.4));
    }

    #[test]
    fn sweep_is_reproducible() {
        let config =
            SimulationConfig { n_histories: 200, seed: 9, ..SimulationConfig::default() };
        let grid = DiameterGrid::new(vec![d(1.0), d(4.5)]).unwrap();
        let a = sensitivity_sweep(&RdtMixture::default(), &config, &grid, &[0.0, 0.4]).unwrap();
        let b = sensitivity_sweep(&RdtMixture::default(), &config, &grid, &[0.0, 0.4]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_rejects_bad_rho() {
        let config = SimulationConfig::default();
        let grid = DiameterGrid::default();
        assert!(sensitivity_sweep(&RdtMixture::default(), &config, &grid, &[1.5]).is_err());
        assert!(sensitivity_sweep(&RdtMixture::default(), &config, &grid, &[]).is_err());
    }

    #[test]
    fn sensitivity_csv_shape() {
        let config =
            SimulationConfig { n_histories: 200, seed: 6, ..SimulationConfig::default() };
        let grid = DiameterGrid::new(vec![d(1.0), d(2.5)]).unwrap();
        let report =
            sensitivity_sweep(&RdtMixture::default(), &config, &grid, &[0.4]).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "rho,diameter_cm,median,iqr_width,median_delta,iqr_width_delta"
        );
        assert_eq!(lines.count(), 4);
        assert!(text.lines().nth(1).unwrap().starts_with("0,1,"));
    }

    #[test]
    fn median_delta_nondecreasing_in_rho() {
        // stronger serial correlation stretches age dispersion monotonically;
        // shared seeds keep the three runs coupled enough to compare
        let config =
            SimulationConfig { n_histories: 4000, seed: 17, ..SimulationConfig::default() };
        let grid = DiameterGrid::new(vec![d(4.5)]).unwrap();
        let report =
            sensitivity_sweep(&RdtMixture::default(), &config, &grid, &[0.0, 0.2, 0.4])
                .unwrap();
        let deltas: Vec<f64> =
            report.rows.iter().map(|r| r.median_delta.unwrap()).collect();
        assert_eq!(deltas[0], 0.0);
        assert!(deltas[0] <= deltas[1] && deltas[1] <= deltas[2], "deltas {deltas:?}");
    }

    #[test]
    fn correlation_widens_age_dispersion() {
        // light version of the acceptance sensitivity check
        let config =
            SimulationConfig { n_histories: 2000, seed: 12, ..SimulationConfig::default() };
        let grid = DiameterGrid::new(vec![d(4.5)]).unwrap();
        let report =
            sensitivity_sweep(&RdtMixture::default(), &config, &grid, &[0.4]).unwrap();
        let correlated = &report.rows[1];
        assert!(correlated.iqr_width_delta.unwrap() > 0.5, "{correlated:?}");
    }
}
