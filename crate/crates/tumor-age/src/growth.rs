//! Volume trajectory simulation.
//!
//! A history starts at volume `v0` at time zero and advances in fixed scan
//! intervals of `h` years: each interval draws a reciprocal doubling time
//! and multiplies the volume by `2^(h·rdt)`. Simulation stops at the first
//! volume above `v_max`, or flags the history as truncated once `max_steps`
//! intervals have elapsed without reaching it.

use std::io::{self, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{CorrelatedRdtSampler, CorrelationConfig};
use crate::error::{Error, Result};
use crate::geometry::{volume_to_diameter, Volume};
use crate::mixture::RdtMixture;

/// Median time between scans in the source cohort: 245 days.
pub const DEFAULT_INTERVAL_YEARS: f64 = 245.0 / 365.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Common starting volume, mL.
    pub v0: Volume,
    /// Terminal volume, mL; simulation stops once exceeded.
    pub v_max: Volume,
    /// Scan interval in years.
    pub interval_years: f64,
    /// Number of independent histories in an ensemble.
    pub n_histories: usize,
    /// Base seed; history `k` uses the RNG stream `(seed, k)`.
    pub seed: u64,
    /// Lag-1 correlation of the latent Gaussian rate series; 0 disables.
    pub rho: f64,
    /// Hard cap on intervals per history, bounding shrink-forever paths.
    pub max_steps: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            v0: Volume::new(0.01).expect("positive"),
            v_max: Volume::new(4200.0).expect("positive"),
            interval_years: DEFAULT_INTERVAL_YEARS,
            n_histories: 10_000,
            seed: 0,
            rho: 0.0,
            max_steps: 10_000,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.v0.ml() >= self.v_max.ml() {
            return Err(Error::InvalidConfig {
                reason: format!("v0 ({} mL) must be below v_max ({} mL)", self.v0.ml(), self.v_max.ml()),
            });
        }
        if !(self.interval_years > 0.0 && self.interval_years.is_finite()) {
            return Err(Error::InvalidValue { name: "interval_years", value: self.interval_years });
        }
        if self.n_histories == 0 {
            return Err(Error::InvalidConfig { reason: "n_histories must be at least 1".into() });
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig { reason: "max_steps must be at least 1".into() });
        }
        CorrelationConfig::new(self.rho)?;
        Ok(())
    }
}

/// One simulated trajectory. `volumes` holds the `n_steps + 1` scan-time
/// volumes starting at `v0`; `rdts[i]` is the rate applied over
/// `[i·h, (i+1)·h]`. Log₂-volume is piecewise linear between scans.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthHistory {
    interval_years: f64,
    volumes: Vec<f64>,
    rdts: Vec<f64>,
    truncated: bool,
}

impl GrowthHistory {
    /// Reassemble a history from raw parts, revalidating the invariants:
    /// matching lengths, positive finite volumes, and the per-step
    /// recurrence `log₂(vᵢ₊₁/vᵢ) = h·rdtᵢ` to 1e-9.
    pub fn from_parts(
        interval_years: f64,
        volumes: Vec<f64>,
        rdts: Vec<f64>,
        truncated: bool,
    ) -> Result<Self> {
        if !(interval_years > 0.0 && interval_years.is_finite()) {
            return Err(Error::InvalidValue { name: "interval_years", value: interval_years });
        }
        if volumes.len() != rdts.len() + 1 || rdts.is_empty() {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "history needs volumes.len() == rdts.len() + 1 >= 2, got {} and {}",
                    volumes.len(),
                    rdts.len()
                ),
            });
        }
        for &v in &volumes {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidValue { name: "volume", value: v });
            }
        }
        for (i, &rdt) in rdts.iter().enumerate() {
            if !rdt.is_finite() {
                return Err(Error::NotFinite { name: "rdt", value: rdt });
            }
            let step = (volumes[i + 1] / volumes[i]).log2();
            if (step - interval_years * rdt).abs() > 1e-9 {
                return Err(Error::InvalidConfig {
                    reason: format!(
                        "step {i} breaks the growth recurrence: log2 ratio {step}, h*rdt {}",
                        interval_years * rdt
                    ),
                });
            }
        }
        Ok(GrowthHistory { interval_years, volumes, rdts, truncated })
    }

    pub fn interval_years(&self) -> f64 {
        self.interval_years
    }

    pub fn n_steps(&self) -> usize {
        self.rdts.len()
    }

    /// True when the step cap was hit before the volume exceeded `v_max`.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// Scan-time volumes in mL, starting at `v0`.
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn rdts(&self) -> &[f64] {
        &self.rdts
    }

    /// Age in years of scan point `i`.
    pub fn time_at(&self, i: usize) -> f64 {
        i as f64 * self.interval_years
    }

    pub fn final_volume(&self) -> f64 {
        *self.volumes.last().expect("at least one point")
    }

    pub fn duration_years(&self) -> f64 {
        self.time_at(self.n_steps())
    }

    /// Iterate over the scan intervals.
    pub fn intervals(&self) -> impl Iterator<Item = Interval> + '_ {
        (0..self.rdts.len()).map(move |i| Interval {
            t_start: self.time_at(i),
            t_end: self.time_at(i + 1),
            v_start: self.volumes[i],
            v_end: self.volumes[i + 1],
            rdt: self.rdts[i],
        })
    }
}

/// One scan interval of a history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub t_start: f64,
    pub t_end: f64,
    pub v_start: f64,
    pub v_end: f64,
    pub rdt: f64,
}

/// Advance a volume over one interval: `2^(h·rdt) · v`.
pub fn grow_step(v: Volume, rdt: f64, h: f64) -> Result<Volume> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidValue { name: "interval h", value: h });
    }
    if !rdt.is_finite() {
        return Err(Error::NotFinite { name: "rdt", value: rdt });
    }
    let exponent = h * rdt;
    let next = exponent.exp2() * v.ml();
    if next.is_finite() && next > 0.0 {
        Ok(Volume::new(next).expect("checked finite positive"))
    } else {
        Err(Error::VolumeOverflow { exponent })
    }
}

fn run_trajectory<R: Rng + ?Sized>(
    config: &SimulationConfig,
    rng: &mut R,
    mut next_rdt: impl FnMut(&mut R) -> f64,
) -> Result<GrowthHistory> {
    let v_max = config.v_max.ml();
    let mut volumes = Vec::with_capacity(64);
    let mut rdts = Vec::with_capacity(64);
    volumes.push(config.v0.ml());
    let mut truncated = false;
    loop {
        let rdt = next_rdt(rng);
        let current = Volume::new(*volumes.last().expect("nonempty")).expect("positive");
        let next = grow_step(current, rdt, config.interval_years)?;
        rdts.push(rdt);
        volumes.push(next.ml());
        if next.ml() > v_max {
            break;
        }
        if rdts.len() >= config.max_steps {
            truncated = true;
            break;
        }
    }
    Ok(GrowthHistory { interval_years: config.interval_years, volumes, rdts, truncated })
}

/// Simulate one history with the supplied RNG. Rates are i.i.d. draws from
/// `model` when `config.rho` is zero, otherwise a Gaussian-copula AR(1)
/// sequence with that lag-1 correlation.
pub fn simulate_history<R: Rng + ?Sized>(
    model: &RdtMixture,
    config: &SimulationConfig,
    rng: &mut R,
) -> Result<GrowthHistory> {
    config.validate()?;
    if config.rho == 0.0 {
        run_trajectory(config, rng, |rng| model.sample(rng))
    } else {
        let correlation = CorrelationConfig::new(config.rho)?;
        let mut sampler = CorrelatedRdtSampler::new(model, correlation);
        run_trajectory(config, rng, move |rng| sampler.next_rdt(rng))
    }
}

/// RNG for history `index` of an ensemble: ChaCha8 seeded with the base
/// seed, on stream `index`. This is the whole seed-splitting scheme, so an
/// ensemble is reproducible for a given `(seed, n_histories)` regardless of
/// worker count or execution order.
pub fn history_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulate `config.n_histories` independent histories in parallel.
pub fn simulate_ensemble(model: &RdtMixture, config: &SimulationConfig) -> Result<Vec<GrowthHistory>> {
    config.validate()?;
    (0..config.n_histories)
        .into_par_iter()
        .map(|k| {
            let mut rng = history_rng(config.seed, k as u64);
            simulate_history(model, config, &mut rng)
        })
        .collect()
}

pub fn truncated_count(histories: &[GrowthHistory]) -> usize {
    histories.iter().filter(|h| h.truncated()).count()
}

/// Write an ensemble as CSV with columns
/// `history_id,t_years,volume_ml,diameter_cm`.
pub fn write_ensemble_csv<W: Write>(mut w: W, histories: &[GrowthHistory]) -> io::Result<()> {
    writeln!(w, "history_id,t_years,volume_ml,diameter_cm")?;
    for (id, history) in histories.iter().enumerate() {
        for (i, &v) in history.volumes().iter().enumerate() {
            let d = volume_to_diameter(Volume::new(v).expect("history volumes are positive"));
            writeln!(w, "{id},{},{v},{}", history.time_at(i), d.cm())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_model() -> RdtMixture {
        RdtMixture::default()
    }

    #[test]
    fn grow_step_one_doubling() {
        let v = grow_step(Volume::new(1.0).unwrap(), 1.0, 1.0).unwrap();
        assert_eq!(v.ml(), 2.0);
    }

    #[test]
    fn grow_step_zero_growth() {
        let v = grow_step(Volume::new(1.0).unwrap(), 0.0, 0.671).unwrap();
        assert_eq!(v.ml(), 1.0);
    }

    #[test]
    fn grow_step_partial_interval() {
        let v = grow_step(Volume::new(0.01).unwrap(), 2.0, 245.0 / 365.0).unwrap();
        assert!((v.ml() - 0.025358435727033838).abs() < 1e-15);
        assert!((v.ml() - 0.02535).abs() < 1e-4);
    }

    #[test]
    fn grow_step_overflow_is_an_error() {
        let r = grow_step(Volume::new(1e300).unwrap(), 1e6, 1e3);
        assert!(matches!(r, Err(Error::VolumeOverflow { .. })));
        // massive shrink underflows to zero, also an error
        let r = grow_step(Volume::new(1e-300).unwrap(), -1e6, 1e3);
        assert!(matches!(r, Err(Error::VolumeOverflow { .. })));
    }

    #[test]
    fn grow_step_rejects_bad_interval_and_rate() {
        assert!(grow_step(Volume::new(1.0).unwrap(), 1.0, 0.0).is_err());
        assert!(grow_step(Volume::new(1.0).unwrap(), 1.0, -1.0).is_err());
        assert!(grow_step(Volume::new(1.0).unwrap(), f64::NAN, 1.0).is_err());
    }

    #[test]
    fn forced_constant_rate_reaches_v_max_in_18_steps() {
        // log2(4200/0.01) ≈ 18.68 doublings at 1.6 · 245/365 ≈ 1.074 per step
        let config = SimulationConfig { n_histories: 1, ..SimulationConfig::default() };
        let mut rng = history_rng(0, 0);
        let history = run_trajectory(&config, &mut rng, |_| 1.6).unwrap();
        assert_eq!(history.n_steps(), 18);
        assert!(!history.truncated());
        assert!(history.final_volume() > 4200.0);
        for &v in &history.volumes()[..history.n_steps()] {
            assert!(v <= 4200.0);
        }
    }

    #[test]
    fn history_is_deterministic_per_seed() {
        let config = SimulationConfig::default();
        let a = simulate_history(&default_model(), &config, &mut history_rng(9, 0)).unwrap();
        let b = simulate_history(&default_model(), &config, &mut history_rng(9, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn median_step_count_matches_mean_rate() {
        // mean RDT ≈ 0.753 doublings/yr ⇒ ≈ 24.8 years ≈ 37 intervals
        let config = SimulationConfig { seed: 21, ..SimulationConfig::default() };
        let histories = simulate_ensemble(&default_model(), &config).unwrap();
        let mut steps: Vec<usize> = histories.iter().map(|h| h.n_steps()).collect();
        steps.sort_unstable();
        let median = steps[steps.len() / 2] as f64;
        assert!((29.6..=44.4).contains(&median), "median steps {median}");
    }

    #[test]
    fn ensemble_is_reproducible() {
        let config =
            SimulationConfig { n_histories: 100, seed: 42, ..SimulationConfig::default() };
        let a = simulate_ensemble(&default_model(), &config).unwrap();
        let b = simulate_ensemble(&default_model(), &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ensemble_independent_of_thread_count() {
        let config =
            SimulationConfig { n_histories: 200, seed: 7, ..SimulationConfig::default() };
        let model = default_model();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let eight = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = single.install(|| simulate_ensemble(&model, &config)).unwrap();
        let b = eight.install(|| simulate_ensemble(&model, &config)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_history_ensemble() {
        let config = SimulationConfig { n_histories: 1, ..SimulationConfig::default() };
        let histories = simulate_ensemble(&default_model(), &config).unwrap();
        assert_eq!(histories.len(), 1);
    }

    #[test]
    fn ensemble_has_the_expected_qualitative_spread() {
        let config =
            SimulationConfig { n_histories: 100, seed: 42, ..SimulationConfig::default() };
        let histories = simulate_ensemble(&default_model(), &config).unwrap();
        let mut any_nonmonotone = false;
        let mut any_dip_below_start = false;
        for h in &histories {
            assert!(!h.truncated());
            assert!(h.final_volume() > 4200.0);
            // exactly the final point exceeds v_max
            for &v in &h.volumes()[..h.n_steps()] {
                assert!(v > 0.0 && v <= 4200.0);
            }
            any_nonmonotone |= h.volumes().windows(2).any(|w| w[1] < w[0]);
            any_dip_below_start |= h.volumes().iter().any(|&v| v < 0.01);
        }
        // 35% of intervals shrink, so both must show up in 100 histories
        assert!(any_nonmonotone);
        assert!(any_dip_below_start);
    }

    #[test]
    fn step_cap_marks_history_truncated() {
        let config = SimulationConfig { max_steps: 5, ..SimulationConfig::default() };
        let history = simulate_history(&default_model(), &config, &mut history_rng(3, 0)).unwrap();
        assert!(history.truncated());
        assert_eq!(history.n_steps(), 5);
        assert!(history.final_volume() <= 4200.0);
    }

    #[test]
    fn recurrence_holds_along_simulated_histories() {
        let config = SimulationConfig { n_histories: 50, seed: 1, ..SimulationConfig::default() };
        for history in simulate_ensemble(&default_model(), &config).unwrap() {
            for iv in history.intervals() {
                let step = (iv.v_end / iv.v_start).log2();
                assert!((step - history.interval_years() * iv.rdt).abs() < 1e-9);
            }
            assert!((history.duration_years()
                - history.n_steps() as f64 * history.interval_years())
            .abs()
                < 1e-12);
        }
    }

    #[test]
    fn correlated_simulation_runs_and_terminates() {
        let config = SimulationConfig { rho: 0.4, n_histories: 200, ..SimulationConfig::default() };
        let histories = simulate_ensemble(&default_model(), &config).unwrap();
        assert_eq!(histories.len(), 200);
        assert!(histories.iter().all(|h| h.truncated() || h.final_volume() > 4200.0));
    }

    #[test]
    fn from_parts_validates() {
        assert!(GrowthHistory::from_parts(0.5, vec![1.0, 2.0], vec![2.0], false).is_ok());
        // wrong rate for the recorded ratio
        assert!(GrowthHistory::from_parts(0.5, vec![1.0, 2.0], vec![1.0], false).is_err());
        assert!(GrowthHistory::from_parts(0.5, vec![1.0], vec![], false).is_err());
        assert!(GrowthHistory::from_parts(0.5, vec![1.0, -2.0], vec![2.0], false).is_err());
        assert!(GrowthHistory::from_parts(0.0, vec![1.0, 2.0], vec![2.0], false).is_err());
    }

    #[test]
    fn config_validation() {
        let bad_order = SimulationConfig {
            v0: Volume::new(10.0).unwrap(),
            v_max: Volume::new(1.0).unwrap(),
            ..SimulationConfig::default()
        };
        assert!(bad_order.validate().is_err());
        assert!(SimulationConfig { n_histories: 0, ..SimulationConfig::default() }
            .validate()
            .is_err());
        assert!(SimulationConfig { rho: 1.0, ..SimulationConfig::default() }.validate().is_err());
        assert!(SimulationConfig { rho: -0.2, ..SimulationConfig::default() }.validate().is_err());
        assert!(SimulationConfig::default().validate().is_ok());
    }

    #[test]
    fn csv_export_shape() {
        let config = SimulationConfig { n_histories: 3, seed: 5, ..SimulationConfig::default() };
        let histories = simulate_ensemble(&default_model(), &config).unwrap();
        let mut buf = Vec::new();
        write_ensemble_csv(&mut buf, &histories).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "history_id,t_years,volume_ml,diameter_cm");
        let expected_rows: usize = histories.iter().map(|h| h.volumes().len()).sum();
        assert_eq!(lines.count(), expected_rows);
        assert!(text.lines().nth(1).unwrap().starts_with("0,0,0.01,"));
    }
}
