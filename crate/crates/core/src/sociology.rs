//! Interaction rates and cumulative match probability.
//!
//! Encounters with a group arrive at an expected rate; each encounter is an
//! independent draw from a very large population, so the chance of no match
//! over `Δn` expected encounters is `(1 - p)^Δn` even for fractional `Δn`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::matching::{EncounterProbabilityCurve, QualityBands};
use crate::population::GroupModel;

/// Per-encounter hazard used when an encounter is a certain match (`p = 1`),
/// where `-ln(1 - p)` diverges. `e^-700` underflows to zero survival in any
/// realistic step.
pub const MAX_ENCOUNTER_HAZARD: f64 = 700.0;

/// Sub-intervals per grid step for the trapezoidal rate integral.
const RATE_SUBSTEPS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncounterSchedule {
    pub group_id: String,
    pub months: Vec<f64>,
    /// Expected encounters per month at each grid time.
    pub rate: Vec<f64>,
    /// Expected encounters from t = 0 to each grid time.
    pub cumulative: Vec<f64>,
}

impl EncounterSchedule {
    /// Expected encounters during the step ending at grid index `k`.
    pub fn step_encounters(&self, k: usize) -> f64 {
        if k == 0 {
            self.cumulative[0]
        } else {
            (self.cumulative[k] - self.cumulative[k - 1]).max(0.0)
        }
    }
}

/// `rate(t) = base * (0.5 + extroversion) * ramp(t)` where the ramp is 1 for
/// established groups and `1 - e^(-t / tau)` for new ones.
pub fn encounter_rate(group: &GroupModel, extroversion: f64, month: f64) -> f64 {
    let ramp = if group.established {
        1.0
    } else {
        -(-month / group.ramp_tau_months).exp_m1()
    };
    group.base_encounter_rate * (0.5 + extroversion) * ramp
}

pub fn encounter_schedule(group: &GroupModel, extroversion: f64, grid: &TimeGrid) -> Result<EncounterSchedule> {
    if !(group.base_encounter_rate.is_finite() && group.base_encounter_rate >= 0.0) {
        return Err(Error::validation("base_encounter_rate", "must be finite and >= 0"));
    }
    if !(group.ramp_tau_months.is_finite() && group.ramp_tau_months > 0.0) {
        return Err(Error::validation("ramp_tau_months", "must be > 0"));
    }
    if !(0.0..=1.0).contains(&extroversion) {
        return Err(Error::validation("extroversion", "must be in [0, 1]"));
    }
    let months = grid.months();
    let rate: Vec<f64> = months
        .iter()
        .map(|&m| encounter_rate(group, extroversion, m))
        .collect();
    let mut cumulative = Vec::with_capacity(months.len());
    let mut total = 0.0;
    cumulative.push(total);
    for w in months.windows(2) {
        let h = (w[1] - w[0]) / RATE_SUBSTEPS as f64;
        let mut step = 0.0;
        let mut prev = encounter_rate(group, extroversion, w[0]);
        for s in 1..=RATE_SUBSTEPS {
            let t = if s == RATE_SUBSTEPS { w[1] } else { w[0] + s as f64 * h };
            let next = encounter_rate(group, extroversion, t);
            step += 0.5 * h * (prev + next);
            prev = next;
        }
        total += step;
        cumulative.push(total);
    }
    Ok(EncounterSchedule {
        group_id: group.id.clone(),
        months: months.to_vec(),
        rate,
        cumulative,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub key: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumulativeForecast {
    pub months: Vec<f64>,
    /// Probability of at least one match by each grid time.
    pub total: Vec<f64>,
    /// Share of `total` attributed to each group; sums to `total`.
    pub by_group: Vec<Series>,
    /// Share of `total` attributed to each quality band; sums to `total`.
    pub by_quality: Vec<Series>,
    /// Cumulative hazard of each group.
    pub hazard_by_group: Vec<Series>,
    /// Cumulative hazard of each quality band, summed over groups.
    pub hazard_by_quality: Vec<Series>,
}

impl CumulativeForecast {
    /// `C(t_k) - C(t_{k-1})`, with `C(t_{-1}) = 0`.
    pub fn increments(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.total
            .iter()
            .map(|&c| {
                let d = (c - prev).max(0.0);
                prev = c;
                d
            })
            .collect()
    }
}

/// Expected hazard of one encounter with match probability `p`.
pub fn encounter_hazard(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if p >= 1.0 {
        MAX_ENCOUNTER_HAZARD
    } else {
        (-(-p).ln_1p()).min(MAX_ENCOUNTER_HAZARD)
    }
}

/// Combines per-group encounter probabilities and schedules into the
/// cumulative match probability `C(t) = 1 - Π_G Π_j (1 - p_G(t_j))^Δn_G(t_j)`.
///
/// Attribution splits each step's probability increment `ΔC` across groups
/// (and quality bands) in proportion to their share of that step's hazard,
/// so every attributed series is nondecreasing and the series sum to `C`.
pub fn cumulative_forecast(
    curves: &[EncounterProbabilityCurve],
    schedules: &[EncounterSchedule],
    bands: &QualityBands,
) -> Result<CumulativeForecast> {
    if curves.len() != schedules.len() {
        return Err(Error::validation(
            "groups",
            format!("{} probability curves but {} schedules", curves.len(), schedules.len()),
        ));
    }
    if curves.is_empty() {
        return Err(Error::validation("groups", "at least one group is required"));
    }
    let months = schedules[0].months.clone();
    let n = months.len();
    for (i, (c, s)) in curves.iter().zip(schedules).enumerate() {
        if c.group_id != s.group_id {
            return Err(Error::validation(
                format!("groups[{i}]"),
                format!("curve for `{}` paired with schedule for `{}`", c.group_id, s.group_id),
            ));
        }
        if c.months != months || s.months != months {
            return Err(Error::validation(format!("groups[{i}]"), "time grids differ"));
        }
        if c.by_band.len() != bands.len() {
            return Err(Error::validation(format!("groups[{i}]"), "band count differs"));
        }
        if c.total.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::validation(format!("groups[{i}]"), "probabilities must lie in [0, 1]"));
        }
    }

    let groups = curves.len();
    let nb = bands.len();
    // step hazards, [group][k] and [band][k]
    let mut step_group = vec![vec![0.0; n]; groups];
    let mut step_band = vec![vec![0.0; n]; nb];
    for (g, (curve, sched)) in curves.iter().zip(schedules).enumerate() {
        for k in 0..n {
            let p = curve.total[k];
            let h = sched.step_encounters(k) * encounter_hazard(p);
            step_group[g][k] = h;
            if h > 0.0 {
                for (q, band) in curve.by_band.iter().enumerate() {
                    step_band[q][k] += h * band[k] / p;
                }
            }
        }
    }

    let mut total = Vec::with_capacity(n);
    let mut step_total = vec![0.0; n];
    let mut cum_hazard = 0.0;
    for k in 0..n {
        let h: f64 = step_group.iter().map(|s| s[k]).sum();
        step_total[k] = h;
        cum_hazard += h;
        total.push(-(-cum_hazard).exp_m1());
    }

    let attribute = |steps: &[f64]| -> Vec<f64> {
        let mut acc = 0.0;
        let mut prev_c = 0.0;
        (0..n)
            .map(|k| {
                let dc = (total[k] - prev_c).max(0.0);
                prev_c = total[k];
                if step_total[k] > 0.0 {
                    acc += dc * (steps[k] / step_total[k]);
                }
                acc
            })
            .collect()
    };
    let running = |steps: &[f64]| -> Vec<f64> {
        let mut acc = 0.0;
        steps
            .iter()
            .map(|h| {
                acc += h;
                acc
            })
            .collect()
    };

    let by_group = curves
        .iter()
        .zip(&step_group)
        .map(|(c, s)| Series {
            key: c.group_id.clone(),
            values: attribute(s),
        })
        .collect();
    let by_quality = bands
        .bands()
        .iter()
        .zip(&step_band)
        .map(|(b, s)| Series {
            key: b.name.clone(),
            values: attribute(s),
        })
        .collect();
    let hazard_by_group = curves
        .iter()
        .zip(&step_group)
        .map(|(c, s)| Series {
            key: c.group_id.clone(),
            values: running(s),
        })
        .collect();
    let hazard_by_quality = bands
        .bands()
        .iter()
        .zip(&step_band)
        .map(|(b, s)| Series {
            key: b.name.clone(),
            values: running(s),
        })
        .collect();

    Ok(CumulativeForecast {
        months,
        total,
        by_group,
        by_quality,
        hazard_by_group,
        hazard_by_quality,
    })
}
