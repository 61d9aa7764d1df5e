use serde::Serialize;

use crate::error::{Error, Result};

/// Monthly time grid starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    months: Vec<f64>,
}

impl TimeGrid {
    /// Uniform grid `0, step, 2*step, ..., horizon`.
    pub fn uniform(horizon_months: f64, step_months: f64) -> Result<Self> {
        if !(step_months > 0.0) || !step_months.is_finite() {
            return Err(Error::validation("grid_step_months", "must be positive"));
        }
        if !(horizon_months > 0.0) || !horizon_months.is_finite() {
            return Err(Error::validation("horizon_years", "must be positive"));
        }
        let steps = horizon_months / step_months;
        let rounded = steps.round();
        if (steps - rounded).abs() > 1e-9 || rounded < 1.0 {
            return Err(Error::validation(
                "grid_step_months",
                format!("horizon of {horizon_months} months is not a whole number of {step_months}-month steps"),
            ));
        }
        let n = rounded as usize;
        Ok(TimeGrid {
            months: (0..=n).map(|k| k as f64 * step_months).collect(),
        })
    }

    /// Arbitrary grid; must start at 0 and be strictly increasing.
    pub fn from_months(months: Vec<f64>) -> Result<Self> {
        if months.first() != Some(&0.0) {
            return Err(Error::validation("grid", "must start at t = 0"));
        }
        if months.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::validation("grid", "must be strictly increasing"));
        }
        Ok(TimeGrid { months })
    }

    pub fn months(&self) -> &[f64] {
        &self.months
    }

    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
    }

    pub fn horizon_months(&self) -> f64 {
        *self.months.last().unwrap_or(&0.0)
    }

    pub fn years(&self, k: usize) -> f64 {
        self.months[k] / 12.0
    }

    /// True when consecutive spacings agree to 1e-9 months.
    pub fn is_uniform(&self) -> bool {
        match self.months.get(1) {
            None => true,
            Some(&h) => self
                .months
                .windows(2)
                .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9),
        }
    }

    /// Linear interpolation of `series` at `month`; `None` beyond the grid.
    pub fn interpolate(&self, series: &[f64], month: f64) -> Option<f64> {
        debug_assert_eq!(series.len(), self.months.len());
        if month < 0.0 || month > self.horizon_months() + 1e-9 {
            return None;
        }
        let idx = self.months.partition_point(|&m| m < month);
        if idx < self.months.len() && (self.months[idx] - month).abs() <= 1e-9 {
            return Some(series[idx]);
        }
        if idx == 0 || idx >= self.months.len() {
            return series.last().copied();
        }
        let (m0, m1) = (self.months[idx - 1], self.months[idx]);
        let f = (month - m0) / (m1 - m0);
        Some(series[idx - 1] + f * (series[idx] - series[idx - 1]))
    }

    /// Time-average of `series` over the grid by the trapezoid rule.
    pub fn time_average(&self, series: &[f64]) -> f64 {
        let span = self.horizon_months();
        if span <= 0.0 {
            return series.first().copied().unwrap_or(0.0);
        }
        let integral: f64 = self
            .months
            .windows(2)
            .zip(series.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
            .sum();
        integral / span
    }
}
