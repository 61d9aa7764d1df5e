//! Compatibility windows, match quality and single-encounter probabilities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage};
use crate::grid::TimeGrid;
use crate::population::{SubgroupSelection, TraitVector};

/// Slack allowed on normalized distances so that points computed exactly on
/// a window edge still count as inside.
const EDGE_SLACK: f64 = 1e-12;

/// Per-trait acceptance intervals around desired trait values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompatibilityWindow {
    pub centers: TraitVector,
    pub halfwidths: Vec<f64>,
    pub importances: Vec<f64>,
    /// Relative change of every halfwidth per year (signed).
    #[serde(default)]
    pub drift_per_year: f64,
}

impl CompatibilityWindow {
    /// Window with unit importances and no drift.
    pub fn new(centers: TraitVector, halfwidths: Vec<f64>) -> Self {
        let dim = centers.dim();
        CompatibilityWindow {
            centers,
            halfwidths,
            importances: vec![1.0; dim],
            drift_per_year: 0.0,
        }
    }

    /// A window that accepts every point of [0,1]^D.
    pub fn universal(dim: usize) -> Self {
        CompatibilityWindow::new(TraitVector::filled(dim, 0.5), vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.centers.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if self.halfwidths.len() != dim {
            return Err(Error::validation(
                "halfwidths",
                format!("expected {dim} values, found {}", self.halfwidths.len()),
            ));
        }
        if self.importances.len() != dim {
            return Err(Error::validation(
                "importances",
                format!("expected {dim} values, found {}", self.importances.len()),
            ));
        }
        if let Some(i) = self
            .halfwidths
            .iter()
            .position(|h| !h.is_finite() || *h < 0.0)
        {
            return Err(Error::validation(format!("halfwidths[{i}]"), "must be finite and >= 0"));
        }
        if let Some(i) = self
            .importances
            .iter()
            .position(|w| !w.is_finite() || *w < 0.0)
        {
            return Err(Error::validation(format!("importances[{i}]"), "must be finite and >= 0"));
        }
        if !(self.importances.iter().sum::<f64>() > 0.0) {
            return Err(Error::validation("importances", "must have a positive sum"));
        }
        if !self.drift_per_year.is_finite() {
            return Err(Error::validation("drift_per_year", "must be finite"));
        }
        Ok(())
    }

    /// Copy with every halfwidth multiplied by `factor` (self-similar scaling).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut w = self.clone();
        for h in &mut w.halfwidths {
            *h *= factor;
        }
        w
    }

    /// Evaluated interval of trait `i`, clamped to [0, 1].
    pub fn interval(&self, i: usize) -> (f64, f64) {
        let c = self.centers[i];
        let h = self.halfwidths[i];
        ((c - h).max(0.0), (c + h).min(1.0))
    }

    /// Normalized distance of `value` from center `i`; above 1 means outside.
    fn normalized_distance(&self, i: usize, value: f64) -> f64 {
        let gap = (value - self.centers[i]).abs();
        let h = self.halfwidths[i];
        if h > 0.0 {
            gap / h
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn contains(&self, traits: &[f64]) -> bool {
        debug_assert_eq!(traits.len(), self.dim());
        traits
            .iter()
            .enumerate()
            .all(|(i, &x)| self.normalized_distance(i, x) <= 1.0 + EDGE_SLACK)
    }
}

/// Window at `t_years` from now: halfwidths scaled by `1 + drift * t`,
/// floored at zero. Centers and importances are unchanged.
pub fn derive_windows(base: &CompatibilityWindow, t_years: f64) -> CompatibilityWindow {
    let factor = (1.0 + base.drift_per_year * t_years).max(0.0);
    let mut w = base.clone();
    for h in &mut w.halfwidths {
        *h = (*h * factor).max(0.0);
    }
    w
}

/// Proximity of `traits` to the window centers, in [0, 1].
///
/// `q = 1 - sqrt(Σ ω_i d_i² / Σ ω_i)` with `d_i` the distance from the center
/// in units of the halfwidth. Returns `None` for points outside the window.
pub fn quality_score(traits: &[f64], window: &CompatibilityWindow) -> Option<f64> {
    debug_assert_eq!(traits.len(), window.dim());
    let mut weighted = 0.0;
    let mut total_weight = 0.0;
    for (i, &x) in traits.iter().enumerate() {
        let d = window.normalized_distance(i, x);
        if d > 1.0 + EDGE_SLACK {
            return None;
        }
        let d = d.min(1.0);
        let w = window.importances[i];
        weighted += w * d * d;
        total_weight += w;
    }
    Some((1.0 - (weighted / total_weight).sqrt()).clamp(0.0, 1.0))
}

/// A slice of the quality range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityBand {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub ideal: bool,
}

/// Validated, ordered partition of the quality range.
///
/// Each band holds `lower <= q < upper`; the top band also holds `q = 1` and
/// the bottom band also holds `q = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct QualityBands(Vec<QualityBand>);

impl QualityBands {
    pub fn new(mut bands: Vec<QualityBand>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::validation("bands", "at least one band is required"));
        }
        for (i, b) in bands.iter().enumerate() {
            if b.name.trim().is_empty() {
                return Err(Error::validation(format!("bands[{i}].name"), "must not be empty"));
            }
            if !(b.lower >= 0.0 && b.upper <= 1.0 && b.lower < b.upper) {
                return Err(Error::validation(
                    format!("bands[{i}]"),
                    "requires 0 <= lower < upper <= 1",
                ));
            }
        }
        let mut names: Vec<&str> = bands.iter().map(|b| b.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("bands", "band names must be unique"));
        }
        if bands.iter().filter(|b| b.ideal).count() > 1 {
            return Err(Error::validation("bands", "at most one band may be ideal"));
        }
        bands.sort_by(|a, b| a.lower.total_cmp(&b.lower));
        if bands[0].lower != 0.0 || bands[bands.len() - 1].upper != 1.0 {
            return Err(Error::validation("bands", "bands must cover the whole range [0, 1]"));
        }
        if bands.windows(2).any(|w| w[0].upper != w[1].lower) {
            return Err(Error::validation("bands", "bands must be contiguous without overlap"));
        }
        Ok(QualityBands(bands))
    }

    /// ideal [0.8, 1], good [0.5, 0.8), marginal [0, 0.5).
    pub fn default_bands() -> Self {
        let band = |name: &str, lower, upper, ideal| QualityBand {
            name: name.to_string(),
            lower,
            upper,
            ideal,
        };
        QualityBands(vec![
            band("marginal", 0.0, 0.5, false),
            band("good", 0.5, 0.8, false),
            band("ideal", 0.8, 1.0, true),
        ])
    }

    pub fn bands(&self) -> &[QualityBand] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, q: f64) -> usize {
        let idx = self.0.partition_point(|b| b.upper <= q);
        idx.min(self.0.len() - 1)
    }
}

/// Single-encounter match probabilities of one group over time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncounterProbabilityCurve {
    pub group_id: String,
    pub months: Vec<f64>,
    /// `by_band[q][k]`: probability that one encounter at `t_k` is a match in band `q`.
    pub by_band: Vec<Vec<f64>>,
    pub total: Vec<f64>,
}

/// Fraction of members that are mutual matches, split by quality band, at
/// every grid time.
///
/// At `t_k` the members' traits are shifted by `drift * t_k` (years) and
/// clamped, and the user's window is drifted with [`derive_windows`]. A member
/// counts when it falls in the user's window and its own window contains the
/// user's traits.
pub fn encounter_probabilities(
    selection: &SubgroupSelection,
    user_traits: &TraitVector,
    window: &CompatibilityWindow,
    bands: &QualityBands,
    grid: &TimeGrid,
    drift_per_year: &[f64],
) -> Result<EncounterProbabilityCurve> {
    let members = selection.members.persons();
    let group_id = selection.label();
    if members.is_empty() {
        return Err(Error::insufficient(
            Stage::Matching,
            group_id,
            "no members to estimate encounter probabilities from",
        ));
    }
    let dim = window.dim();
    if user_traits.dim() != dim || drift_per_year.len() != dim || selection.members.dim() != dim {
        return Err(Error::validation(
            "traits",
            "user, window, drift and members must share one trait dimension",
        ));
    }
    // Suitor-side acceptance does not move with time.
    let accepting: Vec<bool> = members
        .iter()
        .map(|p| p.own_window.contains(user_traits.values()))
        .collect();

    let n = members.len() as f64;
    let per_time: Vec<Vec<usize>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let t = grid.years(k);
            let w = derive_windows(window, t);
            let mut counts = vec![0usize; bands.len()];
            let mut shifted = vec![0.0; dim];
            for (p, &ok) in members.iter().zip(&accepting) {
                if !ok {
                    continue;
                }
                for (i, s) in shifted.iter_mut().enumerate() {
                    *s = (p.traits[i] + drift_per_year[i] * t).clamp(0.0, 1.0);
                }
                if let Some(q) = quality_score(&shifted, &w) {
                    counts[bands.index_of(q)] += 1;
                }
            }
            counts
        })
        .collect();

    let mut by_band = vec![Vec::with_capacity(grid.len()); bands.len()];
    let mut total = Vec::with_capacity(grid.len());
    for counts in &per_time {
        for (q, &c) in counts.iter().enumerate() {
            by_band[q].push(c as f64 / n);
        }
        total.push(counts.iter().sum::<usize>() as f64 / n);
    }
    Ok(EncounterProbabilityCurve {
        group_id: group_id.to_string(),
        months: grid.months().to_vec(),
        by_band,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv(v: &[f64]) -> TraitVector {
        TraitVector::new(v.to_vec()).unwrap()
    }

    fn window(c: &[f64], h: &[f64]) -> CompatibilityWindow {
        CompatibilityWindow::new(tv(c), h.to_vec())
    }

    #[test]
    fn zero_drift_keeps_window() {
        let w = window(&[0.5; 4], &[0.1; 4]);
        for t in [0.0, 1.0, 50.0] {
            assert_eq!(derive_windows(&w, t), w);
        }
    }

    #[test]
    fn positive_drift_widens_linearly() {
        let mut w = window(&[0.5; 4], &[0.1; 4]);
        w.drift_per_year = 0.1;
        let d = derive_windows(&w, 5.0);
        for h in d.halfwidths {
            assert!((h - 0.15).abs() < 1e-15);
        }
    }

    #[test]
    fn negative_drift_floors_at_zero() {
        let mut w = window(&[0.5; 4], &[0.1; 4]);
        w.drift_per_year = -0.3;
        let d = derive_windows(&w, 10.0);
        assert!(d.halfwidths.iter().all(|&h| h == 0.0));
        assert_eq!(quality_score(&[0.51, 0.5, 0.5, 0.5], &d), None);
    }

    #[test]
    fn quality_at_center_and_edge() {
        let w = window(&[0.5, 0.4, 0.6, 0.3], &[0.1, 0.2, 0.05, 0.3]);
        assert_eq!(quality_score(&[0.5, 0.4, 0.6, 0.3], &w), Some(1.0));
        let edge = [0.6, 0.2, 0.65, 0.0];
        let q = quality_score(&edge, &w).unwrap();
        assert!(q.abs() < 1e-9, "q = {q}");
    }

    #[test]
    fn quality_half_distance_is_half() {
        let w = window(&[0.5; 4], &[0.2; 4]);
        let q = quality_score(&[0.6, 0.4, 0.6, 0.4], &w).unwrap();
        assert!((q - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_halfwidth_off_center_is_out_of_window() {
        let w = window(&[0.5; 4], &[0.0, 0.1, 0.1, 0.1]);
        assert_eq!(quality_score(&[0.5001, 0.5, 0.5, 0.5], &w), None);
        assert_eq!(quality_score(&[0.5, 0.5, 0.5, 0.5], &w), Some(1.0));
    }

    #[test]
    fn outside_is_marker() {
        let w = window(&[0.5; 4], &[0.1; 4]);
        assert_eq!(quality_score(&[0.7, 0.5, 0.5, 0.5], &w), None);
        assert!(!w.contains(&[0.7, 0.5, 0.5, 0.5]));
    }

    #[test]
    fn interval_is_clamped() {
        let w = window(&[0.05, 0.95, 0.5, 0.5], &[0.1; 4]);
        assert_eq!(w.interval(0), (0.0, 0.15000000000000002));
        assert_eq!(w.interval(1).1, 1.0);
    }

    #[test]
    fn default_bands_partition_unit_interval() {
        let b = QualityBands::default_bands();
        assert_eq!(b.bands()[b.index_of(0.0)].name, "marginal");
        assert_eq!(b.bands()[b.index_of(0.4999)].name, "marginal");
        assert_eq!(b.bands()[b.index_of(0.5)].name, "good");
        assert_eq!(b.bands()[b.index_of(0.8)].name, "ideal");
        assert_eq!(b.bands()[b.index_of(1.0)].name, "ideal");
    }

    #[test]
    fn bands_reject_gaps_and_overlaps() {
        let band = |name: &str, lower, upper| QualityBand {
            name: name.into(),
            lower,
            upper,
            ideal: false,
        };
        assert!(QualityBands::new(vec![band("a", 0.0, 0.4), band("b", 0.5, 1.0)]).is_err());
        assert!(QualityBands::new(vec![band("a", 0.0, 0.6), band("b", 0.5, 1.0)]).is_err());
        assert!(QualityBands::new(vec![band("a", 0.0, 0.6), band("a", 0.6, 1.0)]).is_err());
        let ok = QualityBands::new(vec![band("b", 0.6, 1.0), band("a", 0.0, 0.6)]).unwrap();
        assert_eq!(ok.bands()[0].name, "a");
    }
}
