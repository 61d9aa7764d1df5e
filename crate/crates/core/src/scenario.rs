//! Scenario file schema (JSON, versioned) and its validation.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::matching::{CompatibilityWindow, QualityBand, QualityBands};
use crate::population::{GroupModel, PopulationSource, RelaxationPolicy, TraitVector};
use crate::utility::{LifeGoal, SingleLifeParams};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;
/// Smallest trait dimension accepted in a scenario.
pub const MIN_TRAIT_DIMENSION: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub seed: u64,
    pub horizon_years: f64,
    #[serde(default = "default_grid_step")]
    pub grid_step_months: f64,
    #[serde(default)]
    pub mc: MonteCarloSettings,
    pub user: UserProfile,
    #[serde(default)]
    pub relationship: Option<Relationship>,
    pub groups: Vec<GroupModel>,
    #[serde(default)]
    pub bands: Option<Vec<QualityBand>>,
    /// Directory that relative sample-file paths resolve against. Not part
    /// of the file format; `None` forbids sample files.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_grid_step() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSettings {
    #[serde(default = "default_suitors")]
    pub suitors: usize,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default = "default_min_samples")]
    pub min_samples: usize,
    #[serde(default = "default_widen_factor")]
    pub widen_factor: f64,
    #[serde(default = "default_max_widenings")]
    pub max_widenings: usize,
}

fn default_suitors() -> usize {
    2000
}
fn default_realizations() -> usize {
    1000
}
fn default_min_samples() -> usize {
    RelaxationPolicy::default().min_samples
}
fn default_widen_factor() -> f64 {
    RelaxationPolicy::default().widen_factor
}
fn default_max_widenings() -> usize {
    RelaxationPolicy::default().max_widenings
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        MonteCarloSettings {
            suitors: default_suitors(),
            realizations: default_realizations(),
            min_samples: default_min_samples(),
            widen_factor: default_widen_factor(),
            max_widenings: default_max_widenings(),
        }
    }
}

impl MonteCarloSettings {
    pub fn relaxation(&self) -> RelaxationPolicy {
        RelaxationPolicy {
            min_samples: self.min_samples,
            widen_factor: self.widen_factor,
            max_widenings: self.max_widenings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserProfile {
    pub traits: TraitVector,
    pub window: CompatibilityWindow,
    pub extroversion: f64,
    pub goals: Vec<LifeGoal>,
    pub tau_single_years: f64,
    /// Relationship amplitudes; default: window importances normalized to sum 1.
    #[serde(default)]
    pub amplitudes: Option<Vec<f64>>,
    /// Relationship sensitivities; default: `sensitivity` on every trait.
    #[serde(default)]
    pub sensitivities: Option<Vec<f64>>,
    #[serde(default = "default_sensitivity")]
    pub sensitivity: f64,
    /// Encounter volume over the horizon that scores 1.0 on social growth.
    #[serde(default = "default_reference_encounters")]
    pub social_reference_encounters: f64,
}

fn default_sensitivity() -> f64 {
    1.0
}
fn default_reference_encounters() -> f64 {
    1200.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationshipStatus {
    #[default]
    Current,
    /// A past relationship evaluated as if resumed.
    Former,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relationship {
    #[serde(default)]
    pub status: RelationshipStatus,
    pub partner_traits: TraitVector,
    pub partner_window: CompatibilityWindow,
    /// Overrides the user's amplitudes for this relationship.
    #[serde(default)]
    pub user_amplitudes: Option<Vec<f64>>,
    #[serde(default)]
    pub user_sensitivities: Option<Vec<f64>>,
    /// Default: partner window importances normalized to sum 1.
    #[serde(default)]
    pub partner_amplitudes: Option<Vec<f64>>,
    /// Default: mirrored from the user (flagged as lower confidence).
    #[serde(default)]
    pub partner_sensitivities: Option<Vec<f64>>,
}

pub(crate) fn normalized(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

fn check_vector(path: &str, v: &[f64], dim: usize, positive_sum: bool) -> Result<()> {
    if v.len() != dim {
        return Err(Error::validation(path, format!("expected {dim} values, found {}", v.len())));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::validation(format!("{path}[{i}]"), "must be finite and >= 0"));
    }
    if positive_sum && !(v.iter().sum::<f64>() > 0.0) {
        return Err(Error::validation(path, "must have a positive sum"));
    }
    Ok(())
}

impl UserProfile {
    pub fn amplitudes(&self) -> Vec<f64> {
        self.amplitudes
            .clone()
            .unwrap_or_else(|| normalized(&self.window.importances))
    }

    pub fn sensitivities(&self) -> Vec<f64> {
        self.sensitivities
            .clone()
            .unwrap_or_else(|| vec![self.sensitivity; self.traits.dim()])
    }

    pub fn single_life(&self) -> SingleLifeParams {
        SingleLifeParams {
            goals: self.goals.clone(),
            tau_single_years: self.tau_single_years,
        }
    }
}

impl Scenario {
    /// Parses scenario JSON; errors carry the JSON path of the offending field.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { String::new() } else { path };
            Error::validation(path, e.into_inner().to_string())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let scenario: Scenario = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { String::new() } else { path };
            Error::validation(path, e.into_inner().to_string())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Reads a scenario file; relative sample paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut scenario = Scenario::from_json_str(&text)?;
        scenario.base_dir = Some(
            path.parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from(".")),
        );
        Ok(scenario)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn dim(&self) -> usize {
        self.user.traits.dim()
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.horizon_years * 12.0, self.grid_step_months)
    }

    pub fn bands(&self) -> Result<QualityBands> {
        match &self.bands {
            None => Ok(QualityBands::default_bands()),
            Some(b) => QualityBands::new(b.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!("unsupported version {}, expected {SCENARIO_SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if !(self.horizon_years.is_finite() && self.horizon_years > 0.0) {
            return Err(Error::validation("horizon_years", "must be > 0"));
        }
        self.grid()?;
        self.bands()?;
        let mc = &self.mc;
        if mc.suitors < 1 {
            return Err(Error::validation("mc.suitors", "must be >= 1"));
        }
        if mc.realizations < 1 {
            return Err(Error::validation("mc.realizations", "must be >= 1"));
        }
        if mc.min_samples < 1 {
            return Err(Error::validation("mc.min_samples", "must be >= 1"));
        }
        if !(mc.widen_factor.is_finite() && mc.widen_factor >= 1.0) {
            return Err(Error::validation("mc.widen_factor", "must be >= 1"));
        }

        let dim = self.dim();
        let u = &self.user;
        if dim < MIN_TRAIT_DIMENSION {
            return Err(Error::validation(
                "user.traits",
                format!("at least {MIN_TRAIT_DIMENSION} trait dimensions are required, found {dim}"),
            ));
        }
        if u.window.dim() != dim {
            return Err(Error::validation("user.window.centers", format!("expected {dim} values")));
        }
        u.window.validate().map_err(|e| e.with_path_prefix("user.window"))?;
        if !(0.0..=1.0).contains(&u.extroversion) {
            return Err(Error::validation("user.extroversion", "must be in [0, 1]"));
        }
        u.single_life().validate().map_err(|e| e.with_path_prefix("user"))?;
        if let Some(a) = &u.amplitudes {
            check_vector("user.amplitudes", a, dim, true)?;
        }
        if let Some(w) = &u.sensitivities {
            check_vector("user.sensitivities", w, dim, false)?;
        }
        if !(u.sensitivity.is_finite() && u.sensitivity >= 0.0) {
            return Err(Error::validation("user.sensitivity", "must be finite and >= 0"));
        }
        if !(u.social_reference_encounters.is_finite() && u.social_reference_encounters > 0.0) {
            return Err(Error::validation("user.social_reference_encounters", "must be > 0"));
        }

        if let Some(r) = &self.relationship {
            if r.partner_traits.dim() != dim {
                return Err(Error::validation(
                    "relationship.partner_traits",
                    format!("expected {dim} values, found {}", r.partner_traits.dim()),
                ));
            }
            if r.partner_window.dim() != dim {
                return Err(Error::validation("relationship.partner_window.centers", format!("expected {dim} values")));
            }
            r.partner_window
                .validate()
                .map_err(|e| e.with_path_prefix("relationship.partner_window"))?;
            for (path, v, positive) in [
                ("relationship.user_amplitudes", &r.user_amplitudes, true),
                ("relationship.user_sensitivities", &r.user_sensitivities, false),
                ("relationship.partner_amplitudes", &r.partner_amplitudes, true),
                ("relationship.partner_sensitivities", &r.partner_sensitivities, false),
            ] {
                if let Some(v) = v {
                    check_vector(path, v, dim, positive)?;
                }
            }
        }

        if self.groups.is_empty() {
            return Err(Error::validation("groups", "at least one group is required"));
        }
        let mut ids = HashSet::new();
        for (i, g) in self.groups.iter().enumerate() {
            let prefix = format!("groups[{i}]");
            g.validate(dim).map_err(|e| e.with_path_prefix(&prefix))?;
            if !ids.insert(g.id.as_str()) {
                return Err(Error::validation(format!("{prefix}.id"), format!("duplicate group id `{}`", g.id)));
            }
        }
        for (i, g) in self.groups.iter().enumerate() {
            for (j, other) in g.intersect_with.iter().enumerate() {
                if other == &g.id || !ids.contains(other.as_str()) {
                    return Err(Error::validation(
                        format!("groups[{i}].intersect_with[{j}]"),
                        format!("`{other}` is not another group of this scenario"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Resolves a sample-file path against the scenario directory.
    pub fn resolve_samples(&self, group: &GroupModel) -> Result<GroupModel> {
        let mut g = group.clone();
        if let PopulationSource::Samples { path, .. } = &mut g.population {
            let Some(base) = &self.base_dir else {
                return Err(Error::validation(
                    "population.samples",
                    "sample files are only available when running from a scenario file",
                ));
            };
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        Ok(g)
    }

    /// Copy with every user-side utility amplitude (relationship amplitudes
    /// and life-goal weights) multiplied by `factor`, which scales every
    /// option's utility curve by `factor`.
    pub fn with_scaled_amplitudes(&self, factor: f64) -> Scenario {
        let mut s = self.clone();
        s.user.amplitudes = Some(s.user.amplitudes().iter().map(|a| a * factor).collect());
        for g in &mut s.user.goals {
            g.weight *= factor;
        }
        if let Some(r) = &mut s.relationship {
            if let Some(a) = &mut r.user_amplitudes {
                for v in a.iter_mut() {
                    *v *= factor;
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "seed": 1,
        "horizon_years": 1,
        "user": {
            "traits": [0.5, 0.5, 0.5, 0.5],
            "window": {"centers": [0.5, 0.5, 0.5, 0.5], "halfwidths": [0.2, 0.2, 0.2, 0.2], "importances": [1, 1, 1, 1]},
            "extroversion": 0.5,
            "goals": [{"weight": 1, "sustainability": 0.5}],
            "tau_single_years": 2
        },
        "groups": [{
            "id": "work",
            "population": {"parametric": {"count": 500, "mean": [0.5, 0.5, 0.5, 0.5],
                "covariance": [[0.01,0,0,0],[0,0.01,0,0],[0,0,0.01,0],[0,0,0,0.01]],
                "window_width": {"mean": 0.4, "sd": 0.05}}},
            "base_encounter_rate": 10
        }]
    }"#;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let s = Scenario::from_json_str(MINIMAL).unwrap();
        assert_eq!(s.mc.suitors, 2000);
        assert_eq!(s.grid().unwrap().len(), 13);
        assert_eq!(s.user.amplitudes(), vec![0.25; 4]);
        assert!(s.groups[0].established);
    }

    #[test]
    fn unknown_key_is_rejected_with_path() {
        let text = MINIMAL.replace("\"extroversion\"", "\"extroversoin\": 1, \"extroversion\"");
        match Scenario::from_json_str(&text) {
            Err(Error::Validation { field_path, message }) => {
                assert_eq!(field_path, "user.extroversoin");
                assert!(message.contains("extroversoin"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_few_dimensions_rejected() {
        let text = MINIMAL.replace("[0.5, 0.5, 0.5, 0.5]", "[0.5, 0.5, 0.5]");
        match Scenario::from_json_str(&text) {
            Err(Error::Validation { field_path, .. }) => assert_eq!(field_path, "user.traits"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_trait_path() {
        let text = MINIMAL.replacen("\"traits\": [0.5, 0.5, 0.5, 0.5]", "\"traits\": [0.5, 1.5, 0.5, 0.5]", 1);
        match Scenario::from_json_str(&text) {
            Err(Error::Validation { field_path, message }) => {
                assert_eq!(field_path, "user.traits");
                assert!(message.contains("1.5"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_object_is_invalid() {
        assert!(matches!(Scenario::from_json_str("{}"), Err(Error::Validation { .. })));
    }

    #[test]
    fn bad_group_field_is_prefixed() {
        let text = MINIMAL.replace("\"base_encounter_rate\": 10", "\"base_encounter_rate\": -3");
        match Scenario::from_json_str(&text) {
            Err(Error::Validation { field_path, .. }) => assert_eq!(field_path, "groups[0].base_encounter_rate"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn samples_need_a_base_dir() {
        let mut s = Scenario::from_json_str(MINIMAL).unwrap();
        s.groups[0].population = PopulationSource::Samples {
            path: "people.csv".into(),
            suitor_window: None,
        };
        assert!(s.resolve_samples(&s.groups[0]).is_err());
        s.base_dir = Some("/data".into());
        let g = s.resolve_samples(&s.groups[0]).unwrap();
        assert!(matches!(g.population, PopulationSource::Samples { ref path, .. } if path == Path::new("/data/people.csv")));
    }
}
