//! Subgroup populations: synthesis, ingestion, intersection and
//! significance relaxation.

use std::collections::{BTreeMap, HashSet};
use std::ops::Index;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, RelaxationStep, Result, Stage};
use crate::linalg::{self, PrincipalSampler};
use crate::matching::CompatibilityWindow;
use crate::rng::{self, Domain};

/// A point in trait space; every coordinate lies in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TraitVector(Vec<f64>);

impl TraitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("", "trait vector must have at least one dimension"));
        }
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::validation(
                format!("[{i}]"),
                format!("trait value {} is outside [0, 1]", values[i]),
            ));
        }
        Ok(TraitVector(values))
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        TraitVector(vec![value.clamp(0.0, 1.0); dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for TraitVector {
    type Error = String;

    fn try_from(values: Vec<f64>) -> std::result::Result<Self, String> {
        TraitVector::new(values).map_err(|e| e.to_string())
    }
}

impl From<TraitVector> for Vec<f64> {
    fn from(t: TraitVector) -> Self {
        t.0
    }
}

impl Index<usize> for TraitVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DemographicValue {
    Number(f64),
    Text(String),
}

impl DemographicValue {
    fn parse(raw: &str) -> Self {
        match raw.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => DemographicValue::Number(v),
            _ => DemographicValue::Text(raw.trim().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Person {
    pub id: String,
    pub traits: TraitVector,
    /// The person's own requirements on partners.
    pub own_window: CompatibilityWindow,
    pub demographics: BTreeMap<String, DemographicValue>,
}

/// An immutable, labelled collection of persons sharing one trait dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    label: String,
    dim: usize,
    persons: Vec<Person>,
}

impl SampleSet {
    pub fn new(label: impl Into<String>, dim: usize, persons: Vec<Person>) -> Result<Self> {
        if let Some(i) = persons
            .iter()
            .position(|p| p.traits.dim() != dim || p.own_window.dim() != dim)
        {
            return Err(Error::validation(
                format!("persons[{i}]"),
                format!("expected trait dimension {dim}"),
            ));
        }
        Ok(SampleSet {
            label: label.into(),
            dim,
            persons,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn persons(&self) -> &[Person] {
        &self.persons
    }

    pub fn len(&self) -> usize {
        self.persons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }
}

/// Normal distribution of suitor-side window halfwidths, clipped to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidthDistribution {
    pub mean: f64,
    #[serde(default)]
    pub sd: f64,
}

impl WidthDistribution {
    /// Halfwidth 1 accepts any partner regardless of center.
    pub fn accept_all() -> Self {
        WidthDistribution { mean: 1.0, sd: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.mean.is_finite() && self.mean >= 0.0) {
            return Err(Error::validation("mean", "must be finite and >= 0"));
        }
        if !(self.sd.is_finite() && self.sd >= 0.0) {
            return Err(Error::validation("sd", "must be finite and >= 0"));
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sd == 0.0 {
            return self.mean.clamp(0.0, 1.0);
        }
        let normal = Normal::new(self.mean, self.sd).expect("validated width distribution");
        normal.sample(rng).clamp(0.0, 1.0)
    }
}

/// How a synthetic demographic attribute is distributed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DemographicDistribution {
    /// Category name -> relative weight.
    Categorical(BTreeMap<String, f64>),
    Uniform { min: f64, max: f64 },
}

impl DemographicDistribution {
    fn validate(&self) -> Result<()> {
        match self {
            DemographicDistribution::Categorical(weights) => {
                if weights.values().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(Error::validation("categorical", "weights must be >= 0"));
                }
                if !(weights.values().sum::<f64>() > 0.0) {
                    return Err(Error::validation("categorical", "weights must have a positive sum"));
                }
            }
            DemographicDistribution::Uniform { min, max } => {
                if !(min.is_finite() && max.is_finite() && min <= max) {
                    return Err(Error::validation("uniform", "requires finite min <= max"));
                }
            }
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DemographicValue {
        match self {
            DemographicDistribution::Categorical(weights) => {
                let total: f64 = weights.values().sum();
                let mut u = rng.random::<f64>() * total;
                let mut last = None;
                for (name, &w) in weights {
                    if w <= 0.0 {
                        continue;
                    }
                    last = Some(name);
                    if u < w {
                        return DemographicValue::Text(name.clone());
                    }
                    u -= w;
                }
                DemographicValue::Text(last.cloned().unwrap_or_default())
            }
            DemographicDistribution::Uniform { min, max } => {
                DemographicValue::Number(min + (max - min) * rng.random::<f64>())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParametricSpec {
    pub count: usize,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub window_width: WidthDistribution,
    #[serde(default)]
    pub demographics: BTreeMap<String, DemographicDistribution>,
}

/// One person given inline (used by API clients and tests).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonRecord {
    #[serde(default)]
    pub id: Option<String>,
    pub traits: Vec<f64>,
    #[serde(default)]
    pub demographics: BTreeMap<String, DemographicValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PopulationSource {
    Parametric(ParametricSpec),
    /// CSV file with header `trait_1..trait_D[,id][,<demographic names>]`.
    Samples {
        path: PathBuf,
        #[serde(default)]
        suitor_window: Option<WidthDistribution>,
    },
    Inline {
        rows: Vec<PersonRecord>,
        #[serde(default)]
        suitor_window: Option<WidthDistribution>,
    },
}

/// Criterion on one demographic attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemographicFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equals: Option<DemographicValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_of: Option<Vec<DemographicValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    /// Less important filters are dropped first during relaxation.
    #[serde(default = "default_importance")]
    pub importance: f64,
}

fn default_importance() -> f64 {
    1.0
}

impl DemographicFilter {
    pub fn equals(value: DemographicValue) -> Self {
        DemographicFilter {
            equals: Some(value),
            one_of: None,
            min: None,
            max: None,
            importance: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let has_range = self.min.is_some() || self.max.is_some();
        let kinds = [self.equals.is_some(), self.one_of.is_some(), has_range]
            .iter()
            .filter(|&&k| k)
            .count();
        if kinds != 1 {
            return Err(Error::validation(
                "",
                "exactly one of `equals`, `one_of` or `min`/`max` is required",
            ));
        }
        if !self.importance.is_finite() {
            return Err(Error::validation("importance", "must be finite"));
        }
        if let (Some(lo), Some(hi)) = (self.min, self.max) {
            if lo > hi {
                return Err(Error::validation("min", "must not exceed max"));
            }
        }
        Ok(())
    }

    pub fn accepts(&self, value: Option<&DemographicValue>) -> bool {
        let Some(value) = value else {
            return false;
        };
        if let Some(expected) = &self.equals {
            return value == expected;
        }
        if let Some(options) = &self.one_of {
            return options.contains(value);
        }
        match value {
            DemographicValue::Number(x) => {
                self.min.is_none_or(|lo| *x >= lo) && self.max.is_none_or(|hi| *x <= hi)
            }
            DemographicValue::Text(_) => false,
        }
    }
}

pub type DemographicFilters = BTreeMap<String, DemographicFilter>;

fn satisfies(person: &Person, filters: &DemographicFilters) -> bool {
    filters
        .iter()
        .all(|(attr, f)| f.accepts(person.demographics.get(attr)))
}

/// A population the user interacts with, plus how often they interact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupModel {
    pub id: String,
    pub population: PopulationSource,
    /// Encounters per month for an average-extroversion user.
    pub base_encounter_rate: f64,
    #[serde(default = "default_true")]
    pub established: bool,
    /// Ramp-up time constant for groups the user is new to.
    #[serde(default = "default_ramp_tau")]
    pub ramp_tau_months: f64,
    /// Per-trait shift of member traits per year.
    #[serde(default)]
    pub mean_drift_per_year: Option<Vec<f64>>,
    #[serde(default)]
    pub demographic_filters: DemographicFilters,
    /// Other group ids whose members this group is intersected with.
    #[serde(default)]
    pub intersect_with: Vec<String>,
}

fn default_true() -> bool {
    true
}

fn default_ramp_tau() -> f64 {
    6.0
}

impl GroupModel {
    pub fn drift(&self, dim: usize) -> Vec<f64> {
        self.mean_drift_per_year
            .clone()
            .unwrap_or_else(|| vec![0.0; dim])
    }

    /// Checks the invariants that do not depend on reading files.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::validation("id", "must not be empty"));
        }
        if !(self.base_encounter_rate.is_finite() && self.base_encounter_rate >= 0.0) {
            return Err(Error::validation("base_encounter_rate", "must be finite and >= 0"));
        }
        if !(self.ramp_tau_months.is_finite() && self.ramp_tau_months > 0.0) {
            return Err(Error::validation("ramp_tau_months", "must be > 0"));
        }
        if let Some(d) = &self.mean_drift_per_year {
            if d.len() != dim {
                return Err(Error::validation(
                    "mean_drift_per_year",
                    format!("expected {dim} values, found {}", d.len()),
                ));
            }
            if d.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation("mean_drift_per_year", "must be finite"));
            }
        }
        for (name, f) in &self.demographic_filters {
            f.validate()
                .map_err(|e| e.with_path_prefix(&format!("demographic_filters.{name}")))?;
        }
        match &self.population {
            PopulationSource::Parametric(p) => validate_parametric(p, dim)
                .map_err(|e| e.with_path_prefix("population.parametric"))?,
            PopulationSource::Samples { suitor_window, .. } => {
                if let Some(w) = suitor_window {
                    w.validate()
                        .map_err(|e| e.with_path_prefix("population.samples.suitor_window"))?;
                }
            }
            PopulationSource::Inline {
                rows,
                suitor_window,
            } => {
                if rows.is_empty() {
                    return Err(Error::validation("population.inline.rows", "must not be empty"));
                }
                for (i, r) in rows.iter().enumerate() {
                    if r.traits.len() != dim {
                        return Err(Error::validation(
                            format!("population.inline.rows[{i}].traits"),
                            format!("expected {dim} values, found {}", r.traits.len()),
                        ));
                    }
                    TraitVector::new(r.traits.clone()).map_err(|e| {
                        e.with_path_prefix(&format!("population.inline.rows[{i}].traits"))
                    })?;
                }
                if let Some(w) = suitor_window {
                    w.validate()
                        .map_err(|e| e.with_path_prefix("population.inline.suitor_window"))?;
                }
            }
        }
        Ok(())
    }
}

fn validate_parametric(p: &ParametricSpec, dim: usize) -> Result<()> {
    if p.count < 1 {
        return Err(Error::validation("count", "must be >= 1"));
    }
    if p.mean.len() != dim {
        return Err(Error::validation(
            "mean",
            format!("expected {dim} values, found {}", p.mean.len()),
        ));
    }
    TraitVector::new(p.mean.clone()).map_err(|e| e.with_path_prefix("mean"))?;
    let cov = linalg::matrix_from_rows(&p.covariance, dim)
        .map_err(|e| Error::validation("covariance", e.to_string()))?;
    PrincipalSampler::new(&p.mean, &cov).map_err(|e| Error::validation("covariance", e.to_string()))?;
    p.window_width
        .validate()
        .map_err(|e| e.with_path_prefix("window_width"))?;
    for (name, d) in &p.demographics {
        d.validate()
            .map_err(|e| e.with_path_prefix(&format!("demographics.{name}")))?;
    }
    Ok(())
}

fn own_window_for(traits: &TraitVector, widths: &WidthDistribution, rng: &mut impl Rng) -> CompatibilityWindow {
    let halfwidths = (0..traits.dim()).map(|_| widths.draw(rng)).collect();
    CompatibilityWindow::new(traits.clone(), halfwidths)
}

/// Materializes a group's population.
///
/// Parametric groups draw traits from the clipped Gaussian and give each
/// person a window centered on their own traits. Person `k` uses its own
/// random stream, so the result is identical for a given seed regardless of
/// threading. `count_override` replaces the configured count (parametric) or
/// truncates the rows (sample files and inline rows).
pub fn load_population(
    spec: &GroupModel,
    dim: usize,
    seed: u64,
    count_override: Option<usize>,
) -> Result<SampleSet> {
    spec.validate(dim)?;
    match &spec.population {
        PopulationSource::Parametric(p) => {
            let count = count_override.unwrap_or(p.count);
            if count < 1 {
                return Err(Error::validation("count_override", "must be >= 1"));
            }
            let cov = linalg::matrix_from_rows(&p.covariance, dim)
                .map_err(|e| Error::validation("population.parametric.covariance", e.to_string()))?;
            let sampler = PrincipalSampler::new(&p.mean, &cov)
                .map_err(|e| Error::validation("population.parametric.covariance", e.to_string()))?;
            let persons: Vec<Person> = (0..count)
                .into_par_iter()
                .map(|k| {
                    let mut r = rng::stream(seed, Domain::Population, k as u64);
                    let traits = TraitVector(sampler.sample(&mut r));
                    let own_window = own_window_for(&traits, &p.window_width, &mut r);
                    let demographics = p
                        .demographics
                        .iter()
                        .map(|(name, d)| (name.clone(), d.draw(&mut r)))
                        .collect();
                    Person {
                        id: format!("{}#{k}", spec.id),
                        traits,
                        own_window,
                        demographics,
                    }
                })
                .collect();
            SampleSet::new(spec.id.clone(), dim, persons)
        }
        PopulationSource::Samples {
            path,
            suitor_window,
        } => {
            let records = read_sample_file(path, dim)?;
            finish_records(spec, dim, seed, count_override, records, suitor_window.as_ref())
        }
        PopulationSource::Inline {
            rows,
            suitor_window,
        } => {
            let records = rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    Ok(PersonRecord {
                        id: Some(r.id.clone().unwrap_or_else(|| format!("{}#{i}", spec.id))),
                        traits: r.traits.clone(),
                        demographics: r.demographics.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            finish_records(spec, dim, seed, count_override, records, suitor_window.as_ref())
        }
    }
}

fn finish_records(
    spec: &GroupModel,
    dim: usize,
    seed: u64,
    count_override: Option<usize>,
    mut records: Vec<PersonRecord>,
    suitor_window: Option<&WidthDistribution>,
) -> Result<SampleSet> {
    if let Some(n) = count_override {
        if n < 1 || n > records.len() {
            return Err(Error::validation(
                "count_override",
                format!("must be between 1 and the {} available rows", records.len()),
            ));
        }
        records.truncate(n);
    }
    let widths = suitor_window.cloned().unwrap_or_else(WidthDistribution::accept_all);
    let persons = records
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            let traits = TraitVector::new(r.traits)?;
            let mut rng = rng::stream(seed, Domain::SuitorWindow, k as u64);
            let own_window = own_window_for(&traits, &widths, &mut rng);
            Ok(Person {
                id: r.id.unwrap_or_else(|| format!("{}#{k}", spec.id)),
                traits,
                own_window,
                demographics: r.demographics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SampleSet::new(spec.id.clone(), dim, persons)
}

/// Parses a population sample file.
///
/// The header must start with `trait_1..trait_D`; an `id` column is used as
/// the person identity and every other column is a demographic attribute.
/// Empty demographic cells mean "unknown".
pub fn read_sample_file(path: &Path, dim: usize) -> Result<Vec<PersonRecord>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_samples(file, &path.display().to_string(), dim)
}

pub fn parse_samples<R: std::io::Read>(reader: R, source_name: &str, dim: usize) -> Result<Vec<PersonRecord>> {
    let ingest = |row: usize, field: &str, message: String| Error::Ingestion {
        source_name: source_name.to_string(),
        row,
        field: field.to_string(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| ingest(0, "header", e.to_string()))?
        .clone();
    for i in 0..dim {
        let expected = format!("trait_{}", i + 1);
        match headers.get(i) {
            Some(h) if h == expected => {}
            other => {
                return Err(ingest(
                    0,
                    &expected,
                    format!("expected header column {expected}, found {:?}", other.unwrap_or("")),
                ))
            }
        }
    }
    let extra: Vec<String> = headers.iter().skip(dim).map(str::to_string).collect();
    let mut out = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| ingest(row, "record", e.to_string()))?;
        if record.len() != headers.len() {
            return Err(ingest(
                row,
                "record",
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        let mut traits = Vec::with_capacity(dim);
        for i in 0..dim {
            let field = format!("trait_{}", i + 1);
            let raw = &record[i];
            let v: f64 = raw
                .parse()
                .map_err(|_| ingest(row, &field, format!("not a number: {raw:?}")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(ingest(row, &field, format!("value {v} outside [0, 1]")));
            }
            traits.push(v);
        }
        let mut id = None;
        let mut demographics = BTreeMap::new();
        for (name, raw) in extra.iter().zip(record.iter().skip(dim)) {
            if name == "id" {
                if raw.is_empty() {
                    return Err(ingest(row, "id", "empty id".into()));
                }
                id = Some(raw.to_string());
            } else if !raw.is_empty() {
                demographics.insert(name.clone(), DemographicValue::parse(raw));
            }
        }
        out.push(PersonRecord {
            id,
            traits,
            demographics,
        });
    }
    Ok(out)
}

/// Controls of [`ensure_significance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxationPolicy {
    pub min_samples: usize,
    pub widen_factor: f64,
    pub max_widenings: usize,
}

impl Default for RelaxationPolicy {
    fn default() -> Self {
        RelaxationPolicy {
            min_samples: 200,
            widen_factor: 1.25,
            max_widenings: 5,
        }
    }
}

/// Members of one or more intersected groups after demographic filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupSelection {
    pub source_groups: Vec<String>,
    /// Filters still in force.
    pub filters: DemographicFilters,
    /// Intersection before filtering; relaxation draws from here.
    pub pool: Vec<Person>,
    pub members: SampleSet,
    pub relaxation_log: Vec<RelaxationStep>,
    /// Uniform factor applied to the user's window halfwidths by relaxation.
    pub window_scale: f64,
}

impl SubgroupSelection {
    pub fn label(&self) -> &str {
        self.members.label()
    }

    pub fn in_window_count(&self, window: &CompatibilityWindow) -> usize {
        let w = window.scaled(self.window_scale);
        self.members
            .persons()
            .iter()
            .filter(|p| w.contains(p.traits.values()))
            .count()
    }
}

/// Persons present in every input that pass all `filters`, in the order of
/// the first input, without duplicates. Identity is the person id.
pub fn intersect_subgroups(groups: &[&SampleSet], filters: &DemographicFilters) -> Result<SubgroupSelection> {
    let Some(first) = groups.first() else {
        return Err(Error::validation("groups", "at least one group is required"));
    };
    let dim = first.dim();
    if let Some(bad) = groups.iter().find(|g| g.dim() != dim) {
        return Err(Error::validation(
            "groups",
            format!(
                "trait dimension mismatch: `{}` has {}, `{}` has {}",
                first.label(),
                dim,
                bad.label(),
                bad.dim()
            ),
        ));
    }
    for (name, f) in filters {
        f.validate()
            .map_err(|e| e.with_path_prefix(&format!("demographic_filters.{name}")))?;
    }
    let others: Vec<HashSet<&str>> = groups[1..]
        .iter()
        .map(|g| g.persons().iter().map(|p| p.id.as_str()).collect())
        .collect();
    let mut seen = HashSet::new();
    let pool: Vec<Person> = first
        .persons()
        .iter()
        .filter(|p| others.iter().all(|s| s.contains(p.id.as_str())))
        .filter(|p| seen.insert(p.id.clone()))
        .cloned()
        .collect();
    let members: Vec<Person> = pool.iter().filter(|p| satisfies(p, filters)).cloned().collect();
    Ok(SubgroupSelection {
        source_groups: groups.iter().map(|g| g.label().to_string()).collect(),
        filters: filters.clone(),
        members: SampleSet::new(first.label(), dim, members)?,
        pool,
        relaxation_log: Vec::new(),
        window_scale: 1.0,
    })
}

/// Relaxes a selection until at least `policy.min_samples` members fall in
/// the user's window.
///
/// Window halfwidths are first scaled by `widen_factor` up to
/// `max_widenings` times; demographic filters are then dropped in ascending
/// importance. Each step is logged.
pub fn ensure_significance(
    selection: SubgroupSelection,
    window: &CompatibilityWindow,
    policy: &RelaxationPolicy,
) -> Result<SubgroupSelection> {
    if policy.min_samples < 1 {
        return Err(Error::validation("min_samples", "must be >= 1"));
    }
    if !(policy.widen_factor.is_finite() && policy.widen_factor >= 1.0) {
        return Err(Error::validation("widen_factor", "must be >= 1"));
    }
    if window.dim() != selection.members.dim() {
        return Err(Error::validation("window", "dimension differs from the selection"));
    }
    let mut sel = selection;
    let mut count = sel.in_window_count(window);
    if count >= policy.min_samples {
        return Ok(sel);
    }
    let mut step = 0;
    for _ in 0..policy.max_widenings {
        step += 1;
        sel.window_scale *= policy.widen_factor;
        count = sel.in_window_count(window);
        sel.relaxation_log.push(RelaxationStep {
            step,
            action: format!("widen windows by {} (scale {:.6})", policy.widen_factor, sel.window_scale),
            in_window: count,
        });
        if count >= policy.min_samples {
            return Ok(sel);
        }
    }
    let mut order: Vec<(String, f64)> = sel
        .filters
        .iter()
        .map(|(k, f)| (k.clone(), f.importance))
        .collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    for (name, _) in order {
        step += 1;
        sel.filters.remove(&name);
        let members: Vec<Person> = sel
            .pool
            .iter()
            .filter(|p| satisfies(p, &sel.filters))
            .cloned()
            .collect();
        sel.members = SampleSet::new(sel.members.label().to_string(), sel.members.dim(), members)?;
        count = sel.in_window_count(window);
        sel.relaxation_log.push(RelaxationStep {
            step,
            action: format!("drop demographic filter `{name}`"),
            in_window: count,
        });
        if count >= policy.min_samples {
            return Ok(sel);
        }
    }
    Err(Error::InsufficientData {
        stage: Stage::Population,
        subject: sel.label().to_string(),
        message: format!(
            "{count} in-window members after all relaxations, {} required",
            policy.min_samples
        ),
        relaxation_log: sel.relaxation_log,
    })
}
