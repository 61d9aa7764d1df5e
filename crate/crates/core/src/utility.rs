//! Utility functionals and valuation of the open (single, looking) option.
//!
//! A relationship between persons 1 and 2 is worth
//!
//! ```text
//! U(t) = Π_g Σ_i a_{g,i} exp(-w_{g,i} Δ_{g,i} t)
//! ```
//!
//! where `Δ_{g,i} = |ideal_{g,i} - trait_{other(g),i}|` is how far the other
//! person sits from what person `g` wants on trait `i`. When each person's
//! ideal equals their own traits this is the plain trait-difference form.
//! Mismatched traits make the relationship depreciate in a compounding way.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage};
use crate::grid::TimeGrid;
use crate::linalg::{self, PrincipalSampler};
use crate::matching::CompatibilityWindow;
use crate::population::{SubgroupSelection, TraitVector};
use crate::rng::{self, Domain};
use crate::sociology::CumulativeForecast;

/// One side of a relationship.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartyParams {
    pub amplitudes: Vec<f64>,
    pub sensitivities: Vec<f64>,
    /// Desired partner trait values (window centers).
    pub ideal: Vec<f64>,
    pub traits: Vec<f64>,
}

impl PartyParams {
    fn validate(&self, dim: usize) -> Result<()> {
        for (name, v) in [
            ("amplitudes", &self.amplitudes),
            ("sensitivities", &self.sensitivities),
            ("ideal", &self.ideal),
            ("traits", &self.traits),
        ] {
            if v.len() != dim {
                return Err(Error::validation(name, format!("expected {dim} values, found {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::validation(name, "values must be finite and >= 0"));
            }
        }
        if !(self.amplitudes.iter().sum::<f64>() > 0.0) {
            return Err(Error::validation("amplitudes", "must have a positive sum"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationshipParams {
    parties: [PartyParams; 2],
}

impl RelationshipParams {
    pub fn new(first: PartyParams, second: PartyParams) -> Result<Self> {
        let dim = first.traits.len();
        if dim == 0 {
            return Err(Error::validation("traits", "must not be empty"));
        }
        first.validate(dim).map_err(|e| e.with_path_prefix("person_1"))?;
        second.validate(dim).map_err(|e| e.with_path_prefix("person_2"))?;
        Ok(RelationshipParams {
            parties: [first, second],
        })
    }

    pub fn parties(&self) -> &[PartyParams; 2] {
        &self.parties
    }

    pub fn swapped(&self) -> Self {
        let [a, b] = self.parties.clone();
        RelationshipParams { parties: [b, a] }
    }

    /// Multiplies every amplitude of party `g` by `factor`.
    pub fn scale_amplitudes(&mut self, g: usize, factor: f64) {
        for a in &mut self.parties[g].amplitudes {
            *a *= factor;
        }
    }

    /// Per-trait decay rates `w_{g,i} Δ_{g,i}` of party `g`.
    pub fn decay_rates(&self, g: usize) -> Vec<f64> {
        let me = &self.parties[g];
        let other = &self.parties[1 - g];
        me.sensitivities
            .iter()
            .zip(me.ideal.iter().zip(&other.traits))
            .map(|(w, (ideal, t))| w * (ideal - t).abs())
            .collect()
    }
}

/// Relationship utility at relationship age `t_years`.
pub fn relationship_utility(params: &RelationshipParams, t_years: f64) -> f64 {
    (0..2)
        .map(|g| {
            let party = &params.parties[g];
            party
                .amplitudes
                .iter()
                .zip(params.decay_rates(g))
                .map(|(a, rate)| a * (-rate * t_years).exp())
                .sum::<f64>()
        })
        .product()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifeGoal {
    pub weight: f64,
    /// Fraction of the goal's value that single life keeps indefinitely.
    pub sustainability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleLifeParams {
    pub goals: Vec<LifeGoal>,
    pub tau_single_years: f64,
}

impl SingleLifeParams {
    pub fn validate(&self) -> Result<()> {
        if self.goals.is_empty() {
            return Err(Error::validation("goals", "at least one goal is required"));
        }
        for (i, g) in self.goals.iter().enumerate() {
            if !(g.weight.is_finite() && g.weight >= 0.0) {
                return Err(Error::validation(format!("goals[{i}].weight"), "must be >= 0"));
            }
            if !(0.0..=1.0).contains(&g.sustainability) {
                return Err(Error::validation(format!("goals[{i}].sustainability"), "must be in [0, 1]"));
            }
        }
        if !(self.goals.iter().map(|g| g.weight).sum::<f64>() > 0.0) {
            return Err(Error::validation("goals", "weights must have a positive sum"));
        }
        if !(self.tau_single_years.is_finite() && self.tau_single_years > 0.0) {
            return Err(Error::validation("tau_single_years", "must be > 0"));
        }
        Ok(())
    }
}

/// `Σ_i g_i (s_i + (1 - s_i) e^(-t / tau))`.
pub fn single_utility(params: &SingleLifeParams, t_years: f64) -> f64 {
    let decay = (-t_years / params.tau_single_years).exp();
    params
        .goals
        .iter()
        .map(|g| g.weight * (g.sustainability + (1.0 - g.sustainability) * decay))
        .sum()
}

/// Utility over the time grid, with an optional p10/p90 band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityCurve {
    pub months: Vec<f64>,
    pub mean: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p10: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p90: Option<Vec<f64>>,
}

impl UtilityCurve {
    pub fn deterministic(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        UtilityCurve {
            months: grid.months().to_vec(),
            mean: grid.months().iter().map(|m| f(m / 12.0)).collect(),
            p10: None,
            p90: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuitorSample {
    pub suitors: Vec<TraitVector>,
    pub sources: Vec<String>,
    pub seed: u64,
}

impl SuitorSample {
    pub fn len(&self) -> usize {
        self.suitors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.suitors.is_empty()
    }

    pub fn concat(parts: Vec<SuitorSample>, seed: u64) -> Self {
        let mut out = SuitorSample {
            suitors: Vec::new(),
            sources: Vec::new(),
            seed,
        };
        for p in parts {
            out.suitors.extend(p.suitors);
            for s in p.sources {
                if !out.sources.contains(&s) {
                    out.sources.push(s);
                }
            }
        }
        out
    }
}

/// Draws plausible suitors from the principal components of the members'
/// occupied trait space.
///
/// Draw `k` uses its own counter-derived random stream, so the sample does
/// not depend on thread count.
pub fn sample_suitors(selection: &SubgroupSelection, count: usize, seed: u64) -> Result<SuitorSample> {
    if count < 1 {
        return Err(Error::validation("count", "must be >= 1"));
    }
    let members = selection.members.persons();
    let dim = selection.members.dim();
    if members.len() < dim + 1 {
        return Err(Error::insufficient(
            Stage::Utility,
            selection.label(),
            format!("{} members cannot span a {dim}-dimensional covariance", members.len()),
        ));
    }
    let (mean, cov) = linalg::mean_and_covariance(members.iter().map(|p| p.traits.values()), dim);
    let sampler = PrincipalSampler::new(&mean, &cov)
        .map_err(|e| Error::validation("members", format!("sample covariance unusable: {e}")))?;
    let suitors = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, Domain::Suitors, k as u64);
            TraitVector::new(sampler.sample(&mut r)).expect("clipped sample lies in [0, 1]")
        })
        .collect();
    Ok(SuitorSample {
        suitors,
        sources: selection.source_groups.clone(),
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyProfile {
    pub mean: f64,
    pub std_dev: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner: Option<f64>,
}

/// Trait-averaged decay rate `(1/D) Σ_i w_i |ideal_i - s_i|` of a candidate.
pub fn penalty(candidate: &[f64], window: &CompatibilityWindow, sensitivities: &[f64]) -> f64 {
    let dim = window.dim();
    candidate
        .iter()
        .zip(window.centers.values())
        .zip(sensitivities)
        .map(|((s, c), w)| w * (c - s).abs())
        .sum::<f64>()
        / dim as f64
}

/// Mean and (population) standard deviation of the suitors' penalties, plus
/// the partner's penalty when given.
pub fn penalty_profile(
    suitors: &SuitorSample,
    window: &CompatibilityWindow,
    sensitivities: &[f64],
    partner: Option<&TraitVector>,
) -> Result<PenaltyProfile> {
    let dim = window.dim();
    if sensitivities.len() != dim
        || suitors.suitors.iter().any(|s| s.dim() != dim)
        || partner.is_some_and(|p| p.dim() != dim)
    {
        return Err(Error::validation("sensitivities", "dimensions must align with the window"));
    }
    let values: Vec<f64> = suitors
        .suitors
        .iter()
        .map(|s| penalty(s.values(), window, sensitivities))
        .collect();
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(PenaltyProfile {
        mean,
        std_dev: var.sqrt(),
        partner: partner.map(|p| penalty(p.values(), window, sensitivities)),
    })
}

/// Builds relationship parameters between the user and an arbitrary suitor.
///
/// The suitor's ideal is taken to be their own traits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationshipTemplate {
    pub user: PartyParams,
    pub suitor_amplitudes: Vec<f64>,
    pub suitor_sensitivities: Vec<f64>,
}

impl RelationshipTemplate {
    pub fn build(&self, suitor: &TraitVector) -> Result<RelationshipParams> {
        RelationshipParams::new(
            self.user.clone(),
            PartyParams {
                amplitudes: self.suitor_amplitudes.clone(),
                sensitivities: self.suitor_sensitivities.clone(),
                ideal: suitor.values().to_vec(),
                traits: suitor.values().to_vec(),
            },
        )
    }
}

/// Inputs of the open-option mixture on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenOptionModel {
    /// Cumulative match probability `C(t_k)`.
    pub cumulative: Vec<f64>,
    /// Single-life utility `U_single(t_k)`.
    pub single: Vec<f64>,
    /// `relationship_by_age[s][m]`: utility with suitor `s` at relationship
    /// age `t_m`.
    pub relationship_by_age: Vec<Vec<f64>>,
}

impl OpenOptionModel {
    fn validate(&self) -> Result<()> {
        let n = self.cumulative.len();
        if self.single.len() != n {
            return Err(Error::validation("single", "length differs from the grid"));
        }
        if self.relationship_by_age.iter().any(|r| r.len() != n) {
            return Err(Error::validation("relationship_by_age", "length differs from the grid"));
        }
        if self.relationship_by_age.is_empty() && self.cumulative.iter().any(|&c| c > 0.0) {
            return Err(Error::validation(
                "suitors",
                "suitor sample is empty but matches are possible",
            ));
        }
        Ok(())
    }

    /// Suitor-averaged relationship utility at each relationship age.
    pub fn mean_relationship(&self) -> Vec<f64> {
        let n = self.cumulative.len();
        let s = self.relationship_by_age.len();
        if s == 0 {
            return vec![0.0; n];
        }
        (0..n)
            .map(|m| self.relationship_by_age.iter().map(|r| r[m]).sum::<f64>() / s as f64)
            .collect()
    }

    /// `E[U](t_k) = (1 - C_k) U_single(t_k) + Σ_{j<=k} ΔC_j Ū(t_k - t_j)`.
    pub fn mixture_mean(&self) -> Vec<f64> {
        let n = self.cumulative.len();
        let rel = self.mean_relationship();
        let mut dc = Vec::with_capacity(n);
        let mut prev = 0.0;
        for &c in &self.cumulative {
            dc.push((c - prev).max(0.0));
            prev = c;
        }
        (0..n)
            .map(|k| {
                let matched: f64 = (0..=k).map(|j| dc[j] * rel[k - j]).sum();
                (1.0 - self.cumulative[k]) * self.single[k] + matched
            })
            .collect()
    }

    /// One sampled future: a match step drawn from `ΔC` (or none) and one
    /// suitor drawn uniformly.
    pub fn rollout<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.cumulative.len();
        let u: f64 = rng.random();
        let start = self.cumulative.partition_point(|&c| c <= u);
        if start >= n {
            return self.single.clone();
        }
        let s = rng.random_range(0..self.relationship_by_age.len());
        let rel = &self.relationship_by_age[s];
        (0..n)
            .map(|k| if k < start { self.single[k] } else { rel[k - start] })
            .collect()
    }

    /// `realizations` independent rollouts, realization `r` on stream `r`.
    pub fn rollouts(&self, realizations: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..realizations)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng::stream(seed, Domain::Rollouts, r as u64);
                self.rollout(&mut rng)
            })
            .collect()
    }
}

/// Pointwise mean and standard error of a set of rollouts.
pub fn rollout_statistics(rollouts: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let Some(first) = rollouts.first() else {
        return (Vec::new(), Vec::new());
    };
    let n = rollouts.len() as f64;
    let len = first.len();
    let mut mean = vec![0.0; len];
    let mut stderr = vec![0.0; len];
    for k in 0..len {
        let m = rollouts.iter().map(|r| r[k]).sum::<f64>() / n;
        let var = if rollouts.len() > 1 {
            rollouts.iter().map(|r| (r[k] - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        mean[k] = m;
        stderr[k] = (var / n).sqrt();
    }
    (mean, stderr)
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Closed-form mean plus a p10/p90 band from rollouts.
///
/// The band is widened where needed to contain the mean, which can fall
/// outside the 10-90 range when matches are rare.
pub fn summarize_open_option(model: &OpenOptionModel, months: &[f64], realizations: usize, seed: u64) -> Result<UtilityCurve> {
    model.validate()?;
    if realizations < 1 {
        return Err(Error::validation("realizations", "must be >= 1"));
    }
    let mean = model.mixture_mean();
    let rollouts = model.rollouts(realizations, seed);
    let n = mean.len();
    let mut p10 = Vec::with_capacity(n);
    let mut p90 = Vec::with_capacity(n);
    let mut column = vec![0.0; realizations];
    for k in 0..n {
        for (c, r) in column.iter_mut().zip(&rollouts) {
            *c = r[k];
        }
        column.sort_by(f64::total_cmp);
        p10.push(quantile_sorted(&column, 0.1).min(mean[k]));
        p90.push(quantile_sorted(&column, 0.9).max(mean[k]));
    }
    Ok(UtilityCurve {
        months: months.to_vec(),
        mean,
        p10: Some(p10),
        p90: Some(p90),
    })
}

/// Expected utility of being single but open to a relationship.
pub fn open_option_utility(
    forecast: &CumulativeForecast,
    suitors: &SuitorSample,
    template: &RelationshipTemplate,
    single: &SingleLifeParams,
    realizations: usize,
    seed: u64,
) -> Result<UtilityCurve> {
    let grid = TimeGrid::from_months(forecast.months.clone())?;
    if !grid.is_uniform() {
        return Err(Error::validation("grid", "open-option valuation needs a uniform grid"));
    }
    if suitors.is_empty() && forecast.total.iter().any(|&c| c > 0.0) {
        return Err(Error::validation(
            "suitors",
            "suitor sample is empty but matches are possible",
        ));
    }
    let ages: Vec<f64> = grid.months().iter().map(|m| m / 12.0).collect();
    let relationship_by_age = suitors
        .suitors
        .par_iter()
        .map(|s| {
            let params = template.build(s)?;
            Ok(ages.iter().map(|&t| relationship_utility(&params, t)).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let model = OpenOptionModel {
        cumulative: forecast.total.clone(),
        single: ages.iter().map(|&t| single_utility(single, t)).collect(),
        relationship_by_age,
    };
    summarize_open_option(&model, grid.months(), realizations, seed)
}
