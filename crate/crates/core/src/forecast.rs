//! End-to-end pipeline: population, matching, sociology, utility, valuation.

use serde::Serialize;

use crate::error::{Error, RelaxationStep, Result};
use crate::grid::TimeGrid;
use crate::matching::{encounter_probabilities, quality_score, EncounterProbabilityCurve};
use crate::parallel;
use crate::population::{ensure_significance, intersect_subgroups, load_population, SampleSet, SubgroupSelection};
use crate::rng::derive_seed;
use crate::scenario::{normalized, RelationshipStatus, Scenario};
use crate::sociology::{cumulative_forecast, encounter_schedule, CumulativeForecast, EncounterSchedule};
use crate::utility::{
    open_option_utility, penalty_profile, relationship_utility, sample_suitors, single_utility, PartyParams,
    PenaltyProfile, RelationshipParams, RelationshipTemplate, SuitorSample, UtilityCurve,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

const POPULATION_SEED: u64 = 0x100;
const SUITOR_SEED: u64 = 0x200;
const ROLLOUT_SEED: u64 = 0x300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    StayInRelationship,
    SingleClosed,
    SingleOpen,
}

impl OptionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptionKind::StayInRelationship => "stay_in_relationship",
            OptionKind::SingleClosed => "single_closed",
            OptionKind::SingleOpen => "single_open",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptionForecast {
    pub kind: OptionKind,
    pub curve: UtilityCurve,
    /// Time-average of the mean curve over the horizon.
    pub value: f64,
}

impl OptionForecast {
    pub fn new(kind: OptionKind, curve: UtilityCurve, grid: &TimeGrid) -> Self {
        let value = grid.time_average(&curve.mean);
        OptionForecast { kind, curve, value }
    }

    /// Time-averaged lower and upper band; the mean for deterministic curves.
    fn band_values(&self) -> (f64, f64) {
        let grid = TimeGrid::from_months(self.curve.months.clone()).ok();
        match (&self.curve.p10, &self.curve.p90, grid) {
            (Some(lo), Some(hi), Some(g)) => (g.time_average(lo), g.time_average(hi)),
            _ => (self.value, self.value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub option: OptionKind,
    /// Best value minus second-best value (0 with a single option).
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runner_up: Option<OptionKind>,
    /// Whether the time-averaged uncertainty bands of the best and second
    /// option overlap.
    pub bands_overlap: bool,
    pub note: String,
}

/// Picks the option with the largest value.
///
/// Exact ties go to `current`, the option matching the user's present
/// situation, and otherwise to the earlier option.
pub fn recommend(options: &[OptionForecast], current: OptionKind) -> Result<Recommendation> {
    if options.is_empty() {
        return Err(Error::validation("options", "at least one option is required"));
    }
    let best_value = options.iter().map(|o| o.value).fold(f64::NEG_INFINITY, f64::max);
    let best = options
        .iter()
        .find(|o| o.value == best_value && o.kind == current)
        .or_else(|| options.iter().find(|o| o.value == best_value))
        .expect("non-empty");
    let runner = options
        .iter()
        .filter(|o| o.kind != best.kind)
        .max_by(|a, b| a.value.total_cmp(&b.value));
    let Some(runner) = runner else {
        return Ok(Recommendation {
            option: best.kind,
            margin: 0.0,
            runner_up: None,
            bands_overlap: false,
            note: "only one option was evaluated".into(),
        });
    };
    let (best_lo, _) = best.band_values();
    let (_, runner_hi) = runner.band_values();
    let bands_overlap = best_lo <= runner_hi;
    let note = if bands_overlap {
        format!(
            "{} leads {} but their uncertainty bands overlap",
            best.kind.as_str(),
            runner.kind.as_str()
        )
    } else {
        format!(
            "{} leads {} beyond the uncertainty bands",
            best.kind.as_str(),
            runner.kind.as_str()
        )
    };
    Ok(Recommendation {
        option: best.kind,
        margin: best.value - runner.value,
        runner_up: Some(runner.kind),
        bands_overlap,
        note,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scores {
    /// One minus the member-weighted mean single-encounter probability at t = 0.
    pub selectivity: f64,
    /// Expected encounters over the horizon divided by the scenario's
    /// reference volume; nonnegative, unbounded.
    pub social_growth: f64,
    /// Cumulative match probability at 1, 5 and 10 years (null beyond the horizon).
    pub opportunity_1y: Option<f64>,
    pub opportunity_5y: Option<f64>,
    pub opportunity_10y: Option<f64>,
    /// Fraction of in-window suitors whose quality is strictly below the partner's.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner_quality_percentile: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub id: String,
    pub source_groups: Vec<String>,
    pub pool_size: usize,
    pub members: usize,
    pub in_window_members: usize,
    pub window_scale: f64,
    pub relaxation_log: Vec<RelaxationStep>,
    pub encounter_probability: EncounterProbabilityCurve,
    pub expected_encounters: Vec<f64>,
    pub suitors_drawn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub seed: u64,
    pub trait_dimension: usize,
    pub months: Vec<f64>,
    pub groups: Vec<GroupSummary>,
    pub forecast: CumulativeForecast,
    pub options: Vec<OptionForecast>,
    pub recommendation: Recommendation,
    pub scores: Scores,
    pub penalty: PenaltyProfile,
    /// Inputs that were filled in by assumption rather than given.
    pub assumptions: Vec<String>,
}

impl Report {
    /// Canonical JSON encoding shared by every front end.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn option(&self, kind: OptionKind) -> Option<&OptionForecast> {
        self.options.iter().find(|o| o.kind == kind)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EngineOptions {
    /// Worker threads; `None` uses `HEARTCAST_THREADS` or the rayon default.
    pub threads: Option<usize>,
}

/// Intermediate results of the pipeline, before scoring.
#[derive(Debug, Clone)]
pub struct PipelineState {
    pub grid: TimeGrid,
    pub selections: Vec<SubgroupSelection>,
    pub curves: Vec<EncounterProbabilityCurve>,
    pub schedules: Vec<EncounterSchedule>,
    pub forecast: CumulativeForecast,
    pub suitors: SuitorSample,
    pub suitor_counts: Vec<usize>,
    pub options: Vec<OptionForecast>,
    pub partner: Option<RelationshipParams>,
    pub assumptions: Vec<String>,
}

pub fn run_forecast(scenario: &Scenario) -> Result<Report> {
    run_forecast_with(scenario, &EngineOptions::default())
}

pub fn run_forecast_with(scenario: &Scenario, options: &EngineOptions) -> Result<Report> {
    let threads = options.threads.or_else(parallel::thread_cap_from_env);
    parallel::with_threads(threads, || {
        let state = run_pipeline(scenario)?;
        build_report(scenario, state)
    })
}

/// Splits `total` into integer parts proportional to `weights` (largest remainder).
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || !(sum > 0.0) {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if weights[i] > 0.0 {
            counts[i] += 1;
            left -= 1;
        }
    }
    counts
}

pub fn run_pipeline(scenario: &Scenario) -> Result<PipelineState> {
    scenario.validate()?;
    let dim = scenario.dim();
    let grid = scenario.grid()?;
    let bands = scenario.bands()?;
    let user = &scenario.user;
    let mut assumptions = Vec::new();

    // population
    let mut populations: Vec<SampleSet> = Vec::with_capacity(scenario.groups.len());
    for (g, group) in scenario.groups.iter().enumerate() {
        let resolved = scenario
            .resolve_samples(group)
            .map_err(|e| e.with_path_prefix(&format!("groups[{g}]")))?;
        let seed = derive_seed(scenario.seed, POPULATION_SEED + g as u64);
        let set = load_population(&resolved, dim, seed, None).map_err(|e| e.with_path_prefix(&format!("groups[{g}]")))?;
        populations.push(set);
    }
    let policy = scenario.mc.relaxation();
    let mut selections = Vec::with_capacity(populations.len());
    for (g, group) in scenario.groups.iter().enumerate() {
        let mut inputs = vec![&populations[g]];
        for other in &group.intersect_with {
            let idx = scenario
                .groups
                .iter()
                .position(|x| &x.id == other)
                .expect("validated reference");
            inputs.push(&populations[idx]);
        }
        let selection = intersect_subgroups(&inputs, &group.demographic_filters)
            .map_err(|e| e.with_path_prefix(&format!("groups[{g}]")))?;
        selections.push(ensure_significance(selection, &user.window, &policy)?);
    }

    // matching
    let mut curves = Vec::with_capacity(selections.len());
    for (sel, group) in selections.iter().zip(&scenario.groups) {
        let window = user.window.scaled(sel.window_scale);
        curves.push(encounter_probabilities(
            sel,
            &user.traits,
            &window,
            &bands,
            &grid,
            &group.drift(dim),
        )?);
    }

    // sociology
    let schedules = scenario
        .groups
        .iter()
        .enumerate()
        .map(|(g, group)| {
            encounter_schedule(group, user.extroversion, &grid).map_err(|e| e.with_path_prefix(&format!("groups[{g}]")))
        })
        .collect::<Result<Vec<_>>>()?;
    let forecast = cumulative_forecast(&curves, &schedules, &bands)?;

    // utility: suitors are apportioned by each group's share of matches
    let last = grid.len() - 1;
    let shares: Vec<f64> = if forecast.total[last] > 0.0 {
        forecast.by_group.iter().map(|s| s.values[last]).collect()
    } else {
        selections.iter().map(|s| s.members.len() as f64).collect()
    };
    let suitor_counts = apportion(scenario.mc.suitors, &shares);
    let mut parts = Vec::new();
    for (g, (sel, &count)) in selections.iter().zip(&suitor_counts).enumerate() {
        if count == 0 {
            continue;
        }
        let seed = derive_seed(scenario.seed, SUITOR_SEED + g as u64);
        parts.push(sample_suitors(sel, count, seed)?);
    }
    let suitors = SuitorSample::concat(parts, scenario.seed);

    let user_party = |amplitudes: Vec<f64>, sensitivities: Vec<f64>| PartyParams {
        amplitudes,
        sensitivities,
        ideal: user.window.centers.values().to_vec(),
        traits: user.traits.values().to_vec(),
    };
    let template = RelationshipTemplate {
        user: user_party(user.amplitudes(), user.sensitivities()),
        suitor_amplitudes: vec![1.0 / dim as f64; dim],
        suitor_sensitivities: user.sensitivities(),
    };
    assumptions.push("suitor sensitivities mirror the user's; suitor ideals equal their own traits".into());

    let single = user.single_life();
    let open = open_option_utility(
        &forecast,
        &suitors,
        &template,
        &single,
        scenario.mc.realizations,
        derive_seed(scenario.seed, ROLLOUT_SEED),
    )?;
    let closed = UtilityCurve::deterministic(&grid, |t| single_utility(&single, t));

    let mut options = Vec::new();
    let mut partner = None;
    if let Some(rel) = &scenario.relationship {
        let partner_sensitivities = match &rel.partner_sensitivities {
            Some(w) => w.clone(),
            None => {
                assumptions.push("partner sensitivities mirror the user's (lower confidence)".into());
                rel.user_sensitivities.clone().unwrap_or_else(|| user.sensitivities())
            }
        };
        let params = RelationshipParams::new(
            user_party(
                rel.user_amplitudes.clone().unwrap_or_else(|| user.amplitudes()),
                rel.user_sensitivities.clone().unwrap_or_else(|| user.sensitivities()),
            ),
            PartyParams {
                amplitudes: rel
                    .partner_amplitudes
                    .clone()
                    .unwrap_or_else(|| normalized(&rel.partner_window.importances)),
                sensitivities: partner_sensitivities,
                ideal: rel.partner_window.centers.values().to_vec(),
                traits: rel.partner_traits.values().to_vec(),
            },
        )
        .map_err(|e| e.with_path_prefix("relationship"))?;
        let curve = UtilityCurve::deterministic(&grid, |t| relationship_utility(&params, t));
        options.push(OptionForecast::new(OptionKind::StayInRelationship, curve, &grid));
        partner = Some(params);
    }
    options.push(OptionForecast::new(OptionKind::SingleClosed, closed, &grid));
    options.push(OptionForecast::new(OptionKind::SingleOpen, open, &grid));

    Ok(PipelineState {
        grid,
        selections,
        curves,
        schedules,
        forecast,
        suitors,
        suitor_counts,
        options,
        partner,
        assumptions,
    })
}

/// Scores the pipeline results and assembles the report.
pub fn build_report(scenario: &Scenario, state: PipelineState) -> Result<Report> {
    let user = &scenario.user;
    let grid = &state.grid;
    let last = grid.len() - 1;

    let weight: f64 = state.selections.iter().map(|s| s.members.len() as f64).sum();
    let weighted_p: f64 = state
        .selections
        .iter()
        .zip(&state.curves)
        .map(|(s, c)| s.members.len() as f64 * c.total[0])
        .sum();
    let selectivity = if weight > 0.0 {
        (1.0 - weighted_p / weight).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let volume: f64 = state.schedules.iter().map(|s| s.cumulative[last]).sum();
    let social_growth = volume / user.social_reference_encounters;
    let opportunity = |month: f64| grid.interpolate(&state.forecast.total, month);

    let partner_quality_percentile = scenario.relationship.as_ref().and_then(|rel| {
        let scored: Vec<f64> = state
            .suitors
            .suitors
            .iter()
            .filter_map(|s| quality_score(s.values(), &user.window))
            .collect();
        if scored.is_empty() {
            return None;
        }
        let below = match quality_score(rel.partner_traits.values(), &user.window) {
            Some(q) => scored.iter().filter(|&&s| s < q).count(),
            None => 0,
        };
        Some(below as f64 / scored.len() as f64)
    });

    let sensitivities = scenario
        .relationship
        .as_ref()
        .and_then(|r| r.user_sensitivities.clone())
        .unwrap_or_else(|| user.sensitivities());
    let penalty = penalty_profile(
        &state.suitors,
        &user.window,
        &sensitivities,
        scenario.relationship.as_ref().map(|r| &r.partner_traits),
    )?;

    let current = match &scenario.relationship {
        Some(r) if r.status == RelationshipStatus::Current => OptionKind::StayInRelationship,
        _ => OptionKind::SingleClosed,
    };
    let recommendation = recommend(&state.options, current)?;

    let groups = state
        .selections
        .iter()
        .zip(state.curves)
        .zip(&state.schedules)
        .zip(&state.suitor_counts)
        .map(|(((sel, curve), sched), &drawn)| GroupSummary {
            id: sel.label().to_string(),
            source_groups: sel.source_groups.clone(),
            pool_size: sel.pool.len(),
            members: sel.members.len(),
            in_window_members: sel.in_window_count(&user.window),
            window_scale: sel.window_scale,
            relaxation_log: sel.relaxation_log.clone(),
            encounter_probability: curve,
            expected_encounters: sched.cumulative.clone(),
            suitors_drawn: drawn,
        })
        .collect();

    let mut assumptions = state.assumptions;
    if scenario.relationship.is_some() && state.partner.is_none() {
        assumptions.push("relationship could not be evaluated".into());
    }

    Ok(Report {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: scenario.seed,
        trait_dimension: scenario.dim(),
        months: grid.months().to_vec(),
        groups,
        scores: Scores {
            selectivity,
            social_growth,
            opportunity_1y: opportunity(12.0),
            opportunity_5y: opportunity(60.0),
            opportunity_10y: opportunity(120.0),
            partner_quality_percentile,
        },
        forecast: state.forecast,
        options: state.options,
        recommendation,
        penalty,
        assumptions,
    })
}
