#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use heartcast_core::matching::CompatibilityWindow;
use heartcast_core::population::{
    DemographicValue, GroupModel, ParametricSpec, Person, PopulationSource, SampleSet, TraitVector, WidthDistribution,
};
use heartcast_core::Scenario;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn load_fixture(name: &str) -> Scenario {
    Scenario::load(&fixture_path(name)).expect("fixture loads")
}

pub const SCENARIO_FIXTURES: [&str; 5] = [
    "man_28_with_partner.json",
    "man_51_single.json",
    "location_a.json",
    "location_b.json",
    "constant_p.json",
];

pub fn tv(v: &[f64]) -> TraitVector {
    TraitVector::new(v.to_vec()).unwrap()
}

pub fn person(id: String, traits: &[f64], own_window: CompatibilityWindow) -> Person {
    Person {
        id,
        traits: tv(traits),
        own_window,
        demographics: BTreeMap::new(),
    }
}

pub fn person_with(id: String, traits: &[f64], demo: &[(&str, &str)]) -> Person {
    let mut p = person(id, traits, CompatibilityWindow::universal(traits.len()));
    for (k, v) in demo {
        p.demographics.insert(k.to_string(), DemographicValue::Text(v.to_string()));
    }
    p
}

pub fn sample_set(label: &str, persons: Vec<Person>) -> SampleSet {
    let dim = persons.first().map(|p| p.traits.dim()).unwrap_or(4);
    SampleSet::new(label, dim, persons).unwrap()
}

/// 5-D Gaussian well inside the unit cube (clipping is > 5 sigma away).
pub fn gaussian_fixture() -> (Vec<f64>, Vec<Vec<f64>>) {
    let mean = vec![0.5, 0.45, 0.55, 0.5, 0.52];
    let sd = [0.07, 0.06, 0.08, 0.065, 0.07];
    let corr = [
        [1.0, 0.3, -0.2, 0.0, 0.1],
        [0.3, 1.0, 0.0, 0.25, 0.0],
        [-0.2, 0.0, 1.0, 0.1, -0.15],
        [0.0, 0.25, 0.1, 1.0, 0.2],
        [0.1, 0.0, -0.15, 0.2, 1.0],
    ];
    let cov = (0..5)
        .map(|i| (0..5).map(|j| corr[i][j] * sd[i] * sd[j]).collect())
        .collect();
    (mean, cov)
}

pub fn parametric_group(id: &str, count: usize, mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> GroupModel {
    GroupModel {
        id: id.into(),
        population: PopulationSource::Parametric(ParametricSpec {
            count,
            mean,
            covariance,
            window_width: WidthDistribution { mean: 0.3, sd: 0.05 },
            demographics: BTreeMap::new(),
        }),
        base_encounter_rate: 5.0,
        established: true,
        ramp_tau_months: 6.0,
        mean_drift_per_year: None,
        demographic_filters: BTreeMap::new(),
        intersect_with: vec![],
    }
}

/// Sample mean and unbiased covariance, computed independently of the crate.
pub fn moments(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for i in 0..d {
            mean[i] += r[i] / n;
        }
    }
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / (n - 1.0);
            }
        }
    }
    (mean, cov)
}

pub fn relative_frobenius(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            num += (x - y) * (x - y);
            den += y * y;
        }
    }
    (num / den).sqrt()
}
