mod common;

use common::*;
use heartcast_core::grid::TimeGrid;
use heartcast_core::matching::{EncounterProbabilityCurve, QualityBands};
use heartcast_core::sociology::{cumulative_forecast, encounter_schedule, EncounterSchedule};
use proptest::prelude::*;

fn curve(id: &str, months: &[f64], split: &[Vec<f64>]) -> EncounterProbabilityCurve {
    let total = (0..months.len()).map(|k| split.iter().map(|b| b[k]).sum()).collect();
    EncounterProbabilityCurve {
        group_id: id.into(),
        months: months.to_vec(),
        by_band: split.to_vec(),
        total,
    }
}

fn schedule(id: &str, months: &[f64], per_step: &[f64]) -> EncounterSchedule {
    let mut acc = 0.0;
    let cumulative = std::iter::once(0.0)
        .chain(per_step.iter().skip(1).map(|d| {
            acc += d;
            acc
        }))
        .collect();
    EncounterSchedule {
        group_id: id.into(),
        months: months.to_vec(),
        rate: per_step.to_vec(),
        cumulative,
    }
}

#[test]
fn established_schedule_is_linear() {
    let mut g = parametric_group("g", 10, vec![0.5; 4], vec![vec![0.0; 4]; 4]);
    g.base_encounter_rate = 4.0;
    let grid = TimeGrid::uniform(60.0, 1.0).unwrap();
    let s = encounter_schedule(&g, 0.25, &grid).unwrap();
    for (k, m) in grid.months().iter().enumerate() {
        assert!((s.cumulative[k] - 3.0 * m).abs() < 1e-9);
    }
}

#[test]
fn ramped_schedule_tracks_closed_form_integral() {
    let mut g = parametric_group("g", 10, vec![0.5; 4], vec![vec![0.0; 4]; 4]);
    g.base_encounter_rate = 10.0;
    g.established = false;
    g.ramp_tau_months = 4.0;
    let grid = TimeGrid::uniform(36.0, 1.0).unwrap();
    let s = encounter_schedule(&g, 0.5, &grid).unwrap();
    for (k, &t) in grid.months().iter().enumerate() {
        let exact = 10.0 * (t - 4.0 * (1.0 - (-t / 4.0).exp()));
        assert!((s.cumulative[k] - exact).abs() <= 1e-4 * exact.max(1.0), "t={t}: {} vs {exact}", s.cumulative[k]);
    }
}

#[test]
fn merging_equal_groups_adds_rates() {
    let grid = TimeGrid::uniform(24.0, 1.0).unwrap();
    let months = grid.months();
    let n = months.len();
    let bands = QualityBands::default_bands();
    let p = vec![vec![0.01; n], vec![0.02; n], vec![0.005; n]];
    let a = curve("a", months, &p);
    let b = curve("b", months, &p);
    let merged = curve("ab", months, &p);
    let split = cumulative_forecast(
        &[a, b],
        &[schedule("a", months, &vec![3.0; n]), schedule("b", months, &vec![5.0; n])],
        &bands,
    )
    .unwrap();
    let joint = cumulative_forecast(&[merged], &[schedule("ab", months, &vec![8.0; n])], &bands).unwrap();
    for k in 0..n {
        assert!((split.total[k] - joint.total[k]).abs() < 1e-12);
    }
}

#[test]
fn simulated_single_group_matches_closed_form() {
    use rand::{Rng, SeedableRng};
    let grid = TimeGrid::uniform(12.0, 1.0).unwrap();
    let months = grid.months();
    let n = months.len();
    let p = 0.03;
    let per_month = 4usize;
    let bands = QualityBands::default_bands();
    let fc = cumulative_forecast(
        &[curve("g", months, &[vec![p; n], vec![0.0; n], vec![0.0; n]])],
        &[schedule("g", months, &vec![per_month as f64; n])],
        &bands,
    )
    .unwrap();
    let trials = 200_000;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut matched_by = vec![0usize; n];
    for _ in 0..trials {
        'trial: for slot in matched_by.iter_mut().skip(1) {
            for _ in 0..per_month {
                if rng.random::<f64>() < p {
                    *slot += 1;
                    break 'trial;
                }
            }
        }
    }
    let mut acc = 0;
    for (k, count) in matched_by.iter().enumerate() {
        acc += count;
        let est = acc as f64 / trials as f64;
        let c = fc.total[k];
        let sigma = (c * (1.0 - c) / trials as f64).sqrt();
        assert!((est - c).abs() <= 4.0 * sigma + 1e-12, "k={k}: {est} vs {c}");
    }
}

#[test]
fn certain_match_saturates() {
    let grid = TimeGrid::uniform(3.0, 1.0).unwrap();
    let months = grid.months();
    let n = months.len();
    let fc = cumulative_forecast(
        &[curve("g", months, &[vec![0.0; n], vec![0.0; n], vec![1.0; n]])],
        &[schedule("g", months, &vec![1.0; n])],
        &QualityBands::default_bands(),
    )
    .unwrap();
    assert_eq!(fc.total[0], 0.0);
    assert_eq!(fc.total[1], 1.0);
    assert_eq!(fc.by_quality[2].values[n - 1], 1.0);
}

prop_compose! {
    fn config()(groups in 1usize..4, n in 2usize..30)
        (probs in proptest::collection::vec(proptest::collection::vec(proptest::collection::vec(0.0f64..0.12, n), 3), groups),
         steps in proptest::collection::vec(proptest::collection::vec(0.0f64..20.0, n), groups),
         n in Just(n))
        -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>, usize) {
        (probs, steps, n)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn decomposition_is_exact_and_monotone((probs, steps, n) in config()) {
        let grid = TimeGrid::uniform(n as f64 - 1.0, 1.0).unwrap();
        let months = grid.months();
        let curves: Vec<_> = probs.iter().enumerate().map(|(g, p)| curve(&format!("g{g}"), months, p)).collect();
        let scheds: Vec<_> = steps.iter().enumerate().map(|(g, s)| schedule(&format!("g{g}"), months, s)).collect();
        let fc = cumulative_forecast(&curves, &scheds, &QualityBands::default_bands()).unwrap();
        for k in 0..n {
            prop_assert!((0.0..=1.0).contains(&fc.total[k]));
            if k > 0 {
                prop_assert!(fc.total[k] >= fc.total[k - 1]);
            }
            for family in [&fc.by_group, &fc.by_quality] {
                let s: f64 = family.iter().map(|x| x.values[k]).sum();
                prop_assert!((s - fc.total[k]).abs() <= 1e-9);
                for x in family.iter() {
                    prop_assert!(x.values[k] >= 0.0);
                    if k > 0 {
                        prop_assert!(x.values[k] >= x.values[k - 1]);
                    }
                }
            }
        }
    }

    #[test]
    fn more_encounters_never_lower_probability(p in 0.0f64..0.2, r in 0.0f64..10.0, extra in 0.0f64..10.0) {
        let grid = TimeGrid::uniform(12.0, 1.0).unwrap();
        let months = grid.months();
        let n = months.len();
        let bands = QualityBands::default_bands();
        let c = [curve("g", months, &[vec![p; n], vec![0.0; n], vec![0.0; n]])];
        let lo = cumulative_forecast(&c, &[schedule("g", months, &vec![r; n])], &bands).unwrap();
        let hi = cumulative_forecast(&c, &[schedule("g", months, &vec![r + extra; n])], &bands).unwrap();
        for k in 0..n {
            prop_assert!(hi.total[k] >= lo.total[k]);
        }
    }
}
