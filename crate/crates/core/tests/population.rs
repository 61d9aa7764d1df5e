mod common;

use std::collections::BTreeMap;

use common::*;
use heartcast_core::matching::CompatibilityWindow;
use heartcast_core::population::{
    ensure_significance, intersect_subgroups, load_population, DemographicFilter, DemographicValue, RelaxationPolicy,
};
use heartcast_core::Error;
use proptest::prelude::*;

#[test]
fn parametric_draws_recover_the_gaussian() {
    let (mean, cov) = gaussian_fixture();
    let group = parametric_group("g", 100_000, mean.clone(), cov.clone());
    let set = load_population(&group, 5, 42, None).unwrap();
    assert_eq!(set.len(), 100_000);
    let rows: Vec<Vec<f64>> = set.persons().iter().map(|p| p.traits.values().to_vec()).collect();
    let (m, c) = moments(&rows);
    for i in 0..5 {
        assert!((m[i] - mean[i]).abs() < 0.01, "dim {i}: {} vs {}", m[i], mean[i]);
    }
    let rel = relative_frobenius(&c, &cov);
    assert!(rel < 0.05, "relative Frobenius error {rel}");
}

#[test]
fn filter_matches_brute_force_count() {
    let persons: Vec<_> = (0..100)
        .map(|i| {
            let city = if (i * 7) % 100 < 37 { "X" } else { "Y" };
            person_with(format!("p{i}"), &[0.5; 4], &[("city", city)])
        })
        .collect();
    let expected = persons
        .iter()
        .filter(|p| p.demographics.get("city") == Some(&DemographicValue::Text("X".into())))
        .count();
    assert_eq!(expected, 37);
    let set = sample_set("town", persons);
    let filters = BTreeMap::from([("city".to_string(), DemographicFilter::equals(DemographicValue::Text("X".into())))]);
    let sel = intersect_subgroups(&[&set], &filters).unwrap();
    assert_eq!(sel.members.len(), expected);
}

#[test]
fn one_widening_reaches_significance() {
    // 150 members at the center, 100 just outside the 0.1 halfwidth on trait 1
    // (inside after one 1.25x widening), 300 far away.
    let window = CompatibilityWindow::new(tv(&[0.5; 4]), vec![0.1; 4]);
    let mut persons = Vec::new();
    for i in 0..150 {
        persons.push(person_with(format!("c{i}"), &[0.5, 0.5, 0.5, 0.5], &[]));
    }
    for i in 0..100 {
        persons.push(person_with(format!("n{i}"), &[0.61 + 0.0001 * i as f64, 0.5, 0.5, 0.5], &[]));
    }
    for i in 0..300 {
        persons.push(person_with(format!("f{i}"), &[0.9, 0.1, 0.5, 0.5], &[]));
    }
    let count_within = |scale: f64| {
        persons
            .iter()
            .filter(|p| (0..4).all(|d| (p.traits[d] - 0.5).abs() <= 0.1 * scale + 1e-12))
            .count()
    };
    assert_eq!(count_within(1.0), 150);
    assert!(count_within(1.25) >= 200);

    let set = sample_set("g", persons.clone());
    let sel = intersect_subgroups(&[&set], &BTreeMap::new()).unwrap();
    let out = ensure_significance(sel, &window, &RelaxationPolicy::default()).unwrap();
    assert_eq!(out.relaxation_log.len(), 1);
    assert_eq!(out.relaxation_log[0].in_window, count_within(1.25));
    assert!(out.in_window_count(&window) >= 200);
    assert_eq!(out.window_scale, 1.25);
}

#[test]
fn already_significant_selection_is_unchanged() {
    let persons: Vec<_> = (0..10_000).map(|i| person_with(format!("p{i}"), &[0.5; 4], &[])).collect();
    let set = sample_set("g", persons);
    let sel = intersect_subgroups(&[&set], &BTreeMap::new()).unwrap();
    let window = CompatibilityWindow::new(tv(&[0.5; 4]), vec![0.1; 4]);
    let out = ensure_significance(sel.clone(), &window, &RelaxationPolicy::default()).unwrap();
    assert_eq!(out, sel);
    assert!(out.relaxation_log.is_empty());
}

#[test]
fn insufficient_data_carries_log() {
    let persons: Vec<_> = (0..50).map(|i| person_with(format!("p{i}"), &[0.9; 4], &[])).collect();
    let set = sample_set("g", persons);
    let sel = intersect_subgroups(&[&set], &BTreeMap::new()).unwrap();
    let window = CompatibilityWindow::new(tv(&[0.2; 4]), vec![0.05; 4]);
    match ensure_significance(sel, &window, &RelaxationPolicy::default()) {
        Err(Error::InsufficientData { relaxation_log, subject, .. }) => {
            assert_eq!(subject, "g");
            assert_eq!(relaxation_log.len(), 5);
        }
        other => panic!("unexpected {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generated_traits_stay_in_unit_cube(seed in any::<u64>(), sd in 0.0f64..2.0, m in 0.0f64..1.0) {
        let cov = (0..4).map(|i| (0..4).map(|j| if i == j { sd * sd } else { 0.0 }).collect()).collect();
        let group = parametric_group("g", 200, vec![m; 4], cov);
        let set = load_population(&group, 4, seed, None).unwrap();
        for p in set.persons() {
            prop_assert!(p.traits.values().iter().all(|v| (0.0..=1.0).contains(v) && !v.is_nan()));
        }
        prop_assert_eq!(&set, &load_population(&group, 4, seed, None).unwrap());
    }

    #[test]
    fn intersection_is_subset_of_inputs(a in proptest::collection::vec(0u8..40, 0..60), b in proptest::collection::vec(0u8..40, 0..60)) {
        let mk = |label: &str, ids: &[u8]| sample_set(label, ids.iter().map(|i| person_with(format!("p{i}"), &[0.5; 4], &[])).collect());
        let (sa, sb) = (mk("a", &a), mk("b", &b));
        let sel = intersect_subgroups(&[&sa, &sb], &BTreeMap::new()).unwrap();
        let ids: Vec<&str> = sel.members.persons().iter().map(|p| p.id.as_str()).collect();
        for id in &ids {
            prop_assert!(sa.persons().iter().any(|p| p.id == *id));
            prop_assert!(sb.persons().iter().any(|p| p.id == *id));
        }
        let mut dedup = ids.clone();
        dedup.sort();
        dedup.dedup();
        prop_assert_eq!(dedup.len(), ids.len());
        prop_assert!(ids.len() <= sa.len().min(sb.len()));
    }

    #[test]
    fn relaxation_never_shrinks(n_center in 0usize..120, n_near in 0usize..200, h in 0.02f64..0.2) {
        let mut persons = Vec::new();
        for i in 0..n_center { persons.push(person_with(format!("c{i}"), &[0.5; 4], &[])); }
        for i in 0..n_near {
            let off = 0.5 + h * (1.0 + 0.1 * (i % 20) as f64);
            persons.push(person_with(format!("n{i}"), &[off.min(1.0), 0.5, 0.5, 0.5], &[]));
        }
        let set = sample_set("g", persons);
        let sel = intersect_subgroups(&[&set], &BTreeMap::new()).unwrap();
        let window = CompatibilityWindow::new(tv(&[0.5; 4]), vec![h; 4]);
        let log = match ensure_significance(sel, &window, &RelaxationPolicy::default()) {
            Ok(s) => s.relaxation_log,
            Err(Error::InsufficientData { relaxation_log, .. }) => relaxation_log,
            Err(e) => panic!("{e}"),
        };
        prop_assert!(log.windows(2).all(|w| w[0].in_window <= w[1].in_window));
    }
}
