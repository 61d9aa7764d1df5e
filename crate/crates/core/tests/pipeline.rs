mod common;

use common::*;
use heartcast_core::forecast::{recommend, OptionForecast, OptionKind};
use heartcast_core::grid::TimeGrid;
use heartcast_core::matching::CompatibilityWindow;
use heartcast_core::utility::UtilityCurve;
use heartcast_core::{run_forecast, Error, Stage};

#[test]
fn partner_curve_dominates_for_the_28_year_old() {
    let report = run_forecast(&load_fixture("man_28_with_partner.json")).unwrap();
    let stay = &report.option(OptionKind::StayInRelationship).unwrap().curve.mean;
    for kind in [OptionKind::SingleClosed, OptionKind::SingleOpen] {
        let other = &report.option(kind).unwrap().curve.mean;
        for (k, (s, o)) in stay.iter().zip(other).enumerate() {
            assert!(s >= o, "{} beats staying at index {k}", kind.as_str());
        }
    }
}

#[test]
fn single_user_gets_two_options() {
    let report = run_forecast(&load_fixture("location_a.json")).unwrap();
    let kinds: Vec<_> = report.options.iter().map(|o| o.kind).collect();
    assert_eq!(kinds, [OptionKind::SingleClosed, OptionKind::SingleOpen]);
    assert!(report.scores.partner_quality_percentile.is_none());
}

#[test]
fn ten_year_opportunity_carries_the_cumulative_probability() {
    let mut scenario = load_fixture("constant_p.json");
    scenario.groups[0].base_encounter_rate = 100.0 / 120.0;
    let report = run_forecast(&scenario).unwrap();
    let expected = 1.0 - 0.99f64.powi(100);
    assert!((report.scores.opportunity_10y.unwrap() - expected).abs() < 1e-12);
}

#[test]
fn universal_windows_mean_no_selectivity() {
    let mut scenario = load_fixture("location_b.json");
    scenario.user.window = CompatibilityWindow::universal(scenario.dim());
    for g in &mut scenario.groups {
        if let heartcast_core::population::PopulationSource::Parametric(spec) = &mut g.population {
            spec.window_width = heartcast_core::population::WidthDistribution::accept_all();
        }
    }
    let report = run_forecast(&scenario).unwrap();
    assert_eq!(report.scores.selectivity, 0.0);
}

#[test]
fn ideal_partner_tops_the_percentile() {
    let mut scenario = load_fixture("man_28_with_partner.json");
    let rel = scenario.relationship.as_mut().unwrap();
    rel.partner_traits = scenario.user.window.centers.clone();
    let report = run_forecast(&scenario).unwrap();
    let pct = report.scores.partner_quality_percentile.unwrap();
    assert!(pct > 0.99 && pct <= 1.0, "{pct}");
}

#[test]
fn scores_are_in_range() {
    for name in SCENARIO_FIXTURES {
        let s = run_forecast(&load_fixture(name)).unwrap().scores;
        assert!((0.0..=1.0).contains(&s.selectivity), "{name}");
        assert!(s.social_growth >= 0.0);
        for o in [s.opportunity_1y, s.opportunity_5y, s.opportunity_10y].into_iter().flatten() {
            assert!((0.0..=1.0).contains(&o));
        }
    }
}

#[test]
fn reports_match_their_seeds() {
    let scenario = load_fixture("location_b.json");
    let a = run_forecast(&scenario).unwrap().to_json();
    assert_eq!(a, run_forecast(&scenario).unwrap().to_json());
    let mut other = scenario.clone();
    other.seed += 1;
    assert_ne!(a, run_forecast(&other).unwrap().to_json());
}

#[test]
fn insufficient_data_names_the_stage() {
    let mut scenario = load_fixture("location_a.json");
    scenario.mc.min_samples = usize::MAX;
    match run_forecast(&scenario) {
        Err(Error::InsufficientData { stage, relaxation_log, .. }) => {
            assert_eq!(stage, Stage::Population);
            assert!(!relaxation_log.is_empty());
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn ties_prefer_the_status_quo() {
    let grid = TimeGrid::uniform(2.0, 1.0).unwrap();
    let flat = |kind, v: f64| OptionForecast::new(kind, UtilityCurve::deterministic(&grid, |_| v), &grid);
    let options = [
        flat(OptionKind::StayInRelationship, 1.0),
        flat(OptionKind::SingleClosed, 1.0),
        flat(OptionKind::SingleOpen, 0.5),
    ];
    assert_eq!(recommend(&options, OptionKind::SingleClosed).unwrap().option, OptionKind::SingleClosed);
    assert_eq!(recommend(&options, OptionKind::StayInRelationship).unwrap().option, OptionKind::StayInRelationship);
    let r = recommend(&[flat(OptionKind::StayInRelationship, 3.0), flat(OptionKind::SingleClosed, 1.0)], OptionKind::SingleClosed).unwrap();
    assert_eq!(r.option, OptionKind::StayInRelationship);
    assert!((r.margin - 2.0).abs() < 1e-15);
}

