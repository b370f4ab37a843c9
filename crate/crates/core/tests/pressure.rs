use proptest::prelude::*;
use thermoform::catalog;
use thermoform::pressure::{affinity_dimension, partition_sum, pressure, PressureConfig};
use thermoform::{Budget, LinearMap, MatrixSystem, Potential};

fn scaled(sys: &MatrixSystem, c: f64) -> MatrixSystem {
    let gens = sys.factor(0).generators().iter().map(|g| g.scale(c)).collect();
    MatrixSystem::single(gens, 1.0).unwrap()
}

fn system_2x2(n: usize) -> impl Strategy<Value = MatrixSystem> {
    prop::collection::vec(-1.0f64..1.0, 4 * n).prop_filter_map("singular", move |e| {
        let gens: Vec<LinearMap> = e.chunks(4).map(|c| LinearMap::from_row_major(2, c).unwrap()).collect();
        if gens.iter().any(|g| g.determinant().abs() < 0.05) {
            return None;
        }
        MatrixSystem::single(gens, 1.0).ok()
    })
}

#[test]
fn counting_pressure_is_log_n() {
    for n in 2..=4usize {
        let p = Potential::scalar_weights(&vec![1.0; n]).unwrap();
        let est = pressure(&p, &PressureConfig::depth(6)).unwrap();
        let ln = (n as f64).ln();
        assert!((est.upper - ln).abs() < 1e-12);
        assert!((est.point - ln).abs() < 1e-12);
        assert!((est.lower.unwrap() - ln).abs() < 1e-12);
    }
    let p = Potential::scalar_weights(&[1.0, 1.0]).unwrap();
    assert!((partition_sum(&p, 3, &Budget::default()).unwrap() - 8f64.ln()).abs() < 1e-12);
}

#[test]
fn bernoulli_pressure_vanishes() {
    let p = Potential::scalar_weights(&[0.2, 0.3, 0.5]).unwrap();
    let est = pressure(&p, &PressureConfig::depth(7)).unwrap();
    assert!(est.upper.abs() < 1e-12 && est.point.abs() < 1e-12);
    assert!(est.lower.unwrap().abs() < 1e-12);
}

#[test]
fn nottot_bracket_narrows_with_depth() {
    let p = Potential::generalised(catalog::nottot_system(1.0, 1.0));
    let mut prev: Option<(f64, f64)> = None;
    for n in [4, 6, 8, 10] {
        let est = pressure(&p, &PressureConfig::depth(n)).unwrap();
        let lower = est.lower.unwrap();
        assert!(lower <= est.upper);
        if let Some((u, l)) = prev {
            assert!(est.upper <= u && lower >= l);
        }
        prev = Some((est.upper, lower));
    }
}

#[test]
fn recoding_multiplies_point_estimates() {
    let sys = catalog::random_system(5, 2, 2, 1).unwrap();
    let p = Potential::generalised(sys.clone());
    for n in [2usize, 3] {
        let rec = Potential::generalised(catalog::recode_system(&sys, n).unwrap());
        for q in 2..=3 {
            let a = pressure(&rec, &PressureConfig::depth(q)).unwrap().point;
            let b = pressure(&p, &PressureConfig::depth(n * q)).unwrap().point;
            assert!((a - n as f64 * b).abs() < 1e-12, "n {n} q {q}: {a} vs {b}");
        }
    }
}

#[test]
fn dimension_decreases_as_ratios_shrink() {
    let budget = Budget::default();
    let mut prev = f64::INFINITY;
    for r in [0.5, 0.4, 0.3, 0.2] {
        let gens = vec![LinearMap::diagonal(&[r, r * 0.6]); 3];
        let s = affinity_dimension(&gens, 6, 1e-9, &budget).unwrap().point;
        assert!(s < prev, "{s} !< {prev}");
        prev = s;
    }
}

#[test]
fn dimension_is_invariant_under_recoding() {
    let budget = Budget::default();
    let gens = vec![
        LinearMap::from_rows(&[&[0.5, 0.1], &[0.0, 0.3]]),
        LinearMap::from_rows(&[&[0.2, 0.0], &[0.3, 0.6]]),
    ];
    let sys = MatrixSystem::single(gens.clone(), 1.0).unwrap();
    let rec = catalog::recode_system(&sys, 2).unwrap();
    let a = affinity_dimension(&gens, 8, 1e-10, &budget).unwrap();
    let b = affinity_dimension(rec.factor(0).generators(), 4, 1e-10, &budget).unwrap();
    assert!((a.point - b.point).abs() < 1e-8, "{} vs {}", a.point, b.point);
}

#[test]
fn dimension_bisection_is_bracketed() {
    let gens = vec![LinearMap::diagonal(&[0.5, 0.25]); 3];
    let r = affinity_dimension(&gens, 6, 1e-8, &Budget::default()).unwrap();
    assert!(r.s_lo <= r.point && r.point <= r.s_hi);
    assert!(r.s_hi - r.s_lo <= 1e-8);
    assert!(!r.iteration_cap_reached);
    // P(φ^s) = log 3 − log 2 − (s − 1) log 4 on [1, 2]
    let exact = 1.0 + (3f64.ln() - 2f64.ln()) / 4f64.ln();
    assert!((r.point - exact).abs() < 1e-6, "{} vs {exact}", r.point);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn upper_bounds_are_monotone_and_above_lower(sys in system_2x2(2)) {
        let p = Potential::generalised(sys);
        let est = pressure(&p, &PressureConfig::depth(9)).unwrap();
        for w in est.levels.windows(2) {
            prop_assert!(w[1].upper_so_far <= w[0].upper_so_far);
        }
        for l in &est.levels {
            if let Some(lo) = l.lower_so_far {
                prop_assert!(lo <= l.upper_so_far + 1e-12);
            }
        }
    }

    #[test]
    fn scaling_shifts_rates_by_log_c(sys in system_2x2(2), c in 0.1f64..4.0) {
        let cfg = PressureConfig::depth(7);
        let a = pressure(&Potential::generalised(sys.clone()), &cfg).unwrap();
        let b = pressure(&Potential::generalised(scaled(&sys, c)), &cfg).unwrap();
        for (x, y) in a.levels.iter().zip(&b.levels) {
            prop_assert!((y.rate - x.rate - c.ln()).abs() < 1e-9);
        }
        prop_assert!((b.upper - a.upper - c.ln()).abs() < 1e-9);
        prop_assert!((b.point - a.point - c.ln()).abs() < 1e-9);
        prop_assert!(b.lower.unwrap() <= b.upper);
    }
}
