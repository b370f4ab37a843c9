use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermoform::catalog;
use thermoform::classes::{Subspace, SubspaceClass};
use thermoform::potentials::{
    check_submultiplicative, check_submultiplicative_combined, estimate_quasimultiplicativity,
    log_singular_value_function, log_singular_value_function_exterior,
};
use thermoform::symbolic::enumerate_words;
use thermoform::{Budget, LinearMap, MatrixSystem, Potential, Word};

fn axis(i: usize) -> Subspace {
    Subspace::coordinate(2, &[i]).unwrap()
}

fn w0(sys: &MatrixSystem) -> SubspaceClass {
    let members = (0..2)
        .flat_map(|a| (0..2).map(move |b| vec![axis(a), axis(b)]))
        .collect();
    SubspaceClass::from_members(sys, members).unwrap()
}

fn random_map(rng: &mut ChaCha8Rng, d: usize) -> LinearMap {
    let e: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    LinearMap::from_row_major(d, &e).unwrap()
}

#[test]
fn generalised_potential_is_submultiplicative_to_length_four() {
    let p = Potential::generalised(catalog::nottot_system(1.0, 2.0));
    let r = check_submultiplicative(&p, 4, 0, 0, &Budget::default()).unwrap();
    assert!(r.exhaustive);
    assert!(r.passes(), "{}", r.max_excess);
}

#[test]
fn sampled_singular_value_potentials_are_submultiplicative() {
    let sys = catalog::random_system(11, 3, 3, 1).unwrap();
    for s in [0.3, 1.0, 1.5, 1.9, 2.5, 3.4] {
        let p = Potential::singular_value(sys.factor(0).generators().to_vec(), s).unwrap();
        let r = check_submultiplicative(&p, 12, 2000, 5, &Budget::new(1 << 12)).unwrap();
        assert!(!r.exhaustive);
        assert_eq!(r.pairs_checked, 2000);
        assert!(r.passes(), "s = {s}: {}", r.max_excess);
    }
}

#[test]
fn restricted_never_exceeds_generalised() {
    let sys = catalog::nottot_system(1.0, 1.0);
    let full = Potential::generalised(sys.clone());
    let res = Potential::restricted(sys.clone(), w0(&sys)).unwrap();
    let budget = Budget::default();
    for len in 1..=8 {
        for w in enumerate_words(sys.alphabet(), len, &budget).unwrap() {
            assert!(res.log_evaluate(&w).unwrap() <= full.log_evaluate(&w).unwrap() + 1e-9);
        }
    }
}

#[test]
fn full_space_class_reproduces_generalised_values() {
    let sys = catalog::random_system(3, 2, 3, 2).unwrap();
    let full = Potential::generalised(sys.clone());
    let res = Potential::restricted(sys.clone(), SubspaceClass::full(&sys)).unwrap();
    for w in enumerate_words(sys.alphabet(), 6, &Budget::default()).unwrap() {
        assert!((res.log_evaluate(&w).unwrap() - full.log_evaluate(&w).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn restricted_value_on_single_symbol() {
    let sys = catalog::nottot_system(1.0, 1.0);
    let res = Potential::restricted(sys.clone(), w0(&sys)).unwrap();
    let w = Word::from_symbols(&[1], 2);
    assert!((res.log_evaluate(&w).unwrap() - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn singular_value_function_formulas_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for t in 0..100 {
        let a = random_map(&mut rng, 2 + t % 3);
        for s in [0.3, 1.0, 1.5, 1.9] {
            let x = log_singular_value_function(&a, s).unwrap();
            let y = log_singular_value_function_exterior(&a, s).unwrap();
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
        }
    }
}

#[test]
fn quasimultiplicativity_of_reference_potentials() {
    let budget = Budget::default();
    let sys = catalog::nottot_system(1.0, 1.0);
    for p in [
        Potential::generalised(sys.clone()),
        Potential::restricted(sys.clone(), w0(&sys)).unwrap(),
    ] {
        let q = estimate_quasimultiplicativity(&p, 2, 3, &budget).unwrap();
        assert!(q.delta > 0.0);
        let (i, j) = &q.witness;
        let mid = match &q.best_connector {
            Some(k) => i.concat(k).unwrap().concat(j).unwrap(),
            None => i.concat(j).unwrap(),
        };
        let direct = p.log_evaluate(&mid).unwrap() - p.log_evaluate(i).unwrap() - p.log_evaluate(j).unwrap();
        assert_eq!(direct, q.log_delta);
    }
    let ones = Potential::scalar_weights(&[1.0, 1.0, 1.0]).unwrap();
    assert_eq!(estimate_quasimultiplicativity(&ones, 3, 2, &budget).unwrap().delta, 1.0);
}

fn two_symbol_system() -> impl Strategy<Value = MatrixSystem> {
    (prop::collection::vec(-2.0f64..2.0, 8), 0.2f64..2.0).prop_filter_map("singular", |(e, beta)| {
        let gens = vec![
            LinearMap::from_row_major(2, &e[..4]).ok()?,
            LinearMap::from_row_major(2, &e[4..]).ok()?,
        ];
        if gens.iter().any(|g| g.determinant().abs() < 1e-3) {
            return None;
        }
        MatrixSystem::single(gens, beta).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_generalised_potentials_are_submultiplicative(sys in two_symbol_system()) {
        let p = Potential::generalised(sys);
        let r = check_submultiplicative_combined(&p, 8, &Budget::default()).unwrap();
        prop_assert!(r.exhaustive && r.passes(), "{}", r.max_excess);
    }

    #[test]
    fn random_singular_value_potentials_are_submultiplicative(sys in two_symbol_system(), s in 0.0f64..3.0) {
        let p = Potential::singular_value(sys.factor(0).generators().to_vec(), s).unwrap();
        let r = check_submultiplicative_combined(&p, 6, &Budget::default()).unwrap();
        prop_assert!(r.passes(), "{}", r.max_excess);
    }
}
