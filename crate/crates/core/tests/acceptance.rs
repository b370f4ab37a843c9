use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermoform::catalog::{self, CatalogParams, KEYS};
use thermoform::classes::{
    classify, decompose_equivariant, find_finite_orbit_classes, find_simultaneous_proximal_word,
    SearchConfig, Subspace, SubspaceClass,
};
use thermoform::gibbs::{correlation_ratio_scan, ergodic_average, gibbs_table, psi_mixing_precondition};
use thermoform::multilinear::{exterior_power, is_proximal, tensor_product, DEFAULT_PROXIMAL_TOL};
use thermoform::potentials::check_submultiplicative_combined;
use thermoform::pressure::{affinity_dimension, partition_sum, pressure, PressureConfig};
use thermoform::symbolic::{enumerate_words, recode_word};
use thermoform::{Budget, LinearMap, MatrixSystem, Potential, Word};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn axis(i: usize) -> Subspace {
    Subspace::coordinate(2, &[i]).unwrap()
}

fn axis_pairs() -> Vec<Vec<Subspace>> {
    vec![
        vec![axis(0), axis(0)],
        vec![axis(0), axis(1)],
        vec![axis(1), axis(0)],
        vec![axis(1), axis(1)],
    ]
}

fn w1() -> Vec<Vec<Subspace>> {
    vec![vec![axis(0), axis(0)], vec![axis(1), axis(1)]]
}

fn w2() -> Vec<Vec<Subspace>> {
    vec![vec![axis(0), axis(1)], vec![axis(1), axis(0)]]
}

fn same_set(class: &SubspaceClass, expected: &[Vec<Subspace>]) -> bool {
    class.len() == expected.len() && expected.iter().all(|t| class.contains(t))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn sv_oracle(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> LinearMap {
    let entries: Vec<f64> = (0..d * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    LinearMap::from_row_major(d, &entries).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let p = Potential::scalar_weights(&[1.0, 1.0]).unwrap();
    let est = pressure(&p, &PressureConfig::depth(10)).unwrap();
    let elapsed = start.elapsed();
    let l2 = 2f64.ln();
    let lower = est.lower.unwrap_or(f64::NAN);
    let err = [est.upper, lower, est.point]
        .iter()
        .map(|v| (v - l2).abs())
        .fold(0.0, f64::max);
    outcome(
        err <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("max |bound - log 2| = {err:.2e}, {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let budget = Budget::default();
    let cases: Vec<(&str, Vec<LinearMap>, f64)> = vec![
        (
            "similarity(3, 1/2, 2)",
            vec![LinearMap::scaled_identity(2, 0.5); 3],
            3f64.ln() / 2f64.ln(),
        ),
        ("2 x diag(1/2, 1/3)", vec![LinearMap::diagonal(&[0.5, 1.0 / 3.0]); 2], 1.0),
        ("4 x (1/2)Id", vec![LinearMap::scaled_identity(2, 0.5); 4], 2.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, gens, expected) in cases {
        let start = Instant::now();
        let r = affinity_dimension(&gens, 10, 1e-9, &budget).unwrap();
        let elapsed = start.elapsed();
        let err = (r.point - expected).abs();
        pass &= err <= 1e-6 && elapsed < Duration::from_secs(30);
        parts.push(format!("{name}: err {err:.1e} in {elapsed:.2?}"));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for t in 0..200 {
        let d = 1 + t % 4;
        let a = random_matrix(&mut rng, d);
        let b = random_matrix(&mut rng, d);
        let sa = sv_oracle(a.matrix());
        let det = a.matrix().clone().lu().determinant().abs();
        worst = worst.max(rel_err(sa.iter().product(), det));
        for k in 1..=d {
            let prod: f64 = sa[..k].iter().product();
            let ext = exterior_power(&a, k).unwrap();
            worst = worst.max(rel_err(sv_oracle(ext.matrix())[0], prod));
            let ab = a.compose(&b).unwrap();
            let lhs = exterior_power(&ab, k).unwrap();
            let rhs = ext.compose(&exterior_power(&b, k).unwrap()).unwrap();
            let scale = lhs.matrix().amax().max(1.0);
            worst = worst.max((lhs.matrix() - rhs.matrix()).amax() / scale);
        }
        let t = tensor_product(&[a.clone(), b.clone()]).unwrap();
        let na = sv_oracle(a.matrix())[0];
        let nb = sv_oracle(b.matrix())[0];
        worst = worst.max(rel_err(sv_oracle(t.matrix())[0], na * nb));
    }
    outcome(worst <= 1e-9, format!("worst relative error {worst:.2e} over 200 matrices"))
}

fn criterion_4() -> Outcome {
    let budget = Budget::default();
    let nottot = catalog::nottot_system(1.0, 1.0);
    let random = catalog::random_system(7, 2, 3, 1).unwrap();
    let mut potentials: Vec<(String, Potential)> = vec![
        ("generalised nottot".into(), Potential::generalised(nottot.clone())),
        ("generalised random".into(), Potential::generalised(random.clone())),
        (
            "restricted nottot W0".into(),
            Potential::restricted(
                nottot.clone(),
                SubspaceClass::from_members(&nottot, axis_pairs()).unwrap(),
            )
            .unwrap(),
        ),
    ];
    for s in [0.3, 1.0, 1.5, 1.9] {
        for (name, sys) in [("nottot A", &nottot), ("random", &random)] {
            let gens = sys.factor(0).generators().to_vec();
            potentials.push((format!("phi^{s} {name}"), Potential::singular_value(gens, s).unwrap()));
        }
    }
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut pairs = 0;
    for (_, p) in &potentials {
        let r = check_submultiplicative_combined(p, 8, &budget).unwrap();
        pairs += r.pairs_checked;
        worst = worst.max(r.max_excess);
        if !r.passes() || !r.exhaustive {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!(
            "{} potentials, {pairs} pairs, worst excess {worst:.2e}, {violations} violating",
            potentials.len()
        ),
    )
}

fn criterion_5() -> Outcome {
    let sys = catalog::nottot_system(1.0, 1.0);
    let rec = catalog::nottot_recoded_system(1.0, 1.0);
    let search = find_finite_orbit_classes(&sys, &[1, 1], &SearchConfig::default()).unwrap();
    let mut pass = search.classes.len() == 1;
    let mut detail = format!("nottot classes found: {}", search.classes.len());
    if let Some(w0) = search.classes.first() {
        let c = classify(w0, &sys).unwrap();
        pass &= same_set(w0, &axis_pairs()) && c.size == 4 && c.transitive && c.period == Some(2) && !c.primitive;
        detail += &format!(" (size {}, period {:?}, primitive {})", c.size, c.period, c.primitive);
        let parts = decompose_equivariant(w0, &rec).unwrap();
        pass &= parts.len() == 2
            && parts.iter().any(|p| same_set(p, &w1()))
            && parts.iter().any(|p| same_set(p, &w2()));
        for p in &parts {
            let c = classify(p, &rec).unwrap();
            pass &= c.transitive && c.primitive && c.exponent == Some(1);
        }
        detail += &format!("; recoded split into {} primitive parts of exponent 1", parts.len());
    }
    outcome(pass, detail)
}

fn criterion_6() -> Outcome {
    let mut worst = 0.0f64;
    for (alpha, beta) in [(1.0, 1.0), (1.0, 2.0)] {
        let rec = catalog::nottot_recoded_system(alpha, beta);
        let full = Potential::generalised(rec.clone());
        let p1 = Potential::restricted(rec.clone(), SubspaceClass::from_members(&rec, w1()).unwrap()).unwrap();
        let p2 = Potential::restricted(rec.clone(), SubspaceClass::from_members(&rec, w2()).unwrap()).unwrap();
        let l4 = 4f64.ln();
        for n in 1..=8usize {
            let mut i = vec![1u32; n];
            i.extend(vec![4u32; n]);
            let mut j = vec![3u32];
            j.extend(vec![1u32; n - 1]);
            j.push(2);
            j.extend(vec![4u32; n - 1]);
            let i = Word::from_symbols(&i, 4);
            let j = Word::from_symbols(&j, 4);
            let nf = n as f64;
            let gen_expected = nf * (alpha + beta) * l4;
            let res_expected = nf * alpha.max(beta) * l4;
            worst = worst
                .max((full.log_evaluate(&i).unwrap() - gen_expected).abs())
                .max((full.log_evaluate(&j).unwrap() - gen_expected).abs())
                .max((p1.log_evaluate(&i).unwrap() - res_expected).abs())
                .max((p2.log_evaluate(&j).unwrap() - res_expected).abs());
        }
    }
    outcome(worst <= 1e-9, format!("worst log error {worst:.2e} for n = 1..8"))
}

fn criterion_7() -> Outcome {
    let budget = Budget::default();
    let sys = catalog::nottot_system(1.0, 1.0);
    let rec = catalog::nottot_recoded_system(1.0, 1.0);
    let phi = Potential::generalised(sys.clone());
    let psi = Potential::generalised(rec);
    let mut worst = 0.0f64;
    let mut words = 0;
    for len in [2, 4, 6, 8] {
        for w in enumerate_words(sys.alphabet(), len, &budget).unwrap() {
            let r = recode_word(&w, 2).unwrap();
            worst = worst.max((psi.log_evaluate(&r).unwrap() - phi.log_evaluate(&w).unwrap()).abs());
            words += 1;
        }
    }
    let mut worst_p = 0.0f64;
    for q in 1..=4usize {
        let (pt_psi, pt_phi) = if q == 1 {
            (
                partition_sum(&psi, 1, &budget).unwrap(),
                partition_sum(&phi, 2, &budget).unwrap() / 2.0,
            )
        } else {
            (
                pressure(&psi, &PressureConfig::depth(q)).unwrap().point,
                pressure(&phi, &PressureConfig::depth(2 * q)).unwrap().point,
            )
        };
        worst_p = worst_p.max((pt_psi - 2.0 * pt_phi).abs());
    }
    outcome(
        worst <= 1e-12 && worst_p <= 1e-12,
        format!("{words} words, worst {worst:.2e}; pressure points worst {worst_p:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let budget = Budget::default();
    let sys = catalog::nottot_system(1.0, 1.0);
    let r = find_simultaneous_proximal_word(&sys, None, 4, &budget).unwrap();
    let word = r.word.as_ref().map(|w| w.to_string());
    let mut pass = word.as_deref() == Some("1122");
    if let Some(w) = &r.word {
        for f in sys.factors() {
            let rep = is_proximal(&f.product(w.symbols()), DEFAULT_PROXIMAL_TOL).unwrap();
            let m = f.product(w.symbols());
            let (tr, det) = (m.get(0, 0) + m.get(1, 1), m.determinant());
            let disc = tr * tr - 4.0 * det;
            let simple_top = disc > 0.0 && (tr.abs() + disc.sqrt()) / 2.0 > (tr.abs() - disc.sqrt()).abs() / 2.0;
            pass &= rep.proximal() && rep.gap_ratio > 1.0 && simple_top;
        }
        pass &= r.reports.len() == sys.factors().len();
    }
    let rot = catalog::build("rotation", &CatalogParams::default()).unwrap().system;
    let rr = find_simultaneous_proximal_word(&rot, None, 4, &budget).unwrap();
    pass &= rr.word.is_none();
    outcome(
        pass,
        format!("nottot word {word:?}; rotation word {:?}", rr.word.map(|w| w.to_string())),
    )
}

fn criterion_9() -> Outcome {
    let budget = Budget::default();
    let p = Potential::generalised(catalog::nottot_system(1.0, 1.0));
    let t = gibbs_table(&p, 10, &budget).unwrap();
    let ea = ergodic_average(&t, &p).unwrap();
    let est = pressure(&p, &PressureConfig::depth(10)).unwrap();
    let width = est.width().unwrap_or(f64::INFINITY);
    let residual = ea.variational_residual.abs();
    outcome(
        residual <= width + 1e-9,
        format!("|h + Lambda - a_n/n| = {residual:.2e}, bracket width {width:.4}"),
    )
}

fn criterion_10() -> Outcome {
    let budget = Budget::default();
    let gaps: Vec<usize> = (1..=6).collect();
    let bern = Potential::scalar_weights(&[0.5, 0.5]).unwrap();
    let scan = correlation_ratio_scan(&bern, &gaps, 2, &budget).unwrap();
    let bern_dev = scan.reports.iter().map(|r| r.sup_ratio_deviation).fold(0.0, f64::max);
    let bern_ok = bern_dev <= 1e-12;

    let nt = Potential::generalised(catalog::nottot_system(1.0, 1.0));
    let scan = correlation_ratio_scan(&nt, &gaps, 2, &budget).unwrap();
    let dev: Vec<f64> = scan.reports.iter().map(|r| r.sup_ratio_deviation).collect();
    let parity_ok = (0..6).step_by(2).all(|i| {
        let odd = dev[i];
        (i == 0 || odd > dev[i - 1]) && (i + 1 >= dev.len() || odd > dev[i + 1])
    });

    let rec = catalog::nottot_recoded_system(1.0, 1.0);
    let pw = Potential::restricted(rec.clone(), SubspaceClass::from_members(&rec, w1()).unwrap()).unwrap();
    let deltas: Vec<f64> = (1..=3)
        .map(|m| psi_mixing_precondition(&pw, m, 3, &budget).unwrap().delta)
        .collect();
    let lo = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = deltas.iter().copied().fold(0.0, f64::max);
    let delta_ok = lo > 0.0 && hi / lo < 4.0;
    outcome(
        bern_ok && parity_ok && delta_ok,
        format!(
            "Bernoulli max deviation {bern_dev:.1e}; nottot deviations {}; delta_m for m = 1..3 {:?} (ratio {:.1})",
            dev.iter().map(|d| format!("{d:.4}")).collect::<Vec<_>>().join(" "),
            deltas.iter().map(|d| format!("{d:.3}")).collect::<Vec<_>>(),
            hi / lo
        ),
    )
}

fn criterion_11() -> Outcome {
    let mut failures = Vec::new();
    let mut runs = 0;
    for key in KEYS {
        let entry = catalog::build(key, &CatalogParams::default()).unwrap();
        let sys: &MatrixSystem = &entry.system;
        let mut potentials = vec![Potential::generalised(sys.clone())];
        if sys.factors().len() == 1 {
            potentials.push(Potential::singular_value(sys.factor(0).generators().to_vec(), 1.0).unwrap());
        }
        for p in potentials {
            let mut prev_upper = f64::INFINITY;
            for n in 2..=8 {
                let est = pressure(&p, &PressureConfig::depth(n)).unwrap();
                runs += 1;
                let tol = 1e-12 * est.upper.abs().max(1.0);
                let lower = est.lower.unwrap_or(f64::NEG_INFINITY);
                if !(lower <= est.point + tol && est.point <= est.upper + tol && est.upper <= prev_upper + tol) {
                    failures.push(format!("{key}/{} at depth {n}", p.kind_name()));
                }
                prev_upper = est.upper;
            }
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{runs} brackets ordered, upper sequences non-increasing")
        } else {
            format!("violations: {}", failures.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let criteria: Vec<fn() -> Outcome> = vec![
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
        criterion_11,
    ];
    let mut failed = 0;
    for (i, run) in criteria.iter().enumerate() {
        let o = run();
        println!("criterion {}: {} ({})", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
