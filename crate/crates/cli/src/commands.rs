use thermoform::catalog::{self, KEYS};
use thermoform::classes::{
    classify, find_finite_orbit_classes, find_simultaneous_proximal_word, is_irreducible, SearchConfig,
    SubspaceTuple,
};
use thermoform::gibbs::{
    correlation_ratio_scan, entropy_estimate, epsilon_independence, ergodic_average, gibbs_table,
    lyapunov_spectrum, mixture_weight, psi_mixing_precondition, total_ergodicity_diagnostic, DiagnosticConfig,
    ErgodicityVerdict, LYAPUNOV_GAP_THRESHOLD,
};
use thermoform::io::{export_class, export_system, parse_number};
use thermoform::potentials::simple_top_reduction;
use thermoform::pressure::{affinity_dimension, pressure, PressureConfig};
use thermoform::{Budget, MatrixSystem, Potential, Subspace};

use crate::input::{load, parse_list};
use crate::report::{Kind, RunReport};
use crate::CliError;

/// Potential selection shared by `pressure`, `mixing` and `gibbs`.
pub struct PotentialChoice<'a> {
    pub input: Option<&'a str>,
    pub s: Option<f64>,
    pub weights: Option<&'a str>,
    pub seed: Option<u64>,
}

fn choose_potential(c: &PotentialChoice, r: &mut RunReport) -> Result<(Potential, Option<MatrixSystem>), CliError> {
    if let Some(w) = c.weights {
        let ws = w
            .split(',')
            .map(|x| parse_number(x.trim()).map(|(v, _)| v))
            .collect::<Result<Vec<f64>, _>>()?;
        r.param("weights", w);
        return Ok((Potential::scalar_weights(&ws)?, None));
    }
    let input = c
        .input
        .ok_or_else(|| CliError::Usage("an input system or --weights is required".into()))?;
    r.param("input", input);
    let loaded = load(input, c.seed)?;
    for n in loaded.notes {
        r.note(n);
    }
    let sys = loaded.system;
    let p = match c.s {
        Some(s) => {
            r.param("s", s);
            if sys.factors().len() > 1 {
                r.note("the singular value potential uses factor 1 only");
            }
            Potential::singular_value(sys.factor(0).generators().to_vec(), s)?
        }
        None => Potential::generalised(sys.clone()),
    };
    r.text("potential", p.kind_name());
    Ok((p, Some(sys)))
}

pub fn run_pressure(
    c: &PotentialChoice,
    depth: usize,
    connector: usize,
    window: usize,
    budget: Budget,
) -> Result<RunReport, CliError> {
    let mut r = RunReport::new("pressure");
    r.param("depth", depth);
    r.param("connector", connector);
    r.param("window", window);
    let (p, _) = choose_potential(c, &mut r)?;
    let cfg = PressureConfig {
        n_max: depth,
        connector,
        window,
        budget,
        ..PressureConfig::default()
    };
    let est = pressure(&p, &cfg)?;
    for l in &est.levels {
        r.number(format!("level.{}.log_sum", l.n), l.log_sum, Kind::PointEstimate);
        r.number(format!("level.{}.rate", l.n), l.rate, Kind::PointEstimate);
    }
    r.number("upper", est.upper, Kind::CertifiedBound);
    let lower_kind = if est.lower_certified {
        Kind::CertifiedBound
    } else {
        Kind::Heuristic
    };
    match est.lower {
        Some(lo) => {
            r.number("lower", lo, lower_kind);
            r.number("width", est.upper - lo, lower_kind);
        }
        None => r.text("lower", "none"),
    }
    r.number("point", est.point, Kind::PointEstimate);
    r.count("connector_length", est.m, Kind::Heuristic);
    if let Some(ld) = est.log_delta {
        r.number("log_delta", ld, lower_kind);
    }
    r.number("kappa", est.kappa, Kind::CertifiedBound);
    if !est.lower_certified {
        r.note("the lower bound uses an estimated quasimultiplicativity constant");
    }
    Ok(r)
}

pub fn run_dimension(input: &str, seed: Option<u64>, depth: usize, tol: f64, budget: Budget) -> Result<RunReport, CliError> {
    let mut r = RunReport::new("dimension");
    r.param("input", input);
    r.param("depth", depth);
    r.param("tol", tol);
    let loaded = load(input, seed)?;
    for n in loaded.notes {
        r.note(n);
    }
    if loaded.system.factors().len() > 1 {
        r.note("the affinity dimension uses factor 1 only");
    }
    let d = affinity_dimension(loaded.system.factor(0).generators(), depth, tol, &budget)?;
    let kind = if d.certified {
        Kind::CertifiedBound
    } else {
        Kind::Heuristic
    };
    r.number("dimension.lower", d.s_lo, kind);
    r.number("dimension.upper", d.s_hi, kind);
    r.number("dimension.point", d.point, Kind::PointEstimate);
    r.count("bisection_steps", d.steps.len(), Kind::PointEstimate);
    r.text("iteration_cap_reached", d.iteration_cap_reached);
    Ok(r)
}

fn default_targets(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &d in dims {
        let range: Vec<usize> = if d == 1 { vec![1] } else { (1..d).collect() };
        out = out
            .into_iter()
            .flat_map(|t| {
                range.iter().map(move |&l| {
                    let mut t = t.clone();
                    t.push(l);
                    t
                })
            })
            .collect();
    }
    out
}

fn seed_tuples(seeds: &[(usize, Subspace)], dims: &[usize]) -> Vec<SubspaceTuple> {
    let mut out: Vec<SubspaceTuple> = vec![Vec::new()];
    for (j, &dim) in dims.iter().enumerate() {
        let options: Vec<&Subspace> = seeds
            .iter()
            .filter(|(f, s)| *f == j + 1 && s.dim() == dim)
            .map(|(_, s)| s)
            .collect();
        out = out
            .into_iter()
            .flat_map(|t| {
                options.iter().map(move |s| {
                    let mut t = t.clone();
                    t.push((*s).clone());
                    t
                })
            })
            .collect();
    }
    out
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

pub fn run_classes(
    input: &str,
    seed: Option<u64>,
    cap: usize,
    dims: Option<&str>,
    product_len: usize,
) -> Result<RunReport, CliError> {
    let mut r = RunReport::new("classes");
    r.param("input", input);
    r.param("cap", cap);
    r.param("product_len", product_len);
    let loaded = load(input, seed)?;
    for n in loaded.notes {
        r.note(n);
    }
    let sys = loaded.system;
    for (j, f) in sys.factors().iter().enumerate() {
        let verdict = is_irreducible(f.generators(), product_len)?;
        r.text(format!("factor.{}.irreducibility", j + 1), verdict.label());
    }
    let targets = match dims {
        Some(text) => {
            r.param("dims", text);
            vec![parse_list::<usize>(text, "dimension")?]
        }
        None => default_targets(&sys.dims()),
    };
    let mut index = 0;
    let mut documents = String::new();
    for target in &targets {
        let config = SearchConfig {
            cap,
            product_len,
            extra_seeds: seed_tuples(&loaded.seeds, target),
        };
        let search = find_finite_orbit_classes(&sys, target, &config)?;
        let key = format!("search.{}", join(target));
        r.count(format!("{key}.classes"), search.classes.len(), Kind::Heuristic);
        r.count(format!("{key}.seeds_tried"), search.seeds_tried, Kind::Heuristic);
        r.count(format!("{key}.seeds_overflowed"), search.seeds_overflowed, Kind::Heuristic);
        for class in &search.classes {
            index += 1;
            let c = classify(class, &sys)?;
            let k = format!("class.{index}");
            r.text(format!("{k}.dims"), join(target));
            r.count(format!("{k}.size"), c.size, Kind::Heuristic);
            r.text(format!("{k}.transitive"), c.transitive);
            match c.period {
                Some(p) => r.count(format!("{k}.period"), p, Kind::Heuristic),
                None => r.text(format!("{k}.period"), "none"),
            }
            r.text(format!("{k}.primitive"), c.primitive);
            match c.exponent {
                Some(e) => r.count(format!("{k}.exponent"), e, Kind::Heuristic),
                None => r.text(format!("{k}.exponent"), "none"),
            }
            documents.push_str(&format!("class {index}\n{}", export_class(class)));
        }
    }
    r.count("classes", index, Kind::Heuristic);
    r.text("search_complete", false);
    r.note("classes come from a seeded search; absence of further classes is not certified");
    r.append(&documents);
    Ok(r)
}

pub fn run_proximal(input: &str, seed: Option<u64>, depth: usize, budget: Budget) -> Result<RunReport, CliError> {
    let mut r = RunReport::new("proximal");
    r.param("input", input);
    r.param("depth", depth);
    let sys = load(input, seed)?.system;
    let found = find_simultaneous_proximal_word(&sys, None, depth, &budget)?;
    r.count("words_checked", found.words_checked, Kind::PointEstimate);
    match &found.word {
        Some(w) => {
            r.text("word", w);
            for (j, rep) in found.reports.iter().enumerate() {
                r.number(format!("factor.{}.gap_ratio", j + 1), rep.gap_ratio, Kind::PointEstimate);
                r.number(format!("factor.{}.modulus_ratio", j + 1), rep.modulus_ratio, Kind::PointEstimate);
            }
        }
        None => r.text("word", "none"),
    }
    Ok(r)
}

pub fn run_mixing(
    c: &PotentialChoice,
    max_gap: usize,
    window: usize,
    connector: usize,
    budget: Budget,
) -> Result<RunReport, CliError> {
    let mut r = RunReport::new("mixing");
    r.param("max_gap", max_gap);
    r.param("window", window);
    r.param("connector", connector);
    let (p, _) = choose_potential(c, &mut r)?;
    let gaps: Vec<usize> = (1..=max_gap).collect();
    let scan = correlation_ratio_scan(&p, &gaps, window, &budget)?;
    r.count("scan.depth", scan.depth, Kind::PointEstimate);
    for rep in &scan.reports {
        let k = format!("gap.{}", rep.gap);
        r.number(format!("{k}.deviation"), rep.sup_ratio_deviation, Kind::PointEstimate);
        r.text(format!("{k}.witness_i"), &rep.witness_i);
        r.text(format!("{k}.witness_j"), &rep.witness_j);
    }
    for res in &scan.residues {
        for (q, dev) in res.max_deviation.iter().enumerate() {
            let k = format!("residue.{}.{}", res.modulus, q);
            match dev {
                Some(x) => r.number(k, *x, Kind::PointEstimate),
                None => r.text(k, "none"),
            }
        }
    }
    let psi = psi_mixing_precondition(&p, connector, window, &budget)?;
    r.number("psi.delta", psi.delta, Kind::Heuristic);
    r.number("psi.log_delta", psi.log_delta, Kind::Heuristic);
    r.text("psi.witness_i", &psi.witness.0);
    r.text("psi.witness_j", &psi.witness.1);
    Ok(r)
}

pub fn run_recode(input: &str, seed: Option<u64>, blocks: usize) -> Result<RunReport, CliError> {
    let mut r = RunReport::new("recode");
    r.param("input", input);
    r.param("blocks", blocks);
    let sys = load(input, seed)?.system;
    let rec = catalog::recode_system(&sys, blocks)?;
    r.count("alphabet", rec.alphabet().size(), Kind::CertifiedBound);
    r.document(export_system(&rec));
    Ok(r)
}

pub fn run_catalog_list() -> RunReport {
    let mut r = RunReport::new("catalog list");
    for key in KEYS {
        let entry = catalog::build(key, &catalog::CatalogParams::default()).expect("catalog defaults build");
        r.count(format!("{key}.alphabet"), entry.system.alphabet().size(), Kind::CertifiedBound);
        r.text(format!("{key}.dims"), join(&entry.system.dims()));
        for (i, f) in entry.facts.iter().enumerate() {
            r.text(format!("{key}.fact.{}", i + 1), format!("{} ({})", f.statement, f.source));
        }
    }
    r
}

pub fn run_catalog_export(spec: &str, seed: Option<u64>) -> Result<RunReport, CliError> {
    let mut r = RunReport::new("catalog export");
    r.param("entry", spec);
    let (name, mut params) = catalog::parse_spec(spec)?;
    if let Some(s) = seed {
        params.seed = s;
    }
    let entry = catalog::build(&name, &params)?;
    r.document(export_system(&entry.system));
    Ok(r)
}

pub struct GibbsOptions<'a> {
    pub depth: usize,
    pub split: Option<&'a str>,
    pub table: bool,
    pub diagnose: bool,
    pub mixture: bool,
    pub cap: usize,
    pub window: usize,
}

pub fn run_gibbs(c: &PotentialChoice, o: &GibbsOptions, budget: Budget) -> Result<RunReport, CliError> {
    let mut r = RunReport::new("gibbs");
    r.param("depth", o.depth);
    let (p, sys) = choose_potential(c, &mut r)?;
    let t = gibbs_table(&p, o.depth, &budget)?;
    r.note("cylinder masses are Gibbs-normalised approximations at finite depth");
    r.number("log_norm", t.log_norm(), Kind::PointEstimate);
    r.number("entropy", entropy_estimate(&t), Kind::PointEstimate);
    let ea = ergodic_average(&t, &p)?;
    r.number("average", ea.value, Kind::PointEstimate);
    r.number("variational_residual", ea.variational_residual, Kind::PointEstimate);
    if let Some(sys) = &sys {
        let l = lyapunov_spectrum(sys, &t)?;
        for (j, ex) in l.exponents.iter().enumerate() {
            for (i, x) in ex.iter().enumerate() {
                r.number(format!("lyapunov.{}.{}", j + 1, i + 1), *x, Kind::PointEstimate);
            }
        }
        r.text("suggested_ell", join(&l.suggest_ell(LYAPUNOV_GAP_THRESHOLD)));
    }
    if let Some(split) = o.split {
        r.param("split", split);
        let parts = parse_list::<usize>(split, "split")?;
        let [a, g, b] = parts[..] else {
            return Err(CliError::Usage("--split takes three lengths a,g,b".into()));
        };
        let e = epsilon_independence(&t, (a, g, b))?;
        r.number("eps.full", e.eps_full, Kind::PointEstimate);
        r.number("eps.trimmed", e.eps_trimmed, Kind::PointEstimate);
        r.number("eps.discarded_mass", e.discarded_mass, Kind::PointEstimate);
        r.text("eps.witness_past", &e.witness_past);
        r.text("eps.witness_future", &e.witness_future);
    }
    if o.diagnose {
        let sys = sys.as_ref().ok_or_else(|| CliError::Usage("--diagnose needs a matrix system".into()))?;
        r.param("cap", o.cap);
        let config = DiagnosticConfig {
            search: SearchConfig {
                cap: o.cap,
                ..SearchConfig::default()
            },
            scan_window: o.window,
            budget,
            ..DiagnosticConfig::default()
        };
        let d = total_ergodicity_diagnostic(sys, &config)?;
        let verdict = match d.verdict {
            ErgodicityVerdict::NoObstructionFound => "no-obstruction-found".to_string(),
            ErgodicityVerdict::PeriodObstruction { class, period } => {
                format!("period-obstruction (class {}, period {period})", class + 1)
            }
        };
        r.text("ergodicity", verdict);
        for (i, (dims, c)) in d.classes.iter().enumerate() {
            let k = format!("ergodicity.class.{}", i + 1);
            r.text(format!("{k}.dims"), join(dims));
            r.count(format!("{k}.size"), c.size, Kind::Heuristic);
            match c.period {
                Some(p) => r.count(format!("{k}.period"), p, Kind::Heuristic),
                None => r.text(format!("{k}.period"), "none"),
            }
        }
    }
    if o.mixture {
        let sys = sys.as_ref().ok_or_else(|| CliError::Usage("--mixture needs a matrix system".into()))?;
        run_mixture(sys, o, budget, &mut r)?;
    }
    if o.table {
        for (w, log_weight, mass) in t.records() {
            r.number(format!("table.{w}.log_weight"), log_weight, Kind::PointEstimate);
            r.number(format!("table.{w}.mass"), mass, Kind::PointEstimate);
        }
    }
    Ok(r)
}

/// Fits the 2-block recoded table as a mixture of the tables restricted to the
/// two line classes of the recoded system.
fn run_mixture(sys: &MatrixSystem, o: &GibbsOptions, budget: Budget, r: &mut RunReport) -> Result<(), CliError> {
    let rec = catalog::recode_system(sys, 2)?;
    let depth = (o.depth / 2).max(1);
    let dims = vec![1; sys.factors().len()];
    let config = SearchConfig {
        cap: o.cap,
        ..SearchConfig::default()
    };
    let classes = find_finite_orbit_classes(&rec, &dims, &config)?.classes;
    r.count("mixture.classes", classes.len(), Kind::Heuristic);
    let [a, b] = &classes[..] else {
        r.text("mixture.weight", "none");
        r.note("the mixture fit needs exactly two classes in the 2-block recoding");
        return Ok(());
    };
    let target = gibbs_table(&Potential::generalised(rec.clone()), depth, &budget)?;
    let ta = gibbs_table(&Potential::restricted(rec.clone(), a.clone())?, depth, &budget)?;
    let tb = gibbs_table(&Potential::restricted(rec, b.clone())?, depth, &budget)?;
    let fit = mixture_weight(&target, &ta, &tb)?;
    r.count("mixture.depth", depth, Kind::PointEstimate);
    r.number("mixture.weight", fit.weight, Kind::PointEstimate);
    r.number("mixture.residual", fit.residual, Kind::PointEstimate);
    Ok(())
}

pub fn run_reduce(
    input: &str,
    seed: Option<u64>,
    ell: Option<&str>,
    depth: usize,
    budget: Budget,
) -> Result<RunReport, CliError> {
    let mut r = RunReport::new("reduce");
    r.param("input", input);
    let sys = load(input, seed)?.system;
    let ell = match ell {
        Some(text) => parse_list::<usize>(text, "ell")?,
        None => {
            r.param("depth", depth);
            let t = gibbs_table(&Potential::generalised(sys.clone()), depth, &budget)?;
            lyapunov_spectrum(&sys, &t)?.suggest_ell(LYAPUNOV_GAP_THRESHOLD)
        }
    };
    r.text("ell", join(&ell));
    r.document(export_system(&simple_top_reduction(&sys, &ell)?));
    Ok(r)
}
