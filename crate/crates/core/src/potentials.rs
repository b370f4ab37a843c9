//! Generalised matrix potentials and their relatives, all in log-domain.
//!
//! A word `w = w₁⋯w_n` acts through the left-to-right product
//! `A_w = A_{w₁}⋯A_{w_n}`. A generalised potential is
//! `log Φ(w) = Σ_j β_j log ‖A_w^(j)‖` with the Euclidean operator norm.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classes::SubspaceClass;
use crate::error::{Error, Result};
use crate::kernel::{self, WordProducts};
use crate::multilinear::{
    binomial, exterior_power, singular_values_of, top_singular_value, LinearMap, INVERTIBILITY_TOL,
};
use crate::symbolic::{word_from_rank, Alphabet, Budget, Word};

/// One tuple `(A_1, ..., A_N)` acting on `ℝ^d`, with its exponent `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    dim: usize,
    generators: Vec<LinearMap>,
    beta: f64,
    log_dets: Vec<f64>,
}

impl Factor {
    pub fn new(generators: Vec<LinearMap>, beta: f64) -> Result<Self> {
        let dim = generators
            .first()
            .ok_or_else(|| Error::invalid("a factor needs at least one generator"))?
            .dim();
        if let Some(i) = generators.iter().position(|g| g.dim() != dim) {
            return Err(Error::invalid(format!(
                "generator {} has dimension {}, expected {dim}",
                i + 1,
                generators[i].dim()
            )));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid(format!("exponent must be positive, got {beta}")));
        }
        let log_dets = generators.iter().map(|g| g.determinant().abs().ln()).collect();
        Ok(Factor {
            dim,
            generators,
            beta,
            log_dets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn generators(&self) -> &[LinearMap] {
        &self.generators
    }

    /// Generator for a 1-based symbol.
    pub fn generator(&self, symbol: u32) -> &LinearMap {
        &self.generators[symbol as usize - 1]
    }

    /// `log |det A_i|` for a 1-based symbol.
    pub(crate) fn log_det(&self, symbol: u32) -> f64 {
        self.log_dets[symbol as usize - 1]
    }

    /// The product `A_w = A_{w₁}⋯A_{w_n}`.
    pub fn product(&self, w: &[u32]) -> LinearMap {
        let mut m = DMatrix::identity(self.dim, self.dim);
        for &s in w {
            m = &m * self.generator(s).matrix();
        }
        LinearMap::new(m).expect("square")
    }
}

/// `k` tuples of invertible maps over a common alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSystem {
    alphabet: Alphabet,
    factors: Vec<Factor>,
}

impl MatrixSystem {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::invalid("a system needs at least one factor"))?;
        let n = first.generators.len();
        let alphabet = Alphabet::new(u32::try_from(n).map_err(|_| Error::invalid("too many generators"))?)?;
        for (j, f) in factors.iter().enumerate() {
            if f.generators.len() != n {
                return Err(Error::invalid(format!(
                    "factor {} has {} generators, expected {n}",
                    j + 1,
                    f.generators.len()
                )));
            }
            for (i, g) in f.generators.iter().enumerate() {
                if !g.is_finite() {
                    return Err(Error::Validation {
                        factor: j + 1,
                        generator: i + 1,
                        message: "non-finite entry".into(),
                    });
                }
                if !g.is_invertible(INVERTIBILITY_TOL) {
                    return Err(Error::Validation {
                        factor: j + 1,
                        generator: i + 1,
                        message: "matrix is not invertible".into(),
                    });
                }
            }
        }
        Ok(MatrixSystem { alphabet, factors })
    }

    /// A one-factor system.
    pub fn single(generators: Vec<LinearMap>, beta: f64) -> Result<Self> {
        MatrixSystem::new(vec![Factor::new(generators, beta)?])
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, j: usize) -> &Factor {
        &self.factors[j]
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    pub fn with_betas(&self, betas: &[f64]) -> Result<Self> {
        if betas.len() != self.factors.len() {
            return Err(Error::invalid("one exponent per factor required"));
        }
        let factors = self
            .factors
            .iter()
            .zip(betas)
            .map(|(f, &b)| Factor::new(f.generators.clone(), b))
            .collect::<Result<Vec<_>>>()?;
        MatrixSystem::new(factors)
    }

    fn check_word(&self, w: &Word) -> Result<()> {
        if w.alphabet() != self.alphabet {
            return Err(Error::invalid(format!(
                "word over {} symbols used with a system over {}",
                w.alphabet().size(),
                self.alphabet.size()
            )));
        }
        Ok(())
    }
}

/// Log singular values of a matrix carried as `exp(log_scale) · M`, with the
/// smallest one recovered from `log |det|` of the unscaled matrix.
pub(crate) fn log_singular_values(m: &DMatrix<f64>, log_scale: f64, log_det: f64) -> Vec<f64> {
    let mut logs: Vec<f64> = singular_values_of(m).iter().map(|x| x.ln() + log_scale).collect();
    let d = logs.len();
    if log_det.is_finite() {
        let rest: f64 = logs[..d - 1].iter().sum();
        let last = log_det - rest;
        logs[d - 1] = if d > 1 { last.min(logs[d - 2]) } else { last };
    }
    logs
}

/// `log φ^s` from non-increasing log singular values.
pub(crate) fn log_phi_s(log_sv: &[f64], s: f64) -> f64 {
    let d = log_sv.len();
    if s >= d as f64 {
        let log_det: f64 = log_sv.iter().sum();
        return s / d as f64 * log_det;
    }
    let k = s.floor() as usize;
    let frac = s - k as f64;
    let mut acc: f64 = log_sv[..k].iter().sum();
    if frac > 0.0 {
        acc += frac * log_sv[k];
    }
    acc
}

/// `log φ^s(A)` for a single matrix.
pub fn log_singular_value_function(a: &LinearMap, s: f64) -> Result<f64> {
    if s.is_nan() || s < 0.0 {
        return Err(Error::invalid(format!("s must be non-negative, got {s}")));
    }
    let log_det = a.determinant().abs().ln();
    Ok(log_phi_s(&log_singular_values(a.matrix(), 0.0, log_det), s))
}

/// The same quantity through exterior powers, valid for `0 <= s < d`:
/// `(1 + ⌊s⌋ − s) log ‖A^∧⌊s⌋‖ + (s − ⌊s⌋) log ‖A^∧⌈s⌉‖`.
pub fn log_singular_value_function_exterior(a: &LinearMap, s: f64) -> Result<f64> {
    let d = a.dim() as f64;
    if !(0.0..d).contains(&s) {
        return Err(Error::invalid(format!("exterior-power form needs 0 <= s < {d}")));
    }
    let lo = s.floor() as usize;
    let hi = s.ceil() as usize;
    let log_norm = |k: usize| -> Result<f64> {
        if k == 0 {
            Ok(0.0)
        } else {
            Ok(exterior_power(a, k)?.norm().ln())
        }
    };
    let frac = s - lo as f64;
    let mut v = (1.0 - frac) * log_norm(lo)?;
    if frac > 0.0 {
        v += frac * log_norm(hi)?;
    }
    Ok(v)
}

/// The potentials this crate can sum over words.
#[derive(Debug, Clone)]
pub enum Potential {
    /// `Π_j ‖A_w^(j)‖^{β_j}`.
    Generalised(MatrixSystem),
    /// Falconer's singular value function `φ^s(A_w)` of a single tuple.
    SingularValue { system: MatrixSystem, s: f64 },
    /// `max_{(W_j) ∈ 𝒲} Π_j ‖A_w^(j)|_{W_j}‖^{β_j}` over an equivariant class.
    Restricted {
        system: MatrixSystem,
        class: SubspaceClass,
    },
    /// A Bernoulli-type potential `Π_t p_{w_t}`.
    ScalarWeights { alphabet: Alphabet, log_weights: Vec<f64> },
}

impl Potential {
    pub fn generalised(system: MatrixSystem) -> Self {
        Potential::Generalised(system)
    }

    pub fn singular_value(generators: Vec<LinearMap>, s: f64) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::invalid(format!("s must be non-negative, got {s}")));
        }
        Ok(Potential::SingularValue {
            system: MatrixSystem::single(generators, 1.0)?,
            s,
        })
    }

    pub fn restricted(system: MatrixSystem, class: SubspaceClass) -> Result<Self> {
        if class.factor_dims() != system.dims().as_slice() {
            return Err(Error::invalid("class and system dimensions differ"));
        }
        if !class.is_equivariant_under(&system) {
            return Err(Error::Precondition(
                "restricted potentials need a class equivariant for the system".into(),
            ));
        }
        Ok(Potential::Restricted { system, class })
    }

    pub fn scalar_weights(weights: &[f64]) -> Result<Self> {
        let alphabet = Alphabet::new(weights.len() as u32)?;
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("scalar weights must be positive and finite"));
        }
        Ok(Potential::ScalarWeights {
            alphabet,
            log_weights: weights.iter().map(|w| w.ln()).collect(),
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        match self {
            Potential::Generalised(sys) => sys.alphabet,
            Potential::SingularValue { system, .. } => system.alphabet,
            Potential::Restricted { system, .. } => system.alphabet,
            Potential::ScalarWeights { alphabet, .. } => *alphabet,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Potential::Generalised(_) => "generalised",
            Potential::SingularValue { .. } => "singular-value",
            Potential::Restricted { .. } => "restricted",
            Potential::ScalarWeights { .. } => "scalar-weights",
        }
    }

    /// The underlying system, if any.
    pub fn system(&self) -> Option<&MatrixSystem> {
        match self {
            Potential::Generalised(sys) => Some(sys),
            Potential::SingularValue { system, .. } | Potential::Restricted { system, .. } => {
                Some(system)
            }
            Potential::ScalarWeights { .. } => None,
        }
    }

    pub(crate) fn factors(&self) -> &[Factor] {
        self.system().map(|s| s.factors()).unwrap_or(&[])
    }

    pub(crate) fn factor_dims(&self) -> Vec<usize> {
        self.factors().iter().map(|f| f.dim).collect()
    }

    pub(crate) fn symbol_log_weight(&self, symbol: u32) -> f64 {
        match self {
            Potential::ScalarWeights { log_weights, .. } => log_weights[symbol as usize - 1],
            _ => 0.0,
        }
    }

    pub(crate) fn value_of_products(&self, prods: &WordProducts) -> f64 {
        match self {
            Potential::Generalised(sys) => sys
                .factors
                .iter()
                .zip(&prods.mats)
                .map(|(f, m)| f.beta * (top_singular_value(&m.m).ln() + m.log_scale))
                .sum(),
            Potential::SingularValue { s, .. } => {
                let m = &prods.mats[0];
                log_phi_s(&log_singular_values(&m.m, m.log_scale, prods.log_dets[0]), *s)
            }
            Potential::Restricted { system, class } => class
                .members()
                .iter()
                .map(|tuple| {
                    system
                        .factors
                        .iter()
                        .zip(&prods.mats)
                        .zip(tuple)
                        .map(|((f, m), w)| {
                            let restricted = &m.m * w.basis();
                            f.beta * (top_singular_value(&restricted).ln() + m.log_scale)
                        })
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max),
            Potential::ScalarWeights { .. } => prods.scalar,
        }
    }

    /// `log Φ(w)`.
    pub fn log_evaluate(&self, w: &Word) -> Result<f64> {
        if w.alphabet() != self.alphabet() {
            return Err(Error::invalid(format!(
                "word over {} symbols used with a potential over {}",
                w.alphabet().size(),
                self.alphabet().size()
            )));
        }
        Ok(self.value_of_products(&WordProducts::of_word(self, w.symbols())))
    }

    /// Upper bound `κ` on the per-symbol log cost of appending a symbol:
    /// `log Φ(uv) ≥ log Φ(u) − |v| κ`.
    pub fn log_inverse_bound(&self) -> f64 {
        let n = self.alphabet().size();
        let per_symbol = |i: u32| -> f64 {
            match self {
                Potential::Generalised(sys) | Potential::Restricted { system: sys, .. } => sys
                    .factors
                    .iter()
                    .map(|f| f.beta * inverse_norm(f.generator(i)).ln())
                    .sum(),
                Potential::SingularValue { system, s } => {
                    let f = &system.factors[0];
                    let inv = inverse_matrix(f.generator(i));
                    log_phi_s(&log_singular_values(&inv, 0.0, -f.log_det(i)), *s)
                }
                Potential::ScalarWeights { log_weights, .. } => -log_weights[i as usize - 1],
            }
        };
        (1..=n).map(per_symbol).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn inverse_matrix(a: &LinearMap) -> DMatrix<f64> {
    a.matrix().clone().try_inverse().expect("generators are invertible")
}

fn inverse_norm(a: &LinearMap) -> f64 {
    top_singular_value(&inverse_matrix(a))
}

/// `log Φ(w)` for any potential kind.
pub fn log_evaluate(p: &Potential, w: &Word) -> Result<f64> {
    p.log_evaluate(w)
}

/// `log φ^s(A_w)` for a tuple of generators.
pub fn log_evaluate_sv(generators: &[LinearMap], s: f64, w: &Word) -> Result<f64> {
    if s.is_nan() || s < 0.0 {
        return Err(Error::invalid(format!("s must be non-negative, got {s}")));
    }
    Potential::singular_value(generators.to_vec(), s)?.log_evaluate(w)
}

/// `log Φ_𝒲(w)` for an equivariant class.
pub fn log_evaluate_restricted(sys: &MatrixSystem, class: &SubspaceClass, w: &Word) -> Result<f64> {
    sys.check_word(w)?;
    Potential::restricted(sys.clone(), class.clone())?.log_evaluate(w)
}

/// Outcome of a submultiplicativity sweep.
#[derive(Debug, Clone)]
pub struct SubmultiplicativityReport {
    /// `max log Φ(ij) − log Φ(i) − log Φ(j)` over the checked pairs.
    pub max_excess: f64,
    pub worst_pair: Option<(Word, Word)>,
    pub pairs_checked: u64,
    /// False when the budget forced random sampling.
    pub exhaustive: bool,
}

/// Slack allowed by [`SubmultiplicativityReport::passes`].
pub const SUBMULTIPLICATIVE_SLACK: f64 = 1e-9;

impl SubmultiplicativityReport {
    pub fn passes(&self) -> bool {
        self.max_excess <= SUBMULTIPLICATIVE_SLACK
    }
}

fn word_space_size(alphabet: Alphabet, max_len: usize) -> f64 {
    (1..=max_len).map(|l| (alphabet.size() as f64).powi(l as i32)).sum()
}

fn rank_of_concat(alphabet: Alphabet, ri: u64, rj: u64, len_j: usize) -> u64 {
    ri * alphabet.word_count(len_j).expect("budgeted") + rj
}

/// Checks `Φ(ij) ≤ Φ(i)Φ(j)` for `1 ≤ |i|, |j| ≤ max_len`: exhaustively when
/// the budget allows, else on `sample_count` seeded random pairs.
pub fn check_submultiplicative(
    p: &Potential,
    max_len: usize,
    sample_count: usize,
    seed: u64,
    budget: &Budget,
) -> Result<SubmultiplicativityReport> {
    if max_len < 1 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    let alphabet = p.alphabet();
    let words = word_space_size(alphabet, 2 * max_len);
    let pairs = word_space_size(alphabet, max_len).powi(2);
    if words <= budget.max_terms as f64 && pairs <= budget.max_terms as f64 {
        return Ok(exhaustive_pairs(p, |li, lj| li <= max_len && lj <= max_len, 2 * max_len));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SubmultiplicativityReport {
        max_excess: f64::NEG_INFINITY,
        worst_pair: None,
        pairs_checked: 0,
        exhaustive: false,
    };
    let random_word = |rng: &mut ChaCha8Rng| {
        let len = rng.random_range(1..=max_len);
        let symbols = (0..len).map(|_| rng.random_range(1..=alphabet.size())).collect();
        Word::new(symbols, alphabet).expect("in range")
    };
    for _ in 0..sample_count {
        let i = random_word(&mut rng);
        let j = random_word(&mut rng);
        let excess = p.log_evaluate(&i.concat(&j)?)? - p.log_evaluate(&i)? - p.log_evaluate(&j)?;
        report.pairs_checked += 1;
        if excess > report.max_excess {
            report.max_excess = excess;
            report.worst_pair = Some((i, j));
        }
    }
    Ok(report)
}

/// Exhaustive check over every pair with `|i| + |j| ≤ total_len`.
pub fn check_submultiplicative_combined(
    p: &Potential,
    total_len: usize,
    budget: &Budget,
) -> Result<SubmultiplicativityReport> {
    if total_len < 2 {
        return Err(Error::invalid("combined length must be at least 2"));
    }
    budget.check_terms(word_space_size(p.alphabet(), total_len), "submultiplicativity sweep")?;
    Ok(exhaustive_pairs(p, |li, lj| li + lj <= total_len, total_len))
}

fn exhaustive_pairs(
    p: &Potential,
    admit: impl Fn(usize, usize) -> bool,
    max_len: usize,
) -> SubmultiplicativityReport {
    let alphabet = p.alphabet();
    let values = kernel::values_up_to(p, max_len);
    let mut report = SubmultiplicativityReport {
        max_excess: f64::NEG_INFINITY,
        worst_pair: None,
        pairs_checked: 0,
        exhaustive: true,
    };
    let mut worst = None;
    for li in 1..max_len {
        for lj in 1..=max_len - li {
            if !admit(li, lj) {
                continue;
            }
            let vi = &values[li - 1];
            let vj = &values[lj - 1];
            let vij = &values[li + lj - 1];
            for (ri, &a) in vi.iter().enumerate() {
                for (rj, &b) in vj.iter().enumerate() {
                    let c = vij[rank_of_concat(alphabet, ri as u64, rj as u64, lj) as usize];
                    let excess = c - a - b;
                    report.pairs_checked += 1;
                    if excess > report.max_excess {
                        report.max_excess = excess;
                        worst = Some((li, ri as u64, lj, rj as u64));
                    }
                }
            }
        }
    }
    report.worst_pair = worst.map(|(li, ri, lj, rj)| {
        (word_from_rank(ri, alphabet, li), word_from_rank(rj, alphabet, lj))
    });
    report
}

/// Result of `min_{i,j} max_k Φ(ikj) / (Φ(i)Φ(j))` over a connector set.
#[derive(Debug, Clone)]
pub struct ConnectorEstimate {
    pub log_delta: f64,
    pub delta: f64,
    /// The pair `(i, j)` attaining the minimum.
    pub witness: (Word, Word),
    /// The connector achieving the max for the witness pair; `None` is the
    /// empty connector.
    pub best_connector: Option<Word>,
    pub connector_lengths: (usize, usize),
    pub max_len: usize,
}

/// Shared core of the quasimultiplicativity and ψ-mixing estimates: pairs with
/// `1 ≤ |i|, |j| ≤ max_len`, connectors with length in `min_k..=max_k`
/// (length 0 meaning the empty connector).
pub fn connector_estimate(
    p: &Potential,
    max_len: usize,
    min_k: usize,
    max_k: usize,
    budget: &Budget,
) -> Result<ConnectorEstimate> {
    if max_len < 1 {
        return Err(Error::invalid("window length must be at least 1"));
    }
    let alphabet = p.alphabet();
    let longest = 2 * max_len + max_k;
    budget.check_terms(word_space_size(alphabet, longest), "connector estimate tables")?;
    let connectors: f64 = (min_k..=max_k).map(|l| (alphabet.size() as f64).powi(l as i32)).sum();
    let work = word_space_size(alphabet, max_len).powi(2) * connectors;
    budget.check_terms(work, "connector estimate pairs")?;
    let values = kernel::values_up_to(p, longest);
    let value = |len: usize, rank: u64| values[len - 1][rank as usize];

    let mut lefts = Vec::new();
    for li in 1..=max_len {
        for ri in 0..alphabet.word_count(li).expect("budgeted") {
            lefts.push((li, ri));
        }
    }
    let rights = lefts.clone();
    // (log ratio, left index, right index, connector length, connector rank)
    let best = lefts
        .par_iter()
        .enumerate()
        .map(|(a, &(li, ri))| {
            let mut local: Option<(f64, usize, usize, usize, u64)> = None;
            for (b, &(lj, rj)) in rights.iter().enumerate() {
                let mut top = (f64::NEG_INFINITY, 0usize, 0u64);
                for lk in min_k..=max_k {
                    let kc = alphabet.word_count(lk).expect("budgeted");
                    for rk in 0..kc {
                        let rik = ri * kc + rk;
                        let r = rank_of_concat(alphabet, rik, rj, lj);
                        let v = value(li + lk + lj, r);
                        if v > top.0 {
                            top = (v, lk, rk);
                        }
                    }
                }
                let ratio = top.0 - value(li, ri) - value(lj, rj);
                if local.is_none_or(|l| ratio < l.0) {
                    local = Some((ratio, a, b, top.1, top.2));
                }
            }
            local.expect("nonempty window")
        })
        .reduce_with(|x, y| if y.0 < x.0 || (y.0 == x.0 && (y.1, y.2) < (x.1, x.2)) { y } else { x })
        .expect("nonempty window");
    let (log_delta, a, b, lk, rk) = best;
    let (li, ri) = lefts[a];
    let (lj, rj) = rights[b];
    Ok(ConnectorEstimate {
        log_delta,
        delta: log_delta.exp(),
        witness: (word_from_rank(ri, alphabet, li), word_from_rank(rj, alphabet, lj)),
        best_connector: (lk > 0).then(|| word_from_rank(rk, alphabet, lk)),
        connector_lengths: (min_k, max_k),
        max_len,
    })
}

/// `δ̂ = min_{|i|,|j| ≤ L} max_{|k| ≤ m} Φ(ikj) / (Φ(i)Φ(j))`, the empty
/// connector included.
pub fn estimate_quasimultiplicativity(
    p: &Potential,
    m: usize,
    max_len: usize,
    budget: &Budget,
) -> Result<ConnectorEstimate> {
    connector_estimate(p, max_len, 0, m, budget)
}

/// Replaces factor `j` by its `ℓ_j`-th exterior power with exponent `β_j/ℓ_j`.
pub fn simple_top_reduction(sys: &MatrixSystem, ell: &[usize]) -> Result<MatrixSystem> {
    if ell.len() != sys.factors.len() {
        return Err(Error::invalid("one exterior degree per factor required"));
    }
    let factors = sys
        .factors
        .iter()
        .zip(ell)
        .enumerate()
        .map(|(j, (f, &l))| {
            if l == 0 || l > f.dim {
                return Err(Error::invalid(format!(
                    "exterior degree {l} for factor {} outside 1..={}",
                    j + 1,
                    f.dim
                )));
            }
            let gens = f
                .generators
                .iter()
                .map(|g| exterior_power(g, l))
                .collect::<Result<Vec<_>>>()?;
            debug_assert!(gens.iter().all(|g| g.dim() == binomial(f.dim, l)));
            Factor::new(gens, f.beta / l as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixSystem::new(factors)
}
