//! Word-tree traversal with prefix-product reuse.
//!
//! Every exhaustive sum in the crate walks the tree of words depth-first,
//! extending the product matrices of the parent by one generator per node.
//! Parallel work is split by a fixed prefix length that depends only on
//! `(N, n)`, and partial results are merged in prefix order, so results do not
//! depend on the number of threads.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::potentials::Potential;
use crate::symbolic::{word_from_rank, Alphabet, Word};

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl LogSumExp {
    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    pub fn merge(&mut self, other: &LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max > self.max {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        } else {
            self.sum += other.sum * (other.max - self.max).exp();
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = LogSumExp::default();
    for v in values {
        acc.push(v);
    }
    acc.value()
}

/// A matrix carried as `exp(log_scale) · m` so long products stay finite.
#[derive(Debug, Clone)]
pub struct ScaledMatrix {
    pub m: DMatrix<f64>,
    pub log_scale: f64,
}

const RESCALE_HIGH: f64 = 1e100;
const RESCALE_LOW: f64 = 1e-100;

impl ScaledMatrix {
    pub fn identity(d: usize) -> Self {
        ScaledMatrix {
            m: DMatrix::identity(d, d),
            log_scale: 0.0,
        }
    }

    /// `out = self · rhs`, renormalising when entries drift out of range.
    pub fn mul_into(&self, rhs: &DMatrix<f64>, out: &mut ScaledMatrix) {
        self.m.mul_to(rhs, &mut out.m);
        out.log_scale = self.log_scale;
        out.rescale();
    }

    pub fn mul_scaled(&self, rhs: &ScaledMatrix) -> ScaledMatrix {
        let mut out = ScaledMatrix {
            m: &self.m * &rhs.m,
            log_scale: self.log_scale + rhs.log_scale,
        };
        out.rescale();
        out
    }

    fn rescale(&mut self) {
        let amax = self.m.amax();
        if amax > RESCALE_HIGH || (amax < RESCALE_LOW && amax > 0.0) {
            self.m /= amax;
            self.log_scale += amax.ln();
        }
    }
}

/// Products `A_{w₁}⋯A_{w_t}` for every factor of a potential, plus the
/// running scalar log-weight.
#[derive(Debug, Clone)]
pub struct WordProducts {
    pub mats: Vec<ScaledMatrix>,
    /// `log |det|` of each unscaled product, accumulated per symbol.
    pub log_dets: Vec<f64>,
    pub scalar: f64,
}

impl WordProducts {
    pub fn empty(p: &Potential) -> Self {
        WordProducts {
            mats: p.factor_dims().iter().map(|&d| ScaledMatrix::identity(d)).collect(),
            log_dets: vec![0.0; p.factors().len()],
            scalar: 0.0,
        }
    }

    pub fn of_word(p: &Potential, symbols: &[u32]) -> Self {
        let mut cur = WordProducts::empty(p);
        let mut next = cur.clone();
        for &s in symbols {
            cur.extend_into(p, s, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub fn extend_into(&self, p: &Potential, symbol: u32, out: &mut WordProducts) {
        for ((m, factor), dst) in self.mats.iter().zip(p.factors()).zip(out.mats.iter_mut()) {
            m.mul_into(factor.generator(symbol).matrix(), dst);
        }
        for ((acc, factor), dst) in self.log_dets.iter().zip(p.factors()).zip(out.log_dets.iter_mut()) {
            *dst = acc + factor.log_det(symbol);
        }
        out.scalar = self.scalar + p.symbol_log_weight(symbol);
    }

    /// Products of the concatenation `self · rhs`.
    pub fn concat(&self, rhs: &WordProducts) -> WordProducts {
        WordProducts {
            mats: self
                .mats
                .iter()
                .zip(&rhs.mats)
                .map(|(a, b)| a.mul_scaled(b))
                .collect(),
            log_dets: self.log_dets.iter().zip(&rhs.log_dets).map(|(a, b)| a + b).collect(),
            scalar: self.scalar + rhs.scalar,
        }
    }
}

/// Depth-first walker holding one product buffer per tree level.
struct Walker<'a> {
    p: &'a Potential,
    levels: Vec<WordProducts>,
    n_sym: u32,
}

impl<'a> Walker<'a> {
    fn new(p: &'a Potential, max_depth: usize) -> Self {
        let base = WordProducts::empty(p);
        Walker {
            p,
            levels: vec![base; max_depth + 1],
            n_sym: p.alphabet().size(),
        }
    }

    fn set_prefix(&mut self, prefix: &[u32]) {
        for (t, &s) in prefix.iter().enumerate() {
            let (lo, hi) = self.levels.split_at_mut(t + 1);
            lo[t].extend_into(self.p, s, &mut hi[0]);
        }
    }

    /// Visits every node strictly below level `t` down to `depth`, calling
    /// `f(len, rank, value)` with `rank` the 0-based lexicographic rank among
    /// words of length `len`.
    fn visit<F: FnMut(usize, u64, f64)>(&mut self, t: usize, rank: u64, depth: usize, f: &mut F) {
        if t == depth {
            return;
        }
        for s in 1..=self.n_sym {
            {
                let (lo, hi) = self.levels.split_at_mut(t + 1);
                lo[t].extend_into(self.p, s, &mut hi[0]);
            }
            let child_rank = rank * self.n_sym as u64 + (s as u64 - 1);
            let v = self.p.value_of_products(&self.levels[t + 1]);
            f(t + 1, child_rank, v);
            self.visit(t + 1, child_rank, depth, f);
        }
    }

    /// Like `visit` but only evaluates the potential at the bottom level.
    fn visit_leaves<F: FnMut(u64, f64)>(&mut self, t: usize, rank: u64, depth: usize, f: &mut F) {
        if t == depth {
            let v = self.p.value_of_products(&self.levels[t]);
            f(rank, v);
            return;
        }
        for s in 1..=self.n_sym {
            {
                let (lo, hi) = self.levels.split_at_mut(t + 1);
                lo[t].extend_into(self.p, s, &mut hi[0]);
            }
            let child_rank = rank * self.n_sym as u64 + (s as u64 - 1);
            self.visit_leaves(t + 1, child_rank, depth, f);
        }
    }
}

/// Prefix length used to split depth-`n` work into independent tasks.
fn split_len(alphabet: Alphabet, n: usize) -> usize {
    let mut len = 0;
    let mut tasks = 1u64;
    while len < n && tasks < 256 {
        len += 1;
        tasks *= alphabet.size() as u64;
    }
    // leave some depth for the sequential walk when words are short
    if n > 0 && len == n && n > 1 {
        len = n - 1;
    }
    len
}

fn prefixes(alphabet: Alphabet, len: usize) -> Vec<Word> {
    if len == 0 {
        return Vec::new();
    }
    let count = alphabet.word_count(len).expect("small prefix space");
    (0..count).map(|r| word_from_rank(r, alphabet, len)).collect()
}

/// `log Σ_{|w|=n} Φ(w)`, reduced deterministically.
pub fn level_log_sum(p: &Potential, n: usize) -> f64 {
    let alphabet = p.alphabet();
    let s = split_len(alphabet, n);
    if s == 0 {
        let mut acc = LogSumExp::default();
        Walker::new(p, n).visit_leaves(0, 0, n, &mut |_, v| acc.push(v));
        return acc.value();
    }
    let parts: Vec<LogSumExp> = prefixes(alphabet, s)
        .par_iter()
        .map(|prefix| {
            let mut w = Walker::new(p, n);
            w.set_prefix(prefix.symbols());
            let mut acc = LogSumExp::default();
            w.visit_leaves(s, prefix.rank() as u64, n, &mut |_, v| acc.push(v));
            acc
        })
        .collect();
    let mut total = LogSumExp::default();
    for part in &parts {
        total.merge(part);
    }
    total.value()
}

/// All values `log Φ(w)` for `|w| = n`, in lexicographic order.
pub fn level_values(p: &Potential, n: usize) -> Vec<f64> {
    let alphabet = p.alphabet();
    let s = split_len(alphabet, n);
    if s == 0 {
        let mut out = Vec::new();
        Walker::new(p, n).visit_leaves(0, 0, n, &mut |_, v| out.push(v));
        return out;
    }
    let parts: Vec<Vec<f64>> = prefixes(alphabet, s)
        .par_iter()
        .map(|prefix| {
            let mut w = Walker::new(p, n);
            w.set_prefix(prefix.symbols());
            let mut out = Vec::new();
            w.visit_leaves(s, prefix.rank() as u64, n, &mut |_, v| out.push(v));
            out
        })
        .collect();
    parts.concat()
}

/// Values of every word of length `1..=max_len`; entry `[len - 1][rank]`.
pub fn values_up_to(p: &Potential, max_len: usize) -> Vec<Vec<f64>> {
    let alphabet = p.alphabet();
    let mut out: Vec<Vec<f64>> = (1..=max_len)
        .map(|len| vec![0.0; alphabet.word_count(len).expect("budgeted") as usize])
        .collect();
    Walker::new(p, max_len).visit(0, 0, max_len, &mut |len, rank, v| {
        out[len - 1][rank as usize] = v;
    });
    out
}

/// Applies `f` to the products of every word of length `n` (lexicographic
/// order within each prefix task) and collects the per-word results.
pub fn map_level<T, F>(p: &Potential, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&WordProducts) -> T + Sync,
{
    let alphabet = p.alphabet();
    let s = split_len(alphabet, n);
    let run = |prefix: &[u32]| {
        let mut w = Walker::new(p, n);
        w.set_prefix(prefix);
        let mut out = Vec::new();
        collect_leaves(&mut w, prefix.len(), n, &f, &mut out);
        out
    };
    if s == 0 {
        return run(&[]);
    }
    let parts: Vec<Vec<T>> = prefixes(alphabet, s)
        .par_iter()
        .map(|prefix| run(prefix.symbols()))
        .collect();
    parts.into_iter().flatten().collect()
}

fn collect_leaves<T, F: Fn(&WordProducts) -> T>(
    w: &mut Walker<'_>,
    t: usize,
    depth: usize,
    f: &F,
    out: &mut Vec<T>,
) {
    if t == depth {
        out.push(f(&w.levels[t]));
        return;
    }
    for s in 1..=w.n_sym {
        {
            let (lo, hi) = w.levels.split_at_mut(t + 1);
            lo[t].extend_into(w.p, s, &mut hi[0]);
        }
        collect_leaves(w, t + 1, depth, f, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct() {
        let xs = [0.1, -3.0, 2.5, 700.0, 699.0];
        let direct = {
            let m: f64 = 700.0;
            m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
        };
        assert!((log_sum_exp(xs) - direct).abs() < 1e-12);
        let mut a = LogSumExp::default();
        let mut b = LogSumExp::default();
        xs[..2].iter().for_each(|&x| a.push(x));
        xs[2..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.value() - direct).abs() < 1e-12);
        assert_eq!(log_sum_exp([]), f64::NEG_INFINITY);
    }

    #[test]
    fn scaled_products_survive_overflow() {
        let big = DMatrix::from_diagonal_element(2, 2, 1e80);
        let mut acc = ScaledMatrix::identity(2);
        let mut next = acc.clone();
        for _ in 0..10 {
            acc.mul_into(&big, &mut next);
            std::mem::swap(&mut acc, &mut next);
        }
        let log_norm = acc.m.amax().ln() + acc.log_scale;
        assert!((log_norm - 800.0 * 10f64.ln()).abs() < 1e-9);
    }
}
