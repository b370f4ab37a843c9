//! Finite-depth Gibbs approximations and mixing diagnostics.
//!
//! A depth-`n` table assigns `μ_n([i]) = Φ(i) / Σ_{|j|=n} Φ(j)`. It matches the
//! cylinder masses of the equilibrium state only up to a bounded multiplicative
//! distortion, so every quantity derived here is a Gibbs-normalised
//! approximation.

use rayon::prelude::*;

use crate::classes::{classify, find_finite_orbit_classes, Classification, SearchConfig};
use crate::error::{Error, Result};
use crate::kernel::{self, log_sum_exp};
use crate::multilinear::{eigenvalues, LinearMap};
use crate::potentials::{connector_estimate, log_singular_values, ConnectorEstimate, MatrixSystem, Potential};
use crate::symbolic::{word_from_rank, Alphabet, Budget, Word};

/// Normalised cylinder weights at a fixed depth, in lexicographic order.
#[derive(Debug, Clone)]
pub struct GibbsTable {
    depth: usize,
    alphabet: Alphabet,
    log_weights: Vec<f64>,
    log_norm: f64,
}

impl GibbsTable {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// `log Φ(i)` for every word of the table's depth.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `a_n = log Σ Φ(i)`.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn log_mass(&self, rank: usize) -> f64 {
        self.log_weights[rank] - self.log_norm
    }

    pub fn mass(&self, rank: usize) -> f64 {
        self.log_mass(rank).exp()
    }

    pub fn mass_of(&self, w: &Word) -> Result<f64> {
        if w.alphabet() != self.alphabet || w.len() != self.depth {
            return Err(Error::invalid("word does not index a cylinder of this table"));
        }
        Ok(self.mass(w.lex_index() as usize - 1))
    }

    pub fn masses(&self) -> Vec<f64> {
        (0..self.len()).map(|r| self.mass(r)).collect()
    }

    /// Masses of the depth `n − 1` cylinders obtained by summing out the last
    /// symbol.
    pub fn marginalize_last(&self) -> Vec<f64> {
        let n = self.alphabet.size() as usize;
        self.masses().chunks(n).map(|c| c.iter().sum()).collect()
    }

    /// Rows `(word, log-weight, mass)`.
    pub fn records(&self) -> Vec<(Word, f64, f64)> {
        (0..self.len())
            .map(|r| {
                (
                    word_from_rank(r as u64, self.alphabet, self.depth),
                    self.log_weights[r],
                    self.mass(r),
                )
            })
            .collect()
    }
}

pub fn gibbs_table(p: &Potential, n: usize, budget: &Budget) -> Result<GibbsTable> {
    if n == 0 {
        return Err(Error::invalid("depth must be at least 1"));
    }
    budget.check_words(p.alphabet(), n, "Gibbs table")?;
    let log_weights = kernel::level_values(p, n);
    let log_norm = log_sum_exp(log_weights.iter().copied());
    Ok(GibbsTable {
        depth: n,
        alphabet: p.alphabet(),
        log_weights,
        log_norm,
    })
}

/// `−(1/n) Σ μ_n([i]) log μ_n([i])`.
pub fn entropy_estimate(t: &GibbsTable) -> f64 {
    let s: f64 = (0..t.len())
        .map(|r| {
            let lm = t.log_mass(r);
            let m = lm.exp();
            if m > 0.0 {
                -m * lm
            } else {
                0.0
            }
        })
        .sum();
    (s / t.depth as f64).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicAverage {
    /// `(1/n) Σ μ_n([i]) log q(i)`.
    pub value: f64,
    pub entropy: f64,
    /// `h + Λ − a_n/n` with `a_n` the table's own normaliser.
    pub variational_residual: f64,
}

pub fn ergodic_average(t: &GibbsTable, q: &Potential) -> Result<ErgodicAverage> {
    if q.alphabet() != t.alphabet {
        return Err(Error::invalid("potential and table use different alphabets"));
    }
    let values = kernel::level_values(q, t.depth);
    let n = t.depth as f64;
    let value = values
        .iter()
        .enumerate()
        .map(|(r, v)| t.mass(r) * v)
        .sum::<f64>()
        / n;
    let entropy = entropy_estimate(t);
    Ok(ErgodicAverage {
        value,
        entropy,
        variational_residual: entropy + value - t.log_norm / n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSpectrum {
    /// `λ_1^(j) ≥ … ≥ λ_{d_j}^(j)` for each factor.
    pub exponents: Vec<Vec<f64>>,
    /// `(1/n) Σ μ_n([w]) log ρ(A_w^(j))` for each factor.
    pub spectral_radius_top: Vec<f64>,
    pub depth: usize,
}

impl LyapunovSpectrum {
    /// Per factor, the least `ℓ` with `λ_ℓ − λ_{ℓ+1} > threshold`, or `d_j`.
    pub fn suggest_ell(&self, threshold: f64) -> Vec<usize> {
        self.exponents
            .iter()
            .map(|ex| {
                (1..ex.len())
                    .find(|&l| ex[l - 1] - ex[l] > threshold)
                    .unwrap_or(ex.len())
            })
            .collect()
    }
}

/// Gap threshold used by [`LyapunovSpectrum::suggest_ell`] by default.
pub const LYAPUNOV_GAP_THRESHOLD: f64 = 1e-3;

pub fn lyapunov_spectrum(sys: &MatrixSystem, t: &GibbsTable) -> Result<LyapunovSpectrum> {
    if sys.alphabet() != t.alphabet {
        return Err(Error::invalid("system and table use different alphabets"));
    }
    let p = Potential::generalised(sys.clone());
    let dims = sys.dims();
    let per_word: Vec<Vec<f64>> = kernel::map_level(&p, t.depth, |prods| {
        let mut out = Vec::new();
        for (m, &log_det) in prods.mats.iter().zip(&prods.log_dets) {
            out.extend(log_singular_values(&m.m, m.log_scale, log_det));
            let rho = LinearMap::new(m.m.clone())
                .ok()
                .and_then(|a| eigenvalues(&a).ok())
                .map_or(f64::NAN, |e| e[0].norm());
            out.push(rho.ln() + m.log_scale);
        }
        out
    });
    let width: usize = dims.iter().map(|d| d + 1).sum();
    let mut acc = vec![0.0; width];
    for (r, row) in per_word.iter().enumerate() {
        let mass = t.mass(r);
        for (a, v) in acc.iter_mut().zip(row) {
            *a += mass * v;
        }
    }
    let n = t.depth as f64;
    let mut exponents = Vec::new();
    let mut spectral_radius_top = Vec::new();
    let mut offset = 0;
    for &d in &dims {
        exponents.push(acc[offset..offset + d].iter().map(|x| x / n).collect());
        spectral_radius_top.push(acc[offset + d] / n);
        offset += d + 1;
    }
    Ok(LyapunovSpectrum {
        exponents,
        spectral_radius_top,
        depth: t.depth,
    })
}

/// `δ̂_m = min_{|i|,|j| ≤ L} max_{|k| = m} Φ(ikj) / (Φ(i)Φ(j))`.
pub fn psi_mixing_precondition(
    p: &Potential,
    m: usize,
    window: usize,
    budget: &Budget,
) -> Result<ConnectorEstimate> {
    if m == 0 {
        return Err(Error::invalid("connector length must be at least 1"));
    }
    connector_estimate(p, window, m, m, budget)
}

/// Correlation deviation at one gap.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingReport {
    pub gap: usize,
    pub window: usize,
    /// `max |μ([i] ∩ σ^{−n−|i|}[j]) / (μ([i])μ([j])) − 1|` over `|i|, |j| ≤ L`.
    pub sup_ratio_deviation: f64,
    pub witness_i: Word,
    pub witness_j: Word,
}

/// Maximum deviation per residue class of the gap.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidueSummary {
    pub modulus: usize,
    /// Entry `r` is the largest deviation over gaps `≡ r (mod modulus)`, if any.
    pub max_deviation: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationScan {
    /// Depth of the common table.
    pub depth: usize,
    /// Offset of the first block inside each table word.
    pub offset: usize,
    pub reports: Vec<MixingReport>,
    pub residues: Vec<ResidueSummary>,
}

pub fn residue_summaries(reports: &[MixingReport], moduli: impl IntoIterator<Item = usize>) -> Vec<ResidueSummary> {
    moduli
        .into_iter()
        .map(|modulus| {
            let mut max_deviation = vec![None; modulus];
            for r in reports {
                let slot: &mut Option<f64> = &mut max_deviation[r.gap % modulus];
                *slot = Some(slot.map_or(r.sup_ratio_deviation, |v: f64| v.max(r.sup_ratio_deviation)));
            }
            ResidueSummary {
                modulus,
                max_deviation,
            }
        })
        .collect()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

fn totals(v: Vec<CompensatedSum>) -> Vec<f64> {
    v.into_iter().map(CompensatedSum::value).collect()
}

fn compensated_total(xs: &[f64]) -> f64 {
    let mut t = CompensatedSum::default();
    xs.iter().for_each(|&x| t.add(x));
    t.value()
}

/// Value of the block of `len` symbols starting at `pos` in the word of rank
/// `rank` (0-based rank of the block among words of length `len`).
fn block(rank: u64, depth: usize, pos: usize, len: usize, n: u64) -> usize {
    let tail = n.pow((depth - pos - len) as u32);
    ((rank / tail) % n.pow(len as u32)) as usize
}

/// Correlation ratios from one table of depth `D = max_gap + 4L`, with `i`
/// placed at offset `L` and `j` at offset `L + |i| + gap`; all three masses
/// are marginals of that table.
pub fn correlation_ratio_scan(
    p: &Potential,
    gaps: &[usize],
    window: usize,
    budget: &Budget,
) -> Result<CorrelationScan> {
    if window == 0 {
        return Err(Error::invalid("window must be at least 1"));
    }
    if gaps.is_empty() {
        return Err(Error::invalid("no gaps requested"));
    }
    let max_gap = *gaps.iter().max().expect("nonempty");
    let depth = max_gap + 4 * window;
    let table = gibbs_table(p, depth, budget)?;
    let masses = table.masses();
    let alphabet = table.alphabet;
    let n = alphabet.size() as u64;
    let offset = window;
    let reports = gaps
        .par_iter()
        .map(|&gap| {
            let mut best = (-1.0, 0usize, 0u64, 0usize, 0u64);
            for li in 1..=window {
                for lj in 1..=window {
                    let ni = n.pow(li as u32) as usize;
                    let nj = n.pow(lj as u32) as usize;
                    let pos_j = offset + li + gap;
                    let mut joint = vec![CompensatedSum::default(); ni * nj];
                    let mut mi = vec![CompensatedSum::default(); ni];
                    let mut mj = vec![CompensatedSum::default(); nj];
                    for (r, &m) in masses.iter().enumerate() {
                        let bi = block(r as u64, depth, offset, li, n);
                        let bj = block(r as u64, depth, pos_j, lj, n);
                        joint[bi * nj + bj].add(m);
                        mi[bi].add(m);
                        mj[bj].add(m);
                    }
                    let (joint, mi, mj) = (totals(joint), totals(mi), totals(mj));
                    let total = compensated_total(&mi);
                    for bi in 0..ni {
                        for bj in 0..nj {
                            let dev = (joint[bi * nj + bj] * total / (mi[bi] * mj[bj]) - 1.0).abs();
                            if dev > best.0 {
                                best = (dev, li, bi as u64, lj, bj as u64);
                            }
                        }
                    }
                }
            }
            let (dev, li, bi, lj, bj) = best;
            MixingReport {
                gap,
                window,
                sup_ratio_deviation: dev.max(0.0),
                witness_i: word_from_rank(bi, alphabet, li),
                witness_j: word_from_rank(bj, alphabet, lj),
            }
        })
        .collect::<Vec<_>>();
    let residues = residue_summaries(&reports, 2..=6);
    Ok(CorrelationScan {
        depth,
        offset,
        reports,
        residues,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonIndependence {
    /// Maximum over all past cells `Q` and future cells `P` of
    /// `|μ(P ∩ Q)/μ(Q) − μ(P)|`.
    pub eps_full: f64,
    /// Least `ε` such that discarding past cells of total mass at most `ε`
    /// leaves a maximum deviation of at most `ε`.
    pub eps_trimmed: f64,
    /// Mass discarded to reach `eps_trimmed`.
    pub discarded_mass: f64,
    pub witness_past: Word,
    pub witness_future: Word,
}

/// Independence of the length-`b` future partition from the length-`a` past
/// partition across a gap `g`, computed exactly from the table.
pub fn epsilon_independence(t: &GibbsTable, split: (usize, usize, usize)) -> Result<EpsilonIndependence> {
    let (a, g, b) = split;
    if a + g + b != t.depth {
        return Err(Error::invalid(format!(
            "split {a}+{g}+{b} does not match table depth {}",
            t.depth
        )));
    }
    if a == 0 || b == 0 {
        return Err(Error::invalid("past and future lengths must be at least 1"));
    }
    let n = t.alphabet.size() as u64;
    let na = n.pow(a as u32) as usize;
    let nb = n.pow(b as u32) as usize;
    let mut joint = vec![CompensatedSum::default(); na * nb];
    let mut past = vec![CompensatedSum::default(); na];
    let mut future = vec![CompensatedSum::default(); nb];
    for r in 0..t.len() {
        let m = t.mass(r);
        let q = block(r as u64, t.depth, 0, a, n);
        let p = block(r as u64, t.depth, a + g, b, n);
        joint[q * nb + p].add(m);
        past[q].add(m);
        future[p].add(m);
    }
    let (joint, past, future) = (totals(joint), totals(past), totals(future));
    let total = compensated_total(&past);
    // per past cell: (mass, max deviation, arg future)
    let cells: Vec<(f64, f64, usize)> = (0..na)
        .map(|q| {
            if past[q] <= 0.0 {
                return (0.0, 0.0, 0);
            }
            (0..nb)
                .map(|p| (past[q], (joint[q * nb + p] / past[q] - future[p] / total).abs(), p))
                .fold((past[q], -1.0, 0), |acc, x| if x.1 > acc.1 { x } else { acc })
        })
        .collect();
    let (wq, wp, _) = cells
        .iter()
        .enumerate()
        .fold((0usize, 0usize, -1.0), |acc, (q, c)| if c.1 > acc.2 { (q, c.2, c.1) } else { acc });
    let eps_full = cells.iter().map(|c| c.1).fold(0.0, f64::max);

    let mut order: Vec<usize> = (0..na).collect();
    order.sort_by(|&x, &y| cells[x].0.total_cmp(&cells[y].0).then(x.cmp(&y)));
    // suffix maxima of deviations over the retained (heavier) cells
    let mut suffix = vec![0.0f64; na + 1];
    for k in (0..na).rev() {
        suffix[k] = suffix[k + 1].max(cells[order[k]].1);
    }
    let mut discarded = 0.0f64;
    let mut best = (eps_full, 0.0);
    for k in 0..=na {
        let eps = discarded.max(suffix[k]);
        if eps < best.0 {
            best = (eps, discarded);
        }
        if k < na {
            discarded += cells[order[k]].0;
        }
    }
    Ok(EpsilonIndependence {
        eps_full,
        eps_trimmed: best.0,
        discarded_mass: best.1,
        witness_past: word_from_rank(wq as u64, t.alphabet, a),
        witness_future: word_from_rank(wp as u64, t.alphabet, b),
    })
}

#[derive(Debug, Clone)]
pub struct DiagnosticConfig {
    pub search: SearchConfig,
    /// Target dimension tuples to search; by default every tuple of proper
    /// subspace dimensions, or the full spaces when some factor is 1-dimensional.
    pub target_dims: Option<Vec<Vec<usize>>>,
    /// Gaps for the correlation scan; empty skips the scan.
    pub scan_gaps: Vec<usize>,
    pub scan_window: usize,
    pub budget: Budget,
}

impl Default for DiagnosticConfig {
    fn default() -> Self {
        DiagnosticConfig {
            search: SearchConfig::default(),
            target_dims: None,
            scan_gaps: (1..=6).collect(),
            scan_window: 1,
            budget: Budget::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ErgodicityVerdict {
    NoObstructionFound,
    /// Class `class` (index into the report's classes) has period `period`.
    PeriodObstruction { class: usize, period: usize },
}

#[derive(Debug, Clone)]
pub struct DiagnosticReport {
    pub verdict: ErgodicityVerdict,
    pub classes: Vec<(Vec<usize>, Classification)>,
    pub scan: Option<CorrelationScan>,
    /// Always false: only obstructions can be certified.
    pub search_complete: bool,
}

fn default_targets(dims: &[usize]) -> Vec<Vec<usize>> {
    let ranges: Vec<Vec<usize>> = dims
        .iter()
        .map(|&d| if d == 1 { vec![1] } else { (1..d).collect() })
        .collect();
    let mut out = vec![Vec::new()];
    for r in ranges {
        out = out
            .into_iter()
            .flat_map(|t| {
                r.iter().map(move |&l| {
                    let mut t = t.clone();
                    t.push(l);
                    t
                })
            })
            .collect();
    }
    out
}

/// Searches for finite-orbit classes with period above one, and optionally
/// scans correlation ratios of the generalised potential for residue structure.
/// Never certifies total ergodicity.
pub fn total_ergodicity_diagnostic(sys: &MatrixSystem, config: &DiagnosticConfig) -> Result<DiagnosticReport> {
    let targets = config
        .target_dims
        .clone()
        .unwrap_or_else(|| default_targets(&sys.dims()));
    let mut classes = Vec::new();
    for target in &targets {
        let search = find_finite_orbit_classes(sys, target, &config.search)?;
        for c in &search.classes {
            classes.push((target.clone(), classify(c, sys)?));
        }
    }
    let verdict = classes
        .iter()
        .enumerate()
        .find_map(|(i, (_, c))| match c.period {
            Some(p) if p > 1 => Some(ErgodicityVerdict::PeriodObstruction { class: i, period: p }),
            _ => None,
        })
        .unwrap_or(ErgodicityVerdict::NoObstructionFound);
    let scan = if config.scan_gaps.is_empty() {
        None
    } else {
        Some(correlation_ratio_scan(
            &Potential::generalised(sys.clone()),
            &config.scan_gaps,
            config.scan_window,
            &config.budget,
        )?)
    };
    Ok(DiagnosticReport {
        verdict,
        classes,
        scan,
        search_complete: false,
    })
}

/// Least-squares fit of `target ≈ t·a + (1−t)·b` over cylinder masses.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureFit {
    /// Weight of `a`, clamped to `[0, 1]`.
    pub weight: f64,
    /// Total variation distance from `target` to the fitted mixture.
    pub residual: f64,
}

pub fn mixture_weight(target: &GibbsTable, a: &GibbsTable, b: &GibbsTable) -> Result<MixtureFit> {
    for c in [a, b] {
        if c.alphabet != target.alphabet || c.depth != target.depth {
            return Err(Error::invalid("mixture components must share the target's alphabet and depth"));
        }
    }
    let (x, ma, mb) = (target.masses(), a.masses(), b.masses());
    let mut num = CompensatedSum::default();
    let mut den = CompensatedSum::default();
    for i in 0..x.len() {
        let d = ma[i] - mb[i];
        num.add((x[i] - mb[i]) * d);
        den.add(d * d);
    }
    if den.value() == 0.0 {
        return Err(Error::Precondition("mixture components coincide".into()));
    }
    let weight = (num.value() / den.value()).clamp(0.0, 1.0);
    let residual = 0.5
        * compensated_total(
            &(0..x.len())
                .map(|i| (x[i] - (weight * ma[i] + (1.0 - weight) * mb[i])).abs())
                .collect::<Vec<_>>(),
        );
    Ok(MixtureFit { weight, residual })
}
