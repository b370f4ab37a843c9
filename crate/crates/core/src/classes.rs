//! Subspaces, finite-orbit subspace classes and their combinatorics, plus
//! irreducibility, simultaneous proximality and cyclic splittings.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::multilinear::{
    eigenvalues, increasing_tuples, is_proximal, LinearMap, ProximalityReport, DEFAULT_PROXIMAL_TOL,
};
use crate::potentials::MatrixSystem;
use crate::symbolic::{enumerate_words, Alphabet, Budget, Word};

/// Largest principal angle (radians) under which two subspaces are equal.
pub const SUBSPACE_TOL: f64 = 1e-8;

/// Default cap on orbit sizes.
pub const DEFAULT_ORBIT_CAP: usize = 256;

const PIVOT_TOL: f64 = 1e-9;

/// A nonzero subspace of `ℝ^d`, stored as a canonical orthonormal basis.
///
/// The canonical basis is obtained by orthonormalising the span, reducing it
/// to row echelon form with left-to-right pivots, re-orthonormalising the
/// rows in order, and making the first significant entry of each vector
/// positive. Equal subspaces therefore get (numerically) equal bases.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// The column span of `m`. Fails if the columns are rank-deficient.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 || m.ncols() > m.nrows() {
            return Err(Error::invalid(format!(
                "subspace basis must be d x l with 1 <= l <= d, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("subspace basis has non-finite entries"));
        }
        let q = orthonormalize_columns(&m)
            .ok_or_else(|| Error::invalid("subspace basis vectors are linearly dependent"))?;
        Ok(Subspace {
            basis: canonical_basis(&q),
        })
    }

    pub fn span(vectors: &[DVector<f64>]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::invalid("span of no vectors"));
        }
        Subspace::new(DMatrix::from_columns(vectors))
    }

    /// `span(e_i : i ∈ indices)` with 0-based indices.
    pub fn coordinate(d: usize, indices: &[usize]) -> Result<Self> {
        let mut m = DMatrix::zeros(d, indices.len());
        for (c, &i) in indices.iter().enumerate() {
            if i >= d {
                return Err(Error::invalid(format!("coordinate {i} outside dimension {d}")));
            }
            m[(i, c)] = 1.0;
        }
        Subspace::new(m)
    }

    pub fn full(d: usize) -> Self {
        Subspace {
            basis: DMatrix::identity(d, d),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthonormal `d × ℓ` basis.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Largest principal angle to `other`, or `π/2` if dimensions differ.
    pub fn distance(&self, other: &Subspace) -> f64 {
        if self.dim() != other.dim() || self.ambient_dim() != other.ambient_dim() {
            return std::f64::consts::FRAC_PI_2;
        }
        let proj = &self.basis * (self.basis.transpose() * &other.basis);
        let resid = &other.basis - proj;
        let s = crate::multilinear::top_singular_value(&resid);
        s.min(1.0).asin()
    }

    pub fn approx_eq(&self, other: &Subspace) -> bool {
        self.distance(other) < SUBSPACE_TOL
    }

    /// `A W`.
    pub fn image(&self, a: &LinearMap) -> Subspace {
        Subspace::new(a.matrix() * &self.basis).expect("invertible maps preserve dimension")
    }

    /// The matrix of `A|_W` in the stored basis, for `W` invariant under `A`.
    pub fn restrict(&self, a: &LinearMap) -> LinearMap {
        LinearMap::new(self.basis.transpose() * a.matrix() * &self.basis).expect("square")
    }
}

fn orthonormalize_columns(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let scale = m.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let mut q = DMatrix::zeros(m.nrows(), m.ncols());
    for c in 0..m.ncols() {
        let mut v = m.column(c) / scale;
        let orig = v.norm();
        for _ in 0..2 {
            for p in 0..c {
                let proj = q.column(p).dot(&v);
                v -= q.column(p) * proj;
            }
        }
        let n = v.norm();
        if n <= 1e-10 * orig.max(1e-300) || n < 1e-12 {
            return None;
        }
        q.set_column(c, &(v / n));
    }
    Some(q)
}

fn canonical_basis(q: &DMatrix<f64>) -> DMatrix<f64> {
    let (d, l) = (q.nrows(), q.ncols());
    let mut r = q.transpose();
    let mut row = 0;
    for col in 0..d {
        if row == l {
            break;
        }
        let (best, val) = (row..l)
            .map(|i| (i, r[(i, col)].abs()))
            .fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= PIVOT_TOL {
            continue;
        }
        r.swap_rows(row, best);
        let pivot = r[(row, col)];
        for c in 0..d {
            r[(row, c)] /= pivot;
        }
        r[(row, col)] = 1.0;
        for i in 0..l {
            if i != row {
                let f = r[(i, col)];
                if f != 0.0 {
                    for c in 0..d {
                        r[(i, c)] -= f * r[(row, c)];
                    }
                    r[(i, col)] = 0.0;
                }
            }
        }
        row += 1;
    }
    let mut out = orthonormalize_columns(&r.transpose()).unwrap_or_else(|| q.clone());
    for c in 0..l {
        let mut col = out.column_mut(c);
        if let Some(first) = col.iter().copied().find(|x| x.abs() > 1e-10) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
        for x in col.iter_mut() {
            if *x == 0.0 {
                *x = 0.0;
            }
        }
    }
    out
}

/// One subspace per factor.
pub type SubspaceTuple = Vec<Subspace>;

fn tuple_eq(a: &[Subspace], b: &[Subspace]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.approx_eq(y))
}

fn tuple_image(sys: &MatrixSystem, t: &[Subspace], symbol: u32) -> SubspaceTuple {
    t.iter()
        .zip(sys.factors())
        .map(|(w, f)| w.image(f.generator(symbol)))
        .collect()
}

fn find_tuple(members: &[SubspaceTuple], t: &[Subspace]) -> Option<usize> {
    members.iter().position(|m| tuple_eq(m, t))
}

/// A finite set of subspace tuples together with its single-symbol adjacency
/// matrix under a system.
#[derive(Debug, Clone)]
pub struct SubspaceClass {
    dims: Vec<usize>,
    members: Vec<SubspaceTuple>,
    adjacency: Vec<Vec<bool>>,
    equivariant: bool,
}

impl SubspaceClass {
    /// Builds the class with adjacency computed under `sys`. Duplicate members
    /// are rejected.
    pub fn from_members(sys: &MatrixSystem, members: Vec<SubspaceTuple>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("a subspace class needs at least one member"));
        }
        let dims = sys.dims();
        for (r, m) in members.iter().enumerate() {
            if m.len() != dims.len() || m.iter().zip(&dims).any(|(w, &d)| w.ambient_dim() != d) {
                return Err(Error::invalid(format!(
                    "member {} does not match the system's factor dimensions",
                    r + 1
                )));
            }
            if find_tuple(&members[..r], m).is_some() {
                return Err(Error::invalid(format!("member {} is a duplicate", r + 1)));
            }
        }
        let n = members.len();
        let mut adjacency = vec![vec![false; n]; n];
        let mut equivariant = true;
        for (r, m) in members.iter().enumerate() {
            for s in 1..=sys.alphabet().size() {
                match find_tuple(&members, &tuple_image(sys, m, s)) {
                    Some(c) => adjacency[r][c] = true,
                    None => equivariant = false,
                }
            }
        }
        Ok(SubspaceClass {
            dims,
            members,
            adjacency,
            equivariant,
        })
    }

    /// The one-member class of full spaces.
    pub fn full(sys: &MatrixSystem) -> Self {
        let members = vec![sys.dims().iter().map(|&d| Subspace::full(d)).collect()];
        SubspaceClass::from_members(sys, members).expect("full spaces form a class")
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn members(&self) -> &[SubspaceTuple] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `M[r][c]`: some single symbol maps member `r` onto member `c`.
    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    /// Equivariance under the system the class was built with.
    pub fn equivariant(&self) -> bool {
        self.equivariant
    }

    pub fn is_equivariant_under(&self, sys: &MatrixSystem) -> bool {
        sys.dims() == self.dims
            && self.members.iter().all(|m| {
                (1..=sys.alphabet().size())
                    .all(|s| find_tuple(&self.members, &tuple_image(sys, m, s)).is_some())
            })
    }

    pub fn contains(&self, t: &[Subspace]) -> bool {
        find_tuple(&self.members, t).is_some()
    }

    /// Same member set, in any order.
    pub fn same_members(&self, other: &SubspaceClass) -> bool {
        self.len() == other.len() && self.members.iter().all(|m| other.contains(m))
    }

    /// The same members with adjacency recomputed under another system.
    pub fn under(&self, sys: &MatrixSystem) -> Result<SubspaceClass> {
        SubspaceClass::from_members(sys, self.members.clone())
    }

    /// Index of a member fixed by `A_w`, if any.
    pub fn fixed_member(&self, sys: &MatrixSystem, w: &Word) -> Option<usize> {
        self.members.iter().position(|m| {
            m.iter()
                .zip(sys.factors())
                .all(|(s, f)| s.image(&f.product(w.symbols())).approx_eq(s))
        })
    }
}

/// Result of an orbit closure.
#[derive(Debug, Clone)]
pub enum OrbitResult {
    Closed(SubspaceClass),
    /// The closure grew past the cap; `explored` tuples were found.
    Overflow { explored: usize, cap: usize },
    /// The closure stopped only because distinct subspaces fell within
    /// tolerance of each other (some symbol failed to act injectively), as
    /// happens when an infinite orbit converges to an attracting subspace.
    Collapsed { explored: usize },
}

impl OrbitResult {
    pub fn class(&self) -> Option<&SubspaceClass> {
        match self {
            OrbitResult::Closed(c) => Some(c),
            OrbitResult::Overflow { .. } | OrbitResult::Collapsed { .. } => None,
        }
    }
}

/// Breadth-first closure of `seed` under the symbol maps.
pub fn orbit_of(seed: &[Subspace], sys: &MatrixSystem, cap: usize) -> Result<OrbitResult> {
    let dims = sys.dims();
    if seed.len() != dims.len() || seed.iter().zip(&dims).any(|(w, &d)| w.ambient_dim() != d) {
        return Err(Error::invalid("seed dimensions do not match the system"));
    }
    Ok(match orbit_members(seed, sys, cap) {
        Ok(members) => OrbitResult::Closed(SubspaceClass::from_members(sys, members)?),
        Err(OrbitFailure::Overflow(explored)) => OrbitResult::Overflow { explored, cap },
        Err(OrbitFailure::Collapsed(explored)) => OrbitResult::Collapsed { explored },
    })
}

enum OrbitFailure {
    Overflow(usize),
    Collapsed(usize),
}

fn orbit_members(
    seed: &[Subspace],
    sys: &MatrixSystem,
    cap: usize,
) -> std::result::Result<Vec<SubspaceTuple>, OrbitFailure> {
    let n_sym = sys.alphabet().size() as usize;
    let mut members: Vec<SubspaceTuple> = vec![seed.to_vec()];
    let mut targets: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(r) = queue.pop_front() {
        let mut row = Vec::with_capacity(n_sym);
        for s in 1..=n_sym as u32 {
            let img = tuple_image(sys, &members[r], s);
            let c = match find_tuple(&members, &img) {
                Some(c) => c,
                None => {
                    if members.len() >= cap {
                        return Err(OrbitFailure::Overflow(members.len()));
                    }
                    members.push(img);
                    queue.push_back(members.len() - 1);
                    members.len() - 1
                }
            };
            row.push(c);
        }
        if targets.len() <= r {
            targets.resize(r + 1, Vec::new());
        }
        targets[r] = row;
    }
    for s in 0..n_sym {
        let mut hit = vec![false; members.len()];
        for row in &targets {
            if std::mem::replace(&mut hit[row[s]], true) {
                return Err(OrbitFailure::Collapsed(members.len()));
            }
        }
    }
    Ok(members)
}

/// Seed generation for [`find_finite_orbit_classes`].
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub cap: usize,
    /// Eigenspaces of all products up to this length are tried as seeds.
    pub product_len: usize,
    pub extra_seeds: Vec<SubspaceTuple>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            cap: DEFAULT_ORBIT_CAP,
            product_len: 2,
            extra_seeds: Vec::new(),
        }
    }
}

/// Transitive finite-orbit classes found from heuristic seeds.
#[derive(Debug, Clone)]
pub struct OrbitSearch {
    pub classes: Vec<SubspaceClass>,
    /// Per-factor candidate subspaces examined.
    pub candidates: usize,
    /// Candidates whose single-factor orbit is finite.
    pub finite_candidates: usize,
    pub seeds_tried: usize,
    pub seeds_overflowed: usize,
    /// Always false: seeds cannot cover every finite orbit.
    pub complete: bool,
}

impl OrbitSearch {
    /// The union of all found classes, when any.
    pub fn union(&self, sys: &MatrixSystem) -> Option<SubspaceClass> {
        let mut members: Vec<SubspaceTuple> = Vec::new();
        for c in &self.classes {
            for m in c.members() {
                if find_tuple(&members, m).is_none() {
                    members.push(m.clone());
                }
            }
        }
        (!members.is_empty()).then(|| SubspaceClass::from_members(sys, members).expect("valid"))
    }
}

/// Real eigenvectors of `a`, one basis of each real eigenspace.
fn real_eigenvectors(a: &LinearMap) -> Vec<DVector<f64>> {
    let Ok(eig) = eigenvalues(a) else {
        return Vec::new();
    };
    let d = a.dim();
    let scale = a.norm();
    let mut out: Vec<DVector<f64>> = Vec::new();
    let mut seen: Vec<f64> = Vec::new();
    for z in eig {
        if z.im.abs() > 1e-12 * scale {
            continue;
        }
        if seen.iter().any(|&l| (l - z.re).abs() <= 1e-12 * scale) {
            continue;
        }
        seen.push(z.re);
        let shifted = a.matrix() - DMatrix::identity(d, d) * z.re;
        let svd = shifted.svd(false, true);
        let Some(vt) = svd.v_t else { continue };
        for (i, &sv) in svd.singular_values.iter().enumerate() {
            if sv <= 1e-9 * scale.max(1.0) {
                out.push(vt.row(i).transpose());
            }
        }
    }
    out
}

fn push_unique(list: &mut Vec<Subspace>, s: Subspace) {
    if !list.iter().any(|t| t.approx_eq(&s)) {
        list.push(s);
    }
}

/// Candidate `ℓ`-dimensional subspaces of one factor.
fn factor_candidates(
    gens: &[LinearMap],
    alphabet: Alphabet,
    ell: usize,
    product_len: usize,
) -> Vec<Subspace> {
    let d = gens[0].dim();
    let mut out = Vec::new();
    for idx in increasing_tuples(d, ell) {
        push_unique(&mut out, Subspace::coordinate(d, &idx).expect("in range"));
    }
    let budget = Budget::default();
    for len in 1..=product_len {
        let Ok(words) = enumerate_words(alphabet, len, &budget) else {
            break;
        };
        for w in words {
            let mut m = DMatrix::identity(d, d);
            for &s in w.symbols() {
                m = &m * gens[s as usize - 1].matrix();
            }
            let vecs = real_eigenvectors(&LinearMap::new(m).expect("square"));
            if vecs.len() < ell {
                continue;
            }
            for idx in increasing_tuples(vecs.len(), ell) {
                let cols: Vec<DVector<f64>> = idx.iter().map(|&i| vecs[i].clone()).collect();
                if let Ok(s) = Subspace::span(&cols) {
                    push_unique(&mut out, s);
                }
            }
        }
    }
    out
}

/// Searches for finite orbits of `ℓ_j`-dimensional subspace tuples, seeded by
/// coordinate subspaces, real eigenspaces of products up to
/// `config.product_len`, and `config.extra_seeds`. Each returned class is a
/// single orbit, hence transitive; completeness is never guaranteed.
pub fn find_finite_orbit_classes(
    sys: &MatrixSystem,
    target_dims: &[usize],
    config: &SearchConfig,
) -> Result<OrbitSearch> {
    let dims = sys.dims();
    if target_dims.len() != dims.len() {
        return Err(Error::invalid("one target dimension per factor required"));
    }
    for (j, (&l, &d)) in target_dims.iter().zip(&dims).enumerate() {
        if l == 0 || l > d {
            return Err(Error::invalid(format!(
                "target dimension {l} for factor {} outside 1..={d}",
                j + 1
            )));
        }
    }
    // A tuple orbit is finite iff each factor's orbit is, so screen per factor.
    let mut candidates = 0;
    let per_factor: Vec<Vec<Subspace>> = sys
        .factors()
        .iter()
        .zip(target_dims)
        .enumerate()
        .map(|(j, (f, &l))| {
            let single = MatrixSystem::single(f.generators().to_vec(), 1.0).expect("valid");
            let mut cands = factor_candidates(f.generators(), sys.alphabet(), l, config.product_len);
            for extra in &config.extra_seeds {
                if let Some(s) = extra.get(j) {
                    if s.dim() == l {
                        push_unique(&mut cands, s.clone());
                    }
                }
            }
            candidates += cands.len();
            cands
                .into_par_iter()
                .filter(|s| orbit_members(std::slice::from_ref(s), &single, config.cap).is_ok())
                .collect()
        })
        .collect();
    let finite_candidates = per_factor.iter().map(Vec::len).sum();

    let mut seeds: Vec<SubspaceTuple> = vec![Vec::new()];
    for cands in &per_factor {
        seeds = seeds
            .into_iter()
            .flat_map(|t| {
                cands.iter().map(move |s| {
                    let mut t = t.clone();
                    t.push(s.clone());
                    t
                })
            })
            .collect();
    }
    for extra in &config.extra_seeds {
        if extra.len() == dims.len()
            && extra.iter().zip(target_dims).all(|(s, &l)| s.dim() == l)
            && find_tuple(&seeds, extra).is_none()
        {
            seeds.push(extra.clone());
        }
    }

    let mut classes: Vec<SubspaceClass> = Vec::new();
    let mut overflowed = 0;
    let tried = seeds.len();
    for seed in seeds {
        if classes.iter().any(|c| c.contains(&seed)) {
            continue;
        }
        match orbit_members(&seed, sys, config.cap) {
            Ok(members) => classes.push(SubspaceClass::from_members(sys, members)?),
            Err(_) => overflowed += 1,
        }
    }
    Ok(OrbitSearch {
        classes,
        candidates,
        finite_candidates,
        seeds_tried: tried,
        seeds_overflowed: overflowed,
        complete: false,
    })
}

/// Reachability closure of a boolean adjacency matrix (including `r → r`).
fn reachability(adj: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = adj.len();
    (0..n)
        .map(|r| {
            let mut seen = vec![false; n];
            seen[r] = true;
            let mut stack = vec![r];
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    if adj[u][v] && !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            seen
        })
        .collect()
}

/// Splits an equivariant class into its transitive parts (the strongly
/// connected components of `M`, which are all closed since every symbol
/// permutes the members).
pub fn decompose_equivariant(class: &SubspaceClass, sys: &MatrixSystem) -> Result<Vec<SubspaceClass>> {
    let c = class.under(sys)?;
    if !c.equivariant {
        return Err(Error::Precondition("class is not equivariant for the system".into()));
    }
    let reach = reachability(&c.adjacency);
    let n = c.len();
    let mut assigned = vec![false; n];
    let mut parts = Vec::new();
    for r in 0..n {
        if assigned[r] {
            continue;
        }
        let comp: Vec<usize> = (0..n).filter(|&v| reach[r][v] && reach[v][r]).collect();
        for &v in &comp {
            assigned[v] = true;
        }
        let members = comp.iter().map(|&v| c.members[v].clone()).collect();
        parts.push(SubspaceClass::from_members(sys, members)?);
    }
    Ok(parts)
}

/// Combinatorial type of an equivariant class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub size: usize,
    pub transitive: bool,
    /// Index of imprimitivity, when transitive.
    pub period: Option<usize>,
    pub primitive: bool,
    /// Least `t` with `M^t > 0`, when primitive.
    pub exponent: Option<usize>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn bool_mul(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = a.len();
    (0..n)
        .map(|r| (0..n).map(|c| (0..n).any(|k| a[r][k] && b[k][c])).collect())
        .collect()
}

/// Least `t ≤ (n−1)² + 1` with `M^t` strictly positive.
pub fn primitivity_exponent(adj: &[Vec<bool>]) -> Option<usize> {
    let n = adj.len();
    let bound = (n.saturating_sub(1)).pow(2) + 1;
    let mut p = adj.to_vec();
    for t in 1..=bound {
        if p.iter().all(|row| row.iter().all(|&x| x)) {
            return Some(t);
        }
        p = bool_mul(&p, adj);
    }
    None
}

/// Period of an irreducible adjacency matrix: the gcd of
/// `level(u) + 1 − level(v)` over edges, with BFS levels from member 0.
pub fn period_of(adj: &[Vec<bool>]) -> usize {
    let n = adj.len();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if adj[u][v] && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0;
    for u in 0..n {
        for v in 0..n {
            if adj[u][v] && level[u] != usize::MAX && level[v] != usize::MAX {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    g
}

pub fn classify(class: &SubspaceClass, sys: &MatrixSystem) -> Result<Classification> {
    let c = class.under(sys)?;
    if !c.equivariant {
        return Err(Error::Precondition("class is not equivariant for the system".into()));
    }
    let reach = reachability(&c.adjacency);
    let transitive = reach.iter().all(|row| row.iter().all(|&x| x));
    let period = transitive.then(|| period_of(&c.adjacency));
    let exponent = if transitive { primitivity_exponent(&c.adjacency) } else { None };
    let primitive = period == Some(1);
    debug_assert_eq!(primitive, exponent.is_some());
    Ok(Classification {
        size: c.len(),
        transitive,
        period,
        primitive,
        exponent,
    })
}

/// Three-way irreducibility verdict over `ℝ`.
#[derive(Debug, Clone)]
pub enum IrreducibilityVerdict {
    /// The generated algebra is all of `M_d(ℝ)`.
    IrreducibleCertified,
    /// A nonzero proper subspace invariant under every generator.
    ReducibleWitness(Subspace),
    Undetermined { algebra_dim: usize },
}

impl IrreducibilityVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            IrreducibilityVerdict::IrreducibleCertified => "irreducible-certified",
            IrreducibilityVerdict::ReducibleWitness(_) => "reducible-witness",
            IrreducibilityVerdict::Undetermined { .. } => "undetermined",
        }
    }
}

/// Orthonormal basis (as flattened `d²` vectors) of the unital algebra
/// generated by `gens`.
fn algebra_basis(gens: &[LinearMap]) -> Vec<DMatrix<f64>> {
    let d = gens[0].dim();
    let mut basis: Vec<DMatrix<f64>> = Vec::new();
    let mut frontier: Vec<DMatrix<f64>> = Vec::new();
    let add = |m: DMatrix<f64>, basis: &mut Vec<DMatrix<f64>>| -> Option<DMatrix<f64>> {
        let scale = m.norm();
        if scale == 0.0 {
            return None;
        }
        let mut v = m / scale;
        for _ in 0..2 {
            for b in basis.iter() {
                let p = b.dot(&v);
                v -= b * p;
            }
        }
        let n = v.norm();
        if n < 1e-9 {
            return None;
        }
        let v = v / n;
        basis.push(v.clone());
        Some(v)
    };
    if let Some(v) = add(DMatrix::identity(d, d), &mut basis) {
        frontier.push(v);
    }
    while !frontier.is_empty() && basis.len() < d * d {
        let mut next = Vec::new();
        for f in &frontier {
            for g in gens {
                if let Some(v) = add(f * g.matrix(), &mut basis) {
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    basis
}

fn cyclic_subspace(algebra: &[DMatrix<f64>], v: &DVector<f64>) -> Option<Subspace> {
    let d = v.len();
    let cols: Vec<DVector<f64>> = algebra.iter().map(|m| m * v).collect();
    let stacked = DMatrix::from_columns(&cols);
    let svd = stacked.svd(true, false);
    let u = svd.u?;
    let top = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-9 * top.max(1e-300))
        .count();
    if rank == 0 || rank >= d {
        return None;
    }
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let cols: Vec<DVector<f64>> = order[..rank].iter().map(|&i| u.column(i).into_owned()).collect();
    Subspace::span(&cols).ok()
}

fn orthogonal_complement(s: &Subspace) -> Option<Subspace> {
    let d = s.ambient_dim();
    if s.dim() >= d {
        return None;
    }
    let proj = DMatrix::identity(d, d) - s.basis() * s.basis().transpose();
    let svd = proj.svd(true, false);
    let u = svd.u?;
    let cols: Vec<DVector<f64>> = (0..d)
        .filter(|&i| svd.singular_values[i] > 0.5)
        .map(|i| u.column(i).into_owned())
        .collect();
    Subspace::span(&cols).ok()
}

fn is_invariant(s: &Subspace, gens: &[LinearMap]) -> bool {
    gens.iter().all(|g| s.image(g).approx_eq(s))
}

/// Certifies irreducibility by the full-algebra test, or finds an invariant
/// subspace among cyclic subspaces `𝒜v` and duals `(𝒜ᵀu)^⊥` for coordinate
/// vectors and real eigenvectors of products up to `product_len`.
pub fn is_irreducible(gens: &[LinearMap], product_len: usize) -> Result<IrreducibilityVerdict> {
    let d = gens
        .first()
        .ok_or_else(|| Error::invalid("no generators"))?
        .dim();
    if gens.iter().any(|g| g.dim() != d) {
        return Err(Error::invalid("generators must share a dimension"));
    }
    if d == 1 {
        return Ok(IrreducibilityVerdict::IrreducibleCertified);
    }
    let algebra = algebra_basis(gens);
    if algebra.len() == d * d {
        return Ok(IrreducibilityVerdict::IrreducibleCertified);
    }
    let dual_algebra: Vec<DMatrix<f64>> = algebra.iter().map(|m| m.transpose()).collect();
    let alphabet = Alphabet::new(gens.len().max(2) as u32)?;
    let mut candidates: Vec<DVector<f64>> = (0..d)
        .map(|i| DVector::from_fn(d, |r, _| if r == i { 1.0 } else { 0.0 }))
        .collect();
    let padded: Vec<LinearMap> = if gens.len() >= 2 {
        gens.to_vec()
    } else {
        vec![gens[0].clone(), gens[0].clone()]
    };
    let padded_t: Vec<LinearMap> = padded.iter().map(|g| g.transpose()).collect();
    for set in [&padded, &padded_t] {
        for len in 1..=product_len.max(1) {
            for w in enumerate_words(alphabet, len, &Budget::default())? {
                let mut m = DMatrix::identity(d, d);
                for &s in w.symbols() {
                    m = &m * set[s as usize - 1].matrix();
                }
                candidates.extend(real_eigenvectors(&LinearMap::new(m).expect("square")));
            }
        }
    }
    for v in &candidates {
        if let Some(s) = cyclic_subspace(&algebra, v) {
            if is_invariant(&s, gens) {
                return Ok(IrreducibilityVerdict::ReducibleWitness(s));
            }
        }
        if let Some(s) = cyclic_subspace(&dual_algebra, v).and_then(|s| orthogonal_complement(&s)) {
            if is_invariant(&s, gens) {
                return Ok(IrreducibilityVerdict::ReducibleWitness(s));
            }
        }
    }
    Ok(IrreducibilityVerdict::Undetermined {
        algebra_dim: algebra.len(),
    })
}

/// Outcome of [`find_simultaneous_proximal_word`].
#[derive(Debug, Clone)]
pub struct ProximalWordSearch {
    pub word: Option<Word>,
    /// Per-factor reports for the word, re-certified by eigen-decomposition.
    pub reports: Vec<ProximalityReport>,
    /// Index of the class member fixed by the word, when a class was given.
    pub fixed_member: Option<usize>,
    pub max_len: usize,
    pub words_checked: u64,
}

/// First word in shortlex order (length, then lexicographic) with
/// `|w| ≤ max_len` such that every `A_w^(j)` is proximal. With a class, the
/// word must fix a member and proximality is tested on the restrictions.
pub fn find_simultaneous_proximal_word(
    sys: &MatrixSystem,
    class: Option<&SubspaceClass>,
    max_len: usize,
    budget: &Budget,
) -> Result<ProximalWordSearch> {
    if max_len == 0 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    let mut checked = 0;
    for len in 1..=max_len {
        for w in enumerate_words(sys.alphabet(), len, budget)? {
            checked += 1;
            let prods: Vec<LinearMap> = sys.factors().iter().map(|f| f.product(w.symbols())).collect();
            let (maps, fixed) = match class {
                None => (prods, None),
                Some(c) => {
                    let Some(r) = c.fixed_member(sys, &w) else { continue };
                    let maps = c.members()[r]
                        .iter()
                        .zip(&prods)
                        .map(|(s, a)| s.restrict(a))
                        .collect();
                    (maps, Some(r))
                }
            };
            let mut reports = Vec::with_capacity(maps.len());
            let mut ok = true;
            for a in &maps {
                let r = is_proximal(a, DEFAULT_PROXIMAL_TOL)?;
                if !r.proximal() {
                    ok = false;
                    break;
                }
                reports.push(r);
            }
            if ok {
                return Ok(ProximalWordSearch {
                    word: Some(w),
                    reports,
                    fixed_member: fixed,
                    max_len,
                    words_checked: checked,
                });
            }
        }
    }
    Ok(ProximalWordSearch {
        word: None,
        reports: Vec::new(),
        fixed_member: None,
        max_len,
        words_checked: checked,
    })
}

/// `ℝ^d = U_1 ⊕ ⋯ ⊕ U_m` with every generator mapping `U_j` onto `U_{j+1 mod m}`.
#[derive(Debug, Clone)]
pub struct CyclicSplitting {
    pub parts: Vec<Subspace>,
}

impl CyclicSplitting {
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

pub fn detect_cyclic_splitting(
    gens: &[LinearMap],
    max_parts: usize,
    config: &SearchConfig,
) -> Result<Option<CyclicSplitting>> {
    if max_parts < 2 {
        return Err(Error::invalid("max_parts must be at least 2"));
    }
    let padded: Vec<LinearMap> = if gens.len() >= 2 {
        gens.to_vec()
    } else {
        vec![gens[0].clone(), gens[0].clone()]
    };
    let sys = MatrixSystem::single(padded, 1.0)?;
    let d = sys.dims()[0];
    for m in 2..=max_parts.min(d) {
        if d % m != 0 {
            continue;
        }
        let search = find_finite_orbit_classes(&sys, &[d / m], config)?;
        for class in &search.classes {
            if class.len() != m {
                continue;
            }
            if let Some(split) = as_cyclic_splitting(class, &sys) {
                return Ok(Some(split));
            }
        }
    }
    Ok(None)
}

fn as_cyclic_splitting(class: &SubspaceClass, sys: &MatrixSystem) -> Option<CyclicSplitting> {
    let m = class.len();
    let spaces: Vec<&Subspace> = class.members().iter().map(|t| &t[0]).collect();
    let d = spaces[0].ambient_dim();
    let stacked = DMatrix::from_columns(
        &spaces
            .iter()
            .flat_map(|s| s.basis().column_iter().map(|c| c.into_owned()))
            .collect::<Vec<_>>(),
    );
    if stacked.ncols() != d || stacked.determinant().abs() < 1e-8 {
        return None;
    }
    let next_of = |gen: &LinearMap, r: usize| -> Option<usize> {
        let img = spaces[r].image(gen);
        spaces.iter().position(|s| s.approx_eq(&img))
    };
    let first = sys.factor(0).generator(1);
    let mut order = vec![0usize];
    while order.len() < m {
        let nxt = next_of(first, *order.last().expect("nonempty"))?;
        if order.contains(&nxt) {
            return None;
        }
        order.push(nxt);
    }
    for g in sys.factor(0).generators() {
        for k in 0..m {
            if next_of(g, order[k])? != order[(k + 1) % m] {
                return None;
            }
        }
    }
    Some(CyclicSplitting {
        parts: order.iter().map(|&r| spaces[r].clone()).collect(),
    })
}
