//! Small dense linear algebra: singular values, spectra, exterior and tensor
//! powers, and proximality.
//!
//! Dimensions here are tiny (at most 8 in practice), so the routines favour
//! accuracy and determinism over asymptotic speed. Singular values come from
//! one-sided Jacobi rotations, which diagonalise `AᵀA` implicitly without
//! squaring the condition number. General eigenvalues come from a real Schur
//! decomposition.

use std::fmt;

use nalgebra::{Complex, DMatrix, DVector, Schur};

use crate::error::{Error, Result};

/// Default relative tolerance on `|λ₁| / |λ₂|` for proximality.
pub const DEFAULT_PROXIMAL_TOL: f64 = 1e-8;

/// Moduli ratios at or below `1 + EQUAL_MODULUS_SLACK` count as equal moduli.
const EQUAL_MODULUS_SLACK: f64 = 1e-12;

/// Residual target for leading eigenvectors.
const EIGENVECTOR_RESIDUAL: f64 = 1e-10;

/// A square real matrix acting on `ℝ^d`.
#[derive(Clone, PartialEq)]
pub struct LinearMap(DMatrix<f64>);

impl fmt::Debug for LinearMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("LinearMap[")?;
        for r in 0..self.dim() {
            if r > 0 {
                f.write_str("; ")?;
            }
            for c in 0..self.dim() {
                if c > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{}", self.0[(r, c)])?;
            }
        }
        f.write_str("]")
    }
}

impl LinearMap {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::invalid(format!(
                "linear maps must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(LinearMap(m))
    }

    /// Builds a map from row slices. Panics on ragged or empty input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let d = rows.len();
        assert!(d > 0 && rows.iter().all(|r| r.len() == d), "square rows required");
        LinearMap(DMatrix::from_fn(d, d, |r, c| rows[r][c]))
    }

    pub fn from_row_major(d: usize, entries: &[f64]) -> Result<Self> {
        if d == 0 || entries.len() != d * d {
            return Err(Error::invalid(format!(
                "expected {} entries for a {d}x{d} map, got {}",
                d * d,
                entries.len()
            )));
        }
        Ok(LinearMap(DMatrix::from_row_slice(d, d, entries)))
    }

    pub fn identity(d: usize) -> Self {
        LinearMap(DMatrix::identity(d, d))
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        LinearMap(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    pub fn scaled_identity(d: usize, c: f64) -> Self {
        LinearMap(DMatrix::identity(d, d) * c)
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        LinearMap::from_rows(&[&[c, -s], &[s, c]])
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn row_major(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d * d).map(|k| self.0[(k / d, k % d)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn compose(&self, rhs: &LinearMap) -> Result<LinearMap> {
        if self.dim() != rhs.dim() {
            return Err(Error::invalid("dimension mismatch in composition"));
        }
        Ok(LinearMap(&self.0 * &rhs.0))
    }

    pub fn scale(&self, c: f64) -> LinearMap {
        LinearMap(&self.0 * c)
    }

    pub fn transpose(&self) -> LinearMap {
        LinearMap(self.0.transpose())
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn inverse(&self) -> Option<LinearMap> {
        self.0.clone().try_inverse().map(LinearMap)
    }

    /// Euclidean operator norm `σ₁(A)`.
    pub fn norm(&self) -> f64 {
        top_singular_value(&self.0)
    }

    /// `|det A|` exceeds `tol_scale · ‖A‖^d`, the generator invertibility test.
    pub fn is_invertible(&self, tol_scale: f64) -> bool {
        let d = self.dim() as i32;
        let scale = self.norm().powi(d);
        scale > 0.0 && self.determinant().abs() > tol_scale * scale
    }
}

/// Default relative invertibility tolerance for generators.
pub const INVERTIBILITY_TOL: f64 = 1e-12;

/// Singular values of `A`, non-increasing.
pub fn singular_values(a: &LinearMap) -> Result<Vec<f64>> {
    if !a.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    Ok(singular_values_of(&a.0))
}

/// Singular values of an arbitrary (possibly rectangular) matrix, returning
/// `min(rows, cols)` values in non-increasing order.
pub fn singular_values_of(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 2 && m.ncols() == 2 {
        let (s1, s2) = singular_values_2x2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        return vec![s1, s2];
    }
    if m.ncols() == 1 || m.nrows() == 1 {
        return vec![m.norm()];
    }
    if m.ncols() > m.nrows() {
        return jacobi_singular_values(m.transpose());
    }
    jacobi_singular_values(m.clone())
}

/// Largest singular value; cheaper than the full list for vectors and 2x2.
pub fn top_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 1 || m.nrows() == 1 {
        return m.norm();
    }
    if m.nrows() == 2 && m.ncols() == 2 {
        return singular_values_2x2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]).0;
    }
    singular_values_of(m)[0]
}

fn singular_values_2x2(a: f64, b: f64, c: f64, d: f64) -> (f64, f64) {
    let e = 0.5 * (a + d);
    let f = 0.5 * (a - d);
    let g = 0.5 * (c + b);
    let h = 0.5 * (c - b);
    let q = e.hypot(h);
    let r = f.hypot(g);
    let s1 = q + r;
    let det = (a * d - b * c).abs();
    let s2 = if s1 > 0.0 { det / s1 } else { 0.0 };
    (s1, s2.min(s1))
}

/// One-sided Jacobi on the columns of a tall matrix.
fn jacobi_singular_values(mut u: DMatrix<f64>) -> Vec<f64> {
    let cols = u.ncols();
    let rows = u.nrows();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for r in 0..rows {
                    let x = u[(r, p)];
                    let y = u[(r, q)];
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for r in 0..rows {
                    let x = u[(r, p)];
                    let y = u[(r, q)];
                    u[(r, p)] = cs * x - sn * y;
                    u[(r, q)] = sn * x + cs * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..cols).map(|c| u.column(c).norm()).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Eigenvalues sorted by non-increasing modulus.
pub fn eigenvalues(a: &LinearMap) -> Result<Vec<Complex<f64>>> {
    if !a.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let m = &a.0;
    let mut vals = match a.dim() {
        1 => vec![Complex::new(m[(0, 0)], 0.0)],
        2 => eigenvalues_2x2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]).to_vec(),
        _ => {
            let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000).ok_or_else(|| {
                Error::NumericalFailure {
                    what: "real Schur decomposition did not converge".into(),
                    residual: f64::NAN,
                }
            })?;
            schur.complex_eigenvalues().iter().copied().collect()
        }
    };
    vals.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
    Ok(vals)
}

fn eigenvalues_2x2(a: f64, b: f64, c: f64, d: f64) -> [Complex<f64>; 2] {
    let half_tr = 0.5 * (a + d);
    let det = a * d - b * c;
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        let root = disc.sqrt();
        // avoid cancellation: compute the larger root, then det / larger
        let big = if half_tr >= 0.0 { half_tr + root } else { half_tr - root };
        let small = if big != 0.0 { det / big } else { half_tr - root };
        [Complex::new(big, 0.0), Complex::new(small, 0.0)]
    } else {
        let im = (-disc).sqrt();
        [Complex::new(half_tr, im), Complex::new(half_tr, -im)]
    }
}

/// Largest eigenvalue modulus. Falls back to Gelfand's formula if the Schur
/// iteration fails to converge.
pub fn spectral_radius(a: &LinearMap) -> f64 {
    match eigenvalues(a) {
        Ok(v) => v[0].norm(),
        Err(_) => gelfand_radius(a),
    }
}

/// `‖A^{2^t}‖^{2^{-t}}` with renormalisation, iterated until successive
/// estimates differ by less than 1e-10.
fn gelfand_radius(a: &LinearMap) -> f64 {
    let mut m = a.0.clone();
    let mut log_scale = 0.0;
    let mut prev = f64::INFINITY;
    for t in 0..60 {
        let n = top_singular_value(&m);
        if n == 0.0 {
            return 0.0;
        }
        let est = ((n.ln() + log_scale) / 2f64.powi(t)).exp();
        if (est - prev).abs() < 1e-10 {
            return est;
        }
        prev = est;
        m /= n;
        log_scale += n.ln();
        m = &m * &m;
        log_scale *= 2.0;
    }
    prev
}

/// Strictly increasing `k`-subsets of `0..d` in lexicographic order; this is
/// the basis order for exterior powers.
pub fn increasing_tuples(d: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            if d - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, d, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, d, k, &mut Vec::with_capacity(k), &mut out);
    out
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// The `k`-th exterior power. Entry `(I, J)` is the minor of `A` on rows `I`
/// and columns `J`, with index tuples in lexicographic order.
pub fn exterior_power(a: &LinearMap, k: usize) -> Result<LinearMap> {
    let d = a.dim();
    if k == 0 || k > d {
        return Err(Error::invalid(format!("exterior power {k} out of range 1..={d}")));
    }
    if k == 1 {
        return Ok(a.clone());
    }
    let tuples = increasing_tuples(d, k);
    let n = tuples.len();
    let mut out = DMatrix::zeros(n, n);
    let mut minor = DMatrix::zeros(k, k);
    for (r, rows) in tuples.iter().enumerate() {
        for (c, cols) in tuples.iter().enumerate() {
            for (i, &ri) in rows.iter().enumerate() {
                for (j, &cj) in cols.iter().enumerate() {
                    minor[(i, j)] = a.0[(ri, cj)];
                }
            }
            out[(r, c)] = minor.determinant();
        }
    }
    Ok(LinearMap(out))
}

/// Kronecker product `A₁ ⊗ A₂ ⊗ ⋯` in the basis `e_{j1} ⊗ e_{j2} ⊗ ⋯`.
pub fn tensor_product(maps: &[LinearMap]) -> Result<LinearMap> {
    let (first, rest) = maps
        .split_first()
        .ok_or_else(|| Error::invalid("tensor product of an empty list"))?;
    let m = rest.iter().fold(first.0.clone(), |acc, b| acc.kronecker(&b.0));
    Ok(LinearMap(m))
}

/// How a proximality verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certificate {
    /// `ρ(A)² > σ₁σ₂`, which forces proximality via Gelfand's formula.
    SpectralGap,
    EigenDecomposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proximality {
    Proximal,
    NotProximal,
    /// `|λ₁|/|λ₂|` fell inside `(1, 1 + tol]`.
    Undetermined,
}

#[derive(Debug, Clone)]
pub struct ProximalityReport {
    pub status: Proximality,
    pub leading_modulus: f64,
    /// `ρ(A)² / (σ₁σ₂)`; infinite in dimension 1.
    pub gap_ratio: f64,
    /// `|λ₁| / |λ₂|`; infinite in dimension 1.
    pub modulus_ratio: f64,
    pub leading_vector: Option<DVector<f64>>,
    pub certified_by: Certificate,
}

impl ProximalityReport {
    pub fn proximal(&self) -> bool {
        self.status == Proximality::Proximal
    }
}

/// Decides proximality from the eigenvalue moduli with relative margin `tol`.
pub fn is_proximal(a: &LinearMap, tol: f64) -> Result<ProximalityReport> {
    if !a.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let d = a.dim();
    if d == 1 {
        return Ok(ProximalityReport {
            status: Proximality::Proximal,
            leading_modulus: a.0[(0, 0)].abs(),
            gap_ratio: f64::INFINITY,
            modulus_ratio: f64::INFINITY,
            leading_vector: Some(DVector::from_element(1, 1.0)),
            certified_by: Certificate::SpectralGap,
        });
    }
    let sv = singular_values_of(&a.0);
    let eig = eigenvalues(a)?;
    let rho = eig[0].norm();
    let gap_ratio = rho * rho / (sv[0] * sv[1]);
    let modulus_ratio = if eig[1].norm() > 0.0 {
        rho / eig[1].norm()
    } else if rho > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    let gelfand = gap_ratio > 1.0 + tol && sv[0] * sv[1] > 0.0;
    let status = if gelfand || modulus_ratio > 1.0 + tol {
        Proximality::Proximal
    } else if modulus_ratio <= 1.0 + EQUAL_MODULUS_SLACK || eig[0].im != 0.0 {
        Proximality::NotProximal
    } else {
        Proximality::Undetermined
    };
    let leading_vector = if status == Proximality::Proximal {
        Some(leading_eigenvector(&a.0, eig[0].re)?)
    } else {
        None
    };
    Ok(ProximalityReport {
        status,
        leading_modulus: rho,
        gap_ratio,
        modulus_ratio,
        leading_vector,
        certified_by: if gelfand {
            Certificate::SpectralGap
        } else {
            Certificate::EigenDecomposition
        },
    })
}

/// Unit eigenvector for the real eigenvalue `lambda`, by shifted inverse
/// iteration from a power-iteration start.
fn leading_eigenvector(m: &DMatrix<f64>, lambda: f64) -> Result<DVector<f64>> {
    let d = m.nrows();
    let scale = top_singular_value(m).max(f64::MIN_POSITIVE);
    let mut v = DVector::from_fn(d, |i, _| 1.0 + 0.1 * i as f64);
    v /= v.norm();
    for _ in 0..8 {
        let w = m * &v;
        let n = w.norm();
        if n == 0.0 {
            break;
        }
        v = w / n;
    }
    let mut shift = lambda * (1.0 + 1e-10) + 1e-14 * scale;
    let mut residual = f64::INFINITY;
    for attempt in 0..3 {
        let shifted = m - DMatrix::identity(d, d) * shift;
        if let Some(lu) = Some(shifted.lu()) {
            for _ in 0..30 {
                let Some(w) = lu.solve(&v) else { break };
                let n = w.norm();
                if !n.is_finite() || n == 0.0 {
                    break;
                }
                let mut next = w / n;
                let pivot = next.iamax();
                if next[pivot] < 0.0 {
                    next = -next;
                }
                v = next;
                residual = (m * &v - &v * lambda).norm() / scale;
                if residual < EIGENVECTOR_RESIDUAL {
                    return Ok(v);
                }
            }
        }
        shift = lambda * (1.0 + 1e-8 * (attempt + 1) as f64) + 1e-10 * scale;
    }
    Err(Error::NumericalFailure {
        what: "leading eigenvector did not reach the residual target".into(),
        residual,
    })
}

/// The attracting line and repelling hyperplane of a proximal map.
#[derive(Debug, Clone)]
pub struct LeadingSpaces {
    pub eigenvalue: f64,
    /// Unit vector spanning `V⁺(A)`.
    pub v_plus: DVector<f64>,
    /// Unit normal of the invariant complementary hyperplane `V⁻(A)`.
    pub v_minus_normal: DVector<f64>,
}

pub fn leading_spaces(a: &LinearMap) -> Result<LeadingSpaces> {
    let report = is_proximal(a, DEFAULT_PROXIMAL_TOL)?;
    if !report.proximal() {
        return Err(Error::Precondition("leading spaces need a proximal map".into()));
    }
    let eig = eigenvalues(a)?;
    let lambda = eig[0].re;
    let v_plus = report.leading_vector.expect("proximal maps carry a leading vector");
    let v_minus_normal = leading_eigenvector(&a.0.transpose(), lambda)?;
    if v_plus.dot(&v_minus_normal).abs() <= 1e-10 {
        return Err(Error::NumericalFailure {
            what: "leading line lies in the repelling hyperplane".into(),
            residual: v_plus.dot(&v_minus_normal).abs(),
        });
    }
    Ok(LeadingSpaces {
        eigenvalue: lambda,
        v_plus,
        v_minus_normal,
    })
}
