//! Built-in reference systems and the block recoding of a system.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::multilinear::LinearMap;
use crate::potentials::{Factor, MatrixSystem};
use crate::symbolic::{word_from_rank, Alphabet};

/// Largest alphabet [`recode_system`] will build.
pub const MAX_RECODED_ALPHABET: u64 = 4096;

/// Where a known fact comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    /// Stated in the published analysis of the system.
    Published,
    /// Immediate from the construction.
    ClosedForm,
    /// Produced by an independent computation, named here.
    Computed { oracle: String },
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Published => f.write_str("published"),
            Source::ClosedForm => f.write_str("closed-form"),
            Source::Computed { oracle } => write!(f, "computed ({oracle})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnownFact {
    pub statement: String,
    pub source: Source,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub system: MatrixSystem,
    pub facts: Vec<KnownFact>,
}

/// Parameters accepted by [`build`]; unused ones are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogParams {
    pub alpha: f64,
    pub beta: f64,
    /// Alphabet size for generated families.
    pub n: u32,
    pub r: f64,
    pub d: usize,
    pub k: usize,
    pub seed: u64,
    pub theta: f64,
}

impl Default for CatalogParams {
    fn default() -> Self {
        CatalogParams {
            alpha: 1.0,
            beta: 1.0,
            n: 3,
            r: 0.5,
            d: 2,
            k: 1,
            seed: 1,
            theta: 1.0,
        }
    }
}

/// Catalog keys, in listing order.
pub const KEYS: &[&str] = &[
    "nottot",
    "nottot-recoded",
    "similarity",
    "diagonal-pair",
    "axis-swaps",
    "rotation",
    "random",
];

fn published(s: &str) -> KnownFact {
    KnownFact {
        statement: s.into(),
        source: Source::Published,
    }
}

fn closed(s: &str) -> KnownFact {
    KnownFact {
        statement: s.into(),
        source: Source::ClosedForm,
    }
}

fn computed(s: &str, oracle: &str) -> KnownFact {
    KnownFact {
        statement: s.into(),
        source: Source::Computed {
            oracle: oracle.into(),
        },
    }
}

fn swap() -> LinearMap {
    LinearMap::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

/// `A₁ = diag(2,1), A₂ = swap` and `B₁ = swap, B₂ = diag(1,2)` with
/// exponents `α, β`.
pub fn nottot_system(alpha: f64, beta: f64) -> MatrixSystem {
    MatrixSystem::new(vec![
        Factor::new(vec![LinearMap::diagonal(&[2.0, 1.0]), swap()], alpha).expect("valid"),
        Factor::new(vec![swap(), LinearMap::diagonal(&[1.0, 2.0])], beta).expect("valid"),
    ])
    .expect("valid")
}

/// The 2-block recoding of [`nottot_system`], written out explicitly.
pub fn nottot_recoded_system(alpha: f64, beta: f64) -> MatrixSystem {
    let up = LinearMap::from_rows(&[&[0.0, 2.0], &[1.0, 0.0]]);
    let down = LinearMap::from_rows(&[&[0.0, 1.0], &[2.0, 0.0]]);
    MatrixSystem::new(vec![
        Factor::new(
            vec![
                LinearMap::diagonal(&[4.0, 1.0]),
                up.clone(),
                down.clone(),
                LinearMap::identity(2),
            ],
            alpha,
        )
        .expect("valid"),
        Factor::new(
            vec![LinearMap::identity(2), up, down, LinearMap::diagonal(&[1.0, 4.0])],
            beta,
        )
        .expect("valid"),
    ])
    .expect("valid")
}

/// `n` copies of `r·Id` on `ℝ^d`.
pub fn similarity_system(n: u32, r: f64, d: usize) -> Result<MatrixSystem> {
    if !(r > 0.0 && r.is_finite()) || d == 0 {
        return Err(Error::invalid("similarity needs r > 0 and d >= 1"));
    }
    MatrixSystem::single(vec![LinearMap::scaled_identity(d, r); n as usize], 1.0)
}

/// Seeded random system: entries uniform in `[-1, 1]` from ChaCha8 seeded
/// with `seed`, drawn factor by factor, generator by generator, row-major;
/// a matrix with `|det| < 0.05` is redrawn.
pub fn random_system(seed: u64, n: u32, d: usize, k: usize) -> Result<MatrixSystem> {
    if d == 0 || k == 0 {
        return Err(Error::invalid("random systems need d >= 1 and k >= 1"));
    }
    Alphabet::new(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = (0..k)
        .map(|_| {
            let gens = (0..n)
                .map(|_| loop {
                    let entries: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..=1.0)).collect();
                    let a = LinearMap::from_row_major(d, &entries).expect("square");
                    if a.determinant().abs() >= 0.05 {
                        break a;
                    }
                })
                .collect();
            Factor::new(gens, 1.0)
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixSystem::new(factors)
}

/// Builds a catalog entry.
pub fn build(name: &str, params: &CatalogParams) -> Result<CatalogEntry> {
    let p = params;
    let (system, facts) = match name {
        "nottot" => (
            nottot_system(p.alpha, p.beta),
            vec![
                published("both generator pairs are irreducible"),
                published("the axis pairs form the unique transitive class at l=(1,1), of size 4"),
                computed("that class has period 2 and is not primitive", "adjacency powers"),
                computed("first simultaneously proximal word up to length 4 is 1122", "exhaustive search"),
                published("the equilibrium state is not totally ergodic"),
            ],
        ),
        "nottot-recoded" => (
            nottot_recoded_system(p.alpha, p.beta),
            vec![
                published("equals the 2-block recoding of nottot"),
                published("the axis pairs split into two transitive classes"),
                computed("both classes are primitive with exponent 1", "adjacency matrix"),
                published("Phi(1^n 4^n) = 4^(n(alpha+beta))"),
            ],
        ),
        "similarity" => (
            similarity_system(p.n, p.r, p.d)?,
            vec![closed("affinity dimension log N / log(1/r), capped at d")],
        ),
        "diagonal-pair" => (
            MatrixSystem::single(vec![LinearMap::diagonal(&[0.5, 1.0 / 3.0]); 2], 1.0)?,
            vec![closed("affinity dimension 1")],
        ),
        "axis-swaps" => (
            MatrixSystem::single(
                vec![
                    LinearMap::from_rows(&[&[0.0, 2.0], &[1.0, 0.0]]),
                    LinearMap::from_rows(&[&[0.0, 1.0], &[3.0, 0.0]]),
                ],
                1.0,
            )?,
            vec![closed("the coordinate axes form a cyclic splitting with 2 parts")],
        ),
        "rotation" => (
            MatrixSystem::single(
                vec![LinearMap::rotation(p.theta), LinearMap::rotation(p.theta * 2f64.sqrt())],
                1.0,
            )?,
            vec![
                closed("no word is proximal"),
                closed("Lyapunov exponents are both 0"),
            ],
        ),
        "random" => (
            random_system(p.seed, p.n.max(2), p.d, p.k)?,
            vec![closed("generated by ChaCha8 from the given seed")],
        ),
        _ => {
            return Err(Error::invalid(format!(
                "unknown catalog key {name:?}; known keys: {}",
                KEYS.join(", ")
            )))
        }
    };
    Ok(CatalogEntry {
        name: name.to_string(),
        system,
        facts,
    })
}

/// Parses `key` or `key(name=value, ...)`, e.g. `similarity(N=3, r=1/2, d=2)`.
pub fn parse_spec(spec: &str) -> Result<(String, CatalogParams)> {
    let spec = spec.trim();
    let mut params = CatalogParams::default();
    let Some(open) = spec.find('(') else {
        return Ok((spec.to_string(), params));
    };
    let name = spec[..open].trim().to_string();
    let inner = spec[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| Error::invalid(format!("unbalanced parentheses in {spec:?}")))?;
    for part in inner.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("expected name=value, got {part:?}")))?;
        let num = || crate::io::parse_number(value.trim()).map(|(v, _)| v);
        let int = || {
            value
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::invalid(format!("{key} must be a non-negative integer")))
        };
        match key.trim() {
            "alpha" => params.alpha = num()?,
            "beta" => params.beta = num()?,
            "N" | "n" => params.n = int()? as u32,
            "r" => params.r = num()?,
            "d" => params.d = int()? as usize,
            "k" => params.k = int()? as usize,
            "seed" => params.seed = int()?,
            "theta" => params.theta = num()?,
            other => return Err(Error::invalid(format!("unknown catalog parameter {other:?}"))),
        }
    }
    Ok((name, params))
}

/// The system over `N^n` symbols whose generator `i` in factor `j` is
/// `A_w^(j)` for `w` the `i`-th word of length `n` in lexicographic order.
pub fn recode_system(sys: &MatrixSystem, n: usize) -> Result<MatrixSystem> {
    if n == 0 {
        return Err(Error::invalid("block length must be at least 1"));
    }
    let alphabet = sys.alphabet();
    let size = alphabet
        .word_count(n)
        .filter(|&c| c <= MAX_RECODED_ALPHABET)
        .ok_or(Error::ResourceLimit {
            what: "recoded alphabet".into(),
            requested: (alphabet.size() as f64).powi(n as i32),
            budget: MAX_RECODED_ALPHABET,
        })?;
    let factors = sys
        .factors()
        .iter()
        .map(|f| {
            let gens = (0..size)
                .map(|r| f.product(word_from_rank(r, alphabet, n).symbols()))
                .collect();
            Factor::new(gens, f.beta())
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixSystem::new(factors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recoding_nottot_matches_explicit_matrices() {
        for (a, b) in [(1.0, 1.0), (1.0, 2.0)] {
            let r = recode_system(&nottot_system(a, b), 2).unwrap();
            assert_eq!(r, nottot_recoded_system(a, b));
        }
    }

    #[test]
    fn recoding_by_one_is_identity() {
        let s = nottot_system(1.0, 1.0);
        assert_eq!(recode_system(&s, 1).unwrap(), s);
        assert!(recode_system(&s, 0).is_err());
        assert!(matches!(recode_system(&s, 13), Err(Error::ResourceLimit { .. })));
    }

    #[test]
    fn specs_parse() {
        let (name, p) = parse_spec("similarity(N=3, r=1/2, d=2)").unwrap();
        assert_eq!(name, "similarity");
        assert_eq!((p.n, p.r, p.d), (3, 0.5, 2));
        let e = build(&name, &p).unwrap();
        assert_eq!(e.system.alphabet().size(), 3);
        assert_eq!(e.system.factor(0).generator(2), &LinearMap::scaled_identity(2, 0.5));
        assert!(build("nope", &p).is_err());
        assert!(parse_spec("similarity(q=1)").is_err());
        assert!(parse_spec("similarity(N=3").is_err());
    }

    #[test]
    fn random_systems_are_reproducible() {
        let a = random_system(7, 2, 3, 2).unwrap();
        let b = random_system(7, 2, 3, 2).unwrap();
        let c = random_system(8, 2, 3, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn every_key_builds() {
        for key in KEYS {
            let e = build(key, &CatalogParams::default()).unwrap();
            assert!(!e.facts.is_empty());
        }
    }
}
