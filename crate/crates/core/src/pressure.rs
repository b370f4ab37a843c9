//! Partition sums, pressure brackets and the affinity dimension.
//!
//! With `a_n = log Σ_{|i|=n} Φ(i)`, submultiplicativity makes `a_n`
//! subadditive, so `min_{n ≤ n_max} a_n / n` bounds the pressure from above.
//!
//! The lower bound comes from the connector estimate
//! `δ̂_m = min_{i,j} max_{|k| ≤ m} Φ(ikj) / (Φ(i)Φ(j))`. Summing over `|i| =
//! |j| = n` and padding every `ikj` to length `2n + m` with
//! `a_{q+1} ≥ a_q − κ` (`κ` bounds the log cost of one extra symbol) gives
//!
//! ```text
//! a_{2n+m} ≥ 2 a_n + log δ̂_m − log(m+1) − m κ⁺,
//! ```
//!
//! and iterating the doubling yields `P ≥ (a_n + log δ̂_m − log(m+1) − m κ⁺) / (n + m)`.
//! The bound is only as good as `δ̂_m`, which is measured over a finite window,
//! so it is reported as heuristic unless the caller supplies a proven `δ`.

use crate::error::{Error, Result};
use crate::kernel;
use crate::multilinear::LinearMap;
use crate::potentials::{estimate_quasimultiplicativity, ConnectorEstimate, Potential};
use crate::symbolic::Budget;

/// `a_n`, an exact log-sum-exp over all `N^n` words.
pub fn partition_sum(p: &Potential, n: usize, budget: &Budget) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("depth must be at least 1"));
    }
    budget.check_words(p.alphabet(), n, "partition sum")?;
    Ok(kernel::level_log_sum(p, n))
}

/// One row of the per-depth table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelRecord {
    pub n: usize,
    pub log_sum: f64,
    pub rate: f64,
    pub upper_so_far: f64,
    /// Best lower bound using depths up to `n`, when available.
    pub lower_so_far: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PressureConfig {
    pub n_max: usize,
    /// Largest connector length tried for the lower bound.
    pub connector: usize,
    /// Window `L` for the connector estimate.
    pub window: usize,
    /// A proven quasimultiplicativity constant for connector length
    /// `connector`; makes the lower bound certified.
    pub proven_delta: Option<f64>,
    /// Report an Aitken Δ² extrapolation of the last three rates.
    pub accelerate: bool,
    pub budget: Budget,
}

impl Default for PressureConfig {
    fn default() -> Self {
        PressureConfig {
            n_max: 8,
            connector: 1,
            window: 3,
            proven_delta: None,
            accelerate: false,
            budget: Budget::default(),
        }
    }
}

impl PressureConfig {
    pub fn depth(n_max: usize) -> Self {
        PressureConfig {
            n_max,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct PressureEstimate {
    pub levels: Vec<LevelRecord>,
    /// `min a_n / n`, a certified upper bound.
    pub upper: f64,
    pub lower: Option<f64>,
    pub lower_certified: bool,
    /// `a_{n_max} / n_max`.
    pub point: f64,
    /// Connector length achieving the lower bound.
    pub m: usize,
    pub log_delta: Option<f64>,
    pub kappa: f64,
    pub connector: Option<ConnectorEstimate>,
    pub accelerated: Option<f64>,
}

impl PressureEstimate {
    pub fn width(&self) -> Option<f64> {
        self.lower.map(|l| self.upper - l)
    }
}

fn lower_bound(a_n: f64, n: usize, log_delta: f64, m: usize, kappa: f64) -> f64 {
    (a_n + log_delta - ((m + 1) as f64).ln() - m as f64 * kappa.max(0.0)) / (n + m) as f64
}

fn aitken(x0: f64, x1: f64, x2: f64) -> Option<f64> {
    let denom = x2 - 2.0 * x1 + x0;
    (denom.abs() > 1e-300).then(|| x2 - (x2 - x1).powi(2) / denom)
}

/// Per-depth sums and the two-sided bracket.
pub fn pressure(p: &Potential, config: &PressureConfig) -> Result<PressureEstimate> {
    if config.n_max < 2 {
        return Err(Error::invalid("n_max must be at least 2"));
    }
    if config.window < 1 {
        return Err(Error::invalid("window must be at least 1"));
    }
    config
        .budget
        .check_words(p.alphabet(), config.n_max, "pressure partition sums")?;
    let sums: Vec<f64> = (1..=config.n_max).map(|n| kernel::level_log_sum(p, n)).collect();
    let kappa = p.log_inverse_bound();

    // (m, log δ, estimate) for each connector length tried
    let mut deltas: Vec<(usize, f64, Option<ConnectorEstimate>)> = Vec::new();
    if let Some(d) = config.proven_delta {
        if d.is_nan() || d <= 0.0 {
            return Err(Error::invalid("a proven delta must be positive"));
        }
        deltas.push((config.connector, d.ln(), None));
    } else {
        for m in 0..=config.connector {
            let e = estimate_quasimultiplicativity(p, m, config.window, &config.budget)?;
            if e.log_delta > f64::NEG_INFINITY {
                deltas.push((m, e.log_delta, Some(e)));
            }
        }
    }

    let mut levels = Vec::with_capacity(sums.len());
    let mut upper = f64::INFINITY;
    let mut lower: Option<(f64, usize)> = None;
    for (idx, &a) in sums.iter().enumerate() {
        let n = idx + 1;
        upper = upper.min(a / n as f64);
        for &(m, ld, _) in &deltas {
            let l = lower_bound(a, n, ld, m, kappa);
            if lower.is_none_or(|(best, _)| l > best) {
                lower = Some((l, m));
            }
        }
        levels.push(LevelRecord {
            n,
            log_sum: a,
            rate: a / n as f64,
            upper_so_far: upper,
            lower_so_far: lower.map(|x| x.0),
        });
    }
    let point = levels.last().expect("n_max >= 2").rate;
    let accelerated = if config.accelerate && levels.len() >= 3 {
        let k = levels.len();
        aitken(levels[k - 3].rate, levels[k - 2].rate, levels[k - 1].rate)
    } else {
        None
    };
    let (m, log_delta, connector) = match lower {
        Some((_, m)) => {
            let (_, ld, est) = deltas.iter().find(|d| d.0 == m).cloned().expect("recorded");
            (m, Some(ld), est)
        }
        None => (config.connector, None, None),
    };
    Ok(PressureEstimate {
        levels,
        upper,
        lower: lower.map(|x| x.0),
        lower_certified: lower.is_some() && config.proven_delta.is_some(),
        point,
        m,
        log_delta,
        kappa,
        connector,
        accelerated,
    })
}

/// One bisection step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionStep {
    pub s: f64,
    pub pressure_point: f64,
}

#[derive(Debug, Clone)]
pub struct DimensionResult {
    pub s_lo: f64,
    pub s_hi: f64,
    pub point: f64,
    pub at_lo: PressureEstimate,
    pub at_hi: PressureEstimate,
    /// True when the lower bound at `s_lo` is `≥ 0` and the upper bound at
    /// `s_hi` is `≤ 0`; the bracket is heuristic otherwise.
    pub certified: bool,
    pub iteration_cap_reached: bool,
    pub steps: Vec<BisectionStep>,
}

pub const MAX_BISECTION_STEPS: usize = 64;

/// Zero of `s ↦ P(φ^s)` by bisection on `[0, 2d]` using the pressure point
/// estimate at depth `n_max`.
pub fn affinity_dimension(
    gens: &[LinearMap],
    n_max: usize,
    tol: f64,
    budget: &Budget,
) -> Result<DimensionResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if n_max < 2 {
        return Err(Error::invalid("n_max must be at least 2"));
    }
    let first = gens.first().ok_or_else(|| Error::invalid("no generators"))?;
    if let Some(i) = gens.iter().position(|g| g.norm().is_nan() || g.norm() >= 1.0) {
        return Err(Error::invalid(format!(
            "generator {} is not contracting (norm {})",
            i + 1,
            gens[i].norm()
        )));
    }
    let d = first.dim() as f64;
    budget.check_words(
        crate::symbolic::Alphabet::new(gens.len() as u32)?,
        n_max,
        "affinity dimension partition sums",
    )?;
    let point_at = |s: f64| -> Result<f64> {
        let p = Potential::singular_value(gens.to_vec(), s)?;
        Ok(kernel::level_log_sum(&p, n_max) / n_max as f64)
    };
    let (mut lo, mut hi) = (0.0, 2.0 * d);
    let mut steps = Vec::new();
    let mut capped = true;
    for _ in 0..MAX_BISECTION_STEPS {
        if hi - lo <= tol {
            capped = false;
            break;
        }
        let mid = 0.5 * (lo + hi);
        let pm = point_at(mid)?;
        steps.push(BisectionStep {
            s: mid,
            pressure_point: pm,
        });
        if pm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= tol {
        capped = false;
    }
    let config = PressureConfig {
        n_max,
        connector: 1,
        window: 2,
        budget: *budget,
        ..Default::default()
    };
    let at_lo = pressure(&Potential::singular_value(gens.to_vec(), lo)?, &config)?;
    let at_hi = pressure(&Potential::singular_value(gens.to_vec(), hi)?, &config)?;
    let certified = at_hi.upper <= 0.0 && at_lo.lower.is_some_and(|l| l >= 0.0) && at_lo.lower_certified;
    Ok(DimensionResult {
        s_lo: lo,
        s_hi: hi,
        point: 0.5 * (lo + hi),
        at_lo,
        at_hi,
        certified,
        iteration_cap_reached: capped,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn partition_sum_examples() {
        let b = Budget::default();
        let ones = Potential::scalar_weights(&[1.0, 1.0]).unwrap();
        assert!((partition_sum(&ones, 3, &b).unwrap() - 8f64.ln()).abs() < 1e-14);
        let half = Potential::scalar_weights(&[0.5, 0.5]).unwrap();
        for n in 1..6 {
            assert!(partition_sum(&half, n, &b).unwrap().abs() < 1e-14);
        }
        let nt = Potential::generalised(catalog::nottot_system(1.0, 1.0));
        assert!((partition_sum(&nt, 1, &b).unwrap() - 4f64.ln()).abs() < 1e-14);
        assert!(matches!(
            partition_sum(&ones, 30, &b),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn trivial_pressure_is_exact() {
        let ones = Potential::scalar_weights(&[1.0, 1.0, 1.0]).unwrap();
        let e = pressure(&ones, &PressureConfig::depth(6)).unwrap();
        let ln3 = 3f64.ln();
        assert!((e.upper - ln3).abs() < 1e-12);
        assert!((e.point - ln3).abs() < 1e-12);
        assert!((e.lower.unwrap() - ln3).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_pressure_is_zero() {
        let p = Potential::scalar_weights(&[0.2, 0.3, 0.5]).unwrap();
        let e = pressure(&p, &PressureConfig::depth(5)).unwrap();
        assert!(e.upper.abs() < 1e-12 && e.point.abs() < 1e-12);
    }

    #[test]
    fn proven_delta_certifies_lower() {
        let p = Potential::scalar_weights(&[1.0, 1.0]).unwrap();
        let config = PressureConfig {
            proven_delta: Some(1.0),
            connector: 0,
            ..PressureConfig::depth(4)
        };
        let e = pressure(&p, &config).unwrap();
        assert!(e.lower_certified);
        assert!((e.lower.unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn aitken_recovers_geometric_limit() {
        let xs: Vec<f64> = (0..3).map(|k| 1.0 + 0.5f64.powi(k)).collect();
        assert!((aitken(xs[0], xs[1], xs[2]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_rejects_expanding_generators() {
        let gens = vec![LinearMap::identity(2), LinearMap::scaled_identity(2, 0.5)];
        assert!(affinity_dimension(&gens, 4, 1e-6, &Budget::default()).is_err());
    }
}
