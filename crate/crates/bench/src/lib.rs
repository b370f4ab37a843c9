//! Fixture systems shared by the benchmarks.

use thermoform::catalog;
use thermoform::{LinearMap, MatrixSystem, Potential};

/// Generalised potential of the two-factor period-two reference system.
pub fn nottot_potential() -> Potential {
    Potential::generalised(catalog::nottot_system(1.0, 1.0))
}

/// Seeded random three-symbol system with two 3-dimensional factors.
pub fn random_potential() -> Potential {
    Potential::generalised(catalog::random_system(7, 3, 3, 2).expect("seeded system builds"))
}

/// Three contracting upper triangular maps of the plane.
pub fn contracting_generators() -> Vec<LinearMap> {
    vec![
        LinearMap::from_rows(&[&[0.5, 0.2], &[0.0, 0.3]]),
        LinearMap::from_rows(&[&[0.4, 0.0], &[0.1, 0.25]]),
        LinearMap::from_rows(&[&[0.3, -0.1], &[0.2, 0.45]]),
    ]
}

pub fn nottot_system() -> MatrixSystem {
    catalog::nottot_system(1.0, 1.0)
}
