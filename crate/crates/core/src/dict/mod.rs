//! Invariant feature dictionaries: Fourier modulus, first-order wavelet,
//! and second-order scattering.

pub mod fourier;
pub mod scattering;
pub mod wavelet;

use std::fmt;

/// Which dictionary a feature belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Fourier,
    Wavelet,
    Scattering,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::Fourier => "F",
            Family::Wavelet => "W",
            Family::Scattering => "S",
        }
    }
}

/// Functional type: L1 mean, its square, or the L2 mean of squares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PType {
    L1,
    L1Sq,
    L2Sq,
}

impl PType {
    pub const ALL: [PType; 3] = [PType::L1, PType::L1Sq, PType::L2Sq];

    pub fn tag(self) -> &'static str {
        match self {
            PType::L1 => "p1",
            PType::L1Sq => "p1sq",
            PType::L2Sq => "p2",
        }
    }
}

/// Identifier of one invariant functional. Scale steps are half-integer
/// scale labels doubled (step `s` labels scale `s/2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureId {
    /// Total integral of the density.
    Zero(Family),
    /// Radial Fourier-modulus bin `radius` in frequency samples.
    Fourier { p: PType, radius: usize },
    /// First-order wavelet functional at scale step `j`.
    Wavelet { p: PType, scale_step: usize },
    /// Second-order scattering functional.
    Scattering { p: PType, j1: usize, j2: usize, alpha: usize, ell2: usize },
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn half(step: usize) -> String {
            if step % 2 == 0 {
                format!("{}", step / 2)
            } else {
                format!("{}.5", step / 2)
            }
        }
        match self {
            FeatureId::Zero(fam) => write!(f, "{}:p0", fam.tag()),
            FeatureId::Fourier { p, radius } => write!(f, "F:{}:g={radius}", p.tag()),
            FeatureId::Wavelet { p, scale_step } => {
                write!(f, "W:{}:j={}", p.tag(), half(*scale_step))
            }
            FeatureId::Scattering { p, j1, j2, alpha, ell2 } => write!(
                f,
                "S:{}:j1={}:j2={}:a={alpha}:l2={ell2}",
                p.tag(),
                half(*j1),
                half(*j2)
            ),
        }
    }
}

/// Ordered invariant-functional values for one molecule; the schema is a
/// pure function of (family, J, L) and is shared across molecules.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
}

impl<T: crate::scalar::Real> FeatureVector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn assert_finite(&self) {
        debug_assert!(self.values.iter().all(|v| v.is_finite()));
    }
}
