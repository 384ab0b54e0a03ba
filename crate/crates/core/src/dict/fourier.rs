//! Fourier-modulus dictionary: radial averages of |fft2(g)| over integer
//! frequency annuli.

use crate::density::DensityGrid;
use crate::dict::{Family, FeatureId, FeatureVector, PType};
use crate::error::SignalError;
use crate::scalar::{ksum, real, Real};
use crate::signal::{fft2, to_complex};

/// Whether annulus bins are averaged or summed. Means keep feature
/// magnitudes comparable across radii and are the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinReduce {
    Mean,
    Sum,
}

impl Default for BinReduce {
    fn default() -> Self {
        BinReduce::Mean
    }
}

/// Schema for a grid of resolution J: the zeroth functional plus three
/// blocks of `2^(J-1)` radial bins.
pub fn fourier_schema(resolution: u32) -> Vec<FeatureId> {
    let radii = 1usize << (resolution - 1);
    let mut ids = Vec::with_capacity(1 + 3 * radii);
    ids.push(FeatureId::Zero(Family::Fourier));
    for p in PType::ALL {
        for radius in 1..=radii {
            ids.push(FeatureId::Fourier { p, radius });
        }
    }
    ids
}

pub fn fourier_features<T: Real>(g: &DensityGrid<T>) -> Result<FeatureVector<T>, SignalError> {
    fourier_features_with(g, BinReduce::Mean)
}

/// Fourier-modulus features with an explicit bin reduction. Ordering:
/// total integral, then L1 bin values for radii 1..2^(J-1), then their
/// squares, then the L2 mean-of-squares per bin.
pub fn fourier_features_with<T: Real>(
    g: &DensityGrid<T>,
    reduce: BinReduce,
) -> Result<FeatureVector<T>, SignalError> {
    let n = g.side();
    let spectrum = fft2(&to_complex(&g.values))?;
    let d = g.cell();
    let scale = d * d; // discrete-to-continuous transform normalization
    let n_bins = n / 2;
    let mut moduli: Vec<Vec<T>> = vec![Vec::new(); n_bins + 1];
    for ix in 0..n {
        let fx = signed(ix, n);
        for iy in 0..n {
            let fy = signed(iy, n);
            let r = (fx * fx + fy * fy).sqrt().round() as usize;
            if r >= 1 && r <= n_bins {
                moduli[r].push(modulus(&spectrum[[ix, iy]]) * scale);
            }
        }
    }
    let mut values = Vec::with_capacity(1 + 3 * n_bins);
    values.push(g.integral());
    let count = |bin: &Vec<T>| -> T {
        match reduce {
            BinReduce::Mean => real::<T>(bin.len().max(1) as f64),
            BinReduce::Sum => T::one(),
        }
    };
    for radius in 1..=n_bins {
        values.push(ksum(moduli[radius].iter().copied()) / count(&moduli[radius]));
    }
    for radius in 1..=n_bins {
        let v = ksum(moduli[radius].iter().copied()) / count(&moduli[radius]);
        values.push(v * v);
    }
    for radius in 1..=n_bins {
        values.push(ksum(moduli[radius].iter().map(|m| *m * *m)) / count(&moduli[radius]));
    }
    Ok(FeatureVector { values })
}

fn modulus<T: Real>(c: &num_complex::Complex<T>) -> T {
    (c.re * c.re + c.im * c.im).sqrt()
}

fn signed(i: usize, n: usize) -> f64 {
    if i < n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Convenience check that a schema matches a feature vector.
pub fn assert_schema_len<T>(schema: &[FeatureId], v: &FeatureVector<T>) {
    assert_eq!(schema.len(), v.values.len());
}
