//! Coulomb-matrix representation with random-sorted augmentation and
//! Laplace-kernel ridge regression, the comparison baseline.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{FoldAssignment, MoleculeState};
use crate::error::RegressionError;
use crate::scalar::{ksum, real, Real};

/// Positions arrive in angstroms; the Coulomb formula is evaluated in
/// atomic units.
pub const ANGSTROM_PER_BOHR: f64 = 0.529177;

/// Zero-padded symmetric Coulomb matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CoulombMatrix<T> {
    pub entries: Array2<T>,
    /// Actual atom count; rows/columns beyond it are zero padding.
    pub k: usize,
}

/// Coulomb matrix from charges and positions already in Bohr.
pub fn coulomb_entries<T: Real>(
    charges: &[u32],
    positions_bohr: &[[f64; 3]],
    k_max: usize,
) -> Result<CoulombMatrix<T>, RegressionError> {
    let k = charges.len();
    if k > k_max {
        return Err(RegressionError::TooManyAtoms { atoms: k, max: k_max });
    }
    let mut entries = Array2::zeros((k_max, k_max));
    for a in 0..k {
        let za = charges[a] as f64;
        entries[[a, a]] = real::<T>(0.5 * za.powf(2.4));
        for b in (a + 1)..k {
            let zb = charges[b] as f64;
            let d = dist(&positions_bohr[a], &positions_bohr[b]);
            let v = real::<T>(za * zb / d);
            entries[[a, b]] = v;
            entries[[b, a]] = v;
        }
    }
    Ok(CoulombMatrix { entries, k })
}

/// Coulomb matrix of a molecule with positions in angstroms.
pub fn coulomb_matrix<T: Real>(
    m: &MoleculeState,
    k_max: usize,
) -> Result<CoulombMatrix<T>, RegressionError> {
    let charges: Vec<u32> = m.charges().collect();
    let positions: Vec<[f64; 3]> = m
        .atoms()
        .iter()
        .map(|(_, p)| {
            [
                p[0] / ANGSTROM_PER_BOHR,
                p[1] / ANGSTROM_PER_BOHR,
                p[2] / ANGSTROM_PER_BOHR,
            ]
        })
        .collect();
    coulomb_entries(&charges, &positions, k_max)
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Randomly sorted copies: row norms perturbed with Gaussian noise of
/// standard deviation `noise` times the mean occupied-row norm, then rows
/// and columns jointly sorted by descending noisy norm. Copies are
/// returned flattened row-major, ready for the kernel.
pub fn random_sorted_copies<T: Real>(
    c: &CoulombMatrix<T>,
    p: usize,
    noise: f64,
    seed: u64,
) -> Vec<Vec<T>> {
    let k_max = c.entries.nrows();
    let norms: Vec<f64> = (0..k_max)
        .map(|i| {
            c.entries
                .row(i)
                .iter()
                .map(|v| {
                    let f = v.to_f64_lossy();
                    f * f
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mean_norm = if c.k > 0 {
        norms[..c.k].iter().sum::<f64>() / c.k as f64
    } else {
        0.0
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..p)
        .map(|_| {
            let noisy: Vec<f64> = norms
                .iter()
                .map(|n| n + noise * mean_norm * normal.sample(&mut rng))
                .collect();
            let mut order: Vec<usize> = (0..k_max).collect();
            order.sort_by(|&a, &b| noisy[b].total_cmp(&noisy[a]).then(a.cmp(&b)));
            let mut flat = Vec::with_capacity(k_max * k_max);
            for &i in &order {
                for &j in &order {
                    flat.push(c.entries[[i, j]]);
                }
            }
            flat
        })
        .collect()
}

/// `exp(-||a - b||_1 / sigma)`.
pub fn laplace_kernel<T: Real>(a: &[T], b: &[T], sigma: T) -> T {
    let l1 = ksum(a.iter().zip(b).map(|(&x, &y)| (x - y).abs()));
    (-l1 / sigma).exp()
}

/// Kernel ridge model over augmented Coulomb copies.
#[derive(Debug, Clone)]
pub struct KrrModel<T> {
    pub support: Vec<Vec<T>>,
    pub alpha: Vec<T>,
    pub sigma: T,
    pub lambda: T,
}

/// Solve `(K + lambda I) alpha = y` by Cholesky factorization.
pub fn krr_fit<T: Real>(
    train: &[Vec<T>],
    y: &[T],
    sigma: T,
    lambda: T,
) -> Result<KrrModel<T>, RegressionError> {
    let n = train.len();
    if n == 0 {
        return Err(RegressionError::Empty);
    }
    if y.len() != n {
        return Err(RegressionError::LengthMismatch(y.len(), n));
    }
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = laplace_kernel(&train[i], &train[j], sigma);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
        k[[i, i]] += lambda;
    }
    let alpha = cholesky_solve(&mut k, y, lambda.to_f64_lossy())?;
    Ok(KrrModel { support: train.to_vec(), alpha, sigma, lambda })
}

/// In-place lower Cholesky of `k`, then forward/backward substitution.
fn cholesky_solve<T: Real>(
    k: &mut Array2<T>,
    y: &[T],
    lambda: f64,
) -> Result<Vec<T>, RegressionError> {
    let n = k.nrows();
    for j in 0..n {
        let mut d = k[[j, j]];
        for p in 0..j {
            d -= k[[j, p]] * k[[j, p]];
        }
        if d <= T::zero() || !d.is_finite() {
            return Err(RegressionError::IllConditioned { lambda });
        }
        let d = d.sqrt();
        k[[j, j]] = d;
        for i in (j + 1)..n {
            let mut v = k[[i, j]];
            for p in 0..j {
                v -= k[[i, p]] * k[[j, p]];
            }
            k[[i, j]] = v / d;
        }
    }
    // L z = y
    let mut z = vec![T::zero(); n];
    for i in 0..n {
        let mut acc = y[i];
        for p in 0..i {
            acc -= k[[i, p]] * z[p];
        }
        z[i] = acc / k[[i, i]];
    }
    // L^T alpha = z
    let mut alpha = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut acc = z[i];
        for p in (i + 1)..n {
            acc -= k[[p, i]] * alpha[p];
        }
        alpha[i] = acc / k[[i, i]];
    }
    Ok(alpha)
}

/// Predict one molecule from its augmented copies: average of the per-copy
/// kernel expansions.
pub fn krr_predict<T: Real>(model: &KrrModel<T>, copies: &[Vec<T>]) -> T {
    let mut acc = T::zero();
    for c in copies {
        acc += ksum(
            model
                .support
                .iter()
                .zip(&model.alpha)
                .map(|(s, &a)| a * laplace_kernel(s, c, model.sigma)),
        );
    }
    acc / real::<T>(copies.len() as f64)
}

/// Grid search over (sigma, lambda) by mean validation MAE across folds of
/// the molecule set; `copies[i]` are molecule i's augmented matrices. Ties
/// prefer smaller sigma, then smaller lambda.
pub fn grid_search<T: Real>(
    copies: &[Vec<Vec<T>>],
    y: &[T],
    folds: &FoldAssignment,
    sigma_grid: &[T],
    lambda_grid: &[T],
) -> Result<(T, T), RegressionError> {
    let n = copies.len();
    if n == 0 || sigma_grid.is_empty() || lambda_grid.is_empty() {
        return Err(RegressionError::Empty);
    }
    if folds.fold_of.len() != n {
        return Err(RegressionError::LengthMismatch(folds.fold_of.len(), n));
    }
    let mut best: Option<(f64, T, T)> = None;
    for &sigma in sigma_grid {
        for &lambda in lambda_grid {
            let mut total = 0.0;
            let mut count = 0usize;
            for fold in 0..folds.n_folds {
                let held = folds.fold_indices(fold);
                if held.is_empty() || held.len() == n {
                    continue;
                }
                let mut train = Vec::new();
                let mut y_train = Vec::new();
                for i in 0..n {
                    if folds.fold_of[i] != fold {
                        for c in &copies[i] {
                            train.push(c.clone());
                            y_train.push(y[i]);
                        }
                    }
                }
                let model = match krr_fit(&train, &y_train, sigma, lambda) {
                    Ok(m) => m,
                    Err(RegressionError::IllConditioned { .. }) => continue,
                    Err(e) => return Err(e),
                };
                for &i in &held {
                    let pred = krr_predict(&model, &copies[i]);
                    total += (pred - y[i]).abs().to_f64_lossy();
                    count += 1;
                }
            }
            if count == 0 {
                continue;
            }
            let mae = total / count as f64;
            let better = match &best {
                None => true,
                Some((b, _, _)) => mae < *b,
            };
            if better {
                best = Some((mae, sigma, lambda));
            }
        }
    }
    best.map(|(_, s, l)| (s, l)).ok_or(RegressionError::Empty)
}
