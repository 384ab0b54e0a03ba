//! Deterministic synthetic planar molecules with a smooth pairwise
//! reference energy, for desk-scale experiments and tests.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, MoleculeState};
use crate::element::Element;

/// Minimum pairwise distance between generated atoms, angstroms.
pub const MIN_DISTANCE: f64 = 0.9;
/// Heavy atoms are placed inside this radius around the origin.
pub const PLACEMENT_RADIUS: f64 = 3.2;

const HEAVY_CHOICES: [Element; 4] = [Element::C, Element::N, Element::O, Element::S];

/// Morse-like pairwise energy,
/// `E = sum_{k<l} D_kl ((1 - exp(-A (r_kl - rho_kl)))^2 - 1)` with
/// `D_kl = 5 sqrt(z_k z_l)`, `rho_kl` the covalent-radius sum and
/// `A = 0.8` per angstrom. Smooth, permutation- and isometry-invariant.
pub const MORSE_STEEPNESS: f64 = 0.8;

fn pair_depth(a: Element, b: Element) -> f64 {
    5.0 * ((a.nuclear_charge() * b.nuclear_charge()) as f64).sqrt()
}

fn pair_r0(a: Element, b: Element) -> f64 {
    a.covalent_radius() + b.covalent_radius()
}

pub fn synthetic_energy(atoms: &[(Element, [f64; 3])]) -> f64 {
    let mut e = 0.0;
    for k in 0..atoms.len() {
        for l in (k + 1)..atoms.len() {
            let (ea, pa) = atoms[k];
            let (eb, pb) = atoms[l];
            let r = dist(&pa, &pb);
            let t = 1.0 - (-MORSE_STEEPNESS * (r - pair_r0(ea, eb))).exp();
            e += pair_depth(ea, eb) * (t * t - 1.0);
        }
    }
    e
}

/// Analytic gradient of [`synthetic_energy`] with respect to positions.
pub fn synthetic_energy_gradient(atoms: &[(Element, [f64; 3])]) -> Vec<[f64; 3]> {
    let n = atoms.len();
    let mut g = vec![[0.0f64; 3]; n];
    for k in 0..n {
        for l in (k + 1)..n {
            let (ea, pa) = atoms[k];
            let (eb, pb) = atoms[l];
            let r = dist(&pa, &pb);
            let x = (-MORSE_STEEPNESS * (r - pair_r0(ea, eb))).exp();
            // dE/dr = 2 D A (1 - x) x
            let de_dr = 2.0 * pair_depth(ea, eb) * MORSE_STEEPNESS * (1.0 - x) * x;
            for c in 0..3 {
                let u = (pa[c] - pb[c]) / r;
                g[k][c] += de_dr * u;
                g[l][c] -= de_dr * u;
            }
        }
    }
    g
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Random planar molecules: 2-9 heavy atoms from C/N/O/S, each dressed
/// with 0-2 hydrogens, all in the z = 0 plane, labelled with the
/// synthetic energy. Deterministic in the seed.
pub fn make_synthetic_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut molecules = Vec::with_capacity(n);
    while molecules.len() < n {
        if let Some(m) = try_molecule(&mut rng) {
            molecules.push(m);
        }
    }
    Dataset {
        molecules,
        name: format!("synthetic-{n}-{seed}"),
        provenance: PathBuf::from(format!("synthetic://n={n}&seed={seed}")),
    }
}

fn try_molecule(rng: &mut ChaCha8Rng) -> Option<MoleculeState> {
    let heavy_count = 2 + rng.gen_range(0..8usize);
    let mut atoms: Vec<(Element, [f64; 3])> = Vec::new();
    for _ in 0..heavy_count {
        let species = HEAVY_CHOICES[rng.gen_range(0..HEAVY_CHOICES.len())];
        let p = place(rng, &atoms, PLACEMENT_RADIUS)?;
        atoms.push((species, p));
    }
    let heavy: Vec<[f64; 3]> = atoms.iter().map(|(_, p)| *p).collect();
    for center in heavy {
        for _ in 0..rng.gen_range(0..3usize) {
            if let Some(p) = place_near(rng, &atoms, &center) {
                atoms.push((Element::H, p));
            }
        }
    }
    let energy = synthetic_energy(&atoms);
    MoleculeState::new(atoms, Some(energy)).ok()
}

fn place(rng: &mut ChaCha8Rng, atoms: &[(Element, [f64; 3])], radius: f64) -> Option<[f64; 3]> {
    for _ in 0..200 {
        let r = radius * rng.gen::<f64>().sqrt();
        let phi = rng.gen::<f64>() * std::f64::consts::TAU;
        let p = [r * phi.cos(), r * phi.sin(), 0.0];
        if atoms.iter().all(|(_, q)| dist(&p, q) >= MIN_DISTANCE) {
            return Some(p);
        }
    }
    None
}

fn place_near(
    rng: &mut ChaCha8Rng,
    atoms: &[(Element, [f64; 3])],
    center: &[f64; 3],
) -> Option<[f64; 3]> {
    for _ in 0..50 {
        let phi = rng.gen::<f64>() * std::f64::consts::TAU;
        let d = 0.95 + 0.15 * rng.gen::<f64>();
        let p = [center[0] + d * phi.cos(), center[1] + d * phi.sin(), 0.0];
        if p[0].hypot(p[1]) <= PLACEMENT_RADIUS + 1.2
            && atoms.iter().all(|(_, q)| dist(&p, q) >= MIN_DISTANCE)
        {
            return Some(p);
        }
    }
    None
}
