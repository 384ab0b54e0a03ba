//! Dataset ingestion, planarity handling and fold assignment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::element::Element;
use crate::error::DataError;

/// Minimum allowed pairwise atom distance, in angstroms. Anything closer is
/// treated as malformed input.
pub const MIN_ATOM_DISTANCE: f64 = 0.05;

/// A molecule as ingested: species, 3D positions in angstroms, and an
/// optional atomization-energy label in kcal/mol.
///
/// Atoms are stored in canonical order (species, then lexicographic
/// position) so downstream floating-point sums are permutation-invariant
/// bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeState {
    atoms: Vec<(Element, [f64; 3])>,
    label: Option<f64>,
}

impl MoleculeState {
    pub fn new(mut atoms: Vec<(Element, [f64; 3])>, label: Option<f64>) -> Result<Self, DataError> {
        if atoms.is_empty() {
            return Err(DataError::Empty);
        }
        canonical_sort(&mut atoms);
        for i in 0..atoms.len() {
            for j in i + 1..atoms.len() {
                let d = dist3(atoms[i].1, atoms[j].1);
                if d < MIN_ATOM_DISTANCE {
                    return Err(DataError::AtomClash { i, j, dist: d });
                }
            }
        }
        Ok(MoleculeState { atoms, label })
    }

    pub fn atoms(&self) -> &[(Element, [f64; 3])] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn label(&self) -> Option<f64> {
        self.label
    }

    pub fn with_label(mut self, label: Option<f64>) -> Self {
        self.label = label;
        self
    }

    pub fn charges(&self) -> impl Iterator<Item = u32> + '_ {
        self.atoms.iter().map(|(e, _)| e.nuclear_charge())
    }

    pub fn total_charge(&self) -> u32 {
        self.charges().sum()
    }
}

/// A molecule expressed in 2D plane coordinates with the nuclear centroid at
/// the origin; output of [`planarize`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarMolecule {
    atoms: Vec<(Element, [f64; 2])>,
    label: Option<f64>,
    /// Max out-of-plane deviation measured during planarization, in angstroms.
    deviation: f64,
}

impl PlanarMolecule {
    /// Build a planar molecule directly from 2D coordinates (synthetic data,
    /// tests). Applies the same canonical ordering and clash guard as 3D
    /// ingestion; deviation is zero by construction.
    pub fn new(mut atoms: Vec<(Element, [f64; 2])>, label: Option<f64>) -> Result<Self, DataError> {
        if atoms.is_empty() {
            return Err(DataError::Empty);
        }
        atoms.sort_by(|a, b| {
            a.0.cmp(&b.0).then_with(|| a.1.partial_cmp(&b.1).expect("finite coordinates"))
        });
        for i in 0..atoms.len() {
            for j in i + 1..atoms.len() {
                let (a, b) = (atoms[i].1, atoms[j].1);
                let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                if d < MIN_ATOM_DISTANCE {
                    return Err(DataError::AtomClash { i, j, dist: d });
                }
            }
        }
        Ok(PlanarMolecule { atoms, label, deviation: 0.0 })
    }

    pub fn atoms(&self) -> &[(Element, [f64; 2])] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn label(&self) -> Option<f64> {
        self.label
    }

    pub fn deviation(&self) -> f64 {
        self.deviation
    }

    pub fn total_charge(&self) -> u32 {
        self.atoms.iter().map(|(e, _)| e.nuclear_charge()).sum()
    }
}

/// Labelled collection of molecules.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub molecules: Vec<MoleculeState>,
    pub name: String,
    pub provenance: PathBuf,
}

impl Dataset {
    pub fn labels(&self) -> Result<Vec<f64>, DataError> {
        self.molecules
            .iter()
            .enumerate()
            .map(|(i, m)| m.label().ok_or(DataError::MissingLabel { index: i }))
            .collect()
    }
}

/// Deterministic molecule-to-fold map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub n_folds: usize,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn fold_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,fold\n");
        for (i, f) in self.fold_of.iter().enumerate() {
            let _ = writeln!(out, "{i},{f}");
        }
        out
    }
}

fn canonical_sort(atoms: &mut [(Element, [f64; 3])]) {
    atoms.sort_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| {
            a.1.partial_cmp(&b.1).expect("finite coordinates")
        })
    });
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Parse an extended-XYZ file: atom count, comment line (optionally holding
/// `energy=<float>` in kcal/mol), then one `Symbol x y z` line per atom.
pub fn parse_xyz(text: &str) -> Result<MoleculeState, DataError> {
    let mut lines = text.lines();
    let count_line = lines.next().ok_or(DataError::Parse { line: 1, msg: "empty file".into() })?;
    let count: usize = count_line.trim().parse().map_err(|_| DataError::Parse {
        line: 1,
        msg: format!("malformed atom count {count_line:?}"),
    })?;
    if count == 0 {
        return Err(DataError::Parse { line: 1, msg: "atom count must be positive".into() });
    }
    let comment = lines.next().ok_or(DataError::Parse { line: 2, msg: "missing comment line".into() })?;
    let label = parse_energy_tag(comment);

    let mut atoms = Vec::with_capacity(count);
    for i in 0..count {
        let line_no = 3 + i;
        let line = lines.next().ok_or(DataError::Parse {
            line: line_no,
            msg: format!("expected {count} atom lines, file ends after {i}"),
        })?;
        let mut tok = line.split_whitespace();
        let sym = tok.next().ok_or(DataError::Parse { line: line_no, msg: "empty atom line".into() })?;
        let element = Element::from_symbol(sym).map_err(|_| DataError::Parse {
            line: line_no,
            msg: format!("unknown species {sym}"),
        })?;
        let mut pos = [0.0f64; 3];
        for p in pos.iter_mut() {
            let t = tok.next().ok_or(DataError::Parse {
                line: line_no,
                msg: "expected 3 coordinates".into(),
            })?;
            *p = t.parse().map_err(|_| DataError::Parse {
                line: line_no,
                msg: format!("non-numeric coordinate {t:?}"),
            })?;
        }
        atoms.push((element, pos));
    }
    MoleculeState::new(atoms, label)
}

fn parse_energy_tag(comment: &str) -> Option<f64> {
    comment.split_whitespace().find_map(|tok| {
        tok.strip_prefix("energy=").and_then(|v| v.parse().ok())
    })
}

/// Serialize with 17 significant digits so parse -> serialize -> parse is
/// bit-exact.
pub fn to_xyz(m: &MoleculeState) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", m.len());
    match m.label() {
        Some(e) => {
            let _ = writeln!(out, "energy={e:.16e}");
        }
        None => out.push('\n'),
    }
    for (el, p) in m.atoms() {
        let _ = writeln!(out, "{} {:.16e} {:.16e} {:.16e}", el.symbol(), p[0], p[1], p[2]);
    }
    out
}

/// Project a molecule onto its least-squares best-fit plane, express it in
/// in-plane principal-axis coordinates, and center the nuclear centroid at
/// the origin. Rejects molecules whose max out-of-plane deviation exceeds
/// `tol` angstroms.
pub fn planarize(m: &MoleculeState, tol: f64) -> Result<PlanarMolecule, DataError> {
    let n = m.len() as f64;
    let mut centroid = [0.0f64; 3];
    for (_, p) in m.atoms() {
        for k in 0..3 {
            centroid[k] += p[k] / n;
        }
    }
    // Covariance of centered positions; its eigenvectors give the plane
    // normal (smallest eigenvalue) and the in-plane principal axes.
    let mut cov = [[0.0f64; 3]; 3];
    for (_, p) in m.atoms() {
        let d = [p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]];
        for a in 0..3 {
            for b in 0..3 {
                cov[a][b] += d[a] * d[b];
            }
        }
    }
    let (eigvals, eigvecs) = jacobi_eigen_3x3(cov);
    // Order axes by descending eigenvalue: e0, e1 span the plane, e2 is the
    // normal.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eigvals[b].partial_cmp(&eigvals[a]).unwrap());
    let axis = |k: usize| -> [f64; 3] {
        let c = order[k];
        let mut v = [eigvecs[0][c], eigvecs[1][c], eigvecs[2][c]];
        // Deterministic sign: largest-magnitude component positive.
        let mut lead = 0;
        for i in 1..3 {
            if v[i].abs() > v[lead].abs() {
                lead = i;
            }
        }
        if v[lead] < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
        v
    };
    let (e0, e1, normal) = (axis(0), axis(1), axis(2));

    let mut deviation = 0.0f64;
    for (_, p) in m.atoms() {
        let d = [p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]];
        let off = d[0] * normal[0] + d[1] * normal[1] + d[2] * normal[2];
        deviation = deviation.max(off.abs());
    }
    if deviation > tol {
        return Err(DataError::NonPlanar { deviation, tol });
    }

    let mut atoms: Vec<(Element, [f64; 2])> = m
        .atoms()
        .iter()
        .map(|&(el, p)| {
            let d = [p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]];
            let u = d[0] * e0[0] + d[1] * e0[1] + d[2] * e0[2];
            let v = d[0] * e1[0] + d[1] * e1[1] + d[2] * e1[2];
            (el, [u, v])
        })
        .collect();
    // Projection leaves the 2D centroid at the origin up to rounding; pin it
    // exactly.
    let mut c2 = [0.0f64; 2];
    for (_, p) in &atoms {
        c2[0] += p[0] / n;
        c2[1] += p[1] / n;
    }
    for (_, p) in atoms.iter_mut() {
        p[0] -= c2[0];
        p[1] -= c2[1];
    }
    atoms.sort_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| a.1.partial_cmp(&b.1).expect("finite coordinates"))
    });
    Ok(PlanarMolecule { atoms, label: m.label(), deviation })
}

/// Re-run planarization on an already-planar molecule (period-two check and
/// convenience for synthetic data embedded in z=0).
pub fn planarize_2d(m: &PlanarMolecule, tol: f64) -> Result<PlanarMolecule, DataError> {
    let atoms3: Vec<(Element, [f64; 3])> = m
        .atoms()
        .iter()
        .map(|&(el, p)| (el, [p[0], p[1], 0.0]))
        .collect();
    let state = MoleculeState::new(atoms3, m.label())?;
    planarize(&state, tol)
}

/// Cyclic Jacobi eigen-decomposition of a symmetric 3x3 matrix. Returns
/// (eigenvalues, eigenvectors-as-columns).
fn jacobi_eigen_3x3(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[0.0f64; 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..50 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off < 1e-30 {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for k in 0..3 {
                let vkp = v[k][p];
                let vkq = v[k][q];
                v[k][p] = c * vkp - s * vkq;
                v[k][q] = s * vkp + c * vkq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// Energy-stratified fold assignment: molecules sorted by label, consecutive
/// blocks of `n_folds` distributed one per fold with within-block order
/// shuffled by the seeded generator.
pub fn assign_folds(d: &Dataset, n_folds: usize, seed: u64) -> Result<FoldAssignment, DataError> {
    assign_folds_labels(&d.labels()?, n_folds, seed)
}

/// Same stratified assignment from a bare label vector.
pub fn assign_folds_labels(
    labels: &[f64],
    n_folds: usize,
    seed: u64,
) -> Result<FoldAssignment, DataError> {
    if n_folds < 2 {
        return Err(DataError::TooFewFolds(n_folds));
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| {
        labels[a].partial_cmp(&labels[b]).expect("finite labels").then(a.cmp(&b))
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    for block in order.chunks(n_folds) {
        let mut folds: Vec<usize> = (0..n_folds).collect();
        folds.shuffle(&mut rng);
        for (slot, &mol) in block.iter().enumerate() {
            fold_of[mol] = folds[slot];
        }
    }
    Ok(FoldAssignment { fold_of, n_folds, seed })
}

/// Read a dataset manifest: one XYZ path per line, relative paths resolved
/// against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Dataset, DataError> {
    let text = std::fs::read_to_string(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut molecules = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let p = dir.join(line);
        let body = std::fs::read_to_string(&p)?;
        molecules.push(parse_xyz(&body)?);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(Dataset { molecules, name, provenance: path.to_path_buf() })
}
