//! Approximate 2D electron density: per-species radial profiles and
//! rasterization onto a square grid.
//!
//! The molecule is represented as a linear superposition of isolated atomic
//! densities. 3D radial profiles are condensed to 2D by matching the charge
//! of a spherical shell `4 pi r^2 rho3d(r) dr` with that of an annulus
//! `2 pi r rho2d(r) dr`, which gives `rho2d(r) = 2 r rho3d(r)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ndarray::Array2;

use crate::data::PlanarMolecule;
use crate::element::Element;
use crate::error::DensityError;
use crate::scalar::{ksum, real, Real};

/// Fraction of the nuclear charge the tabulated profile must capture.
/// Slightly above the 0.999 floor so that truncation plus quadrature error
/// stays inside the 1e-3 normalization tolerance.
const PROFILE_CHARGE_FRACTION: f64 = 0.9995;
/// Samples in a tabulated radial profile.
const PROFILE_SAMPLES: usize = 4096;

/// Tabulated 3D radial density for one species: samples of
/// `rho3d(r)` in electrons per cubic angstrom on a strictly increasing grid
/// starting at r = 0.
#[derive(Debug, Clone)]
pub struct AtomicRadialProfile<T: Real> {
    pub species: Element,
    pub r: Vec<T>,
    pub rho3d: Vec<T>,
}

impl<T: Real> AtomicRadialProfile<T> {
    /// Total charge by trapezoidal quadrature of `4 pi r^2 rho3d(r)`.
    pub fn total_charge(&self) -> T {
        let four_pi = real::<T>(4.0 * PI);
        let mut total = T::zero();
        for w in self.r.windows(2).zip(self.rho3d.windows(2)) {
            let (rw, dw) = w;
            let f0 = rw[0] * rw[0] * dw[0];
            let f1 = rw[1] * rw[1] * dw[1];
            total += (rw[1] - rw[0]) * (f0 + f1) / real(2.0);
        }
        four_pi * total
    }

    pub fn r_max(&self) -> T {
        *self.r.last().expect("non-empty profile")
    }
}

/// 2D radial density obtained by shell-to-annulus condensation, sampled on
/// the same radial grid as its 3D source.
#[derive(Debug, Clone)]
pub struct Radial2d<T: Real> {
    pub species: Element,
    pub r: Vec<T>,
    pub rho2d: Vec<T>,
}

impl<T: Real> Radial2d<T> {
    /// Total charge by trapezoidal quadrature of `2 pi r rho2d(r)`.
    pub fn total_charge(&self) -> T {
        let two_pi = real::<T>(2.0 * PI);
        let mut total = T::zero();
        for (rw, dw) in self.r.windows(2).zip(self.rho2d.windows(2)) {
            let f0 = rw[0] * dw[0];
            let f1 = rw[1] * dw[1];
            total += (rw[1] - rw[0]) * (f0 + f1) / real(2.0);
        }
        two_pi * total
    }

    pub fn r_max(&self) -> T {
        *self.r.last().expect("non-empty profile")
    }

    /// Linear interpolation on the uniform radial table; zero beyond r_max.
    pub fn eval(&self, r: T) -> T {
        let r_max = self.r_max();
        if r < T::zero() || r >= r_max {
            return T::zero();
        }
        let n = self.r.len();
        let step = r_max / real::<T>((n - 1) as f64);
        let t = r / step;
        let i = t.floor().to_f64_lossy() as usize;
        if i + 1 >= n {
            return self.rho2d[n - 1];
        }
        let frac = t - real::<T>(i as f64);
        self.rho2d[i] * (T::one() - frac) + self.rho2d[i + 1] * frac
    }
}

/// Slater-type default profile:
/// `rho3d(r) = z q^3 / (8 pi) * exp(-q r)` with decay `q = 2 / r_cov`,
/// analytically normalized to the nuclear charge z and tabulated out to the
/// radius capturing 99.9% of the charge.
pub fn default_profile<T: Real>(species: Element) -> AtomicRadialProfile<T> {
    let z = species.nuclear_charge() as f64;
    let q = slater_decay(species);
    default_profile_with_decay(species, z, q)
}

pub(crate) fn slater_decay(species: Element) -> f64 {
    2.0 / species.covalent_radius()
}

pub(crate) fn default_profile_with_decay<T: Real>(
    species: Element,
    z: f64,
    q: f64,
) -> AtomicRadialProfile<T> {
    // Cumulative charge of the Slater density inside radius r is
    // z * (1 - exp(-qr)(1 + qr + (qr)^2/2)); solve for the 0.999 point.
    let cum = |x: f64| 1.0 - (-x).exp() * (1.0 + x + x * x / 2.0);
    let mut lo = 0.0f64;
    let mut hi = 60.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cum(mid) < PROFILE_CHARGE_FRACTION {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r_max = 0.5 * (lo + hi) / q;
    let amp = z * q.powi(3) / (8.0 * PI);
    let n = PROFILE_SAMPLES;
    let mut r = Vec::with_capacity(n);
    let mut rho = Vec::with_capacity(n);
    for i in 0..n {
        let ri = r_max * i as f64 / (n - 1) as f64;
        r.push(real::<T>(ri));
        rho.push(real::<T>(amp * (-q * ri).exp()));
    }
    AtomicRadialProfile { species, r, rho3d: rho }
}

/// Shell-to-annulus condensation: `rho2d(r) = 2 r rho3d(r)`.
pub fn condense_3d_to_2d<T: Real>(p: &AtomicRadialProfile<T>) -> Radial2d<T> {
    let rho2d = p
        .r
        .iter()
        .zip(&p.rho3d)
        .map(|(&r, &d)| real::<T>(2.0) * r * d)
        .collect();
    Radial2d { species: p.species, r: p.r.clone(), rho2d }
}

/// Immutable per-species 2D profile table shared by all rasterizations.
#[derive(Debug, Clone)]
pub struct ProfileSet<T: Real> {
    profiles: BTreeMap<Element, Radial2d<T>>,
}

impl<T: Real> ProfileSet<T> {
    pub fn new(profiles: impl IntoIterator<Item = Radial2d<T>>) -> Self {
        ProfileSet { profiles: profiles.into_iter().map(|p| (p.species, p)).collect() }
    }

    /// Built-in Slater defaults for every supported species.
    pub fn slater_defaults() -> Self {
        ProfileSet::new(Element::ALL.iter().map(|&e| condense_3d_to_2d(&default_profile(e))))
    }

    pub fn get(&self, species: Element) -> Result<&Radial2d<T>, DensityError> {
        self.profiles
            .get(&species)
            .ok_or_else(|| DensityError::MissingProfile(species.symbol().to_string()))
    }

    /// Largest tabulated radius over all profiles; rasterization keeps atoms
    /// at least this far from the box edge.
    pub fn margin(&self) -> T {
        self.profiles
            .values()
            .map(|p| p.r_max())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Margin restricted to the species actually present in a molecule.
    pub fn margin_for(&self, species: impl IntoIterator<Item = Element>) -> Result<T, DensityError> {
        let mut m = T::zero();
        for s in species {
            let r = self.get(s)?.r_max();
            if r > m {
                m = r;
            }
        }
        Ok(m)
    }

    /// Replace or add a single profile (e.g. loaded from file).
    pub fn insert(&mut self, p: Radial2d<T>) {
        self.profiles.insert(p.species, p);
    }
}

/// Real-valued `2^J x 2^J` sampling of the approximate 2D density on
/// `[-a, a]^2`. Cell centers sit at `-a + (i + 1/2) * delta` so the origin
/// lies between cells and 90-degree rotations are exact array transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid<T: Real> {
    pub values: Array2<T>,
    pub box_half_width: f64,
    pub resolution: u32,
}

impl<T: Real> DensityGrid<T> {
    pub fn side(&self) -> usize {
        1usize << self.resolution
    }

    /// Grid spacing in angstroms.
    pub fn cell(&self) -> T {
        real::<T>(2.0 * self.box_half_width) / real::<T>(self.side() as f64)
    }

    /// Discrete integral `sum(values) * delta^2`, compensated.
    pub fn integral(&self) -> T {
        let d = self.cell();
        ksum(self.values.iter().copied()) * d * d
    }
}

/// Rasterize a planar molecule: superpose per-species annulus profiles on
/// the grid, then rescale globally so the discrete integral matches the
/// total nuclear charge exactly.
pub fn rasterize<T: Real>(
    m: &PlanarMolecule,
    profiles: &ProfileSet<T>,
    a: f64,
    j: u32,
) -> Result<DensityGrid<T>, DensityError> {
    let mut grid = rasterize_unnormalized(m, profiles, a, j)?;
    let target = real::<T>(m.total_charge() as f64);
    let raw = grid.integral();
    if raw > T::zero() {
        let factor = target / raw;
        grid.values.mapv_inplace(|v| v * factor);
    }
    Ok(grid)
}

/// Rasterize without the final charge rescaling; exposes the raw tabulated
/// integral for accuracy monitoring.
pub fn rasterize_unnormalized<T: Real>(
    m: &PlanarMolecule,
    profiles: &ProfileSet<T>,
    a: f64,
    j: u32,
) -> Result<DensityGrid<T>, DensityError> {
    let margin = profiles
        .margin_for(m.atoms().iter().map(|(e, _)| *e))?
        .to_f64_lossy();
    let limit = a - margin;
    for (index, (_, p)) in m.atoms().iter().enumerate() {
        if p[0].abs() > limit || p[1].abs() > limit {
            return Err(DensityError::AtomOutsideBox {
                index,
                x: p[0],
                y: p[1],
                limit,
                margin,
            });
        }
    }

    let n = 1usize << j;
    let delta = 2.0 * a / n as f64;
    let mut values = Array2::<T>::zeros((n, n));
    // Atoms are in canonical order, so this accumulation order is a pure
    // function of the atom multiset.
    for (el, p) in m.atoms() {
        let prof = profiles.get(*el)?;
        let r_max = prof.r_max().to_f64_lossy();
        let lo = |x: f64| (((x - r_max + a) / delta - 0.5).ceil().max(0.0)) as usize;
        let hi = |x: f64| ((((x + r_max + a) / delta - 0.5).floor()) as usize).min(n - 1);
        for i in lo(p[0])..=hi(p[0]) {
            let ux = -a + (i as f64 + 0.5) * delta - p[0];
            for jj in lo(p[1])..=hi(p[1]) {
                let uy = -a + (jj as f64 + 0.5) * delta - p[1];
                let r = (ux * ux + uy * uy).sqrt();
                if r < r_max {
                    values[[i, jj]] += prof.eval(real::<T>(r));
                }
            }
        }
    }

    Ok(DensityGrid { values, box_half_width: a, resolution: j })
}

/// Rescale factor that [`rasterize`] applies (target / raw discrete
/// integral); used to monitor tabulation accuracy.
pub fn rescale_factor<T: Real>(
    m: &PlanarMolecule,
    profiles: &ProfileSet<T>,
    a: f64,
    j: u32,
) -> Result<T, DensityError> {
    let grid = rasterize_unnormalized(m, profiles, a, j)?;
    let target = real::<T>(m.total_charge() as f64);
    Ok(target / grid.integral())
}

/// Parse a profile CSV: header `# species=<symbol> z=<int>`, then `r,rho3d`
/// lines with strictly increasing radii starting at zero. The profile must
/// integrate to z within 1e-3 relative.
pub fn parse_profile_csv<T: Real>(text: &str) -> Result<AtomicRadialProfile<T>, DensityError> {
    let mut species = None;
    let mut z_decl: Option<u32> = None;
    let mut r = Vec::new();
    let mut rho = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for tok in rest.split_whitespace() {
                if let Some(v) = tok.strip_prefix("species=") {
                    species = Some(Element::from_symbol(v).map_err(|_| {
                        DensityError::UnknownSpecies(v.to_string())
                    })?);
                } else if let Some(v) = tok.strip_prefix("z=") {
                    z_decl = v.parse().ok();
                }
            }
            continue;
        }
        if line.eq_ignore_ascii_case("r,rho3d") {
            continue;
        }
        let mut parts = line.split(',');
        let (rv, dv) = (parts.next(), parts.next());
        let parse = |s: Option<&str>| -> Result<f64, DensityError> {
            s.and_then(|x| x.trim().parse().ok()).ok_or(DensityError::ProfileParse {
                line: line_no,
                msg: format!("expected `r,rho3d`, got {line:?}"),
            })
        };
        let rv = parse(rv)?;
        let dv = parse(dv)?;
        if let Some(&prev) = r.last() {
            let prev: T = prev;
            if real::<T>(rv) <= prev {
                return Err(DensityError::ProfileParse {
                    line: line_no,
                    msg: "radii must be strictly increasing".into(),
                });
            }
        } else if rv != 0.0 {
            return Err(DensityError::ProfileParse {
                line: line_no,
                msg: "first radius must be 0".into(),
            });
        }
        if dv < 0.0 {
            return Err(DensityError::ProfileParse {
                line: line_no,
                msg: "rho3d must be non-negative".into(),
            });
        }
        r.push(real::<T>(rv));
        rho.push(real::<T>(dv));
    }
    let species = species.ok_or(DensityError::ProfileParse {
        line: 1,
        msg: "missing `# species=<symbol> z=<int>` header".into(),
    })?;
    let profile = AtomicRadialProfile { species, r, rho3d: rho };
    let z = z_decl.unwrap_or(species.nuclear_charge()) as f64;
    let total = profile.total_charge().to_f64_lossy();
    if (total - z).abs() / z > 1e-3 {
        return Err(DensityError::BadNormalization {
            species: species.symbol().to_string(),
            total,
            expected: z,
        });
    }
    Ok(profile)
}
