//! Run configuration: flat `key = value` text files, validated defaults,
//! and the fingerprint that guards cached features.

use std::fmt;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::error::PipelineError;

/// Tag describing the FFT convention the features depend on; changing the
/// convention must invalidate caches.
pub const FFT_CONVENTION: &str = "fft:fwd-unnorm,inv-1/n2";
/// Tag describing the built-in density profiles.
pub const PROFILE_TAG: &str = "slater:q=2/rcov,frac=0.9995";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Fourier,
    Wavelet,
    Scattering,
    Coulomb,
}

impl Representation {
    pub fn as_str(self) -> &'static str {
        match self {
            Representation::Fourier => "fourier",
            Representation::Wavelet => "wavelet",
            Representation::Scattering => "scattering",
            Representation::Coulomb => "coulomb",
        }
    }

    pub fn parse(s: &str) -> Result<Self, PipelineError> {
        match s {
            "fourier" => Ok(Representation::Fourier),
            "wavelet" => Ok(Representation::Wavelet),
            "scattering" => Ok(Representation::Scattering),
            "coulomb" => Ok(Representation::Coulomb),
            other => Err(PipelineError::ConfigValue(format!(
                "unknown representation '{other}' (expected fourier|wavelet|scattering|coulomb)"
            ))),
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub representation: Representation,
    /// Grid exponent J.
    pub resolution: u32,
    /// Angular sampling L.
    pub angles: usize,
    /// Box half-width in angstroms.
    pub box_half_width: f64,
    /// Morlet slant zeta.
    pub slant: f64,
    /// Morlet central frequency xi, rad/sample.
    pub xi: f64,
    pub n_folds: usize,
    pub seed: u64,
    pub m_max: usize,
    /// Planarity tolerance in angstroms.
    pub planar_tol: f64,
    /// Fourier annulus bins averaged (true) or summed.
    pub fourier_bin_mean: bool,
    pub krr_sigma_grid: Vec<f64>,
    pub krr_lambda_grid: Vec<f64>,
    pub krr_copies: usize,
    pub krr_noise: f64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Defaults per representation: a = 11 A, L = 8, zeta = 1/2,
    /// xi = 3 pi / 4; J = 10 except scattering at J = 9.
    pub fn defaults(representation: Representation) -> Self {
        RunConfig {
            manifest: None,
            representation,
            resolution: match representation {
                Representation::Scattering => 9,
                _ => 10,
            },
            angles: 8,
            box_half_width: 11.0,
            slant: 0.5,
            xi: 3.0 * std::f64::consts::PI / 4.0,
            n_folds: 5,
            seed: 0,
            m_max: 60,
            planar_tol: 1e-3,
            fourier_bin_mean: true,
            krr_sigma_grid: vec![1024.0, 4096.0, 16384.0, 65536.0, 262144.0],
            krr_lambda_grid: vec![1e-10, 1e-8, 1e-6, 1e-4, 1e-2],
            krr_copies: 8,
            // Row-norm jitter relative to the mean occupied-row norm; large
            // values randomize the sort and destroy the representation.
            krr_noise: 0.05,
            out_dir: PathBuf::from("out"),
        }
    }

    /// Parse a flat `key = value` file with `#` comments. The
    /// `representation` key (first occurrence) picks the default set;
    /// other keys override it.
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut rep = Representation::Scattering;
        for (idx, line) in text.lines().enumerate() {
            let line = strip_comment(line);
            if line.is_empty() {
                continue;
            }
            let (key, value) = split_kv(idx, line)?;
            if key == "representation" {
                rep = Representation::parse(value)?;
                break;
            }
        }
        let mut cfg = RunConfig::defaults(rep);
        let mut saw_resolution = false;
        for (idx, line) in text.lines().enumerate() {
            let line = strip_comment(line);
            if line.is_empty() {
                continue;
            }
            let (key, value) = split_kv(idx, line)?;
            let bad = |msg: String| PipelineError::Config { line: idx + 1, msg };
            match key {
                "manifest" => cfg.manifest = Some(PathBuf::from(value)),
                "representation" => cfg.representation = Representation::parse(value)?,
                "j" => {
                    cfg.resolution = value.parse().map_err(|_| bad(format!("bad j: {value}")))?;
                    saw_resolution = true;
                }
                "l" => {
                    cfg.angles = value.parse().map_err(|_| bad(format!("bad l: {value}")))?
                }
                "a" => {
                    cfg.box_half_width =
                        value.parse().map_err(|_| bad(format!("bad a: {value}")))?
                }
                "zeta" => {
                    cfg.slant = value.parse().map_err(|_| bad(format!("bad zeta: {value}")))?
                }
                "xi" => cfg.xi = value.parse().map_err(|_| bad(format!("bad xi: {value}")))?,
                "n_folds" => {
                    cfg.n_folds =
                        value.parse().map_err(|_| bad(format!("bad n_folds: {value}")))?
                }
                "seed" => {
                    cfg.seed = value.parse().map_err(|_| bad(format!("bad seed: {value}")))?
                }
                "m_max" => {
                    cfg.m_max = value.parse().map_err(|_| bad(format!("bad m_max: {value}")))?
                }
                "planar_tol" => {
                    cfg.planar_tol =
                        value.parse().map_err(|_| bad(format!("bad planar_tol: {value}")))?
                }
                "fourier.bin_mean" => {
                    cfg.fourier_bin_mean =
                        value.parse().map_err(|_| bad(format!("bad bool: {value}")))?
                }
                "krr.sigma_grid" => cfg.krr_sigma_grid = parse_grid(idx, value)?,
                "krr.lambda_grid" => cfg.krr_lambda_grid = parse_grid(idx, value)?,
                "krr.copies" => {
                    cfg.krr_copies =
                        value.parse().map_err(|_| bad(format!("bad krr.copies: {value}")))?
                }
                "krr.noise" => {
                    cfg.krr_noise =
                        value.parse().map_err(|_| bad(format!("bad krr.noise: {value}")))?
                }
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                other => return Err(bad(format!("unknown key '{other}'"))),
            }
        }
        // A representation line after a j line must not clobber an explicit J.
        if !saw_resolution {
            cfg.resolution = RunConfig::defaults(cfg.representation).resolution;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |msg: String| Err(PipelineError::ConfigValue(msg));
        if !(2..=12).contains(&self.resolution) {
            return err(format!("j = {} out of range [2, 12]", self.resolution));
        }
        if !self.angles.is_power_of_two() || self.angles < 2 {
            return err(format!("l = {} must be a power of two >= 2", self.angles));
        }
        if self.box_half_width <= 0.0 {
            return err(format!("a = {} must be positive", self.box_half_width));
        }
        if self.slant <= 0.0 || self.xi <= 0.0 {
            return err("zeta and xi must be positive".into());
        }
        if self.n_folds < 2 {
            return err(format!("n_folds = {} must be >= 2", self.n_folds));
        }
        if self.m_max == 0 {
            return err("m_max must be >= 1".into());
        }
        if self.planar_tol <= 0.0 {
            return err("planar_tol must be positive".into());
        }
        if self.krr_sigma_grid.iter().any(|&s| s <= 0.0) {
            return err("krr.sigma_grid entries must be positive".into());
        }
        if self.krr_lambda_grid.iter().any(|&l| l < 0.0) {
            return err("krr.lambda_grid entries must be non-negative".into());
        }
        if self.krr_copies == 0 {
            return err("krr.copies must be >= 1".into());
        }
        Ok(())
    }

    /// All keys in parseable form; `parse(dump())` round-trips.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        if let Some(m) = &self.manifest {
            out.push_str(&format!("manifest = {}\n", m.display()));
        }
        out.push_str(&format!("representation = {}\n", self.representation));
        out.push_str(&format!("j = {}\n", self.resolution));
        out.push_str(&format!("l = {}\n", self.angles));
        out.push_str(&format!("a = {}\n", self.box_half_width));
        out.push_str(&format!("zeta = {}\n", self.slant));
        out.push_str(&format!("xi = {}\n", self.xi));
        out.push_str(&format!("n_folds = {}\n", self.n_folds));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("m_max = {}\n", self.m_max));
        out.push_str(&format!("planar_tol = {}\n", self.planar_tol));
        out.push_str(&format!("fourier.bin_mean = {}\n", self.fourier_bin_mean));
        out.push_str(&format!("krr.sigma_grid = {}\n", join(&self.krr_sigma_grid)));
        out.push_str(&format!("krr.lambda_grid = {}\n", join(&self.krr_lambda_grid)));
        out.push_str(&format!("krr.copies = {}\n", self.krr_copies));
        out.push_str(&format!("krr.noise = {}\n", self.krr_noise));
        out.push_str(&format!("out_dir = {}\n", self.out_dir.display()));
        out
    }

    /// Hex digest over every parameter that affects feature values.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let payload = format!(
            "{};{};j={};l={};a={:.17e};zeta={:.17e};xi={:.17e};bin_mean={};{};",
            FFT_CONVENTION,
            self.representation,
            self.resolution,
            self.angles,
            self.box_half_width,
            self.slant,
            self.xi,
            self.fourier_bin_mean,
            PROFILE_TAG,
        );
        h.update(payload.as_bytes());
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => line[..i].trim(),
        None => line.trim(),
    }
}

fn split_kv(idx: usize, line: &str) -> Result<(&str, &str), PipelineError> {
    let (k, v) = line.split_once('=').ok_or_else(|| PipelineError::Config {
        line: idx + 1,
        msg: format!("expected 'key = value', got '{line}'"),
    })?;
    Ok((k.trim(), v.trim()))
}

fn parse_grid(idx: usize, value: &str) -> Result<Vec<f64>, PipelineError> {
    let vals: Result<Vec<f64>, _> =
        value.split(',').map(|s| s.trim().parse::<f64>()).collect();
    vals.map_err(|_| PipelineError::Config {
        line: idx + 1,
        msg: format!("bad float list: {value}"),
    })
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
