//! Rotational Fourier spectra of noise densities on SO(3).
//!
//! The spectrum of a density `f_ε` is the family of `(2l+1)×(2l+1)` matrices
//! `f^l_{ε,mn} = E[D^l_{mn}(ε)]`. Convolution with a density on the sphere is
//! then blockwise: `(f_ε * f)^l_m = Σ_n f^l_{ε,mn} f^l_n`.

use std::fmt;
use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::harmonics::{wigner_big_d_matrices, EulerRotation, SphericalSpectrum};

/// Condition-number ceiling above which a degree is treated as non-invertible.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e6;

/// Samples summed sequentially before partial sums are combined.
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    /// Rotation about the z axis by an angle uniform on `[0, a]`.
    ZAxisUniform { a: f64 },
    /// `f^l_{mn} = (1 + ρ² l(l+1))^{-1} δ_{mn}`.
    RotationalLaplace { rho2: f64 },
    /// `f^l_{mn} = (sin((l+1/2)θ) / ((2l+1) sin(θ/2)))^p δ_{mn}`.
    Rosenthal { theta: f64, p: f64 },
    /// Observed rotations; the spectrum is the sample mean of `D^l(ε_j)`.
    Empirical { rotations: Vec<EulerRotation> },
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::ZAxisUniform { a } => write!(f, "z-axis-uniform(a={a})"),
            NoiseModel::RotationalLaplace { rho2 } => write!(f, "rotational-laplace(rho2={rho2})"),
            NoiseModel::Rosenthal { theta, p } => write!(f, "rosenthal(theta={theta}, p={p})"),
            NoiseModel::Empirical { rotations } => write!(f, "empirical(n={})", rotations.len()),
        }
    }
}

/// `g_m(a) = E[e^{-imφ}]` for `φ ~ U[0, a]`.
pub fn z_axis_uniform_factor(m: i64, a: f64) -> Complex64 {
    if m == 0 || a == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let x = m as f64 * a;
    (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -x)) / Complex64::new(0.0, x)
}

impl NoiseModel {
    /// Diagonal entry `(m, m)` at degree `l` for the closed-form models.
    fn diagonal(&self, l: usize, m: i64) -> Option<Complex64> {
        let lf = l as f64;
        match self {
            NoiseModel::ZAxisUniform { a } => Some(z_axis_uniform_factor(m, *a)),
            NoiseModel::RotationalLaplace { rho2 } => {
                Some(Complex64::new(1.0 / (1.0 + rho2 * lf * (lf + 1.0)), 0.0))
            }
            NoiseModel::Rosenthal { theta, p } => {
                let ratio = ((lf + 0.5) * theta).sin() / ((2.0 * lf + 1.0) * (theta / 2.0).sin());
                Some(Complex64::new(ratio.powf(*p), 0.0))
            }
            NoiseModel::Empirical { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::ZAxisUniform { a } if !(a.is_finite() && *a >= 0.0) => {
                Err(Error::Domain(format!("uniform support {a} must be >= 0")))
            }
            NoiseModel::RotationalLaplace { rho2 } if rho2.is_nan() || *rho2 <= 0.0 => {
                Err(Error::Domain(format!("rho² = {rho2} must be > 0")))
            }
            NoiseModel::Rosenthal { theta, p }
                if !(*theta > 0.0 && *theta <= std::f64::consts::PI && *p > 0.0) =>
            {
                Err(Error::Domain(format!(
                    "Rosenthal needs θ in (0, π] and p > 0 (got θ={theta}, p={p})"
                )))
            }
            NoiseModel::Empirical { rotations } if rotations.is_empty() => Err(Error::EmptySample),
            _ => Ok(()),
        }
    }

    pub fn is_generative(&self) -> bool {
        matches!(self, NoiseModel::ZAxisUniform { .. })
    }
}

/// Per-degree noise matrices `f^l_ε`, entry `(m + l, n + l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationalSpectrum {
    blocks: Vec<DMatrix<Complex64>>,
}

impl RotationalSpectrum {
    pub fn from_blocks(blocks: Vec<DMatrix<Complex64>>) -> Result<Self> {
        for (l, b) in blocks.iter().enumerate() {
            if b.nrows() != 2 * l + 1 || b.ncols() != 2 * l + 1 {
                return Err(Error::Precondition(format!(
                    "block {l} is {}×{}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(Self { blocks })
    }

    /// Identity blocks: no noise.
    pub fn identity(max_degree: usize) -> Self {
        Self {
            blocks: (0..=max_degree)
                .map(|l| DMatrix::identity(2 * l + 1, 2 * l + 1))
                .collect(),
        }
    }

    pub fn max_degree(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn block(&self, l: usize) -> Result<&DMatrix<Complex64>> {
        self.blocks.get(l).ok_or(Error::MissingDegree(l))
    }

    pub fn entry(&self, l: usize, m: i64, n: i64) -> Complex64 {
        let li = l as i64;
        self.blocks[l][((m + li) as usize, (n + li) as usize)]
    }

    /// Blockwise product `(f_ε f)^l_m = Σ_n f^l_{ε,mn} f^l_n`.
    pub fn apply(&self, spectrum: &SphericalSpectrum) -> SphericalSpectrum {
        let lmax = spectrum.max_degree().min(self.max_degree());
        let mut out = SphericalSpectrum::zeros(lmax);
        for l in 0..=lmax {
            let li = l as i64;
            let f = spectrum.degree(l);
            for m in -li..=li {
                let row = (m + li) as usize;
                let v: Complex64 = (0..2 * l + 1)
                    .map(|c| self.blocks[l][(row, c)] * f[c])
                    .sum();
                out.set(l, m, v);
            }
        }
        out
    }

    /// JSON export: per-degree row-major matrices of `[re, im]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        let blocks: Vec<_> = self
            .blocks
            .iter()
            .enumerate()
            .map(|(l, b)| {
                let rows: Vec<Vec<[f64; 2]>> = (0..b.nrows())
                    .map(|r| {
                        (0..b.ncols())
                            .map(|c| [b[(r, c)].re, b[(r, c)].im])
                            .collect()
                    })
                    .collect();
                json!({ "l": l, "rows": rows })
            })
            .collect();
        json!({ "max_degree": self.max_degree(), "blocks": blocks })
    }
}

fn is_diagonal(b: &DMatrix<Complex64>) -> bool {
    (0..b.nrows()).all(|r| (0..b.ncols()).all(|c| r == c || b[(r, c)] == Complex64::new(0.0, 0.0)))
}

/// Singular values of a block, descending.
fn singular_values(b: &DMatrix<Complex64>) -> Vec<f64> {
    let mut s: Vec<f64> = if is_diagonal(b) {
        (0..b.nrows()).map(|i| b[(i, i)].norm()).collect()
    } else {
        b.clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect()
    };
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectrum of a noise model up to degree `max_degree`.
pub fn spectrum(model: &NoiseModel, max_degree: usize) -> Result<RotationalSpectrum> {
    model.validate()?;
    if let NoiseModel::Empirical { rotations } = model {
        return Ok(empirical_spectrum(rotations, max_degree));
    }
    let blocks = (0..=max_degree)
        .map(|l| {
            let li = l as i64;
            let mut b = DMatrix::zeros(2 * l + 1, 2 * l + 1);
            for m in -li..=li {
                let i = (m + li) as usize;
                b[(i, i)] = model.diagonal(l, m).expect("closed-form model");
            }
            b
        })
        .collect();
    Ok(RotationalSpectrum { blocks })
}

/// `f^{l,N}_{ε,mn} = (1/N) Σ_j D^l_{mn}(ε_j)`.
///
/// Partial sums over fixed chunks are combined in order, so the result does
/// not depend on the thread count.
pub fn empirical_spectrum(rotations: &[EulerRotation], max_degree: usize) -> RotationalSpectrum {
    let zero = || -> Vec<DMatrix<Complex64>> {
        (0..=max_degree)
            .map(|l| DMatrix::zeros(2 * l + 1, 2 * l + 1))
            .collect()
    };
    let partials: Vec<Vec<DMatrix<Complex64>>> = rotations
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = zero();
            for g in chunk {
                for (a, d) in acc.iter_mut().zip(wigner_big_d_matrices(max_degree, g)) {
                    *a += d;
                }
            }
            acc
        })
        .collect();
    let mut blocks = zero();
    for part in partials {
        for (b, p) in blocks.iter_mut().zip(part) {
            *b += p;
        }
    }
    let n = rotations.len().max(1) as f64;
    for b in &mut blocks {
        b.unscale_mut(n);
    }
    RotationalSpectrum { blocks }
}

/// Inverse of block `l`, refusing blocks whose condition number exceeds `cond_limit`.
pub fn inverse_block(
    spec: &RotationalSpectrum,
    l: usize,
    cond_limit: f64,
) -> Result<DMatrix<Complex64>> {
    let b = spec.block(l)?;
    let s = singular_values(b);
    let (smax, smin) = (s[0], *s.last().unwrap());
    let condition = if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    };
    if !condition.is_finite() || condition > cond_limit {
        return Err(Error::IllConditioned {
            degree: l,
            condition,
        });
    }
    if is_diagonal(b) {
        let mut inv = DMatrix::zeros(b.nrows(), b.ncols());
        for i in 0..b.nrows() {
            inv[(i, i)] = b[(i, i)].inv();
        }
        return Ok(inv);
    }
    b.clone().try_inverse().ok_or(Error::IllConditioned {
        degree: l,
        condition: f64::INFINITY,
    })
}

/// Largest singular value of block `l`.
pub fn op_norm(spec: &RotationalSpectrum, l: usize) -> Result<f64> {
    Ok(singular_values(spec.block(l)?)[0])
}

/// Inverted noise blocks for every degree, with degrees failing the condition
/// guard recorded as excluded.
#[derive(Debug, Clone)]
pub struct NoiseInverse {
    blocks: Vec<Option<DMatrix<Complex64>>>,
    excluded: Vec<usize>,
}

impl NoiseInverse {
    pub fn from_spectrum(spec: &RotationalSpectrum, cond_limit: f64) -> Self {
        let blocks: Vec<Option<DMatrix<Complex64>>> = (0..=spec.max_degree())
            .map(|l| inverse_block(spec, l, cond_limit).ok())
            .collect();
        let excluded = blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.is_none())
            .map(|(l, _)| l)
            .collect();
        Self { blocks, excluded }
    }

    pub fn identity(max_degree: usize) -> Self {
        Self::from_spectrum(
            &RotationalSpectrum::identity(max_degree),
            DEFAULT_CONDITION_LIMIT,
        )
    }

    pub fn max_degree(&self) -> usize {
        self.blocks.len() - 1
    }

    /// `None` for degrees excluded by the condition guard.
    pub fn block(&self, l: usize) -> Option<&DMatrix<Complex64>> {
        self.blocks.get(l).and_then(Option::as_ref)
    }

    pub fn excluded(&self) -> &[usize] {
        &self.excluded
    }
}

/// Least-squares slope `ν` of `log ‖(f^l_ε)^{-1}‖_op` against `log l`, with
/// the RMS residual of the fit.
pub fn dip_estimate(
    spec: &RotationalSpectrum,
    degrees: RangeInclusive<usize>,
) -> Result<(f64, f64)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for l in degrees {
        if l == 0 {
            continue;
        }
        let inv = inverse_block(spec, l, DEFAULT_CONDITION_LIMIT)?;
        xs.push((l as f64).ln());
        ys.push(singular_values(&inv)[0].ln());
    }
    if xs.len() < 3 {
        return Err(Error::Precondition(format!(
            "need at least 3 positive degrees, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok((slope, (rss / n).sqrt()))
}

/// One rotation `ε ~ model`. Only the z-axis model is generative.
pub fn sample_rotation<R: Rng + ?Sized>(model: &NoiseModel, rng: &mut R) -> Result<EulerRotation> {
    match model {
        NoiseModel::ZAxisUniform { a } => {
            let u: f64 = rng.random();
            Ok(EulerRotation::about_z(u * a))
        }
        other => Err(Error::UnsupportedSampling(other.to_string())),
    }
}
