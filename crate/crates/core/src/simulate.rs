//! Synthetic data: target densities, sampling, rotation noise and error metrics.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubature::{fmt_f64, gauss_product_grid, CubatureSet};
use crate::error::{Error, Result};
use crate::harmonics::{
    spherical_transform_fn, EulerRotation, SphereDirection, SphereFunction, SphericalSpectrum,
};
use crate::noise::{sample_rotation, NoiseModel};

/// Sup-norm of the bump density used in the localization experiment. The
/// published constant is 0.7854, not π/4, and is kept as printed.
#[allow(clippy::approx_constant)]
pub const BUMP_AMPLITUDE: f64 = 1.0 / 0.7854;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TargetDensity {
    Uniform,
    /// `amplitude · exp(-scale · |x - center|²)` with the chordal distance.
    GaussianBump {
        center: SphereDirection,
        scale: f64,
        amplitude: f64,
    },
}

impl TargetDensity {
    /// The bump centred on `(0, 1, 0)` with scale 4 and amplitude `1/0.7854`.
    pub fn reference_bump() -> Self {
        TargetDensity::GaussianBump {
            center: SphereDirection::from_unit_vector([0.0, 1.0, 0.0]),
            scale: 4.0,
            amplitude: BUMP_AMPLITUDE,
        }
    }

    /// `‖f‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            TargetDensity::Uniform => 1.0 / (4.0 * PI),
            TargetDensity::GaussianBump { amplitude, .. } => *amplitude,
        }
    }

    /// Spectrum up to degree `max_degree`, by Gauss product quadrature well
    /// beyond the requested degree.
    pub fn spectrum(&self, max_degree: usize) -> Result<SphericalSpectrum> {
        let grid = gauss_product_grid(max_degree + 48);
        spherical_transform_fn(|x| density_eval(self, x), &grid, max_degree)
    }
}

impl SphereFunction for TargetDensity {
    fn eval(&self, x: &SphereDirection) -> f64 {
        density_eval(self, x)
    }
}

pub fn density_eval(target: &TargetDensity, x: &SphereDirection) -> f64 {
    match target {
        TargetDensity::Uniform => 1.0 / (4.0 * PI),
        TargetDensity::GaussianBump {
            center,
            scale,
            amplitude,
        } => {
            // |x - c|² = 2 - 2<x, c> on the unit sphere
            let d2 = (2.0 - 2.0 * x.dot(center)).max(0.0);
            amplitude * (-scale * d2).exp()
        }
    }
}

fn uniform_direction<R: Rng + ?Sized>(rng: &mut R) -> SphereDirection {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi: f64 = 2.0 * PI * rng.random::<f64>();
    SphereDirection {
        theta: z.clamp(-1.0, 1.0).acos(),
        phi,
    }
}

/// Samples from `target`. The bump uses rejection from the uniform law with
/// envelope `amplitude`; the acceptance rate is about `1/(4π · amplitude)`.
pub fn sample_density<R: Rng + ?Sized>(
    target: &TargetDensity,
    n: usize,
    rng: &mut R,
) -> Vec<SphereDirection> {
    match target {
        TargetDensity::Uniform => (0..n).map(|_| uniform_direction(rng)).collect(),
        TargetDensity::GaussianBump { amplitude, .. } => {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let x = uniform_direction(rng);
                let u: f64 = rng.random();
                if u * amplitude <= density_eval(target, &x) {
                    out.push(x);
                }
            }
            out
        }
    }
}

pub fn sample_rotations<R: Rng + ?Sized>(
    model: &NoiseModel,
    n: usize,
    rng: &mut R,
) -> Result<Vec<EulerRotation>> {
    (0..n).map(|_| sample_rotation(model, rng)).collect()
}

/// `Z_i = ε_i X_i`.
pub fn apply_rotations(
    x: &[SphereDirection],
    rotations: &[EulerRotation],
) -> Result<Vec<SphereDirection>> {
    if x.len() != rotations.len() {
        return Err(Error::Precondition(format!(
            "{} points but {} rotations",
            x.len(),
            rotations.len()
        )));
    }
    Ok(x.iter().zip(rotations).map(|(p, g)| g.apply(p)).collect())
}

/// Draws one rotation per point from `model` and applies it.
pub fn apply_noise<R: Rng + ?Sized>(
    x: &[SphereDirection],
    model: &NoiseModel,
    rng: &mut R,
) -> Result<Vec<SphereDirection>> {
    let rotations = sample_rotations(model, x.len(), rng)?;
    apply_rotations(x, &rotations)
}

/// Grid point maximizing `f`; the lowest index wins ties.
pub fn peak_locate<F: SphereFunction + Sync>(f: &F, grid: &CubatureSet) -> Result<SphereDirection> {
    if grid.is_empty() {
        return Err(Error::Precondition("empty grid".into()));
    }
    let values: Vec<f64> = grid.points().par_iter().map(|x| f.eval(x)).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    Ok(grid.points()[best])
}

/// Quadrature `L^p` distance between `f` and `target`; `p = ∞` takes the
/// maximum over the grid.
pub fn lp_error<F: SphereFunction + Sync>(
    f: &F,
    target: &TargetDensity,
    p: f64,
    grid: &CubatureSet,
) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain(format!("p = {p} must be >= 1")));
    }
    let diffs: Vec<f64> = grid
        .points()
        .par_iter()
        .map(|x| (f.eval(x) - density_eval(target, x)).abs())
        .collect();
    if p.is_infinite() {
        return Ok(diffs.into_iter().fold(0.0, f64::max));
    }
    let s: f64 = diffs
        .iter()
        .zip(grid.weights())
        .map(|(d, w)| w * d.powf(p))
        .sum();
    Ok(s.powf(1.0 / p))
}

/// Writes `theta,phi` rows at full precision.
pub fn write_samples_csv<W: Write>(points: &[SphereDirection], mut out: W) -> Result<()> {
    writeln!(out, "theta,phi")?;
    for p in points {
        writeln!(out, "{},{}", fmt_f64(p.theta), fmt_f64(p.phi))?;
    }
    Ok(())
}
