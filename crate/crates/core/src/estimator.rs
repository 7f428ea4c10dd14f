//! Deconvolution estimators: the SVD spectral estimate, needlet coefficient
//! estimates, level thresholds and hard thresholding.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{
    lm_count, lm_index, sph_harm_table, SphereDirection, SphereFunction, SphericalSpectrum,
};
use crate::needlet::{NeedletCoefficients, NeedletExpansion, NeedletFrame};
use crate::noise::NoiseInverse;

/// Observations summed sequentially before partial sums are combined.
const CHUNK: usize = 512;

/// `floor(½ log₂(N / ln N))`.
pub fn max_level_for(n: usize) -> usize {
    if n < 3 {
        return 0;
    }
    let nf = n as f64;
    (0.5 * (nf / nf.ln()).log2()).floor().max(0.0) as usize
}

/// Resolution level for `n` observations: the rate-optimal level, capped so
/// the finest cubature has no more points than there are observations.
pub fn select_j(n: usize) -> usize {
    let by_rate = max_level_for(n);
    let mut by_points = None;
    let mut j = 0usize;
    while 12usize.saturating_mul(1usize << (2 * j).min(62)) <= n && j < 31 {
        by_points = Some(j);
        j += 1;
    }
    by_points.map_or(0, |p| p.min(by_rate))
}

/// `t_N = sqrt(ln N / N)`.
pub fn t_n(n: usize) -> f64 {
    let nf = n as f64;
    (nf.ln() / nf).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub n: usize,
    pub max_level: usize,
    pub kappa: f64,
    /// Bound `M` on the sup-norm of the target density.
    pub sup_bound: f64,
    pub t_n: f64,
}

impl EstimatorConfig {
    pub fn new(n: usize, max_level: usize, kappa: f64, sup_bound: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("N = {n} must be >= 2")));
        }
        if max_level > max_level_for(n) {
            return Err(Error::Config(format!(
                "J = {max_level} exceeds {} for N = {n}",
                max_level_for(n)
            )));
        }
        if kappa.is_nan() || kappa < 0.0 {
            return Err(Error::Config(format!("kappa = {kappa} must be >= 0")));
        }
        if !(sup_bound > 0.0 && sup_bound.is_finite()) {
            return Err(Error::Config(format!("M = {sup_bound} must be positive")));
        }
        Ok(Self {
            n,
            max_level,
            kappa,
            sup_bound,
            t_n: t_n(n),
        })
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        Self::new(self.n, self.max_level, kappa, self.sup_bound)
    }

    /// `κ t_N σ`.
    pub fn cutoff(&self, sigma: f64) -> f64 {
        if self.kappa == 0.0 {
            0.0
        } else {
            self.kappa * self.t_n * sigma
        }
    }
}

/// `(1/N) Σ_u conj(Y^l_m(Z_u))`, the empirical spectrum of the observations.
pub fn observation_spectrum(z: &[SphereDirection], max_degree: usize) -> Result<SphericalSpectrum> {
    if z.is_empty() {
        return Err(Error::EmptySample);
    }
    let k = lm_count(max_degree);
    let partials: Vec<Vec<Complex64>> = z
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![Complex64::new(0.0, 0.0); k];
            for p in chunk {
                for (a, y) in acc.iter_mut().zip(sph_harm_table(max_degree, p)) {
                    *a += y.conj();
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Complex64::new(0.0, 0.0); k];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    let n = z.len() as f64;
    total.iter_mut().for_each(|c| *c /= n);
    SphericalSpectrum::from_coeffs(max_degree, total)
}

fn check_inverse(noise_inv: &NoiseInverse, max_degree: usize) -> Result<()> {
    if noise_inv.max_degree() < max_degree {
        return Err(Error::MissingDegree(noise_inv.max_degree() + 1));
    }
    Ok(())
}

/// `f^{l,N}_m = Σ_n (f^l_ε)^{-1}_{mn} (1/N) Σ_u conj(Y^l_n(Z_u))`.
///
/// Degrees excluded by the inverse's condition guard are zero.
pub fn svd_coeffs(
    z: &[SphereDirection],
    noise_inv: &NoiseInverse,
    max_degree: usize,
) -> Result<SphericalSpectrum> {
    check_inverse(noise_inv, max_degree)?;
    let obs = observation_spectrum(z, max_degree)?;
    Ok(deconvolve_spectrum(&obs, noise_inv))
}

/// Applies the per-degree inverses to an observation spectrum.
pub fn deconvolve_spectrum(obs: &SphericalSpectrum, noise_inv: &NoiseInverse) -> SphericalSpectrum {
    let lmax = obs.max_degree().min(noise_inv.max_degree());
    let mut out = SphericalSpectrum::zeros(lmax);
    for l in 0..=lmax {
        let Some(inv) = noise_inv.block(l) else {
            continue;
        };
        let li = l as i64;
        let h = obs.degree(l);
        for m in -li..=li {
            let r = (m + li) as usize;
            out.set(l, m, (0..2 * l + 1).map(|c| inv[(r, c)] * h[c]).sum());
        }
    }
    out
}

/// `β̂_{jη} = Σ_{lm} f^{l,N}_m conj(ψ^{lm}_{jη})`, through the SVD spectrum.
pub fn needlet_coeff_estimates(
    frame: &NeedletFrame,
    z: &[SphereDirection],
    noise_inv: &NoiseInverse,
) -> Result<NeedletCoefficients> {
    let spec = svd_coeffs(z, noise_inv, frame.max_degree())?;
    frame.analysis(&spec.resized(frame.max_degree() + 1))
}

/// `v_n = Σ_m conj(ψ^{lm}) (f^l_ε)^{-1}_{mn}` for every degree of the atom's
/// band, so that `β̂ = (1/N) Σ_u Σ_{l,n} v_n conj(Y^l_n(Z_u))`.
fn atom_vectors(
    frame: &NeedletFrame,
    j: usize,
    eta: usize,
    noise_inv: &NoiseInverse,
) -> Result<Vec<(usize, Vec<Complex64>)>> {
    let atom = frame.atom(j, eta)?;
    let band = frame.band(j);
    check_inverse(noise_inv, *band.end())?;
    let table = sph_harm_table(*band.end(), &atom.center);
    let sw = atom.weight.sqrt();
    let mut out = Vec::new();
    for l in band {
        let Some(inv) = noise_inv.block(l) else {
            continue;
        };
        let li = l as i64;
        let scale = sw * frame.window_value(j, l);
        let v = (0..2 * l + 1)
            .map(|c| {
                (0..2 * l + 1)
                    .map(|r| table[lm_index(l, r as i64 - li)] * inv[(r, c)])
                    .sum::<Complex64>()
                    * scale
            })
            .collect();
        out.push((l, v));
    }
    Ok(out)
}

/// `β̂` computed atom by atom, summing over observations last. Slow; the
/// factorized [`needlet_coeff_estimates`] gives the same numbers.
pub fn needlet_coeff_estimates_direct(
    frame: &NeedletFrame,
    z: &[SphereDirection],
    noise_inv: &NoiseInverse,
) -> Result<NeedletCoefficients> {
    if z.is_empty() {
        return Err(Error::EmptySample);
    }
    let lmax = frame.max_degree();
    check_inverse(noise_inv, lmax)?;
    let tables: Vec<Vec<Complex64>> = z.par_iter().map(|p| sph_harm_table(lmax, p)).collect();
    let n = z.len() as f64;
    let levels = (0..=frame.max_level())
        .map(|j| {
            (0..frame.atom_count(j))
                .into_par_iter()
                .map(|eta| {
                    let vecs = atom_vectors(frame, j, eta, noise_inv)?;
                    let mut total = Complex64::new(0.0, 0.0);
                    for y in &tables {
                        for (l, v) in &vecs {
                            let li = *l as i64;
                            for (c, vn) in v.iter().enumerate() {
                                total += vn * y[lm_index(*l, c as i64 - li)].conj();
                            }
                        }
                    }
                    Ok((total / n).re)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NeedletCoefficients::from_levels(levels))
}

/// `σ_{jη} = M (Σ_{l,n} |Σ_m conj(ψ^{lm}_{jη}) (f^l_ε)^{-1}_{mn}|²)^{1/2}`.
pub fn sigma(
    frame: &NeedletFrame,
    j: usize,
    eta: usize,
    noise_inv: &NoiseInverse,
    sup_bound: f64,
) -> Result<f64> {
    let vecs = atom_vectors(frame, j, eta, noise_inv)?;
    let s: f64 = vecs
        .iter()
        .flat_map(|(_, v)| v.iter())
        .map(|c| c.norm_sqr())
        .sum();
    Ok(sup_bound * s.sqrt())
}

/// `σ` for every atom of the frame.
pub fn sigmas(
    frame: &NeedletFrame,
    noise_inv: &NoiseInverse,
    sup_bound: f64,
) -> Result<NeedletCoefficients> {
    let levels = (0..=frame.max_level())
        .map(|j| {
            (0..frame.atom_count(j))
                .into_par_iter()
                .map(|eta| sigma(frame, j, eta, noise_inv, sup_bound))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NeedletCoefficients::from_levels(levels))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Survivor {
    pub j: usize,
    pub eta: usize,
    pub theta: f64,
    pub phi: f64,
    pub beta: f64,
}

/// Hard-thresholded needlet expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdedExpansion {
    pub config: EstimatorConfig,
    pub constant: f64,
    pub survivors: Vec<Survivor>,
    pub excluded_degrees: Vec<usize>,
}

impl ThresholdedExpansion {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Keeps `β̂_{jη}` when `|β̂_{jη}| ≥ κ t_N σ_{jη}`. Atoms whose whole band
/// was excluded (`σ = 0`) carry no information and are dropped.
pub fn threshold(
    beta: &NeedletCoefficients,
    sigma: &NeedletCoefficients,
    frame: &NeedletFrame,
    noise_inv: &NoiseInverse,
    config: &EstimatorConfig,
) -> Result<ThresholdedExpansion> {
    if beta.max_level() != frame.max_level() || sigma.max_level() != frame.max_level() {
        return Err(Error::Precondition(
            "coefficient tables do not match the frame".into(),
        ));
    }
    let mut survivors = Vec::new();
    for (j, eta, b) in beta.iter() {
        let s = sigma.get(j, eta);
        if s > 0.0 && b.abs() >= config.cutoff(s) {
            let atom = frame.atom(j, eta)?;
            survivors.push(Survivor {
                j,
                eta,
                theta: atom.center.theta,
                phi: atom.center.phi,
                beta: b,
            });
        }
    }
    let band_top = frame.max_degree();
    Ok(ThresholdedExpansion {
        config: *config,
        constant: 1.0 / (4.0 * PI),
        survivors,
        excluded_degrees: noise_inv
            .excluded()
            .iter()
            .copied()
            .filter(|&l| l <= band_top)
            .collect(),
    })
}

/// `x ↦ 1/(4π) + Σ β̂_{jη} ψ_{jη}(x)` over the survivors.
pub fn reconstruct(
    expansion: &ThresholdedExpansion,
    frame: &NeedletFrame,
) -> Result<NeedletExpansion> {
    let terms = expansion
        .survivors
        .iter()
        .map(|s| Ok((frame.atom(s.j, s.eta)?, s.beta)))
        .collect::<Result<Vec<_>>>()?;
    Ok(NeedletExpansion::from_terms(
        frame,
        expansion.constant,
        terms,
    ))
}

pub fn survival_counts(expansion: &ThresholdedExpansion) -> Vec<usize> {
    let mut counts = vec![0; expansion.config.max_level + 1];
    for s in &expansion.survivors {
        counts[s.j] += 1;
    }
    counts
}

/// The truncated harmonic series `Σ_{l ≤ L} Σ_m f_m Y^l_m`, real part.
#[derive(Debug, Clone)]
pub struct TruncatedSeries {
    spectrum: SphericalSpectrum,
}

impl TruncatedSeries {
    /// Imaginary part of the synthesis at `x`; zero up to rounding for
    /// spectra of real functions.
    pub fn imaginary_part(&self, x: &SphereDirection) -> f64 {
        self.spectrum.evaluate(x).im
    }
}

impl SphereFunction for TruncatedSeries {
    fn eval(&self, x: &SphereDirection) -> f64 {
        self.spectrum.evaluate(x).re
    }
}

pub fn svd_density_estimate(
    spectrum: &SphericalSpectrum,
    truncation: usize,
) -> Result<TruncatedSeries> {
    if truncation > spectrum.max_degree() {
        return Err(Error::Precondition(format!(
            "truncation {truncation} above spectrum degree {}",
            spectrum.max_degree()
        )));
    }
    Ok(TruncatedSeries {
        spectrum: spectrum.resized(truncation),
    })
}

/// Coefficients and thresholds for one sample, reusable across `κ`.
#[derive(Debug, Clone)]
pub struct NeedletEstimate {
    pub beta: NeedletCoefficients,
    pub sigma: NeedletCoefficients,
}

impl NeedletEstimate {
    pub fn compute(
        frame: &NeedletFrame,
        z: &[SphereDirection],
        noise_inv: &NoiseInverse,
        sup_bound: f64,
    ) -> Result<Self> {
        Ok(Self {
            beta: needlet_coeff_estimates(frame, z, noise_inv)?,
            sigma: sigmas(frame, noise_inv, sup_bound)?,
        })
    }

    pub fn threshold(
        &self,
        frame: &NeedletFrame,
        noise_inv: &NoiseInverse,
        config: &EstimatorConfig,
    ) -> Result<ThresholdedExpansion> {
        threshold(&self.beta, &self.sigma, frame, noise_inv, config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cubature::gauss_product_grid;
    use crate::needlet::WindowFunction;
    use crate::noise::{spectrum, NoiseModel, DEFAULT_CONDITION_LIMIT};
    use crate::simulate::{apply_noise, sample_density, TargetDensity};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn frame(j: usize) -> NeedletFrame {
        NeedletFrame::new(j, WindowFunction::smooth_bump())
    }

    fn z_axis_inverse(a: f64, lmax: usize) -> NoiseInverse {
        NoiseInverse::from_spectrum(
            &spectrum(&NoiseModel::ZAxisUniform { a }, lmax).unwrap(),
            DEFAULT_CONDITION_LIMIT,
        )
    }

    #[test]
    fn level_selection() {
        assert_eq!(select_j(1500), 3);
        assert_eq!(select_j(12), 0);
        assert_eq!(select_j(1_000_000), 8);
        assert_eq!(select_j(2), 0);
        assert_eq!(max_level_for(1_000_000), 8);
    }

    #[test]
    fn config_rules() {
        let c = EstimatorConfig::new(1500, 3, 0.3, 1.2732).unwrap();
        assert!((c.t_n - (1500f64.ln() / 1500.0).sqrt()).abs() < 1e-14);
        assert!(EstimatorConfig::new(1500, 4, 0.3, 1.0).is_err());
        assert!(EstimatorConfig::new(1500, 3, -1.0, 1.0).is_err());
        assert!(EstimatorConfig::new(1500, 3, 1.0, 0.0).is_err());
    }

    #[test]
    fn uniform_constant_term_is_exact() {
        let z = sample_density(&TargetDensity::Uniform, 37, &mut rng(1));
        let s = svd_coeffs(&z, &NoiseInverse::identity(4), 4).unwrap();
        assert!((s.get(0, 0).re - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
        assert!(svd_coeffs(&[], &NoiseInverse::identity(4), 4).is_err());
    }

    #[test]
    fn noiseless_svd_coefficients_match_exact_spectrum() {
        let bump = TargetDensity::reference_bump();
        let exact = bump.spectrum(2).unwrap();
        let mass = exact.get(0, 0).re * (4.0 * PI).sqrt();
        let n = 100_000;
        let z = sample_density(&bump, n, &mut rng(2));
        let s = svd_coeffs(&z, &NoiseInverse::identity(2), 2).unwrap();
        for m in -2i64..=2 {
            let var: f64 = z
                .iter()
                .map(|p| crate::harmonics::sph_harm(2, m, p).unwrap().norm_sqr())
                .sum::<f64>()
                / n as f64;
            let se = ((var - s.get(2, m).norm_sqr()) / n as f64).sqrt();
            assert!(
                (s.get(2, m) - exact.get(2, m) / mass).norm() <= 3.0 * se,
                "m={m}"
            );
        }
    }

    #[test]
    fn svd_coefficients_unbiased_under_noise() {
        let bump = TargetDensity::reference_bump();
        let exact = bump.spectrum(1).unwrap();
        let mass = exact.get(0, 0).re * (4.0 * PI).sqrt();
        let a = PI / 8.0;
        let inv = z_axis_inverse(a, 1);
        let model = NoiseModel::ZAxisUniform { a };
        let runs: Vec<SphericalSpectrum> = (0..200u64)
            .into_par_iter()
            .map(|seed| {
                let x = sample_density(&bump, 2000, &mut rng(1000 + seed));
                let z = apply_noise(&x, &model, &mut rng(5000 + seed)).unwrap();
                svd_coeffs(&z, &inv, 1).unwrap()
            })
            .collect();
        for m in [0i64, 1] {
            let vals: Vec<Complex64> = runs.iter().map(|s| s.get(1, m)).collect();
            let mean = vals.iter().sum::<Complex64>() / 200.0;
            let var = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / 199.0;
            let se = (var / 200.0).sqrt();
            assert!((mean - exact.get(1, m) / mass).norm() <= 3.0 * se, "m={m}");
        }
    }

    #[test]
    fn factorized_and_direct_estimates_agree() {
        let f = frame(2);
        let bump = TargetDensity::reference_bump();
        let x = sample_density(&bump, 300, &mut rng(3));
        let model = NoiseModel::ZAxisUniform { a: PI / 8.0 };
        let z = apply_noise(&x, &model, &mut rng(4)).unwrap();
        let inv = z_axis_inverse(PI / 8.0, f.max_degree());
        let a = needlet_coeff_estimates(&f, &z, &inv).unwrap();
        let b = needlet_coeff_estimates_direct(&f, &z, &inv).unwrap();
        for ((_, _, u), (_, _, v)) in a.iter().zip(b.iter()) {
            assert!((u - v).abs() < 1e-12, "{u} vs {v}");
        }
        // same with a dense empirical inverse
        let mut r = rng(5);
        let rot = crate::simulate::sample_rotations(&model, 400, &mut r).unwrap();
        let dense: Vec<_> = rot
            .iter()
            .map(|g| crate::harmonics::EulerRotation::new(g.phi, 0.2, 0.1))
            .collect();
        let emp = spectrum(&NoiseModel::Empirical { rotations: dense }, f.max_degree()).unwrap();
        let inv = NoiseInverse::from_spectrum(&emp, DEFAULT_CONDITION_LIMIT);
        let a = needlet_coeff_estimates(&f, &z, &inv).unwrap();
        let b = needlet_coeff_estimates_direct(&f, &z, &inv).unwrap();
        for ((_, _, u), (_, _, v)) in a.iter().zip(b.iter()) {
            assert!((u - v).abs() < 1e-12 * (1.0 + u.abs()), "{u} vs {v}");
        }
    }

    #[test]
    fn estimates_are_real() {
        let f = frame(2);
        let model = NoiseModel::ZAxisUniform { a: PI / 4.0 };
        let x = sample_density(&TargetDensity::reference_bump(), 500, &mut rng(6));
        let mut r = rng(7);
        let rot = crate::simulate::sample_rotations(&model, 500, &mut r).unwrap();
        let z = crate::simulate::apply_rotations(&x, &rot).unwrap();
        let emp = spectrum(&NoiseModel::Empirical { rotations: rot }, f.max_degree()).unwrap();
        let inv = NoiseInverse::from_spectrum(&emp, DEFAULT_CONDITION_LIMIT);
        let spec = svd_coeffs(&z, &inv, f.max_degree()).unwrap();
        let complex = f
            .analysis_complex(&spec.resized(f.max_degree() + 1))
            .unwrap();
        for level in complex {
            for c in level {
                assert!(c.im.abs() <= 1e-9 * (1.0 + c.re.abs()));
            }
        }
    }

    #[test]
    fn uniform_noiseless_estimates_are_small() {
        // β̂ is a mean of zero-mean terms with variance ≤ ‖ψ‖²/(4π)
        let f = frame(2);
        let n = 2000;
        let inv = NoiseInverse::identity(f.max_degree());
        let mut total = 0;
        let mut within = 0;
        for seed in 0..5 {
            let z = sample_density(&TargetDensity::Uniform, n, &mut rng(40 + seed));
            let beta = needlet_coeff_estimates(&f, &z, &inv).unwrap();
            for (j, eta, b) in beta.iter() {
                let sd = (f.atom_norm_squared(j, eta).unwrap() / (4.0 * PI)).sqrt();
                total += 1;
                if b.abs() <= 5.0 * sd / (n as f64).sqrt() {
                    within += 1;
                }
            }
        }
        assert!(within as f64 >= 0.99 * total as f64);
    }

    #[test]
    fn sigma_reduces_to_norm_without_noise() {
        let f = frame(3);
        let inv = NoiseInverse::identity(f.max_degree());
        for (j, eta) in [(0, 3), (2, 17), (3, 400)] {
            let s = sigma(&f, j, eta, &inv, 1.7).unwrap();
            let expected = 1.7 * f.atom_norm_squared(j, eta).unwrap().sqrt();
            assert!((s - expected).abs() < 1e-12);
            assert_eq!(sigma(&f, j, eta, &inv, 3.4).unwrap(), 2.0 * s);
        }
        assert!(matches!(
            sigma(&f, 3, 0, &NoiseInverse::identity(10), 1.0),
            Err(Error::MissingDegree(11))
        ));
    }

    #[test]
    fn sigma_grows_with_laplace_ill_posedness() {
        let f = frame(5);
        let spec = spectrum(&NoiseModel::RotationalLaplace { rho2: 1.0 }, f.max_degree()).unwrap();
        let inv = NoiseInverse::from_spectrum(&spec, DEFAULT_CONDITION_LIMIT);
        let s: Vec<f64> = (2..=5)
            .map(|j| sigma(&f, j, 0, &inv, 1.0).unwrap())
            .collect();
        let slope = (s[2] / s[0]).log2() / 2.0;
        assert!((1.3..=2.7).contains(&slope), "slope {slope}");
    }

    #[test]
    fn threshold_extremes() {
        let f = frame(2);
        let inv = NoiseInverse::identity(f.max_degree());
        let z = sample_density(&TargetDensity::reference_bump(), 200, &mut rng(8));
        let est = NeedletEstimate::compute(&f, &z, &inv, 1.2732).unwrap();
        let cfg = EstimatorConfig::new(200, 1, 0.0, 1.2732).unwrap();
        let f1 = frame(1);
        let est1 = NeedletEstimate::compute(&f1, &z, &inv, 1.2732).unwrap();
        let all = est1.threshold(&f1, &inv, &cfg).unwrap();
        assert_eq!(all.survivors.len(), f1.total_atoms());
        let none = est1
            .threshold(&f1, &inv, &cfg.with_kappa(1e300).unwrap())
            .unwrap();
        assert!(none.survivors.is_empty());
        assert_eq!(survival_counts(&none), vec![0, 0]);
        let rec = reconstruct(&none, &f1).unwrap();
        let x = SphereDirection::new(0.4, 2.0).unwrap();
        assert!((rec.eval(&x) - 0.0795775).abs() < 1e-7);
        assert!(est.beta.max_level() == 2);
    }

    #[test]
    fn single_survivor_reconstruction() {
        let f = frame(2);
        let cfg = EstimatorConfig::new(1500, 2, 0.3, 1.0).unwrap();
        let atom = f.atom(2, 11).unwrap();
        let exp = ThresholdedExpansion {
            config: cfg,
            constant: 1.0 / (4.0 * PI),
            survivors: vec![Survivor {
                j: 2,
                eta: 11,
                theta: atom.center.theta,
                phi: atom.center.phi,
                beta: 0.37,
            }],
            excluded_degrees: vec![],
        };
        let rec = reconstruct(&exp, &f).unwrap();
        let pts = sample_density(&TargetDensity::Uniform, 10, &mut rng(9));
        for p in &pts {
            let expected = 1.0 / (4.0 * PI) + 0.37 * f.atom_eval(2, 11, p).unwrap();
            assert!((rec.eval(p) - expected).abs() < 1e-12);
        }
        let json: serde_json::Value = serde_json::from_str(&exp.to_json().unwrap()).unwrap();
        assert_eq!(json["survivors"][0]["eta"], 11);
        assert_eq!(survival_counts(&exp), vec![0, 0, 1]);
    }

    #[test]
    fn pooled_sample_linearity() {
        let f = frame(2);
        let inv = z_axis_inverse(PI / 8.0, f.max_degree());
        let z1 = sample_density(&TargetDensity::reference_bump(), 700, &mut rng(10));
        let z2 = sample_density(&TargetDensity::reference_bump(), 300, &mut rng(11));
        let pooled: Vec<_> = z1.iter().chain(&z2).copied().collect();
        let b1 = needlet_coeff_estimates(&f, &z1, &inv).unwrap();
        let b2 = needlet_coeff_estimates(&f, &z2, &inv).unwrap();
        let bp = needlet_coeff_estimates(&f, &pooled, &inv).unwrap();
        for (((_, _, p), (_, _, u)), (_, _, v)) in bp.iter().zip(b1.iter()).zip(b2.iter()) {
            assert!((p - (0.7 * u + 0.3 * v)).abs() < 1e-12);
        }
    }

    #[test]
    fn excluded_degrees_drop_atoms() {
        // a = π makes every even order singular, so band {2, 3} is excluded
        let f = frame(1);
        let inv = z_axis_inverse(PI, f.max_degree());
        assert_eq!(inv.excluded(), &[2, 3]);
        let z = sample_density(&TargetDensity::Uniform, 100, &mut rng(12));
        let est = NeedletEstimate::compute(&f, &z, &inv, 1.0).unwrap();
        assert!(est.sigma.level(1).iter().all(|s| *s == 0.0));
        let cfg = EstimatorConfig::new(100, 1, 0.0, 1.0).unwrap();
        let exp = est.threshold(&f, &inv, &cfg).unwrap();
        assert_eq!(survival_counts(&exp), vec![12, 0]);
        assert_eq!(exp.excluded_degrees, vec![2, 3]);
    }

    #[test]
    fn truncated_series_estimates() {
        let s =
            SphericalSpectrum::from_coeffs(0, vec![Complex64::new(1.0 / (4.0 * PI).sqrt(), 0.0)])
                .unwrap();
        let est = svd_density_estimate(&s.resized(3), 3).unwrap();
        assert!(
            (est.eval(&SphereDirection::new(1.0, 1.0).unwrap()) - 1.0 / (4.0 * PI)).abs() < 1e-15
        );
        assert!(svd_density_estimate(&s, 2).is_err());

        // oracle: dense synthesis at L = 64
        let bump = TargetDensity::reference_bump();
        let full = bump.spectrum(64).unwrap();
        let dense = svd_density_estimate(&full, 64).unwrap();
        let trunc = svd_density_estimate(&full, 16).unwrap();
        let grid = gauss_product_grid(24);
        let err = grid
            .points()
            .iter()
            .map(|x| (trunc.eval(x) - dense.eval(x)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-3, "sup error {err}");
        let dense_err = grid
            .points()
            .iter()
            .map(|x| (dense.eval(x) - bump.eval(x)).abs())
            .fold(0.0, f64::max);
        assert!(dense_err < 1e-10);
        for x in sample_density(&TargetDensity::Uniform, 20, &mut rng(13)) {
            assert!(trunc.imaginary_part(&x).abs() <= 1e-10);
        }
    }

    #[test]
    fn noiseless_reconstruction_improves_with_n() {
        use crate::simulate::lp_error;
        let f = frame(3);
        let inv = NoiseInverse::identity(f.max_degree());
        let bump = TargetDensity::reference_bump();
        let grid = gauss_product_grid(40);
        for seed in 0..3 {
            let err = |n: usize| {
                let z = sample_density(&bump, n, &mut rng(200 + seed * 7 + n as u64));
                let est = NeedletEstimate::compute(&f, &z, &inv, 1.2732).unwrap();
                let cfg = EstimatorConfig::new(n, 3, 0.0, 1.2732).unwrap();
                let rec = reconstruct(&est.threshold(&f, &inv, &cfg).unwrap(), &f).unwrap();
                lp_error(&rec, &bump, 2.0, &grid).unwrap()
            };
            assert!(err(100_000) < err(10_000));
        }
    }

    fn fixed_estimate() -> (NeedletFrame, NoiseInverse, NeedletEstimate) {
        let f = frame(2);
        let inv = z_axis_inverse(PI / 8.0, f.max_degree());
        let z = apply_noise(
            &sample_density(&TargetDensity::Uniform, 400, &mut rng(14)),
            &NoiseModel::ZAxisUniform { a: PI / 8.0 },
            &mut rng(15),
        )
        .unwrap();
        let est = NeedletEstimate::compute(&f, &z, &inv, 1.2732).unwrap();
        (f, inv, est)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn keep_sets_are_nested(k1 in 0.0f64..1.0, k2 in 0.0f64..1.0) {
            let (f, inv, est) = fixed_estimate();
            let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
            let cfg = EstimatorConfig::new(400, 2, lo, 1.2732).unwrap();
            let small = est.threshold(&f, &inv, &cfg.with_kappa(hi).unwrap()).unwrap();
            let large = est.threshold(&f, &inv, &cfg).unwrap();
            for s in &small.survivors {
                prop_assert!(large.survivors.iter().any(|t| t.j == s.j && t.eta == s.eta));
            }
            let a = survival_counts(&small);
            let b = survival_counts(&large);
            prop_assert!(a.iter().zip(&b).all(|(x, y)| x <= y));
        }

        #[test]
        fn thresholding_is_idempotent(k in 0.0f64..1.0) {
            let (f, inv, est) = fixed_estimate();
            let cfg = EstimatorConfig::new(400, 2, k, 1.2732).unwrap();
            let once = est.threshold(&f, &inv, &cfg).unwrap();
            let mut kept = NeedletCoefficients::zeros(&f);
            for s in &once.survivors {
                kept.set(s.j, s.eta, s.beta);
            }
            let twice = threshold(&kept, &est.sigma, &f, &inv, &cfg).unwrap();
            prop_assert_eq!(once.survivors, twice.survivors);
        }
    }
}
