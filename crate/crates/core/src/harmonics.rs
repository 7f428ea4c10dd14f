//! Spherical and rotational harmonics.
//!
//! Conventions used throughout the crate:
//!
//! * directions are `(theta, phi)` = (colatitude, longitude), with unit vector
//!   `(cos phi sin theta, sin phi sin theta, cos theta)`;
//! * the surface measure has total mass `4π`;
//! * `Y^l_m = (-1)^m sqrt((2l+1)/4π (l-m)!/(l+m)!) P^l_m(cos θ) e^{imφ}` where
//!   `P^l_m` carries no Condon–Shortley phase, and `Y^l_{-m} = (-1)^m conj(Y^l_m)`;
//! * rotations are `g = u(φ) a(θ) u(ψ)` (z-y-z, active), and
//!   `D^l_{mn}(g) = e^{-i(mφ + nψ)} d^l_{mn}(θ)`, which gives
//!   `conj(Y^l_m(g x)) = Σ_n D^l_{mn}(g) conj(Y^l_n(x))`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cubature::CubatureSet;
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// A point on the unit sphere in colatitude/longitude form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereDirection {
    pub theta: f64,
    pub phi: f64,
}

impl SphereDirection {
    /// Validates the colatitude and wraps the longitude into `[0, 2π)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite direction ({theta}, {phi})"
            )));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::Domain(format!("colatitude {theta} outside [0, π]")));
        }
        Ok(Self {
            theta,
            phi: wrap_longitude(phi),
        })
    }

    pub fn north_pole() -> Self {
        Self {
            theta: 0.0,
            phi: 0.0,
        }
    }

    pub fn from_unit_vector(v: [f64; 3]) -> Self {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let z = (v[2] / norm).clamp(-1.0, 1.0);
        let theta = z.acos();
        let phi = if v[0] == 0.0 && v[1] == 0.0 {
            0.0
        } else {
            wrap_longitude(v[1].atan2(v[0]))
        };
        Self { theta, phi }
    }

    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [cp * st, sp * st, ct]
    }

    /// Euclidean inner product of the two unit vectors, clamped to `[-1, 1]`.
    pub fn dot(&self, other: &SphereDirection) -> f64 {
        let a = self.unit_vector();
        let b = other.unit_vector();
        (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0)
    }

    /// The antipodal direction.
    pub fn antipode(&self) -> Self {
        Self {
            theta: PI - self.theta,
            phi: wrap_longitude(self.phi + PI),
        }
    }
}

pub(crate) fn wrap_longitude(phi: f64) -> f64 {
    let w = phi.rem_euclid(TWO_PI);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= TWO_PI {
        0.0
    } else {
        w
    }
}

/// A real-valued function on the sphere.
pub trait SphereFunction {
    fn eval(&self, x: &SphereDirection) -> f64;
}

impl<F: Fn(&SphereDirection) -> f64> SphereFunction for F {
    fn eval(&self, x: &SphereDirection) -> f64 {
        self(x)
    }
}

/// Euler angles of a rotation, `g = u(phi) a(theta) u(psi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerRotation {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl EulerRotation {
    pub fn new(phi: f64, theta: f64, psi: f64) -> Self {
        Self { phi, theta, psi }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// Rotation by `angle` about the z axis.
    pub fn about_z(angle: f64) -> Self {
        Self::new(angle, 0.0, 0.0)
    }

    /// The 3×3 rotation matrix `u(φ) a(θ) u(ψ)`, acting on column vectors.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        mat_mul(
            &mat_mul(&rot_z(self.phi), &rot_y(self.theta)),
            &rot_z(self.psi),
        )
    }

    pub fn apply(&self, x: &SphereDirection) -> SphereDirection {
        let m = self.matrix();
        let v = x.unit_vector();
        let r = [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ];
        if self.theta == 0.0 {
            // pure z rotation: keep the colatitude bit-exact
            return SphereDirection {
                theta: x.theta,
                phi: wrap_longitude(x.phi + self.phi + self.psi),
            };
        }
        SphereDirection::from_unit_vector(r)
    }
}

fn rot_z(a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn rot_y(a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Flat index of `(l, m)` in a triangular harmonic array.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    l * l + (l as i64 + m) as usize
}

/// Number of `(l, m)` pairs with `l <= max_degree`.
#[inline]
pub fn lm_count(max_degree: usize) -> usize {
    (max_degree + 1) * (max_degree + 1)
}

/// Complex spherical Fourier coefficients `f^l_m`, `0 <= l <= L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalSpectrum {
    max_degree: usize,
    coeffs: Vec<Complex64>,
}

impl SphericalSpectrum {
    pub fn zeros(max_degree: usize) -> Self {
        Self {
            max_degree,
            coeffs: vec![Complex64::new(0.0, 0.0); lm_count(max_degree)],
        }
    }

    pub fn from_coeffs(max_degree: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != lm_count(max_degree) {
            return Err(Error::Precondition(format!(
                "expected {} coefficients for degree {max_degree}, got {}",
                lm_count(max_degree),
                coeffs.len()
            )));
        }
        Ok(Self { max_degree, coeffs })
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn get(&self, l: usize, m: i64) -> Complex64 {
        if l > self.max_degree || m.unsigned_abs() as usize > l {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[lm_index(l, m)]
    }

    pub fn set(&mut self, l: usize, m: i64, value: Complex64) {
        assert!(
            l <= self.max_degree && m.unsigned_abs() as usize <= l,
            "(l={l}, m={m}) out of range"
        );
        self.coeffs[lm_index(l, m)] = value;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// The coefficients of degree `l`, ordered `m = -l..=l`.
    pub fn degree(&self, l: usize) -> &[Complex64] {
        &self.coeffs[lm_index(l, -(l as i64))..=lm_index(l, l as i64)]
    }

    /// Copy with a different maximum degree, zero-padding or truncating.
    pub fn resized(&self, max_degree: usize) -> Self {
        let mut out = Self::zeros(max_degree);
        let n = lm_count(max_degree.min(self.max_degree));
        out.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        out
    }

    /// Largest violation of `f^l_{-m} = (-1)^m conj(f^l_m)`.
    pub fn reality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for l in 0..=self.max_degree {
            for m in 0..=l as i64 {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let d = self.get(l, -m) - self.get(l, m).conj() * sign;
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// Harmonic synthesis `Σ f^l_m Y^l_m(x)`.
    pub fn evaluate(&self, x: &SphereDirection) -> Complex64 {
        let table = sph_harm_table(self.max_degree, x);
        self.coeffs.iter().zip(&table).map(|(c, y)| c * y).sum()
    }

    /// Harmonic synthesis truncated to degrees `<= max_degree`.
    pub fn evaluate_truncated(&self, x: &SphereDirection, max_degree: usize) -> Complex64 {
        let lmax = max_degree.min(self.max_degree);
        let table = sph_harm_table(lmax, x);
        self.coeffs[..lm_count(lmax)]
            .iter()
            .zip(&table)
            .map(|(c, y)| c * y)
            .sum()
    }
}

/// Associated Legendre function `P^l_m(x)` without the Condon–Shortley phase.
///
/// Upward three-term recursion in `l` for fixed `m`. Values grow like
/// `(2m-1)!!`, so this unnormalized form overflows for `m` beyond ~150; use
/// [`sph_harm_table`] for normalized values at high degree.
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> Result<f64> {
    if m > l {
        return Err(Error::Domain(format!("order m={m} exceeds degree l={l}")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("argument {x} outside [-1, 1]")));
    }
    let s = ((1.0 - x) * (1.0 + x)).sqrt();
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= (2 * k - 1) as f64 * s;
    }
    if l == m {
        return Ok(pmm);
    }
    let mut prev = pmm;
    let mut cur = x * (2 * m + 1) as f64 * pmm;
    for ll in (m + 2)..=l {
        let next = ((2 * ll - 1) as f64 * x * cur - (ll + m - 1) as f64 * prev) / (ll - m) as f64;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Legendre polynomials `P_0(t), ..., P_lmax(t)`.
pub fn legendre_series(lmax: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(lmax + 1);
    out.push(1.0);
    if lmax >= 1 {
        out.push(t);
    }
    for l in 2..=lmax {
        let lf = l as f64;
        let next = ((2.0 * lf - 1.0) * t * out[l - 1] - (lf - 1.0) * out[l - 2]) / lf;
        out.push(next);
    }
    out
}

/// Legendre kernel `L_l(t) = (2l+1)/(4π) P_l(t)`, the reproducing kernel of
/// degree-`l` harmonics: `L_l(<x,y>) = Σ_m Y^l_m(x) conj(Y^l_m(y))`.
pub fn legendre_kernel(l: usize, t: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("argument {t} outside [-1, 1]")));
    }
    Ok((2 * l + 1) as f64 / (4.0 * PI) * legendre_series(l, t)[l])
}

/// Normalized associated Legendre values `sqrt((2l+1)/4π (l-m)!/(l+m)!) P^l_m(x)`
/// for `0 <= m <= l <= lmax`, no Condon–Shortley phase, stored at `lm_index(l, m)`.
fn normalized_legendre_table(lmax: usize, x: f64, s: f64) -> Vec<f64> {
    let mut table = vec![0.0; lm_count(lmax)];
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        table[lm_index(m, m as i64)] = pmm;
        if m == lmax {
            break;
        }
        let mut prev = pmm;
        let mut cur = ((2 * m + 3) as f64).sqrt() * x * pmm;
        table[lm_index(m + 1, m as i64)] = cur;
        let mf = m as f64;
        let mut a_prev = ((2 * m + 3) as f64).sqrt();
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let next = a * (x * cur - prev / a_prev);
            prev = cur;
            cur = next;
            a_prev = a;
            table[lm_index(l, m as i64)] = cur;
        }
    }
    table
}

/// All spherical harmonics `Y^l_m(x)` for `l <= lmax`, indexed by [`lm_index`].
pub fn sph_harm_table(lmax: usize, x: &SphereDirection) -> Vec<Complex64> {
    let (s, c) = x.theta.sin_cos();
    let plm = normalized_legendre_table(lmax, c, s);
    let mut out = vec![Complex64::new(0.0, 0.0); lm_count(lmax)];
    for m in 0..=lmax as i64 {
        let phase = Complex64::from_polar(1.0, m as f64 * x.phi);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        for l in m as usize..=lmax {
            let y = phase * (sign * plm[lm_index(l, m)]);
            out[lm_index(l, m)] = y;
            if m > 0 {
                out[lm_index(l, -m)] = y.conj() * sign;
            }
        }
    }
    out
}

/// Spherical harmonic `Y^l_m(x)`.
pub fn sph_harm(l: usize, m: i64, x: &SphereDirection) -> Result<Complex64> {
    if m.unsigned_abs() as usize > l {
        return Err(Error::Domain(format!("order m={m} exceeds degree l={l}")));
    }
    Ok(sph_harm_table(l, x)[lm_index(l, m)])
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Closed-form `d^l_{mn}(β)` at `l = max(|m|, |n|)`, where the sum over `s`
/// collapses to a single term. Evaluated in log space.
fn wigner_d_seed(l: i64, m: i64, n: i64, beta: f64) -> f64 {
    let (sh, ch) = (beta / 2.0).sin_cos();
    let pref = 0.5
        * (ln_factorial((l + m) as usize)
            + ln_factorial((l - m) as usize)
            + ln_factorial((l + n) as usize)
            + ln_factorial((l - n) as usize));
    let mut total = 0.0;
    let s_min = 0.max(n - m);
    let s_max = (l + n).min(l - m);
    for s in s_min..=s_max {
        let denom = ln_factorial((l + n - s) as usize)
            + ln_factorial(s as usize)
            + ln_factorial((m - n + s) as usize)
            + ln_factorial((l - m - s) as usize);
        let pc = 2 * l + n - m - 2 * s;
        let ps = m - n + 2 * s;
        let sign = if (m - n + s).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
        let mag = if (pc > 0 && ch == 0.0) || (ps > 0 && sh == 0.0) {
            0.0
        } else {
            let mut lg = pref - denom;
            if pc > 0 {
                lg += pc as f64 * ch.abs().ln();
            }
            if ps > 0 {
                lg += ps as f64 * sh.abs().ln();
            }
            let mut v = lg.exp();
            if pc % 2 == 1 && ch < 0.0 {
                v = -v;
            }
            if ps % 2 == 1 && sh < 0.0 {
                v = -v;
            }
            v
        };
        total += sign * mag;
    }
    total
}

/// Runs the upward recursion in `l` for fixed `(m, n)`, calling `emit(l, d)` for
/// every `l` in `max(|m|,|n|)..=lmax`.
fn wigner_d_recurse(lmax: i64, m: i64, n: i64, beta: f64, mut emit: impl FnMut(i64, f64)) {
    let l0 = m.abs().max(n.abs());
    if l0 > lmax {
        return;
    }
    let c = beta.cos();
    let mut prev = 0.0;
    let mut cur = wigner_d_seed(l0, m, n, beta);
    emit(l0, cur);
    let (mf, nf) = (m as f64, n as f64);
    for l in l0..lmax {
        let lf = l as f64;
        let next = if l == 0 {
            c
        } else {
            let a = (2.0 * lf + 1.0) * (lf * (lf + 1.0) * c - mf * nf);
            let b = (lf + 1.0) * ((lf * lf - mf * mf) * (lf * lf - nf * nf)).max(0.0).sqrt();
            let den = lf * (((lf + 1.0).powi(2) - mf * mf) * ((lf + 1.0).powi(2) - nf * nf)).sqrt();
            (a * cur - b * prev) / den
        };
        prev = cur;
        cur = next;
        emit(l + 1, cur);
    }
}

/// Wigner small-d function `d^l_{mn}(β)`, the generalized Legendre function
/// `P^l_{mn}(cos β)`. `d^l_{mn}(0) = δ_{mn}`.
pub fn wigner_small_d(l: usize, m: i64, n: i64, beta: f64) -> Result<f64> {
    check_orders(l, m, n)?;
    if beta == 0.0 {
        return Ok(if m == n { 1.0 } else { 0.0 });
    }
    let mut out = 0.0;
    wigner_d_recurse(l as i64, m, n, beta, |ll, d| {
        if ll == l as i64 {
            out = d;
        }
    });
    Ok(out)
}

fn check_orders(l: usize, m: i64, n: i64) -> Result<()> {
    if m.unsigned_abs() as usize > l || n.unsigned_abs() as usize > l {
        return Err(Error::Domain(format!(
            "orders (m={m}, n={n}) exceed degree l={l}"
        )));
    }
    Ok(())
}

/// `d^l(β)` matrices for every `l <= lmax`, entry `(m + l, n + l)`.
pub fn wigner_small_d_matrices(lmax: usize, beta: f64) -> Vec<DMatrix<f64>> {
    let mut out: Vec<DMatrix<f64>> = (0..=lmax)
        .map(|l| DMatrix::zeros(2 * l + 1, 2 * l + 1))
        .collect();
    if beta == 0.0 {
        for (l, block) in out.iter_mut().enumerate() {
            block.fill_with_identity();
            debug_assert_eq!(block.nrows(), 2 * l + 1);
        }
        return out;
    }
    let lm = lmax as i64;
    for m in -lm..=lm {
        for n in -lm..=lm {
            wigner_d_recurse(lm, m, n, beta, |l, d| {
                out[l as usize][((m + l) as usize, (n + l) as usize)] = d;
            });
        }
    }
    out
}

/// Rotational harmonic `D^l_{mn}(g) = e^{-i(mφ + nψ)} d^l_{mn}(θ)`.
#[allow(non_snake_case)]
pub fn wigner_D(l: usize, m: i64, n: i64, g: &EulerRotation) -> Result<Complex64> {
    let d = wigner_small_d(l, m, n, g.theta)?;
    Ok(Complex64::from_polar(
        d,
        -(m as f64 * g.phi + n as f64 * g.psi),
    ))
}

/// `D^l(g)` matrices for every `l <= lmax`, entry `(m + l, n + l)`.
pub fn wigner_big_d_matrices(lmax: usize, g: &EulerRotation) -> Vec<DMatrix<Complex64>> {
    let small = wigner_small_d_matrices(lmax, g.theta);
    small
        .into_iter()
        .enumerate()
        .map(|(l, d)| {
            let li = l as i64;
            DMatrix::from_fn(2 * l + 1, 2 * l + 1, |r, c| {
                let m = r as i64 - li;
                let n = c as i64 - li;
                let v = d[(r, c)];
                if v == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::from_polar(v, -(m as f64 * g.phi + n as f64 * g.psi))
                }
            })
        })
        .collect()
}

/// Spherical Fourier transform by cubature: `f^l_m = Σ_k w_k f(x_k) conj(Y^l_m(x_k))`.
///
/// The grid must integrate polynomials of degree `2L` exactly.
pub fn spherical_transform(
    values: &[f64],
    grid: &CubatureSet,
    max_degree: usize,
) -> Result<SphericalSpectrum> {
    if values.len() != grid.len() {
        return Err(Error::Precondition(format!(
            "{} samples for a grid of {} points",
            values.len(),
            grid.len()
        )));
    }
    match grid.exact_degree() {
        Some(d) if d >= 2 * max_degree => {}
        _ => {
            return Err(Error::Precondition(format!(
                "grid is not exact to degree {} (needed for L = {max_degree})",
                2 * max_degree
            )))
        }
    }
    let mut spec = SphericalSpectrum::zeros(max_degree);
    for ((x, w), f) in grid.points().iter().zip(grid.weights()).zip(values) {
        if *f == 0.0 {
            continue;
        }
        let table = sph_harm_table(max_degree, x);
        for (c, y) in spec.coeffs.iter_mut().zip(&table) {
            *c += y.conj() * (w * f);
        }
    }
    Ok(spec)
}

/// [`spherical_transform`] of a function evaluated on the grid.
pub fn spherical_transform_fn(
    f: impl Fn(&SphereDirection) -> f64,
    grid: &CubatureSet,
    max_degree: usize,
) -> Result<SphericalSpectrum> {
    let values: Vec<f64> = grid.points().iter().map(f).collect();
    spherical_transform(&values, grid, max_degree)
}
