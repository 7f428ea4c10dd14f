//! Point sets and weights on the sphere.
//!
//! Two schemes are provided. [`equal_area_points`] returns the pixel centres of
//! the ring-ordered equal-area pixelization with `N_side = 2^j`; its uniform
//! weights integrate low-degree polynomials only approximately.
//! [`gauss_product_grid`] is a Gauss–Legendre × equispaced product rule that is
//! exact for every spherical polynomial of degree `<= 2L + 1`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harmonics::SphereDirection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CubatureScheme {
    EqualArea,
    GaussProduct,
}

#[derive(Debug, Clone)]
pub struct CubatureSet {
    scheme: CubatureScheme,
    /// resolution level `j` for equal-area sets, maximum degree `L` for product grids
    level_or_degree: usize,
    points: Vec<SphereDirection>,
    weights: Vec<f64>,
}

impl CubatureSet {
    pub fn scheme(&self) -> CubatureScheme {
        self.scheme
    }

    pub fn level_or_degree(&self) -> usize {
        self.level_or_degree
    }

    pub fn points(&self) -> &[SphereDirection] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Highest polynomial degree integrated exactly, if the rule is exact at all.
    pub fn exact_degree(&self) -> Option<usize> {
        match self.scheme {
            CubatureScheme::GaussProduct => Some(2 * self.level_or_degree + 1),
            CubatureScheme::EqualArea => None,
        }
    }

    pub fn integrate(&self, f: impl Fn(&SphereDirection) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum()
    }

    /// Writes `theta,phi,weight` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["theta", "phi", "weight"])?;
        for (x, w) in self.points.iter().zip(&self.weights) {
            wtr.write_record([fmt_f64(x.theta), fmt_f64(x.phi), fmt_f64(*w)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// 17 significant digits, round-trip exact.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Number of equal-area pixels at resolution level `j`: `12 · 4^j`.
pub fn equal_area_count(level: usize) -> usize {
    12 << (2 * level)
}

/// Ring-ordered equal-area pixel centres with `N_side = 2^level`, each carrying
/// weight `4π / (12 · 4^level)`.
pub fn equal_area_points(level: usize) -> CubatureSet {
    let nside = 1usize << level;
    let ns = nside as f64;
    let npix = equal_area_count(level);
    let weight = 4.0 * PI / npix as f64;
    let mut points = Vec::with_capacity(npix);

    let mut push_ring = |z: f64, count: usize, offset: f64| {
        let theta = z.clamp(-1.0, 1.0).acos();
        for k in 0..count {
            let phi = 2.0 * PI * (k as f64 + offset) / count as f64;
            points.push(SphereDirection { theta, phi });
        }
    };

    // north polar cap
    for i in 1..nside {
        let z = 1.0 - (i * i) as f64 / (3.0 * ns * ns);
        push_ring(z, 4 * i, 0.5);
    }
    // equatorial belt
    for i in nside..=3 * nside {
        let z = 4.0 / 3.0 - 2.0 * i as f64 / (3.0 * ns);
        let shift = if (i - nside).is_multiple_of(2) {
            0.5
        } else {
            0.0
        };
        push_ring(z, 4 * nside, shift);
    }
    // south polar cap, mirror of the north
    for i in (1..nside).rev() {
        let z = -(1.0 - (i * i) as f64 / (3.0 * ns * ns));
        push_ring(z, 4 * i, 0.5);
    }
    debug_assert_eq!(points.len(), npix);

    CubatureSet {
        scheme: CubatureScheme::EqualArea,
        level_or_degree: level,
        weights: vec![weight; points.len()],
        points,
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `(L + 1)` Gauss–Legendre colatitudes × `(2L + 2)` equispaced longitudes.
pub fn gauss_product_grid(max_degree: usize) -> CubatureSet {
    let (nodes, gw) = gauss_legendre(max_degree + 1);
    let nphi = 2 * max_degree + 2;
    let dphi = 2.0 * PI / nphi as f64;
    let mut points = Vec::with_capacity(nodes.len() * nphi);
    let mut weights = Vec::with_capacity(nodes.len() * nphi);
    // descending z, so colatitude runs north to south
    for (z, w) in nodes.iter().zip(&gw).rev() {
        let theta = z.acos();
        for k in 0..nphi {
            points.push(SphereDirection {
                theta,
                phi: k as f64 * dphi,
            });
            weights.push(w * dphi);
        }
    }
    CubatureSet {
        scheme: CubatureScheme::GaussProduct,
        level_or_degree: max_degree,
        points,
        weights,
    }
}

/// Great-circle distance `arccos <x, y>` in `[0, π]`.
pub fn geodesic_distance(x: &SphereDirection, y: &SphereDirection) -> f64 {
    let a = x.unit_vector();
    let b = y.unit_vector();
    // atan2 of |a×b| and a·b stays accurate near 0 and π
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let s = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let c = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    s.atan2(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::{legendre_kernel, lm_index, sph_harm, sph_harm_table};
    use num_complex::Complex64;

    #[test]
    fn equal_area_counts_and_weights() {
        let s0 = equal_area_points(0);
        assert_eq!(s0.len(), 12);
        assert!((s0.weights()[0] - PI / 3.0).abs() < 1e-15);
        assert_eq!(equal_area_points(3).len(), 768);
        let s2 = equal_area_points(2);
        assert!((s2.integrate(|_| 1.0) - 4.0 * PI).abs() < 1e-12);
        for j in 0..5 {
            let s = equal_area_points(j);
            assert_eq!(s.len(), 12 * 4usize.pow(j as u32));
            assert!((s.weights().iter().sum::<f64>() - 4.0 * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_area_has_no_duplicates() {
        for j in 0..4 {
            let s = equal_area_points(j);
            let mut min = f64::INFINITY;
            for a in 0..s.len() {
                for b in (a + 1)..s.len() {
                    min = min.min(geodesic_distance(&s.points()[a], &s.points()[b]));
                }
            }
            assert!(min > 0.0, "level {j}");
        }
    }

    fn worst_equal_area_error(j: usize) -> f64 {
        let s = equal_area_points(j);
        let lmax = 1usize << (j + 1);
        let mut acc = vec![Complex64::new(0.0, 0.0); (lmax + 1) * (lmax + 1)];
        for (x, w) in s.points().iter().zip(s.weights()) {
            for (a, y) in acc.iter_mut().zip(sph_harm_table(lmax, x)) {
                *a += y * *w;
            }
        }
        (1..=lmax)
            .flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m)))
            .map(|(l, m)| acc[lm_index(l, m)].norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn equal_area_integrates_low_harmonics_approximately() {
        let tol = 1e-2 * (4.0 * PI).sqrt();
        for j in 3..=5usize {
            let err = worst_equal_area_error(j);
            assert!(err <= tol, "j={j} err={err}");
        }
        // the coarsest pixelizations miss the bound; worst cases are zonal
        // (l=2 at j=0, l=4 at j=1 and j=2)
        for (j, measured) in [(0, 0.4404), (1, 0.2521), (2, 0.05514)] {
            let err = worst_equal_area_error(j);
            assert!((err - measured).abs() < 1e-4, "j={j} err={err}");
        }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn equal_area_matches_reference_pixel_centres() {
        // first pixels of the ring scheme at N_side = 1, 2, 4
        let reference = [
            (
                0,
                [0.841_068_67, 0.841_068_67, 1.570_796_33],
                [0.785_398_16, 2.356_194_49, 0.0],
            ),
            (
                1,
                [0.411_137_86, 0.411_137_86, 0.841_068_67],
                [0.785_398_16, 2.356_194_49, 0.392_699_08],
            ),
            (
                2,
                [0.204_480_20, 0.204_480_20, 0.411_137_86],
                [0.785_398_16, 2.356_194_49, 0.392_699_08],
            ),
        ];
        for (j, th, ph) in reference {
            let s = equal_area_points(j);
            for (k, idx) in [0usize, 1, 4].into_iter().enumerate() {
                let p = s.points()[idx];
                assert!(
                    (p.theta - th[k]).abs() < 1e-8 && (p.phi - ph[k]).abs() < 1e-8,
                    "j={j} idx={idx}"
                );
            }
        }
    }

    #[test]
    fn gauss_legendre_small_rules() {
        let (x, w) = gauss_legendre(3);
        assert!((x[2] - 0.774_596_669_241_483_4).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(40);
        // exact for x^78
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(78)).sum();
        assert!((s - 2.0 / 79.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_grid_orthonormality_examples() {
        let g = gauss_product_grid(4);
        let q = |l1: usize, m1: i64, l2: usize, m2: i64| -> Complex64 {
            g.points()
                .iter()
                .zip(g.weights())
                .map(|(x, w)| {
                    sph_harm(l1, m1, x).unwrap() * sph_harm(l2, m2, x).unwrap().conj() * *w
                })
                .sum()
        };
        assert!((q(3, 2, 3, 2) - 1.0).norm() < 1e-13);
        assert!(q(5, 0, 3, 0).norm() < 1e-13);
    }

    #[test]
    fn gauss_grid_zonal_kernel_integrates_to_zero() {
        let g = gauss_product_grid(8);
        let n = SphereDirection::new(0.9, 2.2).unwrap();
        let v = g.integrate(|x| legendre_kernel(6, x.dot(&n)).unwrap());
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn gauss_grid_no_duplicates_and_mass() {
        let g = gauss_product_grid(5);
        assert_eq!(g.len(), 6 * 12);
        assert!((g.weights().iter().sum::<f64>() - 4.0 * PI).abs() < 1e-12);
        assert_eq!(g.exact_degree(), Some(11));
    }

    #[test]
    fn geodesic_distance_cases() {
        let x = SphereDirection::new(0.7, 1.0).unwrap();
        assert_eq!(geodesic_distance(&x, &x), 0.0);
        assert!((geodesic_distance(&x, &x.antipode()) - PI).abs() < 1e-14);
        let n = SphereDirection::north_pole();
        let e = SphereDirection::new(PI / 2.0, 2.5).unwrap();
        assert!((geodesic_distance(&n, &e) - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let mut buf = Vec::new();
        equal_area_points(0).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("theta,phi,weight\n"));
        assert_eq!(text.lines().count(), 13);
    }
}
