//! Zonal positive-definite kernels on S^d and kernel-matrix assembly.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{gegenbauer_all, harmonic_dim, sphere_volume};
use crate::sphere_geom::{dot, PointSet, SpherePoint};

/// Default truncation degree for coefficient-defined kernels.
pub const DEFAULT_K_MAX: usize = 200;

/// The compactly supported Wendland function `(1-u)_+^8 (32u^3 + 25u^2 + 8u + 1)`.
pub fn wendland(u: f64) -> f64 {
    if u >= 1.0 {
        return 0.0;
    }
    let v = 1.0 - u;
    let v2 = v * v;
    let v4 = v2 * v2;
    v4 * v4 * (((32.0 * u + 25.0) * u + 8.0) * u + 1.0)
}

/// A zonal kernel `φ(x·y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `ψ(‖x − y‖₂)` with the Wendland function ψ.
    Wendland,
    /// `exp(−‖x − y‖² / (2σ²))`.
    Gaussian { sigma: f64 },
    /// `Σ_k φ̂_k (Z(d,k)/Ω_d) P_k(x·y)` truncated at `coeffs.len() - 1`.
    Coefficients {
        dim: usize,
        coeffs: Vec<f64>,
        /// Estimated size of the dropped tail, see [`KernelSpec::from_coefficient_fn`].
        tail_bound: f64,
    },
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        Ok(KernelSpec::Gaussian { sigma })
    }

    /// A kernel from explicit positive coefficients `φ̂_0..φ̂_K`. The tail
    /// bound is unknown and reported as 0.
    pub fn from_coefficients(dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("sphere dimension must be >= 1".into()));
        }
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter("coefficient list is empty".into()));
        }
        if let Some((k, c)) = coeffs
            .iter()
            .enumerate()
            .find(|(_, c)| !(**c > 0.0) || !c.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "coefficient {k} must be positive and finite, got {c}"
            )));
        }
        Ok(KernelSpec::Coefficients {
            dim,
            coeffs,
            tail_bound: 0.0,
        })
    }

    /// A kernel from a coefficient sequence `k ↦ φ̂_k`, truncated at `k_max`.
    ///
    /// Since `|P_k| <= 1`, the truncation error is at most
    /// `Σ_{k > k_max} φ̂_k Z(d,k)/Ω_d`; the reported bound sums that series
    /// over `k_max < k <= 4 k_max`.
    pub fn from_coefficient_fn(dim: usize, k_max: usize, phi_hat: impl Fn(usize) -> f64) -> Result<Self> {
        let coeffs: Vec<f64> = (0..=k_max).map(&phi_hat).collect();
        let omega = sphere_volume(dim);
        let mut tail = 0.0;
        for k in k_max + 1..=4 * k_max.max(1) {
            match harmonic_dim(dim, k) {
                Ok(z) => tail += phi_hat(k) * z as f64 / omega,
                Err(_) => {
                    tail = f64::INFINITY;
                    break;
                }
            }
        }
        match Self::from_coefficients(dim, coeffs)? {
            KernelSpec::Coefficients { dim, coeffs, .. } => Ok(KernelSpec::Coefficients {
                dim,
                coeffs,
                tail_bound: tail,
            }),
            _ => unreachable!(),
        }
    }

    /// Kernel profile as a function of the inner product `t = x·y`.
    pub fn profile(&self, t: f64) -> f64 {
        match self {
            KernelSpec::Wendland => wendland(chord(t)),
            KernelSpec::Gaussian { sigma } => {
                let c2 = (2.0 - 2.0 * t).max(0.0);
                (-c2 / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Coefficients { dim, coeffs, .. } => {
                let omega = sphere_volume(*dim);
                let mut p = Vec::with_capacity(coeffs.len());
                gegenbauer_all(*dim, coeffs.len() - 1, t, &mut p);
                coeffs
                    .iter()
                    .zip(&p)
                    .enumerate()
                    .map(|(k, (c, pk))| {
                        let z = harmonic_dim(*dim, k).map(|z| z as f64).unwrap_or(f64::INFINITY);
                        c * z / omega * pk
                    })
                    .sum()
            }
        }
    }

    /// `φ(x·x)`, the diagonal of every kernel matrix.
    pub fn diagonal(&self) -> f64 {
        self.profile(1.0)
    }

    /// Truncation-tail estimate for coefficient kernels, 0 otherwise.
    pub fn tail_bound(&self) -> f64 {
        match self {
            KernelSpec::Coefficients { tail_bound, .. } => *tail_bound,
            _ => 0.0,
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if let KernelSpec::Coefficients { dim: kd, .. } = self {
            if *kd != dim {
                return Err(Error::DimensionMismatch {
                    expected: kd + 1,
                    found: dim + 1,
                });
            }
        }
        Ok(())
    }

    /// Evaluates `φ(x·y)` on raw coordinate slices of equal length.
    pub(crate) fn eval_slices(&self, x: &[f64], y: &[f64]) -> f64 {
        self.profile(dot(x, y))
    }
}

/// Chord length `‖x − y‖₂ = √(2 − 2 x·y)` for unit vectors.
fn chord(t: f64) -> f64 {
    (2.0 - 2.0 * t).max(0.0).sqrt()
}

pub fn kernel_eval(kernel: &KernelSpec, x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    let t = x.dot(y)?;
    kernel.check_dim(x.dim())?;
    Ok(kernel.profile(t))
}

/// Dense symmetric kernel matrix over a point set.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub entries: DMatrix<f64>,
    pub kernel: KernelSpec,
    pub point_count: usize,
}

pub fn kernel_matrix(kernel: &KernelSpec, points: &PointSet) -> Result<KernelMatrix> {
    if points.is_empty() {
        return Err(Error::TooFewPoints {
            required: 1,
            found: 0,
        });
    }
    kernel.check_dim(points.dim())?;
    let n = points.len();
    let diag = kernel.diagonal();
    // upper triangle by row, mirrored afterwards
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = points.point(i);
            (i + 1..n).map(|j| kernel.eval_slices(p, points.point(j))).collect()
        })
        .collect();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        m[(i, i)] = diag;
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(KernelMatrix {
        entries: m,
        kernel: kernel.clone(),
        point_count: n,
    })
}

/// `|targets| × |centers|` matrix with entries `φ(t_r · c_s)`.
pub fn cross_matrix(kernel: &KernelSpec, targets: &PointSet, centers: &PointSet) -> Result<DMatrix<f64>> {
    if targets.dim() != centers.dim() {
        return Err(Error::DimensionMismatch {
            expected: centers.ambient_dim(),
            found: targets.ambient_dim(),
        });
    }
    kernel.check_dim(centers.dim())?;
    let (nt, nc) = (targets.len(), centers.len());
    let rows: Vec<Vec<f64>> = (0..nt)
        .into_par_iter()
        .map(|r| {
            let x = targets.point(r);
            centers.iter().map(|c| kernel.eval_slices(x, c)).collect()
        })
        .collect();
    Ok(DMatrix::from_fn(nt, nc, |r, c| rows[r][c]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::gegenbauer;
    use crate::sphere_geom::uniform_sample;
    use approx::assert_abs_diff_eq;

    fn pt(c: &[f64]) -> SpherePoint {
        SpherePoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn wendland_values() {
        assert_eq!(wendland(0.0), 1.0);
        assert_eq!(wendland(1.0), 0.0);
        assert_eq!(wendland(1.7), 0.0);
        assert_abs_diff_eq!(wendland(0.5), 0.0595703125, epsilon = 1e-16);
    }

    #[test]
    fn kernel_eval_examples() {
        let x = pt(&[1.0, 0.0, 0.0]);
        assert_eq!(kernel_eval(&KernelSpec::Wendland, &x, &x).unwrap(), 1.0);
        let anti = pt(&[-1.0, 0.0, 0.0]);
        assert_eq!(kernel_eval(&KernelSpec::Wendland, &x, &anti).unwrap(), 0.0);
        let g = KernelSpec::gaussian(1.0).unwrap();
        let y = pt(&[0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(kernel_eval(&g, &x, &y).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        assert!(kernel_eval(&g, &x, &pt(&[1.0, 0.0])).is_err());
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::gaussian(-1.0).is_err());
    }

    #[test]
    fn kernel_symmetric_in_arguments() {
        let pts = uniform_sample(2, 30, 4);
        let ks = [
            KernelSpec::Wendland,
            KernelSpec::gaussian(0.4).unwrap(),
            KernelSpec::from_coefficient_fn(2, 30, |k| (1.0 + k as f64).powi(-4)).unwrap(),
        ];
        for k in &ks {
            for i in 0..30 {
                for j in 0..30 {
                    let a = kernel_eval(k, &pts.get(i), &pts.get(j)).unwrap();
                    let b = kernel_eval(k, &pts.get(j), &pts.get(i)).unwrap();
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn coefficient_kernel_single_term() {
        let pts = uniform_sample(3, 10, 2);
        for k in [0usize, 1, 4, 9] {
            let mut c = vec![1e-300; k + 1];
            c[k] = 0.7;
            let kern = KernelSpec::from_coefficients(3, c).unwrap();
            for i in 0..9 {
                let (x, y) = (pts.get(i), pts.get(i + 1));
                let t = x.dot(&y).unwrap();
                let want = 0.7 * harmonic_dim(3, k).unwrap() as f64 / sphere_volume(3)
                    * gegenbauer(3, k, t);
                assert_abs_diff_eq!(kernel_eval(&kern, &x, &y).unwrap(), want, epsilon = 1e-12);
            }
        }
        assert!(KernelSpec::from_coefficients(2, vec![1.0, 0.0]).is_err());
        let k2 = KernelSpec::from_coefficients(2, vec![1.0]).unwrap();
        assert!(kernel_eval(&k2, &pts.get(0), &pts.get(1)).is_err());
    }

    #[test]
    fn coefficient_tail_bound_reported() {
        let k = KernelSpec::from_coefficient_fn(2, 200, |k| (1.0 + k as f64).powi(-4)).unwrap();
        let tb = k.tail_bound();
        assert!(tb > 0.0 && tb < 1e-4, "tail {tb}");
        assert_eq!(KernelSpec::Wendland.tail_bound(), 0.0);
    }

    #[test]
    fn matrix_examples() {
        let one = PointSet::from_rows(&[vec![0.0, 0.0, 1.0]]).unwrap();
        let m = kernel_matrix(&KernelSpec::Wendland, &one).unwrap();
        assert_eq!(m.entries.shape(), (1, 1));
        assert_eq!(m.entries[(0, 0)], 1.0);

        // octahedron vertices: chord √2 or 2, both outside the support
        let oct = PointSet::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, -1.0],
        ])
        .unwrap();
        let m = kernel_matrix(&KernelSpec::Wendland, &oct).unwrap();
        assert_eq!(m.entries, DMatrix::identity(6, 6));

        let pts = uniform_sample(2, 50, 11);
        for k in [KernelSpec::Wendland, KernelSpec::gaussian(0.5).unwrap()] {
            let m = kernel_matrix(&k, &pts).unwrap();
            let ev = m.entries.clone().symmetric_eigenvalues();
            assert!(ev.min() > 0.0, "min eigenvalue {}", ev.min());
            for i in 0..50 {
                assert_eq!(m.entries[(i, i)], 1.0);
                for j in 0..50 {
                    assert_eq!(m.entries[(i, j)], m.entries[(j, i)]);
                }
            }
        }
        assert!(kernel_matrix(&KernelSpec::Wendland, &PointSet::empty(2)).is_err());
    }

    #[test]
    fn cross_matrix_matches_pointwise() {
        let a = uniform_sample(2, 7, 1);
        let b = uniform_sample(2, 5, 2);
        let k = KernelSpec::gaussian(0.8).unwrap();
        let m = cross_matrix(&k, &a, &b).unwrap();
        for r in 0..7 {
            for c in 0..5 {
                assert_eq!(m[(r, c)], kernel_eval(&k, &a.get(r), &b.get(c)).unwrap());
            }
        }
    }
}
