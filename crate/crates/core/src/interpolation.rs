//! Minimal-norm kernel interpolation, its Tikhonov-regularized counterpart,
//! the power function and conditioning diagnostics.
//!
//! A [`KiSystem`] owns one factorization of a kernel matrix and can produce
//! interpolants for any number of right-hand sides. [`ki_fit`] and
//! [`krr_fit`] are one-shot wrappers around it.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{kernel_matrix, KernelMatrix, KernelSpec};
use crate::sphere_geom::{PointSet, SpherePoint};

/// Eigenvalues below this fraction of the largest are discarded by the
/// pseudo-inverse fallback.
pub const PINV_REL_CUTOFF: f64 = 1e-12;

/// Two inputs closer than this (Euclidean) count as duplicates.
const DUPLICATE_TOL: f64 = 1e-12;

/// Inputs paired with real outputs.
#[derive(Debug, Clone)]
pub struct LabeledData {
    pub inputs: PointSet,
    pub outputs: Vec<f64>,
}

impl LabeledData {
    pub fn new(inputs: PointSet, outputs: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::TooFewPoints {
                required: 1,
                found: 0,
            });
        }
        if inputs.len() != outputs.len() {
            return Err(Error::InvalidParameter(format!(
                "{} inputs but {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        Ok(Self { inputs, outputs })
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledData {
        LabeledData {
            inputs: self.inputs.subset(indices),
            outputs: indices.iter().map(|&i| self.outputs[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Cholesky,
    EigPseudoinverse,
}

impl SolveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveMethod::Cholesky => "cholesky",
            SolveMethod::EigPseudoinverse => "eig_pseudoinverse",
        }
    }
}

/// Spectrum and solve quality of one kernel system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `σ_max / σ_min`, infinite when `σ_min <= 0`.
    pub cond: f64,
    pub method: SolveMethod,
    /// `max_i |f(x_i) − y_i|`; NaN when no solve was performed.
    pub interpolation_residual: f64,
}

/// `f = Σ_i a_i φ(x_i · ·)`.
#[derive(Debug, Clone)]
pub struct Interpolant {
    pub centers: PointSet,
    pub coeffs: Vec<f64>,
    pub kernel: KernelSpec,
    pub diagnostics: SolveDiagnostics,
}

enum Factor {
    Cholesky(Cholesky<f64, Dyn>),
    /// Eigenvectors and inverted eigenvalues (zero where discarded).
    Eig {
        vectors: DMatrix<f64>,
        inv_values: DVector<f64>,
    },
}

impl Factor {
    fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Factor::Cholesky(c) => c.solve(rhs),
            Factor::Eig {
                vectors,
                inv_values,
            } => {
                let mut proj = vectors.tr_mul(rhs);
                for (mut row, s) in proj.row_iter_mut().zip(inv_values.iter()) {
                    row *= *s;
                }
                vectors * proj
            }
        }
    }
}

/// A factored kernel system over fixed centers.
pub struct KiSystem {
    centers: PointSet,
    kernel: KernelSpec,
    matrix: DMatrix<f64>,
    factor: Factor,
    /// `(σ_min, σ_max)`, computed on first use.
    spectrum: OnceLock<(f64, f64)>,
    method: SolveMethod,
}

fn spectrum(m: &DMatrix<f64>) -> (f64, f64) {
    let ev = m.clone().symmetric_eigenvalues();
    (ev.min(), ev.max())
}

fn cond_of(sigma_min: f64, sigma_max: f64) -> f64 {
    if sigma_min > 0.0 {
        sigma_max / sigma_min
    } else {
        f64::INFINITY
    }
}

/// Fails on the first pair of inputs closer than [`DUPLICATE_TOL`].
pub fn check_distinct(points: &PointSet) -> Result<()> {
    let n = points.len();
    let hit = (0..n).into_par_iter().find_first(|&i| {
        let p = points.point(i);
        (i + 1..n).any(|j| {
            let d2: f64 = p
                .iter()
                .zip(points.point(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2 < DUPLICATE_TOL * DUPLICATE_TOL
        })
    });
    if let Some(i) = hit {
        let p = points.point(i);
        let j = (i + 1..n)
            .find(|&j| {
                let d2: f64 = p
                    .iter()
                    .zip(points.point(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d2 < DUPLICATE_TOL * DUPLICATE_TOL
            })
            .unwrap_or(i);
        return Err(Error::DuplicatePoints { first: i, second: j });
    }
    Ok(())
}

impl KiSystem {
    /// Factors `Φ` over distinct `centers`: Cholesky first, eigen
    /// pseudo-inverse when `Φ` is numerically not positive definite.
    pub fn new(centers: PointSet, kernel: &KernelSpec) -> Result<Self> {
        check_distinct(&centers)?;
        let km = kernel_matrix(kernel, &centers)?;
        Ok(Self::from_matrix(centers, kernel, km.entries))
    }

    /// Factors `Φ + λ N I` (always positive definite for `λ > 0`).
    pub fn regularized(centers: PointSet, kernel: &KernelSpec, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "regularization parameter must be positive, got {lambda}"
            )));
        }
        check_distinct(&centers)?;
        let n = centers.len();
        let mut m = kernel_matrix(kernel, &centers)?.entries;
        for i in 0..n {
            m[(i, i)] += lambda * n as f64;
        }
        Ok(Self::from_matrix(centers, kernel, m))
    }

    fn from_matrix(centers: PointSet, kernel: &KernelSpec, matrix: DMatrix<f64>) -> Self {
        let (factor, method) = match Cholesky::new(matrix.clone()) {
            Some(c) => (Factor::Cholesky(c), SolveMethod::Cholesky),
            None => {
                let eig = matrix.clone().symmetric_eigen();
                let top = eig.eigenvalues.max();
                let cutoff = PINV_REL_CUTOFF * top;
                let inv_values = eig
                    .eigenvalues
                    .map(|v| if v > cutoff { 1.0 / v } else { 0.0 });
                (
                    Factor::Eig {
                        vectors: eig.eigenvectors,
                        inv_values,
                    },
                    SolveMethod::EigPseudoinverse,
                )
            }
        };
        Self {
            centers,
            kernel: kernel.clone(),
            matrix,
            factor,
            spectrum: OnceLock::new(),
            method,
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &PointSet {
        &self.centers
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn method(&self) -> SolveMethod {
        self.method
    }

    fn extremes(&self) -> (f64, f64) {
        *self.spectrum.get_or_init(|| spectrum(&self.matrix))
    }

    /// `σ_max / σ_min` of the system matrix. The first call runs a full
    /// symmetric eigendecomposition; later calls are free.
    pub fn cond(&self) -> f64 {
        let (lo, hi) = self.extremes();
        cond_of(lo, hi)
    }

    pub fn sigma_min(&self) -> f64 {
        self.extremes().0
    }

    pub fn sigma_max(&self) -> f64 {
        self.extremes().1
    }

    /// Coefficients for every column of `ys` (one right-hand side per column).
    pub fn solve_many(&self, ys: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if ys.nrows() != self.len() {
            return Err(Error::InvalidParameter(format!(
                "right-hand side has {} rows, system has {}",
                ys.nrows(),
                self.len()
            )));
        }
        Ok(self.factor.solve(ys))
    }

    /// The interpolant (or regularized fit) for outputs `y`.
    pub fn fit(&self, y: &[f64]) -> Result<Interpolant> {
        let rhs = DMatrix::from_column_slice(y.len(), 1, y);
        let a = self.solve_many(&rhs)?;
        let fitted = &self.matrix * &a;
        let residual = fitted
            .iter()
            .zip(y)
            .map(|(f, y)| (f - y).abs())
            .fold(0.0, f64::max);
        Ok(Interpolant {
            centers: self.centers.clone(),
            coeffs: a.iter().copied().collect(),
            kernel: self.kernel.clone(),
            diagnostics: SolveDiagnostics {
                sigma_min: self.sigma_min(),
                sigma_max: self.sigma_max(),
                cond: self.cond(),
                method: self.method,
                interpolation_residual: residual,
            },
        })
    }

    /// `k_xᵀ Φ⁻¹ k_x` for each query, with `(k_x)_i = φ(x·x_i)`.
    fn quadratic_forms(&self, queries: &PointSet) -> Result<Vec<f64>> {
        let kx = crate::kernels::cross_matrix(&self.kernel, queries, &self.centers)?.transpose();
        let sol = self.factor.solve(&kx);
        Ok(kx
            .column_iter()
            .zip(sol.column_iter())
            .map(|(k, s)| k.dot(&s))
            .collect())
    }
}

/// Minimal-norm interpolation `a = Φ⁻¹ y`.
pub fn ki_fit(data: &LabeledData, kernel: &KernelSpec) -> Result<Interpolant> {
    KiSystem::new(data.inputs.clone(), kernel)?.fit(&data.outputs)
}

/// Tikhonov-regularized fit `a = (Φ + λ|D| I)⁻¹ y`.
pub fn krr_fit(data: &LabeledData, kernel: &KernelSpec, lambda: f64) -> Result<Interpolant> {
    KiSystem::regularized(data.inputs.clone(), kernel, lambda)?.fit(&data.outputs)
}

/// `f(x_j)` for every point of `targets`.
pub fn evaluate(f: &Interpolant, targets: &PointSet) -> Result<Vec<f64>> {
    if targets.dim() != f.centers.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.centers.ambient_dim(),
            found: targets.ambient_dim(),
        });
    }
    Ok((0..targets.len())
        .into_par_iter()
        .map(|j| {
            let x = targets.point(j);
            f.centers
                .iter()
                .zip(&f.coeffs)
                .map(|(c, a)| a * f.kernel.eval_slices(c, x))
                .sum()
        })
        .collect())
}

/// `‖f‖²_φ = aᵀ Φ a`.
pub fn native_norm_sq(f: &Interpolant) -> Result<f64> {
    if f.coeffs.iter().all(|&a| a == 0.0) {
        return Ok(0.0);
    }
    let m = kernel_matrix(&f.kernel, &f.centers)?.entries;
    let a = DVector::from_column_slice(&f.coeffs);
    Ok(a.dot(&(&m * &a)).max(0.0))
}

/// Full symmetric spectrum of a kernel matrix. The method reports which
/// path a solve would take; `interpolation_residual` is NaN.
pub fn condition_diagnostics(matrix: &KernelMatrix) -> SolveDiagnostics {
    matrix_diagnostics(&matrix.entries)
}

pub(crate) fn matrix_diagnostics(m: &DMatrix<f64>) -> SolveDiagnostics {
    let (sigma_min, sigma_max) = spectrum(m);
    let method = if Cholesky::new(m.clone()).is_some() {
        SolveMethod::Cholesky
    } else {
        SolveMethod::EigPseudoinverse
    };
    SolveDiagnostics {
        sigma_min,
        sigma_max,
        cond: cond_of(sigma_min, sigma_max),
        method,
        interpolation_residual: f64::NAN,
    }
}

/// Power function `P(x) = ‖φ_x − Π_Λ φ_x‖_φ` over a fixed center set, with
/// the kernel system factored once for all queries.
pub struct PowerFunction {
    system: KiSystem,
}

impl PowerFunction {
    pub fn new(centers: PointSet, kernel: &KernelSpec) -> Result<Self> {
        Ok(Self {
            system: KiSystem::new(centers, kernel)?,
        })
    }

    pub fn eval(&self, x: &SpherePoint) -> Result<f64> {
        let mut q = PointSet::empty(self.system.centers.dim());
        q.push(x)?;
        Ok(self.eval_many(&q)?[0])
    }

    pub fn eval_many(&self, queries: &PointSet) -> Result<Vec<f64>> {
        let diag = self.system.kernel.diagonal();
        Ok(self
            .system
            .quadratic_forms(queries)?
            .into_iter()
            .map(|q| (diag - q).max(0.0).sqrt())
            .collect())
    }
}

pub fn power_function(centers: &PointSet, kernel: &KernelSpec, x: &SpherePoint) -> Result<f64> {
    PowerFunction::new(centers.clone(), kernel)?.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::wendland;
    use crate::sphere_geom::uniform_sample;
    use approx::assert_abs_diff_eq;

    fn data(n: usize, seed: u64) -> LabeledData {
        let pts = uniform_sample(2, n, seed);
        let y = pts.iter().map(|p| p[0] - 2.0 * p[1] * p[2] + 0.5).collect();
        LabeledData::new(pts, y).unwrap()
    }

    #[test]
    fn single_point_fit() {
        let pts = PointSet::from_rows(&[vec![0.0, 1.0, 0.0]]).unwrap();
        let d = LabeledData::new(pts.clone(), vec![3.0]).unwrap();
        let f = ki_fit(&d, &KernelSpec::Wendland).unwrap();
        assert_eq!(f.coeffs, vec![3.0]);
        assert_eq!(evaluate(&f, &pts).unwrap(), vec![3.0]);
        assert_eq!(f.diagnostics.method, SolveMethod::Cholesky);
        assert_eq!(f.diagnostics.cond, 1.0);
    }

    #[test]
    fn interpolates_data() {
        for k in [KernelSpec::Wendland, KernelSpec::gaussian(0.5).unwrap()] {
            let d = data(120, 3);
            let f = ki_fit(&d, &k).unwrap();
            let fitted = evaluate(&f, &d.inputs).unwrap();
            let ymax = d.outputs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in fitted.iter().zip(&d.outputs) {
                assert!((a - b).abs() <= 1e-8 * (1.0 + ymax));
            }
            assert!(f.diagnostics.interpolation_residual <= 1e-8 * (1.0 + ymax));
            assert!(f.diagnostics.cond >= 1.0);
        }
    }

    #[test]
    fn rejects_duplicates_and_bad_lambda() {
        let pts = PointSet::from_rows(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]])
            .unwrap();
        let d = LabeledData::new(pts, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            ki_fit(&d, &KernelSpec::Wendland),
            Err(Error::DuplicatePoints { first: 0, second: 2 })
        ));
        let d = data(5, 1);
        assert!(krr_fit(&d, &KernelSpec::Wendland, 0.0).is_err());
        assert!(LabeledData::new(uniform_sample(2, 3, 1), vec![1.0]).is_err());
    }

    #[test]
    fn zero_coefficients_evaluate_to_zero() {
        let mut f = ki_fit(&data(10, 2), &KernelSpec::Wendland).unwrap();
        f.coeffs.iter_mut().for_each(|a| *a = 0.0);
        assert!(evaluate(&f, &uniform_sample(2, 20, 9)).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(native_norm_sq(&f).unwrap(), 0.0);
    }

    #[test]
    fn compact_support_far_point() {
        let pts = PointSet::from_rows(&[vec![0.0, 0.0, 1.0], vec![0.1, 0.0, 1.0]]).unwrap();
        let f = ki_fit(&LabeledData::new(pts, vec![1.0, -2.0]).unwrap(), &KernelSpec::Wendland)
            .unwrap();
        let south = PointSet::from_rows(&[vec![0.0, 0.0, -1.0]]).unwrap();
        assert_eq!(evaluate(&f, &south).unwrap(), vec![0.0]);
    }

    #[test]
    fn krr_examples() {
        let pts = PointSet::from_rows(&[vec![0.0, 0.0, 1.0]]).unwrap();
        let f = krr_fit(&LabeledData::new(pts, vec![4.0]).unwrap(), &KernelSpec::Wendland, 1.0)
            .unwrap();
        assert_abs_diff_eq!(f.coeffs[0], 2.0, epsilon = 1e-15);

        let d = data(20, 5);
        let ki = ki_fit(&d, &KernelSpec::Wendland).unwrap();
        let krr = krr_fit(&d, &KernelSpec::Wendland, 1e-12).unwrap();
        let num: f64 = ki.coeffs.iter().zip(&krr.coeffs).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = ki.coeffs.iter().map(|a| a * a).sum();
        assert!((num / den).sqrt() <= 1e-6);

        let d = data(10, 6);
        let lam = 1e6;
        let big = krr_fit(&d, &KernelSpec::Wendland, lam).unwrap();
        for (a, y) in big.coeffs.iter().zip(&d.outputs) {
            let want = y / (lam * 10.0);
            assert!((a - want).abs() <= 0.01 * want.abs());
        }
    }

    #[test]
    fn power_function_examples() {
        let centers = uniform_sample(2, 30, 12);
        let pf = PowerFunction::new(centers.clone(), &KernelSpec::Wendland).unwrap();
        for v in pf.eval_many(&centers).unwrap() {
            assert!(v <= 1e-6, "P on a center = {v}");
        }
        let north = PointSet::from_rows(&[vec![0.0, 0.0, 1.0]]).unwrap();
        let south = SpherePoint::new(vec![0.0, 0.0, -1.0]).unwrap();
        let p = power_function(&north, &KernelSpec::Wendland, &south).unwrap();
        let want = (wendland(0.0) - wendland(2.0).powi(2) / wendland(0.0)).sqrt();
        assert_abs_diff_eq!(p, want, epsilon = 1e-15);
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn native_norm_single_point() {
        let pts = PointSet::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let f = ki_fit(&LabeledData::new(pts, vec![-1.5]).unwrap(), &KernelSpec::Wendland).unwrap();
        assert_abs_diff_eq!(native_norm_sq(&f).unwrap(), 2.25, epsilon = 1e-15);
    }

    #[test]
    fn condition_examples() {
        let id = KernelMatrix {
            entries: DMatrix::identity(4, 4),
            kernel: KernelSpec::Wendland,
            point_count: 4,
        };
        assert_eq!(condition_diagnostics(&id).cond, 1.0);
        let d = KernelMatrix {
            entries: DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])),
            kernel: KernelSpec::Wendland,
            point_count: 2,
        };
        let diag = condition_diagnostics(&d);
        assert_abs_diff_eq!(diag.cond, 4.0, epsilon = 1e-14);
        assert!(diag.interpolation_residual.is_nan());
    }

    #[test]
    fn singular_matrix_falls_back() {
        // Gaussian with huge sigma: Φ ≈ all-ones, numerically singular
        let d = data(40, 8);
        let k = KernelSpec::gaussian(1e4).unwrap();
        let f = ki_fit(&d, &k).unwrap();
        assert_eq!(f.diagnostics.method, SolveMethod::EigPseudoinverse);
        assert!(f.coeffs.iter().all(|a| a.is_finite()));
    }
}
