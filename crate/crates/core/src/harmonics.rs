//! Spherical-harmonic dimensions, normalized Gegenbauer polynomials and
//! positive quadrature rules.
//!
//! Exactness of a rule at degree `k` is measured without a harmonic basis:
//! by the addition formula,
//!
//! ```text
//! r_k = Σ_{i,j} w_i w_j (Z(d,k)/Ω_d) P_k(x_i·x_j) = ‖Σ_i w_i Y_k(x_i)‖²
//! ```
//!
//! which vanishes exactly when the rule integrates every degree-`k` harmonic
//! to zero. An explicit real basis is only built on S^2, where
//! [`solve_weights`] needs the moment matrix.

use std::f64::consts::PI;
use std::io::Write;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sphere_geom::{dot, PointSet};

/// Relative exactness tolerance (scaled by `Z(d,k)/Ω_d`).
pub const DEFAULT_EXACTNESS_TOL: f64 = 1e-9;

/// `Z(d,k)`, the dimension of the degree-`k` harmonics on S^d.
pub fn harmonic_dim(d: usize, k: usize) -> Result<u64> {
    if d == 0 {
        return Err(Error::InvalidParameter("sphere dimension must be >= 1".into()));
    }
    if k == 0 {
        return Ok(1);
    }
    let overflow = || Error::Overflow { d, k };
    let n = (k + d - 1) as u128;
    // C(k + d - 1, k), built so every intermediate quotient is exact
    let r = k.min(d - 1) as u128;
    let mut binom: u128 = 1;
    for i in 0..r {
        binom = binom.checked_mul(n - i).ok_or_else(overflow)? / (i + 1);
    }
    let z = binom
        .checked_mul((2 * k + d - 1) as u128)
        .ok_or_else(overflow)?
        / n;
    u64::try_from(z).map_err(|_| overflow())
}

/// `Z(d,k)` for `k = 0..=kmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicDims {
    pub d: usize,
    pub values: Vec<u64>,
}

impl HarmonicDims {
    pub fn new(d: usize, kmax: usize) -> Result<Self> {
        let values = (0..=kmax)
            .map(|k| harmonic_dim(d, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { d, values })
    }
}

/// Surface area of S^d, `2π^{(d+1)/2} / Γ((d+1)/2)`.
pub fn sphere_volume(d: usize) -> f64 {
    2.0 * PI.powf((d as f64 + 1.0) / 2.0) / gamma_half_integer(d + 1)
}

/// Γ(n/2) for a positive integer n.
fn gamma_half_integer(n: usize) -> f64 {
    let (mut g, mut x) = if n.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = n as f64 / 2.0;
    while x < target {
        g *= x;
        x += 1.0;
    }
    g
}

/// Gegenbauer polynomial of order `(d-1)/2` and degree `k`, normalized so
/// that `P_k(1) = 1`. `t` is clamped to [-1, 1].
pub fn gegenbauer(d: usize, k: usize, t: f64) -> f64 {
    let t = t.clamp(-1.0, 1.0);
    if k == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, t);
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + d as f64 - 1.0) * t * cur - jf * prev) / (jf + d as f64 - 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `P_0(t), ..., P_kmax(t)` in one recurrence pass.
pub fn gegenbauer_all(d: usize, kmax: usize, t: f64, out: &mut Vec<f64>) {
    let t = t.clamp(-1.0, 1.0);
    out.clear();
    out.push(1.0);
    if kmax == 0 {
        return;
    }
    out.push(t);
    for j in 1..kmax {
        let jf = j as f64;
        let next = ((2.0 * jf + d as f64 - 1.0) * t * out[j] - jf * out[j - 1])
            / (jf + d as f64 - 1.0);
        out.push(next);
    }
}

/// Real orthonormal spherical harmonics on S^2 (surface measure), degrees
/// `0..=kmax`, ordered by degree and then `m = -k..=k`.
#[allow(clippy::needless_range_loop)] // index form mirrors the recurrences
pub fn real_sph_harm(kmax: usize, x: &[f64]) -> Vec<f64> {
    let (px, py, z) = (x[0], x[1], x[2]);
    // q[l][m] = normalized associated Legendre P_l^m(z) / sin^m(θ)
    let mut q = vec![vec![0.0; kmax + 1]; kmax + 1];
    q[0][0] = 1.0 / (4.0 * PI).sqrt();
    for m in 1..=kmax {
        q[m][m] = -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * q[m - 1][m - 1];
    }
    for m in 0..kmax {
        q[m + 1][m] = ((2 * m + 3) as f64).sqrt() * z * q[m][m];
    }
    for m in 0..=kmax {
        for l in m + 2..=kmax {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            q[l][m] = a * (z * q[l - 1][m] - b * q[l - 2][m]);
        }
    }
    // (x + iy)^m = sin^m(θ) e^{imφ}
    let mut re = vec![1.0; kmax + 1];
    let mut im = vec![0.0; kmax + 1];
    for m in 1..=kmax {
        re[m] = re[m - 1] * px - im[m - 1] * py;
        im[m] = re[m - 1] * py + im[m - 1] * px;
    }
    let s2 = 2f64.sqrt();
    let mut out = Vec::with_capacity((kmax + 1) * (kmax + 1));
    for l in 0..=kmax {
        for m in (1..=l).rev() {
            out.push(s2 * q[l][m] * im[m]);
        }
        out.push(q[l][0]);
        for m in 1..=l {
            out.push(s2 * q[l][m] * re[m]);
        }
    }
    out
}

/// A weighted point set meant to integrate polynomials of degree <= `order`
/// against the normalized surface measure.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: PointSet,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    pub fn new(points: PointSet, weights: Vec<f64>, order: usize) -> Result<Self> {
        if weights.len() != points.len() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} points",
                weights.len(),
                points.len()
            )));
        }
        Ok(Self {
            points,
            weights,
            order,
        })
    }

    /// Equal weights `1/N`.
    pub fn equal_weights(points: PointSet, order: usize) -> Self {
        let n = points.len();
        Self {
            points,
            weights: vec![1.0 / n as f64; n],
            order,
        }
    }
}

/// `r_k` for one degree `k >= 1`.
pub fn quadrature_residual(rule: &QuadratureRule, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("residual degree must be >= 1".into()));
    }
    Ok(quadrature_residuals(&rule.points, &rule.weights, k)?[k - 1])
}

/// `r_1, ..., r_kmax` from one pass over all pairs.
pub fn quadrature_residuals(points: &PointSet, weights: &[f64], kmax: usize) -> Result<Vec<f64>> {
    if weights.len() != points.len() {
        return Err(Error::InvalidParameter(format!(
            "{} weights for {} points",
            weights.len(),
            points.len()
        )));
    }
    let d = points.dim();
    let omega = sphere_volume(d);
    let n = points.len();
    let mut acc = vec![0.0; kmax + 1];
    let mut p = Vec::with_capacity(kmax + 1);
    // fixed i, j order: off-diagonal pairs counted twice, then the diagonal
    for i in 0..n {
        let xi = points.point(i);
        for j in i + 1..n {
            let w = 2.0 * weights[i] * weights[j];
            gegenbauer_all(d, kmax, dot(xi, points.point(j)), &mut p);
            for (a, pk) in acc.iter_mut().zip(&p) {
                *a += w * pk;
            }
        }
    }
    let diag: f64 = weights.iter().map(|w| w * w).sum();
    let mut out = Vec::with_capacity(kmax);
    for (k, a) in acc.iter().enumerate().skip(1) {
        let scale = harmonic_dim(d, k)? as f64 / omega;
        out.push((scale * (a + diag)).max(0.0));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeCheck {
    pub degree: usize,
    pub residual: f64,
    pub pass: bool,
}

/// Outcome of [`verify_rule`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub positive: bool,
    pub normalized: bool,
    pub weight_sum: f64,
    pub degrees: Vec<DegreeCheck>,
    /// Degree and value of the largest residual, if any degree was checked.
    pub worst: Option<(usize, f64)>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.positive && self.normalized && self.degrees.iter().all(|c| c.pass)
    }

    /// First degree whose residual exceeds the tolerance.
    pub fn first_failing_degree(&self) -> Option<usize> {
        self.degrees.iter().find(|c| !c.pass).map(|c| c.degree)
    }

    /// Largest `s` such that degrees `1..=s` all pass.
    pub fn exact_order(&self) -> usize {
        self.degrees.iter().take_while(|c| c.pass).count()
    }

    /// Writes `degree,residual,pass` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["degree", "residual", "pass"])?;
        for c in &self.degrees {
            wtr.write_record([
                c.degree.to_string(),
                format!("{:.15e}", c.residual),
                c.pass.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Checks positivity, normalization and exactness up to order `s`.
///
/// Degree `k` passes when `r_k <= tol · Z(d,k)/Ω_d`.
pub fn verify_rule(points: &PointSet, weights: &[f64], s: usize, tol: f64) -> Result<VerifyReport> {
    let residuals = if s > 0 {
        quadrature_residuals(points, weights, s)?
    } else if weights.len() != points.len() {
        return Err(Error::InvalidParameter("weights and points differ in length".into()));
    } else {
        Vec::new()
    };
    let d = points.dim();
    let omega = sphere_volume(d);
    let mut degrees = Vec::with_capacity(s);
    for (i, r) in residuals.into_iter().enumerate() {
        let k = i + 1;
        let scale = harmonic_dim(d, k)? as f64 / omega;
        degrees.push(DegreeCheck {
            degree: k,
            residual: r,
            pass: r <= tol * scale,
        });
    }
    let worst = degrees
        .iter()
        .max_by(|a, b| a.residual.total_cmp(&b.residual))
        .map(|c| (c.degree, c.residual));
    let weight_sum: f64 = weights.iter().sum();
    Ok(VerifyReport {
        positive: weights.iter().all(|&w| w > 0.0),
        normalized: (weight_sum - 1.0).abs() <= tol,
        weight_sum,
        degrees,
        worst,
    })
}

/// Result of [`solve_weights`].
#[derive(Debug, Clone)]
pub enum WeightSolution {
    Feasible {
        weights: Vec<f64>,
        /// `max_i w_i · N`; bounded for rules with `O(1/N)` weights.
        max_scaled_weight: f64,
        report: VerifyReport,
    },
    Infeasible {
        /// Highest order the best weights found still integrate exactly.
        best_order: usize,
        weights: Vec<f64>,
        report: VerifyReport,
    },
}

impl WeightSolution {
    pub fn is_feasible(&self) -> bool {
        matches!(self, WeightSolution::Feasible { .. })
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            WeightSolution::Feasible { weights, .. } | WeightSolution::Infeasible { weights, .. } => {
                weights
            }
        }
    }
}

const PROJECTION_ROUNDS: usize = 200;

/// Positive quadrature weights of order `s` on a point set of S^2.
///
/// Starts from equal weights, applies the minimum-norm least-squares
/// correction to the moment system `Σ_i w_i Y_{k,l}(x_i) = δ_{k0}`, and
/// alternates with projection onto the positive orthant until the weights
/// are positive or the round budget runs out. The result is re-verified.
pub fn solve_weights(points: &PointSet, s: usize) -> Result<WeightSolution> {
    if points.dim() != 2 {
        return Err(Error::InvalidParameter(
            "weight construction is implemented for S^2 only".into(),
        ));
    }
    let n = points.len();
    if n == 0 {
        return Err(Error::TooFewPoints {
            required: 1,
            found: 0,
        });
    }
    let n_moments = (s + 1) * (s + 1);
    if n_moments > n {
        warn!("order {s} needs {n_moments} moments but only {n} points are available");
    }
    // rows are harmonics scaled to the probability measure (Y_00 = 1)
    let root = (4.0 * PI).sqrt();
    let mut a = DMatrix::<f64>::zeros(n_moments, n);
    for (i, x) in points.iter().enumerate() {
        for (row, y) in real_sph_harm(s, x).into_iter().enumerate() {
            a[(row, i)] = root * y;
        }
    }
    let mut b = DVector::<f64>::zeros(n_moments);
    b[0] = 1.0;
    let svd = a.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    let mut w = DVector::from_element(n, 1.0 / n as f64);
    for round in 0..PROJECTION_ROUNDS {
        let r = &b - &a * &w;
        let corr = svd
            .solve(&r, eps)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        w += corr;
        if w.iter().all(|&v| v > 0.0) || round + 1 == PROJECTION_ROUNDS {
            break;
        }
        w.apply(|v| *v = v.max(0.0));
    }
    let weights: Vec<f64> = w.iter().copied().collect();
    let report = verify_rule(points, &weights, s, DEFAULT_EXACTNESS_TOL)?;
    if report.passed() {
        let max_scaled_weight = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max) * n as f64;
        Ok(WeightSolution::Feasible {
            weights,
            max_scaled_weight,
            report,
        })
    } else {
        let best_order = if report.positive && report.normalized {
            report.exact_order()
        } else {
            0
        };
        Ok(WeightSolution::Infeasible {
            best_order,
            weights,
            report,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere_geom::{rotation_z, uniform_sample};
    use approx::assert_abs_diff_eq;

    #[test]
    fn harmonic_dim_examples() {
        assert_eq!(harmonic_dim(2, 0).unwrap(), 1);
        assert_eq!(harmonic_dim(2, 3).unwrap(), 7);
        assert_eq!(harmonic_dim(3, 1).unwrap(), 4);
        for k in 0..50 {
            assert_eq!(harmonic_dim(2, k).unwrap(), 2 * k as u64 + 1);
        }
        for k in 1..10 {
            assert_eq!(harmonic_dim(1, k).unwrap(), 2);
        }
        assert!(matches!(harmonic_dim(200, 200), Err(Error::Overflow { .. })));
        assert!(harmonic_dim(0, 3).is_err());
    }

    #[test]
    fn telescoping_identity() {
        for d in 1..=5 {
            for s in 0..=30 {
                let sum: u64 = (0..=s).map(|k| harmonic_dim(d, k).unwrap()).sum();
                assert_eq!(sum, harmonic_dim(d + 1, s).unwrap(), "d={d} s={s}");
            }
        }
    }

    #[test]
    fn sphere_volumes() {
        assert_abs_diff_eq!(sphere_volume(1), 2.0 * PI, epsilon = 1e-14);
        assert_abs_diff_eq!(sphere_volume(2), 4.0 * PI, epsilon = 1e-13);
        assert_abs_diff_eq!(sphere_volume(3), 2.0 * PI * PI, epsilon = 1e-13);
    }

    #[test]
    fn gegenbauer_examples() {
        for d in 1..6 {
            for k in 0..40 {
                assert_abs_diff_eq!(gegenbauer(d, k, 1.0), 1.0, epsilon = 1e-12);
            }
        }
        for t in [-0.9, -0.1, 0.3, 0.77] {
            assert_abs_diff_eq!(gegenbauer(2, 1, t), t, epsilon = 1e-15);
            assert_abs_diff_eq!(gegenbauer(2, 2, t), 1.5 * t * t - 0.5, epsilon = 1e-15);
            // d = 1 is Chebyshev
            assert_abs_diff_eq!(gegenbauer(1, 5, t), (5.0 * t.acos()).cos(), epsilon = 1e-13);
        }
        assert_abs_diff_eq!(gegenbauer(2, 2, 0.0), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn gegenbauer_bounded_on_grid() {
        for d in [2, 3, 5] {
            for i in 0..=400 {
                let t = -1.0 + 2.0 * i as f64 / 400.0;
                let mut p = Vec::new();
                gegenbauer_all(d, 200, t, &mut p);
                for (k, v) in p.iter().enumerate() {
                    assert!(v.abs() <= 1.0 + 1e-12, "d={d} k={k} t={t} P={v}");
                }
            }
        }
    }

    #[test]
    fn addition_formula_on_s2_basis() {
        let pts = uniform_sample(2, 20, 5);
        for x in pts.iter() {
            let y = real_sph_harm(20, x);
            for k in 0..=20 {
                let sum: f64 = y[k * k..(k + 1) * (k + 1)].iter().map(|v| v * v).sum();
                assert_abs_diff_eq!(sum, (2 * k + 1) as f64 / (4.0 * PI), epsilon = 1e-10);
            }
        }
        // cross terms reproduce P_k(x·y)
        let (a, b) = (pts.point(0), pts.point(1));
        let (ya, yb) = (real_sph_harm(8, a), real_sph_harm(8, b));
        for k in 0..=8 {
            let s: f64 = (k * k..(k + 1) * (k + 1)).map(|i| ya[i] * yb[i]).sum();
            let want = (2 * k + 1) as f64 / (4.0 * PI) * gegenbauer(2, k, dot(a, b));
            assert_abs_diff_eq!(s, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn residual_examples() {
        let one = PointSet::from_rows(&[vec![0.0, 0.0, 1.0]]).unwrap();
        let rule = QuadratureRule::equal_weights(one, 1);
        assert_abs_diff_eq!(
            quadrature_residual(&rule, 1).unwrap(),
            3.0 / (4.0 * PI),
            epsilon = 1e-15
        );
        let pair = PointSet::from_rows(&[vec![0.3, 0.1, 0.9], vec![-0.3, -0.1, -0.9]]).unwrap();
        let rule = QuadratureRule::equal_weights(pair, 1);
        assert!(quadrature_residual(&rule, 1).unwrap() <= 1e-16);
        assert!(quadrature_residual(&rule, 0).is_err());
    }

    #[test]
    fn residual_rotation_invariant() {
        let pts = uniform_sample(2, 40, 8);
        let w: Vec<f64> = (0..40).map(|i| 1.0 + (i % 3) as f64).collect();
        let r0 = quadrature_residuals(&pts, &w, 12).unwrap();
        let r1 = quadrature_residuals(&pts.rotated(&rotation_z(3)).unwrap(), &w, 12).unwrap();
        for (a, b) in r0.iter().zip(&r1) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn verify_flags_negative_weight() {
        let pair = PointSet::from_rows(&[vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]]).unwrap();
        let rep = verify_rule(&pair, &[1.5, -0.5], 1, 1e-9).unwrap();
        assert!(!rep.positive);
        assert!(!rep.passed());
        let rep = verify_rule(&pair, &[0.5, 0.5], 1, 1e-9).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.exact_order(), 1);
    }

    #[test]
    fn report_csv_columns() {
        let pair = PointSet::from_rows(&[vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]]).unwrap();
        let rep = verify_rule(&pair, &[0.5, 0.5], 2, 1e-9).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "degree,residual,pass");
        assert!(lines[1].starts_with("1,") && lines[1].ends_with(",true"));
        assert!(lines[2].starts_with("2,") && lines[2].ends_with(",false"));
    }

    #[test]
    fn solve_weights_small_cases() {
        let one = PointSet::from_rows(&[vec![0.2, 0.1, 0.9]]).unwrap();
        match solve_weights(&one, 0).unwrap() {
            WeightSolution::Feasible { weights, .. } => {
                assert_abs_diff_eq!(weights[0], 1.0, epsilon = 1e-14)
            }
            other => panic!("expected feasible, got {other:?}"),
        }
        let four = uniform_sample(2, 4, 17);
        let sol = solve_weights(&four, 3).unwrap();
        assert!(!sol.is_feasible());
    }

    #[test]
    fn solve_weights_octahedron() {
        // the octahedron is a 3-design
        let oct = PointSet::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, -1.0],
        ])
        .unwrap();
        let sol = solve_weights(&oct, 3).unwrap();
        assert!(sol.is_feasible());
        for w in sol.weights() {
            assert_abs_diff_eq!(*w, 1.0 / 6.0, epsilon = 1e-12);
        }
    }
}
