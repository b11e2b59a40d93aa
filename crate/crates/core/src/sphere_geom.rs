//! Points on the unit sphere S^d and the geometry of finite point sets.
//!
//! A [`PointSet`] keeps its points in one contiguous buffer of `d + 1`
//! coordinates per point. Index identity is stable: every operation that
//! subsets or transforms a set reports results in the caller's index space.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Tolerance on `| ||x||_2 - 1 |` when reading design files.
const DESIGN_NORM_TOL: f64 = 1e-3;

/// A unit vector in R^{d+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    /// Builds a point from raw coordinates, normalizing to unit length.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a point on S^d needs at least 2 coordinates, got {}",
                coords.len()
            )));
        }
        let norm = norm2(&coords);
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cannot normalize vector with norm {norm}"
            )));
        }
        Ok(Self {
            coords: coords.into_iter().map(|c| c / norm).collect(),
        })
    }

    /// Sphere dimension d (the point lives in R^{d+1}).
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dot(&self, other: &SpherePoint) -> Result<f64> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(dot(&self.coords, &other.coords))
    }
}

/// An ordered collection of points on a common sphere S^d.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    /// An empty set on S^d.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn from_points(dim: usize, points: &[SpherePoint]) -> Result<Self> {
        let mut set = Self::empty(dim);
        for p in points {
            set.push(p)?;
        }
        Ok(set)
    }

    /// Builds a set from raw rows, normalizing each row.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::TooFewPoints {
            required: 1,
            found: 0,
        })?;
        let dim = first.len().saturating_sub(1);
        let mut set = Self::empty(dim);
        for row in rows {
            set.push(&SpherePoint::new(row.clone())?)?;
        }
        Ok(set)
    }

    /// Takes ownership of a flat buffer whose rows are already unit vectors.
    pub(crate) fn from_unit_coords(dim: usize, coords: Vec<f64>) -> Self {
        debug_assert_eq!(coords.len() % (dim + 1), 0);
        Self { dim, coords }
    }

    pub fn push(&mut self, p: &SpherePoint) -> Result<()> {
        check_same_dim(self.dim, p.dim())?;
        self.coords.extend_from_slice(p.coords());
        Ok(())
    }

    /// Sphere dimension d.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim + 1
    }

    pub fn len(&self) -> usize {
        self.coords.len() / (self.dim + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Coordinates of point `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        let n = self.dim + 1;
        &self.coords[i * n..(i + 1) * n]
    }

    pub fn get(&self, i: usize) -> SpherePoint {
        SpherePoint {
            coords: self.point(i).to_vec(),
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim + 1)
    }

    /// The points at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> PointSet {
        let mut coords = Vec::with_capacity(indices.len() * (self.dim + 1));
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        Self::from_unit_coords(self.dim, coords)
    }

    /// Appends all points of `other`.
    pub fn extend(&mut self, other: &PointSet) -> Result<()> {
        check_same_dim(self.dim, other.dim)?;
        self.coords.extend_from_slice(&other.coords);
        Ok(())
    }

    /// Applies a 3x3 rotation to every point of a set on S^2.
    pub fn rotated(&self, rot: &Matrix3<f64>) -> Result<PointSet> {
        check_same_dim(2, self.dim)?;
        let mut coords = Vec::with_capacity(self.coords.len());
        for p in self.iter() {
            for r in 0..3 {
                coords.push(rot[(r, 0)] * p[0] + rot[(r, 1)] * p[1] + rot[(r, 2)] * p[2]);
            }
        }
        Ok(Self::from_unit_coords(2, coords))
    }

    /// Raw coordinate buffer (row-major, `d + 1` entries per point).
    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }
}

/// Point-set quality: mesh norm, separation radius and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityMetrics {
    /// Candidate-set estimate of the mesh norm (radians).
    pub mesh_norm: f64,
    /// Half the minimum pairwise geodesic distance (radians).
    pub separation_radius: f64,
    pub mesh_ratio: f64,
    pub n_points: usize,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            expected: expected + 1,
            found: found + 1,
        });
    }
    Ok(())
}

/// Geodesic distance between unit vectors given as slices; the inner product
/// is clamped to [-1, 1] before `acos`.
pub(crate) fn geodesic(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

/// Great-circle distance in radians, in [0, π].
pub fn geodesic_dist(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    check_same_dim(x.dim(), y.dim())?;
    Ok(geodesic(x.coords(), y.coords()))
}

/// Half the smallest pairwise geodesic distance, computed over all pairs.
pub fn separation_radius(set: &PointSet) -> Result<f64> {
    let n = set.len();
    if n < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            found: n,
        });
    }
    // max inner product <=> min distance; exact regardless of reduction order
    let max_dot = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let p = set.point(i);
            (i + 1..n)
                .map(|j| dot(p, set.point(j)))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(0.5 * max_dot.clamp(-1.0, 1.0).acos())
}

/// Largest distance from a candidate to its nearest point of `set`.
///
/// This bounds the true mesh norm from below; how close it gets depends on
/// how densely `candidates` cover the sphere.
pub fn mesh_norm_estimate(set: &PointSet, candidates: &PointSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::TooFewPoints {
            required: 1,
            found: 0,
        });
    }
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("candidate set is empty".into()));
    }
    check_same_dim(set.dim(), candidates.dim())?;
    let min_max_dot = (0..candidates.len())
        .into_par_iter()
        .map(|c| {
            let x = candidates.point(c);
            set.iter().map(|p| dot(x, p)).fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(min_max_dot.clamp(-1.0, 1.0).acos())
}

pub fn quality_metrics(set: &PointSet, candidates: &PointSet) -> Result<QualityMetrics> {
    let mesh_norm = mesh_norm_estimate(set, candidates)?;
    let separation_radius = separation_radius(set)?;
    Ok(QualityMetrics {
        mesh_norm,
        separation_radius,
        mesh_ratio: mesh_norm / separation_radius,
        n_points: set.len(),
    })
}

/// Candidate set used when the caller supplies none: spiral points on S^2,
/// seeded uniform samples elsewhere, `factor` times the set size.
pub fn default_candidates(dim: usize, n_points: usize, factor: usize) -> PointSet {
    let n = (factor * n_points).max(1);
    if dim == 2 {
        spiral_points(n)
    } else {
        uniform_sample(dim, n, 0x6d65_7368)
    }
}

/// Spiral points on S^2.
///
/// Point `j` (1-based) has polar angle `α_j = acos(1 - (2j - 1)/n)` and
/// azimuth `β_j = (1.8 √n α_j) mod 2π`. The azimuth multiplier is applied to
/// the polar angle itself.
pub fn spiral_points(n: usize) -> PointSet {
    let nf = n as f64;
    let mut coords = Vec::with_capacity(3 * n);
    for j in 1..=n {
        let alpha = (1.0 - (2.0 * j as f64 - 1.0) / nf).clamp(-1.0, 1.0).acos();
        let beta = (1.8 * nf.sqrt() * alpha).rem_euclid(2.0 * PI);
        let (sa, ca) = alpha.sin_cos();
        let (sb, cb) = beta.sin_cos();
        coords.extend_from_slice(&[sa * cb, sa * sb, ca]);
    }
    PointSet::from_unit_coords(2, coords)
}

/// `n` i.i.d. uniform points on S^d from normalized Gaussian vectors.
pub fn uniform_sample(dim: usize, n: usize, seed: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amb = dim + 1;
    let mut coords = Vec::with_capacity(amb * n);
    let mut buf = vec![0.0; amb];
    for _ in 0..n {
        loop {
            for v in buf.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let norm = norm2(&buf);
            if norm > 1e-300 {
                coords.extend(buf.iter().map(|v| v / norm));
                break;
            }
        }
    }
    PointSet::from_unit_coords(dim, coords)
}

/// Rotation about the z-axis by `kπ/10`.
pub fn rotation_z(k: i64) -> Matrix3<f64> {
    let angle = k as f64 * PI / 10.0;
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Reads a design file: one point per line, whitespace-separated reals.
/// Blank lines and `#` comments are skipped.
pub fn load_design(path: impl AsRef<Path>) -> Result<PointSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_design(&text, path)
}

pub fn parse_design(text: &str, path: &Path) -> Result<PointSet> {
    let mut set: Option<PointSet> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            msg,
        };
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|e| parse_err(format!("bad number {tok:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() < 2 {
            return Err(parse_err(format!("expected at least 2 coordinates, got {}", row.len())));
        }
        let norm = norm2(&row);
        if !norm.is_finite() || (norm - 1.0).abs() > DESIGN_NORM_TOL {
            return Err(Error::NotOnSphere {
                path: path.to_path_buf(),
                line: lineno + 1,
                norm,
            });
        }
        let set = set.get_or_insert_with(|| PointSet::empty(row.len() - 1));
        if row.len() != set.ambient_dim() {
            return Err(parse_err(format!(
                "expected {} coordinates, got {}",
                set.ambient_dim(),
                row.len()
            )));
        }
        set.push(&SpherePoint::new(row)?)?;
    }
    set.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: "design file contains no points".into(),
    })
}

/// Packed upper-triangular table of pairwise geodesic distances.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    packed: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(set: &PointSet) -> Self {
        let n = set.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let p = set.point(i);
                (i + 1..n).map(|j| geodesic(p, set.point(j))).collect()
            })
            .collect();
        Self {
            n,
            packed: rows.concat(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering::*;
        let (a, b) = match i.cmp(&j) {
            Less => (i, j),
            Greater => (j, i),
            Equal => return 0.0,
        };
        // row a starts after sum_{r<a} (n - 1 - r) entries
        let start = a * (2 * self.n - a - 1) / 2;
        self.packed[start + (b - a - 1)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(c: &[f64]) -> SpherePoint {
        SpherePoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn geodesic_examples() {
        let x = pt(&[1.0, 0.0, 0.0]);
        assert_eq!(geodesic_dist(&x, &x).unwrap(), 0.0);
        assert_abs_diff_eq!(
            geodesic_dist(&x, &pt(&[-1.0, 0.0, 0.0])).unwrap(),
            PI,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            geodesic_dist(&x, &pt(&[0.0, 1.0, 0.0])).unwrap(),
            PI / 2.0,
            epsilon = 1e-15
        );
        assert!(matches!(
            geodesic_dist(&x, &pt(&[1.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constructor_normalizes() {
        let p = pt(&[3.0, 4.0, 0.0]);
        assert!((norm2(p.coords()) - 1.0).abs() <= 1e-12);
        assert!(SpherePoint::new(vec![0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn separation_radius_examples() {
        let theta: f64 = 0.7;
        let two = PointSet::from_rows(&[vec![1.0, 0.0, 0.0], vec![theta.cos(), theta.sin(), 0.0]])
            .unwrap();
        assert_abs_diff_eq!(separation_radius(&two).unwrap(), theta / 2.0, epsilon = 1e-12);

        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 3.0;
                vec![a.cos(), a.sin(), 0.0]
            })
            .collect();
        let tri = PointSet::from_rows(&rows).unwrap();
        assert_abs_diff_eq!(separation_radius(&tri).unwrap(), PI / 3.0, epsilon = 1e-12);

        let dup = PointSet::from_rows(&[vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(separation_radius(&dup).unwrap(), 0.0);

        let one = PointSet::from_rows(&[vec![0.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(separation_radius(&one), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn mesh_norm_examples() {
        let set = PointSet::from_rows(&[vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(mesh_norm_estimate(&set, &set).unwrap(), 0.0);

        let north = PointSet::from_rows(&[vec![0.0, 0.0, 1.0]]).unwrap();
        let south = PointSet::from_rows(&[vec![0.0, 0.0, -1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(mesh_norm_estimate(&north, &south).unwrap(), PI, epsilon = 1e-15);

        let poles = PointSet::from_rows(&[vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]]).unwrap();
        let h = mesh_norm_estimate(&poles, &spiral_points(10_000)).unwrap();
        assert!((h - PI / 2.0).abs() < 0.05, "h = {h}");

        assert!(mesh_norm_estimate(&PointSet::empty(2), &poles).is_err());
        assert!(mesh_norm_estimate(&poles, &PointSet::empty(2)).is_err());
    }

    #[test]
    fn antipodal_pair_quality() {
        let poles = PointSet::from_rows(&[vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]]).unwrap();
        let m = quality_metrics(&poles, &spiral_points(10_000)).unwrap();
        assert_abs_diff_eq!(m.separation_radius, PI / 2.0, epsilon = 1e-12);
        assert!((m.mesh_norm - PI / 2.0).abs() < 0.05);
        assert!((m.mesh_ratio - 1.0).abs() < 0.05);
        assert_eq!(m.n_points, 2);
    }

    #[test]
    fn spiral_first_point() {
        let s = spiral_points(10_000);
        let alpha1 = (1.0f64 - 1.0 / 10_000.0).acos();
        assert_abs_diff_eq!(s.point(0)[2], alpha1.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.point(0)[2].acos(), alpha1, epsilon = 1e-9);
        for p in s.iter() {
            assert!((norm2(p) - 1.0).abs() <= 1e-12);
        }
        let one = spiral_points(1);
        assert_abs_diff_eq!(one.point(0)[2].acos(), PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn uniform_sample_properties() {
        assert_eq!(uniform_sample(3, 50, 9), uniform_sample(3, 50, 9));
        let hi = uniform_sample(50, 1000, 1);
        assert_eq!(hi.len(), 1000);
        for p in hi.iter() {
            assert!((norm2(p) - 1.0).abs() <= 1e-12);
        }
        let n = 100_000;
        let s = uniform_sample(2, n, 42);
        for c in 0..3 {
            let mean = s.iter().map(|p| p[c]).sum::<f64>() / n as f64;
            assert!(mean.abs() < 5.0 / (n as f64).sqrt(), "component {c} mean {mean}");
        }
    }

    #[test]
    fn rotation_examples() {
        assert_abs_diff_eq!(rotation_z(0), Matrix3::identity(), epsilon = 1e-15);
        let p = nalgebra::Vector3::new(0.3, -0.2, 0.9);
        let r10 = rotation_z(10) * p;
        assert_abs_diff_eq!(r10, nalgebra::Vector3::new(-0.3, 0.2, 0.9), epsilon = 1e-15);
        let r5 = rotation_z(5) * p;
        assert_abs_diff_eq!(r5, nalgebra::Vector3::new(0.2, 0.3, 0.9), epsilon = 1e-15);
        for k in 0..40 {
            let a = rotation_z(k);
            assert_abs_diff_eq!(a * a.transpose(), Matrix3::identity(), epsilon = 1e-14);
            assert_abs_diff_eq!(a.determinant(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn parse_design_cases() {
        let p = Path::new("mem");
        let set = parse_design("1 0 0\n\n# comment\n0 1 0  # trailing\n", p).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.dim(), 2);
        assert!(parse_design("", p).is_err());
        assert!(parse_design("# only comments\n\n", p).is_err());
        match parse_design("1 0 0\n0 x 1\n", p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_design("1 0 0\n0 1.01 0\n", p),
            Err(Error::NotOnSphere { line: 2, .. })
        ));
        assert!(parse_design("1 0 0\n0 1\n", p).is_err());
    }

    #[test]
    fn distance_matrix_indexing() {
        let set = uniform_sample(2, 17, 3);
        let dm = DistanceMatrix::new(&set);
        for i in 0..17 {
            for j in 0..17 {
                let want = if i == j { 0.0 } else { geodesic(set.point(i), set.point(j)) };
                assert_eq!(dm.get(i, j), want);
            }
        }
    }
}
