//! Data generators and scoring for the simulations.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernels::wendland;
use crate::sphere_geom::{dot, load_design, spiral_points, PointSet};

/// `f(x) = Σ_i ψ(‖x − z_i‖₂ / c)` with the Wendland function ψ.
pub fn target_f(x: &[f64], centers: &PointSet, c: f64) -> f64 {
    centers
        .iter()
        .map(|z| {
            let chord = (2.0 - 2.0 * dot(x, z)).max(0.0).sqrt();
            wendland(chord / c)
        })
        .sum()
}

/// [`target_f`] at every point of `points`.
pub fn target_values(points: &PointSet, centers: &PointSet, c: f64) -> Vec<f64> {
    points.iter().map(|x| target_f(x, centers, c)).collect()
}

/// Where the target's bump centers come from.
#[derive(Debug, Clone, PartialEq)]
pub enum CenterSource<'a> {
    /// `spiral_points(κ)`, standing in for equal-area region centers.
    Spiral,
    /// A file of precomputed centers, one per line.
    File(&'a Path),
}

pub fn gen_centers(kappa: usize, source: CenterSource<'_>) -> Result<PointSet> {
    if kappa == 0 {
        return Err(Error::InvalidParameter("need at least one center".into()));
    }
    match source {
        CenterSource::Spiral => Ok(spiral_points(kappa)),
        CenterSource::File(path) => {
            let pts = load_design(path)?;
            if pts.len() != kappa {
                return Err(Error::InvalidParameter(format!(
                    "{} holds {} centers, expected {kappa}",
                    path.display(),
                    pts.len()
                )));
            }
            Ok(pts)
        }
    }
}

fn check_level(level: f64, what: &str) -> Result<()> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::InvalidParameter(format!("{what} must be nonnegative, got {level}")));
    }
    Ok(())
}

/// `y_i + ε_i` with `ε_i ~ N(0, δ²)` i.i.d.
pub fn add_noise(y: &[f64], delta: f64, seed: u64) -> Result<Vec<f64>> {
    check_level(delta, "noise level")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(y.iter()
        .map(|v| {
            let e: f64 = rng.sample(StandardNormal);
            v + delta * e
        })
        .collect())
}

/// Noise whose magnitude is uniform on `[θM, M]` with a fair random sign.
pub fn bounded_noise(n: usize, theta: f64, m: f64, seed: u64) -> Result<Vec<f64>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParameter(format!("theta must lie in (0, 1], got {theta}")));
    }
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidParameter(format!("bound M must be positive, got {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let mag = if theta == 1.0 {
                m
            } else {
                rng.random_range(theta * m..=m)
            };
            if rng.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect())
}

/// Root mean square error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "rmse needs equal nonempty lengths, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((s / pred.len() as f64).sqrt())
}

/// Ranks with ties sharing their average rank (1-based).
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; NaN when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Mixes a master seed with stream tags into an independent seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    // splitmix64 finalizer applied after each tag
    let mut h = master ^ 0x9e37_79b9_7f4a_7c15;
    for &t in tags {
        h = h.wrapping_add(t).wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}
