//! Dividing a labeled dataset into disjoint blocks.
//!
//! Partitions work on indices into the parent point set, so outputs travel
//! with their inputs without re-association. Three strategies are provided:
//! the two-stage select-and-judge division ([`saj`]), equal splits of
//! rotated copies ([`rotation_division`]) and plain random splits
//! ([`random_division`]).

use std::fmt::Write as _;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sphere_geom::{geodesic, mesh_norm_estimate, separation_radius, PointSet};

/// Default multiple of `c0` used as the exclusion-cap radius. With 2 every
/// block ends up with separation radius strictly above `c0`.
pub const DEFAULT_CAP_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMethod {
    Saj,
    Rotation,
    Random,
}

impl PartitionMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            PartitionMethod::Saj => "saj",
            PartitionMethod::Rotation => "rotation",
            PartitionMethod::Random => "random",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "saj" => Some(PartitionMethod::Saj),
            "rotation" => Some(PartitionMethod::Rotation),
            "random" => Some(PartitionMethod::Random),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionParams {
    pub c0: Option<f64>,
    pub cap_factor: Option<f64>,
    pub m: Option<usize>,
    pub seed: u64,
}

/// Disjoint, exhaustive, nonempty blocks of indices `0..parent_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub blocks: Vec<Vec<usize>>,
    pub parent_size: usize,
    pub method: PartitionMethod,
    pub params: PartitionParams,
}

impl Partition {
    /// Builds and validates a partition.
    pub fn new(
        blocks: Vec<Vec<usize>>,
        parent_size: usize,
        method: PartitionMethod,
        params: PartitionParams,
    ) -> Result<Self> {
        let p = Self {
            blocks,
            parent_size,
            method,
            params,
        };
        p.validate()?;
        Ok(p)
    }

    /// The one-block partition of `0..n`.
    pub fn single(n: usize) -> Self {
        Self {
            blocks: vec![(0..n).collect()],
            parent_size: n,
            method: PartitionMethod::Random,
            params: PartitionParams {
                c0: None,
                cap_factor: None,
                m: Some(1),
                seed: 0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.parent_size];
        for (b, block) in self.blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidPartition(format!("block {b} is empty")));
            }
            for &i in block {
                if i >= self.parent_size {
                    return Err(Error::InvalidPartition(format!(
                        "index {i} in block {b} exceeds parent size {}",
                        self.parent_size
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidPartition(format!("index {i} appears twice")));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("index {i} is in no block")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// `max − min` block size.
    pub fn size_spread(&self) -> usize {
        let sizes = self.block_sizes();
        match (sizes.iter().max(), sizes.iter().min()) {
            (Some(a), Some(b)) => a - b,
            _ => 0,
        }
    }

    /// Text form: a `#` header with method and parameters, then one line
    /// per block of space-separated zero-based indices.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# method={} parent_size={} seed={}",
            self.method.as_str(),
            self.parent_size,
            self.params.seed
        );
        if let Some(c0) = self.params.c0 {
            write!(s, " c0={c0:e}").unwrap();
        }
        if let Some(cf) = self.params.cap_factor {
            write!(s, " cap_factor={cf:e}").unwrap();
        }
        if let Some(m) = self.params.m {
            write!(s, " m={m}").unwrap();
        }
        s.push('\n');
        for block in &self.blocks {
            let line: Vec<String> = block.iter().map(|i| i.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    /// Inverse of [`Partition::to_text`]. Without a header the partition is
    /// tagged `random` with seed 0 and the parent size is inferred.
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::Parse {
            path: "<partition>".into(),
            line,
            msg,
        };
        let mut method = PartitionMethod::Random;
        let mut params = PartitionParams {
            c0: None,
            cap_factor: None,
            m: None,
            seed: 0,
        };
        let mut parent_size = None;
        let mut blocks = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for kv in header.split_whitespace() {
                    let Some((k, v)) = kv.split_once('=') else {
                        continue;
                    };
                    let num = |v: &str| v.parse::<f64>().map_err(|e| bad(ln + 1, format!("{k}: {e}")));
                    let int = |v: &str| v.parse::<u64>().map_err(|e| bad(ln + 1, format!("{k}: {e}")));
                    match k {
                        "method" => {
                            method = PartitionMethod::parse(v)
                                .ok_or_else(|| bad(ln + 1, format!("unknown method {v}")))?
                        }
                        "parent_size" => parent_size = Some(int(v)? as usize),
                        "seed" => params.seed = int(v)?,
                        "c0" => params.c0 = Some(num(v)?),
                        "cap_factor" => params.cap_factor = Some(num(v)?),
                        "m" => params.m = Some(int(v)? as usize),
                        _ => {}
                    }
                }
                continue;
            }
            let block = line
                .split_whitespace()
                .map(|tok| tok.parse::<usize>().map_err(|e| bad(ln + 1, format!("{tok}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            blocks.push(block);
        }
        let inferred = blocks.iter().map(Vec::len).sum();
        Partition::new(blocks, parent_size.unwrap_or(inferred), method, params)
    }
}

fn check_c0(c0: f64, cap_factor: f64) -> Result<()> {
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::InvalidParameter(format!("c0 must be positive, got {c0}")));
    }
    if !(cap_factor > 0.0) || !cap_factor.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "cap_factor must be positive, got {cap_factor}"
        )));
    }
    if c0 >= std::f64::consts::PI {
        warn!("c0 = {c0} >= pi: every block will be a singleton");
    }
    Ok(())
}

/// True when `x` lies outside the exclusion cap of every member of `block`.
fn fits(points: &PointSet, block: &[usize], x: usize, radius: f64) -> bool {
    let px = points.point(x);
    block.iter().all(|&y| geodesic(px, points.point(y)) > radius)
}

/// Stage 1 of select-and-judge: greedy blocks in which no two points are
/// within `cap_factor · c0` of each other.
///
/// Each block starts from a random remaining point; further points are drawn
/// at random from those not yet excluded by a member's cap. The leftovers
/// are divided the same way until nothing remains.
pub fn saj_stage1(points: &PointSet, c0: f64, seed: u64, cap_factor: f64) -> Result<Partition> {
    check_c0(c0, cap_factor)?;
    let radius = cap_factor * c0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut in_block = vec![false; points.len()];
    let mut blocks = Vec::new();
    while !remaining.is_empty() {
        let mut candidates = remaining.clone();
        let mut block = Vec::new();
        while !candidates.is_empty() {
            let k = rng.random_range(0..candidates.len());
            let x = candidates.swap_remove(k);
            block.push(x);
            in_block[x] = true;
            let px = points.point(x);
            candidates.retain(|&y| geodesic(px, points.point(y)) > radius);
        }
        remaining.retain(|&y| !in_block[y]);
        block.sort_unstable();
        blocks.push(block);
    }
    let m = blocks.len();
    Partition::new(
        blocks,
        points.len(),
        PartitionMethod::Saj,
        PartitionParams {
            c0: Some(c0),
            cap_factor: Some(cap_factor),
            m: Some(m),
            seed,
        },
    )
}

/// Stage 2 of select-and-judge: trims blocks larger than `⌊N/m⌋` and moves
/// the surplus into smaller blocks wherever the separation requirement
/// survives the insertion. Surplus that fits nowhere returns to its origin.
///
/// Surplus points are visited in seeded-random order; for each, candidate
/// blocks are tried smallest first. Since blocks only grow, a point that
/// fits nowhere at its turn never fits later, so one pass suffices.
pub fn saj_stage2(
    p: &Partition,
    points: &PointSet,
    c0: f64,
    seed: u64,
    cap_factor: f64,
) -> Result<Partition> {
    check_c0(c0, cap_factor)?;
    if p.method != PartitionMethod::Saj
        || p.params.c0 != Some(c0)
        || p.params.cap_factor != Some(cap_factor)
    {
        return Err(Error::InvalidParameter(
            "stage 2 needs a stage 1 partition built with the same c0 and cap_factor".into(),
        ));
    }
    if p.parent_size != points.len() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} points, set has {}",
            p.parent_size,
            points.len()
        )));
    }
    p.validate()?;
    let radius = cap_factor * c0;
    let m = p.len();
    let nbar = points.len() / m;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);

    let mut blocks = p.blocks.clone();
    let oversized: Vec<bool> = blocks.iter().map(|b| b.len() > nbar).collect();
    let mut surplus: Vec<(usize, usize)> = Vec::new();
    for (j, block) in blocks.iter_mut().enumerate() {
        if oversized[j] {
            block.shuffle(&mut rng);
            surplus.extend(block.drain(nbar..).map(|x| (x, j)));
        }
    }
    surplus.shuffle(&mut rng);

    let targets: Vec<usize> = (0..m).filter(|&j| !oversized[j]).collect();
    let mut unplaced = Vec::new();
    for (x, origin) in surplus {
        let mut order: Vec<usize> = targets
            .iter()
            .copied()
            .filter(|&j| blocks[j].len() < nbar)
            .collect();
        order.sort_by_key(|&j| (blocks[j].len(), j));
        match order.into_iter().find(|&j| fits(points, &blocks[j], x, radius)) {
            Some(j) => blocks[j].push(x),
            None => unplaced.push((x, origin)),
        }
    }
    for (x, origin) in unplaced {
        blocks[origin].push(x);
    }
    for b in &mut blocks {
        b.sort_unstable();
    }
    Partition::new(blocks, points.len(), PartitionMethod::Saj, p.params)
}

/// Both select-and-judge stages with the default cap factor.
pub fn saj(points: &PointSet, c0: f64, seed: u64) -> Result<Partition> {
    saj_with_cap(points, c0, seed, DEFAULT_CAP_FACTOR)
}

pub fn saj_with_cap(points: &PointSet, c0: f64, seed: u64, cap_factor: f64) -> Result<Partition> {
    let p = saj_stage1(points, c0, seed, cap_factor)?;
    saj_stage2(&p, points, c0, seed, cap_factor)
}

/// Splits a shuffled index range into `q` blocks whose sizes differ by at
/// most one.
fn equal_split(mut idx: Vec<usize>, q: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    idx.shuffle(rng);
    let base = idx.len() / q;
    let extra = idx.len() % q;
    let mut out = Vec::with_capacity(q);
    let mut start = 0;
    for b in 0..q {
        let len = base + usize::from(b < extra);
        let mut block = idx[start..start + len].to_vec();
        block.sort_unstable();
        out.push(block);
        start += len;
    }
    out
}

/// Division of `g` concatenated copies (sizes `set_sizes`, indices running
/// through the copies in order) into `m ≥ g` blocks.
///
/// With `r = m mod g`, `r` randomly chosen copies split equally into
/// `⌈m/g⌉` blocks and the rest into `⌊m/g⌋`. Blocks never mix copies.
pub fn rotation_division(set_sizes: &[usize], m: usize, seed: u64) -> Result<Partition> {
    let g = set_sizes.len();
    if g == 0 {
        return Err(Error::InvalidParameter("no sets to divide".into()));
    }
    if m < g {
        return Err(Error::InvalidParameter(format!(
            "rotation division needs m >= {g} (one block per set), got {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = m % g;
    let mut order: Vec<usize> = (0..g).collect();
    order.shuffle(&mut rng);
    let mut counts = vec![m / g; g];
    for &k in &order[..r] {
        counts[k] += 1;
    }
    let mut blocks = Vec::with_capacity(m);
    let mut offset = 0;
    for (k, &n) in set_sizes.iter().enumerate() {
        if counts[k] > n {
            return Err(Error::InvalidParameter(format!(
                "set {k} has {n} points but must split into {} blocks",
                counts[k]
            )));
        }
        blocks.extend(equal_split((offset..offset + n).collect(), counts[k], &mut rng));
        offset += n;
    }
    Partition::new(
        blocks,
        offset,
        PartitionMethod::Rotation,
        PartitionParams {
            c0: None,
            cap_factor: None,
            m: Some(m),
            seed,
        },
    )
}

/// Random permutation of `0..n` cut into `m` near-equal blocks.
pub fn random_division(n: usize, m: usize, seed: u64) -> Result<Partition> {
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!(
            "random division needs 1 <= m <= {n}, got {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = equal_split((0..n).collect(), m, &mut rng);
    Partition::new(
        blocks,
        n,
        PartitionMethod::Random,
        PartitionParams {
            c0: None,
            cap_factor: None,
            m: Some(m),
            seed,
        },
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockQuality {
    pub size: usize,
    /// `None` for singleton blocks.
    pub separation_radius: Option<f64>,
    pub mesh_norm_estimate: f64,
    pub mesh_ratio: Option<f64>,
    pub violates_tau: bool,
    pub violates_c0: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockReport {
    pub blocks: Vec<BlockQuality>,
    pub min_size: usize,
    pub max_size: usize,
    pub mean_size: f64,
    /// Smallest separation radius over non-singleton blocks.
    pub min_separation_radius: Option<f64>,
    pub violations: usize,
}

/// Optional bounds checked by [`block_report`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ReportBounds {
    /// Flags blocks with mesh ratio above this.
    pub tau: Option<f64>,
    /// Flags blocks whose separation radius is not above this.
    pub c0: Option<f64>,
}

pub fn block_report(
    p: &Partition,
    points: &PointSet,
    candidates: &PointSet,
    bounds: ReportBounds,
) -> Result<BlockReport> {
    if p.parent_size != points.len() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} points, set has {}",
            p.parent_size,
            points.len()
        )));
    }
    let mut blocks = Vec::with_capacity(p.len());
    for block in &p.blocks {
        let sub = points.subset(block);
        let q = if sub.len() >= 2 {
            Some(separation_radius(&sub)?)
        } else {
            None
        };
        let h = mesh_norm_estimate(&sub, candidates)?;
        let rho = q.map(|q| h / q);
        let violates_tau = matches!((bounds.tau, rho), (Some(t), Some(r)) if r > t);
        let violates_c0 = matches!((bounds.c0, q), (Some(c), Some(q)) if q <= c);
        blocks.push(BlockQuality {
            size: sub.len(),
            separation_radius: q,
            mesh_norm_estimate: h,
            mesh_ratio: rho,
            violates_tau,
            violates_c0,
        });
    }
    let sizes = p.block_sizes();
    Ok(BlockReport {
        min_size: sizes.iter().copied().min().unwrap_or(0),
        max_size: sizes.iter().copied().max().unwrap_or(0),
        mean_size: p.parent_size as f64 / p.len().max(1) as f64,
        min_separation_radius: blocks
            .iter()
            .filter_map(|b| b.separation_radius)
            .reduce(f64::min),
        violations: blocks.iter().filter(|b| b.violates_tau || b.violates_c0).count(),
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere_geom::{rotation_z, spiral_points, uniform_sample};

    fn brute_q(points: &PointSet, block: &[usize]) -> f64 {
        let mut best = f64::INFINITY;
        for (a, &i) in block.iter().enumerate() {
            for &j in &block[a + 1..] {
                best = best.min(geodesic(points.point(i), points.point(j)));
            }
        }
        best / 2.0
    }

    #[test]
    fn stage1_extremes() {
        let pts = uniform_sample(2, 40, 1);
        let p = saj_stage1(&pts, 3.0, 7, 2.0).unwrap();
        assert_eq!(p.len(), 40);
        let q = separation_radius(&pts).unwrap();
        let p = saj_stage1(&pts, 0.99 * q, 7, 2.0).unwrap();
        assert_eq!(p.len(), 1);
        assert!(saj_stage1(&pts, 0.0, 7, 2.0).is_err());
        assert!(saj_stage1(&pts, -1.0, 7, 2.0).is_err());
    }

    #[test]
    fn saj_separation_on_rotated_copies() {
        let base = spiral_points(300);
        let mut pts = base.clone();
        for k in 1..3 {
            pts.extend(&base.rotated(&rotation_z(k)).unwrap()).unwrap();
        }
        for cap in [1.0, 2.0] {
            let c0 = 0.1;
            let p = saj_with_cap(&pts, c0, 11, cap).unwrap();
            for block in &p.blocks {
                if block.len() > 1 {
                    let q = brute_q(&pts, block);
                    assert!(q > c0 * cap / 2.0, "q = {q}");
                }
            }
        }
    }

    #[test]
    fn stage2_balanced_input_unchanged() {
        let pts = uniform_sample(2, 12, 4);
        // stage 1 with tiny c0 gives one block of everything, already balanced
        let p = saj_stage1(&pts, 1e-6, 1, 2.0).unwrap();
        let q = saj_stage2(&p, &pts, 1e-6, 1, 2.0).unwrap();
        assert_eq!(p, q);
        assert!(saj_stage2(&p, &pts, 2e-6, 1, 2.0).is_err());
    }

    #[test]
    fn stage2_two_blocks() {
        // block 0: ten points spread around the equator, block 1: two points near the north pole
        let mut rows = Vec::new();
        for i in 0..10 {
            let a = i as f64 * std::f64::consts::TAU / 10.0;
            rows.push(vec![a.cos(), a.sin(), 0.0]);
        }
        rows.push(vec![0.0, 0.0, 1.0]);
        rows.push(vec![0.3, 0.0, 1.0]);
        let pts = PointSet::from_rows(&rows).unwrap();
        let c0 = 0.1;
        let p = Partition::new(
            vec![(0..10).collect(), vec![10, 11]],
            12,
            PartitionMethod::Saj,
            PartitionParams {
                c0: Some(c0),
                cap_factor: Some(2.0),
                m: Some(2),
                seed: 0,
            },
        )
        .unwrap();
        let q = saj_stage2(&p, &pts, c0, 3, 2.0).unwrap();
        assert_eq!(q.block_sizes(), vec![6, 6]);
        for block in &q.blocks {
            assert!(brute_q(&pts, block) > c0);
        }
        // with a large cap nothing fits next to the pole points, so all surplus returns
        let c0 = 0.8;
        let p = Partition { params: PartitionParams { c0: Some(c0), ..p.params }, ..p };
        let q = saj_stage2(&p, &pts, c0, 3, 2.0).unwrap();
        assert_eq!(q, p);
    }

    #[test]
    fn saj_is_deterministic() {
        let pts = uniform_sample(2, 200, 9);
        let a = saj(&pts, 0.05, 42).unwrap();
        let b = saj(&pts, 0.05, 42).unwrap();
        assert_eq!(a, b);
        let cands = spiral_points(2000);
        let rep = block_report(&a, &pts, &cands, ReportBounds { tau: None, c0: Some(0.05) }).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.min_separation_radius.unwrap() > 0.05);
    }

    #[test]
    fn rotation_examples() {
        let p = rotation_division(&[1038; 10], 10, 1).unwrap();
        assert_eq!(p.block_sizes(), vec![1038; 10]);
        let p = rotation_division(&[1038; 10], 20, 1).unwrap();
        assert_eq!(p.block_sizes(), vec![519; 20]);
        let p = rotation_division(&[50; 10], 12, 1).unwrap();
        assert_eq!(p.len(), 12);
        let mut sizes = p.block_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, [vec![25; 4], vec![50; 8]].concat());
        assert!(rotation_division(&[50; 10], 9, 1).is_err());
    }

    #[test]
    fn random_examples() {
        let p = random_division(10, 1, 3).unwrap();
        assert_eq!(p.blocks, vec![(0..10).collect::<Vec<_>>()]);
        assert_eq!(random_division(10, 10, 3).unwrap().block_sizes(), vec![1; 10]);
        let mut sizes = random_division(10, 3, 3).unwrap().block_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        assert!(random_division(10, 0, 3).is_err());
        assert!(random_division(10, 11, 3).is_err());
    }

    #[test]
    fn singleton_report_and_text_roundtrip() {
        let pts = uniform_sample(2, 6, 2);
        let p = random_division(6, 6, 0).unwrap();
        let rep = block_report(&p, &pts, &spiral_points(100), ReportBounds::default()).unwrap();
        assert!(rep.blocks.iter().all(|b| b.separation_radius.is_none()));
        assert!(rep.min_separation_radius.is_none());

        let p = saj(&uniform_sample(2, 80, 5), 0.1, 8).unwrap();
        assert_eq!(Partition::from_text(&p.to_text()).unwrap(), p);
        assert!(Partition::from_text("0 1\n1 2\n").is_err());
        assert!(Partition::from_text("0 2\n").is_err());
    }

    #[test]
    fn random_division_of_clusters_is_worse_than_saj() {
        // two tight clusters of 30 points each
        let mut rows = Vec::new();
        for c in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]] {
            let noise = uniform_sample(2, 30, c[0] as u64 + 1);
            for p in noise.iter() {
                rows.push((0..3).map(|i| c[i] + 0.05 * p[i]).collect());
            }
        }
        let pts = PointSet::from_rows(&rows).unwrap();
        let cands = spiral_points(500);
        let s = saj(&pts, 0.01, 1).unwrap();
        let r = random_division(pts.len(), s.len(), 1).unwrap();
        let qs = block_report(&s, &pts, &cands, ReportBounds::default()).unwrap();
        let qr = block_report(&r, &pts, &cands, ReportBounds::default()).unwrap();
        assert!(qr.min_separation_radius.unwrap() < qs.min_separation_radius.unwrap());
    }
}
