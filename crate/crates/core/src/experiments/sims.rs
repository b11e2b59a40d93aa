//! The simulation drivers.
//!
//! Shared conventions:
//! - test inputs are spiral points on S² (uniform samples in higher
//!   dimension) and targets are noise-free;
//! - repetition `r` draws one standard-normal vector per data stream and
//!   scales it by each δ, so all noise levels and grid points of a
//!   repetition see the same underlying draw;
//! - random divisions are seeded from `(master seed, grid index, r)`;
//! - `wall_time` is the training time of one fit: factorization plus the
//!   per-output-vector share of the solve. Prediction is not timed.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use nalgebra::DMatrix;

use crate::dki::DkiSystem;
use crate::error::{Error, Result};
use crate::interpolation::{KiSystem, SolveMethod};
use crate::kernels::{cross_matrix, KernelSpec};
use crate::partition::{random_division, rotation_division, saj_with_cap, Partition};
use crate::sphere_geom::{load_design, rotation_z, spiral_points, uniform_sample, PointSet};

use super::config::{Division, ExperimentConfig, ExperimentKind};
use super::data::{add_noise, derive_seed, gen_centers, rmse, target_values, CenterSource};
use super::table::{ResultRow, ResultTable};

/// Locates the design of strength `t` in `dir`: a file whose name starts
/// with `ss{t:03}.` (symmetric designs) or, failing that, `sf{t:03}.`.
pub fn find_design(dir: &Path, t: usize) -> Result<PathBuf> {
    let missing = || Error::MissingDesign {
        t,
        dir: dir.to_path_buf(),
    };
    let entries = std::fs::read_dir(dir).map_err(|_| missing())?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();
    for prefix in [format!("ss{t:03}."), format!("sf{t:03}.")] {
        if let Some(n) = names.iter().find(|n| n.starts_with(&prefix)) {
            return Ok(dir.join(n));
        }
    }
    Err(missing())
}

pub fn load_t_design(dir: &Path, t: usize) -> Result<PointSet> {
    load_design(find_design(dir, t)?)
}

/// Everything a run shares: target, test set and noise settings.
struct Setup {
    cfg: ExperimentConfig,
    kernel: KernelSpec,
    centers: PointSet,
    width: f64,
    tests: PointSet,
    truth: Vec<f64>,
    noise: Vec<f64>,
    reps: usize,
    seed: u64,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let dim = cfg.dim();
        let target = cfg.target();
        let seed = cfg.seed();
        let centers = match (&target.centers_file, dim) {
            (Some(path), _) => gen_centers(target.kappa, CenterSource::File(path))?,
            (None, 2) => gen_centers(target.kappa, CenterSource::Spiral)?,
            (None, _) => uniform_sample(dim, target.kappa, derive_seed(seed, &[cfg.tag(), 3])),
        };
        if centers.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim + 1,
                found: centers.ambient_dim(),
            });
        }
        let tests = if dim == 2 {
            spiral_points(cfg.test_points())
        } else {
            uniform_sample(dim, cfg.test_points(), derive_seed(seed, &[cfg.tag(), 2]))
        };
        let truth = target_values(&tests, &centers, target.width);
        Ok(Self {
            kernel: cfg.kernel(),
            centers,
            width: target.width,
            tests,
            truth,
            noise: cfg.noise(),
            reps: cfg.repetitions(),
            seed,
            cfg: cfg.clone(),
        })
    }

    fn clean(&self, x: &PointSet) -> Vec<f64> {
        target_values(x, &self.centers, self.width)
    }

    /// Noisy outputs for repetition `rep` of data stream `stream`, one
    /// column per noise level.
    fn noisy(&self, clean: &[f64], stream: u64, rep: usize) -> Result<DMatrix<f64>> {
        let s = derive_seed(self.seed, &[self.cfg.tag(), 100 + stream, rep as u64]);
        let mut m = DMatrix::zeros(clean.len(), self.noise.len());
        for (j, &delta) in self.noise.iter().enumerate() {
            m.set_column(j, &nalgebra::DVector::from_vec(add_noise(clean, delta, s)?));
        }
        Ok(m)
    }

    /// All repetitions side by side: column `d·R + r` holds noise level `d`
    /// of repetition `r`.
    fn noisy_all(&self, clean: &[f64], stream: u64) -> Result<DMatrix<f64>> {
        let (nd, nr) = (self.noise.len(), self.reps);
        let mut m = DMatrix::zeros(clean.len(), nd * nr);
        for r in 0..nr {
            let block = self.noisy(clean, stream, r)?;
            for d in 0..nd {
                m.set_column(d * nr + r, &block.column(d));
            }
        }
        Ok(m)
    }

    fn rmse_col(&self, pred: &DMatrix<f64>, col: usize) -> Result<f64> {
        let p: Vec<f64> = pred.column(col).iter().copied().collect();
        rmse(&p, &self.truth)
    }

    fn elapsed(&self, start: Instant) -> f64 {
        if self.cfg.timing() {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }

    fn design_dir(&self) -> PathBuf {
        self.cfg.design_dir()
    }

    fn row(&self, method: &str) -> ResultRow {
        ResultRow {
            experiment: self.cfg.experiment.as_str().to_string(),
            method: method.to_string(),
            repetition: 0,
            delta: 0.0,
            t: None,
            copies: None,
            c0: None,
            lambda: None,
            s_star: None,
            sigma: None,
            n_train: 0,
            m: 1,
            size_spread: 0,
            rmse: f64::NAN,
            mean_block_cond: f64::NAN,
            full_cond: f64::NAN,
            fallback_blocks: 0,
            wall_time: 0.0,
        }
    }
}

/// One factored system fitted to every column at once; rows are emitted
/// for each (noise level, repetition) column pair.
struct BatchFit {
    pred: DMatrix<f64>,
    cond: f64,
    fallback: usize,
    wall: f64,
}

fn batch_fit(setup: &Setup, sys_builder: impl FnOnce() -> Result<KiSystem>, ys: &DMatrix<f64>) -> Result<BatchFit> {
    let start = Instant::now();
    let sys = sys_builder()?;
    let factor_time = setup.elapsed(start);
    let start = Instant::now();
    let coeffs = sys.solve_many(ys)?;
    let solve_time = setup.elapsed(start) / ys.ncols().max(1) as f64;
    let pred = cross_matrix(sys.kernel(), &setup.tests, sys.centers())? * coeffs;
    let cond = if setup.cfg.conditioning() {
        sys.cond()
    } else {
        f64::NAN
    };
    Ok(BatchFit {
        pred,
        cond,
        fallback: usize::from(sys.method() == SolveMethod::EigPseudoinverse),
        wall: factor_time + solve_time,
    })
}

/// Pushes one row per (δ, repetition) for a [`BatchFit`] laid out as in
/// [`Setup::noisy_all`].
fn push_batch(setup: &Setup, table: &mut ResultTable, fit: &BatchFit, base: &ResultRow) -> Result<()> {
    for (d, &delta) in setup.noise.iter().enumerate() {
        for r in 0..setup.reps {
            table.rows.push(ResultRow {
                repetition: r,
                delta,
                rmse: setup.rmse_col(&fit.pred, d * setup.reps + r)?,
                ..base.clone()
            });
        }
    }
    Ok(())
}

/// Kernel interpolation on designs of increasing strength.
pub fn run_sim1_ki(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let setup = Setup::new(cfg)?;
    let dir = setup.design_dir();
    let mut table = ResultTable::default();
    for (ti, &t) in cfg.t_grid().iter().enumerate() {
        let x = load_t_design(&dir, t)?;
        info!("sim1_ki: t = {t}, N = {}", x.len());
        let ys = setup.noisy_all(&setup.clean(&x), ti as u64)?;
        let fit = batch_fit(&setup, || KiSystem::new(x.clone(), &setup.kernel), &ys)?;
        let base = ResultRow {
            t: Some(t),
            n_train: x.len(),
            m: 1,
            mean_block_cond: fit.cond,
            full_cond: fit.cond,
            fallback_blocks: fit.fallback,
            wall_time: fit.wall,
            ..setup.row("ki")
        };
        push_batch(&setup, &mut table, &fit, &base)?;
    }
    Ok(table)
}

/// Distributed interpolation over `k` rotated copies of one design, one
/// block per copy. Copy `k` is the base design rotated by `A_k`.
pub fn run_sim1_dki(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let setup = Setup::new(cfg)?;
    let t = cfg.design_t();
    let base = load_t_design(&setup.design_dir(), t)?;
    let copies = cfg.copies();
    let kmax = *copies.iter().max().expect("validated nonempty");
    let n0 = base.len();
    let cols = setup.noise.len() * setup.reps;
    let mut acc = DMatrix::<f64>::zeros(setup.tests.len(), cols);
    let mut conds = Vec::new();
    let mut fallback = 0;
    let mut wall = 0.0;
    let mut table = ResultTable::default();
    for k in 1..=kmax {
        let x = base.rotated(&rotation_z(k as i64))?;
        let ys = setup.noisy_all(&setup.clean(&x), k as u64)?;
        let fit = batch_fit(&setup, || KiSystem::new(x, &setup.kernel), &ys)?;
        acc += fit.pred * n0 as f64;
        conds.push(fit.cond);
        fallback += fit.fallback;
        wall += fit.wall;
        if copies.contains(&k) {
            info!("sim1_dki: k = {k}");
            let pred = &acc / (k * n0) as f64;
            let row = ResultRow {
                t: Some(t),
                copies: Some(k),
                n_train: k * n0,
                m: k,
                mean_block_cond: conds.iter().sum::<f64>() / k as f64,
                fallback_blocks: fallback,
                wall_time: wall,
                ..setup.row("dki")
            };
            let fit = BatchFit {
                pred,
                cond: f64::NAN,
                fallback,
                wall,
            };
            push_batch(&setup, &mut table, &fit, &row)?;
        }
    }
    Ok(table)
}

/// `g` rotated copies `A_1 X, …, A_g X` of the configured design.
struct CopyData {
    x: PointSet,
    set_sizes: Vec<usize>,
    /// Noisy outputs per repetition (one column per noise level).
    ys: Vec<DMatrix<f64>>,
    t: usize,
}

fn copy_data(setup: &Setup) -> Result<CopyData> {
    let t = setup.cfg.design_t();
    let base = load_t_design(&setup.design_dir(), t)?;
    let mut x = PointSet::empty(2);
    let g = setup.cfg.rotations();
    for k in 1..=g {
        x.extend(&base.rotated(&rotation_z(k as i64))?)?;
    }
    let clean = setup.clean(&x);
    let ys = (0..setup.reps)
        .map(|r| setup.noisy(&clean, 0, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(CopyData {
        x,
        set_sizes: vec![base.len(); g],
        ys,
        t,
    })
}

/// Fits one partition for one repetition and emits a row per noise level.
#[allow(clippy::too_many_arguments)]
fn dki_rows(
    setup: &Setup,
    table: &mut ResultTable,
    x: &PointSet,
    ys: &DMatrix<f64>,
    p: &Partition,
    kernel: &KernelSpec,
    base: ResultRow,
    rep: usize,
) -> Result<()> {
    let start = Instant::now();
    let sys = DkiSystem::new(x, p, kernel)?;
    let coeffs = sys.coefficients(ys)?;
    let wall = setup.elapsed(start) / ys.ncols().max(1) as f64;
    let pred = sys.predict_from(&coeffs, &setup.tests)?;
    let mean_cond = if setup.cfg.conditioning() {
        sys.mean_block_cond()
    } else {
        f64::NAN
    };
    let full_cond = if p.len() == 1 { mean_cond } else { f64::NAN };
    for (d, &delta) in setup.noise.iter().enumerate() {
        table.rows.push(ResultRow {
            repetition: rep,
            delta,
            n_train: x.len(),
            m: p.len(),
            size_spread: p.size_spread(),
            rmse: setup.rmse_col(&pred, d)?,
            mean_block_cond: mean_cond,
            full_cond,
            fallback_blocks: sys.fallback_blocks(),
            wall_time: wall,
            ..base.clone()
        });
    }
    Ok(())
}

fn division_for_m(division: Division, set_sizes: &[usize], m: usize, seed: u64) -> Result<Partition> {
    let n = set_sizes.iter().sum();
    if m == 1 {
        return Ok(Partition::single(n));
    }
    match division {
        Division::Rotation => rotation_division(set_sizes, m, seed),
        Division::Random => random_division(n, m, seed),
        Division::Saj => Err(Error::Config("saj division is driven by c0, not m".into())),
    }
}

fn sweep_m(
    setup: &Setup,
    table: &mut ResultTable,
    data: &CopyData,
    division: Division,
    label: &str,
    grid_offset: u64,
) -> Result<()> {
    for (mi, &m) in setup.cfg.m_grid().iter().enumerate() {
        info!("{}: {label} m = {m}", setup.cfg.experiment.as_str());
        for r in 0..setup.reps {
            let seed = derive_seed(setup.seed, &[setup.cfg.tag(), grid_offset + mi as u64, r as u64]);
            let p = division_for_m(division, &data.set_sizes, m, seed)?;
            let base = ResultRow {
                t: Some(data.t),
                ..setup.row(label)
            };
            dki_rows(setup, table, &data.x, &data.ys[r], &p, &setup.kernel, base, r)?;
        }
    }
    Ok(())
}

fn sweep_c0(setup: &Setup, table: &mut ResultTable, data: &CopyData, grid_offset: u64) -> Result<()> {
    let cap = setup.cfg.cap_factor();
    for (ci, &c0) in setup.cfg.c0_grid().iter().enumerate() {
        info!("{}: saj c0 = {c0}", setup.cfg.experiment.as_str());
        for r in 0..setup.reps {
            let seed = derive_seed(setup.seed, &[setup.cfg.tag(), grid_offset + ci as u64, r as u64]);
            let p = saj_with_cap(&data.x, c0, seed, cap)?;
            let base = ResultRow {
                t: Some(data.t),
                c0: Some(c0),
                ..setup.row("saj")
            };
            dki_rows(setup, table, &data.x, &data.ys[r], &p, &setup.kernel, base, r)?;
        }
    }
    Ok(())
}

/// Distributed interpolation over a fixed data set while the number of
/// blocks varies.
pub fn run_sim2(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let setup = Setup::new(cfg)?;
    let data = copy_data(&setup)?;
    let mut table = ResultTable::default();
    match cfg.division() {
        Division::Saj => sweep_c0(&setup, &mut table, &data, 0)?,
        d @ Division::Rotation => sweep_m(&setup, &mut table, &data, d, "rotation", 0)?,
        d @ Division::Random => sweep_m(&setup, &mut table, &data, d, "random", 0)?,
    }
    Ok(table)
}

/// Rotation division against select-and-judge on the same data.
pub fn run_sim3(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let setup = Setup::new(cfg)?;
    let data = copy_data(&setup)?;
    let mut table = ResultTable::default();
    sweep_m(&setup, &mut table, &data, Division::Rotation, "rotation", 0)?;
    sweep_c0(&setup, &mut table, &data, 10_000)?;
    Ok(table)
}

/// Distributed interpolation against distributed ridge regression (one
/// block per copy) and plain interpolation on a smaller design.
pub fn run_sim4(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let setup = Setup::new(cfg)?;
    let data = copy_data(&setup)?;
    let mut table = ResultTable::default();
    sweep_m(&setup, &mut table, &data, Division::Rotation, "dki", 0)?;

    // ridge regression, one block per rotated copy; every repetition shares
    // the partition, so all of them are solved together
    let g = cfg.rotations();
    let p = rotation_division(&data.set_sizes, g, 0)?;
    let nd = setup.noise.len();
    let mut ys_all = DMatrix::zeros(data.x.len(), nd * setup.reps);
    for (r, ys) in data.ys.iter().enumerate() {
        for d in 0..nd {
            ys_all.set_column(d * setup.reps + r, &ys.column(d));
        }
    }
    for &lambda in &cfg.lambda_grid() {
        info!("sim4: dkrr lambda = {lambda:e}");
        let mut pred = DMatrix::zeros(setup.tests.len(), ys_all.ncols());
        let mut wall = 0.0;
        let mut conds = Vec::new();
        for block in &p.blocks {
            let xb = data.x.subset(block);
            let yb = ys_all.select_rows(block.iter());
            let fit = batch_fit(&setup, || KiSystem::regularized(xb, &setup.kernel, lambda), &yb)?;
            pred += fit.pred * (block.len() as f64 / data.x.len() as f64);
            wall += fit.wall;
            conds.push(fit.cond);
        }
        let fit = BatchFit {
            pred,
            cond: f64::NAN,
            fallback: 0,
            wall,
        };
        let base = ResultRow {
            t: Some(data.t),
            lambda: Some(lambda),
            n_train: data.x.len(),
            m: g,
            size_spread: p.size_spread(),
            mean_block_cond: conds.iter().sum::<f64>() / conds.len() as f64,
            wall_time: wall,
            ..setup.row("dkrr")
        };
        push_batch(&setup, &mut table, &fit, &base)?;
    }

    // interpolation on an s*-design with freshly drawn noisy outputs
    let dir = setup.design_dir();
    for (si, &s) in cfg.s_grid().iter().enumerate() {
        info!("sim4: subsample-ki s* = {s}");
        let xs = load_t_design(&dir, s)?;
        let ys = setup.noisy_all(&setup.clean(&xs), 1_000 + si as u64)?;
        let fit = batch_fit(&setup, || KiSystem::new(xs.clone(), &setup.kernel), &ys)?;
        let base = ResultRow {
            t: Some(data.t),
            s_star: Some(s),
            n_train: xs.len(),
            m: 1,
            mean_block_cond: fit.cond,
            full_cond: fit.cond,
            fallback_blocks: fit.fallback,
            wall_time: fit.wall,
            ..setup.row("subsample-ki")
        };
        push_batch(&setup, &mut table, &fit, &base)?;
    }
    Ok(table)
}

/// Gaussian-kernel distributed interpolation of uniform samples on S^d over
/// a grid of kernel widths and block counts, with random division.
pub fn run_appendix_b(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let setup = Setup::new(cfg)?;
    let dim = cfg.dim();
    let n = cfg.n_train();
    let x = uniform_sample(dim, n, derive_seed(setup.seed, &[cfg.tag(), 1]));
    let clean = setup.clean(&x);
    let ys = (0..setup.reps)
        .map(|r| setup.noisy(&clean, 0, r))
        .collect::<Result<Vec<_>>>()?;
    let mut table = ResultTable::default();
    for sigma in cfg.sigma_grid().values() {
        let kernel = KernelSpec::gaussian(sigma)?;
        for (mi, &m) in cfg.m_grid().iter().enumerate() {
            info!("appendix_b: sigma = {sigma:.4}, m = {m}");
            for (r, y) in ys.iter().enumerate() {
                let seed = derive_seed(setup.seed, &[cfg.tag(), mi as u64, r as u64]);
                let p = random_division(n, m, seed)?;
                let base = ResultRow {
                    sigma: Some(sigma),
                    ..setup.row("dki")
                };
                dki_rows(&setup, &mut table, &x, y, &p, &kernel, base, r)?;
            }
        }
    }
    Ok(table)
}

/// Runs the experiment named in the config.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultTable> {
    match cfg.experiment {
        ExperimentKind::Sim1Ki => run_sim1_ki(cfg),
        ExperimentKind::Sim1Dki => run_sim1_dki(cfg),
        ExperimentKind::Sim2 => run_sim2(cfg),
        ExperimentKind::Sim3 => run_sim3(cfg),
        ExperimentKind::Sim4 => run_sim4(cfg),
        ExperimentKind::AppendixB => run_appendix_b(cfg),
    }
}
