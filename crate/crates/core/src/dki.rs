//! Distributed kernel interpolation: one interpolant per block of a
//! partition, combined by the size-weighted average
//! `f̄(x) = Σ_j (|D_j|/|D|) f_{D_j}(x)`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interpolation::{evaluate, Interpolant, KiSystem, LabeledData, SolveDiagnostics};
use crate::kernels::{cross_matrix, KernelSpec};
use crate::partition::Partition;
use crate::sphere_geom::PointSet;

#[derive(Debug, Clone)]
pub struct DkiEstimator {
    pub interpolets: Vec<Interpolant>,
    pub block_sizes: Vec<usize>,
    pub total_size: usize,
    pub kernel: KernelSpec,
}

impl DkiEstimator {
    /// `|D_j| / |D|` per block.
    pub fn weights(&self) -> Vec<f64> {
        block_weights(&self.block_sizes, self.total_size)
    }

    pub fn diagnostics(&self) -> Vec<SolveDiagnostics> {
        self.interpolets.iter().map(|f| f.diagnostics).collect()
    }

    /// Mean condition number over blocks.
    pub fn mean_block_cond(&self) -> f64 {
        let c: Vec<f64> = self.interpolets.iter().map(|f| f.diagnostics.cond).collect();
        c.iter().sum::<f64>() / c.len() as f64
    }
}

fn block_weights(sizes: &[usize], total: usize) -> Vec<f64> {
    sizes.iter().map(|&n| n as f64 / total as f64).collect()
}

fn check_partition(n: usize, p: &Partition) -> Result<()> {
    if p.parent_size != n {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} points, data has {n}",
            p.parent_size
        )));
    }
    p.validate()
}

/// Fits every block independently (in parallel). The first failing block,
/// in block order, aborts the fit.
pub fn dki_fit(data: &LabeledData, p: &Partition, kernel: &KernelSpec) -> Result<DkiEstimator> {
    check_partition(data.len(), p)?;
    let interpolets = p
        .blocks
        .par_iter()
        .enumerate()
        .map(|(j, block)| {
            let sub = data.subset(block);
            KiSystem::new(sub.inputs, kernel)
                .and_then(|s| s.fit(&sub.outputs))
                .map_err(|e| Error::BlockFit {
                    block: j,
                    source: Box::new(e),
                })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(DkiEstimator {
        interpolets,
        block_sizes: p.block_sizes(),
        total_size: data.len(),
        kernel: kernel.clone(),
    })
}

/// Weighted sum of per-block predictions, accumulated in block order.
pub fn dki_evaluate(e: &DkiEstimator, targets: &PointSet) -> Result<Vec<f64>> {
    let per_block = e
        .interpolets
        .iter()
        .map(|f| evaluate(f, targets))
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![0.0; targets.len()];
    for (w, vals) in e.weights().into_iter().zip(per_block) {
        for (o, v) in out.iter_mut().zip(vals) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// All block systems of one partition, factored once. Suited to repeated
/// fits of the same inputs with different outputs (noise repetitions).
pub struct DkiSystem {
    systems: Vec<KiSystem>,
    blocks: Vec<Vec<usize>>,
    total_size: usize,
}

impl DkiSystem {
    pub fn new(inputs: &PointSet, p: &Partition, kernel: &KernelSpec) -> Result<Self> {
        check_partition(inputs.len(), p)?;
        let systems = p
            .blocks
            .par_iter()
            .enumerate()
            .map(|(j, block)| {
                KiSystem::new(inputs.subset(block), kernel).map_err(|e| Error::BlockFit {
                    block: j,
                    source: Box::new(e),
                })
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            systems,
            blocks: p.blocks.clone(),
            total_size: inputs.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }

    pub fn systems(&self) -> &[KiSystem] {
        &self.systems
    }

    pub fn mean_block_cond(&self) -> f64 {
        self.systems.iter().map(KiSystem::cond).sum::<f64>() / self.systems.len() as f64
    }

    /// Estimator for outputs `y` (indexed like the parent inputs).
    pub fn fit(&self, y: &[f64]) -> Result<DkiEstimator> {
        if y.len() != self.total_size {
            return Err(Error::InvalidParameter(format!(
                "{} outputs for {} inputs",
                y.len(),
                self.total_size
            )));
        }
        let interpolets = self
            .systems
            .iter()
            .zip(&self.blocks)
            .map(|(s, block)| {
                let yb: Vec<f64> = block.iter().map(|&i| y[i]).collect();
                s.fit(&yb)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DkiEstimator {
            kernel: self.systems[0].kernel().clone(),
            interpolets,
            block_sizes: self.blocks.iter().map(Vec::len).collect(),
            total_size: self.total_size,
        })
    }

    /// Per-block coefficients for every column of `ys` (one output vector
    /// per column, indexed like the parent inputs).
    pub fn coefficients(&self, ys: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
        if ys.nrows() != self.total_size {
            return Err(Error::InvalidParameter(format!(
                "{} output rows for {} inputs",
                ys.nrows(),
                self.total_size
            )));
        }
        self.systems
            .par_iter()
            .zip(&self.blocks)
            .map(|(s, block)| s.solve_many(&ys.select_rows(block.iter())))
            .collect()
    }

    /// Unweighted predictions of each block's interpolant, in block order.
    pub fn block_predictions(
        &self,
        coeffs: &[DMatrix<f64>],
        targets: &PointSet,
    ) -> Result<Vec<DMatrix<f64>>> {
        if coeffs.len() != self.systems.len() {
            return Err(Error::InvalidParameter(format!(
                "{} coefficient blocks for {} systems",
                coeffs.len(),
                self.systems.len()
            )));
        }
        self.systems
            .par_iter()
            .zip(coeffs)
            .map(|(s, a)| Ok(cross_matrix(s.kernel(), targets, s.centers())? * a))
            .collect()
    }

    /// Weighted predictions from [`DkiSystem::coefficients`].
    pub fn predict_from(&self, coeffs: &[DMatrix<f64>], targets: &PointSet) -> Result<DMatrix<f64>> {
        let per_block = self.block_predictions(coeffs, targets)?;
        let weights = block_weights(
            &self.blocks.iter().map(Vec::len).collect::<Vec<_>>(),
            self.total_size,
        );
        let ncols = coeffs.first().map_or(0, |a| a.ncols());
        let mut out = DMatrix::zeros(targets.len(), ncols);
        for (w, pred) in weights.into_iter().zip(per_block) {
            out += pred * w;
        }
        Ok(out)
    }

    /// Predictions at `targets` for every column of `ys`.
    pub fn predict_many(&self, ys: &DMatrix<f64>, targets: &PointSet) -> Result<DMatrix<f64>> {
        let coeffs = self.coefficients(ys)?;
        self.predict_from(&coeffs, targets)
    }

    /// Number of blocks solved through the pseudo-inverse fallback.
    pub fn fallback_blocks(&self) -> usize {
        self.systems
            .iter()
            .filter(|s| s.method() == crate::interpolation::SolveMethod::EigPseudoinverse)
            .count()
    }
}
