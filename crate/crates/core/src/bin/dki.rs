use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use dki::experiments::{self, ExperimentConfig};
use dki::harmonics::{solve_weights, verify_rule, WeightSolution, DEFAULT_EXACTNESS_TOL};
use dki::partition::{
    block_report, random_division, rotation_division, saj_with_cap, ReportBounds, DEFAULT_CAP_FACTOR,
};
use dki::sphere_geom::{default_candidates, load_design, quality_metrics};
use dki::Result;

#[derive(Parser)]
#[command(name = "dki", version, about = "Distributed kernel interpolation on spheres")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Saj,
    Rotation,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its results as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Divide a point file into blocks and write the partition.
    Partition {
        /// Point file, one unit vector per line.
        #[arg(long)]
        points: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        c0: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_CAP_FACTOR)]
        cap_factor: f64,
        #[arg(long)]
        m: Option<usize>,
        /// For rotation division: the file holds this many equal-size copies.
        #[arg(long, default_value_t = 10)]
        sets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mesh norm, separation radius and mesh ratio of a point file.
    Metrics {
        #[arg(long)]
        points: PathBuf,
        /// Candidate points per input point used for the mesh norm estimate.
        #[arg(long, default_value_t = 20)]
        factor: usize,
    },
    /// Check a quadrature rule's exactness degree by degree.
    Quadcheck {
        #[arg(long)]
        points: PathBuf,
        /// One weight per line, summing to 1; equal weights when absent.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        order: usize,
        #[arg(long, default_value_t = DEFAULT_EXACTNESS_TOL)]
        tol: f64,
        /// Construct positive weights of the given order instead (S² only).
        #[arg(long)]
        solve: bool,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn read_weights(path: &PathBuf) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|e| dki::Error::Parse {
                path: path.clone(),
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            info!("running {}", cfg.experiment.as_str());
            let table = experiments::run(&cfg)?;
            table.save(&out)?;
            for s in table.best_by_method() {
                println!(
                    "{} {} delta={:e}: best mean rmse {:.6e} (m={}, c0={:?}, lambda={:?}, s*={:?}, sigma={:?})",
                    s.params.experiment,
                    s.params.method,
                    s.params.delta,
                    s.mean_rmse,
                    s.params.m,
                    s.params.c0,
                    s.params.lambda,
                    s.params.s_star,
                    s.params.sigma
                );
            }
            println!("wrote {} rows to {}", table.len(), out.display());
        }
        Command::Partition {
            points,
            method,
            c0,
            cap_factor,
            m,
            sets,
            seed,
            out,
        } => {
            let pts = load_design(&points)?;
            let need = |name: &str| dki::Error::InvalidParameter(format!("--{name} is required"));
            let p = match method {
                Method::Saj => saj_with_cap(&pts, c0.ok_or_else(|| need("c0"))?, seed, cap_factor)?,
                Method::Random => random_division(pts.len(), m.ok_or_else(|| need("m"))?, seed)?,
                Method::Rotation => {
                    if sets == 0 || pts.len() % sets != 0 {
                        return Err(dki::Error::InvalidParameter(format!(
                            "{} points do not split into {sets} equal sets",
                            pts.len()
                        )));
                    }
                    rotation_division(&vec![pts.len() / sets; sets], m.ok_or_else(|| need("m"))?, seed)?
                }
            };
            let cands = default_candidates(pts.dim(), pts.len(), 10);
            let bounds = ReportBounds {
                tau: None,
                c0: c0.filter(|_| matches!(method, Method::Saj)).map(|c| c * cap_factor / 2.0),
            };
            let rep = block_report(&p, &pts, &cands, bounds)?;
            eprintln!(
                "{} blocks, sizes {}..{} (mean {:.1}), min separation radius {:?}, violations {}",
                p.len(),
                rep.min_size,
                rep.max_size,
                rep.mean_size,
                rep.min_separation_radius,
                rep.violations
            );
            match out {
                Some(path) => fs::write(path, p.to_text())?,
                None => print!("{}", p.to_text()),
            }
        }
        Command::Metrics { points, factor } => {
            let pts = load_design(&points)?;
            let cands = default_candidates(pts.dim(), pts.len(), factor);
            let q = quality_metrics(&pts, &cands)?;
            println!("points            {}", q.n_points);
            println!("mesh_norm         {:.15e}", q.mesh_norm);
            println!("separation_radius {:.15e}", q.separation_radius);
            println!("mesh_ratio        {:.15e}", q.mesh_ratio);
        }
        Command::Quadcheck {
            points,
            weights,
            order,
            tol,
            solve,
            csv,
        } => {
            let pts = load_design(&points)?;
            let report = if solve {
                match solve_weights(&pts, order)? {
                    WeightSolution::Feasible {
                        max_scaled_weight,
                        report,
                        ..
                    } => {
                        println!("positive weights found, max N*w = {max_scaled_weight:.6}");
                        report
                    }
                    WeightSolution::Infeasible {
                        best_order, report, ..
                    } => {
                        println!("no positive weights of order {order}; best order {best_order}");
                        report
                    }
                }
            } else {
                let w = match &weights {
                    Some(path) => read_weights(path)?,
                    None => vec![1.0 / pts.len() as f64; pts.len()],
                };
                verify_rule(&pts, &w, order, tol)?
            };
            for c in &report.degrees {
                println!("{:4} {:.6e} {}", c.degree, c.residual, if c.pass { "ok" } else { "FAIL" });
            }
            println!(
                "exact through degree {} of {order}: {}",
                report.exact_order(),
                if report.passed() { "pass" } else { "fail" }
            );
            if let Some(path) = csv {
                report.write_csv(fs::File::create(path)?)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
