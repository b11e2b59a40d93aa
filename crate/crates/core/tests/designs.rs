use dki::experiments::{find_design, load_t_design};
use dki::harmonics::{quadrature_residuals, solve_weights, verify_rule, DEFAULT_EXACTNESS_TOL};
use dki::interpolation::KiSystem;
use dki::kernels::KernelSpec;
use dki::sphere_geom::{default_candidates, quality_metrics};

fn dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/designs")
}

#[test]
fn t25_design_size_and_quality() {
    let x = load_t_design(&dir(), 25).unwrap();
    // t²/2 + t/2 + O(1)
    assert_eq!(x.len(), 330);
    assert!((x.len() as i64 - 325).abs() <= 10);
    let q = quality_metrics(&x, &default_candidates(2, x.len(), 20)).unwrap();
    assert!((1.0..=3.0).contains(&q.mesh_ratio), "{q:?}");
    // regression baseline for the bundled file
    assert!((q.mesh_ratio - 1.9184).abs() < 1e-3, "{q:?}");
}

#[test]
fn equal_weights_integrate_through_strength() {
    for t in [5, 15, 25] {
        let x = load_t_design(&dir(), t).unwrap();
        let w = vec![1.0 / x.len() as f64; x.len()];
        let r = quadrature_residuals(&x, &w, t).unwrap();
        assert!(r.iter().all(|&v| v <= 1e-10), "t={t}: {r:?}");
        assert!(verify_rule(&x, &w, t, DEFAULT_EXACTNESS_TOL).unwrap().passed());

        let beyond = verify_rule(&x, &w, t + 2, DEFAULT_EXACTNESS_TOL).unwrap();
        assert!(!beyond.passed());
        assert_eq!(beyond.first_failing_degree(), Some(t + 1));
    }
}

#[test]
fn weight_solver_keeps_design_weights() {
    let x = load_t_design(&dir(), 9).unwrap();
    let sol = solve_weights(&x, 9).unwrap();
    assert!(sol.is_feasible());
    let eq = 1.0 / x.len() as f64;
    assert!(sol.weights().iter().all(|w| (w - eq).abs() <= 1e-8));
}

#[test]
fn conditioning_grows_with_strength() {
    let mut prev = 0.0;
    for t in [5, 10, 15, 20] {
        let x = load_t_design(&dir(), t).unwrap();
        let c = KiSystem::new(x, &KernelSpec::Wendland).unwrap().cond();
        assert!(c > prev, "t={t}: {c} <= {prev}");
        prev = c;
    }
}

#[test]
fn design_lookup_prefers_symmetric_files() {
    assert!(find_design(&dir(), 21).unwrap().ends_with("ss021.00234"));
    assert!(find_design(&dir(), 10).unwrap().ends_with("sf010.00064"));
    assert!(find_design(&dir(), 12).is_err());
}
