use std::f64::consts::PI;
use std::sync::Arc;

use massbound::conformal::PotentialField;
use massbound::disk::{build_grid, continuation_at, radial_oracle, solve_newton, BranchFamily, NewtonOptions, ProblemSpec};
use massbound::harness::{builtin, run_experiment, write_csv, GridConfig};
use massbound::pohozaev::pohozaev_report;
use proptest::prelude::*;

fn oracle_error(alpha: f64, b: f64, n_r: usize, n_theta: usize) -> f64 {
    let grid = Arc::new(build_grid(n_r, n_theta, alpha, 1.0).unwrap());
    let k = Arc::new(PotentialField::constant(&grid, 1.0).unwrap());
    let o = radial_oracle(alpha, b).unwrap();
    let problem = Arc::new(ProblemSpec::Liouville { lambda: o.lambda, alpha, k });
    let sol = solve_newton(problem, grid.clone(), None, &NewtonOptions::default()).unwrap();
    let exact = o.sample(&grid);
    sol.values.iter().zip(&exact).fold(0.0f64, |m, (a, e)| m.max((a - e).abs()))
}

#[test]
fn oracle_error_is_second_order() {
    for alpha in [0.0, 0.5] {
        let e: Vec<f64> = [(32, 16), (64, 32), (128, 64)]
            .iter()
            .map(|&(n_r, n_t)| oracle_error(alpha, 0.5, n_r, n_t))
            .collect();
        for w in e.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.0..=5.0).contains(&ratio), "alpha {alpha}: errors {e:?}");
        }
    }
}

#[test]
fn disk_branch_is_monotone_and_bounded() {
    let grid = Arc::new(build_grid(64, 16, 0.0, 1.0).unwrap());
    let k = Arc::new(PotentialField::constant(&grid, 1.0).unwrap());
    let s: Vec<f64> = (1..=12).map(|i| 0.4 * i as f64).collect();
    let branch = continuation_at(BranchFamily::Liouville { alpha: 0.0, k }, &s, grid, &NewtonOptions::default()).unwrap();
    assert!(!branch.truncated);
    assert!(branch.solutions.iter().all(|x| x.converged));
    let centers: Vec<f64> = branch.solutions.iter().map(|x| x.center_value()).collect();
    assert!(centers.windows(2).all(|w| w[1] > w[0]));
    assert!(branch.entries.windows(2).all(|w| w[1].mass > w[0].mass));
    assert!(branch.max_mass() < 8.0 * PI);
    let fold = branch.fold.unwrap();
    assert!(fold.interior && (fold.lambda - 2.0).abs() < 2e-2);
}

#[test]
fn henon_solution_is_positive() {
    let grid = Arc::new(build_grid(64, 16, 0.0, 1.0).unwrap());
    let k = Arc::new(PotentialField::constant(&grid, 1.0).unwrap());
    let problem = Arc::new(ProblemSpec::Henon { p: 3.0, alpha: 0.0, k });
    let sol = solve_newton(problem, grid, None, &NewtonOptions::default()).unwrap();
    assert!(sol.values.iter().all(|v| *v > 0.0));
    let rep = pohozaev_report(&sol).unwrap();
    assert_eq!(rep.rhs_boundary, 0.0);
    assert!(rep.relative_residual().abs() < 1e-2);
}

#[test]
fn harness_output_is_reproducible() {
    let mut cfg = builtin("E3").unwrap().remove(0);
    cfg.grid = GridConfig { n_r: 32, n_theta: 16, grading: 1.0 };
    cfg.map_nodes = 128;
    cfg.sweep.as_mut().unwrap().steps = Some(4);
    cfg.seed = 7;
    let csv = |dir: &std::path::Path| {
        let mut c = cfg.clone();
        c.output = Some(dir.to_path_buf());
        let report = run_experiment(&c).unwrap();
        let mut buf = Vec::new();
        write_csv(&report, &mut buf).unwrap();
        let text = std::fs::read_to_string(dir.join(format!("{}.json", c.name))).unwrap();
        let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
        json["config"]["output"] = serde_json::Value::Null;
        (buf, json)
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (csv_a, json_a) = csv(a.path());
    let (csv_b, json_b) = csv(b.path());
    assert_eq!(csv_a, csv_b);
    assert_eq!(json_a, json_b);
    for f in ["map.csv", "potential.csv", "solution.csv", "certificate.json"] {
        assert!(a.path().join(f).exists(), "{f}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pohozaev_terms_are_consistent(frac in 0.1f64..0.8, alpha in -0.5f64..1.0, cx in -0.3f64..0.3, cy in -0.3f64..0.3) {
        // stay below the fold 2(1+α)² of the constant-K disk problem, scaled by sup K
        let lambda = frac * 2.0 * (1.0 + alpha).powi(2) / (1.0 + cx.abs() + cy.abs());
        let grid = Arc::new(build_grid(48, 16, alpha, 1.0).unwrap());
        let k = Arc::new(PotentialField::from_fn(&grid, massbound::conformal::FieldSign::Positive, |r, t| {
            1.0 + cx * r * t.cos() + cy * r * t.sin()
        }).unwrap());
        let problem = Arc::new(ProblemSpec::Liouville { lambda, alpha, k });
        let sol = solve_newton(problem, grid, None, &NewtonOptions::default()).unwrap();
        let rep = pohozaev_report(&sol).unwrap();
        // Cauchy–Schwarz on the boundary quadrature
        prop_assert!(rep.flux * rep.flux / (4.0 * PI) <= rep.lhs * (1.0 + 1e-12));
        prop_assert!((rep.mass + rep.flux).abs() < 1e-2 * rep.mass);
        prop_assert!(rep.relative_residual().abs() < 2e-2);
    }
}
