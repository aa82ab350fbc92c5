mod common;

use common::{dense_filter, dense_solve};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topomill_core::config::RunConfig;
use topomill_core::io::history_csv;
use topomill_core::optimizer::{InitialDesign, VOLUME_TOLERANCE};
use topomill_core::runner::build_optimizer;
use topomill_core::{
    FeaProblem, FilterKernel, MaterialModel, Mode, OptimizationConfig, Optimizer, SolverKind, SolverSettings,
    StructuredGrid,
};

fn direct() -> SolverSettings {
    SolverSettings {
        kind: SolverKind::Direct,
        tolerance: 1e-12,
        ..SolverSettings::default()
    }
}

fn config(json: &str) -> RunConfig {
    RunConfig::parse(json).unwrap()
}

/// Largest deviation from central differences, relative to the largest gradient entry.
fn fd_error(opt: &mut Optimizer, rho: &[f64]) -> (f64, f64) {
    let state = opt.forward(rho).unwrap();
    let (dc, dv) = opt.total_gradient(&state).unwrap();
    let scale = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (sc, sv) = (scale(&dc), scale(&dv));
    let h = 1e-6;
    let (mut ec, mut ev) = (0.0f64, 0.0f64);
    for l in 0..rho.len() {
        let mut p = rho.to_vec();
        let mut m = rho.to_vec();
        p[l] += h;
        m[l] -= h;
        let fp = opt.forward(&p).unwrap();
        let fm = opt.forward(&m).unwrap();
        ec = ec.max(((fp.compliance - fm.compliance) / (2.0 * h) - dc[l]).abs() / sc);
        ev = ev.max(((fp.volume - fm.volume) / (2.0 * h) - dv[l]).abs() / sv);
    }
    (ec, ev)
}

#[test]
fn full_chain_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for json in [
        r#"{"preset":"custom","extents":[8,8],"rmin":2,"directions":[[1,0],[0,-1]],"solver":{"kind":"direct","tolerance":1e-12}}"#,
        r#"{"preset":"custom","extents":[8,8],"rmin":2,"solver":{"kind":"direct","tolerance":1e-12}}"#,
        r#"{"preset":"custom","extents":[4,3,3],"rmin":1.5,"directions":[[0,0,-1]],"solver":{"kind":"direct","tolerance":1e-12}}"#,
    ] {
        let cfg = config(json);
        let mut opt = build_optimizer(&cfg).unwrap();
        let n = cfg.grid().len();
        for _ in 0..3 {
            let rho: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let (ec, ev) = fd_error(&mut opt, &rho);
            assert!(ec < 1e-5 && ev < 1e-5, "{json}: {ec:e} {ev:e}");
        }
    }
}

#[test]
fn machining_gradients_are_sign_definite() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = config(r#"{"preset":"custom","extents":[10,6],"rmin":2,"directions":[[1,0],[0,1],[-1,0]]}"#);
    let mut opt = build_optimizer(&cfg).unwrap();
    for _ in 0..5 {
        let rho: Vec<f64> = (0..60).map(|_| rng.random()).collect();
        let state = opt.forward(&rho).unwrap();
        let (dc, dv) = opt.total_gradient(&state).unwrap();
        assert!(dc.iter().all(|&g| g >= 0.0));
        assert!(dv.iter().all(|&g| g <= 0.0));
    }
}

/// Plain filtered SIMP with optimality criteria on the material field, dense throughout.
fn dense_reference(problem: &FeaProblem, r: f64, volfrac: f64, x0: f64, iterations: usize) -> Vec<f64> {
    let grid = problem.grid();
    let n = grid.len();
    let material = *problem.material();
    let w = dense_filter(grid, r);
    let mut x = DVector::from_element(n, x0);
    let mut history = Vec::new();
    for _ in 0..iterations {
        let phys = &w * &x;
        let sol = dense_solve(problem, phys.as_slice());
        history.push(sol.compliance);
        let dc_phys = DVector::from_fn(n, |e, _| -material.modulus_deriv(phys[e]) * sol.element_energy[e]);
        let dc = w.transpose() * dc_phys;
        let dv = w.transpose() * DVector::from_element(n, 1.0 / n as f64);
        let update = |lambda: f64| {
            DVector::from_fn(n, |e, _| {
                let b = (-dc[e]).max(1e-10 * dc.abs().mean()) / (lambda * dv[e]);
                (x[e] * b.sqrt()).clamp((x[e] - 0.2).max(0.0), (x[e] + 0.2).min(1.0))
            })
        };
        let (mut lo, mut hi) = (1e-12f64.ln(), 1e12f64.ln());
        let mut next = update(1.0);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            next = update(mid.exp());
            let v = (&w * &next).mean();
            if (v - volfrac).abs() < 1e-12 {
                break;
            }
            if v > volfrac {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        x = next;
    }
    history
}

#[test]
fn reference_mode_matches_dense_filtered_simp() {
    let grid = StructuredGrid::new(&[16, 8]).unwrap();
    let problem = FeaProblem::cantilever(&grid, MaterialModel::default());
    let expected = dense_reference(&problem, 1.5, 0.4, 0.4, 25);
    let cfg = OptimizationConfig {
        volfrac: 0.4,
        max_iterations: 25,
        tolerance: 0.0,
        initial: InitialDesign::Uniform(0.6),
        ..OptimizationConfig::default()
    };
    let filter = FilterKernel::new(&grid, 1.5).unwrap();
    let mut opt = Optimizer::new(&problem, filter, None, direct(), cfg).unwrap();
    let result = opt.run(|_| {}).unwrap();
    assert_eq!(result.history.len(), 25);
    for (rec, c) in result.history.iter().zip(&expected) {
        let rel = (rec.compliance - c).abs() / c;
        assert!(rel < 1e-4, "iteration {}: {} vs {c}", rec.iteration, rec.compliance);
    }
}

#[test]
fn reference_sanity_on_small_cantilever() {
    let cfg = config(r#"{"preset":"custom","extents":[60,20],"volfrac":0.3,"rmin":2,"optimizer":{"max_iterations":150}}"#);
    let mut opt = build_optimizer(&cfg).unwrap();
    let result = opt.run(|_| {}).unwrap();
    let c: Vec<f64> = result.history.iter().map(|r| r.compliance).collect();
    let tail = &c[10..];
    let decreasing = tail.windows(2).filter(|w| w[1] < w[0]).count();
    let fraction = decreasing as f64 / (tail.len() - 1) as f64;
    assert!(fraction >= 0.9, "{fraction}");
    assert!(c.last().unwrap() < &(0.5 * c[0]));
}

#[test]
fn iterates_respect_bounds_and_volume() {
    for json in [
        r#"{"preset":"custom","extents":[30,12],"volfrac":0.3,"rmin":1.5,"optimizer":{"max_iterations":40}}"#,
        r#"{"preset":"custom","extents":[30,12],"volfrac":0.3,"rmin":1.5,"directions":[[1,0],[0,1]],"optimizer":{"max_iterations":40}}"#,
    ] {
        let cfg = config(json);
        let mut opt = build_optimizer(&cfg).unwrap();
        let mut designs = Vec::new();
        let result = opt.run(|r| designs.push(r.volume)).unwrap();
        // the first record is the starting design, every later one follows a volume bisection
        for v in &designs[1..] {
            assert!((v - 0.3).abs() < VOLUME_TOLERANCE, "{json}: {v}");
        }
        assert!((result.volume - 0.3).abs() < VOLUME_TOLERANCE);
        assert!(result.rho_v.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn uniform_gradients_give_uniform_update() {
    let cfg = config(r#"{"preset":"custom","extents":[6,4],"volfrac":0.35}"#);
    let opt = build_optimizer(&cfg).unwrap();
    let rho = vec![0.5; 24];
    let next = opt.oc_update(&rho, &vec![2.0; 24], &vec![-0.5; 24]).unwrap();
    assert!(next.iter().all(|&v| (v - 0.65).abs() < 1e-6));
}

#[test]
fn machining_run_is_monotone_along_its_rays() {
    let cfg = config(r#"{"preset":"custom","extents":[24,12],"volfrac":0.3,"rmin":2,"directions":[[1,0],[0,-1]],"optimizer":{"max_iterations":30}}"#);
    let mut opt = build_optimizer(&cfg).unwrap();
    let result = opt.run(|_| {}).unwrap();
    let state = result.fields.projection.as_ref().unwrap();
    for (dir, field) in opt.projection().unwrap().directions().iter().zip(&state.fields) {
        assert!(topomill_core::machining::monotonicity_violation(dir, field).unwrap() <= 1e-15);
    }
}

#[test]
fn runs_are_deterministic() {
    let cfg = config(r#"{"preset":"custom","extents":[20,10],"volfrac":0.3,"rmin":1.5,"directions":[[1,0],[0,1]],"optimizer":{"max_iterations":15}}"#);
    let a = build_optimizer(&cfg).unwrap().run(|_| {}).unwrap();
    let b = build_optimizer(&cfg).unwrap().run(|_| {}).unwrap();
    assert_eq!(history_csv(&a.history), history_csv(&b.history));
    assert_eq!(a.rho_v, b.rho_v);
}

#[test]
fn mode_and_config_validation() {
    let grid = StructuredGrid::new(&[4, 4]).unwrap();
    let problem = FeaProblem::cantilever(&grid, MaterialModel::default());
    let filter = FilterKernel::new(&grid, 1.5).unwrap();
    let machining = OptimizationConfig {
        mode: Mode::Machining,
        ..OptimizationConfig::default()
    };
    assert!(Optimizer::new(&problem, filter.clone(), None, direct(), machining).is_err());
    for bad in [
        OptimizationConfig { move_limit: 0.0, ..Default::default() },
        OptimizationConfig { volfrac: 1.0, ..Default::default() },
        OptimizationConfig { damping: 0.0, ..Default::default() },
        OptimizationConfig { initial: InitialDesign::Field(vec![0.5; 3]), ..Default::default() },
    ] {
        assert!(Optimizer::new(&problem, filter.clone(), None, direct(), bad).is_err());
    }
}
