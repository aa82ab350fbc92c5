use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topomill_core::{FilterKernel, StructuredGrid};

fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn hand_computed_weights() {
    let g = StructuredGrid::new(&[1, 3]).unwrap();
    let f = FilterKernel::new(&g, 1.5).unwrap();
    let mut w: Vec<(usize, f64)> = f.neighbors(1).collect();
    w.sort_by_key(|p| p.0);
    assert_eq!(w, vec![(0, 0.5), (1, 1.5), (2, 0.5)]);
    assert_eq!(f.weight_sum(1), 2.5);
    let rho_f = f.apply(&[0.0, 1.0, 0.0]).unwrap();
    assert!((rho_f[1] - 0.4).abs() < 1e-15);
}

#[test]
fn interior_neighbor_count_at_radius_four() {
    let g = StructuredGrid::new(&[100, 100]).unwrap();
    let f = FilterKernel::new(&g, 4.0).unwrap();
    let lattice = (-4i32..=4)
        .flat_map(|a| (-4i32..=4).map(move |b| (a, b)))
        .filter(|&(a, b)| ((a * a + b * b) as f64).sqrt() < 4.0)
        .count();
    assert_eq!(lattice, 45);
    assert_eq!(f.neighbors(g.index(50, 50, 0)).count(), lattice);
}

#[test]
fn constants_and_extremes() {
    let g = StructuredGrid::new(&[7, 5, 3]).unwrap();
    let f = FilterKernel::new(&g, 2.3).unwrap();
    for (v, expected) in [(0.4, 0.6), (1.0, 0.0), (0.0, 1.0)] {
        for x in f.apply(&vec![v; g.len()]).unwrap() {
            assert!((x - expected).abs() < 1e-14);
        }
    }
}

#[test]
fn sub_element_radius_is_identity() {
    let g = StructuredGrid::new(&[4, 3]).unwrap();
    let f = FilterKernel::new(&g, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grad = random(&mut rng, g.len());
    let back = f.backprop(&grad).unwrap();
    for (a, b) in back.iter().zip(&grad) {
        assert_eq!(*a, -b);
    }
}

#[test]
fn backprop_matches_finite_differences() {
    let g = StructuredGrid::new(&[5, 5]).unwrap();
    let f = FilterKernel::new(&g, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rho = random(&mut rng, g.len());
    let seed = random(&mut rng, g.len());
    let analytic = f.backprop(&seed).unwrap();
    let h = 1e-6;
    for l in 0..g.len() {
        let mut p = rho.clone();
        let mut m = rho.clone();
        p[l] += h;
        m[l] -= h;
        let fd = (dot(&f.apply(&p).unwrap(), &seed) - dot(&f.apply(&m).unwrap(), &seed)) / (2.0 * h);
        assert!((fd - analytic[l]).abs() <= 1e-8 * analytic[l].abs().max(1.0), "{l}: {fd} vs {}", analytic[l]);
    }
}

#[test]
fn averaging_adjoint_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for extents in [vec![9, 6], vec![5, 4, 3]] {
        let g = StructuredGrid::new(&extents).unwrap();
        let f = FilterKernel::new(&g, 2.5).unwrap();
        let u = random(&mut rng, g.len());
        let v = random(&mut rng, g.len());
        let lhs = dot(&f.average(&u).unwrap(), &v);
        let rhs = dot(&u, &f.average_transpose(&v).unwrap());
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
    }
}

#[test]
fn output_stays_in_unit_interval() {
    let g = StructuredGrid::new(&[8, 8]).unwrap();
    let f = FilterKernel::new(&g, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rho: Vec<f64> = (0..g.len()).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
    assert!(f.apply(&rho).unwrap().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn length_mismatch_is_an_error() {
    let g = StructuredGrid::new(&[3, 3]).unwrap();
    let f = FilterKernel::new(&g, 1.5).unwrap();
    assert!(f.apply(&[0.0; 8]).is_err());
    assert!(f.backprop(&[0.0; 10]).is_err());
    assert!(FilterKernel::new(&g, 0.0).is_err());
}
