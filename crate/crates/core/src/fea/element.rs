//! Unit-modulus bilinear quad (plane stress, unit thickness) and trilinear hex
//! stiffness matrices on unit elements, integrated with 2-point Gauss rules.
//!
//! Local corner `a` sits at `(a & 1, (a >> 1) & 1, (a >> 2) & 1)`; DOFs are
//! ordered node-major (`a * dim + component`).

/// Dense row-major element stiffness for unit Young's modulus.
pub fn element_stiffness(nu: f64, dimension: usize) -> Vec<f64> {
    assert!(dimension == 2 || dimension == 3, "dimension must be 2 or 3");
    let corners = 1 << dimension;
    let ndof = corners * dimension;
    let nstrain = if dimension == 2 { 3 } else { 6 };
    let d = constitutive(nu, dimension);

    let g = 0.5 / 3f64.sqrt();
    let points = [0.5 - g, 0.5 + g];
    let weight = 0.5f64.powi(dimension as i32);

    let mut k = vec![0.0; ndof * ndof];
    let mut b = vec![0.0; nstrain * ndof];
    let mut db = vec![0.0; nstrain * ndof];
    let nz = if dimension == 3 { 2 } else { 1 };
    for qz in 0..nz {
        for qy in 0..2 {
            for qx in 0..2 {
                let xi = [points[qx], points[qy], points[qz]];
                strain_displacement(&xi, dimension, &mut b);
                for s in 0..nstrain {
                    for c in 0..ndof {
                        db[s * ndof + c] = (0..nstrain).map(|t| d[s * nstrain + t] * b[t * ndof + c]).sum();
                    }
                }
                for r in 0..ndof {
                    for c in 0..ndof {
                        let v: f64 = (0..nstrain).map(|s| b[s * ndof + r] * db[s * ndof + c]).sum();
                        k[r * ndof + c] += weight * v;
                    }
                }
            }
        }
    }
    // symmetrize away quadrature roundoff
    for r in 0..ndof {
        for c in r + 1..ndof {
            let avg = 0.5 * (k[r * ndof + c] + k[c * ndof + r]);
            k[r * ndof + c] = avg;
            k[c * ndof + r] = avg;
        }
    }
    k
}

fn constitutive(nu: f64, dimension: usize) -> Vec<f64> {
    if dimension == 2 {
        let f = 1.0 / (1.0 - nu * nu);
        vec![f, f * nu, 0.0, f * nu, f, 0.0, 0.0, 0.0, f * (1.0 - nu) / 2.0]
    } else {
        let f = 1.0 / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mut d = vec![0.0; 36];
        for i in 0..3 {
            for j in 0..3 {
                d[i * 6 + j] = f * if i == j { 1.0 - nu } else { nu };
            }
            d[(i + 3) * 6 + i + 3] = f * (1.0 - 2.0 * nu) / 2.0;
        }
        d
    }
}

fn shape_gradient(a: usize, xi: &[f64; 3], dimension: usize) -> [f64; 3] {
    let bits = [a & 1, (a >> 1) & 1, (a >> 2) & 1];
    let n1 = |axis: usize| if bits[axis] == 1 { xi[axis] } else { 1.0 - xi[axis] };
    let dn = |axis: usize| if bits[axis] == 1 { 1.0 } else { -1.0 };
    if dimension == 2 {
        [dn(0) * n1(1), n1(0) * dn(1), 0.0]
    } else {
        [
            dn(0) * n1(1) * n1(2),
            n1(0) * dn(1) * n1(2),
            n1(0) * n1(1) * dn(2),
        ]
    }
}

fn strain_displacement(xi: &[f64; 3], dimension: usize, b: &mut [f64]) {
    let corners = 1 << dimension;
    let ndof = corners * dimension;
    b.iter_mut().for_each(|v| *v = 0.0);
    for a in 0..corners {
        let gr = shape_gradient(a, xi, dimension);
        if dimension == 2 {
            let (u, v) = (2 * a, 2 * a + 1);
            b[u] = gr[0];
            b[ndof + v] = gr[1];
            b[2 * ndof + u] = gr[1];
            b[2 * ndof + v] = gr[0];
        } else {
            let (u, v, w) = (3 * a, 3 * a + 1, 3 * a + 2);
            b[u] = gr[0];
            b[ndof + v] = gr[1];
            b[2 * ndof + w] = gr[2];
            b[3 * ndof + u] = gr[1];
            b[3 * ndof + v] = gr[0];
            b[4 * ndof + v] = gr[2];
            b[4 * ndof + w] = gr[1];
            b[5 * ndof + u] = gr[2];
            b[5 * ndof + w] = gr[0];
        }
    }
}
