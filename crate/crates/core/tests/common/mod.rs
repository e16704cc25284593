//! Dense reference implementations used as independent oracles.
#![allow(dead_code)]

use graph_rbm::rbm::Decomposition;
use graph_rbm::CsrMatrix;
use nalgebra::{DMatrix, DVector};

pub fn dense(a: &CsrMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for (r, c, v) in a.triplets() {
        m[(r, c)] = v;
    }
    m
}

/// `sum_{m in S_i} R_m / pi_m` with `pi` recomputed from the subset list.
pub fn dense_batch(dec: &Decomposition, i: usize) -> (DMatrix<f64>, DVector<f64>) {
    let m = dec.parts().len();
    let mut pi = vec![0.0; m];
    for s in dec.subsets() {
        for &k in &s.parts {
            pi[k] += s.probability;
        }
    }
    let n = dec.dim();
    let mut b = DMatrix::zeros(n, n);
    let mut w = DVector::zeros(n);
    for &k in &dec.subsets()[i].parts {
        b += dense(&dec.parts()[k]) / pi[k];
        w += DVector::from_column_slice(&dec.force_weights()[k]) / pi[k];
    }
    (b, w)
}

/// Naive implicit Euler on the random system with dense LU solves:
/// `(E + dt B_{w(n)}) y_{n+1} = E y_n + dt w .* F(t_{n+1})`.
pub fn dense_rbm_final(
    e: &DMatrix<f64>,
    batches: &[(DMatrix<f64>, DVector<f64>)],
    omega: &[usize],
    per_batch: usize,
    load: &dyn Fn(f64) -> DVector<f64>,
    y0: &DVector<f64>,
    dt: f64,
    steps: usize,
) -> DVector<f64> {
    let lus: Vec<_> = batches.iter().map(|(b, _)| (e + b * dt).lu()).collect();
    let mut y = y0.clone();
    for n in 0..steps {
        let i = omega[(n / per_batch).min(omega.len() - 1)];
        let t1 = (n + 1) as f64 * dt;
        let f = load(t1).component_mul(&batches[i].1);
        let rhs = e * &y + f * dt;
        y = lus[i].solve(&rhs).expect("nonsingular step matrix");
    }
    y
}

/// Full implicit Euler with dense LU.
pub fn dense_full_final(
    e: &DMatrix<f64>,
    r: &DMatrix<f64>,
    load: &dyn Fn(f64) -> DVector<f64>,
    y0: &DVector<f64>,
    dt: f64,
    steps: usize,
) -> DVector<f64> {
    let lu = (e + r * dt).lu();
    let mut y = y0.clone();
    for n in 0..steps {
        let rhs = e * &y + load((n + 1) as f64 * dt) * dt;
        y = lu.solve(&rhs).expect("nonsingular step matrix");
    }
    y
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}
