//! Lanczos estimates of extreme eigenvalues of symmetric operators.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sparse::{dot, CsrMatrix, LdlFactor};

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub max_steps: usize,
    pub tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_steps: 10_000,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremes {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    pub converged: bool,
}

impl Extremes {
    pub fn abs_max(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }
}

/// Extreme eigenvalues of the symmetric operator `apply` on `R^n`.
///
/// Uses full reorthogonalization, so the Krylov basis is kept explicitly.
/// Both ends are checked against the Ritz residual bound `|beta_m s_m|`.
pub fn lanczos_extremes<F>(n: usize, mut apply: F, opts: LanczosOptions) -> Extremes
where
    F: FnMut(&[f64], &mut [f64]),
{
    if n == 0 {
        return Extremes { min: 0.0, max: 0.0, steps: 0, converged: true };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2c);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nq = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|x| *x /= nq);

    let max_steps = opts.max_steps.min(n).max(1);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut result = Extremes { min: 0.0, max: 0.0, steps: 0, converged: false };

    for m in 1..=max_steps {
        let qk = &basis[m - 1];
        apply(qk, &mut w);
        let a = dot(&w, qk);
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = dot(&w, &w).sqrt();
        let exhausted = m == n || b <= 1e-14 * a.abs().max(alpha.iter().fold(0.0f64, |s, x| s.max(x.abs())));
        let check = exhausted || m == max_steps || m % 10 == 0 || m < 10;
        if check {
            let (lo, hi, rlo, rhi) = tridiagonal_extremes(&alpha, &beta);
            let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
            let done = exhausted
                || (b * rlo <= opts.tol * scale && b * rhi <= opts.tol * scale);
            result = Extremes { min: lo, max: hi, steps: m, converged: done };
            if done || m == max_steps {
                return result;
            }
        }
        beta.push(b);
        let next: Vec<f64> = w.iter().map(|x| x / b).collect();
        basis.push(next);
    }
    result
}

/// Returns the smallest and largest eigenvalues of the tridiagonal matrix and
/// the magnitude of the last component of their eigenvectors.
fn tridiagonal_extremes(alpha: &[f64], beta: &[f64]) -> (f64, f64, f64, f64) {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (mut imin, mut imax) = (0, 0);
    for i in 0..m {
        if eig.eigenvalues[i] < eig.eigenvalues[imin] {
            imin = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[imax] {
            imax = i;
        }
    }
    (
        eig.eigenvalues[imin],
        eig.eigenvalues[imax],
        eig.eigenvectors[(m - 1, imin)].abs(),
        eig.eigenvectors[(m - 1, imax)].abs(),
    )
}

pub fn matrix_extremes(a: &CsrMatrix, opts: LanczosOptions) -> Extremes {
    lanczos_extremes(a.nrows(), |x, y| a.mul_vec_into(x, y), opts)
}

/// Spectral norm of a symmetric matrix.
pub fn symmetric_norm(a: &CsrMatrix, opts: LanczosOptions) -> f64 {
    matrix_extremes(a, opts).abs_max()
}

/// Extreme generalized eigenvalues of `a x = lambda b x` with `b` SPD.
///
/// Runs Lanczos on `b^{-1} a`, which is self-adjoint in the `b` inner product.
pub fn pencil_extremes(a: &CsrMatrix, b: &CsrMatrix, b_factor: &LdlFactor, opts: LanczosOptions) -> Extremes {
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_b0b0);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let bq = b.mul_vec(&q);
    let nq = dot(&q, &bq).sqrt();
    q.iter_mut().for_each(|x| *x /= nq);

    let max_steps = opts.max_steps.min(n).max(1);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut bbasis: Vec<Vec<f64>> = vec![b.mul_vec(&basis[0])];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut work = Vec::new();
    let mut result = Extremes { min: 0.0, max: 0.0, steps: 0, converged: false };
    for m in 1..=max_steps {
        let mut w = a.mul_vec(&basis[m - 1]);
        b_factor.solve_in_place(&mut w, &mut work);
        let bw = b.mul_vec(&w);
        let al = dot(&bw, &basis[m - 1]);
        alpha.push(al);
        for _ in 0..2 {
            for (v, bv) in basis.iter().zip(&bbasis) {
                let c = dot(&w, bv);
                w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bw = b.mul_vec(&w);
        let bt = dot(&w, &bw).max(0.0).sqrt();
        let amax = alpha.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        let exhausted = m == n || bt <= 1e-14 * amax;
        if exhausted || m == max_steps || m % 10 == 0 || m < 10 {
            let (lo, hi, rlo, rhi) = tridiagonal_extremes(&alpha, &beta);
            let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
            let done = exhausted || (bt * rlo <= opts.tol * scale && bt * rhi <= opts.tol * scale);
            result = Extremes { min: lo, max: hi, steps: m, converged: done };
            if done || m == max_steps {
                return result;
            }
        }
        beta.push(bt);
        let next: Vec<f64> = w.iter().map(|x| x / bt).collect();
        bbasis.push(bw.iter().map(|x| x / bt).collect());
        basis.push(next);
    }
    result
}
