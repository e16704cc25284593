//! Compressed sparse row storage and a sparse symmetric LDL^T factorization.

use std::collections::BTreeSet;
use std::io::Write;

use crate::error::{Error, Result};

/// Row-major sparse matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            if d != 0.0 {
                m.indices.push(i);
                m.values.push(d);
            }
            m.indptr[i + 1] = m.indices.len();
        }
        m
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// in input order and entries that end up exactly zero are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            rows[r].push((c, v));
        }
        let mut m = Self::zeros(nrows, ncols);
        for (r, row) in rows.iter_mut().enumerate() {
            // stable sort keeps the summation order of duplicates
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    m.indices.push(c);
                    m.values.push(v);
                }
            }
            m.indptr[r + 1] = m.indices.len();
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn row_is_empty(&self, r: usize) -> bool {
        self.indptr[r] == self.indptr[r + 1]
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `out = A x`
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(out.len(), self.nrows);
        for (r, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *o = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `x^T A y`
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, other: &CsrMatrix, alpha: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut m = Self::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (mut a, ae) = (self.indptr[r], self.indptr[r + 1]);
            let (mut b, be) = (other.indptr[r], other.indptr[r + 1]);
            while a < ae || b < be {
                let ca = if a < ae { self.indices[a] } else { usize::MAX };
                let cb = if b < be { other.indices[b] } else { usize::MAX };
                let (c, v) = if ca == cb {
                    let v = self.values[a] + alpha * other.values[b];
                    a += 1;
                    b += 1;
                    (ca, v)
                } else if ca < cb {
                    a += 1;
                    (ca, self.values[a - 1])
                } else {
                    b += 1;
                    (cb, alpha * other.values[b - 1])
                };
                if v != 0.0 {
                    m.indices.push(c);
                    m.values.push(v);
                }
            }
            m.indptr[r + 1] = m.indices.len();
        }
        m
    }

    /// Extracts `A[rows, cols]`, renumbering both index sets by position.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_pos = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_pos[c] = k;
        }
        let mut m = Self::zeros(rows.len(), cols.len());
        let mut buf: Vec<(usize, f64)> = Vec::new();
        for (ri, &r) in rows.iter().enumerate() {
            buf.clear();
            buf.extend(
                self.row(r)
                    .filter(|&(c, _)| col_pos[c] != usize::MAX)
                    .map(|(c, v)| (col_pos[c], v)),
            );
            buf.sort_by_key(|&(c, _)| c);
            for &(c, v) in &buf {
                m.indices.push(c);
                m.values.push(v);
            }
            m.indptr[ri + 1] = m.indices.len();
        }
        m
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols && self.triplets().all(|(r, c, v)| (v - self.get(c, r)).abs() <= tol)
    }

    /// Indices of rows that hold at least one stored entry.
    pub fn row_support(&self) -> Vec<usize> {
        (0..self.nrows).filter(|&r| !self.row_is_empty(r)).collect()
    }

    /// Writes `row col value` lines (0-based, 17 significant digits).
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "% {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {v:.16e}")?;
        }
        Ok(())
    }
}

/// Minimum degree ordering of the symmetric pattern of `a`.
///
/// Ties are broken by the smallest index so the result is deterministic.
pub fn minimum_degree_order(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (r, c, _) in a.triplets() {
        if r != c {
            adj[r].insert(c);
            adj[c].insert(r);
        }
    }
    let mut heap: BTreeSet<(usize, usize)> = (0..n).map(|i| (adj[i].len(), i)).collect();
    let mut order = Vec::with_capacity(n);
    while let Some((_, v)) = heap.pop_first() {
        order.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &u in &nbrs {
            heap.remove(&(adj[u].len(), u));
            adj[u].remove(&v);
        }
        for (k, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[k + 1..] {
                adj[u].insert(w);
                adj[w].insert(u);
            }
        }
        for &u in &nbrs {
            heap.insert((adj[u].len(), u));
        }
    }
    order
}

/// Sparse `P A P^T = L D L^T` without pivoting, so it also handles the
/// symmetric indefinite matrices that appear in reduced systems as long as
/// no pivot vanishes.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl LdlFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let perm = minimum_degree_order(a);
        Self::with_order(a, perm)
    }

    pub fn with_order(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: if a.ncols() != n { a.ncols() } else { perm.len() },
            });
        }
        let mut iperm = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }
        // upper part of the permuted matrix, column by column
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (k, col) in cols.iter_mut().enumerate() {
            for (c, v) in a.row(perm[k]) {
                let i = iperm[c];
                if i <= k {
                    col.push((i, v));
                }
            }
        }

        const NONE: usize = usize::MAX;
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &(i0, _) in &cols[k] {
                let mut i = i0;
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let nnz = lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        lnz.iter_mut().for_each(|x| *x = 0);
        flag.iter_mut().for_each(|x| *x = NONE);

        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for &(i0, v) in &cols[k] {
                y[i0] += v;
                let mut i = i0;
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            while top < n {
                let i = pattern[top];
                top += 1;
                let yi = y[i];
                y[i] = 0.0;
                let p2 = lp[i] + lnz[i];
                for p in lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                lnz[i] += 1;
            }
            if d[k] == 0.0 || !d[k].is_finite() {
                return Err(Error::ZeroPivot { column: perm[k] });
            }
        }
        Ok(Self {
            n,
            perm,
            lp,
            li,
            lx,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.lx.len()
    }

    /// Number of negative pivots, which equals the number of negative eigenvalues.
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&x| x < 0.0).count()
    }

    pub fn solve_in_place(&self, b: &mut [f64], work: &mut Vec<f64>) {
        assert_eq!(b.len(), self.n);
        work.clear();
        work.extend(self.perm.iter().map(|&p| b[p]));
        let x = work;
        for j in 0..self.n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..self.n {
            x[j] /= self.d[j];
        }
        for j in (0..self.n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = x[k];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        let mut work = Vec::with_capacity(self.n);
        self.solve_in_place(&mut x, &mut work);
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
