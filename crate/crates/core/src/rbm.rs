//! Random batch laws: matrix splittings, sampled schedules, variance and
//! a priori error bounds.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::FemSystem;
use crate::sparse::{norm2, CsrMatrix};
use crate::spectral::{lanczos_extremes, symmetric_norm, LanczosOptions};

/// A batch: a set of part indices drawn together with probability `probability`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    pub parts: Vec<usize>,
    pub probability: f64,
}

/// Splitting `R = sum_m R_m` with force weights and a law over subsets.
#[derive(Debug, Clone)]
pub struct Decomposition {
    full: CsrMatrix,
    parts: Vec<CsrMatrix>,
    force_weights: Vec<Vec<f64>>,
    labels: Vec<String>,
    subsets: Vec<Subset>,
    pi: Vec<f64>,
    cumulative: Vec<f64>,
    subset_matrices: Vec<CsrMatrix>,
    subset_weights: Vec<Vec<f64>>,
}

const SUM_TOL: f64 = 1e-12;

impl Decomposition {
    pub fn new(
        full: CsrMatrix,
        parts: Vec<CsrMatrix>,
        force_weights: Vec<Vec<f64>>,
        labels: Vec<String>,
        subsets: Vec<Subset>,
    ) -> Result<Self> {
        let n = full.nrows();
        let m = parts.len();
        if m == 0 {
            return Err(Error::InvalidArgument("decomposition has no parts".into()));
        }
        if force_weights.len() != m || labels.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: force_weights.len().min(labels.len()) });
        }
        for p in &parts {
            if p.nrows() != n || p.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: p.nrows() });
            }
        }
        for w in &force_weights {
            if w.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: w.len() });
            }
        }

        let mut sum = CsrMatrix::zeros(n, n);
        for p in &parts {
            sum = sum.add_scaled(p, 1.0);
        }
        let diff = sum.add_scaled(&full, -1.0);
        let scale = full.max_abs().max(f64::MIN_POSITIVE);
        if let Some((r, c, v)) = diff
            .triplets()
            .max_by(|a, b| a.2.abs().total_cmp(&b.2.abs()))
            .filter(|t| t.2.abs() > SUM_TOL * scale)
        {
            return Err(Error::PartSumMismatch { row: r, col: c, deviation: v.abs() });
        }
        for d in 0..n {
            let s: f64 = force_weights.iter().map(|w| w[d]).sum();
            if (s - 1.0).abs() > SUM_TOL {
                return Err(Error::ForceSumMismatch { dof: d, sum: s });
            }
        }

        let mut kept = Vec::new();
        let mut total = 0.0;
        for s in subsets {
            if !(s.probability >= 0.0 && s.probability.is_finite()) {
                return Err(Error::InvalidArgument(format!("bad subset probability {}", s.probability)));
            }
            if s.parts.is_empty() || s.parts.iter().any(|&k| k >= m) {
                return Err(Error::InvalidArgument(format!("subset {:?} references unknown parts", s.parts)));
            }
            let mut sorted = s.parts.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != s.parts.len() {
                return Err(Error::InvalidArgument(format!("subset {:?} repeats a part", s.parts)));
            }
            total += s.probability;
            if s.probability > 0.0 {
                kept.push(Subset { parts: sorted, probability: s.probability });
            }
        }
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::ProbabilitySum(total));
        }
        let mut pi = vec![0.0; m];
        for s in &kept {
            for &k in &s.parts {
                pi[k] += s.probability;
            }
        }
        if let Some(k) = pi.iter().position(|&p| p <= 0.0) {
            return Err(Error::UncoveredPart(k));
        }
        let mut cumulative = Vec::with_capacity(kept.len());
        let mut acc = 0.0;
        for s in &kept {
            acc += s.probability;
            cumulative.push(acc);
        }
        *cumulative.last_mut().expect("at least one subset") = 1.0;

        let subset_matrices = kept
            .iter()
            .map(|s| {
                let mut b = CsrMatrix::zeros(n, n);
                for &k in &s.parts {
                    b = b.add_scaled(&parts[k], 1.0 / pi[k]);
                }
                b
            })
            .collect();
        let subset_weights = kept
            .iter()
            .map(|s| {
                let mut w = vec![0.0; n];
                for &k in &s.parts {
                    for (x, y) in w.iter_mut().zip(&force_weights[k]) {
                        *x += y / pi[k];
                    }
                }
                w
            })
            .collect();

        Ok(Self {
            full,
            parts,
            force_weights,
            labels,
            subsets: kept,
            pi,
            cumulative,
            subset_matrices,
            subset_weights,
        })
    }

    /// Each part alone with probability `1/M`.
    pub fn uniform_singletons(m: usize) -> Vec<Subset> {
        (0..m).map(|k| Subset { parts: vec![k], probability: 1.0 / m as f64 }).collect()
    }

    /// The degenerate law with a single part equal to `R`.
    pub fn trivial(full: CsrMatrix) -> Result<Self> {
        let n = full.nrows();
        Self::new(
            full.clone(),
            vec![full],
            vec![vec![1.0; n]],
            vec!["all".into()],
            vec![Subset { parts: vec![0], probability: 1.0 }],
        )
    }

    pub fn dim(&self) -> usize {
        self.full.nrows()
    }

    pub fn full(&self) -> &CsrMatrix {
        &self.full
    }

    pub fn parts(&self) -> &[CsrMatrix] {
        &self.parts
    }

    pub fn force_weights(&self) -> &[Vec<f64>] {
        &self.force_weights
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn subsets(&self) -> &[Subset] {
        &self.subsets
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn is_degenerate(&self) -> bool {
        self.subsets.len() == 1 && self.subsets[0].parts.len() == self.parts.len()
    }

    /// `sum_{m in S_i} R_m / pi_m`
    pub fn subset_matrix(&self, i: usize) -> &CsrMatrix {
        &self.subset_matrices[i]
    }

    /// `sum_{m in S_i} w_m / pi_m`, the dof-wise factor applied to the load.
    pub fn subset_force_weights(&self, i: usize) -> &[f64] {
        &self.subset_weights[i]
    }

    /// Dofs touched by subset `i`: rows of its matrix or of its force weights.
    pub fn subset_support(&self, i: usize) -> Vec<usize> {
        let b = &self.subset_matrices[i];
        let w = &self.subset_weights[i];
        (0..self.dim()).filter(|&d| !b.row_is_empty(d) || w[d] != 0.0).collect()
    }

    /// Same splitting with every part multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.full.scaled(factor),
            self.parts.iter().map(|p| p.scaled(factor)).collect(),
            self.force_weights.clone(),
            self.labels.clone(),
            self.subsets.clone(),
        )
        .expect("scaling preserves a valid decomposition")
    }

    /// Index into `subsets()` for a uniform draw `u` in `[0, 1)`.
    pub fn pick(&self, u: f64) -> usize {
        self.cumulative.partition_point(|&c| c <= u).min(self.subsets.len() - 1)
    }

    /// Key-value summary of the law.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "parts = {}", self.parts.len());
        let _ = writeln!(s, "subsets = {}", self.subsets.len());
        for (k, l) in self.labels.iter().enumerate() {
            let _ = writeln!(s, "part.{k}.label = {l}");
            let _ = writeln!(s, "part.{k}.pi = {:.17e}", self.pi[k]);
            let _ = writeln!(s, "part.{k}.support = {}", self.parts[k].row_support().len());
        }
        for (i, sub) in self.subsets.iter().enumerate() {
            let _ = writeln!(s, "subset.{i}.parts = {:?}", sub.parts);
            let _ = writeln!(s, "subset.{i}.p = {:.17e}", sub.probability);
            let _ = writeln!(s, "subset.{i}.active_dofs = {}", self.subset_support(i).len());
        }
        s
    }
}

/// Which subset is active on each subinterval `[k delta, (k+1) delta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSchedule {
    pub delta: f64,
    pub horizon: f64,
    pub seed: u64,
    pub realization: u64,
    pub omega: Vec<usize>,
}

/// Number of subintervals `ceil(T / delta)`, tolerant to rounding in `T / delta`.
pub fn subinterval_count(horizon: f64, delta: f64) -> usize {
    let q = horizon / delta;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * q.max(1.0) {
        r.max(1.0) as usize
    } else {
        q.ceil() as usize
    }
}

/// Draws one schedule. Draw `k` comes from ChaCha8 stream `realization` at a
/// fixed counter offset, so any draw can be reproduced in isolation.
pub fn sample_schedule(dec: &Decomposition, delta: f64, horizon: f64, seed: u64, realization: u64) -> Result<BatchSchedule> {
    if !(delta > 0.0 && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta}, horizon = {horizon}")));
    }
    let k = subinterval_count(horizon, delta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(realization);
    let omega = (0..k)
        .map(|j| {
            rng.set_word_pos(2 * j as u128);
            dec.pick(rng.random::<f64>())
        })
        .collect();
    Ok(BatchSchedule { delta, horizon, seed, realization, omega })
}

impl BatchSchedule {
    pub fn subinterval(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutsideHorizon { t, horizon: self.horizon });
        }
        let k = (t / self.delta * (1.0 + 1e-12)).floor() as usize;
        Ok(k.min(self.omega.len() - 1))
    }

    pub fn subset_at(&self, t: f64) -> Result<usize> {
        Ok(self.omega[self.subinterval(t)?])
    }
}

pub fn batch_matrix(dec: &Decomposition, schedule: &BatchSchedule, t: f64) -> Result<CsrMatrix> {
    Ok(dec.subset_matrix(schedule.subset_at(t)?).clone())
}

pub fn batch_force(dec: &Decomposition, schedule: &BatchSchedule, t: f64, load: &[f64]) -> Result<Vec<f64>> {
    let w = dec.subset_force_weights(schedule.subset_at(t)?);
    Ok(w.iter().zip(load).map(|(a, b)| a * b).collect())
}

/// `sum_i p_i || R - R_{S_i} ||_2^2` with the spectral norm.
pub fn variance(dec: &Decomposition) -> f64 {
    dec.subsets
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let d = dec.full.add_scaled(dec.subset_matrix(i), -1.0);
            let nrm = if d.nnz() == 0 { 0.0 } else { symmetric_norm(&d, LanczosOptions::default()) };
            s.probability * nrm * nrm
        })
        .sum()
}

/// Same as [`variance`] with the Frobenius norm.
pub fn variance_frobenius(dec: &Decomposition) -> f64 {
    dec.subsets
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let d = dec.full.add_scaled(dec.subset_matrix(i), -1.0);
            s.probability * d.triplets().map(|(_, _, v)| v * v).sum::<f64>()
        })
        .sum()
}

/// Variance with the parts rescaled by the mesh size, which removes the
/// `1/h^2` growth of stiffness-type splittings.
pub fn c_of_m(dec: &Decomposition, h: f64) -> f64 {
    variance(&dec.scaled(h))
}

/// Inputs of the state trajectory bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryBoundInputs {
    pub horizon: f64,
    pub delta: f64,
    pub h: f64,
    pub variance: f64,
    pub c_of_m: f64,
    pub lambda_min_e: f64,
    pub norm_einv_r: f64,
    pub norm_einv_y0: f64,
    pub norm_einv_f_l1: f64,
}

/// Inputs of the optimal control bound (`D = E`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBoundInputs {
    pub trajectory: TrajectoryBoundInputs,
    pub norm_d: f64,
    pub lambda_min_d: f64,
    pub norm_yd: f64,
}

impl TrajectoryBoundInputs {
    /// Computes the norms of the bound for an assembled system.
    ///
    /// `y0` holds initial coefficients and `loads` the load vectors on a
    /// uniform time grid with spacing `dt`; the time integral uses the
    /// trapezoid rule.
    pub fn from_system(
        system: &FemSystem,
        dec: &Decomposition,
        horizon: f64,
        delta: f64,
        y0: &[f64],
        loads: &[Vec<f64>],
        dt: f64,
    ) -> Self {
        let h = system.mesh().h;
        let e = system.mass_factor();
        let r = system.stiffness();
        let n = system.n_dof();
        let mut work = Vec::new();
        let ext = lanczos_extremes(
            n,
            |x, y| {
                let mut t = r.mul_vec(x);
                e.solve_in_place(&mut t, &mut work);
                e.solve_in_place(&mut t, &mut work);
                r.mul_vec_into(&t, y);
            },
            LanczosOptions::default(),
        );
        let einv_norm = |v: &[f64]| norm2(&e.solve(v));
        let mut f_l1 = 0.0;
        for pair in loads.windows(2) {
            f_l1 += 0.5 * dt * (einv_norm(&pair[0]) + einv_norm(&pair[1]));
        }
        Self {
            horizon,
            delta,
            h,
            variance: variance(dec),
            c_of_m: c_of_m(dec, h),
            lambda_min_e: system.mass_extremes().min,
            norm_einv_r: ext.max.max(0.0).sqrt(),
            norm_einv_y0: norm2(y0),
            norm_einv_f_l1: f_l1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub kind: &'static str,
    pub factors: Vec<(&'static str, f64)>,
    /// Right-hand side of the bound.
    pub value: f64,
    /// Mesh-shape form `delta C(M) / h^p`.
    pub shape: f64,
    pub shape_power: i32,
}

impl BoundReport {
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "kind = {}", self.kind);
        for (k, v) in &self.factors {
            let _ = writeln!(s, "{k} = {v:.17e}");
        }
        let _ = writeln!(s, "bound = {:.17e}", self.value);
        let _ = writeln!(s, "shape_power = {}", self.shape_power);
        let _ = writeln!(s, "shape_bound = {:.17e}", self.shape);
        s
    }
}

pub fn bound_trajectory(b: &TrajectoryBoundInputs) -> BoundReport {
    let t = b.horizon;
    let growth = b.norm_einv_r * t * t + 2.0 * t;
    let data = (b.norm_einv_y0 + b.norm_einv_f_l1).powi(2);
    let value = growth * data * b.variance / (b.lambda_min_e * b.lambda_min_e) * b.delta;
    BoundReport {
        kind: "trajectory",
        factors: vec![
            ("horizon", t),
            ("delta", b.delta),
            ("h", b.h),
            ("variance", b.variance),
            ("c_of_m", b.c_of_m),
            ("lambda_min_e", b.lambda_min_e),
            ("norm_einv_r", b.norm_einv_r),
            ("norm_einv_y0", b.norm_einv_y0),
            ("norm_einv_f_l1", b.norm_einv_f_l1),
            ("growth", growth),
            ("data", data),
        ],
        value,
        shape: b.delta * b.c_of_m / b.h.powi(7),
        shape_power: 7,
    }
}

pub fn bound_control(c: &ControlBoundInputs) -> BoundReport {
    let b = &c.trajectory;
    let t = b.horizon;
    let norm_einv = 1.0 / b.lambda_min_e;
    let growth = b.norm_einv_r * t * t + 2.0 * t;
    let c_oc = 2.0
        * c.norm_d
        * c.norm_d
        * ((1.0 + t) * (b.norm_einv_y0 + b.norm_einv_f_l1).powi(2) + c.norm_yd * c.norm_yd)
        * norm_einv
        * norm_einv
        * growth;
    let value = c_oc * (1.0 + norm_einv * norm_einv * t) * b.variance
        / (c.lambda_min_d.powi(2) * b.lambda_min_e.powi(2))
        * b.delta;
    BoundReport {
        kind: "control",
        factors: vec![
            ("horizon", t),
            ("delta", b.delta),
            ("h", b.h),
            ("variance", b.variance),
            ("c_of_m", b.c_of_m),
            ("lambda_min_e", b.lambda_min_e),
            ("lambda_min_d", c.lambda_min_d),
            ("norm_d", c.norm_d),
            ("norm_einv", norm_einv),
            ("norm_einv_r", b.norm_einv_r),
            ("norm_einv_y0", b.norm_einv_y0),
            ("norm_einv_f_l1", b.norm_einv_f_l1),
            ("norm_yd", c.norm_yd),
            ("c_oc", c_oc),
        ],
        value,
        shape: b.delta * b.c_of_m / b.h.powi(11),
        shape_power: 11,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lap(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    fn split_diag(n: usize) -> Decomposition {
        let full = lap(n);
        let upper: Vec<_> = full.triplets().filter(|&(r, _, _)| r < n / 2).collect();
        let lower: Vec<_> = full.triplets().filter(|&(r, _, _)| r >= n / 2).collect();
        let w0: Vec<f64> = (0..n).map(|d| if d < n / 2 { 1.0 } else { 0.0 }).collect();
        let w1: Vec<f64> = w0.iter().map(|x| 1.0 - x).collect();
        Decomposition::new(
            full,
            vec![CsrMatrix::from_triplets(n, n, &upper), CsrMatrix::from_triplets(n, n, &lower)],
            vec![w0, w1],
            vec!["a".into(), "b".into()],
            Decomposition::uniform_singletons(2),
        )
        .unwrap()
    }

    #[test]
    fn pi_for_overlapping_subsets() {
        let full = CsrMatrix::identity(3);
        let parts: Vec<_> = (0..3).map(|k| CsrMatrix::from_triplets(3, 3, &[(k, k, 1.0)])).collect();
        let w: Vec<Vec<f64>> = (0..3).map(|k| (0..3).map(|d| if d == k { 1.0 } else { 0.0 }).collect()).collect();
        let subsets = vec![
            Subset { parts: vec![0, 1], probability: 0.5 },
            Subset { parts: vec![1, 2], probability: 0.25 },
            Subset { parts: vec![0, 2], probability: 0.25 },
        ];
        let d = Decomposition::new(full, parts, w, vec!["0".into(), "1".into(), "2".into()], subsets).unwrap();
        assert_eq!(d.pi(), &[0.75, 0.75, 0.5]);
        assert!((d.subset_matrix(0).get(0, 0) - 1.0 / 0.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_sums() {
        let full = lap(4);
        let parts = vec![full.scaled(0.5)];
        let err = Decomposition::new(full, parts, vec![vec![1.0; 4]], vec!["x".into()], Decomposition::uniform_singletons(1));
        assert!(matches!(err, Err(Error::PartSumMismatch { .. })));
    }

    #[test]
    fn rejects_uncovered_part() {
        let full = lap(4);
        let d = split_diag(4);
        let subsets = vec![Subset { parts: vec![0, 1], probability: 0.0 }, Subset { parts: vec![0], probability: 1.0 }];
        let err = Decomposition::new(full, d.parts().to_vec(), d.force_weights().to_vec(), d.labels().to_vec(), subsets);
        assert!(matches!(err, Err(Error::UncoveredPart(1))));
    }

    #[test]
    fn rejects_probability_sum() {
        let d = split_diag(4);
        let subsets = vec![Subset { parts: vec![0], probability: 0.6 }, Subset { parts: vec![1], probability: 0.6 }];
        let err = Decomposition::new(d.full().clone(), d.parts().to_vec(), d.force_weights().to_vec(), d.labels().to_vec(), subsets);
        assert!(matches!(err, Err(Error::ProbabilitySum(_))));
    }

    #[test]
    fn trivial_law_has_zero_variance() {
        let d = Decomposition::trivial(lap(6)).unwrap();
        assert!(d.is_degenerate());
        assert_eq!(variance(&d), 0.0);
    }

    #[test]
    fn schedule_is_reproducible_and_counter_based() {
        let d = split_diag(6);
        let a = sample_schedule(&d, 0.01, 1.0, 7, 3).unwrap();
        let b = sample_schedule(&d, 0.01, 1.0, 7, 3).unwrap();
        let c = sample_schedule(&d, 0.01, 1.0, 7, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.omega, c.omega);
        assert_eq!(a.omega.len(), 100);
        // a shorter horizon yields a prefix of the same draws
        let p = sample_schedule(&d, 0.01, 0.5, 7, 3).unwrap();
        assert_eq!(p.omega[..], a.omega[..50]);
    }

    #[test]
    fn schedule_bounds() {
        let d = split_diag(6);
        let s = sample_schedule(&d, 0.3, 1.0, 1, 0).unwrap();
        assert_eq!(s.omega.len(), 4);
        assert_eq!(s.subinterval(0.95).unwrap(), 3);
        assert!(s.subinterval(1.5).is_err());
        assert!(s.subinterval(-0.1).is_err());
    }

    #[test]
    fn batch_force_scales_by_pi() {
        let d = split_diag(4);
        let s = BatchSchedule { delta: 1.0, horizon: 1.0, seed: 0, realization: 0, omega: vec![0] };
        let f = batch_force(&d, &s, 0.5, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(f, vec![2.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn bound_is_monotone_in_delta() {
        let b = TrajectoryBoundInputs {
            horizon: 1.0,
            delta: 0.1,
            h: 0.1,
            variance: 2.0,
            c_of_m: 0.02,
            lambda_min_e: 0.03,
            norm_einv_r: 100.0,
            norm_einv_y0: 1.0,
            norm_einv_f_l1: 2.0,
        };
        let r1 = bound_trajectory(&b);
        let r2 = bound_trajectory(&TrajectoryBoundInputs { delta: 0.2, ..b });
        assert!((r2.value / r1.value - 2.0).abs() < 1e-12);
        assert!(r1.to_key_values().contains("bound = "));
    }

    proptest! {
        #[test]
        fn empirical_frequencies_match_law(seed in 0u64..1000) {
            let d = split_diag(4);
            let s = sample_schedule(&d, 1e-3, 1.0, seed, 0).unwrap();
            let ones = s.omega.iter().filter(|&&k| k == 1).count() as f64 / s.omega.len() as f64;
            prop_assert!((ones - 0.5).abs() < 0.07);
        }

        #[test]
        fn bound_monotone(var in 0.1f64..10.0, d1 in 1e-4f64..1e-1, d2 in 1e-4f64..1e-1, t in 0.1f64..3.0) {
            let base = TrajectoryBoundInputs {
                horizon: t, delta: d1, h: 0.1, variance: var, c_of_m: 0.01 * var,
                lambda_min_e: 0.03, norm_einv_r: 50.0, norm_einv_y0: 1.0, norm_einv_f_l1: 0.5,
            };
            let other = TrajectoryBoundInputs { delta: d2, ..base };
            let more_var = TrajectoryBoundInputs { variance: 2.0 * var, ..base };
            let longer = TrajectoryBoundInputs { horizon: 2.0 * t, ..base };
            let (a, b) = (bound_trajectory(&base).value, bound_trajectory(&other).value);
            prop_assert_eq!(d1 <= d2, a <= b);
            prop_assert!(bound_trajectory(&more_var).value > a);
            prop_assert!(bound_trajectory(&longer).value > a);
            let c = ControlBoundInputs { trajectory: base, norm_d: 0.1, lambda_min_d: 0.03, norm_yd: 1.0 };
            let c2 = ControlBoundInputs { trajectory: other, ..c };
            prop_assert_eq!(d1 <= d2, bound_control(&c).value <= bound_control(&c2).value);
        }
    }
}
