//! Linear programs of the form `max c.q  s.t.  |x_i . q| <= delta`.
//!
//! The problem is solved through its dual, `min delta * sum(u + v)` subject to
//! `sum_i (u_i - v_i) x_i = c`, `u, v >= 0`, with a two-phase revised simplex
//! (Bland's rule). The dual has one row per feature, so the basis stays tiny even
//! for thousands of samples, and the optimal simplex multipliers are the primal
//! weights. Directions orthogonal to every `x_i` never bind and are set to zero.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub q: Vec<f64>,
    pub objective: f64,
    /// Feature-space directions no sample constrains.
    pub null_directions: usize,
    pub iterations: usize,
}

const MAX_ITERATIONS: usize = 100_000;

pub fn objective(c: &[f64], q: &[f64]) -> f64 {
    c.iter().zip(q).map(|(a, b)| a * b).sum()
}

/// Largest `|x_i . q|` over the rows.
pub fn max_constraint(rows: &[Vec<f64>], q: &[f64]) -> f64 {
    rows.iter().map(|x| objective(x, q).abs()).fold(0.0, f64::max)
}

pub fn solve_box_lp(rows: &[Vec<f64>], c: &[f64], delta: f64) -> Result<LpSolution> {
    let k = c.len();
    if rows.is_empty() || k == 0 {
        return Err(Error::InvalidArgument("linear program needs samples and features".into()));
    }
    if rows.iter().any(|x| x.len() != k) {
        return Err(Error::InvalidArgument("sample dimension differs from objective".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("deviation {delta} must be positive")));
    }
    if rows.iter().flatten().chain(c).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite LP data".into()));
    }

    // Orthonormal basis of the span of the samples.
    let mut gram = DMatrix::<f64>::zeros(k, k);
    for x in rows {
        let v = DVector::from_column_slice(x);
        gram += &v * v.transpose();
    }
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i] > top * 1e-12 && top > 0.0).collect();
    let basis = DMatrix::from_fn(k, keep.len(), |r, j| eig.eigenvectors[(r, keep[j])]);
    let null_directions = k - keep.len();

    let c_vec = DVector::from_column_slice(c);
    let c_red = basis.transpose() * &c_vec;
    let leak = (&c_vec - &basis * &c_red).norm();
    if leak > 1e-9 * c_vec.norm().max(1.0) {
        warn!("objective has a component of norm {leak:.3e} no sample constrains; zeroing that direction");
    }
    let scale = c_red.amax();
    if keep.is_empty() || scale == 0.0 {
        return Ok(LpSolution { q: vec![0.0; k], objective: 0.0, null_directions, iterations: 0 });
    }

    let z: Vec<DVector<f64>> = rows
        .iter()
        .map(|x| basis.transpose() * DVector::from_column_slice(x))
        .collect();
    let (y, iterations) = DualSimplex::new(&z, &c_red, delta).solve()?;
    let mut q: Vec<f64> = (&basis * y).iter().copied().collect();
    let worst = max_constraint(rows, &q);
    if worst > delta {
        let shrink = delta / worst;
        q.iter_mut().for_each(|v| *v *= shrink);
    }
    Ok(LpSolution { objective: objective(c, &q), q, null_directions, iterations })
}

/// Standard-form dual with `2n` structural columns (`+z_i`, `-z_i`, cost
/// `delta`) and one artificial column per row.
struct DualSimplex<'a> {
    z: &'a [DVector<f64>],
    rhs: DVector<f64>,
    delta: f64,
    m: usize,
    n: usize,
    /// Sign of each artificial column, chosen so the start is feasible.
    art_sign: Vec<f64>,
}

impl<'a> DualSimplex<'a> {
    fn new(z: &'a [DVector<f64>], rhs: &DVector<f64>, delta: f64) -> Self {
        let m = rhs.len();
        let art_sign = rhs.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        Self { z, rhs: rhs.clone(), delta, m, n: z.len(), art_sign }
    }

    fn column(&self, j: usize) -> DVector<f64> {
        let n = self.n;
        if j < n {
            self.z[j].clone()
        } else if j < 2 * n {
            -&self.z[j - n]
        } else {
            let mut e = DVector::zeros(self.m);
            e[j - 2 * n] = self.art_sign[j - 2 * n];
            e
        }
    }

    fn dot_column(&self, j: usize, y: &DVector<f64>) -> f64 {
        let n = self.n;
        if j < n {
            self.z[j].dot(y)
        } else if j < 2 * n {
            -self.z[j - n].dot(y)
        } else {
            self.art_sign[j - 2 * n] * y[j - 2 * n]
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= 2 * self.n
    }

    fn basis_inverse(&self, basis: &[usize]) -> Result<DMatrix<f64>> {
        let mut b = DMatrix::zeros(self.m, self.m);
        for (col, &j) in basis.iter().enumerate() {
            b.set_column(col, &self.column(j));
        }
        b.try_inverse().ok_or_else(|| Error::Invariant("singular simplex basis".into()))
    }

    /// Runs the simplex from `basis` with per-column costs; returns the final
    /// multipliers.
    fn run(
        &self,
        basis: &mut Vec<usize>,
        cost: &dyn Fn(usize) -> f64,
        allowed: &dyn Fn(usize) -> bool,
        iterations: &mut usize,
    ) -> Result<DVector<f64>> {
        let total = 2 * self.n + self.m;
        let tol = 1e-11 * self.delta.max(1.0);
        loop {
            let inv = self.basis_inverse(basis)?;
            let c_b = DVector::from_iterator(self.m, basis.iter().map(|&j| cost(j)));
            let y = inv.transpose() * &c_b;
            let entering = (0..total).find(|&j| allowed(j) && !basis.contains(&j) && cost(j) - self.dot_column(j, &y) < -tol);
            let Some(e) = entering else {
                return Ok(y);
            };
            *iterations += 1;
            if *iterations > MAX_ITERATIONS {
                return Err(Error::Invariant("simplex iteration limit reached".into()));
            }
            let x_b = &inv * &self.rhs;
            let dir = &inv * self.column(e);
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                if dir[r] > 1e-12 {
                    let ratio = x_b[r].max(0.0) / dir[r];
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => ratio < lratio - 1e-15 || (ratio <= lratio + 1e-15 && basis[r] < basis[lr]),
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Invariant("dual program unbounded below".into()));
            };
            basis[r] = e;
        }
    }

    fn solve(&self) -> Result<(DVector<f64>, usize)> {
        let n2 = 2 * self.n;
        let mut basis: Vec<usize> = (0..self.m).map(|r| n2 + r).collect();
        let mut iterations = 0;

        let phase1 = |j: usize| if j >= n2 { 1.0 } else { 0.0 };
        self.run(&mut basis, &phase1, &|_| true, &mut iterations)?;
        let inv = self.basis_inverse(&basis)?;
        let infeasibility: f64 = basis
            .iter()
            .zip((&inv * &self.rhs).iter())
            .filter(|(&j, _)| self.is_artificial(j))
            .map(|(_, v)| v.abs())
            .sum();
        if infeasibility > 1e-9 * self.rhs.amax().max(1.0) {
            return Err(Error::Invariant(format!("objective outside the sample span (residual {infeasibility:.3e})")));
        }
        // Drive zero-level artificials out of the basis.
        for r in 0..self.m {
            if !self.is_artificial(basis[r]) {
                continue;
            }
            let inv = self.basis_inverse(&basis)?;
            let row = inv.row(r);
            let replacement = (0..n2)
                .filter(|j| !basis.contains(j))
                .max_by(|&a, &b| (row * self.column(a))[0].abs().total_cmp(&(row * self.column(b))[0].abs()));
            match replacement {
                Some(j) if (row * self.column(j))[0].abs() > 1e-12 => basis[r] = j,
                _ => return Err(Error::Invariant("rank-deficient sample span".into())),
            }
        }

        let delta = self.delta;
        let phase2 = move |j: usize| if j >= n2 { 0.0 } else { delta };
        let y = self.run(&mut basis, &phase2, &|j| j < n2, &mut iterations)?;
        Ok((y, iterations))
    }
}
