//! Lowest eigenpairs of Hermitian sparse operators.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spin::{Basis, PureState, SparseOperator};

/// Dimension up to which the dense solver is used.
pub const DENSE_LIMIT: usize = 512;
const START_SEED: u64 = 0x5eed_1a2c_0500;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdOptions {
    /// Relative residual tolerance `‖Hv − Ev‖ ≤ tol·‖H‖`.
    pub tol: f64,
    /// Krylov step cap as a multiple of the dimension.
    pub max_iter_factor: usize,
    pub force_lanczos: bool,
}

impl Default for EdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter_factor: 10,
            force_lanczos: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
    /// Spectral-norm bound used for the relative tolerances.
    pub norm: f64,
    /// Set when the two lowest returned eigenvalues are closer than 1e−8·‖H‖.
    pub degenerate: bool,
}

impl EigenResult {
    pub fn state(&self, i: usize, basis: Arc<Basis>) -> Result<PureState> {
        PureState::new(basis, self.vectors[i].clone())
    }

    fn finish(mut self) -> Self {
        self.degenerate =
            self.values.len() > 1 && self.values[1] - self.values[0] < 1e-8 * self.norm.max(1e-300);
        self
    }
}

/// Ground state; the two lowest levels are resolved to flag degeneracy.
pub fn ground_state(h: &SparseOperator) -> Result<EigenResult> {
    ground_state_with(h, &EdOptions::default())
}

pub fn ground_state_with(h: &SparseOperator, opts: &EdOptions) -> Result<EigenResult> {
    low_spectrum_with(h, h.dim().min(2), opts)
}

pub fn low_spectrum(h: &SparseOperator, k: usize) -> Result<EigenResult> {
    low_spectrum_with(h, k, &EdOptions::default())
}

pub fn low_spectrum_with(h: &SparseOperator, k: usize, opts: &EdOptions) -> Result<EigenResult> {
    let dim = h.dim();
    if k == 0 || k > dim {
        return Err(Error::SpinSystem(format!("requested {k} eigenpairs of a {dim}-dim operator")));
    }
    let herm = h.hermiticity_error();
    let norm = h.norm_bound();
    if herm > 1e-12 * norm.max(1.0) {
        return Err(Error::NotHermitian(herm));
    }
    let res = if dim <= DENSE_LIMIT && !opts.force_lanczos {
        dense(h, k, norm)
    } else {
        lanczos(h, k, norm, opts)?
    };
    let tol = opts.tol * norm.max(1e-300);
    if let Some(bad) = res.residuals.iter().position(|&r| r > tol) {
        log::warn!("eigenpair {bad} residual {:.3e} above tolerance", res.residuals[bad]);
        return Err(Error::NotConverged(opts.max_iter_factor * dim));
    }
    Ok(res.finish())
}

fn residual(h: &SparseOperator, v: &[Complex64], e: f64) -> f64 {
    let hv = h.mul_vec(v);
    hv.iter()
        .zip(v)
        .map(|(a, b)| (a - b * e).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn dense(h: &SparseOperator, k: usize, norm: f64) -> EigenResult {
    let (mut pairs, _) = if h.is_real() {
        let eig = h.to_dense_real().symmetric_eigen();
        let pairs: Vec<(f64, Vec<Complex64>)> = (0..h.dim())
            .map(|i| {
                let v = eig.eigenvectors.column(i).iter().map(|&x| Complex64::new(x, 0.0)).collect();
                (eig.eigenvalues[i], v)
            })
            .collect();
        (pairs, ())
    } else {
        let eig = h.to_dense().symmetric_eigen();
        let pairs: Vec<(f64, Vec<Complex64>)> = (0..h.dim())
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().cloned().collect()))
            .collect();
        (pairs, ())
    };
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.truncate(k);
    let residuals = pairs.iter().map(|(e, v)| residual(h, v, *e)).collect();
    EigenResult {
        values: pairs.iter().map(|p| p.0).collect(),
        vectors: pairs.into_iter().map(|p| p.1).collect(),
        residuals,
        norm,
        degenerate: false,
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Removes the components along each vector in `basis` (twice, for stability).
fn orthogonalize(v: &mut [Complex64], basis: &[Vec<Complex64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= y * c);
        }
    }
}

/// Lanczos with full reorthogonalization. Eigenpairs are found one at a
/// time, each in the orthogonal complement of those already locked, so
/// degenerate levels are resolved.
fn lanczos(h: &SparseOperator, k: usize, norm: f64, opts: &EdOptions) -> Result<EigenResult> {
    let dim = h.dim();
    let max_iter = opts.max_iter_factor.max(1) * dim;
    let tol = opts.tol * norm.max(1e-300);
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut locked: Vec<Vec<Complex64>> = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut steps_used = 0usize;

    while locked.len() < k {
        let mut start: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, 0.0))
            .collect();
        orthogonalize(&mut start, &locked);
        let n0 = norm2(&start);
        if !(n0 > 1e-300) {
            return Err(Error::NotConverged(steps_used));
        }
        start.iter_mut().for_each(|x| *x /= n0);

        let mut q: Vec<Vec<Complex64>> = vec![start];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![ZERO; dim];
        let room = dim - locked.len();
                let (e, v, r) = loop {
            let j = alpha.len();
            h.apply(&q[j], &mut w);
            steps_used += 1;
            let a = dot(&q[j], &w).re;
            alpha.push(a);
            orthogonalize(&mut w, &locked);
            orthogonalize(&mut w, &q);
            let b = norm2(&w);
            let m = alpha.len();
            let exhausted = b <= 1e-14 * norm.max(1e-300) || m >= room;
            let check = exhausted || m.is_multiple_of(8) || steps_used >= max_iter;
            if check {
                let t = DMatrix::from_fn(m, m, |r, c| {
                    if r == c {
                        alpha[r]
                    } else if r + 1 == c {
                        beta[r]
                    } else if c + 1 == r {
                        beta[c]
                    } else {
                        0.0
                    }
                });
                let eig = t.symmetric_eigen();
                let (imin, _) = eig
                    .eigenvalues
                    .iter()
                    .enumerate()
                    .min_by(|x, y| x.1.total_cmp(y.1))
                    .expect("non-empty tridiagonal");
                let s: DVector<f64> = eig.eigenvectors.column(imin).into_owned();
                let estimate = b * s[m - 1].abs();
                if exhausted || estimate <= 0.1 * tol {
                    let mut v = vec![ZERO; dim];
                    for (i, qi) in q.iter().enumerate() {
                        v.iter_mut().zip(qi).for_each(|(x, y)| *x += y * s[i]);
                    }
                    orthogonalize(&mut v, &locked);
                    let nv = norm2(&v);
                    v.iter_mut().for_each(|x| *x /= nv);
                    let e = dot(&v, &h.mul_vec(&v)).re;
                    let r = residual(h, &v, e);
                    if r <= tol || exhausted {
                        break (e, v, r);
                    }
                }
                if steps_used >= max_iter {
                    return Err(Error::NotConverged(steps_used));
                }
            }
            beta.push(b);
            let next: Vec<Complex64> = w.iter().map(|x| x / b).collect();
            q.push(next);
        };
        values.push(e);
        residuals.push(r);
        locked.push(v);
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Ok(EigenResult {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: order.iter().map(|&i| locked[i].clone()).collect(),
        residuals: order.iter().map(|&i| residuals[i]).collect(),
        norm,
        degenerate: false,
    })
}
