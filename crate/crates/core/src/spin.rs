//! Spin-1/2 bases, sparse operators and reference states.
//!
//! Basis states are bitstrings with bit `j` = site `j` (set = up), ordered
//! by integer value. A sector fixes the number of up spins.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};

/// Largest supported Hilbert-space dimension for any operator.
pub const MAX_DIM: usize = 1 << 16;
/// Largest number of sites.
pub const MAX_SITES: usize = 16;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn binomial_table(n: usize) -> Vec<Vec<usize>> {
    let mut t = vec![vec![0usize; n + 2]; n + 2];
    for i in 0..=n + 1 {
        t[i][0] = 1;
        for k in 1..=i {
            t[i][k] = t[i - 1][k - 1] + if k < i { t[i - 1][k] } else { 0 };
        }
    }
    t
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    binomial_table(n)[n][k]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    l: usize,
    sector: Option<usize>,
    states: Vec<u32>,
    binom: Vec<Vec<usize>>,
}

impl Basis {
    pub fn new(l: usize, sector: Option<usize>) -> Result<Self> {
        if l == 0 || l > MAX_SITES {
            return Err(Error::SpinSystem(format!(
                "site count must be in 1..={MAX_SITES}, got {l}"
            )));
        }
        if let Some(n) = sector {
            if n > l {
                return Err(Error::SpinSystem(format!("sector {n} exceeds L = {l}")));
            }
        }
        let dim = match sector {
            Some(n) => binomial(l, n),
            None => 1usize << l,
        };
        if dim > MAX_DIM {
            return Err(Error::DimensionOverflow { dim, cap: MAX_DIM });
        }
        let states: Vec<u32> = match sector {
            None => (0..dim as u32).collect(),
            Some(n) => (0u32..(1u32 << l))
                .filter(|s| s.count_ones() as usize == n)
                .collect(),
        };
        Ok(Self {
            l,
            sector,
            states,
            binom: binomial_table(l),
        })
    }

    pub fn full(l: usize) -> Result<Self> {
        Self::new(l, None)
    }

    pub fn sites(&self) -> usize {
        self.l
    }

    pub fn sector(&self) -> Option<usize> {
        self.sector
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> u32 {
        self.states[i]
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    /// Position of a bitstring in the basis, `None` if outside it.
    pub fn index(&self, s: u32) -> Option<usize> {
        if self.l < 32 && s >> self.l != 0 {
            return None;
        }
        match self.sector {
            None => Some(s as usize),
            Some(n) => {
                if s.count_ones() as usize != n {
                    return None;
                }
                // Ascending integer order of fixed-weight words is colex order.
                let mut rank = 0;
                let mut k = 0;
                for p in 0..self.l {
                    if s >> p & 1 == 1 {
                        k += 1;
                        rank += self.binom[p][k];
                    }
                }
                Some(rank)
            }
        }
    }
}

/// Compressed-row sparse complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseOperator {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, mut entries: Vec<(usize, usize, Complex64)>) -> Result<Self> {
        if dim > MAX_DIM {
            return Err(Error::DimensionOverflow { dim, cap: MAX_DIM });
        }
        if entries.iter().any(|&(r, c, _)| r >= dim || c >= dim) {
            return Err(Error::SpinSystem("triplet index out of range".into()));
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry present") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            dim,
            row_ptr,
            cols,
            vals,
        })
    }

    /// As [`from_triplets`](Self::from_triplets) but rejects non-Hermitian input.
    pub fn hermitian_from_triplets(dim: usize, entries: Vec<(usize, usize, Complex64)>) -> Result<Self> {
        let op = Self::from_triplets(dim, entries)?;
        let dev = op.hermiticity_error();
        if dev > 1e-12 * op.norm_bound().max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(op)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: vec![],
            vals: vec![],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.row(r)
            .find(|&(cc, _)| cc == c)
            .map(|(_, v)| v)
            .unwrap_or(ZERO)
    }

    /// Largest `|A_ij − conj(A_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == 0.0)
    }

    /// Maximum absolute row sum; an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `y = A x`
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.dim) {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yr = acc;
        }
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.dim];
        self.apply(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, ZERO);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn to_dense_real(&self) -> DMatrix<f64> {
        self.to_dense().map(|v| v.re)
    }

    /// `a·A + b·B` (same dimension).
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut entries = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.dim {
            entries.extend(self.row(r).map(|(c, v)| (r, c, v * a)));
            entries.extend(other.row(r).map(|(c, v)| (r, c, v * b)));
        }
        Self::from_triplets(self.dim, entries)
    }

    /// True when every non-zero element connects states of equal weight.
    pub fn conserves_excitations(&self, basis: &Basis) -> bool {
        (0..self.dim).all(|r| {
            self.row(r).all(|(c, v)| {
                v == ZERO || basis.state(r).count_ones() == basis.state(c).count_ones()
            })
        })
    }
}

/// Couplings, longitudinal fields and optional conserved sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    pub couplings: CouplingMatrix,
    pub fields: Vec<f64>,
    pub sector: Option<usize>,
}

impl SpinSystem {
    pub fn new(couplings: CouplingMatrix, fields: Vec<f64>, sector: Option<usize>) -> Result<Self> {
        let l = couplings.len();
        if l == 0 {
            return Err(Error::SpinSystem("empty system".into()));
        }
        if fields.len() != l {
            return Err(Error::SpinSystem(format!(
                "{} fields for {} sites",
                fields.len(),
                l
            )));
        }
        if fields.iter().any(|h| !h.is_finite()) {
            return Err(Error::SpinSystem("non-finite field".into()));
        }
        if sector.is_some_and(|n| n > l) {
            return Err(Error::SpinSystem("sector exceeds site count".into()));
        }
        Ok(Self {
            couplings,
            fields,
            sector,
        })
    }

    pub fn ladder(l: usize, j1: f64, j2: f64, fields: Vec<f64>, sector: Option<usize>) -> Result<Self> {
        Self::new(CouplingMatrix::ladder(l, j1, j2), fields, sector)
    }

    pub fn sites(&self) -> usize {
        self.couplings.len()
    }

    pub fn basis(&self) -> Result<Basis> {
        Basis::new(self.sites(), self.sector)
    }
}

/// `H = Σ_{i<j} J_ij (S⁺_i S⁻_j + h.c.) + Σ_j h_j S^z_j` on the system's basis.
pub fn build_xy_hamiltonian(sys: &SpinSystem) -> Result<(SparseOperator, Arc<Basis>)> {
    let basis = sys.basis()?;
    let bonds = sys.couplings.bonds();
    let mut entries = Vec::with_capacity(basis.dim() * (1 + bonds.len() / 2));
    for (r, &s) in basis.states().iter().enumerate() {
        let diag: f64 = sys
            .fields
            .iter()
            .enumerate()
            .map(|(j, h)| h * if s >> j & 1 == 1 { 0.5 } else { -0.5 })
            .sum();
        if diag != 0.0 {
            entries.push((r, r, Complex64::new(diag, 0.0)));
        }
        for &(i, j, jij) in &bonds {
            if (s >> i & 1) != (s >> j & 1) {
                let t = s ^ (1 << i) ^ (1 << j);
                let c = basis.index(t).expect("flip-flop stays in sector");
                entries.push((r, c, Complex64::new(jij, 0.0)));
            }
        }
    }
    let op = SparseOperator::hermitian_from_triplets(basis.dim(), entries)?;
    Ok((op, Arc::new(basis)))
}

/// Open-boundary J1–J2 chain.
pub fn build_ladder_hamiltonian(
    l: usize,
    j1: f64,
    j2: f64,
    fields: &[f64],
    sector: Option<usize>,
) -> Result<(SparseOperator, Arc<Basis>)> {
    if j2 != 0.0 && l < 3 {
        return Err(Error::SpinSystem("next-nearest couplings need L ≥ 3".into()));
    }
    build_xy_hamiltonian(&SpinSystem::ladder(l, j1, j2, fields.to_vec(), sector)?)
}

/// `Σ_j Ω_j S^x_j + Σ_j Δ_j S^z_j` on the full space.
pub fn build_drive(omega: &[f64], delta: &[f64]) -> Result<SparseOperator> {
    if omega.len() != delta.len() {
        return Err(Error::SpinSystem("Ω and Δ arrays differ in length".into()));
    }
    let basis = Basis::full(omega.len())?;
    let mut entries = Vec::new();
    for (r, &s) in basis.states().iter().enumerate() {
        let diag: f64 = delta
            .iter()
            .enumerate()
            .map(|(j, d)| d * if s >> j & 1 == 1 { 0.5 } else { -0.5 })
            .sum();
        if diag != 0.0 {
            entries.push((r, r, Complex64::new(diag, 0.0)));
        }
        for (j, &w) in omega.iter().enumerate() {
            if w != 0.0 {
                entries.push((r, (s ^ (1 << j)) as usize, Complex64::new(0.5 * w, 0.0)));
            }
        }
    }
    SparseOperator::hermitian_from_triplets(basis.dim(), entries)
}

/// `Ω_j = ((1 + (−1)^j) + δ_{j,L/2})` with 0-based `j`.
pub fn staggered_amplitudes(l: usize) -> Vec<f64> {
    (0..l)
        .map(|j| {
            let stag = if j % 2 == 0 { 2.0 } else { 0.0 };
            stag + if j == l / 2 { 1.0 } else { 0.0 }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// `(|↑↓⟩ + |↓↑⟩)/√2` on each dimer.
    Triplet,
    /// `(|↑↓⟩ − |↓↑⟩)/√2` on each dimer.
    Singlet,
}

impl Gauge {
    /// Dimer gauge favoured by a nearest-neighbour coupling of this sign.
    pub fn for_coupling(j1: f64) -> Self {
        if j1 > 0.0 {
            Self::Singlet
        } else {
            Self::Triplet
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    basis: Arc<Basis>,
    amps: Vec<Complex64>,
}

impl PureState {
    pub fn new(basis: Arc<Basis>, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: amps.len(),
            });
        }
        let mut s = Self { basis, amps };
        let n = s.norm();
        if !(n > 0.0) {
            return Err(Error::SpinSystem("zero state vector".into()));
        }
        s.amps.iter_mut().for_each(|a| *a /= n);
        Ok(s)
    }

    /// Computational basis state given as a bitstring.
    pub fn product(basis: Arc<Basis>, bits: u32) -> Result<Self> {
        let i = basis
            .index(bits)
            .ok_or_else(|| Error::SpinSystem(format!("bitstring {bits:b} outside the basis")))?;
        let mut amps = vec![ZERO; basis.dim()];
        amps[i] = Complex64::new(1.0, 0.0);
        Ok(Self { basis, amps })
    }

    /// `|↑↓↑↓…⟩` (even sites up).
    pub fn neel(basis: Arc<Basis>) -> Result<Self> {
        let bits = (0..basis.sites()).step_by(2).fold(0u32, |b, j| b | 1 << j);
        Self::product(basis, bits)
    }

    pub fn all_down(basis: Arc<Basis>) -> Result<Self> {
        Self::product(basis, 0)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        let o = other.to_basis(&self.basis)?;
        Ok(self
            .amps
            .iter()
            .zip(&o.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn overlap_sq(&self, other: &Self) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Re-expresses the state on another basis of the same site count.
    pub fn to_basis(&self, target: &Arc<Basis>) -> Result<Self> {
        if target.sites() != self.basis.sites() {
            return Err(Error::SpinSystem("site counts differ".into()));
        }
        if Arc::ptr_eq(target, &self.basis) || **target == *self.basis {
            return Ok(Self {
                basis: target.clone(),
                amps: self.amps.clone(),
            });
        }
        let mut amps = vec![ZERO; target.dim()];
        for (i, &a) in self.amps.iter().enumerate() {
            match target.index(self.basis.state(i)) {
                Some(j) => amps[j] = a,
                None if a.norm() > 1e-12 => {
                    return Err(Error::SpinSystem(
                        "state has weight outside the target sector".into(),
                    ))
                }
                None => {}
            }
        }
        Ok(Self {
            basis: target.clone(),
            amps,
        })
    }

    /// `⟨ψ|H|ψ⟩` (real part).
    pub fn energy(&self, h: &SparseOperator) -> Result<f64> {
        if h.dim() != self.amps.len() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                got: self.amps.len(),
            });
        }
        let hv = h.mul_vec(&self.amps);
        Ok(self
            .amps
            .iter()
            .zip(&hv)
            .map(|(a, b)| (a.conj() * b).re)
            .sum())
    }

    /// Applies `S⁺ → −S⁺` on odd sites.
    pub fn sublattice_gauge(&self) -> Self {
        let odd = (1..self.basis.sites()).step_by(2).fold(0u32, |b, j| b | 1 << j);
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                if (self.basis.state(i) & odd).count_ones() % 2 == 1 {
                    -a
                } else {
                    a
                }
            })
            .collect();
        Self {
            basis: self.basis.clone(),
            amps,
        }
    }
}

/// Dimer product state on bonds `(2k, 2k+1)` in the half-filling sector.
pub fn mg_product_state(l: usize, gauge: Gauge) -> Result<PureState> {
    if l == 0 || l % 2 == 1 {
        return Err(Error::SpinSystem(format!("dimer state needs even L, got {l}")));
    }
    let basis = Arc::new(Basis::new(l, Some(l / 2))?);
    let pairs = l / 2;
    let sign = match gauge {
        Gauge::Triplet => 1.0,
        Gauge::Singlet => -1.0,
    };
    let norm = 0.5f64.powf(pairs as f64 / 2.0);
    let mut amps = vec![ZERO; basis.dim()];
    for choice in 0u32..(1 << pairs) {
        // bit k of `choice` set: dimer k is |↓↑⟩ (site 2k+1 up)
        let mut bits = 0u32;
        let mut amp = norm;
        for k in 0..pairs {
            if choice >> k & 1 == 1 {
                bits |= 1 << (2 * k + 1);
                amp *= sign;
            } else {
                bits |= 1 << (2 * k);
            }
        }
        let i = basis.index(bits).expect("half filling");
        amps[i] = Complex64::new(amp, 0.0);
    }
    Ok(PureState { basis, amps })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    basis: Arc<Basis>,
    rho: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(basis: Arc<Basis>, rho: DMatrix<Complex64>) -> Result<Self> {
        if rho.nrows() != basis.dim() || rho.ncols() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: rho.nrows(),
            });
        }
        Ok(Self { basis, rho })
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        Self {
            basis: psi.basis.clone(),
            rho: &v * v.adjoint(),
        }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.rho
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Trace, Hermiticity and positivity within `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        (self.trace() - Complex64::new(1.0, 0.0)).norm() <= tol
            && self.hermiticity_error() <= tol
            && self.min_eigenvalue() >= -tol
    }
}
