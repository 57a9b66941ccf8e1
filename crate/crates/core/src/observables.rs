//! Bond-order and magnetization diagnostics for pure and mixed states.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{Basis, DensityMatrix, PureState};

/// Expectation values of diagonal and bit-flip operators.
pub trait SpinExpectation {
    fn basis(&self) -> &Basis;

    /// `Σ_s p(s) f(s)` over basis states.
    fn diagonal(&self, f: &dyn Fn(u32) -> f64) -> f64;

    /// `⟨X_mask⟩` where `X_mask` flips every bit in `mask`.
    fn flip(&self, mask: u32) -> Complex64;
}

impl SpinExpectation for PureState {
    fn basis(&self) -> &Basis {
        PureState::basis(self)
    }

    fn diagonal(&self, f: &dyn Fn(u32) -> f64) -> f64 {
        let b = PureState::basis(self);
        self.amplitudes()
            .iter()
            .enumerate()
            .map(|(i, a)| a.norm_sqr() * f(b.state(i)))
            .sum()
    }

    fn flip(&self, mask: u32) -> Complex64 {
        let b = PureState::basis(self);
        let amps = self.amplitudes();
        amps.iter()
            .enumerate()
            .filter_map(|(i, a)| b.index(b.state(i) ^ mask).map(|j| amps[j].conj() * a))
            .sum()
    }
}

impl SpinExpectation for DensityMatrix {
    fn basis(&self) -> &Basis {
        DensityMatrix::basis(self)
    }

    fn diagonal(&self, f: &dyn Fn(u32) -> f64) -> f64 {
        let b = DensityMatrix::basis(self);
        let rho = self.matrix();
        (0..b.dim()).map(|i| rho[(i, i)].re * f(b.state(i))).sum()
    }

    fn flip(&self, mask: u32) -> Complex64 {
        let b = DensityMatrix::basis(self);
        let rho = self.matrix();
        (0..b.dim())
            .filter_map(|i| b.index(b.state(i) ^ mask).map(|j| rho[(j, i)]))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Z,
}

fn sz(s: u32, j: usize) -> f64 {
    if s >> j & 1 == 1 {
        0.5
    } else {
        -0.5
    }
}

/// `⟨S^α_i S^α_j⟩`
pub fn correlation<S: SpinExpectation + ?Sized>(state: &S, axis: Axis, i: usize, j: usize) -> f64 {
    match axis {
        Axis::Z => state.diagonal(&|s| sz(s, i) * sz(s, j)),
        Axis::X => 0.25 * state.flip(1 << i | 1 << j).re,
    }
}

fn stagger(j: usize) -> f64 {
    if j.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BondOrder {
    /// `D_j = (−1)^j ⟨S^α_j S^α_{j+1}⟩`
    pub per_bond: Vec<f64>,
    pub sum: f64,
    /// `sum / (L − 1)`
    pub normalized: f64,
}

pub fn bond_order<S: SpinExpectation + ?Sized>(state: &S, axis: Axis) -> Result<BondOrder> {
    let l = state.basis().sites();
    if l < 2 {
        return Err(Error::SpinSystem("bond order needs at least two sites".into()));
    }
    let per_bond: Vec<f64> = (0..l - 1)
        .map(|j| stagger(j) * correlation(state, axis, j, j + 1))
        .collect();
    let sum: f64 = per_bond.iter().sum();
    Ok(BondOrder {
        normalized: sum / (l - 1) as f64,
        per_bond,
        sum,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CentralBond {
    pub bz: f64,
    pub bx: f64,
    /// `(−1)^c (⟨S^zS^z⟩_c − ⟨S^zS^z⟩_{c+1})`
    pub bzz: f64,
    pub index: usize,
    /// Set when `L` is not a multiple of four.
    pub flagged: bool,
}

/// Central strong bond: whichever of bonds `L/2 − 1`, `L/2` has the larger
/// `|⟨S^zS^z⟩|`, ties going to the even index.
pub fn central_bond<S: SpinExpectation + ?Sized>(state: &S) -> Result<CentralBond> {
    let l = state.basis().sites();
    if l < 4 {
        return Err(Error::SpinSystem(format!("central bond needs L ≥ 4, got {l}")));
    }
    let zz = |j: usize| correlation(state, Axis::Z, j, j + 1);
    let (a, b) = (l / 2 - 1, l / 2);
    let (za, zb) = (zz(a).abs(), zz(b).abs());
    let c = if (za - zb).abs() <= 1e-12 {
        if a % 2 == 0 {
            a
        } else {
            b
        }
    } else if za > zb {
        a
    } else {
        b
    };
    let zc = zz(c);
    Ok(CentralBond {
        bz: stagger(c) * zc,
        bx: stagger(c) * correlation(state, Axis::X, c, c + 1),
        bzz: stagger(c) * (zc - zz(c + 1)),
        index: c,
        flagged: !l.is_multiple_of(4),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Magnetization {
    pub per_site: Vec<f64>,
    pub mean: f64,
}

pub fn magnetization<S: SpinExpectation + ?Sized>(state: &S) -> Magnetization {
    let l = state.basis().sites();
    let per_site: Vec<f64> = (0..l).map(|j| state.diagonal(&|s| sz(s, j))).collect();
    let mean = per_site.iter().sum::<f64>() / l as f64;
    Magnetization { per_site, mean }
}

/// One row of a bond-order table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BondReport {
    #[serde(rename = "J2_over_J1")]
    pub j2_over_j1: f64,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "Dz")]
    pub dz: f64,
    #[serde(rename = "Dz_sum")]
    pub dz_sum: f64,
    #[serde(rename = "Dx")]
    pub dx: f64,
    #[serde(rename = "Bz")]
    pub bz: f64,
    #[serde(rename = "Bx")]
    pub bx: f64,
    #[serde(rename = "Bzz")]
    pub bzz: f64,
    pub chosen_bond_index: usize,
}

impl BondReport {
    pub fn measure<S: SpinExpectation + ?Sized>(state: &S, j2_over_j1: f64) -> Result<Self> {
        let dz = bond_order(state, Axis::Z)?;
        let dx = bond_order(state, Axis::X)?;
        let cb = central_bond(state)?;
        Ok(Self {
            j2_over_j1,
            l: state.basis().sites(),
            dz: dz.normalized,
            dz_sum: dz.sum,
            dx: dx.normalized,
            bz: cb.bz,
            bx: cb.bx,
            bzz: cb.bzz,
            chosen_bond_index: cb.index,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{mg_product_state, Gauge};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn mg_bond_order() {
        let s = mg_product_state(8, Gauge::Triplet).unwrap();
        let d = bond_order(&s, Axis::Z).unwrap();
        for (j, v) in d.per_bond.iter().enumerate() {
            let want = if j % 2 == 0 { -0.25 } else { 0.0 };
            assert_relative_eq!(*v, want, epsilon = 1e-14);
        }
        assert_relative_eq!(d.sum, -1.0, epsilon = 1e-14);
        assert_relative_eq!(d.normalized, -1.0 / 7.0, epsilon = 1e-14);
        let cb = central_bond(&s).unwrap();
        assert_relative_eq!(cb.bz.abs(), 0.25, epsilon = 1e-14);
        assert_relative_eq!(cb.bzz.abs(), 0.25, epsilon = 1e-14);
        assert_eq!(cb.index, 4);
        let m = magnetization(&s);
        assert!(m.per_site.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn neel_and_polarized() {
        let basis = Arc::new(Basis::full(6).unwrap());
        let n = PureState::neel(basis.clone()).unwrap();
        let d = bond_order(&n, Axis::Z).unwrap();
        assert_relative_eq!(d.normalized, -1.0 / (4.0 * 5.0), epsilon = 1e-14);
        let p = PureState::all_down(basis).unwrap();
        let cb = central_bond(&p).unwrap();
        assert_relative_eq!(cb.bz.abs(), 0.25, epsilon = 1e-14);
        assert_eq!(cb.bx, 0.0);
        assert_eq!(cb.bzz, 0.0);
        assert!(cb.flagged);
        assert!(magnetization(&p).per_site.iter().all(|&v| v == -0.5));
    }

    #[test]
    fn density_matches_pure() {
        let s = mg_product_state(8, Gauge::Singlet).unwrap();
        let rho = DensityMatrix::from_pure(&s);
        let a = central_bond(&s).unwrap();
        let b = central_bond(&rho).unwrap();
        assert!((a.bz - b.bz).abs() < 1e-12);
        assert!((a.bx - b.bx).abs() < 1e-12);
        assert!((a.bzz - b.bzz).abs() < 1e-12);
    }

    #[test]
    fn small_chain_rejected() {
        let s = mg_product_state(2, Gauge::Triplet).unwrap();
        assert!(central_bond(&s).is_err());
    }
}
