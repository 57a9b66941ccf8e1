//! Lumped-element model of two transmons and a cavity.
//!
//! Capacitances in fF, inductances in nH, distances in mm. Internally
//! `ω = 1/√(LC)` comes out in units of 1e12 rad/s; frequencies are reported
//! in 2π·GHz and couplings in 2π·MHz.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingMap, MapGrid};
use crate::error::{Error, Result};
use crate::geometry::QubitSite;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced flux quantum ħ/(2e), Wb.
pub const PHI0: f64 = HBAR / (2.0 * E_CHARGE);

const RAW_TO_GHZ: f64 = 1000.0 / (2.0 * PI);
const RAW_TO_MHZ: f64 = 1.0e6 / (2.0 * PI);

/// Two co-planar paddles of width `w` with edge separation `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaddlePair {
    pub w: f64,
    pub s: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CapacitanceLaw {
    Exact,
    /// `C = a / s²`
    Quadratic { a: f64 },
}

pub fn paddle_capacitance(p: &PaddlePair, law: CapacitanceLaw) -> Result<f64> {
    if !(p.w > 0.0) || !(p.s > 0.0) {
        return Err(Error::Circuit(format!(
            "paddle width and separation must be positive (w = {}, s = {})",
            p.w, p.s
        )));
    }
    Ok(match law {
        CapacitanceLaw::Exact => {
            let ws = p.w + p.s;
            // ln(ws² / (ws² − w²)) = −ln(1 − (w/ws)²)
            -(2.0 * p.epsilon / PI) * (-(p.w / ws).powi(2)).ln_1p()
        }
        CapacitanceLaw::Quadratic { a } => a / (p.s * p.s),
    })
}

/// Antenna pads of each qubit: two pads at `±span/2` along the dipole
/// axis, each coupled to both pads of the other qubit by `a / r²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PadModel {
    pub span_mm: f64,
    /// fF·mm²
    pub coefficient: f64,
}

/// Result of reducing the four pad capacitors onto the two qubit fluxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadReduction {
    /// Effective coupling capacitance (negative off-diagonal element).
    pub c_q: f64,
    /// Extra capacitance to ground seen by each qubit.
    pub load: [f64; 2],
}

fn pads(site: &QubitSite, span: f64) -> [[f64; 2]; 2] {
    let (s, c) = site.dipole_angle.sin_cos();
    let h = 0.5 * span;
    let p = site.position;
    [[p[0] + h * c, p[1] + h * s], [p[0] - h * c, p[1] - h * s]]
}

/// Exact reduction of the pad network. Each qubit flux is the difference of
/// its pad potentials; the relative common-mode `X = Σ₁ − Σ₂` is eliminated
/// by a Schur complement and the global mode drops out.
pub fn reduce_pad_network(a: &QubitSite, b: &QubitSite, model: &PadModel) -> Result<PadReduction> {
    if !(model.span_mm > 0.0) || !(model.coefficient >= 0.0) {
        return Err(Error::Circuit("pad span must be positive, coefficient non-negative".into()));
    }
    let pa = pads(a, model.span_mm);
    let pb = pads(b, model.span_mm);
    let signs = [1.0, -1.0];
    // Quadratic form in (Φ₁, Φ₂, X).
    let mut k = [[0.0f64; 3]; 3];
    for (i, sa) in signs.iter().enumerate() {
        for (j, sb) in signs.iter().enumerate() {
            let dx = pa[i][0] - pb[j][0];
            let dy = pa[i][1] - pb[j][1];
            let r2 = dx * dx + dy * dy;
            if r2 == 0.0 {
                return Err(Error::Circuit("coincident antenna pads".into()));
            }
            let c = model.coefficient / r2;
            let v = [0.5 * sa, -0.5 * sb, 1.0];
            for p in 0..3 {
                for q in 0..3 {
                    k[p][q] += c * v[p] * v[q];
                }
            }
        }
    }
    let mut red = [[k[0][0], k[0][1]], [k[1][0], k[1][1]]];
    if k[2][2] > 1e-300 {
        for p in 0..2 {
            for q in 0..2 {
                red[p][q] -= k[p][2] * k[2][q] / k[2][2];
            }
        }
    }
    let c_q = -red[0][1];
    Ok(PadReduction {
        c_q,
        load: [red[0][0] - c_q, red[1][1] - c_q],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Qubit,
    Cavity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityBranch {
    /// Qubit-cavity coupling capacitance `C_0`.
    pub c0: f64,
    pub c: f64,
    pub l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QubitCoupling {
    Direct { c_q: f64 },
    Pads {
        a: QubitSite,
        b: QubitSite,
        model: PadModel,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitSpec {
    pub c: [f64; 2],
    pub l: [f64; 2],
    pub coupling: QubitCoupling,
    pub cavity: Option<CavityBranch>,
}

impl CircuitSpec {
    pub fn with_l1(mut self, l1: f64) -> Self {
        self.l[0] = l1;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitNetwork {
    c: DMatrix<f64>,
    linv: DVector<f64>,
    roles: Vec<NodeRole>,
}

impl CircuitNetwork {
    pub fn new(c: DMatrix<f64>, linv: DVector<f64>, roles: Vec<NodeRole>) -> Result<Self> {
        let n = c.nrows();
        if !c.is_square() || linv.len() != n || roles.len() != n {
            return Err(Error::Circuit("inconsistent network dimensions".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 * c[(i, i)].abs().max(1.0) {
                    return Err(Error::Circuit("capacitance matrix is not symmetric".into()));
                }
            }
        }
        if linv.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Circuit("inverse inductances must be non-negative".into()));
        }
        if c.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { c, linv, roles })
    }

    pub fn capacitance(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn inverse_inductance(&self) -> &DVector<f64> {
        &self.linv
    }

    pub fn roles(&self) -> &[NodeRole] {
        &self.roles
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn cavity_index(&self) -> Option<usize> {
        self.roles.iter().position(|r| *r == NodeRole::Cavity)
    }

    pub fn qubit_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.roles[i] == NodeRole::Qubit)
            .collect()
    }

    /// Relabels the nodes: node `i` of the result is node `perm[i]` here.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        if perm.len() != n {
            return Err(Error::Circuit("permutation length mismatch".into()));
        }
        let c = DMatrix::from_fn(n, n, |i, j| self.c[(perm[i], perm[j])]);
        let linv = DVector::from_fn(n, |i, _| self.linv[perm[i]]);
        let roles = perm.iter().map(|&p| self.roles[p]).collect();
        Self::new(c, linv, roles)
    }
}

pub fn build_network(spec: &CircuitSpec) -> Result<CircuitNetwork> {
    if spec.c.iter().any(|&c| !(c >= 0.0)) {
        return Err(Error::Circuit("capacitances must be non-negative".into()));
    }
    if spec.l.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Circuit("inductances must be positive".into()));
    }
    let (c_q, load) = match spec.coupling {
        QubitCoupling::Direct { c_q } => {
            if !(c_q >= 0.0) {
                return Err(Error::Circuit("C_Q must be non-negative".into()));
            }
            (c_q, [0.0, 0.0])
        }
        QubitCoupling::Pads { a, b, model } => {
            let r = reduce_pad_network(&a, &b, &model)?;
            (r.c_q, r.load)
        }
    };
    let c1 = spec.c[0] + load[0];
    let c2 = spec.c[1] + load[1];
    match spec.cavity {
        None => {
            let c = DMatrix::from_row_slice(2, 2, &[c1 + c_q, -c_q, -c_q, c2 + c_q]);
            let linv = DVector::from_vec(vec![1.0 / spec.l[0], 1.0 / spec.l[1]]);
            CircuitNetwork::new(c, linv, vec![NodeRole::Qubit; 2])
        }
        Some(cav) => {
            if !(cav.c0 >= 0.0) || !(cav.c >= 0.0) || !(cav.l > 0.0) {
                return Err(Error::Circuit("invalid cavity branch".into()));
            }
            let c0 = cav.c0;
            #[rustfmt::skip]
            let c = DMatrix::from_row_slice(3, 3, &[
                c1 + c_q + c0, -c_q, -c0,
                -c_q, c2 + c_q + c0, -c0,
                -c0, -c0, cav.c + c0,
            ]);
            let linv = DVector::from_vec(vec![1.0 / spec.l[0], 1.0 / spec.l[1], 1.0 / cav.l]);
            CircuitNetwork::new(
                c,
                linv,
                vec![NodeRole::Qubit, NodeRole::Qubit, NodeRole::Cavity],
            )
        }
    }
}

/// Normal modes, ascending. `vectors` columns are flux-space eigenvectors
/// normalized so that `vᵀ C v = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Modes {
    /// 2π·GHz
    pub frequencies: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Solves `L⁻¹ v = ω² C v` via the Cholesky factor of `C`.
pub fn normal_modes(net: &CircuitNetwork) -> Result<Modes> {
    let n = net.len();
    let chol = net.c.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let linv_diag = DMatrix::from_diagonal(&net.linv);
    // A = L⁻¹ Linv L⁻ᵀ
    let x = l
        .solve_lower_triangular(&linv_diag)
        .ok_or(Error::NotPositiveDefinite)?;
    let a = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::NotPositiveDefinite)?;
    let a = (&a + a.transpose()) * 0.5;
    let eig = a.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lt = l.transpose();
    let mut vectors = DMatrix::zeros(n, n);
    let mut frequencies = Vec::with_capacity(n);
    for (k, &i) in order.iter().enumerate() {
        frequencies.push(eig.eigenvalues[i].max(0.0).sqrt() * RAW_TO_GHZ);
        let u = eig.eigenvectors.column(i).into_owned();
        let v = lt
            .solve_upper_triangular(&u)
            .ok_or(Error::NotPositiveDefinite)?;
        vectors.set_column(k, &v);
    }
    Ok(Modes {
        frequencies,
        vectors,
    })
}

/// Index pair (ascending frequency) of the two qubit-like modes: every mode
/// except the one with the largest cavity participation.
fn qubit_like_modes(net: &CircuitNetwork, modes: &Modes) -> Result<(usize, usize)> {
    let n = net.len();
    let qubits = net.qubit_indices();
    if qubits.len() != 2 {
        return Err(Error::Circuit("coupling extraction needs exactly two qubits".into()));
    }
    match net.cavity_index() {
        None => Ok((0, 1)),
        Some(cav) => {
            let part = |k: usize| {
                let v = modes.vectors.column(k);
                let tot: f64 = (0..n).map(|i| v[i] * v[i] * net.c[(i, i)]).sum();
                v[cav] * v[cav] * net.c[(cav, cav)] / tot
            };
            let cav_mode = (0..n)
                .max_by(|&a, &b| part(a).total_cmp(&part(b)))
                .unwrap_or(0);
            let rest: Vec<usize> = (0..n).filter(|&k| k != cav_mode).collect();
            Ok((rest[0], rest[1]))
        }
    }
}

/// Result of an avoided-crossing sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extraction {
    /// Signed coupling, 2π·MHz.
    pub j: f64,
    /// Minimum gap between the two qubit-like modes, 2π·MHz.
    pub gap: f64,
    pub crossing_l1: f64,
}

fn mode_gap(net: &CircuitNetwork) -> Result<(f64, f64)> {
    let modes = normal_modes(net)?;
    let (lo, hi) = qubit_like_modes(net, &modes)?;
    let gap = (modes.frequencies[hi] - modes.frequencies[lo]) * 1000.0;
    let q = net.qubit_indices();
    let v = modes.vectors.column(lo);
    let sign = if v[q[0]] * v[q[1]] < 0.0 { 1.0 } else { -1.0 };
    Ok((gap, sign))
}

/// Golden-section minimization of the qubit-mode gap over `L1 ∈ [lo, hi]`.
/// `J = gap/2`, positive when the lower mode is antisymmetric on the qubits.
pub fn extract_coupling<F>(family: F, lo: f64, hi: f64) -> Result<Extraction>
where
    F: Fn(f64) -> Result<CircuitNetwork>,
{
    if !(lo > 0.0) || !(hi > lo) {
        return Err(Error::Circuit(format!("invalid sweep range [{lo}, {hi}]")));
    }
    let gap = |l1: f64| -> Result<f64> { Ok(mode_gap(&family(l1)?)?.0) };
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let tol = 1e-10 * (hi - lo);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - invphi * (b - a);
    let mut x2 = a + invphi * (b - a);
    let mut f1 = gap(x1)?;
    let mut f2 = gap(x2)?;
    while b - a > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = gap(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = gap(x2)?;
        }
    }
    let x = 0.5 * (a + b);
    let edge = 1e-6 * (hi - lo);
    if x - lo < edge || hi - x < edge {
        return Err(Error::NoInteriorMinimum { lo, hi });
    }
    let (g, sign) = mode_gap(&family(x)?)?;
    if !(g < gap(lo)? && g < gap(hi)?) {
        return Err(Error::NoInteriorMinimum { lo, hi });
    }
    Ok(Extraction {
        j: sign * g / 2.0,
        gap: g,
        crossing_l1: x,
    })
}

/// Extraction for a [`CircuitSpec`], sweeping `L1` over `[lo, hi]`.
pub fn extract_spec_coupling(spec: &CircuitSpec, lo: f64, hi: f64) -> Result<Extraction> {
    extract_coupling(|l1| build_network(&spec.with_l1(l1)), lo, hi)
}

/// Rows `(L1, ω_0, ω_1, …)` in nH and 2π·GHz over an even sweep.
pub fn mode_table(spec: &CircuitSpec, lo: f64, hi: f64, n: usize) -> Result<Vec<Vec<f64>>> {
    crate::coupling::linspace(lo, hi, n)
        .into_iter()
        .map(|l1| {
            let m = normal_modes(&build_network(&spec.with_l1(l1))?)?;
            let mut row = vec![l1];
            row.extend(m.frequencies);
            Ok(row)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizedCircuit {
    /// Local oscillator frequencies `1/√(L_i C_i^eff)`, 2π·GHz.
    pub omega: Vec<f64>,
    /// `1 / (C⁻¹)_ii`, fF.
    pub c_eff: Vec<f64>,
    /// Charge zero-point amplitude in units of e.
    pub q_zpf: Vec<f64>,
    /// Flux zero-point amplitude in units of ħ/2e.
    pub phi_zpf: Vec<f64>,
    /// Exchange couplings, 2π·MHz (zero diagonal).
    pub lambda: Vec<Vec<f64>>,
    /// Anharmonicity scale per node, 2π·MHz (zero for the cavity).
    pub anharmonicity: Vec<f64>,
    /// Josephson energies, 2π·GHz (zero for the cavity).
    pub ej: Vec<f64>,
    pub roles: Vec<NodeRole>,
}

/// Josephson energy (2π·GHz) of a junction with inductance `l_nh`.
pub fn ej_from_inductance(l_nh: f64) -> f64 {
    HBAR / (4.0 * E_CHARGE * E_CHARGE * l_nh * 1e-9) / (2.0 * PI * 1e9)
}

/// Local-mode quantization. `ej` lists one Josephson energy per qubit node,
/// in node order.
pub fn quantize(net: &CircuitNetwork, ej: &[f64]) -> Result<QuantizedCircuit> {
    let n = net.len();
    let qubits = net.qubit_indices();
    if ej.len() != qubits.len() {
        return Err(Error::Circuit(format!(
            "expected {} Josephson energies, got {}",
            qubits.len(),
            ej.len()
        )));
    }
    if ej.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Circuit("Josephson energies must be positive".into()));
    }
    let cinv = net
        .c
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Circuit("singular capacitance matrix".into()))?;
    let c_eff: Vec<f64> = (0..n).map(|i| 1.0 / cinv[(i, i)]).collect();
    let l: Vec<f64> = net.linv.iter().map(|&v| 1.0 / v).collect();
    let raw: Vec<f64> = (0..n).map(|i| 1.0 / (l[i] * c_eff[i]).sqrt()).collect();
    let mut lambda = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = cinv[(i, j)] * (raw[i] * c_eff[i] * raw[j] * c_eff[j]).sqrt() / 2.0 * RAW_TO_MHZ;
            lambda[i][j] = v;
            lambda[j][i] = v;
        }
    }
    let mut ej_full = vec![0.0; n];
    for (k, &q) in qubits.iter().enumerate() {
        ej_full[q] = ej[k];
    }
    let q_zpf: Vec<f64> = (0..n)
        .map(|i| (HBAR * raw[i] * 1e12 * c_eff[i] * 1e-15 / 2.0).sqrt() / E_CHARGE)
        .collect();
    let phi_zpf: Vec<f64> = (0..n)
        .map(|i| (HBAR * raw[i] * 1e12 * l[i] * 1e-9 / 2.0).sqrt() / PHI0)
        .collect();
    let anharmonicity = (0..n)
        .map(|i| ej_full[i] / 4.0 * phi_zpf[i].powi(4) * 1000.0)
        .collect();
    Ok(QuantizedCircuit {
        omega: raw.iter().map(|w| w * RAW_TO_GHZ).collect(),
        c_eff,
        q_zpf,
        phi_zpf,
        lambda,
        anharmonicity,
        ej: ej_full,
        roles: net.roles.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveCoupling {
    /// `λ₁₂ + λ₁Rλ₂R / (2Δ₂)`, 2π·MHz.
    pub j12: f64,
    /// `λ₂₁ + λ₂Rλ₁R / (2Δ₁)`, 2π·MHz.
    pub j21: f64,
    pub delta_tilde: [f64; 2],
    pub anharmonicity_tilde: [f64; 2],
    pub epsilon: [f64; 2],
    /// Set when some `|λ_iR / Δ_i|` exceeds 0.1.
    pub outside_dispersive: bool,
}

/// Qubit-cavity detunings `Δ_i = ω_R − ω_i` from the local frequencies, 2π·MHz.
pub fn cavity_detunings(q: &QuantizedCircuit) -> Result<[f64; 2]> {
    let (qs, cav) = split_roles(q)?;
    Ok([
        (q.omega[cav] - q.omega[qs[0]]) * 1000.0,
        (q.omega[cav] - q.omega[qs[1]]) * 1000.0,
    ])
}

fn split_roles(q: &QuantizedCircuit) -> Result<([usize; 2], usize)> {
    let qs: Vec<usize> = (0..q.roles.len())
        .filter(|&i| q.roles[i] == NodeRole::Qubit)
        .collect();
    let cav = q.roles.iter().position(|r| *r == NodeRole::Cavity);
    match (qs.as_slice(), cav) {
        (&[a, b], Some(c)) => Ok(([a, b], c)),
        _ => Err(Error::Circuit("expected two qubits and one cavity".into())),
    }
}

/// Dispersive elimination of the cavity with detunings `Δ_i` (2π·MHz).
pub fn effective_coupling(q: &QuantizedCircuit, detunings: [f64; 2]) -> Result<EffectiveCoupling> {
    let ([a, b], r) = split_roles(q)?;
    if detunings.contains(&0.0) {
        return Err(Error::Circuit("zero qubit-cavity detuning".into()));
    }
    let lar = q.lambda[a][r];
    let lbr = q.lambda[b][r];
    let eps = [-lar / detunings[0], -lbr / detunings[1]];
    let outside = eps.iter().any(|e| e.abs() > 0.1);
    if outside {
        log::warn!(
            "outside the dispersive regime: |λ/Δ| = {:.3}, {:.3}",
            eps[0].abs(),
            eps[1].abs()
        );
    }
    Ok(EffectiveCoupling {
        j12: q.lambda[a][b] + lar * lbr / (2.0 * detunings[1]),
        j21: q.lambda[b][a] + lbr * lar / (2.0 * detunings[0]),
        delta_tilde: [
            -detunings[0] * (1.0 - eps[0] * eps[0]),
            -detunings[1] * (1.0 - eps[1] * eps[1]),
        ],
        anharmonicity_tilde: [
            q.anharmonicity[a] * (1.0 + 4.0 * eps[0] * eps[0]),
            q.anharmonicity[b] * (1.0 + 4.0 * eps[1] * eps[1]),
        ],
        epsilon: eps,
        outside_dispersive: outside,
    })
}

/// Second-order exchange through the cavity for the full quadratic
/// Hamiltonian, counter-rotating terms included:
/// `λ₁₂ + ½λ₁Rλ₂R Σ_i [1/(ω_i − ω_R) − 1/(ω_i + ω_R)]`, 2π·MHz.
pub fn second_order_coupling(q: &QuantizedCircuit) -> Result<f64> {
    let ([a, b], r) = split_roles(q)?;
    let w = |i: usize| q.omega[i] * 1000.0;
    let s: f64 = [a, b]
        .iter()
        .map(|&i| 1.0 / (w(i) - w(r)) - 1.0 / (w(i) + w(r)))
        .sum();
    Ok(q.lambda[a][b] + 0.5 * q.lambda[a][r] * q.lambda[b][r] * s)
}

/// Calibrated circuit defaults for position-dependent coupling maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub c_qubit: f64,
    pub l_qubit: f64,
    pub pads: PadModel,
    pub cavity: Option<CavityBranch>,
    /// Relative half-width of the `L1` sweep around `l_qubit`.
    pub sweep: f64,
}

impl CircuitParams {
    /// Qubits near 6.0 GHz, cavity near 7.5 GHz with `|λ_R/Δ| ≈ 0.05`.
    pub fn reference() -> Self {
        Self {
            c_qubit: 70.0,
            l_qubit: 10.0,
            pads: PadModel {
                span_mm: 0.6,
                coefficient: 40.0,
            },
            cavity: Some(CavityBranch {
                c0: 4.0,
                c: 300.0,
                l: 1.5,
            }),
            sweep: 0.2,
        }
    }

    pub fn without_cavity(mut self) -> Self {
        self.cavity = None;
        self
    }

    pub fn spec(&self, a: &QubitSite, b: &QubitSite) -> CircuitSpec {
        CircuitSpec {
            c: [self.c_qubit; 2],
            l: [self.l_qubit; 2],
            coupling: QubitCoupling::Pads {
                a: *a,
                b: *b,
                model: self.pads,
            },
            cavity: self.cavity,
        }
    }

    pub fn coupling(&self, a: &QubitSite, b: &QubitSite) -> Result<Extraction> {
        extract_spec_coupling(
            &self.spec(a, b),
            self.l_qubit * (1.0 - self.sweep),
            self.l_qubit * (1.0 + self.sweep),
        )
    }
}

/// Circuit-model coupling `J(x, y)` felt by a copy of `fixed` at `(x, y)`,
/// masked within `exclusion_radius`.
pub fn circuit_coupling_map(
    fixed: &QubitSite,
    grid: &MapGrid,
    params: &CircuitParams,
    exclusion_radius: f64,
) -> Result<CouplingMap> {
    CouplingMap::from_fn(grid, |x, y| {
        let moving = QubitSite {
            position: [x, y],
            ..*fixed
        };
        if fixed.distance(&moving) <= exclusion_radius {
            return Ok(None);
        }
        params.coupling(fixed, &moving).map(|e| Some(e.j))
    })
}
