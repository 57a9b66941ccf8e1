//! Lindblad evolution of driven spin arrays under ramp schedules.
//!
//! States live on the full `2^L` space. The static Hamiltonian must be real
//! in the computational basis; drives add `Σ Ω_j S^x_j + Σ Δ_j S^z_j`.
//! Energies and rates are in 2π·MHz, so one time unit is `1/(2π)` µs.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{sample_fields, DisorderSpec};
use crate::error::{Error, Result};
use crate::observables::{central_bond, magnetization};
use crate::output::{num, Table};
use crate::spin::{build_ladder_hamiltonian, staggered_amplitudes, Basis, DensityMatrix, PureState, SparseOperator};

/// Largest chain evolved as a density matrix.
pub const DENSITY_SITE_CAP: usize = 10;
/// Initial uniform detuning in units of `|J1|`.
pub const DEFAULT_DELTA_INIT: f64 = 3.0;
/// Peak drive in units of `|J1|`.
pub const DEFAULT_OMEGA_PEAK: f64 = 1.0;
/// Ramp duration in units of `1/|J1|`.
pub const DEFAULT_DURATION: f64 = 450.0;
/// Steps per inverse spectral half-width.
pub const STEPS_PER_NORM: f64 = 50.0;
/// Trace and positivity violations beyond this abort the integration.
pub const ABORT_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayDirection {
    /// `C = √κ S⁻`, relaxing toward all-down.
    #[default]
    Lowering,
    /// `C = √κ S⁺`.
    Raising,
}

/// Per-site decay and dephasing rates in 2π·MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub kappa: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(default)]
    pub decay: DecayDirection,
}

impl NoiseParams {
    pub fn none(l: usize) -> Self {
        Self::uniform(l, 0.0, 0.0)
    }

    pub fn uniform(l: usize, kappa: f64, gamma: f64) -> Self {
        Self {
            kappa: vec![kappa; l],
            gamma: vec![gamma; l],
            decay: DecayDirection::Lowering,
        }
    }

    /// Rates given in 2π·kHz.
    pub fn from_khz(l: usize, kappa_khz: f64, gamma_khz: f64) -> Self {
        Self::uniform(l, kappa_khz * 1e-3, gamma_khz * 1e-3)
    }

    pub fn with_decay(self, decay: DecayDirection) -> Self {
        Self { decay, ..self }
    }

    pub fn validate(&self, l: usize) -> Result<()> {
        if self.kappa.len() != l || self.gamma.len() != l {
            return Err(Error::config("noise", format!("rates must have {l} entries")));
        }
        if self
            .kappa
            .iter()
            .chain(&self.gamma)
            .any(|r| !(r.is_finite() && *r >= 0.0))
        {
            return Err(Error::config("noise", "rates must be finite and ≥ 0"));
        }
        Ok(())
    }

    pub fn max_rate(&self) -> f64 {
        self.kappa.iter().chain(&self.gamma).cloned().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.max_rate() == 0.0
    }
}

/// Cosine-smoothed transition from `v0` at `t0` to `v1` at `t1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub v0: f64,
    pub v1: f64,
}

impl Segment {
    fn value(&self, t: f64) -> f64 {
        let u = ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0);
        let s = 0.5 * (1.0 - (std::f64::consts::PI * u).cos());
        self.v0 + (self.v1 - self.v0) * s
    }
}

/// Piecewise envelope, constant between and outside segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Envelope {
    pub segments: Vec<Segment>,
}

impl Envelope {
    pub fn constant(v: f64) -> Self {
        Self {
            segments: vec![Segment {
                t0: 0.0,
                t1: 1.0,
                v0: v,
                v1: v,
            }],
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let Some(first) = self.segments.first() else {
            return 0.0;
        };
        if t <= first.t0 {
            return first.v0;
        }
        let mut v = first.v0;
        for s in &self.segments {
            if t < s.t0 {
                break;
            }
            v = s.value(t);
        }
        v
    }

    /// Breakpoint times.
    pub fn knots(&self) -> Vec<f64> {
        self.segments.iter().flat_map(|s| [s.t0, s.t1]).collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        let mut prev: Option<&Segment> = None;
        for s in &self.segments {
            if ![s.t0, s.t1, s.v0, s.v1].iter().all(|v| v.is_finite()) || s.t1 <= s.t0 {
                return Err(Error::Schedule(format!("{name}: malformed segment {s:?}")));
            }
            if let Some(p) = prev {
                if s.t0 < p.t1 {
                    return Err(Error::Schedule(format!("{name}: overlapping segments")));
                }
                if (s.v0 - p.v1).abs() > 1e-12 * (1.0 + p.v1.abs()) {
                    return Err(Error::Schedule(format!("{name}: discontinuous at t = {}", s.t0)));
                }
            }
            prev = Some(s);
        }
        Ok(())
    }
}

/// `Ω_j(t) = Ω(t)·omega_pattern[j]`, `Δ_j(t) = Δ(t)·delta_pattern[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub duration: f64,
    pub omega: Envelope,
    pub omega_pattern: Vec<f64>,
    pub delta: Envelope,
    pub delta_pattern: Vec<f64>,
}

impl RampSchedule {
    /// No drive at all.
    pub fn idle(l: usize, duration: f64) -> Result<Self> {
        let s = Self {
            duration,
            omega: Envelope::default(),
            omega_pattern: vec![0.0; l],
            delta: Envelope::default(),
            delta_pattern: vec![0.0; l],
        };
        s.validate()?;
        Ok(s)
    }

    pub fn sites(&self) -> usize {
        self.omega_pattern.len()
    }

    pub fn omega_at(&self, t: f64) -> Vec<f64> {
        let e = self.omega.value(t);
        self.omega_pattern.iter().map(|p| p * e).collect()
    }

    pub fn delta_at(&self, t: f64) -> Vec<f64> {
        let e = self.delta.value(t);
        self.delta_pattern.iter().map(|p| p * e).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Schedule(format!("duration must be positive, got {}", self.duration)));
        }
        if self.omega_pattern.len() != self.delta_pattern.len() {
            return Err(Error::Schedule("Ω and Δ patterns differ in length".into()));
        }
        if self
            .omega_pattern
            .iter()
            .chain(&self.delta_pattern)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Schedule("non-finite pattern entry".into()));
        }
        self.omega.validate("omega")?;
        self.delta.validate("delta")?;
        let scale = 1e-12 * (1.0 + self.omega_peak().1.abs());
        if self.omega.value(0.0).abs() > scale || self.omega.value(self.duration).abs() > scale {
            return Err(Error::Schedule("drive must vanish at both ends".into()));
        }
        let (t_peak, _) = self.omega_peak();
        let dt = self.delta.value(t_peak).abs();
        let late = self
            .delta
            .knots()
            .into_iter()
            .filter(|&k| k >= t_peak)
            .chain([t_peak, self.duration])
            .map(|k| self.delta.value(k).abs())
            .fold(dt, f64::max);
        if late > 1e-12 * (1.0 + self.delta.value(0.0).abs()) {
            return Err(Error::Schedule("detuning must vanish before the drive peaks".into()));
        }
        Ok(())
    }

    /// First time at which `|Ω(t)|` is largest, located on the knots.
    fn omega_peak(&self) -> (f64, f64) {
        self.omega
            .knots()
            .into_iter()
            .map(|k| (k, self.omega.value(k)))
            .fold((0.0, 0.0), |best, (k, v)| if v.abs() > best.1.abs() { (k, v) } else { best })
    }
}

/// Detuning `Δ_init → 0` over `[0, 0.4T]` while the staggered drive rises to
/// `Ω_peak` over `[0, 0.5T]`, holds, and returns to zero over `[0.6T, T]`.
pub fn default_ramp(l: usize, duration: f64, omega_peak: f64, delta_init: f64) -> Result<RampSchedule> {
    if !l.is_multiple_of(2) {
        return Err(Error::Schedule(format!("staggered drive needs even L, got {l}")));
    }
    let t = duration;
    let s = RampSchedule {
        duration,
        omega: Envelope {
            segments: vec![
                Segment {
                    t0: 0.0,
                    t1: 0.5 * t,
                    v0: 0.0,
                    v1: omega_peak,
                },
                Segment {
                    t0: 0.6 * t,
                    t1: t,
                    v0: omega_peak,
                    v1: 0.0,
                },
            ],
        },
        omega_pattern: staggered_amplitudes(l),
        delta: Envelope {
            segments: vec![Segment {
                t0: 0.0,
                t1: 0.4 * t,
                v0: delta_init,
                v1: 0.0,
            }],
        },
        delta_pattern: vec![1.0; l],
    };
    s.validate()?;
    Ok(s)
}

/// [`default_ramp`] with the tuned defaults scaled by `|j1|`.
pub fn tuned_ramp(l: usize, j1: f64) -> Result<RampSchedule> {
    let a = j1.abs();
    default_ramp(l, DEFAULT_DURATION / a, DEFAULT_OMEGA_PEAK * a, DEFAULT_DELTA_INIT * a)
}

/// Time-dependent Hamiltonian on the full space.
#[derive(Debug, Clone)]
struct Generator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
    /// `Σ_j delta_pattern[j]·s^z_j(a)`.
    detuning_weight: Vec<f64>,
    /// `(site mask, ½·omega_pattern[j])` for driven sites.
    drive: Vec<(usize, f64)>,
    schedule: RampSchedule,
}

impl Generator {
    fn new(h: &SparseOperator, schedule: &RampSchedule) -> Result<Self> {
        schedule.validate()?;
        let l = schedule.sites();
        if l == 0 || l > crate::spin::MAX_SITES {
            return Err(Error::SpinSystem(format!("unsupported site count {l}")));
        }
        let dim = 1usize << l;
        if h.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: h.dim(),
            });
        }
        if !h.is_real() {
            return Err(Error::SpinSystem("time evolution needs a real static Hamiltonian".into()));
        }
        let herm = h.hermiticity_error();
        if herm > 1e-12 * h.norm_bound().max(1.0) {
            return Err(Error::NotHermitian(herm));
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = vec![0.0; dim];
        for r in 0..dim {
            for (c, v) in h.row(r) {
                if c == r {
                    diag[r] = v.re;
                } else if v.re != 0.0 {
                    cols.push(c);
                    vals.push(v.re);
                }
            }
            row_ptr.push(cols.len());
        }
        let detuning_weight = (0..dim)
            .map(|a| {
                schedule
                    .delta_pattern
                    .iter()
                    .enumerate()
                    .map(|(j, p)| if a >> j & 1 == 1 { 0.5 * p } else { -0.5 * p })
                    .sum()
            })
            .collect();
        let drive = schedule
            .omega_pattern
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != 0.0)
            .map(|(j, p)| (1usize << j, 0.5 * p))
            .collect();
        Ok(Self {
            dim,
            row_ptr,
            cols,
            vals,
            diag,
            detuning_weight,
            drive,
            schedule: schedule.clone(),
        })
    }

    /// Envelope values `(Δ(t), Ω(t))`.
    fn envelopes(&self, t: f64) -> (f64, f64) {
        (self.schedule.delta.value(t), self.schedule.omega.value(t))
    }

    /// Gershgorin bound on the centred spectral half-width at time `t`.
    fn half_width_bound(&self, t: f64) -> f64 {
        let (de, oe) = self.envelopes(t);
        let drive: f64 = self.drive.iter().map(|(_, c)| (c * oe).abs()).sum();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for a in 0..self.dim {
            let d = self.diag[a] + de * self.detuning_weight[a];
            let r: f64 = self.vals[self.row_ptr[a]..self.row_ptr[a + 1]]
                .iter()
                .map(|v| v.abs())
                .sum::<f64>()
                + drive;
            lo = lo.min(d - r);
            hi = hi.max(d + r);
        }
        0.5 * (hi - lo)
    }

    /// Largest half-width bound over knots and a uniform grid.
    fn max_half_width(&self) -> f64 {
        let t_end = self.schedule.duration;
        let n = 2000;
        let grid = (0..=n).map(|k| t_end * k as f64 / n as f64);
        let knots = self
            .schedule
            .omega
            .knots()
            .into_iter()
            .chain(self.schedule.delta.knots())
            .filter(|&k| (0.0..=t_end).contains(&k));
        grid.chain(knots)
            .map(|t| self.half_width_bound(t))
            .fold(0.0, f64::max)
    }

    /// Per-row term lists `(coefficient, source row)` of `H(t)`, diagonal first.
    fn terms(&self, t: f64, starts: &mut Vec<usize>, terms: &mut Vec<(f64, usize)>) {
        let (de, oe) = self.envelopes(t);
        starts.clear();
        terms.clear();
        for a in 0..self.dim {
            starts.push(terms.len());
            terms.push((self.diag[a] + de * self.detuning_weight[a], a));
            for k in self.row_ptr[a]..self.row_ptr[a + 1] {
                terms.push((self.vals[k], self.cols[k]));
            }
            if oe != 0.0 {
                for &(m, p) in &self.drive {
                    terms.push((p * oe, a ^ m));
                }
            }
        }
        starts.push(terms.len());
    }

    /// `y = H(t)·x` on row-major blocks of `width` columns.
    fn apply_rows(&self, t: f64, x: &[f64], y: &mut [f64], width: usize, ws: &mut Workspace) {
        self.terms(t, &mut ws.starts, &mut ws.terms);
        const TILE: usize = 16;
        // Column tiles outermost so the source block stays in L1.
        let mut c0 = 0;
        while c0 + TILE <= width {
            for a in 0..self.dim {
                let mut acc = [0.0f64; TILE];
                for &(c, b) in &ws.terms[ws.starts[a]..ws.starts[a + 1]] {
                    let off = b * width + c0;
                    let src = &x[off..off + TILE];
                    for (s, v) in acc.iter_mut().zip(src) {
                        *s += c * v;
                    }
                }
                y[a * width + c0..a * width + c0 + TILE].copy_from_slice(&acc);
            }
            c0 += TILE;
        }
        for a in 0..self.dim {
            let row = &ws.terms[ws.starts[a]..ws.starts[a + 1]];
            for col in c0..width {
                y[a * width + col] = row.iter().map(|&(c, b)| c * x[b * width + col]).sum();
            }
        }
    }
}

/// Reusable buffers for right-hand-side evaluations.
#[derive(Default)]
struct Workspace {
    starts: Vec<usize>,
    terms: Vec<(f64, usize)>,
    a: Vec<f64>,
}

#[inline]
fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    for (o, v) in y.iter_mut().zip(x) {
        *o += c * v;
    }
}

/// Precomputed dissipator acting on the interleaved density layout.
#[derive(Debug, Clone)]
struct Dissipator {
    /// Elementwise factor on `ρ_ab` from the anticommutator and dephasing.
    damp: Vec<f64>,
    /// `(site mask, κ)` for the jump-in term.
    jumps: Vec<(usize, f64)>,
    decay: DecayDirection,
    active: bool,
}

impl Dissipator {
    fn new(l: usize, noise: &NoiseParams) -> Result<Self> {
        noise.validate(l)?;
        let dim = 1usize << l;
        let active = !noise.is_zero();
        let mut damp = Vec::new();
        if active {
            damp = vec![0.0; dim * dim];
            let excited = |a: usize, j: usize| -> f64 {
                let up = (a >> j & 1) as f64;
                match noise.decay {
                    DecayDirection::Lowering => up,
                    DecayDirection::Raising => 1.0 - up,
                }
            };
            let sz = |a: usize, j: usize| if a >> j & 1 == 1 { 0.5 } else { -0.5 };
            for a in 0..dim {
                for b in 0..dim {
                    let mut f = 0.0;
                    for j in 0..l {
                        f -= 0.5 * noise.kappa[j] * (excited(a, j) + excited(b, j));
                        f += noise.gamma[j] * (sz(a, j) * sz(b, j) - 0.25);
                    }
                    damp[a * dim + b] = f;
                }
            }
        }
        let jumps = (0..l)
            .filter(|&j| noise.kappa[j] > 0.0)
            .map(|j| (1usize << j, noise.kappa[j]))
            .collect();
        Ok(Self {
            damp,
            jumps,
            decay: noise.decay,
            active,
        })
    }

    /// `out += D[ρ]` with row `a` stored as `[Re ρ_a·, Im ρ_a·]`.
    fn add(&self, n: usize, rho: &[f64], out: &mut [f64]) {
        if !self.active {
            return;
        }
        let w = 2 * n;
        for a in 0..n {
            let f = &self.damp[a * n..(a + 1) * n];
            let (o_re, o_im) = out[a * w..(a + 1) * w].split_at_mut(n);
            let (r_re, r_im) = rho[a * w..(a + 1) * w].split_at(n);
            for b in 0..n {
                o_re[b] += f[b] * r_re[b];
                o_im[b] += f[b] * r_im[b];
            }
        }
        for &(m, k) in &self.jumps {
            // Targets have bit m clear (lowering) or set (raising).
            let target_bit = match self.decay {
                DecayDirection::Lowering => 0,
                DecayDirection::Raising => m,
            };
            for a in (0..n).filter(|a| a & m == target_bit) {
                let src = a ^ m;
                for half in 0..2 {
                    let o = &mut out[a * w + half * n..a * w + (half + 1) * n];
                    let r = &rho[src * w + half * n..src * w + (half + 1) * n];
                    for (oc, rc) in o.chunks_exact_mut(2 * m).zip(r.chunks_exact(2 * m)) {
                        if target_bit == 0 {
                            axpy(k, &rc[m..], &mut oc[..m]);
                        } else {
                            axpy(k, &rc[..m], &mut oc[m..]);
                        }
                    }
                }
            }
        }
    }
}

trait Rhs {
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64], ws: &mut Workspace);
}

struct DensityRhs {
    gen: Generator,
    diss: Dissipator,
}

impl Rhs for DensityRhs {
    /// Row `a` of `y` holds `[Re ρ_a·, Im ρ_a·]`.
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64], ws: &mut Workspace) {
        let n = self.gen.dim;
        let w = 2 * n;
        let mut s = std::mem::take(&mut ws.a);
        s.resize(n * w, 0.0);
        self.gen.apply_rows(t, y, &mut s, w, ws);
        // −i[H, ρ] = −i(A − A†) with A = Hρ, using ρ = ρ†.
        for a in 0..n {
            for b in 0..n {
                let (ab, ba) = (a * w + b, b * w + a);
                dy[ab] = s[ab + n] + s[ba + n];
                dy[ab + n] = s[ba] - s[ab];
            }
        }
        self.diss.add(n, y, dy);
        ws.a = s;
    }
}

struct PureRhs {
    gen: Generator,
}

impl Rhs for PureRhs {
    /// `y = [Re ψ, Im ψ]` as one row of width two per basis state.
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64], ws: &mut Workspace) {
        self.gen.apply_rows(t, y, dy, 2, ws);
        for pair in dy.chunks_exact_mut(2) {
            let (re, im) = (pair[0], pair[1]);
            pair[0] = im;
            pair[1] = -re;
        }
    }
}

struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    scratch: Workspace,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; len]),
            tmp: vec![0.0; len],
            scratch: Workspace::default(),
        }
    }

    fn step<R: Rhs>(&mut self, f: &R, t: f64, h: f64, y: &mut [f64]) {
        let [k1, k2, k3, k4] = &mut self.k;
        f.eval(t, y, k1, &mut self.scratch);
        for ((o, a), b) in self.tmp.iter_mut().zip(y.iter()).zip(k1.iter()) {
            *o = a + 0.5 * h * b;
        }
        f.eval(t + 0.5 * h, &self.tmp, k2, &mut self.scratch);
        for ((o, a), b) in self.tmp.iter_mut().zip(y.iter()).zip(k2.iter()) {
            *o = a + 0.5 * h * b;
        }
        f.eval(t + 0.5 * h, &self.tmp, k3, &mut self.scratch);
        for ((o, a), b) in self.tmp.iter_mut().zip(y.iter()).zip(k3.iter()) {
            *o = a + h * b;
        }
        f.eval(t + h, &self.tmp, k4, &mut self.scratch);
        let c = h / 6.0;
        for (i, v) in y.iter_mut().enumerate() {
            *v += c * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Overrides the automatic step; must not exceed it.
    pub dt: Option<f64>,
    /// Trace/positivity violations beyond this abort the run.
    pub abort_tol: f64,
    /// Check positivity at every sample (costly for large L).
    pub check_positivity: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: None,
            abort_tol: ABORT_TOL,
            check_positivity: true,
        }
    }
}

/// Sampled observables along one trajectory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub mean_sz: Vec<f64>,
    pub bz: Vec<f64>,
    pub bx: Vec<f64>,
    pub bzz: Vec<f64>,
    pub trace: Vec<f64>,
    pub purity: Vec<f64>,
    /// Smallest eigenvalue of ρ; NaN when not checked.
    pub min_eigenvalue: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<TrajectorySample> {
        self.sample(self.len().checked_sub(1)?)
    }

    pub fn sample(&self, i: usize) -> Option<TrajectorySample> {
        (i < self.len()).then(|| TrajectorySample {
            t: self.times[i],
            mean_sz: self.mean_sz[i],
            bz: self.bz[i],
            bx: self.bx[i],
            bzz: self.bzz[i],
            trace: self.trace[i],
            purity: self.purity[i],
        })
    }

    fn push(&mut self, t: f64, s: &StateSample) {
        self.times.push(t);
        self.mean_sz.push(s.mean_sz);
        self.bz.push(s.bz);
        self.bx.push(s.bx);
        self.bzz.push(s.bzz);
        self.trace.push(s.trace);
        self.purity.push(s.purity);
        self.min_eigenvalue.push(s.min_eig);
    }

    /// Elementwise mean of trajectories sharing sample times.
    pub fn average(items: &[&Trajectory]) -> Result<Trajectory> {
        let Some(first) = items.first() else {
            return Err(Error::Schedule("no trajectories to average".into()));
        };
        if items.iter().any(|t| t.times != first.times) {
            return Err(Error::Schedule("trajectories sampled at different times".into()));
        }
        let n = items.len() as f64;
        let avg = |f: fn(&Trajectory) -> &Vec<f64>| -> Vec<f64> {
            (0..first.len())
                .map(|i| items.iter().map(|t| f(t)[i]).sum::<f64>() / n)
                .collect()
        };
        Ok(Trajectory {
            times: first.times.clone(),
            mean_sz: avg(|t| &t.mean_sz),
            bz: avg(|t| &t.bz),
            bx: avg(|t| &t.bx),
            bzz: avg(|t| &t.bzz),
            trace: avg(|t| &t.trace),
            purity: avg(|t| &t.purity),
            min_eigenvalue: (0..first.len())
                .map(|i| items.iter().map(|t| t.min_eigenvalue[i]).fold(f64::INFINITY, f64::min))
                .collect(),
            dt: first.dt,
            steps: first.steps,
        })
    }

    /// Columns `t, t_us, mean_Sz, Bz, Bx, Bzz, trace, purity`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut t = Table::new(&["t", "t_us", "mean_Sz", "Bz", "Bx", "Bzz", "trace", "purity"]);
        for i in 0..self.len() {
            t.push(
                [
                    self.times[i],
                    self.times[i] / (2.0 * std::f64::consts::PI),
                    self.mean_sz[i],
                    self.bz[i],
                    self.bx[i],
                    self.bzz[i],
                    self.trace[i],
                    self.purity[i],
                ]
                .iter()
                .map(|&v| num(v))
                .collect(),
            );
        }
        t.write(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub mean_sz: f64,
    pub bz: f64,
    pub bx: f64,
    pub bzz: f64,
    pub trace: f64,
    pub purity: f64,
}

struct StateSample {
    mean_sz: f64,
    bz: f64,
    bx: f64,
    bzz: f64,
    trace: f64,
    purity: f64,
    min_eig: f64,
}

fn measure<S: crate::observables::SpinExpectation>(state: &S, l: usize) -> (f64, f64, f64, f64) {
    let m = magnetization(state).mean;
    if l < 4 {
        return (m, f64::NAN, f64::NAN, f64::NAN);
    }
    let cb = central_bond(state).expect("L ≥ 4");
    (m, cb.bz, cb.bx, cb.bzz)
}

fn to_density(basis: &Arc<Basis>, y: &[f64]) -> DensityMatrix {
    let n = basis.dim();
    let m = DMatrix::from_fn(n, n, |a, b| Complex64::new(y[2 * n * a + b], y[2 * n * a + n + b]));
    DensityMatrix::new(basis.clone(), m).expect("dimension checked")
}

fn to_pure(basis: &Arc<Basis>, y: &[f64]) -> Result<PureState> {
    let n = basis.dim();
    let amps = (0..n).map(|i| Complex64::new(y[2 * i], y[2 * i + 1])).collect();
    PureState::new(basis.clone(), amps)
}

/// Largest step allowed for this Hamiltonian, schedule and noise.
pub fn max_step(h_static: &SparseOperator, schedule: &RampSchedule, noise: &NoiseParams) -> Result<f64> {
    let gen = Generator::new(h_static, schedule)?;
    Ok(step_limit(&gen, noise))
}

fn step_limit(gen: &Generator, noise: &NoiseParams) -> f64 {
    let by_norm = 1.0 / (STEPS_PER_NORM * gen.max_half_width().max(1e-300));
    let rate = noise.max_rate();
    if rate > 0.0 {
        by_norm.min(1.0 / (STEPS_PER_NORM * rate))
    } else {
        by_norm
    }
}

fn check_times(times: &[f64], duration: f64) -> Result<()> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Schedule("sample times must be sorted".into()));
    }
    if times.iter().any(|&t| !(0.0..=duration * (1.0 + 1e-12)).contains(&t)) {
        return Err(Error::Schedule("sample time outside [0, T]".into()));
    }
    Ok(())
}

/// `n` evenly spaced times on `[0, T]`.
pub fn uniform_times(duration: f64, n: usize) -> Vec<f64> {
    crate::coupling::linspace(0.0, duration, n.max(2))
}

/// Fixed-step integration; `record` is called at each sample time.
fn integrate<R: Rhs>(
    f: &R,
    y: &mut [f64],
    duration: f64,
    dt_max: f64,
    opts: &EvolveOptions,
    times: &[f64],
    mut record: impl FnMut(f64, &[f64]) -> Result<()>,
    mut monitor: impl FnMut(f64, &[f64]) -> Result<()>,
) -> Result<(f64, usize)> {
    let dt_cap = match opts.dt {
        Some(d) if d > 0.0 && d <= dt_max * (1.0 + 1e-12) => d,
        Some(d) => {
            return Err(Error::Schedule(format!(
                "requested step {d:.3e} exceeds the stability limit {dt_max:.3e}"
            )))
        }
        None => dt_max,
    };
    let steps = (duration / dt_cap).ceil().max(1.0) as usize;
    let h = duration / steps as f64;
    let mut rk = Rk4::new(y.len());
    let mut side = Rk4::new(y.len());
    let mut probe = vec![0.0; y.len()];
    let mut next = 0;
    for k in 0..=steps {
        let t = k as f64 * h;
        let t_next = if k == steps { f64::INFINITY } else { t + h };
        while next < times.len() && times[next] < t_next {
            let ts = times[next].min(duration);
            if ts - t <= 1e-12 * duration {
                record(ts, y)?;
            } else {
                probe.copy_from_slice(y);
                side.step(f, t, ts - t, &mut probe);
                record(ts, &probe)?;
            }
            next += 1;
        }
        if k == steps {
            break;
        }
        rk.step(f, t, h, y);
        monitor(t + h, y)?;
    }
    Ok((h, steps))
}

/// Density-matrix evolution under the Lindblad equation.
///
/// Returns the sampled trajectory and the state at `schedule.duration`.
pub fn evolve(
    rho0: &DensityMatrix,
    h_static: &SparseOperator,
    schedule: &RampSchedule,
    noise: &NoiseParams,
    sample_times: &[f64],
    opts: &EvolveOptions,
) -> Result<(Trajectory, DensityMatrix)> {
    let l = schedule.sites();
    if l > DENSITY_SITE_CAP {
        return Err(Error::DimensionOverflow {
            dim: 1 << l,
            cap: 1 << DENSITY_SITE_CAP,
        });
    }
    let basis = rho0.basis().clone();
    if basis.sector().is_some() || basis.sites() != l {
        return Err(Error::SpinSystem("initial state must live on the full space of the schedule".into()));
    }
    let gen = Generator::new(h_static, schedule)?;
    let diss = Dissipator::new(l, noise)?;
    let dt_max = step_limit(&gen, noise);
    check_times(sample_times, schedule.duration)?;
    let n = gen.dim;
    let rho = rho0.matrix();
    if rho0.hermiticity_error() > opts.abort_tol {
        return Err(Error::InvariantViolation {
            t: 0.0,
            what: "initial state is not Hermitian".into(),
        });
    }
    let mut y = vec![0.0; 2 * n * n];
    for a in 0..n {
        for b in 0..n {
            y[2 * n * a + b] = rho[(a, b)].re;
            y[2 * n * a + n + b] = rho[(a, b)].im;
        }
    }
    let f = DensityRhs { gen, diss };
    let mut traj = Trajectory::default();
    let tol = opts.abort_tol;
    let record = |t: f64, y: &[f64]| -> Result<()> {
        let d = to_density(&basis, y);
        let tr = d.trace().re;
        let purity = y.iter().map(|v| v * v).sum::<f64>();
        let min_eig = if opts.check_positivity {
            d.min_eigenvalue()
        } else {
            f64::NAN
        };
        if (tr - 1.0).abs() > tol {
            return Err(Error::InvariantViolation {
                t,
                what: format!("trace {tr:.12}"),
            });
        }
        if min_eig < -tol {
            return Err(Error::InvariantViolation {
                t,
                what: format!("minimum eigenvalue {min_eig:.3e}"),
            });
        }
        let (mean_sz, bz, bx, bzz) = measure(&d, l);
        traj.push(
            t,
            &StateSample {
                mean_sz,
                bz,
                bx,
                bzz,
                trace: tr,
                purity,
                min_eig,
            },
        );
        Ok(())
    };
    let monitor = |t: f64, y: &[f64]| -> Result<()> {
        let tr: f64 = (0..n).map(|a| y[2 * n * a + a]).sum();
        if !((tr - 1.0).abs() <= tol) {
            return Err(Error::InvariantViolation {
                t,
                what: format!("trace {tr:.12}"),
            });
        }
        Ok(())
    };
    let (h, steps) = integrate(&f, &mut y, schedule.duration, dt_max, opts, sample_times, record, monitor)?;
    traj.dt = h;
    traj.steps = steps;
    Ok((traj, to_density(&basis, &y)))
}

/// Noiseless Schrödinger evolution with the same integrator.
pub fn evolve_pure(
    psi0: &PureState,
    h_static: &SparseOperator,
    schedule: &RampSchedule,
    sample_times: &[f64],
    opts: &EvolveOptions,
) -> Result<(Trajectory, PureState)> {
    let l = schedule.sites();
    let basis = psi0.basis().clone();
    if basis.sector().is_some() || basis.sites() != l {
        return Err(Error::SpinSystem("initial state must live on the full space of the schedule".into()));
    }
    let gen = Generator::new(h_static, schedule)?;
    let dt_max = step_limit(&gen, &NoiseParams::none(l));
    check_times(sample_times, schedule.duration)?;
    let mut y: Vec<f64> = psi0
        .amplitudes()
        .iter()
        .flat_map(|a| [a.re, a.im])
        .collect();
    let f = PureRhs { gen };
    let mut traj = Trajectory::default();
    let tol = opts.abort_tol;
    let record = |t: f64, y: &[f64]| -> Result<()> {
        let norm2: f64 = y.iter().map(|v| v * v).sum();
        if (norm2 - 1.0).abs() > tol {
            return Err(Error::InvariantViolation {
                t,
                what: format!("norm² {norm2:.12}"),
            });
        }
        let psi = to_pure(&basis, y)?;
        let (mean_sz, bz, bx, bzz) = measure(&psi, l);
        traj.push(
            t,
            &StateSample {
                mean_sz,
                bz,
                bx,
                bzz,
                trace: norm2,
                purity: 1.0,
                min_eig: 0.0,
            },
        );
        Ok(())
    };
    let (h, steps) = integrate(&f, &mut y, schedule.duration, dt_max, opts, sample_times, record, |_, _| Ok(()))?;
    traj.dt = h;
    traj.steps = steps;
    Ok((traj, to_pure(&basis, &y)?))
}

/// Ladder ramp with disorder and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampConfig {
    pub l: usize,
    pub j1: f64,
    pub j2: f64,
    pub schedule: RampSchedule,
    pub noise: NoiseParams,
    pub disorder: DisorderSpec,
    pub samples: usize,
    pub options: EvolveOptions,
}

impl RampConfig {
    /// Tuned ramp on a clean ladder.
    pub fn new(l: usize, j1: f64, j2: f64, noise: NoiseParams) -> Result<Self> {
        Ok(Self {
            l,
            j1,
            j2,
            schedule: tuned_ramp(l, j1)?,
            noise,
            disorder: DisorderSpec::clean(),
            samples: 101,
            options: EvolveOptions::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 || self.l > DENSITY_SITE_CAP {
            return Err(Error::config("l", format!("must lie in 2..={DENSITY_SITE_CAP}")));
        }
        if self.schedule.sites() != self.l {
            return Err(Error::config("schedule", "pattern length differs from l"));
        }
        if !(self.j1.is_finite() && self.j2.is_finite()) {
            return Err(Error::config("j1", "couplings must be finite"));
        }
        if self.samples < 2 {
            return Err(Error::config("samples", "must be ≥ 2"));
        }
        self.schedule.validate()?;
        self.noise.validate(self.l)?;
        self.disorder.validate()
    }

    fn hamiltonian(&self, fields: &[f64]) -> Result<SparseOperator> {
        Ok(build_ladder_hamiltonian(self.l, self.j1, self.j2, fields, None)?.0)
    }

    /// Single realization; density matrix when `noisy`, otherwise a pure state.
    pub fn run_realization(&self, realization: u64, noisy: bool) -> Result<Trajectory> {
        let fields = sample_fields(&self.disorder, self.l, realization);
        let h = self.hamiltonian(&fields)?;
        let basis = Arc::new(Basis::full(self.l)?);
        let psi0 = PureState::all_down(basis)?;
        let times = uniform_times(self.schedule.duration, self.samples);
        if noisy {
            let rho0 = DensityMatrix::from_pure(&psi0);
            evolve(&rho0, &h, &self.schedule, &self.noise, &times, &self.options).map(|r| r.0)
        } else {
            evolve_pure(&psi0, &h, &self.schedule, &times, &self.options).map(|r| r.0)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub mean: Trajectory,
    pub realizations: Vec<Option<Trajectory>>,
    pub failures: Vec<(u64, String)>,
}

impl EnsembleResult {
    pub fn n_ok(&self) -> usize {
        self.realizations.iter().filter(|r| r.is_some()).count()
    }
}

/// Parallel map over realizations, averaged in realization order.
pub fn ramp_ensemble(cfg: &RampConfig, noisy: bool) -> Result<EnsembleResult> {
    cfg.validate()?;
    let runs: Vec<Result<Trajectory>> = (0..cfg.disorder.realizations as u64)
        .into_par_iter()
        .map(|k| cfg.run_realization(k, noisy))
        .collect();
    let mut failures = Vec::new();
    let realizations: Vec<Option<Trajectory>> = runs
        .into_iter()
        .enumerate()
        .map(|(k, r)| match r {
            Ok(t) => Some(t),
            Err(e) => {
                failures.push((k as u64, e.to_string()));
                None
            }
        })
        .collect();
    let ok: Vec<&Trajectory> = realizations.iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::Schedule(format!(
            "every realization failed; first error: {}",
            failures.first().map(|f| f.1.as_str()).unwrap_or("none")
        )));
    }
    let mean = Trajectory::average(&ok)?;
    Ok(EnsembleResult {
        mean,
        realizations,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_spin(noise: NoiseParams, psi: [Complex64; 2], t: f64) -> Trajectory {
        let basis = Arc::new(Basis::full(1).unwrap());
        let rho0 = DensityMatrix::from_pure(&PureState::new(basis, psi.to_vec()).unwrap());
        let h = SparseOperator::zeros(2);
        let sched = RampSchedule::idle(1, t).unwrap();
        evolve(&rho0, &h, &sched, &noise, &uniform_times(t, 11), &EvolveOptions::default())
            .unwrap()
            .0
    }

    #[test]
    fn envelope_values() {
        let s = default_ramp(6, 10.0, 2.0, 5.0).unwrap();
        assert_eq!(s.omega.value(0.0), 0.0);
        assert_eq!(s.omega.value(10.0), 0.0);
        assert!((s.omega.value(5.5) - 2.0).abs() < 1e-15);
        assert!((s.omega.value(2.5) - 1.0).abs() < 1e-15);
        assert_eq!(s.delta.value(0.0), 5.0);
        assert_eq!(s.delta.value(4.0), 0.0);
        assert_eq!(s.delta.value(7.0), 0.0);
        assert_eq!(s.omega_at(5.5), vec![4.0, 0.0, 4.0, 2.0, 4.0, 0.0]);
    }

    #[test]
    fn schedule_contract_enforced() {
        assert!(default_ramp(6, 0.0, 1.0, 1.0).is_err());
        assert!(default_ramp(5, 1.0, 1.0, 1.0).is_err());
        let mut s = default_ramp(4, 1.0, 1.0, 1.0).unwrap();
        s.delta.segments[0].t1 = 0.8;
        assert!(s.validate().is_err());
        let mut s = default_ramp(4, 1.0, 1.0, 1.0).unwrap();
        s.omega.segments[1].v1 = 0.3;
        assert!(s.validate().is_err());
    }

    #[test]
    fn decay_closed_form() {
        let k = 0.7;
        let up = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let tr = single_spin(NoiseParams::uniform(1, k, 0.0), up, 2.0);
        for (t, m) in tr.times.iter().zip(&tr.mean_sz) {
            assert!((m - ((-k * t).exp() - 0.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn raising_pumps_up() {
        let down = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let noise = NoiseParams::uniform(1, 0.5, 0.0).with_decay(DecayDirection::Raising);
        let tr = single_spin(noise, down, 2.0);
        let m = tr.last().unwrap().mean_sz;
        assert!((m - (0.5 - (-1.0f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn dephasing_closed_form() {
        let g = 0.9;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = [Complex64::new(s, 0.0), Complex64::new(s, 0.0)];
        let basis = Arc::new(Basis::full(1).unwrap());
        let rho0 = DensityMatrix::from_pure(&PureState::new(basis, plus.to_vec()).unwrap());
        let sched = RampSchedule::idle(1, 3.0).unwrap();
        let (_, rho) = evolve(
            &rho0,
            &SparseOperator::zeros(2),
            &sched,
            &NoiseParams::uniform(1, 0.0, g),
            &[3.0],
            &EvolveOptions::default(),
        )
        .unwrap();
        let coh = rho.matrix()[(0, 1)].norm();
        assert!((coh - 0.5 * (-g * 3.0 / 2.0).exp()).abs() < 1e-9);
    }

    #[test]
    fn pure_and_density_agree_without_noise() {
        let sched = default_ramp(4, 0.5, 2.0, 6.0).unwrap();
        let (h, _) = build_ladder_hamiltonian(4, 4.0, 2.0, &[0.3, -0.2, 0.1, 0.0], None).unwrap();
        let basis = Arc::new(Basis::full(4).unwrap());
        let psi0 = PureState::all_down(basis).unwrap();
        let times = uniform_times(0.5, 6);
        let opts = EvolveOptions::default();
        let (tp, _) = evolve_pure(&psi0, &h, &sched, &times, &opts).unwrap();
        let (td, _) = evolve(
            &DensityMatrix::from_pure(&psi0),
            &h,
            &sched,
            &NoiseParams::none(4),
            &times,
            &opts,
        )
        .unwrap();
        for i in 0..times.len() {
            assert!((tp.bz[i] - td.bz[i]).abs() < 1e-10);
            assert!((tp.bx[i] - td.bx[i]).abs() < 1e-10);
            assert!((td.purity[i] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn oversized_step_rejected() {
        let sched = default_ramp(4, 1.0, 1.0, 1.0).unwrap();
        let (h, _) = build_ladder_hamiltonian(4, 1.0, 0.5, &[0.0; 4], None).unwrap();
        let dt = max_step(&h, &sched, &NoiseParams::none(4)).unwrap();
        let psi0 = PureState::all_down(Arc::new(Basis::full(4).unwrap())).unwrap();
        let opts = EvolveOptions {
            dt: Some(2.0 * dt),
            ..Default::default()
        };
        assert!(evolve_pure(&psi0, &h, &sched, &[1.0], &opts).is_err());
    }
}
