//! Analytic qubit-qubit coupling: direct dipole-dipole exchange plus the
//! exchange mediated by the fundamental cavity mode.
//!
//! Units: couplings, detunings and `g` in 2π·MHz, distances in mm.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pair_geometry, PairGeometry, QubitGeometry, QubitSite};

/// Spatial profile of the qubit-cavity coupling along the cavity axis (x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CavityProfile {
    Uniform,
    /// `g(x) = g_max · cos(mode · π · x / length − phase)`.
    StandingWave {
        length_mm: f64,
        mode: u32,
        phase: f64,
    },
}

impl CavityProfile {
    pub fn shape(&self, x: f64) -> f64 {
        match *self {
            Self::Uniform => 1.0,
            Self::StandingWave {
                length_mm,
                mode,
                phase,
            } => (mode as f64 * PI * x / length_mm - phase).cos(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingModel {
    /// Dipolar scale, 2π·MHz·mm³ per unit `d_m²`.
    pub j0: f64,
    /// Finite-size offset of the distance, mm.
    pub r_m: f64,
    /// Peak qubit-cavity coupling, 2π·MHz.
    pub g_max: f64,
    /// Qubit-cavity detuning, 2π·MHz.
    pub delta: f64,
    pub cavity: CavityProfile,
    pub cavity_enabled: bool,
}

impl CouplingModel {
    /// Reference parameters: about −2π×100 MHz for side-by-side qubits at
    /// 1 mm, a detuning of 2π×1.5 GHz, and cancellation of the direct and
    /// cavity-mediated terms near 3.5 mm.
    pub fn reference() -> Self {
        Self {
            j0: 42.0,
            r_m: 0.25,
            g_max: 60.0,
            delta: 1500.0,
            cavity: CavityProfile::Uniform,
            cavity_enabled: true,
        }
    }

    pub fn without_cavity(mut self) -> Self {
        self.cavity_enabled = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.j0.is_finite() || !self.g_max.is_finite() || !self.delta.is_finite() {
            return Err(Error::CouplingModel("non-finite parameter".into()));
        }
        if !(self.r_m >= 0.0) {
            return Err(Error::CouplingModel(format!(
                "r_m must be non-negative, got {}",
                self.r_m
            )));
        }
        if self.cavity_enabled && self.delta == 0.0 {
            return Err(Error::CouplingModel(
                "detuning must be non-zero when the cavity is enabled".into(),
            ));
        }
        if let CavityProfile::StandingWave { length_mm, .. } = self.cavity {
            if !(length_mm > 0.0) {
                return Err(Error::CouplingModel("cavity length must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn g_at(&self, site: &QubitSite) -> f64 {
        self.g_max * self.cavity.shape(site.position[0])
    }

    /// Cavity-mediated part for two sites (zero when the cavity is off).
    pub fn cavity_term(&self, a: &QubitSite, b: &QubitSite) -> f64 {
        if !self.cavity_enabled {
            return 0.0;
        }
        self.g_at(a) * self.g_at(b) * a.antenna_length * b.antenna_length / (2.0 * self.delta)
            * a.cavity_angle.sin()
            * b.cavity_angle.sin()
    }

    /// Direct dipolar part for a given pair geometry.
    pub fn direct_term(&self, pg: &PairGeometry, d_a: f64, d_b: f64) -> Result<f64> {
        if pg.r <= self.r_m {
            return Err(Error::InsideOffset {
                r: pg.r,
                r_m: self.r_m,
            });
        }
        Ok(-self.j0 * d_a * d_b * pg.angular_factor() / (pg.r - self.r_m).powi(3))
    }
}

pub fn dipole_coupling(
    pg: &PairGeometry,
    a: &QubitSite,
    b: &QubitSite,
    m: &CouplingModel,
) -> Result<f64> {
    let direct = m.direct_term(pg, a.antenna_length, b.antenna_length)?;
    Ok(direct + m.cavity_term(a, b))
}

/// Convenience wrapper computing the pair geometry first.
pub fn site_coupling(a: &QubitSite, b: &QubitSite, m: &CouplingModel) -> Result<f64> {
    let pg = pair_geometry(a, b)?;
    dipole_coupling(&pg, a, b, m)
}

/// Symmetric coupling matrix with zero diagonal, 2π·MHz.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix(DMatrix<f64>);

impl CouplingMatrix {
    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    /// Nearest- and next-nearest-neighbour couplings on an open chain.
    pub fn ladder(n: usize, j1: f64, j2: f64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            if i + 1 < n {
                m[(i, i + 1)] = j1;
                m[(i + 1, i)] = j1;
            }
            if i + 2 < n {
                m[(i, i + 2)] = j2;
                m[(i + 2, i)] = j2;
            }
        }
        Self(m)
    }

    /// Builds from an arbitrary square matrix, checking symmetry and the zero diagonal.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::CouplingModel("coupling matrix must be square".into()));
        }
        let n = m.nrows();
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return Err(Error::CouplingModel(format!("non-zero diagonal at {i}")));
            }
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * (1.0 + m[(i, j)].abs()) {
                    return Err(Error::CouplingModel(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Pairs `(i, j, J_ij)` with `i < j` and non-zero coupling.
    pub fn bonds(&self) -> Vec<(usize, usize, f64)> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.0[(i, j)];
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }
}

/// Evaluates every pair. `cutoff` (mm) drops pairs farther apart, which is
/// the effective-local approximation for 1D arrangements.
pub fn coupling_matrix(
    geo: &QubitGeometry,
    m: &CouplingModel,
    cutoff: Option<f64>,
) -> Result<CouplingMatrix> {
    m.validate()?;
    let n = geo.len();
    let sites = geo.sites();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let pg = pair_geometry(&sites[i], &sites[j])?;
            if cutoff.is_some_and(|c| pg.r > c) {
                continue;
            }
            let v = dipole_coupling(&pg, &sites[i], &sites[j], m)?;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(CouplingMatrix(out))
}

/// One sampled coupling value between two sites of equal antenna length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSample {
    pub a: QubitSite,
    pub b: QubitSite,
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DipoleFit {
    pub j0: f64,
    /// Fitted `r_m` per antenna length, keyed by the length.
    pub r_m: Vec<(f64, f64)>,
    pub rms_residual: f64,
    /// `‖residual‖ / ‖data‖`.
    pub relative_residual: f64,
    pub iterations: usize,
}

impl DipoleFit {
    pub fn r_m_for(&self, antenna_length: f64) -> Option<f64> {
        self.r_m
            .iter()
            .find(|(d, _)| *d == antenna_length)
            .map(|&(_, r)| r)
    }
}

struct FitRow {
    group: usize,
    r: f64,
    /// `−d_a d_b · angular factor`
    shape: f64,
    cavity: f64,
    target: f64,
}

/// Least-squares fit of `J0` (shared) and `r_m` (one per antenna length),
/// holding the cavity parameters of `fixed` constant.
pub fn fit_dipole_model(samples: &[FitSample], fixed: &CouplingModel) -> Result<DipoleFit> {
    fixed.validate()?;
    if samples.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    let mut groups: BTreeMap<u64, usize> = BTreeMap::new();
    let mut lengths = Vec::new();
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let pg = pair_geometry(&s.a, &s.b)?;
        let key = s.a.antenna_length.to_bits();
        let next = groups.len();
        let group = *groups.entry(key).or_insert_with(|| {
            lengths.push(s.a.antenna_length);
            next
        });
        rows.push(FitRow {
            group,
            r: pg.r,
            shape: -s.a.antenna_length * s.b.antenna_length * pg.angular_factor(),
            cavity: fixed.cavity_term(&s.a, &s.b),
            target: s.coupling,
        });
    }
    let n_groups = lengths.len();
    let mut min_r = vec![f64::INFINITY; n_groups];
    for g in 0..n_groups {
        let rs: Vec<f64> = rows.iter().filter(|w| w.group == g).map(|w| w.r).collect();
        let lo = rs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = rs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= 1e-9 * hi.abs().max(1.0) {
            return Err(Error::DegenerateFit(format!(
                "antenna length {} has no spread in distance",
                lengths[g]
            )));
        }
        min_r[g] = lo;
    }
    let n_par = 1 + n_groups;
    if rows.len() < n_par + 1 {
        return Err(Error::DegenerateFit(format!(
            "{} samples for {} parameters",
            rows.len(),
            n_par
        )));
    }

    let model = |p: &[f64], w: &FitRow| w.cavity + p[0] * w.shape / (w.r - p[1 + w.group]).powi(3);
    let residuals = |p: &[f64]| -> DVector<f64> {
        DVector::from_iterator(rows.len(), rows.iter().map(|w| model(p, w) - w.target))
    };
    let jacobian = |p: &[f64]| -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(rows.len(), n_par);
        for (i, w) in rows.iter().enumerate() {
            let x = w.r - p[1 + w.group];
            jac[(i, 0)] = w.shape / x.powi(3);
            jac[(i, 1 + w.group)] = 3.0 * p[0] * w.shape / x.powi(4);
        }
        jac
    };

    // J0 enters linearly: start from its least-squares value at r_m = 0.
    let mut p = vec![0.0; n_par];
    {
        let (mut num, mut den) = (0.0, 0.0);
        for w in &rows {
            let basis = w.shape / w.r.powi(3);
            num += basis * (w.target - w.cavity);
            den += basis * basis;
        }
        if den == 0.0 {
            return Err(Error::DegenerateFit("all angular factors vanish".into()));
        }
        p[0] = num / den;
    }

    let data_norm = rows.iter().map(|w| w.target * w.target).sum::<f64>().sqrt();
    let mut res = residuals(&p);
    let mut cost = res.norm_squared();
    let mut lambda = 1e-3;
    let max_iter = 500;
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..max_iter {
        iterations = it + 1;
        let jac = jacobian(&p);
        // Rank check on column-normalized Jacobian.
        let mut scaled = jac.clone();
        for mut c in scaled.column_iter_mut() {
            let n = c.norm();
            if n > 0.0 {
                c /= n;
            }
        }
        let sv = scaled.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > 1e-10 * smax) {
            return Err(Error::DegenerateFit("singular normal equations".into()));
        }
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &res;
        if cost <= (1e-28 * data_norm * data_norm).max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        let mut accepted = false;
        let mut step_small = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..n_par {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&grad));
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let feasible = (0..n_groups).all(|g| trial[1 + g] < min_r[g] && trial[1 + g] >= 0.0);
            if !feasible {
                lambda *= 10.0;
                continue;
            }
            let r_trial = residuals(&trial);
            let c_trial = r_trial.norm_squared();
            if c_trial <= cost {
                let rel_step = delta
                    .iter()
                    .zip(p.iter())
                    .map(|(d, v)| d.abs() / v.abs().max(1e-12))
                    .fold(0.0, f64::max);
                step_small = rel_step < 1e-15 || (cost - c_trial) <= 1e-30 * cost;
                p = trial;
                res = r_trial;
                cost = c_trial;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted || step_small {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FitNotConverged(max_iter));
    }
    let rms = (cost / rows.len() as f64).sqrt();
    Ok(DipoleFit {
        j0: p[0],
        r_m: lengths
            .iter()
            .enumerate()
            .map(|(g, &d)| (d, p[1 + g]))
            .collect(),
        rms_residual: rms,
        relative_residual: if data_norm > 0.0 {
            cost.sqrt() / data_norm
        } else {
            0.0
        },
        iterations,
    })
}

/// Relative orientation of a pair used by [`zero_coupling_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOrientation {
    pub theta1: f64,
    pub theta2: f64,
    pub theta: f64,
    pub phi: [f64; 2],
    pub d: [f64; 2],
}

impl PairOrientation {
    /// Parallel side-by-side qubits of unit antenna length, aligned with the cavity field.
    pub fn side_by_side() -> Self {
        Self {
            theta1: PI / 2.0,
            theta2: PI / 2.0,
            theta: 0.0,
            phi: [PI / 2.0; 2],
            d: [1.0; 2],
        }
    }

    fn coupling_at(&self, m: &CouplingModel, r: f64) -> f64 {
        let pg = PairGeometry {
            r,
            theta1: self.theta1,
            theta2: self.theta2,
            theta: self.theta,
        };
        let direct = -m.j0 * self.d[0] * self.d[1] * pg.angular_factor() / (r - m.r_m).powi(3);
        let cavity = if m.cavity_enabled {
            m.g_max * m.g_max * self.d[0] * self.d[1] / (2.0 * m.delta)
                * self.phi[0].sin()
                * self.phi[1].sin()
        } else {
            0.0
        };
        direct + cavity
    }
}

/// Distance in `(r_m, r_max]` where the direct and cavity-mediated terms
/// cancel, located by bisection to 1e−6 mm. The cavity term is evaluated
/// at `g_max` for both qubits. `None` when `J(r)` keeps its sign.
pub fn zero_coupling_distance(
    m: &CouplingModel,
    orientation: &PairOrientation,
    r_max: f64,
) -> Result<Option<f64>> {
    m.validate()?;
    if !m.cavity_enabled || r_max <= m.r_m {
        return Ok(None);
    }
    let f = |r: f64| orientation.coupling_at(m, r);
    // Geometric grid resolves the steep 1/(r − r_m)³ region near r_m.
    let n = 4000;
    let lo = m.r_m + 1e-6 * (r_max - m.r_m).max(1e-3);
    let ratio = ((r_max - m.r_m) / (lo - m.r_m)).powf(1.0 / n as f64);
    let mut prev_r = lo;
    let mut prev_f = f(lo);
    for k in 1..=n {
        let r = if k == n {
            r_max
        } else {
            m.r_m + (lo - m.r_m) * ratio.powi(k)
        };
        let fr = f(r);
        if fr == 0.0 {
            return Ok(Some(r));
        }
        if prev_f != 0.0 && prev_f.signum() != fr.signum() {
            let (mut a, mut b) = (prev_r, r);
            let mut fa = prev_f;
            while b - a > 1e-7 {
                let mid = 0.5 * (a + b);
                let fm = f(mid);
                if fm == 0.0 {
                    return Ok(Some(mid));
                }
                if fm.signum() == fa.signum() {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            return Ok(Some(0.5 * (a + b)));
        }
        prev_r = r;
        prev_f = fr;
    }
    Ok(None)
}

/// Rectangular sampling grid, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl MapGrid {
    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.nx)
    }

    pub fn ys(&self) -> Vec<f64> {
        linspace(self.y_min, self.y_max, self.ny)
    }

    pub fn cell(&self) -> (f64, f64) {
        (
            (self.x_max - self.x_min) / (self.nx.max(2) - 1) as f64,
            (self.y_max - self.y_min) / (self.ny.max(2) - 1) as f64,
        )
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Scalar field sampled on a grid, `None` inside the exclusion disk.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMap {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major: `values[iy * nx + ix]`.
    pub values: Vec<Option<f64>>,
    pub contour: Vec<[f64; 2]>,
}

impl CouplingMap {
    pub fn at(&self, ix: usize, iy: usize) -> Option<f64> {
        self.values[iy * self.xs.len() + ix]
    }

    /// Builds a map from a per-point evaluator and extracts the zero contour.
    pub fn from_fn<F>(grid: &MapGrid, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<Option<f64>> + Sync,
    {
        let xs = grid.xs();
        let ys = grid.ys();
        let rows: Vec<Vec<Option<f64>>> = ys
            .par_iter()
            .map(|&y| xs.iter().map(|&x| f(x, y)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<Option<f64>> = rows.into_iter().flatten().collect();
        if values.iter().all(Option::is_none) {
            return Err(Error::EmptyGrid);
        }
        let contour = zero_contour(&xs, &ys, &values);
        Ok(Self {
            xs,
            ys,
            values,
            contour,
        })
    }
}

/// Zero crossings along every grid edge whose two end values differ in
/// sign, located by linear interpolation.
pub fn zero_contour(xs: &[f64], ys: &[f64], values: &[Option<f64>]) -> Vec<[f64; 2]> {
    let nx = xs.len();
    let mut pts = Vec::new();
    let crossing = |a: f64, b: f64| -> Option<f64> {
        if a == 0.0 {
            Some(0.0)
        } else if a.signum() != b.signum() && b != 0.0 {
            Some(a / (a - b))
        } else {
            None
        }
    };
    for iy in 0..ys.len() {
        for ix in 0..nx {
            let Some(v) = values[iy * nx + ix] else {
                continue;
            };
            if ix + 1 < nx {
                if let Some(w) = values[iy * nx + ix + 1] {
                    if let Some(t) = crossing(v, w) {
                        pts.push([xs[ix] + t * (xs[ix + 1] - xs[ix]), ys[iy]]);
                    }
                }
            }
            if iy + 1 < ys.len() {
                if let Some(w) = values[(iy + 1) * nx + ix] {
                    if let Some(t) = crossing(v, w) {
                        // a == 0 exactly is recorded once, on the x edge
                        if v != 0.0 {
                            pts.push([xs[ix], ys[iy] + t * (ys[iy + 1] - ys[iy])]);
                        }
                    }
                }
            }
        }
    }
    pts
}

/// Coupling field `J(x, y)` felt by a copy of `fixed` placed at `(x, y)`.
/// Points closer than `exclusion_radius` (or `r_m`) are masked.
pub fn coupling_map(
    fixed: &QubitSite,
    grid: &MapGrid,
    m: &CouplingModel,
    exclusion_radius: f64,
) -> Result<CouplingMap> {
    m.validate()?;
    let radius = exclusion_radius.max(m.r_m);
    CouplingMap::from_fn(grid, |x, y| {
        let moving = QubitSite { position: [x, y], ..*fixed };
        if fixed.distance(&moving) <= radius {
            return Ok(None);
        }
        site_coupling(fixed, &moving, m).map(Some)
    })
}

/// Number of sign changes in a sampled sequence, exact zeros skipped.
pub fn cut_sign_changes(values: &[f64]) -> usize {
    values
        .windows(2)
        .filter(|w| w[0] != 0.0 && w[1] != 0.0 && w[0].signum() != w[1].signum())
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, LatticeKind, OrientationPattern};
    use approx::assert_relative_eq;

    fn site(x: f64, y: f64, a: f64) -> QubitSite {
        QubitSite::at(x, y, a).unwrap()
    }

    #[test]
    fn side_by_side_and_collinear() {
        let m = CouplingModel::reference().without_cavity();
        let r: f64 = 1.3;
        let x = (r - m.r_m).powi(3);
        let a = site(0.0, 0.0, PI / 2.0);
        let b = site(r, 0.0, PI / 2.0);
        assert_relative_eq!(site_coupling(&a, &b, &m).unwrap(), -m.j0 / x, epsilon = 1e-12);
        let a = site(0.0, 0.0, 0.0);
        let b = site(r, 0.0, 0.0);
        assert_relative_eq!(
            site_coupling(&a, &b, &m).unwrap(),
            2.0 * m.j0 / x,
            epsilon = 1e-12
        );
    }

    #[test]
    fn rejects_inside_offset() {
        let m = CouplingModel::reference();
        let a = site(0.0, 0.0, 0.0);
        let b = site(0.2, 0.0, 0.0);
        assert!(matches!(
            site_coupling(&a, &b, &m),
            Err(Error::InsideOffset { .. })
        ));
        let mut bad = m;
        bad.delta = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn power_law_without_cavity() {
        let m = CouplingModel::reference().without_cavity();
        let a = site(0.0, 0.0, 0.4);
        let dir = 0.9f64;
        let reference = {
            let b = site(dir.cos(), dir.sin(), 1.1);
            site_coupling(&a, &b, &m).unwrap() * (1.0 - m.r_m).powi(3)
        };
        for r in [0.5, 1.7, 3.0, 9.0] {
            let b = site(r * dir.cos(), r * dir.sin(), 1.1);
            let v = site_coupling(&a, &b, &m).unwrap() * (r - m.r_m).powi(3);
            assert_relative_eq!(v, reference, epsilon = 1e-12);
        }
    }

    #[test]
    fn matrix_symmetric_zero_diagonal() {
        let g = build_geometry(
            LatticeKind::TriangularLadder,
            6,
            1.0,
            &OrientationPattern::Parallel(PI / 2.0),
        )
        .unwrap();
        let jm = coupling_matrix(&g, &CouplingModel::reference(), None).unwrap();
        for i in 0..6 {
            assert_eq!(jm.get(i, i), 0.0);
            for j in 0..6 {
                assert_eq!(jm.get(i, j), jm.get(j, i));
            }
        }
        let two = build_geometry(LatticeKind::Chain, 2, 1.0, &OrientationPattern::Parallel(0.0))
            .unwrap();
        let jm = coupling_matrix(&two, &CouplingModel::reference(), None).unwrap();
        let s = two.sites();
        assert_eq!(jm.get(0, 1), site_coupling(&s[0], &s[1], &CouplingModel::reference()).unwrap());
        let cut = coupling_matrix(&g, &CouplingModel::reference(), Some(1.01)).unwrap();
        assert_eq!(cut.get(0, 2), 0.0);
        assert!(cut.get(0, 1) != 0.0);
    }

    #[test]
    fn equilateral_ladder_ratio() {
        // All-parallel dipoles along the ladder normal, cavity off.
        let m = CouplingModel::reference().without_cavity();
        let g = build_geometry(
            LatticeKind::TriangularLadder,
            6,
            1.0,
            &OrientationPattern::Parallel(PI / 2.0),
        )
        .unwrap();
        let jm = coupling_matrix(&g, &m, None).unwrap();
        // NN bonds make 30° with x: θ₁ = θ₂ = 60°, factor 1 − 3/4; NNN: factor 1.
        let nn = -m.j0 * 0.25 / (1.0 - m.r_m).powi(3);
        let nnn = -m.j0 / (3f64.sqrt() - m.r_m).powi(3);
        assert_relative_eq!(jm.get(2, 3), nn, epsilon = 1e-12);
        assert_relative_eq!(jm.get(2, 4), nnn, epsilon = 1e-12);
    }

    #[test]
    fn zero_distance_cases() {
        let m = CouplingModel::reference();
        let side = PairOrientation::side_by_side();
        assert!(zero_coupling_distance(&m.without_cavity(), &side, 10.0)
            .unwrap()
            .is_none());
        let mut g0 = m;
        g0.g_max = 0.0;
        assert!(zero_coupling_distance(&g0, &side, 10.0).unwrap().is_none());
        let r = zero_coupling_distance(&m, &side, 10.0).unwrap().unwrap();
        let expected = m.r_m + (2.0 * m.delta * m.j0 / (m.g_max * m.g_max)).cbrt();
        assert!((r - expected).abs() < 1e-6, "{r} vs {expected}");
    }

    #[test]
    fn magic_angle_locus() {
        let m = CouplingModel::reference().without_cavity();
        let fixed = site(0.0, 0.0, PI / 2.0);
        let grid = MapGrid {
            x_min: 0.05,
            x_max: 4.0,
            y_min: 0.05,
            y_max: 4.0,
            nx: 80,
            ny: 80,
        };
        let map = coupling_map(&fixed, &grid, &m, 0.8).unwrap();
        assert!(!map.contour.is_empty());
        let magic = (1.0 / 3f64.sqrt()).acos();
        for p in &map.contour {
            // angle from the dipole axis (y)
            let ang = p[0].atan2(p[1]);
            assert!((ang - magic).abs() < 0.03, "{}", ang.to_degrees());
        }
    }

    #[test]
    fn point_reflection_uniform_cavity() {
        let m = CouplingModel::reference();
        let fixed = site(0.0, 0.0, 0.7);
        let grid = MapGrid {
            x_min: -3.0,
            x_max: 3.0,
            y_min: -3.0,
            y_max: 3.0,
            nx: 31,
            ny: 31,
        };
        let map = coupling_map(&fixed, &grid, &m, 0.6).unwrap();
        for iy in 0..31 {
            for ix in 0..31 {
                match (map.at(ix, iy), map.at(30 - ix, 30 - iy)) {
                    (Some(a), Some(b)) => assert_relative_eq!(a, b, epsilon = 1e-10),
                    (None, None) => {}
                    _ => panic!("mask not symmetric"),
                }
            }
        }
    }

    #[test]
    fn grid_inside_disk() {
        let m = CouplingModel::reference();
        let fixed = site(0.0, 0.0, 0.0);
        let grid = MapGrid {
            x_min: -0.1,
            x_max: 0.1,
            y_min: -0.1,
            y_max: 0.1,
            nx: 5,
            ny: 5,
        };
        assert!(matches!(
            coupling_map(&fixed, &grid, &m, 0.5),
            Err(Error::EmptyGrid)
        ));
    }

    #[test]
    fn fit_round_trip_two_lengths() {
        let truth = CouplingModel {
            j0: 37.5,
            r_m: 0.0,
            ..CouplingModel::reference()
        };
        let r_ms = [(0.8, 0.18), (1.0, 0.31), (1.2, 0.44)];
        let mut samples = Vec::new();
        for &(d, rm) in &r_ms {
            let m = CouplingModel { r_m: rm, ..truth };
            for k in 0..12 {
                let r = 0.9 + 0.25 * k as f64;
                let a = QubitSite::new([0.0, 0.0], PI / 2.0, d, PI / 2.0).unwrap();
                let b = QubitSite::new([r, 0.0], PI / 2.0, d, PI / 2.0).unwrap();
                samples.push(FitSample {
                    a,
                    b,
                    coupling: site_coupling(&a, &b, &m).unwrap(),
                });
            }
        }
        let fit = fit_dipole_model(&samples, &truth).unwrap();
        assert!((fit.j0 - truth.j0).abs() / truth.j0 < 1e-8);
        for &(d, rm) in &r_ms {
            assert!((fit.r_m_for(d).unwrap() - rm).abs() / rm < 1e-8);
        }
        assert!(fit.relative_residual < 1e-10);
    }

    #[test]
    fn fit_degenerate_distance() {
        let m = CouplingModel::reference();
        let samples: Vec<FitSample> = (0..5)
            .map(|k| {
                let a = site(0.0, 0.0, 0.1 * k as f64);
                let b = site(1.5, 0.0, 0.1 * k as f64);
                FitSample {
                    a,
                    b,
                    coupling: site_coupling(&a, &b, &m).unwrap(),
                }
            })
            .collect();
        assert!(matches!(
            fit_dipole_model(&samples, &m),
            Err(Error::DegenerateFit(_))
        ));
    }
}
