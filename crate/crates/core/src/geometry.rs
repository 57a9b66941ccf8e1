//! Qubit placements in the substrate plane.
//!
//! Every site carries an oriented dipole (the antenna axis) and an angle to
//! the cavity field. Site indices are 0-based; in the generated chains and
//! ladders bond `j` joins sites `j` and `j + 1`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn reduce_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// A single transmon: position (mm), dipole orientation and antenna length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitSite {
    pub position: [f64; 2],
    /// Orientation of the antenna axis in the lattice plane, radians in `[0, 2π)`.
    pub dipole_angle: f64,
    /// Normalized antenna length `d_m`.
    pub antenna_length: f64,
    /// Orientation relative to the cavity electric field, radians in `[0, 2π)`.
    pub cavity_angle: f64,
}

impl QubitSite {
    pub fn new(
        position: [f64; 2],
        dipole_angle: f64,
        antenna_length: f64,
        cavity_angle: f64,
    ) -> Result<Self> {
        if !(antenna_length > 0.0) || !antenna_length.is_finite() {
            return Err(Error::Geometry(format!(
                "antenna length must be positive, got {antenna_length}"
            )));
        }
        if !position.iter().all(|c| c.is_finite())
            || !dipole_angle.is_finite()
            || !cavity_angle.is_finite()
        {
            return Err(Error::Geometry("non-finite site parameter".into()));
        }
        Ok(Self {
            position,
            dipole_angle: reduce_angle(dipole_angle),
            antenna_length,
            cavity_angle: reduce_angle(cavity_angle),
        })
    }

    /// Site with unit antenna length, fully aligned with the cavity field.
    pub fn at(x: f64, y: f64, dipole_angle: f64) -> Result<Self> {
        Self::new([x, y], dipole_angle, 1.0, PI / 2.0)
    }

    pub fn dipole(&self) -> [f64; 2] {
        [self.dipole_angle.cos(), self.dipole_angle.sin()]
    }

    pub fn distance(&self, other: &QubitSite) -> f64 {
        let dx = other.position[0] - self.position[0];
        let dy = other.position[1] - self.position[1];
        dx.hypot(dy)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            position: [self.position[0] + dx, self.position[1] + dy],
            ..*self
        }
    }

    /// Rigid rotation about the origin by `angle` (positions and dipoles).
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let [x, y] = self.position;
        Self {
            position: [c * x - s * y, s * x + c * y],
            dipole_angle: reduce_angle(self.dipole_angle + angle),
            ..*self
        }
    }
}

/// Geometric quantities of a pair of oriented dipoles.
///
/// `theta1`/`theta2` are measured between each dipole vector and the unit
/// vector pointing from the first site to the second, `theta` between the
/// two dipole vectors. All three lie in `[0, π]`. Swapping the sites maps
/// `(theta1, theta2)` to `(π − theta2, π − theta1)`, which leaves
/// [`PairGeometry::angular_factor`] unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    pub r: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub theta: f64,
}

impl PairGeometry {
    /// `cos θ − 3 cos θ₁ cos θ₂`: +1 side by side, −2 collinear.
    pub fn angular_factor(&self) -> f64 {
        self.theta.cos() - 3.0 * self.theta1.cos() * self.theta2.cos()
    }
}

fn clamped_acos(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).acos()
}

pub fn pair_geometry(a: &QubitSite, b: &QubitSite) -> Result<PairGeometry> {
    let dx = b.position[0] - a.position[0];
    let dy = b.position[1] - a.position[1];
    let r = dx.hypot(dy);
    if r == 0.0 {
        return Err(Error::CoincidentSites(a.position[0], a.position[1]));
    }
    let u = [dx / r, dy / r];
    let pa = a.dipole();
    let pb = b.dipole();
    Ok(PairGeometry {
        r,
        theta1: clamped_acos(pa[0] * u[0] + pa[1] * u[1]),
        theta2: clamped_acos(pb[0] * u[0] + pb[1] * u[1]),
        theta: clamped_acos(pa[0] * pb[0] + pa[1] * pb[1]),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitGeometry {
    sites: Vec<QubitSite>,
    min_separation: f64,
}

impl QubitGeometry {
    pub fn new(sites: Vec<QubitSite>, min_separation: f64) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Geometry("geometry needs at least one site".into()));
        }
        if !(min_separation > 0.0) {
            return Err(Error::Geometry(format!(
                "minimum separation must be positive, got {min_separation}"
            )));
        }
        let tol = min_separation * 1e-12;
        for i in 0..sites.len() {
            for j in (i + 1)..sites.len() {
                let d = sites[i].distance(&sites[j]);
                if d + tol < min_separation {
                    return Err(Error::Geometry(format!(
                        "sites {i} and {j} are {d:.6} mm apart, below the minimum {min_separation:.6} mm"
                    )));
                }
            }
        }
        Ok(Self {
            sites,
            min_separation,
        })
    }

    pub fn sites(&self) -> &[QubitSite] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    pub fn pair(&self, i: usize, j: usize) -> Result<PairGeometry> {
        pair_geometry(&self.sites[i], &self.sites[j])
    }

    pub fn rotated(&self, angle: f64) -> Self {
        Self {
            sites: self.sites.iter().map(|s| s.rotated(angle)).collect(),
            min_separation: self.min_separation,
        }
    }

    /// Applies `f` to every site (e.g. to set antenna lengths or cavity angles).
    pub fn map_sites(&self, f: impl Fn(usize, &QubitSite) -> QubitSite) -> Result<Self> {
        let sites = self.sites.iter().enumerate().map(|(i, s)| f(i, s)).collect();
        Self::new(sites, self.min_separation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Chain,
    TriangularLadder,
    RectGrid,
}

impl FromStr for LatticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(Self::Chain),
            "triangular_ladder" | "ladder" => Ok(Self::TriangularLadder),
            "rect_grid" | "grid" => Ok(Self::RectGrid),
            other => Err(Error::Geometry(format!("unknown lattice kind `{other}`"))),
        }
    }
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Chain => "chain",
            Self::TriangularLadder => "triangular_ladder",
            Self::RectGrid => "rect_grid",
        })
    }
}

/// Rule assigning a dipole angle (radians) to each site index.
#[derive(Debug, Clone, PartialEq)]
pub enum OrientationPattern {
    Parallel(f64),
    Alternating { even: f64, odd: f64 },
    PerSite(Vec<f64>),
}

impl OrientationPattern {
    fn angle(&self, i: usize) -> Result<f64> {
        match self {
            Self::Parallel(a) => Ok(*a),
            Self::Alternating { even, odd } => Ok(if i.is_multiple_of(2) { *even } else { *odd }),
            Self::PerSite(v) => v.get(i).copied().ok_or_else(|| {
                Error::Geometry(format!("orientation pattern has no angle for site {i}"))
            }),
        }
    }
}

/// Generates a chain, a zigzag triangular ladder or a rectangular grid.
///
/// The ladder is numbered along the zigzag: nearest-neighbour bonds
/// `(j, j+1)` have length `spacing` and make ±30° with the ladder axis, so
/// next-nearest-neighbour bonds `(j, j+2)` run along the legs with length
/// `√3 · spacing`.
pub fn build_geometry(
    kind: LatticeKind,
    n_sites: usize,
    spacing: f64,
    pattern: &OrientationPattern,
) -> Result<QubitGeometry> {
    if n_sites == 0 {
        return Err(Error::Geometry("n_sites must be at least 1".into()));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::Geometry(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    let positions: Vec<[f64; 2]> = match kind {
        LatticeKind::Chain => (0..n_sites).map(|j| [j as f64 * spacing, 0.0]).collect(),
        LatticeKind::TriangularLadder => {
            let dx = spacing * 3f64.sqrt() / 2.0;
            let dy = spacing / 2.0;
            (0..n_sites)
                .map(|j| [j as f64 * dx, if j % 2 == 0 { 0.0 } else { dy }])
                .collect()
        }
        LatticeKind::RectGrid => {
            let cols = (n_sites as f64).sqrt().ceil() as usize;
            (0..n_sites)
                .map(|j| [(j % cols) as f64 * spacing, (j / cols) as f64 * spacing])
                .collect()
        }
    };
    let sites = positions
        .into_iter()
        .enumerate()
        .map(|(i, p)| QubitSite::new(p, pattern.angle(i)?, 1.0, PI / 2.0))
        .collect::<Result<Vec<_>>>()?;
    QubitGeometry::new(sites, spacing)
}

/// Human-editable form of a site, angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteRecord {
    pub x: f64,
    pub y: f64,
    pub angle_deg: f64,
    #[serde(default = "default_d_m")]
    pub d_m: f64,
    #[serde(default = "default_phi_deg")]
    pub phi_deg: f64,
}

fn default_d_m() -> f64 {
    1.0
}

fn default_phi_deg() -> f64 {
    90.0
}

/// Serializable geometry section: `min_separation_mm` plus a site list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryRecord {
    pub min_separation_mm: f64,
    pub sites: Vec<SiteRecord>,
}

impl From<&QubitGeometry> for GeometryRecord {
    fn from(g: &QubitGeometry) -> Self {
        Self {
            min_separation_mm: g.min_separation,
            sites: g
                .sites
                .iter()
                .map(|s| SiteRecord {
                    x: s.position[0],
                    y: s.position[1],
                    angle_deg: s.dipole_angle.to_degrees(),
                    d_m: s.antenna_length,
                    phi_deg: s.cavity_angle.to_degrees(),
                })
                .collect(),
        }
    }
}

impl TryFrom<&GeometryRecord> for QubitGeometry {
    type Error = Error;

    fn try_from(rec: &GeometryRecord) -> Result<Self> {
        let sites = rec
            .sites
            .iter()
            .map(|s| {
                QubitSite::new(
                    [s.x, s.y],
                    s.angle_deg.to_radians(),
                    s.d_m,
                    s.phi_deg.to_radians(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        QubitGeometry::new(sites, rec.min_separation_mm)
    }
}
