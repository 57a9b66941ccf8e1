//! Config-driven experiments: a TOML file in, CSV tables and a JSON
//! manifest out.
//!
//! Physical keys carry their unit in the name (`_mm`, `_nH`, `_fF`,
//! `_2piMHz`, `_2pikHz`, `_us`, `_deg`). Every config is validated in full
//! before any allocation or computation.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::circuit::{
    circuit_coupling_map,
    build_network, cavity_detunings, effective_coupling, ej_from_inductance, mode_table, quantize,
    second_order_coupling, CavityBranch, CircuitParams, PadModel,
};
use crate::coupling::{
    coupling_map, cut_sign_changes, fit_dipole_model, site_coupling,
    zero_coupling_distance, CavityProfile, CouplingMap, CouplingModel, FitSample, MapGrid,
    PairOrientation,
};
use crate::disorder::{disorder_scan, DisorderSpec, ScanAxis, ScanConfig};
use crate::ed::ground_state;
use crate::error::{Error, Result};
use crate::geometry::QubitSite;
use crate::lindblad::{
    default_ramp, ramp_ensemble, tuned_ramp, DecayDirection, EvolveOptions, NoiseParams, RampConfig,
    DENSITY_SITE_CAP,
};
use crate::observables::BondReport;
use crate::output::{num, Table};
use crate::spin::{binomial, build_ladder_hamiltonian, mg_product_state, Gauge, MAX_DIM, MAX_SITES};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "DIPOLAR_THREADS";

/// Largest coupling-map grid, in points.
pub const MAX_GRID_POINTS: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CouplingMap,
    FitDipole,
    CircuitExtract,
    ScanJ2,
    DisorderScan,
    Ramp,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        Self::CouplingMap,
        Self::FitDipole,
        Self::CircuitExtract,
        Self::ScanJ2,
        Self::DisorderScan,
        Self::Ramp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::CouplingMap => "coupling-map",
            Self::FitDipole => "fit-dipole",
            Self::CircuitExtract => "circuit-extract",
            Self::ScanJ2 => "scan-j2",
            Self::DisorderScan => "disorder-scan",
            Self::Ramp => "ramp",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::CouplingMap => "J(x, y) around a fixed qubit plus the zero-coupling contour [model|circuit, site, grid]",
            Self::FitDipole => "least-squares fit of J0 and r_m to coupling samples [model, fit, site]",
            Self::CircuitExtract => "avoided-crossing couplings versus separation with the dispersive comparison [circuit, site, pair]",
            Self::ScanJ2 => "ground-state bond order over a J2/J1 grid [spin, scan, disorder]",
            Self::DisorderScan => "disorder-averaged bond order over a spread or J2/J1 grid [spin, scan, disorder]",
            Self::Ramp => "driven ramp from the polarized state, pure or Lindblad [spin, schedule, noise, disorder, output]",
        }
    }

    /// Blocks this kind reads; any other block is rejected.
    fn blocks(self) -> &'static [&'static str] {
        match self {
            Self::CouplingMap => &["model", "circuit", "site", "grid"],
            Self::FitDipole => &["model", "fit", "site"],
            Self::CircuitExtract => &["model", "circuit", "site", "pair"],
            Self::ScanJ2 => &["spin", "scan", "disorder"],
            Self::DisorderScan => &["spin", "scan", "disorder", "output"],
            Self::Ramp => &["spin", "schedule", "noise", "disorder", "output"],
        }
    }
}

fn d_j0() -> f64 {
    42.0
}
fn d_rm() -> f64 {
    0.25
}
fn d_gmax() -> f64 {
    60.0
}
fn d_delta() -> f64 {
    1500.0
}
fn d_true() -> bool {
    true
}
fn d_90() -> f64 {
    90.0
}
fn d_one() -> f64 {
    1.0
}
fn d_exclusion() -> f64 {
    0.5
}
fn d_samples() -> usize {
    101
}
fn d_realizations() -> usize {
    1
}
fn d_mode_rows() -> usize {
    41
}
fn d_lengths() -> Vec<f64> {
    vec![1.0]
}
fn d_angles() -> Vec<f64> {
    vec![0.0, 90.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandingWaveBlock {
    pub length_mm: f64,
    pub mode: u32,
    #[serde(default)]
    pub phase_rad: f64,
}

/// Analytic coupling law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(rename = "j0_2piMHz_mm3", default = "d_j0")]
    pub j0: f64,
    #[serde(rename = "r_m_mm", default = "d_rm")]
    pub r_m: f64,
    #[serde(rename = "g_max_2piMHz", default = "d_gmax")]
    pub g_max: f64,
    #[serde(rename = "delta_2piMHz", default = "d_delta")]
    pub delta: f64,
    #[serde(default = "d_true")]
    pub cavity: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standing_wave: Option<StandingWaveBlock>,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self {
            j0: d_j0(),
            r_m: d_rm(),
            g_max: d_gmax(),
            delta: d_delta(),
            cavity: true,
            standing_wave: None,
        }
    }
}

impl ModelBlock {
    pub fn to_model(&self) -> CouplingModel {
        CouplingModel {
            j0: self.j0,
            r_m: self.r_m,
            g_max: self.g_max,
            delta: self.delta,
            cavity: match self.standing_wave {
                None => CavityProfile::Uniform,
                Some(w) => CavityProfile::StandingWave {
                    length_mm: w.length_mm,
                    mode: w.mode,
                    phase: w.phase_rad,
                },
            },
            cavity_enabled: self.cavity,
        }
    }
}

/// Lumped-circuit parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CircuitBlock {
    #[serde(rename = "c_qubit_fF")]
    pub c_qubit: f64,
    #[serde(rename = "l_qubit_nH")]
    pub l_qubit: f64,
    #[serde(rename = "pad_span_mm")]
    pub pad_span: f64,
    #[serde(rename = "pad_coefficient_fF_mm2")]
    pub pad_coefficient: f64,
    pub cavity: bool,
    #[serde(rename = "cavity_c0_fF")]
    pub cavity_c0: f64,
    #[serde(rename = "cavity_c_fF")]
    pub cavity_c: f64,
    #[serde(rename = "cavity_l_nH")]
    pub cavity_l: f64,
    /// Relative half-width of the `L1` sweep.
    pub sweep: f64,
}

impl Default for CircuitBlock {
    fn default() -> Self {
        Self::from_params(&CircuitParams::reference())
    }
}

impl CircuitBlock {
    fn from_params(p: &CircuitParams) -> Self {
        let cav = p.cavity.unwrap_or(CavityBranch {
            c0: 0.0,
            c: 0.0,
            l: 0.0,
        });
        Self {
            c_qubit: p.c_qubit,
            l_qubit: p.l_qubit,
            pad_span: p.pads.span_mm,
            pad_coefficient: p.pads.coefficient,
            cavity: p.cavity.is_some(),
            cavity_c0: cav.c0,
            cavity_c: cav.c,
            cavity_l: cav.l,
            sweep: p.sweep,
        }
    }

    pub fn to_params(&self) -> CircuitParams {
        CircuitParams {
            c_qubit: self.c_qubit,
            l_qubit: self.l_qubit,
            pads: PadModel {
                span_mm: self.pad_span,
                coefficient: self.pad_coefficient,
            },
            cavity: self.cavity.then_some(CavityBranch {
                c0: self.cavity_c0,
                c: self.cavity_c,
                l: self.cavity_l,
            }),
            sweep: self.sweep,
        }
    }

    fn validate(&self) -> Result<()> {
        let pos = [
            ("circuit.c_qubit_fF", self.c_qubit),
            ("circuit.l_qubit_nH", self.l_qubit),
            ("circuit.pad_span_mm", self.pad_span),
        ];
        for (k, v) in pos {
            positive(k, v)?;
        }
        non_negative("circuit.pad_coefficient_fF_mm2", self.pad_coefficient)?;
        if self.cavity {
            non_negative("circuit.cavity_c0_fF", self.cavity_c0)?;
            positive("circuit.cavity_c_fF", self.cavity_c)?;
            positive("circuit.cavity_l_nH", self.cavity_l)?;
        }
        if !(self.sweep > 0.0 && self.sweep < 1.0) {
            return Err(Error::config("circuit.sweep", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Template qubit: position, dipole orientation, antenna length and angle
/// to the cavity field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteBlock {
    #[serde(default)]
    pub x_mm: f64,
    #[serde(default)]
    pub y_mm: f64,
    #[serde(default = "d_90")]
    pub dipole_angle_deg: f64,
    #[serde(default = "d_one")]
    pub antenna_length: f64,
    #[serde(default = "d_90")]
    pub cavity_angle_deg: f64,
}

impl Default for SiteBlock {
    fn default() -> Self {
        Self {
            x_mm: 0.0,
            y_mm: 0.0,
            dipole_angle_deg: 90.0,
            antenna_length: 1.0,
            cavity_angle_deg: 90.0,
        }
    }
}

impl SiteBlock {
    pub fn to_site(&self) -> Result<QubitSite> {
        QubitSite::new(
            [self.x_mm, self.y_mm],
            self.dipole_angle_deg.to_radians(),
            self.antenna_length,
            self.cavity_angle_deg.to_radians(),
        )
        .map_err(|e| Error::config("site", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Analytic,
    Circuit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub x_min_mm: f64,
    pub x_max_mm: f64,
    pub y_min_mm: f64,
    pub y_max_mm: f64,
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "d_exclusion")]
    pub exclusion_mm: f64,
    #[serde(default)]
    pub engine: Engine,
    /// Extra cut along x at this height, sampled with `nx` points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut_y_mm: Option<f64>,
}

impl GridBlock {
    fn grid(&self) -> MapGrid {
        MapGrid {
            x_min: self.x_min_mm,
            x_max: self.x_max_mm,
            y_min: self.y_min_mm,
            y_max: self.y_max_mm,
            nx: self.nx,
            ny: self.ny,
        }
    }

    fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("grid.x_min_mm", self.x_min_mm),
            ("grid.x_max_mm", self.x_max_mm),
            ("grid.y_min_mm", self.y_min_mm),
            ("grid.y_max_mm", self.y_max_mm),
        ] {
            finite(k, v)?;
        }
        if !(self.x_max_mm > self.x_min_mm) {
            return Err(Error::config("grid.x_max_mm", "must exceed x_min_mm"));
        }
        if !(self.y_max_mm > self.y_min_mm) {
            return Err(Error::config("grid.y_max_mm", "must exceed y_min_mm"));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::config("grid.nx", "nx and ny must be ≥ 2"));
        }
        if self.nx.saturating_mul(self.ny) > MAX_GRID_POINTS {
            return Err(Error::config(
                "grid.nx",
                format!("nx·ny exceeds the cap of {MAX_GRID_POINTS} points"),
            ));
        }
        non_negative("grid.exclusion_mm", self.exclusion_mm)?;
        if let Some(y) = self.cut_y_mm {
            finite("grid.cut_y_mm", y)?;
        }
        Ok(())
    }
}

/// Coupling samples for `fit-dipole`: a CSV file or a synthetic set drawn
/// from `[model]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitBlock {
    /// Columns `x1_mm, y1_mm, dipole1_deg, x2_mm, y2_mm, dipole2_deg,
    /// antenna_length, J_2piMHz`. Relative paths resolve against the
    /// config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_csv: Option<PathBuf>,
    #[serde(default)]
    pub distances_mm: Vec<f64>,
    /// Direction of the separation relative to the x axis; both dipoles
    /// follow `[site].dipole_angle_deg`.
    #[serde(default = "d_angles")]
    pub angles_deg: Vec<f64>,
    #[serde(default = "d_lengths")]
    pub antenna_lengths: Vec<f64>,
    #[serde(rename = "noise_2piMHz", default)]
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairBlock {
    pub separations_mm: Vec<f64>,
    /// Direction of the separation vector relative to the x axis.
    #[serde(default)]
    pub direction_deg: f64,
    /// Rows of the `L1` mode table written for the first separation.
    #[serde(default = "d_mode_rows")]
    pub mode_table_rows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinBlock {
    pub sites: usize,
    #[serde(rename = "j1_2piMHz")]
    pub j1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j2_over_j1: Option<f64>,
    #[serde(rename = "j2_2piMHz", default, skip_serializing_if = "Option::is_none")]
    pub j2: Option<f64>,
}

impl SpinBlock {
    fn ratio(&self) -> Result<f64> {
        match (self.j2_over_j1, self.j2) {
            (Some(r), None) => Ok(r),
            (None, Some(j2)) => Ok(j2 / self.j1),
            (Some(_), Some(_)) => Err(Error::config(
                "spin.j2_over_j1",
                "give either j2_over_j1 or j2_2piMHz, not both",
            )),
            (None, None) => Err(Error::config("spin.j2_over_j1", "missing (or give j2_2piMHz)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j2_over_j1: Option<Vec<f64>>,
    #[serde(rename = "delta_h_2piMHz", default, skip_serializing_if = "Option::is_none")]
    pub delta_h: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderBlock {
    #[serde(rename = "mean_2piMHz", default)]
    pub mean: f64,
    #[serde(rename = "spread_2piMHz", default)]
    pub spread: f64,
    #[serde(default = "d_realizations")]
    pub realizations: usize,
}

impl Default for DisorderBlock {
    fn default() -> Self {
        Self {
            mean: 0.0,
            spread: 0.0,
            realizations: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_us: Option<f64>,
    #[serde(rename = "omega_peak_2piMHz", default, skip_serializing_if = "Option::is_none")]
    pub omega_peak: Option<f64>,
    #[serde(rename = "delta_init_2piMHz", default, skip_serializing_if = "Option::is_none")]
    pub delta_init: Option<f64>,
    #[serde(default = "d_samples")]
    pub samples: usize,
    /// Fixed step; must not exceed the automatic bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_us: Option<f64>,
}

impl Default for ScheduleBlock {
    fn default() -> Self {
        Self {
            duration_us: None,
            omega_peak: None,
            delta_init: None,
            samples: d_samples(),
            dt_us: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    #[serde(rename = "kappa_2pikHz", default)]
    pub kappa: f64,
    #[serde(rename = "gamma_2pikHz", default)]
    pub gamma: f64,
    #[serde(default)]
    pub decay: DecayDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// One CSV per realization.
    #[serde(default)]
    pub per_realization: bool,
    /// Ramp only: also run the noiseless ensemble.
    #[serde(default)]
    pub noiseless_reference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<SiteBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<PairBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin: Option<SpinBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputBlock>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, "must be finite"))
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite and ≥ 0, got {v}")))
    }
}

fn grid_values(field: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::config(field, "empty list"));
    }
    v.iter().try_for_each(|&x| finite(field, x))
}

fn required<'a, T>(block: &'a Option<T>, name: &str, kind: ExperimentKind) -> Result<&'a T> {
    block
        .as_ref()
        .ok_or_else(|| Error::config(name, format!("block required for kind `{}`", kind.name())))
}

/// First backtick-quoted token of a deserializer message.
fn quoted_field(msg: &str) -> Option<&str> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(&msg[start..start + len])
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = quoted_field(&msg).unwrap_or("config").to_string();
            Error::config(field, msg)
        })?;
        Ok(cfg)
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    fn present_blocks(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let flags = [
            ("model", self.model.is_some()),
            ("circuit", self.circuit.is_some()),
            ("site", self.site.is_some()),
            ("grid", self.grid.is_some()),
            ("fit", self.fit.is_some()),
            ("pair", self.pair.is_some()),
            ("spin", self.spin.is_some()),
            ("scan", self.scan.is_some()),
            ("disorder", self.disorder.is_some()),
            ("schedule", self.schedule.is_some()),
            ("noise", self.noise.is_some()),
            ("output", self.output.is_some()),
        ];
        for (name, on) in flags {
            if on {
                v.push(name);
            }
        }
        v
    }

    /// Complete check of every field the kind reads. Nothing is allocated
    /// beyond the config itself.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind;
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::config("output_dir", "must not be empty"));
        }
        for b in self.present_blocks() {
            if !kind.blocks().contains(&b) {
                return Err(Error::config(b, format!("block not used by kind `{}`", kind.name())));
            }
        }
        if let Some(m) = &self.model {
            m.to_model()
                .validate()
                .map_err(|e| Error::config("model", e.to_string()))?;
        }
        if let Some(c) = &self.circuit {
            c.validate()?;
        }
        if let Some(s) = &self.site {
            s.to_site()?;
        }
        if let Some(d) = &self.disorder {
            finite("disorder.mean_2piMHz", d.mean)?;
            non_negative("disorder.spread_2piMHz", d.spread)?;
            if d.realizations == 0 {
                return Err(Error::config("disorder.realizations", "must be ≥ 1"));
            }
        }
        match kind {
            ExperimentKind::CouplingMap => {
                let g = required(&self.grid, "grid", kind)?;
                g.validate()?;
                if g.engine == Engine::Analytic && self.circuit.is_some() {
                    return Err(Error::config("circuit", "only read with grid.engine = \"circuit\""));
                }
                if g.engine == Engine::Circuit && self.model.is_some() {
                    return Err(Error::config("model", "only read with grid.engine = \"analytic\""));
                }
            }
            ExperimentKind::FitDipole => {
                let f = required(&self.fit, "fit", kind)?;
                non_negative("fit.noise_2piMHz", f.noise)?;
                if f.data_csv.is_none() {
                    grid_values("fit.distances_mm", &f.distances_mm)?;
                    grid_values("fit.angles_deg", &f.angles_deg)?;
                    grid_values("fit.antenna_lengths", &f.antenna_lengths)?;
                    if f.distances_mm.iter().any(|&r| r <= 0.0) {
                        return Err(Error::config("fit.distances_mm", "distances must be > 0"));
                    }
                    if f.antenna_lengths.iter().any(|&d| d <= 0.0) {
                        return Err(Error::config("fit.antenna_lengths", "lengths must be > 0"));
                    }
                    let r_m = self.model.unwrap_or_default().r_m;
                    if f.distances_mm.iter().any(|&r| r <= r_m) {
                        return Err(Error::config("fit.distances_mm", "every distance must exceed model.r_m_mm"));
                    }
                } else if !f.distances_mm.is_empty() {
                    return Err(Error::config("fit.distances_mm", "not used together with data_csv"));
                }
            }
            ExperimentKind::CircuitExtract => {
                let p = required(&self.pair, "pair", kind)?;
                grid_values("pair.separations_mm", &p.separations_mm)?;
                if p.separations_mm.iter().any(|&r| r <= 0.0) {
                    return Err(Error::config("pair.separations_mm", "separations must be > 0"));
                }
                finite("pair.direction_deg", p.direction_deg)?;
                if p.mode_table_rows < 2 {
                    return Err(Error::config("pair.mode_table_rows", "must be ≥ 2"));
                }
            }
            ExperimentKind::ScanJ2 => {
                let s = required(&self.spin, "spin", kind)?;
                check_ed_size(s)?;
                if s.j2_over_j1.is_some() || s.j2.is_some() {
                    return Err(Error::config("spin.j2_over_j1", "the grid goes in scan.j2_over_j1"));
                }
                let sc = required(&self.scan, "scan", kind)?;
                if sc.delta_h.is_some() {
                    return Err(Error::config("scan.delta_h_2piMHz", "use kind `disorder-scan`"));
                }
                grid_values(
                    "scan.j2_over_j1",
                    sc.j2_over_j1
                        .as_deref()
                        .ok_or_else(|| Error::config("scan.j2_over_j1", "missing"))?,
                )?;
            }
            ExperimentKind::DisorderScan => {
                let s = required(&self.spin, "spin", kind)?;
                check_ed_size(s)?;
                required(&self.disorder, "disorder", kind)?;
                let sc = required(&self.scan, "scan", kind)?;
                match (&sc.j2_over_j1, &sc.delta_h) {
                    (Some(r), None) => {
                        grid_values("scan.j2_over_j1", r)?;
                        if s.j2_over_j1.is_some() || s.j2.is_some() {
                            return Err(Error::config("spin.j2_over_j1", "the grid goes in scan.j2_over_j1"));
                        }
                    }
                    (None, Some(d)) => {
                        grid_values("scan.delta_h_2piMHz", d)?;
                        if d.iter().any(|&x| x < 0.0) {
                            return Err(Error::config("scan.delta_h_2piMHz", "spreads must be ≥ 0"));
                        }
                        finite("spin.j2_over_j1", s.ratio()?)?;
                    }
                    _ => {
                        return Err(Error::config(
                            "scan",
                            "give exactly one of j2_over_j1 and delta_h_2piMHz",
                        ))
                    }
                }
                if self.output.is_some_and(|o| o.noiseless_reference) {
                    return Err(Error::config("output.noiseless_reference", "ramp only"));
                }
            }
            ExperimentKind::Ramp => {
                let s = required(&self.spin, "spin", kind)?;
                check_spin_common(s)?;
                if s.sites > DENSITY_SITE_CAP {
                    return Err(Error::config(
                        "spin.sites",
                        format!("{} exceeds the ramp cap of {DENSITY_SITE_CAP}", s.sites),
                    ));
                }
                finite("spin.j2", s.ratio()?)?;
                let sch = self.schedule.unwrap_or_default();
                if let Some(t) = sch.duration_us {
                    positive("schedule.duration_us", t)?;
                }
                if let Some(w) = sch.omega_peak {
                    finite("schedule.omega_peak_2piMHz", w)?;
                }
                if let Some(d) = sch.delta_init {
                    finite("schedule.delta_init_2piMHz", d)?;
                }
                if let Some(dt) = sch.dt_us {
                    positive("schedule.dt_us", dt)?;
                }
                if sch.samples < 2 {
                    return Err(Error::config("schedule.samples", "must be ≥ 2"));
                }
                let n = self.noise.unwrap_or_default();
                non_negative("noise.kappa_2pikHz", n.kappa)?;
                non_negative("noise.gamma_2pikHz", n.gamma)?;
            }
        }
        Ok(())
    }

    fn resolve_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Ramp configuration with defaults filled in; internal time unit
    /// `1/(2π)` µs.
    pub fn ramp_config(&self) -> Result<RampConfig> {
        let s = required(&self.spin, "spin", ExperimentKind::Ramp)?;
        let j2 = s.ratio()? * s.j1;
        let sch = self.schedule.unwrap_or_default();
        let n = self.noise.unwrap_or_default();
        let noise = NoiseParams::from_khz(s.sites, n.kappa, n.gamma).with_decay(n.decay);
        let mut cfg = RampConfig::new(s.sites, s.j1, j2, noise)?;
        if sch.duration_us.is_some() || sch.omega_peak.is_some() || sch.delta_init.is_some() {
            let tuned = tuned_ramp(s.sites, s.j1)?;
            let duration = sch.duration_us.map_or(tuned.duration, |t| t * TAU);
            let a = s.j1.abs();
            cfg.schedule = default_ramp(
                s.sites,
                duration,
                sch.omega_peak.unwrap_or(crate::lindblad::DEFAULT_OMEGA_PEAK * a),
                sch.delta_init.unwrap_or(crate::lindblad::DEFAULT_DELTA_INIT * a),
            )?;
        }
        let d = self.disorder.unwrap_or_default();
        cfg.disorder = DisorderSpec {
            mean: d.mean,
            spread: d.spread,
            realizations: d.realizations,
            master_seed: self.seed,
        };
        cfg.samples = sch.samples;
        cfg.options = EvolveOptions {
            dt: sch.dt_us.map(|dt| dt * TAU),
            ..EvolveOptions::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form of the resolved config.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }
}

fn check_spin_common(s: &SpinBlock) -> Result<()> {
    if s.sites < 4 || !s.sites.is_multiple_of(2) {
        return Err(Error::config("spin.sites", format!("must be even and ≥ 4, got {}", s.sites)));
    }
    if !(s.j1.is_finite() && s.j1 != 0.0) {
        return Err(Error::config("spin.j1_2piMHz", "must be finite and nonzero"));
    }
    Ok(())
}

fn check_ed_size(s: &SpinBlock) -> Result<()> {
    check_spin_common(s)?;
    if s.sites > MAX_SITES {
        return Err(Error::config(
            "spin.sites",
            format!("{} exceeds the cap of {MAX_SITES} sites", s.sites),
        ));
    }
    let dim = binomial(s.sites, s.sites / 2);
    if dim > MAX_DIM {
        return Err(Error::config(
            "spin.sites",
            format!("sector dimension {dim} exceeds the cap {MAX_DIM}"),
        ));
    }
    Ok(())
}

/// Sets the global worker count from [`THREADS_ENV`] when present and
/// returns the count in effect.
pub fn init_threads() -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::config(THREADS_ENV, format!("expected a positive integer, got {v:?}")))?;
        // A pool built earlier in the process keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

/// Files written by a run and the manifest contents.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub manifest: serde_json::Value,
}

struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Outputs<'_> {
    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        t.write(&self.dir.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, v: &serde_json::Value) -> Result<()> {
        fs::write(self.dir.join(name), serde_json::to_string_pretty(v)? + "\n")?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Validates, runs and writes every output plus `manifest.json`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Outputs {
        dir: &cfg.output_dir,
        files: Vec::new(),
    };
    let summary = match cfg.kind {
        ExperimentKind::CouplingMap => run_coupling_map(cfg, &mut out)?,
        ExperimentKind::FitDipole => run_fit(cfg, &mut out)?,
        ExperimentKind::CircuitExtract => run_circuit_extract(cfg, &mut out)?,
        ExperimentKind::ScanJ2 => run_scan_j2(cfg, &mut out)?,
        ExperimentKind::DisorderScan => run_disorder_scan(cfg, &mut out)?,
        ExperimentKind::Ramp => run_ramp(cfg, &mut out)?,
    };
    let manifest = json!({
        "tool": "dipolar",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": cfg.kind.name(),
        "config": cfg,
        "config_sha256": cfg.hash()?,
        "seed": cfg.seed,
        "threads": rayon::current_num_threads(),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "outputs": out.files,
        "summary": summary,
    });
    let mut files = out.files.clone();
    fs::write(
        cfg.output_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    files.push("manifest.json".into());
    Ok(RunReport {
        output_dir: cfg.output_dir.clone(),
        files,
        manifest,
    })
}

fn map_table(map: &CouplingMap) -> Table {
    let mut t = Table::new(&["x_mm", "y_mm", "J_2piMHz"]);
    for (iy, &y) in map.ys.iter().enumerate() {
        for (ix, &x) in map.xs.iter().enumerate() {
            t.push(vec![num(x), num(y), num(map.at(ix, iy).unwrap_or(f64::NAN))]);
        }
    }
    t
}

fn run_coupling_map(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let g = cfg.grid.as_ref().expect("validated");
    let fixed = cfg.site.unwrap_or_default().to_site()?;
    let grid = g.grid();
    let model = cfg.model.unwrap_or_default().to_model();
    let params = cfg.circuit.unwrap_or_default().to_params();
    let map = match g.engine {
        Engine::Analytic => coupling_map(&fixed, &grid, &model, g.exclusion_mm)?,
        Engine::Circuit => circuit_coupling_map(&fixed, &grid, &params, g.exclusion_mm)?,
    };
    out.table("coupling_map.csv", &map_table(&map))?;
    let mut contour = Table::new(&["x_mm", "y_mm"]);
    for p in &map.contour {
        contour.push(vec![num(p[0]), num(p[1])]);
    }
    out.table("zero_contour.csv", &contour)?;
    let mut summary = json!({
        "engine": g.engine,
        "contour_points": map.contour.len(),
        "masked_points": map.values.iter().filter(|v| v.is_none()).count(),
    });
    if g.engine == Engine::Analytic {
        let r0 = zero_coupling_distance(&model, &PairOrientation::side_by_side(), 100.0)?;
        summary["side_by_side_zero_mm"] = json!(r0);
    }
    if let Some(y) = g.cut_y_mm {
        let cut_grid = MapGrid {
            y_min: y,
            y_max: y,
            ny: 1,
            ..grid
        };
        let cut = match g.engine {
            Engine::Analytic => coupling_map(&fixed, &cut_grid, &model, g.exclusion_mm)?,
            Engine::Circuit => circuit_coupling_map(&fixed, &cut_grid, &params, g.exclusion_mm)?,
        };
        let mut t = Table::new(&["x_mm", "J_2piMHz"]);
        let mut vals = Vec::new();
        for (ix, &x) in cut.xs.iter().enumerate() {
            let v = cut.at(ix, 0);
            if let Some(v) = v {
                vals.push(v);
            }
            t.push(vec![num(x), num(v.unwrap_or(f64::NAN))]);
        }
        out.table("cut.csv", &t)?;
        summary["cut_y_mm"] = json!(y);
        summary["cut_sign_changes"] = json!(cut_sign_changes(&vals));
    }
    Ok(summary)
}

#[derive(Debug, Deserialize)]
struct FitRecord {
    x1_mm: f64,
    y1_mm: f64,
    dipole1_deg: f64,
    x2_mm: f64,
    y2_mm: f64,
    dipole2_deg: f64,
    antenna_length: f64,
    #[serde(rename = "J_2piMHz")]
    j: f64,
}

fn fit_samples(cfg: &ExperimentConfig) -> Result<Vec<FitSample>> {
    let f = cfg.fit.as_ref().expect("validated");
    let template = cfg.site.unwrap_or_default();
    let cavity_angle = template.cavity_angle_deg.to_radians();
    if let Some(path) = &f.data_csv {
        let mut rdr = csv::Reader::from_path(cfg.resolve_path(path))?;
        let mut samples = Vec::new();
        for rec in rdr.deserialize() {
            let r: FitRecord = rec?;
            let site = |x: f64, y: f64, a: f64| {
                QubitSite::new([x, y], a.to_radians(), r.antenna_length, cavity_angle)
                    .map_err(|e| Error::config("fit.data_csv", e.to_string()))
            };
            samples.push(FitSample {
                a: site(r.x1_mm, r.y1_mm, r.dipole1_deg)?,
                b: site(r.x2_mm, r.y2_mm, r.dipole2_deg)?,
                coupling: r.j,
            });
        }
        return Ok(samples);
    }
    let truth = cfg.model.unwrap_or_default().to_model();
    let noise = Normal::new(0.0, f.noise).map_err(|e| Error::config("fit.noise_2piMHz", e.to_string()))?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::new();
    for &d in &f.antenna_lengths {
        for &ang in &f.angles_deg {
            for &r in &f.distances_mm {
                let a = QubitSite::new(
                    [template.x_mm, template.y_mm],
                    template.dipole_angle_deg.to_radians(),
                    d,
                    cavity_angle,
                )?;
                let (s, c) = ang.to_radians().sin_cos();
                let b = a.translated(r * c, r * s);
                let mut j = site_coupling(&a, &b, &truth)?;
                if f.noise > 0.0 {
                    j += noise.sample(&mut rng);
                }
                samples.push(FitSample { a, b, coupling: j });
            }
        }
    }
    Ok(samples)
}

fn run_fit(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let samples = fit_samples(cfg)?;
    let fixed = cfg.model.unwrap_or_default().to_model();
    let fit = fit_dipole_model(&samples, &fixed)?;
    let mut t = Table::new(&["x1_mm", "y1_mm", "x2_mm", "y2_mm", "r_mm", "antenna_length", "J_data_2piMHz", "J_fit_2piMHz"]);
    for s in &samples {
        let model = CouplingModel {
            j0: fit.j0,
            r_m: fit.r_m_for(s.a.antenna_length).unwrap_or(fixed.r_m),
            ..fixed
        };
        let jf = site_coupling(&s.a, &s.b, &model).unwrap_or(f64::NAN);
        t.push(vec![
            num(s.a.position[0]),
            num(s.a.position[1]),
            num(s.b.position[0]),
            num(s.b.position[1]),
            num(s.a.distance(&s.b)),
            num(s.a.antenna_length),
            num(s.coupling),
            num(jf),
        ]);
    }
    out.table("fit_samples.csv", &t)?;
    let result = json!({
        "j0_2piMHz_mm3": fit.j0,
        "r_m_mm": fit.r_m.iter().map(|(d, r)| json!({"antenna_length": d, "r_m_mm": r})).collect::<Vec<_>>(),
        "rms_residual_2piMHz": fit.rms_residual,
        "relative_residual": fit.relative_residual,
        "iterations": fit.iterations,
        "samples": samples.len(),
    });
    out.json("fit.json", &result)?;
    Ok(result)
}

fn run_circuit_extract(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let p = cfg.pair.as_ref().expect("validated");
    let params = cfg.circuit.unwrap_or_default().to_params();
    let model = cfg.model.unwrap_or_default().to_model();
    let a = cfg.site.unwrap_or_default().to_site()?;
    let (s, c) = p.direction_deg.to_radians().sin_cos();
    let lo = params.l_qubit * (1.0 - params.sweep);
    let hi = params.l_qubit * (1.0 + params.sweep);
    let mut t = Table::new(&[
        "separation_mm",
        "J_extracted_2piMHz",
        "gap_2piMHz",
        "crossing_L1_nH",
        "lambda12_2piMHz",
        "J_dispersive_2piMHz",
        "J_second_order_2piMHz",
        "J_model_2piMHz",
        "error",
    ]);
    let mut failures = 0usize;
    let mut records = Vec::new();
    for &r in &p.separations_mm {
        let b = a.translated(r * c, r * s);
        let j_model = site_coupling(&a, &b, &model).unwrap_or(f64::NAN);
        let spec = params.spec(&a, &b);
        let row = params.coupling(&a, &b).and_then(|e| {
            let net = build_network(&spec.with_l1(e.crossing_l1))?;
            let ej = [ej_from_inductance(e.crossing_l1), ej_from_inductance(params.l_qubit)];
            let q = quantize(&net, &ej)?;
            let (disp, second) = if params.cavity.is_some() {
                let eff = effective_coupling(&q, cavity_detunings(&q)?)?;
                (0.5 * (eff.j12 + eff.j21), second_order_coupling(&q)?)
            } else {
                (q.lambda[0][1], q.lambda[0][1])
            };
            Ok([e.j, e.gap, e.crossing_l1, q.lambda[0][1], disp, second])
        });
        let mut cells = vec![num(r)];
        match row {
            Ok(v) => {
                records.push(json!({
                    "separation_mm": r,
                    "J_2piMHz": v[0],
                    "gap_2piMHz": v[1],
                    "crossing_L1_nH": v[2],
                }));
                cells.extend(v.iter().map(|&x| num(x)));
                cells.push(num(j_model));
                cells.push(String::new());
            }
            Err(e) => {
                failures += 1;
                cells.extend((0..6).map(|_| num(f64::NAN)));
                cells.push(num(j_model));
                cells.push(e.to_string());
            }
        }
        t.push(cells);
    }
    out.table("circuit_extract.csv", &t)?;
    out.json("circuit_extract.json", &json!(records))?;
    let first = a.translated(p.separations_mm[0] * c, p.separations_mm[0] * s);
    let modes = mode_table(&params.spec(&a, &first), lo, hi, p.mode_table_rows)?;
    let width = modes.first().map_or(1, Vec::len);
    let mut header = vec!["L1_nH".to_string()];
    header.extend((0..width - 1).map(|k| format!("omega{k}_2piGHz")));
    let mut mt = Table::new(&header);
    for row in &modes {
        mt.push(row.iter().map(|&v| num(v)).collect());
    }
    out.table("mode_table.csv", &mt)?;
    Ok(json!({
        "separations": p.separations_mm.len(),
        "failures": failures,
        "sweep_nH": [lo, hi],
    }))
}

const SCAN_HEADER: [&str; 13] = [
    "J2_over_J1",
    "L",
    "E0_2piMHz",
    "E1_2piMHz",
    "Dz",
    "Dz_sum",
    "Dx",
    "Bz",
    "Bx",
    "Bzz",
    "chosen_bond_index",
    "mg_overlap",
    "degenerate",
];

struct ScanRow {
    e0: f64,
    e1: f64,
    report: BondReport,
    mg_overlap: f64,
    degenerate: bool,
}

fn clean_point(l: usize, j1: f64, ratio: f64) -> Result<ScanRow> {
    let (h, basis) = build_ladder_hamiltonian(l, j1, ratio * j1, &vec![0.0; l], Some(l / 2))?;
    let eig = ground_state(&h)?;
    let psi = eig.state(0, basis)?;
    let report = BondReport::measure(&psi, ratio)?;
    let mg = mg_product_state(l, Gauge::for_coupling(j1))?;
    Ok(ScanRow {
        e0: eig.values[0],
        e1: eig.values.get(1).copied().unwrap_or(f64::NAN),
        report,
        mg_overlap: psi.overlap_sq(&mg)?,
        degenerate: eig.degenerate,
    })
}

fn run_scan_j2(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    use rayon::prelude::*;
    let s = cfg.spin.expect("validated");
    let ratios = cfg
        .scan
        .as_ref()
        .and_then(|sc| sc.j2_over_j1.clone())
        .expect("validated");
    let d = cfg.disorder.unwrap_or_default();
    if d.spread > 0.0 || d.realizations > 1 {
        let result = disorder_scan(&ScanConfig {
            l: s.sites,
            j1: s.j1,
            j2_over_j1: ratios[0],
            axis: ScanAxis::CouplingRatio(ratios.clone()),
            disorder: DisorderSpec {
                mean: d.mean,
                spread: d.spread,
                realizations: d.realizations,
                master_seed: cfg.seed,
            },
        })?;
        result.write_csv(&out.dir.join("scan_j2.csv"))?;
        out.files.push("scan_j2.csv".into());
        return Ok(json!({ "rows": ratios.len(), "disordered": true }));
    }
    let rows: Vec<Result<ScanRow>> = ratios
        .par_iter()
        .map(|&r| {
            if d.mean == 0.0 {
                clean_point(s.sites, s.j1, r)
            } else {
                let (h, basis) =
                    build_ladder_hamiltonian(s.sites, s.j1, r * s.j1, &vec![d.mean; s.sites], Some(s.sites / 2))?;
                let eig = ground_state(&h)?;
                let psi = eig.state(0, basis)?;
                let mg = mg_product_state(s.sites, Gauge::for_coupling(s.j1))?;
                Ok(ScanRow {
                    e0: eig.values[0],
                    e1: eig.values.get(1).copied().unwrap_or(f64::NAN),
                    report: BondReport::measure(&psi, r)?,
                    mg_overlap: psi.overlap_sq(&mg)?,
                    degenerate: eig.degenerate,
                })
            }
        })
        .collect();
    let mut t = Table::new(&SCAN_HEADER);
    for row in rows {
        let row = row?;
        let b = row.report;
        t.push(vec![
            num(b.j2_over_j1),
            b.l.to_string(),
            num(row.e0),
            num(row.e1),
            num(b.dz),
            num(b.dz_sum),
            num(b.dx),
            num(b.bz),
            num(b.bx),
            num(b.bzz),
            b.chosen_bond_index.to_string(),
            num(row.mg_overlap),
            row.degenerate.to_string(),
        ]);
    }
    out.table("scan_j2.csv", &t)?;
    Ok(json!({ "rows": ratios.len(), "disordered": false }))
}

fn run_disorder_scan(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let s = cfg.spin.expect("validated");
    let sc = cfg.scan.as_ref().expect("validated");
    let d = cfg.disorder.expect("validated");
    let (axis, base) = match (&sc.j2_over_j1, &sc.delta_h) {
        (Some(r), _) => (ScanAxis::CouplingRatio(r.clone()), r[0]),
        (None, Some(h)) => (ScanAxis::Spread(h.clone()), s.ratio()?),
        _ => unreachable!("validated"),
    };
    let result = disorder_scan(&ScanConfig {
        l: s.sites,
        j1: s.j1,
        j2_over_j1: base,
        axis,
        disorder: DisorderSpec {
            mean: d.mean,
            spread: d.spread,
            realizations: d.realizations,
            master_seed: cfg.seed,
        },
    })?;
    result.write_csv(&out.dir.join("disorder_scan.csv"))?;
    out.files.push("disorder_scan.csv".into());
    if cfg.output.is_some_and(|o| o.per_realization) {
        result.write_realizations_csv(&out.dir.join("realizations.csv"))?;
        out.files.push("realizations.csv".into());
    }
    let fails = result.records.iter().filter(|r| r.error.is_some()).count();
    Ok(json!({
        "axis": result.axis,
        "points": result.points.len(),
        "realizations_per_point": d.realizations,
        "failures": fails,
    }))
}

fn run_ramp(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let rc = cfg.ramp_config()?;
    let noisy = !rc.noise.is_zero();
    let ens = ramp_ensemble(&rc, noisy)?;
    ens.mean.write_csv(&out.dir.join("ramp.csv"))?;
    out.files.push("ramp.csv".into());
    let opts = cfg.output.unwrap_or_default();
    if opts.per_realization {
        for (k, r) in ens.realizations.iter().enumerate() {
            if let Some(tr) = r {
                let name = format!("ramp_realization_{k:04}.csv");
                tr.write_csv(&out.dir.join(&name))?;
                out.files.push(name);
            }
        }
    }
    let last = ens.mean.last().expect("at least two samples");
    let mut summary = json!({
        "noisy": noisy,
        "duration": rc.schedule.duration,
        "duration_us": rc.schedule.duration / TAU,
        "dt": ens.mean.dt,
        "steps": ens.mean.steps,
        "realizations_ok": ens.n_ok(),
        "failures": ens.failures,
        "final_Bz": last.bz,
        "final_Bx": last.bx,
        "final_purity": last.purity,
    });
    if opts.noiseless_reference && noisy {
        let clean = ramp_ensemble(&rc, false)?;
        clean.mean.write_csv(&out.dir.join("ramp_noiseless.csv"))?;
        out.files.push("ramp_noiseless.csv".into());
        summary["noiseless_final_Bz"] = json!(clean.mean.last().map(|s| s.bz));
    }
    Ok(summary)
}

/// Name and one-line description of every kind.
pub fn list_experiments() -> Vec<(&'static str, &'static str)> {
    ExperimentKind::ALL
        .iter()
        .map(|k| (k.name(), k.description()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCAN: &str = r#"
kind = "scan-j2"
output_dir = "out"

[spin]
sites = 8
j1_2piMHz = -100.0

[scan]
j2_over_j1 = [0.1, 0.5]
"#;

    #[test]
    fn parses_and_validates() {
        let c = ExperimentConfig::from_toml_str(SCAN).unwrap();
        c.validate().unwrap();
        assert_eq!(c.kind, ExperimentKind::ScanJ2);
        let round = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(round, c);
        assert_eq!(c.hash().unwrap(), round.hash().unwrap());
    }

    #[test]
    fn missing_field_is_named() {
        let e = ExperimentConfig::from_toml_str(&SCAN.replace("j1_2piMHz = -100.0", "")).unwrap_err();
        assert!(e.to_string().contains("j1_2piMHz"), "{e}");
        let e = ExperimentConfig::from_toml_str(&SCAN.replace("sites", "size")).unwrap_err();
        assert!(e.to_string().contains("size"), "{e}");
    }

    #[test]
    fn oversized_rejected_before_work() {
        let c = ExperimentConfig::from_toml_str(&SCAN.replace("sites = 8", "sites = 40")).unwrap();
        let e = c.validate().unwrap_err();
        assert!(e.to_string().contains("spin.sites"), "{e}");
        let ramp = SCAN
            .replace("scan-j2", "ramp")
            .replace("[scan]\nj2_over_j1 = [0.1, 0.5]", "")
            .replace("sites = 8", "sites = 12\nj2_over_j1 = 0.5");
        let e = ExperimentConfig::from_toml_str(&ramp).unwrap().validate().unwrap_err();
        assert!(e.to_string().contains("ramp cap"), "{e}");
    }

    #[test]
    fn foreign_block_rejected() {
        let text = format!("{SCAN}\n[grid]\nx_min_mm = 0\nx_max_mm = 1\ny_min_mm = 0\ny_max_mm = 1\nnx = 2\nny = 2\n");
        let e = ExperimentConfig::from_toml_str(&text).unwrap().validate().unwrap_err();
        assert!(e.to_string().contains("grid"), "{e}");
    }

    #[test]
    fn quoted_field_extraction() {
        assert_eq!(quoted_field("missing field `j1_2piMHz`"), Some("j1_2piMHz"));
        assert_eq!(quoted_field("nothing here"), None);
    }
}
