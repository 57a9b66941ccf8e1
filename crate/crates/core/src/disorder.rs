//! Gaussian field disorder and ensemble-averaged bond-order scans.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ed::ground_state;
use crate::error::{Error, Result};
use crate::observables::BondReport;
use crate::output::{num, Table};
use crate::spin::build_ladder_hamiltonian;

/// Gaussian field distribution, energies in 2π·MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub mean: f64,
    /// Standard deviation δh.
    pub spread: f64,
    pub realizations: usize,
    pub master_seed: u64,
}

impl DisorderSpec {
    pub fn clean() -> Self {
        Self {
            mean: 0.0,
            spread: 0.0,
            realizations: 1,
            master_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(Error::config("disorder.mean", "must be finite"));
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            return Err(Error::config("disorder.spread", "must be finite and ≥ 0"));
        }
        if self.realizations == 0 {
            return Err(Error::config("disorder.realizations", "must be ≥ 1"));
        }
        Ok(())
    }

    pub fn with_spread(self, spread: f64) -> Self {
        Self { spread, ..self }
    }
}

/// Standard normal deviates for one realization.
///
/// The generator is seeded with the master seed and positioned on stream
/// `realization`; site `j` is the `j`-th draw of that stream. The same
/// deviates are reused for every spread, so spread sweeps share noise.
pub fn standard_deviates(master_seed: u64, realization: u64, l: usize) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(realization);
    (0..l).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `h_j = mean + spread·z_j`.
pub fn sample_fields(spec: &DisorderSpec, l: usize, realization: u64) -> Vec<f64> {
    if spec.spread == 0.0 {
        return vec![spec.mean; l];
    }
    standard_deviates(spec.master_seed, realization, l)
        .into_iter()
        .map(|z| spec.mean + spec.spread * z)
        .collect()
}

/// Quantities tracked by a scan.
pub const SCAN_OBSERVABLES: [&str; 6] = ["Dz", "Dx", "Bz", "Bx", "Bzz", "abs_Bz"];

fn observable_values(r: &BondReport) -> [f64; 6] {
    [r.dz, r.dx, r.bz, r.bx, r.bzz, r.bz.abs()]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum ScanAxis {
    /// `J2/J1` grid at the configured spread.
    CouplingRatio(Vec<f64>),
    /// Spread grid (2π·MHz) at the base coupling ratio.
    Spread(Vec<f64>),
}

impl ScanAxis {
    pub fn name(&self) -> &'static str {
        match self {
            Self::CouplingRatio(_) => "J2_over_J1",
            Self::Spread(_) => "delta_h",
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Self::CouplingRatio(v) | Self::Spread(v) => v,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScanConfig {
    pub l: usize,
    pub j1: f64,
    pub j2_over_j1: f64,
    pub axis: ScanAxis,
    pub disorder: DisorderSpec,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        self.disorder.validate()?;
        if self.l < 4 || !self.l.is_multiple_of(2) {
            return Err(Error::config("l", "must be even and ≥ 4"));
        }
        if !(self.j1.is_finite() && self.j1 != 0.0) {
            return Err(Error::config("j1", "must be finite and nonzero"));
        }
        if self.axis.values().is_empty() {
            return Err(Error::config("axis", "empty grid"));
        }
        if self.axis.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::config("axis", "non-finite grid value"));
        }
        if let ScanAxis::Spread(v) = &self.axis {
            if v.iter().any(|&s| s < 0.0) {
                return Err(Error::config("axis", "negative spread"));
            }
        }
        Ok(())
    }

    fn point(&self, axis_value: f64) -> (f64, DisorderSpec) {
        match self.axis {
            ScanAxis::CouplingRatio(_) => (axis_value, self.disorder),
            ScanAxis::Spread(_) => (self.j2_over_j1, self.disorder.with_spread(axis_value)),
        }
    }
}

/// Outcome of one disorder realization.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RealizationRecord {
    pub axis_value: f64,
    pub realization: u64,
    pub report: Option<BondReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ObservableStat {
    pub mean: f64,
    /// Sample standard deviation over `√n_ok`.
    pub stderr: f64,
    pub n_ok: usize,
    pub n_fail: usize,
}

impl ObservableStat {
    pub fn from_samples(samples: &[f64], n_fail: usize) -> Self {
        let n = samples.len();
        let mean = if n == 0 {
            f64::NAN
        } else {
            samples.iter().sum::<f64>() / n as f64
        };
        let stderr = if n < 2 {
            0.0
        } else {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self {
            mean,
            stderr,
            n_ok: n,
            n_fail,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScanPoint {
    pub axis_value: f64,
    /// Ordered as [`SCAN_OBSERVABLES`].
    pub stats: Vec<ObservableStat>,
}

impl ScanPoint {
    pub fn stat(&self, name: &str) -> Option<&ObservableStat> {
        SCAN_OBSERVABLES
            .iter()
            .position(|o| *o == name)
            .map(|i| &self.stats[i])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScanResult {
    pub axis: String,
    pub points: Vec<ScanPoint>,
    pub records: Vec<RealizationRecord>,
}

impl ScanResult {
    /// Long format: `axis_value, observable, mean, stderr, n_ok, n_fail`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut t = Table::new(&["axis_value", "observable", "mean", "stderr", "n_ok", "n_fail"]);
        for p in &self.points {
            for (name, s) in SCAN_OBSERVABLES.iter().zip(&p.stats) {
                t.push(vec![
                    num(p.axis_value),
                    name.to_string(),
                    num(s.mean),
                    num(s.stderr),
                    s.n_ok.to_string(),
                    s.n_fail.to_string(),
                ]);
            }
        }
        t.write(path)
    }

    /// One row per realization with every bond observable, or the error.
    pub fn write_realizations_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["axis_value", "realization"];
        header.extend(SCAN_OBSERVABLES);
        header.push("chosen_bond_index");
        header.push("error");
        let mut t = Table::new(&header);
        for r in &self.records {
            let mut row = vec![num(r.axis_value), r.realization.to_string()];
            match &r.report {
                Some(rep) => {
                    row.extend(observable_values(rep).iter().map(|&v| num(v)));
                    row.push(rep.chosen_bond_index.to_string());
                    row.push(String::new());
                }
                None => {
                    row.extend((0..SCAN_OBSERVABLES.len() + 1).map(|_| String::new()));
                    row.push(r.error.clone().unwrap_or_default());
                }
            }
            t.push(row);
        }
        t.write(path)
    }
}

/// Ground-state bond report in the half-filled sector for one field vector.
pub fn solve_realization(l: usize, j1: f64, ratio: f64, fields: &[f64]) -> Result<BondReport> {
    let (h, basis) = build_ladder_hamiltonian(l, j1, ratio * j1, fields, Some(l / 2))?;
    let eig = ground_state(&h)?;
    let psi = eig.state(0, basis)?;
    BondReport::measure(&psi, ratio)
}

/// Per grid point: sample fields, solve, measure, aggregate in realization order.
pub fn disorder_scan(cfg: &ScanConfig) -> Result<ScanResult> {
    cfg.validate()?;
    let mut points = Vec::new();
    let mut records = Vec::new();
    for &x in cfg.axis.values() {
        let (ratio, spec) = cfg.point(x);
        let recs: Vec<RealizationRecord> = (0..spec.realizations as u64)
            .into_par_iter()
            .map(|k| {
                let h = sample_fields(&spec, cfg.l, k);
                match solve_realization(cfg.l, cfg.j1, ratio, &h) {
                    Ok(r) => RealizationRecord {
                        axis_value: x,
                        realization: k,
                        report: Some(r),
                        error: None,
                    },
                    Err(e) => RealizationRecord {
                        axis_value: x,
                        realization: k,
                        report: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect();
        let ok: Vec<[f64; 6]> = recs
            .iter()
            .filter_map(|r| r.report.as_ref().map(observable_values))
            .collect();
        let n_fail = recs.len() - ok.len();
        let stats = (0..SCAN_OBSERVABLES.len())
            .map(|i| {
                let s: Vec<f64> = ok.iter().map(|v| v[i]).collect();
                ObservableStat::from_samples(&s, n_fail)
            })
            .collect();
        points.push(ScanPoint {
            axis_value: x,
            stats,
        });
        records.extend(recs);
    }
    Ok(ScanResult {
        axis: cfg.axis.name().to_string(),
        points,
        records,
    })
}
