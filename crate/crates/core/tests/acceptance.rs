//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported, never asserted, so the run always
//! completes. Set `DIPOLAR_ACCEPTANCE_REALIZATIONS` to shorten the noisy
//! ramp ensemble during development; below 200 realizations criterion 4
//! cannot pass.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use dipolar_core::circuit::{
    build_network, cavity_detunings, circuit_coupling_map, effective_coupling, ej_from_inductance, extract_spec_coupling, quantize,
    second_order_coupling, CavityBranch, CircuitParams, CircuitSpec, QubitCoupling,
};
use dipolar_core::coupling::{
    cut_sign_changes, fit_dipole_model, site_coupling, zero_coupling_distance, CouplingModel,
    FitSample, MapGrid, PairOrientation,
};
use dipolar_core::disorder::{disorder_scan, DisorderSpec, ScanAxis, ScanConfig};
use dipolar_core::ed::{ground_state, low_spectrum_with, EdOptions};
use dipolar_core::geometry::{pair_geometry, QubitSite};
use dipolar_core::lindblad::{
    evolve, evolve_pure, ramp_ensemble, tuned_ramp, uniform_times, EvolveOptions, NoiseParams, RampConfig,
    RampSchedule,
};
use dipolar_core::observables::BondReport;
use dipolar_core::spin::{
    build_ladder_hamiltonian, mg_product_state, Basis, DensityMatrix, Gauge, PureState, SparseOperator,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIMER_REL_TOL: f64 = 0.10;
const DIMER_RATIO_MIN: f64 = 2.0;
const MG_OVERLAP_MIN: f64 = 0.99;
const DISORDER_FRACTION: f64 = 0.8;
const DISORDER_SIGMAS: f64 = 2.0;
const DISORDER_REALIZATIONS: usize = 500;
const DISORDER_SEED: u64 = 2024;
const RAMP_REL_TOL: f64 = 0.05;
const RAMP_MIN_REALIZATIONS: usize = 200;
const RAMP_SEED: u64 = 7;
const FIT_REL_TOL: f64 = 1e-8;
const LAMBDA_REL_TOL: f64 = 0.02;
const HEFF_REL_TOL: f64 = 0.05;
const DISPERSIVE_MAX: f64 = 0.05;
const CLOSED_FORM_TOL: f64 = 1e-6;
const TRACE_TOL: f64 = 1e-7;
const HALVING_TOL: f64 = 1e-6;
const LANCZOS_TOL: f64 = 1e-9;

/// 2π·MHz
const J1: f64 = 100.0;

struct Line {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(l: &Line, secs: f64) {
    println!(
        "{} [{}] {}: {} ({:.1} s)",
        if l.pass { "PASS" } else { "FAIL" },
        l.id,
        l.name,
        l.detail,
        secs
    );
}

fn failed(id: u32, name: &'static str, e: impl std::fmt::Display) -> Line {
    Line {
        id,
        name,
        pass: false,
        detail: format!("error: {e}"),
    }
}

type Res<T> = Result<T, Box<dyn std::error::Error>>;

fn clean_report(l: usize, ratio: f64) -> Res<(BondReport, PureState)> {
    let (h, basis) = build_ladder_hamiltonian(l, J1, ratio * J1, &vec![0.0; l], Some(l / 2))?;
    let psi = ground_state(&h)?.state(0, basis)?;
    Ok((BondReport::measure(&psi, ratio)?, psi))
}

fn dimer_phase() -> Res<Line> {
    let (mg, _) = clean_report(8, 0.5)?;
    let (sf, _) = clean_report(8, 0.1)?;
    let rel = (mg.dz.abs() - mg.bz.abs()).abs() / mg.bz.abs();
    let per_dimer = mg.dz_sum / 4.0;
    let rel_dimer = (per_dimer.abs() - mg.bz.abs()).abs() / mg.bz.abs();
    let ratio = mg.bz.abs() / sf.bz.abs();
    let pass = rel <= DIMER_REL_TOL && ratio >= DIMER_RATIO_MIN;
    Ok(Line {
        id: 1,
        name: "dimer-phase signature, L=8",
        pass,
        detail: format!(
            "|Dz-Bz|/|Bz| = {rel:.4} with Dz = sum/(L-1) (tol {DIMER_REL_TOL}); \
             per-dimer sum/(L/2) gives {rel_dimer:.2e}; |Bz(0.5)|/|Bz(0.1)| = {ratio:.4} \
             (need >= {DIMER_RATIO_MIN}); Dz = {:.6}, Bz = {:.6}, Bz(0.1) = {:.6}",
            mg.dz, mg.bz, sf.bz
        ),
    })
}

fn mg_overlap() -> Res<Line> {
    let (h, basis) = build_ladder_hamiltonian(8, J1, 0.5 * J1, &[0.0; 8], Some(4))?;
    let dense = h.to_dense_real().symmetric_eigen();
    let k = dense.eigenvalues.imin();
    let v = dense.eigenvectors.column(k);
    let psi = PureState::new(basis, v.iter().map(|&x| Complex64::new(x, 0.0)).collect())?;
    let mg = mg_product_state(8, Gauge::for_coupling(J1))?;
    let ov = psi.overlap_sq(&mg)?;
    let mut sorted: Vec<f64> = dense.eigenvalues.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let lanczos = ground_state(&h)?;
    let pass = ov >= MG_OVERLAP_MIN && (lanczos.values[0] - sorted[0]).abs() < 1e-9 * sorted[0].abs();
    Ok(Line {
        id: 2,
        name: "MG-state overlap, L=8, J2/J1=0.5",
        pass,
        detail: format!(
            "|<MG|psi0>|^2 = {ov:.12} from dense diagonalization (threshold {MG_OVERLAP_MIN}); \
             E0 = {:.10}, gap = {:.6}, sparse E0 = {:.10}",
            sorted[0],
            sorted[1] - sorted[0],
            lanczos.values[0]
        ),
    })
}

fn disorder_robustness() -> Res<Line> {
    let spreads = vec![0.0, 0.1 * J1, 0.2 * J1, 0.3 * J1, 0.45 * J1];
    let res = disorder_scan(&ScanConfig {
        l: 10,
        j1: J1,
        j2_over_j1: 0.5,
        axis: ScanAxis::Spread(spreads.clone()),
        disorder: DisorderSpec {
            mean: 0.0,
            spread: 0.0,
            realizations: DISORDER_REALIZATIONS,
            master_seed: DISORDER_SEED,
        },
    })?;
    let stats: Vec<_> = res.points.iter().map(|p| *p.stat("abs_Bz").expect("abs_Bz")).collect();
    let clean = stats[0].mean;
    let at03 = stats[3];
    let weak_ok = at03.mean >= DISORDER_FRACTION * clean;
    // Monotone within error bars over the 0.1 … 0.45 sweep.
    let mut mono = true;
    for w in stats[1..].windows(2) {
        let tol = DISORDER_SIGMAS * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        if w[1].mean > w[0].mean + tol {
            mono = false;
        }
    }
    let fails: usize = stats.iter().map(|s| s.n_fail).sum();
    let listing: Vec<String> = spreads
        .iter()
        .zip(&stats)
        .map(|(d, s)| format!("{:.2}:{:.5}±{:.5}", d / J1, s.mean, s.stderr))
        .collect();
    Ok(Line {
        id: 3,
        name: "disorder robustness, L=10, J2/J1=0.5, N=500",
        pass: weak_ok && mono && fails == 0,
        detail: format!(
            "mean|Bz|(0.3 J1) = {:.5} vs {DISORDER_FRACTION} x clean {:.5}; monotone within {DISORDER_SIGMAS} se: {mono}; \
             dh/J1:mean±se {}; failed realizations {fails}",
            at03.mean,
            clean,
            listing.join(" ")
        ),
    })
}

fn ramp_realizations() -> usize {
    std::env::var("DIPOLAR_ACCEPTANCE_REALIZATIONS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(RAMP_MIN_REALIZATIONS)
}

fn ramp_config(ratio: f64, n: usize) -> Res<RampConfig> {
    let l = 6;
    let mut cfg = RampConfig::new(l, J1, ratio * J1, NoiseParams::from_khz(l, 100.0, 100.0))?;
    cfg.disorder = DisorderSpec {
        mean: 0.0,
        spread: 0.25 * J1,
        realizations: n,
        master_seed: RAMP_SEED,
    };
    cfg.samples = 11;
    cfg.options.check_positivity = false;
    Ok(cfg)
}

fn adiabatic_ramp() -> Res<Line> {
    let n = ramp_realizations();
    let cfg = ramp_config(0.5, n)?;
    let clean = ramp_ensemble(&cfg, false)?;
    let noisy = ramp_ensemble(&cfg, true)?;
    let c = clean.mean.last().expect("samples");
    let z = noisy.mean.last().expect("samples");
    let dz = (z.bz.abs() - c.bz.abs()).abs() / c.bz.abs();
    let dx = (z.bx.abs() - c.bx.abs()).abs() / c.bx.abs();
    let contrast_cfg = ramp_config(0.2, n)?;
    let contrast = ramp_ensemble(&contrast_cfg, false)?;
    let k = contrast.mean.last().expect("samples");
    let mg_value = 0.25;
    let contrast_ok = k.bz.abs() < 0.5 * mg_value;
    let pass = n >= RAMP_MIN_REALIZATIONS
        && dz <= RAMP_REL_TOL
        && dx <= RAMP_REL_TOL
        && contrast_ok
        && noisy.failures.is_empty();
    Ok(Line {
        id: 4,
        name: "adiabatic preparation with decoherence, L=6",
        pass,
        detail: format!(
            "{n} realizations (need >= {RAMP_MIN_REALIZATIONS}), T = {:.4} us; noiseless |Bz| = {:.5}, |Bx| = {:.5}; \
             noisy |Bz| = {:.5}, |Bx| = {:.5}, purity {:.4}; relative shifts {dz:.4}, {dx:.4} (tol {RAMP_REL_TOL}); \
             contrast J2/J1=0.2: |Bz| = {:.5}, |Bx| = {:.5} (need |Bz| < {:.3}: {contrast_ok}); failures {}",
            cfg.schedule.duration / (2.0 * PI),
            c.bz.abs(),
            c.bx.abs(),
            z.bz.abs(),
            z.bx.abs(),
            z.purity,
            k.bz.abs(),
            k.bx.abs(),
            0.5 * mg_value,
            noisy.failures.len()
        ),
    })
}

fn coupling_law() -> Res<Line> {
    let m = CouplingModel::reference().without_cavity();
    let r: f64 = 1.7;
    let base = m.j0 / (r - m.r_m).powi(3);
    let a = QubitSite::at(0.0, 0.0, PI / 2.0)?;
    let parallel = site_coupling(&a, &QubitSite::at(r, 0.0, PI / 2.0)?, &m)? / base;
    let collinear = site_coupling(&a, &QubitSite::at(0.0, r, PI / 2.0)?, &m)? / base;
    let magic = (1.0f64 / 3.0).sqrt().acos();
    let b = QubitSite::at(r * magic.sin(), r * magic.cos(), PI / 2.0)?;
    let magic_factor = pair_geometry(&a, &b)?.angular_factor();
    let angles_ok = (parallel + 1.0).abs() < 1e-12 && (collinear - 2.0).abs() < 1e-12 && magic_factor.abs() < 1e-12;

    let full = CouplingModel::reference();
    let orient = PairOrientation::side_by_side();
    let r0 = zero_coupling_distance(&full, &orient, 20.0)?;
    let bracket_ok = match r0 {
        Some(r0) => {
            let j = |r: f64| -> Res<f64> {
                Ok(site_coupling(&a, &QubitSite::at(r, 0.0, PI / 2.0)?, &full)?)
            };
            let pts: Vec<f64> = (0..=20).map(|i| r0 - 0.5 + 0.05 * i as f64).collect();
            let vals = pts.iter().map(|&r| j(r)).collect::<Res<Vec<f64>>>()?;
            let monotone = vals.windows(2).all(|w| w[1] > w[0]);
            monotone && vals[0] < 0.0 && vals[20] > 0.0
        }
        None => false,
    };

    let truth = CouplingModel::reference();
    let mut samples = Vec::new();
    for (d, r_m) in [(1.0, 0.25), (1.4, 0.4)] {
        let model = CouplingModel { r_m, ..truth };
        for ang in [0.0f64, 30.0, 60.0, 90.0] {
            for r in [0.9, 1.2, 1.6, 2.2, 3.0] {
                let a = QubitSite::new([0.0, 0.0], PI / 2.0, d, PI / 2.0)?;
                let t = ang.to_radians();
                let b = a.translated(r * t.cos(), r * t.sin());
                samples.push(FitSample {
                    a,
                    b,
                    coupling: site_coupling(&a, &b, &model)?,
                });
            }
        }
    }
    let fit = fit_dipole_model(&samples, &truth)?;
    let err_j0 = (fit.j0 - truth.j0).abs() / truth.j0;
    let err_r1 = (fit.r_m_for(1.0).unwrap_or(f64::NAN) - 0.25).abs() / 0.25;
    let err_r2 = (fit.r_m_for(1.4).unwrap_or(f64::NAN) - 0.4).abs() / 0.4;
    let fit_err = err_j0.max(err_r1).max(err_r2);
    let fit_ok = fit_err < FIT_REL_TOL;
    Ok(Line {
        id: 5,
        name: "coupling law",
        pass: angles_ok && bracket_ok && fit_ok,
        detail: format!(
            "J/(J0/(r-r_m)^3): parallel {parallel:.15}, collinear {collinear:.15}, magic-angle factor {magic_factor:.1e}; \
             zero of J(r) at {} mm, monotone sign-changing bracket: {bracket_ok}; \
             fit round-trip max relative error {fit_err:.2e} (tol {FIT_REL_TOL:.0e})",
            r0.map_or("none".to_string(), |r| format!("{r:.6}"))
        ),
    })
}

fn two_node(cq: f64, cavity: Option<CavityBranch>) -> CircuitSpec {
    CircuitSpec {
        c: [70.0, 70.0],
        l: [10.0, 10.0],
        coupling: QubitCoupling::Direct { c_q: cq },
        cavity,
    }
}

fn quantized_at(spec: &CircuitSpec, l1: f64) -> Res<dipolar_core::circuit::QuantizedCircuit> {
    let net = build_network(&spec.with_l1(l1))?;
    Ok(quantize(&net, &[ej_from_inductance(l1), ej_from_inductance(spec.l[1])])?)
}

/// Total-least-squares line through the points; largest perpendicular distance.
fn line_deviation(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0] / n, b + p[1] / n));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (s, c) = theta.sin_cos();
    pts.iter()
        .map(|p| ((p[0] - mx) * s - (p[1] - my) * c).abs())
        .fold(0.0, f64::max)
}

fn circuit_oracles() -> Res<Line> {
    // Weak direct coupling without cavity against λ12.
    let mut lam_err: f64 = 0.0;
    for cq in [0.07, 0.35, 0.7] {
        let spec = two_node(cq, None);
        let e = extract_spec_coupling(&spec, 8.0, 12.0)?;
        let q = quantized_at(&spec, e.crossing_l1)?;
        lam_err = lam_err.max((e.j - q.lambda[0][1]).abs() / q.lambda[0][1].abs());
    }
    // Dispersive cavity against the effective-coupling formula.
    let mut heff_err: f64 = 0.0;
    let mut so_err: f64 = 0.0;
    let mut worst_eps: f64 = 0.0;
    for cq in [0.0, 0.35, 0.7] {
        for c0 in [2.0, 3.0, 4.0] {
            let spec = two_node(
                cq,
                Some(CavityBranch {
                    c0,
                    c: 300.0,
                    l: 1.5,
                }),
            );
            let e = extract_spec_coupling(&spec, 8.0, 12.0)?;
            let q = quantized_at(&spec, e.crossing_l1)?;
            let eff = effective_coupling(&q, cavity_detunings(&q)?)?;
            let eps = eff.epsilon[0].abs().max(eff.epsilon[1].abs());
            if eps > DISPERSIVE_MAX {
                continue;
            }
            worst_eps = worst_eps.max(eps);
            heff_err = heff_err.max((e.j - eff.j12).abs() / e.j.abs());
            so_err = so_err.max((e.j - second_order_coupling(&q)?).abs() / e.j.abs());
        }
    }
    // Zero locus without the cavity: one quadrant, compared with a straight line.
    let params = CircuitParams::reference();
    let fixed = QubitSite::at(0.0, 0.0, PI / 2.0)?;
    let grid = MapGrid {
        x_min: 0.0,
        x_max: 4.0,
        y_min: 0.0,
        y_max: 4.0,
        nx: 41,
        ny: 41,
    };
    let nocav = circuit_coupling_map(&fixed, &grid, &params.without_cavity(), 0.8)?;
    let cell = grid.cell().0.max(grid.cell().1);
    let pts: Vec<[f64; 2]> = nocav.contour.iter().copied().filter(|p| p[0] > 0.0 && p[1] > 0.0).collect();
    let dev = if pts.len() >= 3 { line_deviation(&pts) } else { f64::INFINITY };
    let angle = pts
        .iter()
        .map(|p| p[1].atan2(p[0]).to_degrees())
        .sum::<f64>()
        / pts.len().max(1) as f64;
    // Cut at y = 1 mm with the cavity, moving outward from the fixed qubit.
    let cut: Vec<f64> = (0..=200)
        .map(|i| {
            let x = 5.0 * i as f64 / 200.0;
            Ok(params.coupling(&fixed, &QubitSite::at(x, 1.0, PI / 2.0)?)?.j)
        })
        .collect::<Res<Vec<f64>>>()?;
    let changes = cut_sign_changes(&cut);
    let pass = lam_err <= LAMBDA_REL_TOL && heff_err <= HEFF_REL_TOL && dev < cell && changes == 2;
    Ok(Line {
        id: 6,
        name: "circuit-model oracle equivalence",
        pass,
        detail: format!(
            "extraction vs lambda12 (C_Q/C1 <= 0.01): {lam_err:.2e} (tol {LAMBDA_REL_TOL}); \
             extraction vs lambda12 + lambda1R lambda2R/(2 Delta) at |lambda/Delta| <= {worst_eps:.3}: {heff_err:.3} \
             (tol {HEFF_REL_TOL}); counter-rotating second order: {so_err:.2e}; \
             no-cavity zero locus max line deviation {dev:.3} mm vs cell {cell:.3} mm ({} points, mean angle {angle:.1} deg); \
             y = 1 mm cut sign changes on 0..5 mm: {changes} (need 2)",
            pts.len()
        ),
    })
}

fn closed_forms() -> Res<f64> {
    let basis = Arc::new(Basis::full(1)?);
    let h = SparseOperator::zeros(2);
    let t_end = 10.0;
    let times = uniform_times(t_end, 11);
    let sched = RampSchedule::idle(1, t_end)?;
    let (kappa, gamma) = (0.3, 0.2);
    let up = DensityMatrix::from_pure(&PureState::product(basis.clone(), 1)?);
    let (tr, _) = evolve(&up, &h, &sched, &NoiseParams::uniform(1, kappa, 0.0), &times, &EvolveOptions::default())?;
    let mut err: f64 = 0.0;
    for (t, m) in tr.times.iter().zip(&tr.mean_sz) {
        err = err.max((m - ((-kappa * t).exp() - 0.5)).abs());
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = PureState::new(basis, vec![Complex64::new(s, 0.0); 2])?;
    let rho0 = DensityMatrix::from_pure(&plus);
    let noise = NoiseParams::uniform(1, 0.0, gamma);
    for &t in &times[1..] {
        let idle = RampSchedule::idle(1, t)?;
        let (_, rho) = evolve(&rho0, &h, &idle, &noise, &[t], &EvolveOptions::default())?;
        let coh = rho.matrix()[(0, 1)].re;
        err = err.max((coh - 0.5 * (-0.5 * gamma * t).exp()).abs());
    }
    Ok(err)
}

fn full_ramp_invariants() -> Res<(f64, f64)> {
    let l = 6;
    let (h, _) = build_ladder_hamiltonian(l, J1, 0.5 * J1, &vec![0.0; l], None)?;
    let sched = tuned_ramp(l, J1)?;
    let rho0 = DensityMatrix::from_pure(&PureState::all_down(Arc::new(Basis::full(l)?))?);
    let times = uniform_times(sched.duration, 21);
    let (tr, _) = evolve(&rho0, &h, &sched, &NoiseParams::from_khz(l, 100.0, 100.0), &times, &EvolveOptions::default())?;
    let trace = tr.trace.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max);
    let min_eig = tr.min_eigenvalue.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((trace, min_eig))
}

fn step_halving() -> Res<f64> {
    let l = 6;
    let (h, _) = build_ladder_hamiltonian(l, J1, 0.5 * J1, &vec![0.0; l], None)?;
    let sched = tuned_ramp(l, J1)?;
    let psi0 = PureState::all_down(Arc::new(Basis::full(l)?))?;
    let times = [sched.duration];
    let (a, _) = evolve_pure(&psi0, &h, &sched, &times, &EvolveOptions::default())?;
    let opts = EvolveOptions {
        dt: Some(a.dt / 2.0),
        ..EvolveOptions::default()
    };
    let (b, _) = evolve_pure(&psi0, &h, &sched, &times, &opts)?;
    let (x, y) = (a.last().expect("sample"), b.last().expect("sample"));
    Ok((x.bz - y.bz).abs().max((x.bx - y.bx).abs()).max((x.mean_sz - y.mean_sz).abs()))
}

fn lanczos_vs_dense() -> Res<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for dim in [40, 120, 300] {
        let mut entries = Vec::new();
        for i in 0..dim {
            entries.push((i, i, Complex64::new(rng.random_range(-1.0..1.0), 0.0)));
            for _ in 0..4 {
                let j = rng.random_range(0..dim);
                if j > i {
                    let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    entries.push((i, j, v));
                    entries.push((j, i, v.conj()));
                }
            }
        }
        let h = SparseOperator::hermitian_from_triplets(dim, entries)?;
        let opts = EdOptions {
            force_lanczos: true,
            ..EdOptions::default()
        };
        let sparse = low_spectrum_with(&h, 3, &opts)?;
        let dense: DMatrix<Complex64> = h.to_dense();
        let mut ev: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for k in 0..3 {
            worst = worst.max((sparse.values[k] - ev[k]).abs());
        }
    }
    Ok(worst)
}

fn sector_and_gauge() -> Res<(bool, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let fields: Vec<f64> = (0..8).map(|_| rng.random_range(-30.0..30.0)).collect();
    let (h, basis) = build_ladder_hamiltonian(8, J1, 0.4 * J1, &fields, None)?;
    let conserved = h.conserves_excitations(&basis);
    let (hp, bp) = build_ladder_hamiltonian(8, J1, 0.4 * J1, &fields, Some(4))?;
    let (hm, _) = build_ladder_hamiltonian(8, -J1, 0.4 * J1, &fields, Some(4))?;
    let psi = ground_state(&hp)?.state(0, bp)?;
    let e_plus = psi.energy(&hp)?;
    let e_gauged = psi.sublattice_gauge().energy(&hm)?;
    let e_minus = ground_state(&hm)?.values[0];
    Ok((conserved, (e_plus - e_gauged).abs().max((e_plus - e_minus).abs())))
}

fn hygiene() -> Res<Line> {
    let cf = closed_forms()?;
    let (trace, min_eig) = full_ramp_invariants()?;
    let halving = step_halving()?;
    let lanczos = lanczos_vs_dense()?;
    let (conserved, gauge) = sector_and_gauge()?;
    let pass = cf <= CLOSED_FORM_TOL
        && trace <= TRACE_TOL
        && min_eig >= -TRACE_TOL
        && halving < HALVING_TOL
        && lanczos <= LANCZOS_TOL
        && conserved
        && gauge < 1e-9;
    Ok(Line {
        id: 7,
        name: "numerical hygiene",
        pass,
        detail: format!(
            "single-spin closed forms {cf:.2e} (tol {CLOSED_FORM_TOL:.0e}); full noisy ramp L=6 max|tr-1| {trace:.2e}, \
             min eigenvalue {min_eig:.2e} (tol {TRACE_TOL:.0e}); step halving {halving:.2e} (tol {HALVING_TOL:.0e}); \
             Lanczos vs dense {lanczos:.2e} (tol {LANCZOS_TOL:.0e}); excitation number conserved: {conserved}; \
             sublattice gauge J1 -> -J1 energy mismatch {gauge:.2e}"
        ),
    })
}

fn main() {
    let criteria: [(u32, &'static str, fn() -> Res<Line>); 7] = [
        (1, "dimer-phase signature, L=8", dimer_phase),
        (2, "MG-state overlap, L=8, J2/J1=0.5", mg_overlap),
        (3, "disorder robustness, L=10, J2/J1=0.5, N=500", disorder_robustness),
        (4, "adiabatic preparation with decoherence, L=6", adiabatic_ramp),
        (5, "coupling law", coupling_law),
        (6, "circuit-model oracle equivalence", circuit_oracles),
        (7, "numerical hygiene", hygiene),
    ];
    let only: Option<Vec<u32>> = std::env::var("DIPOLAR_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    println!("acceptance report");
    let mut passed = 0;
    let mut total = 0;
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let line = f().unwrap_or_else(|e| failed(id, name, e));
        report(&line, start.elapsed().as_secs_f64());
        total += 1;
        passed += line.pass as usize;
    }
    println!("acceptance summary: {passed}/{total} criteria pass");
}
