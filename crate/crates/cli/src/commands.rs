use std::fs;
use std::sync::Arc;

use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use cns_core::analysis::{
    commutator_check, convolution_bound_check, energy, energy_norm_sq, gn_exponent, hardy_check, high_freq_energy,
    CheckReport, ConvolutionBoundCase, Lebesgue,
};
use cns_core::nonlinear::{initial_state, uniform_times, Diagnostics, Integrator, NonlinearContext, SourceMode, Trajectory};
use cns_core::params::validate;
use cns_core::semigroup::{log_times, optimal_rate, radial_decay_norms, RadialQuadrature};
use cns_core::spectral::{frequency_split, random_smooth_scalar, Complex64};
use cns_core::stationary::{max_residual, solve_stationary, StationaryState};
use cns_core::{derive_coefficients, fieldio::FieldFile, Error, Grid, RadialProfile, SpectralField, VERSION};

use crate::config::RunConfig;

/// Process exit status of a finished command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    GateFailed = 1,
    Degenerate = 3,
}

fn write_manifest(cfg: &RunConfig, command: &str) -> Result<()> {
    let manifest = json!({
        "command": command,
        "version": VERSION,
        "seed": cfg.seed,
        "config": cfg.resolved,
    });
    fs::write(cfg.output("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn linear_decay(cfg: &RunConfig) -> Result<Status> {
    cfg.prepare_output()?;
    write_manifest(cfg, "linear-decay")?;
    let coeffs = derive_coefficients(&cfg.params, &cfg.law)?;
    let lin = &cfg.linear;
    let quad = RadialQuadrature::graded(&coeffs, lin.t_max, lin.r_max)?;
    let amplitude = if lin.zero_profile { [0.0; 4] } else { [1.0; 4] };
    let profile = RadialProfile::step(quad, lin.radius, amplitude);
    let times = log_times(lin.t_min, lin.t_max, lin.samples);
    let series = radial_decay_norms(&coeffs, &profile, &times)?;
    fs::write(cfg.output("decay.csv"), series.to_csv())?;

    if series.is_zero() {
        fs::write(cfg.output("slopes.json"), "")?;
        eprintln!("degenerate series: every norm is zero, slope fit skipped");
        return Ok(Status::Degenerate);
    }
    let mut lines = String::new();
    let mut status = Status::Pass;
    for k in 0..4 {
        let fit = match series.fit(k, [lin.t_min, lin.t_max]) {
            Ok(fit) => fit,
            Err(e @ Error::DegenerateSeries(_)) => {
                eprintln!("{e}");
                return Ok(Status::Degenerate);
            }
            Err(e) => return Err(e.into()),
        };
        let target = optimal_rate(k);
        let ok = (fit.slope - target).abs() < cfg.tolerance;
        if !ok {
            status = Status::GateFailed;
        }
        println!(
            "{} k={k} slope {:.4} target {target:.2} residual {:.2e}",
            if ok { "PASS" } else { "FAIL" },
            fit.slope,
            fit.residual
        );
        lines.push_str(&serde_json::to_string(&fit)?);
        lines.push('\n');
    }
    fs::write(cfg.output("slopes.json"), lines)?;
    Ok(status)
}

fn stationary_state(cfg: &RunConfig) -> Result<StationaryState> {
    Ok(solve_stationary(&cfg.law, &cfg.params, &cfg.potential)?)
}

fn trajectory_csv(samples: Vec<Diagnostics>, final_state: SpectralField) -> String {
    Trajectory { samples, final_state }.to_csv()
}

pub fn nonlinear(cfg: &RunConfig) -> Result<Status> {
    cfg.prepare_output()?;
    write_manifest(cfg, "nonlinear")?;
    let state = stationary_state(cfg)?;
    let ctx = NonlinearContext::new(&cfg.params, Arc::new(cfg.law), &state)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u0 = initial_state(&cfg.init, &cfg.grid, cfg.amplitude, cfg.init_k, &mut rng)?;
    let times = uniform_times(cfg.t_end, cfg.sample_count);

    let mut states = Vec::with_capacity(times.len());
    let mut full = Vec::with_capacity(times.len());
    let mut integrator = Integrator::new(&ctx, cfg.dt, SourceMode::Full)?;
    let end_full = integrator.run(&u0, cfg.t_end, &times, |t, u| {
        full.push(Diagnostics::of(t, u, cfg.eta1)?);
        states.push(u.clone());
        Ok(())
    })?;

    let mut linear = Vec::with_capacity(times.len());
    let (mut dev_abs, mut dev_rel) = (0.0f64, 0.0f64);
    let mut reference = Integrator::new(&ctx, cfg.dt, cfg.reference)?;
    let end_linear = reference.run(&u0, cfg.t_end, &times, |t, u| {
        linear.push(Diagnostics::of(t, u, cfg.eta1)?);
        let d = states[linear.len() - 1].sub(u).l2_norm();
        dev_abs = dev_abs.max(d);
        let base = u.l2_norm();
        if base > 0.0 {
            dev_rel = dev_rel.max(d / base);
        }
        Ok(())
    })?;

    let late: Vec<f64> = full.iter().filter(|d| d.t >= 10.0).map(|d| d.energies[0]).collect();
    let envelope = (late.len() >= 2).then(|| late.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6)));
    fs::write(cfg.output("trajectory.csv"), trajectory_csv(full, end_full))?;
    fs::write(cfg.output("linear_trajectory.csv"), trajectory_csv(linear, end_linear))?;
    let summary = json!({
        "reference": cfg.reference,
        "max_abs_deviation": dev_abs,
        "max_rel_deviation": dev_rel,
        "e0_envelope_monotone_after_t10": envelope,
    });
    fs::write(cfg.output("deviation.json"), serde_json::to_string(&summary)? + "\n")?;
    println!("max deviation from {:?} reference: {dev_abs:e} (relative {dev_rel:e})", cfg.reference);
    Ok(Status::Pass)
}

pub fn stationary(cfg: &RunConfig) -> Result<Status> {
    cfg.prepare_output()?;
    write_manifest(cfg, "stationary")?;
    let state = stationary_state(cfg)?;
    let residual = max_residual(&cfg.law, &cfg.params, &cfg.potential, &state)?;
    FieldFile::scalar(&cfg.grid, state.rho_star.clone()).write(cfg.output("rho_star.bin"))?;
    let (lo, hi) = state.rho_star.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &r| (l.min(r), h.max(r)));
    let summary = json!({
        "certificate": state.certificate(),
        "weighted_norms": state.weighted_norms,
        "max_residual": residual,
        "rho_min": lo,
        "rho_max": hi,
    });
    fs::write(cfg.output("stationary.json"), serde_json::to_string(&summary)? + "\n")?;
    println!("certificate {:e}, max residual {residual:e}", state.certificate());
    Ok(Status::Pass)
}

fn battery(cfg: &RunConfig) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let report = validate(&cfg.params, &cfg.law);
    out.push(CheckReport::new("params_validate", json!({ "violations": report.violations }), report.violations.len() as f64, report.is_ok()));

    let state = stationary_state(cfg)?;
    let residual = max_residual(&cfg.law, &cfg.params, &cfg.potential, &state)?;
    out.push(CheckReport::new("stationary_residual", json!({ "potential": cfg.potential.kind() }), residual, residual <= 1e-10));
    let cert = state.certificate();
    out.push(CheckReport::new("stationary_certificate", json!({ "potential": cfg.potential.kind() }), cert, cert.is_finite()));

    for (k, l, m, p, expected) in [(1, 0, 2, 2, 0.5), (0, 0, 1, 6, 0.0)] {
        let theta = gn_exponent(k, l, m, Lebesgue::Finite(p))?;
        let value = *theta.numer() as f64 / *theta.denom() as f64;
        out.push(CheckReport::new("gn_exponent", json!({ "k": k, "l": l, "m": m, "p": p }), value, value == expected));
    }

    let grid = Grid::new(32, std::f64::consts::PI)?;
    let band = |rng: &mut ChaCha8Rng| random_smooth_scalar(&grid, rng, 32.0 / 3.0 - 0.01);
    for k in [1, 2] {
        let mut worst: f64 = 0.0;
        for _ in 0..cfg.trials {
            let (f, g) = (band(&mut rng), band(&mut rng));
            worst = worst.max(commutator_check(&f, &g, k)?);
        }
        let pass = if k == 1 { worst <= 1.0 } else { worst.is_finite() };
        out.push(CheckReport::new("commutator", json!({ "k": k, "N": 32, "trials": cfg.trials }), worst, pass));
    }

    let hardy_grid = Grid::new(32, 8.0)?;
    let coarse = Grid::new(16, 8.0)?;
    for width in [0.75, 1.0, 1.5] {
        let gauss = |g: &Grid| g.sample(|x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (width * width)).exp());
        let fine_ratio = hardy_check(&hardy_grid, &gauss(&hardy_grid), 1)?;
        let coarse_ratio = hardy_check(&coarse, &gauss(&coarse), 1)?;
        out.push(CheckReport::new(
            "hardy",
            json!({ "k": 1, "width": width, "coarse_ratio": coarse_ratio }),
            fine_ratio,
            fine_ratio.is_finite() && fine_ratio > 0.0,
        ));
    }

    let times = log_times(1.0, 1e6, 61);
    for (r1, r2) in [(2.25, 1.25), (1.25, 2.5)] {
        let report = convolution_bound_check(&ConvolutionBoundCase::new(r1, r2)?, &times)?;
        out.push(CheckReport::new(
            "convolution_bound",
            json!({ "r1": r1, "r2": r2, "eps0": report.case.eps0, "first_spread": report.first_spread, "second_spread": report.second_spread }),
            report.max_first().max(report.max_second()),
            report.is_stable(0.1),
        ));
    }

    let k_random = (cfg.grid.n() / 2 - 1) as f64;
    let eta = cfg.cutoff.eta;
    let mut violations = 0usize;
    for _ in 0..cfg.trials {
        let u = SpectralField::random_smooth(&cfg.grid, &mut rng, k_random, 1.0);
        for l in 0..4 {
            let (norm, e) = (energy_norm_sq(&u, l), energy(&u, l, cfg.eta1)?);
            violations += usize::from(!((1.0 - cfg.eta1 / 2.0) * norm <= e && e <= (1.0 + cfg.eta1 / 2.0) * norm));
        }
        // the restricted cross term is bounded by 1/(2 min(eta, 1)) of the norm
        let c2 = cfg.eta2 / (2.0 * eta.min(1.0));
        let (top, e) = (u.grad_norm_sq(3), high_freq_energy(&u, eta, cfg.eta2)?);
        violations += usize::from(!((1.0 - c2) * top <= e && e <= (1.0 + c2) * top));
    }
    out.push(CheckReport::new(
        "energy_equivalence",
        json!({ "eta1": cfg.eta1, "eta2": cfg.eta2, "cutoff": eta, "trials": cfg.trials }),
        violations as f64,
        violations == 0,
    ));

    let k_fixture = (cfg.grid.n() / 2 - 1).min(4) as f64;
    let mut fixture = SpectralField::random_smooth(&cfg.grid, &mut rng, k_fixture, 1.0);
    if cfg.hermitian_fault {
        fixture.n.coeffs_mut()[1] += Complex64::new(0.0, 1e-3);
    }
    let (low, high) = frequency_split(&fixture, &cfg.cutoff);
    let recon = fixture.sub(&low).sub(&high).l2_norm() / fixture.l2_norm();
    out.push(CheckReport::new("frequency_split", json!({ "cutoff": eta }), recon, recon <= 1e-12));
    let defect = fixture.hermitian_defect();
    out.push(CheckReport::new("hermitian_symmetry", json!({ "fault_injected": cfg.hermitian_fault }), defect, defect <= 1e-12));
    Ok(out)
}

pub fn check(cfg: &RunConfig) -> Result<Status> {
    cfg.prepare_output()?;
    write_manifest(cfg, "check")?;
    let reports = battery(cfg)?;
    let mut lines = String::new();
    for r in &reports {
        let line = r.to_json_line();
        println!("{line}");
        lines.push_str(&line);
        lines.push('\n');
    }
    fs::write(cfg.output("report.jsonl"), lines)?;
    Ok(if reports.iter().all(|r| r.pass) { Status::Pass } else { Status::GateFailed })
}
