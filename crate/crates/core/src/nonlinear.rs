//! Nonlinear sources `(F1, F2, F3)` of the perturbation system and an
//! exponential integrator driven by the exact linear propagator.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::energy;
use crate::error::{Error, Result};
use crate::fieldio::FieldFile;
use crate::params::{derive_coefficients, DerivedCoefficients, PhysicalParams, PressureLaw};
use crate::semigroup::{DecaySeries, GridPropagator};
use crate::spectral::{Grid, SpectralField, Spectrum};
use crate::stationary::StationaryState;

/// Consecutive step halvings tolerated before a run is abandoned.
pub const MAX_HALVINGS: usize = 10;

/// Root-mean-square size of the probe used by [`linearized_sources`].
pub const LINEARIZATION_PROBE: f64 = 1e-4;

/// Everything needed to evaluate the sources around one stationary state.
#[derive(Clone)]
pub struct NonlinearContext {
    coeffs: DerivedCoefficients,
    params: PhysicalParams,
    law: Arc<dyn PressureLaw>,
    grid: Grid,
    rho_bar: Vec<f64>,
    grad_rho_bar: [Vec<f64>; 3],
    uniform: bool,
}

impl std::fmt::Debug for NonlinearContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlinearContext")
            .field("coeffs", &self.coeffs)
            .field("grid", &self.grid)
            .field("uniform", &self.uniform)
            .finish()
    }
}

impl NonlinearContext {
    /// `grad rho_bar` comes from the balance `p_rho(rho*) grad rho* / rho* = -grad phi`.
    pub fn new(params: &PhysicalParams, law: Arc<dyn PressureLaw>, stationary: &StationaryState) -> Result<Self> {
        let coeffs = derive_coefficients(params, law.as_ref())?;
        let theta = params.theta_inf;
        let grad_rho_bar = std::array::from_fn(|a| {
            stationary
                .rho_star
                .iter()
                .zip(&stationary.grad_phi[a])
                .map(|(&rho, &dphi)| if dphi == 0.0 { 0.0 } else { -rho * dphi / law.p_rho(rho, theta) })
                .collect()
        });
        let uniform = stationary.rho_bar.iter().all(|&x| x == 0.0);
        Ok(Self {
            coeffs,
            params: *params,
            law,
            grid: stationary.grid.clone(),
            rho_bar: stationary.rho_bar.clone(),
            grad_rho_bar,
            uniform,
        })
    }

    /// Context around the uniform state `rho* = rho_inf`.
    pub fn uniform(params: &PhysicalParams, law: Arc<dyn PressureLaw>, grid: &Grid) -> Result<Self> {
        Self::new(params, law, &StationaryState::uniform(grid, params.rho_inf))
    }

    pub fn coeffs(&self) -> &DerivedCoefficients {
        &self.coeffs
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rho_bar(&self) -> &[f64] {
        &self.rho_bar
    }

    fn check_grid(&self, state: &SpectralField) -> Result<()> {
        if *state.grid() != self.grid {
            return Err(Error::GridMismatch(format!("{:?} vs context {:?}", state.grid(), self.grid)));
        }
        Ok(())
    }

    fn check_positivity(&self, n: &[f64]) -> Result<()> {
        let rho_inf = self.params.rho_inf;
        match n.iter().zip(&self.rho_bar).position(|(n, rb)| !(n + rb + rho_inf > 0.0)) {
            Some(index) => Err(Error::DensityNotPositive { index, value: n[index] + self.rho_bar[index] + rho_inf }),
            None => Ok(()),
        }
    }
}

/// Gridded values of the composite functions `f, g, h, r, m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Composites {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub r: Vec<f64>,
    pub m: Vec<f64>,
}

pub fn eval_composites(ctx: &NonlinearContext, state: &SpectralField) -> Result<Composites> {
    ctx.check_grid(state)?;
    composites_at(ctx, &state.n.to_physical(), &state.q.to_physical())
}

fn composites_at(ctx: &NonlinearContext, n: &[f64], q: &[f64]) -> Result<Composites> {
    ctx.check_positivity(n)?;
    let c = &ctx.coeffs;
    let p = &ctx.params;
    let law = ctx.law.as_ref();
    let (rho_inf, theta_inf) = (p.rho_inf, p.theta_inf);
    let scale = p.mu / (c.mu1 * c.gamma);
    let temp = c.temperature_scale(rho_inf);
    let heat = (c.p2 / c.p3).sqrt() / p.c_v;
    let pr_inf = law.p_rho(rho_inf, theta_inf) / rho_inf;
    let pt_inf = law.p_theta(rho_inf, theta_inf) / rho_inf;
    let values: Vec<[f64; 5]> = (0..n.len())
        .into_par_iter()
        .map(|i| {
            let base = ctx.rho_bar[i] + rho_inf;
            let rho = (n[i] + ctx.rho_bar[i]) + rho_inf;
            let theta = temp * q[i] + theta_inf;
            let pr = law.p_rho(rho, theta) / rho;
            let pt = law.p_theta(rho, theta) / rho;
            [
                1.0 / rho - 1.0 / rho_inf,
                scale * (pr - pr_inf),
                scale * (pr - law.p_rho(base, theta_inf) / base),
                scale * (pt - pt_inf),
                heat * (theta * pt - theta_inf * pt_inf),
            ]
        })
        .collect();
    let column = |j: usize| values.iter().map(|v| v[j]).collect();
    Ok(Composites { f: column(0), g: column(1), h: column(2), r: column(3), m: column(4) })
}

/// Pointwise `Psi(v) = (mu/2) |grad v + grad v^T|^2 + lambda (div v)^2`.
pub fn dissipation(params: &PhysicalParams, v: &[Spectrum; 3]) -> Vec<f64> {
    let grad: Vec<Vec<f64>> =
        (0..9).into_par_iter().map(|ij| v[ij % 3].derivative(ij / 3).to_physical()).collect();
    dissipation_from_gradient(params, &grad)
}

/// `grad[3 i + j]` holds `d_i v_j`.
fn dissipation_from_gradient(params: &PhysicalParams, grad: &[Vec<f64>]) -> Vec<f64> {
    (0..grad[0].len())
        .map(|x| {
            let mut sym = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    let s = grad[3 * i + j][x] + grad[3 * j + i][x];
                    sym += s * s;
                }
            }
            let div = grad[0][x] + grad[4][x] + grad[8][x];
            0.5 * params.mu * sym + params.lambda * div * div
        })
        .collect()
}

/// `(F1, F2, F3)` in the slots `(n, v, q)` of a [`SpectralField`].
///
/// Inputs are truncated by the 2/3 rule before the products are formed in
/// physical space, and the outputs are truncated again.
pub fn eval_sources(ctx: &NonlinearContext, state: &SpectralField) -> Result<SpectralField> {
    ctx.check_grid(state)?;
    let grid = &ctx.grid;
    let s = state.dealiased();
    let div_v = {
        let mut d = s.v[0].derivative(0);
        d.axpy(1.0, &s.v[1].derivative(1));
        d.axpy(1.0, &s.v[2].derivative(2));
        d
    };
    // slots: 0 n, 1..4 v, 4 q, 5..14 d_i v_j, 14..17 d n, 17..20 d q,
    // 20..23 lap v, 23 lap q, 24..27 grad div v
    let mut spectra: Vec<Spectrum> = vec![s.n.clone(), s.v[0].clone(), s.v[1].clone(), s.v[2].clone(), s.q.clone()];
    for i in 0..3 {
        for j in 0..3 {
            spectra.push(s.v[j].derivative(i));
        }
    }
    spectra.extend(s.n.gradient());
    spectra.extend(s.q.gradient());
    spectra.extend(s.v.iter().map(Spectrum::laplacian));
    spectra.push(s.q.laplacian());
    spectra.extend(div_v.gradient());
    let phys: Vec<Vec<f64>> = spectra.par_iter().map(Spectrum::to_physical).collect();
    let (n, v, q) = (&phys[0], &phys[1..4], &phys[4]);
    let grad_v = &phys[5..14];
    let (grad_n, grad_q) = (&phys[14..17], &phys[17..20]);
    let (lap_v, lap_q, grad_div) = (&phys[20..23], &phys[23], &phys[24..27]);

    let comp = composites_at(ctx, n, q)?;
    let psi = dissipation_from_gradient(&ctx.params, grad_v);

    let c = &ctx.coeffs;
    let p = &ctx.params;
    let adv = c.mu1 * c.gamma / p.mu;
    let visc = p.mu / c.mu1;
    let ratio = (c.p2 / c.p3).sqrt();
    let psi1 = c.kappa_bar * c.mu1 * c.mu1 * c.gamma * c.gamma / (p.kappa * p.mu * p.mu) * ratio;
    let psi2 = c.kappa_bar * c.mu1 * c.gamma * c.gamma / (p.kappa * p.mu) * ratio;
    let rb = &ctx.rho_bar;
    let grb = &ctx.grad_rho_bar;

    let pointwise: Vec<[f64; 7]> = (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let vv = [v[0][x], v[1][x], v[2][x]];
            let div = grad_v[0][x] + grad_v[4][x] + grad_v[8][x];
            let mut out = [0.0; 7];
            let dens = n[x] + rb[x];
            for j in 0..3 {
                out[j] = dens * vv[j];
            }
            for j in 0..3 {
                let advect: f64 = (0..3).map(|i| vv[i] * grad_v[3 * i + j][x]).sum();
                out[3 + j] = -adv * advect
                    - visc * comp.f[x] * (c.mu1 * lap_v[j][x] + c.mu2 * grad_div[j][x])
                    - comp.g[x] * grad_n[j][x]
                    - comp.h[x] * grb[j][x]
                    - comp.r[x] * grad_q[j][x];
            }
            let advect_q: f64 = (0..3).map(|i| vv[i] * grad_q[i][x]).sum();
            out[6] = -adv * advect_q + c.kappa_bar * comp.f[x] * lap_q[x] - comp.m[x] * div
                + psi1 * psi[x]
                + psi2 * comp.f[x] * psi[x];
            out
        })
        .collect();
    let column = |j: usize| -> Vec<f64> { pointwise.iter().map(|o| o[j]).collect() };
    let transformed: Vec<Spectrum> =
        (0..7).into_par_iter().map(|j| Spectrum::from_physical(grid, &column(j))).collect();

    let mut f1 = transformed[0].derivative(0);
    f1.axpy(1.0, &transformed[1].derivative(1));
    f1.axpy(1.0, &transformed[2].derivative(2));
    let mut out = SpectralField {
        n: f1.scaled(-adv),
        v: [transformed[3].clone(), transformed[4].clone(), transformed[5].clone()],
        q: transformed[6].clone(),
    };
    for comp in out.components_mut() {
        comp.dealias();
    }
    Ok(out)
}

/// Linear part of the sources about the stationary state, by a central
/// difference that cancels every even-order term.
pub fn linearized_sources(ctx: &NonlinearContext, state: &SpectralField) -> Result<SpectralField> {
    ctx.check_grid(state)?;
    let rms = state.l2_norm() / ctx.grid.volume().sqrt();
    if ctx.uniform || rms == 0.0 {
        return Ok(SpectralField::zeros(&ctx.grid));
    }
    let s = LINEARIZATION_PROBE / rms;
    let plus = eval_sources(ctx, &state.scaled(s))?;
    let minus = eval_sources(ctx, &state.scaled(-s))?;
    Ok(plus.sub(&minus).scaled(0.5 / s))
}

/// Which source term the integrator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SourceMode {
    /// The full nonlinear sources.
    Full,
    /// Their linearization about the stationary state.
    Linearized,
    /// No source: pure linear propagation.
    Off,
}

pub fn eval_source_mode(ctx: &NonlinearContext, state: &SpectralField, mode: SourceMode) -> Result<SpectralField> {
    match mode {
        SourceMode::Full => eval_sources(ctx, state),
        SourceMode::Linearized => linearized_sources(ctx, state),
        SourceMode::Off => Ok(SpectralField::zeros(&ctx.grid)),
    }
}

/// One exponential trapezoidal step of length `prop.time()`:
/// `u* = S(u + dt F(u))`, `u1 = S u + dt/2 (S F(u) + F(u*))`.
pub fn step_with(
    prop: &GridPropagator,
    state: &SpectralField,
    source: impl Fn(&SpectralField) -> Result<SpectralField>,
) -> Result<SpectralField> {
    let dt = prop.time();
    let f0 = source(state)?;
    let su = prop.apply(state)?;
    let sf = prop.apply(&f0)?;
    let mut pred = su.clone();
    pred.axpy(dt, &sf);
    let f1 = source(&pred)?;
    let mut out = su;
    out.axpy(0.5 * dt, &sf);
    out.axpy(0.5 * dt, &f1);
    Ok(out)
}

/// A single full nonlinear step; no step-size control.
pub fn step(ctx: &NonlinearContext, state: &SpectralField, dt: f64) -> Result<SpectralField> {
    if !(dt > 0.0) {
        return Err(Error::Precondition(format!("dt = {dt} must be positive")));
    }
    let prop = GridPropagator::new(&ctx.coeffs, &ctx.grid, dt)?;
    step_with(&prop, state, |u| eval_sources(ctx, u))
}

/// Diagnostics recorded at one sample time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub t: f64,
    /// `E_l^3` for `l = 0..3`.
    pub energies: [f64; 4],
    /// `||grad^3 n||`, `||grad^3 v||`, `||grad^3 q||`.
    pub third_order: [f64; 3],
    /// `||grad^k (n, v, q)||` for `k = 0..3`.
    pub norms: [f64; 4],
}

impl Diagnostics {
    pub fn of(t: f64, state: &SpectralField, eta1: f64) -> Result<Self> {
        let mut energies = [0.0; 4];
        for (l, e) in energies.iter_mut().enumerate() {
            *e = energy(state, l, eta1)?;
        }
        let v3: f64 = state.v.iter().map(|c| c.grad_norm_sq(3)).sum();
        Ok(Self {
            t,
            energies,
            third_order: [state.n.grad_norm_sq(3).sqrt(), v3.sqrt(), state.q.grad_norm_sq(3).sqrt()],
            norms: std::array::from_fn(|k| state.grad_norm_sq(k as u32).sqrt()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Diagnostics>,
    pub final_state: SpectralField,
}

impl Trajectory {
    pub fn series(&self) -> DecaySeries {
        DecaySeries {
            times: self.samples.iter().map(|d| d.t).collect(),
            norms: std::array::from_fn(|k| self.samples.iter().map(|d| d.norms[k]).collect()),
        }
    }

    /// CSV with header `t,E0,E1,E2,E3,nrm_n3,nrm_v3,nrm_q3`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,E0,E1,E2,E3,nrm_n3,nrm_v3,nrm_q3\n");
        for d in &self.samples {
            let [e0, e1, e2, e3] = d.energies;
            let [a, b, c] = d.third_order;
            s.push_str(&format!("{},{e0},{e1},{e2},{e3},{a},{b},{c}\n", d.t));
        }
        s
    }
}

/// Fixed-step driver with step halving on loss of density positivity.
pub struct Integrator<'a> {
    ctx: &'a NonlinearContext,
    dt: f64,
    mode: SourceMode,
    eta1: f64,
    propagators: BTreeMap<u64, GridPropagator>,
}

impl<'a> Integrator<'a> {
    pub fn new(ctx: &'a NonlinearContext, dt: f64, mode: SourceMode) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Precondition(format!("dt = {dt} must be positive")));
        }
        Ok(Self { ctx, dt, mode, eta1: 0.1, propagators: BTreeMap::new() })
    }

    /// Cross-term weight of the recorded energies.
    pub fn with_eta1(mut self, eta1: f64) -> Self {
        self.eta1 = eta1;
        self
    }

    fn try_step(&mut self, state: &SpectralField, h: f64) -> Result<SpectralField> {
        let ctx = self.ctx;
        if !self.propagators.contains_key(&h.to_bits()) {
            self.propagators.insert(h.to_bits(), GridPropagator::new(&ctx.coeffs, &ctx.grid, h)?);
        }
        let mode = self.mode;
        step_with(&self.propagators[&h.to_bits()], state, |u| eval_source_mode(ctx, u, mode))
    }

    fn advance(&mut self, state: &SpectralField, t: f64, h: f64, depth: usize) -> Result<SpectralField> {
        match self.try_step(state, h) {
            Err(Error::DensityNotPositive { .. }) if depth < MAX_HALVINGS => {
                let mid = self.advance(state, t, 0.5 * h, depth + 1)?;
                self.advance(&mid, t + 0.5 * h, 0.5 * h, depth + 1)
            }
            Err(Error::DensityNotPositive { .. }) => Err(Error::StepRejectionCascade { t, halvings: depth }),
            other => other,
        }
    }

    /// Advances to `t_end`, calling `observe` at each sample time. Every
    /// interval between samples is split into equal steps no longer than `dt`.
    pub fn run(
        &mut self,
        state0: &SpectralField,
        t_end: f64,
        sample_times: &[f64],
        mut observe: impl FnMut(f64, &SpectralField) -> Result<()>,
    ) -> Result<SpectralField> {
        self.ctx.check_grid(state0)?;
        if !(t_end >= 0.0) {
            return Err(Error::Precondition(format!("t_end = {t_end} must be >= 0")));
        }
        if let Some(bad) = sample_times.iter().find(|&&s| !(0.0..=t_end).contains(&s)) {
            return Err(Error::Precondition(format!("sample time {bad} outside [0, {t_end}]")));
        }
        if sample_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Precondition("sample times must be sorted".into()));
        }
        let mut state = state0.clone();
        let mut t = 0.0;
        let mut targets = sample_times.to_vec();
        if targets.last().map_or(true, |&s| s < t_end) {
            targets.push(t_end);
        }
        let mut samples = sample_times.iter().peekable();
        for target in targets {
            let span = target - t;
            if span > 0.0 {
                let steps = (span / self.dt - 1e-9).ceil().max(1.0) as usize;
                let h = span / steps as f64;
                for i in 0..steps {
                    state = self.advance(&state, t + i as f64 * h, h, 0)?;
                }
                t = target;
            }
            while samples.next_if(|&&s| s == target).is_some() {
                observe(target, &state)?;
            }
        }
        Ok(state)
    }

    pub fn integrate(&mut self, state0: &SpectralField, t_end: f64, sample_times: &[f64]) -> Result<Trajectory> {
        let eta1 = self.eta1;
        let mut out = Vec::with_capacity(sample_times.len());
        let final_state = self.run(state0, t_end, sample_times, |t, u| {
            out.push(Diagnostics::of(t, u, eta1)?);
            Ok(())
        })?;
        Ok(Trajectory { samples: out, final_state })
    }

    /// States at the sample times.
    pub fn states(&mut self, state0: &SpectralField, t_end: f64, sample_times: &[f64]) -> Result<Vec<SpectralField>> {
        let mut out = Vec::with_capacity(sample_times.len());
        self.run(state0, t_end, sample_times, |_, u| {
            out.push(u.clone());
            Ok(())
        })?;
        Ok(out)
    }
}

/// `count` equally spaced times on `[0, t_end]` (just `[0]` when `t_end = 0`).
pub fn uniform_times(t_end: f64, count: usize) -> Vec<f64> {
    if t_end == 0.0 || count < 2 {
        return vec![0.0];
    }
    (0..count)
        .map(|i| if i == count - 1 { t_end } else { t_end * i as f64 / (count - 1) as f64 })
        .collect()
}

/// `max_t ||u_nonlinear - u_linearized||` and the same relative to `||u_linearized||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Deviation {
    pub absolute: f64,
    pub relative: f64,
}

pub fn linearization_deviation(
    ctx: &NonlinearContext,
    state0: &SpectralField,
    dt: f64,
    t_end: f64,
    sample_times: &[f64],
) -> Result<Deviation> {
    let full = Integrator::new(ctx, dt, SourceMode::Full)?.states(state0, t_end, sample_times)?;
    let lin = Integrator::new(ctx, dt, SourceMode::Linearized)?.states(state0, t_end, sample_times)?;
    let mut dev = Deviation { absolute: 0.0, relative: 0.0 };
    for (a, b) in full.iter().zip(&lin) {
        let d = a.sub(b).l2_norm();
        let base = b.l2_norm();
        dev.absolute = dev.absolute.max(d);
        if base > 0.0 {
            dev.relative = dev.relative.max(d / base);
        }
    }
    Ok(dev)
}

/// How the initial perturbation is built.
#[derive(Debug, Clone, PartialEq)]
pub enum InitKind {
    /// Random smooth field on `0 < |k| <= k`, scaled to peak `amplitude`.
    RandomSmooth,
    /// `v = (amplitude sin(k pi x / L), 0, 0)`.
    SingleMode,
    /// Five-component binary field file.
    File(PathBuf),
}

pub fn initial_state(
    kind: &InitKind,
    grid: &Grid,
    amplitude: f64,
    k: f64,
    rng: &mut impl Rng,
) -> Result<SpectralField> {
    match kind {
        InitKind::RandomSmooth => {
            if !(k > 0.0 && k < (grid.n() / 2) as f64) {
                return Err(Error::Precondition(format!("init.k = {k} must lie in (0, {})", grid.n() / 2)));
            }
            Ok(SpectralField::random_smooth(grid, rng, k, amplitude))
        }
        InitKind::SingleMode => {
            let xi = k * grid.frequency_unit();
            let zero = vec![0.0; grid.len()];
            let vx = grid.sample(|x| amplitude * (xi * x[0]).sin());
            Ok(SpectralField::from_physical(grid, [&zero, &vx, &zero, &zero, &zero]))
        }
        InitKind::File(path) => FieldFile::read(path)?.into_state(grid),
    }
}
