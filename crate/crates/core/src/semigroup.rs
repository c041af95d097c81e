//! Exact evaluation of the linearized semigroup `S(t) = exp(tA)`.
//!
//! In Fourier space the 5x5 symbol splits into a 3x3 acoustic-thermal
//! block acting on `(n, d, q)` with `d = i xi.v / |xi|`, and a scalar heat
//! factor `exp(-mu1 |xi|^2 t)` acting on the two velocity components
//! orthogonal to `xi`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Complex, Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expm::expm3;
use crate::params::DerivedCoefficients;
use crate::quadrature::gauss_legendre;
use crate::spectral::{Grid, SpectralField};

/// Linearized symbol at frequency magnitude `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSymbol {
    pub r: f64,
    pub matrix: Matrix3<f64>,
    pub shear_rate: f64,
}

impl ModeSymbol {
    pub fn new(c: &DerivedCoefficients, r: f64) -> Self {
        let (g, l, k) = (c.gamma * r, c.lambda_bar * r, c.kappa_bar * r * r);
        let visc = (c.mu1 + c.mu2) * r * r;
        #[rustfmt::skip]
        let matrix = Matrix3::new(
            0.0, -g,    0.0,
            g,   -visc, l,
            0.0, -l,    -k,
        );
        Self { r, matrix, shear_rate: c.mu1 * r * r }
    }

    /// Eigenvalues of the acoustic-thermal block.
    pub fn eigenvalues(&self) -> [Complex<f64>; 3] {
        let ev = self.matrix.complex_eigenvalues();
        [ev[0], ev[1], ev[2]]
    }
}

/// `exp(t M(r))` and the shear factor `exp(-mu1 r^2 t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModePropagator {
    pub acoustic: Matrix3<f64>,
    pub shear: f64,
}

pub fn mode_exponential(symbol: &ModeSymbol, t: f64) -> Result<ModePropagator> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Precondition(format!("propagation time {t} must be finite and >= 0")));
    }
    Ok(ModePropagator { acoustic: expm3(&(symbol.matrix * t)), shear: (-symbol.shear_rate * t).exp() })
}

/// `S(t)` on a grid, with the per-mode propagators cached by `|xi|`.
#[derive(Debug, Clone)]
pub struct GridPropagator {
    grid: Grid,
    t: f64,
    slot: Vec<usize>,
    table: Vec<ModePropagator>,
}

impl GridPropagator {
    pub fn new(coeffs: &DerivedCoefficients, grid: &Grid, t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Precondition(format!("propagation time {t} must be finite and >= 0")));
        }
        let unit = grid.frequency_unit();
        let key = |i: usize| {
            let xi = grid.derivative_xi(i);
            xi.iter().map(|x| (x / unit).round() as i64).map(|k| k * k).sum::<i64>()
        };
        let mut slots = BTreeMap::new();
        let slot: Vec<usize> = (0..grid.len())
            .map(|i| {
                let next = slots.len();
                *slots.entry(key(i)).or_insert(next)
            })
            .collect();
        let mut table = vec![ModePropagator { acoustic: Matrix3::identity(), shear: 1.0 }; slots.len()];
        for (k2, s) in slots {
            let r = unit * (k2 as f64).sqrt();
            table[s] = mode_exponential(&ModeSymbol::new(coeffs, r), t)?;
        }
        Ok(Self { grid: grid.clone(), t, slot, table })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn apply(&self, state: &SpectralField) -> Result<SpectralField> {
        if *state.grid() != self.grid {
            return Err(Error::GridMismatch(format!("{:?} vs propagator {:?}", state.grid(), self.grid)));
        }
        if self.t == 0.0 {
            return Ok(state.clone());
        }
        let mut out = state.clone();
        let i_unit = Complex64::new(0.0, 1.0);
        for idx in 0..self.grid.len() {
            let xi = self.grid.derivative_xi(idx);
            let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
            if r == 0.0 {
                continue;
            }
            let prop = &self.table[self.slot[idx]];
            let unit = xi.map(|x| x / r);
            let v = [state.v[0].coeffs()[idx], state.v[1].coeffs()[idx], state.v[2].coeffs()[idx]];
            let along = unit[0] * v[0] + unit[1] * v[1] + unit[2] * v[2];
            let d = i_unit * along;
            let n = state.n.coeffs()[idx];
            let q = state.q.coeffs()[idx];
            let e = &prop.acoustic;
            let n1 = n * e[(0, 0)] + d * e[(0, 1)] + q * e[(0, 2)];
            let d1 = n * e[(1, 0)] + d * e[(1, 1)] + q * e[(1, 2)];
            let q1 = n * e[(2, 0)] + d * e[(2, 1)] + q * e[(2, 2)];
            let along1 = -i_unit * d1;
            out.n.coeffs_mut()[idx] = n1;
            out.q.coeffs_mut()[idx] = q1;
            for a in 0..3 {
                let perp = v[a] - along * unit[a];
                out.v[a].coeffs_mut()[idx] = along1 * unit[a] + perp * prop.shear;
            }
        }
        Ok(out)
    }
}

/// `S(t) state`, mode by mode.
pub fn apply_semigroup_grid(coeffs: &DerivedCoefficients, state: &SpectralField, t: f64) -> Result<SpectralField> {
    GridPropagator::new(coeffs, state.grid(), t)?.apply(state)
}

/// Composite Gauss-Legendre rule on `[0, r_max]` graded for the shrinking
/// low-frequency layer and the acoustic oscillations up to `t_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    panels: Vec<(f64, f64)>,
    damping: f64,
    sound_speed: f64,
}

/// `exp(-2 c r^2 t)` below this is treated as outside the integrand support.
const SUPPORT_EXPONENT: f64 = 69.0;
pub const DEFAULT_R_MAX: f64 = 50.0;
pub const POINTS_PER_PANEL: usize = 8;

impl RadialQuadrature {
    /// Panels no wider than one period of the squared acoustic oscillation
    /// at any time `t <= t_max` where the panel is inside the decaying
    /// support, with a break at `r = 1`.
    pub fn graded(coeffs: &DerivedCoefficients, t_max: f64, r_max: f64) -> Result<Self> {
        if !(t_max > 0.0) || !(r_max > 1.0) {
            return Err(Error::Precondition(format!("need t_max > 0 and r_max > 1 (got {t_max}, {r_max})")));
        }
        let c = coeffs.min_low_frequency_damping();
        let cs = coeffs.sound_speed();
        let w_min = PI / (cs * t_max);
        let beta = PI * 2.0 * c / (SUPPORT_EXPONENT * cs);
        let mut panels = Vec::new();
        for (start, end) in [(0.0, 1.0), (1.0, r_max)] {
            let mut a = start;
            while a < end {
                let w = (beta * a * a).max(w_min).min(1.0);
                let b = (a + w).min(end);
                panels.push((a, b));
                a = b;
            }
        }
        Ok(Self::from_panels(panels, c, cs))
    }

    fn from_panels(panels: Vec<(f64, f64)>, damping: f64, sound_speed: f64) -> Self {
        let (x, w) = gauss_legendre(POINTS_PER_PANEL);
        let mut nodes = Vec::with_capacity(panels.len() * x.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        for &(a, b) in &panels {
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + half * xi);
                weights.push(half * wi);
            }
        }
        Self { nodes, weights, panels, damping, sound_speed }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        self.panels.last().map_or(0.0, |p| p.1)
    }

    /// Errors when the rule cannot resolve the integrand at time `t`.
    pub fn check_resolution(&self, t: f64) -> Result<()> {
        if t <= 0.0 {
            return Ok(());
        }
        let layer = (self.damping * t).powf(-0.5);
        let r_min = self.nodes.iter().copied().fold(f64::INFINITY, f64::min);
        if !(r_min <= layer / 10.0) {
            return Err(Error::QuadratureResolution {
                t,
                reason: format!("smallest node {r_min:e} above (c t)^(-1/2)/10 = {:e}", layer / 10.0),
            });
        }
        let support = (SUPPORT_EXPONENT / (2.0 * self.damping * t)).sqrt();
        let period = PI / (self.sound_speed * t);
        if let Some(&(a, b)) = self.panels.iter().find(|(a, b)| *a < support && b - a > period * (1.0 + 1e-9)) {
            return Err(Error::QuadratureResolution {
                t,
                reason: format!("panel [{a:e}, {b:e}] wider than the oscillation period {period:e}"),
            });
        }
        Ok(())
    }
}

/// Radially symmetric initial data `(n0, d0, |shear0|, q0)` at the
/// quadrature nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub quadrature: RadialQuadrature,
    pub data: Vec<[f64; 4]>,
}

impl RadialProfile {
    pub fn from_fn(quadrature: RadialQuadrature, f: impl Fn(f64) -> [f64; 4]) -> Self {
        let data = quadrature.nodes.iter().map(|&r| f(r)).collect();
        Self { quadrature, data }
    }

    /// Indicator of `r <= radius` times the given component amplitudes.
    pub fn step(quadrature: RadialQuadrature, radius: f64, amplitudes: [f64; 4]) -> Self {
        Self::from_fn(quadrature, |r| if r <= radius { amplitudes } else { [0.0; 4] })
    }

    /// The profile multiplied by `r`.
    pub fn scaled_by_radius(&self) -> Self {
        let data = self.data.iter().zip(&self.quadrature.nodes).map(|(u, r)| u.map(|x| x * r)).collect();
        Self { quadrature: self.quadrature.clone(), data }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|u| u.iter().all(|&x| x == 0.0))
    }
}

/// `||grad^k S(t) U0||^2_{L^2}` for `k = 0..3` at one time.
pub fn radial_norms_sq(coeffs: &DerivedCoefficients, profile: &RadialProfile, t: f64) -> Result<[f64; 4]> {
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("time {t} must be >= 0")));
    }
    profile.quadrature.check_resolution(t)?;
    let quad = &profile.quadrature;
    let terms: Vec<[f64; 4]> = (0..quad.len())
        .into_par_iter()
        .map(|j| {
            let u = profile.data[j];
            if u.iter().all(|&x| x == 0.0) {
                return [0.0; 4];
            }
            let r = quad.nodes[j];
            let prop = mode_exponential(&ModeSymbol::new(coeffs, r), t).expect("t validated above");
            let w = prop.acoustic * Vector3::new(u[0], u[1], u[3]);
            let base = w.norm_squared() + (prop.shear * u[2]).powi(2);
            let mut weight = 4.0 * PI * quad.weights[j] * r * r;
            let mut out = [0.0; 4];
            for o in out.iter_mut() {
                *o = weight * base;
                weight *= r * r;
            }
            out
        })
        .collect();
    // sequential reduction keeps results bit-reproducible
    let mut total = [0.0; 4];
    for term in terms {
        for k in 0..4 {
            total[k] += term[k];
        }
    }
    Ok(total)
}

/// Samples `N_k(t) = ||grad^k S(t) U0||_{L^2}`, `k = 0..3`, at `times`.
pub fn radial_decay_norms(coeffs: &DerivedCoefficients, profile: &RadialProfile, times: &[f64]) -> Result<DecaySeries> {
    let mut norms: [Vec<f64>; 4] = Default::default();
    for &t in times {
        let sq = radial_norms_sq(coeffs, profile, t)?;
        for k in 0..4 {
            norms[k].push(sq[k].sqrt());
        }
    }
    Ok(DecaySeries { times: times.to_vec(), norms })
}

/// `count` log-spaced times from `t_min` to `t_max` inclusive.
pub fn log_times(t_min: f64, t_max: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && t_min > 0.0 && t_max > t_min);
    let (a, b) = (t_min.ln(), t_max.ln());
    (0..count)
        .map(|i| {
            if i == count - 1 {
                t_max
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// Sampled derivative norms of a decaying solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecaySeries {
    pub times: Vec<f64>,
    pub norms: [Vec<f64>; 4],
}

impl DecaySeries {
    pub fn is_zero(&self) -> bool {
        self.norms.iter().flatten().all(|&x| x == 0.0)
    }

    pub fn fit(&self, k: usize, window: [f64; 2]) -> Result<SlopeFit> {
        let mut fit = fit_decay_slope(&self.times, &self.norms[k], window)?;
        fit.k = k;
        Ok(fit)
    }

    /// First `(k, t)` where some norm grows by more than `rtol` between
    /// consecutive samples at or after `t_from`.
    pub fn envelope_violation(&self, t_from: f64, rtol: f64) -> Option<(usize, f64)> {
        for k in 0..4 {
            for i in 0..self.times.len().saturating_sub(1) {
                if self.times[i] >= t_from && self.norms[k][i + 1] > self.norms[k][i] * (1.0 + rtol) {
                    return Some((k, self.times[i + 1]));
                }
            }
        }
        None
    }

    /// CSV with header `t,n0,n1,n2,n3`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,n0,n1,n2,n3\n");
        for (i, t) in self.times.iter().enumerate() {
            s.push_str(&format!(
                "{t},{},{},{},{}\n",
                self.norms[0][i], self.norms[1][i], self.norms[2][i], self.norms[3][i]
            ));
        }
        s
    }
}

/// Least-squares slope of `log N` against `log t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub k: usize,
    pub slope: f64,
    /// Largest absolute deviation of `log N` from the fitted line.
    pub residual: f64,
    pub window: [f64; 2],
    #[serde(skip)]
    pub intercept: f64,
}

pub const MIN_FIT_SAMPLES: usize = 8;

pub fn fit_decay_slope(times: &[f64], values: &[f64], window: [f64; 2]) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window[0] && **t <= window[1])
        .map(|(&t, &v)| (t, v))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples { found: pts.len(), needed: MIN_FIT_SAMPLES });
    }
    if let Some((t, v)) = pts.iter().find(|(t, v)| !(*v > 0.0) || !(*t > 0.0)) {
        return Err(Error::DegenerateSeries(format!("non-positive sample N({t}) = {v}")));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateSeries("all samples at one time".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).abs()).fold(0.0, f64::max);
    Ok(SlopeFit { k: 0, slope, residual, window, intercept })
}

/// The theoretical rate `-(3/4 + k/2)`.
pub fn optimal_rate(k: usize) -> f64 {
    -(0.75 + 0.5 * k as f64)
}
