//! Stationary density `rho*(x)` balancing the potential force, and the
//! weighted-norm certificates that quantify how small the force is.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::fieldio::FieldFile;
use crate::params::{PhysicalParams, PressureLaw};
use crate::quadrature;
use crate::spectral::{pointwise_grad_magnitude, Grid, Spectrum};

/// Boundary values must stay below this fraction of the field maximum.
pub const BOUNDARY_DECAY_RATIO: f64 = 1e-8;
pub const NEWTON_MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PotentialKind {
    Zero,
    Gaussian { amplitude: f64, width: f64 },
    Gridded,
}

/// Time-independent potential `phi` sampled on a grid.
#[derive(Debug, Clone)]
pub struct Potential {
    grid: Grid,
    kind: PotentialKind,
    values: Vec<f64>,
}

impl Potential {
    pub fn zero(grid: &Grid) -> Self {
        Self { grid: grid.clone(), kind: PotentialKind::Zero, values: vec![0.0; grid.len()] }
    }

    /// `a exp(-|x|^2 / w^2)`.
    pub fn gaussian(grid: &Grid, amplitude: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::Precondition(format!("Gaussian width {width} must be positive")));
        }
        let values = grid.sample(|x| amplitude * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (width * width)).exp());
        check_boundary_decay(grid, &values)?;
        Ok(Self { grid: grid.clone(), kind: PotentialKind::Gaussian { amplitude, width }, values })
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} potential values for a grid of {}", values.len(), grid.len())));
        }
        check_boundary_decay(grid, &values)?;
        Ok(Self { grid: grid.clone(), kind: PotentialKind::Gridded, values })
    }

    /// Reads `potential.kind` (`zero` | `gaussian` | `file`), `potential.a`,
    /// `potential.w` and `potential.file`.
    pub fn from_config(kv: &mut KeyValues, grid: &Grid) -> Result<Self> {
        let kind = kv.take_str("potential.kind", "gaussian")?;
        let a = kv.take_f64("potential.a", 0.01)?;
        let w = kv.take_f64("potential.w", 1.0)?;
        let file = kv.take_str("potential.file", "")?;
        match kind.as_str() {
            "zero" => Ok(Self::zero(grid)),
            "gaussian" => Self::gaussian(grid, a, w),
            "file" => Self::from_values(grid, FieldFile::read(&file)?.into_scalar(grid)?),
            other => Err(Error::Config {
                line: kv.line_of("potential.kind"),
                msg: format!("unknown potential.kind `{other}`"),
            }),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `grad phi`, analytic for the Gaussian preset, spectral otherwise.
    pub fn gradient(&self) -> [Vec<f64>; 3] {
        match self.kind {
            PotentialKind::Gaussian { width, .. } => {
                let s = -2.0 / (width * width);
                let comp = |a: usize| {
                    self.values.iter().enumerate().map(|(i, p)| s * self.grid.position(i)[a] * p).collect()
                };
                [comp(0), comp(1), comp(2)]
            }
            _ => Spectrum::from_physical(&self.grid, &self.values).gradient().map(|d| d.to_physical()),
        }
    }
}

pub fn check_boundary_decay(grid: &Grid, values: &[f64]) -> Result<()> {
    let interior = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let boundary = (0..grid.len()).filter(|&i| grid.is_boundary(i)).fold(0.0f64, |m, i| m.max(values[i].abs()));
    if interior > 0.0 && !(boundary < BOUNDARY_DECAY_RATIO * interior) {
        return Err(Error::BoundaryDecay { boundary, interior });
    }
    Ok(())
}

/// `sum_k ||(1+|x|)^k grad^k f||` in `L^2` and `L^inf`, `k = 0..4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedNorms {
    pub l2: [f64; 5],
    pub linf: [f64; 5],
}

impl WeightedNorms {
    /// The certificate `sum_k (L^2 + L^inf)`.
    pub fn total(&self) -> f64 {
        self.l2.iter().chain(&self.linf).sum()
    }
}

/// Weighted derivative norms of a decaying gridded field, by grid quadrature
/// on the truncated box.
pub fn weighted_norm_certificate(grid: &Grid, field: &[f64]) -> Result<WeightedNorms> {
    if field.len() != grid.len() {
        return Err(Error::GridMismatch(format!("{} values for a grid of {}", field.len(), grid.len())));
    }
    check_boundary_decay(grid, field)?;
    let spectrum = Spectrum::from_physical(grid, field);
    let radius: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.position(i);
            (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
        })
        .collect();
    let mut out = WeightedNorms { l2: [0.0; 5], linf: [0.0; 5] };
    for k in 0..=4 {
        let mag = if k == 0 { field.iter().map(|x| x.abs()).collect() } else { pointwise_grad_magnitude(&spectrum, k) };
        let weighted: Vec<f64> = mag.iter().zip(&radius).map(|(m, r)| (1.0 + r).powi(k as i32) * m).collect();
        out.l2[k] = grid.l2_norm(&weighted);
        out.linf[k] = weighted.iter().fold(0.0, |a: f64, b| a.max(*b));
    }
    Ok(out)
}

/// Stationary state `(rho*, 0, theta_inf)` on a grid.
#[derive(Debug, Clone)]
pub struct StationaryState {
    pub grid: Grid,
    pub rho_inf: f64,
    pub rho_star: Vec<f64>,
    pub rho_bar: Vec<f64>,
    pub grad_phi: [Vec<f64>; 3],
    pub weighted_norms: WeightedNorms,
}

impl StationaryState {
    /// The uniform state `rho* = rho_inf` (no potential force).
    pub fn uniform(grid: &Grid, rho_inf: f64) -> Self {
        let zero = vec![0.0; grid.len()];
        Self {
            grid: grid.clone(),
            rho_inf,
            rho_star: vec![rho_inf; grid.len()],
            rho_bar: zero.clone(),
            grad_phi: [zero.clone(), zero.clone(), zero],
            weighted_norms: WeightedNorms { l2: [0.0; 5], linf: [0.0; 5] },
        }
    }

    pub fn certificate(&self) -> f64 {
        self.weighted_norms.total()
    }
}

/// `int_{rho_inf}^{rho} p_rho(s, theta_inf) / s ds`.
pub fn enthalpy(law: &dyn PressureLaw, params: &PhysicalParams, rho: f64) -> Result<f64> {
    let theta = params.theta_inf;
    quadrature::integrate(|s| law.p_rho(s, theta) / s, params.rho_inf, rho, 1e-15, 1e-13)
}

/// Root of `enthalpy(rho) + phi = 0` by Newton's method from `rho_inf`.
pub fn solve_point_newton(law: &dyn PressureLaw, params: &PhysicalParams, phi: f64, index: usize) -> Result<f64> {
    let mut rho = params.rho_inf;
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let g = enthalpy(law, params, rho)? + phi;
        let dg = law.p_rho(rho, params.theta_inf) / rho;
        let step = g / dg;
        rho -= step;
        check_neighborhood(law, params, rho, index)?;
        if step.abs() <= 1e-15 * rho {
            return Ok(rho);
        }
    }
    Err(Error::NewtonDiverged { index, iterations: NEWTON_MAX_ITERATIONS })
}

fn check_neighborhood(law: &dyn PressureLaw, params: &PhysicalParams, rho: f64, index: usize) -> Result<()> {
    if !(rho > 0.0) || !((rho / params.rho_inf - 1.0).abs() <= law.validity_radius()) {
        return Err(Error::OutOfNeighborhood { index, value: rho });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Closed form when the law provides one, Newton otherwise.
    Auto,
    Newton,
}

pub fn solve_stationary(law: &dyn PressureLaw, params: &PhysicalParams, potential: &Potential) -> Result<StationaryState> {
    solve_stationary_with(law, params, potential, SolveMethod::Auto)
}

pub fn solve_stationary_with(
    law: &dyn PressureLaw,
    params: &PhysicalParams,
    potential: &Potential,
    method: SolveMethod,
) -> Result<StationaryState> {
    let grid = potential.grid();
    let rho_star = potential
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, &phi)| {
            let closed = match method {
                SolveMethod::Auto => law.stationary_density(params.rho_inf, params.theta_inf, phi),
                SolveMethod::Newton => None,
            };
            match closed {
                Some(rho) => check_neighborhood(law, params, rho, i).map(|_| rho),
                None if phi == 0.0 => Ok(params.rho_inf),
                None => solve_point_newton(law, params, phi, i),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let rho_bar: Vec<f64> = rho_star.iter().map(|r| r - params.rho_inf).collect();
    let weighted_norms = weighted_norm_certificate(grid, &rho_bar)?;
    Ok(StationaryState {
        grid: grid.clone(),
        rho_inf: params.rho_inf,
        rho_star,
        rho_bar,
        grad_phi: potential.gradient(),
        weighted_norms,
    })
}

/// Largest pointwise residual of the enthalpy balance.
pub fn max_residual(
    law: &dyn PressureLaw,
    params: &PhysicalParams,
    potential: &Potential,
    state: &StationaryState,
) -> Result<f64> {
    let residuals = state
        .rho_star
        .par_iter()
        .zip(potential.values())
        .map(|(&rho, &phi)| enthalpy(law, params, rho).map(|h| (h + phi).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(residuals.into_iter().fold(0.0, f64::max))
}
