//! Physical parameters, pressure laws and the coefficients of the
//! perturbation system around the stationary state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::KeyValues;
use crate::error::{Error, Result};

/// Viscosities, heat conduction and the far-field reference state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalParams {
    pub mu: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub c_v: f64,
    pub rho_inf: f64,
    pub theta_inf: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            lambda: 0.0,
            kappa: 1.0,
            c_v: 1.5,
            rho_inf: 1.0,
            theta_inf: 1.0,
        }
    }
}

impl PhysicalParams {
    /// Every violated physical condition, as human-readable strings.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.mu > 0.0) {
            out.push(format!("mu > 0 violated (mu = {})", self.mu));
        }
        if !(2.0 * self.mu + 3.0 * self.lambda >= 0.0) {
            out.push(format!(
                "2 mu + 3 lambda >= 0 violated (2 mu + 3 lambda = {})",
                2.0 * self.mu + 3.0 * self.lambda
            ));
        }
        for (name, value) in [
            ("kappa", self.kappa),
            ("c_v", self.c_v),
            ("rho_inf", self.rho_inf),
            ("theta_inf", self.theta_inf),
        ] {
            if !(value > 0.0) {
                out.push(format!("{name} > 0 violated ({name} = {value})"));
            }
        }
        out
    }

    /// Reads `mu`, `lambda`, `kappa`, `c_v`, `rho_inf`, `theta_inf`,
    /// falling back to [`PhysicalParams::default`] for missing keys.
    pub fn from_config(kv: &mut KeyValues) -> Result<Self> {
        let d = Self::default();
        Ok(Self {
            mu: kv.take_f64("mu", d.mu)?,
            lambda: kv.take_f64("lambda", d.lambda)?,
            kappa: kv.take_f64("kappa", d.kappa)?,
            c_v: kv.take_f64("c_v", d.c_v)?,
            rho_inf: kv.take_f64("rho_inf", d.rho_inf)?,
            theta_inf: kv.take_f64("theta_inf", d.theta_inf)?,
        })
    }
}

/// Tag identifying a pressure law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LawKind {
    /// `p = R rho theta`.
    IdealGas { r: f64 },
    /// User-supplied law with analytic partial derivatives.
    Analytic(String),
}

/// Pressure `p(rho, theta)` together with its analytic partials.
///
/// The partials are the primary source everywhere; finite differences
/// are only used by [`validate`] as a cross-check.
pub trait PressureLaw: Send + Sync {
    fn pressure(&self, rho: f64, theta: f64) -> f64;
    fn p_rho(&self, rho: f64, theta: f64) -> f64;
    fn p_theta(&self, rho: f64, theta: f64) -> f64;
    fn kind(&self) -> LawKind;

    /// Closed-form root of the stationary enthalpy balance, when the law
    /// admits one.
    fn stationary_density(&self, _rho_inf: f64, _theta_inf: f64, _phi: f64) -> Option<f64> {
        None
    }

    /// Half-width of the relative density neighborhood around the
    /// reference state where the law may be evaluated.
    fn validity_radius(&self) -> f64 {
        0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealGas {
    pub r: f64,
}

impl IdealGas {
    pub fn new(r: f64) -> Self {
        Self { r }
    }
}

impl PressureLaw for IdealGas {
    fn pressure(&self, rho: f64, theta: f64) -> f64 {
        self.r * rho * theta
    }

    fn p_rho(&self, _rho: f64, theta: f64) -> f64 {
        self.r * theta
    }

    fn p_theta(&self, rho: f64, _theta: f64) -> f64 {
        self.r * rho
    }

    fn kind(&self) -> LawKind {
        LawKind::IdealGas { r: self.r }
    }

    fn stationary_density(&self, rho_inf: f64, theta_inf: f64, phi: f64) -> Option<f64> {
        // R theta ln(rho / rho_inf) + phi = 0
        Some(rho_inf * (-phi / (self.r * theta_inf)).exp())
    }
}

type ScalarFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Pressure law given by user closures.
pub struct AnalyticLaw {
    name: String,
    p: ScalarFn,
    p_rho: ScalarFn,
    p_theta: ScalarFn,
}

impl AnalyticLaw {
    pub fn new(
        name: impl Into<String>,
        p: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        p_rho: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        p_theta: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            p: Box::new(p),
            p_rho: Box::new(p_rho),
            p_theta: Box::new(p_theta),
        }
    }
}

impl std::fmt::Debug for AnalyticLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnalyticLaw").field("name", &self.name).finish()
    }
}

impl PressureLaw for AnalyticLaw {
    fn pressure(&self, rho: f64, theta: f64) -> f64 {
        (self.p)(rho, theta)
    }

    fn p_rho(&self, rho: f64, theta: f64) -> f64 {
        (self.p_rho)(rho, theta)
    }

    fn p_theta(&self, rho: f64, theta: f64) -> f64 {
        (self.p_theta)(rho, theta)
    }

    fn kind(&self) -> LawKind {
        LawKind::Analytic(self.name.clone())
    }
}

/// Builds the pressure law named by `pressure.law` (only `ideal` is
/// available from config files).
pub fn law_from_config(kv: &mut KeyValues) -> Result<IdealGas> {
    let law = kv.take_str("pressure.law", "ideal")?;
    let r = kv.take_f64("pressure.R", 1.0)?;
    match law.as_str() {
        "ideal" => Ok(IdealGas::new(r)),
        other => Err(Error::Config {
            line: kv.line_of("pressure.law"),
            msg: format!("unsupported pressure.law `{other}` (expected `ideal`)"),
        }),
    }
}

/// Coefficients of the perturbation system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedCoefficients {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub gamma: f64,
    pub lambda_bar: f64,
    pub kappa_bar: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl DerivedCoefficients {
    /// Linearized sound speed `sqrt(gamma^2 + lambda_bar^2)`.
    pub fn sound_speed(&self) -> f64 {
        (self.gamma * self.gamma + self.lambda_bar * self.lambda_bar).sqrt()
    }

    /// Factor converting the rescaled temperature `q` back to `theta - theta_inf`.
    pub fn temperature_scale(&self, rho_inf: f64) -> f64 {
        (self.p2 * rho_inf / (self.p1 * self.p3)).sqrt()
    }

    /// Smallest low-frequency damping rate `c` such that every mode of the
    /// linearized symbol decays at least like `exp(-c r^2 t)` as `r -> 0`.
    pub fn min_low_frequency_damping(&self) -> f64 {
        let c2 = self.gamma * self.gamma + self.lambda_bar * self.lambda_bar;
        let thermal = self.kappa_bar * self.gamma * self.gamma / c2;
        let acoustic =
            0.5 * ((self.mu1 + self.mu2) + self.kappa_bar * self.lambda_bar * self.lambda_bar / c2);
        self.mu1.min(thermal).min(acoustic)
    }
}

/// Coefficients `p1..p3`, `gamma`, `lambda_bar`, `kappa_bar`, `mu1`, `mu2`.
pub fn derive_coefficients(params: &PhysicalParams, law: &dyn PressureLaw) -> Result<DerivedCoefficients> {
    let violations = params.violations();
    if !violations.is_empty() {
        return Err(Error::InvalidParams(violations));
    }
    let (rho, theta) = (params.rho_inf, params.theta_inf);
    let p_rho = law.p_rho(rho, theta);
    let p_theta = law.p_theta(rho, theta);
    if !(p_rho > 0.0) || !(p_theta > 0.0) {
        return Err(Error::PressureLaw(format!("p_rho = {p_rho}, p_theta = {p_theta}")));
    }
    let p1 = p_rho / rho;
    let p2 = p_theta / rho;
    let p3 = theta * p_theta / (params.c_v * rho);
    Ok(DerivedCoefficients {
        p1,
        p2,
        p3,
        gamma: (p1 * rho).sqrt(),
        lambda_bar: (p2 * p3).sqrt(),
        kappa_bar: params.kappa / (params.c_v * rho),
        mu1: params.mu / rho,
        mu2: (params.mu + params.lambda) / rho,
    })
}

/// Outcome of [`validate`]; empty when everything holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

const FD_CHECK_POINTS: usize = 10;
const FD_CHECK_RTOL: f64 = 1e-6;

/// Lists every violated invariant of the parameters and the pressure law,
/// including a centered finite-difference check of the supplied partials.
pub fn validate(params: &PhysicalParams, law: &dyn PressureLaw) -> ValidationReport {
    let mut violations = params.violations();
    let (rho0, theta0) = (params.rho_inf, params.theta_inf);
    if rho0 > 0.0 && theta0 > 0.0 {
        let pr = law.p_rho(rho0, theta0);
        let pt = law.p_theta(rho0, theta0);
        if !(pr > 0.0) {
            violations.push(format!("p_rho(rho_inf, theta_inf) > 0 violated ({pr})"));
        }
        if !(pt > 0.0) {
            violations.push(format!("p_theta(rho_inf, theta_inf) > 0 violated ({pt})"));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f00d);
        for _ in 0..FD_CHECK_POINTS {
            let rho = rho0 * (1.0 + rng.gen_range(-0.05..0.05));
            let theta = theta0 * (1.0 + rng.gen_range(-0.05..0.05));
            let hr = 1e-4 * rho;
            let ht = 1e-4 * theta;
            let fd_r = (law.pressure(rho + hr, theta) - law.pressure(rho - hr, theta)) / (2.0 * hr);
            let fd_t = (law.pressure(rho, theta + ht) - law.pressure(rho, theta - ht)) / (2.0 * ht);
            for (name, given, fd) in [
                ("p_rho", law.p_rho(rho, theta), fd_r),
                ("p_theta", law.p_theta(rho, theta), fd_t),
            ] {
                let rel = (given - fd).abs() / fd.abs().max(f64::MIN_POSITIVE);
                if !(rel <= FD_CHECK_RTOL) {
                    violations.push(format!(
                        "derivative mismatch: {name}({rho:.6}, {theta:.6}) = {given:e} vs centered difference {fd:e} (rel {rel:.2e})"
                    ));
                }
            }
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> (PhysicalParams, IdealGas) {
        (PhysicalParams::default(), IdealGas::new(1.0))
    }

    #[test]
    fn ideal_gas_reference_coefficients() {
        let (params, law) = reference();
        let c = derive_coefficients(&params, &law).unwrap();
        assert_eq!(c.p1, 1.0);
        assert_eq!(c.p2, 1.0);
        assert!((c.p3 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.gamma, 1.0);
        assert!((c.lambda_bar - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((c.kappa_bar - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.mu1, 1.0);
        assert_eq!(c.mu2, 1.0);
    }

    #[test]
    fn lambda_equal_minus_mu_is_rejected() {
        let (mut params, law) = reference();
        params.lambda = -params.mu;
        assert!(matches!(derive_coefficients(&params, &law), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn mu1_scales_with_reference_density() {
        let params = PhysicalParams { rho_inf: 4.0, mu: 2.0, ..PhysicalParams::default() };
        let c = derive_coefficients(&params, &IdealGas::new(1.0)).unwrap();
        assert_eq!(c.mu1, 0.5);
    }

    #[test]
    fn doubling_kappa_doubles_kappa_bar() {
        let (params, law) = reference();
        let a = derive_coefficients(&params, &law).unwrap();
        let b = derive_coefficients(&PhysicalParams { kappa: 2.0 * params.kappa, ..params }, &law).unwrap();
        assert_eq!(b.kappa_bar, 2.0 * a.kappa_bar);
    }

    #[test]
    fn ideal_gas_sound_speed_identity() {
        for (r, theta, c_v) in [(1.0, 1.0, 1.5), (0.4, 2.0, 2.5), (2.0, 0.3, 0.7)] {
            let params = PhysicalParams { theta_inf: theta, c_v, ..PhysicalParams::default() };
            let c = derive_coefficients(&params, &IdealGas::new(r)).unwrap();
            let lhs = c.gamma * c.gamma + c.lambda_bar * c.lambda_bar;
            let rhs = r * theta * (1.0 + r / c_v);
            assert!((lhs - rhs).abs() < 1e-13 * rhs);
        }
    }

    #[test]
    fn nonpositive_partials_rejected() {
        let law = AnalyticLaw::new("decreasing", |r, t| -r * t, |_, t| -t, |r, _| -r);
        let err = derive_coefficients(&PhysicalParams::default(), &law).unwrap_err();
        assert!(matches!(err, Error::PressureLaw(_)));
    }

    #[test]
    fn valid_ideal_gas_has_empty_report() {
        let (params, law) = reference();
        assert!(validate(&params, &law).is_ok());
    }

    #[test]
    fn negative_mu_reported() {
        let params = PhysicalParams { mu: -1.0, ..PhysicalParams::default() };
        let report = validate(&params, &IdealGas::new(1.0));
        assert!(report.violations.iter().any(|v| v.contains("mu > 0")));
    }

    #[test]
    fn mis_specified_p_theta_reported() {
        let law = AnalyticLaw::new("off-by-ten-percent", |r, t| r * t, |_, t| t, |r, _| 1.1 * r);
        let report = validate(&PhysicalParams::default(), &law);
        assert!(report.violations.iter().any(|v| v.contains("derivative mismatch: p_theta")));
        assert!(!report.violations.iter().any(|v| v.contains("derivative mismatch: p_rho")));
    }

    #[test]
    fn nonlinear_law_passes_finite_difference_check() {
        // p = rho^1.4 + rho theta
        let law = AnalyticLaw::new(
            "polytropic+thermal",
            |r: f64, t| r.powf(1.4) + r * t,
            |r: f64, t| 1.4 * r.powf(0.4) + t,
            |r, _| r,
        );
        assert!(validate(&PhysicalParams::default(), &law).is_ok());
    }
}
