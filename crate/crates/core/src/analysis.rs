//! Energy functionals and numeric checkers for the interpolation,
//! commutator, Hardy and time-convolution inequalities.

use num_complex::Complex64;
use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::spectral::{multi_indices, pointwise_grad_magnitude, Grid, SpectralField, Spectrum};
use crate::stationary::check_boundary_decay;

fn check_weight(name: &str, eta: f64) -> Result<()> {
    if !(0.0..2.0).contains(&eta) {
        return Err(Error::Precondition(format!("{name} = {eta} must lie in [0, 2)")));
    }
    Ok(())
}

/// `sum_{k=l}^3 ||grad^k (n, v, q)||^2`.
pub fn energy_norm_sq(state: &SpectralField, l: usize) -> f64 {
    (l..=3).map(|k| state.grad_norm_sq(k as u32)).sum()
}

/// `sum_xi |xi|^{2k} Re[-i (xi . v) conj(n)]` over the modes where `keep` holds,
/// i.e. `int grad^k v . grad^{k+1} n dx` restricted in frequency.
fn cross_term(state: &SpectralField, k: usize, keep: impl Fn(f64) -> bool) -> f64 {
    let grid = state.grid();
    let mut sum = 0.0;
    for idx in 0..grid.len() {
        let xi = grid.xi(idx);
        let r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        if r2 == 0.0 || !keep(r2.sqrt()) {
            continue;
        }
        let along: Complex64 = (0..3).map(|a| state.v[a].coeffs()[idx] * xi[a]).sum();
        let w = Complex64::new(0.0, -1.0) * along * state.n.coeffs()[idx].conj();
        sum += r2.powi(k as i32) * w.re;
    }
    sum * grid.volume()
}

/// `int grad^k v . grad^{k+1} n dx`.
pub fn energy_cross(state: &SpectralField, k: usize) -> f64 {
    cross_term(state, k, |_| true)
}

/// `E_l^3 = sum_{k=l}^3 ||grad^k U||^2 + eta1 sum_{k=l}^2 int grad^k v . grad^{k+1} n`.
pub fn energy(state: &SpectralField, l: usize, eta1: f64) -> Result<f64> {
    if l > 3 {
        return Err(Error::Precondition(format!("energy level {l} must be at most 3")));
    }
    check_weight("eta1", eta1)?;
    let cross: f64 = (l..3).map(|k| energy_cross(state, k)).sum();
    Ok(energy_norm_sq(state, l) + eta1 * cross)
}

/// `||grad^3 U||^2 - eta2 Re int_{|xi| >= eta} grad^2 v . conj(grad^3 n) dxi`.
pub fn high_freq_energy(state: &SpectralField, eta: f64, eta2: f64) -> Result<f64> {
    check_weight("eta2", eta2)?;
    if !(eta > 0.0) {
        return Err(Error::Precondition(format!("cutoff eta = {eta} must be positive")));
    }
    Ok(state.grad_norm_sq(3) - eta2 * cross_term(state, 2, |r| r >= eta))
}

/// `||f / (1+|x|)^k|| / ||grad f / (1+|x|)^{k-1}||`; zero for `f = 0`.
pub fn hardy_check(grid: &Grid, field: &[f64], k: u32) -> Result<f64> {
    if k < 1 {
        return Err(Error::Precondition("Hardy weight order must be >= 1".into()));
    }
    if field.len() != grid.len() {
        return Err(Error::GridMismatch(format!("{} values for a grid of {}", field.len(), grid.len())));
    }
    check_boundary_decay(grid, field)?;
    if field.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let weight = |idx: usize| {
        let x = grid.position(idx);
        1.0 + (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    };
    let grad = pointwise_grad_magnitude(&Spectrum::from_physical(grid, field), 1);
    let num: Vec<f64> = (0..grid.len()).map(|i| field[i] / weight(i).powi(k as i32)).collect();
    let den: Vec<f64> = (0..grid.len()).map(|i| grad[i] / weight(i).powi(k as i32 - 1)).collect();
    Ok(grid.l2_norm(&num) / grid.l2_norm(&den))
}

/// Lebesgue exponent `p` in `[2, inf]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Lebesgue {
    Finite(u32),
    Infinity,
}

/// Interpolation exponent `theta` solving
/// `k/3 - 1/p = (l/3 - 1/2) theta + (m/3 - 1/2)(1 - theta)`.
pub fn gn_exponent(k: u32, l: u32, m: u32, p: Lebesgue) -> Result<Ratio<i64>> {
    if l > m || k > m {
        return Err(Error::Precondition(format!("need l <= m and k <= m (k={k}, l={l}, m={m})")));
    }
    let (k, l, m) = (k as i64, l as i64, m as i64);
    let theta = match p {
        Lebesgue::Finite(p) if p < 2 => {
            return Err(Error::Precondition(format!("p = {p} must be >= 2")));
        }
        Lebesgue::Infinity if l > k + 1 || m < k + 2 => {
            return Err(Error::Precondition(format!("p = inf needs l <= k+1 and m >= k+2 (k={k}, l={l}, m={m})")));
        }
        _ if l == m => {
            return if k == l && p == Lebesgue::Finite(2) {
                Ok(Ratio::from_integer(1))
            } else {
                Err(Error::Precondition(format!("l = m = {m} requires k = l and p = 2")))
            };
        }
        Lebesgue::Finite(p) => {
            let p = p as i64;
            Ratio::new(2 * k * p - 6 - 2 * m * p + 3 * p, 2 * p * (l - m))
        }
        Lebesgue::Infinity => Ratio::new(2 * k - 2 * m + 3, 2 * (l - m)),
    };
    if theta < Ratio::from_integer(0) || theta > Ratio::from_integer(1) {
        return Err(Error::Infeasible(format!("theta = {theta} outside [0, 1]")));
    }
    Ok(theta)
}

/// Copies band-limited coefficients onto a grid with twice the points.
fn zero_pad(s: &Spectrum) -> Result<Spectrum> {
    let grid = s.grid();
    let fine = Grid::new(2 * grid.n(), grid.half_length())?;
    let n2 = fine.n() as i64;
    let mut out = Spectrum::zeros(&fine);
    for (idx, c) in s.coeffs().iter().enumerate() {
        if *c == Complex64::new(0.0, 0.0) {
            continue;
        }
        let k = grid.integer_wavevector(idx).map(|k| k.rem_euclid(n2) as usize);
        out.coeffs_mut()[fine.join_index(k)] = *c;
    }
    Ok(out)
}

fn sup(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `||[grad^k, f] g|| / (||grad f||_inf ||grad^{k-1} g|| + ||grad^k f|| ||g||_inf)`.
///
/// Evaluated on a grid with twice the points so the products are exact for
/// inputs band-limited to the 2/3 ball.
pub fn commutator_check(f: &Spectrum, g: &Spectrum, k: usize) -> Result<f64> {
    if !(1..=3).contains(&k) {
        return Err(Error::Precondition(format!("commutator order {k} must be 1, 2 or 3")));
    }
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", f.grid(), g.grid())));
    }
    let grid = f.grid();
    for s in [f, g] {
        if (0..grid.len()).any(|i| !grid.dealias_keep(i) && s.coeffs()[i].norm() > 0.0) {
            return Err(Error::Precondition("commutator inputs must be band-limited to the 2/3 ball".into()));
        }
    }
    let (fp, gp) = (zero_pad(f)?, zero_pad(g)?);
    let fine = fp.grid().clone();
    let (fx, gx) = (fp.to_physical(), gp.to_physical());
    let prod = Spectrum::from_physical(&fine, &fx.iter().zip(&gx).map(|(a, b)| a * b).collect::<Vec<_>>());
    let mut num_sq = 0.0;
    for (alpha, mult) in multi_indices(k) {
        let a = prod.partial(alpha).to_physical();
        let b = gp.partial(alpha).to_physical();
        let h: Vec<f64> = a.iter().zip(&b).zip(&fx).map(|((a, b), f)| a - f * b).collect();
        num_sq += mult * fine.l2_norm(&h).powi(2);
    }
    let num = num_sq.sqrt();
    let grad_f_sup = sup(&pointwise_grad_magnitude(&fp, 1));
    let den = grad_f_sup * g.grad_norm_sq(k as u32 - 1).sqrt() + f.grad_norm_sq(k as u32).sqrt() * sup(&gx);
    if den == 0.0 {
        let scale = sup(&fx) * g.grad_norm_sq(k as u32).sqrt();
        return Ok(if num <= 1e-12 * scale { 0.0 } else { f64::INFINITY });
    }
    Ok(num / den)
}

/// Which side of 1 an exponent lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Above,
    One,
    Below,
}

impl Branch {
    pub fn of(r: f64) -> Self {
        if r > 1.0 {
            Branch::Above
        } else if r == 1.0 {
            Branch::One
        } else {
            Branch::Below
        }
    }
}

/// Exponents of `int (1+t-tau)^{-r1} (1+tau)^{-r2} dtau` and the slack `eps0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvolutionBoundCase {
    pub r1: f64,
    pub r2: f64,
    pub eps0: f64,
}

impl ConvolutionBoundCase {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        Self::with_slack(r1, r2, 0.01)
    }

    pub fn with_slack(r1: f64, r2: f64, eps0: f64) -> Result<Self> {
        if !(r1 > 0.0 && r2 > 0.0) || !(eps0 > 0.0 && eps0 < 1.0) {
            return Err(Error::Precondition(format!("need r1, r2 > 0 and 0 < eps0 < 1 ({r1}, {r2}, {eps0})")));
        }
        Ok(Self { r1, r2, eps0 })
    }

    /// Branch for the integral over `[0, t/2]` (set by `r2`) and over `[t/2, t]` (set by `r1`).
    pub fn branches(&self) -> (Branch, Branch) {
        (Branch::of(self.r2), Branch::of(self.r1))
    }

    /// Envelope bounding the integral over `[0, t/2]`.
    pub fn first_envelope(&self, t: f64) -> f64 {
        self.envelope(t, self.r1, self.r2)
    }

    /// Envelope bounding the integral over `[t/2, t]`.
    pub fn second_envelope(&self, t: f64) -> f64 {
        self.envelope(t, self.r2, self.r1)
    }

    fn envelope(&self, t: f64, lead: f64, other: f64) -> f64 {
        let exponent = match Branch::of(other) {
            Branch::Above => -lead,
            Branch::One => -lead + self.eps0,
            Branch::Below => -(self.r1 + self.r2 - 1.0),
        };
        (1.0 + t).powf(exponent)
    }
}

/// Both halves of the time convolution at `t`.
pub fn convolution_integrals(r1: f64, r2: f64, t: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("t = {t} must be >= 0")));
    }
    if t == 0.0 {
        return Ok((0.0, 0.0));
    }
    let kernel = |tau: f64| (1.0 + t - tau).powf(-r1) * (1.0 + tau).powf(-r2);
    Ok((integrate(kernel, 0.0, 0.5 * t, 0.0, 1e-10)?, integrate(kernel, 0.5 * t, t, 0.0, 1e-10)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvolutionReport {
    pub case: ConvolutionBoundCase,
    pub times: Vec<f64>,
    pub first_ratios: Vec<f64>,
    pub second_ratios: Vec<f64>,
    /// `(max - min) / max` of each ratio over the top decade of times.
    pub first_spread: f64,
    pub second_spread: f64,
}

impl ConvolutionReport {
    pub fn max_first(&self) -> f64 {
        self.first_ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_second(&self) -> f64 {
        self.second_ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_stable(&self, tolerance: f64) -> bool {
        self.max_first().is_finite()
            && self.max_second().is_finite()
            && self.first_spread < tolerance
            && self.second_spread < tolerance
    }
}

fn top_decade_spread(times: &[f64], ratios: &[f64]) -> f64 {
    let top = times.iter().copied().fold(0.0, f64::max);
    let (lo, hi) = times
        .iter()
        .zip(ratios)
        .filter(|(t, _)| **t >= top / 10.0)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), (_, &r)| (lo.min(r), hi.max(r)));
    if hi == 0.0 {
        0.0
    } else {
        (hi - lo) / hi
    }
}

/// Ratios of both convolution halves to their envelopes over `t_grid`.
pub fn convolution_bound_check(case: &ConvolutionBoundCase, t_grid: &[f64]) -> Result<ConvolutionReport> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !(1.0..=1e6).contains(t)) {
        return Err(Error::Precondition("convolution times must be non-empty and lie in [1, 1e6]".into()));
    }
    let mut first = Vec::with_capacity(t_grid.len());
    let mut second = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let (a, b) = convolution_integrals(case.r1, case.r2, t)?;
        first.push(a / case.first_envelope(t));
        second.push(b / case.second_envelope(t));
    }
    Ok(ConvolutionReport {
        case: *case,
        times: t_grid.to_vec(),
        first_spread: top_decade_spread(t_grid, &first),
        second_spread: top_decade_spread(t_grid, &second),
        first_ratios: first,
        second_ratios: second,
    })
}

/// One line of a `check` report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub params: serde_json::Value,
    pub ratio_or_value: f64,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(check: &str, params: serde_json::Value, ratio_or_value: f64, pass: bool) -> Self {
        Self { check: check.to_string(), params, ratio_or_value, pass }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::log_times;
    use crate::spectral::random_smooth_scalar;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random(grid: &Grid, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpectralField::random_smooth(grid, &mut rng, (grid.n() / 2 - 1) as f64, 1.0)
    }

    #[test]
    fn energy_basics() {
        let g = Grid::new(8, PI).unwrap();
        assert_eq!(energy(&SpectralField::zeros(&g), 0, 0.1).unwrap(), 0.0);
        let mut u = random(&g, 1);
        for l in 0..4 {
            assert_eq!(energy(&u, l, 0.0).unwrap(), energy_norm_sq(&u, l));
        }
        let e = energy(&u, 1, 0.1).unwrap();
        assert!((energy(&u.scaled(3.0), 1, 0.1).unwrap() - 9.0 * e).abs() <= 1e-12 * e);
        u.v = [Spectrum::zeros(&g), Spectrum::zeros(&g), Spectrum::zeros(&g)];
        assert_eq!(energy(&u, 0, 0.1).unwrap(), energy_norm_sq(&u, 0));
        assert!(energy(&u, 4, 0.1).is_err());
        assert!(energy(&u, 0, 2.0).is_err());
    }

    #[test]
    fn cross_term_matches_physical_quadrature() {
        // int v . grad n dx for n = cos x, v = (sin x, 0, 0): -sin^2 x integrated = -(2 pi)^3 / 2
        let g = Grid::new(8, PI).unwrap();
        let zero = vec![0.0; g.len()];
        let n = g.sample(|x| x[0].cos());
        let vx = g.sample(|x| x[0].sin());
        let u = SpectralField::from_physical(&g, [&n, &vx, &zero, &zero, &zero]);
        let expected = -(2.0 * PI).powi(3) / 2.0;
        assert!((energy_cross(&u, 0) - expected).abs() < 1e-10);
        assert!((energy_cross(&u, 2) - expected).abs() < 1e-10);
    }

    #[test]
    fn high_freq_energy_mask() {
        let g = Grid::new(8, PI).unwrap();
        let zero = vec![0.0; g.len()];
        let n = g.sample(|x| x[0].cos());
        let vx = g.sample(|x| x[0].sin());
        let u = SpectralField::from_physical(&g, [&n, &vx, &zero, &zero, &zero]);
        assert_eq!(high_freq_energy(&u, 2.0, 0.1).unwrap(), u.grad_norm_sq(3));
        assert!(high_freq_energy(&u, 1.0, 0.1).unwrap() > u.grad_norm_sq(3));
        assert_eq!(high_freq_energy(&SpectralField::zeros(&g), 2.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn gn_exponent_values() {
        assert_eq!(gn_exponent(1, 0, 2, Lebesgue::Finite(2)).unwrap(), Ratio::new(1, 2));
        assert_eq!(gn_exponent(0, 0, 1, Lebesgue::Finite(6)).unwrap(), Ratio::from_integer(0));
        assert_eq!(gn_exponent(2, 2, 4, Lebesgue::Finite(2)).unwrap(), Ratio::from_integer(1));
        assert_eq!(gn_exponent(3, 3, 3, Lebesgue::Finite(2)).unwrap(), Ratio::from_integer(1));
        // L^inf: (2k - 2m + 3) / (2(l - m)) with k=0, l=0, m=2 -> 1/4
        assert_eq!(gn_exponent(0, 0, 2, Lebesgue::Infinity).unwrap(), Ratio::new(1, 4));
        assert!(matches!(gn_exponent(0, 2, 2, Lebesgue::Finite(2)), Err(Error::Precondition(_))));
        assert!(matches!(gn_exponent(0, 0, 1, Lebesgue::Infinity), Err(Error::Precondition(_))));
        assert!(matches!(gn_exponent(0, 1, 3, Lebesgue::Finite(2)), Err(Error::Infeasible(_))));
        assert!(matches!(gn_exponent(0, 0, 1, Lebesgue::Finite(1)), Err(Error::Precondition(_))));
    }

    fn band_limited(g: &Grid, seed: u64) -> Spectrum {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_smooth_scalar(g, &mut rng, g.n() as f64 / 3.0 - 0.01)
    }

    #[test]
    fn commutator_first_order_is_product_rule() {
        let g = Grid::new(16, PI).unwrap();
        for seed in 0..5 {
            let (f, h) = (band_limited(&g, seed), band_limited(&g, 100 + seed));
            let r = commutator_check(&f, &h, 1).unwrap();
            assert!(r > 0.0 && r <= 1.0, "ratio {r}");
        }
    }

    #[test]
    fn commutator_of_constant_vanishes() {
        let g = Grid::new(16, PI).unwrap();
        let c = Spectrum::from_physical(&g, &vec![2.5; g.len()]);
        assert_eq!(commutator_check(&c, &band_limited(&g, 3), 2).unwrap(), 0.0);
        let rough = Spectrum::from_physical(&g, &g.sample(|x| (7.0 * x[0]).cos()));
        assert!(commutator_check(&rough, &rough, 1).is_err());
    }

    #[test]
    fn hardy_basics() {
        let g = Grid::new(32, 8.0).unwrap();
        let f = g.sample(|x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        let r = hardy_check(&g, &f, 1).unwrap();
        assert!(r.is_finite() && r > 0.0);
        let scaled: Vec<f64> = f.iter().map(|x| -3.0 * x).collect();
        assert!((hardy_check(&g, &scaled, 1).unwrap() - r).abs() <= 1e-14 * r);
        assert_eq!(hardy_check(&g, &vec![0.0; g.len()], 1).unwrap(), 0.0);
        assert!(hardy_check(&g, &vec![1.0; g.len()], 1).is_err());
    }

    #[test]
    fn convolution_closed_form() {
        assert_eq!(convolution_integrals(1.5, 2.0, 0.0).unwrap(), (0.0, 0.0));
        // r1 = 0, r2 = 2: int_0^{t/2} (1+tau)^-2 = 1 - 1/(1 + t/2)
        let (a, _) = convolution_integrals(1e-300, 2.0, 10.0).unwrap();
        assert!((a - (1.0 - 1.0 / 6.0)).abs() < 1e-9);
    }

    #[test]
    fn convolution_branches() {
        let c = ConvolutionBoundCase::new(1.0, 0.5).unwrap();
        assert_eq!(c.branches(), (Branch::Below, Branch::One));
        assert!((c.second_envelope(99.0) - 100f64.powf(-0.5 + 0.01)).abs() < 1e-15);
        assert!((c.first_envelope(99.0) - 100f64.powf(-0.5)).abs() < 1e-15);
        let c = ConvolutionBoundCase::new(2.25, 1.25).unwrap();
        let rep = convolution_bound_check(&c, &log_times(1.0, 1e6, 25)).unwrap();
        assert!(rep.is_stable(0.1), "{rep:?}");
        assert!(ConvolutionBoundCase::with_slack(1.0, 1.0, 1.0).is_err());
        assert!(convolution_bound_check(&c, &[0.5]).is_err());
    }

    #[test]
    fn report_json_line() {
        let r = CheckReport::new("gn_exponent", serde_json::json!({"k": 1}), 0.5, true);
        assert_eq!(r.to_json_line(), r#"{"check":"gn_exponent","params":{"k":1},"ratio_or_value":0.5,"pass":true}"#);
    }
}
