//! Periodic spectral toolkit on the box `[-L, L]^3`.
//!
//! Coefficients are stored DFT-normalized (`1/N^3` on the forward
//! transform) so that `||f||^2_{L^2} = (2L)^3 sum |c_k|^2`. Physical
//! frequencies are `xi = (pi / L) k` for integer wavevectors `k`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

struct Fft3 {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid with `n` points per axis (a power of two).
#[derive(Clone)]
pub struct Grid {
    n: usize,
    half_length: f64,
    fft: Arc<Fft3>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).field("half_length", &self.half_length).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_length == other.half_length
    }
}

impl Grid {
    pub fn new(n: usize, half_length: f64) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Precondition(format!("grid resolution {n} must be a power of two >= 4")));
        }
        if !(half_length > 0.0) {
            return Err(Error::Precondition(format!("box half-length {half_length} must be positive")));
        }
        let mut planner = FftPlanner::new();
        let fft = Fft3 { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) };
        Ok(Self { n, half_length, fft: Arc::new(fft) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// Number of grid points, `n^3`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    /// Volume of the periodic box, `(2L)^3`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_length).powi(3)
    }

    /// `pi / L`, the physical frequency of integer wavenumber 1.
    pub fn frequency_unit(&self) -> f64 {
        PI / self.half_length
    }

    /// Largest resolved frequency magnitude along one axis.
    pub fn max_frequency(&self) -> f64 {
        self.frequency_unit() * (self.n / 2) as f64
    }

    #[inline]
    pub fn split_index(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    #[inline]
    pub fn join_index(&self, ijk: [usize; 3]) -> usize {
        (ijk[0] * self.n + ijk[1]) * self.n + ijk[2]
    }

    /// Signed integer wavenumber of DFT index `m` (Nyquist maps to `-n/2`).
    #[inline]
    pub fn wavenumber(&self, m: usize) -> i64 {
        if m < self.n / 2 {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    #[inline]
    pub fn integer_wavevector(&self, idx: usize) -> [i64; 3] {
        self.split_index(idx).map(|m| self.wavenumber(m))
    }

    #[inline]
    pub fn xi(&self, idx: usize) -> [f64; 3] {
        let u = self.frequency_unit();
        self.integer_wavevector(idx).map(|k| u * k as f64)
    }

    #[inline]
    pub fn xi_norm(&self, idx: usize) -> f64 {
        let [a, b, c] = self.xi(idx);
        (a * a + b * b + c * c).sqrt()
    }

    /// Frequency used by first derivatives: the Nyquist component is zero,
    /// since its sine part is not representable on the grid.
    #[inline]
    pub fn derivative_xi(&self, idx: usize) -> [f64; 3] {
        let u = self.frequency_unit();
        let half = self.n / 2;
        self.split_index(idx).map(|m| if m == half { 0.0 } else { u * self.wavenumber(m) as f64 })
    }

    /// Index of the wavevector `-k`.
    #[inline]
    pub fn neg_index(&self, idx: usize) -> usize {
        let n = self.n;
        self.join_index(self.split_index(idx).map(|m| (n - m) % n))
    }

    /// Physical coordinate of grid point `idx`, with `x_0 = -L`.
    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        self.split_index(idx).map(|i| -self.half_length + h * i as f64)
    }

    /// 2/3-rule mask: keeps `|k| <= n/3` (integer wavevector norm).
    #[inline]
    pub fn dealias_keep(&self, idx: usize) -> bool {
        let [a, b, c] = self.integer_wavevector(idx);
        9 * (a * a + b * b + c * c) <= (self.n * self.n) as i64
    }

    /// True for grid points on the outer faces of the box.
    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        self.split_index(idx).iter().any(|&i| i == 0 || i == self.n - 1)
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.fft.inverse } else { &self.fft.forward };
        if axis == 2 {
            plan.process(data);
            return;
        }
        let stride = if axis == 1 { n } else { n * n };
        let mut lines = vec![Complex64::new(0.0, 0.0); data.len()];
        let mut line = 0;
        for base in 0..data.len() {
            let pos = if axis == 1 { (base / n) % n } else { base / (n * n) };
            if pos != 0 {
                continue;
            }
            for t in 0..n {
                lines[line * n + t] = data[base + t * stride];
            }
            line += 1;
        }
        plan.process(&mut lines);
        let mut line = 0;
        for base in 0..data.len() {
            let pos = if axis == 1 { (base / n) % n } else { base / (n * n) };
            if pos != 0 {
                continue;
            }
            for t in 0..n {
                data[base + t * stride] = lines[line * n + t];
            }
            line += 1;
        }
    }

    /// Normalized forward transform of a real field.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.len());
        let mut data: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for axis in 0..3 {
            self.transform_axis(&mut data, axis, false);
        }
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }

    /// Inverse transform, keeping the real part.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len());
        let mut data = coeffs.to_vec();
        for axis in 0..3 {
            self.transform_axis(&mut data, axis, true);
        }
        data.into_iter().map(|c| c.re).collect()
    }

    /// Samples `f(x)` at every grid point.
    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.position(i))).collect()
    }

    /// Physical-space `L^2` norm by the rectangle rule.
    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        (values.iter().map(|x| x * x).sum::<f64>() * self.cell_volume()).sqrt()
    }
}

/// Fourier coefficients of one real scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), coeffs: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.len());
        Self { grid: grid.clone(), coeffs }
    }

    pub fn from_physical(grid: &Grid, values: &[f64]) -> Self {
        Self { grid: grid.clone(), coeffs: grid.forward(values) }
    }

    pub fn to_physical(&self) -> Vec<f64> {
        self.grid.inverse(&self.coeffs)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    fn check_grid(&self, other: &Spectrum) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    /// Multiplies every coefficient by `weight(idx)`.
    pub fn map_multiplier(&self, weight: impl Fn(usize) -> Complex64) -> Spectrum {
        let coeffs = self.coeffs.iter().enumerate().map(|(i, c)| c * weight(i)).collect();
        Spectrum { grid: self.grid.clone(), coeffs }
    }

    /// Spectral `d/dx_axis`.
    pub fn derivative(&self, axis: usize) -> Spectrum {
        self.map_multiplier(|i| Complex64::new(0.0, self.grid.derivative_xi(i)[axis]))
    }

    /// Mixed partial `d^alpha` with derivative frequencies.
    pub fn partial(&self, alpha: [usize; 3]) -> Spectrum {
        self.map_multiplier(|i| {
            let xi = self.grid.derivative_xi(i);
            let mut m = Complex64::new(1.0, 0.0);
            for a in 0..3 {
                m *= Complex64::new(0.0, xi[a]).powu(alpha[a] as u32);
            }
            m
        })
    }

    pub fn gradient(&self) -> [Spectrum; 3] {
        [self.derivative(0), self.derivative(1), self.derivative(2)]
    }

    pub fn laplacian(&self) -> Spectrum {
        self.map_multiplier(|i| {
            let [a, b, c] = self.grid.derivative_xi(i);
            Complex64::new(-(a * a + b * b + c * c), 0.0)
        })
    }

    pub fn scaled(&self, a: f64) -> Spectrum {
        Spectrum { grid: self.grid.clone(), coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Spectrum) {
        debug_assert!(self.grid == other.grid);
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
    }

    /// Applies the 2/3-rule truncation in place.
    pub fn dealias(&mut self) {
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            if !self.grid.dealias_keep(i) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn dealiased(&self) -> Spectrum {
        let mut s = self.clone();
        s.dealias();
        s
    }

    /// `||grad^k f||^2_{L^2}` computed from the coefficients.
    pub fn grad_norm_sq(&self, k: u32) -> f64 {
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let r2 = self.grid.xi_norm(i).powi(2);
                r2.powi(k as i32) * c.norm_sqr()
            })
            .sum();
        sum * self.grid.volume()
    }

    /// Real `L^2` inner product.
    pub fn inner(&self, other: &Spectrum) -> f64 {
        let sum: f64 = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a * b.conj()).re).sum();
        sum * self.grid.volume()
    }

    /// Largest `|c(-k) - conj(c(k))|`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[self.grid.neg_index(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Replaces the coefficients by their Hermitian-symmetric part.
    pub fn symmetrize(&mut self) {
        let sym: Vec<Complex64> = (0..self.coeffs.len())
            .map(|i| 0.5 * (self.coeffs[i] + self.coeffs[self.grid.neg_index(i)].conj()))
            .collect();
        self.coeffs = sym;
    }
}

/// The perturbation unknowns `(n, v, q)` in Fourier space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub n: Spectrum,
    pub v: [Spectrum; 3],
    pub q: Spectrum,
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        let z = Spectrum::zeros(grid);
        Self { n: z.clone(), v: [z.clone(), z.clone(), z.clone()], q: z }
    }

    pub fn grid(&self) -> &Grid {
        self.n.grid()
    }

    pub fn from_physical(grid: &Grid, components: [&[f64]; 5]) -> Self {
        let s = |x: &[f64]| Spectrum::from_physical(grid, x);
        Self {
            n: s(components[0]),
            v: [s(components[1]), s(components[2]), s(components[3])],
            q: s(components[4]),
        }
    }

    pub fn to_physical(&self) -> [Vec<f64>; 5] {
        [
            self.n.to_physical(),
            self.v[0].to_physical(),
            self.v[1].to_physical(),
            self.v[2].to_physical(),
            self.q.to_physical(),
        ]
    }

    pub fn components(&self) -> [&Spectrum; 5] {
        [&self.n, &self.v[0], &self.v[1], &self.v[2], &self.q]
    }

    pub fn components_mut(&mut self) -> [&mut Spectrum; 5] {
        let [v0, v1, v2] = &mut self.v;
        [&mut self.n, v0, v1, v2, &mut self.q]
    }

    pub fn map(&self, f: impl Fn(&Spectrum) -> Spectrum) -> Self {
        Self { n: f(&self.n), v: [f(&self.v[0]), f(&self.v[1]), f(&self.v[2])], q: f(&self.q) }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|s| s.scaled(a))
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        for (x, y) in self.components_mut().into_iter().zip(other.components()) {
            x.axpy(a, y);
        }
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn dealiased(&self) -> Self {
        self.map(Spectrum::dealiased)
    }

    /// `||grad^k (n, v, q)||^2_{L^2}` summed over all five components.
    pub fn grad_norm_sq(&self, k: u32) -> f64 {
        self.components().iter().map(|c| c.grad_norm_sq(k)).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.grad_norm_sq(0).sqrt()
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.components().iter().map(|c| c.hermitian_defect()).fold(0.0, f64::max)
    }

    /// Largest pointwise magnitude over all components.
    pub fn max_abs(&self) -> f64 {
        self.to_physical().iter().flat_map(|c| c.iter()).fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Random real field supported on integer wavevectors `0 < |k| <= k_max`,
    /// rescaled so the largest pointwise component magnitude is `amplitude`.
    pub fn random_smooth(grid: &Grid, rng: &mut impl Rng, k_max: f64, amplitude: f64) -> Self {
        let mut field = Self::zeros(grid);
        for comp in field.components_mut() {
            *comp = random_smooth_scalar(grid, rng, k_max);
        }
        let peak = field.max_abs();
        if peak > 0.0 {
            field = field.scaled(amplitude / peak);
        }
        field
    }
}

/// Random Hermitian-symmetric scalar spectrum on `0 < |k| <= k_max`.
pub fn random_smooth_scalar(grid: &Grid, rng: &mut impl Rng, k_max: f64) -> Spectrum {
    assert!(k_max < (grid.n() / 2) as f64, "random fields must stay below the Nyquist plane");
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    for i in 0..grid.len() {
        let j = grid.neg_index(i);
        if j < i {
            continue;
        }
        let [a, b, c] = grid.integer_wavevector(i);
        let k2 = (a * a + b * b + c * c) as f64;
        if k2 == 0.0 || k2 > k_max * k_max {
            continue;
        }
        let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if i == j {
            coeffs[i] = Complex64::new(z.re, 0.0);
        } else {
            coeffs[i] = z;
            coeffs[j] = z.conj();
        }
    }
    Spectrum::from_coeffs(grid, coeffs)
}

/// `||grad^k f||_{L^2}` and `||f||_{H^k}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevNorms {
    pub homogeneous: f64,
    pub full: f64,
}

pub const MAX_SOBOLEV_ORDER: u32 = 4;

/// Sobolev norms of order `k <= 4` for the whole perturbation state.
pub fn sobolev_norm(field: &SpectralField, k: u32) -> Result<SobolevNorms> {
    if k > MAX_SOBOLEV_ORDER {
        return Err(Error::Precondition(format!("derivative order {k} exceeds {MAX_SOBOLEV_ORDER}")));
    }
    let homogeneous = field.grad_norm_sq(k).sqrt();
    let full = (0..=k).map(|j| field.grad_norm_sq(j)).sum::<f64>().sqrt();
    Ok(SobolevNorms { homogeneous, full })
}

/// Smooth radial cutoff equal to 1 on `|xi| <= eta/2` and 0 on `|xi| >= eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyCutoff {
    pub eta: f64,
}

impl FrequencyCutoff {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::Precondition(format!("cutoff radius {eta} must be positive")));
        }
        Ok(Self { eta })
    }

    /// Half the largest resolved frequency, so both parts are nontrivial.
    pub fn default_for(grid: &Grid) -> Self {
        Self { eta: 0.5 * grid.max_frequency() }
    }

    /// Quintic ramp matching value, slope and curvature at both ends.
    pub fn value(&self, r: f64) -> f64 {
        let lo = 0.5 * self.eta;
        if r <= lo {
            1.0
        } else if r >= self.eta {
            0.0
        } else {
            let s = (r - lo) / lo;
            1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
        }
    }
}

/// Low part `phi_0(D) f` and high part `f - f^l`.
pub fn frequency_split(field: &SpectralField, cutoff: &FrequencyCutoff) -> (SpectralField, SpectralField) {
    let grid = field.grid().clone();
    let low = field.map(|s| s.map_multiplier(|i| Complex64::new(cutoff.value(grid.xi_norm(i)), 0.0)));
    let high = field.sub(&low);
    (low, high)
}

/// Pseudo-spectral product with 2/3-rule truncation of inputs and output.
pub fn dealiased_product(a: &Spectrum, b: &Spectrum) -> Result<Spectrum> {
    a.check_grid(b)?;
    let grid = a.grid();
    let pa = a.dealiased().to_physical();
    let pb = b.dealiased().to_physical();
    let prod: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
    let mut out = Spectrum::from_physical(grid, &prod);
    out.dealias();
    Ok(out)
}

/// Multi-indices of order `k` with their multinomial multiplicities, so
/// that `|grad^k f|^2 = sum multiplicity * |d^alpha f|^2`.
pub fn multi_indices(k: usize) -> Vec<([usize; 3], f64)> {
    let fact = |m: usize| (1..=m).product::<usize>() as f64;
    let mut out = Vec::new();
    for a in 0..=k {
        for b in 0..=(k - a) {
            let c = k - a - b;
            out.push(([a, b, c], fact(k) / (fact(a) * fact(b) * fact(c))));
        }
    }
    out
}

/// Pointwise `|grad^k f|` on the grid.
pub fn pointwise_grad_magnitude(f: &Spectrum, k: usize) -> Vec<f64> {
    let mut acc = vec![0.0; f.grid().len()];
    for (alpha, mult) in multi_indices(k) {
        let d = f.partial(alpha).to_physical();
        for (s, x) in acc.iter_mut().zip(&d) {
            *s += mult * x * x;
        }
    }
    acc.into_iter().map(f64::sqrt).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> Grid {
        Grid::new(n, PI).unwrap()
    }

    fn random_field(g: &Grid, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpectralField::random_smooth(g, &mut rng, (g.n() / 2 - 1) as f64, 1.0)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(12, 1.0).is_err());
        assert!(Grid::new(16, 0.0).is_err());
    }

    #[test]
    fn transform_roundtrip_and_plancherel() {
        for n in [16, 32] {
            let g = grid(n);
            let f = random_field(&g, n as u64);
            for comp in f.components() {
                let phys = comp.to_physical();
                let back = Spectrum::from_physical(&g, &phys);
                let err = back.coeffs().iter().zip(comp.coeffs()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                assert!(err < 1e-14);
                assert!(rel(g.l2_norm(&phys), comp.grad_norm_sq(0).sqrt()) < 1e-10);
            }
        }
    }

    #[test]
    fn frequency_set_closed_under_negation() {
        let g = grid(8);
        for i in 0..g.len() {
            assert_eq!(g.neg_index(g.neg_index(i)), i);
            let k = g.integer_wavevector(i);
            let mk = g.integer_wavevector(g.neg_index(i));
            for a in 0..3 {
                assert_eq!((k[a] + mk[a]).rem_euclid(8), 0);
            }
        }
    }

    #[test]
    fn zero_field_norms_vanish() {
        let f = SpectralField::zeros(&grid(8));
        for k in 0..=4 {
            let s = sobolev_norm(&f, k).unwrap();
            assert_eq!(s.homogeneous, 0.0);
            assert_eq!(s.full, 0.0);
        }
        assert!(sobolev_norm(&f, 5).is_err());
    }

    #[test]
    fn single_mode_norm_identity() {
        let g = Grid::new(16, 2.0).unwrap();
        let xi0 = [2.0 * g.frequency_unit(), g.frequency_unit(), 0.0];
        let r = (xi0[0] * xi0[0] + xi0[1] * xi0[1]).sqrt();
        let phys = g.sample(|x| (xi0[0] * x[0] + xi0[1] * x[1]).cos());
        let mut f = SpectralField::zeros(&g);
        f.n = Spectrum::from_physical(&g, &phys);
        let base = sobolev_norm(&f, 0).unwrap().homogeneous;
        for k in 1..=4 {
            let nk = sobolev_norm(&f, k).unwrap().homogeneous;
            assert!(rel(nk, r.powi(k as i32) * base) < 1e-12);
        }
    }

    #[test]
    fn h1_is_l2_plus_gradient() {
        let f = random_field(&grid(16), 3);
        let h1 = sobolev_norm(&f, 1).unwrap().full;
        let l2 = sobolev_norm(&f, 0).unwrap().homogeneous;
        let d1 = sobolev_norm(&f, 1).unwrap().homogeneous;
        assert!(rel(h1 * h1, l2 * l2 + d1 * d1) < 1e-12);
    }

    #[test]
    fn gradient_raises_sobolev_order() {
        let f = random_field(&grid(16), 4);
        for k in 0..4u32 {
            let grad_sq: f64 = f.n.gradient().iter().map(|d| d.grad_norm_sq(k)).sum();
            assert!(rel(grad_sq, f.n.grad_norm_sq(k + 1)) < 1e-13);
        }
    }

    #[test]
    fn cutoff_plateaus_and_range() {
        let c = FrequencyCutoff::new(4.0).unwrap();
        assert_eq!(c.value(0.0), 1.0);
        assert_eq!(c.value(2.0), 1.0);
        assert_eq!(c.value(4.0), 0.0);
        assert_eq!(c.value(9.0), 0.0);
        for i in 0..=1000 {
            let v = c.value(2.0 + 2.0 * i as f64 / 1000.0);
            assert!((0.0..=1.0).contains(&v));
        }
        // smooth at the junctions
        let h = 1e-6;
        assert!((c.value(2.0 + h) - 1.0).abs() < 1e-12);
        assert!(c.value(4.0 - h).abs() < 1e-12);
        assert!(FrequencyCutoff::new(0.0).is_err());
    }

    #[test]
    fn split_of_low_and_high_supported_fields() {
        let g = grid(16);
        let cutoff = FrequencyCutoff::default_for(&g);
        let f = random_field(&g, 5);
        let low_only = f.map(|s| s.map_multiplier(|i| Complex64::new(f64::from(g.xi_norm(i) <= cutoff.eta / 2.0), 0.0)));
        let (l, h) = frequency_split(&low_only, &cutoff);
        assert_eq!(l, low_only);
        assert_eq!(h.l2_norm(), 0.0);
        let high_only = f.map(|s| s.map_multiplier(|i| Complex64::new(f64::from(g.xi_norm(i) >= cutoff.eta), 0.0)));
        let (l, h) = frequency_split(&high_only, &cutoff);
        assert_eq!(l.l2_norm(), 0.0);
        assert_eq!(h, high_only);
    }

    #[test]
    fn split_reconstructs_and_is_idempotent() {
        let g = grid(16);
        let cutoff = FrequencyCutoff::default_for(&g);
        let f = random_field(&g, 6);
        let (l, h) = frequency_split(&f, &cutoff);
        let mut sum = l.clone();
        sum.axpy(1.0, &h);
        assert!(sum.sub(&f).l2_norm() / f.l2_norm() <= 1e-12);
        let (ll, _) = frequency_split(&l, &cutoff);
        // phi_0 is not a projector on the ramp; idempotence holds off the ramp
        let ramp_free = |s: &SpectralField| {
            s.map(|c| c.map_multiplier(|i| {
                let r = g.xi_norm(i);
                Complex64::new(f64::from(r <= cutoff.eta / 2.0 || r >= cutoff.eta), 0.0)
            }))
        };
        let diff = ramp_free(&ll).sub(&ramp_free(&l)).l2_norm();
        assert!(diff <= 1e-12 * l.l2_norm());
    }

    #[test]
    fn product_with_constant_is_truncation() {
        let g = grid(16);
        let one = Spectrum::from_physical(&g, &vec![1.0; g.len()]);
        let b = random_field(&g, 7).q;
        let p = dealiased_product(&one, &b).unwrap();
        let t = b.dealiased();
        let err = p.coeffs().iter().zip(t.coeffs()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-15);
    }

    #[test]
    fn product_of_single_modes_matches_cosine_square() {
        // cos^2(a) = 1/2 + cos(2a)/2
        let g = grid(16);
        let k0 = g.frequency_unit() * 2.0;
        let a = Spectrum::from_physical(&g, &g.sample(|x| (k0 * x[0]).cos()));
        let p = dealiased_product(&a, &a).unwrap();
        let expected = Spectrum::from_physical(&g, &g.sample(|x| 0.5 + 0.5 * (2.0 * k0 * x[0]).cos()));
        let err = p.coeffs().iter().zip(expected.coeffs()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-14);
        let nonzero: Vec<[i64; 3]> =
            (0..g.len()).filter(|&i| p.coeffs()[i].norm() > 1e-12).map(|i| g.integer_wavevector(i)).collect();
        assert_eq!(nonzero.len(), 3);
        for k in nonzero {
            assert!(k == [0, 0, 0] || k == [4, 0, 0] || k == [-4, 0, 0]);
        }
    }

    #[test]
    fn second_harmonic_outside_ball_is_removed() {
        let g = grid(16);
        // |k| = 3 <= 16/3 but 2|k| = 6 > 16/3
        let k0 = g.frequency_unit() * 3.0;
        let a = Spectrum::from_physical(&g, &g.sample(|x| (k0 * x[1]).cos()));
        let p = dealiased_product(&a, &a).unwrap();
        for i in 0..g.len() {
            let k = g.integer_wavevector(i);
            if k[1].abs() == 6 {
                assert_eq!(p.coeffs()[i].norm(), 0.0);
            }
        }
        assert!((p.coeffs()[0].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn product_grid_mismatch() {
        let a = Spectrum::zeros(&grid(8));
        let b = Spectrum::zeros(&grid(16));
        assert!(matches!(dealiased_product(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn pointwise_gradient_magnitude_of_plane_wave() {
        let g = grid(16);
        let k0 = g.frequency_unit();
        let f = Spectrum::from_physical(&g, &g.sample(|x| (k0 * x[2]).sin()));
        let mag = pointwise_grad_magnitude(&f, 2);
        for (i, m) in mag.iter().enumerate() {
            let x = g.position(i);
            assert!((m - (k0 * k0 * (k0 * x[2]).sin()).abs()).abs() < 1e-12);
        }
        assert_eq!(multi_indices(4).iter().map(|(_, m)| m).sum::<f64>(), 81.0);
    }

    #[test]
    fn random_fields_are_hermitian() {
        let f = random_field(&grid(16), 9);
        assert_eq!(f.hermitian_defect(), 0.0);
        assert!((f.max_abs() - 1.0).abs() < 1e-12);
    }
}
