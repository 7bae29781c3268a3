//! Gaussian and imaginary-shifted Gaussian filters, exact filtered observables,
//! their time-domain quadrature with error bounds, imaginary-time shifts and
//! band-limited truncations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::GibbsContext;
use crate::linalg::{herm_eig, op_norm, ComplexMatrix, HermEig, C64, I, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Gaussian,
    ShiftedGaussian,
}

/// `g(t) = f(t + i s)` with `f(t) = exp(-t^2 / 2 tau^2) / sqrt(2 pi tau^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub tau: f64,
    pub shift_s: f64,
}

impl FilterSpec {
    pub fn gaussian(tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self { kind: FilterKind::Gaussian, tau, shift_s: 0.0 })
    }

    pub fn shifted(tau: f64, s: f64) -> Result<Self> {
        check_tau(tau)?;
        if !s.is_finite() {
            return Err(Error::ParameterOutOfRange(format!("shift {s} is not finite")));
        }
        Ok(Self { kind: FilterKind::ShiftedGaussian, tau, shift_s: s })
    }

    /// The shift `s = -beta/2` that turns `A_f` into `sigma^{1/2} A_f sigma^{-1/2}`.
    pub fn kms_shifted(tau: f64, beta: f64) -> Result<Self> {
        Self::shifted(tau, -beta / 2.0)
    }

    fn s(&self) -> f64 {
        match self.kind {
            FilterKind::Gaussian => 0.0,
            FilterKind::ShiftedGaussian => self.shift_s,
        }
    }

    /// Fourier transform `ĝ(w) = ∫ g(t) e^{-iwt} dt = e^{-s w} e^{-tau^2 w^2 / 2}`.
    pub fn fourier(&self, omega: f64) -> C64 {
        let s = self.s();
        C64::new((-s * omega - 0.5 * self.tau * self.tau * omega * omega).exp(), 0.0)
    }

    /// Time-domain value `f(t + i s)`.
    pub fn time(&self, t: f64) -> C64 {
        let z = C64::new(t, self.s());
        let tau2 = self.tau * self.tau;
        (-(z * z) / (2.0 * tau2)).exp() / (2.0 * PI * tau2).sqrt()
    }

    /// `|g|_{L1} = e^{s^2 / 2 tau^2}`, also the envelope constant `C_g` of `ĝ`.
    pub fn l1_norm(&self) -> f64 {
        let s = self.s();
        (s * s / (2.0 * self.tau * self.tau)).exp()
    }

    /// Center `mu_g = -s / tau^2` of the Gaussian envelope of `ĝ`.
    pub fn center(&self) -> f64 {
        -self.s() / (self.tau * self.tau)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!("tau = {tau} must be positive")))
    }
}

pub fn filter_fourier(spec: &FilterSpec, omega: f64) -> C64 {
    spec.fourier(omega)
}

pub fn l1_norm(spec: &FilterSpec) -> f64 {
    spec.l1_norm()
}

/// Multiplies energy-basis entries `(k, j)` by `w(E_j - E_k)`.
fn bohr_multiply(a: &ComplexMatrix, eig: &HermEig, w: impl Fn(f64) -> C64) -> Result<ComplexMatrix> {
    let d = eig.dim();
    if a.rows() != d || a.cols() != d {
        return Err(Error::ShapeMismatch(format!("operator {}x{} vs Hamiltonian dim {d}", a.rows(), a.cols())));
    }
    let mut ae = eig.to_eigenbasis(a);
    for k in 0..d {
        for j in 0..d {
            ae[(k, j)] *= w(eig.values[j] - eig.values[k]);
        }
    }
    Ok(eig.from_eigenbasis(&ae))
}

/// Exact filtered observable `A_g` with energy-basis entries `ĝ(E_j - E_k) A_kj`.
pub fn filtered_exact(a: &ComplexMatrix, ctx: &GibbsContext, spec: &FilterSpec) -> Result<ComplexMatrix> {
    filtered_exact_eig(a, &ctx.eig, spec)
}

pub fn filtered_exact_eig(a: &ComplexMatrix, eig: &HermEig, spec: &FilterSpec) -> Result<ComplexMatrix> {
    bohr_multiply(a, eig, |nu| spec.fourier(nu))
}

/// Time grid `t_j = -T + j dt`, `j = 0..M`, `dt = 2T/M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub t_cut: f64,
    pub m: usize,
}

impl QuadratureGrid {
    pub fn new(t_cut: f64, m: usize) -> Result<Self> {
        if !(t_cut > 0.0 && t_cut.is_finite()) || m == 0 || m % 2 != 0 {
            return Err(Error::ParameterOutOfRange(format!("grid needs T > 0 and even M > 0 (T = {t_cut}, M = {m})")));
        }
        Ok(Self { t_cut, m })
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.t_cut / self.m as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.m).map(|j| -self.t_cut + j as f64 * dt).collect()
    }

    /// Quadrature weights `c_j = dt g(t_j)`.
    pub fn weights(&self, spec: &FilterSpec) -> Vec<C64> {
        let dt = self.dt();
        self.points().into_iter().map(|t| spec.time(t) * dt).collect()
    }
}

/// Riemann sum `dt sum_j g(t_j) e^{iHt_j} A e^{-iHt_j}`.
pub fn filtered_quadrature(
    a: &ComplexMatrix,
    h: &ComplexMatrix,
    spec: &FilterSpec,
    grid: &QuadratureGrid,
) -> Result<ComplexMatrix> {
    let eig = herm_eig(h)?;
    let d = eig.dim();
    if a.rows() != d || a.cols() != d {
        return Err(Error::ShapeMismatch("observable and Hamiltonian dimensions differ".into()));
    }
    let mut out = ComplexMatrix::zeros(d, d);
    for (t, c) in grid.points().into_iter().zip(grid.weights(spec)) {
        let u = eig.map_complex(|e| (I * e * t).exp())?;
        let term = &(&u * a) * &u.adjoint();
        out.axpy(c, &term);
    }
    Ok(out)
}

/// Aliasing plus truncation bound on the quadrature error for `|A| <= 1`.
///
/// The aliasing part bounds each energy-basis entry of the error; `dim` converts it to an
/// operator-norm bound through the Frobenius norm (factor `sqrt(dim)`), which is exact for
/// `dim = 1` and loose by at most `sqrt(dim)` otherwise.
pub fn quadrature_error_bound(spec: &FilterSpec, grid: &QuadratureGrid, h_norm: f64, dim: usize) -> Result<f64> {
    let (alias, trunc) = quadrature_error_terms(spec, grid, h_norm)?;
    Ok(alias * (dim.max(1) as f64).sqrt() + trunc)
}

/// The aliasing (per entry) and truncation terms separately.
pub fn quadrature_error_terms(spec: &FilterSpec, grid: &QuadratureGrid, h_norm: f64) -> Result<(f64, f64)> {
    let dt = grid.dt();
    let a = 2.0 * PI / dt;
    let b = 2.0 * h_norm + spec.center().abs();
    if a <= b {
        return Err(Error::AliasRegimeViolated { a, b });
    }
    let kappa = 0.5 * spec.tau * spec.tau * (a - b) * (a - b);
    let q = (-kappa).exp();
    let alias = 2.0 * spec.l1_norm() * q / (1.0 - q);

    // |g(t)| = C_g f(t) is even and decreasing in |t|; sum both tails from |k| = M/2.
    let envelope = |t: f64| spec.l1_norm() * (-(t * t) / (2.0 * spec.tau * spec.tau)).exp() / (2.0 * PI * spec.tau * spec.tau).sqrt();
    let mut k = (grid.m / 2) as f64;
    let mut tail = 0.0;
    loop {
        let term = envelope(k * dt);
        tail += term;
        if term < 1e-18 {
            // Remaining terms shrink at least geometrically with ratio r.
            let r = (-(2.0 * k + 1.0) * dt * dt / (2.0 * spec.tau * spec.tau)).exp();
            tail += term * r / (1.0 - r);
            break;
        }
        k += 1.0;
    }
    Ok((alias, 2.0 * dt * tail))
}

pub const SHIFT_WARN: f64 = 1e8;
pub const SHIFT_REFUSE: f64 = 1e12;

/// `e^{sH} A e^{-sH}`.
pub fn imaginary_shift(a: &ComplexMatrix, s: f64, ctx: &GibbsContext) -> Result<ComplexMatrix> {
    ctx.check_shape(a)?;
    let cond = (2.0 * s.abs() * ctx.h_norm).exp();
    if cond > SHIFT_REFUSE {
        return Err(Error::IllConditioned(format!("e^(2|s||H|) = {cond:e} for shift {s}")));
    }
    if cond > SHIFT_WARN {
        log::warn!("imaginary shift {s} has condition number {cond:e}");
    }
    Ok(&(&ctx.exp_h(s) * a) * &ctx.exp_h(-s))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    Sharp,
    Smooth,
}

/// Smooth cutoff: 1 on `|x| <= 1/2`, 0 on `|x| >= 1`, with a C-infinity transition built from
/// the one-sided bump `h(y) = e^{-1/y}` as `1 - h(y)/(h(y) + h(1-y))`, `y = 2|x| - 1`.
pub fn smooth_cutoff(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 0.5 {
        return 1.0;
    }
    if ax >= 1.0 {
        return 0.0;
    }
    let y = 2.0 * ax - 1.0;
    let h = |t: f64| if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() };
    1.0 - h(y) / (h(y) + h(1.0 - y))
}

fn cutoff_weight(cutoff: Cutoff, x: f64) -> f64 {
    match cutoff {
        Cutoff::Sharp => {
            if x.abs() < 1.0 {
                1.0
            } else {
                0.0
            }
        }
        Cutoff::Smooth => smooth_cutoff(x),
    }
}

/// `sum_nu chi(nu / Omega0) ĝ(nu) A_nu`.
pub fn bandlimit(
    a: &ComplexMatrix,
    ctx: &GibbsContext,
    spec: &FilterSpec,
    omega0: f64,
    cutoff: Cutoff,
) -> Result<ComplexMatrix> {
    bandlimit_eig(a, &ctx.eig, spec, omega0, cutoff)
}

pub fn bandlimit_eig(a: &ComplexMatrix, eig: &HermEig, spec: &FilterSpec, omega0: f64, cutoff: Cutoff) -> Result<ComplexMatrix> {
    if !(omega0 > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("Omega0 = {omega0} must be positive")));
    }
    bohr_multiply(a, eig, |nu| {
        let w = cutoff_weight(cutoff, nu / omega0);
        if w == 0.0 {
            ZERO
        } else {
            spec.fourier(nu) * w
        }
    })
}

/// Largest energy-basis entry of `x` between levels with `|E_j - E_k| >= omega`.
pub fn out_of_band_max(x: &ComplexMatrix, eig: &HermEig, omega: f64) -> f64 {
    let xe = eig.to_eigenbasis(x);
    let d = eig.dim();
    let mut worst: f64 = 0.0;
    for k in 0..d {
        for j in 0..d {
            if (eig.values[j] - eig.values[k]).abs() >= omega {
                worst = worst.max(xe[(k, j)].norm());
            }
        }
    }
    worst
}

/// Empirical calibration of the band-limit error `C (1 + tau Omega0)^3 e^{-c tau^2 Omega0^2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandlimitFit {
    /// Decay rate `c`: 1/2 for the Gaussian filter, 1/4 for the shifted one.
    pub rate: f64,
    /// Smallest `C` making the profile dominate every sampled error.
    pub constant: f64,
    /// `(Omega0, measured error, profile without C)`.
    pub samples: Vec<(f64, f64, f64)>,
}

pub fn bandlimit_profile(spec: &FilterSpec, omega0: f64) -> f64 {
    let rate = match spec.kind {
        FilterKind::Gaussian => 0.5,
        FilterKind::ShiftedGaussian => 0.25,
    };
    let x = spec.tau * omega0;
    (1.0 + x).powi(3) * (-rate * x * x).exp()
}

pub fn calibrate_bandlimit(a: &ComplexMatrix, ctx: &GibbsContext, spec: &FilterSpec, omegas: &[f64]) -> Result<BandlimitFit> {
    let exact = filtered_exact(a, ctx, spec)?;
    let mut samples = Vec::with_capacity(omegas.len());
    let mut constant: f64 = 0.0;
    for &w in omegas {
        let approx = bandlimit(a, ctx, spec, w, Cutoff::Smooth)?;
        let err = op_norm(&(&exact - &approx))?;
        let prof = bandlimit_profile(spec, w);
        constant = constant.max(err / prof);
        samples.push((w, err, prof));
    }
    let rate = match spec.kind {
        FilterKind::Gaussian => 0.5,
        FilterKind::ShiftedGaussian => 0.25,
    };
    Ok(BandlimitFit { rate, constant, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::make_gibbs_context;
    use crate::linalg::testutil::*;
    use crate::linalg::{pauli, ONE};

    #[test]
    fn fourier_values() {
        let g = FilterSpec::gaussian(1.0).unwrap();
        assert_eq!(g.fourier(0.0), ONE);
        assert!((g.fourier(2.0).re - 0.135335283236613).abs() < 1e-14);
        let sh = FilterSpec::kms_shifted(1.0, 1.0).unwrap();
        assert!((sh.fourier(0.0).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shifted_fourier_matches_envelope_form() {
        for (tau, beta) in [(1.0, 1.0), (2.0, 0.5), (0.7, 3.0)] {
            let sh = FilterSpec::kms_shifted(tau, beta).unwrap();
            let c = (beta * beta / (8.0 * tau * tau)).exp();
            for i in 0..100 {
                let w = -5.0 + 0.1 * i as f64;
                let want = c * (-(tau * tau / 2.0) * (w - beta / (2.0 * tau * tau)).powi(2)).exp();
                assert!((sh.fourier(w).re - want).abs() <= 1e-12 * want.max(1.0));
            }
            assert!((sh.center() - beta / (2.0 * tau * tau)).abs() < 1e-15);
        }
    }

    #[test]
    fn l1_norms() {
        assert_eq!(FilterSpec::gaussian(3.3).unwrap().l1_norm(), 1.0);
        assert!((FilterSpec::kms_shifted(1.0, 1.0).unwrap().l1_norm() - 1.133148).abs() < 1e-6);
        assert!((FilterSpec::kms_shifted(4.0, 1.0).unwrap().l1_norm() - 1.007844).abs() < 1e-6);
    }

    #[test]
    fn time_domain_modulus() {
        let sh = FilterSpec::shifted(1.3, 0.4).unwrap();
        let g = FilterSpec::gaussian(1.3).unwrap();
        for t in [-2.0, 0.0, 0.3, 5.0] {
            assert!((sh.time(t).norm() - sh.l1_norm() * g.time(t).re).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(FilterSpec::gaussian(0.0).is_err());
        assert!(FilterSpec::shifted(1.0, f64::NAN).is_err());
        assert!(QuadratureGrid::new(1.0, 3).is_err());
    }

    #[test]
    fn filtered_commuting_and_pauli() {
        let ctx = make_gibbs_context(&pauli::z(), 1.0).unwrap();
        let g = FilterSpec::gaussian(1.5).unwrap();
        let z = pauli::z();
        assert!((&filtered_exact(&z, &ctx, &g).unwrap() - &z).max_abs() < 1e-15);
        let xf = filtered_exact(&pauli::x(), &ctx, &g).unwrap();
        let want = pauli::x().scale_real((-2.0 * 1.5f64 * 1.5).exp());
        assert!((&xf - &want).max_abs() < 1e-15);
    }

    #[test]
    fn fine_grid_quadrature_oracle() {
        let ctx = make_gibbs_context(&pauli::z(), 1.0).unwrap();
        let tau = 0.6;
        let g = FilterSpec::gaussian(tau).unwrap();
        let grid = QuadratureGrid::new(10.0 * tau, (20.0 * tau / 1e-3).round() as usize / 2 * 2).unwrap();
        let q = filtered_quadrature(&pauli::x(), &ctx.h, &g, &grid).unwrap();
        let e = filtered_exact(&pauli::x(), &ctx, &g).unwrap();
        assert!((&q - &e).max_abs() < 1e-12);
    }

    #[test]
    fn large_tau_pinches() {
        let mut r = rng(20);
        let h = random_hermitian(&mut r, 4);
        let h = h.scale_real(1.0 / op_norm(&h).unwrap());
        let ctx = make_gibbs_context(&h, 1.0).unwrap();
        let a = random_hermitian(&mut r, 4);
        let af = filtered_exact(&a, &ctx, &FilterSpec::gaussian(50.0).unwrap()).unwrap();
        let ae = ctx.eig.to_eigenbasis(&af);
        let off: f64 = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| ae[(i, j)].norm()).sum();
        assert!(off <= 1e-8);
    }

    #[test]
    fn expectation_preserved_and_hermiticity() {
        let mut r = rng(21);
        let ctx = make_gibbs_context(&random_hermitian(&mut r, 4), 1.4).unwrap();
        let a = random_hermitian(&mut r, 4);
        let af = filtered_exact(&a, &ctx, &FilterSpec::gaussian(0.8).unwrap()).unwrap();
        assert!((ctx.expectation(&af) - ctx.expectation(&a)).norm() < 1e-10);
        assert!(af.hermiticity_residual() < 1e-14);
        let at = filtered_exact(&a, &ctx, &FilterSpec::kms_shifted(0.8, 1.4).unwrap()).unwrap();
        assert!(at.hermiticity_residual() > 1e-3);
    }

    #[test]
    fn quadrature_examples() {
        let ctx = make_gibbs_context(&pauli::z(), 1.0).unwrap();
        let g = FilterSpec::gaussian(1.0).unwrap();
        let exact = filtered_exact(&pauli::x(), &ctx, &g).unwrap();
        for m in [2usize, 16, 64, 256] {
            let grid = QuadratureGrid::new(8.0, m).unwrap();
            let bound = match quadrature_error_bound(&g, &grid, 1.0, 2) {
                Ok(b) => b,
                Err(Error::AliasRegimeViolated { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            let q = filtered_quadrature(&pauli::x(), &ctx.h, &g, &grid).unwrap();
            let err = op_norm(&(&q - &exact)).unwrap();
            assert!(err <= bound, "M={m} err={err} bound={bound}");
        }
        let fine = QuadratureGrid::new(12.0, 512).unwrap();
        assert!(quadrature_error_bound(&g, &fine, 1.0, 2).unwrap() < 1e-12);
        let b16 = quadrature_error_terms(&g, &QuadratureGrid::new(8.0, 16).unwrap(), 1.0).unwrap().0;
        let b64 = quadrature_error_terms(&g, &QuadratureGrid::new(8.0, 64).unwrap(), 1.0).unwrap().0;
        assert!(b16 > b64);
    }

    #[test]
    fn alias_regime() {
        let g = FilterSpec::gaussian(1.0).unwrap();
        let grid = QuadratureGrid::new(8.0, 2).unwrap();
        assert!(matches!(quadrature_error_bound(&g, &grid, 1.0, 2), Err(Error::AliasRegimeViolated { .. })));
    }

    #[test]
    fn commuting_quadrature_prefactor() {
        let ctx = make_gibbs_context(&pauli::z(), 1.0).unwrap();
        let g = FilterSpec::gaussian(1.0).unwrap();
        let grid = QuadratureGrid::new(4.0, 32).unwrap();
        let q = filtered_quadrature(&pauli::z(), &ctx.h, &g, &grid).unwrap();
        let pref: C64 = grid.weights(&g).iter().sum();
        assert!((&q - &pauli::z().scale(pref)).max_abs() < 1e-14);
        assert!((pref.re - 1.0).abs() < 1e-3);
    }

    #[test]
    fn imaginary_shift_dual_path() {
        let ctx = make_gibbs_context(&pauli::z(), 1.0).unwrap();
        let tau = 1.2;
        let af = filtered_exact(&pauli::x(), &ctx, &FilterSpec::gaussian(tau).unwrap()).unwrap();
        assert!((&imaginary_shift(&af, 0.0, &ctx).unwrap() - &af).max_abs() < 1e-15);
        for s in [-0.5, 0.3] {
            let lhs = imaginary_shift(&af, s, &ctx).unwrap();
            let rhs = filtered_exact(&pauli::x(), &ctx, &FilterSpec::shifted(tau, s).unwrap()).unwrap();
            assert!((&lhs - &rhs).max_abs() < 1e-12);
        }
        let lhs = &(ctx.sigma_half() * &af) * ctx.sigma_neg_half();
        let rhs = filtered_exact(&pauli::x(), &ctx, &FilterSpec::kms_shifted(tau, 1.0).unwrap()).unwrap();
        assert!((&lhs - &rhs).max_abs() < 1e-12);
    }

    #[test]
    fn imaginary_shift_refuses_huge_condition() {
        let ctx = make_gibbs_context(&pauli::z(), 1.0).unwrap();
        assert!(matches!(imaginary_shift(&pauli::x(), 20.0, &ctx), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn smooth_cutoff_shape() {
        assert_eq!(smooth_cutoff(0.5), 1.0);
        assert_eq!(smooth_cutoff(-0.2), 1.0);
        assert_eq!(smooth_cutoff(1.0), 0.0);
        assert!((smooth_cutoff(0.75) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = smooth_cutoff(0.5 + 0.005 * i as f64);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn bandlimit_examples() {
        let ctx = make_gibbs_context(&pauli::z(), 1.0).unwrap();
        let g = FilterSpec::gaussian(0.7).unwrap();
        let x = pauli::x();
        let full = bandlimit(&x, &ctx, &g, 4.5, Cutoff::Smooth).unwrap();
        assert!((&full - &filtered_exact(&x, &ctx, &g).unwrap()).max_abs() < 1e-15);
        for cut in [Cutoff::Sharp, Cutoff::Smooth] {
            let cut_x = bandlimit(&x, &ctx, &g, 1.0, cut).unwrap();
            assert!(cut_x.max_abs() < 1e-15);
        }
    }

    #[test]
    fn bandlimit_support_is_exact() {
        let mut r = rng(22);
        let ctx = make_gibbs_context(&random_hermitian(&mut r, 6), 1.0).unwrap();
        let a = random_hermitian(&mut r, 6);
        let spec = FilterSpec::kms_shifted(1.0, 1.0).unwrap();
        for cut in [Cutoff::Sharp, Cutoff::Smooth] {
            let b = bandlimit(&a, &ctx, &spec, 0.8, cut).unwrap();
            assert!(out_of_band_max(&b, &ctx.eig, 0.8) <= 1e-14);
        }
    }

    #[test]
    fn bandlimit_calibration_reports_constant() {
        let mut r = rng(23);
        let ctx = make_gibbs_context(&random_hermitian(&mut r, 4), 1.0).unwrap();
        let a = random_hermitian(&mut r, 4);
        let a = a.scale_real(1.0 / op_norm(&a).unwrap());
        let spec = FilterSpec::gaussian(1.0).unwrap();
        let fit = calibrate_bandlimit(&a, &ctx, &spec, &[0.5, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(fit.rate, 0.5);
        for (_, err, prof) in &fit.samples {
            assert!(*err <= fit.constant * prof * (1.0 + 1e-12));
        }
        assert!(fit.constant.is_finite());
    }
}
