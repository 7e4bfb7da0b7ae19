//! Quadratic observables `⟨W^ε(u, v), a⟩` against separable symbols.
//!
//! `⟨W^ε(u, v), a⟩ = ∫∫ φ(x) ψ̂(y) u(x + εy/2) conj(v(x - εy/2)) dx dy`
//! for `a = φ ⊗ ψ`, equivalently
//! `(2π)^d ∫∫ û(p) conj(v̂(q)) φ̂(q - p) ψ(ε(p + q)/2) dp dq`.
//! Pairings with at most one resolvent factor are closed form; two resolvents
//! go through the ray identity
//! `⟨W(u, v), a⟩ = (iε/2) ∫_0^∞ e^{-λt} [⟨W(S_u, v), a_t⟩ - ⟨W(u, S_v), a_t⟩] dt`
//! with `a_t(x, ξ) = a(x - tξ, ξ)` and `λ = (iε/2)(k_u² - conj(k_v²))`.

use crate::gaussian::{fourier_inner, inverse_transform_at, wigner_kernel, ClosedFormError, FourierFactor, Resolvent};
use crate::helmholtz::{solve_full, solve_rescaled, solve_single, HelmholtzError, OutgoingSolution, SpectralSolution};
use crate::model::{scale_concentrate, FieldExpr, Scenario};
use crate::quadrature::{
    adaptive_1d, adaptive_1d_with, composite_gl, gauss_legendre, mc_integrate, pairwise_sum, sphere_rule, GaussianSampler,
    McEstimate, MixtureSampler, ProductSampler, QuadError, Sampler,
};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Relative level below which a symbol counts as vanishing on a set.
pub const FLAG_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WignerError {
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Helmholtz(#[from] HelmholtzError),
    #[error("Monte Carlo budget exhausted: stderr {stderr:.3e} above tolerance {tol:.3e} after {samples} samples")]
    Budget { stderr: f64, tol: f64, samples: u64 },
    #[error("ray integral needs Re λ > 0 (got {0})")]
    NoDamping(f64),
    #[error("ray integral needs {needed} chunks, budget is {cap}")]
    RayBudget { needed: usize, cap: usize },
    #[error("unsupported dimension {0}")]
    Dimension(usize),
}

/// Separable phase-space symbol `a(x, ξ) = φ(x) ψ(ξ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub phi: FieldExpr,
    pub psi: FieldExpr,
    /// `ψ` is negligible on the unit sphere `|ξ| = 1`.
    pub off_sphere: bool,
    /// `ψ` is negligible near `ξ = 0`.
    pub off_zero_frequency: bool,
}

fn sup_estimate(f: &FieldExpr) -> f64 {
    let mut m: f64 = 0.0;
    for a in &f.atoms {
        m = m.max(f.eval(&a.center).norm());
    }
    m
}

impl Observable {
    /// Builds the symbol and measures both flags numerically.
    pub fn new(phi: FieldExpr, psi: FieldExpr) -> Self {
        let (off_sphere, off_zero_frequency) = flags(&psi);
        Self { phi, psi, off_sphere, off_zero_frequency }
    }

    pub fn dim(&self) -> usize {
        self.phi.dim
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> C64 {
        self.phi.eval(x) * self.psi.eval(xi)
    }

    pub fn conj(&self) -> Self {
        Self::new(self.phi.conj(), self.psi.conj())
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { phi: self.phi.scale(c), ..self.clone() }
    }

    /// `(x, ξ) ↦ conj(a(x, -ξ))`.
    pub fn reflected_conj(&self) -> Self {
        Self::new(self.phi.conj(), self.psi.reflect().conj())
    }

    /// `ξ·∇_x a` as a sum of separable symbols `∂_jφ ⊗ ξ_j ψ`.
    pub fn transport_terms(&self) -> Vec<Observable> {
        (0..self.dim()).map(|j| Observable::new(self.phi.deriv(j), self.psi.times_coord(j))).collect()
    }
}

/// `(off_sphere, off_zero_frequency)` for a frequency factor.
pub fn flags(psi: &FieldExpr) -> (bool, bool) {
    let d = psi.dim;
    let sup = sup_estimate(psi).max(1e-300);
    let on_sphere = match d {
        1 => psi.eval(&[1.0]).norm().max(psi.eval(&[-1.0]).norm()),
        _ => {
            let rule = sphere_rule(d, 60).expect("d = 2 or 3");
            rule.nodes.iter().map(|w| psi.eval(w).norm()).fold(0.0, f64::max)
        }
    };
    let near_zero = {
        let mut m = psi.eval(&vec![0.0; d]).norm();
        let r0 = 0.25;
        for j in 0..d {
            for s in [-1.0, 1.0] {
                let mut x = vec![0.0; d];
                x[j] = s * r0;
                m = m.max(psi.eval(&x).norm());
            }
        }
        m
    };
    (on_sphere < FLAG_TOL * sup, near_zero < FLAG_TOL * sup)
}

/// Argument of a pairing: a Gaussian field or a Helmholtz solution.
#[derive(Clone, Copy, Debug)]
pub enum FieldArg<'a> {
    Expr(&'a FieldExpr),
    Spectral(&'a SpectralSolution),
}

impl<'a> From<&'a FieldExpr> for FieldArg<'a> {
    fn from(f: &'a FieldExpr) -> Self {
        FieldArg::Expr(f)
    }
}

impl<'a> From<&'a SpectralSolution> for FieldArg<'a> {
    fn from(s: &'a SpectralSolution) -> Self {
        FieldArg::Spectral(s)
    }
}

impl FieldArg<'_> {
    pub fn dim(&self) -> usize {
        match self {
            FieldArg::Expr(f) => f.dim,
            FieldArg::Spectral(s) => s.d,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            FieldArg::Expr(f) => f.is_zero(),
            FieldArg::Spectral(s) => s.numerator.is_zero(),
        }
    }

    /// Pointwise value, closed form.
    pub fn eval(&self, x: &[f64]) -> Result<C64, WignerError> {
        match self {
            FieldArg::Expr(f) => Ok(f.eval(x)),
            FieldArg::Spectral(s) => Ok(s.evaluate_exact(x)?),
        }
    }

    fn fourier(&self) -> (FieldExpr, Option<Resolvent>) {
        match self {
            FieldArg::Expr(f) => (f.fourier_transform(), None),
            FieldArg::Spectral(s) => (s.numerator.clone(), Some(s.resolvent)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairingMethod {
    /// Closed form, or the ray identity with an adaptive `t`-integral.
    Deterministic,
    /// Importance-sampled direct-space Monte Carlo.
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingQuad {
    pub method: PairingMethod,
    /// Relative tolerance of the ray integral, or of the Monte Carlo stderr.
    pub rel_tol: f64,
    pub mc_samples: u64,
    pub seed: u64,
    /// Cap on the number of `t`-chunks in the ray integral.
    pub max_chunks: usize,
}

impl Default for PairingQuad {
    fn default() -> Self {
        Self { method: PairingMethod::Deterministic, rel_tol: 1e-9, mc_samples: 1 << 20, seed: 7, max_chunks: 20_000 }
    }
}

impl PairingQuad {
    pub fn monte_carlo(samples: u64, seed: u64) -> Self {
        Self { method: PairingMethod::MonteCarlo, rel_tol: f64::INFINITY, mc_samples: samples, seed, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerPairingResult {
    pub value: C64,
    pub error: f64,
    pub method: PairingMethod,
    /// Closed-form kernel evaluations or Monte Carlo samples spent.
    pub budget: u64,
}

impl WignerPairingResult {
    fn zero(method: PairingMethod) -> Self {
        Self { value: C64::new(0.0, 0.0), error: 0.0, method, budget: 0 }
    }

    pub fn scale(self, c: f64) -> Self {
        Self { value: self.value * c, error: self.error * c.abs(), ..self }
    }
}

/// Floor on the reported error of closed-form values.
const ROUNDOFF: f64 = 1e-12;

/// `⟨W^ε(u, v), a⟩`.
pub fn wigner_pairing<'a, 'b>(
    u: impl Into<FieldArg<'a>>,
    v: impl Into<FieldArg<'b>>,
    a: &Observable,
    eps: f64,
    quad: &PairingQuad,
) -> Result<WignerPairingResult, WignerError> {
    let (u, v) = (u.into(), v.into());
    if u.is_zero() || v.is_zero() || a.phi.is_zero() || a.psi.is_zero() {
        return Ok(WignerPairingResult::zero(quad.method));
    }
    match quad.method {
        PairingMethod::MonteCarlo => direct_mc(u, v, a, eps, quad),
        PairingMethod::Deterministic => {
            let (nu, ru) = u.fourier();
            let (nv, rv) = v.fourier();
            let phi_hat = a.phi.fourier_transform();
            match (ru, rv) {
                (Some(ru), Some(rv)) => ray_pairing(&nu, ru, &nv, rv, &phi_hat, &a.psi, eps, quad),
                _ => {
                    let fu = FourierFactor { numerator: &nu, resolvent: ru };
                    let fv = FourierFactor { numerator: &nv, resolvent: rv };
                    let value = wigner_kernel(fu, fv, &phi_hat, &a.psi, eps, 0.0)?;
                    let budget = (nu.atoms.len() * nv.atoms.len() * phi_hat.atoms.len() * a.psi.atoms.len()) as u64;
                    Ok(WignerPairingResult { value, error: ROUNDOFF * value.norm(), method: quad.method, budget })
                }
            }
        }
    }
}

fn envelope_sampler(f: &FieldExpr, inflate: f64) -> MixtureSampler {
    let components = f
        .atoms
        .iter()
        .map(|a| {
            let w = a.amplitude.norm() * (2.0 * PI / a.inv_variance).powf(a.dim() as f64 / 2.0);
            let s: Box<dyn Sampler> = Box::new(GaussianSampler::isotropic(a.center.clone(), inflate / a.inv_variance.sqrt()));
            (w.max(1e-300), s)
        })
        .collect();
    MixtureSampler { components }
}

fn direct_mc(u: FieldArg, v: FieldArg, a: &Observable, eps: f64, quad: &PairingQuad) -> Result<WignerPairingResult, WignerError> {
    let d = a.dim();
    let psi_hat = a.psi.fourier_transform();
    let sampler = ProductSampler {
        blocks: vec![Box::new(envelope_sampler(&a.phi, 1.25)), Box::new(envelope_sampler(&psi_hat, 1.25))],
    };
    let est = mc_integrate(
        |z: &[f64]| {
            let (x, y) = z.split_at(d);
            let xp: Vec<f64> = (0..d).map(|j| x[j] + 0.5 * eps * y[j]).collect();
            let xm: Vec<f64> = (0..d).map(|j| x[j] - 0.5 * eps * y[j]).collect();
            let uv = match (u.eval(&xp), v.eval(&xm)) {
                (Ok(a), Ok(b)) => a * b.conj(),
                _ => C64::new(f64::NAN, 0.0),
            };
            a.phi.eval(x) * psi_hat.eval(y) * uv
        },
        &sampler,
        quad.mc_samples,
        quad.seed,
    );
    mc_result(est, quad)
}

fn mc_result(est: McEstimate, quad: &PairingQuad) -> Result<WignerPairingResult, WignerError> {
    let tol = quad.rel_tol * est.value.norm();
    if est.nan_count > 0 || est.stderr > tol {
        return Err(WignerError::Budget { stderr: est.stderr, tol, samples: est.n_samples });
    }
    Ok(WignerPairingResult { value: est.value, error: est.stderr, method: PairingMethod::MonteCarlo, budget: est.n_samples })
}

#[allow(clippy::too_many_arguments)]
fn ray_pairing(
    nu: &FieldExpr,
    ru: Resolvent,
    nv: &FieldExpr,
    rv: Resolvent,
    phi_hat: &FieldExpr,
    psi: &FieldExpr,
    eps: f64,
    quad: &PairingQuad,
) -> Result<WignerPairingResult, WignerError> {
    let i = C64::i();
    let lambda = i * (0.5 * eps) * (ru.k2 - rv.k2.conj());
    if !(lambda.re > 0.0) {
        return Err(WignerError::NoDamping(lambda.re));
    }
    let integrand = |t: f64| -> Result<C64, ClosedFormError> {
        let tau = 0.5 * eps * t;
        let k1 = wigner_kernel(FourierFactor::plain(nu), FourierFactor::with_resolvent(nv, rv), phi_hat, psi, eps, tau)?;
        let k2 = wigner_kernel(FourierFactor::with_resolvent(nu, ru), FourierFactor::plain(nv), phi_hat, psi, eps, tau)?;
        Ok((k1 - k2) * (-lambda * t).exp())
    };
    // oscillation rate of the t-integrand: (ε/2)·max||q|² - |p|²|
    let shell = ru.k2.norm().sqrt().max(rv.k2.norm().sqrt());
    let h = phi_hat
        .atoms
        .iter()
        .map(|a| a.center.iter().map(|c| c * c).sum::<f64>().sqrt() + 8.0 / a.inv_variance.sqrt())
        .fold(0.0, f64::max);
    let omega = eps * shell * h + 1e-300;
    let t_max = 38.0 / lambda.re;
    let len = (4.0 * PI / omega).clamp(0.25, 4.0).min(t_max);
    let n_chunks = (t_max / len).ceil() as usize;
    if n_chunks > quad.max_chunks {
        return Err(WignerError::RayBudget { needed: n_chunks, cap: quad.max_chunks });
    }
    let gl = gauss_legendre(20);
    let coarse: Vec<C64> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let (a, b) = (c as f64 * len, (c + 1) as f64 * len);
            let mut acc = C64::new(0.0, 0.0);
            for (x, w) in gl.0.iter().zip(&gl.1) {
                acc += integrand(0.5 * (a + b) + 0.5 * (b - a) * x)? * (0.5 * (b - a) * w);
            }
            Ok(acc)
        })
        .collect::<Result<_, ClosedFormError>>()?;
    let scale = pairwise_sum(&coarse).norm().max(1e-6 * coarse.iter().map(|c| c.norm()).sum::<f64>()).max(1e-300);
    let tol = quad.rel_tol * scale / n_chunks as f64;
    let fine: Vec<(C64, f64, u64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let (a, b) = (c as f64 * len, (c + 1) as f64 * len);
            let count = std::sync::atomic::AtomicU64::new(0);
            let e = adaptive_1d_with(
                |t| {
                    count.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    integrand(t).unwrap_or(C64::new(f64::NAN, f64::NAN))
                },
                a,
                b,
                tol,
                500,
            )?;
            if !e.value.re.is_finite() {
                return Err(WignerError::ClosedForm(ClosedFormError::TwoResolvents));
            }
            Ok((e.value, e.error, count.into_inner()))
        })
        .collect::<Result<_, WignerError>>()?;
    let vals: Vec<C64> = fine.iter().map(|f| f.0).collect();
    let pref = i * (0.5 * eps);
    let value = pref * pairwise_sum(&vals);
    let error = pref.norm() * fine.iter().map(|f| f.1).sum::<f64>() + ROUNDOFF * value.norm();
    let evals: u64 = fine.iter().map(|f| f.2).sum::<u64>() + 20 * n_chunks as u64;
    let terms = 2 * (nu.atoms.len() * nv.atoms.len() * phi_hat.atoms.len() * psi.atoms.len()) as u64;
    Ok(WignerPairingResult { value, error, method: PairingMethod::Deterministic, budget: evals * terms })
}

/// Symbol for [`weyl_apply`]; a missing factor is the constant `1`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeylSymbol {
    pub d: usize,
    pub phi: Option<FieldExpr>,
    pub psi: Option<FieldExpr>,
}

impl From<&Observable> for WeylSymbol {
    fn from(a: &Observable) -> Self {
        Self { d: a.dim(), phi: Some(a.phi.clone()), psi: Some(a.psi.clone()) }
    }
}

impl WeylSymbol {
    fn phi(&self, x: &[f64]) -> C64 {
        self.phi.as_ref().map_or(C64::new(1.0, 0.0), |f| f.eval(x))
    }
    fn psi(&self, xi: &[f64]) -> C64 {
        self.psi.as_ref().map_or(C64::new(1.0, 0.0), |f| f.eval(xi))
    }
}

/// `a^W(x, εD) f` evaluated pointwise by direct quadrature of
/// `(2π)^{-d} ∫∫ e^{i(x-y)·ξ} a((x+y)/2, εξ) f(y) dy dξ`.
pub struct WeylField {
    pub symbol: WeylSymbol,
    pub f: FieldExpr,
    pub eps: f64,
    y_box: f64,
    xi_box: f64,
}

/// Builds the Weyl-quantized field; `d ≤ 2` only.
pub fn weyl_apply(a: impl Into<WeylSymbol>, f: &FieldExpr, eps: f64) -> Result<WeylField, WignerError> {
    let symbol = a.into();
    if !(1..=2).contains(&f.dim) {
        return Err(WignerError::Dimension(f.dim));
    }
    let y_box = f.support_radius(1e-17);
    // the y-integrand φ((x+y)/2) f(y) has spectrum within |f̂| + 2|φ̂| support
    let mut xi_box = f.fourier_transform().support_radius(1e-17);
    if let Some(phi) = &symbol.phi {
        xi_box += 2.0 * phi.fourier_transform().support_radius(1e-17);
    }
    if let Some(psi) = &symbol.psi {
        xi_box = xi_box.min(psi.support_radius(1e-17) / eps);
    }
    Ok(WeylField { symbol, f: f.clone(), eps, y_box, xi_box })
}

fn box_rule(half: f64, phase: f64) -> (Vec<f64>, Vec<f64>) {
    // `phase` is the largest phase magnitude over the box
    let n = 32 + (0.8 * 2.0 * phase).ceil() as usize;
    let panels = n.div_ceil(24);
    composite_gl(-half, half, panels, 24)
}

impl WeylField {
    pub fn eval(&self, x: &[f64]) -> C64 {
        let d = self.f.dim;
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let phase = (xn + self.y_box) * self.xi_box;
        let (ys, yw) = box_rule(self.y_box, phase);
        let (ks, kw) = box_rule(self.xi_box, phase);
        let norm = (2.0 * PI).powi(-(d as i32));
        let eps = self.eps;
        let sym = &self.symbol;
        match d {
            1 => {
                let gy: Vec<C64> = ys.iter().map(|&y| sym.phi(&[0.5 * (x[0] + y)]) * self.f.eval(&[y])).collect();
                let terms: Vec<C64> = ks
                    .par_iter()
                    .zip(kw.par_iter())
                    .map(|(&k, &wk)| {
                        let mut acc = C64::new(0.0, 0.0);
                        for ((&y, &w), g) in ys.iter().zip(&yw).zip(&gy) {
                            acc += g * C64::from_polar(w, (x[0] - y) * k);
                        }
                        acc * sym.psi(&[eps * k]) * wk
                    })
                    .collect();
                pairwise_sum(&terms) * norm
            }
            _ => {
                let n = ys.len();
                let g: Vec<C64> = (0..n * n)
                    .map(|idx| {
                        let (y1, y2) = (ys[idx / n], ys[idx % n]);
                        sym.phi(&[0.5 * (x[0] + y1), 0.5 * (x[1] + y2)]) * self.f.eval(&[y1, y2]) * (yw[idx / n] * yw[idx % n])
                    })
                    .collect();
                // h[k2][y1] = Σ_{y2} g(y1, y2) e^{i(x₂ - y₂)k₂}
                let h: Vec<Vec<C64>> = ks
                    .par_iter()
                    .map(|&k2| {
                        let ph: Vec<C64> = ys.iter().map(|&y2| C64::from_polar(1.0, (x[1] - y2) * k2)).collect();
                        (0..n).map(|i1| (0..n).map(|i2| g[i1 * n + i2] * ph[i2]).sum()).collect()
                    })
                    .collect();
                let terms: Vec<C64> = ks
                    .par_iter()
                    .zip(kw.par_iter())
                    .map(|(&k1, &w1)| {
                        let ph: Vec<C64> = ys.iter().map(|&y1| C64::from_polar(1.0, (x[0] - y1) * k1)).collect();
                        let mut acc = C64::new(0.0, 0.0);
                        for ((&k2, &w2), hk) in ks.iter().zip(&kw).zip(&h) {
                            let inner: C64 = (0..n).map(|i1| hk[i1] * ph[i1]).sum();
                            acc += inner * sym.psi(&[eps * k1, eps * k2]) * w2;
                        }
                        acc * w1
                    })
                    .collect();
                pairwise_sum(&terms) * norm
            }
        }
    }
}

/// `|⟨W^ε(u, v), a⟩ - ⟨v̄, b^W ū⟩|` at `d = 1`, with the bracket semilinear in
/// its second slot and `b(x, ξ) = conj(a(x, -ξ))`. The left side is closed
/// form, the right side direct quadrature.
pub fn weyl_duality_check(u: &FieldExpr, v: &FieldExpr, a: &Observable, eps: f64) -> Result<f64, WignerError> {
    if u.dim != 1 {
        return Err(WignerError::Dimension(u.dim));
    }
    let lhs = wigner_pairing(u, v, a, eps, &PairingQuad::default())?.value;
    let b = a.reflected_conj();
    let rhs = semilinear_pairing(v, &weyl_apply(&b, &u.conj(), eps)?);
    Ok((lhs - rhs).norm())
}

/// `⟨v̄, g⟩ = ∫ conj(v) conj(g) dx` over the support of `v`, `d = 1`.
fn semilinear_pairing(v: &FieldExpr, g: &WeylField) -> C64 {
    let r = v.support_radius(1e-17);
    let (xs, xw) = composite_gl(-r, r, 8, 24);
    let terms: Vec<C64> = xs.iter().zip(&xw).map(|(&x, &w)| (v.eval(&[x]) * g.eval(&[x])).conj() * w).collect();
    pairwise_sum(&terms)
}

/// `ε ⟨W^ε(S^ε_j, u^ε), a⟩`. Deterministic: closed form on the Fourier side.
/// Monte Carlo: the rescaled direct-space form
/// `∫∫ S_j(x) conj(w_j(x - y)) φ(x_j + ε(x - y/2)) ψ̂(y) dx dy`.
pub fn source_term_pairing(s: &Scenario, eps: f64, which: usize, a: &Observable, quad: &PairingQuad) -> Result<WignerPairingResult, WignerError> {
    if s.d != 3 {
        return Err(WignerError::Dimension(s.d));
    }
    let profile = s.profile(which);
    if profile.is_zero() || a.phi.is_zero() || a.psi.is_zero() {
        return Ok(WignerPairingResult::zero(quad.method));
    }
    match quad.method {
        PairingMethod::Deterministic => {
            let src = scale_concentrate(profile, eps, &s.center(which));
            let u = solve_full(s, eps);
            Ok(wigner_pairing(&src, &u, a, eps, quad)?.scale(eps))
        }
        PairingMethod::MonteCarlo => {
            let w = solve_rescaled(s, eps, which);
            let xj = s.center(which);
            let psi_hat = a.psi.fourier_transform();
            let sampler = ProductSampler {
                blocks: vec![Box::new(envelope_sampler(profile, 1.25)), Box::new(envelope_sampler(&psi_hat, 1.25))],
            };
            let est = mc_integrate(
                |z: &[f64]| {
                    let (x, y) = z.split_at(3);
                    let xm: Vec<f64> = (0..3).map(|j| x[j] - y[j]).collect();
                    let xa: Vec<f64> = (0..3).map(|j| xj[j] + eps * (x[j] - 0.5 * y[j])).collect();
                    let wv = w.evaluate_exact(&xm).unwrap_or(C64::new(f64::NAN, 0.0));
                    profile.eval(x) * wv.conj() * a.phi.eval(&xa) * psi_hat.eval(y)
                },
                &sampler,
                quad.mc_samples,
                quad.seed,
            );
            mc_result(est, quad)
        }
    }
}

/// `lim_{ε→0} ε⟨W^ε(S^ε_j, u^ε), a⟩ = (2π)³ φ(x_j) ∫ Ŝ_j ψ conj(ŵ_j) dξ`
/// with `ŵ_j = Ŝ_j / (1 - |ξ|² - i0)` the outgoing solution, in closed form.
pub fn source_limit(s: &Scenario, which: usize, a: &Observable) -> Result<C64, WignerError> {
    if s.d != 3 {
        return Err(WignerError::Dimension(s.d));
    }
    let sh = s.profile(which).fourier_transform();
    let phi0 = a.phi.eval(&s.center(which));
    if sh.is_zero() || a.psi.is_zero() || phi0 == C64::new(0.0, 0.0) {
        return Ok(C64::new(0.0, 0.0));
    }
    let f = sh.mul(&a.psi);
    let inner = fourier_inner(FourierFactor::plain(&f), FourierFactor::with_resolvent(&sh, OutgoingSolution::resolvent()))?;
    Ok(inner * phi0 * (2.0 * PI).powi(3))
}

/// Principal-value and delta parts of [`source_limit`], computed by
/// symmetric radial quadrature about `|ξ| = 1` and a sphere rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceLimitSplit {
    pub principal_value: C64,
    pub delta: C64,
}

impl SourceLimitSplit {
    pub fn total(&self) -> C64 {
        self.principal_value + self.delta
    }
}

pub fn source_limit_split(s: &Scenario, which: usize, a: &Observable) -> Result<SourceLimitSplit, WignerError> {
    if s.d != 3 {
        return Err(WignerError::Dimension(s.d));
    }
    let sh = s.profile(which).fourier_transform();
    let pref = a.phi.eval(&s.center(which)) * (2.0 * PI).powi(3);
    let rule = sphere_rule(3, 48)?;
    // F(r) = ∫_{S²} |Ŝ(rω)|² ψ(rω) dσ
    let shell = |r: f64| rule.integrate(|w| {
        let xi = [r * w[0], r * w[1], r * w[2]];
        sh.eval(&xi).norm_sqr() * a.psi.eval(&xi)
    });
    let g = |r: f64| shell(r) * r * r / (1.0 + r);
    let near = adaptive_1d(|t| (g(1.0 - t) - g(1.0 + t)) / t.max(1e-300), 0.0, 1.0, 1e-13)?;
    let r_max = sh.support_radius(1e-17).max(a.psi.support_radius(1e-17)).max(3.0);
    let far = adaptive_1d(|r| shell(r) * r * r / (1.0 - r * r), 2.0, r_max, 1e-13)?;
    let delta = -C64::i() * PI * 0.5 * shell(1.0);
    Ok(SourceLimitSplit { principal_value: pref * (near.value + far.value), delta: pref * delta })
}

/// `⟨W^ε(u^ε_0, u^ε_1), a⟩` for the single-source solutions.
pub fn cross_term(s: &Scenario, eps: f64, a: &Observable, quad: &PairingQuad) -> Result<WignerPairingResult, WignerError> {
    let u0 = solve_single(s, eps, 0);
    let u1 = solve_single(s, eps, 1);
    wigner_pairing(&u0, &u1, a, eps, quad)
}

/// `⟨Q^ε, a⟩ = (i/2)(z(a) - conj(z(conj a)))` with `z(a) = ε⟨W^ε(S^ε, u^ε), a⟩`.
pub fn q_eps_pairing(s: &Scenario, eps: f64, a: &Observable) -> Result<WignerPairingResult, WignerError> {
    let quad = PairingQuad::default();
    let ac = a.conj();
    let mut value = C64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut budget = 0;
    for which in 0..2 {
        let z = source_term_pairing(s, eps, which, a, &quad)?;
        let zc = source_term_pairing(s, eps, which, &ac, &quad)?;
        value += 0.5 * C64::i() * (z.value - zc.value.conj());
        error += 0.5 * (z.error + zc.error);
        budget += z.budget + zc.budget;
    }
    Ok(WignerPairingResult { value, error, method: PairingMethod::Deterministic, budget })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportCheck {
    /// `α⟨W^ε, a⟩ + ⟨W^ε, ξ·∇_x a⟩`.
    pub lhs: C64,
    /// `⟨Q^ε, a⟩`.
    pub rhs: C64,
    pub residual: f64,
    /// Combined error estimate of the three pairings.
    pub error: f64,
}

/// Residual of `α⟨W^ε, a⟩ + ⟨W^ε, ξ·∇_x a⟩ = ⟨Q^ε, a⟩` for `u^ε`, with
/// every pairing computed separately.
pub fn transport_identity_residual(s: &Scenario, eps: f64, a: &Observable, quad: &PairingQuad) -> Result<TransportCheck, WignerError> {
    let u = solve_full(s, eps);
    let alpha = s.alpha(eps);
    let w = wigner_pairing(&u, &u, a, eps, quad)?;
    let mut lhs = w.value * alpha;
    let mut error = w.error * alpha;
    for t in a.transport_terms() {
        let r = wigner_pairing(&u, &u, &t, eps, quad)?;
        lhs += r.value;
        error += r.error;
    }
    let q = q_eps_pairing(s, eps, a)?;
    error += q.error;
    Ok(TransportCheck { lhs, rhs: q.value, residual: (lhs - q.value).norm(), error })
}

/// `ψ(εD) f (x)` as an inverse transform, closed form.
pub fn fourier_multiplier(psi: &FieldExpr, f: &FieldExpr, eps: f64, x: &[f64]) -> Result<C64, WignerError> {
    let prod = f.fourier_transform().mul(&psi.dilate(eps, 1.0));
    Ok(inverse_transform_at(FourierFactor::plain(&prod), x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GaussianAtom;
    use proptest::prelude::*;

    fn atom1(ar: f64, ai: f64, c: f64, s: f64, k: f64) -> FieldExpr {
        FieldExpr::atom(GaussianAtom::new(C64::new(ar, ai), vec![c], s, vec![k]))
    }

    fn atom3(ar: f64, ai: f64, c: [f64; 3], s: f64, k: [f64; 3]) -> FieldExpr {
        FieldExpr::atom(GaussianAtom::new(C64::new(ar, ai), c.to_vec(), s, k.to_vec()))
    }

    // Direct-space definition at d = 1 by tensor Gauss–Legendre in (x, y).
    fn direct_oracle_1d(u: &FieldExpr, v: &FieldExpr, a: &Observable, eps: f64) -> C64 {
        let psi_hat = a.psi.fourier_transform();
        let rx = a.phi.support_radius(1e-18);
        let ry = psi_hat.support_radius(1e-18);
        let (xs, xw) = composite_gl(-rx, rx, 40, 20);
        let (ys, yw) = composite_gl(-ry, ry, 40, 20);
        let terms: Vec<C64> = xs
            .par_iter()
            .zip(xw.par_iter())
            .map(|(&x, &wx)| {
                let mut acc = C64::new(0.0, 0.0);
                for (&y, &wy) in ys.iter().zip(&yw) {
                    acc += psi_hat.eval(&[y]) * u.eval(&[x + 0.5 * eps * y]) * v.eval(&[x - 0.5 * eps * y]).conj() * wy;
                }
                acc * a.phi.eval(&[x]) * wx
            })
            .collect();
        pairwise_sum(&terms)
    }

    #[test]
    fn flags_detect_supports() {
        let on = FieldExpr::unit_gaussian(vec![1.0, 0.0, 0.0]);
        let a = Observable::new(on.clone(), on);
        assert!(!a.off_sphere && !a.off_zero_frequency);
        let far = FieldExpr::atom(GaussianAtom::plain(1.0, vec![6.0, 0.0, 0.0], 16.0));
        let b = Observable::new(far.clone(), far);
        assert!(b.off_sphere && b.off_zero_frequency);
        let zero = FieldExpr::atom(GaussianAtom::plain(1.0, vec![0.0; 3], 400.0));
        let c = Observable::new(zero.clone(), zero);
        assert!(c.off_sphere && !c.off_zero_frequency);
    }

    #[test]
    fn zero_symbol_gives_zero() {
        let u = atom1(1.0, 0.0, 0.0, 1.0, 0.0);
        let a = Observable::new(FieldExpr::zero(1), atom1(1.0, 0.0, 0.0, 1.0, 0.0));
        let r = wigner_pairing(&u, &u, &a, 0.5, &PairingQuad::default()).unwrap();
        assert_eq!(r.value, C64::new(0.0, 0.0));
    }

    #[test]
    fn gaussian_d1_matches_direct_definition() {
        let u = atom1(1.0, 0.0, 0.2, 1.0, 0.0);
        let a = Observable::new(atom1(1.0, 0.0, 0.1, 0.8, 0.0), atom1(1.0, 0.0, 0.3, 1.2, 0.0));
        let v = wigner_pairing(&u, &u, &a, 0.5, &PairingQuad::default()).unwrap();
        let o = direct_oracle_1d(&u, &u, &a, 0.5);
        assert!((v.value - o).norm() < 1e-8, "{} vs {o}", v.value);
        assert!(v.value.im.abs() <= v.error.max(1e-15));
    }

    #[test]
    fn random_d1_cases_match_direct_definition() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut r = |lo: f64, hi: f64| rng.gen_range(lo..hi);
        for _ in 0..20 {
            let u = atom1(r(-1.0, 1.0), r(-1.0, 1.0), r(-1.0, 1.0), r(0.5, 2.0), r(-2.0, 2.0))
                .add(&atom1(r(-1.0, 1.0), r(-1.0, 1.0), r(-1.0, 1.0), r(0.5, 2.0), r(-2.0, 2.0)));
            let v = atom1(r(-1.0, 1.0), r(-1.0, 1.0), r(-1.0, 1.0), r(0.5, 2.0), r(-2.0, 2.0));
            let a = Observable::new(
                atom1(r(-1.0, 1.0), r(-1.0, 1.0), r(-1.0, 1.0), r(0.5, 2.0), r(-1.0, 1.0)),
                atom1(r(-1.0, 1.0), r(-1.0, 1.0), r(-1.0, 1.0), r(0.5, 2.0), r(-1.0, 1.0)),
            );
            let eps = r(0.2, 1.5);
            let c = wigner_pairing(&u, &v, &a, eps, &PairingQuad::default()).unwrap().value;
            let o = direct_oracle_1d(&u, &v, &a, eps);
            assert!((c - o).norm() < 1e-7 * (1.0 + o.norm()), "{c} vs {o}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn sesquilinear_and_hermitian(
            c1 in (-2.0..2.0f64, -2.0..2.0f64), c2 in (-2.0..2.0f64, -2.0..2.0f64),
            m in -1.0..1.0f64, k in -2.0..2.0f64, eps in 0.1..1.0f64,
        ) {
            let (c1, c2) = (C64::new(c1.0, c1.1), C64::new(c2.0, c2.1));
            let u1 = atom1(1.0, 0.3, m, 1.0, k);
            let u2 = atom1(0.5, -0.2, -m, 1.5, -k);
            let v = atom1(0.7, 0.1, 0.2, 0.9, 0.5);
            let a = Observable::new(atom1(1.0, 0.0, 0.1, 1.0, 0.0), atom1(1.0, 0.0, 0.0, 0.7, 0.0));
            let q = PairingQuad::default();
            let p = |x: &FieldExpr, y: &FieldExpr| wigner_pairing(x, y, &a, eps, &q).unwrap().value;
            let lin = p(&u1.scale(c1).add(&u2.scale(c2)), &v);
            let exp = c1 * p(&u1, &v) + c2 * p(&u2, &v);
            prop_assert!((lin - exp).norm() <= 1e-10 * (1.0 + exp.norm()));
            let anti = p(&v, &u1.scale(c1).add(&u2.scale(c2)));
            let exp = c1.conj() * p(&v, &u1) + c2.conj() * p(&v, &u2);
            prop_assert!((anti - exp).norm() <= 1e-10 * (1.0 + exp.norm()));
            let h = wigner_pairing(&u1, &u1, &a, eps, &q).unwrap();
            prop_assert!(h.value.im.abs() <= h.error.max(1e-14));
        }
    }

    #[test]
    fn weyl_constant_symbol_is_identity() {
        let f = atom1(1.0, 0.5, 0.3, 1.2, 0.8);
        let one = WeylSymbol { d: 1, phi: None, psi: None };
        let g = weyl_apply(one, &f, 0.7).unwrap();
        for x in [-1.0, 0.0, 0.4, 1.5] {
            assert!((g.eval(&[x]) - f.eval(&[x])).norm() < 1e-8, "{} vs {}", g.eval(&[x]), f.eval(&[x]));
        }
        let one2 = WeylSymbol { d: 2, phi: None, psi: None };
        let f2 = FieldExpr::atom(GaussianAtom::new(C64::new(1.0, 0.0), vec![0.2, -0.1], 2.0, vec![0.5, 0.0]));
        let g2 = weyl_apply(one2, &f2, 1.0).unwrap();
        assert!((g2.eval(&[0.1, 0.3]) - f2.eval(&[0.1, 0.3])).norm() < 1e-8);
        assert!(matches!(weyl_apply(WeylSymbol { d: 3, phi: None, psi: None }, &FieldExpr::unit_gaussian(vec![0.0; 3]), 1.0), Err(WignerError::Dimension(3))));
    }

    #[test]
    fn weyl_multiplier_symbol() {
        let f = atom1(1.0, -0.2, 0.1, 1.0, 1.0);
        let psi = atom1(1.0, 0.0, 0.5, 2.0, 0.3);
        let sym = WeylSymbol { d: 1, phi: None, psi: Some(psi.clone()) };
        let eps = 0.6;
        let g = weyl_apply(sym, &f, eps).unwrap();
        for x in [-0.7, 0.0, 1.1] {
            let m = fourier_multiplier(&psi, &f, eps, &[x]).unwrap();
            assert!((g.eval(&[x]) - m).norm() < 1e-8, "{} vs {m}", g.eval(&[x]));
        }
    }

    #[test]
    fn weyl_duality() {
        let u = atom1(1.0, 0.0, 0.0, 1.0, 0.0);
        let a = Observable::new(atom1(1.0, 0.0, 0.2, 1.0, 0.0), atom1(1.0, 0.0, -0.3, 1.0, 0.0));
        assert!(weyl_duality_check(&u, &u, &a, 1.0).unwrap() < 1e-7);
        let u = atom1(0.8, 0.3, 0.1, 1.3, 0.7);
        let v = atom1(0.4, -0.6, -0.2, 0.9, -0.4);
        let a = Observable::new(atom1(1.0, 0.5, 0.3, 0.7, 0.4), atom1(0.6, -0.1, 0.2, 1.1, -0.5));
        for eps in [0.25, 0.5, 1.0] {
            assert!(weyl_duality_check(&u, &v, &a, eps).unwrap() < 1e-7);
        }
        // nearly multiplier-only symbol
        let a = Observable::new(atom1(1.0, 0.0, 0.0, 1e-2, 0.0), atom1(1.0, 0.0, 0.1, 1.5, 0.0));
        assert!(weyl_duality_check(&u, &v, &a, 0.5).unwrap() < 1e-9);
        // literal form for real, ξ-even symbols
        let a = Observable::new(atom1(1.0, 0.0, 0.2, 1.0, 0.0), atom1(1.0, 0.0, 0.0, 1.3, 0.0));
        let lhs = wigner_pairing(&u, &v, &a, 0.5, &PairingQuad::default()).unwrap().value;
        let rhs = semilinear_pairing(&v, &weyl_apply(&a, &u.conj(), 0.5).unwrap());
        assert!((lhs - rhs).norm() < 1e-7);
    }

    #[test]
    fn one_resolvent_closed_form_matches_direct_mc() {
        let s = Scenario::reference();
        let u = solve_full(&s, 0.4);
        let src = scale_concentrate(&s.s0, 0.4, &[0.0; 3]);
        let a = Observable::new(atom3(1.0, 0.0, [0.3, 0.0, 0.0], 1.0, [0.0; 3]), atom3(1.0, 0.0, [1.0, 0.0, 0.0], 1.0, [0.0; 3]));
        let c = wigner_pairing(&src, &u, &a, 0.4, &PairingQuad::default()).unwrap();
        let m = wigner_pairing(&src, &u, &a, 0.4, &PairingQuad::monte_carlo(1 << 19, 3)).unwrap();
        assert!((c.value - m.value).norm() < 4.0 * m.error, "{} vs {} ± {}", c.value, m.value, m.error);
    }

    #[test]
    fn ray_identity_matches_direct_mc() {
        let s = Scenario::reference();
        let eps = 0.4;
        let u = solve_full(&s, eps);
        let a = Observable::new(atom3(1.0, 0.0, [0.5, 0.0, 0.0], 1.0, [0.0; 3]), atom3(1.0, 0.0, [0.8, 0.3, 0.0], 1.0, [0.0; 3]));
        let r = wigner_pairing(&u, &u, &a, eps, &PairingQuad::default()).unwrap();
        assert!(r.error < 1e-7 * r.value.norm());
        assert!(r.value.im.abs() <= r.error.max(1e-12 * r.value.norm()));
        let m = wigner_pairing(&u, &u, &a, eps, &PairingQuad::monte_carlo(1 << 19, 5)).unwrap();
        assert!((r.value - m.value).norm() < 4.0 * m.error, "{} vs {} ± {}", r.value, m.value, m.error);
        let c = cross_term(&s, eps, &a, &PairingQuad::default()).unwrap();
        let cm = cross_term(&s, eps, &a, &PairingQuad::monte_carlo(1 << 19, 6)).unwrap();
        assert!((c.value - cm.value).norm() < 4.0 * cm.error + 1e-9, "{} vs {} ± {}", c.value, cm.value, cm.error);
    }

    #[test]
    fn source_term_routes_agree() {
        let s = Scenario::reference();
        let a = Observable::new(atom3(1.0, 0.0, [0.2, 0.1, 0.0], 1.0, [0.0; 3]), atom3(1.0, 0.0, [0.5, 0.5, 0.0], 1.0, [0.0; 3]));
        for which in 0..2 {
            let c = source_term_pairing(&s, 0.5, which, &a, &PairingQuad::default()).unwrap();
            let m = source_term_pairing(&s, 0.5, which, &a, &PairingQuad::monte_carlo(1 << 19, 9)).unwrap();
            assert!((c.value - m.value).norm() < 4.0 * m.error + 1e-12, "{which}: {} vs {} ± {}", c.value, m.value, m.error);
        }
        let mut z = s.clone();
        z.s0 = FieldExpr::zero(3);
        assert_eq!(source_term_pairing(&z, 0.5, 0, &a, &PairingQuad::default()).unwrap().value, C64::new(0.0, 0.0));
    }

    #[test]
    fn source_limit_split_matches_closed_form() {
        let s = Scenario::reference();
        let a = Observable::new(atom3(1.0, 0.0, [0.0; 3], 1.0, [0.0; 3]), atom3(1.0, 0.0, [0.3, 0.0, 0.2], 1.5, [0.0; 3]));
        for which in 0..2 {
            let c = source_limit(&s, which, &a).unwrap();
            let sp = source_limit_split(&s, which, &a).unwrap();
            assert!((c - sp.total()).norm() < 1e-8 * c.norm(), "{c} vs {}", sp.total());
        }
        // radial source, ψ = e^{-|ξ|²}: delta part (2π)³ (-iπ/2) 4π e^{-1} |Ŝ(1)|², |Ŝ(1)|² = (2π)^{-3} e^{-1}
        let psi = FieldExpr::atom(GaussianAtom::plain(1.0, vec![0.0; 3], 2.0));
        let a = Observable::new(FieldExpr::unit_gaussian(vec![0.0; 3]), psi);
        let sp = source_limit_split(&s, 0, &a).unwrap();
        let expect = -C64::i() * PI * 0.5 * 4.0 * PI * (-2.0f64).exp();
        assert!((sp.delta - expect).norm() < 1e-10, "{} vs {expect}", sp.delta);
        let zero_phi = Observable::new(FieldExpr::unit_gaussian(vec![0.0; 3]).scale(C64::new(0.0, 0.0)), a.psi.clone());
        assert_eq!(source_limit(&s, 0, &zero_phi).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn transport_identity_holds_at_eps_level() {
        let s = Scenario::reference();
        let a = Observable::new(atom3(1.0, 0.0, [0.5, 0.2, 0.0], 1.0, [0.0; 3]), atom3(1.0, 0.0, [0.7, 0.0, 0.4], 1.0, [0.0; 3]));
        let t = transport_identity_residual(&s, 0.2, &a, &PairingQuad::default()).unwrap();
        assert!(t.residual < t.error.max(1e-12), "{t:?}");
        assert!(t.rhs.norm() > 1e-6);
    }
}
