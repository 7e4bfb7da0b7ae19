//! Limit objects: the source measure `Q`, the outgoing measure `μ` as a ray
//! integral, the transport resolvent, and the identities tying them together.
//!
//! `⟨Q, a⟩ = C_Q Σ_j ½ ∫_{S²} |Ŝ_j(ω)|² a(x_j, ω) dσ` with
//! `C_Q = π (2π)³ = 8π⁴`; `μ` spreads `Q` along rays `x = x_j ∓ tω`.

use crate::model::{FieldExpr, Scenario};
use crate::quadrature::{adaptive_1d, composite_gl, pairwise_sum, sphere_rule, Estimate, QuadError, SphereRule};
use crate::wigner::Observable;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiouvilleError {
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("transport resolvent is undefined at ξ = 0")]
    ZeroFrequency,
    #[error("operation requires d = 3 (got {0})")]
    Dimension(usize),
}

/// `π (2π)³`, the constant in front of `|Ŝ_j|² δ(|ξ|² - 1)`.
pub const Q_CONSTANT: f64 = 8.0 * PI * PI * PI * PI;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Direction of the rays carrying `μ` away from the centers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RayOrientation {
    /// `x = x_j - tξ`, the limit of `W^ε(u^ε, u^ε)` under the forward
    /// transform `e^{-ix·ξ}`.
    #[default]
    Backward,
    /// `x = x_j + tξ`.
    Forward,
}

impl RayOrientation {
    pub fn sign(self) -> f64 {
        match self {
            RayOrientation::Backward => -1.0,
            RayOrientation::Forward => 1.0,
        }
    }
}

/// `Q = C_Q Σ_j δ(x - x_j) |Ŝ_j(ξ)|² δ(|ξ|² - 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaSphereSource {
    /// `(x_j, Ŝ_j)` pairs.
    pub centers: Vec<(Vec<f64>, FieldExpr)>,
    pub constant: f64,
    /// Sphere-rule order.
    pub order: usize,
}

impl DeltaSphereSource {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self::with_sources(s, &[0, 1])
    }

    /// Source `which` only.
    pub fn single(s: &Scenario, which: usize) -> Self {
        Self::with_sources(s, &[which])
    }

    fn with_sources(s: &Scenario, which: &[usize]) -> Self {
        let centers = which
            .iter()
            .filter(|&&j| !s.profile(j).is_zero())
            .map(|&j| (s.center(j), s.profile(j).fourier_transform()))
            .collect();
        Self { centers, constant: Q_CONSTANT, order: 72 }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    fn rule(&self) -> Result<SphereRule, LiouvilleError> {
        Ok(sphere_rule(3, self.order)?)
    }

    /// `C_Q Σ_j ½ ∫_{S²} |Ŝ_j(ω)|² f_j(ω) dσ`.
    fn sphere_sum<F>(&self, rule: &SphereRule, f: F) -> C64
    where
        F: Fn(usize, &[f64]) -> C64 + Sync,
    {
        let mut total = ZERO;
        for (j, (_, sh)) in self.centers.iter().enumerate() {
            total += rule.integrate(|w| sh.eval(w).norm_sqr() * f(j, w));
        }
        total * (0.5 * self.constant)
    }

    /// `⟨Q, a⟩`.
    pub fn q_pairing(&self, a: &Observable) -> Result<C64, LiouvilleError> {
        if a.dim() != 3 {
            return Err(LiouvilleError::Dimension(a.dim()));
        }
        let rule = self.rule()?;
        let phis: Vec<C64> = self.centers.iter().map(|(x, _)| a.phi.eval(x)).collect();
        Ok(self.sphere_sum(&rule, |j, w| phis[j] * a.psi.eval(w)))
    }

    /// `⟨Q, g⟩` for a pointwise function `g(x, ξ)`.
    pub fn pair_with<G>(&self, g: G) -> Result<C64, LiouvilleError>
    where
        G: Fn(&[f64], &[f64]) -> C64 + Sync,
    {
        let rule = self.rule()?;
        let xs: Vec<Vec<f64>> = self.centers.iter().map(|c| c.0.clone()).collect();
        Ok(self.sphere_sum(&rule, |j, w| g(&xs[j], w)))
    }
}

/// `t` beyond which every atom of `φ` is below `1e-16` of its peak along any
/// ray from `x`.
pub fn ray_cutoff(phi: &FieldExpr, x: &[f64]) -> f64 {
    let k = (2.0 * (1e16f64).ln()).sqrt();
    phi.atoms
        .iter()
        .map(|a| {
            let dist = a.center.iter().zip(x).map(|(c, p)| (c - p) * (c - p)).sum::<f64>().sqrt();
            dist + 1.2 * k / a.inv_variance.sqrt() + 2.0
        })
        .fold(0.0, f64::max)
}

/// `∫_0^T e^{-βt} φ(x + t·dir) dt` by adaptive quadrature, `T` from
/// [`ray_cutoff`].
pub fn ray_integral(phi: &FieldExpr, x: &[f64], dir: &[f64], beta: f64, tol: f64) -> Result<Estimate, QuadError> {
    if phi.is_zero() {
        return Ok(Estimate { value: ZERO, error: 0.0 });
    }
    let t_max = ray_cutoff(phi, x);
    let f = |t: f64| {
        let y: Vec<f64> = x.iter().zip(dir).map(|(p, w)| p + t * w).collect();
        phi.eval(&y) * (-beta * t).exp()
    };
    adaptive_1d(f, 0.0, t_max, tol)
}

/// `μ = ∫_0^∞ Q(x ± tξ, ξ) dt`, realized by pairing.
#[derive(Clone, Debug, PartialEq)]
pub struct RayMeasure {
    pub source: DeltaSphereSource,
    pub orientation: RayOrientation,
    /// Absolute tolerance of each ray integral.
    pub ray_tol: f64,
}

impl RayMeasure {
    pub fn new(source: DeltaSphereSource, orientation: RayOrientation) -> Self {
        Self { source, orientation, ray_tol: 1e-13 }
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        Self::new(DeltaSphereSource::from_scenario(s), RayOrientation::default())
    }

    fn pairing_at_order(&self, a: &Observable, order: usize) -> Result<(C64, f64), LiouvilleError> {
        let rule = sphere_rule(3, order)?;
        let sign = self.orientation.sign();
        let mut total = ZERO;
        let mut err = 0.0;
        for (x, sh) in &self.source.centers {
            let vals: Vec<(C64, f64)> = rule
                .nodes
                .par_iter()
                .zip(rule.weights.par_iter())
                .map(|(w, &wt)| {
                    let psi = a.psi.eval(w);
                    let weight = sh.eval(w).norm_sqr() * wt;
                    if psi == ZERO || weight == 0.0 {
                        return Ok((ZERO, 0.0));
                    }
                    let dir: Vec<f64> = w.iter().map(|v| sign * v).collect();
                    let r = ray_integral(&a.phi, x, &dir, 0.0, self.ray_tol)?;
                    Ok((r.value * psi * weight, r.error * psi.norm() * weight))
                })
                .collect::<Result<_, QuadError>>()?;
            let v: Vec<C64> = vals.iter().map(|p| p.0).collect();
            total += pairwise_sum(&v);
            err += vals.iter().map(|p| p.1).sum::<f64>();
        }
        let c = 0.5 * self.source.constant;
        Ok((total * c, err * c))
    }

    /// `⟨μ, a⟩`; the error adds the change from a coarser sphere rule.
    pub fn mu_pairing(&self, a: &Observable) -> Result<Estimate, LiouvilleError> {
        if a.dim() != 3 {
            return Err(LiouvilleError::Dimension(a.dim()));
        }
        let (fine, e) = self.pairing_at_order(a, self.source.order)?;
        let (coarse, _) = self.pairing_at_order(a, self.source.order * 3 / 4)?;
        Ok(Estimate { value: fine, error: e + (fine - coarse).norm() })
    }

    /// `⟨μ, a⟩` for `a(x, ξ) = f(x)` with `ψ ≡ 1` near the sphere; `f` is
    /// integrated along each ray out to `t_max`.
    pub fn mu_pairing_fn<F>(&self, f: F, t_max: f64) -> Result<C64, LiouvilleError>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let rule = self.source.rule()?;
        let sign = self.orientation.sign();
        let (ts, tw) = composite_gl(0.0, t_max, (t_max / 2.0).ceil() as usize, 16);
        let xs: Vec<Vec<f64>> = self.source.centers.iter().map(|c| c.0.clone()).collect();
        Ok(self.source.sphere_sum(&rule, |j, w| {
            let x = &xs[j];
            let s: f64 = ts
                .iter()
                .zip(&tw)
                .map(|(&t, &wt)| wt * f(&[x[0] + sign * t * w[0], x[1] + sign * t * w[1], x[2] + sign * t * w[2]]))
                .sum();
            C64::new(s, 0.0)
        }))
    }
}

/// `g^α(x, ξ) = -∫_0^∞ e^{-αs/|ξ|} |ξ|^{-1} R(x - sξ/|ξ|, ξ) ds`, which
/// solves `α g + ξ·∇_x g = -R`. At `α = 0` this is the ray integral used by
/// the radiation identity.
pub fn transport_resolvent(r: &Observable, alpha: f64, x: &[f64], xi: &[f64]) -> Result<C64, LiouvilleError> {
    let n = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        return Err(LiouvilleError::ZeroFrequency);
    }
    let psi = r.psi.eval(xi);
    if psi == ZERO {
        return Ok(ZERO);
    }
    let dir: Vec<f64> = xi.iter().map(|v| -v / n).collect();
    let e = ray_integral(&r.phi, x, &dir, alpha / n, 1e-14)?;
    Ok(-e.value * psi / n)
}

/// Samples of `|ĝ^α(x, y)|`, the transform of the transport resolvent in
/// `ξ`, against the envelope `(⟨x⟩^M ∧ α^{-M}) / ⟨y⟩^M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub alpha: f64,
    pub m: i32,
    /// `(|x|, |y|, |ĝ|)` samples.
    pub samples: Vec<(f64, f64, f64)>,
    /// Empirical constant `sup |ĝ| ⟨y⟩^M / (⟨x⟩^M ∧ α^{-M})`.
    pub constant: f64,
    /// Smallest sampled envelope ratio.
    pub min_ratio: f64,
    /// `|ĝ(x, 0)|` strictly decreasing in `|x|` along the sampled ray.
    pub decays_in_x: bool,
}

/// Probes the envelope of `ĝ^α` along `x = r e`, `y = ρ e` with `e` the
/// direction of the first `ψ` atom. Radii `r` start at the edge of the
/// support of `φ`; `ρ` is measured in units of the inverse `ψ` width.
pub fn resolvent_decay_check(r: &Observable, alpha: f64, m: i32) -> Result<DecayReport, LiouvilleError> {
    if r.dim() != 3 {
        return Err(LiouvilleError::Dimension(r.dim()));
    }
    let Some(atom) = r.psi.atoms.first() else {
        return Ok(DecayReport { alpha, m, samples: vec![], constant: 0.0, min_ratio: 0.0, decays_in_x: true });
    };
    let c = &atom.center;
    let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let e: Vec<f64> = if cn > 0.0 { c.iter().map(|v| v / cn).collect() } else { vec![1.0, 0.0, 0.0] };
    let width = 1.0 / atom.inv_variance.sqrt();
    let half = 7.0 * width;
    let (ks, kw) = composite_gl(-half, half, 2, 16);
    let mut nodes = Vec::new();
    for (&a, &wa) in ks.iter().zip(&kw) {
        for (&b, &wb) in ks.iter().zip(&kw) {
            for (&cc, &wc) in ks.iter().zip(&kw) {
                let xi = [c[0] + a, c[1] + b, c[2] + cc];
                if xi.iter().map(|v| v * v).sum::<f64>() > 1e-12 {
                    nodes.push((xi, wa * wb * wc));
                }
            }
        }
    }
    let edge = r.phi.support_radius(1e-2);
    let xs: Vec<f64> = [0.0, 1.0, 2.0, 4.0, 8.0].iter().map(|v| edge + v).collect();
    let ys: Vec<f64> = [0.0, 1.0, 4.0, 16.0].iter().map(|v| v / width).collect();
    let mut samples = Vec::new();
    for &xr in &xs {
        let x: Vec<f64> = e.iter().map(|v| v * xr).collect();
        let g: Vec<(C64, [f64; 3], f64)> = nodes
            .par_iter()
            .map(|(xi, w)| Ok((transport_resolvent(r, alpha, &x, xi)?, *xi, *w)))
            .collect::<Result<_, LiouvilleError>>()?;
        for &yr in &ys {
            let y: Vec<f64> = e.iter().map(|v| v * yr).collect();
            let terms: Vec<C64> = g
                .iter()
                .map(|(gv, xi, w)| gv * C64::from_polar(*w, -(y[0] * xi[0] + y[1] * xi[1] + y[2] * xi[2])))
                .collect();
            let v = pairwise_sum(&terms).norm() * (2.0 * PI).powi(-3);
            samples.push((xr, yr, v));
        }
    }
    let bracket = |t: f64| (1.0 + t * t).sqrt();
    let ratios: Vec<f64> = samples
        .iter()
        .map(|&(xr, yr, v)| v * bracket(yr).powi(m) / bracket(xr).powi(m).min(alpha.powi(-m)))
        .collect();
    let constant = ratios.iter().copied().fold(0.0, f64::max);
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let at_y0: Vec<f64> = samples.iter().filter(|s| s.1 == 0.0).map(|s| s.2).collect();
    let decays_in_x = at_y0.windows(2).all(|w| w[1] < w[0]);
    Ok(DecayReport { alpha, m, samples, constant, min_ratio, decays_in_x })
}

/// Both sides of the radiation identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiationReport {
    pub orientation: RayOrientation,
    /// `⟨μ, R⟩`.
    pub mu_side: C64,
    /// `⟨Q, g⟩` with `g` the ray integral of `R` collected against the ray
    /// orientation.
    pub q_side: C64,
    pub residual: f64,
    /// `true` when the identity holds in the form `⟨μ, R⟩ = -⟨Q, g^0⟩` with
    /// `g^0` the displayed transport resolvent at `α = 0`.
    pub matches_resolvent_form: bool,
}

/// `|⟨μ, R⟩ - ⟨Q, ∫_0^∞ R(x ± tξ, ξ) dt⟩|`, the two sides built separately:
/// `μ` by its own sphere rule and rays, `⟨Q, ·⟩` by a different sphere rule
/// applied to [`transport_resolvent`] at `α = 0`.
pub fn radiation_residual(s: &Scenario, r: &Observable, orientation: RayOrientation) -> Result<RadiationReport, LiouvilleError> {
    let mu = RayMeasure::new(DeltaSphereSource::from_scenario(s).with_order(64), orientation);
    let mu_side = mu.mu_pairing(r)?.value;
    let q = DeltaSphereSource::from_scenario(s).with_order(80);
    let q_side = match orientation {
        // backward rays: ∫_0^∞ R(x_j - tω) dt = -g^0
        RayOrientation::Backward => -q.pair_with(|x, w| transport_resolvent(r, 0.0, x, w).unwrap_or(C64::new(f64::NAN, 0.0)))?,
        RayOrientation::Forward => q.pair_with(|x, w| {
            let neg: Vec<f64> = w.iter().map(|v| -v).collect();
            // g^0 at -ξ collects R(x + tξ, -ξ); use the observable's own ψ at ξ
            let rr = Observable { psi: r.psi.reflect(), ..r.clone() };
            -transport_resolvent(&rr, 0.0, x, &neg).unwrap_or(C64::new(f64::NAN, 0.0))
        })?,
    };
    Ok(RadiationReport {
        orientation,
        mu_side,
        q_side,
        residual: (mu_side - q_side).norm(),
        matches_resolvent_form: orientation == RayOrientation::Backward,
    })
}

/// `|⟨μ, ξ·∇_x a⟩ ∓ ⟨Q, a⟩|`: backward rays satisfy `-ξ·∇_x μ = Q`, forward
/// rays `ξ·∇_x μ = Q`, in the weak sense.
pub fn liouville_weak_residual(s: &Scenario, a: &Observable, orientation: RayOrientation) -> Result<f64, LiouvilleError> {
    let mu = RayMeasure::new(DeltaSphereSource::from_scenario(s), orientation);
    let mut lhs = ZERO;
    for t in a.transport_terms() {
        lhs += mu.mu_pairing(&t)?.value;
    }
    let q = mu.source.q_pairing(a)?;
    Ok(match orientation {
        RayOrientation::Backward => (lhs - q).norm(),
        RayOrientation::Forward => (lhs + q).norm(),
    })
}

/// `(1/R) ⟨μ, χ_R⟩` for smoothed ball indicators `χ_R` of width `w`.
pub fn flux_normalization(s: &Scenario, radii: &[f64], width: f64) -> Result<Vec<(f64, f64)>, LiouvilleError> {
    let mu = RayMeasure::from_scenario(s);
    radii
        .iter()
        .map(|&r| {
            let chi = |x: &[f64]| {
                let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                1.0 / (1.0 + ((n - r) / width).exp())
            };
            let t_max = r + 40.0 * width + s.q1.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok((r, mu.mu_pairing_fn(chi, t_max)?.re / r))
        })
        .collect()
}
