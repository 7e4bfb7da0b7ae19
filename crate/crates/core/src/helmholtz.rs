//! Helmholtz solutions `û = N / (k² - |ξ|²)` held exactly in Fourier space:
//! the full solution, its rescalings about either source, the shifted-only
//! solution `a^ε`, and outgoing (η → 0) limits.

use crate::gaussian::{fourier_inner, inverse_transform_at, ClosedFormError, FourierFactor, Resolvent};
use crate::model::{FieldExpr, FourierConvention, GaussianAtom, Scenario};
use crate::quadrature::{
    adaptive_1d, composite_gl, gauss_legendre, mc_integrate, pairwise_sum, radial_lorentzian_grid, sphere_rule,
    Estimate, GaussianSampler, McEstimate, QuadError, RadialGrid,
};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HelmholtzError {
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("angular order {order} exceeds the budget {cap}; eps must be at least {eps_floor:.4e}")]
    OscillationBudget { order: usize, cap: usize, eps_floor: f64 },
    #[error("outgoing evaluators disagree: fourier {fourier}, kernel {kernel}")]
    EvaluatorMismatch { fourier: C64, kernel: C64 },
    #[error("operation requires d = 3 (got {0})")]
    Dimension(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolutionKind {
    /// `u^ε` with both sources.
    Full,
    /// `w^ε_j`, rescaled about source `j`.
    Rescaled(usize),
    /// `a^ε`: rescaled about the origin, driven by `S₁(x - q₁/ε)` only.
    ShiftedOnly,
    /// `u^ε` driven by source `j` alone.
    Single(usize),
}

/// `û(ξ) = N(ξ) / (k² - |ξ|²)` with `Im k² < 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSolution {
    pub d: usize,
    pub eps: f64,
    /// Damping in the rescaled frame, `ε α_ε`.
    pub eta: f64,
    pub kind: SolutionKind,
    pub numerator: FieldExpr,
    pub resolvent: Resolvent,
}

/// Fourier transform of `x ↦ f(x - shift)` evaluated at `scale · ξ`, i.e.
/// `f̂(scale ξ) e^{-i shift·ξ}` up to the dilation Jacobian being absorbed.
fn source_hat(profile: &FieldExpr, scale: f64, shift: &[f64]) -> FieldExpr {
    let neg: Vec<f64> = shift.iter().map(|v| -v).collect();
    profile.fourier_transform().dilate(scale, 1.0).modulate(&neg)
}

fn scaled(v: &[f64], c: f64) -> Vec<f64> {
    v.iter().map(|x| x * c).collect()
}

/// Prefactor `c` in `w^ε(x) = c · u^ε(ε x)`.
pub fn scaling_factor(d: usize, eps: f64) -> f64 {
    eps.powi(d as i32 - 2)
}

/// `u^ε`: numerator `Ŝ₀(εξ) + e^{-iq₁·ξ} Ŝ₁(εξ)`, `k² = 1/ε² - iα_ε/ε`.
pub fn solve_full(s: &Scenario, eps: f64) -> SpectralSolution {
    let numerator = source_hat(&s.s0, eps, &s.center(0)).add(&source_hat(&s.s1, eps, &s.center(1)));
    let alpha = s.alpha(eps);
    SpectralSolution {
        d: s.d,
        eps,
        eta: s.eta(eps),
        kind: SolutionKind::Full,
        numerator,
        resolvent: Resolvent::new(C64::new(1.0 / (eps * eps), -alpha / eps), -1.0),
    }
}

/// `u^ε` driven by source `which` alone.
pub fn solve_single(s: &Scenario, eps: f64, which: usize) -> SpectralSolution {
    let mut sol = solve_full(s, eps);
    sol.numerator = source_hat(s.profile(which), eps, &s.center(which));
    sol.kind = SolutionKind::Single(which);
    sol
}

fn rescaled_resolvent(s: &Scenario, eps: f64) -> Resolvent {
    Resolvent::new(C64::new(1.0, -s.eta(eps)), -1.0)
}

/// `w^ε_j(x) = ε^{d-2} u^ε(x_j + εx)`; denominator `1 - |ξ|² - iεα_ε`.
pub fn solve_rescaled(s: &Scenario, eps: f64, center: usize) -> SpectralSolution {
    let origin = s.center(center);
    let rel = |j: usize| -> Vec<f64> {
        let c = s.center(j);
        scaled(&c.iter().zip(&origin).map(|(a, b)| a - b).collect::<Vec<_>>(), 1.0 / eps)
    };
    let numerator = source_hat(&s.s0, 1.0, &rel(0)).add(&source_hat(&s.s1, 1.0, &rel(1)));
    SpectralSolution {
        d: s.d,
        eps,
        eta: s.eta(eps),
        kind: SolutionKind::Rescaled(center),
        numerator,
        resolvent: rescaled_resolvent(s, eps),
    }
}

/// `a^ε`: `-iεα_ε a + Δa + a = S₁(x - q₁/ε)`.
pub fn solve_shifted_only(s: &Scenario, eps: f64) -> SpectralSolution {
    SpectralSolution {
        d: s.d,
        eps,
        eta: s.eta(eps),
        kind: SolutionKind::ShiftedOnly,
        numerator: source_hat(&s.s1, 1.0, &scaled(&s.q1, 1.0 / eps)),
        resolvent: rescaled_resolvent(s, eps),
    }
}

/// Quadrature resolution for [`SpectralSolution::evaluate`] and
/// [`pairing_quadrature`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    /// Nodes in the Lorentzian panel of the radial grid.
    pub radial_nodes: usize,
    /// Largest admissible angular order.
    pub angular_cap: usize,
    /// Envelope cutoff for the radial range.
    pub cutoff: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self { radial_nodes: 160, angular_cap: 400, cutoff: 1e-17 }
    }
}

impl SpectralSolution {
    pub fn factor(&self) -> FourierFactor<'_> {
        FourierFactor::with_resolvent(&self.numerator, self.resolvent)
    }

    pub fn symbol(&self, xi: &[f64]) -> C64 {
        self.resolvent.symbol(xi.iter().map(|v| v * v).sum())
    }

    pub fn hat(&self, xi: &[f64]) -> C64 {
        self.numerator.eval(xi) / self.symbol(xi)
    }

    /// The source `S` with `Ŝ = N`.
    pub fn source(&self) -> FieldExpr {
        // N is a transform; invert via the double-transform identity.
        self.numerator.fourier_transform().reflect().scale(C64::new(FourierConvention::parseval_factor(self.d), 0.0))
    }

    /// `u(x)` in closed form.
    pub fn evaluate_exact(&self, x: &[f64]) -> Result<C64, HelmholtzError> {
        Ok(inverse_transform_at(self.factor(), x)?)
    }

    fn radial_grid(&self, r_max: f64, n: usize) -> Result<RadialGrid, HelmholtzError> {
        let k = crate::special::upper_root(self.resolvent.k2, self.resolvent.limit_sign);
        let c = k.re.abs();
        let w = self.resolvent.k2.im.abs() / (2.0 * c);
        if r_max > 1.05 * c && w < c {
            return Ok(radial_lorentzian_grid(c, w, r_max, n)?);
        }
        let (nodes, weights) = composite_gl(0.0, r_max, (n / 8).max(4), 16);
        Ok(RadialGrid { nodes, weights, center: c, width: w })
    }

    /// `u(x) = ∫ e^{ix·ξ} û(ξ) dξ` by radial Lorentzian grid × sphere rule;
    /// the error is the change under radial and angular refinement.
    pub fn evaluate(&self, x: &[f64], spec: &QuadSpec) -> Result<Estimate, HelmholtzError> {
        if self.d != 3 {
            return Err(HelmholtzError::Dimension(self.d));
        }
        let r_max = self.numerator.support_radius(spec.cutoff);
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let freq = xn + max_frequency(&self.numerator);
        let order = angular_order(freq * r_max, spec.angular_cap, self.eps, |o| {
            // eps floor: the q₁/ε part of the frequency scales like 1/ε.
            self.eps * (freq * r_max) / o
        })?;
        let run = |n: usize, order: usize| -> Result<C64, HelmholtzError> {
            let grid = self.radial_grid(r_max, n)?;
            let rule = sphere_rule(3, order)?;
            let vals: Vec<C64> = grid
                .nodes
                .par_iter()
                .zip(grid.weights.par_iter())
                .map(|(&r, &w)| {
                    let ang = rule.integrate(|om| {
                        let xi = [r * om[0], r * om[1], r * om[2]];
                        let ph = x[0] * xi[0] + x[1] * xi[1] + x[2] * xi[2];
                        self.numerator.eval(&xi) * C64::from_polar(1.0, ph)
                    });
                    w * r * r * ang / self.resolvent.symbol(r * r)
                })
                .collect();
            Ok(pairwise_sum(&vals))
        };
        let coarse = run(spec.radial_nodes, order)?;
        let fine = run(2 * spec.radial_nodes, order + order / 2)?;
        Ok(Estimate { value: fine, error: (fine - coarse).norm() })
    }
}

fn max_frequency(f: &FieldExpr) -> f64 {
    f.atoms
        .iter()
        .map(|a| {
            let k = a.modulation.iter().map(|v| v * v).sum::<f64>().sqrt();
            let m = a.center.iter().map(|v| v * v).sum::<f64>().sqrt();
            k + a.inv_variance * m
        })
        .fold(0.0, f64::max)
}

fn angular_order(
    phase_budget: f64,
    cap: usize,
    _eps: f64,
    floor: impl Fn(f64) -> f64,
) -> Result<usize, HelmholtzError> {
    let order = (1.2 * phase_budget).ceil() as usize + 24;
    if order > cap {
        return Err(HelmholtzError::OscillationBudget { order, cap, eps_floor: floor(cap as f64 / 1.2) });
    }
    Ok(order)
}

/// Relative residual `max |(k² - |ξ|²) û(ξ) - Ŝ(ξ)| / |Ŝ(ξ)|` at the given
/// points, with `Ŝ` supplied independently.
pub fn equation_residual(sol: &SpectralSolution, source_hat: &FieldExpr, points: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .map(|xi| {
            let lhs = sol.symbol(xi) * sol.hat(xi);
            let rhs = source_hat.eval(xi);
            (lhs - rhs).norm() / rhs.norm().max(1e-300)
        })
        .fold(0.0, f64::max)
}

/// Independent transform of the driving source of `sol`, built from the
/// scenario in physical space.
pub fn driving_source_hat(s: &Scenario, sol: &SpectralSolution) -> FieldExpr {
    let eps = sol.eps;
    let phys = match sol.kind {
        SolutionKind::Full => s.concentrated(0, eps).add(&s.concentrated(1, eps)),
        SolutionKind::Single(j) => s.concentrated(j, eps),
        SolutionKind::Rescaled(c) => {
            let origin = s.center(c);
            let place = |j: usize| {
                let rel: Vec<f64> = s.center(j).iter().zip(&origin).map(|(a, b)| (a - b) / eps).collect();
                s.profile(j).shift(&rel)
            };
            place(0).add(&place(1))
        }
        SolutionKind::ShiftedOnly => s.s1.shift(&scaled(&s.q1, 1.0 / eps)),
    };
    phys.fourier_transform()
}

/// `⟨u, v⟩ = ∫ u v̄ dx = (2π)^d ∫ û conj(v̂) dξ`, closed form.
pub fn pairing(sol: &SpectralSolution, v: &FieldExpr) -> Result<C64, HelmholtzError> {
    let vh = v.fourier_transform();
    let val = fourier_inner(sol.factor(), FourierFactor::plain(&vh))?;
    Ok(val * FourierConvention::parseval_factor(sol.d))
}

/// Common symmetry axis of a set of fields, if all atoms are plain with
/// centers and modulations on one line through the origin.
pub fn common_axis(fields: &[&FieldExpr]) -> Option<[f64; 3]> {
    let mut axis: Option<[f64; 3]> = None;
    for f in fields {
        if f.dim != 3 {
            return None;
        }
        for a in &f.atoms {
            if !a.poly.is_one() {
                return None;
            }
            for v in [&a.center, &a.modulation] {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n == 0.0 {
                    continue;
                }
                let u = [v[0] / n, v[1] / n, v[2] / n];
                match axis {
                    None => axis = Some(u),
                    Some(ax) => {
                        let dot = ax[0] * u[0] + ax[1] * u[1] + ax[2] * u[2];
                        if (dot.abs() - 1.0).abs() > 1e-12 {
                            return None;
                        }
                    }
                }
            }
        }
    }
    Some(axis.unwrap_or([0.0, 0.0, 1.0]))
}

pub fn perpendicular(ax: [f64; 3]) -> [f64; 3] {
    let t = if ax[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = t[0] * ax[0] + t[1] * ax[1] + t[2] * ax[2];
    let p = [t[0] - d * ax[0], t[1] - d * ax[1], t[2] - d * ax[2]];
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

/// `⟨u, v⟩` by Fourier-side quadrature: radial Lorentzian grid times Gauss–
/// Legendre in `cos θ` when both factors share a symmetry axis, times a
/// sphere rule otherwise.
pub fn pairing_quadrature(sol: &SpectralSolution, v: &FieldExpr, spec: &QuadSpec) -> Result<Estimate, HelmholtzError> {
    if sol.d != 3 {
        return Err(HelmholtzError::Dimension(sol.d));
    }
    let vh = v.fourier_transform().conj();
    let r_max = sol.numerator.support_radius(spec.cutoff).min(vh.support_radius(spec.cutoff));
    let freq = max_frequency(&sol.numerator) + max_frequency(&vh);
    let axis = common_axis(&[&sol.numerator, &vh]);
    let integrand = |xi: &[f64]| sol.numerator.eval(xi) * vh.eval(xi);
    let run = |n: usize, scale: f64| -> Result<C64, HelmholtzError> {
        let grid = sol.radial_grid(r_max, n)?;
        let ang: Box<dyn Fn(f64) -> C64 + Sync> = match axis {
            Some(ax) => {
                let perp = perpendicular(ax);
                let nmu = (scale * (0.75 * freq * r_max + 24.0)).ceil() as usize;
                if nmu > 40 * spec.angular_cap {
                    return Err(HelmholtzError::OscillationBudget {
                        order: nmu,
                        cap: 40 * spec.angular_cap,
                        eps_floor: sol.eps * nmu as f64 / (40 * spec.angular_cap) as f64,
                    });
                }
                let gl = gauss_legendre(nmu);
                Box::new(move |r: f64| {
                    let vals: Vec<C64> = gl
                        .0
                        .iter()
                        .zip(gl.1.iter())
                        .map(|(&mu, &w)| {
                            let st = (1.0 - mu * mu).sqrt();
                            let xi = [
                                r * (mu * ax[0] + st * perp[0]),
                                r * (mu * ax[1] + st * perp[1]),
                                r * (mu * ax[2] + st * perp[2]),
                            ];
                            integrand(&xi) * w
                        })
                        .collect();
                    2.0 * PI * pairwise_sum(&vals)
                })
            }
            None => {
                let order = angular_order(scale * freq * r_max, spec.angular_cap, sol.eps, |o| sol.eps * freq * r_max / o)?;
                let rule = sphere_rule(3, order)?;
                Box::new(move |r: f64| rule.integrate(|om| integrand(&[r * om[0], r * om[1], r * om[2]])))
            }
        };
        let vals: Vec<C64> = grid
            .nodes
            .par_iter()
            .zip(grid.weights.par_iter())
            .map(|(&r, &w)| w * r * r * ang(r) / sol.resolvent.symbol(r * r))
            .collect();
        Ok(pairwise_sum(&vals) * FourierConvention::parseval_factor(3))
    };
    let coarse = run(spec.radial_nodes, 1.0)?;
    let fine = run(2 * spec.radial_nodes, 1.5)?;
    Ok(Estimate { value: fine, error: (fine - coarse).norm() })
}

/// Outgoing solution `ŵ = -Ŝ / (|ξ|² - 1 + i0)` of `Δw + w = S`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutgoingSolution {
    pub source: FieldExpr,
    pub source_hat: FieldExpr,
    /// Phase sign `σ` of the physical-space kernel `e^{iσ|x|}/|x|`, fixed by
    /// matching the limiting-absorption evaluator.
    pub kernel_sign: f64,
}

/// Damping levels used by the limiting-absorption evaluator.
pub const RICHARDSON_ETAS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

impl OutgoingSolution {
    /// Resolvent of the limit, `k² = 1 - i0`.
    pub fn resolvent() -> Resolvent {
        Resolvent::new(C64::new(1.0, 0.0), -1.0)
    }

    pub fn factor(&self) -> FourierFactor<'_> {
        FourierFactor::with_resolvent(&self.source_hat, Self::resolvent())
    }

    /// Solution with damping `η`, `k² = 1 - iη`.
    pub fn damped_eval(&self, x: &[f64], eta: f64) -> Result<C64, HelmholtzError> {
        let f = FourierFactor::with_resolvent(&self.source_hat, Resolvent::new(C64::new(1.0, -eta), -1.0));
        Ok(inverse_transform_at(f, x)?)
    }

    /// Limiting-absorption evaluator: damped solutions at
    /// [`RICHARDSON_ETAS`] extrapolated to `η = 0`.
    pub fn fourier_eval(&self, x: &[f64]) -> Result<C64, HelmholtzError> {
        let v: Vec<C64> = RICHARDSON_ETAS.iter().map(|&e| self.damped_eval(x, e)).collect::<Result<_, _>>()?;
        Ok(richardson3(v[0], v[1], v[2]))
    }

    /// Closed-form boundary value at `η = 0⁺`.
    pub fn limit_eval(&self, x: &[f64]) -> Result<C64, HelmholtzError> {
        Ok(inverse_transform_at(self.factor(), x)?)
    }

    /// `-(1/4π) ∫ S(y) e^{iσ|x-y|} / |x-y| dy`: radial atoms by a 1D
    /// reduction, other atoms by Monte Carlo.
    pub fn kernel_eval(&self, x: &[f64], sign: f64) -> Result<Estimate, HelmholtzError> {
        let mut value = C64::new(0.0, 0.0);
        let mut err2 = 0.0;
        for (k, a) in self.source.atoms.iter().enumerate() {
            let e = if a.poly.is_one() && a.modulation.iter().all(|&m| m == 0.0) {
                radial_kernel(a, x, sign)?
            } else {
                let mc = mc_kernel(a, x, sign, 400_000, 0x5eed + k as u64);
                Estimate { value: mc.value, error: 3.0 * mc.stderr }
            };
            value += e.value;
            err2 += e.error * e.error;
        }
        Ok(Estimate { value, error: err2.sqrt() })
    }

    /// `⟨w, v⟩ = (2π)^3 ∫ ŵ conj(v̂)`.
    pub fn pairing(&self, v: &FieldExpr) -> Result<C64, HelmholtzError> {
        let vh = v.fourier_transform();
        Ok(fourier_inner(self.factor(), FourierFactor::plain(&vh))? * FourierConvention::parseval_factor(3))
    }
}

/// Two-step Richardson extrapolation for values at `η, η/2, η/4` with an
/// error expansion in integer powers of `η`.
pub fn richardson3(v1: C64, v2: C64, v3: C64) -> C64 {
    let r1 = 2.0 * v2 - v1;
    let r2 = 2.0 * v3 - v2;
    (4.0 * r2 - r1) / 3.0
}

fn radial_kernel(a: &GaussianAtom, x: &[f64], sign: f64) -> Result<Estimate, HelmholtzError> {
    let s = a.inv_variance;
    let r = x.iter().zip(&a.center).map(|(p, c)| (p - c) * (p - c)).sum::<f64>().sqrt();
    let rho_max = (80.0 / s).sqrt();
    let i = C64::i();
    let f = |rho: f64| (-0.5 * s * rho * rho).exp();
    let est = if r < 1e-9 {
        adaptive_1d(|rho| -f(rho) * rho * C64::from_polar(1.0, sign * rho), 0.0, rho_max, 1e-14)?
    } else {
        let g = |rho: f64| {
            let t = (C64::from_polar(1.0, sign * (r + rho)) - C64::from_polar(1.0, sign * (r - rho).abs())) / (i * sign);
            -f(rho) * rho * t / (2.0 * r)
        };
        let mut e = adaptive_1d(g, 0.0, r.min(rho_max), 1e-14)?;
        if r < rho_max {
            let e2 = adaptive_1d(g, r, rho_max, 1e-14)?;
            e.value += e2.value;
            e.error += e2.error;
        }
        e
    };
    Ok(Estimate { value: est.value * a.amplitude, error: est.error * a.amplitude.norm() })
}

fn mc_kernel(a: &GaussianAtom, x: &[f64], sign: f64, n: u64, seed: u64) -> McEstimate {
    let sampler = GaussianSampler::isotropic(a.center.clone(), 1.0 / a.inv_variance.sqrt());
    mc_integrate(
        |y: &[f64]| {
            let r = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            -a.eval(y) * C64::from_polar(1.0, sign * r) / (4.0 * PI * r)
        },
        &sampler,
        n,
        seed,
    )
}

/// Builds the outgoing solution and fixes the kernel sign by comparing both
/// candidate kernels with the limiting-absorption evaluator at a probe point.
pub fn solve_outgoing(source: &FieldExpr) -> Result<OutgoingSolution, HelmholtzError> {
    if source.dim != 3 {
        return Err(HelmholtzError::Dimension(source.dim));
    }
    let mut sol = OutgoingSolution { source: source.clone(), source_hat: source.fourier_transform(), kernel_sign: -1.0 };
    if source.is_zero() {
        return Ok(sol);
    }
    let c = &source.atoms[0].center;
    let probe = [c[0] + 0.7, c[1] - 0.4, c[2] + 0.3];
    let target = sol.fourier_eval(&probe)?;
    let minus = sol.kernel_eval(&probe, -1.0)?.value;
    let plus = sol.kernel_eval(&probe, 1.0)?.value;
    let (best, val) = if (minus - target).norm() <= (plus - target).norm() { (-1.0, minus) } else { (1.0, plus) };
    if (val - target).norm() > 1e-3 * target.norm().max(1e-12) {
        return Err(HelmholtzError::EvaluatorMismatch { fourier: target, kernel: val });
    }
    sol.kernel_sign = best;
    Ok(sol)
}

/// Flux residuals `(1/r) ∫_{S_r} |∂_r w ± i w|² dσ` about `center`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SommerfeldResidual {
    pub plus: f64,
    pub minus: f64,
}

/// Radial derivative by second-order central differences with step `h`.
pub fn sommerfeld_residual<F>(w: F, center: &[f64], r: f64, h: f64, order: usize) -> Result<SommerfeldResidual, HelmholtzError>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    let rule = sphere_rule(3, order)?;
    let at = |om: &[f64], rr: f64| w(&[center[0] + rr * om[0], center[1] + rr * om[1], center[2] + rr * om[2]]);
    let i = C64::i();
    let vals: Vec<(f64, f64)> = rule
        .nodes
        .par_iter()
        .map(|om| {
            let v = at(om, r);
            let dr = (at(om, r + h) - at(om, r - h)) / (2.0 * h);
            ((dr + i * v).norm_sqr(), (dr - i * v).norm_sqr())
        })
        .collect();
    let mut plus = 0.0;
    let mut minus = 0.0;
    for ((p, m), wt) in vals.iter().zip(&rule.weights) {
        plus += p * wt;
        minus += m * wt;
    }
    Ok(SommerfeldResidual { plus: plus * r, minus: minus * r })
}
