//! Dyadic-ring norms `B` and `B*`, weighted `L²`, the `X_λ` observable norm
//! and the trace functional.
//!
//! Ring `j ≥ 0` is the annulus `2^j ≤ |x| < 2^{j+1}`, ring `-1` the unit ball.
//! All integrals are over `R³`.

use crate::helmholtz::{common_axis, perpendicular, SpectralSolution};
use crate::model::FieldExpr;
use crate::quadrature::{adaptive_1d, composite_gl, gauss_legendre, pairwise_sum, sphere_rule, QuadError};
use crate::wigner::Observable;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("field must be three-dimensional (got d = {0})")]
    Dimension(usize),
    #[error("tail beyond ring {j_max} does not converge for decay exponent {exponent}")]
    TailDiverges { j_max: i32, exponent: f64 },
    #[error("field extends beyond the last ring; J_max must be at least {required}")]
    Truncation { required: i32 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Decay class used for truncation and tail bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Decay {
    /// Vanishes outside the given radius.
    Compact(f64),
    /// Negligible (below 1e-17 relative) outside the given radius.
    Gaussian(f64),
    /// `|f(x)| ≲ |x|^{-k}` at infinity.
    Power(f64),
}

pub trait EvaluableField: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> C64;
    fn decay(&self) -> Decay;
    /// Symmetry axis through the origin, if the field is axisymmetric.
    fn axis(&self) -> Option<[f64; 3]> {
        None
    }
    /// Total phase variation of `|f|²` along any radial or angular line.
    fn bandwidth(&self) -> f64 {
        0.0
    }
}

impl EvaluableField for FieldExpr {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> C64 {
        FieldExpr::eval(self, x)
    }

    fn decay(&self) -> Decay {
        Decay::Gaussian(self.support_radius(1e-17))
    }

    fn axis(&self) -> Option<[f64; 3]> {
        common_axis(&[self])
    }

    fn bandwidth(&self) -> f64 {
        let r = self.support_radius(1e-17);
        let mut k: f64 = 0.0;
        for a in &self.atoms {
            for b in &self.atoms {
                let dk: f64 = a.modulation.iter().zip(&b.modulation).map(|(x, y)| (x - y) * (x - y)).sum();
                k = k.max(dk.sqrt());
            }
        }
        2.0 * k * r
    }
}

impl EvaluableField for SpectralSolution {
    fn dim(&self) -> usize {
        self.d
    }

    fn eval(&self, x: &[f64]) -> C64 {
        self.evaluate_exact(x).unwrap_or(C64::new(f64::NAN, f64::NAN))
    }

    fn decay(&self) -> Decay {
        Decay::Power(1.0)
    }

    fn axis(&self) -> Option<[f64; 3]> {
        common_axis(&[&self.numerator])
    }

    fn bandwidth(&self) -> f64 {
        // numerator modulations are minus the source positions
        let far = self
            .numerator
            .atoms
            .iter()
            .map(|a| a.modulation.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        4.0 * far + 2.0
    }
}

/// A field given by a closure.
pub struct FnField<F: Fn(&[f64]) -> C64 + Sync> {
    pub d: usize,
    pub f: F,
    pub decay: Decay,
    pub axis: Option<[f64; 3]>,
}

impl<F: Fn(&[f64]) -> C64 + Sync> EvaluableField for FnField<F> {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval(&self, x: &[f64]) -> C64 {
        (self.f)(x)
    }
    fn decay(&self) -> Decay {
        self.decay
    }
    fn axis(&self) -> Option<[f64; 3]> {
        self.axis
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingDecomposition {
    pub j_max: i32,
}

impl Default for RingDecomposition {
    fn default() -> Self {
        Self { j_max: 20 }
    }
}

impl RingDecomposition {
    pub fn new(j_max: i32) -> Self {
        assert!(j_max >= -1);
        Self { j_max }
    }

    pub fn bounds(&self, j: i32) -> (f64, f64) {
        if j < 0 {
            (0.0, 1.0)
        } else {
            (2f64.powi(j), 2f64.powi(j + 1))
        }
    }

    pub fn rings(&self) -> std::ops::RangeInclusive<i32> {
        -1..=self.j_max
    }
}

/// Base node counts per ring; oscillating fields add nodes in proportion to
/// their bandwidth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormQuad {
    pub radial: usize,
    pub angular: usize,
}

impl Default for NormQuad {
    fn default() -> Self {
        Self { radial: 24, angular: 32 }
    }
}

impl NormQuad {
    pub fn refined(&self) -> Self {
        Self { radial: 2 * self.radial, angular: 2 * self.angular }
    }
}

/// `∫_{r0 ≤ |x| < r1} w(|x|) |f(x)|² dx`.
pub fn shell_integral<F: EvaluableField + ?Sized>(
    f: &F,
    r0: f64,
    r1: f64,
    weight: &(dyn Fn(f64) -> f64 + Sync),
    q: &NormQuad,
) -> Result<f64, NormError> {
    if f.dim() != 3 {
        return Err(NormError::Dimension(f.dim()));
    }
    let bw = f.bandwidth();
    let nr = q.radial + (0.75 * (2.0 * (r1 - r0)).min(bw)).ceil() as usize;
    let nang = q.angular + (0.75 * (2.0 * r1).min(bw)).ceil() as usize;
    let panels = (nr / 32).max(1);
    let (rs, rw) = composite_gl(r0, r1, panels, nr.div_ceil(panels));
    let vals: Vec<f64> = match f.axis() {
        Some(ax) => {
            let perp = perpendicular(ax);
            let gl = gauss_legendre(nang);
            rs.par_iter()
                .zip(rw.par_iter())
                .map(|(&r, &w)| {
                    let mut acc = 0.0;
                    for (&mu, &wm) in gl.0.iter().zip(gl.1.iter()) {
                        let st = (1.0 - mu * mu).sqrt();
                        let x = [
                            r * (mu * ax[0] + st * perp[0]),
                            r * (mu * ax[1] + st * perp[1]),
                            r * (mu * ax[2] + st * perp[2]),
                        ];
                        acc += wm * f.eval(&x).norm_sqr();
                    }
                    2.0 * PI * acc * w * r * r * weight(r)
                })
                .collect()
        }
        None => {
            let rule = sphere_rule(3, nang)?;
            rs.par_iter()
                .zip(rw.par_iter())
                .map(|(&r, &w)| {
                    let mut acc = 0.0;
                    for (om, wo) in rule.nodes.iter().zip(&rule.weights) {
                        acc += wo * f.eval(&[r * om[0], r * om[1], r * om[2]]).norm_sqr();
                    }
                    acc * w * r * r * weight(r)
                })
                .collect()
        }
    };
    let c: Vec<C64> = vals.iter().map(|&v| C64::new(v, 0.0)).collect();
    Ok(pairwise_sum(&c).re)
}

/// Per-ring terms and the resulting functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value: f64,
    /// Ring terms, index 0 is ring `-1`.
    pub terms: Vec<f64>,
    pub tail_bound: f64,
    /// Ring attaining the maximum term.
    pub argmax: i32,
    /// Whether the maximum is attained strictly before `J_max`.
    pub interior: bool,
}

fn last_ring(f: &(impl EvaluableField + ?Sized), rd: &RingDecomposition) -> Result<i32, NormError> {
    let radius = match f.decay() {
        Decay::Compact(r) | Decay::Gaussian(r) => r,
        Decay::Power(_) => return Ok(rd.j_max),
    };
    let needed = if radius <= 1.0 { -1 } else { radius.log2().floor() as i32 };
    if needed > rd.j_max {
        return Err(NormError::Truncation { required: needed });
    }
    Ok(needed)
}

fn ring_terms<F: EvaluableField + ?Sized>(
    f: &F,
    rd: &RingDecomposition,
    q: &NormQuad,
    weight: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<Vec<f64>, NormError> {
    let last = last_ring(f, rd)?;
    let mut out = Vec::new();
    for j in rd.rings() {
        if j > last {
            out.push(0.0);
            continue;
        }
        let (r0, r1) = rd.bounds(j);
        out.push(shell_integral(f, r0, r1, weight, q)?);
    }
    Ok(out)
}

fn report(terms: Vec<f64>, value: f64, tail_bound: f64, j_max: i32) -> NormReport {
    let (k, _) = terms.iter().enumerate().fold((0, f64::MIN), |acc, (k, &t)| if t > acc.1 { (k, t) } else { acc });
    let argmax = k as i32 - 1;
    NormReport { value, terms, tail_bound, argmax, interior: argmax < j_max }
}

/// `‖f‖_B = Σ_j (2^{j+1} ∫_{C(j)} |f|²)^{1/2}`.
pub fn b_norm<F: EvaluableField + ?Sized>(f: &F, rd: &RingDecomposition, q: &NormQuad) -> Result<NormReport, NormError> {
    let ints = ring_terms(f, rd, q, &|_| 1.0)?;
    let terms: Vec<f64> = rd.rings().zip(&ints).map(|(j, &i)| (2f64.powi(j + 1) * i).sqrt()).collect();
    let sum: f64 = terms.iter().sum();
    let tail = match f.decay() {
        Decay::Power(k) => {
            let rho = 2f64.powf(2.0 - k);
            if rho >= 1.0 {
                return Err(NormError::TailDiverges { j_max: rd.j_max, exponent: k });
            }
            terms.last().copied().unwrap_or(0.0) * rho / (1.0 - rho)
        }
        _ => 0.0,
    };
    Ok(report(terms, sum, tail, rd.j_max))
}

/// `‖u‖_{B*} = sup_j (2^{-j} ∫_{C(j)} |u|²)^{1/2}` over the computed rings.
pub fn bstar_norm<F: EvaluableField + ?Sized>(u: &F, rd: &RingDecomposition, q: &NormQuad) -> Result<NormReport, NormError> {
    let ints = ring_terms(u, rd, q, &|_| 1.0)?;
    let terms: Vec<f64> = rd.rings().zip(&ints).map(|(j, &i)| (2f64.powi(-j) * i).sqrt()).collect();
    let sup = terms.iter().copied().fold(0.0, f64::max);
    let tail = match u.decay() {
        // ring terms of a |x|^{-k} field scale like 2^{j(1-k)}
        Decay::Power(k) if k < 1.0 => f64::INFINITY,
        Decay::Power(_) => terms.last().copied().unwrap_or(0.0),
        _ => 0.0,
    };
    Ok(report(terms, sup, tail, rd.j_max))
}

/// `‖⟨x⟩^e u‖_{L²}`; the reported tail is the geometric bound on rings past
/// `J_max` added in quadrature.
pub fn weighted_l2<F: EvaluableField + ?Sized>(u: &F, exponent: f64, rd: &RingDecomposition, q: &NormQuad) -> Result<NormReport, NormError> {
    let w = move |r: f64| (1.0 + r * r).powf(exponent);
    let terms = ring_terms(u, rd, q, &w)?;
    let sum: f64 = terms.iter().sum();
    let tail = match u.decay() {
        Decay::Power(k) => {
            let rho = 2f64.powf(2.0 * exponent + 3.0 - 2.0 * k);
            if rho >= 1.0 {
                return Err(NormError::TailDiverges { j_max: rd.j_max, exponent: k });
            }
            terms.last().copied().unwrap_or(0.0) * rho / (1.0 - rho)
        }
        _ => 0.0,
    };
    let value = (sum + tail).sqrt();
    let tail_bound = value - sum.sqrt();
    Ok(report(terms, value, tail_bound, rd.j_max))
}

fn compass_max(h: &dyn Fn(&[f64]) -> f64, start: Vec<f64>, step0: f64) -> f64 {
    let d = start.len();
    let mut x = start;
    let mut best = h(&x);
    let mut step = step0;
    while step > 1e-10 {
        let mut improved = false;
        for j in 0..d {
            for s in [-1.0, 1.0] {
                let mut y = x.clone();
                y[j] += s * step;
                let v = h(&y);
                if v > best {
                    best = v;
                    x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

/// `sup_x (1 + |x| + t)^{1+λ} |φ(x)|` by multi-start compass search.
pub fn weighted_sup(phi: &FieldExpr, t: f64, lambda: f64) -> f64 {
    let d = phi.dim;
    let h = |x: &[f64]| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        (1.0 + r + t).powf(1.0 + lambda) * phi.eval(x).norm()
    };
    let mut starts: Vec<Vec<f64>> = vec![vec![0.0; d]];
    for a in &phi.atoms {
        let c = &a.center;
        let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dir: Vec<f64> = if n > 0.0 { c.iter().map(|v| v / n).collect() } else { (0..d).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect() };
        let width = 1.0 / a.inv_variance.sqrt();
        for rho in [0.0, 0.5, 1.0, 2.0, 3.0] {
            starts.push((0..d).map(|j| c[j] + rho * width * dir[j]).collect());
        }
    }
    starts.into_iter().map(|s| compass_max(&h, s, 0.25)).fold(0.0, f64::max)
}

/// `∫ sup_x (1 + |x| + |y|)^{1+λ} |φ(x) ψ̂(y)| dy` for `a = φ ⊗ ψ`, with
/// `ψ̂` the forward transform of `ψ`.
pub fn xlambda_norm(a: &Observable, lambda: f64) -> Result<f64, NormError> {
    if a.phi.is_zero() || a.psi.is_zero() {
        return Ok(0.0);
    }
    let d = a.dim();
    let psi_hat = a.psi.fourier_transform();
    let r_max = psi_hat.support_radius(1e-17);
    let (ts, tw) = composite_gl(0.0, r_max, 24, 16);
    let shell: Box<dyn Fn(f64) -> f64 + Sync> = if d == 1 {
        Box::new(|t: f64| psi_hat.eval(&[t]).norm() + psi_hat.eval(&[-t]).norm())
    } else {
        let rule = sphere_rule(d, 40)?;
        Box::new(move |t: f64| {
            let mut acc = 0.0;
            for (om, w) in rule.nodes.iter().zip(&rule.weights) {
                let y: Vec<f64> = om.iter().map(|v| v * t).collect();
                acc += w * psi_hat.eval(&y).norm();
            }
            acc * t.powi(d as i32 - 1)
        })
    };
    let vals: Vec<f64> = ts
        .par_iter()
        .zip(tw.par_iter())
        .map(|(&t, &w)| w * weighted_sup(&a.phi, t, lambda) * shell(t))
        .collect();
    Ok(vals.iter().sum())
}

/// `∫_R ‖f(x₁, ·)‖_{L²(R²)} dx₁`.
pub fn trace_functional<F: EvaluableField + ?Sized>(f: &F, tol: f64) -> Result<f64, NormError> {
    if f.dim() != 3 {
        return Err(NormError::Dimension(f.dim()));
    }
    let (radius, compact) = match f.decay() {
        Decay::Compact(r) => (r, true),
        Decay::Gaussian(r) => (r, false),
        Decay::Power(k) => return Err(NormError::TailDiverges { j_max: 0, exponent: k }),
    };
    let n_theta = 32 + (0.75 * f.bandwidth()).ceil() as usize;
    let slice = |x1: f64| -> Result<f64, QuadError> {
        let rho_max = if compact { (radius * radius - x1 * x1).max(0.0).sqrt() } else { radius };
        if rho_max == 0.0 {
            return Ok(0.0);
        }
        let mut acc = 0.0;
        for k in 0..n_theta {
            let th = 2.0 * PI * k as f64 / n_theta as f64;
            let (s, c) = th.sin_cos();
            let e = adaptive_1d(
                |rho| C64::new(f.eval(&[x1, rho * c, rho * s]).norm_sqr() * rho, 0.0),
                0.0,
                rho_max,
                1e-3 * tol,
            )?;
            acc += e.value.re;
        }
        Ok((acc * 2.0 * PI / n_theta as f64).sqrt())
    };
    let e = adaptive_1d(|x1| C64::new(slice(x1).unwrap_or(f64::NAN), 0.0), -radius, radius, tol)?;
    if e.value.re.is_nan() {
        return Err(NormError::Quadrature(QuadError::NoConvergence { value: e.value, error: e.error, intervals: 0 }));
    }
    Ok(e.value.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::helmholtz::solve_rescaled;
    use crate::model::{GaussianAtom, Scenario};

    fn ball() -> FnField<impl Fn(&[f64]) -> C64 + Sync> {
        FnField {
            d: 3,
            f: |x: &[f64]| C64::new(if x.iter().map(|v| v * v).sum::<f64>() < 1.0 { 1.0 } else { 0.0 }, 0.0),
            decay: Decay::Compact(1.0),
            axis: Some([0.0, 0.0, 1.0]),
        }
    }

    #[test]
    fn unit_ball_norms() {
        let rd = RingDecomposition::default();
        let q = NormQuad::default();
        let b = b_norm(&ball(), &rd, &q).unwrap();
        assert!((b.value - (4.0 * PI / 3.0f64).sqrt()).abs() < 1e-12);
        assert!((b.value - 2.0466).abs() < 1e-4);
        let bs = bstar_norm(&ball(), &rd, &q).unwrap();
        assert!((bs.value - (2.0 * 4.0 * PI / 3.0f64).sqrt()).abs() < 1e-12);
        assert!((bs.value - 2.8944).abs() < 1e-4);
        assert!(bs.interior);
    }

    #[test]
    fn zero_field() {
        let rd = RingDecomposition::default();
        let q = NormQuad::default();
        let z = FieldExpr::zero(3);
        assert_eq!(b_norm(&z, &rd, &q).unwrap().value, 0.0);
        assert_eq!(bstar_norm(&z, &rd, &q).unwrap().value, 0.0);
        assert_eq!(weighted_l2(&z, 0.0, &rd, &q).unwrap().value, 0.0);
        assert_eq!(trace_functional(&z, 1e-10).unwrap(), 0.0);
        let a = Observable::new(FieldExpr::zero(3), FieldExpr::unit_gaussian(vec![0.0; 3]));
        assert_eq!(xlambda_norm(&a, 0.5).unwrap(), 0.0);
    }

    // Dense midpoint rule for ∫_{r0}^{r1} w(r) e^{-r²} 4π r² dr.
    fn radial_gaussian(r0: f64, r1: f64, w: impl Fn(f64) -> f64) -> f64 {
        let n = 200_000;
        let h = (r1 - r0) / n as f64;
        (0..n)
            .map(|k| {
                let r = r0 + (k as f64 + 0.5) * h;
                w(r) * (-r * r).exp() * 4.0 * PI * r * r * h
            })
            .sum()
    }

    #[test]
    fn unit_gaussian_norms_match_radial_oracle() {
        let g = FieldExpr::unit_gaussian(vec![0.0; 3]);
        let rd = RingDecomposition::default();
        let q = NormQuad::default();
        let mut oracle = 0.0;
        for j in -1..=4 {
            let (r0, r1) = rd.bounds(j);
            oracle += (2f64.powi(j + 1) * radial_gaussian(r0, r1, |_| 1.0)).sqrt();
        }
        let b = b_norm(&g, &rd, &q).unwrap().value;
        assert!((b - oracle).abs() < 1e-6 * oracle, "{b} vs {oracle}");

        let l2 = weighted_l2(&g, 0.0, &rd, &q).unwrap().value;
        assert!((l2 - PI.powf(0.75)).abs() < 1e-10);
        assert!((l2 - 2.3597).abs() < 1e-4);
        let wl = weighted_l2(&g, -1.0, &rd, &q).unwrap().value;
        let wo = radial_gaussian(0.0, 12.0, |r| 1.0 / (1.0 + r * r)).sqrt();
        assert!((wl - wo).abs() < 1e-8, "{wl} vs {wo}");
    }

    #[test]
    fn homogeneity_and_triangle_inequality() {
        let rd = RingDecomposition::default();
        let q = NormQuad::default();
        let f = FieldExpr::from_atoms(3, vec![GaussianAtom::new(C64::new(1.0, 0.5), vec![1.0, 0.0, 0.0], 0.7, vec![0.0, 1.0, 0.0])]);
        let g = FieldExpr::from_atoms(3, vec![GaussianAtom::new(C64::new(-0.3, 0.2), vec![0.0, 2.0, 0.5], 1.5, vec![0.5, 0.0, 0.0])]);
        let c = C64::new(-2.0, 1.5);
        let bf = b_norm(&f, &rd, &q).unwrap().value;
        let bcf = b_norm(&f.scale(c), &rd, &q).unwrap().value;
        assert!((bcf - c.norm() * bf).abs() < 1e-9 * bcf);
        let sf = bstar_norm(&f, &rd, &q).unwrap().value;
        let scf = bstar_norm(&f.scale(c), &rd, &q).unwrap().value;
        assert!((scf - c.norm() * sf).abs() < 1e-9 * scf);
        let bg = b_norm(&g, &rd, &q).unwrap().value;
        let bfg = b_norm(&f.add(&g), &rd, &q).unwrap().value;
        assert!(bfg <= bf + bg + 1e-9);
        let sg = bstar_norm(&g, &rd, &q).unwrap().value;
        let sfg = bstar_norm(&f.add(&g), &rd, &q).unwrap().value;
        assert!(sfg <= sf + sg + 1e-9);
    }

    #[test]
    fn trace_of_ball_and_gaussian() {
        let t = trace_functional(&ball(), 1e-8).unwrap();
        assert!((t - PI.sqrt() * PI / 2.0).abs() < 1e-6, "{t}");
        // unit Gaussian: ‖f(x₁,·)‖ = √π e^{-x₁²/2}, so the trace is π √2.
        let g = FieldExpr::unit_gaussian(vec![0.0; 3]);
        let tg = trace_functional(&g, 1e-10).unwrap();
        let oracle = {
            let n = 100_000;
            let h = 24.0 / n as f64;
            (0..n)
                .map(|k| {
                    let x = -12.0 + (k as f64 + 0.5) * h;
                    // ∫∫ e^{-x²-ρ²} ρ dρ dθ = π e^{-x²}
                    (PI * (-x * x).exp()).sqrt() * h
                })
                .sum::<f64>()
        };
        assert!((tg - oracle).abs() < 1e-8, "{tg} vs {oracle}");
    }

    #[test]
    fn xlambda_matches_nested_oracle_and_is_monotone() {
        let a = Observable::new(FieldExpr::unit_gaussian(vec![0.0; 3]), FieldExpr::unit_gaussian(vec![0.0; 3]));
        let lambda = 0.5;
        let v = xlambda_norm(&a, lambda).unwrap();
        // g(t) = max_r (1+r+t)^{1.5} e^{-r²/2} by a dense grid; ψ̂ = (2π)^{-3/2} e^{-|y|²/2}.
        let g = |t: f64| {
            let mut best: f64 = 0.0;
            let mut r = 0.0;
            while r < 6.0 {
                best = best.max((1.0 + r + t).powf(1.5) * (-0.5 * r * r).exp());
                r += 1e-4;
            }
            best
        };
        let n = 4000;
        let h = 12.0 / n as f64;
        let oracle: f64 = (0..n)
            .map(|k| {
                let t = (k as f64 + 0.5) * h;
                4.0 * PI * t * t * g(t) * (2.0 * PI).powf(-1.5) * (-0.5 * t * t).exp() * h
            })
            .sum();
        assert!((v - oracle).abs() < 1e-6 * oracle, "{v} vs {oracle}");
        assert!(xlambda_norm(&a, 0.2).unwrap() <= v);
        assert!(v <= xlambda_norm(&a, 1.0).unwrap());
    }

    #[test]
    fn bstar_of_rescaled_solution_is_stable_under_refinement() {
        let s = Scenario::reference();
        let w = solve_rescaled(&s, 0.2, 0);
        let rd = RingDecomposition::new(12);
        let q = NormQuad::default();
        let coarse = bstar_norm(&w, &rd, &q).unwrap();
        let fine = bstar_norm(&w, &rd, &q.refined()).unwrap();
        assert!((coarse.value / fine.value - 1.0).abs() < 0.02, "{} vs {}", coarse.value, fine.value);
        assert!(coarse.interior);
        assert!(matches!(b_norm(&w, &rd, &q), Err(NormError::TailDiverges { .. })));
    }
}
