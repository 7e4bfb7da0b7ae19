//! One-dimensional model integrals with a near-singular kernel, and rate
//! fitting for ε-sweeps.

use crate::helmholtz::richardson3;
use crate::model::FieldExpr;
use crate::quadrature::{adaptive_1d_with, gauss_legendre, pairwise_sum, Estimate, QuadError};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OscError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unresolved near r = 0: error {error:.3e} for value {value}")]
    Resolution { value: C64, error: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("need at least {needed} sweep points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub eps: f64,
    pub value: C64,
    pub error: f64,
}

/// Values of one functional along a decreasing ε-grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub functional: String,
    pub scenario_id: String,
    pub points: Vec<SweepPoint>,
}

impl SweepSeries {
    pub fn new(functional: &str, scenario_id: &str, points: Vec<SweepPoint>) -> Result<Self, OscError> {
        if points.windows(2).any(|w| w[1].eps >= w[0].eps) {
            return Err(OscError::Argument("ε must be strictly decreasing".into()));
        }
        if points.iter().any(|p| !(p.error >= 0.0) || !(p.eps > 0.0)) {
            return Err(OscError::Argument("ε must be positive and errors nonnegative".into()));
        }
        Ok(Self { functional: functional.into(), scenario_id: scenario_id.into(), points })
    }

    pub fn eps(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.eps).collect()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value.norm()).collect()
    }

    /// `|value − target|` strictly decreasing along the sweep.
    pub fn strictly_decreasing_towards(&self, target: C64) -> bool {
        self.points.windows(2).all(|w| (w[1].value - target).norm() < (w[0].value - target).norm())
    }

    pub fn last(&self) -> Option<&SweepPoint> {
        self.points.last()
    }
}

/// `eps0, eps0/2, …` with `n` points.
pub fn geometric_grid(eps0: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| eps0 / f64::powi(2.0, k as i32)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub limit: C64,
    pub rate: f64,
    pub constant: f64,
    /// RMS of the log-residuals of `|v − L| ≈ C ε^p`.
    pub residual: f64,
    /// `|v − L|` non-increasing as ε decreases; no rate is asserted otherwise.
    pub monotone: bool,
    pub hypothesis: Option<C64>,
}

const LEMMA_NODES: usize = 20;

fn sinh_panels(s_max: f64, breaks_r: &[f64], eta: f64, s_step: f64) -> Vec<f64> {
    let mut s = vec![0.0];
    let s_first = breaks_r.first().map_or(s_max, |&r| (r / eta).asinh());
    let n = (s_first / s_step).ceil().max(1.0) as usize;
    for k in 1..=n {
        s.push(s_first * k as f64 / n as f64);
    }
    for &r in breaks_r.iter().skip(1) {
        s.push((r / eta).asinh());
    }
    if *s.last().unwrap() < s_max {
        s.push(s_max);
    }
    s
}

fn panel_sum<F: Fn(f64) -> C64 + Sync>(f: &F, s: &[f64], n: usize) -> C64 {
    let gl = gauss_legendre(n);
    let parts: Vec<C64> = s
        .par_windows(2)
        .map(|w| {
            let h = 0.5 * (w[1] - w[0]);
            let m = 0.5 * (w[1] + w[0]);
            let mut acc = C64::new(0.0, 0.0);
            for (x, wt) in gl.0.iter().zip(gl.1.iter()) {
                acc += f(m + h * x) * *wt;
            }
            acc * h
        })
        .collect();
    pairwise_sum(&parts)
}

/// `∫_{|r|≤δ} e^{-iqr/ε} w(r) / (−r + iη) dr` with `η = ε α_ε`, `α_ε = ε^γ`.
///
/// The kernel is written as `(−r − iη)/(r² + η²)` and the substitution
/// `r = η sinh s` removes the Lorentzian peak; panels are aligned with the
/// oscillation period away from the origin.
pub fn lemma_l_integral(w: &FieldExpr, delta: f64, eps: f64, gamma: f64, q: f64) -> Result<Estimate, OscError> {
    if w.dim != 1 {
        return Err(OscError::Argument("w must be one-dimensional".into()));
    }
    if !(delta > 0.0 && eps > 0.0 && q >= 0.0) {
        return Err(OscError::Argument("need δ > 0, ε > 0, q ≥ 0".into()));
    }
    let eta = eps * eps.powf(gamma);
    if !(eta > 0.0) {
        return Err(OscError::Argument("ε α_ε underflows".into()));
    }
    if w.is_zero() {
        return Ok(Estimate { value: C64::new(0.0, 0.0), error: 0.0 });
    }
    let lambda = q / eps;
    let width = w.min_inv_variance().sqrt().recip().min(delta);
    let h_r = if lambda > 0.0 { (2.0 * PI / lambda).min(0.25 * width) } else { 0.25 * width };
    let s_max = (delta / eta).asinh();
    let nr = (delta / h_r).ceil() as usize;
    let breaks: Vec<f64> = (1..=nr).map(|k| (k as f64 * h_r).min(delta)).filter(|&r| r < delta).collect();
    let s_pos = sinh_panels(s_max, &breaks, eta, 0.25);
    let mut s: Vec<f64> = s_pos.iter().rev().map(|x| -x).collect();
    s.extend_from_slice(&s_pos[1..]);
    let f = |s: f64| {
        let r = eta * s.sinh();
        let sech = 1.0 / s.cosh();
        let k = C64::new(-s.tanh(), -sech);
        k * w.eval(&[r]) * C64::from_polar(1.0, -lambda * r)
    };
    let coarse = panel_sum(&f, &s, LEMMA_NODES);
    let fine = panel_sum(&f, &s, LEMMA_NODES + 10);
    let scale: f64 = s
        .windows(2)
        .map(|p| (p[1] - p[0]) * f(0.5 * (p[0] + p[1])).norm())
        .sum::<f64>()
        .max(1e-300);
    let error = (fine - coarse).norm() + 1e-14 * scale;
    if error > 1e-9 * scale {
        return Err(OscError::Resolution { value: fine, error });
    }
    Ok(Estimate { value: fine, error })
}

/// `∫ ψ(x) / (x + iη) dx` over the real line.
pub fn pv_delta_eval(psi: &FieldExpr, eta: f64) -> Result<Estimate, OscError> {
    if psi.dim != 1 {
        return Err(OscError::Argument("ψ must be one-dimensional".into()));
    }
    if !(eta > 0.0) {
        return Err(OscError::Argument("η must be positive".into()));
    }
    let r = psi.support_radius(1e-18);
    let s_max = (r / eta).asinh();
    let f = |s: f64| {
        let x = eta * s.sinh();
        C64::new(s.tanh(), -1.0 / s.cosh()) * psi.eval(&[x])
    };
    let est = adaptive_1d_with(f, -s_max, s_max, 1e-13, 20000)?;
    Ok(est)
}

/// η → 0 limit `p.v.∫ψ/x − iπψ(0)` by Richardson extrapolation over
/// `η, η/2, η/4`.
pub fn pv_delta_limit(psi: &FieldExpr, eta: f64) -> Result<Estimate, OscError> {
    let v: Vec<Estimate> = [eta, eta / 2.0, eta / 4.0]
        .iter()
        .map(|&e| pv_delta_eval(psi, e))
        .collect::<Result<_, _>>()?;
    let value = richardson3(v[0].value, v[1].value, v[2].value);
    let spread = (value - richardson3(v[0].value, v[1].value, v[1].value)).norm();
    let error = v.iter().map(|e| e.error).sum::<f64>() * 4.0 + 1e-3 * spread;
    Ok(Estimate { value, error })
}

fn log_regression(eps: &[f64], mags: &[f64]) -> (f64, f64, f64) {
    let n = eps.len() as f64;
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = mags.iter().map(|m| m.max(1e-300).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let p = sxy / sxx;
    let lc = my - p * mx;
    let res = (xs.iter().zip(&ys).map(|(x, y)| (y - lc - p * x).powi(2)).sum::<f64>() / n).sqrt();
    (p, lc.exp(), res)
}

fn fit_with_limit(eps: &[f64], values: &[C64], limit: C64, hypothesis: Option<C64>) -> RateFit {
    let mags: Vec<f64> = values.iter().map(|v| (v - limit).norm()).collect();
    let monotone = mags.windows(2).all(|w| w[1] <= w[0]);
    let (rate, constant, residual) = log_regression(eps, &mags);
    RateFit { limit, rate, constant, residual, monotone, hypothesis }
}

/// Least-squares `(L, c)` in `v ≈ L + c ε^p` for fixed `p`, with weights
/// `ε^{-p}`; supplies starting points for the joint fit.
fn linear_fit(eps: &[f64], values: &[C64], p: f64) -> (C64, C64, f64) {
    let mut s00 = 0.0;
    let mut s01 = 0.0;
    let mut s11 = 0.0;
    let mut b0 = C64::new(0.0, 0.0);
    let mut b1 = C64::new(0.0, 0.0);
    for (e, v) in eps.iter().zip(values) {
        let t = e.powf(p);
        let w = 1.0 / (t * t);
        s00 += w;
        s01 += w * t;
        s11 += w * t * t;
        b0 += v * w;
        b1 += v * (w * t);
    }
    let det = s00 * s11 - s01 * s01;
    let l = (b0 * s11 - b1 * s01) / det;
    let c = (b1 * s00 - b0 * s01) / det;
    let sse: f64 = eps
        .iter()
        .zip(values)
        .map(|(e, v)| {
            let t = e.powf(p);
            (v - l - c * t).norm_sqr() / (t * t)
        })
        .sum();
    (l, c, sse)
}

/// Spread of `|v_k − L| / ε_k^p`, zero when the gaps follow `C ε^p`
/// exactly; insensitive to the phase of `v_k − L`.
fn magnitude_objective(eps: &[f64], values: &[C64], l: C64, p: f64) -> f64 {
    if !(p > 0.0 && p < 10.0) {
        return f64::INFINITY;
    }
    let r: Vec<f64> = eps.iter().zip(values).map(|(e, v)| (v - l).norm() / e.powf(p)).collect();
    let m = r.iter().sum::<f64>() / r.len() as f64;
    r.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / r.len() as f64
}

fn nelder_mead<F: Fn(&[f64; 3]) -> f64>(f: &F, start: [f64; 3], step: [f64; 3], iters: usize) -> ([f64; 3], f64) {
    let mut pts: Vec<([f64; 3], f64)> = (0..4)
        .map(|k| {
            let mut x = start;
            if k > 0 {
                x[k - 1] += step[k - 1];
            }
            (x, f(&x))
        })
        .collect();
    let comb = |a: &[f64; 3], b: &[f64; 3], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])];
    for _ in 0..iters {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (pts[3].1 - pts[0].1).abs() <= 1e-15 * pts[0].1.abs() + 1e-300 {
            break;
        }
        let mut c = [0.0; 3];
        for p in &pts[..3] {
            for j in 0..3 {
                c[j] += p.0[j] / 3.0;
            }
        }
        let worst = pts[3];
        let xr = comb(&c, &worst.0, -1.0);
        let fr = f(&xr);
        if fr < pts[0].1 {
            let xe = comb(&c, &worst.0, -2.0);
            let fe = f(&xe);
            pts[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < pts[2].1 {
            pts[3] = (xr, fr);
        } else {
            let xc = if fr < worst.1 { comb(&c, &xr, 0.5) } else { comb(&c, &worst.0, 0.5) };
            let fc = f(&xc);
            if fc < worst.1.min(fr) {
                pts[3] = (xc, fc);
            } else {
                let best = pts[0].0;
                for p in pts.iter_mut().skip(1) {
                    p.0 = comb(&best, &p.0, 0.5);
                    p.1 = f(&p.0);
                }
            }
        }
    }
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    pts[0]
}

/// Fits `|v − L| ≈ C ε^p`. With a hypothesis the limit is fixed; otherwise
/// `(L, p, C)` are fitted jointly on the last (up to six) points by least
/// squares on the gaps, which tolerates a phase of `v − L` that varies with ε.
pub fn rate_fit(s: &SweepSeries, limit_hypothesis: Option<C64>) -> Result<RateFit, OscError> {
    let n = s.points.len();
    if n < 4 {
        return Err(OscError::TooFewPoints { needed: 4, got: n });
    }
    let eps = s.eps();
    let values: Vec<C64> = s.points.iter().map(|p| p.value).collect();
    if let Some(l) = limit_hypothesis {
        return Ok(fit_with_limit(&eps, &values, l, Some(l)));
    }
    let k0 = n.saturating_sub(6);
    let (e, v) = (&eps[k0..], &values[k0..]);
    let spread = v.iter().map(|x| (x - v[v.len() - 1]).norm()).fold(0.0, f64::max).max(1e-300);
    let obj = |x: &[f64; 3]| magnitude_objective(e, v, C64::new(x[0], x[1]), x[2]);
    let mut starts: Vec<[f64; 3]> = vec![];
    for p in [0.25, 0.5, 1.0, 2.0] {
        let (l, _, _) = linear_fit(e, v, p);
        starts.push([l.re, l.im, p]);
    }
    let (p0, _, _) = log_regression(e, &v.iter().map(|x| x.norm()).collect::<Vec<_>>());
    starts.push([0.0, 0.0, p0.clamp(0.05, 5.0)]);
    let mut best = ([0.0; 3], f64::INFINITY);
    for st in starts {
        let mut cur = nelder_mead(&obj, st, [0.3 * spread, 0.3 * spread, 0.2], 4000);
        for _ in 0..3 {
            cur = nelder_mead(&obj, cur.0, [0.01 * spread, 0.01 * spread, 0.01], 4000);
        }
        if cur.1 < best.1 {
            best = cur;
        }
    }
    let (l, p) = (C64::new(best.0[0], best.0[1]), best.0[2]);
    let mut fit = fit_with_limit(&eps, &values, l, None);
    fit.rate = p;
    fit.constant = e.iter().zip(v).map(|(e, v)| (v - l).norm() / e.powf(p)).sum::<f64>() / e.len() as f64;
    Ok(fit)
}

/// Independent dense rule for [`lemma_l_integral`]: `w̃(0)` is subtracted
/// and integrated in closed form, the remainder uses a geometrically graded
/// mesh near `r = 0` and panels one tenth of the oscillation period.
pub fn lemma_l_brute_force(w: &FieldExpr, delta: f64, eps: f64, gamma: f64, q: f64) -> C64 {
    let eta = eps * eps.powf(gamma);
    let lam = q / eps;
    let wt = |r: f64| w.eval(&[r]) * C64::from_polar(1.0, -lam * r);
    let w0 = wt(0.0);
    let i = C64::i();
    let g = |r: f64| (wt(r) - w0) / (-r + i * eta);
    let mut edges = vec![0.0];
    let mut r = 1e-3 * eta;
    while r < 0.01 * delta {
        edges.push(r);
        r *= 1.15;
    }
    let h = (2.0 * PI / lam.max(1e-12)).min(0.25 * delta) / 10.0;
    let mut x = *edges.last().unwrap();
    while x + h < delta {
        x += h;
        edges.push(x);
    }
    edges.push(delta);
    let gl = gauss_legendre(24);
    let mut acc = C64::new(0.0, 0.0);
    for side in [-1.0, 1.0] {
        for p in edges.windows(2) {
            let hh = 0.5 * (p[1] - p[0]);
            let m = 0.5 * (p[1] + p[0]);
            for (t, wq) in gl.0.iter().zip(gl.1.iter()) {
                acc += g(side * (m + hh * t)) * (wq * hh);
            }
        }
    }
    let log_part = (C64::new(delta, eta)).ln() - (C64::new(-delta, eta)).ln();
    acc + w0 * log_part
}

/// `lemma_l_integral` along an ε-grid.
pub fn lemma_l_sweep(w: &FieldExpr, delta: f64, gamma: f64, q: f64, grid: &[f64]) -> Result<SweepSeries, OscError> {
    let points = grid
        .iter()
        .map(|&eps| lemma_l_integral(w, delta, eps, gamma, q).map(|e| SweepPoint { eps, value: e.value, error: e.error }))
        .collect::<Result<Vec<_>, _>>()?;
    SweepSeries::new("lemma_l_integral", "model-1d", points)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisFit {
    pub label: String,
    pub limit: C64,
    pub fit: RateFit,
    /// Rate of the tail envelope `max_{j≥k} |v_j − L|`, robust to
    /// oscillating boundary terms.
    pub envelope_rate: f64,
    pub final_gap: f64,
}

/// Which candidate limit a sweep supports: the one whose gap envelope
/// shrinks with a positive rate and the smallest final gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub series: SweepSeries,
    pub hypotheses: Vec<HypothesisFit>,
    pub supported: Option<String>,
}

pub fn hypothesis_report(series: &SweepSeries, candidates: &[(&str, C64)]) -> Result<HypothesisReport, OscError> {
    let last = series.last().ok_or(OscError::TooFewPoints { needed: 4, got: 0 })?;
    let hypotheses = candidates
        .iter()
        .map(|(label, l)| {
            let fit = rate_fit(series, Some(*l))?;
            let gaps: Vec<f64> = series.points.iter().map(|p| (p.value - l).norm()).collect();
            let envelope: Vec<f64> = (0..gaps.len()).map(|k| gaps[k..].iter().copied().fold(0.0, f64::max)).collect();
            let (envelope_rate, _, _) = log_regression(&series.eps(), &envelope);
            Ok(HypothesisFit { label: label.to_string(), limit: *l, fit, envelope_rate, final_gap: (last.value - l).norm() })
        })
        .collect::<Result<Vec<_>, OscError>>()?;
    let supported = hypotheses
        .iter()
        .filter(|h| h.envelope_rate > 0.25)
        .min_by(|a, b| a.final_gap.total_cmp(&b.final_gap))
        .map(|h| h.label.clone());
    Ok(HypothesisReport { series: series.clone(), hypotheses, supported })
}

/// Sweep of the model integral tested against `L ∈ {0, −iπ w(0)}`.
pub fn lemma_l_hypothesis_report(w: &FieldExpr, delta: f64, gamma: f64, q: f64, grid: &[f64]) -> Result<HypothesisReport, OscError> {
    let series = lemma_l_sweep(w, delta, gamma, q, grid)?;
    let w0 = w.eval(&[0.0]);
    hypothesis_report(&series, &[("zero", C64::new(0.0, 0.0)), ("minus_i_pi_w0", -C64::i() * PI * w0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GaussianAtom;
    use crate::special::faddeeva;
    use proptest::prelude::*;

    fn gauss(c: f64, s: f64) -> FieldExpr {
        FieldExpr::atom(GaussianAtom::plain(1.0, vec![c], s))
    }

    #[test]
    fn zero_weight_gives_zero() {
        let v = lemma_l_integral(&FieldExpr::zero(1), 0.5, 1e-2, 1.0, 1.0).unwrap();
        assert_eq!(v.value, C64::new(0.0, 0.0));
    }

    #[test]
    fn lemma_matches_dense_oracle() {
        let w = gauss(0.0, 1.0);
        let v = lemma_l_integral(&w, 0.5, 1e-2, 1.0, 1.0).unwrap();
        let o = lemma_l_brute_force(&w, 0.5, 1e-2, 1.0, 1.0);
        assert!((v.value - o).norm() < 1e-8, "{} vs {o}", v.value);
        for (eps, gamma, q, c) in [(0.05, 0.5, 2.0, 0.1), (0.2, 1.0, 0.0, -0.3), (0.003, 1.0, 1.0, 0.05)] {
            let w = gauss(c, 3.0).add(&gauss(-c, 1.5).scale(C64::new(0.0, 0.5)));
            let v = lemma_l_integral(&w, 0.7, eps, gamma, q).unwrap();
            let o = lemma_l_brute_force(&w, 0.7, eps, gamma, q);
            assert!((v.value - o).norm() < 1e-8, "eps {eps}: {} vs {o}", v.value);
        }
    }

    #[test]
    fn lemma_conjugation_symmetry() {
        let w = gauss(0.2, 2.0).modulate(&[0.7]).add(&gauss(-0.1, 4.0).scale(C64::new(0.3, -0.8)));
        let wr = w.conj().reflect();
        for eps in [0.1, 0.02] {
            let a = lemma_l_integral(&w, 0.5, eps, 1.0, 1.3).unwrap().value;
            let b = lemma_l_integral(&wr, 0.5, eps, 1.0, 1.3).unwrap().value;
            assert!((a.conj() + b).norm() < 1e-10, "{a} {b}");
        }
    }

    #[test]
    fn lemma_sweep_prefers_zero_limit() {
        let w = gauss(0.0, 1.0);
        let rep = lemma_l_hypothesis_report(&w, 0.5, 1.0, 1.0, &geometric_grid(0.1, 6)).unwrap();
        assert_eq!(rep.hypotheses.len(), 2);
        assert_eq!(rep.supported.as_deref(), Some("zero"));
        assert!(rep.hypotheses[0].envelope_rate > 0.5);
        assert!(rep.hypotheses[1].final_gap > 3.0 && rep.hypotheses[1].envelope_rate.abs() < 0.05);
    }

    #[test]
    fn pv_even_gaussian_is_minus_i_pi() {
        let psi = gauss(0.0, 2.0);
        let mut prev = f64::INFINITY;
        for eta in [1e-2, 5e-3, 2.5e-3, 1.25e-3] {
            let v = pv_delta_eval(&psi, eta).unwrap().value;
            assert!(v.re.abs() < 1e-12);
            let gap = (v.im + PI).abs();
            assert!(gap < 4.0 * eta && gap < prev);
            prev = gap;
        }
        let l = pv_delta_limit(&psi, 1e-2).unwrap().value;
        assert!((l - C64::new(0.0, -PI)).norm() < 1e-6);
    }

    #[test]
    fn pv_odd_weight_is_real_root_pi() {
        let psi = gauss(0.0, 2.0).times_coord(0);
        let l = pv_delta_limit(&psi, 1e-2).unwrap().value;
        assert!((l - C64::new(PI.sqrt(), 0.0)).norm() < 1e-6, "{l}");
    }

    #[test]
    fn pv_shifted_gaussian_matches_faddeeva() {
        // ∫ e^{-(x-c)²}/(x + iη) dx = −iπ w(c + iη).
        for c in [0.0, 0.4, -1.3] {
            let psi = gauss(c, 2.0);
            for eta in [0.3, 1e-2] {
                let v = pv_delta_eval(&psi, eta).unwrap().value;
                let exact = -C64::i() * PI * faddeeva(C64::new(c, eta));
                assert!((v - exact).norm() < 1e-10, "{v} {exact}");
            }
            let l = pv_delta_limit(&psi, 1e-2).unwrap().value;
            assert!((l + C64::i() * PI * faddeeva(C64::new(c, 0.0))).norm() < 1e-6);
        }
    }

    fn series(f: impl Fn(f64) -> C64) -> SweepSeries {
        let pts = geometric_grid(0.4, 5).into_iter().map(|e| SweepPoint { eps: e, value: f(e), error: 0.0 }).collect();
        SweepSeries::new("synthetic", "none", pts).unwrap()
    }

    #[test]
    fn rate_fit_synthetic() {
        let s = series(|e| C64::new(2.0 + e, 0.0));
        let f = rate_fit(&s, None).unwrap();
        assert!((f.limit - C64::new(2.0, 0.0)).norm() < 1e-6 && (f.rate - 1.0).abs() < 0.05);
        let s = series(|e| C64::new(e.sqrt(), 0.0));
        let f = rate_fit(&s, Some(C64::new(0.0, 0.0))).unwrap();
        assert!((f.rate - 0.5).abs() < 0.05 && f.monotone);
        let f = rate_fit(&s, None).unwrap();
        assert!((f.rate - 0.5).abs() < 0.05);
    }

    #[test]
    fn rate_fit_with_rotating_phase() {
        let s = series(|e| C64::from_polar(0.7 * e, 2.0 / e) + C64::new(0.1, -0.2));
        let f = rate_fit(&s, None).unwrap();
        assert!((f.limit - C64::new(0.1, -0.2)).norm() < 1e-6 && (f.rate - 1.0).abs() < 0.05, "{f:?}");
    }

    #[test]
    fn rate_fit_flags_non_monotone() {
        let s = series(|e| C64::new((1.0 / e).sin(), 0.0));
        assert!(!rate_fit(&s, Some(C64::new(0.0, 0.0))).unwrap().monotone);
        assert!(rate_fit(&SweepSeries::new("x", "y", vec![]).unwrap(), None).is_err());
    }

    #[test]
    fn series_invariants() {
        let p = |e: f64, err: f64| SweepPoint { eps: e, value: C64::new(1.0, 0.0), error: err };
        assert!(SweepSeries::new("f", "s", vec![p(0.1, 0.0), p(0.2, 0.0)]).is_err());
        assert!(SweepSeries::new("f", "s", vec![p(0.2, -1.0)]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn planted_rates_recovered(p in 0.3f64..2.0, lre in -3.0f64..3.0, lim in -3.0f64..3.0, c in 0.2f64..5.0, phase in 0.0f64..std::f64::consts::TAU) {
            let l = C64::new(lre, lim);
            let cc = C64::from_polar(c, phase);
            let s = series(|e| l + cc * e.powf(p));
            let joint = rate_fit(&s, None).unwrap();
            prop_assert!((joint.rate - p).abs() < 0.05);
            prop_assert!((joint.limit - l).norm() < 1e-3 * c);
            let fixed = rate_fit(&s, Some(l)).unwrap();
            prop_assert!((fixed.rate - p).abs() < 0.05 && fixed.monotone);
        }
    }
}
