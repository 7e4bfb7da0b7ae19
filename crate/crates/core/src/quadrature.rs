//! Integration engines: Gauss rules, sphere rules, Lorentzian-adapted radial
//! grids, adaptive 1D quadrature and seeded Monte Carlo.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("unsupported dimension {0} (sphere rules exist for d = 2, 3)")]
    UnsupportedDim(usize),
    #[error("radial grid requires 0 < w < c < r_max (got c = {c}, w = {w}, r_max = {r_max})")]
    BadRadialParams { c: f64, w: f64, r_max: f64 },
    #[error("adaptive quadrature did not converge: estimate {value} with error {error} after {intervals} intervals")]
    NoConvergence { value: C64, error: f64, intervals: usize },
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, cached per order.
pub fn gauss_legendre(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&n) {
        return r.clone();
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    let r = Arc::new((x, w));
    cache.lock().unwrap().insert(n, r.clone());
    r
}

/// Gauss–Hermite nodes and weights for the weight `exp(-x²)`.
pub fn gauss_hermite(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&n) {
        return r.clone();
    }
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    let nf = n as f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = (j + 1) as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    x.reverse();
    w.reverse();
    let r = Arc::new((x, w));
    cache.lock().unwrap().insert(n, r.clone());
    r
}

/// Composite Gauss–Legendre rule with `panels` equal panels of `n` nodes.
pub fn composite_gl(a: f64, b: f64, panels: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let gl = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * n);
    let mut ws = Vec::with_capacity(panels * n);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (x, w) in gl.0.iter().zip(gl.1.iter()) {
            xs.push(lo + 0.5 * h * (x + 1.0));
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Nodes on the unit sphere `S^{d-1}` with positive weights summing to its
/// area.
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub d: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl SphereRule {
    pub fn integrate<F: Fn(&[f64]) -> C64 + Sync>(&self, f: F) -> C64 {
        let vals: Vec<C64> = self.nodes.par_iter().zip(self.weights.par_iter()).map(|(x, &w)| f(x) * w).collect();
        pairwise_sum(&vals)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

// Orthonormal real spherical harmonics up to degree `l_max` at a point.
fn real_sph_harmonics(l_max: usize, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    let z = x[2].clamp(-1.0, 1.0);
    let st = (1.0 - z * z).max(0.0).sqrt();
    let phi = x[1].atan2(x[0]);
    let n = l_max + 1;
    let mut p = vec![0.0; n * n];
    p[0] = (1.0 / (4.0 * PI)).sqrt();
    for m in 1..n {
        p[m * n + m] = -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * st * p[(m - 1) * n + (m - 1)];
    }
    for m in 0..n {
        if m + 1 < n {
            p[(m + 1) * n + m] = ((2 * m + 3) as f64).sqrt() * z * p[m * n + m];
        }
        for l in (m + 2)..n {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[l * n + m] = a * (z * p[(l - 1) * n + m] - b * p[(l - 2) * n + m]);
        }
    }
    let s2 = 2f64.sqrt();
    for l in 0..n {
        out.push(p[l * n]);
        for m in 1..=l {
            let mf = m as f64;
            out.push(s2 * p[l * n + m] * (mf * phi).cos());
            out.push(s2 * p[l * n + m] * (mf * phi).sin());
        }
    }
}

fn fibonacci_nodes(n: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            vec![r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

fn corrected_fibonacci(order: usize) -> SphereRule {
    let k = (order + 1) * (order + 1);
    let mut n = 3 * k + 16;
    loop {
        let nodes = fibonacci_nodes(n);
        let mut a = DMatrix::<f64>::zeros(k, n);
        let mut buf = Vec::with_capacity(k);
        for (j, x) in nodes.iter().enumerate() {
            real_sph_harmonics(order, x, &mut buf);
            for (i, v) in buf.iter().enumerate() {
                a[(i, j)] = *v;
            }
        }
        let w0 = DVector::from_element(n, 4.0 * PI / n as f64);
        let mut b = DVector::zeros(k);
        b[0] = (4.0 * PI).sqrt();
        let rhs = b - &a * &w0;
        let gram = &a * a.transpose();
        let lambda = gram.cholesky().expect("sphere moment matrix is positive definite").solve(&rhs);
        let w = w0 + a.transpose() * lambda;
        if w.iter().all(|&v| v > 0.0) {
            return SphereRule { d: 3, nodes, weights: w.iter().copied().collect(), order };
        }
        n = n * 3 / 2;
    }
}

/// Gauss–Legendre in `cos θ` times the trapezoid rule in `φ`; exact to
/// degree `order`.
pub fn sphere_rule_product(order: usize) -> SphereRule {
    let nt = order / 2 + 1;
    let np = order + 1;
    let gl = gauss_legendre(nt);
    let mut nodes = Vec::with_capacity(nt * np);
    let mut weights = Vec::with_capacity(nt * np);
    for (z, wz) in gl.0.iter().zip(gl.1.iter()) {
        let r = (1.0 - z * z).sqrt();
        for k in 0..np {
            let phi = 2.0 * PI * k as f64 / np as f64;
            nodes.push(vec![r * phi.cos(), r * phi.sin(), *z]);
            weights.push(wz * 2.0 * PI / np as f64);
        }
    }
    SphereRule { d: 3, nodes, weights, order }
}

const FIBONACCI_MAX_ORDER: usize = 30;

/// Sphere rule exact for polynomials up to `order`.
///
/// For `d = 3` the nodes are a Fibonacci spiral with minimum-norm weight
/// correction (orders above 30 fall back to the product rule). For `d = 2`
/// the rule is equispaced on the circle.
pub fn sphere_rule(d: usize, order: usize) -> Result<SphereRule, QuadError> {
    let order = order.max(1);
    match d {
        2 => {
            let n = order + 1;
            let nodes = (0..n)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect();
            Ok(SphereRule { d: 2, nodes, weights: vec![2.0 * PI / n as f64; n], order })
        }
        3 => {
            if order > FIBONACCI_MAX_ORDER {
                return Ok(sphere_rule_product(order));
            }
            static CACHE: OnceLock<Mutex<HashMap<usize, SphereRule>>> = OnceLock::new();
            let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
            if let Some(r) = cache.lock().unwrap().get(&order) {
                return Ok(r.clone());
            }
            let r = corrected_fibonacci(order);
            cache.lock().unwrap().insert(order, r.clone());
            Ok(r)
        }
        _ => Err(QuadError::UnsupportedDim(d)),
    }
}

/// Nodes and weights on `(0, r_max)` clustered around `c` at scale `w`.
#[derive(Clone, Debug)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub center: f64,
    pub width: f64,
}

impl RadialGrid {
    pub fn integrate<F: Fn(f64) -> C64>(&self, f: F) -> C64 {
        let vals: Vec<C64> = self.nodes.iter().zip(self.weights.iter()).map(|(&r, &w)| f(r) * w).collect();
        pairwise_sum(&vals)
    }
}

/// Radial grid resolving a Lorentzian of width `w` at `c`.
///
/// The middle panel uses `r = c + w sinh τ` with Gauss–Legendre in `τ`, which
/// turns the Lorentzian into `sech τ`; the remaining range is covered by
/// composite Gauss–Legendre panels. `n` controls the node count of the middle
/// panel; the background uses comparable resolution.
pub fn radial_lorentzian_grid(c: f64, w: f64, r_max: f64, n: usize) -> Result<RadialGrid, QuadError> {
    if !(0.0 < w && w < c && c < r_max) {
        return Err(QuadError::BadRadialParams { c, w, r_max });
    }
    let n = n.max(8);
    let delta = (0.5 * c).min(r_max - c);
    let t_lo = (-delta / w).asinh();
    let t_hi = (delta / w).asinh();
    let gl = gauss_legendre(n);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let half = 0.5 * (t_hi - t_lo);
    for (x, wt) in gl.0.iter().zip(gl.1.iter()) {
        let t = t_lo + half * (x + 1.0);
        nodes.push(c + w * t.sinh());
        weights.push(half * wt * w * t.cosh());
    }
    let bg = (n / 4).max(8);
    let mut push_panels = |a: f64, b: f64| {
        if b <= a {
            return;
        }
        let panels = ((b - a) / delta).ceil().max(1.0) as usize;
        let (x, ww) = composite_gl(a, b, panels, bg);
        nodes.extend(x);
        weights.extend(ww);
    };
    push_panels(0.0, c - delta);
    push_panels(c + delta, r_max);
    let mut idx: Vec<usize> = (0..nodes.len()).collect();
    idx.sort_by(|&i, &j| nodes[i].partial_cmp(&nodes[j]).unwrap());
    Ok(RadialGrid {
        nodes: idx.iter().map(|&i| nodes[i]).collect(),
        weights: idx.iter().map(|&i| weights[i]).collect(),
        center: c,
        width: w,
    })
}

/// Integral value with an error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: C64,
    pub error: f64,
}

#[derive(Clone, Copy)]
struct Interval {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Interval {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

const ADAPT_NODES: usize = 10;

fn gl_panel<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> C64 {
    let gl = gauss_legendre(ADAPT_NODES);
    let h = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = C64::new(0.0, 0.0);
    for (x, w) in gl.0.iter().zip(gl.1.iter()) {
        acc += f(mid + h * x) * *w;
    }
    acc * h
}

fn interval<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> Interval {
    let m = 0.5 * (a + b);
    let whole = gl_panel(f, a, b);
    let halves = gl_panel(f, a, m) + gl_panel(f, m, b);
    Interval { a, b, value: halves, error: (whole - halves).norm() }
}

/// Globally adaptive Gauss–Legendre bisection on `[a, b]` to absolute
/// tolerance `tol`.
pub fn adaptive_1d<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, tol: f64) -> Result<Estimate, QuadError> {
    adaptive_1d_with(f, a, b, tol, 4000)
}

pub fn adaptive_1d_with<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, tol: f64, max_intervals: usize) -> Result<Estimate, QuadError> {
    if a == b {
        return Ok(Estimate { value: C64::new(0.0, 0.0), error: 0.0 });
    }
    let mut heap = BinaryHeap::new();
    heap.push(interval(&f, a, b));
    loop {
        let total_err: f64 = heap.iter().map(|i| i.error).sum();
        if total_err <= tol {
            break;
        }
        if heap.len() >= max_intervals {
            let mut v: Vec<Interval> = heap.into_vec();
            v.sort_by(|x, y| x.a.total_cmp(&y.a));
            let value = v.iter().map(|i| i.value).sum();
            return Err(QuadError::NoConvergence { value, error: total_err, intervals: v.len() });
        }
        let worst = heap.pop().unwrap();
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            heap.push(Interval { error: 0.0, ..worst });
            continue;
        }
        heap.push(interval(&f, worst.a, m));
        heap.push(interval(&f, m, worst.b));
    }
    let mut v: Vec<Interval> = heap.into_vec();
    v.sort_by(|x, y| x.a.total_cmp(&y.a));
    let vals: Vec<C64> = v.iter().map(|i| i.value).collect();
    Ok(Estimate { value: pairwise_sum(&vals), error: v.iter().map(|i| i.error).sum() })
}

/// Adaptive integration over `[a, ∞)` via `r = a + t/(1-t)`.
pub fn adaptive_semi_infinite<F: Fn(f64) -> C64>(f: F, a: f64, tol: f64) -> Result<Estimate, QuadError> {
    adaptive_1d(
        |t| {
            if t >= 1.0 {
                return C64::new(0.0, 0.0);
            }
            let om = 1.0 - t;
            f(a + t / om) / (om * om)
        },
        0.0,
        1.0,
        tol,
    )
}

/// Fixed-order pairwise summation, independent of thread scheduling.
pub fn pairwise_sum(v: &[C64]) -> C64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Monte Carlo estimate of an integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: C64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub nan_count: u64,
}

/// Proposal distribution on `R^k`: draws a point and reports its density.
pub trait Sampler: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]);
    fn density(&self, x: &[f64]) -> f64;
}

/// Independent normals with per-coordinate means and standard deviations.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    pub mean: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl GaussianSampler {
    pub fn isotropic(mean: Vec<f64>, sigma: f64) -> Self {
        let k = mean.len();
        Self { mean, sigma: vec![sigma; k] }
    }
}

fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

impl Sampler for GaussianSampler {
    fn dim(&self) -> usize {
        self.mean.len()
    }
    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        for j in 0..self.mean.len() {
            out[j] = self.mean[j] + self.sigma[j] * std_normal(rng);
        }
    }
    fn density(&self, x: &[f64]) -> f64 {
        let mut d = 1.0;
        for j in 0..self.mean.len() {
            let z = (x[j] - self.mean[j]) / self.sigma[j];
            d *= (-0.5 * z * z).exp() / (self.sigma[j] * (2.0 * PI).sqrt());
        }
        d
    }
}

/// Uniform on an axis-aligned box.
#[derive(Clone, Debug)]
pub struct UniformBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Sampler for UniformBox {
    fn dim(&self) -> usize {
        self.lo.len()
    }
    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        for j in 0..self.lo.len() {
            out[j] = self.lo[j] + (self.hi[j] - self.lo[j]) * rng.gen::<f64>();
        }
    }
    fn density(&self, x: &[f64]) -> f64 {
        let mut vol = 1.0;
        for j in 0..self.lo.len() {
            if x[j] < self.lo[j] || x[j] > self.hi[j] {
                return 0.0;
            }
            vol *= self.hi[j] - self.lo[j];
        }
        1.0 / vol
    }
}

/// Point in `R^3` whose radius `|x - origin|` follows a Cauchy profile of
/// width `g` about `rho0` (truncated to positive radii), direction uniform.
#[derive(Clone, Debug)]
pub struct RadialCauchySampler {
    pub origin: [f64; 3],
    pub rho0: f64,
    pub g: f64,
}

impl RadialCauchySampler {
    fn norm_const(&self) -> f64 {
        PI / 2.0 - (-self.rho0 / self.g).atan()
    }

    pub fn radial_density(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        let t = rho - self.rho0;
        (self.g / (t * t + self.g * self.g)) / self.norm_const()
    }
}

impl Sampler for RadialCauchySampler {
    fn dim(&self) -> usize {
        3
    }
    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let lo = (-self.rho0 / self.g).atan();
        let u: f64 = rng.gen();
        let rho = self.rho0 + self.g * (lo + u * (PI / 2.0 - lo)).tan();
        let z: f64 = 2.0 * rng.gen::<f64>() - 1.0;
        let ph: f64 = 2.0 * PI * rng.gen::<f64>();
        let r = (1.0 - z * z).max(0.0).sqrt();
        out[0] = self.origin[0] + rho * r * ph.cos();
        out[1] = self.origin[1] + rho * r * ph.sin();
        out[2] = self.origin[2] + rho * z;
    }
    fn density(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = (0..3).map(|j| x[j] - self.origin[j]).collect();
        let rho = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if rho == 0.0 {
            return 0.0;
        }
        self.radial_density(rho) / (4.0 * PI * rho * rho)
    }
}

/// Finite mixture of proposals over the same space.
pub struct MixtureSampler {
    pub components: Vec<(f64, Box<dyn Sampler>)>,
}

impl Sampler for MixtureSampler {
    fn dim(&self) -> usize {
        self.components[0].1.dim()
    }
    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let total: f64 = self.components.iter().map(|c| c.0).sum();
        let mut u = rng.gen::<f64>() * total;
        for (w, c) in &self.components {
            if u < *w {
                c.sample(rng, out);
                return;
            }
            u -= w;
        }
        self.components.last().unwrap().1.sample(rng, out);
    }
    fn density(&self, x: &[f64]) -> f64 {
        let total: f64 = self.components.iter().map(|c| c.0).sum();
        self.components.iter().map(|(w, c)| w * c.density(x)).sum::<f64>() / total
    }
}

/// Independent blocks concatenated into one vector.
pub struct ProductSampler {
    pub blocks: Vec<Box<dyn Sampler>>,
}

impl Sampler for ProductSampler {
    fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }
    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let mut off = 0;
        for b in &self.blocks {
            let k = b.dim();
            b.sample(rng, &mut out[off..off + k]);
            off += k;
        }
    }
    fn density(&self, x: &[f64]) -> f64 {
        let mut off = 0;
        let mut d = 1.0;
        for b in &self.blocks {
            let k = b.dim();
            d *= b.density(&x[off..off + k]);
            off += k;
        }
        d
    }
}

const MC_BATCH: u64 = 4096;

#[derive(Clone, Copy, Default)]
struct Moments {
    sum: C64,
    sum_sq: f64,
    n: u64,
    nan: u64,
}

fn merge(a: Moments, b: Moments) -> Moments {
    Moments { sum: a.sum + b.sum, sum_sq: a.sum_sq + b.sum_sq, n: a.n + b.n, nan: a.nan + b.nan }
}

fn pairwise_merge(v: &[Moments]) -> Moments {
    match v.len() {
        0 => Moments::default(),
        1 => v[0],
        _ => {
            let m = v.len() / 2;
            merge(pairwise_merge(&v[..m]), pairwise_merge(&v[m..]))
        }
    }
}

/// Importance-sampled estimate of `∫ f`. Batch `b` draws from a ChaCha
/// stream keyed by `(seed, b)`; batch results are merged in a fixed tree, so
/// the result is bit-identical for any worker count.
pub fn mc_integrate<F, S>(f: F, sampler: &S, n: u64, seed: u64) -> McEstimate
where
    F: Fn(&[f64]) -> C64 + Sync,
    S: Sampler + ?Sized,
{
    let batches = n.div_ceil(MC_BATCH);
    let k = sampler.dim();
    let parts: Vec<Moments> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b + 1);
            let count = MC_BATCH.min(n - b * MC_BATCH);
            let mut x = vec![0.0; k];
            let mut m = Moments::default();
            for _ in 0..count {
                sampler.sample(&mut rng, &mut x);
                let p = sampler.density(&x);
                let v = if p > 0.0 { f(&x) / p } else { C64::new(0.0, 0.0) };
                if !(v.re.is_finite() && v.im.is_finite()) {
                    m.nan += 1;
                    continue;
                }
                m.sum += v;
                m.sum_sq += v.norm_sqr();
                m.n += 1;
            }
            m
        })
        .collect();
    let m = pairwise_merge(&parts);
    if m.n == 0 {
        return McEstimate { value: C64::new(0.0, 0.0), stderr: 0.0, n_samples: 0, seed, nan_count: m.nan };
    }
    let nf = m.n as f64;
    let mean = m.sum / nf;
    let var = if m.n > 1 { ((m.sum_sq - nf * mean.norm_sqr()) / (nf - 1.0)).max(0.0) } else { 0.0 };
    McEstimate { value: mean, stderr: (var / nf).sqrt(), n_samples: m.n, seed, nan_count: m.nan }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_gamma(k: usize) -> f64 {
        // Γ(k/2)
        if k % 2 == 0 {
            (1..k / 2).map(|v| v as f64).product()
        } else {
            let mut g = PI.sqrt();
            let mut a = 0.5;
            while a < k as f64 / 2.0 - 0.25 {
                g *= a;
                a += 1.0;
            }
            g
        }
    }

    fn sphere_monomial(a: usize, b: usize, c: usize) -> f64 {
        if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
            return 0.0;
        }
        2.0 * half_gamma(a + 1) * half_gamma(b + 1) * half_gamma(c + 1) / half_gamma(a + b + c + 3)
    }

    #[test]
    fn gauss_rules_basic() {
        let gl = gauss_legendre(12);
        let s: f64 = gl.0.iter().zip(gl.1.iter()).map(|(x, w)| w * x.powi(22)).sum();
        assert!((s - 2.0 / 23.0).abs() < 1e-14);
        let gh = gauss_hermite(20);
        let m: f64 = gh.0.iter().zip(gh.1.iter()).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m - 0.75 * PI.sqrt()).abs() < 1e-12);
        assert!(gh.0.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sphere_rule_exactness_and_area() {
        for order in [1usize, 4, 9, 16] {
            let r = sphere_rule(3, order).unwrap();
            let area: f64 = r.weights.iter().sum();
            assert!((area - 4.0 * PI).abs() < 1e-10);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for a in 0..=order {
                for b in 0..=(order - a) {
                    for c in 0..=(order - a - b) {
                        let v = r.integrate(|x| C64::new(x[0].powi(a as i32) * x[1].powi(b as i32) * x[2].powi(c as i32), 0.0));
                        assert!((v.re - sphere_monomial(a, b, c)).abs() < 1e-10, "order {order}: {a},{b},{c}");
                    }
                }
            }
        }
        let r = sphere_rule(3, 2).unwrap();
        let v = r.integrate(|x| C64::new(x[0] * x[0], 0.0));
        assert!((v.re - 4.0 * PI / 3.0).abs() < 1e-10);
        assert!(r.integrate(|x| C64::new(x[0], 0.0)).norm() < 1e-12);
        let p = sphere_rule_product(40);
        let v = p.integrate(|x| C64::new(x[2].powi(40), 0.0));
        assert!((v.re - 4.0 * PI / 41.0).abs() < 1e-12);
        let c = sphere_rule(2, 6).unwrap();
        assert!((c.weights.iter().sum::<f64>() - 2.0 * PI).abs() < 1e-12);
        let v = c.integrate(|x| C64::new(x[0].powi(6), 0.0));
        assert!((v.re - 2.0 * PI * 5.0 / 16.0).abs() < 1e-12);
        assert!(matches!(sphere_rule(4, 3), Err(QuadError::UnsupportedDim(4))));
    }

    #[test]
    fn dense_random_rule_agrees_on_second_moment() {
        let s = UniformBox { lo: vec![-1.0, 0.0], hi: vec![1.0, 2.0 * PI] };
        let est = mc_integrate(
            |x| {
                let z = x[0];
                let r = (1.0 - z * z).sqrt();
                C64::new((r * x[1].cos()).powi(2), 0.0)
            },
            &s,
            400_000,
            7,
        );
        assert!((est.value.re - 4.0 * PI / 3.0).abs() < 4.0 * est.stderr);
    }

    #[test]
    fn lorentzian_grid_resolves_width() {
        let (c, w) = (1.0, 1e-4);
        let exact = |r_max: f64| ((r_max - c) / w).atan() + (c / w).atan();
        let mut prev = f64::INFINITY;
        for n in [16usize, 32, 64, 128] {
            let g = radial_lorentzian_grid(c, w, 10.0, n).unwrap();
            let v = g.integrate(|r| C64::new(w / ((r - c).powi(2) + w * w), 0.0)).re;
            let err = (v - exact(10.0)).abs();
            assert!(err <= prev * 1.0001 + 1e-15);
            prev = err;
        }
        assert!(prev / PI < 1e-6);
        let g = radial_lorentzian_grid(c, w, 10.0, 64).unwrap();
        let smooth = g.integrate(|r| C64::new((-r * r).exp() * r * r, 0.0)).re;
        let oracle = adaptive_1d(|r| C64::new((-r * r).exp() * r * r, 0.0), 0.0, 10.0, 1e-13).unwrap();
        assert!((smooth - oracle.value.re).abs() < 1e-8);
        assert!(radial_lorentzian_grid(1.0, 2.0, 10.0, 8).is_err());
    }

    #[test]
    fn adaptive_examples() {
        let v = adaptive_1d(|x| C64::new(x * x, 0.0), 0.0, 1.0, 1e-12).unwrap();
        assert!((v.value.re - 1.0 / 3.0).abs() < 1e-12);
        let v = adaptive_1d(|x| C64::new(x.sin(), 0.0), 0.0, PI, 1e-12).unwrap();
        assert!((v.value.re - 2.0).abs() < 1e-12);
        let v = adaptive_1d(|x| C64::from_polar(1.0, 50.0 * x), 0.0, 1.0, 1e-12).unwrap();
        let exact = (C64::from_polar(1.0, 50.0) - 1.0) / C64::new(0.0, 50.0);
        assert!((v.value - exact).norm() < 1e-12);
        let e = adaptive_1d_with(|x| C64::new(1.0 / x.abs().sqrt().max(1e-300), 0.0), -1.0, 1.0, 1e-14, 20);
        assert!(matches!(e, Err(QuadError::NoConvergence { .. })));
        let v = adaptive_semi_infinite(|x| C64::new((-x).exp(), 0.0), 0.0, 1e-12).unwrap();
        assert!((v.value.re - 1.0).abs() < 1e-11);
    }

    #[test]
    fn monte_carlo_contract() {
        let g = GaussianSampler::isotropic(vec![0.0; 6], 1.0);
        let e = mc_integrate(|x| C64::new(g.density(x), 0.0), &g, 10_000, 3);
        assert!((e.value.re - 1.0).abs() < 1e-12 && e.stderr < 1e-12);
        let z = mc_integrate(|_| C64::new(0.0, 0.0), &g, 10_000, 3);
        assert_eq!(z.value, C64::new(0.0, 0.0));
        // ∫ |x|² e^{-|x|²/2} over R^6 = 6 (2π)^3.
        let wide = GaussianSampler::isotropic(vec![0.0; 6], 1.3);
        let e = mc_integrate(
            |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                C64::new(r2 * (-0.5 * r2).exp(), 0.0)
            },
            &wide,
            200_000,
            11,
        );
        let exact = 6.0 * (2.0 * PI).powi(3);
        assert!((e.value.re - exact).abs() < 3.0 * e.stderr, "{} ± {}", e.value.re, e.stderr);
        let again = mc_integrate(
            |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                C64::new(r2 * (-0.5 * r2).exp(), 0.0)
            },
            &wide,
            200_000,
            11,
        );
        assert_eq!(e.value.re.to_bits(), again.value.re.to_bits());
        assert_eq!(e.stderr.to_bits(), again.stderr.to_bits());
    }

    #[test]
    fn radial_cauchy_density_normalizes() {
        let s = RadialCauchySampler { origin: [0.0; 3], rho0: 1.0, g: 0.05 };
        let v = adaptive_1d(|r| C64::new(s.radial_density(r), 0.0), 0.0, 1e4, 1e-10).unwrap();
        let tail = 0.05 / (1e4 - 1.0) / s.norm_const();
        assert!((v.value.re + tail - 1.0).abs() < 1e-6);
        let e = mc_integrate(|x| C64::new(s.density(x), 0.0), &s, 5000, 1);
        assert!((e.value.re - 1.0).abs() < 1e-12);
    }
}
