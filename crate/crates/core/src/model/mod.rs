//! Gaussian field algebra, Fourier conventions and scenario definition.
//!
//! A [`GaussianAtom`] is `P(x) · A · exp(-s|x-m|²/2) · exp(i k₀·x)` with `P` a
//! polynomial (constant `1` unless derivatives or moments were taken). Finite
//! sums of atoms form a [`FieldExpr`]; every operation below is exact.

mod poly;
mod scenario;

pub use poly::{Exps, Poly, MAX_DIM, NVARS};
pub use scenario::{AtomConfig, Hypothesis, Scenario, ScenarioConfig, ValidationReport, Violation};

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Forward transform `û(ξ) = (2π)^{-d} ∫ e^{-ix·ξ} u(x) dx`, inverse
/// `u(x) = ∫ e^{ix·ξ} û(ξ) dξ`.
#[derive(Clone, Copy, Debug, Default)]
pub struct FourierConvention;

impl FourierConvention {
    pub fn forward_factor(d: usize) -> f64 {
        (2.0 * PI).powi(-(d as i32))
    }

    /// `∫ u v̄ dx = parseval_factor(d) · ∫ û conj(v̂) dξ`.
    pub fn parseval_factor(d: usize) -> f64 {
        (2.0 * PI).powi(d as i32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianAtom {
    pub amplitude: C64,
    pub center: Vec<f64>,
    pub inv_variance: f64,
    pub modulation: Vec<f64>,
    pub poly: Poly,
}

impl GaussianAtom {
    pub fn new(amplitude: C64, center: Vec<f64>, inv_variance: f64, modulation: Vec<f64>) -> Self {
        assert_eq!(center.len(), modulation.len(), "center/modulation dimension mismatch");
        assert!(center.len() <= MAX_DIM && !center.is_empty(), "dimension must be 1..=3");
        assert!(inv_variance > 0.0, "inverse variance must be positive");
        Self { amplitude, center, inv_variance, modulation, poly: Poly::one() }
    }

    /// Unmodulated atom `A exp(-s|x-m|²/2)`.
    pub fn plain(amplitude: f64, center: Vec<f64>, inv_variance: f64) -> Self {
        let d = center.len();
        Self::new(C64::new(amplitude, 0.0), center, inv_variance, vec![0.0; d])
    }

    pub fn with_poly(mut self, poly: Poly) -> Self {
        self.poly = poly;
        self
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// The Gaussian part without the polynomial factor.
    pub fn envelope(&self, x: &[f64]) -> C64 {
        let mut r2 = 0.0;
        let mut ph = 0.0;
        for j in 0..self.dim() {
            let dx = x[j] - self.center[j];
            r2 += dx * dx;
            ph += self.modulation[j] * x[j];
        }
        self.amplitude * C64::from_polar((-0.5 * self.inv_variance * r2).exp(), ph)
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        let e = self.envelope(x);
        if self.poly.is_one() {
            e
        } else {
            e * self.poly.eval(x)
        }
    }

    /// Exact Fourier transform under [`FourierConvention`].
    pub fn fourier_transform(&self) -> GaussianAtom {
        let d = self.dim();
        let s = self.inv_variance;
        let mk: f64 = (0..d).map(|j| self.center[j] * self.modulation[j]).sum();
        let amp = self.amplitude
            * FourierConvention::forward_factor(d)
            * (2.0 * PI / s).powf(d as f64 / 2.0)
            * C64::from_polar(1.0, mk);
        let base = GaussianAtom {
            amplitude: amp,
            center: self.modulation.clone(),
            inv_variance: 1.0 / s,
            modulation: self.center.iter().map(|m| -m).collect(),
            poly: Poly::one(),
        };
        if self.poly.is_one() {
            return base;
        }
        // x_j ↦ i ∂_{ξ_j} acting on Q(ξ)·base: Q ↦ i(∂_j Q + L_j Q),
        // L_j = -(ξ_j - k₀_j)/s - i m_j.
        let i = C64::i();
        let lin: Vec<Poly> = (0..d)
            .map(|j| {
                let mut a = vec![C64::new(0.0, 0.0); d];
                a[j] = C64::new(-1.0 / s, 0.0);
                Poly::linear(C64::new(self.modulation[j] / s, -self.center[j]), &a)
            })
            .collect();
        let mut q = Poly::zero();
        for &(e, c) in &self.poly.terms {
            let mut m = Poly::constant(c);
            for j in 0..d {
                for _ in 0..e[j] {
                    m = m.deriv(j).add(&m.mul(&lin[j])).scale(i);
                }
            }
            q = q.add(&m);
        }
        base.with_poly(q)
    }

    /// `x ↦ f(x - q)`.
    pub fn shift(&self, q: &[f64]) -> GaussianAtom {
        let d = self.dim();
        let kq: f64 = (0..d).map(|j| self.modulation[j] * q[j]).sum();
        let neg: Vec<f64> = q.iter().map(|v| -v).collect();
        GaussianAtom {
            amplitude: self.amplitude * C64::from_polar(1.0, -kq),
            center: (0..d).map(|j| self.center[j] + q[j]).collect(),
            inv_variance: self.inv_variance,
            modulation: self.modulation.clone(),
            poly: self.poly.affine(1.0, &neg),
        }
    }

    /// `x ↦ c · f(a x)` for `a > 0`.
    pub fn dilate(&self, a: f64, c: f64) -> GaussianAtom {
        GaussianAtom {
            amplitude: self.amplitude * c,
            center: self.center.iter().map(|m| m / a).collect(),
            inv_variance: self.inv_variance * a * a,
            modulation: self.modulation.iter().map(|k| k * a).collect(),
            poly: self.poly.affine(a, &[]),
        }
    }

    pub fn conj(&self) -> GaussianAtom {
        GaussianAtom {
            amplitude: self.amplitude.conj(),
            center: self.center.clone(),
            inv_variance: self.inv_variance,
            modulation: self.modulation.iter().map(|k| -k).collect(),
            poly: self.poly.conj(),
        }
    }

    /// `x ↦ f(-x)`.
    pub fn reflect(&self) -> GaussianAtom {
        GaussianAtom {
            amplitude: self.amplitude,
            center: self.center.iter().map(|m| -m).collect(),
            inv_variance: self.inv_variance,
            modulation: self.modulation.iter().map(|k| -k).collect(),
            poly: self.poly.affine(-1.0, &[]),
        }
    }

    pub fn mul(&self, other: &GaussianAtom) -> GaussianAtom {
        let d = self.dim();
        let (s1, s2) = (self.inv_variance, other.inv_variance);
        let s = s1 + s2;
        let mut dist2 = 0.0;
        for j in 0..d {
            let dm = self.center[j] - other.center[j];
            dist2 += dm * dm;
        }
        GaussianAtom {
            amplitude: self.amplitude * other.amplitude * (-0.5 * s1 * s2 * dist2 / s).exp(),
            center: (0..d).map(|j| (s1 * self.center[j] + s2 * other.center[j]) / s).collect(),
            inv_variance: s,
            modulation: (0..d).map(|j| self.modulation[j] + other.modulation[j]).collect(),
            poly: self.poly.mul(&other.poly),
        }
    }

    /// `∂_j` of the atom.
    pub fn deriv(&self, j: usize) -> GaussianAtom {
        let s = self.inv_variance;
        let mut a = vec![C64::new(0.0, 0.0); self.dim()];
        a[j] = C64::new(-s, 0.0);
        let lin = Poly::linear(C64::new(s * self.center[j], self.modulation[j]), &a);
        let poly = self.poly.deriv(j).add(&self.poly.mul(&lin));
        GaussianAtom { poly, ..self.clone() }
    }

    pub fn scale(&self, c: C64) -> GaussianAtom {
        GaussianAtom { amplitude: self.amplitude * c, ..self.clone() }
    }

    /// Multiplies by `exp(i k·x)`.
    pub fn modulate(&self, k: &[f64]) -> GaussianAtom {
        let modulation = (0..self.dim()).map(|j| self.modulation[j] + k[j]).collect();
        GaussianAtom { modulation, ..self.clone() }
    }

    /// `∫ f dx`, exact.
    pub fn integral(&self) -> C64 {
        let d = self.dim();
        FourierConvention::parseval_factor(d) * self.fourier_transform().eval(&vec![0.0; d])
    }
}

/// Finite sum of Gaussian atoms in dimension `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldExpr {
    pub dim: usize,
    pub atoms: Vec<GaussianAtom>,
}

impl FieldExpr {
    pub fn zero(dim: usize) -> Self {
        Self { dim, atoms: Vec::new() }
    }

    pub fn from_atoms(dim: usize, atoms: Vec<GaussianAtom>) -> Self {
        for a in &atoms {
            assert_eq!(a.dim(), dim, "atom dimension mismatch");
        }
        let atoms = atoms.into_iter().filter(|a| a.amplitude != C64::new(0.0, 0.0) && !a.poly.is_zero()).collect();
        Self { dim, atoms }
    }

    pub fn atom(a: GaussianAtom) -> Self {
        Self::from_atoms(a.dim(), vec![a])
    }

    /// Unit Gaussian `exp(-|x-m|²/2)`.
    pub fn unit_gaussian(center: Vec<f64>) -> Self {
        Self::atom(GaussianAtom::plain(1.0, center, 1.0))
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        self.atoms.iter().map(|a| a.eval(x)).sum()
    }

    pub fn fourier_transform(&self) -> FieldExpr {
        Self::from_atoms(self.dim, self.atoms.iter().map(|a| a.fourier_transform()).collect())
    }

    pub fn add(&self, other: &FieldExpr) -> FieldExpr {
        assert_eq!(self.dim, other.dim);
        Self::from_atoms(self.dim, self.atoms.iter().chain(other.atoms.iter()).cloned().collect())
    }

    pub fn scale(&self, c: C64) -> FieldExpr {
        Self::from_atoms(self.dim, self.atoms.iter().map(|a| a.scale(c)).collect())
    }

    pub fn mul(&self, other: &FieldExpr) -> FieldExpr {
        assert_eq!(self.dim, other.dim);
        let mut atoms = Vec::with_capacity(self.atoms.len() * other.atoms.len());
        for a in &self.atoms {
            for b in &other.atoms {
                atoms.push(a.mul(b));
            }
        }
        Self::from_atoms(self.dim, atoms)
    }

    pub fn modulate(&self, k: &[f64]) -> FieldExpr {
        Self::from_atoms(self.dim, self.atoms.iter().map(|a| a.modulate(k)).collect())
    }

    pub fn shift(&self, q: &[f64]) -> FieldExpr {
        Self::from_atoms(self.dim, self.atoms.iter().map(|a| a.shift(q)).collect())
    }

    pub fn dilate(&self, a: f64, c: f64) -> FieldExpr {
        Self::from_atoms(self.dim, self.atoms.iter().map(|t| t.dilate(a, c)).collect())
    }

    pub fn conj(&self) -> FieldExpr {
        Self::from_atoms(self.dim, self.atoms.iter().map(|a| a.conj()).collect())
    }

    pub fn reflect(&self) -> FieldExpr {
        Self::from_atoms(self.dim, self.atoms.iter().map(|a| a.reflect()).collect())
    }

    pub fn deriv(&self, j: usize) -> FieldExpr {
        Self::from_atoms(self.dim, self.atoms.iter().map(|a| a.deriv(j)).collect())
    }

    /// Multiplies by the coordinate `x_j`.
    pub fn times_coord(&self, j: usize) -> FieldExpr {
        Self::from_atoms(
            self.dim,
            self.atoms.iter().map(|a| GaussianAtom { poly: a.poly.mul(&Poly::var(j)), ..a.clone() }).collect(),
        )
    }

    pub fn integral(&self) -> C64 {
        self.atoms.iter().map(|a| a.integral()).sum()
    }

    /// Common center if the field is radial about it.
    pub fn radial_center(&self) -> Option<Vec<f64>> {
        let first = self.atoms.first()?;
        let radial = self.atoms.iter().all(|a| {
            a.center == first.center && a.modulation.iter().all(|&k| k == 0.0) && a.poly.degree() == 0
        });
        radial.then(|| first.center.clone())
    }

    /// Smallest inverse variance over atoms (the widest Gaussian).
    pub fn min_inv_variance(&self) -> f64 {
        self.atoms.iter().map(|a| a.inv_variance).fold(f64::INFINITY, f64::min)
    }

    /// Radius beyond which every atom envelope is below `tol` relative to its
    /// peak (polynomial factors ignored).
    pub fn support_radius(&self, tol: f64) -> f64 {
        let k = (-2.0 * tol.ln()).sqrt();
        self.atoms
            .iter()
            .map(|a| a.center.iter().map(|c| c * c).sum::<f64>().sqrt() + k / a.inv_variance.sqrt())
            .fold(0.0, f64::max)
    }
}

/// `x ↦ f(x)` returned as `ε^{-d} f((x - q)/ε)`.
pub fn scale_concentrate(f: &FieldExpr, eps: f64, q: &[f64]) -> FieldExpr {
    assert!(eps > 0.0, "eps must be positive");
    let d = f.dim;
    f.dilate(1.0 / eps, eps.powi(-(d as i32))).shift(q)
}

pub fn fourier_transform(f: &FieldExpr) -> FieldExpr {
    f.fourier_transform()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn unit_gaussian_transform_at_origin() {
        let s = FieldExpr::unit_gaussian(vec![0.0; 3]);
        let v = s.fourier_transform().eval(&[0.0; 3]);
        assert!((v.re - (2.0 * PI).powf(-1.5)).abs() < 1e-15);
        assert!((v.re - 0.063494).abs() < 1e-6);
    }

    #[test]
    fn shift_theorem() {
        let s = FieldExpr::unit_gaussian(vec![0.0; 3]);
        let m = [0.3, -1.0, 2.0];
        let xi = [0.7, 0.1, -0.4];
        let lhs = s.shift(&m).fourier_transform().eval(&xi);
        let ph: f64 = m.iter().zip(xi.iter()).map(|(a, b)| a * b).sum();
        let rhs = C64::from_polar(1.0, -ph) * s.fourier_transform().eval(&xi);
        assert!(close(lhs, rhs, 1e-14));
    }

    // Tensor Gauss–Hermite-free oracle: midpoint rule on a box, which is
    // spectrally accurate for Gaussians.
    fn ft_oracle(f: &FieldExpr, xi: &[f64], half: f64, n: usize) -> C64 {
        let h = 2.0 * half / n as f64;
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let x = [-half + (a as f64 + 0.5) * h, -half + (b as f64 + 0.5) * h, -half + (c as f64 + 0.5) * h];
                    let ph = -(x[0] * xi[0] + x[1] * xi[1] + x[2] * xi[2]);
                    acc += f.eval(&x) * C64::from_polar(1.0, ph);
                }
            }
        }
        acc * h.powi(3) * FourierConvention::forward_factor(3)
    }

    #[test]
    fn transform_matches_quadrature_oracle() {
        let f = FieldExpr::from_atoms(
            3,
            vec![
                GaussianAtom::new(C64::new(0.8, 0.3), vec![0.2, -0.1, 0.4], 1.5, vec![0.5, 0.0, -0.3]),
                GaussianAtom::plain(1.0, vec![0.0, 0.3, 0.0], 2.0).with_poly(Poly::var(0).mul(&Poly::var(1))),
            ],
        );
        let ft = f.fourier_transform();
        let pts = [
            [0.1, 0.2, 0.3],
            [-0.5, 0.4, 0.0],
            [1.0, -1.0, 0.5],
            [0.0, 0.0, 0.0],
            [0.3, 0.9, -0.7],
            [-1.2, 0.2, 0.1],
            [0.6, 0.6, 0.6],
            [2.0, 0.0, -0.2],
            [-0.4, -0.8, 1.1],
            [0.05, -1.5, 0.25],
        ];
        for xi in pts {
            let o = ft_oracle(&f, &xi, 9.0, 72);
            assert!(close(ft.eval(&xi), o, 1e-10), "xi={xi:?}: {} vs {o}", ft.eval(&xi));
        }
    }

    #[test]
    fn scale_concentrate_transform() {
        let s1 = FieldExpr::from_atoms(3, vec![GaussianAtom::new(C64::new(1.0, 0.5), vec![0.1, 0.0, 0.0], 1.2, vec![0.0, 0.4, 0.0])]);
        let q1 = [2.0, 0.0, 0.0];
        let eps = 0.1;
        let c = scale_concentrate(&s1, eps, &q1);
        let ft1 = s1.fourier_transform();
        for xi in [[1.0, 2.0, -1.0], [0.0, 0.0, 0.0], [-3.0, 0.5, 4.0]] {
            let lhs = c.fourier_transform().eval(&xi);
            let sc: Vec<f64> = xi.iter().map(|v| v * eps).collect();
            let rhs = C64::from_polar(1.0, -(q1[0] * xi[0])) * ft1.eval(&sc);
            assert!(close(lhs, rhs, 1e-12));
        }
        let small = scale_concentrate(&s1, 0.5, &[0.5, 0.5, 0.5]);
        let o = ft_oracle(&small, &[0.7, -0.2, 0.3], 6.0, 72);
        assert!(close(small.fourier_transform().eval(&[0.7, -0.2, 0.3]), o, 1e-10));
        let id = scale_concentrate(&s1, 1.0, &[0.0; 3]);
        assert!(close(id.eval(&[0.3, 0.2, 0.1]), s1.eval(&[0.3, 0.2, 0.1]), 1e-15));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let f = GaussianAtom::new(C64::new(0.7, -0.2), vec![0.3, 0.1, -0.2], 1.7, vec![1.1, -0.4, 0.2]);
        let x = [0.4, -0.3, 0.5];
        let h = 1e-5;
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * h);
            assert!(close(f.deriv(j).eval(&x), fd, 1e-8));
        }
    }

    fn atom_strategy() -> impl Strategy<Value = GaussianAtom> {
        (
            -1.0..1.0f64,
            -1.0..1.0f64,
            prop::array::uniform3(-1.5..1.5f64),
            0.3..3.0f64,
            prop::array::uniform3(-2.0..2.0f64),
            0..3usize,
        )
            .prop_map(|(ar, ai, c, s, k, p)| {
                let a = GaussianAtom::new(C64::new(ar, ai), c.to_vec(), s, k.to_vec());
                match p {
                    0 => a,
                    1 => a.with_poly(Poly::var(1)),
                    _ => a.with_poly(Poly::var(0).mul(&Poly::var(2)).add(&Poly::one())),
                }
            })
    }

    proptest! {
        #[test]
        fn double_transform_is_scaled_reflection(a in atom_strategy(), x in prop::array::uniform3(-1.0..1.0f64)) {
            let f = FieldExpr::atom(a);
            let ff = f.fourier_transform().fourier_transform();
            let lhs = ff.eval(&x);
            let rhs = f.reflect().eval(&x) * FourierConvention::forward_factor(3);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
            let neg = [-x[0], -x[1], -x[2]];
            prop_assert!((f.reflect().eval(&x) - f.eval(&neg)).norm() < 1e-14);
        }

        #[test]
        fn transform_is_linear(a in atom_strategy(), b in atom_strategy(), c in -2.0..2.0f64, xi in prop::array::uniform3(-2.0..2.0f64)) {
            let f = FieldExpr::atom(a);
            let g = FieldExpr::atom(b);
            let lhs = f.scale(C64::new(c, 0.0)).add(&g).fourier_transform().eval(&xi);
            let rhs = f.fourier_transform().eval(&xi) * c + g.fourier_transform().eval(&xi);
            prop_assert!((lhs - rhs).norm() <= 1e-13 * (1.0 + rhs.norm()));
        }

        #[test]
        fn concentration_preserves_mass(a in atom_strategy(), eps in 0.01..2.0f64, q in prop::array::uniform3(-3.0..3.0f64)) {
            let f = FieldExpr::atom(a);
            let m0 = f.fourier_transform().eval(&[0.0; 3]);
            let m = scale_concentrate(&f, eps, &q).fourier_transform().eval(&[0.0; 3]);
            prop_assert!((m - m0).norm() <= 1e-12 * (1.0 + m0.norm()));
        }

        #[test]
        fn product_and_shift_are_pointwise(a in atom_strategy(), b in atom_strategy(), q in prop::array::uniform3(-1.0..1.0f64), x in prop::array::uniform3(-1.0..1.0f64)) {
            let pa = a.mul(&b).eval(&x);
            prop_assert!((pa - a.eval(&x) * b.eval(&x)).norm() <= 1e-12 * (1.0 + pa.norm()));
            let xs = [x[0] - q[0], x[1] - q[1], x[2] - q[2]];
            prop_assert!((a.shift(&q).eval(&x) - a.eval(&xs)).norm() <= 1e-12);
        }
    }
}
