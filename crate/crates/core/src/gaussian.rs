//! Closed-form integration of complex Gaussian forms with polynomial
//! prefactors, optionally divided by a Helmholtz symbol `k² - |ξ|²`.
//!
//! A [`QuadForm`] is `P(x) exp(-a|x|²/2 + b·x + c)` in one vector variable;
//! a [`JointForm`] is the two-variable analogue in `(p, q)` with polynomial
//! slots `0..3` for `p` and `3..6` for `q`.

use crate::model::{FieldExpr, GaussianAtom, Poly, MAX_DIM, NVARS};
use crate::special::{upper_root, GaussResolvent};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClosedFormError {
    #[error("resolvent integrals are implemented for d = 3 only (got d = {0})")]
    ResolventDim(usize),
    #[error("polynomial degree {0} exceeds 2 in a resolvent integral")]
    PolyDegree(u32),
    #[error("both factors carry a resolvent")]
    TwoResolvents,
    #[error("quadratic form is not integrable (Re a = {0})")]
    NotIntegrable(f64),
}

/// Denominator `k² - |ξ|²`. `limit_sign` resolves `k²` on the positive real
/// axis (`-1` for `k² - i0`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resolvent {
    pub k2: C64,
    pub limit_sign: f64,
}

impl Resolvent {
    pub fn new(k2: C64, limit_sign: f64) -> Self {
        Self { k2, limit_sign }
    }

    /// The complex-conjugate symbol `conj(k²) - |ξ|²`.
    pub fn conj(&self) -> Self {
        Self { k2: self.k2.conj(), limit_sign: -self.limit_sign }
    }

    pub fn symbol(&self, xi2: f64) -> C64 {
        self.k2 - xi2
    }
}

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

fn double_factorial_odd(k: u32) -> f64 {
    // (k-1)!! for even k
    let mut r = 1.0;
    let mut j = k as i64 - 1;
    while j > 1 {
        r *= j as f64;
        j -= 2;
    }
    r
}

fn binom(n: u32, k: u32) -> f64 {
    let mut r = 1.0;
    for j in 0..k {
        r = r * (n - j) as f64 / (j + 1) as f64;
    }
    r
}

/// Expectation of `P` over the listed slots when each slot variable is
/// `mean[j] + z` with `z` a centred Gaussian of variance `var`. Remaining
/// slots are left untouched.
fn expect_shifted(poly: &Poly, slots: &[usize], mean: &[Poly], var: C64) -> Poly {
    let mut out = Poly::zero();
    for &(e, c) in &poly.terms {
        let mut keep = [0u8; NVARS];
        let mut m = Poly::constant(c);
        for (j, &ej) in e.iter().enumerate() {
            if let Some(pos) = slots.iter().position(|&s| s == j) {
                if ej == 0 {
                    continue;
                }
                let mut f = Poly::zero();
                let mut k = 0u32;
                while k <= ej as u32 {
                    let w = binom(ej as u32, k) * double_factorial_odd(k);
                    let mut t = Poly::constant(var.powu(k / 2) * w);
                    for _ in 0..(ej as u32 - k) {
                        t = t.mul(&mean[pos]);
                    }
                    f = f.add(&t);
                    k += 2;
                }
                m = m.mul(&f);
            } else {
                keep[j] = ej;
            }
        }
        if keep != [0; NVARS] {
            m = m.mul(&Poly { terms: vec![(keep, C64::new(1.0, 0.0))] });
        }
        out = out.add(&m);
    }
    out
}

/// `P(x) exp(-a|x|²/2 + b·x + c)` on `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadForm {
    pub d: usize,
    pub a: C64,
    pub b: [C64; MAX_DIM],
    pub c: C64,
    pub poly: Poly,
}

impl QuadForm {
    pub fn from_atom(atom: &GaussianAtom) -> Self {
        let d = atom.dim();
        let s = atom.inv_variance;
        let mut b = [ZERO; MAX_DIM];
        let mut m2 = 0.0;
        for j in 0..d {
            b[j] = C64::new(s * atom.center[j], atom.modulation[j]);
            m2 += atom.center[j] * atom.center[j];
        }
        Self { d, a: C64::new(s, 0.0), b, c: atom.amplitude.ln() - 0.5 * s * m2, poly: atom.poly.clone() }
    }

    pub fn mul_atom(&self, atom: &GaussianAtom) -> Self {
        let o = Self::from_atom(atom);
        let mut b = self.b;
        for j in 0..self.d {
            b[j] += o.b[j];
        }
        Self { d: self.d, a: self.a + o.a, b, c: self.c + o.c, poly: self.poly.mul(&o.poly) }
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        let mut e = self.c;
        for j in 0..self.d {
            e += -0.5 * self.a * x[j] * x[j] + self.b[j] * x[j];
        }
        e.exp() * self.poly.eval(x)
    }

    fn bb(&self) -> C64 {
        (0..self.d).map(|j| self.b[j] * self.b[j]).sum()
    }

    /// `∫_{R^d} P(x) exp(-a|x|²/2 + b·x + c) dx`.
    pub fn integrate(&self) -> Result<C64, ClosedFormError> {
        if !(self.a.re > 0.0) {
            return Err(ClosedFormError::NotIntegrable(self.a.re));
        }
        let d = self.d;
        let mean: Vec<Poly> = (0..d).map(|j| Poly::constant(self.b[j] / self.a)).collect();
        let slots: Vec<usize> = (0..d).collect();
        let moment = expect_shifted(&self.poly, &slots, &mean, 1.0 / self.a).constant_term().unwrap_or(ZERO);
        let pref = (2.0 * PI / self.a).powf(d as f64 / 2.0);
        Ok(pref * (self.bb() / (2.0 * self.a) + self.c).exp() * moment)
    }

    /// `∫_{R^3} P(x) exp(-a|x|²/2 + b·x + c) / (k² - |x|²) dx`, for `P` of
    /// degree at most 2.
    pub fn integrate_resolvent(&self, r: Resolvent) -> Result<C64, ClosedFormError> {
        if self.d != 3 {
            return Err(ClosedFormError::ResolventDim(self.d));
        }
        if !(self.a.re > 0.0) {
            return Err(ClosedFormError::NotIntegrable(self.a.re));
        }
        let deg = self.poly.degree();
        if deg > 2 {
            return Err(ClosedFormError::PolyDegree(deg));
        }
        let i = C64::i();
        let x: Vec<C64> = (0..3).map(|j| -i * self.b[j]).collect();
        let u = -self.bb();
        let kt = upper_root(r.k2, r.limit_sign);
        let jet = GaussResolvent::new(1.0 / self.a, kt).eval(u);
        // q_j -> -i ∂_{X_j} acting on F(X·X).
        let mut acc = ZERO;
        for &(e, c) in &self.poly.terms {
            let idx: Vec<usize> = (0..3).flat_map(|j| std::iter::repeat(j).take(e[j] as usize)).collect();
            let v = match idx.as_slice() {
                [] => jet.f,
                [j] => -2.0 * i * x[*j] * jet.fu,
                [j, k] => {
                    let delta = if j == k { 2.0 * jet.fu } else { ZERO };
                    -(delta + 4.0 * x[*j] * x[*k] * jet.fuu)
                }
                _ => unreachable!(),
            };
            acc += c * v;
        }
        Ok(acc * self.c.exp())
    }

    pub fn integrate_with(&self, r: Option<Resolvent>) -> Result<C64, ClosedFormError> {
        match r {
            Some(r) => self.integrate_resolvent(r),
            None => self.integrate(),
        }
    }
}

/// `P(p, q) exp(-[A_pp|p|² + 2A_pq p·q + A_qq|q|²]/2 + B_p·p + B_q·q + c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointForm {
    pub d: usize,
    pub app: C64,
    pub apq: C64,
    pub aqq: C64,
    pub bp: [C64; MAX_DIM],
    pub bq: [C64; MAX_DIM],
    pub c: C64,
    pub poly: Poly,
}

impl JointForm {
    pub fn one(d: usize) -> Self {
        Self { d, app: ZERO, apq: ZERO, aqq: ZERO, bp: [ZERO; MAX_DIM], bq: [ZERO; MAX_DIM], c: ZERO, poly: Poly::one() }
    }

    /// Multiplies by `atom(αp + βq)`.
    pub fn mul_atom(&mut self, atom: &GaussianAtom, alpha: f64, beta: f64) {
        let f = QuadForm::from_atom(atom);
        self.app += f.a * alpha * alpha;
        self.apq += f.a * alpha * beta;
        self.aqq += f.a * beta * beta;
        for j in 0..self.d {
            self.bp[j] += alpha * f.b[j];
            self.bq[j] += beta * f.b[j];
        }
        self.c += f.c;
        if !f.poly.is_one() {
            let one = C64::new(1.0, 0.0);
            let maps: Vec<Poly> = (0..self.d)
                .map(|j| Poly::var(j).scale(one * alpha).add(&Poly::var(MAX_DIM + j).scale(one * beta)))
                .collect();
            self.poly = self.poly.mul(&f.poly.compose(&maps));
        }
    }

    /// Multiplies by `exp(-iτ(|q|² - |p|²))`.
    pub fn mul_phase(&mut self, tau: f64) {
        self.aqq += C64::new(0.0, 2.0 * tau);
        self.app -= C64::new(0.0, 2.0 * tau);
    }

    /// Exchanges the roles of `p` and `q`.
    pub fn swap(&self) -> Self {
        let maps: Vec<Poly> = (0..NVARS).map(|j| Poly::var((j + MAX_DIM) % NVARS)).collect();
        Self {
            d: self.d,
            app: self.aqq,
            apq: self.apq,
            aqq: self.app,
            bp: self.bq,
            bq: self.bp,
            c: self.c,
            poly: self.poly.compose(&maps),
        }
    }

    /// Integrates `p` out exactly, leaving a form in `q`.
    pub fn integrate_p(&self) -> Result<QuadForm, ClosedFormError> {
        let a = self.app;
        if !(a.re > 0.0) {
            return Err(ClosedFormError::NotIntegrable(a.re));
        }
        let d = self.d;
        let mean: Vec<Poly> = (0..d)
            .map(|j| {
                Poly::constant(self.bp[j] / a).add(&Poly::var(MAX_DIM + j).scale(-self.apq / a))
            })
            .collect();
        let slots: Vec<usize> = (0..d).collect();
        let moment = expect_shifted(&self.poly, &slots, &mean, 1.0 / a);
        let down: Vec<Poly> = (0..NVARS).map(|j| if j >= MAX_DIM { Poly::var(j - MAX_DIM) } else { Poly::var(j) }).collect();
        let poly = moment.compose(&down);
        let mut b = [ZERO; MAX_DIM];
        let mut bpbp = ZERO;
        for j in 0..d {
            b[j] = self.bq[j] - self.apq * self.bp[j] / a;
            bpbp += self.bp[j] * self.bp[j];
        }
        let c = self.c + bpbp / (2.0 * a) + (2.0 * PI / a).ln() * (d as f64 / 2.0);
        Ok(QuadForm { d, a: self.aqq - self.apq * self.apq / a, b, c, poly })
    }
}

/// A Fourier-side factor `N(ξ)` or `N(ξ) / (k² - |ξ|²)`.
#[derive(Clone, Copy, Debug)]
pub struct FourierFactor<'a> {
    pub numerator: &'a FieldExpr,
    pub resolvent: Option<Resolvent>,
}

impl<'a> FourierFactor<'a> {
    pub fn plain(numerator: &'a FieldExpr) -> Self {
        Self { numerator, resolvent: None }
    }

    pub fn with_resolvent(numerator: &'a FieldExpr, r: Resolvent) -> Self {
        Self { numerator, resolvent: Some(r) }
    }

    pub fn eval(&self, xi: &[f64]) -> C64 {
        let n = self.numerator.eval(xi);
        match self.resolvent {
            Some(r) => n / r.symbol(xi.iter().map(|v| v * v).sum()),
            None => n,
        }
    }
}

/// `(2π)^d ∫∫ û(p) conj(v̂(q)) φ̂(q-p) ψ(ε(p+q)/2) exp(-iτ(|q|²-|p|²)) dp dq`
/// with at most one resolvent factor.
pub fn wigner_kernel(
    u: FourierFactor,
    v: FourierFactor,
    phi_hat: &FieldExpr,
    psi: &FieldExpr,
    eps: f64,
    tau: f64,
) -> Result<C64, ClosedFormError> {
    let d = phi_hat.dim;
    let (swap, res) = match (u.resolvent, v.resolvent) {
        (Some(_), Some(_)) => return Err(ClosedFormError::TwoResolvents),
        (Some(r), None) => (true, Some(r)),
        (None, Some(r)) => (false, Some(r.conj())),
        (None, None) => (false, None),
    };
    let vconj: Vec<GaussianAtom> = v.numerator.atoms.iter().map(|a| a.conj()).collect();
    let mut terms = Vec::new();
    for au in &u.numerator.atoms {
        for av in &vconj {
            for af in &phi_hat.atoms {
                for ap in &psi.atoms {
                    let mut j = JointForm::one(d);
                    j.mul_atom(au, 1.0, 0.0);
                    j.mul_atom(av, 0.0, 1.0);
                    j.mul_atom(af, -1.0, 1.0);
                    j.mul_atom(ap, 0.5 * eps, 0.5 * eps);
                    if tau != 0.0 {
                        j.mul_phase(tau);
                    }
                    let j = if swap { j.swap() } else { j };
                    terms.push(j.integrate_p()?.integrate_with(res)?);
                }
            }
        }
    }
    Ok(crate::quadrature::pairwise_sum(&terms) * (2.0 * PI).powi(d as i32))
}

/// `∫ N(ξ) conj(M(ξ)) dξ` for two Fourier factors, at most one with a resolvent.
pub fn fourier_inner(f: FourierFactor, g: FourierFactor) -> Result<C64, ClosedFormError> {
    let res = match (f.resolvent, g.resolvent) {
        (Some(_), Some(_)) => return Err(ClosedFormError::TwoResolvents),
        (Some(r), None) => Some(r),
        (None, Some(r)) => Some(r.conj()),
        (None, None) => None,
    };
    let mut terms = Vec::new();
    for a in &f.numerator.atoms {
        for b in &g.numerator.atoms {
            let q = QuadForm::from_atom(a).mul_atom(&b.conj());
            terms.push(q.integrate_with(res)?);
        }
    }
    Ok(crate::quadrature::pairwise_sum(&terms))
}

/// `∫ e^{ix·ξ} N(ξ) [/(k² - |ξ|²)] dξ`.
pub fn inverse_transform_at(f: FourierFactor, x: &[f64]) -> Result<C64, ClosedFormError> {
    let d = f.numerator.dim;
    let mut terms = Vec::with_capacity(f.numerator.atoms.len());
    for a in &f.numerator.atoms {
        let mut q = QuadForm::from_atom(a);
        for j in 0..d {
            q.b[j] += C64::new(0.0, x[j]);
        }
        terms.push(q.integrate_with(f.resolvent)?);
    }
    Ok(crate::quadrature::pairwise_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{composite_gl, sphere_rule};

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    fn tensor_1d(n: usize, l: f64) -> (Vec<f64>, Vec<f64>) {
        composite_gl(-l, l, n, 20)
    }

    #[test]
    fn gaussian_moments_match_tensor_quadrature() {
        let poly = Poly::var(0).mul(&Poly::var(2)).add(&Poly::var(1).mul(&Poly::var(1)).scale(C64::new(0.5, 2.0)))
            .add(&Poly::constant(C64::new(1.0, -1.0)));
        let q = QuadForm {
            d: 3,
            a: C64::new(1.3, 0.7),
            b: [C64::new(0.2, 1.0), C64::new(-0.4, 0.3), C64::new(0.1, -2.0)],
            c: C64::new(0.1, 0.2),
            poly,
        };
        let (x, w) = tensor_1d(12, 9.0);
        let mut acc = ZERO;
        for (i, &xi) in x.iter().enumerate() {
            for (j, &xj) in x.iter().enumerate() {
                for (k, &xk) in x.iter().enumerate() {
                    acc += w[i] * w[j] * w[k] * q.eval(&[xi, xj, xk]);
                }
            }
        }
        let exact = q.integrate().unwrap();
        assert!(close(exact, acc, 1e-10), "{exact} vs {acc}");
    }

    // Radial composite Gauss–Legendre times a sphere rule.
    fn spherical_oracle(q: &QuadForm, r: Resolvent) -> C64 {
        let rule = sphere_rule(3, 30).unwrap();
        let (rs, rw) = composite_gl(0.0, 10.0, 400, 12);
        let mut acc = ZERO;
        for (ri, wi) in rs.iter().zip(&rw) {
            let sph = rule.integrate(|w| q.eval(&[ri * w[0], ri * w[1], ri * w[2]]));
            acc += wi * ri * ri * sph / r.symbol(ri * ri);
        }
        acc
    }

    #[test]
    fn resolvent_integral_matches_spherical_quadrature() {
        let poly = Poly::var(0).mul(&Poly::var(1)).scale(C64::new(0.3, 0.0))
            .add(&Poly::var(2).mul(&Poly::var(2)))
            .add(&Poly::var(1).scale(C64::new(0.0, 1.0)))
            .add(&Poly::one());
        let q = QuadForm {
            d: 3,
            a: C64::new(1.1, 0.4),
            b: [C64::new(0.2, 0.5), C64::new(-0.1, 0.3), C64::new(0.3, -0.6)],
            c: ZERO,
            poly,
        };
        for k2 in [C64::new(1.0, -0.5), C64::new(1.0, 0.7), C64::new(2.0, -0.3)] {
            let r = Resolvent::new(k2, -1.0);
            let exact = q.integrate_resolvent(r).unwrap();
            let num = spherical_oracle(&q, r);
            assert!(close(exact, num, 1e-8), "k2 = {k2}: {exact} vs {num}");
        }
    }

    #[test]
    fn joint_form_with_phase_matches_2d_quadrature() {
        let atoms = [
            GaussianAtom::new(C64::new(1.0, 0.5), vec![0.3], 1.2, vec![0.7]),
            GaussianAtom::new(C64::new(0.8, 0.0), vec![-0.2], 0.9, vec![-0.4]),
            GaussianAtom::new(C64::new(1.0, 0.0), vec![0.1], 2.0, vec![0.0]).with_poly(Poly::var(0)),
            GaussianAtom::new(C64::new(0.5, 0.0), vec![0.4], 1.5, vec![0.2]),
        ];
        let coef = [(1.0, 0.0), (0.0, 1.0), (-1.0, 1.0), (0.25, 0.25)];
        let tau = 0.3;
        let mut j = JointForm::one(1);
        for (a, &(al, be)) in atoms.iter().zip(&coef) {
            j.mul_atom(a, al, be);
        }
        j.mul_phase(tau);
        let exact = j.integrate_p().unwrap().integrate().unwrap();
        let swapped = j.swap().integrate_p().unwrap().integrate().unwrap();
        let (x, w) = tensor_1d(40, 10.0);
        let mut acc = ZERO;
        for (i, &p) in x.iter().enumerate() {
            for (k, &q) in x.iter().enumerate() {
                let mut v = C64::from_polar(1.0, -tau * (q * q - p * p));
                for (a, &(al, be)) in atoms.iter().zip(&coef) {
                    v *= a.eval(&[al * p + be * q]);
                }
                acc += w[i] * w[k] * v;
            }
        }
        assert!(close(exact, acc, 1e-10), "{exact} vs {acc}");
        assert!(close(swapped, acc, 1e-10));
    }

    // At fixed q, the p-integrand is a product of plain atoms in p.
    fn atom_in_p(a: &GaussianAtom, alpha: f64, beta: f64, q: &[f64]) -> GaussianAtom {
        let shifted = a.shift(&q.iter().map(|v| -beta * v).collect::<Vec<_>>());
        if alpha > 0.0 {
            shifted.dilate(alpha, 1.0)
        } else {
            shifted.reflect().dilate(-alpha, 1.0)
        }
    }

    #[test]
    fn joint_resolvent_matches_nested_oracle() {
        let eps = 0.5;
        let u = FieldExpr::from_atoms(3, vec![GaussianAtom::new(C64::new(1.0, 0.2), vec![0.1, 0.0, -0.2], 0.8, vec![0.3, 0.0, 0.1])]);
        let v = FieldExpr::from_atoms(3, vec![GaussianAtom::new(C64::new(0.7, 0.0), vec![0.0, 0.2, 0.0], 1.1, vec![-0.2, 0.1, 0.0])]);
        let phi_hat = FieldExpr::from_atoms(3, vec![GaussianAtom::new(C64::new(0.9, 0.0), vec![0.1, 0.1, 0.0], 1.5, vec![0.0, 0.4, 0.0])]);
        let psi = FieldExpr::from_atoms(3, vec![GaussianAtom::new(C64::new(1.0, 0.0), vec![0.2, 0.0, 0.1], 1.0, vec![0.0; 3])]);
        let r = Resolvent::new(C64::new(1.0, -0.4), -1.0);
        let exact = wigner_kernel(FourierFactor::plain(&u), FourierFactor::with_resolvent(&v, r), &phi_hat, &psi, eps, 0.0).unwrap();
        let exact_sw = wigner_kernel(FourierFactor::with_resolvent(&v, r), FourierFactor::plain(&u), &phi_hat.reflect().conj(), &psi, eps, 0.0).unwrap();

        let rule = sphere_rule(3, 30).unwrap();
        let (rs, rw) = composite_gl(0.0, 9.0, 200, 16);
        let vc = v.atoms[0].conj();
        let mut acc = ZERO;
        for (ri, wi) in rs.iter().zip(&rw) {
            let sph = rule.integrate(|w| {
                let q = [ri * w[0], ri * w[1], ri * w[2]];
                let prod = atom_in_p(&u.atoms[0], 1.0, 0.0, &q)
                    .mul(&atom_in_p(&phi_hat.atoms[0], -1.0, 1.0, &q))
                    .mul(&atom_in_p(&psi.atoms[0], 0.5 * eps, 0.5 * eps, &q));
                prod.integral() * vc.eval(&q)
            });
            acc += wi * ri * ri * sph / r.conj().symbol(ri * ri);
        }
        acc *= (2.0 * PI).powi(3);
        assert!(close(exact, acc, 1e-8), "{exact} vs {acc}");
        // Swapping u and v and replacing φ̂ by conj(φ̂(-·)) conjugates the kernel.
        assert!(close(exact_sw, exact.conj(), 1e-12), "{exact_sw} vs {}", exact.conj());
    }

    #[test]
    fn inverse_transform_matches_direct_quadrature() {
        let n = FieldExpr::from_atoms(3, vec![GaussianAtom::new(C64::new(1.0, 0.0), vec![0.0; 3], 1.0, vec![-0.5, 0.0, 0.0])]);
        let r = Resolvent::new(C64::new(1.0, -1.0), -1.0);
        let x = [0.4, -0.3, 1.1];
        let exact = inverse_transform_at(FourierFactor::with_resolvent(&n, r), &x).unwrap();
        let mut q = QuadForm::from_atom(&n.atoms[0]);
        for j in 0..3 {
            q.b[j] += C64::new(0.0, x[j]);
        }
        let num = spherical_oracle(&q, r);
        assert!(close(exact, num, 1e-8), "{exact} vs {num}");
    }
}
