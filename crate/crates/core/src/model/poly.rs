use num_complex::Complex64 as C64;

/// Largest field dimension.
pub const MAX_DIM: usize = 3;
/// Variable slots in a polynomial (two field variables of dimension ≤ 3).
pub const NVARS: usize = 6;

pub type Exps = [u8; NVARS];

/// Polynomial in up to six variables with complex coefficients.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly {
    pub terms: Vec<(Exps, C64)>,
}

impl Poly {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        let mut p = Self { terms: vec![([0; NVARS], c)] };
        p.prune();
        p
    }

    pub fn one() -> Self {
        Self::constant(C64::new(1.0, 0.0))
    }

    /// The coordinate polynomial `x_j`.
    pub fn var(j: usize) -> Self {
        let mut e = [0; NVARS];
        e[j] = 1;
        Self { terms: vec![(e, C64::new(1.0, 0.0))] }
    }

    /// `c + Σ_j a_j x_j`.
    pub fn linear(c: C64, a: &[C64]) -> Self {
        let mut p = Self::constant(c);
        for (j, &aj) in a.iter().enumerate() {
            p = p.add(&Self::var(j).scale(aj));
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when the polynomial is the constant `1`.
    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0 == [0; NVARS] && self.terms[0].1 == C64::new(1.0, 0.0)
    }

    pub fn constant_term(&self) -> Option<C64> {
        match self.terms.as_slice() {
            [] => Some(C64::new(0.0, 0.0)),
            [(e, c)] if *e == [0; NVARS] => Some(*c),
            _ => None,
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(e, _)| e.iter().map(|&v| v as u32).sum()).max().unwrap_or(0)
    }

    fn prune(&mut self) {
        self.terms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(Exps, C64)> = Vec::with_capacity(self.terms.len());
        for (e, c) in self.terms.drain(..) {
            match out.last_mut() {
                Some((le, lc)) if *le == e => *lc += c,
                _ => out.push((e, c)),
            }
        }
        out.retain(|(_, c)| *c != C64::new(0.0, 0.0));
        self.terms = out;
    }

    pub fn scale(&self, a: C64) -> Self {
        let mut p = Self { terms: self.terms.iter().map(|&(e, c)| (e, c * a)).collect() };
        p.prune();
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = Self { terms: self.terms.iter().chain(other.terms.iter()).cloned().collect() };
        p.prune();
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &(ea, ca) in &self.terms {
            for &(eb, cb) in &other.terms {
                let mut e = ea;
                for j in 0..NVARS {
                    e[j] += eb[j];
                }
                terms.push((e, ca * cb));
            }
        }
        let mut p = Self { terms };
        p.prune();
        p
    }

    pub fn conj(&self) -> Self {
        Self { terms: self.terms.iter().map(|&(e, c)| (e, c.conj())).collect() }
    }

    pub fn deriv(&self, j: usize) -> Self {
        let mut terms = Vec::new();
        for &(e, c) in &self.terms {
            if e[j] > 0 {
                let mut e2 = e;
                e2[j] -= 1;
                terms.push((e2, c * e[j] as f64));
            }
        }
        let mut p = Self { terms };
        p.prune();
        p
    }

    pub fn eval<T: Copy + Into<C64>>(&self, x: &[T]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &(e, c) in &self.terms {
            let mut m = c;
            for (j, &ej) in e.iter().enumerate() {
                if ej > 0 {
                    m *= x[j].into().powu(ej as u32);
                }
            }
            acc += m;
        }
        acc
    }

    /// Substitutes `x_j -> maps[j]`; missing maps leave the variable alone.
    pub fn compose(&self, maps: &[Poly]) -> Self {
        let mut out = Self::zero();
        for &(e, c) in &self.terms {
            let mut m = Self::constant(c);
            for (j, &ej) in e.iter().enumerate() {
                if ej == 0 {
                    continue;
                }
                let map = maps.get(j).cloned().unwrap_or_else(|| Self::var(j));
                for _ in 0..ej {
                    m = m.mul(&map);
                }
            }
            out = out.add(&m);
        }
        out
    }

    /// `P(a x + b)` for scalar `a` and vector `b` of length `dim`.
    pub fn affine(&self, a: f64, b: &[f64]) -> Self {
        if self.degree() == 0 {
            return self.clone();
        }
        let maps: Vec<Poly> = (0..NVARS)
            .map(|j| {
                let bj = b.get(j).copied().unwrap_or(0.0);
                Self::constant(C64::new(bj, 0.0)).add(&Self::var(j).scale(C64::new(a, 0.0)))
            })
            .collect();
        self.compose(&maps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algebra_basics() {
        let x = Poly::var(0);
        let y = Poly::var(1);
        let p = x.add(&y).mul(&x.add(&y.scale(C64::new(-1.0, 0.0))));
        let v = p.eval(&[2.0, 3.0, 0.0]);
        assert_eq!(v, C64::new(-5.0, 0.0));
        assert_eq!(p.deriv(0).eval(&[2.0, 3.0, 0.0]), C64::new(4.0, 0.0));
        let q = p.affine(2.0, &[1.0, 0.0, 0.0]);
        assert_eq!(q.eval(&[0.5, 1.0, 0.0]), p.eval(&[2.0, 2.0, 0.0]));
        assert!(x.add(&x.scale(C64::new(-1.0, 0.0))).is_zero());
    }
}
