//! Faddeeva function and the Gaussian–resolvent transform built on it.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::sync::OnceLock;

const N_TERMS: usize = 40;

struct Weideman {
    l: f64,
    coeffs: [f64; N_TERMS],
}

fn weideman() -> &'static Weideman {
    static TABLE: OnceLock<Weideman> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = N_TERMS;
        let m = 2 * n;
        let m2 = 2 * m;
        let l = (n as f64 / 2f64.sqrt()).sqrt();
        // f sampled on k = -M..M-1, with f(-M) = 0, then fftshifted.
        let mut f = vec![0.0; m2];
        for (idx, k) in (-(m as i64)..(m as i64)).enumerate() {
            if k == -(m as i64) {
                continue;
            }
            let theta = k as f64 * PI / m as f64;
            let t = l * (theta / 2.0).tan();
            f[idx] = (-t * t).exp() * (l * l + t * t);
        }
        let shifted: Vec<f64> = (0..m2).map(|j| f[(j + m) % m2]).collect();
        let mut coeffs = [0.0; N_TERMS];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let freq = (i + 1) as f64;
            let mut acc = 0.0;
            for (j, v) in shifted.iter().enumerate() {
                acc += v * (2.0 * PI * freq * j as f64 / m2 as f64).cos();
            }
            *c = acc / m2 as f64;
        }
        Weideman { l, coeffs }
    })
}

fn faddeeva_upper(z: C64) -> C64 {
    let tab = weideman();
    let i = C64::i();
    let lmiz = C64::new(tab.l, 0.0) - i * z;
    let zz = (C64::new(tab.l, 0.0) + i * z) / lmiz;
    let mut p = C64::new(0.0, 0.0);
    for c in tab.coeffs.iter().rev() {
        p = p * zz + c;
    }
    2.0 * p / (lmiz * lmiz) + 1.0 / (PI.sqrt() * lmiz)
}

/// Faddeeva function `w(z) = exp(-z^2) erfc(-iz)`, entire.
pub fn faddeeva(z: C64) -> C64 {
    if z.im >= 0.0 {
        faddeeva_upper(z)
    } else {
        2.0 * (-z * z).exp() - faddeeva_upper(-z)
    }
}

/// `exp(-b^2/4) w(c - i b/2)` evaluated without overflow when the argument
/// falls in the lower half plane.
fn damped_w_minus(c: C64, b: C64) -> C64 {
    let i = C64::i();
    let z = c - i * b / 2.0;
    if z.im >= 0.0 {
        (-b * b / 4.0).exp() * faddeeva_upper(z)
    } else {
        2.0 * (-c * c + i * b * c).exp() - (-b * b / 4.0).exp() * faddeeva_upper(-z)
    }
}

fn damped_w_plus(c: C64, b: C64) -> C64 {
    let i = C64::i();
    let z = c + i * b / 2.0;
    if z.im >= 0.0 {
        (-b * b / 4.0).exp() * faddeeva_upper(z)
    } else {
        2.0 * (-c * c - i * b * c).exp() - (-b * b / 4.0).exp() * faddeeva_upper(-z)
    }
}

/// Picks the square root of `k2` in the closed upper half plane.
///
/// `k2` exactly on the positive real axis is ambiguous; `limit_sign` chooses
/// the side (`-1.0` for `k2 - i0`, `+1.0` for `k2 + i0`).
pub fn upper_root(k2: C64, limit_sign: f64) -> C64 {
    let mut k = k2.sqrt();
    if k2.im == 0.0 && k2.re > 0.0 {
        k = C64::new(k2.re.sqrt(), 0.0);
        if limit_sign < 0.0 {
            k = -k;
        }
        return k;
    }
    if k.im < 0.0 {
        k = -k;
    }
    k
}

/// `F(X) = ∫_{R^3} exp(iX·ξ) exp(-|ξ|^2/(2s)) / (kt^2 - |ξ|^2) dξ` as a
/// function of `u = X·X` (X may be complex).
///
/// `s` may be complex with `Re(1/s) > 0`; `kt` is the root of the symbol with
/// non-negative imaginary part (see [`upper_root`]).
#[derive(Clone, Copy, Debug)]
pub struct GaussResolvent {
    pub s: C64,
    pub kt: C64,
}

/// Value and first two derivatives with respect to `u = X·X`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub f: C64,
    pub fu: C64,
    pub fuu: C64,
}

impl GaussResolvent {
    pub fn new(s: C64, kt: C64) -> Self {
        Self { s, kt }
    }

    pub fn eval(&self, u: C64) -> Jet2 {
        let beta = (2.0 * self.s).sqrt();
        let ct = self.kt / beta;
        let mut b = beta * u.sqrt();
        if b.re < 0.0 {
            b = -b;
        }
        if b.norm() < 0.5 && (ct * b).norm() < 4.0 {
            return self.series(u);
        }
        let i = C64::i();
        let em = damped_w_minus(ct, b);
        let ep = damped_w_plus(ct, b);
        let g = (-b * b / 4.0).exp() / PI.sqrt();
        let d = em - ep;
        let p = em + ep;
        let pref = -i * PI / 2.0;
        let j0 = pref * d;
        let j1 = pref * (i * ct * p + 2.0 * g);
        let j2 = pref * (-ct * ct * d - b * g);
        let c = 2.0 * PI * beta / i;
        let b2 = b * b;
        let f = c * j0 / b;
        let fu = c * beta * beta * (b * j1 - j0) / (2.0 * b2 * b);
        let fuu = c * beta.powi(4) * (b2 * j2 - 3.0 * b * j1 + 3.0 * j0) / (4.0 * b2 * b2 * b);
        Jet2 { f, fu, fuu }
    }

    fn series(&self, u: C64) -> Jet2 {
        let s = self.s;
        let k2 = self.kt * self.kt;
        let beta = (2.0 * s).sqrt();
        let ct = self.kt / beta;
        let i = C64::i();
        // m_j = ∫_0^∞ ρ^j e^{-ρ²/(2s)} / (k² - ρ²) dρ for even j.
        let mut m = -i * PI * faddeeva(ct) / (2.0 * self.kt);
        let mut gamma = (PI * s / 2.0).sqrt();
        let mut f = C64::new(0.0, 0.0);
        let mut fu = C64::new(0.0, 0.0);
        let mut fuu = C64::new(0.0, 0.0);
        let mut fact = 1.0; // (2n+1)!
        let mut upow = C64::new(1.0, 0.0); // (-u)^n
        let mut upow_m1 = C64::new(0.0, 0.0); // (-u)^(n-1)
        let mut upow_m2 = C64::new(0.0, 0.0);
        for n in 0..60usize {
            let j = 2 * n;
            m = k2 * m - gamma; // m_{j+2}
            gamma *= (j as f64 + 1.0) * s;
            let nf = n as f64;
            let t0 = upow * m / fact;
            f += t0;
            if n >= 1 {
                fu += -nf * upow_m1 * m / fact;
            }
            if n >= 2 {
                fuu += nf * (nf - 1.0) * upow_m2 * m / fact;
            }
            if n > 3 && t0.norm() < 1e-18 * f.norm() {
                break;
            }
            upow_m2 = upow_m1;
            upow_m1 = upow;
            upow *= -u;
            fact *= (2 * n + 2) as f64 * (2 * n + 3) as f64;
        }
        let c = 4.0 * PI;
        Jet2 { f: c * f, fu: c * fu, fuu: c * fuu }
    }
}

/// `∫_R exp(-t^2 + i b t) / (t - c) dt` for `c` off the real axis, or on it
/// with `c_side` giving the sign of the infinitesimal imaginary part.
pub fn gauss_cauchy(c: C64, b: f64, c_side: f64) -> C64 {
    let i = C64::i();
    let b = C64::new(b, 0.0);
    let upper = if c.im != 0.0 { c.im > 0.0 } else { c_side > 0.0 };
    if upper {
        i * PI * damped_w_minus(c, b)
    } else {
        -i * PI * (-b * b / 4.0).exp() * faddeeva(-c + i * b / 2.0)
    }
}
