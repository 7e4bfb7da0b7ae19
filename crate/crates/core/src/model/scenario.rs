use super::{scale_concentrate, FieldExpr, GaussianAtom};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Problem instance: dimension, ε-grid, damping exponent, second source
/// point and the two source profiles.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub d: usize,
    pub epsilons: Vec<f64>,
    pub gamma: f64,
    pub q1: Vec<f64>,
    pub s0: FieldExpr,
    pub s1: FieldExpr,
    pub n_weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H1,
    H3,
    Geometry,
    Grid,
    Sources,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Hypothesis::H1 => "H1",
            Hypothesis::H3 => "H3",
            Hypothesis::Geometry => "geometry",
            Hypothesis::Grid => "grid",
            Hypothesis::Sources => "sources",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub hypothesis: Hypothesis,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub accepted: bool,
    /// `1/2 + 3γ/(γ+1)`; the weight exponent must exceed it.
    pub h3_threshold: f64,
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.accepted {
            return write!(f, "accepted (H3 threshold {:.6})", self.h3_threshold);
        }
        write!(f, "rejected:")?;
        for v in &self.violations {
            write!(f, " [{}] {};", v.hypothesis, v.message)?;
        }
        Ok(())
    }
}

impl Scenario {
    /// The reference scenario: unit Gaussian profiles, `q₁ = (2,0,0)`,
    /// `γ = 1`, `N = 2.1`, ε ∈ {0.4, …, 0.025}.
    pub fn reference() -> Self {
        Self {
            d: 3,
            epsilons: vec![0.4, 0.2, 0.1, 0.05, 0.025],
            gamma: 1.0,
            q1: vec![2.0, 0.0, 0.0],
            s0: FieldExpr::unit_gaussian(vec![0.0; 3]),
            s1: FieldExpr::unit_gaussian(vec![0.0; 3]),
            n_weight: 2.1,
        }
    }

    pub fn h3_threshold(gamma: f64) -> f64 {
        0.5 + 3.0 * gamma / (gamma + 1.0)
    }

    /// Damping `α_ε = ε^γ`.
    pub fn alpha(&self, eps: f64) -> f64 {
        eps.powf(self.gamma)
    }

    /// Rescaled damping `η = ε α_ε`.
    pub fn eta(&self, eps: f64) -> f64 {
        eps * self.alpha(eps)
    }

    /// Source center `x_j` (0 or `q₁`).
    pub fn center(&self, which: usize) -> Vec<f64> {
        match which {
            0 => vec![0.0; self.d],
            _ => self.q1.clone(),
        }
    }

    pub fn profile(&self, which: usize) -> &FieldExpr {
        match which {
            0 => &self.s0,
            _ => &self.s1,
        }
    }

    /// Concentrated source `S_j^ε(x) = ε^{-d} S_j((x - x_j)/ε)`.
    pub fn concentrated(&self, which: usize, eps: f64) -> FieldExpr {
        scale_concentrate(self.profile(which), eps, &self.center(which))
    }

    pub fn with_sources(&self, s0: FieldExpr, s1: FieldExpr) -> Self {
        Self { s0, s1, ..self.clone() }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let threshold = Self::h3_threshold(self.gamma);
        let mut push = |h, m: String| violations.push(Violation { hypothesis: h, message: m });
        if !(self.gamma > 0.0) {
            push(Hypothesis::H1, format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.n_weight > threshold) {
            push(Hypothesis::H3, format!("N = {} must exceed 1/2 + 3γ/(γ+1) = {threshold}", self.n_weight));
        }
        if self.q1.len() != self.d {
            push(Hypothesis::Geometry, format!("q1 has {} components, expected {}", self.q1.len(), self.d));
        } else if self.q1.iter().all(|&v| v == 0.0) {
            push(Hypothesis::Geometry, "q1 must differ from the origin".into());
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0)) {
            push(Hypothesis::Grid, "epsilons must be positive".into());
        }
        if self.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            push(Hypothesis::Grid, "epsilons must be strictly decreasing".into());
        }
        if self.d == 0 || self.d > super::MAX_DIM {
            push(Hypothesis::Geometry, format!("dimension {} unsupported (1..=3)", self.d));
        }
        if self.s0.dim != self.d || self.s1.dim != self.d {
            push(Hypothesis::Sources, "source dimension differs from d".into());
        }
        ValidationReport { accepted: violations.is_empty(), h3_threshold: threshold, violations }
    }
}

/// One atom in the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomConfig {
    pub amplitude_re: f64,
    #[serde(default)]
    pub amplitude_im: f64,
    pub center: Vec<f64>,
    pub inv_variance: f64,
    pub modulation: Vec<f64>,
}

impl AtomConfig {
    pub fn to_atom(&self) -> Result<GaussianAtom, String> {
        if self.center.len() != self.modulation.len() {
            return Err("center and modulation lengths differ".into());
        }
        if !(self.inv_variance > 0.0) {
            return Err(format!("inv_variance must be positive, got {}", self.inv_variance));
        }
        if self.center.is_empty() || self.center.len() > super::MAX_DIM {
            return Err("atom dimension must be 1..=3".into());
        }
        Ok(GaussianAtom::new(
            C64::new(self.amplitude_re, self.amplitude_im),
            self.center.clone(),
            self.inv_variance,
            self.modulation.clone(),
        ))
    }

    pub fn from_atom(a: &GaussianAtom) -> Self {
        Self {
            amplitude_re: a.amplitude.re,
            amplitude_im: a.amplitude.im,
            center: a.center.clone(),
            inv_variance: a.inv_variance,
            modulation: a.modulation.clone(),
        }
    }
}

/// Serialized scenario; key names are part of the config format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub d: usize,
    pub epsilons: Vec<f64>,
    pub gamma: f64,
    pub q1: Vec<f64>,
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "S0")]
    pub s0: Vec<AtomConfig>,
    #[serde(rename = "S1", default)]
    pub s1: Vec<AtomConfig>,
}

impl ScenarioConfig {
    pub fn to_scenario(&self) -> Result<Scenario, String> {
        let conv = |v: &[AtomConfig]| -> Result<FieldExpr, String> {
            let atoms = v.iter().map(|a| a.to_atom()).collect::<Result<Vec<_>, _>>()?;
            if atoms.iter().any(|a| a.dim() != self.d) {
                return Err(format!("atom dimension differs from d = {}", self.d));
            }
            Ok(FieldExpr::from_atoms(self.d, atoms))
        };
        Ok(Scenario {
            d: self.d,
            epsilons: self.epsilons.clone(),
            gamma: self.gamma,
            q1: self.q1.clone(),
            s0: conv(&self.s0)?,
            s1: conv(&self.s1)?,
            n_weight: self.n,
        })
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        let conv = |f: &FieldExpr| {
            f.atoms
                .iter()
                .map(|a| {
                    assert!(a.poly.is_one(), "only plain atoms are serializable");
                    AtomConfig::from_atom(a)
                })
                .collect()
        };
        Self {
            d: s.d,
            epsilons: s.epsilons.clone(),
            gamma: s.gamma,
            q1: s.q1.clone(),
            n: s.n_weight,
            s0: conv(&s.s0),
            s1: conv(&s.s1),
        }
    }
}
