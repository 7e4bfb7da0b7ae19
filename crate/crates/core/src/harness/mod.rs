//! Experiment orchestration: configuration, cached ε-sweeps, CSV rows and
//! the acceptance report.

pub mod criteria;

use crate::helmholtz::{pairing, solve_full, solve_rescaled, solve_shifted_only};
use crate::liouville::RayMeasure;
use crate::model::{AtomConfig, FieldExpr, Scenario, ScenarioConfig};
use crate::norms::{b_norm, bstar_norm, NormQuad, RingDecomposition};
use crate::oscillatory::{lemma_l_integral, rate_fit, RateFit, SweepPoint, SweepSeries};
use crate::wigner::{cross_term, source_limit, source_term_pairing, transport_identity_residual, wigner_pairing, Observable, PairingMethod, PairingQuad};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("cell {functional}/{observable} at eps {eps}: {message}")]
    Cell { functional: String, observable: String, eps: f64, message: String },
}

/// Registered functionals; the config refers to them by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// `ε⟨W^ε(S^ε_0, u^ε), a⟩`.
    SourceTerm,
    /// Its `ε → 0` limit (ε-independent).
    SourceLimit,
    /// `⟨W^ε(u^ε, u^ε), a⟩`.
    Wigner,
    /// `⟨W^ε(u^ε_0, u^ε_1), a⟩`.
    CrossTerm,
    /// `⟨μ, a⟩` (ε-independent).
    Mu,
    /// Residual of the ε-level transport identity; `error` is the combined
    /// quadrature error.
    TransportResidual,
    /// `⟨a^ε, v⟩` for a test field `v`.
    AEpsPairing,
    /// `‖w^ε_0‖_{B*} / (‖S_0‖_B + ‖S_1‖_B)`.
    BstarRatio,
    /// Model integral with `w = e^{-r²/2}`, `δ = 0.5`, `q = 1`.
    LemmaL,
}

impl Functional {
    pub const ALL: [Functional; 9] = [
        Functional::SourceTerm,
        Functional::SourceLimit,
        Functional::Wigner,
        Functional::CrossTerm,
        Functional::Mu,
        Functional::TransportResidual,
        Functional::AEpsPairing,
        Functional::BstarRatio,
        Functional::LemmaL,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Functional::SourceTerm => "source_term",
            Functional::SourceLimit => "source_limit",
            Functional::Wigner => "wigner",
            Functional::CrossTerm => "cross_term",
            Functional::Mu => "mu",
            Functional::TransportResidual => "transport_residual",
            Functional::AEpsPairing => "a_eps_pairing",
            Functional::BstarRatio => "bstar_ratio",
            Functional::LemmaL => "lemma_l",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|f| f.name() == s)
    }

    pub fn eps_independent(self) -> bool {
        matches!(self, Functional::SourceLimit | Functional::Mu)
    }

    fn target(self) -> TargetKind {
        match self {
            Functional::AEpsPairing => TargetKind::Field,
            Functional::BstarRatio | Functional::LemmaL => TargetKind::None,
            _ => TargetKind::Observable,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TargetKind {
    Observable,
    Field,
    None,
}

/// What a cell is evaluated against.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Observable(Observable),
    Field(FieldExpr),
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableConfig {
    pub id: String,
    pub phi: Vec<AtomConfig>,
    pub psi: Vec<AtomConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFieldConfig {
    pub id: String,
    pub atoms: Vec<AtomConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSection {
    pub id: String,
    #[serde(flatten)]
    pub config: ScenarioConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadMethod {
    Deterministic,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadSection {
    pub method: QuadMethod,
    pub rel_tol: f64,
    pub mc_samples: u64,
    pub seed: u64,
}

impl Default for QuadSection {
    fn default() -> Self {
        let q = PairingQuad::default();
        Self { method: QuadMethod::Deterministic, rel_tol: q.rel_tol, mc_samples: q.mc_samples, seed: q.seed }
    }
}

impl QuadSection {
    pub fn pairing_quad(&self) -> PairingQuad {
        let method = match self.method {
            QuadMethod::Deterministic => PairingMethod::Deterministic,
            QuadMethod::MonteCarlo => PairingMethod::MonteCarlo,
        };
        PairingQuad { method, rel_tol: self.rel_tol, mc_samples: self.mc_samples, seed: self.seed, ..PairingQuad::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    pub functionals: Vec<String>,
    pub observables: Vec<String>,
    pub test_fields: Vec<String>,
    /// Defaults to the scenario grid.
    pub epsilons: Option<Vec<f64>>,
    /// Acceptance criterion ids to evaluate; the others are reported as
    /// skipped.
    pub criteria: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub cache: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), cache: true }
    }
}

/// Contents of a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub observables: Vec<ObservableConfig>,
    #[serde(default)]
    pub test_fields: Vec<TestFieldConfig>,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub quad: QuadSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn atoms_to_field(d: usize, atoms: &[AtomConfig]) -> Result<FieldExpr, HarnessError> {
    let atoms = atoms.iter().map(|a| a.to_atom()).collect::<Result<Vec<_>, _>>().map_err(HarnessError::Config)?;
    if atoms.iter().any(|a| a.dim() != d) {
        return Err(HarnessError::Config(format!("atom dimension differs from d = {d}")));
    }
    Ok(FieldExpr::from_atoms(d, atoms))
}

/// An [`ExperimentSpec`] with every reference resolved.
#[derive(Clone, Debug)]
pub struct ResolvedSpec {
    pub spec: ExperimentSpec,
    pub scenario: Scenario,
    pub observables: BTreeMap<String, Observable>,
    pub test_fields: BTreeMap<String, FieldExpr>,
    pub functionals: Vec<Functional>,
    pub epsilons: Vec<f64>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Reference scenario with no sweep cells and no criteria.
    pub fn reference() -> Self {
        Self {
            scenario: ScenarioSection { id: "reference".into(), config: ScenarioConfig::from_scenario(&Scenario::reference()) },
            observables: vec![],
            test_fields: vec![],
            sweep: SweepSection::default(),
            quad: QuadSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn resolve(&self) -> Result<ResolvedSpec, HarnessError> {
        let scenario = self.scenario.config.to_scenario().map_err(HarnessError::Config)?;
        let v = scenario.validate();
        if !v.accepted {
            return Err(HarnessError::Config(format!("scenario rejected: {:?}", v.violations)));
        }
        let d = scenario.d;
        let mut observables = BTreeMap::new();
        for o in &self.observables {
            let a = Observable::new(atoms_to_field(d, &o.phi)?, atoms_to_field(d, &o.psi)?);
            if observables.insert(o.id.clone(), a).is_some() {
                return Err(HarnessError::Config(format!("duplicate observable id {}", o.id)));
            }
        }
        let mut test_fields = BTreeMap::new();
        for t in &self.test_fields {
            if test_fields.insert(t.id.clone(), atoms_to_field(d, &t.atoms)?).is_some() {
                return Err(HarnessError::Config(format!("duplicate test field id {}", t.id)));
            }
        }
        let functionals = self
            .sweep
            .functionals
            .iter()
            .map(|n| Functional::from_name(n).ok_or_else(|| HarnessError::Config(format!("unknown functional {n}"))))
            .collect::<Result<Vec<_>, _>>()?;
        for id in &self.sweep.observables {
            if !observables.contains_key(id) {
                return Err(HarnessError::Config(format!("unknown observable {id}")));
            }
        }
        for id in &self.sweep.test_fields {
            if !test_fields.contains_key(id) {
                return Err(HarnessError::Config(format!("unknown test field {id}")));
            }
        }
        for c in &self.sweep.criteria {
            if !criteria::IDS.contains(c) {
                return Err(HarnessError::Config(format!("unknown criterion {c}")));
            }
        }
        let epsilons = self.sweep.epsilons.clone().unwrap_or_else(|| scenario.epsilons.clone());
        if epsilons.windows(2).any(|w| w[1] >= w[0]) || epsilons.iter().any(|&e| !(e > 0.0)) {
            return Err(HarnessError::Config("epsilons must be positive and strictly decreasing".into()));
        }
        if self.quad.rel_tol.is_nan() || self.quad.rel_tol <= 0.0 {
            return Err(HarnessError::Config("quad.rel_tol must be positive".into()));
        }
        Ok(ResolvedSpec { spec: self.clone(), scenario, observables, test_fields, functionals, epsilons })
    }
}

/// One evaluated cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario_id: String,
    pub epsilon: f64,
    pub functional: String,
    pub observable_id: String,
    pub value_re: f64,
    pub value_im: f64,
    pub error: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub wall_ms: u64,
}

pub const CSV_HEADER: &str = "scenario_id,epsilon,functional,observable_id,value_re,value_im,error,n_samples,seed,wall_ms";

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

impl ResultRow {
    pub fn value(&self) -> C64 {
        C64::new(self.value_re, self.value_im)
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.scenario_id,
            fmt17(self.epsilon),
            self.functional,
            self.observable_id,
            fmt17(self.value_re),
            fmt17(self.value_im),
            fmt17(self.error),
            self.n_samples,
            self.seed,
            self.wall_ms
        )
    }

    pub fn from_csv(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 10 {
            return None;
        }
        Some(Self {
            scenario_id: f[0].into(),
            epsilon: f[1].parse().ok()?,
            functional: f[2].into(),
            observable_id: f[3].into(),
            value_re: f[4].parse().ok()?,
            value_im: f[5].parse().ok()?,
            error: f[6].parse().ok()?,
            n_samples: f[7].parse().ok()?,
            seed: f[8].parse().ok()?,
            wall_ms: f[9].parse().ok()?,
        })
    }

    fn sort_key(&self) -> (String, String, String, std::cmp::Reverse<u64>) {
        (self.scenario_id.clone(), self.functional.clone(), self.observable_id.clone(), std::cmp::Reverse(self.epsilon.to_bits()))
    }
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv());
    }
    out
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ResultRow>, HarnessError> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(HarnessError::Config("CSV header mismatch".into()));
    }
    lines.map(|l| ResultRow::from_csv(l).ok_or_else(|| HarnessError::Config(format!("bad CSV row: {l}")))).collect()
}

/// A failed cell; the run continues past it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub functional: String,
    pub observable_id: String,
    pub epsilon: f64,
    pub message: String,
}

/// Evaluates cells with a content-hash cache and collects rows.
pub struct CellRunner {
    pub scenario: Scenario,
    pub scenario_id: String,
    pub quad: PairingQuad,
    cache_dir: Option<PathBuf>,
    rows: Mutex<Vec<ResultRow>>,
    failures: Mutex<Vec<CellFailure>>,
}

const CACHE_VERSION: &str = "semilab-cell-v1";

impl CellRunner {
    pub fn new(scenario: Scenario, scenario_id: &str, quad: PairingQuad, cache_dir: Option<PathBuf>) -> Self {
        Self { scenario, scenario_id: scenario_id.into(), quad, cache_dir, rows: Mutex::new(vec![]), failures: Mutex::new(vec![]) }
    }

    pub fn cache_key(&self, f: Functional, target: &Target, eps: f64) -> String {
        let mut h = Sha256::new();
        let text = format!(
            "{CACHE_VERSION}|{:?}|{}|{:?}|{:?}|{:016x}|{}",
            self.scenario,
            f.name(),
            target,
            self.quad,
            eps.to_bits(),
            self.quad.seed
        );
        h.update(text.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn cache_path(&self, key: &str) -> Option<PathBuf> {
        self.cache_dir.as_ref().map(|d| d.join(format!("{key}.csv")))
    }

    /// Evaluates (or loads) one cell and records its row.
    pub fn eval(&self, f: Functional, target_id: &str, target: &Target, eps: f64) -> Result<ResultRow, HarnessError> {
        let eps = if f.eps_independent() { 0.0 } else { eps };
        let key = self.cache_key(f, target, eps);
        if let Some(p) = self.cache_path(&key) {
            if let Ok(text) = std::fs::read_to_string(&p) {
                if let Some(mut row) = ResultRow::from_csv(&text) {
                    row.scenario_id = self.scenario_id.clone();
                    row.observable_id = target_id.into();
                    self.rows.lock().unwrap().push(row.clone());
                    return Ok(row);
                }
            }
        }
        let t0 = Instant::now();
        let res = compute_cell(&self.scenario, &self.quad, f, target, eps);
        let wall_ms = t0.elapsed().as_millis() as u64;
        match res {
            Ok((value, error, n_samples)) => {
                let row = ResultRow {
                    scenario_id: self.scenario_id.clone(),
                    epsilon: eps,
                    functional: f.name().into(),
                    observable_id: target_id.into(),
                    value_re: value.re,
                    value_im: value.im,
                    error,
                    n_samples,
                    seed: self.quad.seed,
                    wall_ms,
                };
                if let Some(p) = self.cache_path(&key) {
                    if let Some(dir) = p.parent() {
                        std::fs::create_dir_all(dir)?;
                    }
                    std::fs::write(&p, row.to_csv())?;
                }
                self.rows.lock().unwrap().push(row.clone());
                Ok(row)
            }
            Err(message) => {
                self.failures.lock().unwrap().push(CellFailure {
                    functional: f.name().into(),
                    observable_id: target_id.into(),
                    epsilon: eps,
                    message: message.clone(),
                });
                Err(HarnessError::Cell { functional: f.name().into(), observable: target_id.into(), eps, message })
            }
        }
    }

    /// Cells along the grid, evaluated in parallel, as a sweep series.
    pub fn sweep(&self, f: Functional, target_id: &str, target: &Target, grid: &[f64]) -> Result<SweepSeries, HarnessError> {
        let rows: Vec<Result<ResultRow, HarnessError>> = grid.par_iter().map(|&e| self.eval(f, target_id, target, e)).collect();
        let mut points = vec![];
        for (r, &eps) in rows.into_iter().zip(grid) {
            let r = r?;
            points.push(SweepPoint { eps, value: r.value(), error: r.error });
        }
        SweepSeries::new(f.name(), &self.scenario_id, points).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Rows in canonical order, one per distinct cell.
    pub fn rows(&self) -> Vec<ResultRow> {
        let mut rows = self.rows.lock().unwrap().clone();
        rows.sort_by_key(|r| r.sort_key());
        rows.dedup_by(|a, b| a.sort_key() == b.sort_key());
        rows
    }

    pub fn failures(&self) -> Vec<CellFailure> {
        let mut f = self.failures.lock().unwrap().clone();
        f.sort_by(|a, b| (&a.functional, &a.observable_id).cmp(&(&b.functional, &b.observable_id)).then(b.epsilon.total_cmp(&a.epsilon)));
        f
    }
}

fn compute_cell(s: &Scenario, quad: &PairingQuad, f: Functional, target: &Target, eps: f64) -> Result<(C64, f64, u64), String> {
    let obs = || match target {
        Target::Observable(a) => Ok(a),
        _ => Err(format!("{} needs an observable", f.name())),
    };
    let e = |x: &dyn std::fmt::Display| x.to_string();
    match f {
        Functional::SourceTerm => {
            let r = source_term_pairing(s, eps, 0, obs()?, quad).map_err(|x| e(&x))?;
            Ok((r.value, r.error, r.budget))
        }
        Functional::SourceLimit => {
            let v = source_limit(s, 0, obs()?).map_err(|x| e(&x))?;
            Ok((v, 1e-12 * v.norm(), 0))
        }
        Functional::Wigner => {
            let u = solve_full(s, eps);
            let r = wigner_pairing(&u, &u, obs()?, eps, quad).map_err(|x| e(&x))?;
            Ok((r.value, r.error, r.budget))
        }
        Functional::CrossTerm => {
            let r = cross_term(s, eps, obs()?, quad).map_err(|x| e(&x))?;
            Ok((r.value, r.error, r.budget))
        }
        Functional::Mu => {
            let r = RayMeasure::from_scenario(s).mu_pairing(obs()?).map_err(|x| e(&x))?;
            Ok((r.value, r.error, 0))
        }
        Functional::TransportResidual => {
            let r = transport_identity_residual(s, eps, obs()?, quad).map_err(|x| e(&x))?;
            Ok((C64::new(r.residual, 0.0), r.error, 0))
        }
        Functional::AEpsPairing => {
            let Target::Field(v) = target else { return Err("a_eps_pairing needs a test field".into()) };
            let sol = solve_shifted_only(s, eps);
            let p = pairing(&sol, v).map_err(|x| e(&x))?;
            Ok((p, 1e-12 * p.norm(), 0))
        }
        Functional::BstarRatio => {
            let rd = RingDecomposition::new(14);
            let q = NormQuad::default();
            let b = b_norm(&s.s0, &RingDecomposition::default(), &q).map_err(|x| e(&x))?.value
                + b_norm(&s.s1, &RingDecomposition::default(), &q).map_err(|x| e(&x))?.value;
            let w = solve_rescaled(s, eps, 0);
            let coarse = bstar_norm(&w, &rd, &q).map_err(|x| e(&x))?;
            let fine = bstar_norm(&w, &rd, &q.refined()).map_err(|x| e(&x))?;
            Ok((C64::new(fine.value / b, 0.0), (fine.value - coarse.value).abs() / b, 0))
        }
        Functional::LemmaL => {
            let w = FieldExpr::unit_gaussian(vec![0.0]);
            let r = lemma_l_integral(&w, 0.5, eps, s.gamma, 1.0).map_err(|x| e(&x))?;
            Ok((r.value, r.error, 0))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub status: Status,
    pub summary: String,
    pub metrics: BTreeMap<String, f64>,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        format!("[{tag}] criterion {:>2} {}: {}", self.id, self.name, self.summary)
    }
}

/// Rate fit of one swept (functional, target) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    pub functional: String,
    pub observable_id: String,
    pub fit: Option<RateFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario_id: String,
    pub criteria: Vec<CriterionOutcome>,
    pub fits: Vec<SeriesFit>,
    pub failures: Vec<CellFailure>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.status != Status::Fail) && self.failures.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub report: Report,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub jobs: Option<usize>,
    pub use_cache: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: None, use_cache: true }
    }
}

/// Runs every (functional × target × ε) cell and the requested criteria.
pub use rayon::ThreadPool;

/// Pool with `n` workers (at least one).
pub fn thread_pool(n: usize) -> Result<ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().map_err(|e| HarnessError::Config(e.to_string()))
}

pub fn run(spec: &ExperimentSpec, opts: &RunOptions) -> Result<RunOutput, HarnessError> {
    let r = spec.resolve()?;
    let cache = (opts.use_cache && spec.output.cache).then(|| spec.output.dir.join("cache"));
    let runner = CellRunner::new(r.scenario.clone(), &spec.scenario.id, spec.quad.pairing_quad(), cache);
    let body = || -> Result<RunOutput, HarnessError> {
        let mut fits = vec![];
        for &f in &r.functionals {
            let targets: Vec<(String, Target)> = match f.target() {
                TargetKind::Observable => r.sweep_observables().map(|(id, a)| (id, Target::Observable(a))).collect(),
                TargetKind::Field => r.sweep_fields().map(|(id, v)| (id, Target::Field(v))).collect(),
                TargetKind::None => vec![("none".to_string(), Target::None)],
            };
            for (id, t) in targets {
                let grid: Vec<f64> = if f.eps_independent() { vec![1.0] } else { r.epsilons.clone() };
                if let Ok(series) = runner.sweep(f, &id, &t, &grid) {
                    let fit = if f.eps_independent() { None } else { rate_fit(&series, None).ok() };
                    fits.push(SeriesFit { functional: f.name().into(), observable_id: id, fit });
                }
            }
        }
        let criteria = criteria::evaluate(&runner, &r.spec.sweep.criteria);
        let report = Report { scenario_id: spec.scenario.id.clone(), criteria, fits, failures: runner.failures() };
        Ok(RunOutput { rows: runner.rows(), report })
    };
    match opts.jobs {
        Some(n) => thread_pool(n)?.install(body),
        None => body(),
    }
}

impl ResolvedSpec {
    fn sweep_observables(&self) -> impl Iterator<Item = (String, Observable)> + '_ {
        self.spec.sweep.observables.iter().map(|id| (id.clone(), self.observables[id].clone()))
    }

    fn sweep_fields(&self) -> impl Iterator<Item = (String, FieldExpr)> + '_ {
        self.spec.sweep.test_fields.iter().map(|id| (id.clone(), self.test_fields[id].clone()))
    }

    /// Targets of `f` by id: the named ones, or every declared one when
    /// `ids` is empty.
    pub fn targets(&self, f: Functional, ids: &[String]) -> Result<Vec<(String, Target)>, HarnessError> {
        let pick = |known: Vec<&String>| -> Result<Vec<String>, HarnessError> {
            if ids.is_empty() {
                return Ok(known.into_iter().cloned().collect());
            }
            ids.iter()
                .map(|id| if known.contains(&id) { Ok(id.clone()) } else { Err(HarnessError::Config(format!("unknown id {id} for {}", f.name()))) })
                .collect()
        };
        Ok(match f.target() {
            TargetKind::Observable => pick(self.observables.keys().collect())?.into_iter().map(|id| (id.clone(), Target::Observable(self.observables[&id].clone()))).collect(),
            TargetKind::Field => pick(self.test_fields.keys().collect())?.into_iter().map(|id| (id.clone(), Target::Field(self.test_fields[&id].clone()))).collect(),
            TargetKind::None => vec![("none".to_string(), Target::None)],
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    JsonReport,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json-report" => Ok(Self::JsonReport),
            _ => Err(format!("unknown format {s}; expected csv or json-report")),
        }
    }
}

pub fn export(out: &RunOutput, format: ExportFormat, path: &Path) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let text = match format {
        ExportFormat::Csv => rows_to_csv(&out.rows),
        ExportFormat::JsonReport => out.report.to_json(),
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// Named suite of criteria, run without user-defined sweeps.
pub fn verify(suite: &str, opts: &RunOptions, cache_dir: Option<PathBuf>) -> Result<Report, HarnessError> {
    let ids = criteria::suite(suite).ok_or_else(|| HarnessError::Config(format!("unknown suite {suite}")))?;
    let s = Scenario::reference();
    let runner = CellRunner::new(s, "reference", PairingQuad::default(), if opts.use_cache { cache_dir } else { None });
    let body = || criteria::evaluate(&runner, &ids);
    let criteria = match opts.jobs {
        Some(n) => thread_pool(n)?.install(body),
        None => body(),
    };
    Ok(Report { scenario_id: "reference".into(), criteria, fits: vec![], failures: runner.failures() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("semilab-harness-{name}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&d);
        d
    }

    fn small_spec(dir: &Path) -> ExperimentSpec {
        let text = format!(
            r#"
[scenario]
id = "reference"
d = 3
epsilons = [0.4, 0.2, 0.1, 0.05]
gamma = 1.0
q1 = [2.0, 0.0, 0.0]
N = 2.1
S0 = [{{ amplitude_re = 1.0, center = [0.0, 0.0, 0.0], inv_variance = 1.0, modulation = [0.0, 0.0, 0.0] }}]
S1 = [{{ amplitude_re = 1.0, center = [2.0, 0.0, 0.0], inv_variance = 1.0, modulation = [0.0, 0.0, 0.0] }}]

[[observables]]
id = "near0"
phi = [{{ amplitude_re = 1.0, center = [0.5, 0.5, 0.0], inv_variance = 1.0, modulation = [0.0, 0.0, 0.0] }}]
psi = [{{ amplitude_re = 1.0, center = [-0.7, -0.7, 0.0], inv_variance = 2.0, modulation = [0.0, 0.0, 0.0] }}]

[[test_fields]]
id = "v1"
atoms = [{{ amplitude_re = 1.0, center = [1.0, 0.0, 0.0], inv_variance = 1.0, modulation = [0.0, 0.0, 0.0] }}]

[sweep]
functionals = ["source_term", "mu", "a_eps_pairing", "lemma_l"]
observables = ["near0"]
test_fields = ["v1"]

[output]
dir = "{}"
"#,
            dir.display()
        );
        ExperimentSpec::from_toml(&text).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let r = ResultRow {
            scenario_id: "s".into(),
            epsilon: 0.025,
            functional: "wigner".into(),
            observable_id: "a".into(),
            value_re: 0.1 + 0.2,
            value_im: -1.0 / 3.0,
            error: 1e-300,
            n_samples: 7,
            seed: 3,
            wall_ms: 12,
        };
        let back = ResultRow::from_csv(&r.to_csv()).unwrap();
        assert_eq!(back, r);
        assert_eq!(rows_from_csv(&rows_to_csv(&[r.clone()])).unwrap(), vec![r]);
    }

    #[test]
    fn empty_sweep_passes_trivially() {
        let mut spec = ExperimentSpec::reference();
        spec.output.cache = false;
        let out = run(&spec, &RunOptions::default()).unwrap();
        assert!(out.rows.is_empty());
        assert!(out.report.all_passed());
        let ids: Vec<u8> = out.report.criteria.iter().map(|c| c.id).collect();
        assert_eq!(ids, criteria::IDS.to_vec());
        assert!(out.report.criteria.iter().all(|c| c.status == Status::Skipped));
    }

    #[test]
    fn rerun_is_byte_identical_and_cache_is_exact() {
        let dir = tmp("rerun");
        let spec = small_spec(&dir);
        let a = run(&spec, &RunOptions::default()).unwrap();
        let b = run(&spec, &RunOptions { jobs: Some(2), use_cache: true }).unwrap();
        assert_eq!(rows_to_csv(&a.rows), rows_to_csv(&b.rows));
        let c = run(&spec, &RunOptions { jobs: Some(3), use_cache: false }).unwrap();
        assert_eq!(a.rows.len(), c.rows.len());
        for (x, y) in a.rows.iter().zip(&c.rows) {
            assert_eq!((x.value_re.to_bits(), x.value_im.to_bits(), x.error.to_bits()), (y.value_re.to_bits(), y.value_im.to_bits(), y.error.to_bits()));
        }
        // 4 source_term + 1 mu + 4 a_eps + 4 lemma_l
        assert_eq!(a.rows.len(), 13);
        assert!(a.report.fits.iter().any(|f| f.functional == "a_eps_pairing" && f.fit.is_some()));
        let p = dir.join("rows.csv");
        export(&a, ExportFormat::Csv, &p).unwrap();
        assert_eq!(rows_from_csv(&std::fs::read_to_string(&p).unwrap()).unwrap(), a.rows);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn rows_are_canonically_ordered() {
        let dir = tmp("order");
        let mut spec = small_spec(&dir);
        spec.output.cache = false;
        let out = run(&spec, &RunOptions { jobs: Some(4), use_cache: false }).unwrap();
        let keys: Vec<_> = out.rows.iter().map(|r| r.sort_key()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(out.rows.iter().all(|r| r.error >= 0.0));
    }

    #[test]
    fn config_errors_are_reported() {
        let dir = tmp("bad");
        let mut spec = small_spec(&dir);
        spec.sweep.functionals.push("nonsense".into());
        assert!(matches!(spec.resolve(), Err(HarnessError::Config(_))));
        let mut spec = small_spec(&dir);
        spec.sweep.observables.push("missing".into());
        assert!(spec.resolve().is_err());
        let mut spec = small_spec(&dir);
        spec.sweep.epsilons = Some(vec![0.1, 0.2]);
        assert!(spec.resolve().is_err());
        let mut spec = small_spec(&dir);
        spec.sweep.criteria = vec![14];
        assert!(spec.resolve().is_err());
        assert!(ExperimentSpec::from_toml("[scenario]\nid = 1").is_err());
    }

    #[test]
    fn cache_key_depends_on_every_input() {
        let s = Scenario::reference();
        let r = CellRunner::new(s.clone(), "reference", PairingQuad::default(), None);
        let t = Target::None;
        let k = r.cache_key(Functional::LemmaL, &t, 0.1);
        assert_ne!(k, r.cache_key(Functional::LemmaL, &t, 0.05));
        assert_ne!(k, r.cache_key(Functional::BstarRatio, &t, 0.1));
        let r2 = CellRunner::new(s, "reference", PairingQuad { seed: 8, ..PairingQuad::default() }, None);
        assert_ne!(k, r2.cache_key(Functional::LemmaL, &t, 0.1));
        assert_eq!(k.len(), 64);
    }
}
