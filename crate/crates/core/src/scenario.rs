//! Declarative experiments: JSON scenario files, their execution, and the
//! files they produce.
//!
//! Everything is computed in memory before the first write, so a scenario
//! that fails validation leaves no output directory behind.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::algebra::{blocks_from_rows, Element, TracialAlgebra};
use crate::averaging::{AverageRequest, AverageStream, Family};
use crate::convergence::{convergence_probe, fixed_point_oracle, Mode};
use crate::ds::{trace_norm, DsOperator};
use crate::error::{invalid, Error, Result};
use crate::maximal::{buem_probe, search_lp, search_weighted, search_yeadon, verify_certificate, BuemConfig, BuemFamily, MaximalCertificate, Theorem};
use crate::orlicz::{lp_norm, luxemburg_norm, OrliczFunction};
use crate::random::{mix64, random_element, random_positive, random_root_unitary, random_self_adjoint, random_unitary, seeded_rng, ExperimentRng, RNG_ALGORITHM};
use crate::report::{csv_string, svg_line_plot, write_atomic};
use crate::subseq::{Subsequence, SubsequenceSpec};
use crate::weights::{WeightSequence, WeightSpec};

pub const SPEC_VERSION: u32 = 1;
pub const SEED_ENV: &str = "ERGOLAB_SEED";

type Rows = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    AverageTrace,
    MaximalSearch,
    BuemProbe,
    Convergence,
    NormTable,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::AverageTrace => "average-trace",
            Experiment::MaximalSearch => "maximal-search",
            Experiment::BuemProbe => "buem-probe",
            Experiment::Convergence => "convergence",
            Experiment::NormTable => "norm-table",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    pub dims: Vec<usize>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixComponent {
    pub p: f64,
    pub operator: OperatorSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorSpec {
    #[default]
    Identity,
    /// `x ↦ u* x u` for an explicit unitary.
    Unitary { blocks: Vec<Rows> },
    /// `x ↦ Σ K x K*`.
    Kraus { operators: Vec<Vec<Rows>> },
    Permutation { perm: Vec<usize> },
    Mix { components: Vec<MixComponent> },
    /// Conjugation by a seeded unitary: Haar, or with spectrum in the
    /// `order`-th roots of unity.
    RandomUnitary {
        #[serde(default)]
        order: Option<u32>,
    },
    /// `p·id + (1 − p)·conj(u)` with `u` as in `random-unitary`.
    RandomMixture {
        p: f64,
        #[serde(default)]
        order: Option<u32>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomKind {
    Positive,
    SelfAdjoint,
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementSpec {
    Explicit {
        blocks: Vec<Rows>,
    },
    Random {
        random: RandomKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    #[default]
    Bilateral,
    OneSided,
}

fn default_horizon() -> usize {
    64
}
fn default_eps() -> Vec<f64> {
    vec![1.0]
}
fn default_one() -> usize {
    1
}
fn default_p() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    0.05
}
fn default_schedule() -> Vec<usize> {
    vec![64, 256, 1024]
}
fn default_gammas() -> Vec<f64> {
    vec![1e-2, 1e-4, 1e-6]
}
fn default_samples() -> usize {
    50
}
fn default_min_success() -> f64 {
    0.95
}
fn default_phis() -> Vec<String> {
    ["p:1", "p:2", "p:3", "expm1"].map(String::from).to_vec()
}

/// Experiment parameters; each experiment reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Independent random elements drawn in turn from the scenario stream.
    #[serde(default = "default_one")]
    pub instances: usize,
    #[serde(default = "default_theorem")]
    pub theorem: Theorem,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Multiply each `ε` by `‖x‖_p / τ(1)^{1/p}`.
    #[serde(default)]
    pub relative_eps: bool,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_min_success")]
    pub min_success: f64,
    /// Trace budget for convergence witnesses and b.u.e.m. projections.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Target for `sup ‖e A_n e‖` in the b.u.e.m. probe.
    #[serde(default)]
    pub target: Option<f64>,
    #[serde(default = "default_schedule")]
    pub schedule: Vec<usize>,
    #[serde(default)]
    pub mode: ModeSpec,
    #[serde(default)]
    pub svg: bool,
    #[serde(default = "default_gammas")]
    pub gamma_grid: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_phis")]
    pub phis: Vec<String>,
}

fn default_theorem() -> Theorem {
    Theorem::Yeadon
}

impl Default for Params {
    fn default() -> Self {
        serde_json::from_value(json!({})).expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub spec_version: u32,
    pub id: String,
    pub experiment: Experiment,
    pub seed: u64,
    pub algebra: AlgebraSpec,
    #[serde(default)]
    pub operator: OperatorSpec,
    #[serde(default)]
    pub element: Option<ElementSpec>,
    #[serde(default)]
    pub left_weights: Option<WeightSpec>,
    #[serde(default)]
    pub right_weights: Option<WeightSpec>,
    #[serde(default)]
    pub subsequence: Option<SubsequenceSpec>,
    #[serde(default)]
    pub phi: Option<String>,
    #[serde(default)]
    pub params: Params,
}

impl Scenario {
    /// Parses and checks the schema version; errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if s.spec_version != SPEC_VERSION {
            return Err(Error::Parse(format!("unsupported spec_version {} (expected {SPEC_VERSION})", s.spec_version)));
        }
        if s.id.is_empty() || s.id.contains(['/', '\\']) || s.id.starts_with('.') {
            return Err(Error::Parse(format!("id {:?} is not usable as a directory name", s.id)));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Builds every object the experiment needs; `seed` replaces the file's.
    pub fn prepare(&self, seed: Option<u64>) -> Result<Prepared> {
        let seed = seed.unwrap_or(self.seed);
        let algebra = TracialAlgebra::new(self.algebra.dims.clone(), self.algebra.weights.clone())?;
        let mut rng = seeded_rng(seed);
        let operator = Arc::new(build_operator(&self.operator, &algebra, &mut rng)?);
        operator.verify_ds(8, 1e-9, mix64(seed ^ 0x5eed))?;
        let weight_seed = mix64(seed.wrapping_add(1));
        let left = self.left_weights.as_ref().map(|w| w.build(&algebra, weight_seed)).transpose()?;
        let right = self.right_weights.as_ref().map(|w| w.build(&algebra, mix64(weight_seed))).transpose()?;
        let subsequence = self.subsequence.clone().map(Subsequence::new).transpose()?;
        let phi = OrliczFunction::parse(self.phi.as_deref().unwrap_or("p:2"))?;
        let p = &self.params;
        if p.horizon == 0 || p.instances == 0 {
            return invalid("horizon and instances must be ≥ 1");
        }
        if p.eps.is_empty() || p.eps.iter().any(|e| !(*e > 0.0)) {
            return invalid("eps must be a nonempty list of positive numbers");
        }
        let default_kind = match (self.experiment, p.theorem) {
            (Experiment::MaximalSearch, Theorem::Yeadon | Theorem::Lp) => RandomKind::Positive,
            _ => RandomKind::General,
        };
        let spec = self.element.clone().unwrap_or(ElementSpec::Random { random: default_kind });
        let elements = (0..p.instances).map(|_| build_element(&spec, &algebra, &mut rng)).collect::<Result<Vec<_>>>()?;
        Ok(Prepared { scenario: self.clone(), seed, operator, left, right, subsequence, phi, elements })
    }
}

fn build_operator(spec: &OperatorSpec, algebra: &Arc<TracialAlgebra>, rng: &mut ExperimentRng) -> Result<DsOperator> {
    match spec {
        OperatorSpec::Identity => Ok(DsOperator::identity(algebra)),
        OperatorSpec::Unitary { blocks } => DsOperator::from_unitary(&blocks_from_rows(algebra, blocks)?),
        OperatorSpec::Kraus { operators } => {
            let ops = operators.iter().map(|k| blocks_from_rows(algebra, k)).collect::<Result<Vec<_>>>()?;
            DsOperator::from_kraus(&ops)
        }
        OperatorSpec::Permutation { perm } => DsOperator::from_permutation(algebra, perm.clone()),
        OperatorSpec::Mix { components } => {
            let parts = components
                .iter()
                .map(|c| Ok((c.p, build_operator(&c.operator, algebra, rng)?)))
                .collect::<Result<Vec<_>>>()?;
            DsOperator::mix(parts)
        }
        OperatorSpec::RandomUnitary { order } => DsOperator::from_unitary(&seeded_unitary(algebra, rng, *order)),
        OperatorSpec::RandomMixture { p, order } => {
            let conj = DsOperator::from_unitary(&seeded_unitary(algebra, rng, *order))?;
            DsOperator::mix(vec![(*p, DsOperator::identity(algebra)), (1.0 - p, conj)])
        }
    }
}

fn seeded_unitary(algebra: &Arc<TracialAlgebra>, rng: &mut ExperimentRng, order: Option<u32>) -> Element {
    match order {
        Some(k) => random_root_unitary(rng, algebra, k),
        None => random_unitary(rng, algebra),
    }
}

fn build_element(spec: &ElementSpec, algebra: &Arc<TracialAlgebra>, rng: &mut ExperimentRng) -> Result<Element> {
    Ok(match spec {
        ElementSpec::Explicit { blocks } => blocks_from_rows(algebra, blocks)?,
        ElementSpec::Random { random: RandomKind::Positive } => random_positive(rng, algebra),
        ElementSpec::Random { random: RandomKind::SelfAdjoint } => random_self_adjoint(rng, algebra),
        ElementSpec::Random { random: RandomKind::General } => random_element(rng, algebra),
    })
}

/// A validated scenario with its random objects drawn.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub seed: u64,
    pub operator: Arc<DsOperator>,
    pub left: Option<WeightSequence>,
    pub right: Option<WeightSequence>,
    pub subsequence: Option<Subsequence>,
    pub phi: OrliczFunction,
    pub elements: Vec<Element>,
}

/// One acceptance property checked by an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub property: String,
    pub passed: bool,
    pub detail: String,
}

fn property(name: &str, passed: bool, detail: String) -> PropertyResult {
    PropertyResult { property: name.to_string(), passed, detail }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    /// File name and contents, in write order.
    pub files: Vec<(String, Vec<u8>)>,
    pub properties: Vec<PropertyResult>,
}

impl Outcome {
    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_slice())
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

impl Prepared {
    fn request(&self, x: &Element, n_max: usize) -> Result<AverageRequest> {
        let mut req = AverageRequest::new(self.operator.clone(), x.clone(), n_max)?;
        if let Some(b) = &self.left {
            req = req.with_left(b.clone());
        }
        if let Some(d) = &self.right {
            req = req.with_right(d.clone());
        }
        if let Some(k) = &self.subsequence {
            req = req.with_subsequence(k.clone());
        }
        Ok(req)
    }

    fn bound(&self) -> f64 {
        self.left.as_ref().map_or(1.0, |b| b.bound()) * self.right.as_ref().map_or(1.0, |d| d.bound())
    }

    pub fn execute(&self) -> Result<Outcome> {
        match self.scenario.experiment {
            Experiment::AverageTrace => self.average_trace(),
            Experiment::MaximalSearch => self.maximal_search(),
            Experiment::BuemProbe => self.buem(),
            Experiment::Convergence => self.convergence(),
            Experiment::NormTable => self.norm_table(),
        }
    }

    fn average_trace(&self) -> Result<Outcome> {
        let p = &self.scenario.params;
        let c = self.bound();
        let mut rows = Vec::new();
        let mut worst = 0.0f64;
        for (i, x) in self.elements.iter().enumerate() {
            let req = self.request(x, p.horizon)?;
            let family = if req.subsequence.is_some() { Family::Subsequential } else { Family::Plain };
            let x_norm = luxemburg_norm(x, &self.phi, 1e-12)?;
            let mut stream = AverageStream::new(&req, family)?;
            for n in 1..=p.horizon {
                let a = stream.next_average()?;
                let norm = luxemburg_norm(&a, &self.phi, 1e-12)?;
                worst = worst.max(norm - c * x_norm * (1.0 + 1e-9));
                let tr = a.trace();
                rows.push(vec![i.to_string(), n.to_string(), fmt(tr.re), fmt(tr.im), fmt(a.operator_norm()), fmt(norm)]);
            }
        }
        let csv = csv_string(&["instance", "n", "trace_re", "trace_im", "norm_inf", "norm_phi"], &rows);
        Ok(Outcome {
            files: vec![("average_trace.csv".into(), csv.into_bytes())],
            properties: vec![property(
                "orlicz-norm-bound",
                worst <= 1e-12,
                format!("max excess of ‖A_n‖_Φ over C‖x‖_Φ: {worst:.3e}"),
            )],
        })
    }

    fn maximal_search(&self) -> Result<Outcome> {
        let p = &self.scenario.params;
        let t = &self.operator;
        let weights = match p.theorem {
            Theorem::Weighted => Some(self.left.clone().unwrap_or_else(WeightSequence::identity)),
            _ => None,
        };
        let mut rows = Vec::new();
        let mut records = Vec::new();
        let (mut attempts, mut found, mut invalid_returned) = (0usize, 0usize, 0usize);
        for (i, x) in self.elements.iter().enumerate() {
            let scale = if p.relative_eps {
                let q = if p.theorem == Theorem::Yeadon { 1.0 } else { p.p };
                lp_norm(x, q)? / x.algebra().unit_trace().powf(1.0 / q)
            } else {
                1.0
            };
            for &eps in &p.eps {
                let eps = eps * scale;
                if !(eps > 0.0) {
                    return Err(Error::Precondition(format!("instance {i} has zero norm; relative ε vanishes")));
                }
                attempts += 1;
                let result = match p.theorem {
                    Theorem::Yeadon => search_yeadon(t, x, eps, p.horizon),
                    Theorem::Lp => search_lp(t, x, p.p, eps, p.horizon),
                    Theorem::Weighted => search_weighted(t, weights.as_ref().expect("set above"), x, p.p, eps, p.horizon),
                };
                let (cert, returned) = match result {
                    Ok(c) => (c, true),
                    Err(Error::SearchExhausted { best }) => (*best, false),
                    Err(e) => return Err(e),
                };
                let ok = returned && recheck(&cert, t, weights.as_ref(), x)?;
                if returned {
                    found += 1;
                    if !ok {
                        invalid_returned += 1;
                    }
                    let mut rec = serde_json::to_value(cert.to_record())?;
                    rec["instance"] = json!(i);
                    records.push(rec);
                }
                rows.push(vec![
                    i.to_string(),
                    fmt(eps),
                    fmt(cert.trace_defect),
                    fmt(cert.paper_bound_trace),
                    fmt(cert.achieved_sup),
                    fmt(cert.paper_bound_sup),
                    ok.to_string(),
                ]);
            }
        }
        let rate = found as f64 / attempts as f64;
        let csv = csv_string(&["instance", "eps", "trace_defect", "trace_bound", "sup", "sup_bound", "valid"], &rows);
        let certs = serde_json::to_vec_pretty(&records)?;
        Ok(Outcome {
            files: vec![("maximal_summary.csv".into(), csv.into_bytes()), ("certificates.json".into(), certs)],
            properties: vec![
                property(
                    "certificates-valid",
                    invalid_returned == 0,
                    format!("{invalid_returned} of {found} returned certificates failed re-verification"),
                ),
                property("success-rate", rate >= p.min_success, format!("{found}/{attempts} = {rate:.3}")),
            ],
        })
    }

    fn buem(&self) -> Result<Outcome> {
        let p = &self.scenario.params;
        let family = BuemFamily {
            operator: self.operator.clone(),
            weights: self.left.clone().unwrap_or_else(WeightSequence::identity),
            subsequence: self.subsequence.clone(),
        };
        let cfg = BuemConfig {
            eps: p.delta,
            delta: p.target.unwrap_or(0.1),
            gamma_grid: p.gamma_grid.clone(),
            horizon: p.horizon,
            samples: p.samples,
            seed: mix64(self.seed ^ 0xb0e5),
        };
        let report = buem_probe(&family, &self.phi, &cfg)?;
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| vec![fmt(r.gamma), r.successes.to_string(), r.samples.to_string(), fmt(r.rate), fmt(r.worst_sup)])
            .collect();
        let last = report.rows.last().expect("nonempty grid");
        Ok(Outcome {
            files: vec![(
                "buem_probe.csv".into(),
                csv_string(&["gamma", "successes", "samples", "rate", "worst_sup"], &rows).into_bytes(),
            )],
            properties: vec![
                property("full-success-at-smallest-gamma", last.rate == 1.0, format!("rate {} at γ = {}", last.rate, last.gamma)),
                property("monotone-in-gamma", report.monotone, "success rate along decreasing γ".into()),
            ],
        })
    }

    fn convergence(&self) -> Result<Outcome> {
        let p = &self.scenario.params;
        let mode = match p.mode {
            ModeSpec::Bilateral => Mode::Bilateral,
            ModeSpec::OneSided => Mode::OneSided,
        };
        let mut rows = Vec::new();
        let mut props = Vec::new();
        let mut svg = None;
        let plain = self.left.is_none() && self.right.is_none() && self.subsequence.is_none();
        let (mut halved, mut budget, mut norm_ok, mut violations, mut oracle_ok) = (true, true, true, 0usize, true);
        let mut oracle_worst = 0.0f64;
        for (i, x) in self.elements.iter().enumerate() {
            let req = self.request(x, 1)?;
            let r = convergence_probe(&req, &self.phi, p.delta, &p.schedule, mode)?;
            for row in r.rows() {
                rows.push(vec![i.to_string(), row.horizon.to_string(), fmt(row.gap), fmt(r.witness_trace)]);
            }
            halved &= r.halved();
            budget &= r.witness_trace < p.delta;
            norm_ok &= r.limit_norm_ok();
            violations = violations.max(r.monotonicity_violations());
            if plain {
                let oracle = fixed_point_oracle(&self.operator, x)?;
                let n = r.averages.len();
                let defect = r.averages[n - 1].distance(&oracle);
                oracle_worst = oracle_worst.max(defect * n as f64 / x.operator_norm().max(f64::MIN_POSITIVE));
                oracle_ok &= defect <= 10.0 * x.operator_norm() / n as f64;
            }
            if p.svg && i == 0 {
                let pts: Vec<(f64, f64)> = r.rows().iter().map(|g| (g.horizon as f64, g.gap)).collect();
                svg = Some(svg_line_plot(&format!("{} gap ({})", self.scenario.id, mode.label()), &pts));
            }
        }
        props.push(property("gap-halved", halved, "gap at the last horizon ≤ half the first".into()));
        props.push(property("witness-budget", budget, format!("τ(e⊥) < {}", p.delta)));
        props.push(property("limit-norm-bound", norm_ok, "‖x̂‖_Φ ≤ C‖x‖_Φ + 1e-6".into()));
        props.push(property(
            "gap-monotone",
            violations <= 1,
            format!("{violations} increasing step(s) in the worst curve{}", if violations == 1 { " (flagged)" } else { "" }),
        ));
        if plain {
            props.push(property("mean-ergodic-oracle", oracle_ok, format!("max N‖A_N − x̂‖/‖x‖ = {oracle_worst:.3}")));
        }
        let mut files = vec![(
            "convergence.csv".to_string(),
            csv_string(&["instance", "N", "gap", "trace_defect"], &rows).into_bytes(),
        )];
        if let Some(s) = svg {
            files.push(("convergence.svg".into(), s.into_bytes()));
        }
        Ok(Outcome { files, properties: props })
    }

    fn norm_table(&self) -> Result<Outcome> {
        let phis = self.scenario.params.phis.iter().map(|s| OrliczFunction::parse(s)).collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        let mut worst = 0.0f64;
        for (i, x) in self.elements.iter().enumerate() {
            for phi in &phis {
                let norm = luxemburg_norm(x, phi, 1e-13)?;
                let closed = phi.name().strip_prefix("p:").and_then(|r| r.parse::<f64>().ok()).map(|q| {
                    let c = lp_norm(x, q).expect("q ≥ 1 after parse") * q.powf(-1.0 / q);
                    worst = worst.max((norm - c).abs() / c.max(f64::MIN_POSITIVE));
                    c
                });
                rows.push(vec![i.to_string(), phi.name().to_string(), fmt(norm), closed.map_or(String::new(), fmt)]);
            }
            rows.push(vec![i.to_string(), "trace".into(), fmt(trace_norm(x)), fmt(trace_norm(x))]);
            rows.push(vec![i.to_string(), "operator".into(), fmt(x.operator_norm()), fmt(x.operator_norm())]);
        }
        Ok(Outcome {
            files: vec![("norm_table.csv".into(), csv_string(&["instance", "phi", "norm", "closed_form"], &rows).into_bytes())],
            properties: vec![property("closed-form", worst <= 1e-8, format!("max relative defect {worst:.3e}"))],
        })
    }
}

/// Reload from JSON and check with the independent verifier.
fn recheck(cert: &MaximalCertificate, t: &DsOperator, w: Option<&WeightSequence>, x: &Element) -> Result<bool> {
    let text = serde_json::to_string(&cert.to_record())?;
    let back = MaximalCertificate::from_record(serde_json::from_str(&text)?)?;
    let v = verify_certificate(&back, t, w, x)?;
    Ok(v.valid && v.consistent)
}

/// Exit status for an error raised while running a scenario.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse(_) | Error::Json(_) | Error::InvalidArgument(_) | Error::AlgebraMismatch => 2,
        Error::Hypothesis(_) | Error::Precondition(_) | Error::CertificationFailure { .. } => 3,
        _ => 1,
    }
}

/// Seed from `ERGOLAB_SEED`, if set.
pub fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| Error::Parse(format!("{SEED_ENV}={s:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub properties: Vec<PropertyResult>,
}

/// Parses, prepares and executes, then writes the outputs and a manifest
/// into `out`.
pub fn run_scenario(path: &Path, out: &Path, seed: Option<u64>) -> Result<RunReport> {
    let started = Instant::now();
    let scenario = Scenario::load(path)?;
    let prepared = scenario.prepare(seed)?;
    let outcome = prepared.execute()?;
    write_outcome(&prepared, &outcome, out, started)?;
    Ok(RunReport { dir: out.to_path_buf(), properties: outcome.properties })
}

pub fn write_outcome(prepared: &Prepared, outcome: &Outcome, out: &Path, started: Instant) -> Result<()> {
    fs::create_dir_all(out)?;
    for (name, bytes) in &outcome.files {
        write_atomic(&out.join(name), bytes)?;
    }
    let manifest = json!({
        "scenario": prepared.scenario,
        "seed": prepared.seed,
        "library": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "rng_algorithm": RNG_ALGORITHM,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "outputs": outcome.files.iter().map(|f| f.0.clone()).collect::<Vec<_>>(),
        "properties": outcome.properties,
    });
    write_atomic(&out.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    pub scenario_id: String,
    pub experiment: String,
    pub property: String,
    pub status: String,
    pub detail: String,
}

/// Scenario files (`*.json`) of a directory in name order.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json") && p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

fn suite_entry(path: &Path, out: &Path, seed: Option<u64>) -> Vec<SuiteRow> {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let run = || -> Result<(Scenario, Vec<PropertyResult>)> {
        let scenario = Scenario::load(path)?;
        let report = run_scenario(path, &out.join(&scenario.id), seed)?;
        Ok((scenario, report.properties))
    };
    let failure = |detail: String| {
        vec![SuiteRow {
            scenario_id: stem.clone(),
            experiment: String::new(),
            property: "run".into(),
            status: "fail".into(),
            detail,
        }]
    };
    match catch_unwind(AssertUnwindSafe(run)) {
        Ok(Ok((s, props))) => props
            .into_iter()
            .map(|p| SuiteRow {
                scenario_id: s.id.clone(),
                experiment: s.experiment.name().into(),
                property: p.property,
                status: if p.passed { "pass" } else { "fail" }.into(),
                detail: p.detail,
            })
            .collect(),
        Ok(Err(e)) => failure(e.to_string()),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            failure(format!("crashed: {msg}"))
        }
    }
}

/// Runs every scenario in `dir` on `jobs` threads and writes
/// `suite_summary.csv` into `out`.
pub fn run_suite(dir: &Path, out: &Path, jobs: usize, seed: Option<u64>) -> Result<Vec<SuiteRow>> {
    let files = scenario_files(dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let per_file: Vec<Vec<SuiteRow>> = pool.install(|| {
        use rayon::prelude::*;
        files.par_iter().map(|f| suite_entry(f, out, seed)).collect()
    });
    let rows: Vec<SuiteRow> = per_file.into_iter().flatten().collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.scenario_id.clone(), r.experiment.clone(), r.property.clone(), r.status.clone(), r.detail.clone()])
        .collect();
    let csv = csv_string(&["scenario_id", "experiment", "property", "status", "detail"], &table);
    fs::create_dir_all(out)?;
    write_atomic(&out.join("suite_summary.csv"), csv.as_bytes())?;
    Ok(rows)
}

/// Rows of the `norms` command: `(name, value)`.
pub fn norm_rows(x: &Element, phis: &[OrliczFunction]) -> Result<Vec<(String, f64)>> {
    let mut rows = Vec::new();
    for phi in phis {
        rows.push((format!("luxemburg[{}]", phi.name()), luxemburg_norm(x, phi, 1e-13)?));
    }
    rows.push(("trace".into(), trace_norm(x)));
    rows.push(("operator".into(), x.operator_norm()));
    let tr = x.trace();
    rows.push(("tau_re".into(), tr.re));
    rows.push(("tau_im".into(), tr.im));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const YEADON: &str = r#"{
        "spec_version": 1, "id": "t", "experiment": "maximal-search", "seed": 3,
        "algebra": {"dims": [2], "weights": [1.0]},
        "element": {"blocks": [[[[4, 0], [0, 0]], [[0, 0], [0.5, 0]]]]},
        "params": {"eps": [1.0], "horizon": 8}
    }"#;

    #[test]
    fn parses_and_runs_a_small_scenario() {
        let s = Scenario::from_json(YEADON).unwrap();
        let out = s.prepare(None).unwrap().execute().unwrap();
        let csv = String::from_utf8(out.file("maximal_summary.csv").unwrap().to_vec()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].ends_with(",true"), "{csv}");
        assert!(out.properties.iter().all(|p| p.passed));
    }

    #[test]
    fn parse_errors_carry_locations() {
        let err = Scenario::from_json("{\n \"spec_version\": 1,\n \"id\": 5 }").unwrap_err();
        assert!(matches!(&err, Error::Parse(m) if m.contains("line 3")), "{err}");
        assert_eq!(exit_code(&err), 2);
        let bad = YEADON.replace("\"spec_version\": 1", "\"spec_version\": 2");
        assert!(matches!(Scenario::from_json(&bad), Err(Error::Parse(_))));
        let unknown = YEADON.replace("\"seed\": 3", "\"seed\": 3, \"colour\": 1");
        assert!(Scenario::from_json(&unknown).is_err());
    }

    #[test]
    fn non_central_weights_are_a_hypothesis_violation() {
        let text = YEADON.replace(
            "\"params\": {",
            "\"left_weights\": {\"kind\": \"general\", \"terms\": 1, \"seed\": 2}, \"params\": {\"theorem\": \"weighted\", \"p\": 2, ",
        );
        let s = Scenario::from_json(&text).unwrap();
        let err = s.prepare(None).unwrap().execute().unwrap_err();
        assert_eq!(exit_code(&err), 3);
        assert!(err.to_string().contains("center"));
    }

    #[test]
    fn seed_override_changes_random_draws() {
        let text = YEADON.replace(r#""element": {"blocks": [[[[4, 0], [0, 0]], [[0, 0], [0.5, 0]]]]}"#, r#""element": {"random": "positive"}"#);
        let s = Scenario::from_json(&text).unwrap();
        let a = s.prepare(None).unwrap().elements[0].clone();
        let b = s.prepare(Some(3)).unwrap().elements[0].clone();
        let c = s.prepare(Some(4)).unwrap().elements[0].clone();
        assert_eq!(a.distance(&b), 0.0);
        assert!(a.distance(&c) > 0.0);
    }
}
