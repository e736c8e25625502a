//! Projection certificates for the maximal inequalities.
//!
//! Each search looks for a projection `e` with a small `τ(e⊥)` such that every
//! compressed average `e A_n e`, `n ≤ N`, is small in operator norm. The
//! searchers are heuristics; [`verify_certificate`] recomputes everything with
//! plain repeated application of `T`, sharing no code with the searchers.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::algebra::{apply_hermitian, hermitian_eigen, Block, Element, ElementLiteral, Projection, TracialAlgebra, C64};
use crate::averaging::{AverageRequest, AverageStream, Family};
use crate::ds::{trace_norm, DsOperator};
use crate::error::{invalid, Error, Result};
use crate::orlicz::{luxemburg_norm, lp_norm, OrliczFunction};
use crate::random::{hashed_unit, random_element, seeded_rng};
use crate::subseq::Subsequence;
use crate::weights::WeightSequence;

/// Relative and absolute slack for rounding when comparing against bounds.
pub const VALIDITY_SLACK: f64 = 1e-12;
/// Total dimension up to which the exhaustive fallback runs.
pub const EXHAUSTIVE_MAX_DIM: usize = 4;

fn within(value: f64, bound: f64) -> bool {
    value <= bound + VALIDITY_SLACK * bound.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theorem {
    Yeadon,
    Lp,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Identity,
    SpectralChain,
    Peeling,
    LevelMeet,
    Exhaustive,
    Zero,
    /// Meet of the projections found for the parts of a split element.
    Meet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub eps: f64,
    pub p: f64,
    pub c: f64,
}

#[derive(Debug, Clone)]
pub struct MaximalCertificate {
    pub theorem: Theorem,
    pub projection: Projection,
    pub trace_defect: f64,
    pub achieved_sup: f64,
    /// Running maximum of `‖e A_n e‖` over `n ≤ N`, for each `N`.
    pub sup_by_horizon: Vec<f64>,
    pub horizon: usize,
    pub paper_bound_trace: f64,
    pub paper_bound_sup: f64,
    pub constants: Constants,
    pub strategy: Strategy,
}

impl MaximalCertificate {
    pub fn is_valid(&self) -> bool {
        within(self.trace_defect, self.paper_bound_trace) && within(self.achieved_sup, self.paper_bound_sup)
    }

    pub fn to_record(&self) -> CertificateRecord {
        CertificateRecord {
            theorem: self.theorem,
            projection: self.projection.element().to_literal(),
            trace_defect: self.trace_defect,
            achieved_sup: self.achieved_sup,
            sup_by_horizon: self.sup_by_horizon.clone(),
            horizon: self.horizon,
            paper_bound_trace: self.paper_bound_trace,
            paper_bound_sup: self.paper_bound_sup,
            constants: self.constants,
            strategy: self.strategy,
            valid: self.is_valid(),
        }
    }

    pub fn from_record(r: CertificateRecord) -> Result<Self> {
        let e = Projection::new(r.projection.into_element()?, 1e-8)?;
        Ok(Self {
            theorem: r.theorem,
            projection: e,
            trace_defect: r.trace_defect,
            achieved_sup: r.achieved_sup,
            sup_by_horizon: r.sup_by_horizon,
            horizon: r.horizon,
            paper_bound_trace: r.paper_bound_trace,
            paper_bound_sup: r.paper_bound_sup,
            constants: r.constants,
            strategy: r.strategy,
        })
    }

    /// Bounds recomputed for a larger `ε` (same theorem and constants otherwise).
    pub fn with_eps(&self, eps: f64, x_norm: f64) -> Self {
        let mut c = self.clone();
        c.constants.eps = eps;
        let (t, s) = paper_bounds(self.theorem, x_norm, c.constants);
        c.paper_bound_trace = t;
        c.paper_bound_sup = s;
        c
    }
}

/// Serialized certificate; `x_norm` is `‖x‖₁` for Yeadon and `‖x‖_p` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub theorem: Theorem,
    pub projection: ElementLiteral,
    pub trace_defect: f64,
    pub achieved_sup: f64,
    pub sup_by_horizon: Vec<f64>,
    pub horizon: usize,
    pub paper_bound_trace: f64,
    pub paper_bound_sup: f64,
    pub constants: Constants,
    pub strategy: Strategy,
    pub valid: bool,
}

/// `(trace bound, sup bound)` as stated for each theorem.
pub fn paper_bounds(theorem: Theorem, x_norm: f64, k: Constants) -> (f64, f64) {
    match theorem {
        Theorem::Yeadon => (x_norm / k.eps, k.eps),
        Theorem::Lp => ((x_norm / k.eps).powf(k.p), 2.0 * k.eps),
        Theorem::Weighted => (4.0 * (x_norm / k.eps).powf(k.p), 48.0 * k.c * k.eps),
    }
}

/// `|A|` for self-adjoint `A`, else `((A*A + AA*)/2)^{1/2}`; `‖eAe‖` is
/// small exactly where this is small on both sides.
fn magnitude(a: &Element) -> Element {
    let tol = 1e-12 * a.operator_norm().max(1.0);
    if a.is_self_adjoint(tol) {
        a.real_part().map_blocks(|_, b| apply_hermitian(b, f64::abs))
    } else {
        let h = (&(&a.adjoint() * a) + &(a * &a.adjoint())).scale_real(0.5);
        h.real_part().map_blocks(|_, b| apply_hermitian(b, |t| t.max(0.0).sqrt()))
    }
}

fn projection_from_vectors(algebra: &Arc<TracialAlgebra>, vecs: &[(usize, DVector<C64>)]) -> Projection {
    let bases: Vec<Block> = algebra
        .dims()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let cols: Vec<DVector<C64>> = vecs.iter().filter(|(b, _)| *b == i).map(|(_, v)| v.clone()).collect();
            if cols.is_empty() {
                Block::zeros(d, 0)
            } else {
                Block::from_columns(&cols)
            }
        })
        .collect();
    Projection::from_range_bases(algebra, &bases)
}

/// Eigenpairs `(value, block, vector)` of a self-adjoint element.
fn eigenpairs(x: &Element) -> Vec<(f64, usize, DVector<C64>)> {
    let h = x.real_part();
    let mut out = Vec::new();
    for (i, b) in h.blocks().iter().enumerate() {
        let (vals, vecs) = hermitian_eigen(b);
        for (k, v) in vals.into_iter().enumerate() {
            out.push((v, i, vecs.column(k).into_owned()));
        }
    }
    out
}

/// `e − uu*` with `u` the normalized part of `v` inside the range of `e`;
/// `None` when `v` is (numerically) orthogonal to that range.
pub(crate) fn remove_direction(e: &Projection, block: usize, v: &DVector<C64>) -> Option<Projection> {
    let u = e.element().block(block) * v;
    let norm = u.norm();
    if norm < 1e-6 {
        return None;
    }
    let u = u / C64::new(norm, 0.0);
    let mut blocks = e.element().blocks().to_vec();
    blocks[block] -= &u * u.adjoint();
    Projection::new(Element::new(e.algebra(), blocks).ok()?, 1e-8).ok()
}

/// Spectral projection `χ_[0,θ]` of a positive element.
fn sublevel(x: &Element, theta: f64) -> Projection {
    let vecs: Vec<_> = eigenpairs(x).into_iter().filter(|(v, _, _)| *v <= theta).map(|(_, b, v)| (b, v)).collect();
    projection_from_vectors(x.algebra(), &vecs)
}

/// `max_n ‖e A_n e‖` and its running maximum.
pub(crate) fn compressed_sup(e: &Projection, avgs: &[Element]) -> (f64, Vec<f64>) {
    let mut running = 0.0f64;
    let profile = avgs
        .iter()
        .map(|a| {
            running = running.max(e.compress(a).operator_norm());
            running
        })
        .collect();
    (running, profile)
}

#[derive(Debug, Clone)]
pub(crate) struct Found {
    pub e: Projection,
    pub trace: f64,
    pub sup: f64,
    pub strategy: Strategy,
}

/// Candidate bookkeeping for one search: keeps the valid projection with the
/// smallest `τ(e⊥)` and the closest miss.
pub(crate) struct Search<'a> {
    avgs: &'a [Element],
    level: f64,
    budget: f64,
    strict: bool,
    pub best: Option<Found>,
    pub closest: Option<(f64, Found)>,
}

impl<'a> Search<'a> {
    pub fn new(avgs: &'a [Element], level: f64, budget: f64, strict: bool) -> Self {
        Self { avgs, level, budget, strict, best: None, closest: None }
    }

    fn trace_ok(&self, t: f64) -> bool {
        if self.strict {
            t < self.budget
        } else {
            within(t, self.budget)
        }
    }

    fn sup_ok(&self, s: f64) -> bool {
        if self.strict {
            s < self.level
        } else {
            within(s, self.level)
        }
    }

    /// Evaluates `e`; returns whether it is valid.
    pub fn offer(&mut self, e: Projection, strategy: Strategy) -> bool {
        let trace = e.complement_mass().max(0.0);
        if self.best.as_ref().is_some_and(|b| b.trace <= trace) {
            return false;
        }
        let (sup, _) = compressed_sup(&e, self.avgs);
        let found = Found { e, trace, sup, strategy };
        if self.trace_ok(trace) && self.sup_ok(sup) {
            self.best = Some(found);
            return true;
        }
        let score = (sup / self.level.max(f64::MIN_POSITIVE)).max(trace / self.budget.max(f64::MIN_POSITIVE));
        if self.closest.as_ref().is_none_or(|(s, _)| score < *s) {
            self.closest = Some((score, found));
        }
        false
    }

    pub fn result(self) -> std::result::Result<Found, Found> {
        match self.best {
            Some(b) => Ok(b),
            None => Err(self.closest.map(|c| c.1).expect("at least one candidate offered")),
        }
    }

    /// Runs every strategy and returns the best valid projection, or the
    /// closest miss.
    pub fn run(mut self) -> std::result::Result<Found, Found> {
        let algebra = self.avgs[0].algebra().clone();
        if self.offer(Projection::identity(&algebra), Strategy::Identity) {
            return self.result();
        }
        let mags: Vec<Element> = self.avgs.iter().map(magnitude).collect();
        self.spectral_chain(&mags);
        self.peeling();
        let meet = Projection::meet_all(&mags.iter().map(|m| sublevel(m, self.level)).collect::<Vec<_>>());
        self.offer(meet, Strategy::LevelMeet);
        if self.best.is_none() && algebra.total_dim() <= EXHAUSTIVE_MAX_DIM {
            self.exhaustive(&mags);
        }
        self.offer(Projection::zero(&algebra), Strategy::Zero);
        self.result()
    }

    /// Nested sublevel projections of `V = (1/N) Σ (|A_n| - level)₊`, from
    /// the kernel upward.
    fn spectral_chain(&mut self, mags: &[Element]) {
        let algebra = mags[0].algebra().clone();
        let level = self.level;
        let mut v = Element::zero(&algebra);
        for m in mags {
            v = &v + &m.map_blocks(|_, b| apply_hermitian(b, |t| (t - level).max(0.0)));
        }
        let v = v.scale_real(1.0 / mags.len() as f64);
        let mut pairs = eigenpairs(&v);
        let w = algebra.weights();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(w[b.1].total_cmp(&w[a.1])));
        for k in (0..pairs.len()).rev() {
            let vecs: Vec<_> = pairs[..k].iter().map(|(_, b, v)| (*b, v.clone())).collect();
            self.offer(projection_from_vectors(&algebra, &vecs), Strategy::SpectralChain);
        }
    }

    /// Repeatedly removes the top eigenvector of the worst compressed average.
    fn peeling(&mut self) {
        let algebra = self.avgs[0].algebra().clone();
        let mut proj = Projection::identity(&algebra);
        for _ in 0..=algebra.total_dim() {
            if !self.trace_ok(proj.complement_mass()) {
                return;
            }
            let worst = self
                .avgs
                .iter()
                .map(|a| proj.compress(a))
                .max_by(|a, b| a.operator_norm().total_cmp(&b.operator_norm()))
                .expect("nonempty");
            if self.offer(proj.clone(), Strategy::Peeling) || worst.operator_norm() == 0.0 {
                return;
            }
            let (_, block, v) = eigenpairs(&magnitude(&worst))
                .into_iter()
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .expect("nonempty algebra");
            match remove_direction(&proj, block, &v) {
                Some(next) => proj = next,
                None => return,
            }
        }
    }

    /// Subsets of eigenvectors of each `|A_n|` and level meets at every
    /// eigenvalue; only for tiny algebras.
    fn exhaustive(&mut self, mags: &[Element]) {
        let algebra = mags[0].algebra().clone();
        let mut thresholds = vec![self.level];
        for m in mags {
            let pairs = eigenpairs(m);
            thresholds.extend(pairs.iter().map(|p| p.0));
            let n = pairs.len();
            for mask in 0u32..(1 << n) {
                let vecs: Vec<_> = (0..n)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| (pairs[i].1, pairs[i].2.clone()))
                    .collect();
                self.offer(projection_from_vectors(&algebra, &vecs), Strategy::Exhaustive);
            }
        }
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        for theta in thresholds {
            let meet = Projection::meet_all(&mags.iter().map(|m| sublevel(m, theta)).collect::<Vec<_>>());
            self.offer(meet, Strategy::Exhaustive);
        }
    }
}

fn plain_averages(t: &Arc<DsOperator>, weights: Option<&WeightSequence>, x: &Element, horizon: usize) -> Result<Vec<Element>> {
    let mut req = AverageRequest::new(t.clone(), x.clone(), horizon)?;
    if let Some(b) = weights {
        req = req.with_left(b.clone());
    }
    let mut s = AverageStream::new(&req, Family::Plain)?;
    (0..horizon).map(|_| s.next_average()).collect()
}

fn check_positive(x: &Element) -> Result<()> {
    let tol = 1e-10 * x.operator_norm().max(1.0);
    if !x.is_positive(tol) {
        return Err(Error::Precondition(format!(
            "the maximal theorem needs x ≥ 0 (min eigenvalue {:.3e})",
            x.real_part().min_eigenvalue()
        )));
    }
    Ok(())
}

fn check_args(eps: f64, horizon: usize) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid(format!("ε must be positive and finite, got {eps}"));
    }
    if horizon == 0 {
        return invalid("horizon must be ≥ 1");
    }
    Ok(())
}

fn certificate(theorem: Theorem, found: Found, avgs: &[Element], bounds: (f64, f64), constants: Constants) -> MaximalCertificate {
    let (sup, profile) = compressed_sup(&found.e, avgs);
    MaximalCertificate {
        theorem,
        trace_defect: found.e.complement_mass().max(0.0),
        projection: found.e,
        achieved_sup: sup,
        sup_by_horizon: profile,
        horizon: avgs.len(),
        paper_bound_trace: bounds.0,
        paper_bound_sup: bounds.1,
        constants,
        strategy: found.strategy,
    }
}

fn finish(cert: MaximalCertificate) -> Result<MaximalCertificate> {
    if cert.is_valid() {
        Ok(cert)
    } else {
        Err(Error::SearchExhausted { best: Box::new(cert) })
    }
}

/// Projection with `τ(e⊥) ≤ ‖x‖₁/ε` and `sup_{n≤N} ‖e A_n({1}, x) e‖ ≤ ε`.
pub fn search_yeadon(t: &Arc<DsOperator>, x: &Element, eps: f64, horizon: usize) -> Result<MaximalCertificate> {
    check_args(eps, horizon)?;
    check_positive(x)?;
    let constants = Constants { eps, p: 1.0, c: 1.0 };
    let bounds = paper_bounds(Theorem::Yeadon, trace_norm(x), constants);
    let avgs = plain_averages(t, None, x, horizon)?;
    let found = match Search::new(&avgs, bounds.1, bounds.0, false).run() {
        Ok(f) | Err(f) => f,
    };
    finish(certificate(Theorem::Yeadon, found, &avgs, bounds, constants))
}

/// `L^p` lemma: `τ(e⊥) ≤ (‖x‖_p/ε)^p` and `sup ‖e A_n e‖ ≤ 2ε`, found by a
/// Yeadon search for `x^p` at level `ε^p`.
pub fn search_lp(t: &Arc<DsOperator>, x: &Element, p: f64, eps: f64, horizon: usize) -> Result<MaximalCertificate> {
    check_args(eps, horizon)?;
    if !(p >= 1.0 && p.is_finite()) {
        return invalid(format!("need 1 ≤ p < ∞, got {p}"));
    }
    check_positive(x)?;
    let constants = Constants { eps, p, c: 1.0 };
    let bounds = paper_bounds(Theorem::Lp, lp_norm(x, p)?, constants);
    let avgs = plain_averages(t, None, x, horizon)?;
    let xp = x.real_part().functional_calculus(|s| s.max(0.0).powf(p))?;
    let avgs_p = plain_averages(t, None, &xp, horizon)?;
    let mut search = Search::new(&avgs, bounds.1, bounds.0, false);
    let (Ok(f) | Err(f)) = Search::new(&avgs_p, eps.powf(p), bounds.0, false).run();
    search.offer(f.e, f.strategy);
    let found = match search.best.clone() {
        Some(f) => f,
        // the lemma's projection missed, which rounding alone can cause; search directly
        None => match Search::new(&avgs, bounds.1, bounds.0, false).run() {
            Ok(f) | Err(f) => f,
        },
    };
    finish(certificate(Theorem::Lp, found, &avgs, bounds, constants))
}

/// `x = (x₁ - x₂) + i(x₃ - x₄)` with positive parts.
pub fn positive_parts(x: &Element) -> [Element; 4] {
    let re = x.real_part();
    let im = x.imag_part();
    [re.positive_part(), re.negative_part(), im.positive_part(), im.negative_part()]
}

/// Weighted maximal theorem: `τ(e⊥) ≤ 4(‖x‖_p/ε)^p` and
/// `sup ‖e A_n({b_j}, x) e‖ ≤ 48Cε` for central weights with `C = sup ‖b_j‖`.
pub fn search_weighted(
    t: &Arc<DsOperator>,
    b: &WeightSequence,
    x: &Element,
    p: f64,
    eps: f64,
    horizon: usize,
) -> Result<MaximalCertificate> {
    if !b.is_central() {
        return Err(Error::Hypothesis("the weighted maximal theorem needs weights in the center".into()));
    }
    check_args(eps, horizon)?;
    if !(p >= 1.0 && p.is_finite()) {
        return invalid(format!("need 1 ≤ p < ∞, got {p}"));
    }
    let c = b.bound();
    let constants = Constants { eps, p, c };
    let bounds = paper_bounds(Theorem::Weighted, lp_norm(x, p)?, constants);
    let avgs = plain_averages(t, Some(b), x, horizon)?;
    let algebra = x.algebra();
    let mut parts = Vec::new();
    for part in positive_parts(x) {
        if part.operator_norm() == 0.0 {
            continue;
        }
        let e = match search_lp(t, &part, p, eps, horizon) {
            Ok(cert) => cert.projection,
            Err(Error::SearchExhausted { best }) => best.projection,
            Err(e) => return Err(e),
        };
        parts.push(e);
    }
    let meet = if parts.is_empty() { Projection::identity(algebra) } else { Projection::meet_all(&parts) };
    let mut search = Search::new(&avgs, bounds.1, bounds.0, false);
    search.offer(meet, Strategy::Meet);
    let found = match search.best.clone() {
        Some(f) => f,
        None => match Search::new(&avgs, bounds.1, bounds.0, false).run() {
            Ok(f) | Err(f) => f,
        },
    };
    finish(certificate(Theorem::Weighted, found, &avgs, bounds, constants))
}

/// What the independent verifier recomputed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub trace_defect: f64,
    pub achieved_sup: f64,
    pub paper_bound_trace: f64,
    pub paper_bound_sup: f64,
    /// Recorded values agree with the recomputed ones.
    pub consistent: bool,
    pub valid: bool,
}

/// Recomputes a certificate from scratch: the projection test, `τ(e⊥)`, the
/// norm of `x`, and every `A_n` by repeated application of `T` to each
/// `b_j x` separately.
pub fn verify_certificate(
    cert: &MaximalCertificate,
    t: &DsOperator,
    weights: Option<&WeightSequence>,
    x: &Element,
) -> Result<Verification> {
    let e = cert.projection.element();
    let is_projection = e.self_adjoint_defect() <= 1e-8 && (&(e * e) - e).operator_norm() <= 1e-8;
    let alg = x.algebra();
    let trace_defect = alg.unit_trace() - e.trace().re;
    let k = cert.constants;
    let x_norm = match cert.theorem {
        Theorem::Yeadon => x.singular_values().iter().map(|(s, m)| s * m).sum::<f64>(),
        _ => x.singular_values().iter().map(|(s, m)| m * s.powf(k.p)).sum::<f64>().powf(1.0 / k.p),
    };
    let (bt, bs) = paper_bounds(cert.theorem, x_norm, k);
    let mut sum = Element::zero(alg);
    let mut sup = 0.0f64;
    for j in 0..cert.horizon {
        let mut y = match weights {
            Some(b) => &b.at(j as u64).to_element(alg) * x,
            None => x.clone(),
        };
        for _ in 0..j {
            y = t.apply(&y);
        }
        sum = &sum + &y;
        let a = sum.scale_real(1.0 / (j + 1) as f64);
        sup = sup.max((&(e * &a) * e).operator_norm());
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
    let consistent = close(trace_defect, cert.trace_defect)
        && close(sup, cert.achieved_sup)
        && close(bt, cert.paper_bound_trace)
        && close(bs, cert.paper_bound_sup);
    Ok(Verification {
        trace_defect,
        achieved_sup: sup,
        paper_bound_trace: bt,
        paper_bound_sup: bs,
        consistent,
        valid: is_projection && within(trace_defect, bt) && within(sup, bs),
    })
}

/// Averages probed for uniform equicontinuity: `A_n({b_j}, x)` or `A_n^k`.
#[derive(Debug, Clone)]
pub struct BuemFamily {
    pub operator: Arc<DsOperator>,
    pub weights: WeightSequence,
    pub subsequence: Option<Subsequence>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuemConfig {
    /// Trace budget: `τ(e⊥) < eps`.
    pub eps: f64,
    /// Target: `sup_n ‖e A_n e‖ < delta`.
    pub delta: f64,
    /// Strictly decreasing norm levels `γ`.
    pub gamma_grid: Vec<f64>,
    pub horizon: usize,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuemRow {
    pub gamma: f64,
    pub successes: usize,
    pub samples: usize,
    pub rate: f64,
    /// Largest `sup_n ‖e A_n e‖` over the successful samples.
    pub worst_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuemReport {
    pub rows: Vec<BuemRow>,
    /// Success rate never drops as `γ` decreases.
    pub monotone: bool,
}

/// Samples `x` with `‖x‖_Φ < γ` for each `γ` and searches for `e` with
/// `τ(e⊥) < eps` and `sup_n ‖e A_n(x) e‖ < delta`.
///
/// Each sample fixes a direction `u` with `‖u‖_Φ = 1` and a factor
/// `r ∈ [1/2, 1)`, and uses `x = γ r u` at every grid point; a projection
/// that works for some `γ` is tried first at the next, smaller one.
pub fn buem_probe(family: &BuemFamily, phi: &OrliczFunction, cfg: &BuemConfig) -> Result<BuemReport> {
    if !family.weights.is_central() {
        return Err(Error::Hypothesis("uniform equicontinuity is stated for central weights".into()));
    }
    if cfg.gamma_grid.is_empty() || cfg.gamma_grid.iter().any(|g| !(*g > 0.0)) {
        return invalid("γ grid must be nonempty and positive");
    }
    if cfg.gamma_grid.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("γ grid must be strictly decreasing");
    }
    if !(cfg.eps > 0.0 && cfg.delta > 0.0) || cfg.horizon == 0 || cfg.samples == 0 {
        return invalid("need ε, δ > 0, horizon ≥ 1 and at least one sample");
    }
    let algebra = family.operator.algebra().clone();
    let mut rng = seeded_rng(cfg.seed);
    let mut rows: Vec<BuemRow> = cfg
        .gamma_grid
        .iter()
        .map(|&gamma| BuemRow { gamma, successes: 0, samples: cfg.samples, rate: 0.0, worst_sup: 0.0 })
        .collect();
    for s in 0..cfg.samples {
        let raw = random_element(&mut rng, &algebra);
        let u = raw.scale_real(1.0 / luxemburg_norm(&raw, phi, 1e-12)?);
        let r = 0.5 + 0.5 * hashed_unit(cfg.seed, s as u64, 17);
        let mut req = AverageRequest::new(family.operator.clone(), u, cfg.horizon)?.with_left(family.weights.clone());
        let family_kind = match &family.subsequence {
            Some(k) => {
                req = req.with_subsequence(k.clone());
                Family::Subsequential
            }
            None => Family::Plain,
        };
        let mut stream = AverageStream::new(&req, family_kind)?;
        let base: Vec<Element> = (0..cfg.horizon).map(|_| stream.next_average()).collect::<Result<_>>()?;
        let mut warm: Option<Projection> = None;
        for row in rows.iter_mut() {
            let scale = row.gamma * r;
            let avgs: Vec<Element> = base.iter().map(|a| a.scale_real(scale)).collect();
            let mut search = Search::new(&avgs, cfg.delta, cfg.eps, true);
            let reused = warm.take().is_some_and(|e| search.offer(e, Strategy::Identity));
            let found = if reused { search.result().ok() } else { search.run().ok() };
            if let Some(f) = found {
                row.successes += 1;
                row.worst_sup = row.worst_sup.max(f.sup);
                warm = Some(f.e);
            }
        }
    }
    for row in rows.iter_mut() {
        row.rate = row.successes as f64 / row.samples as f64;
    }
    let monotone = rows.windows(2).all(|w| w[1].rate >= w[0].rate);
    Ok(BuemReport { rows, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_positive, random_unitary};

    fn diag_alg() -> Arc<TracialAlgebra> {
        TracialAlgebra::new(vec![3, 1], vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn identity_operator_gets_chebyshev_projection() {
        let alg = diag_alg();
        let x = Element::from_diagonals(&alg, &[vec![4.0, 0.5, 0.1], vec![2.0]]).unwrap();
        let t = Arc::new(DsOperator::identity(&alg));
        let cert = search_yeadon(&t, &x, 1.0, 16).unwrap();
        assert!(cert.is_valid());
        // χ_[0,1](x) removes the 4 and the 2: τ(e⊥) = 1 + 2
        assert_eq!(cert.trace_defect, 3.0);
        assert!(cert.trace_defect <= trace_norm(&x) / 1.0);
        let v = verify_certificate(&cert, &t, None, &x).unwrap();
        assert!(v.valid && v.consistent, "{v:?}");
    }

    #[test]
    fn trivial_yeadon_cases() {
        let alg = diag_alg();
        let mut rng = seeded_rng(1);
        let t = Arc::new(DsOperator::from_unitary(&random_unitary(&mut rng, &alg)).unwrap());
        let cert = search_yeadon(&t, &Element::zero(&alg), 0.3, 8).unwrap();
        assert_eq!(cert.trace_defect, 0.0);
        let x = random_positive(&mut rng, &alg);
        let cert = search_yeadon(&t, &x, x.operator_norm(), 32).unwrap();
        assert_eq!(cert.strategy, Strategy::Identity);
        assert_eq!(cert.trace_defect, 0.0);
        assert!(matches!(search_yeadon(&t, &(-&x), 1.0, 8), Err(Error::Precondition(_))));
    }

    #[test]
    fn lp_and_weighted_certificates_verify() {
        let alg = TracialAlgebra::new(vec![2, 2], vec![1.0, 0.5]).unwrap();
        let mut rng = seeded_rng(7);
        let t = Arc::new(DsOperator::from_unitary(&random_unitary(&mut rng, &alg)).unwrap());
        let x = random_positive(&mut rng, &alg);
        for p in [1.0, 2.0] {
            let eps = 0.5 * lp_norm(&x, p).unwrap();
            let cert = search_lp(&t, &x, p, eps, 32).unwrap();
            let v = verify_certificate(&cert, &t, None, &x).unwrap();
            assert!(v.valid && v.consistent);
        }
        let b = crate::weights::WeightSpec::Central {
            coefficients: None,
            phases: crate::weights::PhaseList::Single(vec![0.2, 0.6]),
            perturbation: None,
            seed: None,
        }
        .build(&alg, 0)
        .unwrap();
        let g = random_element(&mut rng, &alg);
        let cert = search_weighted(&t, &b, &g, 2.0, 0.3, 32).unwrap();
        let v = verify_certificate(&cert, &t, Some(&b), &g).unwrap();
        assert!(v.valid && v.consistent, "{v:?}");
    }

    #[test]
    fn weighted_search_rejects_non_central_weights() {
        let alg = TracialAlgebra::new(vec![2], vec![1.0]).unwrap();
        let t = Arc::new(DsOperator::identity(&alg));
        let spec = crate::weights::WeightSpec::General { coefficients: None, terms: 1, order: 4, perturbation: None, seed: Some(3) };
        let b = spec.build(&alg, 0).unwrap();
        let x = Element::identity(&alg);
        assert!(matches!(search_weighted(&t, &b, &x, 1.0, 1.0, 4), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn record_round_trip() {
        let alg = diag_alg();
        let x = Element::from_diagonals(&alg, &[vec![4.0, 0.5, 0.1], vec![2.0]]).unwrap();
        let t = Arc::new(DsOperator::identity(&alg));
        let cert = search_yeadon(&t, &x, 1.0, 4).unwrap();
        let json = serde_json::to_string(&cert.to_record()).unwrap();
        let back = MaximalCertificate::from_record(serde_json::from_str(&json).unwrap()).unwrap();
        assert!(verify_certificate(&back, &t, None, &x).unwrap().valid);
        assert_eq!(back.to_record(), cert.to_record());
    }
}
