//! Weight sequences `{b_j}`: trigonometric polynomials over unitaries, their
//! perturbations, scalar sequences and indicator masks.

use std::f64::consts::TAU;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::algebra::{same_algebra, CenterElement, Element, TracialAlgebra, C64};
use crate::error::{invalid, Error, Result};
use crate::random::{hashed_unit, random_root_unitary, seeded_rng};
use crate::subseq::Subsequence;

/// One emitted weight. Scalars and central elements are kept in closed form
/// so averages can use the central fast path.
#[derive(Debug, Clone)]
pub enum Weight {
    Scalar(C64),
    Central(CenterElement),
    General(Element),
}

impl Weight {
    pub fn norm(&self) -> f64 {
        match self {
            Weight::Scalar(z) => z.norm(),
            Weight::Central(c) => c.norm(),
            Weight::General(e) => e.operator_norm(),
        }
    }

    pub fn to_element(&self, algebra: &Arc<TracialAlgebra>) -> Element {
        match self {
            Weight::Scalar(z) => Element::scalar(algebra, *z),
            Weight::Central(c) => c.to_element(),
            Weight::General(e) => e.clone(),
        }
    }

    /// The weight as a block-scalar vector, when it is central.
    pub fn as_center(&self, algebra: &Arc<TracialAlgebra>) -> Option<CenterElement> {
        match self {
            Weight::Scalar(z) => Some(CenterElement::constant(algebra, *z)),
            Weight::Central(c) => Some(c.clone()),
            Weight::General(_) => None,
        }
    }

    /// `b·x`.
    pub fn left_mul(&self, x: &Element) -> Element {
        match self {
            Weight::Scalar(z) => x.scale(*z),
            Weight::Central(c) => c.mul_element(x),
            Weight::General(b) => b * x,
        }
    }

    /// `x·d`.
    pub fn right_mul(&self, x: &Element) -> Element {
        match self {
            Weight::Scalar(z) => x.scale(*z),
            Weight::Central(c) => c.mul_element(x),
            Weight::General(d) => x * d,
        }
    }

    fn scaled(self, s: f64) -> Weight {
        match self {
            Weight::Scalar(z) => Weight::Scalar(z * s),
            Weight::Central(c) => Weight::Central(c.map(|z| z * s)),
            Weight::General(e) => Weight::General(e.scale_real(s)),
        }
    }
}

fn turn(theta: f64, k: u64) -> C64 {
    // reduce θ·k modulo 1 before exponentiating to keep large k accurate
    let frac = (theta.rem_euclid(1.0) * k as f64).rem_euclid(1.0);
    C64::from_polar(1.0, TAU * frac)
}

/// `ψ(k) = Σ z_j u_j^k`.
pub struct TrigPolynomial {
    algebra: Arc<TracialAlgebra>,
    coefficients: Vec<C64>,
    terms: Vec<Term>,
}

enum Term {
    /// Block phases in turns: `u = diag(e^{2πiθ_b})`.
    Central(Vec<f64>),
    General { u: Element, squares: RwLock<Vec<Element>> },
}

impl std::fmt::Debug for TrigPolynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrigPolynomial")
            .field("coefficients", &self.coefficients)
            .field("central", &self.is_central())
            .finish()
    }
}

impl TrigPolynomial {
    /// Arbitrary unitaries; powers go through cached repeated squares.
    pub fn new(coefficients: Vec<C64>, unitaries: Vec<Element>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.len() != unitaries.len() {
            return invalid("need one coefficient per unitary and at least one term");
        }
        let algebra = unitaries[0].algebra().clone();
        let one = Element::identity(&algebra);
        let mut terms = Vec::with_capacity(unitaries.len());
        for u in unitaries {
            if !same_algebra(u.algebra(), &algebra) {
                return Err(Error::AlgebraMismatch);
            }
            let defect = (&u.adjoint() * &u).distance(&one).max((&u * &u.adjoint()).distance(&one));
            if defect > 1e-10 {
                return invalid(format!("trigonometric polynomial term is not unitary (defect {defect:.3e})"));
            }
            terms.push(Term::General { u, squares: RwLock::new(Vec::new()) });
        }
        Ok(Self { algebra, coefficients, terms })
    }

    /// Central unitaries given by block phases in turns, one list per term.
    pub fn central(algebra: &Arc<TracialAlgebra>, coefficients: Vec<C64>, phases: Vec<Vec<f64>>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.len() != phases.len() {
            return invalid("need one coefficient per phase vector and at least one term");
        }
        if let Some(p) = phases.iter().find(|p| p.len() != algebra.num_blocks()) {
            return invalid(format!("phase vector has {} entries for {} blocks", p.len(), algebra.num_blocks()));
        }
        if phases.iter().flatten().any(|t| !t.is_finite()) {
            return invalid("phases must be finite");
        }
        let terms = phases.into_iter().map(Term::Central).collect();
        Ok(Self { algebra: algebra.clone(), coefficients, terms })
    }

    pub fn algebra(&self) -> &Arc<TracialAlgebra> {
        &self.algebra
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    pub fn is_central(&self) -> bool {
        self.terms.iter().all(|t| matches!(t, Term::Central(_)))
    }

    /// `Σ |z_j|`, an upper bound for every `‖ψ(k)‖`.
    pub fn bound(&self) -> f64 {
        self.coefficients.iter().map(|z| z.norm()).sum()
    }

    fn general_power(u: &Element, squares: &RwLock<Vec<Element>>, k: u64) -> Element {
        let mut result = Element::identity(u.algebra());
        if k == 0 {
            return result;
        }
        let bits = 64 - k.leading_zeros() as usize;
        {
            let cache = squares.read().expect("cache lock");
            if cache.len() >= bits {
                for (i, sq) in cache.iter().enumerate().take(bits) {
                    if k >> i & 1 == 1 {
                        result = &result * sq;
                    }
                }
                return result;
            }
        }
        let mut cache = squares.write().expect("cache lock");
        if cache.is_empty() {
            cache.push(u.clone());
        }
        while cache.len() < bits {
            let last = cache.last().unwrap();
            let next = last * last;
            cache.push(next);
        }
        for (i, sq) in cache.iter().enumerate().take(bits) {
            if k >> i & 1 == 1 {
                result = &result * sq;
            }
        }
        result
    }

    pub fn eval(&self, k: u64) -> Weight {
        if self.is_central() {
            let mut scalars = vec![C64::new(0.0, 0.0); self.algebra.num_blocks()];
            for (z, term) in self.coefficients.iter().zip(&self.terms) {
                let Term::Central(phases) = term else { unreachable!() };
                for (s, &theta) in scalars.iter_mut().zip(phases) {
                    *s += z * turn(theta, k);
                }
            }
            return Weight::Central(CenterElement::new(&self.algebra, scalars).expect("one scalar per block"));
        }
        let mut acc = Element::zero(&self.algebra);
        for (z, term) in self.coefficients.iter().zip(&self.terms) {
            let power = match term {
                Term::Central(phases) => {
                    let scalars = phases.iter().map(|&t| turn(t, k)).collect();
                    CenterElement::new(&self.algebra, scalars).expect("one scalar per block").to_element()
                }
                Term::General { u, squares } => Self::general_power(u, squares, k),
            };
            acc = &acc + &power.scale(*z);
        }
        Weight::General(acc)
    }
}

/// Scalar sequence `P(k) = Σ r_j λ_j^k` with `λ_j = e^{2πiθ_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTrig {
    pub coefficients: Vec<C64>,
    pub phases: Vec<f64>,
}

impl ScalarTrig {
    pub fn new(coefficients: Vec<C64>, phases: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.len() != phases.len() {
            return invalid("need one coefficient per phase and at least one term");
        }
        Ok(Self { coefficients, phases })
    }

    pub fn eval(&self, k: u64) -> C64 {
        self.coefficients.iter().zip(&self.phases).map(|(r, &t)| r * turn(t, k)).sum()
    }

    pub fn bound(&self) -> f64 {
        self.coefficients.iter().map(|z| z.norm()).sum()
    }

    /// The same sequence as a central trigonometric polynomial on `algebra`.
    pub fn to_trig(&self, algebra: &Arc<TracialAlgebra>) -> TrigPolynomial {
        let phases = self.phases.iter().map(|&t| vec![t; algebra.num_blocks()]).collect();
        TrigPolynomial::central(algebra, self.coefficients.clone(), phases).expect("shapes match")
    }
}

/// Summable-in-average perturbation `δ_j c_j` with `δ_j = ε₀/(j+1)^a` and
/// central unit phases `c_j` drawn from `(seed, j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub eps0: f64,
    pub exponent: f64,
    pub seed: u64,
}

impl Perturbation {
    pub fn harmonic(eps0: f64, exponent: f64, seed: u64) -> Result<Self> {
        if !(eps0 >= 0.0 && eps0.is_finite()) {
            return invalid(format!("perturbation size must be finite and ≥ 0, got {eps0}"));
        }
        if !(exponent > 0.0 && exponent.is_finite()) {
            return invalid(format!(
                "schedule ε₀/(j+1)^{exponent} does not average to zero; the exponent must be positive"
            ));
        }
        Ok(Self { eps0, exponent, seed })
    }

    pub fn size(&self, j: u64) -> f64 {
        self.eps0 / ((j + 1) as f64).powf(self.exponent)
    }

    fn phase(&self, j: u64, lane: u64) -> C64 {
        C64::from_polar(1.0, TAU * hashed_unit(self.seed, j, lane))
    }

    fn central(&self, algebra: &Arc<TracialAlgebra>, j: u64) -> CenterElement {
        let d = self.size(j);
        let scalars = (0..algebra.num_blocks() as u64).map(|b| self.phase(j, b) * d).collect();
        CenterElement::new(algebra, scalars).expect("one scalar per block")
    }

    fn scalar(&self, j: u64) -> C64 {
        self.phase(j, 0) * self.size(j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    Identity,
    Trig,
    PerturbedTrig,
    Scalar,
    IndicatorMasked,
}

#[derive(Debug, Clone)]
enum Source {
    Identity,
    Trig { psi: Arc<TrigPolynomial>, perturbation: Option<Perturbation> },
    Scalar { p: ScalarTrig, perturbation: Option<Perturbation> },
    Masked { inner: Box<WeightSequence>, mask: Subsequence },
}

/// A bounded weight sequence `{b_j}`; evaluation is a pure function of `j`.
#[derive(Debug, Clone)]
pub struct WeightSequence {
    source: Source,
    bound: f64,
}

impl WeightSequence {
    /// `b_j = 1`.
    pub fn identity() -> Self {
        Self { source: Source::Identity, bound: 1.0 }
    }

    pub fn trig(psi: TrigPolynomial, perturbation: Option<Perturbation>) -> Self {
        let bound = psi.bound() + perturbation.map_or(0.0, |p| p.eps0);
        Self { source: Source::Trig { psi: Arc::new(psi), perturbation }, bound }
    }

    pub fn scalar(p: ScalarTrig, perturbation: Option<Perturbation>) -> Self {
        let bound = p.bound() + perturbation.map_or(0.0, |p| p.eps0);
        Self { source: Source::Scalar { p, perturbation }, bound }
    }

    /// `c_j b_j` with `c_j = 1` on `k` and 0 elsewhere.
    pub fn mask_by_indicator(&self, k: &Subsequence) -> Self {
        Self { source: Source::Masked { inner: Box::new(self.clone()), mask: k.clone() }, bound: self.bound }
    }

    /// `C = sup_j ‖b_j‖` (an upper bound, attained up to the perturbation phases).
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn kind(&self) -> WeightKind {
        match &self.source {
            Source::Identity => WeightKind::Identity,
            Source::Trig { perturbation: None, .. } => WeightKind::Trig,
            Source::Trig { .. } => WeightKind::PerturbedTrig,
            Source::Scalar { .. } => WeightKind::Scalar,
            Source::Masked { .. } => WeightKind::IndicatorMasked,
        }
    }

    /// Every `b_j` lies in the center.
    pub fn is_central(&self) -> bool {
        match &self.source {
            Source::Identity | Source::Scalar { .. } => true,
            Source::Trig { psi, .. } => psi.is_central(),
            Source::Masked { inner, .. } => inner.is_central(),
        }
    }

    /// The designed trigonometric polynomial, as a central polynomial on
    /// `algebra` for scalar sequences.
    pub fn design(&self, algebra: &Arc<TracialAlgebra>) -> Option<Arc<TrigPolynomial>> {
        match &self.source {
            Source::Identity => Some(Arc::new(ScalarTrig::new(vec![C64::new(1.0, 0.0)], vec![0.0]).unwrap().to_trig(algebra))),
            Source::Trig { psi, .. } => Some(psi.clone()),
            Source::Scalar { p, .. } => Some(Arc::new(p.to_trig(algebra))),
            Source::Masked { .. } => None,
        }
    }

    pub fn at(&self, j: u64) -> Weight {
        match &self.source {
            Source::Identity => Weight::Scalar(C64::new(1.0, 0.0)),
            Source::Scalar { p, perturbation } => {
                Weight::Scalar(p.eval(j) + perturbation.map_or(C64::new(0.0, 0.0), |q| q.scalar(j)))
            }
            Source::Trig { psi, perturbation } => {
                let base = psi.eval(j);
                match (base, perturbation) {
                    (w, None) => w,
                    (Weight::Central(c), Some(q)) => {
                        let d = q.central(psi.algebra(), j);
                        let s = c.scalars().iter().zip(d.scalars()).map(|(a, b)| a + b).collect();
                        Weight::Central(CenterElement::new(psi.algebra(), s).expect("shapes match"))
                    }
                    (w, Some(q)) => {
                        let d = q.central(psi.algebra(), j);
                        Weight::General(&w.to_element(psi.algebra()) + &d.to_element())
                    }
                }
            }
            Source::Masked { inner, mask } => {
                let w = inner.at(j);
                if mask.contains(j) {
                    w
                } else {
                    w.scaled(0.0)
                }
            }
        }
    }
}

/// `(1/n) Σ_{j<n} ‖b_j − ψ(j)‖_∞`.
pub fn besicovitch_error(b: &WeightSequence, psi: &TrigPolynomial, n: u64) -> Result<f64> {
    if n == 0 {
        return invalid("n must be ≥ 1");
    }
    let alg = psi.algebra();
    let total: f64 = (0..n)
        .map(|j| b.at(j).to_element(alg).distance(&psi.eval(j).to_element(alg)))
        .sum();
    Ok(total / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum PerturbationSpec {
    Harmonic {
        eps0: f64,
        #[serde(default = "one")]
        exponent: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_order() -> u32 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseList {
    Single(Vec<f64>),
    PerTerm(Vec<Vec<f64>>),
}

/// Weight description in scenario files. Phases are in turns, so `0.5`
/// stands for `e^{iπ} = -1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum WeightSpec {
    Identity,
    /// Central trigonometric polynomial; one phase per block per term.
    Central {
        #[serde(default)]
        coefficients: Option<Vec<[f64; 2]>>,
        phases: PhaseList,
        #[serde(default)]
        perturbation: Option<PerturbationSpec>,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Scalar `P(k) = Σ r_j λ_j^k`; one phase per term.
    Scalar {
        #[serde(default)]
        coefficients: Option<Vec<[f64; 2]>>,
        phases: Vec<f64>,
        #[serde(default)]
        perturbation: Option<PerturbationSpec>,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Trigonometric polynomial over seeded random unitaries with spectrum in
    /// the `order`-th roots of unity. Not central.
    General {
        #[serde(default)]
        coefficients: Option<Vec<[f64; 2]>>,
        terms: usize,
        #[serde(default = "default_order")]
        order: u32,
        #[serde(default)]
        perturbation: Option<PerturbationSpec>,
        #[serde(default)]
        seed: Option<u64>,
    },
}

fn coefficients(given: &Option<Vec<[f64; 2]>>, terms: usize) -> Result<Vec<C64>> {
    match given {
        Some(c) if c.len() != terms => invalid(format!("{} coefficients for {terms} terms", c.len())),
        Some(c) => Ok(c.iter().map(|z| C64::new(z[0], z[1])).collect()),
        None => Ok(vec![C64::new(1.0 / terms.max(1) as f64, 0.0); terms]),
    }
}

fn perturbation(spec: &Option<PerturbationSpec>, seed: u64) -> Result<Option<Perturbation>> {
    spec.as_ref()
        .map(|PerturbationSpec::Harmonic { eps0, exponent }| Perturbation::harmonic(*eps0, *exponent, seed))
        .transpose()
}

impl WeightSpec {
    pub fn build(&self, algebra: &Arc<TracialAlgebra>, default_seed: u64) -> Result<WeightSequence> {
        match self {
            WeightSpec::Identity => Ok(WeightSequence::identity()),
            WeightSpec::Central { coefficients: c, phases, perturbation: p, seed } => {
                let phases = match phases {
                    PhaseList::Single(v) => vec![v.clone()],
                    PhaseList::PerTerm(v) => v.clone(),
                };
                let psi = TrigPolynomial::central(algebra, coefficients(c, phases.len())?, phases)?;
                Ok(WeightSequence::trig(psi, perturbation(p, seed.unwrap_or(default_seed))?))
            }
            WeightSpec::Scalar { coefficients: c, phases, perturbation: p, seed } => {
                let psi = ScalarTrig::new(coefficients(c, phases.len())?, phases.clone())?;
                Ok(WeightSequence::scalar(psi, perturbation(p, seed.unwrap_or(default_seed))?))
            }
            WeightSpec::General { coefficients: c, terms, order, perturbation: p, seed } => {
                let seed = seed.unwrap_or(default_seed);
                let mut rng = seeded_rng(seed);
                let us = (0..*terms).map(|_| random_root_unitary(&mut rng, algebra, *order)).collect();
                let psi = TrigPolynomial::new(coefficients(c, *terms)?, us)?;
                Ok(WeightSequence::trig(psi, perturbation(p, seed)?))
            }
        }
    }
}

/// Central Besicovitch sequence from a spec; rejects non-central specs.
pub fn make_central_besicovitch(algebra: &Arc<TracialAlgebra>, spec: &WeightSpec, seed: u64) -> Result<WeightSequence> {
    let w = spec.build(algebra, seed)?;
    if !w.is_central() {
        return invalid("weight spec does not describe central weights");
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eval_trig_examples() {
        let m2 = TracialAlgebra::new(vec![2], vec![1.0]).unwrap();
        let u = Element::from_diagonals(&m2, &[vec![1.0, -1.0]]).unwrap();
        let psi = TrigPolynomial::new(vec![c(1.0, 0.0)], vec![u.clone()]).unwrap();
        assert_eq!(psi.eval(3).to_element(&m2).distance(&u), 0.0);
        assert_eq!(psi.eval(0).to_element(&m2).distance(&Element::identity(&m2)), 0.0);

        let v = Element::new(
            &m2,
            vec![crate::algebra::Block::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.0, 1.0), c(1.0, 0.0)]))],
        )
        .unwrap();
        let psi = TrigPolynomial::new(vec![c(1.0, 0.0), c(0.0, 1.0)], vec![Element::identity(&m2), v]).unwrap();
        let expect = &Element::identity(&m2) + &Element::from_diagonals(&m2, &[vec![-1.0, 1.0]]).unwrap().scale(c(0.0, 1.0));
        assert!(psi.eval(2).to_element(&m2).distance(&expect) < 1e-15);
    }

    #[test]
    fn central_construction_examples() {
        let alg = TracialAlgebra::new(vec![2, 1], vec![1.0, 2.0]).unwrap();
        let spec = WeightSpec::Central {
            coefficients: None,
            phases: PhaseList::Single(vec![0.0, 1.0 / 3.0]),
            perturbation: None,
            seed: None,
        };
        let b = make_central_besicovitch(&alg, &spec, 1).unwrap();
        assert_eq!(b.bound(), 1.0);
        for j in 0..10u64 {
            let Weight::Central(z) = b.at(j) else { panic!("not central") };
            let w = C64::from_polar(1.0, TAU / 3.0).powu(j as u32);
            assert!((z.scalars()[0] - c(1.0, 0.0)).norm() < 1e-15);
            assert!((z.scalars()[1] - w).norm() < 1e-12);
        }
        let ones = WeightSpec::Central { coefficients: None, phases: PhaseList::Single(vec![0.0, 0.0]), perturbation: None, seed: None };
        let b = make_central_besicovitch(&alg, &ones, 1).unwrap();
        assert_eq!(b.at(17).to_element(&alg).distance(&Element::identity(&alg)), 0.0);

        let alt = WeightSpec::Scalar { coefficients: None, phases: vec![0.5], perturbation: None, seed: None };
        let b = alt.build(&alg, 0).unwrap();
        for j in 0..6u64 {
            let Weight::Scalar(z) = b.at(j) else { panic!() };
            assert!((z - c(if j % 2 == 0 { 1.0 } else { -1.0 }, 0.0)).norm() < 1e-15);
        }
        let psi = b.design(&alg).unwrap();
        assert_eq!(besicovitch_error(&b, &psi, 64).unwrap(), 0.0);

        let general = WeightSpec::General { coefficients: None, terms: 2, order: 4, perturbation: None, seed: None };
        assert!(make_central_besicovitch(&alg, &general, 1).is_err());
    }

    #[test]
    fn harmonic_error_matches_closed_form() {
        let alg = TracialAlgebra::new(vec![2, 1], vec![1.0, 2.0]).unwrap();
        let psi = TrigPolynomial::central(&alg, vec![c(0.5, 0.0), c(0.5, 0.0)], vec![vec![0.2, 0.4], vec![0.0, 0.6]]).unwrap();
        let pert = Perturbation::harmonic(1.0, 1.0, 99).unwrap();
        let b = WeightSequence::trig(psi, Some(pert));
        let psi = b.design(&alg).unwrap();
        for n in [1u64, 5, 64, 256] {
            let h: f64 = (1..=n).map(|k| 1.0 / k as f64).sum();
            let e = besicovitch_error(&b, &psi, n).unwrap();
            assert!((e - h / n as f64).abs() < 1e-12, "n = {n}: {e}");
        }
        assert!(Perturbation::harmonic(1.0, 0.0, 0).is_err());
    }

    #[test]
    fn masking_examples() {
        let evens = Subsequence::arithmetic(2, 0).unwrap();
        let b = WeightSequence::identity().mask_by_indicator(&evens);
        let vals: Vec<f64> = (0..6).map(|j| b.at(j).norm()).collect();
        assert_eq!(vals, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let b = WeightSequence::identity().mask_by_indicator(&Subsequence::all());
        assert!((0..20).all(|j| b.at(j).norm() == 1.0));

        let alg = TracialAlgebra::new(vec![1, 1], vec![1.0, 1.0]).unwrap();
        let psi = TrigPolynomial::central(&alg, vec![c(1.0, 0.0)], vec![vec![0.2, 0.8]]).unwrap();
        let b = WeightSequence::trig(psi, None).mask_by_indicator(&Subsequence::no_squares());
        for j in 0..200u64 {
            let r = (j as f64).sqrt().round() as u64;
            assert_eq!(b.at(j).norm() == 0.0, r * r == j);
        }
    }

    #[test]
    fn weight_spec_json() {
        let s = r#"{"kind": "central", "phases": [[0.0, 0.2]], "perturbation": {"type": "harmonic", "eps0": 0.1}, "seed": 5}"#;
        let spec: WeightSpec = serde_json::from_str(s).unwrap();
        let alg = TracialAlgebra::new(vec![2, 1], vec![1.0, 2.0]).unwrap();
        let w = spec.build(&alg, 0).unwrap();
        assert_eq!(w.kind(), WeightKind::PerturbedTrig);
        assert!((w.bound() - 1.1).abs() < 1e-15);
        assert!(w.is_central());
    }
}
