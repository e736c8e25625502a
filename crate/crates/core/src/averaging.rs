//! Weighted ergodic averages `A_n = (1/n) Σ_{j<n} T^j(b_j x d_j)`, their
//! subsequential versions and the `M_n` averages.
//!
//! When all weights are central and `T` moves the center by a block
//! permutation `π`, `T^m(z x) = (z∘π^m) T^m(x)`, so the stream only needs the
//! iterates `T^m(x)`, one application of `T` per index. The iterate is
//! compared with a fresh `T^m(x)` every [`RESYNC_PERIOD`] indices.

use std::sync::Arc;

use crate::algebra::{CenterElement, Element, C64};
use crate::ds::DsOperator;
use crate::error::{invalid, Error, Result};
use crate::subseq::Subsequence;
use crate::weights::WeightSequence;

pub const RESYNC_PERIOD: u64 = 256;
pub const DRIFT_TOL: f64 = 1e-9;
/// Gaps between consecutive indices above this are bridged by `apply_power`.
const MAX_STEP_GAP: u64 = 64;

#[derive(Debug, Clone)]
pub struct AverageRequest {
    pub operator: Arc<DsOperator>,
    pub left: WeightSequence,
    pub right: Option<WeightSequence>,
    pub subsequence: Option<Subsequence>,
    pub x: Element,
    pub n_max: usize,
}

impl AverageRequest {
    /// Plain request with `b_j = 1` and no right weights.
    pub fn new(operator: Arc<DsOperator>, x: Element, n_max: usize) -> Result<Self> {
        let req = Self { operator, left: WeightSequence::identity(), right: None, subsequence: None, x, n_max };
        req.validate()?;
        Ok(req)
    }

    pub fn with_left(mut self, b: WeightSequence) -> Self {
        self.left = b;
        self
    }

    pub fn with_right(mut self, d: WeightSequence) -> Self {
        self.right = Some(d);
        self
    }

    pub fn with_subsequence(mut self, k: Subsequence) -> Self {
        self.subsequence = Some(k);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !crate::algebra::same_algebra(self.operator.algebra(), self.x.algebra()) {
            return invalid("element and operator live in different algebras");
        }
        if self.n_max == 0 {
            return invalid("horizon must be ≥ 1");
        }
        Ok(())
    }

    /// Weights are central and `T` acts on the center by a block permutation.
    pub fn has_central_fast_path(&self) -> bool {
        self.left.is_central()
            && self.right.as_ref().is_none_or(|d| d.is_central())
            && self.operator.central_action().is_some()
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.n_max {
            return invalid(format!("n = {n} outside 1..={}", self.n_max));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `A_n`: indices `0, 1, …, n-1`.
    Plain,
    /// `A_n^k`: indices `k_0, …, k_{n-1}`.
    Subsequential,
}

struct FastState {
    pos: u64,
    iterate: Element,
    action: Vec<usize>,
    /// `π^pos`.
    power: Vec<usize>,
}

/// Running sum producing `A_1, A_2, …` one term at a time.
pub struct AverageStream<'a> {
    req: &'a AverageRequest,
    family: Family,
    count: u64,
    sum: Element,
    fast: Option<FastState>,
}

impl<'a> AverageStream<'a> {
    pub fn new(req: &'a AverageRequest, family: Family) -> Result<Self> {
        req.validate()?;
        if family == Family::Subsequential && req.subsequence.is_none() {
            return Err(Error::Precondition("subsequential average needs a subsequence".into()));
        }
        let fast = req.has_central_fast_path().then(|| {
            let action = req.operator.central_action().expect("checked above");
            FastState { pos: 0, iterate: req.x.clone(), power: (0..action.len()).collect(), action }
        });
        Ok(Self { req, family, count: 0, sum: Element::zero(req.x.algebra()), fast })
    }

    /// Index of the `j`-th term.
    pub fn index(&self, j: u64) -> Result<u64> {
        match (self.family, &self.req.subsequence) {
            (Family::Plain, _) => Ok(j),
            (Family::Subsequential, Some(k)) => {
                k.term(j).ok_or_else(|| Error::InvalidArgument(format!("subsequence has no term {j}")))
            }
            (Family::Subsequential, None) => unreachable!("checked in new"),
        }
    }

    fn term(&mut self, m: u64) -> Result<Element> {
        let req = self.req;
        let alg = req.x.algebra();
        let Some(state) = self.fast.as_mut() else {
            let mut y = req.left.at(m).left_mul(&req.x);
            if let Some(d) = &req.right {
                y = d.at(m).right_mul(&y);
            }
            return Ok(req.operator.apply_power(m, &y));
        };
        let start = state.pos;
        if m - start > MAX_STEP_GAP {
            state.iterate = req.operator.apply_power(m - start, &state.iterate);
            for _ in start..m {
                state.power = state.power.iter().map(|&i| state.action[i]).collect();
            }
        } else {
            for _ in start..m {
                state.iterate = req.operator.apply(&state.iterate);
                state.power = state.power.iter().map(|&i| state.action[i]).collect();
            }
        }
        state.pos = m;
        if m / RESYNC_PERIOD > start / RESYNC_PERIOD {
            let fresh = req.operator.apply_power(m, &req.x);
            let drift = fresh.distance(&state.iterate);
            if drift > DRIFT_TOL * req.x.operator_norm().max(1.0) {
                return Err(Error::Drift(drift));
            }
            state.iterate = fresh;
        }
        let mut c = req.left.at(m).as_center(alg).expect("central weights");
        if let Some(d) = &req.right {
            c = c.mul(&d.at(m).as_center(alg).expect("central weights"));
        }
        let moved: Vec<C64> = state.power.iter().map(|&i| c.scalars()[i]).collect();
        Ok(CenterElement::new(alg, moved).expect("one scalar per block").mul_element(&state.iterate))
    }

    /// Number of terms summed so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// Unnormalized sum of the terms so far.
    pub fn sum(&self) -> &Element {
        &self.sum
    }

    /// Adds the next term and returns the new average.
    pub fn next_average(&mut self) -> Result<Element> {
        let m = self.index(self.count)?;
        let t = self.term(m)?;
        self.sum = &self.sum + &t;
        self.count += 1;
        Ok(self.sum.scale_real(1.0 / self.count as f64))
    }
}

/// `A_1, …, A_n` of the given family.
pub fn averages(req: &AverageRequest, family: Family, n: usize) -> Result<Vec<Element>> {
    req.check_n(n)?;
    let mut s = AverageStream::new(req, family)?;
    (0..n).map(|_| s.next_average()).collect()
}

fn nth(req: &AverageRequest, family: Family, n: usize) -> Result<AverageStream<'_>> {
    req.check_n(n)?;
    let mut s = AverageStream::new(req, family)?;
    for _ in 0..n {
        let m = s.index(s.count)?;
        let t = s.term(m)?;
        s.sum = &s.sum + &t;
        s.count += 1;
    }
    Ok(s)
}

/// `A_n({b_j}, {d_j}, x)`; any subsequence on the request is ignored.
pub fn average(req: &AverageRequest, n: usize) -> Result<Element> {
    Ok(nth(req, Family::Plain, n)?.sum.scale_real(1.0 / n as f64))
}

/// `A_n^k({b_j}, {d_j}, x) = (1/n) Σ_{j<n} T^{k_j}(b_{k_j} x d_{k_j})`.
pub fn subsequential_average(req: &AverageRequest, n: usize) -> Result<Element> {
    Ok(nth(req, Family::Subsequential, n)?.sum.scale_real(1.0 / n as f64))
}

/// `M_n = (1/k_n) Σ_{j<n} T^{k_j}(b_{k_j} x d_{k_j})`.
pub fn m_average(req: &AverageRequest, n: usize) -> Result<Element> {
    let s = nth(req, Family::Subsequential, n)?;
    let kn = s.index(n as u64)?;
    Ok(s.sum.scale_real(1.0 / kn as f64))
}

/// Both sides of `A_n^k({b_j}, x) = ((k_{n-1}+1)/n) A_{k_{n-1}+1}({c_j b_j}, x)`.
#[derive(Debug, Clone)]
pub struct RewriteCheck {
    pub lhs: Element,
    pub rhs: Element,
    pub defect: f64,
    pub passed: bool,
}

pub fn rewrite_identity_check(req: &AverageRequest, n: usize, tol: f64) -> Result<RewriteCheck> {
    if req.right.is_some() {
        return Err(Error::Precondition("the rewrite identity is stated for one-sided averages".into()));
    }
    let k = req
        .subsequence
        .as_ref()
        .ok_or_else(|| Error::Precondition("the rewrite identity needs a subsequence".into()))?;
    let lhs = subsequential_average(req, n)?;
    let last = k.term(n as u64 - 1).ok_or_else(|| Error::InvalidArgument(format!("subsequence has no term {}", n - 1)))?;
    let m = last as usize + 1;
    let masked = AverageRequest {
        operator: req.operator.clone(),
        left: req.left.mask_by_indicator(k),
        right: None,
        subsequence: None,
        x: req.x.clone(),
        n_max: m,
    };
    let rhs = average(&masked, m)?.scale_real(m as f64 / n as f64);
    let defect = lhs.distance(&rhs);
    Ok(RewriteCheck { lhs, rhs, defect, passed: defect <= tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::TracialAlgebra;
    use crate::random::{random_element, random_unitary, seeded_rng};
    use crate::weights::{PhaseList, WeightSpec};

    fn flip() -> (Arc<DsOperator>, Element) {
        let alg = TracialAlgebra::new(vec![2], vec![1.0]).unwrap();
        let u = Element::from_diagonals(&alg, &[vec![1.0, -1.0]]).unwrap();
        (Arc::new(DsOperator::from_unitary(&u).unwrap()), Element::matrix_unit(&alg, 0, 0, 1).unwrap())
    }

    #[test]
    fn average_examples() {
        let mut rng = seeded_rng(1);
        let alg = TracialAlgebra::new(vec![2, 1], vec![1.0, 2.0]).unwrap();
        let x = random_element(&mut rng, &alg);
        let id = Arc::new(DsOperator::identity(&alg));
        let req = AverageRequest::new(id, x.clone(), 50).unwrap();
        for n in [1, 7, 50] {
            assert!(average(&req, n).unwrap().distance(&x) < 1e-14);
        }

        let (t, e12) = flip();
        let req = AverageRequest::new(t, e12.clone(), 10).unwrap();
        assert!(average(&req, 3).unwrap().distance(&e12.scale_real(1.0 / 3.0)) < 1e-15);
        assert!(average(&req, 2).unwrap().operator_norm() < 1e-15);
        let evens = req.clone().with_subsequence(Subsequence::arithmetic(2, 0).unwrap());
        for n in [1, 4, 9] {
            assert!(subsequential_average(&evens, n).unwrap().distance(&e12) < 1e-15);
        }
        assert!(average(&req, 11).is_err());
    }

    #[test]
    fn m_average_examples() {
        let (t, e12) = flip();
        let req = AverageRequest::new(t, e12.clone(), 10).unwrap().with_subsequence(Subsequence::all());
        for n in 1..=10 {
            assert!(m_average(&req, n).unwrap().distance(&average(&req, n).unwrap()) < 1e-15);
        }
        let req = req.with_subsequence(Subsequence::arithmetic(3, 0).unwrap());
        // k_0 = 0, k_1 = 3
        assert!(m_average(&req, 1).unwrap().distance(&e12.scale_real(1.0 / 3.0)) < 1e-15);
    }

    #[test]
    fn rewrite_identity_on_builtin_subsequences() {
        let mut rng = seeded_rng(2);
        let alg = TracialAlgebra::new(vec![2, 2], vec![1.0, 0.5]).unwrap();
        let t = Arc::new(DsOperator::from_unitary(&random_unitary(&mut rng, &alg)).unwrap());
        let x = random_element(&mut rng, &alg);
        let b = WeightSpec::Central { coefficients: None, phases: PhaseList::Single(vec![0.1, 0.7]), perturbation: None, seed: None }
            .build(&alg, 0)
            .unwrap();
        for k in [Subsequence::all(), Subsequence::arithmetic(2, 0).unwrap(), Subsequence::no_squares()] {
            let req = AverageRequest::new(t.clone(), x.clone(), 64).unwrap().with_left(b.clone()).with_subsequence(k);
            for n in [1, 8, 16, 64] {
                let check = rewrite_identity_check(&req, n, 1e-12).unwrap();
                assert!(check.passed, "defect {}", check.defect);
            }
        }
    }

    #[test]
    fn fast_and_general_paths_agree() {
        let mut rng = seeded_rng(3);
        let alg = TracialAlgebra::new(vec![2, 2, 1], vec![1.0, 1.0, 2.0]).unwrap();
        let perm = DsOperator::from_permutation(&alg, vec![1, 0, 2]).unwrap();
        let conj = DsOperator::from_unitary(&random_unitary(&mut rng, &alg)).unwrap();
        let x = random_element(&mut rng, &alg);
        let b = WeightSpec::Central { coefficients: None, phases: PhaseList::Single(vec![0.1, 0.3, 0.6]), perturbation: None, seed: None }
            .build(&alg, 0)
            .unwrap();
        for t in [perm, conj] {
            let t = Arc::new(t);
            let req = AverageRequest::new(t.clone(), x.clone(), 600).unwrap().with_left(b.clone()).with_right(b.clone());
            assert!(req.has_central_fast_path());
            let fast = average(&req, 600).unwrap();
            // brute force
            let mut sum = Element::zero(&alg);
            let tj = |j: u64, y: &Element| {
                let mut z = y.clone();
                for _ in 0..j {
                    z = t.apply(&z);
                }
                z
            };
            for j in 0..600u64 {
                let w = b.at(j).to_element(&alg);
                sum = &sum + &tj(j, &(&(&w * &x) * &w));
            }
            assert!(fast.distance(&sum.scale_real(1.0 / 600.0)) < 1e-10);
        }
    }
}
