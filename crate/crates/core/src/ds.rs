//! Positive Dunford-Schwartz operators: constructors, certification, powers.
//!
//! Every representation here is a positive map whose blocks act inside the
//! block structure of the algebra (Kraus operators and unitaries are algebra
//! elements), except the block permutation which moves whole blocks around.

use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebra::{same_algebra, Element, TracialAlgebra, C64};
use crate::error::{invalid, Error, Result};
use crate::random::{random_element, random_positive, seeded_rng};

/// Above this many coordinate dimensions, or for large exponents, powers go
/// through the materialized coordinate matrix instead of direct iteration.
pub const DIRECT_POWER_MAX_DIM_SQ: usize = 64;
pub const DIRECT_POWER_MAX_EXPONENT: u64 = 64;

const UNITARY_TOL: f64 = 1e-10;
const KRAUS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub enum Representation {
    /// `T(x) = u* x u`.
    Unitary { u: Element, u_adj: Element },
    /// `T(x) = Σ K x K*`.
    Kraus { ops: Vec<Element>, adjoints: Vec<Element> },
    /// `T(x)_i = x_{π(i)}`.
    Permutation(Vec<usize>),
    /// `Σ p_k T_k`.
    Mix(Vec<(f64, DsOperator)>),
}

/// A positive linear map on a tracial algebra, with a lazily built coordinate
/// matrix and a cache of its repeated squares.
pub struct DsOperator {
    algebra: Arc<TracialAlgebra>,
    rep: Representation,
    matrix: OnceLock<DMatrix<C64>>,
    squares: RwLock<Vec<Arc<DMatrix<C64>>>>,
}

impl Clone for DsOperator {
    fn clone(&self) -> Self {
        Self::from_rep(self.algebra.clone(), self.rep.clone())
    }
}

impl std::fmt::Debug for DsOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DsOperator").field("rep", &self.rep).finish()
    }
}

/// Maximal defects found by [`DsOperator::verify_ds`]; all are clipped at 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DsCertificate {
    pub samples: usize,
    pub tol: f64,
    /// `λ_max(T(1)) - 1`.
    pub unitality_defect: f64,
    /// `λ_max(T†(1)) - 1`, the worst `τ(T(x)) - τ(x)` over unit-trace positive x.
    pub trace_defect: f64,
    pub positivity_defect: f64,
    pub sup_norm_defect: f64,
    pub l1_norm_defect: f64,
}

impl DsCertificate {
    pub fn max_defect(&self) -> f64 {
        [
            self.unitality_defect,
            self.trace_defect,
            self.positivity_defect,
            self.sup_norm_defect,
            self.l1_norm_defect,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl DsOperator {
    fn from_rep(algebra: Arc<TracialAlgebra>, rep: Representation) -> Self {
        Self { algebra, rep, matrix: OnceLock::new(), squares: RwLock::new(Vec::new()) }
    }

    pub fn identity(algebra: &Arc<TracialAlgebra>) -> Self {
        Self::from_rep(algebra.clone(), Representation::Permutation((0..algebra.num_blocks()).collect()))
    }

    pub fn from_unitary(u: &Element) -> Result<Self> {
        let one = Element::identity(u.algebra());
        let u_adj = u.adjoint();
        let defect = (&u_adj * u).distance(&one).max((u * &u_adj).distance(&one));
        if defect > UNITARY_TOL {
            return invalid(format!("not unitary: defect {defect:.3e}"));
        }
        Ok(Self::from_rep(u.algebra().clone(), Representation::Unitary { u: u.clone(), u_adj }))
    }

    /// Doubly stochastic Kraus channel; both `Σ K*K` and `Σ KK*` must be 1.
    pub fn from_kraus(ops: &[Element]) -> Result<Self> {
        let t = Self::from_kraus_unchecked(ops)?;
        let one = Element::identity(&t.algebra);
        let Representation::Kraus { ops, adjoints } = &t.rep else { unreachable!() };
        let mut left = Element::zero(&t.algebra);
        let mut right = Element::zero(&t.algebra);
        for (k, ka) in ops.iter().zip(adjoints) {
            left = &left + &(ka * k);
            right = &right + &(k * ka);
        }
        let dl = left.distance(&one);
        if dl > KRAUS_TOL {
            return invalid(format!("Σ K*K differs from 1 by {dl:.3e}"));
        }
        let dr = right.distance(&one);
        if dr > KRAUS_TOL {
            return invalid(format!("Σ KK* differs from 1 by {dr:.3e}"));
        }
        Ok(t)
    }

    /// Kraus map without the doubly stochastic check, for building maps that
    /// [`verify_ds`](Self::verify_ds) should reject.
    pub fn from_kraus_unchecked(ops: &[Element]) -> Result<Self> {
        let first = ops.first().ok_or_else(|| Error::InvalidArgument("empty Kraus list".into()))?;
        for k in ops {
            first.check_same(k)?;
        }
        let adjoints = ops.iter().map(Element::adjoint).collect();
        Ok(Self::from_rep(first.algebra().clone(), Representation::Kraus { ops: ops.to_vec(), adjoints }))
    }

    /// Block permutation `T(x)_i = x_{π(i)}`; blocks that trade places must
    /// share dimension and trace weight.
    pub fn from_permutation(algebra: &Arc<TracialAlgebra>, perm: Vec<usize>) -> Result<Self> {
        let n = algebra.num_blocks();
        if perm.len() != n {
            return invalid(format!("permutation of {} entries for {n} blocks", perm.len()));
        }
        let mut seen = vec![false; n];
        for (i, &p) in perm.iter().enumerate() {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return invalid("not a permutation");
            }
            if algebra.dims()[p] != algebra.dims()[i] || algebra.weights()[p] != algebra.weights()[i] {
                return invalid(format!("blocks {i} and {p} differ in dimension or trace weight"));
            }
        }
        Ok(Self::from_rep(algebra.clone(), Representation::Permutation(perm)))
    }

    /// Convex combination `Σ p_k T_k`.
    pub fn mix(components: Vec<(f64, DsOperator)>) -> Result<Self> {
        let (_, first) = components.first().ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
        let algebra = first.algebra.clone();
        if components.iter().any(|(p, t)| !(*p >= 0.0) || !same_algebra(&t.algebra, &algebra)) {
            return invalid("mixture weights must be nonnegative and operators share one algebra");
        }
        let total: f64 = components.iter().map(|c| c.0).sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("mixture weights sum to {total}, not 1"));
        }
        Ok(Self::from_rep(algebra, Representation::Mix(components)))
    }

    pub fn algebra(&self) -> &Arc<TracialAlgebra> {
        &self.algebra
    }

    pub fn representation(&self) -> &Representation {
        &self.rep
    }

    pub fn apply(&self, x: &Element) -> Element {
        assert!(same_algebra(&self.algebra, x.algebra()), "operator and element live in different algebras");
        match &self.rep {
            Representation::Unitary { u, u_adj } => &(u_adj * x) * u,
            Representation::Kraus { ops, adjoints } => ops
                .iter()
                .zip(adjoints)
                .map(|(k, ka)| &(k * x) * ka)
                .reduce(|a, b| &a + &b)
                .expect("nonempty Kraus list"),
            Representation::Permutation(perm) => {
                let blocks = perm.iter().map(|&p| x.block(p).clone()).collect();
                Element::new(&self.algebra, blocks).expect("permutation preserves block shapes")
            }
            Representation::Mix(parts) => parts
                .iter()
                .map(|(p, t)| t.apply(x).scale_real(*p))
                .reduce(|a, b| &a + &b)
                .expect("nonempty mixture"),
        }
    }

    /// Trace adjoint: `τ(T(x) y) = τ(x T†(y))`.
    pub fn apply_adjoint(&self, y: &Element) -> Element {
        match &self.rep {
            Representation::Unitary { u, u_adj } => &(u * y) * u_adj,
            Representation::Kraus { ops, adjoints } => ops
                .iter()
                .zip(adjoints)
                .map(|(k, ka)| &(ka * y) * k)
                .reduce(|a, b| &a + &b)
                .expect("nonempty Kraus list"),
            Representation::Permutation(perm) => {
                let mut blocks = y.blocks().to_vec();
                for (i, &p) in perm.iter().enumerate() {
                    blocks[p] = y.block(i).clone();
                }
                Element::new(&self.algebra, blocks).expect("permutation preserves block shapes")
            }
            Representation::Mix(parts) => parts
                .iter()
                .map(|(p, t)| t.apply_adjoint(y).scale_real(*p))
                .reduce(|a, b| &a + &b)
                .expect("nonempty mixture"),
        }
    }

    /// Block permutation `π` with `T(z x) = (z∘π) T(x)` for every central `z`,
    /// when one exists.
    pub fn central_action(&self) -> Option<Vec<usize>> {
        match &self.rep {
            Representation::Unitary { .. } | Representation::Kraus { .. } => {
                Some((0..self.algebra.num_blocks()).collect())
            }
            Representation::Permutation(p) => Some(p.clone()),
            Representation::Mix(parts) => {
                let mut actions = parts.iter().filter(|(p, _)| *p > 0.0).map(|(_, t)| t.central_action());
                let first = actions.next()??;
                actions.all(|a| a.as_ref() == Some(&first)).then_some(first)
            }
        }
    }

    /// Structural and sampled check of the Dunford-Schwartz conditions.
    pub fn verify_ds(&self, samples: usize, tol: f64, seed: u64) -> Result<DsCertificate> {
        if samples == 0 {
            return invalid("need at least one sample");
        }
        let one = Element::identity(&self.algebra);
        let fail = |kind: &'static str, defect: f64, witness: &Element| Error::CertificationFailure {
            kind,
            defect,
            witness: Box::new(witness.clone()),
        };
        let unitality_defect = (self.apply(&one).max_eigenvalue() - 1.0).max(0.0);
        if unitality_defect > tol {
            return Err(fail("unitality", unitality_defect, &one));
        }
        let trace_defect = (self.apply_adjoint(&one).max_eigenvalue() - 1.0).max(0.0);
        if trace_defect > tol {
            return Err(fail("trace", trace_defect, &one));
        }
        let mut cert = DsCertificate {
            samples,
            tol,
            unitality_defect,
            trace_defect,
            positivity_defect: 0.0,
            sup_norm_defect: 0.0,
            l1_norm_defect: 0.0,
        };
        let mut rng = seeded_rng(seed);
        for _ in 0..samples {
            let x = random_positive(&mut rng, &self.algebra);
            let tx = self.apply(&x);
            let d = (-tx.real_part().min_eigenvalue()).max(tx.self_adjoint_defect()).max(0.0);
            cert.positivity_defect = cert.positivity_defect.max(d);
            if d > tol {
                return Err(fail("positivity", d, &x));
            }
            let d = (tx.trace().re - x.trace().re).max(0.0);
            cert.trace_defect = cert.trace_defect.max(d);
            if d > tol {
                return Err(fail("trace", d, &x));
            }
            let g = random_element(&mut rng, &self.algebra);
            let tg = self.apply(&g);
            let d = (tg.operator_norm() - g.operator_norm()).max(0.0);
            cert.sup_norm_defect = cert.sup_norm_defect.max(d);
            if d > tol {
                return Err(fail("sup-norm", d, &g));
            }
            let d = (trace_norm(&tg) - trace_norm(&g)).max(0.0);
            cert.l1_norm_defect = cert.l1_norm_defect.max(d);
            if d > tol {
                return Err(fail("l1-norm", d, &g));
            }
        }
        Ok(cert)
    }

    /// Matrix of `T` on [`Element::coords`].
    pub fn coordinate_matrix(&self) -> &DMatrix<C64> {
        self.matrix.get_or_init(|| {
            let n = self.algebra.coordinate_dim();
            let mut m = DMatrix::zeros(n, n);
            for c in 0..n {
                let mut e = DVector::zeros(n);
                e[c] = C64::new(1.0, 0.0);
                let basis = Element::from_coords(&self.algebra, &e).expect("length matches");
                m.set_column(c, &self.apply(&basis).coords());
            }
            m
        })
    }

    fn square_power(&self, k: usize) -> Arc<DMatrix<C64>> {
        if let Some(m) = self.squares.read().expect("cache lock").get(k) {
            return m.clone();
        }
        let mut cache = self.squares.write().expect("cache lock");
        if cache.is_empty() {
            cache.push(Arc::new(self.coordinate_matrix().clone()));
        }
        while cache.len() <= k {
            let last = cache.last().unwrap();
            let next = last.as_ref() * last.as_ref();
            cache.push(Arc::new(next));
        }
        cache[k].clone()
    }

    /// `T^j(x)`.
    pub fn apply_power(&self, j: u64, x: &Element) -> Element {
        let dim = self.algebra.total_dim();
        if j <= 1 || (dim * dim <= DIRECT_POWER_MAX_DIM_SQ && j <= DIRECT_POWER_MAX_EXPONENT) {
            let mut y = x.clone();
            for _ in 0..j {
                y = self.apply(&y);
            }
            return y;
        }
        let mut v = x.coords();
        let mut k = 0;
        let mut rest = j;
        while rest > 0 {
            if rest & 1 == 1 {
                v = self.square_power(k).as_ref() * v;
            }
            rest >>= 1;
            k += 1;
        }
        Element::from_coords(&self.algebra, &v).expect("length matches")
    }
}

/// `‖x‖₁ = τ(|x|)`.
pub fn trace_norm(x: &Element) -> f64 {
    x.singular_values().into_iter().map(|(s, m)| s * m).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_root_unitary, random_unitary};

    fn m2() -> Arc<TracialAlgebra> {
        TracialAlgebra::new(vec![2], vec![1.0]).unwrap()
    }

    fn sign_flip() -> DsOperator {
        let alg = m2();
        DsOperator::from_unitary(&Element::from_diagonals(&alg, &[vec![1.0, -1.0]]).unwrap()).unwrap()
    }

    fn swap_channel() -> DsOperator {
        let alg = m2();
        let e12 = Element::matrix_unit(&alg, 0, 0, 1).unwrap();
        let e21 = Element::matrix_unit(&alg, 0, 1, 0).unwrap();
        DsOperator::from_kraus(&[e12, e21]).unwrap()
    }

    #[test]
    fn unitary_examples() {
        let alg = m2();
        let id = DsOperator::from_unitary(&Element::identity(&alg)).unwrap();
        let x = Element::matrix_unit(&alg, 0, 0, 1).unwrap();
        assert_eq!(id.apply(&x).distance(&x), 0.0);
        let t = sign_flip();
        assert_eq!(t.apply(&x).distance(&-&x), 0.0);
        assert_eq!(t.apply(&Element::identity(&alg)).distance(&Element::identity(&alg)), 0.0);
        let bad = Element::from_diagonals(&alg, &[vec![1.0, 2.0]]).unwrap();
        assert!(DsOperator::from_unitary(&bad).is_err());
    }

    #[test]
    fn kraus_examples() {
        let alg = m2();
        let t = swap_channel();
        let x = Element::new(
            &alg,
            vec![crate::algebra::Block::from_row_slice(
                2,
                2,
                &[C64::new(2.0, 0.0), C64::new(7.0, 1.0), C64::new(-3.0, 0.5), C64::new(5.0, 0.0)],
            )],
        )
        .unwrap();
        let expect = Element::from_diagonals(&alg, &[vec![5.0, 2.0]]).unwrap();
        assert_eq!(t.apply(&x).distance(&expect), 0.0);

        let one = DsOperator::from_kraus(&[Element::identity(&alg)]).unwrap();
        assert_eq!(one.apply(&x).distance(&x), 0.0);

        let mut rng = seeded_rng(4);
        let u = random_unitary(&mut rng, &alg);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mixed = DsOperator::from_kraus(&[Element::identity(&alg).scale_real(h), u.scale_real(h)]).unwrap();
        let expect = (&x + &(&(&u * &x) * &u.adjoint())).scale_real(0.5);
        assert!(mixed.apply(&x).distance(&expect) < 1e-12);

        let unbalanced = Element::from_diagonals(&alg, &[vec![1.0, 2.0]]).unwrap();
        assert!(DsOperator::from_kraus(&[unbalanced]).is_err());
    }

    #[test]
    fn certification_examples() {
        let cert = sign_flip().verify_ds(20, 1e-12, 1).unwrap();
        assert!(cert.max_defect() <= 1e-12);

        let alg = m2();
        let k = Element::from_diagonals(&alg, &[vec![1.0, 1.5f64.sqrt()]]).unwrap();
        let t = DsOperator::from_kraus_unchecked(&[k]).unwrap();
        match t.verify_ds(5, 1e-9, 1) {
            Err(Error::CertificationFailure { kind, defect, .. }) => {
                assert_eq!(kind, "unitality");
                assert!((defect - 0.5).abs() < 1e-12);
            }
            other => panic!("expected certification failure, got {other:?}"),
        }

        let mix = DsOperator::mix(vec![(0.3, sign_flip()), (0.7, swap_channel())]).unwrap();
        assert!(mix.verify_ds(20, 1e-10, 2).is_ok());
    }

    #[test]
    fn power_examples() {
        let alg = m2();
        let x = Element::matrix_unit(&alg, 0, 0, 1).unwrap();
        assert_eq!(sign_flip().apply_power(0, &x).distance(&x), 0.0);
        assert_eq!(sign_flip().apply_power(3, &x).distance(&-&x), 0.0);
        let d = Element::from_diagonals(&alg, &[vec![2.0, -5.0]]).unwrap();
        assert_eq!(swap_channel().apply_power(2, &d).distance(&d), 0.0);
        // matrix route for large exponents
        assert!(sign_flip().apply_power(1001, &x).distance(&-&x) < 1e-12);
    }

    #[test]
    fn matrix_and_direct_powers_agree() {
        let mut rng = seeded_rng(9);
        let alg = TracialAlgebra::new(vec![3, 2], vec![1.0, 0.5]).unwrap();
        let u = random_root_unitary(&mut rng, &alg, 4);
        let t = DsOperator::from_unitary(&u).unwrap();
        let x = random_element(&mut rng, &alg);
        let mut direct = x.clone();
        for _ in 0..200 {
            direct = t.apply(&direct);
        }
        assert!(t.apply_power(200, &x).distance(&direct) < 1e-10);
    }

    #[test]
    fn permutation_and_central_action() {
        let alg = TracialAlgebra::new(vec![2, 2, 1], vec![1.0, 1.0, 3.0]).unwrap();
        let t = DsOperator::from_permutation(&alg, vec![1, 0, 2]).unwrap();
        assert!(t.verify_ds(10, 1e-12, 3).is_ok());
        assert_eq!(t.central_action(), Some(vec![1, 0, 2]));
        assert!(DsOperator::from_permutation(&alg, vec![2, 1, 0]).is_err());
        let u = DsOperator::from_unitary(&Element::identity(&alg)).unwrap();
        let m = DsOperator::mix(vec![(0.5, t.clone()), (0.5, u)]).unwrap();
        assert_eq!(m.central_action(), None);
        let m = DsOperator::mix(vec![(0.5, t.clone()), (0.5, t)]).unwrap();
        assert_eq!(m.central_action(), Some(vec![1, 0, 2]));
    }

    #[test]
    fn adjoint_is_trace_dual() {
        let mut rng = seeded_rng(5);
        let alg = TracialAlgebra::new(vec![2, 2], vec![1.0, 1.0]).unwrap();
        let u = random_unitary(&mut rng, &alg);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let k = DsOperator::from_kraus(&[Element::identity(&alg).scale_real(h), u.scale_real(h)]).unwrap();
        let p = DsOperator::from_permutation(&alg, vec![1, 0]).unwrap();
        for t in [k, p] {
            let x = random_element(&mut rng, &alg);
            let y = random_element(&mut rng, &alg);
            let lhs = (&t.apply(&x) * &y).trace();
            let rhs = (&x * &t.apply_adjoint(&y)).trace();
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }
}
