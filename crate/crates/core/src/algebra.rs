//! Finite direct sums of full matrix blocks with a weighted trace.
//!
//! An algebra `M = M_{d_1} ⊕ … ⊕ M_{d_k}` carries the trace
//! `τ(x) = Σ_i w_i · Tr(x_i)`. Every operator here is bounded, so the
//! measurable operators coincide with `M` and the measure topology with the
//! norm topology.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex<f64>;
pub type Block = DMatrix<C64>;

/// Tolerance for projection identities `e² = e`, `e* = e`.
pub const PROJECTION_TOL: f64 = 1e-10;
/// Eigenvalue threshold used when extracting the range intersection of projections.
pub const MEET_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TracialAlgebra {
    dims: Vec<usize>,
    weights: Vec<f64>,
    unit_trace: f64,
}

impl TracialAlgebra {
    pub fn new(dims: Vec<usize>, weights: Vec<f64>) -> Result<Arc<Self>> {
        if dims.is_empty() {
            return invalid("algebra needs at least one block");
        }
        if dims.len() != weights.len() {
            return invalid(format!(
                "{} block dimensions but {} trace weights",
                dims.len(),
                weights.len()
            ));
        }
        if let Some(d) = dims.iter().find(|&&d| d == 0) {
            return invalid(format!("block dimension {d} must be positive"));
        }
        if let Some(w) = weights.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
            return invalid(format!("trace weight {w} must be positive and finite"));
        }
        let unit_trace = dims.iter().zip(&weights).map(|(&d, &w)| d as f64 * w).sum();
        Ok(Arc::new(Self { dims, weights, unit_trace }))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    /// Sum of block sizes: the dimension of the Hilbert space the algebra acts on.
    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Number of complex coordinates of an element, `Σ d_i²`.
    pub fn coordinate_dim(&self) -> usize {
        self.dims.iter().map(|d| d * d).sum()
    }

    /// `τ(1)`.
    pub fn unit_trace(&self) -> f64 {
        self.unit_trace
    }
}

pub(crate) fn same_algebra(a: &Arc<TracialAlgebra>, b: &Arc<TracialAlgebra>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// An element of a [`TracialAlgebra`]: one complex square matrix per block.
#[derive(Clone)]
pub struct Element {
    algebra: Arc<TracialAlgebra>,
    blocks: Vec<Block>,
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Element")
            .field("dims", &self.algebra.dims)
            .field("blocks", &self.blocks)
            .finish()
    }
}

impl Element {
    pub fn new(algebra: &Arc<TracialAlgebra>, blocks: Vec<Block>) -> Result<Self> {
        if blocks.len() != algebra.num_blocks() {
            return invalid(format!(
                "expected {} blocks, got {}",
                algebra.num_blocks(),
                blocks.len()
            ));
        }
        for (i, (b, &d)) in blocks.iter().zip(algebra.dims()).enumerate() {
            if b.nrows() != d || b.ncols() != d {
                return invalid(format!(
                    "block {i} has shape {}x{}, expected {d}x{d}",
                    b.nrows(),
                    b.ncols()
                ));
            }
        }
        Ok(Self { algebra: algebra.clone(), blocks })
    }

    pub(crate) fn from_blocks_unchecked(algebra: &Arc<TracialAlgebra>, blocks: Vec<Block>) -> Self {
        debug_assert_eq!(blocks.len(), algebra.num_blocks());
        Self { algebra: algebra.clone(), blocks }
    }

    pub fn zero(algebra: &Arc<TracialAlgebra>) -> Self {
        let blocks = algebra.dims().iter().map(|&d| Block::zeros(d, d)).collect();
        Self::from_blocks_unchecked(algebra, blocks)
    }

    pub fn identity(algebra: &Arc<TracialAlgebra>) -> Self {
        Self::scalar(algebra, C64::new(1.0, 0.0))
    }

    pub fn scalar(algebra: &Arc<TracialAlgebra>, c: C64) -> Self {
        let blocks = algebra
            .dims()
            .iter()
            .map(|&d| Block::from_diagonal_element(d, d, c))
            .collect();
        Self::from_blocks_unchecked(algebra, blocks)
    }

    /// Block-diagonal element with real diagonal entries, one list per block.
    pub fn from_diagonals(algebra: &Arc<TracialAlgebra>, diagonals: &[Vec<f64>]) -> Result<Self> {
        if diagonals.len() != algebra.num_blocks() {
            return invalid("one diagonal per block required");
        }
        let mut blocks = Vec::with_capacity(diagonals.len());
        for (diag, &d) in diagonals.iter().zip(algebra.dims()) {
            if diag.len() != d {
                return invalid(format!("diagonal of length {} for block of size {d}", diag.len()));
            }
            let v = DVector::from_iterator(d, diag.iter().map(|&r| C64::new(r, 0.0)));
            blocks.push(Block::from_diagonal(&v));
        }
        Ok(Self::from_blocks_unchecked(algebra, blocks))
    }

    /// Matrix unit `E_{row,col}` inside `block`.
    pub fn matrix_unit(algebra: &Arc<TracialAlgebra>, block: usize, row: usize, col: usize) -> Result<Self> {
        let mut x = Self::zero(algebra);
        let d = *algebra
            .dims()
            .get(block)
            .ok_or_else(|| Error::InvalidArgument(format!("no block {block}")))?;
        if row >= d || col >= d {
            return invalid(format!("entry ({row},{col}) outside block of size {d}"));
        }
        x.blocks[block][(row, col)] = C64::new(1.0, 0.0);
        Ok(x)
    }

    pub fn algebra(&self) -> &Arc<TracialAlgebra> {
        &self.algebra
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &Block {
        &self.blocks[i]
    }

    pub fn into_blocks(self) -> Vec<Block> {
        self.blocks
    }

    pub fn same_algebra(&self, other: &Element) -> bool {
        same_algebra(&self.algebra, &other.algebra)
    }

    pub(crate) fn check_same(&self, other: &Element) -> Result<()> {
        if self.same_algebra(other) {
            Ok(())
        } else {
            Err(Error::AlgebraMismatch)
        }
    }

    pub fn map_blocks(&self, mut f: impl FnMut(usize, &Block) -> Block) -> Element {
        let blocks = self.blocks.iter().enumerate().map(|(i, b)| f(i, b)).collect();
        Self::from_blocks_unchecked(&self.algebra, blocks)
    }

    pub fn adjoint(&self) -> Element {
        self.map_blocks(|_, b| b.adjoint())
    }

    pub fn scale(&self, c: C64) -> Element {
        self.map_blocks(|_, b| b * c)
    }

    pub fn scale_real(&self, r: f64) -> Element {
        self.scale(C64::new(r, 0.0))
    }

    /// `τ(x) = Σ_i w_i Tr(x_i)`.
    pub fn trace(&self) -> C64 {
        self.blocks
            .iter()
            .zip(self.algebra.weights())
            .map(|(b, &w)| b.trace() * w)
            .sum()
    }

    /// Largest singular value over all blocks.
    pub fn operator_norm(&self) -> f64 {
        self.blocks.iter().map(block_operator_norm).fold(0.0, f64::max)
    }

    /// Operator norm of `self - other`.
    pub fn distance(&self, other: &Element) -> f64 {
        (self - other).operator_norm()
    }

    /// Largest absolute entry; used for exact-zero style comparisons.
    pub fn max_abs_entry(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `Re x = (x + x*) / 2`.
    pub fn real_part(&self) -> Element {
        self.map_blocks(|_, b| (b + b.adjoint()) * C64::new(0.5, 0.0))
    }

    /// `Im x = (x - x*) / 2i`.
    pub fn imag_part(&self) -> Element {
        self.map_blocks(|_, b| (b - b.adjoint()) * C64::new(0.0, -0.5))
    }

    pub fn self_adjoint_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| block_operator_norm(&(b - b.adjoint())))
            .fold(0.0, f64::max)
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.self_adjoint_defect() <= tol
    }

    /// Eigenvalues of the hermitian part with their trace masses (one entry per eigenvector).
    pub fn eigenvalues(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.algebra.total_dim());
        for (b, &w) in self.blocks.iter().zip(self.algebra.weights()) {
            let (vals, _) = hermitian_eigen(b);
            out.extend(vals.into_iter().map(|v| (v, w)));
        }
        out
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().map(|(v, _)| v).fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().map(|(v, _)| v).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_positive(&self, tol: f64) -> bool {
        self.is_self_adjoint(tol) && self.min_eigenvalue() >= -tol
    }

    /// Singular values of every block with their trace masses, zeros included.
    pub fn singular_values(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.algebra.total_dim());
        for (b, &w) in self.blocks.iter().zip(self.algebra.weights()) {
            out.extend(block_singular_values(b).into_iter().map(|s| (s, w)));
        }
        out
    }

    /// `|x| = (x* x)^{1/2}`.
    pub fn abs(&self) -> Element {
        self.map_blocks(|_, b| {
            let g = b.adjoint() * b;
            apply_hermitian(&g, |t| t.max(0.0).sqrt())
        })
    }

    /// `f(x) = Σ f(λ) e_λ` for self-adjoint `x`, computed per eigenvector.
    pub fn functional_calculus(&self, f: impl Fn(f64) -> f64) -> Result<Element> {
        let tol = 1e-9 * self.operator_norm().max(1.0);
        if !self.is_self_adjoint(tol) {
            return Err(Error::Precondition(format!(
                "functional calculus needs a self-adjoint element (defect {:.3e})",
                self.self_adjoint_defect()
            )));
        }
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (vals, vecs) = hermitian_eigen(b);
            let mut fv = Vec::with_capacity(vals.len());
            for &l in &vals {
                let y = f(l);
                if !y.is_finite() {
                    return Err(Error::Domain(format!("function undefined at eigenvalue {l}")));
                }
                fv.push(y);
            }
            blocks.push(reassemble(&vecs, &fv));
        }
        Ok(Self::from_blocks_unchecked(&self.algebra, blocks))
    }

    /// Positive part `x₊` of the hermitian part of `x`.
    pub fn positive_part(&self) -> Element {
        self.map_blocks(|_, b| apply_hermitian(b, |t| t.max(0.0)))
    }

    /// Negative part `x₋` with `x = x₊ - x₋` for self-adjoint `x`.
    pub fn negative_part(&self) -> Element {
        self.map_blocks(|_, b| apply_hermitian(b, |t| (-t).max(0.0)))
    }

    /// Spectral decomposition with eigenvalues merged across blocks.
    ///
    /// Eigenvalues closer than `tol` (default `1e-8·‖x‖`) fall into one cluster whose
    /// eigenprojection is the sum of the corresponding eigenvectors in every block.
    pub fn spectral_decomposition(&self, tol: Option<f64>) -> Result<SpectralDecomposition> {
        let norm = self.operator_norm();
        let tol = tol.unwrap_or(1e-8 * norm);
        if self.self_adjoint_defect() > tol.max(1e-12 * norm.max(1.0)) {
            return Err(Error::Precondition(format!(
                "spectral decomposition needs a self-adjoint element (defect {:.3e})",
                self.self_adjoint_defect()
            )));
        }
        struct Pair {
            value: f64,
            block: usize,
            vector: DVector<C64>,
        }
        let mut pairs = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let (vals, vecs) = hermitian_eigen(b);
            for (k, &v) in vals.iter().enumerate() {
                pairs.push(Pair { value: v, block: i, vector: vecs.column(k).into_owned() });
            }
        }
        pairs.sort_by(|a, b| b.value.total_cmp(&a.value));

        let mut eigenvalues = Vec::new();
        let mut projections = Vec::new();
        let mut masses = Vec::new();
        let mut start = 0;
        while start < pairs.len() {
            let mut end = start + 1;
            while end < pairs.len() && pairs[end - 1].value - pairs[end].value <= tol {
                end += 1;
            }
            let cluster = &pairs[start..end];
            let mean = cluster.iter().map(|p| p.value).sum::<f64>() / cluster.len() as f64;
            let mut e = Element::zero(&self.algebra);
            let mut mass = 0.0;
            for p in cluster {
                e.blocks[p.block] += &p.vector * p.vector.adjoint();
                mass += self.algebra.weights()[p.block];
            }
            eigenvalues.push(mean);
            projections.push(Projection(e));
            masses.push(mass);
            start = end;
        }
        Ok(SpectralDecomposition { eigenvalues, projections, trace_masses: masses })
    }

    /// True iff `y - x ≥ -tol` in the operator order.
    pub fn order_leq(&self, other: &Element, tol: f64) -> Result<bool> {
        self.check_same(other)?;
        Ok((other - self).min_eigenvalue() >= -tol)
    }

    /// Column-major concatenation of the block entries.
    pub fn coords(&self) -> DVector<C64> {
        let n = self.algebra.coordinate_dim();
        DVector::from_iterator(n, self.blocks.iter().flat_map(|b| b.iter().copied()))
    }

    pub fn from_coords(algebra: &Arc<TracialAlgebra>, v: &DVector<C64>) -> Result<Self> {
        if v.len() != algebra.coordinate_dim() {
            return invalid("coordinate vector has the wrong length");
        }
        let mut offset = 0;
        let mut blocks = Vec::with_capacity(algebra.num_blocks());
        for &d in algebra.dims() {
            blocks.push(Block::from_iterator(d, d, v.iter().skip(offset).take(d * d).copied()));
            offset += d * d;
        }
        Ok(Self::from_blocks_unchecked(algebra, blocks))
    }

    pub fn to_literal(&self) -> ElementLiteral {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                (0..b.nrows())
                    .map(|r| (0..b.ncols()).map(|c| [b[(r, c)].re, b[(r, c)].im]).collect())
                    .collect()
            })
            .collect();
        ElementLiteral {
            blocks,
            dims: self.algebra.dims().to_vec(),
            weights: self.algebra.weights().to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_literal())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let lit: ElementLiteral = serde_json::from_str(s)?;
        lit.into_element()
    }
}

/// JSON form `{"blocks": [[[[re, im], …], …], …], "dims": […], "weights": […]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementLiteral {
    pub blocks: Vec<Vec<Vec<[f64; 2]>>>,
    pub dims: Vec<usize>,
    pub weights: Vec<f64>,
}

impl ElementLiteral {
    pub fn into_element(self) -> Result<Element> {
        let algebra = TracialAlgebra::new(self.dims, self.weights)?;
        blocks_from_rows(&algebra, &self.blocks)
    }
}

/// Builds an element of `algebra` from row lists of `[re, im]` pairs.
pub fn blocks_from_rows(algebra: &Arc<TracialAlgebra>, rows: &[Vec<Vec<[f64; 2]>>]) -> Result<Element> {
    let mut blocks = Vec::with_capacity(rows.len());
    for (i, block) in rows.iter().enumerate() {
        let d = block.len();
        if block.iter().any(|r| r.len() != d) {
            return invalid(format!("block {i} is not square"));
        }
        blocks.push(Block::from_fn(d, d, |r, c| C64::new(block[r][c][0], block[r][c][1])));
    }
    Element::new(algebra, blocks)
}

impl Add<&Element> for &Element {
    type Output = Element;
    fn add(self, rhs: &Element) -> Element {
        assert!(self.same_algebra(rhs), "adding elements of different algebras");
        self.map_blocks(|i, b| b + &rhs.blocks[i])
    }
}

impl Sub<&Element> for &Element {
    type Output = Element;
    fn sub(self, rhs: &Element) -> Element {
        assert!(self.same_algebra(rhs), "subtracting elements of different algebras");
        self.map_blocks(|i, b| b - &rhs.blocks[i])
    }
}

impl Mul<&Element> for &Element {
    type Output = Element;
    fn mul(self, rhs: &Element) -> Element {
        assert!(self.same_algebra(rhs), "multiplying elements of different algebras");
        self.map_blocks(|i, b| b * &rhs.blocks[i])
    }
}

impl Neg for &Element {
    type Output = Element;
    fn neg(self) -> Element {
        self.map_blocks(|_, b| -b)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Element> for Element {
            type Output = Element;
            fn $m(self, rhs: Element) -> Element {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Element> for Element {
            type Output = Element;
            fn $m(self, rhs: &Element) -> Element {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// A self-adjoint idempotent element.
#[derive(Debug, Clone)]
pub struct Projection(Element);

impl Projection {
    pub fn new(e: Element, tol: f64) -> Result<Self> {
        let sa = e.self_adjoint_defect();
        let idem = (&(&e * &e) - &e).operator_norm();
        if sa > tol || idem > tol {
            return Err(Error::InvalidArgument(format!(
                "not a projection: ‖e-e*‖ = {sa:.3e}, ‖e²-e‖ = {idem:.3e}"
            )));
        }
        Ok(Projection(e))
    }

    pub fn zero(algebra: &Arc<TracialAlgebra>) -> Self {
        Projection(Element::zero(algebra))
    }

    pub fn identity(algebra: &Arc<TracialAlgebra>) -> Self {
        Projection(Element::identity(algebra))
    }

    /// Projection onto the span of the (orthonormal) columns given per block.
    pub fn from_range_bases(algebra: &Arc<TracialAlgebra>, bases: &[Block]) -> Self {
        let blocks = bases
            .iter()
            .zip(algebra.dims())
            .map(|(v, &d)| if v.ncols() == 0 { Block::zeros(d, d) } else { v * v.adjoint() })
            .collect();
        Projection(Element::from_blocks_unchecked(algebra, blocks))
    }

    pub fn element(&self) -> &Element {
        &self.0
    }

    pub fn into_element(self) -> Element {
        self.0
    }

    pub fn algebra(&self) -> &Arc<TracialAlgebra> {
        self.0.algebra()
    }

    /// `e⊥ = 1 - e`.
    pub fn complement(&self) -> Projection {
        Projection(&Element::identity(self.0.algebra()) - &self.0)
    }

    /// `τ(e)`.
    pub fn trace_mass(&self) -> f64 {
        self.0.trace().re
    }

    /// `τ(e⊥)`.
    pub fn complement_mass(&self) -> f64 {
        self.0.algebra().unit_trace() - self.trace_mass()
    }

    /// Orthonormal basis of the range of block `i`.
    pub fn range_basis(&self, i: usize) -> Block {
        let (vals, vecs) = hermitian_eigen(self.0.block(i));
        let cols: Vec<_> = vals
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.5)
            .map(|(k, _)| vecs.column(k).into_owned())
            .collect();
        let d = self.0.block(i).nrows();
        if cols.is_empty() {
            Block::zeros(d, 0)
        } else {
            Block::from_columns(&cols)
        }
    }

    pub fn rank(&self, i: usize) -> usize {
        self.range_basis(i).ncols()
    }

    /// `e x e`.
    pub fn compress(&self, x: &Element) -> Element {
        &(&self.0 * x) * &self.0
    }

    /// Meet `e ∧ f`: projection onto the intersection of the ranges.
    pub fn meet(&self, other: &Projection) -> Projection {
        Projection::meet_all([self, other])
    }

    /// Meet of several projections, computed as the kernel of `Σ e_l⊥`.
    pub fn meet_all<'a>(projections: impl IntoIterator<Item = &'a Projection>) -> Projection {
        let mut iter = projections.into_iter();
        let first = iter.next().expect("meet of an empty family");
        let algebra = first.algebra().clone();
        let mut sum = first.complement().0;
        for p in iter {
            sum = &sum + &p.complement().0;
        }
        let bases: Vec<Block> = sum
            .blocks()
            .iter()
            .map(|b| {
                let (vals, vecs) = hermitian_eigen(b);
                let cols: Vec<_> = vals
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v <= MEET_RANK_TOL)
                    .map(|(k, _)| vecs.column(k).into_owned())
                    .collect();
                if cols.is_empty() {
                    Block::zeros(b.nrows(), 0)
                } else {
                    Block::from_columns(&cols)
                }
            })
            .collect();
        Projection::from_range_bases(&algebra, &bases)
    }

    /// `e ≤ f` in the projection lattice.
    pub fn leq(&self, other: &Projection, tol: f64) -> bool {
        (&other.0 * &self.0 - self.0.clone()).operator_norm() <= tol
    }
}

/// Element of the center: `scalars[i]` times the identity of block `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterElement {
    algebra: Arc<TracialAlgebra>,
    scalars: Vec<C64>,
}

impl CenterElement {
    pub fn new(algebra: &Arc<TracialAlgebra>, scalars: Vec<C64>) -> Result<Self> {
        if scalars.len() != algebra.num_blocks() {
            return invalid(format!(
                "center element needs {} scalars, got {}",
                algebra.num_blocks(),
                scalars.len()
            ));
        }
        Ok(Self { algebra: algebra.clone(), scalars })
    }

    pub fn constant(algebra: &Arc<TracialAlgebra>, c: C64) -> Self {
        Self { algebra: algebra.clone(), scalars: vec![c; algebra.num_blocks()] }
    }

    pub fn algebra(&self) -> &Arc<TracialAlgebra> {
        &self.algebra
    }

    pub fn scalars(&self) -> &[C64] {
        &self.scalars
    }

    pub fn norm(&self) -> f64 {
        self.scalars.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn to_element(&self) -> Element {
        let blocks = self
            .scalars
            .iter()
            .zip(self.algebra.dims())
            .map(|(&z, &d)| Block::from_diagonal_element(d, d, z))
            .collect();
        Element::from_blocks_unchecked(&self.algebra, blocks)
    }

    /// `z·x`, which equals `x·z`.
    pub fn mul_element(&self, x: &Element) -> Element {
        x.map_blocks(|i, b| b * self.scalars[i])
    }

    pub fn mul(&self, other: &CenterElement) -> CenterElement {
        let scalars = self.scalars.iter().zip(&other.scalars).map(|(a, b)| a * b).collect();
        CenterElement { algebra: self.algebra.clone(), scalars }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> CenterElement {
        CenterElement { algebra: self.algebra.clone(), scalars: self.scalars.iter().map(|&z| f(z)).collect() }
    }

    pub fn real_part(&self) -> CenterElement {
        self.map(|z| C64::new(z.re, 0.0))
    }

    pub fn imag_part(&self) -> CenterElement {
        self.map(|z| C64::new(z.im, 0.0))
    }

    /// Recognizes an element that is a scalar multiple of the identity on every block.
    pub fn from_element(x: &Element, tol: f64) -> Option<CenterElement> {
        let mut scalars = Vec::with_capacity(x.blocks().len());
        for b in x.blocks() {
            let z = b[(0, 0)];
            let d = b.nrows();
            for r in 0..d {
                for c in 0..d {
                    let target = if r == c { z } else { C64::new(0.0, 0.0) };
                    if (b[(r, c)] - target).norm() > tol {
                        return None;
                    }
                }
            }
            scalars.push(z);
        }
        Some(CenterElement { algebra: x.algebra().clone(), scalars })
    }
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Distinct eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub projections: Vec<Projection>,
    /// `τ` of each eigenprojection.
    pub trace_masses: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> Element {
        let algebra = self.projections[0].algebra().clone();
        self.eigenvalues
            .iter()
            .zip(&self.projections)
            .fold(Element::zero(&algebra), |acc, (&l, e)| &acc + &e.element().scale_real(l))
    }
}

fn is_diagonal(b: &Block) -> bool {
    let d = b.nrows();
    (0..d).all(|r| (0..d).all(|c| r == c || b[(r, c)] == C64::new(0.0, 0.0)))
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of the hermitian part of `b`.
///
/// Diagonal blocks are read off exactly.
pub(crate) fn hermitian_eigen(b: &Block) -> (Vec<f64>, Block) {
    let d = b.nrows();
    if d == 0 {
        return (Vec::new(), Block::zeros(0, 0));
    }
    if is_diagonal(b) {
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&i, &j| b[(i, i)].re.total_cmp(&b[(j, j)].re));
        let vals = idx.iter().map(|&i| b[(i, i)].re).collect();
        let vecs = Block::from_fn(d, d, |r, c| if r == idx[c] { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        return (vals, vecs);
    }
    let h = (b + b.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let cols: Vec<_> = idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    (vals, Block::from_columns(&cols))
}

pub(crate) fn reassemble(vecs: &Block, values: &[f64]) -> Block {
    let d = vecs.nrows();
    let mut scaled = vecs.clone();
    for (k, &v) in values.iter().enumerate() {
        scaled.column_mut(k).scale_mut(v);
    }
    if d == 0 {
        return Block::zeros(0, 0);
    }
    scaled * vecs.adjoint()
}

pub(crate) fn apply_hermitian(b: &Block, f: impl Fn(f64) -> f64) -> Block {
    let (vals, vecs) = hermitian_eigen(b);
    let fv: Vec<f64> = vals.iter().map(|&v| f(v)).collect();
    reassemble(&vecs, &fv)
}

pub(crate) fn block_singular_values(b: &Block) -> Vec<f64> {
    if b.nrows() == 0 {
        return Vec::new();
    }
    if is_diagonal(b) {
        return (0..b.nrows()).map(|i| b[(i, i)].norm()).collect();
    }
    b.clone().svd(false, false).singular_values.iter().copied().collect()
}

pub(crate) fn block_operator_norm(b: &Block) -> f64 {
    block_singular_values(b).into_iter().fold(0.0, f64::max)
}
