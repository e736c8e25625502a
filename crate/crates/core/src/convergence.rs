//! Neighborhoods of the measure topology and finite-horizon diagnostics for
//! almost uniform (one-sided) and bilateral almost uniform convergence.
//!
//! A limit cannot be certified from finitely many averages. What is measured
//! is the windowed Cauchy gap `sup_{m,n ∈ [N, 2N]} ‖e(A_m − A_n)e‖` under one
//! witness projection `e` with `τ(e⊥) < δ`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebra::{hermitian_eigen, Element, Projection, C64};
use crate::averaging::{AverageRequest, AverageStream, Family};
use crate::ds::DsOperator;
use crate::error::{invalid, Error, Result};
use crate::maximal::{remove_direction, Search};
use crate::orlicz::{luxemburg_norm, OrliczFunction};

/// Points sampled from each window `[N, 2N]`.
pub const WINDOW_POINTS: usize = 33;
/// Relative singular value cut for the fixed space in [`fixed_point_oracle`].
pub const FIXED_SPACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// `‖y e‖`, almost uniform.
    OneSided,
    /// `‖e y e‖`, bilateral almost uniform.
    Bilateral,
}

impl Mode {
    pub fn compressed_norm(self, e: &Projection, y: &Element) -> f64 {
        match self {
            Mode::OneSided => (y * e.element()).operator_norm(),
            Mode::Bilateral => e.compress(y).operator_norm(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::OneSided => "a.u.",
            Mode::Bilateral => "b.a.u.",
        }
    }
}

/// Searches for `e` with `τ(e⊥) ≤ δ` and `‖xe‖ ≤ ε` (one-sided) or
/// `‖exe‖ ≤ ε` (bilateral). The one-sided answer is exact: by min-max, the
/// spectral projection `χ_[0,ε](|x|)` has the largest trace among all `e`
/// with `‖xe‖ ≤ ε`.
pub fn in_measure_neighborhood(x: &Element, eps: f64, delta: f64, bilateral: bool) -> Result<(bool, Projection)> {
    if !(eps > 0.0 && delta > 0.0) {
        return invalid("need ε, δ > 0");
    }
    let one_sided = sublevel_abs(x, eps);
    if !bilateral {
        let ok = one_sided.complement_mass() <= delta && (x * one_sided.element()).operator_norm() <= eps;
        return Ok((ok, one_sided));
    }
    let adj = sublevel_abs(&x.adjoint(), eps);
    let split = sublevel_abs(&x.real_part(), eps / 2.0).meet(&sublevel_abs(&x.imag_part(), eps / 2.0));
    let avgs = [x.clone()];
    let mut search = Search::new(&avgs, eps, delta, false);
    for e in [one_sided, adj, split] {
        search.offer(e, crate::maximal::Strategy::LevelMeet);
    }
    let found = match search.best.clone() {
        Some(f) => Ok(f),
        None => Search::new(&avgs, eps, delta, false).run(),
    };
    Ok(match found {
        Ok(f) => (true, f.e),
        Err(f) => (false, f.e),
    })
}

/// `χ_[0,θ](|x|)`.
fn sublevel_abs(x: &Element, theta: f64) -> Projection {
    let alg = x.algebra();
    let gram = &x.adjoint() * x;
    let bases = gram
        .blocks()
        .iter()
        .map(|b| {
            let h = (b + b.adjoint()) * C64::new(0.5, 0.0);
            let (vals, vecs) = hermitian_eigen(&h);
            let cols: Vec<DVector<C64>> = vals
                .iter()
                .enumerate()
                .filter(|(_, &v)| v.max(0.0).sqrt() <= theta)
                .map(|(k, _)| vecs.column(k).into_owned())
                .collect();
            if cols.is_empty() {
                DMatrix::zeros(b.nrows(), 0)
            } else {
                DMatrix::from_columns(&cols)
            }
        })
        .collect::<Vec<_>>();
    Projection::from_range_bases(alg, &bases)
}

fn sup_distance(tail: &[Element], xhat: &Element, e: &Projection, mode: Mode) -> f64 {
    tail.iter().map(|y| mode.compressed_norm(e, &(y - xhat))).fold(0.0, f64::max)
}

/// Top eigenvector of `|e y e|²` (bilateral) or `e y* y e` (one-sided) for
/// the worst `y`, or `None` when everything already vanishes.
fn worst_direction(diffs: &[Element], e: &Projection, mode: Mode) -> Option<(usize, DVector<C64>)> {
    let worst = diffs
        .iter()
        .map(|d| match mode {
            Mode::OneSided => d * e.element(),
            Mode::Bilateral => e.compress(d),
        })
        .max_by(|a, b| a.operator_norm().total_cmp(&b.operator_norm()))?;
    let gram = &worst.adjoint() * &worst;
    let sq = match mode {
        Mode::OneSided => gram.real_part(),
        Mode::Bilateral => (&gram + &(&worst * &worst.adjoint())).real_part(),
    };
    let mut best: Option<(f64, usize, DVector<C64>)> = None;
    for (i, b) in sq.blocks().iter().enumerate() {
        let (vals, vecs) = hermitian_eigen(b);
        if let Some(k) = vals.len().checked_sub(1) {
            if best.as_ref().is_none_or(|(v, _, _)| vals[k] > *v) {
                best = Some((vals[k], i, vecs.column(k).into_owned()));
            }
        }
    }
    best.filter(|(v, _, _)| *v > 0.0).map(|(_, i, v)| (i, v))
}

/// Greedy witness with `τ(e⊥) < δ` heuristically minimizing
/// `sup_n ‖(x_n − x̂)e‖` or `sup_n ‖e(x_n − x̂)e‖`.
pub fn witness_distance(tail: &[Element], xhat: &Element, delta: f64, mode: Mode) -> Result<(f64, Projection)> {
    if tail.is_empty() {
        return invalid("tail must be nonempty");
    }
    if !(delta > 0.0) {
        return invalid("δ must be positive");
    }
    let alg = xhat.algebra().clone();
    let diffs: Vec<Element> = tail.iter().map(|y| y - xhat).collect();
    let mut e = Projection::identity(&alg);
    let mut best = (sup_distance(tail, xhat, &e, mode), e.clone());
    // peeling: drop the worst direction while the budget allows
    while best.0 > 0.0 {
        let Some((block, v)) = worst_direction(&diffs, &e, mode) else { break };
        let Some(next) = remove_direction(&e, block, &v) else { break };
        if next.complement_mass() >= delta {
            break;
        }
        e = next;
        let s = sup_distance(tail, xhat, &e, mode);
        if s < best.0 {
            best = (s, e.clone());
        }
    }
    // spectral chain of the mean square deviation
    let mut v = Element::zero(&alg);
    for d in &diffs {
        v = &v + &(&d.adjoint() * d);
        if mode == Mode::Bilateral {
            v = &v + &(d * &d.adjoint());
        }
    }
    let mut pairs: Vec<(f64, usize, DVector<C64>)> = Vec::new();
    for (i, b) in v.real_part().blocks().iter().enumerate() {
        let (vals, vecs) = hermitian_eigen(b);
        pairs.extend(vals.into_iter().enumerate().map(|(k, val)| (val, i, vecs.column(k).into_owned())));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut e = Projection::identity(&alg);
    for (_, block, vec) in pairs {
        let Some(next) = remove_direction(&e, block, &vec) else { continue };
        if next.complement_mass() >= delta {
            continue;
        }
        e = next;
        let s = sup_distance(tail, xhat, &e, mode);
        if s < best.0 {
            best = (s, e.clone());
        }
    }
    Ok(best)
}

/// Bilateral version of [`witness_distance`].
pub fn bau_distance(tail: &[Element], xhat: &Element, delta: f64) -> Result<(f64, Projection)> {
    witness_distance(tail, xhat, delta, Mode::Bilateral)
}

/// The longest-horizon average.
pub fn estimate_limit(averages: &[Element]) -> Result<Element> {
    if averages.len() < 2 {
        return invalid("need at least two averages");
    }
    Ok(averages[averages.len() - 1].clone())
}

/// Mean-ergodic limit of plain averages of `x`: the projection of `x` onto
/// `{y : T(y) = y}`, orthogonal for `⟨a, b⟩ = τ(a* b)`.
///
/// Built from `T.apply` on matrix units only, so it shares nothing with the
/// averaging code. A doubly stochastic map contracts `L²(τ)`, so its fixed
/// space is that of `T†` and the Cesàro limit is this orthogonal projection.
pub fn fixed_point_oracle(t: &DsOperator, x: &Element) -> Result<Element> {
    let alg = t.algebra();
    if !crate::algebra::same_algebra(alg, x.algebra()) {
        return Err(Error::AlgebraMismatch);
    }
    // orthonormal coordinates for τ: block i entries scaled by √w_i
    let scale: Vec<f64> = alg
        .dims()
        .iter()
        .zip(alg.weights())
        .flat_map(|(&d, &w)| std::iter::repeat_n(w.sqrt(), d * d))
        .collect();
    let n = scale.len();
    let mut l = DMatrix::<C64>::zeros(n, n);
    for c in 0..n {
        let mut basis = DVector::zeros(n);
        basis[c] = C64::new(1.0 / scale[c], 0.0);
        let image = t.apply(&Element::from_coords(alg, &basis)?).coords();
        for r in 0..n {
            l[(r, c)] = image[r] * scale[r];
        }
    }
    let a = l - DMatrix::<C64>::identity(n, n);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let cut = FIXED_SPACE_TOL * svd.singular_values.max().max(1.0);
    let mut y = DVector::<C64>::from_iterator(n, x.coords().iter().zip(&scale).map(|(z, s)| z * *s));
    let mut proj = DVector::<C64>::zeros(n);
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s <= cut {
            let row = v_t.row(k).adjoint();
            let c = row.dotc(&y);
            proj += row * c;
        }
    }
    // rank-deficient SVDs return fewer rows than n; any missing directions are fixed
    if v_t.nrows() < n {
        let span = v_t.adjoint();
        let coeff = span.adjoint() * &y;
        y -= span * coeff;
        proj += y;
    }
    let coords = DVector::from_iterator(n, proj.iter().zip(&scale).map(|(z, s)| z / *s));
    Element::from_coords(alg, &coords)
}

#[derive(Debug, Clone, Serialize)]
pub struct GapRow {
    pub horizon: usize,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub schedule: Vec<usize>,
    pub mode: Mode,
    pub family: Family,
    pub limit: Element,
    pub gaps: Vec<f64>,
    pub witness: Projection,
    pub witness_trace: f64,
    /// `averages[n - 1] = A_n`, up to `2·max(schedule)`.
    pub averages: Vec<Element>,
    pub limit_norm: f64,
    pub input_norm: f64,
    /// `C = sup ‖b_j‖ · sup ‖d_j‖`.
    pub bound: f64,
}

impl ConvergenceReport {
    pub fn rows(&self) -> Vec<GapRow> {
        self.schedule.iter().zip(&self.gaps).map(|(&horizon, &gap)| GapRow { horizon, gap }).collect()
    }

    /// Number of steps where the gap grows.
    pub fn monotonicity_violations(&self) -> usize {
        self.gaps.windows(2).filter(|w| w[1] > w[0]).count()
    }

    pub fn limit_norm_ok(&self) -> bool {
        self.limit_norm <= self.bound * self.input_norm + 1e-6
    }

    /// Gap at the last horizon is at most half the gap at the first.
    pub fn halved(&self) -> bool {
        match (self.gaps.first(), self.gaps.last()) {
            (Some(a), Some(b)) => *b <= 0.5 * *a,
            _ => false,
        }
    }
}

/// Indices sampled from `[N, 2N]`.
pub fn window_points(n: usize) -> Vec<usize> {
    let mut pts: Vec<usize> = (0..WINDOW_POINTS).map(|i| n + (i * n + (WINDOW_POINTS - 1) / 2) / (WINDOW_POINTS - 1)).collect();
    pts.dedup();
    pts
}

/// `sup ‖e(A_m − A_n)e‖` over sampled pairs of `[N, 2N]`, from stored
/// averages (`averages[n - 1] = A_n`).
pub fn window_gap(averages: &[Element], n: usize, e: &Projection, mode: Mode) -> Result<f64> {
    let pts = window_points(n);
    let last = *pts.last().expect("nonempty");
    if n == 0 || last > averages.len() {
        return invalid(format!("window [{n}, {}] exceeds the stored averages", 2 * n));
    }
    let mut gap = 0.0f64;
    for (i, &a) in pts.iter().enumerate() {
        for &b in &pts[i + 1..] {
            gap = gap.max(mode.compressed_norm(e, &(&averages[a - 1] - &averages[b - 1])));
        }
    }
    Ok(gap)
}

/// Windowed Cauchy gaps along `schedule` for the request's family
/// (subsequential when it carries a subsequence), with one witness `e`,
/// `τ(e⊥) < δ`, chosen from all sampled averages against `x̂`.
pub fn convergence_probe(
    req: &AverageRequest,
    phi: &OrliczFunction,
    delta: f64,
    schedule: &[usize],
    mode: Mode,
) -> Result<ConvergenceReport> {
    if !req.left.is_central() || req.right.as_ref().is_some_and(|d| !d.is_central()) {
        return Err(Error::Hypothesis("the Orlicz convergence theorem needs weights in the center".into()));
    }
    if schedule.is_empty() || schedule[0] == 0 || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("schedule must be nonempty, positive and strictly increasing");
    }
    if !(delta > 0.0) {
        return invalid("δ must be positive");
    }
    let horizon = 2 * schedule[schedule.len() - 1];
    let mut req = req.clone();
    req.n_max = horizon;
    let family = if req.subsequence.is_some() { Family::Subsequential } else { Family::Plain };
    let mut stream = AverageStream::new(&req, family)?;
    let averages: Vec<Element> = (0..horizon).map(|_| stream.next_average()).collect::<Result<_>>()?;
    let limit = estimate_limit(&averages)?;
    let tail: Vec<Element> =
        schedule.iter().flat_map(|&n| window_points(n)).map(|m| averages[m - 1].clone()).collect();
    let (_, witness) = witness_distance(&tail, &limit, delta, mode)?;
    let gaps = schedule.iter().map(|&n| window_gap(&averages, n, &witness, mode)).collect::<Result<Vec<_>>>()?;
    let bound = req.left.bound() * req.right.as_ref().map_or(1.0, |d| d.bound());
    Ok(ConvergenceReport {
        schedule: schedule.to_vec(),
        mode,
        family,
        limit_norm: luxemburg_norm(&limit, phi, 1e-12)?,
        input_norm: luxemburg_norm(&req.x, phi, 1e-12)?,
        limit,
        gaps,
        witness_trace: witness.complement_mass().max(0.0),
        witness,
        averages,
        bound,
    })
}

/// `T(x̂)` against `x̂`.
pub fn fixed_point_defect(t: &DsOperator, xhat: &Element) -> f64 {
    t.apply(xhat).distance(xhat)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::algebra::TracialAlgebra;
    use crate::random::{random_element, random_root_unitary, seeded_rng};
    use crate::subseq::Subsequence;
    use crate::weights::{PhaseList, WeightSpec};

    #[test]
    fn neighborhood_examples() {
        let alg = TracialAlgebra::new(vec![2], vec![1.0]).unwrap();
        let x = Element::from_diagonals(&alg, &[vec![10.0, 0.1]]).unwrap();
        for bilateral in [false, true] {
            let (ok, e) = in_measure_neighborhood(&x, 0.5, 1.5, bilateral).unwrap();
            assert!(ok);
            assert_eq!(e.complement_mass(), 1.0);
            assert_eq!(e.element().block(0)[(1, 1)].re, 1.0);
        }
        let (ok, e) = in_measure_neighborhood(&x, 20.0, 0.1, true).unwrap();
        assert!(ok && e.complement_mass() == 0.0);
        let alg4 = TracialAlgebra::new(vec![4], vec![1.0]).unwrap();
        let ten = Element::scalar(&alg4, C64::new(10.0, 0.0));
        for bilateral in [false, true] {
            assert!(!in_measure_neighborhood(&ten, 1.0, 0.5, bilateral).unwrap().0);
        }
    }

    #[test]
    fn limit_examples() {
        let alg = TracialAlgebra::new(vec![2], vec![1.0]).unwrap();
        let x = Element::matrix_unit(&alg, 0, 0, 1).unwrap();
        let u = Element::from_diagonals(&alg, &[vec![1.0, -1.0]]).unwrap();
        let t = DsOperator::from_unitary(&u).unwrap();
        assert!(fixed_point_oracle(&t, &x).unwrap().operator_norm() < 1e-12);
        let swap = Element::new(
            &alg,
            vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0].map(|v| C64::new(v, 0.0)))],
        )
        .unwrap();
        let t = DsOperator::from_unitary(&swap).unwrap();
        let d = Element::from_diagonals(&alg, &[vec![3.0, 1.0]]).unwrap();
        let xhat = fixed_point_oracle(&t, &d).unwrap();
        assert!(xhat.distance(&Element::scalar(&alg, C64::new(2.0, 0.0))) < 1e-12);
        let id = DsOperator::identity(&alg);
        assert!(fixed_point_oracle(&id, &x).unwrap().distance(&x) < 1e-12);
    }

    #[test]
    fn bau_distance_isolates_a_bad_corner() {
        let alg = TracialAlgebra::new(vec![3], vec![1.0]).unwrap();
        let xhat = Element::zero(&alg);
        let corner = Element::matrix_unit(&alg, 0, 2, 2).unwrap();
        let small = Element::identity(&alg).scale_real(1e-3);
        let tail: Vec<Element> = (1..5).map(|k| &corner.scale_real(k as f64) + &small).collect();
        let (sup, e) = bau_distance(&tail, &xhat, 1.5).unwrap();
        assert!(sup < 2e-3 && e.complement_mass() < 1.5);
        let (same, e) = bau_distance(&[xhat.clone(), xhat.clone()], &xhat, 0.1).unwrap();
        assert_eq!(same, 0.0);
        assert_eq!(e.complement_mass(), 0.0);
    }

    #[test]
    fn probe_on_identity_has_zero_gaps() {
        let alg = TracialAlgebra::new(vec![2, 1], vec![1.0, 0.5]).unwrap();
        let mut rng = seeded_rng(2);
        let x = random_element(&mut rng, &alg);
        let t = Arc::new(DsOperator::identity(&alg));
        let req = AverageRequest::new(t, x, 1).unwrap().with_subsequence(Subsequence::all());
        let r = convergence_probe(&req, &OrliczFunction::power(2.0).unwrap(), 0.05, &[8, 32], Mode::Bilateral).unwrap();
        assert!(r.gaps.iter().all(|g| *g < 1e-14));
        assert!(r.limit_norm_ok());
    }

    #[test]
    fn probe_gaps_decrease_on_root_unitary() {
        let alg = TracialAlgebra::new(vec![2, 2], vec![1.0, 1.0]).unwrap();
        let mut rng = seeded_rng(9);
        let u = random_root_unitary(&mut rng, &alg, 4);
        let t = Arc::new(DsOperator::from_unitary(&u).unwrap());
        let b = WeightSpec::Central { coefficients: None, phases: PhaseList::Single(vec![0.2, 0.4]), perturbation: None, seed: None }
            .build(&alg, 1)
            .unwrap();
        let x = random_element(&mut rng, &alg);
        let req = AverageRequest::new(t, x, 1).unwrap().with_left(b).with_subsequence(Subsequence::no_squares());
        let r = convergence_probe(&req, &OrliczFunction::power(2.0).unwrap(), 0.05, &[64, 256, 1024], Mode::Bilateral).unwrap();
        assert!(r.halved(), "{:?}", r.gaps);
        assert!(r.witness_trace < 0.05);
        assert!(r.limit_norm_ok());
        let again = window_gap(&r.averages, 256, &r.witness, r.mode).unwrap();
        assert_eq!(again, r.gaps[1]);
    }
}
