//! Seeded random instances. Every draw goes through [`seeded_rng`], so a seed
//! fully determines an experiment.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algebra::{Block, CenterElement, Element, TracialAlgebra, C64};

/// Name of the generator recorded in result manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), seeded via SeedableRng::seed_from_u64";

pub type ExperimentRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> ExperimentRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer, used to derive per-index values from `(seed, j)`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform value in `[0, 1)` determined by `(seed, index, lane)`.
pub fn hashed_unit(seed: u64, index: u64, lane: u64) -> f64 {
    let h = mix64(seed ^ mix64(index ^ mix64(lane.wrapping_add(0x5851_F42D_4C95_7F2D))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Random algebra with at most `max_total_dim` total matrix size and mixed weights.
pub fn random_algebra(rng: &mut impl Rng, max_total_dim: usize, max_blocks: usize) -> Arc<TracialAlgebra> {
    const WEIGHTS: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 0.25];
    let blocks = rng.random_range(1..=max_blocks.max(1));
    let mut dims = Vec::with_capacity(blocks);
    let mut remaining = max_total_dim;
    for b in 0..blocks {
        let reserve = blocks - b - 1;
        if remaining <= reserve {
            break;
        }
        let cap = (remaining - reserve).min(5);
        let d = rng.random_range(1..=cap);
        dims.push(d);
        remaining -= d;
    }
    let weights = dims.iter().map(|_| WEIGHTS[rng.random_range(0..WEIGHTS.len())]).collect();
    TracialAlgebra::new(dims, weights).expect("random algebra parameters are valid")
}

fn gaussian_block(rng: &mut impl Rng, d: usize) -> Block {
    Block::from_fn(d, d, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Complex Ginibre element (independent standard normal entries).
pub fn random_element(rng: &mut impl Rng, algebra: &Arc<TracialAlgebra>) -> Element {
    let blocks = algebra.dims().iter().map(|&d| gaussian_block(rng, d)).collect();
    Element::new(algebra, blocks).expect("shapes match")
}

pub fn random_self_adjoint(rng: &mut impl Rng, algebra: &Arc<TracialAlgebra>) -> Element {
    random_element(rng, algebra).real_part()
}

/// `g g*` for a Ginibre element `g`, scaled to unit operator norm.
pub fn random_positive(rng: &mut impl Rng, algebra: &Arc<TracialAlgebra>) -> Element {
    let g = random_element(rng, algebra);
    let p = &g * &g.adjoint();
    let n = p.operator_norm();
    p.scale_real(1.0 / n).real_part()
}

/// Haar unitary per block via QR of a Ginibre matrix with phase correction.
pub fn random_unitary(rng: &mut impl Rng, algebra: &Arc<TracialAlgebra>) -> Element {
    let blocks = algebra.dims().iter().map(|&d| haar_block(rng, d)).collect();
    Element::new(algebra, blocks).expect("shapes match")
}

fn haar_block(rng: &mut impl Rng, d: usize) -> Block {
    let qr = gaussian_block(rng, d).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..d {
        let rk = r[(k, k)];
        let phase = if rk.norm() > 0.0 { rk / rk.norm() } else { C64::new(1.0, 0.0) };
        for v in q.column_mut(k).iter_mut() {
            *v *= phase;
        }
    }
    q
}

/// Unitary `V diag(ω^{a_k}) V*` with `ω = e^{2πi/order}` and Haar `V`.
///
/// Eigenphases lie on a grid of spacing `1/order` turns, so every nontrivial
/// eigenvalue of the conjugation map stays at distance `≥ 2 sin(π/order)` from 1.
pub fn random_root_unitary(rng: &mut impl Rng, algebra: &Arc<TracialAlgebra>, order: u32) -> Element {
    let blocks = algebra
        .dims()
        .iter()
        .map(|&d| {
            let v = haar_block(rng, d);
            let phases: Vec<C64> = (0..d)
                .map(|_| {
                    let a = rng.random_range(0..order.max(1));
                    C64::from_polar(1.0, TAU * a as f64 / order.max(1) as f64)
                })
                .collect();
            let diag = Block::from_diagonal(&nalgebra::DVector::from_vec(phases));
            &v * diag * v.adjoint()
        })
        .collect();
    Element::new(algebra, blocks).expect("shapes match")
}

/// Central unitary with independent uniform phases per block.
pub fn random_central_phases(rng: &mut impl Rng, algebra: &Arc<TracialAlgebra>) -> CenterElement {
    let scalars = (0..algebra.num_blocks())
        .map(|_| C64::from_polar(1.0, TAU * rng.random::<f64>()))
        .collect();
    CenterElement::new(algebra, scalars).expect("one scalar per block")
}
