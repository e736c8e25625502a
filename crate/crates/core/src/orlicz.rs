//! Orlicz functions, modulars `τ(Φ(|x|/λ))`, Luxemburg norms and `L^p` norms.

use std::fmt;
use std::sync::Arc;

use crate::algebra::Element;
use crate::error::{invalid, Error, Result};

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A convex increasing `Φ` with `Φ(0) = 0`, checked on a validation grid.
#[derive(Clone)]
pub struct OrliczFunction {
    name: String,
    eval: Evaluator,
    delta2: Option<f64>,
    grid: Vec<f64>,
}

impl fmt::Debug for OrliczFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OrliczFunction")
            .field("name", &self.name)
            .field("delta2", &self.delta2)
            .field("grid_points", &self.grid.len())
            .finish()
    }
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

impl OrliczFunction {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        delta2: Option<f64>,
        grid: Vec<f64>,
    ) -> Result<Self> {
        let phi = Self { name: name.into(), eval: Arc::new(eval), delta2, grid };
        phi.validate()?;
        Ok(phi)
    }

    /// `Φ(u) = u^p / p`, which satisfies Δ₂ with `d = 2^p`.
    pub fn power(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return invalid(format!("power Orlicz function needs 1 ≤ p < ∞, got {p}"));
        }
        Self::new(format!("p:{p}"), move |t| t.powf(p) / p, Some(2f64.powf(p)), log_grid(1e-6, 1e3, 512))
    }

    /// `Φ(u) = e^u - 1`; not Δ₂, validated on a grid that stops before overflow.
    pub fn expm1() -> Self {
        Self::new("expm1", f64::exp_m1, None, log_grid(1e-6, 1e2, 512)).expect("e^u - 1 is an Orlicz function")
    }

    /// Parses `p:<real>` or `expm1`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "expm1" {
            return Ok(Self::expm1());
        }
        match s.strip_prefix("p:") {
            Some(p) => {
                let p: f64 = p
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad exponent in Orlicz spec {s:?}")))?;
                Self::power(p)
            }
            None => Err(Error::Parse(format!("unknown Orlicz function {s:?} (expected p:<real> or expm1)"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn delta2_constant(&self) -> Option<f64> {
        self.delta2
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn validate(&self) -> Result<()> {
        let phi0 = self.eval(0.0);
        if phi0 != 0.0 {
            return invalid(format!("{}: Φ(0) = {phi0}", self.name));
        }
        let vals: Vec<f64> = self.grid.iter().map(|&t| self.eval(t)).collect();
        if let Some((t, v)) = self.grid.iter().zip(&vals).find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
            return invalid(format!("{}: Φ({t}) = {v} is not positive and finite", self.name));
        }
        // midpoint convexity on adjacent pairs, pairs with the origin, and a coarse all-pairs sweep
        let mut pairs: Vec<(f64, f64)> = self.grid.windows(2).map(|w| (w[0], w[1])).collect();
        pairs.extend(self.grid.iter().map(|&t| (0.0, t)));
        let coarse: Vec<f64> = self.grid.iter().step_by(8).copied().collect();
        for (i, &a) in coarse.iter().enumerate() {
            pairs.extend(coarse[i + 1..].iter().map(|&b| (a, b)));
        }
        for (a, b) in pairs {
            let mid = self.eval(0.5 * (a + b));
            let chord = 0.5 * (self.eval(a) + self.eval(b));
            if mid > chord + 1e-12 * chord.max(1.0) {
                return invalid(format!("{}: midpoint convexity fails on [{a}, {b}]", self.name));
            }
        }
        if let Some(d) = self.delta2 {
            for (&t, &v) in self.grid.iter().zip(&vals) {
                let doubled = self.eval(2.0 * t);
                if doubled > d * v * (1.0 + 1e-12) {
                    return invalid(format!("{}: Φ(2t) ≤ {d}·Φ(t) fails at t = {t}", self.name));
                }
            }
        }
        Ok(())
    }
}

/// `u = δ / Φ(δ)`, so that `u·Φ(t) ≥ t` for every `t ≥ δ` (Φ(t)/t is nondecreasing).
pub fn find_linearization_constant(phi: &OrliczFunction, delta: f64) -> f64 {
    delta / phi.eval(delta)
}

/// Grid check of `u·Φ(t) ≥ t` on `t ∈ δ·(1 + grid)`.
pub fn verify_linearization(phi: &OrliczFunction, delta: f64, u: f64) -> bool {
    std::iter::once(delta)
        .chain(phi.grid().iter().map(|&g| delta * (1.0 + g)))
        .filter(|&t| phi.eval(t).is_finite())
        .all(|t| u * phi.eval(t) >= t * (1.0 - 1e-12))
}

fn modular_of_spectrum(spectrum: &[(f64, f64)], phi: &OrliczFunction, lambda: f64) -> f64 {
    spectrum
        .iter()
        .filter(|(s, _)| *s > 0.0)
        .map(|&(s, m)| m * phi.eval(s / lambda))
        .sum()
}

/// `τ(Φ(|x|/λ)) = Σ mass_i Φ(σ_i/λ)`.
pub fn modular(x: &Element, phi: &OrliczFunction, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return invalid(format!("modular needs λ > 0, got {lambda}"));
    }
    Ok(modular_of_spectrum(&x.singular_values(), phi, lambda))
}

/// `‖x‖_Φ = inf {λ > 0 : τ(Φ(|x|/λ)) ≤ 1}` by bisection to relative tolerance `tol`.
///
/// The returned value is the upper end of the final bracket, so the modular at
/// the returned `λ` is at most 1.
pub fn luxemburg_norm(x: &Element, phi: &OrliczFunction, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    let spectrum = x.singular_values();
    let sup = spectrum.iter().map(|p| p.0).fold(0.0, f64::max);
    if sup == 0.0 {
        return Ok(0.0);
    }
    let feasible = |l: f64| modular_of_spectrum(&spectrum, phi, l) <= 1.0;
    let start = sup * x.algebra().unit_trace().max(1.0);
    let (mut lo, mut hi) = if feasible(start) {
        let mut lo = start * 0.5;
        while feasible(lo) {
            lo *= 0.5;
        }
        (lo, lo * 2.0)
    } else {
        let mut hi = start * 2.0;
        while !feasible(hi) {
            hi *= 2.0;
        }
        (hi * 0.5, hi)
    };
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `‖x‖_p = τ(|x|^p)^{1/p}`; `p = ∞` gives the operator norm.
pub fn lp_norm(x: &Element, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return invalid(format!("L^p norm needs p ≥ 1, got {p}"));
    }
    if p.is_infinite() {
        return Ok(x.operator_norm());
    }
    let s: f64 = x.singular_values().into_iter().map(|(v, m)| m * v.powf(p)).sum();
    Ok(s.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::TracialAlgebra;

    fn approx(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn linearization_examples() {
        let half_sq = OrliczFunction::power(2.0).unwrap();
        let u = find_linearization_constant(&half_sq, 1.0);
        assert_eq!(u, 2.0);
        assert!(verify_linearization(&half_sq, 1.0, u));
        assert!(!verify_linearization(&half_sq, 1.0, 1.5));

        let id = OrliczFunction::power(1.0).unwrap();
        assert_eq!(find_linearization_constant(&id, 5.0), 1.0);

        let cube = OrliczFunction::power(3.0).unwrap();
        let u = find_linearization_constant(&cube, 2.0);
        assert!((u - 0.75).abs() < 1e-15);
        assert!(verify_linearization(&cube, 2.0, u));
    }

    #[test]
    fn modular_examples() {
        let phi = OrliczFunction::power(2.0).unwrap();
        let one = TracialAlgebra::new(vec![1], vec![1.0]).unwrap();
        let x = Element::from_diagonals(&one, &[vec![1.0]]).unwrap();
        assert_eq!(modular(&x, &phi, 1.0).unwrap(), 0.5);
        assert_eq!(modular(&Element::zero(&one), &phi, 0.3).unwrap(), 0.0);
        let m2 = TracialAlgebra::new(vec![2], vec![1.0]).unwrap();
        let y = Element::from_diagonals(&m2, &[vec![1.0, 3.0]]).unwrap();
        assert_eq!(modular(&y, &phi, 2.0).unwrap(), 1.25);
        assert!(modular(&y, &phi, 0.0).is_err());
    }

    #[test]
    fn luxemburg_examples() {
        let phi = OrliczFunction::power(2.0).unwrap();
        let one = TracialAlgebra::new(vec![1], vec![1.0]).unwrap();
        let x = Element::from_diagonals(&one, &[vec![1.0]]).unwrap();
        assert!(approx(luxemburg_norm(&x, &phi, 1e-13).unwrap(), std::f64::consts::FRAC_1_SQRT_2, 1e-12));
        assert_eq!(luxemburg_norm(&Element::zero(&one), &phi, 1e-9).unwrap(), 0.0);

        let alg = TracialAlgebra::new(vec![2, 1], vec![1.0, 2.0]).unwrap();
        let y = Element::from_diagonals(&alg, &[vec![3.0, 1.0], vec![5.0]]).unwrap();
        let l1 = OrliczFunction::power(1.0).unwrap();
        assert!(approx(luxemburg_norm(&y, &l1, 1e-13).unwrap(), 14.0, 1e-12));
    }

    #[test]
    fn luxemburg_of_expm1_satisfies_its_defining_equation() {
        let alg = TracialAlgebra::new(vec![2, 1], vec![1.0, 2.0]).unwrap();
        let y = Element::from_diagonals(&alg, &[vec![3.0, 1.0], vec![5.0]]).unwrap();
        let phi = OrliczFunction::expm1();
        let n = luxemburg_norm(&y, &phi, 1e-13).unwrap();
        let m = modular(&y, &phi, n).unwrap();
        assert!(m <= 1.0 && m > 1.0 - 1e-10, "modular {m}");
    }

    #[test]
    fn lp_examples() {
        let m2 = TracialAlgebra::new(vec![2], vec![1.0]).unwrap();
        let x = Element::from_diagonals(&m2, &[vec![3.0, 4.0]]).unwrap();
        assert!((lp_norm(&x, 2.0).unwrap() - 5.0).abs() < 1e-15);
        let w3 = TracialAlgebra::new(vec![1], vec![3.0]).unwrap();
        let y = Element::from_diagonals(&w3, &[vec![2.0]]).unwrap();
        assert_eq!(lp_norm(&y, 1.0).unwrap(), 6.0);
        assert_eq!(lp_norm(&x, f64::INFINITY).unwrap(), 4.0);
        assert!(lp_norm(&x, 0.5).is_err());
    }

    #[test]
    fn parses_builtins() {
        assert_eq!(OrliczFunction::parse("p:2").unwrap().delta2_constant(), Some(4.0));
        assert_eq!(OrliczFunction::parse("expm1").unwrap().delta2_constant(), None);
        assert!(OrliczFunction::parse("p:0.5").is_err());
        assert!(matches!(OrliczFunction::parse("q:2"), Err(Error::Parse(_))));
    }

    #[test]
    fn validation_rejects_non_orlicz() {
        assert!(OrliczFunction::new("sqrt", f64::sqrt, None, log_grid(1e-3, 10.0, 64)).is_err());
        assert!(OrliczFunction::new("shifted", |t| t + 1.0, None, log_grid(1e-3, 10.0, 64)).is_err());
        assert!(OrliczFunction::new("cube-bad-d2", |t| t * t * t, Some(4.0), log_grid(1e-3, 10.0, 64)).is_err());
    }
}
