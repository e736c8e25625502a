//! Distribution functions `λ_s(x)` and generalized singular numbers `μ_t(x)`.
//!
//! In a finite algebra `μ_t(x)` is the decreasing rearrangement of the
//! singular values of `x`, each repeated over an interval whose length is the
//! trace weight of its block. It is stored in that closed form; the
//! `inf {s : λ_s(x) ≤ t}` definition serves as a test oracle.

use std::io::Write;

use crate::algebra::Element;
use crate::error::{invalid, Error, Result};

/// Right-continuous step function on `[0, end)`, zero from `end` on.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    /// `breakpoints` has one more entry than `values`; `values[i]` holds on
    /// `[breakpoints[i], breakpoints[i+1])`.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 {
            return invalid("need exactly one more breakpoint than values");
        }
        if breakpoints[0] != 0.0 {
            return invalid("step functions start at 0");
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("breakpoints must be strictly increasing");
        }
        if values.iter().any(|&v| !(v >= 0.0)) {
            return invalid("values must be nonnegative");
        }
        Ok(Self { breakpoints, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// `(start, end, value)` per interval.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints.windows(2).zip(&self.values).map(|(w, &v)| (w[0], w[1], v))
    }

    /// Value at `t`; at a breakpoint this is the right limit.
    pub fn eval(&self, t: f64) -> f64 {
        if t >= self.end() {
            return 0.0;
        }
        // index of the last breakpoint ≤ t
        let i = self.breakpoints.partition_point(|&b| b <= t);
        self.values[i.saturating_sub(1).min(self.values.len() - 1)]
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }

    /// `∫_0^s` of the step function.
    pub fn integral(&self, s: f64) -> f64 {
        self.intervals()
            .take_while(|&(a, _, _)| a < s)
            .map(|(a, b, v)| v * (b.min(s) - a))
            .sum()
    }

    /// `∫_0^∞ f(value(t)) dt` over the domain, where `f(0) = 0` beyond `end`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.intervals().map(|(a, b, v)| f(v) * (b - a)).sum()
    }

    /// Composes the values with `f` on the domain.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> StepFunction {
        StepFunction {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// CSV rows `t_start,t_end,value` with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = crate::report::csv_writer(out);
        w.write_record(["t_start", "t_end", "value"]).map_err(csv_err)?;
        for (a, b, v) in self.intervals() {
            w.write_record([a.to_string(), b.to_string(), v.to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// `λ_s(x) = τ(χ_(s,∞)(|x|))`.
pub fn distribution_function(x: &Element, s: f64) -> f64 {
    x.singular_values().into_iter().filter(|&(v, _)| v > s).map(|(_, m)| m).sum()
}

/// `t ↦ μ_t(x)` as a step function on `[0, τ(1))`.
pub fn singular_number_function(x: &Element) -> StepFunction {
    let mut sv = x.singular_values();
    sv.sort_by(|a, b| b.0.total_cmp(&a.0));
    let end = x.algebra().unit_trace();
    let mut breakpoints = vec![0.0];
    let mut values: Vec<f64> = Vec::new();
    let mut acc = 0.0;
    for (v, m) in sv {
        acc += m;
        if values.last() == Some(&v) {
            *breakpoints.last_mut().unwrap() = acc;
        } else {
            values.push(v);
            breakpoints.push(acc);
        }
    }
    *breakpoints.last_mut().unwrap() = end;
    StepFunction { breakpoints, values }
}

/// `μ_t(x)` at a single point.
pub fn singular_number(x: &Element, t: f64) -> f64 {
    singular_number_function(x).eval(t)
}

/// `∫_0^∞ f(μ_t(x)) dt`, which equals `τ(f(|x|))` for increasing `f` with `f(0) = 0`.
pub fn trace_of_function(f: impl Fn(f64) -> f64, x: &Element) -> Result<f64> {
    let f0 = f(0.0);
    if f0 != 0.0 {
        return Err(Error::Precondition(format!("need f(0) = 0, got {f0}")));
    }
    Ok(singular_number_function(x).integrate(f))
}

/// `∫_0^s μ_t(x) dt`.
pub fn majorization_integral(x: &Element, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return invalid(format!("integration bound must be positive, got {s}"));
    }
    Ok(singular_number_function(x).integral(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::TracialAlgebra;

    fn example() -> Element {
        let alg = TracialAlgebra::new(vec![2, 1], vec![1.0, 2.0]).unwrap();
        Element::from_diagonals(&alg, &[vec![3.0, 1.0], vec![5.0]]).unwrap()
    }

    #[test]
    fn distribution_examples() {
        let x = example();
        assert_eq!(distribution_function(&x, 3.0), 2.0);
        assert_eq!(distribution_function(&x, 0.5), 4.0);
        assert_eq!(distribution_function(&Element::zero(x.algebra()), 0.1), 0.0);
    }

    #[test]
    fn singular_number_example() {
        let mu = singular_number_function(&example());
        assert_eq!(mu.breakpoints(), &[0.0, 2.0, 3.0, 4.0]);
        assert_eq!(mu.values(), &[5.0, 3.0, 1.0]);
        assert_eq!(mu.eval(0.0), 5.0);
        assert_eq!(mu.eval(2.0), 3.0);
        assert_eq!(mu.eval(3.5), 1.0);
        assert_eq!(mu.eval(4.0), 0.0);
        assert!(mu.is_nonincreasing());
    }

    #[test]
    fn identity_and_scaled_unitary() {
        let x = example();
        let one = Element::identity(x.algebra());
        let mu = singular_number_function(&one);
        assert_eq!(mu.values(), &[1.0]);
        assert_eq!(mu.end(), 4.0);
        let u = Element::from_diagonals(x.algebra(), &[vec![1.0, -1.0], vec![-1.0]]).unwrap().scale_real(2.5);
        let mu = singular_number_function(&u);
        assert_eq!(mu.values(), &[2.5]);
    }

    #[test]
    fn trace_of_function_examples() {
        let x = example();
        assert_eq!(trace_of_function(|t| t, &x).unwrap(), 14.0);
        let one = TracialAlgebra::new(vec![1], vec![1.0]).unwrap();
        let two = Element::from_diagonals(&one, &[vec![2.0]]).unwrap();
        assert_eq!(trace_of_function(|t| t * t, &two).unwrap(), 4.0);
        assert_eq!(trace_of_function(|t| t.powi(3), &Element::zero(x.algebra())).unwrap(), 0.0);
        assert!(matches!(trace_of_function(|t| t + 1.0, &x), Err(Error::Precondition(_))));
    }

    #[test]
    fn majorization_examples() {
        let x = example();
        assert_eq!(majorization_integral(&x, 3.0).unwrap(), 13.0);
        assert_eq!(majorization_integral(&x, 4.0).unwrap(), trace_of_function(|t| t, &x).unwrap());
        assert_eq!(majorization_integral(&x, 100.0).unwrap(), 14.0);
        assert_eq!(majorization_integral(&Element::zero(x.algebra()), 2.0).unwrap(), 0.0);
        assert!(majorization_integral(&x, 0.0).is_err());
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        singular_number_function(&example()).write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t_start,t_end,value\n0,2,5\n2,3,3\n3,4,1\n");
    }

    #[test]
    fn rejects_malformed_step_functions() {
        assert!(StepFunction::new(vec![0.0, 1.0], vec![]).is_err());
        assert!(StepFunction::new(vec![0.0, 1.0, 1.0], vec![1.0, 0.5]).is_err());
        assert!(StepFunction::new(vec![0.0, 1.0], vec![-1.0]).is_err());
    }
}
