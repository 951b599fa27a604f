use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::SearchBox;

/// A scalar input signal `i(t)`.
pub trait InputSignal {
    fn value_at(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> InputSignal for F {
    fn value_at(&self, t: f64) -> f64 {
        self(t)
    }
}

/// Admissible range of one parameter coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coordinate {
    /// Strictly positive; optimized as `ln p`.
    Positive,
    /// Any real value; optimized as is.
    Real,
}

/// Default search range of positive coordinates. Outside it the cubic and
/// coupling terms of the demo families get stiff enough to destabilize the
/// fixed-step integrator.
pub const DEFAULT_POSITIVE_RANGE: (f64, f64) = (1e-4, 1e4);

/// Parameter domain of a family together with its unconstrained encoding.
///
/// Optimizers never see natural parameters. Positive coordinates travel as
/// logarithms and are exponentiated on evaluation, so every iterate is
/// admissible. Optimizers additionally keep positive coordinates inside
/// `positive_range`; parameters outside it are still valid inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDomain {
    coords: Vec<Coordinate>,
    positive_range: Option<(f64, f64)>,
}

impl ParamDomain {
    pub fn new(coords: Vec<Coordinate>) -> Self {
        Self {
            coords,
            positive_range: Some(DEFAULT_POSITIVE_RANGE),
        }
    }

    /// Replaces the optimizer search range of positive coordinates; `None`
    /// leaves them unbounded.
    pub fn with_positive_range(self, range: Option<(f64, f64)>) -> Self {
        if let Some((lo, hi)) = range {
            assert!(lo > 0.0 && lo < hi, "invalid positive range ({lo}, {hi})");
        }
        Self {
            positive_range: range,
            ..self
        }
    }

    pub fn positive_range(&self) -> Option<(f64, f64)> {
        self.positive_range
    }

    /// Box in unconstrained coordinates that optimizers project onto.
    pub fn search_box(&self) -> SearchBox {
        let (lo, hi) = self
            .positive_range
            .map_or((f64::NEG_INFINITY, f64::INFINITY), |(lo, hi)| (lo.ln(), hi.ln()));
        let (lower, upper) = self
            .coords
            .iter()
            .map(|c| match c {
                Coordinate::Positive => (lo, hi),
                Coordinate::Real => (f64::NEG_INFINITY, f64::INFINITY),
            })
            .unzip();
        SearchBox::new(lower, upper)
    }

    pub fn all_positive(dim: usize) -> Self {
        Self::new(vec![Coordinate::Positive; dim])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Coordinate] {
        &self.coords
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter().zip(&self.coords).all(|(&v, c)| match c {
                Coordinate::Positive => v.is_finite() && v > 0.0,
                Coordinate::Real => v.is_finite(),
            })
    }

    pub fn check(&self, what: &'static str, p: &[f64]) -> Result<()> {
        Error::check_len(what, self.dim(), p.len())?;
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::invalid(format!("{what} outside the parameter domain: {p:?}")))
        }
    }

    /// Natural parameters to unconstrained coordinates.
    pub fn encode(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(&self.coords)
            .map(|(&v, c)| match c {
                Coordinate::Positive => v.ln(),
                Coordinate::Real => v,
            })
            .collect()
    }

    /// Unconstrained coordinates to natural parameters.
    pub fn decode(&self, theta: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; theta.len()];
        self.decode_into(theta, &mut p);
        p
    }

    pub fn decode_into(&self, theta: &[f64], p: &mut [f64]) {
        for ((out, &v), c) in p.iter_mut().zip(theta).zip(&self.coords) {
            *out = match c {
                Coordinate::Positive => v.exp(),
                Coordinate::Real => v,
            };
        }
    }

    /// Converts a gradient with respect to natural parameters into one with
    /// respect to the unconstrained coordinates, in place.
    pub fn chain_gradient(&self, p: &[f64], grad: &mut [f64]) {
        for ((g, &v), c) in grad.iter_mut().zip(p).zip(&self.coords) {
            if *c == Coordinate::Positive {
                *g *= v;
            }
        }
    }
}

/// A parametrized input-output ODE family
///
/// ```text
/// x'(t) = f(x, i(t), p, t),   o(t) = g(x, i(t), p),   x(0) = x0(p)
/// ```
///
/// with scalar input and output. The same trait describes both the system
/// being tuned and the specification it is compared against.
///
/// Implementations must be deterministic. Slices passed to the callbacks
/// have the lengths given by [`state_dim`](Self::state_dim) and
/// [`param_dim`](Self::param_dim); sensitivity matrices are row-major
/// `state_dim x param_dim`.
pub trait SystemFamily: Send + Sync {
    fn name(&self) -> &str;

    fn state_dim(&self) -> usize;

    fn param_dim(&self) -> usize {
        self.param_domain().dim()
    }

    fn param_domain(&self) -> &ParamDomain;

    /// Parameters used when nothing better is known (cold starts).
    fn default_params(&self) -> Vec<f64> {
        vec![1.0; self.param_dim()]
    }

    fn initial_state(&self, p: &[f64], x0: &mut [f64]);

    /// `d x0 / d p`. Zero unless the initial state depends on parameters.
    fn initial_sensitivity(&self, _p: &[f64], s0: &mut [f64]) {
        s0.fill(0.0);
    }

    fn rhs(&self, t: f64, x: &[f64], input: f64, p: &[f64], dx: &mut [f64]);

    fn output(&self, x: &[f64], input: f64, p: &[f64]) -> f64;

    /// Partial derivatives of the output with respect to state and
    /// parameters.
    fn output_gradient(&self, x: &[f64], input: f64, p: &[f64], d_state: &mut [f64], d_param: &mut [f64]);

    /// Dense Jacobians `df/dx` (`n x n`) and `df/dp` (`n x m`), row-major.
    fn jacobians(&self, t: f64, x: &[f64], input: f64, p: &[f64], jac_state: &mut [f64], jac_param: &mut [f64]);

    /// Right-hand side of the forward sensitivity equations,
    /// `ds = (df/dx) s + df/dp`.
    ///
    /// The default goes through [`jacobians`](Self::jacobians) and a dense
    /// product; families with sparse structure should override it.
    fn sensitivity_rhs(&self, t: f64, x: &[f64], input: f64, p: &[f64], s: &[f64], ds: &mut [f64]) {
        let n = self.state_dim();
        let m = self.param_dim();
        let mut jx = vec![0.0; n * n];
        self.jacobians(t, x, input, p, &mut jx, ds);
        for i in 0..n {
            let row = &mut ds[i * m..(i + 1) * m];
            for k in 0..n {
                let a = jx[i * n + k];
                if a != 0.0 {
                    let srow = &s[k * m..(k + 1) * m];
                    for (d, &sv) in row.iter_mut().zip(srow) {
                        *d += a * sv;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_round_trips_and_chains() {
        let dom = ParamDomain::new(vec![Coordinate::Positive, Coordinate::Real]);
        let p = [2.5, -1.0];
        let theta = dom.encode(&p);
        assert_eq!(theta[1], -1.0);
        let back = dom.decode(&theta);
        assert!((back[0] - 2.5).abs() < 1e-15);
        let mut g = [1.0, 3.0];
        dom.chain_gradient(&p, &mut g);
        assert_eq!(g, [2.5, 3.0]);
    }

    #[test]
    fn domain_membership() {
        let dom = ParamDomain::all_positive(2);
        assert!(dom.contains(&[1.0, 0.1]));
        assert!(!dom.contains(&[1.0, 0.0]));
        assert!(!dom.contains(&[1.0]));
        assert!(dom.check("p", &[1.0, -2.0]).is_err());
    }
}
