use crate::trajectory::{ParamDomain, SystemFamily};

/// `x' = -a x + i`, `o = i - x`, `x(0) = 0`, with the decay rate `a > 0` as
/// the only parameter. Closed forms exist for constant and harmonic
/// inputs, which makes it the reference system for the test suites.
#[derive(Debug, Clone)]
pub struct ScalarLinear {
    nominal_rate: f64,
    domain: ParamDomain,
}

/// Scalar linear family whose default parameter is `a`.
pub fn make_scalar_linear(a: f64) -> ScalarLinear {
    assert!(a > 0.0 && a.is_finite(), "decay rate must be positive, got {a}");
    ScalarLinear {
        nominal_rate: a,
        domain: ParamDomain::all_positive(1),
    }
}

impl SystemFamily for ScalarLinear {
    fn name(&self) -> &str {
        "scalar-linear"
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn param_domain(&self) -> &ParamDomain {
        &self.domain
    }

    fn default_params(&self) -> Vec<f64> {
        vec![self.nominal_rate]
    }

    fn initial_state(&self, _p: &[f64], x0: &mut [f64]) {
        x0[0] = 0.0;
    }

    fn rhs(&self, _t: f64, x: &[f64], input: f64, p: &[f64], dx: &mut [f64]) {
        dx[0] = -p[0] * x[0] + input;
    }

    fn output(&self, x: &[f64], input: f64, _p: &[f64]) -> f64 {
        input - x[0]
    }

    fn output_gradient(&self, _x: &[f64], _input: f64, _p: &[f64], d_state: &mut [f64], d_param: &mut [f64]) {
        d_state[0] = -1.0;
        d_param[0] = 0.0;
    }

    fn jacobians(&self, _t: f64, x: &[f64], _input: f64, p: &[f64], jac_state: &mut [f64], jac_param: &mut [f64]) {
        jac_state[0] = -p[0];
        jac_param[0] = -x[0];
    }

    fn sensitivity_rhs(&self, _t: f64, x: &[f64], _input: f64, p: &[f64], s: &[f64], ds: &mut [f64]) {
        ds[0] = -p[0] * s[0] - x[0];
    }
}
