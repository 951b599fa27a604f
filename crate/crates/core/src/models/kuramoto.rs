use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{Coordinate, ParamDomain, SystemFamily};

/// Which node pairs carry a tunable coupling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairRange {
    /// Every unordered pair `{n, m}`, `n != m`.
    #[default]
    All,
    /// Only pairs with both 1-based indices strictly between `1` and `N`;
    /// couplings touching the first or last node are absent.
    Interior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KuramotoConfig {
    pub n: usize,
    /// Intrinsic frequencies before scaling by `spread`. Their mean is zero
    /// and the input node's frequency is zero.
    pub omegas: Vec<f64>,
    pub coupling: f64,
    pub spread: f64,
    #[serde(default)]
    pub pair_range: PairRange,
    /// Treat the intrinsic frequencies as real-valued parameters instead of
    /// constants.
    #[serde(default)]
    pub tunable_frequencies: bool,
}

impl KuramotoConfig {
    pub const DEFAULT_COUPLING: f64 = 1.0;

    /// Frequencies for nodes `2..N` drawn from `Normal(0, 1)` and shifted by
    /// their mean, node 1 fixed at zero.
    pub fn generate(n: usize, seed: u64, coupling: f64, spread: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut omegas = vec![0.0; n];
        if n > 1 {
            for w in &mut omegas[1..] {
                *w = StandardNormal.sample(&mut rng);
            }
            let mean = omegas[1..].iter().sum::<f64>() / (n - 1) as f64;
            for w in &mut omegas[1..] {
                *w -= mean;
            }
        }
        Self {
            n,
            omegas,
            coupling,
            spread,
            pair_range: PairRange::All,
            tunable_frequencies: false,
        }
    }

    /// A single damped oscillator with zero intrinsic frequency.
    pub fn single_oscillator() -> Self {
        Self {
            n: 1,
            omegas: vec![0.0],
            coupling: Self::DEFAULT_COUPLING,
            spread: 1.0,
            pair_range: PairRange::All,
            tunable_frequencies: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("Kuramoto network needs at least one node"));
        }
        Error::check_len("omegas", self.n, self.omegas.len())?;
        if self.omegas.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("omegas must be finite"));
        }
        if self.omegas[0] != 0.0 {
            return Err(Error::invalid("the input node's frequency must be zero"));
        }
        let mean = self.omegas.iter().sum::<f64>() / self.n as f64;
        let scale = self.omegas.iter().fold(1.0f64, |a, w| a.max(w.abs()));
        if mean.abs() > 1e-12 * scale {
            return Err(Error::invalid(format!("omegas must have zero mean, mean is {mean}")));
        }
        if !(self.coupling.is_finite() && self.spread.is_finite()) {
            return Err(Error::invalid("coupling and spread must be finite"));
        }
        Ok(())
    }

    pub fn scaled_omegas(&self) -> Vec<f64> {
        self.omegas.iter().map(|w| w * self.spread).collect()
    }
}

/// Second-order Kuramoto network with tunable dampings and couplings:
///
/// ```text
/// phi_n'' = W_n - p_n phi_n' - K sum_{m != n} p_nm sin(phi_n - phi_m) + [n = 1] i
/// o       = i - phi_1,     phi_n(0) = phi_n'(0) = 0
/// ```
///
/// State is `[phi_1..phi_N, phi_1'..phi_N']`. Parameters are the `N`
/// dampings, then one coupling per pair in lexicographic order, then (if
/// enabled) the `N` frequencies.
#[derive(Debug, Clone)]
pub struct KuramotoNetwork {
    name: String,
    config: KuramotoConfig,
    omegas: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    domain: ParamDomain,
}

pub fn make_kuramoto(config: KuramotoConfig) -> Result<KuramotoNetwork> {
    config.validate()?;
    let n = config.n;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| match config.pair_range {
            PairRange::All => true,
            PairRange::Interior => a >= 1 && b + 1 < n,
        })
        .collect();
    let mut coords = vec![Coordinate::Positive; n + pairs.len()];
    if config.tunable_frequencies {
        coords.extend(std::iter::repeat_n(Coordinate::Real, n));
    }
    Ok(KuramotoNetwork {
        name: format!("kuramoto-{n}"),
        omegas: config.scaled_omegas(),
        pairs,
        domain: ParamDomain::new(coords),
        config,
    })
}

impl KuramotoNetwork {
    pub fn config(&self) -> &KuramotoConfig {
        &self.config
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn n_nodes(&self) -> usize {
        self.config.n
    }

    fn omega_offset(&self) -> usize {
        self.config.n + self.pairs.len()
    }

    fn omega(&self, i: usize, p: &[f64]) -> f64 {
        if self.config.tunable_frequencies {
            p[self.omega_offset() + i]
        } else {
            self.omegas[i]
        }
    }
}

impl SystemFamily for KuramotoNetwork {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_dim(&self) -> usize {
        2 * self.config.n
    }

    fn param_domain(&self) -> &ParamDomain {
        &self.domain
    }

    fn default_params(&self) -> Vec<f64> {
        let mut p = vec![1.0; self.omega_offset()];
        if self.config.tunable_frequencies {
            p.extend_from_slice(&self.omegas);
        }
        p
    }

    fn initial_state(&self, _p: &[f64], x0: &mut [f64]) {
        x0.fill(0.0);
    }

    fn rhs(&self, _t: f64, x: &[f64], input: f64, p: &[f64], dx: &mut [f64]) {
        let n = self.config.n;
        let k = self.config.coupling;
        let (phi, vel) = x.split_at(n);
        let (dphi, dvel) = dx.split_at_mut(n);
        dphi.copy_from_slice(vel);
        for i in 0..n {
            dvel[i] = self.omega(i, p) - p[i] * vel[i];
        }
        dvel[0] += input;
        for (c, &(a, b)) in self.pairs.iter().enumerate() {
            let w = k * p[n + c] * (phi[a] - phi[b]).sin();
            dvel[a] -= w;
            dvel[b] += w;
        }
    }

    fn output(&self, x: &[f64], input: f64, _p: &[f64]) -> f64 {
        input - x[0]
    }

    fn output_gradient(&self, _x: &[f64], _input: f64, _p: &[f64], d_state: &mut [f64], d_param: &mut [f64]) {
        d_state.fill(0.0);
        d_state[0] = -1.0;
        d_param.fill(0.0);
    }

    fn jacobians(&self, _t: f64, x: &[f64], _input: f64, p: &[f64], jac_state: &mut [f64], jac_param: &mut [f64]) {
        let n = self.config.n;
        let dim = 2 * n;
        let m = self.param_dim();
        let k = self.config.coupling;
        jac_state.fill(0.0);
        jac_param.fill(0.0);
        for i in 0..n {
            jac_state[i * dim + n + i] = 1.0;
            jac_state[(n + i) * dim + n + i] = -p[i];
            jac_param[(n + i) * m + i] = -x[n + i];
            if self.config.tunable_frequencies {
                jac_param[(n + i) * m + self.omega_offset() + i] = 1.0;
            }
        }
        for (c, &(a, b)) in self.pairs.iter().enumerate() {
            let diff = x[a] - x[b];
            let w = k * p[n + c] * diff.cos();
            jac_state[(n + a) * dim + a] -= w;
            jac_state[(n + a) * dim + b] += w;
            jac_state[(n + b) * dim + b] -= w;
            jac_state[(n + b) * dim + a] += w;
            let sn = k * diff.sin();
            jac_param[(n + a) * m + n + c] -= sn;
            jac_param[(n + b) * m + n + c] += sn;
        }
    }

    fn sensitivity_rhs(&self, _t: f64, x: &[f64], _input: f64, p: &[f64], s: &[f64], ds: &mut [f64]) {
        let n = self.config.n;
        let m = self.param_dim();
        let k = self.config.coupling;
        let (s_phi, s_vel) = s.split_at(n * m);
        let (ds_phi, ds_vel) = ds.split_at_mut(n * m);
        ds_phi.copy_from_slice(s_vel);
        for i in 0..n {
            let damping = p[i];
            let row = &mut ds_vel[i * m..(i + 1) * m];
            for (d, &sv) in row.iter_mut().zip(&s_vel[i * m..(i + 1) * m]) {
                *d = -damping * sv;
            }
            row[i] -= x[n + i];
            if self.config.tunable_frequencies {
                row[self.omega_offset() + i] += 1.0;
            }
        }
        for (c, &(a, b)) in self.pairs.iter().enumerate() {
            let diff = x[a] - x[b];
            let (sn, cs) = diff.sin_cos();
            let w = k * p[n + c] * cs;
            let sa = &s_phi[a * m..(a + 1) * m];
            let sb = &s_phi[b * m..(b + 1) * m];
            // a < b, so row a ends before row b starts
            let (lo, hi) = ds_vel.split_at_mut(b * m);
            let ra = &mut lo[a * m..(a + 1) * m];
            let rb = &mut hi[..m];
            for j in 0..m {
                let delta = w * (sa[j] - sb[j]);
                ra[j] -= delta;
                rb[j] += delta;
            }
            ra[n + c] -= k * sn;
            rb[n + c] += k * sn;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{output_trajectory, TimeGrid};

    fn zero_frequency_config(n: usize) -> KuramotoConfig {
        KuramotoConfig {
            omegas: vec![0.0; n],
            ..KuramotoConfig::generate(n, 0, 1.0, 1.0)
        }
    }

    #[test]
    fn generated_frequencies_are_normalized() {
        for seed in 0..10 {
            let cfg = KuramotoConfig::generate(10, seed, 1.0, 3.0);
            cfg.validate().unwrap();
            let scaled = cfg.scaled_omegas();
            assert_eq!(scaled[0], 0.0);
            assert!(scaled.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn validation_catches_bad_frequencies() {
        let mut cfg = KuramotoConfig::generate(4, 1, 1.0, 1.0);
        cfg.omegas[0] = 0.5;
        assert!(cfg.validate().is_err());
        let mut cfg = KuramotoConfig::generate(4, 1, 1.0, 1.0);
        cfg.omegas[1] += 0.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn parameter_layout() {
        let net = make_kuramoto(KuramotoConfig::generate(10, 0, 1.0, 1.0)).unwrap();
        assert_eq!(net.state_dim(), 20);
        assert_eq!(net.param_dim(), 10 + 45);
        let interior = make_kuramoto(KuramotoConfig {
            pair_range: PairRange::Interior,
            ..KuramotoConfig::generate(10, 0, 1.0, 1.0)
        })
        .unwrap();
        assert_eq!(interior.param_dim(), 10 + 28);
        assert!(interior.pairs().iter().all(|&(a, b)| a >= 1 && b <= 8));
        let single = make_kuramoto(KuramotoConfig::single_oscillator()).unwrap();
        assert_eq!(single.param_dim(), 1);
    }

    #[test]
    fn equilibrium_without_frequencies_or_input() {
        let net = make_kuramoto(zero_frequency_config(5)).unwrap();
        let grid = TimeGrid::new(5.0, 0.01).unwrap();
        let p: Vec<f64> = (0..net.param_dim()).map(|i| 0.5 + 0.01 * i as f64).collect();
        let o = output_trajectory(&net, &p, &|_t: f64| 0.0, &grid).unwrap();
        assert!(o.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn driven_damped_single_oscillator() {
        // phi'' = -phi' + 1  =>  phi(t) = t - 1 + e^{-t}
        let net = make_kuramoto(KuramotoConfig::single_oscillator()).unwrap();
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let o = output_trajectory(&net, &[1.0], &|_t: f64| 1.0, &grid).unwrap();
        let expected = 1.0 - (-1.0f64).exp();
        assert!((o.last()[0] - expected).abs() < 1e-6, "{}", o.last()[0]);
    }

    #[test]
    fn structured_sensitivity_matches_dense_default() {
        for tunable in [false, true] {
            let net = make_kuramoto(KuramotoConfig {
                tunable_frequencies: tunable,
                ..KuramotoConfig::generate(4, 2, 0.7, 1.3)
            })
            .unwrap();
            let dim = net.state_dim();
            let m = net.param_dim();
            let x: Vec<f64> = (0..dim).map(|i| 0.3 * i as f64 - 0.5).collect();
            let p: Vec<f64> = (0..m).map(|i| 0.4 + 0.05 * i as f64).collect();
            let s: Vec<f64> = (0..dim * m).map(|k| ((k * 5) % 13) as f64 * 0.1 - 0.6).collect();
            let mut fast = vec![0.0; dim * m];
            net.sensitivity_rhs(0.0, &x, 0.2, &p, &s, &mut fast);

            let mut jx = vec![0.0; dim * dim];
            let mut jp = vec![0.0; dim * m];
            net.jacobians(0.0, &x, 0.2, &p, &mut jx, &mut jp);
            for i in 0..dim {
                for j in 0..m {
                    let dense = jp[i * m + j] + (0..dim).map(|k| jx[i * dim + k] * s[k * m + j]).sum::<f64>();
                    assert!((dense - fast[i * m + j]).abs() < 1e-12, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let net = make_kuramoto(KuramotoConfig::generate(3, 5, 1.0, 2.0)).unwrap();
        let dim = net.state_dim();
        let m = net.param_dim();
        let x = [0.1, -0.4, 0.7, 0.2, 0.0, -0.3];
        let p: Vec<f64> = (0..m).map(|i| 0.5 + 0.2 * i as f64).collect();
        let mut jx = vec![0.0; dim * dim];
        let mut jp = vec![0.0; dim * m];
        net.jacobians(0.0, &x, 0.4, &p, &mut jx, &mut jp);
        let h = 1e-6;
        let eval = |x: &[f64], p: &[f64]| {
            let mut dx = vec![0.0; dim];
            net.rhs(0.0, x, 0.4, p, &mut dx);
            dx
        };
        for k in 0..dim {
            let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
            xp[k] += h;
            xm[k] -= h;
            let (fp, fm) = (eval(&xp, &p), eval(&xm, &p));
            for i in 0..dim {
                assert!(((fp[i] - fm[i]) / (2.0 * h) - jx[i * dim + k]).abs() < 1e-7);
            }
        }
        for k in 0..m {
            let (mut pp, mut pm) = (p.clone(), p.clone());
            pp[k] += h;
            pm[k] -= h;
            let (fp, fm) = (eval(&x, &pp), eval(&x, &pm));
            for i in 0..dim {
                assert!(((fp[i] - fm[i]) / (2.0 * h) - jp[i * m + k]).abs() < 1e-7);
            }
        }
    }
}
