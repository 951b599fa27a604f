//! First-order and quasi-Newton optimizers over flat parameter vectors.
//!
//! All optimizers minimize a callback returning `(loss, gradient)` and keep
//! the best iterate seen, so the returned loss never exceeds the loss at
//! the starting point.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Amsgrad,
    Bfgs,
}

impl OptimizerKind {
    pub fn label(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "ADAM",
            OptimizerKind::Amsgrad => "AMSGrad",
            OptimizerKind::Bfgs => "BFGS",
        }
    }
}

/// How gradients of the joint objective are obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// Forward sensitivity equations through the RK4 stages.
    #[default]
    ForwardSensitivity,
    /// Central differences in the unconstrained coordinates.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    #[serde(default = "OptimizerConfig::default_learning_rate")]
    pub learning_rate: f64,
    pub iterations: usize,
    #[serde(default)]
    pub gradient_mode: GradientMode,
}

impl OptimizerConfig {
    pub const DEFAULT_LEARNING_RATE: f64 = 0.01;

    fn default_learning_rate() -> f64 {
        Self::DEFAULT_LEARNING_RATE
    }

    pub fn adam(iterations: usize) -> Self {
        Self::new(OptimizerKind::Adam, iterations)
    }

    pub fn amsgrad(iterations: usize) -> Self {
        Self::new(OptimizerKind::Amsgrad, iterations)
    }

    pub fn bfgs(iterations: usize) -> Self {
        Self::new(OptimizerKind::Bfgs, iterations)
    }

    pub fn new(kind: OptimizerKind, iterations: usize) -> Self {
        Self {
            kind,
            learning_rate: Self::DEFAULT_LEARNING_RATE,
            iterations,
            gradient_mode: GradientMode::default(),
        }
    }

    pub fn with_learning_rate(self, learning_rate: f64) -> Self {
        Self { learning_rate, ..self }
    }

    pub fn with_gradient_mode(self, gradient_mode: GradientMode) -> Self {
        Self { gradient_mode, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerStatus {
    /// Ran the full iteration budget.
    Completed,
    /// Stopped early on the gradient criterion.
    Converged,
    /// BFGS could not find a step satisfying the Armijo condition.
    LineSearchFailed,
    /// The objective or its gradient stopped being finite.
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOutcome {
    /// Best iterate seen.
    pub params: Vec<f64>,
    /// Loss at `params`.
    pub loss: f64,
    pub initial_loss: f64,
    /// Loss at every iterate, in order. For BFGS only accepted iterates are
    /// listed.
    pub history: Vec<f64>,
    /// Number of objective evaluations, including rejected line-search
    /// trials.
    pub evaluations: usize,
    pub status: OptimizerStatus,
}

impl OptimizerOutcome {
    /// Running minimum of `history`.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.history
            .iter()
            .scan(f64::INFINITY, |best, &l| {
                if l < *best {
                    *best = l;
                }
                Some(*best)
            })
            .collect()
    }
}

/// ADAM / AMSGrad moment estimates, kept between runs when stages share
/// optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    m: Vec<f64>,
    v: Vec<f64>,
    v_max: Vec<f64>,
    step: u32,
}

impl MomentState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            v_max: vec![0.0; dim],
            step: 0,
        }
    }

    pub fn step(&self) -> u32 {
        self.step
    }
}

/// Coordinate-wise bounds in unconstrained coordinates. Infinite entries
/// leave a side open.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert!(lower.iter().zip(&upper).all(|(l, u)| l <= u), "empty search box");
        Self { lower, upper }
    }

    pub fn unbounded(dim: usize) -> Self {
        Self::new(vec![f64::NEG_INFINITY; dim], vec![f64::INFINITY; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Concatenation `[self, other]`.
    pub fn concat(&self, other: &SearchBox) -> SearchBox {
        let mut out = self.clone();
        out.lower.extend_from_slice(&other.lower);
        out.upper.extend_from_slice(&other.upper);
        out
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Whether coordinate `i` sits on a bound that `g` (a gradient) pushes
    /// against.
    fn blocks(&self, x: &[f64], g: &[f64], i: usize) -> bool {
        (x[i] <= self.lower[i] && g[i] > 0.0) || (x[i] >= self.upper[i] && g[i] < 0.0)
    }
}

fn project(bounds: Option<&SearchBox>, x: &mut [f64]) {
    if let Some(b) = bounds {
        b.project(x);
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Tracks the best iterate.
struct Best {
    params: Vec<f64>,
    loss: f64,
}

impl Best {
    fn offer(&mut self, x: &[f64], loss: f64) {
        if loss < self.loss || (self.loss.is_nan() && !loss.is_nan()) {
            self.loss = loss;
            self.params.clear();
            self.params.extend_from_slice(x);
        }
    }
}

/// Runs one optimizer stage with fresh moment estimates.
pub fn run_optimizer<F>(objective: F, init: &[f64], cfg: &OptimizerConfig) -> OptimizerOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut state = None;
    run_optimizer_with_state(objective, init, cfg, None, &mut state)
}

/// Like [`run_optimizer`], but ADAM and AMSGrad continue from `state` when
/// it is present and leave their final moments in it; BFGS ignores it.
/// With `bounds`, every iterate after the first is projected onto the box.
pub fn run_optimizer_with_state<F>(
    objective: F,
    init: &[f64],
    cfg: &OptimizerConfig,
    bounds: Option<&SearchBox>,
    state: &mut Option<MomentState>,
) -> OptimizerOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    match cfg.kind {
        OptimizerKind::Adam | OptimizerKind::Amsgrad => {
            let moments = state.get_or_insert_with(|| MomentState::new(init.len()));
            if moments.m.len() != init.len() {
                *moments = MomentState::new(init.len());
            }
            adaptive(objective, init, cfg, bounds, moments)
        }
        OptimizerKind::Bfgs => bfgs(objective, init, cfg.iterations, &BfgsOptions::default(), bounds),
    }
}

/// Halvings of a rejected ADAM/AMSGrad step before the run gives up.
const MAX_RETREATS: usize = 30;

fn finite_eval(f: f64, g: &[f64]) -> bool {
    f.is_finite() && all_finite(g)
}

/// Pulls `x` back toward `anchor` along `update`, halving each time, until
/// the objective is finite again.
fn retreat<F>(
    objective: &mut F,
    x: &mut [f64],
    anchor: &[f64],
    update: &[f64],
    evaluations: &mut usize,
) -> Option<(f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut scale = 1.0;
    for _ in 0..MAX_RETREATS {
        scale *= 0.5;
        for i in 0..x.len() {
            x[i] = anchor[i] - scale * update[i];
        }
        let (f, g) = objective(x);
        *evaluations += 1;
        if finite_eval(f, &g) {
            return Some((f, g));
        }
    }
    None
}

fn adaptive<F>(
    mut objective: F,
    init: &[f64],
    cfg: &OptimizerConfig,
    bounds: Option<&SearchBox>,
    st: &mut MomentState,
) -> OptimizerOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let amsgrad = cfg.kind == OptimizerKind::Amsgrad;
    let lr = cfg.learning_rate;
    let mut x = init.to_vec();
    let mut history = Vec::with_capacity(cfg.iterations + 1);
    let mut best = Best {
        params: x.clone(),
        loss: f64::INFINITY,
    };
    let mut status = OptimizerStatus::Completed;
    let mut evaluations = 0;
    let mut anchor = x.clone();
    let mut update = vec![0.0; x.len()];
    let mut moved = false;

    for it in 0..=cfg.iterations {
        let (mut f, mut g) = objective(&x);
        evaluations += 1;
        if !finite_eval(f, &g) && moved {
            // a step landed where the objective is not finite: shorten it
            match retreat(&mut objective, &mut x, &anchor, &update, &mut evaluations) {
                Some(fg) => (f, g) = fg,
                None => {
                    status = OptimizerStatus::NonFinite;
                    break;
                }
            }
        }
        history.push(f);
        best.offer(&x, f);
        if !finite_eval(f, &g) {
            status = OptimizerStatus::NonFinite;
            break;
        }
        if it == cfg.iterations {
            break;
        }
        st.step += 1;
        let bc1 = 1.0 - BETA1.powi(st.step as i32);
        let bc2 = 1.0 - BETA2.powi(st.step as i32);
        for i in 0..x.len() {
            st.m[i] = BETA1 * st.m[i] + (1.0 - BETA1) * g[i];
            st.v[i] = BETA2 * st.v[i] + (1.0 - BETA2) * g[i] * g[i];
            let second = if amsgrad {
                st.v_max[i] = st.v_max[i].max(st.v[i]);
                st.v_max[i]
            } else {
                st.v[i]
            };
            let m_hat = st.m[i] / bc1;
            let v_hat = second / bc2;
            update[i] = lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
        anchor.copy_from_slice(&x);
        for i in 0..x.len() {
            x[i] -= update[i];
        }
        project(bounds, &mut x);
        for i in 0..x.len() {
            update[i] = anchor[i] - x[i];
        }
        moved = true;
    }
    OptimizerOutcome {
        params: best.params,
        loss: best.loss,
        initial_loss: history[0],
        history,
        evaluations,
        status,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    /// Stop when the largest gradient component falls below this.
    pub gradient_tolerance: f64,
    /// A failed line search still counts as convergence when the gradient
    /// is below this.
    pub stall_gradient_tolerance: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Cap on the largest component of a trial step, in unconstrained
    /// coordinates.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-10,
            stall_gradient_tolerance: 1e-7,
            armijo: 1e-4,
            max_backtracks: 40,
            max_step: 2.0,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// BFGS on the inverse Hessian with backtracking Armijo line search.
///
/// The first accepted step rescales the identity by `s.y / y.y`; updates
/// with non-positive curvature are skipped. `max_iterations` counts
/// accepted steps. With `bounds`, coordinates held at a bound by the
/// gradient are frozen for the step and trial points are projected.
pub fn bfgs<F>(
    mut objective: F,
    init: &[f64],
    max_iterations: usize,
    opts: &BfgsOptions,
    bounds: Option<&SearchBox>,
) -> OptimizerOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = init.len();
    let mut x = init.to_vec();
    let (mut f, mut g) = objective(&x);
    let mut evaluations = 1;
    let mut history = vec![f];
    let initial_loss = f;
    if !f.is_finite() || !all_finite(&g) {
        return OptimizerOutcome {
            params: x,
            loss: f,
            initial_loss,
            history,
            evaluations,
            status: OptimizerStatus::NonFinite,
        };
    }

    let identity = |h: &mut Vec<f64>, scale: f64| {
        h.fill(0.0);
        for i in 0..n {
            h[i * n + i] = scale;
        }
    };
    let mut h = vec![0.0; n * n];
    identity(&mut h, 1.0);
    let mut scaled = false;
    let mut status = OptimizerStatus::Completed;
    let mut d = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut hy = vec![0.0; n];

    let mut free = vec![true; n];
    let mut pg = vec![0.0; n];

    for _ in 0..max_iterations {
        for i in 0..n {
            free[i] = !bounds.is_some_and(|b| b.blocks(&x, &g, i));
            pg[i] = if free[i] { g[i] } else { 0.0 };
        }
        if inf_norm(&pg) <= opts.gradient_tolerance {
            status = OptimizerStatus::Converged;
            break;
        }
        for i in 0..n {
            d[i] = if free[i] {
                -dot(&h[i * n..(i + 1) * n], &pg)
            } else {
                0.0
            };
        }
        let mut slope = dot(&g, &d);
        if slope.is_nan() || slope >= 0.0 {
            identity(&mut h, 1.0);
            scaled = false;
            for i in 0..n {
                d[i] = -pg[i];
            }
            slope = -dot(&pg, &pg);
        }
        let mut alpha = 1.0;
        let dmax = inf_norm(&d);
        if dmax > opts.max_step {
            alpha = opts.max_step / dmax;
        }

        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            for i in 0..n {
                trial[i] = x[i] + alpha * d[i];
            }
            project(bounds, &mut trial);
            let decrease = if bounds.is_some() {
                trial.iter().zip(&x).zip(&g).map(|((t, xi), gi)| (t - xi) * gi).sum()
            } else {
                alpha * slope
            };
            let (ft, gt) = objective(&trial);
            evaluations += 1;
            if ft.is_finite() && all_finite(&gt) && ft <= f + opts.armijo * decrease {
                accepted = Some((ft, gt));
                break;
            }
            alpha *= 0.5;
        }
        let Some((f_new, g_new)) = accepted else {
            status = if inf_norm(&pg) <= opts.stall_gradient_tolerance {
                OptimizerStatus::Converged
            } else {
                OptimizerStatus::LineSearchFailed
            };
            break;
        };

        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if !scaled {
                identity(&mut h, sy / dot(&y, &y));
                scaled = true;
            }
            let rho = 1.0 / sy;
            for i in 0..n {
                hy[i] = dot(&h[i * n..(i + 1) * n], &y);
            }
            let yhy = dot(&y, &hy);
            let coef = rho * rho * yhy + rho;
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + coef * s[i] * s[j];
                }
            }
        }
        x.copy_from_slice(&trial);
        f = f_new;
        g = g_new;
        history.push(f);
    }

    // iterates only move on sufficient decrease, so x is the best point
    OptimizerOutcome {
        params: x,
        loss: f,
        initial_loss,
        history,
        evaluations,
        status,
    }
}
