//! ADAM refinement of the hand parameters with random restarts.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::{HandParams, ParamLayout};
use crate::loss::{LossTerms, Objective};
use crate::rng::{gaussian, gaussian_rotation, rng_for};
use crate::rotation::compose;
use crate::Vec3;

/// Per-block step multipliers. A block with scale `s` is optimized in the
/// coordinates `x / s`: its gradient is multiplied by `s` before the moment
/// updates and the resulting step by `s` again, so ADAM moves it about
/// `learning_rate * s` per iteration. Zero freezes the block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradScale {
    pub theta: f64,
    pub beta: f64,
    /// Millimetres per unit step.
    pub translation: f64,
    /// Radians per unit step.
    pub rotation: f64,
}

impl Default for GradScale {
    fn default() -> Self {
        GradScale {
            theta: 1.0,
            beta: 0.0,
            translation: 100.0,
            rotation: 1.0,
        }
    }
}

impl GradScale {
    pub fn vector(&self, layout: ParamLayout) -> DVector<f64> {
        let mut s = DVector::zeros(layout.dim());
        for (range, value) in [
            (layout.pose(), self.theta),
            (layout.shape(), self.beta),
            (layout.translation(), self.translation),
            (layout.rotation(), self.rotation),
        ] {
            for i in range {
                s[i] = value;
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub grad_scale: GradScale,
    pub n_restart: usize,
    /// Standard deviation (mm) of the per-axis translation noise added to
    /// every restart but the first.
    pub restart_translation_sigma: f64,
    /// Standard deviation (degrees) of the restart rotation angle.
    pub restart_rotation_sigma: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 0.01,
            iterations: 250,
            grad_scale: GradScale::default(),
            n_restart: 1,
            restart_translation_sigma: 10.0,
            restart_rotation_sigma: 5.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return invalid("learning_rate must be positive");
        }
        if self.iterations == 0 {
            return invalid("iterations must be at least 1");
        }
        if self.n_restart == 0 {
            return invalid("n_restart must be at least 1");
        }
        let s = self.grad_scale;
        if [s.theta, s.beta, s.translation, s.rotation]
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return invalid("grad_scale entries must be finite and non-negative");
        }
        if !(self.restart_translation_sigma >= 0.0 && self.restart_rotation_sigma >= 0.0) {
            return invalid("restart sigmas must be non-negative");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || self.adam_eps <= 0.0 {
            return invalid("adam_beta1 and adam_beta2 must lie in [0, 1) and adam_eps must be positive");
        }
        Ok(())
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: DVector<f64>,
    pub v: DVector<f64>,
    pub t: u32,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        AdamState {
            m: DVector::zeros(dim),
            v: DVector::zeros(dim),
            t: 0,
        }
    }
}

/// One bias-corrected ADAM update of `x` in place, with per-component
/// `scale` as described on [`GradScale`].
pub fn adam_step(x: &mut DVector<f64>, state: &mut AdamState, grad: &DVector<f64>, scale: &DVector<f64>, cfg: &OptimConfig) {
    state.t += 1;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for i in 0..x.len() {
        let g = grad[i] * scale[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        x[i] -= cfg.learning_rate * scale[i] * m_hat / (v_hat.sqrt() + cfg.adam_eps);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub params: HandParams,
    pub terms: LossTerms,
    /// Loss at the start of every iteration followed by the loss after the
    /// last step.
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    /// Lowest-loss parameters of the winning restart, rotation canonicalized.
    pub params: HandParams,
    pub final_loss: f64,
    pub final_terms: LossTerms,
    pub loss_trace: Vec<f64>,
    pub restart_index: usize,
    /// Final loss per restart; infinity for an aborted restart.
    pub restart_losses: Vec<f64>,
}

/// Starting point of restart `r`; restart 0 is `init` itself.
pub fn restart_init(init: &HandParams, restart: usize, cfg: &OptimConfig) -> HandParams {
    if restart == 0 {
        return init.clone();
    }
    let mut rng = rng_for(cfg.seed, &[0x7265_7374, restart as u64]);
    let mut p = init.clone();
    let sigma = cfg.restart_translation_sigma;
    let shift = Vec3::new(gaussian(&mut rng, sigma), gaussian(&mut rng, sigma), gaussian(&mut rng, sigma));
    p.set_translation(p.translation() + shift);
    let spin = gaussian_rotation(&mut rng, cfg.restart_rotation_sigma.to_radians());
    p.set_rotation(compose(&spin, &p.rotation()));
    p
}

/// Runs one restart from `start`, returning the lowest-loss iterate.
pub fn run_restart(objective: &Objective, start: &HandParams, cfg: &OptimConfig) -> Result<RestartOutcome> {
    let layout = start.layout();
    let scale = cfg.grad_scale.vector(layout);
    let mut x = start.to_vector();
    let mut state = AdamState::new(layout.dim());
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let mut best: Option<(LossTerms, DVector<f64>)> = None;
    let mut keep_best = |terms: LossTerms, x: &DVector<f64>| {
        if best.as_ref().is_none_or(|(b, _)| terms.total < b.total) {
            best = Some((terms, x.clone()));
        }
    };
    for iteration in 0..cfg.iterations {
        let (terms, grad) = objective.gradient(&HandParams::from_vector(layout, &x))?;
        if !terms.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { iteration });
        }
        trace.push(terms.total);
        keep_best(terms, &x);
        adam_step(&mut x, &mut state, &grad, &scale, cfg);
    }
    let terms = objective.loss(&HandParams::from_vector(layout, &x))?;
    if !terms.is_finite() {
        return Err(Error::NonFiniteLoss {
            iteration: cfg.iterations,
        });
    }
    trace.push(terms.total);
    keep_best(terms, &x);
    let (terms, x) = best.expect("at least one iterate");
    Ok(RestartOutcome {
        params: HandParams::from_vector(layout, &x),
        terms,
        loss_trace: trace,
    })
}

/// Refines `init` against the objective with `n_restart` restarts and keeps
/// the restart with the lowest final loss (earliest restart on ties).
pub fn optimize(objective: &Objective, init: &HandParams, cfg: &OptimConfig) -> Result<OptimResult> {
    cfg.validate()?;
    if !init.is_finite() {
        return Err(Error::InvalidConfig("initial parameters are not finite".into()));
    }
    let outcomes: Vec<Result<RestartOutcome>> = (0..cfg.n_restart)
        .into_par_iter()
        .map(|r| run_restart(objective, &restart_init(init, r, cfg), cfg))
        .collect();
    let mut restart_losses = Vec::with_capacity(outcomes.len());
    let mut winner: Option<(usize, RestartOutcome)> = None;
    let mut first_error = None;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                restart_losses.push(o.terms.total);
                if winner.as_ref().is_none_or(|(_, w)| o.terms.total < w.terms.total) {
                    winner = Some((r, o));
                }
            }
            Err(Error::NonFiniteLoss { iteration }) => {
                log::warn!("restart {r} aborted: non-finite loss at iteration {iteration}");
                restart_losses.push(f64::INFINITY);
                first_error.get_or_insert(Error::NonFiniteLoss { iteration });
            }
            Err(e) => return Err(e),
        }
    }
    let Some((restart_index, outcome)) = winner else {
        return Err(first_error.expect("every restart failed"));
    };
    Ok(OptimResult {
        params: outcome.params.canonicalized(),
        final_loss: outcome.terms.total,
        final_terms: outcome.terms,
        loss_trace: outcome.loss_trace,
        restart_index,
        restart_losses,
    })
}

/// `iteration,loss` rows under a header line.
pub fn loss_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,loss\n");
    for (i, v) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    out
}
