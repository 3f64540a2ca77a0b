//! Time-stepped integration of the attitude SDE with random coupling, the
//! fundamental-value random walk, and price/return/volume series generation.
//!
//! RNG contract: one master seed feeds three fixed ChaCha8 streams —
//! attitude noise, coupling noise, fundamental noise — so toggling any one
//! noise source leaves the draws of the others untouched. Identical params
//! (seed included) give bit-identical output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::model::{
    clearing_log_price, diffusion, drift, trading_volume, transition_down, transition_up, Boundary,
    MarketState, ModelParams, ParamError, PhiNoise,
};

/// Stream ids for the per-source ChaCha8 sub-generators.
const STREAM_X: u64 = 0;
const STREAM_PHI: u64 = 1;
const STREAM_FUND: u64 = 2;

/// Largest ensemble the exact agent-level oracle will simulate.
pub const MAX_ORACLE_AGENTS: u32 = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("agent oracle supports n <= {MAX_ORACLE_AGENTS} (got {0})")]
    OracleTooLarge(u32),
    #[error("agent oracle needs at least 2 agents (got {0})")]
    OracleTooSmall(u32),
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One Euler–Maruyama update of the average attitude:
/// `raw = x + tanh(φx)·dt + sqrt((2/n)(1 - tanh(φx)))·dw`,
/// then the boundary rule maps `raw` back into `[-1, 1]`.
///
/// Returns the new attitude and whether the boundary intervened.
pub fn euler_step(x: f64, phi: f64, dw: f64, dt: f64, n: u32, boundary: Boundary) -> (f64, bool) {
    let raw = x + drift(x, phi) * dt + diffusion(x, phi, n).sqrt() * dw;
    apply_boundary(raw, boundary)
}

fn apply_boundary(raw: f64, boundary: Boundary) -> (f64, bool) {
    if raw.abs() <= 1.0 {
        return (raw, false);
    }
    match boundary {
        Boundary::Clamp => (raw.clamp(-1.0, 1.0), true),
        Boundary::Reflect => {
            let mut v = raw;
            while v.abs() > 1.0 {
                if v > 1.0 {
                    v = 2.0 - v;
                } else {
                    v = -2.0 - v;
                }
            }
            (v, true)
        }
    }
}

/// Output of one simulation run: recorded paths (post burn-in), derived
/// returns and volume, and boundary diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSeries {
    /// Attitude path, length `steps`.
    pub x: Vec<f64>,
    /// Log price path, length `steps`.
    pub ln_s: Vec<f64>,
    /// Day-over-day log price changes, length `steps - 1`.
    pub returns: Vec<f64>,
    /// Shares traded per day, length `steps`.
    pub volume: Vec<f64>,
    /// Number of boundary interventions over the whole run (burn-in included).
    pub clamp_events: u64,
    /// The generating configuration.
    pub params: ModelParams,
}

impl SimulationSeries {
    /// True when boundary interventions exceeded a tenth of the recorded
    /// steps — the diffusion approximation is strained in that regime.
    pub fn clamp_warning(&self) -> bool {
        self.clamp_events > u64::from(self.params.steps) / 10
    }

    /// Volume with its floor `b·n/2` removed: the fluctuating component
    /// `b·n·|X|/2` that carries the distributional signature.
    pub fn volume_fluctuation(&self) -> Vec<f64> {
        let floor = self.params.volume_floor();
        self.volume.iter().map(|v| v - floor).collect()
    }
}

/// Integrate the model for `burn_in + steps` days and record the last
/// `steps` of them.
///
/// Per day: draw `ΔW ~ N(0, dt)`; set `φ = ρ·ΔW'` with `ΔW'` an independent
/// draw or the same `ΔW` depending on `phi_noise`; advance the attitude by
/// [`euler_step`]; advance `ln S*` by `σ_f·ε`, `ε ~ N(0,1)`; clear the price
/// and derive return and volume.
pub fn run_simulation(params: &ModelParams) -> Result<SimulationSeries, SimError> {
    params.validate()?;

    let mut x_rng = stream_rng(params.seed, STREAM_X);
    let mut phi_rng = stream_rng(params.seed, STREAM_PHI);
    let mut fund_rng = stream_rng(params.seed, STREAM_FUND);

    let steps = params.steps as usize;
    let total = params.burn_in as usize + steps;
    let sqrt_dt = params.dt.sqrt();

    let mut x = Vec::with_capacity(steps);
    let mut ln_s = Vec::with_capacity(steps);
    let mut volume = Vec::with_capacity(steps);
    let mut clamp_events = 0u64;

    let mut state = MarketState::initial(params);
    for j in 0..total {
        if j >= params.burn_in as usize {
            x.push(state.x);
            ln_s.push(state.ln_s);
            volume.push(trading_volume(state.x, params.b, params.n)?);
        }
        if j + 1 == total {
            break;
        }
        let dw: f64 =
            sqrt_dt * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut x_rng);
        let phi = match params.phi_noise {
            PhiNoise::Shared => params.rho * dw,
            PhiNoise::Independent => {
                params.rho
                    * sqrt_dt
                    * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut phi_rng)
            }
        };
        let eps: f64 =
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut fund_rng);

        let (x_next, clamped) = euler_step(state.x, phi, dw, params.dt, params.n, params.boundary);
        if clamped {
            clamp_events += 1;
        }
        let ln_s_star = state.ln_s_star + params.sigma_f * eps;
        state = MarketState {
            x: x_next,
            ln_s: clearing_log_price(ln_s_star, x_next, params.lambda),
            ln_s_star,
            step: state.step + 1,
        };
    }

    let returns = ln_s.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(SimulationSeries {
        x,
        ln_s,
        returns,
        volume,
        clamp_events,
        params: params.clone(),
    })
}

/// Ensemble of individual ±1 investment attitudes; its mean is the
/// aggregate state `X` by definition.
#[derive(Debug, Clone)]
pub struct AgentEnsemble {
    attitudes: Vec<i8>,
}

impl AgentEnsemble {
    /// Half sellers, half buyers (one extra buyer when `n` is odd).
    pub fn balanced(n: u32) -> Self {
        let n = n as usize;
        let mut attitudes = vec![1i8; n];
        for a in attitudes.iter_mut().take(n / 2) {
            *a = -1;
        }
        AgentEnsemble { attitudes }
    }

    /// Every agent a buyer (`up = true`) or a seller.
    pub fn uniform(n: u32, up: bool) -> Self {
        AgentEnsemble {
            attitudes: vec![if up { 1 } else { -1 }; n as usize],
        }
    }

    pub fn len(&self) -> usize {
        self.attitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attitudes.is_empty()
    }

    /// Average attitude `X = (1/n)Σ u_i`.
    pub fn mean(&self) -> f64 {
        let sum: i64 = self.attitudes.iter().map(|&a| i64::from(a)).sum();
        sum as f64 / self.attitudes.len() as f64
    }

    /// Synchronous flip round: against the current mean `X`, each seller
    /// turns buyer with probability `min(1, W↑(X)·dt)` and each buyer turns
    /// seller with probability `min(1, W↓(X)·dt)`.
    pub fn step(&mut self, phi: f64, dt: f64, rng: &mut ChaCha8Rng) {
        let x = self.mean();
        let p_up = (transition_up(x, phi) * dt).min(1.0);
        let p_down = (transition_down(x, phi) * dt).min(1.0);
        for a in &mut self.attitudes {
            let u: f64 = rand::Rng::random(rng);
            if *a == -1 {
                if u < p_up {
                    *a = 1;
                }
            } else if u < p_down {
                *a = -1;
            }
        }
    }
}

/// Exact agent-level Markov chain at constant coupling, for cross-checking
/// the aggregate integrator at small `n`. Starts balanced; returns the `X`
/// path (initial state first, then `steps - 1` flip rounds).
pub fn simulate_agents(
    n: u32,
    phi: f64,
    steps: u32,
    dt: f64,
    seed: u64,
) -> Result<Vec<f64>, SimError> {
    simulate_agents_from(AgentEnsemble::balanced(n), phi, steps, dt, seed)
}

/// [`simulate_agents`] with a caller-supplied initial ensemble.
pub fn simulate_agents_from(
    mut ensemble: AgentEnsemble,
    phi: f64,
    steps: u32,
    dt: f64,
    seed: u64,
) -> Result<Vec<f64>, SimError> {
    let n = ensemble.len() as u32;
    if n > MAX_ORACLE_AGENTS {
        return Err(SimError::OracleTooLarge(n));
    }
    if n < 2 {
        return Err(SimError::OracleTooSmall(n));
    }
    let mut rng = stream_rng(seed, STREAM_X);
    let mut path = Vec::with_capacity(steps as usize);
    path.push(ensemble.mean());
    for _ in 1..steps {
        ensemble.step(phi, dt, &mut rng);
        path.push(ensemble.mean());
    }
    Ok(path)
}
