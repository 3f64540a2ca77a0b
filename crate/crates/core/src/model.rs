//! Core market model: transition probabilities, attitude drift/diffusion,
//! demand functions and the market-clearing price.
//!
//! Everything here is a pure function of its arguments. The market couples
//! `n` mutually imitating traders (each holding a ±1 attitude whose average
//! is `X`) with `m` fundamentalists trading against a log fundamental value.
//! Clearing the combined demand gives `ln S = ln S* + λX` with
//! `λ = bn/(am)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for the `λ = bn/(am)` consistency check.
const LAMBDA_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("n must be at least 2 (got {0})")]
    TooFewTraders(u32),
    #[error("m must be positive")]
    NoFundamentalists,
    #[error("{name} must be positive and finite (got {value})")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be nonnegative and finite (got {value})")]
    Negative { name: &'static str, value: f64 },
    #[error("x0 must lie in [-1, 1] (got {0})")]
    InitialAttitudeOutOfRange(f64),
    #[error("steps must be positive")]
    NoSteps,
    #[error("lambda = {lambda} contradicts b*n/(a*m) = {implied} (relative error {rel_err:.3e})")]
    ContradictoryPricing {
        lambda: f64,
        implied: f64,
        rel_err: f64,
    },
    #[error("attitude {0} outside [-1, 1]; boundary handling failed upstream")]
    AttitudeOutOfRange(f64),
}

/// Source of the Wiener increment behind the random coupling `φ_j = ρ·ΔW_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PhiNoise {
    /// `φ_j` gets its own increment, independent of the one driving `X`.
    #[default]
    Independent,
    /// `φ_j` reuses the increment that drives the `X` update.
    Shared,
}

/// How to map an attitude update that overshoots `[-1, 1]` back into range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Truncate at the violated bound.
    #[default]
    Clamp,
    /// Fold the overshoot back across the violated bound.
    Reflect,
}

/// Market classification by the sign of the average attitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarketRegime {
    Bull,
    Bear,
    Fair,
}

/// Full parameterization of one simulation run.
///
/// Construct through [`ModelParams::builder`], which resolves the coupled
/// price-impact parameters and validates everything. A directly supplied
/// `lambda` overrides `a`, `b`, `m`; supplying the full set is accepted only
/// when consistent to `1e-12` relative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Number of interacting traders.
    pub n: u32,
    /// Number of fundamentalists.
    pub m: u32,
    /// Fundamentalist reaction coefficient.
    pub a: f64,
    /// Shares traded per interacting trader per day.
    pub b: f64,
    /// Price impact `λ = bn/(am)`.
    pub lambda: f64,
    /// Conformity effect: amplitude of the random interaction intensity.
    pub rho: f64,
    /// Integration step.
    pub dt: f64,
    /// Std. dev. of the fundamental log-value increment per step.
    pub sigma_f: f64,
    /// Initial average attitude.
    pub x0: f64,
    /// Initial fundamental value.
    pub s_star_0: f64,
    /// Recorded steps.
    pub steps: u32,
    /// Discarded initial steps.
    pub burn_in: u32,
    /// Master RNG seed.
    pub seed: u64,
    pub phi_noise: PhiNoise,
    pub boundary: Boundary,
}

impl ModelParams {
    /// Builder seeded with the conformity effect `rho`; every other field
    /// defaults to the reference parameter set (`dt = 0.1`, `λ = 1`,
    /// `n = 100_000`, no fundamental noise, symmetric start).
    pub fn builder(rho: f64) -> ModelParamsBuilder {
        ModelParamsBuilder {
            n: 100_000,
            m: 1,
            a: 1.0,
            b: None,
            lambda: None,
            rho,
            dt: 0.1,
            sigma_f: 0.0,
            x0: 0.0,
            s_star_0: 100.0,
            steps: 100_000,
            burn_in: 1_000,
            seed: 0,
            phi_noise: PhiNoise::default(),
            boundary: Boundary::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.n < 2 {
            return Err(ParamError::TooFewTraders(self.n));
        }
        if self.m == 0 {
            return Err(ParamError::NoFundamentalists);
        }
        for (name, value) in [
            ("a", self.a),
            ("b", self.b),
            ("lambda", self.lambda),
            ("dt", self.dt),
            ("s_star_0", self.s_star_0),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ParamError::NotPositive { name, value });
            }
        }
        for (name, value) in [("rho", self.rho), ("sigma_f", self.sigma_f)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ParamError::Negative { name, value });
            }
        }
        if !(self.x0.is_finite() && self.x0.abs() <= 1.0) {
            return Err(ParamError::InitialAttitudeOutOfRange(self.x0));
        }
        if self.steps == 0 {
            return Err(ParamError::NoSteps);
        }
        let implied = self.b * f64::from(self.n) / (self.a * f64::from(self.m));
        let rel_err = (self.lambda - implied).abs() / self.lambda.abs().max(implied.abs());
        if rel_err > LAMBDA_REL_TOL {
            return Err(ParamError::ContradictoryPricing {
                lambda: self.lambda,
                implied,
                rel_err,
            });
        }
        Ok(())
    }

    /// Total shares the interacting side can move, `b·n`. Sets the volume
    /// scale in Eq.-of-day volume and the floor `b·n/2`.
    pub fn bn(&self) -> f64 {
        self.b * f64::from(self.n)
    }

    /// Volume floor `b·n/2`, attained at `X = 0`.
    pub fn volume_floor(&self) -> f64 {
        self.bn() / 2.0
    }
}

/// Staged [`ModelParams`] with the `a, b, m, λ` coupling still unresolved.
#[derive(Debug, Clone)]
pub struct ModelParamsBuilder {
    n: u32,
    m: u32,
    a: f64,
    b: Option<f64>,
    lambda: Option<f64>,
    rho: f64,
    dt: f64,
    sigma_f: f64,
    x0: f64,
    s_star_0: f64,
    steps: u32,
    burn_in: u32,
    seed: u64,
    phi_noise: PhiNoise,
    boundary: Boundary,
}

impl ModelParamsBuilder {
    pub fn n(mut self, n: u32) -> Self {
        self.n = n;
        self
    }
    pub fn m(mut self, m: u32) -> Self {
        self.m = m;
        self
    }
    pub fn a(mut self, a: f64) -> Self {
        self.a = a;
        self
    }
    pub fn b(mut self, b: f64) -> Self {
        self.b = Some(b);
        self
    }
    pub fn lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }
    pub fn dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }
    pub fn sigma_f(mut self, sigma_f: f64) -> Self {
        self.sigma_f = sigma_f;
        self
    }
    pub fn x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }
    pub fn s_star_0(mut self, s_star_0: f64) -> Self {
        self.s_star_0 = s_star_0;
        self
    }
    pub fn steps(mut self, steps: u32) -> Self {
        self.steps = steps;
        self
    }
    pub fn burn_in(mut self, burn_in: u32) -> Self {
        self.burn_in = burn_in;
        self
    }
    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
    pub fn phi_noise(mut self, phi_noise: PhiNoise) -> Self {
        self.phi_noise = phi_noise;
        self
    }
    pub fn boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    /// Resolve the `λ = bn/(am)` coupling and validate.
    ///
    /// - `lambda` and `b` both given: accepted only if consistent.
    /// - only `b` given: `λ` derived.
    /// - only `lambda` given (or neither; default `λ = 1`): `b` back-solved
    ///   with `a·m` left as configured.
    pub fn build(self) -> Result<ModelParams, ParamError> {
        let n = f64::from(self.n);
        let am = self.a * f64::from(self.m);
        let (lambda, b) = match (self.lambda, self.b) {
            (Some(lambda), Some(b)) => (lambda, b),
            (Some(lambda), None) => (lambda, lambda * am / n),
            (None, Some(b)) => (b * n / am, b),
            (None, None) => (1.0, am / n),
        };
        let params = ModelParams {
            n: self.n,
            m: self.m,
            a: self.a,
            b,
            lambda,
            rho: self.rho,
            dt: self.dt,
            sigma_f: self.sigma_f,
            x0: self.x0,
            s_star_0: self.s_star_0,
            steps: self.steps,
            burn_in: self.burn_in,
            seed: self.seed,
            phi_noise: self.phi_noise,
            boundary: self.boundary,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Joint state of one trading day: average attitude, log price and log
/// fundamental value. `ln_s` is maintained as `ln_s_star + λ·x` by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    pub x: f64,
    pub ln_s: f64,
    pub ln_s_star: f64,
    pub step: u64,
}

impl MarketState {
    pub fn initial(params: &ModelParams) -> Self {
        let ln_s_star = params.s_star_0.ln();
        MarketState {
            x: params.x0,
            ln_s: clearing_log_price(ln_s_star, params.x0, params.lambda),
            ln_s_star,
            step: 0,
        }
    }
}

/// Numerically stable logistic `1/(1+e^{-z})`.
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Probability that a seller turns buyer, `W↑(X) = 1/(1+exp(-2φX))`.
pub fn transition_up(x: f64, phi: f64) -> f64 {
    logistic(2.0 * phi * x)
}

/// Probability that a buyer turns seller, `W↓(X) = 1/(1+exp(2φX))`.
/// Complements [`transition_up`]: the two sum to one.
pub fn transition_down(x: f64, phi: f64) -> f64 {
    logistic(-2.0 * phi * x)
}

/// Attitude drift `K(X) = tanh(φX)`.
pub fn drift(x: f64, phi: f64) -> f64 {
    (phi * x).tanh()
}

/// Attitude diffusion `Q(X) = (2/n)·[1 - tanh(φX)]`.
///
/// Strictly positive and bounded by `4/n`. Note the asymmetry in `x`: this
/// is the form the model prescribes, not the symmetric one mean-field
/// derivations usually produce.
pub fn diffusion(x: f64, phi: f64, n: u32) -> f64 {
    (2.0 / f64::from(n)) * (1.0 - (phi * x).tanh())
}

/// Excess demand of the interacting traders, `b·n·X` shares.
pub fn interacting_excess_demand(x: f64, b: f64, n: u32) -> f64 {
    b * f64::from(n) * x
}

/// Fundamentalist demand `a·m·(ln S* - ln S)`: buy below fundamental value,
/// sell above it.
pub fn fundamentalist_demand(ln_s: f64, ln_s_star: f64, a: f64, m: u32) -> f64 {
    a * f64::from(m) * (ln_s_star - ln_s)
}

/// Market-clearing log price `ln S = ln S* + λX`, the root of
/// `fundamentalist_demand + interacting_excess_demand = 0`.
pub fn clearing_log_price(ln_s_star: f64, x: f64, lambda: f64) -> f64 {
    ln_s_star + lambda * x
}

/// Classify the market by attitude sign, with a tolerance band around zero
/// (floating-point `x` is almost never exactly 0).
pub fn market_regime(x: f64, eps: f64) -> MarketRegime {
    if x.abs() <= eps {
        MarketRegime::Fair
    } else if x > 0.0 {
        MarketRegime::Bull
    } else {
        MarketRegime::Bear
    }
}

/// Shares traded in a day, `V = b·n·(1+|X|)/2`.
///
/// Rejects `|x| > 1`, which can only mean boundary handling failed upstream.
pub fn trading_volume(x: f64, b: f64, n: u32) -> Result<f64, ParamError> {
    if x.is_nan() || x.abs() > 1.0 {
        return Err(ParamError::AttitudeOutOfRange(x));
    }
    Ok(b * f64::from(n) * (1.0 + x.abs()) / 2.0)
}
