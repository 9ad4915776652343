//! The bifurcation solver: synchronous time-stepped evolution of a coupled
//! oscillator network under ballistic or discrete (sign-coupled) dynamics,
//! with optional momentum heating, multi-restart orchestration, and float or
//! fixed-point numeric backends.
//!
//! Each oscillator carries a position `x_i` and momentum `y_i`. One step
//! advances the pump `a` by `a0 / n_steps`, computes the coupling force
//! `f_i = sum_j J[i][j] * g(x_j)` against the previous step's snapshot
//! (`g = identity` for ballistic, `g = sign` for discrete), applies
//!
//! ```text
//! y~ = y + (-(a0 - a) x + c0 f) dt
//! x~ = x + a0 y~ dt
//! ```
//!
//! and then inelastic walls: coordinates with `|x~| > 1` are clamped to
//! `sign(x~)` with momentum reset to zero. Heated runs add
//! `gamma * y_old * dt` to the momentum after the wall, where `y_old` is the
//! momentum at the start of the step. Because every oscillator updates
//! against the snapshot, results are independent of update order; coupling
//! sums use a fixed blocked order, so results are also independent of thread
//! count.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::ParallelParams;
use crate::encoders::Encoding;
use crate::fixed::{
    derive_format, fixed_mac, mac_acc_bits, scale_to_integer_grid, validate_couplings,
    FixedFormat, FixedPointError,
};
use crate::ising::{IsingModel, ModelError, SpinVector};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("auto c0 needs at least 2 spins")]
    C0TooFewSpins,
    #[error("coupling matrix has zero variance; choose C0Policy::Fixed")]
    C0Degenerate,
    #[error("run is complete after {0} steps")]
    StepAfterEnd(u32),
    #[error("state does not match this runner's backend or size")]
    StateMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fixed(#[from] FixedPointError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Ballistic,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum C0Policy {
    /// `c0 = 1 / (2 sigma sqrt(n))` from the coupling statistics.
    Auto,
    Fixed(f64),
}

/// Numeric backend for the state evolution. Energies are always evaluated
/// in double precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Backend {
    Float64,
    Fixed(FixedBackendConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedBackendConfig {
    /// Explicit x/y word formats; `None` derives them from the problem.
    pub formats: Option<StateFormats>,
    /// Two's-complement width of the stored coupling coefficients.
    pub j_bits: u32,
    /// Rescale non-integer couplings onto the `j_bits` grid automatically.
    pub auto_scale_j: bool,
}

impl Default for FixedBackendConfig {
    fn default() -> Self {
        Self {
            formats: None,
            j_bits: 8,
            auto_scale_j: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateFormats {
    pub x: FixedFormat,
    pub y: FixedFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub variant: Variant,
    pub heated: bool,
    /// Integration step.
    pub dt: f64,
    /// Final pump amplitude.
    pub a0: f64,
    pub n_steps: u32,
    /// Momentum feedback strength; used only when `heated`.
    pub gamma: f64,
    pub c0_policy: C0Policy,
    pub seed: u64,
    pub n_runs: u32,
    /// Positions and momenta start uniform in `[-init_range, init_range] \ {0}`.
    pub init_range: f64,
    pub backend: Backend,
    /// Execution blocking: `pb` spin blocks are processed concurrently.
    pub parallel: Option<ParallelParams>,
    /// Record the per-step energy series and track the best step.
    pub record_trajectory: bool,
}

impl SolverConfig {
    /// Discrete (sign-coupled) defaults; `dt = 1.0` works best there.
    pub fn discrete() -> Self {
        Self {
            variant: Variant::Discrete,
            heated: false,
            dt: 1.0,
            a0: 1.0,
            n_steps: 1000,
            gamma: 0.0,
            c0_policy: C0Policy::Auto,
            seed: 1,
            n_runs: 1,
            init_range: 0.1,
            backend: Backend::Float64,
            parallel: None,
            record_trajectory: false,
        }
    }

    /// Ballistic defaults; `dt = 0.5` works best there.
    pub fn ballistic() -> Self {
        Self {
            variant: Variant::Ballistic,
            dt: 0.5,
            ..Self::discrete()
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::InvalidConfig(m.to_string()));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        if !(self.a0 > 0.0) || !self.a0.is_finite() {
            return bad("a0 must be positive");
        }
        if self.n_steps == 0 {
            return bad("n_steps must be at least 1");
        }
        if self.n_runs == 0 {
            return bad("n_runs must be at least 1");
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return bad("gamma must be non-negative");
        }
        if self.heated && self.gamma == 0.0 {
            return bad("heated runs need gamma > 0");
        }
        if !(self.init_range > 0.0 && self.init_range < 1.0) {
            return bad("init_range must lie in (0, 1)");
        }
        if let C0Policy::Fixed(v) = self.c0_policy {
            if !v.is_finite() || v < 0.0 {
                return bad("fixed c0 must be finite and non-negative");
            }
        }
        if let Some(p) = &self.parallel {
            if p.pb == 0 {
                return bad("parallel.pb must be at least 1");
            }
        }
        Ok(())
    }

    pub(crate) fn fixed_j_bits(&self) -> Option<u32> {
        match &self.backend {
            Backend::Fixed(f) => Some(f.j_bits),
            Backend::Float64 => None,
        }
    }

    fn blocks(&self) -> usize {
        self.parallel.as_ref().map_or(1, |p| p.pb as usize)
    }
}

/// Coupling scale that places the first bifurcation near the start of the
/// pump ramp: `c0 = 1 / (2 sigma sqrt(n))` with `sigma` the population
/// standard deviation of all off-diagonal couplings, zeros included.
pub fn compute_c0(model: &IsingModel) -> Result<f64, EngineError> {
    let n = model.n();
    if n < 2 {
        return Err(EngineError::C0TooFewSpins);
    }
    let count = (n * n - n) as f64;
    let mut sum = 0.0;
    for i in 0..n {
        for (k, v) in model.coupling_row(i).iter().enumerate() {
            if k != i {
                sum += v;
            }
        }
    }
    let mean = sum / count;
    let mut var = 0.0;
    for i in 0..n {
        for (k, v) in model.coupling_row(i).iter().enumerate() {
            if k != i {
                let d = v - mean;
                var += d * d;
            }
        }
    }
    let sigma = (var / count).sqrt();
    if sigma == 0.0 {
        return Err(EngineError::C0Degenerate);
    }
    Ok(1.0 / (2.0 * sigma * (n as f64).sqrt()))
}

/// Oscillator network state. Positions satisfy `|x_i| <= 1` after every
/// completed step; `sgn_prev` is the double-buffered sign snapshot consumed
/// by the next step's coupling force.
#[derive(Debug, Clone)]
pub struct OscillatorState {
    data: StateData,
    step: u32,
    sgn_prev: Vec<i8>,
    saturation_events: u64,
    saturation_steps: u64,
    scratch: Scratch,
}

#[derive(Debug, Clone)]
enum StateData {
    Float {
        x: Vec<f64>,
        y: Vec<f64>,
        a: f64,
    },
    Fixed {
        x: Vec<i64>,
        y: Vec<i64>,
        a: i64,
        fmts: StateFormats,
    },
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    gf: Vec<f64>,
    ff: Vec<f64>,
    fi: Vec<i64>,
    xi: Vec<i64>,
    sgn_next: Vec<i8>,
}

impl OscillatorState {
    pub fn n(&self) -> usize {
        self.sgn_prev.len()
    }

    pub fn step_count(&self) -> u32 {
        self.step
    }

    pub fn signs(&self) -> &[i8] {
        &self.sgn_prev
    }

    /// Positions as f64; exact for the fixed backend.
    pub fn positions(&self) -> Vec<f64> {
        match &self.data {
            StateData::Float { x, .. } => x.clone(),
            StateData::Fixed { x, fmts, .. } => x.iter().map(|&r| fmts.x.to_value(r)).collect(),
        }
    }

    pub fn momenta(&self) -> Vec<f64> {
        match &self.data {
            StateData::Float { y, .. } => y.clone(),
            StateData::Fixed { y, fmts, .. } => y.iter().map(|&r| fmts.y.to_value(r)).collect(),
        }
    }

    pub fn pump(&self) -> f64 {
        match &self.data {
            StateData::Float { a, .. } => *a,
            StateData::Fixed { a, fmts, .. } => fmts.x.to_value(*a),
        }
    }

    pub fn saturation_events(&self) -> u64 {
        self.saturation_events
    }

    pub fn saturation_steps(&self) -> u64 {
        self.saturation_steps
    }
}

/// One restart's outcome.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub best_spins: SpinVector,
    pub best_energy: f64,
    pub best_step: u32,
    pub run_index: u32,
    /// Per-step readout energy when trajectory recording is on.
    pub trajectory: Option<Vec<f64>>,
    pub saturation_events: u64,
    pub saturation_steps: u64,
    pub wall_time_s: f64,
}

/// Parameters the run actually used after quantization and coupling
/// rescaling; together with the config echo they reproduce a run
/// bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub c0: f64,
    pub dt: f64,
    pub a0: f64,
    pub delta_a: f64,
    pub formats: Option<StateFormats>,
    pub j_bits: Option<u32>,
    /// Coupling rescale factor applied for the fixed backend.
    pub j_scale: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub best: RunResult,
    pub all: Vec<RunResult>,
    pub effective: EffectiveParams,
}

fn sign8(v: f64) -> i8 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

fn sign8_raw(v: i64) -> i8 {
    if v < 0 {
        -1
    } else {
        1
    }
}

/// Integer coupling storage: byte rows when they fit, words otherwise.
/// Narrow rows keep the streamed working set small, which matters for the
/// blocked-parallel step.
#[derive(Debug, Clone)]
enum JStore {
    Bytes(Vec<i8>),
    Words(Vec<i32>),
}

/// Quantized constants and integer couplings for the fixed backend.
#[derive(Debug, Clone)]
struct FixedTables {
    j_int: JStore,
    acc_bits: u32,
    fmts: StateFormats,
    one_x: i64,
    c0_raw: i64,
    dt_raw: i64,
    a0_raw: i64,
    da_raw: i64,
    a0_dt_raw: i64,
    gamma_dt_raw: i64,
    inv_a0_raw: i64,
}

/// Coupling force for a contiguous row range, scaled by c0 into y format.
#[allow(clippy::too_many_arguments)]
fn fixed_force_rows<T: Copy + Into<i64>>(
    j: &[T],
    n: usize,
    rows: std::ops::Range<usize>,
    out: &mut [i64],
    sgn: &[i8],
    xprev: &[i64],
    variant: Variant,
    yf: FixedFormat,
    c0_raw: i64,
    acc_bits: u32,
) -> Result<u64, EngineError> {
    let mut sat = 0u64;
    for (k, i) in rows.enumerate() {
        let row = &j[i * n..(i + 1) * n];
        let q = match variant {
            Variant::Discrete => {
                let acc = fixed_mac(row, sgn, acc_bits)?;
                yf.saturate_i128(c0_raw as i128 * acc as i128)
            }
            Variant::Ballistic => {
                let mut acc: i128 = 0;
                for (&jv, &xv) in row.iter().zip(xprev) {
                    let jv: i64 = jv.into();
                    acc += jv as i128 * xv as i128;
                }
                let f = yf.saturate_i128(acc);
                sat += u64::from(f.saturated);
                yf.mul(c0_raw, f.raw)
            }
        };
        sat += u64::from(q.saturated);
        out[k] = q.raw;
    }
    Ok(sat)
}

/// A prepared solver for one model and configuration. Construction resolves
/// c0, embeds a nonzero field behind an ancilla spin, scales couplings for
/// the fixed backend, and quantizes run constants, so restarts share all
/// tables read-only.
pub struct SbRunner {
    /// Model the dynamics act on (field-free; possibly field-embedded).
    dyn_model: IsingModel,
    /// Model energies and reported spins refer to.
    report_model: IsingModel,
    report_n: usize,
    ancilla: Option<usize>,
    c0: f64,
    config: SolverConfig,
    tables: Option<FixedTables>,
    effective: EffectiveParams,
}

impl SbRunner {
    /// General entry point: models with a nonzero field are embedded into an
    /// enlarged coupling matrix with an ancilla spin pinned to +1, and
    /// results are reported against the original model.
    pub fn new(model: &IsingModel, config: &SolverConfig) -> Result<Self, EngineError> {
        if model.has_field() {
            let embedded = model.embed_field();
            let anc = Some(model.n());
            Self::build(embedded, anc, model.clone(), model.n(), config)
        } else {
            Self::build(model.clone(), None, model.clone(), model.n(), config)
        }
    }

    /// Runs an already field-free model, optionally pinning one spin as the
    /// ancilla. Results are reported over the full spin vector.
    pub fn with_ancilla(
        model: &IsingModel,
        ancilla: Option<usize>,
        config: &SolverConfig,
    ) -> Result<Self, EngineError> {
        if model.has_field() {
            return Err(EngineError::InvalidConfig(
                "with_ancilla expects a field-free model; call new() or embed_field() first"
                    .to_string(),
            ));
        }
        let n = model.n();
        Self::build(model.clone(), ancilla, model.clone(), n, config)
    }

    /// Runs an encoding, pinning its ancilla when present. Reported spin
    /// vectors cover the full encoded model so they can be decoded.
    pub fn for_encoding(enc: &Encoding, config: &SolverConfig) -> Result<Self, EngineError> {
        let n = enc.model.n();
        Self::build(
            enc.model.clone(),
            enc.ancilla_index(),
            enc.model.clone(),
            n,
            config,
        )
    }

    fn build(
        dyn_model: IsingModel,
        ancilla: Option<usize>,
        report_model: IsingModel,
        report_n: usize,
        config: &SolverConfig,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        debug_assert!(!dyn_model.has_field());

        match config.backend.clone() {
            Backend::Float64 => {
                let c0 = resolve_c0(&dyn_model, config.c0_policy)?;
                let delta_a = config.a0 / f64::from(config.n_steps);
                let effective = EffectiveParams {
                    c0,
                    dt: config.dt,
                    a0: config.a0,
                    delta_a,
                    formats: None,
                    j_bits: None,
                    j_scale: None,
                };
                Ok(Self {
                    dyn_model,
                    report_model,
                    report_n,
                    ancilla,
                    c0,
                    config: config.clone(),
                    tables: None,
                    effective,
                })
            }
            Backend::Fixed(fc) => {
                let (scaled, rho) = if fc.auto_scale_j {
                    scale_to_integer_grid(&dyn_model, fc.j_bits)?
                } else {
                    (dyn_model, 1.0)
                };
                // c0 lives on the scaled coupling grid.
                let adj_policy = match config.c0_policy {
                    C0Policy::Auto => C0Policy::Auto,
                    C0Policy::Fixed(v) => C0Policy::Fixed(v / rho),
                };
                let fmts = match fc.formats {
                    Some(f) => {
                        validate_couplings(&scaled, fc.j_bits)?;
                        f
                    }
                    None => {
                        let mut cfg_adj = config.clone();
                        cfg_adj.c0_policy = adj_policy;
                        let derived = derive_format(&scaled, &cfg_adj)?;
                        StateFormats {
                            x: derived.x,
                            y: derived.y,
                        }
                    }
                };
                if fmts.x.frac_bits() != fmts.y.frac_bits() {
                    return Err(EngineError::InvalidConfig(
                        "x and y formats must share frac_bits".to_string(),
                    ));
                }
                let c0_val = resolve_c0(&scaled, adj_policy)?;

                let n = scaled.n();
                let j_int = if fc.j_bits <= 8 {
                    JStore::Bytes(scaled.coupling().iter().map(|&v| v as i8).collect())
                } else {
                    JStore::Words(scaled.coupling().iter().map(|&v| v as i32).collect())
                };
                let yf = fmts.y;
                let xf = fmts.x;
                let c0_raw = yf.quantize(c0_val).raw;
                if c0_val > 0.0 && c0_raw == 0 {
                    return Err(FixedPointError::C0Underflow.into());
                }
                let delta_a = config.a0 / f64::from(config.n_steps);
                let da_raw = xf.quantize(delta_a).raw;
                if da_raw == 0 {
                    return Err(FixedPointError::PumpIncrementUnderflow.into());
                }
                let tables = FixedTables {
                    j_int,
                    acc_bits: mac_acc_bits(n, fc.j_bits),
                    fmts,
                    one_x: xf.quantize(1.0).raw,
                    c0_raw,
                    dt_raw: yf.quantize(config.dt).raw,
                    a0_raw: xf.quantize(config.a0).raw,
                    da_raw,
                    a0_dt_raw: xf.quantize(config.a0 * config.dt).raw,
                    gamma_dt_raw: yf.quantize(config.gamma * config.dt).raw,
                    inv_a0_raw: xf.quantize(1.0 / config.a0).raw,
                };
                let effective = EffectiveParams {
                    c0: yf.to_value(tables.c0_raw),
                    dt: yf.to_value(tables.dt_raw),
                    a0: xf.to_value(tables.a0_raw),
                    delta_a: xf.to_value(tables.da_raw),
                    formats: Some(fmts),
                    j_bits: Some(fc.j_bits),
                    j_scale: Some(rho),
                };
                Ok(Self {
                    dyn_model: scaled,
                    report_model,
                    report_n,
                    ancilla,
                    c0: effective.c0,
                    config: config.clone(),
                    tables: Some(tables),
                    effective,
                })
            }
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn effective(&self) -> &EffectiveParams {
        &self.effective
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn n(&self) -> usize {
        self.dyn_model.n()
    }

    /// Deterministic initial state for a restart: positions and momenta are
    /// drawn i.i.d. uniform from `[-init_range, init_range] \ {0}` on a
    /// counter-based stream keyed by `(seed, run_index)`.
    pub fn init_state(&self, run_index: u32) -> OscillatorState {
        let n = self.n();
        let r = self.config.init_range;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(u64::from(run_index) + 1);
        let draw = |rng: &mut ChaCha8Rng| loop {
            let v: f64 = rng.random_range(-r..=r);
            if v != 0.0 {
                return v;
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        self.state_from(x, y)
    }

    /// Builds a state from explicit positions and momenta (quantized on the
    /// fixed backend, with zero-rounded entries nudged to the smallest
    /// representable magnitude of the same sign).
    pub fn state_from(&self, x: Vec<f64>, y: Vec<f64>) -> OscillatorState {
        let n = self.n();
        assert_eq!(x.len(), n);
        assert_eq!(y.len(), n);
        let mut state = match &self.tables {
            None => OscillatorState {
                sgn_prev: x.iter().map(|&v| sign8(v)).collect(),
                data: StateData::Float { x, y, a: 0.0 },
                step: 0,
                saturation_events: 0,
                saturation_steps: 0,
                scratch: Scratch::default(),
            },
            Some(t) => {
                let q = |fmt: FixedFormat, v: f64| {
                    let raw = fmt.quantize(v).raw;
                    if raw == 0 && v != 0.0 {
                        if v < 0.0 {
                            -1
                        } else {
                            1
                        }
                    } else {
                        raw
                    }
                };
                let xr: Vec<i64> = x.iter().map(|&v| q(t.fmts.x, v)).collect();
                let yr: Vec<i64> = y.iter().map(|&v| q(t.fmts.y, v)).collect();
                OscillatorState {
                    sgn_prev: xr.iter().map(|&v| sign8_raw(v)).collect(),
                    data: StateData::Fixed {
                        x: xr,
                        y: yr,
                        a: 0,
                        fmts: t.fmts,
                    },
                    step: 0,
                    saturation_events: 0,
                    saturation_steps: 0,
                    scratch: Scratch::default(),
                }
            }
        };
        self.size_scratch(&mut state);
        self.pin_ancilla(&mut state);
        state
    }

    fn size_scratch(&self, state: &mut OscillatorState) {
        let n = self.n();
        let s = &mut state.scratch;
        s.sgn_next = vec![0; n];
        match (&state.data, self.config.variant) {
            (StateData::Float { .. }, _) => {
                s.ff = vec![0.0; n];
                s.gf = vec![0.0; n];
            }
            (StateData::Fixed { .. }, Variant::Discrete) => {
                s.fi = vec![0; n];
            }
            (StateData::Fixed { .. }, Variant::Ballistic) => {
                s.fi = vec![0; n];
                s.xi = vec![0; n];
            }
        }
    }

    /// The ancilla spin is not a free oscillator: the discrete variant pins
    /// it to +1 outright, the ballistic variant ramps its position with the
    /// pump (`min(1, a/a0)`) so the coupling and field contributions grow
    /// together.
    fn pin_ancilla(&self, state: &mut OscillatorState) {
        let Some(anc) = self.ancilla else { return };
        match &mut state.data {
            StateData::Float { x, y, a } => {
                x[anc] = match self.config.variant {
                    Variant::Discrete => 1.0,
                    Variant::Ballistic => (*a / self.config.a0).min(1.0),
                };
                y[anc] = 0.0;
            }
            StateData::Fixed { x, y, a, .. } => {
                let t = self.tables.as_ref().unwrap();
                x[anc] = match self.config.variant {
                    Variant::Discrete => t.one_x,
                    Variant::Ballistic => t.fmts.x.mul(*a, t.inv_a0_raw).raw.min(t.one_x),
                };
                y[anc] = 0;
            }
        }
        state.sgn_prev[anc] = 1;
    }

    /// Advances the state by one synchronous step.
    pub fn step(&self, state: &mut OscillatorState) -> Result<(), EngineError> {
        if state.step >= self.config.n_steps {
            return Err(EngineError::StepAfterEnd(state.step));
        }
        if state.n() != self.n() {
            return Err(EngineError::StateMismatch);
        }
        match (&self.tables, &state.data) {
            (None, StateData::Float { .. }) => self.step_float(state),
            (Some(_), StateData::Fixed { .. }) => self.step_fixed(state)?,
            _ => return Err(EngineError::StateMismatch),
        }
        state.step += 1;
        Ok(())
    }

    fn step_float(&self, state: &mut OscillatorState) {
        let n = self.n();
        let cfg = &self.config;
        let j = self.dyn_model.coupling();
        let pb = cfg.blocks();
        let c0 = self.c0;
        let dt = cfg.dt;
        let a0 = cfg.a0;
        let a0_dt = a0 * dt;
        let gamma_dt = cfg.gamma * dt;
        let heated = cfg.heated;

        let scratch = &mut state.scratch;
        let StateData::Float { x, y, a } = &mut state.data else {
            unreachable!()
        };

        *a += a0 / f64::from(cfg.n_steps);
        let coef = a0 - *a;

        // snapshot consumed by the coupling force
        match cfg.variant {
            Variant::Discrete => {
                for (g, s) in scratch.gf.iter_mut().zip(&state.sgn_prev) {
                    *g = f64::from(*s);
                }
            }
            Variant::Ballistic => scratch.gf.copy_from_slice(x),
        }

        let g = &scratch.gf;
        let chunk = n.div_ceil(pb);
        if pb <= 1 {
            for (i, f) in scratch.ff.iter_mut().enumerate() {
                *f = dot_blocked(&j[i * n..(i + 1) * n], g);
            }
        } else {
            scratch
                .ff
                .par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(ci, fs)| {
                    let base = ci * chunk;
                    for (k, f) in fs.iter_mut().enumerate() {
                        let i = base + k;
                        *f = dot_blocked(&j[i * n..(i + 1) * n], g);
                    }
                });
        }

        for i in 0..n {
            let y_old = y[i];
            let yt = y[i] + (c0 * scratch.ff[i] - coef * x[i]) * dt;
            let xt = x[i] + a0_dt * yt;
            if xt.abs() <= 1.0 {
                x[i] = xt;
                y[i] = yt;
            } else {
                x[i] = if xt < 0.0 { -1.0 } else { 1.0 };
                y[i] = 0.0;
            }
            if heated {
                y[i] += gamma_dt * y_old;
            }
            scratch.sgn_next[i] = sign8(x[i]);
        }

        if let Some(anc) = self.ancilla {
            x[anc] = match cfg.variant {
                Variant::Discrete => 1.0,
                Variant::Ballistic => (*a / a0).min(1.0),
            };
            y[anc] = 0.0;
            scratch.sgn_next[anc] = 1;
        }

        std::mem::swap(&mut state.sgn_prev, &mut scratch.sgn_next);
    }

    fn step_fixed(&self, state: &mut OscillatorState) -> Result<(), EngineError> {
        let n = self.n();
        let cfg = &self.config;
        let t = self.tables.as_ref().unwrap();
        let pb = cfg.blocks();
        let xf = t.fmts.x;
        let yf = t.fmts.y;
        let heated = cfg.heated;

        let scratch = &mut state.scratch;
        let StateData::Fixed { x, y, a, .. } = &mut state.data else {
            unreachable!()
        };

        let mut sat: u64 = 0;

        let qa = xf.add(*a, t.da_raw);
        sat += u64::from(qa.saturated);
        *a = qa.raw;
        let coef = {
            let q = xf.add(t.a0_raw, -*a);
            sat += u64::from(q.saturated);
            q.raw
        };

        // Coupling force scaled by c0, stored at y precision. The row sums
        // themselves are exact integer accumulations.
        let chunk = n.div_ceil(pb);
        let mm = |rows: std::ops::Range<usize>,
                  out: &mut [i64],
                  sgn: &[i8],
                  xprev: &[i64]|
         -> Result<u64, EngineError> {
            match &t.j_int {
                JStore::Bytes(j) => fixed_force_rows(
                    j, n, rows, out, sgn, xprev, cfg.variant, yf, t.c0_raw, t.acc_bits,
                ),
                JStore::Words(j) => fixed_force_rows(
                    j, n, rows, out, sgn, xprev, cfg.variant, yf, t.c0_raw, t.acc_bits,
                ),
            }
        };

        if matches!(cfg.variant, Variant::Ballistic) {
            scratch.xi.copy_from_slice(x);
        }
        if pb <= 1 {
            sat += mm(0..n, &mut scratch.fi, &state.sgn_prev, &scratch.xi)?;
        } else {
            let sgn = &state.sgn_prev;
            let xprev = &scratch.xi;
            let sats: Result<Vec<u64>, EngineError> = scratch
                .fi
                .par_chunks_mut(chunk)
                .enumerate()
                .map(|(ci, out)| {
                    let base = ci * chunk;
                    mm(base..base + out.len(), out, sgn, xprev)
                })
                .collect();
            sat += sats?.iter().sum::<u64>();
        }

        for i in 0..n {
            let y_old = y[i];
            // y~ = y + (c0 f - (a0 - a) x) dt
            let t1 = yf.mul(coef, x[i]);
            let inner = yf.add(scratch.fi[i], -t1.raw);
            let dy = yf.mul(inner.raw, t.dt_raw);
            let yt = yf.add(y[i], dy.raw);
            // x~ = x + (a0 dt) y~
            let dx = xf.mul(t.a0_dt_raw, yt.raw);
            let xt = xf.add(x[i], dx.raw);
            sat += u64::from(t1.saturated)
                + u64::from(inner.saturated)
                + u64::from(dy.saturated)
                + u64::from(yt.saturated)
                + u64::from(dx.saturated)
                + u64::from(xt.saturated);

            if xt.raw.abs() <= t.one_x {
                x[i] = xt.raw;
                y[i] = yt.raw;
            } else {
                x[i] = if xt.raw < 0 { -t.one_x } else { t.one_x };
                y[i] = 0;
            }
            if heated {
                let heat = yf.mul(t.gamma_dt_raw, y_old);
                let q = yf.add(y[i], heat.raw);
                sat += u64::from(heat.saturated) + u64::from(q.saturated);
                y[i] = q.raw;
            }
            scratch.sgn_next[i] = sign8_raw(x[i]);
        }

        if let Some(anc) = self.ancilla {
            x[anc] = match cfg.variant {
                Variant::Discrete => t.one_x,
                Variant::Ballistic => xf.mul(*a, t.inv_a0_raw).raw.min(t.one_x),
            };
            y[anc] = 0;
            scratch.sgn_next[anc] = 1;
        }

        std::mem::swap(&mut state.sgn_prev, &mut scratch.sgn_next);
        state.saturation_events += sat;
        state.saturation_steps += u64::from(sat > 0);
        Ok(())
    }

    /// Spins reported for the current state: sign readout of the positions,
    /// truncated to the original model when a field was embedded.
    pub fn readout(&self, state: &OscillatorState) -> SpinVector {
        SpinVector::new(state.sgn_prev[..self.report_n].to_vec()).unwrap()
    }

    /// Model that reported energies refer to.
    pub fn report_model(&self) -> &IsingModel {
        &self.report_model
    }

    /// Executes one full restart.
    pub fn run(&self, run_index: u32) -> Result<RunResult, EngineError> {
        let started = Instant::now();
        let mut state = self.init_state(run_index);
        let mut trajectory = self
            .config
            .record_trajectory
            .then(|| Vec::with_capacity(self.config.n_steps as usize));
        let mut best: Option<(f64, SpinVector, u32)> = None;

        for _ in 0..self.config.n_steps {
            self.step(&mut state)?;
            if let Some(traj) = trajectory.as_mut() {
                let spins = self.readout(&state);
                let energy = self.report_model.energy(&spins)?;
                traj.push(energy);
                if best.as_ref().is_none_or(|(be, _, _)| energy < *be) {
                    best = Some((energy, spins, state.step));
                }
            }
        }

        let (best_energy, best_spins, best_step) = match best {
            Some(b) => b,
            None => {
                let spins = self.readout(&state);
                let energy = self.report_model.energy(&spins)?;
                (energy, spins, state.step)
            }
        };

        Ok(RunResult {
            best_spins,
            best_energy,
            best_step,
            run_index,
            trajectory,
            saturation_events: state.saturation_events,
            saturation_steps: state.saturation_steps,
            wall_time_s: started.elapsed().as_secs_f64(),
        })
    }

    /// Executes all restarts and returns the lowest-energy run (ties broken
    /// by run index). Deterministic for a fixed (seed, config) at any thread
    /// count.
    pub fn solve(&self) -> Result<SolveOutput, EngineError> {
        let all: Vec<RunResult> = (0..self.config.n_runs)
            .into_par_iter()
            .map(|r| self.run(r))
            .collect::<Result<_, _>>()?;
        let best = all
            .iter()
            .min_by(|a, b| {
                a.best_energy
                    .total_cmp(&b.best_energy)
                    .then(a.run_index.cmp(&b.run_index))
            })
            .expect("n_runs >= 1")
            .clone();
        Ok(SolveOutput {
            best,
            all,
            effective: self.effective.clone(),
        })
    }
}

fn resolve_c0(model: &IsingModel, policy: C0Policy) -> Result<f64, EngineError> {
    match policy {
        C0Policy::Auto => compute_c0(model),
        C0Policy::Fixed(v) => Ok(v),
    }
}

/// Dot product with a fixed 4-lane blocked order: deterministic across
/// thread counts and amenable to vectorization.
fn dot_blocked(row: &[f64], g: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut rc = row.chunks_exact(4);
    let mut gc = g.chunks_exact(4);
    for (r, gv) in (&mut rc).zip(&mut gc) {
        acc[0] += r[0] * gv[0];
        acc[1] += r[1] * gv[1];
        acc[2] += r[2] * gv[2];
        acc[3] += r[3] * gv[3];
    }
    let mut tail = 0.0;
    for (r, gv) in rc.remainder().iter().zip(gc.remainder()) {
        tail += r * gv;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

/// Solves a model with restarts; nonzero fields are embedded automatically.
pub fn solve(model: &IsingModel, config: &SolverConfig) -> Result<SolveOutput, EngineError> {
    SbRunner::new(model, config)?.solve()
}

/// Solves an encoded problem, honoring its ancilla tag.
pub fn solve_encoding(enc: &Encoding, config: &SolverConfig) -> Result<SolveOutput, EngineError> {
    SbRunner::for_encoding(enc, config)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::brute_force_ground_state;

    fn dyadic_model(n: usize, seed: u64) -> IsingModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut j = vec![0.0; n * n];
        for i in 0..n {
            for k in (i + 1)..n {
                let v = f64::from(rng.random_range(-32..=32i32)) / 16.0;
                j[i * n + k] = v;
                j[k * n + i] = v;
            }
        }
        IsingModel::new(n, j, vec![0.0; n], 0.0).unwrap()
    }

    #[test]
    fn c0_balanced_pm_one_couplings() {
        let j = vec![
            0.0, 1.0, -1.0, 1.0, //
            1.0, 0.0, -1.0, 1.0, //
            -1.0, -1.0, 0.0, -1.0, //
            1.0, 1.0, -1.0, 0.0,
        ];
        let m = IsingModel::new(4, j, vec![0.0; 4], 0.0).unwrap();
        assert_eq!(compute_c0(&m).unwrap(), 0.25);
    }

    #[test]
    fn c0_formula_direct() {
        // sigma = 0.5 on 16 spins -> c0 = 1 / (2 * 0.5 * 4) = 0.25
        let n = 16;
        let mut j = vec![0.0; n * n];
        for i in 0..n {
            for k in (i + 1)..n {
                let v = if (i + k) % 2 == 0 { 0.5 } else { -0.5 };
                j[i * n + k] = v;
                j[k * n + i] = v;
            }
        }
        let m = IsingModel::new(n, j, vec![0.0; n], 0.0).unwrap();
        // entries are +-0.5 but their mean is not exactly zero; check against
        // an independent two-pass computation instead of the closed form.
        let c0 = compute_c0(&m).unwrap();
        let vals: Vec<f64> = (0..n)
            .flat_map(|i| (0..n).filter(move |&k| k != i).map(move |k| (i, k)))
            .map(|(i, k)| m.coupling_at(i, k))
            .collect();
        let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
        let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        let expect = 1.0 / (2.0 * var.sqrt() * (n as f64).sqrt());
        assert!((c0 - expect).abs() <= 1e-12);
    }

    #[test]
    fn c0_rejects_degenerate_and_tiny() {
        assert!(matches!(
            compute_c0(&IsingModel::zero(4)),
            Err(EngineError::C0Degenerate)
        ));
        assert!(matches!(
            compute_c0(&IsingModel::zero(1)),
            Err(EngineError::C0TooFewSpins)
        ));
    }

    #[test]
    fn init_state_is_deterministic_per_run_index() {
        let m = dyadic_model(16, 1);
        let runner = SbRunner::new(&m, &SolverConfig::discrete()).unwrap();
        let a = runner.init_state(3);
        let b = runner.init_state(3);
        assert_eq!(a.positions(), b.positions());
        assert_eq!(a.momenta(), b.momenta());
    }

    #[test]
    fn init_state_differs_across_run_indices() {
        let m = dyadic_model(16, 1);
        let runner = SbRunner::new(&m, &SolverConfig::discrete()).unwrap();
        let base = runner.init_state(0).positions();
        let mut distinct = 0;
        for r in 1..=64 {
            if runner.init_state(r).positions() != base {
                distinct += 1;
            }
        }
        assert_eq!(distinct, 64);
    }

    #[test]
    fn init_state_range_and_nonzero() {
        let m = dyadic_model(32, 5);
        let cfg = SolverConfig::discrete();
        let runner = SbRunner::new(&m, &cfg).unwrap();
        for r in 0..8 {
            let st = runner.init_state(r);
            for v in st.positions().into_iter().chain(st.momenta()) {
                assert!(v != 0.0);
                assert!(v.abs() <= cfg.init_range);
            }
            assert_eq!(st.pump(), 0.0);
            assert_eq!(st.step_count(), 0);
        }
    }

    #[test]
    fn single_oscillator_origin_is_fixed_point() {
        let m = IsingModel::zero(1);
        let mut cfg = SolverConfig::ballistic();
        cfg.c0_policy = C0Policy::Fixed(1.0);
        cfg.n_steps = 50;
        let runner = SbRunner::new(&m, &cfg).unwrap();
        let mut st = runner.state_from(vec![0.0], vec![0.0]);
        for _ in 0..50 {
            runner.step(&mut st).unwrap();
            assert_eq!(st.positions()[0], 0.0);
            assert_eq!(st.momenta()[0], 0.0);
        }
        assert!(matches!(
            runner.step(&mut st),
            Err(EngineError::StepAfterEnd(50))
        ));
    }

    #[test]
    fn wall_clamps_position_and_resets_momentum() {
        let m = IsingModel::zero(2);
        let mut cfg = SolverConfig::ballistic();
        cfg.c0_policy = C0Policy::Fixed(0.0);
        cfg.dt = 1.0;
        cfg.n_steps = 1;
        let runner = SbRunner::new(&m, &cfg).unwrap();
        // after the pump advance a = a0, so coef = 0 and y~ = y:
        // x~ = 0.5 + 1.0 * 1.0 = 1.5 -> clamp
        let mut st = runner.state_from(vec![0.5, -0.5], vec![1.0, -1.0]);
        runner.step(&mut st).unwrap();
        assert_eq!(st.positions(), vec![1.0, -1.0]);
        assert_eq!(st.momenta(), vec![0.0, 0.0]);
    }

    #[test]
    fn two_spin_antiferromagnet_discrete_ground_state() {
        let m = IsingModel::new(2, vec![0.0, -1.0, -1.0, 0.0], vec![0.0; 2], 0.0).unwrap();
        let mut cfg = SolverConfig::discrete();
        cfg.n_steps = 1000;
        cfg.c0_policy = C0Policy::Fixed(0.5);
        let out = solve(&m, &cfg).unwrap();
        let s = out.best.best_spins;
        assert_eq!(s[0], -s[1]);
        let gs = brute_force_ground_state(&m).unwrap();
        assert_eq!(out.best.best_energy, gs.energy);
    }

    #[test]
    fn pump_schedule_linear_to_a0() {
        let m = dyadic_model(8, 2);
        let mut cfg = SolverConfig::discrete();
        cfg.n_steps = 640;
        let runner = SbRunner::new(&m, &cfg).unwrap();
        let mut st = runner.init_state(0);
        for k in 1..=640u32 {
            runner.step(&mut st).unwrap();
            let expect = f64::from(k) * cfg.a0 / 640.0;
            assert!((st.pump() - expect).abs() <= f64::from(k) * f64::EPSILON);
        }
        assert!((st.pump() - cfg.a0).abs() <= 640.0 * f64::EPSILON);
    }

    #[test]
    fn pump_schedule_exact_on_fixed_backend() {
        let m = dyadic_model(8, 2);
        let mut cfg = SolverConfig::discrete();
        cfg.n_steps = 1024;
        cfg.backend = Backend::Fixed(FixedBackendConfig::default());
        let runner = SbRunner::new(&m, &cfg).unwrap();
        let da = runner.effective().delta_a;
        let mut st = runner.init_state(0);
        for k in 1..=1024u32 {
            runner.step(&mut st).unwrap();
            assert_eq!(st.pump(), f64::from(k) * da);
        }
    }

    #[test]
    fn positions_bounded_after_every_step() {
        for (label, cfg) in [
            ("bsb", SolverConfig::ballistic()),
            ("dsb", SolverConfig::discrete()),
        ] {
            let m = dyadic_model(12, 7);
            let mut cfg = cfg;
            cfg.n_steps = 300;
            let runner = SbRunner::new(&m, &cfg).unwrap();
            let mut st = runner.init_state(1);
            for _ in 0..300 {
                runner.step(&mut st).unwrap();
                for v in st.positions() {
                    assert!(v.abs() <= 1.0, "{label}: position {v} out of bounds");
                }
            }
        }
    }

    #[test]
    fn heated_wall_keeps_momentum_feedback() {
        let m = IsingModel::zero(1);
        let mut cfg = SolverConfig::ballistic();
        cfg.c0_policy = C0Policy::Fixed(0.0);
        cfg.heated = true;
        cfg.gamma = 0.5;
        cfg.dt = 1.0;
        cfg.n_steps = 1;
        let runner = SbRunner::new(&m, &cfg).unwrap();
        let mut st = runner.state_from(vec![0.5], vec![1.0]);
        runner.step(&mut st).unwrap();
        // wall hit: y reset to 0, then gamma * y_old * dt = 0.5 added
        assert_eq!(st.positions(), vec![1.0]);
        assert_eq!(st.momenta(), vec![0.5]);
    }

    #[test]
    fn discrete_force_reads_only_signs() {
        // magnitude perturbations with identical signs leave the discrete
        // coupling force unchanged
        let m = dyadic_model(8, 3);
        let mut cfg = SolverConfig::discrete();
        cfg.n_steps = 10;
        // small coupling scale keeps the step clear of the walls
        cfg.c0_policy = C0Policy::Fixed(0.01);
        let runner = SbRunner::new(&m, &cfg).unwrap();
        let x1: Vec<f64> = vec![0.05, -0.03, 0.09, -0.01, 0.02, -0.08, 0.04, -0.06];
        let x2: Vec<f64> = x1.iter().map(|v| v * 0.3).collect();
        let y = vec![0.0; 8];
        let st1 = runner.state_from(x1, y.clone());
        let st2 = runner.state_from(x2, y);
        assert_eq!(st1.signs(), st2.signs());
        // one step from equal momenta and signs yields identical momenta
        // deltas only if the force ignores magnitudes; positions differ.
        let mut a = st1.clone();
        let mut b = st2.clone();
        runner.step(&mut a).unwrap();
        runner.step(&mut b).unwrap();
        let (da, db): (Vec<f64>, Vec<f64>) = (a.momenta(), b.momenta());
        // x contributes via -(a0-a) x dt, so subtract that part out
        let coef = cfg.a0 - cfg.a0 / f64::from(cfg.n_steps);
        for i in 0..8 {
            let fa = da[i] + coef * st1.positions()[i] * cfg.dt;
            let fb = db[i] + coef * st2.positions()[i] * cfg.dt;
            assert!((fa - fb).abs() < 1e-15);
        }
    }

    #[test]
    fn trajectory_records_every_step_and_best() {
        let m = dyadic_model(10, 11);
        let mut cfg = SolverConfig::discrete();
        cfg.n_steps = 200;
        cfg.record_trajectory = true;
        let out = solve(&m, &cfg).unwrap();
        let traj = out.best.trajectory.as_ref().unwrap();
        assert_eq!(traj.len(), 200);
        let min = traj.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(out.best.best_energy, min);
        assert_eq!(
            traj[(out.best.best_step - 1) as usize],
            out.best.best_energy
        );
    }

    #[test]
    fn solve_single_run_returns_it_as_best() {
        let m = dyadic_model(6, 13);
        let mut cfg = SolverConfig::discrete();
        cfg.n_steps = 100;
        cfg.n_runs = 1;
        let out = solve(&m, &cfg).unwrap();
        assert_eq!(out.all.len(), 1);
        assert_eq!(out.best.best_energy, out.all[0].best_energy);
        assert_eq!(
            out.best.best_energy,
            m.energy(&out.best.best_spins).unwrap()
        );
    }

    #[test]
    fn eight_spin_dense_finds_ground_state() {
        let m = dyadic_model(8, 17);
        let mut cfg = SolverConfig::discrete();
        cfg.n_steps = 2000;
        cfg.n_runs = 100;
        let out = solve(&m, &cfg).unwrap();
        let gs = brute_force_ground_state(&m).unwrap();
        assert_eq!(out.best.best_energy, gs.energy);
    }

    #[test]
    fn field_embedding_reports_original_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 6;
        let mut j = vec![0.0; n * n];
        for i in 0..n {
            for k in (i + 1)..n {
                let v = f64::from(rng.random_range(-16..=16i32)) / 8.0;
                j[i * n + k] = v;
                j[k * n + i] = v;
            }
        }
        let h: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(-8..=8i32)) / 8.0)
            .collect();
        let m = IsingModel::new(n, j, h, 0.0).unwrap();
        let mut cfg = SolverConfig::discrete();
        cfg.n_steps = 2000;
        cfg.n_runs = 50;
        let out = solve(&m, &cfg).unwrap();
        assert_eq!(out.best.best_spins.len(), n);
        let gs = brute_force_ground_state(&m).unwrap();
        assert_eq!(out.best.best_energy, gs.energy);
    }

    #[test]
    fn equivariance_under_spin_permutation_discrete() {
        // integer couplings make the blocked dot exact, so the permuted
        // trajectory is bit-identical
        let n = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut j = vec![0.0; n * n];
        for i in 0..n {
            for k in (i + 1)..n {
                let v = f64::from(rng.random_range(-8..=8i32));
                j[i * n + k] = v;
                j[k * n + i] = v;
            }
        }
        let m = IsingModel::new(n, j, vec![0.0; n], 0.0).unwrap();
        let perm: Vec<usize> = vec![5, 2, 7, 1, 0, 6, 3, 4];
        let mut pj = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                pj[perm[i] * n + perm[k]] = m.coupling_at(i, k);
            }
        }
        let pm = IsingModel::new(n, pj, vec![0.0; n], 0.0).unwrap();

        let mut cfg = SolverConfig::discrete();
        cfg.n_steps = 400;
        let ra = SbRunner::new(&m, &cfg).unwrap();
        let rb = SbRunner::new(&pm, &cfg).unwrap();

        let x0: Vec<f64> = (0..n).map(|i| 0.01 + 0.01 * i as f64).collect();
        let y0: Vec<f64> = (0..n).map(|i| -0.02 + 0.005 * i as f64).collect();
        let mut px0 = vec![0.0; n];
        let mut py0 = vec![0.0; n];
        for i in 0..n {
            px0[perm[i]] = x0[i];
            py0[perm[i]] = y0[i];
        }
        let mut sa = ra.state_from(x0, y0);
        let mut sb = rb.state_from(px0, py0);
        for _ in 0..400 {
            ra.step(&mut sa).unwrap();
            rb.step(&mut sb).unwrap();
            let xa = sa.positions();
            let xb = sb.positions();
            for i in 0..n {
                assert_eq!(xa[i], xb[perm[i]]);
            }
        }
    }

    #[test]
    fn blocked_execution_is_bit_identical() {
        let m = dyadic_model(32, 31);
        let mut base = SolverConfig::discrete();
        base.n_steps = 300;
        base.n_runs = 4;
        let out1 = solve(&m, &base).unwrap();
        let mut blocked = base.clone();
        blocked.parallel = Some(ParallelParams::new(1, 1, 4).unwrap());
        let out4 = solve(&m, &blocked).unwrap();
        for (a, b) in out1.all.iter().zip(&out4.all) {
            assert_eq!(a.best_energy, b.best_energy);
            assert_eq!(a.best_spins, b.best_spins);
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let m = dyadic_model(24, 37);
        let mut cfg = SolverConfig::discrete();
        cfg.n_steps = 200;
        cfg.n_runs = 8;
        cfg.backend = Backend::Fixed(FixedBackendConfig {
            j_bits: 8,
            ..Default::default()
        });

        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| solve(&m, &cfg).unwrap())
        };
        let a = run_with(1);
        let b = run_with(8);
        assert_eq!(a.best.best_spins, b.best.best_spins);
        for (ra, rb) in a.all.iter().zip(&b.all) {
            assert_eq!(ra.best_energy, rb.best_energy);
            assert_eq!(ra.saturation_events, rb.saturation_events);
        }
    }

    #[test]
    fn fixed_backend_converges_to_float_with_wide_words() {
        // integer couplings and a dyadic c0 leave x/y quantization as the
        // only difference between the backends; the coupling scale keeps
        // the walls active so quantization drift is reset rather than
        // sheared up by the late, nearly-free dynamics
        let n = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let mut j = vec![0.0; n * n];
        for i in 0..n {
            for k in (i + 1)..n {
                let v = f64::from(rng.random_range(-8..=8i32));
                j[i * n + k] = v;
                j[k * n + i] = v;
            }
        }
        let m = IsingModel::new(n, j, vec![0.0; n], 0.0).unwrap();
        let mut cfg = SolverConfig::discrete();
        cfg.n_steps = 100;
        cfg.c0_policy = C0Policy::Fixed(0.125);
        let float_runner = SbRunner::new(&m, &cfg).unwrap();

        let frac = 30;
        let fmt = FixedFormat::new(1 + 12 + frac, frac).unwrap();
        let mut fcfg = cfg.clone();
        fcfg.backend = Backend::Fixed(FixedBackendConfig {
            formats: Some(StateFormats { x: fmt, y: fmt }),
            j_bits: 8,
            auto_scale_j: true,
        });
        let fixed_runner = SbRunner::new(&m, &fcfg).unwrap();

        let mut sf = float_runner.init_state(0);
        let mut sx = fixed_runner.init_state(0);
        let bound = 8.0 * (2.0f64).powi(-(frac as i32) + 2);
        for _ in 0..100 {
            float_runner.step(&mut sf).unwrap();
            fixed_runner.step(&mut sx).unwrap();
            let xf = sf.positions();
            let xx = sx.positions();
            let max_diff = xf
                .iter()
                .zip(&xx)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(max_diff <= bound, "diverged: {max_diff} > {bound}");
        }
    }

    #[test]
    fn fixed_rejects_underflowing_pump() {
        let m = dyadic_model(8, 43);
        let mut cfg = SolverConfig::discrete();
        cfg.n_steps = 1 << 20;
        let fmt = FixedFormat::new(16, 8).unwrap();
        cfg.backend = Backend::Fixed(FixedBackendConfig {
            formats: Some(StateFormats { x: fmt, y: fmt }),
            j_bits: 8,
            auto_scale_j: true,
        });
        assert!(matches!(
            SbRunner::new(&m, &cfg),
            Err(EngineError::Fixed(FixedPointError::PumpIncrementUnderflow))
        ));
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let m = dyadic_model(4, 47);
        let cases: Vec<Box<dyn Fn(&mut SolverConfig)>> = vec![
            Box::new(|c| c.dt = 0.0),
            Box::new(|c| c.a0 = -1.0),
            Box::new(|c| c.n_steps = 0),
            Box::new(|c| c.n_runs = 0),
            Box::new(|c| c.gamma = -0.1),
            Box::new(|c| {
                c.heated = true;
                c.gamma = 0.0;
            }),
            Box::new(|c| c.init_range = 0.0),
            Box::new(|c| c.init_range = 1.0),
        ];
        for mutate in cases {
            let mut cfg = SolverConfig::discrete();
            mutate(&mut cfg);
            assert!(matches!(
                SbRunner::new(&m, &cfg),
                Err(EngineError::InvalidConfig(_))
            ));
        }
    }
}
