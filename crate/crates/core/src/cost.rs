//! Analytic cycle-count model for unrolled matrix-vector kernels.
//!
//! One algorithm step is a matrix-vector multiply (MM) feeding a per-spin
//! time-evolution update (TE). The model covers:
//!
//! - `Sequential`: one coupling element per cycle, `n^2 + n` cycles/step.
//! - `UnrolledCols`: `pc` row elements per cycle, `n (n/pc + 1)`.
//! - `UnrolledRows`: `pr` rows concurrently, `n (n/(pc pr) + 1)`.
//! - `Blocked`: the matrix split into `pb` blocks with one MM+TE unit each,
//!   `(n/pb) (n/(pc pr) + 1)`.
//! - `Pipelined`: TE overlapped with MM, `(n/pb) (n/(pc pr) + 1/pc)`;
//!   full overlap needs `n/pc >= pr`.
//!
//! Counts are exact rationals; total execution time scales them by
//! `n_steps * t_ck`.

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CostError {
    #[error("parallel factors must be at least 1")]
    ZeroFactor,
    #[error("pc = {pc} must divide n_spin = {n}")]
    ColumnsDontDivide { pc: u32, n: u64 },
    #[error("pr * pb = {prpb} must divide n_spin = {n}")]
    RowsBlocksDontDivide { prpb: u64, n: u64 },
    #[error("clock period must be positive")]
    BadClock,
}

/// Row (`pr`), column (`pc`) and block (`pb`) unrolling factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelParams {
    pub pr: u32,
    pub pc: u32,
    pub pb: u32,
}

impl ParallelParams {
    pub fn new(pr: u32, pc: u32, pb: u32) -> Result<Self, CostError> {
        if pr == 0 || pc == 0 || pb == 0 {
            return Err(CostError::ZeroFactor);
        }
        Ok(Self { pr, pc, pb })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMode {
    Sequential,
    UnrolledCols,
    UnrolledRows,
    Blocked,
    Pipelined,
}

fn check_divisibility(n: u64, p: ParallelParams, mode: KernelMode) -> Result<(), CostError> {
    let needs_pc = !matches!(mode, KernelMode::Sequential);
    let needs_rows = matches!(
        mode,
        KernelMode::UnrolledRows | KernelMode::Blocked | KernelMode::Pipelined
    );
    if needs_pc && n % u64::from(p.pc) != 0 {
        return Err(CostError::ColumnsDontDivide { pc: p.pc, n });
    }
    if needs_rows {
        let prpb = match mode {
            KernelMode::UnrolledRows => u64::from(p.pr),
            _ => u64::from(p.pr) * u64::from(p.pb),
        };
        if n % prpb != 0 {
            return Err(CostError::RowsBlocksDontDivide { prpb, n });
        }
    }
    Ok(())
}

/// Exact clock cycles per algorithm step for the chosen kernel.
pub fn cycles_per_step(
    n_spin: u64,
    p: ParallelParams,
    mode: KernelMode,
) -> Result<Ratio<u64>, CostError> {
    if p.pr == 0 || p.pc == 0 || p.pb == 0 {
        return Err(CostError::ZeroFactor);
    }
    check_divisibility(n_spin, p, mode)?;
    let n = Ratio::from_integer(n_spin);
    let pr = Ratio::from_integer(u64::from(p.pr));
    let pc = Ratio::from_integer(u64::from(p.pc));
    let pb = Ratio::from_integer(u64::from(p.pb));
    let one = Ratio::from_integer(1);
    Ok(match mode {
        KernelMode::Sequential => n * n + n,
        KernelMode::UnrolledCols => n * (n / pc + one),
        KernelMode::UnrolledRows => n * (n / (pc * pr) + one),
        KernelMode::Blocked => (n / pb) * (n / (pc * pr) + one),
        KernelMode::Pipelined => (n / pb) * (n / (pc * pr) + one / pc),
    })
}

/// Exploratory variant with ceiling division instead of the divisibility
/// requirement; an extension beyond the exact-divisor operating points.
pub fn cycles_per_step_ceil(n_spin: u64, p: ParallelParams, mode: KernelMode) -> Ratio<u64> {
    let div_ceil = |a: u64, b: u64| Ratio::from_integer(a.div_ceil(b));
    let n = Ratio::from_integer(n_spin);
    let one = Ratio::from_integer(1);
    let pc = u64::from(p.pc);
    let prpc = u64::from(p.pr) * pc;
    let n_over_pb = div_ceil(n_spin, u64::from(p.pb));
    match mode {
        KernelMode::Sequential => n * n + n,
        KernelMode::UnrolledCols => n * (div_ceil(n_spin, pc) + one),
        KernelMode::UnrolledRows => n * (div_ceil(n_spin, prpc) + one),
        KernelMode::Blocked => n_over_pb * (div_ceil(n_spin, prpc) + one),
        KernelMode::Pipelined => {
            n_over_pb * (div_ceil(n_spin, prpc) + one / Ratio::from_integer(pc))
        }
    }
}

/// MM and TE can fully overlap when a block produces its `pr` results no
/// faster than TE consumes them: `n_spin / pc >= pr`.
pub fn overlap_feasible(n_spin: u64, pc: u32, pr: u32) -> Result<bool, CostError> {
    if pc == 0 || pr == 0 {
        return Err(CostError::ZeroFactor);
    }
    if n_spin % u64::from(pc) != 0 {
        return Err(CostError::ColumnsDontDivide { pc, n: n_spin });
    }
    Ok(n_spin / u64::from(pc) >= u64::from(pr))
}

/// Wall-clock estimate: `cycles_per_step * n_steps * t_ck` seconds.
pub fn exec_time(
    n_spin: u64,
    p: ParallelParams,
    mode: KernelMode,
    n_steps: u64,
    t_ck: f64,
) -> Result<f64, CostError> {
    if !(t_ck > 0.0) || !t_ck.is_finite() {
        return Err(CostError::BadClock);
    }
    let cycles = cycles_per_step(n_spin, p, mode)?;
    Ok(cycles.to_f64().unwrap() * n_steps as f64 * t_ck)
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub pr: u32,
    pub pc: u32,
    pub pb: u32,
    pub cycles_per_step: f64,
    pub overlap: bool,
    pub exec_time_s: f64,
}

/// Evaluates the pipelined kernel over all divisor combinations of `n_spin`,
/// sorted by execution time.
pub fn sweep(n_spin: u64, n_steps: u64, t_ck: f64) -> Result<Vec<SweepRow>, CostError> {
    if !(t_ck > 0.0) || !t_ck.is_finite() {
        return Err(CostError::BadClock);
    }
    let divisors: Vec<u64> = (1..=n_spin).filter(|d| n_spin % d == 0).collect();
    let mut rows = Vec::new();
    for &pc in &divisors {
        for &pr in &divisors {
            for &pb in &divisors {
                if pr * pb > n_spin || n_spin % (pr * pb) != 0 {
                    continue;
                }
                let p = ParallelParams::new(pr as u32, pc as u32, pb as u32)?;
                let cycles = cycles_per_step(n_spin, p, KernelMode::Pipelined)?;
                rows.push(SweepRow {
                    pr: p.pr,
                    pc: p.pc,
                    pb: p.pb,
                    cycles_per_step: cycles.to_f64().unwrap(),
                    overlap: overlap_feasible(n_spin, p.pc, p.pr)?,
                    exec_time_s: cycles.to_f64().unwrap() * n_steps as f64 * t_ck,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        a.exec_time_s
            .total_cmp(&b.exec_time_s)
            .then(a.pr.cmp(&b.pr))
            .then(a.pc.cmp(&b.pc))
            .then(a.pb.cmp(&b.pb))
    });
    Ok(rows)
}
