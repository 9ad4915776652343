//! Benchmark harness: success probability against a target, time-to-target,
//! empirical objective distributions, and reproducible run reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoders::{
    decode_knapsack, default_penalty, encode_knapsack, encode_maxcut, Encoding, EncodeError,
    KnapsackInstance, MaxCutInstance, ObjectiveSense,
};
use crate::engine::{solve_encoding, EffectiveParams, EngineError, SbRunner, SolverConfig};
use crate::ising::{IsingModel, ModelError};
use crate::oracles::{
    brute_force_ground_state, simulated_annealing, AnnealSchedule, OracleError,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("success probability must lie strictly between 0 and 1, got {0}")]
    BadSuccessProbability(f64),
    #[error("computation time must be positive")]
    BadComputationTime,
    #[error("target fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Expected time to observe the target at 90% confidence:
/// `t_com * log10(1 - 0.9) / log10(1 - p_s)`.
pub fn time_to_target(t_com: f64, p_s: f64) -> Result<f64, BenchError> {
    if !(t_com > 0.0) || !t_com.is_finite() {
        return Err(BenchError::BadComputationTime);
    }
    if !(p_s > 0.0 && p_s < 1.0) {
        return Err(BenchError::BadSuccessProbability(p_s));
    }
    Ok(t_com * 0.1f64.log10() / (1.0 - p_s).log10())
}

/// How the benchmark obtains its target objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TargetPolicy {
    /// Annealing oracle on the encoded model.
    SimulatedAnnealing(AnnealSchedule),
    /// Exhaustive ground state (small models only).
    BruteForce,
    /// User-supplied best-known objective.
    Known(f64),
}

/// Problem fed to the harness.
#[derive(Debug, Clone)]
pub enum BenchProblem {
    MaxCut(MaxCutInstance),
    Knapsack {
        inst: KnapsackInstance,
        /// Penalty weight; defaults to twice the largest value.
        penalty: Option<f64>,
    },
    /// Raw model; the objective is the energy itself (minimized).
    Ising(IsingModel),
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub target: Option<TargetPolicy>,
    /// A run succeeds when it reaches this fraction of the target.
    pub fraction: f64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            target: None,
            fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_index: u32,
    pub final_energy: f64,
    pub objective: f64,
    pub feasible: bool,
    pub saturation_events: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub objective: f64,
    pub fraction: f64,
}

/// Full benchmark report. Everything except the wall-time fields
/// (`wall_time_s`, `t_com_s`, `ttt_s`) is deterministic for a fixed
/// `(seed, config)`; the config echo plus `effective` reproduce the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub problem: String,
    pub seed: u64,
    pub config: SolverConfig,
    pub effective: EffectiveParams,
    pub sense: ObjectiveSense,
    pub target: Option<f64>,
    pub target_fraction: f64,
    pub runs: Vec<RunRecord>,
    pub best_objective: f64,
    pub best_energy: f64,
    pub mean_objective: f64,
    pub success_prob: Option<f64>,
    pub target_met_in_all_runs: bool,
    pub total_saturation_events: u64,
    pub cdf: Vec<CdfPoint>,
    /// Mean per-run wall time.
    pub t_com_s: f64,
    /// Defined only when 0 < P_S < 1 and a target is set.
    pub ttt_s: Option<f64>,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// JSON with wall-time fields zeroed: two runs of the same seeded config
    /// compare equal on this view at any thread count.
    pub fn deterministic_json(&self) -> String {
        let mut r = self.clone();
        r.t_com_s = 0.0;
        r.ttt_s = None;
        for run in &mut r.runs {
            run.wall_time_s = 0.0;
        }
        r.to_json()
    }

    /// CSV of the per-run records.
    pub fn runs_csv(&self) -> String {
        let mut out =
            String::from("run_index,final_energy,objective,feasible,saturation_events,wall_time_s\n");
        for r in &self.runs {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.run_index, r.final_energy, r.objective, r.feasible, r.saturation_events,
                r.wall_time_s
            ));
        }
        out
    }

    /// CSV of the empirical cumulative distribution of objectives.
    pub fn cdf_csv(&self) -> String {
        let mut out = String::from("objective,fraction\n");
        for p in &self.cdf {
            out.push_str(&format!("{},{}\n", p.objective, p.fraction));
        }
        out
    }
}

enum Prepared {
    Encoded(Encoding),
    Raw(IsingModel),
}

fn prepare(problem: &BenchProblem) -> Result<(Prepared, String), BenchError> {
    Ok(match problem {
        BenchProblem::MaxCut(g) => {
            let label = format!("max-cut: {} nodes, {} edges", g.n(), g.edges().len());
            (Prepared::Encoded(encode_maxcut(g)), label)
        }
        BenchProblem::Knapsack { inst, penalty } => {
            let lambda = penalty.unwrap_or_else(|| default_penalty(inst));
            let label = format!(
                "knapsack: {} items, capacity {}, penalty {}",
                inst.n(),
                inst.capacity(),
                lambda
            );
            (Prepared::Encoded(encode_knapsack(inst, lambda)?), label)
        }
        BenchProblem::Ising(m) => {
            let label = format!("ising: {} spins", m.n());
            (Prepared::Raw(m.clone()), label)
        }
    })
}

impl Prepared {
    fn model(&self) -> &IsingModel {
        match self {
            Prepared::Encoded(enc) => &enc.model,
            Prepared::Raw(m) => m,
        }
    }

    /// Objective and feasibility of one spin assignment.
    fn objective(
        &self,
        spins: &crate::ising::SpinVector,
        energy: f64,
    ) -> Result<(f64, bool), BenchError> {
        Ok(match self {
            Prepared::Encoded(enc) => match &enc.problem {
                crate::encoders::SourceProblem::MaxCut(g) => (g.cut_value(spins)?, true),
                crate::encoders::SourceProblem::Knapsack(_) => {
                    let sol = decode_knapsack(enc, spins)?;
                    let obj = if sol.feasible { sol.total_value } else { 0.0 };
                    (obj, sol.feasible)
                }
            },
            Prepared::Raw(_) => (energy, true),
        })
    }
}

fn success(sense: ObjectiveSense, objective: f64, feasible: bool, target: f64, fraction: f64) -> bool {
    if !feasible {
        return false;
    }
    match sense {
        ObjectiveSense::Maximize => objective >= fraction * target,
        // for minimized objectives, success means coming within the same
        // relative margin of the target
        ObjectiveSense::Minimize => objective <= target + (1.0 - fraction) * target.abs(),
    }
}

/// Solves the problem `config.n_runs` times and assembles distribution
/// metrics against the target policy.
pub fn run_benchmark(
    problem: &BenchProblem,
    config: &SolverConfig,
    opts: &BenchOptions,
) -> Result<BenchReport, BenchError> {
    if !(opts.fraction > 0.0 && opts.fraction <= 1.0) {
        return Err(BenchError::BadFraction(opts.fraction));
    }
    let (prepared, label) = prepare(problem)?;
    let sense = match problem {
        BenchProblem::Ising(_) => ObjectiveSense::Minimize,
        _ => ObjectiveSense::Maximize,
    };

    let output = match &prepared {
        Prepared::Raw(m) => SbRunner::new(m, config)?.solve()?,
        Prepared::Encoded(enc) => solve_encoding(enc, config)?,
    };

    let mut runs = Vec::with_capacity(output.all.len());
    for rr in &output.all {
        let (objective, feasible) = prepared.objective(&rr.best_spins, rr.best_energy)?;
        runs.push(RunRecord {
            run_index: rr.run_index,
            final_energy: rr.best_energy,
            objective,
            feasible,
            saturation_events: rr.saturation_events,
            wall_time_s: rr.wall_time_s,
        });
    }

    let target = match &opts.target {
        None => None,
        Some(TargetPolicy::Known(v)) => Some(*v),
        Some(TargetPolicy::BruteForce) => {
            let gs = brute_force_ground_state(prepared.model())?;
            let (obj, _) = prepared.objective(&gs.spins, gs.energy)?;
            Some(obj)
        }
        Some(TargetPolicy::SimulatedAnnealing(sched)) => {
            let out = simulated_annealing(prepared.model(), sched);
            let (obj, _) = prepared.objective(&out.spins, out.energy)?;
            Some(obj)
        }
    };

    let n_runs = runs.len() as f64;
    let success_prob = target.map(|t| {
        runs.iter()
            .filter(|r| success(sense, r.objective, r.feasible, t, opts.fraction))
            .count() as f64
            / n_runs
    });
    let target_met_in_all_runs = success_prob == Some(1.0);
    let t_com_s = runs.iter().map(|r| r.wall_time_s).sum::<f64>() / n_runs;
    let ttt_s = match success_prob {
        Some(p) if p > 0.0 && p < 1.0 => Some(time_to_target(t_com_s.max(f64::MIN_POSITIVE), p)?),
        _ => None,
    };

    let best = match sense {
        ObjectiveSense::Maximize => runs
            .iter()
            .map(|r| r.objective)
            .fold(f64::NEG_INFINITY, f64::max),
        ObjectiveSense::Minimize => runs.iter().map(|r| r.objective).fold(f64::INFINITY, f64::min),
    };
    let mean_objective = runs.iter().map(|r| r.objective).sum::<f64>() / n_runs;
    let best_energy = runs
        .iter()
        .map(|r| r.final_energy)
        .fold(f64::INFINITY, f64::min);

    let mut sorted: Vec<f64> = runs.iter().map(|r| r.objective).collect();
    sorted.sort_by(f64::total_cmp);
    let cdf = sorted
        .iter()
        .enumerate()
        .map(|(i, &objective)| CdfPoint {
            objective,
            fraction: (i + 1) as f64 / n_runs,
        })
        .collect();

    Ok(BenchReport {
        problem: label,
        seed: config.seed,
        config: config.clone(),
        effective: output.effective,
        sense,
        target,
        target_fraction: opts.fraction,
        runs,
        best_objective: best,
        best_energy,
        mean_objective,
        success_prob,
        target_met_in_all_runs,
        total_saturation_events: output.all.iter().map(|r| r.saturation_events).sum(),
        cdf,
        t_com_s,
        ttt_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SolverConfig;

    #[test]
    fn ttt_reference_point() {
        let t = time_to_target(32.5e-6, 0.85).unwrap();
        assert!((t - 39.5e-6).abs() < 0.1e-6, "got {t}");
    }

    #[test]
    fn ttt_equals_tcom_at_90_percent() {
        for t in [1e-9, 1.0, 3600.0] {
            assert_eq!(time_to_target(t, 0.9).unwrap(), t);
        }
    }

    #[test]
    fn ttt_halves_at_99_percent() {
        let t = time_to_target(2.0, 0.99).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ttt_domain_is_enforced() {
        assert!(time_to_target(1.0, 0.0).is_err());
        assert!(time_to_target(1.0, 1.0).is_err());
        assert!(time_to_target(1.0, 1.5).is_err());
        assert!(time_to_target(0.0, 0.5).is_err());
    }

    fn small_cut_problem() -> BenchProblem {
        BenchProblem::MaxCut(MaxCutInstance::random(8, -8..=-1, 1.0, 3).unwrap())
    }

    fn quick_config(n_runs: u32) -> SolverConfig {
        let mut c = SolverConfig::discrete();
        c.n_steps = 300;
        c.n_runs = n_runs;
        c
    }

    #[test]
    fn single_run_with_own_target_meets_it() {
        let p = small_cut_problem();
        let cfg = quick_config(1);
        let probe = run_benchmark(&p, &cfg, &BenchOptions::default()).unwrap();
        let own = probe.runs[0].objective;
        let report = run_benchmark(
            &p,
            &cfg,
            &BenchOptions {
                target: Some(TargetPolicy::Known(own)),
                fraction: 0.9,
            },
        )
        .unwrap();
        assert_eq!(report.success_prob, Some(1.0));
        assert!(report.target_met_in_all_runs);
        assert_eq!(report.ttt_s, None);
    }

    #[test]
    fn brute_force_target_with_generous_budget() {
        let p = small_cut_problem();
        let mut cfg = quick_config(20);
        cfg.n_steps = 1000;
        let report = run_benchmark(
            &p,
            &cfg,
            &BenchOptions {
                target: Some(TargetPolicy::BruteForce),
                fraction: 0.9,
            },
        )
        .unwrap();
        assert_eq!(report.success_prob, Some(1.0));
    }

    #[test]
    fn cdf_is_monotone_and_ends_at_one() {
        let p = small_cut_problem();
        let report = run_benchmark(&p, &quick_config(32), &BenchOptions::default()).unwrap();
        assert_eq!(report.cdf.len(), 32);
        for w in report.cdf.windows(2) {
            assert!(w[0].objective <= w[1].objective);
            assert!(w[0].fraction <= w[1].fraction);
        }
        assert_eq!(report.cdf.last().unwrap().fraction, 1.0);
    }

    #[test]
    fn aggregates_recomputable_from_records() {
        let p = small_cut_problem();
        let report = run_benchmark(&p, &quick_config(16), &BenchOptions::default()).unwrap();
        let best = report
            .runs
            .iter()
            .map(|r| r.objective)
            .fold(f64::NEG_INFINITY, f64::max);
        let mean = report.runs.iter().map(|r| r.objective).sum::<f64>() / 16.0;
        assert_eq!(report.best_objective, best);
        assert_eq!(report.mean_objective, mean);
        let sat: u64 = report.runs.iter().map(|r| r.saturation_events).sum();
        assert_eq!(report.total_saturation_events, sat);
    }

    #[test]
    fn reports_reproduce_deterministically() {
        let p = small_cut_problem();
        let cfg = quick_config(8);
        let a = run_benchmark(&p, &cfg, &BenchOptions::default()).unwrap();
        let b = run_benchmark(&p, &cfg, &BenchOptions::default()).unwrap();
        assert_eq!(a.deterministic_json(), b.deterministic_json());
    }

    #[test]
    fn knapsack_benchmark_decodes_objectives() {
        let inst = KnapsackInstance::new(vec![6.0, 10.0, 4.0], vec![2, 2, 1], 3).unwrap();
        let p = BenchProblem::Knapsack {
            inst: inst.clone(),
            penalty: None,
        };
        let mut cfg = quick_config(20);
        cfg.n_steps = 1000;
        let report = run_benchmark(&p, &cfg, &BenchOptions::default()).unwrap();
        let dp = crate::oracles::knapsack_dp(&inst).unwrap();
        for r in &report.runs {
            assert!(r.objective <= dp.optimal_value + 1e-9);
        }
        assert!(report.best_objective > 0.0);
    }

    #[test]
    fn csv_outputs_have_headers_and_rows() {
        let p = small_cut_problem();
        let report = run_benchmark(&p, &quick_config(4), &BenchOptions::default()).unwrap();
        let runs_csv = report.runs_csv();
        assert!(runs_csv.starts_with("run_index,"));
        assert_eq!(runs_csv.lines().count(), 5);
        let cdf_csv = report.cdf_csv();
        assert!(cdf_csv.starts_with("objective,"));
        assert_eq!(cdf_csv.lines().count(), 5);
    }
}
