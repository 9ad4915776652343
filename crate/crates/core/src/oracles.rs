//! Exact and baseline reference solvers used for validation and
//! target-setting: exhaustive ground-state search, single-flip Metropolis
//! annealing, and the classic knapsack dynamic program.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoders::KnapsackInstance;
use crate::ising::{IsingModel, SpinVector};

/// Exhaustive search refuses above this spin count.
pub const BRUTE_FORCE_LIMIT: usize = 24;
/// DP table budget: (capacity + 1) * n entries.
pub const DP_CELL_LIMIT: u64 = 1 << 28;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("exhaustive search limited to {BRUTE_FORCE_LIMIT} spins, model has {0}")]
    TooManySpins(usize),
    #[error("annealing schedule requires t_start >= t_end > 0")]
    BadSchedule,
    #[error("DP table of {0} cells exceeds the memory budget")]
    DpTooLarge(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub spins: SpinVector,
    pub energy: f64,
}

/// Enumerates all `2^n` assignments with incremental (Gray-code) energy
/// updates. Ties are broken toward the lexicographically smallest vector
/// with `-1 < +1`.
pub fn brute_force_ground_state(model: &IsingModel) -> Result<GroundState, OracleError> {
    let n = model.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(OracleError::TooManySpins(n));
    }

    let mut s = vec![-1i8; n];
    // local[i] = sum_j J[i][j] s_j
    let mut local: Vec<f64> = (0..n)
        .map(|i| {
            model
                .coupling_row(i)
                .iter()
                .zip(&s)
                .map(|(j, sv)| j * f64::from(*sv))
                .sum()
        })
        .collect();
    let mut energy = model.energy(&SpinVector::all_down(n)).unwrap();

    let mut best_energy = energy;
    let mut best_spins = s.clone();

    for k in 1u64..(1 << n) {
        let f = k.trailing_zeros() as usize;
        let sf = f64::from(s[f]);
        energy += 2.0 * sf * (local[f] + model.field()[f]);
        s[f] = -s[f];
        let delta = -2.0 * sf;
        for (l, jf) in local.iter_mut().zip(model.coupling_row(f)) {
            *l += jf * delta;
        }
        if energy < best_energy || (energy == best_energy && s < best_spins) {
            best_energy = energy;
            best_spins = s.clone();
        }
    }

    Ok(GroundState {
        spins: SpinVector::new(best_spins).unwrap(),
        energy: best_energy,
    })
}

/// Geometric Metropolis annealing schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub t_start: f64,
    pub t_end: f64,
    pub sweeps: u32,
    pub seed: u64,
}

impl AnnealSchedule {
    pub fn new(t_start: f64, t_end: f64, sweeps: u32, seed: u64) -> Result<Self, OracleError> {
        if !(t_end > 0.0) || !(t_start >= t_end) || sweeps == 0 {
            return Err(OracleError::BadSchedule);
        }
        Ok(Self {
            t_start,
            t_end,
            sweeps,
            seed,
        })
    }

    fn temperature(&self, sweep: u32) -> f64 {
        if self.sweeps <= 1 {
            return self.t_start;
        }
        let frac = f64::from(sweep) / f64::from(self.sweeps - 1);
        self.t_start * (self.t_end / self.t_start).powf(frac)
    }
}

/// Single-flip Metropolis with geometric temperature decay; deterministic
/// given the schedule seed. Returns the best state visited.
pub fn simulated_annealing(model: &IsingModel, schedule: &AnnealSchedule) -> GroundState {
    let n = model.n();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut s: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    let mut local: Vec<f64> = (0..n)
        .map(|i| {
            model
                .coupling_row(i)
                .iter()
                .zip(&s)
                .map(|(j, sv)| j * f64::from(*sv))
                .sum()
        })
        .collect();
    let mut energy = model
        .energy(&SpinVector::new(s.clone()).unwrap())
        .unwrap();
    let mut best_energy = energy;
    let mut best_spins = s.clone();

    for sweep in 0..schedule.sweeps {
        let t = schedule.temperature(sweep);
        for _ in 0..n {
            let f = rng.random_range(0..n);
            let sf = f64::from(s[f]);
            let delta = 2.0 * sf * (local[f] + model.field()[f]);
            let accept = delta <= 0.0 || rng.random::<f64>() < (-delta / t).exp();
            if accept {
                energy += delta;
                s[f] = -s[f];
                let ds = -2.0 * sf;
                for (l, jf) in local.iter_mut().zip(model.coupling_row(f)) {
                    *l += jf * ds;
                }
                if energy < best_energy {
                    best_energy = energy;
                    best_spins.copy_from_slice(&s);
                }
            }
        }
    }

    GroundState {
        spins: SpinVector::new(best_spins).unwrap(),
        energy: best_energy,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackOptimum {
    pub optimal_value: f64,
    pub selected: Vec<usize>,
}

/// Classic O(n * W) dynamic program; exact optimum with reconstruction.
pub fn knapsack_dp(inst: &KnapsackInstance) -> Result<KnapsackOptimum, OracleError> {
    let n = inst.n();
    let cap = inst.capacity();
    let cells = (cap + 1).saturating_mul(n as u64);
    if cells > DP_CELL_LIMIT {
        return Err(OracleError::DpTooLarge(cells));
    }
    let w = (cap + 1) as usize;
    let mut dp = vec![0.0f64; w];
    let mut take = vec![false; n * w];
    for k in 0..n {
        let wk = inst.weights()[k] as usize;
        let ck = inst.values()[k];
        if wk > cap as usize {
            continue;
        }
        for c in (wk..w).rev() {
            let cand = dp[c - wk] + ck;
            if cand > dp[c] {
                dp[c] = cand;
                take[k * w + c] = true;
            }
        }
    }
    let mut selected = Vec::new();
    let mut c = w - 1;
    for k in (0..n).rev() {
        if take[k * w + c] {
            selected.push(k);
            c -= inst.weights()[k] as usize;
        }
    }
    selected.reverse();
    Ok(KnapsackOptimum {
        optimal_value: dp[w - 1],
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_tie_breaks_all_down() {
        let gs = brute_force_ground_state(&IsingModel::zero(5)).unwrap();
        assert_eq!(gs.energy, 0.0);
        assert_eq!(gs.spins, SpinVector::all_down(5));
    }

    #[test]
    fn two_spin_ferromagnet() {
        let m = IsingModel::new(2, vec![0.0, 1.0, 1.0, 0.0], vec![0.0; 2], 0.0).unwrap();
        let gs = brute_force_ground_state(&m).unwrap();
        assert_eq!(gs.energy, -1.0);
        assert_eq!(gs.spins[0], gs.spins[1]);
        // aligned tie broken toward all-down
        assert_eq!(gs.spins, SpinVector::all_down(2));
    }

    #[test]
    fn refuses_large_models() {
        assert!(matches!(
            brute_force_ground_state(&IsingModel::zero(25)),
            Err(OracleError::TooManySpins(25))
        ));
    }

    fn random_model(n: usize, seed: u64) -> IsingModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut j = vec![0.0; n * n];
        for i in 0..n {
            for k in (i + 1)..n {
                let v = f64::from(rng.random_range(-32..=32i32)) / 16.0;
                j[i * n + k] = v;
                j[k * n + i] = v;
            }
        }
        let h = (0..n)
            .map(|_| f64::from(rng.random_range(-16..=16i32)) / 16.0)
            .collect();
        IsingModel::new(n, j, h, 0.0).unwrap()
    }

    #[test]
    fn ground_state_beats_random_sampling() {
        let m = random_model(12, 21);
        let gs = brute_force_ground_state(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..1000 {
            let s = SpinVector::new(
                (0..12).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect(),
            )
            .unwrap();
            assert!(gs.energy <= m.energy(&s).unwrap());
        }
    }

    #[test]
    fn ground_state_energy_matches_spins() {
        let m = random_model(10, 77);
        let gs = brute_force_ground_state(&m).unwrap();
        assert_eq!(gs.energy, m.energy(&gs.spins).unwrap());
    }

    #[test]
    fn brute_force_invariant_under_permutation() {
        let m = random_model(8, 5);
        let n = 8;
        let perm: Vec<usize> = vec![3, 1, 7, 0, 5, 2, 6, 4];
        let mut j = vec![0.0; n * n];
        let mut h = vec![0.0; n];
        for i in 0..n {
            h[perm[i]] = m.field()[i];
            for k in 0..n {
                j[perm[i] * n + perm[k]] = m.coupling_at(i, k);
            }
        }
        let pm = IsingModel::new(n, j, h, 0.0).unwrap();
        let gs = brute_force_ground_state(&m).unwrap();
        let pgs = brute_force_ground_state(&pm).unwrap();
        assert_eq!(gs.energy, pgs.energy);
        // permuted ground spins attain the same energy on the permuted model
        let mut sp = vec![0i8; n];
        for i in 0..n {
            sp[perm[i]] = gs.spins[i];
        }
        assert_eq!(
            pm.energy(&SpinVector::new(sp).unwrap()).unwrap(),
            pgs.energy
        );
    }

    #[test]
    fn annealing_zero_model() {
        let sched = AnnealSchedule::new(1.0, 0.1, 100, 1).unwrap();
        let out = simulated_annealing(&IsingModel::zero(6), &sched);
        assert_eq!(out.energy, 0.0);
    }

    #[test]
    fn annealing_best_not_worse_than_initial() {
        let m = random_model(16, 3);
        for seed in 0..20 {
            let sched = AnnealSchedule::new(2.0, 0.05, 200, seed).unwrap();
            let out = simulated_annealing(&m, &sched);
            // reconstruct the initial state from the same seed
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init: Vec<i8> =
                (0..16).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
            let e0 = m.energy(&SpinVector::new(init).unwrap()).unwrap();
            assert!(out.energy <= e0);
        }
    }

    #[test]
    fn annealing_matches_brute_force_on_most_seeds() {
        let m = random_model(12, 8);
        let gs = brute_force_ground_state(&m).unwrap();
        let mut hits = 0;
        for seed in 0..100 {
            let sched = AnnealSchedule::new(10.0, 0.02, 10_000, seed).unwrap();
            let out = simulated_annealing(&m, &sched);
            if out.energy <= gs.energy + 1e-9 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "annealing found the ground state {hits}/100 times");
    }

    #[test]
    fn annealing_deterministic_per_seed() {
        let m = random_model(10, 4);
        let sched = AnnealSchedule::new(1.5, 0.1, 500, 9).unwrap();
        let a = simulated_annealing(&m, &sched);
        let b = simulated_annealing(&m, &sched);
        assert_eq!(a.spins, b.spins);
        assert_eq!(a.energy, b.energy);
    }

    #[test]
    fn bad_schedules_rejected() {
        assert!(AnnealSchedule::new(0.1, 1.0, 10, 0).is_err());
        assert!(AnnealSchedule::new(1.0, 0.0, 10, 0).is_err());
        assert!(AnnealSchedule::new(1.0, 0.5, 0, 0).is_err());
    }

    #[test]
    fn dp_single_item_fits() {
        let inst = KnapsackInstance::new(vec![5.0], vec![3], 3).unwrap();
        let opt = knapsack_dp(&inst).unwrap();
        assert_eq!(opt.optimal_value, 5.0);
        assert_eq!(opt.selected, vec![0]);
    }

    #[test]
    fn dp_two_items_hand_check() {
        let inst = KnapsackInstance::new(vec![6.0, 10.0], vec![2, 2], 2).unwrap();
        let opt = knapsack_dp(&inst).unwrap();
        assert_eq!(opt.optimal_value, 10.0);
        assert_eq!(opt.selected, vec![1]);
    }

    #[test]
    fn dp_beats_value_density_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let n = rng.random_range(3..12);
            let values: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(1..50u32))).collect();
            let weights: Vec<u64> = (0..n).map(|_| rng.random_range(1..20u64)).collect();
            let cap = rng.random_range(5..40u64);
            let inst = KnapsackInstance::new(values.clone(), weights.clone(), cap).unwrap();
            let opt = knapsack_dp(&inst).unwrap();

            // greedy by value density
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                (values[b] / weights[b] as f64).total_cmp(&(values[a] / weights[a] as f64))
            });
            let mut room = cap;
            let mut greedy = 0.0;
            for k in order {
                if weights[k] <= room {
                    room -= weights[k];
                    greedy += values[k];
                }
            }
            assert!(opt.optimal_value >= greedy);
        }
    }

    #[test]
    fn dp_selection_is_consistent() {
        let inst =
            KnapsackInstance::new(vec![10.0, 40.0, 30.0, 50.0], vec![5, 4, 6, 3], 10).unwrap();
        let opt = knapsack_dp(&inst).unwrap();
        let value: f64 = opt.selected.iter().map(|&k| inst.values()[k]).sum();
        let weight: u64 = opt.selected.iter().map(|&k| inst.weights()[k]).sum();
        assert_eq!(value, opt.optimal_value);
        assert!(weight <= inst.capacity());
        assert_eq!(opt.optimal_value, 90.0); // items 1 and 3
    }

    #[test]
    fn dp_budget_guard() {
        let inst = KnapsackInstance::new(vec![1.0; 64], vec![1; 64], u64::MAX / 2).unwrap();
        assert!(matches!(knapsack_dp(&inst), Err(OracleError::DpTooLarge(_))));
    }
}
