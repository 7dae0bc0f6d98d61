//! Environment builders: seeded random CMDPs, the three-location monitoring
//! problem and its grid-world generalization.
//!
//! Rewards and utilities are kept in `[0, 1]`. Raw per-step rewards above one
//! (the `b_i > 1` case of the monitoring problems) are rescaled together with
//! their threshold, so `V_{u_i} >= b_i` holds exactly when the unscaled
//! constraint does.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cmdp::Cmdp;
use crate::error::{Error, Result};
use crate::oracle::solve_mdp_with_reward;

const STREAM_TRANSITIONS: u64 = 1;
const STREAM_REWARD: u64 = 2;
const STREAM_UTILITY: u64 = 3;

/// ChaCha8 keyed by `seed` with stream id `(tag << 48) | index`, so each
/// table draws from its own stream and adding constraints leaves the
/// transitions and rewards untouched.
fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 48) | index);
    rng
}

/// Parameters of a random tabular CMDP.
///
/// Raw utilities `g_raw(s,a)` are drawn uniformly on `[-1, 1]` with the
/// constraint `V_{g_raw}(rho) >= threshold`. The model stores the equivalent
/// `u = (g_raw + 1) / 2` and `b = (threshold + 1/(1-gamma)) / 2`, which keeps
/// `u` in `[0, 1]`; the translated utility is `(g_raw - (1-gamma) threshold) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomCmdpSpec {
    pub seed: u64,
    pub num_states: usize,
    pub num_actions: usize,
    pub num_constraints: usize,
    pub gamma: f64,
    pub threshold: f64,
}

impl Default for RandomCmdpSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            num_states: 20,
            num_actions: 5,
            num_constraints: 1,
            gamma: 0.9,
            threshold: 0.0,
        }
    }
}

impl RandomCmdpSpec {
    pub fn build(&self) -> Result<Cmdp> {
        let (ns, na) = (self.num_states, self.num_actions);
        if ns == 0 || na == 0 {
            return Err(Error::Config(
                "random CMDP needs at least one state and action".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma {} outside [0, 1)",
                self.gamma
            )));
        }
        let bound = 1.0 / (1.0 - self.gamma);
        if !(self.threshold > -bound && self.threshold <= bound) {
            return Err(Error::Config(format!(
                "threshold {} outside (-{bound}, {bound}]",
                self.threshold
            )));
        }

        let mut transitions = Vec::with_capacity(ns * na * ns);
        for sa in 0..(ns * na) as u64 {
            let mut rng = stream(self.seed, STREAM_TRANSITIONS, sa);
            let draws: Vec<f64> = (0..ns).map(|_| rng.random::<f64>()).collect();
            let total: f64 = draws.iter().sum();
            transitions.extend(draws.iter().map(|x| x / total));
        }

        let mut rng = stream(self.seed, STREAM_REWARD, 0);
        let reward: Vec<f64> = (0..ns * na).map(|_| rng.random::<f64>()).collect();

        let utilities: Vec<Vec<f64>> = (0..self.num_constraints as u64)
            .map(|i| {
                let mut rng = stream(self.seed, STREAM_UTILITY, i);
                (0..ns * na).map(|_| rng.random::<f64>()).collect()
            })
            .collect();
        let b = 0.5 * (self.threshold + bound);
        let thresholds = vec![b; self.num_constraints];

        Cmdp::new(
            ns,
            na,
            self.gamma,
            vec![1.0 / ns as f64; ns],
            transitions,
            reward,
            utilities,
            thresholds,
        )
    }
}

/// Random CMDP with raw threshold 0 (`V_{g_raw}(rho) >= 0`).
pub fn gen_random_cmdp(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    num_constraints: usize,
    gamma: f64,
) -> Result<Cmdp> {
    RandomCmdpSpec {
        seed,
        num_states,
        num_actions,
        num_constraints,
        gamma,
        threshold: 0.0,
    }
    .build()
}

/// Stores a per-step reward `scale * indicator` with threshold `c` inside
/// `[0, 1]`: scales above one are divided out of both reward and threshold.
fn scaled_indicator(scale: f64, c: f64) -> (f64, f64) {
    if scale > 1.0 {
        (1.0, c / scale)
    } else {
        (scale, c)
    }
}

/// Three-location monitoring problem.
///
/// States `S0, S1, S2`; the next state is the chosen location. The action
/// space is two actions with state-dependent meaning:
///
/// | state | action 0 | action 1 |
/// |-------|----------|----------|
/// | S0    | go S1    | go S2    |
/// | S1    | go S0    | stay S1  |
/// | S2    | go S0    | stay S2  |
///
/// The objective rewards time in `S0`; constraint `i` asks for
/// `V_i(rho) >= c_i` with per-step reward `b_i` in `S_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Monitor3Spec {
    pub b_values: [f64; 3],
    pub gamma: f64,
    pub thresholds: [f64; 2],
}

impl Default for Monitor3Spec {
    fn default() -> Self {
        Self {
            b_values: [1.0, 1.0, 1.2],
            gamma: 0.9,
            thresholds: [7.0, 9.0],
        }
    }
}

impl Monitor3Spec {
    pub fn build(&self) -> Result<Cmdp> {
        build_indicator_model(
            3,
            2,
            self.gamma,
            &[vec![0], vec![1], vec![2]],
            self.b_values,
            self.thresholds,
            |s, a| match (s, a) {
                (0, 0) => 1,
                (0, _) => 2,
                (_, 0) => 0,
                (s, _) => s,
            },
        )
    }
}

pub fn build_monitor3(b_values: [f64; 3], gamma: f64, thresholds: [f64; 2]) -> Result<Cmdp> {
    Monitor3Spec {
        b_values,
        gamma,
        thresholds,
    }
    .build()
}

/// Inclusive rectangle of grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Area {
    pub rows: [usize; 2],
    pub cols: [usize; 2],
}

impl Area {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.rows[0]..=self.rows[1]).contains(&row) && (self.cols[0]..=self.cols[1]).contains(&col)
    }
}

/// Grid actions in index order.
pub const GRID_ACTIONS: [&str; 4] = ["left", "right", "up", "down"];

/// Grid-world monitoring problem. State `row * width + col`; moves that would
/// leave the grid keep the robot in place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridMonitorSpec {
    pub width: usize,
    pub height: usize,
    /// Areas `S0` (objective), `S1`, `S2` (constraints).
    pub areas: [Area; 3],
    pub b_values: [f64; 3],
    pub gamma: f64,
    pub thresholds: [f64; 2],
}

impl Default for GridMonitorSpec {
    fn default() -> Self {
        Self {
            width: 10,
            height: 10,
            areas: [
                Area {
                    rows: [0, 2],
                    cols: [0, 2],
                },
                Area {
                    rows: [7, 9],
                    cols: [0, 2],
                },
                Area {
                    rows: [7, 9],
                    cols: [7, 9],
                },
            ],
            b_values: [1.0, 1.0, 1.2],
            gamma: 0.9,
            thresholds: [7.0, 9.0],
        }
    }
}

impl GridMonitorSpec {
    /// Next cell index after taking `action` in cell `state`.
    pub fn step(&self, state: usize, action: usize) -> usize {
        let (row, col) = (state / self.width, state % self.width);
        let (row, col) = match action {
            0 => (row, col.saturating_sub(1)),
            1 => (row, (col + 1).min(self.width - 1)),
            2 => (row.saturating_sub(1), col),
            _ => ((row + 1).min(self.height - 1), col),
        };
        row * self.width + col
    }

    /// Cells belonging to area `k`.
    pub fn area_states(&self, k: usize) -> Vec<usize> {
        (0..self.width * self.height)
            .filter(|&s| self.areas[k].contains(s / self.width, s % self.width))
            .collect()
    }

    pub fn build(&self) -> Result<Cmdp> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("grid must be non-empty".into()));
        }
        for (k, area) in self.areas.iter().enumerate() {
            if area.rows[0] > area.rows[1]
                || area.cols[0] > area.cols[1]
                || area.rows[1] >= self.height
                || area.cols[1] >= self.width
            {
                return Err(Error::Config(format!(
                    "area S{k} is empty or leaves the grid"
                )));
            }
        }
        let n = self.width * self.height;
        let members: Vec<Vec<usize>> = (0..3).map(|k| self.area_states(k)).collect();
        for i in 0..3 {
            for j in i + 1..3 {
                if members[i].iter().any(|s| members[j].contains(s)) {
                    return Err(Error::Config(format!("areas S{i} and S{j} overlap")));
                }
            }
        }
        build_indicator_model(
            n,
            4,
            self.gamma,
            &members,
            self.b_values,
            self.thresholds,
            |s, a| self.step(s, a),
        )
    }
}

pub fn build_grid_monitor(spec: &GridMonitorSpec) -> Result<Cmdp> {
    spec.build()
}

/// Deterministic-dynamics model with indicator rewards on three state sets
/// and a uniform initial distribution.
fn build_indicator_model(
    ns: usize,
    na: usize,
    gamma: f64,
    areas: &[Vec<usize>],
    b_values: [f64; 3],
    thresholds: [f64; 2],
    next: impl Fn(usize, usize) -> usize,
) -> Result<Cmdp> {
    if b_values.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::Config(
            "per-step rewards b_i must be positive".into(),
        ));
    }
    if b_values[0] > 1.0 {
        return Err(Error::Config(format!(
            "objective reward b_0 = {} must lie in (0, 1]",
            b_values[0]
        )));
    }
    let mut transitions = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            transitions[(s * na + a) * ns + next(s, a)] = 1.0;
        }
    }
    let indicator = |k: usize, scale: f64| -> Vec<f64> {
        let mut t = vec![0.0; ns * na];
        for &s in &areas[k] {
            t[s * na..(s + 1) * na].fill(scale);
        }
        t
    };
    let reward = indicator(0, b_values[0]);
    let mut utilities = Vec::new();
    let mut stored_thresholds = Vec::new();
    for i in 0..2 {
        let (scale, c) = scaled_indicator(b_values[i + 1], thresholds[i]);
        utilities.push(indicator(i + 1, scale));
        stored_thresholds.push(c);
    }
    Cmdp::new(
        ns,
        na,
        gamma,
        vec![1.0 / ns as f64; ns],
        transitions,
        reward,
        utilities,
        stored_thresholds,
    )
}

/// `max_pi V_{u_i}^pi(rho)`, the smallest threshold making constraint `i`
/// infeasible on its own.
pub fn max_utility_value(model: &Cmdp, constraint_index: usize) -> Result<f64> {
    let u = model
        .utilities()
        .get(constraint_index)
        .ok_or_else(|| Error::Domain(format!("no constraint {constraint_index}")))?;
    Ok(solve_mdp_with_reward(model, u)?.value)
}

/// Environment description accepted in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    Random(RandomCmdpSpec),
    Monitor3(Monitor3Spec),
    GridMonitor(GridMonitorSpec),
}

impl EnvSpec {
    pub fn build(&self) -> Result<Cmdp> {
        match self {
            EnvSpec::Random(s) => s.build(),
            EnvSpec::Monitor3(s) => s.build(),
            EnvSpec::GridMonitor(s) => s.build(),
        }
    }

    /// Overrides the seed of random specs; other kinds are deterministic.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let EnvSpec::Random(s) = &mut self {
            s.seed = seed;
        }
        self
    }
}
