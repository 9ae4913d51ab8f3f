//! Seeded 4×4 Frozen Lake and deep Q-learning with replay and a target network.

use std::collections::VecDeque;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Checkpoint, ModelSpec, OutputMode};
use crate::optim::{adam_step, squared_error, AdamConfig, AdamState};
use crate::qasm::CircuitLog;
use crate::training::argmax;
use crate::Model;

pub const SIDE: usize = 4;
pub const N_TILES: usize = SIDE * SIDE;
pub const START: usize = 0;
pub const GOAL: usize = N_TILES - 1;
pub const N_HOLES: usize = 4;
pub const SHORTEST_PATH: usize = 6;

pub const STEP_REWARD: f64 = -0.01;
pub const GOAL_REWARD: f64 = 1.0;
pub const HOLE_REWARD: f64 = -0.2;
/// Best achievable episode return: five penalized moves then the goal.
pub const OPTIMAL_RETURN: f64 = (SHORTEST_PATH - 1) as f64 * STEP_REWARD + GOAL_REWARD;

const LAYOUT_STREAM: u64 = 3;
const AGENT_STREAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tile {
    Frozen,
    Hole,
    Start,
    Goal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Left,
    Down,
    Right,
    Up,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Left, Action::Down, Action::Right, Action::Up];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL.get(i).copied().ok_or(Error::Domain { value: i as f64, expected: "action index in 0..4" })
    }
}

/// Deterministic successor of `tile`; moves off the grid stay put.
pub fn successor(tile: usize, action: Action) -> usize {
    let (r, c) = (tile / SIDE, tile % SIDE);
    let (r, c) = match action {
        Action::Left => (r, c.saturating_sub(1)),
        Action::Down => ((r + 1).min(SIDE - 1), c),
        Action::Right => (r, (c + 1).min(SIDE - 1)),
        Action::Up => (r.saturating_sub(1), c),
    };
    r * SIDE + c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LakeEnv {
    pub grid: [Tile; N_TILES],
    pub layout_seed: u64,
    agent: usize,
    done: bool,
}

impl LakeEnv {
    pub fn from_holes(holes: &[usize], layout_seed: u64) -> Result<Self> {
        let mut grid = [Tile::Frozen; N_TILES];
        grid[START] = Tile::Start;
        grid[GOAL] = Tile::Goal;
        for &h in holes {
            if h == START || h == GOAL || h >= N_TILES {
                return Err(Error::Domain { value: h as f64, expected: "hole on a non-terminal tile" });
            }
            grid[h] = Tile::Hole;
        }
        Ok(Self { grid, layout_seed, agent: START, done: false })
    }

    pub fn holes(&self) -> Vec<usize> {
        (0..N_TILES).filter(|&t| self.grid[t] == Tile::Hole).collect()
    }

    pub fn position(&self) -> usize {
        self.agent
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn reset(&mut self) -> usize {
        self.agent = START;
        self.done = false;
        self.agent
    }

    /// Reward and termination for arriving on `tile`.
    pub fn outcome(&self, tile: usize) -> (f64, bool) {
        match self.grid[tile] {
            Tile::Goal => (GOAL_REWARD, true),
            Tile::Hole => (HOLE_REWARD, true),
            Tile::Frozen | Tile::Start => (STEP_REWARD, false),
        }
    }

    pub fn step(&mut self, action: Action) -> Result<(usize, f64, bool)> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        self.agent = successor(self.agent, action);
        let (reward, done) = self.outcome(self.agent);
        self.done = done;
        Ok((self.agent, reward, done))
    }

    /// Fewest moves from start to goal avoiding holes, if reachable.
    pub fn shortest_path(&self) -> Option<usize> {
        let mut dist = [usize::MAX; N_TILES];
        dist[START] = 0;
        let mut queue = VecDeque::from([START]);
        while let Some(t) = queue.pop_front() {
            if t == GOAL {
                return Some(dist[t]);
            }
            for a in Action::ALL {
                let n = successor(t, a);
                if self.grid[n] != Tile::Hole && dist[n] == usize::MAX {
                    dist[n] = dist[t] + 1;
                    queue.push_back(n);
                }
            }
        }
        None
    }

    pub fn render(&self) -> String {
        let mut s = String::with_capacity(N_TILES + SIDE);
        for (i, t) in self.grid.iter().enumerate() {
            s.push(match t {
                Tile::Frozen => 'F',
                Tile::Hole => 'H',
                Tile::Start => 'S',
                Tile::Goal => 'G',
            });
            if i % SIDE == SIDE - 1 {
                s.push('\n');
            }
        }
        s
    }
}

pub fn env_step(env: &mut LakeEnv, action: Action) -> Result<(usize, f64, bool)> {
    env.step(action)
}

/// Rejection-samples hole layouts until the shortest path is exactly six moves.
pub fn generate_lake(seed: u64) -> LakeEnv {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(LAYOUT_STREAM);
    loop {
        let holes: Vec<usize> = index::sample(&mut rng, N_TILES - 2, N_HOLES).into_iter().map(|i| i + 1).collect();
        let env = LakeEnv::from_holes(&holes, seed).expect("holes exclude start and goal");
        if env.shortest_path() == Some(SHORTEST_PATH) {
            return env;
        }
    }
}

/// Big-endian bits of the tile index.
pub fn encode_state(tile: usize) -> Result<[f64; 4]> {
    if tile >= N_TILES {
        return Err(Error::Domain { value: tile as f64, expected: "tile index in 0..16" });
    }
    Ok(std::array::from_fn(|b| ((tile >> (3 - b)) & 1) as f64))
}

/// Best undiscounted return from the start within `horizon` moves, by
/// backward induction over all tiles.
pub fn optimal_return(env: &LakeEnv, horizon: usize) -> f64 {
    let mut v = [0.0f64; N_TILES];
    for _ in 0..horizon {
        let mut next = [0.0f64; N_TILES];
        for (s, slot) in next.iter_mut().enumerate() {
            if matches!(env.grid[s], Tile::Hole | Tile::Goal) {
                continue;
            }
            *slot = Action::ALL
                .iter()
                .map(|&a| {
                    let t = successor(s, a);
                    let (r, done) = env.outcome(t);
                    r + if done { 0.0 } else { v[t] }
                })
                .fold(f64::NEG_INFINITY, f64::max);
        }
        v = next;
    }
    v[START]
}

/// Optimal discounted action values by value iteration to convergence.
pub fn optimal_q_values(env: &LakeEnv, gamma: f64) -> [[f64; 4]; N_TILES] {
    let mut v = [0.0f64; N_TILES];
    let mut q = [[0.0f64; 4]; N_TILES];
    for _ in 0..10_000 {
        let mut delta: f64 = 0.0;
        for s in 0..N_TILES {
            if matches!(env.grid[s], Tile::Hole | Tile::Goal) {
                continue;
            }
            for a in Action::ALL {
                let t = successor(s, a);
                let (r, done) = env.outcome(t);
                q[s][a.index()] = r + if done { 0.0 } else { gamma * v[t] };
            }
            let best = q[s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - v[s]).abs());
            v[s] = best;
        }
        if delta < 1e-14 {
            break;
        }
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: Action,
    pub reward: f64,
    pub next_state: usize,
    pub done: bool,
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { items: Vec::with_capacity(capacity), capacity, inserted: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[(self.inserted % self.capacity as u64) as usize] = t;
        }
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// `n` distinct transitions, uniformly without replacement.
    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Result<Vec<Transition>> {
        if n > self.items.len() {
            return Err(Error::Precondition(format!("cannot sample {n} from a buffer of {}", self.items.len())));
        }
        Ok(index::sample(rng, self.items.len(), n).into_iter().map(|i| self.items[i]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub episodes: usize,
    pub max_steps: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub target_update_every: usize,
    pub test_episodes: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            episodes: 500,
            max_steps: 100,
            gamma: 0.95,
            learning_rate: 0.01,
            batch_size: 16,
            replay_capacity: 1000,
            epsilon_start: 1.0,
            epsilon_decay: 0.99,
            epsilon_min: 0.01,
            target_update_every: 20,
            test_episodes: 50,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.max_steps > 0
            && self.batch_size > 0
            && self.replay_capacity >= self.batch_size
            && self.target_update_every > 0
            && self.learning_rate > 0.0
            && self.epsilon_decay > 0.0
            && self.epsilon_min > 0.0;
        let ranges = (0.0..=1.0).contains(&self.gamma)
            && self.epsilon_min <= self.epsilon_start
            && self.epsilon_start <= 1.0;
        if positive && ranges {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid DQN configuration {self:?}")))
        }
    }

    /// ε in force during episode `k` (0-based): decayed once after every episode.
    pub fn epsilon_after(&self, k: usize) -> f64 {
        let mut eps = self.epsilon_start;
        for _ in 0..k {
            eps = (eps * self.epsilon_decay).max(self.epsilon_min);
        }
        eps
    }
}

/// Element `i` is the mean of the last up-to-`window` values ending at `i`.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

pub fn greedy_action(model: &Model, tile: usize) -> Result<Action> {
    let q = model.predict(&encode_state(tile)?, OutputMode::Raw)?;
    Action::from_index(argmax(&q))
}

/// Mean return of greedy rollouts (at most `max_steps` moves each).
pub fn evaluate_policy(model: &Model, env: &LakeEnv, n_episodes: usize, max_steps: usize) -> Result<f64> {
    if n_episodes == 0 {
        return Err(Error::Empty("test episodes"));
    }
    let mut env = env.clone();
    let mut total = 0.0;
    for _ in 0..n_episodes {
        let mut s = env.reset();
        for _ in 0..max_steps {
            let (next, r, done) = env.step(greedy_action(model, s)?)?;
            total += r;
            s = next;
            if done {
                break;
            }
        }
    }
    Ok(total / n_episodes as f64)
}

pub fn is_solved(test_reward: f64) -> bool {
    (test_reward - OPTIMAL_RETURN).abs() < 1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub reward: f64,
    pub steps: usize,
    pub epsilon: f64,
    /// Cumulative training wall-clock at the end of this episode.
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlMetrics {
    pub task: String,
    pub model: ModelSpec,
    pub model_id: String,
    pub seed: u64,
    pub holes: Vec<usize>,
    pub episodes: Vec<EpisodeRecord>,
    pub test_reward: f64,
    pub solved: bool,
    /// Last value of the 50-episode moving average of training rewards.
    pub final_moving_average: f64,
    pub final_100_mean: f64,
    pub training_seconds: f64,
    pub circuit_seconds: f64,
    pub circuit_evals: u64,
}

#[derive(Debug, Clone)]
pub struct RlRun {
    pub metrics: RlMetrics,
    pub policy: Checkpoint,
}

struct Learner<'a> {
    policy: Model,
    target: Model,
    params: Vec<f64>,
    adam: AdamState<f64>,
    adam_cfg: AdamConfig,
    log: Option<&'a mut CircuitLog>,
    circuit_seconds: f64,
    circuit_evals: u64,
}

impl Learner<'_> {
    fn q_values(&mut self, episode: usize, tile: usize) -> Result<Vec<f64>> {
        let x = encode_state(tile)?;
        if let Some(log) = self.log.as_deref_mut() {
            log.record(episode, &self.policy, &x)?;
        }
        let t0 = Instant::now();
        let q = self.policy.predict(&x, OutputMode::Raw)?;
        self.tally(t0);
        Ok(q)
    }

    fn tally(&mut self, t0: Instant) {
        if self.policy.is_vqc() {
            self.circuit_seconds += t0.elapsed().as_secs_f64();
            self.circuit_evals += 1;
        }
    }

    fn train_batch(&mut self, episode: usize, batch: &[Transition], gamma: f64) -> Result<()> {
        let mut grad = vec![0.0; self.params.len()];
        let scale = 1.0 / batch.len() as f64;
        for t in batch {
            let target = if t.done {
                t.reward
            } else {
                let x_next = encode_state(t.next_state)?;
                let t0 = Instant::now();
                let q_next = self.target.predict(&x_next, OutputMode::Raw)?;
                self.tally(t0);
                t.reward + gamma * q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            let x = encode_state(t.state)?;
            if let Some(log) = self.log.as_deref_mut() {
                log.record(episode, &self.policy, &x)?;
            }
            let t0 = Instant::now();
            let out = self.policy.forward(&x, OutputMode::Raw)?;
            let a = t.action.index();
            let (_, g_a) = squared_error(out.values[a], target);
            let mut dq = vec![0.0; out.values.len()];
            dq[a] = g_a * scale;
            let g = self.policy.backward(out, &dq)?;
            self.tally(t0);
            grad.iter_mut().zip(g).for_each(|(acc, gi)| *acc += gi);
        }
        adam_step(&mut self.params, &grad, &mut self.adam, &self.adam_cfg)?;
        self.policy.set_params(&self.params)
    }

    fn sync_target(&mut self) -> Result<()> {
        self.target.set_params(&self.params)
    }
}

/// Deep Q-learning on the lake generated from `seed`. Model initialisation,
/// layout and agent randomness come from independent streams of that seed.
pub fn dqn_train(spec: &ModelSpec, config: &DqnConfig, seed: u64, log: Option<&mut CircuitLog>) -> Result<RlRun> {
    config.validate()?;
    if spec.n_inputs() != 4 || spec.n_outputs() != Action::ALL.len() {
        return Err(Error::Config(format!("{} does not map 4 state bits to 4 action values", spec.id())));
    }
    let mut env = generate_lake(seed);
    let policy: Model = spec.init(seed)?;
    let params = policy.params();
    let mut learner = Learner {
        target: policy.clone(),
        adam: AdamState::new(params.len()),
        adam_cfg: AdamConfig::with_lr(config.learning_rate),
        policy,
        params,
        log,
        circuit_seconds: 0.0,
        circuit_evals: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(AGENT_STREAM);
    let mut buffer = ReplayBuffer::new(config.replay_capacity);
    let mut epsilon = config.epsilon_start;
    let mut global_step = 0usize;
    let mut episodes = Vec::with_capacity(config.episodes);
    let mut train_time = 0.0;

    for episode in 1..=config.episodes {
        let t_ep = Instant::now();
        let mut s = env.reset();
        let mut reward = 0.0;
        let mut steps = 0;
        for _ in 0..config.max_steps {
            let action = if rng.gen::<f64>() < epsilon {
                Action::from_index(rng.gen_range(0..Action::ALL.len()))?
            } else {
                Action::from_index(argmax(&learner.q_values(episode, s)?))?
            };
            let (next, r, done) = env.step(action)?;
            buffer.push(Transition { state: s, action, reward: r, next_state: next, done });
            reward += r;
            steps += 1;
            s = next;
            if buffer.len() >= config.batch_size {
                let batch = buffer.sample(&mut rng, config.batch_size)?;
                learner.train_batch(episode, &batch, config.gamma)?;
            }
            global_step += 1;
            if global_step.is_multiple_of(config.target_update_every) {
                learner.sync_target()?;
            }
            if done {
                break;
            }
        }
        train_time += t_ep.elapsed().as_secs_f64();
        episodes.push(EpisodeRecord { episode, reward, steps, epsilon, elapsed_seconds: train_time });
        epsilon = (epsilon * config.epsilon_decay).max(config.epsilon_min);
    }

    let test_reward = evaluate_policy(&learner.policy, &env, config.test_episodes, config.max_steps)?;
    let rewards: Vec<f64> = episodes.iter().map(|e| e.reward).collect();
    let final_moving_average = moving_average(&rewards, 50).last().copied().unwrap_or(0.0);
    let tail = &rewards[rewards.len().saturating_sub(100)..];
    let final_100_mean = if tail.is_empty() { 0.0 } else { tail.iter().sum::<f64>() / tail.len() as f64 };
    let metrics = RlMetrics {
        task: "frozenlake".into(),
        model: spec.clone(),
        model_id: spec.id(),
        seed,
        holes: env.holes(),
        episodes,
        test_reward,
        solved: is_solved(test_reward),
        final_moving_average,
        final_100_mean,
        training_seconds: train_time,
        circuit_seconds: learner.circuit_seconds,
        circuit_evals: learner.circuit_evals,
    };
    Ok(RlRun { metrics, policy: Checkpoint::of(&learner.policy) })
}
