//! The 30×30 noisy-TV grid world.
//!
//! Columns 0–14 emit a fixed 200-bit pattern per cell; columns 15–29 emit a
//! fresh Bernoulli(0.5) vector on every visit. Cell-to-cell transitions are
//! deterministic.

use std::fmt;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRID_SIZE: usize = 30;
pub const NUM_CELLS: usize = GRID_SIZE * GRID_SIZE;
/// Columns `0..FIRST_STOCHASTIC_COL` are deterministic.
pub const FIRST_STOCHASTIC_COL: usize = 15;
pub const NUM_DETERMINISTIC: usize = GRID_SIZE * FIRST_STOCHASTIC_COL;
pub const OBS_DIM: usize = 200;
pub const STATE_DIM: usize = 2 * GRID_SIZE;
/// Expected L2 error of the conditional-mean prediction (0.5 everywhere) on a
/// stochastic cell: √(200 · 0.25).
pub const NOISE_FLOOR: f64 = 7.0710678118654755;
/// Pattern rotation per row step; a column step rotates by one.
pub const ROW_SHIFT: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    row: usize,
    col: usize,
}

impl Cell {
    pub const START: Cell = Cell { row: 15, col: 15 };

    pub fn new(row: usize, col: usize) -> Result<Self> {
        if row < GRID_SIZE && col < GRID_SIZE {
            Ok(Self { row, col })
        } else {
            Err(Error::Contract(format!("cell ({row}, {col}) is outside the grid")))
        }
    }

    pub fn row(self) -> usize {
        self.row
    }

    pub fn col(self) -> usize {
        self.col
    }

    /// Row-major index in `0..NUM_CELLS`.
    pub fn index(self) -> usize {
        self.row * GRID_SIZE + self.col
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < NUM_CELLS, "cell index {index} out of range");
        Self { row: index / GRID_SIZE, col: index % GRID_SIZE }
    }

    /// True on the right half of the standard layout.
    pub fn is_stochastic(self) -> bool {
        self.col >= FIRST_STOCHASTIC_COL
    }

    pub fn all() -> impl Iterator<Item = Cell> {
        (0..NUM_CELLS).map(Cell::from_index)
    }

    pub fn deterministic_cells() -> impl Iterator<Item = Cell> {
        Cell::all().filter(|c| !c.is_stochastic())
    }

    pub fn stochastic_cells() -> impl Iterator<Item = Cell> {
        Cell::all().filter(|c| c.is_stochastic())
    }

    /// Neighbour reached by `action`, if it stays on the grid.
    pub fn neighbor(self, action: Action) -> Option<Cell> {
        let (row, col) = (self.row, self.col);
        match action {
            Action::Up => row.checked_sub(1).map(|row| Cell { row, col }),
            Action::Down => (row + 1 < GRID_SIZE).then_some(Cell { row: row + 1, col }),
            Action::Left => col.checked_sub(1).map(|col| Cell { row, col }),
            Action::Right => (col + 1 < GRID_SIZE).then_some(Cell { row, col: col + 1 }),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Up decreases the row, Left decreases the column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];
}

/// A 200-dimensional binary observation stored as 0.0/1.0 floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub fn new(bits: Vec<f64>) -> Result<Self> {
        if bits.len() != OBS_DIM {
            return Err(Error::Shape { context: "observation", expected: OBS_DIM, got: bits.len() });
        }
        if bits.iter().any(|&b| b != 0.0 && b != 1.0) {
            return Err(Error::Contract("observation entries must be 0 or 1".into()));
        }
        Ok(Self(bits))
    }

    fn from_words(words: &[u64; 4]) -> Self {
        Self((0..OBS_DIM).map(|k| ((words[k / 64] >> (k % 64)) & 1) as f64).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1.0).count()
    }

    /// Cyclic left rotation: `out[k] = self[(k + shift) mod 200]`.
    pub fn rotated(&self, shift: usize) -> Self {
        let mut bits = self.0.clone();
        bits.rotate_left(shift % OBS_DIM);
        Self(bits)
    }
}

/// Which cells emit noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GridLayout {
    /// Left half deterministic, right half stochastic.
    #[default]
    NoisyTv,
    /// Every cell emits noise. The left-half patterns are still generated so
    /// the world model can be scored against them, but they are never emitted.
    AllStochastic,
}

/// Factored one-hot encoding: ones at `row` and `30 + col`.
pub fn encode_state(cell: Cell) -> Vec<f64> {
    let mut v = vec![0.0; STATE_DIM];
    v[cell.row] = 1.0;
    v[GRID_SIZE + cell.col] = 1.0;
    v
}

/// Pattern rotation for a deterministic cell.
pub fn pattern_shift(cell: Cell) -> usize {
    (ROW_SHIFT * cell.row + cell.col) % OBS_DIM
}

#[derive(Debug, Clone)]
pub struct NoisyTvEnv {
    layout: GridLayout,
    base_pattern: Observation,
    det_patterns: Vec<Observation>,
    obs_rng: ChaCha8Rng,
}

fn random_bits(rng: &mut ChaCha8Rng) -> Observation {
    let mut words = [0u64; 4];
    for w in &mut words {
        *w = rng.next_u64();
    }
    Observation::from_words(&words)
}

impl NoisyTvEnv {
    /// `pattern_rng` draws the shared base vector; `obs_rng` drives the noise.
    pub fn new(layout: GridLayout, mut pattern_rng: ChaCha8Rng, obs_rng: ChaCha8Rng) -> Self {
        let base_pattern = random_bits(&mut pattern_rng);
        let det_patterns = Cell::deterministic_cells().map(|c| base_pattern.rotated(pattern_shift(c))).collect();
        Self { layout, base_pattern, det_patterns, obs_rng }
    }

    /// Standard layout with both streams derived from `seed`.
    pub fn from_seed(seed: u64) -> Self {
        use crate::rng::{stream, Stream};
        Self::new(GridLayout::NoisyTv, stream(seed, Stream::EnvPatterns), stream(seed, Stream::EnvNoise))
    }

    pub fn layout(&self) -> GridLayout {
        self.layout
    }

    pub fn base_pattern(&self) -> &Observation {
        &self.base_pattern
    }

    pub fn num_patterns(&self) -> usize {
        self.det_patterns.len()
    }

    pub fn is_stochastic(&self, cell: Cell) -> bool {
        match self.layout {
            GridLayout::NoisyTv => cell.is_stochastic(),
            GridLayout::AllStochastic => true,
        }
    }

    fn pattern_index(cell: Cell) -> usize {
        cell.row * FIRST_STOCHASTIC_COL + cell.col
    }

    pub fn observe(&mut self, cell: Cell) -> Observation {
        if self.is_stochastic(cell) {
            random_bits(&mut self.obs_rng)
        } else {
            self.det_patterns[Self::pattern_index(cell)].clone()
        }
    }

    /// Ground-truth pattern of a left-half cell. Never touches the noise stream.
    pub fn deterministic_pattern(&self, cell: Cell) -> Result<&Observation> {
        if cell.is_stochastic() {
            return Err(Error::Contract(format!("{cell} is stochastic and has no fixed pattern")));
        }
        Ok(&self.det_patterns[Self::pattern_index(cell)])
    }

    pub fn valid_actions(&self, cell: Cell) -> Vec<Action> {
        Action::ALL.into_iter().filter(|&a| cell.neighbor(a).is_some()).collect()
    }

    pub fn step(&self, cell: Cell, action: Action) -> Result<Cell> {
        cell.neighbor(action).ok_or_else(|| Error::Contract(format!("{action:?} from {cell} leaves the grid")))
    }
}
