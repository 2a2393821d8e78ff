//! Four-room item-collection puzzle on a 32x32 grid.
//!
//! The agent sees a 7x7 egocentric window (itself at the bottom-centre,
//! looking "up" along its heading) plus its inventory. Walls and items block
//! forward movement; items are collected with `Pickup` on the tile in front.
//! Collecting an identity already in the inventory ends the episode.
//!
//! Observation layout (length 996): a channels-first `[20][7][7]` one-hot
//! block followed by 16 inventory flags. Channels are `Empty`, `Wall`, `Goal`,
//! `OutOfBounds`, then one channel per item identity (`shape * 8 + color`).

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{ActionIndex, EnvError, Environment, Observation, StepOutcome};

pub const GRID_SIZE: usize = 32;
pub const VIEW_SIZE: usize = 7;
pub const COLORS: usize = 8;
pub const ITEM_KINDS: usize = 2 * COLORS;
pub const CHANNELS: usize = 4 + ITEM_KINDS;
pub const VIEW_LEN: usize = CHANNELS * VIEW_SIZE * VIEW_SIZE;
pub const OBSERVATION_SIZE: usize = VIEW_LEN + ITEM_KINDS;
pub const ACTION_COUNT: usize = 4;
pub const MAX_STEPS: usize = 8192;
pub const ITEM_REWARD: f64 = 1.0 / ITEM_KINDS as f64;
pub const DUPLICATE_REWARD: f64 = -1.0;

pub const CH_EMPTY: usize = 0;
pub const CH_WALL: usize = 1;
pub const CH_GOAL: usize = 2;
pub const CH_OUT_OF_BOUNDS: usize = 3;
pub const CH_FIRST_ITEM: usize = 4;

const DIVIDER: usize = GRID_SIZE / 2;
const MAX_GENERATION_ATTEMPTS: usize = 1000;

/// Bonus for reaching the exit after `steps` actions.
pub fn goal_reward(steps: usize) -> f64 {
    1.0 - 0.8 * steps as f64 / MAX_STEPS as f64
}

/// Flat index of `(channel, row, col)` inside the view block.
pub fn view_index(channel: usize, row: usize, col: usize) -> usize {
    channel * VIEW_SIZE * VIEW_SIZE + row * VIEW_SIZE + col
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shape {
    Key,
    Circle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Item {
    pub shape: Shape,
    pub color: u8,
}

impl Item {
    pub fn new(shape: Shape, color: u8) -> Self {
        assert!((color as usize) < COLORS, "color {color} out of range");
        Self { shape, color }
    }

    pub fn index(self) -> usize {
        let shape = match self.shape {
            Shape::Key => 0,
            Shape::Circle => 1,
        };
        shape * COLORS + self.color as usize
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < ITEM_KINDS);
        let shape = if index < COLORS { Shape::Key } else { Shape::Circle };
        Self {
            shape,
            color: (index % COLORS) as u8,
        }
    }

    pub fn channel(self) -> usize {
        CH_FIRST_ITEM + self.index()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tile {
    Empty,
    Wall,
    Goal,
    Item(Item),
}

impl Tile {
    pub fn channel(self) -> usize {
        match self {
            Tile::Empty => CH_EMPTY,
            Tile::Wall => CH_WALL,
            Tile::Goal => CH_GOAL,
            Tile::Item(item) => item.channel(),
        }
    }

    pub fn blocks_movement(self) -> bool {
        matches!(self, Tile::Wall | Tile::Item(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    /// Unit step with `y` growing southwards.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Direction::North => (0, -1),
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
        }
    }

    pub fn turn_right(self) -> Self {
        match self {
            Direction::North => Direction::East,
            Direction::East => Direction::South,
            Direction::South => Direction::West,
            Direction::West => Direction::North,
        }
    }

    pub fn turn_left(self) -> Self {
        match self {
            Direction::North => Direction::West,
            Direction::West => Direction::South,
            Direction::South => Direction::East,
            Direction::East => Direction::North,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridAction {
    Forward = 0,
    Left = 1,
    Right = 2,
    Pickup = 3,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [
        GridAction::Forward,
        GridAction::Left,
        GridAction::Right,
        GridAction::Pickup,
    ];

    pub fn from_index(index: ActionIndex) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn index(self) -> ActionIndex {
        self as ActionIndex
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridConfig {
    /// Extra item copies (random identities) placed besides the 16 distinct items.
    pub duplicate_items: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { duplicate_items: 8 }
    }
}

impl GridConfig {
    pub fn distinct_only() -> Self {
        Self { duplicate_items: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridStepResult {
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub duplicate_pickup: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridState {
    tiles: Vec<Tile>,
    pub agent_pos: (usize, usize),
    pub agent_dir: Direction,
    pub inventory: [bool; ITEM_KINDS],
    pub steps: usize,
}

impl GridState {
    /// Bordered grid with the two dividing walls and no doors, items or goal.
    pub fn walled() -> Self {
        let mut tiles = vec![Tile::Empty; GRID_SIZE * GRID_SIZE];
        for y in 0..GRID_SIZE {
            for x in 0..GRID_SIZE {
                let edge = x == 0 || y == 0 || x == GRID_SIZE - 1 || y == GRID_SIZE - 1;
                if edge || x == DIVIDER || y == DIVIDER {
                    tiles[y * GRID_SIZE + x] = Tile::Wall;
                }
            }
        }
        Self {
            tiles,
            agent_pos: (1, 1),
            agent_dir: Direction::East,
            inventory: [false; ITEM_KINDS],
            steps: 0,
        }
    }

    pub fn generate(seed: u64, config: GridConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_GENERATION_ATTEMPTS {
            if let Some(state) = Self::try_generate(&mut rng, config) {
                return state;
            }
        }
        panic!("could not generate a connected grid with {config:?}");
    }

    fn try_generate(rng: &mut ChaCha8Rng, config: GridConfig) -> Option<Self> {
        let mut state = Self::walled();
        // one door per half of each dividing wall
        let doors = [
            (rng.gen_range(1..DIVIDER), DIVIDER),
            (rng.gen_range(DIVIDER + 1..GRID_SIZE - 1), DIVIDER),
            (DIVIDER, rng.gen_range(1..DIVIDER)),
            (DIVIDER, rng.gen_range(DIVIDER + 1..GRID_SIZE - 1)),
        ];
        for &(x, y) in &doors {
            state.set_tile(x, y, Tile::Empty);
        }
        let near_door = |x: usize, y: usize| {
            doors
                .iter()
                .any(|&(dx, dy)| dx.abs_diff(x) + dy.abs_diff(y) <= 1)
        };
        let free: Vec<(usize, usize)> = (0..GRID_SIZE * GRID_SIZE)
            .map(|i| (i % GRID_SIZE, i / GRID_SIZE))
            .filter(|&(x, y)| state.tile(x, y) == Tile::Empty && !near_door(x, y))
            .collect();

        let item_count = ITEM_KINDS + config.duplicate_items;
        let needed = item_count + 2;
        if free.len() < needed {
            panic!("grid has room for {} objects, {needed} requested", free.len());
        }
        let mut items: Vec<Item> = (0..ITEM_KINDS).map(Item::from_index).collect();
        for _ in 0..config.duplicate_items {
            items.push(Item::from_index(rng.gen_range(0..ITEM_KINDS)));
        }
        let picks = sample(rng, free.len(), needed);
        let mut positions = picks.iter().map(|i| free[i]);
        for item in items {
            let (x, y) = positions.next()?;
            state.set_tile(x, y, Tile::Item(item));
        }
        let (gx, gy) = positions.next()?;
        state.set_tile(gx, gy, Tile::Goal);
        state.agent_pos = positions.next()?;
        state.agent_dir = Direction::ALL[rng.gen_range(0..4)];

        state.is_fully_connected().then_some(state)
    }

    /// Every open tile is reachable from the agent and every item touches a reachable tile.
    pub fn is_fully_connected(&self) -> bool {
        let reachable = self.reachable_from(self.agent_pos);
        (0..GRID_SIZE * GRID_SIZE).all(|i| {
            let (x, y) = (i % GRID_SIZE, i / GRID_SIZE);
            match self.tiles[i] {
                Tile::Wall => true,
                Tile::Empty | Tile::Goal => reachable[i],
                Tile::Item(_) => neighbours(x, y).any(|(nx, ny)| reachable[ny * GRID_SIZE + nx]),
            }
        })
    }

    /// Flood fill over tiles the agent can stand on.
    pub fn reachable_from(&self, start: (usize, usize)) -> Vec<bool> {
        let mut seen = vec![false; GRID_SIZE * GRID_SIZE];
        let mut queue = VecDeque::new();
        seen[start.1 * GRID_SIZE + start.0] = true;
        queue.push_back(start);
        while let Some((x, y)) = queue.pop_front() {
            for (nx, ny) in neighbours(x, y) {
                let i = ny * GRID_SIZE + nx;
                if !seen[i] && !self.tiles[i].blocks_movement() {
                    seen[i] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
        seen
    }

    pub fn tile(&self, x: usize, y: usize) -> Tile {
        self.tiles[y * GRID_SIZE + x]
    }

    pub fn set_tile(&mut self, x: usize, y: usize, tile: Tile) {
        self.tiles[y * GRID_SIZE + x] = tile;
    }

    /// Tile at signed coordinates; `None` outside the grid.
    pub fn tile_at(&self, x: i64, y: i64) -> Option<Tile> {
        let in_bounds = (0..GRID_SIZE as i64).contains(&x) && (0..GRID_SIZE as i64).contains(&y);
        in_bounds.then(|| self.tile(x as usize, y as usize))
    }

    pub fn items_on_grid(&self) -> Vec<Item> {
        self.tiles
            .iter()
            .filter_map(|t| match t {
                Tile::Item(item) => Some(*item),
                _ => None,
            })
            .collect()
    }

    pub fn has_collected(&self, item: Item) -> bool {
        self.inventory[item.index()]
    }

    fn front_coords(&self) -> (i64, i64) {
        let (dx, dy) = self.agent_dir.delta();
        (self.agent_pos.0 as i64 + dx, self.agent_pos.1 as i64 + dy)
    }

    /// The tile one step ahead; `Wall` outside the grid.
    pub fn front_tile(&self) -> Tile {
        let (x, y) = self.front_coords();
        self.tile_at(x, y).unwrap_or(Tile::Wall)
    }

    /// Item ahead of the agent that is already in the inventory.
    pub fn duplicate_ahead(&self) -> bool {
        matches!(self.front_tile(), Tile::Item(item) if self.has_collected(item))
    }

    /// Item ahead of the agent that is not yet in the inventory.
    pub fn new_item_ahead(&self) -> bool {
        matches!(self.front_tile(), Tile::Item(item) if !self.has_collected(item))
    }

    pub fn step(&mut self, action: GridAction) -> GridStepResult {
        self.steps += 1;
        let mut result = GridStepResult {
            reward: 0.0,
            terminated: false,
            truncated: false,
            duplicate_pickup: false,
        };
        match action {
            GridAction::Left => self.agent_dir = self.agent_dir.turn_left(),
            GridAction::Right => self.agent_dir = self.agent_dir.turn_right(),
            GridAction::Forward => {
                let (x, y) = self.front_coords();
                match self.tile_at(x, y) {
                    Some(Tile::Empty) => self.agent_pos = (x as usize, y as usize),
                    Some(Tile::Goal) => {
                        self.agent_pos = (x as usize, y as usize);
                        result.reward = goal_reward(self.steps);
                        result.terminated = true;
                    }
                    _ => {}
                }
            }
            GridAction::Pickup => {
                let (x, y) = self.front_coords();
                if let Some(Tile::Item(item)) = self.tile_at(x, y) {
                    if self.has_collected(item) {
                        result.reward = DUPLICATE_REWARD;
                        result.terminated = true;
                        result.duplicate_pickup = true;
                    } else {
                        self.set_tile(x as usize, y as usize, Tile::Empty);
                        self.inventory[item.index()] = true;
                        result.reward = ITEM_REWARD;
                    }
                }
            }
        }
        if !result.terminated && self.steps >= MAX_STEPS {
            result.truncated = true;
        }
        result
    }

    /// World coordinates shown in view cell `(row, col)`.
    pub fn view_cell_coords(&self, row: usize, col: usize) -> (i64, i64) {
        let forward = (VIEW_SIZE - 1 - row) as i64;
        let lateral = col as i64 - (VIEW_SIZE / 2) as i64;
        let (fx, fy) = self.agent_dir.delta();
        let (rx, ry) = self.agent_dir.turn_right().delta();
        (
            self.agent_pos.0 as i64 + forward * fx + lateral * rx,
            self.agent_pos.1 as i64 + forward * fy + lateral * ry,
        )
    }

    pub fn encode_observation(&self) -> Observation {
        let mut values = vec![0.0; OBSERVATION_SIZE];
        for row in 0..VIEW_SIZE {
            for col in 0..VIEW_SIZE {
                let (x, y) = self.view_cell_coords(row, col);
                let channel = self.tile_at(x, y).map_or(CH_OUT_OF_BOUNDS, Tile::channel);
                values[view_index(channel, row, col)] = 1.0;
            }
        }
        for (k, &held) in self.inventory.iter().enumerate() {
            values[VIEW_LEN + k] = if held { 1.0 } else { 0.0 };
        }
        Observation::new(values)
    }
}

fn neighbours(x: usize, y: usize) -> impl Iterator<Item = (usize, usize)> {
    let candidates = [
        (x.wrapping_sub(1), y),
        (x + 1, y),
        (x, y.wrapping_sub(1)),
        (x, y + 1),
    ];
    candidates
        .into_iter()
        .filter(|&(nx, ny)| nx < GRID_SIZE && ny < GRID_SIZE)
}

#[derive(Debug, Clone)]
pub struct GridWorld {
    config: GridConfig,
    state: GridState,
    done: bool,
}

impl Default for GridWorld {
    fn default() -> Self {
        Self::new(GridConfig::default())
    }
}

impl GridWorld {
    pub fn new(config: GridConfig) -> Self {
        Self {
            config,
            state: GridState::walled(),
            done: true,
        }
    }

    /// Starts an episode from a hand-built state.
    pub fn from_state(config: GridConfig, state: GridState) -> Self {
        Self {
            config,
            state,
            done: false,
        }
    }

    pub fn config(&self) -> GridConfig {
        self.config
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }
}

impl Environment for GridWorld {
    fn observation_size(&self) -> usize {
        OBSERVATION_SIZE
    }

    fn action_count(&self) -> usize {
        ACTION_COUNT
    }

    fn default_step_cap(&self) -> usize {
        MAX_STEPS
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.state = GridState::generate(seed, self.config);
        self.done = false;
        self.state.encode_observation()
    }

    fn step(&mut self, action: ActionIndex) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let grid_action = GridAction::from_index(action).ok_or(EnvError::ActionOutOfRange {
            action,
            action_count: ACTION_COUNT,
        })?;
        let result = self.state.step(grid_action);
        self.done = result.terminated || result.truncated;
        Ok(StepOutcome {
            observation: self.state.encode_observation(),
            reward: result.reward,
            terminated: result.terminated,
            truncated: result.truncated,
            invalid_action: false,
            duplicate_pickup: result.duplicate_pickup,
        })
    }

    fn observe(&self) -> Observation {
        self.state.encode_observation()
    }
}
