//! Single-player "The Game": place the cards 2..=99 on two ascending and two
//! descending piles, with the backward-ten exception.
//!
//! Actions encode `(hand_slot, pile)` as `hand_slot * 4 + pile`. The observation
//! is the four pile tops followed by the eight sorted hand slots, scaled by
//! 1/100, with empty slots encoded as `0.0`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{ActionIndex, EnvError, Environment, Observation, StepOutcome};

pub const HAND_SIZE: usize = 8;
pub const PILE_COUNT: usize = 4;
pub const ACTION_COUNT: usize = HAND_SIZE * PILE_COUNT;
pub const OBSERVATION_SIZE: usize = PILE_COUNT + HAND_SIZE;
pub const CARD_COUNT: u32 = 98;
pub const LOWEST_CARD: i32 = 2;
pub const HIGHEST_CARD: i32 = 99;
/// Hand slot without a card.
pub const EMPTY_SLOT: i32 = -1;
pub const VALID_MOVE_REWARD: f64 = 0.1;
pub const INVALID_MOVE_REWARD: f64 = -0.1;
pub const DEFAULT_STEP_CAP: usize = 1000;

const BACKWARD_STEP: i32 = 10;
const PLAYS_PER_REFILL: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PileDirection {
    Ascending,
    Descending,
}

impl PileDirection {
    pub fn of(pile: usize) -> Self {
        if pile < 2 {
            PileDirection::Ascending
        } else {
            PileDirection::Descending
        }
    }

    /// Whether `card` may be placed on a pile of this direction showing `top`.
    pub fn accepts(self, top: i32, card: i32) -> bool {
        match self {
            PileDirection::Ascending => card > top || card == top - BACKWARD_STEP,
            PileDirection::Descending => card < top || card == top + BACKWARD_STEP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CardMove {
    pub hand_slot: usize,
    pub pile: usize,
}

impl CardMove {
    pub fn new(hand_slot: usize, pile: usize) -> Self {
        debug_assert!(hand_slot < HAND_SIZE && pile < PILE_COUNT);
        Self { hand_slot, pile }
    }

    pub fn from_action(action: ActionIndex) -> Self {
        Self {
            hand_slot: action / PILE_COUNT,
            pile: action % PILE_COUNT,
        }
    }

    pub fn action(self) -> ActionIndex {
        self.hand_slot * PILE_COUNT + self.pile
    }

    pub fn all() -> impl Iterator<Item = CardMove> {
        (0..ACTION_COUNT).map(CardMove::from_action)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveResult {
    pub reward: f64,
    pub invalid: bool,
    pub terminated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CardGameState {
    pub piles: [i32; PILE_COUNT],
    /// Sorted ascending; empty slots (`-1`) come first.
    pub hand: [i32; HAND_SIZE],
    /// Remaining cards; the next card drawn is the last element.
    pub draw_pile: Vec<i32>,
    pub played_count: u32,
    pub plays_since_refill: u8,
}

impl CardGameState {
    pub fn new_game(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut deck: Vec<i32> = (LOWEST_CARD..=HIGHEST_CARD).collect();
        deck.shuffle(&mut rng);
        let mut state = Self {
            piles: [1, 1, 100, 100],
            hand: [EMPTY_SLOT; HAND_SIZE],
            draw_pile: deck,
            played_count: 0,
            plays_since_refill: 0,
        };
        state.refill();
        state
    }

    /// Builds a state from explicit parts; the hand is padded and sorted.
    pub fn from_parts(piles: [i32; PILE_COUNT], hand: &[i32], draw_pile: Vec<i32>) -> Self {
        assert!(hand.len() <= HAND_SIZE, "hand holds at most {HAND_SIZE} cards");
        let mut slots = [EMPTY_SLOT; HAND_SIZE];
        slots[..hand.len()].copy_from_slice(hand);
        slots.sort_unstable();
        let in_play = slots.iter().filter(|&&c| c != EMPTY_SLOT).count() as u32;
        let played_count = CARD_COUNT.saturating_sub(in_play + draw_pile.len() as u32);
        Self {
            piles,
            hand: slots,
            draw_pile,
            played_count,
            plays_since_refill: 0,
        }
    }

    pub fn is_valid_move(&self, mv: CardMove) -> bool {
        let card = self.hand[mv.hand_slot];
        card != EMPTY_SLOT && PileDirection::of(mv.pile).accepts(self.piles[mv.pile], card)
    }

    pub fn valid_moves(&self) -> impl Iterator<Item = CardMove> + '_ {
        CardMove::all().filter(move |&mv| self.is_valid_move(mv))
    }

    pub fn has_any_valid_move(&self) -> bool {
        self.valid_moves().next().is_some()
    }

    /// Whether a hand card fits on at least one pile.
    pub fn is_playable(&self, card: i32) -> bool {
        card != EMPTY_SLOT
            && (0..PILE_COUNT).any(|p| PileDirection::of(p).accepts(self.piles[p], card))
    }

    pub fn cards_in_hand(&self) -> usize {
        self.hand.iter().filter(|&&c| c != EMPTY_SLOT).count()
    }

    pub fn is_finished(&self) -> bool {
        self.played_count == CARD_COUNT || !self.has_any_valid_move()
    }

    /// Plays `mv`. Invalid moves leave the state untouched.
    pub fn apply_move(&mut self, mv: CardMove) -> MoveResult {
        if !self.is_valid_move(mv) {
            return MoveResult {
                reward: INVALID_MOVE_REWARD,
                invalid: true,
                terminated: false,
            };
        }
        self.piles[mv.pile] = self.hand[mv.hand_slot];
        self.hand[mv.hand_slot] = EMPTY_SLOT;
        self.hand.sort_unstable();
        self.played_count += 1;
        self.plays_since_refill += 1;
        if self.plays_since_refill == PLAYS_PER_REFILL {
            self.plays_since_refill = 0;
            self.refill();
        }
        let mut reward = VALID_MOVE_REWARD;
        let terminated = self.is_finished();
        if terminated {
            reward += f64::from(self.played_count);
        }
        MoveResult {
            reward,
            invalid: false,
            terminated,
        }
    }

    fn refill(&mut self) {
        for slot in self.hand.iter_mut() {
            if *slot != EMPTY_SLOT {
                continue;
            }
            match self.draw_pile.pop() {
                Some(card) => *slot = card,
                None => break,
            }
        }
        self.hand.sort_unstable();
    }

    pub fn encode_observation(&self) -> Observation {
        let mut values = Vec::with_capacity(OBSERVATION_SIZE);
        values.extend(self.piles.iter().map(|&t| f64::from(t) / 100.0));
        values.extend(self.hand.iter().map(|&c| encode_card(c)));
        Observation::new(values)
    }
}

pub(crate) fn encode_card(card: i32) -> f64 {
    if card == EMPTY_SLOT {
        0.0
    } else {
        f64::from(card) / 100.0
    }
}

/// Episodic wrapper around [`CardGameState`].
#[derive(Debug, Clone)]
pub struct CardGame {
    state: CardGameState,
    done: bool,
}

impl Default for CardGame {
    fn default() -> Self {
        Self::new()
    }
}

impl CardGame {
    pub fn new() -> Self {
        Self {
            state: CardGameState::new_game(0),
            done: true,
        }
    }

    pub fn from_state(state: CardGameState) -> Self {
        let done = state.is_finished();
        Self { state, done }
    }

    pub fn state(&self) -> &CardGameState {
        &self.state
    }
}

impl Environment for CardGame {
    fn observation_size(&self) -> usize {
        OBSERVATION_SIZE
    }

    fn action_count(&self) -> usize {
        ACTION_COUNT
    }

    fn default_step_cap(&self) -> usize {
        DEFAULT_STEP_CAP
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.state = CardGameState::new_game(seed);
        self.done = false;
        self.state.encode_observation()
    }

    fn step(&mut self, action: ActionIndex) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        if action >= ACTION_COUNT {
            return Err(EnvError::ActionOutOfRange {
                action,
                action_count: ACTION_COUNT,
            });
        }
        let result = self.state.apply_move(CardMove::from_action(action));
        self.done = result.terminated;
        Ok(StepOutcome {
            observation: self.state.encode_observation(),
            reward: result.reward,
            terminated: result.terminated,
            truncated: false,
            invalid_action: result.invalid,
            duplicate_pickup: false,
        })
    }

    fn observe(&self) -> Observation {
        self.state.encode_observation()
    }
}
