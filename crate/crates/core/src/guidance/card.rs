//! Card-game guidance: hide dead cards, replace invalid plays, mask invalid plays.

use crate::card_game::{
    encode_card, CardGame, CardGameState, CardMove, ACTION_COUNT, EMPTY_SLOT, HAND_SIZE,
    PILE_COUNT,
};
use crate::constraint::{solve_minimize, Cop, Csp, Value};
use crate::env::{ActionIndex, Observation};

use super::{ActionMask, ConstraintModel};

/// Shows every hand card that fits on no pile as an empty slot.
///
/// Slot positions are kept, so action indices still address the same cards.
pub fn mask_card_observation(state: &CardGameState, observation: &Observation) -> Observation {
    let mut masked = observation.clone();
    for (slot, &card) in state.hand.iter().enumerate() {
        if card != EMPTY_SLOT && !state.is_playable(card) {
            masked.values_mut()[PILE_COUNT + slot] = encode_card(EMPTY_SLOT);
        }
    }
    masked
}

/// Observation-mask model as an optimisation problem: one variable per hand
/// slot with domain `{card, -1}`, every shown card must be playable, and the
/// objective counts the slots that differ from the true hand.
pub fn build_observation_mask_cop(state: &CardGameState) -> Cop {
    let mut csp = Csp::new();
    let mut vars = Vec::with_capacity(HAND_SIZE);
    for (slot, &card) in state.hand.iter().enumerate() {
        let var = csp
            .add_variable(
                format!("slot{slot}"),
                [Value::from(card), Value::from(EMPTY_SLOT)],
            )
            .expect("domain holds the original card");
        let probe = state.clone();
        csp.add_constraint(&[var], move |v| {
            v[0] == Value::from(EMPTY_SLOT) || probe.is_playable(v[0] as i32)
        })
        .expect("scope is declared");
        vars.push(var);
    }
    let original: Vec<Value> = state.hand.iter().map(|&c| Value::from(c)).collect();
    Cop::new(csp, &vars, move |v| {
        v.iter().zip(&original).filter(|(a, b)| a != b).count() as i64
    })
    .expect("scope is declared")
}

/// Hand shown by the optimal COP solution, and the number of changed slots.
pub fn masked_hand_from_cop(state: &CardGameState) -> Option<([i32; HAND_SIZE], i64)> {
    let cop = build_observation_mask_cop(state);
    let (assignment, changes) = solve_minimize(&cop)?;
    let mut hand = [EMPTY_SLOT; HAND_SIZE];
    for (slot, value) in hand.iter_mut().enumerate() {
        *value = assignment.get(slot) as i32;
    }
    Some((hand, changes))
}

/// Keeps a valid play; otherwise picks the valid play with the smallest
/// card/pile gap (lowest action index on ties). Without any valid play the
/// action passes through.
pub fn replace_card_action(state: &CardGameState, action: ActionIndex) -> ActionIndex {
    if state.is_valid_move(CardMove::from_action(action)) {
        return action;
    }
    state
        .valid_moves()
        .min_by_key(|mv| {
            let gap = (state.hand[mv.hand_slot] - state.piles[mv.pile]).abs();
            (gap, mv.action())
        })
        .map_or(action, CardMove::action)
}

/// Allows exactly the valid plays; all ones when nothing is playable.
pub fn card_action_mask(state: &CardGameState) -> ActionMask {
    let allowed: Vec<bool> = CardMove::all().map(|mv| state.is_valid_move(mv)).collect();
    if allowed.iter().any(|&a| a) {
        ActionMask::from_allowed(allowed)
    } else {
        ActionMask::all(ACTION_COUNT)
    }
}

impl ConstraintModel for CardGame {
    fn mask_observation(&self, observation: &Observation) -> Observation {
        mask_card_observation(self.state(), observation)
    }

    fn replace_action(&self, _observation: &Observation, action: ActionIndex) -> ActionIndex {
        replace_card_action(self.state(), action)
    }

    fn action_mask(&self, _observation: &Observation) -> ActionMask {
        card_action_mask(self.state())
    }
}
