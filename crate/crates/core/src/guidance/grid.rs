//! Grid-world guidance: every model targets picking up an item already held.

use crate::env::{ActionIndex, Observation};
use crate::grid_world::{
    view_index, GridAction, GridState, GridWorld, ACTION_COUNT, CH_FIRST_ITEM, CH_WALL,
    ITEM_KINDS, VIEW_LEN, VIEW_SIZE,
};

use super::{ActionMask, ConstraintModel};

/// Re-encodes every visible item that is already in the inventory as a wall.
///
/// Only the observation changes; the inventory block is left as is.
pub fn mask_grid_observation(state: &GridState, observation: &Observation) -> Observation {
    let mut masked = observation.clone();
    let values = masked.values_mut();
    for kind in 0..ITEM_KINDS {
        if !state.inventory[kind] {
            continue;
        }
        let channel = CH_FIRST_ITEM + kind;
        for row in 0..VIEW_SIZE {
            for col in 0..VIEW_SIZE {
                let at = view_index(channel, row, col);
                if values[at] != 0.0 {
                    values[at] = 0.0;
                    values[view_index(CH_WALL, row, col)] = 1.0;
                }
            }
        }
    }
    debug_assert_eq!(values.len(), VIEW_LEN + ITEM_KINDS);
    masked
}

/// Turns right instead of picking up a duplicate; everything else passes.
pub fn replace_grid_action(state: &GridState, action: ActionIndex) -> ActionIndex {
    if action == GridAction::Pickup.index() && state.duplicate_ahead() {
        GridAction::Right.index()
    } else {
        action
    }
}

/// Pickup only in front of a new item (and then nothing else); movement otherwise.
pub fn grid_action_mask(state: &GridState) -> ActionMask {
    let new_item = state.new_item_ahead();
    let allowed = GridAction::ALL
        .iter()
        .map(|&a| (a == GridAction::Pickup) == new_item)
        .collect::<Vec<_>>();
    debug_assert_eq!(allowed.len(), ACTION_COUNT);
    ActionMask::from_allowed(allowed)
}

impl ConstraintModel for GridWorld {
    fn mask_observation(&self, observation: &Observation) -> Observation {
        mask_grid_observation(self.state(), observation)
    }

    fn replace_action(&self, _observation: &Observation, action: ActionIndex) -> ActionIndex {
        replace_grid_action(self.state(), action)
    }

    fn action_mask(&self, _observation: &Observation) -> ActionMask {
        grid_action_mask(self.state())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_world::{Direction, GridConfig, Item, Shape, Tile, CHANNELS};

    fn facing(tile: Tile, held: Option<Item>) -> GridState {
        let mut state = GridState::walled();
        state.agent_pos = (5, 5);
        state.agent_dir = Direction::North;
        state.set_tile(5, 4, tile);
        if let Some(item) = held {
            state.inventory[item.index()] = true;
        }
        state
    }

    fn cell(obs: &Observation, row: usize, col: usize) -> Vec<f64> {
        (0..CHANNELS)
            .map(|c| obs.values()[view_index(c, row, col)])
            .collect()
    }

    #[test]
    fn duplicate_in_view_looks_like_wall() {
        let item = Item::new(Shape::Circle, 4);
        let mut state = facing(Tile::Item(item), Some(item));
        state.set_tile(4, 3, Tile::Item(Item::new(Shape::Key, 1)));
        let obs = state.encode_observation();
        let masked = mask_grid_observation(&state, &obs);
        // boundary wall straight ahead at distance 5 is an ordinary wall cell
        let wall_cell = cell(&obs, 1, 3);
        assert_eq!(wall_cell[CH_WALL], 1.0);
        assert_eq!(cell(&masked, 5, 3), wall_cell);
        // the not-yet-held key stays visible
        assert_eq!(cell(&masked, 4, 2), cell(&obs, 4, 2));
        assert_eq!(&masked.values()[VIEW_LEN..], &obs.values()[VIEW_LEN..]);
    }

    #[test]
    fn nothing_held_means_identity_mask() {
        let state = GridState::generate(4, GridConfig::default());
        let obs = state.encode_observation();
        assert_eq!(mask_grid_observation(&state, &obs), obs);
    }

    #[test]
    fn replacement_only_for_duplicate_pickup() {
        let item = Item::new(Shape::Key, 2);
        let dup = facing(Tile::Item(item), Some(item));
        assert_eq!(replace_grid_action(&dup, 3), GridAction::Right.index());
        for a in 0..3 {
            assert_eq!(replace_grid_action(&dup, a), a);
        }
        let fresh = facing(Tile::Item(item), None);
        assert_eq!(replace_grid_action(&fresh, 3), 3);
    }

    #[test]
    fn mask_cases() {
        let item = Item::new(Shape::Key, 2);
        let fresh = facing(Tile::Item(item), None);
        assert_eq!(grid_action_mask(&fresh).entries(), &[false, false, false, true]);
        let empty = facing(Tile::Empty, None);
        assert_eq!(grid_action_mask(&empty).entries(), &[true, true, true, false]);
        let dup = facing(Tile::Item(item), Some(item));
        assert_eq!(grid_action_mask(&dup).entries(), &[true, true, true, false]);
    }
}
