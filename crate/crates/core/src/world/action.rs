use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

/// Eight horizontal moves, take-off, landing and hold.
pub const NUM_ACTIONS: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heading {
    East,
    West,
    North,
    South,
    NorthEast,
    SouthEast,
    NorthWest,
    SouthWest,
}

impl Heading {
    pub const ALL: [Heading; 8] = [
        Heading::East,
        Heading::West,
        Heading::North,
        Heading::South,
        Heading::NorthEast,
        Heading::SouthEast,
        Heading::NorthWest,
        Heading::SouthWest,
    ];

    /// Unit displacement in the horizontal plane.
    pub fn unit(self) -> [f64; 2] {
        const D: f64 = FRAC_1_SQRT_2;
        match self {
            Heading::East => [1.0, 0.0],
            Heading::West => [-1.0, 0.0],
            Heading::North => [0.0, 1.0],
            Heading::South => [0.0, -1.0],
            Heading::NorthEast => [D, D],
            Heading::SouthEast => [D, -D],
            Heading::NorthWest => [-D, D],
            Heading::SouthWest => [-D, -D],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Move(Heading),
    Ascend,
    Descend,
    Hold,
}

impl Action {
    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0..=7 => Some(Action::Move(Heading::ALL[index])),
            8 => Some(Action::Ascend),
            9 => Some(Action::Descend),
            10 => Some(Action::Hold),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Action::Move(h) => Heading::ALL.iter().position(|&x| x == h).unwrap(),
            Action::Ascend => 8,
            Action::Descend => 9,
            Action::Hold => 10,
        }
    }

    /// Converts policy outputs into actions. Panics on an out-of-range index.
    pub fn joint(indices: &[usize]) -> Vec<Action> {
        indices
            .iter()
            .map(|&i| Action::from_index(i).unwrap_or_else(|| panic!("action index {i} out of range")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trips() {
        for i in 0..NUM_ACTIONS {
            assert_eq!(Action::from_index(i).unwrap().index(), i);
        }
        assert_eq!(Action::from_index(NUM_ACTIONS), None);
    }

    #[test]
    fn headings_are_unit_length() {
        for h in Heading::ALL {
            let [x, y] = h.unit();
            assert!((x.hypot(y) - 1.0).abs() < 1e-15);
        }
    }
}
