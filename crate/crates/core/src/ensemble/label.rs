//! Trinary labels of the virtual density matrices.
//!
//! Slot `s ∈ 1..=M` of a label records what happens to a pending photon that
//! will meet the atom `s` steps after the label's time: nothing (`X`), pending
//! on the unprimed side (`Y`), or pending on the primed side (`Z`). Slot `s`
//! is base-3 digit `s − 1` of the label index, so the all-`X` label is 0.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Trit {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Trit {
    fn from_digit(d: usize) -> Trit {
        match d {
            0 => Trit::X,
            1 => Trit::Y,
            _ => Trit::Z,
        }
    }

    /// `Y ↔ Z`, the label of the Hermitian-conjugate slot.
    pub fn swapped(self) -> Trit {
        match self {
            Trit::X => Trit::X,
            Trit::Y => Trit::Z,
            Trit::Z => Trit::Y,
        }
    }
}

/// Fixed-length trit string; `trits[s - 1]` is slot `s`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TrinaryLabel {
    pub trits: Vec<Trit>,
}

impl TrinaryLabel {
    pub fn empty(slots: usize) -> Self {
        Self { trits: vec![Trit::X; slots] }
    }

    pub fn slots(&self) -> usize {
        self.trits.len()
    }

    pub fn encode(&self) -> usize {
        self.trits.iter().rev().fold(0, |acc, t| acc * 3 + *t as usize)
    }

    pub fn decode(index: usize, slots: usize) -> Result<Self> {
        if index >= label_count(slots) {
            return Err(Error::LabelOutOfRange { index, slots });
        }
        let mut rest = index;
        let trits = (0..slots)
            .map(|_| {
                let t = Trit::from_digit(rest % 3);
                rest /= 3;
                t
            })
            .collect();
        Ok(Self { trits })
    }

    /// Slots holding `Y` (the unprimed pending list).
    pub fn y_slots(&self) -> Vec<usize> {
        self.slots_with(Trit::Y)
    }

    /// Slots holding `Z` (the primed pending list).
    pub fn z_slots(&self) -> Vec<usize> {
        self.slots_with(Trit::Z)
    }

    fn slots_with(&self, which: Trit) -> Vec<usize> {
        self.trits
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == which)
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn conjugate(&self) -> Self {
        Self { trits: self.trits.iter().map(|t| t.swapped()).collect() }
    }
}

/// `3^slots`.
pub fn label_count(slots: usize) -> usize {
    3usize.pow(slots as u32)
}

/// Index of the label with every `Y` and `Z` exchanged.
pub fn conjugate_index(mut index: usize) -> usize {
    let mut out = 0;
    let mut place = 1;
    while index > 0 {
        let d = index % 3;
        let swapped = match d {
            1 => 2,
            2 => 1,
            _ => 0,
        };
        out += swapped * place;
        place *= 3;
        index /= 3;
    }
    out
}
