//! Occupation-number basis and the fermionic sign rule.

use crate::error::{Error, Result};

/// Default memory budget for state dynamics.
pub const DEFAULT_MEMORY_BUDGET: u128 = 4 << 30;
/// Amplitude vectors held at once during a Krylov step, plus the basis words.
const BYTES_PER_STATE: u128 = 8 + 16 * 24;
/// Words are `u64`.
pub const MAX_SITES: usize = 62;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sector {
    Full,
    Even,
    Odd,
}

impl Sector {
    pub fn contains(self, word: u64) -> bool {
        match self {
            Sector::Full => true,
            Sector::Even => word.count_ones().is_multiple_of(2),
            Sector::Odd => word.count_ones() % 2 == 1,
        }
    }

    /// Sector of states with the parity of `n` particles.
    pub fn of_parity(n: usize) -> Self {
        if n.is_multiple_of(2) {
            Sector::Even
        } else {
            Sector::Odd
        }
    }
}

/// Occupation words sorted ascending. Site `j` (1-based) is bit `j - 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockBasis {
    len: usize,
    sector: Sector,
    states: Vec<u64>,
}

/// Bytes needed to evolve a state over `dim` basis vectors.
pub fn memory_estimate(len: usize, sector: Sector) -> u128 {
    let dim: u128 = match sector {
        Sector::Full => 1u128 << len,
        _ => 1u128 << len.saturating_sub(1),
    };
    dim * BYTES_PER_STATE
}

pub fn enumerate_basis(len: usize, sector: Sector) -> Result<FockBasis> {
    enumerate_basis_within(len, sector, DEFAULT_MEMORY_BUDGET)
}

pub fn enumerate_basis_within(len: usize, sector: Sector, budget: u128) -> Result<FockBasis> {
    if len == 0 {
        return Err(Error::InvalidSpec("basis needs at least one site".into()));
    }
    let required = memory_estimate(len.min(MAX_SITES + 1), sector);
    if len > MAX_SITES || required > budget {
        return Err(Error::Resource { what: format!("{sector:?} basis of {len} sites"), required_bytes: required });
    }
    let states = match sector {
        Sector::Full => (0..1u64 << len).collect(),
        _ => {
            let want = if sector == Sector::Even { 0 } else { 1 };
            (0..1u64 << (len - 1))
                .map(|upper| {
                    let w = upper << 1;
                    w | ((w.count_ones() as u64 + want) & 1)
                })
                .collect()
        }
    };
    Ok(FockBasis { len, sector, states })
}

impl FockBasis {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn word(&self, index: usize) -> u64 {
        self.states[index]
    }

    /// Position of `word`, which must belong to the sector.
    #[inline]
    pub fn index(&self, word: u64) -> usize {
        (word >> self.shift()) as usize
    }

    /// Bits dropped from a word to obtain its position.
    #[inline]
    pub fn shift(&self) -> u32 {
        (self.sector != Sector::Full) as u32
    }

    pub fn find(&self, word: u64) -> Option<usize> {
        if word >> self.len != 0 || !self.sector.contains(word) {
            None
        } else {
            Some(self.index(word))
        }
    }
}

/// A creation (`dagger`) or annihilation operator on a 1-based site.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ladder {
    pub site: usize,
    pub dagger: bool,
}

impl Ladder {
    pub const fn create(site: usize) -> Self {
        Self { site, dagger: true }
    }

    pub const fn annihilate(site: usize) -> Self {
        Self { site, dagger: false }
    }

    pub fn adjoint(self) -> Self {
        Self { site: self.site, dagger: !self.dagger }
    }
}

/// Applies one ladder operator: `c_j` and `c†_j` pick up
/// `(-1)^(number of occupied sites before j)`.
#[inline]
pub fn apply_ladder(word: u64, op: Ladder) -> Option<(bool, u64)> {
    let bit = 1u64 << (op.site - 1);
    let occupied = word & bit != 0;
    if occupied == op.dagger {
        return None;
    }
    let negative = (word & (bit - 1)).count_ones() & 1 == 1;
    Some((negative, word ^ bit))
}

/// Applies the operator product `ops[0] ops[1] ... ops[k-1]` to a basis
/// word (rightmost factor first). Returns the sign and the resulting word,
/// or `None` if the product annihilates the word.
#[inline]
pub fn apply_ladders(word: u64, ops: &[Ladder]) -> Option<(f64, u64)> {
    let mut w = word;
    let mut negative = false;
    for &op in ops.iter().rev() {
        let (neg, next) = apply_ladder(w, op)?;
        negative ^= neg;
        w = next;
    }
    Some((if negative { -1.0 } else { 1.0 }, w))
}
