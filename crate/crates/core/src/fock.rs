//! Many-fermion occupation basis and k-body operator action.
//!
//! Modes are labelled `1..=l`; mode `j` is stored in bit `j - 1`. Basis
//! states and k-body index tuples are both listed in lexicographic order of
//! their occupied-mode tuples, so the left-filled state comes first and the
//! right-filled state last.
//!
//! Sign convention: an elementary `a_j` or `a†_j` acting on a state picks up
//! `(-1)^m` where `m` counts occupied modes with label below `j`. Composite
//! operators are applied right to left, with
//! `ψ†_α = a†_{α1} … a†_{αk}` and `ψ_γ = (ψ†_γ)† = a_{γk} … a_{γ1}`.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest supported number of modes (one 64-bit word per state).
pub const MAX_MODES: usize = 64;

/// Default cap on the many-body dimension `binomial(l, n)`.
pub const DEFAULT_DIMENSION_CAP: usize = 20_000;

/// Fermionic sign, `+1` or `-1`.
pub type Sign = i8;

/// Exact binomial coefficient, `None` on overflow of `u128`.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// One configuration of fermions over the modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupationState(u64);

impl OccupationState {
    pub const VACUUM: OccupationState = OccupationState(0);

    pub fn from_bits(bits: u64) -> Self {
        OccupationState(bits)
    }

    /// Builds a state from 1-based mode labels; order and duplicates are ignored.
    pub fn from_modes(modes: &[usize]) -> Result<Self> {
        let mut bits = 0u64;
        for &m in modes {
            if m == 0 || m > MAX_MODES {
                return Err(Error::MalformedIndex {
                    modes: modes.to_vec(),
                    reason: format!("mode {m} outside 1..={MAX_MODES}"),
                });
            }
            bits |= 1 << (m - 1);
        }
        Ok(OccupationState(bits))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn particle_count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_occupied(self, mode: usize) -> bool {
        mode >= 1 && mode <= MAX_MODES && self.0 >> (mode - 1) & 1 == 1
    }

    /// Occupied modes in increasing order (1-based).
    pub fn modes(self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.particle_count());
        let mut rest = self.0;
        while rest != 0 {
            let tz = rest.trailing_zeros() as usize;
            out.push(tz + 1);
            rest &= rest - 1;
        }
        out
    }

    /// `(-1)^(occupied modes below `mode`)`.
    fn parity_below(self, mode: usize) -> Sign {
        let below = self.0 & ((1u64 << (mode - 1)) - 1);
        if below.count_ones() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// Elementary annihilator `a_mode`.
    pub fn annihilate(self, mode: usize) -> Option<(OccupationState, Sign)> {
        if !self.is_occupied(mode) {
            return None;
        }
        let sign = self.parity_below(mode);
        Some((OccupationState(self.0 & !(1u64 << (mode - 1))), sign))
    }

    /// Elementary creator `a†_mode`.
    pub fn create(self, mode: usize) -> Option<(OccupationState, Sign)> {
        if mode == 0 || mode > MAX_MODES || self.is_occupied(mode) {
            return None;
        }
        let sign = self.parity_below(mode);
        Some((OccupationState(self.0 | (1u64 << (mode - 1))), sign))
    }
}

/// A strictly increasing tuple of 1-based mode labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OperatorIndex {
    modes: Vec<usize>,
}

impl OperatorIndex {
    pub fn new(modes: Vec<usize>, l: usize) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::MalformedIndex {
                modes,
                reason: "empty tuple".into(),
            });
        }
        if let Some(&m) = modes.iter().find(|&&m| m == 0 || m > l) {
            return Err(Error::MalformedIndex {
                reason: format!("mode {m} outside 1..={l}"),
                modes,
            });
        }
        if modes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::MalformedIndex {
                modes,
                reason: "modes must be strictly increasing".into(),
            });
        }
        Ok(OperatorIndex { modes })
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn rank(&self) -> usize {
        self.modes.len()
    }

    pub fn mask(&self) -> u64 {
        self.modes.iter().fold(0, |acc, &m| acc | 1 << (m - 1))
    }
}

/// Applies `ψ_γ = a_{γk} … a_{γ1}` (rightmost factor first).
pub fn annihilate_tuple(state: OccupationState, modes: &[usize]) -> Option<(OccupationState, Sign)> {
    let mut s = state;
    let mut sign: Sign = 1;
    for &m in modes {
        let (next, sg) = s.annihilate(m)?;
        s = next;
        sign *= sg;
    }
    Some((s, sign))
}

/// Applies `ψ†_α = a†_{α1} … a†_{αk}` (rightmost factor first).
pub fn create_tuple(state: OccupationState, modes: &[usize]) -> Option<(OccupationState, Sign)> {
    let mut s = state;
    let mut sign: Sign = 1;
    for &m in modes.iter().rev() {
        let (next, sg) = s.create(m)?;
        s = next;
        sign *= sg;
    }
    Some((s, sign))
}

/// Action of `ψ†_create ψ_annihilate` on a basis state.
///
/// Returns `Ok(None)` when the operator annihilates the state.
pub fn apply_pair(
    state: OccupationState,
    create: &OperatorIndex,
    annihilate: &OperatorIndex,
) -> Result<Option<(OccupationState, Sign)>> {
    if create.rank() != annihilate.rank() {
        return Err(Error::invalid(
            "annihilate",
            format!(
                "rank {} differs from creation rank {}",
                annihilate.rank(),
                create.rank()
            ),
        ));
    }
    Ok(annihilate_tuple(state, annihilate.modes()).and_then(|(mid, s1)| {
        create_tuple(mid, create.modes()).map(|(out, s2)| (out, s1 * s2))
    }))
}

/// All strictly increasing `k`-tuples drawn from `items`, lexicographic.
pub(crate) fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    if k == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        // advance the rightmost position that still has room
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == n - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        idx[pos - 1] += 1;
        for p in pos..k {
            idx[p] = idx[p - 1] + 1;
        }
    }
    out
}

/// All `binomial(l, k)` index tuples in lexicographic order.
pub fn enumerate_kbody_indices(l: usize, k: usize) -> Result<Vec<OperatorIndex>> {
    if l == 0 || l > MAX_MODES {
        return Err(Error::invalid("l", format!("{l} outside 1..={MAX_MODES}")));
    }
    if k == 0 || k > l {
        return Err(Error::invalid("k", format!("{k} outside 1..={l}")));
    }
    let modes: Vec<usize> = (1..=l).collect();
    Ok(combinations(&modes, k)
        .into_iter()
        .map(|m| OperatorIndex { modes: m })
        .collect())
}

/// Ordered set of `k`-tuples with a reverse lookup from the occupation mask.
#[derive(Clone, Debug)]
pub struct IndexSpace {
    l: usize,
    k: usize,
    tuples: Vec<OperatorIndex>,
    position: HashMap<u64, usize>,
}

impl IndexSpace {
    pub fn new(l: usize, k: usize) -> Result<Self> {
        let tuples = enumerate_kbody_indices(l, k)?;
        let position = tuples
            .iter()
            .enumerate()
            .map(|(i, t)| (t.mask(), i))
            .collect();
        Ok(IndexSpace {
            l,
            k,
            tuples,
            position,
        })
    }

    pub fn modes(&self) -> usize {
        self.l
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[OperatorIndex] {
        &self.tuples
    }

    pub fn get(&self, i: usize) -> &OperatorIndex {
        &self.tuples[i]
    }

    pub fn position_of_mask(&self, mask: u64) -> Option<usize> {
        self.position.get(&mask).copied()
    }
}

/// The `binomial(l, n)` occupation states of `n` fermions on `l` modes.
#[derive(Clone, Debug)]
pub struct ManyBodyBasis {
    l: usize,
    n: usize,
    states: Vec<OccupationState>,
    index: HashMap<OccupationState, usize>,
}

impl ManyBodyBasis {
    /// Enumerates the basis under the default dimension cap.
    pub fn enumerate(l: usize, n: usize) -> Result<Self> {
        Self::enumerate_with_cap(l, n, DEFAULT_DIMENSION_CAP)
    }

    pub fn enumerate_with_cap(l: usize, n: usize, cap: usize) -> Result<Self> {
        if l < 2 || l > MAX_MODES {
            return Err(Error::invalid("l", format!("{l} outside 2..={MAX_MODES}")));
        }
        if n < 1 || n >= l {
            return Err(Error::invalid("n", format!("{n} outside 1..{l}")));
        }
        let dimension = binomial(l, n).unwrap_or(u128::MAX);
        if dimension > cap as u128 {
            return Err(Error::DimensionOverflow { dimension, cap });
        }
        let modes: Vec<usize> = (1..=l).collect();
        let states: Vec<OccupationState> = combinations(&modes, n)
            .into_iter()
            .map(|m| OccupationState(m.iter().fold(0, |acc, &j| acc | 1 << (j - 1))))
            .collect();
        let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Ok(ManyBodyBasis {
            l,
            n,
            states,
            index,
        })
    }

    pub fn modes(&self) -> usize {
        self.l
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[OccupationState] {
        &self.states
    }

    pub fn state(&self, position: usize) -> OccupationState {
        self.states[position]
    }

    /// 0-based position of a state, if it belongs to the basis.
    pub fn index_of(&self, state: OccupationState) -> Option<usize> {
        self.index.get(&state).copied()
    }

    /// Position of the state with modes `1..=n` occupied.
    pub fn left_filled(&self) -> usize {
        0
    }

    /// Position of the state with modes `l-n+1..=l` occupied.
    pub fn right_filled(&self) -> usize {
        self.states.len() - 1
    }

    /// Calls `f(row, column, create, annihilate, sign)` for every nonzero
    /// `⟨row| ψ†_create ψ_annihilate |column⟩`, with tuple positions taken
    /// from `space`.
    pub(crate) fn for_each_connection<F>(&self, space: &IndexSpace, mut f: F)
    where
        F: FnMut(usize, usize, usize, usize, Sign),
    {
        let k = space.rank();
        let all = if self.l == MAX_MODES {
            u64::MAX
        } else {
            (1u64 << self.l) - 1
        };
        for (col, &state) in self.states.iter().enumerate() {
            for gamma in combinations(&state.modes(), k) {
                let Some((mid, s1)) = annihilate_tuple(state, &gamma) else {
                    continue;
                };
                let gamma_pos = space
                    .position_of_mask(gamma.iter().fold(0, |acc, &m| acc | 1 << (m - 1)))
                    .expect("annihilated tuple lies in index space");
                let empty = OccupationState(!mid.bits() & all).modes();
                for alpha in combinations(&empty, k) {
                    let Some((out, s2)) = create_tuple(mid, &alpha) else {
                        continue;
                    };
                    let row = self.index[&out];
                    let alpha_pos = space
                        .position_of_mask(alpha.iter().fold(0, |acc, &m| acc | 1 << (m - 1)))
                        .expect("created tuple lies in index space");
                    f(row, col, alpha_pos, gamma_pos, s1 * s2);
                }
            }
        }
    }
}

/// Which basis states a rank-`k` operator couples, as a dense boolean matrix.
pub fn structural_adjacency(basis: &ManyBodyBasis, k: usize) -> Result<Vec<Vec<bool>>> {
    if k < 1 || k > basis.particles() {
        return Err(Error::invalid(
            "k",
            format!("{k} outside 1..={}", basis.particles()),
        ));
    }
    let space = IndexSpace::new(basis.modes(), k)?;
    let dim = basis.dimension();
    let mut adj = vec![vec![false; dim]; dim];
    basis.for_each_connection(&space, |row, col, _, _, _| {
        adj[row][col] = true;
    });
    Ok(adj)
}

/// Off-diagonal degree of every node of an adjacency matrix.
pub fn off_diagonal_degrees(adj: &[Vec<bool>]) -> Vec<usize> {
    adj.iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().filter(|&(j, &b)| b && j != i).count())
        .collect()
}
