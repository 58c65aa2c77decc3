//! Σ_k for every allocation size k, the optimal size k*, and the per-size
//! winner cutoffs i_k*.
//!
//! Each bid is a point (rank, cap) weighted by its amount, ranks taken in
//! canonical order. Σ_k is the weight of the first k points with cap ≥ k,
//! so it needs two dominance queries over `[1, i] × [k, ∞)`: a count (binary
//! searched over `i` to find i_k*) and a weight sum.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{Allocation, Instance};
use crate::money::Money;

/// Which k wins when several allocation sizes reach the same Σ_k.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieK {
    Smallest,
    #[default]
    Largest,
}

impl TieK {
    /// True if size `a` beats size `b` on an exact tie.
    pub fn prefers(self, a: usize, b: usize) -> bool {
        match self {
            TieK::Smallest => a < b,
            TieK::Largest => a > b,
        }
    }
}

impl FromStr for TieK {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smallest" => Ok(TieK::Smallest),
            "largest" => Ok(TieK::Largest),
            other => Err(Error::input(format!("tie rule must be smallest|largest, got {other:?}"))),
        }
    }
}

impl fmt::Display for TieK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieK::Smallest => "smallest",
            TieK::Largest => "largest",
        })
    }
}

/// One 64-position block of a level: zeros before the block, and a bit per
/// position set when that position's bit at this level is 0.
#[derive(Clone, Copy, Debug, Default)]
struct Block {
    rank: u32,
    zero_bits: u64,
}

/// Static dominance count/sum structure: a wavelet matrix over caps in rank
/// order. Counts come from rank-indexed bitvectors; weight sums use per-level
/// prefix sums that are only built on the first [`RangeStructure::sum`] call.
///
/// Answers `count` and `sum` over `[1, i] × [k, ∞)` in O(log n).
#[derive(Clone, Debug)]
pub struct RangeStructure {
    n: usize,
    levels: usize,
    /// Blocks per level, `n / 64 + 1`.
    stride: usize,
    /// `blocks[l * stride + b]`.
    blocks: Vec<Block>,
    /// Zeros in the whole of each level.
    level_zeros: Vec<u32>,
    /// Cap clamped to n, in rank order.
    caps: Vec<u32>,
    prefix_weight: Vec<i64>,
    zero_weight: OnceLock<Vec<i64>>,
}

impl RangeStructure {
    pub fn build(instance: &Instance) -> Result<Self> {
        let n = instance.len();
        if n == 0 {
            return Err(Error::input("cannot build a range structure over an empty instance"));
        }
        if n >= u32::MAX as usize {
            return Err(Error::input("instance too large"));
        }
        // Caps above n behave exactly like n.
        let caps: Vec<u32> = instance.ranked().iter().map(|b| b.cap.min(n) as u32).collect();
        let levels = (usize::BITS - n.leading_zeros()) as usize;
        let stride = n / 64 + 1;
        let mut blocks = vec![Block::default(); levels * stride];
        let mut level_zeros = Vec::with_capacity(levels);
        let mut prefix_weight = Vec::with_capacity(n + 1);
        prefix_weight.push(0);
        for b in instance.ranked() {
            prefix_weight.push(prefix_weight.last().unwrap() + b.amount.micros());
        }
        let mut seq = caps.clone();
        let mut ones = vec![0u32; n];
        for level in 0..levels {
            let bit = levels - 1 - level;
            let row = &mut blocks[level * stride..(level + 1) * stride];
            let mut zeros = 0u32;
            for (chunk, block) in seq.chunks(64).zip(row.iter_mut()) {
                block.rank = zeros;
                let mut word = 0u64;
                for (j, &cap) in chunk.iter().enumerate() {
                    word |= (((cap >> bit) & 1) as u64 ^ 1) << j;
                }
                block.zero_bits = word;
                zeros += word.count_ones();
            }
            if n.is_multiple_of(64) {
                row[stride - 1].rank = zeros;
            }
            level_zeros.push(zeros);
            // Stable partition, zeros first, without data-dependent branches.
            let (mut z, mut o) = (0usize, 0usize);
            for p in 0..n {
                let cap = seq[p];
                let one = ((cap >> bit) & 1) as usize;
                seq[z] = cap;
                ones[o] = cap;
                z += one ^ 1;
                o += one;
            }
            seq[z..].copy_from_slice(&ones[..o]);
        }
        Ok(RangeStructure {
            n,
            levels,
            stride,
            blocks,
            level_zeros,
            caps,
            prefix_weight,
            zero_weight: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Weight of the point at `rank` (1-based).
    #[inline]
    fn weight(&self, rank: usize) -> i64 {
        self.prefix_weight[rank] - self.prefix_weight[rank - 1]
    }

    /// Zeros among the first `p` positions of `level`.
    #[inline]
    fn zeros(&self, level: usize, p: usize) -> usize {
        let block = self.blocks[level * self.stride + p / 64];
        let mask = (1u64 << (p % 64)).wrapping_sub(1);
        block.rank as usize + (block.zero_bits & mask).count_ones() as usize
    }

    /// `zero_weight[l * (n + 1) + p]`: weight of the zeros among the first
    /// `p` positions of level `l`.
    fn zero_weight(&self) -> &[i64] {
        self.zero_weight.get_or_init(|| {
            let n = self.n;
            let mut out = vec![0i64; self.levels * (n + 1)];
            let mut seq: Vec<(u32, i64)> =
                self.caps.iter().enumerate().map(|(r, &c)| (c, self.weight(r + 1))).collect();
            let mut next = Vec::with_capacity(n);
            for level in 0..self.levels {
                let bit = self.levels - 1 - level;
                let base = level * (n + 1);
                for (p, &(cap, w)) in seq.iter().enumerate() {
                    let zero = (cap >> bit) & 1 == 0;
                    out[base + p + 1] = out[base + p] + if zero { w } else { 0 };
                }
                next.clear();
                next.extend(seq.iter().filter(|(c, _)| (c >> bit) & 1 == 0));
                next.extend(seq.iter().filter(|(c, _)| (c >> bit) & 1 == 1));
                std::mem::swap(&mut seq, &mut next);
            }
            out
        })
    }

    /// Walks the levels for `[1, rank] × [min_cap, ∞)`, calling `below` with
    /// `(level, lo, hi)` for every range of points that falls under `min_cap`.
    /// Returns the number of those points.
    #[inline]
    fn walk(&self, rank: usize, min_cap: usize, mut below: impl FnMut(usize, usize, usize)) -> usize {
        let (mut lo, mut hi) = (0usize, rank);
        let mut count = 0;
        for level in 0..self.levels {
            if lo == hi {
                break;
            }
            let bit = self.levels - 1 - level;
            let (z_lo, z_hi) = (self.zeros(level, lo), self.zeros(level, hi));
            if (min_cap >> bit) & 1 == 1 {
                count += z_hi - z_lo;
                below(level, lo, hi);
                let z_all = self.level_zeros[level] as usize;
                lo = z_all + (lo - z_lo);
                hi = z_all + (hi - z_hi);
            } else {
                lo = z_lo;
                hi = z_hi;
            }
        }
        count
    }

    /// Count and weight of points in `[1, rank] × [min_cap, ∞)`.
    ///
    /// Caps are stored clamped to n, so `min_cap > n` always reports zero.
    pub fn count_and_sum(&self, rank: usize, min_cap: usize) -> (usize, Money) {
        let rank = rank.min(self.n);
        let total = self.prefix_weight[rank];
        if min_cap <= 1 {
            return (rank, Money::from_micros(total));
        }
        if min_cap >> self.levels != 0 {
            return (0, Money::ZERO);
        }
        let zw = self.zero_weight();
        let stride = self.n + 1;
        let mut below_weight = 0i64;
        let below = self.walk(rank, min_cap, |level, lo, hi| {
            below_weight += zw[level * stride + hi] - zw[level * stride + lo];
        });
        (rank - below, Money::from_micros(total - below_weight))
    }

    pub fn count(&self, rank: usize, min_cap: usize) -> usize {
        let rank = rank.min(self.n);
        if min_cap <= 1 {
            return rank;
        }
        if min_cap >> self.levels != 0 {
            return 0;
        }
        rank - self.walk(rank, min_cap, |_, _, _| {})
    }

    pub fn sum(&self, rank: usize, min_cap: usize) -> Money {
        self.count_and_sum(rank, min_cap).1
    }

    /// Smallest rank `i` with `count(i, min_cap) == m`, by binary search over
    /// `[m, n]`; `None` if fewer than `m` points have cap ≥ `min_cap`.
    pub fn find_nth(&self, min_cap: usize, m: usize) -> Option<usize> {
        if m == 0 {
            return Some(0);
        }
        if m > self.n || self.count(self.n, min_cap) < m {
            return None;
        }
        let (mut lo, mut hi) = (m, self.n);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.count(mid, min_cap) >= m {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Some(lo)
    }

    /// As [`find_nth`](Self::find_nth), knowing the answer is at least
    /// `start`: scans a short stretch from `start`, then gallops, so a run of
    /// monotone lookups costs one count plus O(log gap) each.
    pub fn find_nth_from(&self, min_cap: usize, m: usize, start: usize) -> Option<usize> {
        if m == 0 {
            return Some(0);
        }
        if m > self.n {
            return None;
        }
        let mut lo = start.max(m);
        if lo >= self.n {
            return (self.count(self.n, min_cap) >= m).then_some(self.n);
        }
        let mut c = self.count(lo, min_cap);
        if c >= m {
            return Some(lo);
        }
        // Short gaps are cheaper to scan than to search.
        for (j, &cap) in self.caps.iter().enumerate().skip(lo).take(64) {
            c += (cap as usize >= min_cap) as usize;
            if c == m {
                return Some(j + 1);
            }
            lo = j + 1;
        }
        if lo == self.n {
            return None;
        }
        let mut step = 1;
        let mut hi = (lo + step).min(self.n);
        while self.count(hi, min_cap) < m {
            if hi == self.n {
                return None;
            }
            lo = hi;
            step *= 2;
            hi = (lo + step).min(self.n);
        }
        // count(lo) < m ≤ count(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.count(mid, min_cap) >= m {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.n {
            return Err(Error::input(format!("k = {k} outside 1..={}", self.n)));
        }
        Ok(())
    }

    /// i_k*: rank of the k-th bidder (canonical order) whose cap is ≥ k.
    pub fn find_i_star(&self, k: usize) -> Result<Option<usize>> {
        self.check_k(k)?;
        Ok(self.find_nth(k, k))
    }

    pub fn sigma(&self, k: usize) -> Result<Option<Money>> {
        Ok(self.find_i_star(k)?.map(|i| self.sum(i, k)))
    }
}

/// Σ_k and i_k* for k = 1..=len, plus the optimal size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SigmaTable {
    sigma: Vec<Option<Money>>,
    i_star: Vec<Option<usize>>,
    k_star: usize,
    tie: TieK,
}

impl SigmaTable {
    fn from_columns(sigma: Vec<Option<Money>>, i_star: Vec<Option<usize>>, tie: TieK) -> Self {
        let mut k_star = 0;
        let mut best: Option<Money> = None;
        for (idx, s) in sigma.iter().enumerate() {
            let k = idx + 1;
            let Some(s) = *s else { continue };
            let better = match best {
                None => true,
                Some(b) => s > b || (s == b && tie.prefers(k, k_star)),
            };
            if better {
                best = Some(s);
                k_star = k;
            }
        }
        SigmaTable { sigma, i_star, k_star, tie }
    }

    /// Largest k covered by the table.
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// Σ_k, or `None` when fewer than k bidders accept k copies (or k is out
    /// of the table's range).
    pub fn sigma(&self, k: usize) -> Option<Money> {
        k.checked_sub(1).and_then(|i| self.sigma.get(i).copied().flatten())
    }

    pub fn i_star(&self, k: usize) -> Option<usize> {
        k.checked_sub(1).and_then(|i| self.i_star.get(i).copied().flatten())
    }

    pub fn k_star(&self) -> usize {
        self.k_star
    }

    pub fn tie(&self) -> TieK {
        self.tie
    }

    /// Σ_{k*}, the best achievable total bid.
    pub fn best(&self) -> Money {
        self.sigma(self.k_star).expect("k* indexes a defined entry")
    }

    /// `(k, Σ_k)` for every defined entry.
    pub fn defined(&self) -> impl Iterator<Item = (usize, Money)> + '_ {
        self.sigma.iter().enumerate().filter_map(|(i, s)| s.map(|s| (i + 1, s)))
    }
}

/// JSON shape: arrays indexed by k, with index 0 unused (null).
impl Serialize for SigmaTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View<'a> {
            sigma: Vec<Option<&'a Money>>,
            i_star: Vec<Option<usize>>,
            k_star: usize,
        }
        let view = View {
            sigma: std::iter::once(None).chain(self.sigma.iter().map(Option::as_ref)).collect(),
            i_star: std::iter::once(None).chain(self.i_star.iter().copied()).collect(),
            k_star: self.k_star,
        };
        view.serialize(serializer)
    }
}

/// Full table through the range structure: O(n log² n) worst case, usually
/// O(n log n) thanks to the galloping search.
pub fn sigma_table(instance: &Instance, tie: TieK) -> Result<SigmaTable> {
    let rs = RangeStructure::build(instance)?;
    Ok(sigma_table_with(&rs, tie))
}

pub fn sigma_table_with(rs: &RangeStructure, tie: TieK) -> SigmaTable {
    let n = rs.len();
    let mut sigma = vec![None; n];
    let mut i_star = vec![None; n];
    // i_k* never decreases in k, and once fewer than k bidders have cap ≥ k
    // the same holds for every larger k. Gallop forward from the previous
    // cutoff instead of searching all of [k, n].
    let mut eligible = vec![0usize; n + 2];
    for &cap in &rs.caps {
        eligible[cap as usize] += 1;
    }
    for k in (1..=n).rev() {
        eligible[k] += eligible[k + 1];
    }
    let mut prev = 0;
    for k in 1..=n {
        if eligible[k] < k {
            break;
        }
        let i = rs.find_nth_from(k, k, prev).expect("enough eligible points");
        prev = i;
        i_star[k - 1] = Some(i);
    }
    // Σ_k incrementally: going from k - 1 to k drops the cap = k - 1 points
    // up to the old cutoff and adds the eligible points the cutoff moved past.
    // Points grouped by cap, ranks ascending, with running weight sums.
    let mut offsets = vec![0usize; n + 2];
    for &cap in &rs.caps {
        offsets[cap as usize + 1] += 1;
    }
    for c in 1..=n + 1 {
        offsets[c] += offsets[c - 1];
    }
    let mut fill = offsets.clone();
    let mut ranks = vec![0u32; n];
    let mut running = vec![0i64; n];
    for (r, &cap) in rs.caps.iter().enumerate() {
        let w = rs.weight(r + 1);
        let slot = fill[cap as usize];
        fill[cap as usize] += 1;
        ranks[slot] = r as u32 + 1;
        running[slot] = w + if slot > offsets[cap as usize] { running[slot - 1] } else { 0 };
    }
    let (mut total, mut cut) = (0i64, 0usize);
    for k in 1..=n {
        let Some(i) = i_star[k - 1] else { break };
        if k > 1 {
            let (lo, hi) = (offsets[k - 1], offsets[k]);
            let m = ranks[lo..hi].partition_point(|&r| r as usize <= cut);
            if m > 0 {
                total -= running[lo + m - 1];
            }
        }
        for r in cut..i {
            if rs.caps[r] as usize >= k {
                total += rs.weight(r + 1);
            }
        }
        cut = i;
        sigma[k - 1] = Some(Money::from_micros(total));
    }
    SigmaTable::from_columns(sigma, i_star, tie)
}

/// Direct scan for each k ≤ `ell`: O(n·ell). Reference path for the range
/// structure and the right choice when caps are bounded by a small constant.
pub fn sigma_table_naive(instance: &Instance, ell: usize, tie: TieK) -> Result<SigmaTable> {
    if instance.is_empty() {
        return Err(Error::input("empty instance"));
    }
    if ell == 0 {
        return Err(Error::input("ell must be >= 1"));
    }
    let ell = ell.min(instance.len());
    let mut sigma = Vec::with_capacity(ell);
    let mut i_star = Vec::with_capacity(ell);
    for k in 1..=ell {
        let mut taken = 0;
        let mut total = Money::ZERO;
        let mut cutoff = None;
        for (r, bid) in instance.ranked().iter().enumerate() {
            if bid.cap >= k {
                taken += 1;
                total += bid.amount;
                if taken == k {
                    cutoff = Some(r + 1);
                    break;
                }
            }
        }
        i_star.push(cutoff);
        sigma.push(cutoff.map(|_| total));
    }
    Ok(SigmaTable::from_columns(sigma, i_star, tie))
}

/// The first `k` bidders in canonical order whose cap is at least `k`.
pub fn allocate(instance: &Instance, k: usize) -> Result<Allocation> {
    let winners: Vec<_> = instance
        .ranked()
        .iter()
        .filter(|b| b.cap >= k)
        .take(k)
        .map(|b| b.bidder_id)
        .collect();
    if winners.len() < k {
        return Err(Error::NoAllocation { k });
    }
    Ok(Allocation { k, winners })
}
