//! Index-modulation codec: bits to chirp-index combinations plus PSK symbols.
//!
//! The first `p1` bits of a block pick a combination of `L` chirp shifts out
//! of `M` through lexicographic combinatorial ranking; the remaining `p2` bits
//! are Gray-labelled `H`-PSK phases, one symbol per selected index in
//! ascending index order. With a minimum index separation `S > 1` (only
//! defined for pairs) the ranking runs over the constrained pair set, again
//! in lexicographic order.

use std::fmt;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Exact combination count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CombCount(pub u128);

impl CombCount {
    pub fn value(self) -> u128 {
        self.0
    }

    /// `floor(log2(count))`, `None` for an empty set.
    pub fn floor_log2(self) -> Option<u32> {
        (self.0 > 0).then(|| 127 - self.0.leading_zeros())
    }
}

impl fmt::Display for CombCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Circular distance `min(|i-j|, M-|i-j|)` between two shift indices.
pub fn circular_distance(i: usize, j: usize, m: usize) -> Result<usize> {
    if i >= m || j >= m {
        return Err(invalid(format!("indices ({i}, {j}) out of range for M = {m}")));
    }
    Ok(circular_distance_unchecked(i, j, m))
}

#[inline]
pub(crate) fn circular_distance_unchecked(i: usize, j: usize, m: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(m - d)
}

pub(crate) fn binomial(n: usize, k: usize) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is always divisible by (i + 1)
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or(Error::Overflow("binomial coefficient"))?
            / (i as u128 + 1);
    }
    Ok(acc)
}

/// Number of ways to pick `L` distinct shifts out of `M`.
pub fn count_unconstrained(m: usize, l: usize) -> Result<CombCount> {
    if l == 0 || l > m {
        return Err(invalid(format!("need 0 < L <= M, got L = {l}, M = {m}")));
    }
    binomial(m, l).map(CombCount)
}

/// Number of index pairs whose circular distance is at least `S`.
pub fn count_constrained(m: usize, s: usize) -> Result<CombCount> {
    if m < 2 {
        return Err(invalid(format!("need M >= 2, got {m}")));
    }
    if s == 0 || s > m / 2 {
        return Err(invalid(format!("need 1 <= S <= floor(M/2) = {}, got {s}", m / 2)));
    }
    let pairs = binomial(m, 2)?;
    let removed = (m as u128) * (s as u128 - 1);
    Ok(CombCount(pairs - removed))
}

/// Largest separation that keeps `floor(log2 C)` at its unconstrained value.
pub fn s_max(m: usize) -> Result<usize> {
    if m < 2 {
        return Err(invalid(format!("need M >= 2, got {m}")));
    }
    let pairs = binomial(m, 2)?;
    let k = CombCount(pairs).floor_log2().expect("M >= 2 gives at least one pair");
    let slack = pairs - (1u128 << k);
    Ok(1 + (slack / m as u128) as usize)
}

/// Validated modulation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SchemeParams {
    m: usize,
    l: usize,
    h: usize,
    s: usize,
}

impl SchemeParams {
    pub fn new(m: usize, l: usize, h: usize, s: usize) -> Result<Self> {
        if m < 2 {
            return Err(invalid(format!("M must be at least 2, got {m}")));
        }
        if l == 0 || l > m {
            return Err(invalid(format!("L must be in 1..=M, got {l}")));
        }
        if h < 2 || !h.is_power_of_two() {
            return Err(invalid(format!("H must be a power of two >= 2, got {h}")));
        }
        if s == 0 || s > m / 2 {
            return Err(invalid(format!("S must be in 1..=floor(M/2), got {s}")));
        }
        if s > 1 && l != 2 {
            return Err(invalid("index separation S > 1 is only defined for L = 2"));
        }
        let params = Self { m, l, h, s };
        let cap = bit_capacity(&params)?;
        if cap.p == 0 {
            return Err(invalid("configuration carries no information bits"));
        }
        Ok(params)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.h.trailing_zeros()
    }

    /// Number of admissible index combinations (before the power-of-two cut).
    pub fn combination_count(&self) -> Result<CombCount> {
        if self.l == 2 {
            count_constrained(self.m, self.s)
        } else {
            count_unconstrained(self.m, self.l)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitCapacity {
    pub p1: u32,
    pub p2: u32,
    pub p: u32,
}

pub fn bit_capacity(params: &SchemeParams) -> Result<BitCapacity> {
    let count = params.combination_count()?;
    let p1 = count.floor_log2().unwrap_or(0);
    let p2 = params.l as u32 * params.bits_per_symbol();
    Ok(BitCapacity { p1, p2, p: p1 + p2 })
}

/// Bits per subcarrier, `floor(log2(C * H^L)) / M`.
pub fn spectral_efficiency(params: &SchemeParams) -> Result<f64> {
    let count = params.combination_count()?;
    let psk_bits = params.l as u32 * params.bits_per_symbol();
    // H^L is a power of two, so the product's log is the count's log plus p2.
    let product = count
        .0
        .checked_shl(psk_bits)
        .filter(|v| v >> psk_bits == count.0)
        .ok_or(Error::Overflow("C * H^L"))?;
    let bits = CombCount(product).floor_log2().unwrap_or(0);
    Ok(bits as f64 / params.m as f64)
}

/// Unit-magnitude `H`-PSK point `exp(j 2 pi q / H)`.
pub fn psk_symbol(q: usize, h: usize) -> Complex64 {
    let q = q % h;
    if !(4 * q).is_multiple_of(h) {
        return Complex64::from_polar(1.0, std::f64::consts::TAU * q as f64 / h as f64);
    }
    // quarter turns are snapped so BPSK/QPSK points are exact
    match 4 * q / h {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Phase index of a PSK point, if `s` is one within `tol`.
pub fn psk_phase_index(s: Complex64, h: usize, tol: f64) -> Option<usize> {
    let turns = s.arg() / std::f64::consts::TAU * h as f64;
    let q = (turns.round() as i64).rem_euclid(h as i64) as usize;
    ((s - psk_symbol(q, h)).norm() <= tol).then_some(q)
}

#[inline]
pub fn gray_encode(q: usize) -> usize {
    q ^ (q >> 1)
}

#[inline]
pub fn gray_decode(mut g: usize) -> usize {
    let mut q = g;
    while g > 1 {
        g >>= 1;
        q ^= g;
    }
    q
}

/// One transmitted index-modulation block.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMessage {
    indices: Vec<usize>,
    phases: Vec<usize>,
    psk_symbols: Vec<Complex64>,
    bits: Vec<u8>,
}

impl IndexMessage {
    /// Build a message directly from indices and PSK phase indices, without
    /// source bits. Useful for probing the waveform with arbitrary index sets.
    pub fn from_phases(indices: Vec<usize>, phases: Vec<usize>, m: usize, h: usize) -> Result<Self> {
        if indices.is_empty() || indices.len() != phases.len() {
            return Err(invalid("indices and phases must be non-empty and of equal length"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("indices must be strictly increasing"));
        }
        if indices.last().is_some_and(|&i| i >= m) {
            return Err(invalid(format!("index out of range for M = {m}")));
        }
        if phases.iter().any(|&q| q >= h) {
            return Err(invalid(format!("phase index out of range for H = {h}")));
        }
        let psk_symbols = phases.iter().map(|&q| psk_symbol(q, h)).collect();
        Ok(Self { indices, phases, psk_symbols, bits: Vec::new() })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn psk_symbols(&self) -> &[Complex64] {
        &self.psk_symbols
    }

    pub fn phases(&self) -> &[usize] {
        &self.phases
    }

    /// Source bits; empty when the message was not produced by a codec.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn l(&self) -> usize {
        self.indices.len()
    }
}

/// Per-first-index prefix counts of the (possibly constrained) pair set.
#[derive(Debug, Clone)]
struct PairTable {
    m: usize,
    s: usize,
    offsets: Vec<u128>,
}

impl PairTable {
    fn new(m: usize, s: usize) -> Self {
        let mut offsets = Vec::with_capacity(m + 1);
        let mut acc = 0u128;
        offsets.push(0);
        for i in 0..m {
            if let Some((lo, hi)) = second_range(m, s, i) {
                acc += (hi - lo + 1) as u128;
            }
            offsets.push(acc);
        }
        Self { m, s, offsets }
    }

    fn total(&self) -> u128 {
        self.offsets[self.m]
    }

    fn rank(&self, i: usize, j: usize) -> Option<u128> {
        let (lo, hi) = second_range(self.m, self.s, i)?;
        (lo..=hi)
            .contains(&j)
            .then(|| self.offsets[i] + (j - lo) as u128)
    }

    fn unrank(&self, r: u128) -> Option<(usize, usize)> {
        if r >= self.total() {
            return None;
        }
        // last i with offsets[i] <= r
        let i = self.offsets.partition_point(|&o| o <= r) - 1;
        let (lo, _) = second_range(self.m, self.s, i)?;
        Some((i, lo + (r - self.offsets[i]) as usize))
    }
}

/// Valid second indices `j > i` with `D(i, j) >= s`.
#[inline]
pub(crate) fn second_range(m: usize, s: usize, i: usize) -> Option<(usize, usize)> {
    let lo = i + s;
    let hi = (m - 1).min(i + m - s);
    (lo <= hi).then_some((lo, hi))
}

/// Encoder/decoder for one parameter set.
#[derive(Debug, Clone)]
pub struct Codec {
    params: SchemeParams,
    capacity: BitCapacity,
    pairs: Option<PairTable>,
}

impl Codec {
    pub fn new(params: SchemeParams) -> Result<Self> {
        let capacity = bit_capacity(&params)?;
        let pairs = (params.l == 2).then(|| PairTable::new(params.m, params.s));
        Ok(Self { params, capacity, pairs })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn capacity(&self) -> BitCapacity {
        self.capacity
    }

    /// Number of codewords actually used for index bits, `2^p1`.
    pub fn usable_combinations(&self) -> u128 {
        1u128 << self.capacity.p1
    }

    /// Lexicographic rank of a sorted index set within the admissible set.
    pub fn rank(&self, indices: &[usize]) -> Result<u128> {
        let m = self.params.m;
        if indices.len() != self.params.l {
            return Err(invalid(format!("expected {} indices, got {}", self.params.l, indices.len())));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) || indices.iter().any(|&i| i >= m) {
            return Err(invalid("indices must be strictly increasing and below M"));
        }
        match (&self.pairs, indices) {
            (Some(table), &[i, j]) => table.rank(i, j).ok_or_else(|| {
                invalid(format!("pair ({i}, {j}) violates the separation S = {}", self.params.s))
            }),
            _ => rank_lex(m, indices),
        }
    }

    /// Inverse of [`Codec::rank`].
    pub fn unrank(&self, rank: u128) -> Result<Vec<usize>> {
        match &self.pairs {
            Some(table) => table
                .unrank(rank)
                .map(|(i, j)| vec![i, j])
                .ok_or_else(|| invalid(format!("rank {rank} exceeds the pair count"))),
            None => unrank_lex(self.params.m, self.params.l, rank),
        }
    }

    /// Rank of `{i, j}` for `i < j` if the pair is in the usable codebook.
    #[inline]
    pub(crate) fn usable_pair_rank(&self, i: usize, j: usize) -> Option<u128> {
        self.pairs
            .as_ref()?
            .rank(i, j)
            .filter(|&r| r < self.usable_combinations())
    }

    /// Inclusive range of second indices `j` forming a usable pair with first
    /// index `i`.
    pub(crate) fn usable_second_range(&self, i: usize) -> Option<(usize, usize)> {
        let table = self.pairs.as_ref()?;
        let (lo, hi) = second_range(self.params.m, self.params.s, i)?;
        let used = self.usable_combinations();
        let base = table.offsets[i];
        if base >= used {
            return None;
        }
        let room = used - base - 1;
        let hi = hi.min(lo.saturating_add(room.min(usize::MAX as u128) as usize));
        Some((lo, hi))
    }

    pub fn encode(&self, bits: &[u8]) -> Result<IndexMessage> {
        let cap = self.capacity;
        if bits.len() != cap.p as usize {
            return Err(invalid(format!("expected {} bits, got {}", cap.p, bits.len())));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(invalid("bits must be 0 or 1"));
        }
        let (index_bits, psk_bits) = bits.split_at(cap.p1 as usize);
        let rank = index_bits.iter().fold(0u128, |acc, &b| (acc << 1) | b as u128);
        let indices = self.unrank(rank)?;
        let k = self.params.bits_per_symbol() as usize;
        let phases: Vec<usize> = psk_bits
            .chunks(k)
            .map(|chunk| gray_decode(chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)))
            .collect();
        let psk_symbols = phases.iter().map(|&q| psk_symbol(q, self.params.h)).collect();
        Ok(IndexMessage { indices, phases, psk_symbols, bits: bits.to_vec() })
    }

    pub fn decode(&self, msg: &IndexMessage) -> Result<Vec<u8>> {
        let h = self.params.h;
        if msg.psk_symbols.len() != self.params.l {
            return Err(invalid("PSK symbol count does not match L"));
        }
        let phases = msg
            .psk_symbols
            .iter()
            .map(|&s| psk_phase_index(s, h, 1e-9).ok_or_else(|| invalid(format!("{s} is not an {h}-PSK point"))))
            .collect::<Result<Vec<_>>>()?;
        let rank = self.rank(&msg.indices)?;
        self.pack_bits(rank, &phases)
    }

    /// Assemble a message from detected indices and phase indices.
    pub fn message(&self, indices: Vec<usize>, phases: Vec<usize>) -> Result<IndexMessage> {
        let rank = self.rank(&indices)?;
        let bits = self.pack_bits(rank, &phases)?;
        let psk_symbols = phases.iter().map(|&q| psk_symbol(q, self.params.h)).collect();
        Ok(IndexMessage { indices, phases, psk_symbols, bits })
    }

    pub(crate) fn pack_bits(&self, rank: u128, phases: &[usize]) -> Result<Vec<u8>> {
        let cap = self.capacity;
        if rank >= self.usable_combinations() {
            return Err(Error::UnusedCodeword { rank, p1: cap.p1 });
        }
        Ok(self.pack_bits_truncated(rank, phases))
    }

    /// Bit image of `(rank mod 2^p1, phases)`, used for codewords outside the
    /// usable set that a suboptimal detector may still land on.
    pub(crate) fn pack_bits_truncated(&self, rank: u128, phases: &[usize]) -> Vec<u8> {
        let cap = self.capacity;
        let k = self.params.bits_per_symbol();
        let mut bits = Vec::with_capacity(cap.p as usize);
        bits.extend((0..cap.p1).rev().map(|b| ((rank >> b) & 1) as u8));
        for &q in phases {
            let label = gray_encode(q);
            bits.extend((0..k).rev().map(|b| ((label >> b) & 1) as u8));
        }
        bits
    }
}

fn rank_lex(m: usize, indices: &[usize]) -> Result<u128> {
    let l = indices.len();
    let mut rank = 0u128;
    let mut next = 0usize;
    for (pos, &i) in indices.iter().enumerate() {
        let rem = l - pos - 1;
        // combinations whose element at `pos` lies in [next, i): hockey-stick sum
        rank += binomial(m - next, rem + 1)? - binomial(m - i, rem + 1)?;
        next = i + 1;
    }
    Ok(rank)
}

fn unrank_lex(m: usize, l: usize, mut rank: u128) -> Result<Vec<usize>> {
    if rank >= binomial(m, l)? {
        return Err(invalid(format!("rank {rank} exceeds C({m}, {l})")));
    }
    let mut out = Vec::with_capacity(l);
    let mut v = 0usize;
    for pos in 0..l {
        let rem = l - pos - 1;
        loop {
            let count = binomial(m - 1 - v, rem)?;
            if rank < count {
                out.push(v);
                v += 1;
                break;
            }
            rank -= count;
            v += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circular_distance_cases() {
        assert_eq!(circular_distance(3, 3, 8).unwrap(), 0);
        assert_eq!(circular_distance(0, 7, 8).unwrap(), 1);
        assert_eq!(circular_distance(2, 6, 8).unwrap(), 4);
        assert!(circular_distance(8, 0, 8).is_err());
    }

    #[test]
    fn counts() {
        assert_eq!(count_unconstrained(1448, 2).unwrap().value(), 1_047_628);
        assert_eq!(count_unconstrained(5, 5).unwrap().value(), 1);
        assert_eq!(count_unconstrained(1448, 1).unwrap().value(), 1448);
        assert!(count_unconstrained(4, 5).is_err());
        assert_eq!(count_constrained(8, 2).unwrap().value(), 20);
        assert_eq!(count_constrained(8, 1).unwrap().value(), 28);
        assert_eq!(count_constrained(1448, 362).unwrap().value(), 524_900);
        assert!(count_constrained(8, 5).is_err());
        assert!(count_constrained(8, 0).is_err());
    }

    #[test]
    fn binomial_overflow_is_reported() {
        assert!(matches!(binomial(100_000, 40), Err(Error::Overflow(_))));
        assert!(count_unconstrained(2048, 4).is_ok());
    }

    #[test]
    fn s_max_reference_points() {
        assert_eq!(s_max(1448).unwrap(), 362);
        assert_eq!(s_max(16).unwrap(), 4);
        assert_eq!(s_max(17).unwrap(), 1);
        assert!(s_max(1).is_err());
    }

    #[test]
    fn capacities() {
        let cap = |m, l, h, s| bit_capacity(&SchemeParams::new(m, l, h, s).unwrap()).unwrap();
        assert_eq!(cap(1448, 1, 2, 1), BitCapacity { p1: 10, p2: 1, p: 11 });
        assert_eq!(cap(1448, 2, 2, 1), BitCapacity { p1: 19, p2: 2, p: 21 });
        assert_eq!(cap(1448, 4, 2, 1), BitCapacity { p1: 37, p2: 4, p: 41 });
        assert_eq!(cap(1448, 2, 2, 362), BitCapacity { p1: 19, p2: 2, p: 21 });
    }

    #[test]
    fn spectral_efficiency_values() {
        let se = |m, l, h, s| spectral_efficiency(&SchemeParams::new(m, l, h, s).unwrap()).unwrap();
        assert_eq!(se(1448, 2, 2, 362), 21.0 / 1448.0);
        assert_eq!(se(4, 1, 2, 1), 0.75);
        assert_eq!(se(1448, 2, 2, 1), 21.0 / 1448.0);
    }

    #[test]
    fn params_validation() {
        assert!(SchemeParams::new(8, 3, 2, 2).is_err());
        assert!(SchemeParams::new(8, 2, 3, 1).is_err());
        assert!(SchemeParams::new(1, 1, 2, 1).is_err());
        assert!(SchemeParams::new(8, 9, 2, 1).is_err());
        assert!(SchemeParams::new(8, 2, 2, 4).is_ok());
    }

    #[test]
    fn psk_points_exact() {
        assert_eq!(psk_symbol(0, 2), Complex64::new(1.0, 0.0));
        assert_eq!(psk_symbol(1, 2), Complex64::new(-1.0, 0.0));
        assert_eq!(psk_symbol(3, 4), Complex64::new(0.0, -1.0));
        for h in [2, 4, 8, 16] {
            for q in 0..h {
                let s = psk_symbol(q, h);
                assert!((s.norm() - 1.0).abs() < 1e-12);
                assert_eq!(psk_phase_index(s, h, 1e-12), Some(q));
            }
        }
    }

    #[test]
    fn gray_is_a_bijection_with_unit_steps() {
        for q in 0..64usize {
            assert_eq!(gray_decode(gray_encode(q)), q);
            assert_eq!((gray_encode(q) ^ gray_encode(q + 1)).count_ones(), 1);
        }
    }

    #[test]
    fn encode_zero_bits() {
        let codec = Codec::new(SchemeParams::new(8, 2, 2, 1).unwrap()).unwrap();
        let msg = codec.encode(&vec![0; codec.capacity().p as usize]).unwrap();
        assert_eq!(msg.indices(), &[0, 1]);
        assert_eq!(msg.psk_symbols(), &[Complex64::new(1.0, 0.0); 2]);

        let codec = Codec::new(SchemeParams::new(8, 2, 2, 2).unwrap()).unwrap();
        let msg = codec.encode(&vec![0; codec.capacity().p as usize]).unwrap();
        assert_eq!(msg.indices(), &[0, 2]);
    }

    #[test]
    fn decode_rejects_unused_codeword() {
        // M = 8, L = 2: 28 pairs, p1 = 4, so ranks 16..28 are unused
        let codec = Codec::new(SchemeParams::new(8, 2, 2, 1).unwrap()).unwrap();
        let last = codec.unrank(27).unwrap();
        let msg = IndexMessage::from_phases(last, vec![0, 0], 8, 2).unwrap();
        assert!(matches!(codec.decode(&msg), Err(Error::UnusedCodeword { rank: 27, p1: 4 })));
    }

    #[test]
    fn decode_rejects_separation_violation() {
        let codec = Codec::new(SchemeParams::new(8, 2, 2, 2).unwrap()).unwrap();
        let msg = IndexMessage::from_phases(vec![0, 1], vec![0, 0], 8, 2).unwrap();
        assert!(codec.decode(&msg).is_err());
        let msg = IndexMessage::from_phases(vec![0, 7], vec![0, 0], 8, 2).unwrap();
        assert!(codec.decode(&msg).is_err());
    }

    #[test]
    fn encode_rejects_bad_length() {
        let codec = Codec::new(SchemeParams::new(8, 2, 2, 1).unwrap()).unwrap();
        assert!(codec.encode(&[0, 1]).is_err());
        assert!(codec.encode(&[0, 1, 2, 0, 0, 0]).is_err());
    }

    #[test]
    fn lex_and_pair_table_agree_for_unconstrained_pairs() {
        let table = PairTable::new(23, 1);
        for r in 0..table.total() {
            let (i, j) = table.unrank(r).unwrap();
            assert_eq!(unrank_lex(23, 2, r).unwrap(), vec![i, j]);
            assert_eq!(rank_lex(23, &[i, j]).unwrap(), r);
        }
    }

    #[test]
    fn usable_second_range_matches_rank_filter() {
        for s in 1..=8 {
            let codec = Codec::new(SchemeParams::new(16, 2, 2, s).unwrap()).unwrap();
            for i in 0..16 {
                let expected: Vec<usize> =
                    ((i + 1)..16).filter(|&j| codec.usable_pair_rank(i, j).is_some()).collect();
                let got: Vec<usize> = codec
                    .usable_second_range(i)
                    .map(|(lo, hi)| (lo..=hi).collect())
                    .unwrap_or_default();
                assert_eq!(got, expected, "S = {s}, i = {i}");
            }
        }
    }
}
