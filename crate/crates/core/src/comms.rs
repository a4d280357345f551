//! Communication receiver: DFT-s-OFDM front end, matched despreading and
//! index/PSK detection.

use num_complex::Complex64;

use crate::codec::{psk_symbol, Codec};
use crate::dsp::FftCache;
use crate::error::{invalid, Error, Result};
use crate::waveform::{Cfr, FdssCoefficients, FrequencyFrame, TimeFrame, WaveformConfig};

/// Despread symbols `x_0..x_{M-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DespreadSymbols {
    x: Vec<Complex64>,
}

impl DespreadSymbols {
    pub fn new(x: Vec<Complex64>) -> Result<Self> {
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numerical("despread symbols contain non-finite values".into()));
        }
        Ok(Self { x })
    }

    pub fn values(&self) -> &[Complex64] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub indices: Vec<usize>,
    pub phases: Vec<usize>,
    pub psk: Vec<Complex64>,
    pub bits: Vec<u8>,
    pub metric: f64,
    /// The detected combination lies outside the usable codebook; `bits`
    /// then carries the rank truncated to `p1` bits.
    pub unused_codeword: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    /// Exhaustive search over the usable codebook.
    Ml,
    /// Strongest index first, then the best admissible partner.
    TwoStep,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Ml => "ml",
            DetectorKind::TwoStep => "two-step",
        }
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ml" => Ok(DetectorKind::Ml),
            "two-step" | "twostep" | "two_step" => Ok(DetectorKind::TwoStep),
            other => Err(Error::Config(format!("unknown detector `{other}`"))),
        }
    }
}

/// Front end bound to one waveform configuration.
#[derive(Debug)]
pub struct Receiver {
    config: WaveformConfig,
    fft: FftCache,
}

impl Receiver {
    pub fn new(config: WaveformConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, fft: FftCache::default() })
    }

    pub fn config(&self) -> &WaveformConfig {
        &self.config
    }

    /// Drop the CP, take the `N`-point DFT (scaled by `1/N`) and keep `L_d..=L_u`.
    pub fn demodulate(&self, frame: &TimeFrame) -> Result<FrequencyFrame> {
        let (n, n_cp) = (self.config.n, self.config.n_cp);
        if frame.samples.len() != n + n_cp {
            return Err(invalid(format!(
                "frame has {} samples, expected N_CP + N = {}",
                frame.samples.len(),
                n + n_cp
            )));
        }
        let mut buf = frame.samples[n_cp..].to_vec();
        self.fft.forward(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        Ok(FrequencyFrame::from_fn(&self.config, |k| buf[WaveformConfig::bin_position(k, n)] * scale))
    }

    /// `x = IDFT_M(conj(h_k c_k) y_k)` (unnormalized inverse DFT).
    pub fn equalize_despread(&self, y: &FrequencyFrame, h: &Cfr, c: &FdssCoefficients) -> Result<DespreadSymbols> {
        y.check_aligned(h)?;
        y.check_aligned(c.coeffs())?;
        let m = self.config.m;
        if y.len() != m {
            return Err(invalid("received bins do not span M subcarriers"));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (((k, yk), hk), ck) in y.iter().zip(h.values()).zip(c.coeffs().values()) {
            buf[WaveformConfig::bin_position(k, m)] = (hk * ck).conj() * yk;
        }
        self.fft.inverse(m).process(&mut buf);
        DespreadSymbols::new(buf)
    }
}

pub fn demodulate(frame: &TimeFrame, config: &WaveformConfig) -> Result<FrequencyFrame> {
    Receiver::new(config.clone())?.demodulate(frame)
}

pub fn equalize_despread(
    y: &FrequencyFrame,
    h: &Cfr,
    c: &FdssCoefficients,
    config: &WaveformConfig,
) -> Result<DespreadSymbols> {
    Receiver::new(config.clone())?.equalize_despread(y, h, c)
}

/// Best PSK phase per index and its metric `max_q Re{x_m exp(-j 2 pi q / H)}`.
fn per_index_metrics(x: &DespreadSymbols, h: usize) -> (Vec<f64>, Vec<usize>) {
    let points: Vec<Complex64> = (0..h).map(|q| psk_symbol(q, h).conj()).collect();
    x.values()
        .iter()
        .map(|&xm| {
            let mut best = (f64::NEG_INFINITY, 0);
            for (q, p) in points.iter().enumerate() {
                let v = (xm * p).re;
                if v > best.0 {
                    best = (v, q);
                }
            }
            best
        })
        .unzip()
}

/// Range-argmax table; ties resolve to the smallest index.
struct SparseArgmax<'a> {
    values: &'a [f64],
    levels: Vec<Vec<u32>>,
}

impl<'a> SparseArgmax<'a> {
    fn new(values: &'a [f64]) -> Self {
        let n = values.len();
        let mut levels = vec![(0..n as u32).collect::<Vec<_>>()];
        let mut width = 1;
        while 2 * width <= n {
            let prev = levels.last().unwrap();
            let next = (0..=n - 2 * width)
                .map(|i| Self::pick(values, prev[i], prev[i + width]))
                .collect();
            levels.push(next);
            width *= 2;
        }
        Self { values, levels }
    }

    #[inline]
    fn pick(values: &[f64], a: u32, b: u32) -> u32 {
        let (va, vb) = (values[a as usize], values[b as usize]);
        if vb > va || (vb == va && b < a) {
            b
        } else {
            a
        }
    }

    /// argmax over `lo..=hi`
    fn query(&self, lo: usize, hi: usize) -> usize {
        let len = hi - lo + 1;
        let level = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let width = 1 << level;
        Self::pick(self.values, self.levels[level][lo], self.levels[level][hi + 1 - width]) as usize
    }
}

fn check_length(x: &DespreadSymbols, codec: &Codec) -> Result<()> {
    if x.len() != codec.params().m() {
        return Err(invalid(format!("expected {} despread symbols, got {}", codec.params().m(), x.len())));
    }
    Ok(())
}

fn finish(codec: &Codec, indices: Vec<usize>, phases: Vec<usize>, metric: f64) -> Result<DetectionResult> {
    let h = codec.params().h();
    let rank = codec.rank(&indices)?;
    let (bits, unused_codeword) = match codec.pack_bits(rank, &phases) {
        Ok(bits) => (bits, false),
        Err(Error::UnusedCodeword { .. }) => (codec.pack_bits_truncated(rank, &phases), true),
        Err(e) => return Err(e),
    };
    let psk = phases.iter().map(|&q| psk_symbol(q, h)).collect();
    Ok(DetectionResult { indices, phases, psk, bits, metric, unused_codeword })
}

/// Maximum-metric detection of index set and PSK symbols.
///
/// For `L = 2` the search covers every pair in the usable codebook (which
/// already enforces the index separation). `L = 1` scans the usable indices.
/// Larger `L` picks the strongest indices greedily.
pub fn ml_detect(x: &DespreadSymbols, codec: &Codec) -> Result<DetectionResult> {
    check_length(x, codec)?;
    let params = codec.params();
    let (f, q) = per_index_metrics(x, params.h());
    match params.l() {
        1 => {
            let usable = codec.usable_combinations().min(params.m() as u128) as usize;
            let m = argmax(&f[..usable]);
            finish(codec, vec![m], vec![q[m]], f[m])
        }
        2 => {
            let table = SparseArgmax::new(&f);
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..params.m() {
                let Some((lo, hi)) = codec.usable_second_range(i) else { continue };
                let j = table.query(lo, hi);
                let v = f[i] + f[j];
                if best.is_none_or(|(bv, _, _)| v > bv) {
                    best = Some((v, i, j));
                }
            }
            let (v, i, j) = best.ok_or_else(|| Error::Numerical("empty codebook".into()))?;
            finish(codec, vec![i, j], vec![q[i], q[j]], v)
        }
        l => greedy(codec, &f, &q, l),
    }
}

/// Low-complexity detector: the strongest index first, then the best
/// partner among indices that form a usable pair with it.
pub fn two_step_detect(x: &DespreadSymbols, codec: &Codec) -> Result<DetectionResult> {
    check_length(x, codec)?;
    let params = codec.params();
    if params.l() != 2 {
        return Err(invalid("two-step detection is defined for L = 2"));
    }
    let (f, q) = per_index_metrics(x, params.h());
    let first = argmax(&f);
    let mut best: Option<(f64, usize)> = None;
    let mut consider = |n: usize| {
        if best.is_none_or(|(bv, _)| f[n] > bv) {
            best = Some((f[n], n));
        }
    };
    for n in 0..first {
        if codec.usable_pair_rank(n, first).is_some() {
            consider(n);
        }
    }
    if let Some((lo, hi)) = codec.usable_second_range(first) {
        (lo..=hi).for_each(&mut consider);
    }
    match best {
        Some((v, n)) => {
            let (i, j) = (first.min(n), first.max(n));
            finish(codec, vec![i, j], vec![q[i], q[j]], f[first] + v)
        }
        None => ml_detect(x, codec),
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn greedy(codec: &Codec, f: &[f64], q: &[usize], l: usize) -> Result<DetectionResult> {
    let mut order: Vec<usize> = (0..f.len()).collect();
    // stable sort keeps the smaller index first among equal metrics
    order.sort_by(|&a, &b| f[b].total_cmp(&f[a]));
    let mut indices = order[..l].to_vec();
    indices.sort_unstable();
    let metric = indices.iter().map(|&i| f[i]).sum();
    let phases = indices.iter().map(|&i| q[i]).collect();
    finish(codec, indices, phases, metric)
}

/// Bit and block error rates over `p`-bit blocks.
pub fn ber_bler(detected: &[u8], truth: &[u8], p: usize) -> Result<(f64, f64)> {
    let counts = ErrorCounts::compare(detected, truth, p)?;
    Ok((counts.ber(), counts.bler()))
}

/// Accumulated bit/block error counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorCounts {
    pub bits: u64,
    pub bit_errors: u64,
    pub blocks: u64,
    pub block_errors: u64,
}

impl ErrorCounts {
    pub fn compare(detected: &[u8], truth: &[u8], p: usize) -> Result<Self> {
        if detected.len() != truth.len() {
            return Err(invalid(format!("{} detected bits vs {} reference bits", detected.len(), truth.len())));
        }
        if p == 0 || !truth.len().is_multiple_of(p) {
            return Err(invalid(format!("bit count {} is not a multiple of the block size {p}", truth.len())));
        }
        let mut counts = ErrorCounts::default();
        for (d, t) in detected.chunks(p).zip(truth.chunks(p)) {
            let errors = d.iter().zip(t).filter(|(a, b)| a != b).count() as u64;
            counts.bits += p as u64;
            counts.bit_errors += errors;
            counts.blocks += 1;
            counts.block_errors += u64::from(errors > 0);
        }
        Ok(counts)
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            bits: self.bits + other.bits,
            bit_errors: self.bit_errors + other.bit_errors,
            blocks: self.blocks + other.blocks,
            block_errors: self.block_errors + other.block_errors,
        }
    }

    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }

    pub fn bler(&self) -> f64 {
        if self.blocks == 0 {
            0.0
        } else {
            self.block_errors as f64 / self.blocks as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::SchemeParams;

    fn codec(m: usize, l: usize, h: usize, s: usize) -> Codec {
        Codec::new(SchemeParams::new(m, l, h, s).unwrap()).unwrap()
    }

    #[test]
    fn error_rate_examples() {
        let truth = vec![0u8; 210];
        assert_eq!(ber_bler(&truth, &truth, 21).unwrap(), (0.0, 0.0));
        let mut one = truth.clone();
        one[50] = 1;
        let (ber, bler) = ber_bler(&one, &truth, 21).unwrap();
        assert!((ber - 1.0 / 210.0).abs() < 1e-15 && (bler - 0.1).abs() < 1e-15);
        let all = vec![1u8; 210];
        assert_eq!(ber_bler(&all, &truth, 21).unwrap(), (1.0, 1.0));
        assert!(ber_bler(&all[..20], &truth, 21).is_err());
        assert!(ber_bler(&all[..200], &truth[..200], 21).is_err());
    }

    #[test]
    fn single_dominant_entry() {
        let c = codec(64, 1, 2, 1);
        let mut x = vec![Complex64::new(0.01, 0.0); 64];
        x[9] = Complex64::new(3.0, 0.1);
        let det = ml_detect(&DespreadSymbols::new(x).unwrap(), &c).unwrap();
        assert_eq!(det.indices, vec![9]);
        assert_eq!(det.psk, vec![Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn separation_is_enforced_against_a_stronger_violating_pair() {
        let c = codec(64, 2, 2, 8);
        let mut x = vec![Complex64::new(0.0, 0.0); 64];
        x[10] = Complex64::new(1.0, 0.0);
        x[12] = Complex64::new(0.9, 0.0);
        x[30] = Complex64::new(0.5, 0.0);
        let xs = DespreadSymbols::new(x).unwrap();
        for det in [ml_detect(&xs, &c).unwrap(), two_step_detect(&xs, &c).unwrap()] {
            assert_eq!(det.indices, vec![10, 30]);
            assert!(crate::codec::circular_distance(10, 30, 64).unwrap() >= 8);
        }
    }

    #[test]
    fn sparse_argmax_matches_scan() {
        let values: Vec<f64> = (0..97).map(|i| ((i * 37) % 23) as f64).collect();
        let table = SparseArgmax::new(&values);
        for lo in 0..97 {
            for hi in lo..97 {
                let expected = (lo..=hi).fold(lo, |b, i| if values[i] > values[b] { i } else { b });
                assert_eq!(table.query(lo, hi), expected);
            }
        }
    }

    #[test]
    fn greedy_flags_unused_codewords() {
        // M = 8, L = 3: C(8,3) = 56, p1 = 5, ranks >= 32 unused
        let c = codec(8, 3, 2, 1);
        let mut x = vec![Complex64::new(0.0, 0.0); 8];
        for i in [5, 6, 7] {
            x[i] = Complex64::new(1.0, 0.0);
        }
        let det = ml_detect(&DespreadSymbols::new(x).unwrap(), &c).unwrap();
        assert_eq!(det.indices, vec![5, 6, 7]);
        assert!(det.unused_codeword);
        assert_eq!(det.bits.len(), c.capacity().p as usize);
    }

    #[test]
    fn rejects_non_finite_and_wrong_length() {
        assert!(DespreadSymbols::new(vec![Complex64::new(f64::NAN, 0.0)]).is_err());
        let c = codec(64, 2, 2, 1);
        let x = DespreadSymbols::new(vec![Complex64::new(0.0, 0.0); 10]).unwrap();
        assert!(ml_detect(&x, &c).is_err());
    }
}
