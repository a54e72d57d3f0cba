//! Classical difference statistics: exact S-box difference distribution
//! tables, Monte-Carlo output-difference histograms and Pearson chi-square
//! tests.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cipher::RoundReduced;
use crate::error::BaselineError;
use crate::present::{self, SBOX};
use crate::rng;
use crate::Block64;

/// Default significance level for chi-square decisions.
pub const DEFAULT_ALPHA: f64 = 0.001;

/// `counts[din][dout] = #{x : S(x) ^ S(x ^ din) = dout}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DdtTable {
    pub counts: [[u16; 16]; 16],
}

pub fn sbox_ddt(sbox: &[u8; 16]) -> Result<DdtTable, BaselineError> {
    let mut seen = [false; 16];
    for &s in sbox {
        if s > 15 || seen[s as usize] {
            return Err(BaselineError::NotBijective);
        }
        seen[s as usize] = true;
    }
    let mut counts = [[0u16; 16]; 16];
    for din in 0..16 {
        for x in 0..16 {
            let dout = sbox[x] ^ sbox[x ^ din];
            counts[din][dout as usize] += 1;
        }
    }
    Ok(DdtTable { counts })
}

impl DdtTable {
    pub fn present() -> Self {
        sbox_ddt(&SBOX).expect("PRESENT S-box is a bijection")
    }

    pub fn row_sums(&self) -> [u16; 16] {
        self.counts.map(|row| row.iter().sum())
    }

    /// Largest entry over nonzero input differences.
    pub fn max_nontrivial(&self) -> u16 {
        self.counts[1..]
            .iter()
            .flat_map(|row| row.iter().copied())
            .max()
            .unwrap_or(0)
    }

    pub fn probability(&self, din: u8, dout: u8) -> f64 {
        self.counts[din as usize][dout as usize] as f64 / 16.0
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("din");
        for dout in 0..16 {
            let _ = write!(s, ",{dout:X}");
        }
        s.push('\n');
        for (din, row) in self.counts.iter().enumerate() {
            let _ = write!(s, "{din:X}");
            for c in row {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for DdtTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "din\\dout")?;
        for dout in 0..16 {
            write!(f, "{dout:>4X}")?;
        }
        writeln!(f)?;
        for (din, row) in self.counts.iter().enumerate() {
            write!(f, "{din:>8X}")?;
            for c in row {
                write!(f, "{c:>4}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// How a 64-bit output difference is reduced to a histogram bucket.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Projection {
    /// The low `k` bits (`1 <= k <= 16`), `2^k` buckets.
    LowBits(u32),
    /// Value of nibble `i` (bits `4i..4i+3`), 16 buckets.
    Nibble(u32),
    /// Number of nonzero nibbles, 17 buckets.
    ActiveNibbles,
}

impl Projection {
    pub fn buckets(self) -> usize {
        match self {
            Projection::LowBits(k) => 1 << k,
            Projection::Nibble(_) => 16,
            Projection::ActiveNibbles => 17,
        }
    }

    #[inline]
    pub fn project(self, diff: Block64) -> usize {
        match self {
            Projection::LowBits(k) => (diff & ((1u64 << k) - 1)) as usize,
            Projection::Nibble(i) => ((diff >> (4 * i)) & 0xF) as usize,
            Projection::ActiveNibbles => (0..16).filter(|i| (diff >> (4 * i)) & 0xF != 0).count(),
        }
    }

    fn valid(self) -> bool {
        match self {
            Projection::LowBits(k) => (1..=16).contains(&k),
            Projection::Nibble(i) => i < 16,
            Projection::ActiveNibbles => true,
        }
    }
}

impl fmt::Display for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Projection::LowBits(k) => write!(f, "low{k}"),
            Projection::Nibble(i) => write!(f, "nibble{i}"),
            Projection::ActiveNibbles => write!(f, "active-nibbles"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    pub projection: Projection,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(projection: Projection) -> Self {
        Self {
            projection,
            counts: vec![0; projection.buckets()],
        }
    }

    pub fn add(&mut self, diff: Block64) {
        self.counts[self.projection.project(diff)] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Largest over smallest bucket; infinite when some bucket is empty.
    pub fn max_min_ratio(&self) -> f64 {
        let max = self.counts.iter().copied().max().unwrap_or(0) as f64;
        let min = self.counts.iter().copied().min().unwrap_or(0) as f64;
        max / min
    }
}

/// Histogram of `E(P) ^ E(P ^ delta)` over `samples` random (P, K) pairs.
/// Pair `j` draws from ChaCha8 stream `j` of `seed`, as in dataset generation.
pub fn empirical_diff_distribution(
    cipher: RoundReduced,
    delta: Block64,
    samples: usize,
    projection: Projection,
    seed: u64,
) -> Result<Histogram, BaselineError> {
    if samples == 0 || delta == 0 || !projection.valid() {
        return Err(BaselineError::Input);
    }
    let key_mask = cipher.kind().key_mask();
    let mut hist = Histogram::new(projection);
    for j in 0..samples {
        let mut rng = rng::stream(seed, j as u64);
        let p: u64 = rng.random();
        let keyed = cipher.schedule(rng.random::<u128>() & key_mask);
        hist.add(keyed.encrypt(p) ^ keyed.encrypt(p ^ delta));
    }
    Ok(hist)
}

/// Histogram of uniformly random 64-bit values: the null model.
pub fn uniform_source_distribution(samples: usize, projection: Projection, seed: u64) -> Histogram {
    let mut rng = rng::stream(seed, u64::MAX);
    let mut hist = Histogram::new(projection);
    for _ in 0..samples {
        hist.add(rng.random());
    }
    hist
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub df: usize,
    pub samples: u64,
    pub buckets: usize,
    pub projection: String,
    pub alpha: f64,
    pub p_value: f64,
    pub reject: bool,
}

fn p_value(statistic: f64, df: usize) -> f64 {
    if !statistic.is_finite() {
        return 0.0;
    }
    if df == 0 {
        return 1.0;
    }
    ChiSquared::new(df as f64)
        .map(|d| d.sf(statistic))
        .unwrap_or(0.0)
}

/// Pearson goodness of fit against the uniform distribution over buckets.
pub fn chi_square_uniform(hist: &Histogram, alpha: f64) -> Result<ChiSquareReport, BaselineError> {
    let buckets = hist.counts.len();
    let total = hist.total();
    let needed = 5 * buckets as u64;
    if total < needed {
        return Err(BaselineError::UnderSampled {
            total,
            needed,
            buckets,
        });
    }
    let expected = total as f64 / buckets as f64;
    let statistic: f64 = hist
        .counts
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    let df = buckets - 1;
    let p = p_value(statistic, df);
    Ok(ChiSquareReport {
        statistic,
        df,
        samples: total,
        buckets,
        projection: hist.projection.to_string(),
        alpha,
        p_value: p,
        reject: p < alpha,
    })
}

/// Pearson goodness of fit of observed counts against bucket probabilities.
/// Buckets with zero expected probability are excluded from the degrees of
/// freedom; any observation in them makes the statistic infinite.
pub fn chi_square_expected(
    observed: &[u64],
    probabilities: &[f64],
    alpha: f64,
) -> Result<ChiSquareReport, BaselineError> {
    if observed.len() != probabilities.len() {
        return Err(BaselineError::Shape);
    }
    let total: u64 = observed.iter().sum();
    let support = probabilities.iter().filter(|&&p| p > 0.0).count();
    let needed = 5 * support as u64;
    if total < needed || support == 0 {
        return Err(BaselineError::UnderSampled {
            total,
            needed,
            buckets: support,
        });
    }
    let mut statistic = 0.0;
    for (&o, &p) in observed.iter().zip(probabilities) {
        if p > 0.0 {
            let e = p * total as f64;
            statistic += (o as f64 - e).powi(2) / e;
        } else if o > 0 {
            statistic = f64::INFINITY;
        }
    }
    let df = support - 1;
    let p = p_value(statistic, df);
    Ok(ChiSquareReport {
        statistic,
        df,
        samples: total,
        buckets: observed.len(),
        projection: "explicit".into(),
        alpha,
        p_value: p,
        reject: p < alpha,
    })
}

/// Exact distribution of the one-round PRESENT output difference (S-box layer
/// then permutation) for an input difference `delta`, from the DDT. Returns
/// `(output difference, probability)` sorted by difference.
pub fn present_one_round_prediction(delta: Block64) -> Vec<(Block64, f64)> {
    let ddt = DdtTable::present();
    let mut dist: BTreeMap<Block64, f64> = BTreeMap::new();
    dist.insert(0, 1.0);
    for nib in 0..16 {
        let din = ((delta >> (4 * nib)) & 0xF) as u8;
        if din == 0 {
            continue;
        }
        let mut next = BTreeMap::new();
        for (&acc, &p) in &dist {
            for dout in 0..16u8 {
                let q = ddt.probability(din, dout);
                if q > 0.0 {
                    *next.entry(acc | ((dout as u64) << (4 * nib))).or_insert(0.0) += p * q;
                }
            }
        }
        dist = next;
    }
    dist.into_iter()
        .map(|(d, p)| (present::p_layer(d), p))
        .collect::<BTreeMap<_, _>>()
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::CipherKind;
    use proptest::prelude::*;

    #[test]
    fn present_ddt_properties() {
        let ddt = DdtTable::present();
        assert_eq!(ddt.counts[0][0], 16);
        assert!(ddt.counts[0][1..].iter().all(|&c| c == 0));
        assert!(ddt.row_sums().iter().all(|&s| s == 16));
        assert!(ddt.counts.iter().flatten().all(|c| c % 2 == 0));
        assert_eq!(ddt.max_nontrivial(), 4);
        assert!(sbox_ddt(&[0; 16]).is_err());
    }

    #[test]
    fn ddt_text_layouts() {
        let ddt = DdtTable::present();
        let text = ddt.to_string();
        assert_eq!(text.lines().count(), 17);
        let csv = ddt.to_csv();
        assert_eq!(csv.lines().nth(1).unwrap(), "0,16,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0");
    }

    proptest! {
        #[test]
        fn ddt_invariants_hold_for_any_permutation(perm in Just((0u8..16).collect::<Vec<_>>()).prop_shuffle()) {
            let sbox: [u8; 16] = perm.try_into().unwrap();
            let ddt = sbox_ddt(&sbox).unwrap();
            prop_assert_eq!(ddt.counts[0][0], 16);
            prop_assert!(ddt.row_sums().iter().all(|&s| s == 16));
            prop_assert!(ddt.counts.iter().flatten().all(|c| c % 2 == 0));
        }
    }

    #[test]
    fn chi_square_closed_forms() {
        let mut h = Histogram::new(Projection::Nibble(0));
        h.counts = vec![100; 16];
        let r = chi_square_uniform(&h, DEFAULT_ALPHA).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.reject);
        assert_eq!(r.df, 15);

        h.counts = vec![0; 16];
        h.counts[3] = 1600;
        let r = chi_square_uniform(&h, DEFAULT_ALPHA).unwrap();
        assert!((r.statistic - 24000.0).abs() < 1e-9);
        assert!(r.reject);

        h.counts = vec![1; 16];
        assert!(matches!(
            chi_square_uniform(&h, DEFAULT_ALPHA),
            Err(BaselineError::UnderSampled { .. })
        ));
    }

    #[test]
    fn identity_puts_all_mass_on_delta() {
        let delta = 0x0007_0000_0000_0007;
        let h = empirical_diff_distribution(RoundReduced::identity(), delta, 500, Projection::LowBits(8), 1)
            .unwrap();
        assert_eq!(h.counts[0x07], 500);
        assert!(empirical_diff_distribution(RoundReduced::identity(), 0, 5, Projection::LowBits(8), 1).is_err());
    }

    #[test]
    fn uniform_source_is_accepted() {
        let h = uniform_source_distribution(100_000, Projection::Nibble(5), 3);
        assert!(h.max_min_ratio() < 1.2);
        assert!(!chi_square_uniform(&h, DEFAULT_ALPHA).unwrap().reject);
    }

    #[test]
    fn one_round_present_is_non_uniform() {
        let cipher = RoundReduced::new(CipherKind::Present, 1).unwrap();
        let h = empirical_diff_distribution(cipher, 0x0007_0000_0000_0007, 100_000, Projection::LowBits(4), 9)
            .unwrap();
        assert!(h.max_min_ratio() > 2.0);
        let r = chi_square_uniform(&h, DEFAULT_ALPHA).unwrap();
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn prediction_sums_to_one() {
        let dist = present_one_round_prediction(0x0007_0000_0000_0007);
        let total: f64 = dist.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Row 7 of the DDT has six nonzero entries; two active nibbles.
        assert_eq!(dist.len(), 36);
    }
}
