//! Input-differential selection and labelled output-difference datasets.
//!
//! A dataset is built from `pair_count` random (plaintext, key) pairs. For
//! pair `j` and class `i` the record is `(E(P) ^ E(P ^ delta_i), i)`, so the
//! output has `pair_count * t` records in pair-major order. Pair `j` draws its
//! plaintext and key from ChaCha8 stream `j` of the dataset seed, which makes
//! any index range reproducible on its own.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::cipher::{CipherKind, RoundReduced};
use crate::error::DiffError;
use crate::nn::Scalar;
use crate::rng;
use crate::Block64;

/// The base of the selected family and the nibble shifts that produce the
/// four selected classes, in class order.
pub const SELECTED_BASE: Block64 = 0x0007_0000_0000_0007;
pub const SELECTED_SHIFTS: [i32; 4] = [2, 3, 1, 0];

/// Feature width: one input per output-difference bit.
pub const FEATURES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Differential {
    pub delta: Block64,
    pub class_index: usize,
}

/// An ordered set of `t >= 2` distinct nonzero input differentials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffClassSet {
    deltas: Vec<Block64>,
}

impl DiffClassSet {
    pub fn new(deltas: Vec<Block64>) -> Result<Self, DiffError> {
        if deltas.len() < 2 {
            return Err(DiffError::TooFewClasses(deltas.len()));
        }
        for (i, &d) in deltas.iter().enumerate() {
            if d == 0 || deltas[..i].contains(&d) {
                return Err(DiffError::BadDelta(d));
            }
        }
        Ok(Self { deltas })
    }

    /// The four differentials of the selected family, in class order.
    pub fn selected() -> Self {
        shift_family(SELECTED_BASE, &SELECTED_SHIFTS).expect("selected family is valid")
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn deltas(&self) -> &[Block64] {
        &self.deltas
    }

    pub fn differentials(&self) -> impl Iterator<Item = Differential> + '_ {
        self.deltas
            .iter()
            .enumerate()
            .map(|(class_index, &delta)| Differential { delta, class_index })
    }

    /// Comma-separated hex, e.g. `0x0700000000000700,0x7000000000007000`.
    pub fn to_hex_list(&self) -> String {
        self.deltas
            .iter()
            .map(|d| format!("{d:#018x}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse_hex_list(s: &str) -> Result<Self, DiffError> {
        let deltas = s
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|tok| !tok.is_empty())
            .map(|tok| parse_hex(tok).ok_or_else(|| parse_err(0, format!("bad delta `{tok}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(deltas)
    }
}

pub(crate) fn parse_hex(s: &str) -> Option<u64> {
    let s = s.trim();
    let digits = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .unwrap_or(s);
    u64::from_str_radix(digits, 16).ok()
}

fn parse_err(line: usize, msg: String) -> DiffError {
    DiffError::Parse { line, msg }
}

/// Shift `value` by whole nibbles; positive moves toward the most significant
/// end. Bits pushed past either end are dropped.
pub fn shift_nibbles(value: Block64, nibbles: i32) -> Block64 {
    let bits = nibbles.unsigned_abs().saturating_mul(4);
    if bits >= 64 {
        0
    } else if nibbles >= 0 {
        value << bits
    } else {
        value >> bits
    }
}

/// Build a class set from `base` and its nibble shifts. Shift 0 denotes the
/// base itself; when no zero shift is listed, the base is class 0.
pub fn shift_family(base: Block64, nibble_shifts: &[i32]) -> Result<DiffClassSet, DiffError> {
    if base == 0 {
        return Err(DiffError::BadDelta(0));
    }
    let mut deltas = Vec::with_capacity(nibble_shifts.len() + 1);
    if !nibble_shifts.contains(&0) {
        deltas.push(base);
    }
    for &shift in nibble_shifts {
        let d = shift_nibbles(base, shift);
        if d == 0 {
            return Err(DiffError::ShiftToZero { base, shift });
        }
        deltas.push(d);
    }
    DiffClassSet::new(deltas)
}

/// `t` distinct nonzero uniformly random differentials.
pub fn random_class_set(t: usize, seed: u64) -> Result<DiffClassSet, DiffError> {
    if t < 2 {
        return Err(DiffError::TooFewClasses(t));
    }
    let mut rng = rng::stream(seed, 0);
    let mut deltas = Vec::with_capacity(t);
    while deltas.len() < t {
        let d: u64 = rng.random();
        if d != 0 && !deltas.contains(&d) {
            deltas.push(d);
        }
    }
    DiffClassSet::new(deltas)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DiffSample {
    pub out_diff: Block64,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffDataset {
    pub samples: Vec<DiffSample>,
    pub cipher: RoundReduced,
    pub class_set: DiffClassSet,
    pub seed: u64,
    pub pair_count: usize,
}

impl DiffDataset {
    pub fn classes(&self) -> usize {
        self.class_set.len()
    }

    pub fn label_counts(&self) -> Vec<usize> {
        label_counts(&self.samples, self.classes())
    }
}

pub fn label_counts(samples: &[DiffSample], t: usize) -> Vec<usize> {
    let mut counts = vec![0; t];
    for s in samples {
        counts[s.label] += 1;
    }
    counts
}

/// Records for pairs `pairs.start..pairs.end`, identical to the matching
/// slice of [`generate_dataset`]'s output.
pub fn generate_pairs(
    cipher: RoundReduced,
    class_set: &DiffClassSet,
    pairs: Range<usize>,
    seed: u64,
) -> Vec<DiffSample> {
    let t = class_set.len();
    let key_mask = cipher.kind().key_mask();
    let mut out = Vec::with_capacity(pairs.len() * t);
    for j in pairs {
        let mut rng = rng::stream(seed, j as u64);
        let plaintext: u64 = rng.random();
        let key = rng.random::<u128>() & key_mask;
        let keyed = cipher.schedule(key);
        let c = keyed.encrypt(plaintext);
        for d in class_set.differentials() {
            out.push(DiffSample {
                out_diff: c ^ keyed.encrypt(plaintext ^ d.delta),
                label: d.class_index,
            });
        }
    }
    out
}

pub fn generate_dataset(
    cipher: CipherKind,
    rounds: usize,
    class_set: &DiffClassSet,
    pair_count: usize,
    seed: u64,
) -> Result<DiffDataset, DiffError> {
    let cipher = RoundReduced::new(cipher, rounds)?;
    generate_for(cipher, class_set, pair_count, seed)
}

pub fn generate_for(
    cipher: RoundReduced,
    class_set: &DiffClassSet,
    pair_count: usize,
    seed: u64,
) -> Result<DiffDataset, DiffError> {
    if pair_count == 0 {
        return Err(DiffError::NoPairs);
    }
    Ok(DiffDataset {
        samples: generate_pairs(cipher, class_set, 0..pair_count, seed),
        cipher,
        class_set: class_set.clone(),
        seed,
        pair_count,
    })
}

/// Bit `j` of the output difference becomes feature `j` (0 or 1).
pub fn encode_features<T: Scalar>(sample: &DiffSample) -> [T; FEATURES] {
    let mut f = [T::zero(); FEATURES];
    write_bits(sample.out_diff, &mut f);
    f
}

pub fn one_hot<T: Scalar>(label: usize, t: usize) -> Vec<T> {
    (0..t)
        .map(|i| if i == label { T::one() } else { T::zero() })
        .collect()
}

#[inline]
fn write_bits<T: Scalar>(value: u64, out: &mut [T]) {
    for (j, slot) in out.iter_mut().enumerate() {
        *slot = if (value >> j) & 1 == 1 { T::one() } else { T::zero() };
    }
}

/// Row-major `samples.len() x 64` feature matrix.
pub fn feature_matrix<T: Scalar>(samples: &[DiffSample]) -> Vec<T> {
    let mut m = vec![T::zero(); samples.len() * FEATURES];
    for (row, s) in m.chunks_exact_mut(FEATURES).zip(samples) {
        write_bits(s.out_diff, row);
    }
    m
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<DiffSample>,
    pub val: Vec<DiffSample>,
}

/// Stratified split: each label contributes `round(n_label * val_fraction)`
/// records to validation, chosen by a seeded shuffle. Both halves keep the
/// original record order.
pub fn split_train_val(
    samples: &[DiffSample],
    classes: usize,
    val_fraction: f64,
    seed: u64,
) -> Result<Split, DiffError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(DiffError::BadFraction(val_fraction));
    }
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, s) in samples.iter().enumerate() {
        by_label[s.label].push(i);
    }
    let mut is_val = vec![false; samples.len()];
    for (label, idx) in by_label.iter_mut().enumerate() {
        let mut rng = rng::stream(seed, label as u64);
        idx.shuffle(&mut rng);
        let n_val = (idx.len() as f64 * val_fraction).round() as usize;
        for &i in &idx[..n_val] {
            is_val[i] = true;
        }
    }
    let (val, train): (Vec<_>, Vec<_>) = samples
        .iter()
        .zip(&is_val)
        .partition(|(_, &v)| v);
    Ok(Split {
        train: train.into_iter().map(|(s, _)| *s).collect(),
        val: val.into_iter().map(|(s, _)| *s).collect(),
    })
}

impl DiffDataset {
    pub fn split(&self, val_fraction: f64, seed: u64) -> Result<Split, DiffError> {
        split_train_val(&self.samples, self.classes(), val_fraction, seed)
    }

    /// Sidecar metadata path for a dataset CSV.
    pub fn meta_path(csv: &Path) -> PathBuf {
        let mut name = csv.as_os_str().to_owned();
        name.push(".meta");
        PathBuf::from(name)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(20 * self.samples.len() + 20);
        s.push_str("out_diff_hex,label\n");
        for r in &self.samples {
            let _ = writeln!(s, "{:016x},{}", r.out_diff, r.label);
        }
        s
    }

    pub fn meta_string(&self) -> String {
        format!(
            "cipher={}\nrounds={}\ndeltas={}\nseed={}\npair_count={}\n",
            self.cipher.kind(),
            self.cipher.rounds(),
            self.class_set.to_hex_list(),
            self.seed,
            self.pair_count
        )
    }

    /// Write `path` (records) and `path.meta` (provenance).
    pub fn save(&self, path: &Path) -> Result<(), DiffError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| DiffError::Io { path, source }
        };
        let file = fs::File::create(path).map_err(io(path))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_csv_string().as_bytes())
            .and_then(|_| w.flush())
            .map_err(io(path))?;
        let meta = Self::meta_path(path);
        fs::write(&meta, self.meta_string()).map_err(io(&meta))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DiffError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| DiffError::Io { path, source }
        };
        let meta_path = Self::meta_path(path);
        let meta = fs::read_to_string(&meta_path).map_err(io(&meta_path))?;
        let mut cipher = None;
        let mut rounds = None;
        let mut deltas = None;
        let mut seed = None;
        let mut pair_count = None;
        for (n, line) in meta.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(n + 1, format!("expected key=value, got `{line}`")))?;
            let bad = |what: &str| parse_err(n + 1, format!("bad {what} `{v}`"));
            match k.trim() {
                "cipher" => cipher = Some(v.trim().parse::<CipherKind>().map_err(|_| bad("cipher"))?),
                "rounds" => rounds = Some(v.trim().parse::<usize>().map_err(|_| bad("rounds"))?),
                "deltas" => deltas = Some(DiffClassSet::parse_hex_list(v)?),
                "seed" => seed = Some(v.trim().parse::<u64>().map_err(|_| bad("seed"))?),
                "pair_count" => {
                    pair_count = Some(v.trim().parse::<usize>().map_err(|_| bad("pair_count"))?)
                }
                _ => {}
            }
        }
        let missing = |what: &str| parse_err(0, format!("metadata missing `{what}`"));
        let cipher = RoundReduced::new(
            cipher.ok_or_else(|| missing("cipher"))?,
            rounds.ok_or_else(|| missing("rounds"))?,
        )?;
        let class_set = deltas.ok_or_else(|| missing("deltas"))?;
        let t = class_set.len();

        let file = fs::File::open(path).map_err(io(path))?;
        let mut samples = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io(path))?;
            if n == 0 {
                if line.trim() != "out_diff_hex,label" {
                    return Err(parse_err(1, format!("unexpected header `{line}`")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (hex, label) = line
                .split_once(',')
                .ok_or_else(|| parse_err(n + 1, "expected two columns".into()))?;
            let out_diff = parse_hex(hex).ok_or_else(|| parse_err(n + 1, format!("bad hex `{hex}`")))?;
            let label: usize = label
                .trim()
                .parse()
                .ok()
                .filter(|&l| l < t)
                .ok_or_else(|| parse_err(n + 1, format!("bad label `{label}`")))?;
            samples.push(DiffSample { out_diff, label });
        }
        Ok(DiffDataset {
            samples,
            cipher,
            class_set,
            seed: seed.ok_or_else(|| missing("seed"))?,
            pair_count: pair_count.ok_or_else(|| missing("pair_count"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn shift_family_reproduces_selected_classes() {
        let base = 0x0007_0000_0000_0007;
        assert!(shift_family(base, &[1]).unwrap().deltas().contains(&0x0070_0000_0000_0070));
        assert!(shift_family(base, &[2]).unwrap().deltas().contains(&0x0700_0000_0000_0700));
        assert!(shift_family(base, &[3]).unwrap().deltas().contains(&0x7000_0000_0000_7000));
        assert_eq!(shift_family(base, &[1]).unwrap().deltas(), &[base, 0x0070_0000_0000_0070]);
        assert_eq!(
            DiffClassSet::selected().deltas(),
            &[
                0x0700_0000_0000_0700,
                0x7000_0000_0000_7000,
                0x0070_0000_0000_0070,
                0x0007_0000_0000_0007
            ]
        );
    }

    #[test]
    fn shift_family_errors() {
        assert!(shift_family(0, &[1]).is_err());
        assert!(matches!(
            shift_family(0x0007_0000_0000_0007, &[16]),
            Err(DiffError::ShiftToZero { .. })
        ));
        assert!(matches!(
            shift_family(0x0007_0000_0000_0007, &[1, 1]),
            Err(DiffError::BadDelta(_))
        ));
        assert_eq!(shift_nibbles(0xF000_0000_0000_0000, 1), 0);
        assert_eq!(shift_nibbles(0x10, -1), 0x1);
    }

    #[test]
    fn class_set_invariants() {
        assert!(DiffClassSet::new(vec![1]).is_err());
        assert!(DiffClassSet::new(vec![1, 0]).is_err());
        assert!(DiffClassSet::new(vec![1, 2, 1]).is_err());
        let s = DiffClassSet::new(vec![5, 9, 3]).unwrap();
        let idx: Vec<usize> = s.differentials().map(|d| d.class_index).collect();
        assert_eq!(idx, vec![0, 1, 2]);
        let round = DiffClassSet::parse_hex_list(&s.to_hex_list()).unwrap();
        assert_eq!(round, s);
    }

    #[test]
    fn random_class_sets() {
        assert_eq!(random_class_set(4, 9).unwrap(), random_class_set(4, 9).unwrap());
        let s = random_class_set(4, 9).unwrap();
        assert_eq!(s.len(), 4);
        assert!(random_class_set(1, 9).is_err());
        let distinct: HashSet<Vec<u64>> = (0..100)
            .map(|seed| random_class_set(4, seed).unwrap().deltas().to_vec())
            .collect();
        assert_eq!(distinct.len(), 100);
    }

    #[test]
    fn identity_cipher_reproduces_deltas() {
        let set = DiffClassSet::selected();
        let ds = generate_for(RoundReduced::identity(), &set, 100, 1).unwrap();
        assert_eq!(ds.samples.len(), 400);
        for s in &ds.samples {
            assert_eq!(s.out_diff, set.deltas()[s.label]);
            assert_ne!(s.out_diff, 0);
        }
    }

    #[test]
    fn dataset_shape_and_determinism() {
        let set = DiffClassSet::selected();
        let a = generate_dataset(CipherKind::Present, 3, &set, 10_000, 42).unwrap();
        assert_eq!(a.samples.len(), 40_000);
        assert_eq!(a.label_counts(), vec![10_000; 4]);
        let b = generate_dataset(CipherKind::Present, 3, &set, 10_000, 42).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        let c = generate_dataset(CipherKind::Present, 3, &set, 10_000, 43).unwrap();
        assert_ne!(a.samples, c.samples);
        assert!(generate_dataset(CipherKind::Present, 0, &set, 1, 1).is_err());
        assert!(generate_dataset(CipherKind::Present, 3, &set, 0, 1).is_err());
    }

    #[test]
    fn ranges_compose() {
        let set = DiffClassSet::selected();
        let cipher = RoundReduced::new(CipherKind::Simeck, 5).unwrap();
        let full = generate_pairs(cipher, &set, 0..50, 8);
        let mut parts = generate_pairs(cipher, &set, 0..17, 8);
        parts.extend(generate_pairs(cipher, &set, 17..50, 8));
        assert_eq!(full, parts);
    }

    #[test]
    fn feature_encoding() {
        let f = encode_features::<f32>(&DiffSample { out_diff: 0, label: 0 });
        assert!(f.iter().all(|&x| x == 0.0));
        let f = encode_features::<f64>(&DiffSample { out_diff: 1 << 63, label: 0 });
        assert_eq!(f.iter().filter(|&&x| x == 1.0).count(), 1);
        assert_eq!(f[63], 1.0);
        assert_eq!(one_hot::<f32>(2, 4), vec![0.0, 0.0, 1.0, 0.0]);
        let m = feature_matrix::<f32>(&[DiffSample { out_diff: 0b101, label: 1 }]);
        assert_eq!(&m[..4], &[1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn stratified_split() {
        let set = DiffClassSet::selected();
        let ds = generate_for(RoundReduced::identity(), &set, 10_000, 3).unwrap();
        let split = ds.split(0.3, 11).unwrap();
        assert_eq!(split.train.len(), 28_000);
        assert_eq!(split.val.len(), 12_000);
        for c in label_counts(&split.val, 4) {
            assert!((c as i64 - 3000).abs() <= 1);
        }
        assert_eq!(split, ds.split(0.3, 11).unwrap());
        assert_ne!(split, ds.split(0.3, 12).unwrap());
        assert!(ds.split(0.0, 1).is_err());
        assert!(ds.split(1.0, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let set = DiffClassSet::selected();
        let ds = generate_dataset(CipherKind::Simeck, 3, &set, 25, 77).unwrap();
        ds.save(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("out_diff_hex,label\n"));
        assert_eq!(text.lines().nth(1).unwrap().split(',').next().unwrap().len(), 16);
        assert_eq!(DiffDataset::load(&path).unwrap(), ds);
    }
}
