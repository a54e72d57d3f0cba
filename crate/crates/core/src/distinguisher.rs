//! Offline/online oracle distinguisher.
//!
//! Offline, a classifier is trained on output differences of the known
//! round-reduced cipher. Online, the same chosen-plaintext queries are sent to
//! an unknown oracle and the frozen classifier is scored on the resulting
//! records. Accuracy significantly above chance (`1/t`) means the oracle is
//! the cipher.

use std::collections::HashMap;

use rand::Rng;

use crate::cipher::{KeyedCipher, RoundReduced};
use crate::diffgen::{generate_for, DiffClassSet, DiffSample};
use crate::error::DistinguishError;
use crate::nn::{evaluate_samples, init_model, train, LabeledMatrix, Mlp, MlpArch, Scalar, TrainConfig, TrainReport};
use crate::rng::{self, derive};
use crate::Block64;

/// Chosen-plaintext query interface.
pub trait Oracle {
    fn query(&mut self, plaintext: Block64) -> Result<Block64, DistinguishError>;
}

/// The round-reduced cipher under a hidden random key.
pub struct CipherOracle {
    keyed: KeyedCipher,
}

impl CipherOracle {
    pub fn new(cipher: RoundReduced, seed: u64) -> Self {
        let key = rng::stream(seed, 0).random::<u128>() & cipher.kind().key_mask();
        Self {
            keyed: cipher.schedule(key),
        }
    }
}

impl Oracle for CipherOracle {
    fn query(&mut self, plaintext: Block64) -> Result<Block64, DistinguishError> {
        Ok(self.keyed.encrypt(plaintext))
    }
}

/// Fresh uniform answers, repeated verbatim for repeated queries.
pub struct RandomOracle {
    rng: rng::StreamRng,
    answers: HashMap<Block64, Block64>,
}

impl RandomOracle {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: rng::stream(seed, 1),
            answers: HashMap::new(),
        }
    }
}

impl Oracle for RandomOracle {
    fn query(&mut self, plaintext: Block64) -> Result<Block64, DistinguishError> {
        let rng = &mut self.rng;
        Ok(*self.answers.entry(plaintext).or_insert_with(|| rng.random()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    Cipher(RoundReduced),
    Random,
}

impl OracleKind {
    pub fn instantiate(self, seed: u64) -> Box<dyn Oracle> {
        match self {
            OracleKind::Cipher(c) => Box::new(CipherOracle::new(c, seed)),
            OracleKind::Random => Box::new(RandomOracle::new(seed)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Cipher,
    Random,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Cipher => "CIPHER",
            Verdict::Random => "RANDOM",
        })
    }
}

/// One-sided binomial test against the chance level `1/t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecisionPolicy {
    pub z: f64,
}

impl Default for DecisionPolicy {
    fn default() -> Self {
        Self { z: 3.0 }
    }
}

impl DecisionPolicy {
    /// Accuracy that must be exceeded with `records` labelled records.
    pub fn threshold(&self, t: usize, records: usize) -> f64 {
        let p = 1.0 / t as f64;
        p + self.z * (p * (1.0 - p) / records.max(1) as f64).sqrt()
    }
}

/// `Cipher` iff `accuracy > 1/t + z * sqrt((1/t)(1 - 1/t) / records)`.
pub fn decide(accuracy: f64, t: usize, records: usize, policy: DecisionPolicy) -> Verdict {
    if accuracy > policy.threshold(t, records) {
        Verdict::Cipher
    } else {
        Verdict::Random
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineReport {
    pub accuracy: f64,
    pub query_pairs: usize,
    pub records: usize,
    pub verdict: Verdict,
    pub threshold: f64,
    pub z: f64,
}

/// Build the labelled records from `query_pairs` plaintexts sent to `oracle`.
pub fn collect_records(
    oracle: &mut dyn Oracle,
    class_set: &DiffClassSet,
    query_pairs: usize,
    seed: u64,
) -> Result<Vec<DiffSample>, DistinguishError> {
    let mut records = Vec::with_capacity(query_pairs * class_set.len());
    for j in 0..query_pairs {
        let p: Block64 = rng::stream(seed, j as u64).random();
        let c = oracle.query(p)?;
        for d in class_set.differentials() {
            records.push(DiffSample {
                out_diff: c ^ oracle.query(p ^ d.delta)?,
                label: d.class_index,
            });
        }
    }
    Ok(records)
}

pub fn online_phase<T: Scalar>(
    model: &Mlp<T>,
    oracle: &mut dyn Oracle,
    class_set: &DiffClassSet,
    query_pairs: usize,
    seed: u64,
    policy: DecisionPolicy,
) -> Result<OnlineReport, DistinguishError> {
    if query_pairs == 0 {
        return Err(DistinguishError::NoQueries);
    }
    let records = collect_records(oracle, class_set, query_pairs, seed)?;
    let accuracy = evaluate_samples(model, &records)?;
    let t = class_set.len();
    Ok(OnlineReport {
        accuracy,
        query_pairs,
        records: records.len(),
        verdict: decide(accuracy, t, records.len(), policy),
        threshold: policy.threshold(t, records.len()),
        z: policy.z,
    })
}

#[derive(Clone, Debug)]
pub struct OfflineConfig {
    pub arch: MlpArch,
    pub train: TrainConfig,
    pub pair_count: usize,
    pub max_attempts: usize,
    pub seed: u64,
    pub policy: DecisionPolicy,
}

impl OfflineConfig {
    pub fn new(arch: MlpArch, seed: u64) -> Self {
        Self {
            arch,
            train: TrainConfig::default(),
            pair_count: 10_000,
            max_attempts: 3,
            seed,
            policy: DecisionPolicy::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum OfflineOutcome<T> {
    Distinguisher {
        model: Mlp<T>,
        report: TrainReport,
        accuracy: f64,
        attempts: usize,
    },
    NoDistinguisher {
        attempts: usize,
        best_accuracy: f64,
    },
}

impl<T> OfflineOutcome<T> {
    pub fn accuracy(&self) -> f64 {
        match self {
            OfflineOutcome::Distinguisher { accuracy, .. } => *accuracy,
            OfflineOutcome::NoDistinguisher { best_accuracy, .. } => *best_accuracy,
        }
    }
}

/// Train against the known cipher, retrying with fresh data up to
/// `max_attempts` times until the validation accuracy clears the policy
/// threshold.
pub fn offline_phase<T: Scalar>(
    cipher: RoundReduced,
    class_set: &DiffClassSet,
    config: &OfflineConfig,
) -> Result<OfflineOutcome<T>, DistinguishError> {
    let t = class_set.len();
    let arch = MlpArch {
        output_dim: t,
        ..config.arch.clone()
    };
    let mut best = 0.0f64;
    for attempt in 0..config.max_attempts.max(1) {
        let a = attempt as u64;
        let data = generate_for(cipher, class_set, config.pair_count, derive(config.seed, &[a, 0]))?;
        let split = data.split(config.train.val_fraction, derive(config.seed, &[a, 1]))?;
        let model = init_model::<T>(&arch, derive(config.seed, &[a, 2]));
        let train_cfg = TrainConfig {
            seed: derive(config.seed, &[a, 3]),
            ..config.train.clone()
        };
        let (model, report) = train(
            model,
            &LabeledMatrix::from_samples(&split.train),
            &LabeledMatrix::from_samples(&split.val),
            &train_cfg,
        )?;
        let accuracy = report.final_accuracy();
        best = best.max(accuracy);
        if decide(accuracy, t, split.val.len(), config.policy) == Verdict::Cipher {
            return Ok(OfflineOutcome::Distinguisher {
                model,
                report,
                accuracy,
                attempts: attempt + 1,
            });
        }
    }
    Ok(OfflineOutcome::NoDistinguisher {
        attempts: config.max_attempts.max(1),
        best_accuracy: best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::CipherKind;
    use crate::nn::{Layer, OutputHead};

    #[test]
    fn decision_examples() {
        let p = DecisionPolicy::default();
        assert_eq!(decide(0.25, 4, 10, p), Verdict::Random);
        assert_eq!(decide(0.25, 4, 1_000_000, p), Verdict::Random);
        assert_eq!(decide(0.90, 4, 4000, p), Verdict::Cipher);
        assert_eq!(decide(0.26, 4, 100, p), Verdict::Random);
        assert!((p.threshold(4, 4000) - 0.25 - 0.020_539).abs() < 1e-5);
        assert!((p.threshold(4, 100) - 0.25 - 0.129_904).abs() < 1e-5);
    }

    #[test]
    fn random_oracle_is_consistent() {
        let mut o = RandomOracle::new(4);
        let a = o.query(17).unwrap();
        assert_eq!(o.query(17).unwrap(), a);
        assert_ne!(o.query(18).unwrap(), a);
    }

    #[test]
    fn cipher_oracle_hides_a_fixed_key() {
        let cipher = RoundReduced::new(CipherKind::Present, 3).unwrap();
        let mut a = CipherOracle::new(cipher, 1);
        let mut b = CipherOracle::new(cipher, 1);
        let mut c = CipherOracle::new(cipher, 2);
        assert_eq!(a.query(5).unwrap(), b.query(5).unwrap());
        assert_ne!(a.query(5).unwrap(), c.query(5).unwrap());
    }

    /// A model that always predicts class 0.
    fn constant_model() -> Mlp<f32> {
        let arch = MlpArch::new(64, vec![2], 4).unwrap().with_head(OutputHead::Sigmoid);
        let mut layers = vec![Layer::zeros(64, 2), Layer::zeros(2, 4)];
        layers[1].bias[0] = 1.0;
        Mlp::from_parts(arch, layers, 0).unwrap()
    }

    #[test]
    fn online_rejects_zero_queries() {
        let m = constant_model();
        let mut o = RandomOracle::new(1);
        let err = online_phase(&m, &mut o, &DiffClassSet::selected(), 0, 1, DecisionPolicy::default());
        assert!(matches!(err, Err(DistinguishError::NoQueries)));
    }

    #[test]
    fn constant_model_scores_chance_exactly() {
        let m = constant_model();
        let mut o = RandomOracle::new(1);
        let r = online_phase(&m, &mut o, &DiffClassSet::selected(), 250, 3, DecisionPolicy::default())
            .unwrap();
        assert_eq!(r.records, 1000);
        assert_eq!(r.accuracy, 0.25);
        assert_eq!(r.verdict, Verdict::Random);
    }

    #[test]
    fn identity_cipher_records_carry_the_delta() {
        let mut o = CipherOracle::new(RoundReduced::identity(), 0);
        let set = DiffClassSet::selected();
        let recs = collect_records(&mut o, &set, 10, 0).unwrap();
        assert!(recs.iter().all(|r| r.out_diff == set.deltas()[r.label]));
    }
}
