//! Experiment schemes and dataset generation.

use rand::seq::index::sample;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use super::{prefix_distribution, OutcomeSequence};
use crate::cis::{CisSet, DimensionProfile};
use crate::error::{Error, Result};
use crate::random::{derive_seed, rng_from_seed};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordKind {
    Exact,
    Frequency,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub sequence: OutcomeSequence,
    pub value: f64,
    pub kind: RecordKind,
    /// Zero for exact records.
    pub shots: u64,
}

/// Which instrument tuples are measured at each prefix length.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TupleSelection {
    Exhaustive,
    /// Uniform sample without replacement of at most this many tuples per
    /// prefix length; falls back to exhaustive when that is smaller.
    Sampled(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrefixPolicy {
    AllLengths,
    FullOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExperimentScheme {
    pub selection: TupleSelection,
    pub prefixes: PrefixPolicy,
}

impl Default for ExperimentScheme {
    fn default() -> Self {
        Self { selection: TupleSelection::Sampled(2000), prefixes: PrefixPolicy::AllLengths }
    }
}

impl ExperimentScheme {
    /// Measured `(u, v)` groups in emission order: by prefix length, then
    /// instrument tuple, then state.
    pub fn groups(&self, profile: &DimensionProfile, seed: u64) -> Result<Vec<(usize, Vec<usize>)>> {
        let n = profile.slots();
        let lengths: Vec<usize> = match self.prefixes {
            PrefixPolicy::AllLengths => (1..=n).collect(),
            PrefixPolicy::FullOnly => vec![n],
        };
        let mut groups = Vec::new();
        for l in lengths {
            let radix: Vec<usize> = (0..l).map(|t| profile.n_instruments(t)).collect();
            let total = radix.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r));
            let indices: Vec<usize> = match (self.selection, total) {
                (TupleSelection::Sampled(0), _) => {
                    return Err(Error::Argument("sampled scheme needs at least one tuple per length".into()))
                }
                (TupleSelection::Exhaustive, Some(total)) => (0..total).collect(),
                (TupleSelection::Sampled(m), Some(total)) if m >= total => (0..total).collect(),
                (TupleSelection::Sampled(m), Some(total)) => {
                    let mut rng = rng_from_seed(derive_seed(derive_seed(seed, 0x7u64 << 32), l as u64));
                    let mut picked = sample(&mut rng, total, m).into_vec();
                    picked.sort_unstable();
                    picked
                }
                (_, None) => return Err(Error::Argument(format!("instrument tuple count overflows at length {l}"))),
            };
            for idx in indices {
                let mut rem = idx;
                let mut v = vec![0; l];
                for t in (0..l).rev() {
                    v[t] = rem % radix[t];
                    rem /= radix[t];
                }
                for u in 0..profile.n_states() {
                    groups.push((u, v.clone()));
                }
            }
        }
        Ok(groups)
    }
}

/// Records plus the settings that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub records: Vec<ExperimentRecord>,
    pub seed: u64,
    /// Zero for exact probabilities.
    pub shots: u64,
}

impl Dataset {
    pub fn new(records: Vec<ExperimentRecord>, seed: u64, shots: u64) -> Self {
        Self { records, seed, shots }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks every record's indices against `profile`.
    pub fn validate(&self, profile: &DimensionProfile) -> Result<()> {
        for (k, r) in self.records.iter().enumerate() {
            let s = &r.sequence;
            let bad = s.u >= profile.n_states()
                || s.is_empty()
                || s.len() > profile.slots()
                || s.v.len() != s.x.len()
                || s.v.iter().zip(&s.x).enumerate().any(|(t, (&v, &x))| {
                    v >= profile.n_instruments(t) || x >= profile.n_branches(t, v)
                });
            if bad {
                return Err(Error::Lookup(format!("record {k} ({s:?}) does not fit the profile")));
            }
            if !r.value.is_finite() {
                return Err(Error::Numeric(format!("record {k} has non-finite value")));
            }
        }
        Ok(())
    }

    /// Sums of values per `(u, v)` group, in first-appearance order.
    pub fn group_sums(&self) -> Vec<((usize, Vec<usize>), f64)> {
        let mut out: Vec<((usize, Vec<usize>), f64)> = Vec::new();
        let mut index: std::collections::HashMap<(usize, Vec<usize>), usize> = std::collections::HashMap::new();
        for r in &self.records {
            let key = (r.sequence.u, r.sequence.v.clone());
            match index.get(&key) {
                Some(&k) => out[k].1 += r.value,
                None => {
                    index.insert(key.clone(), out.len());
                    out.push((key, r.value));
                }
            }
        }
        out
    }
}

fn sample_counts<R: rand::Rng>(probs: &[f64], shots: u64, rng: &mut R) -> Result<Vec<u64>> {
    let mut remaining = shots;
    let mut mass = 1.0f64;
    let mut counts = Vec::with_capacity(probs.len());
    for (k, &p) in probs.iter().enumerate() {
        let p = p.max(0.0);
        let c = if k + 1 == probs.len() {
            remaining
        } else if remaining == 0 || mass <= 0.0 {
            0
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, q).map_err(|e| Error::Numeric(e.to_string()))?.sample(rng)
        };
        counts.push(c);
        remaining -= c;
        mass -= p;
    }
    Ok(counts)
}

/// Evaluates every group of `scheme` on `cis`. `shots = None` stores exact
/// probabilities; otherwise each group is sampled multinomially from its own
/// stream derived from `(seed, group index)`.
pub fn generate_dataset<T: Real>(
    cis: &CisSet<T>,
    scheme: &ExperimentScheme,
    shots: Option<u64>,
    seed: u64,
) -> Result<Dataset> {
    if shots == Some(0) {
        return Err(Error::Argument("frequency mode needs at least one shot".into()));
    }
    let groups = scheme.groups(cis.profile(), seed)?;
    let per_group: Vec<Vec<ExperimentRecord>> = groups
        .par_iter()
        .enumerate()
        .map(|(g, (u, v))| {
            let dist = prefix_distribution(cis, *u, v)?;
            let probs: Vec<f64> = dist.iter().map(|(_, p)| p.as_f64()).collect();
            let (values, kind, n) = match shots {
                None => (probs, RecordKind::Exact, 0),
                Some(n) => {
                    let mut rng = rng_from_seed(derive_seed(seed, g as u64));
                    let counts = sample_counts(&probs, n, &mut rng)?;
                    (counts.iter().map(|&c| c as f64 / n as f64).collect(), RecordKind::Frequency, n)
                }
            };
            Ok(dist
                .into_iter()
                .zip(values)
                .map(|((x, _), value)| ExperimentRecord {
                    sequence: OutcomeSequence { u: *u, v: v.clone(), x },
                    value,
                    kind,
                    shots: n,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(Dataset::new(per_group.into_iter().flatten().collect(), seed, shots.unwrap_or(0)))
}
