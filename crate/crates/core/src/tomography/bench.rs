//! Timing of one loss-and-gradient evaluation.

use std::time::Instant;

use super::objective::Objective;
use crate::cis::{random_cis, DimensionProfile};
use crate::error::Result;
use crate::random::derive_seed;
use crate::simulator::{generate_dataset, ExperimentScheme};

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub label: String,
    pub repetition: usize,
    pub records: usize,
    pub wall_ms: f64,
}

/// Times `repetitions` evaluations per profile on a random model and exact
/// data from `scheme`. Rows are labelled by the ancilla dimensions.
pub fn benchmark_iteration(
    profiles: &[DimensionProfile],
    scheme: &ExperimentScheme,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    if repetitions == 0 {
        return Ok(rows);
    }
    for (k, profile) in profiles.iter().enumerate() {
        let truth = random_cis::<f64>(profile, derive_seed(seed, 2 * k as u64))?;
        let model = random_cis::<f64>(profile, derive_seed(seed, 2 * k as u64 + 1))?;
        let data = generate_dataset(&truth, scheme, None, seed)?;
        let objective = Objective::new(profile, &data)?;
        let label = profile.d_anc().iter().map(usize::to_string).collect::<Vec<_>>().join("-");
        objective.evaluate(&model)?;
        for repetition in 0..repetitions {
            let clock = Instant::now();
            objective.evaluate(&model)?;
            let wall_ms = clock.elapsed().as_secs_f64() * 1e3;
            rows.push(TimingRow { label: label.clone(), repetition, records: data.len(), wall_ms });
        }
    }
    Ok(rows)
}

/// Mean wall time per label, in first-appearance order.
pub fn mean_times(rows: &[TimingRow]) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64, usize)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(l, _, _)| *l == r.label) {
            Some(e) => {
                e.1 += r.wall_ms;
                e.2 += 1;
            }
            None => out.push((r.label.clone(), r.wall_ms, 1)),
        }
    }
    out.into_iter().map(|(l, s, n)| (l, s / n as f64)).collect()
}
