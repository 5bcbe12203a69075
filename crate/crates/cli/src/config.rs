//! TOML configuration document.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use combtomo_core::cis::parse_ancillas;
use combtomo_core::simulator::{Axis, ExperimentScheme, ExperimentSpec, PerturbationSpec, PrefixPolicy, TupleSelection};
use combtomo_core::stiefel::{AdamConfig, SecondMoment};
use combtomo_core::tomography::OptimizerConfig;
use serde::{Deserialize, Serialize};

use crate::error;

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigDocument {
    pub seed: u64,
    pub profile: ProfileSection,
    pub experiment: ExperimentSection,
    pub optimizer: OptimizerSection,
    pub paths: PathsSection,
    pub evaluate: EvaluateSection,
    pub suite: SuiteSection,
    pub benchmark: BenchmarkSection,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub slots: usize,
    /// System dimension; the standard instrument set is defined for qubits only.
    pub d: usize,
    /// Dash-separated ancilla dimensions, e.g. `"1-2-3"`; the last entry is
    /// repeated for any remaining slots.
    pub ancillas: String,
    pub instruments: usize,
    pub states: usize,
    pub ref_dim: usize,
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self { slots: 2, d: 2, ancillas: "1-2-2".into(), instruments: 12, states: 4, ref_dim: 1 }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Exhaustive,
    Sampled,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum PrefixKind {
    All,
    Full,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub scheme: SchemeKind,
    /// Tuples per prefix length for the sampled scheme.
    pub tuples: usize,
    pub prefixes: PrefixKind,
    /// Zero means exact probabilities.
    pub shots: u64,
    pub perturbation: PerturbationSection,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            scheme: SchemeKind::Sampled,
            tuples: 2000,
            prefixes: PrefixKind::All,
            shots: 0,
            perturbation: PerturbationSection::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum AxisSpec {
    Named(String),
    Vector([f64; 3]),
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationSection {
    pub angle: f64,
    pub axis: AxisSpec,
    pub states: Vec<usize>,
    pub unitary_instruments: Vec<usize>,
    pub measurement_instruments: Vec<usize>,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        let s = PerturbationSpec::standard(0.5);
        Self {
            angle: s.angle,
            axis: AxisSpec::Named("diagonal".into()),
            states: s.states,
            unitary_instruments: s.unitary_instruments,
            measurement_instruments: s.measurement_instruments,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SecondMomentKind {
    Euclidean,
    Projected,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub gamma1: f64,
    pub gamma2: f64,
    pub tau0: f64,
    pub epsilon: f64,
    pub second_moment: SecondMomentKind,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub loss_tolerance: Option<f64>,
    pub log_every: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let c = OptimizerConfig::default();
        Self {
            gamma1: c.adam.gamma1,
            gamma2: c.adam.gamma2,
            tau0: c.adam.tau0,
            epsilon: c.adam.epsilon,
            second_moment: match c.adam.second_moment {
                SecondMoment::Euclidean => SecondMomentKind::Euclidean,
                SecondMoment::Projected => SecondMomentKind::Projected,
            },
            max_iterations: c.max_iterations,
            gradient_tolerance: c.gradient_tolerance,
            loss_tolerance: c.loss_tolerance,
            log_every: c.log_every,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub out: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub reconstructed: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateSection {
    /// Number of instruments that get a PTM heatmap.
    pub figures: usize,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self { figures: 9 }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteSection {
    pub ancillas: Vec<String>,
    pub slots: Vec<usize>,
    pub angles: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Cells run concurrently; 0 uses the global thread count.
    pub workers: usize,
}

impl Default for SuiteSection {
    fn default() -> Self {
        Self {
            ancillas: vec!["1-2-2".into(), "1-2-3".into()],
            slots: vec![2, 3],
            angles: vec![0.5, 1.0],
            seeds: vec![1, 2, 3],
            workers: 0,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkSection {
    pub ancillas: Vec<String>,
    pub repetitions: usize,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self { ancillas: vec!["1-2-2".into(), "1-2-3".into(), "1-3-3".into(), "1-4-4".into()], repetitions: 3 }
    }
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: Self = toml::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.profile;
        if p.d != 2 {
            return Err(error::config(format!("profile.d = {}: the standard instrument set needs qubits (d = 2)", p.d)));
        }
        if p.slots == 0 || p.instruments == 0 || p.states == 0 || p.ref_dim == 0 {
            return Err(error::config("profile.slots, instruments, states and ref_dim must be positive"));
        }
        self.experiment_spec(self.seed)?.profile().map_err(|e| error::config(e.to_string()))?;
        self.scheme()?;
        self.perturbation()?;
        self.optimizer_config(self.seed).validate().map_err(|e| error::config(e.to_string()))?;
        for label in &self.suite.ancillas {
            for &n in &self.suite.slots {
                parse_ancillas(label, n).map_err(|e| error::config(format!("suite: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn experiment_spec(&self, seed: u64) -> Result<ExperimentSpec> {
        spec_for(&self.profile, &self.profile.ancillas, self.profile.slots, seed)
    }

    pub fn scheme(&self) -> Result<ExperimentScheme> {
        let selection = match self.experiment.scheme {
            SchemeKind::Exhaustive => TupleSelection::Exhaustive,
            SchemeKind::Sampled if self.experiment.tuples == 0 => {
                return Err(error::config("experiment.tuples must be positive for the sampled scheme"))
            }
            SchemeKind::Sampled => TupleSelection::Sampled(self.experiment.tuples),
        };
        let prefixes = match self.experiment.prefixes {
            PrefixKind::All => PrefixPolicy::AllLengths,
            PrefixKind::Full => PrefixPolicy::FullOnly,
        };
        Ok(ExperimentScheme { selection, prefixes })
    }

    pub fn shots(&self) -> Option<u64> {
        (self.experiment.shots > 0).then_some(self.experiment.shots)
    }

    pub fn perturbation(&self) -> Result<PerturbationSpec> {
        self.perturbation_at(self.experiment.perturbation.angle)
    }

    pub fn perturbation_at(&self, angle: f64) -> Result<PerturbationSpec> {
        let s = &self.experiment.perturbation;
        if !angle.is_finite() {
            return Err(error::config("perturbation angle must be finite"));
        }
        let axis = match &s.axis {
            AxisSpec::Named(name) => match name.to_ascii_lowercase().as_str() {
                "x" => Axis::X,
                "y" => Axis::Y,
                "z" => Axis::Z,
                "diagonal" => Axis::DIAGONAL,
                other => return Err(error::config(format!("unknown rotation axis {other:?}"))),
            },
            AxisSpec::Vector(v) => {
                if v.iter().all(|c| *c == 0.0) || v.iter().any(|c| !c.is_finite()) {
                    return Err(error::config("rotation axis vector must be finite and nonzero"));
                }
                Axis::Custom(*v)
            }
        };
        Ok(PerturbationSpec {
            angle,
            axis,
            states: s.states.clone(),
            unitary_instruments: s.unitary_instruments.clone(),
            measurement_instruments: s.measurement_instruments.clone(),
        })
    }

    pub fn optimizer_config(&self, seed: u64) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            adam: AdamConfig {
                gamma1: o.gamma1,
                gamma2: o.gamma2,
                tau0: o.tau0,
                epsilon: o.epsilon,
                second_moment: match o.second_moment {
                    SecondMomentKind::Euclidean => SecondMoment::Euclidean,
                    SecondMomentKind::Projected => SecondMoment::Projected,
                },
            },
            max_iterations: o.max_iterations,
            gradient_tolerance: o.gradient_tolerance,
            loss_tolerance: o.loss_tolerance,
            log_every: o.log_every,
            seed,
        }
    }
}

pub fn spec_for(p: &ProfileSection, ancillas: &str, slots: usize, seed: u64) -> Result<ExperimentSpec> {
    let ancillas = parse_ancillas(ancillas, slots).map_err(|e| error::config(e.to_string()))?;
    Ok(ExperimentSpec {
        slots,
        ancillas,
        instruments_per_slot: p.instruments,
        n_states: p.states,
        ref_dim: p.ref_dim,
        seed,
    })
}
