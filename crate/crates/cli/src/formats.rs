//! On-disk formats: model JSON, dataset JSON Lines, CSV tables, manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use combtomo_core::cis::{DimensionProfile, FactorId};
use combtomo_core::simulator::{Dataset, ExperimentRecord, OutcomeSequence, PerturbationSpec, RecordKind};
use combtomo_core::{CMatrix, Cis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error;

pub const FORMAT_VERSION: u32 = 1;

/// Row-major matrix with `[re, im]` entries.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProfileJson {
    pub d_in: Vec<usize>,
    pub d_out: Vec<usize>,
    pub d_anc: Vec<usize>,
    pub d_env: Vec<Vec<Vec<usize>>>,
    pub d_ref: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CisJson {
    pub comb: Vec<MatrixJson>,
    pub instruments: Vec<Vec<MatrixJson>>,
    pub states: Vec<MatrixJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PerturbationJson {
    pub angle: f64,
    pub axis: [f64; 3],
    pub states: Vec<usize>,
    pub unitary_instruments: Vec<usize>,
    pub measurement_instruments: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: u32,
    pub profile: ProfileJson,
    pub model: CisJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal: Option<CisJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationJson>,
}

fn matrix_json(m: &CMatrix) -> MatrixJson {
    (0..m.rows()).map(|r| m.row(r).iter().map(|c| [c.re, c.im]).collect()).collect()
}

fn matrix_from_json(m: &MatrixJson, what: &str) -> Result<CMatrix> {
    let rows: Vec<Vec<Complex64>> = m.iter().map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)).collect()).collect();
    CMatrix::from_rows(&rows).map_err(|e| error::validation(format!("{what}: {e}")))
}

pub fn profile_json(p: &DimensionProfile) -> ProfileJson {
    ProfileJson {
        d_in: p.d_in().to_vec(),
        d_out: p.d_out().to_vec(),
        d_anc: p.d_anc().to_vec(),
        d_env: p.d_env().to_vec(),
        d_ref: p.d_ref().to_vec(),
    }
}

pub fn profile_from_json(p: &ProfileJson) -> Result<DimensionProfile> {
    DimensionProfile::new(p.d_in.clone(), p.d_out.clone(), p.d_anc.clone(), p.d_env.clone(), p.d_ref.clone())
        .map_err(|e| error::validation(e.to_string()))
}

pub fn cis_json(cis: &Cis) -> CisJson {
    CisJson {
        comb: cis.comb().isometries().iter().map(|v| matrix_json(v.matrix())).collect(),
        instruments: cis
            .instruments()
            .iter()
            .map(|slot| slot.iter().map(|i| matrix_json(i.stacked().matrix())).collect())
            .collect(),
        states: cis.states().iter().map(|s| matrix_json(s.purification().matrix())).collect(),
    }
}

pub fn cis_from_json(profile: &DimensionProfile, c: &CisJson) -> Result<Cis> {
    let factors = profile
        .factor_ids()
        .into_iter()
        .map(|id| {
            let (m, what) = match id {
                FactorId::Comb(t) => (c.comb.get(t), format!("comb isometry {t}")),
                FactorId::Instrument { slot, index } => {
                    (c.instruments.get(slot).and_then(|s| s.get(index)), format!("instrument {index} at slot {slot}"))
                }
                FactorId::State(u) => (c.states.get(u), format!("state {u}")),
            };
            let m = m.ok_or_else(|| error::validation(format!("{what} is missing")))?;
            matrix_from_json(m, &what)
        })
        .collect::<Result<Vec<_>>>()?;
    let expected = (profile.slots(), profile.slots(), profile.n_states());
    let counts = (c.comb.len(), c.instruments.len(), c.states.len());
    let per_slot_ok = c.instruments.iter().enumerate().all(|(t, s)| s.len() == profile.n_instruments(t));
    if counts != expected || !per_slot_ok {
        return Err(error::validation("model has more factors than its profile declares"));
    }
    Cis::from_factors(profile, factors).map_err(|e| error::validation(e.to_string()))
}

pub fn perturbation_json(p: &PerturbationSpec) -> Result<PerturbationJson> {
    Ok(PerturbationJson {
        angle: p.angle,
        axis: p.axis.unit()?,
        states: p.states.clone(),
        unitary_instruments: p.unitary_instruments.clone(),
        measurement_instruments: p.measurement_instruments.clone(),
    })
}

/// A parsed model file.
#[derive(Debug)]
pub struct Model {
    pub profile: DimensionProfile,
    pub model: Cis,
    pub nominal: Option<Cis>,
    pub perturbation: Option<PerturbationJson>,
}

impl Model {
    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            version: FORMAT_VERSION,
            profile: profile_json(&self.profile),
            model: cis_json(&self.model),
            nominal: self.nominal.as_ref().map(cis_json),
            perturbation: self.perturbation.clone(),
        }
    }

    pub fn from_file(f: &ModelFile) -> Result<Self> {
        if f.version != FORMAT_VERSION {
            return Err(error::validation(format!("unsupported model version {}", f.version)));
        }
        let profile = profile_from_json(&f.profile)?;
        let model = cis_from_json(&profile, &f.model).context("model")?;
        let nominal = f.nominal.as_ref().map(|n| cis_from_json(&profile, n)).transpose().context("nominal")?;
        Ok(Self { profile, model, nominal, perturbation: f.perturbation.clone() })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_file())?;
        write_text(path, &(text + "\n"))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
        let file: ModelFile = serde_json::from_str(&text).with_context(|| format!("parsing model {}", path.display()))?;
        Self::from_file(&file).with_context(|| format!("validating model {}", path.display()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RecordJson {
    pub u: usize,
    pub v: Vec<usize>,
    pub x: Vec<usize>,
    #[serde(rename = "L")]
    pub len: usize,
    pub value: f64,
    pub kind: String,
    pub shots: u64,
}

pub fn record_json(r: &ExperimentRecord) -> RecordJson {
    RecordJson {
        u: r.sequence.u,
        v: r.sequence.v.clone(),
        x: r.sequence.x.clone(),
        len: r.sequence.len(),
        value: r.value,
        kind: match r.kind {
            RecordKind::Exact => "exact",
            RecordKind::Frequency => "frequency",
        }
        .into(),
        shots: r.shots,
    }
}

fn record_from_json(j: RecordJson, line: usize) -> Result<ExperimentRecord> {
    let kind = match j.kind.as_str() {
        "exact" => RecordKind::Exact,
        "frequency" => RecordKind::Frequency,
        other => return Err(error::validation(format!("line {line}: unknown record kind {other:?}"))),
    };
    if j.len != j.v.len() {
        return Err(error::validation(format!("line {line}: L = {} but v has {} entries", j.len, j.v.len())));
    }
    let sequence =
        OutcomeSequence::new(j.u, j.v, j.x).map_err(|e| error::validation(format!("line {line}: {e}")))?;
    Ok(ExperimentRecord { sequence, value: j.value, kind, shots: j.shots })
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = String::new();
    for r in &data.records {
        out.push_str(&serde_json::to_string(&record_json(r))?);
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading dataset {}", path.display()))?;
    let mut records = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let j: RecordJson =
            serde_json::from_str(line).with_context(|| format!("parsing {} line {}", path.display(), k + 1))?;
        records.push(record_from_json(j, k + 1)?);
    }
    let shots = records.first().map_or(0, |r| r.shots);
    Ok(Dataset::new(records, 0, shots))
}

/// Writes a CSV table; floats use the shortest exact representation.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn float(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

/// Provenance record written next to every command's outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

impl RunManifest {
    pub fn start(command: &str, config_text: &str, seeds: Vec<u64>) -> Self {
        Self {
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: sha256_bytes(config_text.as_bytes()),
            seeds,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            started_unix_ms: unix_ms(),
            finished_unix_ms: 0,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Digests every output, keyed relative to `root`.
    pub fn finish(mut self, root: &Path, outputs: &[PathBuf]) -> Result<()> {
        for p in outputs {
            let key = p.strip_prefix(root).unwrap_or(p).display().to_string();
            self.outputs.insert(key, sha256_file(p)?);
        }
        self.finished_unix_ms = unix_ms();
        write_text(&root.join("manifest.json"), &(serde_json::to_string_pretty(&self)? + "\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use combtomo_core::cis::random_cis;
    use combtomo_core::simulator::{generate_dataset, ExperimentScheme, PrefixPolicy, TupleSelection};

    fn sample_profile() -> DimensionProfile {
        DimensionProfile::new(
            vec![2, 2, 2],
            vec![2, 2],
            vec![1, 2, 3],
            vec![vec![vec![1, 2], vec![1, 1]], vec![vec![2, 1, 1]]],
            vec![2],
        )
        .unwrap()
    }

    #[test]
    fn model_round_trip_is_exact() {
        let profile = sample_profile();
        let cis: Cis = random_cis(&profile, 4).unwrap();
        let model = Model { profile: profile.clone(), model: cis.clone(), nominal: Some(cis.clone()), perturbation: None };
        let text = serde_json::to_string_pretty(&model.to_file()).unwrap();
        let back = Model::from_file(&serde_json::from_str(&text).unwrap()).unwrap();
        for (a, b) in back.model.factor_matrices().into_iter().zip(cis.factor_matrices()) {
            assert_eq!(a, b);
        }
        assert_eq!(serde_json::to_string_pretty(&back.to_file()).unwrap(), text);
    }

    #[test]
    fn off_manifold_model_is_rejected() {
        let profile = sample_profile();
        let cis: Cis = random_cis(&profile, 4).unwrap();
        let mut file = Model { profile, model: cis, nominal: None, perturbation: None }.to_file();
        file.model.states[0][0][0][0] += 0.1;
        let err = Model::from_file(&file).unwrap_err();
        assert_eq!(crate::error::classify(&err), crate::error::Kind::Validation);
        file.model.states.pop();
        assert!(Model::from_file(&file).is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let profile = sample_profile();
        let cis: Cis = random_cis(&profile, 5).unwrap();
        let scheme = ExperimentScheme { selection: TupleSelection::Exhaustive, prefixes: PrefixPolicy::AllLengths };
        let data = generate_dataset(&cis, &scheme, Some(100), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&path, &data).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.records, data.records);
        let first = fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
        assert!(first.starts_with("{\"u\":0,\"v\":[0],\"x\":[0],\"L\":1,\"value\":"), "{first}");
        assert!(first.ends_with(",\"kind\":\"frequency\",\"shots\":100}"), "{first}");
    }

    #[test]
    fn malformed_records_are_validation_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        for line in [
            r#"{"u":0,"v":[0],"x":[0],"L":2,"value":0.5,"kind":"exact","shots":0}"#,
            r#"{"u":0,"v":[0],"x":[0],"L":1,"value":0.5,"kind":"guess","shots":0}"#,
            r#"{"u":0,"v":[0],"x":[0,1],"L":1,"value":0.5,"kind":"exact","shots":0}"#,
            r#"{"u":0,"v":[0]}"#,
        ] {
            fs::write(&path, line).unwrap();
            let err = read_dataset(&path).unwrap_err();
            assert_eq!(crate::error::classify(&err), crate::error::Kind::Validation, "{line}");
        }
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 0.0, 12345.678] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
    }
}
