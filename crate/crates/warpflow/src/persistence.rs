//! Profile (`.wfp`) and checkpoint (`.wfc`) files.
//!
//! Both are JSON documents. Every float is stored as the 16 hex digits of its
//! IEEE-754 bit pattern, so a round trip is bit-exact, including signed zeros
//! and NaN payloads. Checkpoints carry a SHA-256 checksum over their canonical
//! serialization with the checksum field blank.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use warpflow_core::evolve::{Outcome, SimulationParts};
use warpflow_core::metric::{validate_smoothness, SMOOTHNESS_TOL};
use warpflow_core::{FlowState, GeoSummary, GirthCandidate, Grid, Mesh, Profile, SchemeOrder, TerminationReason};

use crate::config::JobConfig;

pub const SCHEMA_VERSION: &str = "1.0";
const SCHEMA_MAJOR: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("schema version {found} is not supported (this build reads {SCHEMA_VERSION})")]
    Version { found: String },
    #[error("checksum mismatch: file is corrupted")]
    Checksum,
    #[error("profile fails validation: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

fn malformed(msg: impl Into<String>) -> CodecError {
    CodecError::Malformed(msg.into())
}

/// An `f64` serialized as the hex digits of its bit pattern.
#[derive(Clone, Copy, Debug)]
pub struct Hex(pub f64);

impl Serialize for Hex {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:016x}", self.0.to_bits()))
    }
}

impl<'de> Deserialize<'de> for Hex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Hex, D::Error> {
        let s = String::deserialize(d)?;
        if s.len() != 16 {
            return Err(serde::de::Error::custom(format!("float `{s}` is not 16 hex digits")));
        }
        u64::from_str_radix(&s, 16)
            .map(|b| Hex(f64::from_bits(b)))
            .map_err(|_| serde::de::Error::custom(format!("float `{s}` is not hex")))
    }
}

fn hex_vec(f: &[f64]) -> Vec<Hex> {
    f.iter().copied().map(Hex).collect()
}

fn unhex(f: &[Hex]) -> Vec<f64> {
    f.iter().map(|h| h.0).collect()
}

fn check_version(v: &str) -> Result<(), CodecError> {
    let major = v.split('.').next().and_then(|m| m.parse::<u32>().ok());
    match major {
        Some(SCHEMA_MAJOR) => Ok(()),
        _ => Err(CodecError::Version { found: v.to_string() }),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One link of a provenance chain: a generator with parameters, or
/// `"evolved"` with the hash of the parent record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

impl Provenance {
    pub fn generated(generator: String, params: BTreeMap<String, String>) -> Provenance {
        Provenance { generator, params, parent: None }
    }

    pub fn evolved(parent_hash: String, params: BTreeMap<String, String>) -> Provenance {
        Provenance { generator: "evolved".to_string(), params, parent: Some(parent_hash) }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MeshRecord {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    strength: Option<Hex>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileRecord {
    schema_version: String,
    kind: String,
    n: usize,
    node_count: usize,
    mesh: MeshRecord,
    order: u32,
    chi: Vec<Hex>,
    psi: Vec<Hex>,
    phi: Vec<Hex>,
    provenance: Vec<Provenance>,
}

impl ProfileRecord {
    pub fn new(p: &Profile, provenance: Vec<Provenance>) -> ProfileRecord {
        let g = p.grid();
        let mesh = match g.mesh() {
            Mesh::Uniform => MeshRecord { kind: "uniform".to_string(), strength: None },
            Mesh::Stretched { strength } => MeshRecord { kind: "stretched".to_string(), strength: Some(Hex(strength)) },
        };
        ProfileRecord {
            schema_version: SCHEMA_VERSION.to_string(),
            kind: "profile".to_string(),
            n: p.dimension(),
            node_count: g.node_count(),
            mesh,
            order: g.order().as_u32(),
            chi: hex_vec(p.chi()),
            psi: hex_vec(p.psi()),
            phi: hex_vec(p.phi()),
            provenance,
        }
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    /// Rebuilds the profile. Structure is always checked; `smoothness_tol`
    /// adds the endpoint and positivity conditions.
    pub fn to_profile(&self, smoothness_tol: Option<f64>) -> Result<Profile, CodecError> {
        check_version(&self.schema_version)?;
        if self.kind != "profile" {
            return Err(malformed(format!("expected a profile record, found `{}`", self.kind)));
        }
        if self.provenance.is_empty() {
            return Err(malformed("provenance chain is empty"));
        }
        for (name, f) in [("chi", &self.chi), ("psi", &self.psi), ("phi", &self.phi)] {
            if f.len() != self.node_count {
                return Err(malformed(format!("{name} has {} entries, node_count is {}", f.len(), self.node_count)));
            }
        }
        let mesh = match (self.mesh.kind.as_str(), self.mesh.strength) {
            ("uniform", None) => Mesh::Uniform,
            ("stretched", Some(Hex(strength))) => Mesh::Stretched { strength },
            (k, _) => return Err(malformed(format!("unknown mesh descriptor `{k}`"))),
        };
        let order = SchemeOrder::from_u32(self.order).map_err(|e| malformed(e.to_string()))?;
        let grid = Grid::new(self.node_count, mesh, order).map_err(|e| malformed(e.to_string()))?;
        let p = Profile::new(Arc::new(grid), self.n, unhex(&self.chi), unhex(&self.psi), unhex(&self.phi))
            .map_err(|e| CodecError::Invalid(vec![e.to_string()]))?;
        if let Some(tol) = smoothness_tol {
            let report = validate_smoothness(&p, tol);
            if !report.passed() {
                let details = report
                    .failures()
                    .map(|c| format!("{} violated by {:e} (tolerance {tol:e})", c.condition.describe(), c.violation))
                    .collect();
                return Err(CodecError::Invalid(details));
            }
        }
        Ok(p)
    }
}

pub fn encode_profile(p: &Profile, provenance: Vec<Provenance>) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(&ProfileRecord::new(p, provenance)).expect("profile records serialize");
    bytes.push(b'\n');
    bytes
}

pub fn decode_record(bytes: &[u8]) -> Result<ProfileRecord, CodecError> {
    let head: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| malformed(e.to_string()))?;
    if let Some(v) = head.get("schema_version").and_then(|v| v.as_str()) {
        check_version(v)?;
    }
    serde_json::from_value(head).map_err(|e| malformed(e.to_string()))
}

/// Decodes a `.wfp` payload and validates smoothness at the default tolerance.
pub fn decode_profile(bytes: &[u8]) -> Result<(Profile, Vec<Provenance>), CodecError> {
    decode_profile_with(bytes, SMOOTHNESS_TOL)
}

pub fn decode_profile_with(bytes: &[u8], smoothness_tol: f64) -> Result<(Profile, Vec<Provenance>), CodecError> {
    let rec = decode_record(bytes)?;
    let p = rec.to_profile(Some(smoothness_tol))?;
    Ok((p, rec.provenance))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SummaryRecord {
    step: u64,
    time: Hex,
    ell: Hex,
    h: Hex,
    area: Hex,
    d: Hex,
    girth_est: Hex,
    girth_candidate: String,
    sc_max: Hex,
    lambda_hat: Hex,
    ordering_margins: [Hex; 4],
    gradient_margins: [Hex; 4],
    cylinder_gap: Hex,
    cigar_gap: Hex,
    cylinder_parts: [Hex; 3],
    cigar_parts: [Hex; 2],
    k_top_waist: Hex,
    psi_max: Hex,
    phi_max: Hex,
}

fn hex_arr<const K: usize>(a: [f64; K]) -> [Hex; K] {
    a.map(Hex)
}

fn unhex_arr<const K: usize>(a: [Hex; K]) -> [f64; K] {
    a.map(|h| h.0)
}

impl From<&GeoSummary> for SummaryRecord {
    fn from(s: &GeoSummary) -> SummaryRecord {
        SummaryRecord {
            step: s.step,
            time: Hex(s.time),
            ell: Hex(s.ell),
            h: Hex(s.h),
            area: Hex(s.area),
            d: Hex(s.d),
            girth_est: Hex(s.girth_est),
            girth_candidate: s.girth_candidate.tag().to_string(),
            sc_max: Hex(s.sc_max),
            lambda_hat: Hex(s.lambda_hat),
            ordering_margins: hex_arr(s.ordering_margins),
            gradient_margins: hex_arr(s.gradient_margins),
            cylinder_gap: Hex(s.cylinder_gap),
            cigar_gap: Hex(s.cigar_gap),
            cylinder_parts: hex_arr(s.cylinder_parts),
            cigar_parts: hex_arr(s.cigar_parts),
            k_top_waist: Hex(s.k_top_waist),
            psi_max: Hex(s.psi_max),
            phi_max: Hex(s.phi_max),
        }
    }
}

impl SummaryRecord {
    fn to_summary(&self) -> Result<GeoSummary, CodecError> {
        let girth_candidate = GirthCandidate::parse(&self.girth_candidate)
            .ok_or_else(|| malformed(format!("unknown girth candidate `{}`", self.girth_candidate)))?;
        Ok(GeoSummary {
            step: self.step,
            time: self.time.0,
            ell: self.ell.0,
            h: self.h.0,
            area: self.area.0,
            d: self.d.0,
            girth_est: self.girth_est.0,
            girth_candidate,
            sc_max: self.sc_max.0,
            lambda_hat: self.lambda_hat.0,
            ordering_margins: unhex_arr(self.ordering_margins),
            gradient_margins: unhex_arr(self.gradient_margins),
            cylinder_gap: self.cylinder_gap.0,
            cigar_gap: self.cigar_gap.0,
            cylinder_parts: unhex_arr(self.cylinder_parts),
            cigar_parts: unhex_arr(self.cigar_parts),
            k_top_waist: self.k_top_waist.0,
            psi_max: self.psi_max.0,
            phi_max: self.phi_max.0,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct OutcomeRecord {
    reason: String,
    diagnostic: Option<String>,
    extinction_time: Option<Hex>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct StateRecord {
    time: Hex,
    dt_last: Hex,
    step_index: u64,
    profile: ProfileRecord,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CheckpointRecord {
    schema_version: String,
    kind: String,
    config_text: String,
    /// Sweep member parameter, when the run belongs to a sweep.
    tau: Option<Hex>,
    state: StateRecord,
    area0: Hex,
    sc0: Hex,
    summaries: Vec<SummaryRecord>,
    area_history: Vec<[Hex; 2]>,
    rejections: u64,
    outcome: Option<OutcomeRecord>,
    checksum: String,
}

/// What a checkpoint restores: the job, the simulation and the provenance of its state.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: JobConfig,
    pub tau: Option<f64>,
    pub parts: SimulationParts,
    pub provenance: Vec<Provenance>,
}

fn checksum_of(rec: &CheckpointRecord) -> String {
    let mut blank = rec.clone();
    blank.checksum = String::new();
    sha256_hex(&serde_json::to_vec(&blank).expect("checkpoint records serialize"))
}

pub fn encode_checkpoint(
    config: &JobConfig,
    tau: Option<f64>,
    parts: &SimulationParts,
    provenance: Vec<Provenance>,
) -> Vec<u8> {
    let st = &parts.state;
    let mut rec = CheckpointRecord {
        schema_version: SCHEMA_VERSION.to_string(),
        kind: "checkpoint".to_string(),
        config_text: config.source.clone(),
        tau: tau.map(Hex),
        state: StateRecord {
            time: Hex(st.time),
            dt_last: Hex(st.dt_last),
            step_index: st.step_index,
            profile: ProfileRecord::new(&st.profile, provenance),
        },
        area0: Hex(parts.area0),
        sc0: Hex(parts.sc0),
        summaries: parts.summaries.iter().map(SummaryRecord::from).collect(),
        area_history: parts.area_history.iter().map(|&(t, a)| [Hex(t), Hex(a)]).collect(),
        rejections: parts.rejections,
        outcome: parts.outcome.as_ref().map(|o| OutcomeRecord {
            reason: o.reason.tag().to_string(),
            diagnostic: o.diagnostic.clone(),
            extinction_time: o.extinction_time.map(Hex),
        }),
        checksum: String::new(),
    };
    rec.checksum = checksum_of(&rec);
    let mut bytes = serde_json::to_vec(&rec).expect("checkpoint records serialize");
    bytes.push(b'\n');
    bytes
}

/// Decodes a `.wfc` payload. Nothing is returned unless every part checks out.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CodecError> {
    let head: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| malformed(e.to_string()))?;
    match head.get("schema_version").and_then(|v| v.as_str()) {
        Some(v) => check_version(v)?,
        None => return Err(malformed("missing schema_version")),
    }
    let rec: CheckpointRecord = serde_json::from_value(head).map_err(|e| malformed(e.to_string()))?;
    if rec.kind != "checkpoint" {
        return Err(malformed(format!("expected a checkpoint record, found `{}`", rec.kind)));
    }
    if checksum_of(&rec) != rec.checksum {
        return Err(CodecError::Checksum);
    }
    let config = JobConfig::parse(&rec.config_text).map_err(|e| malformed(format!("embedded config: {e}")))?;
    // runs tolerate endpoint drift up to the configured tolerance
    let profile = rec.state.profile.to_profile(Some(config.run.smoothness_tol))?;
    let summaries = rec.summaries.iter().map(SummaryRecord::to_summary).collect::<Result<Vec<_>, _>>()?;
    let outcome = match &rec.outcome {
        None => None,
        Some(o) => Some(Outcome {
            reason: TerminationReason::parse(&o.reason)
                .ok_or_else(|| malformed(format!("unknown termination reason `{}`", o.reason)))?,
            diagnostic: o.diagnostic.clone(),
            extinction_time: o.extinction_time.map(|h| h.0),
        }),
    };
    let parts = SimulationParts {
        config: config.run.clone(),
        state: FlowState {
            time: rec.state.time.0,
            profile,
            step_index: rec.state.step_index,
            dt_last: rec.state.dt_last.0,
        },
        area0: rec.area0.0,
        sc0: rec.sc0.0,
        summaries,
        area_history: rec.area_history.iter().map(|[t, a]| (t.0, a.0)).collect(),
        rejections: rec.rejections,
        outcome,
    };
    Ok(Checkpoint { config, tau: rec.tau.map(|h| h.0), parts, provenance: rec.state.profile.provenance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_keeps_every_bit() {
        for x in [0.0, -0.0, 1.0 / 3.0, f64::MIN_POSITIVE / 7.0, f64::MAX, f64::NEG_INFINITY, f64::NAN] {
            let s = serde_json::to_string(&Hex(x)).unwrap();
            let y: Hex = serde_json::from_str(&s).unwrap();
            assert_eq!(x.to_bits(), y.0.to_bits());
        }
        assert!(serde_json::from_str::<Hex>("\"3ff00000000000\"").is_err());
        assert!(serde_json::from_str::<Hex>("\"3ff000000000000g\"").is_err());
    }

    #[test]
    fn versions() {
        assert!(check_version("1.0").is_ok());
        assert!(check_version("1.7").is_ok());
        assert!(matches!(check_version("2.0"), Err(CodecError::Version { .. })));
        assert!(check_version("x").is_err());
    }
}
