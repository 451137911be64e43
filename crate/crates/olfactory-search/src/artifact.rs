//! Binary policy artifacts and run manifests.
//!
//! Two artifact kinds ship with the suite: alpha-vector policies and value
//! network weights. Both carry the fingerprint of the case they were solved
//! for; evaluation refuses artifacts whose fingerprint does not match the
//! target case. Both formats round-trip bit-exactly.

use crate::cases::CaseSpec;
use crate::error::{Error, Result};
use crate::net::{Layer, NetworkSpec, WeightBundle};
use crate::pbvi::{AlphaPolicy, AlphaVector};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const ALPHA_MAGIC: &[u8; 8] = b"OSALPHA1";
const WEIGHTS_MAGIC: &[u8; 8] = b"OSVALNET";

/// Conventional file extensions for the two artifact kinds.
pub const ALPHA_EXT: &str = "alpha";
pub const WEIGHTS_EXT: &str = "weights";

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    let bytes = s.as_bytes();
    w.write_all(&(bytes.len() as u32).to_le_bytes())?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut buf = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Artifact(format!("bad string: {e}")))
}

fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * n];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Serializes an alpha-vector policy:
/// magic, fingerprint, gamma, shaping constant, state count, vector count,
/// then per vector an action tag and the state values.
pub fn write_alpha_policy<W: Write>(w: &mut W, policy: &AlphaPolicy) -> Result<()> {
    w.write_all(ALPHA_MAGIC)?;
    write_str(w, &policy.case_fingerprint)?;
    w.write_all(&policy.gamma.to_le_bytes())?;
    w.write_all(&policy.shaping_c.to_le_bytes())?;
    w.write_all(&(policy.state_count as u32).to_le_bytes())?;
    w.write_all(&(policy.alphas.len() as u32).to_le_bytes())?;
    for alpha in &policy.alphas {
        w.write_all(&[alpha.action.index() as u8])?;
        write_f64s(w, &alpha.values)?;
    }
    Ok(())
}

pub fn read_alpha_policy<R: Read>(r: &mut R) -> Result<AlphaPolicy> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != ALPHA_MAGIC {
        return Err(Error::Artifact("not an alpha policy artifact".into()));
    }
    let case_fingerprint = read_str(r)?;
    let mut f = [0u8; 8];
    r.read_exact(&mut f)?;
    let gamma = f64::from_le_bytes(f);
    r.read_exact(&mut f)?;
    let shaping_c = f64::from_le_bytes(f);
    let mut u = [0u8; 4];
    r.read_exact(&mut u)?;
    let state_count = u32::from_le_bytes(u) as usize;
    r.read_exact(&mut u)?;
    let count = u32::from_le_bytes(u) as usize;
    if count == 0 {
        return Err(Error::Artifact("alpha policy has no vectors".into()));
    }
    let mut alphas = Vec::with_capacity(count);
    for _ in 0..count {
        let mut tag = [0u8];
        r.read_exact(&mut tag)?;
        let action = crate::env::ACTIONS
            .get(tag[0] as usize)
            .copied()
            .ok_or_else(|| Error::Artifact(format!("bad action tag {}", tag[0])))?;
        alphas.push(AlphaVector {
            action,
            values: read_f64s(r, state_count)?,
        });
    }
    Ok(AlphaPolicy {
        case_fingerprint,
        gamma,
        shaping_c,
        state_count,
        alphas,
    })
}

pub fn save_alpha_policy(path: &Path, policy: &AlphaPolicy) -> Result<()> {
    let mut buf = Vec::new();
    write_alpha_policy(&mut buf, policy)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_alpha_policy(path: &Path) -> Result<AlphaPolicy> {
    let bytes = std::fs::read(path)?;
    read_alpha_policy(&mut bytes.as_slice())
}

/// Serializes network weights:
/// magic, fingerprint, activation tag, layer shapes, then per layer the
/// row-major weight block followed by the bias block.
pub fn write_weights<W: Write>(
    w: &mut W,
    bundle: &WeightBundle,
    case_fingerprint: &str,
) -> Result<()> {
    w.write_all(WEIGHTS_MAGIC)?;
    write_str(w, case_fingerprint)?;
    write_str(w, "relu")?;
    w.write_all(&(bundle.layers.len() as u32).to_le_bytes())?;
    for layer in &bundle.layers {
        w.write_all(&(layer.rows as u32).to_le_bytes())?;
        w.write_all(&(layer.cols as u32).to_le_bytes())?;
    }
    for layer in &bundle.layers {
        write_f64s(w, &layer.w)?;
        write_f64s(w, &layer.b)?;
    }
    Ok(())
}

pub fn read_weights<R: Read>(r: &mut R) -> Result<(WeightBundle, String)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != WEIGHTS_MAGIC {
        return Err(Error::Artifact("not a weights artifact".into()));
    }
    let fingerprint = read_str(r)?;
    let activation = read_str(r)?;
    if activation != "relu" {
        return Err(Error::Artifact(format!(
            "unknown activation '{activation}'"
        )));
    }
    let mut u = [0u8; 4];
    r.read_exact(&mut u)?;
    let layer_count = u32::from_le_bytes(u) as usize;
    if layer_count == 0 {
        return Err(Error::Artifact("weights artifact has no layers".into()));
    }
    let mut shapes = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        r.read_exact(&mut u)?;
        let rows = u32::from_le_bytes(u) as usize;
        r.read_exact(&mut u)?;
        let cols = u32::from_le_bytes(u) as usize;
        shapes.push((rows, cols));
    }
    let mut layers = Vec::with_capacity(layer_count);
    for &(rows, cols) in &shapes {
        let wv = read_f64s(r, rows * cols)?;
        let bv = read_f64s(r, rows)?;
        layers.push(Layer {
            rows,
            cols,
            w: wv,
            b: bv,
        });
    }
    let spec = NetworkSpec {
        input: shapes[0].1,
        hidden: shapes[..layer_count - 1]
            .iter()
            .map(|&(rows, _)| rows)
            .collect(),
    };
    if shapes[layer_count - 1].0 != 1 {
        return Err(Error::Artifact("output layer must be scalar".into()));
    }
    Ok((WeightBundle { spec, layers }, fingerprint))
}

pub fn save_weights(path: &Path, bundle: &WeightBundle, fingerprint: &str) -> Result<()> {
    let mut buf = Vec::new();
    write_weights(&mut buf, bundle, fingerprint)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<(WeightBundle, String)> {
    let bytes = std::fs::read(path)?;
    read_weights(&mut bytes.as_slice())
}

/// Refuses artifacts solved for a different case.
pub fn check_fingerprint(artifact: &str, case: &CaseSpec) -> Result<()> {
    let expected = case.fingerprint();
    if artifact != expected {
        return Err(Error::FingerprintMismatch {
            artifact: artifact.into(),
            case: expected,
        });
    }
    Ok(())
}

/// Provenance record written next to every produced artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub case: CaseSpec,
    pub case_fingerprint: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub artifacts: Vec<String>,
    pub version: String,
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, case: &CaseSpec, seed: u64, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.into(),
            case: case.clone(),
            case_fingerprint: case.fingerprint(),
            seed,
            config,
            artifacts: Vec::new(),
            version: env!("CARGO_PKG_VERSION").into(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Artifact(format!("manifest serialization: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Artifact(format!("manifest parse: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn alpha_policy_round_trips_bit_exactly() {
        use rand::Rng;
        let case = CaseSpec::preset("isotropic-small").unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = case.state_count();
        let policy = AlphaPolicy {
            case_fingerprint: case.fingerprint(),
            gamma: 0.98,
            shaping_c: 0.2,
            state_count: n,
            alphas: (0..5)
                .map(|i| AlphaVector {
                    action: crate::env::ACTIONS[i % 4],
                    values: (0..n).map(|_| rng.gen_range(-50.0..0.0)).collect(),
                })
                .collect(),
        };
        let mut buf = Vec::new();
        write_alpha_policy(&mut buf, &policy).unwrap();
        let restored = read_alpha_policy(&mut buf.as_slice()).unwrap();
        assert_eq!(policy, restored);
        let mut buf2 = Vec::new();
        write_alpha_policy(&mut buf2, &restored).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn weights_round_trip_bit_exactly() {
        let spec = NetworkSpec::three_layer(45, 8);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let bundle = WeightBundle::init(&spec, &mut rng);
        let mut buf = Vec::new();
        write_weights(&mut buf, &bundle, "deadbeef00000000").unwrap();
        let (restored, fp) = read_weights(&mut buf.as_slice()).unwrap();
        assert_eq!(bundle, restored);
        assert_eq!(fp, "deadbeef00000000");
        let mut buf2 = Vec::new();
        write_weights(&mut buf2, &restored, &fp).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn mismatched_fingerprint_refused() {
        let case = CaseSpec::preset("isotropic-small").unwrap();
        assert!(check_fingerprint(&case.fingerprint(), &case).is_ok());
        assert!(matches!(
            check_fingerprint("0000000000000000", &case),
            Err(Error::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn corrupt_artifacts_are_rejected() {
        assert!(read_alpha_policy(&mut &b"garbage!"[..]).is_err());
        assert!(read_weights(&mut &b"OSALPHA1xxxx"[..]).is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let case = CaseSpec::preset("windy-scarce").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut manifest =
            RunManifest::new("evaluate", &case, 7, serde_json::json!({"episodes": 100}));
        manifest.artifacts.push("report.csv".into());
        let path = dir.path().join("manifest.json");
        manifest.save(&path).unwrap();
        let loaded = RunManifest::load(&path).unwrap();
        assert_eq!(loaded.command, "evaluate");
        assert_eq!(loaded.case_fingerprint, case.fingerprint());
        assert_eq!(loaded.artifacts, vec!["report.csv".to_string()]);
    }
}
