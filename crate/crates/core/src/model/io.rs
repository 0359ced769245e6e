//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content                                               |
//! |-------|-------------------------------------------------------|
//! | 4     | magic `EDBN`                                          |
//! | 2     | format version (`u16`)                                |
//! | 4     | header length in bytes (`u32`)                        |
//! | n     | UTF-8 header, one `key=value` per line                |
//! | rest  | `f32` parameters: embedding (row-major), then branch A, branch B and head layers, weight then bias for each |
//!
//! Header keys: `feature_count`, `id_vocab`, `embed_dim`, `branch_a_widths`,
//! `branch_b_widths`, `head_widths` (comma-separated), `id_branch`,
//! `activation`, and optionally `feature_names` and `vocab` (raw investment
//! ids in dense-index order starting at index 1).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{DualBranchNet, InputSchema, Mlp, ModelConfig};
use crate::data::Vocab;
use crate::error::{Error, Result};
use crate::layers::{EmbeddingTable, LinearParams};
use crate::tensor::Matrix;

pub const MAGIC: [u8; 4] = *b"EDBN";
pub const FORMAT_VERSION: u16 = 1;

/// What [`inspect`] reads from a model file without building the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFileInfo {
    pub version: u16,
    pub config: ModelConfig,
    pub payload_scalars: usize,
}

fn join(widths: &[usize]) -> String {
    widths
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn header_text(net: &DualBranchNet<f32>) -> String {
    let c = net.config();
    let mut lines = vec![
        format!("feature_count={}", c.feature_count),
        format!("id_vocab={}", c.id_vocab),
        format!("embed_dim={}", c.embed_dim),
        format!("branch_a_widths={}", join(&c.branch_a_widths)),
        format!("branch_b_widths={}", join(&c.branch_b_widths)),
        format!("head_widths={}", join(&c.head_widths)),
        format!("id_branch={}", c.id_branch),
        "activation=swish".to_string(),
    ];
    if let Some(s) = net.schema() {
        lines.push(format!("feature_names={}", s.feature_names.join(",")));
        let ids: Vec<String> = s.vocab.raw_ids().iter().map(i64::to_string).collect();
        lines.push(format!("vocab={}", ids.join(",")));
    }
    let mut text = lines.join("\n");
    text.push('\n');
    text
}

/// Serializes the network to bytes.
pub fn to_bytes(net: &DualBranchNet<f32>) -> Vec<u8> {
    let header = header_text(net);
    let mut out = Vec::with_capacity(10 + header.len() + 4 * net.param_count());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for t in net.param_tensors() {
        for x in t {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn save(net: &DualBranchNet<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(net)).map_err(|e| Error::io(path, e))
}

struct Parsed<'a> {
    version: u16,
    config: ModelConfig,
    schema_fields: (Option<Vec<String>>, Option<Vec<i64>>),
    payload: &'a [u8],
}

fn parse_widths(key: &str, v: &str) -> Result<Vec<usize>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| {
            s.parse()
                .map_err(|_| Error::BadHeader(format!("{key}: bad width {s:?}")))
        })
        .collect()
}

fn parse(bytes: &[u8]) -> Result<Parsed<'_>> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::NotAModelFile);
    }
    let Some(v) = bytes.get(4..6) else {
        return Err(Error::Truncated("missing version".into()));
    };
    let version = u16::from_le_bytes([v[0], v[1]]);
    if version > FORMAT_VERSION || version == 0 {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let Some(l) = bytes.get(6..10) else {
        return Err(Error::Truncated("missing header length".into()));
    };
    let header_len = u32::from_le_bytes([l[0], l[1], l[2], l[3]]) as usize;
    let Some(header) = bytes.get(10..10 + header_len) else {
        return Err(Error::Truncated(format!(
            "header declares {header_len} bytes, file has {}",
            bytes.len().saturating_sub(10)
        )));
    };
    let header = std::str::from_utf8(header)
        .map_err(|e| Error::BadHeader(format!("header is not UTF-8: {e}")))?;

    let mut fields = BTreeMap::new();
    for line in header.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::BadHeader(format!("line without '=': {line:?}")))?;
        fields.insert(k.trim(), v.trim());
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Error::BadHeader(format!("missing key {k}")))
    };
    let count = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::BadHeader(format!("{k} is not a count")))
    };
    let id_branch = match get("id_branch")? {
        "true" => true,
        "false" => false,
        other => return Err(Error::BadHeader(format!("id_branch={other}"))),
    };
    if let Some(act) = fields.get("activation") {
        if *act != "swish" {
            return Err(Error::BadHeader(format!("unknown activation {act}")));
        }
    }
    let config = ModelConfig {
        feature_count: count("feature_count")?,
        id_vocab: count("id_vocab")?,
        embed_dim: count("embed_dim")?,
        branch_a_widths: parse_widths("branch_a_widths", get("branch_a_widths")?)?,
        branch_b_widths: parse_widths("branch_b_widths", get("branch_b_widths")?)?,
        head_widths: parse_widths("head_widths", get("head_widths")?)?,
        id_branch,
    };
    config
        .validate()
        .map_err(|e| Error::BadHeader(e.to_string()))?;

    let feature_names = fields
        .get("feature_names")
        .map(|v| v.split(',').map(str::to_string).collect());
    let vocab = match fields.get("vocab") {
        None => None,
        Some(&"") => Some(Vec::new()),
        Some(v) => Some(
            v.split(',')
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::BadHeader(format!("vocab entry {s:?}")))
                })
                .collect::<Result<Vec<i64>>>()?,
        ),
    };
    Ok(Parsed {
        version,
        config,
        schema_fields: (feature_names, vocab),
        payload: &bytes[10 + header_len..],
    })
}

pub fn inspect(path: impl AsRef<Path>) -> Result<ModelFileInfo> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let p = parse(&bytes)?;
    Ok(ModelFileInfo {
        version: p.version,
        config: p.config,
        payload_scalars: p.payload.len() / 4,
    })
}

pub fn from_bytes(bytes: &[u8]) -> Result<DualBranchNet<f32>> {
    let p = parse(bytes)?;
    let expected = super::param_count(&p.config);
    let have = p.payload.len();
    if have < expected * 4 {
        return Err(Error::Truncated(format!(
            "payload has {have} bytes, configuration needs {}",
            expected * 4
        )));
    }
    if have > expected * 4 {
        return Err(Error::BadHeader(format!(
            "{} unexpected bytes after the parameter payload",
            have - expected * 4
        )));
    }
    let mut values = p
        .payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    let mut take = |rows: usize, cols: usize| -> Result<Matrix<f32>> {
        Matrix::from_vec(rows, cols, values.by_ref().take(rows * cols).collect())
    };

    let c = &p.config;
    let embedding = if c.id_branch {
        Some(EmbeddingTable::new(take(c.id_vocab, c.embed_dim)?)?)
    } else {
        None
    };
    let mut read_mlp = |input: usize, widths: &[usize], activate_last: bool| -> Result<Mlp<f32>> {
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = input;
        for &w in widths {
            let weight = take(fan_in, w)?;
            let bias = take(1, w)?.into_vec();
            layers.push(LinearParams::new(weight, bias)?);
            fan_in = w;
        }
        Ok(Mlp {
            layers,
            activate_last,
        })
    };
    let branch_a = read_mlp(c.feature_count, &c.branch_a_widths, true)?;
    let branch_b = if c.id_branch {
        Some(read_mlp(c.embed_dim, &c.branch_b_widths, true)?)
    } else {
        None
    };
    let head = read_mlp(c.head_input_width(), &c.head_widths, false)?;

    let mut net = DualBranchNet::from_parts(p.config.clone(), embedding, branch_a, branch_b, head)?;
    if let (Some(feature_names), Some(ids)) = p.schema_fields {
        let vocab = Vocab::from_ordered(ids).map_err(|e| Error::BadHeader(e.to_string()))?;
        net.set_schema(InputSchema {
            feature_names,
            vocab,
        })
        .map_err(|e| Error::BadHeader(e.to_string()))?;
    }
    Ok(net)
}

pub fn load(path: impl AsRef<Path>) -> Result<DualBranchNet<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes).map_err(|e| e.context(format!("loading {}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn small() -> DualBranchNet<f32> {
        let config = ModelConfig {
            feature_count: 3,
            id_vocab: 4,
            embed_dim: 2,
            branch_a_widths: vec![4, 4],
            branch_b_widths: vec![3],
            head_widths: vec![5, 1],
            id_branch: true,
        };
        DualBranchNet::build(config, &mut RngState::new(4)).unwrap()
    }

    #[test]
    fn bytes_roundtrip() {
        let mut net = small();
        net.set_schema(InputSchema {
            feature_names: vec!["f_0".into(), "f_1".into(), "f_2".into()],
            vocab: Vocab::from_ordered(vec![10, -3, 7]).unwrap(),
        })
        .unwrap();
        let back = from_bytes(&to_bytes(&net)).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn distinct_load_errors() {
        let bytes = to_bytes(&small());

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(from_bytes(&bad_magic), Err(Error::NotAModelFile)));

        let mut future = bytes.clone();
        future[4..6].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
        assert!(matches!(
            from_bytes(&future),
            Err(Error::UnsupportedVersion { found, .. }) if found == FORMAT_VERSION + 1
        ));

        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(from_bytes(truncated), Err(Error::Truncated(_))));
        assert!(matches!(from_bytes(&bytes[..8]), Err(Error::Truncated(_))));

        let mut trailing = bytes.clone();
        trailing.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(from_bytes(&trailing), Err(Error::BadHeader(_))));
    }
}
