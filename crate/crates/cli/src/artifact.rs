//! On-disk goal-oriented bound artifacts.
//!
//! Layout: the magic `RBCGOB`, a little-endian `u16` format version, a
//! little-endian `u64` byte length, that many bytes of UTF-8 JSON metadata,
//! then the float payload. Every float (scalars included) lives in the
//! payload as little-endian `f64`, so a load gives back the exact bits. The
//! metadata lists the payload blocks in order with their shapes; matrices
//! are column-major.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rbcert_core::bounds::GoalOrientedBoundData;
use rbcert_core::{ParameterBox, Partition, ReducedBasis};
use serde_json::{json, Value};

use crate::CliError;

pub const MAGIC: &[u8; 6] = b"RBCGOB";
pub const VERSION: u16 = 1;

/// A trained bound together with the reduced bases it was trained for.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub benchmark: String,
    pub full_dim: usize,
    /// `(key, value)` pairs of the config that produced the artifact.
    pub config: Vec<(String, String)>,
    pub basis: DMatrix<f64>,
    pub dual: Option<DMatrix<f64>>,
    pub data: GoalOrientedBoundData,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(format!("artifact: {}", msg.into()))
}

struct Payload {
    blocks: Vec<Value>,
    bytes: Vec<u8>,
}

impl Payload {
    fn push(&mut self, name: &str, m: &DMatrix<f64>) {
        self.blocks.push(json!([name, m.nrows(), m.ncols()]));
        for x in m.iter() {
            self.bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
}

impl Artifact {
    pub fn write<W: Write>(&self, mut out: W) -> Result<(), CliError> {
        let d = &self.data;
        let mut p = Payload { blocks: Vec::new(), bytes: Vec::new() };
        p.push("scalars", &DMatrix::from_column_slice(2, 1, &[d.t2_hat, d.t2_std_err]));
        p.push("eigvals", &DMatrix::from_column_slice(d.eigvals.len(), 1, &d.eigvals));
        p.push("phi", &d.phi);
        for a in &d.ip_a {
            p.push("ip_a", a);
        }
        p.push("ip_f", &d.ip_f);
        p.push("beta_min", &d.beta_min);
        p.push("beta_max", &d.beta_max);
        p.push("domain", &boxes(std::slice::from_ref(d.partition.domain())));
        p.push("cells", &boxes(d.partition.cells()));
        p.push("basis", &self.basis);
        if let Some(z) = &self.dual {
            p.push("dual", z);
        }
        let meta = json!({
            "format": "rbcert goal-oriented bound",
            "benchmark": self.benchmark,
            "full_dim": self.full_dim,
            "config": self.config.iter().map(|(k, v)| json!([k, v])).collect::<Vec<_>>(),
            "corrected": d.corrected,
            "sample_size": d.sample_size,
            "seed": d.seed,
            "t2_halved": d.t2_halved,
            "rank_truncated": d.rank_truncated,
            "blocks": p.blocks,
        });
        let meta = serde_json::to_vec(&meta).map_err(|e| bad(e.to_string()))?;
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(meta.len() as u64).to_le_bytes())?;
        out.write_all(&meta)?;
        out.write_all(&p.bytes)?;
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self, CliError> {
        let mut head = [0u8; 16];
        input.read_exact(&mut head).map_err(|_| bad("truncated header"))?;
        if &head[..6] != MAGIC {
            return Err(bad("not an rbcert artifact"));
        }
        let version = u16::from_le_bytes([head[6], head[7]]);
        if version != VERSION {
            return Err(bad(format!("format version {version}, expected {VERSION}")));
        }
        let len = u64::from_le_bytes(head[8..16].try_into().expect("8 bytes")) as usize;
        let mut meta = vec![0u8; len];
        input.read_exact(&mut meta).map_err(|_| bad("truncated metadata"))?;
        let meta: Value = serde_json::from_slice(&meta).map_err(|e| bad(e.to_string()))?;
        let mut rest = Vec::new();
        input.read_to_end(&mut rest)?;

        let mut blocks = Vec::new();
        let mut offset = 0;
        for b in meta["blocks"].as_array().ok_or_else(|| bad("missing block list"))? {
            let (name, rows, cols) = match (b[0].as_str(), b[1].as_u64(), b[2].as_u64()) {
                (Some(n), Some(r), Some(c)) => (n.to_string(), r as usize, c as usize),
                _ => return Err(bad("malformed block entry")),
            };
            let end = offset + 8 * rows * cols;
            let raw = rest.get(offset..end).ok_or_else(|| bad(format!("payload ends inside {name}")))?;
            let vals: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            blocks.push((name, DMatrix::from_vec(rows, cols, vals)));
            offset = end;
        }
        if offset != rest.len() {
            return Err(bad("trailing bytes after payload"));
        }

        let mut iter = blocks.into_iter();
        let mut take = |name: &str| expect_block(&mut iter, name);
        let scalars = take("scalars")?;
        let eigvals = take("eigvals")?.as_slice().to_vec();
        let phi = take("phi")?;
        let mut ip_a = Vec::new();
        let ip_f = loop {
            let (name, m) = iter.next().ok_or_else(|| bad("payload ends early"))?;
            match name.as_str() {
                "ip_a" => ip_a.push(m),
                "ip_f" => break m,
                other => return Err(bad(format!("unexpected block {other}"))),
            }
        };
        let mut take = |name: &str| expect_block(&mut iter, name);
        let beta_min = take("beta_min")?;
        let beta_max = take("beta_max")?;
        let domain = unbox(&take("domain")?)?.pop().ok_or_else(|| bad("empty domain"))?;
        let cells = unbox(&take("cells")?)?;
        let basis = take("basis")?;
        let dual = match iter.next() {
            Some((n, m)) if n == "dual" => Some(m),
            None => None,
            Some((n, _)) => return Err(bad(format!("unexpected block {n}"))),
        };
        if scalars.len() != 2 {
            return Err(bad("scalars block must hold two values"));
        }
        let flag = |k: &str| meta[k].as_bool().ok_or_else(|| bad(format!("missing {k}")));
        let int = |k: &str| meta[k].as_u64().ok_or_else(|| bad(format!("missing {k}")));
        let partition = Partition::from_cells(domain, cells).map_err(|e| bad(e.to_string()))?;
        let data = GoalOrientedBoundData {
            phi,
            ip_a,
            ip_f,
            beta_min,
            beta_max,
            t2_hat: scalars[0],
            t2_std_err: scalars[1],
            eigvals,
            corrected: flag("corrected")?,
            partition,
            sample_size: int("sample_size")? as usize,
            seed: int("seed")?,
            t2_halved: flag("t2_halved")?,
            rank_truncated: flag("rank_truncated")?,
        };
        data.validate().map_err(|e| bad(e.to_string()))?;
        let config = meta["config"]
            .as_array()
            .ok_or_else(|| bad("missing config"))?
            .iter()
            .map(|kv| match (kv[0].as_str(), kv[1].as_str()) {
                (Some(k), Some(v)) => Ok((k.to_string(), v.to_string())),
                _ => Err(bad("malformed config entry")),
            })
            .collect::<Result<_, _>>()?;
        let art = Self {
            benchmark: meta["benchmark"].as_str().ok_or_else(|| bad("missing benchmark"))?.to_string(),
            full_dim: int("full_dim")? as usize,
            config,
            basis,
            dual,
            data,
        };
        if art.basis.nrows() != art.full_dim || art.basis.ncols() != art.data.reduced_dim() {
            return Err(bad("basis shape does not match the bound tables"));
        }
        Ok(art)
    }

    /// Primal and dual bases as [`ReducedBasis`] values.
    pub fn bases(&self) -> Result<(ReducedBasis, Option<ReducedBasis>), CliError> {
        let conv = |m: &DMatrix<f64>| ReducedBasis::from_orthonormal(m.clone()).map_err(|e| bad(e.to_string()));
        Ok((conv(&self.basis)?, self.dual.as_ref().map(conv).transpose()?))
    }
}

fn expect_block<I: Iterator<Item = (String, DMatrix<f64>)>>(it: &mut I, name: &str) -> Result<DMatrix<f64>, CliError> {
    match it.next() {
        Some((n, m)) if n == name => Ok(m),
        _ => Err(bad(format!("expected block {name}"))),
    }
}

/// One row per box: `lo` then `hi`.
fn boxes(b: &[ParameterBox]) -> DMatrix<f64> {
    let p = b.first().map_or(0, |x| x.dim());
    DMatrix::from_fn(b.len(), 2 * p, |k, j| if j < p { b[k].lo()[j] } else { b[k].hi()[j - p] })
}

fn unbox(m: &DMatrix<f64>) -> Result<Vec<ParameterBox>, CliError> {
    let p = m.ncols() / 2;
    (0..m.nrows())
        .map(|k| {
            let lo = (0..p).map(|j| m[(k, j)]).collect();
            let hi = (p..2 * p).map(|j| m[(k, j)]).collect();
            ParameterBox::new(lo, hi).map_err(|e| bad(e.to_string()))
        })
        .collect()
}
