//! Experiment configuration.
//!
//! The config file is flat `key = value` text. Blank lines and lines starting
//! with `#` are ignored, later assignments override earlier ones, and unknown
//! keys are rejected. Lists are comma separated. Keys and defaults:
//!
//! ```text
//! benchmark        = transport          # or diffusion
//! transport.dx     = 0.05
//! transport.dt     = 0.02
//! transport.mu_min = 0.5
//! transport.mu_max = 1.0
//! diffusion.blocks = 3
//! diffusion.grid_n = 24
//! diffusion.mu_min = 0.1
//! diffusion.mu_max = 10
//! basis_sizes      = 4,6,8,10,12        # diffusion: 2,4,6,8,10
//! pod_snapshots    = 80
//! bound_snapshots  = 200
//! N                = 10                 # diffusion: 20
//! K                = 1                  # cells per axis, e.g. 2,1,1
//! alpha            = 1e-4
//! eval_sample      = 200
//! t2_halved        = false
//! seed.snapshot    = 1
//! seed.train       = 2
//! seed.eval        = 3
//! sobol.M          = 1000               # any sobol.* key enables the section
//! sobol.B          = 500
//! sobol.alpha      = 1e-5
//! sobol.alpha_as   = 0.05
//! sobol.zero_eps   = false              # debug: drop the metamodel error
//! ```
//!
//! A single `K` value splits only the first parameter axis.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rbcert_core::benchmarks::{build_diffusion, build_transport, DiffusionConfig, TransportConfig};
use rbcert_core::{AffineModel, ParameterBox, Partition};

use crate::CliError;

pub const KEYS: &[&str] = &[
    "benchmark",
    "transport.dx",
    "transport.dt",
    "transport.mu_min",
    "transport.mu_max",
    "diffusion.blocks",
    "diffusion.grid_n",
    "diffusion.mu_min",
    "diffusion.mu_max",
    "basis_sizes",
    "pod_snapshots",
    "bound_snapshots",
    "N",
    "K",
    "alpha",
    "eval_sample",
    "t2_halved",
    "seed.snapshot",
    "seed.train",
    "seed.eval",
    "sobol.M",
    "sobol.B",
    "sobol.alpha",
    "sobol.alpha_as",
    "sobol.zero_eps",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Benchmark {
    Transport(TransportConfig),
    Diffusion(DiffusionConfig),
}

impl Benchmark {
    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::Transport(_) => "transport",
            Benchmark::Diffusion(_) => "diffusion",
        }
    }

    pub fn domain(&self) -> &ParameterBox {
        match self {
            Benchmark::Transport(c) => &c.mu_box,
            Benchmark::Diffusion(c) => &c.mu_box,
        }
    }

    pub fn build(&self) -> Result<AffineModel, CliError> {
        match self {
            Benchmark::Transport(c) => build_transport(c),
            Benchmark::Diffusion(c) => build_diffusion(c),
        }
        .map_err(|e| CliError::Config(format!("benchmark: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub snapshot: u64,
    pub train: u64,
    pub eval: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolConfig {
    pub m: usize,
    pub b: usize,
    pub alpha: f64,
    pub alpha_as: f64,
    pub zero_eps: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    pub basis_sizes: Vec<usize>,
    pub pod_snapshots: usize,
    pub bound_snapshots: usize,
    /// Truncation index `N`.
    pub truncation: usize,
    /// Partition cells per parameter axis.
    pub divisions: Vec<usize>,
    pub alpha: f64,
    pub eval_sample: usize,
    pub t2_halved: bool,
    pub seeds: Seeds,
    pub sobol: Option<SobolConfig>,
}

/// Splits config text into `(key, value)` pairs, in file order.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", no + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, CliError> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?}"))),
    }
}

fn get_list(map: &BTreeMap<String, String>, key: &str, default: &[usize]) -> Result<Vec<usize>, CliError> {
    match map.get(key) {
        None => Ok(default.to_vec()),
        Some(v) => v
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?}"))))
            .collect(),
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Builds a config from assignments; later pairs win.
    pub fn from_pairs<I, K, V>(pairs: I) -> Result<Self, CliError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            let k = k.into();
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown key {k:?}")));
            }
            map.insert(k, v.into());
        }
        let m = &map;
        let cfg_err = |e: rbcert_core::Error| CliError::Config(e.to_string());

        let name: String = get(m, "benchmark", "transport".to_string())?;
        let benchmark = match name.as_str() {
            "transport" => {
                let lo = get(m, "transport.mu_min", 0.5)?;
                let hi = get(m, "transport.mu_max", 1.0)?;
                Benchmark::Transport(TransportConfig {
                    dx: get(m, "transport.dx", 0.05)?,
                    dt: get(m, "transport.dt", 0.02)?,
                    mu_box: ParameterBox::cube(1, lo, hi).map_err(cfg_err)?,
                })
            }
            "diffusion" => {
                let blocks = get(m, "diffusion.blocks", 3)?;
                let mut c = DiffusionConfig::new(blocks, get(m, "diffusion.grid_n", 24)?).map_err(cfg_err)?;
                let lo = get(m, "diffusion.mu_min", 0.1)?;
                let hi = get(m, "diffusion.mu_max", 10.0)?;
                c.mu_box = ParameterBox::cube(blocks, lo, hi).map_err(cfg_err)?;
                Benchmark::Diffusion(c)
            }
            other => return Err(CliError::Config(format!("unknown benchmark {other:?}"))),
        };
        let transport = matches!(benchmark, Benchmark::Transport(_));
        let p = benchmark.domain().dim();

        let mut divisions = get_list(m, "K", &[1])?;
        if divisions.len() == 1 {
            divisions.resize(p, 1);
        }
        let sobol = if m.keys().any(|k| k.starts_with("sobol.")) {
            Some(SobolConfig {
                m: get(m, "sobol.M", 1000)?,
                b: get(m, "sobol.B", 500)?,
                alpha: get(m, "sobol.alpha", 1e-5)?,
                alpha_as: get(m, "sobol.alpha_as", 0.05)?,
                zero_eps: get(m, "sobol.zero_eps", false)?,
            })
        } else {
            None
        };
        let cfg = Self {
            basis_sizes: get_list(m, "basis_sizes", if transport { &[4, 6, 8, 10, 12] } else { &[2, 4, 6, 8, 10] })?,
            pod_snapshots: get(m, "pod_snapshots", 80)?,
            bound_snapshots: get(m, "bound_snapshots", 200)?,
            truncation: get(m, "N", if transport { 10 } else { 20 })?,
            divisions,
            alpha: get(m, "alpha", 1e-4)?,
            eval_sample: get(m, "eval_sample", 200)?,
            t2_halved: get(m, "t2_halved", false)?,
            seeds: Seeds {
                snapshot: get(m, "seed.snapshot", 1)?,
                train: get(m, "seed.train", 2)?,
                eval: get(m, "seed.eval", 3)?,
            },
            sobol,
            benchmark,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        Self::from_pairs(parse_pairs(text)?)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.basis_sizes.is_empty() || self.basis_sizes.contains(&0) {
            return bad(format!("basis_sizes {:?} must be positive", self.basis_sizes));
        }
        for (name, v) in [
            ("pod_snapshots", self.pod_snapshots),
            ("bound_snapshots", self.bound_snapshots),
            ("N", self.truncation),
            ("eval_sample", self.eval_sample),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.divisions.len() != self.benchmark.domain().dim() || self.divisions.contains(&0) {
            return bad(format!("K = {:?} does not fit a {}-parameter benchmark", self.divisions, self.benchmark.domain().dim()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} outside (0, 1)", self.alpha));
        }
        if let Some(s) = &self.sobol {
            if s.m < 2 || s.b < 100 {
                return bad(format!("sobol.M = {} needs >= 2 and sobol.B = {} >= 100", s.m, s.b));
            }
            if !(s.alpha > 0.0 && s.alpha < 1.0 && s.alpha_as > 0.0 && s.alpha_as < 1.0) {
                return bad("sobol risks must lie in (0, 1)".into());
            }
        }
        Ok(())
    }

    pub fn partition(&self) -> Result<Partition, CliError> {
        Partition::uniform(self.benchmark.domain().clone(), &self.divisions)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// The full config as canonical `(key, value)` pairs; parsing them back
    /// gives an equal config.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out: Vec<(&str, String)> = vec![("benchmark", self.benchmark.name().into())];
        match &self.benchmark {
            Benchmark::Transport(c) => {
                out.push(("transport.dx", c.dx.to_string()));
                out.push(("transport.dt", c.dt.to_string()));
                out.push(("transport.mu_min", c.mu_box.lo()[0].to_string()));
                out.push(("transport.mu_max", c.mu_box.hi()[0].to_string()));
            }
            Benchmark::Diffusion(c) => {
                out.push(("diffusion.blocks", c.blocks.to_string()));
                out.push(("diffusion.grid_n", c.grid_n.to_string()));
                out.push(("diffusion.mu_min", c.mu_box.lo()[0].to_string()));
                out.push(("diffusion.mu_max", c.mu_box.hi()[0].to_string()));
            }
        }
        out.extend([
            ("basis_sizes", join(&self.basis_sizes)),
            ("pod_snapshots", self.pod_snapshots.to_string()),
            ("bound_snapshots", self.bound_snapshots.to_string()),
            ("N", self.truncation.to_string()),
            ("K", join(&self.divisions)),
            ("alpha", self.alpha.to_string()),
            ("eval_sample", self.eval_sample.to_string()),
            ("t2_halved", self.t2_halved.to_string()),
            ("seed.snapshot", self.seeds.snapshot.to_string()),
            ("seed.train", self.seeds.train.to_string()),
            ("seed.eval", self.seeds.eval.to_string()),
        ]);
        if let Some(s) = &self.sobol {
            out.extend([
                ("sobol.M", s.m.to_string()),
                ("sobol.B", s.b.to_string()),
                ("sobol.alpha", s.alpha.to_string()),
                ("sobol.alpha_as", s.alpha_as.to_string()),
                ("sobol.zero_eps", s.zero_eps.to_string()),
            ]);
        }
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// `# key = value` lines for CSV headers.
    pub fn header_comment(&self, title: &str) -> String {
        let mut s = format!("# rbcert {title}\n");
        for (k, v) in self.to_pairs() {
            let _ = writeln!(s, "# {k} = {v}");
        }
        s
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_pairs(Vec::<(String, String)>::new()).expect("defaults are valid")
    }
}
