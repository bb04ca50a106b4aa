//! Flat key=value run configuration with dotted keys.
//!
//! ```text
//! seed = 42
//! init = multiscale:2:4
//! graph.1.patch.size = 15x15
//! graph.1.patch.sigma = 10
//! graph.1.filters = identity
//! graph.1.lambda.identity = 1.0
//! ```
//!
//! `#` starts a comment. Relative file paths are resolved against the
//! current directory. The effective configuration (after command-line
//! overrides) can be echoed back to text; feeding that text in reproduces
//! the run.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::filters::{self, gamma_kernels, gamma_weights, GammaSpec, Kernel};
use crate::metric::{aniso_lambda, DominanceField, PartitionField, PatchSpec};
use crate::pipeline::{CoarseInit, GraphSetup, InitSpec, InpaintSpec, NnfMode};
use crate::raster::{ImageBuffer, RegionMask};
use crate::region::Footprint;

const SCALAR_KEYS: &[(&str, &str)] = &[
    ("seed", "42"),
    ("init", "random"),
    ("init.coarse", "random"),
    ("outer.tol", "1e-3"),
    ("outer.max_iter", "30"),
    ("solver.tol", "1e-6"),
    ("solver.max_iter", "0"),
    ("nnf.mode", "exact"),
    ("boundary", "replicate"),
];

const GRAPH_KEY_HELP: &str =
    "graph.<n>.patch.size, graph.<n>.patch.sigma, graph.<n>.filters, graph.<n>.sigma, graph.<n>.beta, graph.<n>.lambda.<filter>";

/// Parsed key=value pairs, prior to interpretation.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pairs: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut pairs = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            validate_key(&key)?;
            if pairs.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {key:?}",
                    lineno + 1
                )));
            }
        }
        Ok(RawConfig { pairs })
    }

    pub fn load(path: &Path) -> Result<RawConfig> {
        RawConfig::parse(&std::fs::read_to_string(path)?)
    }

    /// Apply `--set key=value` overrides; the same key twice among the
    /// overrides is a conflict.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        let mut seen = BTreeMap::new();
        for item in overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                Error::Config(format!("override {item:?}: expected key=value"))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            validate_key(&key)?;
            if seen.insert(key.clone(), ()).is_some() {
                return Err(Error::Config(format!(
                    "conflicting overrides for key {key:?}"
                )));
            }
            self.pairs.insert(key, value);
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.pairs.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs.get(key).map(String::as_str)
    }

    /// Effective configuration: explicit pairs plus defaulted scalars.
    pub fn to_text(&self) -> String {
        let mut all = self.pairs.clone();
        for (key, default) in SCALAR_KEYS {
            all.entry(key.to_string())
                .or_insert_with(|| default.to_string());
        }
        let mut out = String::new();
        for (k, v) in &all {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    fn scalar(&self, key: &str) -> &str {
        self.get(key)
            .unwrap_or_else(|| SCALAR_KEYS.iter().find(|(k, _)| *k == key).unwrap().1)
    }
}

fn validate_key(key: &str) -> Result<()> {
    if SCALAR_KEYS.iter().any(|(k, _)| *k == key) {
        return Ok(());
    }
    let parts: Vec<&str> = key.split('.').collect();
    if parts.len() >= 3 && parts[0] == "graph" && parts[1].parse::<usize>().is_ok() {
        let rest = &parts[2..];
        let ok = matches!(
            rest,
            ["patch", "size"] | ["patch", "sigma"] | ["filters"] | ["sigma"] | ["beta"]
        ) || (rest.len() == 2 && rest[0] == "lambda");
        if ok {
            return Ok(());
        }
    }
    let valid: Vec<&str> = SCALAR_KEYS.iter().map(|(k, _)| *k).collect();
    Err(Error::Config(format!(
        "unknown key {key:?}; valid keys: {}, {}",
        valid.join(", "),
        GRAPH_KEY_HELP
    )))
}

fn parse_f64(cfg: &RawConfig, key: &str) -> Result<f64> {
    cfg.scalar(key)
        .parse()
        .map_err(|e| Error::Config(format!("key {key}: {e}")))
}

fn parse_usize(cfg: &RawConfig, key: &str) -> Result<usize> {
    cfg.scalar(key)
        .parse()
        .map_err(|e| Error::Config(format!("key {key}: {e}")))
}

/// A filter entry of a graph's `filters` list.
#[derive(Debug, Clone, PartialEq)]
enum FilterSpec {
    Identity,
    GradX,
    GradY,
    Laplacian,
    NlGamma(GammaSpec, usize),
    File(String),
}

impl FilterSpec {
    fn parse(s: &str) -> Result<FilterSpec> {
        match s {
            "identity" => return Ok(FilterSpec::Identity),
            "grad_x" => return Ok(FilterSpec::GradX),
            "grad_y" => return Ok(FilterSpec::GradY),
            "laplacian" => return Ok(FilterSpec::Laplacian),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("nl_gamma:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::Config(format!(
                    "filter {s:?}: expected nl_gamma:gauss:<sigma>:<K> or nl_gamma:frac:<s>:<K>"
                )));
            }
            let value: f64 = parts[1]
                .parse()
                .map_err(|e| Error::Config(format!("filter {s:?}: {e}")))?;
            let k: usize = parts[2]
                .parse()
                .map_err(|e| Error::Config(format!("filter {s:?}: {e}")))?;
            if k % 2 == 0 || k < 3 {
                return Err(Error::Config(format!(
                    "filter {s:?}: footprint size must be odd and >= 3"
                )));
            }
            let spec = match parts[0] {
                "gauss" => GammaSpec::Gauss { sigma: value },
                "frac" => GammaSpec::Fractional { s: value },
                other => {
                    return Err(Error::Config(format!(
                        "filter {s:?}: unknown gamma profile {other:?}"
                    )))
                }
            };
            return Ok(FilterSpec::NlGamma(spec, k));
        }
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(FilterSpec::File(path.to_string()));
        }
        Err(Error::Config(format!(
            "unknown filter {s:?}; expected identity, grad_x, grad_y, laplacian, nl_gamma:..., file:<path>"
        )))
    }

    /// Name used by `lambda.<name>` keys.
    fn lambda_name(&self) -> &str {
        match self {
            FilterSpec::Identity => "identity",
            FilterSpec::GradX => "grad_x",
            FilterSpec::GradY => "grad_y",
            FilterSpec::Laplacian => "laplacian",
            FilterSpec::NlGamma(..) => "nl_gamma",
            FilterSpec::File(_) => "file",
        }
    }

    /// Bank kernels this entry expands to.
    fn kernels(&self) -> Result<Vec<Kernel>> {
        Ok(match self {
            FilterSpec::Identity => vec![filters::identity()],
            FilterSpec::GradX => vec![filters::grad_x()],
            FilterSpec::GradY => vec![filters::grad_y()],
            FilterSpec::Laplacian => vec![filters::laplacian()],
            FilterSpec::NlGamma(spec, k) => {
                let half = (*k as i32 - 1) / 2;
                let fp = Footprint::rect(half, half);
                let weights = gamma_weights(&fp, spec)?;
                let (dir, _) = gamma_kernels(&fp, &weights)?;
                dir
            }
            FilterSpec::File(path) => {
                let text = std::fs::read_to_string(path)?;
                vec![Kernel::parse_text(&text, format!("file:{path}"))?]
            }
        })
    }
}

fn load_gray_field(path: &str) -> Result<(usize, usize, Vec<f64>)> {
    let img = ImageBuffer::load(Path::new(path))?;
    let (w, h) = img.dims();
    Ok((w, h, img.plane(0).to_vec()))
}

fn parse_lambda_value(value: &str) -> Result<DominanceField> {
    if let Some(path) = value.strip_prefix("file:") {
        let (w, h, values) = load_gray_field(path)?;
        return DominanceField::field(w, h, values);
    }
    if let Some(rest) = value.strip_prefix("aniso:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "lambda {value:?}: expected aniso:<edge-map>:<lambda_a>:<tau>"
            )));
        }
        let edges = RegionMask::load(Path::new(parts[0]))?;
        let la: f64 = parts[1]
            .parse()
            .map_err(|e| Error::Config(format!("lambda {value:?}: {e}")))?;
        let tau: f64 = parts[2]
            .parse()
            .map_err(|e| Error::Config(format!("lambda {value:?}: {e}")))?;
        return aniso_lambda(&edges, la, tau);
    }
    let c: f64 = value
        .parse()
        .map_err(|e| Error::Config(format!("lambda {value:?}: {e}")))?;
    if c < 0.0 {
        return Err(Error::Config("lambda constants must be nonnegative".into()));
    }
    Ok(DominanceField::Constant(c))
}

fn parse_patch(cfg: &RawConfig, idx: usize) -> Result<PatchSpec> {
    let size_key = format!("graph.{idx}.patch.size");
    let sigma_key = format!("graph.{idx}.patch.sigma");
    let size = cfg.get(&size_key).unwrap_or("1x1");
    let (w, h) = match size.split_once('x') {
        Some((a, b)) => (
            a.trim()
                .parse()
                .map_err(|e| Error::Config(format!("{size_key}: {e}")))?,
            b.trim()
                .parse()
                .map_err(|e| Error::Config(format!("{size_key}: {e}")))?,
        ),
        None => {
            let n: usize = size
                .parse()
                .map_err(|e| Error::Config(format!("{size_key}: {e}")))?;
            (n, n)
        }
    };
    let sigma = match cfg.get(&sigma_key) {
        None | Some("inf") | Some("uniform") => f64::INFINITY,
        Some(v) => v
            .parse()
            .map_err(|e| Error::Config(format!("{sigma_key}: {e}")))?,
    };
    PatchSpec::new(w, h, sigma)
}

/// Build the full run specification from a flat configuration.
pub fn build_spec(cfg: &RawConfig) -> Result<InpaintSpec> {
    // Graphs must be numbered 1..=N contiguously.
    let mut graph_ids: Vec<usize> = cfg
        .pairs
        .keys()
        .filter_map(|k| {
            let mut parts = k.split('.');
            (parts.next() == Some("graph"))
                .then(|| parts.next().and_then(|s| s.parse::<usize>().ok()))
                .flatten()
        })
        .collect();
    graph_ids.sort_unstable();
    graph_ids.dedup();
    if graph_ids.is_empty() {
        graph_ids.push(1);
    }
    if graph_ids[0] != 1 || graph_ids[graph_ids.len() - 1] != graph_ids.len() {
        return Err(Error::Config(format!(
            "graphs must be numbered 1..={} contiguously",
            graph_ids.len()
        )));
    }

    let mut kernels: Vec<Kernel> = Vec::new();
    let mut spec_of_kernel: Vec<String> = Vec::new();
    let mut nl_gamma_seen = false;
    let mut graphs = Vec::new();
    for &idx in &graph_ids {
        let filters_value = cfg
            .get(&format!("graph.{idx}.filters"))
            .unwrap_or("identity");
        let mut dominance: Vec<(usize, DominanceField)> = Vec::new();
        let lambda_prefix = format!("graph.{idx}.lambda.");
        let has_lambda_keys = cfg.pairs.keys().any(|k| k.starts_with(&lambda_prefix));
        for (pos, item) in filters_value.split(',').map(str::trim).enumerate() {
            if item.is_empty() {
                continue;
            }
            let fspec = FilterSpec::parse(item)?;
            if let FilterSpec::NlGamma(..) = fspec {
                if nl_gamma_seen && !spec_of_kernel.iter().any(|s| s == item) {
                    return Err(Error::Config(
                        "only one nl_gamma family per run is supported".to_string(),
                    ));
                }
                nl_gamma_seen = true;
            }
            // Share bank kernels across graphs with identical filter specs.
            let first = spec_of_kernel.iter().position(|s| s == item);
            let indices: Vec<usize> = match first {
                Some(start) => {
                    let count = spec_of_kernel.iter().filter(|s| *s == item).count();
                    (start..start + count).collect()
                }
                None => {
                    let new_kernels = fspec.kernels()?;
                    let start = kernels.len();
                    for k in new_kernels {
                        kernels.push(k);
                        spec_of_kernel.push(item.to_string());
                    }
                    (start..kernels.len()).collect()
                }
            };
            // Dominance: lambda.<name>, lambda.<position>, or the default.
            let named = cfg.get(&format!("{}{}", lambda_prefix, fspec.lambda_name()));
            let positional = cfg.get(&format!("{}{}", lambda_prefix, pos + 1));
            let lam = match positional.or(named) {
                Some(v) => parse_lambda_value(v)?,
                None if has_lambda_keys => DominanceField::Constant(0.0),
                None => DominanceField::Constant(1.0),
            };
            if lam.is_identically_zero() {
                continue;
            }
            for ki in indices {
                dominance.push((ki, lam.clone()));
            }
        }
        if dominance.is_empty() {
            return Err(Error::Config(format!(
                "graph {idx} has no filter with nonzero dominance"
            )));
        }
        let partition = match cfg.get(&format!("graph.{idx}.beta")) {
            None => PartitionField::Constant(1.0),
            Some(v) => {
                if let Some(path) = v.strip_prefix("file:") {
                    let (w, h, values) = load_gray_field(path)?;
                    PartitionField::Field {
                        width: w,
                        height: h,
                        values,
                    }
                } else {
                    PartitionField::Constant(
                        v.parse()
                            .map_err(|e| Error::Config(format!("graph.{idx}.beta: {e}")))?,
                    )
                }
            }
        };
        let selectivity = match cfg.get(&format!("graph.{idx}.sigma")) {
            None => None,
            Some(v) => {
                let s: f64 = v
                    .parse()
                    .map_err(|e| Error::Config(format!("graph.{idx}.sigma: {e}")))?;
                (s > 0.0).then_some(s)
            }
        };
        graphs.push(GraphSetup {
            patch: parse_patch(cfg, idx)?,
            selectivity,
            dominance,
            partition,
        });
    }

    let init = match cfg.scalar("init") {
        "random" => InitSpec::Random,
        other => {
            if let Some(rest) = other.strip_prefix("multiscale:") {
                let (levels, factor) = rest.split_once(':').ok_or_else(|| {
                    Error::Config("init: expected multiscale:<levels>:<factor>".to_string())
                })?;
                let coarse = match cfg.scalar("init.coarse") {
                    "random" => CoarseInit::Random,
                    "biharmonic" => CoarseInit::Biharmonic,
                    other => {
                        return Err(Error::Config(format!(
                            "init.coarse: unknown value {other:?}"
                        )))
                    }
                };
                InitSpec::Multiscale {
                    levels: levels
                        .parse()
                        .map_err(|e| Error::Config(format!("init levels: {e}")))?,
                    factor: factor
                        .parse()
                        .map_err(|e| Error::Config(format!("init factor: {e}")))?,
                    coarse,
                }
            } else if let Some(path) = other.strip_prefix("provided:") {
                InitSpec::Provided(ImageBuffer::load(Path::new(path))?)
            } else {
                return Err(Error::Config(format!("init: unknown value {other:?}")));
            }
        }
    };

    let nnf = match cfg.scalar("nnf.mode") {
        "exact" => NnfMode::Exact,
        other => {
            if let Some(rest) = other.strip_prefix("accelerated:") {
                let (iters, threshold) = rest.split_once(':').ok_or_else(|| {
                    Error::Config("nnf.mode: expected accelerated:<iterations>:<threshold>".into())
                })?;
                NnfMode::Accelerated {
                    iterations: iters
                        .parse()
                        .map_err(|e| Error::Config(format!("nnf iterations: {e}")))?,
                    threshold: threshold
                        .parse()
                        .map_err(|e| Error::Config(format!("nnf threshold: {e}")))?,
                }
            } else {
                return Err(Error::Config(format!("nnf.mode: unknown value {other:?}")));
            }
        }
    };

    let boundary = match cfg.scalar("boundary") {
        "replicate" => filters::BoundaryPolicy::Replicate,
        "reflect" => filters::BoundaryPolicy::Reflect,
        other => {
            return Err(Error::Config(format!(
                "boundary: unknown value {other:?} (replicate or reflect)"
            )))
        }
    };

    let mut spec = InpaintSpec::new(kernels, graphs);
    spec.init = init;
    spec.nnf = nnf;
    spec.boundary = boundary;
    spec.outer_tol = parse_f64(cfg, "outer.tol")?;
    spec.outer_max_iter = parse_usize(cfg, "outer.max_iter")?;
    spec.solver_tol = parse_f64(cfg, "solver.tol")?;
    spec.solver_max_iter = parse_usize(cfg, "solver.max_iter")?;
    spec.seed = cfg
        .scalar("seed")
        .parse()
        .map_err(|e| Error::Config(format!("seed: {e}")))?;
    Ok(spec)
}
