//! Block-structured forward inference over node and edge signals.
//!
//! Each block runs Laguerre filter layers on nodes (and edges), an optional
//! multi-simplicial interaction between the two, and an optional attention
//! pooling step that coarsens the complex. After the last block each
//! dimension is mean-pooled, the results are concatenated, and a stack of
//! dense layers produces the prediction.
//!
//! There is no training here; parameters come from a JSON file or from
//! [`ModelParams::random`].

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::SimplicialComplex;
use crate::error::{Error, Result};
use crate::io::{from_json_str, to_json_string, TensorRecord};
use crate::pooling::{
    attention_weights, cluster_nodes, downsample, pool_signals, AttentionHead, AttentionParams,
    ClusteringConfig,
};
use crate::projection::{msi_forward, MsiBranch, MsiWeights, ProjectionPair};
use crate::spectral::{eigensystem, filter_poly, hodge_laplacian, FilterBank, HodgeLaplacian};

const LEAKY_SLOPE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    /// Leak rate 0.1.
    LeakyRelu,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::LeakyRelu => {
                if v >= 0.0 {
                    v
                } else {
                    LEAKY_SLOPE * v
                }
            }
        }
    }
}

/// Number of positional-encoding eigenvectors for nodes and edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeDims {
    pub node: usize,
    pub edge: usize,
}

impl Default for PeDims {
    fn default() -> Self {
        Self { node: 8, edge: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub num_blocks: usize,
    pub conv_layers_per_block: Vec<usize>,
    /// Output channels of every filter layer in a block.
    pub filters_per_layer: Vec<usize>,
    pub poly_order: usize,
    pub qk_dim: usize,
    /// Widths of the dense output layers; the last is the prediction size.
    pub fc_layers: Vec<usize>,
    /// Self/cross attention mix for nodes and edges.
    #[serde(default = "default_alpha")]
    pub alpha: [f64; 2],
    #[serde(default)]
    pub activation: Activation,
    pub pooling_enabled: Vec<bool>,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
    #[serde(default)]
    pub pe_dims: PeDims,
    /// Seed for random eigenvector sign flips; `None` keeps the fixed signs.
    #[serde(default)]
    pub pe_sign_flip_seed: Option<u64>,
    #[serde(default = "yes")]
    pub edge_path: bool,
    #[serde(default = "yes")]
    pub msi_enabled: bool,
    #[serde(default)]
    pub normalize_spectrum: bool,
    /// Recorded only; inference ignores dropout.
    #[serde(default = "default_dropout")]
    pub dropout: f64,
}

fn default_alpha() -> [f64; 2] {
    [0.5, 0.5]
}

fn default_max_dim() -> usize {
    2
}

fn default_dropout() -> f64 {
    0.25
}

fn yes() -> bool {
    true
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_blocks: 2,
            conv_layers_per_block: vec![1, 1],
            filters_per_layer: vec![8, 16],
            poly_order: 3,
            qk_dim: 8,
            fc_layers: vec![16, 1],
            alpha: default_alpha(),
            activation: Activation::Relu,
            pooling_enabled: vec![true, true],
            max_dim: 2,
            pe_dims: PeDims::default(),
            pe_sign_flip_seed: None,
            edge_path: true,
            msi_enabled: true,
            normalize_spectrum: false,
            dropout: default_dropout(),
        }
    }
}

/// Ablation variants, each enabling a superset of the previous one's stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    /// Node filters only.
    M1,
    /// Node and edge filters.
    M2,
    /// Filters plus multi-simplicial interaction.
    M3,
    /// Everything, including attention pooling.
    M4,
}

impl Ablation {
    pub fn apply(self, base: &ModelConfig) -> ModelConfig {
        let mut cfg = base.clone();
        cfg.edge_path = self != Ablation::M1;
        cfg.msi_enabled = matches!(self, Ablation::M3 | Ablation::M4);
        let pool = self == Ablation::M4;
        cfg.pooling_enabled = vec![pool; cfg.num_blocks];
        cfg
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.num_blocks;
        if n == 0 {
            return Err(Error::shape("num_blocks must be >= 1"));
        }
        for (name, len) in [
            ("conv_layers_per_block", self.conv_layers_per_block.len()),
            ("filters_per_layer", self.filters_per_layer.len()),
            ("pooling_enabled", self.pooling_enabled.len()),
        ] {
            if len != n {
                return Err(Error::shape(format!(
                    "{name} has {len} entries for {n} blocks"
                )));
            }
        }
        let counts = self
            .conv_layers_per_block
            .iter()
            .chain(&self.filters_per_layer)
            .chain(&self.fc_layers);
        if counts.clone().any(|&c| c == 0) || self.fc_layers.is_empty() {
            return Err(Error::shape("layer counts and widths must be >= 1"));
        }
        if self.poly_order == 0 || self.qk_dim == 0 {
            return Err(Error::shape("poly_order and qk_dim must be >= 1"));
        }
        if self.alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::shape("alpha values must lie in [0, 1]"));
        }
        if !self.edge_path && (self.msi_enabled || self.pooling_enabled.iter().any(|&p| p)) {
            return Err(Error::shape(
                "interaction and pooling need the edge path enabled",
            ));
        }
        Ok(())
    }

    fn laplacian(&self, c: &SimplicialComplex, k: usize) -> Result<HodgeLaplacian> {
        let l = hodge_laplacian(c, k)?;
        Ok(if self.normalize_spectrum {
            l.normalized()
        } else {
            l
        })
    }
}

/// Dense layer `y = x W + b` with `W` of shape `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: DMatrix<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.weight.ncols())
            .map(|o| {
                let dot: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * self.weight[(i, o)])
                    .sum();
                dot + self.bias[o]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub node_filters: Vec<FilterBank>,
    /// Empty when the edge path is off.
    pub edge_filters: Vec<FilterBank>,
    pub msi: Option<MsiWeights>,
    pub attention: Option<AttentionParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub blocks: Vec<BlockParams>,
    pub head: Vec<DenseLayer>,
}

/// Node and edge input widths implied by a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputWidths {
    pub node: usize,
    pub edge: usize,
}

impl ModelParams {
    /// Seeded initialization, uniform on `[-1/√d, 1/√d]` with `d` the fan-in.
    ///
    /// `node_in`/`edge_in` are the raw feature widths plus positional encodings.
    pub fn random(cfg: &ModelConfig, node_in: usize, edge_in: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
        };
        let mut blocks = Vec::with_capacity(cfg.num_blocks);
        let (mut w_node, mut w_edge) = (node_in, edge_in);
        for b in 0..cfg.num_blocks {
            let width = cfg.filters_per_layer[b];
            let mut node_filters = Vec::new();
            let mut edge_filters = Vec::new();
            for _ in 0..cfg.conv_layers_per_block[b] {
                let theta = (0..cfg.poly_order)
                    .map(|_| uniform(w_node, width, w_node))
                    .collect();
                node_filters.push(FilterBank::new(0, theta)?);
                w_node = width;
                if cfg.edge_path {
                    let theta = (0..cfg.poly_order)
                        .map(|_| uniform(w_edge, width, w_edge))
                        .collect();
                    edge_filters.push(FilterBank::new(1, theta)?);
                    w_edge = width;
                }
            }
            let msi = cfg.msi_enabled.then(|| {
                let mut branch = || MsiBranch {
                    w_prime: uniform(2 * width, width, 2 * width),
                    w: uniform(width, width, width),
                };
                MsiWeights {
                    low: branch(),
                    high: branch(),
                }
            });
            let attention = cfg.pooling_enabled[b].then(|| {
                let mut head = |alpha: f64| AttentionHead {
                    w_query: uniform(width, cfg.qk_dim, width),
                    w_key: uniform(width, cfg.qk_dim, width),
                    alpha,
                };
                AttentionParams {
                    low: head(cfg.alpha[0]),
                    high: head(cfg.alpha[1]),
                }
            });
            blocks.push(BlockParams {
                node_filters,
                edge_filters,
                msi,
                attention,
            });
        }
        let mut head = Vec::new();
        let mut fan_in = readout_width(cfg);
        for &out in &cfg.fc_layers {
            let weight = uniform(fan_in, out, fan_in);
            let bias = uniform(1, out, fan_in).iter().copied().collect();
            head.push(DenseLayer { weight, bias });
            fan_in = out;
        }
        Ok(Self { blocks, head })
    }

    /// Checks every tensor against `cfg`; errors name the offending block or layer.
    pub fn validate(&self, cfg: &ModelConfig) -> Result<InputWidths> {
        cfg.validate()?;
        if self.blocks.len() != cfg.num_blocks {
            return Err(Error::shape(format!(
                "parameters hold {} blocks, config expects {}",
                self.blocks.len(),
                cfg.num_blocks
            )));
        }
        let mut inputs = InputWidths { node: 0, edge: 0 };
        let (mut w_node, mut w_edge) = (None, None);
        for (b, block) in self.blocks.iter().enumerate() {
            let at = |e: Error| e.at(format!("block {b}"));
            let width = cfg.filters_per_layer[b];
            let layers = cfg.conv_layers_per_block[b];
            if block.node_filters.len() != layers {
                return Err(at(Error::shape(format!(
                    "{} node filter layers, config expects {layers}",
                    block.node_filters.len()
                ))));
            }
            let edge_layers = if cfg.edge_path { layers } else { 0 };
            if block.edge_filters.len() != edge_layers {
                return Err(at(Error::shape(format!(
                    "{} edge filter layers, config expects {edge_layers}",
                    block.edge_filters.len()
                ))));
            }
            for (dim, filters, prev) in [
                (0, &block.node_filters, &mut w_node),
                (1, &block.edge_filters, &mut w_edge),
            ] {
                for (l, fb) in filters.iter().enumerate() {
                    let at = |e: Error| e.at(format!("block {b}, layer {l}"));
                    if fb.k() != dim || fb.order() != cfg.poly_order || fb.d_out() != width {
                        return Err(at(Error::shape(format!(
                            "filter (k={}, P={}, out={}) does not match config (k={dim}, P={}, out={width})",
                            fb.k(),
                            fb.order(),
                            fb.d_out(),
                            cfg.poly_order
                        ))));
                    }
                    match *prev {
                        Some(w) if w != fb.d_in() => {
                            return Err(at(Error::shape(format!(
                                "filter expects {} input channels, previous layer yields {w}",
                                fb.d_in()
                            ))))
                        }
                        None if dim == 0 => inputs.node = fb.d_in(),
                        None => inputs.edge = fb.d_in(),
                        _ => {}
                    }
                    *prev = Some(width);
                }
            }
            match (&block.msi, cfg.msi_enabled) {
                (Some(m), true) => {
                    for br in [&m.low, &m.high] {
                        if br.w_prime.shape() != (2 * width, width)
                            || br.w.shape() != (width, width)
                        {
                            return Err(at(Error::shape("MSI weight shapes do not match width")));
                        }
                    }
                }
                (None, false) => {}
                (Some(_), false) => {
                    return Err(at(Error::shape("MSI weights present but MSI disabled")))
                }
                (None, true) => return Err(at(Error::shape("MSI enabled but weights missing"))),
            }
            match (&block.attention, cfg.pooling_enabled[b]) {
                (Some(a), true) => {
                    for h in [&a.low, &a.high] {
                        let want = (width, cfg.qk_dim);
                        if h.w_query.shape() != want || h.w_key.shape() != want {
                            return Err(at(Error::shape(
                                "attention weight shapes do not match config",
                            )));
                        }
                    }
                }
                (None, false) => {}
                (Some(_), false) => {
                    return Err(at(Error::shape(
                        "attention weights present but pooling disabled",
                    )))
                }
                (None, true) => {
                    return Err(at(Error::shape(
                        "pooling enabled but attention weights missing",
                    )))
                }
            }
        }
        if self.head.len() != cfg.fc_layers.len() {
            return Err(Error::shape(format!(
                "head has {} layers, config expects {}",
                self.head.len(),
                cfg.fc_layers.len()
            )));
        }
        let mut fan_in = readout_width(cfg);
        for (i, (layer, &out)) in self.head.iter().zip(&cfg.fc_layers).enumerate() {
            if layer.weight.shape() != (fan_in, out) || layer.bias.len() != out {
                return Err(Error::shape(format!(
                    "head layer {i}: weight {:?} / bias {} expected ({fan_in}, {out}) / {out}",
                    layer.weight.shape(),
                    layer.bias.len()
                )));
            }
            fan_in = out;
        }
        Ok(inputs)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ParamsFile::from(self);
        check_finite(&file)?;
        to_json_string(&file)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        from_json_str::<ParamsFile>(text)?.try_into()
    }

    // Ablation helpers: build a larger variant whose extra stages are pass-through.

    /// M1 parameters to M2: zero edge filters, head ignores the edge readout.
    pub fn with_zero_edge_path(&self, cfg: &ModelConfig, edge_in: usize) -> Result<Self> {
        let mut out = self.clone();
        let mut w_in = edge_in;
        for (b, block) in out.blocks.iter_mut().enumerate() {
            let width = cfg.filters_per_layer[b];
            block.edge_filters = (0..block.node_filters.len())
                .map(|_| {
                    let fb = FilterBank::zeros(1, cfg.poly_order, w_in, width);
                    w_in = width;
                    fb
                })
                .collect::<Result<_>>()?;
        }
        let first = &mut out.head[0];
        let (rows, cols) = first.weight.shape();
        first.weight = first.weight.clone().resize_vertically(2 * rows, 0.0);
        debug_assert_eq!(first.weight.ncols(), cols);
        Ok(out)
    }

    /// M2 parameters to M3: identity-like MSI weights in every block.
    pub fn with_pass_through_msi(&self, cfg: &ModelConfig) -> Self {
        let mut out = self.clone();
        for (b, block) in out.blocks.iter_mut().enumerate() {
            block.msi = Some(MsiWeights::pass_through(cfg.filters_per_layer[b]));
        }
        out
    }
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    ModelParams::from_json(&std::fs::read_to_string(path)?)
}

pub fn save_params(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, params.to_json()?)?;
    Ok(())
}

fn readout_width(cfg: &ModelConfig) -> usize {
    let last = cfg.filters_per_layer[cfg.num_blocks - 1];
    if cfg.edge_path {
        2 * last
    } else {
        last
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    blocks: Vec<BlockFile>,
    head: Vec<DenseFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockFile {
    node_filters: Vec<FilterBank>,
    #[serde(default)]
    edge_filters: Vec<FilterBank>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    msi: Option<MsiFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attention: Option<AttentionFile>,
}

#[derive(Serialize, Deserialize)]
struct MsiFile {
    low: MsiBranchFile,
    high: MsiBranchFile,
}

#[derive(Serialize, Deserialize)]
struct MsiBranchFile {
    w_prime: TensorRecord,
    w: TensorRecord,
}

#[derive(Serialize, Deserialize)]
struct AttentionFile {
    low: HeadFile,
    high: HeadFile,
}

#[derive(Serialize, Deserialize)]
struct HeadFile {
    w_query: TensorRecord,
    w_key: TensorRecord,
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct DenseFile {
    weight: TensorRecord,
    bias: TensorRecord,
}

impl From<&ModelParams> for ParamsFile {
    fn from(p: &ModelParams) -> Self {
        let branch = |b: &MsiBranch| MsiBranchFile {
            w_prime: TensorRecord::from_matrix(&b.w_prime),
            w: TensorRecord::from_matrix(&b.w),
        };
        let head = |h: &AttentionHead| HeadFile {
            w_query: TensorRecord::from_matrix(&h.w_query),
            w_key: TensorRecord::from_matrix(&h.w_key),
            alpha: h.alpha,
        };
        ParamsFile {
            blocks: p
                .blocks
                .iter()
                .map(|b| BlockFile {
                    node_filters: b.node_filters.clone(),
                    edge_filters: b.edge_filters.clone(),
                    msi: b.msi.as_ref().map(|m| MsiFile {
                        low: branch(&m.low),
                        high: branch(&m.high),
                    }),
                    attention: b.attention.as_ref().map(|a| AttentionFile {
                        low: head(&a.low),
                        high: head(&a.high),
                    }),
                })
                .collect(),
            head: p
                .head
                .iter()
                .map(|l| DenseFile {
                    weight: TensorRecord::from_matrix(&l.weight),
                    bias: TensorRecord::from_vector(&l.bias),
                })
                .collect(),
        }
    }
}

impl TryFrom<ParamsFile> for ModelParams {
    type Error = Error;

    fn try_from(f: ParamsFile) -> Result<Self> {
        let blocks = f
            .blocks
            .into_iter()
            .enumerate()
            .map(|(b, bf)| {
                let at = |name: &'static str| move |e: Error| e.at(format!("blocks[{b}].{name}"));
                let msi = bf
                    .msi
                    .map(|m| -> Result<MsiWeights> {
                        let branch = |x: MsiBranchFile| -> Result<MsiBranch> {
                            Ok(MsiBranch {
                                w_prime: x.w_prime.into_matrix()?,
                                w: x.w.into_matrix()?,
                            })
                        };
                        Ok(MsiWeights {
                            low: branch(m.low)?,
                            high: branch(m.high)?,
                        })
                    })
                    .transpose()
                    .map_err(at("msi"))?;
                let attention = bf
                    .attention
                    .map(|a| -> Result<AttentionParams> {
                        let head = |h: HeadFile| -> Result<AttentionHead> {
                            Ok(AttentionHead {
                                w_query: h.w_query.into_matrix()?,
                                w_key: h.w_key.into_matrix()?,
                                alpha: h.alpha,
                            })
                        };
                        Ok(AttentionParams {
                            low: head(a.low)?,
                            high: head(a.high)?,
                        })
                    })
                    .transpose()
                    .map_err(at("attention"))?;
                Ok(BlockParams {
                    node_filters: bf.node_filters,
                    edge_filters: bf.edge_filters,
                    msi,
                    attention,
                })
            })
            .collect::<Result<_>>()?;
        let head = f
            .head
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                let layer = || -> Result<DenseLayer> {
                    Ok(DenseLayer {
                        weight: d.weight.into_matrix()?,
                        bias: d.bias.into_vector()?,
                    })
                };
                layer().map_err(|e| e.at(format!("head[{i}]")))
            })
            .collect::<Result<_>>()?;
        Ok(ModelParams { blocks, head })
    }
}

fn check_finite(f: &ParamsFile) -> Result<()> {
    let bad = |path: String, vals: &[f64]| {
        if vals.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(path))
        }
    };
    for (b, block) in f.blocks.iter().enumerate() {
        for (name, filters) in [
            ("node_filters", &block.node_filters),
            ("edge_filters", &block.edge_filters),
        ] {
            for (l, fb) in filters.iter().enumerate() {
                for t in fb.theta() {
                    bad(format!("blocks[{b}].{name}[{l}]"), t.as_slice())?;
                }
            }
        }
        if let Some(m) = &block.msi {
            for br in [&m.low, &m.high] {
                bad(format!("blocks[{b}].msi"), &br.w_prime.data)?;
                bad(format!("blocks[{b}].msi"), &br.w.data)?;
            }
        }
        if let Some(a) = &block.attention {
            for h in [&a.low, &a.high] {
                bad(format!("blocks[{b}].attention"), &h.w_query.data)?;
                bad(format!("blocks[{b}].attention"), &h.w_key.data)?;
                bad(format!("blocks[{b}].attention"), &[h.alpha])?;
            }
        }
    }
    for (i, d) in f.head.iter().enumerate() {
        bad(format!("head[{i}].weight"), &d.weight.data)?;
        bad(format!("head[{i}].bias"), &d.bias.data)?;
    }
    Ok(())
}

/// Laplacian eigenvector encodings for nodes and edges.
///
/// Node columns skip the first (constant) eigenvector of `L_0`; edge columns
/// are the lowest eigenvectors of `L_1`. Missing columns are zero-filled so
/// the widths always equal `cfg.pe_dims`.
pub fn positional_encoding(
    c: &SimplicialComplex,
    cfg: &ModelConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let encode = |k: usize, want: usize, skip: usize| -> Result<DMatrix<f64>> {
        let n = c.count(k);
        let mut pe = DMatrix::zeros(n, want);
        if want == 0 || n == 0 {
            return Ok(pe);
        }
        let es = eigensystem(&hodge_laplacian(c, k)?, Some((want + skip).min(n)))?;
        let avail = es.eigenvectors.ncols().saturating_sub(skip);
        for j in 0..avail.min(want) {
            pe.set_column(j, &es.eigenvectors.column(j + skip));
        }
        Ok(pe)
    };
    let mut node = encode(0, cfg.pe_dims.node, 1)?;
    let mut edge = if c.max_dim() >= 1 {
        encode(1, cfg.pe_dims.edge, 0)?
    } else {
        DMatrix::zeros(0, cfg.pe_dims.edge)
    };
    if let Some(seed) = cfg.pe_sign_flip_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for m in [&mut node, &mut edge] {
            for j in 0..m.ncols() {
                if rng.random::<bool>() {
                    m.column_mut(j).neg_mut();
                }
            }
        }
    }
    Ok((node, edge))
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

fn mean_rows(x: &DMatrix<f64>) -> Vec<f64> {
    if x.nrows() == 0 {
        return vec![0.0; x.ncols()];
    }
    (0..x.ncols())
        .map(|j| x.column(j).sum() / x.nrows() as f64)
        .collect()
}

/// Runs the full pipeline and returns the prediction vector.
///
/// `x1` is ignored when the edge path is off. Positional encodings are
/// appended to the raw signals when `cfg.pe_dims` is non-zero.
pub fn forward(
    c: &SimplicialComplex,
    x0: &DMatrix<f64>,
    x1: &DMatrix<f64>,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<Vec<f64>> {
    let inputs = params.validate(cfg)?;
    if cfg.edge_path && c.max_dim() < 1 {
        return Err(Error::shape("edge path needs a complex with an edge level"));
    }
    let (mut x0, mut x1) = (x0.clone(), x1.clone());
    if cfg.pe_dims.node > 0 || cfg.pe_dims.edge > 0 {
        let (pe0, pe1) = positional_encoding(c, cfg)?;
        x0 = hcat(&x0, &pe0);
        if cfg.edge_path {
            x1 = hcat(&x1, &pe1);
        }
    }
    if x0.shape() != (c.num_nodes(), inputs.node) {
        return Err(Error::shape(format!(
            "node input is {:?}, expected ({}, {})",
            x0.shape(),
            c.num_nodes(),
            inputs.node
        )));
    }
    if cfg.edge_path && x1.shape() != (c.count(1), inputs.edge) {
        return Err(Error::shape(format!(
            "edge input is {:?}, expected ({}, {})",
            x1.shape(),
            c.count(1),
            inputs.edge
        )));
    }

    let act = |m: DMatrix<f64>| m.map(|v| cfg.activation.apply(v));
    let mut complex = c.clone();
    for (b, block) in params.blocks.iter().enumerate() {
        let l0 = cfg.laplacian(&complex, 0)?;
        for (l, fb) in block.node_filters.iter().enumerate() {
            x0 = act(filter_poly(&l0, fb, &x0)
                .map_err(|e| e.at(format!("block {b}, layer {l}, nodes")))?);
        }
        if cfg.edge_path {
            let l1 = cfg.laplacian(&complex, 1)?;
            for (l, fb) in block.edge_filters.iter().enumerate() {
                x1 = act(filter_poly(&l1, fb, &x1)
                    .map_err(|e| e.at(format!("block {b}, layer {l}, edges")))?);
            }
        }
        if !cfg.edge_path {
            continue;
        }
        let ops = ProjectionPair::between(&complex, 0, 1)?;
        if let Some(w) = &block.msi {
            (x0, x1) =
                msi_forward(&x0, &x1, &ops, w).map_err(|e| e.at(format!("block {b}, MSI")))?;
        }
        if let Some(att) = &block.attention {
            let at = |e: Error| e.at(format!("block {b}, pooling"));
            let (a0, a1) = attention_weights(&x0, &x1, &ops, att).map_err(at)?;
            let nc = cluster_nodes(&complex, ClusteringConfig::default());
            let coarse = downsample(&complex, &nc).map_err(at)?;
            let mut pooled = pool_signals(&[x0, x1], &[a0, a1], &coarse.assignments).map_err(at)?;
            x1 = pooled.pop().expect("two pooled signals");
            x0 = pooled.pop().expect("two pooled signals");
            complex = coarse.coarse_complex;
        }
    }

    let mut features = mean_rows(&x0);
    if cfg.edge_path {
        features.extend(mean_rows(&x1));
    }
    let last = params.head.len() - 1;
    for (i, layer) in params.head.iter().enumerate() {
        features = layer.forward(&features);
        if i < last {
            features
                .iter_mut()
                .for_each(|v| *v = cfg.activation.apply(*v));
        }
    }
    Ok(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{build_complex, Graph};

    fn filled_triangle() -> SimplicialComplex {
        build_complex(&Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap(), 2)
    }

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            pe_dims: PeDims { node: 2, edge: 2 },
            ..ModelConfig::default()
        }
    }

    #[test]
    fn default_edge_pe_is_eight() {
        assert_eq!(PeDims::default().edge, 8);
    }

    #[test]
    fn activations() {
        assert_eq!(Activation::Relu.apply(-2.0), 0.0);
        assert_eq!(Activation::LeakyRelu.apply(-2.0), -0.2);
        assert_eq!(Activation::LeakyRelu.apply(3.0), 3.0);
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        let mut cfg = ModelConfig::default();
        cfg.filters_per_layer.pop();
        assert!(cfg.validate().is_err());
        let cfg = ModelConfig {
            edge_path: false,
            ..ModelConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(Ablation::M1
            .apply(&ModelConfig::default())
            .validate()
            .is_ok());
    }

    #[test]
    fn zero_params_yield_head_bias() {
        let cfg = small_cfg();
        let c = filled_triangle();
        let mut p = ModelParams::random(&cfg, 3, 3, 1).unwrap();
        for block in &mut p.blocks {
            for fb in block
                .node_filters
                .iter_mut()
                .chain(block.edge_filters.iter_mut())
            {
                *fb = FilterBank::zeros(fb.k(), fb.order(), fb.d_in(), fb.d_out()).unwrap();
            }
        }
        for layer in &mut p.head {
            layer.weight.fill(0.0);
            layer.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        let y = forward(&c, &DMatrix::zeros(3, 1), &DMatrix::zeros(3, 1), &p, &cfg).unwrap();
        assert_eq!(y, vec![0.0]);
        p.head[1].bias = vec![0.25];
        let y = forward(&c, &DMatrix::zeros(3, 1), &DMatrix::zeros(3, 1), &p, &cfg).unwrap();
        assert_eq!(y, vec![0.25]);
    }

    #[test]
    fn m1_runs_on_filled_triangle() {
        let cfg = Ablation::M1.apply(&small_cfg());
        let p = ModelParams::random(&cfg, 3, 0, 7).unwrap();
        let x0 = DMatrix::from_element(3, 1, 1.0);
        let y = forward(&filled_triangle(), &x0, &DMatrix::zeros(0, 0), &p, &cfg).unwrap();
        assert_eq!(y.len(), 1);
        assert!(y[0].is_finite());
    }

    #[test]
    fn node_pe_skips_constant_vector() {
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let c = build_complex(&g, 2);
        let cfg = ModelConfig {
            pe_dims: PeDims { node: 5, edge: 8 },
            ..ModelConfig::default()
        };
        let (node, edge) = positional_encoding(&c, &cfg).unwrap();
        assert_eq!(node.shape(), (4, 5));
        assert_eq!(edge.shape(), (3, 8));
        // Columns 0..3 are non-constant eigenvectors; the rest is padding.
        for j in 0..3 {
            assert!(node.column(j).sum().abs() < 1e-10);
        }
        assert!(node
            .column(3)
            .iter()
            .chain(node.column(4).iter())
            .all(|&v| v == 0.0));
        assert!(edge.columns(3, 5).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pe_without_edges_is_empty() {
        let c = build_complex(&Graph::new(3, []).unwrap(), 2);
        let (_, edge) = positional_encoding(&c, &ModelConfig::default()).unwrap();
        assert_eq!(edge.nrows(), 0);
    }

    #[test]
    fn sign_flip_is_seeded() {
        let c = filled_triangle();
        let mut cfg = small_cfg();
        cfg.pe_sign_flip_seed = Some(3);
        let a = positional_encoding(&c, &cfg).unwrap();
        let b = positional_encoding(&c, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validate_names_block() {
        let cfg = small_cfg();
        let mut p = ModelParams::random(&cfg, 3, 3, 0).unwrap();
        p.blocks[1].node_filters.clear();
        let err = p.validate(&cfg).unwrap_err().to_string();
        assert!(err.contains("block 1"), "{err}");
    }

    #[test]
    fn params_json_round_trip() {
        let cfg = small_cfg();
        let p = ModelParams::random(&cfg, 3, 4, 11).unwrap();
        let back = ModelParams::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn non_finite_params_are_rejected() {
        let cfg = small_cfg();
        let mut p = ModelParams::random(&cfg, 3, 4, 11).unwrap();
        p.head[0].bias[0] = f64::NAN;
        assert!(matches!(p.to_json(), Err(Error::NonFinite(_))));
    }
}
