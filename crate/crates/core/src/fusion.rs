//! Cross-agent local instance fusion.
//!
//! Collaborative-branch instances get two sinusoidal position encodings
//! (their position-map cell and their agent's arrival rank) added to their
//! features. A plain self-attention pass then adapts features across agent
//! domains, and a second pass adds `log W` to its logits, where
//! `W[k][v] = exp(-|c_k - c_v| / (beta * r_k^2))` and `r_k` is the
//! circumradius of box `k`. The bias is computed directly in log space so
//! far pairs keep their (very negative) logits instead of underflowing to
//! `log 0`.
//!
//! In analytic mode all projections are identity and there is no residual.
//! Loaded mode reads six `d x d` projection matrices from a weights file.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::geometry::{circumradius, normalize_angle, OrientedBox3D, OrientedBoxBEV};
use crate::scenario::Instance;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"CFW1";
pub const MAX_WEIGHTS_DIM: usize = 4096;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("version-unsupported: bad weights magic {0:?}")]
    VersionUnsupported([u8; 4]),
    #[error("weights file truncated")]
    Truncated,
    #[error("weights dimension {found} does not match configured d = {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("weights dimension {0} outside 1..={MAX_WEIGHTS_DIM}")]
    BadDim(usize),
    #[error("weights io: {0}")]
    Io(#[from] std::io::Error),
}

/// Projection matrices for both attention stages, applied as `X W` on row vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Projections {
    pub d: usize,
    pub cda: [Array2<f64>; 3],
    pub gda: [Array2<f64>; 3],
}

impl Projections {
    pub fn identity(d: usize) -> Self {
        let eye = || Array2::eye(d);
        Self {
            d,
            cda: [eye(), eye(), eye()],
            gda: [eye(), eye(), eye()],
        }
    }

    pub fn read_from<R: Read>(mut r: R) -> std::result::Result<Self, WeightsError> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != WEIGHTS_MAGIC {
            return Err(WeightsError::VersionUnsupported(magic));
        }
        let mut dim = [0u8; 4];
        read_exact(&mut r, &mut dim)?;
        let d = u32::from_le_bytes(dim) as usize;
        if d == 0 || d > MAX_WEIGHTS_DIM {
            return Err(WeightsError::BadDim(d));
        }
        let mut buf = vec![0u8; d * d * 4];
        let mut next = || -> std::result::Result<Array2<f64>, WeightsError> {
            read_exact(&mut r, &mut buf)?;
            let vals: Vec<f64> = buf
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
                .collect();
            Ok(Array2::from_shape_vec((d, d), vals).expect("d*d values"))
        };
        let cda = [next()?, next()?, next()?];
        let gda = [next()?, next()?, next()?];
        Ok(Self { d, cda, gda })
    }

    pub fn load(path: &Path) -> std::result::Result<Self, WeightsError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Writes the matrices as f32; values are rounded accordingly.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(WEIGHTS_MAGIC)?;
        w.write_all(&(self.d as u32).to_le_bytes())?;
        for m in self.cda.iter().chain(&self.gda) {
            for v in m.iter() {
                w.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> std::result::Result<(), WeightsError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => WeightsError::Truncated,
        _ => WeightsError::Io(e),
    })
}

#[derive(Clone, PartialEq)]
pub enum AttentionMode {
    Analytic,
    Loaded(Arc<Projections>),
}

impl fmt::Debug for AttentionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttentionMode::Analytic => f.write_str("analytic"),
            AttentionMode::Loaded(p) => write!(f, "loaded(d={})", p.d),
        }
    }
}

impl fmt::Display for AttentionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttentionMode::Analytic => f.write_str("analytic"),
            AttentionMode::Loaded(_) => f.write_str("loaded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionConfig {
    pub d: usize,
    pub beta: f64,
    pub mode: AttentionMode,
    pub residual: bool,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        Self::analytic(crate::scenario::DEFAULT_FEATURE_DIM)
    }
}

impl AttentionConfig {
    pub fn analytic(d: usize) -> Self {
        Self {
            d,
            beta: 1.0,
            mode: AttentionMode::Analytic,
            residual: false,
        }
    }

    /// Loaded mode; residual connections default to on.
    pub fn loaded(projections: Projections) -> Self {
        Self {
            d: projections.d,
            beta: 1.0,
            mode: AttentionMode::Loaded(Arc::new(projections)),
            residual: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || !self.d.is_multiple_of(4) {
            return Err(Error::config(format!("feature dim {} must be a positive multiple of 4", self.d)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config("beta must be finite and > 0"));
        }
        if let AttentionMode::Loaded(p) = &self.mode {
            if p.d != self.d {
                return Err(WeightsError::DimMismatch {
                    expected: self.d,
                    found: p.d,
                }
                .into());
            }
        }
        Ok(())
    }

    fn stage(&self, stage: Stage) -> Option<&[Array2<f64>; 3]> {
        match &self.mode {
            AttentionMode::Analytic => None,
            AttentionMode::Loaded(p) => Some(match stage {
                Stage::Cda => &p.cda,
                Stage::Gda => &p.gda,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Stage {
    Cda,
    Gda,
}

fn frequency(i: usize, pairs: usize) -> f64 {
    10000f64.powf(-(i as f64) / pairs as f64)
}

fn sinusoid(pos: f64, pairs: usize, out: &mut Vec<f64>) {
    for i in 0..pairs {
        let (s, c) = (pos * frequency(i, pairs)).sin_cos();
        out.push(s);
        out.push(c);
    }
}

/// Sinusoidal encoding of a position-map cell: `d/2` dims for each axis,
/// interleaved `(sin, cos)` pairs with frequencies from 1 down to 1e-4.
pub fn spatial_pe(grid: (i32, i32), d: usize) -> Result<Vec<f64>> {
    if !d.is_multiple_of(4) {
        return Err(Error::config(format!("spatial encoding needs d divisible by 4, got {d}")));
    }
    let mut out = Vec::with_capacity(d);
    sinusoid(f64::from(grid.0), d / 4, &mut out);
    sinusoid(f64::from(grid.1), d / 4, &mut out);
    Ok(out)
}

/// Sinusoidal encoding of an agent's rank (ego = 0, collaborators by arrival).
pub fn agent_pe(rank: u32, d: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(d);
    sinusoid(f64::from(rank), d / 2, &mut out);
    if d % 2 == 1 {
        out.push(0.0);
    }
    out
}

/// An instance ready for fusion, with the inputs to both position encodings.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInstance {
    pub instance: Instance,
    pub grid: (i32, i32),
    pub agent_rank: u32,
}

impl EncodedInstance {
    /// `feature + spatial_pe + agent_pe`.
    pub fn row(&self, d: usize) -> Result<Vec<f64>> {
        if self.instance.feature.len() != d {
            return Err(Error::config(format!(
                "instance feature has {} dims, expected {d}",
                self.instance.feature.len()
            )));
        }
        let sp = spatial_pe(self.grid, d)?;
        let ap = agent_pe(self.agent_rank, d);
        Ok(self
            .instance
            .feature
            .iter()
            .zip(sp.iter().zip(&ap))
            .map(|(f, (s, a))| f64::from(*f) + s + a)
            .collect())
    }
}

pub fn encode_rows(coop: &[EncodedInstance], d: usize) -> Result<Array2<f64>> {
    let mut data = Vec::with_capacity(coop.len() * d);
    for e in coop {
        data.extend(e.row(d)?);
    }
    Ok(Array2::from_shape_vec((coop.len(), d), data).expect("rows of length d"))
}

/// Attention weights and outputs of one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Attended {
    pub weights: Array2<f64>,
    pub output: Array2<f64>,
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

fn project(x: &ArrayView2<f64>, w: Option<&Array2<f64>>) -> Array2<f64> {
    match w {
        Some(w) => x.dot(w),
        None => x.to_owned(),
    }
}

fn attend(x: ArrayView2<f64>, bias: Option<ArrayView2<f64>>, cfg: &AttentionConfig, stage: Stage) -> Result<Attended> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("attention needs at least one instance"));
    }
    if x.ncols() != cfg.d {
        return Err(Error::config(format!("input has {} columns, expected {}", x.ncols(), cfg.d)));
    }
    let w = cfg.stage(stage);
    let q = project(&x, w.map(|w| &w[0]));
    let k = project(&x, w.map(|w| &w[1]));
    let v = project(&x, w.map(|w| &w[2]));
    let mut logits = q.dot(&k.t()) / (cfg.d as f64).sqrt();
    if let Some(b) = bias {
        logits += &b;
    }
    softmax_rows(&mut logits);
    let mut output = logits.dot(&v);
    if cfg.residual {
        output += &x;
    }
    Ok(Attended {
        weights: logits,
        output,
    })
}

/// Self-attention over the collaborative rows (`Q = K = V = X`).
pub fn cda_forward(x: ArrayView2<f64>, cfg: &AttentionConfig) -> Result<Attended> {
    attend(x, None, cfg, Stage::Cda)
}

/// `log W[k][v] = -|c_k - c_v| / (beta * r_k^2)`.
pub fn gaussian_log_weights(boxes: &[OrientedBoxBEV], beta: f64) -> Result<Array2<f64>> {
    let n = boxes.len();
    let mut out = Array2::zeros((n, n));
    for (k, bk) in boxes.iter().enumerate() {
        let r = circumradius(bk);
        if !(bk.area() >= crate::geometry::AREA_EPS) || !(r > 0.0) {
            return Err(Error::DegenerateBox(format!("box {k} has zero area")));
        }
        let scale = beta * r * r;
        for (v, bv) in boxes.iter().enumerate() {
            let dist = (bk.cx - bv.cx).hypot(bk.cy - bv.cy);
            out[[k, v]] = -dist / scale;
        }
    }
    Ok(out)
}

/// The Gaussian distance weights themselves, in `(0, 1]`. Generally asymmetric.
pub fn gaussian_weights(boxes: &[OrientedBoxBEV], beta: f64) -> Result<Array2<f64>> {
    Ok(gaussian_log_weights(boxes, beta)?.mapv(f64::exp))
}

/// Distance-biased attention: `softmax(Q K^T / sqrt(d) + log W) V`.
pub fn gda_forward(x: ArrayView2<f64>, boxes: &[OrientedBoxBEV], cfg: &AttentionConfig) -> Result<Attended> {
    if boxes.len() != x.nrows() {
        return Err(Error::config("one box per attention row is required"));
    }
    let log_w = gaussian_log_weights(boxes, cfg.beta)?;
    attend(x, Some(log_w.view()), cfg, Stage::Gda)
}

/// Analytic Jacobians `d y_k / d x_j` of the distance-biased pass, one `d x d`
/// matrix per output row `k` (rows index output dims, columns input dims).
pub fn gda_jacobian(x: ArrayView2<f64>, boxes: &[OrientedBoxBEV], cfg: &AttentionConfig, j: usize) -> Result<Vec<Array2<f64>>> {
    let att = gda_forward(x, boxes, cfg)?;
    let n = x.nrows();
    let d = cfg.d;
    let scale = 1.0 / (d as f64).sqrt();
    let eye = Array2::<f64>::eye(d);
    let (wq, wk, wv) = match cfg.stage(Stage::Gda) {
        Some(w) => (&w[0], &w[1], &w[2]),
        None => (&eye, &eye, &eye),
    };
    let q = x.dot(wq);
    let kk = x.dot(wk);
    let v = x.dot(wv);
    let a = &att.weights;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        // g[v] = dS_kv / dx_j as a d-vector.
        let mut g = Array2::<f64>::zeros((n, d));
        if k == j {
            // Wq k_v for every v: rows of K Wq^T.
            g += &(kk.dot(&wq.t()) * scale);
        }
        let wk_qk = wk.dot(&q.row(k)) * scale;
        let mut gj = g.row_mut(j);
        gj += &wk_qk;
        let a_k = a.row(k);
        let gbar = a_k.dot(&g);
        let mut jac = Array2::<f64>::zeros((d, d));
        for u in 0..n {
            let coef = a_k[u];
            let diff = &g.row(u) - &gbar;
            let vu = v.row(u);
            let outer = vu
                .to_owned()
                .insert_axis(Axis(1))
                .dot(&diff.insert_axis(Axis(0)));
            jac.scaled_add(coef, &outer);
        }
        jac.scaled_add(a_k[j], &wv.t());
        if cfg.residual && k == j {
            jac += &eye;
        }
        out.push(jac);
    }
    Ok(out)
}

/// Weighted box average; yaw via the mean heading unit vector.
fn fuse_boxes(boxes: &[(f64, OrientedBox3D)]) -> OrientedBox3D {
    let total: f64 = boxes.iter().map(|(w, _)| w).sum();
    let mut acc = [0.0f64; 8];
    for (w, b) in boxes {
        let w = w / total;
        let (s, c) = b.bev.yaw.sin_cos();
        let vals = [b.bev.cx, b.bev.cy, b.cz, b.bev.length, b.bev.width, b.height, s, c];
        for (a, v) in acc.iter_mut().zip(vals) {
            *a += w * v;
        }
    }
    OrientedBox3D::new(acc[0], acc[1], acc[2], acc[3], acc[4], acc[5], normalize_angle(acc[6].atan2(acc[7])))
}

/// Result of fusing one frame's collaborative branch.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    /// Fused coop instances followed by the untouched single-branch instances.
    pub instances: Vec<Instance>,
    pub cda_weights: Option<Array2<f64>>,
    pub gda_weights: Option<Array2<f64>>,
}

/// Adapt and fuse the collaborative branch, then append the single branch unchanged.
///
/// Each fused instance takes the second-pass output as its feature, and its
/// box and score become the attention-weighted mean over itself and its
/// routing partners (`partners[k]` indexes into `coop`).
pub fn calif(coop: &[EncodedInstance], partners: &[Vec<usize>], single: Vec<Instance>, cfg: &AttentionConfig) -> Result<FusionOutput> {
    if coop.is_empty() {
        return Ok(FusionOutput {
            instances: single,
            cda_weights: None,
            gda_weights: None,
        });
    }
    cfg.validate()?;
    if partners.len() != coop.len() {
        return Err(Error::config("partner list must match the coop branch"));
    }
    let x = encode_rows(coop, cfg.d)?;
    let adapted = cda_forward(x.view(), cfg)?;
    let boxes: Vec<OrientedBoxBEV> = coop.iter().map(|e| e.instance.bbox.bev).collect();
    let fused = gda_forward(adapted.output.view(), &boxes, cfg)?;

    let mut instances = Vec::with_capacity(coop.len() + single.len());
    for (k, enc) in coop.iter().enumerate() {
        let group: Vec<usize> = std::iter::once(k).chain(partners[k].iter().copied()).collect();
        let weights: Vec<f64> = group.iter().map(|&v| fused.weights[[k, v]]).collect();
        let total: f64 = weights.iter().sum();
        let boxed: Vec<(f64, OrientedBox3D)> = group
            .iter()
            .zip(&weights)
            .map(|(&v, &w)| (w, coop[v].instance.bbox))
            .collect();
        let score = group
            .iter()
            .zip(&weights)
            .map(|(&v, &w)| w * coop[v].instance.score)
            .sum::<f64>()
            / total;
        instances.push(Instance {
            feature: fused.output.row(k).iter().map(|&v| v as f32).collect(),
            bbox: fuse_boxes(&boxed),
            score,
            ..enc.instance.clone()
        });
    }
    instances.extend(single);
    Ok(FusionOutput {
        instances,
        cda_weights: Some(adapted.weights),
        gda_weights: Some(fused.weights),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::FrameTag;
    use ndarray::array;

    fn bx(cx: f64, cy: f64, l: f64, w: f64) -> OrientedBoxBEV {
        OrientedBoxBEV::new(cx, cy, l, w, 0.0)
    }

    #[test]
    fn spatial_pe_cases() {
        let z = spatial_pe((0, 0), 8).unwrap();
        assert_eq!(z, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(spatial_pe((3, -4), 16).unwrap(), spatial_pe((3, -4), 16).unwrap());
        assert!(spatial_pe((0, 0), 10).is_err());
    }

    #[test]
    fn agent_pe_cases() {
        let z = agent_pe(0, 8);
        assert_eq!(z, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_ne!(agent_pe(0, 8), agent_pe(1, 8));
        assert_eq!(agent_pe(2, 8), agent_pe(2, 8));
    }

    #[test]
    fn single_row_attention_is_identity() {
        let cfg = AttentionConfig::analytic(4);
        let x = array![[0.3, -1.0, 2.0, 0.5]];
        assert_eq!(cda_forward(x.view(), &cfg).unwrap().output, x);
        let out = gda_forward(x.view(), &[bx(0.0, 0.0, 4.0, 2.0)], &cfg).unwrap();
        assert_eq!(out.output, x);
    }

    #[test]
    fn identical_rows_average() {
        let cfg = AttentionConfig::analytic(4);
        let x = array![[1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0]];
        let out = cda_forward(x.view(), &cfg).unwrap();
        assert!((out.output.clone() - &x).iter().all(|v| v.abs() < 1e-12));
        let boxes = [bx(0.0, 0.0, 4.0, 2.0), bx(0.0, 0.0, 4.0, 2.0)];
        let out = gda_forward(x.view(), &boxes, &cfg).unwrap();
        assert!(out.weights.iter().all(|w| (w - 0.5).abs() < 1e-12));
    }

    #[test]
    fn gaussian_weight_values() {
        // r = 2 needs length^2 + width^2 = 16.
        let r2 = bx(0.0, 0.0, 8f64.sqrt(), 8f64.sqrt());
        let w = gaussian_weights(&[r2, bx(3.0, 4.0, 1.0, 1.0)], 1.0).unwrap();
        assert_eq!(w[[0, 0]], 1.0);
        assert!((w[[0, 1]] - (-5.0f64 / 4.0).exp()).abs() < 1e-12);
        assert!((w[[0, 1]] - 0.28650).abs() < 1e-5);
        let r1 = bx(0.0, 0.0, 2f64.sqrt(), 2f64.sqrt());
        let w = gaussian_weights(&[r1, bx(1.0, 0.0, 1.0, 1.0)], 1.0).unwrap();
        assert!((w[[0, 1]] - (-1.0f64).exp()).abs() < 1e-12);
        // Asymmetric because the radii differ.
        assert_ne!(w[[0, 1]], w[[1, 0]]);
        assert!(gaussian_weights(&[bx(0.0, 0.0, 0.0, 1.0)], 1.0).is_err());
    }

    #[test]
    fn empty_inputs_error() {
        let cfg = AttentionConfig::analytic(4);
        let x = Array2::<f64>::zeros((0, 4));
        assert!(matches!(cda_forward(x.view(), &cfg), Err(Error::EmptyInput(_))));
        assert!(matches!(gda_forward(x.view(), &[], &cfg), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn weights_file_round_trip_and_bad_magic() {
        let mut p = Projections::identity(4);
        p.gda[2][[0, 1]] = 0.5;
        let mut buf = Vec::new();
        p.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 6 * 16 * 4);
        assert_eq!(Projections::read_from(&buf[..]).unwrap(), p);
        buf[0] = b'X';
        let err = Projections::read_from(&buf[..]).unwrap_err();
        assert!(err.to_string().contains("version-unsupported"));
        assert!(matches!(Projections::read_from(&buf[..20]), Err(WeightsError::VersionUnsupported(_))));
        buf[0] = b'C';
        assert!(matches!(Projections::read_from(&buf[..20]), Err(WeightsError::Truncated)));
        buf[4..8].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(Projections::read_from(&buf[..]), Err(WeightsError::BadDim(_))));
    }

    #[test]
    fn loaded_identity_matches_analytic_plus_residual() {
        let x = array![[0.1, 0.2, -0.3, 0.4], [0.0, 1.0, 0.5, -0.5]];
        let analytic = cda_forward(x.view(), &AttentionConfig::analytic(4)).unwrap();
        let mut loaded = AttentionConfig::loaded(Projections::identity(4));
        loaded.residual = false;
        assert_eq!(cda_forward(x.view(), &loaded).unwrap(), analytic);
        loaded.residual = true;
        let with_res = cda_forward(x.view(), &loaded).unwrap();
        assert!((with_res.output - &analytic.output - &x).iter().all(|v| v.abs() < 1e-12));
        let bad = AttentionConfig {
            d: 8,
            ..AttentionConfig::loaded(Projections::identity(4))
        };
        assert!(bad.validate().is_err());
    }

    fn inst(cx: f64, score: f64, feature: Vec<f32>) -> Instance {
        Instance {
            instance_id: 0,
            agent_id: 0,
            feature,
            bbox: OrientedBox3D::new(cx, 0.0, 0.8, 4.0, 2.0, 1.6, 0.0),
            score,
            frame: FrameTag::Ego,
            source: None,
        }
    }

    #[test]
    fn calif_empty_coop_passes_single_through() {
        let single = vec![inst(5.0, 0.4, vec![0.0; 8])];
        let out = calif(&[], &[], single.clone(), &AttentionConfig::analytic(8)).unwrap();
        assert_eq!(out.instances, single);
    }

    #[test]
    fn calif_duplicate_pair_fuses_to_midpoint() {
        let f = vec![0.25f32; 8];
        let coop = vec![
            EncodedInstance {
                instance: inst(10.2, 0.8, f.clone()),
                grid: (100, 0),
                agent_rank: 0,
            },
            EncodedInstance {
                instance: inst(9.8, 0.6, f),
                grid: (100, 0),
                agent_rank: 0,
            },
        ];
        let single = vec![inst(50.0, 0.3, vec![1.0; 8])];
        let out = calif(&coop, &[vec![1], vec![0]], single.clone(), &AttentionConfig::analytic(8)).unwrap();
        assert_eq!(out.instances.len(), 3);
        // Identical rows leave only the distance bias: self weight 1 / (1 + exp(-0.4 / r^2)), r^2 = 5.
        let w_self = 1.0 / (1.0 + (-0.4f64 / 5.0).exp());
        let a = &out.instances[0];
        let b = &out.instances[1];
        assert!((a.bbox.bev.cx - (10.2 * w_self + 9.8 * (1.0 - w_self))).abs() < 1e-12);
        assert!((b.bbox.bev.cx - (9.8 * w_self + 10.2 * (1.0 - w_self))).abs() < 1e-12);
        assert!((a.score - (0.8 * w_self + 0.6 * (1.0 - w_self))).abs() < 1e-12);
        // Both land within 5% of the half-gap of the midpoint.
        assert!((a.bbox.bev.cx - 10.0).abs() < 0.2 * 0.05);
        assert!(((a.bbox.bev.cx + b.bbox.bev.cx) / 2.0 - 10.0).abs() < 1e-12);
        assert_eq!(out.instances[2], single[0]);
    }
}
