//! Detection evaluation: assignment, suppression, average precision and
//! pose-noise injection.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::{bev_iou, normalize_angle, OrientedBoxBEV, Pose2D};
use crate::rng::substream;

/// Minimum-cost assignment of `min(n, m)` pairs for an `n x m` cost matrix
/// (Kuhn–Munkres with row potentials, O(n^2 m)).
///
/// Returns `(row, col)` pairs sorted by row and the total cost. Costs must be
/// finite. Ties resolve deterministically by row insertion order.
pub fn hungarian(cost: &[Vec<f64>]) -> (Vec<(usize, usize)>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let m = cost[0].len();
    assert!(cost.iter().all(|r| r.len() == m), "cost matrix rows must have equal length");
    if m == 0 {
        return (Vec::new(), 0.0);
    }
    let transposed = n > m;
    let (rows, cols) = if transposed { (m, n) } else { (n, m) };
    let at = |i: usize, j: usize| if transposed { cost[j][i] } else { cost[i][j] };

    // 1-based potentials; column 0 is a virtual start.
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=cols)
        .filter(|&j| p[j] != 0)
        .map(|j| if transposed { (j - 1, p[j] - 1) } else { (p[j] - 1, j - 1) })
        .collect();
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    (pairs, total)
}

/// A scored box, the unit of evaluation and suppression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: OrientedBoxBEV,
    pub score: f64,
}

fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    order
}

/// Greedy non-maximum suppression. Returns kept indices in descending score
/// order (input order breaks ties). A box is dropped when its IoU with an
/// already-kept box is `>= iou_thr`.
pub fn nms(dets: &[Detection], iou_thr: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for i in score_order(dets) {
        if kept.iter().all(|&k| bev_iou(&dets[k].bbox, &dets[i].bbox) < iou_thr) {
            kept.push(i);
        }
    }
    kept
}

/// Score and TP flag for each detection of one frame, in match order.
pub fn match_detections(dets: &[Detection], gt: &[OrientedBoxBEV], iou_thr: f64) -> Vec<(f64, bool)> {
    let mut taken = vec![false; gt.len()];
    score_order(dets)
        .into_iter()
        .map(|i| {
            let mut best: Option<(usize, f64)> = None;
            for (g, gbox) in gt.iter().enumerate() {
                if taken[g] {
                    continue;
                }
                let iou = bev_iou(&dets[i].bbox, gbox);
                if iou >= iou_thr && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((g, iou));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
            }
            (dets[i].score, best.is_some())
        })
        .collect()
}

/// All-point interpolated AP over pooled `(score, is_tp)` entries.
/// Entries with equal scores keep their given order.
pub fn ap_from_matches(mut entries: Vec<(f64, bool)>, n_gt: usize) -> f64 {
    if n_gt == 0 {
        return if entries.is_empty() { 1.0 } else { 0.0 };
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut tp = 0usize;
    let mut recall = Vec::with_capacity(entries.len());
    let mut precision = Vec::with_capacity(entries.len());
    for (i, (_, hit)) in entries.iter().enumerate() {
        if *hit {
            tp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (i + 1) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    ap.clamp(0.0, 1.0)
}

/// AP of one set of detections against one set of ground truth boxes.
pub fn average_precision(dets: &[Detection], gt: &[OrientedBoxBEV], iou_thr: f64) -> f64 {
    ap_from_matches(match_detections(dets, gt, iou_thr), gt.len())
}

/// Pools per-frame matches so AP is computed over a whole run.
#[derive(Debug, Clone)]
pub struct ApAccumulator {
    pub iou_thr: f64,
    entries: Vec<(f64, bool)>,
    n_gt: usize,
}

impl ApAccumulator {
    pub fn new(iou_thr: f64) -> Self {
        Self {
            iou_thr,
            entries: Vec::new(),
            n_gt: 0,
        }
    }

    pub fn add_frame(&mut self, dets: &[Detection], gt: &[OrientedBoxBEV]) {
        self.entries.extend(match_detections(dets, gt, self.iou_thr));
        self.n_gt += gt.len();
    }

    pub fn ap(&self) -> f64 {
        ap_from_matches(self.entries.clone(), self.n_gt)
    }
}

/// Gaussian localization error: `sigma_t` meters on x and y, `sigma_r` degrees on yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseSpec {
    pub sigma_t: f64,
    pub sigma_r: f64,
}

impl NoiseSpec {
    pub fn new(sigma_t: f64, sigma_r: f64) -> Self {
        Self { sigma_t, sigma_r }
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_t == 0.0 && self.sigma_r == 0.0
    }

    pub fn label(&self) -> String {
        format!("{:.1}/{:.1}", self.sigma_t, self.sigma_r)
    }

    /// The diagonal grid 0.0/0.0 .. 0.4/0.4.
    pub fn default_grid() -> Vec<NoiseSpec> {
        [0.0, 0.1, 0.2, 0.3, 0.4].iter().map(|&s| NoiseSpec::new(s, s)).collect()
    }
}

/// Perturb every pose except index 0 (the ego, which is the error-free reference).
pub fn inject_pose_noise(poses: &[Pose2D], spec: &NoiseSpec, seed: u64) -> Vec<Pose2D> {
    let mut rng = substream(seed, "pose_noise", &[]);
    let yaw_sigma = spec.sigma_r.to_radians();
    poses
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (nx, ny, nr): (f64, f64, f64) = (
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            );
            if i == 0 || spec.is_zero() {
                *p
            } else {
                Pose2D {
                    x: p.x + spec.sigma_t * nx,
                    y: p.y + spec.sigma_t * ny,
                    yaw: normalize_angle(p.yaw + yaw_sigma * nr),
                }
            }
        })
        .collect()
}
