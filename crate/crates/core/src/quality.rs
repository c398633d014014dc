//! IoU-aware classification loss and the filtering step applied to a
//! collaborator's instances before they are transmitted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::scenario::{FrameTag, Instance};

/// Edge of a position-map cell in meters.
pub const GRID_RESOLUTION: f64 = 0.1;

/// Probabilities are clamped into `[PROB_EPS, 1 - PROB_EPS]` before any log.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MalParams {
    pub gamma: f64,
    /// When false, out-of-domain probabilities are rejected instead of clamped.
    pub clamp: bool,
}

impl Default for MalParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            clamp: true,
        }
    }
}

impl MalParams {
    pub fn with_gamma(gamma: f64) -> Self {
        Self {
            gamma,
            ..Self::default()
        }
    }

    fn prepare(&self, p: f64, q: f64) -> Result<(f64, f64)> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain(q));
        }
        let lo = PROB_EPS;
        let hi = 1.0 - PROB_EPS;
        if self.clamp {
            if p.is_nan() {
                return Err(Error::Domain(p));
            }
            Ok((p.clamp(lo, hi), q))
        } else if (lo..=hi).contains(&p) {
            Ok((p, q))
        } else {
            Err(Error::Domain(p))
        }
    }
}

/// Matching-aware loss for one prediction with foreground probability `p`
/// and box IoU `q` against its target.
///
/// For `q > 0` this is the soft-target cross-entropy with target `q^gamma`;
/// for `q = 0` it is the focal-style negative term `-p^gamma ln(1 - p)`.
pub fn mal_loss(p: f64, q: f64, params: &MalParams) -> Result<f64> {
    let (p, q) = params.prepare(p, q)?;
    let g = params.gamma;
    let loss = if q > 0.0 {
        let t = q.powf(g);
        -(t * p.ln() + (1.0 - t) * (-p).ln_1p())
    } else {
        -p.powf(g) * (-p).ln_1p()
    };
    Ok(loss.max(0.0))
}

/// Derivative of [`mal_loss`] with respect to `p` (at the clamped `p`).
pub fn mal_grad(p: f64, q: f64, params: &MalParams) -> Result<f64> {
    let (p, q) = params.prepare(p, q)?;
    let g = params.gamma;
    Ok(if q > 0.0 {
        (p - q.powf(g)) / (p * (1.0 - p))
    } else {
        let pg = p.powf(g);
        let dpg = if g == 0.0 { 0.0 } else { g * p.powf(g - 1.0) };
        -dpg * (-p).ln_1p() + pg / (1.0 - p)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub score_threshold: f64,
    pub ego_range_x: f64,
    pub ego_range_y: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            score_threshold: 0.1,
            ego_range_x: 100.0,
            ego_range_y: 40.0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(Error::config("score_threshold must lie in [0,1]"));
        }
        if !(self.ego_range_x > 0.0 && self.ego_range_y > 0.0) {
            return Err(Error::config("ego ranges must be > 0"));
        }
        Ok(())
    }
}

/// Index of the position-map cell containing `v` meters.
pub fn grid_index(v: f64) -> i32 {
    (v / GRID_RESOLUTION).floor() as i32
}

/// One entry of the sparse position map shipped with a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridEntry {
    pub instance_id: u32,
    pub grid_x: i32,
    pub grid_y: i32,
}

impl GridEntry {
    pub fn for_instance(inst: &Instance) -> Self {
        Self {
            instance_id: inst.instance_id,
            grid_x: grid_index(inst.bbox.bev.cx),
            grid_y: grid_index(inst.bbox.bev.cy),
        }
    }

    pub fn cell(&self) -> (i32, i32) {
        (self.grid_x, self.grid_y)
    }
}

/// Keep instances scoring at least the threshold whose transformed centers
/// fall inside the ego range; boxes come back in the ego frame, sorted by
/// descending score (stable), together with their position-map entries.
pub fn qaf_filter(instances: &[Instance], xi_to_ego: &Pose2D, cfg: &FilterConfig) -> (Vec<Instance>, Vec<GridEntry>) {
    let mut kept: Vec<Instance> = instances
        .iter()
        .filter(|inst| inst.score >= cfg.score_threshold)
        .filter_map(|inst| {
            let bbox = inst.bbox.transformed(xi_to_ego);
            let [x, y] = bbox.bev.center();
            (x.abs() <= cfg.ego_range_x && y.abs() <= cfg.ego_range_y).then(|| Instance {
                bbox,
                frame: FrameTag::Ego,
                ..inst.clone()
            })
        })
        .collect();
    kept.sort_by(|a, b| b.score.total_cmp(&a.score));
    let map = kept.iter().map(GridEntry::for_instance).collect();
    (kept, map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OrientedBox3D;

    fn inst(id: u32, cx: f64, cy: f64, score: f64) -> Instance {
        Instance {
            instance_id: id,
            agent_id: 1,
            feature: vec![0.0; 4],
            bbox: OrientedBox3D::new(cx, cy, 0.8, 4.0, 2.0, 1.6, 0.0),
            score,
            frame: FrameTag::Agent,
            source: None,
        }
    }

    #[test]
    fn mal_reference_values() {
        let m = MalParams::default();
        let v = mal_loss(0.5, 0.0, &m).unwrap();
        assert!((v - 0.5 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((v - 0.34657).abs() < 1e-5);
        let v = mal_loss(0.6, 0.8, &m).unwrap();
        let expect = -(0.8 * 0.6f64.ln() + 0.2 * 0.4f64.ln());
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 0.59192).abs() < 1e-5);
        assert!(mal_loss(1.0 - 1e-7, 1.0, &m).unwrap() < 1e-6);
    }

    #[test]
    fn mal_grad_reference_values() {
        let m = MalParams::default();
        assert!((mal_grad(0.5, 1.0, &m).unwrap() + 2.0).abs() < 1e-12);
        for (q, g) in [(0.8, 1.0), (0.5, 2.0), (0.9, 0.5)] {
            let p = f64::powf(q, g);
            assert!(mal_grad(p, q, &MalParams::with_gamma(g)).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn mal_domain_errors() {
        let strict = MalParams {
            clamp: false,
            ..MalParams::default()
        };
        assert!(matches!(mal_loss(1.0, 0.5, &strict), Err(Error::Domain(_))));
        assert!(matches!(mal_loss(0.0, 0.5, &strict), Err(Error::Domain(_))));
        assert!(mal_loss(1.0, 0.5, &MalParams::default()).is_ok());
        assert!(mal_loss(0.5, 1.5, &MalParams::default()).is_err());
        assert!(mal_loss(0.5, 0.5, &MalParams::with_gamma(-1.0)).is_err());
    }

    #[test]
    fn filter_drops_low_scores_and_out_of_range() {
        let cfg = FilterConfig::default();
        let (kept, _) = qaf_filter(&[inst(0, 1.0, 1.0, 0.05)], &Pose2D::IDENTITY, &cfg);
        assert!(kept.is_empty());
        let (kept, _) = qaf_filter(&[inst(0, 150.0, 0.0, 0.3)], &Pose2D::IDENTITY, &cfg);
        assert!(kept.is_empty());
        // Out of range only after the transform.
        let (kept, _) = qaf_filter(&[inst(0, 60.0, 0.0, 0.3)], &Pose2D::new(90.0, 0.0, 0.0), &cfg);
        assert!(kept.is_empty());
    }

    #[test]
    fn filter_grid_entry() {
        let (kept, map) = qaf_filter(&[inst(4, 3.27, -1.04, 0.3)], &Pose2D::IDENTITY, &FilterConfig::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].frame, FrameTag::Ego);
        assert_eq!(map, vec![GridEntry { instance_id: 4, grid_x: 32, grid_y: -11 }]);
    }

    #[test]
    fn filter_orders_by_score_stably() {
        let items = vec![inst(0, 0.0, 0.0, 0.3), inst(1, 5.0, 0.0, 0.9), inst(2, 9.0, 0.0, 0.3)];
        let (kept, _) = qaf_filter(&items, &Pose2D::IDENTITY, &FilterConfig::default());
        let ids: Vec<_> = kept.iter().map(|i| i.instance_id).collect();
        assert_eq!(ids, vec![1, 0, 2]);
    }

    #[test]
    fn filter_config_validation() {
        let bad = FilterConfig {
            score_threshold: 1.5,
            ..FilterConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(FilterConfig::default().validate().is_ok());
    }
}
