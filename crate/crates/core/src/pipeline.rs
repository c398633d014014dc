//! End-to-end frame processing for the three collaboration strategies.
//!
//! * `none`: the ego's own detections.
//! * `late`: every agent's confident boxes, moved into the ego frame and merged with NMS.
//! * `instance`: collaborators filter their instances, send them over the wire
//!   format, and the ego routes the combined table into single and coop
//!   branches, fuses the coop branch and suppresses the remaining duplicates.
//!
//! Frames are independent and may run on a thread pool; results are collected
//! in frame order so reports do not depend on the number of workers.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cogt::{build_db, sample_nonoverlapping};
use crate::error::{Error, Result};
use crate::eval::{inject_pose_noise, nms, ApAccumulator, Detection, NoiseSpec};
use crate::fusion::{calif, AttentionConfig, EncodedInstance};
use crate::geometry::{OrientedBox3D, OrientedBoxBEV, Pose2D};
use crate::quality::{grid_index, qaf_filter, FilterConfig};
use crate::rng::derive_seed;
use crate::routing::{route_indices, RoutingConfig};
use crate::scenario::{emulate_detections, synthesize_points, AgentConfig, PointCloud, EmulatorConfig, FrameTag, Instance, Region, Scene, SceneObject};
use crate::wire::{decode, encode, late_fusion_bytes, Accounting, AgentMessage, BandwidthReport, InstanceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    None,
    Late,
    Instance,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::None, Strategy::Late, Strategy::Instance];

    pub fn display_name(&self) -> &'static str {
        match self {
            Strategy::None => "No Fusion",
            Strategy::Late => "Late Fusion",
            Strategy::Instance => "Instance",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::None => "none",
            Strategy::Late => "late",
            Strategy::Instance => "instance",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Strategy::None),
            "late" => Ok(Strategy::Late),
            "instance" => Ok(Strategy::Instance),
            other => Err(Error::config(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CogtConfig {
    pub samples_per_frame: usize,
    /// Points per square meter of box footprint used to synthesize clouds.
    pub point_density: f64,
}

impl Default for CogtConfig {
    fn default() -> Self {
        Self {
            samples_per_frame: 5,
            point_density: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub emulator: EmulatorConfig,
    /// Score threshold for both transmission filtering and late-fusion boxes.
    /// Ego ranges are taken from the scene's ego agent.
    pub filter: FilterConfig,
    pub routing: RoutingConfig,
    pub attention: AttentionConfig,
    pub nms_threshold: f64,
    pub noise: NoiseSpec,
    /// Collaborators further than this from the ego (true poses) do not send.
    pub collab_trigger_dist: f64,
    pub cogt: Option<CogtConfig>,
    pub accounting: Accounting,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            emulator: EmulatorConfig::default(),
            filter: FilterConfig::default(),
            routing: RoutingConfig::default(),
            attention: AttentionConfig::default(),
            nms_threshold: 0.15,
            noise: NoiseSpec::default(),
            collab_trigger_dist: f64::INFINITY,
            cogt: None,
            accounting: Accounting::FeatureOnly,
            seed: 0,
            jobs: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.routing.validate()?;
        self.attention.validate()?;
        if self.attention.d != self.emulator.feature_dim {
            return Err(Error::config(format!(
                "attention d = {} but emulated features have {} dims",
                self.attention.d, self.emulator.feature_dim
            )));
        }
        if !(0.0..=1.0).contains(&self.nms_threshold) {
            return Err(Error::config("nms threshold must lie in [0,1]"));
        }
        if !(self.noise.sigma_t >= 0.0 && self.noise.sigma_r >= 0.0) {
            return Err(Error::config("noise sigmas must be >= 0"));
        }
        if !(self.collab_trigger_dist >= 0.0) {
            return Err(Error::config("collab_trigger_dist must be >= 0"));
        }
        if self.jobs == 0 {
            return Err(Error::config("jobs must be >= 1"));
        }
        Ok(())
    }
}

/// What one frame produced.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub frame: u32,
    pub detections: Vec<Detection>,
    pub ground_truth: Vec<OrientedBoxBEV>,
    /// Bytes the ego received this frame under the configured accounting.
    pub bytes: u64,
    /// Messages received by the ego (instance strategy only).
    pub messages: Vec<AgentMessage>,
}

/// Aggregate result of one strategy on one scene at one noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub strategy: Strategy,
    pub noise: NoiseSpec,
    pub frames: u32,
    pub ap50: f64,
    pub ap70: f64,
    pub bandwidth: BandwidthReport,
}

fn in_ego_range(filter: &FilterConfig, c: [f64; 2]) -> bool {
    c[0].abs() <= filter.ego_range_x && c[1].abs() <= filter.ego_range_y
}

fn ego_filter(cfg: &PipelineConfig, ego: &AgentConfig) -> FilterConfig {
    FilterConfig {
        ego_range_x: ego.range_x,
        ego_range_y: ego.range_y,
        ..cfg.filter
    }
}

/// Add co-sampled objects to a frame. Samples are placed in the ego frame and
/// synchronized across agents; the returned objects are in the world frame.
fn augment_frame(scene: &Scene, objects: &[SceneObject], frame: u32, cogt: &CogtConfig, seed: u64) -> Vec<SceneObject> {
    let ego = scene.ego();
    let views: Vec<(PointCloud, Vec<OrientedBox3D>)> = scene
        .agents
        .iter()
        .map(|a| {
            let to_agent = a.pose.inverse();
            let labels = objects
                .iter()
                .map(|o| o.bbox.transformed(&to_agent))
                .filter(|b| a.in_range(b.bev.center()))
                .collect();
            (synthesize_points(objects, a, cogt.point_density, seed, frame), labels)
        })
        .collect();
    let db = build_db(&views);
    let to_ego = ego.pose.inverse();
    let existing: Vec<OrientedBox3D> = objects.iter().map(|o| o.bbox.transformed(&to_ego)).collect();
    let region = Region::new(-ego.range_x, ego.range_x, -ego.range_y, ego.range_y);
    let sampling = sample_nonoverlapping(&db, &existing, cogt.samples_per_frame, &region, derive_seed(seed, "cogt", &[u64::from(frame)]));
    // Inserting into the shared world is equivalent to per-agent
    // synchronization: each emulated agent sees exactly the samples in its range.
    let next_id = scene.objects.iter().map(|o| o.id + 1).max().unwrap_or(0);
    let mut out = objects.to_vec();
    for (i, s) in sampling.placed.iter().enumerate() {
        out.push(SceneObject {
            id: next_id + i as u32,
            frame,
            class: Default::default(),
            bbox: s.bbox.transformed(&ego.pose),
        });
    }
    out
}

fn to_detections(instances: &[Instance]) -> Vec<Detection> {
    instances
        .iter()
        .map(|i| Detection {
            bbox: i.bbox.bev,
            score: i.score,
        })
        .collect()
}

/// Run one frame of `strategy` on `scene`.
pub fn run_frame(scene: &Scene, strategy: Strategy, cfg: &PipelineConfig, frame: u32) -> Result<FrameOutcome> {
    let ego = scene.ego();
    let filter = ego_filter(cfg, ego);
    let mut objects = scene.frame_objects(frame);
    if let Some(cogt) = &cfg.cogt {
        objects = augment_frame(scene, &objects, frame, cogt, cfg.seed);
    }

    let to_ego = ego.pose.inverse();
    let ground_truth: Vec<OrientedBoxBEV> = objects
        .iter()
        .map(|o| o.bbox.transformed(&to_ego).bev)
        .filter(|b| in_ego_range(&filter, b.center()))
        .collect();

    let true_poses: Vec<Pose2D> = scene.agents.iter().map(|a| a.pose).collect();
    let noisy_poses = inject_pose_noise(&true_poses, &cfg.noise, derive_seed(cfg.seed, "pose_noise", &[u64::from(frame)]));
    let collaborators: Vec<(usize, &AgentConfig)> = scene
        .agents
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, a)| (a.pose.x - ego.pose.x).hypot(a.pose.y - ego.pose.y) < cfg.collab_trigger_dist)
        .collect();

    let ego_instances: Vec<Instance> = emulate_detections(&objects, ego, &cfg.emulator, cfg.seed, frame)
        .into_iter()
        .map(|i| Instance {
            frame: FrameTag::Ego,
            ..i
        })
        .collect();

    let mut messages = Vec::new();
    let mut bytes = 0u64;
    let detections = match strategy {
        Strategy::None => to_detections(&ego_instances),
        Strategy::Late => {
            let mut dets = to_detections(&ego_instances);
            for &(idx, agent) in &collaborators {
                let xi = Pose2D::relative(&ego.pose, &noisy_poses[idx]);
                let sent: Vec<Detection> = emulate_detections(&objects, agent, &cfg.emulator, cfg.seed, frame)
                    .iter()
                    .filter(|i| i.score >= filter.score_threshold)
                    .map(|i| Detection {
                        bbox: i.bbox.transformed(&xi).bev,
                        score: i.score,
                    })
                    .filter(|d| in_ego_range(&filter, d.bbox.center()))
                    .collect();
                bytes += late_fusion_bytes(sent.len());
                dets.extend(sent);
            }
            let keep = nms(&dets, cfg.nms_threshold);
            keep.into_iter().map(|k| dets[k]).collect()
        }
        Strategy::Instance => {
            let mut table: Vec<EncodedInstance> = ego_instances
                .iter()
                .map(|i| EncodedInstance {
                    grid: (grid_index(i.bbox.bev.cx), grid_index(i.bbox.bev.cy)),
                    instance: i.clone(),
                    agent_rank: 0,
                })
                .collect();
            for (rank, &(idx, agent)) in collaborators.iter().enumerate() {
                let xi = Pose2D::relative(&ego.pose, &noisy_poses[idx]);
                let local = emulate_detections(&objects, agent, &cfg.emulator, cfg.seed, frame);
                let (kept, map) = qaf_filter(&local, &xi, &filter);
                let records = kept
                    .iter()
                    .zip(&map)
                    .map(|(inst, g)| InstanceRecord {
                        feature: inst.feature.clone(),
                        grid_x: g.grid_x,
                        grid_y: g.grid_y,
                        score: inst.score as f32,
                    })
                    .collect();
                let msg = AgentMessage::new(agent.agent_id, frame, cfg.emulator.feature_dim, records)?;
                let received = decode(&encode(&msg))?;
                bytes += cfg.accounting.bytes(&received);
                // Boxes are read out per record from the sender's decoded instances.
                for (rec, inst) in received.records.iter().zip(&kept) {
                    table.push(EncodedInstance {
                        instance: Instance {
                            feature: rec.feature.clone(),
                            score: f64::from(rec.score),
                            ..inst.clone()
                        },
                        grid: (rec.grid_x, rec.grid_y),
                        agent_rank: rank as u32 + 1,
                    });
                }
                messages.push(received);
            }
            let plain: Vec<Instance> = table.iter().map(|e| e.instance.clone()).collect();
            let routed = route_indices(&plain, &cfg.routing);
            let coop: Vec<EncodedInstance> = routed.coop.iter().map(|&k| table[k].clone()).collect();
            let single: Vec<Instance> = routed.single.iter().map(|&k| plain[k].clone()).collect();
            let fused = calif(&coop, &routed.partners, single, &cfg.attention)?;
            let dets = to_detections(&fused.instances);
            let keep = nms(&dets, cfg.nms_threshold);
            keep.into_iter().map(|k| dets[k]).collect()
        }
    };
    let detections = detections
        .into_iter()
        .filter(|d| in_ego_range(&filter, d.bbox.center()))
        .collect();
    Ok(FrameOutcome {
        frame,
        detections,
        ground_truth,
        bytes,
        messages,
    })
}

/// Run every frame of `scene`, in parallel when `cfg.jobs > 1`.
pub fn run_frames(scene: &Scene, strategy: Strategy, cfg: &PipelineConfig) -> Result<Vec<FrameOutcome>> {
    cfg.validate()?;
    scene.validate()?;
    let frames: Vec<u32> = (0..scene.frame_count).collect();
    if cfg.jobs <= 1 {
        return frames.iter().map(|&f| run_frame(scene, strategy, cfg, f)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::config(e.to_string()))?;
    pool.install(|| frames.par_iter().map(|&f| run_frame(scene, strategy, cfg, f)).collect())
}

pub fn summarize(strategy: Strategy, noise: NoiseSpec, outcomes: &[FrameOutcome]) -> Result<EvalReport> {
    let mut ap50 = ApAccumulator::new(0.5);
    let mut ap70 = ApAccumulator::new(0.7);
    for o in outcomes {
        ap50.add_frame(&o.detections, &o.ground_truth);
        ap70.add_frame(&o.detections, &o.ground_truth);
    }
    Ok(EvalReport {
        strategy,
        noise,
        frames: outcomes.len() as u32,
        ap50: ap50.ap(),
        ap70: ap70.ap(),
        bandwidth: BandwidthReport::from_frame_bytes(outcomes.iter().map(|o| o.bytes).collect())?,
    })
}

/// Run `strategy` over all frames of `scene` and score it.
pub fn run_pipeline(scene: &Scene, strategy: Strategy, cfg: &PipelineConfig) -> Result<EvalReport> {
    let outcomes = run_frames(scene, strategy, cfg)?;
    summarize(strategy, cfg.noise, &outcomes)
}

/// One report per noise level, all other settings fixed.
pub fn sweep_noise(scene: &Scene, strategy: Strategy, cfg: &PipelineConfig, levels: &[NoiseSpec]) -> Result<Vec<EvalReport>> {
    levels
        .iter()
        .map(|level| {
            let cfg = PipelineConfig {
                noise: *level,
                ..cfg.clone()
            };
            run_pipeline(scene, strategy, &cfg)
        })
        .collect()
}
