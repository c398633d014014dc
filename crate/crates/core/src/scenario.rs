//! Synthetic multi-agent scenes and a single-agent detector emulator.
//!
//! The emulator stands in for a trained detector: each visible object yields
//! one [`Instance`] whose box is the truth plus Gaussian localization noise,
//! whose confidence loosely tracks that noise, and whose feature vector is a
//! fixed per-object embedding passed through a per-agent affine domain shift.
//! Random draws come from named sub-streams (`objects`, `visibility`,
//! `noise`, `fp`) so that, for example, raising the false-positive rate never
//! moves an object.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{footprints_disjoint, normalize_angle, OrientedBox3D, Pose2D};
use crate::rng::substream;

pub const DEFAULT_FEATURE_DIM: usize = 256;
pub const DEFAULT_QUERY_CAP: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    #[default]
    Vehicle,
}

/// A ground-truth object in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    #[serde(default)]
    pub frame: u32,
    #[serde(default)]
    pub class: ObjectClass,
    #[serde(flatten)]
    pub bbox: OrientedBox3D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityModel {
    pub base_prob: f64,
    /// Per-meter exponential decay of detection probability with range.
    pub range_decay: f64,
}

impl VisibilityModel {
    pub fn probability(&self, distance: f64) -> f64 {
        (self.base_prob * (-self.range_decay * distance).exp()).clamp(0.0, 1.0)
    }
}

/// `score = clamp(base - slope * |center error| + N(0, noise_sigma), 0.01, 0.99)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    pub base: f64,
    pub slope: f64,
    pub noise_sigma: f64,
}

/// Per-agent affine shift applied to every feature component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainShift {
    pub scale: f64,
    pub offset: f64,
}

impl Default for DomainShift {
    fn default() -> Self {
        Self {
            scale: 1.0,
            offset: 0.0,
        }
    }
}

/// One sensing agent: where it is and how its emulated detector behaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub agent_id: u32,
    pub pose: Pose2D,
    pub range_x: f64,
    pub range_y: f64,
    pub visibility: VisibilityModel,
    pub loc_noise_sigma: f64,
    pub yaw_noise_sigma: f64,
    pub score_model: ScoreModel,
    pub domain_shift: DomainShift,
    pub feature_noise_sigma: f64,
    /// Expected false positives per frame.
    pub false_positive_rate: f64,
    /// Confidence range for false positives, drawn uniformly.
    pub fp_score_range: [f64; 2],
}

impl AgentConfig {
    pub fn new(agent_id: u32, pose: Pose2D, profile: &AgentProfile) -> Self {
        Self {
            agent_id,
            pose,
            range_x: profile.range_x,
            range_y: profile.range_y,
            visibility: profile.visibility,
            loc_noise_sigma: profile.loc_noise_sigma,
            yaw_noise_sigma: profile.yaw_noise_sigma,
            score_model: profile.score_model,
            domain_shift: profile.domain_shift,
            feature_noise_sigma: profile.feature_noise_sigma,
            false_positive_rate: profile.false_positive_rate,
            fp_score_range: profile.fp_score_range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let id = self.agent_id;
        if !(self.range_x > 0.0 && self.range_y > 0.0) {
            return Err(Error::config(format!("agent {id}: ranges must be > 0")));
        }
        let v = &self.visibility;
        if !(0.0..=1.0).contains(&v.base_prob) || !(v.range_decay >= 0.0) {
            return Err(Error::config(format!("agent {id}: visibility model out of range")));
        }
        let sigmas = [
            self.loc_noise_sigma,
            self.yaw_noise_sigma,
            self.feature_noise_sigma,
            self.score_model.noise_sigma,
            self.false_positive_rate,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::config(format!("agent {id}: noise parameters must be finite and >= 0")));
        }
        let [lo, hi] = self.fp_score_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::config(format!("agent {id}: fp_score_range must lie in [0,1]")));
        }
        Ok(())
    }

    /// Whether a point in this agent's own frame lies within its range.
    pub fn in_range(&self, p: [f64; 2]) -> bool {
        p[0].abs() <= self.range_x && p[1].abs() <= self.range_y
    }

    pub fn is_noiseless(&self) -> bool {
        self.loc_noise_sigma == 0.0
            && self.yaw_noise_sigma == 0.0
            && self.feature_noise_sigma == 0.0
            && self.score_model.noise_sigma == 0.0
            && self.false_positive_rate == 0.0
    }
}

/// Detector behaviour shared by a group of agents (everything but id and pose).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub range_x: f64,
    pub range_y: f64,
    pub visibility: VisibilityModel,
    pub loc_noise_sigma: f64,
    pub yaw_noise_sigma: f64,
    pub score_model: ScoreModel,
    pub domain_shift: DomainShift,
    pub feature_noise_sigma: f64,
    pub false_positive_rate: f64,
    pub fp_score_range: [f64; 2],
}

impl Default for AgentProfile {
    fn default() -> Self {
        Self {
            range_x: 100.0,
            range_y: 40.0,
            visibility: VisibilityModel {
                base_prob: 0.95,
                range_decay: 0.0,
            },
            loc_noise_sigma: 0.2,
            yaw_noise_sigma: 0.02,
            score_model: ScoreModel {
                base: 0.9,
                slope: 0.5,
                noise_sigma: 0.05,
            },
            domain_shift: DomainShift::default(),
            feature_noise_sigma: 0.01,
            false_positive_rate: 0.5,
            fp_score_range: [0.01, 0.09],
        }
    }
}

impl AgentProfile {
    pub fn noiseless() -> Self {
        Self {
            visibility: VisibilityModel {
                base_prob: 1.0,
                range_decay: 0.0,
            },
            loc_noise_sigma: 0.0,
            yaw_noise_sigma: 0.0,
            score_model: ScoreModel {
                base: 0.9,
                slope: 0.5,
                noise_sigma: 0.0,
            },
            feature_noise_sigma: 0.0,
            false_positive_rate: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
}

impl Region {
    pub fn new(min_x: f64, max_x: f64, min_y: f64, max_y: f64) -> Self {
        Self {
            min_x,
            max_x,
            min_y,
            max_y,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.min_x..=self.max_x).contains(&p[0]) && (self.min_y..=self.max_y).contains(&p[1])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        [
            self.min_x + (self.max_x - self.min_x) * rng.random::<f64>(),
            self.min_y + (self.max_y - self.min_y) * rng.random::<f64>(),
        ]
    }
}

/// How many objects each frame holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ObjectCount {
    Fixed,
    /// Poisson-distributed with the requested count as mean.
    Poisson,
}

/// Placement rules for [`generate_scene`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    /// World-frame rectangle object centers are drawn from.
    pub region: Region,
    /// Agent poses by index; agents beyond this list go on a ring around the origin.
    pub agent_poses: Vec<Pose2D>,
    pub ring_radius: f64,
    pub ego_profile: AgentProfile,
    pub collaborator_profile: AgentProfile,
    /// Domain-shift increment per collaborator index (scale, offset).
    pub shift_step: DomainShift,
    pub length_range: [f64; 2],
    pub width_range: [f64; 2],
    pub height_range: [f64; 2],
    pub count: ObjectCount,
    pub attempts_per_object: usize,
}

impl Default for Layout {
    fn default() -> Self {
        Self {
            region: Region::new(-40.0, 40.0, -30.0, 30.0),
            agent_poses: vec![Pose2D::IDENTITY, Pose2D::new(20.0, 5.0, PI)],
            ring_radius: 30.0,
            ego_profile: AgentProfile::default(),
            collaborator_profile: AgentProfile::default(),
            shift_step: DomainShift {
                scale: 0.1,
                offset: 0.01,
            },
            length_range: [3.8, 4.8],
            width_range: [1.7, 2.1],
            height_range: [1.4, 1.8],
            count: ObjectCount::Fixed,
            attempts_per_object: 100,
        }
    }
}

impl Layout {
    /// A roadside-plus-vehicle setup whose collaborator transmits about
    /// 12 instances per frame after filtering.
    pub fn dair_like() -> Self {
        Self {
            count: ObjectCount::Poisson,
            ..Self::default()
        }
    }

    /// Denser traffic, about 18 transmitted instances per frame.
    pub fn v2xset_like() -> Self {
        Self {
            count: ObjectCount::Poisson,
            ..Self::default()
        }
    }

    /// Two agents seeing every object, with 0.3 m center noise and no false positives.
    pub fn duplicate_noise() -> Self {
        let profile = AgentProfile {
            visibility: VisibilityModel {
                base_prob: 1.0,
                range_decay: 0.0,
            },
            loc_noise_sigma: 0.3,
            yaw_noise_sigma: 0.0,
            false_positive_rate: 0.0,
            ..AgentProfile::default()
        };
        Self {
            ego_profile: profile.clone(),
            collaborator_profile: profile,
            ..Self::default()
        }
    }

    pub fn noiseless() -> Self {
        Self {
            ego_profile: AgentProfile::noiseless(),
            collaborator_profile: AgentProfile::noiseless(),
            ..Self::default()
        }
    }

    pub fn agent_pose(&self, index: usize, n_agents: usize) -> Pose2D {
        if let Some(p) = self.agent_poses.get(index) {
            return *p;
        }
        let angle = 2.0 * PI * index as f64 / n_agents.max(1) as f64;
        let (s, c) = angle.sin_cos();
        // Facing the origin.
        Pose2D::new(self.ring_radius * c, self.ring_radius * s, angle + PI)
    }

    pub fn build_agents(&self, n_agents: usize) -> Vec<AgentConfig> {
        (0..n_agents)
            .map(|k| {
                let pose = self.agent_pose(k, n_agents);
                if k == 0 {
                    AgentConfig::new(0, pose, &self.ego_profile)
                } else {
                    let mut profile = self.collaborator_profile.clone();
                    profile.domain_shift.scale += self.shift_step.scale * k as f64;
                    profile.domain_shift.offset += self.shift_step.offset * k as f64;
                    AgentConfig::new(k as u32, pose, &profile)
                }
            })
            .collect()
    }
}

/// Named preset layouts with the object count they are calibrated for.
pub fn preset(name: &str) -> Option<(Layout, usize)> {
    match name {
        "default" => Some((Layout::default(), 13)),
        "dair" => Some((Layout::dair_like(), 13)),
        "v2xset" => Some((Layout::v2xset_like(), 19)),
        "duplicate" => Some((Layout::duplicate_noise(), 10)),
        "noiseless" => Some((Layout::noiseless(), 10)),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 5] = ["default", "dair", "v2xset", "duplicate", "noiseless"];

fn place_objects(
    seed: u64,
    frame: u32,
    first_id: u32,
    n_objects: usize,
    layout: &Layout,
) -> Result<Vec<SceneObject>> {
    let mut rng = substream(seed, "objects", &[u64::from(frame)]);
    let count = match layout.count {
        ObjectCount::Fixed => n_objects,
        ObjectCount::Poisson if n_objects == 0 => 0,
        ObjectCount::Poisson => {
            let d = Poisson::new(n_objects as f64).map_err(|e| Error::config(e.to_string()))?;
            d.sample(&mut rng) as usize
        }
    };
    let uniform = |rng: &mut rand_chacha::ChaCha8Rng, [lo, hi]: [f64; 2]| lo + (hi - lo) * rng.random::<f64>();
    let mut objects: Vec<SceneObject> = Vec::with_capacity(count);
    for i in 0..count {
        let mut placed = false;
        for _ in 0..layout.attempts_per_object.max(1) {
            let [cx, cy] = layout.region.sample(&mut rng);
            let length = uniform(&mut rng, layout.length_range);
            let width = uniform(&mut rng, layout.width_range);
            let height = uniform(&mut rng, layout.height_range);
            let yaw = normalize_angle(PI * (2.0 * rng.random::<f64>() - 1.0));
            let bbox = OrientedBox3D::new(cx, cy, height / 2.0, length, width, height, yaw);
            if objects.iter().all(|o| footprints_disjoint(&o.bbox.bev, &bbox.bev)) {
                objects.push(SceneObject {
                    id: first_id + i as u32,
                    frame,
                    class: ObjectClass::Vehicle,
                    bbox,
                });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::PlacementExhausted {
                placed: objects.len(),
                requested: count,
            });
        }
    }
    Ok(objects)
}

/// One frame of objects plus the agent set. Agent 0 is the ego.
pub fn generate_scene(
    seed: u64,
    n_objects: usize,
    n_agents: usize,
    layout: &Layout,
) -> Result<(Vec<SceneObject>, Vec<AgentConfig>)> {
    if n_agents == 0 {
        return Err(Error::config("at least one agent is required"));
    }
    let objects = place_objects(seed, 0, 0, n_objects, layout)?;
    Ok((objects, layout.build_agents(n_agents)))
}

/// A multi-frame scene: static agents, independently placed objects per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub seed: u64,
    pub frame_count: u32,
    pub agents: Vec<AgentConfig>,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn generate(seed: u64, frame_count: u32, n_objects: usize, n_agents: usize, layout: &Layout) -> Result<Scene> {
        if n_agents == 0 {
            return Err(Error::config("at least one agent is required"));
        }
        let mut objects = Vec::new();
        for frame in 0..frame_count {
            let next_id = objects.len() as u32;
            objects.extend(place_objects(seed, frame, next_id, n_objects, layout)?);
        }
        Ok(Scene {
            seed,
            frame_count,
            agents: layout.build_agents(n_agents),
            objects,
        })
    }

    pub fn frame_objects(&self, frame: u32) -> Vec<SceneObject> {
        self.objects.iter().filter(|o| o.frame == frame).copied().collect()
    }

    pub fn ego(&self) -> &AgentConfig {
        &self.agents[0]
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::config("scene has no agents"));
        }
        let mut agent_ids = HashSet::new();
        for a in &self.agents {
            a.validate()?;
            if !agent_ids.insert(a.agent_id) {
                return Err(Error::config(format!("duplicate agent id {}", a.agent_id)));
            }
        }
        let mut seen = HashSet::new();
        for o in &self.objects {
            if o.frame >= self.frame_count {
                return Err(Error::config(format!("object {} references frame {} >= frame_count", o.id, o.frame)));
            }
            if !o.bbox.is_valid() {
                return Err(Error::config(format!("object {} has an invalid box", o.id)));
            }
            if !seen.insert((o.frame, o.id)) {
                return Err(Error::config(format!("duplicate object id {} in frame {}", o.id, o.frame)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Scene> {
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Scene> {
        Scene::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Which coordinate frame an instance's box is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameTag {
    Agent,
    Ego,
}

/// A detected object candidate: feature, box and confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub instance_id: u32,
    pub agent_id: u32,
    pub feature: Vec<f32>,
    pub bbox: OrientedBox3D,
    pub score: f64,
    pub frame: FrameTag,
    /// Ground-truth object this instance was emulated from (`None` for false positives).
    pub source: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmulatorConfig {
    pub feature_dim: usize,
    pub query_cap: usize,
    /// L2 norm of the per-object embedding before domain shift.
    pub feature_norm: f64,
}

impl Default for EmulatorConfig {
    fn default() -> Self {
        Self {
            feature_dim: DEFAULT_FEATURE_DIM,
            query_cap: DEFAULT_QUERY_CAP,
            feature_norm: 1.0,
        }
    }
}

/// Deterministic unit-norm pseudo-random vector keyed by object id.
pub fn embed(object_id: u32, dim: usize) -> Vec<f64> {
    let mut rng = substream(0x5eed_e3b0, "embed", &[u64::from(object_id)]);
    unit_vector(&mut rng, dim)
}

fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 || dim == 0 {
            return v.into_iter().map(|x| x / n.max(1e-300)).collect();
        }
    }
}

fn shifted_feature<R: Rng + ?Sized>(base: &[f64], norm: f64, cfg: &AgentConfig, rng: &mut R) -> Vec<f32> {
    let noise = cfg.feature_noise_sigma;
    base.iter()
        .map(|&e| {
            let mut v = e * norm * cfg.domain_shift.scale + cfg.domain_shift.offset;
            if noise > 0.0 {
                v += noise * rng.sample::<f64, _>(StandardNormal);
            }
            v as f32
        })
        .collect()
}

fn round_score(s: f64) -> f64 {
    f64::from(s as f32)
}

/// Emulated detector output for agent `cfg` on the given world-frame objects,
/// boxes in the agent's own frame, sorted by descending score and capped.
pub fn emulate_detections(
    objects: &[SceneObject],
    cfg: &AgentConfig,
    emu: &EmulatorConfig,
    seed: u64,
    frame: u32,
) -> Vec<Instance> {
    let idx = [u64::from(frame), u64::from(cfg.agent_id)];
    let mut vis_rng = substream(seed, "visibility", &idx);
    let mut noise_rng = substream(seed, "noise", &idx);
    let mut fp_rng = substream(seed, "fp", &idx);
    let to_agent = cfg.pose.inverse();

    let mut out = Vec::new();
    for obj in objects {
        let local = obj.bbox.transformed(&to_agent);
        let c = local.bev.center();
        // Draws happen for every object so streams stay aligned across configs.
        let u: f64 = vis_rng.random();
        let (dx, dy, dyaw, ds): (f64, f64, f64, f64) = (
            noise_rng.sample(StandardNormal),
            noise_rng.sample(StandardNormal),
            noise_rng.sample(StandardNormal),
            noise_rng.sample(StandardNormal),
        );
        if !cfg.in_range(c) {
            continue;
        }
        let p = cfg.visibility.probability(c[0].hypot(c[1]));
        if !(u < p) {
            continue;
        }
        let (ex, ey) = (cfg.loc_noise_sigma * dx, cfg.loc_noise_sigma * dy);
        let mut bbox = local;
        bbox.bev.cx += ex;
        bbox.bev.cy += ey;
        bbox.bev.yaw = normalize_angle(bbox.bev.yaw + cfg.yaw_noise_sigma * dyaw);
        let sm = &cfg.score_model;
        let score = (sm.base - sm.slope * ex.hypot(ey) + sm.noise_sigma * ds).clamp(0.01, 0.99);
        let feature = shifted_feature(&embed(obj.id, emu.feature_dim), emu.feature_norm, cfg, &mut noise_rng);
        out.push(Instance {
            instance_id: 0,
            agent_id: cfg.agent_id,
            feature,
            bbox,
            score: round_score(score),
            frame: FrameTag::Agent,
            source: Some(obj.id),
        });
    }

    if cfg.false_positive_rate > 0.0 {
        let n_fp = Poisson::new(cfg.false_positive_rate)
            .map(|d| d.sample(&mut fp_rng) as usize)
            .unwrap_or(0);
        let dims = Normal::<f64>::new(0.0, 1.0).expect("unit normal");
        for _ in 0..n_fp {
            let cx = cfg.range_x * (2.0 * fp_rng.random::<f64>() - 1.0);
            let cy = cfg.range_y * (2.0 * fp_rng.random::<f64>() - 1.0);
            let length = (4.3 + 0.3 * dims.sample(&mut fp_rng)).max(1.0);
            let width = (1.9 + 0.1 * dims.sample(&mut fp_rng)).max(0.5);
            let yaw = PI * (2.0 * fp_rng.random::<f64>() - 1.0);
            let [lo, hi] = cfg.fp_score_range;
            let score = lo + (hi - lo) * fp_rng.random::<f64>();
            let base = unit_vector(&mut fp_rng, emu.feature_dim);
            let feature = shifted_feature(&base, emu.feature_norm, cfg, &mut fp_rng);
            out.push(Instance {
                instance_id: 0,
                agent_id: cfg.agent_id,
                feature,
                bbox: OrientedBox3D::new(cx, cy, 0.8, length, width, 1.6, normalize_angle(yaw)),
                score: round_score(score),
                frame: FrameTag::Agent,
                source: None,
            });
        }
    }

    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out.truncate(emu.query_cap);
    for (i, inst) in out.iter_mut().enumerate() {
        inst.instance_id = i as u32;
    }
    out
}

/// A point cloud tagged with the frame its coordinates live in.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, xi: &Pose2D) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| xi.apply3(*p)).collect(),
        }
    }
}

/// Uniform points inside each object's box, in the agent frame, keeping only
/// points inside the agent's range. Point count per object is
/// `round(density * length * width)`.
pub fn synthesize_points(objects: &[SceneObject], cfg: &AgentConfig, density: f64, seed: u64, frame: u32) -> PointCloud {
    let mut cloud = PointCloud::default();
    if !(density > 0.0) {
        return cloud;
    }
    let mut rng = substream(seed, "points", &[u64::from(frame), u64::from(cfg.agent_id)]);
    let to_agent = cfg.pose.inverse();
    for obj in objects {
        let local = obj.bbox.transformed(&to_agent);
        let b = &local.bev;
        let n = (density * b.length * b.width).round() as usize;
        let (s, c) = b.yaw.sin_cos();
        for _ in 0..n {
            let u = (rng.random::<f64>() - 0.5) * b.length;
            let v = (rng.random::<f64>() - 0.5) * b.width;
            let w = (rng.random::<f64>() - 0.5) * local.height;
            let p = [b.cx + c * u - s * v, b.cy + s * u + c * v, local.cz + w];
            if cfg.in_range([p[0], p[1]]) {
                cloud.points.push(p);
            }
        }
    }
    cloud
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::bev_iou;

    fn noiseless_agent() -> AgentConfig {
        AgentConfig::new(1, Pose2D::new(5.0, -2.0, 0.4), &AgentProfile::noiseless())
    }

    #[test]
    fn empty_scene_still_places_agents() {
        let (objs, agents) = generate_scene(1, 0, 3, &Layout::default()).unwrap();
        assert!(objs.is_empty());
        assert_eq!(agents.len(), 3);
        assert_eq!(agents[0].agent_id, 0);
        assert_eq!(agents[0].pose, Pose2D::IDENTITY);
    }

    #[test]
    fn objects_never_overlap_and_are_deterministic() {
        for seed in 0..20 {
            let (a, _) = generate_scene(seed, 30, 2, &Layout::default()).unwrap();
            let (b, _) = generate_scene(seed, 30, 2, &Layout::default()).unwrap();
            assert_eq!(a, b);
            for i in 0..a.len() {
                for j in i + 1..a.len() {
                    assert_eq!(bev_iou(&a[i].bbox.bev, &a[j].bbox.bev), 0.0);
                }
            }
        }
    }

    #[test]
    fn crowded_layout_is_rejected() {
        let layout = Layout {
            region: Region::new(0.0, 5.0, 0.0, 5.0),
            ..Layout::default()
        };
        let err = generate_scene(3, 50, 1, &layout).unwrap_err();
        assert!(matches!(err, Error::PlacementExhausted { .. }));
        assert!(generate_scene(3, 1, 0, &layout).is_err());
    }

    #[test]
    fn noiseless_emulation_reproduces_truth() {
        let (objs, _) = generate_scene(4, 15, 1, &Layout::default()).unwrap();
        let cfg = noiseless_agent();
        let dets = emulate_detections(&objs, &cfg, &EmulatorConfig::default(), 9, 0);
        let to_agent = cfg.pose.inverse();
        let in_range: Vec<_> = objs
            .iter()
            .filter(|o| cfg.in_range(o.bbox.transformed(&to_agent).bev.center()))
            .collect();
        assert_eq!(dets.len(), in_range.len());
        for d in &dets {
            let obj = objs.iter().find(|o| Some(o.id) == d.source).unwrap();
            assert_eq!(d.bbox, obj.bbox.transformed(&to_agent));
        }
    }

    #[test]
    fn zero_detection_probability_gives_nothing() {
        let (objs, _) = generate_scene(4, 15, 1, &Layout::default()).unwrap();
        let mut cfg = noiseless_agent();
        cfg.visibility.base_prob = 0.0;
        assert!(emulate_detections(&objs, &cfg, &EmulatorConfig::default(), 9, 0).is_empty());
    }

    #[test]
    fn emulation_is_deterministic() {
        let (objs, agents) = generate_scene(2, 20, 2, &Layout::default()).unwrap();
        let emu = EmulatorConfig::default();
        assert_eq!(
            emulate_detections(&objs, &agents[1], &emu, 5, 3),
            emulate_detections(&objs, &agents[1], &emu, 5, 3)
        );
    }

    #[test]
    fn noiseless_features_are_shifted_embeddings() {
        let (objs, _) = generate_scene(4, 5, 1, &Layout::default()).unwrap();
        let mut cfg = noiseless_agent();
        cfg.domain_shift = DomainShift {
            scale: 1.3,
            offset: -0.02,
        };
        let emu = EmulatorConfig {
            feature_dim: 16,
            ..EmulatorConfig::default()
        };
        for d in emulate_detections(&objs, &cfg, &emu, 1, 0) {
            let e = embed(d.source.unwrap(), 16);
            for (f, x) in d.feature.iter().zip(e) {
                assert_eq!(*f, (x * 1.3 - 0.02) as f32);
            }
        }
        let norm: f64 = embed(7, 256).iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn query_cap_truncates_lowest_scores() {
        let (objs, _) = generate_scene(4, 30, 1, &Layout::default()).unwrap();
        let mut cfg = AgentConfig::new(0, Pose2D::IDENTITY, &AgentProfile::default());
        cfg.false_positive_rate = 5.0;
        let emu = EmulatorConfig {
            query_cap: 7,
            ..EmulatorConfig::default()
        };
        let full = emulate_detections(&objs, &cfg, &EmulatorConfig::default(), 1, 0);
        let capped = emulate_detections(&objs, &cfg, &emu, 1, 0);
        assert_eq!(capped.len(), 7);
        assert_eq!(capped[6].score, full[6].score);
        assert!(capped.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn fp_stream_does_not_move_objects() {
        let layout = Layout::default();
        let mut noisy = layout.clone();
        noisy.collaborator_profile.false_positive_rate = 9.0;
        let a = Scene::generate(11, 3, 12, 2, &layout).unwrap();
        let b = Scene::generate(11, 3, 12, 2, &noisy).unwrap();
        assert_eq!(a.objects, b.objects);
        let emu = EmulatorConfig::default();
        let da = emulate_detections(&a.frame_objects(1), &a.agents[1], &emu, 11, 1);
        let db = emulate_detections(&b.frame_objects(1), &b.agents[1], &emu, 11, 1);
        let truth_a: Vec<_> = da.iter().filter(|d| d.source.is_some()).map(|d| (d.source, d.bbox)).collect();
        let mut truth_b: Vec<_> = db.iter().filter(|d| d.source.is_some()).map(|d| (d.source, d.bbox)).collect();
        let mut truth_a = truth_a;
        truth_a.sort_by_key(|t| t.0);
        truth_b.sort_by_key(|t| t.0);
        assert_eq!(truth_a, truth_b);
    }

    #[test]
    fn point_synthesis_cases() {
        let (objs, _) = generate_scene(6, 10, 1, &Layout::default()).unwrap();
        let cfg = noiseless_agent();
        assert!(synthesize_points(&objs, &cfg, 0.0, 1, 0).is_empty());
        let cloud = synthesize_points(&objs, &cfg, 5.0, 1, 0);
        assert!(!cloud.is_empty());
        let to_agent = cfg.pose.inverse();
        let local: Vec<_> = objs.iter().map(|o| o.bbox.transformed(&to_agent)).collect();
        for p in &cloud.points {
            assert_eq!(local.iter().filter(|b| b.contains(*p, 1e-9)).count(), 1);
            assert!(cfg.in_range([p[0], p[1]]));
        }
        let far = SceneObject {
            id: 99,
            frame: 0,
            class: ObjectClass::Vehicle,
            bbox: OrientedBox3D::new(5000.0, 0.0, 0.8, 4.0, 2.0, 1.6, 0.0),
        };
        assert!(synthesize_points(&[far], &cfg, 10.0, 1, 0).is_empty());
    }

    #[test]
    fn scene_json_round_trip() {
        let scene = Scene::generate(7, 2, 5, 2, &Layout::default()).unwrap();
        let text = scene.to_json().unwrap();
        let back = Scene::from_json(&text).unwrap();
        assert_eq!(back, scene);
        assert_eq!(back.to_json().unwrap(), text);
    }
}
