//! Cooperative ground-truth sampling.
//!
//! Objects are cropped out of every agent's labelled point cloud into a shared
//! database, re-centred in a canonical object frame. New objects are drawn
//! from that database and placed in the ego frame so that they overlap neither
//! each other nor any existing label. Each agent's cloud and labels are then
//! lifted into the ego frame, the placed samples it can see are merged in, and
//! the result is mapped back to the agent's own frame. Every agent therefore
//! sees the same inserted objects at consistent positions.

use rand::Rng;

use crate::geometry::{footprints_disjoint, normalize_angle, OrientedBox3D, Pose2D};
use crate::rng::substream;
use crate::scenario::{PointCloud, Region};

/// Tolerance used when cropping points against label boundaries.
pub const CROP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DbEntry {
    /// Points in the object frame (centre at origin, heading along +x).
    pub points: PointCloud,
    /// Canonical label: centred at the origin with yaw 0.
    pub label: OrientedBox3D,
    /// Height of the box centre above the source frame's ground.
    pub ground_z: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectDb {
    pub entries: Vec<DbEntry>,
}

impl ObjectDb {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Pose of a box in its parent frame, as a rigid transform object -> parent.
pub fn box_pose(b: &OrientedBox3D) -> Pose2D {
    Pose2D::new(b.bev.cx, b.bev.cy, b.bev.yaw)
}

/// Crop each label's interior points from each labelled cloud and store them
/// in the object frame. Entries from all inputs are pooled.
pub fn build_db(scenes: &[(PointCloud, Vec<OrientedBox3D>)]) -> ObjectDb {
    let mut db = ObjectDb::default();
    for (cloud, labels) in scenes {
        for label in labels {
            let to_local = box_pose(label).inverse();
            let points = cloud
                .points
                .iter()
                .filter(|p| label.contains(**p, CROP_TOL))
                .map(|p| {
                    let [x, y, z] = to_local.apply3(*p);
                    [x, y, z - label.cz]
                })
                .collect();
            db.entries.push(DbEntry {
                points: PointCloud { points },
                label: OrientedBox3D::new(0.0, 0.0, 0.0, label.bev.length, label.bev.width, label.height, 0.0),
                ground_z: label.cz,
            });
        }
    }
    db
}

/// Points of a database entry placed at `pose` (object -> target frame), with centre height `cz`.
pub fn place_points(entry: &DbEntry, pose: &Pose2D, cz: f64) -> PointCloud {
    PointCloud {
        points: entry
            .points
            .points
            .iter()
            .map(|p| {
                let [x, y, z] = pose.apply3(*p);
                [x, y, z + cz]
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedSample {
    pub entry: usize,
    /// Box in the ego frame.
    pub bbox: OrientedBox3D,
    /// Points in the ego frame.
    pub points: PointCloud,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sampling {
    pub placed: Vec<PlacedSample>,
    pub requested: usize,
    pub attempts: usize,
}

impl Sampling {
    pub fn shortfall(&self) -> usize {
        self.requested - self.placed.len()
    }
}

/// Rejection attempts allowed per requested sample.
pub const ATTEMPTS_PER_SAMPLE: usize = 100;

/// Draw up to `n` database objects at uniform positions and headings inside
/// `region` (ego frame), rejecting any that share area with an existing box
/// or an earlier placement. Stops after `100 * n` attempts.
pub fn sample_nonoverlapping(db: &ObjectDb, existing_gt: &[OrientedBox3D], n: usize, region: &Region, seed: u64) -> Sampling {
    let mut out = Sampling {
        placed: Vec::new(),
        requested: n,
        attempts: 0,
    };
    if n == 0 || db.is_empty() {
        return out;
    }
    let mut rng = substream(seed, "cogt", &[]);
    let budget = ATTEMPTS_PER_SAMPLE * n;
    while out.placed.len() < n && out.attempts < budget {
        out.attempts += 1;
        let entry = rng.random_range(0..db.len());
        let [cx, cy] = region.sample(&mut rng);
        let yaw = normalize_angle(std::f64::consts::PI * (2.0 * rng.random::<f64>() - 1.0));
        let e = &db.entries[entry];
        let bbox = OrientedBox3D::new(cx, cy, e.ground_z, e.label.bev.length, e.label.bev.width, e.label.height, yaw);
        let clear = existing_gt
            .iter()
            .chain(out.placed.iter().map(|p| &p.bbox))
            .all(|b| footprints_disjoint(&b.bev, &bbox.bev));
        if clear {
            let points = place_points(e, &box_pose(&bbox), bbox.cz);
            out.placed.push(PlacedSample { entry, bbox, points });
        }
    }
    out
}

/// One agent's input to synchronization.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentView {
    pub cloud: PointCloud,
    pub labels: Vec<OrientedBox3D>,
    /// Agent frame -> ego frame.
    pub to_ego: Pose2D,
    pub range_x: f64,
    pub range_y: f64,
}

impl AgentView {
    fn sees(&self, ego_point: [f64; 2]) -> bool {
        let [x, y] = self.to_ego.inverse().apply(ego_point);
        x.abs() <= self.range_x && y.abs() <= self.range_y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedAgent {
    /// Augmented cloud in the agent's own frame.
    pub cloud: PointCloud,
    /// Original labels followed by inserted ones, agent frame.
    pub labels: Vec<OrientedBox3D>,
    /// Indices into the placed samples that were inserted for this agent.
    pub inserted: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugResult {
    pub agents: Vec<AugmentedAgent>,
}

/// Lift each agent to the ego frame, merge the placed samples whose centre
/// lies inside that agent's range, and map everything back.
pub fn synchronize(placed: &[PlacedSample], agents: &[AgentView]) -> AugResult {
    let agents = agents
        .iter()
        .map(|view| {
            let to_agent = view.to_ego.inverse();
            let mut ego_cloud = view.cloud.transformed(&view.to_ego);
            let mut ego_labels: Vec<OrientedBox3D> = view.labels.iter().map(|l| l.transformed(&view.to_ego)).collect();
            let mut inserted = Vec::new();
            for (i, s) in placed.iter().enumerate() {
                if view.sees(s.bbox.bev.center()) {
                    ego_cloud.points.extend_from_slice(&s.points.points);
                    ego_labels.push(s.bbox);
                    inserted.push(i);
                }
            }
            AugmentedAgent {
                cloud: ego_cloud.transformed(&to_agent),
                labels: ego_labels.iter().map(|l| l.transformed(&to_agent)).collect(),
                inserted,
            }
        })
        .collect();
    AugResult { agents }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::bev_iou;

    fn cloud_in(b: &OrientedBox3D, n: usize) -> PointCloud {
        let pose = box_pose(b);
        let points = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64 - 0.5;
                let [x, y] = pose.apply([t * b.bev.length * 0.9, t * b.bev.width * 0.5]);
                [x, y, b.cz + t * b.height * 0.8]
            })
            .collect();
        PointCloud { points }
    }

    #[test]
    fn empty_scene_gives_empty_db() {
        assert!(build_db(&[]).is_empty());
        assert!(build_db(&[(PointCloud::default(), vec![])]).is_empty());
    }

    #[test]
    fn crop_recentres_and_round_trips() {
        let label = OrientedBox3D::new(12.0, -3.0, 0.9, 4.2, 1.9, 1.6, 0.8);
        let cloud = cloud_in(&label, 50);
        let db = build_db(&[(cloud.clone(), vec![label])]);
        assert_eq!(db.len(), 1);
        let e = &db.entries[0];
        assert_eq!(e.points.len(), 50);
        assert!(e.points.points.iter().all(|p| e.label.contains(*p, CROP_TOL)));
        let restored = place_points(e, &box_pose(&label), e.ground_z);
        for (a, b) in restored.points.iter().zip(&cloud.points) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn label_without_points_is_kept_empty() {
        let label = OrientedBox3D::new(0.0, 0.0, 0.8, 4.0, 2.0, 1.6, 0.0);
        let db = build_db(&[(PointCloud::default(), vec![label])]);
        assert_eq!(db.len(), 1);
        assert!(db.entries[0].points.is_empty());
    }

    fn small_db() -> ObjectDb {
        let label = OrientedBox3D::new(0.0, 0.0, 0.8, 4.0, 2.0, 1.6, 0.0);
        build_db(&[(cloud_in(&label, 20), vec![label])])
    }

    #[test]
    fn sampling_respects_overlap_rules() {
        let db = small_db();
        assert!(sample_nonoverlapping(&db, &[], 0, &Region::new(-20.0, 20.0, -20.0, 20.0), 1).placed.is_empty());
        let gt = vec![OrientedBox3D::new(0.0, 0.0, 0.8, 4.0, 2.0, 1.6, 0.3)];
        let s = sample_nonoverlapping(&db, &gt, 15, &Region::new(-20.0, 20.0, -20.0, 20.0), 4);
        assert_eq!(s.placed.len(), 15);
        for (i, a) in s.placed.iter().enumerate() {
            assert_eq!(bev_iou(&a.bbox.bev, &gt[0].bev), 0.0);
            for b in &s.placed[i + 1..] {
                assert_eq!(bev_iou(&a.bbox.bev, &b.bbox.bev), 0.0);
            }
        }
        let again = sample_nonoverlapping(&db, &gt, 15, &Region::new(-20.0, 20.0, -20.0, 20.0), 4);
        assert_eq!(again, s);
    }

    #[test]
    fn infeasible_region_returns_nothing() {
        let huge = vec![OrientedBox3D::new(0.0, 0.0, 0.8, 500.0, 500.0, 2.0, 0.0)];
        let s = sample_nonoverlapping(&small_db(), &huge, 3, &Region::new(-10.0, 10.0, -10.0, 10.0), 2);
        assert!(s.placed.is_empty());
        assert_eq!(s.shortfall(), 3);
        assert_eq!(s.attempts, 300);
    }

    #[test]
    fn synchronize_without_samples_is_identity() {
        let label = OrientedBox3D::new(5.0, 1.0, 0.8, 4.0, 2.0, 1.6, 0.2);
        let view = AgentView {
            cloud: cloud_in(&label, 10),
            labels: vec![label],
            to_ego: Pose2D::new(30.0, -4.0, 2.0),
            range_x: 50.0,
            range_y: 50.0,
        };
        let aug = synchronize(&[], std::slice::from_ref(&view));
        let a = &aug.agents[0];
        assert_eq!(a.cloud.len(), view.cloud.len());
        for (p, q) in a.cloud.points.iter().zip(&view.cloud.points) {
            assert!((p[0] - q[0]).abs() < 1e-6 && (p[1] - q[1]).abs() < 1e-6 && p[2] == q[2]);
        }
        assert!((a.labels[0].bev.cx - label.bev.cx).abs() < 1e-6);
    }

    #[test]
    fn membership_follows_agent_range() {
        let db = small_db();
        let sample_box = OrientedBox3D::new(10.0, 0.0, 0.8, 4.0, 2.0, 1.6, 0.0);
        let placed = vec![PlacedSample {
            entry: 0,
            bbox: sample_box,
            points: place_points(&db.entries[0], &box_pose(&sample_box), 0.8),
        }];
        let near = AgentView {
            cloud: PointCloud::default(),
            labels: vec![],
            to_ego: Pose2D::new(20.0, 0.0, std::f64::consts::PI),
            range_x: 30.0,
            range_y: 30.0,
        };
        let far = AgentView {
            to_ego: Pose2D::new(200.0, 0.0, 0.0),
            ..near.clone()
        };
        let aug = synchronize(&placed, &[near.clone(), far]);
        assert_eq!(aug.agents[0].inserted, vec![0]);
        assert!(aug.agents[1].inserted.is_empty());
        // Lifted back to ego, the inserted label matches the placed box.
        let back = aug.agents[0].labels[0].transformed(&near.to_ego);
        assert!((back.bev.cx - 10.0).abs() < 1e-6 && back.bev.cy.abs() < 1e-6);
        assert_eq!(aug.agents[0].cloud.len(), 20);
    }
}
