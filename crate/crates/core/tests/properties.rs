use std::f64::consts::PI;

use proptest::prelude::*;

use coopercept::eval::{hungarian, nms, Detection};
use coopercept::geometry::{bev_iou, transform_box, OrientedBox3D, OrientedBoxBEV, Pose2D};
use coopercept::routing::{route, RoutingConfig};
use coopercept::scenario::{FrameTag, Instance};
use coopercept::wire::{decode, encode, AgentMessage, InstanceRecord};

fn bev() -> impl Strategy<Value = OrientedBoxBEV> {
    (-5.0..5.0f64, -5.0..5.0f64, 0.5..6.0f64, 0.5..3.0f64, -PI..PI).prop_map(|(x, y, l, w, r)| OrientedBoxBEV::new(x, y, l, w, r))
}

fn pose() -> impl Strategy<Value = Pose2D> {
    (-50.0..50.0f64, -50.0..50.0f64, -PI..PI).prop_map(|(x, y, r)| Pose2D::new(x, y, r))
}

fn record(d: usize) -> impl Strategy<Value = InstanceRecord> {
    (prop::collection::vec(any::<u32>(), d), any::<i32>(), any::<i32>(), any::<u32>()).prop_map(|(f, gx, gy, s)| InstanceRecord {
        feature: f.into_iter().map(f32::from_bits).collect(),
        grid_x: gx,
        grid_y: gy,
        score: f32::from_bits(s),
    })
}

fn message() -> impl Strategy<Value = AgentMessage> {
    (0usize..24).prop_flat_map(|d| {
        (any::<u32>(), any::<u32>(), prop::collection::vec(record(d), 0..8))
            .prop_map(move |(s, f, recs)| AgentMessage::new(s, f, d, recs).expect("record dims match"))
    })
}

fn table() -> impl Strategy<Value = Vec<Instance>> {
    prop::collection::vec(bev(), 0..30).prop_map(|boxes| {
        boxes
            .into_iter()
            .enumerate()
            .map(|(i, b)| Instance {
                instance_id: i as u32,
                agent_id: 0,
                feature: vec![],
                bbox: OrientedBox3D { bev: b, cz: 0.8, height: 1.6 },
                score: 0.5,
                frame: FrameTag::Ego,
                source: None,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(a in bev(), b in bev()) {
        let ab = bev_iou(&a, &b);
        prop_assert_eq!(ab, bev_iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((bev_iou(&a, &a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn iou_is_rigid_motion_invariant(a in bev(), b in bev(), xi in pose()) {
        let moved = bev_iou(&transform_box(&xi, &a), &transform_box(&xi, &b));
        prop_assert!((moved - bev_iou(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn pose_inverse_round_trips(xi in pose(), x in -100.0..100.0f64, y in -100.0..100.0f64) {
        let back = xi.inverse().apply(xi.apply([x, y]));
        prop_assert!((back[0] - x).abs() < 1e-9 && (back[1] - y).abs() < 1e-9);
    }

    #[test]
    fn wire_round_trip_is_bit_exact(msg in message()) {
        let bytes = encode(&msg);
        prop_assert_eq!(bytes.len() as u64, msg.total_bytes());
        prop_assert_eq!(decode(&bytes).unwrap(), msg);
    }

    #[test]
    fn routing_partitions_and_ignores_order(t in table(), seed in any::<u64>()) {
        let cfg = RoutingConfig::default();
        let sets = route(&t, &cfg);
        let mut ids: Vec<u32> = sets.single.iter().chain(&sets.coop).map(|i| i.instance_id).collect();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..t.len() as u32).collect::<Vec<_>>());

        let mut shuffled = t.clone();
        let n = shuffled.len();
        if n > 1 {
            shuffled.rotate_left((seed % n as u64) as usize);
            shuffled.swap(0, n - 1);
        }
        let other = route(&shuffled, &cfg);
        let sorted = |v: &[Instance]| { let mut x: Vec<u32> = v.iter().map(|i| i.instance_id).collect(); x.sort_unstable(); x };
        prop_assert_eq!(sorted(&sets.single), sorted(&other.single));
        prop_assert_eq!(sorted(&sets.coop), sorted(&other.coop));
    }

    #[test]
    fn nms_keeps_non_overlapping_set(boxes in prop::collection::vec((bev(), 0.0..1.0f64), 0..20)) {
        let dets: Vec<Detection> = boxes.into_iter().map(|(bbox, score)| Detection { bbox, score }).collect();
        let keep = nms(&dets, 0.15);
        for (i, &a) in keep.iter().enumerate() {
            for &b in &keep[..i] {
                prop_assert!(bev_iou(&dets[a].bbox, &dets[b].bbox) < 0.15);
            }
        }
        let kept: Vec<Detection> = keep.iter().map(|&k| dets[k]).collect();
        prop_assert_eq!(nms(&kept, 0.15).len(), kept.len());
    }

    #[test]
    fn hungarian_rectangular_is_no_worse_than_greedy(rows in 1usize..6, cols in 1usize..6, vals in prop::collection::vec(0u8..50, 36)) {
        let cost: Vec<Vec<f64>> = (0..rows).map(|i| (0..cols).map(|j| f64::from(vals[i * 6 + j])).collect()).collect();
        let (pairs, total) = hungarian(&cost);
        prop_assert_eq!(pairs.len(), rows.min(cols));
        let mut used_r = vec![false; rows];
        let mut used_c = vec![false; cols];
        for &(r, c) in &pairs {
            prop_assert!(!used_r[r] && !used_c[c]);
            used_r[r] = true;
            used_c[c] = true;
        }
        // Any single swap of two assigned columns cannot improve the total.
        for a in 0..pairs.len() {
            for b in 0..pairs.len() {
                let (r1, c1) = pairs[a];
                let (r2, c2) = pairs[b];
                prop_assert!(cost[r1][c2] + cost[r2][c1] >= cost[r1][c1] + cost[r2][c2]);
            }
        }
        prop_assert_eq!(total, pairs.iter().map(|&(r, c)| cost[r][c]).sum::<f64>());
    }
}
