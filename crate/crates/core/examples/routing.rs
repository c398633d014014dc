//! Split a combined instance table into single and cooperative branches.

use coopercept::geometry::OrientedBox3D;
use coopercept::routing::{build_iou_matrix, route, RoutingConfig};
use coopercept::scenario::{FrameTag, Instance};

fn instance(id: u32, agent: u32, cx: f64, cy: f64) -> Instance {
    Instance {
        instance_id: id,
        agent_id: agent,
        feature: vec![],
        bbox: OrientedBox3D::new(cx, cy, 0.8, 4.5, 1.9, 1.6, 0.0),
        score: 0.8,
        frame: FrameTag::Ego,
        source: None,
    }
}

fn main() {
    let table = vec![
        instance(0, 0, 10.0, 0.0),
        instance(1, 1, 10.3, 0.1),
        instance(2, 0, -15.0, 5.0),
        instance(3, 1, 30.0, -8.0),
    ];
    println!("IoU matrix:\n{:.3}", build_iou_matrix(&table));
    let sets = route(&table, &RoutingConfig::default());
    let ids = |v: &[Instance]| v.iter().map(|i| i.instance_id).collect::<Vec<_>>();
    println!("single: {:?}", ids(&sets.single));
    println!("coop:   {:?} partners {:?}", ids(&sets.coop), sets.partners);
}
