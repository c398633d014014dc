//! Build an object database, place non-overlapping samples and synchronize
//! them into every agent's view.

use coopercept::cogt::{build_db, sample_nonoverlapping, synchronize, AgentView};
use coopercept::geometry::Pose2D;
use coopercept::scenario::{preset, synthesize_points, Region, Scene};

fn main() -> coopercept::Result<()> {
    let (layout, n) = preset("default").expect("built-in preset");
    let scene = Scene::generate(11, 1, n, 2, &layout)?;
    let objects = scene.frame_objects(0);
    let ego = scene.ego();

    let views: Vec<AgentView> = scene
        .agents
        .iter()
        .map(|a| AgentView {
            cloud: synthesize_points(&objects, a, 4.0, scene.seed, 0),
            labels: objects
                .iter()
                .map(|o| o.bbox.transformed(&a.pose.inverse()))
                .filter(|b| a.in_range(b.bev.center()))
                .collect(),
            to_ego: Pose2D::relative(&ego.pose, &a.pose),
            range_x: a.range_x,
            range_y: a.range_y,
        })
        .collect();
    let db = build_db(&views.iter().map(|v| (v.cloud.clone(), v.labels.clone())).collect::<Vec<_>>());
    println!("database holds {} objects", db.len());

    let gt: Vec<_> = objects.iter().map(|o| o.bbox.transformed(&ego.pose.inverse())).collect();
    let region = Region::new(-40.0, 40.0, -30.0, 30.0);
    let sampling = sample_nonoverlapping(&db, &gt, 5, &region, 11);
    println!("placed {} of {} samples in {} attempts", sampling.placed.len(), sampling.requested, sampling.attempts);

    let result = synchronize(&sampling.placed, &views);
    for (view, aug) in views.iter().zip(&result.agents) {
        println!(
            "agent: {} -> {} points, {} -> {} labels",
            view.cloud.len(),
            aug.cloud.len(),
            view.labels.len(),
            aug.labels.len()
        );
    }
    Ok(())
}
