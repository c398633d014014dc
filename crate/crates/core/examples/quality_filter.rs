//! The quality-aware loss and the transmission filter.

use coopercept::geometry::Pose2D;
use coopercept::quality::{mal_grad, mal_loss, qaf_filter, FilterConfig, MalParams};
use coopercept::scenario::{emulate_detections, preset, EmulatorConfig, Scene};

fn main() -> coopercept::Result<()> {
    let params = MalParams::default();
    for (p, q) in [(0.5, 0.5), (0.9, 0.8), (0.5, 0.0), (0.2, 0.0)] {
        println!("MAL(p={p}, q={q}) = {:.5}  d/dp = {:.5}", mal_loss(p, q, &params)?, mal_grad(p, q, &params)?);
    }

    let (layout, n) = preset("default").expect("built-in preset");
    let scene = Scene::generate(3, 1, n, 2, &layout)?;
    let collaborator = &scene.agents[1];
    let dets = emulate_detections(&scene.frame_objects(0), collaborator, &EmulatorConfig::default(), scene.seed, 0);
    let xi = Pose2D::relative(&scene.ego().pose, &collaborator.pose);
    let (kept, grid) = qaf_filter(&dets, &xi, &FilterConfig::default());
    let true_dets = dets.iter().filter(|d| d.source.is_some()).count();
    println!(
        "collaborator detected {} ({} real objects, {} false positives), transmits {}",
        dets.len(),
        true_dets,
        dets.len() - true_dets,
        kept.len()
    );
    for (inst, g) in kept.iter().zip(&grid).take(3) {
        println!("  score {:.3} -> cell ({}, {})", inst.score, g.grid_x, g.grid_y);
    }
    Ok(())
}
