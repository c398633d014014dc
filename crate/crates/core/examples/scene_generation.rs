//! Generate a scene and emulate each agent's detector on its first frame.

use coopercept::scenario::{emulate_detections, preset, EmulatorConfig, Scene};

fn main() -> coopercept::Result<()> {
    let (layout, n_objects) = preset("default").expect("built-in preset");
    let scene = Scene::generate(7, 3, n_objects, 2, &layout)?;
    println!("{} agents, {} objects over {} frames", scene.agents.len(), scene.objects.len(), scene.frame_count);

    let objects = scene.frame_objects(0);
    let emu = EmulatorConfig::default();
    for agent in &scene.agents {
        let dets = emulate_detections(&objects, agent, &emu, scene.seed, 0);
        let true_pos = dets.iter().filter(|d| d.source.is_some()).count();
        println!(
            "agent {} at ({:.0}, {:.0}): {} detections ({} true), top score {:.3}",
            agent.agent_id,
            agent.pose.x,
            agent.pose.y,
            dets.len(),
            true_pos,
            dets.first().map_or(0.0, |d| d.score)
        );
    }
    let json = scene.to_json()?;
    println!("scene JSON is {} bytes", json.len());
    Ok(())
}
