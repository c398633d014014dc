//! Per-frame bandwidth of late and instance fusion for two scene densities.

use coopercept::pipeline::{run_pipeline, PipelineConfig, Strategy};
use coopercept::report::bandwidth_table;
use coopercept::scenario::{preset, Scene};
use coopercept::wire::AgentMessage;

fn main() -> coopercept::Result<()> {
    for name in ["dair", "v2xset"] {
        let (layout, n) = preset(name).expect("built-in preset");
        let scene = Scene::generate(1, 200, n, 2, &layout)?;
        let cfg = PipelineConfig::default();
        let reports = [Strategy::Late, Strategy::Instance]
            .iter()
            .map(|&s| run_pipeline(&scene, s, &cfg))
            .collect::<coopercept::Result<Vec<_>>>()?;
        println!("{name}-like scene, {n} objects per frame on average");
        print!("{}", bandwidth_table(&reports));
        println!();
    }

    let empty = AgentMessage::new(0, 0, 256, vec![])?;
    println!(
        "each record is {} bytes on the wire, of which {} are features",
        empty.record_len(),
        4 * 256
    );
    Ok(())
}
