//! Compare no fusion, late fusion and instance fusion on a generated scene.

use coopercept::pipeline::{run_pipeline, PipelineConfig, Strategy};
use coopercept::report::strategy_table;
use coopercept::scenario::{preset, Scene};

fn main() -> coopercept::Result<()> {
    let (layout, n) = preset("duplicate").expect("built-in preset");
    let scene = Scene::generate(7, 50, n, 2, &layout)?;
    let cfg = PipelineConfig {
        seed: 7,
        ..PipelineConfig::default()
    };
    let reports = Strategy::ALL
        .iter()
        .map(|&s| run_pipeline(&scene, s, &cfg))
        .collect::<coopercept::Result<Vec<_>>>()?;
    print!("{}", strategy_table(&reports));
    Ok(())
}
