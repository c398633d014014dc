//! Instance-fusion AP as collaborator pose noise grows.

use coopercept::eval::NoiseSpec;
use coopercept::pipeline::{sweep_noise, PipelineConfig, Strategy};
use coopercept::report::{noise_table, sweep_csv};
use coopercept::scenario::{preset, Scene};

fn main() -> coopercept::Result<()> {
    let (layout, n) = preset("default").expect("built-in preset");
    let scene = Scene::generate(5, 50, n, 2, &layout)?;
    let cfg = PipelineConfig {
        seed: 5,
        jobs: 2,
        ..PipelineConfig::default()
    };
    let reports = sweep_noise(&scene, Strategy::Instance, &cfg, &NoiseSpec::default_grid())?;
    print!("{}", noise_table(&reports));
    print!("\n{}", sweep_csv(&reports));
    Ok(())
}
