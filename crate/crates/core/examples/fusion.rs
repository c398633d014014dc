//! Fuse two agents' views of the same object with the attention passes.

use coopercept::fusion::{calif, gaussian_weights, spatial_pe, AttentionConfig, EncodedInstance};
use coopercept::geometry::OrientedBox3D;
use coopercept::quality::grid_index;
use coopercept::scenario::{embed, FrameTag, Instance};

fn encoded(agent: u32, cx: f64, score: f64, d: usize) -> EncodedInstance {
    let feature: Vec<f32> = embed(5, d).iter().map(|&v| v as f32).collect();
    let bbox = OrientedBox3D::new(cx, 2.0, 0.8, 4.5, 1.9, 1.6, 0.1);
    EncodedInstance {
        grid: (grid_index(cx), grid_index(2.0)),
        instance: Instance {
            instance_id: agent,
            agent_id: agent,
            feature,
            bbox,
            score,
            frame: FrameTag::Ego,
            source: Some(5),
        },
        agent_rank: agent,
    }
}

fn main() -> coopercept::Result<()> {
    let d = 64;
    let pe = spatial_pe((321, -110), d)?;
    println!("spatial encoding of cell (321, -110): first terms {:.4?}", &pe[..4]);

    let coop = vec![encoded(0, 12.0, 0.9, d), encoded(1, 12.4, 0.7, d)];
    let boxes: Vec<_> = coop.iter().map(|e| e.instance.bbox.bev).collect();
    println!("gaussian weights:\n{:.4}", gaussian_weights(&boxes, 1.0)?);

    let out = calif(&coop, &[vec![1], vec![0]], vec![], &AttentionConfig::analytic(d))?;
    for inst in &out.instances {
        println!("fused box centre x = {:.3}, score {:.3}", inst.bbox.bev.cx, inst.score);
    }
    println!("second-pass weights:\n{:.4}", out.gda_weights.expect("coop branch is non-empty"));
    Ok(())
}
