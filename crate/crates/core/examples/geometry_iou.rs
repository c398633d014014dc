//! Rotated boxes, pose composition and BEV IoU.

use std::f64::consts::FRAC_PI_4;

use coopercept::geometry::{bev_iou, circumradius, OrientedBoxBEV, Pose2D};

fn main() {
    let a = OrientedBoxBEV::new(0.0, 0.0, 2.0, 2.0, 0.0);
    let shifted = OrientedBoxBEV::new(1.0, 0.0, 2.0, 2.0, 0.0);
    let rotated = OrientedBoxBEV::new(0.0, 0.0, 2.0, 2.0, FRAC_PI_4);
    println!("IoU(square, shifted by half)  = {:.6}", bev_iou(&a, &shifted));
    println!("IoU(square, rotated 45 deg)   = {:.6}", bev_iou(&a, &rotated));
    println!("circumradius of a 4.5x1.8 car = {:.4} m", circumradius(&OrientedBoxBEV::new(0.0, 0.0, 4.5, 1.8, 0.0)));

    let ego = Pose2D::new(0.0, 0.0, 0.0);
    let other = Pose2D::new(20.0, 5.0, std::f64::consts::PI);
    let xi = Pose2D::relative(&ego, &other);
    let seen_by_other = OrientedBoxBEV::new(10.0, 0.0, 4.5, 1.8, 0.3);
    let in_ego = coopercept::geometry::transform_box(&xi, &seen_by_other);
    println!("box at (10, 0) in the collaborator frame sits at ({:.2}, {:.2}) for the ego", in_ego.cx, in_ego.cy);
}
