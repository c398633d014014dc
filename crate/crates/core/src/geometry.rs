//! Planar poses, oriented boxes and rotated bird's-eye-view IoU.
//!
//! Everything here is a pure function on small `Copy` types. Collaboration
//! geometry is treated as planar: a [`Pose2D`] is an SE(2) element and 3D
//! boxes only ever rotate about the vertical axis. Heights and `z` ride along
//! as payload.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Areas below this are treated as degenerate (IoU 0, "no overlap").
pub const AREA_EPS: f64 = 1e-12;

/// Wrap an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// A rigid planar transform. Applied to a point `p` it yields `R(yaw) p + (x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Default for Pose2D {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Pose2D {
    pub const IDENTITY: Pose2D = Pose2D {
        x: 0.0,
        y: 0.0,
        yaw: 0.0,
    };

    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose2D) -> Pose2D {
        let (s, c) = self.yaw.sin_cos();
        Pose2D::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.yaw + other.yaw,
        )
    }

    pub fn inverse(&self) -> Pose2D {
        let (s, c) = self.yaw.sin_cos();
        Pose2D::new(
            -(c * self.x + s * self.y),
            -(-s * self.x + c * self.y),
            -self.yaw,
        )
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [
            self.x + c * p[0] - s * p[1],
            self.y + s * p[0] + c * p[1],
        ]
    }

    /// Transform a 3D point; `z` is carried unchanged.
    pub fn apply3(&self, p: [f64; 3]) -> [f64; 3] {
        let [x, y] = self.apply([p[0], p[1]]);
        [x, y, p[2]]
    }

    /// Transform that maps coordinates in the frame located at `from` into
    /// the frame located at `to` (both given in a common world frame).
    pub fn relative(to: &Pose2D, from: &Pose2D) -> Pose2D {
        to.inverse().compose(from)
    }
}

/// Free-function form of [`Pose2D::compose`].
pub fn compose(a: &Pose2D, b: &Pose2D) -> Pose2D {
    a.compose(b)
}

/// A rotated rectangle in the ground plane. `length` runs along the heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBoxBEV {
    pub cx: f64,
    pub cy: f64,
    pub length: f64,
    pub width: f64,
    pub yaw: f64,
}

impl OrientedBoxBEV {
    pub fn new(cx: f64, cy: f64, length: f64, width: f64, yaw: f64) -> Self {
        Self {
            cx,
            cy,
            length,
            width,
            yaw,
        }
    }

    pub fn center(&self) -> [f64; 2] {
        [self.cx, self.cy]
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    pub fn is_valid(&self) -> bool {
        self.length > 0.0
            && self.width > 0.0
            && self.cx.is_finite()
            && self.cy.is_finite()
            && self.yaw.is_finite()
    }

    /// Footprint corners, counter-clockwise, starting at the front-left.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let hl = self.length / 2.0;
        let hw = self.width / 2.0;
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        local.map(|[u, v]| [self.cx + c * u - s * v, self.cy + s * u + c * v])
    }

    /// Whether a point lies inside the footprint (boundary inclusive, with `tol` slack).
    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.cx;
        let dy = p[1] - self.cy;
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        u.abs() <= self.length / 2.0 + tol && v.abs() <= self.width / 2.0 + tol
    }
}

/// A 7-DoF box: BEV footprint plus vertical extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox3D {
    #[serde(flatten)]
    pub bev: OrientedBoxBEV,
    pub cz: f64,
    pub height: f64,
}

impl OrientedBox3D {
    pub fn new(cx: f64, cy: f64, cz: f64, length: f64, width: f64, height: f64, yaw: f64) -> Self {
        Self {
            bev: OrientedBoxBEV::new(cx, cy, length, width, yaw),
            cz,
            height,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.bev.is_valid() && self.height > 0.0 && self.cz.is_finite()
    }

    pub fn contains(&self, p: [f64; 3], tol: f64) -> bool {
        self.bev.contains([p[0], p[1]], tol) && (p[2] - self.cz).abs() <= self.height / 2.0 + tol
    }

    pub fn transformed(&self, xi: &Pose2D) -> OrientedBox3D {
        OrientedBox3D {
            bev: transform_box(xi, &self.bev),
            ..*self
        }
    }
}

/// Re-express `b` through the rigid transform `xi`. Dimensions are unchanged.
pub fn transform_box(xi: &Pose2D, b: &OrientedBoxBEV) -> OrientedBoxBEV {
    let [cx, cy] = xi.apply([b.cx, b.cy]);
    OrientedBoxBEV {
        cx,
        cy,
        length: b.length,
        width: b.width,
        yaw: normalize_angle(b.yaw + xi.yaw),
    }
}

/// Half the footprint diagonal, i.e. the radius of the circumscribed circle.
pub fn circumradius(b: &OrientedBoxBEV) -> f64 {
    b.length.hypot(b.width) / 2.0
}

/// Shoelace area of a simple polygon (positive for counter-clockwise order).
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    acc / 2.0
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segment_line_intersection(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let t = dp / (dp - dq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Sutherland–Hodgman: clip `subject` against the convex counter-clockwise `clip` polygon.
pub fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut output: Vec<[f64; 2]> = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % m];
        let input = std::mem::take(&mut output);
        let n = input.len();
        for j in 0..n {
            let cur = input[j];
            let prev = input[(j + n - 1) % n];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(segment_line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(segment_line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

/// Area of the footprint intersection of two boxes.
pub fn intersection_area(a: &OrientedBoxBEV, b: &OrientedBoxBEV) -> f64 {
    // Cheap rejection on circumcircles before clipping.
    let reach = circumradius(a) + circumradius(b);
    let (dx, dy) = (a.cx - b.cx, a.cy - b.cy);
    if dx * dx + dy * dy > reach * reach {
        return 0.0;
    }
    let poly = clip_convex(&a.corners(), &b.corners());
    polygon_area(&poly).max(0.0)
}

fn canonical_order<'a>(a: &'a OrientedBoxBEV, b: &'a OrientedBoxBEV) -> (&'a OrientedBoxBEV, &'a OrientedBoxBEV) {
    let key = |x: &OrientedBoxBEV| {
        [x.cx, x.cy, x.length, x.width, x.yaw].map(f64::to_bits)
    };
    if key(a) <= key(b) {
        (a, b)
    } else {
        (b, a)
    }
}

/// Rotated IoU of the two footprints. Symmetric bit-for-bit; 0 when either
/// footprint is degenerate.
pub fn bev_iou(a: &OrientedBoxBEV, b: &OrientedBoxBEV) -> f64 {
    let area_a = a.area();
    let area_b = b.area();
    if !(area_a >= AREA_EPS && area_b >= AREA_EPS) {
        return 0.0;
    }
    let (first, second) = canonical_order(a, b);
    let inter = intersection_area(first, second);
    if inter < AREA_EPS {
        return 0.0;
    }
    let union = area_a + area_b - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// True when the footprints share less than [`AREA_EPS`] of area.
pub fn footprints_disjoint(a: &OrientedBoxBEV, b: &OrientedBoxBEV) -> bool {
    let (first, second) = canonical_order(a, b);
    intersection_area(first, second) < AREA_EPS
}
