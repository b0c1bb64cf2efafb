//! Side-view orthographic renderer: x to the right, z up.

use gewu_director::Camera;
use gewu_sim::SceneView;

use crate::raster::{Raster, Rgb};

pub const SKY: Rgb = [232, 238, 244];
pub const GROUND: Rgb = [96, 116, 84];
pub const LEG: Rgb = [44, 44, 52];
pub const TORSO: Rgb = [196, 64, 52];
pub const FALLEN: Rgb = [128, 128, 128];
pub const COIN: Rgb = [230, 186, 40];
pub const ARROW: Rgb = [36, 116, 216];

/// Arrow length in metres at λ = 1.
pub const ARROW_LEN_M: f64 = 0.5;

/// Maps world (x, z) to pixel coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    center: [f64; 2],
    px_per_m: f64,
    w: f64,
    h: f64,
}

impl Projection {
    pub fn new(camera: &Camera, focus_x: Option<f64>, width: u16, height: u16) -> Self {
        let mut center = camera.center;
        if camera.follow {
            if let Some(x) = focus_x {
                center[0] = x;
            }
        }
        Projection {
            center,
            px_per_m: camera.scale * width as f64 / 320.0,
            w: width as f64,
            h: height as f64,
        }
    }

    pub fn to_px(&self, x: f64, z: f64) -> (i64, i64) {
        let px = self.w / 2.0 + (x - self.center[0]) * self.px_per_m;
        let py = self.h / 2.0 - (z - self.center[1]) * self.px_per_m;
        (px.round() as i64, py.round() as i64)
    }

    pub fn px_per_m(&self) -> f64 {
        self.px_per_m
    }
}

/// Renders a scene; `None` is the empty world (background only).
/// Identical inputs give identical rasters.
pub fn render(view: Option<&SceneView>, camera: &Camera, width: u16, height: u16) -> Raster {
    let mut r = Raster::new(width, height, SKY);
    let Some(v) = view else { return r };
    let proj = Projection::new(camera, Some(v.torso[0]), width, height);

    // Ground: fill below the terrain profile, column by column.
    for col in 0..width as i64 {
        let x = proj.center_x_at(col);
        let z = ground_z(&v.terrain, x);
        let (_, gy) = proj.to_px(x, z);
        r.fill_rect(col, gy, col + 1, height as i64, GROUND);
    }

    for c in &v.coins {
        let (cx, cy) = proj.to_px(c[0], ground_z(&v.terrain, c[0]) + 0.05);
        r.disc(cx, cy, (0.04 * proj.px_per_m()).round().max(1.0) as i64, COIN);
    }

    let foot = proj.to_px(v.foot[0], v.foot[2]);
    let torso = proj.to_px(v.torso[0], v.torso[2]);
    let thick = (0.015 * proj.px_per_m()).round().max(0.0) as i64;
    r.line(foot, torso, thick, LEG);
    let body = if v.upright { TORSO } else { FALLEN };
    r.disc(torso.0, torso.1, (0.06 * proj.px_per_m()).round().max(1.0) as i64, body);

    let (ax, az) = (v.assist[0], v.assist[2]);
    let mag = (ax * ax + az * az).sqrt();
    if v.lambda > 0.0 && mag > 0.0 {
        let len = v.lambda * ARROW_LEN_M;
        let tip_x = v.torso[0] + ax / mag * len;
        let tip_z = v.torso[2] + az / mag * len;
        let tip = proj.to_px(tip_x, tip_z);
        r.line(torso, tip, thick.max(1), ARROW);
        r.disc(tip.0, tip.1, (thick + 2).max(2), ARROW);
    }
    r
}

impl Projection {
    fn center_x_at(&self, col: i64) -> f64 {
        self.center[0] + (col as f64 + 0.5 - self.w / 2.0) / self.px_per_m
    }
}

/// Piecewise-linear ground height; flat zero when no profile is given.
pub fn ground_z(terrain: &[[f64; 2]], x: f64) -> f64 {
    match terrain {
        [] => 0.0,
        [p] => p[1],
        _ => {
            if x <= terrain[0][0] {
                return terrain[0][1];
            }
            for w in terrain.windows(2) {
                let ([x0, z0], [x1, z1]) = (w[0], w[1]);
                if x <= x1 {
                    let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 1.0 };
                    return z0 + t * (z1 - z0);
                }
            }
            terrain[terrain.len() - 1][1]
        }
    }
}
