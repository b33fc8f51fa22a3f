//! Synthetic labeled indoor rooms.
//!
//! Classes 0..=2 are the floor, walls and ceiling. Higher classes are
//! furniture: tables, chairs, bookcases, wall boards and clutter spheres,
//! cycling through those shapes when more than eight classes are requested.
//! Points are spread over surfaces at roughly uniform density, with small
//! classes topped up to 1% of the cloud.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::PointCloud;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub n_points: usize,
    pub n_classes: usize,
    /// Room extent in meters (x, y, height).
    pub room: [f64; 3],
    /// Std of the Gaussian offset applied to surface samples (meters).
    pub surface_noise: f64,
    /// Std of the per-channel color noise around each class color.
    pub color_noise: f64,
    /// Share of points drawn uniformly in the room with a random label.
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            n_points: 50_000,
            n_classes: 8,
            room: [10.0, 8.0, 3.0],
            surface_noise: 0.005,
            color_noise: 0.04,
            outlier_fraction: 0.002,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(invalid(format!("n_classes must be at least 2, got {}", self.n_classes)));
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return Err(invalid(format!("outlier_fraction out of range [0,1]: {}", self.outlier_fraction)));
        }
        if !(self.surface_noise >= 0.0) || !(self.color_noise >= 0.0) {
            return Err(invalid("noise levels must be non-negative"));
        }
        if self.room.iter().any(|&e| !(e >= 2.0) || !e.is_finite()) {
            return Err(invalid("room extents must be at least 2 m"));
        }
        if self.n_points < self.n_classes {
            return Err(Error::InfeasibleSpec(format!(
                "{} points cannot cover {} classes",
                self.n_points, self.n_classes
            )));
        }
        let min_count = min_class_count(self.n_points);
        if self.n_classes * min_count > self.inlier_count() {
            return Err(Error::InfeasibleSpec(format!(
                "{} classes of at least {min_count} points exceed {} inliers",
                self.n_classes,
                self.inlier_count()
            )));
        }
        Ok(())
    }

    fn outlier_count(&self) -> usize {
        (self.n_points as f64 * self.outlier_fraction).floor() as usize
    }

    fn inlier_count(&self) -> usize {
        self.n_points - self.outlier_count()
    }
}

fn min_class_count(n_points: usize) -> usize {
    n_points.div_ceil(100).max(1)
}

const BASE_COLORS: [[f64; 3]; 8] = [
    [0.55, 0.50, 0.45],
    [0.80, 0.78, 0.72],
    [0.90, 0.90, 0.88],
    [0.55, 0.35, 0.20],
    [0.25, 0.30, 0.55],
    [0.45, 0.30, 0.20],
    [0.75, 0.80, 0.78],
    [0.70, 0.25, 0.25],
];

fn class_color(class: usize) -> [f64; 3] {
    if let Some(c) = BASE_COLORS.get(class) {
        return *c;
    }
    let hue = (class as f64 * 0.618_033_988_75).fract() * 6.0;
    let x = 1.0 - (hue % 2.0 - 1.0).abs();
    let (r, g, b) = match hue as usize {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [0.2 + 0.6 * r, 0.2 + 0.6 * g, 0.2 + 0.6 * b]
}

#[derive(Clone, Copy, Debug)]
enum Shape {
    /// Axis-aligned box with `min`/`max` corners; the bottom face is omitted.
    Box { min: [f64; 3], max: [f64; 3] },
    Sphere { center: [f64; 3], radius: f64 },
    /// Axis-aligned rectangle; `axis` is the constant coordinate.
    Rect { axis: usize, at: f64, lo: [f64; 2], hi: [f64; 2] },
}

impl Shape {
    fn area(&self) -> f64 {
        match *self {
            Shape::Box { min, max } => {
                let (dx, dy, dz) = (max[0] - min[0], max[1] - min[1], max[2] - min[2]);
                dx * dy + 2.0 * dz * (dx + dy)
            }
            Shape::Sphere { radius, .. } => 4.0 * std::f64::consts::PI * radius * radius,
            Shape::Rect { lo, hi, .. } => (hi[0] - lo[0]) * (hi[1] - lo[1]),
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> [f64; 3] {
        match *self {
            Shape::Box { min, max } => {
                let (dx, dy, dz) = (max[0] - min[0], max[1] - min[1], max[2] - min[2]);
                let faces = [dx * dy, dx * dz, dx * dz, dy * dz, dy * dz];
                let mut pick = rng.gen::<f64>() * faces.iter().sum::<f64>();
                let mut face = 0;
                while face < 4 && pick >= faces[face] {
                    pick -= faces[face];
                    face += 1;
                }
                let (u, v): (f64, f64) = (rng.gen(), rng.gen());
                let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
                match face {
                    0 => [lerp(min[0], max[0], u), lerp(min[1], max[1], v), max[2]],
                    1 => [lerp(min[0], max[0], u), min[1], lerp(min[2], max[2], v)],
                    2 => [lerp(min[0], max[0], u), max[1], lerp(min[2], max[2], v)],
                    3 => [min[0], lerp(min[1], max[1], u), lerp(min[2], max[2], v)],
                    _ => [max[0], lerp(min[1], max[1], u), lerp(min[2], max[2], v)],
                }
            }
            Shape::Sphere { center, radius } => {
                let n = Normal::new(0.0_f64, 1.0).unwrap();
                loop {
                    let d = [n.sample(rng), n.sample(rng), n.sample(rng)];
                    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                    if len > 1e-9 {
                        return [
                            center[0] + radius * d[0] / len,
                            center[1] + radius * d[1] / len,
                            center[2] + radius * d[2] / len,
                        ];
                    }
                }
            }
            Shape::Rect { axis, at, lo, hi } => {
                let a = lo[0] + (hi[0] - lo[0]) * rng.gen::<f64>();
                let b = lo[1] + (hi[1] - lo[1]) * rng.gen::<f64>();
                match axis {
                    0 => [at, a, b],
                    1 => [a, at, b],
                    _ => [a, b, at],
                }
            }
        }
    }
}

/// Picks a spot on one of the four walls: (axis, coordinate, inward sign, span range).
fn wall_spot(room: [f64; 3], width: f64, rng: &mut impl Rng) -> (usize, f64, f64, f64) {
    let side = rng.gen_range(0..4);
    let (axis, at, inward) = match side {
        0 => (0, 0.0, 1.0),
        1 => (0, room[0], -1.0),
        2 => (1, 0.0, 1.0),
        _ => (1, room[1], -1.0),
    };
    let along = room[1 - axis];
    let start = rng.gen_range(0.3..(along - width - 0.3).max(0.31));
    (axis, at, inward, start)
}

fn footprint(room: [f64; 3], w: f64, d: f64, rng: &mut impl Rng) -> [f64; 2] {
    [
        rng.gen_range(0.5..(room[0] - w - 0.5).max(0.51)),
        rng.gen_range(0.5..(room[1] - d - 0.5).max(0.51)),
    ]
}

fn class_shapes(class: usize, room: [f64; 3], rng: &mut impl Rng) -> Vec<Shape> {
    let [lx, ly, h] = room;
    match class {
        0 => vec![Shape::Rect { axis: 2, at: 0.0, lo: [0.0, 0.0], hi: [lx, ly] }],
        1 => vec![
            Shape::Rect { axis: 0, at: 0.0, lo: [0.0, 0.0], hi: [ly, h] },
            Shape::Rect { axis: 0, at: lx, lo: [0.0, 0.0], hi: [ly, h] },
            Shape::Rect { axis: 1, at: 0.0, lo: [0.0, 0.0], hi: [lx, h] },
            Shape::Rect { axis: 1, at: ly, lo: [0.0, 0.0], hi: [lx, h] },
        ],
        2 => vec![Shape::Rect { axis: 2, at: h, lo: [0.0, 0.0], hi: [lx, ly] }],
        _ => {
            let kind = (class - 3) % 5;
            let scale = 1.0 - 0.1 * (((class - 3) / 5) % 4) as f64;
            match kind {
                // tables
                0 => (0..rng.gen_range(2..=3))
                    .map(|_| {
                        let (w, d) = (1.4 * scale, 0.8 * scale);
                        let [x, y] = footprint(room, w, d, rng);
                        Shape::Box { min: [x, y, 0.70], max: [x + w, y + d, 0.76] }
                    })
                    .collect(),
                // chairs
                1 => (0..rng.gen_range(4..=6))
                    .map(|_| {
                        let s = 0.45 * scale;
                        let [x, y] = footprint(room, s, s, rng);
                        Shape::Box { min: [x, y, 0.0], max: [x + s, y + s, 0.45] }
                    })
                    .collect(),
                // bookcases against a wall
                2 => (0..rng.gen_range(1..=2))
                    .map(|_| {
                        let (w, d, top) = (1.2 * scale, 0.35, (2.0 * scale).min(h - 0.2));
                        let (axis, at, inward, start) = wall_spot(room, w, rng);
                        let near = if inward > 0.0 { at + 0.02 } else { at - d - 0.02 };
                        if axis == 0 {
                            Shape::Box { min: [near, start, 0.0], max: [near + d, start + w, top] }
                        } else {
                            Shape::Box { min: [start, near, 0.0], max: [start + w, near + d, top] }
                        }
                    })
                    .collect(),
                // boards slightly proud of a wall
                3 => (0..rng.gen_range(1..=2))
                    .map(|_| {
                        let w = 1.8 * scale;
                        let (axis, at, inward, start) = wall_spot(room, w, rng);
                        Shape::Rect {
                            axis,
                            at: at + 0.03 * inward,
                            lo: [start, 1.0],
                            hi: [start + w, (2.0_f64).min(h - 0.2)],
                        }
                    })
                    .collect(),
                // clutter
                _ => (0..rng.gen_range(3..=5))
                    .map(|_| {
                        let radius = rng.gen_range(0.12..0.3) * scale;
                        let [x, y] = footprint(room, 2.0 * radius, 2.0 * radius, rng);
                        Shape::Sphere {
                            center: [x + radius, y + radius, radius],
                            radius,
                        }
                    })
                    .collect(),
            }
        }
    }
}

/// Per-class inlier counts proportional to surface area, summing to the
/// inlier total, each at least 1% of all points.
fn class_counts(spec: &SceneSpec, areas: &[f64]) -> Vec<usize> {
    let inliers = spec.inlier_count();
    let min = min_class_count(spec.n_points);
    let total_area: f64 = areas.iter().sum();
    let mut counts: Vec<usize> = areas
        .iter()
        .map(|a| ((a / total_area * inliers as f64).floor() as usize).max(min))
        .collect();
    let mut total: usize = counts.iter().sum();
    while total != inliers {
        // largest class absorbs the difference, within the minimum
        let big = (0..counts.len()).max_by_key(|&c| (counts[c], usize::MAX - c)).unwrap_or(0);
        if total < inliers {
            counts[big] += inliers - total;
            total = inliers;
        } else {
            let take = (total - inliers).min(counts[big] - min);
            if take == 0 {
                break;
            }
            counts[big] -= take;
            total -= take;
        }
    }
    counts
}

pub fn gen_synthetic(spec: &SceneSpec) -> Result<PointCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let surface = Normal::new(0.0, spec.surface_noise.max(0.0)).map_err(|e| invalid(e.to_string()))?;
    let tint = Normal::new(0.0, spec.color_noise.max(0.0)).map_err(|e| invalid(e.to_string()))?;

    let mut positions = Vec::with_capacity(spec.n_points);
    let mut colors = Vec::with_capacity(spec.n_points);
    let mut labels = Vec::with_capacity(spec.n_points);
    let jitter_color = |base: [f64; 3], rng: &mut ChaCha8Rng| {
        [
            (base[0] + tint.sample(rng)).clamp(0.0, 1.0),
            (base[1] + tint.sample(rng)).clamp(0.0, 1.0),
            (base[2] + tint.sample(rng)).clamp(0.0, 1.0),
        ]
    };

    let layout: Vec<Vec<Shape>> = (0..spec.n_classes)
        .map(|class| class_shapes(class, spec.room, &mut rng))
        .collect();
    let class_areas: Vec<f64> = layout.iter().map(|s| s.iter().map(Shape::area).sum()).collect();
    for (class, &count) in class_counts(spec, &class_areas).iter().enumerate() {
        let shapes = &layout[class];
        let areas: Vec<f64> = shapes.iter().map(Shape::area).collect();
        let total_area: f64 = areas.iter().sum();
        let base = class_color(class);
        for _ in 0..count {
            let mut pick = rng.gen::<f64>() * total_area;
            let mut s = 0;
            while s + 1 < shapes.len() && pick >= areas[s] {
                pick -= areas[s];
                s += 1;
            }
            let p = shapes[s].sample(&mut rng);
            positions.push([
                p[0] + surface.sample(&mut rng),
                p[1] + surface.sample(&mut rng),
                p[2] + surface.sample(&mut rng),
            ]);
            colors.push(jitter_color(base, &mut rng));
            labels.push(class as u32);
        }
    }

    for _ in 0..spec.outlier_count() {
        positions.push([
            rng.gen::<f64>() * spec.room[0],
            rng.gen::<f64>() * spec.room[1],
            rng.gen::<f64>() * spec.room[2],
        ]);
        colors.push([rng.gen(), rng.gen(), rng.gen()]);
        labels.push(rng.gen_range(0..spec.n_classes as u32));
    }

    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.shuffle(&mut rng);
    let cloud = PointCloud {
        positions: order.iter().map(|&i| positions[i]).collect(),
        colors: order.iter().map(|&i| colors[i]).collect(),
        gt_labels: Some(order.iter().map(|&i| labels[i]).collect()),
    };
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, seed: u64) -> SceneSpec {
        SceneSpec {
            n_points: n,
            seed,
            ..SceneSpec::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_synthetic(&spec(3000, 4)).unwrap();
        let b = gen_synthetic(&spec(3000, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_synthetic(&spec(3000, 5)).unwrap());
    }

    #[test]
    fn every_class_above_one_percent() {
        let c = gen_synthetic(&spec(50_000, 0)).unwrap();
        let mut counts = [0usize; 8];
        c.gt_labels.as_ref().unwrap().iter().for_each(|&l| counts[l as usize] += 1);
        assert!(counts.iter().all(|&k| k >= 500), "{counts:?}");
        assert_eq!(c.len(), 50_000);
    }

    #[test]
    fn infeasible_specs() {
        let e = gen_synthetic(&SceneSpec {
            n_points: 5,
            ..SceneSpec::default()
        })
        .unwrap_err();
        assert!(e.to_string().contains("infeasible spec"), "{e}");
        let e = gen_synthetic(&SceneSpec {
            n_classes: 120,
            n_points: 1000,
            ..SceneSpec::default()
        });
        assert!(matches!(e, Err(Error::InfeasibleSpec(_))));
        assert!(gen_synthetic(&SceneSpec { n_classes: 1, ..spec(100, 0) }).is_err());
    }

    #[test]
    fn many_classes_still_cover() {
        let c = gen_synthetic(&SceneSpec {
            n_classes: 20,
            n_points: 4000,
            ..SceneSpec::default()
        })
        .unwrap();
        let mut counts = vec![0usize; 20];
        c.gt_labels.unwrap().iter().for_each(|&l| counts[l as usize] += 1);
        assert!(counts.iter().all(|&k| k >= 40), "{counts:?}");
    }

    #[test]
    fn colors_in_range() {
        let c = gen_synthetic(&spec(2000, 1)).unwrap();
        assert!(c.colors.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }
}
