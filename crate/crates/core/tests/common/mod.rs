#![allow(dead_code)]

use alseg::{PointCloud, ProbabilityField};
use rand::Rng;

/// A cloud mixing uniform points, tight clusters, exact duplicates and
/// points on a 5 cm lattice (so many pairs sit at exactly a test radius).
pub fn messy_cloud(rng: &mut impl Rng, n: usize) -> PointCloud {
    let mut positions: Vec<[f64; 3]> = Vec::with_capacity(n);
    while positions.len() < n {
        let p = match rng.gen_range(0..4) {
            0 => [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0), rng.gen_range(0.0..1.0)],
            1 if !positions.is_empty() => {
                let c = positions[rng.gen_range(0..positions.len())];
                [
                    c[0] + rng.gen_range(-0.03..0.03),
                    c[1] + rng.gen_range(-0.03..0.03),
                    c[2] + rng.gen_range(-0.03..0.03),
                ]
            }
            2 if !positions.is_empty() => positions[rng.gen_range(0..positions.len())],
            _ => [
                0.05 * rng.gen_range(0..20) as f64,
                0.05 * rng.gen_range(0..20) as f64,
                0.05 * rng.gen_range(0..4) as f64,
            ],
        };
        positions.push(p);
    }
    let colors = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    PointCloud::new(positions, colors, None).unwrap()
}

pub fn random_probs(rng: &mut impl Rng, n: usize, c: usize) -> ProbabilityField {
    let mut probs = Vec::with_capacity(n * c);
    for _ in 0..n {
        let row: Vec<f64> = (0..c).map(|_| rng.gen::<f64>().powi(3)).collect();
        let s: f64 = row.iter().sum::<f64>().max(1e-300);
        probs.extend(row.iter().map(|v| v / s));
    }
    ProbabilityField::new(probs, c).unwrap()
}

pub fn brute_neighbors(cloud: &PointCloud, center: &[f64; 3], r: f64) -> Vec<usize> {
    (0..cloud.len())
        .filter(|&j| {
            let p = cloud.positions[j];
            let (dx, dy, dz) = (p[0] - center[0], p[1] - center[1], p[2] - center[2]);
            dx * dx + dy * dy + dz * dz < r * r
        })
        .collect()
}

/// Margin by sorting a copy of the row.
pub fn brute_margin(row: &[f64]) -> f64 {
    if row.len() == 1 {
        return 1.0;
    }
    let mut v = row.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v[0] - v[1]
}

pub fn brute_context(cloud: &PointCloud, probs: &ProbabilityField, i: usize, r: f64) -> Vec<f64> {
    let members = brute_neighbors(cloud, &cloud.positions[i], r);
    let c = probs.n_classes;
    let mut acc = vec![0.0; c];
    for &j in &members {
        for k in 0..c {
            acc[k] += probs.probs[j * c + k];
        }
    }
    acc.iter().map(|a| a / members.len() as f64).collect()
}
