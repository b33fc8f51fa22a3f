//! Voxel bucketing, exact radius search and local geometric features.
//!
//! Neighborhood membership is always the strict test `|p - c|^2 < r^2`; the
//! grids here only accelerate it.

use std::collections::HashMap;

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{invalid, Result};
use crate::model::{FeatureField, PointCloud};

pub type VoxelKey = [i64; 3];

/// Number of columns produced by [`local_geometric_features`].
pub const GEOMETRIC_FEATURE_DIM: usize = 8;

#[inline]
pub(crate) fn voxel_key(p: &[f64; 3], edge: f64) -> VoxelKey {
    [
        (p[0] / edge).floor() as i64,
        (p[1] / edge).floor() as i64,
        (p[2] / edge).floor() as i64,
    ]
}

#[inline]
pub(crate) fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Cubic bucketing of a cloud: each point lives in the voxel
/// `floor(position / edge)`.
#[derive(Clone, Debug)]
pub struct VoxelGrid {
    edge: f64,
    buckets: HashMap<VoxelKey, Vec<usize>>,
    point_to_voxel: Vec<VoxelKey>,
}

impl VoxelGrid {
    pub fn build(cloud: &PointCloud, edge: f64) -> Result<Self> {
        build_grid(cloud, edge)
    }

    pub fn edge(&self) -> f64 {
        self.edge
    }

    pub fn n_points(&self) -> usize {
        self.point_to_voxel.len()
    }

    pub fn n_voxels(&self) -> usize {
        self.buckets.len()
    }

    pub fn key_of(&self, index: usize) -> VoxelKey {
        self.point_to_voxel[index]
    }

    /// Member indices of a voxel, ascending.
    pub fn bucket(&self, key: &VoxelKey) -> &[usize] {
        self.buckets.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn buckets(&self) -> impl Iterator<Item = (&VoxelKey, &Vec<usize>)> {
        self.buckets.iter()
    }

    /// Voxel keys sorted ascending, for deterministic traversal.
    pub fn sorted_keys(&self) -> Vec<VoxelKey> {
        let mut keys: Vec<VoxelKey> = self.buckets.keys().copied().collect();
        keys.sort_unstable();
        keys
    }
}

pub fn build_grid(cloud: &PointCloud, edge: f64) -> Result<VoxelGrid> {
    if !(edge > 0.0) || !edge.is_finite() {
        return Err(invalid(format!("voxel edge must be positive, got {edge}")));
    }
    if cloud.is_empty() {
        return Err(invalid("cannot build a voxel grid on an empty cloud"));
    }
    let point_to_voxel: Vec<VoxelKey> = cloud.positions.iter().map(|p| voxel_key(p, edge)).collect();
    let mut buckets: HashMap<VoxelKey, Vec<usize>> = HashMap::new();
    for (i, key) in point_to_voxel.iter().enumerate() {
        buckets.entry(*key).or_default().push(i);
    }
    Ok(VoxelGrid {
        edge,
        buckets,
        point_to_voxel,
    })
}

/// Indices of all points strictly closer than `r` to `center`, ascending.
pub fn radius_neighbors(
    grid: &VoxelGrid,
    cloud: &PointCloud,
    center: &[f64; 3],
    r: f64,
) -> Result<Vec<usize>> {
    if !(r > 0.0) {
        return Err(invalid(format!("radius must be positive, got {r}")));
    }
    let mut out = Vec::new();
    visit_radius(grid, cloud, center, r, |i| out.push(i));
    out.sort_unstable();
    Ok(out)
}

/// Calls `f` for every point strictly within `r` of `center`, in no
/// particular order.
pub(crate) fn visit_radius(
    grid: &VoxelGrid,
    cloud: &PointCloud,
    center: &[f64; 3],
    r: f64,
    mut f: impl FnMut(usize),
) {
    let r2 = r * r;
    let span = (r / grid.edge).floor() as i64 + 1;
    let c = voxel_key(center, grid.edge);
    for x in c[0] - span..=c[0] + span {
        for y in c[1] - span..=c[1] + span {
            for z in c[2] - span..=c[2] + span {
                if let Some(members) = grid.buckets.get(&[x, y, z]) {
                    for &i in members {
                        if dist2(&cloud.positions[i], center) < r2 {
                            f(i);
                        }
                    }
                }
            }
        }
    }
}

/// Per-point descriptor: normalized height, color, covariance eigen-features
/// (linearity, planarity and scattering) and relative local density.
///
/// Neighborhood covariances come from summed raw moments about the cloud
/// centroid, so they agree with [`eigen_features`] up to rounding.
pub fn local_geometric_features(cloud: &PointCloud, radius: f64) -> Result<FeatureField> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(invalid(format!("feature radius must be positive, got {radius}")));
    }
    let n = cloud.len();
    if n == 0 {
        return Ok(FeatureField {
            feats: Vec::new(),
            dim: GEOMETRIC_FEATURE_DIM,
        });
    }
    let mut origin = [0.0; 3];
    for p in &cloud.positions {
        (0..3).for_each(|a| origin[a] += p[a]);
    }
    origin.iter_mut().for_each(|o| *o /= n as f64);
    let mut moments = Vec::with_capacity(n * 9);
    for p in &cloud.positions {
        let (x, y, z) = (p[0] - origin[0], p[1] - origin[1], p[2] - origin[2]);
        moments.extend_from_slice(&[x, y, z, x * x, x * y, x * z, y * y, y * z, z * z]);
    }
    let (sums, counts) = RadiusIndex::new(cloud).sums(&moments, 9, radius)?;

    let (zmin, zmax) = cloud
        .positions
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[2]), hi.max(p[2])));
    let extent = zmax - zmin;
    let mean_count = counts.iter().sum::<usize>() as f64 / n as f64;
    let mut feats = Vec::with_capacity(n * GEOMETRIC_FEATURE_DIM);
    for (i, (m, &count)) in sums.chunks_exact(9).zip(&counts).enumerate() {
        let height = if extent > 0.0 {
            (cloud.positions[i][2] - zmin) / extent
        } else {
            0.0
        };
        feats.push(height);
        feats.extend_from_slice(&cloud.colors[i]);
        feats.extend_from_slice(&moment_features(m, count));
        feats.push(count as f64 / mean_count);
    }
    Ok(FeatureField {
        feats,
        dim: GEOMETRIC_FEATURE_DIM,
    })
}

fn moment_features(m: &[f64], count: usize) -> [f64; 3] {
    if count < 3 {
        return [0.0; 3];
    }
    let k = count as f64;
    let mean = [m[0] / k, m[1] / k, m[2] / k];
    let second = [[m[3], m[4], m[5]], [m[4], m[6], m[7]], [m[5], m[7], m[8]]];
    let cov = Matrix3::from_fn(|a, b| second[a][b] / k - mean[a] * mean[b]);
    spectrum_features(cov, spread_floor(&mean))
}

/// Linearity, planarity and scattering of the neighborhood covariance.
/// Degenerate neighborhoods (fewer than 3 points, zero spread) give zeros.
pub fn eigen_features(cloud: &PointCloud, members: &[usize]) -> [f64; 3] {
    if members.len() < 3 {
        return [0.0; 3];
    }
    let k = members.len() as f64;
    let mut mean = [0.0; 3];
    for &j in members {
        for (m, v) in mean.iter_mut().zip(cloud.positions[j]) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k);
    let mut cov = Matrix3::<f64>::zeros();
    for &j in members {
        let p = cloud.positions[j];
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for a in 0..3 {
            for b in a..3 {
                cov[(a, b)] += d[a] * d[b];
            }
        }
    }
    for a in 0..3 {
        for b in a..3 {
            cov[(a, b)] /= k;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    spectrum_features(cov, spread_floor(&mean))
}

/// Spread below which a covariance counts as zero: the rounding left over
/// from points that coincide up to float precision.
fn spread_floor(mean: &[f64; 3]) -> f64 {
    1e-12 * (1.0 + mean.iter().map(|v| v * v).sum::<f64>())
}

fn spectrum_features(cov: Matrix3<f64>, noise: f64) -> [f64; 3] {
    let eig = SymmetricEigen::new(cov);
    let mut l = [
        eig.eigenvalues[0].max(0.0),
        eig.eigenvalues[1].max(0.0),
        eig.eigenvalues[2].max(0.0),
    ];
    l.sort_unstable_by(|a, b| b.total_cmp(a));
    if !(l[0] > noise) {
        return [0.0; 3];
    }
    [(l[0] - l[1]) / l[0], (l[1] - l[2]) / l[0], l[2] / l[0]]
}

/// Axis-aligned bounds of a node's actual members.
///
/// Box distances are computed with the same per-axis subtractions as
/// [`dist2`], so rounding is monotone: the lower bound never exceeds, and
/// the upper bound is never below, the computed distance of any member pair.
#[derive(Clone, Copy, Debug)]
struct Bounds {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Bounds {
    fn empty() -> Self {
        Bounds {
            lo: [f64::INFINITY; 3],
            hi: [f64::NEG_INFINITY; 3],
        }
    }

    fn include(&mut self, p: &[f64; 3]) {
        for a in 0..3 {
            self.lo[a] = self.lo[a].min(p[a]);
            self.hi[a] = self.hi[a].max(p[a]);
        }
    }

    /// Lower and upper bounds of the squared distance between any member of
    /// `self` and any member of `o`.
    #[inline]
    fn dist2_range(&self, o: &Bounds) -> (f64, f64) {
        let mut near = 0.0;
        let mut far = 0.0;
        for a in 0..3 {
            let gap = (o.lo[a] - self.hi[a]).max(self.lo[a] - o.hi[a]).max(0.0);
            let span = (o.hi[a] - self.lo[a]).max(self.hi[a] - o.lo[a]);
            near += gap * gap;
            far += span * span;
        }
        (near, far)
    }

    fn diameter2(&self) -> f64 {
        (0..3).map(|a| (self.hi[a] - self.lo[a]).powi(2)).sum()
    }
}

const LEAF_SIZE: usize = 16;

/// A kd-tree over a cloud for bulk radius aggregation: points reordered so
/// every node owns a contiguous slot range, with each node's member bounds.
///
/// Built once per cloud and reused for any radius or value table.
#[derive(Clone, Debug)]
pub struct RadiusIndex {
    bounds: Vec<Bounds>,
    /// Sorted slot range of each node.
    range: Vec<(usize, usize)>,
    /// Child node ids; 0 marks a leaf (the root is never a child).
    children: Vec<(usize, usize)>,
    diam2: Vec<f64>,
    /// `order[slot]` is the original point index.
    order: Vec<usize>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    zs: Vec<f64>,
}

impl RadiusIndex {
    pub fn new(cloud: &PointCloud) -> Self {
        let n = cloud.len();
        let mut index = RadiusIndex {
            bounds: Vec::with_capacity(2 * n / LEAF_SIZE + 2),
            range: Vec::new(),
            children: Vec::new(),
            diam2: Vec::new(),
            order: Vec::new(),
            xs: Vec::with_capacity(n),
            ys: Vec::with_capacity(n),
            zs: Vec::with_capacity(n),
        };
        let mut order: Vec<usize> = (0..n).collect();
        if n > 0 {
            index.split(&cloud.positions, &mut order, 0);
        }
        for &i in &order {
            let p = cloud.positions[i];
            index.xs.push(p[0]);
            index.ys.push(p[1]);
            index.zs.push(p[2]);
        }
        index.order = order;
        index.diam2 = index.bounds.iter().map(Bounds::diameter2).collect();
        index
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Builds the subtree over `idx` (sorted slots from `offset`) and returns
    /// its node id. Children are always pushed after their parent.
    fn split(&mut self, positions: &[[f64; 3]], idx: &mut [usize], offset: usize) -> usize {
        let mut bounds = Bounds::empty();
        for &i in idx.iter() {
            bounds.include(&positions[i]);
        }
        let id = self.bounds.len();
        self.bounds.push(bounds);
        self.range.push((offset, offset + idx.len()));
        self.children.push((0, 0));
        if idx.len() <= LEAF_SIZE {
            return id;
        }
        let axis = (0..3)
            .max_by(|&a, &b| {
                (bounds.hi[a] - bounds.lo[a])
                    .total_cmp(&(bounds.hi[b] - bounds.lo[b]))
                    .then(b.cmp(&a))
            })
            .unwrap_or(0);
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            positions[a][axis].total_cmp(&positions[b][axis]).then(a.cmp(&b))
        });
        let (lo, hi) = idx.split_at_mut(mid);
        let left = self.split(positions, lo, offset);
        let right = self.split(positions, hi, offset + mid);
        self.children[id] = (left, right);
        id
    }

    /// Per-point sums of `values` rows (row-major, `width` columns, original
    /// point order) over the strict `r`-neighborhood, plus neighbor counts.
    pub fn sums(&self, values: &[f64], width: usize, r: f64) -> Result<(Vec<f64>, Vec<usize>)> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(invalid(format!("radius must be positive, got {r}")));
        }
        let n = self.len();
        if values.len() != n * width {
            return Err(invalid(format!(
                "{} values do not match {} points of width {}",
                values.len(),
                n,
                width
            )));
        }
        let mut sums = vec![0.0; n * width];
        let mut counts = vec![0; n];
        if n == 0 {
            return Ok((sums, counts));
        }
        if width == 0 {
            self.run::<1>(&vec![0.0; n], 1, 0, &mut vec![0.0; n], &mut counts, r * r);
            return Ok((sums, counts));
        }
        let mut first = 0;
        while first < width {
            let block = (width - first).min(16);
            let (v, s, c) = (values, &mut sums, &mut counts);
            match block {
                1 => self.run::<1>(v, width, first, s, c, r * r),
                2 => self.run::<2>(v, width, first, s, c, r * r),
                3 | 4 => self.run::<4>(v, width, first, s, c, r * r),
                5..=8 => self.run::<8>(v, width, first, s, c, r * r),
                9..=12 => self.run::<12>(v, width, first, s, c, r * r),
                _ => self.run::<16>(v, width, first, s, c, r * r),
            }
            first += block;
        }
        Ok((sums, counts))
    }

    /// Aggregates columns `first..first + W` (zero-padded past `width`) into
    /// the matching columns of `out`; counts are overwritten.
    fn run<const W: usize>(
        &self,
        values: &[f64],
        width: usize,
        first: usize,
        out: &mut [f64],
        counts: &mut [usize],
        r2: f64,
    ) {
        let n = self.len();
        let cols = W.min(width - first);
        let mut vals = vec![[0.0; W]; n];
        for (slot, &i) in self.order.iter().enumerate() {
            vals[slot][..cols].copy_from_slice(&values[i * width + first..i * width + first + cols]);
        }
        let mut node_vals = vec![[0.0; W]; self.bounds.len()];
        for id in (0..self.bounds.len()).rev() {
            let (left, right) = self.children[id];
            let mut acc = [0.0; W];
            if left == 0 {
                let (start, end) = self.range[id];
                vals[start..end].iter().for_each(|v| add(&mut acc, v));
            } else {
                add(&mut acc, &node_vals[left]);
                add(&mut acc, &node_vals[right]);
            }
            node_vals[id] = acc;
        }
        let mut pass = Pass {
            index: self,
            vals,
            node_vals,
            node_sums: vec![[0.0; W]; self.bounds.len()],
            node_counts: vec![0; self.bounds.len()],
            slot_sums: vec![[0.0; W]; n],
            slot_counts: vec![0; n],
            r2,
        };
        pass.pair(0, 0);

        // push node totals down to the slots
        for id in 0..self.bounds.len() {
            let (left, right) = self.children[id];
            if left != 0 {
                let (shared, count) = (pass.node_sums[id], pass.node_counts[id]);
                for child in [left, right] {
                    add(&mut pass.node_sums[child], &shared);
                    pass.node_counts[child] += count;
                }
                continue;
            }
            let (start, end) = self.range[id];
            for slot in start..end {
                let i = self.order[slot];
                counts[i] = pass.slot_counts[slot] + pass.node_counts[id];
                let mut row = pass.slot_sums[slot];
                add(&mut row, &pass.node_sums[id]);
                out[i * width + first..i * width + first + cols].copy_from_slice(&row[..cols]);
            }
        }
    }
}

#[inline(always)]
fn add<const W: usize>(dst: &mut [f64; W], src: &[f64; W]) {
    for k in 0..W {
        dst[k] += src[k];
    }
}

/// One aggregation over a [`RadiusIndex`]: neighborhood sums collected per
/// node (shared by all of its points) and per slot.
struct Pass<'a, const W: usize> {
    index: &'a RadiusIndex,
    vals: Vec<[f64; W]>,
    node_vals: Vec<[f64; W]>,
    node_sums: Vec<[f64; W]>,
    node_counts: Vec<usize>,
    slot_sums: Vec<[f64; W]>,
    slot_counts: Vec<usize>,
    r2: f64,
}

impl<const W: usize> Pass<'_, W> {
    fn size(&self, id: usize) -> usize {
        let (start, end) = self.index.range[id];
        end - start
    }

    /// Accounts for every pair (p in `a`, q in `b`) within range, both ways.
    /// With `a == b` each unordered pair, and each point with itself, is
    /// counted once per direction.
    fn pair(&mut self, a: usize, b: usize) {
        let ix = self.index;
        let (near, far) = ix.bounds[a].dist2_range(&ix.bounds[b]);
        if near >= self.r2 {
            return;
        }
        if far < self.r2 {
            let (sa, sb) = (self.node_vals[a], self.node_vals[b]);
            add(&mut self.node_sums[a], &sb);
            self.node_counts[a] += self.size(b);
            if a != b {
                add(&mut self.node_sums[b], &sa);
                self.node_counts[b] += self.size(a);
            }
            return;
        }
        let (al, ar) = ix.children[a];
        let (bl, br) = ix.children[b];
        match (al == 0, bl == 0) {
            (true, true) if a == b => self.leaf_self(a),
            (true, true) => self.leaf_pair(a, b),
            _ if a == b => {
                self.pair(al, al);
                self.pair(al, ar);
                self.pair(ar, ar);
            }
            (false, true) => {
                self.pair(al, b);
                self.pair(ar, b);
            }
            (true, false) => {
                self.pair(a, bl);
                self.pair(a, br);
            }
            (false, false) => {
                if ix.diam2[a] >= ix.diam2[b] {
                    self.pair(al, b);
                    self.pair(ar, b);
                } else {
                    self.pair(a, bl);
                    self.pair(a, br);
                }
            }
        }
    }

    fn leaf_self(&mut self, a: usize) {
        let ix = self.index;
        let (a0, a1) = ix.range[a];
        for s in a0..a1 {
            let own = self.vals[s];
            add(&mut self.slot_sums[s], &own);
            self.slot_counts[s] += 1;
            for t in s + 1..a1 {
                let (dx, dy, dz) = (ix.xs[t] - ix.xs[s], ix.ys[t] - ix.ys[s], ix.zs[t] - ix.zs[s]);
                if dx * dx + dy * dy + dz * dz < self.r2 {
                    self.exchange(s, t);
                }
            }
        }
    }

    /// Points of leaf `a` against leaf `b`. Each point is first classified
    /// against the other leaf's box: wholly inside or outside the radius is
    /// settled in bulk, and only ambiguous pairs are checked one by one.
    fn leaf_pair(&mut self, a: usize, b: usize) {
        let ix = self.index;
        let (a0, a1) = ix.range[a];
        let (b0, b1) = ix.range[b];
        let (ba, bb) = (ix.bounds[a], ix.bounds[b]);

        let mut inner = [0usize; LEAF_SIZE];
        let mut n_inner = 0;
        let mut inner_sum = [0.0; W];
        let mut amb = [0usize; LEAF_SIZE];
        let (mut ax, mut ay, mut az) = ([0.0; LEAF_SIZE], [0.0; LEAF_SIZE], [0.0; LEAF_SIZE]);
        let mut n_amb = 0;
        for t in b0..b1 {
            let p = [ix.xs[t], ix.ys[t], ix.zs[t]];
            let (near, far) = Bounds { lo: p, hi: p }.dist2_range(&ba);
            if near >= self.r2 {
                continue;
            }
            if far < self.r2 {
                inner[n_inner] = t;
                n_inner += 1;
                add(&mut inner_sum, &self.vals[t]);
            } else {
                (amb[n_amb], ax[n_amb], ay[n_amb], az[n_amb]) = (t, p[0], p[1], p[2]);
                n_amb += 1;
            }
        }

        let mut amb_sum = [0.0; W];
        let mut amb_count = 0;
        let mut hits = [0usize; LEAF_SIZE];
        for s in a0..a1 {
            let p = [ix.xs[s], ix.ys[s], ix.zs[s]];
            let (near, far) = Bounds { lo: p, hi: p }.dist2_range(&bb);
            if near >= self.r2 {
                continue;
            }
            let own = self.vals[s];
            if far < self.r2 {
                let whole = self.node_vals[b];
                add(&mut self.slot_sums[s], &whole);
                self.slot_counts[s] += b1 - b0;
                add(&mut self.node_sums[b], &own);
                self.node_counts[b] += 1;
                continue;
            }
            add(&mut self.slot_sums[s], &inner_sum);
            self.slot_counts[s] += n_inner;
            add(&mut amb_sum, &own);
            amb_count += 1;
            let mut n_hits = 0;
            for k in 0..n_amb {
                let (dx, dy, dz) = (ax[k] - p[0], ay[k] - p[1], az[k] - p[2]);
                hits[n_hits] = k;
                n_hits += usize::from(dx * dx + dy * dy + dz * dz < self.r2);
            }
            for &k in &hits[..n_hits] {
                self.exchange(s, amb[k]);
            }
        }
        for &t in &inner[..n_inner] {
            add(&mut self.slot_sums[t], &amb_sum);
            self.slot_counts[t] += amb_count;
        }
    }

    /// Records that slots `s` and `t` are neighbors of each other.
    #[inline(always)]
    fn exchange(&mut self, s: usize, t: usize) {
        let (vs, vt) = (self.vals[s], self.vals[t]);
        add(&mut self.slot_sums[s], &vt);
        add(&mut self.slot_sums[t], &vs);
        self.slot_counts[s] += 1;
        self.slot_counts[t] += 1;
    }
}

/// For every point, the mean of `values` rows (row-major, `width` columns)
/// over all points strictly within `r` of it, itself included.
///
/// Exact: membership follows the same strict squared-distance test as
/// [`radius_neighbors`]; only the summation order differs from a linear scan.
pub fn neighborhood_means(cloud: &PointCloud, values: &[f64], width: usize, r: f64) -> Result<Vec<f64>> {
    RadiusIndex::new(cloud).means(values, width, r)
}

/// Per-point sums of `values` rows over the strict `r`-neighborhood, plus
/// the neighbor counts.
pub fn neighborhood_sums(cloud: &PointCloud, values: &[f64], width: usize, r: f64) -> Result<(Vec<f64>, Vec<usize>)> {
    RadiusIndex::new(cloud).sums(values, width, r)
}

impl RadiusIndex {
    /// Neighborhood means; see [`neighborhood_means`].
    pub fn means(&self, values: &[f64], width: usize, r: f64) -> Result<Vec<f64>> {
        let (mut sums, counts) = self.sums(values, width, r)?;
        if width > 0 {
            for (row, &count) in sums.chunks_mut(width).zip(&counts) {
                let inv = 1.0 / count as f64;
                row.iter_mut().for_each(|v| *v *= inv);
            }
        }
        Ok(sums)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud_of(points: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(points.to_vec(), vec![[0.5; 3]; points.len()], None).unwrap()
    }

    #[test]
    fn keys_follow_floor() {
        let c = cloud_of(&[[0.0, 0.0, 0.0], [0.05, 0.0, 0.0]]);
        let g = build_grid(&c, 0.1).unwrap();
        assert_eq!(g.key_of(0), [0, 0, 0]);
        assert_eq!(g.key_of(1), [0, 0, 0]);
        assert_eq!(g.bucket(&[0, 0, 0]), &[0, 1]);

        let c = cloud_of(&[[0.0, 0.0, 0.0], [0.15, 0.0, 0.0], [-0.01, 0.0, 0.0]]);
        let g = build_grid(&c, 0.1).unwrap();
        assert_eq!(g.key_of(1), [1, 0, 0]);
        assert_eq!(g.key_of(2), [-1, 0, 0]);
        assert_eq!(g.n_voxels(), 3);
    }

    #[test]
    fn grid_rejects_bad_edge_and_empty_cloud() {
        let c = cloud_of(&[[0.0; 3]]);
        assert!(build_grid(&c, 0.0).is_err());
        assert!(build_grid(&c, -1.0).is_err());
        assert!(build_grid(&c, f64::NAN).is_err());
        assert!(build_grid(&PointCloud::default(), 0.1).is_err());
    }

    #[test]
    fn radius_examples() {
        let c = cloud_of(&[[0.0, 0.0, 0.0], [0.05, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let g = build_grid(&c, 0.1).unwrap();
        assert_eq!(radius_neighbors(&g, &c, &[0.0; 3], 0.1).unwrap(), vec![0, 1]);
        assert_eq!(radius_neighbors(&g, &c, &[0.0; 3], 2.0).unwrap(), vec![0, 1, 2]);
        assert!(radius_neighbors(&g, &c, &[0.0; 3], 0.0).is_err());
    }

    #[test]
    fn boundary_point_excluded() {
        let c = cloud_of(&[[0.0; 3], [0.5, 0.0, 0.0]]);
        let g = build_grid(&c, 0.25).unwrap();
        assert_eq!(radius_neighbors(&g, &c, &[0.0; 3], 0.5).unwrap(), vec![0]);
    }

    #[test]
    fn line_is_purely_linear() {
        let pts: Vec<[f64; 3]> = (0..5).map(|i| [0.1 * i as f64, 0.2 * i as f64, 0.0]).collect();
        let c = cloud_of(&pts);
        let members: Vec<usize> = (0..5).collect();
        let [lin, pla, sca] = eigen_features(&c, &members);
        assert!((lin - 1.0).abs() < 1e-9);
        assert!(pla.abs() < 1e-9);
        assert!(sca.abs() < 1e-9);
    }

    #[test]
    fn plane_has_no_scattering() {
        let pts = [[0.0, 0.0, 1.0], [0.1, 0.0, 1.0], [0.0, 0.1, 1.0], [0.1, 0.13, 1.0], [0.05, 0.02, 1.0]];
        let c = cloud_of(&pts);
        let [_, _, sca] = eigen_features(&c, &[0, 1, 2, 3, 4]);
        assert!(sca.abs() < 1e-9);
    }

    #[test]
    fn isolated_point_has_zero_eigen_features() {
        let c = cloud_of(&[[0.0; 3], [5.0, 0.0, 0.0], [5.01, 0.0, 0.0], [5.0, 0.01, 0.0]]);
        let f = local_geometric_features(&c, 0.1).unwrap();
        assert_eq!(f.dim, GEOMETRIC_FEATURE_DIM);
        assert_eq!(&f.row(0)[4..7], &[0.0, 0.0, 0.0]);
        // the other three see each other: 3 neighbors each, density equals 3 / 2.5
        assert!((f.row(1)[7] - 3.0 / 2.5).abs() < 1e-12);
        assert!((f.row(0)[7] - 1.0 / 2.5).abs() < 1e-12);
    }

    #[test]
    fn flat_cloud_height_is_zero() {
        let c = cloud_of(&[[0.0; 3], [1.0, 0.0, 0.0]]);
        let f = local_geometric_features(&c, 0.5).unwrap();
        assert_eq!(f.row(0)[0], 0.0);
        assert_eq!(f.row(1)[0], 0.0);
    }

    #[test]
    fn neighborhood_means_small_example() {
        let c = cloud_of(&[[0.0; 3], [0.05, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let vals = [1.0, 0.0, 0.0, 1.0, 0.9, 0.1];
        let m = neighborhood_means(&c, &vals, 2, 0.1).unwrap();
        assert_eq!(m, vec![0.5, 0.5, 0.5, 0.5, 0.9, 0.1]);
    }
}
