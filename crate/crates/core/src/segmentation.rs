//! Mean-shift color segmentation in a cone embedding of HSV space, followed
//! by connected-component extraction of significant regions.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{rgb_to_hsv, RasterImage};

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationParams {
    /// Search window radius in cone-embedded HSV units.
    pub radius: f64,
    /// Minimum number of pixels supporting a palette color.
    pub min_color_count: usize,
    /// Regions smaller than this fraction of the image are discarded.
    pub min_region_fraction: f64,
    pub n_windows: usize,
    pub max_iters: usize,
    pub conv_eps: f64,
    pub rng_seed: u64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            radius: 0.10,
            min_color_count: 50,
            min_region_fraction: 0.05,
            n_windows: 64,
            max_iters: 100,
            conv_eps: 1e-4,
            rng_seed: 0,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid("radius", "must be positive"));
        }
        if !(self.min_region_fraction > 0.0 && self.min_region_fraction < 1.0) {
            return Err(Error::invalid("min_region_fraction", "must lie in (0, 1)"));
        }
        if self.n_windows == 0 {
            return Err(Error::invalid("n_windows", "must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        if self.conv_eps.is_nan() || self.conv_eps <= 0.0 {
            return Err(Error::invalid("conv_eps", "must be positive"));
        }
        Ok(())
    }

    /// Stable textual form, used when fingerprinting an index.
    pub fn canonical(&self) -> String {
        format!(
            "radius={:e} min_color_count={} min_region_fraction={:e} n_windows={} max_iters={} conv_eps={:e} seed={}",
            self.radius,
            self.min_color_count,
            self.min_region_fraction,
            self.n_windows,
            self.max_iters,
            self.conv_eps,
            self.rng_seed
        )
    }
}

/// HSV embedded in a cone: `(s v cos h, s v sin h, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePoint(pub [f64; 3]);

impl FeaturePoint {
    pub fn from_hsv([h, s, v]: [f64; 3]) -> Self {
        let r = s * v;
        let theta = h.to_radians();
        FeaturePoint([r * theta.cos(), r * theta.sin(), v])
    }

    pub fn dist2(&self, other: &FeaturePoint) -> f64 {
        let d = [self.0[0] - other.0[0], self.0[1] - other.0[1], self.0[2] - other.0[2]];
        d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
    }

    pub fn dist(&self, other: &FeaturePoint) -> f64 {
        self.dist2(other).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Palette {
    pub modes: Vec<FeaturePoint>,
    pub counts: Vec<usize>,
}

/// Uniform grid over the point cloud with cells at least `radius` wide, so a
/// ball query only visits the 27 cells around the query point.
struct BallIndex {
    origin: [f64; 3],
    cell: f64,
    dims: [usize; 3],
    starts: Vec<usize>,
    sorted: Vec<[f64; 3]>,
}

impl BallIndex {
    const MAX_CELLS_PER_AXIS: f64 = 128.0;

    fn new(points: &[FeaturePoint], radius: f64) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for k in 0..3 {
                lo[k] = lo[k].min(p.0[k]);
                hi[k] = hi[k].max(p.0[k]);
            }
        }
        let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        let cell = radius.max(extent / Self::MAX_CELLS_PER_AXIS);
        let dims = [0, 1, 2].map(|k| ((hi[k] - lo[k]) / cell) as usize + 1);
        let mut idx = BallIndex {
            origin: lo,
            cell,
            dims,
            starts: Vec::new(),
            sorted: Vec::with_capacity(points.len()),
        };
        let ncells = dims[0] * dims[1] * dims[2];
        let cell_of: Vec<usize> = points.iter().map(|p| idx.flat(idx.coords(&p.0))).collect();
        let mut counts = vec![0usize; ncells + 1];
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for i in 0..ncells {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut sorted = vec![[0.0; 3]; points.len()];
        for (p, &c) in points.iter().zip(&cell_of) {
            sorted[fill[c]] = p.0;
            fill[c] += 1;
        }
        idx.starts = counts;
        idx.sorted = sorted;
        idx
    }

    fn coords(&self, p: &[f64; 3]) -> [isize; 3] {
        [0, 1, 2].map(|k| ((p[k] - self.origin[k]) / self.cell).floor() as isize)
    }

    fn flat(&self, c: [isize; 3]) -> usize {
        let [x, y, z] = c.map(|v| v as usize);
        (x * self.dims[1] + y) * self.dims[2] + z
    }

    /// Calls `f` for every indexed point within `radius` of `center`.
    fn for_each_in_ball(&self, center: &[f64; 3], radius: f64, mut f: impl FnMut(&[f64; 3])) {
        let r2 = radius * radius;
        let c = self.coords(center);
        let range = |k: usize| {
            let lo = (c[k] - 1).max(0);
            let hi = (c[k] + 1).min(self.dims[k] as isize - 1);
            lo..=hi
        };
        for x in range(0) {
            for y in range(1) {
                let base = self.flat([x, y, 0]);
                let zr = range(2);
                if zr.is_empty() {
                    continue;
                }
                let (z0, z1) = (*zr.start() as usize, *zr.end() as usize);
                for p in &self.sorted[self.starts[base + z0]..self.starts[base + z1 + 1]] {
                    let d0 = p[0] - center[0];
                    let d1 = p[1] - center[1];
                    let d2 = p[2] - center[2];
                    if d0 * d0 + d1 * d1 + d2 * d2 <= r2 {
                        f(p);
                    }
                }
            }
        }
    }

    fn ball_mean(&self, center: &[f64; 3], radius: f64) -> Option<([f64; 3], usize)> {
        let mut sum = [0.0; 3];
        let mut n = 0usize;
        self.for_each_in_ball(center, radius, |p| {
            sum[0] += p[0];
            sum[1] += p[1];
            sum[2] += p[2];
            n += 1;
        });
        (n > 0).then(|| (sum.map(|s| s / n as f64), n))
    }
}

/// Flat-kernel mean-shift iterates from `start`, including `start` itself.
pub fn mean_shift_trace(points: &[FeaturePoint], start: FeaturePoint, p: &SegmentationParams) -> Vec<FeaturePoint> {
    let index = BallIndex::new(points, p.radius);
    trace_with(&index, start, p)
}

fn trace_with(index: &BallIndex, start: FeaturePoint, p: &SegmentationParams) -> Vec<FeaturePoint> {
    let mut path = vec![start];
    let mut x = start;
    for _ in 0..p.max_iters {
        let Some((mean, _)) = index.ball_mean(&x.0, p.radius) else {
            break;
        };
        let next = FeaturePoint(mean);
        let shift = next.dist(&x);
        path.push(next);
        x = next;
        if shift < p.conv_eps {
            break;
        }
    }
    path
}

/// Epanechnikov density (up to a constant) at `x`. The flat-kernel mean-shift
/// step is an ascent step on this estimate, so it never decreases along a trace.
pub fn shadow_density(points: &[FeaturePoint], x: &FeaturePoint, radius: f64) -> f64 {
    let r2 = radius * radius;
    points.iter().map(|q| (1.0 - q.dist2(x) / r2).max(0.0)).sum()
}

/// Seeks density modes from seeded random windows, merges nearby modes and
/// drops colors with too little support.
pub fn mean_shift_modes(points: &[FeaturePoint], p: &SegmentationParams) -> Result<Palette> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    let index = BallIndex::new(points, p.radius);
    let mut rng = ChaCha8Rng::seed_from_u64(p.rng_seed);
    let starts: Vec<usize> = (0..p.n_windows).map(|_| rng.gen_range(0..points.len())).collect();

    // Collected in window order regardless of scheduling.
    let converged: Vec<(FeaturePoint, usize)> = starts
        .par_iter()
        .map(|&i| {
            let end = *trace_with(&index, points[i], p).last().unwrap();
            let support = index.ball_mean(&end.0, p.radius).map_or(1, |(_, n)| n);
            (end, support)
        })
        .collect();

    let mut modes: Vec<(FeaturePoint, f64)> = Vec::new();
    for (m, w) in converged {
        modes.push((m, w as f64));
        merge_close(&mut modes, p.radius / 2.0);
    }

    let centers: Vec<FeaturePoint> = modes.iter().map(|m| m.0).collect();
    let counts = nearest_counts(points, &centers);
    let kept: Vec<FeaturePoint> = centers
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c >= p.min_color_count)
        .map(|(m, _)| *m)
        .collect();
    if kept.is_empty() {
        let n = points.len() as f64;
        let mut mean = [0.0; 3];
        for q in points {
            for (m, v) in mean.iter_mut().zip(q.0) {
                *m += v;
            }
        }
        return Ok(Palette {
            modes: vec![FeaturePoint(mean.map(|s| s / n))],
            counts: vec![points.len()],
        });
    }
    // Dropping modes only grows the survivors' counts.
    let counts = nearest_counts(points, &kept);
    Ok(Palette { modes: kept, counts })
}

fn merge_close(modes: &mut Vec<(FeaturePoint, f64)>, min_dist: f64) {
    'outer: loop {
        for i in 0..modes.len() {
            for j in i + 1..modes.len() {
                if modes[i].0.dist(&modes[j].0) < min_dist {
                    let (b, wb) = modes.remove(j);
                    let (a, wa) = modes[i];
                    let w = wa + wb;
                    let merged = [0, 1, 2].map(|k| (a.0[k] * wa + b.0[k] * wb) / w);
                    modes[i] = (FeaturePoint(merged), w);
                    continue 'outer;
                }
            }
        }
        break;
    }
}

fn nearest(point: &FeaturePoint, modes: &[FeaturePoint]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, m) in modes.iter().enumerate() {
        let d = point.dist2(m);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn nearest_counts(points: &[FeaturePoint], modes: &[FeaturePoint]) -> Vec<usize> {
    let mut counts = vec![0; modes.len()];
    for q in points {
        counts[nearest(q, modes)] += 1;
    }
    counts
}

/// Nearest-mode label per point; ties go to the lower mode index.
pub fn assign_to_palette(points: &[FeaturePoint], pal: &Palette) -> Vec<usize> {
    points.par_iter().map(|q| nearest(q, &pal.modes)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<usize>,
}

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BoundingBox {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.right - self.left + 1
    }

    pub fn height(&self) -> usize {
        self.bottom - self.top + 1
    }
}

/// A 4-connected set of pixels sharing one palette label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub label: usize,
    /// Row-major pixel indices, ascending.
    pub mask: Vec<usize>,
    pub area: usize,
    pub bbox: BoundingBox,
    pub image_width: usize,
}

impl Region {
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask.iter().map(|&i| (i / self.image_width, i % self.image_width))
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.mask.binary_search(&(row * self.image_width + col)).is_ok()
    }
}

/// Connected components of equal label, pruned by area and sorted by
/// descending area, then by bounding-box top-left corner.
pub fn extract_regions(labels: &LabelGrid, p: &SegmentationParams) -> Vec<Region> {
    let (w, h) = (labels.width, labels.height);
    let total = w * h;
    let min_area = p.min_region_fraction * total as f64;
    let mut seen = vec![false; total];
    let mut regions = Vec::new();
    let mut queue = VecDeque::new();
    for seed in 0..total {
        if seen[seed] {
            continue;
        }
        let label = labels.labels[seed];
        seen[seed] = true;
        queue.push_back(seed);
        let mut mask = Vec::new();
        while let Some(i) = queue.pop_front() {
            mask.push(i);
            let (r, c) = (i / w, i % w);
            let mut visit = |j: usize| {
                if !seen[j] && labels.labels[j] == label {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if r > 0 {
                visit(i - w);
            }
            if r + 1 < h {
                visit(i + w);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < w {
                visit(i + 1);
            }
        }
        if (mask.len() as f64) < min_area {
            continue;
        }
        mask.sort_unstable();
        let mut bbox = BoundingBox {
            top: usize::MAX,
            left: usize::MAX,
            bottom: 0,
            right: 0,
        };
        for &i in &mask {
            let (r, c) = (i / w, i % w);
            bbox.top = bbox.top.min(r);
            bbox.bottom = bbox.bottom.max(r);
            bbox.left = bbox.left.min(c);
            bbox.right = bbox.right.max(c);
        }
        regions.push(Region {
            label,
            area: mask.len(),
            mask,
            bbox,
            image_width: w,
        });
    }
    regions.sort_by(|a, b| {
        b.area
            .cmp(&a.area)
            .then((a.bbox.top, a.bbox.left).cmp(&(b.bbox.top, b.bbox.left)))
            .then(a.label.cmp(&b.label))
    });
    regions
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub palette: Palette,
    pub labels: LabelGrid,
    pub regions: Vec<Region>,
}

/// HSV conversion, cone embedding, mode seeking, palette assignment and
/// region extraction. Deterministic for a fixed `rng_seed`.
pub fn segment(img: &RasterImage, p: &SegmentationParams) -> Result<Segmentation> {
    let hsv = rgb_to_hsv(img);
    let points: Vec<FeaturePoint> = hsv.pixels().iter().map(|&px| FeaturePoint::from_hsv(px)).collect();
    let palette = mean_shift_modes(&points, p)?;
    let labels = LabelGrid {
        width: img.width(),
        height: img.height(),
        labels: assign_to_palette(&points, &palette),
    };
    let regions = extract_regions(&labels, p);
    Ok(Segmentation {
        palette,
        labels,
        regions,
    })
}

/// Writes an 8-bit binary PGM where pixels of region `i` have value `i + 1`
/// (saturating at 255) and pixels in no significant region are 0.
pub fn write_label_map(path: &Path, width: usize, height: usize, regions: &[Region]) -> Result<()> {
    let mut body = vec![0u8; width * height];
    for (i, r) in regions.iter().enumerate() {
        let v = (i + 1).min(255) as u8;
        for &px in &r.mask {
            body[px] = v;
        }
    }
    let mut out = Vec::with_capacity(body.len() + 32);
    write!(out, "P5\n{width} {height}\n255\n")?;
    out.extend(body);
    std::fs::write(path, out)?;
    Ok(())
}
