//! Seeded synthetic scenes for training and testing the classifier. Each
//! image holds one or two horizontal bands, each drawn from a category
//! recipe with its own hue range and texture.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{hsv_to_rgb_pixel, RasterImage};
use crate::mlnn::DEFAULT_CATEGORIES;
use crate::pipeline::{analyze_raster, PipelineParams};

const BATCH: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub train_regions: usize,
    pub test_regions: usize,
    pub pipeline: PipelineParams,
    /// Minimum share of a region's pixels that must come from one category
    /// before it is listed in a manifest.
    pub min_purity: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            train_regions: 200,
            test_regions: 500,
            pipeline: PipelineParams::default(),
            min_purity: 0.9,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynthSummary {
    pub train_images: usize,
    pub test_images: usize,
    pub train_lines: usize,
    pub test_lines: usize,
}

/// Hue interval in degrees from which each category draws its base hue.
pub fn hue_range(category: usize) -> (f64, f64) {
    match category {
        0 => (205.0, 230.0), // Sky
        1 => (10.0, 25.0),   // Building
        2 => (32.0, 52.0),   // Sand/Rock
        3 => (90.0, 135.0),  // Grass
        _ => (175.0, 195.0), // Water
    }
}

/// Smooth noise in `[-1, 1]`: random lattice values, bilinearly interpolated.
struct ValueNoise {
    cell: f64,
    cols: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut impl Rng, size: usize, cell: f64) -> Self {
        let cols = (size as f64 / cell) as usize + 2;
        let lattice = (0..cols * cols).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Self { cell, cols, lattice }
    }

    fn at(&self, row: usize, col: usize) -> f64 {
        let (y, x) = (row as f64 / self.cell, col as f64 / self.cell);
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (fy, fx) = (y - y0 as f64, x - x0 as f64);
        let g = |r: usize, c: usize| self.lattice[r * self.cols + c];
        let top = g(y0, x0) + (g(y0, x0 + 1) - g(y0, x0)) * fx;
        let bot = g(y0 + 1, x0) + (g(y0 + 1, x0 + 1) - g(y0 + 1, x0)) * fx;
        top + (bot - top) * fy
    }
}

enum Texture {
    Sky {
        drift: ValueNoise,
        tilt: f64,
    },
    Building {
        spacing: (usize, usize),
        window: (usize, usize),
        offset: (usize, usize),
    },
    Sand {
        hue: ValueNoise,
        sat: ValueNoise,
    },
    Grass,
    Water {
        freq: (f64, f64),
        phase: f64,
        sat_freq: f64,
    },
}

/// One band's recipe: base HSV plus a category-specific texture.
struct Band {
    hue: f64,
    sat: f64,
    val: f64,
    texture: Texture,
}

impl Band {
    fn new(category: usize, size: usize, rng: &mut impl Rng) -> Self {
        let (lo, hi) = hue_range(category);
        let hue = rng.gen_range(lo..=hi);
        let (sat, val, texture) = match category {
            0 => (
                rng.gen_range(0.35..0.6),
                rng.gen_range(0.85..=1.0),
                Texture::Sky {
                    drift: ValueNoise::new(rng, size, 64.0),
                    tilt: rng.gen_range(-0.06..0.06),
                },
            ),
            1 => (
                rng.gen_range(0.12..0.25),
                rng.gen_range(0.45..0.7),
                Texture::Building {
                    spacing: (rng.gen_range(24..=40), rng.gen_range(24..=40)),
                    window: (rng.gen_range(8..=14), rng.gen_range(8..=14)),
                    offset: (rng.gen_range(0..24), rng.gen_range(0..24)),
                },
            ),
            2 => (
                rng.gen_range(0.35..0.6),
                rng.gen_range(0.6..0.85),
                Texture::Sand {
                    hue: ValueNoise::new(rng, size, 8.0),
                    sat: ValueNoise::new(rng, size, 8.0),
                },
            ),
            3 => (rng.gen_range(0.5..0.8), rng.gen_range(0.4..0.7), Texture::Grass),
            _ => (
                rng.gen_range(0.45..0.7),
                rng.gen_range(0.55..0.8),
                Texture::Water {
                    freq: (1.0 / rng.gen_range(10.0..20.0), 1.0 / rng.gen_range(10.0..20.0)),
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                    sat_freq: 1.0 / rng.gen_range(12.0..24.0),
                },
            ),
        };
        Band { hue, sat, val, texture }
    }

    fn pixel(&self, row: usize, col: usize, size: usize, rng: &mut impl Rng) -> [f64; 3] {
        use std::f64::consts::TAU;
        let (mut h, mut s, mut v) = (self.hue, self.sat, self.val);
        match &self.texture {
            Texture::Sky { drift, tilt } => {
                h += 1.5 * drift.at(row, col);
                s += tilt * (row as f64 / size as f64 - 0.5);
            }
            Texture::Building {
                spacing,
                window,
                offset,
            } => {
                let r = (row + offset.0) % spacing.0;
                let c = (col + offset.1) % spacing.1;
                if r < window.0 && c < window.1 {
                    v *= 0.4;
                    s *= 0.5;
                }
            }
            Texture::Sand { hue, sat } => {
                h += 3.0 * hue.at(row, col);
                s += 0.07 * sat.at(row, col) + rng.gen_range(-0.02..0.02);
            }
            Texture::Grass => {
                h += rng.gen_range(-10.0..10.0);
                s += rng.gen_range(-0.08..0.08);
            }
            Texture::Water { freq, phase, sat_freq } => {
                h += 4.0 * (TAU * (col as f64 * freq.0 + row as f64 * freq.1) + phase).sin();
                s += 0.05 * (TAU * row as f64 * sat_freq).sin();
            }
        }
        [h.rem_euclid(360.0), s.clamp(0.0, 1.0), v]
    }
}

/// A rendered scene with its per-pixel category (0-based).
pub struct Scene {
    pub image: RasterImage,
    pub truth: Vec<u8>,
    pub categories: Vec<usize>,
}

/// Renders scene `index` of a split. The primary category cycles through
/// all categories so splits stay balanced; half the scenes get a second band.
pub fn render_scene(seed: u64, split: u64, index: usize, size: usize) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((split << 32) | index as u64);
    let n = DEFAULT_CATEGORIES.len();
    let primary = index % n;
    let secondary = rng.gen_bool(0.5).then(|| (primary + rng.gen_range(1..n)) % n);
    let mut cats = vec![primary];
    cats.extend(secondary);
    if cats.len() == 2 && rng.gen_bool(0.5) {
        cats.swap(0, 1);
    }
    let bands: Vec<Band> = cats.iter().map(|&c| Band::new(c, size, &mut rng)).collect();
    let split_row = rng.gen_range(0.35..0.65) * size as f64;
    let amp = rng.gen_range(0.0..8.0);
    let period = rng.gen_range(60.0..160.0);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);

    let mut truth = Vec::with_capacity(size * size);
    let mut data = Vec::with_capacity(size * size * 3);
    for row in 0..size {
        for col in 0..size {
            let edge = split_row + amp * (std::f64::consts::TAU * col as f64 / period + phase).sin();
            let b = usize::from(bands.len() == 2 && row as f64 >= edge);
            truth.push(cats[b] as u8);
            let rgb = hsv_to_rgb_pixel(bands[b].pixel(row, col, size, &mut rng));
            // 8-bit values, so the PPM on disk decodes to this exact image
            data.extend(rgb.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() / 255.0));
        }
    }
    Scene {
        image: RasterImage::new(size, size, data).expect("valid scene"),
        truth,
        categories: cats,
    }
}

/// Majority category and its share of the region's pixels.
fn region_truth(truth: &[u8], mask: &[usize]) -> (usize, f64) {
    let mut counts = [0usize; 256];
    for &i in mask {
        counts[truth[i] as usize] += 1;
    }
    let (cat, n) = counts
        .iter()
        .enumerate()
        .max_by_key(|(i, n)| (**n, usize::MAX - i))
        .unwrap();
    (cat, *n as f64 / mask.len() as f64)
}

fn quotas(total: usize, n: usize) -> Vec<usize> {
    (0..n).map(|i| total / n + usize::from(i < total % n)).collect()
}

struct SplitOutput {
    images: usize,
    manifest: String,
    truth: String,
    lines: usize,
}

fn generate_split(out: &Path, name: &str, split: u64, total: usize, cfg: &SynthConfig) -> Result<SplitOutput> {
    let dir = out.join(name);
    std::fs::create_dir_all(&dir)?;
    let n = DEFAULT_CATEGORIES.len();
    let mut remaining = quotas(total, n);
    let size = cfg.pipeline.preprocess.target_size;
    let max_scenes = 50 * total.max(1);
    let mut result = SplitOutput {
        images: 0,
        manifest: String::new(),
        truth: String::new(),
        lines: 0,
    };
    let mut next = 0;
    while remaining.iter().any(|&q| q > 0) {
        if next >= max_scenes {
            return Err(Error::invalid(
                "synth",
                format!("could not fill the {name} manifest within {max_scenes} scenes"),
            ));
        }
        let batch: Vec<(usize, Scene, Result<Vec<_>>)> = (next..next + BATCH)
            .into_par_iter()
            .map(|i| {
                let scene = render_scene(cfg.seed, split, i, size);
                let regions = analyze_raster(&scene.image, &cfg.pipeline).map(|a| {
                    a.segmentation
                        .regions
                        .iter()
                        .map(|r| region_truth(&scene.truth, &r.mask))
                        .collect()
                });
                (i, scene, regions)
            })
            .collect();
        next += BATCH;
        for (i, scene, regions) in batch {
            let regions = regions?;
            let file = format!("{i:05}.ppm");
            let mut used = false;
            for (idx, (cat, purity)) in regions.into_iter().enumerate() {
                if purity < cfg.min_purity || remaining[cat] == 0 {
                    continue;
                }
                remaining[cat] -= 1;
                used = true;
                result.lines += 1;
                let _ = writeln!(result.manifest, "{name}/{file}\t{idx}\t{}", DEFAULT_CATEGORIES[cat]);
            }
            if used {
                scene.image.write_ppm(&dir.join(&file))?;
                let mut cats = scene.categories.clone();
                cats.sort_unstable();
                let names: Vec<&str> = cats.iter().map(|&c| DEFAULT_CATEGORIES[c]).collect();
                let _ = writeln!(result.truth, "{file}\t{}", names.join(","));
                result.images += 1;
            }
            if remaining.iter().all(|&q| q == 0) {
                break;
            }
        }
    }
    Ok(result)
}

/// Writes `train/` and `test/` image directories, `train.tsv` and
/// `test.tsv` region manifests, and `*_truth.tsv` files listing each
/// image's generating categories.
pub fn generate_dataset(out: &Path, cfg: &SynthConfig) -> Result<SynthSummary> {
    cfg.pipeline.validate()?;
    std::fs::create_dir_all(out)?;
    let train = generate_split(out, "train", 0, cfg.train_regions, cfg)?;
    let test = generate_split(out, "test", 1, cfg.test_regions, cfg)?;
    for (name, s) in [("train", &train), ("test", &test)] {
        std::fs::write(out.join(format!("{name}.tsv")), &s.manifest)?;
        std::fs::write(out.join(format!("{name}_truth.tsv")), &s.truth)?;
    }
    Ok(SynthSummary {
        train_images: train.images,
        test_images: test.images,
        train_lines: train.lines,
        test_lines: test.lines,
    })
}
