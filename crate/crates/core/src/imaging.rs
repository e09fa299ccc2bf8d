//! Raster images, HSV conversion and the preprocessing chain applied to
//! every image before segmentation.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// An RGB image with channel values in `[0, 1]`, stored row-major and
/// interleaved (`r, g, b, r, g, b, ...`).
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyInput);
        }
        if data.len() != width * height * 3 {
            return Err(Error::DimensionMismatch {
                expected: width * height * 3,
                actual: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid("pixel", format!("channel value {v} outside [0,1]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for row in 0..height {
            for col in 0..width {
                data.extend(f(row, col).map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    /// Quantizes to 8-bit and writes a binary PPM (P6, maxval 255).
    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(self.data.len() + 32);
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        out.extend(self.data.iter().map(|v| (v * 255.0).round() as u8));
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Per-pixel `(h, s, v)` with `h` in degrees `[0, 360)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsvImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl HsvImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        self.data[row * self.width + col]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessParams {
    pub target_size: usize,
    pub gaussian_sigma: f64,
    pub gaussian_kernel: usize,
    pub equalize: bool,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            target_size: 256,
            gaussian_sigma: 1.0,
            gaussian_kernel: 5,
            equalize: true,
        }
    }
}

impl PreprocessParams {
    pub fn validate(&self) -> Result<()> {
        if self.target_size < 16 {
            return Err(Error::invalid("target_size", "must be at least 16"));
        }
        if self.gaussian_kernel < 3 || self.gaussian_kernel.is_multiple_of(2) {
            return Err(Error::invalid("gaussian_kernel", "must be odd and at least 3"));
        }
        if self.gaussian_sigma.is_nan() || self.gaussian_sigma <= 0.0 {
            return Err(Error::invalid("gaussian_sigma", "must be positive"));
        }
        Ok(())
    }
}

enum Format {
    Png,
    Jpeg,
    Ppm,
}

fn sniff(bytes: &[u8]) -> Option<Format> {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        Some(Format::Png)
    } else if bytes.starts_with(&[0xff, 0xd8]) {
        Some(Format::Jpeg)
    } else if bytes.starts_with(b"P6") {
        Some(Format::Ppm)
    } else {
        None
    }
}

/// Decodes a PNG, JPEG or binary PPM file into an RGB image scaled to `[0, 1]`.
pub fn load_image(path: &Path) -> Result<RasterImage> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::FileNotFound(path.to_path_buf())),
        Err(e) => return Err(e.into()),
    };
    let corrupt = |reason: String| Error::CorruptImage {
        path: path.to_path_buf(),
        reason,
    };
    match sniff(&bytes) {
        Some(Format::Ppm) => decode_ppm(&bytes).map_err(corrupt),
        Some(fmt) => {
            let fmt = match fmt {
                Format::Png => image::ImageFormat::Png,
                _ => image::ImageFormat::Jpeg,
            };
            let img = image::load_from_memory_with_format(&bytes, fmt)
                .map_err(|e| corrupt(e.to_string()))?
                .to_rgb8();
            let (w, h) = img.dimensions();
            if w == 0 || h == 0 {
                return Err(corrupt("zero-sized image".into()));
            }
            let data = img.into_raw().into_iter().map(|b| f64::from(b) / 255.0).collect();
            Ok(RasterImage {
                width: w as usize,
                height: h as usize,
                data,
            })
        }
        None => Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
}

/// Parses a binary P6 PPM with maxval in `1..=255`.
pub fn decode_ppm(bytes: &[u8]) -> std::result::Result<RasterImage, String> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err("malformed PPM header".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or("malformed PPM header")?;
    }
    let [width, height, maxval] = fields;
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("malformed PPM header".into());
    }
    pos += 1;
    if width == 0 || height == 0 {
        return Err("zero-sized image".into());
    }
    if !(1..=255).contains(&maxval) {
        return Err(format!("unsupported maxval {maxval}"));
    }
    let n = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or("image too large")?;
    let body = &bytes[pos..];
    if body.len() < n {
        return Err(format!("truncated pixel data: {} of {n} bytes", body.len()));
    }
    let scale = maxval as f64;
    let data = body[..n].iter().map(|&b| (f64::from(b) / scale).min(1.0)).collect();
    Ok(RasterImage { width, height, data })
}

/// Hexcone RGB to HSV for a single pixel. Achromatic pixels get `h = 0`.
pub fn rgb_to_hsv_pixel([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta <= 0.0 {
        return [0.0, 0.0, v];
    }
    let sector = if max == r {
        (g - b) / delta
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = 60.0 * sector;
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h -= 360.0;
    }
    [h, s, v]
}

pub fn hsv_to_rgb_pixel([h, s, v]: [f64; 3]) -> [f64; 3] {
    if s <= 0.0 {
        return [v, v, v];
    }
    let hp = (h.rem_euclid(360.0)) / 60.0;
    let sector = hp.floor();
    let frac = hp - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * frac);
    let t = v * (1.0 - s * (1.0 - frac));
    match sector as u32 % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

pub fn rgb_to_hsv(img: &RasterImage) -> HsvImage {
    HsvImage {
        width: img.width,
        height: img.height,
        data: img.pixels().map(rgb_to_hsv_pixel).collect(),
    }
}

pub fn hsv_to_rgb(img: &HsvImage) -> RasterImage {
    let data = img
        .data
        .iter()
        .flat_map(|&p| hsv_to_rgb_pixel(p).map(|c| c.clamp(0.0, 1.0)))
        .collect();
    RasterImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Resize, V-channel histogram equalization, then Gaussian blur.
pub fn preprocess(img: &RasterImage, p: &PreprocessParams) -> RasterImage {
    let mut out = resize_bilinear(img, p.target_size, p.target_size);
    if p.equalize {
        let mut hsv = rgb_to_hsv(&out);
        equalize_value(&mut hsv);
        out = hsv_to_rgb(&hsv);
    }
    let kernel = gaussian_kernel(p.gaussian_kernel, p.gaussian_sigma);
    let mut out = blur_separable(&out, &kernel);
    for v in &mut out.data {
        *v = v.clamp(0.0, 1.0);
    }
    out
}

/// Bilinear resampling with pixel-center alignment and clamped borders.
/// Resizing to the same dimensions is an exact copy.
pub fn resize_bilinear(img: &RasterImage, width: usize, height: usize) -> RasterImage {
    if img.width == width && img.height == height {
        return img.clone();
    }
    let sx = img.width as f64 / width as f64;
    let sy = img.height as f64 / height as f64;
    let mut data = Vec::with_capacity(width * height * 3);
    for row in 0..height {
        let (y0, y1, fy) = sample_axis(row, sy, img.height);
        for col in 0..width {
            let (x0, x1, fx) = sample_axis(col, sx, img.width);
            let p00 = img.pixel(y0, x0);
            let p01 = img.pixel(y0, x1);
            let p10 = img.pixel(y1, x0);
            let p11 = img.pixel(y1, x1);
            for c in 0..3 {
                let top = p00[c] + (p01[c] - p00[c]) * fx;
                let bottom = p10[c] + (p11[c] - p10[c]) * fx;
                data.push(top + (bottom - top) * fy);
            }
        }
    }
    RasterImage { width, height, data }
}

pub(crate) fn sample_axis(dst: usize, scale: f64, len: usize) -> (usize, usize, f64) {
    let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
    let i0 = src.floor() as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, src - i0 as f64)
}

/// 256-bin CDF equalization of V: each value is replaced by the fraction of
/// pixels whose bin is at or below its own.
pub fn equalize_value(img: &mut HsvImage) {
    let bin = |v: f64| ((v * 256.0) as usize).min(255);
    let mut hist = [0usize; 256];
    for p in &img.data {
        hist[bin(p[2])] += 1;
    }
    let total = img.data.len() as f64;
    let mut cdf = [0.0; 256];
    let mut acc = 0usize;
    for (c, h) in cdf.iter_mut().zip(hist) {
        acc += h;
        *c = acc as f64 / total;
    }
    for p in &mut img.data {
        p[2] = cdf[bin(p[2])];
    }
}

/// Normalized 1-D Gaussian taps of odd length `size`.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as isize;
    let mut k: Vec<f64> = (-half..=half)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Separable convolution over rows then columns with edge replication.
pub fn blur_separable(img: &RasterImage, kernel: &[f64]) -> RasterImage {
    let (w, h) = (img.width, img.height);
    let half = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; img.data.len()];
    for row in 0..h {
        for col in 0..w {
            let mut acc = [0.0; 3];
            for (k, wt) in kernel.iter().enumerate() {
                let x = (col as isize + k as isize - half).clamp(0, w as isize - 1) as usize;
                let i = (row * w + x) * 3;
                for (a, v) in acc.iter_mut().zip(&img.data[i..i + 3]) {
                    *a += wt * v;
                }
            }
            tmp[(row * w + col) * 3..][..3].copy_from_slice(&acc);
        }
    }
    let mut data = vec![0.0; img.data.len()];
    for row in 0..h {
        for col in 0..w {
            let mut acc = [0.0; 3];
            for (k, wt) in kernel.iter().enumerate() {
                let y = (row as isize + k as isize - half).clamp(0, h as isize - 1) as usize;
                let i = (y * w + col) * 3;
                for c in 0..3 {
                    acc[c] += wt * tmp[i + c];
                }
            }
            data[(row * w + col) * 3..][..3].copy_from_slice(&acc);
        }
    }
    RasterImage {
        width: w,
        height: h,
        data,
    }
}
