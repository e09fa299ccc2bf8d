use crate::error::{Error, Result};

/// Mean, population standard deviation and signed cube-root skewness per
/// channel, in the order the channels were supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorMoments {
    pub mean: [f64; 3],
    pub std_dev: [f64; 3],
    pub skewness: [f64; 3],
}

impl ColorMoments {
    /// `[mean, std, skew]` for channel 0, then channel 1, then channel 2.
    pub fn to_array(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for k in 0..3 {
            out[3 * k] = self.mean[k];
            out[3 * k + 1] = self.std_dev[k];
            out[3 * k + 2] = self.skewness[k];
        }
        out
    }
}

pub fn color_moments(pixels: &[[f64; 3]]) -> Result<ColorMoments> {
    if pixels.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let n = pixels.len() as f64;
    // shifted by the first pixel so a constant region gives exact zeros
    let origin = pixels[0];
    let mut shift = [0.0; 3];
    for p in pixels {
        for k in 0..3 {
            shift[k] += p[k] - origin[k];
        }
    }
    let shift = shift.map(|s| s / n);
    let mean = [0, 1, 2].map(|k| origin[k] + shift[k]);

    let mut m2 = [0.0; 3];
    let mut m3 = [0.0; 3];
    for p in pixels {
        for k in 0..3 {
            let d = p[k] - origin[k] - shift[k];
            m2[k] += d * d;
            m3[k] += d * d * d;
        }
    }
    Ok(ColorMoments {
        mean,
        std_dev: m2.map(|s| (s / n).sqrt()),
        // real cube root keeps the sign of the third moment
        skewness: m3.map(|s| (s / n).cbrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn channel(values: &[f64]) -> Vec<[f64; 3]> {
        values.iter().map(|&v| [v, v, v]).collect()
    }

    #[test]
    fn constant_pixels() {
        let m = color_moments(&[[0.2, 0.4, 0.6]; 10]).unwrap();
        assert_eq!(m.std_dev, [0.0; 3]);
        assert_eq!(m.skewness, [0.0; 3]);
        for (a, b) in m.mean.iter().zip([0.2, 0.4, 0.6]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_distribution() {
        let m = color_moments(&channel(&[0.0, 0.0, 1.0, 1.0])).unwrap();
        assert_eq!(m.mean[0], 0.5);
        assert_eq!(m.std_dev[0], 0.5);
        assert_eq!(m.skewness[0], 0.0);
    }

    #[test]
    fn right_tail_and_mirror() {
        // mu = 1/4, sigma = sqrt(3)/4, third moment = 0.09375
        let m = color_moments(&channel(&[0.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(m.mean[0], 0.25);
        assert!((m.std_dev[0] - 3f64.sqrt() / 4.0).abs() < 1e-15);
        assert!((m.skewness[0] - 0.09375f64.cbrt()).abs() < 1e-15);
        assert!(m.skewness[0] > 0.0);
        let mirror = color_moments(&channel(&[1.0, 1.0, 1.0, 0.0])).unwrap();
        assert!((mirror.skewness[0] + m.skewness[0]).abs() < 1e-15);
    }

    #[test]
    fn empty_region() {
        assert!(matches!(color_moments(&[]), Err(Error::EmptyRegion)));
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut px in prop::collection::vec(prop::array::uniform3(0.0f64..1.0), 1..60), seed in any::<u64>()) {
            let a = color_moments(&px).unwrap();
            px.reverse();
            let n = px.len();
            px.rotate_left((seed as usize) % n);
            let b = color_moments(&px).unwrap();
            for k in 0..3 {
                prop_assert!((a.mean[k] - b.mean[k]).abs() < 1e-12);
                prop_assert!((a.std_dev[k] - b.std_dev[k]).abs() < 1e-12);
                // compare third moments; the cube root amplifies rounding near zero
                prop_assert!((a.skewness[k].powi(3) - b.skewness[k].powi(3)).abs() < 1e-12);
                prop_assert!(a.std_dev[k] >= 0.0);
            }
        }
    }
}
