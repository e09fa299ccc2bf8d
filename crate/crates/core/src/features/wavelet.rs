//! Orthonormal 2-D Haar analysis.

use crate::error::{Error, Result};

/// Square, row-major grid of coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    side: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(side: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != side * side {
            return Err(Error::DimensionMismatch {
                expected: side * side,
                actual: data.len(),
            });
        }
        Ok(Self { side, data })
    }

    pub fn filled(side: usize, value: f64) -> Self {
        Self {
            side,
            data: vec![value; side * side],
        }
    }

    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let data = (0..side * side).map(|i| f(i / side, i % side)).collect();
        Self { side, data }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.side + col]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// One analysis level. `vertical` holds the row-high/column-low band, so a
/// pattern alternating along each row lands there.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarBands {
    pub approx: Grid,
    pub horizontal: Grid,
    pub vertical: Grid,
    pub diagonal: Grid,
}

pub fn haar_dwt2(patch: &Grid) -> Result<HaarBands> {
    let side = patch.side;
    if !side.is_multiple_of(2) {
        return Err(Error::OddSide(side));
    }
    let half = side / 2;
    let n = half * half;
    let (mut a, mut h, mut v, mut d) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..half {
        for j in 0..half {
            let p00 = patch.get(2 * i, 2 * j);
            let p01 = patch.get(2 * i, 2 * j + 1);
            let p10 = patch.get(2 * i + 1, 2 * j);
            let p11 = patch.get(2 * i + 1, 2 * j + 1);
            // (a±b)/sqrt2 along rows then columns collapses to /2 per block
            let k = i * half + j;
            a[k] = (p00 + p01 + p10 + p11) / 2.0;
            h[k] = (p00 + p01 - p10 - p11) / 2.0;
            v[k] = (p00 - p01 + p10 - p11) / 2.0;
            d[k] = (p00 - p01 - p10 + p11) / 2.0;
        }
    }
    let g = |data| Grid { side: half, data };
    Ok(HaarBands {
        approx: g(a),
        horizontal: g(h),
        vertical: g(v),
        diagonal: g(d),
    })
}

/// Detail bands per level (finest first) and the final approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    pub approx: Grid,
    pub details: Vec<DetailBands>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetailBands {
    pub horizontal: Grid,
    pub vertical: Grid,
    pub diagonal: Grid,
}

impl WaveletPyramid {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn coefficient_count(&self) -> usize {
        self.approx.data.len() + self.details.iter().map(|d| d.horizontal.data.len() * 3).sum::<usize>()
    }

    pub fn energy(&self) -> f64 {
        self.approx.energy()
            + self
                .details
                .iter()
                .map(|d| d.horizontal.energy() + d.vertical.energy() + d.diagonal.energy())
                .sum::<f64>()
    }
}

pub fn dwt_multilevel(patch: &Grid, levels: u32) -> Result<WaveletPyramid> {
    let side = patch.side;
    if side == 0 || levels >= usize::BITS || !side.is_multiple_of(1usize << levels) {
        return Err(Error::IncompatibleSize { side, levels });
    }
    let mut approx = patch.clone();
    let mut details = Vec::with_capacity(levels as usize);
    for _ in 0..levels {
        let bands = haar_dwt2(&approx)?;
        details.push(DetailBands {
            horizontal: bands.horizontal,
            vertical: bands.vertical,
            diagonal: bands.diagonal,
        });
        approx = bands.approx;
    }
    Ok(WaveletPyramid { approx, details })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exact synthesis for one level, written from the row/column filter
    /// definition rather than the block formulas above.
    pub(crate) fn haar_idwt2(b: &HaarBands) -> Grid {
        let half = b.approx.side;
        let side = half * 2;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // undo the column pass: low/high rows -> row-filtered planes
        let mut lo = vec![0.0; side * half];
        let mut hi = vec![0.0; side * half];
        for i in 0..half {
            for j in 0..half {
                let (ll, lh) = (b.approx.get(i, j), b.horizontal.get(i, j));
                let (hl, hh) = (b.vertical.get(i, j), b.diagonal.get(i, j));
                lo[(2 * i) * half + j] = (ll + lh) * s;
                lo[(2 * i + 1) * half + j] = (ll - lh) * s;
                hi[(2 * i) * half + j] = (hl + hh) * s;
                hi[(2 * i + 1) * half + j] = (hl - hh) * s;
            }
        }
        let mut out = vec![0.0; side * side];
        for r in 0..side {
            for j in 0..half {
                let (l, h) = (lo[r * half + j], hi[r * half + j]);
                out[r * side + 2 * j] = (l + h) * s;
                out[r * side + 2 * j + 1] = (l - h) * s;
            }
        }
        Grid { side, data: out }
    }

    pub(crate) fn reconstruct(p: &WaveletPyramid) -> Grid {
        let mut approx = p.approx.clone();
        for d in p.details.iter().rev() {
            approx = haar_idwt2(&HaarBands {
                approx,
                horizontal: d.horizontal.clone(),
                vertical: d.vertical.clone(),
                diagonal: d.diagonal.clone(),
            });
        }
        approx
    }

    fn random_grid(side: usize, rng: &mut impl Rng) -> Grid {
        Grid::from_fn(side, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn constant_block() {
        let b = haar_dwt2(&Grid::filled(2, 0.3)).unwrap();
        assert!((b.approx.data[0] - 0.6).abs() < 1e-15);
        assert_eq!([b.horizontal.data[0], b.vertical.data[0], b.diagonal.data[0]], [0.0; 3]);
    }

    #[test]
    fn horizontal_oscillation_goes_to_vertical_band() {
        let b = haar_dwt2(&Grid::new(2, vec![1.0, -1.0, 1.0, -1.0]).unwrap()).unwrap();
        assert_eq!(b.vertical.data, vec![2.0]);
        assert_eq!(b.approx.data, vec![0.0]);
        assert_eq!(b.horizontal.data, vec![0.0]);
        assert_eq!(b.diagonal.data, vec![0.0]);
    }

    #[test]
    fn odd_side_rejected() {
        assert!(matches!(haar_dwt2(&Grid::filled(3, 1.0)), Err(Error::OddSide(3))));
        assert!(matches!(
            dwt_multilevel(&Grid::filled(12, 1.0), 3),
            Err(Error::IncompatibleSize { side: 12, levels: 3 })
        ));
    }

    #[test]
    fn random_single_level_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_grid(8, &mut rng);
        let back = haar_idwt2(&haar_dwt2(&g).unwrap());
        for (a, b) in g.data.iter().zip(&back.data) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_three_levels() {
        let p = dwt_multilevel(&Grid::filled(64, 0.25), 3).unwrap();
        assert_eq!(p.approx.side(), 8);
        assert!(p.approx.data().iter().all(|v| (v - 2.0).abs() < 1e-12));
        for d in &p.details {
            for band in [&d.horizontal, &d.vertical, &d.diagonal] {
                assert!(band.data().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn zero_levels_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_grid(6, &mut rng);
        let p = dwt_multilevel(&g, 0).unwrap();
        assert_eq!(p.approx, g);
        assert_eq!(p.levels(), 0);
    }

    #[test]
    fn critically_sampled_and_energy_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for levels in 0..=6 {
            let g = random_grid(64, &mut rng);
            let p = dwt_multilevel(&g, levels).unwrap();
            assert_eq!(p.coefficient_count(), 64 * 64);
            let side: Vec<usize> = p.details.iter().map(|d| d.horizontal.side()).collect();
            let expected: Vec<usize> = (1..=levels).map(|l| 64 >> l).collect();
            assert_eq!(side, expected);
            let e_in = g.energy();
            assert!((p.energy() - e_in).abs() <= 1e-9 * e_in);
            let back = reconstruct(&p);
            let err = g
                .data
                .iter()
                .zip(&back.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-9);
        }
    }
}
