use alloc::vec;
use alloc::vec::Vec;

use crate::frame::{Channel, Frame};

/// Summed-area table with a zero first row and column.
///
/// `at(x, y)` is the sum of every pixel strictly above and strictly left of
/// `(x, y)`, so any rectangle sum takes four lookups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    table: Vec<u64>,
}

impl IntegralImage {
    /// Builds the table over `width × height` values produced by `pixel(x, y)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut pixel: impl FnMut(usize, usize) -> u64,
    ) -> Self {
        let stride = width + 1;
        let mut table = vec![0u64; stride * (height + 1)];
        for y in 0..height {
            let mut row_sum = 0u64;
            for x in 0..width {
                row_sum += pixel(x, y);
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row_sum;
            }
        }
        IntegralImage {
            width,
            height,
            table,
        }
    }

    /// Row-major 8-bit grayscale input.
    pub fn from_gray(width: usize, height: usize, pixels: &[u8]) -> Self {
        assert_eq!(pixels.len(), width * height, "gray buffer size");
        Self::from_fn(width, height, |x, y| u64::from(pixels[y * width + x]))
    }

    pub fn from_frame(frame: &Frame<'_>, channel: Channel) -> Self {
        Self::from_fn(frame.width(), frame.height(), |x, y| {
            u64::from(frame.sample(x, y, channel))
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Table entry at `(x, y)` with `x ≤ width`, `y ≤ height`.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u64 {
        self.table[y * (self.width + 1) + x]
    }

    /// Sum over `[x, x + w) × [y, y + h)`. The rectangle must lie inside the image.
    #[inline]
    pub fn rect_sum(&self, x: usize, y: usize, w: usize, h: usize) -> u64 {
        debug_assert!(x + w <= self.width && y + h <= self.height);
        (self.at(x + w, y + h) + self.at(x, y)) - (self.at(x + w, y) + self.at(x, y + h))
    }
}

/// Integral images of luma and squared luma for one frame; the pair gives
/// constant-time window mean and variance for contrast normalization.
#[derive(Debug, Clone)]
pub struct LumaIntegrals {
    pub(crate) sum: IntegralImage,
    pub(crate) squares: IntegralImage,
}

impl LumaIntegrals {
    pub fn new(frame: &Frame<'_>) -> Self {
        let (w, h) = (frame.width(), frame.height());
        let luma: Vec<u8> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| frame.sample(x, y, Channel::Luma))
            .collect();
        Self::from_gray(w, h, &luma)
    }

    pub fn from_gray(width: usize, height: usize, pixels: &[u8]) -> Self {
        LumaIntegrals {
            sum: IntegralImage::from_gray(width, height, pixels),
            squares: IntegralImage::from_fn(width, height, |x, y| {
                let v = u64::from(pixels[y * width + x]);
                v * v
            }),
        }
    }

    pub fn sum(&self) -> &IntegralImage {
        &self.sum
    }

    pub fn squares(&self) -> &IntegralImage {
        &self.squares
    }

    pub fn width(&self) -> usize {
        self.sum.width
    }

    pub fn height(&self) -> usize {
        self.sum.height
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(pixels: &[u8], width: usize, x: usize, y: usize, w: usize, h: usize) -> u64 {
        let mut s = 0u64;
        for yy in y..y + h {
            for xx in x..x + w {
                s += u64::from(pixels[yy * width + xx]);
            }
        }
        s
    }

    #[test]
    fn single_pixel() {
        let ii = IntegralImage::from_gray(1, 1, &[5]);
        assert_eq!(ii.at(0, 0), 0);
        assert_eq!(ii.at(1, 0), 0);
        assert_eq!(ii.at(0, 1), 0);
        assert_eq!(ii.at(1, 1), 5);
    }

    #[test]
    fn all_ones() {
        let ii = IntegralImage::from_gray(3, 3, &[1; 9]);
        assert_eq!(ii.at(3, 3), 9);
        assert_eq!(ii.at(2, 3), 6);
        assert_eq!(ii.rect_sum(1, 1, 2, 2), 4);
    }

    #[test]
    fn rgb_channels_and_luma() {
        let data = [10u8, 20, 30, 40, 50, 60];
        let frame = Frame::new(1, 2, &data).unwrap();
        assert_eq!(IntegralImage::from_frame(&frame, Channel::R).at(2, 1), 50);
        assert_eq!(IntegralImage::from_frame(&frame, Channel::G).at(2, 1), 70);
        assert_eq!(IntegralImage::from_frame(&frame, Channel::B).at(2, 1), 90);
        let li = LumaIntegrals::new(&frame);
        let l0 = u64::from(crate::frame::luma(10, 20, 30));
        let l1 = u64::from(crate::frame::luma(40, 50, 60));
        assert_eq!(li.sum().at(2, 1), l0 + l1);
        assert_eq!(li.squares().at(2, 1), l0 * l0 + l1 * l1);
    }

    proptest! {
        #[test]
        fn rect_sum_matches_brute_force(
            (w, h, pixels) in (1usize..12, 1usize..12)
                .prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(any::<u8>(), w * h))),
            a in any::<(u16, u16, u16, u16)>(),
        ) {
            let ii = IntegralImage::from_gray(w, h, &pixels);
            let x = a.0 as usize % w;
            let y = a.1 as usize % h;
            let rw = 1 + a.2 as usize % (w - x);
            let rh = 1 + a.3 as usize % (h - y);
            prop_assert_eq!(ii.rect_sum(x, y, rw, rh), brute(&pixels, w, x, y, rw, rh));
        }
    }
}
