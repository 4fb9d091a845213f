//! In-memory clip representations: RGB frame sequences and landmark tracks.

use alloc::vec::Vec;
use thiserror::Error;

/// Points per frame in a facial landmark track.
pub const LANDMARK_COUNT: usize = 68;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("frame sequence must contain at least one frame")]
    Empty,
    #[error("frame dimensions must be nonzero, got {height}x{width}")]
    ZeroSize { height: usize, width: usize },
    #[error("pixel buffer holds {actual} bytes, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("frame {index} is {actual_h}x{actual_w}, expected {expected_h}x{expected_w}")]
    DimensionMismatch {
        index: usize,
        expected_h: usize,
        expected_w: usize,
        actual_h: usize,
        actual_w: usize,
    },
    #[error("landmark track expected {expected} values per frame, got {actual}")]
    LandmarkArity { expected: usize, actual: usize },
    #[error("landmark track has {actual} frames, expected {expected}")]
    LandmarkLength { expected: usize, actual: usize },
}

/// Single-channel selector for detection and signal extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    R,
    G,
    B,
    /// `round(0.299 R + 0.587 G + 0.114 B)`.
    Luma,
}

/// Rounded BT.601 luma.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    // y ∈ [0, 255]; `as` saturates anyway.
    libm::round(y) as u8
}

/// Borrowed view of one interleaved RGB frame.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    height: usize,
    width: usize,
    data: &'a [u8],
}

impl<'a> Frame<'a> {
    /// Wraps `height · width · 3` interleaved RGB bytes.
    pub fn new(height: usize, width: usize, data: &'a [u8]) -> Result<Self, FrameError> {
        if height == 0 || width == 0 {
            return Err(FrameError::ZeroSize { height, width });
        }
        let expected = height * width * 3;
        if data.len() != expected {
            return Err(FrameError::BufferSize {
                expected,
                actual: data.len(),
            });
        }
        Ok(Frame {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &'a [u8] {
        self.data
    }

    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, channel: Channel) -> u8 {
        let [r, g, b] = self.rgb(x, y);
        match channel {
            Channel::R => r,
            Channel::G => g,
            Channel::B => b,
            Channel::Luma => luma(r, g, b),
        }
    }
}

/// `T` frames of identical `H × W` interleaved RGB pixels, stored contiguously.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSequence {
    frame_count: usize,
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl FrameSequence {
    /// Takes ownership of a `T·H·W·3` byte payload.
    pub fn new(
        frame_count: usize,
        height: usize,
        width: usize,
        data: Vec<u8>,
    ) -> Result<Self, FrameError> {
        if frame_count == 0 {
            return Err(FrameError::Empty);
        }
        if height == 0 || width == 0 {
            return Err(FrameError::ZeroSize { height, width });
        }
        let expected = frame_count * height * width * 3;
        if data.len() != expected {
            return Err(FrameError::BufferSize {
                expected,
                actual: data.len(),
            });
        }
        Ok(FrameSequence {
            frame_count,
            height,
            width,
            data,
        })
    }

    /// Assembles a sequence from per-frame `(height, width, rgb)` buffers,
    /// which must all share one size.
    pub fn from_frames<I>(frames: I) -> Result<Self, FrameError>
    where
        I: IntoIterator<Item = (usize, usize, Vec<u8>)>,
    {
        let mut dims = None;
        let mut data = Vec::new();
        let mut count = 0;
        for (index, (h, w, bytes)) in frames.into_iter().enumerate() {
            match dims {
                None => dims = Some((h, w)),
                Some((eh, ew)) if (eh, ew) != (h, w) => {
                    return Err(FrameError::DimensionMismatch {
                        index,
                        expected_h: eh,
                        expected_w: ew,
                        actual_h: h,
                        actual_w: w,
                    })
                }
                Some(_) => {}
            }
            Frame::new(h, w, &bytes)?;
            data.extend_from_slice(&bytes);
            count += 1;
        }
        let (h, w) = dims.ok_or(FrameError::Empty)?;
        FrameSequence::new(count, h, w, data)
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width * 3
    }

    /// Panics if `t >= frame_count()`.
    pub fn frame(&self, t: usize) -> Frame<'_> {
        let n = self.frame_len();
        Frame {
            height: self.height,
            width: self.width,
            data: &self.data[t * n..(t + 1) * n],
        }
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = Frame<'_>> + '_ {
        (0..self.frame_count).map(move |t| self.frame(t))
    }

    /// The whole payload in frame, row, column, channel order.
    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }
}

/// Per-frame 68-point `(x, y)` facial landmarks in pixel units.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkTrack {
    points: Vec<[[f64; 2]; LANDMARK_COUNT]>,
}

impl LandmarkTrack {
    pub fn new(points: Vec<[[f64; 2]; LANDMARK_COUNT]>) -> Self {
        LandmarkTrack { points }
    }

    /// Builds a track from rows of `x0, y0, …, x67, y67`.
    pub fn from_flat_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, FrameError> {
        let mut points = Vec::with_capacity(rows.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != 2 * LANDMARK_COUNT {
                return Err(FrameError::LandmarkArity {
                    expected: 2 * LANDMARK_COUNT,
                    actual: row.len(),
                });
            }
            let mut frame = [[0.0; 2]; LANDMARK_COUNT];
            for (p, xy) in frame.iter_mut().zip(row.chunks_exact(2)) {
                *p = [xy[0], xy[1]];
            }
            points.push(frame);
        }
        Ok(LandmarkTrack { points })
    }

    pub fn frame_count(&self) -> usize {
        self.points.len()
    }

    pub fn frame(&self, t: usize) -> &[[f64; 2]; LANDMARK_COUNT] {
        &self.points[t]
    }

    pub fn frames(&self) -> &[[[f64; 2]; LANDMARK_COUNT]] {
        &self.points
    }

    /// Fails unless the track covers exactly `expected` frames.
    pub fn check_length(&self, expected: usize) -> Result<(), FrameError> {
        if self.points.len() == expected {
            Ok(())
        } else {
            Err(FrameError::LandmarkLength {
                expected,
                actual: self.points.len(),
            })
        }
    }

    /// Time-major flattening: `[x0, y0, …, x67, y67]` for frame 0, then frame 1, …
    pub fn flatten(&self) -> Vec<f64> {
        self.points
            .iter()
            .flat_map(|f| f.iter().flat_map(|p| p.iter().copied()))
            .collect()
    }
}
