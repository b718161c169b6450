/// Contiguous range `[start, end)` of row-major pixel indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PixelSpan {
    pub start: usize,
    pub end: usize,
}

impl PixelSpan {
    /// Span owned by `rank` out of `ranks` over `pixels` pixels:
    /// `[floor(r·P/N), floor((r+1)·P/N))`.
    pub fn owned(rank: usize, ranks: usize, pixels: usize) -> PixelSpan {
        let at = |r: usize| ((r as u128 * pixels as u128) / ranks as u128) as usize;
        PixelSpan { start: at(rank), end: at(rank + 1) }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, pixel: usize) -> bool {
        pixel >= self.start && pixel < self.end
    }

    pub fn iter(&self) -> core::ops::Range<usize> {
        self.start..self.end
    }
}
