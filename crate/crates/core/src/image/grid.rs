use super::{GrayImage, ImageError};

/// One rectangle of a block grid, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Cell {
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }
}

/// Balanced `n x n` partition of an image. Remainder pixels go to the
/// leading rows and columns, so `(17, 4)` gives widths `(5, 4, 4, 4)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrid {
    n: usize,
    /// `n + 1` column boundaries, starting at 0 and ending at the width.
    col_bounds: Vec<usize>,
    row_bounds: Vec<usize>,
}

/// Boundaries of a balanced split of `len` into `n` parts.
pub(crate) fn balanced_bounds(len: usize, n: usize) -> Vec<usize> {
    let base = len / n;
    let extra = len % n;
    let mut bounds = Vec::with_capacity(n + 1);
    let mut at = 0;
    bounds.push(0);
    for i in 0..n {
        at += base + usize::from(i < extra);
        bounds.push(at);
    }
    bounds
}

impl BlockGrid {
    pub fn for_dims(width: usize, height: usize, n: usize) -> Result<Self, ImageError> {
        if n == 0 || width < n || height < n {
            return Err(ImageError::GridTooFine { width, height, n });
        }
        Ok(BlockGrid {
            n,
            col_bounds: balanced_bounds(width, n),
            row_bounds: balanced_bounds(height, n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.col_bounds[self.n]
    }

    pub fn height(&self) -> usize {
        self.row_bounds[self.n]
    }

    pub fn col_bounds(&self) -> &[usize] {
        &self.col_bounds
    }

    pub fn row_bounds(&self) -> &[usize] {
        &self.row_bounds
    }

    pub fn col_width(&self, j: usize) -> usize {
        self.col_bounds[j + 1] - self.col_bounds[j]
    }

    pub fn row_height(&self, i: usize) -> usize {
        self.row_bounds[i + 1] - self.row_bounds[i]
    }

    /// Cell at block row `i`, block column `j`.
    pub fn cell(&self, i: usize, j: usize) -> Cell {
        Cell {
            x: self.col_bounds[j],
            y: self.row_bounds[i],
            width: self.col_width(j),
            height: self.row_height(i),
        }
    }

    /// All cells in row-major block order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.n).flat_map(move |i| (0..self.n).map(move |j| self.cell(i, j)))
    }

    /// Block column containing pixel column `x`.
    pub fn col_of(&self, x: usize) -> usize {
        self.col_bounds[1..].partition_point(|&b| b <= x)
    }

    pub fn row_of(&self, y: usize) -> usize {
        self.row_bounds[1..].partition_point(|&b| b <= y)
    }
}

pub fn make_grid(img: &GrayImage, n: usize) -> Result<BlockGrid, ImageError> {
    BlockGrid::for_dims(img.width(), img.height(), n)
}
