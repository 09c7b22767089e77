//! Mask geometry: dense grids, image-frame windows, heatmap rasterization and
//! mask IoU.
//!
//! Heatmaps are stored on a local grid covering a rectangular footprint of the
//! image. When the grid resolution equals the footprint size, placement is the
//! identity and no resampling happens; otherwise the grid is resampled with the
//! configured [`Resampling`] policy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default probability clamp used by the log losses.
pub const DEFAULT_EPSILON: f64 = 1e-7;

/// Default binarization threshold for mask IoU.
pub const DEFAULT_BIN_THRESHOLD: f64 = 0.5;

/// Image size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Extent {
    pub rows: usize,
    pub cols: usize,
}

impl Extent {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidExtent { rows, cols });
        }
        Ok(Self { rows, cols })
    }

    pub fn window(&self) -> Window {
        Window::new(0, 0, self.rows, self.cols)
    }

    pub fn area(&self) -> usize {
        self.rows * self.cols
    }
}

/// Axis-aligned rectangle of pixels in the image frame. The origin may be
/// negative for footprints that hang over the image border.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Window {
    pub row: i64,
    pub col: i64,
    pub rows: usize,
    pub cols: usize,
}

impl Window {
    pub const EMPTY: Window = Window {
        row: 0,
        col: 0,
        rows: 0,
        cols: 0,
    };

    pub fn new(row: i64, col: i64, rows: usize, cols: usize) -> Self {
        Self {
            row,
            col,
            rows,
            cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn area(&self) -> usize {
        self.rows * self.cols
    }

    pub fn row_end(&self) -> i64 {
        self.row + self.rows as i64
    }

    pub fn col_end(&self) -> i64 {
        self.col + self.cols as i64
    }

    pub fn contains(&self, row: i64, col: i64) -> bool {
        row >= self.row && row < self.row_end() && col >= self.col && col < self.col_end()
    }

    /// Smallest window covering both. Empty windows are ignored.
    pub fn union(&self, other: &Window) -> Window {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        let row = self.row.min(other.row);
        let col = self.col.min(other.col);
        let row_end = self.row_end().max(other.row_end());
        let col_end = self.col_end().max(other.col_end());
        Window::new(row, col, (row_end - row) as usize, (col_end - col) as usize)
    }

    pub fn intersect(&self, other: &Window) -> Window {
        let row = self.row.max(other.row);
        let col = self.col.max(other.col);
        let row_end = self.row_end().min(other.row_end());
        let col_end = self.col_end().min(other.col_end());
        if row_end <= row || col_end <= col {
            return Window::EMPTY;
        }
        Window::new(row, col, (row_end - row) as usize, (col_end - col) as usize)
    }

    pub fn clip(&self, extent: Extent) -> Window {
        self.intersect(&extent.window())
    }

    /// Iterate image-frame pixel coordinates in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (self.row..self.row_end()).flat_map(move |r| (self.col..self.col_end()).map(move |c| (r, c)))
    }
}

/// Dense row-major grid of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            values: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::InvalidMask(format!(
                "grid declared as {rows}x{cols} but holds {} values",
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Self { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.cols + col] = value;
    }

    pub fn count_above(&self, threshold: f64) -> usize {
        self.values.iter().filter(|&&v| v > threshold).count()
    }

    fn check_probabilities(&self) -> Result<()> {
        match self.values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            Some(i) => Err(Error::InvalidMask(format!(
                "value {} at index {i} is not a probability",
                self.values[i]
            ))),
            None => Ok(()),
        }
    }
}

/// A grid anchored at an image-frame window. Reads outside the window are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedGrid {
    pub window: Window,
    pub grid: Grid,
}

impl PlacedGrid {
    pub fn zeros(window: Window) -> Self {
        Self {
            window,
            grid: Grid::zeros(window.rows, window.cols),
        }
    }

    pub fn at(&self, row: i64, col: i64) -> f64 {
        if self.window.contains(row, col) {
            self.grid.get(
                (row - self.window.row) as usize,
                (col - self.window.col) as usize,
            )
        } else {
            0.0
        }
    }

    /// Copy of this grid re-anchored on `window`, zero-padded or cropped.
    pub fn reframe(&self, window: Window) -> PlacedGrid {
        let mut out = PlacedGrid::zeros(window);
        let overlap = self.window.intersect(&window);
        for (r, c) in overlap.pixels() {
            let v = self.at(r, c);
            out.grid.set(
                (r - window.row) as usize,
                (c - window.col) as usize,
                v,
            );
        }
        out
    }

    pub fn to_full_image(&self, extent: Extent) -> Grid {
        self.reframe(extent.window()).grid
    }

    pub fn count_above(&self, threshold: f64) -> usize {
        self.grid.count_above(threshold)
    }
}

/// Binary mask in the image frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn from_bits(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::InvalidMask(format!(
                "binary mask declared as {rows}x{cols} but holds {} bits",
                bits.len()
            )));
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                bits.push(f(r, c));
            }
        }
        Self { rows, cols, bits }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn extent(&self) -> Extent {
        Extent {
            rows: self.rows,
            cols: self.cols,
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    /// Reads outside the mask are background.
    pub fn at(&self, row: i64, col: i64) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.rows
            && (col as usize) < self.cols
            && self.get(row as usize, col as usize)
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.cols + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Tight window around the foreground, or `None` for an empty mask.
    pub fn bounding_window(&self) -> Option<Window> {
        let (mut r0, mut c0, mut r1, mut c1) = (usize::MAX, usize::MAX, 0, 0);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    r0 = r0.min(r);
                    c0 = c0.min(c);
                    r1 = r1.max(r);
                    c1 = c1.max(c);
                }
            }
        }
        (r0 != usize::MAX).then(|| Window::new(r0 as i64, c0 as i64, r1 - r0 + 1, c1 - c0 + 1))
    }

    pub fn iou(&self, other: &BinaryMask) -> f64 {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (a, b) in self.bits.iter().zip(&other.bits) {
            inter += (*a && *b) as usize;
            union += (*a || *b) as usize;
        }
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// How a heatmap grid is mapped onto its image-frame footprint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resampling {
    #[default]
    Bilinear,
    Nearest,
}

/// Per-pixel foreground probability heatmap with an image-frame footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMask {
    origin: (i64, i64),
    footprint: (usize, usize),
    grid: Grid,
}

impl ProbMask {
    /// Heatmap placed one grid cell per image pixel.
    pub fn new(origin: (i64, i64), grid: Grid) -> Result<Self> {
        let footprint = (grid.rows(), grid.cols());
        Self::with_footprint(origin, footprint, grid)
    }

    /// Heatmap covering `footprint` image pixels; the grid is resampled
    /// whenever its resolution differs from the footprint.
    pub fn with_footprint(origin: (i64, i64), footprint: (usize, usize), grid: Grid) -> Result<Self> {
        grid.check_probabilities()?;
        let grid_empty = grid.rows() == 0 || grid.cols() == 0;
        let footprint_empty = footprint.0 == 0 || footprint.1 == 0;
        if grid_empty != footprint_empty {
            return Err(Error::InvalidMask(format!(
                "footprint {}x{} incompatible with grid {}x{}",
                footprint.0,
                footprint.1,
                grid.rows(),
                grid.cols()
            )));
        }
        Ok(Self {
            origin,
            footprint,
            grid,
        })
    }

    pub fn from_placed(placed: PlacedGrid) -> Result<Self> {
        Self::new((placed.window.row, placed.window.col), placed.grid)
    }

    pub fn origin(&self) -> (i64, i64) {
        self.origin
    }

    pub fn footprint(&self) -> (usize, usize) {
        self.footprint
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.grid.rows(), self.grid.cols())
    }

    pub fn window(&self) -> Window {
        Window::new(self.origin.0, self.origin.1, self.footprint.0, self.footprint.1)
    }

    pub fn is_identity_placement(&self) -> bool {
        self.footprint == self.resolution()
    }

    /// Probability at an image-frame pixel; 0 outside the footprint.
    pub fn sample(&self, row: i64, col: i64, policy: Resampling) -> f64 {
        let window = self.window();
        if !window.contains(row, col) {
            return 0.0;
        }
        let lr = (row - window.row) as usize;
        let lc = (col - window.col) as usize;
        if self.is_identity_placement() {
            return self.grid.get(lr, lc);
        }
        let (gr, gc) = self.resolution();
        let sr = gr as f64 / self.footprint.0 as f64;
        let sc = gc as f64 / self.footprint.1 as f64;
        match policy {
            Resampling::Nearest => {
                let r = (((lr as f64 + 0.5) * sr).floor() as usize).min(gr - 1);
                let c = (((lc as f64 + 0.5) * sc).floor() as usize).min(gc - 1);
                self.grid.get(r, c)
            }
            Resampling::Bilinear => {
                let u = ((lr as f64 + 0.5) * sr - 0.5).clamp(0.0, (gr - 1) as f64);
                let v = ((lc as f64 + 0.5) * sc - 0.5).clamp(0.0, (gc - 1) as f64);
                let (r0, c0) = (u.floor() as usize, v.floor() as usize);
                let (r1, c1) = ((r0 + 1).min(gr - 1), (c0 + 1).min(gc - 1));
                let (tu, tv) = (u - r0 as f64, v - c0 as f64);
                let top = self.grid.get(r0, c0) * (1.0 - tv) + self.grid.get(r0, c1) * tv;
                let bottom = self.grid.get(r1, c0) * (1.0 - tv) + self.grid.get(r1, c1) * tv;
                (top * (1.0 - tu) + bottom * tu).clamp(0.0, 1.0)
            }
        }
    }

    /// Resample onto an arbitrary image-frame window (zero outside the footprint).
    pub fn place(&self, window: Window, policy: Resampling) -> PlacedGrid {
        let mut out = PlacedGrid::zeros(window);
        let overlap = self.window().intersect(&window);
        for (r, c) in overlap.pixels() {
            out.grid.set(
                (r - window.row) as usize,
                (c - window.col) as usize,
                self.sample(r, c, policy),
            );
        }
        out
    }

    /// Resample onto the heatmap's own footprint.
    pub fn placed(&self, policy: Resampling) -> PlacedGrid {
        self.place(self.window(), policy)
    }
}

/// Dense full-image rendering of a heatmap, clipped to `extent`.
pub fn rasterize(mask: &ProbMask, extent: (usize, usize), policy: Resampling) -> Result<Grid> {
    let extent = Extent::new(extent.0, extent.1)?;
    Ok(mask.place(extent.window(), policy).grid)
}

/// IoU of two placed grids binarized at `bin_threshold`; 0 for an empty union.
pub fn placed_iou(a: &PlacedGrid, b: &PlacedGrid, bin_threshold: f64) -> f64 {
    let count_a = a.count_above(bin_threshold);
    let count_b = b.count_above(bin_threshold);
    let inter = a
        .window
        .intersect(&b.window)
        .pixels()
        .filter(|&(r, c)| a.at(r, c) > bin_threshold && b.at(r, c) > bin_threshold)
        .count();
    let union = count_a + count_b - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// IoU of two heatmaps binarized at `bin_threshold` (pixel is foreground iff
/// its value exceeds the threshold).
pub fn mask_iou(a: &ProbMask, b: &ProbMask, bin_threshold: f64, policy: Resampling) -> f64 {
    placed_iou(&a.placed(policy), &b.placed(policy), bin_threshold)
}

pub fn clamp_prob(p: f64, epsilon: f64) -> f64 {
    p.max(epsilon).min(1.0 - epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_mask(cols: &[usize]) -> ProbMask {
        let grid = Grid::from_fn(4, 4, |_, c| if cols.contains(&c) { 1.0 } else { 0.0 });
        ProbMask::new((0, 0), grid).unwrap()
    }

    #[test]
    fn identity_placement_into_larger_extent() {
        let mask = ProbMask::new((0, 0), Grid::filled(2, 2, 1.0)).unwrap();
        let full = rasterize(&mask, (4, 4), Resampling::Bilinear).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expected = if r < 2 && c < 2 { 1.0 } else { 0.0 };
                assert_eq!(full.get(r, c), expected);
            }
        }
    }

    #[test]
    fn empty_footprint_rasterizes_to_zero() {
        let mask = ProbMask::new((1, 1), Grid::zeros(0, 0)).unwrap();
        let full = rasterize(&mask, (3, 5), Resampling::Nearest).unwrap();
        assert!(full.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nearest_upsampling_replicates_blocks() {
        let grid = Grid::from_vec(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mask = ProbMask::with_footprint((0, 0), (4, 4), grid.clone()).unwrap();
        let full = rasterize(&mask, (4, 4), Resampling::Nearest).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(full.get(r, c), grid.get(r / 2, c / 2));
            }
        }
    }

    #[test]
    fn bilinear_is_identity_without_resampling() {
        let grid = Grid::from_fn(3, 5, |r, c| (r * 5 + c) as f64 / 15.0);
        let mask = ProbMask::new((2, 1), grid.clone()).unwrap();
        let full = rasterize(&mask, (6, 7), Resampling::Bilinear).unwrap();
        for r in 0..3 {
            for c in 0..5 {
                assert_eq!(full.get(r + 2, c + 1), grid.get(r, c));
            }
        }
    }

    #[test]
    fn bilinear_upsampling_interpolates_between_cells() {
        let grid = Grid::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        let mask = ProbMask::with_footprint((0, 0), (1, 4), grid).unwrap();
        let full = rasterize(&mask, (1, 4), Resampling::Bilinear).unwrap();
        // Pixel centres 0.5,1.5,2.5,3.5 map to grid coordinates -0.25,0.25,0.75,1.25.
        assert_eq!(full.values(), &[0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn rasterize_clips_to_extent() {
        let mask = ProbMask::new((-1, 2), Grid::filled(3, 3, 0.7)).unwrap();
        let full = rasterize(&mask, (2, 4), Resampling::Bilinear).unwrap();
        assert_eq!(full.values(), &[0.0, 0.0, 0.7, 0.7, 0.0, 0.0, 0.7, 0.7]);
    }

    #[test]
    fn zero_extent_is_rejected() {
        let mask = ProbMask::new((0, 0), Grid::filled(2, 2, 1.0)).unwrap();
        assert!(matches!(
            rasterize(&mask, (0, 4), Resampling::Bilinear),
            Err(Error::InvalidExtent { .. })
        ));
    }

    #[test]
    fn out_of_range_values_rejected() {
        let grid = Grid::from_vec(1, 2, vec![0.5, 1.5]).unwrap();
        assert!(ProbMask::new((0, 0), grid).is_err());
    }

    #[test]
    fn iou_fixtures() {
        let a = column_mask(&[0, 1]);
        let b = column_mask(&[1, 2]);
        let c = column_mask(&[3]);
        assert_eq!(mask_iou(&a, &a, 0.5, Resampling::Bilinear), 1.0);
        assert_eq!(mask_iou(&a, &c, 0.5, Resampling::Bilinear), 0.0);
        assert!((mask_iou(&a, &b, 0.5, Resampling::Bilinear) - 4.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn iou_of_empty_masks_is_zero() {
        let a = ProbMask::new((0, 0), Grid::filled(3, 3, 0.2)).unwrap();
        assert_eq!(mask_iou(&a, &a, 0.5, Resampling::Bilinear), 0.0);
    }

    #[test]
    fn iou_across_offset_footprints() {
        let a = ProbMask::new((0, 0), Grid::filled(2, 2, 1.0)).unwrap();
        let b = ProbMask::new((1, 1), Grid::filled(2, 2, 1.0)).unwrap();
        assert!((mask_iou(&a, &b, 0.5, Resampling::Bilinear) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn clamp_fixtures() {
        assert_eq!(clamp_prob(0.0, 1e-7), 1e-7);
        assert_eq!(clamp_prob(1.0, 1e-7), 1.0 - 1e-7);
        assert_eq!(clamp_prob(0.5, 1e-7), 0.5);
    }

    #[test]
    fn window_union_and_intersection() {
        let a = Window::new(0, 0, 2, 3);
        let b = Window::new(1, -1, 4, 2);
        assert_eq!(a.union(&b), Window::new(0, -1, 5, 4));
        assert_eq!(a.intersect(&b), Window::new(1, 0, 1, 1));
        assert!(a.intersect(&Window::new(5, 5, 1, 1)).is_empty());
        assert_eq!(Window::EMPTY.union(&a), a);
    }
}
