//! Window-based adaptive thresholding.
//!
//! The frame is cut into non-overlapping `window × window` cells (partial
//! cells at the right and bottom edges cover only the pixels that exist).
//! Each cell gets `th = 0.25·(max − min) + min`. Per-pixel thresholds are
//! blended bilinearly between cell centres, clamped to the centre lattice,
//! so interior pixels mix four cells, edge bands two and corners one.
//!
//! Thresholds are multiples of 1/4, so every comparison here is done in
//! exact integer arithmetic on `4·th = 3·min + max`. A pixel is foreground
//! (255) iff its value is strictly below the threshold.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::imgio::{Frame, FrameKind};

pub const DEFAULT_WINDOW: usize = 128;
pub const DEFAULT_LOCAL_RADIUS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub min: u8,
    pub max: u8,
}

impl Cell {
    /// `0.25·(max − min) + min`, exact.
    pub fn th(self) -> f64 {
        self.th_x4() as f64 / 4.0
    }

    /// Four times the threshold.
    #[inline]
    pub fn th_x4(self) -> i64 {
        3 * self.min as i64 + self.max as i64
    }
}

/// Per-window statistics of one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdGrid {
    pub window: usize,
    pub width: usize,
    pub height: usize,
    pub cols: usize,
    pub rows: usize,
    /// Row-major, `cols · rows` entries.
    pub cells: Vec<Cell>,
    /// Index of the frame the statistics came from.
    pub source_frame: u64,
}

impl ThresholdGrid {
    pub fn cell(&self, col: usize, row: usize) -> Cell {
        self.cells[row * self.cols + col]
    }

    pub fn cell_mut(&mut self, col: usize, row: usize) -> &mut Cell {
        &mut self.cells[row * self.cols + col]
    }

    /// Cell centre along one axis, in doubled pixel units (`first + last`).
    fn centres_x2(extent: usize, window: usize, count: usize) -> Vec<i64> {
        (0..count)
            .map(|i| {
                let first = i * window;
                let last = ((i + 1) * window).min(extent) - 1;
                (first + last) as i64
            })
            .collect()
    }

    /// Pixel-space centre of cell (col, row).
    pub fn centre(&self, col: usize, row: usize) -> (f64, f64) {
        let cx = Self::centres_x2(self.width, self.window, self.cols)[col];
        let cy = Self::centres_x2(self.height, self.window, self.rows)[row];
        (cx as f64 / 2.0, cy as f64 / 2.0)
    }

    fn check_frame(&self, frame: &Frame) -> Result<()> {
        frame.expect_kind(FrameKind::Grey, "thresholding")?;
        if frame.width() != self.width || frame.height() != self.height {
            return Err(Error::contract(format!(
                "grid built for {}x{}, frame is {}x{}",
                self.width,
                self.height,
                frame.width(),
                frame.height()
            )));
        }
        Ok(())
    }

    /// Interpolated threshold at pixel (x, y).
    pub fn effective_threshold(&self, x: usize, y: usize) -> f64 {
        let cx = Self::centres_x2(self.width, self.window, self.cols);
        let cy = Self::centres_x2(self.height, self.window, self.rows);
        let (i0, i1, nx, dx) = Self::weight_at(&cx, x);
        let (j0, j1, ny, dy) = Self::weight_at(&cy, y);
        let v = |i: usize| (dy - ny) * self.cell(i, j0).th_x4() + ny * self.cell(i, j1).th_x4();
        let num = (dx - nx) * v(i0) + nx * v(i1);
        num as f64 / (4 * dx * dy) as f64
    }

    /// `(lower cell, upper cell, numerator, denominator)` of the linear weight
    /// toward the upper cell at coordinate `p`.
    fn weight_at(centres: &[i64], p: usize) -> (usize, usize, i64, i64) {
        let p2 = 2 * p as i64;
        let last = centres.len() - 1;
        if p2 <= centres[0] {
            return (0, 0, 0, 1);
        }
        if p2 >= centres[last] {
            return (last, last, 0, 1);
        }
        let seg = centres.partition_point(|&c| c <= p2) - 1;
        (seg, seg + 1, p2 - centres[seg], centres[seg + 1] - centres[seg])
    }

    fn axis_weights(extent: usize, window: usize, count: usize) -> Vec<(usize, usize, i64, i64)> {
        let centres = Self::centres_x2(extent, window, count);
        (0..extent).map(|p| Self::weight_at(&centres, p)).collect()
    }
}

/// Per-window min/max of a greyscale frame.
pub fn compute_grid(frame: &Frame, window: usize) -> Result<ThresholdGrid> {
    frame.expect_kind(FrameKind::Grey, "compute_grid")?;
    if window < 2 {
        return Err(Error::contract(format!("window {window} < 2")));
    }
    let (w, h) = (frame.width(), frame.height());
    let cols = w.div_ceil(window);
    let rows = h.div_ceil(window);
    let mut cells = vec![Cell { min: 255, max: 0 }; cols * rows];
    let data = frame.data();
    for y in 0..h {
        let row_cells = &mut cells[(y / window) * cols..(y / window + 1) * cols];
        let line = &data[y * w..(y + 1) * w];
        for (cell, chunk) in row_cells.iter_mut().zip(line.chunks(window)) {
            let (lo, hi) = chunk
                .iter()
                .fold((cell.min, cell.max), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            cell.min = lo;
            cell.max = hi;
        }
    }
    Ok(ThresholdGrid {
        window,
        width: w,
        height: h,
        cols,
        rows,
        cells,
        source_frame: frame.frame_index,
    })
}

/// Binarizes with bilinearly interpolated cell thresholds.
pub fn apply_interpolated(frame: &Frame, grid: &ThresholdGrid) -> Result<Frame> {
    apply_interpolated_with(frame, grid, Exec::default())
}

pub fn apply_interpolated_with(frame: &Frame, grid: &ThresholdGrid, exec: Exec) -> Result<Frame> {
    grid.check_frame(frame)?;
    let (w, h) = (frame.width(), frame.height());
    let xs = ThresholdGrid::axis_weights(w, grid.window, grid.cols);
    let ys = ThresholdGrid::axis_weights(h, grid.window, grid.rows);
    // runs of columns sharing their cell pair and denominator
    let mut segments = Vec::new();
    let mut start = 0;
    for run in xs.chunk_by(|a, b| (a.0, a.1, a.3) == (b.0, b.1, b.3)) {
        let (i0, i1, _, dx) = run[0];
        segments.push((start..start + run.len(), i0, i1, dx));
        start += run.len();
    }
    // every operand below is an integer under 2^53, so f64 arithmetic is exact
    let wa: Vec<f64> = xs.iter().map(|&(_, _, nx, dx)| (dx - nx) as f64).collect();
    let wb: Vec<f64> = xs.iter().map(|&(_, _, nx, _)| nx as f64).collect();
    let src = frame.data();
    let mut out = vec![0u8; w * h];
    exec.for_each_row(&mut out, w, |y, row| {
        let (j0, j1, ny, dy) = ys[y];
        // vertical blend per grid column, scaled by dy
        let vert: Vec<f64> = (0..grid.cols)
            .map(|i| ((dy - ny) * grid.cell(i, j0).th_x4() + ny * grid.cell(i, j1).th_x4()) as f64)
            .collect();
        let line = &src[y * w..(y + 1) * w];
        for (r, i0, i1, dx) in &segments {
            let (a, b) = (vert[*i0], vert[*i1]);
            let k = (4 * dx * dy) as f64;
            let pixels = row[r.clone()].iter_mut().zip(&line[r.clone()]);
            for ((o, &p), (&wa, &wb)) in pixels.zip(wa[r.clone()].iter().zip(&wb[r.clone()])) {
                *o = if f64::from(p) * k < wa * a + wb * b { 255 } else { 0 };
            }
        }
    });
    Ok(Frame::from_parts(w, h, FrameKind::Binary, out).with_index(frame.frame_index))
}

/// Binarizes each pixel against its own cell's threshold, no interpolation.
pub fn apply_windowed(frame: &Frame, grid: &ThresholdGrid) -> Result<Frame> {
    grid.check_frame(frame)?;
    let (w, h) = (frame.width(), frame.height());
    let win = grid.window;
    let out = frame
        .data()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let (x, y) = (i % w, i / w);
            if 4 * (p as i64) < grid.cell(x / win, y / win).th_x4() {
                255
            } else {
                0
            }
        })
        .collect();
    Ok(Frame::from_parts(w, h, FrameKind::Binary, out).with_index(frame.frame_index))
}

/// Foreground iff pixel < `th`.
pub fn apply_global(frame: &Frame, th: f64) -> Result<Frame> {
    frame.expect_kind(FrameKind::Grey, "apply_global")?;
    let out = frame
        .data()
        .iter()
        .map(|&p| if (p as f64) < th { 255 } else { 0 })
        .collect();
    Ok(Frame::from_parts(frame.width(), frame.height(), FrameKind::Binary, out).with_index(frame.frame_index))
}

/// Sliding-window minimum and maximum over `[i − r, i + r]` clamped to the slice.
fn sliding_min_max(line: &[u8], r: usize, min_out: &mut [u8], max_out: &mut [u8]) {
    use std::collections::VecDeque;
    let n = line.len();
    let mut lo: VecDeque<usize> = VecDeque::new();
    let mut hi: VecDeque<usize> = VecDeque::new();
    let mut next = 0usize;
    for i in 0..n {
        let right = (i + r).min(n - 1);
        while next <= right {
            while lo.back().is_some_and(|&j| line[j] >= line[next]) {
                lo.pop_back();
            }
            lo.push_back(next);
            while hi.back().is_some_and(|&j| line[j] <= line[next]) {
                hi.pop_back();
            }
            hi.push_back(next);
            next += 1;
        }
        let left = i.saturating_sub(r);
        while lo.front().is_some_and(|&j| j < left) {
            lo.pop_front();
        }
        while hi.front().is_some_and(|&j| j < left) {
            hi.pop_front();
        }
        min_out[i] = line[lo[0]];
        max_out[i] = line[hi[0]];
    }
}

/// Per-pixel min/max threshold from the min/max of the `(2r+1)²`
/// edge-replicated neighbourhood.
pub fn apply_local(frame: &Frame, radius: usize) -> Result<Frame> {
    frame.expect_kind(FrameKind::Grey, "apply_local")?;
    if radius < 1 {
        return Err(Error::contract("apply_local radius must be >= 1"));
    }
    let (w, h) = (frame.width(), frame.height());
    let src = frame.data();
    let mut hmin = vec![0u8; w * h];
    let mut hmax = vec![0u8; w * h];
    for y in 0..h {
        let r = y * w..(y + 1) * w;
        sliding_min_max(&src[r.clone()], radius, &mut hmin[r.clone()], &mut hmax[r]);
    }
    let mut out = vec![0u8; w * h];
    let mut col = vec![0u8; h];
    let mut cmin = vec![0u8; h];
    let mut cmax = vec![0u8; h];
    let mut scratch = vec![0u8; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = hmin[y * w + x];
        }
        sliding_min_max(&col, radius, &mut cmin, &mut scratch);
        for y in 0..h {
            col[y] = hmax[y * w + x];
        }
        sliding_min_max(&col, radius, &mut scratch, &mut cmax);
        for y in 0..h {
            let th_x4 = 3 * cmin[y] as i64 + cmax[y] as i64;
            out[y * w + x] = if 4 * (src[y * w + x] as i64) < th_x4 { 255 } else { 0 };
        }
    }
    Ok(Frame::from_parts(w, h, FrameKind::Binary, out).with_index(frame.frame_index))
}

/// Streaming binarizer: frame N is thresholded with the grid of frame N−1.
/// The first frame it sees is thresholded with its own grid.
#[derive(Debug, Clone)]
pub struct StreamBinarizer {
    window: usize,
    exec: Exec,
    previous: Option<ThresholdGrid>,
}

impl StreamBinarizer {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            exec: Exec::default(),
            previous: None,
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Grid computed from the last frame pushed.
    pub fn previous_grid(&self) -> Option<&ThresholdGrid> {
        self.previous.as_ref()
    }

    /// Binarizes `frame`; returns the output and the grid that was applied.
    pub fn push(&mut self, frame: &Frame) -> Result<(Frame, ThresholdGrid)> {
        let current = compute_grid(frame, self.window)?;
        let grid = match self.previous.take() {
            Some(prev) => {
                if frame.frame_index <= prev.source_frame {
                    return Err(Error::contract(format!(
                        "frame {} arrived after frame {}",
                        frame.frame_index, prev.source_frame
                    )));
                }
                if prev.width != frame.width() || prev.height != frame.height() {
                    return Err(Error::contract("frame size changed within a sequence"));
                }
                prev
            }
            None => current.clone(),
        };
        let out = apply_interpolated_with(frame, &grid, self.exec)?;
        self.previous = Some(current);
        Ok((out, grid))
    }
}

/// Binarizes an ordered sequence under the one-frame threshold lag.
pub fn stream_binarize(frames: &[Frame], window: usize) -> Result<Vec<Frame>> {
    let mut stream = StreamBinarizer::new(window);
    frames
        .iter()
        .map(|f| stream.push(f).map(|(out, _)| out))
        .collect()
}
