//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use std::collections::VecDeque;

use num_rational::Ratio;
use rand::Rng;

use landpad::ccl::{ComponentRecord, Connectivity};
use landpad::{Frame, FrameKind};

/// Component found by the flood-fill oracle.
#[derive(Debug, Clone)]
pub struct OracleComponent {
    pub pixels: Vec<(usize, usize)>,
    pub min: (usize, usize),
    pub max: (usize, usize),
    pub centroid: (f64, f64),
}

/// Breadth-first flood fill over every foreground pixel, in scan order.
pub fn flood_fill(data: &[u8], w: usize, h: usize, conn: Connectivity) -> Vec<OracleComponent> {
    let offsets: &[(i64, i64)] = match conn {
        Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
        Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
    };
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for start in 0..w * h {
        if data[start] == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([(start % w, start / w)]);
        let mut pixels = Vec::new();
        while let Some((x, y)) = queue.pop_front() {
            pixels.push((x, y));
            for &(dx, dy) in offsets {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let i = ny as usize * w + nx as usize;
                if data[i] != 0 && !seen[i] {
                    seen[i] = true;
                    queue.push_back((nx as usize, ny as usize));
                }
            }
        }
        let n = pixels.len() as f64;
        let sx: usize = pixels.iter().map(|p| p.0).sum();
        let sy: usize = pixels.iter().map(|p| p.1).sum();
        out.push(OracleComponent {
            min: (pixels.iter().map(|p| p.0).min().unwrap(), pixels.iter().map(|p| p.1).min().unwrap()),
            max: (pixels.iter().map(|p| p.0).max().unwrap(), pixels.iter().map(|p| p.1).max().unwrap()),
            centroid: (sx as f64 / n, sy as f64 / n),
            pixels,
        });
    }
    out
}

/// Checks partition, area, bbox and centroid of `ours` against the oracle.
pub fn compare_components(
    oracle: &[OracleComponent],
    ours: &[ComponentRecord],
    label_map: &[u32],
    w: usize,
) -> Result<(), String> {
    if oracle.len() != ours.len() {
        return Err(format!("{} oracle components, {} labelled", oracle.len(), ours.len()));
    }
    let mut used = vec![false; ours.len() + 1];
    for comp in oracle {
        let (x0, y0) = comp.pixels[0];
        let label = label_map[y0 * w + x0];
        if label == 0 || label as usize > ours.len() || used[label as usize] {
            return Err(format!("pixel ({x0}, {y0}) has label {label}"));
        }
        used[label as usize] = true;
        if let Some(&(x, y)) = comp.pixels.iter().find(|&&(x, y)| label_map[y * w + x] != label) {
            return Err(format!("component split at ({x}, {y})"));
        }
        let rec = ours.iter().find(|r| r.label == label).ok_or("label without record")?;
        if rec.area != comp.pixels.len() as u64 {
            return Err(format!("area {} vs {}", rec.area, comp.pixels.len()));
        }
        let b = rec.bbox;
        if (b.min_x, b.min_y, b.max_x, b.max_y) != (comp.min.0, comp.min.1, comp.max.0, comp.max.1) {
            return Err(format!("bbox {b:?} vs {:?}..{:?}", comp.min, comp.max));
        }
        let (cx, cy) = rec.centroid;
        if (cx - comp.centroid.0).abs() > 1e-9 || (cy - comp.centroid.1).abs() > 1e-9 {
            return Err(format!("centroid {:?} vs {:?}", rec.centroid, comp.centroid));
        }
    }
    let labelled = label_map.iter().filter(|&&l| l != 0).count();
    let total: usize = oracle.iter().map(|c| c.pixels.len()).sum();
    if labelled != total {
        return Err(format!("{labelled} labelled pixels, {total} foreground"));
    }
    Ok(())
}

pub fn random_binary(rng: &mut impl Rng, w: usize, h: usize, density: f64) -> Frame {
    let data = (0..w * h).map(|_| if rng.random_bool(density) { 255 } else { 0 }).collect();
    Frame::new(w, h, FrameKind::Binary, data).unwrap()
}

pub fn random_grey(rng: &mut impl Rng, w: usize, h: usize) -> Frame {
    let data = (0..w * h).map(|_| rng.random()).collect();
    Frame::new(w, h, FrameKind::Grey, data).unwrap()
}

/// Per-window `(min, max)` by scanning each window's pixels.
pub fn brute_windows(data: &[u8], w: usize, h: usize, window: usize) -> Vec<(u8, u8)> {
    let (cols, rows) = (w.div_ceil(window), h.div_ceil(window));
    let mut out = Vec::with_capacity(cols * rows);
    for j in 0..rows {
        for i in 0..cols {
            let mut lo = u8::MAX;
            let mut hi = u8::MIN;
            for y in j * window..((j + 1) * window).min(h) {
                for x in i * window..((i + 1) * window).min(w) {
                    lo = lo.min(data[y * w + x]);
                    hi = hi.max(data[y * w + x]);
                }
            }
            out.push((lo, hi));
        }
    }
    out
}

type Q = Ratio<i64>;

/// Window centres along one axis and the weights of pixel `p` on them, as
/// exact fractions. Beyond the outer centres the nearest window holds.
fn bilinear_weights(p: usize, extent: usize, window: usize) -> Vec<(usize, Q)> {
    let count = extent.div_ceil(window);
    let centre = |i: usize| Q::new((i * window + ((i + 1) * window).min(extent) - 1) as i64, 2);
    let p = Q::from_integer(p as i64);
    if p <= centre(0) {
        return vec![(0, Q::from_integer(1))];
    }
    if p >= centre(count - 1) {
        return vec![(count - 1, Q::from_integer(1))];
    }
    let i = (0..count - 1).find(|&i| centre(i) <= p && p < centre(i + 1)).unwrap();
    let t = (p - centre(i)) / (centre(i + 1) - centre(i));
    vec![(i, Q::from_integer(1) - t), (i + 1, t)]
}

/// Foreground iff the pixel lies strictly below the bilinear blend of the
/// four surrounding window thresholds `min + (max − min) / 4`.
pub fn reference_binarize(data: &[u8], w: usize, h: usize, window: usize, windows: &[(u8, u8)]) -> Vec<u8> {
    let cols = w.div_ceil(window);
    let th = |i: usize, j: usize| {
        let (lo, hi) = windows[j * cols + i];
        Q::from_integer(lo as i64) + Q::new(hi as i64 - lo as i64, 4)
    };
    let wx: Vec<_> = (0..w).map(|x| bilinear_weights(x, w, window)).collect();
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let wy = bilinear_weights(y, h, window);
        let vertical: Vec<Q> = (0..cols)
            .map(|i| wy.iter().map(|&(j, b)| b * th(i, j)).sum())
            .collect();
        for x in 0..w {
            let t: Q = wx[x].iter().map(|&(i, a)| a * vertical[i]).sum();
            if Q::from_integer(data[y * w + x] as i64) < t {
                out[y * w + x] = 255;
            }
        }
    }
    out
}
