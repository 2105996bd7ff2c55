//! Single-pass connected component labeling over row runs.
//!
//! Each foreground run gets a provisional label, merged with the runs it
//! touches in the previous row through a union-find whose roots carry the
//! component statistics. Statistics are folded at union time, so the pixel
//! data is scanned exactly once; resolution afterwards walks only the
//! equivalence table.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imgio::{Frame, FrameKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            4 => Some(Connectivity::Four),
            8 => Some(Connectivity::Eight),
            _ => None,
        }
    }
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl BBox {
    pub fn width(&self) -> usize {
        self.max_x - self.min_x + 1
    }

    pub fn height(&self) -> usize {
        self.max_y - self.min_y + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    /// Longer side over shorter side.
    pub fn aspect(&self) -> f64 {
        let (w, h) = (self.width() as f64, self.height() as f64);
        w.max(h) / w.min(h)
    }

    pub fn contains(&self, other: &BBox) -> bool {
        other.min_x >= self.min_x
            && other.max_x <= self.max_x
            && other.min_y >= self.min_y
            && other.max_y <= self.max_y
    }

    pub fn centre(&self) -> (f64, f64) {
        (
            (self.min_x + self.max_x) as f64 / 2.0,
            (self.min_y + self.max_y) as f64 / 2.0,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    /// 1-based, dense, in output order.
    pub label: u32,
    pub area: u64,
    pub bbox: BBox,
    /// Mean member coordinate.
    pub centroid: (f64, f64),
    pub touches_border: bool,
}

impl ComponentRecord {
    /// Area over bounding-box area.
    pub fn extent(&self) -> f64 {
        self.area as f64 / self.bbox.area() as f64
    }
}

#[derive(Debug, Clone, Copy)]
struct Stats {
    area: u64,
    sum_x: u64,
    sum_y: u64,
    min_x: u32,
    min_y: u32,
    max_x: u32,
    max_y: u32,
}

impl Stats {
    fn of_run(y: u32, x0: u32, x1: u32) -> Self {
        let n = (x1 - x0 + 1) as u64;
        Self {
            area: n,
            sum_x: (x0 as u64 + x1 as u64) * n / 2,
            sum_y: y as u64 * n,
            min_x: x0,
            min_y: y,
            max_x: x1,
            max_y: y,
        }
    }

    fn absorb(&mut self, o: &Stats) {
        self.area += o.area;
        self.sum_x += o.sum_x;
        self.sum_y += o.sum_y;
        self.min_x = self.min_x.min(o.min_x);
        self.min_y = self.min_y.min(o.min_y);
        self.max_x = self.max_x.max(o.max_x);
        self.max_y = self.max_y.max(o.max_y);
    }
}

/// Disjoint sets whose roots own the merged component statistics.
struct Equivalences {
    parent: Vec<u32>,
    stats: Vec<Stats>,
}

impl Equivalences {
    fn add(&mut self, s: Stats) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        self.stats.push(s);
        id
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let grand = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = grand;
            i = grand;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (big, small) = if self.stats[ra as usize].area >= self.stats[rb as usize].area {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        let s = self.stats[small as usize];
        self.stats[big as usize].absorb(&s);
        big
    }
}

#[derive(Debug, Clone, Copy)]
struct Run {
    y: u32,
    x0: u32,
    x1: u32,
    id: u32,
}

/// Components plus the runs needed to paint a label map on request.
#[derive(Debug, Clone)]
pub struct Labeling {
    pub width: usize,
    pub height: usize,
    pub components: Vec<ComponentRecord>,
    runs: Vec<(u32, u32, u32, u32)>,
}

impl Labeling {
    /// Row-major label image: 0 for background, component label otherwise.
    pub fn label_map(&self) -> Vec<u32> {
        let mut map = vec![0u32; self.width * self.height];
        for &(y, x0, x1, label) in &self.runs {
            let base = y as usize * self.width;
            map[base + x0 as usize..=base + x1 as usize].fill(label);
        }
        map
    }

    /// Label of one pixel; 0 for background or outside the image.
    pub fn label_at(&self, x: i64, y: i64) -> u32 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return 0;
        }
        let (x, y) = (x as u32, y as u32);
        // runs are in row-major order
        let i = self.runs.partition_point(|&(ry, _, x1, _)| (ry, x1) < (y, x));
        match self.runs.get(i) {
            Some(&(ry, x0, _, label)) if ry == y && x0 <= x => label,
            _ => 0,
        }
    }
}

/// Components of a binary frame, largest first (ties by top-left of the bbox).
pub fn label_components(frame: &Frame, connectivity: Connectivity) -> Result<Vec<ComponentRecord>> {
    label_with_runs(frame, connectivity).map(|l| l.components)
}

pub fn label_with_runs(frame: &Frame, connectivity: Connectivity) -> Result<Labeling> {
    frame.expect_kind(FrameKind::Binary, "label_components")?;
    let (w, h) = (frame.width(), frame.height());
    let data = frame.data();
    let reach: i64 = match connectivity {
        Connectivity::Four => 0,
        Connectivity::Eight => 1,
    };

    let mut eq = Equivalences {
        parent: Vec::new(),
        stats: Vec::new(),
    };
    let mut runs: Vec<Run> = Vec::new();
    let mut prev_start = 0usize;
    for y in 0..h {
        let row_start = runs.len();
        let line = &data[y * w..(y + 1) * w];
        let mut x = 0usize;
        let mut p = prev_start;
        while x < w {
            if line[x] == 0 {
                x += 1;
                continue;
            }
            let x0 = x;
            while x < w && line[x] != 0 {
                x += 1;
            }
            let x1 = x - 1;
            let mut id = eq.add(Stats::of_run(y as u32, x0 as u32, x1 as u32));
            // previous-row runs ending before our reach can never touch later runs
            while p < row_start && (runs[p].x1 as i64) < x0 as i64 - reach {
                p += 1;
            }
            let mut q = p;
            while q < row_start && (runs[q].x0 as i64) <= x1 as i64 + reach {
                id = eq.union(id, runs[q].id);
                q += 1;
            }
            runs.push(Run {
                y: y as u32,
                x0: x0 as u32,
                x1: x1 as u32,
                id,
            });
        }
        prev_start = row_start;
    }

    // resolve: one record per root
    let mut roots: Vec<u32> = Vec::new();
    for i in 0..eq.parent.len() as u32 {
        if eq.find(i) == i {
            roots.push(i);
        }
    }
    let mut components: Vec<(u32, ComponentRecord)> = roots
        .iter()
        .map(|&r| {
            let s = eq.stats[r as usize];
            let bbox = BBox {
                min_x: s.min_x as usize,
                min_y: s.min_y as usize,
                max_x: s.max_x as usize,
                max_y: s.max_y as usize,
            };
            let touches_border =
                bbox.min_x == 0 || bbox.min_y == 0 || bbox.max_x + 1 == w || bbox.max_y + 1 == h;
            let rec = ComponentRecord {
                label: 0,
                area: s.area,
                bbox,
                centroid: (s.sum_x as f64 / s.area as f64, s.sum_y as f64 / s.area as f64),
                touches_border,
            };
            (r, rec)
        })
        .collect();
    components.sort_by(|(_, a), (_, b)| {
        b.area
            .cmp(&a.area)
            .then(a.bbox.min_y.cmp(&b.bbox.min_y))
            .then(a.bbox.min_x.cmp(&b.bbox.min_x))
    });
    let mut final_label = vec![0u32; eq.parent.len()];
    for (k, (root, rec)) in components.iter_mut().enumerate() {
        rec.label = k as u32 + 1;
        final_label[*root as usize] = rec.label;
    }
    let runs = runs
        .into_iter()
        .map(|r| {
            let root = eq.find(r.id);
            (r.y, r.x0, r.x1, final_label[root as usize])
        })
        .collect();
    Ok(Labeling {
        width: w,
        height: h,
        components: components.into_iter().map(|(_, c)| c).collect(),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(w: usize, h: usize, on: &[(usize, usize)]) -> Frame {
        let mut f = Frame::filled(w, h, FrameKind::Binary, 0);
        for &(x, y) in on {
            f.set(x, y, 255);
        }
        f
    }

    #[test]
    fn empty_frame() {
        let f = Frame::filled(8, 8, FrameKind::Binary, 0);
        assert!(label_components(&f, Connectivity::Eight).unwrap().is_empty());
    }

    #[test]
    fn single_pixel() {
        let c = label_components(&binary(8, 8, &[(3, 4)]), Connectivity::Eight).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].area, 1);
        assert_eq!(
            c[0].bbox,
            BBox { min_x: 3, min_y: 4, max_x: 3, max_y: 4 }
        );
        assert_eq!(c[0].centroid, (3.0, 4.0));
        assert!(!c[0].touches_border);
    }

    #[test]
    fn diagonal_pair() {
        let f = binary(4, 4, &[(0, 0), (1, 1)]);
        let eight = label_components(&f, Connectivity::Eight).unwrap();
        assert_eq!(eight.len(), 1);
        assert_eq!(eight[0].area, 2);
        assert_eq!(eight[0].centroid, (0.5, 0.5));
        assert!(eight[0].touches_border);
        assert_eq!(label_components(&f, Connectivity::Four).unwrap().len(), 2);
    }

    #[test]
    fn u_shape_merges_late() {
        // two columns joined only by the bottom row
        let mut on = Vec::new();
        for y in 0..5 {
            on.push((1, y));
            on.push((5, y));
        }
        for x in 1..=5 {
            on.push((x, 5));
        }
        let f = binary(8, 8, &on);
        let lab = label_with_runs(&f, Connectivity::Four).unwrap();
        assert_eq!(lab.components.len(), 1);
        assert_eq!(lab.components[0].area, 15);
        let map = lab.label_map();
        assert_eq!(map.iter().filter(|&&l| l == 1).count(), 15);
        for y in -1..9i64 {
            for x in -1..9i64 {
                let expect = if (0..8).contains(&x) && (0..8).contains(&y) {
                    map[y as usize * 8 + x as usize]
                } else {
                    0
                };
                assert_eq!(lab.label_at(x, y), expect, "({x},{y})");
            }
        }
    }

    #[test]
    fn order_and_labels() {
        let f = binary(10, 10, &[(8, 0), (0, 5), (1, 5), (5, 8)]);
        let c = label_components(&f, Connectivity::Eight).unwrap();
        assert_eq!(c.iter().map(|r| r.area).collect::<Vec<_>>(), vec![2, 1, 1]);
        assert_eq!(c[1].bbox.min_y, 0);
        assert_eq!(c.iter().map(|r| r.label).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn rejects_grey() {
        assert!(label_components(&Frame::filled(2, 2, FrameKind::Grey, 0), Connectivity::Four).is_err());
    }
}
