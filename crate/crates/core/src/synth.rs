//! Deterministic renderer of the landing marker seen by a nadir pinhole camera.
//!
//! A ground point `m` (pad frame, metres) lands on pixel
//! `c + R(yaw)·(m − position)·focal/altitude`, where `c` is the principal
//! point and `R(yaw)` rotates clockwise on screen. Pixels near a figure edge
//! are supersampled 4×4; the rest take a single centre sample, which gives
//! the same result there because the material is constant over the pixel.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::imgio::{self, Frame, FrameKind};
use crate::shapes::{wrap_deg, CameraModel, MarkerSpec};

pub const SUPERSAMPLE: usize = 4;
/// Side of the square pixel tiles culled as a whole.
const TILE: usize = 32;
/// Boundary tiles are split down to this width before going per pixel.
const MIN_TILE: usize = 4;

/// Reflectance of the printed black figures.
const INK: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Illumination {
    /// Grey level of a white surface at the image centre.
    pub base: f64,
    /// Grey-level change across the full image width.
    pub ramp_x: f64,
    /// Grey-level change across the full image height.
    pub ramp_y: f64,
}

impl Default for Illumination {
    fn default() -> Self {
        Self {
            base: 200.0,
            ramp_x: 0.0,
            ramp_y: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Background {
    /// Constant reflectance in [0, 1].
    Uniform { level: f64 },
    /// Ground-fixed checkerboard with square `period` metres.
    Checker { period: f64, dark: f64, light: f64 },
    /// Smooth multi-octave value noise, tinted.
    Texture { seed: u64 },
}

impl Default for Background {
    fn default() -> Self {
        Background::Uniform { level: 0.45 }
    }
}

/// Drone pose and imaging conditions for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePose {
    /// Drone ground-plane position relative to the pad centre, metres.
    pub position: [f64; 2],
    pub altitude: f64,
    /// Apparent clockwise on-screen rotation of the pad, degrees.
    pub yaw_deg: f64,
    pub illumination: Illumination,
    /// Standard deviation of additive Gaussian pixel noise, grey levels.
    pub noise_sigma: f64,
    pub background: Background,
    /// Render the pad and marker; false gives a marker-free frame.
    pub marker_present: bool,
}

impl Default for ScenePose {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0],
            altitude: 1.0,
            yaw_deg: 0.0,
            illumination: Illumination::default(),
            noise_sigma: 0.0,
            background: Background::default(),
            marker_present: true,
        }
    }
}

impl ScenePose {
    pub fn validate(&self) -> Result<()> {
        if !(self.altitude > 0.0) {
            return Err(Error::contract("scene altitude must be positive"));
        }
        if !(0.0..=255.0).contains(&self.illumination.base) {
            return Err(Error::contract("illumination base must lie in [0, 255]"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::contract("noise sigma must be non-negative"));
        }
        Ok(())
    }
}

/// Axis-aligned image-plane box in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PxBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl PxBox {
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn inside_image(&self, width: usize, height: usize) -> bool {
        self.min_x >= -0.5
            && self.min_y >= -0.5
            && self.max_x <= width as f64 - 0.5
            && self.max_y <= height as f64 - 0.5
    }

    pub fn intersects_image(&self, width: usize, height: usize) -> bool {
        self.max_x >= -0.5
            && self.max_y >= -0.5
            && self.min_x <= width as f64 - 0.5
            && self.min_y <= height as f64 - 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureBoxes {
    pub ring: PxBox,
    pub small_circle: PxBox,
    pub square: PxBox,
    pub rectangle: PxBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    /// Some part of the ring is in view.
    pub marker: bool,
    /// The whole ring is in view.
    pub ring_complete: bool,
    pub small_circle: bool,
}

/// Exact geometry of a rendered frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub frame_index: u64,
    pub visible: Visibility,
    pub centre_px: (f64, f64),
    pub orientation_deg: f64,
    pub boxes: FigureBoxes,
    pub pose: ScenePose,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Material {
    Ink,
    Pad,
    Ground,
}

/// Marker geometry in pad-frame metres, plus helpers for rendering.
struct Layout {
    outer_r: f64,
    inner_r: f64,
    small_r: f64,
    pad_half: f64,
    square: OrientedRect,
    rect: OrientedRect,
}

struct OrientedRect {
    centre: [f64; 2],
    along: [f64; 2],
    half_along: f64,
    half_across: f64,
}

impl OrientedRect {
    fn local(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.centre[0], y - self.centre[1]);
        (
            dx * self.along[0] + dy * self.along[1],
            -dx * self.along[1] + dy * self.along[0],
        )
    }

    /// Whether (x, y) is inside, and its distance to the outline.
    fn probe(&self, x: f64, y: f64) -> (bool, f64) {
        let (a, b) = self.local(x, y);
        let (da, db) = (a.abs() - self.half_along, b.abs() - self.half_across);
        if da <= 0.0 && db <= 0.0 {
            (true, (-da).min(-db))
        } else {
            (false, norm(da.max(0.0), db.max(0.0)))
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let (a, b) = self.local(x, y);
        a.abs() <= self.half_along && b.abs() <= self.half_across
    }

    fn corners(&self) -> [[f64; 2]; 4] {
        let across = [-self.along[1], self.along[0]];
        [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)].map(|(sa, sc)| {
            [
                self.centre[0] + sa * self.half_along * self.along[0] + sc * self.half_across * across[0],
                self.centre[1] + sa * self.half_along * self.along[1] + sc * self.half_across * across[1],
            ]
        })
    }
}

impl Layout {
    fn new(spec: &MarkerSpec) -> Self {
        let (along, _) = spec.axis_frame();
        Self {
            outer_r: spec.large_circle_outer_diameter / 2.0,
            inner_r: spec.inner_diameter() / 2.0,
            small_r: spec.small_circle_diameter / 2.0,
            pad_half: spec.pad_side / 2.0,
            square: OrientedRect {
                centre: spec.square_centre_offset,
                along,
                half_along: spec.square_side / 2.0,
                half_across: spec.square_side / 2.0,
            },
            rect: OrientedRect {
                centre: spec.rect_centre_offset,
                along,
                half_along: spec.rect_width / 2.0,
                half_across: spec.rect_height / 2.0,
            },
        }
    }

    /// Material at (x, y) and a lower bound on its distance to any material
    /// boundary.
    fn probe(&self, x: f64, y: f64) -> (Material, f64) {
        let (ax, ay) = (x.abs(), y.abs());
        let pad = (self.pad_half - ax).abs().min((self.pad_half - ay).abs());
        if ax > self.pad_half || ay > self.pad_half {
            return (Material::Ground, pad);
        }
        let r = norm(x, y);
        if r > self.outer_r {
            // all figures lie inside the ring
            return (Material::Pad, pad.min(r - self.outer_r));
        }
        if r >= self.inner_r {
            return (Material::Ink, (self.outer_r - r).min(r - self.inner_r));
        }
        let (in_sq, d_sq) = self.square.probe(x, y);
        let (in_rect, d_rect) = self.rect.probe(x, y);
        let edge = (self.inner_r - r).min((r - self.small_r).abs()).min(d_sq).min(d_rect);
        let m = if r <= self.small_r || in_sq || in_rect {
            Material::Ink
        } else {
            Material::Pad
        };
        (m, edge)
    }
}

impl Layout {
    /// The material of [`Layout::probe`] without the edge distance.
    fn material(&self, x: f64, y: f64) -> Material {
        if x.abs() > self.pad_half || y.abs() > self.pad_half {
            return Material::Ground;
        }
        let r = norm(x, y);
        if r > self.outer_r {
            Material::Pad
        } else if r >= self.inner_r
            || r <= self.small_r
            || self.square.contains(x, y)
            || self.rect.contains(x, y)
        {
            Material::Ink
        } else {
            Material::Pad
        }
    }
}

/// Euclidean norm without `hypot`'s overflow guard, which costs more than
/// the rest of a pixel.
#[inline]
fn norm(x: f64, y: f64) -> f64 {
    (x * x + y * y).sqrt()
}

fn hash2(seed: u64, i: i64, j: i64) -> f64 {
    let mut h = seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    h = h.wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    h ^= h >> 33;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (tx, ty) = (x - fx, y - fy);
    let (sx, sy) = (tx * tx * (3.0 - 2.0 * tx), ty * ty * (3.0 - 2.0 * ty));
    let (i, j) = (fx as i64, fy as i64);
    let a = hash2(seed, i, j);
    let b = hash2(seed, i + 1, j);
    let c = hash2(seed, i, j + 1);
    let d = hash2(seed, i + 1, j + 1);
    let top = a + (b - a) * sx;
    let bottom = c + (d - c) * sx;
    top + (bottom - top) * sy
}

impl Background {
    /// Tinted RGB reflectance at ground point (x, y).
    fn reflectance(&self, x: f64, y: f64) -> [f64; 3] {
        match *self {
            Background::Uniform { level } => [level; 3],
            Background::Checker { period, dark, light } => {
                let parity = ((x / period).floor() as i64 + (y / period).floor() as i64).rem_euclid(2);
                [if parity == 0 { dark } else { light }; 3]
            }
            Background::Texture { seed } => {
                let mut v = 0.0;
                let mut amp = 0.5;
                let mut freq = 1.0 / 0.4;
                for octave in 0..5u64 {
                    v += amp * value_noise(seed.wrapping_add(octave), x * freq, y * freq);
                    amp *= 0.5;
                    freq *= 2.0;
                }
                let v = 0.2 + 0.55 * (v / 0.97);
                [v * 0.85, v, v * 0.7]
            }
        }
    }

    fn edge_distance(&self, x: f64, y: f64) -> f64 {
        match *self {
            Background::Checker { period, .. } => {
                let fx = (x / period).rem_euclid(1.0);
                let fy = (y / period).rem_euclid(1.0);
                period * fx.min(1.0 - fx).min(fy).min(1.0 - fy)
            }
            _ => f64::INFINITY,
        }
    }
}

/// Image-to-ground mapping of one camera pose.
struct Projection {
    cx: f64,
    cy: f64,
    scale: f64,
    cos: f64,
    sin: f64,
    position: [f64; 2],
}

impl Projection {
    fn new(cam: &CameraModel, pose: &ScenePose) -> Self {
        let (cx, cy) = cam.principal_point();
        let (sin, cos) = pose.yaw_deg.to_radians().sin_cos();
        Self {
            cx,
            cy,
            scale: cam.pixels_per_metre(pose.altitude),
            cos,
            sin,
            position: pose.position,
        }
    }

    fn to_ground(&self, u: f64, v: f64) -> (f64, f64) {
        let (du, dv) = ((u - self.cx) / self.scale, (v - self.cy) / self.scale);
        // R(-yaw)
        (
            self.position[0] + self.cos * du + self.sin * dv,
            self.position[1] - self.sin * du + self.cos * dv,
        )
    }

    fn to_image(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.position[0], y - self.position[1]);
        (
            self.cx + self.scale * (self.cos * dx - self.sin * dy),
            self.cy + self.scale * (self.sin * dx + self.cos * dy),
        )
    }

    fn bbox_of(&self, pts: &[[f64; 2]]) -> PxBox {
        let mut b = PxBox {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for p in pts {
            let (u, v) = self.to_image(p[0], p[1]);
            b.min_x = b.min_x.min(u);
            b.min_y = b.min_y.min(v);
            b.max_x = b.max_x.max(u);
            b.max_y = b.max_y.max(v);
        }
        b
    }

    fn circle_box(&self, centre: [f64; 2], r: f64) -> PxBox {
        let (u, v) = self.to_image(centre[0], centre[1]);
        let rp = r * self.scale;
        PxBox {
            min_x: u - rp,
            min_y: v - rp,
            max_x: u + rp,
            max_y: v + rp,
        }
    }
}

/// Exact ground truth of a pose without rendering pixels.
pub fn ground_truth(spec: &MarkerSpec, cam: &CameraModel, pose: &ScenePose) -> GroundTruth {
    let layout = Layout::new(spec);
    let proj = Projection::new(cam, pose);
    let ring = proj.circle_box([0.0, 0.0], layout.outer_r);
    let small_circle = proj.circle_box([0.0, 0.0], layout.small_r);
    let boxes = FigureBoxes {
        ring,
        small_circle,
        square: proj.bbox_of(&layout.square.corners()),
        rectangle: proj.bbox_of(&layout.rect.corners()),
    };
    let present = pose.marker_present;
    GroundTruth {
        frame_index: 0,
        visible: Visibility {
            marker: present && ring.intersects_image(cam.width, cam.height),
            ring_complete: present && ring.inside_image(cam.width, cam.height),
            small_circle: present && small_circle.inside_image(cam.width, cam.height),
        },
        centre_px: proj.to_image(0.0, 0.0),
        orientation_deg: wrap_deg(pose.yaw_deg),
        boxes,
        pose: pose.clone(),
    }
}

/// Renders one RGB frame and its ground truth.
pub fn render(
    spec: &MarkerSpec,
    cam: &CameraModel,
    pose: &ScenePose,
    seed: u64,
) -> Result<(Frame, GroundTruth)> {
    render_with(spec, cam, pose, seed, Exec::default())
}

pub fn render_with(
    spec: &MarkerSpec,
    cam: &CameraModel,
    pose: &ScenePose,
    seed: u64,
    exec: Exec,
) -> Result<(Frame, GroundTruth)> {
    pose.validate()?;
    cam.validate()?;
    let layout = Layout::new(spec);
    let proj = Projection::new(cam, pose);
    let (w, h) = (cam.width, cam.height);
    let truth = ground_truth(spec, cam, pose);

    // a pixel footprint fits in a disk of radius ~0.71 px; pad a little
    let fine_band = 0.75 / proj.scale;
    let reach = layout.pad_half * std::f64::consts::SQRT_2 + fine_band;
    let bg = pose.background;
    let marker = pose.marker_present;
    let surface = |m: Material, x: f64, y: f64| -> [f64; 3] {
        match m {
            Material::Ink => [INK; 3],
            Material::Pad => [1.0; 3],
            Material::Ground => bg.reflectance(x, y),
        }
    };
    let shade = |x: f64, y: f64| -> [f64; 3] {
        if !marker || norm(x, y) > reach {
            return bg.reflectance(x, y);
        }
        surface(layout.material(x, y), x, y)
    };
    let sub: Vec<f64> = (0..SUPERSAMPLE)
        .map(|i| (i as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5)
        .collect();
    let supersample = |u: f64, v: f64| -> [f64; 3] {
        let mut acc = [0.0; 3];
        for &sy in &sub {
            for &sx in &sub {
                let (px, py) = proj.to_ground(u + sx, v + sy);
                let c = shade(px, py);
                for k in 0..3 {
                    acc[k] += c[k];
                }
            }
        }
        acc.map(|a| a / (SUPERSAMPLE * SUPERSAMPLE) as f64)
    };
    let bg_edges = matches!(bg, Background::Checker { .. });
    let flat = match bg {
        Background::Uniform { level } => Some([level; 3]),
        _ => None,
    };
    let background = |u: f64, v: f64| -> [f64; 3] {
        if let Some(c) = flat {
            return c;
        }
        let (gx, gy) = proj.to_ground(u, v);
        if bg_edges && bg.edge_distance(gx, gy) < fine_band {
            supersample(u, v)
        } else {
            bg.reflectance(gx, gy)
        }
    };
    // ground radius of a tile around its centre pixel
    let tile_r = |size: usize| (size - 1) as f64 * std::f64::consts::FRAC_1_SQRT_2 / proj.scale;
    // one material over the whole tile unless a boundary is near
    let tile_material = |x0: usize, y: usize, size: usize| -> Option<Material> {
        let uc = x0 as f64 + (size - 1) as f64 / 2.0;
        let vc = ((y / size) * size) as f64 + (size - 1) as f64 / 2.0;
        let (gx, gy) = proj.to_ground(uc, vc);
        let r = tile_r(size);
        if !marker || norm(gx, gy) > reach + r {
            Some(Material::Ground)
        } else {
            let (m, edge) = layout.probe(gx, gy);
            (edge > r + fine_band).then_some(m)
        }
    };
    let ill = pose.illumination;
    let ramp_step = ill.ramp_x / (w.max(2) - 1) as f64;
    let ramp: Vec<f64> = (0..w).map(|x| ramp_step * x as f64).collect();

    let mut data = vec![0u8; w * h * 3];
    exec.for_each_row(&mut data, w * 3, |y, row| {
        let v = y as f64;
        let light_y = ill.base + ill.ramp_y * (v / (h.max(2) - 1) as f64 - 0.5);
        let light: Vec<f64> = ramp.iter().map(|r| light_y + r - ill.ramp_x * 0.5).collect();
        let mut stack = Vec::new();
        for tx in (0..w).step_by(TILE) {
            stack.push((tx, TILE));
            while let Some((x0, size)) = stack.pop() {
                if x0 >= w {
                    continue;
                }
                let x1 = (x0 + size).min(w);
                let tile = tile_material(x0, y, size);
                if tile.is_none() && size > MIN_TILE {
                    let half = size / 2;
                    stack.push((x0 + half, half));
                    stack.push((x0, half));
                    continue;
                }
                let pixels = row[x0 * 3..x1 * 3].chunks_exact_mut(3).zip(&light[x0..x1]);
                let uniform = match tile {
                    Some(Material::Ground) => flat,
                    Some(m) => Some(surface(m, 0.0, 0.0)),
                    None => None,
                };
                if let Some(refl) = uniform {
                    if refl[0] == refl[1] && refl[1] == refl[2] {
                        let r = refl[0];
                        for (px, &l) in pixels {
                            px.fill(quantize(r * l));
                        }
                    } else {
                        for (px, &l) in pixels {
                            for (out, r) in px.iter_mut().zip(refl) {
                                *out = quantize(r * l);
                            }
                        }
                    }
                    continue;
                }
                for (x, (px, &l)) in (x0..x1).zip(pixels) {
                    let u = x as f64;
                    let refl = match tile {
                        Some(_) => background(u, v),
                        None => {
                            let (gx, gy) = proj.to_ground(u, v);
                            let (m, edge) = layout.probe(gx, gy);
                            if edge < fine_band {
                                supersample(u, v)
                            } else if m == Material::Ground {
                                background(u, v)
                            } else {
                                surface(m, gx, gy)
                            }
                        }
                    };
                    for (out, r) in px.iter_mut().zip(refl) {
                        *out = quantize(r * l);
                    }
                }
            }
        }
    });

    if pose.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, pose.noise_sigma).map_err(|e| Error::contract(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in data.iter_mut() {
            *s = quantize(*s as f64 + normal.sample(&mut rng));
        }
    }
    let frame = Frame::from_parts(w, h, FrameKind::Rgb, data);
    Ok((frame, truth))
}

/// Round half up, clamped to [0, 255].
fn quantize(v: f64) -> u8 {
    // float-to-int casts truncate toward zero and saturate
    (v + 0.5) as u8
}

/// Paints `cuts` evenly spaced radial white bars of `gap_px` width across the
/// ring, splitting it into arcs.
pub fn sever_ring(frame: &Frame, truth: &GroundTruth, cuts: usize, gap_px: f64, level: u8) -> Frame {
    let mut out = frame.to_rgb();
    let (cx, cy) = truth.centre_px;
    let outer = (truth.boxes.ring.max_x - truth.boxes.ring.min_x) / 2.0 + 3.0;
    let angles: Vec<(f64, f64)> = (0..cuts)
        .map(|k| {
            let a = (k as f64 + 0.5) * std::f64::consts::TAU / cuts as f64 + truth.orientation_deg.to_radians();
            a.sin_cos()
        })
        .collect();
    for y in 0..out.height() {
        for x in 0..out.width() {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let r = dx.hypot(dy);
            if r > outer {
                continue;
            }
            let hit = angles.iter().any(|&(s, c)| {
                let along = dx * c + dy * s;
                let across = -dx * s + dy * c;
                along > 0.0 && across.abs() <= gap_px / 2.0 && r > outer * 0.55
            });
            if hit {
                out.set_rgb(x, y, [level; 3]);
            }
        }
    }
    out
}

/// Distribution of scene poses for a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusRecipe {
    pub altitude_m: (f64, f64),
    pub yaw_deg: (f64, f64),
    /// Largest marker-centre offset as a fraction of the half frame, per axis.
    pub max_offset_frac: f64,
    /// Largest |ramp| per axis, grey levels.
    pub max_ramp: f64,
    pub base_level: (f64, f64),
    pub max_noise_sigma: f64,
    /// Below this altitude only the small circle must stay in view; above it the
    /// offset is clamped to keep the ring in frame.
    pub ring_in_view_above_m: f64,
    pub marker_present: bool,
    /// Relative weights of uniform, checker and texture backgrounds.
    pub background_weights: [f64; 3],
}

impl Default for CorpusRecipe {
    fn default() -> Self {
        Self {
            altitude_m: (0.3, 1.5),
            yaw_deg: (-180.0, 180.0),
            max_offset_frac: 0.4,
            max_ramp: 40.0,
            base_level: (150.0, 230.0),
            max_noise_sigma: 4.0,
            ring_in_view_above_m: 0.35,
            marker_present: true,
            background_weights: [1.0, 1.0, 1.0],
        }
    }
}

impl CorpusRecipe {
    /// Marker-free frames over textured ground.
    pub fn marker_free() -> Self {
        Self {
            marker_present: false,
            background_weights: [0.0, 0.0, 1.0],
            ..Self::default()
        }
    }

    /// Seed of frame `index` derived from the corpus seed.
    pub fn frame_seed(seed: u64, index: u64) -> u64 {
        seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1)
    }

    /// Draws the pose of frame `index`.
    pub fn sample(&self, spec: &MarkerSpec, cam: &CameraModel, seed: u64, index: u64) -> ScenePose {
        let mut rng = ChaCha8Rng::seed_from_u64(Self::frame_seed(seed, index));
        let mut uniform = |r: (f64, f64)| if r.1 > r.0 { rng.random_range(r.0..r.1) } else { r.0 };
        let altitude = uniform(self.altitude_m);
        let yaw_deg = uniform(self.yaw_deg);
        let (hw, hh) = (cam.width as f64 / 2.0, cam.height as f64 / 2.0);
        let mut ox = uniform((-self.max_offset_frac * hw, self.max_offset_frac * hw));
        let mut oy = uniform((-self.max_offset_frac * hh, self.max_offset_frac * hh));
        let scale = cam.pixels_per_metre(altitude);
        let keep_r = if altitude >= self.ring_in_view_above_m {
            spec.large_circle_outer_diameter / 2.0 * scale + 3.0
        } else {
            spec.small_circle_diameter / 2.0 * scale + 3.0
        };
        ox = ox.clamp(-(hw - keep_r).max(0.0), (hw - keep_r).max(0.0));
        oy = oy.clamp(-(hh - keep_r).max(0.0), (hh - keep_r).max(0.0));
        let ramp_x = uniform((-self.max_ramp, self.max_ramp));
        let ramp_y = uniform((-self.max_ramp, self.max_ramp));
        let base = uniform(self.base_level);
        let noise_sigma = uniform((0.0, self.max_noise_sigma));
        let total: f64 = self.background_weights.iter().sum();
        let pick = uniform((0.0, total));
        let bg_seed: u64 = rng.random();
        let background = if pick < self.background_weights[0] {
            Background::Uniform {
                level: rng.random_range(0.3..0.7),
            }
        } else if pick < self.background_weights[0] + self.background_weights[1] {
            let dark = rng.random_range(0.25..0.45);
            Background::Checker {
                period: rng.random_range(0.08..0.3),
                dark,
                light: dark + rng.random_range(0.15..0.35),
            }
        } else {
            Background::Texture { seed: bg_seed }
        };
        // marker centre = c − R(yaw)·position·scale  ⇒  position = −R(−yaw)·offset/scale
        let (s, c) = yaw_deg.to_radians().sin_cos();
        let position = [-(c * ox + s * oy) / scale, -(-s * ox + c * oy) / scale];
        ScenePose {
            position,
            altitude,
            yaw_deg,
            illumination: Illumination { base, ramp_x, ramp_y },
            noise_sigma,
            background,
            marker_present: self.marker_present,
        }
    }
}

pub const TRUTH_FILE: &str = "truth.jsonl";
pub const ALTITUDE_FILE: &str = "altitude.csv";

/// Renders frame `index` of a corpus.
pub fn corpus_frame(
    recipe: &CorpusRecipe,
    spec: &MarkerSpec,
    cam: &CameraModel,
    seed: u64,
    index: u64,
) -> Result<(Frame, GroundTruth)> {
    let pose = recipe.sample(spec, cam, seed, index);
    let (frame, mut truth) = render_with(spec, cam, &pose, CorpusRecipe::frame_seed(seed, index), Exec::Sequential)?;
    truth.frame_index = index;
    Ok((frame.with_index(index), truth))
}

/// Writes a sequence directory: `frame_%06d.ppm`, `altitude.csv` and `truth.jsonl`.
pub fn make_corpus(
    recipe: &CorpusRecipe,
    spec: &MarkerSpec,
    cam: &CameraModel,
    n: usize,
    seed: u64,
    dir: impl AsRef<Path>,
    exec: Exec,
) -> Result<Vec<GroundTruth>> {
    if n == 0 {
        return Err(Error::contract("corpus needs at least one frame"));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let indices: Vec<u64> = (0..n as u64).collect();
    let results = exec.map(&indices, |&i| -> Result<GroundTruth> {
        let (frame, truth) = corpus_frame(recipe, spec, cam, seed, i)?;
        imgio::save_pnm(dir.join(imgio::sequence_frame_name(i)), &frame)?;
        Ok(truth)
    });
    let truths = results.into_iter().collect::<Result<Vec<_>>>()?;
    let alt: Vec<(u64, f64)> = truths.iter().map(|t| (t.frame_index, t.pose.altitude)).collect();
    let alt_path = dir.join(ALTITUDE_FILE);
    fs::write(&alt_path, imgio::format_altitude_log(&alt)).map_err(|e| Error::io(&alt_path, e))?;
    let mut lines = String::new();
    for t in &truths {
        lines.push_str(&serde_json::to_string(t)?);
        lines.push('\n');
    }
    let truth_path = dir.join(TRUTH_FILE);
    fs::write(&truth_path, lines).map_err(|e| Error::io(&truth_path, e))?;
    Ok(truths)
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruth>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
