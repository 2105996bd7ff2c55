//! Altitude-gated classification of components into the four marker figures.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ccl::{BBox, ComponentRecord, Labeling};
use crate::error::{Error, Result};

/// Physical layout of the landing marker, in metres, in the marker frame
/// (x right, y down when the marker sits at orientation 0).
///
/// The large circle is a black ring. The square, the rectangle and the small
/// circle are black figures inside its white interior; the whole marker is
/// printed on a white square board of side `pad_side`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarkerSpec {
    pub large_circle_outer_diameter: f64,
    pub ring_thickness: f64,
    pub small_circle_diameter: f64,
    pub square_side: f64,
    /// Rectangle extent along the nominal axis.
    pub rect_width: f64,
    /// Rectangle extent across the nominal axis.
    pub rect_height: f64,
    pub square_centre_offset: [f64; 2],
    pub rect_centre_offset: [f64; 2],
    /// Direction from square to rectangle at orientation 0, degrees.
    pub nominal_axis_deg: f64,
    pub pad_side: f64,
}

impl Default for MarkerSpec {
    fn default() -> Self {
        Self {
            large_circle_outer_diameter: 0.40,
            ring_thickness: 0.05,
            small_circle_diameter: 0.05,
            square_side: 0.07,
            rect_width: 0.06,
            rect_height: 0.12,
            square_centre_offset: [-0.09, 0.0],
            rect_centre_offset: [0.09, 0.0],
            nominal_axis_deg: 0.0,
            pad_side: 0.60,
        }
    }
}

impl MarkerSpec {
    pub fn inner_diameter(&self) -> f64 {
        self.large_circle_outer_diameter - 2.0 * self.ring_thickness
    }

    pub fn ring_area(&self) -> f64 {
        PI / 4.0 * (self.large_circle_outer_diameter.powi(2) - self.inner_diameter().powi(2))
    }

    pub fn square_area(&self) -> f64 {
        self.square_side.powi(2)
    }

    pub fn rect_area(&self) -> f64 {
        self.rect_width * self.rect_height
    }

    /// Angle of the square→rectangle axis implied by the centre offsets.
    pub fn offset_axis_deg(&self) -> f64 {
        let dx = self.rect_centre_offset[0] - self.square_centre_offset[0];
        let dy = self.rect_centre_offset[1] - self.square_centre_offset[1];
        dy.atan2(dx).to_degrees()
    }

    /// Unit vectors (along, across) of the nominal axis.
    pub fn axis_frame(&self) -> ([f64; 2], [f64; 2]) {
        let a = self.nominal_axis_deg.to_radians();
        ([a.cos(), a.sin()], [-a.sin(), a.cos()])
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.large_circle_outer_diameter,
            self.ring_thickness,
            self.small_circle_diameter,
            self.square_side,
            self.rect_width,
            self.rect_height,
            self.pad_side,
        ];
        if dims.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Input("marker dimensions must be positive".into()));
        }
        if self.inner_diameter() <= 0.0 {
            return Err(Error::Input("ring thickness exceeds the circle radius".into()));
        }
        let (sq, rect) = (self.square_area(), self.rect_area());
        if (sq - rect).abs() / sq.min(rect) < 0.3 {
            return Err(Error::Input(format!(
                "square area {sq:.5} and rectangle area {rect:.5} differ by less than 30%"
            )));
        }
        let wrapped = wrap_deg(self.offset_axis_deg() - self.nominal_axis_deg);
        if wrapped.abs() > 0.01 {
            return Err(Error::Input(format!(
                "nominal axis {}° disagrees with the figure offsets ({}°)",
                self.nominal_axis_deg,
                self.offset_axis_deg()
            )));
        }
        let inner_r = self.inner_diameter() / 2.0;
        let (along, across) = self.axis_frame();
        let corners_fit = |centre: [f64; 2], half_along: f64, half_across: f64| {
            [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)].iter().all(|(sa, sc)| {
                let x = centre[0] + sa * half_along * along[0] + sc * half_across * across[0];
                let y = centre[1] + sa * half_along * along[1] + sc * half_across * across[1];
                x.hypot(y) < inner_r
            })
        };
        if !corners_fit(self.square_centre_offset, self.square_side / 2.0, self.square_side / 2.0)
            || !corners_fit(self.rect_centre_offset, self.rect_width / 2.0, self.rect_height / 2.0)
        {
            return Err(Error::Input("square and rectangle must fit inside the ring".into()));
        }
        if self.pad_side < self.large_circle_outer_diameter {
            return Err(Error::Input("pad board smaller than the ring".into()));
        }
        Ok(())
    }
}

/// Wraps an angle in degrees to (−180, 180].
pub fn wrap_deg(a: f64) -> f64 {
    let mut r = a % 360.0;
    if r <= -180.0 {
        r += 360.0;
    } else if r > 180.0 {
        r -= 360.0;
    }
    r
}

/// Nadir pinhole camera with the principal point at the image centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub focal_px: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            focal_px: 645.0,
            width: 1280,
            height: 720,
        }
    }
}

impl CameraModel {
    /// Image centre in pixel-index coordinates (pixel centres at integers).
    pub fn principal_point(&self) -> (f64, f64) {
        (
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        )
    }

    /// Pixels per metre on the ground at `altitude` metres.
    pub fn pixels_per_metre(&self, altitude: f64) -> f64 {
        self.focal_px / altitude
    }

    /// Same field of view at a different resolution.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            focal_px: self.focal_px * factor,
            width: (self.width as f64 * factor).round() as usize,
            height: (self.height as f64 * factor).round() as usize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_px > 0.0) || self.width == 0 || self.height == 0 {
            return Err(Error::Input("camera needs focal_px > 0 and a non-empty image".into()));
        }
        Ok(())
    }
}

pub const MIN_ALTITUDE_M: f64 = 0.05;

/// Expected image-plane sizes of each figure at one altitude, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedSizes {
    pub ring_outer_diameter: f64,
    pub ring_inner_diameter: f64,
    pub ring_area: f64,
    pub small_circle_diameter: f64,
    pub small_circle_area: f64,
    pub square_side: f64,
    pub square_area: f64,
    pub rect_width: f64,
    pub rect_height: f64,
    pub rect_area: f64,
}

/// Pinhole scaling `focal · size / altitude` of every figure dimension.
pub fn expected_sizes(spec: &MarkerSpec, cam: &CameraModel, altitude: f64) -> Result<ExpectedSizes> {
    if !(altitude > MIN_ALTITUDE_M) {
        return Err(Error::contract(format!(
            "altitude {altitude} m must exceed {MIN_ALTITUDE_M} m"
        )));
    }
    let s = cam.pixels_per_metre(altitude);
    Ok(ExpectedSizes {
        ring_outer_diameter: spec.large_circle_outer_diameter * s,
        ring_inner_diameter: spec.inner_diameter() * s,
        ring_area: spec.ring_area() * s * s,
        small_circle_diameter: spec.small_circle_diameter * s,
        small_circle_area: PI / 4.0 * (spec.small_circle_diameter * s).powi(2),
        square_side: spec.square_side * s,
        square_area: spec.square_area() * s * s,
        rect_width: spec.rect_width * s,
        rect_height: spec.rect_height * s,
        rect_area: spec.rect_area() * s * s,
    })
}

impl ExpectedSizes {
    /// Sizes after every outline moved inward by `px` pixels: dark figures
    /// lose a rim to the threshold level and the morphology.
    pub fn shrunk(&self, px: f64) -> ExpectedSizes {
        let less = |d: f64| (d - 2.0 * px).max(1.0);
        let outer = less(self.ring_outer_diameter);
        let inner = (self.ring_inner_diameter + 2.0 * px).min(outer - 1.0);
        let small = less(self.small_circle_diameter);
        let side = less(self.square_side);
        let (rw, rh) = (less(self.rect_width), less(self.rect_height));
        ExpectedSizes {
            ring_outer_diameter: outer,
            ring_inner_diameter: inner,
            ring_area: PI / 4.0 * (outer * outer - inner * inner),
            small_circle_diameter: small,
            small_circle_area: PI / 4.0 * small * small,
            square_side: side,
            square_area: side * side,
            rect_width: rw,
            rect_height: rh,
            rect_area: rw * rh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShapeClass {
    LargeCircle,
    SmallCircle,
    Square,
    Rectangle,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 4] = [
        ShapeClass::LargeCircle,
        ShapeClass::SmallCircle,
        ShapeClass::Square,
        ShapeClass::Rectangle,
    ];
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Gate parameters for [`classify_component`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceProfile {
    /// Relative area tolerance: accept `area / expected ∈ [1 − tol, 1 + tol]`.
    pub area_tol: f64,
    /// Pixels lost per outline between the optics and the binary image.
    pub edge_shrink_px: f64,
    /// Largest bbox aspect (long/short side) for circles and the square.
    pub max_aspect: f64,
    pub ring_extent: Window,
    pub small_circle_extent: Window,
    pub square_extent: Window,
    pub rect_extent: Window,
    /// Bbox diameter over expected diameter, circles only.
    pub circle_diameter: Window,
    /// Least share of ring-band samples on the candidate itself.
    pub ring_band_min: f64,
    /// Largest share of hole samples on the candidate itself.
    pub ring_hole_max: f64,
    /// Largest share of foreground samples just outside the ring.
    pub ring_halo_max: f64,
    /// Least share of small-circle samples on the candidate, at half and at
    /// 0.85 of its radius.
    pub disk_fill_min: f64,
    /// Largest share of samples on the candidate at 1.2 radii, and of any
    /// foreground at 1.6 radii.
    pub disk_clear_max: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        Self {
            area_tol: 0.5,
            edge_shrink_px: 1.0,
            max_aspect: 1.25,
            ring_extent: Window::new(0.2, 0.5),
            small_circle_extent: Window::new(0.6, 0.9),
            square_extent: Window::new(0.45, 1.0),
            rect_extent: Window::new(0.35, 1.0),
            circle_diameter: Window::new(0.7, 1.3),
            ring_band_min: 0.8,
            ring_hole_max: 0.05,
            ring_halo_max: 0.1,
            disk_fill_min: 0.85,
            disk_clear_max: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeDetection {
    pub shape_class: ShapeClass,
    pub component: ComponentRecord,
    pub expected_area: f64,
    /// `|area / expected_area − 1|`.
    pub match_error: f64,
}

impl ShapeDetection {
    pub fn bbox(&self) -> &BBox {
        &self.component.bbox
    }
}

/// Runs the gates of one class; returns the relative area error on success.
fn gate(
    class: ShapeClass,
    c: &ComponentRecord,
    expected: &ExpectedSizes,
    tol: &ToleranceProfile,
) -> Option<(f64, f64)> {
    let expected_area = match class {
        ShapeClass::LargeCircle => expected.ring_area,
        ShapeClass::SmallCircle => expected.small_circle_area,
        ShapeClass::Square => expected.square_area,
        ShapeClass::Rectangle => expected.rect_area,
    };
    let err = (c.area as f64 / expected_area - 1.0).abs();
    if err > tol.area_tol {
        return None;
    }
    let aspect = c.bbox.aspect();
    let extent = c.extent();
    let ok = match class {
        ShapeClass::LargeCircle => {
            aspect <= tol.max_aspect
                && tol.ring_extent.contains(extent)
                && tol
                    .circle_diameter
                    .contains(bbox_diameter(c) / expected.ring_outer_diameter)
        }
        ShapeClass::SmallCircle => {
            aspect <= tol.max_aspect
                && tol.small_circle_extent.contains(extent)
                && tol
                    .circle_diameter
                    .contains(bbox_diameter(c) / expected.small_circle_diameter)
        }
        ShapeClass::Square => aspect <= tol.max_aspect && tol.square_extent.contains(extent),
        ShapeClass::Rectangle => tol.rect_extent.contains(extent),
    };
    ok.then_some((err, expected_area))
}

fn bbox_diameter(c: &ComponentRecord) -> f64 {
    c.bbox.width().max(c.bbox.height()) as f64
}

fn best_class(
    c: &ComponentRecord,
    expected: &ExpectedSizes,
    tol: &ToleranceProfile,
    profile_ok: impl Fn(ShapeClass, &ComponentRecord) -> bool,
) -> Option<ShapeDetection> {
    ShapeClass::ALL
        .iter()
        .filter_map(|&class| gate(class, c, expected, tol).map(|(err, exp)| (class, err, exp)))
        .filter(|&(class, _, _)| profile_ok(class, c))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(shape_class, match_error, expected_area)| ShapeDetection {
            shape_class,
            component: c.clone(),
            expected_area,
            match_error,
        })
}

/// Best-matching figure class by relative area error, if any class's gates
/// pass. Uses component statistics only.
pub fn classify_component(
    c: &ComponentRecord,
    expected: &ExpectedSizes,
    tol: &ToleranceProfile,
) -> Option<ShapeDetection> {
    best_class(c, expected, tol, |_, _| true)
}

/// As [`classify_component`], and circles must also show their radial
/// profile in the label image.
pub fn classify_labeled(
    labels: &Labeling,
    c: &ComponentRecord,
    spec: &MarkerSpec,
    expected: &ExpectedSizes,
    tol: &ToleranceProfile,
) -> Option<ShapeDetection> {
    best_class(c, expected, tol, |class, c| match class {
        ShapeClass::LargeCircle => ring_profile(labels, c, spec, expected).is_some_and(|p| p.passes(tol)),
        ShapeClass::SmallCircle => disk_profile(labels, c, expected).is_some_and(|p| p.passes(tol)),
        ShapeClass::Square | ShapeClass::Rectangle => true,
    })
}

/// Shares of samples on three circles around a ring candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingProfile {
    /// On the candidate, mid-way through the ring band.
    pub band: f64,
    /// On the candidate, between the small circle and the ring.
    pub hole: f64,
    /// Any foreground, just outside the ring on the pad.
    pub halo: f64,
}

impl RingProfile {
    pub fn passes(&self, tol: &ToleranceProfile) -> bool {
        self.band >= tol.ring_band_min && self.hole <= tol.ring_hole_max && self.halo <= tol.ring_halo_max
    }
}

/// Shares of samples on four circles around a small-circle candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskProfile {
    /// On the candidate at half the radius.
    pub core: f64,
    /// On the candidate at 0.85 radii.
    pub rim_in: f64,
    /// On the candidate at 1.2 radii.
    pub rim_out: f64,
    /// Any foreground at 1.6 radii.
    pub halo: f64,
}

impl DiskProfile {
    pub fn passes(&self, tol: &ToleranceProfile) -> bool {
        self.core >= tol.disk_fill_min
            && self.rim_in >= tol.disk_fill_min
            && self.rim_out <= tol.disk_clear_max
            && self.halo <= tol.disk_clear_max
    }
}

const PROFILE_SAMPLES: usize = 72;

/// Circle centre and radius of a round candidate. A box clipped by the image
/// border keeps its true edge on the far side; its radius is the expected one.
fn round_fit(labels: &Labeling, b: &BBox, expected_diameter: f64) -> (f64, f64, f64) {
    let (w, h) = (labels.width as i64, labels.height as i64);
    let clipped = b.min_x == 0 || b.max_x as i64 == w - 1 || b.min_y == 0 || b.max_y as i64 == h - 1;
    let r = if clipped {
        expected_diameter / 2.0
    } else {
        (b.width() + b.height()) as f64 / 4.0
    };
    let axis_centre = |lo: usize, hi: usize, size: i64| -> f64 {
        match (lo == 0, hi as i64 == size - 1) {
            (true, false) => hi as f64 + 0.5 - r,
            (false, true) => lo as f64 - 0.5 + r,
            _ => (lo + hi) as f64 / 2.0,
        }
    };
    (axis_centre(b.min_x, b.max_x, w), axis_centre(b.min_y, b.max_y, h), r)
}

/// Share of in-view samples on a circle that satisfy `hit`; `None` when less
/// than half the circle is in view.
fn circle_share(labels: &Labeling, centre: (f64, f64), radius: f64, hit: impl Fn(u32) -> bool) -> Option<f64> {
    let (w, h) = (labels.width as i64, labels.height as i64);
    let mut seen = 0usize;
    let mut hits = 0usize;
    for i in 0..PROFILE_SAMPLES {
        let (sn, cs) = (i as f64 * std::f64::consts::TAU / PROFILE_SAMPLES as f64).sin_cos();
        let x = (centre.0 + radius * cs).round() as i64;
        let y = (centre.1 + radius * sn).round() as i64;
        if x < 0 || y < 0 || x >= w || y >= h {
            continue;
        }
        seen += 1;
        hits += hit(labels.label_at(x, y)) as usize;
    }
    (seen * 2 >= PROFILE_SAMPLES).then(|| hits as f64 / seen as f64)
}

/// Samples the ring profile of `c`. `None` when too little of it is in view.
pub fn ring_profile(
    labels: &Labeling,
    c: &ComponentRecord,
    spec: &MarkerSpec,
    expected: &ExpectedSizes,
) -> Option<RingProfile> {
    let (cx, cy, r) = round_fit(labels, &c.bbox, expected.ring_outer_diameter);
    let outer = spec.large_circle_outer_diameter;
    let k = spec.inner_diameter() / outer;
    let s = spec.small_circle_diameter / outer;
    let halo_ratio = 1.0 + (1.0 - k) / 2.0;
    let own = |l: u32| l == c.label;
    let band = circle_share(labels, (cx, cy), r * (1.0 + k) / 2.0, own)?;
    let hole = circle_share(labels, (cx, cy), r * (s + k) / 2.0, own)?;
    let halo = if halo_ratio * outer <= spec.pad_side {
        circle_share(labels, (cx, cy), r * halo_ratio, |l| l != 0).unwrap_or(0.0)
    } else {
        0.0
    };
    Some(RingProfile { band, hole, halo })
}

/// Samples the disk profile of `c`. `None` when too little of it is in view.
pub fn disk_profile(labels: &Labeling, c: &ComponentRecord, expected: &ExpectedSizes) -> Option<DiskProfile> {
    let (cx, cy, r) = round_fit(labels, &c.bbox, expected.small_circle_diameter);
    let own = |l: u32| l == c.label;
    Some(DiskProfile {
        core: circle_share(labels, (cx, cy), r * 0.5, own)?,
        rim_in: circle_share(labels, (cx, cy), r * 0.85, own)?,
        rim_out: circle_share(labels, (cx, cy), r * 1.2, own)?,
        halo: circle_share(labels, (cx, cy), r * 1.6, |l| l != 0)?,
    })
}

/// Detections whose whole bbox lies inside the large circle's bbox.
pub fn filter_inside(circle: &ShapeDetection, others: &[ShapeDetection]) -> Vec<ShapeDetection> {
    others
        .iter()
        .filter(|d| circle.bbox().contains(d.bbox()))
        .cloned()
        .collect()
}
