//! Marker assembly from classified figures and pose estimation.
//!
//! Coordinates are image pixels with x right, y down and the origin at the
//! top-left pixel centre. Orientation is positive clockwise on screen.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shapes::{filter_inside, wrap_deg, CameraModel, ShapeClass, ShapeDetection, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarkerParams {
    /// Below this altitude a lone small circle may stand in for the full marker.
    pub low_altitude_cutoff_m: f64,
    /// Square–rectangle centroid distance over the circle's bbox diameter.
    pub distance_gate: Window,
}

impl Default for MarkerParams {
    fn default() -> Self {
        Self {
            low_altitude_cutoff_m: 0.35,
            distance_gate: Window::new(0.2, 0.8),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoseSource {
    FullMarker,
    SmallCircleOnly,
}

/// Figures that together identify the marker in one frame.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Assembly {
    Full {
        circle: ShapeDetection,
        square: ShapeDetection,
        rectangle: ShapeDetection,
        small_circle: Option<ShapeDetection>,
        orientation_deg: f64,
    },
    SmallCircleOnly { small_circle: ShapeDetection },
}

impl Assembly {
    pub fn source(&self) -> PoseSource {
        match self {
            Assembly::Full { .. } => PoseSource::FullMarker,
            Assembly::SmallCircleOnly { .. } => PoseSource::SmallCircleOnly,
        }
    }

    /// The detections that make up this assembly.
    pub fn members(&self) -> Vec<&ShapeDetection> {
        match self {
            Assembly::Full {
                circle,
                square,
                rectangle,
                small_circle,
                ..
            } => {
                let mut v = vec![circle, square, rectangle];
                v.extend(small_circle.iter());
                v
            }
            Assembly::SmallCircleOnly { small_circle } => vec![small_circle],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerPose {
    pub centre_px: (f64, f64),
    /// Centre minus image centre; right and down positive.
    pub offset_px: (f64, f64),
    pub offset_cm: (f64, f64),
    /// Deviation from the nominal orientation, (−180, 180].
    pub orientation_deg: Option<f64>,
    /// Orientation carried over from an earlier full-marker fix.
    pub orientation_stale: bool,
    pub altitude_m: f64,
    pub source: PoseSource,
}

/// Orientation of the square→rectangle axis relative to `nominal_axis_deg`.
///
/// Fails when the centroid distance is implausible for a circle of
/// `circle_diameter_px`.
pub fn orientation(
    square_c: (f64, f64),
    rect_c: (f64, f64),
    circle_diameter_px: f64,
    distance_gate: Window,
    nominal_axis_deg: f64,
) -> Result<f64> {
    let (dx, dy) = (rect_c.0 - square_c.0, rect_c.1 - square_c.1);
    let ratio = dx.hypot(dy) / circle_diameter_px;
    if !distance_gate.contains(ratio) {
        return Err(Error::Input(format!(
            "square-rectangle distance is {ratio:.3} of the circle diameter"
        )));
    }
    Ok(wrap_deg(dy.atan2(dx).to_degrees() - nominal_axis_deg))
}

fn full_assembly(
    circle: &ShapeDetection,
    detections: &[ShapeDetection],
    nominal_axis_deg: f64,
    params: &MarkerParams,
) -> Option<Assembly> {
    let inside = filter_inside(circle, detections);
    let of = |class| inside.iter().filter(move |d: &&ShapeDetection| d.shape_class == class);
    let squares: Vec<_> = of(ShapeClass::Square).collect();
    let rects: Vec<_> = of(ShapeClass::Rectangle).collect();
    if squares.len() != 1 || rects.len() != 1 {
        return None;
    }
    let (square, rectangle) = (squares[0].clone(), rects[0].clone());
    let diameter = circle.bbox().width().max(circle.bbox().height()) as f64;
    let orientation_deg = orientation(
        square.component.centroid,
        rectangle.component.centroid,
        diameter,
        params.distance_gate,
        nominal_axis_deg,
    )
    .ok()?;
    let small: Vec<_> = of(ShapeClass::SmallCircle).collect();
    Some(Assembly::Full {
        circle: circle.clone(),
        square,
        rectangle,
        small_circle: (small.len() == 1).then(|| small[0].clone()),
        orientation_deg,
    })
}

/// Builds the marker from one frame's detections.
///
/// A full assembly needs a large circle containing exactly one square and
/// one rectangle at a plausible distance. Below the low-altitude cutoff,
/// when no full assembly exists, a single small circle is accepted instead.
pub fn assemble(
    detections: &[ShapeDetection],
    altitude_m: f64,
    nominal_axis_deg: f64,
    params: &MarkerParams,
) -> Option<Assembly> {
    let full = detections
        .iter()
        .filter(|d| d.shape_class == ShapeClass::LargeCircle)
        .find_map(|c| full_assembly(c, detections, nominal_axis_deg, params));
    if full.is_some() {
        return full;
    }
    if altitude_m < params.low_altitude_cutoff_m {
        let mut small = detections
            .iter()
            .filter(|d| d.shape_class == ShapeClass::SmallCircle);
        if let (Some(only), None) = (small.next(), small.next()) {
            return Some(Assembly::SmallCircleOnly {
                small_circle: only.clone(),
            });
        }
    }
    None
}

/// Marker centre: midpoint of the square and rectangle centroids, or the
/// small-circle centroid.
pub fn centre(assembly: &Assembly) -> (f64, f64) {
    match assembly {
        Assembly::Full {
            square, rectangle, ..
        } => {
            let (a, b) = (square.component.centroid, rectangle.component.centroid);
            ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0)
        }
        Assembly::SmallCircleOnly { small_circle } => small_circle.component.centroid,
    }
}

/// Pixel offset to ground-plane centimetres: `px · altitude · 100 / focal`.
pub fn to_metric(offset_px: (f64, f64), altitude_m: f64, cam: &CameraModel) -> Result<(f64, f64)> {
    if !(altitude_m > 0.0) {
        return Err(Error::contract(format!("altitude {altitude_m} m must be positive")));
    }
    let cm_per_px = altitude_m * 100.0 / cam.focal_px;
    Ok((offset_px.0 * cm_per_px, offset_px.1 * cm_per_px))
}

/// Full pose of an assembly. `last_orientation` is reused, flagged stale,
/// for small-circle fixes.
pub fn estimate_pose(
    assembly: &Assembly,
    altitude_m: f64,
    cam: &CameraModel,
    last_orientation: Option<f64>,
) -> Result<MarkerPose> {
    let centre_px = centre(assembly);
    let (cx, cy) = cam.principal_point();
    let offset_px = (centre_px.0 - cx, centre_px.1 - cy);
    let offset_cm = to_metric(offset_px, altitude_m, cam)?;
    let (orientation_deg, orientation_stale) = match assembly {
        Assembly::Full {
            orientation_deg, ..
        } => (Some(*orientation_deg), false),
        Assembly::SmallCircleOnly { .. } => (last_orientation, last_orientation.is_some()),
    };
    Ok(MarkerPose {
        centre_px,
        offset_px,
        offset_cm,
        orientation_deg,
        orientation_stale,
        altitude_m,
        source: assembly.source(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccl::{BBox, ComponentRecord};

    fn det(class: ShapeClass, bbox: (usize, usize, usize, usize), centroid: (f64, f64)) -> ShapeDetection {
        ShapeDetection {
            shape_class: class,
            component: ComponentRecord {
                label: 1,
                area: 100,
                bbox: BBox {
                    min_x: bbox.0,
                    min_y: bbox.1,
                    max_x: bbox.2,
                    max_y: bbox.3,
                },
                centroid,
                touches_border: false,
            },
            expected_area: 100.0,
            match_error: 0.0,
        }
    }

    fn scene() -> Vec<ShapeDetection> {
        vec![
            det(ShapeClass::LargeCircle, (0, 0, 120, 120), (60.0, 60.0)),
            det(ShapeClass::Square, (28, 50, 42, 70), (35.0, 60.0)),
            det(ShapeClass::Rectangle, (80, 45, 90, 75), (85.0, 60.0)),
            det(ShapeClass::SmallCircle, (55, 55, 65, 65), (60.0, 60.0)),
        ]
    }

    #[test]
    fn orientation_cases() {
        let gate = Window::new(0.2, 0.8);
        assert_eq!(orientation((100.0, 100.0), (150.0, 100.0), 100.0, gate, 0.0).unwrap(), 0.0);
        assert_eq!(orientation((100.0, 100.0), (100.0, 150.0), 100.0, gate, 0.0).unwrap(), 90.0);
        let a = (-49.0f64).to_radians();
        let r = (100.0 + 50.0 * a.cos(), 100.0 + 50.0 * a.sin());
        assert!((orientation((100.0, 100.0), r, 100.0, gate, 0.0).unwrap() + 49.0).abs() < 1e-9);
        assert!(orientation((100.0, 100.0), (105.0, 100.0), 100.0, gate, 0.0).is_err());
        assert!(orientation((100.0, 100.0), (190.0, 100.0), 100.0, gate, 0.0).is_err());
        // nominal axis subtracted and wrapped
        let o = orientation((100.0, 100.0), (50.0, 100.0), 100.0, gate, -90.0).unwrap();
        assert_eq!(o, -90.0);
    }

    #[test]
    fn full_marker_assembles() {
        let a = assemble(&scene(), 1.0, 0.0, &MarkerParams::default()).unwrap();
        assert_eq!(a.source(), PoseSource::FullMarker);
        assert_eq!(centre(&a), (60.0, 60.0));
        assert_eq!(a.members().len(), 4);
    }

    #[test]
    fn all_three_figures_required() {
        let no_circle: Vec<_> = scene().into_iter().skip(1).take(2).collect();
        assert!(assemble(&no_circle, 1.0, 0.0, &MarkerParams::default()).is_none());
    }

    #[test]
    fn two_squares_are_ambiguous() {
        let mut s = scene();
        s.push(det(ShapeClass::Square, (40, 80, 50, 90), (45.0, 85.0)));
        assert!(assemble(&s, 1.0, 0.0, &MarkerParams::default()).is_none());
    }

    #[test]
    fn small_circle_only_at_low_altitude() {
        let small = vec![det(ShapeClass::SmallCircle, (600, 300, 680, 420), (640.5, 360.25))];
        let a = assemble(&small, 0.2, 0.0, &MarkerParams::default()).unwrap();
        assert_eq!(a.source(), PoseSource::SmallCircleOnly);
        assert_eq!(centre(&a), (640.5, 360.25));
        assert!(assemble(&small, 1.0, 0.0, &MarkerParams::default()).is_none());
        let two = vec![small[0].clone(), small[0].clone()];
        assert!(assemble(&two, 0.2, 0.0, &MarkerParams::default()).is_none());
    }

    #[test]
    fn midpoint_centre() {
        let a = Assembly::Full {
            circle: det(ShapeClass::LargeCircle, (0, 0, 200, 200), (0.0, 0.0)),
            square: det(ShapeClass::Square, (0, 0, 1, 1), (100.0, 100.0)),
            rectangle: det(ShapeClass::Rectangle, (0, 0, 1, 1), (150.0, 100.0)),
            small_circle: None,
            orientation_deg: 0.0,
        };
        assert_eq!(centre(&a), (125.0, 100.0));
    }

    #[test]
    fn metric_conversion() {
        let cam = CameraModel::default();
        // 0.155 cm/px
        let alt = 0.155 * cam.focal_px / 100.0;
        let (x, y) = to_metric((40.0, 21.0), alt, &cam).unwrap();
        assert!((x - 6.2).abs() < 1e-9);
        assert!((y - 3.3).abs() <= 0.1);
        assert_eq!(to_metric((0.0, 0.0), 1.0, &cam).unwrap(), (0.0, 0.0));
        assert!(to_metric((1.0, 1.0), 0.0, &cam).is_err());
    }

    #[test]
    fn pose_offsets_and_memory() {
        let cam = CameraModel::default();
        let small = Assembly::SmallCircleOnly {
            small_circle: det(ShapeClass::SmallCircle, (0, 0, 1, 1), (640.5, 360.25)),
        };
        let p = estimate_pose(&small, 0.3, &cam, Some(12.0)).unwrap();
        assert_eq!(p.offset_px, (1.0, 0.75));
        assert_eq!(p.orientation_deg, Some(12.0));
        assert!(p.orientation_stale);
        let p = estimate_pose(&small, 0.3, &cam, None).unwrap();
        assert_eq!(p.orientation_deg, None);
        assert!(!p.orientation_stale);
    }
}
