//! Image kernels against brute-force references on arbitrary inputs.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use landpad::ccl::{self, Connectivity};
use landpad::threshold;
use landpad::{preprocess, Exec, Frame, FrameKind};

fn binary_frame(max_w: usize, max_h: usize) -> impl Strategy<Value = Frame> {
    (1..=max_w, 1..=max_h, 0.0..1.0f64, any::<u64>()).prop_map(|(w, h, density, seed)| {
        common::random_binary(&mut ChaCha8Rng::seed_from_u64(seed), w, h, density)
    })
}

fn grey_frame(max_w: usize, max_h: usize) -> impl Strategy<Value = Frame> {
    (1..=max_w, 1..=max_h, any::<u64>())
        .prop_map(|(w, h, seed)| common::random_grey(&mut ChaCha8Rng::seed_from_u64(seed), w, h))
}

/// Sample at `(x, y)` with coordinates clamped into the frame.
fn clamped(f: &Frame, x: i64, y: i64) -> u8 {
    f.get(
        x.clamp(0, f.width() as i64 - 1) as usize,
        y.clamp(0, f.height() as i64 - 1) as usize,
    )
}

/// Sample at `(x, y)`, zero outside the frame.
fn zero_padded(f: &Frame, x: i64, y: i64) -> u8 {
    if x < 0 || y < 0 || x >= f.width() as i64 || y >= f.height() as i64 {
        0
    } else {
        f.get(x as usize, y as usize)
    }
}

fn brute_gaussian(f: &Frame) -> Vec<u8> {
    let k = [1u32, 4, 6, 4, 1];
    let mut out = Vec::new();
    for y in 0..f.height() as i64 {
        for x in 0..f.width() as i64 {
            let mut acc = 0u32;
            for (j, kj) in k.iter().enumerate() {
                for (i, ki) in k.iter().enumerate() {
                    acc += kj * ki * clamped(f, x + i as i64 - 2, y + j as i64 - 2) as u32;
                }
            }
            out.push(((acc + 128) / 256) as u8);
        }
    }
    out
}

fn brute_neighbourhood(f: &Frame, r: i64, keep: impl Fn(&[u8]) -> bool, sample: fn(&Frame, i64, i64) -> u8) -> Vec<u8> {
    let mut out = Vec::new();
    for y in 0..f.height() as i64 {
        for x in 0..f.width() as i64 {
            let hood: Vec<u8> = (-r..=r)
                .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
                .map(|(dx, dy)| sample(f, x + dx, y + dy))
                .collect();
            out.push(if keep(&hood) { 255 } else { 0 });
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ccl_matches_flood_fill_on_any_shape(frame in binary_frame(40, 40), eight in any::<bool>()) {
        let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
        let labels = ccl::label_with_runs(&frame, conn).unwrap();
        let oracle = common::flood_fill(frame.data(), frame.width(), frame.height(), conn);
        let verdict = common::compare_components(&oracle, &labels.components, &labels.label_map(), frame.width());
        prop_assert!(verdict.is_ok(), "{:?}", verdict);
    }

    #[test]
    fn label_lookup_matches_label_map(frame in binary_frame(30, 30)) {
        let labels = ccl::label_with_runs(&frame, Connectivity::Eight).unwrap();
        let map = labels.label_map();
        for y in -1..=frame.height() as i64 {
            for x in -1..=frame.width() as i64 {
                let inside = x >= 0 && y >= 0 && x < frame.width() as i64 && y < frame.height() as i64;
                let want = if inside { map[y as usize * frame.width() + x as usize] } else { 0 };
                prop_assert_eq!(labels.label_at(x, y), want);
            }
        }
    }

    #[test]
    fn grid_and_binarization_match_references(frame in grey_frame(300, 200), window in 2usize..160) {
        let (w, h) = (frame.width(), frame.height());
        let grid = threshold::compute_grid(&frame, window).unwrap();
        let brute = common::brute_windows(frame.data(), w, h, window);
        let ours: Vec<(u8, u8)> = grid.cells.iter().map(|c| (c.min, c.max)).collect();
        prop_assert_eq!(&ours, &brute);
        let binary = threshold::apply_interpolated(&frame, &grid).unwrap();
        let reference = common::reference_binarize(frame.data(), w, h, window, &brute);
        prop_assert!(binary.data() == &reference[..]);
    }

    #[test]
    fn gaussian_matches_direct_convolution(frame in grey_frame(24, 24)) {
        let ours = preprocess::gaussian_5x5(&frame).unwrap();
        prop_assert_eq!(ours.data(), &brute_gaussian(&frame)[..]);
    }

    #[test]
    fn morphology_matches_set_definitions(frame in binary_frame(24, 24)) {
        let eroded = preprocess::erode_3x3(&frame).unwrap();
        let dilated = preprocess::dilate_3x3(&frame).unwrap();
        let median = preprocess::median_5x5(&frame).unwrap();
        prop_assert_eq!(eroded.data(), &brute_neighbourhood(&frame, 1, |n| n.iter().all(|&v| v != 0), zero_padded)[..]);
        prop_assert_eq!(dilated.data(), &brute_neighbourhood(&frame, 1, |n| n.iter().any(|&v| v != 0), zero_padded)[..]);
        let majority = |n: &[u8]| n.iter().filter(|&&v| v != 0).count() >= 13;
        prop_assert_eq!(median.data(), &brute_neighbourhood(&frame, 2, majority, clamped)[..]);
    }

    #[test]
    fn opening_stays_inside(frame in binary_frame(32, 32)) {
        let opened = preprocess::dilate_3x3(&preprocess::erode_3x3(&frame).unwrap()).unwrap();
        for (o, x) in opened.data().iter().zip(frame.data()) {
            prop_assert!(*o == 0 || *x != 0);
        }
    }

    #[test]
    fn parallel_kernels_agree_with_sequential(frame in grey_frame(64, 48)) {
        let blur = |e| preprocess::gaussian_5x5_with(&frame, e).unwrap();
        prop_assert_eq!(blur(Exec::Sequential), blur(Exec::Parallel));
        let grid = threshold::compute_grid(&frame, 16).unwrap();
        let bin = |e| threshold::apply_interpolated_with(&frame, &grid, e).unwrap();
        let binary = bin(Exec::Sequential);
        prop_assert_eq!(&binary, &bin(Exec::Parallel));
        let med = |e| preprocess::median_5x5_with(&binary, e).unwrap();
        prop_assert_eq!(med(Exec::Sequential), med(Exec::Parallel));
    }
}

#[test]
fn corner_impulse_folds_replicated_mass() {
    let mut centre = Frame::filled(9, 9, FrameKind::Grey, 0);
    centre.set(4, 4, 255);
    let mut corner = Frame::filled(9, 9, FrameKind::Grey, 0);
    corner.set(0, 0, 255);
    let c = preprocess::gaussian_5x5(&centre).unwrap().get(4, 4);
    let k = preprocess::gaussian_5x5(&corner).unwrap().get(0, 0);
    assert_eq!(c, 36);
    assert_eq!(k as u32, (255 * 121 + 128) / 256);
    assert!(k >= c);
}

#[test]
fn half_plane_survives_median() {
    let data = (0..20 * 20).map(|i| if i % 20 < 10 { 255 } else { 0 }).collect();
    let frame = Frame::new(20, 20, FrameKind::Binary, data).unwrap();
    assert_eq!(preprocess::median_5x5(&frame).unwrap(), frame);
}

#[test]
fn windowed_equals_interpolated_where_neighbours_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let frame = common::random_grey(&mut rng, 96, 64);
    let mut grid = threshold::compute_grid(&frame, 32).unwrap();
    // equal thresholds in the left two columns, distinct elsewhere
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let cell = grid.cell_mut(col, row);
            (cell.min, cell.max) = if col < 2 { (40, 200) } else { (col as u8 * 30, 250) };
        }
    }
    let windowed = threshold::apply_windowed(&frame, &grid).unwrap();
    let interpolated = threshold::apply_interpolated(&frame, &grid).unwrap();
    for y in 0..64 {
        // left of the centre of column 1 every blend uses columns 0 and 1 only
        for x in 0..48 {
            assert_eq!(windowed.get(x, y), interpolated.get(x, y), "({x}, {y})");
        }
    }
}
