//! Greyscale conversion and the fixed-kernel filters run before and after
//! thresholding.
//!
//! Border handling: the Gaussian blur and the median replicate edge pixels;
//! erosion and dilation treat everything outside the image as background.
//! All kernels are separable and evaluated row by row, so each one is exact
//! integer arithmetic and runs row-parallel under [`Exec::Parallel`].

use crate::error::Result;
use crate::exec::Exec;
use crate::imgio::{Frame, FrameKind};

/// BT.601 luma, rounded half up: `(299 R + 587 G + 114 B + 500) / 1000`.
pub fn to_greyscale(frame: &Frame) -> Result<Frame> {
    to_greyscale_with(frame, Exec::default())
}

pub fn to_greyscale_with(frame: &Frame, exec: Exec) -> Result<Frame> {
    frame.expect_kind(FrameKind::Rgb, "to_greyscale")?;
    let (w, h) = (frame.width(), frame.height());
    let src = frame.data();
    let mut out = vec![0u8; w * h];
    exec.for_each_row(&mut out, w, |y, row| {
        let line = &src[y * w * 3..(y + 1) * w * 3];
        for (o, px) in row.iter_mut().zip(line.chunks_exact(3)) {
            let acc = 299 * px[0] as u32 + 587 * px[1] as u32 + 114 * px[2] as u32 + 500;
            *o = (acc / 1000) as u8;
        }
    });
    Ok(Frame::from_parts(w, h, FrameKind::Grey, out).with_index(frame.frame_index))
}

#[cfg(test)]
const BINOMIAL5: [u32; 5] = [1, 4, 6, 4, 1];

/// `line` with `pad` extra samples on each side, either copies of the end
/// samples or `fill`.
fn padded<T: Copy>(line: &[T], pad: usize, fill: Option<T>) -> Vec<T> {
    let first = fill.unwrap_or(line[0]);
    let last = fill.unwrap_or(line[line.len() - 1]);
    let mut out = Vec::with_capacity(line.len() + 2 * pad);
    out.extend(std::iter::repeat_n(first, pad));
    out.extend_from_slice(line);
    out.extend(std::iter::repeat_n(last, pad));
    out
}

/// 5×5 binomial blur (outer product of `[1 4 6 4 1]`, sum 256), edge replication,
/// rounded to nearest.
pub fn gaussian_5x5(frame: &Frame) -> Result<Frame> {
    gaussian_5x5_with(frame, Exec::default())
}

pub fn gaussian_5x5_with(frame: &Frame, exec: Exec) -> Result<Frame> {
    frame.expect_kind(FrameKind::Grey, "gaussian_5x5")?;
    let (w, h) = (frame.width(), frame.height());
    let src = frame.data();

    // 16 · 255 and 256 · 255 + 128 both fit in u16
    let mut horiz = vec![0u16; w * h];
    exec.for_each_row(&mut horiz, w, |y, row| {
        let p: Vec<u16> = padded(&src[y * w..(y + 1) * w], 2, None)
            .into_iter()
            .map(u16::from)
            .collect();
        let (a, b, c, d, e) = (&p[..w], &p[1..w + 1], &p[2..w + 2], &p[3..w + 3], &p[4..w + 4]);
        for i in 0..w {
            row[i] = a[i] + 4 * b[i] + 6 * c[i] + 4 * d[i] + e[i];
        }
    });

    let mut out = vec![0u8; w * h];
    let horiz = &horiz;
    exec.for_each_row(&mut out, w, |y, row| {
        let r: [&[u16]; 5] = std::array::from_fn(|k| {
            let yy = (y as isize + k as isize - 2).clamp(0, h as isize - 1) as usize;
            &horiz[yy * w..(yy + 1) * w]
        });
        let (a, b, c, d, e) = (r[0], r[1], r[2], r[3], r[4]);
        for i in 0..w {
            let s = a[i] + 4 * b[i] + 6 * c[i] + 4 * d[i] + e[i];
            row[i] = ((s + 128) >> 8) as u8;
        }
    });
    Ok(Frame::from_parts(w, h, FrameKind::Grey, out).with_index(frame.frame_index))
}

/// Separable 3×3 binary morphology with zero (background) outside the image.
fn morph_3x3<const ERODE: bool>(frame: &Frame, exec: Exec, op: &str) -> Result<Frame> {
    frame.expect_kind(FrameKind::Binary, op)?;
    let (w, h) = (frame.width(), frame.height());
    let src = frame.data();
    let combine = |a: u8, b: u8| if ERODE { a & b } else { a | b };

    let mut horiz = vec![0u8; w * h];
    exec.for_each_row(&mut horiz, w, |y, row| {
        let p = padded(&src[y * w..(y + 1) * w], 1, Some(0));
        let (a, b, c) = (&p[..w], &p[1..w + 1], &p[2..w + 2]);
        for i in 0..w {
            row[i] = combine(combine(a[i], b[i]), c[i]);
        }
    });

    let mut out = vec![0u8; w * h];
    let horiz = &horiz;
    let zeros = vec![0u8; w];
    exec.for_each_row(&mut out, w, |y, row| {
        let b = &horiz[y * w..(y + 1) * w];
        let a = if y > 0 { &horiz[(y - 1) * w..y * w] } else { &zeros[..] };
        let c = if y + 1 < h { &horiz[(y + 1) * w..(y + 2) * w] } else { &zeros[..] };
        for i in 0..w {
            row[i] = combine(combine(a[i], b[i]), c[i]);
        }
    });
    Ok(Frame::from_parts(w, h, FrameKind::Binary, out).with_index(frame.frame_index))
}

/// Foreground iff the whole 3×3 neighbourhood is foreground.
pub fn erode_3x3(frame: &Frame) -> Result<Frame> {
    erode_3x3_with(frame, Exec::default())
}

pub fn erode_3x3_with(frame: &Frame, exec: Exec) -> Result<Frame> {
    morph_3x3::<true>(frame, exec, "erode_3x3")
}

/// Foreground iff any pixel of the 3×3 neighbourhood is foreground.
pub fn dilate_3x3(frame: &Frame) -> Result<Frame> {
    dilate_3x3_with(frame, Exec::default())
}

pub fn dilate_3x3_with(frame: &Frame, exec: Exec) -> Result<Frame> {
    morph_3x3::<false>(frame, exec, "dilate_3x3")
}

/// Binary 5×5 median: foreground iff at least 13 of the 25 edge-replicated
/// neighbourhood samples are foreground.
pub fn median_5x5(frame: &Frame) -> Result<Frame> {
    median_5x5_with(frame, Exec::default())
}

pub fn median_5x5_with(frame: &Frame, exec: Exec) -> Result<Frame> {
    frame.expect_kind(FrameKind::Binary, "median_5x5")?;
    let (w, h) = (frame.width(), frame.height());
    let src = frame.data();

    let mut horiz = vec![0u8; w * h];
    exec.for_each_row(&mut horiz, w, |y, row| {
        let ones: Vec<u8> = src[y * w..(y + 1) * w].iter().map(|&v| (v != 0) as u8).collect();
        let p = padded(&ones, 2, None);
        let (a, b, c, d, e) = (&p[..w], &p[1..w + 1], &p[2..w + 2], &p[3..w + 3], &p[4..w + 4]);
        for i in 0..w {
            row[i] = a[i] + b[i] + c[i] + d[i] + e[i];
        }
    });

    let mut out = vec![0u8; w * h];
    let horiz = &horiz;
    exec.for_each_row(&mut out, w, |y, row| {
        let r: [&[u8]; 5] = std::array::from_fn(|k| {
            let yy = (y as isize + k as isize - 2).clamp(0, h as isize - 1) as usize;
            &horiz[yy * w..(yy + 1) * w]
        });
        let (a, b, c, d, e) = (r[0], r[1], r[2], r[3], r[4]);
        for i in 0..w {
            let count = a[i] + b[i] + c[i] + d[i] + e[i];
            row[i] = if count >= 13 { 255 } else { 0 };
        }
    });
    Ok(Frame::from_parts(w, h, FrameKind::Binary, out).with_index(frame.frame_index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grey(w: usize, h: usize, f: impl Fn(usize, usize) -> u8) -> Frame {
        let data = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Frame::new(w, h, FrameKind::Grey, data).unwrap()
    }

    fn binary(w: usize, h: usize, f: impl Fn(usize, usize) -> bool) -> Frame {
        let data = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| if f(x, y) { 255 } else { 0 })
            .collect();
        Frame::new(w, h, FrameKind::Binary, data).unwrap()
    }

    /// Direct 5×5 convolution with clamped coordinates.
    fn gaussian_oracle(f: &Frame) -> Frame {
        let (w, h) = (f.width() as isize, f.height() as isize);
        grey(f.width(), f.height(), |x, y| {
            let mut acc = 0u32;
            for (j, kj) in BINOMIAL5.iter().enumerate() {
                for (i, ki) in BINOMIAL5.iter().enumerate() {
                    let xx = (x as isize + i as isize - 2).clamp(0, w - 1) as usize;
                    let yy = (y as isize + j as isize - 2).clamp(0, h - 1) as usize;
                    acc += ki * kj * f.get(xx, yy) as u32;
                }
            }
            ((acc as f64) / 256.0).round() as u8
        })
    }

    #[test]
    fn greyscale_values() {
        let f = Frame::new(3, 1, FrameKind::Rgb, vec![255, 0, 0, 0, 0, 0, 77, 77, 77]).unwrap();
        assert_eq!(to_greyscale(&f).unwrap().data(), &[76, 0, 77]);
        for v in 0..=255u8 {
            let f = Frame::new(1, 1, FrameKind::Rgb, vec![v; 3]).unwrap();
            assert_eq!(to_greyscale(&f).unwrap().data(), &[v]);
        }
        assert!(to_greyscale(&Frame::filled(1, 1, FrameKind::Grey, 0)).is_err());
    }

    #[test]
    fn gaussian_constant_and_impulse() {
        let c = Frame::filled(7, 6, FrameKind::Grey, 93);
        assert_eq!(gaussian_5x5(&c).unwrap(), c);

        let imp = grey(9, 9, |x, y| if (x, y) == (4, 4) { 255 } else { 0 });
        assert_eq!(gaussian_5x5(&imp).unwrap().get(4, 4), 36);

        let corner = grey(9, 9, |x, y| if (x, y) == (0, 0) { 255 } else { 0 });
        let corner_val = gaussian_5x5(&corner).unwrap().get(0, 0);
        // 255 * (11/16)^2 folded by replication
        assert_eq!(corner_val, gaussian_oracle(&corner).get(0, 0));
        assert_eq!(corner_val, 121);
        assert!(corner_val >= 36);
    }

    #[test]
    fn erosion_shrinks_block() {
        let f = binary(9, 9, |x, y| (2..7).contains(&x) && (2..7).contains(&y));
        let e = erode_3x3(&f).unwrap();
        assert_eq!(e, binary(9, 9, |x, y| (3..6).contains(&x) && (3..6).contains(&y)));
        let dot = binary(5, 5, |x, y| (x, y) == (2, 2));
        assert_eq!(erode_3x3(&dot).unwrap().count_foreground(), 0);
        let zero = Frame::filled(5, 5, FrameKind::Binary, 0);
        assert_eq!(erode_3x3(&zero).unwrap(), zero);
        // border samples count as background
        let full = Frame::filled(4, 4, FrameKind::Binary, 255);
        assert_eq!(erode_3x3(&full).unwrap(), binary(4, 4, |x, y| (1..3).contains(&x) && (1..3).contains(&y)));
    }

    #[test]
    fn dilation_grows_dot() {
        let dot = binary(5, 5, |x, y| (x, y) == (2, 2));
        let d = dilate_3x3(&dot).unwrap();
        assert_eq!(d, binary(5, 5, |x, y| (1..4).contains(&x) && (1..4).contains(&y)));
        let zero = Frame::filled(5, 5, FrameKind::Binary, 0);
        assert_eq!(dilate_3x3(&zero).unwrap(), zero);
    }

    #[test]
    fn median_cases() {
        let dot = binary(7, 7, |x, y| (x, y) == (3, 3));
        assert_eq!(median_5x5(&dot).unwrap().count_foreground(), 0);
        let full = Frame::filled(6, 6, FrameKind::Binary, 255);
        assert_eq!(median_5x5(&full).unwrap(), full);
        let half = binary(10, 8, |x, _| x < 5);
        assert_eq!(median_5x5(&half).unwrap(), half);
    }

    #[test]
    fn kind_checks() {
        let g = Frame::filled(3, 3, FrameKind::Grey, 0);
        assert!(erode_3x3(&g).is_err());
        assert!(median_5x5(&g).is_err());
        assert!(gaussian_5x5(&Frame::filled(3, 3, FrameKind::Binary, 0)).is_err());
    }

    fn arb_grey() -> impl Strategy<Value = Frame> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            prop::collection::vec(any::<u8>(), w * h)
                .prop_map(move |d| Frame::new(w, h, FrameKind::Grey, d).unwrap())
        })
    }

    fn arb_binary(max: usize) -> impl Strategy<Value = Frame> {
        (1usize..max, 1usize..max).prop_flat_map(|(w, h)| {
            prop::collection::vec(prop::bool::weighted(0.5), w * h).prop_map(move |d| {
                let data = d.into_iter().map(|b| if b { 255 } else { 0 }).collect();
                Frame::new(w, h, FrameKind::Binary, data).unwrap()
            })
        })
    }

    fn subset(a: &Frame, b: &Frame) -> bool {
        a.data().iter().zip(b.data()).all(|(&x, &y)| x == 0 || y != 0)
    }

    proptest! {
        #[test]
        fn gaussian_matches_direct_convolution(f in arb_grey()) {
            let g = gaussian_5x5(&f).unwrap();
            prop_assert_eq!(&g, &gaussian_oracle(&f));
            let lo = *f.data().iter().min().unwrap();
            let hi = *f.data().iter().max().unwrap();
            prop_assert!(g.data().iter().all(|&v| v >= lo && v <= hi));
        }

        #[test]
        fn sequential_and_parallel_agree(f in arb_binary(20)) {
            prop_assert_eq!(median_5x5_with(&f, Exec::Sequential).unwrap(), median_5x5_with(&f, Exec::Parallel).unwrap());
            prop_assert_eq!(erode_3x3_with(&f, Exec::Sequential).unwrap(), erode_3x3_with(&f, Exec::Parallel).unwrap());
        }

        #[test]
        fn opening_is_contained(f in arb_binary(33)) {
            let opened = dilate_3x3(&erode_3x3(&f).unwrap()).unwrap();
            prop_assert!(subset(&opened, &f));
        }

        #[test]
        fn morphology_is_monotone(f in arb_binary(16), extra in prop::collection::vec(any::<bool>(), 256)) {
            let mut g = f.clone();
            for (i, add) in extra.iter().enumerate().take(f.width() * f.height()) {
                if *add { g.set(i % f.width(), i / f.width(), 255); }
            }
            prop_assert!(subset(&erode_3x3(&f).unwrap(), &erode_3x3(&g).unwrap()));
            prop_assert!(subset(&dilate_3x3(&f).unwrap(), &dilate_3x3(&g).unwrap()));
        }

        #[test]
        fn median_fixed_points_stay_fixed(f in arb_binary(20)) {
            let once = median_5x5(&f).unwrap();
            let twice = median_5x5(&once).unwrap();
            if twice == once {
                prop_assert_eq!(median_5x5(&twice).unwrap(), twice);
            }
            prop_assert_eq!(once.width(), f.width());
            prop_assert_eq!(once.kind(), FrameKind::Binary);
        }
    }
}
