//! Frames, binary PNM (P5/P6) coding, overlays and image-sequence directories.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum FrameKind {
    Rgb,
    Grey,
    /// One channel holding only 0 (background) or 255 (foreground).
    Binary,
}

impl FrameKind {
    pub fn channels(self) -> usize {
        match self {
            FrameKind::Rgb => 3,
            FrameKind::Grey | FrameKind::Binary => 1,
        }
    }
}

/// An 8-bit image buffer, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    kind: FrameKind,
    data: Vec<u8>,
    pub frame_index: u64,
}

impl Frame {
    /// Builds a frame after checking the buffer length and, for binary
    /// frames, that every sample is 0 or 255.
    pub fn new(width: usize, height: usize, kind: FrameKind, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::contract(format!("empty frame {width}x{height}")));
        }
        let expected = width * height * kind.channels();
        if data.len() != expected {
            return Err(Error::contract(format!(
                "buffer holds {} samples, {width}x{height} {kind:?} needs {expected}",
                data.len()
            )));
        }
        if kind == FrameKind::Binary && data.iter().any(|&v| v != 0 && v != 255) {
            return Err(Error::contract("binary frame with a sample other than 0/255"));
        }
        Ok(Self {
            width,
            height,
            kind,
            data,
            frame_index: 0,
        })
    }

    /// Internal constructor for buffers produced by our own kernels.
    pub(crate) fn from_parts(width: usize, height: usize, kind: FrameKind, data: Vec<u8>) -> Self {
        debug_assert_eq!(data.len(), width * height * kind.channels());
        Self {
            width,
            height,
            kind,
            data,
            frame_index: 0,
        }
    }

    pub fn filled(width: usize, height: usize, kind: FrameKind, value: u8) -> Self {
        assert!(width > 0 && height > 0, "empty frame");
        let v = if kind == FrameKind::Binary && value != 0 { 255 } else { value };
        Self::from_parts(width, height, kind, vec![v; width * height * kind.channels()])
    }

    pub fn with_index(mut self, frame_index: u64) -> Self {
        self.frame_index = frame_index;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kind(&self) -> FrameKind {
        self.kind
    }

    pub fn channels(&self) -> usize {
        self.kind.channels()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// First channel of pixel (x, y).
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels()]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let c = self.channels();
        let i = (y * self.width + x) * c;
        &self.data[i..i + c]
    }

    /// Sets a single-channel sample. Binary frames store any non-zero value as 255.
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        assert_ne!(self.kind, FrameKind::Rgb, "use set_rgb on RGB frames");
        let v = if self.kind == FrameKind::Binary && value != 0 { 255 } else { value };
        self.data[y * self.width + x] = v;
    }

    pub fn set_rgb(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        assert_eq!(self.kind, FrameKind::Rgb);
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub(crate) fn expect_kind(&self, kind: FrameKind, op: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::contract(format!(
                "{op} expects a {kind:?} frame, got {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    /// Number of foreground samples of a binary frame.
    pub fn count_foreground(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// RGB copy; grey and binary samples are replicated into three channels.
    pub fn to_rgb(&self) -> Frame {
        let data = match self.kind {
            FrameKind::Rgb => self.data.clone(),
            _ => self.data.iter().flat_map(|&v| [v, v, v]).collect(),
        };
        Frame::from_parts(self.width, self.height, FrameKind::Rgb, data).with_index(self.frame_index)
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Decode {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Decode {
                offset: start,
                reason: format!("{what} out of range"),
            })
    }
}

/// Decodes a binary greyscale (P5) or RGB (P6) image with maxval 255.
pub fn read_pnm(bytes: &[u8]) -> Result<Frame> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    let kind = match bytes.get(..2) {
        Some(b"P5") => FrameKind::Grey,
        Some(b"P6") => FrameKind::Rgb,
        Some(m) => {
            return Err(cur.err(format!(
                "unsupported magic {:?}",
                String::from_utf8_lossy(m)
            )))
        }
        None => return Err(cur.err("missing magic number")),
    };
    cur.pos = 2;
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(cur.err("expected whitespace after magic"));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(cur.err("zero image dimension"));
    }
    if maxval != 255 {
        return Err(cur.err(format!("maxval {maxval} unsupported, only 255")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.err("expected single whitespace before raster")),
    }
    let len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(kind.channels()))
        .ok_or_else(|| cur.err("image dimensions overflow"))?;
    let raster = &bytes[cur.pos..];
    if raster.len() < len {
        return Err(Error::Decode {
            offset: bytes.len(),
            reason: format!("truncated raster: {} of {len} bytes", raster.len()),
        });
    }
    Ok(Frame::from_parts(width, height, kind, raster[..len].to_vec()))
}

/// Encodes grey and binary frames as P5 and RGB frames as P6 with a
/// canonical header and no comments.
pub fn write_pnm(frame: &Frame) -> Vec<u8> {
    let magic = match frame.kind {
        FrameKind::Rgb => "P6",
        FrameKind::Grey | FrameKind::Binary => "P5",
    };
    let header = format!("{magic}\n{} {}\n255\n", frame.width, frame.height);
    let mut out = Vec::with_capacity(header.len() + frame.data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&frame.data);
    out
}

pub fn load_pnm(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_pnm(&bytes)
}

pub fn save_pnm(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_pnm(frame)).map_err(|e| Error::io(path, e))
}

pub type Rgb = [u8; 3];

pub const RED: Rgb = [255, 0, 0];
pub const GREEN: Rgb = [0, 255, 0];
pub const BLUE: Rgb = [0, 0, 255];
pub const ORANGE: Rgb = [255, 165, 0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Overlay {
    /// Inclusive box outline, 1 px wide.
    Rect {
        min_x: i64,
        min_y: i64,
        max_x: i64,
        max_y: i64,
        color: Rgb,
    },
    /// Filled 3×3 dot centred on the (rounded) point.
    Point { x: f64, y: f64, color: Rgb },
    Line {
        from: (f64, f64),
        to: (f64, f64),
        color: Rgb,
    },
}

fn plot(frame: &mut Frame, x: i64, y: i64, color: Rgb) {
    if x >= 0 && y >= 0 && (x as usize) < frame.width && (y as usize) < frame.height {
        frame.set_rgb(x as usize, y as usize, color);
    }
}

/// Draws overlays on an RGB copy of `frame`. Later overlays win on shared pixels.
pub fn annotate(frame: &Frame, overlays: &[Overlay]) -> Frame {
    let mut out = frame.to_rgb();
    for overlay in overlays {
        match *overlay {
            Overlay::Rect {
                min_x,
                min_y,
                max_x,
                max_y,
                color,
            } => {
                for x in min_x..=max_x {
                    plot(&mut out, x, min_y, color);
                    plot(&mut out, x, max_y, color);
                }
                for y in min_y..=max_y {
                    plot(&mut out, min_x, y, color);
                    plot(&mut out, max_x, y, color);
                }
            }
            Overlay::Point { x, y, color } => {
                let (cx, cy) = (x.round() as i64, y.round() as i64);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        plot(&mut out, cx + dx, cy + dy, color);
                    }
                }
            }
            Overlay::Line { from, to, color } => {
                // Bresenham
                let (mut x0, mut y0) = (from.0.round() as i64, from.1.round() as i64);
                let (x1, y1) = (to.0.round() as i64, to.1.round() as i64);
                let dx = (x1 - x0).abs();
                let dy = -(y1 - y0).abs();
                let sx = if x0 < x1 { 1 } else { -1 };
                let sy = if y0 < y1 { 1 } else { -1 };
                let mut err = dx + dy;
                loop {
                    plot(&mut out, x0, y0, color);
                    if x0 == x1 && y0 == y1 {
                        break;
                    }
                    let e2 = 2 * err;
                    if e2 >= dy {
                        err += dy;
                        x0 += sx;
                    }
                    if e2 <= dx {
                        err += dx;
                        y0 += sy;
                    }
                }
            }
        }
    }
    out
}

/// File name of frame `index` inside a sequence directory.
pub fn sequence_frame_name(index: u64) -> String {
    format!("frame_{index:06}.ppm")
}

/// Reads `altitude.csv` (`frame_index,altitude_m` per line).
pub fn read_altitude_log(path: impl AsRef<Path>) -> Result<Vec<(u64, f64)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_altitude_log(&text)
}

pub fn parse_altitude_log(text: &str) -> Result<Vec<(u64, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Input(format!("altitude log line {}: {line:?}", lineno + 1));
        let (idx, alt) = line.split_once(',').ok_or_else(bad)?;
        let idx: u64 = idx.trim().parse().map_err(|_| bad())?;
        let alt: f64 = alt.trim().parse().map_err(|_| bad())?;
        out.push((idx, alt));
    }
    Ok(out)
}

pub fn format_altitude_log(entries: &[(u64, f64)]) -> String {
    entries.iter().map(|(i, a)| format!("{i},{a}\n")).collect()
}

/// Sorted `frame_%06d.ppm` files of a sequence directory, with their indices.
pub fn list_sequence(dir: impl AsRef<Path>) -> Result<Vec<(u64, PathBuf)>> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut frames = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(num) = name
            .strip_prefix("frame_")
            .and_then(|s| s.strip_suffix(".ppm"))
        else {
            continue;
        };
        if let Ok(idx) = num.parse::<u64>() {
            frames.push((idx, entry.path()));
        }
    }
    frames.sort();
    Ok(frames)
}
