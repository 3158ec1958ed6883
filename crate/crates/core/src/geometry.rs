//! Canvas geometry and binary masks.
//!
//! Canvas coordinates are abstract pixels with the origin at the top-left and
//! y pointing down. Scene regions use the same [`Rect`] type in normalized
//! `[0, 1]` image coordinates.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle with strictly positive extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRect")]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Deserialize)]
struct RawRect {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl TryFrom<RawRect> for Rect {
    type Error = Error;

    fn try_from(raw: RawRect) -> Result<Self> {
        Rect::new(raw.x, raw.y, raw.w, raw.h)
    }
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidRect(format!("non-finite rect ({x}, {y}, {w}, {h})")));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidRect(format!("non-positive extent {w}x{h}")));
        }
        Ok(Rect { x, y, w, h })
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Overlap with positive area, if any.
    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 > x0 && y1 > y0 {
            Some(Rect { x: x0, y: y0, w: x1 - x0, h: y1 - y0 })
        } else {
            None
        }
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.intersection(other).is_some()
    }

    /// Half-open containment: left and top edges are inside, right and bottom are not.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && px < self.right() && py >= self.y && py < self.bottom()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Rect {
        Rect { x: self.x + dx, y: self.y + dy, ..*self }
    }

    /// True when the rect lies inside the unit square.
    pub fn is_normalized(&self) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.right() <= 1.0 + 1e-9 && self.bottom() <= 1.0 + 1e-9
    }
}

/// Pixel-center membership test shared by every rasterization in the crate:
/// pixel `px` of a `size`-pixel axis belongs to `[start, start + len)` iff its
/// center `(px + 0.5) / size` does.
pub fn pixel_center_inside(px: u32, size: u32, start: f64, len: f64) -> bool {
    let c = (px as f64 + 0.5) / size as f64;
    c >= start && c < start + len
}

/// Range of pixels along one axis whose centers fall in `[start, start + len)`.
pub fn pixel_span(start: f64, len: f64, size: u32) -> Range<u32> {
    let center = |px: u32| (px as f64 + 0.5) / size as f64;
    let first = |bound: f64| -> u32 {
        let guess = (bound * size as f64 - 0.5).ceil();
        let mut px = if guess <= 0.0 { 0 } else if guess >= size as f64 { size } else { guess as u32 };
        while px > 0 && center(px - 1) >= bound {
            px -= 1;
        }
        while px < size && center(px) < bound {
            px += 1;
        }
        px
    };
    let lo = first(start);
    let hi = first(start + len).max(lo);
    lo..hi
}

/// One bit per pixel, row-major; a set bit marks the editable region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<u64>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        let words = (width as usize * height as usize).div_ceil(64);
        Mask { width, height, bits: vec![0; words] }
    }

    /// Rasterizes a normalized region with the pixel-center rule.
    pub fn from_region(width: u32, height: u32, region: &Rect) -> Self {
        let mut mask = Mask::new(width, height);
        let xs = pixel_span(region.x, region.w, width);
        for y in pixel_span(region.y, region.h, height) {
            for x in xs.clone() {
                mask.set(x, y, true);
            }
        }
        mask
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        if x >= self.width || y >= self.height {
            return false;
        }
        let i = self.index(x, y);
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        assert!(x < self.width && y < self.height, "mask pixel ({x}, {y}) out of bounds");
        let i = self.index(x, y);
        if on {
            self.bits[i / 64] |= 1 << (i % 64);
        } else {
            self.bits[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|w| *w == 0)
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn union_with(&mut self, other: &Mask) {
        assert_eq!(self.dims(), other.dims());
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    pub fn intersection_count(&self, other: &Mask) -> u64 {
        assert_eq!(self.dims(), other.dims());
        self.bits.iter().zip(&other.bits).map(|(a, b)| (a & b).count_ones() as u64).sum()
    }

    pub fn complement(&self) -> Mask {
        let mut out = Mask::new(self.width, self.height);
        for (o, w) in out.bits.iter_mut().zip(&self.bits) {
            *o = !*w;
        }
        // clear the padding bits past the last pixel
        let total = self.width as usize * self.height as usize;
        if !total.is_multiple_of(64) {
            if let Some(last) = out.bits.last_mut() {
                *last &= (1u64 << (total % 64)) - 1;
            }
        }
        out
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| (x, y))).filter(|&(x, y)| self.get(x, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_rejects_non_positive_extent() {
        assert!(Rect::new(0.0, 0.0, 0.0, 10.0).is_err());
        assert!(Rect::new(0.0, 0.0, 10.0, -1.0).is_err());
        assert!(Rect::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn intersection_requires_positive_area() {
        let a = Rect::new(0.0, 0.0, 100.0, 100.0).unwrap();
        let b = Rect::new(50.0, 50.0, 100.0, 100.0).unwrap();
        let touching = Rect::new(100.0, 0.0, 10.0, 10.0).unwrap();
        assert_eq!(a.intersection(&b), Some(Rect::new(50.0, 50.0, 50.0, 50.0).unwrap()));
        assert_eq!(a.intersection(&touching), None);
    }

    #[test]
    fn deserialize_validates() {
        assert!(serde_json::from_str::<Rect>(r#"{"x":0,"y":0,"w":0,"h":1}"#).is_err());
        let r: Rect = serde_json::from_str(r#"{"x":1,"y":2,"w":3,"h":4}"#).unwrap();
        assert_eq!(r.area(), 12.0);
    }

    #[test]
    fn span_matches_per_pixel_test() {
        for (start, len, size) in [(0.25, 0.5, 8), (0.0, 1.0, 7), (0.3, 0.01, 10), (0.95, 0.05, 20), (0.1, 0.333, 3)] {
            let brute: Vec<u32> = (0..size).filter(|&p| pixel_center_inside(p, size, start, len)).collect();
            let fast: Vec<u32> = pixel_span(start, len, size).collect();
            assert_eq!(brute, fast, "start={start} len={len} size={size}");
        }
    }

    #[test]
    fn complement_tiles_the_mask() {
        let m = Mask::from_region(13, 7, &Rect::new(0.2, 0.1, 0.5, 0.6).unwrap());
        let c = m.complement();
        assert_eq!(m.count() + c.count(), 13 * 7);
        assert_eq!(m.intersection_count(&c), 0);
    }

    proptest::proptest! {
        #[test]
        fn intersection_commutes(ax in -50.0..50.0f64, ay in -50.0..50.0f64, aw in 0.1..80.0f64, ah in 0.1..80.0f64,
                                 bx in -50.0..50.0f64, by in -50.0..50.0f64, bw in 0.1..80.0f64, bh in 0.1..80.0f64) {
            let a = Rect::new(ax, ay, aw, ah).unwrap();
            let b = Rect::new(bx, by, bw, bh).unwrap();
            proptest::prop_assert_eq!(a.intersection(&b), b.intersection(&a));
            if let Some(i) = a.intersection(&b) {
                proptest::prop_assert!(i.area() > 0.0);
            }
        }
    }
}
