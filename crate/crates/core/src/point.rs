//! Points of the complex plane with an optional exact local offset.
//!
//! A [`Point`] is `anchor + offset`. Two points that share the same anchor
//! have their difference computed from the offsets alone, so clusters of
//! points far from the origin (e.g. `t + l` with `t ~ 1e30`) keep exact
//! mutual distances in binary64.

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    anchor: Complex64,
    offset: Complex64,
}

impl Point {
    pub const fn new(z: Complex64) -> Self {
        Self {
            anchor: z,
            offset: Complex64::new(0.0, 0.0),
        }
    }

    pub fn real(x: f64) -> Self {
        Self::new(Complex64::new(x, 0.0))
    }

    pub const fn anchored(anchor: Complex64, offset: Complex64) -> Self {
        Self { anchor, offset }
    }

    pub fn anchor(&self) -> Complex64 {
        self.anchor
    }

    pub fn offset(&self) -> Complex64 {
        self.offset
    }

    /// Nearest binary64 value of the point.
    pub fn value(&self) -> Complex64 {
        self.anchor + self.offset
    }

    pub fn norm(&self) -> f64 {
        self.value().norm()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.value().norm_sqr()
    }

    pub fn arg(&self) -> f64 {
        self.value().arg()
    }

    /// `self - other`, exact in the offsets when the anchors agree.
    pub fn diff(&self, other: &Point) -> Complex64 {
        if self.anchor == other.anchor {
            self.offset - other.offset
        } else {
            (self.anchor - other.anchor) + (self.offset - other.offset)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.anchor.re.is_finite()
            && self.anchor.im.is_finite()
            && self.offset.re.is_finite()
            && self.offset.im.is_finite()
    }

    /// Multiplies both parts by `c` (rotations and dilations about 0).
    pub fn scale(&self, c: Complex64) -> Point {
        Point::anchored(self.anchor * c, self.offset * c)
    }

    pub fn shifted(&self, delta: Complex64) -> Point {
        Point::anchored(self.anchor, self.offset + delta)
    }

    /// Total order: modulus, then argument, then offset components.
    ///
    /// Points sharing an anchor compare their moduli through
    /// `2 Re(conj(anchor) offset) + |offset|^2`, which stays exact where
    /// the rounded moduli coincide.
    pub fn modulus_cmp(&self, other: &Point) -> Ordering {
        let by_modulus = if self.anchor == other.anchor {
            let key = |p: &Point| {
                2.0 * (p.anchor.conj() * p.offset).re + p.offset.norm_sqr()
            };
            key(self).total_cmp(&key(other))
        } else {
            self.norm().total_cmp(&other.norm())
        };
        by_modulus
            .then_with(|| self.arg().total_cmp(&other.arg()))
            .then_with(|| self.offset.re.total_cmp(&other.offset.re))
            .then_with(|| self.offset.im.total_cmp(&other.offset.im))
    }
}

impl From<Complex64> for Point {
    fn from(z: Complex64) -> Self {
        Point::new(z)
    }
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point::real(x)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.offset == Complex64::new(0.0, 0.0) {
            write!(f, "{}", self.anchor)
        } else {
            write!(f, "{}+({})", self.anchor, self.offset)
        }
    }
}

// JSON form: `[re, im]`, or `[re, im, offset_re, offset_im]` for anchored points.
impl Serialize for Point {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let anchored = self.offset != Complex64::new(0.0, 0.0);
        let mut tup = serializer.serialize_tuple(if anchored { 4 } else { 2 })?;
        tup.serialize_element(&self.anchor.re)?;
        tup.serialize_element(&self.anchor.im)?;
        if anchored {
            tup.serialize_element(&self.offset.re)?;
            tup.serialize_element(&self.offset.im)?;
        }
        tup.end()
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PointVisitor;

        impl<'de> Visitor<'de> for PointVisitor {
            type Value = Point;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an array [re, im] or [re, im, offset_re, offset_im]")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Point, A::Error> {
                let mut parts = Vec::with_capacity(4);
                while let Some(x) = seq.next_element::<f64>()? {
                    parts.push(x);
                }
                match parts.as_slice() {
                    [re, im] => Ok(Point::new(Complex64::new(*re, *im))),
                    [re, im, ore, oim] => Ok(Point::anchored(
                        Complex64::new(*re, *im),
                        Complex64::new(*ore, *oim),
                    )),
                    _ => Err(de::Error::invalid_length(parts.len(), &self)),
                }
            }
        }

        deserializer.deserialize_seq(PointVisitor)
    }
}
