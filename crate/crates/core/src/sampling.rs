//! Sampling boxes and the seeded low-discrepancy stream used by every
//! sampled condition check.
//!
//! The stream is an additive recurrence (Kronecker / R_d sequence) with a
//! seeded Cranley–Patterson shift. Sample `i` depends only on `(seed, i)`, so
//! raising `sample_count` extends the sample set without reshuffling it.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::Var;

/// Closed interval `[lo, hi]`, `lo <= hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Range {
        Range { lo, hi }
    }

    pub fn point(v: f64) -> Range {
        Range { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    /// Maps `u` in `[0, 1]` affinely onto the range.
    #[inline]
    pub fn at(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }

    /// Same center, width scaled by `s`.
    pub fn scaled(&self, s: f64) -> Range {
        let c = self.center();
        let h = 0.5 * self.width() * s;
        Range::new(c - h, c + h)
    }

    pub fn clip_below(&self, floor: f64) -> Range {
        Range::new(self.lo.max(floor), self.hi.max(floor))
    }
}

/// A point of `(t, x, y, z)` space.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point {
    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Point {
        Point { t, x, y, z }
    }

    pub fn get(&self, v: Var) -> f64 {
        match v {
            Var::T => self.t,
            Var::X => self.x,
            Var::Y => self.y,
            Var::Z => self.z,
        }
    }

    pub fn set(&mut self, v: Var, value: f64) {
        match v {
            Var::T => self.t = value,
            Var::X => self.x = value,
            Var::Y => self.y = value,
            Var::Z => self.z = value,
        }
    }

    pub fn with(mut self, v: Var, value: f64) -> Point {
        self.set(v, value);
        self
    }

    pub fn midpoint(&self, other: &Point) -> Point {
        Point::new(
            0.5 * (self.t + other.t),
            0.5 * (self.x + other.x),
            0.5 * (self.y + other.y),
            0.5 * (self.z + other.z),
        )
    }
}

/// Sampling region for condition checks.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleBox {
    pub t: Range,
    pub x: Range,
    pub y: Range,
    pub z: Range,
    pub sample_count: usize,
    pub seed: u64,
}

pub const DEFAULT_SAMPLE_COUNT: usize = 2048;
pub const DEFAULT_SEED: u64 = 20_240_917;

impl SampleBox {
    pub fn new(t: Range, x: Range, y: Range, z: Range) -> SampleBox {
        SampleBox {
            t,
            x,
            y,
            z,
            sample_count: DEFAULT_SAMPLE_COUNT,
            seed: DEFAULT_SEED,
        }
    }

    pub fn with_samples(mut self, sample_count: usize) -> SampleBox {
        self.sample_count = sample_count;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> SampleBox {
        self.seed = seed;
        self
    }

    pub fn range(&self, v: Var) -> Range {
        match v {
            Var::T => self.t,
            Var::X => self.x,
            Var::Y => self.y,
            Var::Z => self.z,
        }
    }

    pub fn set_range(&mut self, v: Var, r: Range) {
        match v {
            Var::T => self.t = r,
            Var::X => self.x = r,
            Var::Y => self.y = r,
            Var::Z => self.z = r,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.sample_count >= 1 && Var::ALL.iter().all(|v| self.range(*v).is_valid())
    }

    /// Restricts `z` to `z >= 0`.
    pub fn with_nonneg_z(mut self) -> SampleBox {
        self.z = self.z.clip_below(0.0);
        self
    }

    /// Shrinks every range except `t` around its center by factor `s`.
    pub fn nested(&self, s: f64) -> SampleBox {
        let mut b = *self;
        b.x = self.x.scaled(s);
        b.y = self.y.scaled(s);
        b.z = self.z.scaled(s);
        b
    }

    pub fn map(&self, u: [f64; 4]) -> Point {
        Point::new(self.t.at(u[0]), self.x.at(u[1]), self.y.at(u[2]), self.z.at(u[3]))
    }

    pub fn center(&self) -> Point {
        Point::new(self.t.center(), self.x.center(), self.y.center(), self.z.center())
    }

    /// Low-discrepancy stream over this box's seed.
    pub fn stream<const D: usize>(&self, salt: u64) -> LowDiscrepancy<D> {
        LowDiscrepancy::new(self.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

/// Seeded additive-recurrence sequence in `[0, 1)^D`.
#[derive(Clone, Debug)]
pub struct LowDiscrepancy<const D: usize> {
    alpha: [f64; D],
    shift: [f64; D],
}

impl<const D: usize> LowDiscrepancy<D> {
    pub fn new(seed: u64) -> Self {
        // Generalized golden ratio: positive root of phi^(D+1) = phi + 1.
        let mut phi = 2.0f64;
        for _ in 0..64 {
            phi = libm::pow(1.0 + phi, 1.0 / (D as f64 + 1.0));
        }
        let mut alpha = [0.0; D];
        let mut shift = [0.0; D];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for j in 0..D {
            alpha[j] = frac(1.0 / libm::pow(phi, (j + 1) as f64));
            shift[j] = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        }
        LowDiscrepancy { alpha, shift }
    }

    /// The `i`-th point.
    #[inline]
    pub fn point(&self, i: usize) -> [f64; D] {
        let mut out = [0.0; D];
        let n = (i + 1) as f64;
        for j in 0..D {
            out[j] = frac(self.shift[j] + n * self.alpha[j]);
        }
        out
    }
}

#[inline]
fn frac(v: f64) -> f64 {
    v - libm::floor(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_is_nested_and_deterministic() {
        let a = LowDiscrepancy::<3>::new(7);
        let b = LowDiscrepancy::<3>::new(7);
        for i in [0, 1, 10, 1000] {
            assert_eq!(a.point(i), b.point(i));
        }
        let c = LowDiscrepancy::<3>::new(8);
        assert_ne!(a.point(0), c.point(0));
    }

    #[test]
    fn stream_fills_unit_cube_evenly() {
        let s = LowDiscrepancy::<2>::new(1);
        let n = 4096;
        let mut counts = [[0usize; 4]; 4];
        for i in 0..n {
            let p = s.point(i);
            assert!((0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1]));
            counts[(p[0] * 4.0) as usize][(p[1] * 4.0) as usize] += 1;
        }
        for row in counts {
            for c in row {
                assert!((c as i64 - 256).abs() < 16, "cell count {c}");
            }
        }
    }

    #[test]
    fn nested_box_keeps_center() {
        let b = SampleBox::new(
            Range::new(0.0, 1.0),
            Range::new(1.0, 201.0),
            Range::new(-10.0, 10.0),
            Range::new(-4.0, 8.0),
        );
        let h = b.nested(0.5);
        assert_eq!(h.x, Range::new(51.0, 151.0));
        assert_eq!(h.z, Range::new(-1.0, 5.0));
        assert_eq!(h.t, b.t);
        assert_eq!(b.with_nonneg_z().z, Range::new(0.0, 8.0));
    }
}
