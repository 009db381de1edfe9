use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::numerics::{big, pow2, ExactRational};
use crate::{Error, Result};

/// Closed dyadic cube `∏ [c_i/2^l, (c_i+1)/2^l]` inside the unit cube.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    level: u32,
    coords: Vec<BigInt>,
}

impl DyadicCube {
    pub fn new<T: Into<BigInt>>(level: u32, coords: Vec<T>) -> Result<Self> {
        let coords: Vec<BigInt> = coords.into_iter().map(Into::into).collect();
        if coords.is_empty() {
            return Err(Error::InvalidArgument("a cube needs d >= 1".into()));
        }
        let side = BigInt::one() << level as usize;
        if coords.iter().any(|c| c.is_negative() || *c >= side) {
            return Err(Error::InvalidArgument(format!(
                "cube coordinates must lie in [0, 2^{level})"
            )));
        }
        Ok(Self { level, coords })
    }

    pub fn unit(d: usize) -> Self {
        Self {
            level: 0,
            coords: vec![BigInt::zero(); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn coords(&self) -> &[BigInt] {
        &self.coords
    }

    pub fn side(&self) -> ExactRational {
        pow2(-(self.level as i64))
    }

    /// Exact `2^{-d l}`.
    pub fn measure(&self) -> ExactRational {
        pow2(-(self.level as i64) * self.dim() as i64)
    }

    pub fn bounds(&self) -> (Vec<ExactRational>, Vec<ExactRational>) {
        let s = self.side();
        let lo: Vec<_> = self.coords.iter().map(|c| big(c.clone()) * &s).collect();
        let hi = lo.iter().map(|x| x + &s).collect();
        (lo, hi)
    }

    pub fn center(&self) -> Vec<ExactRational> {
        let s = pow2(-(self.level as i64) - 1);
        self.coords
            .iter()
            .map(|c| big(c * 2 + 1) * &s)
            .collect()
    }

    /// Sub-cube `depth` levels down with coordinates relative to `self`.
    pub fn descendant(&self, depth: u32, rel: &[u64]) -> Self {
        debug_assert_eq!(rel.len(), self.dim());
        Self {
            level: self.level + depth,
            coords: self
                .coords
                .iter()
                .zip(rel)
                .map(|(c, r)| (c << depth as usize) + BigInt::from(*r))
                .collect(),
        }
    }

    /// Coordinates of `other` relative to `self`, when `other` lies inside.
    pub fn relative(&self, other: &DyadicCube) -> Option<Vec<u64>> {
        if other.level < self.level || other.dim() != self.dim() {
            return None;
        }
        let k = (other.level - self.level) as usize;
        let mut out = Vec::with_capacity(self.dim());
        for (a, b) in self.coords.iter().zip(&other.coords) {
            let r: BigInt = b - (a << k);
            if r.is_negative() || r >= (BigInt::one() << k) {
                return None;
            }
            out.push(u64::try_from(r).ok()?);
        }
        Some(out)
    }

    pub fn contains(&self, other: &DyadicCube) -> bool {
        if other.level < self.level || other.dim() != self.dim() {
            return false;
        }
        let k = (other.level - self.level) as usize;
        self.coords
            .iter()
            .zip(&other.coords)
            .all(|(a, b)| (b >> k) == *a)
    }

    /// Ancestor at a coarser level.
    pub fn ancestor(&self, level: u32) -> Self {
        assert!(level <= self.level);
        let k = (self.level - level) as usize;
        Self {
            level,
            coords: self.coords.iter().map(|c| c >> k).collect(),
        }
    }

    pub fn coord_strings(&self) -> Vec<String> {
        self.coords.iter().map(ToString::to_string).collect()
    }

    pub fn from_strings(level: u32, coords: &[String]) -> Result<Self> {
        let c = coords
            .iter()
            .map(|s| {
                s.parse::<BigInt>()
                    .map_err(|_| Error::Parse(format!("bad cube coordinate {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(level, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{int, rat};

    #[test]
    fn bounds_and_center() {
        let c = DyadicCube::new(2, vec![1, 3]).unwrap();
        let (lo, hi) = c.bounds();
        assert_eq!(lo, vec![rat(1, 4), rat(3, 4)]);
        assert_eq!(hi, vec![rat(1, 2), int(1)]);
        assert_eq!(c.center(), vec![rat(3, 8), rat(7, 8)]);
        assert_eq!(c.measure(), rat(1, 16));
        assert!(DyadicCube::new(2, vec![4]).is_err());
        assert!(DyadicCube::new(2, vec![-1]).is_err());
    }

    #[test]
    fn descendant_relative_round_trip() {
        let w = DyadicCube::new(3, vec![5, 2]).unwrap();
        let c = w.descendant(4, &[9, 15]);
        assert_eq!(c.level(), 7);
        assert!(w.contains(&c));
        assert_eq!(w.relative(&c), Some(vec![9, 15]));
        assert_eq!(c.ancestor(3), w);
        let other = DyadicCube::new(7, vec![0, 0]).unwrap();
        assert!(!w.contains(&other));
        assert_eq!(w.relative(&other), None);
    }
}
