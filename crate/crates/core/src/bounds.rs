use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lo_i, hi_i]` per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::Empty("bounds"));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !l.is_finite() || !h.is_finite() || l > h {
                return Err(Error::InvalidArgument(format!("invalid interval [{l}, {h}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn check(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.len(),
            });
        }
        if !self.contains(p) {
            return Err(Error::OutOfBox {
                point: p.to_vec(),
                lo: self.lo.clone(),
                hi: self.hi.clone(),
            });
        }
        Ok(())
    }

    pub fn clamp(&self, p: &mut [f64]) {
        for ((v, l), h) in p.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*l, *h);
        }
    }

    /// Maps a point of the unit cube onto this box.
    pub fn from_unit(&self, t: &[f64]) -> Vec<f64> {
        t.iter()
            .enumerate()
            .map(|(i, t)| self.lo[i] + t * self.width(i))
            .collect()
    }

    /// Maps a point of this box onto the unit cube. Degenerate intervals map to 0.
    pub fn to_unit(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .enumerate()
            .map(|(i, v)| {
                let w = self.width(i);
                if w > 0.0 {
                    (v - self.lo[i]) / w
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Cartesian product `self × other`.
    pub fn product(&self, other: &Bounds) -> Bounds {
        let mut lo = self.lo.clone();
        lo.extend_from_slice(&other.lo);
        let mut hi = self.hi.clone();
        hi.extend_from_slice(&other.hi);
        Bounds { lo, hi }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_interval() {
        assert!(Bounds::new(vec![1.0], vec![0.0]).is_err());
        assert!(Bounds::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn unit_maps_round_trip() {
        let b = Bounds::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        let p = b.from_unit(&[0.25, 0.5]);
        assert_eq!(p, vec![0.25, 1.5]);
        assert_eq!(b.to_unit(&p), vec![0.25, 0.5]);
        assert!(b.contains(&p));
        assert!(!b.contains(&[0.5, 0.5]));
    }
}
