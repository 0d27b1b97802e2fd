use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or direction in R^d with finite entries and d >= 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("vector must have at least one entry"));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "vector entry {i} is not finite ({})",
                entries[i]
            )));
        }
        Ok(Vector(entries))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Vector::new(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Result<Self> {
        Vector::new(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    // Callers guarantee finiteness (e.g. scaling a unit vector by a finite factor).
    pub(crate) fn from_vec_unchecked(entries: Vec<f64>) -> Self {
        debug_assert!(!entries.is_empty() && entries.iter().all(|v| v.is_finite()));
        Vector(entries)
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(Vector::new(vec![]).is_err());
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
        assert_eq!(Vector::new(vec![3.0, 4.0]).unwrap().norm(), 5.0);
    }

    #[test]
    fn serde_validates() {
        let v: Vector = serde_json::from_str("[1.0, 2.0]").unwrap();
        assert_eq!(v.dim(), 2);
        assert!(serde_json::from_str::<Vector>("[]").is_err());
    }
}
