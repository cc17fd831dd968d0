//! Block-structured iterates.
//!
//! Every problem in the crate works on a [`Point`]: an ordered list of named
//! blocks, each either a dense vector or a dense square matrix. Gradients and
//! search directions use the same type, so "shape-congruent" simply means the
//! block names and dimensions agree.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::ShapeError;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum Block<T: Real> {
    Vector(DVector<T>),
    Matrix(DMatrix<T>),
}

/// Dimension signature of a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockShape {
    Vector(usize),
    Matrix(usize),
}

impl fmt::Display for BlockShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockShape::Vector(n) => write!(f, "vector[{n}]"),
            BlockShape::Matrix(n) => write!(f, "matrix[{n}x{n}]"),
        }
    }
}

impl<T: Real> Block<T> {
    pub fn shape(&self) -> BlockShape {
        match self {
            Block::Vector(v) => BlockShape::Vector(v.len()),
            Block::Matrix(m) => BlockShape::Matrix(m.nrows()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Block::Vector(v) => v.len(),
            Block::Matrix(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_slice(&self) -> &[T] {
        match self {
            Block::Vector(v) => v.as_slice(),
            Block::Matrix(m) => m.as_slice(),
        }
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        match self {
            Block::Vector(v) => v.as_mut_slice(),
            Block::Matrix(m) => m.as_mut_slice(),
        }
    }

    fn zeros(shape: BlockShape) -> Self {
        match shape {
            BlockShape::Vector(n) => Block::Vector(DVector::zeros(n)),
            BlockShape::Matrix(n) => Block::Matrix(DMatrix::zeros(n, n)),
        }
    }
}

/// A named collection of vector and square-matrix blocks.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Point<T: Real> {
    names: Vec<String>,
    blocks: Vec<Block<T>>,
}

/// Directions and gradients share the iterate layout.
pub type Direction<T> = Point<T>;

impl<T: Real> Point<T> {
    pub fn new() -> Self {
        Self { names: Vec::new(), blocks: Vec::new() }
    }

    /// Single vector block named `x`.
    pub fn from_vector(v: DVector<T>) -> Self {
        Self::new().with_vector("x", v)
    }

    pub fn from_slice(xs: &[T]) -> Self {
        Self::from_vector(DVector::from_column_slice(xs))
    }

    /// Single matrix block named `W`.
    pub fn from_matrix(m: DMatrix<T>) -> Self {
        Self::new().with_matrix("W", m)
    }

    /// Panics on duplicate names or a non-square matrix; use [`Point::push`]
    /// for the fallible form.
    pub fn with_vector(mut self, name: &str, v: DVector<T>) -> Self {
        self.push(name, Block::Vector(v)).expect("valid block");
        self
    }

    pub fn with_matrix(mut self, name: &str, m: DMatrix<T>) -> Self {
        self.push(name, Block::Matrix(m)).expect("valid block");
        self
    }

    pub fn push(&mut self, name: &str, block: Block<T>) -> Result<(), ShapeError> {
        if self.names.iter().any(|n| n == name) {
            return Err(ShapeError::new("unique block names", format!("duplicate `{name}`")));
        }
        if let Block::Matrix(m) = &block {
            if !m.is_square() {
                return Err(ShapeError::new(
                    "square matrix block",
                    format!("`{name}` is {}x{}", m.nrows(), m.ncols()),
                ));
            }
        }
        self.names.push(name.to_owned());
        self.blocks.push(block);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&str, &Block<T>)> {
        self.names.iter().map(String::as_str).zip(self.blocks.iter())
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn shapes(&self) -> Vec<(String, BlockShape)> {
        self.names.iter().cloned().zip(self.blocks.iter().map(Block::shape)).collect()
    }

    /// Total number of scalar entries.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Block::len).sum()
    }

    pub fn block(&self, name: &str) -> Option<&Block<T>> {
        self.index_of(name).map(|i| &self.blocks[i])
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut Block<T>> {
        self.index_of(name).map(move |i| &mut self.blocks[i])
    }

    pub fn vector(&self, name: &str) -> Result<&DVector<T>, ShapeError> {
        match self.block(name) {
            Some(Block::Vector(v)) => Ok(v),
            Some(b) => Err(ShapeError::new(format!("vector block `{name}`"), b.shape().to_string())),
            None => Err(ShapeError::new(format!("vector block `{name}`"), "missing")),
        }
    }

    pub fn matrix(&self, name: &str) -> Result<&DMatrix<T>, ShapeError> {
        match self.block(name) {
            Some(Block::Matrix(m)) => Ok(m),
            Some(b) => Err(ShapeError::new(format!("matrix block `{name}`"), b.shape().to_string())),
            None => Err(ShapeError::new(format!("matrix block `{name}`"), "missing")),
        }
    }

    pub fn vector_mut(&mut self, name: &str) -> Result<&mut DVector<T>, ShapeError> {
        match self.block_mut(name) {
            Some(Block::Vector(v)) => Ok(v),
            Some(b) => Err(ShapeError::new(format!("vector block `{name}`"), b.shape().to_string())),
            None => Err(ShapeError::new(format!("vector block `{name}`"), "missing")),
        }
    }

    pub fn matrix_mut(&mut self, name: &str) -> Result<&mut DMatrix<T>, ShapeError> {
        match self.block_mut(name) {
            Some(Block::Matrix(m)) => Ok(m),
            Some(b) => Err(ShapeError::new(format!("matrix block `{name}`"), b.shape().to_string())),
            None => Err(ShapeError::new(format!("matrix block `{name}`"), "missing")),
        }
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn is_congruent(&self, other: &Self) -> bool {
        self.names == other.names
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| a.shape() == b.shape())
    }

    pub fn check_congruent(&self, other: &Self) -> Result<(), ShapeError> {
        if self.is_congruent(other) {
            Ok(())
        } else {
            Err(ShapeError::new(describe(&self.shapes()), describe(&other.shapes())))
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            names: self.names.clone(),
            blocks: self.blocks.iter().map(|b| Block::zeros(b.shape())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.as_slice().iter().all(|x| x.is_finite_value()))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = self.clone();
        for b in &mut out.blocks {
            for x in b.as_mut_slice() {
                *x = f(*x);
            }
        }
        out
    }

    pub fn scale(&self, a: T) -> Self {
        self.map(|x| x * a)
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: T, other: &Self) -> Result<(), ShapeError> {
        self.check_congruent(other)?;
        for (s, o) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in s.as_mut_slice().iter_mut().zip(o.as_slice()) {
                *x += a * *y;
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, ShapeError> {
        let mut out = self.clone();
        out.axpy(T::one(), other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, ShapeError> {
        let mut out = self.clone();
        out.axpy(-T::one(), other)?;
        Ok(out)
    }

    /// Euclidean inner product of the flattened blocks.
    pub fn dot(&self, other: &Self) -> Result<T, ShapeError> {
        self.check_congruent(other)?;
        Ok(self
            .blocks
            .iter()
            .zip(&other.blocks)
            .flat_map(|(a, b)| a.as_slice().iter().zip(b.as_slice()))
            .fold(T::zero(), |acc, (x, y)| acc + *x * *y))
    }

    pub fn norm_squared(&self) -> T {
        self.blocks
            .iter()
            .flat_map(|b| b.as_slice().iter())
            .fold(T::zero(), |acc, x| acc + *x * *x)
    }

    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn norm_inf(&self) -> T {
        self.blocks
            .iter()
            .flat_map(|b| b.as_slice().iter())
            .fold(T::zero(), |acc, x| acc.max(x.abs()))
    }

    /// All entries, block by block (matrices column-major).
    pub fn flatten(&self) -> DVector<T> {
        DVector::from_iterator(self.dim(), self.blocks.iter().flat_map(|b| b.as_slice().iter().copied()))
    }

    /// Inverse of [`Point::flatten`] using `self` as the layout template.
    pub fn unflatten(&self, flat: &DVector<T>) -> Result<Self, ShapeError> {
        if flat.len() != self.dim() {
            return Err(ShapeError::new(format!("{} entries", self.dim()), format!("{} entries", flat.len())));
        }
        let mut out = self.clone();
        let mut offset = 0;
        for b in &mut out.blocks {
            let s = b.as_mut_slice();
            s.copy_from_slice(&flat.as_slice()[offset..offset + s.len()]);
            offset += s.len();
        }
        Ok(out)
    }

    pub fn cast<U: Real>(&self) -> Point<U> {
        Point {
            names: self.names.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| match b {
                    Block::Vector(v) => Block::Vector(v.map(|x| U::lit(x.as_f64()))),
                    Block::Matrix(m) => Block::Matrix(m.map(|x| U::lit(x.as_f64()))),
                })
                .collect(),
        }
    }
}

fn describe(shapes: &[(String, BlockShape)]) -> String {
    let parts: Vec<String> = shapes.iter().map(|(n, s)| format!("{n}:{s}")).collect();
    format!("[{}]", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Point<f64> {
        Point::new()
            .with_vector("w", DVector::from_vec(vec![1.0, -2.0]))
            .with_matrix("Z", DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]))
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut p = sample();
        assert!(p.push("w", Block::Vector(DVector::zeros(1))).is_err());
    }

    #[test]
    fn non_square_rejected() {
        let mut p = Point::<f64>::new();
        assert!(p.push("A", Block::Matrix(DMatrix::zeros(2, 3))).is_err());
    }

    #[test]
    fn arithmetic_requires_congruence() {
        let p = sample();
        let q = Point::from_slice(&[1.0, 2.0]);
        assert!(p.add(&q).is_err());
        assert!(p.dot(&q).is_err());
        let d = p.sub(&p).unwrap();
        assert_eq!(d.norm(), 0.0);
        assert_eq!(p.dot(&p).unwrap(), p.norm_squared());
        assert_eq!(p.norm_squared(), 1.0 + 4.0 + 1.0 + 0.25 + 0.25 + 1.0);
    }

    #[test]
    fn typed_accessors() {
        let p = sample();
        assert!(p.vector("w").is_ok());
        assert!(p.matrix("w").is_err());
        assert!(p.vector("missing").is_err());
        assert_eq!(p.dim(), 6);
    }

    proptest! {
        #[test]
        fn flatten_roundtrip(xs in proptest::collection::vec(-1e3f64..1e3, 6)) {
            let template = sample();
            let flat = DVector::from_vec(xs.clone());
            let p = template.unflatten(&flat).unwrap();
            let back = p.flatten();
            prop_assert_eq!(back.as_slice(), xs.as_slice());
            prop_assert!(p.is_congruent(&template));
        }
    }
}
