//! Sparse vectors and matrices over `Coeff`, and an incremental reduced row-echelon space.

use std::collections::BTreeMap;
use std::fmt;

use crate::field::Coeff;

/// Anything a formal series may carry as its coefficients.
pub trait SeriesCoeff: Clone + PartialEq + fmt::Debug {
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn scale(&self, c: &Coeff) -> Self;
}

impl SeriesCoeff for Coeff {
    fn is_zero(&self) -> bool {
        Coeff::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn scale(&self, c: &Coeff) -> Self {
        self * c
    }
}

/// Sparse vector indexed by basis position.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct SparseVec {
    entries: BTreeMap<usize, Coeff>,
}

impl SparseVec {
    pub fn new() -> Self {
        SparseVec::default()
    }

    pub fn unit(i: usize) -> Self {
        let mut v = SparseVec::new();
        v.entries.insert(i, Coeff::one());
        v
    }

    pub fn from_entries(it: impl IntoIterator<Item = (usize, Coeff)>) -> Self {
        let mut v = SparseVec::new();
        for (i, c) in it {
            v.add_term(i, &c);
        }
        v
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> Coeff {
        self.entries.get(&i).cloned().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Coeff)> {
        self.entries.iter().map(|(i, c)| (*i, c))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest / smallest occupied index.
    pub fn first_index(&self) -> Option<usize> {
        self.entries.keys().next().copied()
    }

    pub fn last_index(&self) -> Option<usize> {
        self.entries.keys().next_back().copied()
    }

    /// self[i] += c.
    pub fn add_term(&mut self, i: usize, c: &Coeff) {
        if c.is_zero() {
            return;
        }
        match self.entries.get_mut(&i) {
            Some(e) => {
                *e = &*e + c;
                if e.is_zero() {
                    self.entries.remove(&i);
                }
            }
            None => {
                self.entries.insert(i, c.clone());
            }
        }
    }

    /// self += c · other.
    pub fn axpy(&mut self, c: &Coeff, other: &SparseVec) {
        if c.is_zero() {
            return;
        }
        for (i, x) in &other.entries {
            self.add_term(*i, &(c * x));
        }
    }

    pub fn scaled(&self, c: &Coeff) -> SparseVec {
        if c.is_zero() {
            return SparseVec::new();
        }
        SparseVec { entries: self.entries.iter().map(|(i, x)| (*i, x * c)).collect() }
    }

    pub fn sub(&self, other: &SparseVec) -> SparseVec {
        let mut out = self.clone();
        out.axpy(&-Coeff::one(), other);
        out
    }

    /// Reindexes through `f`, dropping entries mapped to `None`.
    pub fn remap(&self, f: impl Fn(usize) -> Option<usize>) -> SparseVec {
        let mut out = SparseVec::new();
        for (i, c) in &self.entries {
            if let Some(j) = f(*i) {
                out.add_term(j, c);
            }
        }
        out
    }

    /// Maximum τ-freeness check helper: true when all entries are rational.
    pub fn is_rational(&self) -> bool {
        self.entries.values().all(|c| c.as_rational().is_some())
    }
}

impl SeriesCoeff for SparseVec {
    fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
    fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(&Coeff::one(), other);
        out
    }
    fn scale(&self, c: &Coeff) -> Self {
        self.scaled(c)
    }
}

impl fmt::Debug for SparseVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.entries.iter()).finish()
    }
}

/// Sparse matrix stored by columns: `col(j)` is the image of basis vector `j`.
#[derive(Clone, PartialEq, Eq)]
pub struct SparseMat {
    rows: usize,
    cols: Vec<SparseVec>,
}

impl SparseMat {
    pub fn zero(rows: usize, cols: usize) -> Self {
        SparseMat { rows, cols: vec![SparseVec::new(); cols] }
    }

    pub fn identity(n: usize) -> Self {
        SparseMat { rows: n, cols: (0..n).map(SparseVec::unit).collect() }
    }

    pub fn from_columns(rows: usize, cols: Vec<SparseVec>) -> Self {
        debug_assert!(cols.iter().all(|c| c.last_index().map_or(true, |i| i < rows)));
        SparseMat { rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols.len()
    }

    pub fn col(&self, j: usize) -> &SparseVec {
        &self.cols[j]
    }

    pub fn set_col(&mut self, j: usize, v: SparseVec) {
        self.cols[j] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> Coeff {
        self.cols[j].get(i)
    }

    pub fn add_entry(&mut self, i: usize, j: usize, c: &Coeff) {
        self.cols[j].add_term(i, c);
    }

    pub fn is_zero(&self) -> bool {
        self.cols.iter().all(|c| c.is_zero())
    }

    pub fn apply(&self, v: &SparseVec) -> SparseVec {
        let mut out = SparseVec::new();
        for (j, c) in v.iter() {
            out.axpy(c, &self.cols[j]);
        }
        out
    }

    /// self · other.
    pub fn mul(&self, other: &SparseMat) -> SparseMat {
        assert_eq!(self.cols(), other.rows, "dimension mismatch in matrix product");
        SparseMat { rows: self.rows, cols: other.cols.iter().map(|c| self.apply(c)).collect() }
    }

    pub fn add(&self, other: &SparseMat) -> SparseMat {
        assert_eq!((self.rows, self.cols()), (other.rows, other.cols()), "dimension mismatch in matrix sum");
        SparseMat { rows: self.rows, cols: self.cols.iter().zip(&other.cols).map(|(a, b)| SeriesCoeff::add(a, b)).collect() }
    }

    pub fn scaled(&self, c: &Coeff) -> SparseMat {
        SparseMat { rows: self.rows, cols: self.cols.iter().map(|v| v.scaled(c)).collect() }
    }

    pub fn sub(&self, other: &SparseMat) -> SparseMat {
        self.add(&other.scaled(&-Coeff::one()))
    }

    pub fn transpose(&self) -> SparseMat {
        let mut out = SparseMat::zero(self.cols(), self.rows);
        for (j, col) in self.cols.iter().enumerate() {
            for (i, c) in col.iter() {
                out.cols[i].add_term(j, c);
            }
        }
        out
    }

    /// Rank over ℚ(ζ)(τ).
    pub fn rank(&self) -> usize {
        let mut space = RowSpace::new();
        for c in &self.cols {
            space.insert(c.clone());
        }
        space.rank()
    }
}

impl SeriesCoeff for SparseMat {
    fn is_zero(&self) -> bool {
        SparseMat::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        SparseMat::add(self, other)
    }
    fn scale(&self, c: &Coeff) -> Self {
        self.scaled(c)
    }
}

impl fmt::Debug for SparseMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SparseMat {}x{} ", self.rows, self.cols())?;
        f.debug_list().entries(self.cols.iter()).finish()
    }
}

/// Span of vectors kept in reduced row-echelon form.
///
/// The pivot of each stored row is its smallest index, so reduction eliminates low indices
/// first; callers choose their basis order accordingly.
#[derive(Clone, Default, Debug)]
pub struct RowSpace {
    rows: BTreeMap<usize, SparseVec>,
}

impl RowSpace {
    pub fn new() -> Self {
        RowSpace::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn pivots(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.keys().copied()
    }

    pub fn is_pivot(&self, i: usize) -> bool {
        self.rows.contains_key(&i)
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &SparseVec)> {
        self.rows.iter().map(|(p, r)| (*p, r))
    }

    /// Normal form of `v` modulo the span (no pivot coordinates remain).
    pub fn reduce(&self, v: &SparseVec) -> SparseVec {
        let mut v = v.clone();
        loop {
            let hit = v.iter().map(|(i, _)| i).find(|i| self.rows.contains_key(i));
            match hit {
                None => return v,
                Some(p) => {
                    let c = v.get(p);
                    v.axpy(&-c, &self.rows[&p]);
                }
            }
        }
    }

    pub fn contains(&self, v: &SparseVec) -> bool {
        self.reduce(v).is_zero()
    }

    /// Adds `v` to the span; returns true when the rank grew.
    pub fn insert(&mut self, v: SparseVec) -> bool {
        let r = self.reduce(&v);
        let p = match r.first_index() {
            None => return false,
            Some(p) => p,
        };
        let r = r.scaled(&r.get(p).inv());
        for row in self.rows.values_mut() {
            let c = row.get(p);
            if !c.is_zero() {
                row.axpy(&-c, &r);
            }
        }
        self.rows.insert(p, r);
        true
    }
}

/// Kernel of the linear map whose columns are `cols` (each a vector in a common space):
/// returns a basis of coefficient vectors λ with Σ λ_j cols[j] = 0.
pub fn kernel(cols: &[SparseVec]) -> Vec<SparseVec> {
    // Row-reduce the augmented rows [col_j | e_j] with image coordinates ordered first.
    let offset = cols.iter().filter_map(|c| c.last_index()).max().map_or(0, |m| m + 1);
    let mut space = RowSpace::new();
    for (j, c) in cols.iter().enumerate() {
        let mut aug = c.clone();
        aug.add_term(offset + j, &Coeff::one());
        space.insert(aug);
    }
    space
        .rows()
        .filter(|(p, _)| *p >= offset)
        .map(|(_, r)| r.remap(|i| i.checked_sub(offset)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(entries: &[(usize, i64)]) -> SparseVec {
        SparseVec::from_entries(entries.iter().map(|(i, c)| (*i, Coeff::from_i64(*c))))
    }

    #[test]
    fn row_space_reduces_to_normal_form() {
        let mut s = RowSpace::new();
        assert!(s.insert(v(&[(0, 1), (1, 1)])));
        assert!(s.insert(v(&[(1, 1), (2, 1)])));
        assert!(!s.insert(v(&[(0, 1), (2, -1)])));
        assert_eq!(s.rank(), 2);
        assert_eq!(s.reduce(&v(&[(0, 1)])), v(&[(2, 1)]));
    }

    #[test]
    fn kernel_of_dependent_columns() {
        let cols = vec![v(&[(0, 1)]), v(&[(0, 2)]), v(&[(1, 1)])];
        let k = kernel(&cols);
        assert_eq!(k.len(), 1);
        let mut acc = SparseVec::new();
        for (j, c) in k[0].iter() {
            acc.axpy(c, &cols[j]);
        }
        assert!(acc.is_zero());
    }

    #[test]
    fn matrix_product_and_transpose() {
        let a = SparseMat::from_columns(2, vec![v(&[(0, 1), (1, 3)]), v(&[(1, 2)])]);
        let i = SparseMat::identity(2);
        assert_eq!(a.mul(&i), a);
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.rank(), 2);
    }
}
