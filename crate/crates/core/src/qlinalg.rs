//! Exact sparse linear algebra over Q.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

/// Sparse vector: index -> nonzero entry.
pub type SparseVec = BTreeMap<usize, Rational>;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().ok()?;
    let den: BigInt = den.parse().ok()?;
    if den.is_zero() || den.is_negative() {
        return None;
    }
    Some(Rational::new(num, den))
}

pub fn format_rational(q: &Rational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn axpy(acc: &mut SparseVec, a: &Rational, v: &SparseVec) {
    for (&i, x) in v {
        let e = acc.entry(i).or_insert_with(Rational::zero);
        *e += a * x;
        if e.is_zero() {
            acc.remove(&i);
        }
    }
}

pub fn add_entry(acc: &mut SparseVec, i: usize, a: Rational) {
    let e = acc.entry(i).or_insert_with(Rational::zero);
    *e += a;
    if e.is_zero() {
        acc.remove(&i);
    }
}

pub fn dense_to_sparse(v: &[Rational]) -> SparseVec {
    v.iter()
        .enumerate()
        .filter(|(_, x)| !x.is_zero())
        .map(|(i, x)| (i, x.clone()))
        .collect()
}

pub fn sparse_to_dense(v: &SparseVec, len: usize) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); len];
    for (&i, x) in v {
        out[i] = x.clone();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: BTreeMap<(usize, usize), Rational>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix { rows, cols, entries: BTreeMap::new() }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    pub fn from_dense(rows: &[Vec<Rational>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            for (j, x) in r.iter().enumerate() {
                m.set(i, j, x.clone());
            }
        }
        m
    }

    pub fn from_ints(rows: &[Vec<i64>]) -> Self {
        let rows: Vec<Vec<Rational>> = rows.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect();
        Self::from_dense(&rows)
    }

    /// Builds a matrix whose `j`-th column is `cols[j]`.
    pub fn from_columns(rows: usize, cols: &[SparseVec]) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (&i, x) in c {
                m.set(i, j, x.clone());
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> Rational {
        self.entries.get(&(r, c)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn set(&mut self, r: usize, c: usize, x: Rational) {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of range");
        if x.is_zero() {
            self.entries.remove(&(r, c));
        } else {
            self.entries.insert((r, c), x);
        }
    }

    pub fn add(&mut self, r: usize, c: usize, x: &Rational) {
        let v = self.get(r, c) + x;
        self.set(r, c, v);
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Rational)> {
        self.entries.iter().map(|(&(r, c), x)| (r, c, x))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for (r, c, x) in self.entries() {
            t.entries.insert((c, r), x.clone());
        }
        t
    }

    pub fn row_vectors(&self) -> Vec<SparseVec> {
        let mut out = vec![SparseVec::new(); self.rows];
        for (r, c, x) in self.entries() {
            out[r].insert(c, x.clone());
        }
        out
    }

    pub fn column_vectors(&self) -> Vec<SparseVec> {
        let mut out = vec![SparseVec::new(); self.cols];
        for (r, c, x) in self.entries() {
            out[c].insert(r, x.clone());
        }
        out
    }

    pub fn mul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension { expected: self.cols, got: other.rows });
        }
        let other_rows = other.row_vectors();
        let mut out = SparseMatrix::zeros(self.rows, other.cols);
        for (r, k, x) in self.entries() {
            for (&c, y) in &other_rows[k] {
                out.add(r, c, &(x * y));
            }
        }
        Ok(out)
    }

    pub fn apply(&self, v: &SparseVec) -> SparseVec {
        let mut out = SparseVec::new();
        for (r, c, x) in self.entries() {
            if let Some(y) = v.get(&c) {
                add_entry(&mut out, r, x * y);
            }
        }
        out
    }

    pub fn scaled(&self, a: &Rational) -> SparseMatrix {
        let mut out = SparseMatrix::zeros(self.rows, self.cols);
        for (r, c, x) in self.entries() {
            out.set(r, c, x * a);
        }
        out
    }

    pub fn plus(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension { expected: self.rows * self.cols, got: other.rows * other.cols });
        }
        let mut out = self.clone();
        for (r, c, x) in other.entries() {
            out.add(r, c, x);
        }
        Ok(out)
    }
}

/// Incrementally maintained reduced row echelon form. The pivot of a row is
/// its smallest index; pivot rows are kept fully reduced against each other.
#[derive(Clone, Debug, Default)]
pub struct Echelon {
    rows: Vec<SparseVec>,
    pivot_row: HashMap<usize, usize>,
}

impl Echelon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn pivots(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().map(|r| *r.keys().next().unwrap())
    }

    pub fn is_pivot(&self, col: usize) -> bool {
        self.pivot_row.contains_key(&col)
    }

    /// The normalized row whose pivot is `col`.
    pub fn row_for_pivot(&self, col: usize) -> Option<&SparseVec> {
        self.pivot_row.get(&col).map(|&i| &self.rows[i])
    }

    pub fn reduce(&self, v: &SparseVec) -> SparseVec {
        let mut v = v.clone();
        let mut cursor = 0usize;
        loop {
            let next = v.range(cursor..).find(|(i, _)| self.pivot_row.contains_key(i)).map(|(&i, x)| (i, x.clone()));
            let Some((i, x)) = next else { break };
            let row = &self.rows[self.pivot_row[&i]];
            axpy(&mut v, &-x, row);
            cursor = i + 1;
        }
        v
    }

    /// Adds `v` to the row space; returns whether the rank increased.
    pub fn insert(&mut self, v: &SparseVec) -> bool {
        let mut r = self.reduce(v);
        let Some((&p, lead)) = r.iter().next() else { return false };
        let inv = lead.recip();
        for x in r.values_mut() {
            *x *= &inv;
        }
        for row in self.rows.iter_mut() {
            if let Some(x) = row.get(&p).cloned() {
                axpy(row, &-x, &r);
            }
        }
        self.pivot_row.insert(p, self.rows.len());
        self.rows.push(r);
        true
    }

    pub fn contains(&self, v: &SparseVec) -> bool {
        self.reduce(v).is_empty()
    }

    /// Rows sorted by pivot.
    pub fn sorted_rows(&self) -> Vec<SparseVec> {
        let mut rows = self.rows.clone();
        rows.sort_by_key(|r| *r.keys().next().unwrap());
        rows
    }
}

pub fn echelon_of<'a>(vs: impl IntoIterator<Item = &'a SparseVec>) -> Echelon {
    let mut e = Echelon::new();
    for v in vs {
        e.insert(v);
    }
    e
}

pub fn rank(m: &SparseMatrix) -> usize {
    if m.rows <= m.cols {
        echelon_of(&m.row_vectors()).rank()
    } else {
        echelon_of(&m.column_vectors()).rank()
    }
}

pub fn kernel_basis(m: &SparseMatrix) -> Vec<Vec<Rational>> {
    sparse_kernel_basis(m).iter().map(|v| sparse_to_dense(v, m.cols)).collect()
}

pub fn sparse_kernel_basis(m: &SparseMatrix) -> Vec<SparseVec> {
    let e = echelon_of(&m.row_vectors());
    let mut out = Vec::new();
    for f in (0..m.cols).filter(|c| !e.is_pivot(*c)) {
        let mut v = SparseVec::new();
        v.insert(f, Rational::one());
        for row in &e.rows {
            if let Some(x) = row.get(&f) {
                v.insert(*row.keys().next().unwrap(), -x);
            }
        }
        out.push(v);
    }
    out
}

pub fn in_span(vs: &[Vec<Rational>], target: &[Rational]) -> Result<bool> {
    for v in vs {
        if v.len() != target.len() {
            return Err(Error::Dimension { expected: target.len(), got: v.len() });
        }
    }
    let rows: Vec<SparseVec> = vs.iter().map(|v| dense_to_sparse(v)).collect();
    Ok(echelon_of(&rows).contains(&dense_to_sparse(target)))
}

pub fn quotient_dim(ambient: usize, subspace: &[Vec<Rational>]) -> Result<usize> {
    for v in subspace {
        if v.len() != ambient {
            return Err(Error::Dimension { expected: ambient, got: v.len() });
        }
    }
    let rows: Vec<SparseVec> = subspace.iter().map(|v| dense_to_sparse(v)).collect();
    Ok(ambient - echelon_of(&rows).rank())
}
