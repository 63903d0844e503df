//! Arithmetic over GF(2^w) for w <= 16 and dense matrices over those fields.
//!
//! Elements are plain `u16` values in `[0, 2^w)`. Addition is XOR; multiplication
//! goes through exp/log tables built once per [`Field`] and shared by clones.
//! Matrices are row-major and carry no field of their own, so every operation
//! that needs multiplication takes the [`Field`] explicitly.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Element = u16;

pub const MAX_WIDTH: u32 = 16;

/// Width and reduction polynomial of a binary extension field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "FieldSpecRecord", into = "FieldSpecRecord")]
pub struct FieldSpec {
    w: u32,
    poly: u32,
}

impl FieldSpec {
    /// Validates that `poly` has degree `w` and is irreducible over GF(2).
    pub fn new(w: u32, poly: u32) -> Result<Self> {
        if w == 0 || w > MAX_WIDTH {
            return Err(Error::InvalidField(format!("width {w} not in 1..=16")));
        }
        if degree(poly) != Some(w) {
            return Err(Error::InvalidField(format!(
                "polynomial {poly:#x} does not have degree {w}"
            )));
        }
        if !is_irreducible(poly) {
            return Err(Error::InvalidField(format!(
                "polynomial {poly:#x} is reducible over GF(2)"
            )));
        }
        Ok(Self { w, poly })
    }

    pub fn gf16() -> Self {
        Self { w: 4, poly: 0x13 }
    }

    pub fn gf256() -> Self {
        Self { w: 8, poly: 0x11B }
    }

    pub fn gf65536() -> Self {
        Self {
            w: 16,
            poly: 0x1100B,
        }
    }

    /// Field of size `q` using the default polynomial for that width.
    pub fn with_size(q: u32) -> Result<Self> {
        if q < 2 || !q.is_power_of_two() {
            return Err(Error::InvalidField(format!("field size {q} is not 2^w")));
        }
        let w = q.trailing_zeros();
        match w {
            4 => Ok(Self::gf16()),
            8 => Ok(Self::gf256()),
            16 => Ok(Self::gf65536()),
            1..=MAX_WIDTH => {
                let poly = (1u32 << w..1u32 << (w + 1))
                    .find(|&p| is_irreducible(p))
                    .expect("an irreducible polynomial exists for every degree");
                Ok(Self { w, poly })
            }
            _ => Err(Error::InvalidField(format!("field size {q} exceeds 2^16"))),
        }
    }

    pub fn w(&self) -> u32 {
        self.w
    }

    pub fn q(&self) -> u32 {
        1 << self.w
    }

    pub fn poly(&self) -> u32 {
        self.poly
    }

    pub fn poly_hex(&self) -> String {
        format!("{:#x}", self.poly)
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF(2^{}) mod {:#x}", self.w, self.poly)
    }
}

#[derive(Serialize, Deserialize)]
struct FieldSpecRecord {
    w: u32,
    poly_hex: String,
}

impl TryFrom<FieldSpecRecord> for FieldSpec {
    type Error = Error;

    fn try_from(rec: FieldSpecRecord) -> Result<Self> {
        FieldSpec::new(rec.w, parse_hex(&rec.poly_hex)?)
    }
}

impl From<FieldSpec> for FieldSpecRecord {
    fn from(spec: FieldSpec) -> Self {
        Self {
            w: spec.w,
            poly_hex: spec.poly_hex(),
        }
    }
}

pub(crate) fn parse_hex(s: &str) -> Result<u32> {
    let digits = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .unwrap_or(s);
    u32::from_str_radix(digits, 16).map_err(|e| Error::Malformed(format!("bad hex {s:?}: {e}")))
}

fn degree(p: u32) -> Option<u32> {
    (p != 0).then(|| 31 - p.leading_zeros())
}

/// Remainder of carry-less polynomial division over GF(2).
fn poly_rem(mut a: u32, b: u32) -> u32 {
    let db = degree(b).expect("nonzero divisor");
    while let Some(da) = degree(a) {
        if da < db {
            break;
        }
        a ^= b << (da - db);
    }
    a
}

/// Exhaustive trial division by every polynomial of degree 1..=deg/2.
fn is_irreducible(p: u32) -> bool {
    let Some(d) = degree(p) else { return false };
    if d == 0 {
        return false;
    }
    (1..=d / 2).all(|fd| (1u32 << fd..1u32 << (fd + 1)).all(|f| poly_rem(p, f) != 0))
}

/// Shift-and-add product reduced modulo `poly`; used only to build tables.
fn mul_slow(a: u32, b: u32, spec: FieldSpec) -> u32 {
    let (mut a, mut b, mut acc) = (a, b, 0u32);
    let top = 1u32 << spec.w;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & top != 0 {
            a ^= spec.poly;
        }
    }
    acc
}

struct Tables {
    exp: Vec<Element>,
    log: Vec<u32>,
}

/// A field instance with precomputed multiplication tables. Cheap to clone.
#[derive(Clone)]
pub struct Field {
    spec: FieldSpec,
    tables: Arc<Tables>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Field").field(&self.spec).finish()
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Eq for Field {}

impl Field {
    pub fn new(spec: FieldSpec) -> Self {
        let order = (spec.q() - 1) as usize;
        // the reduction polynomial need not be primitive, so search for a generator
        let mut exp = vec![0 as Element; 2 * order];
        let mut log = vec![0u32; spec.q() as usize];
        for g in 1..spec.q() {
            let mut x = 1u32;
            let mut cycle = 0usize;
            loop {
                exp[cycle] = x as Element;
                cycle += 1;
                x = mul_slow(x, g, spec);
                if x == 1 || cycle > order {
                    break;
                }
            }
            if cycle == order {
                break;
            }
        }
        for i in 0..order {
            exp[order + i] = exp[i];
            log[exp[i] as usize] = i as u32;
        }
        Self {
            spec,
            tables: Arc::new(Tables { exp, log }),
        }
    }

    pub fn gf16() -> Self {
        Self::new(FieldSpec::gf16())
    }

    pub fn gf256() -> Self {
        Self::new(FieldSpec::gf256())
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn q(&self) -> u32 {
        self.spec.q()
    }

    pub fn contains(&self, a: Element) -> bool {
        (a as u32) < self.q()
    }

    pub fn check(&self, a: Element) -> Result<Element> {
        if self.contains(a) {
            Ok(a)
        } else {
            Err(Error::ElementOutOfRange {
                value: a as u32,
                w: self.spec.w,
            })
        }
    }

    #[inline]
    pub fn add(&self, a: Element, b: Element) -> Element {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: Element, b: Element) -> Element {
        if a == 0 || b == 0 {
            return 0;
        }
        let t = &self.tables;
        t.exp[(t.log[a as usize] + t.log[b as usize]) as usize]
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: Element) -> Option<Element> {
        if a == 0 {
            return None;
        }
        let order = self.q() - 1;
        let t = &self.tables;
        Some(t.exp[((order - t.log[a as usize]) % order) as usize])
    }

    pub fn div(&self, a: Element, b: Element) -> Option<Element> {
        self.inv(b).map(|ib| self.mul(a, ib))
    }

    pub fn pow(&self, a: Element, e: u64) -> Element {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let order = (self.q() - 1) as u64;
        let t = &self.tables;
        t.exp[((t.log[a as usize] as u64 * (e % order)) % order) as usize]
    }

    /// `dst[i] ^= c * src[i]` for every position.
    #[inline]
    fn axpy(&self, dst: &mut [Element], c: Element, src: &[Element]) {
        if c == 0 {
            return;
        }
        let t = &self.tables;
        let lc = t.log[c as usize];
        for (d, &s) in dst.iter_mut().zip(src) {
            if s != 0 {
                *d ^= t.exp[(lc + t.log[s as usize]) as usize];
            }
        }
    }

    #[inline]
    fn scale_in_place(&self, row: &mut [Element], c: Element) {
        for x in row.iter_mut() {
            *x = self.mul(*x, c);
        }
    }
}

/// Free-function form of [`Field::mul`].
pub fn gf_mul(a: Element, b: Element, field: &Field) -> Element {
    field.mul(a, b)
}

/// Dense row-major matrix over a binary extension field.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Element>,
}

impl fmt::Debug for FieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "FieldMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:x?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl FieldMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Element>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| (i == j) as Element)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Element) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn from_rows(rows: &[Vec<Element>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn entries(&self) -> &[Element] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Element {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r},{c}) out of bounds"
        );
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Element) {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r},{c}) out of bounds"
        );
        self.entries[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Element] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0)
    }

    /// Fails if any entry lies outside `field`.
    pub fn check_entries(&self, field: &Field) -> Result<()> {
        self.entries
            .iter()
            .try_for_each(|&x| field.check(x).map(|_| ()))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |i, j| self.get(i, cols[j]))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut entries = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            entries.extend_from_slice(self.row(r));
        }
        Self {
            rows: rows.len(),
            cols: self.cols,
            entries,
        }
    }

    /// Stacks matrices vertically. An empty slice gives a `0 x cols` matrix.
    pub fn vstack(parts: &[&FieldMatrix], cols: usize) -> Result<Self> {
        let mut entries = Vec::new();
        let mut rows = 0;
        for p in parts {
            if p.cols != cols {
                return Err(Error::DimensionMismatch(format!(
                    "vstack of {} columns into {cols}",
                    p.cols
                )));
            }
            entries.extend_from_slice(&p.entries);
            rows += p.rows;
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn hstack(parts: &[&FieldMatrix], rows: usize) -> Result<Self> {
        if let Some(p) = parts.iter().find(|p| p.rows != rows) {
            return Err(Error::DimensionMismatch(format!(
                "hstack of {} rows into {rows}",
                p.rows
            )));
        }
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let mut offset = 0;
        for p in parts {
            for r in 0..rows {
                out.entries[r * cols + offset..r * cols + offset + p.cols]
                    .copy_from_slice(p.row(r));
            }
            offset += p.cols;
        }
        Ok(out)
    }

    pub fn mul(&self, rhs: &FieldMatrix, field: &Field) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let dst = &mut out.entries[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                field.axpy(dst, self.entries[i * self.cols + k], rhs.row(k));
            }
        }
        Ok(out)
    }

    /// Row vector times matrix: `v · self`.
    pub fn left_mul_vec(&self, v: &[Element], field: &Field) -> Result<Vec<Element>> {
        if v.len() != self.rows {
            return Err(Error::LengthMismatch {
                expected: self.rows,
                actual: v.len(),
            });
        }
        let mut out = vec![0; self.cols];
        for (r, &c) in v.iter().enumerate() {
            field.axpy(&mut out, c, self.row(r));
        }
        Ok(out)
    }

    /// Matrix times column vector: `self · v`.
    pub fn mul_vec(&self, v: &[Element], field: &Field) -> Result<Vec<Element>> {
        if v.len() != self.cols {
            return Err(Error::LengthMismatch {
                expected: self.cols,
                actual: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .fold(0, |acc, (&a, &b)| acc ^ field.mul(a, b))
            })
            .collect())
    }

    pub fn scale(&self, c: Element, field: &Field) -> Self {
        let mut out = self.clone();
        field.scale_in_place(&mut out.entries, c);
        out
    }

    pub fn add(&self, rhs: &FieldMatrix) -> Result<Self> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch("add of unequal shapes".into()));
        }
        let entries = self
            .entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    /// Reduces the leading `pivot_cols` columns to reduced row echelon form in
    /// place (row operations span the full width) and returns the pivot columns.
    /// Pivots are the first nonzero entry scanning rows top-down, columns left to right.
    fn reduce(&mut self, pivot_cols: usize, field: &Field) -> Vec<usize> {
        let cols = self.cols;
        let mut pivots = Vec::new();
        let mut lead = 0;
        for c in 0..pivot_cols {
            if lead == self.rows {
                break;
            }
            let Some(p) = (lead..self.rows).find(|&r| self.entries[r * cols + c] != 0) else {
                continue;
            };
            if p != lead {
                for j in 0..cols {
                    self.entries.swap(p * cols + j, lead * cols + j);
                }
            }
            let inv = field
                .inv(self.entries[lead * cols + c])
                .expect("pivot is nonzero");
            field.scale_in_place(&mut self.entries[lead * cols..(lead + 1) * cols], inv);
            let pivot_row = self.entries[lead * cols..(lead + 1) * cols].to_vec();
            for r in 0..self.rows {
                if r != lead {
                    let f = self.entries[r * cols + c];
                    field.axpy(&mut self.entries[r * cols..(r + 1) * cols], f, &pivot_row);
                }
            }
            pivots.push(c);
            lead += 1;
        }
        pivots
    }

    /// Reduced row echelon form and its pivot columns.
    pub fn rref(&self, field: &Field) -> (FieldMatrix, Vec<usize>) {
        let mut m = self.clone();
        let pivots = m.reduce(m.cols, field);
        (m, pivots)
    }

    /// Rank by forward elimination.
    pub fn rank(&self, field: &Field) -> usize {
        let (rows, cols) = (self.rows, self.cols);
        if rows == 0 || cols == 0 {
            return 0;
        }
        let mut e = self.entries.clone();
        let mut rank = 0;
        for c in 0..cols {
            if rank == rows {
                break;
            }
            let Some(p) = (rank..rows).find(|&r| e[r * cols + c] != 0) else {
                continue;
            };
            if p != rank {
                for j in c..cols {
                    e.swap(p * cols + j, rank * cols + j);
                }
            }
            let inv = field.inv(e[rank * cols + c]).expect("pivot is nonzero");
            let (head, tail) = e.split_at_mut((rank + 1) * cols);
            let pivot = &head[rank * cols + c..];
            for r in 0..rows - rank - 1 {
                let row = &mut tail[r * cols + c..(r + 1) * cols];
                let f = row[0];
                if f != 0 {
                    field.axpy(row, field.mul(f, inv), pivot);
                }
            }
            rank += 1;
        }
        rank
    }

    /// Solves `self · x = b`. Free variables are set to zero, so the result is
    /// deterministic when the system is underdetermined.
    pub fn solve(&self, b: &FieldMatrix, field: &Field) -> Result<FieldMatrix> {
        if self.rows != b.rows {
            return Err(Error::DimensionMismatch(format!(
                "solve with {} equations and {} right-hand rows",
                self.rows, b.rows
            )));
        }
        let n = self.cols;
        let mut aug = FieldMatrix::hstack(&[self, b], self.rows)?;
        let pivots = aug.reduce(n, field);
        let rank = pivots.len();
        if (rank..aug.rows).any(|r| aug.row(r)[n..].iter().any(|&x| x != 0)) {
            return Err(Error::NoSolution);
        }
        let mut x = FieldMatrix::zeros(n, b.cols);
        for (r, &c) in pivots.iter().enumerate() {
            x.entries[c * b.cols..(c + 1) * b.cols].copy_from_slice(&aug.row(r)[n..]);
        }
        Ok(x)
    }

    pub fn inverse(&self, field: &Field) -> Result<FieldMatrix> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch(
                "inverse of a non-square matrix".into(),
            ));
        }
        let n = self.rows;
        let mut aug = FieldMatrix::hstack(&[self, &FieldMatrix::identity(n)], n)?;
        if aug.reduce(n, field).len() < n {
            return Err(Error::Singular);
        }
        Ok(FieldMatrix::from_fn(n, n, |i, j| aug.get(i, n + j)))
    }

    /// Basis of the right null space as the columns of a `cols x nullity` matrix.
    pub fn kernel(&self, field: &Field) -> FieldMatrix {
        let (r, pivots) = self.rref(field);
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut basis = FieldMatrix::zeros(self.cols, free.len());
        for (k, &f) in free.iter().enumerate() {
            basis.set(f, k, 1);
            // char 2: -x = x
            for (row, &p) in pivots.iter().enumerate() {
                basis.set(p, k, r.get(row, f));
            }
        }
        basis
    }
}

/// JSON form of a matrix together with the field it lives in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub w: u32,
    pub poly_hex: String,
    pub entries_hex: Vec<String>,
}

impl MatrixRecord {
    pub fn encode(m: &FieldMatrix, spec: FieldSpec) -> Self {
        Self {
            rows: m.rows,
            cols: m.cols,
            w: spec.w,
            poly_hex: spec.poly_hex(),
            entries_hex: m.entries.iter().map(|x| format!("{x:x}")).collect(),
        }
    }

    pub fn decode(&self) -> Result<(FieldSpec, FieldMatrix)> {
        let spec = FieldSpec::new(self.w, parse_hex(&self.poly_hex)?)?;
        let entries = self
            .entries_hex
            .iter()
            .map(|s| {
                let v = parse_hex(s)?;
                if v >= spec.q() {
                    return Err(Error::ElementOutOfRange {
                        value: v,
                        w: spec.w,
                    });
                }
                Ok(v as Element)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((spec, FieldMatrix::new(self.rows, self.cols, entries)?))
    }
}
