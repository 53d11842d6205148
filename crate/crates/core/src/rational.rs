//! Exact rational arithmetic: parsing, printing and a dense matrix type.
//!
//! Ranks use fraction-free (Bareiss) elimination on integer rows. The
//! elimination runs on `i128` with checked arithmetic first and is redone on
//! big integers when an intermediate value overflows. Linear solves go
//! through a reduced row echelon form over `BigRational`.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num::{BigInt, BigRational, Integer, One, Signed, ToPrimitive, Zero};

/// Exact rational number used for rates and structural matrices.
pub type Rational = BigRational;

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Parses `"3"`, `"0.25"`, `"-1.5"` or `"2/7"` into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Some((numer, denom)) = text.split_once('/') {
        let numer: BigInt = parse_signed_digits(numer)?;
        let denom: BigInt = parse_signed_digits(denom)?;
        if denom.is_zero() {
            return None;
        }
        return Some(Rational::new(numer, denom));
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{whole}{frac}");
    let numer: BigInt = digits.parse().ok()?;
    let denom = num::pow(BigInt::from(10), frac.len());
    let value = Rational::new(numer, denom);
    Some(if negative { -value } else { value })
}

fn parse_signed_digits(text: &str) -> Option<BigInt> {
    let text = text.trim();
    let body = text.strip_prefix('-').unwrap_or(text);
    if body.is_empty() || !body.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    text.parse().ok()
}

/// Canonical text form: `a` for integers and `a/b` otherwise.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn to_f64(value: &Rational) -> f64 {
    if let Some(v) = value.to_f64() {
        if v.is_finite() && (v != 0.0 || value.is_zero()) {
            return v;
        }
    }
    ln_abs(value).exp() * if value.is_negative() { -1.0 } else { 1.0 }
}

/// Natural logarithm of `|value|`, accurate for numerators and denominators
/// far outside the `f64` range.
pub fn ln_abs(value: &Rational) -> f64 {
    ln_bigint(value.numer()) - ln_bigint(value.denom())
}

fn ln_bigint(value: &BigInt) -> f64 {
    let magnitude = value.abs();
    let bits = magnitude.bits();
    if bits <= 1000 {
        return magnitude.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let head: BigInt = &magnitude >> shift;
    head.to_f64().unwrap_or(f64::INFINITY).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Dense row-major matrix with exact rational entries.
#[derive(Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

/// Reduced row echelon form together with its pivot columns.
#[derive(Clone, Debug)]
pub struct Echelon {
    pub reduced: RationalMatrix,
    pub pivots: Vec<usize>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Rational) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from integer rows. All rows must have equal length.
    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self::from_fn(rows.len(), cols, |i, j| int(rows[i][j]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "column mismatch in vstack");
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        }
    }

    /// Places `other` to the right of `self`.
    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "row mismatch in hstack");
        Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)].clone()
            } else {
                other[(i, j - self.cols)].clone()
            }
        })
    }

    pub fn mul_vec(&self, x: &[Rational]) -> Vec<Rational> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(Rational::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(to_f64).collect())
            .collect()
    }

    /// Exact rank by fraction-free elimination.
    pub fn rank(&self) -> usize {
        let rows = self.integer_rows();
        let narrow: Option<Vec<Vec<i128>>> = rows
            .iter()
            .map(|r| r.iter().map(ToPrimitive::to_i128).collect())
            .collect();
        if let Some(narrow) = narrow {
            if let Some(rank) = bareiss_rank(narrow) {
                return rank;
            }
        }
        bareiss_rank(rows).expect("big-integer elimination cannot overflow")
    }

    /// Each row scaled by the lcm of its denominators.
    fn integer_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let lcm = row
                    .iter()
                    .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
                row.iter()
                    .map(|x| x.numer() * (&lcm / x.denom()))
                    .collect()
            })
            .collect()
    }

    /// Reduced row echelon form, pivoting only within the first `pivot_cols`
    /// columns. Columns beyond that act as right-hand sides.
    pub fn rref_limited(&self, pivot_cols: usize) -> Echelon {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..pivot_cols.min(self.cols) {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m[(i, c)].is_zero()) else {
                continue;
            };
            m.swap_rows(p, r);
            let inv = m[(r, c)].recip();
            for j in c..m.cols {
                let v = &m[(r, j)] * &inv;
                m[(r, j)] = v;
            }
            for i in 0..m.rows {
                if i == r || m[(i, c)].is_zero() {
                    continue;
                }
                let factor = m[(i, c)].clone();
                for j in c..m.cols {
                    let v = &m[(i, j)] - &factor * &m[(r, j)];
                    m[(i, j)] = v;
                }
            }
            pivots.push(c);
            r += 1;
        }
        Echelon { reduced: m, pivots }
    }

    pub fn rref(&self) -> Echelon {
        self.rref_limited(self.cols)
    }

    /// Basis of `{x : self * x = 0}`, one vector per free column.
    pub fn kernel_basis(&self) -> Vec<Vec<Rational>> {
        let Echelon { reduced, pivots } = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut x = vec![Rational::zero(); self.cols];
                x[f] = Rational::one();
                for (i, &p) in pivots.iter().enumerate() {
                    x[p] = -reduced[(i, f)].clone();
                }
                x
            })
            .collect()
    }

    /// Solves `self * X = rhs` column by column. Free variables are set to
    /// zero under the natural column pivot order. Returns `None` if some
    /// column of `rhs` is inconsistent.
    pub fn solve(&self, rhs: &RationalMatrix) -> Option<RationalMatrix> {
        assert_eq!(self.rows, rhs.rows, "row mismatch in solve");
        let Echelon { reduced, pivots } = self.hstack(rhs).rref_limited(self.cols);
        let rank = pivots.len();
        for i in rank..reduced.rows {
            if (self.cols..reduced.cols).any(|j| !reduced[(i, j)].is_zero()) {
                return None;
            }
        }
        let mut x = RationalMatrix::zeros(self.cols, rhs.cols);
        for (i, &p) in pivots.iter().enumerate() {
            for k in 0..rhs.cols {
                x[(p, k)] = reduced[(i, self.cols + k)].clone();
            }
        }
        Some(x)
    }

    pub fn solve_vec(&self, b: &[Rational]) -> Option<Vec<Rational>> {
        let rhs = RationalMatrix::from_fn(b.len(), 1, |i, _| b[i].clone());
        self.solve(&rhs)
            .map(|x| (0..x.rows).map(|i| x[(i, 0)].clone()).collect())
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl Index<(usize, usize)> for RationalMatrix {
    type Output = Rational;

    fn index(&self, (i, j): (usize, usize)) -> &Rational {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RationalMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rational {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &RationalMatrix {
    type Output = RationalMatrix;

    fn mul(self, rhs: &RationalMatrix) -> RationalMatrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in product");
        RationalMatrix::from_fn(self.rows, rhs.cols, |i, j| {
            (0..self.cols).fold(Rational::zero(), |acc, k| acc + &self[(i, k)] * &rhs[(k, j)])
        })
    }
}

impl fmt::Debug for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.rows).map(|i| {
                self.row(i).iter().map(format_rational).collect::<Vec<_>>()
            }))
            .finish()
    }
}

/// Integer ring with the one operation Bareiss elimination needs.
trait ExactRing: Clone + PartialEq {
    fn is_nil(&self) -> bool;
    fn nil() -> Self;
    fn unit() -> Self;
    /// `(a*b - c*d) / divisor`, or `None` on overflow.
    fn cross_div(a: &Self, b: &Self, c: &Self, d: &Self, divisor: &Self) -> Option<Self>;
}

impl ExactRing for i128 {
    fn is_nil(&self) -> bool {
        *self == 0
    }

    fn nil() -> Self {
        0
    }

    fn unit() -> Self {
        1
    }

    fn cross_div(a: &i128, b: &i128, c: &i128, d: &i128, divisor: &i128) -> Option<i128> {
        let lhs = a.checked_mul(*b)?;
        let rhs = c.checked_mul(*d)?;
        Some(lhs.checked_sub(rhs)? / divisor)
    }
}

impl ExactRing for BigInt {
    fn is_nil(&self) -> bool {
        Zero::is_zero(self)
    }

    fn nil() -> Self {
        Zero::zero()
    }

    fn unit() -> Self {
        One::one()
    }

    fn cross_div(a: &BigInt, b: &BigInt, c: &BigInt, d: &BigInt, divisor: &BigInt) -> Option<BigInt> {
        Some((a * b - c * d) / divisor)
    }
}

fn bareiss_rank<T: ExactRing>(mut m: Vec<Vec<T>>) -> Option<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut prev = T::unit();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_nil()) else {
            continue;
        };
        m.swap(p, r);
        for i in r + 1..rows {
            for j in c + 1..cols {
                m[i][j] = T::cross_div(&m[r][c], &m[i][j], &m[i][c], &m[r][j], &prev)?;
            }
            m[i][c] = T::nil();
        }
        prev = m[r][c].clone();
        r += 1;
    }
    Some(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimal_and_fraction_forms() {
        assert_eq!(parse_rational("3"), Some(int(3)));
        assert_eq!(parse_rational("0.25"), Some(ratio(1, 4)));
        assert_eq!(parse_rational(".5"), Some(ratio(1, 2)));
        assert_eq!(parse_rational("6/4"), Some(ratio(3, 2)));
        assert_eq!(parse_rational("-2"), Some(int(-2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational("."), None);
        assert_eq!(parse_rational("1e3"), None);
    }

    #[test]
    fn formats_canonically() {
        assert_eq!(format_rational(&ratio(6, 4)), "3/2");
        assert_eq!(format_rational(&int(-7)), "-7");
    }

    #[test]
    fn rank_of_trivial_matrices() {
        assert_eq!(RationalMatrix::zeros(3, 4).rank(), 0);
        assert_eq!(RationalMatrix::identity(4).rank(), 4);
        assert_eq!(RationalMatrix::zeros(0, 0).rank(), 0);
    }

    #[test]
    fn rank_with_fractions_and_dependent_rows() {
        let m = RationalMatrix::from_fn(3, 3, |i, j| ratio((i + 1) as i64 * (j as i64 + 1), 3));
        assert_eq!(m.rank(), 1);
        let n = RationalMatrix::from_i64_rows(&[vec![-1, 2, -1], vec![1, -2, 1], vec![1, 0, -1]]);
        assert_eq!(n.rank(), 2);
    }

    #[test]
    fn rank_falls_back_to_big_integers() {
        let big = 1i64 << 62;
        let m = RationalMatrix::from_i64_rows(&[
            vec![big, big - 1, 3],
            vec![big - 3, big, 5],
            vec![7, big - 11, big],
        ]);
        assert_eq!(m.rank(), m.rref().pivots.len());
        assert_eq!(m.rank(), 3);
    }

    #[test]
    fn kernel_vectors_are_annihilated() {
        let m = RationalMatrix::from_i64_rows(&[vec![1, 2, 3, 4], vec![2, 4, 6, 8], vec![0, 1, 1, 0]]);
        let basis = m.kernel_basis();
        assert_eq!(basis.len(), 2);
        for x in basis {
            assert!(m.mul_vec(&x).iter().all(Zero::is_zero));
        }
    }

    #[test]
    fn solve_sets_free_variables_to_zero_and_detects_inconsistency() {
        let a = RationalMatrix::from_i64_rows(&[vec![1, 1], vec![2, 2]]);
        assert_eq!(a.solve_vec(&[int(3), int(6)]), Some(vec![int(3), int(0)]));
        assert_eq!(a.solve_vec(&[int(3), int(5)]), None);
    }

    #[test]
    fn ln_handles_huge_values() {
        let huge = Rational::from_integer(num::pow(BigInt::from(10), 400));
        assert!((ln_abs(&huge) - 400.0 * 10f64.ln()).abs() < 1e-9);
        assert!((ln_abs(&ratio(1, 8)) + 8f64.ln()).abs() < 1e-15);
    }
}
