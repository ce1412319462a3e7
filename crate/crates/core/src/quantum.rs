//! Dense complex linear algebra over tensor-product registers.
//!
//! Registers are described by their local dimensions (`[4, 4, 4]` for three
//! ions, `[2; n]` for qubits). Amplitudes are stored with site 0 as the
//! fastest-varying index; callers address sites by index and never need to
//! know that.
//!
//! Local operators passed to [`embed_local`] are written in the conventional
//! matrix layout: the first listed site is the most significant digit of the
//! local basis index, so `CNOT` on `[control, target]` has its usual form.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Level labels for a four-level ion.
pub mod level {
    pub const GROUND: usize = 0;
    pub const EXCITED: usize = 1;
    pub const D_MINUS: usize = 2;
    pub const D_PLUS: usize = 3;
}

/// A site together with a local level, used for named basis-state access.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiteIndex {
    pub site: usize,
    pub level: usize,
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(dims.len());
    let mut acc = 1;
    for &d in dims {
        out.push(acc);
        acc *= d;
    }
    out
}

/// Flat index of the basis state with the given per-site levels.
pub fn basis_index(dims: &[usize], levels: &[usize]) -> Result<usize> {
    if dims.len() != levels.len() {
        return Err(Error::DimensionMismatch {
            expected: dims.len(),
            found: levels.len(),
        });
    }
    let mut idx = 0;
    for (s, (&l, stride)) in levels.iter().zip(strides(dims)).enumerate() {
        if l >= dims[s] {
            return Err(Error::InvalidLevel { site: s, level: l });
        }
        idx += l * stride;
    }
    Ok(idx)
}

/// Per-site levels of a flat basis index.
pub fn levels_of(dims: &[usize], mut idx: usize) -> Vec<usize> {
    dims.iter()
        .map(|&d| {
            let l = idx % d;
            idx /= d;
            l
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    dims: Vec<usize>,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != amps.len() {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: amps.len(),
            });
        }
        Ok(Self { dims, amps })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self {
            dims,
            amps: vec![ZERO; n],
        }
    }

    /// Computational basis state with the given per-site levels.
    pub fn basis(dims: Vec<usize>, levels: &[usize]) -> Result<Self> {
        let idx = basis_index(&dims, levels)?;
        let mut s = Self::zeros(dims);
        s.amps[idx] = ONE;
        Ok(s)
    }

    /// Product state from per-site local vectors.
    pub fn product(locals: &[Vec<C64>]) -> Self {
        let dims: Vec<usize> = locals.iter().map(Vec::len).collect();
        let mut amps = vec![ONE];
        // site 0 varies fastest, so build from the last site inward
        for local in locals.iter().rev() {
            let mut next = Vec::with_capacity(amps.len() * local.len());
            for a in &amps {
                for l in local {
                    next.push(a * l);
                }
            }
            amps = next;
        }
        Self { dims, amps }
    }

    /// `|+>` on every ion of a register with local dimension `dim`
    /// (levels 0 and 1 populated).
    pub fn plus_all(n_sites: usize, dim: usize) -> Self {
        let mut local = vec![ZERO; dim];
        local[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        local[1] = local[0];
        Self::product(&vec![local; n_sites])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<C64> {
        self.amps
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitude(&self, levels: &[usize]) -> Result<C64> {
        Ok(self.amps[basis_index(&self.dims, levels)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amps {
                *a /= n;
            }
        }
    }

    /// Euclidean distance between amplitude vectors.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        check_dims(&self.dims, &other.dims)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Population of `level` on `site`.
    pub fn site_population(&self, site: usize, level: usize) -> f64 {
        let st = strides(&self.dims);
        let d = self.dims[site];
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (i / st[site]) % d == level)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }
}

fn check_dims(a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::RegisterMismatch {
            left: a.to_vec(),
            right: b.to_vec(),
        });
    }
    Ok(())
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<C64> {
    check_dims(&a.dims, &b.dims)?;
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim: usize,
    entries: Vec<C64>,
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op.entries[i * dim + i] = ONE;
        }
        op
    }

    /// Row-major construction.
    pub fn from_rows(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn from_real(dim: usize, entries: &[f64]) -> Result<Self> {
        Self::from_rows(dim, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let mut op = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            op.entries[i * diag.len() + i] = *d;
        }
        op
    }

    /// `|i><j|` on a `dim`-dimensional space.
    pub fn outer(dim: usize, i: usize, j: usize) -> Self {
        let mut op = Self::zeros(dim);
        op.entries[i * dim + j] = ONE;
        op
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: C64) {
        self.entries[row * self.dim + col] = v;
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.entries[c * n + r] = self.entries[r * n + c].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.entries[r * n + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..n {
                    out.entries[r * n + c] += a * other.entries[k * n + c];
                }
            }
        }
        Ok(out)
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint()).map(|d| d.max_abs()).unwrap_or(f64::INFINITY)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() < tol
    }

    /// Kronecker product, `self` taking the more significant digit.
    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let d = n * m;
        let mut out = Self::zeros(d);
        for r1 in 0..n {
            for c1 in 0..n {
                let a = self.entries[r1 * n + c1];
                if a == ZERO {
                    continue;
                }
                for r2 in 0..m {
                    for c2 in 0..m {
                        out.entries[(r1 * m + r2) * d + c1 * m + c2] = a * other.entries[r2 * m + c2];
                    }
                }
            }
        }
        out
    }

    /// Matrix exponential by scaling and squaring with a Taylor core.
    pub fn expm(&self) -> Self {
        let norm1 = (0..self.dim)
            .map(|c| (0..self.dim).map(|r| self.get(r, c).norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let squarings = if norm1 > 0.5 {
            (norm1 / 0.5).log2().ceil() as u32
        } else {
            0
        };
        let a = self.scale(C64::new(0.5f64.powi(squarings as i32), 0.0));
        let mut result = Self::identity(self.dim);
        let mut term = Self::identity(self.dim);
        for k in 1..=20 {
            term = term.matmul(&a).expect("square").scale(C64::new(1.0 / k as f64, 0.0));
            result = result.add(&term).expect("square");
        }
        for _ in 0..squarings {
            result = result.matmul(&result).expect("square");
        }
        result
    }
}

/// Matrix-vector product.
pub fn apply(op: &Operator, s: &StateVector) -> Result<StateVector> {
    if op.dim != s.amps.len() {
        return Err(Error::DimensionMismatch {
            expected: op.dim,
            found: s.amps.len(),
        });
    }
    let n = op.dim;
    let amps = (0..n)
        .map(|r| {
            op.entries[r * n..(r + 1) * n]
                .iter()
                .zip(&s.amps)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    Ok(StateVector {
        dims: s.dims.clone(),
        amps,
    })
}

/// Lift a local operator on `sites` to the full register `dims`.
pub fn embed_local(op: &Operator, sites: &[usize], dims: &[usize]) -> Result<Operator> {
    for (k, &s) in sites.iter().enumerate() {
        if s >= dims.len() {
            return Err(Error::SiteOutOfRange {
                site: s,
                n_sites: dims.len(),
            });
        }
        if sites[..k].contains(&s) {
            return Err(Error::DuplicateSite(s));
        }
    }
    let local_dim: usize = sites.iter().map(|&s| dims[s]).product();
    if local_dim != op.dim {
        return Err(Error::DimensionMismatch {
            expected: local_dim,
            found: op.dim,
        });
    }
    let total: usize = dims.iter().product();
    let st = strides(dims);
    // first listed site is the most significant local digit
    let local_index = |idx: usize| -> usize {
        sites
            .iter()
            .fold(0, |acc, &s| acc * dims[s] + (idx / st[s]) % dims[s])
    };
    let rest_index = |idx: usize| -> usize {
        sites
            .iter()
            .fold(idx, |acc, &s| acc - ((idx / st[s]) % dims[s]) * st[s])
    };
    let mut out = Operator::zeros(total);
    for r in 0..total {
        let (lr, rr) = (local_index(r), rest_index(r));
        for c in 0..total {
            if rest_index(c) != rr {
                continue;
            }
            out.entries[r * total + c] = op.entries[lr * op.dim + local_index(c)];
        }
    }
    Ok(out)
}

/// Standard single- and two-qubit matrices.
pub mod gates {
    use super::*;

    pub fn x() -> Operator {
        Operator::from_real(2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    pub fn y() -> Operator {
        Operator::from_rows(2, vec![ZERO, -I, I, ZERO]).unwrap()
    }

    pub fn z() -> Operator {
        Operator::from_real(2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
    }

    pub fn h() -> Operator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Operator::from_real(2, &[s, s, s, -s]).unwrap()
    }

    pub fn cnot() -> Operator {
        let mut op = Operator::zeros(4);
        for (r, c) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            op.set(r, c, ONE);
        }
        op
    }

    pub fn swap() -> Operator {
        let mut op = Operator::zeros(4);
        for (r, c) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            op.set(r, c, ONE);
        }
        op
    }
}
