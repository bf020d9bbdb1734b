//! Dense complex matrices and LU factorization with partial pivoting.

use num_complex::Complex64 as C64;

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// `P A = L U` stored in place; unit lower triangle implicit.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<C64>,
    perm: Vec<usize>,
    singular: bool,
}

impl Lu {
    pub fn new(a: &CMatrix) -> Self {
        assert_eq!(a.rows, a.cols, "LU needs a square matrix");
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut singular = false;
        for k in 0..n {
            let (mut piv, mut best) = (k, lu[k * n + k].norm_sqr());
            for i in k + 1..n {
                let v = lu[i * n + k].norm_sqr();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 {
                singular = true;
                continue;
            }
            if piv != k {
                for j in 0..n {
                    lu.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let inv = 1.0 / lu[k * n + k];
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n + k + 1..k * n + n];
            for row in tail.chunks_exact_mut(n) {
                let f = row[k] * inv;
                row[k] = f;
                if f.re == 0.0 && f.im == 0.0 {
                    continue;
                }
                for (x, &p) in row[k + 1..].iter_mut().zip(pivot_row) {
                    *x -= f * p;
                }
            }
        }
        Self { n, lu, perm, singular }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: C64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: C64 = row.iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }

    /// Solves `Aᴴ x = b`.
    pub fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        // Aᴴ = Uᴴ Lᴴ P, so solve Uᴴ y = b, Lᴴ w = y, x = Pᵀ w.
        let mut y = b.to_vec();
        for i in 0..n {
            let d = self.lu[i * n + i].conj();
            y[i] /= d;
            let yi = y[i];
            for j in i + 1..n {
                y[j] -= self.lu[i * n + j].conj() * yi;
            }
        }
        for i in (0..n).rev() {
            let yi = y[i];
            for j in 0..i {
                y[j] -= self.lu[i * n + j].conj() * yi;
            }
        }
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(x: &mut [C64]) {
    let n = norm2(x);
    if n > 0.0 {
        for v in x.iter_mut() {
            *v /= n;
        }
    }
}

/// Smallest singular value and right singular vector by inverse iteration
/// on `AᴴA`, reusing the LU factors of `A`.
pub fn smallest_singular(a: &CMatrix, lu: &Lu, start: &[C64], iterations: usize) -> (f64, Vec<C64>) {
    let mut v = start.to_vec();
    normalize(&mut v);
    for _ in 0..iterations {
        let w = lu.solve_adjoint(&v);
        let mut x = lu.solve(&w);
        normalize(&mut x);
        v = x;
    }
    let av = a.mul_vec(&v);
    (norm2(&av), v)
}

/// Orthonormal basis of the right singular subspace of the `starts.len()`
/// smallest singular values, by block inverse iteration on `AᴴA` with
/// Gram–Schmidt after every sweep.
pub fn smallest_singular_subspace(lu: &Lu, starts: &[Vec<C64>], iterations: usize) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = starts.to_vec();
    orthonormalize(&mut basis);
    for _ in 0..iterations {
        basis = basis.iter().map(|v| lu.solve(&lu.solve_adjoint(v))).collect();
        orthonormalize(&mut basis);
    }
    basis
}

/// Modified Gram–Schmidt in place.
pub fn orthonormalize(basis: &mut [Vec<C64>]) {
    for i in 0..basis.len() {
        let (done, rest) = basis.split_at_mut(i);
        let v = &mut rest[0];
        for q in done.iter() {
            let proj: C64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(q) {
                *x -= proj * y;
            }
        }
        normalize(v);
    }
}
