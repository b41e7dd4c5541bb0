//! Dense complex LU with partial pivoting.

use crate::error::{Error, Result};
use crate::scalar::{czero, Real, C};

#[derive(Clone, Debug)]
pub struct Matrix<T> {
    pub n: usize,
    pub data: Vec<C<T>>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![czero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C::new(T::one(), T::zero());
        }
        m
    }

    pub fn mul_vec(&self, v: &[C<T>]) -> Vec<C<T>> {
        (0..self.n)
            .map(|i| {
                let row = &self.data[i * self.n..(i + 1) * self.n];
                row.iter().zip(v).fold(czero(), |a, (&x, &y)| a + x * y)
            })
            .collect()
    }

    pub fn norm_one(&self) -> T {
        (0..self.n)
            .map(|j| (0..self.n).fold(T::zero(), |a, i| a + self[(i, j)].norm()))
            .fold(T::zero(), T::max)
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = C<T>;
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.n + j]
    }
}

pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    anorm: T,
}

impl<T: Real> Lu<T> {
    pub fn factor(mut a: Matrix<T>) -> Result<Self> {
        let n = a.n;
        let anorm = a.norm_one();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = a[(k, k)].norm();
            for i in k + 1..n {
                let v = a[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::numerical("singular matrix in main equation"));
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / pivot;
                a[(i, k)] = f;
                if f != czero() {
                    for j in k + 1..n {
                        let v = a[(k, j)];
                        a[(i, j)] -= f * v;
                    }
                }
            }
        }
        Ok(Self { lu: a, perm, anorm })
    }

    pub fn solve(&self, b: &[C<T>]) -> Vec<C<T>> {
        let n = self.lu.n;
        let mut x: Vec<C<T>> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// 1-norm condition number through the explicit inverse (systems here are small).
    pub fn condition(&self) -> T {
        let n = self.lu.n;
        let mut inv_norm = T::zero();
        let mut e = vec![czero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = czero());
            e[j] = C::new(T::one(), T::zero());
            let col = self.solve(&e);
            inv_norm = inv_norm.max(col.iter().fold(T::zero(), |a, v| a + v.norm()));
        }
        inv_norm * self.anorm
    }
}
