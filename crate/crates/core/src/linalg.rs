//! Dense complex matrices sized for small multi-qubit registers.
//!
//! Everything in the crate runs on `CMatrix`, a row-major `Vec<Complex64>`
//! wrapper. Registers stay below ~13 qubits, so dense storage and O(n^3)
//! products are the right trade-off; the hot paths in [`crate::qstate`]
//! avoid full products by acting on target-qubit index groups instead.

use num_complex::Complex64;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Build from nested rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    /// Build from real-valued nested rows.
    pub fn from_real(rows: &[Vec<f64>]) -> Self {
        let converted: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|row| row.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&converted)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.add_to(i, j, a * other.get(k, j));
                }
            }
        }
        out
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
        out
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a -= *b;
        }
        out
    }

    pub fn scale(&self, factor: Complex64) -> CMatrix {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= factor;
        }
        out
    }

    pub fn scale_real(&self, factor: f64) -> CMatrix {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    /// Kronecker product with `self` on the high-order index block.
    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(
                            i * other.rows + k,
                            j * other.cols + l,
                            a * other.get(k, l),
                        );
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        assert_eq!(self.rows, self.cols, "trace of a non-square matrix");
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| v.iter().enumerate().map(|(j, x)| self.get(i, j) * x).sum())
            .collect()
    }

    /// Largest elementwise absolute difference to `other`.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max deviation of `self^dagger * self` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let product = self.dagger().mul(self);
        product.max_abs_diff(&CMatrix::identity(self.rows))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.rows == self.cols && self.unitarity_deviation() <= tol
    }

    /// Max deviation from Hermitian symmetry.
    pub fn hermiticity_deviation(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        dev
    }

    /// Eigenvalues of a Hermitian matrix by the cyclic Jacobi method,
    /// ascending. Intended for validation on small matrices; cost grows
    /// as O(dim^3) per sweep.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 0 {
            return Vec::new();
        }
        let mut a = self.clone();
        // Symmetrize once so roundoff skew cannot stall the rotations.
        for i in 0..n {
            for j in 0..n {
                let h = (a.get(i, j) + a.get(j, i).conj()) * Complex64::new(0.5, 0.0);
                a.set(i, j, h);
            }
        }
        let scale = self.max_abs().max(1.0);
        for _sweep in 0..100 {
            let mut off: f64 = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a.get(p, q).norm_sqr();
                }
            }
            if off.sqrt() <= 1e-14 * scale * n as f64 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq.norm() <= 1e-300 {
                        continue;
                    }
                    let app = a.get(p, p).re;
                    let aqq = a.get(q, q).re;
                    // Complex Jacobi rotation: factor out the phase of a_pq,
                    // then rotate the remaining real 2x2 block.
                    let phase = apq / Complex64::new(apq.norm(), 0.0);
                    let theta = 0.5 * (2.0 * apq.norm()).atan2(app - aqq);
                    let (c, s) = (theta.cos(), theta.sin());
                    let sp = phase * Complex64::new(s, 0.0);
                    // Columns p and q: A <- A * J
                    for i in 0..n {
                        let aip = a.get(i, p);
                        let aiq = a.get(i, q);
                        a.set(i, p, aip * c + aiq * sp.conj());
                        a.set(i, q, aiq * c - aip * sp);
                    }
                    // Rows p and q: A <- J^dagger * A
                    for j in 0..n {
                        let apj = a.get(p, j);
                        let aqj = a.get(q, j);
                        a.set(p, j, apj * c + aqj * sp);
                        a.set(q, j, aqj * c - apj * sp.conj());
                    }
                }
            }
        }
        let mut eigs: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
        eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eigs
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigenvalues()
            .first()
            .copied()
            .unwrap_or(0.0)
    }
}

/// Convenience constructor for real scalars.
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Convenience constructor for rectangular complex values.
pub fn ci(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mul_against_hand_product() {
        let a = CMatrix::from_rows(&[
            vec![ci(1.0, 1.0), c(2.0)],
            vec![c(0.0), ci(0.0, -1.0)],
        ]);
        let b = CMatrix::from_rows(&[vec![c(3.0), c(0.0)], vec![c(1.0), ci(0.0, 2.0)]]);
        let p = a.mul(&b);
        assert!((p.get(0, 0) - ci(5.0, 3.0)).norm() < 1e-15);
        assert!((p.get(0, 1) - ci(0.0, 4.0)).norm() < 1e-15);
        assert!((p.get(1, 0) - ci(0.0, -1.0)).norm() < 1e-15);
        assert!((p.get(1, 1) - c(2.0)).norm() < 1e-15);
    }

    #[test]
    fn kron_block_structure() {
        let a = CMatrix::from_real(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let b = CMatrix::from_real(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let k = a.kron(&b);
        assert_eq!(k.rows(), 4);
        assert!((k.get(0, 1) - c(1.0)).norm() < 1e-15);
        assert!((k.get(1, 0) - c(1.0)).norm() < 1e-15);
        assert!((k.get(2, 3) - c(2.0)).norm() < 1e-15);
        assert!((k.get(3, 2) - c(2.0)).norm() < 1e-15);
        assert!(k.get(0, 0).norm() < 1e-15);
    }

    #[test]
    fn dagger_is_involution() {
        let a = CMatrix::from_rows(&[
            vec![ci(1.0, 2.0), ci(3.0, -4.0)],
            vec![ci(-5.0, 6.0), ci(7.0, 8.0)],
        ]);
        assert_eq!(a.dagger().dagger(), a);
        assert!((a.dagger().get(0, 1) - ci(-5.0, -6.0)).norm() < 1e-15);
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        // Pauli X has eigenvalues -1, +1.
        let x = CMatrix::from_real(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let eig = x.hermitian_eigenvalues();
        assert!((eig[0] + 1.0).abs() < 1e-12);
        assert!((eig[1] - 1.0).abs() < 1e-12);

        // Hermitian matrix with a complex off-diagonal: [[2, i], [-i, 2]]
        // has eigenvalues 1 and 3.
        let h = CMatrix::from_rows(&[vec![c(2.0), ci(0.0, 1.0)], vec![ci(0.0, -1.0), c(2.0)]]);
        let eig = h.hermitian_eigenvalues();
        assert!((eig[0] - 1.0).abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_recovers_projector_spectrum() {
        // Rank-one projector on a 4-dim space: spectrum {0, 0, 0, 1}.
        let v = [c(0.5), c(0.5), ci(0.0, 0.5), ci(0.5, 0.0)];
        let proj = CMatrix::from_fn(4, 4, |i, j| v[i] * v[j].conj());
        let eig = proj.hermitian_eigenvalues();
        for e in &eig[..3] {
            assert!(e.abs() < 1e-12);
        }
        assert!((eig[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unitarity_check() {
        let h = CMatrix::from_real(&[
            vec![1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()],
            vec![1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()],
        ]);
        assert!(h.is_unitary(1e-12));
        let bad = CMatrix::from_real(&[vec![1.0, 0.0], vec![0.0, 0.5]]);
        assert!(!bad.is_unitary(1e-10));
    }
}
