//! Fixed gate matrices and Pauli-string enumeration.
//!
//! Qubit ordering is big-endian throughout the crate: qubit 0 is the most
//! significant bit of a basis-state index, so `cnot()` has its control on
//! qubit 0. The `T` gate follows the `exp(i pi/8 Z)` convention used by the
//! protocol-level benchmarks; `phase(theta)` provides the `diag(1, e^{i
//! theta})` form needed by the Toffoli decomposition.

use num_complex::Complex64;

use crate::linalg::{c, ci, CMatrix};

pub fn identity(n_qubits: usize) -> CMatrix {
    CMatrix::identity(1 << n_qubits)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_real(&[vec![0.0, 1.0], vec![1.0, 0.0]])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_rows(&[vec![c(0.0), ci(0.0, -1.0)], vec![ci(0.0, 1.0), c(0.0)]])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_real(&[vec![1.0, 0.0], vec![0.0, -1.0]])
}

pub fn hadamard() -> CMatrix {
    let s = 1.0 / 2f64.sqrt();
    CMatrix::from_real(&[vec![s, s], vec![s, -s]])
}

/// `T = exp(i pi/8 Z) = diag(e^{i pi/8}, e^{-i pi/8})`.
pub fn t() -> CMatrix {
    let phase = Complex64::from_polar(1.0, std::f64::consts::PI / 8.0);
    CMatrix::from_rows(&[vec![phase, c(0.0)], vec![c(0.0), phase.conj()]])
}

/// Inverse of [`t`].
pub fn t_dagger() -> CMatrix {
    t().dagger()
}

/// `diag(1, e^{i theta})`.
pub fn phase(theta: f64) -> CMatrix {
    CMatrix::from_rows(&[
        vec![c(1.0), c(0.0)],
        vec![c(0.0), Complex64::from_polar(1.0, theta)],
    ])
}

/// Z-axis rotation `exp(-i theta Z / 2)`.
pub fn rz(theta: f64) -> CMatrix {
    CMatrix::from_rows(&[
        vec![Complex64::from_polar(1.0, -theta / 2.0), c(0.0)],
        vec![c(0.0), Complex64::from_polar(1.0, theta / 2.0)],
    ])
}

/// Y-axis rotation `exp(-i theta Y / 2)`.
pub fn ry(theta: f64) -> CMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    CMatrix::from_real(&[vec![co, -s], vec![s, co]])
}

/// Controlled-NOT with control on qubit 0, target on qubit 1.
pub fn cnot() -> CMatrix {
    CMatrix::from_real(&[
        vec![1.0, 0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
        vec![0.0, 0.0, 1.0, 0.0],
    ])
}

/// SWAP of two qubits.
pub fn swap() -> CMatrix {
    CMatrix::from_real(&[
        vec![1.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
    ])
}

/// Toffoli with controls on qubits 0, 1 and target on qubit 2.
pub fn toffoli() -> CMatrix {
    let mut m = CMatrix::zeros(8, 8);
    for i in 0..8usize {
        let j = if i >> 1 == 3 { i ^ 1 } else { i };
        m.set(j, i, c(1.0));
    }
    m
}

/// Fredkin (controlled-SWAP) with control on qubit 0, swapping qubits 1, 2.
pub fn fredkin() -> CMatrix {
    let mut m = CMatrix::zeros(8, 8);
    for i in 0..8usize {
        let j = if i & 4 != 0 {
            // Exchange the two low bits.
            (i & 4) | ((i & 1) << 1) | ((i >> 1) & 1)
        } else {
            i
        };
        m.set(j, i, c(1.0));
    }
    m
}

/// Single-qubit Pauli matrix by index in the fixed I, X, Y, Z order.
pub fn pauli(index: usize) -> CMatrix {
    match index {
        0 => identity(1),
        1 => pauli_x(),
        2 => pauli_y(),
        3 => pauli_z(),
        _ => panic!("pauli index out of range"),
    }
}

/// Label for a Pauli-string index in the [`pauli_strings`] ordering.
pub fn pauli_label(n_qubits: usize, index: usize) -> String {
    let mut s = String::with_capacity(n_qubits);
    for q in 0..n_qubits {
        let digit = (index >> (2 * (n_qubits - 1 - q))) & 3;
        s.push(['I', 'X', 'Y', 'Z'][digit]);
    }
    s
}

/// All 4^n Pauli strings on `n_qubits`, ordered lexicographically in
/// I, X, Y, Z per qubit; index 0 is the identity string.
pub fn pauli_strings(n_qubits: usize) -> Vec<CMatrix> {
    let count = 1usize << (2 * n_qubits);
    (0..count)
        .map(|idx| {
            let mut m = CMatrix::identity(1);
            for q in 0..n_qubits {
                let digit = (idx >> (2 * (n_qubits - 1 - q))) & 3;
                m = m.kron(&pauli(digit));
            }
            m
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_matches_z_rotation_form() {
        let expected = CMatrix::from_rows(&[
            vec![Complex64::from_polar(1.0, std::f64::consts::PI / 8.0), c(0.0)],
            vec![c(0.0), Complex64::from_polar(1.0, -std::f64::consts::PI / 8.0)],
        ]);
        assert!(t().max_abs_diff(&expected) < 1e-15);
        assert!(t().mul(&t_dagger()).max_abs_diff(&identity(1)) < 1e-15);
    }

    #[test]
    fn cnot_permutes_basis_states() {
        let m = cnot();
        // |10> -> |11>, |11> -> |10>, others fixed.
        assert!((m.get(3, 2) - c(1.0)).norm() < 1e-15);
        assert!((m.get(2, 3) - c(1.0)).norm() < 1e-15);
        assert!((m.get(0, 0) - c(1.0)).norm() < 1e-15);
        assert!((m.get(1, 1) - c(1.0)).norm() < 1e-15);
        assert!(m.is_unitary(1e-12));
    }

    #[test]
    fn fredkin_swaps_when_control_set() {
        let f = fredkin();
        // |101> (control 1, pair 01) -> |110>.
        assert!((f.get(0b110, 0b101) - c(1.0)).norm() < 1e-15);
        assert!((f.get(0b101, 0b110) - c(1.0)).norm() < 1e-15);
        // Control clear: fixed points.
        for i in 0..4 {
            assert!((f.get(i, i) - c(1.0)).norm() < 1e-15);
        }
        assert!(f.is_unitary(1e-12));
    }

    #[test]
    fn toffoli_flips_target_only_on_double_control() {
        let m = toffoli();
        assert!((m.get(0b111, 0b110) - c(1.0)).norm() < 1e-15);
        assert!((m.get(0b110, 0b111) - c(1.0)).norm() < 1e-15);
        assert!((m.get(0b010, 0b010) - c(1.0)).norm() < 1e-15);
        assert!(m.is_unitary(1e-12));
    }

    #[test]
    fn pauli_strings_are_orthogonal_under_trace() {
        let strings = pauli_strings(2);
        assert_eq!(strings.len(), 16);
        for (i, a) in strings.iter().enumerate() {
            for (j, b) in strings.iter().enumerate() {
                let overlap = a.dagger().mul(b).trace();
                let expected = if i == j { 4.0 } else { 0.0 };
                assert!((overlap - c(expected)).norm() < 1e-12, "i={i} j={j}");
            }
        }
        assert_eq!(pauli_label(2, 0), "II");
        assert_eq!(pauli_label(2, 7), "XZ");
    }
}
