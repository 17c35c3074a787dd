//! Seeded random states, unitaries, and Pauli channels.
//!
//! Used by the randomized test suites and the optimizer restarts. Sampling
//! is deterministic under a fixed `ChaCha8Rng` seed, independent of
//! platform.

use num_complex::Complex64;
use rand::Rng;

use crate::channels::KrausChannel;
use crate::linalg::CMatrix;
use crate::qstate::PureState;

/// Standard normal via Box-Muller, to keep the dependency set small.
fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn gaussian_complex(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(gaussian(rng), gaussian(rng))
}

/// Haar-like random unitary of arbitrary dimension via Gram-Schmidt on a
/// complex Gaussian matrix.
pub fn random_unitary_dim(dim: usize, rng: &mut impl Rng) -> CMatrix {
    let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    while columns.len() < dim {
        let mut v: Vec<Complex64> = (0..dim).map(|_| gaussian_complex(rng)).collect();
        for prev in &columns {
            let overlap: Complex64 = prev.iter().zip(v.iter()).map(|(p, x)| p.conj() * x).sum();
            for (x, p) in v.iter_mut().zip(prev.iter()) {
                *x -= overlap * p;
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for x in v.iter_mut() {
                *x /= norm;
            }
            columns.push(v);
        }
    }
    CMatrix::from_fn(dim, dim, |i, j| columns[j][i])
}

/// Haar-like random unitary on `n_qubits`.
pub fn random_unitary(n_qubits: usize, rng: &mut impl Rng) -> CMatrix {
    random_unitary_dim(1 << n_qubits, rng)
}

/// Random pure state with Gaussian amplitudes.
pub fn random_pure_state(n_qubits: usize, rng: &mut impl Rng) -> PureState {
    let dim = 1usize << n_qubits;
    let amps: Vec<Complex64> = (0..dim).map(|_| gaussian_complex(rng)).collect();
    PureState::normalized(amps).expect("gaussian vector is nonzero")
}

/// Random Pauli channel on `n_qubits` with a no-error weight drawn uniformly
/// from `[min_p_ne, max_p_ne)` and the error weight split uniformly over the
/// non-identity Pauli strings.
pub fn random_pauli_channel(
    n_qubits: usize,
    min_p_ne: f64,
    max_p_ne: f64,
    rng: &mut impl Rng,
) -> KrausChannel {
    assert!((0.0..=1.0).contains(&min_p_ne) && min_p_ne <= max_p_ne && max_p_ne <= 1.0);
    let p_ne = rng.gen_range(min_p_ne..max_p_ne);
    let error_terms = (1usize << (2 * n_qubits)) - 1;
    // Uniform point on the simplex via normalized exponentials.
    let mut raw: Vec<f64> = (0..error_terms).map(|_| -rng.gen::<f64>().ln()).collect();
    let total: f64 = raw.iter().sum();
    for w in raw.iter_mut() {
        *w *= (1.0 - p_ne) / total;
    }
    let mut weights = vec![p_ne];
    weights.extend(raw);
    KrausChannel::pauli_channel(n_qubits, &weights).expect("weights sum to one")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_unitaries_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let u = random_unitary(2, &mut rng);
            assert!(u.is_unitary(1e-10));
        }
        let v = random_unitary_dim(3, &mut rng);
        assert!(v.is_unitary(1e-10));
    }

    #[test]
    fn random_states_are_normalized_and_seeded() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let s1 = random_pure_state(2, &mut a);
        let s2 = random_pure_state(2, &mut b);
        assert!((s1.norm() - 1.0).abs() < 1e-12);
        for i in 0..4 {
            assert_eq!(s1.amplitude(i), s2.amplitude(i));
        }
    }

    #[test]
    fn random_pauli_channels_respect_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let ch = random_pauli_channel(1, 0.5, 1.0, &mut rng);
            assert!(ch.no_error_probability() >= 0.5);
            assert!(ch.validate().is_ok());
        }
    }
}
