//! Multimode bosonic Fock states and passive linear optics acting on them.

mod ops;
mod state;
mod unitary;

pub use ops::{
    apply_mode_unitary, apply_mode_unitary_mixed, apply_mode_unitary_with, apply_uniform_loss,
    apply_uniform_loss_mixed, normally_ordered_g2, normally_ordered_g2_mixed,
    normally_ordered_set_g2, normally_ordered_set_g2_batch, photon_count, postselect, postselect_mixed, project, Lifting,
    ModeConstraint, PostSelection,
};
pub use state::{MixedState, MultimodeFockState, Occupation, NORM_TOL};
pub use unitary::{
    givens_factorize, unitarity_deviation, GivensFactorization, ModeUnitary, TwoModeFactor,
    UNITARY_TOL,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Default photons-per-mode cutoff for input states.
pub const PHOTON_CUTOFF_DEFAULT: u8 = 2;

/// Haar-random unitary from the QR decomposition of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(dimension: usize, rng: &mut R) -> ModeUnitary {
    let z = DMatrix::from_fn(dimension, dimension, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..dimension {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for row in 0..dimension {
            q[(row, k)] *= phase;
        }
    }
    ModeUnitary::new(q).expect("QR factor is unitary")
}
