//! Path/time entangled two-photon state ahead of the second beamsplitter.
//!
//! Qubits are the paths taken by the photons detected in two consecutive time bins:
//! `U` is the short arm, `L` the long one. Basis order is `|UU⟩, |UL⟩, |LU⟩, |LL⟩`
//! with the early photon first.

use std::collections::HashMap;

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_mzi_before_recombination, compile, MziConfig, ARM_LONG, ARM_SHORT, MIN_WINDOW};
use crate::error::{Error, Result};
use crate::fock::apply_mode_unitary;
use crate::hom::pulse_train_state;
use crate::source::SourcePulseSpec;

pub const UU: usize = 0;
pub const UL: usize = 1;
pub const LU: usize = 2;
pub const LL: usize = 3;

const PURE_NORM_TOL: f64 = 1e-12;
const MIXED_TRACE_TOL: f64 = 1e-9;
/// Eigenvalues of `ρ` below this are treated as zero.
const RANK_FLOOR: f64 = 1e-13;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `σ_y ⊗ σ_y`, real in this basis.
fn spin_flip() -> Matrix4<Complex64> {
    let mut m = Matrix4::zeros();
    m[(0, 3)] = c(-1.0, 0.0);
    m[(1, 2)] = c(1.0, 0.0);
    m[(2, 1)] = c(1.0, 0.0);
    m[(3, 0)] = c(-1.0, 0.0);
    m
}

fn kron(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Matrix4<Complex64> {
    Matrix4::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
}

fn max_abs<I: IntoIterator<Item = Complex64>>(entries: I) -> f64 {
    entries.into_iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_local(u: &Matrix2<Complex64>) -> Result<()> {
    let deviation = max_abs((u.adjoint() * u - Matrix2::identity()).iter().copied());
    if deviation > 1e-10 {
        return Err(Error::NotUnitary { deviation });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitPureState {
    amplitudes: [Complex64; 4],
}

impl TwoQubitPureState {
    pub fn new(amplitudes: [Complex64; 4]) -> Result<Self> {
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > PURE_NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    /// `2 |a d - b c|`.
    pub fn concurrence(&self) -> f64 {
        let [a, b, c, d] = self.amplitudes;
        (2.0 * (a * d - b * c).norm()).min(1.0)
    }

    pub fn density_matrix(&self) -> TwoQubitDensityMatrix {
        let v = Vector4::from(self.amplitudes);
        TwoQubitDensityMatrix { rho: v * v.adjoint() }
    }

    /// `(early ⊗ late) |ψ⟩`.
    pub fn apply_local(&self, early: &Matrix2<Complex64>, late: &Matrix2<Complex64>) -> Result<Self> {
        check_local(early)?;
        check_local(late)?;
        let v = kron(early, late) * Vector4::from(self.amplitudes);
        Self::new([v[0], v[1], v[2], v[3]])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitDensityMatrix {
    rho: Matrix4<Complex64>,
}

impl TwoQubitDensityMatrix {
    /// Requires unit trace and hermiticity to within `1e-9`.
    pub fn new(rho: Matrix4<Complex64>) -> Result<Self> {
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > MIXED_TRACE_TOL || trace.im.abs() > MIXED_TRACE_TOL {
            return Err(Error::NotNormalized { norm_sqr: trace.re });
        }
        let skew = max_abs((rho - rho.adjoint()).iter().copied());
        if skew > MIXED_TRACE_TOL {
            return Err(Error::InvalidParameter {
                name: "rho",
                value: skew,
                reason: "density matrix must be Hermitian",
            });
        }
        Ok(Self { rho })
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.rho
    }

    pub fn population(&self, index: usize) -> f64 {
        self.rho[(index, index)].re
    }

    /// Scales every off-diagonal element by `s`.
    pub fn with_coherence(&self, s: f64) -> Result<Self> {
        crate::error::check_unit_interval("s", s)?;
        let rho = Matrix4::from_fn(|r, col| if r == col { self.rho[(r, col)] } else { self.rho[(r, col)] * s });
        Ok(Self { rho })
    }

    pub fn apply_local(&self, early: &Matrix2<Complex64>, late: &Matrix2<Complex64>) -> Result<Self> {
        check_local(early)?;
        check_local(late)?;
        let u = kron(early, late);
        Self::new(u * self.rho * u.adjoint())
    }

    /// Wootters concurrence. The `λ_i` are the singular values of `√ρ (σ_y⊗σ_y) √ρ*`,
    /// which stays accurate for nearly pure states.
    pub fn concurrence(&self) -> f64 {
        let eigen = SymmetricEigen::new(self.rho);
        // rounding noise in a null space would otherwise enter as its square root
        let roots = eigen
            .eigenvalues
            .map(|l| Complex64::from(if l > RANK_FLOOR { l.sqrt() } else { 0.0 }));
        let sqrt_rho = eigen.eigenvectors * Matrix4::from_diagonal(&roots) * eigen.eigenvectors.adjoint();
        let m = sqrt_rho * spin_flip() * sqrt_rho.conjugate();
        let mut lambda: Vec<f64> = m.singular_values().iter().copied().collect();
        lambda.sort_by(|a, b| b.total_cmp(a));
        (lambda[0] - lambda[1] - lambda[2] - lambda[3]).clamp(0.0, 1.0)
    }
}

impl From<&TwoQubitPureState> for TwoQubitDensityMatrix {
    fn from(state: &TwoQubitPureState) -> Self {
        state.density_matrix()
    }
}

/// Anything whose entanglement can be quantified by concurrence.
pub trait Concurrence {
    fn concurrence(&self) -> f64;
}

impl Concurrence for TwoQubitPureState {
    fn concurrence(&self) -> f64 {
        TwoQubitPureState::concurrence(self)
    }
}

impl Concurrence for TwoQubitDensityMatrix {
    fn concurrence(&self) -> f64 {
        TwoQubitDensityMatrix::concurrence(self)
    }
}

pub fn concurrence<S: Concurrence>(state: &S) -> f64 {
    state.concurrence()
}

/// Relative amplitudes of the three branches that a single photon per pulse can produce.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchWeights {
    pub lu: f64,
    pub uu: f64,
    pub ll: f64,
}

impl Default for BranchWeights {
    fn default() -> Self {
        Self { lu: 1.0, uu: 1.0, ll: 1.0 }
    }
}

/// `N (w_uu |UU⟩ + w_lu i e^{iφ} |LU⟩ - w_ll e^{2iφ} |LL⟩)`; `|UL⟩` would need two photons
/// from one pulse and never appears.
pub fn postselected_state(phi: f64, weights: Option<BranchWeights>) -> Result<TwoQubitPureState> {
    let w = weights.unwrap_or_default();
    for (name, value) in [("lu", w.lu), ("uu", w.uu), ("ll", w.ll)] {
        if !value.is_finite() {
            return Err(Error::InvalidParameter {
                name,
                value,
                reason: "branch weight must be finite",
            });
        }
    }
    let norm = (w.lu * w.lu + w.uu * w.uu + w.ll * w.ll).sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroDenominator("branch weights"));
    }
    let e = Complex64::from_polar(1.0, phi);
    let mut amplitudes = [Complex64::new(0.0, 0.0); 4];
    amplitudes[UU] = c(w.uu / norm, 0.0);
    amplitudes[LU] = c(0.0, w.lu / norm) * e;
    amplitudes[LL] = -(w.ll / norm) * e * e;
    TwoQubitPureState::new(amplitudes)
}

/// Default post-selected state with its cross terms scaled by the `|k|=1` oscillation
/// amplitude `s2`. Its concurrence is [`concurrence_from_s`].
pub fn matched_state(phi: f64, s2: f64) -> Result<TwoQubitDensityMatrix> {
    postselected_state(phi, None)?.density_matrix().with_coherence(s2)
}

/// `(2/3) s2`.
pub fn concurrence_from_s(s2: f64) -> f64 {
    2.0 / 3.0 * s2
}

/// Path state of the photons found in bins `(1, 2)` ahead of the second beamsplitter,
/// conditioned on exactly one photon per bin. All other modes and the internal labels
/// of the detected photons are traced out.
pub fn simulated_postselected_state(source: &SourcePulseSpec, phi: f64) -> Result<TwoQubitDensityMatrix> {
    source.validate()?;
    let mut config = MziConfig::balanced(MIN_WINDOW, phi, false);
    if source.m_overlap < 1.0 {
        config.internal_modes = MIN_WINDOW as u16 + 1;
    }
    let mzi = build_mzi_before_recombination(config)?;
    let u = compile(&mzi.network)?;
    let out = apply_mode_unitary(&pulse_train_state(&mzi, source)?, &u)?;

    let (early, late) = (1u16, 2u16);
    let labels = config.internal_modes * config.polarizations();
    let mut branches: HashMap<Vec<u8>, [Complex64; 4]> = HashMap::new();
    for (occupation, &amplitude) in out.iter() {
        let mut env = occupation.clone();
        let mut index = 0;
        let mut ok = true;
        for bin in [early, late] {
            let mut found = None;
            let mut count = 0;
            for arm in [ARM_SHORT, ARM_LONG] {
                for label in 0..labels {
                    let n = occupation[mzi.mode(arm, bin, label)];
                    if n > 0 {
                        count += n;
                        found = Some((arm, label));
                    }
                }
            }
            match (count, found) {
                (1, Some((arm, label))) => {
                    // keep the internal label in the environment, drop the path
                    env[mzi.mode(arm, bin, label)] = 0;
                    env[mzi.mode(ARM_SHORT, bin, label)] = 1;
                    index = 2 * index + usize::from(arm == ARM_LONG);
                }
                _ => ok = false,
            }
        }
        if ok {
            branches.entry(env).or_insert([Complex64::new(0.0, 0.0); 4])[index] += amplitude;
        }
    }
    let mut rho = Matrix4::zeros();
    for v in branches.values() {
        let v = Vector4::from(*v);
        rho += v * v.adjoint();
    }
    let trace = rho.trace().re;
    if !(trace > 0.0) {
        return Err(Error::ZeroDenominator("post-selection probability"));
    }
    TwoQubitDensityMatrix::new(rho / c(trace, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn local_unitary(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Matrix2<Complex64> {
        let (s, co) = (gamma / 2.0).sin_cos();
        let g = Complex64::from_polar(1.0, delta);
        Matrix2::new(
            g * Complex64::from_polar(co, -(alpha + beta) / 2.0),
            -g * Complex64::from_polar(s, -(alpha - beta) / 2.0),
            g * Complex64::from_polar(s, (alpha - beta) / 2.0),
            g * Complex64::from_polar(co, (alpha + beta) / 2.0),
        )
    }

    #[test]
    fn default_state_at_zero_phase() {
        let psi = postselected_state(0.0, None).unwrap();
        let r = 1.0 / 3f64.sqrt();
        let expected = [c(r, 0.0), c(0.0, 0.0), c(0.0, r), c(-r, 0.0)];
        for (a, b) in psi.amplitudes().iter().zip(&expected) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn single_branch_is_product() {
        let w = BranchWeights { lu: 0.0, uu: 1.0, ll: 0.0 };
        let psi = postselected_state(0.4, Some(w)).unwrap();
        assert_eq!(psi.amplitude(UU), c(1.0, 0.0));
        assert_eq!(psi.concurrence(), 0.0);
        assert!(postselected_state(0.0, Some(BranchWeights { lu: 0.0, uu: 0.0, ll: 0.0 })).is_err());
    }

    #[test]
    fn reference_states() {
        let r = 1.0 / 2f64.sqrt();
        let bell = TwoQubitPureState::new([c(r, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(r, 0.0)]).unwrap();
        assert!((bell.concurrence() - 1.0).abs() < 1e-15);
        assert!((bell.density_matrix().concurrence() - 1.0).abs() < 1e-12);
        let product = TwoQubitPureState::new([c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.5), c(0.0, 0.5)]).unwrap();
        assert!(product.concurrence() < 1e-15);
        assert!(product.density_matrix().concurrence() < 1e-7);
        assert!(TwoQubitPureState::new([c(1.0, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn werner_state_threshold() {
        // p |Φ+⟩⟨Φ+| + (1-p) I/4 has concurrence max(0, (3p-1)/2)
        let r = 1.0 / 2f64.sqrt();
        let bell = TwoQubitPureState::new([c(r, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(r, 0.0)]).unwrap();
        for p in [0.0, 0.2, 1.0 / 3.0, 0.5, 0.8, 1.0] {
            let rho = bell.density_matrix().matrix() * c(p, 0.0) + Matrix4::identity() * c((1.0 - p) / 4.0, 0.0);
            let got = TwoQubitDensityMatrix::new(rho).unwrap().concurrence();
            let expected = ((3.0 * p - 1.0) / 2.0).max(0.0);
            assert!((got - expected).abs() < 1e-9, "p {p}: {got}");
        }
    }

    #[test]
    fn mixed_input_must_have_unit_trace() {
        let rho = Matrix4::identity() * c(0.3, 0.0);
        assert!(matches!(TwoQubitDensityMatrix::new(rho), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn two_thirds_for_every_phase() {
        for i in 0..16 {
            let phi = 2.0 * PI * i as f64 / 16.0;
            let psi = postselected_state(phi, None).unwrap();
            assert_eq!(psi.amplitude(UL), c(0.0, 0.0));
            assert!((psi.concurrence() - 2.0 / 3.0).abs() < 1e-12);
            assert!((psi.density_matrix().concurrence() - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn concurrence_from_s_examples() {
        assert!((concurrence_from_s(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(concurrence_from_s(0.0), 0.0);
        let theta: f64 = 1e-4;
        let c1 = (theta / 2.0).cos().powi(2);
        assert!((concurrence_from_s(c1) - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn matched_state_tracks_oscillation_amplitude() {
        for s in [0.0, 0.25, 0.5, 0.9, 1.0] {
            for phi in [0.0, 1.1, 2.5] {
                let got = matched_state(phi, s).unwrap().concurrence();
                assert!((got - concurrence_from_s(s)).abs() < 1e-9, "s {s} phi {phi}: {got}");
            }
        }
    }

    #[test]
    fn simulated_state_approaches_ideal_for_weak_pulses() {
        let source = SourcePulseSpec::new(1e-3, 0.0);
        for phi in [0.0, 0.9] {
            let rho = simulated_postselected_state(&source, phi).unwrap();
            let ideal = postselected_state(phi, None).unwrap().density_matrix();
            assert!(max_abs((rho.matrix() - ideal.matrix()).iter().copied()) < 1e-6, "phi {phi}");
        }
    }

    #[test]
    fn simulated_state_closed_form() {
        // tracing the neighbouring pulses gives C = 2 c1 / (1 + 2 c1) at unit overlap
        for theta in [0.2 * PI, 0.5 * PI, 0.8 * PI] {
            let source = SourcePulseSpec::new(theta, 0.3);
            let c1 = source.p0();
            let rho = simulated_postselected_state(&source, 0.4).unwrap();
            assert!(rho.population(UL) < 1e-15);
            let expected = 2.0 * c1 / (1.0 + 2.0 * c1);
            assert!((rho.concurrence() - expected).abs() < 1e-9, "theta {theta}");
        }
    }

    #[test]
    fn two_photon_pulses_populate_the_missing_branch() {
        let source = SourcePulseSpec::new(0.5 * PI, 0.0).with_two_photon(0.05);
        let rho = simulated_postselected_state(&source, 0.0).unwrap();
        assert!(rho.population(UL) > 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn phase_independent(phi in -10.0..10.0f64) {
            let psi = postselected_state(phi, None).unwrap();
            prop_assert!((psi.concurrence() - 2.0 / 3.0).abs() < 1e-12);
        }

        #[test]
        fn local_unitary_invariance(
            a in proptest::array::uniform4(-PI..PI),
            b in proptest::array::uniform4(-PI..PI),
            w in proptest::array::uniform3(0.0..1.0f64),
            s in 0.0..1.0f64,
            phi in -PI..PI,
        ) {
            let weights = BranchWeights { lu: w[0], uu: w[1] + 0.1, ll: w[2] };
            let ue = local_unitary(a[0], a[1], a[2], a[3]);
            let ul = local_unitary(b[0], b[1], b[2], b[3]);
            let psi = postselected_state(phi, Some(weights)).unwrap();
            let moved = psi.apply_local(&ue, &ul).unwrap();
            prop_assert!((psi.concurrence() - moved.concurrence()).abs() < 1e-9);
            let rho = psi.density_matrix().with_coherence(s).unwrap();
            let rho_moved = rho.apply_local(&ue, &ul).unwrap();
            prop_assert!((rho.concurrence() - rho_moved.concurrence()).abs() < 1e-9);
        }

        #[test]
        fn pure_and_mixed_routes_agree(w in proptest::array::uniform3(0.0..1.0f64), phi in -PI..PI) {
            let weights = BranchWeights { lu: w[0], uu: w[1], ll: w[2] + 0.1 };
            let psi = postselected_state(phi, Some(weights)).unwrap();
            prop_assert!((psi.concurrence() - psi.density_matrix().concurrence()).abs() < 1e-9);
        }
    }
}
