use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::constants::{NS_ANGLES, NS_HERALD_PROBABILITY};
use super::network::{compile, real_rotation, Element, InterferometerNetwork};
use crate::error::{Error, Result};
use crate::fock::{apply_mode_unitary, project, ModeConstraint, MultimodeFockState};
use crate::optimize::{nelder_mead, NelderMeadOptions};

/// Signal mode of the three-mode gate.
pub const NS_SIGNAL: usize = 0;
/// Ancilla prepared with one photon; heralded on one photon.
pub const NS_PHOTON_ANCILLA: usize = 1;
/// Ancilla prepared empty; heralded on zero photons.
pub const NS_VACUUM_ANCILLA: usize = 2;

/// Tolerance on the gate contract.
pub const NS_CONTRACT_TOL: f64 = 1e-9;

/// Real orthogonal `R01(a) R02(b) R12(c)`.
pub fn ns_matrix(angles: &[f64; 3]) -> Matrix3<f64> {
    let rot = |i: usize, j: usize, a: f64| {
        let mut r = Matrix3::identity();
        let (s, c) = a.sin_cos();
        r[(i, i)] = c;
        r[(j, j)] = c;
        r[(i, j)] = -s;
        r[(j, i)] = s;
        r
    };
    rot(0, 1, angles[0]) * rot(0, 2, angles[1]) * rot(1, 2, angles[2])
}

/// Heralded amplitudes `t_n` on `|n⟩_signal` for `n = 0, 1, 2`.
pub fn transfer_amplitudes(u: &Matrix3<f64>) -> [f64; 3] {
    let t0 = u[(1, 1)];
    let t1 = u[(0, 0)] * u[(1, 1)] + u[(1, 0)] * u[(0, 1)];
    let t2 = u[(0, 0)].powi(2) * u[(1, 1)] + 2.0 * u[(0, 0)] * u[(0, 1)] * u[(1, 0)];
    [t0, t1, t2]
}

fn residual(angles: &[f64; 3]) -> Vector3<f64> {
    let [t0, t1, t2] = transfer_amplitudes(&ns_matrix(angles));
    Vector3::new(t0 - t1, t1 + t2, t0 * t0 - NS_HERALD_PROBABILITY)
}

/// Solve the sign-flip contract from `start`: simplex search, then Newton polish.
pub fn solve_ns_angles(start: [f64; 3]) -> Result<[f64; 3]> {
    let coarse = nelder_mead(
        |x| residual(&[x[0], x[1], x[2]]).norm_squared(),
        &start,
        &NelderMeadOptions {
            initial_step: 0.05,
            max_evaluations: 5000,
            f_tol: 1e-24,
            x_tol: 1e-12,
        },
    );
    let mut x = [coarse.x[0], coarse.x[1], coarse.x[2]];
    for _ in 0..50 {
        let r = residual(&x);
        if r.amax() < 1e-15 {
            break;
        }
        let h = 1e-7;
        let mut jac = Matrix3::zeros();
        for k in 0..3 {
            let mut plus = x;
            let mut minus = x;
            plus[k] += h;
            minus[k] -= h;
            jac.set_column(k, &((residual(&plus) - residual(&minus)) / (2.0 * h)));
        }
        let Some(step) = jac.lu().solve(&r) else {
            break;
        };
        for k in 0..3 {
            x[k] -= step[k];
        }
    }
    let worst = residual(&x).amax();
    if worst > NS_CONTRACT_TOL {
        return Err(Error::ContractViolation(format!(
            "sign-flip gate solve stalled at residual {worst:.3e}"
        )));
    }
    Ok(x.map(|a| (a + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI))
}

/// A solved nonlinear-sign gate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NsGate {
    pub angles: [f64; 3],
    pub network: InterferometerNetwork,
    /// Heralded amplitudes on `|0⟩, |1⟩, |2⟩`.
    pub transfer: [f64; 3],
}

impl NsGate {
    pub fn matrix(&self) -> Matrix3<f64> {
        ns_matrix(&self.angles)
    }

    pub fn herald() -> [ModeConstraint; 3] {
        [
            ModeConstraint::Any,
            ModeConstraint::Exactly(1),
            ModeConstraint::Exactly(0),
        ]
    }

    /// Elements of the gate acting on `modes = (signal, photon ancilla, vacuum ancilla)`.
    pub fn elements_on(&self, modes: [usize; 3]) -> Vec<Element> {
        ns_elements(&self.angles, modes)
    }
}

fn ns_elements(angles: &[f64; 3], modes: [usize; 3]) -> Vec<Element> {
    let mut out = real_rotation(modes[1], modes[2], angles[2]);
    out.extend(real_rotation(modes[0], modes[2], angles[1]));
    out.extend(real_rotation(modes[0], modes[1], angles[0]));
    out
}

/// Build the gate from the frozen angles after re-solving and verifying the contract.
pub fn build_ns_gate() -> Result<NsGate> {
    let angles = solve_ns_angles(NS_ANGLES)?;
    let mut network = InterferometerNetwork::spatial(3);
    network.extend(ns_elements(&angles, [NS_SIGNAL, NS_PHOTON_ANCILLA, NS_VACUUM_ANCILLA]))?;
    let transfer = verify_contract(&network)?;
    Ok(NsGate {
        angles,
        network,
        transfer,
    })
}

/// Brute-force Fock check of the heralded action on `|0⟩, |1⟩, |2⟩`.
fn verify_contract(network: &InterferometerNetwork) -> Result<[f64; 3]> {
    let u = compile(network)?;
    let mut t = [Complex64::new(0.0, 0.0); 3];
    for (n, slot) in t.iter_mut().enumerate() {
        let input = MultimodeFockState::basis(&[n as u8, 1, 0], 2)?;
        let out = apply_mode_unitary(&input, &u)?;
        let branch = project(&out, &NsGate::herald())?;
        *slot = branch.amplitude(&[n as u8]);
        let leaked = branch.norm_sqr() - slot.norm_sqr();
        if leaked > NS_CONTRACT_TOL {
            return Err(Error::ContractViolation(format!(
                "heralded branch of |{n}⟩ leaks {leaked:.3e} out of |{n}⟩"
            )));
        }
    }
    let checks = [
        ((t[0] - t[1]).norm(), "t0 = t1"),
        ((t[1] + t[2]).norm(), "t1 = -t2"),
        ((t[0].norm_sqr() - NS_HERALD_PROBABILITY).abs(), "herald probability"),
        (t[0].im.abs(), "real transfer"),
    ];
    for (err, what) in checks {
        if err > NS_CONTRACT_TOL {
            return Err(Error::ContractViolation(format!("{what} off by {err:.3e}")));
        }
    }
    Ok(t.map(|c| c.re))
}
