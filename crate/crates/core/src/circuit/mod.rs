//! Linear-optical networks: the unbalanced Mach-Zehnder and the heralded CNOT.

pub mod constants;
mod gates;
mod mzi;
mod network;
mod ns;

pub use constants::{constants_json, constants_sha256, CONSTANTS_VERSION};
pub use gates::{
    build_heralded_cnot, HeraldPattern, HeraldedCnot, C0, C1, CNOT_LAYOUT, H0, H1, H2, H3,
    HERALD_MODES, LOGICAL_MODES, T0, T1,
};
pub use mzi::{build_mzi_before_recombination, build_unbalanced_mzi, Mzi, MziConfig, ARM_LONG, ARM_SHORT, MIN_WINDOW};
pub use network::{compile, hadamard, real_rotation, Element, InterferometerNetwork, ModeLabel};
pub use ns::{
    build_ns_gate, ns_matrix, solve_ns_angles, transfer_amplitudes, NsGate, NS_CONTRACT_TOL,
    NS_PHOTON_ANCILLA, NS_SIGNAL, NS_VACUUM_ANCILLA,
};
