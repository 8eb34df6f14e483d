//! Frozen circuit constants. Bump [`CONSTANTS_VERSION`] whenever a value changes.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const CONSTANTS_VERSION: &str = "1";

/// `(3 - √2) / 7`: heralding probability of one sign-flip gate.
pub const NS_HERALD_PROBABILITY: f64 = 0.2265409196609864;

/// Rotation angles `(a, b, c)` of `R01(a) R02(b) R12(c)` solving the sign-flip contract.
pub const NS_ANGLES: [f64; 3] = [
    -2.010_962_418_585_387,
    -0.236_655_484_924_213,
    -2.679_711_546_471_252_4,
];

#[derive(Serialize)]
struct Snapshot {
    version: &'static str,
    ns_angles: [f64; 3],
    ns_herald_probability: f64,
    cnot_layout: &'static str,
}

/// Canonical JSON of all frozen constants.
pub fn constants_json() -> String {
    serde_json::to_string(&Snapshot {
        version: CONSTANTS_VERSION,
        ns_angles: NS_ANGLES,
        ns_herald_probability: NS_HERALD_PROBABILITY,
        cnot_layout: super::gates::CNOT_LAYOUT,
    })
    .expect("snapshot serializes")
}

/// SHA-256 of the constants in git blob framing (`blob <len>\0<content>`).
pub fn constants_sha256() -> String {
    let body = constants_json();
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", body.len()).as_bytes());
    hasher.update(body.as_bytes());
    hex::encode(hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn herald_probability_matches_closed_form() {
        assert!((NS_HERALD_PROBABILITY - (3.0 - 2f64.sqrt()) / 7.0).abs() < 1e-16);
    }

    #[test]
    fn hash_is_stable_and_hex() {
        let a = constants_sha256();
        assert_eq!(a, constants_sha256());
        assert_eq!(a.len(), 64);
        assert!(a.chars().all(|c| c.is_ascii_hexdigit()));
    }
}
