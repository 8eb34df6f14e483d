use std::collections::BTreeMap;

use rustc_hash::FxHashMap;

use num_complex::Complex64;

use super::state::{total_photons, MixedState, MultimodeFockState, Occupation};
use super::unitary::{givens_factorize, ModeUnitary};
use crate::error::{check_unit_interval, Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// How the single-particle unitary is lifted to Fock space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Lifting {
    /// Expand each creation operator through the columns of `U`.
    #[default]
    Direct,
    /// Factor `U` into adjacent two-mode rotations and a diagonal, then apply each factor.
    Decomposed,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn occupation_factorial(occupation: &[u8]) -> f64 {
    occupation.iter().map(|&n| factorial(u32::from(n))).product()
}

/// Fock-space action of `u` on `state`.
pub fn apply_mode_unitary(
    state: &MultimodeFockState,
    u: &ModeUnitary,
) -> Result<MultimodeFockState> {
    apply_mode_unitary_with(state, u, Lifting::Direct)
}

pub fn apply_mode_unitary_with(
    state: &MultimodeFockState,
    u: &ModeUnitary,
    lifting: Lifting,
) -> Result<MultimodeFockState> {
    if u.dimension() != state.mode_count() {
        return Err(Error::DimensionMismatch {
            expected: state.mode_count(),
            actual: u.dimension(),
        });
    }
    let deviation = u.unitarity_deviation();
    if deviation > super::unitary::UNITARY_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    let cutoff = output_cutoff(state);
    let amplitudes = match lifting {
        Lifting::Direct => lift_direct(state, u),
        Lifting::Decomposed => lift_decomposed(state, u),
    };
    Ok(MultimodeFockState::from_map(
        state.mode_count(),
        cutoff,
        amplitudes,
        state.is_normalized(),
    ))
}

/// Photons may bunch into any single mode, so the cutoff grows to the largest sector present.
fn output_cutoff(state: &MultimodeFockState) -> u8 {
    let max_total = state.max_total_photons().min(u32::from(u8::MAX)) as u8;
    state.cutoff().max(max_total)
}

fn lift_direct(state: &MultimodeFockState, u: &ModeUnitary) -> BTreeMap<Occupation, Complex64> {
    let columns = u.columns();
    let n_modes = state.mode_count();
    // Monomials are kept as sorted lists of output modes, one entry per photon.
    let mut merged: FxHashMap<Vec<u16>, Complex64> = FxHashMap::default();
    for (occupation, &amplitude) in state.amplitudes() {
        let mut poly: FxHashMap<Vec<u16>, Complex64> = FxHashMap::default();
        poly.insert(
            Vec::new(),
            amplitude / occupation_factorial(occupation).sqrt(),
        );
        for (mode, &count) in occupation.iter().enumerate() {
            for _ in 0..count {
                let mut next: FxHashMap<Vec<u16>, Complex64> =
                    FxHashMap::with_capacity_and_hasher(poly.len() * columns[mode].len(), Default::default());
                for (mono, coeff) in &poly {
                    for &(row, entry) in &columns[mode] {
                        let row = row as u16;
                        let mut key = Vec::with_capacity(mono.len() + 1);
                        let at = mono.partition_point(|&m| m <= row);
                        key.extend_from_slice(&mono[..at]);
                        key.push(row);
                        key.extend_from_slice(&mono[at..]);
                        *next.entry(key).or_insert(ZERO) += coeff * entry;
                    }
                }
                poly = next;
            }
        }
        for (mono, coeff) in poly {
            *merged.entry(mono).or_insert(ZERO) += coeff;
        }
    }
    let mut merged: Vec<_> = merged.into_iter().collect();
    merged.sort_unstable_by(|(x, _), (y, _)| occupation_order(x, y));
    merged
        .into_iter()
        .map(|(mono, coeff)| {
            let mut occupation = vec![0u8; n_modes];
            for m in mono {
                occupation[m as usize] += 1;
            }
            let scale = occupation_factorial(&occupation).sqrt();
            (occupation, coeff * scale)
        })
        .collect()
}

/// Orders sorted photon lists the way their occupation vectors compare, so the final
/// map is built from presorted keys.
fn occupation_order(x: &[u16], y: &[u16]) -> std::cmp::Ordering {
    for (a, b) in x.iter().zip(y) {
        if a != b {
            return b.cmp(a);
        }
    }
    x.len().cmp(&y.len())
}

fn lift_decomposed(
    state: &MultimodeFockState,
    u: &ModeUnitary,
) -> BTreeMap<Occupation, Complex64> {
    let factorization = givens_factorize(u);
    let mut current: BTreeMap<Occupation, Complex64> = state
        .amplitudes()
        .iter()
        .map(|(k, &c)| {
            let phase: Complex64 = k
                .iter()
                .zip(&factorization.phases)
                .map(|(&n, d)| d.powu(u32::from(n)))
                .product();
            (k.clone(), c * phase)
        })
        .collect();
    for factor in factorization.factors.iter().rev() {
        current = apply_two_mode(&current, factor.modes, &factor.block);
    }
    current
}

/// Binomial expansion of a two-mode rotation acting on `|p, q⟩` of modes `(a, b)`.
fn apply_two_mode(
    input: &BTreeMap<Occupation, Complex64>,
    (a, b): (usize, usize),
    g: &[[Complex64; 2]; 2],
) -> BTreeMap<Occupation, Complex64> {
    let mut out: BTreeMap<Occupation, Complex64> = BTreeMap::new();
    for (occupation, &amplitude) in input {
        let p = u32::from(occupation[a]);
        let q = u32::from(occupation[b]);
        if p == 0 && q == 0 {
            *out.entry(occupation.clone()).or_insert(ZERO) += amplitude;
            continue;
        }
        let prefactor = amplitude / (factorial(p) * factorial(q)).sqrt();
        for k in 0..=p {
            for l in 0..=q {
                let coeff = g[0][0].powu(k)
                    * g[1][0].powu(p - k)
                    * g[0][1].powu(l)
                    * g[1][1].powu(q - l)
                    * (binomial(p, k) * binomial(q, l));
                if coeff.norm_sqr() == 0.0 {
                    continue;
                }
                let na = k + l;
                let nb = p + q - na;
                let mut key = occupation.clone();
                key[a] = na as u8;
                key[b] = nb as u8;
                let scale = (factorial(na) * factorial(nb)).sqrt();
                *out.entry(key).or_insert(ZERO) += prefactor * coeff * scale;
            }
        }
    }
    out
}

/// Apply `u` to every component of a mixture.
pub fn apply_mode_unitary_mixed(state: &MixedState, u: &ModeUnitary) -> Result<MixedState> {
    let components = state
        .components()
        .iter()
        .map(|(w, s)| apply_mode_unitary(s, u).map(|s| (*w, s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MixedState::from_weighted_unchecked(components))
}

/// Bosonic loss on one mode: each photon survives independently with probability `eta`.
pub fn apply_uniform_loss(
    state: &MultimodeFockState,
    mode: usize,
    eta: f64,
) -> Result<MixedState> {
    check_unit_interval("eta", eta)?;
    state.check_mode(mode)?;
    let max_n = state.amplitudes().keys().map(|k| k[mode]).max().unwrap_or(0);
    let mut branches = Vec::new();
    for lost in 0..=u32::from(max_n) {
        let mut amplitudes = BTreeMap::new();
        for (occupation, &c) in state.amplitudes() {
            let n = u32::from(occupation[mode]);
            if n < lost {
                continue;
            }
            let kraus = (binomial(n, lost) * eta.powi((n - lost) as i32) * (1.0 - eta).powi(lost as i32)).sqrt();
            let mut key = occupation.clone();
            key[mode] = (n - lost) as u8;
            amplitudes.insert(key, c * kraus);
        }
        let branch =
            MultimodeFockState::from_map(state.mode_count(), state.cutoff(), amplitudes, false);
        let weight = branch.norm_sqr();
        if weight > 0.0 {
            branches.push((weight, branch.normalize()?));
        }
    }
    let total: f64 = branches.iter().map(|(w, _)| w).sum();
    Ok(MixedState::from_weighted_unchecked(
        branches.into_iter().map(|(w, s)| (w / total, s)).collect(),
    ))
}

/// Loss on one mode of every component of a mixture.
pub fn apply_uniform_loss_mixed(state: &MixedState, mode: usize, eta: f64) -> Result<MixedState> {
    let mut components = Vec::new();
    for (w, s) in state.components() {
        for (wb, b) in apply_uniform_loss(s, mode, eta)?.into_components() {
            components.push((w * wb, b));
        }
    }
    Ok(MixedState::from_weighted_unchecked(components))
}

/// Per-mode detection constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConstraint {
    Exactly(u8),
    Any,
}

#[derive(Clone, Debug)]
pub struct PostSelection {
    pub probability: f64,
    /// Renormalized state on the unconstrained modes; `None` when nothing matched.
    pub conditional: Option<MixedState>,
}

/// Unnormalized projection onto `pattern`; constrained modes are removed.
pub fn project(
    state: &MultimodeFockState,
    pattern: &[ModeConstraint],
) -> Result<MultimodeFockState> {
    if pattern.len() != state.mode_count() {
        return Err(Error::DimensionMismatch {
            expected: state.mode_count(),
            actual: pattern.len(),
        });
    }
    let kept: Vec<usize> = pattern
        .iter()
        .enumerate()
        .filter(|(_, c)| matches!(c, ModeConstraint::Any))
        .map(|(i, _)| i)
        .collect();
    let mut amplitudes = BTreeMap::new();
    for (occupation, &c) in state.amplitudes() {
        let matches = occupation.iter().zip(pattern).all(|(&n, con)| match con {
            ModeConstraint::Exactly(m) => n == *m,
            ModeConstraint::Any => true,
        });
        if matches {
            let key: Occupation = kept.iter().map(|&i| occupation[i]).collect();
            *amplitudes.entry(key).or_insert(ZERO) += c;
        }
    }
    Ok(MultimodeFockState::from_map(
        kept.len(),
        state.cutoff(),
        amplitudes,
        false,
    ))
}

pub fn postselect(state: &MultimodeFockState, pattern: &[ModeConstraint]) -> Result<PostSelection> {
    postselect_mixed(&MixedState::from(state.clone()), pattern)
}

pub fn postselect_mixed(state: &MixedState, pattern: &[ModeConstraint]) -> Result<PostSelection> {
    let mut branches = Vec::new();
    let mut probability = 0.0;
    for (w, s) in state.components() {
        let projected = project(s, pattern)?;
        let p = w * projected.norm_sqr();
        if p > 0.0 {
            probability += p;
            branches.push((p, projected.normalize()?));
        }
    }
    if probability == 0.0 {
        return Ok(PostSelection {
            probability: 0.0,
            conditional: None,
        });
    }
    let conditional = MixedState::from_weighted_unchecked(
        branches
            .into_iter()
            .map(|(p, s)| (p / probability, s))
            .collect(),
    );
    Ok(PostSelection {
        probability,
        conditional: Some(conditional),
    })
}

/// `⟨a†_i a†_j a_j a_i⟩`.
pub fn normally_ordered_g2(state: &MultimodeFockState, i: usize, j: usize) -> Result<f64> {
    state.check_mode(i)?;
    state.check_mode(j)?;
    Ok(state
        .amplitudes()
        .iter()
        .map(|(k, c)| {
            let ni = f64::from(k[i]);
            let nj = f64::from(k[j]);
            let pairs = if i == j { ni * (ni - 1.0) } else { ni * nj };
            c.norm_sqr() * pairs
        })
        .sum())
}

/// `⟨:N_A N_B:⟩` for mode sets `A`, `B` with `N_X = Σ_{m∈X} n_m`.
///
/// Equals the sum of [`normally_ordered_g2`] over all `(i, j) ∈ A × B`.
pub fn normally_ordered_set_g2(
    state: &MultimodeFockState,
    set_a: &[usize],
    set_b: &[usize],
) -> Result<f64> {
    for &m in set_a.iter().chain(set_b) {
        state.check_mode(m)?;
    }
    let overlap: Vec<usize> = set_a.iter().copied().filter(|m| set_b.contains(m)).collect();
    let count = |k: &Occupation, set: &[usize]| set.iter().map(|&m| f64::from(k[m])).sum::<f64>();
    Ok(state
        .amplitudes()
        .iter()
        .map(|(k, c)| c.norm_sqr() * (count(k, set_a) * count(k, set_b) - count(k, &overlap)))
        .sum())
}

/// [`normally_ordered_set_g2`] for many `(A, B)` pairs in one pass over the state.
pub fn normally_ordered_set_g2_batch(
    state: &MultimodeFockState,
    pairs: &[(Vec<usize>, Vec<usize>)],
) -> Result<Vec<f64>> {
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut intern = |set: Vec<usize>| -> usize {
        match sets.iter().position(|s| *s == set) {
            Some(i) => i,
            None => {
                sets.push(set);
                sets.len() - 1
            }
        }
    };
    let mut plan = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        for &m in a.iter().chain(b) {
            state.check_mode(m)?;
        }
        let overlap: Vec<usize> = a.iter().copied().filter(|m| b.contains(m)).collect();
        plan.push((intern(a.clone()), intern(b.clone()), intern(overlap)));
    }
    let mut totals = vec![0.0; pairs.len()];
    let mut counts = vec![0.0; sets.len()];
    for (k, c) in state.amplitudes() {
        let p = c.norm_sqr();
        for (n, set) in counts.iter_mut().zip(&sets) {
            *n = set.iter().map(|&m| f64::from(k[m])).sum();
        }
        for (total, &(a, b, o)) in totals.iter_mut().zip(&plan) {
            *total += p * (counts[a] * counts[b] - counts[o]);
        }
    }
    Ok(totals)
}

pub fn normally_ordered_g2_mixed(state: &MixedState, i: usize, j: usize) -> Result<f64> {
    state
        .components()
        .iter()
        .map(|(w, s)| normally_ordered_g2(s, i, j).map(|g| w * g))
        .sum()
}

/// Total photon number carried by one occupation vector.
pub fn photon_count(occupation: &[u8]) -> u32 {
    total_photons(occupation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{random_unitary, PHOTON_CUTOFF_DEFAULT};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn assert_state_eq(a: &MultimodeFockState, b: &MultimodeFockState, tol: f64) {
        let keys: std::collections::BTreeSet<_> =
            a.iter().map(|(k, _)| k.clone()).chain(b.iter().map(|(k, _)| k.clone())).collect();
        for k in keys {
            let d = (a.amplitude(&k) - b.amplitude(&k)).norm();
            assert!(d < tol, "amplitude mismatch at {k:?}: {d}");
        }
    }

    #[test]
    fn identity_leaves_state() {
        let psi = MultimodeFockState::new(
            2,
            2,
            [(vec![1, 1], c(0.6, 0.0)), (vec![2, 0], c(0.0, 0.8))],
        )
        .unwrap();
        let out = apply_mode_unitary(&psi, &ModeUnitary::identity(2)).unwrap();
        assert_state_eq(&out, &psi, 1e-15);
    }

    #[test]
    fn hom_coalescence() {
        let psi = MultimodeFockState::basis(&[1, 1], 2).unwrap();
        let bs = ModeUnitary::balanced_beamsplitter();
        for lifting in [Lifting::Direct, Lifting::Decomposed] {
            let out = apply_mode_unitary_with(&psi, &bs, lifting).unwrap();
            assert!((out.amplitude(&[2, 0]) - c(0.0, S)).norm() < 1e-14);
            assert!((out.amplitude(&[0, 2]) - c(0.0, S)).norm() < 1e-14);
            assert!(out.amplitude(&[1, 1]).norm() < 1e-14);
        }
    }

    #[test]
    fn single_photon_splitting() {
        let psi = MultimodeFockState::basis(&[1, 0], 2).unwrap();
        let out = apply_mode_unitary(&psi, &ModeUnitary::balanced_beamsplitter()).unwrap();
        assert!((out.amplitude(&[1, 0]) - c(S, 0.0)).norm() < 1e-15);
        assert!((out.amplitude(&[0, 1]) - c(0.0, S)).norm() < 1e-15);
    }

    #[test]
    fn loss_examples() {
        let one = MultimodeFockState::basis(&[1], 2).unwrap();
        let full = apply_uniform_loss(&one, 0, 1.0).unwrap();
        assert_eq!(full.components().len(), 1);
        assert_eq!(full.components()[0].1.amplitude(&[1]), c(1.0, 0.0));

        let none = apply_uniform_loss(&one, 0, 0.0).unwrap();
        assert_eq!(none.components().len(), 1);
        assert!((none.components()[0].0 - 1.0).abs() < 1e-15);
        assert_eq!(none.components()[0].1.amplitude(&[0]), c(1.0, 0.0));

        let half = apply_uniform_loss(&one, 0, 0.5).unwrap();
        let weights: Vec<f64> = half.components().iter().map(|(w, _)| *w).collect();
        assert_eq!(half.components()[0].1.amplitude(&[1]), c(1.0, 0.0));
        assert_eq!(half.components()[1].1.amplitude(&[0]), c(1.0, 0.0));
        assert!((weights[0] - 0.5).abs() < 1e-15 && (weights[1] - 0.5).abs() < 1e-15);

        assert!(apply_uniform_loss(&one, 0, 1.5).is_err());
        assert!(apply_uniform_loss(&one, 0, -0.1).is_err());
    }

    #[test]
    fn postselect_examples() {
        let noon = MultimodeFockState::new(
            2,
            2,
            [(vec![2, 0], c(S, 0.0)), (vec![0, 2], c(S, 0.0))],
        )
        .unwrap();
        let sel = postselect(&noon, &[ModeConstraint::Exactly(2), ModeConstraint::Any]).unwrap();
        assert!((sel.probability - 0.5).abs() < 1e-15);
        let cond = sel.conditional.unwrap();
        assert_eq!(cond.mode_count(), 1);
        assert!((cond.components()[0].1.amplitude(&[0]).norm() - 1.0).abs() < 1e-15);

        let theta = std::f64::consts::FRAC_PI_2;
        let psi = MultimodeFockState::new(
            1,
            2,
            [
                (vec![0], c((theta / 2.0).cos(), 0.0)),
                (vec![1], c((theta / 2.0).sin(), 0.0)),
            ],
        )
        .unwrap();
        let sel = postselect(&psi, &[ModeConstraint::Exactly(1)]).unwrap();
        assert!((sel.probability - 0.5).abs() < 1e-15);

        let empty = postselect(&psi, &[ModeConstraint::Exactly(2)]).unwrap();
        assert_eq!(empty.probability, 0.0);
        assert!(empty.conditional.is_none());
    }

    #[test]
    fn exhaustive_patterns_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = MultimodeFockState::basis(&[1, 1, 1], 3).unwrap();
        let out = apply_mode_unitary(&psi, &random_unitary(3, &mut rng)).unwrap();
        let total: f64 = (0..=3u8)
            .map(|n| {
                postselect(&out, &[ModeConstraint::Exactly(n), ModeConstraint::Any, ModeConstraint::Any])
                    .unwrap()
                    .probability
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn g2_examples() {
        let pair = MultimodeFockState::basis(&[1, 1], 2).unwrap();
        assert_eq!(normally_ordered_g2(&pair, 0, 1).unwrap(), 1.0);
        let noon = MultimodeFockState::new(
            2,
            2,
            [(vec![2, 0], c(S, 0.0)), (vec![0, 2], c(S, 0.0))],
        )
        .unwrap();
        assert_eq!(normally_ordered_g2(&noon, 0, 1).unwrap(), 0.0);
        assert!((normally_ordered_g2(&noon, 0, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!(normally_ordered_g2(&noon, 0, 2).is_err());
    }

    #[test]
    fn coherent_superposition_pair_has_no_coincidences() {
        // Brute force: each input (c|0⟩ + s|1⟩); after the splitter the |1,1⟩ term has
        // amplitude s² (U00 U11 + U01 U10) which vanishes for the balanced convention.
        for theta in [0.3, 1.1, 2.0, std::f64::consts::PI] {
            let (cc, ss) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            let single = MultimodeFockState::new(
                1,
                PHOTON_CUTOFF_DEFAULT,
                [(vec![0], c(cc, 0.0)), (vec![1], c(ss, 0.0))],
            )
            .unwrap();
            let pair = single.tensor(&single);
            let out = apply_mode_unitary(&pair, &ModeUnitary::balanced_beamsplitter()).unwrap();
            assert!(normally_ordered_g2(&out, 0, 1).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn set_g2_matches_pairwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi = MultimodeFockState::basis(&[1, 2, 0, 1], 3).unwrap();
        let out = apply_mode_unitary(&psi, &random_unitary(4, &mut rng)).unwrap();
        let a = [0, 2];
        let b = [2, 3];
        let direct: f64 = a
            .iter()
            .flat_map(|&i| b.iter().map(move |&j| (i, j)))
            .map(|(i, j)| normally_ordered_g2(&out, i, j).unwrap())
            .sum();
        let set = normally_ordered_set_g2(&out, &a, &b).unwrap();
        assert!((direct - set).abs() < 1e-12);
    }

    #[test]
    fn loss_then_postselect_matches_g2() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let psi = MultimodeFockState::new(
            2,
            2,
            [
                (vec![0, 0], c(0.5, 0.0)),
                (vec![1, 0], c(0.5, 0.1)),
                (vec![1, 1], c(0.3, -0.4)),
                (vec![2, 0], c(0.0, (1.0f64 - 0.25 - 0.26 - 0.25).sqrt())),
            ],
        )
        .unwrap();
        let out = apply_mode_unitary(&psi, &random_unitary(2, &mut rng)).unwrap();
        let g2 = normally_ordered_g2(&out, 0, 1).unwrap();
        for eta in [0.01, 0.001] {
            let lossy = apply_uniform_loss(&out, 0, eta).unwrap();
            let lossy = apply_uniform_loss_mixed(&lossy, 1, eta).unwrap();
            let p = postselect_mixed(&lossy, &[ModeConstraint::Exactly(1), ModeConstraint::Exactly(1)])
                .unwrap()
                .probability;
            let expected = eta * eta * g2;
            assert!(((p - expected) / expected).abs() < 2.0 * eta, "eta {eta}: {p} vs {expected}");
        }
    }

    fn arb_state(modes: usize, cutoff: u8) -> impl Strategy<Value = MultimodeFockState> {
        let term = (
            proptest::collection::vec(0..=cutoff, modes),
            -1.0f64..1.0,
            -1.0f64..1.0,
        );
        proptest::collection::vec(term, 1..6).prop_filter_map("zero state", move |terms| {
            MultimodeFockState::unnormalized(
                modes,
                cutoff,
                terms.into_iter().map(|(k, re, im)| (k, c(re, im))),
            )
            .ok()
            .filter(|s| s.norm_sqr() > 1e-6)
            .map(|s| s.normalize().unwrap())
        })
    }

    fn arb_case() -> impl Strategy<Value = (MultimodeFockState, u64)> {
        (1usize..=6, 1u8..=3).prop_flat_map(|(modes, cutoff)| {
            // keep the total photon number small so the expansion stays cheap
            (arb_state(modes, cutoff).prop_filter("photons", |s| s.max_total_photons() <= 5), any::<u64>())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn unitary_preserves_norm_and_sectors((psi, seed) in arb_case()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_unitary(psi.mode_count(), &mut rng);
            let out = apply_mode_unitary(&psi, &u).unwrap();
            prop_assert!((out.norm_sqr() - psi.norm_sqr()).abs() < 1e-10);
            let before = psi.photon_number_distribution();
            let after = out.photon_number_distribution();
            for (n, p) in &before {
                prop_assert!((after.get(n).copied().unwrap_or(0.0) - p).abs() < 1e-10);
            }
            prop_assert_eq!(before.len(), after.iter().filter(|(_, p)| **p > 1e-14).count());
        }

        #[test]
        fn liftings_agree((psi, seed) in arb_case()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_unitary(psi.mode_count(), &mut rng);
            let direct = apply_mode_unitary_with(&psi, &u, Lifting::Direct).unwrap();
            let decomposed = apply_mode_unitary_with(&psi, &u, Lifting::Decomposed).unwrap();
            assert_state_eq(&direct, &decomposed, 1e-10);
        }

        #[test]
        fn composition((psi, seed) in arb_case()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_unitary(psi.mode_count(), &mut rng);
            let v = random_unitary(psi.mode_count(), &mut rng);
            let twice = apply_mode_unitary(&apply_mode_unitary(&psi, &u).unwrap(), &v).unwrap();
            let once = apply_mode_unitary(&psi, &u.then(&v).unwrap()).unwrap();
            assert_state_eq(&twice, &once, 1e-10);
        }
        #[test]
        fn batched_set_moments_match_single_pairs(psi in arb_state(4, 2), a in proptest::collection::vec(0usize..4, 0..4), b in proptest::collection::vec(0usize..4, 0..4)) {
            let mut a = a;
            a.sort_unstable();
            a.dedup();
            let mut b = b;
            b.sort_unstable();
            b.dedup();
            let pairs = vec![(a.clone(), b.clone()), (b.clone(), a.clone()), (a.clone(), a.clone())];
            let batch = normally_ordered_set_g2_batch(&psi, &pairs).unwrap();
            for ((x, y), g) in pairs.iter().zip(batch) {
                prop_assert!((normally_ordered_set_g2(&psi, x, y).unwrap() - g).abs() < 1e-12);
            }
        }
    }
}
