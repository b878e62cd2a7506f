use ege_transport::ensemble::{
    build_exchange, commutator_max_norm, embed_hamiltonian, sample_coefficients, symmetrize_centro,
    CentroSampling, EnsembleSampler, HamiltonianSample, KBodyCoefficients,
};
use ege_transport::fock::{apply_pair, ManyBodyBasis, OccupationState, OperatorIndex};
use ege_transport::negf::{self, EffectiveHamiltonian};
use ege_transport::oracle::FullFockOracle;
use ege_transport::seed;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// `(l, n, k)` with `1 ≤ k ≤ n < l ≤ max_l`.
fn shape(max_l: usize) -> impl Strategy<Value = (usize, usize, usize)> {
    (2..=max_l)
        .prop_flat_map(|l| (Just(l), 1..l))
        .prop_flat_map(|(l, n)| (Just(l), Just(n), 1..=n))
}

fn sample(l: usize, n: usize, k: usize, s: u64, centro: bool) -> HamiltonianSample {
    let sampler = EnsembleSampler::new(l, n, k, CentroSampling::Orbit).unwrap();
    let pair = sampler
        .sample_pair(&mut seed::stream(s, seed::HAMILTONIAN_STREAM))
        .unwrap();
    if centro {
        pair.csege
    } else {
        pair.ege
    }
}

fn leads(h: &HamiltonianSample, eta: f64) -> EffectiveHamiltonian {
    negf::attach_default_leads(h, eta).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn embedded_matrix_is_symmetric((l, n, k) in shape(8), s in any::<u64>()) {
        let h = sample(l, n, k, s, false);
        prop_assert_eq!(h.matrix.nrows(), ManyBodyBasis::enumerate(l, n).unwrap().dimension());
        prop_assert_eq!(&h.matrix, &h.matrix.transpose());
    }

    #[test]
    fn apply_pair_matches_dense_operators(
        (l, k) in (2usize..=7).prop_flat_map(|l| (Just(l), 1..=l)),
        bits in any::<u64>(),
        picks in any::<(u64, u64)>(),
    ) {
        let oracle = FullFockOracle::new(l).unwrap();
        let modes: Vec<usize> = (1..=l).collect();
        let pick = |seed: u64| {
            let mut m = modes.clone();
            // deterministic shuffle from the seed
            let mut x = seed | 1;
            for i in (1..m.len()).rev() {
                x ^= x << 13; x ^= x >> 7; x ^= x << 17;
                m.swap(i, (x % (i as u64 + 1)) as usize);
            }
            let mut t = m[..k].to_vec();
            t.sort();
            t
        };
        let (c, a) = (pick(picks.0), pick(picks.1));
        let dense = oracle.pair_operator(&c, &a);
        let state = OccupationState::from_bits(bits & ((1u64 << l) - 1));
        let ci = OperatorIndex::new(c, l).unwrap();
        let ai = OperatorIndex::new(a, l).unwrap();
        let col = state.bits() as usize;
        match apply_pair(state, &ci, &ai).unwrap() {
            Some((out, sign)) => {
                for row in 0..1usize << l {
                    let want = if row == out.bits() as usize { sign as f64 } else { 0.0 };
                    prop_assert_eq!(dense[(row, col)], want);
                }
            }
            None => prop_assert!(dense.column(col).iter().all(|&x| x == 0.0)),
        }
    }

    #[test]
    fn embedding_is_linear((l, n, k) in shape(7), s in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let basis = ManyBodyBasis::enumerate(l, n).unwrap();
        let mut rng = seed::stream(s, 0);
        let v1 = sample_coefficients(&mut rng, l, k).unwrap();
        let v2 = sample_coefficients(&mut rng, l, k).unwrap();
        let mix = KBodyCoefficients::new(l, k, v1.values() * a + v2.values() * b).unwrap();
        let lhs = embed_hamiltonian(&mix, &basis).unwrap().matrix;
        let rhs = embed_hamiltonian(&v1, &basis).unwrap().matrix * a
            + embed_hamiltonian(&v2, &basis).unwrap().matrix * b;
        prop_assert!((lhs - rhs).amax() <= 1e-12);
    }

    #[test]
    fn centrosymmetric_samples_commute_with_exchange((l, n, k) in shape(8), s in any::<u64>(), orbit in any::<bool>()) {
        let mode = if orbit { CentroSampling::Orbit } else { CentroSampling::Average };
        let sampler = EnsembleSampler::new(l, n, k, mode).unwrap();
        let pair = sampler.sample_pair(&mut seed::stream(s, 0)).unwrap();
        prop_assert!(commutator_max_norm(&pair.csege.matrix, sampler.exchange_n()) <= 1e-12);
        // dense cross-check
        let j = sampler.exchange_n().to_matrix();
        let c = &pair.csege.matrix * &j - &j * &pair.csege.matrix;
        prop_assert!(c.amax() <= 1e-12);
        // symmetrization is a projection
        let once = symmetrize_centro(&pair.raw, sampler.exchange_k(), mode).unwrap();
        let twice = symmetrize_centro(&once, sampler.exchange_k(), mode).unwrap();
        prop_assert!((once.values() - twice.values()).amax() <= 1e-15);
    }

    #[test]
    fn energy_reflection((l, n, k) in shape(6), s in any::<u64>(), e in -8.0f64..8.0) {
        let h = sample(l, n, k, s, s % 2 == 0);
        let neg = HamiltonianSample { matrix: -&h.matrix, ..h.clone() };
        let t = negf::transmission_at(&leads(&h, 1.0), -e).unwrap();
        let t_neg = negf::transmission_at(&leads(&neg, 1.0), e).unwrap();
        prop_assert!((t - t_neg).abs() <= 1e-12);
    }

    #[test]
    fn reciprocity((l, n, k) in shape(6), s in any::<u64>(), e in -8.0f64..8.0, eta in 0.2f64..3.0) {
        let h = leads(&sample(l, n, k, s, false), eta);
        let t = negf::transmission_at(&h, e).unwrap();
        let back = negf::transmission_at(&h.swapped(), e).unwrap();
        prop_assert!((t - back).abs() <= 1e-12);
    }

    #[test]
    fn pole_identities((l, n, k) in shape(7), s in any::<u64>(), eta in 0.2f64..3.0, centro in any::<bool>()) {
        let h = leads(&sample(l, n, k, s, centro), eta);
        let sd = negf::spectral_decompose(&h);
        prop_assume!(!sd.is_defective());
        let trace: f64 = sd.poles.iter().map(|p| p.im).sum();
        prop_assert!(rel(trace, -2.0 * eta) <= 1e-10);
        for p in &sd.poles {
            prop_assert!(p.im <= 1e-10 && p.im >= -eta - 1e-10);
        }
        let sum: num_complex::Complex64 = sd.weights.iter().sum();
        prop_assert!(sum.norm() <= 1e-8);
        if centro {
            for j in 0..sd.len() {
                if let Some(t) = sd.tau(j) {
                    prop_assert!(t >= 1.0 - 1e-6, "tau {} at pole {}", t, j);
                }
            }
        }
    }

    #[test]
    fn transmission_routes_agree((l, n, k) in shape(6), s in any::<u64>(), centro in any::<bool>()) {
        let h = leads(&sample(l, n, k, s, centro), 1.0);
        let sd = negf::spectral_decompose(&h);
        prop_assume!(!sd.is_defective());
        for i in 0..11 {
            let e = -10.0 + 2.0 * i as f64;
            let direct = negf::transmission_at(&h, e).unwrap();
            let spectral = negf::transmission_spectral(&sd, e).unwrap();
            prop_assert!(direct <= 1.0 + 1e-10 && direct >= 0.0);
            prop_assert!(rel(direct, spectral) <= 1e-8 || (direct - spectral).abs() <= 1e-14,
                "E={} direct={} spectral={}", e, direct, spectral);
        }
        for p in &sd.poles {
            let a = negf::amplitude_spectral(&sd, p.re).unwrap();
            prop_assert!(a.norm() <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn current_routes_agree((n, k) in (1usize..=5).prop_flat_map(|n| (Just(n), 1..=n)), s in any::<u64>()) {
        let h = leads(&sample(6, n, k, s, s % 2 == 1), 1.0);
        let sd = negf::spectral_decompose(&h);
        prop_assume!(!sd.is_defective());
        let residue = negf::current_residue(&sd);
        prop_assume!(residue.is_ok());
        let residue = residue.unwrap();
        let quad = negf::current_quadrature(&h, &sd, 1e-9).unwrap();
        prop_assert!(residue >= 0.0);
        prop_assert!(rel(residue, quad) <= 1e-6, "residue {} quadrature {}", residue, quad);
    }

    #[test]
    fn exchange_is_a_signed_involution((l, m) in (2usize..=10).prop_flat_map(|l| (Just(l), 1..=l))) {
        let j = build_exchange(l, m).unwrap();
        prop_assert!(j.is_involution());
        let d = j.to_matrix();
        prop_assert_eq!(&d * &d, DMatrix::identity(j.len(), j.len()));
    }
}

#[test]
fn oracle_embedding_small_systems() {
    for l in 3..=5 {
        let oracle = FullFockOracle::new(l).unwrap();
        for n in 1..l {
            let sector = oracle.sector(n);
            let basis = ManyBodyBasis::enumerate(l, n).unwrap();
            for k in 1..=n {
                for draw in 0..5u64 {
                    let mut rng = seed::stream(seed::realization_seed(99, draw), 0);
                    let v = sample_coefficients(&mut rng, l, k).unwrap();
                    let ours = embed_hamiltonian(&v, &basis).unwrap().matrix;
                    let reference = oracle.embed(v.values(), k, n).unwrap();
                    assert_eq!(reference.nrows(), sector.len());
                    assert!((ours - reference).amax() <= 1e-12, "l={l} n={n} k={k}");
                }
            }
        }
    }
}
