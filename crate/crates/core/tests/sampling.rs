use ege_transport::ensemble::{sample_coefficients, sample_hamiltonian, CentroSampling};
use ege_transport::seed;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn coefficient_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 100_000usize;
    let (mut d1, mut d2, mut o1, mut o2) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..draws {
        let v = sample_coefficients(&mut rng, 3, 1).unwrap();
        let x = v.values()[(1, 1)];
        let y = v.values()[(0, 2)];
        assert_eq!(y, v.values()[(2, 0)]);
        d1 += x;
        d2 += x * x;
        o1 += y;
        o2 += y * y;
    }
    let n = draws as f64;
    let se = |var: f64| (var / n).sqrt();
    assert!((d1 / n).abs() < 5.0 * se(2.0), "diagonal mean {}", d1 / n);
    assert!((o1 / n).abs() < 5.0 * se(1.0), "off-diagonal mean {}", o1 / n);
    // variance of the sample variance is 2σ⁴/n for a Gaussian
    assert!((d2 / n - 2.0).abs() < 5.0 * (8.0 / n).sqrt(), "diagonal variance {}", d2 / n);
    assert!((o2 / n - 1.0).abs() < 5.0 * (2.0 / n).sqrt(), "off-diagonal variance {}", o2 / n);
}

/// Mean ratio of consecutive level spacings `min(s_i, s_{i+1}) / max(...)`.
fn mean_spacing_ratio(levels: &mut [f64]) -> (f64, usize) {
    levels.sort_by(f64::total_cmp);
    let s: Vec<f64> = levels.windows(2).map(|w| w[1] - w[0]).collect();
    let r: Vec<f64> = s.windows(2).map(|w| w[0].min(w[1]) / w[0].max(w[1])).collect();
    (r.iter().sum::<f64>(), r.len())
}

#[test]
fn full_rank_interaction_matches_goe_spacing_ratio() {
    // k = n: the embedded ensemble is a GOE of dimension C(l, n)
    let (l, n) = (4, 2);
    let dim = 6;
    let realizations = 4000;
    let (mut sum_e, mut cnt_e, mut sum_g, mut cnt_g) = (0.0, 0, 0.0, 0);
    let mut goe_rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..realizations {
        let mut rng = seed::stream(seed::realization_seed(5, i), seed::HAMILTONIAN_STREAM);
        let h = sample_hamiltonian(&mut rng, l, n, n, false, CentroSampling::Orbit).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(h.matrix).eigenvalues.iter().cloned().collect();
        let (s, c) = mean_spacing_ratio(&mut ev);
        sum_e += s;
        cnt_e += c;

        // brute-force GOE reference
        let mut g = DMatrix::<f64>::zeros(dim, dim);
        for r in 0..dim {
            for c in r..dim {
                let x: f64 = StandardNormal.sample(&mut goe_rng);
                g[(r, c)] = if r == c { x * 2f64.sqrt() } else { x };
                g[(c, r)] = g[(r, c)];
            }
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(g).eigenvalues.iter().cloned().collect();
        let (s, c) = mean_spacing_ratio(&mut ev);
        sum_g += s;
        cnt_g += c;
    }
    let ours = sum_e / cnt_e as f64;
    let reference = sum_g / cnt_g as f64;
    // large-N GOE value is 0.5307; small matrices sit close to it
    assert!((ours - reference).abs() < 0.015, "ours {ours} reference {reference}");
    assert!((ours - 0.5307).abs() < 0.03, "ours {ours}");
}

#[test]
fn full_rank_interaction_spectrum_width() {
    // GOE normalization: E[tr H²] = N·2 + N(N−1)·1 = N(N+1)
    let (l, n) = (5, 2);
    let dim = 10.0;
    let reps = 3000;
    let mut acc = 0.0;
    for i in 0..reps {
        let mut rng = seed::stream(seed::realization_seed(11, i), 0);
        let h = sample_hamiltonian(&mut rng, l, n, n, false, CentroSampling::Orbit).unwrap();
        acc += h.matrix.iter().map(|x| x * x).sum::<f64>();
    }
    let mean = acc / reps as f64;
    let expected = dim * (dim + 1.0);
    // Var(tr H²) = 8N + 4N(N−1)
    let se = ((8.0 * dim + 4.0 * dim * (dim - 1.0)) / reps as f64).sqrt();
    assert!((mean - expected).abs() < 5.0 * se, "mean {mean} expected {expected}");
}
