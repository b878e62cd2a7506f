//! Embedded Gaussian ensembles with and without centrosymmetry.
//!
//! A realization draws a real symmetric matrix of k-body coefficients and
//! embeds it into the n-particle space. The centrosymmetric flavor first
//! projects the coefficients onto the subspace invariant under the exchange
//! operator lifted from the one-particle reflection `j -> l - j + 1`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{create_tuple, IndexSpace, ManyBodyBasis, OccupationState, Sign};

/// How the centrosymmetric coefficients are derived from a raw draw.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentroSampling {
    /// `(v + S v Sᵀ) / 2`.
    Average,
    /// One raw value per orbit of `(α, γ) -> (Jα, Jγ)`, copied with signs.
    #[default]
    Orbit,
}

impl fmt::Display for CentroSampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CentroSampling::Average => "average",
            CentroSampling::Orbit => "orbit",
        })
    }
}

impl FromStr for CentroSampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "average" => Ok(CentroSampling::Average),
            "orbit" => Ok(CentroSampling::Orbit),
            other => Err(Error::invalid(
                "centro_sampling",
                format!("expected `average` or `orbit`, got `{other}`"),
            )),
        }
    }
}

/// Real symmetric matrix `v[α, γ]` over the lexicographic k-tuple index.
#[derive(Clone, Debug, PartialEq)]
pub struct KBodyCoefficients {
    l: usize,
    k: usize,
    values: DMatrix<f64>,
}

impl KBodyCoefficients {
    pub fn new(l: usize, k: usize, values: DMatrix<f64>) -> Result<Self> {
        let dim = crate::fock::binomial(l, k).unwrap_or(0) as usize;
        if values.nrows() != dim || values.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: values.nrows().max(values.ncols()),
            });
        }
        if values != values.transpose() {
            return Err(Error::invalid("values", "coefficient matrix is not symmetric"));
        }
        Ok(KBodyCoefficients { l, k, values })
    }

    pub fn zeros(l: usize, k: usize) -> Self {
        let dim = crate::fock::binomial(l, k).unwrap_or(0) as usize;
        KBodyCoefficients {
            l,
            k,
            values: DMatrix::zeros(dim, dim),
        }
    }

    pub fn modes(&self) -> usize {
        self.l
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Sets `v[a, c]` and `v[c, a]`.
    pub fn set(&mut self, a: usize, c: usize, value: f64) {
        self.values[(a, c)] = value;
        self.values[(c, a)] = value;
    }
}

/// Draws independent Gaussian coefficients: variance 1 off the diagonal,
/// variance 2 on it. Entries are drawn row by row over the upper triangle.
pub fn sample_coefficients<R: Rng + ?Sized>(rng: &mut R, l: usize, k: usize) -> Result<KBodyCoefficients> {
    if l < 1 || l > crate::fock::MAX_MODES {
        return Err(Error::invalid("l", format!("{l} outside 1..=64")));
    }
    if k < 1 || k > l {
        return Err(Error::invalid("k", format!("{k} outside 1..={l}")));
    }
    let mut coeffs = KBodyCoefficients::zeros(l, k);
    let dim = coeffs.dim();
    for a in 0..dim {
        for c in a..dim {
            let x: f64 = rng.sample(StandardNormal);
            coeffs.set(a, c, if a == c { x * std::f64::consts::SQRT_2 } else { x });
        }
    }
    Ok(coeffs)
}

/// The lifted exchange operator as a signed permutation of an m-particle
/// index set: `J e_i = sign[i] e_{perm[i]}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedInvolution {
    l: usize,
    m: usize,
    perm: Vec<usize>,
    sign: Vec<Sign>,
}

impl SignedInvolution {
    pub fn particles(&self) -> usize {
        self.m
    }

    pub fn modes(&self) -> usize {
        self.l
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn image(&self, i: usize) -> (usize, Sign) {
        (self.perm[i], self.sign[i])
    }

    pub fn fixed_points(&self) -> Vec<usize> {
        (0..self.perm.len()).filter(|&i| self.perm[i] == i).collect()
    }

    /// True when applying the operator twice is the identity, signs included.
    pub fn is_involution(&self) -> bool {
        (0..self.perm.len()).all(|i| {
            let j = self.perm[i];
            self.perm[j] == i && self.sign[i] * self.sign[j] == 1
        })
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.len(), self.len());
        for i in 0..self.len() {
            s[(self.perm[i], i)] = f64::from(self.sign[i]);
        }
        s
    }

    /// Flips one sign. Only meant for fault-injection checks.
    pub fn corrupt_sign(&mut self, i: usize) {
        self.sign[i] = -self.sign[i];
    }
}

/// Lifts `J₁|j⟩ = |l - j + 1⟩` to the `m`-particle space, keeping the exact
/// reordering sign of `a†_{l-j₁+1} … a†_{l-j_m+1}`.
pub fn build_exchange(l: usize, m: usize) -> Result<SignedInvolution> {
    let space = IndexSpace::new(l, m)?;
    let mut perm = Vec::with_capacity(space.len());
    let mut sign = Vec::with_capacity(space.len());
    for t in space.tuples() {
        let reflected: Vec<usize> = t.modes().iter().map(|&j| l - j + 1).collect();
        let (state, s) = create_tuple(OccupationState::VACUUM, &reflected)
            .expect("reflected modes are distinct");
        perm.push(
            space
                .position_of_mask(state.bits())
                .expect("reflection preserves particle number"),
        );
        sign.push(s);
    }
    Ok(SignedInvolution { l, m, perm, sign })
}

/// Projects coefficients onto the exchange-invariant subspace.
pub fn symmetrize_centro(
    coeffs: &KBodyCoefficients,
    exchange: &SignedInvolution,
    mode: CentroSampling,
) -> Result<KBodyCoefficients> {
    let dim = coeffs.dim();
    if exchange.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: exchange.len(),
        });
    }
    let v = coeffs.values();
    // (S v Sᵀ)[a, c] = sign(Ja) sign(Jc) v[Ja, Jc]
    let mapped = |a: usize, c: usize| {
        let (ja, _) = exchange.image(a);
        let (jc, _) = exchange.image(c);
        let s = exchange.sign[ja] * exchange.sign[jc];
        (ja, jc, f64::from(s))
    };
    let mut out = KBodyCoefficients::zeros(coeffs.modes(), coeffs.rank());
    match mode {
        CentroSampling::Average => {
            for a in 0..dim {
                for c in a..dim {
                    let (ja, jc, s) = mapped(a, c);
                    out.set(a, c, (v[(a, c)] + s * v[(ja, jc)]) / 2.0);
                }
            }
        }
        CentroSampling::Orbit => {
            let key = |a: usize, c: usize| (a.min(c), a.max(c));
            for a in 0..dim {
                for c in a..dim {
                    let (ja, jc, s) = mapped(a, c);
                    let here = key(a, c);
                    let there = key(ja, jc);
                    let value = if here == there {
                        if s < 0.0 {
                            0.0
                        } else {
                            v[(a, c)]
                        }
                    } else if here < there {
                        v[(a, c)]
                    } else {
                        s * v[(ja, jc)]
                    };
                    out.set(a, c, value);
                }
            }
        }
    }
    Ok(out)
}

/// One embedded Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSample {
    pub matrix: DMatrix<f64>,
    pub l: usize,
    pub n: usize,
    pub k: usize,
    pub centrosymmetric: bool,
    pub seed: Option<u64>,
}

impl HamiltonianSample {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `H[ν, μ] = Σ v[α, γ] ⟨ν| ψ†_α ψ_γ |μ⟩`.
pub fn embed_hamiltonian(coeffs: &KBodyCoefficients, basis: &ManyBodyBasis) -> Result<HamiltonianSample> {
    Embedding::new(basis, coeffs.rank())?.embed(coeffs, basis)
}

/// Precomputed list of nonzero k-body matrix elements on a basis.
#[derive(Clone, Debug)]
pub struct Embedding {
    dim: usize,
    k: usize,
    space_dim: usize,
    // (row, col, alpha, gamma, sign), upper triangle only (row <= col)
    links: Vec<(usize, usize, usize, usize, f64)>,
}

impl Embedding {
    pub fn new(basis: &ManyBodyBasis, k: usize) -> Result<Self> {
        if k < 1 || k > basis.particles() {
            return Err(Error::invalid(
                "k",
                format!("rank {k} exceeds particle number {}", basis.particles()),
            ));
        }
        let space = IndexSpace::new(basis.modes(), k)?;
        let mut links = Vec::new();
        basis.for_each_connection(&space, |row, col, alpha, gamma, sign| {
            if row <= col {
                links.push((row, col, alpha, gamma, f64::from(sign)));
            }
        });
        Ok(Embedding {
            dim: basis.dimension(),
            k,
            space_dim: space.len(),
            links,
        })
    }

    pub fn embed(&self, coeffs: &KBodyCoefficients, basis: &ManyBodyBasis) -> Result<HamiltonianSample> {
        if coeffs.rank() != self.k || coeffs.modes() != basis.modes() {
            return Err(Error::invalid(
                "k",
                format!(
                    "coefficients (l={}, k={}) do not match basis (l={}) and rank {}",
                    coeffs.modes(),
                    coeffs.rank(),
                    basis.modes(),
                    self.k
                ),
            ));
        }
        if coeffs.dim() != self.space_dim {
            return Err(Error::DimensionMismatch {
                expected: self.space_dim,
                found: coeffs.dim(),
            });
        }
        let v = coeffs.values();
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for &(row, col, alpha, gamma, sign) in &self.links {
            h[(row, col)] += sign * v[(alpha, gamma)];
        }
        for col in 0..self.dim {
            for row in col + 1..self.dim {
                h[(row, col)] = h[(col, row)];
            }
        }
        Ok(HamiltonianSample {
            matrix: h,
            l: basis.modes(),
            n: basis.particles(),
            k: self.k,
            centrosymmetric: false,
            seed: None,
        })
    }
}

/// `max |(A J - J A)_{ij}|` with `J` as a signed permutation matrix.
pub fn commutator_max_norm(matrix: &DMatrix<f64>, exchange: &SignedInvolution) -> f64 {
    let dim = matrix.nrows();
    assert_eq!(dim, exchange.len(), "exchange operator does not match matrix");
    // (A J)[r, c] = s_c A[r, Jc];  (J A)[r, c] = s_{Jr} A[Jr, c]
    let mut worst = 0.0f64;
    for c in 0..dim {
        let (jc, sc) = exchange.image(c);
        for r in 0..dim {
            let (jr, _) = exchange.image(r);
            let aj = f64::from(sc) * matrix[(r, jc)];
            let ja = f64::from(exchange.sign[jr]) * matrix[(jr, c)];
            worst = worst.max((aj - ja).abs());
        }
    }
    worst
}

/// Reusable sampler for one `(l, n, k)` cell: basis, embedding table and
/// exchange operators are built once.
#[derive(Clone, Debug)]
pub struct EnsembleSampler {
    basis: ManyBodyBasis,
    embedding: Embedding,
    exchange_k: SignedInvolution,
    exchange_n: SignedInvolution,
    sampling: CentroSampling,
}

/// EGE and csEGE Hamiltonians derived from the same raw draw.
#[derive(Clone, Debug)]
pub struct PairedSample {
    pub raw: KBodyCoefficients,
    pub ege: HamiltonianSample,
    pub csege: HamiltonianSample,
}

impl EnsembleSampler {
    pub fn new(l: usize, n: usize, k: usize, sampling: CentroSampling) -> Result<Self> {
        Self::with_cap(l, n, k, sampling, crate::fock::DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(l: usize, n: usize, k: usize, sampling: CentroSampling, cap: usize) -> Result<Self> {
        let basis = ManyBodyBasis::enumerate_with_cap(l, n, cap)?;
        if k < 1 || k > n {
            return Err(Error::invalid("k", format!("{k} outside 1..={n}")));
        }
        let embedding = Embedding::new(&basis, k)?;
        Ok(EnsembleSampler {
            exchange_k: build_exchange(l, k)?,
            exchange_n: build_exchange(l, n)?,
            basis,
            embedding,
            sampling,
        })
    }

    pub fn basis(&self) -> &ManyBodyBasis {
        &self.basis
    }

    pub fn exchange_n(&self) -> &SignedInvolution {
        &self.exchange_n
    }

    pub fn exchange_k(&self) -> &SignedInvolution {
        &self.exchange_k
    }

    pub fn sampling(&self) -> CentroSampling {
        self.sampling
    }

    pub fn embed(&self, coeffs: &KBodyCoefficients) -> Result<HamiltonianSample> {
        self.embedding.embed(coeffs, &self.basis)
    }

    /// Draws one raw coefficient set and embeds both flavors.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PairedSample> {
        let raw = sample_coefficients(rng, self.basis.modes(), self.embedding.k)?;
        let ege = self.embed(&raw)?;
        let sym = symmetrize_centro(&raw, &self.exchange_k, self.sampling)?;
        let mut csege = self.embed(&sym)?;
        csege.centrosymmetric = true;
        Ok(PairedSample { raw, ege, csege })
    }
}

/// Single EGE (or csEGE when `centro`) realization.
pub fn sample_hamiltonian<R: Rng + ?Sized>(
    rng: &mut R,
    l: usize,
    n: usize,
    k: usize,
    centro: bool,
    sampling: CentroSampling,
) -> Result<HamiltonianSample> {
    let pair = EnsembleSampler::new(l, n, k, sampling)?.sample_pair(rng)?;
    Ok(if centro { pair.csege } else { pair.ege })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn exchange_partial_at_l4_m2() {
        let j = build_exchange(4, 2).unwrap();
        // tuples: (1,2) (1,3) (1,4) (2,3) (2,4) (3,4)
        assert_eq!(j.fixed_points(), vec![2, 3]);
        assert_eq!(j.image(0), (5, -1));
        assert!(j.is_involution());
    }

    #[test]
    fn exchange_full_reversal() {
        for m in [1, 3] {
            let j = build_exchange(4, m).unwrap();
            for i in 0..4 {
                assert_eq!(j.image(i).0, 3 - i, "m={m}");
            }
            assert!(j.fixed_points().is_empty());
        }
    }

    #[test]
    fn exchange_maps_left_filled_to_right_filled() {
        for (l, n) in [(6, 5), (6, 3), (8, 5), (10, 4)] {
            let j = build_exchange(l, n).unwrap();
            assert_eq!(j.image(0).0, j.len() - 1);
            assert!(j.is_involution());
        }
    }

    #[test]
    fn two_by_two_symmetrization() {
        let (a, b, d) = (0.3, -1.7, 2.5);
        let v = KBodyCoefficients::new(2, 1, DMatrix::from_row_slice(2, 2, &[a, b, b, d])).unwrap();
        let j = build_exchange(2, 1).unwrap();
        let s = symmetrize_centro(&v, &j, CentroSampling::Average).unwrap();
        assert_eq!(
            s.values(),
            &DMatrix::from_row_slice(2, 2, &[(a + d) / 2.0, b, b, (a + d) / 2.0])
        );
    }

    #[test]
    fn symmetrization_is_idempotent() {
        let mut rng = seed::stream(11, 0);
        for mode in [CentroSampling::Average, CentroSampling::Orbit] {
            for (l, k) in [(6, 3), (6, 2), (5, 2), (4, 1)] {
                let v = sample_coefficients(&mut rng, l, k).unwrap();
                let j = build_exchange(l, k).unwrap();
                let once = symmetrize_centro(&v, &j, mode).unwrap();
                let twice = symmetrize_centro(&once, &j, mode).unwrap();
                assert!((once.values() - twice.values()).amax() <= 1e-15);
                assert!(commutator_max_norm(once.values(), &j) <= 1e-15);
            }
        }
    }

    #[test]
    fn symmetrization_dimension_mismatch() {
        let v = KBodyCoefficients::zeros(6, 3);
        let j = build_exchange(6, 2).unwrap();
        assert!(matches!(
            symmetrize_centro(&v, &j, CentroSampling::Average),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn centrosymmetric_embedding_commutes() {
        let mut rng = seed::stream(5, 0);
        for mode in [CentroSampling::Average, CentroSampling::Orbit] {
            for (l, n, k) in [(6, 5, 3), (6, 4, 2), (6, 3, 1), (7, 3, 2), (6, 5, 5)] {
                let sampler = EnsembleSampler::new(l, n, k, mode).unwrap();
                for _ in 0..5 {
                    let pair = sampler.sample_pair(&mut rng).unwrap();
                    let c = commutator_max_norm(&pair.csege.matrix, sampler.exchange_n());
                    assert!(c <= 1e-12, "({l},{n},{k}) {mode}: {c}");
                    assert_eq!(pair.csege.matrix, pair.csege.matrix.transpose());
                }
            }
        }
    }

    #[test]
    fn full_rank_embedding_is_identity_map() {
        let mut rng = seed::stream(9, 0);
        let basis = ManyBodyBasis::enumerate(6, 3).unwrap();
        let v = sample_coefficients(&mut rng, 6, 3).unwrap();
        let h = embed_hamiltonian(&v, &basis).unwrap();
        assert_eq!(&h.matrix, v.values());
    }

    #[test]
    fn single_hopping_element() {
        let basis = ManyBodyBasis::enumerate(3, 2).unwrap();
        let mut v = KBodyCoefficients::zeros(3, 1);
        v.set(1, 2, 0.75);
        let h = embed_hamiltonian(&v, &basis).unwrap();
        let row = basis.index_of(OccupationState::from_modes(&[1, 2]).unwrap()).unwrap();
        let col = basis.index_of(OccupationState::from_modes(&[1, 3]).unwrap()).unwrap();
        assert_eq!(h.matrix[(row, col)], 0.75);
        assert_eq!(h.matrix[(col, row)], 0.75);
    }

    #[test]
    fn zero_coefficients_embed_to_zero() {
        let basis = ManyBodyBasis::enumerate(6, 4).unwrap();
        let h = embed_hamiltonian(&KBodyCoefficients::zeros(6, 2), &basis).unwrap();
        assert_eq!(h.matrix, DMatrix::zeros(15, 15));
    }

    #[test]
    fn rank_above_particle_number_rejected() {
        let basis = ManyBodyBasis::enumerate(6, 2).unwrap();
        assert!(embed_hamiltonian(&KBodyCoefficients::zeros(6, 3), &basis).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_coefficients(&mut seed::stream(42, 0), 6, 3).unwrap();
        let b = sample_coefficients(&mut seed::stream(42, 0), 6, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn commutator_matches_dense_product() {
        let mut rng = seed::stream(3, 0);
        let v = sample_coefficients(&mut rng, 6, 2).unwrap();
        let mut j = build_exchange(6, 2).unwrap();
        j.corrupt_sign(4);
        let dense = j.to_matrix();
        let expect = (v.values() * &dense - &dense * v.values()).amax();
        assert_eq!(commutator_max_norm(v.values(), &j), expect);
    }

    #[test]
    fn parse_centro_sampling() {
        assert_eq!("orbit".parse::<CentroSampling>().unwrap(), CentroSampling::Orbit);
        assert_eq!(CentroSampling::Average.to_string(), "average");
        assert!("mean".parse::<CentroSampling>().is_err());
    }
}
