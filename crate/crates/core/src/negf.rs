//! Open-system transport in the wide-band limit.
//!
//! The closed Hamiltonian is coupled to an input and an output lead through
//! purely imaginary self-energies `-iη` on two basis states. Transmission
//! follows from one element of the retarded Green's function, either by a
//! direct linear solve or through the pole expansion of the non-Hermitian
//! effective Hamiltonian; the total current is the transmission integrated
//! over all energies, evaluated in closed form by residues or by adaptive
//! quadrature.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::ensemble::HamiltonianSample;
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexLu};
use crate::quadrature;

/// Eigenvector condition number above which a sample is treated as near-defective.
pub const DEFECTIVE_CONDITION: f64 = 1e8;
/// Weights below this magnitude are treated as exactly decoupled poles.
pub const WEIGHT_FLOOR: f64 = 1e-12;
/// Poles closer than this to the real axis cannot enter the residue sum.
pub const REAL_AXIS_GUARD: f64 = 1e-12;
/// Half-width of the quadrature window beyond the outermost resonances, in units of η.
pub const WINDOW_MARGIN: f64 = 50.0;
const MAX_PANELS: usize = 50_000;

/// `H - iη (|in⟩⟨in| + |out⟩⟨out|)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveHamiltonian {
    h: DMatrix<Complex64>,
    in_index: usize,
    out_index: usize,
    eta: f64,
}

impl EffectiveHamiltonian {
    pub fn new(hamiltonian: &DMatrix<f64>, in_index: usize, out_index: usize, eta: f64) -> Result<Self> {
        let dim = hamiltonian.nrows();
        if hamiltonian.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: hamiltonian.ncols(),
            });
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
        }
        if in_index >= dim {
            return Err(Error::invalid("in_index", format!("{in_index} outside 0..{dim}")));
        }
        if out_index >= dim {
            return Err(Error::invalid("out_index", format!("{out_index} outside 0..{dim}")));
        }
        if in_index == out_index {
            return Err(Error::invalid("out_index", "input and output states coincide"));
        }
        let mut h = hamiltonian.map(|x| Complex64::new(x, 0.0));
        h[(in_index, in_index)].im -= eta;
        h[(out_index, out_index)].im -= eta;
        Ok(EffectiveHamiltonian {
            h,
            in_index,
            out_index,
            eta,
        })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.h
    }

    pub fn in_index(&self) -> usize {
        self.in_index
    }

    pub fn out_index(&self) -> usize {
        self.out_index
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dimension(&self) -> usize {
        self.h.nrows()
    }

    /// Same system with the roles of the two leads exchanged.
    pub fn swapped(&self) -> Self {
        EffectiveHamiltonian {
            h: self.h.clone(),
            in_index: self.out_index,
            out_index: self.in_index,
            eta: self.eta,
        }
    }
}

/// Couples leads to explicit basis positions.
pub fn attach_leads(sample: &HamiltonianSample, in_index: usize, out_index: usize, eta: f64) -> Result<EffectiveHamiltonian> {
    EffectiveHamiltonian::new(&sample.matrix, in_index, out_index, eta)
}

/// Input on the left-filled state, output on the right-filled one.
pub fn attach_default_leads(sample: &HamiltonianSample, eta: f64) -> Result<EffectiveHamiltonian> {
    let dim = sample.dimension();
    attach_leads(sample, 0, dim.saturating_sub(1), eta)
}

/// `G_in,out(E)` from `(E - H') g = e_out`.
pub fn green_in_out(h: &EffectiveHamiltonian, energy: f64) -> Result<Complex64> {
    let dim = h.dimension();
    let mut a = -h.h.clone();
    for i in 0..dim {
        a[(i, i)] += energy;
    }
    let lu = ComplexLu::factor(a).ok_or(Error::SingularResolvent { energy })?;
    let mut rhs = DVector::zeros(dim);
    rhs[h.out_index] = Complex64::new(1.0, 0.0);
    let g = lu.solve(&rhs);
    let value = g[h.in_index];
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::SingularResolvent { energy })
    }
}

/// `T(E) = 4η² |G_in,out(E)|²` by direct solve.
pub fn transmission_at(h: &EffectiveHamiltonian, energy: f64) -> Result<f64> {
    let g = green_in_out(h, energy)?;
    Ok(4.0 * h.eta * h.eta * g.norm_sqr())
}

/// Resonance poles `ε_j` and weights `Υ_j` of an effective Hamiltonian.
///
/// Eigenvectors carry the unconjugated normalization `φ_jᵀ φ_j = 1`, so
/// `Υ_j = 2 φ_j[in] φ_j[out]`. The imaginary part of each pole is taken from
/// the exact identity `Im ε_j = -η (|φ_j[in]|² + |φ_j[out]|²) / ‖φ_j‖²`
/// (valid because `H` is real symmetric), which keeps narrow resonances
/// accurate to full relative precision.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData {
    pub poles: Vec<Complex64>,
    pub weights: Vec<Complex64>,
    /// `σ_max / σ_min` of the unit-column eigenvector matrix.
    pub eigenvector_condition: f64,
    pub eta: f64,
}

impl SpectralData {
    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn is_defective(&self) -> bool {
        !(self.eigenvector_condition <= DEFECTIVE_CONDITION)
    }

    /// `τ_j = η |Υ_j / Im ε_j|`; `None` for poles within `1e-10` of the real axis.
    pub fn tau(&self, j: usize) -> Option<f64> {
        let im = self.poles[j].im;
        (im.abs() > 1e-10).then(|| self.eta * (self.weights[j] / im).norm())
    }

    /// `max Re ε - min Re ε`.
    pub fn spectral_span(&self) -> f64 {
        let (lo, hi) = self
            .poles
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.re), hi.max(p.re)));
        if self.poles.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }
}

/// Diagonalizes `H'` and extracts pole weights. Never fails; near-defective
/// samples are reported through `eigenvector_condition`.
pub fn spectral_decompose(h: &EffectiveHamiltonian) -> SpectralData {
    let eig = linalg::eigen(&h.h);
    let condition = linalg::condition_number(&eig.vectors);
    let (i, o) = (h.in_index, h.out_index);
    let mut poles = eig.values;
    let mut weights = Vec::with_capacity(poles.len());
    for (j, v) in eig.vectors.column_iter().enumerate() {
        // columns have unit Euclidean norm
        let leak = v[i].norm_sqr() + v[o].norm_sqr();
        poles[j].im = -h.eta * leak;
        let bilinear: Complex64 = v.iter().map(|z| z * z).sum();
        let w = 2.0 * v[i] * v[o] / bilinear;
        weights.push(if w.is_finite() { w } else { Complex64::new(f64::INFINITY, 0.0) });
    }
    SpectralData {
        poles,
        weights,
        eigenvector_condition: condition,
        eta: h.eta,
    }
}

/// `2η G_in,out(E) = η Σ_j Υ_j / (E - ε_j)`, skipping decoupled poles
/// (`|Υ_j| ≤ WEIGHT_FLOOR`).
pub fn amplitude_spectral(s: &SpectralData, energy: f64) -> Result<Complex64> {
    if s.is_defective() {
        return Err(Error::NearDefective {
            condition: s.eigenvector_condition,
        });
    }
    let sum: Complex64 = s
        .poles
        .iter()
        .zip(&s.weights)
        .filter(|(_, w)| w.norm() > WEIGHT_FLOOR)
        .map(|(&p, &w)| w / (energy - p))
        .sum();
    Ok(sum * s.eta)
}

/// `T(E) = η² |Σ_j Υ_j / (E - ε_j)|²`.
pub fn transmission_spectral(s: &SpectralData, energy: f64) -> Result<f64> {
    amplitude_spectral(s, energy).map(|a| a.norm_sqr())
}

/// `I = η² Σ_{i,j} Υ_i Ῡ_j 2πi / (ε̄_j - ε_i)`: the transmission integral
/// closed in the upper half plane.
pub fn current_residue(s: &SpectralData) -> Result<f64> {
    if s.is_defective() {
        return Err(Error::NearDefective {
            condition: s.eigenvector_condition,
        });
    }
    let live: Vec<usize> = (0..s.len()).filter(|&j| s.weights[j].norm() > WEIGHT_FLOOR).collect();
    for &j in &live {
        if s.poles[j].im >= -REAL_AXIS_GUARD {
            return Err(Error::IllConditionedResidue {
                reason: format!("pole {} with weight {:.3e} on the real axis", s.poles[j], s.weights[j].norm()),
            });
        }
    }
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let mut total = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for &a in &live {
        for &b in &live {
            let gap = s.poles[b].conj() - s.poles[a];
            if gap.norm() < REAL_AXIS_GUARD {
                return Err(Error::IllConditionedResidue {
                    reason: format!("poles {} and {} nearly coincide across the axis", s.poles[a], s.poles[b]),
                });
            }
            let term = s.weights[a] * s.weights[b].conj() * two_pi_i / gap;
            scale += term.norm();
            total += term;
        }
    }
    let current = total.re * s.eta * s.eta;
    let scale = scale * s.eta * s.eta;
    if current < -1e-9 * scale {
        return Err(Error::IllConditionedResidue {
            reason: format!("negative residue sum {current:.3e}"),
        });
    }
    Ok(current.max(0.0))
}

/// Breakpoints for the quadrature window: every resonance position, with
/// geometric refinement down to each pole's half-width.
fn quadrature_breaks(s: &SpectralData, lo: f64, hi: f64) -> Vec<f64> {
    let floor = 1e-3 * s.eta;
    let mut breaks = vec![lo, hi];
    for (p, w) in s.poles.iter().zip(&s.weights) {
        breaks.push(p.re);
        let width = p.im.abs().max(1e-14);
        let reach = 8.0 * width.max(floor);
        let mut d = if w.norm() > WEIGHT_FLOOR { width } else { width.max(floor) };
        while d <= reach {
            breaks.push(p.re - d);
            breaks.push(p.re + d);
            d *= 2.0;
        }
    }
    breaks.retain(|x| *x >= lo && *x <= hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks
}

/// Adaptive integration of [`transmission_at`] over
/// `[min Re ε - 50η, max Re ε + 50η]`, plus both semi-infinite tails.
pub fn current_quadrature(h: &EffectiveHamiltonian, s: &SpectralData, rel_tol: f64) -> Result<f64> {
    if !(rel_tol > 0.0 && rel_tol <= 1e-2) {
        return Err(Error::invalid("rel_tol", format!("{rel_tol} outside (0, 1e-2]")));
    }
    let (lo, hi) = s
        .poles
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.re), hi.max(p.re)));
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
    let margin = WINDOW_MARGIN * h.eta;
    let (lo, hi) = (lo - margin, hi + margin);
    let f = |e: f64| transmission_at(h, e);
    let breaks = quadrature_breaks(s, lo, hi);
    let middle = quadrature::integrate(f, &breaks, 0.5 * rel_tol, 0.0, MAX_PANELS)?;
    let tail_tol = 0.25 * rel_tol * middle.value.abs();
    let abs_floor = f64::MIN_POSITIVE;
    let right = quadrature::integrate_tail(f, hi, 1.0, margin, 0.0, tail_tol.max(abs_floor), MAX_PANELS)?;
    let left = quadrature::integrate_tail(f, lo, -1.0, margin, 0.0, tail_tol.max(abs_floor), MAX_PANELS)?;
    Ok(middle.value + right.value + left.value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurrentMethod {
    Residue,
    Quadrature,
}

/// Residue sum when it is well conditioned, adaptive quadrature otherwise.
pub fn total_current(h: &EffectiveHamiltonian, s: &SpectralData, rel_tol: f64) -> Result<(f64, CurrentMethod)> {
    match current_residue(s) {
        Ok(i) => Ok((i, CurrentMethod::Residue)),
        Err(Error::NearDefective { .. }) | Err(Error::IllConditionedResidue { .. }) => {
            current_quadrature(h, s, rel_tol).map(|i| (i, CurrentMethod::Quadrature))
        }
        Err(e) => Err(e),
    }
}

/// Real parts of the poles, ascending.
pub fn resonance_energies(s: &SpectralData) -> Vec<f64> {
    let mut e: Vec<f64> = s.poles.iter().map(|p| p.re).collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Transmission sampled on an energy grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionCurve {
    pub energies: Vec<f64>,
    pub values: Vec<f64>,
}

/// Evaluates `T` on `energies`, through the pole expansion when the sample
/// is well conditioned and by direct solves otherwise.
pub fn transmission_curve(h: &EffectiveHamiltonian, s: &SpectralData, energies: &[f64]) -> Result<TransmissionCurve> {
    let values = energies
        .iter()
        .map(|&e| {
            if s.is_defective() {
                transmission_at(h, e)
            } else {
                transmission_spectral(s, e)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransmissionCurve {
        energies: energies.to_vec(),
        values,
    })
}
