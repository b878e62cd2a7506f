//! Seeded ensembles and the statistics drawn from them.
//!
//! Every realization index yields a paired EGE / csEGE sample derived from
//! one raw Gaussian draw. Realizations run in parallel (rayon) in fixed-size
//! chunks and are reduced strictly in index order, so a summary depends only
//! on the configuration and master seed.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{commutator_max_norm, CentroSampling, EnsembleSampler, HamiltonianSample};
use crate::error::{Error, Result};
use crate::negf::{self, CurrentMethod, EffectiveHamiltonian, SpectralData};
use crate::seed;

/// Slack allowed above `T = 1`.
pub const UNITARITY_SLACK: f64 = 1e-10;
/// Poles this close to the real axis are excluded from τ statistics.
pub const TAU_AXIS_EXCLUSION: f64 = 1e-10;
const CHUNK: u64 = 256;

/// Parameters of one ensemble cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub l: usize,
    pub n: usize,
    pub k: usize,
    pub eta: f64,
    pub ensemble_size: u64,
    pub master_seed: u64,
    pub centro_sampling: CentroSampling,
    pub random_energies_per_sample: usize,
    pub energy_grid_points: usize,
    pub rel_tol_current: f64,
    pub pilot_size: u64,
    pub histogram_bins: usize,
    pub mode_bins: usize,
    pub dimension_cap: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            l: 6,
            n: 5,
            k: 3,
            eta: 1.0,
            ensemble_size: 1000,
            master_seed: 0,
            centro_sampling: CentroSampling::Orbit,
            random_energies_per_sample: 10,
            energy_grid_points: 1001,
            rel_tol_current: 1e-6,
            pilot_size: 100,
            histogram_bins: 50,
            mode_bins: 100,
            dimension_cap: crate::fock::DEFAULT_DIMENSION_CAP,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l < 2 || self.l > crate::fock::MAX_MODES {
            return Err(Error::invalid("l", format!("{} outside 2..=64", self.l)));
        }
        if self.n < 1 || self.n >= self.l {
            return Err(Error::invalid("n", format!("{} outside 1..{}", self.n, self.l)));
        }
        if self.k < 1 || self.k > self.n {
            return Err(Error::invalid("k", format!("{} outside 1..={}", self.k, self.n)));
        }
        let dim = crate::fock::binomial(self.l, self.n).unwrap_or(u128::MAX);
        if dim > self.dimension_cap as u128 {
            return Err(Error::DimensionOverflow {
                dimension: dim,
                cap: self.dimension_cap,
            });
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid("eta", format!("must be positive, got {}", self.eta)));
        }
        if self.ensemble_size < 1 {
            return Err(Error::invalid("ensemble_size", "must be at least 1"));
        }
        if self.energy_grid_points < 2 {
            return Err(Error::invalid("energy_grid_points", "must be at least 2"));
        }
        if !(self.rel_tol_current > 0.0 && self.rel_tol_current <= 1e-2) {
            return Err(Error::invalid(
                "rel_tol_current",
                format!("{} outside (0, 1e-2]", self.rel_tol_current),
            ));
        }
        if self.histogram_bins < 1 {
            return Err(Error::invalid("histogram_bins", "must be at least 1"));
        }
        if self.mode_bins < 1 {
            return Err(Error::invalid("mode_bins", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Ege,
    Csege,
}

impl Flavor {
    pub fn name(self) -> &'static str {
        match self {
            Flavor::Ege => "ege",
            Flavor::Csege => "csege",
        }
    }
}

/// Everything retained from one realization of one flavor.
#[derive(Clone, Debug, PartialEq)]
pub struct RealizationRecord {
    pub index: u64,
    pub seed: u64,
    pub flavor: Flavor,
    pub current: f64,
    pub current_method: CurrentMethod,
    pub poles: Vec<Complex64>,
    pub weights: Vec<Complex64>,
    pub eigenvector_condition: f64,
    pub defective: bool,
    /// `T(Re ε_j)`, in pole order.
    pub t_at_resonance: Vec<f64>,
    /// `2η G_in,out(Re ε_j)`, in pole order.
    pub amplitude_at_resonance: Vec<Complex64>,
    pub random_energies: Vec<f64>,
    pub t_at_random: Vec<f64>,
    /// `max |[H, J_n]|`, recorded for the centrosymmetric flavor.
    pub commutator: Option<f64>,
}

impl RealizationRecord {
    pub fn eta_tau(&self, eta: f64, j: usize) -> Option<f64> {
        let im = self.poles[j].im;
        (im.abs() > TAU_AXIS_EXCLUSION).then(|| eta * (self.weights[j] / im).norm())
    }

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

/// A record together with the open system it was computed from.
#[derive(Clone, Debug)]
pub struct Realization {
    pub record: RealizationRecord,
    pub effective: EffectiveHamiltonian,
    pub spectral: SpectralData,
}

impl Realization {
    /// `T(E)` through the pole expansion, or direct solves for near-defective samples.
    pub fn transmission(&self, energy: f64) -> Result<f64> {
        if self.spectral.is_defective() {
            negf::transmission_at(&self.effective, energy)
        } else {
            negf::transmission_spectral(&self.spectral, energy)
        }
    }

    pub fn amplitude(&self, energy: f64) -> Result<Complex64> {
        if self.spectral.is_defective() {
            negf::green_in_out(&self.effective, energy).map(|g| 2.0 * self.effective.eta() * g)
        } else {
            negf::amplitude_spectral(&self.spectral, energy)
        }
    }

    pub fn transmission_curve(&self, grid: &[f64]) -> Result<Vec<f64>> {
        grid.iter().map(|&e| self.transmission(e)).collect()
    }
}

/// Prebuilt sampler for one configuration.
pub struct Cell {
    config: RunConfig,
    sampler: EnsembleSampler,
}

impl Cell {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let sampler = EnsembleSampler::with_cap(
            config.l,
            config.n,
            config.k,
            config.centro_sampling,
            config.dimension_cap,
        )?;
        Ok(Cell {
            config: config.clone(),
            sampler,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn sampler(&self) -> &EnsembleSampler {
        &self.sampler
    }

    /// Both flavors' Hamiltonians for realization `index`.
    pub fn hamiltonians(&self, index: u64) -> Result<(HamiltonianSample, HamiltonianSample)> {
        let child = seed::realization_seed(self.config.master_seed, index);
        let mut rng = seed::stream(child, seed::HAMILTONIAN_STREAM);
        let mut pair = self.sampler.sample_pair(&mut rng)?;
        pair.ege.seed = Some(child);
        pair.csege.seed = Some(child);
        Ok((pair.ege, pair.csege))
    }

    fn spectra(&self, index: u64) -> Result<(SpectralData, SpectralData)> {
        let (ege, csege) = self.hamiltonians(index)?;
        let a = negf::attach_default_leads(&ege, self.config.eta)?;
        let b = negf::attach_default_leads(&csege, self.config.eta)?;
        Ok((negf::spectral_decompose(&a), negf::spectral_decompose(&b)))
    }

    fn evaluate(&self, index: u64, flavor: Flavor, sample: &HamiltonianSample) -> Result<Realization> {
        let cfg = &self.config;
        let child = sample.seed.unwrap_or_default();
        let effective = negf::attach_default_leads(sample, cfg.eta)?;
        let spectral = negf::spectral_decompose(&effective);
        let (current, current_method) = negf::total_current(&effective, &spectral, cfg.rel_tol_current)?;
        let commutator = sample
            .centrosymmetric
            .then(|| commutator_max_norm(&sample.matrix, self.sampler.exchange_n()));
        let mut realization = Realization {
            record: RealizationRecord {
                index,
                seed: child,
                flavor,
                current,
                current_method,
                poles: spectral.poles.clone(),
                weights: spectral.weights.clone(),
                eigenvector_condition: spectral.eigenvector_condition,
                defective: spectral.is_defective(),
                t_at_resonance: Vec::new(),
                amplitude_at_resonance: Vec::new(),
                random_energies: Vec::new(),
                t_at_random: Vec::new(),
                commutator,
            },
            effective,
            spectral,
        };
        let amplitudes = realization
            .spectral
            .poles
            .iter()
            .map(|p| realization.amplitude(p.re))
            .collect::<Result<Vec<_>>>()?;
        realization.record.t_at_resonance = amplitudes.iter().map(|a| a.norm_sqr()).collect();
        realization.record.amplitude_at_resonance = amplitudes;

        let (lo, hi) = band_of(&realization.spectral);
        let mut rng = seed::stream(child, seed::ENERGY_STREAM);
        let energies: Vec<f64> = (0..cfg.random_energies_per_sample)
            .map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo })
            .collect();
        realization.record.t_at_random = energies
            .iter()
            .map(|&e| realization.transmission(e))
            .collect::<Result<Vec<_>>>()?;
        realization.record.random_energies = energies;
        Ok(realization)
    }

    /// EGE and csEGE realizations for one index.
    pub fn realize(&self, index: u64) -> Result<(Realization, Realization)> {
        let wrap = |e: Error| Error::Realization {
            index,
            source: Box::new(e),
        };
        let (ege, csege) = self.hamiltonians(index).map_err(wrap)?;
        let a = self.evaluate(index, Flavor::Ege, &ege).map_err(wrap)?;
        let b = self.evaluate(index, Flavor::Csege, &csege).map_err(wrap)?;
        Ok((a, b))
    }
}

fn band_of(s: &SpectralData) -> (f64, f64) {
    let lo = s.poles.iter().map(|p| p.re).fold(f64::INFINITY, f64::min);
    let hi = s.poles.iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Paired records for realization `index`.
pub fn run_realization(config: &RunConfig, index: u64) -> Result<(RealizationRecord, RealizationRecord)> {
    let (a, b) = Cell::new(config)?.realize(index)?;
    Ok((a.record, b.record))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Count,
    Density,
}

/// Fixed-edge histogram. Values outside the edges are tallied separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub normalization: Normalization,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Self {
        let bins = bins.max(1);
        let hi = if hi > lo { hi } else { lo + 1.0 };
        let mut edges: Vec<f64> = (0..=bins)
            .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
            .collect();
        // the maximum must land in the top bin, not in overflow
        edges[bins] = hi;
        Histogram {
            edges,
            counts: vec![0; bins],
            normalization: Normalization::Count,
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    /// Bins are half-open `[a, b)` except the last, which is closed.
    pub fn add(&mut self, x: f64) {
        let lo = self.edges[0];
        let hi = *self.edges.last().expect("edges");
        if !(x >= lo) {
            self.underflow += 1;
        } else if x > hi {
            self.overflow += 1;
        } else {
            let bins = self.bins();
            let i = (((x - lo) / (hi - lo)) * bins as f64) as usize;
            self.counts[i.min(bins - 1)] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Count per bin divided by `total · width`.
    pub fn densities(&self) -> Vec<f64> {
        let norm = self.total() as f64 * self.bin_width();
        self.counts
            .iter()
            .map(|&c| if norm > 0.0 { c as f64 / norm } else { 0.0 })
            .collect()
    }

    pub fn fraction(&self, bin: usize) -> f64 {
        let t = self.total();
        if t == 0 {
            0.0
        } else {
            self.counts[bin] as f64 / t as f64
        }
    }
}

/// Pointwise mean and standard error of curves on a shared grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedCurve {
    pub energies: Vec<f64>,
    pub mean: Vec<f64>,
    pub sem: Vec<f64>,
}

/// Welford accumulator over equal-length curves.
#[derive(Clone, Debug)]
pub struct CurveAccumulator {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl CurveAccumulator {
    pub fn new(points: usize) -> Self {
        CurveAccumulator {
            count: 0,
            mean: vec![0.0; points],
            m2: vec![0.0; points],
        }
    }

    pub fn push(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: values.len(),
            });
        }
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(values) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(&self, energies: &[f64]) -> Result<AveragedCurve> {
        if self.count == 0 {
            return Err(Error::EmptyInput("no curves to average"));
        }
        let n = self.count as f64;
        let sem = self
            .m2
            .iter()
            .map(|&s| if self.count > 1 { (s / (n - 1.0) / n).sqrt() } else { 0.0 })
            .collect();
        Ok(AveragedCurve {
            energies: energies.to_vec(),
            mean: self.mean.clone(),
            sem,
        })
    }
}

/// Ensemble-averaged transmission of `realizations` on `grid`.
pub fn averaged_transmission<'a, I>(realizations: I, grid: &[f64]) -> Result<AveragedCurve>
where
    I: IntoIterator<Item = &'a Realization>,
{
    let mut acc = CurveAccumulator::new(grid.len());
    for r in realizations {
        acc.push(&r.transmission_curve(grid)?)?;
    }
    acc.finish(grid)
}

/// Mean and standard error of the mean.
pub fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Minimum number of samples for a mode estimate.
pub const MODE_MIN_SAMPLES: usize = 100;

/// Center of the tallest of `bins` equal bins on `[0, upper]`, and the bin
/// width. Ties resolve to the lowest bin.
pub fn current_mode(currents: &[f64], bins: usize, upper: f64) -> Result<(f64, f64)> {
    if currents.len() < MODE_MIN_SAMPLES {
        return Err(Error::invalid(
            "records",
            format!("mode needs at least {MODE_MIN_SAMPLES} samples, got {}", currents.len()),
        ));
    }
    let upper = if upper > 0.0 {
        upper
    } else {
        currents.iter().cloned().fold(0.0, f64::max)
    };
    if upper == 0.0 {
        // every current is zero
        return Ok((0.0, 0.0));
    }
    let mut h = Histogram::uniform(0.0, upper, bins);
    currents.iter().for_each(|&c| h.add(c));
    let best = h
        .counts
        .iter()
        .enumerate()
        .fold((0, 0), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc });
    Ok((h.centers()[best.0], h.bin_width()))
}

/// Transmission histogram on `[0, 1]`; values in the unitarity slack above
/// one land in the top bin.
fn transmission_histogram<'a>(values: impl Iterator<Item = &'a f64>, bins: usize) -> Histogram {
    let mut h = Histogram::uniform(0.0, 1.0, bins);
    for &t in values {
        h.add(if t > 1.0 && t <= 1.0 + UNITARITY_SLACK { 1.0 } else { t });
    }
    h
}

/// Histogram of `T(Re ε_j)` over all poles of all records.
pub fn resonance_transmission_stats(records: &[RealizationRecord], bins: usize) -> Histogram {
    transmission_histogram(records.iter().flat_map(|r| r.t_at_resonance.iter()), bins)
}

/// Histogram of `T` at the per-record random energies.
pub fn random_energy_transmission_stats(records: &[RealizationRecord], bins: usize) -> Histogram {
    transmission_histogram(records.iter().flat_map(|r| r.t_at_random.iter()), bins)
}

/// `2η G_in,out(Re ε_j)` over all poles of all records.
pub fn scatter_green(records: &[RealizationRecord]) -> Vec<Complex64> {
    records
        .iter()
        .flat_map(|r| r.amplitude_at_resonance.iter().cloned())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauStatistics {
    pub histogram: Histogram,
    pub count: u64,
    /// Poles with `|Im ε| ≤ 1e-10`, left out of the histogram.
    pub excluded: u64,
    pub min: f64,
    pub max: f64,
    pub fraction_below_one: f64,
}

/// Distribution of `τ_j = η |Υ_j / Im ε_j|`; the histogram spans `[0, 3]`
/// with larger values counted as overflow.
pub fn tau_statistics(records: &[RealizationRecord], eta: f64, bins: usize) -> TauStatistics {
    let mut h = Histogram::uniform(0.0, 3.0, bins);
    let (mut count, mut excluded, mut below) = (0u64, 0u64, 0u64);
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in records {
        for j in 0..r.poles.len() {
            match r.eta_tau(eta, j) {
                Some(t) => {
                    h.add(t);
                    count += 1;
                    min = min.min(t);
                    max = max.max(t);
                    if t < 1.0 {
                        below += 1;
                    }
                }
                None => excluded += 1,
            }
        }
    }
    TauStatistics {
        histogram: h,
        count,
        excluded,
        min,
        max,
        fraction_below_one: if count > 0 { below as f64 / count as f64 } else { f64::NAN },
    }
}

/// Two-sample comparison of current distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleHoleReport {
    pub mean_a: f64,
    pub mean_b: f64,
    pub pooled_sem: f64,
    /// Mean difference in units of the pooled standard error.
    pub z: f64,
    /// Kolmogorov–Smirnov distance between the empirical distributions.
    pub ks_distance: f64,
    pub ks_p_value: f64,
    pub z_threshold: f64,
    pub ks_alpha: f64,
    pub means_agree: bool,
    pub distributions_agree: bool,
}

impl ParticleHoleReport {
    pub fn pass(&self) -> bool {
        self.means_agree && self.distributions_agree
    }
}

fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Asymptotic Kolmogorov distribution tail `Q(λ)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Compares two cells that should be related by particle–hole symmetry.
pub fn particle_hole_check(
    a: &EnsembleSummary,
    b: &EnsembleSummary,
    z_threshold: f64,
    ks_alpha: f64,
) -> Result<ParticleHoleReport> {
    if a.l != b.l {
        return Err(Error::invalid("l", format!("summaries use l={} and l={}", a.l, b.l)));
    }
    Ok(compare_samples(&a.currents, &b.currents, z_threshold, ks_alpha))
}

/// Mean-difference z score plus Kolmogorov–Smirnov test.
pub fn compare_samples(a: &[f64], b: &[f64], z_threshold: f64, ks_alpha: f64) -> ParticleHoleReport {
    let (ma, sa) = mean_sem(a);
    let (mb, sb) = mean_sem(b);
    let pooled = (sa * sa + sb * sb).sqrt();
    let z = if pooled > 0.0 {
        (ma - mb) / pooled
    } else if ma == mb {
        0.0
    } else {
        f64::INFINITY
    };
    let d = ks_distance(a, b);
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let p = kolmogorov_q((ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d);
    ParticleHoleReport {
        mean_a: ma,
        mean_b: mb,
        pooled_sem: pooled,
        z,
        ks_distance: d,
        ks_p_value: p,
        z_threshold,
        ks_alpha,
        means_agree: z.abs() <= z_threshold,
        distributions_agree: p >= ks_alpha,
    }
}

/// Aggregates for one flavor of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub flavor: Flavor,
    pub l: usize,
    pub n: usize,
    pub k: usize,
    pub count: u64,
    pub mean_current: f64,
    pub sem: f64,
    /// `None` below the minimum sample count.
    pub mode: Option<f64>,
    pub bin_width: Option<f64>,
    pub band_halfwidth: f64,
    pub defective_count: u64,
    pub quadrature_count: u64,
    pub spectral_span_mean: f64,
    pub spectral_span_sem: f64,
    pub transmission: AveragedCurve,
    pub currents: Vec<f64>,
    pub re_eps: Histogram,
    pub im_eps: Histogram,
    pub abs_upsilon: Histogram,
    pub tau: TauStatistics,
    pub t_at_resonance: Histogram,
    pub t_at_random: Histogram,
    /// `2η G_in,out(Re ε_j)` as `[re, im]`, record order then pole order.
    pub scatter: Vec<[f64; 2]>,
    /// Fraction of `T(Re ε_j)` in the top transmission bin.
    pub perfect_resonance_fraction: f64,
    pub perfect_random_fraction: f64,
    /// Fraction of `|2η G(Re ε_j)| > 0.9`.
    pub boundary_fraction: f64,
    /// Fraction of poles with `|Υ_j| ≥ |Im ε_j|/η - 1e-6`.
    pub upsilon_above_line: f64,
    /// Fraction of poles with `|Υ_j| ≤ |Im ε_j|/η + 1e-6`.
    pub upsilon_below_line: f64,
}

/// Exact-identity diagnostics gathered while running an ensemble.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub max_commutator: f64,
    pub max_trace_deviation: f64,
    pub max_sum_rule: f64,
    pub min_im_eps_plus_eta: f64,
    pub max_im_eps: f64,
    pub max_transmission: f64,
    pub min_tau_csege: f64,
}

impl InvariantReport {
    fn new() -> Self {
        InvariantReport {
            max_commutator: 0.0,
            max_trace_deviation: 0.0,
            max_sum_rule: 0.0,
            min_im_eps_plus_eta: f64::INFINITY,
            max_im_eps: f64::NEG_INFINITY,
            max_transmission: 0.0,
            min_tau_csege: f64::INFINITY,
        }
    }

    fn absorb(&mut self, r: &RealizationRecord, eta: f64, grid_max: f64) {
        if let Some(c) = r.commutator {
            self.max_commutator = self.max_commutator.max(c);
        }
        let trace: f64 = r.poles.iter().map(|p| p.im).sum();
        self.max_trace_deviation = self
            .max_trace_deviation
            .max((trace + 2.0 * eta).abs() / (2.0 * eta));
        let sum: Complex64 = r.weights.iter().sum();
        self.max_sum_rule = self.max_sum_rule.max(sum.norm());
        for p in &r.poles {
            self.min_im_eps_plus_eta = self.min_im_eps_plus_eta.min(p.im + eta);
            self.max_im_eps = self.max_im_eps.max(p.im);
        }
        let t_max = r
            .t_at_resonance
            .iter()
            .chain(&r.t_at_random)
            .cloned()
            .fold(grid_max, f64::max);
        self.max_transmission = self.max_transmission.max(t_max);
        if r.flavor == Flavor::Csege {
            for j in 0..r.poles.len() {
                if let Some(t) = r.eta_tau(eta, j) {
                    self.min_tau_csege = self.min_tau_csege.min(t);
                }
            }
        }
    }

    /// Checks every identity at the acceptance tolerances.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.max_commutator > 1e-12 {
            v.push(format!("commutator {:.3e} > 1e-12", self.max_commutator));
        }
        if self.max_trace_deviation > 1e-10 {
            v.push(format!("trace deviation {:.3e} > 1e-10", self.max_trace_deviation));
        }
        if self.max_sum_rule > 1e-8 {
            v.push(format!("sum rule {:.3e} > 1e-8", self.max_sum_rule));
        }
        if self.min_im_eps_plus_eta < -1e-10 {
            v.push(format!("Im ε below -η by {:.3e}", -self.min_im_eps_plus_eta));
        }
        if self.max_im_eps > 1e-10 {
            v.push(format!("Im ε above 0 by {:.3e}", self.max_im_eps));
        }
        if self.max_transmission > 1.0 + UNITARITY_SLACK {
            v.push(format!("transmission {:.12} > 1", self.max_transmission));
        }
        v
    }
}

/// Result of [`run_ensemble`].
#[derive(Clone, Debug)]
pub struct EnsembleOutcome {
    pub config: RunConfig,
    pub grid: Vec<f64>,
    pub ege: EnsembleSummary,
    pub csege: EnsembleSummary,
    pub records: Vec<(RealizationRecord, RealizationRecord)>,
    pub invariants: InvariantReport,
}

impl EnsembleOutcome {
    pub fn summary(&self, flavor: Flavor) -> &EnsembleSummary {
        match flavor {
            Flavor::Ege => &self.ege,
            Flavor::Csege => &self.csege,
        }
    }
}

/// Symmetric grid `[-E_max, E_max]` with `E_max` = largest `|Re ε|` seen in
/// the pilot realizations plus `5η`.
pub fn energy_grid(cell: &Cell) -> Result<Vec<f64>> {
    let cfg = cell.config();
    let pilot = cfg.pilot_size.clamp(1, cfg.ensemble_size);
    let spectra = (0..pilot)
        .into_par_iter()
        .map(|i| {
            cell.spectra(i).map_err(|e| Error::Realization {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reach = spectra
        .iter()
        .flat_map(|(a, b)| a.poles.iter().chain(&b.poles))
        .map(|p| p.re.abs())
        .fold(0.0, f64::max);
    let e_max = reach + 5.0 * cfg.eta;
    let m = cfg.energy_grid_points;
    // exactly antisymmetric: grid[i] == -grid[m-1-i]
    let half = (m - 1) as f64;
    Ok((0..m)
        .map(|i| e_max * (2.0 * i as f64 - half) / half)
        .collect())
}

struct FlavorAccumulator {
    flavor: Flavor,
    curve: CurveAccumulator,
    records: Vec<RealizationRecord>,
}

impl FlavorAccumulator {
    fn finish(self, cfg: &RunConfig, grid: &[f64], mode_upper: f64) -> Result<EnsembleSummary> {
        let transmission = self.curve.finish(grid)?;
        let currents: Vec<f64> = self.records.iter().map(|r| r.current).collect();
        let (mean_current, sem) = mean_sem(&currents);
        let (mode, bin_width) = if currents.len() >= MODE_MIN_SAMPLES {
            let (m, w) = current_mode(&currents, cfg.mode_bins, mode_upper)?;
            (Some(m), Some(w))
        } else {
            (None, None)
        };
        let band: Vec<f64> = transmission
            .energies
            .iter()
            .zip(&transmission.mean)
            .filter(|(_, &t)| t >= 0.01)
            .map(|(&e, _)| e)
            .collect();
        let band_halfwidth = match (band.first(), band.last()) {
            (Some(lo), Some(hi)) => 0.5 * (hi - lo),
            _ => 0.0,
        };
        let spans: Vec<f64> = self.records.iter().map(|r| r.spectral_span()).collect();
        let (spectral_span_mean, spectral_span_sem) = mean_sem(&spans);
        let bins = cfg.histogram_bins;
        let e_max = grid.last().cloned().unwrap_or(1.0);
        let mut re_eps = Histogram::uniform(-e_max, e_max, bins);
        let mut im_eps = Histogram::uniform(-cfg.eta, 0.0, bins);
        let ups_max = self
            .records
            .iter()
            .flat_map(|r| r.weights.iter().map(|w| w.norm()))
            .fold(0.0, f64::max);
        let mut abs_upsilon = Histogram::uniform(0.0, ups_max.max(f64::MIN_POSITIVE), bins);
        let (mut above, mut below, mut poles) = (0u64, 0u64, 0u64);
        for r in &self.records {
            for (p, w) in r.poles.iter().zip(&r.weights) {
                re_eps.add(p.re);
                // clamp rounding-level excursions past the exact bounds
                im_eps.add(p.im.clamp(-cfg.eta, 0.0));
                abs_upsilon.add(w.norm());
                let line = p.im.abs() / cfg.eta;
                poles += 1;
                if w.norm() >= line - 1e-6 {
                    above += 1;
                }
                if w.norm() <= line + 1e-6 {
                    below += 1;
                }
            }
        }
        let t_at_resonance = resonance_transmission_stats(&self.records, bins);
        let t_at_random = random_energy_transmission_stats(&self.records, bins);
        let amplitudes = scatter_green(&self.records);
        let boundary = amplitudes.iter().filter(|a| a.norm() > 0.9).count();
        let frac = |a: u64, b: u64| if b > 0 { a as f64 / b as f64 } else { f64::NAN };
        Ok(EnsembleSummary {
            flavor: self.flavor,
            l: cfg.l,
            n: cfg.n,
            k: cfg.k,
            count: self.records.len() as u64,
            mean_current,
            sem,
            mode,
            bin_width,
            band_halfwidth,
            defective_count: self.records.iter().filter(|r| r.defective).count() as u64,
            quadrature_count: self
                .records
                .iter()
                .filter(|r| r.current_method == CurrentMethod::Quadrature)
                .count() as u64,
            spectral_span_mean,
            spectral_span_sem,
            transmission,
            currents,
            re_eps,
            im_eps,
            abs_upsilon,
            tau: tau_statistics(&self.records, cfg.eta, bins),
            perfect_resonance_fraction: t_at_resonance.fraction(t_at_resonance.bins() - 1),
            perfect_random_fraction: t_at_random.fraction(t_at_random.bins() - 1),
            t_at_resonance,
            t_at_random,
            boundary_fraction: frac(boundary as u64, amplitudes.len() as u64),
            scatter: amplitudes.iter().map(|a| [a.re, a.im]).collect(),
            upsilon_above_line: frac(above, poles),
            upsilon_below_line: frac(below, poles),
        })
    }
}

/// Runs `config.ensemble_size` paired realizations and aggregates them.
pub fn run_ensemble(config: &RunConfig) -> Result<EnsembleOutcome> {
    let cell = Cell::new(config)?;
    let grid = energy_grid(&cell)?;
    let new_acc = |flavor| FlavorAccumulator {
        flavor,
        curve: CurveAccumulator::new(grid.len()),
        records: Vec::with_capacity(config.ensemble_size as usize),
    };
    let mut ege = new_acc(Flavor::Ege);
    let mut csege = new_acc(Flavor::Csege);
    let mut invariants = InvariantReport::new();

    let mut start = 0;
    while start < config.ensemble_size {
        let end = (start + CHUNK).min(config.ensemble_size);
        let chunk = (start..end)
            .into_par_iter()
            .map(|i| {
                let (a, b) = cell.realize(i)?;
                let wrap = |e: Error| Error::Realization {
                    index: i,
                    source: Box::new(e),
                };
                let ca = a.transmission_curve(&grid).map_err(wrap)?;
                let cb = b.transmission_curve(&grid).map_err(wrap)?;
                Ok(((a.record, ca), (b.record, cb)))
            })
            .collect::<Result<Vec<_>>>()?;
        for ((ra, ca), (rb, cb)) in chunk {
            for (acc, record, curve) in [(&mut ege, ra, ca), (&mut csege, rb, cb)] {
                let grid_max = curve.iter().cloned().fold(0.0, f64::max);
                invariants.absorb(&record, config.eta, grid_max);
                acc.curve.push(&curve)?;
                acc.records.push(record);
            }
        }
        start = end;
    }

    let mode_upper = ege
        .records
        .iter()
        .chain(&csege.records)
        .map(|r| r.current)
        .fold(0.0, f64::max);
    let records: Vec<(RealizationRecord, RealizationRecord)> = ege
        .records
        .iter()
        .cloned()
        .zip(csege.records.iter().cloned())
        .collect();
    let ege = ege.finish(config, &grid, mode_upper)?;
    let csege = csege.finish(config, &grid, mode_upper)?;
    Ok(EnsembleOutcome {
        config: config.clone(),
        grid,
        ege,
        csege,
        records,
        invariants,
    })
}
