//! Invariant suite behind `egesim check`.

use ege_transport::ensemble::{commutator_max_norm, embed_hamiltonian, sample_coefficients, HamiltonianSample};
use ege_transport::fock::ManyBodyBasis;
use ege_transport::negf;
use ege_transport::oracle::FullFockOracle;
use ege_transport::seed;
use ege_transport::stats::{energy_grid, Cell, RunConfig, TAU_AXIS_EXCLUSION, UNITARITY_SLACK};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: &'static str,
    pub pass: bool,
    /// Worst measured value.
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub pass: bool,
    pub samples: u64,
    pub checks: Vec<CheckItem>,
}

impl CheckReport {
    pub fn get(&self, name: &str) -> Option<&CheckItem> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub samples: u64,
    pub oracle_draws: u64,
    /// Flips one sign of the exchange operator used for the commutator test.
    pub inject_sign_fault: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            samples: 100,
            oracle_draws: 50,
            inject_sign_fault: false,
        }
    }
}

fn at_most(name: &'static str, value: f64, tolerance: f64) -> CheckItem {
    CheckItem {
        name,
        pass: value <= tolerance,
        value,
        tolerance,
    }
}

/// Runs every exact identity on `samples` paired realizations of `config`,
/// plus the dimer values and the dense full-Fock comparison.
pub fn run_check(config: &RunConfig, opts: &CheckOptions) -> ege_transport::Result<CheckReport> {
    let cell = Cell::new(config)?;
    let grid = energy_grid(&cell)?;
    let eta = config.eta;
    let mut exchange = cell.sampler().exchange_n().clone();
    if opts.inject_sign_fault {
        exchange.corrupt_sign(0);
    }

    let (mut commutator, mut trace, mut im_high, mut im_low) = (0.0f64, 0.0f64, f64::NEG_INFINITY, 0.0f64);
    let (mut sum_rule, mut t_low, mut t_high, mut reflection) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut tau_deficit = 0.0f64;
    for i in 0..opts.samples {
        let (ege, csege) = cell.hamiltonians(i)?;
        commutator = commutator.max(commutator_max_norm(&csege.matrix, &exchange));
        for h in [&ege, &csege] {
            let eff = negf::attach_default_leads(h, eta)?;
            let neg = negf::attach_default_leads(
                &HamiltonianSample {
                    matrix: -&h.matrix,
                    ..h.clone()
                },
                eta,
            )?;
            let sd = negf::spectral_decompose(&eff);
            let t: f64 = sd.poles.iter().map(|p| p.im).sum();
            trace = trace.max((t + 2.0 * eta).abs() / (2.0 * eta));
            for p in &sd.poles {
                im_high = im_high.max(p.im);
                im_low = im_low.max(-eta - p.im);
            }
            let s: Complex64 = sd.weights.iter().sum();
            sum_rule = sum_rule.max(s.norm());
            for &e in &grid {
                let te = negf::transmission_at(&eff, e)?;
                t_low = t_low.max(-te);
                t_high = t_high.max(te - 1.0);
                let tr = negf::transmission_at(&neg, -e)?;
                reflection = reflection.max((te - tr).abs());
            }
            if h.centrosymmetric {
                for (p, w) in sd.poles.iter().zip(&sd.weights) {
                    if p.im.abs() > TAU_AXIS_EXCLUSION {
                        tau_deficit = tau_deficit.max(1.0 - eta * (w / p.im).norm());
                    }
                }
            }
        }
    }

    let mut checks = vec![
        at_most("commutator", commutator, 1e-12),
        at_most("trace_identity", trace, 1e-10),
        at_most("im_eps_upper", im_high, 1e-10),
        at_most("im_eps_lower", im_low, 1e-10),
        at_most("sum_rule", sum_rule, 1e-8),
        at_most("transmission_nonnegative", t_low, 0.0),
        at_most("transmission_unitarity", t_high, UNITARITY_SLACK),
        at_most("energy_reflection", reflection, 1e-12),
        at_most("csege_tau_deficit", tau_deficit, 1e-6),
    ];
    checks.extend(dimer_checks()?);
    checks.push(at_most("oracle_equivalence", oracle_deviation(opts.oracle_draws)?, 1e-12));
    Ok(CheckReport {
        pass: checks.iter().all(|c| c.pass),
        samples: opts.samples,
        checks,
    })
}

/// The two-site chain `[[0,1],[1,0]]` at `η = 1`.
pub fn dimer_checks() -> ege_transport::Result<Vec<CheckItem>> {
    let h = HamiltonianSample {
        matrix: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        l: 2,
        n: 1,
        k: 1,
        centrosymmetric: false,
        seed: None,
    };
    let eff = negf::attach_default_leads(&h, 1.0)?;
    let sd = negf::spectral_decompose(&eff);
    let mut pairs: Vec<(Complex64, Complex64)> = sd.poles.iter().cloned().zip(sd.weights.iter().cloned()).collect();
    pairs.sort_by(|a, b| a.0.re.total_cmp(&b.0.re));
    let pole_err = (pairs[0].0 - Complex64::new(-1.0, -1.0))
        .norm()
        .max((pairs[1].0 - Complex64::new(1.0, -1.0)).norm());
    // weights are ±1; which sign sits on which pole follows from the residues
    let weight_err = (pairs[0].1.norm() - 1.0)
        .abs()
        .max((pairs[1].1.norm() - 1.0).abs())
        .max((pairs[0].1 + pairs[1].1).norm())
        .max(pairs[0].1.im.abs());
    let t0 = (negf::transmission_at(&eff, 0.0)? - 1.0).abs();
    let (i, _) = negf::total_current(&eff, &sd, 1e-10)?;
    Ok(vec![
        at_most("dimer_poles", pole_err, 1e-9),
        at_most("dimer_weights", weight_err, 1e-9),
        at_most("dimer_t0", t0, 1e-9),
        at_most("dimer_current", (i - std::f64::consts::PI).abs(), 1e-9),
    ])
}

/// Largest entrywise gap between the bit-level embedding and the dense
/// full-Fock construction, over `l ∈ {3,4,5}`, every `(n, k)` and `draws`
/// random coefficient sets.
pub fn oracle_deviation(draws: u64) -> ege_transport::Result<f64> {
    let mut worst = 0.0f64;
    for l in 3..=5 {
        let oracle = FullFockOracle::new(l)?;
        for n in 1..l {
            let basis = ManyBodyBasis::enumerate(l, n)?;
            for k in 1..=n {
                for d in 0..draws {
                    let tag = ((l * 16 + n) * 16 + k) as u64;
                    let mut rng = seed::stream(seed::realization_seed(tag, d), seed::HAMILTONIAN_STREAM);
                    let v = sample_coefficients(&mut rng, l, k)?;
                    let ours = embed_hamiltonian(&v, &basis)?.matrix;
                    let dense = oracle.embed(v.values(), k, n)?;
                    worst = worst.max((ours - dense).amax());
                }
            }
        }
    }
    Ok(worst)
}
