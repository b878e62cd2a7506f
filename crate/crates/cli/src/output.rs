//! Result files. CSV numbers carry 17 significant digits.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use ege_transport::stats::{EnsembleOutcome, EnsembleSummary, Flavor, RealizationRecord};
use serde_json::{json, Value};

use crate::config::{JobConfig, SweepConfig};

pub const SUMMARY: &str = "summary.json";
pub const TRANSMISSION: &str = "transmission_avg.csv";
pub const CURRENTS: &str = "currents.csv";
pub const SPECTRAL: &str = "spectral.csv";
pub const GRID_SUMMARY: &str = "grid_summary.json";

pub const TRANSMISSION_HEADER: &str = "energy,t_mean_ege,t_sem_ege,t_mean_csege,t_sem_csege";
pub const CURRENTS_HEADER: &str = "index,seed,current_ege,current_csege";
pub const SPECTRAL_HEADER: &str = "index,flavor,j,re_eps,im_eps,re_ups,im_ups,tau,t_at_res";

/// `{:.16e}`, with `NaN` spelled out.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn flavor_json(s: &EnsembleSummary) -> Value {
    json!({
        "mean_current": s.mean_current,
        "sem": s.sem,
        "mode": s.mode,
        "bin_width": s.bin_width,
        "band_halfwidth": s.band_halfwidth,
        "defective_count": s.defective_count,
        "count": s.count,
        "quadrature_count": s.quadrature_count,
        "spectral_span_mean": s.spectral_span_mean,
        "spectral_span_sem": s.spectral_span_sem,
        "perfect_resonance_fraction": s.perfect_resonance_fraction,
        "perfect_random_fraction": s.perfect_random_fraction,
        "boundary_fraction": s.boundary_fraction,
        "upsilon_above_line": s.upsilon_above_line,
        "upsilon_below_line": s.upsilon_below_line,
        "tau": {
            "count": s.tau.count,
            "excluded": s.tau.excluded,
            "min": s.tau.min,
            "max": s.tau.max,
            "fraction_below_one": s.tau.fraction_below_one,
            "histogram": s.tau.histogram,
        },
        "histograms": {
            "re_eps": s.re_eps,
            "im_eps": s.im_eps,
            "abs_upsilon": s.abs_upsilon,
            "t_at_resonance": s.t_at_resonance,
            "t_at_random": s.t_at_random,
        },
        "scatter_green": s.scatter,
    })
}

pub fn summary_json(job: &JobConfig, out: &EnsembleOutcome) -> Value {
    json!({
        "config": job.to_json(),
        "flavor_summaries": {
            "ege": flavor_json(&out.ege),
            "csege": flavor_json(&out.csege),
        },
        "invariant_report": {
            "max_commutator": out.invariants.max_commutator,
            "max_trace_deviation": out.invariants.max_trace_deviation,
            "max_sum_rule": out.invariants.max_sum_rule,
            "min_im_eps_plus_eta": out.invariants.min_im_eps_plus_eta,
            "max_im_eps": out.invariants.max_im_eps,
            "max_transmission": out.invariants.max_transmission,
            "min_tau_csege": out.invariants.min_tau_csege,
            "violations": out.invariants.violations(),
        },
    })
}

fn create(dir: &Path, name: &str) -> io::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

pub fn write_transmission(w: &mut impl Write, out: &EnsembleOutcome) -> io::Result<()> {
    writeln!(w, "{TRANSMISSION_HEADER}")?;
    let (a, b) = (&out.ege.transmission, &out.csege.transmission);
    for (i, e) in out.grid.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            num(*e),
            num(a.mean[i]),
            num(a.sem[i]),
            num(b.mean[i]),
            num(b.sem[i])
        )?;
    }
    Ok(())
}

pub fn write_currents(w: &mut impl Write, out: &EnsembleOutcome) -> io::Result<()> {
    writeln!(w, "{CURRENTS_HEADER}")?;
    for (a, b) in &out.records {
        writeln!(w, "{},{},{},{}", a.index, a.seed, num(a.current), num(b.current))?;
    }
    Ok(())
}

fn spectral_rows(w: &mut impl Write, r: &RealizationRecord, eta: f64) -> io::Result<()> {
    let flavor = r.flavor.name();
    for (j, (p, u)) in r.poles.iter().zip(&r.weights).enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.index,
            flavor,
            j + 1,
            num(p.re),
            num(p.im),
            num(u.re),
            num(u.im),
            num(r.eta_tau(eta, j).unwrap_or(f64::NAN)),
            num(r.t_at_resonance[j])
        )?;
    }
    Ok(())
}

pub fn write_spectral(w: &mut impl Write, out: &EnsembleOutcome) -> io::Result<()> {
    writeln!(w, "{SPECTRAL_HEADER}")?;
    for (a, b) in &out.records {
        spectral_rows(w, a, out.config.eta)?;
        spectral_rows(w, b, out.config.eta)?;
    }
    Ok(())
}

/// Writes the four result files of one job into `job.output_dir`.
pub fn write_run(job: &JobConfig, out: &EnsembleOutcome) -> io::Result<()> {
    let dir = &job.output_dir;
    fs::create_dir_all(dir)?;
    let mut f = create(dir, SUMMARY)?;
    serde_json::to_writer_pretty(&mut f, &summary_json(job, out))?;
    writeln!(f)?;
    f.flush()?;
    let mut f = create(dir, TRANSMISSION)?;
    write_transmission(&mut f, out)?;
    f.flush()?;
    let mut f = create(dir, CURRENTS)?;
    write_currents(&mut f, out)?;
    f.flush()?;
    let mut f = create(dir, SPECTRAL)?;
    write_spectral(&mut f, out)?;
    f.flush()
}

fn cell_entry(s: &EnsembleSummary) -> Value {
    json!({
        "mean_current": s.mean_current,
        "sem": s.sem,
        "mode": s.mode,
        "bin_width": s.bin_width,
        "band_halfwidth": s.band_halfwidth,
        "spectral_span_mean": s.spectral_span_mean,
        "spectral_span_sem": s.spectral_span_sem,
    })
}

fn argmax(outcomes: &[EnsembleOutcome], flavor: Flavor) -> Value {
    outcomes
        .iter()
        .map(|o| o.summary(flavor))
        .max_by(|a, b| a.mean_current.total_cmp(&b.mean_current))
        .map(|s| json!({ "n": s.n, "k": s.k, "mean_current": s.mean_current }))
        .unwrap_or(Value::Null)
}

pub fn grid_summary_json(sweep: &SweepConfig, outcomes: &[EnsembleOutcome]) -> Value {
    let cells: Vec<Value> = outcomes
        .iter()
        .map(|o| {
            json!({
                "n": o.config.n,
                "k": o.config.k,
                "ege": cell_entry(&o.ege),
                "csege": cell_entry(&o.csege),
            })
        })
        .collect();
    json!({
        "l": sweep.l,
        "cells": cells,
        "max_mean_current": {
            "ege": argmax(outcomes, Flavor::Ege),
            "csege": argmax(outcomes, Flavor::Csege),
        },
    })
}

pub fn write_grid_summary(sweep: &SweepConfig, outcomes: &[EnsembleOutcome]) -> io::Result<()> {
    fs::create_dir_all(&sweep.output_dir)?;
    let mut f = create(&sweep.output_dir, GRID_SUMMARY)?;
    serde_json::to_writer_pretty(&mut f, &grid_summary_json(sweep, outcomes))?;
    writeln!(f)?;
    f.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(1.0), "1.0000000000000000e0");
        assert_eq!(num(-0.1), "-1.0000000000000001e-1");
        assert_eq!(num(f64::NAN), "NaN");
        for x in [std::f64::consts::PI, 1e-300, -123456.789] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
