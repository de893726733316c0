//! Plain-text serialization of run artifacts: CSV tables and JSON
//! replay documents. Floats are written with Rust's shortest
//! round-trip formatting so identical runs produce byte-identical
//! files.

use std::io::Write;

use crate::error::Result;
use crate::front_speed::FrontSpeedResult;
use crate::ipm::{MuTrace, ParticleEnsemble};
use crate::stats::{Histogram, MomentSeries};

/// Per-mutation PFGR trace: columns generation, mutation, pfgr.
pub fn write_mu_trace_csv(w: &mut impl Write, trace: &MuTrace) -> Result<()> {
    writeln!(w, "generation,mutation,pfgr")?;
    let h = trace.n_mutations;
    for (k, pfgr) in trace.per_mutation_pfgr.iter().enumerate() {
        writeln!(w, "{},{},{}", k / h, k % h, pfgr)?;
    }
    Ok(())
}

/// Final ensemble snapshot, one row per particle. When `wrap_period` is
/// given, positions are mapped into [0, period) per coordinate for
/// visualization.
pub fn write_ensemble_csv(
    w: &mut impl Write,
    ens: &ParticleEnsemble,
    wrap_period: Option<f64>,
) -> Result<()> {
    let d = ens.dim();
    let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    writeln!(w, "{}", header.join(","))?;
    let mut row = String::new();
    for l in 0..ens.len() {
        row.clear();
        for (i, &x) in ens.position(l).iter().enumerate() {
            if i > 0 {
                row.push(',');
            }
            let v = match wrap_period {
                Some(p) => x.rem_euclid(p),
                None => x,
            };
            row.push_str(&format!("{v}"));
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Front-speed sample table: one row per evaluated (lambda, e) pair.
pub fn write_samples_csv(
    w: &mut impl Write,
    rows: &[(f64, u64, &FrontSpeedResult)],
    dim: usize,
) -> Result<()> {
    let es: Vec<String> = (1..=dim).map(|i| format!("e{i}")).collect();
    writeln!(w, "delta,seed,lambda,{},mu,ratio", es.join(","))?;
    for (delta, seed, result) in rows {
        for s in &result.samples {
            let e = s.e.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(",");
            writeln!(w, "{delta},{seed},{},{e},{},{}", s.lambda, s.mu, s.ratio)?;
        }
    }
    Ok(())
}

/// Moment time series: t, centers, second moments per dimension.
pub fn write_moments_csv(w: &mut impl Write, series: &MomentSeries) -> Result<()> {
    let d = series.center.first().map_or(0, |c| c.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("e{i}")));
    header.extend((1..=d).map(|i| format!("d{i}")));
    writeln!(w, "{}", header.join(","))?;
    for i in 0..series.len() {
        let mut row = format!("{}", series.times[i]);
        for c in &series.center[i] {
            row.push_str(&format!(",{c}"));
        }
        for v in &series.second_moment[i] {
            row.push_str(&format!(",{v}"));
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Histogram table: bin_lo, bin_hi, count, with a trailing out-of-range
/// row.
pub fn write_histogram_csv(
    w: &mut impl Write,
    hist: &Histogram,
    range: (f64, f64),
) -> Result<()> {
    writeln!(w, "bin_lo,bin_hi,count")?;
    let n = hist.counts.len();
    let width = (range.1 - range.0) / n as f64;
    for (b, count) in hist.counts.iter().enumerate() {
        let lo = range.0 + b as f64 * width;
        let hi = range.0 + (b + 1) as f64 * width;
        writeln!(w, "{lo},{hi},{count}")?;
    }
    writeln!(w, "out_of_range,,{}", hist.out_of_range)?;
    Ok(())
}

/// Per-step log-mass increments of an Eulerian run.
pub fn write_increments_csv(w: &mut impl Write, dt: f64, increments: &[f64]) -> Result<()> {
    writeln!(w, "step,t,log_mass_increment")?;
    for (i, inc) in increments.iter().enumerate() {
        writeln!(w, "{},{},{inc}", i, (i + 1) as f64 * dt)?;
    }
    Ok(())
}
