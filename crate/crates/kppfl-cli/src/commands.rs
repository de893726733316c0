//! Subcommand implementations. Each command reads the validated config,
//! runs the corresponding pipeline, and writes its artifacts plus a
//! manifest into a config-hash-namespaced directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};

use kppfl::correlation::{correlation_empirical, correlation_exact, truncation_error_bound, CorrelationDim};
use kppfl::eulerian::{run_mu_sl, spectral_eigen, EulerianGrid};
use kppfl::front_speed::{fit_loglog_slope, sweep_amplitude};
use kppfl::io;
use kppfl::ipm;
use kppfl::rng::derive_seed;
use kppfl::stats::{diffusion_exponent, histogram, MomentSeries, DEFAULT_EXPONENT_TAIL};
use kppfl::{FieldRealization, SpectralDensity};

use crate::config::{seed_slot, RunConfig};
use crate::manifest::{sha256_hex, RunManifest};

pub struct CommandContext {
    pub config: RunConfig,
    pub config_hash: String,
    pub out_dir: PathBuf,
}

impl CommandContext {
    pub fn new(config: RunConfig, out_root: &Path) -> anyhow::Result<Self> {
        let canonical = serde_json::to_string(&config)?;
        let config_hash = sha256_hex(canonical.as_bytes());
        let out_dir = out_root.join(&config_hash[..12]);
        std::fs::create_dir_all(&out_dir)
            .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
        Ok(CommandContext { config, config_hash, out_dir })
    }

    fn write_artifact(&self, manifest: &mut RunManifest, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        std::fs::write(self.out_dir.join(name), bytes)?;
        manifest.record_output(name, bytes);
        Ok(())
    }

    fn finish(&self, mut manifest: RunManifest, started: Instant) -> anyhow::Result<()> {
        manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
        manifest.write(&self.out_dir)?;
        println!("wrote {} artifacts to {}", manifest.outputs.len(), self.out_dir.display());
        Ok(())
    }
}

/// gen-field: realization JSON, coefficient table, exact-vs-empirical
/// correlation, truncation bound.
pub fn cmd_gen_field(ctx: &CommandContext) -> anyhow::Result<()> {
    let started = Instant::now();
    let config = &ctx.config;
    let pert = config
        .flow
        .perturbation
        .as_ref()
        .context("gen-field needs flow.perturbation")?;
    let spectrum = SpectralDensity::from_name(&pert.spectrum).map_err(anyhow::Error::from)?;
    spectrum.validate(pert.delta_k)?;
    let field_seed = derive_seed(config.seed, seed_slot::FIELD);
    let realization = FieldRealization::sample(spectrum, pert.delta_k, pert.n_f, field_seed)?;

    let mut manifest = RunManifest::new("gen-field", ctx.config_hash.clone());
    manifest.seeds.insert("field".into(), field_seed);

    let doc = serde_json::to_string_pretty(&realization.to_document())?;
    ctx.write_artifact(&mut manifest, "realization.json", doc.as_bytes())?;

    let mut coeff = String::from("j,k,amplitude,zeta,eta\n");
    for j in 0..=realization.n_modes() {
        coeff.push_str(&format!(
            "{j},{},{},{},{}\n",
            j as f64 * pert.delta_k,
            realization.amplitudes()[j],
            realization.zeta()[j],
            realization.eta()[j]
        ));
    }
    ctx.write_artifact(&mut manifest, "coefficients.csv", coeff.as_bytes())?;

    let probe = config.field.clone().unwrap_or(crate::config::FieldConfig {
        r_max: 0.5 / pert.delta_k,
        n_r: 64,
        n_seeds_empirical: Some(64),
    });
    let n_seeds = probe.n_seeds_empirical.unwrap_or(64).max(2);
    let corr_seed = derive_seed(config.seed, seed_slot::CORRELATION);
    let mut corr = String::from("r,exact,empirical\n");
    for i in 0..probe.n_r {
        let r = probe.r_max * i as f64 / (probe.n_r.max(2) - 1) as f64;
        let exact = correlation_exact(spectrum, pert.delta_k, CorrelationDim::One, r, pert.n_f);
        let emp = correlation_empirical(spectrum, pert.delta_k, pert.n_f, r, n_seeds, corr_seed)?;
        corr.push_str(&format!("{r},{exact},{emp}\n"));
    }
    ctx.write_artifact(&mut manifest, "correlation.csv", corr.as_bytes())?;
    manifest.seeds.insert("correlation".into(), corr_seed);

    let bound = truncation_error_bound(spectrum, pert.delta_k, pert.n_f)?;
    let summary = serde_json::json!({
        "spectrum": spectrum.name(),
        "delta_k": pert.delta_k,
        "n_f": pert.n_f,
        "truncation_error_bound": bound,
        "correlation_at_zero": correlation_exact(spectrum, pert.delta_k, CorrelationDim::One, 0.0, pert.n_f),
    });
    ctx.write_artifact(
        &mut manifest,
        "field_summary.json",
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    ctx.finish(manifest, started)
}

/// run-ipm: mu trace CSV, ensemble snapshot CSV, summary, manifest.
pub fn cmd_run_ipm(ctx: &CommandContext) -> anyhow::Result<()> {
    let started = Instant::now();
    let config = &ctx.config;
    let flow = config.build_flow()?;
    let dual = config.build_dual()?;
    let p = config.kpp_params()?;
    let params = config.build_ipm_at(0)?;
    let domain = config.build_domain(&flow)?;

    let (trace, ensemble) = ipm::run(&flow, &dual, &p, &params, &domain)?;

    let mut manifest = RunManifest::new("run-ipm", ctx.config_hash.clone());
    manifest.seeds.insert("engine".into(), params.seed);
    if config.flow.perturbation.is_some() {
        manifest.seeds.insert("field".into(), derive_seed(config.seed, seed_slot::FIELD));
    }

    let mut trace_csv = Vec::new();
    io::write_mu_trace_csv(&mut trace_csv, &trace)?;
    ctx.write_artifact(&mut manifest, "mu_trace.csv", &trace_csv)?;

    let wrap = config.output.as_ref().and_then(|o| o.snapshot_wrap);
    let mut snapshot = Vec::new();
    io::write_ensemble_csv(&mut snapshot, &ensemble, wrap)?;
    ctx.write_artifact(&mut manifest, "ensemble.csv", &snapshot)?;

    let (slope, stderr) = trace.stationarity_slope();
    let summary = serde_json::json!({
        "mu_final": trace.mu_final(),
        "mu_tail_mean": trace.mu_tail_mean(0.25),
        "per_generation_mu": trace.per_generation_mu,
        "stationarity": {"slope": slope, "stderr": stderr},
    });
    ctx.write_artifact(
        &mut manifest,
        "summary.json",
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    ctx.finish(manifest, started)
}

/// front-speed: samples CSV over (delta, realization, lambda, e) and a
/// summary CSV with per-delta means and the log-log slope fit footer.
pub fn cmd_front_speed(ctx: &CommandContext) -> anyhow::Result<()> {
    let started = Instant::now();
    let config = &ctx.config;
    let fs = config.front_speed.as_ref().context("front-speed needs a front_speed block")?;
    let p = config.kpp_params()?;
    let query = config.build_query()?;
    let n_realizations = fs.n_realizations.unwrap_or(1).max(1);

    let mut manifest = RunManifest::new("front-speed", ctx.config_hash.clone());
    let mut rows: Vec<(f64, u64, kppfl::FrontSpeedResult)> = Vec::new();
    // c_star[delta index][realization]
    let mut speeds: Vec<Vec<f64>> = vec![Vec::new(); fs.deltas.len()];

    for r in 0..n_realizations as u64 {
        let estimator = config.build_estimator(r)?;
        manifest
            .seeds
            .insert(format!("engine_{r}"), derive_seed(config.seed, seed_slot::ENGINE + r));
        if config.flow.perturbation.is_some() {
            manifest
                .seeds
                .insert(format!("field_{r}"), derive_seed(config.seed, seed_slot::FIELD + r));
        }
        let table = sweep_amplitude(
            &fs.deltas,
            &query,
            &p,
            |delta| {
                config
                    .build_flow_at(delta, r, config.seed)
                    .map_err(|e| kppfl::Error::Contract(e.to_string()))
            },
            estimator.as_ref(),
        )?;
        for (i, (delta, result)) in table.into_iter().enumerate() {
            speeds[i].push(result.c_star);
            rows.push((delta, r, result));
        }
    }

    let dim = config.dim()?;
    let mut samples_csv = Vec::new();
    let refs: Vec<(f64, u64, &kppfl::FrontSpeedResult)> =
        rows.iter().map(|(d, r, res)| (*d, *r, res)).collect();
    io::write_samples_csv(&mut samples_csv, &refs, dim)?;
    ctx.write_artifact(&mut manifest, "samples.csv", &samples_csv)?;

    let mut summary = String::from("delta,c_star_mean,c_star_stderr\n");
    let mut fit_points = Vec::new();
    for (i, &delta) in fs.deltas.iter().enumerate() {
        let xs = &speeds[i];
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let stderr = if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        summary.push_str(&format!("{delta},{mean},{stderr}\n"));
        if delta > 0.0 && mean > 0.0 {
            fit_points.push((delta, mean));
        }
    }
    let footer = if fit_points.len() >= 2 {
        let (slope, intercept, stderr) = fit_loglog_slope(&fit_points)?;
        serde_json::json!({
            "slope": slope, "intercept": intercept, "stderr": stderr,
            "lambda_grid": query.lambda_grid, "refine_rounds": query.refine_rounds,
        })
    } else {
        serde_json::json!({"slope": null})
    };
    summary.push_str(&format!("# {footer}\n"));
    ctx.write_artifact(&mut manifest, "summary.csv", summary.as_bytes())?;
    ctx.finish(manifest, started)
}

/// reference-2d: SL+CN and/or collocation eigenvalues on the same
/// operator; comparison CSV plus optional per-step increments.
pub fn cmd_reference_2d(ctx: &CommandContext) -> anyhow::Result<()> {
    let started = Instant::now();
    let config = &ctx.config;
    if config.dim()? != 2 {
        bail!("reference-2d needs a two-dimensional flow");
    }
    let reference = config.reference.as_ref().context("reference-2d needs a reference block")?;
    let flow = config.build_flow()?;
    let dual = config.build_dual()?;
    let p = config.kpp_params()?;
    let period = flow.period().context("flow periods are incommensurate")?;

    let mut manifest = RunManifest::new("reference-2d", ctx.config_hash.clone());
    let mut table: BTreeMap<String, f64> = BTreeMap::new();
    let mut increments: Option<Vec<f64>> = None;

    for method in &reference.methods {
        match method.as_str() {
            "sl_cn" => {
                let mut grid = EulerianGrid::uniform(reference.n_per_dim, period)?;
                let result = run_mu_sl(
                    &mut grid,
                    &flow,
                    &dual,
                    &p,
                    reference.dt,
                    reference.n_steps,
                    reference.burn_in.unwrap_or(0.5),
                )?;
                table.insert("sl_cn".into(), result.mu);
                if reference.dump_increments.unwrap_or(false) {
                    increments = Some(result.increments);
                }
            }
            "spectral" => {
                let n = reference.spectral_n.unwrap_or(32);
                table.insert("spectral".into(), spectral_eigen(&flow, &dual, &p, n, period)?);
            }
            other => bail!("unknown reference method '{other}'"),
        }
    }

    let mut csv = String::from("method,mu\n");
    for (method, mu) in &table {
        csv.push_str(&format!("{method},{mu}\n"));
    }
    ctx.write_artifact(&mut manifest, "reference.csv", csv.as_bytes())?;
    if let Some(incs) = increments {
        let mut buf = Vec::new();
        io::write_increments_csv(&mut buf, reference.dt, &incs)?;
        ctx.write_artifact(&mut manifest, "increments.csv", &buf)?;
    }
    ctx.finish(manifest, started)
}

/// stats: run the engine recording per-generation moments, then write
/// the moment series, a final histogram, and exponent fits.
pub fn cmd_stats(ctx: &CommandContext) -> anyhow::Result<()> {
    let started = Instant::now();
    let config = &ctx.config;
    let stats = config.stats.as_ref().context("stats needs a stats block")?;
    let flow = config.build_flow()?;
    let dual = config.build_dual()?;
    let p = config.kpp_params()?;
    let params = config.build_ipm_at(0)?;
    let domain = config.build_domain(&flow)?;

    let mut series = MomentSeries::new();
    let mut record_err = None;
    let (_, ensemble) = ipm::run_with_observer(&flow, &dual, &p, &params, &domain, |_, t, ens| {
        if record_err.is_none() {
            if let Err(e) = series.record(t, ens) {
                record_err = Some(e);
            }
        }
    })?;
    if let Some(e) = record_err {
        return Err(e.into());
    }

    let mut manifest = RunManifest::new("stats", ctx.config_hash.clone());
    manifest.seeds.insert("engine".into(), params.seed);

    let mut moments_csv = Vec::new();
    io::write_moments_csv(&mut moments_csv, &series)?;
    ctx.write_artifact(&mut manifest, "moments.csv", &moments_csv)?;

    let hist = histogram(&ensemble, 0, stats.n_bins, stats.range)?;
    let mut hist_csv = Vec::new();
    io::write_histogram_csv(&mut hist_csv, &hist, stats.range)?;
    ctx.write_artifact(&mut manifest, "histogram.csv", &hist_csv)?;

    let tail = stats.exponent_tail.unwrap_or(DEFAULT_EXPONENT_TAIL);
    let mut exponents = Vec::new();
    for d in 0..flow.dim() {
        match diffusion_exponent(&series, d, tail) {
            Ok((s, se)) => exponents.push(serde_json::json!({"dim": d, "exponent": s, "stderr": se})),
            Err(e) => exponents.push(serde_json::json!({"dim": d, "error": e.to_string()})),
        }
    }
    let summary = serde_json::json!({"exponents": exponents, "tail_fraction": tail});
    ctx.write_artifact(
        &mut manifest,
        "stats_summary.json",
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    ctx.finish(manifest, started)
}
