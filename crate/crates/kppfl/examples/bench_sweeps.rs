// calibration of the amplitude sweeps (not part of the test suite)
use kppfl::front_speed::*;
use kppfl::*;
use std::time::Instant;

fn main() {
    let p = KppParams::default();

    // --- 2D cellular, z = (1,0), fixed e, 3 engine seeds
    let t0 = Instant::now();
    let deltas = [1.0, 2.0, 4.0, 8.0, 16.0];
    let query = FrontSpeedQuery::new(vec![1.0, 0.0])
        .unwrap()
        .with_lambda_grid(log_grid(0.25, 2.0, 8))
        .with_refine_rounds(1);
    let mut means = vec![0.0; deltas.len()];
    let n_seeds = 3u64;
    for seed in 0..n_seeds {
        let mut params = IpmParams::new(20_000, 64, 8, 1.0 / 64.0, 1000 + seed);
        params.resampling = Resampling::Multinomial;
        let est = IpmMuEstimator::new(params);
        let table = sweep_amplitude(
            &deltas,
            &query,
            &p,
            |d| Ok(FlowModel::new(BaseFlow::Cellular2d, d)),
            &est,
        )
        .unwrap();
        for (i, (d, r)) in table.iter().enumerate() {
            println!("  seed {seed} delta {d}: c*={:.4} lam*={:.3}", r.c_star, r.lambda_opt);
            means[i] += r.c_star / n_seeds as f64;
        }
    }
    let pts: Vec<(f64, f64)> = deltas.iter().cloned().zip(means.iter().cloned()).collect();
    let (slope, _, stderr) = fit_loglog_slope(&pts).unwrap();
    println!("2D cellular slope = {slope:.4} +- {stderr:.4} (exact-oracle prediction 0.279, band 0.18..0.33), wall {:.0}s", t0.elapsed().as_secs_f64());

    // --- 3D ABC, z = (0,1,0), fixed e
    let t0 = Instant::now();
    let deltas3 = [2.0, 4.0, 8.0, 16.0];
    let query3 = FrontSpeedQuery::new(vec![0.0, 1.0, 0.0])
        .unwrap()
        .with_lambda_grid(log_grid(0.25, 2.0, 8))
        .with_refine_rounds(1);
    let mut params = IpmParams::new(20_000, 128, 16, 1.0 / 128.0, 42);
    params.resampling = Resampling::Multinomial;
    let est = IpmMuEstimator::new(params);
    let table = sweep_amplitude(
        &deltas3,
        &query3,
        &p,
        |d| Ok(FlowModel::new(BaseFlow::Abc3d, d)),
        &est,
    )
    .unwrap();
    let mut pts3 = Vec::new();
    for (d, r) in &table {
        println!("  ABC delta {d}: c*={:.4} lam*={:.3} mu*={:.4}", r.c_star, r.lambda_opt, r.mu_at_opt);
        pts3.push((*d, r.c_star));
    }
    let (slope3, _, stderr3) = fit_loglog_slope(&pts3).unwrap();
    println!("3D ABC slope = {slope3:.4} +- {stderr3:.4} (band 0.85..1.10), wall {:.0}s", t0.elapsed().as_secs_f64());
}
