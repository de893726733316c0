// quick calibration harness (not part of the test suite)
use kppfl::*;
use std::time::Instant;

fn time_run(label: &str, flow: &FlowModel, dual: &DualVariable, p: &KppParams, ipm: &IpmParams, domain: &DomainSpec) {
    let t0 = Instant::now();
    let (trace, _) = ipm::run(flow, dual, p, ipm, domain).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    let steps = (ipm.n_particles * ipm.n_generations * ipm.n_mutations) as f64;
    println!("{label}: mu={:.6} wall={:.2}s ns/particle-step={:.0}", trace.mu_final(), dt, dt / steps * 1e9);
}

fn main() {
    let p = KppParams::default();
    let tau = std::f64::consts::TAU;

    // 2D cellular delta=4, lambda=1 (criterion 3 shape)
    let flow = FlowModel::new(BaseFlow::Cellular2d, 4.0);
    let dual = DualVariable::along_axis(1.0, 2, 0).unwrap();
    let domain = DomainSpec::torus(vec![tau, tau]).unwrap();
    let ipm_params = IpmParams::new(20_000, 64, 32, 1.0 / 256.0, 7);
    time_run("2D cellular N=2e4 M=64 H=32", &flow, &dual, &p, &ipm_params, &domain);

    // 3D ABC delta=8 (criterion 5 shape)
    let flow3 = FlowModel::new(BaseFlow::Abc3d, 8.0);
    let dual3 = DualVariable::along_axis(1.0, 3, 1).unwrap();
    let domain3 = DomainSpec::torus(vec![tau, tau, tau]).unwrap();
    let ipm3 = IpmParams::new(20_000, 128, 16, 1.0 / 128.0, 7);
    time_run("3D ABC N=2e4 M=128 H=16", &flow3, &dual3, &p, &ipm3, &domain3);

    // shear with 64-mode field (criterion 9 shape)
    let dk = 1.0 / (20.0 * std::f64::consts::PI);
    let xi = FieldRealization::sample(SpectralDensity::K05Exp, dk, 64, 5).unwrap();
    let shear = FlowModel::new(BaseFlow::Shear2dZeroBase, 4.0).with_perturbation(1.0, xi).unwrap();
    let duals = DualVariable::along_axis(1.0, 2, 0).unwrap();
    let domain_u = DomainSpec::unbounded(2);
    let mut ipm_s = IpmParams::new(10_000, 64, 16, 1.0 / 32.0, 7);
    ipm_s.dynamic_shift = true;
    time_run("2D shear NF=64 N=1e4 M=64 H=16", &shear, &duals, &p, &ipm_s, &domain_u);

    // SL+CN at 128^2 (criterion 3)
    let t0 = Instant::now();
    let mut grid = eulerian::EulerianGrid::uniform(128, tau).unwrap();
    let r = eulerian::run_mu_sl(&mut grid, &flow, &dual, &p, 1e-3, 3000, 0.5).unwrap();
    println!("SL+CN 128^2 3000 steps: mu={:.6} wall={:.2}s", r.mu, t0.elapsed().as_secs_f64());

    // spectral at 48^2
    let t0 = Instant::now();
    let mu = eulerian::spectral_eigen(&flow, &dual, &p, 48, tau).unwrap();
    println!("spectral 48^2: mu={:.8} wall={:.2}s", mu, t0.elapsed().as_secs_f64());

    // spectral at 32^2
    let t0 = Instant::now();
    let mu = eulerian::spectral_eigen(&flow, &dual, &p, 32, tau).unwrap();
    println!("spectral 32^2: mu={:.8} wall={:.2}s (frozen ref 2.7433503802357)", mu, t0.elapsed().as_secs_f64());
}
