//! Incompressible velocity fields and the linearized-operator
//! coefficients derived from them.
//!
//! A flow is a deterministic base (cellular, ABC, shear, or zero) plus an
//! optional scalar random perturbation xi(x_1) added to one velocity
//! component and scaled by epsilon; the whole composite is multiplied by
//! the amplitude delta. Because xi depends only on x_1 and is added to a
//! different component, every composite is divergence-free by
//! construction.
//!
//! For a dual variable (lambda, e) and KPP coefficients (kappa, f'(0)),
//! the drift and potential of the linearized operator are
//!
//! ```text
//! b(x) = -2 kappa lambda e + v(x)
//! c(x) = kappa lambda^2 - lambda v(x) . e + f'(0)
//! ```

use crate::error::{Error, Result};
use crate::field::FieldRealization;

/// Largest spatial dimension handled by the toolkit.
pub const MAX_DIM: usize = 3;

/// Deterministic base flows. Formulas are per unit amplitude; the
/// composite is scaled by delta.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseFlow {
    /// (-sin x cos y, cos x sin y)
    Cellular2d,
    /// Zero base in 2D; the perturbation supplies the shear profile.
    Shear2dZeroBase,
    /// (sin z + cos y, sin x + cos z, sin y + cos x)
    Abc3d,
    /// (-sin x cos y cos z, -sin y cos x cos z, 2 sin z cos x cos y)
    Cellular3d,
    /// Quiescent flow in `dim` dimensions.
    Zero { dim: usize },
}

impl BaseFlow {
    pub fn dim(&self) -> usize {
        match self {
            BaseFlow::Cellular2d | BaseFlow::Shear2dZeroBase => 2,
            BaseFlow::Abc3d | BaseFlow::Cellular3d => 3,
            BaseFlow::Zero { dim } => *dim,
        }
    }

    /// Period of the deterministic part in every dimension.
    fn period(&self) -> f64 {
        std::f64::consts::TAU
    }

    #[inline]
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            BaseFlow::Cellular2d => {
                let (sx, cx) = x[0].sin_cos();
                let (sy, cy) = x[1].sin_cos();
                out[0] = -sx * cy;
                out[1] = cx * sy;
            }
            BaseFlow::Shear2dZeroBase => {
                out[0] = 0.0;
                out[1] = 0.0;
            }
            BaseFlow::Abc3d => {
                let (sx, cx) = x[0].sin_cos();
                let (sy, cy) = x[1].sin_cos();
                let (sz, cz) = x[2].sin_cos();
                out[0] = sz + cy;
                out[1] = sx + cz;
                out[2] = sy + cx;
            }
            BaseFlow::Cellular3d => {
                let (sx, cx) = x[0].sin_cos();
                let (sy, cy) = x[1].sin_cos();
                let (sz, cz) = x[2].sin_cos();
                out[0] = -sx * cy * cz;
                out[1] = -sy * cx * cz;
                out[2] = 2.0 * sz * cx * cy;
            }
            BaseFlow::Zero { .. } => out.fill(0.0),
        }
    }
}

/// A composite incompressible velocity field.
#[derive(Debug, Clone)]
pub struct FlowModel {
    base: BaseFlow,
    delta: f64,
    epsilon: f64,
    perturbation: Option<FieldRealization>,
    perturb_component: usize,
}

impl FlowModel {
    /// A purely deterministic flow of amplitude `delta`.
    pub fn new(base: BaseFlow, delta: f64) -> Self {
        FlowModel { base, delta, epsilon: 0.0, perturbation: None, perturb_component: 1 }
    }

    /// Adds a scalar perturbation of strength `epsilon` on the default
    /// (second) component.
    pub fn with_perturbation(mut self, epsilon: f64, xi: FieldRealization) -> Result<Self> {
        if self.base.dim() < 2 {
            return Err(Error::contract("perturbed flows need at least two dimensions"));
        }
        self.epsilon = epsilon;
        self.perturbation = Some(xi);
        Ok(self)
    }

    /// Overrides the velocity component that receives the perturbation.
    pub fn with_perturb_component(mut self, component: usize) -> Result<Self> {
        if component >= self.base.dim() {
            return Err(Error::contract(format!(
                "perturbation component {component} out of range for dim {}",
                self.base.dim()
            )));
        }
        self.perturb_component = component;
        Ok(self)
    }

    pub fn base(&self) -> BaseFlow {
        self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn perturbation(&self) -> Option<&FieldRealization> {
        self.perturbation.as_ref()
    }

    /// Per-dimension torus period of the composite field, when the base
    /// period and the perturbation period are commensurate.
    ///
    /// Base flows have period 2 pi; a perturbation has period 1/dk. The
    /// composite period is the perturbation period when it is an integer
    /// multiple of 2 pi (for the working step dk = 1/(20 pi) the ratio
    /// is exactly 10).
    pub fn period(&self) -> Option<f64> {
        match (&self.perturbation, self.base) {
            (None, _) => Some(self.base.period()),
            (Some(xi), BaseFlow::Zero { .. }) | (Some(xi), BaseFlow::Shear2dZeroBase) => {
                Some(xi.period())
            }
            (Some(xi), _) => {
                let ratio = xi.period() / self.base.period();
                if (ratio - ratio.round()).abs() < 1e-9 && ratio >= 1.0 {
                    Some(xi.period())
                } else {
                    None
                }
            }
        }
    }

    /// Velocity at `x`, written into `out` (both of length `dim`).
    #[inline]
    pub fn velocity_into(&self, x: &[f64], out: &mut [f64]) {
        self.base.eval_into(x, out);
        if let Some(xi) = &self.perturbation {
            if self.epsilon != 0.0 {
                out[self.perturb_component] += self.epsilon * xi.eval(x[0]);
            }
        }
        for v in out.iter_mut() {
            *v *= self.delta;
        }
    }

    /// Velocity at `x` as an owned vector.
    pub fn velocity(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.velocity_into(x, &mut out);
        out
    }
}

/// The dual variable (lambda, e) of the front-speed variational formula.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVariable {
    lambda: f64,
    e: Vec<f64>,
}

impl DualVariable {
    pub fn new(lambda: f64, e: Vec<f64>) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::contract("lambda must be finite"));
        }
        let norm = e.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() >= 1e-12 {
            return Err(Error::contract(format!("e must be a unit vector, |e| = {norm}")));
        }
        Ok(DualVariable { lambda, e })
    }

    /// Unit vector along coordinate axis `axis`.
    pub fn along_axis(lambda: f64, dim: usize, axis: usize) -> Result<Self> {
        if axis >= dim {
            return Err(Error::contract(format!("axis {axis} out of range for dim {dim}")));
        }
        let mut e = vec![0.0; dim];
        e[axis] = 1.0;
        DualVariable::new(lambda, e)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn e(&self) -> &[f64] {
        &self.e
    }

    pub fn dim(&self) -> usize {
        self.e.len()
    }
}

/// Diffusion constant and reaction linearization of the KPP problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KppParams {
    pub kappa: f64,
    pub f_prime0: f64,
}

impl KppParams {
    pub fn new(kappa: f64, f_prime0: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::contract(format!("kappa must be positive, got {kappa}")));
        }
        Ok(KppParams { kappa, f_prime0 })
    }
}

impl Default for KppParams {
    /// kappa = 1 and f(u) = u(1-u), so f'(0) = 1.
    fn default() -> Self {
        KppParams { kappa: 1.0, f_prime0: 1.0 }
    }
}

/// SDE drift b(x) = -2 kappa lambda e + v(x), written into `out`.
#[inline]
pub fn drift_into(
    flow: &FlowModel,
    dual: &DualVariable,
    p: &KppParams,
    x: &[f64],
    out: &mut [f64],
) {
    flow.velocity_into(x, out);
    let shift = -2.0 * p.kappa * dual.lambda();
    for (o, e) in out.iter_mut().zip(dual.e()) {
        *o += shift * e;
    }
}

/// SDE drift as an owned vector.
pub fn drift(flow: &FlowModel, dual: &DualVariable, p: &KppParams, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; flow.dim()];
    drift_into(flow, dual, p, x, &mut out);
    out
}

/// Feynman-Kac potential c(x) = kappa lambda^2 - lambda v(x).e + f'(0).
#[inline]
pub fn potential(flow: &FlowModel, dual: &DualVariable, p: &KppParams, x: &[f64]) -> f64 {
    let mut v = [0.0; MAX_DIM];
    let d = flow.dim();
    flow.velocity_into(x, &mut v[..d]);
    potential_from_velocity(&v[..d], dual, p)
}

/// Potential evaluated from an already-computed velocity.
#[inline]
pub fn potential_from_velocity(v: &[f64], dual: &DualVariable, p: &KppParams) -> f64 {
    let lambda = dual.lambda();
    let ve: f64 = v.iter().zip(dual.e()).map(|(a, b)| a * b).sum();
    p.kappa * lambda * lambda - lambda * ve + p.f_prime0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{CounterStream, Stream};
    use crate::spectrum::SpectralDensity;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn probe_points(dim: usize, n: usize, span: f64) -> Vec<Vec<f64>> {
        let s = CounterStream::new(99, Stream::CorrelationBase);
        (0..n)
            .map(|i| {
                let u = s.uniform4([i as u64, 1, 0, 0]);
                (0..dim).map(|d| (u[d] - 0.5) * span).collect()
            })
            .collect()
    }

    fn divergence(flow: &FlowModel, x: &[f64]) -> f64 {
        let h = 1e-5;
        let d = flow.dim();
        let mut div = 0.0;
        for c in 0..d {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[c] += h;
            xm[c] -= h;
            div += (flow.velocity(&xp)[c] - flow.velocity(&xm)[c]) / (2.0 * h);
        }
        div
    }

    #[test]
    fn cellular2d_hand_values() {
        let flow = FlowModel::new(BaseFlow::Cellular2d, 1.0);
        let v = flow.velocity(&[FRAC_PI_2, 0.0]);
        assert_abs_diff_eq!(v[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn abc3d_hand_values() {
        let flow = FlowModel::new(BaseFlow::Abc3d, 2.0);
        let v = flow.velocity(&[0.0, 0.0, 0.0]);
        assert_eq!(v, vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn shear_composes_the_scalar_field() {
        let dk = 1.0 / (20.0 * PI);
        let xi = FieldRealization::sample(SpectralDensity::K05Exp, dk, 32, 5).unwrap();
        let flow = FlowModel::new(BaseFlow::Shear2dZeroBase, 3.0)
            .with_perturbation(1.0, xi.clone())
            .unwrap();
        for x in probe_points(2, 20, 10.0) {
            let v = flow.velocity(&x);
            assert_eq!(v[0], 0.0);
            assert_abs_diff_eq!(v[1], 3.0 * xi.eval(x[0]), epsilon = 1e-14);
        }
    }

    #[test]
    fn all_builtin_flows_are_divergence_free() {
        let dk = 1.0 / (20.0 * PI);
        let xi = FieldRealization::sample(SpectralDensity::K05Exp, dk, 64, 8).unwrap();
        let flows = vec![
            FlowModel::new(BaseFlow::Cellular2d, 4.0),
            FlowModel::new(BaseFlow::Cellular2d, 4.0).with_perturbation(0.5, xi.clone()).unwrap(),
            FlowModel::new(BaseFlow::Shear2dZeroBase, 2.0).with_perturbation(1.0, xi.clone()).unwrap(),
            FlowModel::new(BaseFlow::Abc3d, 4.0),
            FlowModel::new(BaseFlow::Abc3d, 4.0).with_perturbation(1.0, xi.clone()).unwrap(),
            FlowModel::new(BaseFlow::Cellular3d, 4.0),
            FlowModel::new(BaseFlow::Cellular3d, 4.0).with_perturbation(1.0, xi).unwrap(),
        ];
        for flow in flows {
            for x in probe_points(flow.dim(), 200, 40.0) {
                let div = divergence(&flow, &x);
                // central differences at h = 1e-5 leave O(h^2) residual
                assert!(
                    div.abs() < 1e-6 * flow.delta().max(1.0),
                    "divergence {div} for {:?} at {x:?}",
                    flow.base()
                );
            }
        }
    }

    #[test]
    fn velocity_respects_declared_period() {
        let dk = 1.0 / (20.0 * PI);
        let xi = FieldRealization::sample(SpectralDensity::K05Exp, dk, 64, 3).unwrap();
        let flow =
            FlowModel::new(BaseFlow::Cellular2d, 2.0).with_perturbation(0.7, xi).unwrap();
        let period = flow.period().unwrap();
        assert_abs_diff_eq!(period, 20.0 * PI, epsilon = 1e-12);
        for x in probe_points(2, 50, 30.0) {
            let v0 = flow.velocity(&x);
            for c in 0..2 {
                let mut xs = x.clone();
                xs[c] += period;
                let v1 = flow.velocity(&xs);
                for d in 0..2 {
                    assert!((v0[d] - v1[d]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn velocity_is_linear_in_delta() {
        let dk = 1.0 / (20.0 * PI);
        let xi = FieldRealization::sample(SpectralDensity::K05Exp, dk, 32, 13).unwrap();
        let small =
            FlowModel::new(BaseFlow::Cellular2d, 1.5).with_perturbation(0.3, xi.clone()).unwrap();
        let large = FlowModel::new(BaseFlow::Cellular2d, 3.0).with_perturbation(0.3, xi).unwrap();
        for x in probe_points(2, 30, 20.0) {
            let vs = small.velocity(&x);
            let vl = large.velocity(&x);
            for d in 0..2 {
                assert_abs_diff_eq!(vl[d], 2.0 * vs[d], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn drift_reduces_to_velocity_at_lambda_zero() {
        let flow = FlowModel::new(BaseFlow::Cellular2d, 4.0);
        let p = KppParams::default();
        let dual = DualVariable::along_axis(0.0, 2, 0).unwrap();
        for x in probe_points(2, 20, 10.0) {
            assert_eq!(drift(&flow, &dual, &p, &x), flow.velocity(&x));
        }
    }

    #[test]
    fn drift_on_zero_flow_is_constant() {
        let flow = FlowModel::new(BaseFlow::Zero { dim: 2 }, 1.0);
        let p = KppParams::default();
        let dual = DualVariable::along_axis(1.0, 2, 0).unwrap();
        let b = drift(&flow, &dual, &p, &[0.3, -4.0]);
        assert_eq!(b, vec![-2.0, 0.0]);
    }

    #[test]
    fn drift_composes_termwise() {
        let flow = FlowModel::new(BaseFlow::Cellular2d, 4.0);
        let p = KppParams::default();
        let dual = DualVariable::along_axis(0.5, 2, 1).unwrap();
        let x = [1.0, 1.0];
        let v = flow.velocity(&x);
        let b = drift(&flow, &dual, &p, &x);
        assert_abs_diff_eq!(b[0], v[0], epsilon = 1e-15);
        assert_abs_diff_eq!(b[1], -1.0 + v[1], epsilon = 1e-15);
    }

    #[test]
    fn potential_at_lambda_zero_is_reaction_rate() {
        let flow = FlowModel::new(BaseFlow::Cellular2d, 7.0);
        let p = KppParams::default();
        let dual = DualVariable::along_axis(0.0, 2, 0).unwrap();
        for x in probe_points(2, 20, 10.0) {
            assert_eq!(potential(&flow, &dual, &p, &x), 1.0);
        }
    }

    #[test]
    fn shear_along_x_has_constant_potential() {
        let dk = 1.0 / (20.0 * PI);
        let xi = FieldRealization::sample(SpectralDensity::K05Exp, dk, 32, 2).unwrap();
        let flow =
            FlowModel::new(BaseFlow::Shear2dZeroBase, 5.0).with_perturbation(1.0, xi).unwrap();
        let p = KppParams::default();
        let dual = DualVariable::along_axis(1.5, 2, 0).unwrap();
        for x in probe_points(2, 20, 15.0) {
            assert_eq!(potential(&flow, &dual, &p, &x), 1.0 * 1.5 * 1.5 + 1.0);
        }
    }

    #[test]
    fn cellular_potential_hand_value() {
        // c = kappa lambda^2 - lambda v.e + f'(0) at (pi/2, pi/2):
        // v.e = -4 sin(pi/2) cos(pi/2) = 0, so c = 1 + 1 = 2.
        let flow = FlowModel::new(BaseFlow::Cellular2d, 4.0);
        let p = KppParams::default();
        let dual = DualVariable::along_axis(1.0, 2, 0).unwrap();
        assert_abs_diff_eq!(
            potential(&flow, &dual, &p, &[FRAC_PI_2, FRAC_PI_2]),
            2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn advection_part_is_odd_in_lambda() {
        let flow = FlowModel::new(BaseFlow::Cellular2d, 3.0);
        let p = KppParams::default();
        for lambda in [0.5, 1.0, 2.5] {
            let plus = DualVariable::along_axis(lambda, 2, 0).unwrap();
            let minus = DualVariable::along_axis(-lambda, 2, 0).unwrap();
            for x in probe_points(2, 20, TAU) {
                let sum = potential(&flow, &plus, &p, &x) + potential(&flow, &minus, &p, &x);
                assert_abs_diff_eq!(
                    sum,
                    2.0 * (p.kappa * lambda * lambda + p.f_prime0),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn dual_variable_requires_unit_e() {
        assert!(DualVariable::new(1.0, vec![0.5, 0.5]).is_err());
        assert!(DualVariable::new(1.0, vec![1.0, 0.0]).is_ok());
        assert!(KppParams::new(0.0, 1.0).is_err());
    }
}
