//! Counter-based random number generation.
//!
//! Every random draw in this crate is a pure function of a stream key
//! (seed + purpose) and a 256-bit counter built from logical indices such
//! as (generation, mutation, particle, dimension). This makes results
//! bit-identical for any worker-thread count and lets refinement extend a
//! coefficient sequence without replaying it.
//!
//! The block function is the Philox 4x64-10 bijection (Salmon et al.,
//! "Parallel random numbers: as easy as 1, 2, 3").

const PHILOX_M0: u64 = 0xD2E7_470E_E14C_6C93;
const PHILOX_M1: u64 = 0xCA5A_8263_9512_1157;
const PHILOX_W0: u64 = 0x9E37_79B9_7F4A_7C15;
const PHILOX_W1: u64 = 0xBB67_AE85_84CA_A73B;
const ROUNDS: usize = 10;

#[inline]
fn mulhilo(a: u64, b: u64) -> (u64, u64) {
    let wide = (a as u128) * (b as u128);
    ((wide >> 64) as u64, wide as u64)
}

/// Runs the Philox 4x64-10 block function on one counter.
#[inline]
pub fn philox4x64(mut ctr: [u64; 4], key: [u64; 2]) -> [u64; 4] {
    let mut k = key;
    for round in 0..ROUNDS {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0];
    }
    ctr
}

/// Logical sub-streams; each purpose owns an independent counter space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Cosine coefficients of a field realization, one counter per mode.
    FieldZeta = 1,
    /// Sine coefficients of a field realization.
    FieldEta = 2,
    /// Initial particle positions.
    InitEnsemble = 3,
    /// Gaussian increments of the mutation step.
    MutationNoise = 4,
    /// Multinomial selection uniforms.
    Selection = 5,
    /// Base points for empirical correlation estimates.
    CorrelationBase = 6,
    /// Per-subsystem seeds derived from a master seed.
    DeriveSeed = 7,
}

/// A keyed counter stream. Copy-cheap; all methods are pure.
#[derive(Debug, Clone, Copy)]
pub struct CounterStream {
    key: [u64; 2],
}

#[inline]
fn to_unit(x: u64) -> f64 {
    // (0, 1) exclusive on both ends, safe for logs and inverse CDFs
    ((x >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

impl CounterStream {
    pub fn new(seed: u64, purpose: Stream) -> Self {
        CounterStream {
            key: [seed, purpose as u64],
        }
    }

    /// Four raw 64-bit words for one counter.
    #[inline]
    pub fn block(&self, ctr: [u64; 4]) -> [u64; 4] {
        philox4x64(ctr, self.key)
    }

    /// Four uniforms in (0, 1).
    #[inline]
    pub fn uniform4(&self, ctr: [u64; 4]) -> [f64; 4] {
        let b = self.block(ctr);
        [to_unit(b[0]), to_unit(b[1]), to_unit(b[2]), to_unit(b[3])]
    }

    /// One uniform in (0, 1).
    #[inline]
    pub fn uniform(&self, ctr: [u64; 4]) -> f64 {
        to_unit(self.block(ctr)[0])
    }

    /// One standard normal via the inverse CDF of the counter uniform.
    #[inline]
    pub fn normal_inv_cdf(&self, ctr: [u64; 4]) -> f64 {
        inv_norm_cdf(self.uniform(ctr))
    }

    /// Four standard normals from one counter via Box-Muller on the
    /// block's uniforms. Used in bulk paths (mutation noise).
    #[inline]
    pub fn normal4(&self, ctr: [u64; 4]) -> [f64; 4] {
        let u = self.uniform4(ctr);
        let (a, b) = box_muller(u[0], u[1]);
        let (c, d) = box_muller(u[2], u[3]);
        [a, b, c, d]
    }
}

/// Derives a subsystem seed from a master seed and a slot index.
pub fn derive_seed(master: u64, slot: u64) -> u64 {
    CounterStream::new(master, Stream::DeriveSeed).block([slot, 0, 0, 0])[0]
}

#[inline]
fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Inverse standard normal CDF for p in (0, 1).
///
/// A rational tail approximation supplies the starting point and Newton
/// iterations against the erfc-based CDF polish it to full f64 accuracy.
pub fn inv_norm_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0, "quantile argument must be in (0,1)");
    if p == 0.5 {
        return 0.0;
    }
    // Work in the lower tail (q <= 1/2, x <= 0) where Phi(x) - q is free
    // of cancellation, and flip the sign for upper-tail arguments.
    let (q, flip) = if p <= 0.5 { (p, false) } else { (1.0 - p, true) };
    // Hastings 26.2.23 start, |error| < 4.5e-4
    let t = (-2.0 * q.ln()).sqrt();
    let num = 2.515517 + t * (0.802853 + t * 0.010328);
    let den = 1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308));
    let mut x = -(t - num / den);

    let inv_sqrt_tau = 1.0 / (std::f64::consts::TAU).sqrt();
    for _ in 0..8 {
        let err = norm_cdf(x) - q;
        let pdf = inv_sqrt_tau * (-0.5 * x * x).exp();
        if pdf == 0.0 {
            break;
        }
        let dx = err / pdf;
        x -= dx;
        if dx.abs() <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    if flip {
        -x
    } else {
        x
    }
}
