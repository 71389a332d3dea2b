use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{check_time, MCConfig};
use crate::error::Result;
use crate::potential::Potential;

/// One discretized path of Brownian motion with generator `Δ` started at
/// `x`, killed at 0 through the bridge survival factor `1 - e^{-x_k x_{k+1}/dt}`.
/// Returns `f(X_t)·survival·exp(-∫V)`.
fn path_value(v: &Potential, x: f64, steps: usize, dt: f64, f: &impl Fn(f64) -> f64, normals: &[f64], sign: f64) -> f64 {
    let sd = (2.0 * dt).sqrt();
    let mut pos = x;
    let mut survival = 1.0;
    let mut vprev = v.eval(pos);
    let mut integral = 0.0;
    for z in normals.iter().take(steps) {
        let next = pos + sign * sd * z;
        if next <= 0.0 {
            return 0.0;
        }
        let r = pos * next / dt;
        if r < 40.0 {
            survival *= -(-r).exp_m1();
        }
        let vnext = v.eval(next);
        integral += 0.5 * dt * (vprev + vnext);
        vprev = vnext;
        pos = next;
    }
    f(pos) * survival * (-integral).exp()
}

/// Estimate `(T_V(t) f)(x)`; returns `(mean, standard error)`.
///
/// Each sample (a single path, or an antithetic pair averaged) draws from
/// its own ChaCha stream indexed by the sample number, so the result does
/// not depend on the thread count.
pub fn feynman_kac_estimate<F>(v: &Potential, t: f64, x: f64, f: F, mc: &MCConfig) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64 + Sync,
{
    check_time(t)?;
    mc.validate()?;
    if !(x > 0.0) {
        return Err(crate::Error::invalid(format!("start point must be positive, got {x}")));
    }
    let steps = (t / mc.dt).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let samples = if mc.antithetic { mc.paths.div_ceil(2) } else { mc.paths };
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map_init(
            || vec![0.0; steps],
            |buf, k| {
                let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
                rng.set_stream(k as u64);
                for z in buf.iter_mut() {
                    *z = rng.sample(StandardNormal);
                }
                if mc.antithetic {
                    0.5 * (path_value(v, x, steps, dt, &f, buf, 1.0) + path_value(v, x, steps, dt, &f, buf, -1.0))
                } else {
                    path_value(v, x, steps, dt, &f, buf, 1.0)
                }
            },
        )
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
