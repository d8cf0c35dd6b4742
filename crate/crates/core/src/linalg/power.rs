use super::{dot, norm, LinearOperator};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn seeded_unit(n: usize, seed: u64) -> Option<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let nv = norm(&v);
    (nv > 0.0).then(|| v.into_iter().map(|x| x / nv).collect())
}

/// Largest eigenvalue of a symmetric (PSD) operator by power iteration.
///
/// Returns the Rayleigh quotient after `iters` steps from a seeded start
/// vector drawn uniformly from `[-1, 1]ⁿ`.
pub fn power_norm<O: LinearOperator + ?Sized>(op: &O, iters: usize, seed: u64) -> Result<f64> {
    if op.dim_in() != op.dim_out() {
        return Err(Error::dim("power_norm (square operator)", op.dim_in(), op.dim_out()));
    }
    let n = op.dim_in();
    power_norm_with(
        n,
        |x: &[f64], out: &mut [f64]| {
            op.apply(x, out);
            Ok(())
        },
        iters,
        seed,
    )
}

/// Power iteration over a fallible operator action (e.g. one involving inner solves).
pub fn power_norm_with<F>(n: usize, mut apply: F, iters: usize, seed: u64) -> Result<f64>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    if iters == 0 {
        return Err(Error::InvalidParameter("power_norm needs iters >= 1".into()));
    }
    if n == 0 {
        return Err(Error::PowerIteration("empty operator"));
    }
    let mut v = match seeded_unit(n, seed).or_else(|| seeded_unit(n, seed.wrapping_add(1))) {
        Some(v) => v,
        None => return Err(Error::PowerIteration("zero start vector")),
    };
    let mut w = vec![0.0; n];
    let mut rayleigh = 0.0;
    let mut reseeded = false;
    let mut it = 0;
    while it < iters {
        apply(&v, &mut w)?;
        rayleigh = dot(&v, &w);
        let nw = norm(&w);
        if !nw.is_finite() {
            return Err(Error::PowerIteration("non-finite iterate"));
        }
        if nw == 0.0 {
            if it == 0 && !reseeded {
                // start vector in the null space; try once more
                reseeded = true;
                v = seeded_unit(n, seed ^ 0x9e37_79b9_7f4a_7c15)
                    .ok_or(Error::PowerIteration("zero start vector"))?;
                continue;
            }
            return Ok(0.0);
        }
        it += 1;
        if it == iters {
            break;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
    }
    Ok(rayleigh)
}
