//! Bessel functions of the first kind, integer order, real argument.
//!
//! All orders are produced at once by Miller's downward recurrence
//! `J_{k-1} = (2k/x) J_k - J_{k+1}`, started well above both the largest
//! requested order and `x`, and normalized with `J_0 + 2 Σ_{k≥1} J_{2k} = 1`.

use crate::error::{Error, Result};

pub const MAX_ORDER: i64 = 10_000;
pub const MAX_ARGUMENT: f64 = 1_000.0;

const RESCALE_ABOVE: f64 = 1e250;
const RESCALE_BY: f64 = 1e-250;

/// `J_n(x)` for `|n| ≤ 10⁴`, `0 ≤ x ≤ 10³`.
pub fn bessel_j(n: i64, x: f64) -> Result<f64> {
    check_domain(n, x)?;
    let order = n.unsigned_abs() as usize;
    let value = bessel_j_orders(order, x)?[order];
    Ok(if n < 0 && order % 2 == 1 { -value } else { value })
}

/// `[J_0(x), J_1(x), ..., J_max_order(x)]`.
pub fn bessel_j_orders(max_order: usize, x: f64) -> Result<Vec<f64>> {
    check_domain(max_order as i64, x)?;
    let mut out = vec![0.0; max_order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return Ok(out);
    }

    let top = max_order.max(x.ceil() as usize) as f64;
    // Even start index far enough above both the order and the argument that
    // the neglected dominant solution has died out by the time we reach them.
    let mut start = (top + 40.0 + 12.0 * top.sqrt()) as usize;
    start += start % 2;

    let two_over_x = 2.0 / x;
    let mut above = 0.0f64;
    let mut current = 1e-300f64;
    let mut even_sum = 0.0f64;
    // Rescale count at the time each order was stored; applied at the end.
    let mut rescales = 0i32;
    let mut stored_at = vec![0i32; max_order + 1];
    for k in (1..=start).rev() {
        // current = J_k (unnormalized), above = J_{k+1}
        if k <= max_order {
            out[k] = current;
            stored_at[k] = rescales;
        }
        if k % 2 == 0 {
            even_sum += current;
        }
        let below = k as f64 * two_over_x * current - above;
        above = current;
        current = below;
        if current.abs() > RESCALE_ABOVE {
            current *= RESCALE_BY;
            above *= RESCALE_BY;
            even_sum *= RESCALE_BY;
            rescales += 1;
        }
    }
    out[0] = current;
    stored_at[0] = rescales;

    let norm = current + 2.0 * even_sum;
    for (v, at) in out.iter_mut().zip(&stored_at) {
        *v = match rescales - at {
            0 => *v / norm,
            1 => *v * RESCALE_BY / norm,
            _ => 0.0,
        };
    }
    Ok(out)
}

/// `J_m(x)` for `m = -M..=M` in ladder order, using `J_{-m} = (-1)^m J_m`.
pub fn bessel_j_ladder(half_width: usize, x: f64) -> Result<Vec<f64>> {
    let pos = bessel_j_orders(half_width, x)?;
    let m = half_width as i64;
    Ok((-m..=m)
        .map(|k| {
            let v = pos[k.unsigned_abs() as usize];
            if k < 0 && k % 2 != 0 {
                -v
            } else {
                v
            }
        })
        .collect())
}

fn check_domain(n: i64, x: f64) -> Result<()> {
    if n.abs() > MAX_ORDER || !(0.0..=MAX_ARGUMENT).contains(&x) {
        Err(Error::Domain { order: n, x })
    } else {
        Ok(())
    }
}
