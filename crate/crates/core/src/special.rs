//! Bessel functions of the first kind for integer order.

/// `J_0(x), ..., J_nmax(x)` by Miller's backward recurrence, normalized with
/// `J_0 + 2 sum_k J_2k = 1`.
pub fn bessel_j_sequence(x: f64, nmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = nmax.max(ax as usize);
    // start well above both the requested order and the argument
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let (mut next, mut cur) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    for k in (0..=start).rev() {
        if k <= nmax {
            out[k] = cur;
        }
        if k % 2 == 0 {
            norm += if k == 0 { cur } else { 2.0 * cur };
        }
        if k == 0 {
            break;
        }
        let prev = 2.0 * k as f64 / ax * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// `J_n(x)` for any integer `n`, using `J_{-n}(x) = (-1)^n J_n(x)`.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let m = n.unsigned_abs() as usize;
    let v = bessel_j_sequence(x, m)[m];
    if n < 0 && m % 2 == 1 {
        -v
    } else {
        v
    }
}
