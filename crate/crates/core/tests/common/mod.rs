//! Brute-force oracles shared by the integration tests. They use only closed forms and
//! dense grids, never the library's own solvers or samplers.

#![allow(dead_code)]

/// Dense grid on `[lo, hi]` followed by repeated zooming on the best cell.
pub fn grid_min_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut best = (lo, f(lo));
    for _ in 0..40 {
        let h = (b - a) / n as f64;
        for i in 0..=n {
            let x = a + h * i as f64;
            let v = f(x);
            if v < best.1 {
                best = (x, v);
            }
        }
        a = (best.0 - 2.0 * h).max(lo);
        b = (best.0 + 2.0 * h).min(hi);
        if b - a < 1e-13 {
            break;
        }
    }
    best
}

/// Two-dimensional analogue of [`grid_min_1d`] on a box.
pub fn grid_min_2d(f: impl Fn(f64, f64) -> f64, lo: [f64; 2], hi: [f64; 2], n: usize) -> ([f64; 2], f64) {
    let (mut a, mut b) = (lo, hi);
    let mut best = (lo, f(lo[0], lo[1]));
    for _ in 0..40 {
        let h = [(b[0] - a[0]) / n as f64, (b[1] - a[1]) / n as f64];
        for i in 0..=n {
            for j in 0..=n {
                let x = [a[0] + h[0] * i as f64, a[1] + h[1] * j as f64];
                let v = f(x[0], x[1]);
                if v < best.1 {
                    best = (x, v);
                }
            }
        }
        for k in 0..2 {
            a[k] = (best.0[k] - 2.0 * h[k]).max(lo[k]);
            b[k] = (best.0[k] + 2.0 * h[k]).min(hi[k]);
        }
        if b[0] - a[0] < 1e-13 && b[1] - a[1] < 1e-13 {
            break;
        }
    }
    best
}

/// `max g` over an `n`-point grid of `(lo, hi]`.
pub fn grid_sup_1d(g: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    (1..=n).map(|i| g(lo + (hi - lo) * i as f64 / n as f64)).fold(f64::NEG_INFINITY, f64::max)
}

/// `min(0, min g(n))` over the given indices.
pub fn enumerate_min(indices: impl Iterator<Item = usize>, g: impl Fn(f64) -> f64) -> f64 {
    indices.map(|n| g(n as f64)).fold(0.0, f64::min)
}

pub fn example_f(x: f64) -> f64 {
    if x <= 0.0 {
        -x
    } else {
        1.0 - (x + 1.0) * (x + 1.0)
    }
}

pub fn example_phi(x: f64) -> f64 {
    x.max(0.0)
}

/// The staircase written from its defining breakpoints: `f(x) = −x` up to 1, then for
/// each `n ≥ 2` a unit ramp from `−1/(n−1)` at `(n−1)²` to `−1/n` at `(n−1)² + 1`
/// followed by a flat step at `−1/n` up to `n²`.
pub fn stairs_f(x: f64) -> f64 {
    if x <= 1.0 {
        return -x;
    }
    let mut n = 2u64;
    while ((n * n) as f64) < x {
        n += 1;
    }
    let start = ((n - 1) * (n - 1)) as f64;
    if x <= start + 1.0 {
        let t = x - start;
        -1.0 / (n - 1) as f64 + t * (1.0 / (n - 1) as f64 - 1.0 / n as f64)
    } else {
        -1.0 / n as f64
    }
}

pub fn stairs_phi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x <= 1.0 {
        x
    } else {
        1.0 / x
    }
}
