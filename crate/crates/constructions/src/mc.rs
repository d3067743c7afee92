//! Deterministic Monte-Carlo loops and exact L1 integrals of simple
//! piecewise functions.

use std::f64::consts::TAU;

/// Evaluates `f(0..n)` on up to `threads` scoped workers; results come back in
/// index order, so they do not depend on the thread count.
pub fn par_map<T, E, F>(n: usize, threads: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync,
{
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        return (0..n).map(&f).collect();
    }
    let chunk = n.div_ceil(threads);
    let f = &f;
    let parts: Vec<Result<Vec<T>, E>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|k| {
                let lo = (k * chunk).min(n);
                let hi = ((k + 1) * chunk).min(n);
                s.spawn(move || (lo..hi).map(f).collect::<Result<Vec<T>, E>>())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// `∫ |p(y) - c|` over one interval where `p` is linear from `pa` to `pb`.
pub fn abs_linear_integral(pa: f64, pb: f64, c: f64, len: f64) -> f64 {
    let (da, db) = (pa - c, pb - c);
    if da * db >= 0.0 {
        0.5 * (da.abs() + db.abs()) * len
    } else {
        0.5 * (da * da + db * db) / (da.abs() + db.abs()) * len
    }
}

/// L1 distance on `[lo, hi]` between a continuous piecewise-linear function
/// known at sorted `breaks` (values `pred`) and a function constant between
/// consecutive breaks.
pub fn l1_linear_vs_constant(breaks: &[f64], pred: &[f64], truth: impl Fn(f64) -> f64) -> f64 {
    breaks
        .windows(2)
        .zip(pred.windows(2))
        .map(|(b, p)| {
            let len = b[1] - b[0];
            if len <= 0.0 {
                return 0.0;
            }
            abs_linear_integral(p[0], p[1], truth(0.5 * (b[0] + b[1])), len)
        })
        .sum()
}

/// Length of `[lo, hi] ∩ ([a, b] + 2πℤ)` for `b - a ≤ 2π` and `hi - lo ≤ 2π`.
pub fn periodic_overlap(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    let shift = ((lo - a) / TAU).floor() * TAU;
    (-1..=1)
        .map(|k| {
            let (s, e) = (a + shift + k as f64 * TAU, b + shift + k as f64 * TAU);
            (e.min(hi) - s.max(lo)).max(0.0)
        })
        .sum()
}

/// Sorted copy of `xs` restricted to `[lo, hi]`, with both ends included.
pub fn sorted_breaks(xs: impl IntoIterator<Item = f64>, lo: f64, hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = xs.into_iter().filter(|x| *x > lo && *x < hi).collect();
    v.push(lo);
    v.push(hi);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}
