//! Scalar bracketing, bisection and golden-section search.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Root of a non-decreasing `f` on `[lo, hi]` with `f(lo) < 0 ≤ f(hi)`,
/// bisected until the bracket cannot shrink further.
pub fn bisect_increasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() < f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Maximizer of a unimodal `f` on `[a, b]`, located to within `width`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, width: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > width {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if c >= d {
            break;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .max_by(|p, q| p.1.total_cmp(&q.1))
        .expect("three candidates")
}

/// Minimizer of a unimodal `f` on `[a, b]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, width: f64) -> (f64, f64) {
    let (x, v) = golden_max(|t| -f(t), a, b, width);
    (x, -v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_hits_sqrt_two() {
        let r = bisect_increasing(|x| x * x - 2.0, 0.0, 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, v) = golden_max(|x| -(x - 0.3) * (x - 0.3) + 1.0, -2.0, 5.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 1.0).abs() < 1e-14);
        let (x, _) = golden_min(|x| (x - 4.0).abs(), 0.0, 10.0, 1e-10);
        assert!((x - 4.0).abs() < 1e-9);
    }
}
