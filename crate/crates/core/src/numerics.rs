//! Shared numerical building blocks: adaptive quadrature, 1-D search,
//! polynomial roots and simplex projections.

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
///
/// Recursion stops once the local Richardson error estimate drops below the
/// per-interval share of `tol`, or at depth `max_depth` (the interval
/// estimate is then accepted as is).
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    simpson_rec(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, max_depth)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Golden-section maximization of a unimodal `f` on `[lo, hi]`.
///
/// Returns `(x_max, f(x_max))` with the abscissa located to `tol`.
pub fn golden_max<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
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
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Golden-section minimization on `[lo, hi]`; see [`golden_max`].
pub fn golden_min<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (x, fx) = golden_max(&|x| -f(x), lo, hi, tol);
    (x, -fx)
}

/// Real roots of `c3 x^3 + c2 x^2 + c1 x + c0 = 0`.
///
/// Degenerate leading coefficients fall back to the quadratic/linear case.
/// Three-real-root configurations use the trigonometric form of Cardano's
/// method; a complex pair whose imaginary part is below `1e-9` (relative to
/// the root scale) is collapsed onto its real part. Every root is polished
/// with a few Newton steps on the original polynomial.
pub fn cubic_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let scale = c3.abs().max(c2.abs()).max(c1.abs()).max(c0.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if c3.abs() <= 1e-14 * scale {
        return quadratic_roots(c2, c1, c0);
    }
    let b = c2 / c3;
    let c = c1 / c3;
    let d = c0 / c3;
    // depressed form t^3 + p t + q with x = t - b/3
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = 0.25 * q * q + p * p * p / 27.0;

    let mut roots = Vec::with_capacity(3);
    if disc > 0.0 {
        let sq = disc.sqrt();
        // cube roots taken with matching signs for stability
        let u = cbrt_signed(-0.5 * q + sq);
        let v = if u.abs() > 0.0 { -p / (3.0 * u) } else { cbrt_signed(-0.5 * q - sq) };
        let real = u + v + shift;
        roots.push(real);
        // complex pair: re = -(u+v)/2 + shift, |im| = sqrt(3)/2 |u-v|
        let im = 3.0_f64.sqrt() / 2.0 * (u - v).abs();
        let re = -0.5 * (u + v) + shift;
        if im <= 1e-9 * re.abs().max(1.0) {
            roots.push(re);
            roots.push(re);
        }
    } else if p == 0.0 {
        roots.push(shift);
        roots.push(shift);
        roots.push(shift);
    } else {
        // three real roots
        let r = (-p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos();
        for k in 0..3 {
            let t = 2.0 * r * ((phi - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos();
            roots.push(t + shift);
        }
    }
    for root in &mut roots {
        *root = polish_cubic(c3, c2, c1, c0, *root);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

fn cbrt_signed(x: f64) -> f64 {
    x.signum() * x.abs().cbrt()
}

fn polish_cubic(c3: f64, c2: f64, c1: f64, c0: f64, mut x: f64) -> f64 {
    for _ in 0..3 {
        let fx = ((c3 * x + c2) * x + c1) * x + c0;
        let dfx = (3.0 * c3 * x + 2.0 * c2) * x + c1;
        if dfx.abs() < 1e-300 {
            break;
        }
        let step = fx / dfx;
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    x
}

/// Real roots of `a x^2 + b x + c = 0` (stable form).
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-14 * scale {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + sq.copysign(b));
    if q == 0.0 {
        return vec![0.0, 0.0];
    }
    let mut r = vec![q / a, c / q];
    r.sort_by(|x, y| x.partial_cmp(y).unwrap());
    r
}

/// Euclidean projection of `v` onto the capped simplex
/// `{ w : sum w_i = 1, 0 <= w_i <= cap }`.
///
/// Requires `n * cap >= 1`. The threshold is located by bisection on the
/// monotone map `tau -> sum clamp(v_i - tau, 0, cap)`.
pub fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let n = v.len();
    assert!(n > 0 && (n as f64) * cap >= 1.0 - 1e-12, "empty capped simplex");
    let mass = |tau: f64| -> f64 { v.iter().map(|&x| (x - tau).clamp(0.0, cap)).sum() };
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - cap - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    let mut w: Vec<f64> = v.iter().map(|&x| (x - tau).clamp(0.0, cap)).collect();
    // exact renormalization of the residual rounding error
    let s: f64 = w.iter().sum();
    let err = 1.0 - s;
    if err != 0.0 {
        // spread over strictly interior coordinates to respect the bounds
        let interior: Vec<usize> = (0..n)
            .filter(|&i| w[i] > 0.0 && w[i] < cap)
            .collect();
        if !interior.is_empty() {
            let share = err / interior.len() as f64;
            for i in interior {
                w[i] += share;
            }
        }
    }
    w
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    project_capped_simplex(v, 1.0)
}

/// Shannon entropy `-sum w_i ln w_i` of a weight vector (zero weights
/// contribute nothing).
pub fn entropy(w: &[f64]) -> f64 {
    -w.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}
