//! Small quadrature helpers.

const GAUSS4_NODES: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GAUSS4_WEIGHTS: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];

/// 4-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss4(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GAUSS4_NODES.iter().zip(GAUSS4_WEIGHTS).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Gauss rule on each piece of `[a, b]` cut at the interior `breaks`.
pub fn gauss4_split(a: f64, b: f64, breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut total = 0.0;
    let mut lo = a;
    for &s in breaks.iter().filter(|&&s| s > a && s < b) {
        total += gauss4(lo, s, &mut f);
        lo = s;
    }
    total + gauss4(lo, b, &mut f)
}

/// Trapezoid weights for `n` uniformly spaced samples of step `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| if k == 0 || k == n - 1 { 0.5 * h } else { h }).collect(),
    }
}
