//! Small statistics helpers shared by the acceptance suite.

/// Sample mean and standard error of the mean.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Linear interpolation of `y(x)` on a curve sorted by `x`; `None` outside
/// its range.
pub fn interp(curve: &[(f64, f64)], x: f64) -> Option<f64> {
    let (first, last) = (curve.first()?, curve.last()?);
    if x < first.0 || x > last.0 {
        return None;
    }
    curve.windows(2).find(|w| x >= w[0].0 && x <= w[1].0).map(|w| {
        let (a, b) = (w[0], w[1]);
        if b.0 == a.0 {
            a.1
        } else {
            a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
        }
    })
    .or(Some(first.1).filter(|_| curve.len() == 1))
}

/// Whether `v` is strictly monotone in either direction.
pub fn strictly_monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0]) || v.windows(2).all(|w| w[1] < w[0])
}

/// Prints the one-line verdict for an acceptance criterion and returns it.
pub fn verdict(id: u32, title: &str, passed: bool, detail: &str) -> bool {
    println!("{} criterion {id:>2} {title}: {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}
