use std::f64::consts::PI;

/// Normal density `G(x; mu, sigma)`.
pub fn kernel(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}

/// `(dG/dx, dG/dmu, dG/dlog_sigma)`.
pub(crate) fn kernel_partials(x: f64, mu: f64, sigma: f64) -> (f64, f64, f64) {
    let s = kernel(x, mu, sigma);
    let u = (x - mu) / (sigma * sigma);
    let z2 = (x - mu) * (x - mu) / (sigma * sigma);
    (-s * u, s * u, s * (z2 - 1.0))
}
