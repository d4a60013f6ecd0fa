/// The Bregman divergence of `phi(u) = sum u log u` between two rate vectors:
/// `sum(-f - f log(g / f) + g)`, with `0 log 0 = 0`.
///
/// Returns `f64::INFINITY` when `g` vanishes where `f` does not.
pub fn bregman_divergence(f: &[f64], g: &[f64]) -> f64 {
    assert_eq!(f.len(), g.len(), "divergence needs a shared support");
    let mut total = 0.0;
    for (&fi, &gi) in f.iter().zip(g) {
        if fi > 0.0 {
            if gi <= 0.0 {
                return f64::INFINITY;
            }
            total += -fi - fi * (gi / fi).ln() + gi;
        } else {
            total += gi;
        }
    }
    total
}

/// Generalized KL divergence `sum(f log(f / g) - f + g)`.
pub fn generalized_kl(f: &[f64], g: &[f64]) -> f64 {
    f.iter()
        .zip(g)
        .map(|(&fi, &gi)| match (fi > 0.0, gi > 0.0) {
            (false, _) => gi,
            (true, false) => f64::INFINITY,
            (true, true) => fi * fi.ln() - fi * gi.ln() - fi + gi,
        })
        .sum()
}
