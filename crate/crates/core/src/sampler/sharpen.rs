use crate::error::{Error, Result};

/// Sharpens a distribution: temperature first, then top-k, then top-p, then
/// renormalization. Zero entries stay zero.
pub fn sharpen(
    row: &[f64],
    temperature: f64,
    top_p: f64,
    top_k: Option<usize>,
) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::Config(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if !(top_p > 0.0 && top_p <= 1.0) {
        return Err(Error::Config(format!(
            "top_p must lie in (0, 1], got {top_p}"
        )));
    }
    if top_k == Some(0) {
        return Err(Error::Config("top_k must be at least 1".into()));
    }
    let mut out: Vec<f64> = if temperature == 1.0 {
        row.to_vec()
    } else {
        let max_log = row
            .iter()
            .filter(|&&q| q > 0.0)
            .map(|q| q.ln())
            .fold(f64::NEG_INFINITY, f64::max);
        row.iter()
            .map(|&q| {
                if q > 0.0 {
                    ((q.ln() - max_log) / temperature).exp()
                } else {
                    0.0
                }
            })
            .collect()
    };
    normalize(&mut out)?;
    let needs_order = top_k.is_some_and(|k| k < out.len()) || top_p < 1.0;
    if needs_order {
        let mut order: Vec<usize> = (0..out.len()).collect();
        order.sort_by(|&a, &b| out[b].total_cmp(&out[a]).then(a.cmp(&b)));
        if let Some(k) = top_k {
            for &a in order.iter().skip(k) {
                out[a] = 0.0;
            }
            normalize(&mut out)?;
        }
        if top_p < 1.0 {
            let mut cum = 0.0;
            let mut keep = order.len();
            for (rank, &a) in order.iter().enumerate() {
                cum += out[a];
                if cum >= top_p {
                    keep = rank + 1;
                    break;
                }
            }
            for &a in order.iter().skip(keep) {
                out[a] = 0.0;
            }
            normalize(&mut out)?;
        }
    }
    Ok(out)
}

fn normalize(row: &mut [f64]) -> Result<()> {
    let total: f64 = row.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::EmptySupport);
    }
    row.iter_mut().for_each(|q| *q /= total);
    Ok(())
}

/// Whether the sharpening settings leave every distribution unchanged.
pub fn is_identity(temperature: f64, top_p: f64, top_k: Option<usize>) -> bool {
    temperature == 1.0 && top_p >= 1.0 && top_k.is_none()
}
