use crate::{Error, Result};

fn check_len(a: &[f64], b: &[f64], what: &'static str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            what,
            expected: b.len(),
            got: a.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(())
}

/// Pearson correlation of two per-vertex fields.
pub fn ncc(moved: &[f64], fixed: &[f64]) -> Result<f64> {
    Ok(ncc_grad(moved, fixed)?.0)
}

/// [`ncc`] and its gradient with respect to `fixed`, the field sampled at
/// deformed positions.
pub fn ncc_grad(moved: &[f64], fixed: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len(moved, fixed, "scalar fields")?;
    let n = moved.len() as f64;
    let ma = moved.iter().sum::<f64>() / n;
    let mb = fixed.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in moved.iter().zip(fixed) {
        let (x, y) = (a - ma, b - mb);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    if saa <= 1e-300 || sbb <= 1e-300 {
        return Err(Error::ZeroVariance);
    }
    let den = (saa * sbb).sqrt();
    let r = sab / den;
    // ∂r/∂b_i = (a_i − ā)/den − r (b_i − b̄)/sbb
    let grad = moved
        .iter()
        .zip(fixed)
        .map(|(a, b)| (a - ma) / den - r * (b - mb) / sbb)
        .collect();
    Ok((r.clamp(-1.0, 1.0), grad))
}

/// Mean over parcels of `1 − Dice` for hard labels in `0..parcels`. Parcels
/// absent from both labelings are skipped; the second value counts them.
pub fn dice_loss(moved: &[usize], fixed: &[usize], parcels: usize) -> Result<(f64, usize)> {
    if moved.len() != fixed.len() {
        return Err(Error::SizeMismatch {
            what: "label fields",
            expected: fixed.len(),
            got: moved.len(),
        });
    }
    if let Some(&l) = moved.iter().chain(fixed).find(|&&l| l >= parcels) {
        return Err(Error::InvalidArgument(format!("label {l} outside 0..{parcels}")));
    }
    let mut inter = vec![0usize; parcels];
    let mut cm = vec![0usize; parcels];
    let mut cf = vec![0usize; parcels];
    for (&a, &b) in moved.iter().zip(fixed) {
        cm[a] += 1;
        cf[b] += 1;
        if a == b {
            inter[a] += 1;
        }
    }
    let (mut sum, mut used, mut skipped) = (0.0, 0, 0);
    for p in 0..parcels {
        if cm[p] + cf[p] == 0 {
            skipped += 1;
            continue;
        }
        sum += 1.0 - 2.0 * inter[p] as f64 / (cm[p] + cf[p]) as f64;
        used += 1;
    }
    if used == 0 {
        return Err(Error::EmptySet);
    }
    Ok((sum / used as f64, skipped))
}

/// Soft Dice loss `mean_p (1 − 2Σm_p f_p / (Σm_p² + Σf_p²))` over
/// membership fields, with the gradient with respect to `fixed`.
pub fn soft_dice_grad(moved: &[Vec<f64>], fixed: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
    if moved.len() != fixed.len() || moved.is_empty() {
        return Err(Error::SizeMismatch {
            what: "parcel membership fields",
            expected: fixed.len(),
            got: moved.len(),
        });
    }
    let mut used = 0usize;
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(fixed.len());
    for (m, f) in moved.iter().zip(fixed) {
        check_len(m, f, "membership field")?;
        let num: f64 = m.iter().zip(f).map(|(a, b)| a * b).sum();
        let den: f64 = m.iter().map(|a| a * a).sum::<f64>() + f.iter().map(|b| b * b).sum::<f64>();
        if den <= 1e-300 {
            grads.push(vec![0.0; f.len()]);
            continue;
        }
        used += 1;
        value += 1.0 - 2.0 * num / den;
        grads.push(
            m.iter()
                .zip(f)
                .map(|(a, b)| -2.0 * (a * den - num * 2.0 * b) / (den * den))
                .collect(),
        );
    }
    if used == 0 {
        return Err(Error::EmptySet);
    }
    let s = 1.0 / used as f64;
    grads.iter_mut().flatten().for_each(|g| *g *= s);
    Ok((value * s, grads))
}
