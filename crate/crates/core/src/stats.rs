//! Sample statistics shared by the samplers, metrics and tests.

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Standard deviation with the `n - 1` denominator.
pub fn sample_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// Standard deviation with the `n` denominator.
pub fn population_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Pearson correlation; 0 when either input has no spread.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Kendall's tau-a in O(n log n), assuming no tied values.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    let mut ys: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let mut buf = vec![0.0; n];
    let discordant = count_inversions(&mut ys, &mut buf);
    let pairs = (n as f64) * (n as f64 - 1.0) / 2.0;
    (pairs - 2.0 * discordant as f64) / pairs
}

fn count_inversions(x: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = x.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (l, r) = x.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        count_inversions(l, bl) + count_inversions(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if x[i] <= x[j] {
            buf[k] = x[i];
            i += 1;
        } else {
            buf[k] = x[j];
            inv += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&x[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&x[j..n]);
    x.copy_from_slice(&buf[..n]);
    inv
}

/// Kolmogorov-Smirnov distance between the sample and U(0, 1).
pub fn ks_uniform_statistic(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let lo = v - i as f64 / n;
            let hi = (i as f64 + 1.0) / n - v;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}
