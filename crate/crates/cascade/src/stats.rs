//! Deterministic statistical kernels: pairwise summation, Gaussian special
//! functions, Kolmogorov–Smirnov tests, quantiles, and bootstrap confidence
//! intervals.
//!
//! Everything here is branch-stable and allocation-conscious so ensemble
//! reductions are bit-identical regardless of thread count.

// the Cody/Wichura coefficients are kept verbatim from their publications
#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

/// Hex-encoded SHA-256, used as the content digest on params and configs.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::Digest;
    let digest = sha2::Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Pairwise (cascade) summation. Fixed reduction tree, so the result is a
/// pure function of the input order — the deterministic merge primitive for
/// parallel moment accumulation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BASE: usize = 32;
    if values.len() <= BASE {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Error function, Cody's rational Chebyshev approximation (SPECFUN ERF).
/// Relative error below 1e-15 over the real line.
pub fn erf(x: f64) -> f64 {
    1.0 - erfc(x)
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.16112374387056560e0,
        1.13864154151050156e2,
        3.77485237685302021e2,
        3.20937758913846947e3,
        1.85777706184603153e-1,
    ];
    const B: [f64; 4] = [
        2.36012909523441209e1,
        2.44024637934444173e2,
        1.28261652607737228e3,
        2.84423683343917062e3,
    ];
    const C: [f64; 9] = [
        5.64188496988670089e-1,
        8.88314979438837594e0,
        6.61191906371416295e1,
        2.98635138197400131e2,
        8.81952221241769090e2,
        1.71204761263407058e3,
        2.05107837782607147e3,
        1.23033935479799725e3,
        2.15311535474403846e-8,
    ];
    const D: [f64; 8] = [
        1.57449261107098347e1,
        1.17693950891312499e2,
        5.37181101862009858e2,
        1.62138957456669019e3,
        3.29079923573345963e3,
        4.36261909014324716e3,
        3.43936767414372164e3,
        1.23033935480374942e3,
    ];
    const P: [f64; 6] = [
        3.05326634961232344e-1,
        3.60344899949804439e-1,
        1.25781726111229246e-1,
        1.60837851487422766e-2,
        6.58749161529837803e-4,
        1.63153871373020978e-2,
    ];
    const Q: [f64; 5] = [
        2.56852019228982242e0,
        1.87295284992346047e0,
        5.27905102951428412e-1,
        6.05183413124413191e-2,
        2.33520497626869185e-3,
    ];
    const INV_SQRT_PI: f64 = 5.6418958354775628695e-1;

    let y = x.abs();
    if y <= 0.46875 {
        let z = y * y;
        let mut num = A[4] * z;
        let mut den = z;
        for i in 0..3 {
            num = (num + A[i]) * z;
            den = (den + B[i]) * z;
        }
        return 1.0 - x * (num + A[3]) / (den + B[3]);
    }
    let result = if y <= 4.0 {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        (-y * y).exp() * (num + C[7]) / (den + D[7])
    } else if y < 26.5 {
        let z = 1.0 / (y * y);
        let mut num = P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + P[i]) * z;
            den = (den + Q[i]) * z;
        }
        let tail = z * (num + P[4]) / (den + Q[4]);
        (-y * y).exp() * (INV_SQRT_PI - tail) / y
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Inverse standard normal CDF, Wichura's AS 241 algorithm PPND16.
/// Absolute error in the returned deviate below 1e-15 for p in (0, 1) —
/// well inside the 1e-9 budget the sampler contract demands.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("normal_quantile requires p in (0,1), got {p}")));
    }
    const A: [f64; 8] = [
        3.3871328727963666080e0,
        1.3314166789178437745e2,
        1.9715909503065514427e3,
        1.3731693765509461125e4,
        4.5921953931549871457e4,
        6.7265770927008700853e4,
        3.3430575583588128105e4,
        2.5090809287301226727e3,
    ];
    const B: [f64; 7] = [
        4.2313330701600911252e1,
        6.8718700749205790830e2,
        5.3941960214247511077e3,
        2.1213794301586595867e4,
        3.9307895800092710610e4,
        2.8729085735721942674e4,
        5.2264952788528545610e3,
    ];
    const C: [f64; 8] = [
        1.42343711074968357734e0,
        4.63033784615654529590e0,
        5.76949722146069140550e0,
        3.64784832476320460504e0,
        1.27045825245236838258e0,
        2.41780725177450611770e-1,
        2.27238449892691845833e-2,
        7.74545014278341407640e-4,
    ];
    const D: [f64; 7] = [
        2.05319162663775882187e0,
        1.67638483018380384940e0,
        6.89767334985100004550e-1,
        1.48103976427480074590e-1,
        1.51986665636164571966e-2,
        5.47593808499534494600e-4,
        1.05075007164441684324e-9,
    ];
    const E: [f64; 8] = [
        6.65790464350110377720e0,
        5.46378491116411436990e0,
        1.78482653991729133580e0,
        2.96560571828504891230e-1,
        2.65321895265761230930e-2,
        1.24266094738807843860e-3,
        2.71155556874348757815e-5,
        2.01033439929228813265e-7,
    ];
    const F: [f64; 7] = [
        5.99832206555887937690e-1,
        1.36929880922735805310e-1,
        1.48753612908506148525e-2,
        7.86869131145613259100e-4,
        1.84631831751005468180e-5,
        1.42151175831644588870e-7,
        2.04426310338993978564e-15,
    ];

    let rational = |r: f64, num: &[f64; 8], den: &[f64; 7]| -> f64 {
        let n = ((((((num[7] * r + num[6]) * r + num[5]) * r + num[4]) * r + num[3]) * r + num[2]) * r
            + num[1])
            * r
            + num[0];
        let d = ((((((den[6] * r + den[5]) * r + den[4]) * r + den[3]) * r + den[2]) * r + den[1]) * r
            + den[0])
            * r
            + 1.0;
        n / d
    };

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return Ok(q * rational(r, &A, &B));
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let value = if r <= 5.0 {
        rational(r - 1.6, &C, &D)
    } else {
        rational(r - 5.0, &E, &F)
    };
    Ok(if q < 0.0 { -value } else { value })
}

/// Survival function of the Kolmogorov distribution,
/// Q(t) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²t²).
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 1.0 {
        // Jacobi-theta form converges fast for small t
        let mut cdf = 0.0;
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * t * t);
        for k in 1..=20u32 {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * c).exp();
            cdf += term;
            if term < 1e-300 {
                break;
            }
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / t;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sf = 0.0;
    for k in 1..=100u32 {
        let term = (-2.0 * (k as f64) * (k as f64) * t * t).exp();
        let signed = if k % 2 == 1 { term } else { -term };
        sf += signed;
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sf).clamp(0.0, 1.0)
}

fn sorted_copy(data: &[f64]) -> Vec<f64> {
    let mut v = data.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample in KS input"));
    v
}

/// Stephens' finite-sample argument for the asymptotic Kolmogorov law.
fn stephens_argument(n_eff: f64, d: f64) -> f64 {
    (n_eff.sqrt() + 0.12 + 0.11 / n_eff.sqrt()) * d
}

/// One-sample KS test of `data` against a continuous CDF.
/// Returns (statistic D, asymptotic p-value).
pub fn ks_test_one_sample<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::domain("KS test needs a nonempty sample"));
    }
    let sorted = sorted_copy(data);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        let lo = (f - i as f64 / n).abs();
        let hi = ((i + 1) as f64 / n - f).abs();
        d = d.max(lo).max(hi);
    }
    Ok((d, kolmogorov_sf(stephens_argument(n, d))))
}

/// Two-sample KS test. Returns (statistic D, asymptotic p-value) with the
/// effective size n₁n₂/(n₁+n₂).
pub fn ks_test_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("KS test needs nonempty samples"));
    }
    let sa = sorted_copy(a);
    let sb = sorted_copy(b);
    let (na, nb) = (sa.len(), sb.len());
    let mut d = 0.0f64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < na && j < nb {
        let x = sa[i].min(sb[j]);
        while i < na && sa[i] <= x {
            i += 1;
        }
        while j < nb && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let n_eff = (na as f64 * nb as f64) / (na as f64 + nb as f64);
    Ok((d, kolmogorov_sf(stephens_argument(n_eff, d))))
}

/// Type-7 (linear interpolation) quantile of sorted data, q in [0, 1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Percentile bootstrap confidence interval for a quantile.
/// Resampling is driven by the counter-based generator, so the interval is a
/// pure function of (values, q, resamples, seed, confidence).
pub fn bootstrap_quantile_ci(
    values: &[f64],
    q: f64,
    resamples: usize,
    seed: u64,
    confidence: f64,
) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::domain("bootstrap needs a nonempty sample"));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::domain(format!("confidence must be in (0,1), got {confidence}")));
    }
    let n = values.len();
    let mut estimates = Vec::with_capacity(resamples);
    let mut resample = Vec::with_capacity(n);
    for rep in 0..resamples {
        resample.clear();
        for draw in 0..n {
            let u = crate::measures::uniform_01(seed, rep as u64, draw as u64);
            let idx = ((u * n as f64) as usize).min(n - 1);
            resample.push(values[idx]);
        }
        resample.sort_by(|a, b| a.partial_cmp(b).expect("non-finite bootstrap value"));
        estimates.push(quantile_sorted(&resample, q));
    }
    estimates.sort_by(|a, b| a.partial_cmp(b).expect("non-finite bootstrap estimate"));
    let tail = (1.0 - confidence) / 2.0;
    Ok((quantile_sorted(&estimates, tail), quantile_sorted(&estimates, 1.0 - tail)))
}

/// Percentile bootstrap confidence interval for the mean.
pub fn bootstrap_mean_ci(
    values: &[f64],
    resamples: usize,
    seed: u64,
    confidence: f64,
) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::domain("bootstrap needs a nonempty sample"));
    }
    let n = values.len();
    let mut estimates = Vec::with_capacity(resamples);
    for rep in 0..resamples {
        let mut acc = 0.0;
        for draw in 0..n {
            let u = crate::measures::uniform_01(seed, rep as u64, draw as u64);
            let idx = ((u * n as f64) as usize).min(n - 1);
            acc += values[idx];
        }
        estimates.push(acc / n as f64);
    }
    estimates.sort_by(|a, b| a.partial_cmp(b).expect("non-finite bootstrap estimate"));
    let tail = (1.0 - confidence) / 2.0;
    Ok((quantile_sorted(&estimates, tail), quantile_sorted(&estimates, 1.0 - tail)))
}
