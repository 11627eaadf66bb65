//! Binomial probabilities evaluated in log space.

/// `ln C(n, k)` as a sum of logarithms.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// `ln [C(n, k) p^k (1-p)^(n-k)]`.
pub fn ln_binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_choose(n, k) + pow_term(k, p) + pow_term(n - k, 1.0 - p)
}

/// `ln q^count`, with `0^0 = 1`.
fn pow_term(count: u64, q: f64) -> f64 {
    if count == 0 {
        0.0
    } else if q <= 0.0 {
        f64::NEG_INFINITY
    } else {
        count as f64 * q.ln()
    }
}

/// `ln sum_i exp(x_i)` without overflow.
fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln P(X <= k)` for `X ~ Binomial(n, p)`.
pub fn ln_binomial_cdf(n: u64, k: u64, p: f64) -> f64 {
    if k >= n {
        return 0.0;
    }
    log_sum_exp((0..=k).map(|i| ln_binomial_pmf(n, i, p))).min(0.0)
}

/// `ln P(X <= k)` for `k = 0..=kmax`, in one pass over the pmf.
pub fn ln_binomial_cdf_prefix(n: u64, kmax: u64, p: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax as usize + 1);
    let mut ln_choose = 0.0;
    let mut acc = f64::NEG_INFINITY;
    for k in 0..=kmax {
        if k >= n {
            out.push(0.0);
            continue;
        }
        if k > 0 {
            ln_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        let t = ln_choose + pow_term(k, p) + pow_term(n - k, 1.0 - p);
        acc = if acc == f64::NEG_INFINITY {
            t
        } else {
            let (hi, lo) = if acc > t { (acc, t) } else { (t, acc) };
            hi + (lo - hi).exp().ln_1p()
        };
        out.push(acc.min(0.0));
    }
    out
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`.
pub fn binomial_cdf(n: u64, k: u64, p: f64) -> f64 {
    ln_binomial_cdf(n, k, p).exp()
}
