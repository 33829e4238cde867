//! Statistical machinery for the stream optimizer: AUROC, paired one-tailed
//! t-test, and the Shapiro-Wilk normality test.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("scores and labels have different lengths ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("AUROC undefined: labels contain a single class")]
    SingleClassLabels,
    #[error("scores must be finite")]
    NonFiniteScore,
    #[error("paired t-test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("paired t-test degenerate: zero-variance differences")]
    ZeroVarianceDifferences,
    #[error("Shapiro-Wilk requires 3 <= n <= 5000, got {0}")]
    SampleSize(usize),
    #[error("Shapiro-Wilk undefined for a zero-range sample")]
    ZeroRange,
}

/// Per-label AUROC values with their mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AurocResult {
    pub per_label: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl AurocResult {
    pub fn from_per_label(per_label: Vec<f64>) -> Self {
        let n = per_label.len() as f64;
        let mean = per_label.iter().sum::<f64>() / n;
        let std = if per_label.len() < 2 {
            0.0
        } else {
            let ss: f64 = per_label.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1.0)).sqrt()
        };
        Self { per_label, mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

/// AUROC in the Mann-Whitney formulation:
/// (#concordant pairs + 0.5 * #tied pairs) / (positives * negatives),
/// computed via midranks in O(n log n).
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, StatsError> {
    if scores.len() != labels.len() {
        return Err(StatsError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(StatsError::NonFiniteScore);
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(StatsError::SingleClassLabels);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // Midranks over tie groups; sum the ranks of the positives.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }

    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Paired one-tailed t-test with the left-tail alternative "candidate mean
/// is less than reference mean": small p means the candidate is
/// significantly worse.
pub fn paired_t_test_one_tailed(
    candidate: &[f64],
    reference: &[f64],
) -> Result<TTestResult, StatsError> {
    if candidate.len() != reference.len() {
        return Err(StatsError::LengthMismatch {
            scores: candidate.len(),
            labels: reference.len(),
        });
    }
    let n = candidate.len();
    if n < 2 {
        return Err(StatsError::TooFewPairs(n));
    }
    let diffs: Vec<f64> = candidate.iter().zip(reference).map(|(c, r)| c - r).collect();
    // Structural degeneracy check: identical differences would make the
    // statistic undefined, and float rounding in mean/sd cannot be trusted
    // to land on exactly zero.
    if diffs.windows(2).all(|w| w[0] == w[1]) {
        return Err(StatsError::ZeroVarianceDifferences);
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let ss: f64 = diffs.iter().map(|e| (e - mean) * (e - mean)).sum();
    let sd = (ss / (nf - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(StatsError::ZeroVarianceDifferences);
    }
    let t = mean / (sd / nf.sqrt());
    let dof = (n - 1) as u64;
    Ok(TTestResult { t_statistic: t, dof, p_value: student_t_cdf(t, dof) })
}

/// CDF of Student's t distribution (left tail), evaluated through the
/// regularized incomplete beta function.
pub fn student_t_cdf(t: f64, dof: u64) -> f64 {
    debug_assert!(dof >= 1);
    let v = dof as f64;
    let x = v / (v + t * t);
    // I_x(v/2, 1/2) is the two-sided tail probability P(|T| >= |t|).
    let tail = reg_inc_beta(v / 2.0, 0.5, x);
    if t >= 0.0 {
        1.0 - 0.5 * tail
    } else {
        0.5 * tail
    }
}

/// Regularized incomplete beta I_x(a, b) by continued fraction
/// (modified Lentz), for the half-integer arguments the t CDF needs.
fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta_halves(a, b);
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// ln B(a, b) for a, b positive multiples of 1/2, via the Gamma recurrence
/// from Gamma(1/2) = sqrt(pi) and Gamma(1) = 1. Exact structure, no
/// polynomial approximation.
fn ln_beta_halves(a: f64, b: f64) -> f64 {
    ln_gamma_half(a) + ln_gamma_half(b) - ln_gamma_half(a + b)
}

fn ln_gamma_half(x: f64) -> f64 {
    debug_assert!(x > 0.0 && (2.0 * x).fract() == 0.0, "argument must be a half-integer");
    let odd = (2.0 * x) as u64 % 2 == 1;
    let half_ln_pi = 0.5 * std::f64::consts::PI.ln();
    let mut acc = if odd { half_ln_pi } else { 0.0 };
    let mut arg = if odd { 0.5 } else { 1.0 };
    while arg < x - 0.25 {
        acc += arg.ln();
        arg += 1.0;
    }
    acc
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 400;
    const EPS: f64 = 1e-16;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Shapiro-Wilk W test, Royston's AS R94 algorithm (uncensored samples).
/// Returns (W, p). `sample` need not be sorted.
pub fn shapiro_wilk(sample: &[f64]) -> Result<(f64, f64), StatsError> {
    let n = sample.len();
    if !(3..=5000).contains(&n) {
        return Err(StatsError::SampleSize(n));
    }
    let mut x = sample.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());

    const SMALL: f64 = 1e-19;
    let nf = n as f64;
    let nn2 = n / 2;

    // Approximate normal-order-statistic weights for the lower half.
    let mut a = vec![0.0f64; nn2];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let an25 = nf + 0.25;
        let mut summ2 = 0.0;
        for (i, ai) in a.iter_mut().enumerate() {
            *ai = ppnd((i as f64 + 1.0 - 0.375) / an25);
            summ2 += *ai * *ai;
        }
        summ2 *= 2.0;
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / nf.sqrt();
        let a1 = poly(&C1, rsn) - a[0] / ssumm2;
        let (i1, fac) = if n > 5 {
            let a2 = -a[1] / ssumm2 + poly(&C2, rsn);
            let fac = ((summ2 - 2.0 * a[0] * a[0] - 2.0 * a[1] * a[1])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            a[1] = a2;
            (2, fac)
        } else {
            let fac = ((summ2 - 2.0 * a[0] * a[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
            (1, fac)
        };
        a[0] = a1;
        for ai in a.iter_mut().skip(i1) {
            *ai = -*ai / fac;
        }
    }

    let range = x[n - 1] - x[0];
    if range < SMALL {
        return Err(StatsError::ZeroRange);
    }

    // W = (sum a_i x_(i))^2 / sum (x_i - mean)^2, folded symmetrically.
    let mut sx = x[0] / range;
    let mut sa = -a[0];
    let mut ind2 = n as i64 - 2;
    for ind1 in 1..n as i64 {
        sx += x[ind1 as usize] / range;
        if ind1 != ind2 {
            let sign = if ind1 < ind2 { -1.0 } else { 1.0 };
            sa += sign * a[ind1.min(ind2) as usize];
        }
        ind2 -= 1;
    }
    sa /= nf;
    sx /= nf;

    let mut ssa = 0.0;
    let mut ssx = 0.0;
    let mut sax = 0.0;
    let mut ind2 = n as i64 - 1;
    for ind1 in 0..n as i64 {
        let asa = if ind1 == ind2 {
            -sa
        } else {
            let sign = if ind1 < ind2 { -1.0 } else { 1.0 };
            sign * a[ind1.min(ind2) as usize] - sa
        };
        let xsx = x[ind1 as usize] / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
        ind2 -= 1;
    }
    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = 1.0 - w1;

    // Significance.
    if n == 3 {
        if w < 0.75 {
            return Ok((0.75, 0.0));
        }
        let pi6 = 6.0 / std::f64::consts::PI;
        return Ok((w, 1.0 - pi6 * w.sqrt().acos()));
    }
    let y = w1.ln();
    let xx = nf.ln();
    let (m, s, y) = if n <= 11 {
        let gamma = poly(&G, nf);
        if y >= gamma {
            return Ok((w, SMALL));
        }
        (poly(&C3, nf), poly(&C4, nf).exp(), -(gamma - y).ln())
    } else {
        (poly(&C5, xx), poly(&C6, xx).exp(), y)
    };
    Ok((w, alnorm((y - m) / s, true)))
}

// AS R94 polynomial coefficients, ascending powers.
const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -2.0322e-3];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 3.8915e-3];
const C6: [f64; 3] = [-0.4803, -0.082676, 3.0302e-3];
const G: [f64; 2] = [-2.273, 0.459];

fn poly(c: &[f64], x: f64) -> f64 {
    let mut p = 0.0;
    for &coef in c.iter().rev() {
        p = p * x + coef;
    }
    p
}

/// AS 66: upper (or lower) tail area of the standard normal distribution.
fn alnorm(x: f64, upper: bool) -> f64 {
    const LTONE: f64 = 7.0;
    const UTZERO: f64 = 38.0;
    const CON: f64 = 1.28;

    let (z, upper) = if x < 0.0 { (-x, !upper) } else { (x, upper) };
    if !(z <= LTONE || (upper && z <= UTZERO)) {
        return if upper { 0.0 } else { 1.0 };
    }
    let y = 0.5 * z * z;
    let temp = if z <= CON {
        0.5 - z
            * (0.398942280444
                - 0.399903438504 * y
                    / (y + 5.75885480458
                        - 29.8213557808 / (y + 2.62433121679 + 48.6959930692 / (y + 5.92885724438))))
    } else {
        0.398942280385 * (-y).exp()
            / (z - 3.8052e-8
                + 1.00000615302
                    / (z + 3.98064794e-4
                        + 1.98615381364
                            / (z - 0.151679116635
                                + 5.29330324926
                                    / (z + 4.8385912808
                                        - 15.1508972451
                                            / (z + 0.742380924027
                                                + 30.789933034 / (z + 3.99019417011))))))
    };
    if upper {
        temp
    } else {
        1.0 - temp
    }
}

/// AS 111: percent point (inverse CDF) of the standard normal distribution.
fn ppnd(p: f64) -> f64 {
    const SPLIT: f64 = 0.42;
    let q = p - 0.5;
    if q.abs() <= SPLIT {
        let r = q * q;
        return q
            * (((-25.44106049637 * r + 41.39119773534) * r - 18.61500062529) * r + 2.50662823884)
            / ((((3.13082909833 * r - 21.06224101826) * r + 23.08336743743) * r - 8.47351093090)
                * r
                + 1.0);
    }
    let mut r = if q > 0.0 { 1.0 - p } else { p };
    if r <= 0.0 {
        return 0.0;
    }
    r = (-r.ln()).sqrt();
    let temp = (((2.32121276858 * r + 4.85014127135) * r - 2.29796479134) * r - 2.78718931138)
        / ((1.63706781897 * r + 3.54388924762) * r + 1.0);
    if q < 0.0 {
        -temp
    } else {
        temp
    }
}
