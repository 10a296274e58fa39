//! One-dimensional logistic-mixture CDF `F(y) = (1/P) Σ σ((y - μ_j) / h_j)`
//! and the marginal map `Ψ = Φ⁻¹ ∘ F` built on it.

use super::normal;
use crate::error::{Error, Result};

/// Lower bound on `min(F, 1 - F)` before the Gaussian quantile is taken.
pub(crate) const CDF_CLAMP: f64 = 1e-7;

const MAX_ROOT_ITERS: usize = 200;

/// Parameters of one dimension of one marginal layer.
#[derive(Clone, Copy)]
pub(crate) struct Mixture<'a> {
    pub anchors: &'a [f64],
    pub log_bw: &'a [f64],
    pub bw: &'a [f64],
}

fn log_sigmoid(u: f64) -> f64 {
    // ln σ(u) = -softplus(-u)
    if u >= 0.0 {
        -(-u).exp().ln_1p()
    } else {
        u - u.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `ln σ'(u) = ln σ(u) + ln σ(-u)`.
fn log_dsigmoid(u: f64) -> f64 {
    let a = u.abs();
    -a - 2.0 * (-a).exp().ln_1p()
}

/// Streaming log-sum-exp; each value is produced once.
fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut acc = 0.0;
    for v in values {
        if v > max {
            acc = acc * (max - v).exp() + 1.0;
            max = v;
        } else {
            acc += (v - max).exp();
        }
    }
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + acc.ln()
}

impl Mixture<'_> {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    fn u(&self, y: f64, j: usize) -> f64 {
        (y - self.anchors[j]) / self.bw[j]
    }

    fn ln_p(&self) -> f64 {
        (self.len() as f64).ln()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        (0..self.len()).map(|j| sigmoid(self.u(y, j))).sum::<f64>() / self.len() as f64
    }

    /// `1 - F(y)` without cancellation.
    pub fn sf(&self, y: f64) -> f64 {
        (0..self.len()).map(|j| sigmoid(-self.u(y, j))).sum::<f64>() / self.len() as f64
    }

    pub fn log_cdf(&self, y: f64) -> f64 {
        log_sum_exp((0..self.len()).map(move |j| log_sigmoid(self.u(y, j)))) - self.ln_p()
    }

    pub fn log_sf(&self, y: f64) -> f64 {
        log_sum_exp((0..self.len()).map(move |j| log_sigmoid(-self.u(y, j)))) - self.ln_p()
    }

    /// Log of the mixture density `f = F'`.
    pub fn log_pdf(&self, y: f64) -> f64 {
        log_sum_exp(
            (0..self.len()).map(move |j| log_dsigmoid(self.u(y, j)) - self.log_bw[j]),
        ) - self.ln_p()
    }

    /// Forward marginal map `Φ⁻¹(F(x))` with the CDF clamped away from 0 and 1.
    pub fn psi(&self, x: f64) -> f64 {
        let lower = self.cdf(x);
        if lower <= 0.5 {
            normal::ppf_lower(lower.max(CDF_CLAMP))
        } else {
            -normal::ppf_lower(self.sf(x).max(CDF_CLAMP))
        }
    }

    /// Probability of the requested tail and the density at `y`, computed
    /// as plain sums. Either may underflow to zero far in the tails.
    fn tail_and_pdf(&self, y: f64, upper: bool) -> (f64, f64) {
        let mut tail = 0.0;
        let mut pdf = 0.0;
        for j in 0..self.len() {
            let u = self.u(y, j);
            let e = (-u.abs()).exp();
            let big = 1.0 / (1.0 + e);
            let small = e * big;
            // σ(u) and σ(-u) without cancellation
            let (lower, upper_tail) = if u >= 0.0 { (big, small) } else { (small, big) };
            tail += if upper { upper_tail } else { lower };
            pdf += big * small / self.bw[j];
        }
        let n = self.len() as f64;
        (tail / n, pdf / n)
    }

    /// Solves `F(y) = Φ(x)` by safeguarded Newton iteration on the log of
    /// whichever tail keeps the target representable.
    pub fn psi_inverse(&self, x: f64) -> Result<f64> {
        let upper = x > 0.0;
        let target = if upper {
            normal::log_cdf(-x)
        } else {
            normal::log_cdf(x)
        };
        if !target.is_finite() {
            return Err(Error::RootFinding { target });
        }
        // Plain sums are accurate while the tail stays well above underflow.
        let direct = target > -600.0;
        // (g, g') with g increasing in y and zero at the solution
        let eval = |y: f64| -> (f64, f64) {
            if direct {
                let (tail, pdf) = self.tail_and_pdf(y, upper);
                if tail > 1e-300 {
                    let slope = pdf / tail;
                    return if upper {
                        (target - tail.ln(), slope)
                    } else {
                        (tail.ln() - target, slope)
                    };
                }
            }
            let lp = self.log_pdf(y);
            if upper {
                let ls = self.log_sf(y);
                (target - ls, (lp - ls).exp())
            } else {
                let lc = self.log_cdf(y);
                (lc - target, (lp - lc).exp())
            }
        };

        let lo_anchor = self.anchors.iter().copied().fold(f64::INFINITY, f64::min);
        let hi_anchor = self.anchors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let h_max = self.bw.iter().copied().fold(0.0, f64::max);
        let mut step = h_max.max(1e-12);
        let mut lo = lo_anchor - step;
        let mut hi = hi_anchor + step;
        let mut expansions = 0;
        while eval(lo).0 > 0.0 {
            lo -= step;
            step *= 2.0;
            expansions += 1;
            if expansions > 2000 || !lo.is_finite() {
                return Err(Error::RootFinding { target });
            }
        }
        step = h_max.max(1e-12);
        while eval(hi).0 < 0.0 {
            hi += step;
            step *= 2.0;
            expansions += 1;
            if expansions > 2000 || !hi.is_finite() {
                return Err(Error::RootFinding { target });
            }
        }

        // near-identity layers put the root close to x itself
        let mut y = if x > lo && x < hi { x } else { 0.5 * (lo + hi) };
        let mut prev_g = f64::INFINITY;
        for _ in 0..MAX_ROOT_ITERS {
            let (gy, slope) = eval(y);
            if gy.abs() <= 1e-14 * target.abs().max(1.0) {
                return Ok(if slope > 0.0 { y - gy / slope } else { y });
            }
            if gy > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            // Newton can bounce between the bracket ends without shrinking it
            let stalled = gy.abs() > 0.5 * prev_g;
            prev_g = gy.abs();
            let newton = y - gy / slope;
            let next = if !stalled && slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let tol = 4.0 * f64::EPSILON * y.abs().max(1e-3);
            if (next - y).abs() <= tol || (hi - lo) <= tol {
                return Ok(next);
            }
            y = next;
        }
        Err(Error::RootFinding { target })
    }

    /// Partial quantities needed by the inverse-direction adjoint at a solved
    /// point `y`: component weights `w_j = f_j / f`, `σ_j`, `u_j` and
    /// `r = f'/f`.
    pub fn adjoint_terms(&self, y: f64, weights: &mut [f64], sig: &mut [f64], us: &mut [f64]) -> f64 {
        let log_f = self.log_pdf(y);
        let ln_p = self.ln_p();
        let mut r = 0.0;
        for j in 0..self.len() {
            let u = self.u(y, j);
            let w = (log_dsigmoid(u) - self.log_bw[j] - ln_p - log_f).exp();
            let s = sigmoid(u);
            weights[j] = w;
            sig[j] = s;
            us[j] = u;
            r += w * (1.0 - 2.0 * s) / self.bw[j];
        }
        r
    }
}
