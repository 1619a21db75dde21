//! Time quadrature: exponential panel rules for Duhamel integrals, a product
//! rule for `(τ−σ)^{-1/2}` weights, and adaptive Gauss–Kronrod integration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How data between ladder samples is modelled inside a Duhamel integral.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    /// Data linear on each panel; the exponential is integrated exactly.
    #[default]
    ExponentialLinear,
    /// Data replaced by the panel average; the exponential is integrated exactly.
    Midpoint,
}

/// `φ₁(z) = (1 − e^{−z})/z`.
pub fn phi1(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        -(-z).exp_m1() / z
    }
}

/// `g(z) = (1 − e^{−z}(1 + z))/z²`, the weight of the panel's left sample.
pub fn phi_left(z: f64) -> f64 {
    if z < 0.5 {
        // Σ (−1)^m (m+1)/(m+2)! z^m
        let mut sum = 0.0;
        let mut fact = 2.0;
        let mut pow = 1.0;
        for m in 0..40 {
            let term = (m + 1) as f64 / fact * pow;
            sum += if m % 2 == 0 { term } else { -term };
            if term.abs() < 1e-18 {
                break;
            }
            fact *= (m + 3) as f64;
            pow *= z;
        }
        sum
    } else {
        (1.0 - (-z).exp() * (1.0 + z)) / (z * z)
    }
}

/// Weight of sample `k` in `∫₀^τ e^{−a(τ−s)} f(s) ds`, where `f` is known at
/// `times` and modelled per `rule` between samples, held at `f(t₀)` on
/// `(0, t₀)` and at the last value beyond the ladder.
pub fn sample_weight(times: &[f64], k: usize, tau: f64, a: f64, rule: QuadratureRule) -> f64 {
    let n = times.len();
    let tk = times[k];
    let decay = |t: f64| (-a * (tau - t)).exp();
    let mut w = 0.0;
    if k == 0 {
        if tau <= tk {
            return tau * phi1(a * tau);
        }
        w += tk * phi1(a * tk) * decay(tk);
    }
    // Panel to the left of t_k.
    if k >= 1 && times[k - 1] < tau {
        let h = tk - times[k - 1];
        if tk <= tau {
            let z = a * h;
            w += decay(tk)
                * match rule {
                    QuadratureRule::ExponentialLinear => h * (phi1(z) - phi_left(z)),
                    QuadratureRule::Midpoint => 0.5 * h * phi1(z),
                };
        } else {
            let hp = tau - times[k - 1];
            let z = a * hp;
            w += match rule {
                QuadratureRule::ExponentialLinear => hp * hp / h * (phi1(z) - phi_left(z)),
                QuadratureRule::Midpoint => 0.5 * hp * phi1(z) * hp / h,
            };
        }
    }
    // Panel to the right of t_k.
    if k + 1 < n && tk < tau {
        let h = times[k + 1] - tk;
        if times[k + 1] <= tau {
            let z = a * h;
            w += decay(times[k + 1])
                * match rule {
                    QuadratureRule::ExponentialLinear => h * phi_left(z),
                    QuadratureRule::Midpoint => 0.5 * h * phi1(z),
                };
        } else {
            let hp = tau - tk;
            let z = a * hp;
            w += match rule {
                QuadratureRule::ExponentialLinear => {
                    hp * phi1(z) - hp * hp / h * (phi1(z) - phi_left(z))
                }
                QuadratureRule::Midpoint => 0.5 * hp * phi1(z) * (2.0 - hp / h),
            };
        }
    }
    if k + 1 == n && tau > tk {
        let hp = tau - tk;
        w += hp * phi1(a * hp);
    }
    w
}

/// All sample weights for `∫₀^τ e^{−a(τ−s)} f(s) ds`.
pub fn duhamel_weights(times: &[f64], tau: f64, a: f64, rule: QuadratureRule) -> Vec<f64> {
    (0..times.len()).map(|k| sample_weight(times, k, tau, a, rule)).collect()
}

/// Weights for `∫_{σ₀}^{σ_last} (τ−σ)^{-1/2} f(σ) dσ` with `f` linear between the
/// nodes; exact for such `f`. Requires `τ ≥ σ_last`.
pub fn product_singular_weights(nodes: &[f64], tau: f64) -> Result<Vec<f64>> {
    if nodes.len() < 2 {
        return Err(Error::invalid("product rule needs at least two nodes"));
    }
    if nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("product rule nodes must increase"));
    }
    let last = nodes[nodes.len() - 1];
    if tau < last {
        return Err(Error::invalid("singular point lies inside the integration range"));
    }
    let mut w = vec![0.0; nodes.len()];
    for p in 0..nodes.len() - 1 {
        let h = nodes[p + 1] - nodes[p];
        let d0 = tau - nodes[p];
        let d1 = tau - nodes[p + 1];
        let (r0, r1) = (d0.sqrt(), d1.sqrt());
        let m0 = 2.0 * (r0 - r1);
        let m1 = d0 * m0 - 2.0 / 3.0 * (d0 * r0 - d1 * r1);
        w[p] += m0 - m1 / h;
        w[p + 1] += m1 / h;
    }
    Ok(w)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Gauss–Kronrod 7/15 estimate and error on `[a, b]`.
pub fn gauss_kronrod(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
    pub converged: bool,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration: the panel with the largest
/// error estimate is bisected until the total error meets `rel_tol·|I|`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> QuadResult {
    const MAX_PANELS: usize = 20_000;
    let (value, error) = gauss_kronrod(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let (mut total, mut total_err) = (value, error);
    let mut panels = 1;
    while total_err > rel_tol * total.abs() && total_err > f64::MIN_POSITIVE && panels < MAX_PANELS {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (lv, le) = gauss_kronrod(&mut f, worst.a, mid);
        let (rv, re) = gauss_kronrod(&mut f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Panel { a: mid, b: worst.b, value: rv, error: re });
        panels += 1;
    }
    // Re-sum to shed the drift of the running totals.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    QuadResult {
        value,
        error,
        intervals: panels,
        converged: error <= rel_tol * value.abs() || error <= f64::MIN_POSITIVE,
    }
}
