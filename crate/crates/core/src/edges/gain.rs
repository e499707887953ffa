use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::IncidenceMap;

/// User-supplied gain function on `[0, ub]`.
pub trait GainFunction: Send + Sync + fmt::Debug {
    fn value(&self, w: f64) -> f64;
    fn derivative(&self, _w: f64) -> Option<f64> {
        None
    }
    /// Closed-form maximizer of `h(w) - r w` over `[0, ub]`, if known.
    fn wstar(&self, _ratio: f64, _ub: f64) -> Option<f64> {
        None
    }
}

/// Gain function families. `h(0) = 0` for all of them.
#[derive(Debug, Clone)]
pub enum Gain {
    /// Transmission line with logarithmic loss: `h(w) = 3w - alpha (log(1 + e^{beta w}) - log 2)`.
    PowerLine { alpha: f64, beta: f64 },
    /// `h(w) = gamma w - (eps/2) w^2`.
    Storage { gamma: f64, eps: f64 },
    /// `h(w) = w - (eps/2) w^2`.
    Lossless { eps: f64 },
    /// Constant-product pool, tendering asset 1 for asset 2.
    Uniswap { r1: f64, r2: f64, fee: f64 },
    /// Weighted two-asset pool; `weight` is the weight of the tendered asset.
    BalancerTwo { r1: f64, r2: f64, weight: f64, fee: f64 },
    /// `h(w) = sqrt(b + g w) - sqrt(b)`.
    Sqrt { b: f64, g: f64 },
    Custom(Arc<dyn GainFunction>),
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Gain {
    fn value(&self, w: f64) -> f64 {
        match *self {
            Gain::PowerLine { alpha, beta } => {
                3.0 * w - alpha * (softplus(beta * w) - std::f64::consts::LN_2)
            }
            Gain::Storage { gamma, eps } => gamma * w - 0.5 * eps * w * w,
            Gain::Lossless { eps } => w - 0.5 * eps * w * w,
            Gain::Uniswap { r1, r2, fee } => r2 * fee * w / (r1 + fee * w),
            Gain::BalancerTwo { r1, r2, weight, fee } => {
                let p = weight / (1.0 - weight);
                r2 * -((r1 / (r1 + fee * w)).powf(p) - 1.0)
            }
            Gain::Sqrt { b, g } => (b + g * w).sqrt() - b.sqrt(),
            Gain::Custom(ref f) => f.value(w),
        }
    }

    fn derivative(&self, w: f64) -> Option<f64> {
        Some(match *self {
            Gain::PowerLine { alpha, beta } => 3.0 - alpha * beta * sigmoid(beta * w),
            Gain::Storage { gamma, eps } => gamma - eps * w,
            Gain::Lossless { eps } => 1.0 - eps * w,
            Gain::Uniswap { r1, r2, fee } => {
                let d = r1 + fee * w;
                r1 * r2 * fee / (d * d)
            }
            Gain::BalancerTwo { r1, r2, weight, fee } => {
                let p = weight / (1.0 - weight);
                let d = r1 + fee * w;
                r2 * p * fee / d * (r1 / d).powf(p)
            }
            Gain::Sqrt { b, g } => g / (2.0 * (b + g * w).sqrt()),
            Gain::Custom(ref f) => return f.derivative(w),
        })
    }

    fn closed_form(&self, ratio: f64, ub: f64) -> Option<f64> {
        let w = match *self {
            Gain::PowerLine { beta, .. } => {
                if ratio >= 1.0 {
                    0.0
                } else {
                    ((3.0 - ratio) / (1.0 + ratio)).ln() / beta
                }
            }
            Gain::Storage { gamma, eps } => {
                if ratio >= gamma {
                    0.0
                } else {
                    (gamma - ratio) / eps
                }
            }
            Gain::Lossless { eps } => {
                if ratio >= 1.0 {
                    0.0
                } else {
                    (1.0 - ratio) / eps
                }
            }
            Gain::Uniswap { r1, r2, fee } => {
                if ratio <= 0.0 {
                    ub
                } else {
                    ((fee * r1 * r2 / ratio).sqrt() - r1) / fee
                }
            }
            Gain::BalancerTwo { .. } | Gain::Sqrt { .. } => return None,
            Gain::Custom(ref f) => f.wstar(ratio, ub)?,
        };
        Some(w.clamp(0.0, ub))
    }

    fn validate(&self, ub: f64) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        let pos = |x: f64| x > 0.0 && x.is_finite();
        match *self {
            Gain::PowerLine { alpha, beta } => {
                if !pos(alpha) || !pos(beta) {
                    return bad("powerline alpha and beta must be positive");
                }
                if (alpha * beta - 4.0).abs() > 1e-12 {
                    return bad("powerline requires alpha * beta = 4");
                }
            }
            Gain::Storage { gamma, eps } => {
                if !(gamma > 0.0 && gamma <= 1.0) {
                    return bad("storage gamma must lie in (0, 1]");
                }
                if !pos(eps) {
                    return bad("storage eps must be positive");
                }
                if ub > gamma / eps * (1.0 + 1e-12) {
                    return bad("storage ub must not exceed gamma / eps");
                }
            }
            Gain::Lossless { eps } => {
                if !pos(eps) {
                    return bad("lossless eps must be positive");
                }
                if ub > (1.0 + 1e-12) / eps {
                    return bad("lossless ub must not exceed 1 / eps");
                }
            }
            Gain::Uniswap { r1, r2, fee } => {
                if !pos(r1) || !pos(r2) {
                    return bad("reserves must be positive");
                }
                if !(fee > 0.0 && fee <= 1.0) {
                    return bad("fee must lie in (0, 1]");
                }
            }
            Gain::BalancerTwo { r1, r2, weight, fee } => {
                if !pos(r1) || !pos(r2) {
                    return bad("reserves must be positive");
                }
                if !(weight > 0.0 && weight < 1.0) {
                    return bad("balancer weight must lie in (0, 1)");
                }
                if !(fee > 0.0 && fee <= 1.0) {
                    return bad("fee must lie in (0, 1]");
                }
            }
            Gain::Sqrt { b, g } => {
                if !pos(b) || !pos(g) {
                    return bad("sqrt gain parameters must be positive");
                }
            }
            Gain::Custom(_) => {}
        }
        Ok(())
    }
}

/// Result of the two-node arbitrage problem `max_{0 <= w <= ub} -eta1 w + eta2 h(w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arbitrage {
    pub w: f64,
    /// Edge flow `(-w, h(w))`.
    pub flow: [f64; 2],
    pub value: f64,
}

/// A two-node edge: tender `w` at the source, receive `h(w)` at the sink.
#[derive(Debug, Clone)]
pub struct GainEdge {
    map: IncidenceMap,
    gain: Gain,
    ub: f64,
}

const SAMPLE_POINTS: usize = 32;

impl GainEdge {
    pub fn new(map: IncidenceMap, gain: Gain, ub: f64) -> Result<Self> {
        if map.len() != 2 {
            return Err(Error::DimensionMismatch {
                what: "gain edge nodes",
                expected: 2,
                actual: map.len(),
            });
        }
        if !(ub > 0.0 && ub.is_finite()) {
            return Err(Error::Config("ub must be positive and finite".into()));
        }
        gain.validate(ub)?;
        let edge = GainEdge { map, gain, ub };
        edge.check_shape()?;
        Ok(edge)
    }

    /// Sampled check of `h(0) = 0`, monotonicity and midpoint concavity.
    fn check_shape(&self) -> Result<()> {
        let h: Vec<f64> = (0..=SAMPLE_POINTS)
            .map(|k| self.checked_gain(self.ub * k as f64 / SAMPLE_POINTS as f64))
            .collect::<Result<_>>()?;
        let scale = h.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let slack = 1e-10 * scale;
        if h[0].abs() > slack {
            return Err(Error::Config(format!("gain must vanish at zero, got {}", h[0])));
        }
        for k in 1..h.len() {
            if h[k] < h[k - 1] - slack {
                return Err(Error::Config("gain must be nondecreasing on [0, ub]".into()));
            }
            if k + 1 < h.len() && 2.0 * h[k] < h[k - 1] + h[k + 1] - 2.0 * slack {
                return Err(Error::Config("gain must be concave on [0, ub]".into()));
            }
        }
        Ok(())
    }

    pub fn map(&self) -> &IncidenceMap {
        &self.map
    }

    pub fn gain(&self) -> &Gain {
        &self.gain
    }

    pub fn ub(&self) -> f64 {
        self.ub
    }

    /// `h(w)` on `[0, ub]`, `-inf` elsewhere.
    pub fn gain_eval(&self, w: f64) -> f64 {
        if !(0.0..=self.ub).contains(&w) {
            return f64::NEG_INFINITY;
        }
        self.gain.value(w)
    }

    /// Like [`gain_eval`](Self::gain_eval), rejecting non-finite output inside the domain.
    pub fn checked_gain(&self, w: f64) -> Result<f64> {
        let h = self.gain_eval(w);
        if (0.0..=self.ub).contains(&w) && !h.is_finite() {
            return Err(Error::EdgeOracleDomain { w });
        }
        Ok(h)
    }

    fn fd_step(&self) -> f64 {
        1e-7 * self.ub.max(1.0)
    }

    /// `h'(w)`, falling back to a one-sided difference that stays inside `[0, ub]`.
    pub fn derivative(&self, w: f64) -> Result<f64> {
        if let Some(d) = self.gain.derivative(w) {
            return Ok(d);
        }
        let step = self.fd_step().min(self.ub);
        let (a, b) = if w + step <= self.ub { (w, w + step) } else { (w - step, w) };
        Ok((self.checked_gain(b)? - self.checked_gain(a)?) / (b - a))
    }

    /// `h+(0)`, the right derivative at zero.
    pub fn right_derivative_at_zero(&self) -> Result<f64> {
        if let Some(d) = self.gain.derivative(0.0) {
            return Ok(d);
        }
        let step = self.fd_step().min(self.ub);
        Ok((self.checked_gain(step)? - self.checked_gain(0.0)?) / step)
    }

    /// `h-(ub)`, the left derivative at capacity.
    pub fn left_derivative_at_ub(&self) -> Result<f64> {
        if let Some(d) = self.gain.derivative(self.ub) {
            return Ok(d);
        }
        let step = self.fd_step().min(self.ub);
        Ok((self.checked_gain(self.ub)? - self.checked_gain(self.ub - step)?) / step)
    }

    pub fn has_closed_form(&self) -> bool {
        self.gain.closed_form(1.0, self.ub).is_some()
    }

    /// Closed-form `w*` at price ratio `r`, if the family has one.
    pub fn closed_form_wstar(&self, ratio: f64) -> Option<f64> {
        self.gain.closed_form(ratio, self.ub)
    }

    /// Bisection on `h'(w) = r` over `[0, ub]` for `ceil(log2(ub / tol))` halvings,
    /// followed by one safeguarded Newton step when an analytic derivative exists.
    pub fn bisect_wstar(&self, ratio: f64, tol: f64) -> Result<f64> {
        let iters = (self.ub / tol).log2().ceil().max(1.0) as usize;
        let (mut lo, mut hi) = (0.0, self.ub);
        for _ in 0..iters {
            let mid = 0.5 * (lo + hi);
            if self.derivative(mid)? > ratio {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mid = 0.5 * (lo + hi);
        if self.gain.derivative(mid).is_some() && hi > lo {
            let (d_lo, d_hi) = (self.derivative(lo)?, self.derivative(hi)?);
            let curvature = (d_hi - d_lo) / (hi - lo);
            if curvature < 0.0 {
                let newton = mid - (self.derivative(mid)? - ratio) / curvature;
                if newton > lo && newton < hi {
                    return Ok(newton);
                }
            }
        }
        Ok(mid)
    }

    /// True iff zero flow is optimal at prices `eta`, i.e. `h+(0) <= eta1 / eta2`.
    pub fn no_flow_check(&self, eta: [f64; 2]) -> Result<bool> {
        let ratio = homogeneity_normalize(eta)?;
        Ok(self.right_derivative_at_zero()? <= ratio)
    }

    /// Solves the two-node arbitrage problem at prices `eta`.
    pub fn arbitrage(&self, eta: [f64; 2], tol: f64) -> Result<Arbitrage> {
        let ratio = homogeneity_normalize(eta)?;
        if eta[0] < 0.0 || !eta[0].is_finite() {
            return Err(Error::InvalidDualPrices(format!("eta = {eta:?}")));
        }
        let w = match self.closed_form_wstar(ratio) {
            Some(w) => w,
            None if self.right_derivative_at_zero()? <= ratio => 0.0,
            None if self.left_derivative_at_ub()? >= ratio => self.ub,
            None => self.bisect_wstar(ratio, tol)?,
        };
        self.arbitrage_at(eta, w)
    }

    /// The arbitrage outcome of routing exactly `w` at prices `eta`.
    pub fn arbitrage_at(&self, eta: [f64; 2], w: f64) -> Result<Arbitrage> {
        let h = self.checked_gain(w)?;
        Ok(Arbitrage {
            w,
            flow: [-w, h],
            value: -eta[0] * w + eta[1] * h,
        })
    }
}

/// Price ratio `eta1 / eta2`; the two-node maximizer depends on prices only through it.
pub fn homogeneity_normalize(eta: [f64; 2]) -> Result<f64> {
    if !(eta[1] > 0.0 && eta[1].is_finite()) {
        return Err(Error::InvalidDualPrices(format!(
            "eta2 must be positive, got {}",
            eta[1]
        )));
    }
    Ok(eta[0] / eta[1])
}
