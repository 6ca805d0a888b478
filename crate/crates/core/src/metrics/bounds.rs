//! Closed-form failure-probability bounds.
//!
//! `r` is the epoch length in slots, `l` the lifetime in slots, `q` the
//! number of random-oracle queries. All values are plain `f64`; bounds above
//! one are returned as computed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("{name}={value} must lie in {range}")]
    Range {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("inadmissible: alpha(1-f)^2 eta = {lhs} <= (1+eps)/2 = {rhs}")]
    Inadmissible { lhs: f64, rhs: f64 },
    #[error("{name}={value} below required floor {floor}")]
    BelowFloor {
        name: &'static str,
        value: f64,
        floor: f64,
    },
    #[error("{name}={value} above allowed ceiling {ceiling}")]
    AboveCeiling {
        name: &'static str,
        value: f64,
        ceiling: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub f: f64,
    pub eta: f64,
    pub beta: f64,
    pub eps: f64,
    /// When present, every calculator first checks admissibility.
    #[serde(default)]
    pub alpha: Option<f64>,
    pub r: f64,
    pub l: f64,
    pub q: f64,
    /// Coefficient `c` of the `exp(ln L - c k)` term in the resynchronised
    /// common-prefix bound.
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_omega() -> f64 {
    1.0 / 20.0
}

fn default_delta() -> f64 {
    2.0
}

fn unit(name: &'static str, v: f64, open_low: bool) -> Result<(), BoundError> {
    let ok = if open_low { v > 0.0 && v <= 1.0 } else { (0.0..=1.0).contains(&v) };
    if ok {
        Ok(())
    } else {
        Err(BoundError::Range {
            name,
            value: v,
            range: if open_low { "(0, 1]" } else { "[0, 1]" },
        })
    }
}

fn positive(name: &'static str, v: f64) -> Result<(), BoundError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(BoundError::Range {
            name,
            value: v,
            range: "(0, inf)",
        })
    }
}

fn floor(name: &'static str, value: f64, floor: f64) -> Result<(), BoundError> {
    if value + 1e-9 >= floor {
        Ok(())
    } else {
        Err(BoundError::BelowFloor { name, value, floor })
    }
}

impl BoundParams {
    pub fn validate(&self) -> Result<(), BoundError> {
        unit("f", self.f, true)?;
        unit("eta", self.eta, true)?;
        unit("beta", self.beta, true)?;
        unit("eps", self.eps, true)?;
        positive("R", self.r)?;
        positive("L", self.l)?;
        positive("Q", self.q)?;
        if let Some(a) = self.alpha {
            unit("alpha", a, false)?;
            let lhs = a * (1.0 - self.f).powi(2) * self.eta;
            let rhs = (1.0 + self.eps) / 2.0;
            if lhs <= rhs {
                return Err(BoundError::Inadmissible { lhs, rhs });
            }
        }
        Ok(())
    }

    /// `eps * f * beta * eta`, the recurring product.
    fn efbe(&self) -> f64 {
        self.eps * self.f * self.beta * self.eta
    }

    /// Smallest window for the chain-growth bound.
    pub fn cg_min_s(&self) -> f64 {
        96.0 / self.efbe()
    }

    /// Smallest window for the existential chain-quality bound.
    pub fn ecq_min_s(&self) -> f64 {
        24.0 / self.efbe()
    }

    /// Parameter `k` at which the chain-quality bound is stated.
    pub fn cq_k(&self) -> f64 {
        96.0 / self.efbe()
    }

    pub fn cg_tau(&self) -> f64 {
        self.beta * self.f * self.eta / 16.0
    }

    pub fn cq_mu(&self) -> f64 {
        self.efbe() / 16.0
    }

    /// Epoch-length gate of the static-round security statement.
    pub fn gate_static(&self) -> Result<(), BoundError> {
        floor("R", self.r, 144.0 * self.delta / self.efbe())
    }

    /// Epoch-length gate of the round-adjustment statement.
    pub fn gate_adjust(&self) -> Result<(), BoundError> {
        floor("R", self.r, 288.0 / (self.eps * self.beta * self.f))
    }

    /// Failure probability of the per-epoch lifting argument.
    pub fn lift(&self) -> Result<f64, BoundError> {
        self.validate()?;
        let (r, e) = (self.r, self.eps);
        let x = self.efbe();
        let a = r.powi(3) * (-(x * x) * r / 768.0).exp();
        let b = 38.0 * r / e.powi(4) * (2.0 - e.powi(4) * self.f * self.beta * self.eta * r / 864.0).exp();
        Ok(self.q * self.l * (a + b))
    }

    pub fn cp(&self, k: f64) -> Result<f64, BoundError> {
        positive("k", k)?;
        Ok(cp_epoch(self.l, self.eps, k)? + self.lift()?)
    }

    pub fn cg(&self, s: f64) -> Result<f64, BoundError> {
        self.validate()?;
        floor("s", s, self.cg_min_s())?;
        let x = self.efbe();
        Ok(s * self.l * self.l / 2.0 * (-(x * x) * s / 256.0).exp() + self.lift()?)
    }

    pub fn ecq(&self, s: f64) -> Result<f64, BoundError> {
        self.validate()?;
        floor("s", s, self.ecq_min_s())?;
        let x = self.efbe();
        Ok((s + 1.0) * self.l * self.l * (-(x * x) * s / 64.0).exp() + self.lift()?)
    }

    pub fn cq(&self, k: f64) -> Result<f64, BoundError> {
        self.validate()?;
        floor("k", k, self.cq_k())?;
        let x = self.efbe();
        Ok(k * self.l * self.l / 2.0 * (-(x * x) * k / 256.0).exp() + self.lift()?)
    }

    /// Extra failure mass of the common-prefix statement under
    /// resynchronisation, with window `s = k / 4f`.
    pub fn resync_cp_extra(&self, k: f64) -> Result<f64, BoundError> {
        self.validate()?;
        floor("k", k, 384.0 / (self.eps * self.beta * self.eta) + 1e-9)?;
        let s = k / (4.0 * self.f);
        if s > self.r / 6.0 + 1e-9 {
            return Err(BoundError::AboveCeiling {
                name: "s",
                value: s,
                ceiling: self.r / 6.0,
            });
        }
        let density = (self.l.ln() - self.omega * k).exp();
        Ok(density + self.cg(s)? + self.ecq(s)? + self.cp(k * self.beta * self.eta / 64.0)?)
    }

    /// Divergence tail over one epoch.
    pub fn divergence_tail(&self, k: f64) -> Result<f64, BoundError> {
        self.validate()?;
        positive("k", k)?;
        let e4 = self.eps.powi(4);
        Ok(19.0 * self.r / e4 * (-e4 * k / 18.0).exp())
    }

    /// Lifetime failure of the round-adjustment argument, composed from the
    /// single-epoch bounds at window `R/3`.
    pub fn adjust_lifetime(&self) -> Result<f64, BoundError> {
        self.validate()?;
        let w = self.r / 3.0;
        let tau = self.cg_tau();
        let cg = cg_epoch(self, w, self.r)?;
        let cp = cp_epoch(self.r, self.eps, tau * w)?;
        let ecq = ecq_epoch(self, w, self.r)?;
        Ok(self.q * self.l * (2.0 * cg + 2.0 * cp + 2.0 * ecq))
    }
}

/// Single-epoch common prefix over `r` slots.
pub fn cp_epoch(r: f64, eps: f64, k: f64) -> Result<f64, BoundError> {
    positive("r", r)?;
    unit("eps", eps, true)?;
    let e4 = eps.powi(4);
    Ok(19.0 * r / e4 * (2.0 - e4 * k / 18.0).exp())
}

/// Single-epoch chain growth over `r` slots with window `s`.
pub fn cg_epoch(p: &BoundParams, s: f64, r: f64) -> Result<f64, BoundError> {
    positive("s", s)?;
    let x = p.efbe();
    Ok(0.5 * s * r * r * (-(x * x) * s / 256.0).exp())
}

/// Single-epoch chain quality over `r` slots with parameter `k`.
pub fn cq_epoch(p: &BoundParams, k: f64, r: f64) -> Result<f64, BoundError> {
    positive("k", k)?;
    let x = p.efbe();
    Ok(0.5 * k * r * r * (-(x * x) * k / 256.0).exp())
}

/// Single-epoch existential chain quality over `r` slots.
pub fn ecq_epoch(p: &BoundParams, s: f64, r: f64) -> Result<f64, BoundError> {
    positive("s", s)?;
    let x = p.efbe();
    Ok(r * r * (s + 1.0) * (-(x * x) * s / 64.0).exp())
}

/// Honest chain growth over `r` slots.
pub fn honest_growth(p: &BoundParams, s: f64, r: f64) -> Result<f64, BoundError> {
    positive("s", s)?;
    let x = p.f * p.beta * p.eta;
    Ok(2.0 * r * r * (-(x * x) * s / 64.0).exp())
}

/// One row per calculator for a parameter set; failures are kept as text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    pub params: BoundParams,
    pub k: f64,
    pub s: f64,
    pub rows: Vec<(String, Result<f64, String>)>,
}

impl BoundTable {
    pub fn compute(params: BoundParams, k: f64, s: f64) -> Self {
        let p = &params;
        let wrap = |r: Result<f64, BoundError>| r.map_err(|e| e.to_string());
        let rows = vec![
            ("lift".to_string(), wrap(p.lift())),
            ("cp".to_string(), wrap(p.cp(k))),
            ("cg".to_string(), wrap(p.cg(s))),
            ("ecq".to_string(), wrap(p.ecq(s))),
            ("cq".to_string(), wrap(p.cq(k))),
            ("resync_cp_extra".to_string(), wrap(p.resync_cp_extra(k))),
            ("divergence_tail".to_string(), wrap(p.divergence_tail(k))),
            ("cp_epoch".to_string(), wrap(cp_epoch(p.r, p.eps, k))),
            ("adjust_lifetime".to_string(), wrap(p.adjust_lifetime())),
            ("gate_static".to_string(), wrap(p.gate_static().map(|_| p.r))),
            ("gate_adjust".to_string(), wrap(p.gate_adjust().map(|_| p.r))),
        ];
        Self { params, k, s, rows }
    }
}

#[cfg(test)]
mod tests;
