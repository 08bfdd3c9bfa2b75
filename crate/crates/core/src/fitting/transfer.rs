use std::f64::consts::PI;

use super::{FitError, Result};
use crate::kv::KeyValues;

/// Fraction of validators needed for a commit.
pub const QUORUM_FACTOR: f64 = 2.0 / 3.0;

/// Per-hop transfer time inferred from a fitted `(μ̂, η̂)`.
///
/// The two routes `μ̂ = 2Δt·N ln N` and `η̂ = (π/√3)Δt·N` give separate
/// estimates. `delta_t` is the value both agree on when rounded to the
/// largest common number of significant digits (their mean if they differ
/// already in the first digit); the frequencies are derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferEstimate {
    pub n_validators: u32,
    pub delta_t_from_mu: f64,
    pub delta_t_from_eta: f64,
    pub delta_t: f64,
    /// Block transfers per second across the network, `1/Δt`.
    pub broadcast_freq_total: f64,
    /// Transfers per second per validator, `1/(N·Δt)`.
    pub broadcast_freq_per_node: f64,
    pub quorum_adjusted: bool,
}

fn round_sig(x: f64, digits: usize) -> String {
    format!("{:.*e}", digits - 1, x)
}

/// Value shared by `a` and `b` at the most significant digits on which
/// they agree.
fn agreed_value(a: f64, b: f64) -> f64 {
    (1..=15)
        .rev()
        .find(|&d| round_sig(a, d) == round_sig(b, d))
        .map(|d| round_sig(a, d).parse().expect("formatted float parses"))
        .unwrap_or(0.5 * (a + b))
}

pub fn derive_transfer_time(mu_hat: f64, eta_hat: f64, n: u32) -> Result<TransferEstimate> {
    for (name, v) in [("mu_hat", mu_hat), ("eta_hat", eta_hat)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(FitError::Domain(format!(
                "{name} must be finite and > 0, got {v}"
            )));
        }
    }
    if n < 2 {
        return Err(FitError::Domain(format!("need at least 2 validators, got {n}")));
    }
    let nf = f64::from(n);
    let delta_t_from_mu = mu_hat / (2.0 * nf * nf.ln());
    let delta_t_from_eta = eta_hat / (PI * nf / 3f64.sqrt());
    let delta_t = agreed_value(delta_t_from_mu, delta_t_from_eta);
    Ok(TransferEstimate {
        n_validators: n,
        delta_t_from_mu,
        delta_t_from_eta,
        delta_t,
        broadcast_freq_total: 1.0 / delta_t,
        broadcast_freq_per_node: 1.0 / (nf * delta_t),
        quorum_adjusted: false,
    })
}

/// Reinterpret an estimate for a broadcast that stops once a quorum holds
/// the block: every `Δt` becomes `Δt/(2/3)` and the frequencies shrink by
/// `2/3`.
pub fn quorum_adjust(est: &TransferEstimate) -> Result<TransferEstimate> {
    if est.quorum_adjusted {
        return Err(FitError::Domain("estimate is already quorum-adjusted".into()));
    }
    Ok(TransferEstimate {
        delta_t_from_mu: est.delta_t_from_mu / QUORUM_FACTOR,
        delta_t_from_eta: est.delta_t_from_eta / QUORUM_FACTOR,
        delta_t: est.delta_t / QUORUM_FACTOR,
        broadcast_freq_total: est.broadcast_freq_total * QUORUM_FACTOR,
        broadcast_freq_per_node: est.broadcast_freq_per_node * QUORUM_FACTOR,
        quorum_adjusted: true,
        ..*est
    })
}

impl TransferEstimate {
    fn nf(&self) -> f64 {
        f64::from(self.n_validators)
    }

    /// Location implied by `delta_t_from_mu`: `2Δt·N ln N`, or
    /// `(4Δt̃/3)·N ln N` once adjusted.
    pub fn implied_location(&self) -> f64 {
        let n = self.nf();
        if self.quorum_adjusted {
            4.0 * self.delta_t_from_mu / 3.0 * n * n.ln()
        } else {
            2.0 * self.delta_t_from_mu * n * n.ln()
        }
    }

    /// Scale implied by `delta_t_from_eta`: `(π/√3)Δt·N`, or
    /// `(2π/(3√3))Δt̃·N` once adjusted.
    pub fn implied_scale(&self) -> f64 {
        let n = self.nf();
        if self.quorum_adjusted {
            2.0 * PI / (3.0 * 3f64.sqrt()) * self.delta_t_from_eta * n
        } else {
            PI / 3f64.sqrt() * self.delta_t_from_eta * n
        }
    }

    /// Quorum location before dropping the `ln(2/3)` term,
    /// `(2a/3)·N(ln N + ln(2/3))` with `a = 2·(2/3)·Δt̃`. `None` for an
    /// unadjusted estimate.
    pub fn quorum_location_with_log_term(&self) -> Option<f64> {
        self.quorum_adjusted.then(|| {
            let n = self.nf();
            let a = 2.0 * QUORUM_FACTOR * self.delta_t_from_mu;
            2.0 * a / 3.0 * n * (n.ln() + QUORUM_FACTOR.ln())
        })
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("n_validators", self.n_validators);
        kv.set("quorum_adjusted", self.quorum_adjusted);
        kv.set("delta_t_from_mu", self.delta_t_from_mu);
        kv.set("delta_t_from_eta", self.delta_t_from_eta);
        kv.set("delta_t", self.delta_t);
        kv.set("broadcast_freq_total", self.broadcast_freq_total);
        kv.set("broadcast_freq_per_node", self.broadcast_freq_per_node);
        kv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_fit_arithmetic() {
        let e = derive_transfer_time(2.002896, 0.363636, 175).unwrap();
        assert!(
            (e.delta_t_from_mu - 0.001_108_0).abs() < 5e-8,
            "{}",
            e.delta_t_from_mu
        );
        assert!(
            (e.delta_t_from_eta - 0.001_145_6).abs() < 5e-8,
            "{}",
            e.delta_t_from_eta
        );
        assert_eq!(e.delta_t, 0.0011);
        assert!((e.broadcast_freq_total - 909.0).abs() < 1.0);
        assert!((e.broadcast_freq_per_node - 5.1948).abs() < 0.01);
        assert!(!e.quorum_adjusted);
    }

    #[test]
    fn quorum_adjustment() {
        let e = derive_transfer_time(2.002896, 0.363636, 175).unwrap();
        let q = quorum_adjust(&e).unwrap();
        assert!((q.delta_t - 0.00165).abs() < 1e-12);
        assert!((q.broadcast_freq_per_node - 3.4632).abs() < 1e-3);
        assert!(quorum_adjust(&q).is_err());
        assert!(((q.implied_location() - 2.002896) / 2.002896).abs() < 1e-12);
        assert!(((q.implied_scale() - 0.363636) / 0.363636).abs() < 1e-12);
        assert!(((e.implied_location() - 2.002896) / 2.002896).abs() < 1e-12);
        assert!(e.quorum_location_with_log_term().is_none());
        // the log term lowers the location
        assert!(q.quorum_location_with_log_term().unwrap() < q.implied_location());
    }

    #[test]
    fn agreement_rounding() {
        assert_eq!(agreed_value(0.0011080, 0.0011456), 0.0011);
        assert_eq!(agreed_value(1.25, 1.25), 1.25);
        assert_eq!(agreed_value(1.0, 3.0), 2.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(derive_transfer_time(0.0, 1.0, 175).is_err());
        assert!(derive_transfer_time(1.0, -1.0, 175).is_err());
        assert!(derive_transfer_time(1.0, 1.0, 1).is_err());
    }
}
