use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::report::{json_f64, round_json};

/// Threshold above which the large-ε separable reference applies.
pub const ISING_EPS_CRITICAL: f64 = 0.7302;

/// Per-site variances of a spin model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SiteVariances {
    /// One value shared by every site (translational invariance).
    Uniform(f64),
    PerSite(Vec<f64>),
}

/// A spin model whose sites hold shares of `r`-party sources, each site
/// interacting with `τ` nearest neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinChainSpec {
    pub m: usize,
    pub r: usize,
    #[serde(default = "one")]
    pub nu: u64,
    #[serde(default = "two")]
    pub tau: usize,
    pub variances: SiteVariances,
    /// Weights; uniform `1/M` (the average) when absent.
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
}

fn one() -> u64 {
    1
}

fn two() -> usize {
    2
}

impl SpinChainSpec {
    pub fn translational(m: usize, r: usize, nu: u64, tau: usize, variance: f64) -> Self {
        SpinChainSpec { m, r, nu, tau, variances: SiteVariances::Uniform(variance), alpha: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidConfig(format!("M = {} but at least 2 sites are needed", self.m)));
        }
        if self.r < 1 || self.tau < 1 || self.nu < 1 {
            return Err(Error::InvalidConfig("r, tau and nu must all be at least 1".into()));
        }
        if let SiteVariances::PerSite(v) = &self.variances {
            if v.len() != self.m {
                return Err(Error::InvalidConfig(format!("{} variances for {} sites", v.len(), self.m)));
            }
        }
        if let Some(a) = &self.alpha {
            if a.len() != self.m {
                return Err(Error::InvalidConfig(format!("{} weights for {} sites", a.len(), self.m)));
            }
        }
        let bad = match &self.variances {
            SiteVariances::Uniform(v) => *v < 0.0 || !v.is_finite(),
            SiteVariances::PerSite(vs) => vs.iter().any(|v| *v < 0.0 || !v.is_finite()),
        };
        if bad {
            return Err(Error::InvalidConfig("variances must be finite and non-negative".into()));
        }
        Ok(())
    }

    fn variance(&self, i: usize) -> f64 {
        match &self.variances {
            SiteVariances::Uniform(v) => *v,
            SiteVariances::PerSite(vs) => vs[i],
        }
    }

    fn weight(&self, i: usize) -> f64 {
        self.alpha.as_ref().map_or(1.0 / self.m as f64, |a| a[i])
    }
}

/// `Σ_i α_i² / (4 ν τ r Var_i)`: every signal is influenced by at most `τ r`
/// others. With `τ = 2` and uniform weights and variances this is
/// `1 / (8 ν r M Var)`. Returns `+∞` for a zero variance under a nonzero
/// weight.
pub fn spin_chain_mse_bound(spec: &SpinChainSpec) -> Result<f64> {
    spec.validate()?;
    let c = 4.0 * spec.nu as f64 * spec.tau as f64 * spec.r as f64;
    let mut total = 0.0;
    for i in 0..spec.m {
        let a = spec.weight(i);
        if a == 0.0 {
            continue;
        }
        let v = spec.variance(i);
        if v == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += a * a / (c * v);
    }
    Ok(total)
}

pub fn spin_chain_report(spec: &SpinChainSpec) -> Result<serde_json::Value> {
    let bound = spin_chain_mse_bound(spec)?;
    Ok(round_json(json!({
        "model": "spin_chain",
        "M": spec.m,
        "r": spec.r,
        "tau": spec.tau,
        "nu": spec.nu,
        "our_bound": json_f64(bound),
        "reference_values": {},
        "regime_flags": {},
    })))
}

/// Network bound on the QFI of the Ising-type sensing Hamiltonian
/// `H_i = Z_i/2 + (ε/4) Z_i Z_{i+1}` next to the separable-state references.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsingComparison {
    pub m: usize,
    pub eps: f64,
    pub r: usize,
    /// `M r (2 + 2ε + ε²/2)`.
    pub ours: f64,
    /// `M (1 + 5ε²/4)`, valid for small ε.
    pub separable_small_eps: f64,
    /// `M (1/2 + ε + ε²/2)`, valid above the critical ε.
    pub separable_large_eps: f64,
    /// Whether ε lies in the regime of the large-ε reference.
    pub large_eps_regime: bool,
}

pub fn ising_bound_compare(m: usize, eps: f64, r: usize) -> Result<IsingComparison> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidConfig(format!("epsilon must be finite and non-negative, got {eps}")));
    }
    if r < 1 {
        return Err(Error::InvalidConfig("r must be at least 1".into()));
    }
    let mf = m as f64;
    Ok(IsingComparison {
        m,
        eps,
        r,
        ours: mf * r as f64 * (2.0 + 2.0 * eps + eps * eps / 2.0),
        separable_small_eps: mf * (1.0 + 1.25 * eps * eps),
        separable_large_eps: mf * (0.5 + eps + eps * eps / 2.0),
        large_eps_regime: eps > ISING_EPS_CRITICAL,
    })
}

impl IsingComparison {
    pub fn to_json(&self) -> serde_json::Value {
        round_json(json!({
            "model": "ising",
            "M": self.m,
            "r": self.r,
            "epsilon": json_f64(self.eps),
            "our_bound": json_f64(self.ours),
            "reference_values": {
                "separable_small_eps": json_f64(self.separable_small_eps),
                "separable_large_eps": json_f64(self.separable_large_eps),
            },
            "regime_flags": {
                "large_eps_regime": self.large_eps_regime,
                "small_eps_regime": !self.large_eps_regime,
            },
        }))
    }
}
