//! Mutual information and secret key rates: asymptotic, ideal envelope,
//! pure-loss capacity and composable finite-size.

use crate::ensemble::FadingStats;
use crate::protocol::{covariance_matrix, CovarianceMatrix, SqueezingParams};
use crate::{eta_from_loss_db, Error, Result};

/// Bracket and resolution of [`max_tolerable_loss`], dB.
pub const LOSS_SEARCH_MAX_DB: f64 = 200.0;
pub const LOSS_SEARCH_TOL_DB: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorModel {
    efficiency: f64,
    electronic_noise: f64,
}

impl DetectorModel {
    pub fn new(efficiency: f64, electronic_noise: f64) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::Domain(format!("detector efficiency {efficiency} must lie in (0, 1]")));
        }
        if !(electronic_noise >= 0.0 && electronic_noise.is_finite()) {
            return Err(Error::Domain(format!("electronic noise {electronic_noise} must be >= 0")));
        }
        Ok(Self {
            efficiency,
            electronic_noise,
        })
    }

    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            electronic_noise: 0.0,
        }
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }
    pub fn electronic_noise(&self) -> f64 {
        self.electronic_noise
    }

    /// `(1 - eta_B) v` with `v = 1 + v_B / (1 - eta_B)`; equals `v_B` at
    /// `eta_B = 1`.
    pub fn added_noise(&self) -> f64 {
        if self.efficiency < 1.0 {
            let v = 1.0 + self.electronic_noise / (1.0 - self.efficiency);
            (1.0 - self.efficiency) * v
        } else {
            self.electronic_noise
        }
    }
}

/// Which security parameter appears inside the logarithms of `Delta_AEP`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AepEpsilon {
    /// The composed `eps = 2 eps_sm + eps_bar + eps_PE + eps_cor`.
    #[default]
    Composed,
    /// The hashing parameter `eps_bar`.
    Bar,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiniteSizeParams {
    pub block_size: f64,
    pub kept_length: f64,
    pub recon_efficiency: f64,
    pub discretisation: f64,
    pub eps_sm: f64,
    pub eps_bar: f64,
    pub eps_pe: f64,
    pub eps_cor: f64,
    pub aep_epsilon: AepEpsilon,
}

impl FiniteSizeParams {
    /// Splits a target security parameter as `eps_sm = eps_bar = eps_cor =
    /// eps / 4`, `eps_PE = 0`, and keeps half of the block.
    pub fn from_security(
        security: f64,
        block_size: f64,
        recon_efficiency: f64,
        discretisation: f64,
    ) -> Result<Self> {
        let q = security / 4.0;
        let p = Self {
            block_size,
            kept_length: block_size / 2.0,
            recon_efficiency,
            discretisation,
            eps_sm: q,
            eps_bar: q,
            eps_pe: 0.0,
            eps_cor: q,
            aep_epsilon: AepEpsilon::Composed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn composed_epsilon(&self) -> f64 {
        2.0 * self.eps_sm + self.eps_bar + self.eps_pe + self.eps_cor
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.block_size >= 1.0 && self.kept_length >= 1.0 && self.kept_length <= self.block_size) {
            return Err(Error::Domain(format!(
                "need 1 <= N' <= N, got N = {}, N' = {}",
                self.block_size, self.kept_length
            )));
        }
        if !(self.recon_efficiency >= 0.0 && self.recon_efficiency <= 1.0) {
            return Err(Error::Domain(format!(
                "reconciliation efficiency {} must lie in [0, 1]",
                self.recon_efficiency
            )));
        }
        if !(self.discretisation >= 0.0 && self.discretisation.is_finite()) {
            return Err(Error::Domain(format!("discretisation {} must be >= 0", self.discretisation)));
        }
        for (name, e) in [
            ("eps_sm", self.eps_sm),
            ("eps_bar", self.eps_bar),
            ("eps_PE", self.eps_pe),
            ("eps_cor", self.eps_cor),
        ] {
            if !(0.0..1.0).contains(&e) {
                return Err(Error::Domain(format!("{name} = {e} must lie in [0, 1)")));
            }
        }
        if self.composed_epsilon() >= 1.0 {
            return Err(Error::Domain(format!(
                "composed security parameter {} must be below 1",
                self.composed_epsilon()
            )));
        }
        Ok(())
    }
}

/// `I_AB = 1/2 log2(a_q / (a_q - c_q^2 / (b_q + (1 - eta_B) v)))`, bits per use.
pub fn mutual_information(cm: &CovarianceMatrix, det: &DetectorModel) -> Result<f64> {
    let bob = cm.b_q + det.added_noise();
    let denom = cm.a_q - cm.c_q * cm.c_q / bob;
    if !(denom > 0.0) || !(bob > 0.0) {
        return Err(Error::Physicality(format!(
            "mutual information undefined: a_q - c_q^2 / b = {denom} for {cm:?}"
        )));
    }
    Ok(0.5 * (cm.a_q / denom).log2())
}

/// Reverse-reconciliation rate with `chi_EB = 0`.
pub fn asymptotic_rate(recon_efficiency: f64, mutual_information: f64) -> f64 {
    recon_efficiency * mutual_information
}

fn check_transmissivity(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("transmissivity {eta} must lie in [0, 1]")));
    }
    Ok(())
}

/// `-1/2 log2(1 - eta_f)`; infinite at `eta_f = 1`.
pub fn ideal_rate(eta_f: f64) -> Result<f64> {
    check_transmissivity(eta_f)?;
    Ok(if eta_f == 1.0 { f64::INFINITY } else { -0.5 * (-eta_f).ln_1p() / std::f64::consts::LN_2 })
}

/// Repeaterless bound `-log2(1 - eta)`; infinite at `eta = 1`.
pub fn plob_bound(eta: f64) -> Result<f64> {
    check_transmissivity(eta)?;
    Ok(if eta == 1.0 { f64::INFINITY } else { -(-eta).ln_1p() / std::f64::consts::LN_2 })
}

/// Finite-size entropy penalty `Delta_AEP`.
pub fn aep_delta(p: &FiniteSizeParams) -> Result<f64> {
    p.validate()?;
    let eps = match p.aep_epsilon {
        AepEpsilon::Composed => p.composed_epsilon(),
        AepEpsilon::Bar => p.eps_bar,
    };
    if p.eps_sm <= 0.0 || eps <= 0.0 {
        return Err(Error::Domain("Delta_AEP needs positive eps_sm and eps".into()));
    }
    let d1 = p.discretisation + 1.0;
    Ok(d1 * d1
        + 4.0 * d1 * (2.0 / (2.0 * p.eps_sm * p.eps_sm)).log2().sqrt()
        + 2.0 * (2.0 / (2.0 * eps * eps * p.eps_sm)).log2()
        + 4.0 * p.eps_sm * p.discretisation / (eps * p.kept_length.sqrt()))
}

/// `(N' beta I_AB - sqrt(N') Delta_AEP - 2 log2(1 / (2 eps_bar))) / N`.
/// Negative values are returned as they are.
pub fn finite_size_rate(p: &FiniteSizeParams, mutual_information: f64) -> Result<f64> {
    let delta = aep_delta(p)?;
    if !(p.eps_bar > 0.0) {
        return Err(Error::Domain("finite-size rate needs eps_bar > 0".into()));
    }
    let n1 = p.kept_length;
    Ok((n1 * p.recon_efficiency * mutual_information
        - n1.sqrt() * delta
        - 2.0 * (1.0 / (2.0 * p.eps_bar)).log2())
        / p.block_size)
}

/// All rates for one fading channel and squeezing setting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeyRates {
    pub mutual_information: f64,
    pub asymptotic: f64,
    /// Raw, possibly negative.
    pub finite: f64,
    pub ideal: f64,
    pub plob: f64,
}

impl KeyRates {
    pub fn finite_clamped(&self) -> f64 {
        self.finite.max(0.0)
    }
}

pub fn key_rates(
    params: &SqueezingParams,
    stats: &FadingStats,
    det: &DetectorModel,
    fsp: &FiniteSizeParams,
) -> Result<KeyRates> {
    let cm = covariance_matrix(params, stats);
    cm.check_physical()?;
    let i_ab = mutual_information(&cm, det)?;
    Ok(KeyRates {
        mutual_information: i_ab,
        asymptotic: asymptotic_rate(fsp.recon_efficiency, i_ab),
        finite: finite_size_rate(fsp, i_ab)?,
        ideal: ideal_rate(stats.eta_f)?,
        plob: plob_bound(stats.eta_f)?,
    })
}

/// Largest constant channel loss (dB) at which the finite-size rate is still
/// non-negative, by bisection over `[0, 200]` dB.
pub fn max_tolerable_loss(fsp: &FiniteSizeParams, det: &DetectorModel, squeezing_db: f64) -> Result<f64> {
    let params = SqueezingParams::from_squeezing_db(squeezing_db, None)?;
    let rate = |loss: f64| -> Result<f64> {
        let stats = FadingStats::constant(eta_from_loss_db(loss))?;
        let i_ab = mutual_information(&covariance_matrix(&params, &stats), det)?;
        finite_size_rate(fsp, i_ab)
    };
    let (mut lo, mut hi) = (0.0, LOSS_SEARCH_MAX_DB);
    let (f_lo, f_hi) = (rate(lo)?, rate(hi)?);
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::Numerical(format!(
            "finite-size rate has no sign change on [0, {LOSS_SEARCH_MAX_DB}] dB \
             (K(0) = {f_lo:e}, K({LOSS_SEARCH_MAX_DB}) = {f_hi:e})"
        )));
    }
    while hi - lo > LOSS_SEARCH_TOL_DB {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
