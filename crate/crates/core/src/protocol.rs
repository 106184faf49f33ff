//! Zero-leakage squeezed-state protocol with a classical layer riding on
//! the same beam.
//!
//! All quadrature variances are in shot-noise units (vacuum = 1). Alice
//! mixes an anti-squeezed beam `a` (variance `Va > 1`) and a squeezed beam
//! `s` (variance `Vs < 1`) on a beamsplitter of transmissivity `eps`:
//!
//! ```text
//! X_A    = sqrt(1 - eps) X_a - sqrt(eps) X_s        (kept by Alice)
//! X_Abar = sqrt(eps) X_a + sqrt(1 - eps) X_s        (sent to Bob)
//! X_E    = sqrt(1 - eta) X_Abar - sqrt(eta) X_v
//! X_B    = sqrt(eta) X_Abar + sqrt(1 - eta) X_v
//! ```
//!
//! The `p` quadratures follow the same maps with variances `1/Va`, `1/Vs`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ensemble::{fading_stats, FadingStats};
use crate::rng::{substream, StreamId};
use crate::{Error, Result};

/// Tolerance on the transmitted variance for the zero-leakage condition.
pub const QNL_TOLERANCE: f64 = 1e-12;
/// Carrier amplitudes below this make the linearized detection model poor.
pub const MIN_CARRIER_AMPLITUDE: f64 = 10.0;
const CARRIER_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezingParams {
    vs: f64,
    va: f64,
    eps: f64,
}

impl SqueezingParams {
    /// Arbitrary beamsplitter setting; need not satisfy the QNL condition.
    pub fn new(vs: f64, va: f64, eps: f64) -> Result<Self> {
        if !(vs > 0.0 && vs < 1.0 && va > 1.0 && va.is_finite()) {
            return Err(Error::Domain(format!(
                "need 0 < Vs < 1 < Va, got Vs = {vs}, Va = {va}"
            )));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain(format!("beamsplitter transmissivity {eps} must lie in (0, 1)")));
        }
        Ok(Self { vs, va, eps })
    }

    /// Beamsplitter chosen so the transmitted modulation sits at the QNL.
    pub fn zero_leakage(vs: f64, va: f64) -> Result<Self> {
        Self::new(vs, va, zero_leakage_epsilon(vs, va)?)
    }

    /// Zero-leakage parameters from squeezing in dB; `Va` defaults to `1/Vs`.
    pub fn from_squeezing_db(squeezing_db: f64, anti_squeezed: Option<f64>) -> Result<Self> {
        if !(squeezing_db > 0.0 && squeezing_db.is_finite()) {
            return Err(Error::Domain(format!("squeezing {squeezing_db} dB must be positive")));
        }
        let vs = 10f64.powf(-squeezing_db / 10.0);
        Self::zero_leakage(vs, anti_squeezed.unwrap_or(1.0 / vs))
    }

    pub fn vs(&self) -> f64 {
        self.vs
    }
    pub fn va(&self) -> f64 {
        self.va
    }
    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    /// `eps Va + (1 - eps) Vs`.
    pub fn transmitted_variance(&self) -> f64 {
        self.eps * self.va + (1.0 - self.eps) * self.vs
    }

    /// `eps / Va + (1 - eps) / Vs`.
    pub fn transmitted_p_variance(&self) -> f64 {
        self.eps / self.va + (1.0 - self.eps) / self.vs
    }

    pub fn is_zero_leakage(&self) -> bool {
        (self.transmitted_variance() - 1.0).abs() <= QNL_TOLERANCE
    }
}

/// `(1 - Vs) / (Va - Vs)`.
pub fn zero_leakage_epsilon(vs: f64, va: f64) -> Result<f64> {
    if !(vs < 1.0 && 1.0 < va) || !(vs > 0.0) || !va.is_finite() {
        return Err(Error::Domain(format!("need 0 < Vs < 1 < Va, got Vs = {vs}, Va = {va}")));
    }
    Ok((1.0 - vs) / (va - vs))
}

/// Alice-Bob second moments in block form `[[A, C], [C, B]]` with diagonal
/// `2x2` blocks `diag(q, p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceMatrix {
    pub a_q: f64,
    pub a_p: f64,
    pub b_q: f64,
    pub b_p: f64,
    pub c_q: f64,
    pub c_p: f64,
}

impl CovarianceMatrix {
    /// Symplectic eigenvalues `(nu_minus, nu_plus)` of the two-mode matrix.
    pub fn symplectic_eigenvalues(&self) -> (f64, f64) {
        let det_a = self.a_q * self.a_p;
        let det_b = self.b_q * self.b_p;
        let det_c = self.c_q * self.c_p;
        let det_v = (self.a_q * self.b_q - self.c_q * self.c_q) * (self.a_p * self.b_p - self.c_p * self.c_p);
        let delta = det_a + det_b + 2.0 * det_c;
        let disc = (delta * delta - 4.0 * det_v).max(0.0).sqrt();
        (((delta - disc) / 2.0).sqrt(), ((delta + disc) / 2.0).sqrt())
    }

    /// Checks positivity, the uncertainty relations and the symplectic
    /// eigenvalues against `1 - 1e-9`.
    pub fn check_physical(&self) -> Result<()> {
        let tol = 1e-9;
        let entries = [self.a_q, self.a_p, self.b_q, self.b_p];
        if entries.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Physicality(format!("non-positive variance in {self:?}")));
        }
        if self.a_q * self.a_p < 1.0 - tol || self.b_q * self.b_p < 1.0 - tol {
            return Err(Error::Physicality(format!("uncertainty relation violated by {self:?}")));
        }
        let (nu_minus, _) = self.symplectic_eigenvalues();
        if !(nu_minus >= 1.0 - tol) {
            return Err(Error::Physicality(format!(
                "symplectic eigenvalue {nu_minus} below 1 for {self:?}"
            )));
        }
        Ok(())
    }
}

/// Covariance matrix of Alice's kept mode and Bob's received mode, averaged
/// over the fading distribution.
pub fn covariance_matrix(params: &SqueezingParams, stats: &FadingStats) -> CovarianceMatrix {
    let (vs, va, eps) = (params.vs, params.va, params.eps);
    let (eta_f, var) = (stats.eta_f, stats.var_sqrt);
    let vq = params.transmitted_variance();
    let vp = params.transmitted_p_variance();
    let mix = eta_f.sqrt() * (eps * (1.0 - eps)).sqrt();
    CovarianceMatrix {
        a_q: vs * eps + va * (1.0 - eps),
        a_p: eps / vs + (1.0 - eps) / va,
        b_q: eta_f * vq - eta_f + 1.0 + var * (vq - 1.0),
        b_p: eta_f * vp - eta_f + 1.0 + var * (vp - 1.0),
        c_q: mix * (va - vs),
        c_p: mix * (1.0 / va - 1.0 / vs),
    }
}

/// `<X_A X_B>` for fixed `eta`, in the zero-leakage form
/// `sqrt(eta) sqrt(Va - 1) sqrt(1 - Vs)`.
pub fn alice_bob_correlation(params: &SqueezingParams, eta: f64) -> f64 {
    eta.sqrt() * (params.va - 1.0).sqrt() * (1.0 - params.vs).sqrt()
}

/// `<X_E X_B>` for fixed `eta`: zero under the QNL condition, otherwise
/// `sqrt(eta (1 - eta)) (eps Va + (1 - eps) Vs - 1)`.
pub fn eve_bob_correlation(params: &SqueezingParams, eta: f64) -> f64 {
    if params.is_zero_leakage() {
        return 0.0;
    }
    (eta * (1.0 - eta)).sqrt() * (params.transmitted_variance() - 1.0)
}

/// Classical displacement `+-alpha` and bright-carrier amplitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalLayer {
    alpha: f64,
    carrier: f64,
}

impl ClassicalLayer {
    pub fn new(alpha: f64, carrier_amplitude: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("displacement {alpha} must be finite and >= 0")));
        }
        if !(carrier_amplitude > 0.0 && carrier_amplitude.is_finite()) {
            return Err(Error::Domain(format!("carrier amplitude {carrier_amplitude} must be positive")));
        }
        Ok(Self {
            alpha,
            carrier: carrier_amplitude,
        })
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn carrier_amplitude(&self) -> f64 {
        self.carrier
    }
    pub fn carrier_warning(&self) -> Option<String> {
        (self.carrier < MIN_CARRIER_AMPLITUDE).then(|| {
            format!(
                "carrier amplitude {} is below {MIN_CARRIER_AMPLITUDE}; linearized detection is inaccurate",
                self.carrier
            )
        })
    }
}

/// `eta_hat = P / beta_c^2`.
pub fn estimate_eta_from_carrier(received_power: f64, carrier_amplitude: f64) -> Result<f64> {
    if !(carrier_amplitude > 0.0) {
        return Err(Error::Domain(format!("carrier amplitude {carrier_amplitude} must be positive")));
    }
    let eta = received_power / (carrier_amplitude * carrier_amplitude);
    if eta > 1.0 + CARRIER_TOLERANCE || eta < 0.0 {
        return Err(Error::Physicality(format!(
            "carrier power {received_power} implies transmissivity {eta} outside [0, 1]"
        )));
    }
    Ok(eta.min(1.0))
}

/// Photon number seen by direct detection of a bright mode, to first order
/// in the fluctuation: `beta^2 + beta dX`.
pub fn linearized_direct_detection(carrier_amplitude: f64, delta_x: f64) -> f64 {
    carrier_amplitude * carrier_amplitude + carrier_amplitude * delta_x
}

/// `4 eta alpha^2`.
pub fn classical_snr(alpha: f64, eta: f64) -> f64 {
    4.0 * eta * alpha * alpha
}

/// Bit error rate of antipodal signaling in unit-variance noise, `Q(sqrt(snr))`.
pub fn classical_ber(snr: f64) -> f64 {
    0.5 * libm::erfc((snr.max(0.0) / 2.0).sqrt())
}

/// Options of the shot-level simulator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShotOptions {
    pub shots_per_eta: u64,
    pub master_seed: u64,
    /// Pass Bob's measured quadrature through the linearized direct
    /// detection model and back.
    pub direct_detection: bool,
}

/// Sample mean and its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// `(mean - expected) / std_error`.
    pub fn z_score(&self, expected: f64) -> f64 {
        let d = self.mean - expected;
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Empirical second moments of the simulated quadratures. Bob's entries use
/// the extracted quantum quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmpiricalMoments {
    pub a_q: Estimate,
    pub a_p: Estimate,
    pub b_q: Estimate,
    pub b_p: Estimate,
    pub c_q: Estimate,
    pub c_p: Estimate,
    pub eve_q: Estimate,
    pub eve_bob_q: Estimate,
    pub eve_bob_p: Estimate,
    pub shots: u64,
    pub bit_errors: u64,
}

impl EmpiricalMoments {
    pub fn bit_error_rate(&self) -> f64 {
        self.bit_errors as f64 / self.shots as f64
    }

    pub fn named(&self) -> [(&'static str, Estimate); 9] {
        [
            ("a_q", self.a_q),
            ("a_p", self.a_p),
            ("b_q", self.b_q),
            ("b_p", self.b_p),
            ("c_q", self.c_q),
            ("c_p", self.c_p),
            ("eve_q", self.eve_q),
            ("eve_bob_q", self.eve_bob_q),
            ("eve_bob_p", self.eve_bob_p),
        ]
    }
}

const MOMENTS: usize = 9;

#[derive(Clone, Copy, Default)]
struct Sums {
    s: [f64; MOMENTS],
    s2: [f64; MOMENTS],
    errors: u64,
}

/// Shot-level Monte Carlo of the full chain: Gaussian source quadratures,
/// classical displacement, channel, bit decision and classical subtraction.
///
/// Each transmissivity receives `shots_per_eta` shots from its own
/// substream, so results do not depend on the thread count. Standard
/// errors are stratified over the ensemble.
pub fn mc_quadrature_sim(
    params: &SqueezingParams,
    classical: &ClassicalLayer,
    etas: &[f64],
    options: ShotOptions,
) -> Result<EmpiricalMoments> {
    fading_stats(etas)?;
    if options.shots_per_eta < 2 {
        return Err(Error::Domain("at least two shots per transmissivity are required".into()));
    }
    let strata: Vec<Result<Sums>> = etas
        .par_iter()
        .enumerate()
        .map(|(k, &eta)| simulate_stratum(params, classical, eta, k as u64, options))
        .collect();
    let n = options.shots_per_eta as f64;
    let kk = etas.len() as f64;
    let mut mean = [0.0; MOMENTS];
    let mut var = [0.0; MOMENTS];
    let mut errors = 0;
    for s in strata {
        let s = s?;
        for i in 0..MOMENTS {
            let m = s.s[i] / n;
            mean[i] += m / kk;
            let v = (s.s2[i] - n * m * m) / (n - 1.0);
            var[i] += v.max(0.0) / n / (kk * kk);
        }
        errors += s.errors;
    }
    let est = |i: usize| Estimate {
        mean: mean[i],
        std_error: var[i].sqrt(),
    };
    Ok(EmpiricalMoments {
        a_q: est(0),
        a_p: est(1),
        b_q: est(2),
        b_p: est(3),
        c_q: est(4),
        c_p: est(5),
        eve_q: est(6),
        eve_bob_q: est(7),
        eve_bob_p: est(8),
        shots: options.shots_per_eta * etas.len() as u64,
        bit_errors: errors,
    })
}

fn simulate_stratum(
    params: &SqueezingParams,
    classical: &ClassicalLayer,
    eta: f64,
    index: u64,
    options: ShotOptions,
) -> Result<Sums> {
    let mut rng = substream(options.master_seed, StreamId::shots(index, 0));
    let (sa, ss) = (params.va.sqrt(), params.vs.sqrt());
    let (te, re) = (params.eps.sqrt(), (1.0 - params.eps).sqrt());
    let (t, r) = (eta.sqrt(), (1.0 - eta).sqrt());
    let beta = classical.carrier;
    let two_alpha = 2.0 * classical.alpha;
    // carrier power is noiseless in this model
    let eta_hat = estimate_eta_from_carrier(eta * beta * beta, beta)?;
    let mut sums = Sums::default();
    for _ in 0..options.shots_per_eta {
        let mut g = || -> f64 { rng.sample(StandardNormal) };
        let (xa, xs, xv) = (sa * g(), ss * g(), g());
        let (pa, ps, pv) = (g() / sa, g() / ss, g());
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };

        let x_alice = re * xa - te * xs;
        let p_alice = re * pa - te * ps;
        let x_sent = te * xa + re * xs;
        let p_sent = te * pa + re * ps;
        let x_eve = r * x_sent - t * xv;
        let p_eve = r * p_sent - t * pv;
        let p_bob = t * p_sent + r * pv;

        let mut x_measured = t * (sign * two_alpha + x_sent) + r * xv;
        if options.direct_detection {
            let amp = t * beta;
            if amp > 0.0 {
                let photons = linearized_direct_detection(amp, x_measured);
                x_measured = (photons - amp * amp) / amp;
            }
        }
        let decided = if x_measured >= 0.0 { 1.0 } else { -1.0 };
        if decided != sign {
            sums.errors += 1;
        }
        let x_bob = x_measured - eta_hat.sqrt() * two_alpha * decided;

        let v = [
            x_alice * x_alice,
            p_alice * p_alice,
            x_bob * x_bob,
            p_bob * p_bob,
            x_alice * x_bob,
            p_alice * p_bob,
            x_eve * x_eve,
            x_eve * x_bob,
            p_eve * p_bob,
        ];
        for (i, x) in v.iter().enumerate() {
            sums.s[i] += x;
            sums.s2[i] += x * x;
        }
    }
    Ok(sums)
}

/// Closed-form predictions matching [`EmpiricalMoments::named`].
pub fn predicted_moments(params: &SqueezingParams, etas: &[f64]) -> Result<[(&'static str, f64); 9]> {
    let stats = fading_stats(etas)?;
    let cm = covariance_matrix(params, &stats);
    let n = etas.len() as f64;
    let avg = |f: &dyn Fn(f64) -> f64| etas.iter().map(|&e| f(e)).sum::<f64>() / n;
    let vq = params.transmitted_variance();
    let vp = params.transmitted_p_variance();
    Ok([
        ("a_q", cm.a_q),
        ("a_p", cm.a_p),
        ("b_q", cm.b_q),
        ("b_p", cm.b_p),
        ("c_q", cm.c_q),
        ("c_p", cm.c_p),
        ("eve_q", (1.0 - stats.mean_eta) * vq + stats.mean_eta),
        ("eve_bob_q", avg(&|e| eve_bob_correlation(params, e))),
        ("eve_bob_p", avg(&|e| (e * (1.0 - e)).sqrt()) * (vp - 1.0)),
    ])
}

/// Mean of `Q(sqrt(4 eta alpha^2))` over the ensemble.
pub fn predicted_ber(alpha: f64, etas: &[f64]) -> f64 {
    etas.iter().map(|&e| classical_ber(classical_snr(alpha, e))).sum::<f64>() / etas.len() as f64
}

/// Comparison of a Monte Carlo run against the closed forms.
#[derive(Clone, Debug, PartialEq)]
pub struct Verification {
    /// `(name, empirical, predicted, z)` per moment.
    pub moments: Vec<(&'static str, f64, f64, f64)>,
    /// z-score of the empirical `<X_E X_B>` against zero.
    pub eve_bob_z: f64,
    pub ber_empirical: f64,
    pub ber_predicted: f64,
    /// Binomial standard deviation of the empirical BER.
    pub ber_sigma: f64,
}

impl Verification {
    pub fn max_moment_z(&self) -> f64 {
        self.moments.iter().map(|m| m.3.abs()).fold(0.0, f64::max)
    }

    pub fn ber_z(&self) -> f64 {
        let d = self.ber_empirical - self.ber_predicted;
        if d == 0.0 {
            0.0
        } else {
            d / self.ber_sigma
        }
    }

    /// True when every statistic lies within `threshold` standard errors.
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_moment_z() < threshold && self.eve_bob_z.abs() < threshold && self.ber_z().abs() < threshold
    }
}

pub fn verify(
    moments: &EmpiricalMoments,
    params: &SqueezingParams,
    classical: &ClassicalLayer,
    etas: &[f64],
) -> Result<Verification> {
    let predicted = predicted_moments(params, etas)?;
    let rows = moments
        .named()
        .iter()
        .zip(predicted)
        .map(|((name, est), (_, p))| (*name, est.mean, p, est.z_score(p)))
        .collect();
    let ber_predicted = predicted_ber(classical.alpha, etas);
    let n = moments.shots as f64;
    Ok(Verification {
        moments: rows,
        eve_bob_z: moments.eve_bob_q.z_score(0.0),
        ber_empirical: moments.bit_error_rate(),
        ber_predicted,
        ber_sigma: (ber_predicted * (1.0 - ber_predicted) / n).sqrt(),
    })
}
