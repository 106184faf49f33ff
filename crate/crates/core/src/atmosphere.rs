//! Turbulence characterization of a slant satellite-to-ground path.
//!
//! Altitudes are meters above sea level, angles are degrees at the API
//! boundary. The refractive-index structure parameter follows the
//! Hufnagel-Valley model with the rms wind speed obtained from the Bufton
//! wind profile.

use crate::quad::{adaptive_simpson, altitude_integral};
use crate::{Error, Result};

/// Peak speed of the Bufton jet-stream term, m/s.
pub const BUFTON_JET_AMPLITUDE: f64 = 30.0;
const RMS_WIND_LO: f64 = 5e3;
const RMS_WIND_HI: f64 = 20e3;
/// Ratio linking coherence time and Greenwood frequency: `tau0 * f_G`.
pub const COHERENCE_GREENWOOD_PRODUCT: f64 = 0.134;

/// Geometry of the downlink.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkGeometry {
    ground_altitude: f64,
    satellite_altitude: f64,
    zenith_deg: f64,
    zenith_rad: f64,
    wavelength: f64,
    beam_waist: f64,
    aperture_radius: f64,
}

impl LinkGeometry {
    pub fn new(
        ground_altitude: f64,
        satellite_altitude: f64,
        zenith_deg: f64,
        wavelength: f64,
        beam_waist: f64,
        aperture_radius: f64,
    ) -> Result<Self> {
        let finite = [
            ground_altitude,
            satellite_altitude,
            zenith_deg,
            wavelength,
            beam_waist,
            aperture_radius,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("link geometry contains a non-finite value".into()));
        }
        if !(0.0 <= ground_altitude && ground_altitude < satellite_altitude) {
            return Err(Error::Domain(format!(
                "need 0 <= ground altitude ({ground_altitude}) < satellite altitude ({satellite_altitude})"
            )));
        }
        if !(0.0..90.0).contains(&zenith_deg) {
            return Err(Error::Domain(format!("zenith angle {zenith_deg} deg outside [0, 90)")));
        }
        if wavelength <= 0.0 || beam_waist <= 0.0 || aperture_radius <= 0.0 {
            return Err(Error::Domain(
                "wavelength, beam waist and aperture radius must be positive".into(),
            ));
        }
        Ok(Self {
            ground_altitude,
            satellite_altitude,
            zenith_deg,
            zenith_rad: zenith_deg.to_radians(),
            wavelength,
            beam_waist,
            aperture_radius,
        })
    }

    /// Reference scene: 500 km LEO, sea-level station, 1064 nm, 15 cm waist.
    pub fn reference(zenith_deg: f64, aperture_radius: f64) -> Result<Self> {
        Self::new(0.0, 500e3, zenith_deg, 1064e-9, 0.15, aperture_radius)
    }

    pub fn ground_altitude(&self) -> f64 {
        self.ground_altitude
    }
    pub fn satellite_altitude(&self) -> f64 {
        self.satellite_altitude
    }
    pub fn zenith_deg(&self) -> f64 {
        self.zenith_deg
    }
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    pub fn beam_waist(&self) -> f64 {
        self.beam_waist
    }
    pub fn aperture_radius(&self) -> f64 {
        self.aperture_radius
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    pub fn sec_zenith(&self) -> f64 {
        1.0 / self.zenith_rad.cos()
    }

    /// Slant range `(H - h0) / cos(theta_z)`.
    pub fn path_length(&self) -> f64 {
        self.slant(self.satellite_altitude - self.ground_altitude)
    }

    /// Converts a vertical extent into a distance along the path.
    pub fn slant(&self, vertical: f64) -> f64 {
        vertical * self.sec_zenith()
    }

    pub fn rayleigh_range(&self) -> f64 {
        std::f64::consts::PI * self.beam_waist * self.beam_waist / self.wavelength
    }

    /// Vacuum Gaussian beam radius at distance `z` from the waist.
    pub fn beam_radius_at(&self, z: f64) -> f64 {
        let q = z / self.rayleigh_range();
        self.beam_waist * (1.0 + q * q).sqrt()
    }

    pub fn with_zenith(&self, zenith_deg: f64) -> Result<Self> {
        Self::new(
            self.ground_altitude,
            self.satellite_altitude,
            zenith_deg,
            self.wavelength,
            self.beam_waist,
            self.aperture_radius,
        )
    }

    pub fn with_aperture(&self, aperture_radius: f64) -> Result<Self> {
        Self::new(
            self.ground_altitude,
            self.satellite_altitude,
            self.zenith_deg,
            self.wavelength,
            self.beam_waist,
            aperture_radius,
        )
    }
}

/// Turbulence and wind parameters of the atmosphere.
///
/// `cn2_scale` multiplies the whole Hufnagel-Valley profile; 1 is the
/// physical profile and 0 gives a turbulence-free path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtmosphereProfile {
    ground_turbulence: f64,
    ground_wind: f64,
    rms_wind: f64,
    outer_scale: f64,
    inner_scale: f64,
    cn2_scale: f64,
}

impl AtmosphereProfile {
    pub fn new(ground_turbulence: f64, ground_wind: f64, outer_scale: f64, inner_scale: f64) -> Result<Self> {
        Self::with_scale(ground_turbulence, ground_wind, outer_scale, inner_scale, 1.0)
    }

    pub fn with_scale(
        ground_turbulence: f64,
        ground_wind: f64,
        outer_scale: f64,
        inner_scale: f64,
        cn2_scale: f64,
    ) -> Result<Self> {
        if !(ground_turbulence > 0.0 && ground_turbulence.is_finite()) {
            return Err(Error::Domain(format!(
                "ground turbulence A = {ground_turbulence} must be positive"
            )));
        }
        if !(0.0 < inner_scale && inner_scale < outer_scale && outer_scale.is_finite()) {
            return Err(Error::Domain(format!(
                "need 0 < inner scale ({inner_scale}) < outer scale ({outer_scale})"
            )));
        }
        if !(cn2_scale >= 0.0 && cn2_scale.is_finite()) {
            return Err(Error::Domain(format!("Cn2 scale {cn2_scale} must be >= 0")));
        }
        let rms_wind = rms_wind(ground_wind)?;
        Ok(Self {
            ground_turbulence,
            ground_wind,
            rms_wind,
            outer_scale,
            inner_scale,
            cn2_scale,
        })
    }

    /// Reference atmosphere: A = 9.6e-14, Vg = 3 m/s, L0 = 5 m, l0 = 1 cm.
    pub fn reference() -> Result<Self> {
        Self::new(9.6e-14, 3.0, 5.0, 0.01)
    }

    /// Same profile with the Cn2 scale multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::with_scale(
            self.ground_turbulence,
            self.ground_wind,
            self.outer_scale,
            self.inner_scale,
            self.cn2_scale * factor,
        )
    }

    pub fn ground_turbulence(&self) -> f64 {
        self.ground_turbulence
    }
    pub fn ground_wind(&self) -> f64 {
        self.ground_wind
    }
    pub fn rms_wind(&self) -> f64 {
        self.rms_wind
    }
    pub fn outer_scale(&self) -> f64 {
        self.outer_scale
    }
    pub fn inner_scale(&self) -> f64 {
        self.inner_scale
    }
    pub fn cn2_scale(&self) -> f64 {
        self.cn2_scale
    }
    pub fn is_calm(&self) -> bool {
        self.cn2_scale == 0.0
    }
}

/// Outcome of a turbulence-strength evaluation. `Calm` marks a path whose
/// integrated Cn2 is zero, where quantities like r0 are unbounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Turbulence<T> {
    Active(T),
    Calm,
}

impl<T> Turbulence<T> {
    pub fn active(self) -> Option<T> {
        match self {
            Turbulence::Active(v) => Some(v),
            Turbulence::Calm => None,
        }
    }

    pub fn is_calm(&self) -> bool {
        matches!(self, Turbulence::Calm)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TurbulenceDiagnostics {
    pub rytov_variance: f64,
    pub scintillation_index: f64,
    pub fried_parameter: f64,
    pub greenwood_frequency: f64,
    pub coherence_time: f64,
}

/// Hufnagel-Valley `Cn2(h)` for explicit `A` and `v_rms`.
pub fn hufnagel_valley(h: f64, ground_turbulence: f64, rms_wind: f64) -> f64 {
    let w = rms_wind / 27.0;
    let s = h * 1e-5;
    let s2 = s * s;
    let s10 = s2 * s2 * s2 * s2 * s2;
    0.00594 * w * w * s10 * (-h / 1000.0).exp()
        + 2.7e-16 * (-h / 1500.0).exp()
        + ground_turbulence * (-h / 100.0).exp()
}

/// Refractive-index structure parameter at altitude `h`, m^(-2/3).
pub fn cn2(h: f64, profile: &AtmosphereProfile) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::Domain(format!("altitude {h} must be >= 0")));
    }
    Ok(cn2_unchecked(h, profile))
}

fn cn2_unchecked(h: f64, profile: &AtmosphereProfile) -> f64 {
    profile.cn2_scale * hufnagel_valley(h, profile.ground_turbulence, profile.rms_wind)
}

/// Bufton wind speed at altitude `h` for ground wind `vg`.
pub fn bufton_wind(h: f64, vg: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::Domain(format!("altitude {h} must be >= 0")));
    }
    Ok(bufton_with_amplitude(h, vg, BUFTON_JET_AMPLITUDE))
}

fn bufton_with_amplitude(h: f64, vg: f64, amplitude: f64) -> f64 {
    let u = (h - 9400.0) / 4800.0;
    vg + amplitude * (-u * u).exp()
}

/// RMS of the Bufton profile between 5 and 20 km.
pub fn rms_wind(vg: f64) -> Result<f64> {
    rms_wind_with_amplitude(vg, BUFTON_JET_AMPLITUDE)
}

/// [`rms_wind`] with a custom jet-stream amplitude (0 removes the jet).
pub fn rms_wind_with_amplitude(vg: f64, amplitude: f64) -> Result<f64> {
    if !(vg >= 0.0 && vg.is_finite()) {
        return Err(Error::Domain(format!("ground wind {vg} must be >= 0")));
    }
    let f = |h: f64| {
        let v = bufton_with_amplitude(h, vg, amplitude);
        v * v
    };
    let integral = adaptive_simpson(&f, RMS_WIND_LO, RMS_WIND_HI, 1e-12, 1e-30)?;
    Ok((integral / (RMS_WIND_HI - RMS_WIND_LO)).sqrt())
}

fn check_band(geom: &LinkGeometry, lo: f64, hi: f64) -> Result<()> {
    if !(geom.ground_altitude <= lo && lo < hi && hi <= geom.satellite_altitude) {
        return Err(Error::Domain(format!(
            "altitude band [{lo}, {hi}] not inside [{}, {}]",
            geom.ground_altitude, geom.satellite_altitude
        )));
    }
    Ok(())
}

/// `Int Cn2(h) (h - h0)^(5/6) dh` over `[lo, hi]`.
fn rytov_moment(geom: &LinkGeometry, profile: &AtmosphereProfile, lo: f64, hi: f64) -> Result<f64> {
    let h0 = geom.ground_altitude;
    altitude_integral(&|h: f64| cn2_unchecked(h, profile) * (h - h0).max(0.0).powf(5.0 / 6.0), lo, hi)
}

fn rytov_prefactor(geom: &LinkGeometry) -> f64 {
    2.25 * geom.wavenumber().powf(7.0 / 6.0) * geom.sec_zenith().powf(11.0 / 6.0)
}

/// Plane-wave Rytov variance of the whole downlink.
pub fn rytov_variance(geom: &LinkGeometry, profile: &AtmosphereProfile) -> Result<f64> {
    rytov_variance_between(geom, profile, geom.ground_altitude, geom.satellite_altitude)
}

/// Rytov variance contributed by the altitudes `[lo, hi]`; distances are
/// still measured from the ground station, so band values add up to the
/// whole-path value.
pub fn rytov_variance_between(
    geom: &LinkGeometry,
    profile: &AtmosphereProfile,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    check_band(geom, lo, hi)?;
    Ok(rytov_prefactor(geom) * rytov_moment(geom, profile, lo, hi)?)
}

/// Scintillation index from the Rytov variance, valid across weak to strong
/// fluctuation.
pub fn scintillation_index(rytov_variance: f64) -> f64 {
    debug_assert!(rytov_variance >= 0.0);
    let s = rytov_variance;
    let s125 = s.powf(1.2);
    let a = 0.49 * s / (1.0 + 1.11 * s125).powf(7.0 / 6.0);
    let b = 0.51 * s / (1.0 + 0.69 * s125).powf(5.0 / 6.0);
    (a + b).exp_m1()
}

/// `Int Cn2 dh` over `[lo, hi]`.
pub fn integrated_cn2(profile: &AtmosphereProfile, lo: f64, hi: f64) -> Result<f64> {
    altitude_integral(&|h: f64| cn2_unchecked(h, profile), lo, hi)
}

/// Fried parameter of the whole path.
pub fn fried_parameter(geom: &LinkGeometry, profile: &AtmosphereProfile) -> Result<Turbulence<f64>> {
    fried_parameter_between(geom, profile, geom.ground_altitude, geom.satellite_altitude)
}

/// Fried parameter accumulated over the altitude band `[lo, hi]`.
pub fn fried_parameter_between(
    geom: &LinkGeometry,
    profile: &AtmosphereProfile,
    lo: f64,
    hi: f64,
) -> Result<Turbulence<f64>> {
    check_band(geom, lo, hi)?;
    let integral = integrated_cn2(profile, lo, hi)?;
    Ok(fried_from_integral(geom, integral))
}

pub(crate) fn fried_from_integral(geom: &LinkGeometry, integral: f64) -> Turbulence<f64> {
    if integral <= 0.0 {
        return Turbulence::Calm;
    }
    let k = geom.wavenumber();
    Turbulence::Active((0.423 * k * k * geom.sec_zenith() * integral).powf(-0.6))
}

/// Greenwood frequency of the whole path, Hz.
pub fn greenwood_frequency(geom: &LinkGeometry, profile: &AtmosphereProfile) -> Result<Turbulence<f64>> {
    let vg = profile.ground_wind;
    let integral = altitude_integral(
        &|h: f64| cn2_unchecked(h, profile) * bufton_with_amplitude(h, vg, BUFTON_JET_AMPLITUDE).powf(5.0 / 3.0),
        geom.ground_altitude,
        geom.satellite_altitude,
    )?;
    if integral <= 0.0 {
        return Ok(Turbulence::Calm);
    }
    Ok(Turbulence::Active(
        2.31 * geom.wavelength.powf(-1.2) * (geom.sec_zenith() * integral).powf(0.6),
    ))
}

/// Evaluates every whole-channel diagnostic. The coherence time is defined as
/// `0.134 / f_G`.
pub fn greenwood_and_coherence(
    geom: &LinkGeometry,
    profile: &AtmosphereProfile,
) -> Result<Turbulence<TurbulenceDiagnostics>> {
    let fried = match fried_parameter(geom, profile)? {
        Turbulence::Active(r0) => r0,
        Turbulence::Calm => return Ok(Turbulence::Calm),
    };
    let greenwood = match greenwood_frequency(geom, profile)? {
        Turbulence::Active(f) => f,
        Turbulence::Calm => return Ok(Turbulence::Calm),
    };
    let rytov = rytov_variance(geom, profile)?;
    Ok(Turbulence::Active(TurbulenceDiagnostics {
        rytov_variance: rytov,
        scintillation_index: scintillation_index(rytov),
        fried_parameter: fried,
        greenwood_frequency: greenwood,
        coherence_time: COHERENCE_GREENWOOD_PRODUCT / greenwood,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table_one(theta: f64) -> (LinkGeometry, AtmosphereProfile) {
        (
            LinkGeometry::reference(theta, 0.5).unwrap(),
            AtmosphereProfile::reference().unwrap(),
        )
    }

    #[test]
    fn geometry_validation() {
        assert!(LinkGeometry::new(0.0, 500e3, 90.0, 1e-6, 0.1, 0.1).is_err());
        assert!(LinkGeometry::new(600e3, 500e3, 0.0, 1e-6, 0.1, 0.1).is_err());
        assert!(LinkGeometry::new(0.0, 500e3, 0.0, 0.0, 0.1, 0.1).is_err());
        let g = LinkGeometry::reference(60.0, 0.15).unwrap();
        assert_relative_eq!(g.path_length(), 1.0e6, max_relative = 1e-12);
        assert!(LinkGeometry::reference(30.0, 0.15).unwrap().path_length() > 500e3);
    }

    #[test]
    fn hv_at_ground() {
        assert_relative_eq!(hufnagel_valley(0.0, 9.6e-14, 21.0), 9.627e-14, max_relative = 1e-12);
    }

    #[test]
    fn hv_at_one_km() {
        // independent high-precision evaluation
        assert_relative_eq!(
            hufnagel_valley(1000.0, 9.6e-14, 21.0),
            1.429_810_286_151_33e-16,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cn2_vanishes_aloft_and_rejects_negative_altitude() {
        let p = AtmosphereProfile::reference().unwrap();
        assert!(cn2(1e6, &p).unwrap() < 1e-300);
        assert!(matches!(cn2(-1.0, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn bufton_examples() {
        assert_eq!(bufton_wind(9400.0, 3.0).unwrap(), 33.0);
        assert_relative_eq!(bufton_wind(1e7, 3.0).unwrap(), 3.0);
        assert_relative_eq!(bufton_wind(4600.0, 3.0).unwrap(), 14.036_383_235_143_27, max_relative = 1e-14);
    }

    #[test]
    fn rms_wind_examples() {
        let v = rms_wind(3.0).unwrap();
        assert!((v - 21.0).abs() <= 0.5, "{v}");
        assert_relative_eq!(v, 21.212_278_572_061_75, max_relative = 1e-10);
        assert_relative_eq!(rms_wind_with_amplitude(3.0, 0.0).unwrap(), 3.0, max_relative = 1e-12);
        // 1e6-point trapezoid, evaluated independently
        assert_relative_eq!(rms_wind(0.0).unwrap(), 18.679_005_939_359_367, max_relative = 1e-9);
    }

    #[test]
    fn calm_profile_has_no_turbulence() {
        let (g, p) = table_one(0.0);
        let calm = p.scaled(0.0).unwrap();
        assert_eq!(rytov_variance(&g, &calm).unwrap(), 0.0);
        assert!(fried_parameter(&g, &calm).unwrap().is_calm());
        assert!(greenwood_and_coherence(&g, &calm).unwrap().is_calm());
    }

    #[test]
    fn rytov_zenith_scaling() {
        let (g0, p) = table_one(0.0);
        let g60 = g0.with_zenith(60.0).unwrap();
        let ratio = rytov_variance(&g60, &p).unwrap() / rytov_variance(&g0, &p).unwrap();
        assert_relative_eq!(ratio, 3.563_594_872_561_357, max_relative = 1e-9);
    }

    #[test]
    fn scintillation_examples() {
        assert_eq!(scintillation_index(0.0), 0.0);
        assert_relative_eq!(scintillation_index(1.0), 0.706_438_495_919_241_9, max_relative = 1e-12);
        assert_relative_eq!(scintillation_index(1e6), 1.006_780_143_032_664, max_relative = 1e-10);
    }

    #[test]
    fn fried_scales_with_cn2() {
        let (g, p) = table_one(0.0);
        let full = fried_parameter(&g, &p).unwrap().active().unwrap();
        let half = fried_parameter(&g, &p.scaled(0.5).unwrap()).unwrap().active().unwrap();
        assert_relative_eq!(half / full, 2f64.powf(0.6), max_relative = 1e-10);
    }

    #[test]
    fn fried_band_validation() {
        let (g, p) = table_one(0.0);
        assert!(fried_parameter_between(&g, &p, 100.0, 50.0).is_err());
        assert!(fried_parameter_between(&g, &p, 0.0, 600e3).is_err());
    }

    #[test]
    fn coherence_time_at_sixty_degrees() {
        let (g, p) = table_one(60.0);
        let d = greenwood_and_coherence(&g, &p).unwrap().active().unwrap();
        assert!((d.coherence_time / 2.29e-3 - 1.0).abs() < 0.1, "{}", d.coherence_time);
        assert_relative_eq!(d.coherence_time * d.greenwood_frequency, 0.134, max_relative = 1e-15);
    }
}
