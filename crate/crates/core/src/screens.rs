//! Slab partition of the turbulent path and random phase screens.
//!
//! Each turbulent slab is represented by one thin phase screen placed at its
//! midpoint. Slab widths are chosen so that every slab is in weak
//! fluctuation on its own (`sigma_Ij^2 < 0.1`) and carries less than a tenth
//! of the whole-channel scintillation (`sigma_Ij^2 < 0.1 sigma_I^2`).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::atmosphere::{
    fried_from_integral, integrated_cn2, rytov_variance_between, scintillation_index, AtmosphereProfile,
    LinkGeometry, Turbulence, TurbulenceDiagnostics,
};
use crate::fft::{signed_index, Fft2};
use crate::rng::{substream, StreamId};
use crate::{Error, Result};

/// Upper bound on turbulent slabs; more signals a mis-set configuration.
pub const MAX_SLABS: usize = 64;
/// Fraction of the full-path `Int Cn2` below the effective top of the
/// modeled turbulence.
pub const EFFECTIVE_TOP_FRACTION: f64 = 0.999;
/// Per-slab weak-fluctuation bound.
pub const SLAB_SCINTILLATION_LIMIT: f64 = 0.1;
/// Per-slab bound relative to the whole-channel scintillation index.
pub const SLAB_SCINTILLATION_SHARE: f64 = 0.1;
/// Levels of subharmonic low-frequency compensation.
pub const SUBHARMONIC_LEVELS: u32 = 3;

const BOUNDARY_ABS_TOL: f64 = 1e-3;
const BOUNDARY_REL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SlabKind {
    Turbulent {
        fried_parameter: f64,
        rytov_variance: f64,
        scintillation_index: f64,
    },
    /// Above the effective atmosphere; propagated without a screen.
    Vacuum,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slab {
    /// Lower altitude boundary, meters.
    pub lower: f64,
    /// Upper altitude boundary, meters.
    pub upper: f64,
    /// Extent along the slant path, meters.
    pub path_length: f64,
    pub kind: SlabKind,
}

impl Slab {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn fried_parameter(&self) -> Turbulence<f64> {
        match self.kind {
            SlabKind::Turbulent { fried_parameter, .. } => Turbulence::Active(fried_parameter),
            SlabKind::Vacuum => Turbulence::Calm,
        }
    }

    pub fn scintillation_index(&self) -> f64 {
        match self.kind {
            SlabKind::Turbulent { scintillation_index, .. } => scintillation_index,
            SlabKind::Vacuum => 0.0,
        }
    }

    pub fn is_turbulent(&self) -> bool {
        matches!(self.kind, SlabKind::Turbulent { .. })
    }
}

/// Contiguous slabs in ascending altitude order. Turbulent slabs come first,
/// followed by at most one vacuum slab reaching the satellite.
#[derive(Clone, Debug, PartialEq)]
pub struct SlabPlan {
    slabs: Vec<Slab>,
    whole_scintillation: f64,
}

impl SlabPlan {
    pub fn slabs(&self) -> &[Slab] {
        &self.slabs
    }

    pub fn turbulent(&self) -> impl DoubleEndedIterator<Item = (usize, &Slab)> {
        self.slabs.iter().enumerate().filter(|(_, s)| s.is_turbulent())
    }

    pub fn screen_count(&self) -> usize {
        self.turbulent().count()
    }

    /// Altitudes of every slab boundary, ascending.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.slabs.iter().map(|s| s.lower).collect();
        if let Some(last) = self.slabs.last() {
            b.push(last.upper);
        }
        b
    }

    /// Highest altitude carrying a phase screen (ground altitude if none).
    pub fn turbulence_top(&self) -> f64 {
        self.turbulent()
            .last()
            .map(|(_, s)| s.upper)
            .unwrap_or_else(|| self.slabs[0].lower)
    }

    pub fn whole_channel_scintillation(&self) -> f64 {
        self.whole_scintillation
    }

    pub fn total_path_length(&self) -> f64 {
        self.slabs.iter().map(|s| s.path_length).sum()
    }
}

/// Altitude below which `EFFECTIVE_TOP_FRACTION` of `Int Cn2` accumulates.
pub fn effective_turbulence_top(geom: &LinkGeometry, profile: &AtmosphereProfile) -> Result<f64> {
    let (h0, big_h) = (geom.ground_altitude(), geom.satellite_altitude());
    let total = integrated_cn2(profile, h0, big_h)?;
    if total <= 0.0 {
        return Ok(h0);
    }
    let target = EFFECTIVE_TOP_FRACTION * total;
    let (mut lo, mut hi) = (h0, big_h);
    while hi - lo > BOUNDARY_ABS_TOL.max(BOUNDARY_REL_TOL * hi) {
        let mid = 0.5 * (lo + hi);
        if integrated_cn2(profile, h0, mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Greedy partition of the turbulent path, from the ground upward.
pub fn plan_slabs(
    geom: &LinkGeometry,
    profile: &AtmosphereProfile,
    diagnostics: &Turbulence<TurbulenceDiagnostics>,
) -> Result<SlabPlan> {
    let (h0, big_h) = (geom.ground_altitude(), geom.satellite_altitude());
    let vacuum = |lower: f64| Slab {
        lower,
        upper: big_h,
        path_length: geom.slant(big_h - lower),
        kind: SlabKind::Vacuum,
    };
    let whole = match diagnostics {
        Turbulence::Calm => {
            return Ok(SlabPlan {
                slabs: vec![vacuum(h0)],
                whole_scintillation: 0.0,
            })
        }
        Turbulence::Active(d) => d.scintillation_index,
    };
    let limit = SLAB_SCINTILLATION_LIMIT.min(SLAB_SCINTILLATION_SHARE * whole);
    let top = effective_turbulence_top(geom, profile)?;
    let local = |lo: f64, hi: f64| -> Result<(f64, f64)> {
        let rytov = rytov_variance_between(geom, profile, lo, hi)?;
        Ok((rytov, scintillation_index(rytov)))
    };

    let mut slabs = Vec::new();
    let mut lo = h0;
    while lo < top {
        if slabs.len() == MAX_SLABS {
            return Err(Error::Config(format!(
                "slab conditions need more than {MAX_SLABS} slabs below {top:.1} m \
                 (reached {lo:.1} m); check the turbulence profile"
            )));
        }
        let hi = if local(lo, top)?.1 < limit {
            top
        } else {
            // largest upper bound that still satisfies both conditions
            let (mut ok, mut bad) = (lo, top);
            while bad - ok > BOUNDARY_ABS_TOL.max(BOUNDARY_REL_TOL * bad) {
                let mid = 0.5 * (ok + bad);
                if local(lo, mid)?.1 < limit {
                    ok = mid;
                } else {
                    bad = mid;
                }
            }
            if ok == lo {
                return Err(Error::Config(format!(
                    "cannot satisfy slab scintillation bound {limit:e} above {lo:.3} m"
                )));
            }
            ok
        };
        let (rytov, scint) = local(lo, hi)?;
        let fried = match fried_from_integral(geom, integrated_cn2(profile, lo, hi)?) {
            Turbulence::Active(r0) => r0,
            Turbulence::Calm => f64::INFINITY,
        };
        slabs.push(Slab {
            lower: lo,
            upper: hi,
            path_length: geom.slant(hi - lo),
            kind: SlabKind::Turbulent {
                fried_parameter: fried,
                rytov_variance: rytov,
                scintillation_index: scint,
            },
        });
        lo = hi;
    }
    if lo < big_h {
        slabs.push(vacuum(lo));
    }
    Ok(SlabPlan {
        slabs,
        whole_scintillation: whole,
    })
}

/// Modified von Karman phase power spectral density at spatial frequency
/// `f` (cycles/m).
pub fn mvk_psd(f: f64, fried_parameter: f64, outer_scale: f64, inner_scale: f64) -> f64 {
    let f0 = 1.0 / outer_scale;
    let fm = 0.9422 / inner_scale;
    let f2 = f * f;
    0.023 * fried_parameter.powf(-5.0 / 3.0) * (-f2 / (fm * fm)).exp() / (f2 + f0 * f0).powf(11.0 / 6.0)
}

/// Statistics of one slab's screen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScreenSpec {
    pub slab_index: usize,
    pub fried_parameter: Turbulence<f64>,
    pub outer_scale: f64,
    pub inner_scale: f64,
}

impl ScreenSpec {
    pub fn for_slab(slab_index: usize, slab: &Slab, profile: &AtmosphereProfile) -> Self {
        Self {
            slab_index,
            fried_parameter: slab.fried_parameter(),
            outer_scale: profile.outer_scale(),
            inner_scale: profile.inner_scale(),
        }
    }
}

/// Real phase samples (radians) on an `n x n` grid, row-major, origin at
/// index `n/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseScreen {
    data: Vec<f64>,
    n: usize,
    spacing: f64,
    slab_index: usize,
    seed: u64,
    stream: StreamId,
}

impl PhaseScreen {
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn slab_index(&self) -> usize {
        self.slab_index
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn stream(&self) -> StreamId {
        self.stream
    }
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }
}

/// Returns a warning when the screen window cannot represent the outer
/// scale (`N delta < L_outer / 2`).
pub fn sampling_warning(n: usize, spacing: f64, outer_scale: f64) -> Option<String> {
    let window = n as f64 * spacing;
    (window < 0.5 * outer_scale).then(|| {
        format!(
            "screen window {window:.4} m is below half the outer scale ({outer_scale} m); \
             large-scale phase relies on subharmonics"
        )
    })
}

fn check_grid(n: usize, spacing: f64) -> Result<()> {
    if n < 4 || !n.is_power_of_two() {
        return Err(Error::Config(format!("screen size {n} must be a power of two >= 4")));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Config(format!("screen spacing {spacing} must be positive")));
    }
    Ok(())
}

/// Draws one phase screen from the modified von Karman spectrum: an FFT
/// screen plus `SUBHARMONIC_LEVELS` levels of 3x3 subharmonics.
pub fn generate_screen(spec: &ScreenSpec, n: usize, spacing: f64, seed: u64, stream: StreamId) -> Result<PhaseScreen> {
    Ok(ScreenGenerator::new(spec, n, spacing)?.generate(seed, stream))
}

/// Spectral weights of one slab, computed once and reused for every
/// realization.
#[derive(Clone, Debug)]
pub struct ScreenGenerator {
    spec: ScreenSpec,
    n: usize,
    spacing: f64,
    /// `sqrt(PSD) df` per FFT bin; empty for a calm slab.
    weights: Vec<f64>,
    levels: Vec<Subharmonic>,
}

#[derive(Clone, Debug)]
struct Subharmonic {
    weights: [[f64; 3]; 3],
    /// `exp(i 2 pi k df x)` for `k = -1, 0, 1` at every grid coordinate.
    phasors: Vec<[Complex64; 3]>,
}

impl ScreenGenerator {
    pub fn new(spec: &ScreenSpec, n: usize, spacing: f64) -> Result<Self> {
        check_grid(n, spacing)?;
        let mut gen = Self {
            spec: *spec,
            n,
            spacing,
            weights: Vec::new(),
            levels: Vec::new(),
        };
        let r0 = match spec.fried_parameter {
            Turbulence::Active(r0) if r0.is_finite() => r0,
            _ => return Ok(gen),
        };
        let amp = |fx: f64, fy: f64, df: f64| {
            mvk_psd((fx * fx + fy * fy).sqrt(), r0, spec.outer_scale, spec.inner_scale).sqrt() * df
        };
        let window = n as f64 * spacing;
        let df = 1.0 / window;
        gen.weights = (0..n * n)
            .map(|i| {
                let (row, col) = (i / n, i % n);
                if i == 0 {
                    return 0.0;
                }
                amp(signed_index(col, n) as f64 * df, signed_index(row, n) as f64 * df, df)
            })
            .collect();
        let coords: Vec<f64> = (0..n).map(|i| (i as f64 - (n / 2) as f64) * spacing).collect();
        for level in 1..=SUBHARMONIC_LEVELS {
            let df = 1.0 / (3f64.powi(level as i32) * window);
            let mut weights = [[0.0; 3]; 3];
            for (b, row) in weights.iter_mut().enumerate() {
                for (a, w) in row.iter_mut().enumerate() {
                    if a != 1 || b != 1 {
                        *w = amp((a as f64 - 1.0) * df, (b as f64 - 1.0) * df, df);
                    }
                }
            }
            let phasors = coords
                .iter()
                .map(|&x| {
                    let ph = |k: f64| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k * df * x);
                    [ph(-1.0), ph(0.0), ph(1.0)]
                })
                .collect();
            gen.levels.push(Subharmonic { weights, phasors });
        }
        Ok(gen)
    }

    pub fn spec(&self) -> &ScreenSpec {
        &self.spec
    }

    pub fn generate(&self, seed: u64, stream: StreamId) -> PhaseScreen {
        let n = self.n;
        let mut screen = PhaseScreen {
            data: vec![0.0; n * n],
            n,
            spacing: self.spacing,
            slab_index: self.spec.slab_index,
            seed,
            stream,
        };
        if self.weights.is_empty() {
            return screen;
        }
        let mut rng = substream(seed, stream);
        let mut spectrum: Vec<Complex64> = self
            .weights
            .iter()
            .map(|&w| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * w
            })
            .collect();
        Fft2::new(n).inverse(&mut spectrum);
        for (d, c) in screen.data.iter_mut().zip(&spectrum) {
            *d = c.re;
        }

        let low = self.subharmonics(&mut rng);
        let mean = low.iter().sum::<f64>() / low.len() as f64;
        for (d, l) in screen.data.iter_mut().zip(&low) {
            *d += l - mean;
        }
        screen
    }

    fn subharmonics<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.n;
        let mut low = vec![0.0; n * n];
        let mut rows = vec![Complex64::default(); 3 * n];
        for level in &self.levels {
            let mut coeff = [[Complex64::default(); 3]; 3];
            for (b, row) in coeff.iter_mut().enumerate() {
                for (a, c) in row.iter_mut().enumerate() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *c = Complex64::new(re, im) * level.weights[b][a];
                }
            }
            // separable sum: rows[b][x] = sum_a c[b][a] exp(i 2 pi fx_a x)
            for b in 0..3 {
                for (ix, ph) in level.phasors.iter().enumerate() {
                    rows[b * n + ix] = coeff[b][0] * ph[0] + coeff[b][1] * ph[1] + coeff[b][2] * ph[2];
                }
            }
            for (iy, ys) in level.phasors.iter().enumerate() {
                let out = &mut low[iy * n..(iy + 1) * n];
                for (ix, o) in out.iter_mut().enumerate() {
                    *o += (ys[0] * rows[ix] + ys[1] * rows[n + ix] + ys[2] * rows[2 * n + ix]).re;
                }
            }
        }
        low
    }
}

/// Empirical phase structure function `<(phi(x + r) - phi(x))^2>` averaged
/// over pixels, both grid axes and all screens. Separations are rounded to
/// whole pixels.
pub fn screen_structure_function(screens: &[PhaseScreen], separations: &[f64]) -> Result<Vec<f64>> {
    const MIN_SCREENS: usize = 50;
    if screens.len() < MIN_SCREENS {
        return Err(Error::Domain(format!(
            "structure function needs at least {MIN_SCREENS} screens, got {}",
            screens.len()
        )));
    }
    let (n, spacing) = (screens[0].n, screens[0].spacing);
    if screens.iter().any(|s| s.n != n || (s.spacing / spacing - 1.0).abs() > 1e-12) {
        return Err(Error::Domain("screens do not share a common grid".into()));
    }
    separations
        .iter()
        .map(|&r| {
            if !(r >= 0.0) {
                return Err(Error::Domain(format!("separation {r} must be >= 0")));
            }
            let shift = (r / spacing).round() as usize;
            if shift >= n {
                return Err(Error::Domain(format!(
                    "separation {r} m exceeds the {:.4} m grid",
                    n as f64 * spacing
                )));
            }
            if shift == 0 {
                return Ok(0.0);
            }
            let mut acc = 0.0;
            for s in screens {
                for row in 0..n {
                    for col in 0..n - shift {
                        let dx = s.at(row, col + shift) - s.at(row, col);
                        let dy = s.at(col + shift, row) - s.at(col, row);
                        acc += dx * dx + dy * dy;
                    }
                }
            }
            Ok(acc / (2 * screens.len() * n * (n - shift)) as f64)
        })
        .collect()
}

/// Writes the screen as little-endian f64 samples plus a `.txt` sidecar.
pub fn write_screen(path: &Path, screen: &PhaseScreen) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in &screen.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    let mut side = BufWriter::new(File::create(sidecar_path(path))?);
    writeln!(side, "n={}", screen.n)?;
    writeln!(side, "spacing={:e}", screen.spacing)?;
    writeln!(side, "slab_index={}", screen.slab_index)?;
    writeln!(side, "seed={}", screen.seed)?;
    writeln!(side, "stream={}", screen.stream)?;
    side.flush()?;
    Ok(())
}

/// Reads the samples and `n`/`spacing` written by [`write_screen`].
pub fn read_screen_samples(path: &Path) -> Result<(usize, f64, Vec<f64>)> {
    let side = BufReader::new(File::open(sidecar_path(path))?);
    let (mut n, mut spacing) = (None, None);
    for line in side.lines() {
        let line = line?;
        match line.split_once('=') {
            Some(("n", v)) => n = v.parse::<usize>().ok(),
            Some(("spacing", v)) => spacing = v.parse::<f64>().ok(),
            _ => {}
        }
    }
    let (n, spacing) = n
        .zip(spacing)
        .ok_or_else(|| Error::Format("screen sidecar lacks n or spacing".into()))?;
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != n * n * 8 {
        return Err(Error::Format(format!(
            "screen file holds {} bytes, expected {}",
            bytes.len(),
            n * n * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((n, spacing, data))
}

pub(crate) fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atmosphere::greenwood_and_coherence;
    use approx::assert_relative_eq;

    fn plan_for(theta: f64) -> SlabPlan {
        let g = LinkGeometry::reference(theta, 0.15).unwrap();
        let p = AtmosphereProfile::reference().unwrap();
        let d = greenwood_and_coherence(&g, &p).unwrap();
        plan_slabs(&g, &p, &d).unwrap()
    }

    #[test]
    fn calm_profile_gives_single_vacuum_slab() {
        let g = LinkGeometry::reference(0.0, 0.15).unwrap();
        let p = AtmosphereProfile::reference().unwrap().scaled(0.0).unwrap();
        let d = greenwood_and_coherence(&g, &p).unwrap();
        let plan = plan_slabs(&g, &p, &d).unwrap();
        assert_eq!(plan.slabs().len(), 1);
        assert_eq!(plan.screen_count(), 0);
        assert_eq!(plan.slabs()[0].kind, SlabKind::Vacuum);
    }

    #[test]
    fn slab_conditions_hold_across_zenith_angles() {
        for theta in [0.0, 30.0, 60.0] {
            let plan = plan_for(theta);
            let whole = plan.whole_channel_scintillation();
            assert!(plan.screen_count() >= 10, "theta {theta}: {}", plan.screen_count());
            for (_, s) in plan.turbulent() {
                let si = s.scintillation_index();
                assert!(si < 0.1 && si < 0.1 * whole, "theta {theta}: {si} vs {whole}");
            }
            let b = plan.boundaries();
            assert!(b.windows(2).all(|w| w[0] < w[1]));
            for w in plan.slabs().windows(2) {
                assert_eq!(w[0].upper, w[1].lower);
            }
            let g = LinkGeometry::reference(theta, 0.15).unwrap();
            assert_relative_eq!(plan.total_path_length(), g.path_length(), max_relative = 1e-12);
        }
    }

    #[test]
    fn reference_plan_boundaries() {
        // boundaries from an independent root-finding oracle
        let plan = plan_for(60.0);
        assert_eq!(plan.screen_count(), 12);
        assert_relative_eq!(plan.turbulence_top(), 16_037.353_124_6, max_relative = 1e-7);
        let b = plan.boundaries();
        assert!((b[1] - 66.062_891_558_9).abs() < 2e-3, "{}", b[1]);
        // upper boundaries are ill-conditioned where Cn2 is small
        assert_relative_eq!(b[8], 7_213.884_543_8, max_relative = 1e-4);
    }

    #[test]
    fn psd_examples() {
        assert_relative_eq!(mvk_psd(0.0, 0.1, 5.0, 0.01), 390.197_532_385_517_8, max_relative = 1e-12);
        assert_relative_eq!(mvk_psd(1.0, 0.1, 5.0, 0.01), 0.993_385_445_449_356_8, max_relative = 1e-12);
        assert!(mvk_psd(1e4, 0.1, 5.0, 0.01) < 1e-300);
    }

    #[test]
    fn calm_slab_gives_zero_screen() {
        let spec = ScreenSpec {
            slab_index: 0,
            fried_parameter: Turbulence::Calm,
            outer_scale: 5.0,
            inner_scale: 0.01,
        };
        let s = generate_screen(&spec, 32, 0.01, 1, StreamId::screen(0, 0)).unwrap();
        assert!(s.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn screen_is_deterministic_per_stream() {
        let spec = ScreenSpec {
            slab_index: 2,
            fried_parameter: Turbulence::Active(0.1),
            outer_scale: 5.0,
            inner_scale: 0.01,
        };
        let a = generate_screen(&spec, 64, 0.02, 9, StreamId::screen(4, 2)).unwrap();
        let b = generate_screen(&spec, 64, 0.02, 9, StreamId::screen(4, 2)).unwrap();
        let c = generate_screen(&spec, 64, 0.02, 9, StreamId::screen(5, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn rejects_bad_grids() {
        let spec = ScreenSpec {
            slab_index: 0,
            fried_parameter: Turbulence::Active(0.1),
            outer_scale: 5.0,
            inner_scale: 0.01,
        };
        assert!(generate_screen(&spec, 48, 0.01, 0, StreamId::screen(0, 0)).is_err());
        assert!(generate_screen(&spec, 64, 0.0, 0, StreamId::screen(0, 0)).is_err());
    }

    #[test]
    fn warning_when_window_below_half_outer_scale() {
        assert!(sampling_warning(64, 0.01, 5.0).is_some());
        assert!(sampling_warning(512, 0.01, 5.0).is_none());
    }

    #[test]
    fn structure_function_of_zero_screens() {
        let spec = ScreenSpec {
            slab_index: 0,
            fried_parameter: Turbulence::Calm,
            outer_scale: 5.0,
            inner_scale: 0.01,
        };
        let screens: Vec<_> = (0..50)
            .map(|i| generate_screen(&spec, 16, 0.01, 0, StreamId::screen(i, 0)).unwrap())
            .collect();
        let d = screen_structure_function(&screens, &[0.0, 0.01, 0.05]).unwrap();
        assert_eq!(d, vec![0.0; 3]);
        assert!(screen_structure_function(&screens, &[0.2]).is_err());
        assert!(screen_structure_function(&screens[..10], &[0.01]).is_err());
    }

    #[test]
    fn screen_file_round_trip() {
        let spec = ScreenSpec {
            slab_index: 1,
            fried_parameter: Turbulence::Active(0.2),
            outer_scale: 5.0,
            inner_scale: 0.01,
        };
        let s = generate_screen(&spec, 16, 0.05, 3, StreamId::screen(0, 1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("screen.bin");
        write_screen(&path, &s).unwrap();
        let (n, spacing, data) = read_screen_samples(&path).unwrap();
        assert_eq!((n, spacing), (16, 0.05));
        assert_eq!(data, s.data());
    }
}
