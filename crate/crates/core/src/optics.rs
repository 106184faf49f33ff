//! Scalar paraxial propagation of the downlink beam and aperture collection.
//!
//! Fields are sampled on square `N x N` grids with coordinates
//! `x_i = (i - N/2) delta`. The global phase `exp(ikz)` is dropped
//! everywhere; only intensities and relative phases are meaningful.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::atmosphere::{AtmosphereProfile, LinkGeometry};
use crate::fft::{signed_index, Fft2};
use crate::rng::StreamId;
use crate::screens::{sidecar_path, PhaseScreen, ScreenGenerator, ScreenSpec, Slab, SlabPlan};
use crate::{Error, Result};

/// Source window as a multiple of the beam waist.
pub const SOURCE_WINDOW_FACTOR: f64 = 8.0;
/// Receiver window lower bounds: multiples of `w(L)` and of the largest aperture.
pub const RECEIVER_BEAM_FACTOR: f64 = 8.0;
pub const RECEIVER_APERTURE_FACTOR: f64 = 4.0;
/// Maximum fraction of power allowed in the outer two cells of the grid.
pub const EDGE_POWER_LIMIT: f64 = 1e-4;
const EDGE_CELLS: usize = 2;
/// Absorbing band width, as a fraction of the window on each side.
pub const ABSORBER_FRACTION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    data: Vec<Complex64>,
    n: usize,
    spacing: f64,
    wavelength: f64,
}

impl ComplexField {
    pub fn zeros(n: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::Config(format!("grid size {n} must be even and >= 4")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) || !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::Config(format!(
                "grid spacing {spacing} and wavelength {wavelength} must be positive"
            )));
        }
        Ok(Self {
            data: vec![Complex64::default(); n * n],
            n,
            spacing,
            wavelength,
        })
    }

    pub fn from_fn<F: Fn(f64, f64) -> Complex64>(n: usize, spacing: f64, wavelength: f64, f: F) -> Result<Self> {
        let mut field = Self::zeros(n, spacing, wavelength)?;
        for row in 0..n {
            let y = field.coord(row);
            for col in 0..n {
                field.data[row * n + col] = f(field.coord(col), y);
            }
        }
        Ok(field)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    pub fn window(&self) -> f64 {
        self.n as f64 * self.spacing
    }
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.spacing
    }

    /// `Sum |psi|^2 delta^2`.
    pub fn power(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.spacing * self.spacing
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Second-moment beam radius `w = 2 sqrt(<x^2>)`, matching the `1/e^2`
    /// radius of a Gaussian.
    pub fn second_moment_radius(&self) -> f64 {
        let (mut p, mut m2) = (0.0, 0.0);
        for row in 0..self.n {
            let y = self.coord(row);
            for col in 0..self.n {
                let i = self.data[row * self.n + col].norm_sqr();
                let x = self.coord(col);
                p += i;
                m2 += i * 0.5 * (x * x + y * y);
            }
        }
        2.0 * (m2 / p).sqrt()
    }

    /// Fraction of power within `EDGE_CELLS` of any grid edge.
    pub fn edge_power_fraction(&self) -> f64 {
        let n = self.n;
        let mut edge = 0.0;
        let mut total = 0.0;
        for row in 0..n {
            for col in 0..n {
                let i = self.data[row * n + col].norm_sqr();
                total += i;
                let d = row.min(col).min(n - 1 - row).min(n - 1 - col);
                if d < EDGE_CELLS {
                    edge += i;
                }
            }
        }
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }
}

/// Unit-power collimated Gaussian at the satellite, sampled with
/// `delta = 8 w0 / N`.
pub fn gaussian_source(geom: &LinkGeometry, n: usize) -> Result<ComplexField> {
    let w0 = geom.beam_waist();
    let spacing = SOURCE_WINDOW_FACTOR * w0 / n as f64;
    if w0 / spacing < 8.0 {
        return Err(Error::Config(format!(
            "grid size {n} leaves only {:.1} samples per beam waist (need 8)",
            w0 / spacing
        )));
    }
    let amp = (2.0 / PI).sqrt() / w0;
    ComplexField::from_fn(n, spacing, geom.wavelength(), |x, y| {
        Complex64::new(amp * (-(x * x + y * y) / (w0 * w0)).exp(), 0.0)
    })
}

/// Receiver-plane window width for the largest aperture of interest.
pub fn receiver_window(geom: &LinkGeometry, max_aperture_radius: f64) -> f64 {
    (RECEIVER_BEAM_FACTOR * geom.beam_radius_at(geom.path_length()))
        .max(RECEIVER_APERTURE_FACTOR * max_aperture_radius)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    /// Band-limited angular spectrum; keeps the grid spacing.
    AngularSpectrum,
    /// Two successive Fresnel transforms; rescales the grid.
    TwoStepFresnel,
}

/// Grid Fresnel number `N delta^2 / (lambda dz)`.
pub fn grid_fresnel_number(field: &ComplexField, dz: f64) -> f64 {
    field.n as f64 * field.spacing * field.spacing / (field.wavelength * dz)
}

/// Angular spectrum when the grid Fresnel number exceeds one, two-step
/// Fresnel otherwise.
pub fn select_kernel(field: &ComplexField, dz: f64) -> Kernel {
    if dz == 0.0 || grid_fresnel_number(field, dz) > 1.0 {
        Kernel::AngularSpectrum
    } else {
        Kernel::TwoStepFresnel
    }
}

/// Propagates through `dz >= 0` meters of vacuum. The angular-spectrum
/// kernel keeps the input spacing; the two-step kernel lands on
/// `target_spacing`.
pub fn propagate_vacuum(field: &ComplexField, dz: f64, target_spacing: f64) -> Result<ComplexField> {
    if !(dz >= 0.0 && dz.is_finite()) {
        return Err(Error::Domain(format!("propagation distance {dz} must be finite and >= 0")));
    }
    let out = match select_kernel(field, dz) {
        Kernel::AngularSpectrum => angular_spectrum(field, dz),
        Kernel::TwoStepFresnel => two_step_fresnel(field, dz, target_spacing)?,
    };
    check_edges(&out, dz)?;
    Ok(out)
}

fn check_edges(field: &ComplexField, dz: f64) -> Result<()> {
    let frac = field.edge_power_fraction();
    if frac > EDGE_POWER_LIMIT {
        return Err(Error::Numerical(format!(
            "aliasing guard: {frac:.3e} of the power lies within {EDGE_CELLS} cells of the edge after \
             {dz:.4e} m (window {:.4} m, spacing {:.4e} m, limit {EDGE_POWER_LIMIT:e})",
            field.window(),
            field.spacing
        )));
    }
    Ok(())
}

fn angular_spectrum(field: &ComplexField, dz: f64) -> ComplexField {
    AngularSpectrum::new(field.n, field.spacing, field.wavelength, dz).propagate(field)
}

/// Transfer function of one angular-spectrum hop, reusable across fields on
/// the same grid.
#[derive(Clone, Debug)]
pub struct AngularSpectrum {
    n: usize,
    spacing: f64,
    wavelength: f64,
    dz: f64,
    /// Natural FFT order, including the `1/N^2` normalization.
    transfer: Vec<Complex64>,
}

impl AngularSpectrum {
    pub fn new(n: usize, spacing: f64, wavelength: f64, dz: f64) -> Self {
        let k = 2.0 * PI / wavelength;
        let df = 1.0 / (n as f64 * spacing);
        let lam2 = wavelength * wavelength;
        let norm = 1.0 / (n * n) as f64;
        let transfer = (0..n * n)
            .map(|i| {
                let fy = signed_index(i / n, n) as f64 * df;
                let fx = signed_index(i % n, n) as f64 * df;
                let s = lam2 * (fx * fx + fy * fy);
                if s >= 1.0 {
                    Complex64::default()
                } else {
                    // k dz (sqrt(1 - s) - 1), written to avoid cancellation
                    Complex64::from_polar(norm, -k * dz * s / (1.0 + (1.0 - s).sqrt()))
                }
            })
            .collect();
        Self {
            n,
            spacing,
            wavelength,
            dz,
            transfer,
        }
    }

    pub fn distance(&self) -> f64 {
        self.dz
    }

    fn matches(&self, field: &ComplexField) -> bool {
        field.n == self.n
            && (field.spacing / self.spacing - 1.0).abs() < 1e-12
            && field.wavelength == self.wavelength
    }

    fn propagate(&self, field: &ComplexField) -> ComplexField {
        let mut out = field.clone();
        self.propagate_in_place(&mut out);
        out
    }

    fn propagate_in_place(&self, field: &mut ComplexField) {
        debug_assert!(self.matches(field));
        let fft = Fft2::new(self.n);
        // unshift so the transform origin matches the grid origin
        crate::fft::swap_quadrants(&mut field.data, self.n);
        fft.forward(&mut field.data);
        for (c, h) in field.data.iter_mut().zip(&self.transfer) {
            *c *= h;
        }
        fft.inverse(&mut field.data);
        crate::fft::swap_quadrants(&mut field.data, self.n);
    }

    /// Propagates in place and applies the aliasing guard.
    pub fn apply(&self, field: &mut ComplexField) -> Result<()> {
        if !self.matches(field) {
            return Err(Error::Config(format!(
                "field grid ({} x {:e} m) does not match the propagator ({} x {:e} m)",
                field.n, field.spacing, self.n, self.spacing
            )));
        }
        self.propagate_in_place(field);
        check_edges(field, self.dz)
    }
}

fn two_step_fresnel(field: &ComplexField, dz: f64, target_spacing: f64) -> Result<ComplexField> {
    let d1 = field.spacing;
    let m = target_spacing / d1;
    if !(target_spacing > 0.0 && target_spacing.is_finite()) || (m - 1.0).abs() < 1e-9 {
        return Err(Error::Config(format!(
            "Fresnel-regime hop of {dz:e} m needs a rescaled output grid (input spacing {d1:e}, \
             requested {target_spacing:e})"
        )));
    }
    let n = field.n;
    let dz1 = dz / (1.0 - m);
    let mut out = field.clone();
    let d1a = fresnel_step(&mut out.data, n, d1, dz1, field.wavelength);
    let dz2 = dz - dz1;
    let d2 = fresnel_step(&mut out.data, n, d1a, dz2, field.wavelength);
    out.spacing = d2;
    Ok(out)
}

/// One Fresnel diffraction integral evaluated with a centered DFT. Returns
/// the output spacing `lambda |z| / (N delta_in)`. Power is conserved.
fn fresnel_step(data: &mut [Complex64], n: usize, d_in: f64, z: f64, wavelength: f64) -> f64 {
    let k = 2.0 * PI / wavelength;
    let d_out = wavelength * z.abs() / (n as f64 * d_in);
    let chirp = |d: f64| -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let x = (i as f64 - (n / 2) as f64) * d;
                Complex64::from_polar(1.0, k * x * x / (2.0 * z))
            })
            .collect()
    };
    let c_in = chirp(d_in);
    for (row, chunk) in data.chunks_mut(n).enumerate() {
        for (col, v) in chunk.iter_mut().enumerate() {
            *v *= c_in[row] * c_in[col];
        }
    }
    let fft = Fft2::new(n);
    if z > 0.0 {
        fft.forward_centered(data);
    } else {
        fft.inverse_centered(data);
    }
    let scale = Complex64::new(0.0, wavelength * z).inv() * (d_in * d_in);
    let c_out = chirp(d_out);
    for (row, chunk) in data.chunks_mut(n).enumerate() {
        let cr = c_out[row] * scale;
        for (col, v) in chunk.iter_mut().enumerate() {
            *v *= cr * c_out[col];
        }
    }
    d_out
}

/// Multiplies the field by `exp(i phi)`.
pub fn apply_screen(field: &ComplexField, screen: &PhaseScreen) -> Result<ComplexField> {
    let mut out = field.clone();
    apply_screen_in_place(&mut out, screen)?;
    Ok(out)
}

pub fn apply_screen_in_place(field: &mut ComplexField, screen: &PhaseScreen) -> Result<()> {
    if screen.n() != field.n || (screen.spacing() / field.spacing - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "screen grid {}x{} at {:e} m does not match field grid {}x{} at {:e} m",
            screen.n(),
            screen.n(),
            screen.spacing(),
            field.n,
            field.n,
            field.spacing
        )));
    }
    for (v, &phi) in field.data.iter_mut().zip(screen.data()) {
        *v *= Complex64::from_polar(1.0, phi);
    }
    Ok(())
}

/// Super-Gaussian taper over the outer `ABSORBER_FRACTION` of each side;
/// unity on `|x| <= (1/2 - ABSORBER_FRACTION) D`.
pub fn absorb_edges(field: &mut ComplexField) {
    let n = field.n;
    let half = 0.5 * field.window();
    let band = ABSORBER_FRACTION * field.window();
    let inner = half - band;
    let mask: Vec<f64> = (0..n)
        .map(|i| {
            let t = (field.coord(i).abs() - inner) / band;
            if t <= 0.0 {
                1.0
            } else {
                (-16.0 * t.powi(4)).exp()
            }
        })
        .collect();
    for (row, chunk) in field.data.chunks_mut(n).enumerate() {
        for (col, v) in chunk.iter_mut().enumerate() {
            *v *= mask[row] * mask[col];
        }
    }
}

/// Identifies the channel realization whose screens a split-step run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Realization {
    pub seed: u64,
    pub index: u64,
}

/// Path coordinate (distance from the satellite) of altitude `h`.
pub fn path_coordinate(geom: &LinkGeometry, h: f64) -> f64 {
    geom.path_length() - geom.slant(h - geom.ground_altitude())
}

/// Split-step propagation from the satellite to the ground through one
/// screen at the midpoint of every turbulent slab. Consecutive half-slab
/// vacuum hops are merged into a single hop; the absorbing boundary is
/// applied after every hop.
pub fn split_step(
    source: &ComplexField,
    plan: &SlabPlan,
    geom: &LinkGeometry,
    profile: &AtmosphereProfile,
    receiver_spacing: f64,
    realization: Realization,
) -> Result<ComplexField> {
    SplitStepModel::new(source, plan, geom, profile, receiver_spacing)?.run(realization)
}

/// Everything about a split-step run that does not depend on the random
/// draws: hop distances, transfer functions and screen spectra.
#[derive(Clone, Debug)]
pub struct SplitStepModel {
    /// The deterministic field arriving at the first screen (or the ground).
    incident: ComplexField,
    /// One screen followed by the hop to the next screen or the ground.
    stages: Vec<(ScreenGenerator, AngularSpectrum)>,
}

impl SplitStepModel {
    pub fn new(
        source: &ComplexField,
        plan: &SlabPlan,
        geom: &LinkGeometry,
        profile: &AtmosphereProfile,
        receiver_spacing: f64,
    ) -> Result<Self> {
        let total = geom.path_length();
        // downlink: highest slab first
        let screens: Vec<(usize, &Slab, f64)> = plan
            .turbulent()
            .rev()
            .map(|(i, s)| (i, s, path_coordinate(geom, s.midpoint())))
            .collect();
        let first_hop = screens.first().map_or(total, |s| s.2);
        let mut stages = Vec::with_capacity(screens.len());
        for (k, &(index, slab, z)) in screens.iter().enumerate() {
            let next = screens.get(k + 1).map_or(total, |s| s.2);
            let generator = ScreenGenerator::new(&ScreenSpec::for_slab(index, slab, profile), source.n, receiver_spacing)?;
            let hop = AngularSpectrum::new(source.n, receiver_spacing, source.wavelength, next - z);
            let probe = ComplexField::zeros(source.n, receiver_spacing, source.wavelength)?;
            if select_kernel(&probe, hop.distance()) != Kernel::AngularSpectrum {
                return Err(Error::Config(format!(
                    "inter-screen hop of {:.1} m is in the Fresnel regime for a {:.4e} m grid; \
                     refine the slab plan or enlarge the grid",
                    hop.distance(),
                    receiver_spacing
                )));
            }
            stages.push((generator, hop));
        }
        let mut incident = propagate_vacuum(source, first_hop, receiver_spacing)?;
        absorb_edges(&mut incident);
        Ok(Self { incident, stages })
    }

    pub fn screen_count(&self) -> usize {
        self.stages.len()
    }

    pub fn run(&self, realization: Realization) -> Result<ComplexField> {
        let mut field = self.incident.clone();
        for (generator, hop) in &self.stages {
            let index = generator.spec().slab_index;
            let screen = generator.generate(realization.seed, StreamId::screen(realization.index, index));
            apply_screen_in_place(&mut field, &screen)?;
            hop.apply(&mut field)?;
            absorb_edges(&mut field);
        }
        Ok(field)
    }
}

/// [`split_step`] with caller-supplied screens.
pub fn split_step_with<F>(
    source: &ComplexField,
    plan: &SlabPlan,
    geom: &LinkGeometry,
    receiver_spacing: f64,
    mut screen_for: F,
) -> Result<ComplexField>
where
    F: FnMut(usize, &Slab) -> Result<PhaseScreen>,
{
    let total = geom.path_length();
    let mut z = 0.0;
    let mut field = source.clone();
    for (index, slab) in plan.turbulent().rev() {
        let z_screen = path_coordinate(geom, slab.midpoint());
        field = propagate_vacuum(&field, z_screen - z, receiver_spacing)?;
        absorb_edges(&mut field);
        apply_screen_in_place(&mut field, &screen_for(index, slab)?)?;
        z = z_screen;
    }
    field = propagate_vacuum(&field, total - z, receiver_spacing)?;
    absorb_edges(&mut field);
    Ok(field)
}

/// Area of the intersection of the disk `x^2 + y^2 <= r^2` with the
/// rectangle `[x0, x1] x [y0, y1]`.
pub fn circle_rect_overlap(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    // signed sum over the corners of the quadrant function
    quadrant_area(r, x1, y1) - quadrant_area(r, x0, y1) - quadrant_area(r, x1, y0) + quadrant_area(r, x0, y0)
}

/// `area({x' <= x, y' <= y} cap disk)`, an antiderivative in both arguments.
fn quadrant_area(r: f64, x: f64, y: f64) -> f64 {
    // built from first-quadrant pieces by symmetry of the disk
    let (ax, ay) = (x.abs().min(r), y.abs().min(r));
    let (sx, sy) = (x.signum(), y.signum());
    let strip_x = positive_corner(r, ax, r);
    let strip_y = positive_corner(r, r, ay);
    PI * r * r / 4.0 + sx * strip_x + sy * strip_y + sx * sy * positive_corner(r, ax, ay)
}

/// Area of `{0 <= x' <= a, 0 <= y' <= b} cap disk` for `0 <= a, b <= r`.
fn positive_corner(r: f64, a: f64, b: f64) -> f64 {
    let p = |t: f64| {
        let t = t.clamp(-r, r);
        0.5 * (t * (r * r - t * t).max(0.0).sqrt() + r * r * (t / r).asin())
    };
    // for x' < xs the column height is capped at b
    let xs = (r * r - b * b).max(0.0).sqrt().min(a);
    b * xs + p(a) - p(xs)
}

/// Power fraction collected by a centered circular aperture of radius `ra`.
pub fn aperture_transmissivity(field: &ComplexField, ra: f64) -> Result<f64> {
    Ok(aperture_transmissivities(field, &[ra])?[0])
}

/// Collected fractions for several aperture radii on the same field.
pub fn aperture_transmissivities(field: &ComplexField, radii: &[f64]) -> Result<Vec<f64>> {
    let power = field.power();
    if !(power > 0.0) {
        return Err(Error::Numerical("field carries no power".into()));
    }
    radii
        .iter()
        .map(|&ra| {
            if !(ra >= 2.0 * field.spacing) || !ra.is_finite() {
                return Err(Error::Config(format!(
                    "aperture radius {ra} m is below two grid cells ({:e} m)",
                    2.0 * field.spacing
                )));
            }
            if ra > 0.5 * field.window() {
                return Err(Error::Config(format!(
                    "aperture radius {ra} m exceeds the {:.4} m receiver window",
                    field.window()
                )));
            }
            let eta = collected(field, ra) / power;
            if eta > 1.0 + 1e-9 {
                return Err(Error::Physicality(format!("collected fraction {eta} exceeds 1")));
            }
            Ok(eta.min(1.0))
        })
        .collect()
}

fn collected(field: &ComplexField, ra: f64) -> f64 {
    let n = field.n;
    let d = field.spacing;
    let h = 0.5 * d;
    let mut acc = 0.0;
    for row in 0..n {
        let y = field.coord(row);
        if y.abs() - h > ra {
            continue;
        }
        for col in 0..n {
            let x = field.coord(col);
            if x.abs() - h > ra {
                continue;
            }
            let (nx, ny) = (x.abs() - h, y.abs() - h);
            let (fx, fy) = (x.abs() + h, y.abs() + h);
            let area = if fx * fx + fy * fy <= ra * ra {
                d * d
            } else if nx.max(0.0).powi(2) + ny.max(0.0).powi(2) >= ra * ra {
                continue;
            } else {
                circle_rect_overlap(ra, x - h, x + h, y - h, y + h)
            };
            acc += field.data[row * n + col].norm_sqr() * area;
        }
    }
    acc
}

/// Writes `|psi|^2` as little-endian f64 samples plus a `.txt` sidecar.
pub fn write_intensity(path: &Path, field: &ComplexField, note: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in field.intensity() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    let mut side = BufWriter::new(File::create(sidecar_path(path))?);
    writeln!(side, "n={}", field.n)?;
    writeln!(side, "spacing={:e}", field.spacing)?;
    writeln!(side, "wavelength={:e}", field.wavelength)?;
    writeln!(side, "note={note}")?;
    side.flush()?;
    Ok(())
}
