//! Square 2-D FFTs on row-major `N x N` buffers.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned forward/inverse transforms for one grid size.
///
/// Cloning is cheap; plans are shared process-wide and scratch space is
/// allocated per call, so a `Fft2` may be used from any thread.
#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

fn plan_cache() -> &'static Mutex<HashMap<usize, Fft2>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Fft2>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut cache = plan_cache().lock().unwrap_or_else(|e| e.into_inner());
        cache
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Fft2 {
                    n,
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                }
            })
            .clone()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform, `exp(-2 pi i jk / N)` kernel.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(&self.forward, data);
    }

    /// Unnormalized inverse transform, `exp(+2 pi i jk / N)` kernel.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(&self.inverse, data);
    }

    /// Forward transform for grids whose origin sits at index `N/2`.
    pub fn forward_centered(&self, data: &mut [Complex64]) {
        swap_quadrants(data, self.n);
        self.forward(data);
        swap_quadrants(data, self.n);
    }

    /// Inverse transform for grids whose origin sits at index `N/2`.
    pub fn inverse_centered(&self, data: &mut [Complex64]) {
        swap_quadrants(data, self.n);
        self.inverse(data);
        swap_quadrants(data, self.n);
    }

    fn run(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "buffer is not {n}x{n}");
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, n);
        plan.process_with_scratch(data, &mut scratch);
        transpose(data, n);
    }
}

/// In-place transpose of a square row-major matrix.
pub fn transpose<T>(data: &mut [T], n: usize) {
    const BLOCK: usize = 32;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (ib..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                let j0 = if ib == jb { i + 1 } else { jb };
                for j in j0..(jb + BLOCK).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Exchanges diagonally opposite quadrants; equals both `fftshift` and
/// `ifftshift` for even `n`.
pub fn swap_quadrants<T>(data: &mut [T], n: usize) {
    debug_assert!(n % 2 == 0);
    let h = n / 2;
    for i in 0..h {
        for j in 0..n {
            let jj = (j + h) % n;
            data.swap(i * n + j, (i + h) * n + jj);
        }
    }
}

/// Signed frequency index of FFT bin `k` on an `n`-point grid.
pub fn signed_index(k: usize, n: usize) -> isize {
    if k < n.div_ceil(2) {
        k as isize
    } else {
        k as isize - n as isize
    }
}
