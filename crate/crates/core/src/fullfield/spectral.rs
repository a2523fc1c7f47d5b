//! Discrete projector onto zero-mean gradient fields.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// `G[τ](k) = k (k · τ̂(k)) / |k|²`, zero at `k = 0`.
///
/// On an even grid the Nyquist modes that are not their own conjugate
/// partner are dropped (`G = 0`): their partner sits on the same aliased
/// index with the opposite sign of the transverse component, so no real
/// symmetric tensor can act on both consistently. Self-conjugate modes keep
/// the continuous value. With this choice `G` is an orthogonal projector
/// mapping real fields to real fields.
pub(crate) struct Projector {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    gxx: Vec<f64>,
    gxy: Vec<f64>,
    gyy: Vec<f64>,
    spectrum: Vec<Complex64>,
    image: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

fn signed_frequency(m: usize, n: usize) -> f64 {
    if 2 * m < n {
        m as f64
    } else {
        m as f64 - n as f64
    }
}

impl Projector {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        let mut gxx = vec![0.0; n * n];
        let mut gxy = vec![0.0; n * n];
        let mut gyy = vec![0.0; n * n];
        let nyquist = |m: usize| n.is_multiple_of(2) && 2 * m == n;
        let self_conjugate = |m: usize| m == 0 || nyquist(m);
        for a in 0..n {
            for b in 0..n {
                if a == 0 && b == 0 {
                    continue;
                }
                if (nyquist(a) || nyquist(b)) && !(self_conjugate(a) && self_conjugate(b)) {
                    continue;
                }
                let (kx, ky) = (signed_frequency(a, n), signed_frequency(b, n));
                let k2 = kx * kx + ky * ky;
                let idx = a * n + b;
                gxx[idx] = kx * kx / k2;
                gxy[idx] = kx * ky / k2;
                gyy[idx] = ky * ky / k2;
            }
        }
        Projector {
            n,
            fwd,
            inv,
            gxx,
            gxy,
            gyy,
            spectrum: vec![Complex64::default(); n * n],
            image: vec![Complex64::default(); n * n],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    /// `out = G[τ]` for the vector field with components `tx`, `ty`.
    pub fn apply(&mut self, tx: &[f64], ty: &[f64], out_x: &mut [f64], out_y: &mut [f64]) {
        let n = self.n;
        for (c, (&x, &y)) in self.image.iter_mut().zip(tx.iter().zip(ty)) {
            *c = Complex64::new(x, y);
        }
        // Real-space layout is [j * n + i] (i along x); after the two passes
        // the spectrum is stored as [kx * n + ky].
        self.fwd.process_with_scratch(&mut self.image, &mut self.scratch);
        transpose(&mut self.image, n);
        self.fwd.process_with_scratch(&mut self.image, &mut self.scratch);

        for a in 0..n {
            let ma = (n - a) % n;
            for b in 0..n {
                let idx = a * n + b;
                let (gxx, gxy, gyy) = (self.gxx[idx], self.gxy[idx], self.gyy[idx]);
                if gxx == 0.0 && gxy == 0.0 && gyy == 0.0 {
                    self.spectrum[idx] = Complex64::default();
                    continue;
                }
                let c = self.image[idx];
                let partner = self.image[ma * n + (n - b) % n].conj();
                let t1 = 0.5 * (c + partner);
                let t2 = Complex64::new(0.0, -0.5) * (c - partner);
                let y1 = t1 * gxx + t2 * gxy;
                let y2 = t1 * gxy + t2 * gyy;
                self.spectrum[idx] = y1 + Complex64::new(0.0, 1.0) * y2;
            }
        }

        self.inv.process_with_scratch(&mut self.spectrum, &mut self.scratch);
        transpose(&mut self.spectrum, n);
        self.inv.process_with_scratch(&mut self.spectrum, &mut self.scratch);
        let scale = 1.0 / (n * n) as f64;
        for ((c, x), y) in self.spectrum.iter().zip(out_x.iter_mut()).zip(out_y.iter_mut()) {
            *x = c.re * scale;
            *y = c.im * scale;
        }
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for a in 0..n {
        for b in (a + 1)..n {
            data.swap(a * n + b, b * n + a);
        }
    }
}
