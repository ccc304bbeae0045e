//! Periodic grid on [−L, L)^dim and the discrete Fourier pair.
//!
//! Conventions: x_i = −L + i·h, ξ_k = k·δξ with k ∈ [−N/2, N/2), and
//!
//!   û(ξ_k) = h^d Σ_i u(x_i) e^{−iξ_k·x_i},   u(x_i) = (2L)^{−d} Σ_k û(ξ_k) e^{iξ_k·x_i},
//!
//! so Σ|u|² h^d = (2π)^{−d} Σ|û|² δξ^d exactly.

use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!("half_width must be positive, got {half_width}")));
        }
        if points < 2 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("points must be a power of two ≥ 2, got {points}")));
        }
        points
            .checked_pow(dim as u32)
            .filter(|&c| c <= (1usize << 31))
            .ok_or_else(|| Error::InvalidGrid(format!("{points}^{dim} cells is too large")))?;
        Ok(Self { dim, half_width, points })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn dxi(&self) -> f64 {
        PI / self.half_width
    }

    pub fn xi_max(&self) -> f64 {
        PI / self.h()
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell volume h^dim.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Fourier cell volume δξ^dim.
    pub fn dual_volume(&self) -> f64 {
        self.dxi().powi(self.dim as i32)
    }

    /// Per-axis indices of a flat (row-major) index.
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.points;
        let mut out = [0usize; 3];
        let mut rest = idx;
        for a in (0..self.dim).rev() {
            out[a] = rest % n;
            rest /= n;
        }
        out
    }

    pub fn ravel(&self, ix: &[usize]) -> usize {
        ix[..self.dim].iter().fold(0, |acc, &i| acc * self.points + i)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h()
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let ix = self.unravel(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.coord(ix[a]);
        }
        x
    }

    /// Signed frequency index of FFT slot m.
    pub fn freq_index(&self, m: usize) -> i64 {
        let n = self.points as i64;
        let m = m as i64;
        if m < n / 2 {
            m
        } else {
            m - n
        }
    }

    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let ix = self.unravel(idx);
        let mut k = [0.0; 3];
        for a in 0..self.dim {
            k[a] = self.freq_index(ix[a]) as f64 * self.dxi();
        }
        k
    }

    /// |x| for every cell, flat order.
    pub fn radii(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let x = self.position(i);
                (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
            })
            .collect()
    }

    /// |ξ| for every Fourier slot, flat FFT order.
    pub fn xi_norms(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let k = self.wavevector(i);
                (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt()
            })
            .collect()
    }

    /// Index of the cell at x = 0.
    pub fn origin_index(&self) -> usize {
        self.ravel(&[self.points / 2; 3])
    }

    /// Largest |ξ| present on the lattice.
    pub fn xi_corner(&self) -> f64 {
        self.xi_max() * (self.dim as f64).sqrt()
    }

    fn parity(&self, idx: usize) -> f64 {
        let ix = self.unravel(idx);
        let s: usize = ix[..self.dim].iter().sum();
        if s % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Physical,
    Fourier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<C64>,
    space: Space,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<C64>, space: Space) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Domain("field contains non-finite values".into()));
        }
        Ok(Self { grid, values, space })
    }

    pub(crate) fn from_parts(grid: GridSpec, values: Vec<C64>, space: Space) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values, space }
    }

    pub fn zeros(grid: GridSpec, space: Space) -> Self {
        Self::from_parts(grid, vec![C64::new(0.0, 0.0); grid.len()], space)
    }

    /// Samples `f(x)` at every cell.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> C64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                f(&x[..grid.dim])
            })
            .collect();
        Self::from_parts(grid, values, Space::Physical)
    }

    pub fn from_real_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    /// Samples `f(ξ)` at every Fourier slot.
    pub fn from_fourier_fn(grid: GridSpec, f: impl Fn(&[f64]) -> C64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let k = grid.wavevector(i);
                f(&k[..grid.dim])
            })
            .collect();
        Self::from_parts(grid, values, Space::Fourier)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn expect_space(&self, space: Space) -> Result<()> {
        if self.space == space {
            Ok(())
        } else {
            Err(Error::SpaceTag { expected: space, found: self.space })
        }
    }

    pub fn check_compatible(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.space != other.space {
            return Err(Error::SpaceTag { expected: self.space, found: other.space });
        }
        Ok(())
    }

    /// Quadrature weight of one sample in the field's current space.
    pub fn weight(&self) -> f64 {
        match self.space {
            Space::Physical => self.grid.cell_volume(),
            Space::Fourier => self.grid.dual_volume() / (2.0 * PI).powi(self.grid.dim as i32),
        }
    }

    /// L² norm; in Fourier space includes the (2π)^{−d} Plancherel factor.
    pub fn norm(&self) -> f64 {
        (self.weight() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// ⟨self, other⟩ = ∫ self · conj(other).
    pub fn inner(&self, other: &Field) -> Result<C64> {
        self.check_compatible(other)?;
        let s: C64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.weight())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: C64) -> Field {
        self.map(|v| v * c)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Field {
        Field::from_parts(self.grid, self.values.iter().map(|&v| f(v)).collect(), self.space)
    }

    pub fn conj(&self) -> Field {
        self.map(|v| v.conj())
    }

    pub fn abs(&self) -> Field {
        self.map(|v| C64::new(v.norm(), 0.0))
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(C64, C64) -> C64) -> Result<Field> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field::from_parts(self.grid, values, self.space))
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Pointwise product with a real array in flat order.
    pub fn mul_real(&self, w: &[f64]) -> Field {
        assert_eq!(w.len(), self.values.len());
        Field::from_parts(
            self.grid,
            self.values.iter().zip(w).map(|(&v, &a)| v * a).collect(),
            self.space,
        )
    }

    /// ‖self − other‖ / ‖other‖, or the absolute distance when `other` vanishes.
    pub fn rel_distance(&self, other: &Field) -> Result<f64> {
        let d = self.sub(other)?.norm();
        let n = other.norm();
        Ok(if n > 0.0 { d / n } else { d })
    }

    pub fn to_fourier(&self) -> Result<Field> {
        self.expect_space(Space::Physical)?;
        Ok(forward(self))
    }

    pub fn to_physical(&self) -> Result<Field> {
        self.expect_space(Space::Fourier)?;
        Ok(inverse(self))
    }

    /// Fraction of L² mass in the outermost cell layer on any axis.
    pub fn edge_mass_fraction(&self) -> f64 {
        let g = &self.grid;
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let n = g.points;
        let edge: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| g.unravel(*i)[..g.dim].iter().any(|&a| a == 0 || a == n - 1))
            .map(|(_, v)| v.norm_sqr())
            .sum();
        edge / total
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_axes(grid: &GridSpec, data: &mut [C64], direction: FftDirection) {
    let n = grid.points;
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction));
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // Last axis is contiguous.
    fft.process_with_scratch(data, &mut scratch);
    if grid.dim == 1 {
        return;
    }
    let mut line = vec![C64::new(0.0, 0.0); n];
    for axis in 0..grid.dim - 1 {
        let stride = n.pow((grid.dim - 1 - axis) as u32);
        let block = stride * n;
        for base in (0..data.len()).step_by(block) {
            for off in 0..stride {
                for (i, l) in line.iter_mut().enumerate() {
                    *l = data[base + off + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i, l) in line.iter().enumerate() {
                    data[base + off + i * stride] = *l;
                }
            }
        }
    }
}

/// Physical → Fourier without tag checks.
pub(crate) fn forward(u: &Field) -> Field {
    let g = u.grid;
    let mut data = u.values.clone();
    fft_axes(&g, &mut data, FftDirection::Forward);
    let w = g.cell_volume();
    for (i, v) in data.iter_mut().enumerate() {
        *v *= w * g.parity(i);
    }
    Field::from_parts(g, data, Space::Fourier)
}

/// Fourier → physical without tag checks.
pub(crate) fn inverse(u: &Field) -> Field {
    let g = u.grid;
    let mut data = u.values.clone();
    let w = (2.0 * g.half_width).powi(g.dim as i32).recip();
    for (i, v) in data.iter_mut().enumerate() {
        *v *= g.parity(i);
    }
    fft_axes(&g, &mut data, FftDirection::Inverse);
    for v in data.iter_mut() {
        *v *= w;
    }
    Field::from_parts(g, data, Space::Physical)
}

/// Forward transform of a physical field.
pub fn forward_transform(u: &Field) -> Result<Field> {
    u.to_fourier()
}

/// Inverse transform of a Fourier field.
pub fn inverse_transform(u: &Field) -> Result<Field> {
    u.to_physical()
}
