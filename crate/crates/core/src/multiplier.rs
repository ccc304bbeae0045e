//! Fourier multipliers r(D)u = 𝓕⁻¹(r û) and the Littlewood–Paley partition.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec, Space, C64};

pub type SymbolFn = Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>;

#[derive(Clone)]
pub enum MultiplierSpec {
    /// |ξ|^s
    FracLaplacian { s: f64 },
    /// ⟨ξ⟩^τ
    Bessel { tau: f64 },
    /// e^{−it|ξ|^s}
    FreePhase { s: f64, t: f64 },
    /// (|ξ|^s − z)^{−1}
    Resolvent { s: f64, z: C64 },
    /// Φ(2^{−j}ξ), j ≥ 1
    LpBlock { j: u32 },
    /// Φ̃ = 1 − Σ_{j≥1} Φ(2^{−j}ξ)
    LpLow,
    Custom(SymbolFn),
}

impl fmt::Debug for MultiplierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FracLaplacian { s } => write!(f, "FracLaplacian {{ s: {s} }}"),
            Self::Bessel { tau } => write!(f, "Bessel {{ tau: {tau} }}"),
            Self::FreePhase { s, t } => write!(f, "FreePhase {{ s: {s}, t: {t} }}"),
            Self::Resolvent { s, z } => write!(f, "Resolvent {{ s: {s}, z: {z} }}"),
            Self::LpBlock { j } => write!(f, "LpBlock {{ j: {j} }}"),
            Self::LpLow => write!(f, "LpLow"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

fn norm(xi: &[f64]) -> f64 {
    xi.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl MultiplierSpec {
    pub fn symbol(&self, xi: &[f64]) -> C64 {
        let r = norm(xi);
        match self {
            Self::FracLaplacian { s } => C64::new(r.powf(*s), 0.0),
            Self::Bessel { tau } => C64::new((1.0 + r * r).powf(tau / 2.0), 0.0),
            Self::FreePhase { s, t } => C64::from_polar(1.0, -t * r.powf(*s)),
            Self::Resolvent { s, z } => (C64::new(r.powf(*s), 0.0) - z).inv(),
            Self::LpBlock { j } => C64::new(lp_phi(r / 2f64.powi(*j as i32)), 0.0),
            Self::LpLow => C64::new(lp_low(r), 0.0),
            Self::Custom(f) => f(xi),
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        match self {
            Self::FracLaplacian { s } | Self::FreePhase { s, .. } if !(*s > 0.0) => {
                Err(Error::InvalidParameter(format!("order s must be positive, got {s}")))
            }
            Self::Resolvent { s, .. } if !(*s > 0.0) => {
                Err(Error::InvalidParameter(format!("order s must be positive, got {s}")))
            }
            Self::Resolvent { s, z } if z.im == 0.0 => {
                let top = grid.xi_corner().powf(*s);
                if z.re >= 0.0 && z.re <= top {
                    Err(Error::SingularSymbol { lambda: z.re })
                } else {
                    Ok(())
                }
            }
            Self::LpBlock { j } if *j == 0 => {
                Err(Error::InvalidParameter("lp_block index must be ≥ 1; use LpLow for the low block".into()))
            }
            _ => Ok(()),
        }
    }

    /// Symbol on every Fourier slot, flat FFT order.
    pub fn sample(&self, grid: &GridSpec) -> Vec<C64> {
        (0..grid.len())
            .map(|i| {
                let k = grid.wavevector(i);
                self.symbol(&k[..grid.dim])
            })
            .collect()
    }
}

/// Multiplies a Fourier field by a sampled symbol in place.
pub(crate) fn apply_sampled(symbol: &[C64], u: &Field) -> Field {
    debug_assert_eq!(u.space(), Space::Fourier);
    let mut out = u.clone();
    for (v, m) in out.values_mut().iter_mut().zip(symbol) {
        *v *= m;
    }
    out
}

/// r(D)u; the result carries the same space tag as `u`.
pub fn apply_multiplier(m: &MultiplierSpec, u: &Field) -> Result<Field> {
    m.validate(u.grid())?;
    let symbol = m.sample(u.grid());
    apply_symbol(&symbol, u)
}

/// Applies a pre-sampled symbol; the result carries the same space tag as `u`.
pub fn apply_symbol(symbol: &[C64], u: &Field) -> Result<Field> {
    if symbol.len() != u.grid().len() {
        return Err(Error::GridMismatch);
    }
    match u.space() {
        Space::Fourier => Ok(apply_sampled(symbol, u)),
        Space::Physical => Ok(crate::grid::inverse(&apply_sampled(symbol, &crate::grid::forward(u)))),
    }
}

/// J_τ u = (I − Δ)^{τ/2} u.
pub fn bessel_potential(tau: f64, u: &Field) -> Result<Field> {
    if tau == 0.0 {
        return Ok(u.clone());
    }
    apply_multiplier(&MultiplierSpec::Bessel { tau }, u)
}

/// e^{−1/t} for t > 0, else 0.
fn bump_tail(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for t ≤ 0, 1 for t ≥ 1, and S(t) + S(1 − t) = 1.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = bump_tail(t);
    a / (a + bump_tail(1.0 - t))
}

const LP_IN: f64 = 6.0 / 7.0;
const LP_PLATEAU: f64 = 12.0 / 7.0;

/// Radial profile of Φ: supported in [6/7, 2], equal to 1 on [1, 12/7].
pub fn lp_phi(r: f64) -> f64 {
    if r <= LP_IN || r >= 2.0 {
        0.0
    } else if r < 1.0 {
        smooth_step((r - LP_IN) / (1.0 - LP_IN))
    } else if r <= LP_PLATEAU {
        1.0
    } else {
        1.0 - smooth_step((r - LP_PLATEAU) / (2.0 - LP_PLATEAU))
    }
}

/// Radial profile of the low block Σ_{j≤0} Φ(2^{−j}ξ).
pub fn lp_low(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else {
        lp_phi(r)
    }
}

/// Number of blocks j ≥ 1 needed so that low + Σ_{j≤J} covers every lattice frequency.
pub fn lp_block_count(grid: &GridSpec) -> u32 {
    let top = grid.xi_corner();
    let mut j = 0u32;
    while 2f64.powi(j as i32) * LP_PLATEAU < top {
        j += 1;
    }
    j
}

/// Δ_j u for j ≥ 1 and the low block Δ̃u for j = 0.
pub fn lp_block(j: u32, u: &Field) -> Result<Field> {
    if j == 0 {
        apply_multiplier(&MultiplierSpec::LpLow, u)
    } else {
        apply_multiplier(&MultiplierSpec::LpBlock { j }, u)
    }
}

/// 1-D kernel 𝓕⁻¹⟨ξ⟩^{−s} sampled on the grid, centered at x = 0.
pub fn bessel_kernel(grid: &GridSpec, s: f64) -> Field {
    let sym = Field::from_fourier_fn(*grid, |xi| C64::new((1.0 + xi.iter().map(|a| a * a).sum::<f64>()).powf(-s / 2.0), 0.0));
    crate::grid::inverse(&sym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: GridSpec, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..grid.len()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        Field::new(grid, v, Space::Physical).unwrap()
    }

    fn plane_wave(g: GridSpec, k: f64) -> Field {
        Field::from_fn(g, |x| C64::from_polar(1.0, k * x[0]))
    }

    #[test]
    fn plane_wave_eigenfunctions() {
        let g = GridSpec::new(1, 8.0, 64).unwrap();
        let k = 5.0 * g.dxi();
        for (s, expect) in [(2.0, k * k), (1.0, k)] {
            let u = plane_wave(g, k);
            let out = apply_multiplier(&MultiplierSpec::FracLaplacian { s }, &u).unwrap();
            let want = u.scale(C64::new(expect, 0.0));
            assert!(out.rel_distance(&want).unwrap() < 1e-12);
        }
        let u = plane_wave(g, -k);
        let out = apply_multiplier(&MultiplierSpec::FracLaplacian { s: 1.0 }, &u).unwrap();
        assert!(out.rel_distance(&u.scale(C64::new(k, 0.0))).unwrap() < 1e-12);
    }

    #[test]
    fn laplacian_matches_finite_difference() {
        let g = GridSpec::new(1, 16.0, 1024).unwrap();
        let radius = 8.0;
        let bump = |x: f64| {
            let r = x.abs() / radius;
            if r < 1.0 {
                (1.0 - 1.0 / (1.0 - r * r)).exp()
            } else {
                0.0
            }
        };
        let u = Field::from_real_fn(g, |x| bump(x[0]));
        let spectral = apply_multiplier(&MultiplierSpec::FracLaplacian { s: 2.0 }, &u).unwrap();
        let rel = spectral.rel_distance(&fourth_order_fd(&u)).unwrap();
        assert!(rel < 1e-4, "rel {rel}");
        // the three-point stencil converges at second order towards the same answer
        let coarse = GridSpec::new(1, 16.0, 512).unwrap();
        let uc = Field::from_real_fn(coarse, |x| bump(x[0]));
        let ec = apply_multiplier(&MultiplierSpec::FracLaplacian { s: 2.0 }, &uc)
            .unwrap()
            .rel_distance(&three_point_fd(&uc))
            .unwrap();
        let ef = spectral.rel_distance(&three_point_fd(&u)).unwrap();
        let order = (ec / ef).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    fn three_point_fd(u: &Field) -> Field {
        let g = *u.grid();
        let (h, n, v) = (g.h(), g.points, u.values());
        let out = (0..n).map(|i| -(v[(i + 1) % n] - 2.0 * v[i] + v[(i + n - 1) % n]) / (h * h)).collect();
        Field::new(g, out, Space::Physical).unwrap()
    }

    fn fourth_order_fd(u: &Field) -> Field {
        let g = *u.grid();
        let (h, n, v) = (g.h(), g.points, u.values());
        let at = |i: usize, d: isize| v[((i as isize + d).rem_euclid(n as isize)) as usize];
        let out = (0..n)
            .map(|i| {
                -(-at(i, 2) + 16.0 * at(i, 1) - 30.0 * at(i, 0) + 16.0 * at(i, -1) - at(i, -2)) / (12.0 * h * h)
            })
            .collect();
        Field::new(g, out, Space::Physical).unwrap()
    }

    #[test]
    fn bessel_inverse_pair() {
        let g = GridSpec::new(2, 4.0, 32).unwrap();
        let u = random_field(g, 3);
        assert_eq!(bessel_potential(0.0, &u).unwrap(), u);
        let back = bessel_potential(-1.5, &bessel_potential(1.5, &u).unwrap()).unwrap();
        assert!(back.rel_distance(&u).unwrap() < 1e-12);
    }

    #[test]
    fn bessel_kernel_exponential_decay() {
        // The Nyquist cut leaves a ~1e-7 floor in the lattice kernel, so L/2 stays where G_1 is well above it.
        let g = GridSpec::new(1, 16.0, 4096).unwrap();
        let k = bessel_kernel(&g, 1.0);
        let mut prev: Option<(f64, f64)> = None;
        let mut checked = 0;
        for i in 0..g.points {
            let x = g.coord(i);
            if !(x > 1.0 && x < g.half_width / 2.0) {
                continue;
            }
            let v = k.values()[i].re;
            assert!(v >= 0.0, "negative kernel at {x}");
            if let Some((xp, vp)) = prev {
                let slope = (v.ln() - vp.ln()) / (x - xp);
                assert!(slope <= -0.5, "slope {slope} at {x}");
                checked += 1;
            }
            prev = Some((x, v));
        }
        assert!(checked > 500);
    }

    #[test]
    fn composition_is_product_symbol() {
        let g = GridSpec::new(1, 8.0, 128).unwrap();
        let u = random_field(g, 5);
        let a = MultiplierSpec::FracLaplacian { s: 0.7 };
        let b = MultiplierSpec::Resolvent { s: 0.7, z: C64::new(1.0, 0.3) };
        let ab = apply_multiplier(&a, &apply_multiplier(&b, &u).unwrap()).unwrap();
        let ba = apply_multiplier(&b, &apply_multiplier(&a, &u).unwrap()).unwrap();
        let (ac, bc) = (a.clone(), b.clone());
        let prod = MultiplierSpec::Custom(Arc::new(move |xi| ac.symbol(xi) * bc.symbol(xi)));
        let direct = apply_multiplier(&prod, &u).unwrap();
        assert!(ab.rel_distance(&direct).unwrap() < 1e-12);
        assert!(ab.rel_distance(&ba).unwrap() < 1e-12);
    }

    #[test]
    fn multiplier_keeps_space_tag() {
        let g = GridSpec::new(1, 8.0, 64).unwrap();
        let u = random_field(g, 1);
        let uh = u.to_fourier().unwrap();
        let m = MultiplierSpec::Bessel { tau: 1.0 };
        let a = apply_multiplier(&m, &u).unwrap();
        let b = apply_multiplier(&m, &uh).unwrap();
        assert_eq!(a.space(), Space::Physical);
        assert_eq!(b.space(), Space::Fourier);
        assert!(b.to_physical().unwrap().rel_distance(&a).unwrap() < 1e-12);
    }

    #[test]
    fn singular_resolvent_rejected() {
        let g = GridSpec::new(1, 8.0, 64).unwrap();
        let u = random_field(g, 1);
        let m = MultiplierSpec::Resolvent { s: 2.0, z: C64::new(1.0, 0.0) };
        assert!(matches!(apply_multiplier(&m, &u), Err(Error::SingularSymbol { .. })));
        let m = MultiplierSpec::Resolvent { s: 2.0, z: C64::new(-1.0, 0.0) };
        assert!(apply_multiplier(&m, &u).is_ok());
    }

    #[test]
    fn real_even_stays_real_even() {
        let g = GridSpec::new(1, 8.0, 128).unwrap();
        let u = Field::from_real_fn(g, |x| (-x[0] * x[0]).exp() * (1.0 + x[0] * x[0]));
        for s in [0.3, 1.0, 2.5] {
            let out = apply_multiplier(&MultiplierSpec::FracLaplacian { s }, &u).unwrap();
            let n = g.points;
            let scale = out.max_abs();
            for i in 1..n {
                let v = out.values()[i];
                assert!(v.im.abs() < 1e-12 * scale);
                assert!((v - out.values()[n - i]).norm() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn smooth_step_is_symmetric() {
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            assert!((smooth_step(t) + smooth_step(1.0 - t) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn lp_phi_support_and_plateau() {
        assert_eq!(lp_phi(6.0 / 7.0), 0.0);
        assert_eq!(lp_phi(2.0), 0.0);
        assert_eq!(lp_phi(0.5), 0.0);
        assert_eq!(lp_phi(1.0), 1.0);
        assert_eq!(lp_phi(1.5), 1.0);
        assert_eq!(lp_phi(12.0 / 7.0), 1.0);
        assert!(lp_phi(0.9) > 0.0 && lp_phi(0.9) < 1.0);
    }

    #[test]
    fn lp_partition_on_lattice() {
        for dim in 1..=2 {
            let g = GridSpec::new(dim, 8.0, 64).unwrap();
            let jn = lp_block_count(&g);
            for i in 0..g.len() {
                let k = g.wavevector(i);
                let mut total = MultiplierSpec::LpLow.symbol(&k[..dim]).re;
                for j in 1..=jn {
                    total += MultiplierSpec::LpBlock { j }.symbol(&k[..dim]).re;
                }
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lp_reconstruction_random() {
        let g = GridSpec::new(1, 16.0, 256).unwrap();
        let u = random_field(g, 9);
        let mut acc = lp_block(0, &u).unwrap();
        for j in 1..=lp_block_count(&g) {
            acc = acc.add(&lp_block(j, &u).unwrap()).unwrap();
        }
        assert!(acc.rel_distance(&u).unwrap() < 1e-10);
    }

    #[test]
    fn lp_constant_field() {
        let g = GridSpec::new(1, 16.0, 256).unwrap();
        let u = Field::from_real_fn(g, |_| 1.0);
        assert!(lp_block(0, &u).unwrap().rel_distance(&u).unwrap() < 1e-14);
        for j in 1..=lp_block_count(&g) {
            assert!(lp_block(j, &u).unwrap().norm() < 1e-14);
        }
    }

    #[test]
    fn lp_plane_wave_blocks() {
        let g = GridSpec::new(1, 64.0, 1024).unwrap();
        for j0 in 0..4 {
            // nearest lattice frequency to 1.5·2^{j0}
            let k = (1.5 * 2f64.powi(j0) / g.dxi()).round() * g.dxi();
            let u = plane_wave(g, k);
            for j in 1..=lp_block_count(&g) {
                let n = lp_block(j, &u).unwrap().norm();
                if !(j as i32 == j0 || j as i32 == j0 + 1) {
                    assert!(n < 1e-12, "j0 {j0}, block {j} carries {n}");
                }
            }
        }
    }
}
