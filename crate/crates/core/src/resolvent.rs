//! Free resolvent boundary values, limiting-absorption sweeps, the Stone jump, Fredholm solves
//! and the one-dimensional distorted Fourier transform.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agmon::{bstar_norm, b_norm, weighted_b_norm, weighted_bstar_norm, DyadicLayout, Weight};
use crate::error::{Error, Result};
use crate::grid::{forward, inverse, Field, GridSpec, Space, C64};
use crate::multiplier::apply_symbol;
use crate::stats::fit_loglog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySign {
    Plus,
    Minus,
}

impl BoundarySign {
    pub fn factor(&self) -> f64 {
        match self {
            BoundarySign::Plus => 1.0,
            BoundarySign::Minus => -1.0,
        }
    }
}

/// Left factor r(D) applied after the resolvent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventWeight {
    Identity,
    /// J_s = ⟨D⟩^s
    Bessel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventQuery {
    pub s: f64,
    pub lambda: f64,
    /// ε = 0 is allowed only off the spectrum
    pub eps: f64,
    pub sign: BoundarySign,
    pub weight: ResolventWeight,
}

impl ResolventQuery {
    pub fn new(s: f64, lambda: f64, eps: f64, sign: BoundarySign) -> Self {
        Self { s, lambda, eps, sign, weight: ResolventWeight::Identity }
    }

    pub fn with_weight(mut self, weight: ResolventWeight) -> Self {
        self.weight = weight;
        self
    }

    pub fn z(&self) -> C64 {
        C64::new(self.lambda, self.sign.factor() * self.eps)
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.s > 0.0) {
            return Err(Error::InvalidParameter(format!("order s must be positive, got {}", self.s)));
        }
        if !(self.eps >= 0.0) || self.lambda == 0.0 || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("need ε ≥ 0 and λ ≠ 0, got λ={}, ε={}", self.lambda, self.eps)));
        }
        if self.lambda > 0.0 {
            let radius = self.lambda.powf(1.0 / self.s);
            if radius >= grid.xi_max() {
                return Err(Error::ShellOutsideNyquist { radius, xi_max: grid.xi_max() });
            }
            if self.eps == 0.0 {
                return Err(Error::SingularSymbol { lambda: self.lambda });
            }
        }
        Ok(())
    }
}

/// r(ξ)(|ξ|^s − z)^{−1} on every Fourier slot.
pub fn resolvent_symbol(grid: &GridSpec, q: &ResolventQuery) -> Vec<C64> {
    let z = q.z();
    grid.xi_norms()
        .into_iter()
        .map(|r| {
            let m = (C64::new(r.powf(q.s), 0.0) - z).inv();
            match q.weight {
                ResolventWeight::Identity => m,
                ResolventWeight::Bessel => m * (1.0 + r * r).powf(q.s / 2.0),
            }
        })
        .collect()
}

/// r(D)R₀(λ ± iε)f; keeps the space tag of `f`.
pub fn free_resolvent_apply(q: &ResolventQuery, f: &Field) -> Result<Field> {
    q.validate(f.grid())?;
    apply_symbol(&resolvent_symbol(f.grid(), q), f)
}

/// Convolution kernel of R₀(z), centred at the middle index of every axis.
pub fn free_resolvent_kernel(grid: &GridSpec, s: f64, z: C64) -> Field {
    let sym: Vec<C64> = grid.xi_norms().into_iter().map(|r| (C64::new(r.powf(s), 0.0) - z).inv()).collect();
    inverse(&Field::from_parts(*grid, sym, Space::Fourier))
}

/// Lattice spacing of |ξ|^s at the shell radius: δξ·sρ^{s−1}.
pub fn shell_spacing(grid: &GridSpec, s: f64, lambda: f64) -> f64 {
    let rho = lambda.powf(1.0 / s);
    grid.dxi() * s * rho.powf(s - 1.0)
}

/// Smallest ε at which the lattice still resolves the resolvent near the shell.
pub fn eps_floor(grid: &GridSpec, s: f64, lambda: f64) -> f64 {
    if lambda > 0.0 {
        0.5 * shell_spacing(grid, s, lambda)
    } else {
        1e-6
    }
}

/// Continuous Fourier transform of the lattice field at an arbitrary frequency: h^d Σ u(x) e^{−iξ·x}.
pub fn dtft_at(u: &Field, xi: &[f64; 3]) -> C64 {
    let g = u.grid();
    let w = g.cell_volume();
    u.values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = g.position(i);
            let ph: f64 = (0..g.dim).map(|a| xi[a] * x[a]).sum();
            v * C64::from_polar(w, -ph)
        })
        .sum()
}

/// The fixed limiting-absorption battery: two Gaussians, a modulated Gaussian, an annular band,
/// a smoothed indicator and a seeded random band-limited field.
pub fn lap_battery(grid: &GridSpec) -> Vec<(&'static str, Field)> {
    let g = *grid;
    let r2 = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>();
    let mut out = vec![
        ("gaussian_1", Field::from_real_fn(g, |x| (-r2(x) / 2.0).exp())),
        ("gaussian_2", Field::from_real_fn(g, |x| (-r2(x) / 8.0).exp())),
        ("modulated", Field::from_real_fn(g, |x| (-r2(x) / 4.0).exp() * x[0].cos())),
    ];
    let band = Field::from_fourier_fn(g, |xi| C64::new((-(r2(xi).sqrt() - 1.0).powi(2) / (2.0 * 0.0625)).exp(), 0.0));
    out.push(("annular_band", inverse(&band)));
    out.push(("smoothed_indicator", Field::from_real_fn(g, |x| {
        let r = r2(x).sqrt();
        0.5 * ((4.0 * (r + 2.0)).tanh() - (4.0 * (r - 2.0)).tanh())
    })));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise: Vec<C64> = (0..g.len()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let mut spec = Field::from_parts(g, noise, Space::Fourier);
    for (i, v) in spec.values_mut().iter_mut().enumerate() {
        let k = g.wavevector(i);
        *v *= (-r2(&k[..g.dim]) / (2.0 * 2.25)).exp();
    }
    let rand = inverse(&spec).mul_real(&g.radii().iter().map(|r| (-r * r / 50.0).exp()).collect::<Vec<_>>());
    out.push(("random_band", rand));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LapCell {
    pub lambda: f64,
    pub eps: f64,
    pub battery: usize,
    /// ‖J_sR₀f‖_{B*}/‖f‖_B
    pub rho_b: f64,
    /// ‖R₀f‖₂/‖f‖₂
    pub rho_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LapSummary {
    pub lambda: f64,
    pub battery: usize,
    pub name: &'static str,
    pub eps_floor: f64,
    /// log₁₀ span of the usable ladder
    pub decades: f64,
    /// max/min of ρ_B over the last two usable decades
    pub rho_b_variation: f64,
    /// fitted log-log slope of ρ_{L²} against ε
    pub l2_slope: f64,
    /// 10^{−2·slope}
    pub l2_growth_per_two_decades: f64,
    pub bounded: bool,
}

#[derive(Debug, Clone)]
pub struct LapSweep {
    pub s: f64,
    pub cells: Vec<LapCell>,
    pub summaries: Vec<LapSummary>,
}

/// Geometric ε ladder from `top` down to the lattice floor, inclusive.
pub fn eps_ladder(grid: &GridSpec, s: f64, lambda: f64, top: f64, points: usize) -> Vec<f64> {
    let floor = eps_floor(grid, s, lambda);
    if top <= floor {
        return vec![floor];
    }
    crate::dynamics::geometric_ladder(top, floor, points.max(2))
}

/// ρ_B and ρ_{L²} on a (λ, ε, battery) product; every ladder stops at the lattice floor.
pub fn lap_sweep(grid: &GridSpec, s: f64, lambdas: &[f64], eps_top: f64, points: usize, battery: &[(&'static str, Field)]) -> Result<LapSweep> {
    for &l in lambdas {
        if l.abs() < 0.25 {
            return Err(Error::InvalidParameter(format!("λ = {l} is closer than 0.25 to the threshold")));
        }
        ResolventQuery::new(s, l, 1.0, BoundarySign::Plus).validate(grid)?;
    }
    let layout = DyadicLayout::new(*grid);
    let jobs: Vec<(f64, usize)> = lambdas.iter().flat_map(|&l| (0..battery.len()).map(move |b| (l, b))).collect();
    let results: Vec<(Vec<LapCell>, LapSummary)> = jobs
        .par_iter()
        .map(|&(lambda, bi)| {
            let (name, f) = &battery[bi];
            let fh = forward(f);
            let bf = b_norm(f, &layout)?;
            let nf = f.norm();
            let ladder = eps_ladder(grid, s, lambda, eps_top, points);
            let xi = grid.xi_norms();
            let mut cells = Vec::with_capacity(ladder.len());
            for &eps in &ladder {
                let z = C64::new(lambda, eps);
                let mut r = fh.clone();
                let mut jr = fh.clone();
                for ((a, b), &k) in r.values_mut().iter_mut().zip(jr.values_mut()).zip(&xi) {
                    let m = (C64::new(k.powf(s), 0.0) - z).inv();
                    *a *= m;
                    *b *= m * (1.0 + k * k).powf(s / 2.0);
                }
                let rho_l2 = inverse(&r).norm() / nf;
                let rho_b = bstar_norm(&inverse(&jr), &layout)? / bf;
                cells.push(LapCell { lambda, eps, battery: bi, rho_b, rho_l2 });
            }
            let summary = summarize(lambda, bi, name, &cells, eps_floor(grid, s, lambda));
            Ok((cells, summary))
        })
        .collect::<Result<_>>()?;
    let mut cells = vec![];
    let mut summaries = vec![];
    for (c, sm) in results {
        cells.extend(c);
        summaries.push(sm);
    }
    Ok(LapSweep { s, cells, summaries })
}

fn summarize(lambda: f64, battery: usize, name: &'static str, cells: &[LapCell], floor: f64) -> LapSummary {
    let eps: Vec<f64> = cells.iter().map(|c| c.eps).collect();
    let l2: Vec<f64> = cells.iter().map(|c| c.rho_l2).collect();
    let top = eps.iter().cloned().fold(f64::MIN, f64::max);
    let decades = (top / floor).log10();
    let last: Vec<f64> = cells.iter().filter(|c| c.eps <= 100.0 * floor * (1.0 + 1e-12)).map(|c| c.rho_b).collect();
    let hi = last.iter().cloned().fold(f64::MIN, f64::max);
    let lo = last.iter().cloned().fold(f64::MAX, f64::min);
    let rho_b_variation = hi / lo;
    let l2_slope = fit_loglog(&eps, &l2).map_or(f64::NAN, |f| f.slope);
    let growth = 10f64.powf(-2.0 * l2_slope);
    LapSummary {
        lambda,
        battery,
        name,
        eps_floor: floor,
        decades,
        rho_b_variation,
        l2_slope,
        l2_growth_per_two_decades: growth,
        bounded: rho_b_variation < 2.0 && growth > 10.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoneReport {
    pub eps: f64,
    /// ‖D_ε − 2πi𝓕⁻¹(η_ε(|ξ|^s−λ)f̂)‖/‖2πi𝓕⁻¹(η_ε f̂)‖
    pub algebraic_residual: f64,
    /// ⟨D_ε, g⟩/(2πi)
    pub pairing: C64,
    /// (2π)^{−1} Σ_± f̂ĝ*(±ρ)/(sρ^{s−1}); 1-D only
    pub shell_limit: Option<C64>,
}

/// Jump D_ε = R₀(λ+iε)f − R₀(λ−iε)f against its Poisson-kernel surrogate.
pub fn stone_jump_residual(s: f64, lambda: f64, eps: f64, f: &Field, g: &Field) -> Result<StoneReport> {
    if !(lambda > 0.0 && eps > 0.0) {
        return Err(Error::InvalidParameter(format!("Stone jump needs λ > 0 and ε > 0, got λ={lambda}, ε={eps}")));
    }
    f.expect_space(Space::Physical)?;
    f.check_compatible(g)?;
    let grid = *f.grid();
    let qp = ResolventQuery::new(s, lambda, eps, BoundarySign::Plus);
    let qm = ResolventQuery::new(s, lambda, eps, BoundarySign::Minus);
    qp.validate(&grid)?;
    // subtract the two resolvents before the inverse transform; after it, roundoff of size
    // 1e−16·‖R₀f‖ swamps a jump that is O(ε) smaller
    let jump: Vec<C64> = resolvent_symbol(&grid, &qp).into_iter().zip(resolvent_symbol(&grid, &qm)).map(|(a, b)| a - b).collect();
    let d = apply_symbol(&jump, f)?;
    let poisson: Vec<C64> = grid
        .xi_norms()
        .into_iter()
        .map(|r| {
            let t = r.powf(s) - lambda;
            C64::new(0.0, 2.0 * PI) * (eps / (PI * (t * t + eps * eps)))
        })
        .collect();
    let surrogate = apply_symbol(&poisson, f)?;
    let denom = surrogate.norm();
    let diff = d.sub(&surrogate)?.norm();
    let algebraic_residual = if denom > 0.0 { diff / denom } else { diff };
    let pairing = d.inner(g)? / C64::new(0.0, 2.0 * PI);
    let shell_limit = if grid.dim == 1 {
        let rho = lambda.powf(1.0 / s);
        let jac = s * rho.powf(s - 1.0);
        let sum: C64 = [rho, -rho]
            .iter()
            .map(|&k| dtft_at(f, &[k, 0.0, 0.0]) * dtft_at(g, &[k, 0.0, 0.0]).conj())
            .sum();
        Some(sum / (2.0 * PI * jac))
    } else {
        None
    };
    Ok(StoneReport { eps, algebraic_residual, pairing, shell_limit })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLapReport {
    pub exponent: f64,
    pub deltas: Vec<f64>,
    pub eps: Vec<f64>,
    /// ratios[δ index][ε index]; NaN when the denominator vanishes
    pub ratios: Vec<Vec<f64>>,
}

impl WeightedLapReport {
    /// max/min over the δ ladder of the finest-ε ratio.
    pub fn delta_growth(&self) -> f64 {
        let last: Vec<f64> = self.ratios.iter().filter_map(|r| r.last().copied()).filter(|v| v.is_finite()).collect();
        let hi = last.iter().cloned().fold(f64::MIN, f64::max);
        let lo = last.iter().cloned().fold(f64::MAX, f64::min);
        hi / lo
    }
}

/// ‖μ_δJ_sR₀(λ±iε)f‖_{B*}/‖μ_δf‖_B for f̂ = (|ξ|^s − λ)ĝ, μ_δ(t) = (1+t)^a(1+δt)^{−a}.
pub fn weighted_lap_check(
    s: f64,
    lambda: f64,
    eps: &[f64],
    deltas: &[f64],
    exponent: f64,
    g: &Field,
    sign: BoundarySign,
) -> Result<WeightedLapReport> {
    g.expect_space(Space::Physical)?;
    let grid = *g.grid();
    let layout = DyadicLayout::new(grid);
    let sym: Vec<C64> = grid.xi_norms().into_iter().map(|r| C64::new(r.powf(s) - lambda, 0.0)).collect();
    let f = apply_symbol(&sym, g)?;
    let fields: Vec<Field> = eps
        .iter()
        .map(|&e| {
            let q = ResolventQuery::new(s, lambda, e, sign).with_weight(ResolventWeight::Bessel);
            free_resolvent_apply(&q, &f)
        })
        .collect::<Result<_>>()?;
    let ratios = deltas
        .par_iter()
        .map(|&d| {
            let mu = Weight::Saturating { exponent, eps: d };
            let den = weighted_b_norm(&f, &mu, &layout)?;
            fields
                .iter()
                .map(|u| {
                    let num = weighted_bstar_norm(u, &mu, &layout)?;
                    Ok(if den > 0.0 { num / den } else { f64::NAN })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightedLapReport { exponent, deltas: deltas.to_vec(), eps: eps.to_vec(), ratios })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FredholmMethod {
    /// GMRES first, reduced dense system if it stalls
    Auto,
    Gmres,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FredholmOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    /// largest supp V handled by the dense route
    pub dense_limit: usize,
    pub method: FredholmMethod,
}

impl Default for FredholmOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 2000, restart: 80, dense_limit: 4096, method: FredholmMethod::Auto }
    }
}

#[derive(Debug, Clone)]
pub struct FredholmSolution {
    pub f: Field,
    /// ‖f + VR₀f − g‖/‖g‖
    pub residual: f64,
    pub iterations: usize,
    pub method: FredholmMethod,
}

/// Residual bound every returned solution satisfies.
pub const FREDHOLM_TOL: f64 = 1e-8;

struct FredholmMap<'a> {
    grid: GridSpec,
    sym: Vec<C64>,
    v: &'a [f64],
}

impl FredholmMap<'_> {
    fn apply(&self, f: &[C64]) -> Vec<C64> {
        let u = Field::from_parts(self.grid, f.to_vec(), Space::Physical);
        let mut fh = forward(&u);
        for (a, m) in fh.values_mut().iter_mut().zip(&self.sym) {
            *a *= m;
        }
        let r = inverse(&fh);
        f.iter().zip(r.values()).zip(self.v).map(|((a, b), &w)| a + b * w).collect()
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn vnorm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations. Returns (x, relative residual, iterations).
fn gmres(op: impl Fn(&[C64]) -> Vec<C64>, b: &[C64], tol: f64, restart: usize, max_iter: usize) -> (Vec<C64>, f64, usize) {
    let n = b.len();
    let bn = vnorm(b);
    let mut x = vec![C64::new(0.0, 0.0); n];
    if bn == 0.0 {
        return (x, 0.0, 0);
    }
    let mut iters = 0;
    loop {
        let ax = op(&x);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        let beta = vnorm(&r);
        if beta / bn <= tol || iters >= max_iter {
            return (x, beta / bn, iters);
        }
        let m = restart.min(max_iter - iters).max(1);
        let mut basis: Vec<Vec<C64>> = vec![r.iter().map(|a| a / beta).collect()];
        let mut hess = vec![vec![C64::new(0.0, 0.0); m]; m + 1];
        let mut cs = vec![C64::new(0.0, 0.0); m];
        let mut sn = vec![C64::new(0.0, 0.0); m];
        let mut gvec = vec![C64::new(0.0, 0.0); m + 1];
        gvec[0] = C64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            let mut w = op(&basis[k]);
            for (i, q) in basis.iter().enumerate() {
                let hij = dot(q, &w);
                hess[i][k] = hij;
                for (a, b) in w.iter_mut().zip(q) {
                    *a -= hij * b;
                }
            }
            let wn = vnorm(&w);
            hess[k + 1][k] = C64::new(wn, 0.0);
            for i in 0..k {
                let t = cs[i].conj() * hess[i][k] + sn[i].conj() * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let (a, bb) = (hess[k][k], hess[k + 1][k]);
            let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            cs[k] = a / den;
            sn[k] = bb / den;
            hess[k][k] = C64::new(den, 0.0);
            hess[k + 1][k] = C64::new(0.0, 0.0);
            gvec[k + 1] = -sn[k] * gvec[k];
            gvec[k] = cs[k].conj() * gvec[k];
            iters += 1;
            k_used = k + 1;
            if gvec[k + 1].norm() / bn <= tol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|a| a / wn).collect());
        }
        let mut y = vec![C64::new(0.0, 0.0); k_used];
        for i in (0..k_used).rev() {
            let mut acc = gvec[i];
            for j in i + 1..k_used {
                acc -= hess[i][j] * y[j];
            }
            y[i] = acc / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (a, q) in x.iter_mut().zip(&basis[j]) {
                *a += yj * q;
            }
        }
    }
}

/// The system restricted to S = supp V: (I + V_S G_SS)φ_S = −V_S(R₀g)_S, with f = g + φ.
/// Cells with |V| ≤ 1e−16‖V‖∞ are left out of S.
pub struct ReducedSystem {
    grid: GridSpec,
    support: Vec<usize>,
    v: Vec<f64>,
}

impl ReducedSystem {
    pub fn new(grid: &GridSpec, v: &[f64]) -> Self {
        let cut = 1e-16 * v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let support: Vec<usize> = (0..v.len()).filter(|&i| v[i].abs() > cut).collect();
        let vs = support.iter().map(|&i| v[i]).collect();
        Self { grid: *grid, support, v: vs }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Dense matrix I + V_S G_SS for R₀(z).
    pub fn matrix(&self, s: f64, z: C64) -> DMatrix<C64> {
        let kernel = free_resolvent_kernel(&self.grid, s, z);
        self.matrix_from_kernel(&kernel)
    }

    fn matrix_from_kernel(&self, kernel: &Field) -> DMatrix<C64> {
        let g = &self.grid;
        let n = g.points;
        let w = g.cell_volume();
        let k = kernel.values();
        let m = self.support.len();
        let idx: Vec<[usize; 3]> = self.support.iter().map(|&i| g.unravel(i)).collect();
        DMatrix::from_fn(m, m, |a, b| {
            let mut d = [0usize; 3];
            for ax in 0..g.dim {
                d[ax] = (idx[a][ax] + n + n / 2 - idx[b][ax]) % n;
            }
            let kij = k[g.ravel(&d[..g.dim])] * w * self.v[a];
            if a == b {
                kij + C64::new(1.0, 0.0)
            } else {
                kij
            }
        })
    }

    /// Correction fields φ = f − g for several right-hand sides sharing one factorization.
    pub fn solve_many(&self, s: f64, z: C64, gs: &[&Field]) -> Result<Vec<Field>> {
        if self.support.is_empty() {
            return Ok(gs.iter().map(|_| Field::zeros(self.grid, Space::Physical)).collect());
        }
        let kernel = free_resolvent_kernel(&self.grid, s, z);
        let lu = self.matrix_from_kernel(&kernel).lu();
        let sym: Vec<C64> = self.grid.xi_norms().into_iter().map(|r| (C64::new(r.powf(s), 0.0) - z).inv()).collect();
        gs.iter()
            .map(|g| {
                let r0g = apply_symbol(&sym, g)?;
                let rhs = DVector::from_iterator(self.support.len(), self.support.iter().zip(&self.v).map(|(&i, &w)| -r0g.values()[i] * w));
                let phi = lu.solve(&rhs).ok_or(Error::NonConvergence { solver: "fredholm_dense", iterations: 0, residual: f64::INFINITY })?;
                let mut out = vec![C64::new(0.0, 0.0); self.grid.len()];
                for (&i, p) in self.support.iter().zip(phi.iter()) {
                    out[i] = *p;
                }
                Ok(Field::from_parts(self.grid, out, Space::Physical))
            })
            .collect()
    }

    pub fn solve(&self, s: f64, z: C64, g: &Field) -> Result<Field> {
        Ok(self.solve_many(s, z, &[g])?.remove(0))
    }
}

/// f with (I + V·R₀(z))f = g, z = λ + iε in the upper or lower half plane.
pub fn fredholm_solve(s: f64, z: C64, v: &[f64], g: &Field, opts: &FredholmOptions) -> Result<FredholmSolution> {
    g.expect_space(Space::Physical)?;
    let grid = *g.grid();
    if v.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let q = ResolventQuery::new(s, z.re, z.im.abs(), if z.im >= 0.0 { BoundarySign::Plus } else { BoundarySign::Minus });
    if z.re != 0.0 {
        q.validate(&grid)?;
    }
    let map = FredholmMap { grid, sym: resolvent_symbol(&grid, &q), v };
    let residual_of = |f: &[C64]| {
        let af = map.apply(f);
        let r: Vec<C64> = af.iter().zip(g.values()).map(|(a, b)| a - b).collect();
        let gn = vnorm(g.values());
        if gn == 0.0 { vnorm(&r) } else { vnorm(&r) / gn }
    };
    let mut best: Option<FredholmSolution> = None;
    if matches!(opts.method, FredholmMethod::Auto | FredholmMethod::Gmres) {
        let (x, _, iters) = gmres(|a| map.apply(a), g.values(), opts.tol, opts.restart, opts.max_iter);
        let res = residual_of(&x);
        best = Some(FredholmSolution { f: Field::from_parts(grid, x, Space::Physical), residual: res, iterations: iters, method: FredholmMethod::Gmres });
    }
    let need_dense = match &best {
        None => true,
        Some(b) => b.residual >= FREDHOLM_TOL && opts.method == FredholmMethod::Auto,
    };
    if need_dense {
        let reduced = ReducedSystem::new(&grid, v);
        if reduced.support().len() <= opts.dense_limit {
            let phi = reduced.solve(s, z, g)?;
            let f = g.add(&phi)?;
            let res = residual_of(f.values());
            let cand = FredholmSolution { f, residual: res, iterations: 0, method: FredholmMethod::Dense };
            if best.as_ref().map_or(true, |b| cand.residual < b.residual) {
                best = Some(cand);
            }
        }
    }
    let best = best.ok_or_else(|| Error::InvalidParameter("no Fredholm route applies".into()))?;
    if !(best.residual < FREDHOLM_TOL) {
        return Err(Error::NonConvergence { solver: "fredholm", iterations: best.iterations, residual: best.residual });
    }
    Ok(best)
}

/// Two-point Richardson extrapolation to ε → 0 from values at ε and 2ε.
pub fn richardson(fine: C64, coarse: C64) -> C64 {
    fine * 2.0 - coarse
}

/// Boundary value (I + VR₀(λ±i0))⁻¹g from the ε and 2ε solves.
pub fn fredholm_boundary(s: f64, lambda: f64, eps: f64, sign: BoundarySign, v: &[f64], g: &Field, opts: &FredholmOptions) -> Result<(Field, [FredholmSolution; 2])> {
    let a = fredholm_solve(s, C64::new(lambda, sign.factor() * eps), v, g, opts)?;
    let b = fredholm_solve(s, C64::new(lambda, 2.0 * sign.factor() * eps), v, g, opts)?;
    let f = a.f.zip_with(&b.f, richardson)?;
    Ok((f, [a, b]))
}

/// Quadrature nodes for spectral integrals: midpoints ρ_k = (k+½)δξ below `rho_max`, λ_k = ρ_k^s, weight δξ.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    pub s: f64,
    pub rho: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub weight: f64,
}

impl SpectralGrid {
    pub fn midpoint(grid: &GridSpec, s: f64, rho_max: f64) -> Result<Self> {
        if rho_max >= grid.xi_max() {
            return Err(Error::ShellOutsideNyquist { radius: rho_max, xi_max: grid.xi_max() });
        }
        let d = grid.dxi();
        let n = (rho_max / d).floor() as usize;
        let rho: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * d).collect();
        let lambdas = rho.iter().map(|r| r.powf(s)).collect();
        Ok(Self { s, rho, lambdas, weight: d })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortedPoint {
    pub lambda: f64,
    pub rho: f64,
    /// extrapolated F±f at (+ρ, −ρ)
    pub values: [C64; 2],
    /// values at ε = 2Δp and 4Δp
    pub fine: [C64; 2],
    pub coarse: [C64; 2],
}

#[derive(Debug, Clone)]
pub struct DistortedFt {
    pub sign: BoundarySign,
    pub points: Vec<DistortedPoint>,
    /// λ values skipped as near-eigenvalue
    pub excluded: Vec<f64>,
    /// (2π)^{−1} Σ_k δξ Σ_± |F±f(±ρ_k)|²
    pub completeness: f64,
}

/// Traces of (I + VR₀(λ±i0))⁻¹f on the point shell {±λ^{1/s}} and the completeness functional,
/// for every field in `fs`.
pub fn distorted_ft_1d(
    sgrid: &SpectralGrid,
    v: &[f64],
    fs: &[Field],
    sign: BoundarySign,
    eigenvalues: &[f64],
    margin: f64,
) -> Result<Vec<DistortedFt>> {
    let Some(first) = fs.first() else {
        return Ok(vec![]);
    };
    let grid = *first.grid();
    if grid.dim != 1 {
        return Err(Error::Domain("distorted Fourier transform is one-dimensional".into()));
    }
    for f in fs {
        f.expect_space(Space::Physical)?;
        if *f.grid() != grid {
            return Err(Error::GridMismatch);
        }
    }
    if v.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let s = sgrid.s;
    let reduced = ReducedSystem::new(&grid, v);
    let opts = FredholmOptions::default();
    let dense = reduced.support().len() <= opts.dense_limit;
    let xs: Vec<f64> = (0..grid.len()).map(|i| grid.coord(i)).collect();
    let h = grid.h();
    let trace = |u: &Field, rho: f64| -> [C64; 2] { [dtft_at(u, &[rho, 0.0, 0.0]), dtft_at(u, &[-rho, 0.0, 0.0])] };
    let refs: Vec<&Field> = fs.iter().collect();
    // per λ: Ok(points for every f) or Err(λ) when excluded
    let outcome: Vec<std::result::Result<Vec<DistortedPoint>, f64>> = sgrid
        .rho
        .par_iter()
        .zip(&sgrid.lambdas)
        .map(|(&rho, &lambda)| {
            if eigenvalues.iter().any(|e| (e - lambda).abs() < margin) {
                return Ok(Err(lambda));
            }
            let base: Vec<[C64; 2]> = fs.iter().map(|f| trace(f, rho)).collect();
            let dp = grid.dxi() * s * rho.powf(s - 1.0);
            let mut at = vec![[[C64::new(0.0, 0.0); 2]; 2]; fs.len()];
            for (slot, c) in [2.0, 4.0].iter().enumerate() {
                let z = C64::new(lambda, sign.factor() * c * dp);
                let corr: Vec<[C64; 2]> = if dense {
                    reduced
                        .solve_many(s, z, &refs)?
                        .iter()
                        .map(|phi| {
                            let mut t = [C64::new(0.0, 0.0); 2];
                            for &i in reduced.support() {
                                let p = phi.values()[i];
                                t[0] += p * C64::from_polar(h, -rho * xs[i]);
                                t[1] += p * C64::from_polar(h, rho * xs[i]);
                            }
                            t
                        })
                        .collect()
                } else {
                    let mut out = vec![];
                    for (f, b) in fs.iter().zip(&base) {
                        match fredholm_solve(s, z, v, f, &opts) {
                            Ok(sol) => {
                                let tr = trace(&sol.f, rho);
                                out.push([tr[0] - b[0], tr[1] - b[1]]);
                            }
                            Err(Error::NonConvergence { .. }) => return Ok(Err(lambda)),
                            Err(e) => return Err(e),
                        }
                    }
                    out
                };
                for (k, c) in corr.iter().enumerate() {
                    at[k][slot] = [base[k][0] + c[0], base[k][1] + c[1]];
                }
            }
            Ok(Ok(at
                .iter()
                .map(|a| DistortedPoint {
                    lambda,
                    rho,
                    values: [richardson(a[0][0], a[1][0]), richardson(a[0][1], a[1][1])],
                    fine: a[0],
                    coarse: a[1],
                })
                .collect()))
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<DistortedFt> = fs.iter().map(|_| DistortedFt { sign, points: vec![], excluded: vec![], completeness: 0.0 }).collect();
    for (o, &lambda) in outcome.into_iter().zip(&sgrid.lambdas) {
        match o {
            Ok(pts) => {
                for (d, p) in out.iter_mut().zip(pts) {
                    d.points.push(p);
                }
            }
            Err(_) => {
                for d in out.iter_mut() {
                    d.excluded.push(lambda);
                }
            }
        }
    }
    for d in out.iter_mut() {
        d.completeness = d.points.iter().map(|p| p.values[0].norm_sqr() + p.values[1].norm_sqr()).sum::<f64>() * sgrid.weight / (2.0 * PI);
    }
    Ok(out)
}

/// Field with f̂(ξ) a smooth bump of |ξ| supported on [c − w, c + w]; Schwartz in x when c > w.
pub fn shell_band_field(grid: &GridSpec, center: f64, half_width: f64) -> Field {
    use crate::multiplier::smooth_step;
    let fh = Field::from_fourier_fn(*grid, |xi| {
        let t = (xi.iter().map(|a| a * a).sum::<f64>().sqrt() - center) / half_width;
        C64::new(smooth_step((1.0 + t) * 2.0) * smooth_step((1.0 - t) * 2.0), 0.0)
    });
    inverse(&fh)
}

/// The four-function completeness battery.
pub fn completeness_battery(grid: &GridSpec) -> Vec<(&'static str, Field)> {
    let g = *grid;
    vec![
        ("gaussian", Field::from_real_fn(g, |x| (-x[0] * x[0] / 2.0).exp())),
        ("shifted_wave", Field::from_real_fn(g, |x| (-(x[0] - 1.0).powi(2) / 4.0).exp() * (1.5 * x[0]).cos())),
        ("odd_gaussian", Field::from_real_fn(g, |x| x[0] * (-x[0] * x[0] / 8.0).exp())),
        ("smoothed_indicator", Field::from_real_fn(g, |x| 0.5 * ((3.0 * (x[0] + 1.5)).tanh() - (3.0 * (x[0] - 1.5)).tanh()))),
    ]
}
