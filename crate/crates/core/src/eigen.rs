//! Bound states of H = (−Δ)^{s/2} + V: matrix-free shift-invert Lanczos with a dense oracle,
//! the resolvent characterization u = −R₀(λ+i0)Vu, weighted decay profiles and the Λ scan.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::agmon::{b_norm, bstar_norm, DyadicLayout};
use crate::error::{Error, Result};
use crate::grid::{fft_axes, Field, GridSpec, Space, C64};
use crate::multiplier::bessel_potential;
use crate::resolvent::{free_resolvent_apply, BoundarySign, ReducedSystem, ResolventQuery};
use crate::stats::median;

/// Hu = 𝓕⁻¹(|ξ|^s û) + V·u.
pub fn apply_hamiltonian(u: &Field, v: &[f64], s: f64) -> Result<Field> {
    u.expect_space(Space::Physical)?;
    if v.len() != u.grid().len() {
        return Err(Error::GridMismatch);
    }
    let op = Hamiltonian::new(u.grid(), v, s);
    Ok(Field::from_parts(*u.grid(), op.apply(u.values()), Space::Physical))
}

struct Hamiltonian<'a> {
    grid: GridSpec,
    /// |ξ|^s / N^d on every slot
    kinetic: Vec<f64>,
    v: &'a [f64],
}

impl<'a> Hamiltonian<'a> {
    fn new(grid: &GridSpec, v: &'a [f64], s: f64) -> Self {
        let n = grid.len() as f64;
        Self { grid: *grid, kinetic: grid.xi_norms().into_iter().map(|r| r.powf(s) / n).collect(), v }
    }

    /// (H₀ + shift)·x when `with_v` is false, (H + shift)·x otherwise.
    fn apply_shifted(&self, x: &[C64], shift: f64, with_v: bool) -> Vec<C64> {
        let mut w = x.to_vec();
        fft_axes(&self.grid, &mut w, FftDirection::Forward);
        for (a, &k) in w.iter_mut().zip(&self.kinetic) {
            *a *= k;
        }
        fft_axes(&self.grid, &mut w, FftDirection::Inverse);
        for ((a, b), &vv) in w.iter_mut().zip(x).zip(self.v) {
            *a += b * (shift + if with_v { vv } else { 0.0 });
        }
        w
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.apply_shifted(x, 0.0, true)
    }

    /// (H₀ + c)⁻¹x for c > 0.
    fn precondition(&self, x: &[C64], c: f64) -> Vec<C64> {
        let n = self.grid.len() as f64;
        let mut w = x.to_vec();
        fft_axes(&self.grid, &mut w, FftDirection::Forward);
        for (a, &k) in w.iter_mut().zip(&self.kinetic) {
            *a /= (k * n + c) * n;
        }
        fft_axes(&self.grid, &mut w, FftDirection::Inverse);
        w
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn vnorm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    for (p, q) in y.iter_mut().zip(x) {
        *p += a * q;
    }
}

/// Preconditioned CG for (H − σ)x = b; H − σ is positive definite when σ < min V.
fn pcg(op: &Hamiltonian, sigma: f64, c: f64, b: &[C64], tol: f64, max_iter: usize) -> Result<Vec<C64>> {
    let bn = vnorm(b);
    let mut x = vec![C64::new(0.0, 0.0); b.len()];
    if bn == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z = op.precondition(&r, c);
    let mut p = z.clone();
    let mut rz = dot(&r, &z).re;
    for it in 0..max_iter {
        let ap = op.apply_shifted(&p, -sigma, true);
        let alpha = rz / dot(&p, &ap).re;
        axpy(&mut x, C64::new(alpha, 0.0), &p);
        axpy(&mut r, C64::new(-alpha, 0.0), &ap);
        let rn = vnorm(&r);
        if rn <= tol * bn {
            return Ok(x);
        }
        if it + 1 == max_iter {
            return Err(Error::NonConvergence { solver: "shift_invert_cg", iterations: max_iter, residual: rn / bn });
        }
        z = op.precondition(&r, c);
        let rz_new = dot(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        for (pp, zz) in p.iter_mut().zip(&z) {
            *pp = zz + beta * *pp;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// Lanczos, dense if it fails and the grid is small enough
    Auto,
    Lanczos,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenOptions {
    pub count: usize,
    /// open window (lo, hi)
    pub window: (f64, f64),
    pub tol: f64,
    pub max_lanczos: usize,
    pub dense_limit: usize,
    pub method: EigenMethod,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { count: 32, window: (f64::NEG_INFINITY, 0.0), tol: 1e-8, max_lanczos: 400, dense_limit: 4096, method: EigenMethod::Auto, seed: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    /// ‖u‖ = 1
    pub u: Field,
    /// ‖Hu − λu‖
    pub residual: f64,
    /// size of the cluster of eigenvalues within 1e−6 of each other
    pub multiplicity: usize,
}

#[derive(Debug, Clone)]
pub struct EigenReport {
    pub pairs: Vec<EigenPair>,
    pub method: EigenMethod,
    /// max |⟨u_i,u_j⟩ − δ_ij|
    pub orthogonality: f64,
    /// human-readable problems; empty on a clean run
    pub flags: Vec<String>,
}

/// Eigenvalues closer than this share a cluster.
pub const CLUSTER_TOL: f64 = 1e-6;

/// Dense H on the lattice: circulant kinetic part plus diag(V). Real symmetric.
pub fn dense_hamiltonian(grid: &GridSpec, v: &[f64], s: f64) -> DMatrix<f64> {
    let n = grid.points;
    let sym: Vec<C64> = grid.xi_norms().into_iter().map(|r| C64::new(r.powf(s), 0.0)).collect();
    let kernel = crate::grid::inverse(&Field::from_parts(*grid, sym, Space::Fourier));
    let k = kernel.values();
    let w = grid.cell_volume();
    let m = grid.len();
    let idx: Vec<[usize; 3]> = (0..m).map(|i| grid.unravel(i)).collect();
    DMatrix::from_fn(m, m, |a, b| {
        let mut d = [0usize; 3];
        for ax in 0..grid.dim {
            d[ax] = (idx[a][ax] + n + n / 2 - idx[b][ax]) % n;
        }
        let kin = k[grid.ravel(&d[..grid.dim])].re * w;
        if a == b {
            kin + v[a]
        } else {
            kin
        }
    })
}

/// Lattice vector → unit-norm physical field.
fn normalized(grid: &GridSpec, x: Vec<C64>) -> Field {
    let f = Field::from_parts(*grid, x, Space::Physical);
    let n = f.norm();
    f.scale(C64::new(n.recip(), 0.0))
}

fn finish(grid: &GridSpec, v: &[f64], s: f64, mut found: Vec<(f64, Vec<C64>)>, method: EigenMethod, opts: &EigenOptions) -> Result<EigenReport> {
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (lo, hi) = opts.window;
    let mut pairs: Vec<EigenPair> = found
        .into_iter()
        .filter(|(l, _)| *l > lo && *l < hi - 1e-8)
        .take(opts.count)
        .map(|(lambda, x)| {
            let u = normalized(grid, x);
            let hu = apply_hamiltonian(&u, v, s)?;
            let residual = hu.sub(&u.scale(C64::new(lambda, 0.0)))?.norm();
            Ok(EigenPair { lambda, u, residual, multiplicity: 1 })
        })
        .collect::<Result<_>>()?;
    let lambdas: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
    for p in pairs.iter_mut() {
        p.multiplicity = cluster_size(&lambdas, p.lambda);
    }
    let mut orthogonality: f64 = 0.0;
    for i in 0..pairs.len() {
        for j in 0..=i {
            let ip = pairs[i].u.inner(&pairs[j].u)?;
            let want = if i == j { 1.0 } else { 0.0 };
            orthogonality = orthogonality.max((ip - want).norm());
        }
    }
    let mut flags = vec![];
    for p in &pairs {
        if !(p.residual < opts.tol) {
            flags.push(format!("λ = {:.12} has residual {:.3e} ≥ {:.1e}", p.lambda, p.residual, opts.tol));
        }
    }
    if !(orthogonality < 1e-8) {
        flags.push(format!("orthogonality defect {orthogonality:.3e}"));
    }
    Ok(EigenReport { pairs, method, orthogonality, flags })
}

/// Number of eigenvalues in the single-linkage cluster containing `lambda`.
fn cluster_size(sorted: &[f64], lambda: f64) -> usize {
    let Some(pos) = sorted.iter().position(|&l| l == lambda) else {
        return 1;
    };
    let mut a = pos;
    while a > 0 && sorted[a] - sorted[a - 1] < CLUSTER_TOL {
        a -= 1;
    }
    let mut b = pos;
    while b + 1 < sorted.len() && sorted[b + 1] - sorted[b] < CLUSTER_TOL {
        b += 1;
    }
    b - a + 1
}

fn dense_pairs(grid: &GridSpec, v: &[f64], s: f64) -> Vec<(f64, Vec<C64>)> {
    let eig = SymmetricEigen::new(dense_hamiltonian(grid, v, s));
    (0..eig.eigenvalues.len())
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().map(|&a| C64::new(a, 0.0)).collect()))
        .collect()
}

/// ‖Hu − ρu‖ for the normalized Ritz vector u = Σ yᵢqᵢ, ρ its Rayleigh quotient.
fn true_residual(op: &Hamiltonian, basis: &[Vec<C64>], y: &[f64]) -> f64 {
    let mut u = vec![C64::new(0.0, 0.0); basis[0].len()];
    for (coef, q) in y.iter().zip(basis) {
        axpy(&mut u, C64::new(*coef, 0.0), q);
    }
    let hu = op.apply(&u);
    let uu = dot(&u, &u).re;
    let rho = dot(&u, &hu).re / uu;
    let mut r = hu;
    axpy(&mut r, C64::new(-rho, 0.0), &u);
    vnorm(&r) / uu.sqrt()
}

/// Shift-invert Lanczos with full reorthogonalization; σ = min V − 1.
fn lanczos_pairs(grid: &GridSpec, v: &[f64], s: f64, opts: &EigenOptions) -> Result<Vec<(f64, Vec<C64>)>> {
    let op = Hamiltonian::new(grid, v, s);
    let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0);
    let sigma = vmin - 1.0;
    // far-field value of V − σ
    let c = (-sigma).max(1.0);
    let n = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q0: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
    let qn = vnorm(&q0);
    q0.iter_mut().for_each(|a| *a /= qn);
    let mut basis = vec![q0];
    let mut alpha: Vec<f64> = vec![];
    let mut beta: Vec<f64> = vec![];
    let hi = opts.window.1;
    let max_m = opts.max_lanczos.min(n);
    let mut done = false;
    let mut ritz: Vec<(f64, Vec<f64>)> = vec![];
    let mut window_history: Vec<usize> = vec![];
    while !done {
        let j = alpha.len();
        let mut w = pcg(&op, sigma, c, &basis[j], 1e-13, 2000)?;
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let h = dot(q, &w);
                axpy(&mut w, -h, q);
            }
        }
        let b = vnorm(&w);
        let m = alpha.len();
        let invariant = b < 1e-14 * a.abs().max(1e-300);
        if m % 10 == 0 || m == max_m || invariant {
            let t = DMatrix::from_fn(m, m, |i, k| {
                if i == k {
                    alpha[i]
                } else if i + 1 == k || k + 1 == i {
                    beta[i.min(k)]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
            ritz = order.iter().map(|&i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().cloned().collect())).collect();
            let theta_max = ritz[0].0;
            // every Ritz value mapping into the window must be converged; the first one above it either
            // converges too or the window count has held for two consecutive checks
            let mut window_conv = true;
            let mut sentinel_conv = true;
            let mut in_window = 0;
            for (theta, y) in &ritz {
                let lam = sigma + 1.0 / theta;
                let conv = (b * y[m - 1]).abs() <= 1e-11 * theta_max;
                if lam < hi && in_window < opts.count {
                    // the inverse-space estimate is amplified by up to ‖H − σ‖ on the way back, so
                    // window pairs also need a small residual against H itself
                    window_conv &= conv && true_residual(&op, &basis, y) < 0.1 * opts.tol;
                    in_window += 1;
                } else {
                    sentinel_conv = conv;
                    break;
                }
            }
            let steady = window_history.len() >= 2 && window_history.iter().rev().take(2).all(|&k| k == in_window);
            window_history.push(in_window);
            let all_conv = window_conv && (sentinel_conv || steady);
            done = (all_conv && m >= 20.min(max_m)) || invariant || m == max_m;
            if m == max_m && !all_conv && !invariant {
                let worst = ritz
                    .iter()
                    .take(in_window.max(1))
                    .map(|(_, y)| (b * y[m - 1]).abs() / theta_max)
                    .fold(0.0, f64::max);
                return Err(Error::NonConvergence { solver: "lanczos", iterations: m, residual: worst });
            }
        }
        if !done {
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
    }
    // Ritz vectors for the window plus the first one above it; eigenvalues from Rayleigh quotients of H
    Ok(ritz
        .iter()
        .take_while(|(theta, _)| sigma + 1.0 / theta < hi)
        .take(opts.count + 1)
        .chain(ritz.iter().filter(|(theta, _)| sigma + 1.0 / theta >= hi).take(1))
        .map(|(_, y)| {
            let mut u = vec![C64::new(0.0, 0.0); n];
            for (coef, q) in y.iter().zip(&basis) {
                axpy(&mut u, C64::new(*coef, 0.0), q);
            }
            let hu = op.apply(&u);
            (dot(&u, &hu).re / dot(&u, &u).re, u)
        })
        .collect())
}

/// Eigenpairs of H inside the open window, lowest first.
pub fn eigen_solve(grid: &GridSpec, v: &[f64], s: f64, opts: &EigenOptions) -> Result<EigenReport> {
    if v.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("order s must be positive, got {s}")));
    }
    match opts.method {
        EigenMethod::Dense => {
            if grid.len() > opts.dense_limit {
                return Err(Error::InvalidParameter(format!("dense eigen solve limited to {} cells", opts.dense_limit)));
            }
            finish(grid, v, s, dense_pairs(grid, v, s), EigenMethod::Dense, opts)
        }
        EigenMethod::Lanczos => finish(grid, v, s, lanczos_pairs(grid, v, s, opts)?, EigenMethod::Lanczos, opts),
        EigenMethod::Auto => match lanczos_pairs(grid, v, s, opts) {
            Ok(found) => {
                let rep = finish(grid, v, s, found, EigenMethod::Lanczos, opts)?;
                if rep.flags.is_empty() || grid.len() > opts.dense_limit {
                    Ok(rep)
                } else {
                    finish(grid, v, s, dense_pairs(grid, v, s), EigenMethod::Dense, opts)
                }
            }
            Err(Error::NonConvergence { .. }) if grid.len() <= opts.dense_limit => {
                finish(grid, v, s, dense_pairs(grid, v, s), EigenMethod::Dense, opts)
            }
            Err(e) => Err(e),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacterizationResidual {
    /// ‖u + R₀(λ+i0)Vu‖/‖u‖
    pub plus: f64,
    /// ‖u + R₀(λ−i0)Vu‖/‖u‖
    pub minus: f64,
}

/// Residual of u = −R₀(λ±i0)Vu. For λ < 0 the resolvent is taken at ε directly (ε = 0 allowed);
/// for λ > 0 the boundary value is the Richardson extrapolation from ε and 2ε.
pub fn eigen_characterization_residual(lambda: f64, u: &Field, v: &[f64], s: f64, eps: f64) -> Result<CharacterizationResidual> {
    if lambda == 0.0 {
        return Err(Error::InvalidParameter("characterization needs λ ≠ 0".into()));
    }
    let vu = u.mul_real(v);
    let un = u.norm();
    let one = |sign: BoundarySign| -> Result<f64> {
        let r = if lambda < 0.0 {
            free_resolvent_apply(&ResolventQuery::new(s, lambda, eps, sign), &vu)?
        } else {
            let a = free_resolvent_apply(&ResolventQuery::new(s, lambda, eps, sign), &vu)?;
            let b = free_resolvent_apply(&ResolventQuery::new(s, lambda, 2.0 * eps, sign), &vu)?;
            a.zip_with(&b, crate::resolvent::richardson)?
        };
        Ok(u.add(&r)?.norm() / un)
    };
    Ok(CharacterizationResidual { plus: one(BoundarySign::Plus)?, minus: one(BoundarySign::Minus)? })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayProfile {
    /// ⟨x⟩ exponent of the weight
    pub exponent: f64,
    pub s_prime: f64,
    pub radii: Vec<f64>,
    /// W(ρ) = ‖⟨x⟩^a J_{s'}u‖_{L²(|x|<ρ)}
    pub w: Vec<f64>,
    /// W(L/2)/W(L/4)
    pub saturation_ratio: f64,
    pub saturated: bool,
}

/// Saturation threshold on W(L/2)/W(L/4).
pub const SATURATION_RATIO: f64 = 1.05;

/// Truncated norms of ⟨x⟩^a J_{s'}u on the dyadic ladder L·2^{−k} ≥ 1, largest radius L.
pub fn weighted_profile(u: &Field, exponent: f64, s_prime: f64) -> Result<DecayProfile> {
    let grid = *u.grid();
    let ju = bessel_potential(s_prime, u)?;
    let radii_cells = grid.radii();
    let w_cell = grid.cell_volume();
    let l = grid.half_width;
    let mut ladder = vec![];
    let mut r = l;
    while r >= 1.0 {
        ladder.push(r);
        r /= 2.0;
    }
    ladder.reverse();
    let mut pairs: Vec<(f64, f64)> = radii_cells
        .iter()
        .zip(ju.values())
        .map(|(&rr, z)| (rr, (1.0 + rr * rr).powf(exponent) * z.norm_sqr() * w_cell))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut w = Vec::with_capacity(ladder.len());
    let mut acc = 0.0;
    let mut it = pairs.iter().peekable();
    for &rho in &ladder {
        while let Some(&&(rr, m)) = it.peek() {
            if rr < rho {
                acc += m;
                it.next();
            } else {
                break;
            }
        }
        w.push(acc.sqrt());
    }
    let at = |rho: f64| ladder.iter().position(|&x| (x - rho).abs() < 1e-12).map(|i| w[i]);
    let ratio = match (at(l / 2.0), at(l / 4.0)) {
        (Some(a), Some(b)) if b > 0.0 => a / b,
        (Some(a), Some(_)) if a == 0.0 => 1.0,
        _ => f64::NAN,
    };
    Ok(DecayProfile { exponent, s_prime, radii: ladder, w, saturation_ratio: ratio, saturated: ratio < SATURATION_RATIO })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub profiles: Vec<(f64, DecayProfile)>,
    /// ‖⟨x⟩^{s+1/2}J_su‖_{B*}
    pub bstar_weighted: f64,
    /// ‖Vu‖_B
    pub b_vu: f64,
}

/// Profiles for every (ε, s') with weight ⟨x⟩^{s−ε}, plus the B*-weighted value and ‖Vu‖_B.
pub fn decay_profile(u: &Field, v: &[f64], s: f64, eps: &[f64], s_primes: &[f64]) -> Result<DecayReport> {
    for &e in eps {
        if !(e > 0.0) {
            return Err(Error::InvalidParameter(format!("decay ε must be positive, got {e}")));
        }
    }
    for &sp in s_primes {
        if sp > s {
            return Err(Error::InvalidParameter(format!("s' = {sp} exceeds s = {s}")));
        }
    }
    let mut profiles = vec![];
    for &e in eps {
        for &sp in s_primes {
            // ⟨x⟩^{s−ε} on the amplitude is (1+|x|²)^{s−ε} on |·|²
            profiles.push((e, weighted_profile(u, s - e, sp)?));
        }
    }
    let layout = DyadicLayout::new(*u.grid());
    let js = bessel_potential(s, u)?;
    let wts: Vec<f64> = u.grid().radii().iter().map(|r| (1.0 + r * r).powf((s + 0.5) / 2.0)).collect();
    let bstar_weighted = bstar_norm(&js.mul_real(&wts), &layout)?;
    let b_vu = b_norm(&u.mul_real(v), &layout)?;
    Ok(DecayReport { profiles, bstar_weighted, b_vu })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanCandidate {
    pub lambda: f64,
    pub sigma_min: f64,
    /// distance to the nearest other candidate or window edge
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub lambdas: Vec<f64>,
    pub sigma_min: Vec<f64>,
    pub median: f64,
    pub threshold: f64,
    pub candidates: Vec<ScanCandidate>,
}

/// Dip threshold relative to the median smallest singular value.
pub const DIP_FACTOR: f64 = 1e-3;

fn sigma_min_at(red: &ReducedSystem, grid: &GridSpec, s: f64, lambda: f64) -> f64 {
    if red.support().is_empty() {
        return 1.0;
    }
    let eps = if lambda > 0.0 { crate::resolvent::eps_floor(grid, s, lambda) } else { 0.0 };
    let m = red.matrix(s, C64::new(lambda, eps));
    m.singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Smallest singular value of the reduced I + V_S R₀(λ+iε)_SS along a λ grid; local minima are refined
/// by golden-section search and kept when they fall below DIP_FACTOR·median.
pub fn lambda_scan(grid: &GridSpec, v: &[f64], s: f64, lambdas: &[f64]) -> Result<ScanReport> {
    if lambdas.iter().any(|&l| l.abs() < 1e-3) {
        return Err(Error::InvalidParameter("λ window must stay away from 0".into()));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("λ grid must be increasing".into()));
    }
    let red = ReducedSystem::new(grid, v);
    if red.support().len() > 4096 {
        return Err(Error::InvalidParameter(format!("supp V has {} cells; dense scan limited to 4096", red.support().len())));
    }
    let sig: Vec<f64> = lambdas.par_iter().map(|&l| sigma_min_at(&red, grid, s, l)).collect();
    let med = median(&sig);
    let threshold = DIP_FACTOR * med;
    let mut found = vec![];
    for k in 0..sig.len() {
        let left = if k > 0 { sig[k - 1] } else { f64::INFINITY };
        let right = if k + 1 < sig.len() { sig[k + 1] } else { f64::INFINITY };
        if !(sig[k] < left && sig[k] <= right) || k == 0 || k + 1 == sig.len() {
            continue;
        }
        let (lam, val) = golden_min(|l| sigma_min_at(&red, grid, s, l), lambdas[k - 1], lambdas[k + 1], 1e-11);
        if val < threshold {
            found.push((lam, val));
        }
    }
    let (lo, hi) = (lambdas[0], *lambdas.last().unwrap());
    let candidates = found
        .iter()
        .enumerate()
        .map(|(i, &(lam, val))| {
            let mut margin = (lam - lo).min(hi - lam);
            for (j, &(other, _)) in found.iter().enumerate() {
                if j != i {
                    margin = margin.min((other - lam).abs());
                }
            }
            ScanCandidate { lambda: lam, sigma_min: val, margin }
        })
        .collect();
    Ok(ScanReport { lambdas: lambdas.to_vec(), sigma_min: sig, median: med, threshold, candidates })
}

/// Golden-section minimization on [a, b] down to bracket width `tol`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
