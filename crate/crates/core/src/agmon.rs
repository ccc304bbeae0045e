//! Dyadic annuli, the B / B* / B_s* norms, and traces on the shell {|ξ|^s = λ}.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec, Space, C64};
use crate::multiplier::bessel_potential;

/// R_0 = 0, R_j = 2^{j−1}.
pub fn dyadic_radius(j: usize) -> f64 {
    if j == 0 {
        0.0
    } else {
        2f64.powi(j as i32 - 1)
    }
}

/// Annulus index of a radius: X_1 = {|x| ≤ 1}, X_j = {R_{j−1} < |x| ≤ R_j}.
pub fn annulus_of(r: f64) -> usize {
    let mut j = 1;
    while r > dyadic_radius(j) {
        j += 1;
    }
    j
}

#[derive(Debug, Clone)]
pub struct DyadicLayout {
    grid: GridSpec,
    j_max: usize,
    /// 1-based annulus index per cell.
    annulus: Vec<u16>,
    radii: Vec<f64>,
}

impl DyadicLayout {
    pub fn new(grid: GridSpec) -> Self {
        let reach = grid.half_width * (grid.dim as f64).sqrt();
        let mut j_max = 1;
        while dyadic_radius(j_max) < reach {
            j_max += 1;
        }
        let radii = grid.radii();
        let annulus = radii.iter().map(|&r| annulus_of(r) as u16).collect();
        Self { grid, j_max, annulus, radii }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn radius(&self, j: usize) -> f64 {
        dyadic_radius(j)
    }

    pub fn annulus_index(&self, cell: usize) -> usize {
        self.annulus[cell] as usize
    }

    pub fn cell_radii(&self) -> &[f64] {
        &self.radii
    }

    /// Cells of X_j.
    pub fn cells(&self, j: usize) -> Vec<usize> {
        (0..self.annulus.len()).filter(|&i| self.annulus[i] as usize == j).collect()
    }

    /// ‖u‖_{L²(X_j)} for j = 1..=J_max (entry j−1).
    pub fn annulus_norms(&self, u: &Field) -> Result<Vec<f64>> {
        if *u.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        u.expect_space(Space::Physical)?;
        let mut acc = vec![0.0; self.j_max];
        for (v, &j) in u.values().iter().zip(&self.annulus) {
            acc[j as usize - 1] += v.norm_sqr();
        }
        let w = self.grid.cell_volume();
        Ok(acc.into_iter().map(|a| (a * w).sqrt()).collect())
    }

    pub fn b_report(&self, u: &Field) -> Result<NormReport> {
        let norms = self.annulus_norms(u)?;
        let terms: Vec<f64> = norms.iter().enumerate().map(|(i, n)| dyadic_radius(i + 1).sqrt() * n).collect();
        let value = terms.iter().sum();
        Ok(NormReport { last_annulus: *terms.last().unwrap(), terms, value })
    }

    pub fn bstar_report(&self, u: &Field) -> Result<NormReport> {
        let norms = self.annulus_norms(u)?;
        let terms: Vec<f64> = norms.iter().enumerate().map(|(i, n)| n / dyadic_radius(i + 1).sqrt()).collect();
        let value = terms.iter().cloned().fold(0.0, f64::max);
        Ok(NormReport { last_annulus: *terms.last().unwrap(), terms, value })
    }
}

/// Per-annulus terms of a dyadic norm.
#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub terms: Vec<f64>,
    pub value: f64,
    /// Contribution of X_{J_max}, exposed so truncation can be audited.
    pub last_annulus: f64,
}

/// Σ_j R_j^{1/2} ‖u‖_{L²(X_j)}.
pub fn b_norm(u: &Field, layout: &DyadicLayout) -> Result<f64> {
    Ok(layout.b_report(u)?.value)
}

/// max_j R_j^{−1/2} ‖u‖_{L²(X_j)}.
pub fn bstar_norm(u: &Field, layout: &DyadicLayout) -> Result<f64> {
    Ok(layout.bstar_report(u)?.value)
}

/// ‖J_s u‖_{B*}.
pub fn bsstar_norm(u: &Field, s: f64, layout: &DyadicLayout) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!("B_s* order must be ≥ 0, got {s}")));
    }
    bstar_norm(&bessel_potential(s, u)?, layout)
}

/// Radial weights μ(|x|).
#[derive(Clone)]
pub enum Weight {
    Unit,
    /// (1+t)^a (1+εt)^{−a}; a = s + 1/2 is the admissible family.
    Saturating { exponent: f64, eps: f64 },
    /// (1+t)^r
    Power { r: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Weight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Weight::Unit => write!(f, "Unit"),
            Weight::Saturating { exponent, eps } => write!(f, "Saturating {{ exponent: {exponent}, eps: {eps} }}"),
            Weight::Power { r } => write!(f, "Power {{ r: {r} }}"),
            Weight::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Weight {
    /// μ_ε(t) = (1+t)^{s+1/2}(1+εt)^{−s−1/2}.
    pub fn mu(s: f64, eps: f64) -> Self {
        Weight::Saturating { exponent: s + 0.5, eps }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Weight::Unit => 1.0,
            Weight::Saturating { exponent, eps } => ((1.0 + t) / (1.0 + eps * t)).powf(*exponent),
            Weight::Power { r } => (1.0 + t).powf(*r),
            Weight::Custom(f) => f(t),
        }
    }

    pub fn apply(&self, u: &Field, layout: &DyadicLayout) -> Field {
        let w: Vec<f64> = layout.cell_radii().iter().map(|&r| self.eval(r)).collect();
        u.mul_real(&w)
    }
}

/// ‖μ(|·|)u‖_{B*}.
pub fn weighted_bstar_norm(u: &Field, mu: &Weight, layout: &DyadicLayout) -> Result<f64> {
    bstar_norm(&mu.apply(u, layout), layout)
}

/// ‖μ(|·|)u‖_B.
pub fn weighted_b_norm(u: &Field, mu: &Weight, layout: &DyadicLayout) -> Result<f64> {
    b_norm(&mu.apply(u, layout), layout)
}

/// The shell M_λ = {|ξ|^s = λ} with its surface quadrature.
#[derive(Debug, Clone)]
pub struct ShellSpec {
    pub s: f64,
    pub lambda: f64,
    pub radius: f64,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl ShellSpec {
    pub fn new(s: f64, lambda: f64, grid: &GridSpec) -> Result<Self> {
        if !(s > 0.0 && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("shell needs s > 0 and λ > 0, got s={s}, λ={lambda}")));
        }
        let radius = lambda.powf(1.0 / s);
        if radius >= grid.xi_max() {
            return Err(Error::ShellOutsideNyquist { radius, xi_max: grid.xi_max() });
        }
        let per = (radius / grid.dxi()).ceil().max(1.0) as usize;
        let (nodes, weights) = match grid.dim {
            1 => (vec![[radius, 0.0, 0.0], [-radius, 0.0, 0.0]], vec![1.0, 1.0]),
            2 => {
                let n = 4 * per;
                let w = 2.0 * PI * radius / n as f64;
                let nodes = (0..n)
                    .map(|m| {
                        let th = 2.0 * PI * m as f64 / n as f64;
                        [radius * th.cos(), radius * th.sin(), 0.0]
                    })
                    .collect();
                (nodes, vec![w; n])
            }
            _ => {
                let (nt, np) = (2 * per, 4 * per);
                let w = radius * radius * (2.0 / nt as f64) * (2.0 * PI / np as f64);
                let mut nodes = Vec::with_capacity(nt * np);
                for a in 0..nt {
                    let c = -1.0 + (a as f64 + 0.5) * 2.0 / nt as f64;
                    let sn = (1.0 - c * c).sqrt();
                    for b in 0..np {
                        let ph = 2.0 * PI * b as f64 / np as f64;
                        nodes.push([radius * sn * ph.cos(), radius * sn * ph.sin(), radius * c]);
                    }
                }
                (nodes, vec![w; nt * np])
            }
        };
        Ok(Self { s, lambda, radius, nodes, weights })
    }
}

#[derive(Debug, Clone)]
pub struct ShellTrace {
    pub values: Vec<C64>,
    /// (Σ w |f̂|²)^{1/2}
    pub l2_norm: f64,
}

fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

fn slot(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Interpolates a Fourier field at an off-lattice frequency: cubic in 1-D, multilinear otherwise.
pub fn interpolate_fourier(fhat: &Field, xi: &[f64; 3]) -> C64 {
    let g = fhat.grid();
    let n = g.points;
    let v = fhat.values();
    if g.dim == 1 {
        let q = xi[0] / g.dxi();
        let i0 = q.floor();
        let w = cubic_weights(q - i0);
        let i0 = i0 as i64;
        return (0..4).map(|a| v[slot(i0 - 1 + a as i64, n)] * w[a]).sum();
    }
    let mut base = [0i64; 3];
    let mut frac = [0.0; 3];
    for a in 0..g.dim {
        let q = xi[a] / g.dxi();
        base[a] = q.floor() as i64;
        frac[a] = q - q.floor();
    }
    let mut acc = C64::new(0.0, 0.0);
    for corner in 0..(1usize << g.dim) {
        let mut w = 1.0;
        let mut ix = [0usize; 3];
        for a in 0..g.dim {
            let bit = (corner >> a) & 1;
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            ix[a] = slot(base[a] + bit as i64, n);
        }
        if w != 0.0 {
            acc += v[g.ravel(&ix)] * w;
        }
    }
    acc
}

/// Values of f̂ on the shell nodes and the quadrature of |f̂|² dS.
pub fn shell_trace(fhat: &Field, shell: &ShellSpec) -> Result<ShellTrace> {
    fhat.expect_space(Space::Fourier)?;
    let g = fhat.grid();
    if shell.radius >= g.xi_max() {
        return Err(Error::ShellOutsideNyquist { radius: shell.radius, xi_max: g.xi_max() });
    }
    let values: Vec<C64> = shell.nodes.iter().map(|xi| interpolate_fourier(fhat, xi)).collect();
    let l2 = values.iter().zip(&shell.weights).map(|(v, w)| w * v.norm_sqr()).sum::<f64>().sqrt();
    Ok(ShellTrace { values, l2_norm: l2 })
}
