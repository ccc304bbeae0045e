//! Potential families, the dyadic short-range series Σ R_j M_j, and off-diagonal block norms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agmon::{annulus_of, dyadic_radius, DyadicLayout};
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec, C64};
use crate::multiplier::bessel_kernel;
use crate::stats::{fit_loglog, LineFit};

/// Rule for the per-annulus decay exponents ε_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsRule {
    /// ε_j = value
    Constant { value: f64 },
    /// ε_j = j^{−p}
    InversePower { p: f64 },
}

impl EpsRule {
    pub fn eps(&self, j: usize) -> f64 {
        match self {
            EpsRule::Constant { value } => *value,
            EpsRule::InversePower { p } => (j as f64).powf(-p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    /// κ(1+|x|)^{−γ}
    PowerTail { kappa: f64, gamma: f64 },
    /// κ(1+|x|)^{−1−ε_j} on X_j
    AnnulusTail { kappa: f64, eps: EpsRule },
    /// −depth·e^{−|x|²/width²}
    GaussianWell { depth: f64, width: f64 },
    /// height·e^{1 − 1/(1 − (|x|/radius)²)} inside the ball
    CompactBump { radius: f64, height: f64 },
    /// Values in flat grid order.
    Sampled { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Nonnegative,
    Nonpositive,
    Indefinite,
}

impl PotentialSpec {
    /// Value at a point; `None` for sampled potentials.
    pub fn value_at(&self, x: &[f64]) -> Option<f64> {
        let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        Some(match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::PowerTail { kappa, gamma } => kappa * (1.0 + r).powf(-gamma),
            PotentialSpec::AnnulusTail { kappa, eps } => kappa * (1.0 + r).powf(-1.0 - eps.eps(annulus_of(r))),
            PotentialSpec::GaussianWell { depth, width } => -depth * (-(r * r) / (width * width)).exp(),
            PotentialSpec::CompactBump { radius, height } => {
                let q = r / radius;
                if q < 1.0 {
                    height * (1.0 - 1.0 / (1.0 - q * q)).exp()
                } else {
                    0.0
                }
            }
            PotentialSpec::Sampled { .. } => return None,
        })
    }

    /// |V| is a nonincreasing function of |x|.
    pub fn is_radial_monotone(&self) -> bool {
        match self {
            PotentialSpec::Zero
            | PotentialSpec::PowerTail { .. }
            | PotentialSpec::GaussianWell { .. }
            | PotentialSpec::CompactBump { .. } => true,
            PotentialSpec::AnnulusTail { eps: EpsRule::Constant { .. }, .. } => true,
            _ => false,
        }
    }

    pub fn sign(&self) -> Sign {
        let by = |c: f64| {
            if c >= 0.0 {
                Sign::Nonnegative
            } else {
                Sign::Nonpositive
            }
        };
        match self {
            PotentialSpec::Zero => Sign::Nonnegative,
            PotentialSpec::PowerTail { kappa, .. } | PotentialSpec::AnnulusTail { kappa, .. } => by(*kappa),
            PotentialSpec::GaussianWell { depth, .. } => by(-depth),
            PotentialSpec::CompactBump { height, .. } => by(*height),
            PotentialSpec::Sampled { values } => {
                if values.iter().all(|&v| v >= 0.0) {
                    Sign::Nonnegative
                } else if values.iter().all(|&v| v <= 0.0) {
                    Sign::Nonpositive
                } else {
                    Sign::Indefinite
                }
            }
        }
    }

    /// The same family with every value negated.
    pub fn mirrored(&self) -> PotentialSpec {
        match self {
            PotentialSpec::Zero => PotentialSpec::Zero,
            PotentialSpec::PowerTail { kappa, gamma } => PotentialSpec::PowerTail { kappa: -kappa, gamma: *gamma },
            PotentialSpec::AnnulusTail { kappa, eps } => PotentialSpec::AnnulusTail { kappa: -kappa, eps: eps.clone() },
            PotentialSpec::GaussianWell { depth, width } => PotentialSpec::GaussianWell { depth: -depth, width: *width },
            PotentialSpec::CompactBump { radius, height } => PotentialSpec::CompactBump { radius: *radius, height: -height },
            PotentialSpec::Sampled { values } => PotentialSpec::Sampled { values: values.iter().map(|v| -v).collect() },
        }
    }

    pub fn scaled(&self, c: f64) -> PotentialSpec {
        match self {
            PotentialSpec::Zero => PotentialSpec::Zero,
            PotentialSpec::PowerTail { kappa, gamma } => PotentialSpec::PowerTail { kappa: c * kappa, gamma: *gamma },
            PotentialSpec::AnnulusTail { kappa, eps } => PotentialSpec::AnnulusTail { kappa: c * kappa, eps: eps.clone() },
            PotentialSpec::GaussianWell { depth, width } => PotentialSpec::GaussianWell { depth: c * depth, width: *width },
            PotentialSpec::CompactBump { radius, height } => PotentialSpec::CompactBump { radius: *radius, height: c * height },
            PotentialSpec::Sampled { values } => PotentialSpec::Sampled { values: values.iter().map(|v| c * v).collect() },
        }
    }

    /// |V| as a potential of the same shape.
    pub fn abs(&self, grid: &GridSpec) -> Result<PotentialSpec> {
        Ok(PotentialSpec::Sampled { values: evaluate_real(self, grid)?.into_iter().map(f64::abs).collect() })
    }
}

/// V sampled on the grid as real values.
pub fn evaluate_real(v: &PotentialSpec, grid: &GridSpec) -> Result<Vec<f64>> {
    if let PotentialSpec::Sampled { values } = v {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "sampled potential has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("sampled potential has non-finite values".into()));
        }
        return Ok(values.clone());
    }
    Ok((0..grid.len())
        .map(|i| {
            let x = grid.position(i);
            v.value_at(&x[..grid.dim]).expect("analytic potential")
        })
        .collect())
}

/// V sampled on the grid as a physical field.
pub fn evaluate(v: &PotentialSpec, grid: &GridSpec) -> Result<Field> {
    let vals = evaluate_real(v, grid)?;
    Field::new(*grid, vals.into_iter().map(|a| C64::new(a, 0.0)).collect(), crate::grid::Space::Physical)
}

/// Lebesgue exponent of the ball-sup norm: n/s below n/2, 2 above, 2 + δ_p at s = n/2.
pub fn choose_p(s: f64, dim: usize, delta_p: f64) -> f64 {
    let n = dim as f64;
    if s < n / 2.0 {
        n / s
    } else if s > n / 2.0 {
        2.0
    } else {
        2.0 + delta_p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusSup {
    pub value: f64,
    /// Some unit ball left the domain.
    pub truncated: bool,
}

/// Lattice offsets z with |z| ≤ 1 and their quadrature weights (½ on the sphere).
fn ball_offsets(grid: &GridSpec) -> Vec<([i64; 3], f64)> {
    let h = grid.h();
    let m = (1.0 / h).ceil() as i64;
    let mut out = vec![];
    let span = |a: usize| if a < grid.dim { -m..=m } else { 0..=0 };
    for a in span(0) {
        for b in span(1) {
            for c in span(2) {
                let r2 = ((a * a + b * b + c * c) as f64) * h * h;
                if (r2 - 1.0).abs() < 1e-12 {
                    out.push(([a, b, c], 0.5));
                } else if r2 < 1.0 {
                    out.push(([a, b, c], 1.0));
                }
            }
        }
    }
    out
}

fn ball_norm(absp: &[f64], grid: &GridSpec, center: [usize; 3], offsets: &[([i64; 3], f64)], p: f64) -> (f64, bool) {
    let n = grid.points as i64;
    let mut acc = 0.0;
    let mut truncated = false;
    'outer: for (off, w) in offsets {
        let mut ix = [0usize; 3];
        for a in 0..grid.dim {
            let k = center[a] as i64 + off[a];
            if k < 0 || k >= n {
                truncated = true;
                continue 'outer;
            }
            ix[a] = k as usize;
        }
        acc += w * absp[grid.ravel(&ix)];
    }
    ((acc * grid.cell_volume()).powf(1.0 / p), truncated)
}

/// sup_{y ∈ X̄_j} ‖V(· + y)‖_{L^p(B(1))}, by sweeping cell centers with the given stride.
pub fn annulus_m_sweep(v: &PotentialSpec, j: usize, p: f64, grid: &GridSpec, stride: usize) -> Result<AnnulusSup> {
    let vals = evaluate_real(v, grid)?;
    let absp: Vec<f64> = vals.iter().map(|a| a.abs().powf(p)).collect();
    let offsets = ball_offsets(grid);
    let (lo, hi) = (dyadic_radius(j - 1), dyadic_radius(j));
    let radii = grid.radii();
    let stride = stride.max(1);
    let centers: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let ix = grid.unravel(i);
            ix[..grid.dim].iter().all(|&a| a % stride == 0) && radii[i] >= lo && radii[i] <= hi
        })
        .collect();
    let best = centers
        .par_iter()
        .map(|&c| ball_norm(&absp, grid, grid.unravel(c), &offsets, p))
        .reduce(|| (0.0, false), |a, b| (a.0.max(b.0), a.1 || b.1));
    Ok(AnnulusSup { value: best.0, truncated: best.1 })
}

/// M_j with the radial shortcut when |V| is radially nonincreasing (single center at |y| = R_{j−1}).
pub fn annulus_m(v: &PotentialSpec, j: usize, p: f64, grid: &GridSpec, stride: usize) -> Result<AnnulusSup> {
    if j == 0 {
        return Err(Error::Domain("annulus index starts at 1".into()));
    }
    if v.is_radial_monotone() {
        let r = dyadic_radius(j - 1);
        let q = (r + grid.half_width) / grid.h();
        if (q - q.round()).abs() < 1e-9 && (q.round() as usize) < grid.points {
            let mut center = [grid.points / 2; 3];
            center[0] = q.round() as usize;
            let vals = evaluate_real(v, grid)?;
            let absp: Vec<f64> = vals.iter().map(|a| a.abs().powf(p)).collect();
            let (value, truncated) = ball_norm(&absp, grid, center, &ball_offsets(grid), p);
            return Ok(AnnulusSup { value, truncated });
        }
    }
    annulus_m_sweep(v, j, p, grid, stride)
}

/// Verdict thresholds on the fitted tail exponent of R_j M_j.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailThresholds {
    /// short_range iff slope < this (and fit quality holds)
    pub short_below: f64,
    /// not_short_range iff slope ≥ this
    pub not_short_at_least: f64,
    pub r2_min: f64,
    pub min_points: usize,
}

impl Default for TailThresholds {
    fn default() -> Self {
        Self { short_below: -0.1, not_short_at_least: -0.03, r2_min: 0.9, min_points: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeVerdict {
    ShortRange,
    NotShortRange,
    Inconclusive,
}

impl RangeVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            RangeVerdict::ShortRange => "short_range",
            RangeVerdict::NotShortRange => "not_short_range",
            RangeVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// Classifies a positive series by the log-log slope of its tail against R_j.
pub fn classify_tail(radii: &[f64], terms: &[f64], th: &TailThresholds) -> (RangeVerdict, Option<LineFit>) {
    if radii.len() < th.min_points {
        return (RangeVerdict::Inconclusive, None);
    }
    if terms.iter().all(|&t| t == 0.0) {
        return (RangeVerdict::ShortRange, None);
    }
    let (rx, ty): (Vec<f64>, Vec<f64>) = radii.iter().zip(terms).filter(|(_, &t)| t > 0.0).map(|(r, t)| (*r, *t)).unzip();
    if rx.len() < th.min_points {
        return (RangeVerdict::Inconclusive, None);
    }
    let Some(fit) = fit_loglog(&rx, &ty) else {
        return (RangeVerdict::Inconclusive, None);
    };
    let verdict = if fit.slope >= th.not_short_at_least {
        RangeVerdict::NotShortRange
    } else if fit.slope < th.short_below && fit.r2 >= th.r2_min {
        RangeVerdict::ShortRange
    } else {
        RangeVerdict::Inconclusive
    };
    (verdict, Some(fit))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortRangeReport {
    pub p: f64,
    /// M_j for j = 1..=J_max−1
    pub m: Vec<f64>,
    pub r_m: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub truncated: Vec<bool>,
    /// first annulus of the fit window
    pub fit_from: usize,
    pub fit: Option<LineFit>,
    pub verdict: RangeVerdict,
    pub thresholds: TailThresholds,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortRangeOptions {
    pub delta_p: f64,
    pub stride: usize,
    pub thresholds: TailThresholds,
}

impl ShortRangeOptions {
    pub fn for_grid(grid: &GridSpec) -> Self {
        Self { delta_p: 0.1, stride: if grid.dim == 1 { 1 } else { 4 }, thresholds: TailThresholds::default() }
    }
}

/// M_j over j = 1..J_max−1, partial sums, and the tail-exponent verdict over the last half.
pub fn shortrange_series(v: &PotentialSpec, grid: &GridSpec, s: f64, opts: &ShortRangeOptions) -> Result<ShortRangeReport> {
    let layout = DyadicLayout::new(*grid);
    let p = choose_p(s, grid.dim, opts.delta_p);
    let jn = layout.j_max().saturating_sub(1);
    let sups: Vec<AnnulusSup> = (1..=jn).map(|j| annulus_m(v, j, p, grid, opts.stride)).collect::<Result<_>>()?;
    let m: Vec<f64> = sups.iter().map(|a| a.value).collect();
    let r_m: Vec<f64> = m.iter().enumerate().map(|(i, mj)| dyadic_radius(i + 1) * mj).collect();
    let partial_sums = r_m
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect();
    let fit_from = jn / 2 + 1;
    let idx: Vec<usize> = (fit_from..=jn).collect();
    let radii: Vec<f64> = idx.iter().map(|&j| dyadic_radius(j)).collect();
    let terms: Vec<f64> = idx.iter().map(|&j| r_m[j - 1]).collect();
    let (verdict, fit) = classify_tail(&radii, &terms, &opts.thresholds);
    Ok(ShortRangeReport {
        p,
        m,
        r_m,
        partial_sums,
        truncated: sups.iter().map(|a| a.truncated).collect(),
        fit_from,
        fit,
        verdict,
        thresholds: opts.thresholds,
    })
}

/// Σ R_j^{−ε_j} terms over j = from..=to.
pub fn threshold_proxy_terms(rule: &EpsRule, from: usize, to: usize) -> Vec<f64> {
    (from..=to).map(|j| dyadic_radius(j).powf(-rule.eps(j))).collect()
}

/// ‖χ_j V J_{−s} χ_k‖_{L¹(X_k)→L²(X_j)} as the largest kernel-column norm over cells of X_k.
pub fn offdiag_block_norm(v: &PotentialSpec, j: usize, k: usize, s: f64, grid: &GridSpec) -> Result<f64> {
    if j.abs_diff(k) < 2 {
        return Err(Error::Domain(format!("off-diagonal bound needs |j − k| ≥ 2, got j={j}, k={k}")));
    }
    let layout = DyadicLayout::new(*grid);
    if j.max(k) > layout.j_max() || j.min(k) == 0 {
        return Err(Error::Domain(format!("annuli ({j}, {k}) outside 1..={}", layout.j_max())));
    }
    let vals = evaluate_real(v, grid)?;
    let kernel = bessel_kernel(grid, s);
    let kv = kernel.values();
    let xs: Vec<usize> = layout.cells(j).into_iter().filter(|&i| vals[i] != 0.0).collect();
    if xs.is_empty() {
        return Ok(0.0);
    }
    let ys = layout.cells(k);
    let n = grid.points;
    let half = n / 2;
    let best = ys
        .par_iter()
        .map(|&y| {
            let iy = grid.unravel(y);
            let mut acc = 0.0;
            for &x in &xs {
                let ix = grid.unravel(x);
                let mut d = [0usize; 3];
                for a in 0..grid.dim {
                    // kernel is stored centered at index N/2
                    d[a] = (ix[a] + n + half - iy[a]) % n;
                }
                acc += vals[x] * vals[x] * kv[grid.ravel(&d)].norm_sqr();
            }
            acc
        })
        .reduce(|| 0.0, f64::max);
    Ok((best * grid.cell_volume()).sqrt())
}
