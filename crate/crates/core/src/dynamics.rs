//! Free and interacting propagators, Cook integrands, wave-operator ladders and the drift probe.

use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::agmon::dyadic_radius;
use crate::error::{Error, Result};
use crate::grid::{fft_axes, forward, inverse, Field, GridSpec, Space, C64};
use crate::multiplier::smooth_step;
use crate::potentials::{evaluate_real, PotentialSpec, Sign};
use crate::stats::{fit_loglog, LineFit};

/// |ξ|^s on every Fourier slot.
fn symbol_power(grid: &GridSpec, s: f64) -> Vec<f64> {
    grid.xi_norms().into_iter().map(|r| r.powf(s)).collect()
}

/// e^{−itH₀}u; keeps the space tag of `u`.
pub fn free_evolve(u: &Field, t: f64, s: f64) -> Result<Field> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("order s must be positive, got {s}")));
    }
    if t == 0.0 {
        return Ok(u.clone());
    }
    let p = symbol_power(u.grid(), s);
    let phase: Vec<C64> = p.iter().map(|&a| C64::from_polar(1.0, -t * a)).collect();
    crate::multiplier::apply_symbol(&phase, u)
}

/// Strang splitting e^{−iVτ/2} e^{−iH₀τ} e^{−iVτ/2} with fixed |τ| = dt.
pub struct SplitStep {
    grid: GridSpec,
    kinetic: Vec<C64>,
    half: Vec<C64>,
    full: Vec<C64>,
    steps: usize,
}

impl SplitStep {
    /// Propagator over total signed time `t` in steps of `dt`.
    pub fn new(grid: &GridSpec, v: &[f64], s: f64, t: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::StepSize(format!("dt must be positive, got {dt}")));
        }
        let vmax = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        if vmax * dt >= 0.5 {
            return Err(Error::StepSize(format!("‖V‖∞·dt = {} ≥ 0.5", vmax * dt)));
        }
        let n = (t.abs() / dt).round();
        if (n * dt - t.abs()).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::StepSize(format!("dt = {dt} does not divide t = {t}")));
        }
        let tau = dt * t.signum();
        let norm = (grid.len() as f64).recip();
        let kinetic = symbol_power(grid, s).into_iter().map(|a| C64::from_polar(norm, -tau * a)).collect();
        let half = v.iter().map(|&a| C64::from_polar(1.0, -0.5 * tau * a)).collect();
        let full = v.iter().map(|&a| C64::from_polar(1.0, -tau * a)).collect();
        Ok(Self { grid: *grid, kinetic, half, full, steps: n as usize })
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        u.expect_space(Space::Physical)?;
        if *u.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut w = u.values().to_vec();
        if self.steps == 0 {
            return Ok(u.clone());
        }
        mul_in_place(&mut w, &self.half);
        for k in 0..self.steps {
            fft_axes(&self.grid, &mut w, FftDirection::Forward);
            mul_in_place(&mut w, &self.kinetic);
            fft_axes(&self.grid, &mut w, FftDirection::Inverse);
            mul_in_place(&mut w, if k + 1 == self.steps { &self.half } else { &self.full });
        }
        Ok(Field::from_parts(self.grid, w, Space::Physical))
    }
}

fn mul_in_place(w: &mut [C64], m: &[C64]) {
    for (a, b) in w.iter_mut().zip(m) {
        *a *= b;
    }
}

/// e^{−itH}u for H = H₀ + V by Strang splitting; `t` may be negative.
pub fn full_evolve(u: &Field, t: f64, v: &[f64], dt: f64, s: f64) -> Result<Field> {
    SplitStep::new(u.grid(), v, s, t, dt)?.apply(u)
}

/// Unit-norm packet with Fourier support in a ball around c·e₁.
#[derive(Debug, Clone)]
pub struct WavePacket {
    pub field: Field,
    pub s: f64,
    pub center: f64,
    pub sigma: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// group speed at the center frequency
    pub v0: f64,
    /// radius about the origin holding all but 1e−10 of the mass
    pub width: f64,
}

impl WavePacket {
    /// Gaussian profile e^{−|ξ−c e₁|²/(2σ²)} cut smoothly to zero at |ξ − c e₁| = nsig·σ.
    pub fn tapered_gaussian(grid: &GridSpec, s: f64, center: f64, sigma: f64, nsig: f64) -> Result<Self> {
        let reach = nsig * sigma;
        if !(center - reach > 0.0) {
            return Err(Error::InvalidParameter(format!("packet support [{}, {}] must avoid ξ = 0", center - reach, center + reach)));
        }
        if center + reach >= grid.xi_max() {
            return Err(Error::ShellOutsideNyquist { radius: center + reach, xi_max: grid.xi_max() });
        }
        let uh = Field::from_fourier_fn(*grid, |xi| {
            let mut d2 = (xi[0] - center).powi(2);
            for a in &xi[1..] {
                d2 += a * a;
            }
            let t = d2.sqrt() / reach;
            C64::new((-d2 / (2.0 * sigma * sigma)).exp() * smooth_step((1.0 - t) / 0.2), 0.0)
        });
        let u = inverse(&uh);
        let u = u.scale(C64::new(u.norm().recip(), 0.0));
        let (r_min, r_max) = (center - reach, center + reach);
        let (a, b) = (s * r_min.powf(s - 1.0), s * r_max.powf(s - 1.0));
        let width = mass_radius(&u, 1e-10);
        Ok(Self {
            field: u,
            s,
            center,
            sigma,
            r_min,
            r_max,
            v_min: a.min(b),
            v_max: a.max(b),
            v0: s * center.powf(s - 1.0),
            width,
        })
    }

    /// Largest horizon before periodic images can reach the packet: 0.8(L − width)/v_max.
    pub fn horizon(&self) -> f64 {
        0.8 * (self.field.grid().half_width - self.width) / self.v_max
    }

    pub fn check_horizon(&self, t: f64) -> Result<()> {
        let t_max = self.horizon();
        if t.abs() > t_max {
            Err(Error::TorusWrap { t, t_max, width: self.width, speed: self.v_max })
        } else {
            Ok(())
        }
    }
}

/// Smallest radius about the origin whose complement carries at most `tail` of ‖u‖².
pub fn mass_radius(u: &Field, tail: f64) -> f64 {
    let radii = u.grid().radii();
    let mut pairs: Vec<(f64, f64)> = radii.iter().zip(u.values()).map(|(&r, v)| (r, v.norm_sqr())).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for (r, m) in pairs {
        acc += m;
        if acc > tail * total {
            return r;
        }
    }
    0.0
}

/// Geometric ladder of `n` points from `a` to `b` inclusive.
pub fn geometric_ladder(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let q = (b / a).ln() / (n - 1) as f64;
    (0..n).map(|k| a * (q * k as f64).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CookThresholds {
    pub integrable_below: f64,
    pub nonintegrable_above: f64,
}

impl Default for CookThresholds {
    fn default() -> Self {
        Self { integrable_below: -1.1, nonintegrable_above: -1.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CookVerdict {
    Integrable,
    NonIntegrable,
    Undetermined,
}

impl CookVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            CookVerdict::Integrable => "integrable",
            CookVerdict::NonIntegrable => "non_integrable",
            CookVerdict::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CookProfile {
    pub times: Vec<f64>,
    /// ‖V e^{−itH₀}u‖
    pub values: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// power fit of the last half of the ladder
    pub fit: Option<LineFit>,
    pub verdict: CookVerdict,
}

/// g(t) = ‖V e^{−itH₀}u‖ on a geometric ladder from 1 to `t_max`.
pub fn cook_profile(packet: &WavePacket, v: &[f64], t_max: f64, points: usize, th: &CookThresholds) -> Result<CookProfile> {
    packet.check_horizon(t_max)?;
    let grid = *packet.field.grid();
    let uh = forward(&packet.field);
    let p = symbol_power(&grid, packet.s);
    let times = geometric_ladder(1.0, t_max, points.max(2));
    let values: Vec<f64> = times
        .iter()
        .map(|&t| {
            let mut w = uh.clone();
            for (a, &b) in w.values_mut().iter_mut().zip(&p) {
                *a *= C64::from_polar(1.0, -t * b);
            }
            inverse(&w).mul_real(v).norm()
        })
        .collect();
    let mut cumulative = vec![0.0; times.len()];
    for k in 1..times.len() {
        cumulative[k] = cumulative[k - 1] + 0.5 * (values[k] + values[k - 1]) * (times[k] - times[k - 1]);
    }
    let from = times.len() / 2;
    let fit = fit_loglog(&times[from..], &values[from..]);
    let verdict = if values.iter().all(|&g| g == 0.0) {
        CookVerdict::Integrable
    } else {
        match fit {
            Some(f) if f.slope < th.integrable_below => CookVerdict::Integrable,
            Some(f) if f.slope > th.nonintegrable_above => CookVerdict::NonIntegrable,
            _ => CookVerdict::Undetermined,
        }
    };
    Ok(CookProfile { times, values, cumulative, fit, verdict })
}

/// Ω(T)u = e^{iTH} e^{−iTH₀} u.
pub fn wave_operator_apply(u: &Field, t: f64, v: &[f64], dt: f64, s: f64) -> Result<Field> {
    full_evolve(&free_evolve(u, t, s)?, -t, v, dt, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveOpOptions {
    pub tol_w: f64,
    /// consecutive drift ratio at or above which the ladder counts as diverging
    pub ratio: f64,
    /// intertwining shift
    pub tau: f64,
}

impl Default for WaveOpOptions {
    fn default() -> Self {
        Self { tol_w: 1e-3, ratio: 0.9, tau: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftVerdict {
    Converged,
    Diverging,
    Undetermined,
}

impl DriftVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            DriftVerdict::Converged => "converged",
            DriftVerdict::Diverging => "diverging",
            DriftVerdict::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScatteringRecord {
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    /// ‖Ω(T_{k+1})u − Ω(T_k)u‖
    pub drifts: Vec<f64>,
    pub isometry_residual: f64,
    pub intertwining_residual: f64,
    pub verdict: DriftVerdict,
}

/// Drift magnitude indistinguishable from f64 roundoff on a unit-norm packet.
pub const DRIFT_FLOOR: f64 = 1e-12;

pub fn drift_verdict(drifts: &[f64], opts: &WaveOpOptions) -> DriftVerdict {
    let Some(&last) = drifts.last() else {
        return DriftVerdict::Undetermined;
    };
    // drifts at roundoff level count as zero and never break monotonicity
    let decreasing = drifts.windows(2).all(|w| w[1] < w[0] || w[1] <= DRIFT_FLOOR);
    if decreasing && last < opts.tol_w {
        return DriftVerdict::Converged;
    }
    let tail_ratio = if drifts.len() >= 2 { last / drifts[drifts.len() - 2] } else { f64::NAN };
    if last >= opts.tol_w && tail_ratio >= opts.ratio {
        DriftVerdict::Diverging
    } else {
        DriftVerdict::Undetermined
    }
}

/// Cauchy drift of Ω(T)u along the ladder, with isometry and intertwining residuals at the largest T.
pub fn wave_operator_estimate(packet: &WavePacket, v: &[f64], ladder: &[f64], dt: f64, opts: &WaveOpOptions) -> Result<ScatteringRecord> {
    let s = packet.s;
    let t_top = ladder.iter().cloned().fold(0.0, f64::max);
    packet.check_horizon(t_top + opts.tau)?;
    let u = &packet.field;
    let snapshots: Vec<Field> = ladder.iter().map(|&t| wave_operator_apply(u, t, v, dt, s)).collect::<Result<_>>()?;
    let drifts: Vec<f64> = snapshots.windows(2).map(|w| w[1].sub(&w[0]).map(|d| d.norm())).collect::<Result<_>>()?;
    let last = snapshots.last().ok_or_else(|| Error::InvalidParameter("empty T ladder".into()))?;
    let isometry_residual = (last.norm() - 1.0).abs();
    // e^{iτH}Ω(T)u = e^{i(T+τ)H}e^{−iTH₀}u and Ω(T)e^{iτH₀}u = e^{iTH}e^{−i(T−τ)H₀}u
    let lhs = full_evolve(last, -opts.tau, v, dt, s)?;
    let rhs = wave_operator_apply(&free_evolve(u, -opts.tau, s)?, t_top, v, dt, s)?;
    let intertwining_residual = lhs.sub(&rhs)?.norm();
    let verdict = drift_verdict(&drifts, opts);
    Ok(ScatteringRecord { times: ladder.to_vec(), snapshots, drifts, isometry_residual, intertwining_residual, verdict })
}

/// u + i∫₀^T e^{itH₀} V e^{−itH₀} u dt by the trapezoid rule on the dt grid.
pub fn born_first_order(u: &Field, v: &[f64], s: f64, t: f64, dt: f64) -> Result<Field> {
    let n = (t / dt).round() as usize;
    if n == 0 || ((n as f64) * dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::StepSize(format!("dt = {dt} does not divide T = {t}")));
    }
    let grid = *u.grid();
    let p = symbol_power(&grid, s);
    let uh = forward(u);
    let mut acc = vec![C64::new(0.0, 0.0); grid.len()];
    for k in 0..=n {
        let tk = k as f64 * dt;
        let w = if k == 0 || k == n { 0.5 * dt } else { dt };
        let mut a = uh.clone();
        for (x, &b) in a.values_mut().iter_mut().zip(&p) {
            *x *= C64::from_polar(1.0, -tk * b);
        }
        let vb = forward(&inverse(&a).mul_real(v));
        for ((acc_i, x), &b) in acc.iter_mut().zip(vb.values()).zip(&p) {
            *acc_i += x * C64::from_polar(w, tk * b);
        }
    }
    let mut out = uh;
    for (o, a) in out.values_mut().iter_mut().zip(acc) {
        *o += C64::new(0.0, 1.0) * a;
    }
    Ok(inverse(&out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockDrift {
    pub j: usize,
    pub t_from: f64,
    pub t_to: f64,
    /// ∫ |⟨V u_t, u_t⟩| dt over the block window
    pub d: f64,
    /// R_j^{−ε_j}
    pub proxy: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct NonexistenceReport {
    pub blocks: Vec<BlockDrift>,
    pub cumulative: Vec<f64>,
}

impl NonexistenceReport {
    /// max/min of D_j/P_j over blocks with j ≥ `from`.
    pub fn ratio_spread(&self, from: usize) -> f64 {
        let r: Vec<f64> = self.blocks.iter().filter(|b| b.j >= from).map(|b| b.ratio).collect();
        let hi = r.iter().cloned().fold(f64::MIN, f64::max);
        let lo = r.iter().cloned().fold(f64::MAX, f64::min);
        hi / lo
    }

    /// D_{j+1}/D_j for consecutive blocks.
    pub fn increment_ratios(&self) -> Vec<f64> {
        self.blocks.windows(2).map(|w| w[1].d / w[0].d).collect()
    }
}

/// Per-block drift D_j over windows [1.25R_{j−1}, 0.8R_j]/v₀ for blocks j ∈ [j1, j2].
pub fn nonexistence_drift(packet: &WavePacket, v: &PotentialSpec, j1: usize, j2: usize, dt_q: f64) -> Result<NonexistenceReport> {
    let rule = match v {
        PotentialSpec::AnnulusTail { eps, .. } => eps.clone(),
        PotentialSpec::Zero => crate::potentials::EpsRule::Constant { value: 0.0 },
        _ => return Err(Error::Domain("drift probe needs an annulus_tail potential".into())),
    };
    if v.sign() == Sign::Indefinite {
        return Err(Error::Domain("drift probe needs a sign-definite potential".into()));
    }
    if !(packet.v_min / packet.v0 > 0.8 && packet.v_max / packet.v0 < 1.25) {
        return Err(Error::Domain(format!(
            "group-speed band [{}, {}] leaves the block windows (needs v/v₀ ∈ (0.8, 1.25))",
            packet.v_min, packet.v_max
        )));
    }
    if j1 < 2 || j2 < j1 {
        return Err(Error::InvalidParameter(format!("block range [{j1}, {j2}] must satisfy 2 ≤ j1 ≤ j2")));
    }
    let t_last = 0.8 * dyadic_radius(j2) / packet.v0;
    packet.check_horizon(t_last)?;
    let grid = *packet.field.grid();
    let vals = evaluate_real(v, &grid)?;
    let p = symbol_power(&grid, packet.s);
    let uh = forward(&packet.field);
    let h = grid.cell_volume();
    let density = |t: f64| -> f64 {
        let mut w = uh.clone();
        for (a, &b) in w.values_mut().iter_mut().zip(&p) {
            *a *= C64::from_polar(1.0, -t * b);
        }
        let ut = inverse(&w);
        (ut.values().iter().zip(&vals).map(|(z, &a)| a * z.norm_sqr()).sum::<f64>() * h).abs()
    };
    let mut blocks = vec![];
    for j in j1..=j2 {
        let (a, b) = (1.25 * dyadic_radius(j - 1) / packet.v0, 0.8 * dyadic_radius(j) / packet.v0);
        let n = (((b - a) / dt_q).ceil() as usize).max(16);
        let step = (b - a) / n as f64;
        let mut d = 0.0;
        for k in 0..=n {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            d += w * density(a + k as f64 * step);
        }
        d *= step;
        let proxy = dyadic_radius(j).powf(-rule.eps(j));
        blocks.push(BlockDrift { j, t_from: a, t_to: b, d, proxy, ratio: d / proxy });
    }
    let cumulative = blocks
        .iter()
        .scan(0.0, |acc, b| {
            *acc += b.d;
            Some(*acc)
        })
        .collect();
    Ok(NonexistenceReport { blocks, cumulative })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationSample {
    pub t: f64,
    /// L² mass fraction outside v_min|t|/2 < |x| < 2v_max|t|
    pub outside: f64,
}

pub fn localization_check(packet: &WavePacket, t: f64) -> Result<LocalizationSample> {
    packet.check_horizon(t)?;
    let ut = free_evolve(&packet.field, t, packet.s)?;
    let (lo, hi) = (0.5 * packet.v_min * t.abs(), 2.0 * packet.v_max * t.abs());
    let radii = ut.grid().radii();
    let total: f64 = ut.values().iter().map(|z| z.norm_sqr()).sum();
    let outside: f64 = ut
        .values()
        .iter()
        .zip(&radii)
        .filter(|(_, &r)| !(r > lo && r < hi))
        .map(|(z, _)| z.norm_sqr())
        .sum();
    Ok(LocalizationSample { t, outside: outside / total })
}

/// Outside-cone fractions on a time ladder and their power fit.
pub fn localization_profile(packet: &WavePacket, times: &[f64]) -> Result<(Vec<LocalizationSample>, Option<LineFit>)> {
    let samples: Vec<LocalizationSample> = times.iter().map(|&t| localization_check(packet, t)).collect::<Result<_>>()?;
    let ts: Vec<f64> = samples.iter().map(|a| a.t).collect();
    let fs: Vec<f64> = samples.iter().map(|a| a.outside).collect();
    Ok((samples, fit_loglog(&ts, &fs)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{evaluate_real, EpsRule};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(grid: GridSpec, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..grid.len()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        Field::new(grid, v, Space::Physical).unwrap()
    }

    #[test]
    fn free_unitary_and_group_law() {
        let g = GridSpec::new(1, 16.0, 256).unwrap();
        let u = random_field(g, 1);
        assert_eq!(free_evolve(&u, 0.0, 1.5).unwrap(), u);
        let a = free_evolve(&u, 0.7, 1.5).unwrap();
        assert!((a.norm() - u.norm()).abs() < 1e-12 * u.norm());
        let ab = free_evolve(&a, 1.1, 1.5).unwrap();
        let c = free_evolve(&u, 1.8, 1.5).unwrap();
        assert!(ab.rel_distance(&c).unwrap() < 1e-12);
        let back = free_evolve(&a, -0.7, 1.5).unwrap();
        assert!(back.rel_distance(&u).unwrap() < 1e-12);
    }

    #[test]
    fn schrodinger_gaussian() {
        // e^{−it(−Δ)} e^{−x²/2} = (1+2it)^{−1/2} e^{−x²/(2(1+2it))}
        let g = GridSpec::new(1, 64.0, 2048).unwrap();
        let u = Field::from_real_fn(g, |x| (-x[0] * x[0] / 2.0).exp());
        let t = 1.3;
        let out = free_evolve(&u, t, 2.0).unwrap();
        let a = C64::new(1.0, 2.0 * t);
        let err = (0..g.len())
            .map(|i| {
                let x = g.coord(i);
                (out.values()[i] - a.powf(-0.5) * (-(x * x) / (2.0 * a)).exp()).norm()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn half_wave_translates() {
        let g = GridSpec::new(1, 64.0, 2048).unwrap();
        let p = WavePacket::tapered_gaussian(&g, 1.0, 3.0, 0.5, 4.6).unwrap();
        let t = 7.25;
        let out = free_evolve(&p.field, t, 1.0).unwrap();
        let shift = (t / g.h()).round() as usize;
        let n = g.points;
        let err = (0..n).map(|i| (out.values()[(i + shift) % n] - p.field.values()[i]).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn split_step_reduces_to_free() {
        let g = GridSpec::new(1, 16.0, 256).unwrap();
        let u = random_field(g, 2);
        let a = full_evolve(&u, 1.0, &vec![0.0; 256], 0.05, 0.8).unwrap();
        let b = free_evolve(&u, 1.0, 0.8).unwrap();
        assert!(a.rel_distance(&b).unwrap() < 1e-12);
    }

    #[test]
    fn split_step_guards() {
        let g = GridSpec::new(1, 16.0, 64).unwrap();
        let u = random_field(g, 2);
        assert!(matches!(full_evolve(&u, 1.0, &vec![20.0; 64], 0.05, 2.0), Err(Error::StepSize(_))));
        assert!(matches!(full_evolve(&u, 1.0, &vec![0.0; 64], 0.3, 2.0), Err(Error::StepSize(_))));
    }

    #[test]
    fn split_step_unitary_and_adjoint() {
        let g = GridSpec::new(1, 32.0, 512).unwrap();
        let v = evaluate_real(&PotentialSpec::GaussianWell { depth: 3.0, width: 1.5 }, &g).unwrap();
        let u = random_field(g, 3);
        let w = random_field(g, 4);
        let t = 2.0;
        let eu = full_evolve(&u, t, &v, 0.01, 2.0).unwrap();
        assert!((eu.norm() - u.norm()).abs() < 1e-10 * t * u.norm());
        let ew = full_evolve(&w, -t, &v, 0.01, 2.0).unwrap();
        let lhs = eu.inner(&w).unwrap();
        let rhs = u.inner(&ew).unwrap();
        assert!((lhs - rhs).norm() < 1e-8);
    }

    #[test]
    fn split_step_second_order() {
        let g = GridSpec::new(1, 32.0, 512).unwrap();
        let v = evaluate_real(&PotentialSpec::GaussianWell { depth: 3.0, width: 1.5 }, &g).unwrap();
        let u = Field::from_real_fn(g, |x| (-(x[0] - 1.0).powi(2)).exp());
        let t = 1.0;
        let a = full_evolve(&u, t, &v, 0.04, 2.0).unwrap();
        let b = full_evolve(&u, t, &v, 0.02, 2.0).unwrap();
        let c = full_evolve(&u, t, &v, 0.01, 2.0).unwrap();
        let order = (a.sub(&b).unwrap().norm() / b.sub(&c).unwrap().norm()).log2();
        assert!((1.8..=2.2).contains(&order), "order {order}");
    }

    #[test]
    fn packet_invariants() {
        let g = GridSpec::new(1, 256.0, 4096).unwrap();
        let p = WavePacket::tapered_gaussian(&g, 2.0, 1.2, 0.2, 4.6).unwrap();
        assert!((p.field.norm() - 1.0).abs() < 1e-12);
        let uh = p.field.to_fourier().unwrap();
        let outside: f64 = (0..g.len())
            .filter(|&i| {
                let k = g.wavevector(i)[0];
                k < p.r_min || k > p.r_max
            })
            .map(|i| uh.values()[i].norm_sqr())
            .sum();
        assert!(outside.sqrt() < 1e-10 * uh.norm() * (2.0 * PI / g.dxi()).sqrt());
        assert!(p.v_min < p.v0 && p.v0 < p.v_max);
        let q = WavePacket::tapered_gaussian(&g, 0.5, 9.0, 1.8, 4.6).unwrap();
        assert!(q.v_min < q.v_max && (q.v_max - 0.5 * q.r_min.powf(-0.5)).abs() < 1e-14);
        assert!(WavePacket::tapered_gaussian(&g, 2.0, 0.5, 0.2, 4.6).is_err());
    }

    #[test]
    fn torus_guard_fires() {
        let g = GridSpec::new(1, 64.0, 1024).unwrap();
        let p = WavePacket::tapered_gaussian(&g, 1.0, 3.0, 0.5, 4.6).unwrap();
        let v = vec![0.0; g.len()];
        let e = cook_profile(&p, &v, 1000.0, 8, &CookThresholds::default()).unwrap_err();
        assert!(matches!(e, Error::TorusWrap { .. }));
    }

    #[test]
    fn cook_zero_potential() {
        let g = GridSpec::new(1, 64.0, 1024).unwrap();
        let p = WavePacket::tapered_gaussian(&g, 1.0, 3.0, 0.5, 4.6).unwrap();
        let prof = cook_profile(&p, &vec![0.0; g.len()], 20.0, 8, &CookThresholds::default()).unwrap();
        assert!(prof.values.iter().all(|&a| a == 0.0));
        assert_eq!(prof.verdict, CookVerdict::Integrable);
        assert!(prof.cumulative.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn wave_operator_zero_potential() {
        let g = GridSpec::new(1, 64.0, 1024).unwrap();
        let p = WavePacket::tapered_gaussian(&g, 1.0, 3.0, 0.5, 4.6).unwrap();
        let rec = wave_operator_estimate(&p, &vec![0.0; g.len()], &[2.0, 4.0, 8.0], 0.05, &WaveOpOptions::default()).unwrap();
        for snap in &rec.snapshots {
            assert!(snap.rel_distance(&p.field).unwrap() < 1e-12);
        }
        assert_eq!(rec.verdict, DriftVerdict::Converged);
        assert!(rec.intertwining_residual < 1e-12 && rec.isometry_residual < 1e-12);
    }

    #[test]
    fn born_term_matches_weak_coupling() {
        let g = GridSpec::new(1, 128.0, 2048).unwrap();
        let p = WavePacket::tapered_gaussian(&g, 1.0, 3.0, 0.5, 4.6).unwrap();
        let t = 8.0;
        let dt = 0.02;
        let mut res = vec![];
        for height in [0.1, 0.05] {
            let v = evaluate_real(&PotentialSpec::CompactBump { radius: 0.5, height }, &g).unwrap();
            let om = wave_operator_apply(&p.field, t, &v, dt, 1.0).unwrap();
            let born = born_first_order(&p.field, &v, 1.0, t, dt).unwrap();
            res.push(om.sub(&born).unwrap().norm());
            // Ω(T)u − u is linear in the coupling at leading order
            let lin = om.sub(&p.field).unwrap().norm();
            assert!(res.last().unwrap() < &(0.2 * lin));
        }
        let ratio = res[0] / res[1];
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn coupling_doubles_departure() {
        let g = GridSpec::new(1, 128.0, 2048).unwrap();
        let p = WavePacket::tapered_gaussian(&g, 1.0, 3.0, 0.5, 4.6).unwrap();
        let d = |k: f64| {
            let v = evaluate_real(&PotentialSpec::CompactBump { radius: 0.5, height: k }, &g).unwrap();
            wave_operator_apply(&p.field, 8.0, &v, 0.02, 1.0).unwrap().sub(&p.field).unwrap().norm()
        };
        let r = d(0.02) / d(0.01);
        assert!((r - 2.0).abs() < 0.2, "ratio {r}");
    }

    #[test]
    fn drift_verdicts() {
        let o = WaveOpOptions::default();
        assert_eq!(drift_verdict(&[1e-2, 5e-3, 1e-4], &o), DriftVerdict::Converged);
        assert_eq!(drift_verdict(&[1e-2, 2e-2, 3e-2], &o), DriftVerdict::Diverging);
        assert_eq!(drift_verdict(&[1e-2, 5e-3, 4e-3], &o), DriftVerdict::Undetermined);
    }

    #[test]
    fn nonexistence_zero_and_mirror() {
        let g = GridSpec::new(1, 256.0, 4096).unwrap();
        let p = WavePacket::tapered_gaussian(&g, 1.0, 3.0, 0.5, 4.6).unwrap();
        let z = nonexistence_drift(&p, &PotentialSpec::Zero, 2, 5, 0.25).unwrap();
        assert!(z.blocks.iter().all(|b| b.d == 0.0));
        let v = PotentialSpec::AnnulusTail { kappa: 1.0, eps: EpsRule::Constant { value: 0.0 } };
        let a = nonexistence_drift(&p, &v, 2, 5, 0.25).unwrap();
        let b = nonexistence_drift(&p, &v.mirrored(), 2, 5, 0.25).unwrap();
        for (x, y) in a.blocks.iter().zip(&b.blocks) {
            assert!((x.d - y.d).abs() < 1e-10 * x.d);
        }
        assert!(nonexistence_drift(&p, &PotentialSpec::GaussianWell { depth: 1.0, width: 1.0 }, 2, 5, 0.25).is_err());
        let slow = WavePacket::tapered_gaussian(&g, 2.0, 1.0, 0.2, 4.6).unwrap();
        assert!(nonexistence_drift(&slow, &v, 2, 5, 0.25).is_err());
    }

    #[test]
    fn localization_decays() {
        let g = GridSpec::new(1, 1024.0, 16384).unwrap();
        let p = WavePacket::tapered_gaussian(&g, 2.0, 2.0, 0.3, 4.6).unwrap();
        let t0 = localization_check(&p, 0.0).unwrap();
        assert!(t0.outside > 0.9);
        let times = geometric_ladder(8.0, 64.0, 4);
        let (samples, fit) = localization_profile(&p, &times).unwrap();
        assert!(samples.windows(2).all(|w| w[1].outside < w[0].outside));
        assert!(fit.unwrap().slope < -3.0, "{samples:?}");
    }
}
