//! One runner per experiment kind. Each produces rows in a fixed order plus verdict entries that
//! cite the thresholds they were judged against.

use std::collections::BTreeMap;

use fracscat_core::dynamics::{
    born_first_order, cook_profile, nonexistence_drift, wave_operator_apply, wave_operator_estimate, WavePacket,
};
use fracscat_core::eigen::{
    decay_profile, eigen_characterization_residual, eigen_solve, lambda_scan, EigenOptions, EigenReport,
};
use fracscat_core::potentials::{evaluate_real, shortrange_series, PotentialSpec, ShortRangeOptions};
use fracscat_core::resolvent::{
    completeness_battery, distorted_ft_1d, lap_battery, lap_sweep, shell_band_field, stone_jump_residual,
    weighted_lap_check, SpectralGrid,
};
use fracscat_core::stats::fit_loglog;
use fracscat_core::{Field, GridSpec, Result, C64};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{self, Experiment, GridConfig, PacketConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub cell: String,
    pub metric: String,
    pub value: f64,
    /// empty when the metric carries no verdict
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictEntry {
    pub cell: String,
    pub metric: String,
    pub value: f64,
    pub verdict: String,
    pub thresholds: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub verdicts: Vec<VerdictEntry>,
    /// solver warnings that did not abort the run
    pub flags: Vec<String>,
}

impl Outcome {
    fn row(&mut self, cell: &str, metric: &str, value: f64) {
        self.rows.push(Row { cell: cell.into(), metric: metric.into(), value, verdict: String::new() });
    }

    /// A row that also enters the summary.
    fn judged(&mut self, cell: &str, metric: &str, value: f64, verdict: &str, thresholds: &[(&str, f64)]) {
        self.rows.push(Row { cell: cell.into(), metric: metric.into(), value, verdict: verdict.into() });
        self.verdicts.push(VerdictEntry {
            cell: cell.into(),
            metric: metric.into(),
            value,
            verdict: verdict.into(),
            thresholds: thresholds.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        });
    }

    fn extend(&mut self, other: Outcome) {
        self.rows.extend(other.rows);
        self.verdicts.extend(other.verdicts);
        self.flags.extend(other.flags);
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn grid_of(g: &GridConfig) -> Result<GridSpec> {
    GridSpec::new(g.dim, g.half_width, g.points)
}

fn packet_of(grid: &GridSpec, s: f64, p: &PacketConfig) -> Result<WavePacket> {
    WavePacket::tapered_gaussian(grid, s, p.center, p.sigma, p.nsig)
}

/// Runs every order of the experiment on the worker pool; assembly stays in list order.
fn per_order(orders: &[f64], f: impl Fn(f64) -> Result<Outcome> + Sync) -> Result<Outcome> {
    let parts: Vec<Outcome> = orders.par_iter().map(|&s| f(s)).collect::<Result<_>>()?;
    let mut out = Outcome::default();
    for p in parts {
        out.extend(p);
    }
    Ok(out)
}

pub fn run(e: &Experiment) -> Result<Outcome> {
    match e {
        Experiment::Shortrange(c) => shortrange(c),
        Experiment::Cook(c) => cook(c),
        Experiment::Waveop(c) => waveop(c),
        Experiment::Nonexistence(c) => nonexistence(c),
        Experiment::Lap(c) => lap(c),
        Experiment::WeightedLap(c) => weighted_lap(c),
        Experiment::Stone(c) => stone(c),
        Experiment::Eigen(c) => eigen(c),
        Experiment::Decay(c) => decay(c),
        Experiment::Completeness(c) => completeness(c),
    }
}

fn shortrange(c: &config::Shortrange) -> Result<Outcome> {
    let grid = grid_of(&c.grid)?;
    let opts = ShortRangeOptions { delta_p: c.delta_p, stride: c.stride, thresholds: c.thresholds };
    per_order(&c.s, |s| {
        let rep = shortrange_series(&c.potential, &grid, s, &opts)?;
        let mut out = Outcome::default();
        for (i, ((m, rm), sj)) in rep.m.iter().zip(&rep.r_m).zip(&rep.partial_sums).enumerate() {
            let cell = format!("s={s};j={}", i + 1);
            out.row(&cell, "M_j", *m);
            out.row(&cell, "R_jM_j", *rm);
            out.row(&cell, "S_J", *sj);
        }
        let th = &rep.thresholds;
        let cell = format!("s={s}");
        out.row(&cell, "p", rep.p);
        out.judged(
            &cell,
            "tail_slope",
            rep.fit.map_or(f64::NAN, |f| f.slope),
            rep.verdict.as_str(),
            &[
                ("short_below", th.short_below),
                ("not_short_at_least", th.not_short_at_least),
                ("r2_min", th.r2_min),
                ("min_points", th.min_points as f64),
                ("fit_from_annulus", rep.fit_from as f64),
            ],
        );
        Ok(out)
    })
}

fn cook(c: &config::Cook) -> Result<Outcome> {
    let grid = grid_of(&c.grid)?;
    let v = evaluate_real(&c.potential, &grid)?;
    per_order(&c.s, |s| {
        let packet = packet_of(&grid, s, &c.packet)?;
        let t_max = c.t_max.unwrap_or_else(|| packet.horizon().floor());
        let prof = cook_profile(&packet, &v, t_max, c.points, &c.thresholds)?;
        let mut out = Outcome::default();
        for ((t, g), cum) in prof.times.iter().zip(&prof.values).zip(&prof.cumulative) {
            let cell = format!("s={s};t={t:e}");
            out.row(&cell, "g", *g);
            out.row(&cell, "cumulative", *cum);
        }
        let cell = format!("s={s}");
        out.row(&cell, "t_max", t_max);
        out.judged(
            &cell,
            "tail_exponent",
            prof.fit.map_or(f64::NAN, |f| f.slope),
            prof.verdict.as_str(),
            &[("integrable_below", c.thresholds.integrable_below), ("nonintegrable_above", c.thresholds.nonintegrable_above)],
        );
        Ok(out)
    })
}

fn waveop(c: &config::Waveop) -> Result<Outcome> {
    let grid = grid_of(&c.grid)?;
    let v = evaluate_real(&c.potential, &grid)?;
    let half = evaluate_real(&c.potential.scaled(0.5), &grid)?;
    per_order(&c.s, |s| {
        let packet = packet_of(&grid, s, &c.packet)?;
        let rec = wave_operator_estimate(&packet, &v, &c.times, c.dt, &c.options)?;
        let mut out = Outcome::default();
        for (w, d) in rec.times.windows(2).zip(&rec.drifts) {
            out.row(&format!("s={s};T={}", w[1]), "drift", *d);
        }
        let cell = format!("s={s}");
        let last = rec.drifts.last().copied().unwrap_or(0.0);
        let decreasing = rec.drifts.windows(2).all(|w| w[1] < w[0]);
        out.judged(&cell, "drift_verdict", last, rec.verdict.as_str(), &[("tol_w", c.options.tol_w), ("ratio", c.options.ratio)]);
        out.judged(&cell, "drift_decreasing", last, pass(decreasing && last < c.options.tol_w), &[("tol_w", c.options.tol_w)]);
        out.judged(&cell, "isometry_residual", rec.isometry_residual, pass(rec.isometry_residual < c.isometry_tol), &[("isometry_tol", c.isometry_tol)]);
        out.judged(
            &cell,
            "intertwining_residual",
            rec.intertwining_residual,
            pass(rec.intertwining_residual < c.intertwining_factor * last),
            &[("intertwining_factor", c.intertwining_factor), ("tau", c.options.tau)],
        );
        if c.born {
            let t = *c.times.last().expect("validated non-empty");
            let u = &packet.field;
            let residual = |vv: &[f64]| -> Result<f64> {
                let om = wave_operator_apply(u, t, vv, c.dt, s)?;
                Ok(om.sub(&born_first_order(u, vv, s, t, c.dt)?)?.norm())
            };
            let (full, halved) = (residual(&v)?, residual(&half)?);
            out.row(&cell, "born_residual", full);
            out.row(&cell, "born_residual_half", halved);
            let ratio = full / halved;
            out.judged(&cell, "born_ratio", ratio, pass((ratio / 4.0 - 1.0).abs() < c.born_tol), &[("target", 4.0), ("born_tol", c.born_tol)]);
        }
        Ok(out)
    })
}

fn nonexistence(c: &config::Nonexistence) -> Result<Outcome> {
    let grid = grid_of(&c.grid)?;
    per_order(&c.s, |s| {
        let packet = packet_of(&grid, s, &c.packet)?;
        let rep = nonexistence_drift(&packet, &c.potential, c.j_first, c.j_last, c.dt_q)?;
        let mut out = Outcome::default();
        for (b, cum) in rep.blocks.iter().zip(&rep.cumulative) {
            let cell = format!("s={s};j={}", b.j);
            out.row(&cell, "D_j", b.d);
            out.row(&cell, "proxy", b.proxy);
            out.row(&cell, "ratio", b.ratio);
            out.row(&cell, "cumulative", *cum);
        }
        let used: Vec<f64> = rep.blocks.iter().filter(|b| b.j >= c.analysis_from).map(|b| b.d).collect();
        let spread = rep.ratio_spread(c.analysis_from);
        let total: f64 = used.iter().sum();
        let floor = c.growth_factor * used.len() as f64 * used.iter().cloned().fold(f64::INFINITY, f64::min);
        let cell = format!("s={s}");
        out.judged(&cell, "ratio_spread", spread, pass(spread < c.spread_max), &[("spread_max", c.spread_max), ("from_block", c.analysis_from as f64)]);
        let grows = total >= floor && used.len() >= 2;
        out.judged(
            &cell,
            "cumulative_growth",
            total,
            if grows { "growing" } else { "not_growing" },
            &[("growth_factor", c.growth_factor), ("required", floor), ("blocks", used.len() as f64)],
        );
        Ok(out)
    })
}

fn lap(c: &config::Lap) -> Result<Outcome> {
    let grid = grid_of(&c.grid)?;
    let battery = lap_battery(&grid);
    per_order(&c.s, |s| {
        let sw = lap_sweep(&grid, s, &c.lambdas, c.eps_top, c.points, &battery)?;
        let mut out = Outcome::default();
        for cell in &sw.cells {
            let id = format!("s={s};lambda={};f={};eps={:e}", cell.lambda, battery[cell.battery].0, cell.eps);
            out.row(&id, "rho_l2", cell.rho_l2);
            out.row(&id, "rho_b", cell.rho_b);
        }
        for sm in &sw.summaries {
            let id = format!("s={s};lambda={};f={}", sm.lambda, sm.name);
            out.row(&id, "eps_floor", sm.eps_floor);
            out.row(&id, "decades", sm.decades);
            out.judged(
                &id,
                "l2_growth_per_two_decades",
                sm.l2_growth_per_two_decades,
                pass(sm.l2_growth_per_two_decades >= c.l2_growth_min),
                &[("l2_growth_min", c.l2_growth_min)],
            );
            out.judged(
                &id,
                "rho_b_variation",
                sm.rho_b_variation,
                pass(sm.rho_b_variation <= c.rho_b_variation_max),
                &[("rho_b_variation_max", c.rho_b_variation_max)],
            );
        }
        Ok(out)
    })
}

fn weighted_lap(c: &config::WeightedLap) -> Result<Outcome> {
    let grid = grid_of(&c.grid)?;
    let g = shell_band_field(&grid, c.band_center, c.band_half_width);
    per_order(&c.s, |s| {
        let exponent = s + c.exponent_shift;
        let rep = weighted_lap_check(s, c.lambda, &c.eps, &c.deltas, exponent, &g, c.sign)?;
        let mut out = Outcome::default();
        for (d, row) in rep.deltas.iter().zip(&rep.ratios) {
            for (e, r) in rep.eps.iter().zip(row) {
                out.row(&format!("s={s};delta={d};eps={e:e}"), "ratio", *r);
            }
        }
        let growth = rep.delta_growth();
        out.judged(
            &format!("s={s}"),
            "delta_growth",
            growth,
            if growth < c.delta_growth_max { "uniform" } else { "growing" },
            &[("delta_growth_max", c.delta_growth_max), ("exponent", exponent)],
        );
        Ok(out)
    })
}

fn stone(c: &config::Stone) -> Result<Outcome> {
    let grid = grid_of(&c.grid)?;
    let w2 = c.width * c.width;
    let f = Field::from_real_fn(grid, |x| (-x.iter().map(|a| a * a).sum::<f64>() / (2.0 * w2)).exp());
    per_order(&c.s, |s| {
        let mut out = Outcome::default();
        let mut errs = vec![];
        let mut worst: f64 = 0.0;
        for &e in &c.eps {
            let r = stone_jump_residual(s, c.lambda, e, &f, &f)?;
            let cell = format!("s={s};eps={e:e}");
            out.row(&cell, "algebraic_residual", r.algebraic_residual);
            worst = worst.max(r.algebraic_residual);
            out.row(&cell, "pairing_re", r.pairing.re);
            if let Some(lim) = r.shell_limit {
                let err = (r.pairing - lim).norm();
                out.row(&cell, "shell_limit_re", lim.re);
                out.row(&cell, "limit_error", err);
                errs.push(err);
            }
        }
        let cell = format!("s={s}");
        out.judged(&cell, "max_algebraic_residual", worst, pass(worst < c.algebraic_tol), &[("algebraic_tol", c.algebraic_tol)]);
        if errs.len() == c.eps.len() && errs.len() >= 2 {
            let order = fit_loglog(&c.eps, &errs).map_or(f64::NAN, |f| f.slope);
            let [lo, hi] = c.order_band;
            out.judged(&cell, "limit_order", order, pass((lo..=hi).contains(&order)), &[("order_lo", lo), ("order_hi", hi)]);
        }
        Ok(out)
    })
}

fn eigen_options(count: usize, c: Option<&config::Eigen>) -> EigenOptions {
    let mut o = EigenOptions { count, ..Default::default() };
    if let Some(c) = c {
        o.tol = c.tol;
        o.method = c.method;
        o.max_lanczos = c.max_lanczos;
        o.seed = c.seed;
    }
    o
}

fn eigen_rows(out: &mut Outcome, s: f64, rep: &EigenReport) {
    out.row(&format!("s={s}"), "count", rep.pairs.len() as f64);
    out.row(&format!("s={s}"), "orthogonality", rep.orthogonality);
    for (k, p) in rep.pairs.iter().enumerate() {
        let cell = format!("s={s};k={}", k + 1);
        out.row(&cell, "lambda", p.lambda);
        out.row(&cell, "residual", p.residual);
        out.row(&cell, "multiplicity", p.multiplicity as f64);
    }
    out.flags.extend(rep.flags.iter().map(|f| format!("s={s}: {f}")));
}

fn eigen(c: &config::Eigen) -> Result<Outcome> {
    let grid = grid_of(&c.grid)?;
    let v = evaluate_real(&c.potential, &grid)?;
    per_order(&c.s, |s| {
        let rep = eigen_solve(&grid, &v, s, &eigen_options(c.count, Some(c)))?;
        let mut out = Outcome::default();
        eigen_rows(&mut out, s, &rep);
        let mut worst: f64 = 0.0;
        for (k, p) in rep.pairs.iter().enumerate() {
            let r = eigen_characterization_residual(p.lambda, &p.u, &v, s, 0.0)?;
            let cell = format!("s={s};k={}", k + 1);
            out.row(&cell, "characterization_plus", r.plus);
            out.row(&cell, "characterization_minus", r.minus);
            worst = worst.max(r.plus).max(r.minus);
        }
        out.judged(
            &format!("s={s}"),
            "max_characterization_residual",
            worst,
            pass(worst < c.characterization_tol),
            &[("characterization_tol", c.characterization_tol)],
        );
        if let Some(sc) = &c.scan {
            let n = sc.points;
            let lambdas: Vec<f64> = (0..n).map(|k| sc.lo + (sc.hi - sc.lo) * k as f64 / (n - 1) as f64).collect();
            let scan = lambda_scan(&grid, &v, s, &lambdas)?;
            let mut worst_match: f64 = 0.0;
            for (k, cand) in scan.candidates.iter().enumerate() {
                let cell = format!("s={s};candidate={}", k + 1);
                let dist = rep.pairs.iter().map(|p| (p.lambda - cand.lambda).abs()).fold(f64::INFINITY, f64::min);
                out.row(&cell, "scan_lambda", cand.lambda);
                out.row(&cell, "sigma_min", cand.sigma_min);
                out.row(&cell, "match_distance", dist);
                worst_match = worst_match.max(dist);
            }
            // eigenvalues inside the scan range that no candidate reproduces
            let inside: Vec<f64> = rep.pairs.iter().map(|p| p.lambda).filter(|l| (sc.lo..=sc.hi).contains(l)).collect();
            let missed = inside
                .iter()
                .filter(|l| scan.candidates.iter().all(|cd| (cd.lambda - **l).abs() >= sc.match_tol))
                .count();
            let cell = format!("s={s}");
            out.row(&cell, "scan_median_sigma", scan.median);
            out.judged(
                &cell,
                "scan_match",
                worst_match,
                pass(worst_match < sc.match_tol && missed == 0 && !scan.candidates.is_empty()),
                &[("match_tol", sc.match_tol), ("missed", missed as f64)],
            );
        }
        Ok(out)
    })
}

/// {0, 1, s} restricted to s' ≤ s, without duplicates.
pub fn default_s_primes(s: f64) -> Vec<f64> {
    let mut v: Vec<f64> = [0.0, 1.0, s].into_iter().filter(|&x| x <= s).collect();
    v.dedup();
    v
}

fn decay(c: &config::Decay) -> Result<Outcome> {
    let grid = grid_of(&c.grid)?;
    let v = evaluate_real(&c.potential, &grid)?;
    per_order(&c.s, |s| {
        let rep = eigen_solve(&grid, &v, s, &eigen_options(c.count, None))?;
        let mut out = Outcome::default();
        eigen_rows(&mut out, s, &rep);
        let sp = if c.s_primes.is_empty() { default_s_primes(s) } else { c.s_primes.clone() };
        let mut worst: f64 = 0.0;
        for (k, p) in rep.pairs.iter().enumerate() {
            let d = decay_profile(&p.u, &v, s, &c.eps, &sp)?;
            let base = format!("s={s};k={}", k + 1);
            out.row(&base, "bstar_weighted", d.bstar_weighted);
            out.row(&base, "b_vu", d.b_vu);
            for (e, prof) in &d.profiles {
                let cell = format!("{base};eps={e};s_prime={}", prof.s_prime);
                for (r, w) in prof.radii.iter().zip(&prof.w) {
                    out.row(&format!("{cell};r={r}"), "W", *w);
                }
                out.row(&cell, "saturation_ratio", prof.saturation_ratio);
                worst = worst.max(prof.saturation_ratio);
            }
        }
        let sat = fracscat_core::eigen::SATURATION_RATIO;
        out.judged(
            &format!("s={s}"),
            "max_saturation_ratio",
            worst,
            if worst < sat && !rep.pairs.is_empty() { "saturated" } else { "not_saturated" },
            &[("saturation_ratio", sat)],
        );
        Ok(out)
    })
}

fn completeness(c: &config::Completeness) -> Result<Outcome> {
    let grid = grid_of(&c.grid)?;
    let v = evaluate_real(&c.potential, &grid)?;
    let battery = completeness_battery(&grid);
    let fs: Vec<Field> = battery.iter().map(|b| b.1.clone()).collect();
    per_order(&c.s, |s| {
        let bound = if matches!(c.potential, PotentialSpec::Zero) {
            vec![]
        } else {
            eigen_solve(&grid, &v, s, &EigenOptions::default())?.pairs
        };
        let eigenvalues: Vec<f64> = bound.iter().map(|p| p.lambda).collect();
        let sgrid = SpectralGrid::midpoint(&grid, s, c.rho_max)?;
        let dft = distorted_ft_1d(&sgrid, &v, &fs, c.sign, &eigenvalues, c.margin)?;
        let mut out = Outcome::default();
        out.row(&format!("s={s}"), "bound_states", bound.len() as f64);
        for ((name, f), d) in battery.iter().zip(&dft) {
            let n2 = f.norm().powi(2);
            let proj: f64 = bound.iter().map(|p| p.u.inner(f).map(|z: C64| z.norm_sqr())).sum::<Result<f64>>()?;
            let expected = n2 - proj;
            let rel = (d.completeness - expected).abs() / n2;
            let cell = format!("s={s};f={name}");
            out.row(&cell, "C", d.completeness);
            out.row(&cell, "continuous_mass", expected);
            out.row(&cell, "excluded_nodes", d.excluded.len() as f64);
            out.judged(&cell, "relative_error", rel, pass(rel < c.tol), &[("tol", c.tol), ("rho_max", c.rho_max)]);
        }
        Ok(out)
    })
}
