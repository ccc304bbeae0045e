//! Run configuration: TOML in, fully resolved TOML out.
//!
//! Every optional key has a default that is written back into `config.resolved`, so a resolved file
//! reproduces the run on its own. Unknown keys are rejected at every level.

use std::path::PathBuf;

use fracscat_core::dynamics::{CookThresholds, WaveOpOptions};
use fracscat_core::eigen::EigenMethod;
use fracscat_core::potentials::{PotentialSpec, TailThresholds};
use fracscat_core::resolvent::BoundarySign;
use fracscat_core::GridSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Output directory; relative paths resolve against the config file's directory.
    pub output: PathBuf,
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one_usize")]
    pub dim: usize,
    #[serde(rename = "L", default = "default_l")]
    pub half_width: f64,
    #[serde(rename = "N", default = "default_n")]
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { dim: 1, half_width: default_l(), points: default_n() }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec, String> {
        GridSpec::new(self.dim, self.half_width, self.points).map_err(|e| e.to_string())
    }
}

/// Momentum-space Gaussian packet centred at `center`·e₁, cut off at `nsig`·`sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    #[serde(default = "default_center")]
    pub center: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_nsig")]
    pub nsig: f64,
}

impl Default for PacketConfig {
    fn default() -> Self {
        Self { center: default_center(), sigma: default_sigma(), nsig: default_nsig() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Shortrange(Shortrange),
    Cook(Cook),
    Waveop(Waveop),
    Nonexistence(Nonexistence),
    Lap(Lap),
    WeightedLap(WeightedLap),
    Stone(Stone),
    Eigen(Eigen),
    Decay(Decay),
    Completeness(Completeness),
}

pub const KINDS: [(&str, &str); 10] = [
    ("shortrange", "dyadic series Σ R_j M_j and its short-range verdict"),
    ("cook", "Cook integrand ‖V e^{-itH₀}u‖ and its tail exponent"),
    ("waveop", "Cauchy drift of e^{iTH}e^{-iTH₀}u, isometry, intertwining, Born scaling"),
    ("nonexistence", "block drifts of the wave-operator family for annulus tails"),
    ("lap", "ρ_B versus ρ_L² along an ε ladder on the six-function battery"),
    ("weighted_lap", "weighted B*/B ratios for the saturating weights μ_δ"),
    ("stone", "jump R₀(λ+iε) − R₀(λ−iε) against the spectral-density surrogate"),
    ("eigen", "eigenpairs below zero, characterization residuals, σ_min scan"),
    ("decay", "weighted decay profiles of the eigenfunctions"),
    ("completeness", "distorted-Fourier Parseval identity on the four-function battery"),
];

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Shortrange(_) => "shortrange",
            Experiment::Cook(_) => "cook",
            Experiment::Waveop(_) => "waveop",
            Experiment::Nonexistence(_) => "nonexistence",
            Experiment::Lap(_) => "lap",
            Experiment::WeightedLap(_) => "weighted_lap",
            Experiment::Stone(_) => "stone",
            Experiment::Eigen(_) => "eigen",
            Experiment::Decay(_) => "decay",
            Experiment::Completeness(_) => "completeness",
        }
    }

    fn grid(&self) -> &GridConfig {
        match self {
            Experiment::Shortrange(e) => &e.grid,
            Experiment::Cook(e) => &e.grid,
            Experiment::Waveop(e) => &e.grid,
            Experiment::Nonexistence(e) => &e.grid,
            Experiment::Lap(e) => &e.grid,
            Experiment::WeightedLap(e) => &e.grid,
            Experiment::Stone(e) => &e.grid,
            Experiment::Eigen(e) => &e.grid,
            Experiment::Decay(e) => &e.grid,
            Experiment::Completeness(e) => &e.grid,
        }
    }

    fn orders(&self) -> &[f64] {
        match self {
            Experiment::Shortrange(e) => &e.s,
            Experiment::Cook(e) => &e.s,
            Experiment::Waveop(e) => &e.s,
            Experiment::Nonexistence(e) => &e.s,
            Experiment::Lap(e) => &e.s,
            Experiment::WeightedLap(e) => &e.s,
            Experiment::Stone(e) => &e.s,
            Experiment::Eigen(e) => &e.s,
            Experiment::Decay(e) => &e.s,
            Experiment::Completeness(e) => &e.s,
        }
    }

    fn potential(&self) -> Option<&PotentialSpec> {
        match self {
            Experiment::Shortrange(e) => Some(&e.potential),
            Experiment::Cook(e) => Some(&e.potential),
            Experiment::Waveop(e) => Some(&e.potential),
            Experiment::Nonexistence(e) => Some(&e.potential),
            Experiment::Eigen(e) => Some(&e.potential),
            Experiment::Decay(e) => Some(&e.potential),
            Experiment::Completeness(e) => Some(&e.potential),
            Experiment::Lap(_) | Experiment::WeightedLap(_) | Experiment::Stone(_) => None,
        }
    }

    /// Checks that need no numerics beyond grid construction.
    fn validate(&self) -> Result<(), String> {
        let grid = self.grid().spec()?;
        let s = self.orders();
        if s.is_empty() {
            return Err("s list is empty".into());
        }
        if let Some(bad) = s.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(format!("order s must be positive and finite, got {bad}"));
        }
        if let Some(PotentialSpec::Sampled { values }) = self.potential() {
            if values.len() != grid.len() {
                return Err(format!("sampled potential has {} values for {} cells", values.len(), grid.len()));
            }
        }
        let positive = |name: &str, x: f64| if x > 0.0 && x.is_finite() { Ok(()) } else { Err(format!("{name} must be positive, got {x}")) };
        let nonempty = |name: &str, xs: &[f64]| if xs.is_empty() { Err(format!("{name} list is empty")) } else { Ok(()) };
        match self {
            Experiment::Shortrange(e) => {
                positive("delta_p", e.delta_p)?;
                if e.stride == 0 {
                    return Err("stride must be at least 1".into());
                }
            }
            Experiment::Cook(e) => {
                if e.points < 2 {
                    return Err("cook needs at least 2 time points".into());
                }
                if let Some(t) = e.t_max {
                    positive("t_max", t)?;
                }
            }
            Experiment::Waveop(e) => {
                nonempty("times", &e.times)?;
                positive("dt", e.dt)?;
                if e.times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err("times must be strictly increasing".into());
                }
            }
            Experiment::Nonexistence(e) => {
                if e.j_first < 2 || e.j_last <= e.j_first {
                    return Err(format!("block range {}..={} must satisfy 2 ≤ j_first < j_last", e.j_first, e.j_last));
                }
                if e.analysis_from < e.j_first || e.analysis_from > e.j_last {
                    return Err("analysis_from must lie inside the block range".into());
                }
                positive("dt_q", e.dt_q)?;
            }
            Experiment::Lap(e) => {
                nonempty("lambdas", &e.lambdas)?;
                positive("eps_top", e.eps_top)?;
            }
            Experiment::WeightedLap(e) => {
                nonempty("eps", &e.eps)?;
                nonempty("deltas", &e.deltas)?;
                positive("band_half_width", e.band_half_width)?;
                if !(e.exponent_shift <= 0.5) || s.iter().any(|&x| !(x + e.exponent_shift >= 0.0)) {
                    return Err(format!("exponent_shift must keep 0 ≤ s + exponent_shift ≤ s + 1/2, got {}", e.exponent_shift));
                }
            }
            Experiment::Stone(e) => {
                nonempty("eps", &e.eps)?;
                positive("lambda", e.lambda)?;
            }
            Experiment::Eigen(e) => {
                if e.count == 0 {
                    return Err("count must be at least 1".into());
                }
                if let Some(sc) = &e.scan {
                    if sc.points < 3 || !(sc.lo < sc.hi) {
                        return Err("scan needs lo < hi and at least 3 points".into());
                    }
                }
            }
            Experiment::Decay(e) => {
                nonempty("eps", &e.eps)?;
                if let Some(bad) = e.eps.iter().find(|&&x| !(x > 0.0)) {
                    return Err(format!("decay ε must be positive, got {bad}"));
                }
            }
            Experiment::Completeness(e) => {
                if grid.dim != 1 {
                    return Err("completeness is one-dimensional".into());
                }
                positive("rho_max", e.rho_max)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shortrange {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "unit_order")]
    pub s: Vec<f64>,
    pub potential: PotentialSpec,
    #[serde(default = "default_delta_p")]
    pub delta_p: f64,
    #[serde(default = "one_usize")]
    pub stride: usize,
    #[serde(default)]
    pub thresholds: TailThresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cook {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "unit_order")]
    pub s: Vec<f64>,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub packet: PacketConfig,
    /// Defaults to the packet's torus horizon, rounded down.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default = "default_cook_points")]
    pub points: usize,
    #[serde(default)]
    pub thresholds: CookThresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waveop {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "unit_order")]
    pub s: Vec<f64>,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub packet: PacketConfig,
    #[serde(default = "default_waveop_times")]
    pub times: Vec<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub options: WaveOpOptions,
    #[serde(default = "default_isometry_tol")]
    pub isometry_tol: f64,
    /// intertwining residual must stay below this multiple of the final drift
    #[serde(default = "default_intertwining_factor")]
    pub intertwining_factor: f64,
    /// Born-scaling check under halving of the potential.
    #[serde(default = "yes")]
    pub born: bool,
    /// Allowed relative deviation of the Born ratio from 4.
    #[serde(default = "default_born_tol")]
    pub born_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nonexistence {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "unit_order")]
    pub s: Vec<f64>,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub packet: PacketConfig,
    #[serde(default = "two_usize")]
    pub j_first: usize,
    #[serde(default = "default_j_last")]
    pub j_last: usize,
    /// First block entering the spread and growth verdicts.
    #[serde(default = "three_usize")]
    pub analysis_from: usize,
    #[serde(default = "default_dt_q")]
    pub dt_q: f64,
    #[serde(default = "default_spread_max")]
    pub spread_max: f64,
    /// cumulative drift must reach this multiple of (block count)·min_j D_j
    #[serde(default = "default_growth_factor")]
    pub growth_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lap {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "unit_order")]
    pub s: Vec<f64>,
    #[serde(default = "unit_order")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_eps_top")]
    pub eps_top: f64,
    #[serde(default = "default_lap_points")]
    pub points: usize,
    #[serde(default = "default_growth_min")]
    pub l2_growth_min: f64,
    #[serde(default = "two_f64")]
    pub rho_b_variation_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedLap {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "unit_order")]
    pub s: Vec<f64>,
    #[serde(default = "one_f64")]
    pub lambda: f64,
    #[serde(default = "default_weighted_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    /// μ_δ(t) = (1+t)^a(1+δt)^{−a} with a = s + exponent_shift; the weight rule allows a ≤ s + 1/2.
    #[serde(default = "half")]
    pub exponent_shift: f64,
    #[serde(default = "plus")]
    pub sign: BoundarySign,
    /// ĝ is a smooth band of this centre and half-width in |ξ|.
    #[serde(default = "one_f64")]
    pub band_center: f64,
    #[serde(default = "default_band_half_width")]
    pub band_half_width: f64,
    /// uniform iff the δ-ladder growth of the finest-ε ratio stays below this
    #[serde(default = "default_delta_growth_max")]
    pub delta_growth_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stone {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "unit_order")]
    pub s: Vec<f64>,
    #[serde(default = "one_f64")]
    pub lambda: f64,
    #[serde(default = "default_stone_eps")]
    pub eps: Vec<f64>,
    /// Width of the Gaussian test function e^{−|x|²/(2w²)}.
    #[serde(default = "one_f64")]
    pub width: f64,
    #[serde(default = "default_algebraic_tol")]
    pub algebraic_tol: f64,
    #[serde(default = "default_order_band")]
    pub order_band: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// scan candidates must match eigen_solve values to this
    #[serde(default = "default_scan_tol")]
    pub match_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Eigen {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "unit_order")]
    pub s: Vec<f64>,
    pub potential: PotentialSpec,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_eig_tol")]
    pub tol: f64,
    #[serde(default = "auto")]
    pub method: EigenMethod,
    #[serde(default = "default_max_lanczos")]
    pub max_lanczos: usize,
    #[serde(default = "one_u64")]
    pub seed: u64,
    #[serde(default = "default_char_tol")]
    pub characterization_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decay {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "unit_order")]
    pub s: Vec<f64>,
    pub potential: PotentialSpec,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_decay_eps")]
    pub eps: Vec<f64>,
    /// Smoothness orders s'; an empty list means {0, 1, s} restricted to s' ≤ s.
    #[serde(default)]
    pub s_primes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Completeness {
    #[serde(default = "completeness_grid")]
    pub grid: GridConfig,
    #[serde(default = "two_order")]
    pub s: Vec<f64>,
    pub potential: PotentialSpec,
    #[serde(default = "default_rho_max")]
    pub rho_max: f64,
    /// λ nodes within this of an embedded eigenvalue are excluded
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_completeness_tol")]
    pub tol: f64,
    #[serde(default = "plus")]
    pub sign: BoundarySign,
}

fn one_usize() -> usize {
    1
}
fn two_usize() -> usize {
    2
}
fn three_usize() -> usize {
    3
}
fn one_u64() -> u64 {
    1
}
fn one_f64() -> f64 {
    1.0
}
fn two_f64() -> f64 {
    2.0
}
fn yes() -> bool {
    true
}
fn plus() -> BoundarySign {
    BoundarySign::Plus
}
fn auto() -> EigenMethod {
    EigenMethod::Auto
}
fn default_l() -> f64 {
    256.0
}
fn default_n() -> usize {
    4096
}
fn unit_order() -> Vec<f64> {
    vec![1.0]
}
fn two_order() -> Vec<f64> {
    vec![2.0]
}
fn default_center() -> f64 {
    3.0
}
fn default_sigma() -> f64 {
    0.5
}
fn default_nsig() -> f64 {
    4.6
}
fn default_delta_p() -> f64 {
    0.1
}
fn default_cook_points() -> usize {
    16
}
fn default_waveop_times() -> Vec<f64> {
    (1..=6).map(|k| f64::from(1u32 << k)).collect()
}
fn default_dt() -> f64 {
    0.05
}
fn default_isometry_tol() -> f64 {
    1e-6
}
fn default_intertwining_factor() -> f64 {
    3.0
}
fn default_born_tol() -> f64 {
    0.1
}
fn default_j_last() -> usize {
    8
}
fn default_dt_q() -> f64 {
    0.25
}
fn default_spread_max() -> f64 {
    4.0
}
fn default_growth_factor() -> f64 {
    0.5
}
fn default_eps_top() -> f64 {
    0.1
}
fn default_lap_points() -> usize {
    9
}
fn default_growth_min() -> f64 {
    10.0
}
fn default_weighted_eps() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3]
}
fn default_deltas() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}
fn half() -> f64 {
    0.5
}
fn default_band_half_width() -> f64 {
    0.6
}
fn default_delta_growth_max() -> f64 {
    3.0
}
fn default_stone_eps() -> Vec<f64> {
    vec![0.08, 0.04, 0.02, 0.01]
}
fn default_algebraic_tol() -> f64 {
    1e-12
}
fn default_order_band() -> [f64; 2] {
    [0.8, 1.2]
}
fn default_scan_tol() -> f64 {
    1e-4
}
fn default_count() -> usize {
    32
}
fn default_eig_tol() -> f64 {
    1e-8
}
fn default_max_lanczos() -> usize {
    400
}
fn default_char_tol() -> f64 {
    1e-6
}
fn default_decay_eps() -> Vec<f64> {
    vec![0.1, 0.5]
}
fn completeness_grid() -> GridConfig {
    GridConfig { dim: 1, half_width: 512.0, points: 8192 }
}
fn default_rho_max() -> f64 {
    20.0
}
fn default_margin() -> f64 {
    0.05
}
fn default_completeness_tol() -> f64 {
    1e-2
}

/// Parses and validates; the error string is the schema message.
pub fn parse(text: &str) -> Result<RunConfig, String> {
    let probe: toml::Table = toml::from_str(text).map_err(|e| format!("schema: {}", e.message()))?;
    match probe.get("schema_version") {
        None => return Err("schema: missing schema_version".into()),
        Some(toml::Value::Integer(v)) if *v == i64::from(SCHEMA_VERSION) => {}
        Some(v) => return Err(format!("schema: unsupported schema_version {v}, expected {SCHEMA_VERSION}")),
    }
    let cfg: RunConfig = toml::from_str(text).map_err(|e| format!("schema: {}", e.message()))?;
    if cfg.experiments.is_empty() {
        return Err("schema: experiment list is empty".into());
    }
    for (i, e) in cfg.experiments.iter().enumerate() {
        e.validate().map_err(|m| format!("schema: experiments[{i}] ({}): {m}", e.kind()))?;
    }
    Ok(cfg)
}

/// Canonical TOML with every default materialized.
pub fn resolved_text(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("resolved config serializes")
}

/// SHA-256 of the resolved experiments; the output location does not enter the hash.
pub fn config_hash(cfg: &RunConfig) -> String {
    #[derive(Serialize)]
    struct Hashed<'a> {
        schema_version: u32,
        experiments: &'a [Experiment],
    }
    let text = toml::to_string(&Hashed { schema_version: cfg.schema_version, experiments: &cfg.experiments }).expect("serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
