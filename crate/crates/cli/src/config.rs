//! Run configuration: TOML file, flag overrides and resolution.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wannier_stark::lattice::{FieldSpec, LatticeParams, Orientation, Rational};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output: String,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub lattice: LatticeSection,
    pub field: FieldSection,
    pub bloch: BlochSection,
    pub ws: WsSection,
    pub fan: FanSection,
    pub rate: RateSection,
    pub asymptotics: AsymptoticsSection,
    pub wavepacket: WavepacketSection,
    pub fractal: FractalSection,
    pub lz: LzSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output: "out".into(),
            workers: 0,
            lattice: LatticeSection::default(),
            field: FieldSection::default(),
            bloch: BlochSection::default(),
            ws: WsSection::default(),
            fan: FanSection::default(),
            rate: RateSection::default(),
            asymptotics: AsymptoticsSection::default(),
            wavepacket: WavepacketSection::default(),
            fractal: FractalSection::default(),
            lz: LzSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub preset: Option<String>,
    pub j1: Option<f64>,
    pub j2: Option<f64>,
    pub delta: Option<f64>,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self {
            preset: Some("i".into()),
            j1: None,
            j2: None,
            delta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    #[serde(rename = "F")]
    pub f: f64,
    /// Rational orientation `r,q` in the primary frame.
    pub orient: Option<String>,
    /// Angle `arctan(Fx/Fy)` in radians.
    pub theta: Option<f64>,
    /// `Fx/Fy`.
    pub beta: Option<f64>,
}

impl Default for FieldSection {
    fn default() -> Self {
        Self {
            f: 0.4,
            orient: Some("1,0".into()),
            theta: None,
            beta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlochSection {
    pub grid: usize,
}

impl Default for BlochSection {
    fn default() -> Self {
        Self { grid: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WsSection {
    pub method: String,
    /// Points per band period.
    pub kappa_points: usize,
    /// Cover the whole `2 pi / d` window instead of one band period.
    pub full_window: bool,
}

impl Default for WsSection {
    fn default() -> Self {
        Self {
            method: "chain".into(),
            kappa_points: 128,
            full_window: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FanSection {
    /// `d kappa / 2 pi`.
    pub kappa_frac: f64,
    #[serde(rename = "F_range")]
    pub f_range: String,
    /// Levels with `|E|` above this are dropped.
    pub window: f64,
}

impl Default for FanSection {
    fn default() -> Self {
        Self {
            kappa_frac: 0.25,
            f_range: "0.2:1:0.01".into(),
            window: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSection {
    #[serde(rename = "invF_range")]
    pub inv_f_range: String,
    /// Number of `1/F` points when the range has no step.
    pub points: usize,
    pub method: String,
    pub kappa_points: usize,
}

impl Default for RateSection {
    fn default() -> Self {
        Self {
            inv_f_range: "0.5:10".into(),
            points: 96,
            method: "monodromy".into(),
            kappa_points: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticsSection {
    /// Any of `nu`, `bm`, `adiabatic`, `limiting`.
    pub parts: Vec<String>,
    #[serde(rename = "F_min")]
    pub f_min: f64,
    #[serde(rename = "F_max")]
    pub f_max: f64,
    pub nu_points: usize,
    pub nu_kappa_points: usize,
    #[serde(rename = "bm_F")]
    pub bm_fields: Vec<f64>,
    pub bm_cutoff: usize,
    pub bm_kappa_points: usize,
    pub adiabatic_kappa_points: usize,
    pub theta_points: usize,
    pub limiting_r_max: i64,
    pub limiting_q: Vec<i64>,
    pub limiting_kappa_points: usize,
    pub line_points: usize,
}

impl Default for AsymptoticsSection {
    fn default() -> Self {
        Self {
            parts: ["nu", "bm", "adiabatic", "limiting"].map(String::from).to_vec(),
            f_min: 10.0,
            f_max: 100.0,
            nu_points: 8,
            nu_kappa_points: 32,
            bm_fields: vec![0.5, 1.0, 2.0, 4.0],
            bm_cutoff: 40,
            bm_kappa_points: 128,
            adiabatic_kappa_points: 64,
            theta_points: 512,
            limiting_r_max: 20,
            limiting_q: vec![1, 2, 3],
            limiting_kappa_points: 64,
            line_points: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WavepacketSection {
    pub size: usize,
    /// `square` or `strip`.
    pub domain: String,
    pub half_width: f64,
    /// Final time in units of `T = 2 pi`.
    pub t_max: f64,
    pub samples: usize,
    /// `site` or `gaussian`.
    pub initial: String,
    pub width: f64,
    /// Also write the final site populations.
    pub snapshot: bool,
}

impl Default for WavepacketSection {
    fn default() -> Self {
        Self {
            size: 201,
            domain: "square".into(),
            half_width: 16.0,
            t_max: 50.0,
            samples: 200,
            initial: "site".into(),
            width: 2.0,
            snapshot: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FractalSection {
    pub theta_points: usize,
    /// Checkpoints in units of `T = 2 pi`.
    pub checkpoints: Vec<f64>,
    pub size: usize,
    pub domain: String,
    pub half_width: f64,
}

impl Default for FractalSection {
    fn default() -> Self {
        Self {
            theta_points: 121,
            checkpoints: vec![6.25, 12.5, 25.0, 50.0],
            size: 401,
            domain: "strip".into(),
            half_width: 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LzSection {
    /// Zone grid per axis for maps.
    pub map_grid: usize,
    /// Map snapshot times in units of `T_J = 2 pi / J1`.
    pub snapshots: Vec<f64>,
    /// Horizon of traces and time averages, in `T_J`.
    pub t_total: f64,
    /// Zone grid per axis for time averages.
    pub mean_grid: usize,
    pub mean_samples: usize,
    #[serde(rename = "F_range")]
    pub f_range: String,
    /// `bose` or `fermi`.
    pub initial: String,
    pub trace_grid: usize,
    pub samples_per_tj: usize,
    pub tol: f64,
}

impl Default for LzSection {
    fn default() -> Self {
        Self {
            map_grid: 128,
            snapshots: vec![0.0, 1.0, 2.0, 4.0],
            t_total: 50.0,
            mean_grid: 16,
            mean_samples: 400,
            f_range: "0.2:1:0.16".into(),
            initial: "bose".into(),
            trace_grid: 64,
            samples_per_tj: 20,
            tol: 1e-10,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_err(format!("config file: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the resolved configuration with the command name,
    /// excluding fields that cannot change the numbers.
    pub fn hash(&self, command: &str) -> String {
        let mut c = self.clone();
        c.output = String::new();
        c.workers = 0;
        let json = serde_json::to_string(&(command, &c)).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Materializes the lattice parameters and checks every section.
    pub fn resolve(&mut self) -> Result<(), CliError> {
        let l = &mut self.lattice;
        let base = match &l.preset {
            Some(name) => Some(
                LatticeParams::preset(name)
                    .ok_or_else(|| config_err(format!("lattice.preset: unknown preset `{name}` (i|ii)")))?,
            ),
            None => None,
        };
        let pick = |v: Option<f64>, from: Option<f64>, name: &str| {
            v.or(from)
                .ok_or_else(|| config_err(format!("lattice.{name}: required without a preset")))
        };
        let j1 = pick(l.j1, base.map(|b| b.j1), "j1")?;
        let j2 = pick(l.j2, base.map(|b| b.j2), "j2")?;
        let delta = pick(l.delta, base.map(|b| b.delta), "delta")?;
        LatticeParams::new(j1, j2, delta).map_err(|e| config_err(format!("lattice: {e}")))?;
        (l.j1, l.j2, l.delta) = (Some(j1), Some(j2), Some(delta));

        let f = &self.field;
        let set = [f.orient.is_some(), f.theta.is_some(), f.beta.is_some()]
            .iter()
            .filter(|x| **x)
            .count();
        if set != 1 {
            return Err(config_err("field: give exactly one of orient, theta, beta"));
        }
        if !(f.f.is_finite() && f.f > 0.0) {
            return Err(config_err(format!("field.F: must be finite and > 0, got {}", f.f)));
        }
        self.field_spec(f.f)?;
        for (name, m) in [("ws.method", &self.ws.method), ("rate.method", &self.rate.method)] {
            if m != "chain" && m != "monodromy" {
                return Err(config_err(format!("{name}: unknown method `{m}` (chain|monodromy)")));
            }
        }
        for (name, d) in [("wavepacket.domain", &self.wavepacket.domain), ("fractal.domain", &self.fractal.domain)] {
            if d != "square" && d != "strip" {
                return Err(config_err(format!("{name}: unknown domain `{d}` (square|strip)")));
            }
        }
        if self.wavepacket.initial != "site" && self.wavepacket.initial != "gaussian" {
            return Err(config_err(format!(
                "wavepacket.initial: unknown initial state `{}` (site|gaussian)",
                self.wavepacket.initial
            )));
        }
        if self.lz.initial != "bose" && self.lz.initial != "fermi" {
            return Err(config_err(format!("lz.initial: unknown `{}` (bose|fermi)", self.lz.initial)));
        }
        for p in &self.asymptotics.parts {
            if !["nu", "bm", "adiabatic", "limiting"].contains(&p.as_str()) {
                return Err(config_err(format!(
                    "asymptotics.parts: unknown part `{p}` (nu|bm|adiabatic|limiting)"
                )));
            }
        }
        if self.fractal.checkpoints.windows(2).any(|w| w[1] <= w[0]) || self.fractal.checkpoints.is_empty() {
            return Err(config_err("fractal.checkpoints: must be non-empty and increasing"));
        }
        if self.lz.snapshots.windows(2).any(|w| w[1] <= w[0]) || self.lz.snapshots.iter().any(|t| *t < 0.0) {
            return Err(config_err("lz.snapshots: must be >= 0 and increasing"));
        }
        parse_range(&self.fan.f_range, 2, "fan.F_range")?;
        parse_range(&self.rate.inv_f_range, self.rate.points, "rate.invF_range")?;
        parse_range(&self.lz.f_range, 2, "lz.F_range")?;
        Ok(())
    }

    pub fn params(&self) -> LatticeParams {
        let l = &self.lattice;
        LatticeParams::new(l.j1.unwrap(), l.j2.unwrap(), l.delta.unwrap()).expect("resolved")
    }

    pub fn orientation(&self) -> Result<Orientation, CliError> {
        let f = &self.field;
        if let Some(s) = &f.orient {
            let (r, q) = parse_pair(s).ok_or_else(|| config_err(format!("field.orient: expected `r,q`, got `{s}`")))?;
            return Orientation::rational(r, q).map_err(|e| config_err(format!("field.orient: {e}")));
        }
        if let Some(t) = f.theta {
            if !t.is_finite() {
                return Err(config_err("field.theta: must be finite"));
            }
            return Ok(Orientation::Angle(t));
        }
        let b = f.beta.expect("one orientation is set");
        if !b.is_finite() {
            return Err(config_err("field.beta: must be finite"));
        }
        Ok(Orientation::from_beta(b))
    }

    pub fn rational(&self) -> Result<Rational, CliError> {
        self.orientation()?
            .as_rational()
            .ok_or_else(|| config_err("field: this command needs a rational orientation (field.orient = \"r,q\")"))
    }

    pub fn field_spec(&self, magnitude: f64) -> Result<FieldSpec, CliError> {
        FieldSpec::new(magnitude, self.orientation()?).map_err(|e| config_err(format!("field: {e}")))
    }
}

fn parse_pair(s: &str) -> Option<(i64, i64)> {
    let (a, b) = s.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

/// `lo:hi:step` (inclusive, step rounded to fit) or `lo:hi` with `points`.
pub fn parse_range(s: &str, points: usize, name: &str) -> Result<Vec<f64>, CliError> {
    let bad = || config_err(format!("{name}: expected `lo:hi` or `lo:hi:step`, got `{s}`"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let (lo, hi) = match parts[..] {
        [lo, hi] | [lo, hi, _] => (lo, hi),
        _ => return Err(bad()),
    };
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
        return Err(config_err(format!("{name}: need 0 < lo < hi, got `{s}`")));
    }
    let n = match parts[..] {
        [_, _, step] => {
            if !(step > 0.0) {
                return Err(config_err(format!("{name}: step must be > 0")));
            }
            ((hi - lo) / step).round() as usize + 1
        }
        _ => points,
    };
    if n < 2 {
        return Err(config_err(format!("{name}: need at least two points")));
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}
