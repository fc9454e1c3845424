//! Experiment configuration files (TOML with sections `[vortices]`, `[physics]`, `[grid]`,
//! `[analysis]`, `[output]`). Every error names the offending key.

use std::path::{Path, PathBuf};

use toml::{Table, Value};
use vortex_core::point_vortex::VortexConfiguration;
use vortex_core::Vec2;

use crate::analysis::DEFAULT_BETA;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub positions: Vec<Vec2>,
    pub alphas: Vec<f64>,
    /// strictly decreasing
    pub nu_list: Vec<f64>,
    pub t_final: f64,
    pub t0_fraction: f64,
    /// absolute start time; overrides `t0_fraction` when set
    pub t0: Option<f64>,
    pub n: usize,
    pub l_box: f64,
    pub cfl: f64,
    pub plane_correction: bool,
    pub beta: f64,
    /// number of output times in (t0, T]
    pub times: usize,
    pub quadrupole: bool,
    pub wapp: bool,
    pub box_doubling: bool,
    pub output_dir: PathBuf,
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("vortices", &["x1", "x2", "alpha"]),
    ("physics", &["nu_list", "T", "t0_fraction", "t0"]),
    ("grid", &["n", "box", "cfl", "plane_correction"]),
    ("analysis", &["beta", "times", "quadrupole", "wapp", "box_doubling"]),
    ("output", &["dir"]),
];

struct Reader<'a> {
    root: &'a Table,
}

impl<'a> Reader<'a> {
    fn get(&self, key: &str) -> Option<&'a Value> {
        let (sec, name) = key.split_once('.').expect("dotted key");
        self.root.get(sec)?.as_table()?.get(name)
    }

    fn required(&self, key: &str) -> Result<&'a Value> {
        self.get(key).ok_or_else(|| Error::config(key, "missing"))
    }

    fn number(v: &Value, key: &str) -> Result<f64> {
        match v {
            Value::Float(x) => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            other => Err(Error::config(key, format!("expected a number, found {}", other.type_str()))),
        }
    }

    fn f64(&self, key: &str) -> Result<f64> {
        Self::number(self.required(key)?, key)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |v| Self::number(v, key))
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        match self.required(key)? {
            Value::Array(a) => a.iter().map(|v| Self::number(v, key)).collect(),
            other => Err(Error::config(key, format!("expected a list of numbers, found {}", other.type_str()))),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(other) => Err(Error::config(key, format!("expected true or false, found {}", other.type_str()))),
        }
    }

    fn usize(&self, key: &str, default: Option<usize>) -> Result<usize> {
        match (self.get(key), default) {
            (None, Some(d)) => Ok(d),
            (None, None) => Err(Error::config(key, "missing")),
            (Some(Value::Integer(i)), _) if *i > 0 => Ok(*i as usize),
            (Some(other), _) => Err(Error::config(key, format!("expected a positive integer, found {other}"))),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| Error::config("<file>", e.to_string()))?;
        for (sec, v) in &root {
            let Some((_, allowed)) = SECTIONS.iter().find(|(s, _)| s == sec) else {
                return Err(Error::config(sec, "unknown section"));
            };
            let Some(t) = v.as_table() else {
                return Err(Error::config(sec, "expected a section"));
            };
            if let Some(k) = t.keys().find(|k| !allowed.contains(&k.as_str())) {
                return Err(Error::config(format!("{sec}.{k}"), "unknown key"));
            }
        }
        let r = Reader { root: &root };
        let x1 = r.list("vortices.x1")?;
        let x2 = r.list("vortices.x2")?;
        let alphas = r.list("vortices.alpha")?;
        if x1.is_empty() {
            return Err(Error::config("vortices.x1", "at least one vortex is required"));
        }
        if x2.len() != x1.len() {
            return Err(Error::config("vortices.x2", format!("has {} entries, x1 has {}", x2.len(), x1.len())));
        }
        if alphas.len() != x1.len() {
            return Err(Error::config("vortices.alpha", format!("has {} entries, x1 has {}", alphas.len(), x1.len())));
        }
        if alphas.iter().any(|a| *a == 0.0 || !a.is_finite()) {
            return Err(Error::config("vortices.alpha", "circulations must be finite and nonzero"));
        }
        let nu_list = r.list("physics.nu_list")?;
        if nu_list.is_empty() || nu_list.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::config("physics.nu_list", "needs at least one positive viscosity"));
        }
        if nu_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::config("physics.nu_list", "must be strictly decreasing"));
        }
        let t_final = r.f64("physics.T")?;
        if !(t_final > 0.0) {
            return Err(Error::config("physics.T", "must be positive"));
        }
        let t0_fraction = r.f64_or("physics.t0_fraction", 0.01)?;
        if !(t0_fraction > 0.0 && t0_fraction < 1.0) {
            return Err(Error::config("physics.t0_fraction", "must lie in (0, 1)"));
        }
        let t0 = match r.get("physics.t0") {
            None => None,
            Some(v) => {
                let t0 = Reader::number(v, "physics.t0")?;
                if !(t0 > 0.0 && t0 < t_final) {
                    return Err(Error::config("physics.t0", "must lie in (0, T)"));
                }
                Some(t0)
            }
        };
        let n = r.usize("grid.n", None)?;
        if !n.is_power_of_two() || n < 16 {
            return Err(Error::config("grid.n", format!("{n} is not a power of two ≥ 16")));
        }
        let l_box = r.f64("grid.box")?;
        if !(l_box > 0.0) {
            return Err(Error::config("grid.box", "must be positive"));
        }
        let cfl = r.f64_or("grid.cfl", 0.4)?;
        if !(cfl > 0.0 && cfl <= vortex_dns::solver::CFL_LIMIT) {
            return Err(Error::config("grid.cfl", format!("must lie in (0, {}]", vortex_dns::solver::CFL_LIMIT)));
        }
        let beta = r.f64_or("analysis.beta", DEFAULT_BETA)?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::config("analysis.beta", "must lie in (0, 1)"));
        }
        let times = r.usize("analysis.times", Some(8))?;
        if times < 8 {
            return Err(Error::config("analysis.times", "at least 8 output times are needed"));
        }
        let output_dir = match r.required("output.dir")? {
            Value::String(s) => PathBuf::from(s),
            other => return Err(Error::config("output.dir", format!("expected a string, found {}", other.type_str()))),
        };
        Ok(Self {
            positions: x1.iter().zip(&x2).map(|(&a, &b)| Vec2::new(a, b)).collect(),
            alphas,
            nu_list,
            t_final,
            t0_fraction,
            t0,
            n,
            l_box,
            cfl,
            plane_correction: r.bool_or("grid.plane_correction", true)?,
            beta,
            times,
            quadrupole: r.bool_or("analysis.quadrupole", true)?,
            wapp: r.bool_or("analysis.wapp", true)?,
            box_doubling: r.bool_or("analysis.box_doubling", false)?,
            output_dir,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn vortex_config(&self, nu: f64) -> Result<VortexConfiguration> {
        Ok(VortexConfiguration::new(self.positions.clone(), self.alphas.clone(), nu, self.t_final)?)
    }

    /// max initial pair distance (0 for a single vortex)
    pub fn max_pair_distance(&self) -> f64 {
        let mut d = 0.0f64;
        for (a, p) in self.positions.iter().enumerate() {
            for q in &self.positions[a + 1..] {
                d = d.max((*p - *q).norm());
            }
        }
        d
    }
}
