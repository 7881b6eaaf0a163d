//! Flat key-value experiment configuration with command-line overrides.
//!
//! A config file is plain text, one `key = value` per line, `#` comments.
//! Command-line flags override file values; the fully resolved config is
//! echoed into the output directory of every run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Debug)]
pub struct Config {
    pub q: f64,
    pub d: f64,
    pub gamma: f64,
    pub eps: f64,
    pub seed: u64,
    pub l: f64,
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub p: f64,
    pub alpha: f64,
    pub scheme: String,
    pub init: String,
    pub sideband_mode: usize,
    pub log_every: usize,
    pub snapshot_every: usize,
    pub k_max: f64,
    pub k_step: f64,
    pub fit_lo: f64,
    pub boundary_tol: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            q: 0.3,
            d: 1.0,
            gamma: 0.5,
            eps: 0.01,
            seed: 1,
            l: 200.0 * std::f64::consts::PI,
            n: 4096,
            dt: 0.01,
            t_end: 200.0,
            p: 1.0,
            alpha: 0.2,
            scheme: "etdrk4".into(),
            init: "random_bounded".into(),
            sideband_mode: 35,
            log_every: 50,
            snapshot_every: 0,
            k_max: 10.0,
            k_step: 0.01,
            fit_lo: 4.0,
            boundary_tol: 1e-9,
        }
    }
}

const DOC: &[(&str, &str)] = &[
    ("q", "roll wavenumber"),
    ("d", "diffusivity of the conserved component (must be > 0)"),
    ("gamma", "conservation-law coupling"),
    ("eps", "initial-perturbation norm budget"),
    ("seed", "RNG seed for initial data (determinism contract)"),
    ("l", "periodic domain length"),
    ("n", "grid points (power of two)"),
    ("dt", "time step"),
    ("t_end", "final time"),
    ("p", "localization exponent for the conserved component"),
    ("alpha", "phase growth allowance for the q = 0 template"),
    ("scheme", "time stepper: etdrk4 | imex-bdf2"),
    (
        "init",
        "initial data: random_bounded | bounded_fronts | quasiperiodic | gaussian_localized | lp_localized_b | sideband",
    ),
    ("sideband_mode", "Fourier mode index for sideband initial data"),
    ("log_every", "steps between norm records"),
    ("snapshot_every", "log records between snapshots (0 = none)"),
    ("k_max", "wavenumber range for spectrum scans"),
    ("k_step", "wavenumber step for spectrum scans"),
    ("fit_lo", "start of the rate-fit window"),
    ("boundary_tol", "tolerance for boundary verdicts in stability checks"),
];

impl Config {
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("q".into(), format!("{:?}", self.q));
        m.insert("d".into(), format!("{:?}", self.d));
        m.insert("gamma".into(), format!("{:?}", self.gamma));
        m.insert("eps".into(), format!("{:?}", self.eps));
        m.insert("seed".into(), self.seed.to_string());
        m.insert("l".into(), format!("{:?}", self.l));
        m.insert("n".into(), self.n.to_string());
        m.insert("dt".into(), format!("{:?}", self.dt));
        m.insert("t_end".into(), format!("{:?}", self.t_end));
        m.insert("p".into(), format!("{:?}", self.p));
        m.insert("alpha".into(), format!("{:?}", self.alpha));
        m.insert("scheme".into(), self.scheme.clone());
        m.insert("init".into(), self.init.clone());
        m.insert("sideband_mode".into(), self.sideband_mode.to_string());
        m.insert("log_every".into(), self.log_every.to_string());
        m.insert("snapshot_every".into(), self.snapshot_every.to_string());
        m.insert("k_max".into(), format!("{:?}", self.k_max));
        m.insert("k_step".into(), format!("{:?}", self.k_step));
        m.insert("fit_lo".into(), format!("{:?}", self.fit_lo));
        m.insert("boundary_tol".into(), format!("{:?}", self.boundary_tol));
        m
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        let fv = || value.parse::<f64>().map_err(|e| format!("{key}: {e}"));
        let uv = || value.parse::<u64>().map_err(|e| format!("{key}: {e}"));
        match key {
            "q" => self.q = fv()?,
            "d" => self.d = fv()?,
            "gamma" => self.gamma = fv()?,
            "eps" => self.eps = fv()?,
            "seed" => self.seed = uv()?,
            "l" => self.l = fv()?,
            "n" => self.n = uv()? as usize,
            "dt" => self.dt = fv()?,
            "t_end" => self.t_end = fv()?,
            "p" => self.p = fv()?,
            "alpha" => self.alpha = fv()?,
            "scheme" => self.scheme = value.to_string(),
            "init" => self.init = value.to_string(),
            "sideband_mode" => self.sideband_mode = uv()? as usize,
            "log_every" => self.log_every = uv()? as usize,
            "snapshot_every" => self.snapshot_every = uv()? as usize,
            "k_max" => self.k_max = fv()?,
            "k_step" => self.k_step = fv()?,
            "fit_lo" => self.fit_lo = fv()?,
            "boundary_tol" => self.boundary_tol = fv()?,
            _ => return Err(format!("unknown config key '{key}'")),
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                format!("{}:{}: expected key = value", path.display(), lineno + 1)
            })?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.d <= 0.0 {
            return Err("d must be positive".into());
        }
        if !self.n.is_power_of_two() {
            return Err("n must be a power of two".into());
        }
        if self.dt <= 0.0 || self.t_end <= 0.0 || self.l <= 0.0 {
            return Err("dt, t_end and l must be positive".into());
        }
        if self.p < 1.0 {
            return Err("p must be >= 1".into());
        }
        if !(0.0..0.5).contains(&self.alpha) {
            return Err("alpha must lie in [0, 0.5)".into());
        }
        match self.scheme.as_str() {
            "etdrk4" | "imex-bdf2" => {}
            s => return Err(format!("unknown scheme '{s}'")),
        }
        Ok(())
    }

    /// Flat `key = value` rendering, keys sorted.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_map() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// The defaults with one-line documentation per key.
    pub fn render_defaults_documented() -> String {
        let d = Config::default();
        let map = d.to_map();
        let mut out = String::from("# rollstab defaults; override via file (--config) or flags\n");
        for (k, doc) in DOC {
            let _ = writeln!(out, "# {doc}\n{k} = {}", map[*k]);
        }
        out
    }
}
