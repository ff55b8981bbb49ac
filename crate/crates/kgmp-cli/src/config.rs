//! Flat key-value run configuration with command-line overrides.
//!
//! Files are `key = value` lines (`#` comments); every key can also be set
//! with `--set key=value`. Invalid configurations are rejected before any
//! output is written.

use kgmp::model::{Nonlinearity, PhysParams};
use kgmp::optimizer::{RouteChoice, SeedProfile, SolveOptions};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub nr: usize,
    pub nz: usize,
    pub r_max: f64,
    pub z_half: f64,
    pub m: f64,
    pub omega: f64,
    pub q: f64,
    pub ell: i32,
    pub mu: f64,
    pub powers: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub sigma: Option<f64>,
    pub route: RouteChoice,
    pub max_outer: usize,
    pub grad_tol: f64,
    pub nehari_tol: f64,
    pub step0: f64,
    pub backtrack: f64,
    pub armijo: f64,
    pub recentre: bool,
    pub seed_width: f64,
    pub seed_z0: f64,
    pub seeds: usize,
    pub parallel_seeds: bool,
    pub mu_schedule: Vec<f64>,
    pub out_dir: PathBuf,
    pub svg: bool,
    pub verify_probes: usize,
    pub verify_seed: u64,
    pub oracle_n: usize,
    /// Resolved key-value view, echoed into every summary.
    pub raw: BTreeMap<String, String>,
}

fn default_schedule() -> Vec<f64> {
    let mut s: Vec<f64> = (0..=10).map(|k| 2f64.powi(-k)).collect();
    s.push(0.0);
    s
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = RunConfig {
            nr: 64,
            nz: 128,
            r_max: 10.0,
            z_half: 10.0,
            m: 1.0,
            omega: 0.5,
            q: 0.5,
            ell: 1,
            mu: 1.0,
            powers: vec![3.0],
            coeffs: vec![1.0],
            sigma: None,
            route: RouteChoice::Auto,
            max_outer: 500,
            grad_tol: 1e-6,
            nehari_tol: 1e-8,
            step0: 1.0,
            backtrack: 0.5,
            armijo: 1e-4,
            recentre: true,
            seed_width: 1.0,
            seed_z0: 0.0,
            seeds: 1,
            parallel_seeds: false,
            mu_schedule: default_schedule(),
            out_dir: PathBuf::from("runs/default"),
            svg: false,
            verify_probes: 6,
            verify_seed: 2024,
            oracle_n: 17,
            raw: BTreeMap::new(),
        };
        cfg.refresh_raw();
        cfg
    }
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn from_sources(
        file: Option<&Path>,
        overrides: &[String],
        out_override: Option<&Path>,
    ) -> Result<Self, String> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| format!("{}:{}: expected key = value", path.display(), lineno + 1))?;
                cfg.set(key.trim(), value.trim())?;
            }
        }
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| format!("override '{item}' is not key=value"))?;
            cfg.set(key.trim(), value.trim())?;
        }
        if let Some(dir) = out_override {
            cfg.out_dir = dir.to_path_buf();
        }
        // Environment override of the output root: runs land under it.
        if let Ok(root) = std::env::var("KGMP_OUT_ROOT") {
            if !root.is_empty() {
                cfg.out_dir = Path::new(&root).join(&cfg.out_dir);
            }
        }
        cfg.refresh_raw();
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let bad = |e: String| format!("config key '{key}': {e}");
        let parse_f64 = |v: &str| v.parse::<f64>().map_err(|e| e.to_string());
        let parse_usize = |v: &str| v.parse::<usize>().map_err(|e| e.to_string());
        let parse_bool = |v: &str| match v {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(format!("expected bool, got '{v}'")),
        };
        let parse_list = |v: &str| -> Result<Vec<f64>, String> {
            v.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| e.to_string()))
                .collect()
        };
        match key {
            "grid.nr" => self.nr = parse_usize(value).map_err(bad)?,
            "grid.nz" => self.nz = parse_usize(value).map_err(bad)?,
            "grid.r" => self.r_max = parse_f64(value).map_err(bad)?,
            "grid.l" => self.z_half = parse_f64(value).map_err(bad)?,
            "phys.m" => self.m = parse_f64(value).map_err(bad)?,
            "phys.omega" => self.omega = parse_f64(value).map_err(bad)?,
            "phys.q" => self.q = parse_f64(value).map_err(bad)?,
            "phys.ell" => self.ell = value.parse::<i32>().map_err(|e| bad(e.to_string()))?,
            "phys.mu" => self.mu = parse_f64(value).map_err(bad)?,
            "model.powers" => self.powers = parse_list(value).map_err(bad)?,
            "model.coeffs" => self.coeffs = parse_list(value).map_err(bad)?,
            "model.sigma" => {
                self.sigma = if value.is_empty() { None } else { Some(parse_f64(value).map_err(bad)?) }
            }
            "solve.route" => {
                self.route = match value {
                    "auto" => RouteChoice::Auto,
                    "natural-constraint" | "nehari" => RouteChoice::NaturalConstraint,
                    "mountain-pass" => RouteChoice::MountainPass,
                    _ => return Err(bad(format!("unknown route '{value}'"))),
                }
            }
            "solve.max_outer" => self.max_outer = parse_usize(value).map_err(bad)?,
            "solve.grad_tol" => self.grad_tol = parse_f64(value).map_err(bad)?,
            "solve.nehari_tol" => self.nehari_tol = parse_f64(value).map_err(bad)?,
            "solve.step0" => self.step0 = parse_f64(value).map_err(bad)?,
            "solve.backtrack" => self.backtrack = parse_f64(value).map_err(bad)?,
            "solve.armijo" => self.armijo = parse_f64(value).map_err(bad)?,
            "solve.recentre" => self.recentre = parse_bool(value).map_err(bad)?,
            "solve.seed_width" => self.seed_width = parse_f64(value).map_err(bad)?,
            "solve.seed_z0" => self.seed_z0 = parse_f64(value).map_err(bad)?,
            "solve.seeds" => self.seeds = parse_usize(value).map_err(bad)?,
            "solve.parallel_seeds" => self.parallel_seeds = parse_bool(value).map_err(bad)?,
            "mu.schedule" => self.mu_schedule = parse_list(value).map_err(bad)?,
            "out.dir" => self.out_dir = PathBuf::from(value),
            "out.svg" => self.svg = parse_bool(value).map_err(bad)?,
            "verify.probes" => self.verify_probes = parse_usize(value).map_err(bad)?,
            "verify.seed" => self.verify_seed = value.parse::<u64>().map_err(|e| bad(e.to_string()))?,
            "verify.oracle_n" => self.oracle_n = parse_usize(value).map_err(bad)?,
            _ => return Err(format!("unknown config key '{key}'")),
        }
        Ok(())
    }

    fn refresh_raw(&mut self) {
        let mut m = BTreeMap::new();
        m.insert("grid.nr".into(), self.nr.to_string());
        m.insert("grid.nz".into(), self.nz.to_string());
        m.insert("grid.r".into(), self.r_max.to_string());
        m.insert("grid.l".into(), self.z_half.to_string());
        m.insert("phys.m".into(), self.m.to_string());
        m.insert("phys.omega".into(), self.omega.to_string());
        m.insert("phys.q".into(), self.q.to_string());
        m.insert("phys.ell".into(), self.ell.to_string());
        m.insert("phys.mu".into(), self.mu.to_string());
        m.insert("model.powers".into(), join_f64(&self.powers));
        m.insert("model.coeffs".into(), join_f64(&self.coeffs));
        m.insert(
            "model.sigma".into(),
            self.sigma.map(|s| s.to_string()).unwrap_or_default(),
        );
        m.insert(
            "solve.route".into(),
            match self.route {
                RouteChoice::Auto => "auto",
                RouteChoice::NaturalConstraint => "natural-constraint",
                RouteChoice::MountainPass => "mountain-pass",
            }
            .into(),
        );
        m.insert("solve.max_outer".into(), self.max_outer.to_string());
        m.insert("solve.grad_tol".into(), self.grad_tol.to_string());
        m.insert("solve.nehari_tol".into(), self.nehari_tol.to_string());
        m.insert("solve.step0".into(), self.step0.to_string());
        m.insert("solve.backtrack".into(), self.backtrack.to_string());
        m.insert("solve.armijo".into(), self.armijo.to_string());
        m.insert("solve.recentre".into(), self.recentre.to_string());
        m.insert("solve.seed_width".into(), self.seed_width.to_string());
        m.insert("solve.seed_z0".into(), self.seed_z0.to_string());
        m.insert("solve.seeds".into(), self.seeds.to_string());
        m.insert("solve.parallel_seeds".into(), self.parallel_seeds.to_string());
        m.insert("mu.schedule".into(), join_f64(&self.mu_schedule));
        m.insert("out.dir".into(), self.out_dir.display().to_string());
        m.insert("out.svg".into(), self.svg.to_string());
        m.insert("verify.probes".into(), self.verify_probes.to_string());
        m.insert("verify.seed".into(), self.verify_seed.to_string());
        m.insert("verify.oracle_n".into(), self.oracle_n.to_string());
        self.raw = m;
    }

    pub fn phys_params(&self) -> Result<PhysParams, String> {
        PhysParams::new(self.m, self.omega, self.q, self.ell, self.mu).map_err(|e| e.to_string())
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity, String> {
        if self.coeffs.len() != self.powers.len() {
            return Err(format!(
                "model.coeffs has {} entries but model.powers has {}",
                self.coeffs.len(),
                self.powers.len()
            ));
        }
        let terms: Vec<(f64, f64)> =
            self.coeffs.iter().copied().zip(self.powers.iter().copied()).collect();
        let n = Nonlinearity::sum_of_powers(&terms).map_err(|e| e.to_string())?;
        match self.sigma {
            Some(s) => n.with_sigma(s).map_err(|e| e.to_string()),
            None => Ok(n),
        }
    }

    pub fn grid(&self) -> Result<kgmp::grid::CylGrid, String> {
        kgmp::grid::build_grid(self.nr, self.nz, self.r_max, self.z_half).map_err(|e| e.to_string())
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            max_outer: self.max_outer,
            grad_tol: self.grad_tol,
            nehari_tol: self.nehari_tol,
            step0: self.step0,
            backtrack_ratio: self.backtrack,
            armijo_c: self.armijo,
            recentre: self.recentre,
            route: self.route,
            seed: SeedProfile { width: self.seed_width, z_offset: self.seed_z0 },
        }
    }

    /// Full validation; nothing may be written if this fails.
    pub fn validate(&self) -> Result<(), String> {
        self.grid()?;
        self.phys_params()?;
        let n = self.nonlinearity()?;
        self.solve_options().validate().map_err(|e| e.to_string())?;
        let rep = kgmp::model::check_assumptions(&n, &self.phys_params()?);
        if rep.route.is_none() {
            return Err(
                "model admits no solver route: hypotheses or the frequency admissibility window fail"
                    .into(),
            );
        }
        Ok(())
    }
}
