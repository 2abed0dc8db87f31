//! Flat `key = value` experiment configuration with `#` comments.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use masga_core::{ReplacementMode, TestFunction};

use crate::dataset::SyntheticKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    LogisticGaussian,
    LogisticMixture,
    GaussianMixture2d,
    Ou,
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "logistic_gaussian" => Self::LogisticGaussian,
            "logistic_mixture" => Self::LogisticMixture,
            "gaussian_mixture_2d" => Self::GaussianMixture2d,
            "ou" => Self::Ou,
            _ => return Err(format!("unknown model {s:?}")),
        })
    }
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::LogisticGaussian => "logistic_gaussian",
            Self::LogisticMixture => "logistic_mixture",
            Self::GaussianMixture2d => "gaussian_mixture_2d",
            Self::Ou => "ou",
        }
    }

    pub fn synthetic_kind(self) -> SyntheticKind {
        match self {
            Self::LogisticGaussian | Self::LogisticMixture => SyntheticKind::Logistic,
            Self::GaussianMixture2d => SyntheticKind::Mixture,
            Self::Ou => SyntheticKind::Ou,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    Masga,
    MimcPlain,
    AmlmcSub,
    AmlmcDisc,
    Mc,
    SgldCv,
}

impl FromStr for EstimatorKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "masga" => Self::Masga,
            "mimc_plain" => Self::MimcPlain,
            "amlmc_sub" => Self::AmlmcSub,
            "amlmc_disc" => Self::AmlmcDisc,
            "mc" => Self::Mc,
            "sgld_cv" => Self::SgldCv,
            _ => return Err(format!("unknown estimator {s:?}")),
        })
    }
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Masga => "masga",
            Self::MimcPlain => "mimc_plain",
            Self::AmlmcSub => "amlmc_sub",
            Self::AmlmcDisc => "amlmc_disc",
            Self::Mc => "mc",
            Self::SgldCv => "sgld_cv",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Synthetic { m: usize, d: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum StartPoint {
    Origin,
    /// Gradient ascent on the full-data drift from the origin.
    Mode { iterations: usize, step: f64 },
    Explicit(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub data: DataSource,
    pub s0: usize,
    pub h0: f64,
    /// Fine steps at discretisation level 0; the terminal time is `n0 h0`.
    pub n0: usize,
    pub f: TestFunction,
    pub estimator: EstimatorKind,
    pub epsilons: Vec<f64>,
    pub master_seed: u64,
    pub x0: StartPoint,
    pub n_pilot: u64,
    pub l_init: u32,
    pub l_max: u32,
    pub alpha_assumed: f64,
    pub replacement: ReplacementMode,
    /// Level whose batch size and step the single-level estimators use.
    pub mc_level: u32,
    pub ou_alpha: f64,
    pub mixture_variance: f64,
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::LogisticGaussian,
            data: DataSource::Synthetic { m: 1000, d: 5, seed: 7 },
            s0: 4,
            h0: 0.005,
            n0: 100,
            f: TestFunction::NormSq,
            estimator: EstimatorKind::Masga,
            epsilons: vec![0.1],
            master_seed: 1,
            x0: StartPoint::Mode { iterations: 500, step: 0.2 },
            n_pilot: 100,
            l_init: 2,
            l_max: 8,
            alpha_assumed: 1.0,
            replacement: ReplacementMode::Without,
            mc_level: 2,
            ou_alpha: 1.0,
            mixture_variance: 5.0,
            threads: 0,
        }
    }
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect()
}

fn parse<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("invalid value {v:?}"))
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Option<Self> {
        let base = Self::default();
        Some(match name {
            "logistic-small" => Self { epsilons: vec![0.2, 0.1, 0.05, 0.025], ..base },
            "logistic-mixture-prior" => {
                Self { model: ModelKind::LogisticMixture, epsilons: vec![0.2, 0.1, 0.05, 0.025], ..base }
            }
            "amlmc-logistic" => Self {
                estimator: EstimatorKind::AmlmcSub,
                h0: 0.005 / 16.0,
                n0: 1600,
                epsilons: vec![0.2, 0.1, 0.05, 0.025],
                ..base
            },
            "mixture-2d" => Self {
                model: ModelKind::GaussianMixture2d,
                data: DataSource::Synthetic { m: 200, d: 2, seed: 7 },
                estimator: EstimatorKind::AmlmcSub,
                s0: 2,
                h0: 1.0,
                n0: 200_000,
                x0: StartPoint::Origin,
                l_max: 6,
                ..base
            },
            "sgld-cv" => Self {
                estimator: EstimatorKind::SgldCv,
                h0: 0.5,
                n0: 100,
                epsilons: vec![0.2, 0.1, 0.05, 0.025],
                ..base
            },
            "ou" => Self {
                model: ModelKind::Ou,
                data: DataSource::Synthetic { m: 16, d: 1, seed: 7 },
                h0: 0.1,
                n0: 20,
                f: TestFunction::Coordinate(0),
                x0: StartPoint::Origin,
                s0: 2,
                l_max: 3,
                ..base
            },
            _ => return None,
        })
    }

    pub const PRESETS: &'static [&'static str] =
        &["logistic-small", "logistic-mixture-prior", "amlmc-logistic", "mixture-2d", "sgld-cv", "ou"];

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let DataSource::File(p) = &mut cfg.data {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Parse config text. A `preset = name` line, if present, must come first
    /// and supplies defaults for the remaining keys.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut synth = None::<(usize, usize, u64)>;
        let mut mode_iter = 500usize;
        let mut mode_step = 0.2f64;
        let mut x0_key = None::<String>;
        let mut t_key = None::<f64>;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config { line: line_no, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let synth_ref = synth.get_or_insert(match &cfg.data {
                DataSource::Synthetic { m, d, seed } => (*m, *d, *seed),
                DataSource::File(_) => (1000, 5, 7),
            });
            let r: std::result::Result<(), String> = (|| {
                match key {
                    "preset" => {
                        cfg = Self::preset(value).ok_or_else(|| format!("unknown preset {value:?}"))?;
                        if let DataSource::Synthetic { m, d, seed } = cfg.data {
                            *synth_ref = (m, d, seed);
                        }
                        if let StartPoint::Mode { iterations, step } = cfg.x0 {
                            mode_iter = iterations;
                            mode_step = step;
                        }
                    }
                    "model" => cfg.model = value.parse()?,
                    "data" | "dataset" => {
                        cfg.data = if value == "synthetic" {
                            DataSource::Synthetic { m: synth_ref.0, d: synth_ref.1, seed: synth_ref.2 }
                        } else {
                            DataSource::File(PathBuf::from(value))
                        }
                    }
                    "m" | "synthetic_m" => synth_ref.0 = parse(value)?,
                    "d" | "synthetic_d" => synth_ref.1 = parse(value)?,
                    "data_seed" => synth_ref.2 = parse(value)?,
                    "s0" => cfg.s0 = parse(value)?,
                    "h0" => cfg.h0 = parse(value)?,
                    "steps" | "n0" => cfg.n0 = parse(value)?,
                    "t" => t_key = Some(parse(value)?),
                    "f" => cfg.f = value.parse().map_err(|_| format!("unknown test function {value:?}"))?,
                    "estimator" => cfg.estimator = value.parse()?,
                    "epsilon" | "eps" => cfg.epsilons = parse_list(value)?,
                    "master_seed" | "seed" => cfg.master_seed = parse(value)?,
                    "x0" => x0_key = Some(value.to_string()),
                    "mode_iterations" => mode_iter = parse(value)?,
                    "mode_step" => mode_step = parse(value)?,
                    "n_pilot" => cfg.n_pilot = parse(value)?,
                    "l_init" => cfg.l_init = parse(value)?,
                    "l_max" => cfg.l_max = parse(value)?,
                    "alpha_assumed" => cfg.alpha_assumed = parse(value)?,
                    "replacement" => {
                        cfg.replacement = match value {
                            "with" => ReplacementMode::With,
                            "without" => ReplacementMode::Without,
                            _ => return Err(format!("replacement must be with or without, got {value:?}")),
                        }
                    }
                    "mc_level" => cfg.mc_level = parse(value)?,
                    "alpha" | "ou_alpha" => cfg.ou_alpha = parse(value)?,
                    "variance" | "mixture_variance" => cfg.mixture_variance = parse(value)?,
                    "threads" => cfg.threads = parse(value)?,
                    _ => return Err(format!("unknown key {key:?}")),
                }
                Ok(())
            })();
            r.map_err(err)?;
        }
        if let (DataSource::Synthetic { .. }, Some((m, d, seed))) = (&cfg.data, synth) {
            cfg.data = DataSource::Synthetic { m, d, seed };
        }
        if let Some(x0) = x0_key {
            cfg.x0 = match x0.as_str() {
                "origin" => StartPoint::Origin,
                "sgd_mode" | "mode" => StartPoint::Mode { iterations: mode_iter, step: mode_step },
                v => StartPoint::Explicit(
                    parse_list(v).map_err(|m| Error::Config { line: 0, message: format!("x0: {m}") })?,
                ),
            };
        } else if let StartPoint::Mode { .. } = cfg.x0 {
            cfg.x0 = StartPoint::Mode { iterations: mode_iter, step: mode_step };
        }
        if let Some(t) = t_key {
            let n = t / cfg.h0;
            if !(n >= 1.0) || (n - n.round()).abs() > 1e-9 * n {
                return Err(Error::Config { line: 0, message: "t / h0 must be a positive integer".into() });
            }
            cfg.n0 = n.round() as usize;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config { line: 0, message: m.into() });
        if self.s0 == 0 || self.n0 == 0 {
            return bad("s0 and steps must be positive");
        }
        if !(self.h0 > 0.0) {
            return bad("h0 must be positive");
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return bad("epsilon must be a non-empty list of positive numbers");
        }
        if self.n_pilot < 2 {
            return bad("n_pilot must be at least 2");
        }
        if self.l_init < 1 || self.l_max < self.l_init {
            return bad("need 1 <= l_init <= l_max");
        }
        Ok(())
    }

    /// Render as config text that parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        kv("model", self.model.name().into());
        match &self.data {
            DataSource::File(p) => kv("data", p.display().to_string()),
            DataSource::Synthetic { m, d, seed } => {
                kv("m", m.to_string());
                kv("d", d.to_string());
                kv("data_seed", seed.to_string());
                kv("data", "synthetic".into());
            }
        }
        kv("s0", self.s0.to_string());
        kv("h0", format!("{:?}", self.h0));
        kv("steps", self.n0.to_string());
        kv("f", self.f.to_string());
        kv("estimator", self.estimator.name().into());
        kv("epsilon", self.epsilons.iter().map(|e| format!("{e:?}")).collect::<Vec<_>>().join(","));
        kv("master_seed", self.master_seed.to_string());
        match &self.x0 {
            StartPoint::Origin => kv("x0", "origin".into()),
            StartPoint::Mode { iterations, step } => {
                kv("mode_iterations", iterations.to_string());
                kv("mode_step", format!("{step:?}"));
                kv("x0", "sgd_mode".into());
            }
            StartPoint::Explicit(v) => {
                kv("x0", v.iter().map(|e| format!("{e:?}")).collect::<Vec<_>>().join(","))
            }
        }
        kv("n_pilot", self.n_pilot.to_string());
        kv("l_init", self.l_init.to_string());
        kv("l_max", self.l_max.to_string());
        kv("alpha_assumed", format!("{:?}", self.alpha_assumed));
        kv(
            "replacement",
            match self.replacement {
                ReplacementMode::With => "with".into(),
                ReplacementMode::Without => "without".into(),
            },
        );
        kv("mc_level", self.mc_level.to_string());
        kv("ou_alpha", format!("{:?}", self.ou_alpha));
        kv("mixture_variance", format!("{:?}", self.mixture_variance));
        kv("threads", self.threads.to_string());
        s
    }
}
