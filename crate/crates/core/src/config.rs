//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys not present
//! keep their defaults; unknown keys are an error so typos surface early.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::corpus_io::normalize_newlines;
use crate::discretize::Thresholds;
use crate::prominence::AnnotationConfig;
use crate::taggers::{CrfHyper, EmbedHyper};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub annotation: AnnotationConfig,
    pub crf: CrfHyper,
    pub embed: EmbedHyper,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            annotation: AnnotationConfig::default(),
            crf: CrfHyper::default(),
            embed: EmbedHyper::default(),
            seed: 1,
            jobs: 1,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value for {key}: {value:?}")))
}

impl RunConfig {
    /// Reads a config file over the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in normalize_newlines(text).lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(idx + 1, format!("expected key = value, found {line:?}")))?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key. Does not re-validate; call [`RunConfig::validate`] after
    /// a batch of overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let a = &mut self.annotation;
        match key {
            "f0_min" => a.pitch.f0_min = parse_value(key, value)?,
            "f0_max" => a.pitch.f0_max = parse_value(key, value)?,
            "frame_shift" => a.pitch.frame_shift_s = parse_value(key, value)?,
            "window" => a.pitch.window_s = parse_value(key, value)?,
            "voicing_threshold" => a.pitch.voicing_threshold = parse_value(key, value)?,
            "sigma_f0" => a.sigma_f0_s = parse_value(key, value)?,
            "sigma_energy" => a.sigma_energy_s = parse_value(key, value)?,
            "sigma_duration" => a.sigma_dur_s = parse_value(key, value)?,
            "weight_f0" => a.composite.w_f0 = parse_value(key, value)?,
            "weight_energy" => a.composite.w_energy = parse_value(key, value)?,
            "weight_duration" => a.composite.w_dur = parse_value(key, value)?,
            "composite" => a.composite.mode = value.parse()?,
            "n_scales" => a.grid.n_scales = parse_value(key, value)?,
            "min_period" => a.grid.min_period_s = parse_value(key, value)?,
            "scales_per_octave" => a.grid.scales_per_octave = parse_value(key, value)?,
            "loma_seeding" => a.seeding = value.parse()?,
            "loma_value" => a.loma_value = value.parse()?,
            "theta1" => a.thresholds.theta1 = parse_value(key, value)?,
            "theta2" => {
                a.thresholds.theta2 = match value {
                    "none" | "" => None,
                    v => Some(parse_value(key, v)?),
                }
            }
            "classes" => a.n_classes = parse_value(key, value)?,
            "crf_l2" => self.crf.l2_lambda = parse_value(key, value)?,
            "crf_max_iterations" => self.crf.max_iterations = parse_value(key, value)?,
            "crf_tolerance" => self.crf.tolerance = parse_value(key, value)?,
            "embed_l2" => self.embed.l2_lambda = parse_value(key, value)?,
            "embed_max_iterations" => self.embed.max_iterations = parse_value(key, value)?,
            "embed_tolerance" => self.embed.tolerance = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "jobs" => self.jobs = parse_value(key, value)?,
            other => return Err(Error::invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.annotation;
        a.pitch.validate()?;
        a.composite.validate()?;
        a.grid.validate()?;
        Thresholds::new(a.thresholds.theta1, a.thresholds.theta2)?;
        crate::taggers::check_classes(a.n_classes)?;
        if a.n_classes == 3 && a.thresholds.theta2.is_none() {
            return Err(Error::invalid("3 classes need theta2"));
        }
        for (name, s) in [
            ("sigma_f0", a.sigma_f0_s),
            ("sigma_energy", a.sigma_energy_s),
            ("sigma_duration", a.sigma_dur_s),
        ] {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::invalid(format!("{name} must be non-negative, got {s}")));
            }
        }
        if self.jobs == 0 {
            return Err(Error::invalid("jobs must be at least 1"));
        }
        Ok(())
    }

    /// Serializes every key; `parse(to_text())` gives back the same config.
    pub fn to_text(&self) -> String {
        let a = &self.annotation;
        let theta2 = a
            .thresholds
            .theta2
            .map_or_else(|| "none".to_string(), |t| t.to_string());
        let pairs: Vec<(&str, String)> = vec![
            ("f0_min", a.pitch.f0_min.to_string()),
            ("f0_max", a.pitch.f0_max.to_string()),
            ("frame_shift", a.pitch.frame_shift_s.to_string()),
            ("window", a.pitch.window_s.to_string()),
            ("voicing_threshold", a.pitch.voicing_threshold.to_string()),
            ("sigma_f0", a.sigma_f0_s.to_string()),
            ("sigma_energy", a.sigma_energy_s.to_string()),
            ("sigma_duration", a.sigma_dur_s.to_string()),
            ("weight_f0", a.composite.w_f0.to_string()),
            ("weight_energy", a.composite.w_energy.to_string()),
            ("weight_duration", a.composite.w_dur.to_string()),
            ("composite", a.composite.mode.to_string()),
            ("n_scales", a.grid.n_scales.to_string()),
            ("min_period", a.grid.min_period_s.to_string()),
            ("scales_per_octave", a.grid.scales_per_octave.to_string()),
            ("loma_seeding", a.seeding.to_string()),
            ("loma_value", a.loma_value.to_string()),
            ("theta1", a.thresholds.theta1.to_string()),
            ("theta2", theta2),
            ("classes", a.n_classes.to_string()),
            ("crf_l2", self.crf.l2_lambda.to_string()),
            ("crf_max_iterations", self.crf.max_iterations.to_string()),
            ("crf_tolerance", self.crf.tolerance.to_string()),
            ("embed_l2", self.embed.l2_lambda.to_string()),
            ("embed_max_iterations", self.embed.max_iterations.to_string()),
            ("embed_tolerance", self.embed.tolerance.to_string()),
            ("seed", self.seed.to_string()),
            ("jobs", self.jobs.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in pairs {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }
}
