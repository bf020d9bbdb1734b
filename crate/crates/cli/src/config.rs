use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use microcavity::husimi::HusimiGrid;
use microcavity::tracker::TrackConfig;
use microcavity::wavesolver::{CavityConfig, ModeLabel, Parity, Polarization};
use serde::{Deserialize, Serialize};

/// Which member of each circle doublet is followed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Cos,
    Sin,
}

/// Everything a run needs; serialized next to the outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: f64,
    pub polarization: Polarization,
    pub e_start: f64,
    pub e_end: f64,
    pub e_steps: usize,
    /// `(m, l)` pairs.
    pub labels: Vec<(u32, u32)>,
    pub family: Family,
    /// Fixed Nyström node count; automatic when absent.
    pub bem_elements: Option<usize>,
    pub points_per_wavelength: f64,
    pub husimi_ns: usize,
    pub husimi_np: usize,
    /// Critical line override; `1/n` when absent.
    pub p_c: Option<f64>,
    pub tau: f64,
    /// Upper end of the self-energy analysis window.
    pub e_max: f64,
    pub pairs: Vec<((u32, u32), (u32, u32))>,
    pub out: PathBuf,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let cav = CavityConfig::default();
        Self {
            n: cav.n,
            polarization: cav.polarization,
            e_start: 0.0,
            e_end: 0.6,
            e_steps: 61,
            labels: paper_labels(),
            family: Family::Cos,
            bem_elements: None,
            points_per_wavelength: cav.points_per_wavelength,
            husimi_ns: 256,
            husimi_np: 256,
            p_c: None,
            tau: microcavity::analysis::DEFAULT_TAU,
            e_max: 0.6,
            pairs: Vec::new(),
            out: PathBuf::from("out"),
            threads: 1,
        }
    }
}

/// `l = 1` for `m = 3..7`, then `l = 2..6` for `m = 3, 4, 5`.
pub fn paper_labels() -> Vec<(u32, u32)> {
    let mut v: Vec<(u32, u32)> = (3..=7).map(|m| (m, 1)).collect();
    for m in 3..=5 {
        v.extend((2..=6).map(|l| (m, l)));
    }
    v
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n > 1.0) || !self.n.is_finite() {
            bail!("config: n must exceed 1, got {}", self.n);
        }
        if !(self.e_start >= 0.0 && self.e_end > self.e_start && self.e_end <= 0.99) {
            bail!("config: need 0 ≤ e_start < e_end ≤ 0.99, got [{}, {}]", self.e_start, self.e_end);
        }
        if self.e_steps < 2 {
            bail!("config: e_steps must be at least 2");
        }
        if self.labels.is_empty() {
            bail!("config: labels must not be empty");
        }
        for &(m, l) in &self.labels {
            if l == 0 {
                bail!("config: label ({m}, {l}) has radial index 0");
            }
            if m == 0 && self.family == Family::Sin {
                bail!("config: m = 0 has no sine partner");
            }
        }
        let mut seen = self.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.labels.len() {
            bail!("config: duplicate labels");
        }
        for (a, b) in &self.pairs {
            for x in [a, b] {
                if !self.labels.contains(x) {
                    bail!("config: pair member ({}, {}) is not among the labels", x.0, x.1);
                }
            }
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            bail!("config: tau must lie in (0, 1)");
        }
        if let Some(pc) = self.p_c {
            if !(pc > 0.0 && pc < 1.0) {
                bail!("config: p_c must lie in (0, 1)");
            }
        }
        if self.threads == 0 {
            bail!("config: threads must be positive");
        }
        self.husimi_grid_checked()?;
        self.track_config().cavity.validate().map_err(|e| anyhow::anyhow!("config: {e}"))?;
        Ok(())
    }

    fn husimi_grid_checked(&self) -> Result<HusimiGrid> {
        if self.husimi_ns == 0 || self.husimi_np < microcavity::husimi::MIN_NP {
            bail!("config: Husimi grid needs ns ≥ 1 and np ≥ {}", microcavity::husimi::MIN_NP);
        }
        Ok(self.husimi_grid())
    }

    pub fn husimi_grid(&self) -> HusimiGrid {
        HusimiGrid { ns: self.husimi_ns, np: self.husimi_np }
    }

    pub fn critical_p(&self) -> f64 {
        self.p_c.unwrap_or(1.0 / self.n)
    }

    pub fn label(&self, (m, l): (u32, u32)) -> ModeLabel {
        let parity = match self.family {
            Family::Cos => Parity::cosine(m),
            Family::Sin => Parity::sine(m),
        };
        ModeLabel { m, l, parity }
    }

    pub fn mode_labels(&self) -> Vec<ModeLabel> {
        self.labels.iter().map(|&x| self.label(x)).collect()
    }

    pub fn track_config(&self) -> TrackConfig {
        TrackConfig {
            cavity: CavityConfig {
                n: self.n,
                elements: self.bem_elements,
                points_per_wavelength: self.points_per_wavelength,
                polarization: self.polarization,
                ..CavityConfig::default()
            },
            ..TrackConfig::default()
        }
    }

    pub fn requested_grid(&self) -> Vec<f64> {
        let h = (self.e_end - self.e_start) / (self.e_steps - 1) as f64;
        (0..self.e_steps)
            .map(|i| if i + 1 == self.e_steps { self.e_end } else { self.e_start + h * i as f64 })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.labels.len(), 20);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            RunConfig { e_end: 0.995, ..RunConfig::default() },
            RunConfig { e_steps: 1, ..RunConfig::default() },
            RunConfig { labels: vec![], ..RunConfig::default() },
            RunConfig { pairs: vec![((9, 9), (3, 1))], ..RunConfig::default() },
            RunConfig { labels: vec![(3, 1), (3, 1)], ..RunConfig::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"labels": [[5, 5]], "e_end": 0.1, "e_steps": 3}"#).unwrap();
        assert_eq!(c.requested_grid(), vec![0.0, 0.05, 0.1]);
        assert_eq!(c.n, 3.3);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
