//! Campaign configuration: a TOML tree with defaults and full validation.
//!
//! Every invariant violation is reported with its field path; violations are
//! collected so one load reports everything wrong at once.

use super::IoError;
use crate::element::Element;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub seed: u64,
    pub out_dir: String,
    /// Worker threads; 0 means use the default pool size.
    pub workers: usize,
    /// External pressure, eV/Å³.
    pub pressure: f64,
    pub composition: CompositionConfig,
    pub generator: GeneratorConfig,
    pub oracle: OracleConfig,
    pub thresholds: ThresholdConfig,
    pub active: ActiveConfig,
    pub fit: FitConfig,
    pub temperature: TemperatureConfig,
    /// Element reference energies μ_e, eV/atom, keyed by symbol.
    pub references: BTreeMap<String, f64>,
    pub screen: ScreenConfig,
    pub md: MdConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            seed: 42,
            out_dir: "matscreen-out".into(),
            workers: 0,
            pressure: 0.0,
            composition: CompositionConfig::default(),
            generator: GeneratorConfig::default(),
            oracle: OracleConfig::default(),
            thresholds: ThresholdConfig::default(),
            active: ActiveConfig::default(),
            fit: FitConfig::default(),
            temperature: TemperatureConfig::default(),
            references: BTreeMap::new(),
            screen: ScreenConfig::default(),
            md: MdConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompositionConfig {
    /// Fixed stoichiometry of generated cells, element symbol → count.
    pub elements: BTreeMap<String, usize>,
    /// Upper bound on atoms per generated unit cell.
    #[serde(default = "default_max_atoms")]
    pub max_atoms: usize,
}

fn default_max_atoms() -> usize {
    30
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Sampled volume per atom range, Å³.
    pub volume_per_atom: [f64; 2],
    /// Sampled cell angle range, degrees.
    pub angle_range: [f64; 2],
    /// Ratio of each a:b:c length allowed relative to the cubic edge.
    pub length_ratio_range: [f64; 2],
    /// Minimum pair distance as a fraction of the covalent-radius sum.
    pub min_dist_scale: f64,
    /// Rejection-sampling attempt cap per requested structure.
    pub max_attempts: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            volume_per_atom: [8.0, 25.0],
            angle_range: [60.0, 120.0],
            length_ratio_range: [0.6, 1.6],
            min_dist_scale: 0.7,
            max_attempts: 5000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub seed: u64,
    pub cutoff: f64,
    pub three_body_strength: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { seed: 7, cutoff: 5.0, three_body_strength: 0.3 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    /// Ensemble energy-std flagging threshold, eV/atom.
    pub energy_std: f64,
    /// Ensemble force-std flagging threshold, eV/Å.
    pub force_std: f64,
    /// Optional stress-std threshold, eV/Å³ (disabled by default).
    pub stress_std: Option<f64>,
    /// Fraction of candidates that must pass for the loop to stop.
    pub pass_fraction: f64,
    pub max_cycles: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            energy_std: 0.040,
            force_std: 1.0,
            stress_std: None,
            pass_fraction: 0.90,
            max_cycles: 15,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActiveConfig {
    pub initial_labeled: usize,
    pub per_cycle: usize,
    pub validation_count: usize,
    pub ensemble_size: usize,
    /// Relax candidates with the current ensemble before flagging.
    pub relax_before_flagging: bool,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        ActiveConfig {
            initial_labeled: 50,
            per_cycle: 60,
            validation_count: 100,
            ensemble_size: 4,
            relax_before_flagging: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Held-out validation fraction.
    pub holdout: f64,
    pub alpha_energy: f64,
    pub alpha_force: f64,
    pub alpha_stress: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            hidden: 16,
            epochs: 300,
            batch_size: 8,
            learning_rate: 0.01,
            momentum: 0.9,
            holdout: 0.1,
            alpha_energy: 1.0,
            alpha_force: 10.0,
            alpha_stress: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TempGridSpec {
    /// "start..stop step s", inclusive endpoints.
    Range(String),
    List(Vec<f64>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemperatureConfig {
    pub grid: TempGridSpec,
    /// Ranking temperature T*, K.
    pub select: f64,
}

impl Default for TemperatureConfig {
    fn default() -> Self {
        TemperatureConfig {
            grid: TempGridSpec::Range("0..2000 step 50".into()),
            select: 1750.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenConfig {
    /// Candidates generated per campaign.
    pub count: usize,
    /// Most-stable candidates carried into the free-energy table.
    pub top_gibbs: usize,
    /// Ranked candidates carried into MD.
    pub top_md: usize,
    pub relax_cell: bool,
    pub qgrid: [usize; 3],
    pub supercell: [usize; 3],
    pub relax_max_iter: usize,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        ScreenConfig {
            count: 60,
            top_gibbs: 50,
            top_md: 10,
            relax_cell: true,
            qgrid: [4, 4, 4],
            supercell: [2, 2, 2],
            relax_max_iter: 200,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdConfig {
    pub temperature: f64,
    pub time_ps: f64,
    pub timestep_fs: f64,
    /// Langevin friction, fs⁻¹.
    pub friction: f64,
    pub stride: usize,
}

impl Default for MdConfig {
    fn default() -> Self {
        MdConfig {
            temperature: 300.0,
            time_ps: 1.0,
            timestep_fs: 1.0,
            friction: 0.01,
            stride: 5,
        }
    }
}

fn parse_range_grid(s: &str) -> Result<Vec<f64>, String> {
    // "<start>..<stop> step <step>"
    let (range, step) = s
        .split_once("step")
        .ok_or_else(|| format!("expected \"start..stop step s\", got {s:?}"))?;
    let (lo, hi) = range
        .trim()
        .split_once("..")
        .ok_or_else(|| format!("expected \"start..stop\", got {range:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("range start: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("range stop: {e}"))?;
    let step: f64 = step.trim().parse().map_err(|e| format!("range step: {e}"))?;
    if step <= 0.0 {
        return Err(format!("step must be positive, got {step}"));
    }
    if hi < lo {
        return Err(format!("stop {hi} below start {lo}"));
    }
    let n = ((hi - lo) / step).round() as usize + 1;
    Ok((0..n).map(|k| lo + k as f64 * step).collect())
}

impl CampaignConfig {
    /// Resolved, validated temperature grid, K.
    pub fn temperatures(&self) -> Vec<f64> {
        match &self.temperature.grid {
            TempGridSpec::Range(s) => parse_range_grid(s).unwrap_or_default(),
            TempGridSpec::List(v) => v.clone(),
        }
    }

    /// Composition as typed elements, in symbol order.
    pub fn composition_elements(&self) -> Result<Vec<(Element, usize)>, IoError> {
        self.composition
            .elements
            .iter()
            .map(|(sym, &count)| {
                Element::from_symbol(sym)
                    .map(|e| (e, count))
                    .map_err(|_| IoError::Config(format!(
                        "composition.elements.{sym}: unknown element symbol"
                    )))
            })
            .collect()
    }

    /// Reference chemical potentials as typed elements.
    pub fn reference_energies(&self) -> Result<BTreeMap<Element, f64>, IoError> {
        self.references
            .iter()
            .map(|(sym, &mu)| {
                Element::from_symbol(sym)
                    .map(|e| (e, mu))
                    .map_err(|_| IoError::Config(format!(
                        "references.{sym}: unknown element symbol"
                    )))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let mut errs: Vec<String> = Vec::new();
        let mut check = |ok: bool, path: &str, msg: String| {
            if !ok {
                errs.push(format!("{path}: {msg}"));
            }
        };

        let th = &self.thresholds;
        check(th.energy_std > 0.0, "thresholds.energy_std",
              format!("must be > 0, got {}", th.energy_std));
        check(th.force_std > 0.0, "thresholds.force_std",
              format!("must be > 0, got {}", th.force_std));
        if let Some(s) = th.stress_std {
            check(s > 0.0, "thresholds.stress_std", format!("must be > 0, got {s}"));
        }
        check(th.pass_fraction > 0.0 && th.pass_fraction <= 1.0, "thresholds.pass_fraction",
              format!("must be in (0, 1], got {}", th.pass_fraction));
        check(th.max_cycles >= 1, "thresholds.max_cycles", "must be >= 1".into());

        match &self.temperature.grid {
            TempGridSpec::Range(s) => {
                let parsed = parse_range_grid(s);
                let msg = parsed.as_ref().err().cloned().unwrap_or_default();
                check(parsed.is_ok(), "temperature.grid", msg);
            }
            TempGridSpec::List(v) => {
                check(!v.is_empty(), "temperature.grid", "must not be empty".into());
                check(v.windows(2).all(|w| w[0] < w[1]), "temperature.grid",
                      "must be strictly ascending".into());
                check(v.iter().all(|&t| t >= 0.0), "temperature.grid",
                      "temperatures must be >= 0 K".into());
            }
        }
        check(self.temperature.select >= 0.0, "temperature.select",
              format!("must be >= 0 K, got {}", self.temperature.select));

        let g = &self.generator;
        check(g.volume_per_atom[0] > 0.0 && g.volume_per_atom[0] < g.volume_per_atom[1],
              "generator.volume_per_atom",
              format!("must satisfy 0 < lo < hi, got {:?}", g.volume_per_atom));
        check(g.angle_range[0] > 0.0 && g.angle_range[1] < 180.0
                  && g.angle_range[0] <= g.angle_range[1],
              "generator.angle_range",
              format!("must lie inside (0, 180), got {:?}", g.angle_range));
        check(g.length_ratio_range[0] > 0.0 && g.length_ratio_range[0] <= g.length_ratio_range[1],
              "generator.length_ratio_range",
              format!("must satisfy 0 < lo <= hi, got {:?}", g.length_ratio_range));
        check(g.min_dist_scale > 0.0, "generator.min_dist_scale",
              format!("must be > 0, got {}", g.min_dist_scale));
        check(g.max_attempts >= 1, "generator.max_attempts", "must be >= 1".into());

        let total: usize = self.composition.elements.values().sum();
        for (sym, &count) in &self.composition.elements {
            check(Element::from_symbol(sym).is_ok(), "composition.elements",
                  format!("unknown element symbol {sym:?}"));
            check(count >= 1, "composition.elements",
                  format!("{sym} count must be >= 1"));
        }
        check(self.composition.elements.is_empty() || total <= self.composition.max_atoms,
              "composition.max_atoms",
              format!("stoichiometry needs {total} atoms, above the cap {}",
                      self.composition.max_atoms));

        for sym in self.references.keys() {
            check(Element::from_symbol(sym).is_ok(), "references",
                  format!("unknown element symbol {sym:?}"));
        }

        let f = &self.fit;
        check(f.hidden >= 1, "fit.hidden", "must be >= 1".into());
        check(f.epochs >= 1, "fit.epochs", "must be >= 1".into());
        check(f.batch_size >= 1, "fit.batch_size", "must be >= 1".into());
        check(f.learning_rate > 0.0, "fit.learning_rate",
              format!("must be > 0, got {}", f.learning_rate));
        check((0.0..1.0).contains(&f.momentum), "fit.momentum",
              format!("must be in [0, 1), got {}", f.momentum));
        check(f.holdout > 0.0 && f.holdout < 1.0, "fit.holdout",
              format!("must be in (0, 1), got {}", f.holdout));
        check(f.alpha_energy >= 0.0 && f.alpha_force >= 0.0 && f.alpha_stress >= 0.0,
              "fit.alpha_*", "loss weights must be >= 0".into());

        let a = &self.active;
        check(a.ensemble_size >= 2, "active.ensemble_size",
              format!("must be >= 2, got {}", a.ensemble_size));
        check(a.initial_labeled >= 1, "active.initial_labeled", "must be >= 1".into());
        check(a.per_cycle >= 1, "active.per_cycle", "must be >= 1".into());
        check(a.validation_count >= 1, "active.validation_count", "must be >= 1".into());

        let m = &self.md;
        check(m.timestep_fs > 0.0 && m.timestep_fs <= 2.0, "md.timestep_fs",
              format!("must be in (0, 2] fs, got {}", m.timestep_fs));
        check(m.temperature >= 0.0, "md.temperature",
              format!("must be >= 0 K, got {}", m.temperature));
        check(m.friction >= 0.0, "md.friction",
              format!("must be >= 0, got {}", m.friction));
        check(m.time_ps > 0.0, "md.time_ps", format!("must be > 0, got {}", m.time_ps));
        check(m.stride >= 1, "md.stride", "must be >= 1".into());

        let sc = &self.screen;
        check(sc.count >= 1, "screen.count", "must be >= 1".into());
        check(sc.top_gibbs >= 1, "screen.top_gibbs", "must be >= 1".into());
        check(sc.top_md >= 1, "screen.top_md", "must be >= 1".into());
        check(sc.qgrid.iter().all(|&q| q >= 1), "screen.qgrid",
              "components must be >= 1".into());
        check(sc.supercell.iter().all(|&r| r >= 1), "screen.supercell",
              "components must be >= 1".into());
        check(sc.relax_max_iter >= 1, "screen.relax_max_iter", "must be >= 1".into());

        check(self.pressure.is_finite(), "pressure", "must be finite".into());

        if errs.is_empty() {
            Ok(())
        } else {
            Err(IoError::Config(errs.join("\n")))
        }
    }
}

/// Parse and validate a TOML campaign configuration.
pub fn load_config(text: &str) -> Result<CampaignConfig, IoError> {
    let cfg: CampaignConfig =
        toml::from_str(text).map_err(|e| IoError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gets_reference_defaults() {
        let cfg = load_config("").unwrap();
        assert_eq!(cfg.thresholds.energy_std, 0.040);
        assert_eq!(cfg.thresholds.force_std, 1.0);
        assert_eq!(cfg.thresholds.pass_fraction, 0.90);
        assert_eq!(cfg.thresholds.max_cycles, 15);
        assert_eq!(cfg.thresholds.stress_std, None);
    }

    #[test]
    fn empty_thresholds_section_gets_defaults() {
        let cfg = load_config("[thresholds]\n").unwrap();
        assert_eq!(cfg.thresholds.energy_std, 0.040);
        assert_eq!(cfg.thresholds.force_std, 1.0);
        assert_eq!(cfg.thresholds.pass_fraction, 0.90);
    }

    #[test]
    fn pass_fraction_above_one_rejected() {
        let err = load_config("[thresholds]\npass_fraction = 1.5\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("thresholds.pass_fraction"), "{msg}");
    }

    #[test]
    fn range_grid_inclusive_count() {
        let cfg = load_config("[temperature]\ngrid = \"0..2000 step 50\"\n").unwrap();
        let grid = cfg.temperatures();
        assert_eq!(grid.len(), 41);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[40], 2000.0);
    }

    #[test]
    fn explicit_grid_must_ascend() {
        let err = load_config("[temperature]\ngrid = [300.0, 200.0]\n").unwrap_err();
        assert!(err.to_string().contains("ascending"));
    }

    #[test]
    fn multiple_violations_all_reported() {
        let err = load_config(
            "[thresholds]\nenergy_std = -1.0\npass_fraction = 2.0\n[md]\ntimestep_fs = 5.0\n",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("thresholds.energy_std"));
        assert!(msg.contains("thresholds.pass_fraction"));
        assert!(msg.contains("md.timestep_fs"));
    }

    #[test]
    fn composition_parses_to_elements() {
        let cfg = load_config(
            "[composition]\nelements = { Ca = 3, Si = 1, O = 5 }\nmax_atoms = 30\n",
        )
        .unwrap();
        let comp = cfg.composition_elements().unwrap();
        let total: usize = comp.iter().map(|(_, c)| c).sum();
        assert_eq!(total, 9);
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(load_config("definitely_not_a_field = 1\n").is_err());
    }

    #[test]
    fn unknown_composition_element_rejected() {
        let err = load_config("[composition]\nelements = { Qq = 1 }\n").unwrap_err();
        assert!(err.to_string().contains("Qq"));
    }
}
