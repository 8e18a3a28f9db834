//! Run configuration: JSON file, every section optional, validated in full
//! before any numerics run.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thinsw::thin_analysis::BasisConvention;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub domain: Domain,
    pub params: ParamsConfig,
    pub sw: SwConfig,
    pub study: StudyConfig,
    pub korn: KornConfig,
    pub probes: ProbesConfig,
    pub laplace: LaplaceConfig,
    pub lagrangian: LagrangianConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Domain {
    /// Horizontal dimension.
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    #[serde(rename = "L")]
    pub length: f64,
}

impl Default for Domain {
    fn default() -> Self {
        Domain {
            n: 1,
            big_n: 32,
            length: 2.0 * std::f64::consts::PI,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(rename = "F")]
    pub froude: f64,
    #[serde(rename = "Re")]
    pub reynolds: f64,
    pub gamma_bar: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig {
            froude: 1.0,
            reynolds: 1.0,
            gamma_bar: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub amplitude: f64,
    pub wavenumber: u32,
    pub velocity_amplitude: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            amplitude: 0.05,
            wavenumber: 1,
            velocity_amplitude: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwConfig {
    pub init: InitConfig,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
}

impl Default for SwConfig {
    fn default() -> Self {
        SwConfig {
            init: InitConfig::default(),
            t_final: 1.0,
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub eps_list: Vec<f64>,
    pub t_eval: f64,
    pub nz: usize,
    /// Repeat the study with `N` and `nz` doubled and report slope changes.
    pub refine: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            eps_list: vec![0.1, 0.05, 0.025, 0.0125],
            t_eval: 1.0,
            nz: 16,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for MGrid {
    fn default() -> Self {
        MGrid {
            min: 0.01,
            max: 50.0,
            count: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KornConfig {
    #[serde(rename = "M_grid")]
    pub m_grid: MGrid,
    pub sigma_count: usize,
    pub quad_nodes: usize,
    pub basis: BasisConvention,
}

impl Default for KornConfig {
    fn default() -> Self {
        KornConfig {
            m_grid: MGrid::default(),
            sigma_count: 8,
            quad_nodes: 64,
            basis: BasisConvention::Derived,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbesConfig {
    pub eps_list: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl Default for ProbesConfig {
    fn default() -> Self {
        ProbesConfig {
            eps_list: vec![0.1, 0.01, 0.001],
            samples: 64,
            seed: 20_240_917,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaplaceConfig {
    pub k_max: usize,
    pub eps_list: Vec<f64>,
    pub nz: usize,
}

impl Default for LaplaceConfig {
    fn default() -> Self {
        LaplaceConfig {
            k_max: 8,
            eps_list: vec![0.1, 0.01, 0.001],
            nz: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LagrangianConfig {
    pub levels: usize,
    /// Chart rows are written every `output_every` steps.
    pub output_every: usize,
}

impl Default for LagrangianConfig {
    fn default() -> Self {
        LagrangianConfig {
            levels: 5,
            output_every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

impl OutputConfig {
    pub fn csv(&self) -> bool {
        self.formats.iter().any(|f| f == "csv")
    }

    pub fn json(&self) -> bool {
        self.formats.iter().any(|f| f == "json")
    }
}

/// One problem found in a config, addressed by its key path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

struct Checker(Vec<Violation>);

impl Checker {
    fn check(&mut self, ok: bool, field: &str, message: impl Into<String>) {
        if !ok {
            self.0.push(Violation {
                field: field.into(),
                message: message.into(),
            });
        }
    }

    fn positive(&mut self, v: f64, field: &str) {
        self.check(
            v.is_finite() && v > 0.0,
            field,
            format!("must be positive and finite (got {v})"),
        );
    }

    fn eps_list(&mut self, list: &[f64], field: &str, min_len: usize) {
        self.check(
            list.len() >= min_len,
            field,
            format!("needs at least {min_len} values"),
        );
        self.check(
            list.iter().all(|e| e.is_finite() && *e > 0.0 && *e <= 1.0),
            field,
            "values must lie in (0, 1]",
        );
        self.check(
            list.windows(2).all(|w| w[0] > w[1]),
            field,
            "eps_list must be strictly decreasing",
        );
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, CliError> {
        serde_json::from_str(text).map_err(|e| {
            CliError::Validation(vec![Violation {
                field: format!("line {} column {}", e.line(), e.column()),
                message: e.to_string(),
            }])
        })
    }

    pub fn load(path: &Path) -> Result<(Config, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| {
            CliError::Validation(vec![Violation {
                field: "file".into(),
                message: "config is not UTF-8".into(),
            }])
        })?;
        Ok((Config::parse(&text)?, bytes))
    }

    /// Every violation in the config; empty means valid.
    pub fn violations(&self) -> Vec<Violation> {
        let mut c = Checker(Vec::new());
        let d = &self.domain;
        c.check(d.n == 1 || d.n == 2, "domain.n", "must be 1 or 2");
        c.check(
            d.big_n >= 8 && d.big_n.is_power_of_two(),
            "domain.N",
            "must be a power of two >= 8",
        );
        c.positive(d.length, "domain.L");

        let p = &self.params;
        c.positive(p.froude, "params.F");
        c.positive(p.reynolds, "params.Re");
        c.check(
            p.gamma_bar.is_finite() && p.gamma_bar >= 0.0,
            "params.gamma_bar",
            "must be >= 0",
        );

        let s = &self.sw;
        c.check(
            s.init.amplitude.is_finite() && s.init.amplitude >= 0.0 && s.init.amplitude < 0.9,
            "sw.init.amplitude",
            "must lie in [0, 0.9) so the thickness stays above the vacuum guard",
        );
        c.check(
            s.init.wavenumber >= 1 && (s.init.wavenumber as usize) < d.big_n / 2,
            "sw.init.wavenumber",
            "must lie in [1, N/2)",
        );
        c.check(
            s.init.velocity_amplitude.is_finite(),
            "sw.init.velocity_amplitude",
            "must be finite",
        );
        c.check(
            s.t_final.is_finite() && s.t_final >= 0.0,
            "sw.T",
            "must be >= 0",
        );
        c.positive(s.dt, "sw.dt");
        if s.dt > 0.0 && s.t_final >= 0.0 && s.t_final.is_finite() {
            let steps = (s.t_final / s.dt).round();
            c.check(
                (steps * s.dt - s.t_final).abs() <= 1e-9 * s.t_final.max(1.0),
                "sw.T",
                "must be a whole multiple of sw.dt",
            );
        }

        let st = &self.study;
        c.eps_list(&st.eps_list, "study.eps_list", 4);
        c.check(
            st.t_eval.is_finite() && st.t_eval >= 0.0,
            "study.t_eval",
            "must be >= 0",
        );
        c.check(st.nz >= 4, "study.nz", "must be at least 4");

        let k = &self.korn;
        c.positive(k.m_grid.min, "korn.M_grid.min");
        c.check(
            k.m_grid.max > k.m_grid.min && k.m_grid.max.is_finite(),
            "korn.M_grid.max",
            "must exceed min",
        );
        c.check(
            k.m_grid.count >= 2,
            "korn.M_grid.count",
            "must be at least 2",
        );
        c.check(k.sigma_count >= 1, "korn.sigma_count", "must be at least 1");
        c.check(k.quad_nodes >= 64, "korn.quad_nodes", "must be at least 64");

        let pr = &self.probes;
        c.eps_list(&pr.eps_list, "probes.eps_list", 2);
        c.check(pr.samples >= 50, "probes.samples", "must be at least 50");

        let l = &self.laplace;
        c.check(l.k_max >= 1, "laplace.k_max", "must be at least 1");
        c.eps_list(&l.eps_list, "laplace.eps_list", 1);
        c.check(l.nz >= 8, "laplace.nz", "must be at least 8");

        let lg = &self.lagrangian;
        c.check(lg.levels >= 2, "lagrangian.levels", "must be at least 2");
        c.check(
            lg.output_every >= 1,
            "lagrangian.output_every",
            "must be at least 1",
        );

        let o = &self.output;
        c.check(!o.dir.is_empty(), "output.dir", "must not be empty");
        c.check(
            o.formats.iter().all(|f| f == "csv" || f == "json"),
            "output.formats",
            "allowed values are \"csv\" and \"json\"",
        );
        c.0
    }

    pub fn validated(self) -> Result<Config, CliError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(CliError::Validation(v))
        }
    }
}
