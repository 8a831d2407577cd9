//! Line-oriented configuration files: `[section]` headers and `key = value`
//! pairs, `#` comments. Parsing either produces a fully structured
//! [`Config`] or a list of line-numbered errors; nothing is silently
//! defaulted except the documented optional keys.

use crate::diagnostics::MonitorParams;
use crate::grid::Grid;
use crate::model::{CoeffKind, CoefficientSpec, InitialPreset};
use crate::solver::RunConfig;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            write!(f, "{}", self.message)
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Sweep mode and its level lists.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepMode {
    Eps,
    Refinement,
}

#[derive(Clone, Debug)]
pub struct SweepSection {
    pub mode: SweepMode,
    pub eps_list: Vec<f64>,
    pub nodes_list: Vec<usize>,
    pub dt_list: Vec<f64>,
}

/// Fully parsed configuration.
#[derive(Clone, Debug)]
pub struct Config {
    pub coeff: CoefficientSpec,
    pub preset: InitialPreset,
    pub grid: Grid,
    pub run: RunConfig,
    pub monitor: MonitorParams,
    pub mollify_m0: usize,
    pub snapshot_files: usize,
    pub sweep: Option<SweepSection>,
    pub out_dir: PathBuf,
}

struct RawConfig {
    entries: BTreeMap<(String, String), (String, usize)>,
    errors: Vec<ConfigError>,
}

impl RawConfig {
    fn parse(text: &str) -> RawConfig {
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        let mut section = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(k) => &raw_line[..k],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if line.ends_with(']') && line.len() > 2 {
                    section = line[1..line.len() - 1].trim().to_string();
                } else {
                    errors.push(ConfigError {
                        line: line_no,
                        message: format!("malformed section header `{line}`"),
                    });
                }
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    let key = (section.clone(), k.trim().to_string());
                    match entries.entry(key) {
                        std::collections::btree_map::Entry::Occupied(e) => {
                            errors.push(ConfigError {
                                line: line_no,
                                message: format!(
                                    "duplicate key `{}` in section [{}]",
                                    e.key().1,
                                    e.key().0
                                ),
                            });
                        }
                        std::collections::btree_map::Entry::Vacant(e) => {
                            e.insert((v.trim().to_string(), line_no));
                        }
                    }
                }
                None => errors.push(ConfigError {
                    line: line_no,
                    message: format!("expected `key = value`, got `{line}`"),
                }),
            }
        }
        RawConfig { entries, errors }
    }

    fn get(&self, section: &str, key: &str) -> Option<&(String, usize)> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn f64_opt(&self, section: &str, key: &str, errors: &mut Vec<ConfigError>) -> Option<f64> {
        self.get(section, key).and_then(|(v, line)| match v.parse() {
            Ok(x) => Some(x),
            Err(_) => {
                errors.push(ConfigError {
                    line: *line,
                    message: format!("`{key}` must be a number, got `{v}`"),
                });
                None
            }
        })
    }

    fn f64_or(&self, section: &str, key: &str, default: f64, errors: &mut Vec<ConfigError>) -> f64 {
        self.f64_opt(section, key, errors).unwrap_or(default)
    }

    fn f64_req(&self, section: &str, key: &str, errors: &mut Vec<ConfigError>) -> f64 {
        match self.get(section, key) {
            Some(_) => self.f64_opt(section, key, errors).unwrap_or(f64::NAN),
            None => {
                errors.push(ConfigError {
                    line: 0,
                    message: format!("missing required key `{key}` in section [{section}]"),
                });
                f64::NAN
            }
        }
    }

    fn usize_or(
        &self,
        section: &str,
        key: &str,
        default: usize,
        errors: &mut Vec<ConfigError>,
    ) -> usize {
        match self.get(section, key) {
            None => default,
            Some((v, line)) => v.parse().unwrap_or_else(|_| {
                errors.push(ConfigError {
                    line: *line,
                    message: format!("`{key}` must be a nonnegative integer, got `{v}`"),
                });
                default
            }),
        }
    }

    fn bool_or(
        &self,
        section: &str,
        key: &str,
        default: bool,
        errors: &mut Vec<ConfigError>,
    ) -> bool {
        match self.get(section, key) {
            None => default,
            Some((v, line)) => match v.as_str() {
                "true" => true,
                "false" => false,
                other => {
                    errors.push(ConfigError {
                        line: *line,
                        message: format!("`{key}` must be true or false, got `{other}`"),
                    });
                    default
                }
            },
        }
    }

    fn str_or(&self, section: &str, key: &str, default: &str) -> (String, usize) {
        self.get(section, key)
            .cloned()
            .unwrap_or_else(|| (default.to_string(), 0))
    }

    fn list_f64(&self, section: &str, key: &str, errors: &mut Vec<ConfigError>) -> Vec<f64> {
        match self.get(section, key) {
            None => Vec::new(),
            Some((v, line)) => v
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .filter_map(|s| match s.parse() {
                    Ok(x) => Some(x),
                    Err(_) => {
                        errors.push(ConfigError {
                            line: *line,
                            message: format!("`{key}`: `{s}` is not a number"),
                        });
                        None
                    }
                })
                .collect(),
        }
    }

    fn list_usize(&self, section: &str, key: &str, errors: &mut Vec<ConfigError>) -> Vec<usize> {
        match self.get(section, key) {
            None => Vec::new(),
            Some((v, line)) => v
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .filter_map(|s| match s.parse() {
                    Ok(x) => Some(x),
                    Err(_) => {
                        errors.push(ConfigError {
                            line: *line,
                            message: format!("`{key}`: `{s}` is not an integer"),
                        });
                        None
                    }
                })
                .collect(),
        }
    }
}

fn coeff_kind(
    raw: &RawConfig,
    key: &str,
    default: CoeffKind,
    errors: &mut Vec<ConfigError>,
) -> CoeffKind {
    let (v, line) = raw.str_or("coefficients", key, "");
    match v.as_str() {
        "" => default,
        "constant" => CoeffKind::Constant,
        "bounded-analytic" => CoeffKind::BoundedAnalytic,
        "sampled-table" => CoeffKind::SampledTable,
        other => {
            errors.push(ConfigError {
                line,
                message: format!(
                    "`{key}` must be one of constant, bounded-analytic, sampled-table; got `{other}`"
                ),
            });
            default
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigErrors> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigErrors(vec![ConfigError {
                line: 0,
                message: format!("cannot read config `{}`: {e}", path.display()),
            }])
        })?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Config, ConfigErrors> {
        let raw = RawConfig::parse(text);
        let mut errors = raw.errors.clone();

        // [coefficients]
        let defaults = CoefficientSpec::default();
        let gamma_kind = coeff_kind(&raw, "gamma_kind", defaults.gamma_kind, &mut errors);
        let f_kind = coeff_kind(&raw, "f_kind", defaults.f_kind, &mut errors);
        let gamma_params = {
            let v = raw.list_f64("coefficients", "gamma_params", &mut errors);
            if v.is_empty() {
                defaults.gamma_params.clone()
            } else {
                v
            }
        };
        let f_params = {
            let v = raw.list_f64("coefficients", "f_params", &mut errors);
            if v.is_empty() {
                defaults.f_params.clone()
            } else {
                v
            }
        };
        let coeff = CoefficientSpec {
            gamma_kind,
            gamma_params,
            f_kind,
            f_params,
            elastic_modulus: raw.f64_or("coefficients", "a", defaults.elastic_modulus, &mut errors),
            gamma_min: raw.f64_or("coefficients", "gamma_min", defaults.gamma_min, &mut errors),
            gamma_max: raw.f64_or("coefficients", "gamma_max", defaults.gamma_max, &mut errors),
            f_growth: raw.f64_or("coefficients", "f_growth", defaults.f_growth, &mut errors),
            alpha: raw.f64_or("coefficients", "alpha", defaults.alpha, &mut errors),
        };

        // [grid]
        let dim = raw.usize_or("grid", "dim", 1, &mut errors);
        let extent_x = raw.f64_or("grid", "extent_x", 1.0, &mut errors);
        let nodes_x = raw.usize_or("grid", "nodes_x", 65, &mut errors);
        let grid = if dim == 2 {
            let extent_y = raw.f64_or("grid", "extent_y", extent_x, &mut errors);
            let nodes_y = raw.usize_or("grid", "nodes_y", nodes_x, &mut errors);
            Grid::new_2d([extent_x, extent_y], [nodes_x, nodes_y])
        } else if dim == 1 {
            Grid::new_1d(extent_x, nodes_x)
        } else {
            errors.push(ConfigError {
                line: raw.get("grid", "dim").map(|(_, l)| *l).unwrap_or(0),
                message: format!("dim must be 1 or 2, got {dim}"),
            });
            Grid::new_1d(1.0, 65)
        };
        let grid = match grid {
            Ok(g) => g,
            Err(e) => {
                errors.push(ConfigError {
                    line: 0,
                    message: format!("invalid grid: {e}"),
                });
                Grid::new_1d(1.0, 65).unwrap()
            }
        };

        // [initial]
        let (preset_name, preset_line) = raw.str_or("initial", "preset", "sine-bump");
        let preset = match preset_name.as_str() {
            "sine-bump" => InitialPreset::SineBump {
                amp_u: raw.f64_or("initial", "amp_u", 1.0, &mut errors),
                amp_v: raw.f64_or("initial", "amp_v", 1.0, &mut errors),
                amp_theta: raw.f64_or("initial", "amp_theta", 1.0, &mut errors),
            },
            "indicator" => InitialPreset::Indicator {
                level: raw.f64_or("initial", "level", 1.0, &mut errors),
            },
            "random-seeded" => InitialPreset::RandomSeeded {
                seed: raw.usize_or("initial", "seed", 0, &mut errors) as u64,
                amp: raw.f64_or("initial", "amp", 1.0, &mut errors),
            },
            other => {
                errors.push(ConfigError {
                    line: preset_line,
                    message: format!(
                        "preset must be one of sine-bump, indicator, random-seeded; got `{other}`"
                    ),
                });
                InitialPreset::default()
            }
        };

        // [run]
        let run = RunConfig {
            epsilon: raw.f64_req("run", "epsilon", &mut errors),
            dt: raw.f64_req("run", "dt", &mut errors),
            t_end: raw.f64_req("run", "t_end", &mut errors),
            blowup_threshold: raw.f64_or("run", "blowup_threshold", 1e6, &mut errors),
            clip_theta: raw.bool_or("run", "clip_theta", false, &mut errors),
            solver_tol: raw.f64_or("run", "solver_tol", 1e-12, &mut errors),
            snapshot_stride: raw.usize_or("run", "snapshot_stride", 1, &mut errors),
        };
        let mollify_m0 = raw.usize_or("run", "mollify_m0", 16, &mut errors);
        let snapshot_files = raw.usize_or("run", "snapshot_files", 11, &mut errors);

        // [monitors]
        let md = MonitorParams::defaults(grid.dim);
        let monitor = MonitorParams {
            r: raw.f64_or("monitors", "r", md.r, &mut errors),
            q: raw.f64_or("monitors", "q", md.q, &mut errors),
            lambda: raw.f64_or("monitors", "lambda", md.lambda, &mut errors),
            p: raw.f64_or("monitors", "p", md.p, &mut errors),
        };

        // [sweep], optional
        let sweep = match raw.get("sweep", "mode") {
            None => None,
            Some((mode_str, line)) => {
                let mode = match mode_str.as_str() {
                    "eps" => Some(SweepMode::Eps),
                    "refinement" => Some(SweepMode::Refinement),
                    other => {
                        errors.push(ConfigError {
                            line: *line,
                            message: format!("sweep mode must be eps or refinement, got `{other}`"),
                        });
                        None
                    }
                };
                mode.map(|mode| SweepSection {
                    mode,
                    eps_list: raw.list_f64("sweep", "eps_list", &mut errors),
                    nodes_list: raw.list_usize("sweep", "nodes_list", &mut errors),
                    dt_list: raw.list_f64("sweep", "dt_list", &mut errors),
                })
            }
        };

        let (out_dir, _) = raw.str_or("output", "dir", "out");

        if !errors.is_empty() {
            return Err(ConfigErrors(errors));
        }
        let cfg = Config {
            coeff,
            preset,
            grid,
            run,
            monitor,
            mollify_m0,
            snapshot_files,
            sweep,
            out_dir: PathBuf::from(out_dir),
        };
        if let Err(e) = cfg.run.validate() {
            return Err(ConfigErrors(vec![ConfigError {
                line: 0,
                message: e.to_string(),
            }]));
        }
        Ok(cfg)
    }
}
