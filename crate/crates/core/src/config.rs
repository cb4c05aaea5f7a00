//! Plain-text run configuration.
//!
//! ```text
//! # comment
//! scenario = driven_noslip
//!
//! [model]
//! lambda = 0.8
//!
//! [grid]
//! n = 48
//!
//! [scenario]
//! t_end = 0.25
//! splitting = lie
//!
//! [output]
//! dir = out/driven
//! snapshot_every = 50
//! ```
//!
//! Every key is optional except `scenario`; unknown keys are errors.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::scenarios::{build, Scenario, ScenarioKind};
use crate::transport::Splitting;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelOverrides {
    pub a: Option<f64>,
    pub gamma: Option<f64>,
    pub z: Option<f64>,
    pub k: Option<f64>,
    pub l: Option<f64>,
    pub lambda: Option<f64>,
    pub mu_s: Option<f64>,
    pub mu_b: Option<f64>,
    pub c_bar: Option<f64>,
    pub r1_bar: Option<f64>,
    pub r_bar: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScenarioOverrides {
    pub n: Option<usize>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub cfl: Option<f64>,
    pub visc_cfl: Option<f64>,
    pub splitting: Option<Splitting>,
    pub gravity: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutputOptions {
    pub dir: Option<PathBuf>,
    /// Write a snapshot every this many steps; `None` writes only the final state.
    pub snapshot_every: Option<usize>,
    pub diagnostics_every: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub model: ModelOverrides,
    pub overrides: ScenarioOverrides,
    pub output: OutputOptions,
}

impl RunConfig {
    pub fn new(scenario: ScenarioKind) -> Self {
        RunConfig {
            scenario,
            model: ModelOverrides::default(),
            overrides: ScenarioOverrides::default(),
            output: OutputOptions::default(),
        }
    }

    /// The preset with every override applied and validated. Changing any
    /// constant that shapes the pressure re-derives the cut-off radii unless
    /// both radii are given explicitly.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let mut sc = build(self.scenario.name())?;
        let m = &self.model;
        let p = &mut sc.params;
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut p.a, m.a);
        set(&mut p.gamma, m.gamma);
        set(&mut p.z, m.z);
        set(&mut p.k, m.k);
        set(&mut p.l, m.l);
        set(&mut p.lambda, m.lambda);
        set(&mut p.mu_s, m.mu_s);
        set(&mut p.mu_b, m.mu_b);
        set(&mut p.c_bar, m.c_bar);
        let shapes_pressure = [m.a, m.gamma, m.z, m.k, m.l, m.c_bar].iter().any(Option::is_some);
        match (m.r1_bar, m.r_bar) {
            (Some(r1), Some(r)) => {
                p.r1_bar = r1;
                p.r_bar = r;
            }
            (None, None) if shapes_pressure => *p = p.clone().with_auto_radii()?,
            (None, None) => {}
            _ => return Err(Error::Params("r1_bar and r_bar must be given together".into())),
        }
        p.validate()?;

        let o = &self.overrides;
        if let Some(n) = o.n {
            sc.n = n;
        }
        set(&mut sc.t_end, o.t_end);
        if o.dt.is_some() {
            sc.dt = o.dt;
        }
        set(&mut sc.cfl, o.cfl);
        set(&mut sc.visc_cfl, o.visc_cfl);
        if let Some(s) = o.splitting {
            sc.splitting = s;
        }
        set(&mut sc.gravity, o.gravity);
        set(&mut sc.tolerance, o.tolerance);
        if let Some(every) = self.output.diagnostics_every {
            sc.record_every = every;
        }
        if !(sc.cfl > 0.0 && sc.cfl <= 1.0) {
            return Err(Error::Params(format!("cfl must lie in (0, 1], got {}", sc.cfl)));
        }
        if !(sc.visc_cfl > 0.0 && sc.visc_cfl <= 0.5) {
            return Err(Error::Params(format!("visc_cfl must lie in (0, 0.5], got {}", sc.visc_cfl)));
        }
        if let Some(dt) = sc.dt {
            if !(dt > 0.0) {
                return Err(Error::Params(format!("dt must be positive, got {dt}")));
            }
        }
        Ok(sc)
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let mut out = format!("scenario = {}\n", self.scenario.name());
        let mut section = |name: &str, entries: Vec<(&str, Option<String>)>| {
            let present: Vec<_> = entries.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect();
            if present.is_empty() {
                return;
            }
            let _ = writeln!(out, "\n[{name}]");
            for (k, v) in present {
                let _ = writeln!(out, "{k} = {v}");
            }
        };
        let f = |v: Option<f64>| v.map(|x| x.to_string());
        let m = &self.model;
        section(
            "model",
            vec![
                ("a", f(m.a)),
                ("gamma", f(m.gamma)),
                ("z", f(m.z)),
                ("k", f(m.k)),
                ("L", f(m.l)),
                ("lambda", f(m.lambda)),
                ("mu_s", f(m.mu_s)),
                ("mu_b", f(m.mu_b)),
                ("c_bar", f(m.c_bar)),
                ("r1_bar", f(m.r1_bar)),
                ("r_bar", f(m.r_bar)),
            ],
        );
        let o = &self.overrides;
        section("grid", vec![("n", o.n.map(|n| n.to_string()))]);
        section(
            "scenario",
            vec![
                ("t_end", f(o.t_end)),
                ("dt", f(o.dt)),
                ("cfl", f(o.cfl)),
                ("visc_cfl", f(o.visc_cfl)),
                ("splitting", o.splitting.map(|s| s.name().to_string())),
                ("gravity", f(o.gravity)),
                ("tolerance", f(o.tolerance)),
            ],
        );
        let out_opts = &self.output;
        section(
            "output",
            vec![
                ("dir", out_opts.dir.as_ref().map(|d| d.display().to_string())),
                ("snapshot_every", out_opts.snapshot_every.map(|n| n.to_string())),
                ("diagnostics_every", out_opts.diagnostics_every.map(|n| n.to_string())),
            ],
        );
        out
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    Model,
    Grid,
    Scenario,
    Output,
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("`{key}` expects a number, got `{value}`"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("`{key}` must be finite"),
        });
    }
    Ok(v)
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize> {
    value.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("`{key}` expects a non-negative integer, got `{value}`"),
    })
}

fn parse_count(line: usize, key: &str, value: &str) -> Result<usize> {
    match parse_usize(line, key, value)? {
        0 => Err(Error::Parse {
            line,
            msg: format!("`{key}` must be at least 1"),
        }),
        n => Ok(n),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut section = Section::Top;
    let mut scenario = None;
    let mut cfg = RunConfig::new(ScenarioKind::UniformDamping);
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                line,
                msg: format!("unterminated section header `{content}`"),
            })?;
            section = match name.trim() {
                "model" => Section::Model,
                "grid" => Section::Grid,
                "scenario" => Section::Scenario,
                "output" => Section::Output,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown section `[{other}]`"),
                    })
                }
            };
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Parse {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            });
        }
        let num = || parse_f64(line, key, value);
        let unknown = || Error::Parse {
            line,
            msg: format!("unknown key `{key}`"),
        };
        match section {
            Section::Top => match key {
                "scenario" => {
                    scenario = Some(ScenarioKind::parse(value).map_err(|e| Error::Parse {
                        line,
                        msg: e.to_string(),
                    })?)
                }
                _ => return Err(unknown()),
            },
            Section::Model => {
                let m = &mut cfg.model;
                let slot = match key {
                    "a" => &mut m.a,
                    "gamma" => &mut m.gamma,
                    "z" => &mut m.z,
                    "k" => &mut m.k,
                    "L" | "l" => &mut m.l,
                    "lambda" => &mut m.lambda,
                    "mu_s" => &mut m.mu_s,
                    "mu_b" => &mut m.mu_b,
                    "c_bar" => &mut m.c_bar,
                    "r1_bar" => &mut m.r1_bar,
                    "r_bar" => &mut m.r_bar,
                    _ => return Err(unknown()),
                };
                let v = num()?;
                if key == "gamma" && !(v > 0.0 && v <= 2.0) {
                    return Err(Error::Parse {
                        line,
                        msg: format!("gamma must lie in (0, 2], got {v}"),
                    });
                }
                *slot = Some(v);
            }
            Section::Grid => match key {
                "n" => cfg.overrides.n = Some(parse_usize(line, key, value)?),
                _ => return Err(unknown()),
            },
            Section::Scenario => {
                let o = &mut cfg.overrides;
                match key {
                    "t_end" => o.t_end = Some(num()?),
                    "dt" => o.dt = Some(num()?),
                    "cfl" => o.cfl = Some(num()?),
                    "visc_cfl" => o.visc_cfl = Some(num()?),
                    "gravity" => o.gravity = Some(num()?),
                    "tolerance" => o.tolerance = Some(num()?),
                    "splitting" => {
                        o.splitting = Some(Splitting::parse(value).ok_or_else(|| Error::Parse {
                            line,
                            msg: format!("splitting must be `lie` or `strang`, got `{value}`"),
                        })?)
                    }
                    _ => return Err(unknown()),
                }
            }
            Section::Output => {
                let o = &mut cfg.output;
                match key {
                    "dir" => o.dir = Some(PathBuf::from(value)),
                    "snapshot_every" => o.snapshot_every = Some(parse_count(line, key, value)?),
                    "diagnostics_every" => o.diagnostics_every = Some(parse_count(line, key, value)?),
                    _ => return Err(unknown()),
                }
            }
        }
    }
    cfg.scenario = scenario.ok_or(Error::Parse {
        line: 0,
        msg: "missing `scenario = <name>`".into(),
    })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_uses_defaults() {
        let cfg = parse_config("scenario = uniform_damping\n").unwrap();
        assert_eq!(cfg, RunConfig::new(ScenarioKind::UniformDamping));
        assert_eq!(cfg.to_scenario().unwrap(), build("uniform_damping").unwrap());
    }

    #[test]
    fn rejects_gamma_above_two() {
        let err = parse_config("scenario = uniform_damping\n[model]\ngamma = 2.5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        for (text, bad) in [
            ("scenario = uniform_damping\n\n[model]\nlambda 0.3\n", 4),
            ("scenario = uniform_damping\n[grid]\nnx = 3\n", 3),
            ("scenario = uniform_damping\n[extra]\n", 2),
            ("scenario = nope\n", 1),
            ("# c\nscenario = uniform_damping\n[model]\nmu_s = fast\n", 4),
        ] {
            match parse_config(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, bad, "{text}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
        assert!(matches!(parse_config("[model]\n"), Err(Error::Parse { line: 0, .. })));
    }

    #[test]
    fn overrides_apply_and_round_trip() {
        let text = "# run\nscenario = driven_noslip  # trailing\n[model]\nlambda = 0.8\nL = 3\n\
                    [grid]\nn = 16\n[scenario]\nsplitting = lie\nt_end = 0.1\n[output]\ndir = out/x\n\
                    snapshot_every = 5\n";
        let cfg = parse_config(text).unwrap();
        let sc = cfg.to_scenario().unwrap();
        assert_eq!(sc.params.lambda, 0.8);
        assert_eq!(sc.params.l, 3.0);
        assert_eq!(sc.n, 16);
        assert_eq!(sc.splitting, Splitting::Lie);
        assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn semantic_validation_happens_on_build() {
        let cfg = parse_config("scenario = uniform_damping\n[model]\nlambda = -1\n").unwrap();
        assert!(matches!(cfg.to_scenario(), Err(Error::Params(_))));
        let cfg = parse_config("scenario = uniform_damping\n[model]\nr1_bar = 4\n").unwrap();
        assert!(cfg.to_scenario().is_err());
    }
}
