//! Built-in scenarios and their expected outcomes.

use serde::{Deserialize, Serialize};

use scatlab::fields::{gauge_transform, real_bump, FieldSpec, Form, GaugeFunction, ScalarTerm, VectorTerm};
use scatlab::geometry::Direction;
use scatlab::io::{content_hash, spec_hash};

use crate::config::Config;
use crate::error::{CliError, CliResult};

/// What a two-potential scenario is expected to show.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    /// No scattering at all.
    Zero,
    /// The same potential twice.
    Identical,
    /// Gauge-equivalent potentials: same data.
    Equivalent,
    /// Potentials that differ in `dA` or `q`: different data.
    Distinct,
    /// Drift potentials differing only in `V`.
    Decoupled,
    #[default]
    None,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub potentials: Vec<FieldSpec<f64>>,
    pub directions: Vec<Direction<f64>>,
    pub expectation: Expectation,
    /// Positions in [`signed_axes`] forming a reduced data set, if any.
    pub reduced: Option<Vec<usize>>,
}

pub const BUILTINS: [&str; 7] = [
    "freespace",
    "identical",
    "gauge-pair",
    "perturbed-q",
    "antisymmetric",
    "v-change",
    "line",
];

impl Scenario {
    pub fn dim(&self) -> usize {
        self.potentials[0].dim()
    }

    pub fn hash(&self) -> String {
        let specs: Vec<String> = self.potentials.iter().map(spec_hash).collect();
        let dirs: Vec<&[f64]> = self.directions.iter().map(|d| d.as_slice()).collect();
        content_hash(&format!("{}|{}|{dirs:?}|{:?}", self.name, specs.join(","), self.expectation))
    }

    pub fn from_config(cfg: &Config) -> CliResult<Self> {
        if cfg.scenario == "custom" {
            let c = cfg.custom.as_ref().ok_or_else(|| CliError::Config {
                line: None,
                message: "scenario = \"custom\" needs a [custom] table".into(),
            })?;
            if c.potentials.is_empty() || c.potentials.len() > 2 {
                return Err(CliError::Config {
                    line: None,
                    message: format!("custom scenario needs one or two potentials, got {}", c.potentials.len()),
                });
            }
            let n = c.potentials[0].dim();
            if c.potentials.iter().any(|p| p.dim() != n) {
                return Err(CliError::Config {
                    line: None,
                    message: "potentials differ in dimension".into(),
                });
            }
            let directions = c
                .directions
                .iter()
                .map(|d| Direction::new(d.clone()))
                .collect::<Result<Vec<_>, _>>()?;
            if directions.is_empty() || directions.iter().any(|d| d.dim() != n) {
                return Err(CliError::Config {
                    line: None,
                    message: format!("need at least one direction of dimension {n}"),
                });
            }
            return Ok(Self {
                name: c.name.clone(),
                potentials: c.potentials.clone(),
                directions,
                expectation: c.expectation,
                reduced: c.reduced.clone(),
            });
        }
        if cfg.custom.is_some() {
            return Err(CliError::Config {
                line: None,
                message: format!("[custom] given but scenario is `{}`", cfg.scenario),
            });
        }
        builtin(&cfg.scenario)
    }
}

/// `+e_1, −e_1, …, +e_n, −e_n`.
pub fn signed_axes(n: usize) -> Vec<(String, Direction<f64>)> {
    (0..n)
        .flat_map(|j| {
            [true, false].map(|pos| {
                let label = format!("{}e{}", if pos { "+" } else { "-" }, j + 1);
                (label, Direction::axis(n, j, pos).expect("valid axis"))
            })
        })
        .collect()
}

/// `+e_1, …, +e_{n−1}, ±e_n` as positions in [`signed_axes`].
pub fn reduced_set(n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n - 1).map(|j| 2 * j).collect();
    v.push(2 * (n - 1));
    v.push(2 * (n - 1) + 1);
    v
}

fn e1(n: usize) -> Direction<f64> {
    Direction::axis(n, 0, true).expect("valid axis")
}

/// Magnetic potential shared by the two-dimensional scenarios: a tilted
/// vector bump and a scalar bump.
pub fn standard_magnetic() -> FieldSpec<f64> {
    FieldSpec::from_terms(
        2,
        Form::Magnetic,
        vec![VectorTerm::Directional {
            bump: real_bump(vec![0.1, 0.0], 0.6, 0.5).expect("valid bump"),
            direction: vec![0.6, 0.8],
        }],
        vec![ScalarTerm::Bump {
            bump: real_bump(vec![0.0, 0.1], 0.6, 1.0).expect("valid bump"),
        }],
    )
    .expect("valid spec")
}

/// Even gauge function `f`, so `∇f` is odd.
pub fn standard_gauge() -> GaugeFunction<f64> {
    GaugeFunction::Bump {
        bump: real_bump(vec![0.0, 0.0], 0.8, 0.7).expect("valid bump"),
    }
}

/// Scalar bump with `‖δq‖_∞ = 0.1`.
pub fn q_perturbation() -> ScalarTerm<f64> {
    ScalarTerm::Bump {
        bump: real_bump(vec![-0.2, 0.1], 0.5, 0.1 * std::f64::consts::E).expect("valid bump"),
    }
}

/// Drift-form `V` change with `‖δV‖_∞ = 1`.
pub fn v_perturbation() -> ScalarTerm<f64> {
    ScalarTerm::Bump {
        bump: real_bump(vec![0.0, 0.0], 0.9, std::f64::consts::E).expect("valid bump"),
    }
}

/// `A(−x) = −A(x)` from two mirrored vector bumps.
pub fn antisymmetric_magnetic() -> FieldSpec<f64> {
    let bump = |c: Vec<f64>, a: f64| real_bump(c, 0.5, a).expect("valid bump");
    FieldSpec::from_terms(
        2,
        Form::Magnetic,
        vec![
            VectorTerm::Directional {
                bump: bump(vec![0.3, 0.1], 0.5),
                direction: vec![0.6, 0.8],
            },
            VectorTerm::Directional {
                bump: bump(vec![-0.3, -0.1], -0.5),
                direction: vec![0.6, 0.8],
            },
        ],
        vec![ScalarTerm::Bump {
            bump: real_bump(vec![0.0, 0.0], 0.6, 1.0).expect("valid bump"),
        }],
    )
    .expect("valid spec")
}

/// One-dimensional drift potential for cheap, finely resolved studies.
pub fn line_drift() -> FieldSpec<f64> {
    FieldSpec::from_terms(
        1,
        Form::Drift,
        vec![VectorTerm::Directional {
            bump: real_bump(vec![-0.1], 0.7, 0.6).expect("valid bump"),
            direction: vec![1.0],
        }],
        vec![ScalarTerm::Bump {
            bump: real_bump(vec![0.1], 0.6, 1.5).expect("valid bump"),
        }],
    )
    .expect("valid spec")
}

pub fn builtin(name: &str) -> CliResult<Scenario> {
    let make = |potentials: Vec<FieldSpec<f64>>, expectation| Scenario {
        name: name.to_string(),
        directions: vec![e1(potentials[0].dim())],
        potentials,
        expectation,
        reduced: None,
    };
    let s = match name {
        "freespace" => {
            let z = FieldSpec::zero(2, Form::Magnetic)?;
            make(vec![z.clone(), z], Expectation::Zero)
        }
        "identical" => make(vec![standard_magnetic(), standard_magnetic()], Expectation::Identical),
        "gauge-pair" => {
            let a = standard_magnetic();
            let b = gauge_transform(&a, &standard_gauge())?;
            make(vec![a, b], Expectation::Equivalent)
        }
        "perturbed-q" => {
            let a = standard_magnetic();
            let b = a.with_scalar_term(q_perturbation())?;
            make(vec![a, b], Expectation::Distinct)
        }
        "antisymmetric" => {
            let a = antisymmetric_magnetic();
            let b = gauge_transform(&a, &standard_gauge())?;
            let mut s = make(vec![a, b], Expectation::Equivalent);
            s.reduced = Some(reduced_set(2));
            s
        }
        "v-change" => {
            let a = standard_magnetic().to_drift();
            let b = a.with_scalar_term(v_perturbation())?;
            make(vec![a, b], Expectation::Decoupled)
        }
        "line" => make(vec![line_drift()], Expectation::None),
        other => return Err(CliError::UnknownScenario(other.to_string())),
    };
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use scatlab::fields::{check_condition, CertKind};

    #[test]
    fn all_builtins_construct() {
        for name in BUILTINS {
            let s = builtin(name).unwrap();
            assert!(!s.potentials.is_empty());
            assert_eq!(s.hash().len(), 64);
        }
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn reduced_set_is_n_plus_one() {
        let axes = signed_axes(3);
        let labels: Vec<&str> = reduced_set(3).iter().map(|&i| axes[i].0.as_str()).collect();
        assert_eq!(labels, ["+e1", "+e2", "+e3", "-e3"]);
    }

    #[test]
    fn antisymmetric_pair_is_certified() {
        let s = builtin("antisymmetric").unwrap();
        for p in &s.potentials {
            let cert = check_condition(p, CertKind::Antisymmetric, None).unwrap();
            assert!(cert.residual <= 1e-12, "{cert:?}");
        }
    }
}
