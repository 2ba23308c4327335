//! Problem definitions: a system, the set to keep invariant, and grid parameters.
//! Also the built-in benchmark problems and the TOML problem-file loader.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{OdeField, SystemDef, SystemKind};
use crate::error::{Error, Result};
use crate::geometry::{HyperRect, Polytope, SafeSet, UniformGrid};
use crate::interval::{Monomial, PolyMap};

pub const BUILTIN_NAMES: [&str; 5] = [
    "example1",
    "linear2d",
    "pendulum",
    "henon",
    "uncertain-linear",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemDef {
    pub name: String,
    pub system: SystemDef,
    /// Time-reversed system for the forward/backward domain iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverse: Option<SystemDef>,
    /// The set `Q` to be rendered invariant.
    pub safe_set: SafeSet,
    /// Box enclosing `Q`; the state grid is built inside it.
    pub state_box: HyperRect,
    /// Input set `U`.
    pub input_box: HyperRect,
    pub eta_s: Vec<f64>,
    pub eta_i: Vec<f64>,
    #[serde(default = "one")]
    pub tau: usize,
    /// Grid used with `--full-scale`, when it differs from `eta_s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_scale_eta_s: Option<Vec<f64>>,
    /// Known entropy (bits per unit time for sampled systems), for reporting only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory: Option<f64>,
}

fn one() -> usize {
    1
}

impl ProblemDef {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if let Some(r) = &self.reverse {
            r.validate()?;
            if r.state_dim != self.system.state_dim || r.input_dim != self.system.input_dim {
                return Err(Error::System("reverse system dimensions differ".into()));
            }
        }
        let n = self.system.state_dim;
        let m = self.system.input_dim;
        for (what, got, want) in [
            ("state box", self.state_box.dim(), n),
            ("eta_s", self.eta_s.len(), n),
            ("input box", self.input_box.dim(), m),
            ("eta_i", self.eta_i.len(), m),
        ] {
            if got != want {
                return Err(Error::System(format!("{what} has dimension {got}, expected {want}")));
            }
        }
        match &self.safe_set {
            SafeSet::Box(b) if b.dim() != n => {
                return Err(Error::Dimension {
                    expected: n,
                    got: b.dim(),
                })
            }
            SafeSet::Polytope(p) if p.h.iter().any(|r| r.len() != n) => {
                return Err(Error::System("polytope rows do not match the state dimension".into()))
            }
            _ => {}
        }
        if self.tau == 0 {
            return Err(Error::Config("tau must be at least 1".into()));
        }
        Ok(())
    }

    /// Time unit of one step, when the system is sampled.
    pub fn sampling_time(&self) -> Option<f64> {
        match self.system.kind {
            SystemKind::SampledOde { sampling_time, .. } => Some(sampling_time),
            _ => None,
        }
    }

    pub fn state_grid(&self, eta_s: &[f64]) -> Result<UniformGrid> {
        UniformGrid::aligned(&self.state_box, eta_s.to_vec())
    }

    /// Input lattice: multiples of `eta_i` inside `U`, represented as the cell
    /// centres of an aligned grid.
    pub fn input_grid(&self, eta_i: &[f64]) -> Result<UniformGrid> {
        input_lattice(&self.input_box, eta_i)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: ProblemDef = toml::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("problem definitions serialise")
    }
}

pub fn input_lattice(u: &HyperRect, eta_i: &[f64]) -> Result<UniformGrid> {
    if eta_i.len() != u.dim() {
        return Err(Error::Dimension {
            expected: u.dim(),
            got: eta_i.len(),
        });
    }
    let lb = u.lb().iter().zip(eta_i).map(|(l, e)| l - 0.5 * e).collect();
    let ub = u.ub().iter().zip(eta_i).map(|(h, e)| h + 0.5 * e).collect();
    UniformGrid::aligned(&HyperRect::new(lb, ub)?, eta_i.to_vec())
}

fn rect(lb: &[f64], ub: &[f64]) -> HyperRect {
    HyperRect::new(lb.to_vec(), ub.to_vec()).expect("builtin boxes are valid")
}

fn term(coeff: f64, state: &[u32], input: &[u32]) -> Monomial {
    Monomial {
        coeff,
        state: state.to_vec(),
        input: input.to_vec(),
    }
}

pub fn builtin(name: &str) -> Result<ProblemDef> {
    match name {
        "example1" => Ok(example1()),
        "linear2d" => Ok(linear2d()),
        "pendulum" => Ok(pendulum(1.0, 1.0, 0.01)),
        "henon" => Ok(henon(0.08)),
        "uncertain-linear" => Ok(uncertain_linear(0.2)),
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

/// `x+ = diag(2, 1/2) x + (1, 1)^T u` on `[-1,1] x [-2,2]`.
pub fn example1() -> ProblemDef {
    let q = rect(&[-1.0, -2.0], &[1.0, 2.0]);
    ProblemDef {
        name: "example1".into(),
        system: SystemDef {
            state_dim: 2,
            input_dim: 1,
            kind: SystemKind::Affine {
                a: vec![vec![2.0, 0.0], vec![0.0, 0.5]],
                b: vec![vec![1.0], vec![1.0]],
            },
            disturbance: None,
        },
        reverse: None,
        safe_set: SafeSet::Box(q.clone()),
        state_box: q,
        input_box: rect(&[-1.0], &[1.0]),
        eta_s: vec![2.0 / 3.0, 4.0 / 3.0],
        eta_i: vec![1.0],
        tau: 1,
        full_scale_eta_s: None,
        theory: Some(1.0),
    }
}

/// Similarity transform of `example1` with a polytopic invariant set.
pub fn linear2d() -> ProblemDef {
    ProblemDef {
        name: "linear2d".into(),
        system: SystemDef {
            state_dim: 2,
            input_dim: 1,
            kind: SystemKind::Affine {
                a: vec![vec![2.0, 0.0784], vec![0.0784, 0.5041]],
                b: vec![vec![0.9463], vec![1.051]],
            },
            disturbance: None,
        },
        reverse: None,
        safe_set: SafeSet::Polytope(
            Polytope::new(
                vec![
                    vec![0.0261, -0.4993],
                    vec![0.9986, 0.0523],
                    vec![-0.0261, 0.4993],
                    vec![-0.9986, -0.0523],
                ],
                vec![1.0; 4],
            )
            .expect("four rows"),
        ),
        state_box: rect(&[-1.2, -2.1], &[1.2, 2.1]),
        input_box: rect(&[-1.0], &[1.0]),
        eta_s: vec![0.04, 0.08],
        eta_i: vec![0.2],
        tau: 1,
        full_scale_eta_s: None,
        theory: Some(1.003),
    }
}

/// Growth constant used for the pendulum field: `2a` with `a = b^2 + 1`.
pub fn pendulum_growth(b: f64) -> f64 {
    2.0 * (b * b + 1.0)
}

/// Sampled projectivised pendulum with `u in [-rho, rho]`, requires `0 < rho < b^2 + 1`.
pub fn pendulum(rho: f64, b: f64, sampling_time: f64) -> ProblemDef {
    let a = b * b + 1.0;
    let lo = (-b - (a + rho).sqrt()).atan();
    let hi = (-b - (a - rho).sqrt()).atan();
    let q = rect(&[lo], &[hi]);
    ProblemDef {
        name: "pendulum".into(),
        system: SystemDef {
            state_dim: 1,
            input_dim: 1,
            kind: SystemKind::SampledOde {
                rhs: OdeField::Pendulum { b },
                sampling_time,
                growth: pendulum_growth(b),
            },
            disturbance: None,
        },
        reverse: None,
        safe_set: SafeSet::Box(q.clone()),
        state_box: q,
        input_box: rect(&[-rho], &[rho]),
        eta_s: vec![1e-4],
        eta_i: vec![0.2 * rho],
        tau: 1,
        full_scale_eta_s: Some(vec![1e-6]),
        theory: Some(2.0 / std::f64::consts::LN_2 * (a - rho).sqrt()),
    }
}

/// Side length of the square holding the horseshoe of the uncontrolled map.
pub fn henon_square_side() -> f64 {
    1.3 + (1.3f64 * 1.3 + 20.0).sqrt()
}

/// `(x, y)+ = (5 - 0.3 y - x^2 + u, x + v)` with `|u|, |v| <= eps`.
pub fn henon(eps: f64) -> ProblemDef {
    let half = 0.5 * henon_square_side();
    let forward = PolyMap {
        components: vec![
            vec![
                term(5.0, &[], &[]),
                term(-0.3, &[0, 1], &[]),
                term(-1.0, &[2], &[]),
                term(1.0, &[], &[1]),
            ],
            vec![term(1.0, &[1], &[]), term(1.0, &[], &[0, 1])],
        ],
    };
    let backward = PolyMap {
        components: vec![
            vec![term(1.0, &[0, 1], &[]), term(-1.0, &[], &[0, 1])],
            vec![
                term(5.0 / 0.3, &[], &[]),
                term(-1.0 / 0.3, &[0, 2], &[]),
                term(1.0 / 0.3, &[], &[1]),
                term(-1.0 / 0.3, &[1], &[]),
            ],
        ],
    };
    let q = rect(&[-half, -half], &[half, half]);
    let sys = |map| SystemDef {
        state_dim: 2,
        input_dim: 2,
        kind: SystemKind::Polynomial { map },
        disturbance: None,
    };
    ProblemDef {
        name: "henon".into(),
        system: sys(forward),
        reverse: Some(sys(backward)),
        safe_set: SafeSet::Box(q.clone()),
        state_box: q,
        input_box: rect(&[-eps, -eps], &[eps, eps]),
        eta_s: vec![0.05, 0.05],
        eta_i: vec![0.01, 0.01],
        tau: 1,
        full_scale_eta_s: Some(vec![0.009, 0.009]),
        theory: Some(0.696),
    }
}

/// `x+ in [[2,1],[-0.4,0.5]] x + (1,1)^T u + [-0.1,0.1]^2` on `[-1,1] x [-2,2]`.
pub fn uncertain_linear(eta_s: f64) -> ProblemDef {
    let q = rect(&[-1.0, -2.0], &[1.0, 2.0]);
    ProblemDef {
        name: "uncertain-linear".into(),
        system: SystemDef {
            state_dim: 2,
            input_dim: 1,
            kind: SystemKind::Affine {
                a: vec![vec![2.0, 1.0], vec![-0.4, 0.5]],
                b: vec![vec![1.0], vec![1.0]],
            },
            disturbance: Some(rect(&[-0.1, -0.1], &[0.1, 0.1])),
        },
        reverse: None,
        safe_set: SafeSet::Box(q.clone()),
        state_box: q,
        input_box: rect(&[-1.0], &[1.0]),
        eta_s: vec![eta_s, eta_s],
        eta_i: vec![0.05],
        tau: 1,
        full_scale_eta_s: None,
        theory: None,
    }
}
