//! System definitions and one-step reachable-set enclosures.
//!
//! Three oracles are provided: the exact interval hull of an affine image, the
//! natural interval extension of a polynomial map, and a sampled ODE flow
//! enclosed by an RK4 image of the box centre inflated with a growth bound.
//! Every oracle adds the additive disturbance box when one is present.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HyperRect;
use crate::interval::{Interval, PolyMap};

/// RK4 substeps per sampling interval.
pub const RK4_SUBSTEPS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct ReachResult {
    pub enclosure: HyperRect,
    /// The enclosure is the exact interval hull of the image.
    pub exact: bool,
}

/// Right-hand side of a continuous-time system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "field", rename_all = "kebab-case")]
pub enum OdeField {
    /// Projectivised linearisation of a damped pendulum at its upright position:
    /// `x' = -2b sin x cos x - sin^2 x + cos^2 x + u cos^2 x`.
    Pendulum { b: f64 },
    /// Polynomial vector field in state and input.
    Polynomial { map: PolyMap },
}

impl OdeField {
    pub fn eval(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        match self {
            OdeField::Pendulum { b } => {
                let (s, c) = x[0].sin_cos();
                vec![-2.0 * b * s * c - s * s + c * c + u[0] * c * c]
            }
            OdeField::Polynomial { map } => map.eval(x, u),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemKind {
    /// `x+ = A x + B u`
    Affine { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
    /// `x+ = p(x, u)`
    Polynomial { map: PolyMap },
    /// Flow of an ODE over one sampling interval with piecewise-constant input.
    SampledOde {
        rhs: OdeField,
        sampling_time: f64,
        /// Growth constant used to inflate the cell radius by `exp(growth * T_s)`.
        growth: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemDef {
    pub state_dim: usize,
    pub input_dim: usize,
    #[serde(flatten)]
    pub kind: SystemKind,
    /// Additive disturbance box `W`; its presence makes the system set-valued.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<HyperRect>,
}

impl SystemDef {
    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 || self.input_dim == 0 {
            return Err(Error::System("state and input dimensions must be positive".into()));
        }
        match &self.kind {
            SystemKind::Affine { a, b } => {
                check_matrix(a, self.state_dim, self.state_dim, "A")?;
                check_matrix(b, self.state_dim, self.input_dim, "B")?;
            }
            SystemKind::Polynomial { map } => map.validate(self.state_dim, self.input_dim)?,
            SystemKind::SampledOde {
                rhs,
                sampling_time,
                growth,
            } => {
                if !(sampling_time.is_finite() && *sampling_time > 0.0) {
                    return Err(Error::System("sampling time must be positive".into()));
                }
                if !growth.is_finite() {
                    return Err(Error::System("growth constant must be finite".into()));
                }
                match rhs {
                    OdeField::Pendulum { .. } => {
                        if self.state_dim != 1 || self.input_dim != 1 {
                            return Err(Error::System("pendulum field is scalar".into()));
                        }
                    }
                    OdeField::Polynomial { map } => map.validate(self.state_dim, self.input_dim)?,
                }
            }
        }
        if let Some(w) = &self.disturbance {
            if w.dim() != self.state_dim {
                return Err(Error::Dimension {
                    expected: self.state_dim,
                    got: w.dim(),
                });
            }
        }
        Ok(())
    }

    pub fn is_uncertain(&self) -> bool {
        self.disturbance.is_some()
    }

    /// False when a disturbance box is present that does not contain the origin.
    pub fn disturbance_contains_origin(&self) -> bool {
        self.disturbance
            .as_ref()
            .is_none_or(|w| w.contains_point(&vec![0.0; w.dim()]))
    }

    /// Enclosure of `{f(x, u) + w : x in rect, w in W}`.
    pub fn reach(&self, rect: &HyperRect, u: &[f64]) -> Result<ReachResult> {
        if rect.dim() != self.state_dim {
            return Err(Error::Dimension {
                expected: self.state_dim,
                got: rect.dim(),
            });
        }
        if u.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                got: u.len(),
            });
        }
        let w = self.disturbance.as_ref();
        match &self.kind {
            SystemKind::Affine { a, b } => reach_affine(a, b, rect, u, w),
            SystemKind::Polynomial { map } => reach_interval(map, rect, u, w),
            SystemKind::SampledOde {
                rhs,
                sampling_time,
                growth,
            } => {
                let r = reach_ode(rhs, rect, u, *sampling_time, *growth)?;
                Ok(match w {
                    Some(w) => ReachResult {
                        enclosure: minkowski_sum(&r.enclosure, w),
                        exact: false,
                    },
                    None => r,
                })
            }
        }
    }

    /// One concrete step; `w` is the disturbance realisation (ignored when absent).
    pub fn step(&self, x: &[f64], u: &[f64], w: Option<&[f64]>) -> Result<Vec<f64>> {
        let mut y = match &self.kind {
            SystemKind::Affine { a, b } => {
                let mut y = mat_vec(a, x);
                for (yi, bu) in y.iter_mut().zip(mat_vec(b, u)) {
                    *yi += bu;
                }
                y
            }
            SystemKind::Polynomial { map } => map.eval(x, u),
            SystemKind::SampledOde {
                rhs, sampling_time, ..
            } => rk4_flow(rhs, x, u, *sampling_time)?,
        };
        if let (Some(w), Some(_)) = (w, &self.disturbance) {
            for (yi, wi) in y.iter_mut().zip(w) {
                *yi += wi;
            }
        }
        Ok(y)
    }
}

fn check_matrix(m: &[Vec<f64>], rows: usize, cols: usize, name: &str) -> Result<()> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(Error::System(format!("{name} must be {rows}x{cols}")));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::System(format!("{name} has non-finite entries")));
    }
    Ok(())
}

fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, v)| a * v).sum())
        .collect()
}

pub fn minkowski_sum(a: &HyperRect, b: &HyperRect) -> HyperRect {
    let lb = a.lb().iter().zip(b.lb()).map(|(x, y)| x + y).collect();
    let ub = a.ub().iter().zip(b.ub()).map(|(x, y)| x + y).collect();
    HyperRect::new(lb, ub).expect("sum of valid boxes is valid")
}

/// Exact interval hull of `A rect + B u`, plus `W`, via centre and radius.
pub fn reach_affine(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    rect: &HyperRect,
    u: &[f64],
    w: Option<&HyperRect>,
) -> Result<ReachResult> {
    let d = rect.dim();
    if a.len() != d || a.iter().any(|r| r.len() != d) || b.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: a.len(),
        });
    }
    if b.iter().any(|r| r.len() != u.len()) {
        return Err(Error::Dimension {
            expected: u.len(),
            got: b.first().map_or(0, Vec::len),
        });
    }
    let c = rect.center();
    let r = rect.radius();
    let mut center = mat_vec(a, &c);
    for (ci, bu) in center.iter_mut().zip(mat_vec(b, u)) {
        *ci += bu;
    }
    let mut radius: Vec<f64> = a
        .iter()
        .map(|row| row.iter().zip(&r).map(|(x, ri)| x.abs() * ri).sum())
        .collect();
    if let Some(w) = w {
        if w.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                got: w.dim(),
            });
        }
        for ((ci, ri), (wc, wr)) in center
            .iter_mut()
            .zip(radius.iter_mut())
            .zip(w.center().into_iter().zip(w.radius()))
        {
            *ci += wc;
            *ri += wr;
        }
    }
    Ok(ReachResult {
        enclosure: HyperRect::from_center_radius(&center, &radius)?,
        exact: true,
    })
}

/// Natural interval extension of a polynomial map over `rect`, plus `W`.
pub fn reach_interval(
    map: &PolyMap,
    rect: &HyperRect,
    u: &[f64],
    w: Option<&HyperRect>,
) -> Result<ReachResult> {
    let x: Vec<Interval> = rect
        .lb()
        .iter()
        .zip(rect.ub())
        .map(|(l, h)| Interval::new(*l, *h))
        .collect();
    let y = map.eval_interval(&x, u);
    let mut enclosure = HyperRect::new(
        y.iter().map(|i| i.lo).collect(),
        y.iter().map(|i| i.hi).collect(),
    )
    .map_err(|_| Error::IntegrationDiverged)?;
    if let Some(w) = w {
        enclosure = minkowski_sum(&enclosure, w);
    }
    Ok(ReachResult {
        enclosure,
        exact: false,
    })
}

/// Classical RK4 over `[0, ts]` with [`RK4_SUBSTEPS`] steps.
pub fn rk4_flow(rhs: &OdeField, x0: &[f64], u: &[f64], ts: f64) -> Result<Vec<f64>> {
    let h = ts / RK4_SUBSTEPS as f64;
    let mut x = x0.to_vec();
    let axpy = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        x.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    for _ in 0..RK4_SUBSTEPS {
        let k1 = rhs.eval(&x, u);
        let k2 = rhs.eval(&axpy(&x, &k1, 0.5 * h), u);
        let k3 = rhs.eval(&axpy(&x, &k2, 0.5 * h), u);
        let k4 = rhs.eval(&axpy(&x, &k3, h), u);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged);
        }
    }
    Ok(x)
}

/// RK4 image of the box centre, inflated by `r * exp(growth * ts)` per axis.
///
/// Sound whenever `growth` bounds the logarithmic norm of the Jacobian on the
/// region swept by the flow; the RK4 truncation error is not accounted for.
pub fn reach_ode(
    rhs: &OdeField,
    rect: &HyperRect,
    u: &[f64],
    ts: f64,
    growth: f64,
) -> Result<ReachResult> {
    let center = rk4_flow(rhs, &rect.center(), u, ts)?;
    let factor = (growth * ts).exp();
    let radius: Vec<f64> = rect.radius().iter().map(|r| r * factor).collect();
    if radius.iter().any(|r| !r.is_finite()) {
        return Err(Error::IntegrationDiverged);
    }
    Ok(ReachResult {
        enclosure: HyperRect::from_center_radius(&center, &radius)?,
        exact: false,
    })
}
