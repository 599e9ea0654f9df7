use std::fmt;
use std::str::FromStr;

use crate::cone::{Exponent, FlatCone, HalfSpaceCone, ParabolaCone, TRACE_TOL};
use crate::error::{Error, Result};

/// Boundary data family of a solve, given by the 2-homogeneous profile it
/// should produce after the transform `v ↦ v^{2/β} / (γ(2-γ))`.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySpec {
    /// Flat cone in direction `e`; the profile is `((2-γ)/(2γ)) [(x·e)_+]²`.
    Flat(Vec<f64>),
    /// `½ x·diag(λ) x` for eigenvalues summing to one.
    Parabola(Vec<f64>),
    /// `P_k` in standard coordinates.
    Symmetric(usize),
}

impl BoundarySpec {
    /// Checks the spec against a dimension.
    pub fn resolve(&self, d: usize) -> Result<ResolvedBoundary> {
        match self {
            BoundarySpec::Flat(e) => {
                let e = if e.is_empty() {
                    let mut v = vec![0.0; d];
                    v[0] = 1.0;
                    v
                } else {
                    e.clone()
                };
                if e.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: e.len(),
                    });
                }
                let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(norm > 0.0) {
                    return Err(Error::Parse("flat direction must be nonzero".into()));
                }
                Ok(ResolvedBoundary::Flat(e.iter().map(|v| v / norm).collect()))
            }
            BoundarySpec::Parabola(values) => {
                if values.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: values.len(),
                    });
                }
                let sum: f64 = values.iter().sum();
                if (sum - 1.0).abs() > TRACE_TOL {
                    return Err(Error::InvalidCone(format!(
                        "eigenvalues sum to {sum}, deviation {:e} from 1",
                        sum - 1.0
                    )));
                }
                Ok(ResolvedBoundary::Parabola(ParabolaCone::diagonal(values)?))
            }
            BoundarySpec::Symmetric(k) => Ok(ResolvedBoundary::Parabola(ParabolaCone::symmetric(d, *k)?)),
        }
    }
}

impl FromStr for BoundarySpec {
    type Err = Error;

    /// `flat`, `flat:e1,…,ed`, `parabola:l1,…,ld` or `symmetric:k`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let list = |text: &str| -> Result<Vec<f64>> {
            text.split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("`{t}` in boundary spec: {e}")))
                })
                .collect()
        };
        match kind {
            "flat" => Ok(BoundarySpec::Flat(list(rest)?)),
            "parabola" => {
                let v = list(rest)?;
                if v.is_empty() {
                    return Err(Error::Parse("parabola needs eigenvalues, e.g. parabola:0.7,0.3".into()));
                }
                Ok(BoundarySpec::Parabola(v))
            }
            "symmetric" => rest
                .trim()
                .parse::<usize>()
                .map(BoundarySpec::Symmetric)
                .map_err(|e| Error::Parse(format!("symmetric:k needs an integer k: {e}"))),
            other => Err(Error::Parse(format!(
                "unknown boundary `{other}` (expected flat, parabola or symmetric)"
            ))),
        }
    }
}

impl fmt::Display for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            BoundarySpec::Flat(e) if e.is_empty() => f.write_str("flat"),
            BoundarySpec::Flat(e) => write!(f, "flat:{}", join(e)),
            BoundarySpec::Parabola(v) => write!(f, "parabola:{}", join(v)),
            BoundarySpec::Symmetric(k) => write!(f, "symmetric:{k}"),
        }
    }
}

/// A boundary spec checked against a dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedBoundary {
    Flat(Vec<f64>),
    Parabola(ParabolaCone),
}

impl ResolvedBoundary {
    /// The 2-homogeneous transformed profile at `x`.
    pub fn profile(&self, exp: &Exponent, x: &[f64]) -> f64 {
        match self {
            ResolvedBoundary::Flat(e) => {
                let s: f64 = x.iter().zip(e).map(|(a, b)| a * b).sum::<f64>().max(0.0);
                exp.transformed_flat_scale() * s * s
            }
            ResolvedBoundary::Parabola(p) => p.eval(x).expect("dimension checked").max(0.0),
        }
    }

    /// The β-homogeneous data `(γ(2-γ) profile)^{β/2}` fed to the solver.
    pub fn data(&self, exp: &Exponent, x: &[f64]) -> f64 {
        exp.inverse_transform(self.profile(exp, x))
    }

    /// Parabola against which the Green identity is evaluated; for flat
    /// data the rank-one cone `½ (x·e)²`.
    pub fn reference_parabola(&self) -> ParabolaCone {
        match self {
            ResolvedBoundary::Parabola(p) => p.clone(),
            ResolvedBoundary::Flat(e) => {
                let d = e.len();
                let m = nalgebra::DMatrix::from_fn(d, d, |i, j| e[i] * e[j]);
                let m = (&m + m.transpose()) * 0.5;
                let t = m.trace();
                ParabolaCone::new(m / t).expect("rank-one projector is a valid cone")
            }
        }
    }

    /// The β-homogeneous flat cone matching flat data.
    pub fn flat_cone(&self, exp: &Exponent) -> Option<FlatCone> {
        match self {
            ResolvedBoundary::Flat(e) => FlatCone::new(*exp, e.clone()).ok(),
            ResolvedBoundary::Parabola(_) => None,
        }
    }

    /// Transformed (2-homogeneous) form of flat data.
    pub fn half_space(&self, exp: &Exponent) -> Option<HalfSpaceCone> {
        match self {
            ResolvedBoundary::Flat(e) => HalfSpaceCone::transformed_flat(exp, e.clone()).ok(),
            ResolvedBoundary::Parabola(_) => None,
        }
    }
}
