use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Hidden-layer activation function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationKind {
    /// `1 / (1 + exp(-z))`
    Sigmoid,
    /// `exp(-z^2)`
    RadialBasis,
    /// `log(1 + exp(z))`
    Softplus,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 3] = [Self::Sigmoid, Self::RadialBasis, Self::Softplus];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sigmoid => "sigmoid",
            Self::RadialBasis => "radial-basis",
            Self::Softplus => "softplus",
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Self::Sigmoid => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
            Self::RadialBasis => (-z * z).exp(),
            Self::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sigmoid" => Ok(Self::Sigmoid),
            "radial-basis" | "rbf" => Ok(Self::RadialBasis),
            "softplus" => Ok(Self::Softplus),
            other => Err(Error::InvalidArgument(format!("unknown activation '{other}'"))),
        }
    }
}

pub fn activation_value(kind: ActivationKind, z: f64) -> f64 {
    kind.apply(z)
}
