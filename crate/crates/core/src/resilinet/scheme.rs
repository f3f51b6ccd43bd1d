use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Real;

/// How skip hyperconnections behave during training and inference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// No skips, no failout.
    Vanilla,
    /// Skips always active and summed in; no failout.
    Dfg,
    /// Skips carry data only when the node they bypass produced nothing.
    #[serde(rename = "resilinet")]
    ResiliNet,
    /// Skips always active and summed in; trained with failout.
    #[serde(rename = "resilinet_plus", alias = "resilinet+")]
    ResiliNetPlus,
}

/// Operator joining a primary input with its detour.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Join {
    /// `⊙`: the primary if present, otherwise the detour.
    Select,
    /// `⊕`: elementwise sum, absent inputs contribute nothing.
    Sum,
}

pub const ALL_SCHEMES: [Scheme; 4] = [Scheme::ResiliNetPlus, Scheme::ResiliNet, Scheme::Dfg, Scheme::Vanilla];

impl Scheme {
    pub fn uses_skips(self) -> bool {
        self != Scheme::Vanilla
    }

    pub fn join(self) -> Join {
        match self {
            Scheme::ResiliNet | Scheme::Vanilla => Join::Select,
            Scheme::Dfg | Scheme::ResiliNetPlus => Join::Sum,
        }
    }

    pub fn allows_failout(self) -> bool {
        matches!(self, Scheme::ResiliNet | Scheme::ResiliNetPlus)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Vanilla => "vanilla",
            Scheme::Dfg => "dfg",
            Scheme::ResiliNet => "resilinet",
            Scheme::ResiliNetPlus => "resilinet_plus",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" => Ok(Scheme::Vanilla),
            "dfg" => Ok(Scheme::Dfg),
            "resilinet" => Ok(Scheme::ResiliNet),
            "resilinet+" | "resilinet_plus" | "resilinet-plus" => Ok(Scheme::ResiliNetPlus),
            other => Err(Error::config(format!(
                "unknown scheme '{other}' (expected vanilla, dfg, resilinet, resilinet+)"
            ))),
        }
    }
}

/// Joins two dimension-matched, already weighted inputs.
pub fn combine_inputs<T: Real>(
    primary: Option<Array2<T>>,
    detour: Option<Array2<T>>,
    join: Join,
) -> Result<Option<Array2<T>>> {
    if let (Some(a), Some(b)) = (&primary, &detour) {
        if a.dim() != b.dim() {
            return Err(Error::dim(format!(
                "cannot join inputs of shape {:?} and {:?}",
                a.dim(),
                b.dim()
            )));
        }
    }
    Ok(match join {
        Join::Select => primary.or(detour),
        Join::Sum => match (primary, detour) {
            (Some(mut a), Some(b)) => {
                a += &b;
                Some(a)
            }
            (a, b) => a.or(b),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn select_prefers_primary() {
        let out = combine_inputs(Some(array![[1.0, 2.0]]), Some(array![[9.0, 9.0]]), Join::Select).unwrap();
        assert_eq!(out, Some(array![[1.0, 2.0]]));
        let out = combine_inputs(None, Some(array![[9.0, 9.0]]), Join::Select).unwrap();
        assert_eq!(out, Some(array![[9.0, 9.0]]));
        assert_eq!(combine_inputs::<f64>(None, None, Join::Select).unwrap(), None);
    }

    #[test]
    fn sum_treats_absent_as_zero() {
        let out = combine_inputs(Some(array![[1.0, 2.0]]), Some(array![[0.0, 0.0]]), Join::Sum).unwrap();
        assert_eq!(out, Some(array![[1.0, 2.0]]));
        let out = combine_inputs(Some(array![[1.0, 2.0]]), Some(array![[3.0, 4.0]]), Join::Sum).unwrap();
        assert_eq!(out, Some(array![[4.0, 6.0]]));
        let out = combine_inputs(None, Some(array![[3.0, 4.0]]), Join::Sum).unwrap();
        assert_eq!(out, Some(array![[3.0, 4.0]]));
        assert_eq!(combine_inputs::<f32>(None, None, Join::Sum).unwrap(), None);
    }

    #[test]
    fn mismatched_dims_are_an_error() {
        assert!(combine_inputs(Some(array![[1.0]]), Some(array![[1.0, 2.0]]), Join::Sum).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in ALL_SCHEMES {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert_eq!("ResiliNet+".parse::<Scheme>().unwrap(), Scheme::ResiliNetPlus);
        assert!("dropout".parse::<Scheme>().is_err());
    }
}
