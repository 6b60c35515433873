//! Severity regressor trained with MSE on real images and a ListNet ranking
//! loss on generated images.

mod losses;
mod model;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use losses::{combine_losses, listnet_topone_grad, listnet_topone_loss, mse_loss, softmax};
pub use model::{RegressionModel, RegressorArch, RegressorCache};
pub use train::{
    combined_objective, load_regressor, make_ranking_lists, save_regressor, train_regressor, EarlyStopping, EpochRow,
    RankItem, RegressorCheckpoint, TrainConfig, TrainedRegressor, TRAIN_LOG_HEADER,
};

use crate::error::CsdaError;

/// Training regime of the regressor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    /// MSE on real images only.
    Baseline,
    /// MSE on real images with random flips and quarter turns.
    ClassicDa,
    /// MSE plus ranking lists drawn from the real training images.
    CdaNoGan,
    /// MSE plus ranking lists drawn from csGAN images on an ε-grid.
    Cda(f64),
}

impl Method {
    pub fn uses_ranking(&self) -> bool {
        matches!(self, Method::CdaNoGan | Method::Cda(_))
    }

    /// Human-readable row label.
    pub fn label(&self) -> String {
        match self {
            Method::Baseline => "Regression (Baseline)".into(),
            Method::ClassicDa => "Classic DA".into(),
            Method::CdaNoGan => "C-DA w/o GAN".into(),
            Method::Cda(e) => format!("C-DA (ε={e})"),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Baseline => f.write_str("baseline"),
            Method::ClassicDa => f.write_str("classic_da"),
            Method::CdaNoGan => f.write_str("cda_no_gan"),
            Method::Cda(e) => write!(f, "cda({e})"),
        }
    }
}

impl FromStr for Method {
    type Err = CsdaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CsdaError::Config(format!("unknown method {s:?}; expected baseline, classic_da, cda_no_gan or cda(<epsilon>)"));
        match s.trim() {
            "baseline" => Ok(Method::Baseline),
            "classic_da" => Ok(Method::ClassicDa),
            "cda_no_gan" => Ok(Method::CdaNoGan),
            other => {
                let eps = other
                    .strip_prefix("cda(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(bad)?
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| bad())?;
                if !(eps.is_finite() && eps > 0.0) {
                    return Err(bad());
                }
                Ok(Method::Cda(eps))
            }
        }
    }
}

impl TryFrom<String> for Method {
    type Error = CsdaError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> Self {
        m.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_strings_round_trip() {
        for m in [Method::Baseline, Method::ClassicDa, Method::CdaNoGan, Method::Cda(0.25)] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert_eq!("cda( 0.5 )".parse::<Method>().unwrap(), Method::Cda(0.5));
        assert!("cda".parse::<Method>().unwrap_err().is_config());
        assert!("cda(-1)".parse::<Method>().is_err());
        assert_eq!(Method::Cda(0.5).label(), "C-DA (ε=0.5)");
    }
}
