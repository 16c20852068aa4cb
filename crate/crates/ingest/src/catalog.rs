//! Source series for the euro-area periphery panel and the transforms that
//! turn them into model variables.

use panelvar::identify::{BASELINE_VARIABLES, UNEMPLOYMENT_VARIABLES};
use serde::{Deserialize, Serialize};

use crate::fetch::Provider;
use crate::transform::TransformSpec;

pub const COUNTRIES: [&str; 4] = ["ES", "IE", "IT", "PT"];

pub const INDUSTRIAL_PRODUCTION: &str = "industrial_production";
pub const UNEMPLOYMENT_RATE: &str = "unemployment_rate";
pub const CONSUMER_PRICES: &str = "consumer_prices";
pub const LOANS: &str = "loans";
pub const FOREIGN_DEBT: &str = "foreign_government_debt";
pub const DOMESTIC_DEBT: &str = "domestic_government_debt";
pub const LENDING_RATE: &str = "lending_rate";
pub const BOND_YIELD: &str = "bond_yield";
pub const SWAP_RATE: &str = "swap_rate";
pub const SHADOW_RATE: &str = "shadow_rate";

/// Euro-area series replicated into every country block. Neither has an ECB
/// or Eurostat key, so both are read from local files.
pub const SHARED_SERIES: [&str; 2] = [SWAP_RATE, SHADOW_RATE];

/// Which activity measure enters the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Baseline,
    Unemployment,
}

impl std::str::FromStr for Variant {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "unemployment" => Ok(Variant::Unemployment),
            other => Err(crate::Error::Invalid(format!("unknown variant '{other}'"))),
        }
    }
}

impl Variant {
    pub fn variables(self) -> Vec<String> {
        let names = match self {
            Variant::Baseline => BASELINE_VARIABLES,
            Variant::Unemployment => UNEMPLOYMENT_VARIABLES,
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    /// `(variable, transform)` pairs in model order.
    pub fn transforms(self) -> Vec<(String, TransformSpec)> {
        let input = |s: &str| s.to_string();
        let activity = match self {
            Variant::Baseline => TransformSpec::Log100 {
                input: input(INDUSTRIAL_PRODUCTION),
            },
            Variant::Unemployment => TransformSpec::Passthrough {
                input: input(UNEMPLOYMENT_RATE),
            },
        };
        let specs = [
            activity,
            TransformSpec::Log100 {
                input: input(CONSUMER_PRICES),
            },
            TransformSpec::Log100 { input: input(LOANS) },
            TransformSpec::Passthrough {
                input: input(LENDING_RATE),
            },
            TransformSpec::Ratio100 {
                numerator: input(DOMESTIC_DEBT),
                denominator: input(FOREIGN_DEBT),
            },
            TransformSpec::Spread {
                minuend: input(BOND_YIELD),
                subtrahend: input(SWAP_RATE),
            },
            TransformSpec::Passthrough {
                input: input(SHADOW_RATE),
            },
        ];
        self.variables().into_iter().zip(specs).collect()
    }

    /// Raw country-level series the variant needs.
    pub fn country_series(self) -> Vec<&'static str> {
        let activity = match self {
            Variant::Baseline => INDUSTRIAL_PRODUCTION,
            Variant::Unemployment => UNEMPLOYMENT_RATE,
        };
        vec![activity, CONSUMER_PRICES, LOANS, FOREIGN_DEBT, DOMESTIC_DEBT, LENDING_RATE, BOND_YIELD]
    }
}

/// Remote source of a country-level raw series.
pub fn remote_code(series: &str, country: &str) -> Option<(Provider, String)> {
    let ecb = |s: String| Some((Provider::EcbSdmx, s));
    let eurostat = |s: String| Some((Provider::Eurostat, s));
    match series {
        INDUSTRIAL_PRODUCTION => eurostat(format!("sts_inpr_m/M.PRD.B-D.SCA.I10.{country}")),
        UNEMPLOYMENT_RATE => eurostat(format!("une_rt_m/M.SA.TOTAL.PC_ACT.T.{country}")),
        CONSUMER_PRICES => eurostat(format!("prc_hicp_midx/M.I15.TOT_X_NRG_FOOD_NP.{country}")),
        LOANS => ecb(format!("BSI.M.{country}.N.A.A20T.A.1.U2.2240.Z01.E")),
        FOREIGN_DEBT => ecb(format!("BSI.M.{country}.N.A.A30.A.1.U5.2100.Z01.E")),
        DOMESTIC_DEBT => ecb(format!("BSI.M.{country}.N.A.A30.A.1.U6.2100.Z01.E")),
        LENDING_RATE => ecb(format!("MIR.M.{country}.B.A2I.AM.R.A.2240.EUR.N")),
        BOND_YIELD => ecb(format!("IRS.M.{country}.L.L40.CI.0000.EUR.N.Z")),
        _ => None,
    }
}
