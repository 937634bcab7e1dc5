//! Bell-inequality tests on two- and three-mode states: displaced parity, pseudospin and
//! binned homodyne detection.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod homodyne;
pub mod mixture;
pub mod parity;
pub mod pseudospin;

pub use homodyne::{homodyne_bell2, homodyne_correlation, homodyne_correlation_mc};
pub use mixture::{
    ips_coefficients, ips_wigner, twba_click_probability, twba_wigner, GaussianMixture, IpsCoefficients, IpsPrecise,
    WignerFunction,
};
pub use parity::{
    bell2_dp, bell2_dp_twb, bell2_dp_twb_closed, bell3_dp, bell3_dp_t_closed, bell3_dp_v3_closed, bell_dp_family_sweep,
    bell_dp_sweep, dp_correlation, linear_grid, log_grid, t_state_for_dp, v3_quarter_turn, DpParameterization,
    DpSetting,
};
pub use pseudospin::{
    bell2_ps, f_ecs, f_twba, gkm_correlation, gkm_three_mode, ips_ps_closed, ps_correlation, ps_correlation_factor,
    t_gkm_closed, t_state_ps_coefficients, v3_gkm_closed, PsCorrelation, PsState, ThreeModePs,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BellTest {
    #[serde(rename = "DP2")]
    Dp2,
    #[serde(rename = "PS2")]
    Ps2,
    #[serde(rename = "H2")]
    H2,
    #[serde(rename = "DP3")]
    Dp3,
    #[serde(rename = "PS3")]
    Ps3,
}

impl BellTest {
    pub fn n_parties(self) -> usize {
        match self {
            Self::Dp3 | Self::Ps3 => 3,
            _ => 2,
        }
    }

    /// 2^{(n+1)/2}: 2√2 for two parties, 4 for three.
    pub fn quantum_bound(self) -> f64 {
        2f64.powf((self.n_parties() as f64 + 1.0) / 2.0)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Dp2 => "DP2",
            Self::Ps2 => "PS2",
            Self::H2 => "H2",
            Self::Dp3 => "DP3",
            Self::Ps3 => "PS3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellResult {
    pub test: BellTest,
    pub state: String,
    pub params: Vec<(String, f64)>,
    pub value: f64,
    /// |value| > 2
    pub violation: bool,
}

impl BellResult {
    pub fn new(test: BellTest, state: &str, params: Vec<(String, f64)>, value: f64) -> Self {
        Self { test, state: state.to_string(), params, value, violation: value.abs() > 2.0 }
    }

    /// Row with the largest |value|; ties keep the first.
    pub fn best(rows: &[BellResult]) -> Option<BellResult> {
        rows.iter()
            .fold(None::<&BellResult>, |acc, r| match acc {
                Some(b) if b.value.abs() >= r.value.abs() => Some(b),
                _ => Some(r),
            })
            .cloned()
    }

    pub fn within_quantum_bound(&self, tol: f64) -> bool {
        self.value.abs() <= self.test.quantum_bound() + tol
    }
}

/// Writes `test,state,param1,param2,...,bell_value,violation`, one row per result.
/// Parameter cells hold bare numbers in the order of `BellResult::params` (shortest
/// round-trip form); shorter rows are padded with empty cells.
pub fn write_csv<W: Write>(out: W, rows: &[BellResult]) -> Result<()> {
    let width = rows.iter().map(|r| r.params.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["test".to_string(), "state".to_string()];
    header.extend((1..=width).map(|i| format!("param{i}")));
    header.extend(["bell_value".to_string(), "violation".to_string()]);
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.test.label().to_string(), r.state.clone()];
        for i in 0..width {
            rec.push(r.params.get(i).map(|(_, v)| v.to_string()).unwrap_or_default());
        }
        rec.push(r.value.to_string());
        rec.push(r.violation.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(format!("csv: {e}"))
}
