//! Heat-load budget for RF, cryo-CMOS and SFQ control schemes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{flux_power_nw, format_sig};

pub const PASSIVE_PER_COAX_NW: f64 = 4.0;
pub const REFERENCE_F_CLK_GHZ: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rf,
    CryoCmos,
    Sfq,
}

fn default_coax() -> f64 {
    PASSIVE_PER_COAX_NW
}
fn default_f_clk() -> f64 {
    REFERENCE_F_CLK_GHZ
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Column label.
    pub name: String,
    pub scheme: Scheme,
    pub n_qubits: u32,
    pub rf_lines: u32,
    pub dio_lines: u32,
    pub dc_lines: u32,
    #[serde(default = "default_coax")]
    pub passive_per_coax_nw: f64,
    /// Static dissipation of the cold electronics, nW.
    #[serde(default)]
    pub static_nw: Option<f64>,
    /// Bias current of the SFQ circuit, mA.
    #[serde(default)]
    pub i_bias_ma: Option<f64>,
    #[serde(default = "default_f_clk")]
    pub f_clk_ghz: f64,
    /// Fraction of time the SFQ circuit is clocked.
    #[serde(default = "one")]
    pub duty: f64,
    /// Active load per RF line, nW.
    #[serde(default)]
    pub rf_active_per_line_nw: Option<f64>,
    /// Channel-switching load at the reference rate, nW.
    #[serde(default)]
    pub switch_ref_nw: Option<f64>,
    #[serde(default)]
    pub switch_ref_mhz: Option<f64>,
    #[serde(default)]
    pub f_switch_mhz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub scenario: Vec<Scenario>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let f: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(format!("scenario file: {e}")))?;
        if f.scenario.is_empty() {
            return Err(Error::Parse("scenario file lists no scenarios".into()));
        }
        for s in &f.scenario {
            s.validate()?;
        }
        Ok(f)
    }
}

fn non_negative(name: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x >= 0.0) || !x.is_finite() => {
            Err(Error::param(format!("{name} must be finite and ≥ 0, got {x}")))
        }
        _ => Ok(()),
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::param(format!("scenario {}: n_qubits must be positive", self.name)));
        }
        non_negative("passive_per_coax_nw", Some(self.passive_per_coax_nw))?;
        non_negative("static_nw", self.static_nw)?;
        non_negative("i_bias_ma", self.i_bias_ma)?;
        non_negative("f_clk_ghz", Some(self.f_clk_ghz))?;
        non_negative("rf_active_per_line_nw", self.rf_active_per_line_nw)?;
        non_negative("switch_ref_nw", self.switch_ref_nw)?;
        non_negative("f_switch_mhz", self.f_switch_mhz)?;
        if !(0.0..=1.0).contains(&self.duty) {
            return Err(Error::param(format!("duty must be in [0, 1], got {}", self.duty)));
        }
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::param(format!("scenario {}: {what}", self.name)))
            }
        };
        match self.scheme {
            Scheme::Rf => need(self.rf_active_per_line_nw.is_some(), "RF scheme needs rf_active_per_line_nw"),
            Scheme::Sfq => need(self.i_bias_ma.is_some(), "SFQ scheme needs i_bias_ma"),
            Scheme::CryoCmos => {
                need(
                    self.switch_ref_nw.is_some() && self.f_switch_mhz.is_some(),
                    "cryo-CMOS scheme needs switch_ref_nw and f_switch_mhz",
                )?;
                need(
                    self.switch_ref_mhz.is_some_and(|f| f > 0.0),
                    "cryo-CMOS scheme needs a positive switch_ref_mhz",
                )
            }
        }
    }
}

/// `P_D = Φ0·I_b·f_clk` in nW for `I_b` in mA and `f_clk` in GHz.
pub fn active_power(i_bias_ma: f64, f_clk_ghz: f64) -> Result<f64> {
    if !(i_bias_ma >= 0.0) || !(f_clk_ghz >= 0.0) {
        return Err(Error::param("bias current and clock frequency must be ≥ 0"));
    }
    Ok(flux_power_nw(i_bias_ma, f_clk_ghz))
}

/// Budget rows in nW; `None` marks a load that does not apply to the scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Budget {
    pub name: String,
    pub n_qubits: u32,
    pub rf_lines: u32,
    pub dio_lines: u32,
    pub dc_lines: u32,
    pub passive_wiring: f64,
    pub static_dissipation: Option<f64>,
    pub active: Option<f64>,
    pub switching: Option<f64>,
    pub total: f64,
    pub per_qubit: f64,
}

pub fn heat_budget(s: &Scenario) -> Result<Budget> {
    s.validate()?;
    let passive_wiring = s.rf_lines as f64 * s.passive_per_coax_nw;
    let (static_dissipation, active, switching) = match s.scheme {
        Scheme::Rf => (None, s.rf_active_per_line_nw.map(|p| p * s.rf_lines as f64), None),
        Scheme::Sfq => (
            Some(s.static_nw.unwrap_or(0.0)),
            Some(active_power(s.i_bias_ma.unwrap_or(0.0), s.f_clk_ghz)? * s.duty),
            Some(0.0),
        ),
        Scheme::CryoCmos => {
            let (p, f, f_ref) = (
                s.switch_ref_nw.unwrap_or(0.0),
                s.f_switch_mhz.unwrap_or(0.0),
                s.switch_ref_mhz.unwrap_or(1.0),
            );
            (s.static_nw, None, Some(p * f / f_ref))
        }
    };
    let total = passive_wiring
        + static_dissipation.unwrap_or(0.0)
        + active.unwrap_or(0.0)
        + switching.unwrap_or(0.0);
    Ok(Budget {
        name: s.name.clone(),
        n_qubits: s.n_qubits,
        rf_lines: s.rf_lines,
        dio_lines: s.dio_lines,
        dc_lines: s.dc_lines,
        passive_wiring,
        static_dissipation,
        active,
        switching,
        total,
        per_qubit: total / s.n_qubits as f64,
    })
}

pub const TABLE_SIG_DIGITS: usize = 4;

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format_sig(x, TABLE_SIG_DIGITS))
}

/// Table in the published row/column layout: one column per scenario.
pub fn budget_table_csv(budgets: &[Budget]) -> String {
    let mut rows: Vec<(&str, Vec<String>)> = vec![
        ("technology", budgets.iter().map(|b| b.name.clone()).collect()),
        ("n_qubits", budgets.iter().map(|b| b.n_qubits.to_string()).collect()),
        ("rf_lines", budgets.iter().map(|b| b.rf_lines.to_string()).collect()),
        ("digital_io_lines", budgets.iter().map(|b| b.dio_lines.to_string()).collect()),
        ("dc_lines", budgets.iter().map(|b| b.dc_lines.to_string()).collect()),
    ];
    let numeric: [(&str, fn(&Budget) -> Option<f64>); 6] = [
        ("passive_wiring_nw", |b| Some(b.passive_wiring)),
        ("passive_static_nw", |b| b.static_dissipation),
        ("active_nw", |b| b.active),
        ("switching_nw", |b| b.switching),
        ("total_nw", |b| Some(b.total)),
        ("total_per_qubit_nw", |b| Some(b.per_qubit)),
    ];
    for (label, f) in numeric {
        rows.push((label, budgets.iter().map(|b| cell(f(b))).collect()));
    }
    let mut out = String::new();
    for (label, cells) in rows {
        out.push_str(label);
        for c in cells {
            out.push(',');
            out.push_str(&c);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sfq(name: &str, n: u32, dio: u32, i: f64) -> Scenario {
        Scenario {
            name: name.into(),
            scheme: Scheme::Sfq,
            n_qubits: n,
            rf_lines: 1,
            dio_lines: dio,
            dc_lines: 1,
            passive_per_coax_nw: 4.0,
            static_nw: Some(0.0),
            i_bias_ma: Some(i),
            f_clk_ghz: 2.5,
            duty: 1.0,
            rf_active_per_line_nw: None,
            switch_ref_nw: None,
            switch_ref_mhz: None,
            f_switch_mhz: None,
        }
    }

    #[test]
    fn active_power_examples() {
        assert_eq!(active_power(1.0, 0.0).unwrap(), 0.0);
        assert!((active_power(0.580, 2.5).unwrap() - 3.0).abs() < 0.01);
        assert!((active_power(1.741, 2.5).unwrap() - 9.0).abs() < 0.01);
        assert!(active_power(-1.0, 2.5).is_err());
    }

    #[test]
    fn sfq_dmx_budgets() {
        let b4 = heat_budget(&sfq("SFQ-4", 4, 2, 1.741)).unwrap();
        assert!((b4.total - 13.0).abs() < 0.005);
        assert!((b4.per_qubit - 3.25).abs() < 0.005);
        let b8 = heat_budget(&sfq("SFQ-8", 8, 3, 2.902)).unwrap();
        assert!((b8.total - 19.0).abs() < 0.005);
        assert!((b8.active.unwrap() - 15.0).abs() < 0.005);
        assert!((b8.per_qubit - 2.375).abs() < 0.0005);
        assert!(b8.per_qubit < b4.per_qubit);
        assert_eq!(b8.static_dissipation, Some(0.0));
    }

    #[test]
    fn half_duty_halves_active_load() {
        let mut s = sfq("SFQ-4", 4, 2, 1.741);
        let full = heat_budget(&s).unwrap().active.unwrap();
        s.duty = 0.5;
        assert!((heat_budget(&s).unwrap().active.unwrap() - full / 2.0).abs() < 1e-12);
    }

    #[test]
    fn rf_and_cmos() {
        let rf = Scenario {
            name: "RF-8".into(),
            scheme: Scheme::Rf,
            n_qubits: 8,
            rf_lines: 8,
            dio_lines: 0,
            dc_lines: 0,
            static_nw: None,
            i_bias_ma: None,
            rf_active_per_line_nw: Some(1.5),
            ..sfq("", 1, 0, 0.0)
        };
        let b = heat_budget(&rf).unwrap();
        assert_eq!(b.total, 44.0);
        assert_eq!(b.per_qubit, 5.5);
        assert_eq!(b.active, Some(12.0));

        let cmos = Scenario {
            name: "Cryo-CMOS-4".into(),
            scheme: Scheme::CryoCmos,
            n_qubits: 4,
            dio_lines: 2,
            static_nw: Some(240.0),
            i_bias_ma: None,
            switch_ref_nw: Some(1.0e4),
            switch_ref_mhz: Some(20.0),
            f_switch_mhz: Some(20.0),
            ..sfq("", 1, 0, 0.0)
        };
        let b = heat_budget(&cmos).unwrap();
        assert_eq!(b.total, 10244.0);
        assert_eq!(b.per_qubit, 2561.0);
        assert_eq!(b.active, None);
        let mut slow = cmos.clone();
        slow.f_switch_mhz = Some(10.0);
        assert_eq!(heat_budget(&slow).unwrap().switching, Some(5.0e3));
    }

    #[test]
    fn zero_qubits_rejected() {
        assert!(heat_budget(&sfq("x", 0, 2, 1.0)).is_err());
    }

    #[test]
    fn csv_layout() {
        let csv = budget_table_csv(&[heat_budget(&sfq("SFQ-4", 4, 2, 1.741)).unwrap()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "technology,SFQ-4");
        assert_eq!(lines[9], "total_nw,13");
        assert_eq!(lines[10], "total_per_qubit_nw,3.25");
    }
}
