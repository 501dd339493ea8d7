//! Behavioral model of the SFQ demultiplexer: channel routing from
//! selection-bit signs, operating windows and bias margin, crosstalk, time
//! multiplexed drive, and the programmable pulse counter.

mod counter;
mod tdm;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use counter::PulseCounter;
pub use tdm::{
    rabi_contrast, simulate_tdm, tdm_rabi_sweep, TdmEntry, TdmOutcome, TdmQubit, TdmRabiPoint, TdmSchedule,
};

/// Serialized stand-in for `−∞` dB.
pub const DB_FLOOR: f64 = -120.0;

/// Sign of a selection bias. `Plus` selects the 0 branch of the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

/// Binary-tree decoding, most significant selection bit first.
pub fn route(select: &[Sign]) -> Result<usize> {
    if select.is_empty() || select.len() > 16 {
        return Err(Error::param("selection tuple must have 1 to 16 bits"));
    }
    Ok(select
        .iter()
        .fold(0, |acc, s| (acc << 1) | usize::from(*s == Sign::Minus)))
}

pub fn route_inverse(channel: usize, n_bits: usize) -> Result<Vec<Sign>> {
    if n_bits == 0 || channel >= 1 << n_bits {
        return Err(Error::param(format!("channel {channel} does not fit in {n_bits} bits")));
    }
    Ok((0..n_bits)
        .rev()
        .map(|b| if channel >> b & 1 == 1 { Sign::Minus } else { Sign::Plus })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DmxConfig {
    pub n_out: usize,
    pub select_bits: Vec<Sign>,
    /// Main bias, mA.
    pub i_main: f64,
    /// Operating interval `[i_min, i_max]` per channel, mA.
    pub windows: Vec<[f64; 2]>,
    /// `lambda_db[i][j]`: crosstalk onto qubit `i` when channel `j` is driven.
    pub lambda_db: Vec<Vec<f64>>,
    /// On-channel Rabi rate per channel, MHz.
    pub nominal_rabi_mhz: Vec<f64>,
}

impl DmxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_out != 4 && self.n_out != 8 {
            return Err(Error::param(format!("DMX must have 4 or 8 outputs, got {}", self.n_out)));
        }
        let bits = self.n_out.trailing_zeros() as usize;
        if self.select_bits.len() != bits {
            return Err(Error::param(format!("{} outputs need {bits} selection bits", self.n_out)));
        }
        if self.windows.len() != self.n_out || self.nominal_rabi_mhz.len() != self.n_out {
            return Err(Error::param("one window and one Rabi rate per channel"));
        }
        if self.windows.iter().any(|w| !(w[0] <= w[1])) {
            return Err(Error::param("operating windows must be non-empty intervals"));
        }
        check_lambda(&self.lambda_matrix()?)
    }

    pub fn lambda_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.lambda_db.len();
        if n != self.n_out || self.lambda_db.iter().any(|r| r.len() != n) {
            return Err(Error::param("crosstalk matrix must be n_out × n_out"));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| self.lambda_db[i][j]))
    }

    pub fn selected_channel(&self) -> Result<usize> {
        route(&self.select_bits)
    }

    /// Rabi rates on all qubits while the selected channel is driven. A
    /// channel biased outside its window emits nothing.
    pub fn effective_rabi(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let j = self.selected_channel()?;
        let w = self.windows[j];
        if !(w[0] <= self.i_main && self.i_main <= w[1]) {
            return Ok(vec![0.0; self.n_out]);
        }
        Ok(effective_rabi(&self.lambda_matrix()?, &self.nominal_rabi_mhz, j))
    }
}

fn check_lambda(l: &DMatrix<f64>) -> Result<()> {
    for i in 0..l.nrows() {
        for j in 0..l.ncols() {
            let v = l[(i, j)];
            if i == j && v != 0.0 {
                return Err(Error::param("crosstalk diagonal must be 0 dB"));
            }
            if i != j && !(v <= 0.0) {
                return Err(Error::param(format!("crosstalk Λ[{i}][{j}] = {v} dB must be ≤ 0")));
            }
        }
    }
    Ok(())
}

/// Column `j` of the rate matrix: `Ω_ij = Ω_jj·10^(Λ_ij/20)`.
pub fn effective_rabi(lambda_db: &DMatrix<f64>, nominal: &[f64], j: usize) -> Vec<f64> {
    (0..lambda_db.nrows())
        .map(|i| nominal[j] * 10f64.powf(lambda_db[(i, j)] / 20.0))
        .collect()
}

/// Full rate matrix with `Ω[i][j]` the rate on qubit `i` when channel `j`
/// is driven.
pub fn rabi_matrix(lambda_db: &DMatrix<f64>, nominal: &[f64]) -> DMatrix<f64> {
    let n = lambda_db.nrows();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for (i, v) in effective_rabi(lambda_db, nominal, j).into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    m
}

/// `Λ_ij = 10·log10((Ω_ij/Ω_jj)²)`; zero rates give `−∞`.
pub fn crosstalk_matrix_from_rates(omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = omega.nrows();
    if omega.ncols() != n {
        return Err(Error::param("rate matrix must be square"));
    }
    for j in 0..n {
        if !(omega[(j, j)] > 0.0) {
            return Err(Error::param(format!("on-channel rate Ω[{j}][{j}] must be positive")));
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            10.0 * (omega[(i, j)] / omega[(j, j)]).powi(2).log10()
        }
    }))
}

/// dB value as written to files, with `−∞` clamped to [`DB_FLOOR`].
pub fn db_for_output(x: f64) -> f64 {
    x.max(DB_FLOOR)
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginReport {
    pub margin_pct: f64,
    /// Intersection of all windows, mA.
    pub common: Option<[f64; 2]>,
    /// Channel whose window edge sets the common window, when unique.
    pub limiting: Option<usize>,
    pub diagnostic: Option<String>,
}

/// Bias margin `100·(half-width)/(centre)` of the common operating window.
///
/// When both edges bind on different channels the limiting one is the
/// channel with the smaller own relative margin; a tie leaves it unset.
pub fn bias_margin(windows: &[[f64; 2]]) -> Result<MarginReport> {
    if windows.is_empty() {
        return Err(Error::param("no operating windows"));
    }
    if windows.iter().any(|w| !(w[0] <= w[1])) {
        return Err(Error::param("operating windows must be non-empty intervals"));
    }
    let lo = windows.iter().map(|w| w[0]).fold(f64::NEG_INFINITY, f64::max);
    let hi = windows.iter().map(|w| w[1]).fold(f64::INFINITY, f64::min);
    if lo > hi {
        return Ok(MarginReport {
            margin_pct: 0.0,
            common: None,
            limiting: None,
            diagnostic: Some(format!("windows do not overlap: largest i_min {lo} mA exceeds smallest i_max {hi} mA")),
        });
    }
    let margin_pct = 100.0 * (hi - lo) / 2.0 / ((hi + lo) / 2.0);
    let own = |w: &[f64; 2]| (w[1] - w[0]) / (w[1] + w[0]);
    let binding: Vec<usize> = (0..windows.len())
        .filter(|&k| windows[k][0] == lo || windows[k][1] == hi)
        .collect();
    let best = binding.iter().map(|&k| own(&windows[k])).fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = binding
        .iter()
        .copied()
        .filter(|&k| (own(&windows[k]) - best).abs() <= 1e-12)
        .collect();
    let limiting = (tied.len() == 1).then(|| tied[0]);
    Ok(MarginReport {
        margin_pct,
        common: Some([lo, hi]),
        limiting,
        diagnostic: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Sign::*;

    #[test]
    fn routing_table() {
        assert_eq!(route(&[Plus, Plus]).unwrap(), 0);
        assert_eq!(route(&[Plus, Minus]).unwrap(), 1);
        assert_eq!(route(&[Minus, Plus]).unwrap(), 2);
        assert_eq!(route(&[Minus, Minus]).unwrap(), 3);
        assert_eq!(route(&[Plus, Plus, Plus]).unwrap(), 0);
    }

    #[test]
    fn routing_is_a_bijection() {
        for bits in [2, 3] {
            let mut seen = vec![false; 1 << bits];
            for ch in 0..1 << bits {
                let s = route_inverse(ch, bits).unwrap();
                assert_eq!(route(&s).unwrap(), ch);
                seen[ch] = true;
            }
            assert!(seen.iter().all(|&x| x));
        }
    }

    #[test]
    fn minus_35_db_ratio() {
        let l = DMatrix::from_row_slice(2, 2, &[0.0, -35.0, -35.0, 0.0]);
        let r = effective_rabi(&l, &[5.0, 5.0], 0);
        assert!((r[1] / r[0] - 0.0178).abs() < 1e-4);
        assert_eq!(r[0], 5.0);
    }

    #[test]
    fn crosstalk_round_trip() {
        let l = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, -31.0, -36.5, -40.0, -33.0, 0.0, -29.0, -38.0, -35.0, -37.0, 0.0, -32.0, -41.0, -34.0, -30.0, 0.0],
        );
        let back = crosstalk_matrix_from_rates(&rabi_matrix(&l, &[5.4, 5.1, 3.3, 5.8])).unwrap();
        assert!((back - l).abs().max() < 1e-9);
    }

    #[test]
    fn crosstalk_special_cases() {
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        let l = crosstalk_matrix_from_rates(&diag).unwrap();
        assert_eq!(l[(0, 1)], f64::NEG_INFINITY);
        assert_eq!(db_for_output(l[(0, 1)]), DB_FLOOR);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0178, 1.0, 1.0]);
        let l = crosstalk_matrix_from_rates(&m).unwrap();
        assert!((l[(0, 1)] + 35.0).abs() < 0.01);
        assert_eq!(l[(1, 0)], 0.0);
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.1, 1.0]);
        assert!(crosstalk_matrix_from_rates(&bad).is_err());
    }

    #[test]
    fn margins() {
        let r = bias_margin(&[[0.9, 1.1]; 4]).unwrap();
        assert!((r.margin_pct - 10.0).abs() < 1e-12);
        assert_eq!(r.limiting, None);

        let r = bias_margin(&[[0.88, 1.12], [0.90, 1.14], [0.94, 1.18], [0.92, 1.16]]).unwrap();
        assert!((r.margin_pct - 100.0 * 0.09 / 1.03).abs() < 1e-9);
        assert_eq!(r.common, Some([0.94, 1.12]));
        assert_eq!(r.limiting, Some(2));

        let r = bias_margin(&[[0.9, 1.0], [1.1, 1.2]]).unwrap();
        assert_eq!(r.margin_pct, 0.0);
        assert!(r.diagnostic.is_some());
    }

    #[test]
    fn constructed_six_point_two_percent_margin() {
        // Channel 0 is the narrowest and sits inside the others.
        let (c, h) = (1.0, 0.062);
        let w = [[c - h, c + h], [0.90, 1.12], [0.91, 1.10], [0.92, 1.11]];
        let r = bias_margin(&w).unwrap();
        assert!((r.margin_pct - 6.2).abs() < 1e-9);
        assert_eq!(r.limiting, Some(0));
    }

    #[test]
    fn config_channel_outside_window_is_silent() {
        let cfg = DmxConfig {
            n_out: 4,
            select_bits: vec![Minus, Plus],
            i_main: 1.0,
            windows: vec![[0.9, 1.1], [0.9, 1.1], [1.05, 1.2], [0.9, 1.1]],
            lambda_db: vec![vec![0.0, -35.0, -35.0, -35.0]; 4]
                .into_iter()
                .enumerate()
                .map(|(i, mut r)| {
                    r.iter_mut().for_each(|x| *x = -35.0);
                    r[i] = 0.0;
                    r
                })
                .collect(),
            nominal_rabi_mhz: vec![5.0; 4],
        };
        assert_eq!(cfg.selected_channel().unwrap(), 2);
        assert!(cfg.effective_rabi().unwrap().iter().all(|&x| x == 0.0));
        let mut on = cfg.clone();
        on.i_main = 1.08;
        let r = on.effective_rabi().unwrap();
        assert_eq!(r[2], 5.0);
        assert!((r[0] / 5.0 - 10f64.powf(-35.0 / 20.0)).abs() < 1e-12);
    }
}
