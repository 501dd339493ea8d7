use std::f64::consts::PI;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sfq_core::bench::{
    self, CliffordTable, Composition, InterleavedGate, Primitive, RbConfig, RbResult, SfqEngine,
    DEFAULT_BOOTSTRAP, DEFAULT_LENGTHS, DEFAULT_RANDOMIZATIONS,
};
use sfq_core::dmx::{self, Sign, TdmEntry, TdmQubit, TdmSchedule};
use sfq_core::fits;
use sfq_core::metrics::coherence_limit;
use sfq_core::power::{self, ScenarioFile};
use sfq_core::qdevice::{DeviceRecord, TransmonModel};
use sfq_core::sfqdrive::{
    self, calibrate_np, cc_for_pulse_counts, ClockConfig, DecoherenceChannels, GateSpec, PulseShape,
};

use crate::config::{coherence_values, Coherence, Device, RunFile, BUNDLED_SCENARIOS};
use crate::failure::{Failure, Outcome};
use crate::output::{num, Artifact};

/// Subharmonic order of the drive clock.
const SUBHARMONIC: u32 = 2;

pub struct Ctx {
    pub file: RunFile,
    pub device_path: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Ctx {
    fn device(&self) -> Outcome<Device> {
        Device::load(self.device_path.as_deref())
    }

    fn require_seed(&self) -> Outcome<u64> {
        self.seed
            .ok_or_else(|| Failure::config("this command is stochastic and needs a seed (--seed or \"seed\")"))
    }
}

pub struct Report {
    pub artifacts: Vec<Artifact>,
    /// Resolved parameters, recorded in the manifest.
    pub params: Value,
    pub device: Option<String>,
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).unwrap_or(Value::Null)
}

/// Files each command writes, besides the manifest.
pub fn planned_outputs(command: &str) -> &'static [&'static str] {
    match command {
        "fig2b" => &["fig2b.csv"],
        "fig4d" => &["fig4d.csv", "fig4d.json"],
        "rb" => &["rb.csv", "rb.json"],
        "u3rb" => &["u3rb.csv", "u3rb.json"],
        "irb" => &["irb_reference.csv", "irb_interleaved.csv", "irb.json"],
        "prb" => &["prb.csv", "prb_purity.csv", "prb.json"],
        "orbit" => &["orbit.csv", "orbit.json"],
        "tdm" => &["tdm.csv", "tdm.json"],
        "xtalk" => &["xtalk.csv", "xtalk.json"],
        "qpfit" => &["qpfit.csv", "qpfit.json"],
        "limits" => &["limits.csv"],
        "budget" => &["budget.csv", "budget.json"],
        _ => &[],
    }
}

fn model_of(rec: &DeviceRecord) -> Outcome<TransmonModel> {
    Ok(rec.model()?)
}

fn drive_clock(model: &TransmonModel) -> ClockConfig {
    ClockConfig::subharmonic(model.f01, SUBHARMONIC)
}

fn calibrated(model: &TransmonModel, shape: PulseShape) -> Outcome<(GateSpec, DecoherenceChannels)> {
    let chans = DecoherenceChannels::from_model(model)?;
    let gate = calibrate_np(model, shape, drive_clock(model), chans)?;
    Ok((gate, chans))
}

// ---------------------------------------------------------------- limits

pub fn limits(ctx: &Ctx) -> Outcome<Report> {
    #[derive(Default, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct P {}
    let _: P = ctx.file.params()?;
    let dev = ctx.device()?;
    let mut rows = Vec::new();
    for q in &dev.file.qubit {
        let tau = q
            .gate_ns
            .ok_or_else(|| Failure::config(format!("qubit {} has no gate_ns", q.name)))?;
        let f = coherence_limit(tau, q.t1_us, q.t2_us);
        rows.push(vec![q.name.clone(), num(tau), num(q.t1_us), num(q.t2_us), num(100.0 * f)]);
    }
    Ok(Report {
        artifacts: vec![Artifact::csv("limits.csv", "qubit,gate_ns,t1_us,t2_us,f_lim_pct", rows)],
        params: json!({}),
        device: Some(dev.source),
    })
}

// ---------------------------------------------------------------- fig2b

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct Fig2bParams {
    qubit: Option<String>,
    /// Explicit pulse counts; otherwise `n_points` log-spaced counts.
    pulse_counts: Option<Vec<u32>>,
    np_min: u32,
    np_max: u32,
    n_points: usize,
    coherence_us: Vec<Coherence>,
    pulse: PulseShape,
}

impl Default for Fig2bParams {
    fn default() -> Self {
        Self {
            qubit: None,
            pulse_counts: None,
            np_min: 20,
            np_max: 400,
            n_points: 24,
            coherence_us: [20.0, 50.0, 80.0, 1000.0, f64::INFINITY].map(Coherence).to_vec(),
            pulse: PulseShape::Delta,
        }
    }
}

fn log_spaced_counts(lo: u32, hi: u32, n: usize) -> Outcome<Vec<u32>> {
    if lo < 1 || hi <= lo || n < 2 {
        return Err(Failure::config("need 1 ≤ np_min < np_max and at least 2 points"));
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut v: Vec<u32> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp().round() as u32)
        .collect();
    v.dedup();
    Ok(v)
}

fn coherence_label(t: f64) -> String {
    if t.is_infinite() {
        "inf".into()
    } else {
        num(t)
    }
}

pub fn fig2b(ctx: &Ctx) -> Outcome<Report> {
    let p: Fig2bParams = ctx.file.params()?;
    let counts = match &p.pulse_counts {
        Some(c) if !c.is_empty() && c.iter().all(|&n| n > 0) => {
            let mut c = c.clone();
            c.sort_unstable();
            c.dedup();
            c
        }
        Some(_) => return Err(Failure::config("pulse_counts must be positive")),
        None => log_spaced_counts(p.np_min, p.np_max, p.n_points)?,
    };
    if p.coherence_us.is_empty() {
        return Err(Failure::config("coherence_us is empty"));
    }
    let dev = ctx.device()?;
    let model = model_of(dev.qubit(p.qubit.as_deref())?)?;
    let cc = cc_for_pulse_counts(&model, &counts);
    let points = sfqdrive::sweep_capacitance(&model, p.pulse, drive_clock(&model), &cc, &coherence_values(&p.coherence_us))?;
    let rows = points.iter().map(|pt| {
        vec![num(pt.gate_time_ns), num(pt.error), num(pt.leakage), coherence_label(pt.t_coh_us)]
    });
    Ok(Report {
        artifacts: vec![Artifact::csv("fig2b.csv", "gate_time_ns,error,leakage,t_coh_us", rows)],
        params: to_value(&p),
        device: Some(dev.source),
    })
}

// ---------------------------------------------------------------- fig4d

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct Fig4dParams {
    qubit: Option<String>,
    /// Pulse counts scanned on each side of the calibrated count.
    span: u32,
    coherence_us: Vec<Coherence>,
    pulse: PulseShape,
}

impl Default for Fig4dParams {
    fn default() -> Self {
        Self {
            qubit: None,
            span: 10,
            coherence_us: [20.0, 50.0, 100.0, 1000.0].map(Coherence).to_vec(),
            pulse: PulseShape::Delta,
        }
    }
}

pub fn fig4d(ctx: &Ctx) -> Outcome<Report> {
    let p: Fig4dParams = ctx.file.params()?;
    if p.coherence_us.is_empty() {
        return Err(Failure::config("coherence_us is empty"));
    }
    let dev = ctx.device()?;
    let model = model_of(dev.qubit(p.qubit.as_deref())?)?;
    let (gate, _) = calibrated(&model, p.pulse)?;
    let lo = gate.n_p.saturating_sub(p.span).max(1);
    let points = sfqdrive::sweep_pulse_number(&model, p.pulse, &gate, lo..=gate.n_p + p.span, &coherence_values(&p.coherence_us))?;
    let rows = points
        .iter()
        .map(|pt| vec![pt.np.to_string(), num(pt.error), coherence_label(pt.t_coh_us)]);
    Ok(Report {
        artifacts: vec![
            Artifact::csv("fig4d.csv", "np,error,t_coh_us", rows),
            Artifact::json("fig4d.json", &json!({ "calibrated_np": gate.n_p }))?,
        ],
        params: to_value(&p),
        device: Some(dev.source),
    })
}

// ---------------------------------------------------------------- benchmarking

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct BenchParams {
    qubit: Option<String>,
    lengths: Vec<usize>,
    k: usize,
    bootstrap: usize,
    shots: Option<u64>,
    composition: Composition,
    pulse: PulseShape,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            qubit: None,
            lengths: DEFAULT_LENGTHS.to_vec(),
            k: DEFAULT_RANDOMIZATIONS,
            bootstrap: DEFAULT_BOOTSTRAP,
            shots: None,
            composition: Composition::Minimal,
            pulse: PulseShape::Delta,
        }
    }
}

impl BenchParams {
    fn rb_config(&self, seed: u64) -> RbConfig {
        let mut c = RbConfig::new(seed)
            .with_lengths(self.lengths.clone())
            .with_k(self.k)
            .with_composition(self.composition)
            .with_shots(self.shots);
        c.bootstrap = self.bootstrap;
        c
    }
}

struct BenchSetup {
    engine: SfqEngine,
    gate: GateSpec,
    model: TransmonModel,
    chans: DecoherenceChannels,
    source: String,
}

fn bench_setup(ctx: &Ctx, p: &BenchParams) -> Outcome<BenchSetup> {
    let dev = ctx.device()?;
    let model = model_of(dev.qubit(p.qubit.as_deref())?)?;
    let (gate, chans) = calibrated(&model, p.pulse)?;
    let engine = SfqEngine::new(&model, p.pulse, &gate, chans)?;
    Ok(BenchSetup {
        engine,
        gate,
        model,
        chans,
        source: dev.source,
    })
}

fn decay_csv(name: &str, r: &RbResult) -> Artifact {
    let rows = (0..r.lengths.len()).map(|i| vec![r.lengths[i].to_string(), num(r.mean_p0[i]), num(r.stderr[i])]);
    Artifact::csv(name, "m,mean_p0,stderr", rows)
}

fn bench_params(ctx: &Ctx) -> Outcome<(BenchParams, u64)> {
    let p: BenchParams = ctx.file.params()?;
    let seed = ctx.require_seed()?;
    if p.lengths.is_empty() || p.k == 0 {
        return Err(Failure::config("lengths and k must be non-empty/positive"));
    }
    Ok((p, seed))
}

pub fn rb(ctx: &Ctx) -> Outcome<Report> {
    let (p, seed) = bench_params(ctx)?;
    let s = bench_setup(ctx, &p)?;
    let r = bench::run_rb(&s.engine, &p.rb_config(seed))?;
    Ok(Report {
        artifacts: vec![
            decay_csv("rb.csv", &r),
            Artifact::json("rb.json", &json!({ "n_p": s.gate.n_p, "result": r }))?,
        ],
        params: to_value(&p),
        device: Some(s.source),
    })
}

pub fn u3rb(ctx: &Ctx) -> Outcome<Report> {
    let (mut p, seed) = bench_params(ctx)?;
    p.composition = Composition::U3;
    let s = bench_setup(ctx, &p)?;
    let r = bench::run_u3rb(&s.engine, &p.rb_config(seed))?;
    Ok(Report {
        artifacts: vec![
            decay_csv("u3rb.csv", &r),
            Artifact::json("u3rb.json", &json!({ "n_p": s.gate.n_p, "result": r }))?,
        ],
        params: to_value(&p),
        device: Some(s.source),
    })
}

pub fn irb(ctx: &Ctx) -> Outcome<Report> {
    let (p, seed) = bench_params(ctx)?;
    let s = bench_setup(ctx, &p)?;
    let table = CliffordTable::new();
    let idx = table
        .index_of(&Primitive::X90.unitary())
        .ok_or_else(|| Failure::Numerical("X/2 is missing from the Clifford table".into()))?;
    let target = InterleavedGate {
        clifford: idx,
        map: s.engine.x90().clone(),
    };
    let r = bench::run_irb(&s.engine, &target, &p.rb_config(seed))?;
    Ok(Report {
        artifacts: vec![
            decay_csv("irb_reference.csv", &r.reference),
            decay_csv("irb_interleaved.csv", &r.interleaved),
            Artifact::json("irb.json", &json!({ "n_p": s.gate.n_p, "interleaved_gate": "X/2", "result": r }))?,
        ],
        params: to_value(&p),
        device: Some(s.source),
    })
}

pub fn prb(ctx: &Ctx) -> Outcome<Report> {
    let (p, seed) = bench_params(ctx)?;
    let s = bench_setup(ctx, &p)?;
    let r = bench::run_prb(&s.engine, &p.rb_config(seed))?;
    let pur = (0..r.rb.lengths.len())
        .map(|i| vec![r.rb.lengths[i].to_string(), num(r.mean_purity[i]), num(r.purity_stderr[i])]);
    Ok(Report {
        artifacts: vec![
            decay_csv("prb.csv", &r.rb),
            Artifact::csv("prb_purity.csv", "m,mean_purity,stderr", pur),
            Artifact::json("prb.json", &json!({ "n_p": s.gate.n_p, "result": r }))?,
        ],
        params: to_value(&p),
        device: Some(s.source),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum OrbitParameter {
    #[serde(rename = "n_p")]
    PulseCount,
    #[serde(rename = "detuning_mhz")]
    Detuning,
    #[serde(rename = "clock_phase")]
    ClockPhase,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct OrbitParams {
    qubit: Option<String>,
    lengths: Vec<usize>,
    k: usize,
    bootstrap: usize,
    shots: Option<u64>,
    composition: Composition,
    pulse: PulseShape,
    parameter: OrbitParameter,
    values: Option<Vec<f64>>,
    /// Fixed sequence length; derived from a reference RB run when absent.
    n_fixed: Option<usize>,
}

impl Default for OrbitParams {
    fn default() -> Self {
        let b = BenchParams::default();
        Self {
            qubit: b.qubit,
            lengths: b.lengths,
            k: b.k,
            bootstrap: b.bootstrap,
            shots: b.shots,
            composition: b.composition,
            pulse: b.pulse,
            parameter: OrbitParameter::PulseCount,
            values: None,
            n_fixed: None,
        }
    }
}

pub fn orbit(ctx: &Ctx) -> Outcome<Report> {
    let mut p: OrbitParams = ctx.file.params()?;
    let seed = ctx.require_seed()?;
    let bp = BenchParams {
        qubit: p.qubit.clone(),
        lengths: p.lengths.clone(),
        k: p.k,
        bootstrap: p.bootstrap,
        shots: p.shots,
        composition: p.composition,
        pulse: p.pulse,
    };
    let s = bench_setup(ctx, &bp)?;
    let cfg = bp.rb_config(seed);
    let values = p.values.clone().unwrap_or_else(|| match p.parameter {
        OrbitParameter::PulseCount => (-6..=6).map(|d| (s.gate.n_p as i64 + d) as f64).collect(),
        OrbitParameter::Detuning => (-6..=6).map(|d| d as f64 * 0.5).collect(),
        OrbitParameter::ClockPhase => (0..12).map(|k| k as f64 * PI / 6.0).collect(),
    });
    if p.parameter == OrbitParameter::PulseCount && values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
        return Err(Failure::config("n_p values must be positive integers"));
    }
    let n_fixed = match p.n_fixed {
        Some(n) => n,
        None => bench::orbit_length(bench::run_rb(&s.engine, &cfg)?.fit.n_tilde),
    };
    p.n_fixed = Some(n_fixed);
    p.values = Some(values.clone());
    let (model, shape, gate, chans) = (&s.model, p.pulse, s.gate, s.chans);
    let param = p.parameter;
    let r = bench::orbit_sweep(
        &values,
        |v| {
            let g = match param {
                OrbitParameter::PulseCount => GateSpec { n_p: v as u32, ..gate },
                OrbitParameter::Detuning => GateSpec { clock: gate.clock.with_detuning(v), ..gate },
                OrbitParameter::ClockPhase => GateSpec { clock: gate.clock.with_phase(v), ..gate },
            };
            SfqEngine::new(model, shape, &g, chans)
        },
        n_fixed,
        &cfg,
    )?;
    let rows = (0..r.values.len()).map(|i| vec![num(r.values[i]), num(r.mean_p0[i])]);
    Ok(Report {
        artifacts: vec![
            Artifact::csv("orbit.csv", "param_value,mean_p0", rows),
            Artifact::json("orbit.json", &json!({ "parameter": param, "result": r }))?,
        ],
        params: to_value(&p),
        device: Some(s.source),
    })
}

// ---------------------------------------------------------------- tdm

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TdmParams {
    /// Device qubits on the DMX outputs, in channel order.
    qubits: Vec<String>,
    /// Explicit schedule; qubit indices refer to `qubits`.
    schedule: Option<Vec<TdmEntry>>,
    readout_ns: Option<f64>,
    guard_ns: f64,
    /// Serial Rabi sweep, used when no schedule is given; defaults to 41
    /// counts reaching twice the longest calibrated π/2 gate.
    pulse_counts: Option<Vec<u32>>,
    order: Option<Vec<usize>>,
    /// Crosstalk matrix in dB; `null` disables crosstalk.
    lambda_db: Option<Vec<Vec<f64>>>,
    pulse: PulseShape,
}

impl Default for TdmParams {
    fn default() -> Self {
        let n = 4;
        Self {
            qubits: ["q1", "q2", "q3", "q4"].map(String::from).to_vec(),
            schedule: None,
            readout_ns: None,
            guard_ns: 0.0,
            pulse_counts: None,
            order: None,
            lambda_db: Some(
                (0..n)
                    .map(|i| (0..n).map(|j| if i == j { 0.0 } else { -35.0 }).collect())
                    .collect(),
            ),
            pulse: PulseShape::Delta,
        }
    }
}

fn square_matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Outcome<sfq_core::linalg::RMat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Failure::config(format!("{what} must be {n} × {n}")));
    }
    Ok(sfq_core::linalg::RMat::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn tdm(ctx: &Ctx) -> Outcome<Report> {
    let p: TdmParams = ctx.file.params()?;
    let dev = ctx.device()?;
    let n = p.qubits.len();
    if n == 0 {
        return Err(Failure::config("tdm needs at least one qubit"));
    }
    let mut qubits = Vec::with_capacity(n);
    let mut clocks = Vec::with_capacity(n);
    for name in &p.qubits {
        let m = model_of(dev.qubit(Some(name))?)?;
        let (gate, chans) = calibrated(&m, p.pulse)?;
        clocks.push(gate);
        qubits.push(TdmQubit { model: m, chans });
    }
    let lambda = match &p.lambda_db {
        Some(rows) => {
            let l = square_matrix(rows, n, "lambda_db")?;
            for i in 0..n {
                for j in 0..n {
                    if (i == j && l[(i, j)] != 0.0) || l[(i, j)] > 0.0 {
                        return Err(Failure::config("lambda_db needs a zero diagonal and entries ≤ 0"));
                    }
                }
            }
            Some(l)
        }
        None => None,
    };
    let names = p.qubits.join(",");
    let (csv, summary) = if let Some(entries) = &p.schedule {
        let readout = p
            .readout_ns
            .unwrap_or_else(|| entries.iter().map(TdmEntry::end_ns).fold(0.0, f64::max));
        let sched = TdmSchedule {
            entries: entries.clone(),
            readout_ns: readout,
            guard_ns: p.guard_ns,
        };
        let out = dmx::simulate_tdm(&sched, &qubits, lambda.as_ref(), p.pulse)?;
        let d = qubits[0].model.n_levels();
        let header = format!("qubit,{}", (0..d).map(|j| format!("p{j}")).collect::<Vec<_>>().join(","));
        let rows = (0..n).map(|q| {
            let mut r = vec![p.qubits[q].clone()];
            r.extend(out.populations(q).into_iter().map(num));
            r
        });
        (Artifact::csv("tdm.csv", &header, rows), json!({ "mode": "schedule", "readout_ns": readout, "p1": out.p1() }))
    } else {
        let order = p.order.clone().unwrap_or_else(|| (0..n).collect());
        let counts = p.pulse_counts.clone().unwrap_or_else(|| {
            let top = 2 * clocks.iter().map(|g| g.n_p).max().unwrap_or(1);
            (0..=40).map(|k| (k * top).div_ceil(40)).collect()
        });
        let pts = dmx::tdm_rabi_sweep(&qubits, lambda.as_ref(), p.pulse, &clocks, &counts, &order)?;
        let header = format!(
            "n_pulses,{}",
            p.qubits.iter().map(|q| format!("p1_{q}")).collect::<Vec<_>>().join(",")
        );
        let rows = pts.iter().map(|pt| {
            let mut r = vec![pt.n_pulses.to_string()];
            r.extend(pt.p1.iter().map(|&x| num(x)));
            r
        });
        let contrast: Vec<f64> = (0..n).map(|q| dmx::rabi_contrast(&pts, q)).collect();
        (
            Artifact::csv("tdm.csv", &header, rows),
            json!({ "mode": "serial_rabi", "qubits": names, "order": order, "pulse_counts": counts, "contrast": contrast }),
        )
    };
    Ok(Report {
        artifacts: vec![csv, Artifact::json("tdm.json", &summary)?],
        params: to_value(&p),
        device: Some(dev.source),
    })
}

// ---------------------------------------------------------------- xtalk

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct XtalkParams {
    /// Measured rate matrix, `rates_mhz[i][j]` on qubit `i` with channel `j` driven.
    rates_mhz: Option<Vec<Vec<f64>>>,
    /// Alternatively a crosstalk matrix with the on-channel rates.
    lambda_db: Option<Vec<Vec<f64>>>,
    nominal_rabi_mhz: Option<Vec<f64>>,
    /// Per-channel operating windows for the bias margin, mA.
    windows: Option<Vec<[f64; 2]>>,
    select_bits: Option<Vec<Sign>>,
}

pub fn xtalk(ctx: &Ctx) -> Outcome<Report> {
    let p: XtalkParams = ctx.file.params()?;
    let (lambda, rates) = match (&p.rates_mhz, &p.lambda_db, &p.nominal_rabi_mhz) {
        (Some(r), None, None) => {
            let omega = square_matrix(r, r.len(), "rates_mhz")?;
            (dmx::crosstalk_matrix_from_rates(&omega)?, omega)
        }
        (None, Some(l), Some(nom)) => {
            let lam = square_matrix(l, nom.len(), "lambda_db")?;
            let rates = dmx::rabi_matrix(&lam, nom);
            (lam, rates)
        }
        _ => {
            return Err(Failure::config(
                "xtalk needs either rates_mhz, or lambda_db together with nominal_rabi_mhz",
            ))
        }
    };
    let n = lambda.nrows();
    let rows = (0..n).map(|i| (0..n).map(|j| num(dmx::db_for_output(lambda[(i, j)]))).collect());
    let header = (0..n).map(|j| format!("ch{j}")).collect::<Vec<_>>().join(",");
    let finite: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j)
        .map(|(i, j)| dmx::db_for_output(lambda[(i, j)]))
        .collect();
    let mean_db = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
    let margin = match &p.windows {
        Some(w) => Some(dmx::bias_margin(w)?),
        None => None,
    };
    let routed = match &p.select_bits {
        Some(bits) => Some(dmx::route(bits)?),
        None => None,
    };
    let rates_rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| rates[(i, j)]).collect()).collect();
    let summary = json!({
        "mean_off_diagonal_db": mean_db,
        "rates_mhz": rates_rows,
        "bias_margin": margin,
        "selected_channel": routed,
    });
    Ok(Report {
        artifacts: vec![Artifact::csv("xtalk.csv", &header, rows), Artifact::json("xtalk.json", &summary)?],
        params: to_value(&p),
        device: None,
    })
}

// ---------------------------------------------------------------- qpfit

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct QpParams {
    /// Two-column CSV of time (µs) and excited population; synthetic data
    /// from the parameters below when absent.
    data: Option<PathBuf>,
    n_qp: f64,
    t_qp_us: f64,
    t_r_us: f64,
    noise: f64,
    n_points: usize,
    t_max_us: f64,
}

impl Default for QpParams {
    fn default() -> Self {
        Self {
            data: None,
            n_qp: 1.5,
            t_qp_us: 20.0,
            t_r_us: 60.0,
            noise: 0.0,
            n_points: 200,
            t_max_us: 200.0,
        }
    }
}

fn read_two_columns(path: &PathBuf) -> Outcome<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (cols.len() == 2)
            .then(|| Some((cols[0].parse::<f64>().ok()?, cols[1].parse::<f64>().ok()?)))
            .flatten();
        match parsed {
            Some((x, y)) => {
                xs.push(x);
                ys.push(y);
            }
            None if k == 0 => continue,
            None => return Err(Failure::config(format!("{}:{}: expected two numbers", path.display(), k + 1))),
        }
    }
    Ok((xs, ys))
}

pub fn qpfit(ctx: &Ctx) -> Outcome<Report> {
    let p: QpParams = ctx.file.params()?;
    let (times, pops) = match &p.data {
        Some(path) => read_two_columns(path)?,
        None => {
            if p.n_points < 8 || !(p.t_max_us > 0.0) || !(p.noise >= 0.0) {
                return Err(Failure::config("synthetic data needs n_points ≥ 8, t_max_us > 0, noise ≥ 0"));
            }
            let times: Vec<f64> = (0..p.n_points)
                .map(|i| p.t_max_us * i as f64 / (p.n_points - 1) as f64)
                .collect();
            let mut pops: Vec<f64> = times.iter().map(|&t| fits::qp_model(t, p.n_qp, p.t_qp_us, p.t_r_us)).collect();
            if p.noise > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(ctx.require_seed()?);
                let normal = Normal::new(0.0, p.noise).map_err(|e| Failure::config(e.to_string()))?;
                for y in &mut pops {
                    *y += normal.sample(&mut rng);
                }
            }
            (times, pops)
        }
    };
    let fit = fits::fit_qp(&times, &pops)?;
    let rows = times.iter().zip(&pops).map(|(&t, &y)| {
        vec![
            num(t),
            num(y),
            num(fits::qp_model(t, fit.n_qp, fit.t_qp, fit.t_r)),
            num(fits::single_exp_model(t, fit.t_single)),
        ]
    });
    let model = if fit.valid { "double" } else { "single" };
    Ok(Report {
        artifacts: vec![
            Artifact::csv("qpfit.csv", "t_us,population,double,single", rows),
            Artifact::json("qpfit.json", &json!({ "selected_model": model, "fit": fit }))?,
        ],
        params: to_value(&p),
        device: None,
    })
}

// ---------------------------------------------------------------- budget

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct BudgetParams {
    /// Scenario TOML; the bundled comparison table when absent.
    scenarios: Option<PathBuf>,
}

pub fn budget(ctx: &Ctx) -> Outcome<Report> {
    let p: BudgetParams = ctx.file.params()?;
    let (text, source) = match &p.scenarios {
        Some(path) => (
            std::fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?,
            path.display().to_string(),
        ),
        None => (BUNDLED_SCENARIOS.to_string(), "bundled:table1_scenarios.toml".to_string()),
    };
    let file = ScenarioFile::parse(&text)?;
    let budgets = file
        .scenario
        .iter()
        .map(power::heat_budget)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Report {
        artifacts: vec![
            Artifact::new("budget.csv", power::budget_table_csv(&budgets)),
            Artifact::json("budget.json", &budgets)?,
        ],
        params: json!({ "scenarios": source }),
        device: None,
    })
}
