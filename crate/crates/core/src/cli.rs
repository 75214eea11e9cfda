//! Batch front end: one JSON run configuration in, files out.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::Parser;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};

use crate::analytic::{
    coherent_overlap, evolve_coherent, evolve_vacuum, flux_pi_pulse, specialized_pair_overlap,
    squeeze_magnitude, squeezed_evolution, BranchDecomposition, Label,
};
use crate::error::Error;
use crate::experiments::{
    default_time_grid, feasibility_report, fmt_f64, linear_grid, log_grid, rabi_sweep,
    verify_analytic_numeric, write_sweep_csv, VerifyScenario, SWEEP_KINDS, SWEEP_RATIOS,
};
use crate::hilbert::{wigner, CavityState, Qubit};
use crate::measurement::{measure_qubit, parity_spectrum, MeasurementRecord};
use crate::model::{coupling_xi, CavityKind, DeviceParams};

/// Infidelity above which `verify` reports a contract failure.
pub const VERIFY_CONTRACT: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "cavity-cat",
    version,
    about = "Cat and squeezed states of a cavity coupled to a SQUID charge qubit"
)]
pub struct Args {
    /// JSON run configuration (lines starting with // are ignored).
    #[arg(long, value_name = "PATH", required_unless_present = "print_example")]
    pub config: Option<PathBuf>,
    /// Print a commented configuration template and exit.
    #[arg(long, value_name = "SCENARIO", conflicts_with = "config")]
    pub print_example: Option<Scenario>,
    /// Output directory, overriding the configuration.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Reserved; every scenario is deterministic.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Cat,
    Inject,
    Squeeze,
    Sweep,
    Verify,
    Feasibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: OutputFormat,
}

fn default_format() -> OutputFormat {
    OutputFormat::Json
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerGrid {
    /// Half-width of the square grid in Re β and Im β.
    pub extent: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    /// Last time, s. Defaults to two cavity periods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<DeviceParams>,
    /// Evolution time before readout (cat) or injection time (inject), s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_prime: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<[f64; 2]>,
    /// Squeezing time, s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wigner: Option<WignerGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<LambdaGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinds: Option<Vec<CavityKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<Vec<VerifyScenario>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_grid: Option<TimeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_m: Option<f64>,
    pub output: OutputSpec,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical contract failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. }
            | Error::Precondition(_)
            | Error::InvalidDimension(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------------------
// Configuration loading

fn allowed_keys(s: Scenario) -> &'static [&'static str] {
    match s {
        Scenario::Cat => &["device", "tau", "wigner"],
        Scenario::Inject => &["device", "tau", "alpha_prime"],
        Scenario::Squeeze => &["device", "gamma", "t"],
        Scenario::Sweep => &["lambda_grid", "ratios", "kinds"],
        Scenario::Verify => &["device", "scenarios", "tau_grid", "fock_dim", "alpha_prime"],
        Scenario::Feasibility => &["device", "t1", "t2", "tau_m"],
    }
}

fn required_keys(s: Scenario) -> &'static [&'static str] {
    match s {
        Scenario::Cat => &["device", "tau"],
        Scenario::Inject => &["device", "tau", "alpha_prime"],
        Scenario::Squeeze => &["device", "gamma", "t"],
        Scenario::Sweep => &[],
        Scenario::Verify => &["device"],
        Scenario::Feasibility => &["device", "t1", "t2", "tau_m"],
    }
}

/// Drops lines whose first non-blank characters are `//`.
pub fn strip_comments(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("//"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn load_config(text: &str) -> CliResult<RunConfig> {
    let value: Value = serde_json::from_str(&strip_comments(text))
        .map_err(|e| CliError::Config(format!("not valid JSON: {e}")))?;
    let config: RunConfig =
        serde_json::from_value(value.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    let object = value
        .as_object()
        .expect("struct deserialized from an object");
    let allowed = allowed_keys(config.scenario);
    for key in object.keys() {
        if key != "scenario" && key != "output" && !allowed.contains(&key.as_str()) {
            return Err(CliError::Config(format!(
                "key `{key}` does not apply to scenario {:?}",
                config.scenario
            )));
        }
    }
    for key in required_keys(config.scenario) {
        if !object.contains_key(*key) {
            return Err(CliError::Config(format!(
                "scenario {:?} requires key `{key}`",
                config.scenario
            )));
        }
    }
    if let Some(device) = &config.device {
        for w in device.validate()? {
            log::warn!("{w}");
        }
    }
    Ok(config)
}

// ---------------------------------------------------------------------------
// Output

/// Pretty JSON with every float written to 17 significant digits.
pub struct PreciseFormatter<'a>(PrettyFormatter<'a>);

impl Default for PreciseFormatter<'_> {
    fn default() -> Self {
        PreciseFormatter(PrettyFormatter::new())
    }
}

impl Formatter for PreciseFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter::default());
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.root.join(name);
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult<()> {
        self.write(name, &to_json_string(value))
    }
}

// ---------------------------------------------------------------------------
// Scenarios

fn device(config: &RunConfig) -> CliResult<&DeviceParams> {
    config
        .device
        .as_ref()
        .ok_or_else(|| CliError::Config("key `device` is required".into()))
}

fn complex(pair: [f64; 2]) -> C64 {
    C64::new(pair[0], pair[1])
}

fn positive(name: &str, value: Option<f64>) -> CliResult<f64> {
    match value {
        Some(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Some(v) => Err(CliError::Config(format!(
            "key `{name}` must be a non-negative time, got {v}"
        ))),
        None => Err(CliError::Config(format!("key `{name}` is required"))),
    }
}

/// Measures both outcomes; impossible outcomes are listed instead of failing.
fn measure_both(
    out: &mut OutputDir,
    state: &BranchDecomposition,
    prefix: &str,
) -> CliResult<(Vec<MeasurementRecord>, Vec<String>)> {
    let mut records = Vec::new();
    let mut null = Vec::new();
    for q in [Qubit::G, Qubit::E] {
        match measure_qubit(state, q) {
            Ok(rec) => {
                out.json(&format!("{prefix}measurement_{q}.json"), &rec)?;
                records.push(rec);
            }
            Err(Error::NullOutcome { .. }) => null.push(q.to_string()),
            Err(e) => return Err(e.into()),
        }
    }
    let total: f64 = records.iter().map(|r| r.probability).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(CliError::Numerical(format!(
            "outcome probabilities sum to {total}"
        )));
    }
    Ok((records, null))
}

fn wigner_table(state: &CavityState, grid: &WignerGrid, format: OutputFormat) -> CliResult<String> {
    if grid.points < 2 || grid.extent.is_nan() || grid.extent <= 0.0 {
        return Err(CliError::Config(
            "`wigner` needs extent > 0 and at least 2 points".into(),
        ));
    }
    let axis = linear_grid(2.0 * grid.extent, grid.points)
        .into_iter()
        .map(|x| x - grid.extent)
        .collect::<Vec<_>>();
    let points: Vec<C64> = axis
        .iter()
        .flat_map(|&re| axis.iter().map(move |&im| C64::new(re, im)))
        .collect();
    let w = wigner(state, &points);
    Ok(match format {
        OutputFormat::Csv => {
            let mut s = String::from("re_beta,im_beta,w\n");
            for (b, v) in points.iter().zip(&w) {
                s.push_str(&format!(
                    "{},{},{}\n",
                    fmt_f64(b.re),
                    fmt_f64(b.im),
                    fmt_f64(*v)
                ));
            }
            s
        }
        OutputFormat::Json => to_json_string(&json!({
            "re_beta": axis,
            "im_beta": axis,
            "w": w.chunks(grid.points).collect::<Vec<_>>(),
        })),
    })
}

fn table_ext(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    }
}

fn run_cat(config: &RunConfig, out: &mut OutputDir) -> CliResult<Value> {
    let p = device(config)?;
    let c = coupling_xi(p)?;
    let tau = positive("tau", config.tau)?;
    let state = evolve_vacuum(p, &c, tau)?;
    out.json("branches.json", &state)?;
    let (records, nulls) = measure_both(out, &state, "")?;
    let grid = config.wigner.clone().unwrap_or(WignerGrid {
        extent: 3.0,
        points: 61,
    });
    let mut parity = BTreeMap::new();
    for rec in &records {
        let name = format!("wigner_{}.{}", rec.outcome, table_ext(config.output.format));
        out.write(
            &name,
            &wigner_table(&rec.post_state, &grid, config.output.format)?,
        )?;
        let (even, odd) = parity_spectrum(&rec.post_state);
        parity.insert(rec.outcome.to_string(), json!({"even": even, "odd": odd}));
    }
    Ok(json!({
        "probabilities": records.iter().map(|r| (r.outcome.to_string(), r.probability)).collect::<BTreeMap<_, _>>(),
        "null_outcomes": nulls,
        "parity": parity,
        "records": state.records,
    }))
}

fn run_inject(config: &RunConfig, out: &mut OutputDir) -> CliResult<Value> {
    let p = device(config)?;
    let c = coupling_xi(p)?;
    let tau = positive("tau", config.tau)?;
    let alpha_prime = complex(config.alpha_prime.expect("checked on load"));
    let injected = evolve_coherent(p, &c, alpha_prime, tau)?;
    out.json("injection.json", &injected)?;
    let pulsed = flux_pi_pulse(&injected, p)?;
    out.json("pulse.json", &pulsed)?;
    let (records, nulls) = measure_both(out, &pulsed, "")?;

    let labels: Vec<_> = injected
        .branches
        .iter()
        .filter_map(|b| match b.label {
            Label::Coherent(l) => Some(l),
            _ => None,
        })
        .collect();
    let (plus, minus) = (labels[0], labels[1]);
    let overlap = coherent_overlap(
        &crate::analytic::CoherentLabel::new(plus.alpha),
        &crate::analytic::CoherentLabel::new(minus.alpha),
    );
    let mut summary = json!({
        "phi": injected.records["phi"],
        "alpha_plus": [plus.alpha.re, plus.alpha.im],
        "alpha_minus": [minus.alpha.re, minus.alpha.im],
        "overlap_plus_minus": [overlap.re, overlap.im],
        "pulse_duration_s": pulsed.records["pulse_duration_s"],
        "cavity_free_rotation": pulsed.records["cavity_free_rotation"],
        "probabilities": records.iter().map(|r| (r.outcome.to_string(), r.probability)).collect::<BTreeMap<_, _>>(),
        "null_outcomes": nulls,
    });
    let kappa = crate::analytic::kappa(p, &c);
    if kappa.im == 0.0 && alpha_prime.im == 0.0 {
        let s = specialized_pair_overlap(kappa.re, alpha_prime.re, p.omega() * tau);
        summary["overlap_real_specialization"] = json!([s.re, s.im]);
    }
    Ok(summary)
}

fn run_squeeze(config: &RunConfig, out: &mut OutputDir) -> CliResult<Value> {
    let p = device(config)?;
    let c = coupling_xi(p)?;
    let t = positive("t", config.t)?;
    let gamma = complex(config.gamma.expect("checked on load"));
    let state = squeezed_evolution(p, &c, gamma, t)?;
    out.json("squeezed.json", &state)?;
    let (records, nulls) = measure_both(out, &state, "")?;
    let r = squeeze_magnitude(p, &c, t);
    let mut label_variances = Vec::new();
    for b in state.branches.iter().take(2) {
        let n = b
            .label
            .required_dim(crate::analytic::LABEL_TAIL_TOLERANCE)?;
        label_variances.push(b.label.materialize(n)?.min_quadrature_variance());
    }
    Ok(json!({
        "squeeze_magnitude": r,
        "ideal_min_variance": 0.5 * (-2.0 * r).exp(),
        "label_min_variance": {"plus": label_variances[0], "minus": label_variances[1]},
        "post_selected_min_variance": records
            .iter()
            .map(|rec| (rec.outcome.to_string(), rec.post_state.min_quadrature_variance()))
            .collect::<BTreeMap<_, _>>(),
        "probabilities": records.iter().map(|r| (r.outcome.to_string(), r.probability)).collect::<BTreeMap<_, _>>(),
        "null_outcomes": nulls,
    }))
}

fn run_sweep(config: &RunConfig, out: &mut OutputDir) -> CliResult<Value> {
    let lambdas = match &config.lambda_grid {
        Some(g) => log_grid(g.start, g.stop, g.points)?,
        None => crate::experiments::default_lambda_grid(),
    };
    let ratios = config
        .ratios
        .clone()
        .unwrap_or_else(|| SWEEP_RATIOS.to_vec());
    let kinds = config.kinds.clone().unwrap_or_else(|| SWEEP_KINDS.to_vec());
    let rows = rabi_sweep(&lambdas, &ratios, &kinds)?;
    match config.output.format {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_sweep_csv(&rows, &mut buf)?;
            out.write("sweep.csv", &String::from_utf8(buf).expect("ASCII table"))?;
        }
        OutputFormat::Json => out.json("sweep.json", &rows)?,
    }
    Ok(json!({
        "rows": rows.len(),
        "volume_model": "V = L^3",
        "device_choices": "omega = 2 pi c / lambda, E_ch = hbar omega / 4, E_J = E_ch / ratio, S = 100 um^2, z0 = L/2",
    }))
}

fn run_verify(config: &RunConfig, out: &mut OutputDir) -> CliResult<Value> {
    let p = device(config)?;
    let grid = match &config.tau_grid {
        Some(g) => {
            let stop = g.stop.unwrap_or(4.0 * PI / p.omega());
            linear_grid(stop, g.points)
        }
        None => default_time_grid(p),
    };
    let amplitude = config
        .alpha_prime
        .map(complex)
        .unwrap_or(C64::new(2.0, 0.0));
    let scenarios = config
        .scenarios
        .clone()
        .unwrap_or_else(|| VerifyScenario::ALL.to_vec());
    let mut reports = Vec::new();
    for s in scenarios {
        reports.push(verify_analytic_numeric(
            p,
            s,
            &grid,
            amplitude,
            config.fock_dim,
        )?);
    }
    out.json("verify.json", &reports)?;
    let worst = reports.iter().map(|r| r.max_infidelity).fold(0.0, f64::max);
    if worst > VERIFY_CONTRACT {
        return Err(CliError::Numerical(format!(
            "max infidelity {worst:e} exceeds {VERIFY_CONTRACT:e}"
        )));
    }
    Ok(json!({ "max_infidelity": worst }))
}

fn run_feasibility(config: &RunConfig, out: &mut OutputDir) -> CliResult<Value> {
    let p = device(config)?;
    let get = |name: &str, v: Option<f64>| {
        v.ok_or_else(|| CliError::Config(format!("key `{name}` is required")))
    };
    let report = feasibility_report(
        p,
        get("t1", config.t1)?,
        get("t2", config.t2)?,
        get("tau_m", config.tau_m)?,
    )?;
    out.json("feasibility.json", &report)?;
    Ok(serde_json::to_value(&report).expect("plain struct"))
}

/// Runs one configuration. Files go to `out_override` if given, otherwise
/// to the configured output directory; a `summary.json` lists them.
pub fn run(config: &RunConfig, out_override: Option<&Path>) -> CliResult<PathBuf> {
    let root = out_override.unwrap_or(&config.output.path);
    let mut out = OutputDir::create(root)?;
    let summary = match config.scenario {
        Scenario::Cat => run_cat(config, &mut out),
        Scenario::Inject => run_inject(config, &mut out),
        Scenario::Squeeze => run_squeeze(config, &mut out),
        Scenario::Sweep => run_sweep(config, &mut out),
        Scenario::Verify => run_verify(config, &mut out),
        Scenario::Feasibility => run_feasibility(config, &mut out),
    }?;
    let files: Vec<String> = out
        .written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    out.json(
        "summary.json",
        &json!({ "scenario": config.scenario, "files": files, "summary": summary }),
    )?;
    Ok(root.to_path_buf())
}

// ---------------------------------------------------------------------------
// Templates

fn example_config(scenario: Scenario) -> RunConfig {
    let physical = DeviceParams::rabi_sweep_point(1e-3, CavityKind::Full, 4.0);
    let omega = physical.omega();
    let base = RunConfig {
        scenario,
        device: None,
        tau: None,
        alpha_prime: None,
        gamma: None,
        t: None,
        wigner: None,
        lambda_grid: None,
        ratios: None,
        kinds: None,
        scenarios: None,
        tau_grid: None,
        fock_dim: None,
        t1: None,
        t2: None,
        tau_m: None,
        output: OutputSpec {
            path: PathBuf::from(format!("out/{}", scenario_name(scenario))),
            format: OutputFormat::Json,
        },
    };
    match scenario {
        Scenario::Cat => RunConfig {
            device: Some(physical.with_xi(C64::new(0.8, 0.0))),
            tau: Some(PI / omega),
            wigner: Some(WignerGrid {
                extent: 3.0,
                points: 61,
            }),
            output: OutputSpec {
                format: OutputFormat::Csv,
                ..base.output.clone()
            },
            ..base
        },
        Scenario::Inject => RunConfig {
            device: Some(physical.with_xi(C64::new(0.8, 0.0))),
            tau: Some(0.5 * PI / omega),
            alpha_prime: Some([1.0, 0.0]),
            ..base
        },
        Scenario::Squeeze => RunConfig {
            device: Some(
                physical
                    .with_phi_c_ratio(0.0)
                    .with_xi(C64::new((0.8 / PI).sqrt(), 0.0)),
            ),
            gamma: Some([0.5, 0.0]),
            t: Some(4.0 * PI / omega),
            ..base
        },
        Scenario::Sweep => RunConfig {
            lambda_grid: Some(LambdaGrid {
                start: 1e-3,
                stop: 0.15,
                points: 200,
            }),
            ratios: Some(SWEEP_RATIOS.to_vec()),
            kinds: Some(SWEEP_KINDS.to_vec()),
            output: OutputSpec {
                format: OutputFormat::Csv,
                ..base.output.clone()
            },
            ..base
        },
        Scenario::Verify => RunConfig {
            device: Some(physical),
            scenarios: Some(VerifyScenario::ALL.to_vec()),
            tau_grid: Some(TimeGrid {
                stop: None,
                points: 20,
            }),
            alpha_prime: Some([2.0, 0.0]),
            ..base
        },
        Scenario::Feasibility => RunConfig {
            device: Some(physical.with_quality_factor(3e8)),
            t1: Some(1e-6),
            t2: Some(5e-9),
            tau_m: Some(4e-9),
            ..base
        },
    }
}

fn scenario_name(s: Scenario) -> &'static str {
    match s {
        Scenario::Cat => "cat",
        Scenario::Inject => "inject",
        Scenario::Squeeze => "squeeze",
        Scenario::Sweep => "sweep",
        Scenario::Verify => "verify",
        Scenario::Feasibility => "feasibility",
    }
}

fn example_comments(s: Scenario) -> &'static [&'static str] {
    match s {
        Scenario::Cat => &[
            "Vacuum cavity, qubit in g, evolved for tau seconds at n_g = 1/2 and",
            "phi_c_ratio = 1/2, then the qubit is read out. Writes the branch form,",
            "both measurement records, and the Wigner function of each post-selected cat.",
            "device: energies in eV, lambda in m. `xi` = [re, im] overrides the",
            "geometric coupling; remove it to use the cavity geometry.",
            "wigner: square grid over Re(beta), Im(beta) in [-extent, extent].",
        ],
        Scenario::Inject => &[
            "Coherent state alpha_prime = [re, im] injected for tau seconds, then the",
            "flux pulse phi_c = phi_0 for pi/(4 E_J), then qubit readout.",
        ],
        Scenario::Squeeze => &[
            "Coherent state gamma = [re, im] under the second-order Hamiltonian for",
            "t seconds. Requires phi_c_ratio = 0 and n_g = 1/2. Reports quadrature",
            "variances against 1/2 exp(-2r), r = |xi|^2 E_J t.",
        ],
        Scenario::Sweep => &[
            "Rabi frequency |Omega|/2pi over log-spaced wavelengths (m), ratios",
            "E_ch/E_J and cavity kinds (full, half, quarter). Mode volume is L^3.",
        ],
        Scenario::Verify => &[
            "Closed-form states against brute-force propagation on a truncated Fock",
            "space. tau_grid.stop defaults to two cavity periods; fock_dim defaults to",
            "automatic (64 doubling to 512). alpha_prime is the injected amplitude.",
            "Exits with status 3 if any infidelity exceeds 1e-8.",
        ],
        Scenario::Feasibility => &[
            "Timescales: t_q = 1/|Omega|, t_d = Q/omega against T1, T2 and the",
            "readout time tau_m (all in seconds). device.q is required.",
        ],
    }
}

/// Commented configuration template for `scenario`.
pub fn example(scenario: Scenario) -> String {
    let mut s = String::new();
    for line in example_comments(scenario) {
        s.push_str("// ");
        s.push_str(line);
        s.push('\n');
    }
    s.push_str(&to_json_string(&example_config(scenario)));
    s
}

/// Entry point behind the binary; returns the process exit code.
pub fn main_with(args: Args) -> i32 {
    if let Some(s) = args.print_example {
        print!("{}", example(s));
        return 0;
    }
    if let Some(seed) = args.seed {
        log::info!("seed {seed} ignored: no stochastic paths");
    }
    let path = args.config.expect("clap enforces --config");
    let result = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
        .and_then(|text| load_config(&text))
        .and_then(|config| run(&config, args.out.as_deref()));
    match result {
        Ok(root) => {
            println!("wrote {}", root.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_load() {
        for s in [
            Scenario::Cat,
            Scenario::Inject,
            Scenario::Squeeze,
            Scenario::Sweep,
            Scenario::Verify,
            Scenario::Feasibility,
        ] {
            let text = example(s);
            assert!(text.starts_with("//"));
            let config = load_config(&text).unwrap();
            assert_eq!(config, example_config(s));
        }
    }

    #[test]
    fn rejects_foreign_and_unknown_keys() {
        let text = r#"{"scenario": "sweep", "tau": 1.0, "output": {"path": "x"}}"#;
        assert!(matches!(load_config(text), Err(CliError::Config(m)) if m.contains("tau")));
        let text = r#"{"scenario": "sweep", "bogus": 1, "output": {"path": "x"}}"#;
        assert!(matches!(load_config(text), Err(CliError::Config(m)) if m.contains("bogus")));
        let text = r#"{"scenario": "feasibility", "output": {"path": "x"}}"#;
        assert!(matches!(load_config(text), Err(CliError::Config(m)) if m.contains("device")));
    }

    #[test]
    fn float_output_round_trips() {
        let xs = vec![0.1, 1.0 / 3.0, -2.5e-300, 12345.678];
        let text = to_json_string(&xs);
        assert!(text.contains("1.0000000000000001e-1"));
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, xs);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::from(Error::NotNormalized(2.0)).exit_code(), 3);
        assert_eq!(
            CliError::from(Error::Precondition(String::new())).exit_code(),
            2
        );
    }
}
