//! Batch front end. Each command reads the scenario, checks its
//! prerequisites in the output directory and writes its own artifacts.
//!
//! Output layout under `--out`:
//!
//! ```text
//! build/                 network.json  acc_orig.csv  stamp
//! disrupt/               network.json  demand.json  acc_disr.csv  stamp
//! baseline_b<B>/         network.json  acc_repl.csv  stamp
//! remediate_b<B>_w<W>/   network.json  plan.json  acc_ours.csv  stamp
//! ip_b<B>_w<W>/          model.lp
//! report_b<B>_w<W>/      report files
//! ```
//!
//! A `stamp` holds the SHA-256 of everything the artifact was computed
//! from; a dependent command refuses stale or missing prerequisites.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::accessibility::AccessibilityField;
use crate::disruption::build_replacement;
use crate::fixtures;
use crate::full_ip::{build_model, render_lp, IpError};
use crate::net_model::{NodeId, TransitNetwork};
use crate::pipeline::{self, PipelineError, PlanDocument, Snapshots};
use crate::report::{emit, ReportError};
use crate::scenario::{write_amenities, ScenarioConfig, ScenarioError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    ConfigError(#[from] ScenarioError),
    #[error("missing artifact {path}: run `{command}` first")]
    MissingArtifact { command: String, path: String },
    #[error("artifact {path} is stale: rerun `{command}`")]
    StaleArtifact { command: String, path: String },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Ip(#[from] IpError),
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corrupt artifact {path}: {source}")]
    Corrupt { path: String, source: serde_json::Error },
}

#[derive(Debug, Parser)]
#[command(name = "transit-remediation", version, about = "Bus network remediation for rail disruptions")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Scenario file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Override the demand seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub walk_radius_km: Option<f64>,
    #[arg(long, global = true)]
    pub dmax_m: Option<f64>,
    #[arg(long, global = true)]
    pub cap: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct Budget {
    #[arg(long, default_value_t = 0)]
    pub extra_buses: u32,
}

#[derive(Debug, Clone, Args)]
pub struct Weighted {
    #[arg(long, default_value_t = 0)]
    pub extra_buses: u32,
    /// Weight on the extension-distance term.
    #[arg(long)]
    pub weight_f2: Option<f64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Network snapshot and accessibility before the disruption.
    Build,
    /// Disrupted snapshot and station demand.
    Disrupt,
    /// Conventional replacement bus.
    Baseline(Budget),
    /// Two-stage remediation plan.
    Remediate(Weighted),
    /// Full integer program in LP format.
    ExportIp(Weighted),
    /// Comparison reports.
    Evaluate(Weighted),
    /// Every step in order.
    Run(Weighted),
    /// Write the bundled suburb scenario into `--out`.
    Fixture,
}

/// Loaded scenario with CLI overrides applied.
struct Context {
    config: ScenarioConfig,
    amenities: Vec<[f64; 2]>,
    out: PathBuf,
    inputs_hash: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn hash(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn read_json<V: serde::de::DeserializeOwned>(path: &Path) -> Result<V, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Corrupt { path: path.display().to_string(), source })
}

fn field_csv(field: &AccessibilityField<f64>) -> String {
    let mut s = String::from("tile,accessibility\n");
    for (i, v) in field.values.iter().enumerate() {
        s.push_str(&format!("{i},{v}\n"));
    }
    s
}

fn weight_label(w: f64) -> String {
    format!("{w}").replace('.', "p")
}

impl Context {
    fn load(global: &GlobalArgs) -> Result<Self, CliError> {
        let path = global
            .config
            .as_ref()
            .ok_or_else(|| ScenarioError::InvalidParameter("--config is required for this command".into()))?;
        let (mut config, amenities) = ScenarioConfig::load(path)?;
        let p = &mut config.parameters;
        if let Some(v) = global.seed {
            p.seed = v;
        }
        if let Some(v) = global.walk_radius_km {
            p.walk_radius_km = v;
        }
        if let Some(v) = global.dmax_m {
            p.d_max_m = v;
        }
        if let Some(v) = global.cap {
            p.cap = v;
        }
        p.check()?;
        let amen: String = amenities.iter().map(|a| format!("{},{};", a[0], a[1])).collect();
        let inputs_hash = hash(&[&config.to_json(), &amen]);
        Ok(Context { config, amenities, out: global.out.clone(), inputs_hash })
    }

    fn dir(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn weight(&self, w: Option<f64>) -> f64 {
        w.unwrap_or(self.config.parameters.weight_f2)
    }

    fn build_stamp(&self) -> String {
        hash(&["build", &self.inputs_hash])
    }

    fn disrupt_stamp(&self) -> String {
        hash(&["disrupt", &self.build_stamp()])
    }

    fn baseline_stamp(&self, b: u32) -> String {
        hash(&["baseline", &self.disrupt_stamp(), &b.to_string()])
    }

    fn remediate_stamp(&self, b: u32, w: f64) -> String {
        hash(&["remediate", &self.disrupt_stamp(), &b.to_string(), &w.to_string()])
    }

    /// Check that `dir/stamp` exists and matches.
    fn require(&self, dir: &str, expected: &str, command: &str) -> Result<PathBuf, CliError> {
        let d = self.dir(dir);
        let stamp = d.join("stamp");
        let found = fs::read_to_string(&stamp).map_err(|_| CliError::MissingArtifact {
            command: command.to_string(),
            path: stamp.display().to_string(),
        })?;
        if found.trim() != expected {
            return Err(CliError::StaleArtifact { command: command.to_string(), path: stamp.display().to_string() });
        }
        Ok(d)
    }

    fn router(&self) -> crate::router::RouterParams<f64> {
        self.config.parameters.router()
    }

    fn build(&self) -> Result<(), CliError> {
        let net = pipeline::build::<f64>(&self.config, &self.amenities)?;
        let field = pipeline::evaluate(&net, &self.router())?;
        let d = self.dir("build");
        write(&d.join("network.json"), &net.canonical_json())?;
        write(&d.join("acc_orig.csv"), &field_csv(&field))?;
        write(&d.join("stamp"), &self.build_stamp())
    }

    fn load_network(&self, dir: &Path) -> Result<TransitNetwork<f64>, CliError> {
        read_json(&dir.join("network.json"))
    }

    fn disrupt(&self) -> Result<(), CliError> {
        let src = self.require("build", &self.build_stamp(), "build")?;
        let original = self.load_network(&src)?;
        let (disrupted, demand) = pipeline::disrupt_scenario(&original, &self.config)?;
        let field = pipeline::evaluate(&disrupted, &self.router())?;
        let d = self.dir("disrupt");
        write(&d.join("network.json"), &disrupted.canonical_json())?;
        write(&d.join("demand.json"), &(serde_json::to_string_pretty(&demand).expect("demand serializes") + "\n"))?;
        write(&d.join("acc_disr.csv"), &field_csv(&field))?;
        write(&d.join("stamp"), &self.disrupt_stamp())
    }

    fn load_disrupted(&self) -> Result<(TransitNetwork<f64>, BTreeMap<NodeId, f64>), CliError> {
        let src = self.require("disrupt", &self.disrupt_stamp(), "disrupt")?;
        Ok((self.load_network(&src)?, read_json(&src.join("demand.json"))?))
    }

    fn baseline(&self, b: u32) -> Result<(), CliError> {
        let (disrupted, _) = self.load_disrupted()?;
        let repl = build_replacement(&disrupted, b).map_err(PipelineError::from)?;
        let field = pipeline::evaluate(&repl, &self.router())?;
        let d = self.dir(&format!("baseline_b{b}"));
        write(&d.join("network.json"), &repl.canonical_json())?;
        write(&d.join("acc_repl.csv"), &field_csv(&field))?;
        write(&d.join("stamp"), &self.baseline_stamp(b))
    }

    fn remediate(&self, b: u32, w: f64) -> Result<(), CliError> {
        let (disrupted, demand) = self.load_disrupted()?;
        let mut params = self.config.parameters.clone();
        params.weight_f2 = w;
        let rem = pipeline::remediate(&disrupted, &demand, &params, b)?;
        let field = pipeline::evaluate(&rem.network, &self.router())?;
        let doc = rem.document(&disrupted);
        let d = self.dir(&format!("remediate_b{b}_w{}", weight_label(w)));
        write(&d.join("network.json"), &rem.network.canonical_json())?;
        write(&d.join("plan.json"), &(serde_json::to_string_pretty(&doc).expect("plan serializes") + "\n"))?;
        write(&d.join("acc_ours.csv"), &field_csv(&field))?;
        write(&d.join("stamp"), &self.remediate_stamp(b, w))
    }

    fn export_ip(&self, b: u32, w: f64) -> Result<PathBuf, CliError> {
        let (disrupted, demand) = self.load_disrupted()?;
        let mut params = self.config.parameters.clone();
        params.weight_f2 = w;
        let rem = pipeline::remediate(&disrupted, &demand, &params, b)?;
        let model = build_model(&rem.ip_instance(&disrupted, &demand, &params))?;
        let path = self.dir(&format!("ip_b{b}_w{}", weight_label(w))).join("model.lp");
        write(&path, &render_lp(&model))?;
        Ok(path)
    }

    fn evaluate(&self, b: u32, w: f64) -> Result<Vec<String>, CliError> {
        let build = self.require("build", &self.build_stamp(), "build")?;
        let disrupt = self.require("disrupt", &self.disrupt_stamp(), "disrupt")?;
        let baseline =
            self.require(&format!("baseline_b{b}"), &self.baseline_stamp(b), &format!("baseline --extra-buses {b}"))?;
        let remediate = self.require(
            &format!("remediate_b{b}_w{}", weight_label(w)),
            &self.remediate_stamp(b, w),
            &format!("remediate --extra-buses {b} --weight-f2 {w}"),
        )?;
        let router = self.router();
        let original = self.load_network(&build)?;
        let disrupted = self.load_network(&disrupt)?;
        let replacement = self.load_network(&baseline)?;
        let ours = self.load_network(&remediate)?;
        let plan: PlanDocument = read_json(&remediate.join("plan.json"))?;
        let snapshots = Snapshots {
            extra_buses: b,
            orig: pipeline::evaluate(&original, &router)?,
            disr: pipeline::evaluate(&disrupted, &router)?,
            repl: pipeline::evaluate(&replacement, &router)?,
            ours_field: pipeline::evaluate(&ours, &router)?,
            original,
            disrupted,
            replacement,
            ours,
            plan,
        };
        let reports = pipeline::study_reports(&snapshots)?;
        Ok(emit(&reports, &self.dir(&format!("report_b{b}_w{}", weight_label(w))))?)
    }
}

/// Write the bundled suburb scenario and its amenities into `dir`.
pub fn write_fixture(dir: &Path) -> Result<PathBuf, CliError> {
    let (config, amenities) = fixtures::suburb();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("suburb.json");
    write(&path, &config.to_json())?;
    let file = config.amenities_file.as_ref().expect("suburb names its amenity file");
    write_amenities(&dir.join(file), &amenities)?;
    Ok(path)
}

/// Run one command; returns a short human-readable status line.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    if let Command::Fixture = cli.command {
        let path = write_fixture(&cli.global.out)?;
        return Ok(format!("wrote {}", path.display()));
    }
    let ctx = Context::load(&cli.global)?;
    match &cli.command {
        Command::Build => ctx.build().map(|_| "build done".into()),
        Command::Disrupt => ctx.disrupt().map(|_| "disrupt done".into()),
        Command::Baseline(a) => ctx.baseline(a.extra_buses).map(|_| "baseline done".into()),
        Command::Remediate(a) => ctx.remediate(a.extra_buses, ctx.weight(a.weight_f2)).map(|_| "remediate done".into()),
        Command::ExportIp(a) => {
            ctx.export_ip(a.extra_buses, ctx.weight(a.weight_f2)).map(|p| format!("wrote {}", p.display()))
        }
        Command::Evaluate(a) => {
            ctx.evaluate(a.extra_buses, ctx.weight(a.weight_f2)).map(|f| format!("wrote {} report files", f.len()))
        }
        Command::Run(a) => {
            let w = ctx.weight(a.weight_f2);
            ctx.build()?;
            ctx.disrupt()?;
            ctx.baseline(a.extra_buses)?;
            ctx.remediate(a.extra_buses, w)?;
            ctx.export_ip(a.extra_buses, w)?;
            let files = ctx.evaluate(a.extra_buses, w)?;
            Ok(format!("pipeline done, {} report files", files.len()))
        }
        Command::Fixture => unreachable!("handled above"),
    }
}
