use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use vitalchat_core::clock::SystemClock;
use vitalchat_core::eval::{
    bundled_queries, ingest, parse_queries, reference_echo_client, run_comparison, run_cost_study, segment_all,
    write_synthetic_dataset, ComparisonConfig, SyntheticSpec,
};
use vitalchat_core::interpreter::SpectralOracleClient;
use vitalchat_core::llm::ModelClient;
use vitalchat_core::router::HeuristicClassifier;
use vitalchat_core::wire::{decode, DeviceConfig, DeviceSimulator, SyntheticSource, VitalsPreset};
use vitalchat_core::Execution;
use vitalchat_gateway::api::{SensorUpload, UploadBurst};
use vitalchat_gateway::{build_state, ClientKind, GatewayConfig, LiveClient};

#[derive(Parser)]
#[command(name = "vitalchat", version, about = "Chat-first wearable backend")]
struct Cli {
    /// TOML config file; missing keys take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Normal,
    HighHr,
    LowSpo2,
    Fever,
}

impl From<Preset> for VitalsPreset {
    fn from(p: Preset) -> Self {
        match p {
            Preset::Normal => VitalsPreset::Normal,
            Preset::HighHr => VitalsPreset::HighHr,
            Preset::LowSpo2 => VitalsPreset::LowSpo2,
            Preset::Fever => VitalsPreset::Fever,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalClient {
    /// Deterministic spectral estimator standing in for the model.
    Stub,
    /// Answers with each window's reference values (harness self-check).
    Echo,
    /// Hosted model, credentials from the environment.
    Live,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP gateway.
    Serve {
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long, value_enum)]
        client: Option<ClientKind>,
    },
    /// Run the band's acquisition cycle, optionally posting bursts to a gateway.
    SimulateDevice {
        #[arg(long, default_value_t = 3)]
        cycles: usize,
        #[arg(long, value_enum, default_value = "normal")]
        preset: Preset,
        #[arg(long, default_value = "sim-band")]
        device_id: String,
        /// Gateway base URL, e.g. http://127.0.0.1:8080
        #[arg(long, requires = "token")]
        gateway: Option<String>,
        #[arg(long)]
        token: Option<String>,
        /// Flag every burst for immediate urgency evaluation.
        #[arg(long)]
        anomaly: bool,
    },
    /// Replay a recorded dataset through both estimator paths.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "stub")]
        client: EvalClient,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sequential: bool,
    },
    /// Write a synthetic dataset in the ingest layout.
    SynthDataset {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        subjects: u32,
        #[arg(long, default_value_t = 60.0)]
        seconds: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Price a query set through the tiered router and the single-model baseline.
    CostStudy {
        /// One query per line; defaults to the bundled 30-query sample.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Print everything stored about a user as JSON.
    ExportUser {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        phone: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Remove a user and all their records.
    DeleteUser {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        phone: String,
    },
}

fn exec(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(p) => GatewayConfig::load(p)?,
        None => GatewayConfig::default(),
    };
    match cli.command {
        Command::Serve {
            listen,
            data_dir,
            client,
        } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .init();
            config.listen = listen.unwrap_or(config.listen);
            config.data_dir = data_dir.or(config.data_dir);
            config.client = client.unwrap_or(config.client);
            tokio::runtime::Runtime::new()?.block_on(vitalchat_gateway::serve(config))
        }
        Command::SimulateDevice {
            cycles,
            preset,
            device_id,
            gateway,
            token,
            anomaly,
        } => simulate(cycles, preset.into(), &device_id, gateway.zip(token), anomaly),
        Command::Eval {
            dataset,
            client,
            out,
            sequential,
        } => {
            let exec = exec(sequential);
            let records = ingest(&dataset, &config.dataset)?;
            for r in records.iter().filter(|r| !r.missing.is_empty()) {
                eprintln!("{}: missing channels {}", r.label(), r.missing.join(", "));
            }
            let segments = segment_all(&records, &config.dataset, exec)?;
            let client: Box<dyn ModelClient> = match client {
                EvalClient::Stub => Box::new(SpectralOracleClient::default()),
                EvalClient::Echo => Box::new(reference_echo_client(&segments)),
                EvalClient::Live => Box::new(LiveClient::from_env()?),
            };
            let cmp = ComparisonConfig {
                gating: config.orchestrator.gating.clone(),
                activity: config.orchestrator.activity.clone(),
                interpreter: config.orchestrator.interpreter.clone(),
                ..ComparisonConfig::default()
            };
            let report = run_comparison(&segments, client.as_ref(), &cmp, exec)?;
            report.write(&out)?;
            print!("{}", report.summary());
            println!("records {}  report written to {}", records.len(), out.display());
            Ok(())
        }
        Command::SynthDataset {
            out,
            subjects,
            seconds,
            seed,
        } => {
            let files = write_synthetic_dataset(&out, &SyntheticSpec { subjects, seconds, seed })?;
            println!("wrote {} recordings to {}", files.len(), out.display());
            Ok(())
        }
        Command::CostStudy {
            queries,
            out,
            sequential,
        } => {
            let queries = match queries {
                Some(p) => parse_queries(&std::fs::read_to_string(&p).with_context(|| p.display().to_string())?),
                None => bundled_queries(),
            };
            let o = &config.orchestrator;
            let report = run_cost_study(
                &queries,
                &o.prices,
                &HeuristicClassifier::new(o.classifier.clone()),
                &o.cost_options(),
                exec(sequential),
            )?;
            if let Some(dir) = out {
                report.write(&dir)?;
            }
            print!("{}", report.summary());
            Ok(())
        }
        Command::ExportUser { data_dir, phone, out } => {
            let state = state_for(&mut config, &data_dir)?;
            let export = state.orchestrator.export_user(&phone)?;
            let json = serde_json::to_string_pretty(&export)?;
            match out {
                Some(p) => std::fs::write(&p, json + "\n")?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::DeleteUser { data_dir, phone } => {
            let state = state_for(&mut config, &data_dir)?;
            state.orchestrator.delete_user(&phone)?;
            println!("deleted {phone}");
            Ok(())
        }
    }
}

fn state_for(config: &mut GatewayConfig, data_dir: &Path) -> anyhow::Result<vitalchat_gateway::AppState> {
    if !data_dir.is_dir() {
        bail!("{} is not a data directory", data_dir.display());
    }
    config.data_dir = Some(data_dir.to_path_buf());
    config.client = ClientKind::Stub;
    build_state(config, Arc::new(SystemClock))
}

fn simulate(
    cycles: usize,
    preset: VitalsPreset,
    device_id: &str,
    gateway: Option<(String, String)>,
    anomaly: bool,
) -> anyhow::Result<()> {
    let start = u32::try_from(chrono_now()).unwrap_or(0);
    let mut sim = DeviceSimulator::new(DeviceConfig::default(), SyntheticSource::preset(preset), device_id, start);
    let http = reqwest::blocking::Client::new();
    for _ in 0..cycles {
        let report = sim.run_cycle(true);
        let states: Vec<String> = report.states().iter().map(|s| format!("{s:?}")).collect();
        println!(
            "cycle {} ts {} states {} transmit {:.3} s packets {}",
            report.cycle,
            report.ts,
            states.join(">"),
            report.transmit_time_s,
            report.delivered.len()
        );
        if let Some((url, token)) = &gateway {
            let bursts = report
                .delivered
                .iter()
                .map(|p| decode(p).map(|b| UploadBurst::from_burst(&b, anomaly)))
                .collect::<Result<Vec<_>, _>>()?;
            let upload = SensorUpload {
                device_id: device_id.to_owned(),
                bursts,
                uploaded_at: Some(chrono_now()),
            };
            let resp = http
                .post(format!("{}/v1/sensors", url.trim_end_matches('/')))
                .bearer_auth(token)
                .json(&upload)
                .send()?;
            println!("  upload -> {} {}", resp.status(), resp.text()?);
        }
    }
    Ok(())
}

fn chrono_now() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}
