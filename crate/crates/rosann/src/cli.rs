//! Command-line interface. Exit codes: 0 success, 1 domain error, 2 usage
//! error. Results go to stdout, diagnostics to stderr.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rosann_core::bag::open_bag;
use rosann_core::layout::DataDir;
use rosann_core::media::{process_bag, ExtractionConfig, HttpTranscriber, ProcessContext};
use rosann_core::stats::{export_stats_csv, export_stats_json, StatsSummary};

use crate::app::{open_project, project_csv, project_stats, resolve_bag_path, AppState};
use crate::error::ApiError;

pub const DATA_DIR_ENV: &str = "ROSANN_DATA_DIR";
pub const PORT_ENV: &str = "ROSANN_PORT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "rosann", version, about = "ROSBag annotation workbench")]
pub struct Cli {
    /// Data directory holding rosbag-data/, processed/, booklist/ and annotation/.
    #[arg(long, env = DATA_DIR_ENV, default_value = "./datas", global = true)]
    pub data_dir: PathBuf,
    /// Output format for structured results.
    #[arg(long, value_enum, default_value = "table", global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the topics of a bag.
    ListTopics { bag: String },
    /// Extract media from a bag into the processed cache.
    Process {
        bag: String,
        #[arg(long)]
        video_topic: Option<String>,
        #[arg(long)]
        audio_topic: Option<String>,
        /// `mp3` or a raw PCM hint such as `pcm_s16le`.
        #[arg(long)]
        audio_format: Option<String>,
        #[arg(long)]
        audio_sample_rate: Option<u32>,
        /// Transcribe the audio with the configured HTTP transcriber.
        #[arg(long)]
        transcribe: bool,
    },
    /// Print a project's annotations as CSV.
    ExportCsv { bag_id: String },
    /// Print a project's statistics.
    Stats {
        bag_id: String,
        #[arg(long)]
        exclude_transcript: bool,
        /// Observation window override in ms.
        #[arg(long)]
        t_ms: Option<u64>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = PORT_ENV, default_value_t = 8000)]
        port: u16,
        /// Create the data directory tree first.
        #[arg(long)]
        init: bool,
        /// Built web UI to serve at `/`.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.line());
            1
        }
    }
}

fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.first().map_or(0, Vec::len);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
        s.push_str(line.join("  ").trim_end());
        s.push('\n');
    }
    s
}

fn stats_table(s: &StatsSummary) -> String {
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    let o = &s.overall;
    let mut rows = vec![
        vec!["metric".to_string(), "value".to_string()],
        vec!["occurrences".into(), o.occurrences.to_string()],
        vec!["frequency_per_min".into(), format!("{:.3}", o.frequency_per_min)],
        vec!["average_duration_ms".into(), format!("{:.1}", o.average_duration_ms)],
        vec!["time_ratio".into(), format!("{:.4}", o.time_ratio)],
        vec!["latency_ms".into(), opt(o.latency_ms.map(|v| v.to_string()))],
    ];
    let mut text = table(&rows);
    rows = vec![["tier", "count", "min_ms", "max_ms", "avg_ms", "median_ms", "total_ms", "percentage", "latency_ms"]
        .iter()
        .map(|h| h.to_string())
        .collect()];
    for t in &s.tiers {
        let x = &t.stats;
        rows.push(vec![
            t.tier.clone(),
            x.count.to_string(),
            opt(x.min_duration_ms.map(|v| v.to_string())),
            opt(x.max_duration_ms.map(|v| v.to_string())),
            opt(x.average_duration_ms.map(|v| format!("{v:.1}"))),
            opt(x.median_duration_ms.map(|v| format!("{v:.1}"))),
            x.total_duration_ms.to_string(),
            format!("{:.2}", x.duration_percentage),
            opt(x.latency_ms.map(|v| v.to_string())),
        ]);
    }
    text.push('\n');
    text.push_str(&table(&rows));
    text
}

fn require_data_dir(cli: &Cli) -> Result<DataDir, ApiError> {
    let data = DataDir::new(&cli.data_dir);
    if !data.exists() {
        return Err(ApiError::not_found(format!("data directory {} does not exist", cli.data_dir.display())));
    }
    Ok(data)
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), ApiError> {
    let text = match &cli.command {
        Command::ListTopics { bag } => {
            let data = DataDir::new(&cli.data_dir);
            let handle = open_bag(resolve_bag_path(&data, bag))?;
            let topics = handle.list_topics();
            match cli.format {
                Format::Json => to_json(&topics),
                Format::Csv | Format::Table => {
                    let mut rows = vec![vec!["topic".into(), "type".into(), "messages".into()]];
                    rows.extend(
                        topics
                            .iter()
                            .map(|t| vec![t.topic.clone(), t.type_name.clone(), t.message_count.to_string()]),
                    );
                    if cli.format == Format::Csv {
                        rows.iter().map(|r| r.join(",") + "\n").collect()
                    } else {
                        table(&rows)
                    }
                }
            }
        }
        Command::Process {
            bag,
            video_topic,
            audio_topic,
            audio_format,
            audio_sample_rate,
            transcribe,
        } => {
            let data = require_data_dir(&cli)?;
            let mut config = ExtractionConfig::default();
            if let Some(v) = video_topic {
                config.video_topic = v.clone();
            }
            if let Some(a) = audio_topic {
                config.audio_topic = a.clone();
            }
            if let Some(f) = audio_format {
                config.audio_format = f.clone();
            }
            if let Some(r) = audio_sample_rate {
                config.audio_sample_rate = *r;
            }
            config.transcribe = *transcribe;
            let mut ctx = ProcessContext::new(data.clone());
            if *transcribe {
                let t = HttpTranscriber::from_env().map_err(|e| ApiError::new(401, "AUTH", e.to_string()))?;
                ctx = ctx.with_transcriber(Arc::new(t));
            }
            let handle = open_bag(resolve_bag_path(&data, bag))?;
            let outcome = process_bag(&handle, &config, &ctx)?;
            String::from_utf8_lossy(&outcome.manifest_bytes).into_owned() + "\n"
        }
        Command::ExportCsv { bag_id } => {
            let data = require_data_dir(&cli)?;
            project_csv(&open_project(&data, bag_id)?)
        }
        Command::Stats {
            bag_id,
            exclude_transcript,
            t_ms,
        } => {
            let data = require_data_dir(&cli)?;
            let summary = project_stats(&open_project(&data, bag_id)?, !exclude_transcript, *t_ms)?;
            match cli.format {
                Format::Json => export_stats_json(&summary) + "\n",
                Format::Csv => export_stats_csv(&summary),
                Format::Table => stats_table(&summary),
            }
        }
        Command::Serve { port, init, ui_dir } => {
            let data = if *init {
                DataDir::init(&cli.data_dir)?
            } else {
                require_data_dir(&cli)?
            };
            let mut state = AppState::new(data);
            state.ui_dir = ui_dir.clone();
            if let Ok(t) = HttpTranscriber::from_env() {
                state.transcriber = Some(Arc::new(t));
            }
            serve(state, *port)?;
            String::new()
        }
    };
    out.write_all(text.as_bytes())
        .map_err(|e| ApiError::new(500, "IO", e.to_string()))
}

fn serve(state: AppState, port: u16) -> Result<(), ApiError> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| ApiError::internal(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await.map_err(|e| {
            if e.kind() == std::io::ErrorKind::AddrInUse {
                ApiError::new(500, "PORT_IN_USE", format!("port {port} is in use"))
            } else {
                ApiError::new(500, "BAD_CONFIG", e.to_string())
            }
        })?;
        log::info!("listening on http://127.0.0.1:{port}");
        axum::serve(listener, crate::router(Arc::new(state)))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))
    })
}
