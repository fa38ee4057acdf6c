use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use octuple::codec::{decode_tokens, read_sequences, write_sequences, TokenSequence};
use octuple::metrics::compare_corpus;
use octuple::midi::{parse_midi, write_midi};
use octuple::pipeline::{
    attach_labels, corpus_stats, corrupt_sequences, list_midi_files, parse_file_table,
    parse_note_table, segment_corpus, segment_score, source_id, write_labels, write_pairs,
    LabelSource, LabelTask, PipelineConfig, PipelineError,
};

#[derive(Parser)]
#[command(name = "octuple", version, about = "Octuple MIDI tokenization, corruption and metrics")]
struct Cli {
    /// Run seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Maximum tokens per segment (overrides the config file).
    #[arg(long, global = true)]
    max_len: Option<usize>,
    /// Keep original bar ids in permuted and rotated sources.
    #[arg(long, global = true)]
    keep_bar_ids: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode one MIDI file into token sequences.
    Tokenize {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decode one token sequence back into a MIDI file.
    Detokenize {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Which sequence of the file to decode.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Encode and segment every MIDI file under a folder.
    Segment {
        folder: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Draw one corruption pair per sequence of a segment file.
    Corrupt {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write downstream-task labels aligned with `segment` output.
    Labels {
        folder: PathBuf,
        #[arg(long)]
        task: LabelTask,
        /// Folder of per-note tables (`<file stem>.csv`, mirroring the corpus
        /// layout) for the melody task.
        #[arg(long)]
        notes_dir: Option<PathBuf>,
        /// `path,label` table for the sequence-class task.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Name written in the label file header (defaults to the task).
        #[arg(long)]
        name: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare generated sequences against ground truth and prompts.
    Metrics {
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long)]
        prompt: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print corpus statistics.
    Stats { folder: Option<PathBuf> },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Kv,
}

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

fn load_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::parse(&read_text(path)?)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(len) = cli.max_len {
        config.set_max_seq_len(len);
    }
    if cli.keep_bar_ids {
        config.corruption.renumber_bars = false;
    }
    config.validate()?;
    Ok(config)
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| PipelineError::io(path, e).into())
}

fn emit(output: Option<&Path>, text: &str) -> CliResult<()> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| PipelineError::io(path, e).into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn corpus_folder(arg: Option<PathBuf>, config: &PipelineConfig) -> CliResult<PathBuf> {
    arg.or_else(|| config.input.clone())
        .ok_or_else(|| "no corpus folder given (argument or `input` config key)".into())
}

fn output_or_config(arg: Option<PathBuf>, config: &PipelineConfig) -> Option<PathBuf> {
    arg.or_else(|| config.output.clone())
}

fn read_one_sequence_set(path: &Path) -> CliResult<Vec<TokenSequence>> {
    Ok(read_sequences(&read_text(path)?)?)
}

fn run(cli: Cli) -> CliResult<()> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Tokenize { input, output } => {
            let bytes = fs::read(&input).map_err(|e| PipelineError::io(&input, e))?;
            let score = parse_midi(&bytes)?;
            let name = input.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            let (segments, _) = segment_score(&score, &name, &config)?;
            emit(output.as_deref(), &write_sequences(segments.iter().map(|s| &s.tokens)))
        }
        Command::Detokenize {
            input,
            output,
            index,
        } => {
            let seqs = read_one_sequence_set(&input)?;
            let seq = seqs
                .get(index)
                .ok_or_else(|| format!("{} holds {} sequences", input.display(), seqs.len()))?;
            let score = decode_tokens(seq)?;
            fs::write(&output, write_midi(&score)).map_err(|e| PipelineError::io(&output, e))?;
            Ok(())
        }
        Command::Segment { folder, output } => {
            let folder = corpus_folder(folder, &config)?;
            let segments = segment_corpus(&folder, &config)?;
            log::info!("{} segments", segments.len());
            emit(
                output_or_config(output, &config).as_deref(),
                &write_sequences(segments.iter().map(|s| &s.tokens)),
            )
        }
        Command::Corrupt { input, output } => {
            let seqs = read_one_sequence_set(&input)?;
            let pairs = corrupt_sequences(&seqs, &config)?;
            emit(output_or_config(output, &config).as_deref(), &write_pairs(&pairs))
        }
        Command::Labels {
            folder,
            task,
            notes_dir,
            table,
            name,
            output,
        } => {
            let mut segments = segment_corpus(&folder, &config)?;
            let source = match task {
                LabelTask::Velocity => LabelSource::Velocity {
                    levels: config.velocity_levels,
                },
                LabelTask::Melody => {
                    let dir = notes_dir.ok_or("--notes-dir is required for the melody task")?;
                    let mut tables = BTreeMap::new();
                    for file in list_midi_files(&folder)? {
                        let id = source_id(&folder, &file);
                        let rel = file.strip_prefix(&folder).unwrap_or(&file).with_extension("csv");
                        let path = dir.join(rel);
                        if path.exists() {
                            tables.insert(id, parse_note_table(&read_text(&path)?)?);
                        }
                    }
                    LabelSource::PerNote(tables)
                }
                LabelTask::SequenceClass => {
                    let path = table.ok_or("--table is required for the sequence-class task")?;
                    LabelSource::PerFile(parse_file_table(&read_text(&path)?)?)
                }
            };
            attach_labels(&mut segments, &source)?;
            let name = name.unwrap_or_else(|| task.name().to_string());
            emit(output.as_deref(), &write_labels(&name, &segments)?)
        }
        Command::Metrics {
            generated,
            ground_truth,
            prompt,
            format,
            output,
        } => {
            let g = read_one_sequence_set(&generated)?;
            let t = read_one_sequence_set(&ground_truth)?;
            let p = read_one_sequence_set(&prompt)?;
            if g.len() != t.len() || g.len() != p.len() {
                return Err(format!(
                    "sequence counts differ: {} generated, {} ground truth, {} prompt",
                    g.len(),
                    t.len(),
                    p.len()
                )
                .into());
            }
            let pieces: Vec<_> = g.into_iter().zip(t).zip(p).map(|((g, t), p)| (g, t, p)).collect();
            let (_, mean) = compare_corpus::<f64>(&pieces)?;
            let text = match format {
                ReportFormat::Table => mean.to_table(),
                ReportFormat::Kv => mean.to_key_values(),
            };
            emit(output.as_deref(), &text)
        }
        Command::Stats { folder } => {
            let folder = corpus_folder(folder, &config)?;
            emit(None, &corpus_stats(&folder, &config)?.to_key_values())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
