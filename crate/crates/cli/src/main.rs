use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use scorealign::eval::{note_error_rate, report, scoretime_error_rate};
use scorealign::ioi::{default_params, fit_distribution, fit_report_tsv, parse_params, write_params, Bins};
use scorealign::matcher::{align, Alignment, MatcherConfig, NoteEvent, Session};
use scorealign::midi::{read_midi, write_midi};
use scorealign::model::{ModelConfig, PerformanceHmm};
use scorealign::score::{parse_musicxml, parse_text, Pitch, PolyphonicScore};
use scorealign::simulate::{simulate, stream_from_json_lines, stream_to_json_lines, SimConfig};

#[derive(Parser)]
#[command(name = "scorealign", version, about = "Score-performance matching for polyphonic MIDI with ornaments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a score into a performance model.
    Compile {
        #[arg(long)]
        score: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// IOI parameter file overriding the built-in defaults.
        #[arg(long)]
        ioi: Option<PathBuf>,
        /// Also write a table of the compiled states.
        #[arg(long)]
        states: Option<PathBuf>,
    },
    /// Align a complete performance (MIDI or JSON lines) to a compiled model.
    Align {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        perf: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Jump probability, as a number or `e-40`.
        #[arg(long, value_parser = parse_gamma)]
        gamma: Option<f64>,
        /// Width of the predicted-IOI density, seconds.
        #[arg(long)]
        delta: Option<f64>,
        /// Decode note by note without backtracking.
        #[arg(long)]
        online: bool,
        /// Also write the tempo track.
        #[arg(long)]
        tempo_out: Option<PathBuf>,
    },
    /// Follow a performance read from standard input, one `onset_s pitch velocity` line per note.
    Follow {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_parser = parse_gamma)]
        gamma: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Sample a synthetic performance with its true alignment.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Mistake rates as `key value` lines.
        #[arg(long)]
        rates: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit IOI distributions to samples and write a parameter file.
    FitIoi {
        /// One sample per line, optionally preceded by a class label.
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Class of unlabelled samples.
        #[arg(long, default_value = "chord")]
        name: String,
    },
    /// Compare predicted and true alignments.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value = "performance")]
        piece: String,
    },
}

fn parse_gamma(s: &str) -> Result<f64, String> {
    let v = match s.strip_prefix('e') {
        Some(exp) => exp.parse::<f64>().map(f64::exp),
        None => s.parse::<f64>(),
    }
    .map_err(|_| format!("`{s}` is neither a number nor of the form e-40"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1)"))
    }
}

enum Failure {
    Parse(anyhow::Error),
    Runtime(anyhow::Error),
}

type Outcome<T> = Result<T, Failure>;

trait Tag<T> {
    fn parse_err(self) -> Outcome<T>;
    fn runtime_err(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Tag<T> for Result<T, E> {
    fn parse_err(self) -> Outcome<T> {
        self.map_err(|e| Failure::Parse(e.into()))
    }
    fn runtime_err(self) -> Outcome<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn read_file(path: &Path) -> Outcome<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display())).parse_err()
}

fn read_text(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).parse_err()
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Outcome<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display())).runtime_err()
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or_default().to_ascii_lowercase()
}

fn load_score(path: &Path) -> Outcome<PolyphonicScore> {
    let bytes = read_file(path)?;
    let score = match extension(path).as_str() {
        "musicxml" | "xml" => parse_musicxml(&bytes),
        _ => parse_text(&String::from_utf8(bytes).context("score is not UTF-8").parse_err()?),
    };
    score.with_context(|| format!("parsing {}", path.display())).parse_err()
}

fn load_model(path: &Path) -> Outcome<PerformanceHmm> {
    PerformanceHmm::load(&read_file(path)?)
        .with_context(|| format!("loading {}", path.display()))
        .parse_err()
}

fn load_performance(path: &Path) -> Outcome<Vec<NoteEvent>> {
    let events = match extension(path).as_str() {
        "jsonl" | "json" => stream_from_json_lines(&read_text(path)?),
        _ => read_midi(&read_file(path)?),
    };
    events.with_context(|| format!("parsing {}", path.display())).parse_err()
}

fn matcher_config(base: MatcherConfig, gamma: Option<f64>, delta: Option<f64>) -> Outcome<MatcherConfig> {
    let cfg = MatcherConfig {
        gamma_bar: gamma.unwrap_or(base.gamma_bar),
        delta: delta.unwrap_or(base.delta),
        ..base
    };
    cfg.validate().parse_err()?;
    Ok(cfg)
}

fn run(command: Command) -> Outcome<()> {
    match command {
        Command::Compile { score, out, ioi, states } => {
            let score = load_score(&score)?;
            let mut cfg = ModelConfig::default();
            if let Some(p) = ioi {
                let params = parse_params(&read_text(&p)?).context("parsing IOI parameters").parse_err()?;
                cfg.ioi = cfg.ioi.merged(&params);
            }
            let hmm = PerformanceHmm::compile(&score, &cfg).context("compiling score").runtime_err()?;
            write_file(&out, hmm.save().runtime_err()?)?;
            if let Some(p) = states {
                write_file(&p, hmm.state_table())?;
            }
            eprintln!("{} events, {} states", hmm.top_count(), hmm.state_count());
        }
        Command::Align {
            model,
            perf,
            out,
            gamma,
            delta,
            online,
            tempo_out,
        } => {
            let hmm = load_model(&model)?;
            let events = load_performance(&perf)?;
            let base = if online { MatcherConfig::online() } else { MatcherConfig::offline() };
            let cfg = matcher_config(base, gamma, delta)?;
            let result = align(&hmm, &events, cfg).context("aligning").runtime_err()?;
            write_file(&out, result.alignment.to_tsv())?;
            if let Some(p) = tempo_out {
                write_file(&p, result.tempo.to_tsv())?;
            }
        }
        Command::Follow { model, gamma, delta } => {
            let hmm = load_model(&model)?;
            let cfg = matcher_config(MatcherConfig::online(), gamma, delta)?;
            let mut session = Session::with_defaults(&hmm, cfg).runtime_err()?;
            let stdin = io::stdin();
            let mut stdout = io::stdout().lock();
            for (n, line) in stdin.lock().lines().enumerate() {
                let line = line.context("reading standard input").parse_err()?;
                let Some(ev) = parse_follow_line(&line, session.notes_fed())
                    .with_context(|| format!("line {}", n + 1))
                    .parse_err()?
                else {
                    continue;
                };
                let est = session.feed(ev).runtime_err()?;
                let tempo_qn = est.tempo * f64::from(hmm.ticks_per_quarter);
                writeln!(stdout, "{}\t{}\t{}\t{}", ev.index, est.top, est.score_time, tempo_qn).runtime_err()?;
                stdout.flush().runtime_err()?;
            }
        }
        Command::Simulate {
            model,
            seed,
            rates,
            out_dir,
        } => {
            let hmm = load_model(&model)?;
            let mut cfg = SimConfig {
                seed,
                ..SimConfig::default()
            };
            if let Some(p) = rates {
                cfg.apply_rates(&read_text(&p)?).context("parsing rates").parse_err()?;
            }
            let sim = simulate(&hmm, &cfg).runtime_err()?;
            fs::create_dir_all(&out_dir).runtime_err()?;
            let spq = hmm.reference_tempo * f64::from(hmm.ticks_per_quarter);
            write_file(&out_dir.join("performance.mid"), write_midi(&sim.events, spq).runtime_err()?)?;
            write_file(&out_dir.join("stream.jsonl"), stream_to_json_lines(&sim.events))?;
            write_file(&out_dir.join("truth.tsv"), sim.truth.to_tsv())?;
            write_file(&out_dir.join("tempo.tsv"), sim.tempo.to_tsv())?;
            eprintln!("{} notes", sim.events.len());
        }
        Command::FitIoi { samples, out, name } => {
            let text = read_text(&samples)?;
            let groups = labelled_samples(&text, &name).parse_err()?;
            let mut params = default_params();
            let mut stdout = io::stdout().lock();
            for (label, xs) in groups {
                let fit = fit_distribution(&xs, Bins::FreedmanDiaconis)
                    .with_context(|| format!("fitting `{label}`"))
                    .runtime_err()?;
                writeln!(stdout, "# {label}").runtime_err()?;
                write!(stdout, "{}", fit_report_tsv(&fit)).runtime_err()?;
                let floor = params.get(&label).and_then(|s| s.floor);
                params.set(&label, scorealign::ioi::DistSpec { floor, ..fit.best });
            }
            write_file(&out, write_params(&params))?;
        }
        Command::Eval { pred, truth, piece } => {
            let p = Alignment::parse_tsv(&read_text(&pred)?).context("parsing prediction").parse_err()?;
            let t = Alignment::parse_tsv(&read_text(&truth)?).context("parsing truth").parse_err()?;
            note_error_rate(&p, &t).runtime_err()?;
            scoretime_error_rate(&p, &t).runtime_err()?;
            let r = report(&[(piece, p, t)]).runtime_err()?;
            print!("{}", r.to_tsv());
        }
    }
    Ok(())
}

/// Parses `onset_s pitch velocity`; zero-velocity lines are note-offs and are skipped.
fn parse_follow_line(line: &str, index: usize) -> anyhow::Result<Option<NoteEvent>> {
    let f: Vec<&str> = line.split_whitespace().collect();
    match f.as_slice() {
        [] => Ok(None),
        [onset, pitch, velocity] => {
            let onset: f64 = onset.parse().context("bad onset")?;
            let pitch: i32 = pitch.parse().context("bad pitch")?;
            let velocity: u32 = velocity.parse().context("bad velocity")?;
            if velocity == 0 {
                return Ok(None);
            }
            Ok(Some(NoteEvent::new(index, onset, Pitch::new(pitch)?)))
        }
        _ => Err(anyhow!("expected `onset_s pitch velocity`, found `{line}`")),
    }
}

/// Groups samples by an optional leading label; a header line is skipped.
fn labelled_samples(text: &str, default: &str) -> anyhow::Result<Vec<(String, Vec<f64>)>> {
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let (label, value) = match f.as_slice() {
            [v] => (default, *v),
            [l, v] => (*l, *v),
            _ => return Err(anyhow!("line {}: expected `[label] seconds`", n + 1)),
        };
        let Ok(x) = value.parse::<f64>() else {
            if groups.is_empty() && n == 0 {
                continue;
            }
            return Err(anyhow!("line {}: bad sample `{value}`", n + 1));
        };
        match groups.iter_mut().find(|(l, _)| l == label) {
            Some((_, xs)) => xs.push(x),
            None => groups.push((label.to_string(), vec![x])),
        }
    }
    if groups.is_empty() {
        return Err(anyhow!("no samples"));
    }
    Ok(groups)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Parse(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
