//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input data, 3 internal
//! invariant violation.

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nbest_core::error::{Error, Result};
use nbest_core::grammar::{parse_chart, Grammar};
use nbest_core::lexicon::Lexicon;
use nbest_core::pipeline::corpus::{generate_all, DataPlan};
use nbest_core::pipeline::io::{load_corpus, nbest_to_string, references_to_string};
use nbest_core::pipeline::{evaluate, run_utterance, specialize_command, train_pipeline, Config, GrammarBundle};
use nbest_core::preference::PreferenceModel;
use nbest_core::repair::{apply_candidates, detect_repairs, RepairCandidate};
use nbest_core::specialize::{load_treebank, treebank_to_string};

#[derive(Parser)]
#[command(name = "nbest", version, about = "Speech-repair expansion, specialised parsing and preference selection over N-best lists")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Directory holding lexicon.tsv, grammar.txt, specialized.txt and lr_table.txt.
    #[arg(long, default_value = "data")]
    data: PathBuf,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    grammar: Option<PathBuf>,
    #[arg(long)]
    specialized: Option<PathBuf>,
    #[arg(long)]
    table: Option<PathBuf>,
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set k=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Use only the specialised grammar.
    #[arg(long)]
    no_fallback: bool,
    /// Skip repair expansion.
    #[arg(long)]
    no_repair: bool,
}

impl Common {
    fn path(&self, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.data.join(name))
    }

    fn lexicon(&self) -> Result<Lexicon> {
        Lexicon::load(self.path(&self.lexicon, "lexicon.tsv"))
    }

    fn general(&self) -> Result<Grammar> {
        Grammar::load(self.path(&self.grammar, "grammar.txt"))
    }

    fn bundle(&self) -> Result<GrammarBundle> {
        GrammarBundle::load(
            &self.path(&self.lexicon, "lexicon.tsv"),
            &self.path(&self.grammar, "grammar.txt"),
            &self.path(&self.specialized, "specialized.txt"),
            &self.path(&self.table, "lr_table.txt"),
        )
    }

    fn config(&self) -> Result<Config> {
        let mut c = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("--set expects KEY=VALUE, got {s:?}")))?;
            c.set(k, v).map_err(Error::Validation)?;
        }
        if self.no_fallback {
            c.fallback_general = false;
        }
        if self.no_repair {
            c.repair = false;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    General,
    Specialized,
}

#[derive(Subcommand)]
enum Command {
    /// Detect speech repairs in sentences read from stdin (JSON lines out).
    Repair {
        #[command(flatten)]
        common: Common,
    },
    /// Parse sentences read from stdin (JSON lines out).
    Parse {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "specialized")]
        with: Which,
    },
    /// Specialise the general grammar on a treebank and compile its LR table.
    Specialize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        treebank: PathBuf,
        #[arg(long)]
        out_grammar: PathBuf,
        #[arg(long)]
        out_table: PathBuf,
    },
    /// Train a preference model on N-best lists with references.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        nbest: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
        /// Frequency-only object scores (ablation).
        #[arg(long)]
        slt0_scoring: bool,
    },
    /// Choose one analysis per utterance (JSON lines out).
    Select {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        nbest: PathBuf,
        /// Preference model; omitted means acoustic score only.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Score selection against references, with baselines.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        nbest: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write the synthetic treebank and corpora.
    GenCorpus {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DataPlan::default().seed)]
        seed: u64,
    },
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn stdout_line(s: &str) -> Result<()> {
    writeln!(io::stdout().lock(), "{s}").map_err(|e| Error::io("<stdout>", e))
}

fn stdin_lines() -> Result<Vec<String>> {
    io::stdin()
        .lock()
        .lines()
        .collect::<io::Result<Vec<_>>>()
        .map_err(|e| Error::io("<stdin>", e))
}

fn load_model(path: &Option<PathBuf>) -> Result<PreferenceModel> {
    match path {
        Some(p) => PreferenceModel::load(p),
        None => Ok(PreferenceModel::speech_only()),
    }
}

#[derive(Serialize)]
struct RepairLine<'a> {
    words: &'a str,
    candidates: Vec<RepairCandidate>,
    corrected: String,
}

#[derive(Serialize)]
struct ParseLine<'a> {
    words: &'a str,
    trees: Vec<String>,
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Repair { common } => {
            let lex = common.lexicon()?;
            let cfg = common.config()?;
            for line in stdin_lines()? {
                let words: Vec<String> = line.split_whitespace().map(|w| w.to_lowercase()).collect();
                let candidates = detect_repairs(&lex, &words, cfg.span_cap);
                let corrected = apply_candidates(&words, &candidates).join(" ");
                let out = RepairLine {
                    words: line.trim(),
                    candidates,
                    corrected,
                };
                stdout_line(&serde_json::to_string(&out).expect("serialisable"))?;
            }
        }
        Command::Parse { common, with } => {
            let cfg = common.config()?;
            for line in stdin_lines()? {
                let words: Vec<String> = line.split_whitespace().map(|w| w.to_lowercase()).collect();
                let trees = match with {
                    Which::General => parse_chart(&common.general()?, &common.lexicon()?, &words),
                    Which::Specialized => common.bundle()?.parse_hypothesis(&words, cfg.fallback_general).trees,
                };
                let out = ParseLine {
                    words: line.trim(),
                    trees: trees.iter().map(|t| t.signature()).collect(),
                };
                stdout_line(&serde_json::to_string(&out).expect("serialisable"))?;
            }
        }
        Command::Specialize {
            common,
            treebank,
            out_grammar,
            out_table,
        } => {
            let cfg = common.config()?;
            let specs = load_treebank(&treebank)?;
            let (g, table, report) = specialize_command(&common.lexicon()?, &common.general()?, &specs, cfg.k)?;
            write_file(&out_grammar, &g.to_file_string())?;
            write_file(&out_table, &table.to_text(&g))?;
            print!("{}", report.to_text());
            // Thresholds above 1 drop rare patterns, so full coverage is only
            // guaranteed without one.
            if cfg.k == 1 && report.covered != report.treebank_size {
                return Err(Error::Invariant(format!(
                    "specialised grammar covers {} of {} treebank trees",
                    report.covered, report.treebank_size
                )));
            }
        }
        Command::Train {
            common,
            nbest,
            refs,
            model_out,
            slt0_scoring,
        } => {
            let mut cfg = common.config()?;
            cfg.slt0_scoring |= slt0_scoring;
            let corpus = load_corpus(&nbest, Some(&refs))?;
            let (model, report) = train_pipeline(&corpus, &common.bundle()?, &cfg)?;
            model.save(&model_out)?;
            print!("{}", report.to_text());
        }
        Command::Select { common, nbest, model } => {
            let cfg = common.config()?;
            let bundle = common.bundle()?;
            let model = load_model(&model)?;
            for u in load_corpus(&nbest, None)? {
                let r = run_utterance(&u.truncated(cfg.nbest_n), &bundle, &model, &cfg)?;
                stdout_line(&r.to_json())?;
            }
        }
        Command::Evaluate {
            common,
            nbest,
            refs,
            model,
            json,
        } => {
            let cfg = common.config()?;
            let corpus = load_corpus(&nbest, Some(&refs))?;
            let (report, _) = evaluate(&corpus, &common.bundle()?, &load_model(&model)?, &cfg)?;
            print!("{}", report.to_text());
            if let Some(p) = json {
                write_file(&p, &(report.to_json() + "\n"))?;
            }
        }
        Command::GenCorpus { common, out, seed } => {
            let plan = DataPlan {
                seed,
                ..DataPlan::default()
            };
            let data = generate_all(&common.general()?, &common.lexicon()?, &plan);
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            write_file(&out.join("treebank.txt"), &treebank_to_string(&data.treebank))?;
            let heldout: Vec<String> = data.heldout.iter().map(|t| t.words().join(" ") + "\n").collect();
            write_file(&out.join("heldout.txt"), &heldout.concat())?;
            for (name, utts) in [("train", &data.train), ("eval", &data.eval), ("norepair", &data.norepair)] {
                write_file(&out.join(format!("{name}.nbest")), &nbest_to_string(utts))?;
                write_file(&out.join(format!("{name}.ref")), &references_to_string(utts))?;
            }
        }
    }
    Ok(())
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
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
