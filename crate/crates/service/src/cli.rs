//! `hpde` subcommands. Usage errors exit with 2, runtime failures with 1.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use hermite_pde::benchmark::run_dfg;
use hermite_pde::domain::DomainSpec;
use hermite_pde::field::{PdeKind, RenderField};
use hermite_pde::io::{export_fields, load_state, save_state};
use hermite_pde::model::Checkpoint;
use hermite_pde::residual::{draw_samples, evaluate_loss, LossWeights, SamplePlan};
use hermite_pde::training::{train, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, ServiceError};
use crate::session::{default_domain, Session};

#[derive(Debug, Parser)]
#[command(name = "hpde", about = "Train, run and serve spline PDE surrogate models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PdeArg {
    Flow,
    Wave,
}

impl From<PdeArg> for PdeKind {
    fn from(p: PdeArg) -> Self {
        match p {
            PdeArg::Flow => PdeKind::Flow,
            PdeArg::Wave => PdeKind::Wave,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write its checkpoint.
    Train {
        #[arg(long, value_enum)]
        pde: PdeArg,
        /// JSON training config; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's step count.
        #[arg(long)]
        steps: Option<usize>,
        /// Metrics log file; stdout when omitted.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Roll a checkpoint out on a domain from rest, logging losses.
    Simulate {
        #[arg(long)]
        ckpt: PathBuf,
        /// Domain JSON file.
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        steps: usize,
        /// Output directory for `losses.csv`, `state.hpst` and `fields.snf`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Drag and lift on the cylinder channel.
    EvalDfg {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, value_parser = ["2", "20", "100"])]
        re: String,
        #[arg(long, default_value_t = 300)]
        steps: usize,
        #[arg(long, default_value_t = 50)]
        warmup: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Interactive WebSocket session.
    Serve {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        port: u16,
        #[arg(long, value_enum)]
        pde: PdeArg,
        /// Domain JSON file; a default channel or basin when omitted.
        #[arg(long)]
        domain: Option<PathBuf>,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Render fields of a state file into an `.snf` raster.
    Export {
        #[arg(long)]
        state: PathBuf,
        /// Field name, or several separated by commas.
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 1)]
        upsample: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(ServiceError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} does not exist", path.display()),
        )))
    }
}

fn load_domain(path: &Path) -> Result<DomainSpec> {
    require(path)?;
    let d: DomainSpec = serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?;
    d.validate()?;
    Ok(d)
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Train {
            pde,
            config,
            out,
            steps,
            log,
        } => {
            let mut cfg = match &config {
                Some(p) => {
                    require(p)?;
                    TrainConfig::from_json_file(p)?
                }
                None => TrainConfig::default_for(pde.into()),
            };
            if cfg.pde != PdeKind::from(pde) {
                return Err(ServiceError::Rejected(format!("config is for {:?}, not {pde:?}", cfg.pde)));
            }
            if let Some(s) = steps {
                cfg.steps = s;
            }
            let mut sink: Box<dyn Write> = match log {
                Some(p) => Box::new(BufWriter::new(File::create(p)?)),
                None => Box::new(std::io::stdout()),
            };
            train(cfg, Some(&mut *sink), Some(&out))?;
            sink.flush()?;
            Ok(())
        }
        Command::Simulate {
            ckpt,
            domain,
            steps,
            out,
            seed,
        } => {
            require(&ckpt)?;
            let model = Checkpoint::load(&ckpt)?.model;
            let domain = load_domain(&domain)?;
            std::fs::create_dir_all(&out)?;
            let kind = model.layout().kind();
            let mut session = Session::new(model, domain)?;
            let mut log = BufWriter::new(File::create(out.join("losses.csv"))?);
            writeln!(log, "step,{},L_b,L_v,L_tot", if kind == PdeKind::Flow { "L_p" } else { "L_z" })?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let weights = LossWeights::default_for(kind);
            for _ in 0..steps {
                session.step()?;
                let s = session.state();
                let frame = session.domain().frame(s.t1());
                let samples = draw_samples(&frame, &SamplePlan::default(), s.t0(), s.dt(), &mut rng)?;
                let r = evaluate_loss(s, &frame, &samples, &weights, None)?;
                writeln!(
                    log,
                    "{},{:.6e},{:.6e},{:.6e},{:.6e}",
                    session.steps(),
                    r.l_p + r.l_z,
                    r.l_b,
                    r.l_v,
                    r.l_tot
                )?;
            }
            log.flush()?;
            save_state(session.state(), &out.join("state.hpst"))?;
            let fields: &[RenderField] = match kind {
                PdeKind::Flow => &[RenderField::Vx, RenderField::Vy, RenderField::P],
                PdeKind::Wave => &[RenderField::Z, RenderField::Vz],
            };
            export_fields(session.state(), fields, 1)?.save(&out.join("fields.snf"))?;
            Ok(())
        }
        Command::EvalDfg {
            ckpt,
            re,
            steps,
            warmup,
            out,
            seed,
        } => {
            require(&ckpt)?;
            let model = Checkpoint::load(&ckpt)?.model;
            let re: u32 = re.parse().expect("validated by clap");
            let report = run_dfg(&model, re, steps, warmup, seed)?;
            let mut w = BufWriter::new(File::create(&out)?);
            report.write_csv(&mut w)?;
            w.flush()?;
            let (cd, cl) = (report.c_d(), report.c_l());
            println!(
                "Re={re}: C_D {:.4}/{:.4}/{:.4}  C_L {:.4}/{:.4}/{:.4}",
                cd.min, cd.avg, cd.max, cl.min, cl.avg, cl.max
            );
            Ok(())
        }
        Command::Serve {
            ckpt,
            port,
            pde,
            domain,
            width,
            height,
            host,
        } => {
            require(&ckpt)?;
            let model = Checkpoint::load(&ckpt)?.model;
            let kind = PdeKind::from(pde);
            if model.layout().kind() != kind {
                return Err(ServiceError::Rejected(format!(
                    "checkpoint holds a {:?} model",
                    model.layout().kind()
                )));
            }
            let domain = match domain {
                Some(p) => load_domain(&p)?,
                None => default_domain(kind, width, height),
            };
            Session::new(model.clone(), domain.clone())?;
            let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                eprintln!("listening on ws://{}", listener.local_addr()?);
                crate::server::serve(listener, model, domain).await
            })
        }
        Command::Export {
            state,
            field,
            upsample,
            out,
        } => {
            require(&state)?;
            let state = load_state(&state)?;
            let fields = field
                .split(',')
                .map(|f| f.trim().parse::<RenderField>())
                .collect::<hermite_pde::Result<Vec<_>>>()?;
            export_fields(&state, &fields, upsample)?.save(&out)?;
            Ok(())
        }
    }
}
