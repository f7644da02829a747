use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::RngCore;

use flexvault::adaptor::{self, ClientState, UpdateProof};
use flexvault::audit::{self, Challenge};
use flexvault::level::{Seed, SEED_LEN};
use flexvault::repo::{Config, Repository, TamperScope, DEFAULT_BLOCK_SIZE};
use flexvault::store::NodeSource;
use flexvault::{Digest, Error, HashAlg, Result};

#[derive(Parser)]
#[command(name = "flexvault", version, about = "Versioned, auditable block store")]
struct Cli {
    /// Repository directory.
    #[arg(long, global = true, default_value = ".")]
    repo: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum HashArg {
    Sha1,
    Sha256,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    VersionDelta,
    All,
}

#[derive(Subcommand)]
enum Cmd {
    /// Create a repository, optionally with an initial file as version 0.
    Init {
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
        block_size: usize,
        #[arg(long, value_enum, default_value = "sha1")]
        hash: HashArg,
        /// Level seed as hex (up to 10 bytes). Random when omitted.
        #[arg(long)]
        seed: Option<String>,
    },
    /// Commit a diff (or the difference to a new file) as the next version.
    Commit {
        #[arg(long, conflicts_with = "new_file", required_unless_present = "new_file")]
        diff: Option<PathBuf>,
        #[arg(long)]
        new_file: Option<PathBuf>,
        /// Replay the commit on the client side from an update proof and compare metadata.
        #[arg(long)]
        check: bool,
    },
    /// List versions.
    Log,
    /// Write the content of a version.
    Checkout {
        #[arg(long)]
        version: u64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Create a challenge file.
    Challenge {
        #[arg(long)]
        seed: String,
        #[arg(long)]
        count: u64,
        /// Comma-separated versions; the latest version when omitted.
        #[arg(long, value_delimiter = ',')]
        versions: Vec<u64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Answer a challenge.
    Prove {
        #[arg(long)]
        challenge: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Check a proof against the metadata.
    Verify {
        #[arg(long)]
        challenge: PathBuf,
        #[arg(long)]
        proof: PathBuf,
        /// Metadata to verify against; defaults to the repository's meta file.
        #[arg(long)]
        meta: Option<String>,
    },
    /// Check every node, version record and block.
    Fsck,
    /// Delete a fraction of stored blocks (for testing detection).
    Tamper {
        #[arg(long)]
        delete_fraction: f64,
        #[arg(long, value_enum, default_value = "version-delta")]
        scope: ScopeArg,
        #[arg(long)]
        version: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        allow_tamper: bool,
    },
    /// Write the byte diff between two files.
    Diff {
        old: PathBuf,
        new: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

/// Outcome that maps to a non-zero exit without being an error.
enum Outcome {
    Ok,
    Rejected,
}

fn emit(out: Option<&Path>, data: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, data)?,
        None => io::stdout().write_all(data)?,
    }
    Ok(())
}

fn read_challenge(p: &Path) -> Result<Challenge> {
    let text = fs::read_to_string(p)?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        what: "challenge",
        detail: e.to_string(),
    })
}

fn run(cli: Cli) -> Result<Outcome> {
    let repo_path = cli.repo.as_path();
    match cli.cmd {
        Cmd::Init {
            file,
            block_size,
            hash,
            seed,
        } => {
            let seed = match seed {
                Some(s) => s.parse()?,
                None => {
                    let mut raw = [0u8; SEED_LEN];
                    rand::thread_rng().fill_bytes(&mut raw);
                    Seed(raw)
                }
            };
            let hash = match hash {
                HashArg::Sha1 => HashAlg::Sha1,
                HashArg::Sha256 => HashAlg::Sha256,
            };
            let data = match file {
                Some(f) => fs::read(f)?,
                None => Vec::new(),
            };
            let repo = Repository::init(repo_path, Config { hash, block_size, seed }, &data)?;
            println!("initialized {}", repo_path.display());
            println!("version 0: {} bytes in {} blocks", data.len(), repo.layout(0)?.len());
            println!("seed {seed}");
            println!("meta {}", repo.meta()?);
        }
        Cmd::Commit { diff, new_file, check } => {
            let mut repo = Repository::open_writer(repo_path)?;
            let diffs = match (diff, new_file) {
                (Some(d), _) => adaptor::parse_diff(&fs::read(d)?)?,
                (None, Some(f)) => {
                    let old = repo.checkout(repo.latest().version)?;
                    adaptor::byte_diff(&old, &fs::read(f)?)?
                }
                (None, None) => unreachable!("clap requires one source"),
            };
            let (t, lengths) = repo.translate(&diffs)?;
            let client = if check {
                let proof = repo.update_proof(&t, &lengths)?.encode();
                let state = ClientState {
                    meta: repo.meta()?,
                    seed: repo.config().seed,
                    level_counter: repo.level_counter(),
                };
                Some((state, proof))
            } else {
                None
            };
            let r = repo.commit_translation(&t)?;
            println!("version {}", r.version);
            println!("ops {}", r.ops);
            println!("created nodes {}", r.created_nodes);
            println!("shared nodes {}", r.shared_nodes);
            println!("blocks added {}", r.blocks_added);
            println!("region {}+{}", r.region.0, r.region.1);
            println!("meta {}", r.meta);
            if let Some((state, bytes)) = client {
                let alg = repo.alg();
                let proof = UpdateProof::decode(alg, &bytes)?;
                let next = adaptor::client_commit(alg, &state, &proof, &t.ops, t.region)?;
                if next.meta != r.meta {
                    println!("client check: mismatch ({})", next.meta);
                    return Ok(Outcome::Rejected);
                }
                println!("client check: ok ({} proof bytes)", bytes.len());
            }
        }
        Cmd::Log => {
            let repo = Repository::open(repo_path)?;
            for rec in repo.versions() {
                let size = repo.arena().node(rec.root)?.rank;
                println!(
                    "{} {} size {} region {}+{}",
                    rec.version, rec.root_digest, size, rec.update_start, rec.update_length
                );
            }
        }
        Cmd::Checkout { version, out } => {
            let repo = Repository::open(repo_path)?;
            emit(out.as_deref(), &repo.checkout(version)?)?;
        }
        Cmd::Challenge {
            seed,
            count,
            versions,
            out,
        } => {
            let ch = Challenge {
                seed: seed.parse()?,
                count,
                versions,
            };
            let mut json = serde_json::to_string_pretty(&ch).expect("challenge serializes");
            json.push('\n');
            emit(out.as_deref(), json.as_bytes())?;
        }
        Cmd::Prove { challenge, out } => {
            let repo = Repository::open(repo_path)?;
            let ch = read_challenge(&challenge)?;
            let (proof, missing) = repo.prove(&ch, true)?;
            if missing > 0 {
                eprintln!("warning: {missing} challenged blocks unavailable; proof will not verify");
            }
            let bytes = proof.encode();
            fs::write(&out, &bytes)?;
            println!("proof {} bytes", bytes.len());
        }
        Cmd::Verify { challenge, proof, meta } => {
            let ch = read_challenge(&challenge)?;
            let bytes = fs::read(proof)?;
            let alg = Repository::open(repo_path)?.alg();
            let meta = match meta {
                Some(m) => m,
                None => fs::read_to_string(repo_path.join("meta"))?,
            };
            let meta = Digest::from_hex(meta.trim()).ok_or(Error::Format {
                what: "meta",
                detail: "expected a hex digest".into(),
            })?;
            match audit::verify_bytes(alg, &meta, &ch, &bytes) {
                Ok(()) => println!("accept"),
                Err(e @ Error::ProofRejected(_)) => {
                    println!("reject: {e}");
                    return Ok(Outcome::Rejected);
                }
                Err(e) => return Err(e),
            }
        }
        Cmd::Fsck => {
            let repo = Repository::open(repo_path)?;
            let problems = repo.fsck()?;
            if problems.is_empty() {
                println!("ok: {} versions, {} nodes", repo.versions().len(), repo.arena().len());
            } else {
                for p in &problems {
                    println!("{p}");
                }
                return Ok(Outcome::Rejected);
            }
        }
        Cmd::Tamper {
            delete_fraction,
            scope,
            version,
            seed,
            allow_tamper,
        } => {
            if !allow_tamper {
                eprintln!("error: tamper destroys data; pass --allow-tamper to proceed");
                std::process::exit(2);
            }
            let repo = Repository::open(repo_path)?;
            let scope = match scope {
                ScopeArg::VersionDelta => TamperScope::VersionDelta,
                ScopeArg::All => TamperScope::All,
            };
            let gone = repo.tamper(delete_fraction, scope, version, seed)?;
            println!("deleted {} blocks", gone.len());
        }
        Cmd::Diff { old, new, out } => {
            let diffs = adaptor::byte_diff(&fs::read(old)?, &fs::read(new)?)?;
            emit(out.as_deref(), &adaptor::write_diff(&diffs))?;
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Rejected) => ExitCode::from(1),
        Err(e @ Error::Io(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
