//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Every random input comes from a fixed seed.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_diffs, random_ops, Blocks, Model};
use flexvault::adaptor::{self, apply_diffs, apply_ops_to_blocks, diff_to_ops, ClientState};
use flexvault::audit::{detection_probability, Challenge};
use flexvault::flexlist::{build, build_with_levels, check_structure, descend, split_blocks, SearchMode};
use flexvault::index2::{VersionIndex, VersionRecord};
use flexvault::level::{LevelDomain, LevelSource, Seed};
use flexvault::persist::{apply_ops, materialize, BlockOp};
use flexvault::repo::{Config, Repository, TamperScope};
use flexvault::store::{NodeArena, NodeSource};
use flexvault::{HashAlg, LeafPayload, NodeId};

const ALG: HashAlg = HashAlg::Sha1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn seed_from(n: u64) -> Seed {
    Seed(n.to_be_bytes().iter().copied().chain([0xa5, 0x5a]).collect::<Vec<_>>().try_into().unwrap())
}

fn random_bytes(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.gen()).collect()
}

/// Deleting 10% of a version's 100 delta blocks is caught at the rate
/// `1 - 0.9^r`: 0.878 ± 0.03 at r = 20 and 0.989 ± 0.01 at r = 43, over 1000
/// challenges each, in under 60 seconds.
fn tamper_detection() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let bs = 2048;
    let cfg = Config {
        hash: ALG,
        block_size: bs,
        seed: seed_from(1),
    };
    let mut repo = Repository::init(&dir.path().join("r"), cfg, &random_bytes(&mut rng, 300 * bs)).unwrap();
    let fresh = random_bytes(&mut rng, 100 * bs);
    let diff = [adaptor::DiffEntry::Replace {
        at: (100 * bs) as u64,
        len: (100 * bs) as u64,
        bytes: fresh,
    }];
    let report = repo.commit(&diff).unwrap();
    let deleted = repo.tamper(0.1, TamperScope::VersionDelta, Some(1), 7).unwrap();
    if report.ops != 100 || deleted.len() != 10 {
        return outcome(false, format!("setup: {} ops, {} deleted", report.ops, deleted.len()));
    }
    let mut rates = Vec::new();
    for r in [20u64, 43] {
        let mut caught = 0;
        for trial in 0..1000u64 {
            let ch = Challenge {
                seed: seed_from(r << 32 | trial),
                count: r,
                versions: vec![1],
            };
            let (proof, _) = repo.prove(&ch, true).unwrap();
            if repo.verify(&ch, &proof.encode()).is_err() {
                caught += 1;
            }
        }
        rates.push(caught as f64 / 1000.0);
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = (rates[0] - 0.878).abs() <= 0.03 && (rates[1] - 0.989).abs() <= 0.01 && secs < 60.0;
    outcome(
        ok,
        format!("r=20 rate {:.3} (0.878±0.03), r=43 rate {:.3} (0.989±0.01), {secs:.1}s (<60s)", rates[0], rates[1]),
    )
}

/// A 1% corruption needs 460 samples for 99% detection: the analytic rate
/// lies in [0.985, 0.995].
fn analytic_detection() -> Outcome {
    let p = detection_probability(0.01, 460).unwrap();
    outcome((0.985..=0.995).contains(&p), format!("P(0.01, 460) = {p:.4} in [0.985, 0.995]"))
}

fn fresh_list(rng: &mut ChaCha8Rng, n: usize, seed: Seed) -> (NodeArena, NodeId, Model, LevelSource, Blocks) {
    let contents: Vec<Vec<u8>> = (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=6);
            random_bytes(rng, len)
        })
        .collect();
    let mut blocks = Blocks::default();
    for c in &contents {
        blocks.put(ALG, c);
    }
    let mut arena = NodeArena::new(ALG);
    let payloads: Vec<_> = contents.iter().map(|c| LeafPayload::for_block(ALG, c)).collect();
    let (root, levels) = build(&mut arena, &payloads, LevelSource::new(seed, LevelDomain::Data), 0).unwrap();
    let mut draws = LevelSource::new(seed, LevelDomain::Data);
    let model = Model::new(contents.into_iter().map(|c| (c, draws.draw())).collect());
    (arena, root, model, levels, blocks)
}

/// 1000 random operation sequences on lists of at most 64 blocks: after
/// every commit the root equals a fresh build of the model.
fn oracle_sequences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut commits = 0;
    for seq in 0..1000u64 {
        let n = rng.gen_range(0..=64);
        let (mut arena, mut root, mut model, mut levels, _) = fresh_list(&mut rng, n, seed_from(seq));
        for v in 1..=rng.gen_range(1..=5u64) {
            let ops = random_ops(&mut rng, &model, 8, 64);
            let res = apply_ops(&arena, root, &ops, levels, v).unwrap();
            for op in &ops {
                model.apply(op, &mut levels);
            }
            root = res.root;
            arena.extend(res.staged.first, res.staged.nodes).unwrap();
            commits += 1;
            if arena.summary(root).unwrap() != model.root(ALG) || check_structure(&arena, root).is_err() {
                return outcome(false, format!("sequence {seq}, commit {v} diverged from the oracle"));
            }
        }
    }
    outcome(true, format!("1000 sequences, {commits} commits, all equal to a fresh build"))
}

/// 200 commits on a 256 KiB file: every snapshot checks out byte-exact and
/// keeps its root digest.
fn long_history() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = Config {
        hash: ALG,
        block_size: 2048,
        seed: seed_from(4),
    };
    let mut snapshots = vec![random_bytes(&mut rng, 256 * 1024)];
    let path = dir.path().join("r");
    let mut repo = Repository::init(&path, cfg, &snapshots[0]).unwrap();
    while snapshots.len() < 201 {
        let cur = snapshots.last().unwrap();
        let diffs = random_diffs(&mut rng, cur.len() as u64, 3, 600);
        let next = apply_diffs(cur, &diffs).unwrap();
        match repo.commit(&diffs) {
            Ok(_) => snapshots.push(next),
            Err(flexvault::Error::EmptyCommit) if next == *cur => {}
            Err(e) => return outcome(false, format!("commit {}: {e}", snapshots.len())),
        }
    }
    let roots: Vec<_> = repo.versions().iter().map(|r| r.root_digest).collect();
    drop(repo);
    let repo = Repository::open(&path).unwrap();
    for (v, s) in snapshots.iter().enumerate() {
        let rec = &repo.versions()[v];
        if repo.checkout(v as u64).unwrap() != *s || repo.arena().summary(rec.root).unwrap().1 != roots[v] {
            return outcome(false, format!("version {v} changed"));
        }
    }
    let problems = repo.fsck().unwrap();
    outcome(
        problems.is_empty(),
        format!("201 versions byte-exact after reopen, {} nodes, fsck {} problems", repo.arena().len(), problems.len()),
    )
}

/// 500 insert-then-remove pairs restore the original root digest.
fn inverse_pairs() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..500u64 {
        let n = rng.gen_range(0..=64);
        let (mut arena, root, model, levels, _) = fresh_list(&mut rng, n, seed_from(trial));
        let before = arena.summary(root).unwrap();
        let starts = model.starts();
        let at = starts[rng.gen_range(0..starts.len())];
        let len = rng.gen_range(1..=9);
        let data = random_bytes(&mut rng, len);
        let ins = apply_ops(&arena, root, &[BlockOp::Insert { offset: at, data }], levels, 1).unwrap();
        arena.extend(ins.staged.first, ins.staged.nodes).unwrap();
        let rem = apply_ops(&arena, ins.root, &[BlockOp::Remove { offset: at }], ins.levels, 2).unwrap();
        arena.extend(rem.staged.first, rem.staged.nodes).unwrap();
        if arena.summary(rem.root).unwrap() != before {
            return outcome(false, format!("trial {trial}: insert at {at} then remove changed the root"));
        }
    }
    outcome(true, "500 pairs restore the root digest")
}

fn one_byte_list(b: usize, seed: Seed) -> (NodeArena, NodeId, Vec<u8>) {
    let mut arena = NodeArena::new(ALG);
    let mut src = LevelSource::new(seed, LevelDomain::Data);
    let blocks: Vec<_> = (0..b)
        .map(|i| {
            let l = src.draw();
            (LeafPayload::for_block(ALG, &[i as u8]), l)
        })
        .collect();
    let levels = blocks.iter().map(|(_, l)| *l).collect();
    let root = build_with_levels(&mut arena, &blocks, 0).unwrap();
    (arena, root, levels)
}

/// With 4096 blocks the fraction of towers reaching level k is 2^-k
/// (± 0.015, k = 1..6) and the mean search path has at most 30 nodes.
fn level_distribution() -> Outcome {
    let b = 4096;
    let (arena, root, levels) = one_byte_list(b, seed_from(6));
    let mut worst = 0f64;
    let mut fracs = Vec::new();
    for k in 1..=6u8 {
        let f = levels.iter().filter(|&&l| l >= k).count() as f64 / b as f64;
        worst = worst.max((f - 0.5f64.powi(k as i32)).abs());
        fracs.push(format!("{f:.4}"));
    }
    // Every block is one byte long here, so indices and blocks coincide.
    let total: usize = (0..b as u64)
        .map(|i| descend(&arena, root, i, SearchMode::Containing).unwrap().len())
        .sum();
    let mean = total as f64 / b as f64;
    outcome(
        worst <= 0.015 && mean <= 30.0,
        format!("P(level>=k) k=1..6 [{}], max deviation {worst:.4} (<=0.015), mean path {mean:.2} (<=30)", fracs.join(", ")),
    )
}

/// A single-block modify on 4096 blocks creates at most 36 nodes at p99.
fn modify_cost() -> Outcome {
    let (arena, root, _) = one_byte_list(4096, seed_from(7));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut created: Vec<usize> = (0..1000)
        .map(|_| {
            let op = BlockOp::Modify {
                offset: rng.gen_range(0..4096),
                data: b"modified".to_vec(),
            };
            let src = LevelSource::new(seed_from(7), LevelDomain::Data);
            apply_ops(&arena, root, &[op], src, 1).unwrap().created_nodes()
        })
        .collect();
    created.sort_unstable();
    let p99 = created[989];
    outcome(p99 <= 36, format!("p99 {p99} nodes (<=36), max {}", created[999]))
}

/// Every single-bit flip of a 16-block audit proof is rejected.
fn exhaustive_bit_flips() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = Config {
        hash: ALG,
        block_size: 8,
        seed: seed_from(8),
    };
    let mut repo = Repository::init(&dir.path().join("r"), cfg, &random_bytes(&mut rng, 96)).unwrap();
    repo.commit(&[adaptor::DiffEntry::Insert {
        at: 40,
        bytes: random_bytes(&mut rng, 32),
    }])
    .unwrap();
    if repo.layout(1).unwrap().len() != 16 {
        return outcome(false, "setup did not produce 16 blocks");
    }
    let ch = Challenge {
        seed: seed_from(8),
        count: 4,
        versions: vec![0, 1],
    };
    let bytes = repo.prove(&ch, false).unwrap().0.encode();
    if repo.verify(&ch, &bytes).is_err() {
        return outcome(false, "honest proof rejected");
    }
    let mut accepted = 0;
    for bit in 0..bytes.len() * 8 {
        let mut b = bytes.clone();
        b[bit / 8] ^= 1 << (bit % 8);
        if repo.verify(&ch, &b).is_ok() {
            accepted += 1;
        }
    }
    outcome(accepted == 0, format!("{} flips over {} bytes, {accepted} accepted", bytes.len() * 8, bytes.len()))
}

/// 1000 random diffs on files up to 4 KiB: the block-level result matches
/// byte-level application and the client's replayed metadata matches the
/// server's.
fn diff_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..1000u64 {
        let seed = seed_from(trial);
        let bs = [1, 7, 64, 256, 512, 1024][rng.gen_range(0..6)];
        let len = rng.gen_range(0..=4096);
        let data = random_bytes(&mut rng, len);
        let mut blocks = Blocks::default();

        let mut arena = NodeArena::new(ALG);
        let mut index = VersionIndex::new(&mut arena, seed).unwrap();
        let chunks: Vec<Vec<u8>> = split_blocks(&data, bs).into_iter().map(<[u8]>::to_vec).collect();
        for c in &chunks {
            blocks.put(ALG, c);
        }
        let payloads: Vec<_> = chunks.iter().map(|c| LeafPayload::for_block(ALG, c)).collect();
        let (root, mut levels) = build(&mut arena, &payloads, LevelSource::new(seed, LevelDomain::Data), 0).unwrap();
        let rec = VersionRecord {
            version: 0,
            root,
            root_digest: arena.summary(root).unwrap().1,
            update_start: 0,
            update_length: len as u64,
        };
        let mut meta = index.append_version(&mut arena, rec).unwrap();
        let (mut root, mut content) = (root, data);
        let mut cur_blocks = chunks;

        // Two commits, so the second starts from a level stream in use.
        for v in 1..=2u64 {
            // Tiny blocks turn every edited byte into an operation; keep those edits short.
            let max_insert = if bs < 64 { 120 } else { 700 };
            let diffs = random_diffs(&mut rng, content.len() as u64, 4, max_insert);
            let expect = apply_diffs(&content, &diffs).unwrap();
            let lengths: Vec<u64> = cur_blocks.iter().map(|b| b.len() as u64).collect();
            let t = diff_to_ops(&diffs, &lengths, bs, |i| Ok(cur_blocks[i].clone())).unwrap();
            let mut after = cur_blocks.clone();
            apply_ops_to_blocks(&mut after, &t.ops).unwrap();
            if after.concat() != expect {
                return outcome(false, format!("trial {trial}: block result differs from byte result"));
            }
            if t.ops.is_empty() {
                break;
            }
            let queries = adaptor::coverage_queries(&lengths, &t.clusters);
            let proof = adaptor::update_proof(&arena, &index, &queries).unwrap();
            let state = ClientState {
                meta,
                seed,
                level_counter: levels.counter,
            };
            let client = match adaptor::client_commit(ALG, &state, &proof, &t.ops, t.region) {
                Ok(c) => c,
                Err(e) => return outcome(false, format!("trial {trial}: client replay failed: {e}")),
            };

            let res = apply_ops(&arena, root, &t.ops, levels, v).unwrap();
            arena.extend(res.staged.first, res.staged.nodes).unwrap();
            blocks.put_ops(ALG, &t.ops);
            let rec = VersionRecord {
                version: v,
                root: res.root,
                root_digest: arena.summary(res.root).unwrap().1,
                update_start: t.region.0,
                update_length: t.region.1,
            };
            meta = index.append_version(&mut arena, rec).unwrap();
            if client.meta != meta || client.level_counter != res.levels.counter {
                return outcome(false, format!("trial {trial}, commit {v}: client metadata differs"));
            }
            if materialize(&arena, res.root, |b, l| blocks.fetch(b, l)).unwrap() != expect {
                return outcome(false, format!("trial {trial}: stored version differs"));
            }
            root = res.root;
            levels = res.levels;
            content = expect;
            cur_blocks = after;
        }
    }
    outcome(true, "1000 files, block result = byte result, client metadata = server metadata")
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("tamper detection rate", tamper_detection),
        ("analytic detection probability", analytic_detection),
        ("random sequences vs oracle", oracle_sequences),
        ("200-commit history", long_history),
        ("insert/remove inverses", inverse_pairs),
        ("level distribution and path length", level_distribution),
        ("nodes created per modify", modify_cost),
        ("exhaustive proof bit flips", exhaustive_bit_flips),
        ("diff translation and client replay", diff_consistency),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {verdict} {name}: {} [{:.1}s]", i + 1, o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
