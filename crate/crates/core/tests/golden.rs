//! Frozen vectors computed outside this crate with Python's hashlib.
//!
//! The list digests come from a small recursive model that follows the
//! structural rule directly: node `(t, l)` exists iff `l == 0` or the next
//! tower reaching level `l` stops exactly at `l`; `after` points to that
//! tower's top node and `below` to the highest node of `t` under `l`.
//!
//! ```text
//! u64 = big-endian 8 bytes, A(x) = 01|x or 00|zeros(W)
//! leaf      H(01 | u64(0) | u64(rank) | A(after) | u64(len) | H(block))
//! internal  H(00 | u64(level) | u64(rank) | below | A(after))
//! sentinel  H(02 | u64(level) | u64(rank) | A(after))
//! record    H(03 | u64(version) | root | u64(start) | u64(len))
//! level     leading ones of SHA256(tag | seed | u64(counter))
//! challenge SHA256("flexvault/challenge" | seed | u64(version) | u64(ctr))[..8]
//!           rejected when >= 2^64-1 - (2^64-1) % len, else start + x % len
//! ```

use flexvault::audit::{expand_challenge, Challenge};
use flexvault::flexlist::build_with_levels;
use flexvault::index2::record_digest;
use flexvault::level::{LevelDomain, LevelSource, Seed};
use flexvault::node::{node_digest, Material};
use flexvault::store::{NodeArena, NodeSource};
use flexvault::{HashAlg, LeafPayload};

const SHA1: HashAlg = HashAlg::Sha1;

fn list_digest(blocks: &[(&[u8], u8)]) -> (u64, String) {
    let mut store = NodeArena::new(SHA1);
    let with: Vec<_> = blocks.iter().map(|(b, l)| (LeafPayload::for_block(SHA1, b), *l)).collect();
    let root = build_with_levels(&mut store, &with, 0).unwrap();
    let (rank, digest) = store.summary(root).unwrap();
    (rank, digest.to_hex())
}

#[test]
fn hash_functions() {
    assert_eq!(SHA1.hash(b"hello").to_hex(), "aaf4c61ddcc5e8a2dabede0f3b482cd9aea9434d");
}

#[test]
fn node_encodings() {
    let x = SHA1.hash(b"x");
    let y = SHA1.hash(b"y");
    let internal = node_digest(SHA1, 3, 90, Material::Internal { below: &x, after: Some(&y) });
    assert_eq!(internal.to_hex(), "b25161d5535ce8b10b8f6e5b97345e56f39e146c");
    let sentinel = node_digest(SHA1, 0, 0, Material::Sentinel { after: None });
    assert_eq!(sentinel.to_hex(), "b9db7bd1e0ca61f9cc302b14c778b9ffa65544f0");

    let alg = HashAlg::Sha256;
    let b = alg.hash(b"hello");
    let leaf = node_digest(alg, 0, 5, Material::Leaf { after: None, length: 5, block: &b });
    assert_eq!(leaf.to_hex(), "3e14cfb83ee7d357743501119861e3ce93295126f676234d8c9208da3d95f94d");
}

#[test]
fn whole_lists() {
    assert_eq!(list_digest(&[]), (0, "1a20f180485cd4b0dc9cc270151a1da6f9f7f032".into()));
    assert_eq!(
        list_digest(&[(b"aaa", 2), (b"bb", 0), (b"cccc", 1)]),
        (9, "b76ca94086e1d9813ba7f6aa067071af4653da09".into())
    );
    assert_eq!(
        list_digest(&[(b"xxxxxxx", 0), (b"yy", 3), (b"z", 1), (b"wwww", 3), (b"vvv", 0)]),
        (17, "28747fedde0e68e007dff4cdf2d8545ca78a93fc".into())
    );
}

#[test]
fn level_streams() {
    let seed: Seed = "0102".parse().unwrap();
    let draw = |domain| {
        let mut src = LevelSource::new(seed, domain);
        (0..16).map(|_| src.draw()).collect::<Vec<u8>>()
    };
    assert_eq!(draw(LevelDomain::Data), [2, 0, 1, 2, 1, 2, 0, 0, 0, 0, 1, 0, 0, 0, 2, 0]);
    assert_eq!(draw(LevelDomain::Index), [3, 2, 0, 2, 0, 0, 1, 1, 1, 0, 0, 0, 1, 1, 0, 0]);
}

#[test]
fn challenge_indices() {
    let ch = Challenge {
        seed: "ab".parse().unwrap(),
        count: 4,
        versions: vec![1],
    };
    assert_eq!(expand_challenge(&ch, 1, (100, 50)).unwrap(), [130, 146, 149, 127]);
}

#[test]
fn version_record() {
    let d = record_digest(SHA1, 3, &SHA1.hash(b"r"), 10, 20);
    assert_eq!(d.to_hex(), "5257f9b20bdf952e33b6b5b36fa5427504fd7f1c");
}
