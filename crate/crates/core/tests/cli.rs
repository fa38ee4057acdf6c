mod common;

use std::path::Path;
use std::process::{Command, Output};

use octuple::codec::{encode_score, read_sequences};
use octuple::metrics::MetricReport;
use octuple::midi::parse_midi;
use octuple::pipeline::{read_labels, read_pairs, Labels};

fn octuple(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_octuple"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = octuple(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn corpus(dir: &Path) {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(41);
    for i in 0..4 {
        common::write_score(&dir.join(format!("p{i}.mid")), &common::random_score(&mut rng, 120));
    }
    common::write_score(&dir.join("line.mid"), &common::sixteenth_line(64, 48));
}

#[test]
fn tokenize_then_detokenize() {
    let dir = tempfile::tempdir().unwrap();
    let midi = dir.path().join("line.mid");
    common::write_score(&midi, &common::sixteenth_line(40, 48));
    let tokens = dir.path().join("line.txt");
    ok(&["tokenize", p(&midi), "-o", p(&tokens)]);
    let seqs = read_sequences(&std::fs::read_to_string(&tokens).unwrap()).unwrap();
    assert_eq!(seqs.len(), 1);
    assert_eq!(seqs[0].len(), 40);
    assert_eq!(seqs[0].provenance.source, "line.mid");

    let back = dir.path().join("back.mid");
    ok(&["detokenize", p(&tokens), "-o", p(&back)]);
    let score = parse_midi(&std::fs::read(&back).unwrap()).unwrap();
    assert_eq!(encode_score(&score).unwrap().tokens, seqs[0].tokens);

    let out = octuple(&["detokenize", p(&tokens), "-o", p(&back), "--index", "3"]);
    assert!(!out.status.success());
}

#[test]
fn segment_and_corrupt_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("corpus");
    corpus(&root);
    let run = |tag: &str, seed: &str| {
        let segs = dir.path().join(format!("segs{tag}.txt"));
        let pairs = dir.path().join(format!("pairs{tag}.txt"));
        ok(&["--max-len", "48", "segment", p(&root), "-o", p(&segs)]);
        ok(&["--seed", seed, "--max-len", "48", "corrupt", p(&segs), "-o", p(&pairs)]);
        (std::fs::read(&segs).unwrap(), std::fs::read(&pairs).unwrap())
    };
    let a = run("a", "5");
    let b = run("b", "5");
    assert_eq!(a, b);
    let c = run("c", "6");
    assert_eq!(a.0, c.0);
    assert_ne!(a.1, c.1);

    let seqs = read_sequences(std::str::from_utf8(&a.0).unwrap()).unwrap();
    let pairs = read_pairs(std::str::from_utf8(&a.1).unwrap()).unwrap();
    assert_eq!(pairs.len(), seqs.len());
    assert!(seqs.iter().all(|s| s.len() <= 48));
}

#[test]
fn config_file_drives_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("corpus");
    corpus(&root);
    let out = dir.path().join("segs.txt");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "max_seq_len = 20\nkinds = document-rotation\ninput = {}\noutput = {}\n",
            root.display(),
            out.display()
        ),
    )
    .unwrap();
    ok(&["--config", p(&cfg), "segment"]);
    let seqs = read_sequences(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(seqs.iter().all(|s| s.len() <= 20));
    let pairs = ok(&["--config", p(&cfg), "corrupt", p(&out), "-o", "/dev/stdout"]);
    let pairs = read_pairs(&pairs).unwrap();
    assert!(pairs.iter().all(|r| r.kind.name() == "document-rotation"));

    std::fs::write(&cfg, "max_seq_len = 1\n").unwrap();
    let bad = octuple(&["--config", p(&cfg), "segment", p(&root)]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("max_seq_len"));
}

#[test]
fn labels_command() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("corpus");
    common::write_score(&root.join("a.mid"), &common::sixteenth_line(30, 48));
    common::write_score(&root.join("sub/b.mid"), &common::sixteenth_line(10, 60));

    let vel = ok(&["--max-len", "16", "labels", p(&root), "--task", "velocity"]);
    let blocks = read_labels(&vel).unwrap();
    assert_eq!(blocks.len(), 3);
    assert!(blocks.iter().all(|(t, l)| t == "velocity" && matches!(l, Labels::Token(_))));

    let table = dir.path().join("emotion.csv");
    std::fs::write(&table, "a.mid,LVHA\nsub/b.mid,1\n").unwrap();
    let seq = ok(&["labels", p(&root), "--task", "sequence-class", "--table", p(&table), "--name", "emotion"]);
    assert_eq!(seq, "@seqlabel task=emotion label=2\n@seqlabel task=emotion label=1\n");

    let notes = dir.path().join("notes");
    std::fs::create_dir_all(notes.join("sub")).unwrap();
    let rows = |n: usize| (0..n).map(|i| format!("{i},{}\n", i % 3)).collect::<String>();
    std::fs::write(notes.join("a.csv"), rows(30)).unwrap();
    std::fs::write(notes.join("sub/b.csv"), rows(9)).unwrap();
    let bad = octuple(&["labels", p(&root), "--task", "melody", "--notes-dir", p(&notes)]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("9 labels for 10 notes"));
    std::fs::write(notes.join("sub/b.csv"), rows(10)).unwrap();
    ok(&["labels", p(&root), "--task", "melody", "--notes-dir", p(&notes)]);
}

#[test]
fn metrics_and_stats_commands() {
    let dir = tempfile::tempdir().unwrap();
    let midi = dir.path().join("x.mid");
    common::write_score(&midi, &common::sixteenth_line(64, 48));
    let tokens = dir.path().join("x.txt");
    ok(&["tokenize", p(&midi), "-o", p(&tokens)]);
    let kv = ok(&[
        "metrics", "--generated", p(&tokens), "--ground-truth", p(&tokens), "--prompt", p(&tokens), "--format", "kv",
    ]);
    assert_eq!(kv, "pfs_gt=1.000000\npfs_prompt=1.000000\npche_abs_diff=0.000000\ngs_abs_diff=0.000000\n");
    assert!(MetricReport::<f64>::from_key_values(&kv).is_some());
    let table = ok(&["metrics", "--generated", p(&tokens), "--ground-truth", p(&tokens), "--prompt", p(&tokens)]);
    assert!(table.starts_with("metric"));

    let stats = ok(&["stats", p(dir.path())]);
    assert!(stats.contains("files=1\n") && stats.contains("notes=64\n"), "{stats}");

    let empty = tempfile::tempdir().unwrap();
    let out = octuple(&["segment", p(empty.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no MIDI files"));
    assert!(ok(&["stats", p(empty.path())]).contains("files=0\n"));
}

#[test]
fn keep_bar_ids_flag() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("corpus");
    corpus(&root);
    let segs = dir.path().join("segs.txt");
    let cfg = dir.path().join("rot.cfg");
    std::fs::write(&cfg, "kinds = document-rotation\n").unwrap();
    ok(&["--max-len", "40", "segment", p(&root), "-o", p(&segs)]);
    let bars = |r: &octuple::pipeline::PairRecord, src: bool| -> Vec<u32> {
        let t = if src { &r.source } else { &r.target };
        t.iter().filter_map(|t| t.bar()).collect()
    };

    let renumbered = read_pairs(&ok(&["--config", p(&cfg), "corrupt", p(&segs)])).unwrap();
    assert!(renumbered.iter().all(|r| bars(r, true).windows(2).all(|w| w[0] <= w[1])));

    let kept = read_pairs(&ok(&["--config", p(&cfg), "--keep-bar-ids", "corrupt", p(&segs)])).unwrap();
    let mut rotated_somewhere = false;
    for r in &kept {
        let (mut s, mut t) = (bars(r, true), bars(r, false));
        rotated_somewhere |= s != t;
        s.sort_unstable();
        t.sort_unstable();
        assert_eq!(s, t);
    }
    assert!(rotated_somewhere);
}
