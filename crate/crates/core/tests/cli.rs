mod common;

use std::ffi::{OsStr, OsString};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nestegg::image_io::{self, PixelGrid};
use nestegg::mp3::fixture;
use nestegg::rng::SplitMix64;
use nestegg::StegoKey;

use common::{check_locality, random_bytes, random_grid};

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn image(&self, name: &str, grid: &PixelGrid) -> PathBuf {
        let p = self.path(name);
        image_io::save_image(grid, &p).unwrap();
        p
    }

    fn bytes(&self, name: &str, data: &[u8]) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, data).unwrap();
        p
    }
}

macro_rules! argv {
    ($($a:expr),* $(,)?) => {
        vec![$(OsString::from(AsRef::<OsStr>::as_ref(&$a))),*]
    };
}

fn nestegg(args: Vec<OsString>) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nestegg"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn field(text: &str, key: &str) -> Option<String> {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
}

fn embed_args(cover: &Path, payload: &Path, out: &Path, key: &Path) -> Vec<OsString> {
    argv![
        "embed",
        "--cover",
        cover,
        "--payload",
        payload,
        "--out",
        out,
        "--key",
        key,
        "--gens",
        "20"
    ]
}

#[test]
fn embed_then_extract_round_trip() {
    let ws = Workspace::new();
    let mut rng = SplitMix64::new(1);
    let cover_grid = random_grid(64, 64, &mut rng);
    let payload = random_bytes(300, &mut rng);
    let cover = ws.image("cover.pgm", &cover_grid);
    let input = ws.bytes("payload.bin", &payload);
    let (stego, key) = (ws.path("stego.pgm"), ws.path("key.bin"));

    let out = nestegg(embed_args(&cover, &input, &stego, &key));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stego.exists() && key.exists());
    let text = stdout(&out);
    for k in ["mse", "psnr_db", "ssim", "z", "payload_bytes", "nests_used"] {
        assert!(field(&text, k).is_some(), "missing {k} in {text}");
    }
    assert_eq!(field(&text, "payload_bytes").unwrap(), "300");

    let stego_grid = image_io::load_image(&stego).unwrap();
    check_locality(&cover_grid, &stego_grid, &StegoKey::load(&key).unwrap()).unwrap();

    let recovered = ws.path("recovered.bin");
    let out = nestegg(argv![
        "extract", "--stego", stego, "--key", key, "--out", recovered
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(&recovered).unwrap(), payload);
}

#[test]
fn png_stego_round_trip() {
    let ws = Workspace::new();
    let mut rng = SplitMix64::new(2);
    let cover = ws.image("cover.png", &random_grid(48, 48, &mut rng));
    let payload = ws.bytes("p.bin", b"hidden in a png");
    let (stego, key) = (ws.path("stego.png"), ws.path("k.bin"));
    assert_eq!(
        code(&nestegg(embed_args(&cover, &payload, &stego, &key))),
        0
    );
    assert_eq!(&fs::read(&stego).unwrap()[1..4], b"PNG");
    let out_path = ws.path("out.bin");
    let out = nestegg(argv![
        "extract", "--stego", stego, "--key", key, "--out", out_path
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(&out_path).unwrap(), b"hidden in a png");
}

#[test]
fn bad_flags_exit_3() {
    let ws = Workspace::new();
    let mut rng = SplitMix64::new(3);
    let cover = ws.image("c.pgm", &random_grid(32, 32, &mut rng));
    let payload = ws.bytes("p.bin", b"x");
    let (stego, key) = (ws.path("s.pgm"), ws.path("k.bin"));
    let base = embed_args(&cover, &payload, &stego, &key);
    for extra in [
        vec!["--k", "9"],
        vec!["--k", "0"],
        vec!["--alpha", "1.5"],
        vec!["--pa", "2"],
        vec!["--pop", "1"],
        vec!["--lambda", "0.5"],
        vec!["--nest-size", "1"],
        vec!["--mode", "random"],
        vec!["--bogus"],
    ] {
        let mut args = base.clone();
        args.extend(extra.iter().map(OsString::from));
        let out = nestegg(args);
        assert_eq!(code(&out), 3, "{extra:?}: {}", stderr(&out));
        assert!(!stego.exists());
    }
    assert_eq!(code(&nestegg(argv!["embed"])), 3);
    assert_eq!(code(&nestegg(argv!["--help"])), 0);
    assert_eq!(code(&nestegg(argv!["--version"])), 0);
}

#[test]
fn oversize_payload_exits_1_with_counts() {
    let ws = Workspace::new();
    let mut rng = SplitMix64::new(4);
    let cover = ws.image("c.pgm", &random_grid(40, 40, &mut rng));
    // 4 nests of 256 pixels at k=1 hold 128 bytes
    let payload = ws.bytes("p.bin", &[7; 129]);
    let (stego, key) = (ws.path("s.pgm"), ws.path("k.bin"));
    let out = nestegg(embed_args(&cover, &payload, &stego, &key));
    assert_eq!(code(&out), 1);
    assert!(
        stderr(&out).contains("required=1032 available=1024"),
        "{}",
        stderr(&out)
    );
    assert!(!stego.exists() && !key.exists());
}

#[test]
fn io_and_format_errors_exit_2() {
    let ws = Workspace::new();
    let mut rng = SplitMix64::new(5);
    let cover = ws.image("c.pgm", &random_grid(32, 32, &mut rng));
    let payload = ws.bytes("p.bin", b"abc");
    let (stego, key) = (ws.path("s.pgm"), ws.path("k.bin"));

    let missing = ws.path("nope.pgm");
    assert_eq!(
        code(&nestegg(embed_args(&missing, &payload, &stego, &key))),
        2
    );
    let not_image = ws.bytes("junk.pgm", b"GIF89a....");
    assert_eq!(
        code(&nestegg(embed_args(&not_image, &payload, &stego, &key))),
        2
    );
    assert_eq!(
        code(&nestegg(embed_args(&cover, &missing, &stego, &key))),
        2
    );

    assert_eq!(
        code(&nestegg(embed_args(&cover, &payload, &stego, &key))),
        0
    );
    let out_path = ws.path("o.bin");
    let out = nestegg(argv![
        "extract",
        "--stego",
        stego,
        "--key",
        ws.path("absent.key"),
        "--out",
        out_path
    ]);
    assert_eq!(code(&out), 2);
    let garbage = ws.bytes("garbage.key", b"not a key at all, definitely not");
    let out = nestegg(argv![
        "extract", "--stego", stego, "--key", garbage, "--out", out_path
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad magic"), "{}", stderr(&out));
    assert!(!out_path.exists());
}

#[test]
fn corrupted_stego_exits_4() {
    let ws = Workspace::new();
    let mut rng = SplitMix64::new(6);
    let cover = ws.image("c.pgm", &random_grid(64, 64, &mut rng));
    let payload = ws.bytes("p.bin", &random_bytes(200, &mut rng));
    let (stego, key) = (ws.path("s.pgm"), ws.path("k.bin"));
    let mut seq = embed_args(&cover, &payload, &stego, &key);
    seq.extend(argv!["--mode", "sequential"]);
    assert_eq!(code(&nestegg(seq)), 0);

    // sequential mode fills nest 0 first, so pixel (0,0) carries payload
    let mut grid = image_io::load_image(&stego).unwrap();
    grid.samples_mut()[0] ^= 1;
    image_io::save_image(&grid, &stego).unwrap();
    let out_path = ws.path("o.bin");
    let out = nestegg(argv![
        "extract", "--stego", stego, "--key", key, "--out", out_path
    ]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("CRC mismatch"));
}

#[test]
fn analyze_reports_metrics() {
    let ws = Workspace::new();
    let mut rng = SplitMix64::new(7);
    let grid = random_grid(128, 128, &mut rng);
    let cover = ws.image("c.pgm", &grid);

    let out = nestegg(argv!["analyze", "--cover", cover, "--stego", cover]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert_eq!(field(&text, "ssim").unwrap(), "1");
    assert_eq!(field(&text, "mse").unwrap(), "0");
    assert_eq!(field(&text, "psnr_db").unwrap(), "inf");

    // full-capacity sequential k=1 embedding sits near 10·log10(255²/0.5)
    let payload = ws.bytes("p.bin", &random_bytes(2048, &mut rng));
    let (stego, key) = (ws.path("s.pgm"), ws.path("k.bin"));
    let mut args = embed_args(&cover, &payload, &stego, &key);
    args.extend(argv!["--mode", "sequential"]);
    assert_eq!(code(&nestegg(args.clone())), 0);
    let out = nestegg(argv![
        "analyze", "--cover", cover, "--stego", stego, "--alpha", "0.25"
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let psnr: f64 = field(&text, "psnr_db").unwrap().parse().unwrap();
    assert!((psnr - 51.14).abs() < 0.3, "{psnr}");
    let ssim: f64 = field(&text, "ssim").unwrap().parse().unwrap();
    let z: f64 = field(&text, "z").unwrap().parse().unwrap();
    assert!((z - (0.25 * ssim + 0.75 * psnr)).abs() < 1e-9);

    let small = ws.image("small.pgm", &random_grid(64, 128, &mut rng));
    assert_eq!(
        code(&nestegg(argv![
            "analyze", "--cover", cover, "--stego", small
        ])),
        3
    );
    assert_eq!(
        code(&nestegg(argv![
            "analyze", "--cover", cover, "--stego", cover, "--alpha", "-1"
        ])),
        3
    );
}

#[test]
fn mp3_flags() {
    let ws = Workspace::new();
    let mut rng = SplitMix64::new(8);
    let cover = ws.image("c.pgm", &random_grid(64, 64, &mut rng));
    let mp3 = ws.bytes(
        "song.mp3",
        &fixture::synthetic_mp3(fixture::FixtureSpec::default()),
    );
    let (stego, key) = (ws.path("s.pgm"), ws.path("k.bin"));
    let mut args = embed_args(&cover, &mp3, &stego, &key);
    args.push("--mp3".into());
    let out = nestegg(args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(field(&stdout(&out), "mp3_frames").unwrap(), "1");

    let out_path = ws.path("out.mp3");
    let out = nestegg(argv![
        "extract",
        "--stego",
        stego,
        "--key",
        key,
        "--out",
        out_path,
        "--validate-mp3"
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(field(&stdout(&out), "mp3_frames").unwrap(), "1");
    assert_eq!(field(&stdout(&out), "mp3_valid").unwrap(), "true");
    assert_eq!(fs::read(&out_path).unwrap(), fs::read(&mp3).unwrap());

    let not_mp3 = ws.bytes("fake.mp3", &[0x42; 400]);
    let mut args = embed_args(&cover, &not_mp3, &stego, &key);
    args.push("--mp3".into());
    assert_eq!(code(&nestegg(args.clone())), 2);
}

#[test]
fn trace_csv_written() {
    let ws = Workspace::new();
    let mut rng = SplitMix64::new(9);
    let cover = ws.image("c.pgm", &random_grid(32, 32, &mut rng));
    let payload = ws.bytes("p.bin", b"trace me");
    let (stego, key, trace) = (ws.path("s.pgm"), ws.path("k.bin"), ws.path("trace.csv"));
    let mut args = embed_args(&cover, &payload, &stego, &key);
    args.extend(argv!["--trace", trace]);
    assert_eq!(code(&nestegg(args.clone())), 0);
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "generation,nest_index,best_z");
    assert!(lines.count() >= 4, "one initial row per nest at least");
}

#[test]
fn embed_is_deterministic_per_seed() {
    let ws = Workspace::new();
    let mut rng = SplitMix64::new(10);
    let cover = ws.image("c.pgm", &random_grid(64, 64, &mut rng));
    let payload = ws.bytes("p.bin", &random_bytes(100, &mut rng));
    let run = |tag: &str, seed: &str| {
        let (stego, key) = (
            ws.path(&format!("s{tag}.pgm")),
            ws.path(&format!("k{tag}.bin")),
        );
        let mut args = embed_args(&cover, &payload, &stego, &key);
        args.extend(argv!["--seed", seed]);
        assert_eq!(code(&nestegg(args.clone())), 0);
        (fs::read(stego).unwrap(), fs::read(key).unwrap())
    };
    assert_eq!(run("a", "17"), run("b", "17"));
}

#[test]
fn bench_writes_csv_and_summary() {
    let ws = Workspace::new();
    let mut rng = SplitMix64::new(11);
    let a = ws.image("alpha.pgm", &random_grid(64, 64, &mut rng));
    let b = ws.image("beta.png", &random_grid(64, 48, &mut rng));
    let csv = ws.path("bench.csv");
    let out = nestegg(argv![
        &"bench",
        "--images",
        a,
        b,
        "--payload-bytes",
        "64",
        "--k",
        "2",
        "--seeds",
        "3",
        "--gens",
        "10",
        &"--out",
        csv,
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 1 + 2 * 2 * 3);
    assert!(rows[1].starts_with("alpha,cuckoo,2,64,"));
    assert!(rows[12].starts_with("beta,sequential,2,64,"));
    assert!(rows[12].ends_with(",0,2"), "{}", rows[12]);
    let summary = fs::read_to_string(ws.path("bench.summary.txt")).unwrap();
    assert_eq!(summary, stdout(&out));
    assert!(summary.contains("alpha") && summary.contains("beta"));

    let out = nestegg(argv!["bench", "--seeds", "0", "--out", csv]);
    assert_eq!(code(&out), 3);
}
