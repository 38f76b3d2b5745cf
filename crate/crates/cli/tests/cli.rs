use std::fs;
use std::path::{Path, PathBuf};

use scanlift::nn::{load_weights, save_weights, Arch, SrModel};
use scanlift::pgm::{read_pgm, write_pgm};
use scanlift::synth::{generate, PhantomKind, PhantomSpec};
use scanlift_cli::{run, EXIT_OK, EXIT_PROCESSING, EXIT_USAGE};
use tempfile::TempDir;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn scanlift(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("scanlift").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Outcome { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn phantom(dir: &Path, name: &str, spec: PhantomSpec) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, write_pgm(&generate(&spec).unwrap())).unwrap();
    path
}

fn read(path: &Path) -> scanlift::GrayImage {
    read_pgm(&fs::read(path).unwrap()).unwrap()
}

/// Data rows of a CSV report with the runtime column blanked.
fn rows_without_runtime(text: &str) -> Vec<String> {
    text.lines()
        .skip(1)
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f[5] = "";
            f.join(",")
        })
        .collect()
}

#[test]
fn synth_writes_named_deterministic_files() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(scanlift(&["synth", "3", "--out", p(&a), "--seed", "7"]).code, EXIT_OK);
    assert_eq!(scanlift(&["synth", "3", "--out", p(&b), "--seed", "7"]).code, EXIT_OK);
    for seed in 7..10 {
        let name = format!("phantom_{seed}.pgm");
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }
    assert_eq!(fs::read_dir(&a).unwrap().count(), 3);
}

#[test]
fn synth_sixty_six_image_corpus() {
    let dir = TempDir::new().unwrap();
    assert_eq!(scanlift(&["synth", "66", "--out", p(dir.path())]).code, EXIT_OK);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 66);
}

#[test]
fn synth_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    assert_eq!(scanlift(&["synth", "0", "--out", p(dir.path())]).code, EXIT_USAGE);
    let file = dir.path().join("file");
    fs::write(&file, b"x").unwrap();
    assert_eq!(scanlift(&["synth", "1", "--out", p(&file.join("sub"))]).code, EXIT_PROCESSING);
}

#[test]
fn assess_reports_classes() {
    let dir = TempDir::new().unwrap();
    let dark = phantom(dir.path(), "dark.pgm", PhantomSpec { exposure_bias: -1.0, ..Default::default() });
    let ramp = phantom(dir.path(), "ramp.pgm", PhantomSpec { kind: PhantomKind::Gradient, ..Default::default() });
    let missing = dir.path().join("missing.pgm");
    let r = scanlift(&["assess", p(&dark), p(&ramp), p(&missing)]);
    assert_eq!(r.code, EXIT_OK);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert!(lines[0].starts_with(&format!("{} class=Under lower_mass=", p(&dark))));
    assert!(lines[1].contains("class=Normal"));
    assert!(r.stderr.contains(p(&missing)));

    let r = scanlift(&["assess", p(&missing)]);
    assert_eq!(r.code, EXIT_PROCESSING);
    assert!(r.stderr.lines().next().unwrap().starts_with(p(&missing)));
    assert_eq!(scanlift(&["assess", p(&ramp), "--threshold", "0.2"]).code, EXIT_USAGE);
}

#[test]
fn equalize_gates_on_exposure() {
    let dir = TempDir::new().unwrap();
    let bright = phantom(dir.path(), "bright.pgm", PhantomSpec { exposure_bias: 1.0, ..Default::default() });
    let normal = phantom(dir.path(), "normal.pgm", PhantomSpec::default());
    let out = dir.path().join("out.pgm");
    let r = scanlift(&["equalize", p(&bright), "--out", p(&out)]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.stdout.contains("class=Over") && r.stdout.contains("equalized=true"));
    let r = scanlift(&["assess", p(&out)]);
    assert!(r.stdout.contains("class=Normal"), "{}", r.stdout);

    let r = scanlift(&["equalize", p(&normal), "--out", p(&out)]);
    assert!(r.stdout.contains("equalized=false"));
    assert_eq!(fs::read(&out).unwrap(), fs::read(&normal).unwrap());
    let r = scanlift(&["equalize", p(&normal), "--out", p(&out), "--force-equalize", "--mode", "minmax"]);
    assert!(r.stdout.contains("equalized=true"));
}

#[test]
fn enhance_um_zero_amount_is_identity() {
    let dir = TempDir::new().unwrap();
    let input = phantom(dir.path(), "in.pgm", PhantomSpec::default());
    let out = dir.path().join("out.pgm");
    let r = scanlift(&["enhance", p(&input), "--method", "um", "--amount", "0", "--out", p(&out)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&input).unwrap());
    assert!(r.stdout.contains("image_id,method,mse,psnr_db,ssim,runtime_ms,params"));
}

#[test]
fn enhance_bicubic_doubles_and_scores() {
    let dir = TempDir::new().unwrap();
    let input = phantom(dir.path(), "in.pgm", PhantomSpec::default());
    let reference = phantom(dir.path(), "ref.pgm", PhantomSpec { width: 128, height: 128, ..Default::default() });
    let out = dir.path().join("out.pgm");
    let side = dir.path().join("side.pgm");
    let report = dir.path().join("row.json");
    let r = scanlift(&[
        "enhance",
        p(&input),
        "--method",
        "bicubic",
        "--out",
        p(&out),
        "--reference",
        p(&reference),
        "--side-by-side",
        p(&side),
        "--report",
        p(&report),
        "--format",
        "json",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(read(&out).dimensions(), (128, 128));
    assert_eq!(read(&side).dimensions(), (192, 128));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(v[0]["method"], "Bicubic");
    assert!(v[0]["psnr_db"].as_f64().unwrap().is_finite());
    assert_eq!(v[0]["params"], "factor=2");

    let r = scanlift(&[
        "enhance",
        p(&input),
        "--method",
        "bicubic",
        "--factor",
        "3",
        "--out",
        p(&out),
        "--reference",
        p(&reference),
    ]);
    assert_eq!(r.code, EXIT_PROCESSING);
}

#[test]
fn enhance_neural_methods_need_weights() {
    let dir = TempDir::new().unwrap();
    let input = phantom(dir.path(), "in.pgm", PhantomSpec::default());
    let out = dir.path().join("out.pgm");
    let r = scanlift(&["enhance", p(&input), "--method", "srcnn", "--out", p(&out)]);
    assert_eq!(r.code, EXIT_USAGE);
    assert!(r.stderr.contains("weight"));

    let weights = dir.path().join("srcnn.bin");
    fs::write(&weights, save_weights(&SrModel::random(Arch::Srcnn, 4))).unwrap();
    let r = scanlift(&["enhance", p(&input), "--method", "srcnn", "--weights", p(&weights), "--out", p(&out)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(read(&out).dimensions(), (64, 64));

    let vdsr = dir.path().join("vdsr.bin");
    fs::write(&vdsr, save_weights(&SrModel::zeros(Arch::Vdsr))).unwrap();
    let r = scanlift(&["enhance", p(&input), "--method", "vdsr", "--weights", p(&vdsr), "--out", p(&out)]);
    assert_eq!(r.code, EXIT_OK);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&input).unwrap());

    fs::write(&weights, b"garbage").unwrap();
    let r = scanlift(&["enhance", p(&input), "--method", "srcnn", "--weights", p(&weights), "--out", p(&out)]);
    assert_eq!(r.code, EXIT_USAGE);
}

#[test]
fn train_writes_loadable_deterministic_weights() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.bin");
    let b = dir.path().join("b.bin");
    let args = |out: &Path| {
        vec![
            "train".to_string(),
            "--arch".into(),
            "srcnn".into(),
            "--synthetic".into(),
            "8".into(),
            "--epochs".into(),
            "2".into(),
            "--steps".into(),
            "3".into(),
            "--batch-size".into(),
            "4".into(),
            "--seed".into(),
            "5".into(),
            "--out".into(),
            p(out).to_string(),
        ]
    };
    let run_a = scanlift(&args(&a).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(run_a.code, EXIT_OK, "{}", run_a.stderr);
    let epochs: Vec<&str> = run_a.stdout.lines().filter(|l| l.starts_with("epoch=")).collect();
    assert_eq!(epochs.len(), 2);
    assert!(epochs[0].starts_with("epoch=1 lr=1e-4 loss="));
    let model = load_weights(&fs::read(&a).unwrap()).unwrap();
    assert_eq!(model.arch, Arch::Srcnn);

    let run_b = scanlift(&args(&b).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(run_b.code, EXIT_OK);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(run_a.stdout.lines().next(), run_b.stdout.lines().next());
}

#[test]
fn train_smoke_run_reduces_loss() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("w.bin");
    let r = scanlift(&[
        "train",
        "--arch",
        "srcnn",
        "--synthetic",
        "4",
        "--epochs",
        "3",
        "--steps",
        "4",
        "--batch-size",
        "4",
        "--out",
        p(&out),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let losses: Vec<f64> =
        r.stdout.lines().filter_map(|l| l.split("loss=").nth(1)).map(|v| v.parse().unwrap()).collect();
    assert_eq!(losses.len(), 3);
    assert!(losses[2] < losses[0], "{losses:?}");
}

#[test]
fn train_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("w.bin");
    assert_eq!(scanlift(&["train", "--arch", "srcnn", "--out", p(&out)]).code, EXIT_USAGE);
    let r = scanlift(&[
        "train",
        "--arch",
        "srcnn",
        "--synthetic",
        "2",
        "--epochs",
        "3",
        "--steps",
        "2",
        "--lr",
        "1e9",
        "--out",
        p(&out),
    ]);
    assert_eq!(r.code, EXIT_PROCESSING);
    assert!(r.stderr.contains("diverged"), "{}", r.stderr);
    assert!(!out.exists());
}

#[test]
fn bench_bicubic_rows_and_determinism() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let r = scanlift(&["bench", "--synthetic", "10", "--method", "bicubic", "--report", p(path)]);
        assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
        assert!(r.stdout.starts_with("summary method=Bicubic images=10 mean_psnr_db="));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().next().unwrap(), "image_id,method,mse,psnr_db,ssim,runtime_ms,params");
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 10);
    for row in &rows {
        let psnr: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert!(psnr.is_finite());
    }
    assert_eq!(rows_without_runtime(&text), rows_without_runtime(&fs::read_to_string(&b).unwrap()));
}

#[test]
fn bench_covers_every_method_pair() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    for (i, kind) in PhantomKind::ALL.into_iter().enumerate().take(3) {
        phantom(&corpus, &format!("img{i}.pgm"), PhantomSpec { kind, seed: i as u64, ..Default::default() });
    }
    let weights = dir.path().join("vdsr.bin");
    fs::write(&weights, save_weights(&SrModel::zeros(Arch::Vdsr))).unwrap();
    let report = dir.path().join("r.json");
    let r = scanlift(&[
        "bench",
        "--corpus",
        p(&corpus),
        "--method",
        "um,clahe,bicubic,vdsr",
        "--weights",
        p(&weights),
        "--report",
        p(&report),
        "--format",
        "json",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[0]["image_id"], "img0");
    assert_eq!(rows[3]["method"], "VDSR");
    // A zero VDSR reproduces the bicubic restoration exactly.
    assert_eq!(rows[2]["mse"], rows[3]["mse"]);
    assert_eq!(r.stdout.lines().count(), 4);
}

#[test]
fn bench_errors() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.csv");
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(scanlift(&["bench", "--corpus", p(&empty), "--report", p(&report)]).code, EXIT_USAGE);
    assert_eq!(scanlift(&["bench", "--synthetic", "2", "--factor", "1", "--report", p(&report)]).code, EXIT_USAGE);
    assert_eq!(scanlift(&["bench", "--synthetic", "2", "--method", "srcnn", "--report", p(&report)]).code, EXIT_USAGE);
}

#[test]
fn usage_and_help_exit_codes() {
    assert_eq!(scanlift(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(scanlift(&["enhance"]).code, EXIT_USAGE);
    let r = scanlift(&["--help"]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.stdout.contains("bench"));
}
