use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use depthcrypt::ca::{CaState, RuleVector};
use depthcrypt::chaos::LogisticParams;
use depthcrypt::{
    cgii_pickup, ciir_reconstruct, depth_convert, serialize_key, Cipher, KeyMaterial,
    PickupGeometry, PlaneImage, StageSelection,
};
use depthcrypt_cli::pnm::{self, Image};

fn key() -> KeyMaterial {
    let geo = PickupGeometry::new(10, 10, 1.0, 2.0, 12.0, 10).unwrap();
    KeyMaterial::new(
        geo,
        LogisticParams::reference(),
        RuleVector::reference(),
        CaState(0x5A),
    )
    .unwrap()
}

fn gray() -> PlaneImage {
    PlaneImage::from_fn(100, 100, |x, y| (40 + (x * 2 + y) % 180) as u8).unwrap()
}

struct Scratch {
    dir: tempfile::TempDir,
}

impl Scratch {
    fn new() -> Self {
        let s = Scratch {
            dir: tempfile::tempdir().unwrap(),
        };
        std::fs::write(s.path("k.txt"), serialize_key(&key())).unwrap();
        pnm::write_image(&s.path("plain.pgm"), &Image::Gray(gray())).unwrap();
        s
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_depthcrypt"))
        .args(args)
        .output()
        .unwrap()
}

fn gray_at(path: &Path) -> PlaneImage {
    match pnm::read_image(path).unwrap() {
        Image::Gray(p) => p,
        Image::Color(_) => panic!("expected a graymap"),
    }
}

#[test]
fn stage_commands_match_library() {
    let s = Scratch::new();
    let ok = |args: &[&str]| {
        let out = run(args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(out.stdout.is_empty());
    };
    ok(&[
        "pickup",
        "--in",
        &s.arg("plain.pgm"),
        "--key",
        &s.arg("k.txt"),
        "--out",
        &s.arg("eia.pgm"),
    ]);
    ok(&[
        "convert-depth",
        "--in",
        &s.arg("eia.pgm"),
        "--key",
        &s.arg("k.txt"),
        "--out",
        &s.arg("conv.pgm"),
    ]);
    ok(&[
        "reconstruct",
        "--in",
        &s.arg("conv.pgm"),
        "--key",
        &s.arg("k.txt"),
        "--z",
        "8",
        "--out",
        &s.arg("rec.pgm"),
    ]);
    ok(&[
        "reconstruct",
        "--in",
        &s.arg("eia.pgm"),
        "--key",
        &s.arg("k.txt"),
        "--layout",
        "direct",
        "--out",
        &s.arg("dir.pgm"),
    ]);

    let direct = cgii_pickup(&gray(), &key().geometry).unwrap();
    let conv = depth_convert(&direct).unwrap();
    assert_eq!(&gray_at(&s.path("eia.pgm")), direct.raster());
    assert_eq!(&gray_at(&s.path("conv.pgm")), conv.raster());
    assert_eq!(
        gray_at(&s.path("rec.pgm")),
        ciir_reconstruct(&conv, 8.0).unwrap().image
    );
    assert_eq!(
        gray_at(&s.path("dir.pgm")),
        ciir_reconstruct(&direct, 12.0).unwrap().image
    );
}

#[test]
fn encrypt_decrypt_round_trip_on_graymap() {
    let s = Scratch::new();
    let enc = run(&[
        "encrypt",
        "--in",
        &s.arg("plain.pgm"),
        "--key",
        &s.arg("k.txt"),
        "--out",
        &s.arg("c.pgm"),
    ]);
    assert_eq!(enc.status.code(), Some(0));
    let dec = run(&[
        "decrypt",
        "--in",
        &s.arg("c.pgm"),
        "--key",
        &s.arg("k.txt"),
        "--out",
        &s.arg("r.pgm"),
        "--eia-out",
        &s.arg("e.pgm"),
    ]);
    assert_eq!(dec.status.code(), Some(0));
    let cipher = Cipher::new(&key(), StageSelection::ALL).unwrap();
    assert_eq!(
        &gray_at(&s.path("e.pgm")),
        cipher.depth_converted_eia(&gray()).unwrap().raster()
    );
    assert_eq!(
        gray_at(&s.path("r.pgm")),
        cipher
            .decrypt_channel(&gray_at(&s.path("c.pgm")), None)
            .unwrap()
            .1
    );
}

#[test]
fn stage_flag_selects_cipher_stages() {
    let s = Scratch::new();
    let out = run(&[
        "encrypt",
        "--in",
        &s.arg("plain.pgm"),
        "--key",
        &s.arg("k.txt"),
        "--out",
        &s.arg("m.pgm"),
        "--stages",
        "mask",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mask_only = Cipher::new(&key(), StageSelection::MASK_ONLY).unwrap();
    assert_eq!(
        gray_at(&s.path("m.pgm")),
        mask_only.encrypt_channel(&gray()).unwrap()
    );
    let bad = run(&[
        "encrypt",
        "--in",
        &s.arg("plain.pgm"),
        "--key",
        &s.arg("k.txt"),
        "--out",
        &s.arg("x.pgm"),
        "--stages",
        "rot13",
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn scan_prints_table_and_writes_best_depth() {
    let s = Scratch::new();
    run(&[
        "pickup",
        "--in",
        &s.arg("plain.pgm"),
        "--key",
        &s.arg("k.txt"),
        "--out",
        &s.arg("eia.pgm"),
    ]);
    run(&[
        "convert-depth",
        "--in",
        &s.arg("eia.pgm"),
        "--key",
        &s.arg("k.txt"),
        "--out",
        &s.arg("conv.pgm"),
    ]);
    let out = run(&[
        "reconstruct",
        "--in",
        &s.arg("conv.pgm"),
        "--key",
        &s.arg("k.txt"),
        "--out",
        &s.arg("best.pgm"),
        "--scan",
        "2:14:2",
        "--reference",
        &s.arg("plain.pgm"),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "depth_mm,channel,psnr_db");
    assert_eq!(lines.len(), 1 + 7);
    let best = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse::<f64>().unwrap(), f[2].parse::<f64>().unwrap())
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0;
    let conv = depth_convert(&cgii_pickup(&gray(), &key().geometry).unwrap()).unwrap();
    assert_eq!(
        gray_at(&s.path("best.pgm")),
        ciir_reconstruct(&conv, best).unwrap().image
    );

    let missing_ref = run(&[
        "reconstruct",
        "--in",
        &s.arg("conv.pgm"),
        "--key",
        &s.arg("k.txt"),
        "--out",
        &s.arg("x.pgm"),
        "--scan",
        "2:14:2",
    ]);
    assert_eq!(missing_ref.status.code(), Some(2));
}

#[test]
fn attack_and_analyze() {
    let s = Scratch::new();
    run(&[
        "encrypt",
        "--in",
        &s.arg("plain.pgm"),
        "--key",
        &s.arg("k.txt"),
        "--out",
        &s.arg("c.pgm"),
    ]);
    let occ = run(&[
        "attack",
        "--in",
        &s.arg("c.pgm"),
        "--out",
        &s.arg("o.pgm"),
        "--occlude",
        "0.25",
    ]);
    assert_eq!(occ.status.code(), Some(0));
    let o = gray_at(&s.path("o.pgm"));
    assert!(o.as_slice()[..2500].iter().all(|&v| v == 0));
    assert_eq!(
        &o.as_slice()[2500..],
        &gray_at(&s.path("c.pgm")).as_slice()[2500..]
    );

    for _ in 0..2 {
        let n = run(&[
            "attack",
            "--in",
            &s.arg("c.pgm"),
            "--out",
            &s.arg("n.pgm"),
            "--noise",
            "0.5",
            "--seed",
            "4",
        ]);
        assert_eq!(n.status.code(), Some(0));
    }
    let first = gray_at(&s.path("n.pgm"));
    run(&[
        "attack",
        "--in",
        &s.arg("c.pgm"),
        "--out",
        &s.arg("n2.pgm"),
        "--noise",
        "0.5",
        "--seed",
        "4",
    ]);
    assert_eq!(first, gray_at(&s.path("n2.pgm")));

    let neither = run(&["attack", "--in", &s.arg("c.pgm"), "--out", &s.arg("x.pgm")]);
    assert_eq!(neither.status.code(), Some(2));
    let negative = run(&[
        "attack",
        "--in",
        &s.arg("c.pgm"),
        "--out",
        &s.arg("x.pgm"),
        "--noise",
        "-1",
    ]);
    assert_eq!(negative.status.code(), Some(2));

    let a = run(&[
        "analyze",
        "--in",
        &s.arg("c.pgm"),
        "--reference",
        &s.arg("c.pgm"),
    ]);
    assert_eq!(a.status.code(), Some(0));
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("channel,entropy_bits,chi_square,psnr_db")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!((row[0], row[3]), ("Y", "inf"));
}

#[test]
fn report_writes_csv() {
    let s = Scratch::new();
    let rgb: Vec<u8> = (0..100 * 100 * 3)
        .map(|i| (60 + (i * 7) % 150) as u8)
        .collect();
    let color = depthcrypt::ColorImage::from_interleaved(100, 100, &rgb).unwrap();
    pnm::write_image(&s.path("scene.ppm"), &Image::Color(color)).unwrap();
    let out = run(&[
        "report",
        "--suite",
        "standard",
        "--key",
        &s.arg("k.txt"),
        "--image",
        &s.arg("scene.ppm"),
        "--out",
        &s.arg("r.csv"),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(s.path("r.csv")).unwrap();
    assert!(
        csv.starts_with("image,attack,param,channel,psnr_db,entropy_bits\nscene,none,8.0000,R,")
    );
    assert_eq!(csv.lines().count(), 1 + 36);

    let gray_only = run(&[
        "report",
        "--key",
        &s.arg("k.txt"),
        "--image",
        &s.arg("plain.pgm"),
    ]);
    assert_eq!(gray_only.status.code(), Some(4));
}

#[test]
fn exit_codes_and_diagnostics() {
    let s = Scratch::new();
    let usage = run(&[
        "encrypt",
        "--in",
        &s.arg("plain.pgm"),
        "--out",
        &s.arg("x.pgm"),
    ]);
    assert_eq!(usage.status.code(), Some(2));
    let err = String::from_utf8_lossy(&usage.stderr);
    assert!(err.contains("--key") && err.contains("Usage"), "{err}");
    assert!(usage.stdout.is_empty());

    std::fs::write(s.path("broken.txt"), "pinholes=10x10\n").unwrap();
    let key_err = run(&[
        "encrypt",
        "--in",
        &s.arg("plain.pgm"),
        "--key",
        &s.arg("broken.txt"),
        "--out",
        &s.arg("x.pgm"),
    ]);
    assert_eq!(key_err.status.code(), Some(3));
    let no_key = run(&[
        "encrypt",
        "--in",
        &s.arg("plain.pgm"),
        "--key",
        &s.arg("none.txt"),
        "--out",
        &s.arg("x.pgm"),
    ]);
    assert_eq!(no_key.status.code(), Some(3));

    std::fs::write(
        s.path("deep.txt"),
        serialize_key(&key()).replace("distance_mm=12", "distance_mm=25"),
    )
    .unwrap();
    let geometry = run(&[
        "encrypt",
        "--in",
        &s.arg("plain.pgm"),
        "--key",
        &s.arg("deep.txt"),
        "--out",
        &s.arg("x.pgm"),
    ]);
    assert_eq!(
        geometry.status.code(),
        Some(3),
        "key validation rejects l >= m*g"
    );

    std::fs::write(s.path("wide.pgm"), b"P5\n4 4\n65535\n").unwrap();
    let unsupported = run(&[
        "encrypt",
        "--in",
        &s.arg("wide.pgm"),
        "--key",
        &s.arg("k.txt"),
        "--out",
        &s.arg("x.pgm"),
    ]);
    assert_eq!(unsupported.status.code(), Some(5));

    let unwritable = run(&[
        "encrypt",
        "--in",
        &s.arg("plain.pgm"),
        "--key",
        &s.arg("k.txt"),
        "--out",
        &s.arg("no/such/dir.pgm"),
    ]);
    assert_eq!(unwritable.status.code(), Some(5));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}
