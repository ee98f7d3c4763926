//! Quality metrics, histogram statistics and the attack bench.

use std::fmt;

use rayon::prelude::*;

use crate::ca::Rule;
use crate::cgii::{cgii_pickup, ciir_reconstruct};
use crate::chaos::LogisticParams;
use crate::cipher::{Cipher, KeyMaterial, StageSelection};
use crate::error::{Error, Result};
use crate::image::{ColorImage, PlaneImage};

pub const MAX_INTENSITY: f64 = 255.0;

pub fn mse(a: &PlaneImage, b: &PlaneImage) -> Result<f64> {
    a.check_same_dims(b)?;
    let sum: u64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / a.len() as f64)
}

/// `10 log10(255^2 / MSE)`; `f64::INFINITY` for identical images.
pub fn psnr(a: &PlaneImage, b: &PlaneImage) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (MAX_INTENSITY * MAX_INTENSITY / mse).log10()
    }
}

pub fn histogram(img: &PlaneImage) -> [u64; 256] {
    let mut counts = [0u64; 256];
    for &v in img.as_slice() {
        counts[v as usize] += 1;
    }
    counts
}

/// Shannon entropy of the intensity histogram, in bits.
pub fn entropy(img: &PlaneImage) -> f64 {
    let n = img.len() as f64;
    histogram(img)
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Pearson chi-square of the histogram against a flat 256-bin distribution.
pub fn chi_square_uniform(img: &PlaneImage) -> f64 {
    let expected = img.len() as f64 / 256.0;
    histogram(img)
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum()
}

/// 64-bit LCG with Box-Muller normals.
///
/// `s <- s * 6364136223846793005 + 1442695040888963407`; uniforms are
/// `((s >> 11) + 1) * 2^-53` in (0, 1]. Transcendentals go through `libm`
/// so noise fields are identical on every platform.
#[derive(Debug, Clone)]
pub struct NoiseRng {
    state: u64,
    spare: Option<f64>,
}

impl NoiseRng {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            spare: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.state
    }

    /// Uniform in (0, 1].
    pub fn next_unit(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`.
    pub fn next_below(&mut self, n: usize) -> usize {
        (((self.next_u64() >> 11) as u128 * n as u128) >> 53) as usize
    }

    /// Standard normal draw; pairs are produced together and the second is cached.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_unit();
        let u2 = self.next_unit();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OcclusionMode {
    /// Contiguous band of top rows.
    Block,
    /// Pixels drawn without replacement.
    Random,
}

impl fmt::Display for OcclusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OcclusionMode::Block => "block",
            OcclusionMode::Random => "random",
        })
    }
}

fn ceil_fraction(fraction: f64, n: usize) -> usize {
    // Absorbs binary-fraction noise such as 0.07 * 100 = 7.000000000000001.
    ((fraction * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Zeroes `ceil(D*H)` top rows (block) or `ceil(D*W*H)` random pixels.
pub fn occlude(
    img: &PlaneImage,
    fraction: f64,
    mode: OcclusionMode,
    seed: u64,
) -> Result<PlaneImage> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::FractionOutOfRange(fraction));
    }
    let mut out = img.clone();
    match mode {
        OcclusionMode::Block => {
            let rows = ceil_fraction(fraction, img.height());
            out.as_mut_slice()[..rows * img.width()].fill(0);
        }
        OcclusionMode::Random => {
            let n = img.len();
            let k = ceil_fraction(fraction, n);
            let mut rng = NoiseRng::new(seed);
            let mut order: Vec<usize> = (0..n).collect();
            let data = out.as_mut_slice();
            for t in 0..k {
                let pick = t + rng.next_below(n - t);
                order.swap(t, pick);
                data[order[t]] = 0;
            }
        }
    }
    Ok(out)
}

/// Multiplicative noise `p * (1 + v*N)`, rounded and clamped to 8 bits.
pub fn gaussian_noise(img: &PlaneImage, strength: f64, seed: u64) -> Result<PlaneImage> {
    if strength.is_nan() || strength < 0.0 || strength.is_infinite() {
        return Err(Error::ParamOutOfRange(format!(
            "noise strength {strength} must be non-negative"
        )));
    }
    let mut rng = NoiseRng::new(seed);
    let data = img
        .as_slice()
        .iter()
        .map(|&p| {
            let n = rng.next_normal();
            (p as f64 * (1.0 + strength * n)).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    PlaneImage::new(img.width(), img.height(), data)
}

/// Row kinds in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackKind {
    /// Correct-key decryption of the untouched cipher.
    None,
    /// Direct CIIR of the picked-up EIA at the pickup distance (no depth conversion).
    DirectCiir,
    WrongX0,
    WrongDistance,
    WrongRules,
    Occlusion(OcclusionMode),
    Noise,
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackKind::None => f.write_str("none"),
            AttackKind::DirectCiir => f.write_str("direct-ciir"),
            AttackKind::WrongX0 => f.write_str("wrong-x0"),
            AttackKind::WrongDistance => f.write_str("wrong-distance"),
            AttackKind::WrongRules => f.write_str("wrong-rules"),
            AttackKind::Occlusion(mode) => write!(f, "occlusion-{mode}"),
            AttackKind::Noise => f.write_str("noise"),
        }
    }
}

pub const CHANNEL_NAMES: [&str; 3] = ["R", "G", "B"];

#[derive(Debug, Clone, PartialEq)]
pub struct AttackRow {
    pub image: String,
    pub attack: AttackKind,
    pub param: f64,
    pub channel: usize,
    pub psnr_db: f64,
    /// Entropy of the raster handed to reconstruction's input side: the
    /// (attacked) cipher channel, or the direct EIA for `DirectCiir`.
    pub entropy_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub key_fingerprint: String,
    pub geometry: String,
    pub rows: Vec<AttackRow>,
}

fn fmt_real(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

impl AttackReport {
    pub const CSV_HEADER: &'static str = "image,attack,param,channel,psnr_db,entropy_bits";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.image,
                r.attack,
                fmt_real(r.param),
                CHANNEL_NAMES[r.channel],
                fmt_real(r.psnr_db),
                fmt_real(r.entropy_bits),
            ));
        }
        out
    }

    /// Rows of one attack kind for one image and channel, in parameter order.
    pub fn series(&self, image: &str, attack: AttackKind, channel: usize) -> Vec<&AttackRow> {
        self.rows
            .iter()
            .filter(|r| r.image == image && r.attack == attack && r.channel == channel)
            .collect()
    }

    pub fn merge(&mut self, other: AttackReport) {
        self.rows.extend(other.rows);
        sort_rows(&mut self.rows);
    }
}

fn sort_rows(rows: &mut [AttackRow]) {
    rows.sort_by(|a, b| {
        a.image
            .cmp(&b.image)
            .then(a.attack.cmp(&b.attack))
            .then(a.param.total_cmp(&b.param))
            .then(a.channel.cmp(&b.channel))
    });
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSpec {
    pub occlusion_fractions: Vec<f64>,
    pub occlusion_mode: OcclusionMode,
    pub noise_strengths: Vec<f64>,
    pub seed: u64,
    pub key_sensitivity: bool,
    pub depth_comparison: bool,
}

impl SuiteSpec {
    /// Occlusion D in {10, 20, 50, 70}% (block), noise v in {0.1, 0.5, 0.8},
    /// key-sensitivity trio and direct-vs-converted comparison.
    pub fn standard() -> Self {
        Self {
            occlusion_fractions: vec![0.1, 0.2, 0.5, 0.7],
            occlusion_mode: OcclusionMode::Block,
            noise_strengths: vec![0.1, 0.5, 0.8],
            seed: 0x5EED,
            key_sensitivity: true,
            depth_comparison: true,
        }
    }
}

/// The three partially wrong keys: x0 off by 0.01, pickup distance 30 mm
/// (half the true one when 30 mm is the true distance or not convertible),
/// first CA rule flipped.
pub fn wrong_keys(key: &KeyMaterial) -> Result<[(AttackKind, f64, KeyMaterial); 3]> {
    let x0 = key.logistic.x0();
    let bad_x0 = if x0 - 0.01 > 0.0 {
        x0 - 0.01
    } else {
        x0 + 0.01
    };
    let mut k_x0 = *key;
    k_x0.logistic = LogisticParams::new(bad_x0, key.logistic.rho())?;

    let l = key.geometry.distance_mm();
    let d = key.geometry.pixels_per_elemental() as f64 * key.geometry.gap_mm();
    let bad_l = if (l - 30.0).abs() > 1e-9 && 30.0 < d {
        30.0
    } else {
        l / 2.0
    };
    let k_l = KeyMaterial::new(
        key.geometry.with_distance(bad_l)?,
        key.logistic,
        key.rules,
        key.ca_seed,
    )?;

    let mut k_rules = *key;
    k_rules.rules.0[0] = match key.rules.0[0] {
        Rule::R90 => Rule::R150,
        Rule::R150 => Rule::R90,
    };
    Ok([
        (AttackKind::WrongX0, bad_x0, k_x0),
        (AttackKind::WrongDistance, bad_l, k_l),
        (AttackKind::WrongRules, 0.0, k_rules),
    ])
}

fn derive_seed(base: u64, channel: usize, tag: u64) -> u64 {
    let mut rng = NoiseRng::new(base ^ (tag << 8) ^ channel as u64);
    rng.next_u64()
}

/// Encrypts `plain`, applies every attack in `spec` to the cipher, decrypts
/// and scores each channel against the plain image.
pub fn run_suite(
    image_id: &str,
    plain: &ColorImage,
    key: &KeyMaterial,
    spec: &SuiteSpec,
) -> Result<AttackReport> {
    let cipher = Cipher::new(key, StageSelection::ALL)?;
    let encrypted = cipher.encrypt(plain)?;

    enum Job {
        Clean,
        Direct,
        WrongKey(AttackKind, f64, KeyMaterial),
        Occlusion(f64),
        Noise(f64),
    }
    let mut jobs = vec![Job::Clean];
    if spec.depth_comparison {
        jobs.push(Job::Direct);
    }
    if spec.key_sensitivity {
        jobs.extend(
            wrong_keys(key)?
                .into_iter()
                .map(|(kind, p, k)| Job::WrongKey(kind, p, k)),
        );
    }
    jobs.extend(spec.occlusion_fractions.iter().map(|&d| Job::Occlusion(d)));
    jobs.extend(spec.noise_strengths.iter().map(|&v| Job::Noise(v)));

    let row = |attack, param, channel, rec: &PlaneImage, input: &PlaneImage| -> Result<AttackRow> {
        Ok(AttackRow {
            image: image_id.to_string(),
            attack,
            param,
            channel,
            psnr_db: psnr(plain.channel(channel), rec)?,
            entropy_bits: entropy(input),
        })
    };

    let mut rows = jobs
        .par_iter()
        .map(|job| -> Result<Vec<AttackRow>> {
            let mut out = Vec::with_capacity(3);
            match job {
                Job::Clean => {
                    for c in 0..3 {
                        let (_, rec) = cipher.decrypt_channel(encrypted.channel(c), None)?;
                        out.push(row(
                            AttackKind::None,
                            key.converted_depth_mm(),
                            c,
                            &rec,
                            encrypted.channel(c),
                        )?);
                    }
                }
                Job::Direct => {
                    let l = key.geometry.distance_mm();
                    for c in 0..3 {
                        let eia = cgii_pickup(plain.channel(c), &key.geometry)?;
                        let rec = ciir_reconstruct(&eia, l)?;
                        out.push(row(AttackKind::DirectCiir, l, c, &rec.image, eia.raster())?);
                    }
                }
                Job::WrongKey(kind, param, bad) => {
                    let wrong = Cipher::new(bad, StageSelection::ALL)?;
                    for c in 0..3 {
                        let (_, rec) = wrong.decrypt_channel(encrypted.channel(c), None)?;
                        out.push(row(*kind, *param, c, &rec, encrypted.channel(c))?);
                    }
                }
                Job::Occlusion(d) => {
                    for c in 0..3 {
                        let seed = derive_seed(spec.seed, c, 1);
                        let hit = occlude(encrypted.channel(c), *d, spec.occlusion_mode, seed)?;
                        let (_, rec) = cipher.decrypt_channel(&hit, None)?;
                        out.push(row(
                            AttackKind::Occlusion(spec.occlusion_mode),
                            *d,
                            c,
                            &rec,
                            &hit,
                        )?);
                    }
                }
                Job::Noise(v) => {
                    for c in 0..3 {
                        let seed = derive_seed(spec.seed, c, 2);
                        let hit = gaussian_noise(encrypted.channel(c), *v, seed)?;
                        let (_, rec) = cipher.decrypt_channel(&hit, None)?;
                        out.push(row(AttackKind::Noise, *v, c, &rec, &hit)?);
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    sort_rows(&mut rows);

    let g = &key.geometry;
    Ok(AttackReport {
        key_fingerprint: key.fingerprint(),
        geometry: format!(
            "{}x{} pinholes, pitch {} mm, gap {} mm, distance {} mm, m={}",
            g.pinholes_x(),
            g.pinholes_y(),
            g.pitch_mm(),
            g.gap_mm(),
            g.distance_mm(),
            g.pixels_per_elemental()
        ),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(w: usize, h: usize, f: impl FnMut(usize, usize) -> u8) -> PlaneImage {
        PlaneImage::from_fn(w, h, f).unwrap()
    }

    #[test]
    fn mse_examples() {
        let a = plane(4, 4, |x, y| (x * 16 + y) as u8);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let black = PlaneImage::filled(3, 3, 0).unwrap();
        let white = PlaneImage::filled(3, 3, 255).unwrap();
        assert_eq!(mse(&black, &white).unwrap(), 65025.0);
        assert!(mse(&a, &black).is_err());
    }

    #[test]
    fn mse_matches_naive_summation() {
        let a = plane(37, 23, |x, y| ((x * 131 + y * 71) % 256) as u8);
        let b = plane(37, 23, |x, y| ((x * 17 + y * 233 + 5) % 256) as u8);
        let mut naive = 0.0f64;
        for y in 0..23 {
            for x in 0..37 {
                let d = a.get(x, y) as f64 - b.get(x, y) as f64;
                naive += d * d;
            }
        }
        naive /= (37 * 23) as f64;
        assert!((mse(&a, &b).unwrap() - naive).abs() < 1e-9);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }

    #[test]
    fn psnr_examples() {
        let a = PlaneImage::filled(2, 2, 10).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert!((psnr_from_mse(1.0) - 48.1308).abs() < 1e-4);
        assert!((psnr_from_mse(1.0) - 20.0 * 255f64.log10()).abs() < 1e-12);
        assert_eq!(psnr_from_mse(65025.0), 0.0);
        let b = PlaneImage::filled(2, 2, 11).unwrap();
        assert!((psnr(&a, &b).unwrap() - 48.1308).abs() < 1e-4);
    }

    #[test]
    fn histogram_statistics() {
        let constant = PlaneImage::filled(16, 16, 9).unwrap();
        let h = histogram(&constant);
        assert_eq!(h[9], 256);
        assert_eq!(h.iter().sum::<u64>(), 256);
        assert_eq!(entropy(&constant), 0.0);
        // Every pixel in one bin: 255 bins at expected 1 plus one at 256.
        assert_eq!(chi_square_uniform(&constant), 255.0 + 255.0 * 255.0);

        let flat = plane(16, 16, |x, y| (y * 16 + x) as u8);
        assert_eq!(entropy(&flat), 8.0);
        assert_eq!(chi_square_uniform(&flat), 0.0);
    }

    #[test]
    fn entropy_never_exceeds_eight_bits() {
        for salt in 0..20u64 {
            let mut rng = NoiseRng::new(salt);
            let img = plane(64, 64, |_, _| rng_byte(&mut rng));
            let e = entropy(&img);
            assert!((0.0..=8.0).contains(&e));
        }
    }

    fn rng_byte(rng: &mut NoiseRng) -> u8 {
        (rng.next_u64() >> 56) as u8
    }

    #[test]
    fn rng_is_pinned() {
        let mut rng = NoiseRng::new(0);
        assert_eq!(rng.next_u64(), 1442695040888963407);
        assert_eq!(
            rng.next_u64(),
            1442695040888963407u64
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407)
        );
        let mut rng = NoiseRng::new(42);
        for _ in 0..10_000 {
            let u = rng.next_unit();
            assert!(u > 0.0 && u <= 1.0);
            assert!(rng.next_below(7) < 7);
        }
    }

    #[test]
    fn normals_have_unit_moments() {
        let mut rng = NoiseRng::new(7);
        let n = 400_000;
        let draws: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn block_occlusion_counts() {
        let img = PlaneImage::filled(900, 900, 200).unwrap();
        let out = occlude(&img, 0.5, OcclusionMode::Block, 0).unwrap();
        assert_eq!(out.as_slice().iter().filter(|&&v| v == 0).count(), 405_000);
        assert!(out.as_slice()[..405_000].iter().all(|&v| v == 0));
        assert_eq!(occlude(&out, 0.5, OcclusionMode::Block, 0).unwrap(), out);
        let small = PlaneImage::filled(10, 100, 1).unwrap();
        let out = occlude(&small, 0.07, OcclusionMode::Block, 0).unwrap();
        assert_eq!(out.as_slice().iter().filter(|&&v| v == 0).count(), 70);
    }

    #[test]
    fn random_occlusion_is_exact_and_deterministic() {
        let img = PlaneImage::filled(300, 200, 9).unwrap();
        let a = occlude(&img, 0.3, OcclusionMode::Random, 99).unwrap();
        let b = occlude(&img, 0.3, OcclusionMode::Random, 99).unwrap();
        let c = occlude(&img, 0.3, OcclusionMode::Random, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.as_slice().iter().filter(|&&v| v == 0).count(), 18_000);
        let tiny = occlude(&img, 1e-6, OcclusionMode::Random, 1).unwrap();
        assert_eq!(tiny.as_slice().iter().filter(|&&v| v == 0).count(), 1);
    }

    #[test]
    fn occlusion_fraction_is_validated() {
        let img = PlaneImage::filled(4, 4, 1).unwrap();
        for d in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                occlude(&img, d, OcclusionMode::Block, 0),
                Err(Error::FractionOutOfRange(_))
            ));
        }
    }

    #[test]
    fn noise_examples() {
        let img = plane(50, 50, |x, y| (x * 5 + y) as u8);
        assert_eq!(gaussian_noise(&img, 0.0, 3).unwrap(), img);
        let black = PlaneImage::filled(20, 20, 0).unwrap();
        assert_eq!(gaussian_noise(&black, 0.8, 3).unwrap(), black);
        assert!(gaussian_noise(&img, -0.1, 3).is_err());
        assert_eq!(
            gaussian_noise(&img, 0.5, 11).unwrap(),
            gaussian_noise(&img, 0.5, 11).unwrap()
        );
    }

    #[test]
    fn noise_is_zero_mean() {
        let gray = PlaneImage::filled(1000, 1000, 128).unwrap();
        let noisy = gaussian_noise(&gray, 0.1, 2024).unwrap();
        let mean = noisy.as_slice().iter().map(|&v| v as f64).sum::<f64>() / 1e6;
        assert!((mean - 128.0).abs() < 0.01 * 128.0, "mean {mean}");
    }

    #[test]
    fn csv_formatting() {
        let report = AttackReport {
            key_fingerprint: "x".into(),
            geometry: "g".into(),
            rows: vec![
                AttackRow {
                    image: "dice".into(),
                    attack: AttackKind::Occlusion(OcclusionMode::Block),
                    param: 0.5,
                    channel: 1,
                    psnr_db: 28.33612,
                    entropy_bits: 7.99921,
                },
                AttackRow {
                    image: "dice".into(),
                    attack: AttackKind::None,
                    param: 21.0,
                    channel: 0,
                    psnr_db: f64::INFINITY,
                    entropy_bits: 8.0,
                },
            ],
        };
        assert_eq!(
            report.to_csv(),
            "image,attack,param,channel,psnr_db,entropy_bits\n\
             dice,occlusion-block,0.5000,G,28.3361,7.9992\n\
             dice,none,21.0000,R,inf,8.0000\n"
        );
    }

    #[test]
    fn wrong_keys_for_reference() {
        let [(k1, p1, x), (k2, p2, l), (k3, _, r)] = wrong_keys(&KeyMaterial::reference()).unwrap();
        assert_eq!(
            (k1, k2, k3),
            (
                AttackKind::WrongX0,
                AttackKind::WrongDistance,
                AttackKind::WrongRules
            )
        );
        assert!((p1 - 0.1675727).abs() < 1e-12);
        assert!((x.logistic.x0() - 0.1675727).abs() < 1e-12);
        assert_eq!((p2, l.geometry.distance_mm()), (30.0, 30.0));
        assert_eq!(r.rules.to_string(), "90,90,150,90,90,90,150,90");
    }
}
