//! Encryption and decryption pipelines and the key file format.
//!
//! Encryption of one channel:
//! pickup -> depth conversion -> XOR with the CA mask -> logistic scramble.
//! Decryption undoes the two cipher stages in reverse order and reconstructs
//! the plane image from the recovered depth-converted EIA.

use std::collections::HashMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::ca::{generate_mask, xor_mask, CaState, Mask, RuleVector};
use crate::cgii::{cgii_pickup, ciir_reconstruct};
use crate::chaos::{build_permutation, scramble, unscramble, LogisticParams, Permutation};
use crate::error::{Error, Result};
use crate::image::{ColorImage, EiaLayout, ElementalImageArray, PickupGeometry, PlaneImage};
use crate::smartmap::{conversion_distance, depth_convert};

/// Everything needed to encrypt and decrypt. Shared by all three channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyMaterial {
    pub geometry: PickupGeometry,
    pub logistic: LogisticParams,
    pub rules: RuleVector,
    pub ca_seed: CaState,
}

impl KeyMaterial {
    pub fn new(
        geometry: PickupGeometry,
        logistic: LogisticParams,
        rules: RuleVector,
        ca_seed: CaState,
    ) -> Result<Self> {
        if ca_seed.0 == 0 {
            return Err(Error::ZeroSeed);
        }
        conversion_distance(&geometry)?;
        let m = geometry.pixels_per_elemental();
        if geometry.pinholes_x() != m || geometry.pinholes_y() != m {
            return Err(Error::DepthNotConvertible(format!(
                "pinhole array {}x{} must match m={m} for smart mapping",
                geometry.pinholes_x(),
                geometry.pinholes_y()
            )));
        }
        Ok(Self {
            geometry,
            logistic,
            rules,
            ca_seed,
        })
    }

    /// Reference configuration with CA seed 0x5A.
    pub fn reference() -> Self {
        Self::new(
            PickupGeometry::reference(),
            LogisticParams::reference(),
            RuleVector::reference(),
            CaState(0x5A),
        )
        .expect("reference key is valid")
    }

    /// Reconstruction distance of the depth-converted EIA, `m*g - l`.
    pub fn converted_depth_mm(&self) -> f64 {
        conversion_distance(&self.geometry)
            .expect("validated at construction")
            .z_out_mm
    }

    /// First 16 hex digits of the SHA-256 of the canonical key text.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(serialize_key(self).as_bytes());
        digest[..8].iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StageSelection {
    mask: bool,
    scramble: bool,
}

impl StageSelection {
    pub const ALL: StageSelection = StageSelection {
        mask: true,
        scramble: true,
    };
    pub const MASK_ONLY: StageSelection = StageSelection {
        mask: true,
        scramble: false,
    };
    pub const SCRAMBLE_ONLY: StageSelection = StageSelection {
        mask: false,
        scramble: true,
    };

    pub fn new(mask: bool, scramble: bool) -> Result<Self> {
        if !mask && !scramble {
            return Err(Error::NoStageSelected);
        }
        Ok(Self { mask, scramble })
    }

    pub fn mask(&self) -> bool {
        self.mask
    }

    pub fn scramble(&self) -> bool {
        self.scramble
    }
}

impl Default for StageSelection {
    fn default() -> Self {
        Self::ALL
    }
}

/// Key schedule expanded once for a given raster size: the mask and the
/// permutation are reused across channels.
#[derive(Debug, Clone)]
pub struct Cipher {
    key: KeyMaterial,
    stages: StageSelection,
    mask: Option<Mask>,
    perm: Option<Permutation>,
}

impl Cipher {
    pub fn new(key: &KeyMaterial, stages: StageSelection) -> Result<Self> {
        let (w, h) = (key.geometry.width(), key.geometry.height());
        let mask = if stages.mask {
            Some(generate_mask(key.ca_seed, &key.rules, w, h)?)
        } else {
            None
        };
        let perm = if stages.scramble {
            Some(build_permutation(&key.logistic, w * h)?)
        } else {
            None
        };
        Ok(Self {
            key: *key,
            stages,
            mask,
            perm,
        })
    }

    pub fn key(&self) -> &KeyMaterial {
        &self.key
    }

    pub fn stages(&self) -> StageSelection {
        self.stages
    }

    /// Pickup followed by depth conversion.
    pub fn depth_converted_eia(&self, channel: &PlaneImage) -> Result<ElementalImageArray> {
        depth_convert(&cgii_pickup(channel, &self.key.geometry)?)
    }

    /// Mask then scramble.
    pub fn seal(&self, eia: &PlaneImage) -> Result<PlaneImage> {
        let masked = match &self.mask {
            Some(mask) => xor_mask(eia, mask)?,
            None => eia.clone(),
        };
        match &self.perm {
            Some(perm) => scramble(&masked, perm),
            None => Ok(masked),
        }
    }

    /// Unscramble then unmask.
    pub fn open(&self, cipher: &PlaneImage) -> Result<PlaneImage> {
        self.key.geometry.check_image(cipher)?;
        let unscrambled = match &self.perm {
            Some(perm) => unscramble(cipher, perm)?,
            None => cipher.clone(),
        };
        match &self.mask {
            Some(mask) => xor_mask(&unscrambled, mask),
            None => Ok(unscrambled),
        }
    }

    pub fn encrypt_channel(&self, channel: &PlaneImage) -> Result<PlaneImage> {
        let eia = self.depth_converted_eia(channel)?;
        self.seal(eia.raster())
    }

    pub fn decrypt_channel(
        &self,
        cipher: &PlaneImage,
        z_mm: Option<f64>,
    ) -> Result<(ElementalImageArray, PlaneImage)> {
        let recovered = ElementalImageArray::new(
            self.key.geometry,
            EiaLayout::DepthConverted,
            self.open(cipher)?,
        )?;
        let z = z_mm.unwrap_or_else(|| self.key.converted_depth_mm());
        let rec = ciir_reconstruct(&recovered, z)?;
        Ok((recovered, rec.image))
    }

    pub fn encrypt(&self, img: &ColorImage) -> Result<ColorImage> {
        img.try_map_channels(|ch| self.encrypt_channel(ch))
    }

    pub fn decrypt(&self, img: &ColorImage, z_mm: Option<f64>) -> Result<ColorImage> {
        img.try_map_channels(|ch| self.decrypt_channel(ch, z_mm).map(|(_, rec)| rec))
    }
}

pub fn encrypt_channel(
    channel: &PlaneImage,
    key: &KeyMaterial,
    stages: StageSelection,
) -> Result<PlaneImage> {
    Cipher::new(key, stages)?.encrypt_channel(channel)
}

pub fn decrypt_channel(
    channel: &PlaneImage,
    key: &KeyMaterial,
    stages: StageSelection,
    z_mm: Option<f64>,
) -> Result<(ElementalImageArray, PlaneImage)> {
    Cipher::new(key, stages)?.decrypt_channel(channel, z_mm)
}

pub fn encrypt(img: &ColorImage, key: &KeyMaterial, stages: StageSelection) -> Result<ColorImage> {
    Cipher::new(key, stages)?.encrypt(img)
}

pub fn decrypt(
    img: &ColorImage,
    key: &KeyMaterial,
    stages: StageSelection,
    z_mm: Option<f64>,
) -> Result<ColorImage> {
    Cipher::new(key, stages)?.decrypt(img, z_mm)
}

const FIELDS: [&str; 9] = [
    "pinholes",
    "pitch_mm",
    "gap_mm",
    "distance_mm",
    "pixels_per_elemental",
    "x0",
    "rho0",
    "ca_rules",
    "ca_seed",
];

/// Canonical `name=value` text, one field per line.
pub fn serialize_key(key: &KeyMaterial) -> String {
    let g = &key.geometry;
    format!(
        "pinholes={}x{}\npitch_mm={}\ngap_mm={}\ndistance_mm={}\npixels_per_elemental={}\n\
         x0={}\nrho0={}\nca_rules={}\nca_seed=0x{:02X}\n",
        g.pinholes_x(),
        g.pinholes_y(),
        g.pitch_mm(),
        g.gap_mm(),
        g.distance_mm(),
        g.pixels_per_elemental(),
        key.logistic.x0(),
        key.logistic.rho(),
        key.rules,
        key.ca_seed.0,
    )
}

fn key_err(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::KeyParse {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

/// Parses key text. Blank lines and `#` comments are ignored;
/// `pixels_per_elemental` defaults to the horizontal pinhole count.
pub fn parse_key(text: &str) -> Result<KeyMaterial> {
    let mut values: HashMap<&str, (usize, &str)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (name, value) = line
            .split_once('=')
            .ok_or_else(|| key_err(line_no, line, "expected `name=value`"))?;
        let (name, value) = (name.trim(), value.trim());
        let field = FIELDS
            .iter()
            .find(|f| **f == name)
            .ok_or_else(|| key_err(line_no, name, "unknown field"))?;
        if values.insert(field, (line_no, value)).is_some() {
            return Err(key_err(line_no, name, "duplicate field"));
        }
    }
    let eof = text.lines().count() + 1;
    let get = |name: &str| -> Result<(usize, &str)> {
        values
            .get(name)
            .copied()
            .ok_or_else(|| key_err(eof, name, "missing field"))
    };
    let real = |name: &str| -> Result<(usize, f64)> {
        let (line, v) = get(name)?;
        let x: f64 = v
            .parse()
            .map_err(|_| key_err(line, name, format!("`{v}` is not a number")))?;
        if !x.is_finite() {
            return Err(key_err(line, name, "value must be finite"));
        }
        Ok((line, x))
    };

    let (pin_line, pins) = get("pinholes")?;
    let (px, py) = pins
        .split_once(['x', 'X'])
        .and_then(|(a, b)| {
            Some((
                a.trim().parse::<usize>().ok()?,
                b.trim().parse::<usize>().ok()?,
            ))
        })
        .ok_or_else(|| {
            key_err(
                pin_line,
                "pinholes",
                format!("`{pins}` is not of the form PxQ"),
            )
        })?;
    let (_, pitch) = real("pitch_mm")?;
    let (_, gap) = real("gap_mm")?;
    let (dist_line, distance) = real("distance_mm")?;
    let m = match values.get("pixels_per_elemental") {
        Some(&(line, v)) => v.parse::<usize>().map_err(|_| {
            key_err(
                line,
                "pixels_per_elemental",
                format!("`{v}` is not a count"),
            )
        })?,
        None => px,
    };
    let geometry = PickupGeometry::new(px, py, pitch, gap, distance, m)
        .map_err(|e| key_err(pin_line, "pinholes", e.to_string()))?;

    let (x0_line, x0) = real("x0")?;
    let (rho_line, rho) = real("rho0")?;
    let logistic = LogisticParams::new(x0, rho).map_err(|e| {
        let (line, field) = if x0 > 0.0 && x0 < 1.0 {
            (rho_line, "rho0")
        } else {
            (x0_line, "x0")
        };
        key_err(line, field, e.to_string())
    })?;

    let (rules_line, rules_text) = get("ca_rules")?;
    let rules: RuleVector = rules_text
        .parse()
        .map_err(|e: String| key_err(rules_line, "ca_rules", e))?;

    let (seed_line, seed_text) = get("ca_seed")?;
    let seed = match seed_text
        .strip_prefix("0x")
        .or_else(|| seed_text.strip_prefix("0X"))
    {
        Some(hex) => u8::from_str_radix(hex, 16),
        None => seed_text.parse::<u8>(),
    }
    .map_err(|_| key_err(seed_line, "ca_seed", format!("`{seed_text}` is not a byte")))?;

    KeyMaterial::new(geometry, logistic, rules, CaState(seed)).map_err(|e| match e {
        Error::ZeroSeed => key_err(seed_line, "ca_seed", e.to_string()),
        other => key_err(dist_line, "distance_mm", other.to_string()),
    })
}
