//! Optical-style image encryption built on computer-generated integral
//! imaging.
//!
//! A colour image is picked up through a simulated pinhole array, the
//! elemental image array is depth-converted by smart mapping, XOR-masked with
//! a hybrid rule-90/150 cellular-automaton keystream and finally scrambled by
//! a logistic-map permutation. Decryption undoes the two cipher stages and
//! reconstructs the scene computationally at the converted distance.
//!
//! ```
//! use depthcrypt::{Cipher, ColorImage, KeyMaterial, PickupGeometry, StageSelection};
//! use depthcrypt::{ca::{CaState, RuleVector}, chaos::LogisticParams};
//!
//! let geo = PickupGeometry::new(8, 8, 1.0, 2.0, 10.0, 8).unwrap();
//! let key = KeyMaterial::new(geo, LogisticParams::reference(), RuleVector::reference(), CaState(0x5A)).unwrap();
//! let cipher = Cipher::new(&key, StageSelection::ALL).unwrap();
//! let rgb: Vec<u8> = (0..64 * 64 * 3).map(|i| (i % 251) as u8).collect();
//! let img = ColorImage::from_interleaved(64, 64, &rgb).unwrap();
//! let sealed = cipher.encrypt(&img).unwrap();
//! let eia = cipher.depth_converted_eia(img.channel(0)).unwrap();
//! assert_eq!(&cipher.open(sealed.channel(0)).unwrap(), eia.raster());
//! ```

pub mod analysis;
pub mod ca;
pub mod cgii;
pub mod chaos;
pub mod cipher;
pub mod error;
pub mod image;
pub mod smartmap;

pub use analysis::{psnr, AttackReport, SuiteSpec};
pub use cgii::{cgii_pickup, ciir_reconstruct, depth_scan};
pub use cipher::{parse_key, serialize_key, Cipher, KeyMaterial, StageSelection};
pub use error::{Error, Result};
pub use image::{ColorImage, EiaLayout, ElementalImageArray, PickupGeometry, PlaneImage};
pub use smartmap::depth_convert;
