//! Eight-cell hybrid rule-90/150 cellular automaton with null boundaries and
//! the XOR mask built from its state sequence.
//!
//! Cell 0 is the most significant bit of the state byte.

use std::fmt;
use std::str::FromStr;

use crate::error::{dims, Error, Result};
use crate::image::PlaneImage;

pub const CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// `a'[i] = a[i-1] ^ a[i+1]`
    R90,
    /// `a'[i] = a[i-1] ^ a[i] ^ a[i+1]`
    R150,
}

impl Rule {
    pub fn number(self) -> u16 {
        match self {
            Rule::R90 => 90,
            Rule::R150 => 150,
        }
    }
}

impl TryFrom<u16> for Rule {
    type Error = Error;

    fn try_from(n: u16) -> Result<Self> {
        match n {
            90 => Ok(Rule::R90),
            150 => Ok(Rule::R150),
            other => Err(Error::InvalidRule(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RuleVector(pub [Rule; CELLS]);

impl RuleVector {
    /// (150, 90, 150, 90, 90, 90, 150, 90)
    pub fn reference() -> Self {
        Self::from_numbers([150, 90, 150, 90, 90, 90, 150, 90]).expect("valid rules")
    }

    pub fn from_numbers(numbers: [u16; CELLS]) -> Result<Self> {
        let mut rules = [Rule::R90; CELLS];
        for (r, n) in rules.iter_mut().zip(numbers) {
            *r = Rule::try_from(n)?;
        }
        Ok(Self(rules))
    }

    /// Bitmask of the cells running rule 150, in state-byte order.
    fn self_mask(&self) -> u8 {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == Rule::R150)
            .fold(0u8, |acc, (i, _)| acc | (0x80 >> i))
    }
}

impl fmt::Display for RuleVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", r.number())?;
        }
        Ok(())
    }
}

impl FromStr for RuleVector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<&str> = s
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .collect();
        if parts.len() != CELLS {
            return Err(format!("expected {CELLS} rules, found {}", parts.len()));
        }
        let mut numbers = [0u16; CELLS];
        for (n, p) in numbers.iter_mut().zip(&parts) {
            *n = p
                .parse()
                .map_err(|_| format!("`{p}` is not a rule number"))?;
        }
        RuleVector::from_numbers(numbers).map_err(|e| e.to_string())
    }
}

/// Eight binary cells packed into a byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CaState(pub u8);

/// One synchronous update with fixed-zero cells beyond both ends.
pub fn ca_step(state: CaState, rules: &RuleVector) -> CaState {
    let s = state.0;
    // Left neighbour of cell i is the next more significant bit.
    let left = s >> 1;
    let right = s << 1;
    CaState(left ^ right ^ (s & rules.self_mask()))
}

/// Iterator over the successive states after the seed.
#[derive(Debug, Clone)]
pub struct CaStream {
    state: CaState,
    rules: RuleVector,
}

impl CaStream {
    pub fn new(seed: CaState, rules: RuleVector) -> Result<Self> {
        if seed.0 == 0 {
            return Err(Error::ZeroSeed);
        }
        Ok(Self { state: seed, rules })
    }
}

impl Iterator for CaStream {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        self.state = ca_step(self.state, &self.rules);
        Some(self.state.0)
    }
}

/// Bytes `state_1 .. state_n`.
pub fn byte_stream(seed: CaState, rules: &RuleVector, n: usize) -> Result<Vec<u8>> {
    Ok(CaStream::new(seed, *rules)?.take(n).collect())
}

/// Smallest `t >= 1` with `state_t == seed`.
pub fn measure_period(seed: CaState, rules: &RuleVector) -> Result<usize> {
    let stream = CaStream::new(seed, *rules)?;
    // A linear map on 8 bits returns to any state on its cycle within 255 steps;
    // seeds on a transient tail never return.
    for (t, s) in stream.enumerate().take(256) {
        if s == seed.0 {
            return Ok(t + 1);
        }
    }
    Err(Error::ParamOutOfRange(format!(
        "seed {:#04x} is not on a cycle of the automaton",
        seed.0
    )))
}

/// W x H bytes of keystream in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask(PlaneImage);

impl Mask {
    pub fn as_plane(&self) -> &PlaneImage {
        &self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }
}

pub fn generate_mask(
    seed: CaState,
    rules: &RuleVector,
    width: usize,
    height: usize,
) -> Result<Mask> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    let data = byte_stream(seed, rules, width * height)?;
    Ok(Mask(PlaneImage::new(width, height, data)?))
}

pub fn xor_mask(img: &PlaneImage, mask: &Mask) -> Result<PlaneImage> {
    if !img.same_dims(&mask.0) {
        return Err(Error::DimensionMismatch {
            expected: dims(mask.width(), mask.height()),
            actual: dims(img.width(), img.height()),
        });
    }
    let data = img
        .as_slice()
        .iter()
        .zip(mask.0.as_slice())
        .map(|(a, b)| a ^ b)
        .collect();
    PlaneImage::new(img.width(), img.height(), data)
}
