//! Raster and pickup-geometry types shared by every stage.
//!
//! Rasters are row-major with the origin at the top-left corner, x growing
//! rightward and y downward.

use crate::error::{dims, Error, Result};

/// Dense 8-bit single-channel raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlaneImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl PlaneImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} samples", width * height),
                actual: format!("{} samples", data.len()),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Calls `f` in row-major order.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }

    /// Panics when `(x, y)` is outside the raster.
    pub fn get(&self, x: usize, y: usize) -> u8 {
        assert!(
            x < self.width && y < self.height,
            "pixel ({x}, {y}) out of bounds"
        );
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        assert!(
            x < self.width && y < self.height,
            "pixel ({x}, {y}) out of bounds"
        );
        self.data[y * self.width + x] = value;
    }

    pub fn same_dims(&self, other: &PlaneImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same_dims(&self, other: &PlaneImage) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: dims(self.width, self.height),
                actual: dims(other.width, other.height),
            })
        }
    }

    /// Returns a raster of identical dimensions with each sample replaced by `f(sample)`.
    pub fn map(&self, f: impl Fn(u8) -> u8) -> PlaneImage {
        PlaneImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Three equally sized channels in R, G, B order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColorImage {
    channels: [PlaneImage; 3],
}

impl ColorImage {
    pub fn width(&self) -> usize {
        self.channels[0].width()
    }

    pub fn height(&self) -> usize {
        self.channels[0].height()
    }

    pub fn channels(&self) -> &[PlaneImage; 3] {
        &self.channels
    }

    pub fn channel(&self, index: usize) -> &PlaneImage {
        &self.channels[index]
    }

    /// Builds a color image from interleaved RGB bytes.
    pub fn from_interleaved(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::DimensionMismatch {
                expected: format!("{} interleaved bytes", width * height * 3),
                actual: format!("{} bytes", rgb.len()),
            });
        }
        let mut planes = [
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
        ];
        for px in rgb.chunks_exact(3) {
            for (plane, &v) in planes.iter_mut().zip(px) {
                plane.push(v);
            }
        }
        let [r, g, b] = planes;
        merge_channels(
            PlaneImage::new(width, height, r)?,
            PlaneImage::new(width, height, g)?,
            PlaneImage::new(width, height, b)?,
        )
    }

    pub fn to_interleaved(&self) -> Vec<u8> {
        let [r, g, b] = &self.channels;
        let mut out = Vec::with_capacity(r.len() * 3);
        for ((&rv, &gv), &bv) in r.as_slice().iter().zip(g.as_slice()).zip(b.as_slice()) {
            out.extend_from_slice(&[rv, gv, bv]);
        }
        out
    }

    /// Applies `f` to each channel independently.
    pub fn try_map_channels(
        &self,
        f: impl Fn(&PlaneImage) -> Result<PlaneImage> + Sync + Send,
    ) -> Result<ColorImage> {
        use rayon::prelude::*;
        let out: Vec<PlaneImage> = self
            .channels
            .par_iter()
            .map(f)
            .collect::<Result<Vec<_>>>()?;
        let [r, g, b]: [PlaneImage; 3] = out.try_into().expect("three channels");
        merge_channels(r, g, b)
    }
}

pub fn split_channels(img: &ColorImage) -> (PlaneImage, PlaneImage, PlaneImage) {
    let [r, g, b] = img.channels.clone();
    (r, g, b)
}

pub fn merge_channels(r: PlaneImage, g: PlaneImage, b: PlaneImage) -> Result<ColorImage> {
    r.check_same_dims(&g)?;
    r.check_same_dims(&b)?;
    Ok(ColorImage {
        channels: [r, g, b],
    })
}

/// Pinhole-array pickup configuration.
///
/// Lengths are in millimetres. The elemental-image pixel pitch is
/// `pitch_mm / pixels_per_elemental`, and the object plane is sampled on the
/// same grid, so the plane image and the EIA share dimensions
/// `(pinholes_x * m, pinholes_y * m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PickupGeometry {
    pinholes_x: usize,
    pinholes_y: usize,
    pitch_mm: f64,
    gap_mm: f64,
    distance_mm: f64,
    pixels_per_elemental: usize,
}

impl PickupGeometry {
    pub fn new(
        pinholes_x: usize,
        pinholes_y: usize,
        pitch_mm: f64,
        gap_mm: f64,
        distance_mm: f64,
        pixels_per_elemental: usize,
    ) -> Result<Self> {
        if pinholes_x == 0 || pinholes_y == 0 || pixels_per_elemental == 0 {
            return Err(Error::InvalidGeometry(format!(
                "pinhole counts and pixels per elemental image must be at least 1 \
                 (got {pinholes_x}x{pinholes_y}, m={pixels_per_elemental})"
            )));
        }
        if !(pitch_mm > 0.0 && pitch_mm.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "pitch must be positive, got {pitch_mm}"
            )));
        }
        for (name, v) in [("gap", gap_mm), ("distance", distance_mm)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidGeometry(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(Self {
            pinholes_x,
            pinholes_y,
            pitch_mm,
            gap_mm,
            distance_mm,
            pixels_per_elemental,
        })
    }

    /// 30x30 pinholes, 1.08 mm pitch, 3 mm gap, 69 mm pickup distance, 30 px tiles.
    pub fn reference() -> Self {
        Self::new(30, 30, 1.08, 3.0, 69.0, 30).expect("reference geometry is valid")
    }

    pub fn pinholes_x(&self) -> usize {
        self.pinholes_x
    }

    pub fn pinholes_y(&self) -> usize {
        self.pinholes_y
    }

    pub fn pitch_mm(&self) -> f64 {
        self.pitch_mm
    }

    pub fn gap_mm(&self) -> f64 {
        self.gap_mm
    }

    pub fn distance_mm(&self) -> f64 {
        self.distance_mm
    }

    pub fn pixels_per_elemental(&self) -> usize {
        self.pixels_per_elemental
    }

    pub fn width(&self) -> usize {
        self.pinholes_x * self.pixels_per_elemental
    }

    pub fn height(&self) -> usize {
        self.pinholes_y * self.pixels_per_elemental
    }

    /// Side length of one pixel, in mm.
    pub fn pixel_pitch_mm(&self) -> f64 {
        self.pitch_mm / self.pixels_per_elemental as f64
    }

    pub fn with_distance(&self, distance_mm: f64) -> Result<Self> {
        Self::new(
            self.pinholes_x,
            self.pinholes_y,
            self.pitch_mm,
            self.gap_mm,
            distance_mm,
            self.pixels_per_elemental,
        )
    }

    pub fn with_gap(&self, gap_mm: f64) -> Result<Self> {
        Self::new(
            self.pinholes_x,
            self.pinholes_y,
            self.pitch_mm,
            gap_mm,
            self.distance_mm,
            self.pixels_per_elemental,
        )
    }

    pub(crate) fn check_image(&self, img: &PlaneImage) -> Result<()> {
        if img.width() != self.width() || img.height() != self.height() {
            return Err(Error::DimensionMismatch {
                expected: dims(self.width(), self.height()),
                actual: dims(img.width(), img.height()),
            });
        }
        Ok(())
    }
}

/// How the pixels of an elemental image array relate to rays through the
/// pinhole array. Reconstruction uses it to decide which pixels carry a ray
/// and where the virtual pinholes sit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EiaLayout {
    /// Unknown provenance: every pixel is a ray through a pinhole centred on its tile.
    Raw,
    /// Output of [`crate::cgii::cgii_pickup`].
    Direct,
    /// Output of [`crate::smartmap::depth_convert`].
    DepthConverted,
}

/// A `pinholes_x x pinholes_y` grid of `m x m` elemental images.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementalImageArray {
    geometry: PickupGeometry,
    layout: EiaLayout,
    raster: PlaneImage,
}

impl ElementalImageArray {
    pub fn new(geometry: PickupGeometry, layout: EiaLayout, raster: PlaneImage) -> Result<Self> {
        geometry.check_image(&raster)?;
        Ok(Self {
            geometry,
            layout,
            raster,
        })
    }

    pub fn geometry(&self) -> &PickupGeometry {
        &self.geometry
    }

    pub fn layout(&self) -> EiaLayout {
        self.layout
    }

    pub fn raster(&self) -> &PlaneImage {
        &self.raster
    }

    pub fn into_raster(self) -> PlaneImage {
        self.raster
    }

    /// Copy of tile `(i, j)`: columns `[i*m, (i+1)*m)`, rows `[j*m, (j+1)*m)`.
    pub fn tile(&self, i: usize, j: usize) -> Result<PlaneImage> {
        elemental_tile(self, i, j)
    }
}

pub fn elemental_tile(eia: &ElementalImageArray, i: usize, j: usize) -> Result<PlaneImage> {
    let g = &eia.geometry;
    if i >= g.pinholes_x || j >= g.pinholes_y {
        return Err(Error::IndexOutOfRange {
            i,
            j,
            p: g.pinholes_x,
            q: g.pinholes_y,
        });
    }
    let m = g.pixels_per_elemental;
    let w = eia.raster.width();
    let src = eia.raster.as_slice();
    let mut data = Vec::with_capacity(m * m);
    for row in j * m..(j + 1) * m {
        let start = row * w + i * m;
        data.extend_from_slice(&src[start..start + m]);
    }
    PlaneImage::new(m, m, data)
}
