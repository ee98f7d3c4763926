//! Depth conversion by pixel-to-pixel smart mapping.
//!
//! An EIA picked up at distance `l` is rewritten into the array that a
//! pinhole array at `d = m * g` would have recorded, so the scene
//! reconstructs at the short distance `d - l` with magnification
//! `(d - l) / g` instead of `l / g`.
//!
//! Along one axis, target pixel `j` of elemental image `i` is read from
//! source elemental `p` and pixel `q`:
//!
//! ```text
//! q = (m - 1) - j
//! p = i + m/2 - j          (m even)
//! p = i + (m + 1)/2 - j    (m odd)
//! ```
//!
//! The 2-D map applies this independently to columns and rows.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{EiaLayout, ElementalImageArray, PickupGeometry, PlaneImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthConversionParams {
    pub m: usize,
    /// Fixed conversion distance `m * g`.
    pub d_mm: f64,
    /// Reconstruction distance of the converted array, `d - l`.
    pub z_out_mm: f64,
}

pub fn conversion_distance(geo: &PickupGeometry) -> Result<DepthConversionParams> {
    let m = geo.pixels_per_elemental();
    let d_mm = m as f64 * geo.gap_mm();
    let l = geo.distance_mm();
    if l >= d_mm {
        return Err(Error::DepthNotConvertible(format!(
            "pickup distance {l} mm must be below m*g = {d_mm} mm"
        )));
    }
    Ok(DepthConversionParams {
        m,
        d_mm,
        z_out_mm: d_mm - l,
    })
}

/// Source `(p, q)` for target elemental `i`, pixel `j`, or `None` when `p`
/// falls outside `[0, elementals)`.
pub fn smart_map_indices(
    i: usize,
    j: usize,
    m: usize,
    elementals: usize,
) -> Result<Option<(usize, usize)>> {
    if j >= m {
        return Err(Error::InvalidPixelIndex { index: j, m });
    }
    Ok(source_index(i, j, m, elementals))
}

pub(crate) fn source_index(
    i: usize,
    j: usize,
    m: usize,
    elementals: usize,
) -> Option<(usize, usize)> {
    let q = m - 1 - j;
    let lead = m.div_ceil(2);
    let p = (i + lead).checked_sub(j)?;
    (p < elementals).then_some((p, q))
}

/// Lateral offset, in pixels, of the virtual pinhole array that the
/// converted EIA corresponds to.
///
/// The integer index law cannot centre the converted array on the original
/// pinholes: with pinholes at tile centres the recovered scene sits `m/2`
/// pixels (half a pitch) over for even `m` and `m` pixels (one pitch) over
/// for odd `m`. Reconstruction places its pinholes accordingly.
pub fn converted_array_shift_px(m: usize) -> f64 {
    if m.is_multiple_of(2) {
        m as f64 / 2.0
    } else {
        m as f64
    }
}

/// Converts a directly picked-up EIA into its depth-converted counterpart.
///
/// Requires square arrays with as many elemental images per side as pixels
/// per elemental image. Cells whose source elemental lies outside the array
/// are 0.
pub fn depth_convert(eia: &ElementalImageArray) -> Result<ElementalImageArray> {
    let geo = eia.geometry();
    conversion_distance(geo)?;
    if eia.layout() == EiaLayout::DepthConverted {
        return Err(Error::DepthNotConvertible(
            "array is already depth-converted".into(),
        ));
    }
    let m = geo.pixels_per_elemental();
    if geo.pinholes_x() != m || geo.pinholes_y() != m {
        return Err(Error::DepthNotConvertible(format!(
            "smart mapping needs {m}x{m} elemental images to match m={m}, got {}x{}",
            geo.pinholes_x(),
            geo.pinholes_y()
        )));
    }
    let axis = |tiles: usize| -> Vec<Option<usize>> {
        (0..tiles * m)
            .map(|n| source_index(n / m, n % m, m, tiles).map(|(p, q)| p * m + q))
            .collect()
    };
    let xs = axis(geo.pinholes_x());
    let ys = axis(geo.pinholes_y());
    let w = geo.width();
    let src = eia.raster().as_slice();
    let mut out = vec![0u8; w * geo.height()];
    out.par_chunks_mut(w)
        .zip(ys.par_iter())
        .for_each(|(row, sy)| {
            if let Some(sy) = sy {
                let line = &src[sy * w..(sy + 1) * w];
                for (dst, sx) in row.iter_mut().zip(&xs) {
                    if let Some(sx) = sx {
                        *dst = line[*sx];
                    }
                }
            }
        });
    ElementalImageArray::new(
        *geo,
        EiaLayout::DepthConverted,
        PlaneImage::new(w, geo.height(), out)?,
    )
}
