//! Computational pickup through a virtual pinhole array and CIIR
//! (back-projection) reconstruction.
//!
//! All coordinates below are in pixel units: one unit is `pitch / m` mm,
//! the shared sample spacing of the object plane, the EIA and the output
//! plane. Pinhole `i` sits at `(i + 0.5) * m`, and tile pixel `u` lies at
//! offset `u + 0.5 - m/2` from its pinhole axis.
//!
//! Both kernels are separable in x and y, so each axis is resolved once into
//! a table of contributing EIA columns (rows) per output column (row).

use rayon::prelude::*;

use crate::analysis;
use crate::error::{Error, Result};
use crate::image::{EiaLayout, ElementalImageArray, PickupGeometry, PlaneImage};
use crate::smartmap;

/// Lateral magnification `distance / gap`.
pub fn magnification(distance_mm: f64, gap_mm: f64) -> Result<f64> {
    for v in [distance_mm, gap_mm] {
        if v.is_nan() || v <= 0.0 || v.is_infinite() {
            return Err(Error::NonPositiveDistance(v));
        }
    }
    Ok(distance_mm / gap_mm)
}

/// Object-plane pixel recorded by pixel `u` of elemental image `tile` along one axis,
/// or `None` when the ray leaves the `[0, tiles*m)` object field.
pub(crate) fn pickup_source(
    tiles: usize,
    m: usize,
    mag: f64,
    tile: usize,
    u: usize,
) -> Option<usize> {
    let half = m as f64 / 2.0;
    let center = (tile as f64 + 0.5) * m as f64;
    let offset = u as f64 + 0.5 - half;
    let x = (center - offset * mag).floor();
    if x >= 0.0 && x < (tiles * m) as f64 {
        Some(x as usize)
    } else {
        None
    }
}

/// Records `img` through the pinhole array described by `geo`.
///
/// Each EIA pixel samples the object plane at the nearest pixel along the
/// ray through its pinhole; rays that miss the object record 0.
pub fn cgii_pickup(img: &PlaneImage, geo: &PickupGeometry) -> Result<ElementalImageArray> {
    let mag = magnification(geo.distance_mm(), geo.gap_mm())?;
    geo.check_image(img)?;
    let m = geo.pixels_per_elemental();
    let axis = |tiles: usize| -> Vec<Option<usize>> {
        (0..tiles * m)
            .map(|n| pickup_source(tiles, m, mag, n / m, n % m))
            .collect()
    };
    let xs = axis(geo.pinholes_x());
    let ys = axis(geo.pinholes_y());
    let (w, h) = (geo.width(), geo.height());
    let src = img.as_slice();
    let mut out = vec![0u8; w * h];
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
    ElementalImageArray::new(*geo, EiaLayout::Direct, PlaneImage::new(w, h, out)?)
}

/// Which EIA pixels along one axis carry a ray, given how the array was produced.
pub(crate) fn ray_support(geo: &PickupGeometry, layout: EiaLayout, tiles: usize) -> Vec<bool> {
    let m = geo.pixels_per_elemental();
    match layout {
        EiaLayout::Raw => vec![true; tiles * m],
        EiaLayout::Direct => {
            let mag = geo.distance_mm() / geo.gap_mm();
            (0..tiles * m)
                .map(|n| pickup_source(tiles, m, mag, n / m, n % m).is_some())
                .collect()
        }
        EiaLayout::DepthConverted => {
            let direct = ray_support(geo, EiaLayout::Direct, tiles);
            (0..tiles * m)
                .map(|n| match smartmap::source_index(n / m, n % m, m, tiles) {
                    Some((p, q)) => direct[p * m + q],
                    None => false,
                })
                .collect()
        }
    }
}

/// Lateral shift of the virtual pinhole array, in pixels.
pub(crate) fn array_shift_px(layout: EiaLayout, m: usize) -> f64 {
    match layout {
        EiaLayout::Raw | EiaLayout::Direct => 0.0,
        EiaLayout::DepthConverted => smartmap::converted_array_shift_px(m),
    }
}

/// Per-output-index lists of contributing EIA indices along one axis, in CSR form.
struct AxisRays {
    starts: Vec<usize>,
    sources: Vec<usize>,
}

impl AxisRays {
    fn build(tiles: usize, m: usize, ratio: f64, shift: f64, support: &[bool]) -> Self {
        let half = m as f64 / 2.0;
        let len = tiles * m;
        let mut starts = Vec::with_capacity(len + 1);
        let mut sources = Vec::new();
        starts.push(0);
        for k in 0..len {
            let xo = k as f64 + 0.5;
            for i in 0..tiles {
                let center = (i as f64 + 0.5) * m as f64 + shift;
                let offset = (center - xo) * ratio;
                if offset.abs() < half {
                    let u = ((offset + half).floor() as usize).min(m - 1);
                    let n = i * m + u;
                    if support[n] {
                        sources.push(n);
                    }
                }
            }
            starts.push(sources.len());
        }
        Self { starts, sources }
    }

    fn of(&self, k: usize) -> &[usize] {
        &self.sources[self.starts[k]..self.starts[k + 1]]
    }

    fn count(&self, k: usize) -> usize {
        self.starts[k + 1] - self.starts[k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub image: PlaneImage,
    pub depth_mm: f64,
    /// Largest number of rays superposed on a single output pixel.
    pub overlap_max: usize,
}

/// Back-projects every elemental image through its pinhole onto the plane at
/// depth `z_mm` and averages the overlapping rays.
///
/// Pixels that the layout marks as carrying no ray (out-of-field pickup
/// samples, smart-mapping fill) are left out of both sum and count. Output
/// pixels reached by no ray are 0.
pub fn ciir_reconstruct(eia: &ElementalImageArray, z_mm: f64) -> Result<ReconstructionResult> {
    let geo = eia.geometry();
    let ratio = 1.0 / magnification(z_mm, geo.gap_mm())?;
    let m = geo.pixels_per_elemental();
    let shift = array_shift_px(eia.layout(), m);
    let (w, h) = (geo.width(), geo.height());

    let support_x = ray_support(geo, eia.layout(), geo.pinholes_x());
    let support_y = ray_support(geo, eia.layout(), geo.pinholes_y());
    let xr = AxisRays::build(geo.pinholes_x(), m, ratio, shift, &support_x);
    let yr = AxisRays::build(geo.pinholes_y(), m, ratio, shift, &support_y);

    // Horizontal pass: collapse each EIA row onto the output columns.
    let src = eia.raster().as_slice();
    let mut partial = vec![0u64; w * h];
    partial
        .par_chunks_mut(w)
        .zip(src.par_chunks(w))
        .for_each(|(acc, line)| {
            for (kx, a) in acc.iter_mut().enumerate() {
                *a = xr.of(kx).iter().map(|&n| line[n] as u64).sum();
            }
        });

    // Vertical pass.
    let mut out = vec![0u8; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(ky, row)| {
        let rows = yr.of(ky);
        let cy = rows.len();
        for (kx, px) in row.iter_mut().enumerate() {
            let count = cy * xr.count(kx);
            if count == 0 {
                continue;
            }
            let sum: u64 = rows.iter().map(|&n| partial[n * w + kx]).sum();
            *px = (sum as f64 / count as f64).round().clamp(0.0, 255.0) as u8;
        }
    });

    let max_x = (0..w).map(|k| xr.count(k)).max().unwrap_or(0);
    let max_y = (0..h).map(|k| yr.count(k)).max().unwrap_or(0);
    Ok(ReconstructionResult {
        image: PlaneImage::new(w, h, out)?,
        depth_mm: z_mm,
        overlap_max: max_x * max_y,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanEntry {
    pub depth_mm: f64,
    pub psnr_db: Option<f64>,
    pub image: PlaneImage,
}

/// Reconstructions over an arithmetic sequence of depths.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DepthScan {
    pub entries: Vec<ScanEntry>,
}

impl DepthScan {
    /// Depth with the highest PSNR, if the scan was scored against a reference.
    pub fn best_depth(&self) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.psnr_db.map(|p| (e.depth_mm, p)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(d, _)| d)
    }
}

/// Depths `z_start, z_start + step, ...` up to and including `z_end`.
pub fn scan_depths(z_start: f64, z_end: f64, step: f64) -> Result<Vec<f64>> {
    if z_start.is_nan() || z_start <= 0.0 || z_start.is_infinite() {
        return Err(Error::NonPositiveDistance(z_start));
    }
    if step.is_nan() || step <= 0.0 || step.is_infinite() {
        return Err(Error::NonPositiveDistance(step));
    }
    if z_end.is_nan() || z_end < z_start || z_end.is_infinite() {
        return Err(Error::ParamOutOfRange(format!(
            "scan end {z_end} must not precede start {z_start}"
        )));
    }
    let n = ((z_end - z_start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| z_start + k as f64 * step).collect())
}

pub fn depth_scan(
    eia: &ElementalImageArray,
    z_start: f64,
    z_end: f64,
    step: f64,
    reference: Option<&PlaneImage>,
) -> Result<DepthScan> {
    if let Some(r) = reference {
        eia.raster().check_same_dims(r)?;
    }
    let entries = scan_depths(z_start, z_end, step)?
        .into_iter()
        .map(|z| {
            let rec = ciir_reconstruct(eia, z)?;
            let psnr_db = match reference {
                Some(r) => Some(analysis::psnr(r, &rec.image)?),
                None => None,
            };
            Ok(ScanEntry {
                depth_mm: z,
                psnr_db,
                image: rec.image,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DepthScan { entries })
}
