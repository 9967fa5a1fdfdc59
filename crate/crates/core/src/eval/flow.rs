use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::Frame;

/// Per-pixel motion in pixels per frame. With `prev(x, y) ≈ next(x + u, y + v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl FlowField {
    pub fn new(height: usize, width: usize, u: Vec<f32>, v: Vec<f32>) -> Result<Self> {
        if u.len() != height * width || v.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "flow components must have {height}x{width} samples"
            )));
        }
        Ok(FlowField { width, height, u, v })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        FlowField {
            width,
            height,
            u: vec![0.0; height * width],
            v: vec![0.0; height * width],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    /// Mean of `(u, v)` over the centred window covering `fraction` of each side.
    pub fn central_mean(&self, fraction: f64) -> (f64, f64) {
        let my = ((1.0 - fraction) / 2.0 * self.height as f64).round() as usize;
        let mx = ((1.0 - fraction) / 2.0 * self.width as f64).round() as usize;
        let (mut su, mut sv, mut n) = (0.0, 0.0, 0usize);
        for y in my..self.height - my {
            for x in mx..self.width - mx {
                su += f64::from(self.u[y * self.width + x]);
                sv += f64::from(self.v[y * self.width + x]);
                n += 1;
            }
        }
        (su / n as f64, sv / n as f64)
    }
}

/// Mean end-point error `mean √((u−u')² + (v−v')²)`.
pub fn epe(a: &FlowField, b: &FlowField) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::dims(a.dims(), b.dims()));
    }
    let s: f64 = (0..a.u.len())
        .map(|i| {
            let du = f64::from(a.u[i]) - f64::from(b.u[i]);
            let dv = f64::from(a.v[i]) - f64::from(b.v[i]);
            (du * du + dv * dv).sqrt()
        })
        .sum();
    Ok(s / a.u.len() as f64)
}

/// Per-frame-pair EPE of two flow sequences, then their average.
pub fn sequence_epe(a: &[FlowField], b: &[FlowField]) -> Result<(Vec<f64>, f64)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "flow sequences must be equally long and non-empty ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let per = a.iter().zip(b).map(|(x, y)| epe(x, y)).collect::<Result<Vec<_>>>()?;
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    Ok((per, mean))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowParams {
    pub levels: usize,
    /// Side of the square least-squares window.
    pub window: usize,
    pub warp_iterations: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            levels: 3,
            window: 9,
            warp_iterations: 5,
        }
    }
}

#[derive(Clone)]
struct Plane {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Plane {
    fn at(&self, y: isize, x: isize) -> f64 {
        let y = y.clamp(0, self.h as isize - 1) as usize;
        let x = x.clamp(0, self.w as isize - 1) as usize;
        self.data[y * self.w + x]
    }

    fn bilinear(&self, y: f64, x: f64) -> f64 {
        let (y0, x0) = (y.floor(), x.floor());
        let (fy, fx) = (y - y0, x - x0);
        let (y0, x0) = (y0 as isize, x0 as isize);
        let top = self.at(y0, x0) * (1.0 - fx) + self.at(y0, x0 + 1) * fx;
        let bot = self.at(y0 + 1, x0) * (1.0 - fx) + self.at(y0 + 1, x0 + 1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    /// 2×2 box average; odd trailing rows/columns are dropped.
    fn half(&self) -> Plane {
        let (h, w) = (self.h / 2, self.w / 2);
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                let (sy, sx) = (2 * y, 2 * x);
                data.push(
                    0.25 * (self.data[sy * self.w + sx]
                        + self.data[sy * self.w + sx + 1]
                        + self.data[(sy + 1) * self.w + sx]
                        + self.data[(sy + 1) * self.w + sx + 1]),
                );
            }
        }
        Plane { h, w, data }
    }
}

/// Box sums over a `k × k` window (clipped at the border) via an integral image.
fn box_sum(src: &[f64], h: usize, w: usize, k: usize) -> Vec<f64> {
    let mut integral = vec![0.0; (h + 1) * (w + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += src[y * w + x];
            integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
        }
    }
    let r = k / 2;
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            out[y * w + x] = integral[y1 * (w + 1) + x1] - integral[y0 * (w + 1) + x1] - integral[y1 * (w + 1) + x0]
                + integral[y0 * (w + 1) + x0];
        }
    }
    out
}

/// One level of iterative windowed least squares, refining `(u, v)` in place.
fn refine(prev: &Plane, next: &Plane, u: &mut [f64], v: &mut [f64], params: &FlowParams) {
    let (h, w) = (prev.h, prev.w);
    let n = h * w;
    for _ in 0..params.warp_iterations {
        let warped: Vec<f64> = (0..n)
            .map(|i| next.bilinear((i / w) as f64 + v[i], (i % w) as f64 + u[i]))
            .collect();
        let wp = Plane { h, w, data: warped };
        let (mut ixx, mut iyy, mut ixy, mut ixt, mut iyt) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for y in 0..h {
            for x in 0..w {
                let (yi, xi) = (y as isize, x as isize);
                // central differences of the average of both frames
                let gx = 0.25 * (prev.at(yi, xi + 1) - prev.at(yi, xi - 1) + wp.at(yi, xi + 1) - wp.at(yi, xi - 1));
                let gy = 0.25 * (prev.at(yi + 1, xi) - prev.at(yi - 1, xi) + wp.at(yi + 1, xi) - wp.at(yi - 1, xi));
                let gt = wp.data[y * w + x] - prev.data[y * w + x];
                let i = y * w + x;
                ixx[i] = gx * gx;
                iyy[i] = gy * gy;
                ixy[i] = gx * gy;
                ixt[i] = gx * gt;
                iyt[i] = gy * gt;
            }
        }
        let k = params.window;
        let (sxx, syy, sxy) = (box_sum(&ixx, h, w, k), box_sum(&iyy, h, w, k), box_sum(&ixy, h, w, k));
        let (sxt, syt) = (box_sum(&ixt, h, w, k), box_sum(&iyt, h, w, k));
        for i in 0..n {
            let det = sxx[i] * syy[i] - sxy[i] * sxy[i];
            let trace = sxx[i] + syy[i];
            // skip flat or aperture-limited windows
            if det <= 1e-6 * trace * trace || trace <= 1e-12 {
                continue;
            }
            let du = -(syy[i] * sxt[i] - sxy[i] * syt[i]) / det;
            let dv = -(sxx[i] * syt[i] - sxy[i] * sxt[i]) / det;
            u[i] += du;
            v[i] += dv;
        }
    }
}

/// Coarse-to-fine Lucas–Kanade: a box-averaged image pyramid, windowed least
/// squares per level, and repeated warping of `next` towards `prev`.
pub fn estimate_flow(prev: &Frame, next: &Frame, params: &FlowParams) -> Result<FlowField> {
    if prev.dims() != next.dims() {
        return Err(Error::dims(prev.dims(), next.dims()));
    }
    if params.levels == 0 || params.window == 0 {
        return Err(Error::InvalidArgument("flow needs at least one level and a nonzero window".into()));
    }
    let (h, w) = prev.dims();
    let mut pyramid = vec![(
        Plane { h, w, data: prev.pixels().to_vec() },
        Plane { h, w, data: next.pixels().to_vec() },
    )];
    while pyramid.len() < params.levels {
        let (p, n) = pyramid.last().expect("non-empty");
        if p.h < 2 * params.window || p.w < 2 * params.window {
            break;
        }
        let next_level = (p.half(), n.half());
        pyramid.push(next_level);
    }
    let (top_p, _) = pyramid.last().expect("non-empty");
    let (mut u, mut v) = (vec![0.0; top_p.h * top_p.w], vec![0.0; top_p.h * top_p.w]);
    let (mut ch, mut cw) = (top_p.h, top_p.w);
    for (level, (p, n)) in pyramid.iter().enumerate().rev() {
        if level + 1 < pyramid.len() {
            // upsample the coarser estimate, doubling the displacements
            let (mut nu, mut nv) = (vec![0.0; p.h * p.w], vec![0.0; p.h * p.w]);
            for y in 0..p.h {
                for x in 0..p.w {
                    let (sy, sx) = ((y / 2).min(ch - 1), (x / 2).min(cw - 1));
                    nu[y * p.w + x] = 2.0 * u[sy * cw + sx];
                    nv[y * p.w + x] = 2.0 * v[sy * cw + sx];
                }
            }
            u = nu;
            v = nv;
        }
        refine(p, n, &mut u, &mut v, params);
        (ch, cw) = (p.h, p.w);
    }
    FlowField::new(
        h,
        w,
        u.into_iter().map(|x| x as f32).collect(),
        v.into_iter().map(|x| x as f32).collect(),
    )
}

/// Flow between every consecutive frame pair.
pub fn estimate_sequence_flow(frames: &[Frame], params: &FlowParams) -> Result<Vec<FlowField>> {
    frames.windows(2).map(|p| estimate_flow(&p[0], &p[1], params)).collect()
}

/// Where flows come from: the built-in estimator, or precomputed `.flo`
/// files (one per consecutive pair, sorted by name) from an external tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowSource {
    Builtin(FlowParams),
    External(PathBuf),
}

impl Default for FlowSource {
    fn default() -> Self {
        FlowSource::Builtin(FlowParams::default())
    }
}

impl FlowSource {
    pub fn flows(&self, frames: &[Frame]) -> Result<Vec<FlowField>> {
        match self {
            FlowSource::Builtin(p) => estimate_sequence_flow(frames, p),
            FlowSource::External(dir) => {
                let flows = read_flo_dir(dir)?;
                if flows.len() + 1 != frames.len() {
                    return Err(Error::FlowFile(format!(
                        "{} holds {} flows for {} frames",
                        dir.display(),
                        flows.len(),
                        frames.len()
                    )));
                }
                Ok(flows)
            }
        }
    }
}

pub const FLO_MAGIC: f32 = 202021.25;

/// Middlebury `.flo`: magic, width and height as little-endian `i32`, then
/// interleaved little-endian `f32` `(u, v)` in row-major order.
pub fn write_flo(flow: &FlowField, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(12 + 8 * flow.u.len());
    bytes.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    bytes.extend_from_slice(&(flow.width as i32).to_le_bytes());
    bytes.extend_from_slice(&(flow.height as i32).to_le_bytes());
    for (u, v) in flow.u.iter().zip(&flow.v) {
        bytes.extend_from_slice(&u.to_le_bytes());
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_flo(path: &Path) -> Result<FlowField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::FlowFile(format!("{}: {m}", path.display()));
    if bytes.len() < 12 {
        return Err(bad("file too short"));
    }
    let word = |i: usize| -> [u8; 4] { bytes[i..i + 4].try_into().expect("4 bytes") };
    if f32::from_le_bytes(word(0)) != FLO_MAGIC {
        return Err(bad("bad magic"));
    }
    let (w, h) = (i32::from_le_bytes(word(4)), i32::from_le_bytes(word(8)));
    if w <= 0 || h <= 0 {
        return Err(bad("non-positive dimensions"));
    }
    let (w, h) = (w as usize, h as usize);
    if bytes.len() != 12 + 8 * w * h {
        return Err(bad("payload size does not match dimensions"));
    }
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for i in 0..w * h {
        u.push(f32::from_le_bytes(word(12 + 8 * i)));
        v.push(f32::from_le_bytes(word(16 + 8 * i)));
    }
    FlowField::new(h, w, u, v)
}

/// Reads every `*.flo` file of a directory in lexicographic order.
pub fn read_flo_dir(dir: &Path) -> Result<Vec<FlowField>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "flo"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_flo(p)).collect()
}

/// Writes `flow_000001.flo`, … for a flow sequence.
pub fn write_flo_dir(flows: &[FlowField], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    flows
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let p = dir.join(format!("flow_{:06}.flo", i + 1));
            write_flo(f, &p).map(|_| p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_sum_matches_direct_sums() {
        let src: Vec<f64> = (0..35).map(|i| (i * 7 % 5) as f64).collect();
        let fast = box_sum(&src, 5, 7, 3);
        for y in 0..5usize {
            for x in 0..7usize {
                let mut s = 0.0;
                for yy in y.saturating_sub(1)..(y + 2).min(5) {
                    for xx in x.saturating_sub(1)..(x + 2).min(7) {
                        s += src[yy * 7 + xx];
                    }
                }
                assert!((fast[y * 7 + x] - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bad_flo_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.flo");
        fs::write(&p, [0u8; 11]).unwrap();
        assert!(read_flo(&p).is_err());
        let mut bytes = FLO_MAGIC.to_le_bytes().to_vec();
        bytes.extend_from_slice(&2i32.to_le_bytes());
        bytes.extend_from_slice(&2i32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 24]);
        fs::write(&p, &bytes).unwrap();
        assert!(read_flo(&p).is_err());
    }
}
