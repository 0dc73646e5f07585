//! Search grids, indicator fields, oracle masks and contrast statistics.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{Direction, Point, Strip, ThetaDomain};

/// One lattice axis: `count` equally spaced points from `lo` to `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn coordinate(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            return self.hi;
        }
        self.lo + (self.hi - self.lo) * i as f64 / (self.count - 1) as f64
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    /// Nearest lattice index to `x` (clamped).
    pub fn nearest(&self, x: f64) -> usize {
        let t = ((x - self.lo) / self.spacing()).round();
        t.clamp(0.0, (self.count - 1) as f64) as usize
    }
}

/// Fixes one ambient coordinate of a 3D box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub axis: usize,
    pub offset: f64,
}

/// Rectangular lattice, row-major with the last axis varying fastest.
///
/// A slice grid is a 2D lattice embedded in 3D space: `fixed` names the
/// ambient axis it omits and the value it takes there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    axes: Vec<Axis>,
    fixed: Option<SliceSpec>,
}

/// Uniform lattice with both endpoints on every axis.
pub fn make_grid(bounds: &[(f64, f64)], resolution: &[usize]) -> Result<SearchGrid> {
    SearchGrid::new(bounds, resolution)
}

impl SearchGrid {
    pub fn new(bounds: &[(f64, f64)], resolution: &[usize]) -> Result<Self> {
        if !(2..=3).contains(&bounds.len()) {
            return Err(Error::Domain(format!(
                "grid must be 2D or 3D, got {} axes",
                bounds.len()
            )));
        }
        if resolution.len() != bounds.len() {
            return Err(Error::Domain(format!(
                "{} bounds but {} resolutions",
                bounds.len(),
                resolution.len()
            )));
        }
        let mut axes = Vec::with_capacity(bounds.len());
        for (a, (&(lo, hi), &count)) in bounds.iter().zip(resolution).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Domain(format!("axis {}: need lo < hi, got [{lo}, {hi}]", a + 1)));
            }
            if count < 2 {
                return Err(Error::Domain(format!("axis {}: resolution must be at least 2", a + 1)));
            }
            axes.push(Axis { lo, hi, count });
        }
        Ok(Self { axes, fixed: None })
    }

    /// Number of lattice axes.
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Dimension of the space the points live in.
    pub fn ambient_dim(&self) -> usize {
        self.axes.len() + usize::from(self.fixed.is_some())
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn fixed(&self) -> Option<SliceSpec> {
        self.fixed
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.axes.iter().map(Axis::spacing).collect()
    }

    pub fn multi_index(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.axes.len()];
        for (a, axis) in self.axes.iter().enumerate().rev() {
            out[a] = index % axis.count;
            index /= axis.count;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, axis)| acc * axis.count + i)
    }

    /// Lattice coordinates of point `index`.
    pub fn coordinates(&self, index: usize) -> Vec<f64> {
        self.multi_index(index)
            .iter()
            .zip(&self.axes)
            .map(|(&i, axis)| axis.coordinate(i))
            .collect()
    }

    /// Point `index` in ambient space; unused components are zero.
    pub fn point(&self, index: usize) -> Point {
        let local = self.coordinates(index);
        let mut p = Point::zeros();
        match self.fixed {
            None => {
                for (a, x) in local.iter().enumerate() {
                    p[a] = *x;
                }
            }
            Some(spec) => {
                let mut it = local.iter();
                for a in 0..3 {
                    p[a] = if a == spec.axis {
                        spec.offset
                    } else {
                        *it.next().unwrap()
                    };
                }
            }
        }
        p
    }

    /// The 2D slice of a 3D grid at the lattice plane nearest `slice.offset`.
    pub fn slice(&self, slice: SliceSpec) -> Result<SearchGrid> {
        if self.dim() != 3 || self.fixed.is_some() {
            return Err(Error::Domain("slices need a 3D grid".into()));
        }
        let axis = self
            .axes
            .get(slice.axis)
            .ok_or_else(|| Error::Domain(format!("slice axis {} out of range", slice.axis + 1)))?;
        let tol = 1e-12 * (axis.hi - axis.lo);
        if slice.offset < axis.lo - tol || slice.offset > axis.hi + tol {
            return Err(Error::Domain(format!(
                "slice x{} = {} outside [{}, {}]",
                slice.axis + 1,
                slice.offset,
                axis.lo,
                axis.hi
            )));
        }
        let snapped = axis.coordinate(axis.nearest(slice.offset));
        if (snapped - slice.offset).abs() > 1e-9 * axis.spacing() {
            log::warn!(
                "slice x{} = {} is off the lattice; using {}",
                slice.axis + 1,
                slice.offset,
                snapped
            );
        }
        let axes = self
            .axes
            .iter()
            .enumerate()
            .filter(|(a, _)| *a != slice.axis)
            .map(|(_, ax)| *ax)
            .collect();
        Ok(SearchGrid {
            axes,
            fixed: Some(SliceSpec {
                axis: slice.axis,
                offset: snapped,
            }),
        })
    }

    /// Column labels of the ambient coordinates.
    pub fn labels(&self) -> Vec<String> {
        (1..=self.ambient_dim()).map(|a| format!("x{a}")).collect()
    }
}

/// Information carried alongside field values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldMeta {
    pub label: String,
    /// (θ, φ) for each direction that contributed.
    pub directions: Vec<(f64, Option<f64>)>,
    pub mode: Option<String>,
    pub band: Option<(f64, usize)>,
    /// Factor the values were divided by in [`normalize_field`].
    pub scale: f64,
    pub zero_scale: bool,
}

impl FieldMeta {
    pub fn with_directions(label: impl Into<String>, dirs: &[Direction]) -> Self {
        Self {
            label: label.into(),
            directions: dirs.iter().map(|d| (d.theta(), d.phi())).collect(),
            scale: 1.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: SearchGrid,
    pub values: Vec<f64>,
    pub meta: FieldMeta,
}

impl ScalarField {
    pub fn new(grid: SearchGrid, values: Vec<f64>, meta: FieldMeta) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Validation(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, meta })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the largest value (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Points with value at least half the maximum.
    pub fn half_max_mask(&self) -> Vec<bool> {
        let half = 0.5 * self.max();
        self.values.iter().map(|&v| v >= half).collect()
    }

    /// Range of x̂·y over the half-maximum region.
    pub fn half_max_extent(&self, dir: &Direction) -> (f64, f64) {
        let mask = self.half_max_mask();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, inside) in mask.iter().enumerate() {
            if *inside {
                let p = dir.dot(&self.grid.point(i));
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
        (lo, hi)
    }

    /// Writes `x1,x2[,x3],w` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_grid_csv(&self.grid, "w", self.values.iter().map(|v| format!("{v:.16e}")), out)
    }

    /// Plain-text 8-bit grayscale image, max-normalized, top row = largest
    /// second lattice coordinate.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        if self.grid.dim() != 2 {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                "heatmaps need a 2D lattice",
            ));
        }
        let (nx, ny) = (self.grid.axes[0].count, self.grid.axes[1].count);
        let max = self.max();
        let scale = if max > 0.0 && max.is_finite() { 255.0 / max } else { 0.0 };
        writeln!(out, "P2")?;
        writeln!(out, "# {}", self.meta.label)?;
        writeln!(out, "{nx} {ny}")?;
        writeln!(out, "255")?;
        for row in (0..ny).rev() {
            let line: Vec<String> = (0..nx)
                .map(|col| {
                    let v = self.values[self.grid.flat_index(&[col, row])];
                    let g = if v.is_finite() {
                        (v * scale).round().clamp(0.0, 255.0)
                    } else {
                        255.0
                    };
                    format!("{}", g as u8)
                })
                .collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

fn write_grid_csv<W: Write>(
    grid: &SearchGrid,
    column: &str,
    values: impl Iterator<Item = String>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{},{column}", grid.labels().join(","))?;
    let ambient = grid.ambient_dim();
    for (i, v) in values.enumerate() {
        let p = grid.point(i);
        for a in 0..ambient {
            write!(out, "{:.12e},", p[a])?;
        }
        writeln!(out, "{v}")?;
    }
    Ok(())
}

/// Writes a boolean mask as 0/1 in the field CSV layout.
pub fn write_mask_csv<W: Write>(grid: &SearchGrid, mask: &[bool], out: W) -> std::io::Result<()> {
    write_grid_csv(grid, "mask", mask.iter().map(|&m| u8::from(m).to_string()), out)
}

/// Reads a field CSV and checks its points against `grid`.
pub fn read_field_csv<R: BufRead>(input: R, grid: &SearchGrid, meta: FieldMeta) -> Result<ScalarField> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Validation("field file is empty".into()))?
        .map_err(|e| Error::io("reading field", e))?;
    let expected = format!("{},w", grid.labels().join(","));
    if header.trim() != expected {
        return Err(Error::Validation(format!(
            "field header `{header}`, expected `{expected}`"
        )));
    }
    let ambient = grid.ambient_dim();
    let tol: f64 = 1e-9 * grid.spacing().iter().copied().fold(f64::INFINITY, f64::min);
    let mut values = Vec::with_capacity(grid.len());
    for (row, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io("reading field", e))?;
        if line.trim().is_empty() {
            continue;
        }
        if row >= grid.len() {
            return Err(Error::Validation(format!("field has more than {} rows", grid.len())));
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Validation(format!("field row {}: {e}", row + 2)))?;
        if cols.len() != ambient + 1 {
            return Err(Error::Validation(format!(
                "field row {}: expected {} columns, found {}",
                row + 2,
                ambient + 1,
                cols.len()
            )));
        }
        let p = grid.point(row);
        for a in 0..ambient {
            if (cols[a] - p[a]).abs() > tol.max(1e-11 * p[a].abs()) {
                return Err(Error::Validation(format!(
                    "field row {}: x{} = {} does not match grid value {}",
                    row + 2,
                    a + 1,
                    cols[a],
                    p[a]
                )));
            }
        }
        values.push(cols[ambient]);
    }
    if values.len() != grid.len() {
        return Err(Error::Validation(format!(
            "field has {} rows, grid has {} points",
            values.len(),
            grid.len()
        )));
    }
    ScalarField::new(grid.clone(), values, meta)
}

/// Evaluates `f` at every grid point in parallel; output order matches the grid.
pub fn evaluate_field<F>(f: F, grid: &SearchGrid, meta: FieldMeta) -> ScalarField
where
    F: Fn(&Point) -> f64 + Sync,
{
    let values = (0..grid.len()).into_par_iter().map(|i| f(&grid.point(i))).collect();
    ScalarField {
        grid: grid.clone(),
        values,
        meta,
    }
}

pub fn evaluate_field_sequential<F>(f: F, grid: &SearchGrid, meta: FieldMeta) -> ScalarField
where
    F: Fn(&Point) -> f64,
{
    let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
    ScalarField {
        grid: grid.clone(),
        values,
        meta,
    }
}

/// Evaluates `f` only on the lattice plane of `grid3d` selected by `slice`.
pub fn slice_field_3d<F>(f: F, grid3d: &SearchGrid, slice: SliceSpec, meta: FieldMeta) -> Result<ScalarField>
where
    F: Fn(&Point) -> f64 + Sync,
{
    let plane = grid3d.slice(slice)?;
    Ok(evaluate_field(f, &plane, meta))
}

pub fn mask_strip(grid: &SearchGrid, strip: &Strip) -> Vec<bool> {
    (0..grid.len()).map(|i| strip.contains(&grid.point(i))).collect()
}

pub fn mask_theta(grid: &SearchGrid, domain: &ThetaDomain) -> Vec<bool> {
    (0..grid.len()).map(|i| domain.contains(&grid.point(i))).collect()
}

/// Marks every point within Euclidean distance `radius` of a marked point.
pub fn dilate(grid: &SearchGrid, mask: &[bool], radius: f64) -> Vec<bool> {
    let spacing = grid.spacing();
    let reach: Vec<isize> = spacing.iter().map(|h| (radius / h).floor() as isize).collect();
    let mut offsets: Vec<Vec<isize>> = vec![vec![]];
    for r in &reach {
        offsets = offsets
            .into_iter()
            .flat_map(|o| {
                (-*r..=*r).map(move |d| {
                    let mut o = o.clone();
                    o.push(d);
                    o
                })
            })
            .collect();
    }
    let radius2 = radius * radius * (1.0 + 1e-12);
    offsets.retain(|o| {
        o.iter()
            .zip(&spacing)
            .map(|(&d, h)| (d as f64 * h).powi(2))
            .sum::<f64>()
            <= radius2
    });
    dilate_by(grid, mask, &offsets)
}

/// Marks every point within `cells` lattice steps along each axis of a marked point.
pub fn dilate_cells(grid: &SearchGrid, mask: &[bool], cells: usize) -> Vec<bool> {
    let r = cells as isize;
    let mut offsets: Vec<Vec<isize>> = vec![vec![]];
    for _ in 0..grid.dim() {
        offsets = offsets
            .into_iter()
            .flat_map(|o| {
                (-r..=r).map(move |d| {
                    let mut o = o.clone();
                    o.push(d);
                    o
                })
            })
            .collect();
    }
    dilate_by(grid, mask, &offsets)
}

fn dilate_by(grid: &SearchGrid, mask: &[bool], offsets: &[Vec<isize>]) -> Vec<bool> {
    let counts: Vec<isize> = grid.axes.iter().map(|a| a.count as isize).collect();
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if mask[i] {
                return true;
            }
            let base = grid.multi_index(i);
            offsets.iter().any(|o| {
                let mut idx = Vec::with_capacity(base.len());
                for ((&b, &d), &n) in base.iter().zip(o).zip(&counts) {
                    let j = b as isize + d;
                    if j < 0 || j >= n {
                        return false;
                    }
                    idx.push(j as usize);
                }
                mask[grid.flat_index(&idx)]
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contrast {
    pub inside_median: f64,
    pub outside_median: f64,
    pub ratio: f64,
    pub inside_count: usize,
    pub outside_count: usize,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median inside the mask over median outside it, ignoring outside points
/// within `margin` of the mask.
pub fn contrast_metric(field: &ScalarField, mask: &[bool], margin: f64) -> Result<Contrast> {
    if mask.len() != field.values.len() {
        return Err(Error::Validation("mask and field sizes differ".into()));
    }
    let near = if margin > 0.0 {
        dilate(&field.grid, mask, margin)
    } else {
        mask.to_vec()
    };
    let mut inside: Vec<f64> = Vec::new();
    let mut outside: Vec<f64> = Vec::new();
    for (i, &v) in field.values.iter().enumerate() {
        if mask[i] {
            inside.push(v);
        } else if !near[i] {
            outside.push(v);
        }
    }
    if inside.is_empty() {
        return Err(Error::Domain("mask selects no grid points".into()));
    }
    if outside.is_empty() {
        return Err(Error::Domain("no grid points remain outside the mask margin".into()));
    }
    let (inside_count, outside_count) = (inside.len(), outside.len());
    let inside_median = median(&mut inside);
    let outside_median = median(&mut outside);
    let ratio = if outside_median == 0.0 {
        if inside_median == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        inside_median / outside_median
    };
    Ok(Contrast {
        inside_median,
        outside_median,
        ratio,
        inside_count,
        outside_count,
    })
}

/// Divides by the maximum; an all-zero field comes back unchanged with
/// `zero_scale` set.
pub fn normalize_field(field: &ScalarField) -> ScalarField {
    let mut out = field.clone();
    let max = field.max();
    if max > 0.0 && max.is_finite() {
        for v in &mut out.values {
            *v /= max;
        }
        out.meta.scale = field.meta.scale * max;
        out.meta.zero_scale = false;
    } else {
        out.meta.zero_scale = true;
    }
    out
}
