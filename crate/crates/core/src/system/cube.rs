//! Orbital amplitudes on a regular grid, written in the Gaussian cube layout.
//!
//! Node coordinates are `centre + (k − (n−1)/2)·h` per axis, so grids over
//! boxes symmetric about a mirror plane sample mirror-image points exactly.

use std::io::{self, Write};

use crate::system::{Geometry, OrbitalSet, SystemError};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl GridBox {
    pub fn cube(half_width: f64) -> Self {
        Self { min: Vec3::repeat(-half_width), max: Vec3::repeat(half_width) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalGrid {
    pub counts: [usize; 3],
    pub spacing: Vec3,
    centre: Vec3,
    /// Values with z varying fastest, then y, then x.
    pub values: Vec<f64>,
}

impl OrbitalGrid {
    fn axis(&self, axis: usize, k: usize) -> f64 {
        let n = self.counts[axis] as f64;
        self.centre[axis] + (k as f64 - 0.5 * (n - 1.0)) * self.spacing[axis]
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(self.axis(0, i), self.axis(1, j), self.axis(2, k))
    }

    pub fn origin(&self) -> Vec3 {
        self.point(0, 0, 0)
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.counts[1] + j) * self.counts[2] + k]
    }
}

/// Samples orbital `index` at `resolution` points per axis over `bounds`.
pub fn export_orbital_grid(
    orbitals: &OrbitalSet,
    centers: &[Vec3],
    index: usize,
    bounds: GridBox,
    resolution: usize,
) -> Result<OrbitalGrid, SystemError> {
    if index >= orbitals.len() {
        return Err(SystemError::OrbitalIndex { index, count: orbitals.len() });
    }
    if resolution < 2 {
        return Err(SystemError::Grid(format!("resolution must be at least 2 per axis, got {resolution}")));
    }
    if (0..3).any(|a| !(bounds.max[a] > bounds.min[a])) {
        return Err(SystemError::Grid("box max must exceed min on every axis".into()));
    }
    let spacing = (bounds.max - bounds.min) / (resolution - 1) as f64;
    let mut grid = OrbitalGrid {
        counts: [resolution; 3],
        spacing,
        centre: (bounds.min + bounds.max) * 0.5,
        values: Vec::with_capacity(resolution.pow(3)),
    };
    for i in 0..resolution {
        for j in 0..resolution {
            for k in 0..resolution {
                let p = grid.point(i, j, k);
                grid.values.push(orbitals.evaluate(index, centers, &p).value);
            }
        }
    }
    Ok(grid)
}

/// `d.ddddddE±XX` with a two-digit exponent.
fn sci(v: f64) -> String {
    let s = format!("{:.5E}", v);
    let (mant, exp) = s.split_once('E').unwrap_or((&s, "0"));
    let e: i32 = exp.parse().unwrap_or(0);
    let sign = if e < 0 { '-' } else { '+' };
    format!("{mant}E{sign}{:02}", e.abs())
}

pub fn write_cube<W: Write>(out: &mut W, grid: &OrbitalGrid, geometry: &Geometry, title: &str) -> io::Result<()> {
    writeln!(out, "{title}")?;
    writeln!(out, "orbital amplitude, z fastest")?;
    let o = grid.origin();
    writeln!(out, "{:5} {:12.6} {:12.6} {:12.6}", geometry.nuclei().len(), o.x, o.y, o.z)?;
    for a in 0..3 {
        let mut step = [0.0; 3];
        step[a] = grid.spacing[a];
        writeln!(out, "{:5} {:12.6} {:12.6} {:12.6}", grid.counts[a], step[0], step[1], step[2])?;
    }
    for n in geometry.nuclei() {
        writeln!(
            out,
            "{:5} {:12.6} {:12.6} {:12.6} {:12.6}",
            n.charge.round() as i64,
            n.charge,
            n.position.x,
            n.position.y,
            n.position.z
        )?;
    }
    for row in grid.values.chunks(grid.counts[2]) {
        for line in row.chunks(6) {
            let text: Vec<String> = line.iter().map(|v| format!("{:>13}", sci(*v))).collect();
            writeln!(out, "{}", text.join(""))?;
        }
    }
    Ok(())
}
