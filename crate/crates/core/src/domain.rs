//! Rectangular working boxes and the uniform probe grids laid over them.

use serde::{Deserialize, Serialize};

use crate::C64;

/// Axis-aligned rectangle `[x_min, x_max] x [y_min, y_max]` in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// Square `[-half, half]^2`.
    pub fn centered(half: f64) -> Self {
        Self::new(-half, half, -half, half)
    }

    pub fn is_valid(&self) -> bool {
        [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_min <= self.x_max
            && self.y_min <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> C64 {
        C64::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.x_min && z.re <= self.x_max && z.im >= self.y_min && z.im <= self.y_max
    }

    /// Box enlarged by `margin` on every side.
    pub fn grown(&self, margin: f64) -> Self {
        Self::new(
            self.x_min - margin,
            self.x_max + margin,
            self.y_min - margin,
            self.y_max + margin,
        )
    }

    /// Largest modulus of a point of the box.
    pub fn max_modulus(&self) -> f64 {
        let x = self.x_min.abs().max(self.x_max.abs());
        let y = self.y_min.abs().max(self.y_max.abs());
        x.hypot(y)
    }

    /// Uniform `nx x ny` grid including the boundary, row-major (y outer).
    pub fn grid(&self, nx: usize, ny: usize) -> ProbeGrid {
        ProbeGrid::new(*self, nx, ny)
    }
}

/// Uniform grid of points covering a [`Rect`], boundary included.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGrid {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
}

impl ProbeGrid {
    pub fn new(rect: Rect, nx: usize, ny: usize) -> Self {
        Self {
            rect,
            nx: nx.max(1),
            ny: ny.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        if self.nx > 1 {
            self.rect.width() / (self.nx - 1) as f64
        } else {
            0.0
        }
    }

    pub fn dy(&self) -> f64 {
        if self.ny > 1 {
            self.rect.height() / (self.ny - 1) as f64
        } else {
            0.0
        }
    }

    pub fn point(&self, ix: usize, iy: usize) -> C64 {
        let x = if self.nx > 1 {
            self.rect.x_min + ix as f64 * self.dx()
        } else {
            0.5 * (self.rect.x_min + self.rect.x_max)
        };
        let y = if self.ny > 1 {
            self.rect.y_min + iy as f64 * self.dy()
        } else {
            0.5 * (self.rect.y_min + self.rect.y_max)
        };
        C64::new(x, y)
    }

    pub fn at(&self, index: usize) -> C64 {
        self.point(index % self.nx, index / self.nx)
    }

    pub fn points(&self) -> Vec<C64> {
        (0..self.len()).map(|i| self.at(i)).collect()
    }
}

/// Midpoint grid: `n x n` cell centres of a box with their common cell area.
pub fn cell_centers(rect: &Rect, n: usize) -> (Vec<C64>, f64) {
    let n = n.max(1);
    let hx = rect.width() / n as f64;
    let hy = rect.height() / n as f64;
    let mut out = Vec::with_capacity(n * n);
    for iy in 0..n {
        for ix in 0..n {
            out.push(C64::new(
                rect.x_min + (ix as f64 + 0.5) * hx,
                rect.y_min + (iy as f64 + 0.5) * hy,
            ));
        }
    }
    (out, hx * hy)
}

/// `count` equally spaced points on the circle `|z| = radius`.
pub fn ring(radius: f64, count: usize) -> Vec<C64> {
    (0..count)
        .map(|j| C64::from_polar(radius, std::f64::consts::TAU * j as f64 / count as f64))
        .collect()
}
