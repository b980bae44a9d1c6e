//! Spatial grids: a Dirichlet-walled interior grid in the confined direction x
//! and a periodic Fourier grid in the free directions y.
//!
//! The x grid holds the `n_x` interior nodes of `[-l_x, l_x]` with spacing
//! `dx = 2 l_x / (n_x + 1)`; the walls carry implicit zeros. The y grid is the
//! uniform torus `[-l_y, l_y)^{d-1}` with `n_y` nodes per axis (power of two)
//! and dual frequencies spaced `pi / l_y`.

use crate::error::{Error, Result};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct XGrid {
    l_x: f64,
    n_x: usize,
    dx: f64,
}

impl XGrid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(l_x: f64, n_x: usize) -> Result<Self> {
        if !(l_x.is_finite() && l_x > 0.0) {
            return Err(Error::invalid("xgrid.l_x", "must be finite and > 0"));
        }
        if n_x < Self::MIN_POINTS {
            return Err(Error::invalid(
                "xgrid.n_x",
                format!("must be at least {}", Self::MIN_POINTS),
            ));
        }
        let dx = 2.0 * l_x / (n_x as f64 + 1.0);
        Ok(XGrid { l_x, n_x, dx })
    }

    pub fn l_x(&self) -> f64 {
        self.l_x
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Interior node coordinate, strictly inside (-l_x, l_x).
    pub fn x(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_x);
        -self.l_x + (i as f64 + 1.0) * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| self.x(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct YGrid {
    l_y: f64,
    n_y: usize,
    /// Number of transverse axes, d - 1 (1 or 2).
    axes: usize,
    dy: f64,
}

impl YGrid {
    pub fn new(d: usize, l_y: f64, n_y: usize) -> Result<Self> {
        if d != 2 && d != 3 {
            return Err(Error::invalid("d", "total dimension must be 2 or 3"));
        }
        if !(l_y.is_finite() && l_y > 0.0) {
            return Err(Error::invalid("ygrid.l_y", "must be finite and > 0"));
        }
        if n_y < 4 || !n_y.is_power_of_two() {
            return Err(Error::invalid(
                "ygrid.n_y",
                "must be a power of two, at least 4",
            ));
        }
        Ok(YGrid {
            l_y,
            n_y,
            axes: d - 1,
            dy: 2.0 * l_y / n_y as f64,
        })
    }

    pub fn d(&self) -> usize {
        self.axes + 1
    }

    pub fn axes(&self) -> usize {
        self.axes
    }

    pub fn l_y(&self) -> f64 {
        self.l_y
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    /// Total number of transverse nodes, n_y^(d-1). Fields store this as the
    /// flattened column count, row-major over axes.
    pub fn n_cols(&self) -> usize {
        self.n_y.pow(self.axes as u32)
    }

    /// Transverse cell volume dy^(d-1).
    pub fn cell_volume(&self) -> f64 {
        self.dy.powi(self.axes as i32)
    }

    pub fn y(&self, j: usize) -> f64 {
        debug_assert!(j < self.n_y);
        -self.l_y + j as f64 * self.dy
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.n_y).map(|j| self.y(j)).collect()
    }

    /// Signed dual frequency for FFT bin k; spacing pi / l_y, Nyquist bin
    /// mapped to the negative end.
    pub fn eta(&self, k: usize) -> f64 {
        debug_assert!(k < self.n_y);
        let ks = if k <= self.n_y / 2 {
            k as i64
        } else {
            k as i64 - self.n_y as i64
        };
        ks as f64 * PI / self.l_y
    }

    pub fn etas(&self) -> Vec<f64> {
        (0..self.n_y).map(|k| self.eta(k)).collect()
    }

    /// Coordinates of a flattened column index, one entry per transverse axis.
    pub fn col_coords(&self, col: usize) -> Vec<f64> {
        self.col_indices(col)
            .into_iter()
            .map(|j| self.y(j))
            .collect()
    }

    pub fn col_indices(&self, col: usize) -> Vec<usize> {
        debug_assert!(col < self.n_cols());
        match self.axes {
            1 => vec![col],
            2 => vec![col / self.n_y, col % self.n_y],
            _ => unreachable!(),
        }
    }

    pub fn col_index(&self, indices: &[usize]) -> usize {
        debug_assert_eq!(indices.len(), self.axes);
        match self.axes {
            1 => indices[0],
            2 => indices[0] * self.n_y + indices[1],
            _ => unreachable!(),
        }
    }

    /// Largest group velocity representable on the grid, pi / dy.
    pub fn nyquist_velocity(&self) -> f64 {
        PI / self.dy
    }

    /// Time for the fastest representable mode to cross the half-box: beyond
    /// this, periodic wraparound can reach the bulk. Conservative by
    /// construction (uses the Nyquist velocity, not the data's support).
    pub fn wraparound_horizon(&self) -> f64 {
        self.l_y / self.nyquist_velocity()
    }
}
