//! Evaluation-point designs on [0,1]^d and their geometry.
//!
//! The geometric quantities follow the usual scattered-data conventions:
//!
//! * fill distance `h_X = sup_{x in Ω} min_i ‖x - x_i‖`;
//! * separation radius `q_X = ½ min_{i≠j} ‖x_i - x_j‖`;
//! * mesh ratio `ρ_X = h_X / q_X >= 1`.
//!
//! In one dimension the fill distance is computed exactly from the sorted
//! gaps; in two dimensions it is the maximum over a lattice of spacing
//! `1/resolution`, which under-estimates the true supremum by at most
//! `√d / (2 resolution)`.

use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::euclidean;

pub const MAX_DIM: usize = 2;
pub const MIN_RESOLUTION: usize = 64;

pub fn default_resolution(dim: usize) -> usize {
    if dim <= 1 {
        512
    } else {
        256
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PointSetError {
    #[error("{what} needs at least {required} points, got {got}")]
    TooFewPoints {
        what: &'static str,
        required: usize,
        got: usize,
    },
    #[error("dimension {0} is not supported (1 <= d <= {MAX_DIM})")]
    UnsupportedDimension(usize),
    #[error("point {index} {point:?} lies outside [0,1]^d or has the wrong length")]
    InvalidPoint { index: usize, point: Vec<f64> },
    #[error("points {first} and {second} coincide")]
    Duplicate { first: usize, second: usize },
    #[error("cartesian product needs a one-dimensional axis, got dimension {0}")]
    AxisNotOneDimensional(usize),
    #[error("lattice resolution {0} is below the minimum of {MIN_RESOLUTION}")]
    ResolutionTooSmall(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    UniformGrid,
    VanDerCorput,
    CartesianProduct,
    Explicit,
}

/// `N` distinct points in [0,1]^d, stored in generation order.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    coords: Vec<f64>,
    dim: usize,
    provenance: Provenance,
}

impl PointSet {
    /// Validates and wraps user-supplied points.
    pub fn explicit(points: &[Vec<f64>], dim: usize) -> Result<Self, PointSetError> {
        check_dim(dim)?;
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim || !p.iter().all(|c| (0.0..=1.0).contains(c)) {
                return Err(PointSetError::InvalidPoint {
                    index,
                    point: p.clone(),
                });
            }
        }
        let set = Self {
            coords: points.concat(),
            dim,
            provenance: Provenance::Explicit,
        };
        if let Some((first, second)) = set.find_duplicate() {
            return Err(PointSetError::Duplicate { first, second });
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Index of a point bitwise equal to `x`, if any.
    pub fn position(&self, x: &[f64]) -> Option<usize> {
        self.iter().position(|p| p == x)
    }

    /// First `n` points, keeping provenance.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            coords: self.coords[..n * self.dim].to_vec(),
            dim: self.dim,
            provenance: self.provenance,
        }
    }

    /// Indices sorted by first coordinate (ties by the remaining ones).
    fn sorted_by_first(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.point(a)
                .partial_cmp(self.point(b))
                .expect("coordinates are finite")
        });
        idx
    }

    fn find_duplicate(&self) -> Option<(usize, usize)> {
        let idx = self.sorted_by_first();
        idx.windows(2)
            .find(|w| self.point(w[0]) == self.point(w[1]))
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
    }
}

fn check_dim(dim: usize) -> Result<(), PointSetError> {
    if dim == 0 || dim > MAX_DIM {
        return Err(PointSetError::UnsupportedDimension(dim));
    }
    Ok(())
}

/// `{0, 1/(N-1), …, 1}`.
pub fn uniform_grid(n: usize) -> Result<PointSet, PointSetError> {
    if n < 2 {
        return Err(PointSetError::TooFewPoints {
            what: "uniform grid",
            required: 2,
            got: n,
        });
    }
    let denom = (n - 1) as f64;
    Ok(PointSet {
        coords: (0..n).map(|i| i as f64 / denom).collect(),
        dim: 1,
        provenance: Provenance::UniformGrid,
    })
}

/// Base-2 radical inverse of `i`.
pub fn radical_inverse(i: u64) -> f64 {
    // The reversed bit pattern has at most 64 - leading_zeros significant bits
    // at the top, so the conversion is exact for i < 2^53.
    i.reverse_bits() as f64 * (-64.0f64).exp2()
}

/// First `n` terms of the van der Corput sequence 0, 1/2, 1/4, 3/4, 1/8, …
pub fn van_der_corput(n: usize) -> Result<PointSet, PointSetError> {
    if n < 1 {
        return Err(PointSetError::TooFewPoints {
            what: "van der Corput sequence",
            required: 1,
            got: n,
        });
    }
    Ok(PointSet {
        coords: (0..n as u64).map(radical_inverse).collect(),
        dim: 1,
        provenance: Provenance::VanDerCorput,
    })
}

/// All `dim`-fold tuples of the axis points, first coordinate varying slowest.
pub fn cartesian_product(axis: &PointSet, dim: usize) -> Result<PointSet, PointSetError> {
    check_dim(dim)?;
    if axis.dim != 1 {
        return Err(PointSetError::AxisNotOneDimensional(axis.dim));
    }
    if dim == 1 {
        return Ok(PointSet {
            provenance: Provenance::CartesianProduct,
            ..axis.clone()
        });
    }
    let a = &axis.coords;
    let mut coords = Vec::with_capacity(a.len() * a.len() * 2);
    for &u in a {
        for &v in a {
            coords.push(u);
            coords.push(v);
        }
    }
    Ok(PointSet {
        coords,
        dim: 2,
        provenance: Provenance::CartesianProduct,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub fill_distance: f64,
    pub separation_radius: f64,
    pub mesh_ratio: f64,
}

/// Fill distance, separation radius and mesh ratio of `x`.
pub fn geometry(x: &PointSet, resolution: usize) -> Result<Geometry, PointSetError> {
    if x.len() < 2 {
        return Err(PointSetError::TooFewPoints {
            what: "geometry",
            required: 2,
            got: x.len(),
        });
    }
    if resolution < MIN_RESOLUTION {
        return Err(PointSetError::ResolutionTooSmall(resolution));
    }
    let order = x.sorted_by_first();
    let separation_radius = 0.5 * min_pairwise_distance(x, &order);
    let fill_distance = if x.dim == 1 {
        fill_distance_1d(x, &order)
    } else {
        fill_distance_lattice(x, &order, resolution)
    };
    Ok(Geometry {
        fill_distance,
        separation_radius,
        mesh_ratio: fill_distance / separation_radius,
    })
}

fn min_pairwise_distance(x: &PointSet, order: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for (k, &i) in order.iter().enumerate() {
        let p = x.point(i);
        for &j in &order[k + 1..] {
            let q = x.point(j);
            if q[0] - p[0] >= best {
                break;
            }
            best = best.min(euclidean(p, q));
        }
    }
    best
}

fn fill_distance_1d(x: &PointSet, order: &[usize]) -> f64 {
    let first = x.point(order[0])[0];
    let last = x.point(order[order.len() - 1])[0];
    let interior = order
        .windows(2)
        .map(|w| 0.5 * (x.point(w[1])[0] - x.point(w[0])[0]))
        .fold(0.0, f64::max);
    first.max(1.0 - last).max(interior)
}

fn fill_distance_lattice(x: &PointSet, order: &[usize], resolution: usize) -> f64 {
    let firsts: Vec<f64> = order.iter().map(|&i| x.point(i)[0]).collect();
    let step = 1.0 / resolution as f64;
    (0..=resolution)
        .into_par_iter()
        .map(|i| {
            let mut q = vec![i as f64 * step; x.dim];
            let mut worst = 0.0f64;
            for j in 0..=resolution {
                q[1] = j as f64 * step;
                worst = worst.max(nearest_distance(x, order, &firsts, &q));
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Distance from `q` to the nearest point, scanning outwards in first coordinate.
fn nearest_distance(x: &PointSet, order: &[usize], firsts: &[f64], q: &[f64]) -> f64 {
    let start = firsts.partition_point(|&v| v < q[0]);
    let mut best = f64::INFINITY;
    let mut hi = start;
    let mut lo = start;
    loop {
        let mut progressed = false;
        if hi < order.len() && firsts[hi] - q[0] < best {
            best = best.min(euclidean(x.point(order[hi]), q));
            hi += 1;
            progressed = true;
        }
        if lo > 0 && q[0] - firsts[lo - 1] < best {
            lo -= 1;
            best = best.min(euclidean(x.point(order[lo]), q));
            progressed = true;
        }
        if !progressed {
            return best;
        }
    }
}
