use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::train::Model;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// `P(y = +1)` sampled on a `resolution x resolution` lattice, row-major with
/// `y` as the outer index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGrid {
    pub region: Region,
    pub resolution: usize,
    pub probs: Vec<f64>,
    /// `atan2(|w2|, |w1|)` in degrees, for linear models.
    pub angle_degrees: Option<f64>,
}

impl BoundaryGrid {
    pub fn x(&self, ix: usize) -> f64 {
        lerp(self.region.x_min, self.region.x_max, ix, self.resolution)
    }

    pub fn y(&self, iy: usize) -> f64 {
        lerp(self.region.y_min, self.region.y_max, iy, self.resolution)
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.probs[iy * self.resolution + ix]
    }

    /// CSV with columns `x,y,p`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("x,y,p\n");
        for iy in 0..self.resolution {
            for ix in 0..self.resolution {
                let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", self.x(ix), self.y(iy), self.at(ix, iy));
            }
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn lerp(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    lo + (hi - lo) * i as f64 / (n - 1) as f64
}

pub fn boundary_grid(model: &Model, region: Region, resolution: usize) -> Result<BoundaryGrid> {
    if model.input_dim() != 2 || model.classes() != 2 {
        return Err(Error::Mode(format!(
            "boundary grids need a 2-D binary model, got {} inputs and {} classes",
            model.input_dim(),
            model.classes()
        )));
    }
    if resolution < 2 || !(region.x_min < region.x_max && region.y_min < region.y_max) {
        return Err(Error::config(format!("invalid boundary region {region:?} at resolution {resolution}")));
    }
    let mut pts = Array2::zeros((resolution * resolution, 2));
    for iy in 0..resolution {
        for ix in 0..resolution {
            let r = iy * resolution + ix;
            pts[[r, 0]] = lerp(region.x_min, region.x_max, ix, resolution);
            pts[[r, 1]] = lerp(region.y_min, region.y_max, iy, resolution);
        }
    }
    let probs = model.predict_proba(pts.view())?.column(1).to_vec();
    let angle_degrees = model.as_linear().map(|m| m.w()[1].abs().atan2(m.w()[0].abs()).to_degrees());
    Ok(BoundaryGrid {
        region,
        resolution,
        probs,
        angle_degrees,
    })
}
