//! Dense map and feature-tensor types shared by every metric and model module.
//!
//! All values are `f64`. Maps are stored row-major; feature tensors are
//! row-major by (row, col, channel). Non-square grids are supported
//! throughout. Every constructor validates its type's invariants, so a value
//! of one of these types is always well formed.

use crate::error::{Error, Result};

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue(format!("{what} contains non-finite values")));
    }
    Ok(())
}

/// Plain 2-D grid of `f64` values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidValue("grid dimensions must be positive".into()));
        }
        if values.len() != height * width {
            return Err(Error::shape(
                "grid construction",
                format!("{} values", height * width),
                format!("{} values", values.len()),
            ));
        }
        Ok(Grid { height, width, values })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Grid {
            height,
            width,
            values: vec![value; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width);
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.height && col < self.width);
        self.values[row * self.width + col] = value;
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    /// Bilinear resampling with edge clamping. The output is clamped to the
    /// source value range, and constant inputs are reproduced exactly.
    pub fn resample_bilinear(&self, new_height: usize, new_width: usize) -> Result<Grid> {
        if new_height == 0 || new_width == 0 {
            return Err(Error::InvalidValue("resample target dims must be positive".into()));
        }
        if (new_height, new_width) == (self.height, self.width) {
            return Ok(self.clone());
        }
        // lerp written as a + t*(b-a) so equal endpoints are returned exactly
        fn lerp(a: f64, b: f64, t: f64) -> f64 {
            a + t * (b - a)
        }
        let (lo, hi) = (self.min(), self.max());
        let mut values = Vec::with_capacity(new_height * new_width);
        for r in 0..new_height {
            // center-aligned source coordinate, clamped to the valid range
            let sr = ((r as f64 + 0.5) * self.height as f64 / new_height as f64 - 0.5)
                .clamp(0.0, (self.height - 1) as f64);
            let r0 = sr.floor() as usize;
            let r1 = (r0 + 1).min(self.height - 1);
            let fr = sr - r0 as f64;
            for c in 0..new_width {
                let sc = ((c as f64 + 0.5) * self.width as f64 / new_width as f64 - 0.5)
                    .clamp(0.0, (self.width - 1) as f64);
                let c0 = sc.floor() as usize;
                let c1 = (c0 + 1).min(self.width - 1);
                let fc = sc - c0 as f64;
                let top = lerp(self.at(r0, c0), self.at(r0, c1), fc);
                let bottom = lerp(self.at(r1, c0), self.at(r1, c1), fc);
                values.push(lerp(top, bottom, fr).clamp(lo, hi));
            }
        }
        Grid::new(new_height, new_width, values)
    }
}

/// Read access shared by all map newtypes, so metrics can score any of them.
pub trait ScalarMap {
    fn grid(&self) -> &Grid;

    fn dims(&self) -> (usize, usize) {
        self.grid().dims()
    }
}

impl ScalarMap for Grid {
    fn grid(&self) -> &Grid {
        self
    }
}

/// Dense activation tensor Z (or an input image), row-major by (row, col, channel).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidValue("feature map dims must be positive".into()));
        }
        if values.len() != height * width * channels {
            return Err(Error::shape(
                "feature map construction",
                format!("{} values", height * width * channels),
                format!("{} values", values.len()),
            ));
        }
        check_finite(&values, "feature map")?;
        Ok(FeatureMap {
            height,
            width,
            channels,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        FeatureMap {
            height,
            width,
            channels,
            values: vec![0.0; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn spatial_dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        (row * self.width + col) * self.channels + channel
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.values[self.index(row, col, channel)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        let i = self.index(row, col, channel);
        self.values[i] = value;
    }

    /// Extract a single channel as a grid.
    pub fn channel(&self, channel: usize) -> Grid {
        let mut values = Vec::with_capacity(self.height * self.width);
        for r in 0..self.height {
            for c in 0..self.width {
                values.push(self.at(r, c, channel));
            }
        }
        Grid::new(self.height, self.width, values).expect("channel dims valid")
    }
}

/// Soft attention map A with every cell in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap(Grid);

impl AttentionMap {
    pub fn new(grid: Grid) -> Result<Self> {
        check_finite(grid.values(), "attention map")?;
        if grid.values().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidValue("attention map values must lie in [0, 1]".into()));
        }
        Ok(AttentionMap(grid))
    }

    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        AttentionMap::new(Grid::new(height, width, values)?)
    }

    pub fn resampled(&self, new_height: usize, new_width: usize) -> Result<AttentionMap> {
        Ok(AttentionMap(self.0.resample_bilinear(new_height, new_width)?))
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }
}

impl ScalarMap for AttentionMap {
    fn grid(&self) -> &Grid {
        &self.0
    }
}

/// Unconstrained significance matrix Y, the pre-activation of an attention map.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceMap(Grid);

impl SignificanceMap {
    pub fn new(grid: Grid) -> Result<Self> {
        check_finite(grid.values(), "significance map")?;
        Ok(SignificanceMap(grid))
    }

    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        SignificanceMap::new(Grid::new(height, width, values)?)
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }
}

impl ScalarMap for SignificanceMap {
    fn grid(&self) -> &Grid {
        &self.0
    }
}

/// Continuous human fixation density; nonnegative, normalizable to a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap(Grid);

impl DensityMap {
    pub fn new(grid: Grid) -> Result<Self> {
        check_finite(grid.values(), "density map")?;
        if grid.values().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidValue("density map values must be nonnegative".into()));
        }
        Ok(DensityMap(grid))
    }

    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        DensityMap::new(Grid::new(height, width, values)?)
    }

    pub fn resampled(&self, new_height: usize, new_width: usize) -> Result<DensityMap> {
        // bilinear output of nonnegative input stays nonnegative (clamped to source range)
        Ok(DensityMap(self.0.resample_bilinear(new_height, new_width)?))
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }
}

impl ScalarMap for DensityMap {
    fn grid(&self) -> &Grid {
        &self.0
    }
}

/// Attention glimpse G = A ⊙ Z, applied per channel: `G[i,j,d] = A[i,j] * Z[i,j,d]`.
pub fn apply_attention(z: &FeatureMap, a: &AttentionMap) -> Result<FeatureMap> {
    if z.spatial_dims() != a.dims() {
        return Err(Error::shape(
            "apply_attention",
            format!("{:?}", z.spatial_dims()),
            format!("{:?}", a.dims()),
        ));
    }
    let mut g = z.clone();
    let width = z.width();
    let channels = z.channels();
    for r in 0..z.height() {
        for c in 0..width {
            let w = a.grid().at(r, c);
            let base = (r * width + c) * channels;
            for d in 0..channels {
                g.values_mut()[base + d] = w * z.values()[base + d];
            }
        }
    }
    Ok(g)
}
