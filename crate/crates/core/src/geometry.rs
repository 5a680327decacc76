//! Spherical geometry: directions, great-circle angular distance with
//! analytic gradients, and the overlapping longitude-latitude grid.
//!
//! All angles are degrees at the API surface. Azimuths live in `[-180, 180)`,
//! elevations in `[-90, 90]`. Every operation here is a pure function on
//! immutable values.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

pub(crate) const DEG_TO_RAD: f64 = PI / 180.0;
pub(crate) const RAD_TO_DEG: f64 = 180.0 / PI;

/// Angular distances below this (and within it of 180°) are treated as
/// singular by [`angular_distance_grad`]: the great-circle angle is not
/// differentiable at coincident or antipodal points, and zero is the
/// subgradient that keeps gradient descent stable there.
pub const GRAD_EPSILON_DEG: f64 = 1e-7;

/// Errors from constructing geometric values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeometryError {
    /// Elevation outside `[-90, 90]` degrees.
    ElevationOutOfRange(f64),
    /// An angle was NaN or infinite.
    NonFiniteAngle,
    /// Cell width must evenly divide 360 degrees.
    BadCellWidth(f64),
    /// Cell height must evenly divide 180 degrees.
    BadCellHeight(f64),
    /// Overlap fraction must lie in `[0, 1)`.
    BadOverlap(f64),
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ElevationOutOfRange(v) => {
                write!(f, "elevation {v} degrees outside [-90, 90]")
            }
            Self::NonFiniteAngle => write!(f, "angle is NaN or infinite"),
            Self::BadCellWidth(v) => {
                write!(f, "cell width {v} degrees does not evenly divide 360")
            }
            Self::BadCellHeight(v) => {
                write!(f, "cell height {v} degrees does not evenly divide 180")
            }
            Self::BadOverlap(v) => write!(f, "overlap fraction {v} outside [0, 1)"),
        }
    }
}

impl core::error::Error for GeometryError {}

/// Wraps an azimuth into `[-180, 180)` degrees.
///
/// Values already in range pass through bit-exactly, which text round trips
/// of label files rely on.
pub fn wrap_azimuth_deg(azimuth_deg: f64) -> f64 {
    if (-180.0..180.0).contains(&azimuth_deg) {
        return azimuth_deg;
    }
    let r = (azimuth_deg + 180.0) % 360.0;
    let r = if r < 0.0 { r + 360.0 } else { r };
    let wrapped = r - 180.0;
    // r + 360.0 can round up to exactly 360.0 for tiny negative r.
    if wrapped >= 180.0 {
        wrapped - 360.0
    } else {
        wrapped
    }
}

/// A point on the unit sphere, stored as azimuth/elevation degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    azimuth_deg: f64,
    elevation_deg: f64,
}

impl Direction {
    /// Builds a direction, normalizing the azimuth into `[-180, 180)`.
    ///
    /// Elevations outside `[-90, 90]` are rejected rather than clamped.
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Result<Self, GeometryError> {
        if !azimuth_deg.is_finite() || !elevation_deg.is_finite() {
            return Err(GeometryError::NonFiniteAngle);
        }
        if !(-90.0..=90.0).contains(&elevation_deg) {
            return Err(GeometryError::ElevationOutOfRange(elevation_deg));
        }
        Ok(Self {
            azimuth_deg: wrap_azimuth_deg(azimuth_deg),
            elevation_deg,
        })
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation_deg
    }

    /// Unit Cartesian vector: x toward azimuth 0, y toward azimuth +90,
    /// z toward elevation +90.
    pub fn to_cartesian(&self) -> [f64; 3] {
        let az = self.azimuth_deg * DEG_TO_RAD;
        let el = self.elevation_deg * DEG_TO_RAD;
        let (sin_az, cos_az) = (libm::sin(az), libm::cos(az));
        let (sin_el, cos_el) = (libm::sin(el), libm::cos(el));
        [cos_el * cos_az, cos_el * sin_az, sin_el]
    }

    /// Direction of a nonzero Cartesian vector (normalized internally).
    pub fn from_cartesian(v: [f64; 3]) -> Self {
        let norm = libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        assert!(norm > 0.0, "cannot take the direction of a zero vector");
        let z = (v[2] / norm).clamp(-1.0, 1.0);
        let elevation_deg = libm::asin(z) * RAD_TO_DEG;
        let azimuth_deg = if v[0] == 0.0 && v[1] == 0.0 {
            0.0
        } else {
            libm::atan2(v[1], v[0]) * RAD_TO_DEG
        };
        Self {
            azimuth_deg: wrap_azimuth_deg(azimuth_deg),
            elevation_deg: elevation_deg.clamp(-90.0, 90.0),
        }
    }
}

/// Great-circle central angle between two directions, in `[0, 180]` degrees.
///
/// The arc-cosine argument is clamped to `[-1, 1]` so floating-point noise
/// near coincident or antipodal pairs cannot produce NaN.
pub fn angular_distance_deg(a: Direction, b: Direction) -> f64 {
    libm::acos(cos_central_angle(a, b)) * RAD_TO_DEG
}

fn cos_central_angle(a: Direction, b: Direction) -> f64 {
    if a == b {
        // Keeps the distance of a direction to itself exactly zero; the
        // trigonometric route returns ~1e-7 degrees of rounding noise.
        return 1.0;
    }
    let az_a = a.azimuth_deg * DEG_TO_RAD;
    let el_a = a.elevation_deg * DEG_TO_RAD;
    let az_b = b.azimuth_deg * DEG_TO_RAD;
    let el_b = b.elevation_deg * DEG_TO_RAD;
    let cos_delta = libm::sin(el_a) * libm::sin(el_b)
        + libm::cos(el_a) * libm::cos(el_b) * libm::cos(az_a - az_b);
    cos_delta.clamp(-1.0, 1.0)
}

/// Partial derivatives of [`angular_distance_deg`]`(a, b)` with respect to
/// `a`'s azimuth and elevation.
///
/// The returned values are dimensionless (degrees of distance per degree of
/// angle), so they equal the radian-per-radian derivatives. Within
/// [`GRAD_EPSILON_DEG`] of 0° or 180° the derivative is undefined and `(0, 0)`
/// is returned.
pub fn angular_distance_grad(a: Direction, b: Direction) -> (f64, f64) {
    let cos_delta = cos_central_angle(a, b);
    let delta_deg = libm::acos(cos_delta) * RAD_TO_DEG;
    if delta_deg < GRAD_EPSILON_DEG || delta_deg > 180.0 - GRAD_EPSILON_DEG {
        return (0.0, 0.0);
    }
    let sin_delta = libm::sqrt((1.0 - cos_delta * cos_delta).max(0.0));
    let az_a = a.azimuth_deg * DEG_TO_RAD;
    let el_a = a.elevation_deg * DEG_TO_RAD;
    let az_b = b.azimuth_deg * DEG_TO_RAD;
    let el_b = b.elevation_deg * DEG_TO_RAD;
    let (sin_el_a, cos_el_a) = (libm::sin(el_a), libm::cos(el_a));
    let (sin_el_b, cos_el_b) = (libm::sin(el_b), libm::cos(el_b));
    let cos_daz = libm::cos(az_a - az_b);
    let d_azimuth = cos_el_a * cos_el_b * libm::sin(az_a - az_b) / sin_delta;
    let d_elevation = -(cos_el_a * sin_el_b - sin_el_a * cos_el_b * cos_daz) / sin_delta;
    (d_azimuth, d_elevation)
}

/// Partition of the sphere into equal longitude-latitude cells, with an
/// overlap fraction that extends each cell's responsibility region on every
/// side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    cell_width_deg: f64,
    cell_height_deg: f64,
    overlap_fraction: f64,
    lon_cells: usize,
    lat_cells: usize,
}

impl GridSpec {
    /// Builds a grid. The cell width must evenly divide 360° and the height
    /// 180°; the overlap fraction must lie in `[0, 1)`.
    pub fn new(
        cell_width_deg: f64,
        cell_height_deg: f64,
        overlap_fraction: f64,
    ) -> Result<Self, GeometryError> {
        let lon_cells = exact_divisions(360.0, cell_width_deg)
            .ok_or(GeometryError::BadCellWidth(cell_width_deg))?;
        let lat_cells = exact_divisions(180.0, cell_height_deg)
            .ok_or(GeometryError::BadCellHeight(cell_height_deg))?;
        if !overlap_fraction.is_finite() || !(0.0..1.0).contains(&overlap_fraction) {
            return Err(GeometryError::BadOverlap(overlap_fraction));
        }
        Ok(Self {
            cell_width_deg,
            cell_height_deg,
            overlap_fraction,
            lon_cells,
            lat_cells,
        })
    }

    pub fn cell_width_deg(&self) -> f64 {
        self.cell_width_deg
    }

    pub fn cell_height_deg(&self) -> f64 {
        self.cell_height_deg
    }

    pub fn overlap_fraction(&self) -> f64 {
        self.overlap_fraction
    }

    pub fn lon_cells(&self) -> usize {
        self.lon_cells
    }

    pub fn lat_cells(&self) -> usize {
        self.lat_cells
    }

    /// Total number of cells `G`.
    pub fn num_cells(&self) -> usize {
        self.lon_cells * self.lat_cells
    }

    /// Longitude extension added on each side of a cell, in degrees.
    pub fn lon_extension_deg(&self) -> f64 {
        self.overlap_fraction * self.cell_width_deg
    }

    /// Latitude extension added on each side of a cell, in degrees.
    pub fn lat_extension_deg(&self) -> f64 {
        self.overlap_fraction * self.cell_height_deg
    }
}

impl Default for GridSpec {
    /// 45° x 45° cells with 50% overlap: 8 x 4 = 32 cells.
    fn default() -> Self {
        Self::new(45.0, 45.0, 0.5).expect("default grid is valid")
    }
}

fn exact_divisions(total: f64, step: f64) -> Option<usize> {
    if !step.is_finite() || step <= 0.0 || step > total {
        return None;
    }
    let n = libm::round(total / step);
    if (n * step - total).abs() > 1e-9 {
        return None;
    }
    Some(n as usize)
}

/// A single grid cell. `flat == j * lon_cells + i` (row-major over latitude,
/// then longitude); this layout is a fixed contract shared with the raw
/// prediction tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridIndex {
    /// Longitude cell index in `[0, 360 / cell_width)`.
    pub i: usize,
    /// Latitude cell index in `[0, 180 / cell_height)`.
    pub j: usize,
    /// Combined row-major index in `[0, G)`.
    pub flat: usize,
}

impl GridIndex {
    pub fn new(i: usize, j: usize, spec: &GridSpec) -> Self {
        assert!(i < spec.lon_cells && j < spec.lat_cells, "cell out of range");
        Self {
            i,
            j,
            flat: j * spec.lon_cells + i,
        }
    }

    pub fn from_flat(flat: usize, spec: &GridSpec) -> Self {
        assert!(flat < spec.num_cells(), "flat cell index out of range");
        Self {
            i: flat % spec.lon_cells,
            j: flat / spec.lon_cells,
            flat,
        }
    }

    /// Base longitude interval `[low, high)` in degrees, low edge at -180.
    pub fn lon_interval_deg(&self, spec: &GridSpec) -> (f64, f64) {
        let lo = -180.0 + self.i as f64 * spec.cell_width_deg;
        (lo, lo + spec.cell_width_deg)
    }

    /// Base latitude interval in degrees, low edge at -90. The interval is
    /// half-open except that +90 belongs to the top row.
    pub fn lat_interval_deg(&self, spec: &GridSpec) -> (f64, f64) {
        let lo = -90.0 + self.j as f64 * spec.cell_height_deg;
        (lo, lo + spec.cell_height_deg)
    }

    /// Center of the cell.
    pub fn center(&self, spec: &GridSpec) -> Direction {
        let (lon_lo, _) = self.lon_interval_deg(spec);
        let (lat_lo, _) = self.lat_interval_deg(spec);
        Direction::new(
            lon_lo + 0.5 * spec.cell_width_deg,
            lat_lo + 0.5 * spec.cell_height_deg,
        )
        .expect("cell centers are always valid directions")
    }
}

/// The unique base cell containing a direction.
///
/// Intervals are half-open `[low, high)` on both axes except that the top
/// latitude edge (+90°) belongs to the last row, so every direction maps to
/// exactly one cell.
pub fn cell_of(d: Direction, spec: &GridSpec) -> GridIndex {
    let i = (libm::floor((d.azimuth_deg() + 180.0) / spec.cell_width_deg) as usize)
        .min(spec.lon_cells - 1);
    let j = (libm::floor((d.elevation_deg() + 90.0) / spec.cell_height_deg) as usize)
        .min(spec.lat_cells - 1);
    GridIndex::new(i, j, spec)
}

/// Every cell whose overlap-extended region contains `d`, ordered by flat
/// index. Always a superset of `{cell_of(d)}`.
///
/// Per axis, a coordinate is inside an extended cell when it lies in the
/// cell's base half-open interval or strictly inside the interval expanded
/// by the extension. The strict boundary means a direction exactly one
/// extension away (a neighboring cell center, at 50% overlap) does not spill
/// over, and zero overlap degenerates to `cell_of` exactly. Longitude
/// extensions wrap around ±180°; latitude extensions are truncated at the
/// poles rather than wrapping over them.
pub fn extended_cells_of(d: Direction, spec: &GridSpec) -> Vec<GridIndex> {
    let ext_w = spec.lon_extension_deg();
    let ext_h = spec.lat_extension_deg();
    let width_ext = spec.cell_width_deg + 2.0 * ext_w;
    let base = cell_of(d, spec);
    let el = d.elevation_deg();
    let az = d.azimuth_deg();
    let mut cells = Vec::new();
    for j in 0..spec.lat_cells {
        let lat_lo = -90.0 + j as f64 * spec.cell_height_deg;
        let lat_hi = lat_lo + spec.cell_height_deg;
        let lat_ok =
            j == base.j || (ext_h > 0.0 && el > lat_lo - ext_h && el < lat_hi + ext_h);
        if !lat_ok {
            continue;
        }
        for i in 0..spec.lon_cells {
            let lon_lo = -180.0 + i as f64 * spec.cell_width_deg;
            let lon_ok = i == base.i
                || (ext_w > 0.0 && strictly_within_wrapped(az, lon_lo - ext_w, width_ext));
            if lon_ok {
                cells.push(GridIndex::new(i, j, spec));
            }
        }
    }
    cells
}

/// Whether `azimuth` lies strictly inside the open interval of the given
/// width starting at `lo`, on the wrapped circle.
fn strictly_within_wrapped(azimuth_deg: f64, lo_deg: f64, width_deg: f64) -> bool {
    if width_deg >= 360.0 {
        return true;
    }
    let mut rel = azimuth_deg - lo_deg;
    while rel < 0.0 {
        rel += 360.0;
    }
    while rel >= 360.0 {
        rel -= 360.0;
    }
    rel > 0.0 && rel < width_deg
}
