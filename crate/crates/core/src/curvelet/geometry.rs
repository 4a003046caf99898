use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-based address of a coefficient cell: `scale` 1 is the coarse cell,
/// `scale == scales` the finest (non-directional) cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WedgeIndex {
    pub scale: usize,
    pub wedge: usize,
}

impl WedgeIndex {
    pub const fn new(scale: usize, wedge: usize) -> Self {
        Self { scale, wedge }
    }
}

/// Shape parameters of a curvelet pyramid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub rows: usize,
    pub cols: usize,
    pub scales: usize,
    pub angles_coarse: usize,
}

impl Geometry {
    pub const DEFAULT_ANGLES: usize = 16;

    pub fn new(rows: usize, cols: usize, scales: usize, angles_coarse: usize) -> Result<Self> {
        if scales < 3 {
            return Err(Error::InvalidParameter(format!(
                "at least 3 scales required, got {scales}"
            )));
        }
        if angles_coarse < 8 || !angles_coarse.is_multiple_of(8) {
            return Err(Error::InvalidParameter(format!(
                "coarse angle count must be a positive multiple of 8, got {angles_coarse}"
            )));
        }
        let min_side = 1usize.checked_shl(scales as u32).unwrap_or(usize::MAX);
        if rows < min_side || cols < min_side {
            return Err(Error::InvalidParameter(format!(
                "{rows}x{cols} image is too small for {scales} scales"
            )));
        }
        let geometry = Self {
            rows,
            cols,
            scales,
            angles_coarse,
        };
        for scale in 2..scales {
            let (m1, m2) = geometry.radial_m(scale);
            let per_quadrant = geometry.angles(scale) / 4;
            for (mh, mv) in [(m2, m1), (m1, m2)] {
                if !QuadrantLayout::new(mh, mv, per_quadrant).is_valid() {
                    return Err(Error::InvalidParameter(format!(
                        "{rows}x{cols} image is too small for {scales} scales with \
                         {angles_coarse} coarse angles"
                    )));
                }
            }
        }
        Ok(geometry)
    }

    /// Default decomposition: `ceil(log2(min side)) - 3` scales, 16 coarse angles.
    pub fn with_defaults(rows: usize, cols: usize) -> Result<Self> {
        let min_side = rows.min(cols).max(1) as f64;
        let scales = (min_side.log2().ceil() as i64 - 3).max(0) as usize;
        Self::new(rows, cols, scales, Self::DEFAULT_ANGLES)
    }

    /// Number of cells at `scale` (1-based).
    pub fn angles(&self, scale: usize) -> usize {
        if scale <= 1 || scale >= self.scales {
            1
        } else {
            self.angles_coarse << (scale - 2).div_ceil(2)
        }
    }

    pub fn is_directional(&self, scale: usize) -> bool {
        scale > 1 && scale < self.scales
    }

    pub fn check(&self, idx: WedgeIndex) -> Result<()> {
        if idx.scale == 0
            || idx.scale > self.scales
            || idx.wedge == 0
            || idx.wedge > self.angles(idx.scale)
        {
            return Err(Error::WedgeOutOfRange {
                scale: idx.scale,
                wedge: idx.wedge,
            });
        }
        Ok(())
    }

    /// Radial parameters `(m1, m2)` of a directional or coarse scale.
    pub(crate) fn radial_m(&self, scale: usize) -> (f64, f64) {
        let mut m1 = self.rows as f64 / 3.0;
        let mut m2 = self.cols as f64 / 3.0;
        for _ in scale..=self.scales {
            m1 /= 2.0;
            m2 /= 2.0;
        }
        (m1, m2)
    }

    /// Shape of the coefficient matrix at `idx`, computed from the tiling
    /// alone.
    pub fn wedge_dims(&self, idx: WedgeIndex) -> Result<(usize, usize)> {
        self.check(idx)?;
        if idx.scale == self.scales {
            return Ok((self.rows, self.cols));
        }
        if idx.scale == 1 {
            let (m1, m2) = self.radial_m(2);
            let side = |m: f64| 2 * (2.0 * m).floor() as usize + 1;
            return Ok((side(m1), side(m2)));
        }
        let per_quadrant = self.angles(idx.scale) / 4;
        let quadrant = (idx.wedge - 1) / per_quadrant + 1;
        let sub = (idx.wedge - 1) % per_quadrant;
        let (m1, m2) = self.radial_m(idx.scale);
        let layout = self.quadrant_layout(quadrant, m1, m2, per_quadrant);
        let length = layout.length(sub) as usize;
        let width = layout.width(sub) as usize;
        Ok(if quadrant % 2 == 1 {
            (width, length)
        } else {
            (length, width)
        })
    }

    pub(crate) fn quadrant_layout(
        &self,
        quadrant: usize,
        m1: f64,
        m2: f64,
        per_quadrant: usize,
    ) -> QuadrantLayout {
        if quadrant % 2 == 1 {
            QuadrantLayout::new(m2, m1, per_quadrant)
        } else {
            QuadrantLayout::new(m1, m2, per_quadrant)
        }
    }

    /// The antipodal wedge whose coefficients are the complex conjugates of
    /// `idx`'s for a real image.
    pub fn conjugate_partner(&self, idx: WedgeIndex) -> Result<WedgeIndex> {
        self.check(idx)?;
        if !self.is_directional(idx.scale) {
            return Err(Error::InvalidParameter(format!(
                "scale {} has no directional wedges",
                idx.scale
            )));
        }
        let n = self.angles(idx.scale);
        Ok(WedgeIndex::new(idx.scale, (idx.wedge - 1 + n / 2) % n + 1))
    }

    pub fn wedge_count(&self) -> usize {
        (1..=self.scales).map(|s| self.angles(s)).sum()
    }

    pub fn indices(&self) -> impl Iterator<Item = WedgeIndex> + '_ {
        (1..=self.scales).flat_map(move |s| (1..=self.angles(s)).map(move |w| WedgeIndex::new(s, w)))
    }
}

/// Angular tiling of one quadrant, expressed in the quadrant's own frame
/// (rows run along the vertical frequency of that frame). All positions are
/// 1-based to keep the index arithmetic aligned with the tiling formulas.
#[derive(Clone, Debug)]
pub(crate) struct QuadrantLayout {
    pub m_vert: f64,
    pub fh: i64,
    pub fv: i64,
    pub per_quadrant: usize,
    pub endpoints: Vec<i64>,
    pub midpoints: Vec<f64>,
    pub first_vert_endpoint: i64,
}

impl QuadrantLayout {
    pub fn new(m_horiz: f64, m_vert: f64, per_quadrant: usize) -> Self {
        let fh = (4.0 * m_horiz).floor() as i64;
        let fv = (4.0 * m_vert).floor() as i64;
        let n = per_quadrant;
        let left: Vec<i64> = (0..=n)
            .map(|k| (k as f64 / (2 * n) as f64 * (2 * fh) as f64 + 1.0).round() as i64)
            .collect();
        let right: Vec<i64> = left.iter().map(|&t| 2 * fh + 2 - t).collect();
        let mut ticks = left;
        // n is even (angles_coarse is a multiple of 8) so the middle tick is shared
        ticks.extend(right[..n].iter().rev());
        let endpoints: Vec<i64> = ticks.iter().skip(1).step_by(2).take(n).copied().collect();
        let midpoints = endpoints
            .windows(2)
            .map(|w| (w[0] + w[1]) as f64 / 2.0)
            .collect();
        let first_vert_endpoint = ((2 * fv) as f64 / (2 * n) as f64 + 1.0).round() as i64;
        Self {
            m_vert,
            fh,
            fv,
            per_quadrant,
            endpoints,
            midpoints,
            first_vert_endpoint,
        }
    }

    fn is_valid(&self) -> bool {
        self.per_quadrant >= 2
            && self.fv >= 2
            && self.fh >= 2
            && self.endpoints[0] >= 2
            && self.first_vert_endpoint >= 2
            && self.endpoints.windows(2).all(|w| w[1] > w[0])
            && self.regular_length() >= 1
    }

    pub fn regular_length(&self) -> i64 {
        self.fv - self.m_vert.floor() as i64
    }

    pub fn corner_length(&self) -> i64 {
        self.regular_length() + (self.first_vert_endpoint as f64 / 4.0).ceil() as i64
    }

    /// Row count of sub-wedge `sub` (0 = left corner, n-1 = right corner).
    pub fn length(&self, sub: usize) -> i64 {
        if sub == 0 || sub + 1 == self.per_quadrant {
            self.corner_length()
        } else {
            self.regular_length()
        }
    }

    pub fn width(&self, sub: usize) -> i64 {
        let e = &self.endpoints;
        let n = self.per_quadrant;
        if sub == 0 {
            e[1] + e[0] - 1
        } else if sub + 1 == n {
            4 * self.fh + 3 - e[n - 1] - e[n - 2]
        } else {
            e[sub + 1] - e[sub - 1] + 1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scale_count() {
        assert_eq!(Geometry::with_defaults(512, 512).unwrap().scales, 6);
        assert_eq!(Geometry::with_defaults(256, 256).unwrap().scales, 5);
        assert_eq!(Geometry::with_defaults(128, 128).unwrap().scales, 4);
    }

    #[test]
    fn angle_counts() {
        let g = Geometry::with_defaults(512, 512).unwrap();
        let counts: Vec<usize> = (1..=6).map(|s| g.angles(s)).collect();
        assert_eq!(counts, vec![1, 16, 32, 32, 64, 1]);
    }

    #[test]
    fn partner_arithmetic() {
        let g = Geometry::with_defaults(512, 512).unwrap();
        let p = g.conjugate_partner(WedgeIndex::new(5, 2)).unwrap();
        assert_eq!(p, WedgeIndex::new(5, 34));
        assert_eq!(g.conjugate_partner(p).unwrap(), WedgeIndex::new(5, 2));
        assert_eq!(
            g.conjugate_partner(WedgeIndex::new(5, 40)).unwrap(),
            WedgeIndex::new(5, 8)
        );
        assert!(g.conjugate_partner(WedgeIndex::new(1, 1)).is_err());
        assert!(g.conjugate_partner(WedgeIndex::new(6, 1)).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Geometry::new(512, 512, 2, 16).is_err());
        assert!(Geometry::new(512, 512, 6, 12).is_err());
        assert!(Geometry::new(32, 32, 6, 16).is_err());
        let g = Geometry::with_defaults(512, 512).unwrap();
        assert!(g.wedge_dims(WedgeIndex::new(5, 65)).is_err());
        assert!(g.wedge_dims(WedgeIndex::new(7, 1)).is_err());
        assert!(g.wedge_dims(WedgeIndex::new(5, 0)).is_err());
    }
}
