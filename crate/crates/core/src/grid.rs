use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub const GRID_ROWS: usize = 6;
pub const GRID_COLS: usize = 6;
pub const GRID_LEN: usize = GRID_ROWS * GRID_COLS;

/// A 6x6 image, row-major, every intensity in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelGrid([f64; GRID_LEN]);

impl PixelGrid {
    pub fn new(pixels: &[f64]) -> Result<Self> {
        if pixels.len() != GRID_LEN {
            return Err(Error::Argument(format!(
                "pixel grid needs exactly {GRID_LEN} values, got {}",
                pixels.len()
            )));
        }
        let mut out = [0.0; GRID_LEN];
        for (i, (&v, o)) in pixels.iter().zip(out.iter_mut()).enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Argument(format!(
                    "pixel {i} = {v} is outside [0, 1]"
                )));
            }
            *o = v;
        }
        Ok(PixelGrid(out))
    }

    pub fn zeros() -> Self {
        PixelGrid([0.0; GRID_LEN])
    }

    /// Builds a binary grid from lit flags.
    pub fn from_bits(bits: &[bool; GRID_LEN]) -> Self {
        let mut out = [0.0; GRID_LEN];
        for (o, &b) in out.iter_mut().zip(bits) {
            *o = if b { 1.0 } else { 0.0 };
        }
        PixelGrid(out)
    }

    /// Parses six rows of `#` (lit) and `.` (dark), whitespace ignored.
    pub fn from_art(art: &str) -> Result<Self> {
        let cells: Vec<f64> = art
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '#' => Ok(1.0),
                '.' => Ok(0.0),
                other => Err(Error::Argument(format!(
                    "unexpected glyph character {other:?}"
                ))),
            })
            .collect::<Result<_>>()?;
        PixelGrid::new(&cells)
    }

    pub fn pixels(&self) -> &[f64; GRID_LEN] {
        &self.0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row * GRID_COLS + col]
    }

    /// Number of pixels at or above one half.
    pub fn lit_count(&self) -> usize {
        self.0.iter().filter(|&&v| v >= 0.5).count()
    }

    /// Count of positions whose thresholded values differ.
    pub fn hamming(&self, other: &PixelGrid) -> usize {
        self.0
            .iter()
            .zip(other.0.iter())
            .filter(|(a, b)| (**a >= 0.5) != (**b >= 0.5))
            .count()
    }

    pub fn to_art(&self) -> String {
        let mut s = String::with_capacity(GRID_LEN + GRID_ROWS);
        for r in 0..GRID_ROWS {
            for c in 0..GRID_COLS {
                s.push(if self.get(r, c) >= 0.5 { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }
}

impl Serialize for PixelGrid {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(serializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length() {
        assert!(PixelGrid::new(&[0.0; 35]).is_err());
        assert!(PixelGrid::new(&[0.0; 37]).is_err());
    }

    #[test]
    fn rejects_out_of_range() {
        let mut v = [0.0; 36];
        v[3] = 1.5;
        assert!(PixelGrid::new(&v).is_err());
        v[3] = -0.1;
        assert!(PixelGrid::new(&v).is_err());
        v[3] = f64::NAN;
        assert!(PixelGrid::new(&v).is_err());
    }

    #[test]
    fn art_round_trip() {
        let art = "#....#\n.#..#.\n..##..\n..##..\n.#..#.\n#....#\n";
        let g = PixelGrid::from_art(art).unwrap();
        assert_eq!(g.to_art(), art);
        assert_eq!(g.lit_count(), 12);
        assert_eq!(g.get(0, 0), 1.0);
        assert_eq!(g.get(0, 1), 0.0);
    }
}
