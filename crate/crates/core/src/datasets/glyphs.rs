use crate::error::{Error, Result};
use crate::grid::PixelGrid;

/// Hand-drawn stand-ins for the ten digits. Pairwise Hamming distance is at least 6.
const STANDARD_ART: [&str; 10] = [
    ".####.
     #....#
     #....#
     #....#
     #....#
     .####.",
    "..##..
     .###..
     ..##..
     ..##..
     ..##..
     .####.",
    ".####.
     #....#
     ....#.
     ..##..
     .#....
     ######",
    "#####.
     .....#
     ...##.
     .....#
     .....#
     .####.",
    "#...#.
     #...#.
     #...#.
     ######
     ....#.
     ....#.",
    "######
     #.....
     #####.
     .....#
     .....#
     #####.",
    "..###.
     .#....
     #.....
     #####.
     #....#
     .####.",
    "######
     .....#
     ....#.
     ...#..
     ..#...
     ..#...",
    ".####.
     #....#
     .####.
     #....#
     #....#
     .####.",
    ".####.
     #....#
     .#####
     .....#
     ....#.
     .###..",
];

pub const MIN_LIT: usize = 6;
pub const MAX_LIT: usize = 30;

/// Binary canonical glyph for each digit 0-9.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphSet {
    glyphs: [PixelGrid; 10],
}

impl GlyphSet {
    pub fn standard() -> Self {
        let glyphs = STANDARD_ART.map(|art| PixelGrid::from_art(art).expect("built-in glyph art"));
        GlyphSet::new(glyphs).expect("built-in glyphs are valid")
    }

    pub fn new(glyphs: [PixelGrid; 10]) -> Result<Self> {
        for (d, g) in glyphs.iter().enumerate() {
            if g.pixels().iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::Argument(format!("glyph {d} is not binary")));
            }
            let lit = g.lit_count();
            if !(MIN_LIT..=MAX_LIT).contains(&lit) {
                return Err(Error::Argument(format!(
                    "glyph {d} has {lit} lit pixels (allowed {MIN_LIT}..={MAX_LIT})"
                )));
            }
            for (e, h) in glyphs.iter().enumerate().skip(d + 1) {
                if g == h {
                    return Err(Error::Argument(format!("glyphs {d} and {e} are identical")));
                }
            }
        }
        Ok(GlyphSet { glyphs })
    }

    pub fn get(&self, digit: usize) -> &PixelGrid {
        &self.glyphs[digit]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PixelGrid> {
        self.glyphs.iter()
    }

    /// Digit whose glyph is nearest in Hamming distance (lowest digit on ties).
    pub fn nearest(&self, image: &PixelGrid) -> usize {
        (0..10)
            .min_by_key(|&d| (self.glyphs[d].hamming(image), d))
            .expect("ten glyphs")
    }
}
