use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use gridnet::datasets::{make_checkerboard, GlyphSet};
use gridnet::PixelGrid;

/// Where a probe image comes from: `checkerboard[:PHASE]`, `glyph:N`,
/// `file:PATH` or `pixels:CSV`.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageSpec {
    Checkerboard(u8),
    Glyph(usize),
    File(PathBuf),
    Pixels(Box<PixelGrid>),
}

impl FromStr for ImageSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind, arg) {
            ("checkerboard", None) => Ok(ImageSpec::Checkerboard(0)),
            ("checkerboard", Some(p)) => match p {
                "0" => Ok(ImageSpec::Checkerboard(0)),
                "1" => Ok(ImageSpec::Checkerboard(1)),
                _ => Err(format!("checkerboard phase must be 0 or 1, got {p:?}")),
            },
            ("glyph", Some(n)) => match n.parse::<usize>() {
                Ok(d) if d < 10 => Ok(ImageSpec::Glyph(d)),
                _ => Err(format!("glyph needs a digit 0-9, got {n:?}")),
            },
            ("file", Some(p)) if !p.is_empty() => Ok(ImageSpec::File(PathBuf::from(p))),
            ("pixels", Some(csv)) => parse_pixels(csv).map(|g| ImageSpec::Pixels(Box::new(g))),
            _ => Err(format!(
                "unrecognized image {s:?}; use checkerboard, glyph:N, file:PATH or pixels:CSV"
            )),
        }
    }
}

impl fmt::Display for ImageSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageSpec::Checkerboard(0) => f.write_str("checkerboard"),
            ImageSpec::Checkerboard(p) => write!(f, "checkerboard:{p}"),
            ImageSpec::Glyph(d) => write!(f, "glyph:{d}"),
            ImageSpec::File(p) => write!(f, "file:{}", p.display()),
            ImageSpec::Pixels(_) => f.write_str("pixels"),
        }
    }
}

fn parse_pixels(text: &str) -> Result<PixelGrid, String> {
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| format!("{t:?} is not a number"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    PixelGrid::new(&values).map_err(|e| e.to_string())
}

impl ImageSpec {
    /// Resolves to a grid. Only `file:` can fail here (I/O or contents);
    /// file contents may be comma separated values or `#`/`.` art.
    pub fn load(&self) -> Result<PixelGrid, String> {
        match self {
            ImageSpec::Checkerboard(p) => make_checkerboard(*p).map_err(|e| e.to_string()),
            ImageSpec::Glyph(d) => Ok(*GlyphSet::standard().get(*d)),
            ImageSpec::Pixels(g) => Ok(**g),
            ImageSpec::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                let trimmed = text.trim().trim_start_matches('[').trim_end_matches(']');
                let art = trimmed
                    .chars()
                    .all(|c| c == '#' || c == '.' || c.is_whitespace());
                let grid = if art {
                    PixelGrid::from_art(trimmed).map_err(|e| e.to_string())
                } else {
                    parse_pixels(trimmed)
                };
                grid.map_err(|e| format!("{}: {e}", path.display()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_specs() {
        assert_eq!("checkerboard".parse(), Ok(ImageSpec::Checkerboard(0)));
        assert_eq!("checkerboard:1".parse(), Ok(ImageSpec::Checkerboard(1)));
        assert_eq!("glyph:3".parse(), Ok(ImageSpec::Glyph(3)));
        assert!("glyph:10".parse::<ImageSpec>().is_err());
        assert!("glyph".parse::<ImageSpec>().is_err());
        assert!("file:".parse::<ImageSpec>().is_err());
        assert!("circle".parse::<ImageSpec>().is_err());
        let csv = vec!["0.5"; 36].join(",");
        assert!(format!("pixels:{csv}").parse::<ImageSpec>().is_ok());
        let short = vec!["1"; 35].join(",");
        assert!(format!("pixels:{short}").parse::<ImageSpec>().is_err());
        assert!(format!("pixels:{short},2").parse::<ImageSpec>().is_err());
    }

    #[test]
    fn loads_files() {
        let dir = std::env::temp_dir().join(format!("gridnet-image-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let art = dir.join("art.txt");
        let glyph = *GlyphSet::standard().get(2);
        std::fs::write(&art, glyph.to_art()).unwrap();
        assert_eq!(ImageSpec::File(art).load().unwrap(), glyph);

        let json = dir.join("px.json");
        std::fs::write(&json, serde_json_like(&glyph)).unwrap();
        assert_eq!(ImageSpec::File(json).load().unwrap(), glyph);
        assert!(ImageSpec::File(dir.join("missing")).load().is_err());
        std::fs::remove_dir_all(dir).unwrap();
    }

    fn serde_json_like(g: &PixelGrid) -> String {
        let parts: Vec<String> = g.pixels().iter().map(|p| p.to_string()).collect();
        format!("[{}]", parts.join(", "))
    }
}
