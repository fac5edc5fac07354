//! Map files.
//!
//! ```text
//! swarmnav-map v1
//! domain_side 50
//! # one polygon per line, x y pairs in order
//! obstacle 10 10 20 10 20 20 10 20
//! ```

use std::path::Path;

use swarmnav_core::geom::Vec2;
use swarmnav_core::navmesh::{MapSpec, Polygon};

use super::{fmt_f64, parse_f64, read_text, strip_header, write_text};
use crate::error::{CliError, Result};

pub const HEADER: &str = "swarmnav-map v1";

pub fn parse_map(text: &str, path: &Path) -> Result<MapSpec> {
    let body = strip_header(text, HEADER, path)?;
    let mut side = None;
    let mut obstacles = Vec::new();
    for (i, raw) in body.lines().enumerate() {
        let line = i + 2;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut words = content.split_whitespace();
        match words.next() {
            Some("domain_side") => {
                let v = words
                    .next()
                    .ok_or_else(|| CliError::parse(path, line, "domain_side needs a value"))?;
                if side.replace(parse_f64(v, path, line, "domain_side")?).is_some() {
                    return Err(CliError::parse(path, line, "domain_side given twice"));
                }
            }
            Some("obstacle") => {
                let coords = words
                    .map(|w| parse_f64(w, path, line, "obstacle coordinate"))
                    .collect::<Result<Vec<f64>>>()?;
                if coords.len() % 2 != 0 || coords.len() < 6 {
                    return Err(CliError::parse(path, line, "obstacle needs at least three x y pairs"));
                }
                obstacles.push(Polygon::new(coords.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect()));
            }
            Some(other) => return Err(CliError::parse(path, line, format!("unknown key {other:?}"))),
            None => {}
        }
    }
    let domain_side = side.ok_or_else(|| CliError::parse(path, 1, "missing domain_side"))?;
    let map = MapSpec { domain_side, obstacles };
    map.validate().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(map)
}

pub fn format_map(map: &MapSpec) -> String {
    let mut out = format!("{HEADER}\ndomain_side {}\n", fmt_f64(map.domain_side));
    for poly in &map.obstacles {
        out.push_str("obstacle");
        for v in &poly.vertices {
            out.push_str(&format!(" {} {}", fmt_f64(v.x), fmt_f64(v.y)));
        }
        out.push('\n');
    }
    out
}

pub fn load_map(path: &Path) -> Result<MapSpec> {
    parse_map(&read_text(path)?, path)
}

pub fn save_map(path: &Path, map: &MapSpec) -> Result<()> {
    write_text(path, &format_map(map))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let map = MapSpec {
            domain_side: 50.0,
            obstacles: vec![Polygon::rect(Vec2::new(10.0, 10.0), 5.5, 0.1 + 0.2)],
        };
        assert_eq!(parse_map(&format_map(&map), Path::new("m")).unwrap(), map);
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let e = parse_map("swarmnav-map v1\ndomain_side 50\nobstacle 1 2 3\n", Path::new("m")).unwrap_err();
        assert!(matches!(e, CliError::Parse { line: 3, .. }), "{e}");
        let e = parse_map("swarmnav-map v2\n", Path::new("m")).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        let e = parse_map("hello\n", Path::new("m")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
