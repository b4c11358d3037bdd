//! Plain-text persistence of optimized layouts.
//!
//! ```text
//! layout v1
//! config_hash <hex or ->
//! surfaces <B>
//! surface <i> pos <x> <y> <z> rot <α> <β> <γ> normal <nx> <ny> <nz> antennas <n>
//! antenna <x> <y> <z>        (n lines of local offsets)
//! ```
//!
//! Numbers use the shortest representation that parses back to the same
//! `f64`, so save → load → save is byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, ArrayLayout, LocalArray, Surface, SurfacePose, Vec3};

const MAGIC: &str = "layout v1";

pub fn format_layout(layout: &ArrayLayout, config_hash: Option<&str>) -> String {
    let mut out = String::new();
    let v = |v: &Vec3| format!("{} {} {}", v[0], v[1], v[2]);
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "config_hash {}", config_hash.unwrap_or("-")).unwrap();
    writeln!(out, "surfaces {}", layout.num_surfaces()).unwrap();
    for (i, s) in layout.surfaces().iter().enumerate() {
        writeln!(
            out,
            "surface {i} pos {} rot {} normal {} antennas {}",
            v(&s.pose.position),
            v(&s.pose.rotation),
            v(&s.local.normal()),
            s.local.len()
        )
        .unwrap();
        for o in s.local.offsets() {
            writeln!(out, "antenna {}", v(o)).unwrap();
        }
    }
    out
}

pub fn save_layout(path: &Path, layout: &ArrayLayout, config_hash: Option<&str>) -> Result<()> {
    std::fs::write(path, format_layout(layout, config_hash)).map_err(|e| Error::io(path, e))
}

/// A parsed layout file.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutFile {
    pub layout: ArrayLayout,
    pub config_hash: Option<String>,
}

struct Lines<'a> {
    path: &'a Path,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    /// Next line, split into whitespace tokens, with its 1-based number.
    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        match self.iter.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l.split_whitespace().collect()))
            }
            None => Err(self.err(self.last + 1, format!("expected {what}, found end of file"))),
        }
    }
}

fn expect_key(lines: &Lines, line: usize, tokens: &[&str], at: usize, key: &str) -> Result<()> {
    match tokens.get(at) {
        Some(t) if *t == key => Ok(()),
        found => Err(lines.err(
            line,
            format!("expected '{key}', found {:?}", found.copied().unwrap_or("")),
        )),
    }
}

fn number<T: std::str::FromStr>(lines: &Lines, line: usize, tokens: &[&str], at: usize) -> Result<T> {
    let t = tokens.get(at).ok_or_else(|| lines.err(line, "line ends early"))?;
    t.parse()
        .map_err(|_| lines.err(line, format!("cannot parse '{t}' as a number")))
}

fn vec3(lines: &Lines, line: usize, tokens: &[&str], at: usize) -> Result<Vec3> {
    let v = Vec3::new(
        number(lines, line, tokens, at)?,
        number(lines, line, tokens, at + 1)?,
        number(lines, line, tokens, at + 2)?,
    );
    if v.iter().all(|x: &f64| x.is_finite()) {
        Ok(v)
    } else {
        Err(lines.err(line, "non-finite value"))
    }
}

pub fn parse_layout(path: &Path, text: &str) -> Result<LayoutFile> {
    let mut lines = Lines {
        path,
        iter: text.lines().enumerate(),
        last: 0,
    };
    let (n, header) = lines.next("header")?;
    if header.join(" ") != MAGIC {
        return Err(lines.err(n, format!("expected '{MAGIC}' header")));
    }
    let (n, t) = lines.next("config_hash line")?;
    expect_key(&lines, n, &t, 0, "config_hash")?;
    let config_hash = match t.get(1) {
        Some(&"-") => None,
        Some(h) => Some(h.to_string()),
        None => return Err(lines.err(n, "missing config hash")),
    };
    let (n, t) = lines.next("surface count")?;
    expect_key(&lines, n, &t, 0, "surfaces")?;
    let count: usize = number(&lines, n, &t, 1)?;

    let mut surfaces = Vec::with_capacity(count);
    for i in 0..count {
        let (n, t) = lines.next(&format!("surface {i} record"))?;
        let surface_line = n;
        expect_key(&lines, n, &t, 0, "surface")?;
        let index: usize = number(&lines, n, &t, 1)?;
        if index != i {
            return Err(lines.err(n, format!("expected surface {i}, found surface {index}")));
        }
        expect_key(&lines, n, &t, 2, "pos")?;
        let position = vec3(&lines, n, &t, 3)?;
        expect_key(&lines, n, &t, 6, "rot")?;
        let raw = vec3(&lines, n, &t, 7)?;
        expect_key(&lines, n, &t, 10, "normal")?;
        let normal = vec3(&lines, n, &t, 11)?;
        expect_key(&lines, n, &t, 14, "antennas")?;
        let antennas: usize = number(&lines, n, &t, 15)?;
        if t.len() != 16 {
            return Err(lines.err(n, "trailing tokens after antenna count"));
        }
        let rotation = raw.map(wrap_angle);
        if rotation != raw {
            log::warn!(
                "{}:{n}: rotation {:?} canonicalized to [0, 2π): {:?}",
                path.display(),
                raw.as_slice(),
                rotation.as_slice()
            );
        }
        let mut offsets = Vec::with_capacity(antennas);
        for _ in 0..antennas {
            let (n, t) = lines.next(&format!("antenna line of surface {i}"))?;
            expect_key(&lines, n, &t, 0, "antenna")?;
            if t.len() != 4 {
                return Err(lines.err(n, "antenna line needs three coordinates"));
            }
            offsets.push(vec3(&lines, n, &t, 1)?);
        }
        let local = LocalArray::new(offsets, normal).map_err(|e| lines.err(surface_line, e.to_string()))?;
        surfaces.push(Surface {
            pose: SurfacePose::new(position, rotation),
            local,
        });
    }
    if let Some((i, l)) = lines.iter.find(|(_, l)| !l.trim().is_empty()) {
        return Err(lines.err(i + 1, format!("unexpected content after the last surface: '{l}'")));
    }
    let layout = ArrayLayout::new(surfaces).map_err(|e| lines.err(3, e.to_string()))?;
    Ok(LayoutFile { layout, config_hash })
}

pub fn load_layout(path: &Path) -> Result<LayoutFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_layout(path, &text)
}

/// Loads a layout and rejects it unless it was produced by `expected_hash`.
pub fn load_layout_for(path: &Path, expected_hash: &str) -> Result<ArrayLayout> {
    let file = load_layout(path)?;
    match file.config_hash.as_deref() {
        Some(h) if h == expected_hash => Ok(file.layout),
        found => Err(Error::HashMismatch {
            expected: expected_hash.to_string(),
            found: found.unwrap_or("-").to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ArrayLayout {
        let local = LocalArray::ula(2, 0.0625).unwrap();
        let poses = [
            SurfacePose::new(Vec3::new(0.1, -0.2, 0.3), Vec3::new(0.1, 2.0, 6.2)),
            SurfacePose::new(Vec3::new(1.0 / 3.0, 0.0, -0.25), Vec3::new(0.0, 0.0, 0.7)),
        ];
        ArrayLayout::uniform(&poses, &local).unwrap()
    }

    fn p() -> &'static Path {
        Path::new("mem.layout")
    }

    #[test]
    fn round_trip_is_exact() {
        let text = format_layout(&sample(), Some("abc"));
        let back = parse_layout(p(), &text).unwrap();
        assert_eq!(back.layout, sample());
        assert_eq!(back.config_hash.as_deref(), Some("abc"));
        assert_eq!(format_layout(&back.layout, Some("abc")), text);
    }

    #[test]
    fn out_of_range_angle_is_wrapped() {
        let text = format_layout(&sample(), None).replace("rot 0.1 2 6.2", "rot 0.1 2 7");
        let back = parse_layout(p(), &text).unwrap();
        let g = back.layout.surfaces()[0].pose.rotation[2];
        assert!((g - (7.0 - std::f64::consts::TAU)).abs() < 1e-15);
        assert_eq!(back.config_hash, None);
    }

    #[test]
    fn truncated_file_names_the_line() {
        let text = format_layout(&sample(), None);
        let cut: Vec<&str> = text.lines().take(6).collect();
        match parse_layout(p(), &cut.join("\n")) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 7);
                assert!(message.contains("surface 1"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_are_rejected() {
        let text = format_layout(&sample(), None);
        for (from, to, line) in [
            ("layout v1", "layout v2", 1),
            ("surfaces 2", "surfaces two", 3),
            ("pos 0.1", "pos x", 4),
            (
                "normal 1 0 0 antennas 2\nantenna 0 -0.03125",
                "normal 1 0 0 antennas 2\nantenna 0 nan",
                5,
            ),
            ("normal 1 0 0", "normal 2 0 0", 4),
        ] {
            let bad = text.replacen(from, to, 1);
            match parse_layout(p(), &bad) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{to}"),
                other => panic!("{to}: {other:?}"),
            }
        }
        let extra = format!("{text}surface 2 pos 0 0 0\n");
        assert!(parse_layout(p(), &extra).is_err());
    }

    #[test]
    fn hash_checked_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.layout");
        save_layout(&path, &sample(), Some("feed")).unwrap();
        assert_eq!(load_layout_for(&path, "feed").unwrap(), sample());
        assert!(matches!(
            load_layout_for(&path, "beef"),
            Err(Error::HashMismatch { .. })
        ));
    }
}
