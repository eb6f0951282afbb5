use std::fmt::Write as _;

use nalgebra::Vector3;

use super::{Facet, FacetSoup, Point3, TriMesh};
use crate::error::{Error, Result};

const HEADER_LEN: usize = 80;
const RECORD_LEN: usize = 50;
const HEADER_TEXT: &[u8] = b"shapemanifold";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StlFormat {
    Ascii,
    Binary,
}

/// Parses an STL file, auto-detecting ASCII vs binary.
///
/// A file is treated as ASCII only when it starts with `solid` and its length
/// does not match the binary layout implied by the facet count at bytes
/// 80..84. Files that satisfy both readings are parsed as binary.
pub fn read_stl(bytes: &[u8]) -> Result<FacetSoup> {
    if bytes.is_empty() {
        return Err(Error::MalformedStl("empty input".into()));
    }
    let soup = if looks_ascii(bytes) {
        read_ascii(bytes)?
    } else {
        read_binary(bytes)?
    };
    if soup.facets.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok(soup)
}

fn declared_binary_len(bytes: &[u8]) -> Option<usize> {
    let count = bytes.get(HEADER_LEN..HEADER_LEN + 4)?;
    let count = u32::from_le_bytes(count.try_into().ok()?) as usize;
    Some(HEADER_LEN + 4 + RECORD_LEN * count)
}

fn looks_ascii(bytes: &[u8]) -> bool {
    let trimmed = bytes
        .iter()
        .position(|b| !b.is_ascii_whitespace())
        .map_or(&[][..], |i| &bytes[i..]);
    trimmed.starts_with(b"solid") && declared_binary_len(bytes) != Some(bytes.len())
}

fn read_binary(bytes: &[u8]) -> Result<FacetSoup> {
    let expected = declared_binary_len(bytes).ok_or_else(|| {
        Error::MalformedStl(format!(
            "{} bytes is shorter than the binary header",
            bytes.len()
        ))
    })?;
    if bytes.len() < expected {
        return Err(Error::MalformedStl(format!(
            "truncated binary STL: header declares {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let count = (expected - HEADER_LEN - 4) / RECORD_LEN;
    let mut facets = Vec::with_capacity(count);
    for (n, rec) in bytes[HEADER_LEN + 4..expected]
        .chunks_exact(RECORD_LEN)
        .enumerate()
    {
        let f = |i: usize| f32::from_le_bytes(rec[4 * i..4 * i + 4].try_into().unwrap()) as f64;
        let vals: [f64; 12] = std::array::from_fn(f);
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(Error::MalformedStl(format!(
                "non-finite value in facet {n}"
            )));
        }
        let p = |k: usize| Point3::new(vals[3 * k], vals[3 * k + 1], vals[3 * k + 2]);
        facets.push(Facet {
            normal: Vector3::new(vals[0], vals[1], vals[2]),
            vertices: [p(1), p(2), p(3)],
            attribute: u16::from_le_bytes([rec[48], rec[49]]),
        });
    }
    Ok(FacetSoup { facets })
}

struct Tokens<'a> {
    inner: std::str::SplitAsciiWhitespace<'a>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Option<&'a str> {
        self.inner.next()
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        match self.next() {
            Some(t) if t.eq_ignore_ascii_case(word) => Ok(()),
            Some(t) => Err(Error::MalformedStl(format!(
                "expected `{word}`, found `{t}`"
            ))),
            None => Err(Error::MalformedStl(format!(
                "expected `{word}`, found end of file"
            ))),
        }
    }

    fn number(&mut self) -> Result<f64> {
        let t = self
            .next()
            .ok_or_else(|| Error::MalformedStl("expected a number, found end of file".into()))?;
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::MalformedStl(format!("unparsable number `{t}`"))),
        }
    }

    fn vector(&mut self) -> Result<[f64; 3]> {
        Ok([self.number()?, self.number()?, self.number()?])
    }
}

fn read_ascii(bytes: &[u8]) -> Result<FacetSoup> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::MalformedStl(format!("ASCII STL is not valid UTF-8: {e}")))?;
    let mut tokens = Tokens {
        inner: text.split_ascii_whitespace(),
    };
    tokens.expect("solid")?;
    let mut facets = Vec::new();
    // The solid name may span several tokens; skip to the first facet.
    loop {
        match tokens.next() {
            Some(t) if t.eq_ignore_ascii_case("facet") => {
                tokens.expect("normal")?;
                let n = tokens.vector()?;
                tokens.expect("outer")?;
                tokens.expect("loop")?;
                let mut v = [Point3::origin(); 3];
                for p in &mut v {
                    tokens.expect("vertex")?;
                    let [x, y, z] = tokens.vector()?;
                    *p = Point3::new(x, y, z);
                }
                tokens.expect("endloop")?;
                tokens.expect("endfacet")?;
                facets.push(Facet {
                    normal: Vector3::new(n[0], n[1], n[2]),
                    vertices: v,
                    attribute: 0,
                });
            }
            Some(t) if t.eq_ignore_ascii_case("endsolid") => break,
            Some(_) if facets.is_empty() => {}
            Some(t) => return Err(Error::MalformedStl(format!("unexpected token `{t}`"))),
            None => {
                if facets.is_empty() {
                    break;
                }
                return Err(Error::MalformedStl("missing `endsolid`".into()));
            }
        }
    }
    Ok(FacetSoup { facets })
}

fn facet_normal(a: &Point3, b: &Point3, c: &Point3) -> Vector3<f64> {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if len > 0.0 && len.is_finite() {
        n / len
    } else {
        Vector3::zeros()
    }
}

/// Serializes a mesh. Normals are recomputed from the vertex winding.
pub fn write_stl(mesh: &TriMesh, format: StlFormat) -> Vec<u8> {
    let v = mesh.vertices();
    match format {
        StlFormat::Binary => {
            let mut out = Vec::with_capacity(HEADER_LEN + 4 + RECORD_LEN * mesh.facets().len());
            let mut header = [0u8; HEADER_LEN];
            header[..HEADER_TEXT.len()].copy_from_slice(HEADER_TEXT);
            out.extend_from_slice(&header);
            out.extend_from_slice(&(mesh.facets().len() as u32).to_le_bytes());
            for &[a, b, c] in mesh.facets() {
                let n = facet_normal(&v[a], &v[b], &v[c]);
                for x in n
                    .iter()
                    .chain(v[a].coords.iter())
                    .chain(v[b].coords.iter())
                    .chain(v[c].coords.iter())
                {
                    out.extend_from_slice(&(*x as f32).to_le_bytes());
                }
                out.extend_from_slice(&[0, 0]);
            }
            out
        }
        StlFormat::Ascii => {
            let mut s = String::from("solid shapemanifold\n");
            for &[a, b, c] in mesh.facets() {
                let n = facet_normal(&v[a], &v[b], &v[c]);
                let _ = writeln!(s, "  facet normal {} {} {}", n.x, n.y, n.z);
                s.push_str("    outer loop\n");
                for p in [v[a], v[b], v[c]] {
                    let _ = writeln!(s, "      vertex {} {} {}", p.x, p.y, p.z);
                }
                s.push_str("    endloop\n  endfacet\n");
            }
            s.push_str("endsolid shapemanifold\n");
            s.into_bytes()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{uv_sphere, weld};

    const ONE_FACET: &str = "solid test\n facet normal 0 0 1\n  outer loop\n   vertex 0 0 0\n   vertex 1 0 0\n   vertex 0 1 0\n  endloop\n endfacet\nendsolid test\n";

    fn triangle() -> TriMesh {
        TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn ascii_single_facet() {
        let soup = read_stl(ONE_FACET.as_bytes()).unwrap();
        assert_eq!(soup.facets.len(), 1);
        let f = &soup.facets[0];
        assert_eq!(f.normal, Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(f.vertices[1], Point3::new(1.0, 0.0, 0.0));
        assert_eq!(f.vertices[2], Point3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn binary_single_facet_is_134_bytes() {
        let bytes = write_stl(&triangle(), StlFormat::Binary);
        assert_eq!(bytes.len(), 134);
        assert_eq!(&bytes[..13], b"shapemanifold");
        let soup = read_stl(&bytes).unwrap();
        assert_eq!(soup.facets.len(), 1);
        assert_eq!(soup.facets[0].normal, Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn truncated_binary_is_malformed() {
        let mut bytes = write_stl(&triangle(), StlFormat::Binary);
        bytes[80..84].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(read_stl(&bytes), Err(Error::MalformedStl(_))));
    }

    #[test]
    fn binary_starting_with_solid_is_read_as_binary() {
        let mut bytes = write_stl(&triangle(), StlFormat::Binary);
        bytes[..5].copy_from_slice(b"solid");
        let soup = read_stl(&bytes).unwrap();
        assert_eq!(soup.facets.len(), 1);
    }

    #[test]
    fn bad_ascii_token_is_malformed() {
        let text = ONE_FACET.replace("vertex 1 0 0", "vertex 1 zero 0");
        assert!(matches!(
            read_stl(text.as_bytes()),
            Err(Error::MalformedStl(_))
        ));
    }

    #[test]
    fn zero_facets_is_empty_mesh() {
        let mut bytes = vec![0u8; 84];
        bytes[..4].copy_from_slice(b"mesh");
        assert!(matches!(read_stl(&bytes), Err(Error::EmptyMesh)));
        assert!(matches!(
            read_stl(b"solid x\nendsolid x\n"),
            Err(Error::EmptyMesh)
        ));
        assert!(matches!(read_stl(b""), Err(Error::MalformedStl(_))));
    }

    #[test]
    fn degenerate_facet_gets_zero_normal() {
        let m = TriMesh::new(
            vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)],
            vec![[0, 1, 1]],
            0.0,
        )
        .unwrap();
        let soup = read_stl(&write_stl(&m, StlFormat::Binary)).unwrap();
        assert_eq!(soup.facets[0].normal, Vector3::zeros());
        let soup = read_stl(&write_stl(&m, StlFormat::Ascii)).unwrap();
        assert_eq!(soup.facets[0].normal, Vector3::zeros());
    }

    #[test]
    fn binary_round_trip_matches_up_to_f32() {
        let m = uv_sphere(Point3::new(0.3, -1.0, 2.0), [1.5, 1.0, 0.7], 8, 12).unwrap();
        let back = weld(
            &read_stl(&write_stl(&m, StlFormat::Binary)).unwrap(),
            m.weld_tolerance(),
        )
        .unwrap();
        assert_eq!(back.facets(), m.facets());
        for (a, b) in back.vertices().iter().zip(m.vertices()) {
            assert!((a - b).amax() <= 1e-6 * b.coords.amax().max(1.0));
        }
    }

    #[test]
    fn ascii_round_trip_is_exact() {
        let m = uv_sphere(Point3::new(0.3, -1.0, 2.0), [1.5, 1.0, 0.7], 5, 7).unwrap();
        let back = weld(
            &read_stl(&write_stl(&m, StlFormat::Ascii)).unwrap(),
            m.weld_tolerance(),
        )
        .unwrap();
        assert_eq!(back, m);
    }
}
