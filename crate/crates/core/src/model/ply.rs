use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use super::{Gaussian, GaussianScene, SH_REST_LEN};
use crate::error::Error;

/// Vertex property order written by [`write_ply`], matching the reference 3DGS exporter.
pub const PLY_PROPERTIES: [&str; 62] = [
    "x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2", "f_rest_0", "f_rest_1",
    "f_rest_2", "f_rest_3", "f_rest_4", "f_rest_5", "f_rest_6", "f_rest_7", "f_rest_8",
    "f_rest_9", "f_rest_10", "f_rest_11", "f_rest_12", "f_rest_13", "f_rest_14", "f_rest_15",
    "f_rest_16", "f_rest_17", "f_rest_18", "f_rest_19", "f_rest_20", "f_rest_21", "f_rest_22",
    "f_rest_23", "f_rest_24", "f_rest_25", "f_rest_26", "f_rest_27", "f_rest_28", "f_rest_29",
    "f_rest_30", "f_rest_31", "f_rest_32", "f_rest_33", "f_rest_34", "f_rest_35", "f_rest_36",
    "f_rest_37", "f_rest_38", "f_rest_39", "f_rest_40", "f_rest_41", "f_rest_42", "f_rest_43",
    "f_rest_44", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
];

const NORMAL_SLOTS: [usize; 3] = [3, 4, 5];
const REST_SLOTS: std::ops::Range<usize> = 9..9 + SH_REST_LEN;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlyError {
    #[error("malformed PLY header at byte {offset}: {msg}")]
    Header { offset: usize, msg: String },
    #[error("missing required vertex property `{name}` (header ends at byte {offset})")]
    MissingProperty { name: &'static str, offset: usize },
    #[error("truncated payload at byte {offset}: expected {expected} vertices, got {got}")]
    Truncated {
        offset: usize,
        expected: usize,
        got: usize,
    },
    #[error("{extra} trailing bytes after payload at byte {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("PLY file declares zero vertices")]
    Empty,
}

fn header_err(offset: usize, msg: impl Into<String>) -> PlyError {
    PlyError::Header {
        offset,
        msg: msg.into(),
    }
}

struct Layout {
    vertex_count: usize,
    /// For each stored property, its slot in [`PLY_PROPERTIES`].
    slots: Vec<usize>,
    payload_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Layout, PlyError> {
    let mut offset = 0usize;
    let next_line = |offset: &mut usize| -> Result<(usize, String), PlyError> {
        let start = *offset;
        let rest = &bytes[start..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| header_err(start, "unterminated header line"))?;
        *offset = start + end + 1;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| header_err(start, "non-UTF-8 header line"))?;
        Ok((start, line.trim_end_matches('\r').to_string()))
    };

    let (at, magic) = next_line(&mut offset)?;
    if magic != "ply" {
        return Err(header_err(at, "missing `ply` magic"));
    }

    let mut vertex_count = None;
    let mut slots: Vec<usize> = Vec::new();
    let mut in_vertex = false;
    let mut format_seen = false;
    loop {
        let (at, line) = next_line(&mut offset)?;
        let mut words = line.split_whitespace();
        match words.next() {
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                let fmt = words.next().unwrap_or_default();
                if fmt != "binary_little_endian" {
                    return Err(header_err(at, format!("unsupported format `{fmt}`")));
                }
                format_seen = true;
            }
            Some("element") => {
                let name = words.next().unwrap_or_default();
                let count: usize = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| header_err(at, "bad element count"))?;
                if name != "vertex" {
                    return Err(header_err(at, format!("unsupported element `{name}`")));
                }
                if vertex_count.is_some() {
                    return Err(header_err(at, "duplicate vertex element"));
                }
                vertex_count = Some(count);
                in_vertex = true;
            }
            Some("property") => {
                if !in_vertex {
                    return Err(header_err(at, "property outside vertex element"));
                }
                let ty = words.next().unwrap_or_default();
                if ty == "list" {
                    return Err(header_err(at, "list properties are not supported"));
                }
                if ty != "float" && ty != "float32" {
                    return Err(header_err(at, format!("property type `{ty}` is not float32")));
                }
                let name = words
                    .next()
                    .ok_or_else(|| header_err(at, "property without name"))?;
                let slot = PLY_PROPERTIES
                    .iter()
                    .position(|&p| p == name)
                    .ok_or_else(|| header_err(at, format!("unknown property `{name}`")))?;
                if slots.contains(&slot) {
                    return Err(header_err(at, format!("duplicate property `{name}`")));
                }
                slots.push(slot);
            }
            Some(other) => return Err(header_err(at, format!("unexpected keyword `{other}`"))),
        }
    }
    if !format_seen {
        return Err(header_err(offset, "missing format line"));
    }
    let vertex_count = vertex_count.ok_or_else(|| header_err(offset, "no vertex element"))?;
    for (slot, &name) in PLY_PROPERTIES.iter().enumerate() {
        let optional = NORMAL_SLOTS.contains(&slot) || REST_SLOTS.contains(&slot);
        if !optional && !slots.contains(&slot) {
            return Err(PlyError::MissingProperty { name, offset });
        }
    }
    Ok(Layout {
        vertex_count,
        slots,
        payload_offset: offset,
    })
}

/// Decodes a binary little-endian 3DGS PLY.
///
/// Normals and `f_rest_*` may be absent (they read as zero); every other property of
/// [`PLY_PROPERTIES`] is required. Properties may appear in any order.
pub fn read_ply(bytes: &[u8]) -> Result<GaussianScene, PlyError> {
    let layout = parse_header(bytes)?;
    if layout.vertex_count == 0 {
        return Err(PlyError::Empty);
    }
    let stride = layout.slots.len() * 4;
    let payload = &bytes[layout.payload_offset..];
    let needed = layout.vertex_count * stride;
    if payload.len() < needed {
        let got = payload.len() / stride;
        return Err(PlyError::Truncated {
            offset: layout.payload_offset + got * stride,
            expected: layout.vertex_count,
            got,
        });
    }
    if payload.len() > needed {
        return Err(PlyError::TrailingBytes {
            offset: layout.payload_offset + needed,
            extra: payload.len() - needed,
        });
    }

    let mut gaussians = Vec::with_capacity(layout.vertex_count);
    let mut row = [0f32; 62];
    for chunk in payload.chunks_exact(stride) {
        row.fill(0.0);
        for (&slot, v) in layout.slots.iter().zip(chunk.chunks_exact(4)) {
            row[slot] = f32::from_le_bytes([v[0], v[1], v[2], v[3]]);
        }
        gaussians.push(from_row(&row));
    }
    Ok(GaussianScene::new(gaussians).expect("vertex count checked nonzero"))
}

fn from_row(row: &[f32; 62]) -> Gaussian {
    let mut sh_rest = [0f32; SH_REST_LEN];
    sh_rest.copy_from_slice(&row[REST_SLOTS]);
    Gaussian {
        position: [row[0], row[1], row[2]],
        normal: [row[3], row[4], row[5]],
        sh_dc: [row[6], row[7], row[8]],
        sh_rest,
        opacity_logit: row[54],
        scale: [row[55], row[56], row[57]],
        rotation: [row[58], row[59], row[60], row[61]],
    }
}

fn to_row(g: &Gaussian) -> [f32; 62] {
    let mut row = [0f32; 62];
    row[0..3].copy_from_slice(&g.position);
    row[3..6].copy_from_slice(&g.normal);
    row[6..9].copy_from_slice(&g.sh_dc);
    row[REST_SLOTS].copy_from_slice(&g.sh_rest);
    row[54] = g.opacity_logit;
    row[55..58].copy_from_slice(&g.scale);
    row[58..62].copy_from_slice(&g.rotation);
    row
}

/// Encodes a scene with the canonical header and [`PLY_PROPERTIES`] order.
pub fn write_ply(scene: &GaussianScene) -> Vec<u8> {
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n",
        scene.len()
    );
    for name in PLY_PROPERTIES {
        header.push_str("property float ");
        header.push_str(name);
        header.push('\n');
    }
    header.push_str("end_header\n");

    let mut out = Vec::with_capacity(header.len() + scene.len() * 62 * 4);
    out.extend_from_slice(header.as_bytes());
    for g in scene.gaussians() {
        for v in to_row(g) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<GaussianScene, Error> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(read_ply(&bytes)?)
}

pub fn save_ply(scene: &GaussianScene, path: impl AsRef<Path>) -> Result<(), Error> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&write_ply(scene))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(count: usize, props: &[&str]) -> Vec<u8> {
        let mut h = format!("ply\nformat binary_little_endian 1.0\nelement vertex {count}\n");
        for p in props {
            h.push_str(&format!("property float {p}\n"));
        }
        h.push_str("end_header\n");
        h.into_bytes()
    }

    #[test]
    fn single_zero_vertex() {
        let mut bytes = header(1, &PLY_PROPERTIES);
        bytes.extend(std::iter::repeat_n(0u8, 62 * 4));
        let scene = read_ply(&bytes).unwrap();
        assert_eq!(scene.len(), 1);
        assert_eq!(scene.gaussians()[0].opacity(), 0.5);
        // zero payload round-trips to the same bytes since the header is canonical
        assert_eq!(write_ply(&scene), bytes);
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let mut bytes = header(10, &PLY_PROPERTIES);
        let start = bytes.len();
        bytes.extend(std::iter::repeat_n(0u8, 9 * 62 * 4));
        assert_eq!(
            read_ply(&bytes).unwrap_err(),
            PlyError::Truncated {
                offset: start + 9 * 248,
                expected: 10,
                got: 9
            }
        );
    }

    #[test]
    fn missing_property() {
        let props: Vec<&str> = PLY_PROPERTIES.iter().copied().filter(|&p| p != "opacity").collect();
        let mut bytes = header(1, &props);
        bytes.extend(std::iter::repeat_n(0u8, props.len() * 4));
        assert!(matches!(
            read_ply(&bytes).unwrap_err(),
            PlyError::MissingProperty { name: "opacity", .. }
        ));
    }

    #[test]
    fn optional_properties_default_to_zero() {
        let props = [
            "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1",
            "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
        ];
        let mut bytes = header(1, &props);
        for i in 0..props.len() {
            bytes.extend_from_slice(&(i as f32 + 1.0).to_le_bytes());
        }
        let g = read_ply(&bytes).unwrap().gaussians()[0];
        assert_eq!(g.position, [1.0, 2.0, 3.0]);
        assert_eq!(g.normal, [0.0; 3]);
        assert_eq!(g.sh_rest, [0.0; SH_REST_LEN]);
        assert_eq!(g.opacity_logit, 7.0);
        assert_eq!(g.rotation, [11.0, 12.0, 13.0, 14.0]);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(read_ply(b"plx\n"), Err(PlyError::Header { offset: 0, .. })));
        let bytes = b"ply\nformat ascii 1.0\nend_header\n";
        assert!(matches!(read_ply(bytes), Err(PlyError::Header { offset: 4, .. })));
        let mut bytes = header(1, &PLY_PROPERTIES);
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(read_ply(&bytes), Err(PlyError::Header { .. })));
        let bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty uchar red\nend_header\n";
        assert!(matches!(read_ply(bytes), Err(PlyError::Header { offset: 53, .. })));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = header(1, &PLY_PROPERTIES);
        bytes.extend(std::iter::repeat_n(0u8, 62 * 4 + 2));
        assert!(matches!(read_ply(&bytes), Err(PlyError::TrailingBytes { extra: 2, .. })));
    }

    #[test]
    fn nan_payload_bits_survive() {
        let mut g = Gaussian::default();
        g.sh_rest[7] = f32::from_bits(0x7fc0_1234);
        g.scale[1] = -0.0;
        let scene = GaussianScene::new(vec![g]).unwrap();
        let back = read_ply(&write_ply(&scene)).unwrap();
        assert_eq!(back.gaussians()[0].sh_rest[7].to_bits(), 0x7fc0_1234);
        assert_eq!(back.gaussians()[0].scale[1].to_bits(), (-0.0f32).to_bits());
    }
}
