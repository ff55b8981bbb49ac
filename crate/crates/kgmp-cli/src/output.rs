//! Field dumps, JSON summaries, and SVG heatmaps.

use kgmp::grid::{CylGrid, ScalarField};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Write a field in the `CYLFIELD v1` format: header line, grid line
/// `Nr Nz R L`, then `Nr·Nz` decimal floats in z-major order, one per line.
/// Floats use the shortest round-trip representation, so dumps are bit-exact.
pub fn write_field(path: &Path, g: &CylGrid, f: &ScalarField) -> std::io::Result<()> {
    let mut text = String::with_capacity(f.len() * 20 + 64);
    writeln!(text, "CYLFIELD v1").unwrap();
    writeln!(text, "{} {} {} {}", g.nr(), g.nz(), g.r_max(), g.z_half()).unwrap();
    for v in f.as_slice() {
        writeln!(text, "{v}").unwrap();
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())
}

/// Read a `CYLFIELD v1` dump back (round-trip checks).
#[cfg_attr(not(test), allow(dead_code))]
pub fn read_field(path: &Path) -> Result<(CylGrid, ScalarField), String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    match lines.next() {
        Some("CYLFIELD v1") => {}
        other => return Err(format!("bad magic {other:?}")),
    }
    let header = lines.next().ok_or("missing grid line")?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 {
        return Err("grid line needs Nr Nz R L".into());
    }
    let nr: usize = parts[0].parse().map_err(|e| format!("Nr: {e}"))?;
    let nz: usize = parts[1].parse().map_err(|e| format!("Nz: {e}"))?;
    let r: f64 = parts[2].parse().map_err(|e| format!("R: {e}"))?;
    let l: f64 = parts[3].parse().map_err(|e| format!("L: {e}"))?;
    let g = kgmp::grid::build_grid(nr, nz, r, l).map_err(|e| e.to_string())?;
    let mut data = Vec::with_capacity(nr * nz);
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        data.push(line.trim().parse::<f64>().map_err(|e| format!("value: {e}"))?);
    }
    let f = ScalarField::from_vec(&g, data).map_err(|e| e.to_string())?;
    Ok((g, f))
}

/// Static SVG heatmap of a field (diverging blue-white-red ramp around 0).
pub fn write_svg(path: &Path, g: &CylGrid, f: &ScalarField, title: &str) -> std::io::Result<()> {
    let cell = 4usize;
    let (nr, nz) = (g.nr(), g.nz());
    let width = nr * cell;
    let height = nz * cell;
    let amp = f.max_abs().max(1e-300);
    let mut svg = String::with_capacity(nr * nz * 60);
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {width} {height}\">",
        width,
        height + 16
    )
    .unwrap();
    writeln!(svg, "<title>{title}</title>").unwrap();
    for j in 0..nz {
        for i in 0..nr {
            let v = f.get(i, j) / amp;
            let (r, g_, b) = if v >= 0.0 {
                let t = v.min(1.0);
                (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
            } else {
                let t = (-v).min(1.0);
                (255.0 * (1.0 - t), 255.0 * (1.0 - t), 255.0)
            };
            // y flipped so z increases upward.
            writeln!(
                svg,
                "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({},{},{})\"/>",
                i * cell,
                (nz - 1 - j) * cell,
                r as u8,
                g_ as u8,
                b as u8
            )
            .unwrap();
        }
    }
    writeln!(svg, "</svg>").unwrap();
    std::fs::write(path, svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use kgmp::grid::build_grid;

    #[test]
    fn field_dump_round_trips_bit_exact() {
        let g = build_grid(6, 8, 1.5, 2.5).unwrap();
        let f = ScalarField::from_fn(&g, |r, z| (r * 17.3).sin() * (z * 3.1).cos() / 3.0);
        let dir = std::env::temp_dir().join("kgmp_field_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("u.field");
        write_field(&path, &g, &f).unwrap();
        let (g2, f2) = read_field(&path).unwrap();
        assert_eq!(g2.nr(), 6);
        assert_eq!(g2.nz(), 8);
        for (a, b) in f.as_slice().iter().zip(f2.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
