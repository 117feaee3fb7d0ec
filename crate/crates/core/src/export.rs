//! Writers for fields, paths and belts.

use std::io::{self, Write};

use crate::band::NarrowBand;
use crate::geometry::Point3;
use crate::paths::SurfacePath;

/// Band field as CSV `i,j,k,d,v`.
pub fn write_field_csv<W: Write>(mut w: W, band: &NarrowBand, values: &[f64]) -> io::Result<()> {
    writeln!(w, "i,j,k,d,v")?;
    for (n, v) in band.band_nodes().iter().zip(values) {
        writeln!(
            w,
            "{},{},{},{:.12e},{:.12e}",
            n.index[0], n.index[1], n.index[2], n.rec.dist, v
        )?;
    }
    Ok(())
}

/// Legacy ASCII VTK structured points over the full grid; nodes outside the
/// band hold NaN.
pub fn write_field_vtk<W: Write>(mut w: W, band: &NarrowBand, values: &[f64]) -> io::Result<()> {
    let g = band.grid();
    let mut full = vec![f64::NAN; g.node_count()];
    for (n, v) in band.band_nodes().iter().zip(values) {
        full[g.linear([n.index[0] as i64, n.index[1] as i64, n.index[2] as i64])] = *v;
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "surfhjb field")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} {}", g.dims[0], g.dims[1], g.dims[2])?;
    writeln!(w, "ORIGIN {} {} {}", g.origin.x, g.origin.y, g.origin.z)?;
    writeln!(w, "SPACING {} {} {}", g.h, g.h, g.h)?;
    writeln!(w, "POINT_DATA {}", g.node_count())?;
    writeln!(w, "SCALARS v double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    // VTK orders points with x fastest.
    for k in 0..g.dims[2] as i64 {
        for j in 0..g.dims[1] as i64 {
            for i in 0..g.dims[0] as i64 {
                let v = full[g.linear([i, j, k])];
                if v.is_nan() {
                    writeln!(w, "nan")?;
                } else {
                    writeln!(w, "{v:.9e}")?;
                }
            }
        }
    }
    Ok(())
}

/// Polyline as CSV `s,x,y,z`.
pub fn write_path_csv<W: Write>(mut w: W, path: &SurfacePath) -> io::Result<()> {
    writeln!(w, "s,x,y,z")?;
    for (p, s) in path.vertices.iter().zip(&path.arc) {
        writeln!(w, "{s:.12e},{:.12e},{:.12e},{:.12e}", p.x, p.y, p.z)?;
    }
    Ok(())
}

/// Paths as an ASCII PLY edge set.
pub fn write_paths_ply<W: Write>(mut w: W, paths: &[SurfacePath]) -> io::Result<()> {
    let nv: usize = paths.iter().map(|p| p.vertices.len()).sum();
    let ne: usize = paths
        .iter()
        .map(|p| p.vertices.len().saturating_sub(1))
        .sum();
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {nv}")?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    writeln!(w, "element edge {ne}")?;
    writeln!(w, "property int vertex1")?;
    writeln!(w, "property int vertex2")?;
    writeln!(w, "end_header")?;
    for p in paths.iter().flat_map(|p| &p.vertices) {
        writeln!(w, "{:.12e} {:.12e} {:.12e}", p.x, p.y, p.z)?;
    }
    let mut base = 0;
    for p in paths {
        for k in 1..p.vertices.len() {
            writeln!(w, "{} {}", base + k - 1, base + k)?;
        }
        base += p.vertices.len();
    }
    Ok(())
}

/// Belt labels as CSV `x,y,z,belt`; unassigned points get `-1`.
pub fn write_belts_csv<W: Write>(
    mut w: W,
    points: &[Point3],
    labels: &[Option<usize>],
) -> io::Result<()> {
    writeln!(w, "x,y,z,belt")?;
    for (p, l) in points.iter().zip(labels) {
        let l = l.map_or(-1, |x| x as i64);
        writeln!(w, "{:.12e},{:.12e},{:.12e},{l}", p.x, p.y, p.z)?;
    }
    Ok(())
}
