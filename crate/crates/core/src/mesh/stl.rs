use std::io::Write;

use super::TriMesh;

/// ASCII STL dump with facet normals recomputed from the winding.
pub fn write_ascii_stl(mesh: &TriMesh, name: &str, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "solid {name}")?;
    for f in &mesh.faces {
        let [a, b, c] = f.map(|i| mesh.vertices[i]);
        let n = (b - a).cross(&(c - a));
        let n = if n.norm() > 0.0 { n.normalize() } else { n };
        writeln!(out, "  facet normal {:e} {:e} {:e}", n.x, n.y, n.z)?;
        writeln!(out, "    outer loop")?;
        for p in [a, b, c] {
            writeln!(out, "      vertex {:e} {:e} {:e}", p.x, p.y, p.z)?;
        }
        writeln!(out, "    endloop")?;
        writeln!(out, "  endfacet")?;
    }
    writeln!(out, "endsolid {name}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_icosphere;

    #[test]
    fn one_facet_per_face_with_outward_normals() {
        let m = make_icosphere(1, 2.0).unwrap();
        let mut buf = Vec::new();
        write_ascii_stl(&m, "lesion", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("solid lesion\n"));
        assert!(text.trim_end().ends_with("endsolid lesion"));
        let normals: Vec<[f64; 3]> = text
            .lines()
            .filter_map(|l| l.trim().strip_prefix("facet normal "))
            .map(|rest| {
                let v: Vec<f64> = rest.split_whitespace().map(|s| s.parse().unwrap()).collect();
                [v[0], v[1], v[2]]
            })
            .collect();
        assert_eq!(normals.len(), m.faces.len());
        for (n, f) in normals.iter().zip(&m.faces) {
            let c = (m.vertices[f[0]].coords + m.vertices[f[1]].coords + m.vertices[f[2]].coords) / 3.0;
            assert!(n[0] * c.x + n[1] * c.y + n[2] * c.z > 0.0);
        }
    }
}
