//! OBJ loading checked against `tobj` as an independent parser.

use std::fs;

use ddf::mesh::{load_mesh, primitives, write_obj, TriangleMesh, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tobj_triangles(path: &std::path::Path) -> Vec<[[f64; 3]; 3]> {
    let options = tobj::LoadOptions {
        triangulate: true,
        single_index: true,
        ..Default::default()
    };
    let (models, _) = tobj::load_obj(path, &options).unwrap();
    let mut out = Vec::new();
    for model in models {
        let m = model.mesh;
        let vertex = |i: u32| {
            let i = i as usize * 3;
            [m.positions[i] as f64, m.positions[i + 1] as f64, m.positions[i + 2] as f64]
        };
        for f in m.indices.chunks(3) {
            out.push([vertex(f[0]), vertex(f[1]), vertex(f[2])]);
        }
    }
    out
}

fn our_triangles(mesh: &TriangleMesh) -> Vec<[[f64; 3]; 3]> {
    (0..mesh.faces.len())
        .map(|f| mesh.triangle(f).map(|v: Vec3| [v.x, v.y, v.z]))
        .collect()
}

#[test]
fn quads_and_negative_indices_match_tobj() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mixed.obj");
    // Eighths are exact in f32, so the comparison can be exact.
    let text = "\
# unit cube with two quads, a triangle strip and relative indices
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
vn 0 0 1
vt 0.5 0.5
f 1 2 3 4
f 5/1/1 6/1/1 7/1/1 8/1/1
f -8 -7 -3
f 2//1 3//1 7//1 6//1
v 0.125 -0.375 2.5
f -1 1 2
";
    fs::write(&path, text).unwrap();
    let ours = our_triangles(&load_mesh(&path).unwrap());
    assert_eq!(ours, tobj_triangles(&path));
    assert_eq!(ours.len(), 2 + 2 + 1 + 2 + 1);
}

#[test]
fn written_meshes_read_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mesh = primitives::icosphere(2);
    for v in &mut mesh.vertices {
        // Snap to a grid of eighths so tobj's f32 positions stay exact.
        *v = (*v * 8.0 + Vec3::new(rng.gen_range(-4.0..4.0), 0.0, 0.0)).map(f64::round) / 8.0;
    }
    let path = dir.path().join("snapped.obj");
    write_obj(&mesh, &path).unwrap();
    let back = load_mesh(&path).unwrap();
    assert_eq!(back.vertices, mesh.vertices);
    assert_eq!(back.faces, mesh.faces);
    assert_eq!(our_triangles(&back), tobj_triangles(&path));
}
