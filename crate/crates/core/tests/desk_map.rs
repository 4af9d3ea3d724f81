//! The bundled desk map, checked against a separate reading of the file.
#![allow(clippy::needless_range_loop)]

use fusion_pollination::landscape::{derive_patches, parse_map, CellKind, PatchParams, DESK_MAP};

/// Rows of symbols, skipping `#` header lines.
fn raw_rows() -> Vec<Vec<u8>> {
    DESK_MAP
        .lines()
        .filter(|l| !l.starts_with("# "))
        .filter(|l| !l.is_empty())
        .map(|l| l.as_bytes().to_vec())
        .collect()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Union-find over 4-neighbours with the given symbol.
fn component_sizes(rows: &[Vec<u8>], symbol: u8) -> Vec<usize> {
    let h = rows.len();
    let w = rows[0].len();
    let mut parent: Vec<usize> = (0..w * h).collect();
    for r in 0..h {
        for c in 0..w {
            if rows[r][c] != symbol {
                continue;
            }
            if c + 1 < w && rows[r][c + 1] == symbol {
                let (a, b) = (find(&mut parent, r * w + c), find(&mut parent, r * w + c + 1));
                parent[a] = b;
            }
            if r + 1 < h && rows[r + 1][c] == symbol {
                let (a, b) = (find(&mut parent, r * w + c), find(&mut parent, (r + 1) * w + c));
                parent[a] = b;
            }
        }
    }
    let mut sizes = std::collections::BTreeMap::new();
    for r in 0..h {
        for c in 0..w {
            if rows[r][c] == symbol {
                *sizes.entry(find(&mut parent, r * w + c)).or_insert(0usize) += 1;
            }
        }
    }
    let mut v: Vec<usize> = sizes.into_values().collect();
    v.sort_unstable();
    v
}

#[test]
fn desk_map_dimensions_and_header() {
    let rows = raw_rows();
    assert_eq!(rows.len(), 64);
    assert!(rows.iter().all(|r| r.len() == 72));
    assert!(DESK_MAP.lines().any(|l| l.trim() == "# cell_size_m=125"));
    let g = parse_map(DESK_MAP).unwrap();
    assert_eq!((g.width(), g.height(), g.cell_size()), (72, 64, 125.0));
    assert_eq!(g.count(CellKind::Hive), 1);
}

#[test]
fn desk_map_has_245_crop_patches() {
    let sizes = component_sizes(&raw_rows(), b'Y');
    assert_eq!(sizes.len(), 245);

    let g = parse_map(DESK_MAP).unwrap();
    let patches = derive_patches(&g, &PatchParams::default());
    assert_eq!(patches.len(), 245);
    let mut ours: Vec<usize> = patches.iter().map(|p| p.cell_members.len()).collect();
    ours.sort_unstable();
    assert_eq!(ours, sizes);
}

#[test]
fn desk_patch_attributes_follow_their_areas() {
    let g = parse_map(DESK_MAP).unwrap();
    for p in derive_patches(&g, &PatchParams::default()) {
        let n = p.cell_members.len() as f64;
        assert_eq!(p.area, n * 125.0 * 125.0);
        let expected = 1.0 - (-0.05 * n).exp();
        assert!((p.detection_probability - expected).abs() < 1e-15);
        assert!(!p.artificial);
        assert!(p.distance_from_hive > 0.0);
    }
}
