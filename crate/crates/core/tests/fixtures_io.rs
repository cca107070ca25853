use std::collections::HashMap;

use sha2::{Digest, Sha256};
use tentlab::fieldfile::{Dtype, FieldFile, MAGIC};
use tentlab::fixtures::{band_limited, eigenmode, fixture_corpus, gaussian_bump, hash_values, CorpusSpec};
use tentlab::{EllipticOperator, Grid, C64};

fn golden() -> HashMap<String, String> {
    include_str!("data/fixture_hashes.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split_whitespace();
            (it.next().unwrap().to_string(), it.next().unwrap().to_string())
        })
        .collect()
}

#[test]
fn fixture_hashes_match_golden_file() {
    let g = golden();
    let g1 = Grid::unit(1, 32).unwrap();
    let g2 = Grid::unit(2, 8).unwrap();
    assert_eq!(hash_values(&eigenmode(&g1, [3, 0])), g["eigenmode_1d32_k3"]);
    assert_eq!(hash_values(&band_limited(&g1, 4, 7)), g["band_limited_1d32_k4_s7"]);
    assert_eq!(hash_values(&gaussian_bump(&g1, 5, 2.5, true)), g["bump_1d32_c5_w2.5"]);
    assert_eq!(hash_values(&band_limited(&g2, 2, 7)), g["band_limited_2d8_k2_s7"]);
}

#[test]
fn corpus_is_deterministic_and_mean_zero() {
    let grid = Grid::unit(1, 32).unwrap();
    let op = EllipticOperator::identity(grid).unwrap();
    let spec = CorpusSpec::default();
    let a = fixture_corpus(&op, 0, &spec).unwrap();
    let b = fixture_corpus(&op, 0, &spec).unwrap();
    assert_eq!(a.len(), spec.size());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.name, y.name);
        assert_eq!(x.hash, y.hash);
        let mean = x.values.iter().sum::<C64>().norm() / x.values.len() as f64;
        assert!(mean < 1e-12, "{} has mean {mean:e}", x.name);
    }
}

#[test]
fn field_file_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::unit(2, 8).unwrap();
    let values = band_limited(&grid, 3, 11);
    let path = dir.path().join("f.tlab");
    FieldFile::new(Dtype::Complex128, vec![8, 8], values.clone()).unwrap().write(&path).unwrap();
    let back = FieldFile::read(&path).unwrap();
    assert_eq!(back.values, values);
    assert_eq!(back.spatial_cells(2), 64);

    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..5], MAGIC);
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    assert_eq!(Sha256::digest(body).as_slice(), trailer);
    let hlen = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let header: serde_json::Value = serde_json::from_slice(&bytes[9..9 + hlen]).unwrap();
    assert_eq!(header["dtype"], "complex128");
    assert_eq!(body.len() - 9 - hlen, 64 * 16);
    let re0 = f64::from_le_bytes(body[9 + hlen..17 + hlen].try_into().unwrap());
    assert_eq!(re0, values[0].re);
}

#[test]
fn complex64_files_round_to_single_precision() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f32.tlab");
    let values: Vec<C64> = (0..16).map(|i| C64::new(0.1 * i as f64, -1.0 / (1.0 + i as f64))).collect();
    FieldFile::new(Dtype::Complex64, vec![2, 8], values.clone()).unwrap().write(&path).unwrap();
    let back = FieldFile::read(&path).unwrap();
    for (a, b) in back.values.iter().zip(&values) {
        assert_eq!(a.re, b.re as f32 as f64);
        assert_eq!(a.im, b.im as f32 as f64);
    }
    assert_eq!(back.spatial_cells(1), 8);
}

#[test]
fn tampered_payload_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.tlab");
    FieldFile::new(Dtype::Complex128, vec![4], vec![C64::new(1.0, 2.0); 4]).unwrap().write(&path).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    let k = bytes.len() - 40;
    bytes[k] ^= 1;
    assert!(FieldFile::from_bytes(&bytes).is_err());
    assert!(FieldFile::from_bytes(&bytes[..10]).is_err());
}
