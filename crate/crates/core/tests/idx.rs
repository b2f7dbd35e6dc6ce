use std::io::Write;
use std::path::PathBuf;

use relu_align::data::load_idx;
use relu_align::Error;
use tempfile::TempDir;

fn images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut b = vec![0, 0, 8, 3];
    for v in [count, rows, cols] {
        b.extend_from_slice(&v.to_be_bytes());
    }
    b.extend_from_slice(pixels);
    b
}

fn labels(ls: &[u8]) -> Vec<u8> {
    let mut b = vec![0, 0, 8, 1];
    b.extend_from_slice(&(ls.len() as u32).to_be_bytes());
    b.extend_from_slice(ls);
    b
}

fn write(dir: &TempDir, name: &str, bytes: &[u8]) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::File::create(&p).unwrap().write_all(bytes).unwrap();
    p
}

fn fixture(dir: &TempDir) -> (PathBuf, PathBuf) {
    // Four 2x2 images labelled 1, 0, 7, 0.
    let px = [255, 0, 1, 2, 3, 4, 5, 6, 9, 9, 9, 9, 128, 64, 32, 16];
    (write(dir, "img", &images(4, 2, 2, &px)), write(dir, "lab", &labels(&[1, 0, 7, 0])))
}

#[test]
fn pixels_are_bit_exact() {
    let dir = TempDir::new().unwrap();
    let (img, lab) = fixture(&dir);
    let ds = load_idx::<f64>(&img, &lab, 0, 1, 10).unwrap();
    assert_eq!(ds.n(), 3);
    assert_eq!(ds.dim(), 4);
    let expect: [(&[u8], i8); 3] = [(&[255, 0, 1, 2], -1), (&[3, 4, 5, 6], 1), (&[128, 64, 32, 16], 1)];
    for (i, (px, y)) in expect.iter().enumerate() {
        assert_eq!(ds.label(i), *y);
        for (k, &b) in px.iter().enumerate() {
            assert_eq!(ds.x(i)[k].to_bits(), (f64::from(b) * (1.0 / 255.0)).to_bits());
        }
    }
}

#[test]
fn per_class_cap_keeps_file_order() {
    let dir = TempDir::new().unwrap();
    let (img, lab) = fixture(&dir);
    let ds = load_idx::<f64>(&img, &lab, 0, 1, 1).unwrap();
    assert_eq!(ds.n(), 2);
    assert_eq!(ds.x(1)[0], 3.0 / 255.0);
}

#[test]
fn wrong_magic_reports_offset_zero() {
    let dir = TempDir::new().unwrap();
    let (img, _) = fixture(&dir);
    let mut bad = labels(&[1, 0, 7, 0]);
    bad[3] = 3;
    let lab = write(&dir, "bad", &bad);
    match load_idx::<f64>(&img, &lab, 0, 1, 10) {
        Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
        other => panic!("expected format error, got {other:?}"),
    }
}

#[test]
fn truncated_images_report_file_length() {
    let dir = TempDir::new().unwrap();
    let full = images(4, 2, 2, &[1; 16]);
    let img = write(&dir, "img", &full[..25]);
    let lab = write(&dir, "lab", &labels(&[1, 0, 7, 0]));
    match load_idx::<f64>(&img, &lab, 0, 1, 10) {
        Err(Error::Format { offset, .. }) => assert_eq!(offset, 25),
        other => panic!("expected format error, got {other:?}"),
    }
    let img = write(&dir, "short", &full[..6]);
    assert!(matches!(load_idx::<f64>(&img, &lab, 0, 1, 10), Err(Error::Format { offset: 6, .. })));
}

#[test]
fn count_mismatch_and_absent_digit_are_content_errors() {
    let dir = TempDir::new().unwrap();
    let (img, _) = fixture(&dir);
    let lab = write(&dir, "three", &labels(&[1, 0, 7]));
    assert!(matches!(load_idx::<f64>(&img, &lab, 0, 1, 10), Err(Error::Content(_))));
    let (_, lab) = fixture(&dir);
    assert!(matches!(load_idx::<f64>(&img, &lab, 0, 5, 10), Err(Error::Content(_))));
}

#[test]
fn missing_file_is_io_error() {
    let dir = TempDir::new().unwrap();
    let (_, lab) = fixture(&dir);
    let r = load_idx::<f64>(&dir.path().join("nope"), &lab, 0, 1, 10);
    assert!(matches!(r, Err(Error::Io(_))));
}
