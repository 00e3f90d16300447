use std::io::{BufReader, Cursor, Write};
use std::path::Path;

use timbre_edit::io::{load_dataset, read_dataset, read_json, save_dataset, write_dataset, write_json};
use timbre_edit::{Error, FrameSet, LatentClip, WorldParams};

fn checksum(set: &FrameSet) -> u64 {
    // FNV-1a over the raw bits and labels
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    let mut eat = |x: u64| {
        for b in x.to_le_bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3);
        }
    };
    for v in set.frames.iter() {
        eat(v.to_bits());
    }
    for (&i, &p) in set.instruments.iter().zip(&set.pitches) {
        eat(i as u64);
        eat(p as u64);
    }
    h
}

#[test]
fn one_record_round_trips_bit_exactly() {
    let w = WorldParams::default().build().unwrap();
    let mut set = w.sample_frames(1, 5);
    set.frames[(0, 0)] = 0.1 + 0.2;
    set.frames[(1, 0)] = -1e-300;
    set.frames[(2, 0)] = f64::MAX;
    let mut buf = Vec::new();
    write_dataset(&set, &mut buf).unwrap();
    assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 1);
    let back = read_dataset(Cursor::new(buf), Path::new("mem")).unwrap();
    assert_eq!(back, set);
}

#[test]
fn ten_thousand_records_keep_their_checksum() {
    let w = WorldParams::default().build().unwrap();
    let set = w.sample_frames(10_000, 11);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/dataset.jsonl");
    save_dataset(&set, &path).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back.len(), 10_000);
    assert_eq!(checksum(&back), checksum(&set));
    assert_eq!(back, set);
}

#[test]
fn parse_errors_carry_the_line_number() {
    let text = "{\"z\":[1.0,2.0],\"inst\":0,\"pitch\":1}\n\n{\"z\":[1.0],\"inst\":0,\"pitch\":1}\n";
    match read_dataset(BufReader::new(text.as_bytes()), Path::new("d.jsonl")) {
        Err(Error::Parse { line, message, .. }) => {
            assert_eq!(line, 3);
            assert!(message.contains("channels"), "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
    let text = "{\"z\":[1.0],\"inst\":0,\"pitch\":1}\n{\"z\":[1.0],\"inst\":0\n";
    match read_dataset(BufReader::new(text.as_bytes()), Path::new("d.jsonl")) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn empty_and_missing_files_are_errors() {
    assert!(matches!(read_dataset(Cursor::new("\n\n"), Path::new("e")), Err(Error::Empty(_))));
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_dataset(&dir.path().join("none.jsonl")), Err(Error::Io { .. })));
    let bad = dir.path().join("bad.json");
    std::fs::File::create(&bad).unwrap().write_all(b"{\n  \"data\": [1,\n").unwrap();
    assert!(matches!(read_json::<LatentClip>(&bad), Err(Error::Parse { .. })));
}

#[test]
fn clips_round_trip_through_json() {
    let w = WorldParams::default().build().unwrap();
    let clip = w.sample_clip(12, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clip.json");
    write_json(&clip, &path).unwrap();
    let back: LatentClip = read_json(&path).unwrap();
    assert_eq!(back, clip);
}
