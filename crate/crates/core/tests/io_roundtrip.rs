use alseg::io::matrix::HEADER_LEN;
use alseg::io::*;
use alseg::{Error, PointCloud, SelectionState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arb_cloud() -> impl Strategy<Value = PointCloud> {
    (0usize..60, any::<bool>(), any::<u64>()).prop_map(|(n, labeled, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span = 10f64.powi(rng.gen_range(-3..5));
        let positions = (0..n).map(|_| [0; 3].map(|_: i32| rng.gen_range(-span..span))).collect();
        let colors = (0..n).map(|_| [0; 3].map(|_: i32| rng.gen::<f64>())).collect();
        let labels = labeled.then(|| (0..n).map(|_| rng.gen_range(0..u32::MAX)).collect());
        PointCloud::new(positions, colors, labels).unwrap()
    })
}

fn quantize_color(v: f64) -> f64 {
    (v * 255.0).round() / 255.0
}

proptest! {
    #[test]
    fn ply_round_trip_within_quantization(cloud in arb_cloud()) {
        let back = parse_ply(&encode_ply(&cloud).unwrap()).unwrap();
        prop_assert_eq!(back.len(), cloud.len());
        for (a, b) in cloud.positions.iter().zip(&back.positions) {
            for k in 0..3 {
                prop_assert_eq!(b[k], a[k] as f32 as f64);
            }
        }
        for (a, b) in cloud.colors.iter().zip(&back.colors) {
            for k in 0..3 {
                prop_assert_eq!(b[k], quantize_color(a[k]));
            }
        }
        prop_assert_eq!(&back.gt_labels, &cloud.gt_labels);
        // a second pass is lossless
        prop_assert_eq!(parse_ply(&encode_ply(&back).unwrap()).unwrap(), back);
    }

    #[test]
    fn f32_matrix_round_trip_is_bit_exact(rows in 0usize..20, cols in 0usize..20, bits in proptest::collection::vec(any::<u32>(), 400)) {
        let values: Vec<f32> = bits[..rows * cols].iter().map(|&b| f32::from_bits(b)).collect();
        let m = Matrix::f32(rows, cols, values).unwrap();
        let back = decode_matrix(&encode_matrix(&m).unwrap()).unwrap();
        prop_assert_eq!((back.rows, back.cols), (rows, cols));
        match back.data {
            MatrixData::F32(v) => prop_assert!(v.iter().zip(&bits).all(|(x, &b)| x.to_bits() == b)),
            MatrixData::U32(_) => prop_assert!(false, "dtype changed"),
        }
    }

    #[test]
    fn u32_matrix_round_trip(rows in 0usize..20, cols in 0usize..20, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Matrix::u32(rows, cols, (0..rows * cols).map(|_| rng.gen()).collect()).unwrap();
        prop_assert_eq!(decode_matrix(&encode_matrix(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn selection_list_round_trip(indices in proptest::collection::vec(any::<usize>(), 0..50)) {
        let text = encode_selection(&indices);
        prop_assert!(text.is_empty() || text.ends_with('\n'));
        prop_assert_eq!(parse_selection(&text).unwrap(), indices);
    }
}

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = gen_synthetic(&SceneSpec { n_points: 500, seed: 4, ..SceneSpec::default() }).unwrap();
    let ply = dir.path().join("scene.ply");
    save_ply(&cloud, &ply).unwrap();
    let back = load_ply(&ply).unwrap();
    assert_eq!(back.gt_labels, cloud.gt_labels);

    let m = Matrix::from_f64(2, 3, &[1.0, -2.5, 3.25, 0.0, 1e-3, 7.0]).unwrap();
    let mtx = dir.path().join("m.mtx");
    save_matrix(&m, &mtx).unwrap();
    assert_eq!(load_matrix(&mtx).unwrap(), m);

    let mut state = SelectionState::new(10, [1, 3]).unwrap();
    state.next_iteration();
    state.promote_to_labeled(&[7, 2]).unwrap();
    let json = dir.path().join("state.json");
    save_state(&state, &json).unwrap();
    assert_eq!(load_state(&json).unwrap(), state);

    assert!(matches!(load_ply(dir.path().join("missing.ply")), Err(Error::Io(_))));
}

fn mutate(rng: &mut ChaCha8Rng, bytes: &mut Vec<u8>, header_len: usize) {
    const TOKENS: [&[u8]; 12] = [
        b"ply", b"element", b"vertex", b"property", b"float", b"list", b"end_header", b"-1",
        b"99999999999999999999", b"\n", b" ", b"\xff",
    ];
    for _ in 0..rng.gen_range(1..4) {
        let at = rng.gen_range(0..=header_len.min(bytes.len()));
        match rng.gen_range(0..6) {
            0 if at < bytes.len() => bytes[at] = rng.gen(),
            1 if at < bytes.len() => {
                bytes.remove(at);
            }
            2 => {
                let t = TOKENS[rng.gen_range(0..TOKENS.len())];
                bytes.splice(at..at, t.iter().copied());
            }
            3 => bytes.truncate(at),
            4 => {
                let end = (at + rng.gen_range(1..40)).min(bytes.len());
                let chunk = bytes[at..end].to_vec();
                bytes.splice(at..at, chunk);
            }
            _ => {
                let end = (at + rng.gen_range(1..20)).min(bytes.len());
                bytes.drain(at..end);
            }
        }
    }
}

#[test]
fn mutated_ply_headers_yield_structured_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cloud = gen_synthetic(&SceneSpec { n_points: 40, seed: 1, ..SceneSpec::default() }).unwrap();
    let text = encode_ply(&cloud).unwrap();
    let header_len = text.find("end_header").unwrap() + "end_header\n".len();
    let (mut failed, mut parsed) = (0, 0);
    for _ in 0..12_000 {
        let mut bytes = text.as_bytes().to_vec();
        mutate(&mut rng, &mut bytes, header_len);
        match parse_ply(&String::from_utf8_lossy(&bytes)) {
            Ok(c) => {
                parsed += 1;
                assert_eq!(c.colors.len(), c.positions.len());
            }
            Err(Error::Ply { msg, .. }) => {
                failed += 1;
                assert!(!msg.is_empty());
            }
            Err(other) => panic!("unstructured error {other:?}"),
        }
    }
    assert!(failed > 5_000, "mutations too mild: {failed} errors, {parsed} parsed");
}

#[test]
fn mutated_matrix_headers_yield_structured_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let m = Matrix::f32(3, 4, (0..12).map(|v| v as f32).collect()).unwrap();
    let bytes = encode_matrix(&m).unwrap();
    let mut failed = 0;
    for _ in 0..12_000 {
        let mut b = bytes.clone();
        match rng.gen_range(0..3) {
            0 => {
                for _ in 0..rng.gen_range(1..4) {
                    let at = rng.gen_range(0..HEADER_LEN);
                    b[at] = rng.gen();
                }
            }
            1 => b.truncate(rng.gen_range(0..b.len())),
            _ => mutate(&mut rng, &mut b, HEADER_LEN),
        }
        match decode_matrix(&b) {
            Ok(d) => assert_eq!(d.to_f64().len(), d.rows * d.cols),
            Err(Error::Matrix(_)) => failed += 1,
            Err(other) => panic!("unstructured error {other:?}"),
        }
    }
    assert!(failed > 5_000, "mutations too mild: {failed} errors");
}

#[test]
fn huge_declared_counts_fail_cleanly() {
    let text = "ply\nformat ascii 1.0\nelement vertex 18446744073709551615\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n0 0 0 1 2 3\n";
    assert!(matches!(parse_ply(text), Err(Error::Ply { .. })));
    let mut b = encode_matrix(&Matrix::u32(0, 0, vec![]).unwrap()).unwrap();
    b[13..21].copy_from_slice(&[0xff; 8]);
    assert!(matches!(decode_matrix(&b), Err(Error::Matrix(_))));
}

#[test]
fn synthetic_scenes_are_valid_and_reproducible() {
    for seed in 0..5 {
        let spec = SceneSpec { n_points: 3000, n_classes: 2 + seed as usize, seed, ..SceneSpec::default() };
        let a = gen_synthetic(&spec).unwrap();
        assert_eq!(a, gen_synthetic(&spec).unwrap());
        assert_eq!(a.len(), 3000);
        let labels = a.labels().unwrap();
        for c in 0..spec.n_classes as u32 {
            let count = labels.iter().filter(|&&l| l == c).count();
            assert!(count * 100 >= 3000, "class {c} has {count} points");
        }
        assert!(alseg::model::validate_cloud(&a, None, None).is_ok());
    }
}
