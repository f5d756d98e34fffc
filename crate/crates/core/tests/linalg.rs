use approx::assert_relative_eq;
use phnmf::linalg::{
    cosine_similarity, frobenius_norm, io, lstsq_qr, matmul, matmul_nt, matmul_tn, singular_values,
    Matrix,
};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix<f64>> {
    prop::collection::vec(-10.0f64..10.0, rows * cols)
        .prop_map(move |d| Matrix::new(rows, cols, d).unwrap())
}

fn dims() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (1usize..6, 1usize..6, 1usize..6, 1usize..6)
}

fn max_abs_diff(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn to_na(m: &Matrix<f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(m.n_rows(), m.n_cols(), m.as_slice())
}

proptest! {
    #[test]
    fn matmul_is_associative(
        (a, b, c) in dims().prop_flat_map(|(n, p, q, r)| (matrix(n, p), matrix(p, q), matrix(q, r)))
    ) {
        let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
        let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
        let scale = 1.0 + left.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(max_abs_diff(&left, &right) <= 1e-12 * scale);
    }

    #[test]
    fn transposed_products_agree(
        (a, b) in (1usize..6, 1usize..6, 1usize..6).prop_flat_map(|(n, p, q)| (matrix(n, p), matrix(n, q)))
    ) {
        let tn = matmul_tn(&a, &b).unwrap();
        let explicit = matmul(&a.transpose(), &b).unwrap();
        prop_assert!(max_abs_diff(&tn, &explicit) < 1e-12);
        let nt = matmul_nt(&a.transpose(), &b.transpose()).unwrap();
        prop_assert!(max_abs_diff(&nt, &explicit) < 1e-12);
    }

    #[test]
    fn frobenius_matches_gram_trace(a in (1usize..7, 1usize..7).prop_flat_map(|(n, p)| matrix(n, p))) {
        let f = frobenius_norm(&a);
        let gram = matmul_tn(&a, &a).unwrap();
        prop_assert!((f * f - gram.trace()).abs() <= 1e-10 * (1.0 + gram.trace()));
    }

    #[test]
    fn cosine_symmetric_and_scale_invariant(
        (u, v) in (1usize..10).prop_flat_map(|n| (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(-5.0f64..5.0, n),
        )),
        a in 0.01f64..100.0,
        b in 0.01f64..100.0,
    ) {
        let uv = cosine_similarity(&u, &v).unwrap().value;
        let vu = cosine_similarity(&v, &u).unwrap().value;
        prop_assert!((uv - vu).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&uv));
        let su: Vec<f64> = u.iter().map(|x| a * x).collect();
        let sv: Vec<f64> = v.iter().map(|x| b * x).collect();
        let scaled = cosine_similarity(&su, &sv).unwrap().value;
        prop_assert!((scaled - uv).abs() < 1e-12);
    }

    #[test]
    fn singular_values_match_nalgebra(a in (1usize..8, 1usize..8).prop_flat_map(|(n, p)| matrix(n, p))) {
        let ours = singular_values(&a);
        let mut oracle: Vec<f64> = to_na(&a).singular_values().iter().copied().collect();
        oracle.sort_by(|x, y| y.total_cmp(x));
        prop_assert_eq!(ours.len(), oracle.len());
        let top = oracle[0].max(1.0);
        for (s, o) in ours.iter().zip(&oracle) {
            prop_assert!((s - o).abs() <= 1e-9 * top, "{s} vs {o}");
        }
    }

    #[test]
    fn least_squares_matches_normal_equations(
        a in (4usize..10, 1usize..4).prop_flat_map(|(n, p)| matrix(n, p)),
        seed in prop::collection::vec(-3.0f64..3.0, 10),
    ) {
        let b: Vec<f64> = seed[..a.n_rows()].to_vec();
        let na = to_na(&a);
        let gram = na.transpose() * &na;
        // skip near-singular draws; the oracle itself is unreliable there
        let sv = gram.singular_values();
        prop_assume!(sv.min() > 1e-6 * sv.max());
        let oracle = gram.lu().solve(&(na.transpose() * nalgebra::DVector::from_column_slice(&b))).unwrap();
        let ours = lstsq_qr(&a, &b, 1e-12).unwrap();
        for (x, o) in ours.iter().zip(oracle.iter()) {
            prop_assert!((x - o).abs() <= 1e-7 * (1.0 + o.abs()));
        }
    }

    #[test]
    fn csv_round_trip_is_exact(a in (1usize..6, 1usize..6).prop_flat_map(|(n, p)| matrix(n, p))) {
        let mut buf = Vec::new();
        io::write_csv(&a, &mut buf).unwrap();
        let back: Matrix<f64> = io::read_csv(buf.as_slice(), "mem").unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn binary_round_trip_is_exact(a in (0usize..6, 0usize..6).prop_flat_map(|(n, p)| matrix(n, p))) {
        let mut buf = Vec::new();
        io::write_binary(&a, &mut buf).unwrap();
        let back: Matrix<f64> = io::read_binary(buf.as_slice()).unwrap();
        prop_assert_eq!(back, a);
    }
}

#[test]
fn f32_products_track_f64() {
    let a = Matrix::from_fn(7, 5, |i, j| ((i * 3 + j) % 5) as f64 * 0.3 + 0.1);
    let b = Matrix::from_fn(5, 4, |i, j| ((i + 2 * j) % 3) as f64 * 0.7 + 0.2);
    let exact = matmul(&a, &b).unwrap();
    let single = matmul(&a.cast::<f32>(), &b.cast::<f32>()).unwrap().cast::<f64>();
    for (x, y) in exact.as_slice().iter().zip(single.as_slice()) {
        assert_relative_eq!(x, y, max_relative = 1e-6);
    }
}

#[test]
fn files_round_trip_through_sniffing_loader() {
    let dir = tempfile::tempdir().unwrap();
    let a = Matrix::from_fn(3, 2, |i, j| i as f64 - 0.5 * j as f64);
    io::save_csv(&a, dir.path().join("a.csv")).unwrap();
    io::save_binary(&a, dir.path().join("a.bin")).unwrap();
    let c: Matrix<f64> = io::load_matrix(dir.path().join("a.csv")).unwrap();
    let b: Matrix<f64> = io::load_matrix(dir.path().join("a.bin")).unwrap();
    assert_eq!(c, a);
    assert_eq!(b, a);
    let missing = io::load_matrix::<f64>(dir.path().join("nope.csv")).unwrap_err();
    assert!(missing.is_io());
}
