use sphc::synth::{
    gen_orthogonal, gen_sparse, gen_uniform, gen_vmf, mean_pairwise_cosine, read_array, read_npy,
    sparse_nonzeros, write_array, write_npy, GenSpec, SphereDistribution,
};
use sphc::Error;

/// `A_d(κ) = I_{d/2}(κ) / I_{d/2−1}(κ)`, the mean resultant length of a
/// von Mises–Fisher distribution, from the Bessel-ratio continued fraction
/// `I_ν/I_{ν−1} = 1 / (2ν/κ + I_{ν+1}/I_ν)` evaluated bottom-up.
fn mean_resultant_length(d: usize, kappa: f64) -> f64 {
    let nu = d as f64 / 2.0;
    let mut tail = 0.0;
    for k in (0..5000).rev() {
        tail = 1.0 / (2.0 * (nu + k as f64) / kappa + tail);
    }
    tail
}

fn assert_unit_rows(x: &sphc::Embeddings32) {
    for row in x.rows() {
        let n: f64 = row.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-6, "{n}");
    }
}

#[test]
fn vmf_mean_cosine_matches_bessel_ratio() {
    for (kappa, tol) in [(100.0, 0.004), (1000.0, 0.01)] {
        let x = gen_vmf(2000, 768, kappa, 1, 17).unwrap();
        assert_unit_rows(&x);
        let expected = mean_resultant_length(768, kappa).powi(2);
        let got = mean_pairwise_cosine(&x);
        assert!(
            (got - expected).abs() < tol,
            "κ={kappa}: {got} vs {expected}"
        );
    }
}

#[test]
fn vmf_clusters_dilute_the_mean_cosine() {
    let one = mean_pairwise_cosine(&gen_vmf(1200, 256, 500.0, 1, 3).unwrap());
    let four = mean_pairwise_cosine(&gen_vmf(1200, 256, 500.0, 4, 3).unwrap());
    assert!(four < 0.5 * one, "{four} vs {one}");
}

#[test]
fn uniform_mean_cosine_is_near_zero() {
    let x = gen_uniform(2000, 768, 1);
    assert_unit_rows(&x);
    assert!(mean_pairwise_cosine(&x).abs() < 2e-3);
    assert_eq!(x.as_slice(), gen_uniform(2000, 768, 1).as_slice());
    assert_ne!(x.as_slice(), gen_uniform(2000, 768, 2).as_slice());
}

#[test]
fn orthogonal_rows_are_orthonormal() {
    let x = gen_orthogonal(64, 128, 2).unwrap();
    for i in 0..64 {
        for j in 0..64 {
            let dot: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| *a as f64 * *b as f64)
                .sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-5, "({i},{j}) {dot}");
        }
    }
    assert!(matches!(
        gen_orthogonal(10, 8, 0),
        Err(Error::TooManyRows { .. })
    ));
}

#[test]
fn sparse_rows_have_exact_support() {
    let x = gen_sparse(100, 768, 0.1, 4).unwrap();
    assert_unit_rows(&x);
    let k = sparse_nonzeros(768, 0.1);
    assert_eq!(k, 77);
    for row in x.rows() {
        assert_eq!(row.iter().filter(|v| **v != 0.0).count(), k);
    }
    assert!(gen_sparse(10, 10, 0.0, 1).is_err());
}

#[test]
fn spec_dispatch_and_validation() {
    let spec = GenSpec {
        distribution: "vmf".parse::<SphereDistribution>().unwrap(),
        kappa: 50.0,
        ..GenSpec::uniform(10, 32, 5)
    };
    assert_eq!(spec.generate().unwrap().shape(), (10, 32));
    assert!(GenSpec::uniform(10, 1, 0).generate().is_err());
    assert!("gaussian".parse::<SphereDistribution>().is_err());
}

#[test]
fn npy_roundtrip_and_layout() {
    let dir = tempfile::tempdir().unwrap();
    let x = gen_uniform(7, 5, 1);
    let p = dir.path().join("x.npy");
    write_npy(&p, x.as_slice(), 7, 5).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    assert_eq!(&bytes[..8], b"\x93NUMPY\x01\x00");
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    assert_eq!((10 + header_len) % 64, 0);
    let header = std::str::from_utf8(&bytes[10..10 + header_len]).unwrap();
    assert!(header.contains("'descr': '<f4'") && header.contains("(7, 5)"));
    assert_eq!(read_npy(&p).unwrap(), (x.as_slice().to_vec(), 7, 5));

    let raw = dir.path().join("x.f32");
    write_array(&raw, x.as_slice(), 7, 5).unwrap();
    assert_eq!(std::fs::metadata(&raw).unwrap().len(), 140);
    assert_eq!(read_array(&raw, Some((None, 5))).unwrap().1, 7);
    assert!(read_array(&raw, Some((None, 6))).is_err());
    assert!(read_array(&raw, None).is_err());
}
