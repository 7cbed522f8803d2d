use chronoens::avar::avar_statistical;
use chronoens::clock::{process_noise_cov, ClockParams};
use chronoens::estimation::SupervisorFilter;
use chronoens::network::Topology;
use chronoens::numerics::{kron, pinv, psd_factor, solve_dlyap, spectral_radius, Matrix, Vector};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |v| Matrix::from_row_slice(rows, cols, &v))
}

fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
    (a - b).abs().max() <= tol * (1.0 + b.abs().max())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pinv_satisfies_moore_penrose(m in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| matrix(r, c))) {
        let p = pinv(&m);
        prop_assert!(close(&(&m * &p * &m), &m, 1e-9));
        prop_assert!(close(&(&p * &m * &p), &p, 1e-9));
        prop_assert!(close(&(&m * &p).transpose(), &(&m * &p), 1e-9));
        prop_assert!(close(&(&p * &m).transpose(), &(&p * &m), 1e-9));
    }

    #[test]
    fn dlyap_equals_truncated_series(
        (m, l) in (1usize..6).prop_flat_map(|n| (matrix(n, n), matrix(n, n))),
        target in 0.1f64..0.9,
    ) {
        let r = spectral_radius(&m);
        prop_assume!(r > 1e-6);
        let m = &m * (target / r);
        let q = &l * l.transpose();
        let p = solve_dlyap(&m, &q).unwrap();
        let mut series = Matrix::zeros(m.nrows(), m.ncols());
        let mut term = q.clone();
        for _ in 0..3000 {
            series += &term;
            term = &m * term * m.transpose();
        }
        prop_assert!(close(&p, &series, 1e-6));
    }

    #[test]
    fn kron_spectral_radius_is_product(a in matrix(3, 3), b in matrix(2, 2)) {
        let lhs = spectral_radius(&kron(&a, &b));
        let rhs = spectral_radius(&a) * spectral_radius(&b);
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs));
    }

    #[test]
    fn psd_factor_reproduces_matrix(l in (1usize..6).prop_flat_map(|n| matrix(n, n))) {
        let q = &l * l.transpose();
        let f = psd_factor(&q).unwrap();
        prop_assert!(close(&(&f * f.transpose()), &q, 1e-9));
    }

    #[test]
    fn clock_noise_factor_reproduces_covariance(s1 in 0.0f64..1.0, s2 in 0.0f64..1.0, tau in 0.1f64..10.0) {
        let q = process_noise_cov(&ClockParams::new(s1, s2), tau).unwrap();
        let f = psd_factor(&q).unwrap();
        prop_assert!(close(&(&f * f.transpose()), &q, 1e-12));
    }

    #[test]
    fn supervisor_innovation_is_linear(
        y1 in -1.0f64..1.0, y2 in -1.0f64..1.0,
        x1 in prop::collection::vec(-1.0f64..1.0, 8),
        x2 in prop::collection::vec(-1.0f64..1.0, 8),
        a in -3.0f64..3.0, b in -3.0f64..3.0,
    ) {
        let t = Topology::build(3, 2, &[(0, 1), (1, 2)], &[(0, 0), (1, 2)]).unwrap();
        let sup = SupervisorFilter::with_gain(&t, 1.0, Matrix::from_column_slice(2, 1, &[0.3, 0.1])).unwrap();
        let (x1, x2) = (Vector::from_vec(x1), Vector::from_vec(x2));
        let combined = sup.innovation(a * y1 + b * y2, &(&x1 * a + &x2 * b));
        let separate = a * sup.innovation(y1, &x1) + b * sup.innovation(y2, &x2);
        prop_assert!((combined - separate).abs() <= 1e-12 * (1.0 + separate.abs()));
    }

    #[test]
    fn avar_ignores_offset_and_ramp(
        d in prop::collection::vec(-1.0f64..1.0, 20..200),
        c in -100.0f64..100.0,
        slope in -10.0f64..10.0,
        w in 1usize..8,
    ) {
        prop_assume!(d.len() > 2 * w);
        let shifted: Vec<f64> = d.iter().enumerate().map(|(k, v)| v + c + slope * k as f64).collect();
        let a = avar_statistical(&d, 1.0, w).unwrap();
        let b = avar_statistical(&shifted, 1.0, w).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn edge_pinv_projects_onto_consensus_complement(n in 2usize..9, extra in prop::collection::vec(any::<bool>(), 36)) {
        let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        let mut it = extra.iter();
        for a in 0..n {
            for b in a + 2..n {
                if *it.next().unwrap_or(&false) {
                    edges.push((a, b));
                }
            }
        }
        let t = Topology::build(n, 1, &edges, &[(0, 0)]).unwrap();
        prop_assert!((t.v_pinv() * t.v() - t.pi()).abs().max() < 1e-9);
        prop_assert!((t.q().transpose() * t.v_pinv()).abs().max() < 1e-9);
    }
}
