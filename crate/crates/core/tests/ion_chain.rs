use lrtfim::ion_chain::{chain_geometry, equilibrium_positions, potential_gradient, transverse_modes, TrapParameters};
use lrtfim::Error;
use nalgebra::DMatrix;

/// Plain gradient descent on the dimensionless crystal potential.
fn gradient_descent_positions(n: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..n).map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * 1.2).collect();
    for _ in 0..2_000_000 {
        let mut g = vec![0.0; n];
        for i in 0..n {
            g[i] = u[i];
            for j in 0..n {
                if i != j {
                    let d = u[i] - u[j];
                    g[i] -= d.signum() / (d * d);
                }
            }
        }
        let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gn < 1e-13 {
            break;
        }
        for i in 0..n {
            u[i] -= 0.02 * g[i];
        }
    }
    u.sort_by(|a, b| a.partial_cmp(b).unwrap());
    u
}

#[test]
fn ten_ion_positions_match_gradient_descent() {
    let trap = TrapParameters::<f64>::new(10, 0.62, 4.1, 18.5).unwrap();
    let u = equilibrium_positions(&trap).unwrap();
    let oracle = gradient_descent_positions(10);
    for (a, b) in u.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
    let g = potential_gradient(&u);
    let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(gn < 1e-10, "gradient norm {gn}");
    for i in 0..10 {
        assert!((u[i] + u[9 - i]).abs() < 1e-9);
        if i > 0 {
            assert!(u[i] > u[i - 1]);
        }
    }
}

#[test]
fn modes_are_orthonormal_and_complete() {
    for (n, axial) in [(2, 0.62), (5, 0.8), (10, 0.62), (10, 0.85), (16, 0.5)] {
        let trap = TrapParameters::<f64>::new(n, axial, 4.1, 18.5).unwrap();
        let g = chain_geometry(&trap).unwrap();
        let b = DMatrix::from_fn(n, n, |i, m| g.component(i, m));
        let gram = b.transpose() * &b;
        let outer = &b * b.transpose();
        for i in 0..n {
            for j in 0..n {
                let d = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - d).abs() < 1e-9);
                assert!((outer[(i, j)] - d).abs() < 1e-9);
            }
        }
        assert!((g.mode_freqs[0] - 4.1).abs() < 1e-9);
        assert!(g.mode_freqs.windows(2).all(|w| w[0] >= w[1]));
        for i in 0..n {
            assert!((g.component(i, 0) - 1.0 / (n as f64).sqrt()).abs() < 1e-9);
        }
    }
}

#[test]
fn mode_frequencies_match_dense_hessian_oracle() {
    let (n, axial, nu1): (usize, f64, f64) = (8, 0.7, 4.1);
    let trap = TrapParameters::<f64>::new(n, axial, nu1, 18.5).unwrap();
    let u = equilibrium_positions(&trap).unwrap();
    let g = transverse_modes(&trap, &u).unwrap();
    // transverse curvature in units of the axial frequency squared
    let beta2 = (nu1 / axial) * (nu1 / axial);
    let k = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            beta2 - (0..n).filter(|&m| m != i).map(|m| 1.0 / (u[i] - u[m]).abs().powi(3)).sum::<f64>()
        } else {
            1.0 / (u[i] - u[j]).abs().powi(3)
        }
    });
    let mut freqs: Vec<f64> = k.symmetric_eigen().eigenvalues.iter().map(|l| axial * l.sqrt()).collect();
    freqs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for (a, b) in g.mode_freqs.iter().zip(&freqs) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn zigzag_reports_ratio() {
    let trap = TrapParameters::<f64>::new(16, 0.8, 4.1, 18.5).unwrap();
    match chain_geometry(&trap) {
        Err(Error::ZigzagInstability { ratio, .. }) => assert!((ratio - 0.8 / 4.1).abs() < 1e-12),
        other => panic!("expected zigzag instability, got {other:?}"),
    }
}
