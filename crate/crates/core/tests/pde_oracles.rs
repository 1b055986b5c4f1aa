use std::f64::consts::PI;

use safenet_core::pde::{build_oracle, OracleGrid, OracleResolution, PdeProblem, Point, ProblemId, ReferenceSolution};
use safenet_core::Error;

fn grid(r: ReferenceSolution) -> OracleGrid {
    match r {
        ReferenceSolution::OracleGrid(g) => g,
        other => panic!("expected grid, got {other:?}"),
    }
}

#[test]
fn burgers_oracle_converges_and_matches_initial_condition() {
    let p = PdeProblem::new(ProblemId::Burgers);
    let t0 = std::time::Instant::now();
    let g = grid(build_oracle(&p, &OracleResolution { level: 32, ..Default::default() }).unwrap());
    eprintln!("burgers oracle {:?}", t0.elapsed());
    for ix in 0..g.nx {
        let x = -1.0 + 2.0 * ix as f64 / 200.0;
        assert!((g.value(ix, 0) + (PI * x).sin()).abs() < 1e-15);
    }
    // boundary values stay at zero
    for it in 0..g.nt {
        assert!(g.value(0, it).abs() < 1e-8 && g.value(g.nx - 1, it).abs() < 1e-8);
    }
    let p = p.with_reference(ReferenceSolution::OracleGrid(g));
    assert!(p.reference_eval(Point::new(0.3, 0.0)).unwrap().is_finite());
}

#[test]
fn allen_cahn_oracle_converges_and_matches_initial_condition() {
    let p = PdeProblem::new(ProblemId::AllenCahn);
    let t0 = std::time::Instant::now();
    let g = grid(build_oracle(&p, &OracleResolution::default()).unwrap());
    eprintln!("allen-cahn oracle {:?}", t0.elapsed());
    for ix in 0..g.nx {
        let x = -1.0 + 2.0 * ix as f64 / (g.nx - 1) as f64;
        assert!((g.value(ix, 0) - x * x * (PI * x).cos()).abs() < 1e-15);
    }
    // periodic in x, bounded by the stable states
    for it in 0..g.nt {
        assert!((g.value(0, it) - g.value(g.nx - 1, it)).abs() < 1e-8);
        assert!(g.values.iter().all(|v| v.abs() <= 1.0 + 1e-6));
    }
}

#[test]
fn oracle_rejects_closed_form_problems() {
    let p = PdeProblem::new(ProblemId::Wave);
    assert!(matches!(
        build_oracle(&p, &OracleResolution::default()),
        Err(Error::OracleUnsupported(_))
    ));
}

#[test]
fn oracle_file_round_trip() {
    let p = PdeProblem::new(ProblemId::Burgers);
    let g = grid(build_oracle(&p, &OracleResolution { nx: 21, nt: 11, level: 16 }).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("burgers.csv");
    g.write(&path).unwrap();
    let back = OracleGrid::read(&path).unwrap();
    assert_eq!(back, g);
}
