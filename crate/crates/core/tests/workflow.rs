use eimvr::eim::eim_conductivity;
use eimvr::estimator::{control_variate_estimate, PairedSample, SurrogateMean};
use eimvr::fullfield::{apparent_conductivity, rasterize, SolverConfig};
use eimvr::microstructure::{generate, Disk, McConfig, Microstructure};
use eimvr::rng::derive_seed;
use eimvr::Tensor2;

fn family(count: u64) -> Vec<Microstructure> {
    (0..count).map(|i| generate(&McConfig::new(8, 0.35, 0.35, 300, derive_seed(5, &[i]))).unwrap()).collect()
}

#[test]
fn surrogate_tracks_full_field_and_reduces_variance() {
    let (chi, f) = (20.0, 0.35);
    let (lower, upper) = (1.0 / (1.0 - f + f / chi), 1.0 - f + f * chi);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for ms in family(16) {
        let s_eim = eim_conductivity(&ms, 1.0, chi, 2).unwrap();
        let ff = apparent_conductivity(&rasterize(&ms, 64, 1.0, chi).unwrap(), &SolverConfig::for_contrast(chi)).unwrap();
        for s in [s_eim, ff.sigma_app] {
            let [lo, hi] = s.sym_eigenvalues();
            assert!(lo > lower && hi < upper, "{s}");
        }
        x.push(ff.sigma_app.xx);
        y.push(s_eim.xx);
    }
    let all_y = y.clone();
    let e = control_variate_estimate(
        &PairedSample::new(x, y).unwrap(),
        &SurrogateMean::from_samples(&all_y, 2.6).unwrap(),
        2.6,
    )
    .unwrap();
    assert!(e.correlation > 0.5, "{e:?}");
    assert!(e.ci_halfwidth < e.plain_ci_halfwidth);
}

#[test]
fn surrogate_is_translation_invariant() {
    for ms in family(3) {
        let base = eim_conductivity(&ms, 1.0, 10.0, 3).unwrap();
        let moved = eim_conductivity(&ms.translated([0.37, -0.81]), 1.0, 10.0, 3).unwrap();
        assert!((base - moved).max_abs() < 1e-12, "{base} vs {moved}");
    }
}

#[test]
fn quarter_turn_swaps_the_principal_components() {
    for ms in family(3) {
        let turned: Vec<Disk> = ms.disks().iter().map(|d| Disk::new([1.0 - d.center[1], d.center[0]], d.radius)).collect();
        let turned = Microstructure::new(1.0, turned).unwrap();
        let a = eim_conductivity(&ms, 1.0, 10.0, 2).unwrap();
        let b = eim_conductivity(&turned, 1.0, 10.0, 2).unwrap();
        let want = Tensor2::symmetric(a.yy, -a.xy, a.xx);
        assert!((b - want).max_abs() < 1e-12, "{b} vs {want}");
    }
}

#[test]
fn whole_pixel_shift_leaves_the_full_field_unchanged() {
    let ms = &family(1)[0];
    let n = 64;
    let cfg = SolverConfig { tolerance: 1e-10, ..SolverConfig::for_contrast(10.0) };
    let base = apparent_conductivity(&rasterize(ms, n, 1.0, 10.0).unwrap(), &cfg).unwrap().sigma_app;
    let shifted = ms.translated([5.0 / n as f64, 11.0 / n as f64]);
    let moved = apparent_conductivity(&rasterize(&shifted, n, 1.0, 10.0).unwrap(), &cfg).unwrap().sigma_app;
    assert!((base - moved).max_abs() < 1e-8, "{base} vs {moved}");
}

#[test]
fn files_round_trip_through_disk() {
    let dir = std::env::temp_dir().join(format!("eimvr-workflow-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for (i, ms) in family(3).into_iter().enumerate() {
        let path = dir.join(format!("{i}.json"));
        std::fs::write(&path, ms.to_json()).unwrap();
        let back = Microstructure::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back.disks(), ms.disks());
        assert_eq!(eim_conductivity(&back, 1.0, 7.0, 2).unwrap(), eim_conductivity(&ms, 1.0, 7.0, 2).unwrap());
    }
    std::fs::remove_dir_all(&dir).unwrap();
}
