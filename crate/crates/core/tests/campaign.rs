use onebit_mimo::admm::AdmmConfig;
use onebit_mimo::receivers::ReceiverKind;
use onebit_mimo::sim::{run_campaign, run_setup, CampaignConfig, DetectorSpec, ScenarioConfig};

fn config(antennas: usize, users: usize, setups: u64, uses: u64, detectors: Vec<DetectorSpec>) -> CampaignConfig {
    CampaignConfig {
        antennas,
        users,
        setups,
        uses,
        detectors,
        master_seed: 99,
        workers: 1,
        scenario: ScenarioConfig::default(),
    }
}

/// Average ranks, ties sharing the mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            out[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    out
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn spearman_helper() {
    assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    assert_eq!(ranks(&[5.0, 1.0, 5.0, 0.0]), vec![2.5, 1.0, 2.5, 0.0]);
}

#[test]
fn mrc_is_error_free_at_high_snr_without_impairments() {
    let mut cfg = config(64, 1, 200, 20, vec![DetectorSpec::linear(ReceiverKind::Mrc)]);
    cfg.scenario.kappa_r = 1.0;
    cfg.scenario.kappa_t = vec![1.0];
    cfg.scenario.sigma2 = 1e-20;
    let clean = (0..cfg.setups)
        .filter(|&s| run_setup(&cfg, s).unwrap().bit_errors[0][0] == 0)
        .count();
    assert!(clean as f64 >= 0.99 * cfg.setups as f64, "{clean} of {} setups error-free", cfg.setups);
}

#[test]
fn desk_scale_trends_and_count_invariants() {
    let cfg = config(64, 8, 300, 50, DetectorSpec::all(&AdmmConfig::default()));
    let report = run_campaign(&cfg).unwrap();
    let bits = 2 * cfg.setups * cfg.uses;

    let bmmse = report.detector("BMMSE").unwrap().ber();
    let index: Vec<f64> = (1..=bmmse.len()).map(|i| i as f64).collect();
    let rho = spearman(&index, &bmmse);
    assert!(rho < -0.8, "BMMSE Spearman correlation {rho}");

    for w in report.avg_snr_db.windows(2) {
        assert!(w[0] <= w[1]);
    }
    for d in &report.detectors {
        for (k, ber) in d.ber().iter().enumerate() {
            assert_eq!(d.total_bits[k], bits);
            assert!(d.bit_errors[k] <= d.total_bits[k]);
            let se = (0.25 / bits as f64).sqrt();
            assert!(*ber <= 0.5 + 3.0 * se, "{} user {} BER {ber}", d.label, k + 1);
        }
    }
}

#[test]
fn campaigns_are_pure_functions_of_the_config() {
    let cfg = config(12, 3, 6, 10, DetectorSpec::all(&AdmmConfig::default()));
    let a = run_campaign(&cfg).unwrap();
    let b = run_campaign(&CampaignConfig { workers: 3, ..cfg.clone() }).unwrap();
    assert_eq!(a.detectors, b.detectors);
    assert_eq!(a.avg_snr_db, b.avg_snr_db);
    let c = run_campaign(&CampaignConfig { master_seed: 100, ..cfg.clone() }).unwrap();
    assert_ne!(a.detectors, c.detectors);
    assert!(run_campaign(&CampaignConfig { setups: 0, ..cfg }).is_err());
}
