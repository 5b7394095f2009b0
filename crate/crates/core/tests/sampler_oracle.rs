use rwmlab::{StreamKey, TargetSpec};

const N: usize = 1_000_000;

fn shipped() -> Vec<TargetSpec> {
    vec![
        TargetSpec::standard_gaussian(),
        TargetSpec::lasso(1.0).unwrap(),
        TargetSpec::lasso_quadratic(1.0, 1.0).unwrap(),
        TargetSpec::generalized_gamma(7.0, 1.0).unwrap(),
        TargetSpec::beta(10.0, 10.0).unwrap(),
    ]
}

#[test]
fn sampler_moments_agree_with_quadrature() {
    for t in shipped() {
        let mut rng = StreamKey::new(11).with_str("moments", &t.tag()).stream();
        let xs = t.sample_stationary(&mut rng, N);
        assert!(xs.iter().all(|x| t.support.contains(*x)));
        let quad = t.default_quad();
        for k in [1, 2, 4] {
            let exact = t.moment(k, &quad).unwrap();
            let vals: Vec<f64> = xs.iter().map(|x| x.powi(k)).collect();
            let mean = vals.iter().sum::<f64>() / N as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (N - 1) as f64;
            let se = (var / N as f64).sqrt();
            assert!(
                (mean - exact).abs() <= 5.0 * se,
                "{} k={k}: sample {mean} vs quadrature {exact} (se {se})",
                t.tag()
            );
        }
    }
}
