use blowup_core::exponents::*;
use num_rational::Ratio;
use proptest::prelude::*;

type Q = Ratio<i128>;

fn q(n: i128, d: i128) -> Q {
    Ratio::new(n, d)
}

fn f(x: Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

struct Exact {
    alpha: Q,
    beta0: Q,
    nu: Q,
    mu: Q,
    theta: Q,
    nu1: Q,
    mu1: Q,
    nu2: Q,
    mu2: Q,
}

fn exact(p: Q, qq: Q, n: i128, beta: Q) -> Exact {
    let one = q(1, 1);
    let n = q(n, 1);
    let d = p - qq;
    let theta = (n * d + qq + one) / (n * d + (qq + one) * (p + one));
    let den = qq * (p + one) + theta * d;
    Exact {
        alpha: (qq + one) / d - beta,
        beta0: (qq + one) / d - one / p,
        nu: (n * d + (qq + one) * (p + one)) * (qq + one - beta * d) / (beta * d * d),
        mu: (n * d + (p + one) * (qq + one) - beta * d * (p + one)) / (beta * d * d),
        theta,
        nu1: (one - theta) * (qq + one) / den,
        mu1: (one - theta) * d / den,
        nu2: (qq + one) / (qq * (p + one)),
        mu2: d / (qq * (p + one)),
    }
}

fn close(got: f64, want: Q) -> bool {
    let w = f(want);
    (got - w).abs() <= 1e-12 * w.abs().max(1e-300) || (got - w).abs() < 1e-13
}

fn params(p: f64, q: f64, n: u32, beta: f64) -> ProblemParams {
    ProblemParams { p, q, n, beta, ..ProblemParams::default() }
}

#[test]
fn quadratic_case_hand_values() {
    let e = compute_exponents(&params(2.0, 1.0, 1, 1.0)).unwrap();
    let hand = [
        (e.nu, 7.0),
        (e.mu, 4.0),
        (e.theta, 3.0 / 7.0),
        (e.nu1, 1.0 / 3.0),
        (e.mu1, 1.0 / 6.0),
        (e.nu2, 2.0 / 3.0),
        (e.mu2, 1.0 / 3.0),
        (e.beta0, 1.5),
        (e.alpha, 1.0),
    ];
    for (got, want) in hand {
        assert!(((got - want) / want).abs() <= 1e-12, "{got} vs {want}");
    }
    assert!(!e.corollary_applicable);
}

#[test]
fn default_case_matches_rational_oracle() {
    let e = compute_exponents(&params(1.5, 0.8, 1, 1.0)).unwrap();
    let x = exact(q(3, 2), q(4, 5), 1, q(1, 1));
    for (got, want) in [(e.nu, x.nu), (e.mu, x.mu), (e.beta0, x.beta0), (e.alpha, x.alpha)] {
        assert!(close(got, want), "{got} vs {}", f(want));
    }
    // nu = 11.673469..., mu = 7.040816..., beta0 = 1.904761...
    assert!((f(x.nu) - 11.673469).abs() < 1e-6);
    assert!((f(x.mu) - 7.040816).abs() < 1e-6);
    assert!((f(x.beta0) - 1.904762).abs() < 1e-6);
    assert!(e.corollary_applicable);
}

proptest! {
    #[test]
    fn matches_rational_arithmetic(
        pn in 11i128..40, qn in 1i128..30, bn in 1i128..40, n in 1i128..4,
    ) {
        prop_assume!(pn > qn);
        let (p, qq, beta) = (q(pn, 10), q(qn, 10), q(bn, 10));
        let e = compute_exponents(&params(f(p), f(qq), n as u32, f(beta))).unwrap();
        let x = exact(p, qq, n, beta);
        let pairs = [
            (e.alpha, x.alpha), (e.beta0, x.beta0), (e.nu, x.nu), (e.mu, x.mu), (e.theta, x.theta),
            (e.nu1, x.nu1), (e.mu1, x.mu1), (e.nu2, x.nu2), (e.mu2, x.mu2),
        ];
        for (got, want) in pairs {
            prop_assert!(close(got, want), "{} vs {}", got, f(want));
        }
    }

    #[test]
    fn exponents_decrease_in_beta(p in 1.1f64..4.0, qf in 0.05f64..1.0, b1 in 0.05f64..3.0, db in 0.01f64..1.0) {
        let qv = qf * (p - 0.01);
        let lo = compute_exponents(&params(p, qv, 1, b1)).unwrap();
        let hi = compute_exponents(&params(p, qv, 1, b1 + db)).unwrap();
        prop_assert!(hi.mu < lo.mu);
        prop_assert!(hi.alpha < lo.alpha);
        if b1 + db < (qv + 1.0) / (p - qv) {
            prop_assert!(hi.nu < lo.nu);
        }
        prop_assert_eq!(hi.theta, lo.theta);
    }
}
