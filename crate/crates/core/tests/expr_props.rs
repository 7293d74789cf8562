use dflab::parse;
use proptest::prelude::*;

const EXPRS: &[(&str, usize)] = &[
    ("exp(x1*y1) + sin(x2)^3 - log(2 + x1^2) * sqrt(1 + y2^2) / (3 + cos(x1 - y2))", 2),
    ("abs2(z1) + abs2(z2)^2 - 1", 2),
    ("(x1^2 + y1^2)^1.5 + x1*y2 - 0.3*x2^4", 2),
    ("exp(-abs2(z1)) * cos(y1) + 2^x1 - y1^-2", 1),
    ("abs2(z1)*abs2(z2) + re(z3)*im(z1) - sqrt(4 + abs2(z3)) + x3^3*y2", 3),
];

fn fd_grad(f: &dyn Fn(&[f64]) -> f64, p: &[f64], k: usize, h: f64) -> f64 {
    let d = |h: f64| {
        let mut a = p.to_vec();
        let mut b = p.to_vec();
        a[k] += h;
        b[k] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    };
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn fd_hess(f: &dyn Fn(&[f64]) -> f64, p: &[f64], i: usize, j: usize, h: f64) -> f64 {
    let d = |h: f64| {
        let at = |si: f64, sj: f64| {
            let mut q = p.to_vec();
            q[i] += si * h;
            q[j] += sj * h;
            f(&q)
        };
        (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h)
    };
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.3f64..0.9, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jets_match_richardson_differences(which in 0..EXPRS.len(), raw in point(6)) {
        let (src, n) = EXPRS[which];
        let e = parse(src, n).unwrap();
        let p = &raw[..2 * n];
        let f = |q: &[f64]| e.value(q).unwrap();
        let jet = e.eval_jet2(p).unwrap();
        prop_assert!(rel(jet.value, f(p)) < 1e-14);
        for k in 0..2 * n {
            let fd = fd_grad(&f, p, k, 1e-3);
            prop_assert!(rel(jet.grad()[k], fd) < 1e-6, "grad {k}: {} vs {fd}", jet.grad()[k]);
        }
        for i in 0..2 * n {
            for j in 0..2 * n {
                let fd = fd_hess(&f, p, i, j, 2e-3);
                prop_assert!(rel(jet.hess(i, j), fd) < 1e-6, "hess {i}{j}: {} vs {fd}", jet.hess(i, j));
            }
        }
    }

    #[test]
    fn hessian_is_symmetric(which in 0..EXPRS.len(), raw in point(6)) {
        let (src, n) = EXPRS[which];
        let e = parse(src, n).unwrap();
        let jet = e.eval_jet2(&raw[..2 * n]).unwrap();
        let h = jet.hess_matrix();
        let d = 2 * n;
        for i in 0..d {
            for j in 0..d {
                prop_assert_eq!(h[i * d + j], h[j * d + i]);
            }
        }
    }

    #[test]
    fn jets_are_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, raw in point(4)) {
        let f = parse(EXPRS[0].0, 2).unwrap();
        let g = parse(EXPRS[2].0, 2).unwrap();
        let combo = parse(&format!("{a} * ({}) + {b} * ({})", EXPRS[0].0, EXPRS[2].0), 2).unwrap();
        let (jf, jg, jc) = (
            f.eval_jet2(&raw).unwrap(),
            g.eval_jet2(&raw).unwrap(),
            combo.eval_jet2(&raw).unwrap(),
        );
        let lin = jf.scale(a).add(&jg.scale(b));
        prop_assert!(rel(jc.value, lin.value) < 1e-13);
        for k in 0..4 {
            prop_assert!(rel(jc.grad()[k], lin.grad()[k]) < 1e-13);
            for l in 0..4 {
                prop_assert!(rel(jc.hess(k, l), lin.hess(k, l)) < 1e-13);
            }
        }
    }
}

#[test]
fn evaluation_errors_are_reported() {
    let e = parse("log(x1)", 1).unwrap();
    assert!(e.eval_jet2(&[-1.0, 0.0]).is_err());
    let e = parse("sqrt(x1)", 1).unwrap();
    assert!(e.eval_jet2(&[-1.0, 0.0]).is_err());
    assert!(parse("x2", 1).is_err());
}
