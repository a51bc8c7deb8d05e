use moldline_nn::optim::{Optimizer, OptimizerSpec};
use moldline_nn::{Param, Tensor};

fn scalar(v: f64) -> Param {
    Param::new(Tensor::new(vec![1], vec![v]).unwrap(), true)
}

fn run(spec: OptimizerSpec, w0: f64, grads: &[f64]) -> Vec<f64> {
    let mut p = scalar(w0);
    let mut opt = Optimizer::new(spec);
    grads
        .iter()
        .map(|&g| {
            p.zero_grad();
            p.grad_mut()[0] = g;
            opt.step(&mut [&mut p]);
            p.value.data()[0]
        })
        .collect()
}

#[test]
fn adam_first_update_is_normalised_step() {
    let (lr, eps) = (0.001, 1e-8);
    for g in [1.0, -1.0, 0.01, -0.01] {
        let w = run(OptimizerSpec::adam_default(), 0.0, &[g])[0];
        // Bias correction makes m̂ = g and v̂ = g², so the step is
        // lr·g/(|g| + ε).
        let exact = -lr * g / (g.abs() + eps);
        assert!((w - exact).abs() < 1e-9, "g={g}: {w} vs {exact}");
        // The sign form differs from the exact step by lr·ε/(|g|+ε).
        let sign_gap = lr * eps / (g.abs() + eps);
        assert!((w + lr * g.signum()).abs() <= sign_gap + 1e-15, "g={g}");
    }
}

#[test]
fn sgd_three_steps_by_hand() {
    let got = run(OptimizerSpec::Sgd { lr: 0.1 }, 1.0, &[0.5, -0.25, 1.0]);
    let mut w = 1.0;
    let mut want = Vec::new();
    w -= 0.1 * 0.5;
    want.push(w);
    w -= 0.1 * -0.25;
    want.push(w);
    w -= 0.1 * 1.0;
    want.push(w);
    assert_eq!(got, want);
    for (a, b) in got.iter().zip([0.95, 0.975, 0.875]) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn rmsprop_three_steps_by_hand() {
    let (lr, decay, eps) = (0.01, 0.9, 1e-10);
    let got = run(OptimizerSpec::RmsProp { lr, decay, eps }, 0.5, &[2.0, -1.0, 0.5]);
    // s1 = 0.1·4 = 0.4
    // s2 = 0.9·0.4 + 0.1·1 = 0.46
    // s3 = 0.9·0.46 + 0.1·0.25 = 0.439
    let s1: f64 = (1.0 - decay) * 4.0;
    let s2: f64 = decay * s1 + (1.0 - decay) * 1.0;
    let s3: f64 = decay * s2 + (1.0 - decay) * 0.25;
    let w1 = 0.5 - lr * 2.0 / (s1.sqrt() + eps);
    let w2 = w1 - lr * -1.0 / (s2.sqrt() + eps);
    let w3 = w2 - lr * 0.5 / (s3.sqrt() + eps);
    assert_eq!(got, vec![w1, w2, w3]);
    assert!((s2 - 0.46).abs() < 1e-15 && (s3 - 0.439).abs() < 1e-15);
    assert!((w1 - (0.5 - 0.02 / 0.4_f64.sqrt())).abs() < 1e-10);
}

#[test]
fn adam_three_steps_by_hand() {
    let (lr, b1, b2, eps) = (0.001, 0.9, 0.999, 1e-8);
    let grads = [0.3, -0.1, 0.2];
    let got = run(OptimizerSpec::Adam { lr, beta1: b1, beta2: b2, eps }, 1.0, &grads);
    let (mut m, mut v, mut w) = (0.0, 0.0, 1.0);
    let mut want = Vec::new();
    for (t, g) in grads.iter().enumerate() {
        let t = t as i32 + 1;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mh = m / (1.0 - b1.powi(t));
        let vh = v / (1.0 - b2.powi(t));
        w -= lr * mh / (f64::sqrt(vh) + eps);
        want.push(w);
    }
    assert_eq!(got, want);
}

#[test]
fn state_survives_serialization() {
    let spec = OptimizerSpec::adam_default();
    let mut p = scalar(0.2);
    let mut opt = Optimizer::new(spec);
    for g in [0.4, -0.3] {
        p.zero_grad();
        p.grad_mut()[0] = g;
        opt.step(&mut [&mut p]);
    }
    let mut restored: Optimizer = serde_json::from_str(&serde_json::to_string(&opt).unwrap()).unwrap();
    assert_eq!(restored, opt);
    let mut q = p.clone();
    for (o, x) in [(&mut opt, &mut p), (&mut restored, &mut q)] {
        x.zero_grad();
        x.grad_mut()[0] = 0.7;
        o.step(&mut [x]);
    }
    assert_eq!(p.value.data(), q.value.data());
}
