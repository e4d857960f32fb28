use flowcast_autodiff::{step_decay_lr, Adam, AdamConfig, Array, AutodiffError, Graph, ParamStore};

fn store_with(values: &[f64]) -> ParamStore {
    let mut s = ParamStore::new();
    s.add("w", Array::new(vec![values.len()], values.to_vec()).unwrap()).unwrap();
    s
}

#[test]
fn zero_gradient_leaves_parameters() {
    let mut s = store_with(&[1.0, -2.0]);
    let mut adam = Adam::new(&s, AdamConfig::default());
    for _ in 0..10 {
        adam.step(&mut s, &[Some(Array::zeros(&[2]))]).unwrap();
    }
    assert_eq!(s.get(s.id("w").unwrap()).data(), &[1.0, -2.0]);
}

#[test]
fn zero_learning_rate_leaves_parameters() {
    let mut s = store_with(&[1.0, -2.0]);
    let mut adam = Adam::new(&s, AdamConfig { lr: 0.0, ..AdamConfig::default() });
    adam.step(&mut s, &[Some(Array::new(vec![2], vec![3.0, -4.0]).unwrap())]).unwrap();
    assert_eq!(s.get(s.id("w").unwrap()).data(), &[1.0, -2.0]);
}

#[test]
fn constant_gradient_steps_approach_lr_sign() {
    // With a constant gradient the bias-corrected moments are exactly g and
    // g^2, so each step is lr * g / (|g| + eps).
    let lr = 1e-3;
    let g = [0.37, -2.5];
    let mut s = store_with(&[0.0, 0.0]);
    let mut adam = Adam::new(&s, AdamConfig { lr, ..AdamConfig::default() });
    let id = s.id("w").unwrap();
    let mut prev = s.get(id).data().to_vec();
    for step in 0..2000 {
        adam.step(&mut s, &[Some(Array::new(vec![2], g.to_vec()).unwrap())]).unwrap();
        let now = s.get(id).data().to_vec();
        if step > 100 {
            for j in 0..2 {
                let delta = now[j] - prev[j];
                let expected = -lr * g[j].signum();
                assert!((delta - expected).abs() < 1e-9 * 1e3 * lr, "step {step}: {delta} vs {expected}");
            }
        }
        prev = now;
    }
}

#[test]
fn non_finite_gradient_aborts_without_update() {
    let mut s = store_with(&[1.0]);
    let mut adam = Adam::new(&s, AdamConfig { lr: 0.1, ..AdamConfig::default() });
    let err = adam.step(&mut s, &[Some(Array::new(vec![1], vec![f64::NAN]).unwrap())]).unwrap_err();
    assert!(matches!(err, AutodiffError::NonFiniteGrad(ref n) if n == "w"));
    assert_eq!(s.get(s.id("w").unwrap()).data(), &[1.0]);
    assert_eq!(adam.steps(), 0);
}

#[test]
fn mismatched_gradient_shape_is_error() {
    let mut s = store_with(&[1.0, 2.0]);
    let mut adam = Adam::new(&s, AdamConfig::default());
    assert!(adam.step(&mut s, &[Some(Array::zeros(&[3]))]).is_err());
    assert!(adam.step(&mut s, &[]).is_err());
}

#[test]
fn adam_minimises_a_quadratic() {
    let mut s = store_with(&[4.0, -3.0]);
    let id = s.id("w").unwrap();
    let mut adam = Adam::new(&s, AdamConfig { lr: 0.05, ..AdamConfig::default() });
    let target = Array::new(vec![2], vec![1.0, 2.0]).unwrap();
    for _ in 0..2000 {
        let mut g = Graph::new();
        let w = g.param(&s, id);
        let loss = g.mse_loss(w, &target).unwrap();
        let grads = g.backward(loss).unwrap().for_store(&s);
        adam.step(&mut s, &grads).unwrap();
    }
    for (a, b) in s.get(id).data().iter().zip(target.data()) {
        assert!((a - b).abs() < 1e-3);
    }
}

#[test]
fn step_decay_values() {
    assert_eq!(step_decay_lr(1e-4, 1), 0.0001);
    assert!((step_decay_lr(1e-4, 2) - 0.00005).abs() < 1e-18);
    assert!((step_decay_lr(1e-4, 4) - 0.0000125).abs() < 1e-18);
}
