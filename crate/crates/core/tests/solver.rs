mod common;

use common::{observed_orders, Manufactured};

#[test]
fn manufactured_solution_converges_at_second_order_1d() {
    let m = Manufactured { d: 1.0, delta: 2.0, q: 0.5, q_gamma: 0.25, two_d: false };
    let errs: Vec<f64> = [32, 64, 128].iter().map(|&n| m.error(&m.grid(n, 1.0))).collect();
    let orders = observed_orders(&errs);
    println!("1d errors {errs:?} orders {orders:?}");
    assert!(orders.iter().all(|&p| p >= 1.9), "{orders:?}");
}

#[test]
fn manufactured_solution_converges_at_second_order_2d() {
    let m = Manufactured { d: 1.0, delta: 2.0, q: 0.5, q_gamma: 0.25, two_d: true };
    let errs: Vec<f64> = [16, 32, 64].iter().map(|&n| m.error(&m.grid(n, 0.5))).collect();
    let orders = observed_orders(&errs);
    println!("2d errors {errs:?} orders {orders:?}");
    assert!(orders.iter().all(|&p| p >= 1.9), "{orders:?}");
}
