//! A tour of the reverse-mode tensor core: build a small expression, run
//! backward, and compare every gradient against central finite differences.

use mindeeg::gradcheck;
use mindeeg::Tensor;

fn main() {
    // f(x) = sum((sigmoid(x W) - y)^2) for a fixed W and target y
    let w = Tensor::new(3, 2, vec![0.4, -0.3, 0.8, 0.1, -0.5, 0.6]);
    let y = Tensor::new(2, 2, vec![0.2, 0.7, 0.5, 0.1]);
    let x0 = vec![0.3, -0.8, 0.5, 0.9, -0.2, 0.4];

    let x = Tensor::param(2, 3, x0.clone());
    let loss = x.matmul(&w).sigmoid().sub(&y).sumsq();
    println!("loss = {:.6}", loss.item());
    loss.backward();

    let mut f = |v: &[f64]| {
        Tensor::new(2, 3, v.to_vec())
            .matmul(&w)
            .sigmoid()
            .sub(&y)
            .sumsq()
            .item()
    };
    let numeric = gradcheck::finite_diff(&mut f, &x0, 1e-6);
    let analytic = x.grad();
    println!("{:>4} {:>14} {:>14} {:>10}", "i", "analytic", "numeric", "rel err");
    for i in 0..x0.len() {
        println!(
            "{i:>4} {:>14.8} {:>14.8} {:>10.2e}",
            analytic[i],
            numeric[i],
            gradcheck::rel_err(analytic[i], numeric[i])
        );
    }
    println!("max rel err = {:.2e}", gradcheck::max_rel_err(&analytic, &numeric));

    // one gradient step reduces the loss
    x.sgd_update(0.1);
    let after = x.matmul(&w).sigmoid().sub(&y).sumsq();
    println!("after one SGD step: loss = {:.6}", after.item());
}
