//! Reverse-mode gradients against central differences: first a tiny
//! hand-built expression, then the full evidential training loss through
//! the renderer and a two-layer field.

use evnerf::autodiff::{check_gradients, ParamStore};
use evnerf::checks;
use ndarray::array;

fn main() {
    let mut store = ParamStore::new();
    let x = store.insert("x", array![[0.3, -1.2], [2.0, 0.7]]);
    let err = check_gradients(&mut store, 1e-6, |t, s| {
        let v = t.param(s, x);
        let e = t.exp(v);
        let sp = t.softplus(v);
        let p = t.mul(e, sp);
        t.sum_all(p)
    })
    .expect("finite probes");
    println!("sum(exp(x) * softplus(x)): max relative error {err:.2e}");

    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    println!("{}", checks::gradient_suite(seed));
}
