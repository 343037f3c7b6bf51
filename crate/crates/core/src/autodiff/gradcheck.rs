use super::{AutodiffError, Gradients, ParamStore, Tape, Var};

/// Compares reverse-mode gradients of a tape-built scalar function against
/// central differences with step `h`, returning the largest
/// `|analytic - numeric| / (|analytic| + |numeric| + 1e-12)` over all
/// parameter entries.
///
/// `build` must record the function on the supplied tape and return its
/// `1×1` root. The store is restored to its original values on return.
pub fn check_gradients<F>(store: &mut ParamStore, h: f64, build: F) -> Result<f64, AutodiffError>
where
    F: Fn(&mut Tape, &ParamStore) -> Var,
{
    if !(1e-7..=1e-3).contains(&h) {
        return Err(AutodiffError::BadStep(h));
    }
    let mut tape = Tape::new();
    let root = build(&mut tape, store);
    let mut analytic = Gradients::zeros_like(store);
    tape.backward(root, &mut analytic)?;

    let eval = |tape: &mut Tape, store: &ParamStore| {
        tape.reset();
        let root = build(tape, store);
        tape.scalar_value(root)
    };

    let mut worst = 0.0f64;
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for k in 0..store.value(id).len() {
            let orig = store.value(id).as_slice().expect("contiguous parameter")[k];
            store.value_mut(id).as_slice_mut().unwrap()[k] = orig + h;
            let fp = eval(&mut tape, store);
            store.value_mut(id).as_slice_mut().unwrap()[k] = orig - h;
            let fm = eval(&mut tape, store);
            store.value_mut(id).as_slice_mut().unwrap()[k] = orig;
            if !fp.is_finite() || !fm.is_finite() {
                return Err(AutodiffError::NonFiniteProbe {
                    param: store.name(id).to_string(),
                    index: k,
                });
            }
            let numeric = (fp - fm) / (2.0 * h);
            let exact = analytic.get(id).as_slice().unwrap()[k];
            let rel = (exact - numeric).abs() / (exact.abs() + numeric.abs() + 1e-12);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
