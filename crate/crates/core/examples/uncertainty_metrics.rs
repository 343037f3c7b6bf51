//! Image and uncertainty metrics on a synthetic prediction: PSNR, SSIM and
//! AUSE for an informative, a constant and a shuffled uncertainty map.

use evnerf::image::Image;
use evnerf::metrics::{ause, default_fraction_grid, pixel_errors, psnr, sparsification_curve, ssim, ErrorKind};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() {
    let (w, h) = (48, 48);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gt = Image::from_pixels(
        w,
        h,
        (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as f64 / w as f64, (i / w) as f64 / h as f64);
                [x, y, 0.5 * (x + y)]
            })
            .collect(),
    );
    // noise level grows from left to right; the true std is the ideal uncertainty
    let sigma: Vec<f64> = (0..w * h).map(|i| 0.01 + 0.15 * (i % w) as f64 / w as f64).collect();
    let pred = Image::from_pixels(
        w,
        h,
        gt.pixels
            .iter()
            .zip(&sigma)
            .map(|(p, &s)| {
                let n = Normal::new(0.0, s).unwrap();
                p.map(|c| c + n.sample(&mut rng))
            })
            .collect(),
    );
    println!("PSNR {:.2} dB  SSIM {:.4}", psnr(&pred, &gt), ssim(&pred, &gt));

    let grid = default_fraction_grid();
    let err = pixel_errors(&pred.pixels, &gt.pixels, ErrorKind::Rmse);
    let abs_err = pixel_errors(&pred.pixels, &gt.pixels, ErrorKind::Mae);
    let mut shuffled = sigma.clone();
    shuffled.shuffle(&mut rng);
    let constant = vec![1.0; sigma.len()];
    for (name, u) in [("noise std", &sigma), ("constant", &constant), ("shuffled", &shuffled)] {
        println!(
            "AUSE-RMSE {:<10} {:.4}   AUSE-MAE {:.4}",
            name,
            ause(u, &err, ErrorKind::Rmse, &grid),
            ause(u, &abs_err, ErrorKind::Mae, &grid)
        );
    }
    // ranking by the error itself is the oracle curve, so its area is zero
    println!(
        "AUSE-RMSE {:<10} {:.4}   AUSE-MAE {:.4}",
        "oracle",
        ause(&err, &err, ErrorKind::Rmse, &grid),
        ause(&abs_err, &abs_err, ErrorKind::Mae, &grid)
    );
    let curve = sparsification_curve(&sigma, &err, ErrorKind::Rmse, &grid, true);
    println!("\nsparsification by noise std (fraction removed -> normalized RMSE):");
    for k in (0..grid.len()).step_by(20) {
        println!("  {:.2} -> {:.3}", curve.fractions[k], curve.errors[k]);
    }
}
