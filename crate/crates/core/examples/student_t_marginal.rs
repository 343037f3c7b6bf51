//! The pixel likelihood: closed-form Student-t marginal and NLL against
//! numerical integration of the Normal x Normal-Inverse-Gamma hierarchy.

use evnerf::evidential::oracle::{quadrature_marginal_density, student_t_logpdf};
use evnerf::evidential::{nig_moments, nig_to_student_t, nll_loss, NigParams};

fn main() {
    let p = NigParams::new(0.4, 2.0, 3.0, 0.2).unwrap();
    let t = nig_to_student_t(&p).unwrap();
    let m = nig_moments(&p).unwrap();
    println!("NIG {p:?}");
    println!("Student-t loc {} scale^2 {:.5} dof {}", t.loc, t.scale2, t.dof);
    println!("AU {:.5} EU {:.5} U {:.5}\n", m.aleatoric, m.epistemic, m.total);
    println!("{:>6} {:>14} {:>14} {:>10} {:>10}", "c", "t density", "quadrature", "nll", "-ln quad");
    for k in 0..9 {
        let c = -0.4 + 0.2 * k as f64;
        let quad = quadrature_marginal_density(c, &p);
        println!(
            "{c:>6.2} {:>14.9} {quad:>14.9} {:>10.6} {:>10.6}",
            student_t_logpdf(c, &t).exp(),
            nll_loss(c, &p).unwrap(),
            -quad.ln()
        );
    }
}
