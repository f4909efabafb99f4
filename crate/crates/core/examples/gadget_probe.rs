use rug::Rational;
use svplab_core::gadgets::*;
use svplab_core::real::NormExponent;

fn main() {
    let t0 = std::time::Instant::now();
    let p = NormExponent::new(3.0).unwrap();
    let gp = integer_gadget_params(p, 0.5, 128).unwrap();
    println!("params: t*={} eps={} beta={:.6} alpha={:.6} C_r^p={:.6} ({:?})",
        gp.t_star, gp.eps, gp.beta.to_f64(), gp.theta_ratio.to_f64(), gp.c_r_pow.to_f64(), t0.elapsed());
    let eta = Rational::from((1, 2));
    let opts = ScaleOptions { allow_small: true, n_dagger_override: None, validate: true };
    let t1 = std::time::Instant::now();
    match scale_gadget(&gp, 6, 4, &eta, &opts, 128) {
        Ok(sg) => {
            println!("scaled: n_dagger={} c_dagger={} rpow={} ({:?})", sg.n_dagger, sg.c_dagger, sg.rpow.to_f64(), t1.elapsed());
            let t2 = std::time::Instant::now();
            let sides = gadget_side_bounds(&sg, 128).unwrap();
            println!("sides: a_hi={:e} g_lo={:e} lhs*2^m<rhs: {:?} ({:?})",
                sides.a_hi.to_f64(), sides.g_lo.to_f64(),
                sides.a_hi.mul_f64(64.0).lt_certified(&sides.g_lo), t2.elapsed());
        }
        Err(e) => println!("scale failed: {e} ({:?})", t1.elapsed()),
    }
}
