//! Raw interference visibility against the single-photon to laser intensity
//! ratio, and the error rate a given visibility implies.

use relay_qkd::interference::{error_from_visibility, raw_visibility, InterferenceDecomposition, VisibilityModel};

fn main() -> relay_qkd::Result<()> {
    let base = VisibilityModel {
        v_corrected: 0.95,
        g2: 0.0015,
        sigma_a: 1.0,
        t_g: 1.0,
        t_p: 1.0,
        ratio_qd_over_laser: 1.0,
    };
    println!("ratio   V_r(g2=0)  V_r(g2=0.0015)");
    for ratio in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0] {
        let pure = VisibilityModel { g2: 0.0, ratio_qd_over_laser: ratio, ..base };
        let real = VisibilityModel { ratio_qd_over_laser: ratio, ..base };
        println!("{ratio:>5}   {:.4}     {:.4}", raw_visibility(&pure), raw_visibility(&real));
    }
    println!("best ratio at g2=0.0015: {:.2}", base.optimal_ratio());

    for v in [1.0, 0.95, 0.9] {
        let d = InterferenceDecomposition {
            p0: 1.0 - 1e-6,
            p_interfering: 0.0,
            p_noninterfering: 0.0,
            alpha2: 0.002,
            eta: 0.1,
            v,
        };
        let e = error_from_visibility(&d)?;
        println!("V = {v}: error {:.4}{}", e.value, if e.out_of_domain { " (clamped)" } else { "" });
    }
    Ok(())
}
