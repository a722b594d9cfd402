//! `rpavg lemmas`: deterministic sequence-bound verification at default
//! parameters, printed as a table.

use rpavg_core::schedule::{
    default_increment_window, iterate_lemma_a3, verify_eps_increment_decay, verify_lemma_a4,
    ScheduleError, StepSchedule,
};

use crate::error::CliError;

const SLOPE_TOLERANCE: f64 = 0.02;

pub fn cmd_lemmas() -> Result<(), CliError> {
    let mut failures: Vec<String> = Vec::new();
    println!(
        "{:<26} {:<16} {:>18} {:>24} {:>8}",
        "verification", "parameters", "value", "target", "status"
    );

    // Shear-increment decay: ε_{μ,n+1} − ε_{μ,n} decays like n^{β−2}.
    for &beta in &[0.6, 0.75, 0.9] {
        for &mu in &[0.5, 1.0, 4.0] {
            let sched = StepSchedule::new(1.0, beta).map_err(internal)?;
            let (lo, hi) = default_increment_window(&sched, mu);
            let slope = verify_eps_increment_decay(&sched, mu, lo, hi, 40).map_err(internal)?;
            let target = beta - 2.0;
            let ok = (slope - target).abs() <= SLOPE_TOLERANCE;
            print_row(
                &mut failures,
                "shear-increment decay",
                &format!("β={beta}, μ={mu}"),
                &format!("slope {slope:+.4}"),
                &format!("β−2 = {target:+.2} ± {SLOPE_TOLERANCE}"),
                ok,
            );
        }
    }

    // Contraction averages: with forcing γ_n/n the weighted recursion keeps
    // n·u_n bounded, so u_n inherits the 1/n rate.
    let sched = StepSchedule::new(1.0, 0.75).map_err(internal)?;
    let a3 = iterate_lemma_a3(&sched, 1.0, |n| sched.step(n) / n as f64, 1.0, 2, 1_000_000)
        .map_err(internal)?;
    let a3_ok = a3.sup_n_u.is_finite() && a3.terminal_n_u <= a3.sup_n_u + 1e-12;
    print_row(
        &mut failures,
        "contraction average",
        "β=0.75, μ=1",
        &format!("sup n·u = {:.4}", a3.sup_n_u),
        &format!("bounded (terminal {:.4})", a3.terminal_n_u),
        a3_ok,
    );

    // Perturbed contraction: the smallest admissible constant C* in
    // u_n ≤ V/n + C n^{−(r ∧ (q−1))} must be horizon-stable.
    let a4_small = verify_lemma_a4(1.0, 1.0, 2.0, 2.25, 100_000).map_err(internal)?;
    let a4 = verify_lemma_a4(1.0, 1.0, 2.0, 2.25, 1_000_000).map_err(internal)?;
    let drift = ((a4.c_star - a4_small.c_star) / a4_small.c_star).abs();
    let a4_ok = drift <= 0.01 && (a4.c_star_at_tenth - a4.c_star).abs() <= 1e-12;
    print_row(
        &mut failures,
        "perturbed contraction",
        "V=1, c̄=1, q=2.25",
        &format!("C* = {:.4}", a4.c_star),
        &format!("drift {drift:.2e} ≤ 1e-2"),
        a4_ok,
    );

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(format!(
            "sequence verification breached tolerance: {}",
            failures.join(", ")
        )))
    }
}

fn print_row(
    failures: &mut Vec<String>,
    what: &str,
    params: &str,
    value: &str,
    target: &str,
    ok: bool,
) {
    println!(
        "{what:<26} {params:<16} {value:>18} {target:>24} {:>8}",
        if ok { "ok" } else { "BREACH" }
    );
    if !ok {
        failures.push(format!("{what} ({params})"));
    }
}

/// Default parameters satisfy every precondition, so an error here means a
/// breached verification environment, not a usage mistake.
fn internal(e: ScheduleError) -> CliError {
    CliError::Violation(format!("sequence verification failed to run: {e}"))
}
