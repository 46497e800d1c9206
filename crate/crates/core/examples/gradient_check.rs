//! Compare analytic gradients with central differences.
//!
//! cargo run --release --example gradient_check [op] [trials]

use dysample::analysis::gradcheck::{check_trials, CheckOp};

fn main() -> dysample::Result<()> {
    let mut args = std::env::args().skip(1);
    let ops = match args.next() {
        Some(name) => vec![CheckOp::from_name(&name)?],
        None => CheckOp::ALL.to_vec(),
    };
    let trials = args.next().map_or(Ok(3), |t| t.parse()).expect("trials must be an integer");
    for op in ops {
        let r = check_trials(op, trials, 0, 1e-6)?;
        println!(
            "{:<12} max rel {:.2e}  max abs {:.2e}  tolerance {:e}  {}",
            op.name(),
            r.max_rel_err,
            r.max_abs_err,
            op.tolerance(),
            if r.passes(op.tolerance()) { "ok" } else { "over tolerance" }
        );
    }
    Ok(())
}
