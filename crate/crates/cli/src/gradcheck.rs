//! `dwnet gradcheck`: finite-difference check of a preset, usually scaled down.

use dwnet::gradcheck::{gradient_check_with, CheckSetup};
use dwnet::{build_network, NetworkSpec, Rng};

use crate::{CliError, GradcheckArgs};

pub const TOLERANCE: f64 = 1e-4;

pub fn run(args: &GradcheckArgs) -> Result<(), CliError> {
    let mut spec = NetworkSpec::preset(&args.preset, args.double_weight)
        .map_err(CliError::runtime)?
        .scaled(args.scale)
        .map_err(CliError::runtime)?;
    if let Some(w) = &args.hidden_widths {
        spec = spec.with_hidden_widths(w).map_err(CliError::runtime)?;
    }
    spec.seed = args.seed;
    spec.validate().map_err(CliError::runtime)?;
    let model = build_network(&spec).map_err(CliError::runtime)?;
    let count = model.parameter_count();
    if count > dwnet::GRADCHECK_PARAM_LIMIT {
        return Err(CliError::Usage(format!(
            "{} at scale {} has {count} parameters, above the gradient-check limit of {}; use a smaller --scale",
            args.preset,
            args.scale,
            dwnet::GRADCHECK_PARAM_LIMIT
        )));
    }
    let mut setup = CheckSetup::new(&model, &mut Rng::new(args.seed), args.batch).map_err(CliError::runtime)?;
    if let Some(eps) = args.epsilon {
        setup.epsilon = eps;
    }
    let corrupt = args.corrupt_backward;
    let report = gradient_check_with(&setup.model, &setup.x, &setup.target, setup.epsilon, |grads| {
        if corrupt {
            for g in grads.iter_mut() {
                *g = g.scale(1.01);
            }
        }
    })
    .map_err(CliError::runtime)?;

    println!("{count} parameters, epsilon {:e}", report.epsilon);
    println!(
        "{:<16} {:>8} {:>14} {:>14}",
        "tensor", "len", "max rel err", "max abs err"
    );
    for t in &report.tensors {
        println!(
            "{:<16} {:>8} {:>14.3e} {:>14.3e}",
            t.name, t.len, t.max_relative_error, t.max_abs_error
        );
    }
    if report.passes(TOLERANCE) {
        println!("PASS (all below {TOLERANCE:e})");
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "gradient check failed: max relative error {:.3e} >= {TOLERANCE:e}",
            report.max_relative_error()
        )))
    }
}
