use std::fmt::Write as _;

use super::bound::LimitResult;
use crate::model::{PhysicsConstants, RunMeta, SECONDS_PER_DAY};
use crate::Real;

/// Plain-text listing of every intermediate of the limit computation.
pub fn audit_report<T: Real>(limit: &LimitResult<T>, run: &RunMeta<T>, consts: &PhysicsConstants<T>) -> String {
    let f = |x: T| x.as_f64();
    let d = &limit.delta;
    let mut out = String::new();
    let mut line = |label: &str, value: String| {
        let _ = writeln!(out, "{label:<28}{value}");
    };
    line("N_on", format!("{:.0} +/- {:.0}", f(d.n_on.value), f(d.n_on.sigma)));
    line("N_off (raw)", format!("{:.0} +/- {:.1}", f(d.n_off_raw.value), f(d.n_off_raw.sigma)));
    line(
        "live-time normalization",
        format!("x {:.6} ({} errors)", f(d.normalization_factor), d.error_mode.label()),
    );
    line(
        "N_off (normalized)",
        format!("{:.0} +/- {:.0}", f(d.n_off_normalized.value), f(d.n_off_normalized.sigma)),
    );
    line(
        "Delta N_X",
        format!("{:.0} +/- {:.0}  (exact {:.3} +/- {:.3})", f(d.delta.value), f(d.delta.sigma), f(d.delta.value), f(d.delta.sigma)),
    );
    line("current I [A]", format!("{}", f(run.current_a)));
    line(
        "live time [s]",
        format!("{} ({:.3} d)", f(run.live_time_s), f(run.live_time_s) / SECONDS_PER_DAY),
    );
    line("electron charge e [C]", format!("{:e}", f(consts.electron_charge_c)));
    line("N_new = I dt / e", format!("{:.4e}", f(limit.n_new)));
    line("strip length D [cm]", format!("{}", f(consts.strip_length_cm)));
    line("mean free path mu [cm]", format!("{:e}", f(consts.electron_mean_free_path_cm)));
    line("N_int = D / mu", format!("{:.4e}", f(limit.n_int)));
    line("capture fraction", format!("{}", f(limit.capture_fraction)));
    line("detection efficiency", format!("{}", f(limit.efficiency)));
    line("denominator", format!("{:.4e}", f(limit.denominator)));
    line(
        &format!("excess bound ({})", limit.convention.label()),
        format!("{:.3} (n_sigma = {})", f(limit.excess_bound), f(limit.n_sigma)),
    );
    line(
        "beta^2/2 <=",
        format!(
            "{:.1e}  ({:.4e}, {})",
            f(limit.beta2_over_2_limit),
            f(limit.beta2_over_2_limit),
            limit.confidence_label
        ),
    );
    out
}
