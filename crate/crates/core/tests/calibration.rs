use pepscan_core::calibration::{calibrate_spectrum, CalibrationOptions, CalibrationResult};
use pepscan_core::config::AnalysisConfig;
use pepscan_core::event_io::HistogramMode;
use pepscan_core::model::{default_line_table, EnergyScale, PhysicsConstants, ResponseModel, RunMeta, SECONDS_PER_DAY};
use pepscan_core::pipeline::selected_spectrum;
use pepscan_core::sim::{simulate_run, InjectionConfig, RunSimulation, SimSetup, SourceModel};

const DAY_NS: u64 = 86_400_000_000_000;

fn simulate(response: &ResponseModel<f64>, days: f64, seed: u64) -> RunSimulation<f64> {
    let setup = SimSetup {
        source: SourceModel::published_default(&default_line_table(), response).unwrap(),
        injection: InjectionConfig::off(),
        response: response.clone(),
        efficiency: 0.01,
        consts: PhysicsConstants::default(),
    };
    let run = RunMeta::current_off("cal", days * SECONDS_PER_DAY).unwrap();
    simulate_run(&setup, &run, seed).unwrap()
}

fn calibrate<I>(events: I, response: &ResponseModel<f64>, live: f64) -> CalibrationResult<f64>
where
    I: IntoIterator<Item = pepscan_core::event_io::EventRecord>,
{
    let raw = selected_spectrum(events, &HistogramMode::raw(), live, &AnalysisConfig::default()).unwrap();
    calibrate_spectrum(&raw, &default_line_table(), &CalibrationOptions::for_response(response)).unwrap()
}

#[test]
fn halves_of_a_run_agree() {
    let response = ResponseModel {
        scale: EnergyScale::new(1.7, -120.0).unwrap(),
        ..ResponseModel::default()
    };
    let sim = simulate(&response, 2.0, 31);
    let first = calibrate(sim.events().filter(|e| e.timestamp_ns < DAY_NS), &response, SECONDS_PER_DAY);
    let second = calibrate(sim.events().filter(|e| e.timestamp_ns >= DAY_NS), &response, SECONDS_PER_DAY);
    let combined = first.gain_error.hypot(second.gain_error);
    let diff = (first.gain_ev_per_channel - second.gain_ev_per_channel).abs();
    assert!(diff < 3.0 * combined, "gains {} and {} differ by {diff}, sigma {combined}", first.gain_ev_per_channel, second.gain_ev_per_channel);
    assert!(first.within_threshold && second.within_threshold);
}

#[test]
fn recovers_scale_and_resolution() {
    for (gain, offset, seed) in [(1.0, 0.0, 41), (0.8, 150.0, 42), (3.0, -500.0, 43)] {
        let response = ResponseModel {
            scale: EnergyScale::new(gain, offset).unwrap(),
            ..ResponseModel::default()
        };
        let c = calibrate(simulate(&response, 1.0, seed).events(), &response, SECONDS_PER_DAY);
        assert!((c.gain_ev_per_channel / gain - 1.0).abs() < 1e-3, "gain {} vs {gain}", c.gain_ev_per_channel);
        // Offset is an extrapolation from 4.5 keV; hold it to its own error.
        assert!((c.offset_ev - offset).abs() < 3.0 * c.offset_error, "offset {} +/- {} vs {offset}", c.offset_ev, c.offset_error);
        assert!((c.resolution_fwhm_at_8kev_ev - 200.0).abs() < 5.0, "FWHM {}", c.resolution_fwhm_at_8kev_ev);
        assert!(c.max_abs_residual_ev < 5.0);
    }
}

#[test]
fn calibrated_scale_inverts_digitization() {
    let response = ResponseModel {
        scale: EnergyScale::new(2.5, -300.0).unwrap(),
        ..ResponseModel::default()
    };
    let c = calibrate(simulate(&response, 1.0, 51).events(), &response, SECONDS_PER_DAY);
    let scale = c.scale();
    let mut e = 3000.0;
    while e <= 10_000.0 {
        let channel = scale.channel_of(e).round();
        assert!((scale.energy_of(channel) - e).abs() <= scale.gain_ev_per_channel / 2.0 + 1e-9);
        e += 7.3;
    }
}

#[test]
fn threshold_flags_a_misassigned_line() {
    let response = ResponseModel::default();
    let sim = simulate(&response, 0.5, 61);
    let raw = selected_spectrum(sim.events(), &HistogramMode::raw(), SECONDS_PER_DAY / 2.0, &AnalysisConfig::default()).unwrap();
    // Shift the reference energy of a cross-check line by 40 eV.
    let lines: Vec<_> = default_line_table()
        .iter()
        .cloned()
        .map(|mut l| {
            if l.label == "mn_kb" {
                l.energy_ev += 40.0;
            }
            l
        })
        .collect();
    let table = pepscan_core::model::LineTable::new(lines).unwrap();
    let c = calibrate_spectrum(&raw, &table, &CalibrationOptions::for_response(&response)).unwrap();
    assert!(!c.within_threshold);
    assert!(c.max_abs_residual_ev > 30.0);
}
