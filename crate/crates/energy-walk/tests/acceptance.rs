//! Acceptance battery: one test per criterion, each printing a single
//! pass/fail line (visible under `--nocapture`; failures also panic).

use energy_walk::classical::{
    build_transition_matrix, classical_step, classical_trajectory, detailed_balance_rates,
    kraus_operators, spectral_gap, stationary_closed_form, stationary_numeric, StationaryForm,
};
use energy_walk::collision::{
    collision_step_closed, collision_step_dilated, first_order_state, ChannelConfig,
};
use energy_walk::diagnostics::{
    asymptotic_deviation, fit_decay_rate, gibbs_populations, run_classical_trajectory,
    run_quantum_trajectory, total_variation, trace_distance, DeviationMethod,
};
use energy_walk::ladder::{
    dephase, embed_diagonal, extract_populations, gaussian_population, EnergySpectrum,
    PopulationVector, TransitionRates,
};
use energy_walk::linalg::{random_density_operator, trace_norm_hermitian};
use energy_walk::scenario::{preset, run_scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, result: Result<(), String>) {
    match &result {
        Ok(()) => println!("criterion {id:02} ({name}): pass"),
        Err(msg) => println!("criterion {id:02} ({name}): FAIL - {msg}"),
    }
    if let Err(msg) = result {
        panic!("criterion {id} failed: {msg}");
    }
}

fn std_rates(levels: usize) -> TransitionRates {
    TransitionRates::constant(0.2, 0.1, 0.7, levels).unwrap()
}

#[test]
fn criterion_01_channel_oracle_equivalence() {
    report(1, "closed form matches dilation", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for levels in [4usize, 8, 12] {
            let rates = std_rates(levels);
            for mu in [0.0, 0.3, 0.7, 1.0] {
                let cfg = ChannelConfig::new(rates.clone(), mu, levels).unwrap();
                for k in 0..100 {
                    let rho = random_density_operator(levels, &mut rng).unwrap();
                    let closed = collision_step_closed(&rho, &cfg).unwrap();
                    let dilated = collision_step_dilated(&rho, &cfg).unwrap();
                    let dev =
                        trace_norm_hermitian(&(closed.matrix() - dilated.matrix())).unwrap();
                    if dev >= 1e-12 {
                        return Err(format!(
                            "levels {levels} mu {mu} state {k}: deviation {dev:e}"
                        ));
                    }
                }
            }
        }
        Ok(())
    })());
}

#[test]
fn criterion_02_classical_oracle_equivalence() {
    report(2, "classical step matches matrix and Kraus oracles", (|| {
        let levels = 51;
        let rates = std_rates(levels);
        let matrix = build_transition_matrix(&rates).unwrap();
        let kraus = kraus_operators(&rates, levels).unwrap();
        let mut pop = gaussian_population(2.0, 2.0, levels).unwrap();
        for step in 0..500 {
            let by_step = classical_step(&pop, &rates).unwrap();
            let by_matrix = matrix.apply(&pop).unwrap();
            let rho_next = energy_walk::ladder::DensityOperator::with_psd_floor(
                kraus.apply(embed_diagonal(&pop).matrix()),
                energy_walk::ladder::PSD_FLOOR,
            )
            .unwrap();
            let by_kraus = extract_populations(&rho_next).unwrap();
            let dm = total_variation(&by_step, &by_matrix).unwrap();
            let dk = total_variation(&by_step, &by_kraus).unwrap();
            if dm >= 1e-12 || dk >= 1e-12 {
                return Err(format!("step {step}: matrix dev {dm:e}, Kraus dev {dk:e}"));
            }
            pop = by_step;
        }
        Ok(())
    })());
}

#[test]
fn criterion_03_stationary_closed_form() {
    report(3, "stationary closed form at large truncation", (|| {
        let levels = 201;
        let rates = std_rates(levels);
        let closed = stationary_closed_form(&rates, StationaryForm::Truncated).unwrap();
        let matrix = build_transition_matrix(&rates).unwrap();
        let numeric = stationary_numeric(&matrix).unwrap();
        let dev = total_variation(&closed, &numeric.populations).unwrap();
        if dev >= 1e-10 {
            return Err(format!("closed vs power iteration deviation {dev:e}"));
        }
        let ground = closed.prob(0);
        let want = 5.0 / 7.0;
        if (ground - want).abs() >= 1e-10 {
            return Err(format!("ground occupation {ground} vs {want}"));
        }
        Ok(())
    })());
}

#[test]
fn criterion_04_detailed_balance_gibbs() {
    report(4, "detailed balance yields Gibbs on a non-uniform spectrum", (|| {
        let levels = 12;
        let beta = 0.8;
        let spectrum = EnergySpectrum::from_energies(
            (0..levels).map(|n| n as f64 + 0.3 * (n * n) as f64).collect(),
        )
        .unwrap();
        let rates = detailed_balance_rates(beta, &spectrum, &vec![0.1; levels]).unwrap();
        let matrix = build_transition_matrix(&rates).unwrap();
        let numeric = stationary_numeric(&matrix).unwrap();
        let gibbs = gibbs_populations(beta, &spectrum).unwrap();
        let dev = total_variation(&numeric.populations, &gibbs).unwrap();
        if dev >= 1e-10 {
            return Err(format!("stationary vs Gibbs deviation {dev:e}"));
        }
        Ok(())
    })());
}

#[test]
fn criterion_05_bias_sweep_decay_rates() {
    report(5, "equilibration rate tracks the spectral gap across biases", (|| {
        let levels = 51;
        let steps = 4000;
        let spectrum = EnergySpectrum::uniform(1.0, levels).unwrap();
        let pop0 = gaussian_population(2.0, 2.0, levels).unwrap();
        let mut fitted_rates = Vec::new();
        for b in [4.0, 2.0, 1.1] {
            let active = 0.9;
            let p_plus = active / (1.0 + b);
            let p_minus = active * b / (1.0 + b);
            let rates = TransitionRates::constant(p_plus, 0.1, p_minus, levels).unwrap();
            let series = run_classical_trajectory(&pop0, &rates, &spectrum, steps).unwrap();
            let fitted = fit_decay_rate(&series.d_inf_values()).unwrap();
            let matrix = build_transition_matrix(&rates).unwrap();
            let spectral = -(1.0 - spectral_gap(&matrix).unwrap()).ln();
            let rel = (fitted - spectral).abs() / spectral;
            if rel >= 0.05 {
                return Err(format!(
                    "bias {b}: fitted {fitted} vs spectral {spectral} ({:.1}% off)",
                    100.0 * rel
                ));
            }
            fitted_rates.push(fitted);
        }
        if !(fitted_rates[0] > fitted_rates[1] && fitted_rates[1] > fitted_rates[2]) {
            return Err(format!("rates not strictly ordered: {fitted_rates:?}"));
        }
        Ok(())
    })());
}

#[test]
fn criterion_06_thermalization_vs_plateau() {
    report(6, "constant rates thermalize, level-dependent rates plateau", (|| {
        let levels = 51;
        let steps = 2000;
        let spectrum = EnergySpectrum::uniform(1.0, levels).unwrap();
        let pop0 = gaussian_population(2.0, 2.0, levels).unwrap();

        let constant = std_rates(levels);
        let series = run_classical_trajectory(&pop0, &constant, &spectrum, steps).unwrap();
        let final_d_th = series.records.last().unwrap().d_th;
        if final_d_th >= 1e-6 {
            return Err(format!("constant rates: d_th({steps}) = {final_d_th:e}"));
        }

        let up: Vec<f64> = (0..levels).map(|n| 0.15 + 0.05 / (1.0 + n as f64)).collect();
        let down: Vec<f64> = (0..levels).map(|n| 0.55 - 0.10 / (2.0 + n as f64)).collect();
        let stay: Vec<f64> = up.iter().zip(&down).map(|(u, d)| 1.0 - u - d).collect();
        let varying = TransitionRates::level_dependent(up, stay, down).unwrap();
        let series = run_classical_trajectory(&pop0, &varying, &spectrum, steps).unwrap();
        let tail: Vec<f64> =
            series.records[steps - 200..].iter().map(|r| r.d_th).collect();
        let plateau = *tail.last().unwrap();
        if plateau <= 1e-3 {
            return Err(format!("level-dependent plateau {plateau:e} not above 1e-3"));
        }
        let spread = tail.iter().cloned().fold(f64::MIN, f64::max)
            - tail.iter().cloned().fold(f64::MAX, f64::min);
        if spread >= 1e-9 {
            return Err(format!("plateau not stable: spread {spread:e} over last 200 steps"));
        }
        Ok(())
    })());
}

#[test]
fn criterion_07_population_decoupling() {
    report(7, "populations are independent of the coherence parameter", (|| {
        let levels = 21;
        let steps = 1000;
        let rates = std_rates(levels);
        let pop0 = gaussian_population(2.0, 2.0, levels).unwrap();
        let classical = classical_trajectory(&pop0, &rates, steps).unwrap();
        for mu in [0.0, 0.25, 0.5, 1.0] {
            let cfg = ChannelConfig::new(rates.clone(), mu, levels).unwrap();
            let mut rho = embed_diagonal(&pop0);
            for (t, reference) in classical.iter().enumerate() {
                let diag = extract_populations(&dephase(&rho)).unwrap();
                let dev = total_variation(&diag, reference).unwrap();
                if dev >= 1e-12 {
                    return Err(format!("mu {mu} t {t}: population deviation {dev:e}"));
                }
                if t < steps {
                    rho = collision_step_closed(&rho, &cfg).unwrap();
                }
            }
        }
        Ok(())
    })());
}

#[test]
fn criterion_08_dephased_state_thermalizes() {
    report(8, "dephased state thermalizes while the full state does not", (|| {
        let levels = 21;
        let steps = 1000;
        let spectrum = EnergySpectrum::uniform(1.0, levels).unwrap();
        let rates = std_rates(levels);
        let cfg = ChannelConfig::new(rates, 0.5, levels).unwrap();
        let pop0 = gaussian_population(2.0, 2.0, levels).unwrap();
        let series = run_quantum_trajectory(&pop0, &cfg, &spectrum, steps).unwrap();
        let last = series.records.last().unwrap();
        if last.d_th_diag >= 1e-6 {
            return Err(format!("d_th_diag({steps}) = {:e} not below 1e-6", last.d_th_diag));
        }
        // plateau: strictly positive and stable over the final stretch
        let tail: Vec<f64> = series.records[steps - 100..].iter().map(|r| r.d_th).collect();
        let plateau = *tail.last().unwrap();
        if plateau <= 1e-4 {
            return Err(format!("full-state deviation {plateau:e} not strictly positive"));
        }
        let spread = tail.iter().cloned().fold(f64::MIN, f64::max)
            - tail.iter().cloned().fold(f64::MAX, f64::min);
        if spread >= 1e-6 {
            return Err(format!("d_th tail not plateaued: spread {spread:e}"));
        }
        Ok(())
    })());
}

#[test]
fn criterion_09_plateau_grows_with_coherence() {
    report(9, "thermal deviation plateau increases with the coherence parameter", (|| {
        let levels = 21;
        let steps = 1000;
        let spectrum = EnergySpectrum::uniform(1.0, levels).unwrap();
        let rates = std_rates(levels);
        let pop0 = gaussian_population(2.0, 2.0, levels).unwrap();
        let mut plateaus = Vec::new();
        for mu in [0.0, 0.1, 0.25, 0.5, 1.0] {
            let cfg = ChannelConfig::new(rates.clone(), mu, levels).unwrap();
            let series = run_quantum_trajectory(&pop0, &cfg, &spectrum, steps).unwrap();
            plateaus.push((mu, series.records.last().unwrap().d_th));
        }
        if plateaus[0].1 >= 1e-6 {
            return Err(format!("mu = 0 plateau {:e} not below 1e-6", plateaus[0].1));
        }
        for pair in plateaus.windows(2) {
            if pair[1].1 <= pair[0].1 {
                return Err(format!(
                    "plateau not strictly increasing: {:?} then {:?}",
                    pair[0], pair[1]
                ));
            }
        }
        Ok(())
    })());
}

#[test]
fn criterion_10_linear_small_coherence_response() {
    report(10, "asymptotic deviation is linear in small mu; methods agree", (|| {
        let levels = 21;
        let spectrum = EnergySpectrum::uniform(1.0, levels).unwrap();
        let rates = std_rates(levels);
        let pop0 = gaussian_population(2.0, 2.0, levels).unwrap();
        let mus = [0.02, 0.05, 0.1, 0.15, 0.2];
        let mut devs = Vec::new();
        for &mu in &mus {
            let cfg = ChannelConfig::new(rates.clone(), mu, levels).unwrap();
            let fixed =
                asymptotic_deviation(&cfg, &pop0, &spectrum, DeviationMethod::FixedPoint).unwrap();
            let plateau =
                asymptotic_deviation(&cfg, &pop0, &spectrum, DeviationMethod::Plateau).unwrap();
            if (fixed - plateau).abs() >= 1e-6 {
                return Err(format!(
                    "mu {mu}: fixed point {fixed} vs plateau {plateau} disagree"
                ));
            }
            devs.push(fixed);
        }
        // through-origin least squares: slope = sum(x y) / sum(x^2)
        let sxy: f64 = mus.iter().zip(&devs).map(|(x, y)| x * y).sum();
        let sxx: f64 = mus.iter().map(|x| x * x).sum();
        let slope = sxy / sxx;
        let largest = devs.iter().cloned().fold(f64::MIN, f64::max);
        for (&mu, &d) in mus.iter().zip(&devs) {
            let residual = (d - slope * mu).abs();
            if residual >= 0.1 * largest {
                return Err(format!(
                    "mu {mu}: residual {residual:e} exceeds 10% of {largest:e}"
                ));
            }
        }
        Ok(())
    })());
}

#[test]
fn criterion_11_perturbative_upper_bound() {
    report(11, "thermal deviation obeys the perturbative bound", (|| {
        let levels = 21;
        let steps = 2000;
        let spectrum = EnergySpectrum::uniform(1.0, levels).unwrap();
        let rates = std_rates(levels);
        let pop0 = gaussian_population(2.0, 2.0, levels).unwrap();
        for mu in [0.02, 0.05, 0.1] {
            let cfg = ChannelConfig::new(rates.clone(), mu, levels).unwrap();
            let series = run_quantum_trajectory(&pop0, &cfg, &spectrum, steps).unwrap();
            let slack = 5.0 * mu * mu;
            for r in &series.records {
                if r.d_th > r.bound + slack {
                    return Err(format!(
                        "mu {mu} t {}: d_th {} exceeds bound {} + {slack}",
                        r.t, r.d_th, r.bound
                    ));
                }
            }
        }
        Ok(())
    })());
}

#[test]
fn criterion_12_boundary_cumsum_is_linear_plus_bounded() {
    report(12, "ground occupation cumsum drifts linearly with bounded remainder", (|| {
        let levels = 21;
        let steps = 10_000;
        let rates = std_rates(levels);
        let pop0 = gaussian_population(2.0, 2.0, levels).unwrap();
        let trajectory = classical_trajectory(&pop0, &rates, steps).unwrap();
        let stationary = stationary_closed_form(&rates, StationaryForm::Truncated).unwrap();
        let pi0 = stationary.prob(0);
        let matrix = build_transition_matrix(&rates).unwrap();
        let delta_est = -(1.0 - spectral_gap(&matrix).unwrap()).ln();

        // remainder sum_{j<t} p_j(0) - t pi0 over the late window, and the
        // envelope constant of the per-step deviation at the window start
        let mut cumsum = 0.0;
        let mut remainder = Vec::with_capacity(steps + 1);
        for pop in &trajectory {
            remainder.push(cumsum); // value at t before adding step t
            cumsum += pop.prob(0);
        }
        let lo = 100usize;
        let values: Vec<f64> = (lo..=steps)
            .map(|t| remainder[t] - t as f64 * pi0)
            .collect();
        let range = values.iter().cloned().fold(f64::MIN, f64::max)
            - values.iter().cloned().fold(f64::MAX, f64::min);

        let mut log_c_est = f64::MIN;
        for (t, pop) in trajectory.iter().enumerate().skip(lo) {
            let dev = (pop.prob(0) - pi0).abs();
            if dev > 0.0 {
                log_c_est = log_c_est.max(dev.ln() + delta_est * (t - lo) as f64);
            }
        }
        let estimate = log_c_est.exp() / (1.0 - (-delta_est).exp());
        if range >= estimate {
            return Err(format!("remainder range {range:e} not below estimate {estimate:e}"));
        }
        Ok(())
    })());
}

#[test]
fn criterion_13_gibbs_displacement_identity() {
    report(13, "channel displaces the Gibbs state by exactly the injected coherence", (|| {
        let levels = 30;
        let rates = std_rates(levels);
        let gibbs = stationary_closed_form(&rates, StationaryForm::Truncated).unwrap();
        if gibbs.prob(levels - 1) >= 1e-8 {
            return Err(format!(
                "boundary guard violated: top occupation {:e}",
                gibbs.prob(levels - 1)
            ));
        }
        let rho = embed_diagonal(&gibbs);
        let root = (0.2f64 * 0.7).sqrt();
        for mu in [0.1, 0.5, 1.0] {
            let cfg = ChannelConfig::new(rates.clone(), mu, levels).unwrap();
            let moved = collision_step_closed(&rho, &cfg).unwrap();
            let displacement =
                trace_norm_hermitian(&(moved.matrix() - rho.matrix())).unwrap();
            let want = 2.0 * mu * root * gibbs.prob(0);
            if (displacement - want).abs() >= 1e-12 {
                return Err(format!(
                    "mu {mu}: displacement {displacement} vs {want} (diff {:e})",
                    (displacement - want).abs()
                ));
            }
        }
        Ok(())
    })());
}

#[test]
fn criterion_14_first_order_expansion_scaling() {
    report(14, "first-order state error scales quadratically in mu", (|| {
        let levels = 21;
        let t = 200;
        let rates = std_rates(levels);
        let pop0 = gaussian_population(2.0, 2.0, levels).unwrap();
        let mut errors = Vec::new();
        for mu in [0.1, 0.05] {
            let cfg = ChannelConfig::new(rates.clone(), mu, levels).unwrap();
            let mut rho = embed_diagonal(&pop0);
            for _ in 0..t {
                rho = collision_step_closed(&rho, &cfg).unwrap();
            }
            let approx = first_order_state(&pop0, &cfg, t).unwrap();
            errors.push(trace_norm_hermitian(&(rho.matrix() - approx.matrix())).unwrap());
        }
        let ratio = errors[0] / errors[1];
        if !(3.5..=4.5).contains(&ratio) {
            return Err(format!("halving mu changed the error by {ratio} (want ~4)"));
        }
        Ok(())
    })());
}

#[test]
fn criterion_15_preset_determinism() {
    report(15, "presets produce byte-identical CSV on repeated runs", (|| {
        for name in ["fig1a", "fig1b", "fig2", "fig3", "fig4"] {
            let cfg = preset(name).unwrap();
            let dir_a = tempfile::tempdir().map_err(|e| e.to_string())?;
            let dir_b = tempfile::tempdir().map_err(|e| e.to_string())?;
            run_scenario(&cfg, dir_a.path(), false).map_err(|e| e.to_string())?;
            run_scenario(&cfg, dir_b.path(), false).map_err(|e| e.to_string())?;
            let mut names: Vec<String> = std::fs::read_dir(dir_a.path())
                .map_err(|e| e.to_string())?
                .map(|e| e.unwrap().file_name().into_string().unwrap())
                .filter(|n| n.ends_with(".csv"))
                .collect();
            names.sort();
            if names.is_empty() {
                return Err(format!("preset {name} wrote no CSV files"));
            }
            for file in names {
                let a = std::fs::read(dir_a.path().join(&file)).map_err(|e| e.to_string())?;
                let b = std::fs::read(dir_b.path().join(&file)).map_err(|e| e.to_string())?;
                if a != b {
                    return Err(format!("preset {name}: {file} differs between runs"));
                }
            }
        }
        Ok(())
    })());
}

#[test]
fn distances_stay_consistent_under_dephasing() {
    // cross-check used by several criteria: trace distance between dephased
    // states equals the total variation of their populations
    let levels = 15;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = random_density_operator(levels, &mut rng).unwrap();
    let b = random_density_operator(levels, &mut rng).unwrap();
    let td = trace_distance(&dephase(&a), &dephase(&b)).unwrap();
    let tv = total_variation(
        &extract_populations(&dephase(&a)).unwrap(),
        &extract_populations(&dephase(&b)).unwrap(),
    )
    .unwrap();
    assert!((td - tv).abs() < 1e-13);
    let _ = PopulationVector::delta(0, levels).unwrap();
}
