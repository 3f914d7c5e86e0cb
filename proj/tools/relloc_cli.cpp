#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include "relloc/association.hpp"
#include "relloc/io.hpp"

using namespace relloc;

namespace {

std::vector<Estimator> parse_estimator_list(const std::string& csv) {
    std::vector<Estimator> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(estimator_from_name(item));
    if (out.empty()) throw ValidationError("empty estimator list");
    return out;
}

void emit_report(const RmseReport& report, const std::string& out_path) {
    if (out_path.empty())
        std::cout << report_csv_text(report);
    else
        write_report_csv(report, out_path);
}

ExperimentConfig load_config(const std::string& config_path, uint64_t* seed,
                             int* trials, const std::string& estimators) {
    ExperimentConfig cfg =
        config_path.empty() ? ExperimentConfig{} : parse_config(config_path);
    if (seed) cfg.base_seed = *seed;
    if (trials) cfg.trials = *trials;
    if (!estimators.empty()) cfg.estimators = parse_estimator_list(estimators);
    cfg.validate();
    return cfg;
}

int run_estimate(const std::string& input, const std::string& estimators,
                 const std::string& out_path) {
    const Observation obs = read_mpc_file(input);
    const std::vector<Estimator> sel =
        estimators.empty()
            ? std::vector<Estimator>{Estimator::MVUE, Estimator::DD}
            : parse_estimator_list(estimators);

    std::string out = "estimator,d_hat_m,eps_hat_ns,dx_m,dy_m,dz_m\n";
    auto fmt = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    bool runtime_failure = false;
    for (Estimator e : sel) {
        try {
            std::string row = estimator_name(e) + ',';
            if (estimator_is_position(e)) {
                PositionEstimate pe;
                const PosObservation po = obs.to_pos_observation();
                switch (e) {
                    case Estimator::DD:
                        pe = estimate_position_by_delta(po, {}, false);
                        break;
                    case Estimator::PWA:
                        pe = estimate_position_by_delta(po, {}, true);
                        break;
                    case Estimator::TAU:
                        pe = estimate_position_by_tau(po, {});
                        break;
                    default:
                        throw ValidationError(
                            "estimator not supported on MPC files: " +
                            estimator_name(e));
                }
                row += fmt(pe.d_hat.norm()) + ',' + fmt(pe.eps_hat_ns) + ',' +
                       fmt(pe.d_hat.x()) + ',' + fmt(pe.d_hat.y()) + ',' +
                       fmt(pe.d_hat.z());
            } else {
                DistanceEstimate de;
                switch (e) {
                    case Estimator::MVUE:
                        de = estimate_distance_closedform(
                            obs.to_delta_observation(),
                            ClosedFormVariant::MVUE);
                        break;
                    case Estimator::MLE:
                        de = estimate_distance_mle(obs.to_delta_observation());
                        break;
                    case Estimator::NA:
                        de = estimate_distance_noassoc(obs.to_noassoc_input());
                        break;
                    default:
                        throw ValidationError(
                            "estimator not supported on MPC files: " +
                            estimator_name(e));
                }
                row += fmt(de.d_hat_m) + ',' + fmt(de.eps_hat_ns) + ",,,";
            }
            out += row + '\n';
        } catch (const ValidationError&) {
            throw;
        } catch (const Error& err) {
            std::cerr << estimator_name(e) << " failed: " << err.what()
                      << "\n";
            runtime_failure = true;
        }
    }
    if (out_path.empty()) {
        std::cout << out;
    } else {
        std::ofstream f(out_path);
        if (!f) throw IoError("cannot write output: " + out_path);
        f << out;
    }
    return runtime_failure ? 2 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relative localization from multipath delay differences"};
    app.require_subcommand(1);

    std::string config_path, out_path, estimators, input_path;
    uint64_t seed = 0;
    int trials = 0;
    bool have_seed = false, have_trials = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--out", out_path, "output CSV path (default stdout)");
        sub->add_option("--estimators", estimators,
                        "comma-separated estimator list");
        sub->add_option("--seed", seed, "base RNG seed")
            ->each([&](const std::string&) { have_seed = true; });
        sub->add_option("--trials", trials, "trials per grid point")
            ->each([&](const std::string&) { have_trials = true; });
    };

    CLI::App* simulate =
        app.add_subcommand("simulate", "single-point Monte Carlo run");
    add_common(simulate);
    CLI::App* sweep = app.add_subcommand("sweep", "grid sweep from the config");
    add_common(sweep);

    CLI::App* estimate =
        app.add_subcommand("estimate", "estimate from an MPC CSV file");
    estimate->add_option("input", input_path, "MPC CSV file")->required();
    estimate->add_option("--estimators", estimators,
                         "comma-separated estimator list");
    estimate->add_option("--out", out_path, "output CSV path (default stdout)");

    CLI::App* analytic =
        app.add_subcommand("analytic", "closed-form RMSE laws and thresholds");
    double an_d = 2.5, an_alpha = 0, an_sigma_sh = 0;
    int an_k = 12, an_toa_k = 0;
    analytic->add_option("--d", an_d, "distance in m");
    analytic->add_option("--k", an_k, "total MPC count");
    analytic->add_option("--alpha", an_alpha, "path-loss exponent");
    analytic->add_option("--sigma-sh", an_sigma_sh, "shadowing sigma in dB");
    analytic->add_option("--toa-k", an_toa_k, "K for the TOA criterion");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed() || sweep->parsed()) {
            ExperimentConfig cfg =
                load_config(config_path, have_seed ? &seed : nullptr,
                            have_trials ? &trials : nullptr, estimators);
            if (simulate->parsed()) {
                cfg.sweep_var = SweepVar::Distance;
                cfg.grid = {cfg.d_m};
            }
            emit_report(run_experiment(cfg), out_path);
            return 0;
        }
        if (estimate->parsed())
            return run_estimate(input_path, estimators, out_path);
        if (analytic->parsed()) {
            if (an_alpha > 0 || an_sigma_sh > 0) {
                std::cout << "rss_beat_k_min,"
                          << rss_beat_threshold(an_alpha, an_sigma_sh) << "\n";
            } else if (an_toa_k > 0) {
                std::cout << "toa_beats,"
                          << (toa_beat_criterion(an_toa_k) ? 1 : 0) << "\n";
            } else {
                std::cout << "case,value\n"
                          << "async_dist_rmse_m,"
                          << analytic_rmse(an_d, an_k, RmseCase::AsyncDist)
                          << "\n"
                          << "offset_rmse_ns,"
                          << analytic_rmse(an_d, an_k, RmseCase::EpsOffset)
                          << "\n"
                          << "sync_dist_rmse_m,"
                          << analytic_rmse(an_d, an_k, RmseCase::SyncDist)
                          << "\n";
            }
            return 0;
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const CountMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigInvalid& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
