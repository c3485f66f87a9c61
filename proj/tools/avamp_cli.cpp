#include <avamp/harness.hpp>
#include <avamp/kernels.hpp>

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

struct Overrides {
    std::uint64_t seed = 0;
    bool have_seed = false;
    int trials = 0;
    bool have_trials = false;
    int threads = 0;
    std::string out;
    bool quiet = false;
    bool dump_traces = false;
};

void apply_overrides(avamp::ExperimentConfig& cfg, const Overrides& ov) {
    if (ov.have_seed) cfg.master_seed = ov.seed;
    if (ov.have_trials) cfg.n_trials = ov.trials;
    if (!ov.out.empty()) cfg.out_dir = ov.out;
    if (ov.dump_traces) cfg.dump_traces = true;
    if (ov.threads > 0) {
#ifdef _OPENMP
        omp_set_num_threads(ov.threads);
#endif
        avamp::kernels::set_threads(ov.threads);
    }
}

avamp::Report se_only_report(const avamp::ExperimentConfig& cfg) {
    avamp::Report rep;
    const avamp::InstanceConfig icfg = avamp::instance_config_for(cfg);
    for (const std::string& mode : cfg.modes) {
        avamp::ModeResult mr;
        mr.name = mode;
        avamp::AdaptationRule::Kind k1;
        avamp::Theta2Mode k2;
        avamp::mode_kinds(mode, k1, k2);
        mr.se = avamp::se_run(avamp::se_config_for(icfg, k1, k2, cfg.n_iters));
        mr.rows.resize(cfg.n_iters);
        for (int k = 0; k < cfg.n_iters; ++k) {
            avamp::ReportRow& row = mr.rows[k];
            row.iter = k;
            const double nan = std::numeric_limits<double>::quiet_NaN();
            row.nmse_db_median = row.nmse_db_q25 = row.nmse_db_q75 = nan;
            row.beta_hat = row.mu_hat = row.taux_hat = row.theta2_hat = nan;
            row.gamma1 = row.eta1 = row.gamma2 = row.eta2 = nan;
            row.se_nmse_db = (k < static_cast<int>(mr.se.size()) && mr.se[k].valid)
                                 ? mr.se[k].nmse_db
                                 : nan;
        }
        rep.modes.push_back(std::move(mr));
    }
    return rep;
}

void print_final_lines(const avamp::Report& rep, bool sim) {
    for (const auto& mr : rep.modes) {
        if (mr.rows.empty()) continue;
        const avamp::ReportRow& last = mr.rows.back();
        std::cerr << mr.name << ": final "
                  << (sim ? "median NMSE " : "SE NMSE ")
                  << (sim ? last.nmse_db_median : last.se_nmse_db) << " dB";
        if (sim) std::cerr << " (SE " << last.se_nmse_db << " dB, "
                           << mr.failures << " failed trials)";
        std::cerr << "\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive VAMP benchmark driver"};
    app.require_subcommand(1);

    Overrides ov;
    std::string config_path, report_dir, preset;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", ov.seed, "override master seed")
            ->each([&](const std::string&) { ov.have_seed = true; });
        sub->add_option("--trials", ov.trials, "override trial count")
            ->each([&](const std::string&) { ov.have_trials = true; });
        sub->add_option("--threads", ov.threads, "worker thread count");
        sub->add_option("--out", ov.out, "output directory");
        sub->add_flag("--quiet", ov.quiet, "suppress progress output");
    };

    CLI::App* run_cmd = app.add_subcommand("run", "Monte-Carlo experiment from a config file");
    run_cmd->add_option("config", config_path, "JSON config")->required();
    run_cmd->add_flag("--dump-traces", ov.dump_traces, "write per-trial trace CSVs");
    add_common(run_cmd);

    CLI::App* se_cmd = app.add_subcommand("se", "state-evolution prediction only");
    se_cmd->add_option("config", config_path, "JSON config")->required();
    add_common(se_cmd);

    CLI::App* cmp_cmd = app.add_subcommand("compare", "compare simulated vs SE curves");
    cmp_cmd->add_option("report-dir", report_dir, "directory holding report.csv")->required();

    CLI::App* gen_cmd = app.add_subcommand("gen-config", "emit a benchmark preset");
    gen_cmd->add_option("--preset", preset, "appendix-g-k100 | appendix-g-k10")->required();
    gen_cmd->add_option("--out", ov.out, "directory to write <preset>.json (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*run_cmd || *se_cmd) {
            avamp::ExperimentConfig cfg;
            try {
                cfg = avamp::load_config(config_path);
            } catch (const std::exception& e) {
                std::cerr << "config error: " << e.what() << "\n";
                return 2;
            }
            apply_overrides(cfg, ov);
            avamp::Report rep =
                *run_cmd ? avamp::run_experiment(cfg, ov.quiet) : se_only_report(cfg);
            avamp::write_report(rep, cfg);
            if (!ov.quiet) {
                print_final_lines(rep, static_cast<bool>(*run_cmd));
                std::cerr << "wrote " << cfg.out_dir << "/report.csv and summary.json\n";
            }
            return 0;
        }
        if (*cmp_cmd) return avamp::compare_se_dir(report_dir, std::cout);
        if (*gen_cmd) {
            avamp::ExperimentConfig cfg;
            try {
                cfg = avamp::preset_config(preset);
            } catch (const std::exception& e) {
                std::cerr << e.what() << "\n";
                return 2;
            }
            if (!ov.out.empty()) cfg.out_dir = ov.out;
            const std::string text = avamp::config_to_json(cfg).dump(2) + "\n";
            if (ov.out.empty()) {
                std::cout << text;
            } else {
                std::filesystem::create_directories(ov.out);
                const auto path = std::filesystem::path(ov.out) / (preset + ".json");
                std::ofstream f(path, std::ios::binary);
                f << text;
                if (!f) throw std::runtime_error("cannot write " + path.string());
                std::cerr << "wrote " << path.string() << "\n";
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
