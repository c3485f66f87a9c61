#pragma once
#include <avamp/model.hpp>
#include <avamp/state_evolution.hpp>
#include <avamp/vamp.hpp>

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace avamp {

struct ExperimentConfig {
    int schema_version = 1;
    int m = 512;
    int n = 1024;
    double kappa = 100.0;
    double snr_db = 40.0;
    BgParams theta1_true{0.1, 0.0, 1.0};
    int n_trials = 100;
    std::uint64_t master_seed = 1;
    int n_iters = 40;
    double damping_rho = 1.0;
    int ml_bins = 8;
    std::vector<std::string> modes{"oracle", "em", "autotune"};
    double se_gate_db = 1.0;
    bool dump_traces = false;
    std::string out_dir = ".";

    void validate() const;
};

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// "appendix-g-k100" or "appendix-g-k10"
ExperimentConfig preset_config(const std::string& name);

InstanceConfig instance_config_for(const ExperimentConfig& cfg);
VampConfig vamp_config_for_mode(const ExperimentConfig& cfg, const std::string& mode);
void mode_kinds(const std::string& mode, AdaptationRule::Kind& k1, Theta2Mode& k2);

struct ReportRow {
    int iter = 0;
    double nmse_db_median = 0, nmse_db_q25 = 0, nmse_db_q75 = 0;
    double se_nmse_db = 0;
    double beta_hat = 0, mu_hat = 0, taux_hat = 0, theta2_hat = 0;
    double gamma1 = 0, eta1 = 0, gamma2 = 0, eta2 = 0;
    int failures = 0;
};

struct ModeResult {
    std::string name;
    std::vector<ReportRow> rows;
    std::vector<SeState> se;
    int failures = 0;   // diverged trials
};

struct Report {
    std::vector<ModeResult> modes;
    double wall_seconds = 0.0;
};

Report run_experiment(const ExperimentConfig& cfg, bool quiet = true);

void write_report(const Report& rep, const ExperimentConfig& cfg);
std::string report_csv(const Report& rep);

// Reads <dir>/report.csv (+ summary.json for the gate), prints the
// per-mode deviation table. Returns 0 (pass), 1 (gate exceeded) or
// 2 (unusable report, e.g. missing SE curve).
int compare_se_dir(const std::string& dir, std::ostream& out);

double quantile_sorted(const std::vector<double>& sorted, double p);

} // namespace avamp
