#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mpcroute/protocol.hpp"
#include "mpcroute/trainer.hpp"

namespace mpcroute {

struct ProfileReport {
    std::vector<std::string> expert_names;
    std::vector<double> expert_latency; // unit MPC seconds, median of 5
    std::vector<u64> expert_bytes;      // party-0 bytes for one expert inference
    double router_latency = 0;          // router+argmax+retrieval overhead
    u64 router_bytes = 0;
    std::vector<double> selection_dist; // fractions, sum 1
    std::size_t n_samples = 0;
    std::size_t baseline_index = 0;
    double speedup = 0;
    u64 mem_high_water = 0; // bytes, approximate (resident high water)
    CommStats totals0, totals1;
    double routed_bytes_per_sample = 0; // party-0 bytes / sample, full pipeline
    ExecMode mode = ExecMode::Revealed;
};

// N * C_baseline / sum_i (C_selected(i) + C_router); selections holds the
// chosen expert index per sample (n must equal selections.size()).
double speedup(std::size_t n, double c_baseline,
               std::span<const std::size_t> selections,
               std::span<const double> unit_latency, double c_router);

// One focused MPC run (both parties over local channels) of a single
// expert's forward pass / of the routing front end. Used for calibration.
struct CalibrationResult {
    double seconds = 0; // median over `runs`
    u64 bytes = 0;      // party-0 bytes sent+received, deterministic
};

CalibrationResult calibrate_expert_mpc(const ModelPool& pool,
                                       const RouterPolicy& router,
                                       std::size_t expert_index,
                                       std::span<const double> sample, u64 seed,
                                       int runs = 5);
CalibrationResult calibrate_router_mpc(const ModelPool& pool,
                                       const RouterPolicy& router,
                                       ExecMode mode,
                                       std::span<const double> sample, u64 seed,
                                       int runs = 5);

ProfileReport profile_pipeline(const ModelPool& pool, const RouterPolicy& router,
                               std::span<const std::vector<double>> samples,
                               ExecMode mode, u64 seed);

void write_profile_json(const ProfileReport& rep, const std::filesystem::path& path);
void write_profile_csv(const ProfileReport& rep, const std::filesystem::path& path);
void render_profile_table(const ProfileReport& rep, std::ostream& os);

u64 memory_high_water_bytes();

// ---- experiment harnesses ----

struct ScalabilityRow {
    std::size_t K = 0;
    std::vector<double> costs;
    double accuracy = 0;
    double f1 = 0;
    double speedup = 0;
};

std::vector<ScalabilityRow> experiment_scalability(const TrainSpec& base,
                                                   std::span<const std::size_t> Ks,
                                                   u64 seed);
void write_scalability_csv(std::span<const ScalabilityRow> rows,
                           const std::filesystem::path& path);

struct CostProfileRow {
    std::string profile;
    std::vector<double> costs;
    double accuracy = 0;
    double f1 = 0;
    std::vector<double> route_frac;
};

// The six cost profiles, trained with identical seeds and hyperparameters.
std::vector<std::pair<std::string, std::vector<double>>> cost_profiles();
std::vector<CostProfileRow> experiment_cost_sensitivity(const TrainSpec& base,
                                                        u64 seed);
void write_cost_sensitivity_csv(std::span<const CostProfileRow> rows,
                                const std::filesystem::path& path);

} // namespace mpcroute
