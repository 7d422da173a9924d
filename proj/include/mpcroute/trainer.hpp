#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mpcroute/modelpool.hpp"

namespace mpcroute {

// ---- synthetic task ----
// Gaussian-cluster classification where a configurable fraction of samples
// is linearly separable along the first coordinate ("easy") and the rest
// carries its label in an XOR pattern over two other coordinates ("hard"),
// so a linear expert handles part of the data and hidden-layer capacity
// pays off on the remainder.
struct DatasetConfig {
    std::size_t n = 800;
    std::size_t embed_dim = 6;
    std::size_t seq_len = 1;
    std::size_t classes = 2;
    double easy_frac = 0.6;
    u64 seed = 1;
};

struct Dataset {
    std::size_t seq_len = 1;
    std::size_t embed_dim = 0;
    std::size_t classes = 2;
    std::vector<std::vector<double>> x; // per sample, seq*embed_dim flattened
    std::vector<int> y;

    std::size_t size() const { return x.size(); }
    std::size_t input_dim() const { return seq_len * embed_dim; }
};

Dataset make_synthetic_dataset(const DatasetConfig& cfg);

// ---- config ----

struct TrainConfig {
    double alpha = 0.05; // cost-loss weight
    double beta = 0.08;  // balance-loss weight
    double tau_start = 5.0;
    double tau_end = 0.5;
    double lr = 0.1;
    std::size_t batch = 32;
    std::size_t epochs = 40;
    std::size_t warmup_epochs = 30;
    std::size_t qat_epochs = 1;
    u64 seed = 1;

    void validate() const;
    double tau_at(std::size_t epoch) const;
};

// ---- real-weight MLP used during training ----

struct Mlp {
    std::vector<std::size_t> dims;
    std::vector<std::vector<double>> W; // per layer, row-major [in x out]
    std::vector<std::vector<double>> b;

    static Mlp init(std::vector<std::size_t> dims, std::mt19937_64& rng);
    std::vector<double> flat() const; // layer-major W then b, codec layout
    std::size_t param_count() const;
};

struct MlpGrads {
    std::vector<std::vector<double>> W, b;
    static MlpGrads zeros_like(const Mlp& m);
};

// ---- spec-facing operations ----

// g_i = softmax((logits_i + G_i)/tau); rng == nullptr gives the noise-free
// mode (G = 0). tau must be positive.
std::vector<double> gumbel_softmax(std::span<const double> logits, double tau,
                                   std::mt19937_64* rng);

std::vector<double> weighted_prediction(std::span<const double> g,
                                        const std::vector<std::vector<double>>& expert_outputs);

double task_loss(std::span<const double> pred_logits, int label);
double task_loss(const std::vector<std::vector<double>>& pred_logits,
                 std::span<const int> labels);

double balance_loss_from_loads(std::span<const double> loads);
double balance_loss(const std::vector<std::vector<double>>& g_batch);

double cost_loss(const std::vector<std::vector<double>>& g_batch,
                 std::span<const double> costs);

double composite_loss(double l_task, double l_balance, double l_cost,
                      const TrainConfig& cfg);

// ---- joint step ----

struct StepRecord {
    double l_task = 0, l_balance = 0, l_cost = 0, composite = 0;
    std::vector<std::vector<double>> g; // per sample routing probabilities
};

struct BatchView {
    const Dataset* data = nullptr;
    std::span<const std::size_t> indices;
};

// One forward/backward with hand-derived gradients. gumbel_noise holds one
// G vector per sample (pass zeros for the frozen-noise/eval path). When
// grads are null the backward half is skipped. quantize_forward rounds
// weights and activations to the fixed-point grid during the forward pass
// (used by the quantization-aware epochs).
StepRecord joint_forward_backward(const BatchView& batch, const Mlp& router,
                                  const std::vector<Mlp>& experts,
                                  std::span<const double> costs, double alpha,
                                  double beta, double tau,
                                  const std::vector<std::vector<double>>& gumbel_noise,
                                  MlpGrads* router_grads,
                                  std::vector<MlpGrads>* expert_grads,
                                  bool quantize_forward = false,
                                  int frac_bits = 16);

// Single SGD step (gradient computation + update).
StepRecord train_step(const BatchView& batch, Mlp& router,
                      std::vector<Mlp>& experts, std::span<const double> costs,
                      const TrainConfig& cfg, double tau, std::mt19937_64& rng,
                      bool quantize_forward = false, int frac_bits = 16);

// ---- full loop ----

struct EpochRecord {
    double l_task = 0, l_balance = 0, l_cost = 0;
    std::vector<double> hist; // hard-argmax selection fractions over the epoch
};

struct TrainOutput {
    Mlp router;
    std::vector<Mlp> experts;
    RouterPolicy router_q;
    ModelPool pool_q;
    std::vector<EpochRecord> history;
};

TrainOutput train(const Dataset& data, std::vector<ExpertSpec> specs,
                  std::size_t router_hidden, const TrainConfig& cfg);

// epoch,L_task,L_balance,L_cost,hist_1..hist_k
void write_history_csv(std::span<const EpochRecord> history,
                       const std::filesystem::path& path);

// ---- evaluation ----

struct EvalResult {
    double accuracy = 0;
    double macro_f1 = 0;
    std::vector<double> route_frac;
};

// Deployment semantics: hard-argmax routing, selected expert only.
EvalResult evaluate_routed(const Mlp& router, const std::vector<Mlp>& experts,
                           const Dataset& data);
// Same, through the quantized plain fixed-point pipeline.
EvalResult evaluate_routed_quantized(const ModelPool& pool,
                                     const RouterPolicy& router,
                                     const Dataset& data);

// Noise-free hard-argmax selection fractions of the router on a dataset.
std::vector<double> selection_histogram(const Mlp& router, const Dataset& data);

// ---- training spec file (JSON) ----

struct TrainSpec {
    TrainConfig train;
    DatasetConfig dataset;
    std::size_t router_hidden = 8;
    std::vector<ExpertSpec> experts; // input_dim/classes filled from dataset
};

TrainSpec default_train_spec();
TrainSpec load_train_spec(const std::filesystem::path& path);
void save_train_spec(const TrainSpec& spec, const std::filesystem::path& path);

} // namespace mpcroute
