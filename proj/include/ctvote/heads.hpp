#pragma once

// CT-level classifier heads over flattened 96x3 slice-probability features:
// multinomial logistic regression and a single-hidden-layer ReLU MLP, trained
// with mini-batch SGD (optionally SAM) on label-smoothed cross-entropy.
//
// Parameters live in one flat vector, laid out W1 (row-major), b1, W2
// (row-major), b2. LOGREG has only W1 (classes x input) and b1.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ctvote/aggregate.hpp"
#include "ctvote/label.hpp"

namespace ctvote::heads {

enum class HeadKind { LogReg, Mlp };

std::string_view to_string(HeadKind kind);
HeadKind parse_head_kind(std::string_view text);

inline constexpr std::size_t kClasses = 2;
inline constexpr std::size_t kHiddenUnits = 100;
inline constexpr double kLogFloor = 1e-12;

struct HeadModel {
    HeadKind kind = HeadKind::LogReg;
    std::size_t input_dim = aggregate::kFeatureSize;
    std::size_t hidden = kHiddenUnits;  // ignored for LOGREG
    std::uint64_t seed = 0;
    std::vector<double> params;

    static std::size_t param_count(HeadKind kind, std::size_t input_dim, std::size_t hidden);
    static HeadModel zeros(HeadKind kind, std::size_t input_dim = aggregate::kFeatureSize,
                           std::size_t hidden = kHiddenUnits);
    // Uniform in +-1/sqrt(fan_in) per layer.
    static HeadModel random_init(HeadKind kind, std::uint64_t seed, std::size_t input_dim = aggregate::kFeatureSize,
                                 std::size_t hidden = kHiddenUnits);

    // Rows of the first layer: kClasses for LOGREG, hidden for MLP.
    std::size_t first_rows() const { return kind == HeadKind::LogReg ? kClasses : hidden; }

    std::span<double> w1() { return {params.data(), first_rows() * input_dim}; }
    std::span<double> b1() { return {params.data() + first_rows() * input_dim, first_rows()}; }
    std::span<double> w2();
    std::span<double> b2();
    std::span<const double> w1() const { return {params.data(), first_rows() * input_dim}; }
    std::span<const double> b1() const { return {params.data() + first_rows() * input_dim, first_rows()}; }
    std::span<const double> w2() const;
    std::span<const double> b2() const;

    bool operator==(const HeadModel&) const = default;
};

struct TrainConfig {
    std::size_t epochs = 200;
    double lr_init = 1e-3;
    std::size_t warmup_epochs = 5;
    std::size_t batch_size = 32;
    double label_smoothing = 0.0;  // epsilon
    double sam_rho = 0.0;          // 0 disables SAM
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

// Linear warmup to lr_init over warmup_epochs, then half-cosine decay to 0 at
// `epochs`.
double cosine_lr(std::size_t epoch, const TrainConfig& cfg);

// -sum_c q_c log(max(p_c, 1e-12)) with q = one-hot(target) * (1 - eps) + eps / C.
double smoothed_cross_entropy(std::span<const double> probs, std::size_t target, double eps);

struct Example {
    std::vector<double> x;
    std::size_t target = 0;  // class index, see class_index()
};

std::vector<Example> make_examples(std::span<const aggregate::FeatureMatrix> features, std::span<const Label> labels);

std::vector<double> logits(const HeadModel& model, std::span<const double> x);
std::vector<double> predict_head(const HeadModel& model, std::span<const double> x);
std::vector<double> predict_head(const HeadModel& model, const aggregate::FeatureMatrix& features);
Label predict_label(const HeadModel& model, const aggregate::FeatureMatrix& features);

// Mean smoothed cross-entropy over the batch.
double batch_loss(const HeadModel& model, std::span<const Example> batch, double eps);

// Mean loss and its exact gradient (clipping floor included) written into `grad`.
double loss_and_gradient(const HeadModel& model, std::span<const Example> batch, double eps, std::span<double> grad);

// ---------------------------------------------------------------------------
// Optimizer steps

// Returns the loss and writes the gradient at `params`.
using GradientFn = std::function<double(std::span<const double> params, std::span<double> grad)>;

// params -= lr * g(params). Returns the loss at params.
double sgd_step(std::span<double> params, const GradientFn& grad_fn, double lr);

// Two-phase SAM: g = grad(params); e = rho * g / ||g||_2; params -= lr * grad(params + e).
// Returns the loss at the unperturbed params.
double sam_step(std::span<double> params, const GradientFn& grad_fn, double lr, double rho);

struct TrainHooks {
    // Called after every parameter update with the 0-based global step.
    std::function<void(std::size_t step, std::span<const double> params)> on_step;
    // Route every step through sam_step even when rho == 0.
    bool force_sam_path = false;
};

HeadModel train_head(std::span<const Example> examples, HeadKind kind, const TrainConfig& cfg,
                     const TrainHooks& hooks = {});
HeadModel train_head(std::span<const aggregate::FeatureMatrix> features, std::span<const Label> labels,
                     HeadKind kind, const TrainConfig& cfg, const TrainHooks& hooks = {});

// ---------------------------------------------------------------------------
// Gradient verification

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_parameter = 0;
    std::size_t checked = 0;
};

// Central differences with `step` on every parameter;
// relative error = |g_a - g_n| / max(1, |g_a|, |g_n|).
GradCheckResult grad_check(const HeadModel& model, std::span<const Example> batch, double eps,
                           double step = 1e-5);

// Shifts MLP hidden biases until no pre-activation in the batch lies within
// `margin` of the ReLU kink.
void nudge_away_from_kinks(HeadModel& model, std::span<const Example> batch, double margin = 1e-3);

// ---------------------------------------------------------------------------
// Model files: header `KIND,dims,seed` then one parameter per line, 17
// significant digits, in flat layout order.

std::string serialize(const HeadModel& model);
HeadModel deserialize(std::string_view text);
void save_model(const HeadModel& model, const std::filesystem::path& file);
HeadModel load_model(const std::filesystem::path& file);

}  // namespace ctvote::heads
