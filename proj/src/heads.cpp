#include "ctvote/heads.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "ctvote/error.hpp"
#include "ctvote/rng.hpp"
#include "ctvote/text.hpp"

namespace ctvote::heads {

std::string_view to_string(HeadKind kind) { return kind == HeadKind::LogReg ? "LOGREG" : "MLP"; }

HeadKind parse_head_kind(std::string_view text) {
    if (text == "LOGREG" || text == "logreg") return HeadKind::LogReg;
    if (text == "MLP" || text == "mlp") return HeadKind::Mlp;
    throw Error(ErrorCode::MalformedRecord, "unknown head kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// HeadModel

std::size_t HeadModel::param_count(HeadKind kind, std::size_t input_dim, std::size_t hidden) {
    if (kind == HeadKind::LogReg) return kClasses * input_dim + kClasses;
    return hidden * input_dim + hidden + kClasses * hidden + kClasses;
}

HeadModel HeadModel::zeros(HeadKind kind, std::size_t input_dim, std::size_t hidden) {
    HeadModel m;
    m.kind = kind;
    m.input_dim = input_dim;
    m.hidden = kind == HeadKind::LogReg ? 0 : hidden;
    m.params.assign(param_count(kind, input_dim, hidden), 0.0);
    return m;
}

HeadModel HeadModel::random_init(HeadKind kind, std::uint64_t seed, std::size_t input_dim, std::size_t hidden) {
    HeadModel m = zeros(kind, input_dim, hidden);
    m.seed = seed;
    rng::Engine eng(seed);
    const double first = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (auto& w : m.w1()) w = rng::uniform(eng, -first, first);
    for (auto& b : m.b1()) b = rng::uniform(eng, -first, first);
    if (kind == HeadKind::Mlp) {
        const double second = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (auto& w : m.w2()) w = rng::uniform(eng, -second, second);
        for (auto& b : m.b2()) b = rng::uniform(eng, -second, second);
    }
    return m;
}

std::span<double> HeadModel::w2() {
    if (kind == HeadKind::LogReg) return {};
    return {params.data() + hidden * input_dim + hidden, kClasses * hidden};
}
std::span<double> HeadModel::b2() {
    if (kind == HeadKind::LogReg) return {};
    return {params.data() + hidden * input_dim + hidden + kClasses * hidden, kClasses};
}
std::span<const double> HeadModel::w2() const { return const_cast<HeadModel*>(this)->w2(); }
std::span<const double> HeadModel::b2() const { return const_cast<HeadModel*>(this)->b2(); }

// ---------------------------------------------------------------------------
// Schedule and loss

void validate(const TrainConfig& cfg) {
    const auto fail = [](const std::string& why) { throw Error(ErrorCode::OutOfRange, why); };
    if (cfg.epochs == 0) fail("epochs must be >= 1");
    if (!(cfg.lr_init > 0.0)) fail("lr_init must be > 0");
    if (cfg.warmup_epochs >= cfg.epochs) fail("warmup_epochs must be < epochs");
    if (cfg.batch_size == 0) fail("batch_size must be >= 1");
    if (!(cfg.label_smoothing >= 0.0 && cfg.label_smoothing < 1.0)) fail("label_smoothing must lie in [0,1)");
    if (!(cfg.sam_rho >= 0.0)) fail("sam_rho must be >= 0");
}

double cosine_lr(std::size_t epoch, const TrainConfig& cfg) {
    validate(cfg);
    if (epoch > cfg.epochs) {
        throw Error(ErrorCode::OutOfRange,
                    "epoch " + std::to_string(epoch) + " beyond schedule of " + std::to_string(cfg.epochs));
    }
    if (epoch < cfg.warmup_epochs) {
        return cfg.lr_init * static_cast<double>(epoch + 1) / static_cast<double>(cfg.warmup_epochs);
    }
    const double progress = static_cast<double>(epoch - cfg.warmup_epochs) /
                            static_cast<double>(cfg.epochs - cfg.warmup_epochs);
    return cfg.lr_init * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

double smoothing_target(std::size_t c, std::size_t target, double eps, std::size_t classes) {
    const double uniform = eps / static_cast<double>(classes);
    return c == target ? 1.0 - eps + uniform : uniform;
}

// Loss of one sample from its logits; writes dL/dz when dz is non-empty.
double loss_from_logits(std::span<const double> z, std::size_t target, double eps, std::span<double> dz) {
    const std::size_t classes = z.size();
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - top);
    const double lse = top + std::log(sum);
    const double log_floor = std::log(kLogFloor);

    double loss = 0.0;
    double unclipped_mass = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        const double q = smoothing_target(c, target, eps, classes);
        const double logp = z[c] - lse;
        if (logp >= log_floor) {
            loss -= q * logp;
            unclipped_mass += q;
        } else {
            loss -= q * log_floor;
        }
    }
    if (!dz.empty()) {
        for (std::size_t j = 0; j < classes; ++j) {
            const double logp = z[j] - lse;
            const double q = logp >= log_floor ? smoothing_target(j, target, eps, classes) : 0.0;
            dz[j] = std::exp(logp) * unclipped_mass - q;
        }
    }
    return loss;
}

struct Dims {
    HeadKind kind;
    std::size_t input;
    std::size_t hidden;

    explicit Dims(const HeadModel& m) : kind(m.kind), input(m.input_dim), hidden(m.hidden) {}
    std::size_t first_rows() const { return kind == HeadKind::LogReg ? kClasses : hidden; }
    std::size_t b1_offset() const { return first_rows() * input; }
    std::size_t w2_offset() const { return b1_offset() + first_rows(); }
    std::size_t b2_offset() const { return w2_offset() + kClasses * hidden; }
};

// Forward pass. `pre` receives the first-layer pre-activations.
void forward(const Dims& d, std::span<const double> params, std::span<const double> x, std::vector<double>& pre,
             std::array<double, kClasses>& z) {
    const std::size_t rows = d.first_rows();
    pre.assign(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* w = params.data() + r * d.input;
        double acc = params[d.b1_offset() + r];
        for (std::size_t i = 0; i < d.input; ++i) acc += w[i] * x[i];
        pre[r] = acc;
    }
    if (d.kind == HeadKind::LogReg) {
        for (std::size_t c = 0; c < kClasses; ++c) z[c] = pre[c];
        return;
    }
    for (std::size_t c = 0; c < kClasses; ++c) {
        const double* w = params.data() + d.w2_offset() + c * d.hidden;
        double acc = params[d.b2_offset() + c];
        for (std::size_t h = 0; h < d.hidden; ++h) acc += w[h] * std::max(pre[h], 0.0);
        z[c] = acc;
    }
}

void check_input(const Dims& d, std::span<const double> x) {
    if (x.size() != d.input) {
        throw Error(ErrorCode::DimensionMismatch,
                    "input has " + std::to_string(x.size()) + " features, model expects " + std::to_string(d.input));
    }
}

double loss_and_gradient_at(const Dims& d, std::span<const double> params, std::span<const Example* const> batch,
                            double eps, std::span<double> grad) {
    if (batch.empty()) throw Error(ErrorCode::EmptyInput, "empty batch");
    std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<double> pre;
    std::array<double, kClasses> z{};
    std::array<double, kClasses> dz{};
    std::vector<double> dpre(d.first_rows());
    double loss = 0.0;

    for (const Example* ex : batch) {
        check_input(d, ex->x);
        forward(d, params, ex->x, pre, z);
        loss += loss_from_logits(z, ex->target, eps, dz);

        if (d.kind == HeadKind::LogReg) {
            for (std::size_t c = 0; c < kClasses; ++c) dpre[c] = dz[c];
        } else {
            for (std::size_t c = 0; c < kClasses; ++c) {
                double* gw = grad.data() + d.w2_offset() + c * d.hidden;
                for (std::size_t h = 0; h < d.hidden; ++h) gw[h] += dz[c] * std::max(pre[h], 0.0);
                grad[d.b2_offset() + c] += dz[c];
            }
            for (std::size_t h = 0; h < d.hidden; ++h) {
                double back = 0.0;
                for (std::size_t c = 0; c < kClasses; ++c) back += params[d.w2_offset() + c * d.hidden + h] * dz[c];
                dpre[h] = pre[h] > 0.0 ? back : 0.0;
            }
        }
        for (std::size_t r = 0; r < d.first_rows(); ++r) {
            if (dpre[r] == 0.0) continue;
            double* gw = grad.data() + r * d.input;
            for (std::size_t i = 0; i < d.input; ++i) gw[i] += dpre[r] * ex->x[i];
            grad[d.b1_offset() + r] += dpre[r];
        }
    }
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (auto& g : grad) g *= scale;
    return loss * scale;
}

std::vector<const Example*> pointers(std::span<const Example> batch) {
    std::vector<const Example*> out;
    out.reserve(batch.size());
    for (const auto& e : batch) out.push_back(&e);
    return out;
}

}  // namespace

double smoothed_cross_entropy(std::span<const double> probs, std::size_t target, double eps) {
    if (probs.size() < 2 || target >= probs.size()) {
        throw Error(ErrorCode::InvalidDistribution, "need >= 2 classes and a target inside them");
    }
    if (!(eps >= 0.0 && eps < 1.0)) throw Error(ErrorCode::OutOfRange, "label smoothing must lie in [0,1)");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidDistribution, "probability outside [0,1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorCode::InvalidDistribution, "probabilities sum to " + text::exact(sum));
    double loss = 0.0;
    for (std::size_t c = 0; c < probs.size(); ++c) {
        const double q = smoothing_target(c, target, eps, probs.size());
        loss -= q * std::log(std::max(probs[c], kLogFloor));
    }
    return loss;
}

std::vector<Example> make_examples(std::span<const aggregate::FeatureMatrix> features, std::span<const Label> labels) {
    if (features.size() != labels.size()) {
        throw Error(ErrorCode::DimensionMismatch, std::to_string(features.size()) + " feature matrices but " +
                                                      std::to_string(labels.size()) + " labels");
    }
    std::vector<Example> out;
    out.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        out.push_back(Example{features[i].flatten(), static_cast<std::size_t>(class_index(labels[i]))});
    }
    return out;
}

std::vector<double> logits(const HeadModel& model, std::span<const double> x) {
    const Dims d(model);
    check_input(d, x);
    std::vector<double> pre;
    std::array<double, kClasses> z{};
    forward(d, model.params, x, pre, z);
    return {z.begin(), z.end()};
}

std::vector<double> predict_head(const HeadModel& model, std::span<const double> x) {
    auto z = logits(model, x);
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - top);
        sum += v;
    }
    for (auto& v : z) v /= sum;
    return z;
}

std::vector<double> predict_head(const HeadModel& model, const aggregate::FeatureMatrix& features) {
    return predict_head(model, features.flatten());
}

Label predict_label(const HeadModel& model, const aggregate::FeatureMatrix& features) {
    const auto p = predict_head(model, features);
    return p[0] >= p[1] ? Label::Covid : Label::NonCovid;
}

double batch_loss(const HeadModel& model, std::span<const Example> batch, double eps) {
    if (batch.empty()) throw Error(ErrorCode::EmptyInput, "empty batch");
    const Dims d(model);
    std::vector<double> pre;
    std::array<double, kClasses> z{};
    double loss = 0.0;
    for (const auto& ex : batch) {
        check_input(d, ex.x);
        forward(d, model.params, ex.x, pre, z);
        loss += loss_from_logits(z, ex.target, eps, {});
    }
    return loss / static_cast<double>(batch.size());
}

double loss_and_gradient(const HeadModel& model, std::span<const Example> batch, double eps, std::span<double> grad) {
    if (grad.size() != model.params.size()) throw Error(ErrorCode::DimensionMismatch, "gradient buffer size");
    const auto ptrs = pointers(batch);
    return loss_and_gradient_at(Dims(model), model.params, ptrs, eps, grad);
}

// ---------------------------------------------------------------------------
// Optimizer steps

double sgd_step(std::span<double> params, const GradientFn& grad_fn, double lr) {
    std::vector<double> grad(params.size());
    const double loss = grad_fn(params, grad);
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    return loss;
}

double sam_step(std::span<double> params, const GradientFn& grad_fn, double lr, double rho) {
    std::vector<double> grad(params.size());
    const double loss = grad_fn(params, grad);
    double norm_sq = 0.0;
    for (double g : grad) norm_sq += g * g;
    const double norm = std::sqrt(norm_sq);
    const double scale = norm > 0.0 ? rho / norm : 0.0;

    std::vector<double> perturbed(params.begin(), params.end());
    for (std::size_t i = 0; i < perturbed.size(); ++i) perturbed[i] += scale * grad[i];
    grad_fn(perturbed, grad);
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    return loss;
}

// ---------------------------------------------------------------------------
// Training

HeadModel train_head(std::span<const Example> examples, HeadKind kind, const TrainConfig& cfg,
                     const TrainHooks& hooks) {
    validate(cfg);
    if (examples.size() < 2) throw Error(ErrorCode::DegenerateLabels, "need at least two training examples");
    std::array<std::size_t, kClasses> counts{};
    for (const auto& ex : examples) {
        if (ex.target >= kClasses) throw Error(ErrorCode::DegenerateLabels, "target class out of range");
        ++counts[ex.target];
    }
    if (counts[0] == 0 || counts[1] == 0) {
        throw Error(ErrorCode::DegenerateLabels, "training labels contain a single class");
    }
    const std::size_t input_dim = examples.front().x.size();

    HeadModel model = HeadModel::random_init(kind, cfg.seed, input_dim);
    const Dims dims(model);
    const bool use_sam = cfg.sam_rho > 0.0 || hooks.force_sam_path;

    std::vector<std::size_t> order(examples.size());
    std::vector<const Example*> batch;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, cfg);
        std::iota(order.begin(), order.end(), 0);
        rng::Engine eng(rng::derive(cfg.seed, epoch + 1));
        rng::shuffle(std::span<std::size_t>(order), eng);

        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, order.size());
            batch.clear();
            for (std::size_t i = begin; i < end; ++i) batch.push_back(&examples[order[i]]);

            const GradientFn grad_fn = [&](std::span<const double> p, std::span<double> g) {
                return loss_and_gradient_at(dims, p, batch, cfg.label_smoothing, g);
            };
            const double loss = use_sam ? sam_step(model.params, grad_fn, lr, cfg.sam_rho)
                                        : sgd_step(model.params, grad_fn, lr);
            const bool diverged = !std::isfinite(loss) || !std::all_of(model.params.begin(), model.params.end(),
                                                                        [](double v) { return std::isfinite(v); });
            if (diverged) {
                throw Error(ErrorCode::NonFiniteLoss, "training diverged at epoch " + std::to_string(epoch));
            }
            if (hooks.on_step) hooks.on_step(step, model.params);
            ++step;
        }
    }
    return model;
}

HeadModel train_head(std::span<const aggregate::FeatureMatrix> features, std::span<const Label> labels,
                     HeadKind kind, const TrainConfig& cfg, const TrainHooks& hooks) {
    const auto examples = make_examples(features, labels);
    return train_head(examples, kind, cfg, hooks);
}

// ---------------------------------------------------------------------------
// Gradient verification

namespace {

// Evaluates the batch loss with a single parameter perturbed. Caches the
// unperturbed pre-activations and logits so each probe only recomputes what
// the perturbed parameter touches; the loss itself is always re-evaluated
// from the resulting logits.
class PerturbationProbe {
public:
    PerturbationProbe(const HeadModel& model, std::span<const Example> batch, double eps)
        : model_(model), dims_(model), batch_(batch), eps_(eps) {
        pre_.resize(batch.size());
        z_.resize(batch.size());
        for (std::size_t b = 0; b < batch.size(); ++b) {
            check_input(dims_, batch[b].x);
            forward(dims_, model.params, batch[b].x, pre_[b], z_[b]);
        }
    }

    double loss_with(std::size_t j, double delta) const {
        double total = 0.0;
        std::array<double, kClasses> z{};
        for (std::size_t b = 0; b < batch_.size(); ++b) {
            z = z_[b];
            perturb_logits(j, delta, b, z);
            total += loss_from_logits(z, batch_[b].target, eps_, {});
        }
        return total / static_cast<double>(batch_.size());
    }

private:
    void perturb_logits(std::size_t j, double delta, std::size_t b, std::array<double, kClasses>& z) const {
        const auto& p = model_.params;
        const auto& x = batch_[b].x;
        const auto& pre = pre_[b];
        if (dims_.kind == HeadKind::LogReg) {
            if (j < dims_.b1_offset()) {
                z[j / dims_.input] += delta * x[j % dims_.input];
            } else {
                z[j - dims_.b1_offset()] += delta;
            }
            return;
        }
        if (j < dims_.w2_offset()) {
            std::size_t h;
            double shift;
            if (j < dims_.b1_offset()) {
                h = j / dims_.input;
                shift = delta * x[j % dims_.input];
            } else {
                h = j - dims_.b1_offset();
                shift = delta;
            }
            const double change = std::max(pre[h] + shift, 0.0) - std::max(pre[h], 0.0);
            for (std::size_t c = 0; c < kClasses; ++c) z[c] += p[dims_.w2_offset() + c * dims_.hidden + h] * change;
        } else if (j < dims_.b2_offset()) {
            const std::size_t c = (j - dims_.w2_offset()) / dims_.hidden;
            const std::size_t h = (j - dims_.w2_offset()) % dims_.hidden;
            z[c] += delta * std::max(pre[h], 0.0);
        } else {
            z[j - dims_.b2_offset()] += delta;
        }
    }

    const HeadModel& model_;
    Dims dims_;
    std::span<const Example> batch_;
    double eps_;
    std::vector<std::vector<double>> pre_;
    std::vector<std::array<double, kClasses>> z_;
};

}  // namespace

GradCheckResult grad_check(const HeadModel& model, std::span<const Example> batch, double eps, double step) {
    if (batch.empty()) throw Error(ErrorCode::EmptyInput, "grad_check needs a non-empty batch");
    std::vector<double> analytic(model.params.size());
    loss_and_gradient(model, batch, eps, analytic);

    const PerturbationProbe probe(model, batch, eps);
    GradCheckResult result;
    for (std::size_t j = 0; j < model.params.size(); ++j) {
        const double numeric = (probe.loss_with(j, step) - probe.loss_with(j, -step)) / (2.0 * step);
        if (!std::isfinite(numeric) || !std::isfinite(analytic[j])) {
            throw Error(ErrorCode::NonFiniteGradient, "parameter " + std::to_string(j));
        }
        const double rel = std::abs(analytic[j] - numeric) /
                           std::max({1.0, std::abs(analytic[j]), std::abs(numeric)});
        if (rel > result.max_relative_error) {
            result.max_relative_error = rel;
            result.worst_parameter = j;
        }
        ++result.checked;
    }
    return result;
}

void nudge_away_from_kinks(HeadModel& model, std::span<const Example> batch, double margin) {
    if (model.kind != HeadKind::Mlp) return;
    const Dims d(model);
    std::vector<double> pre;
    std::array<double, kClasses> z{};
    std::vector<std::vector<double>> pres;
    for (const auto& ex : batch) {
        forward(d, model.params, ex.x, pre, z);
        pres.push_back(pre);
    }
    for (std::size_t h = 0; h < d.hidden; ++h) {
        double shift = 0.0;
        for (int attempt = 0; attempt < 10000; ++attempt) {
            bool clear = true;
            for (const auto& p : pres) clear = clear && std::abs(p[h] + shift) >= margin;
            if (clear) break;
            shift += 1.5 * margin;
        }
        model.params[d.b1_offset() + h] += shift;
    }
}

// ---------------------------------------------------------------------------
// Serialization

std::string serialize(const HeadModel& model) {
    std::ostringstream out;
    out << to_string(model.kind) << ',' << model.input_dim;
    if (model.kind == HeadKind::Mlp) out << 'x' << model.hidden;
    out << 'x' << kClasses << ',' << model.seed << '\n';
    for (double p : model.params) out << text::exact(p) << '\n';
    return out.str();
}

HeadModel deserialize(std::string_view body) {
    const auto fail = [](const std::string& why) -> HeadModel { throw Error(ErrorCode::MalformedRecord, why); };
    std::istringstream in{std::string(body)};
    std::string line;
    if (!std::getline(in, line)) return fail("empty model file");
    const auto header = text::split(text::trim(line));
    if (header.size() != 3) return fail("model header must be KIND,dims,seed");
    const HeadKind kind = parse_head_kind(header[0]);
    const auto dims = text::split(header[1], 'x');
    std::vector<std::size_t> sizes;
    for (auto part : dims) {
        const auto v = text::parse_int(part);
        if (!v || *v <= 0) return fail("bad dimension '" + std::string(part) + "'");
        sizes.push_back(static_cast<std::size_t>(*v));
    }
    const std::size_t expected_dims = kind == HeadKind::LogReg ? 2 : 3;
    if (sizes.size() != expected_dims || sizes.back() != kClasses) return fail("dimensions do not match head kind");
    const auto seed = text::parse_int(header[2]);
    std::uint64_t seed_value = 0;
    if (seed) {
        seed_value = static_cast<std::uint64_t>(*seed);
    } else {
        // seeds above INT64_MAX
        try {
            seed_value = std::stoull(std::string(header[2]));
        } catch (const std::exception&) {
            return fail("bad seed '" + std::string(header[2]) + "'");
        }
    }

    HeadModel model = HeadModel::zeros(kind, sizes[0], kind == HeadKind::Mlp ? sizes[1] : kHiddenUnits);
    model.seed = seed_value;
    std::size_t i = 0;
    while (std::getline(in, line)) {
        const auto t = text::trim(line);
        if (t.empty()) continue;
        const auto v = text::parse_double(t);
        if (!v || !std::isfinite(*v)) return fail("bad parameter on line " + std::to_string(i + 2));
        if (i >= model.params.size()) return fail("too many parameters");
        model.params[i++] = *v;
    }
    if (i != model.params.size()) {
        return fail("expected " + std::to_string(model.params.size()) + " parameters, got " + std::to_string(i));
    }
    return model;
}

void save_model(const HeadModel& model, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + file.string());
    out << serialize(model);
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + file.string());
}

HeadModel load_model(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + file.string());
    std::ostringstream body;
    body << in.rdbuf();
    return deserialize(body.str());
}

}  // namespace ctvote::heads
