#include "ctvote/eval.hpp"

#include <array>
#include <sstream>
#include <vector>

#include "ctvote/error.hpp"
#include "ctvote/rng.hpp"
#include "ctvote/text.hpp"

namespace ctvote::eval {

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

constexpr std::array<const char*, 4> kCountKeys{"tp", "fp", "fn", "tn"};
constexpr std::array<const char*, 5> kMetricKeys{"precision_covid", "recall_covid", "f1_covid", "f1_noncovid",
                                                 "macro_f1"};

std::map<std::string, std::string> printed_metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) return {};
    const Metrics m = macro_f1(cm);
    const std::array<double, 5> values{m.precision_covid, m.recall_covid, m.f1_covid, m.f1_noncovid, m.macro_f1};
    std::map<std::string, std::string> out;
    for (std::size_t i = 0; i < kMetricKeys.size(); ++i) out[kMetricKeys[i]] = text::fixed(values[i]);
    return out;
}

}  // namespace

ConfusionMatrix confusion(const LabelMap& predicted, const LabelMap& truth) {
    for (const auto& [id, label] : predicted) {
        if (!truth.contains(id)) throw Error(ErrorCode::KeyMismatch, "no ground truth for patient " + id);
    }
    for (const auto& [id, label] : truth) {
        if (!predicted.contains(id)) throw Error(ErrorCode::KeyMismatch, "no prediction for patient " + id);
    }
    ConfusionMatrix cm;
    for (const auto& [id, pred] : predicted) {
        const bool pos_pred = pred == Label::Covid;
        const bool pos_true = truth.at(id) == Label::Covid;
        if (pos_pred && pos_true) ++cm.tp;
        else if (pos_pred) ++cm.fp;
        else if (pos_true) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

Metrics macro_f1(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw Error(ErrorCode::EmptyEvaluation, "no evaluated volumes");
    Metrics m;
    m.precision_covid = ratio(cm.tp, cm.tp + cm.fp);
    m.recall_covid = ratio(cm.tp, cm.tp + cm.fn);
    m.f1_covid = harmonic(m.precision_covid, m.recall_covid);
    const double precision_non = ratio(cm.tn, cm.tn + cm.fn);
    const double recall_non = ratio(cm.tn, cm.tn + cm.fp);
    m.f1_noncovid = harmonic(precision_non, recall_non);
    m.macro_f1 = (m.f1_covid + m.f1_noncovid) / 2.0;
    return m;
}

FoldAssignment stratified_folds(const LabelMap& labels, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorCode::TooFewSamples, "need at least 2 folds");
    std::array<std::vector<std::string>, 2> by_class;
    for (const auto& [id, label] : labels) by_class[static_cast<std::size_t>(class_index(label))].push_back(id);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (by_class[c].size() < k) {
            throw Error(ErrorCode::TooFewSamples, std::string(to_string(label_from_class(static_cast<int>(c)))) +
                                                      " has " + std::to_string(by_class[c].size()) +
                                                      " patients for " + std::to_string(k) + " folds");
        }
    }
    FoldAssignment folds;
    std::size_t next = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& ids = by_class[c];
        rng::Engine eng(rng::derive(seed, c + 1));
        rng::shuffle(std::span<std::string>(ids), eng);
        for (const auto& id : ids) {
            folds[id] = next;
            next = (next + 1) % k;
        }
    }
    return folds;
}

std::string report(const ConfusionMatrix& cm, const std::map<std::string, std::string>& metadata) {
    const Metrics m = macro_f1(cm);
    std::ostringstream out;
    out << "tp=" << cm.tp << '\n' << "fp=" << cm.fp << '\n' << "fn=" << cm.fn << '\n' << "tn=" << cm.tn << '\n';
    out << "precision_covid=" << text::fixed(m.precision_covid) << '\n';
    out << "recall_covid=" << text::fixed(m.recall_covid) << '\n';
    out << "f1_covid=" << text::fixed(m.f1_covid) << '\n';
    out << "f1_noncovid=" << text::fixed(m.f1_noncovid) << '\n';
    out << "macro_f1=" << text::fixed(m.macro_f1) << '\n';
    for (const auto& [key, value] : metadata) {
        if (key.empty() || key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
            throw Error(ErrorCode::InvariantViolation, "report metadata '" + key + "' is not a single key=value line");
        }
        out << "meta." << key << '=' << value << '\n';
    }
    return out.str();
}

ParsedReport parse_report(std::string_view body) {
    ParsedReport parsed;
    std::map<std::string, std::string> seen;
    std::istringstream in{std::string(body)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::MalformedRecord, "report line " + std::to_string(line_no) + " lacks '='");
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        if (key.starts_with("meta.")) {
            parsed.metadata[key.substr(5)] = value;
        } else {
            seen[key] = value;
        }
    }
    std::array<std::size_t*, 4> slots{&parsed.counts.tp, &parsed.counts.fp, &parsed.counts.fn, &parsed.counts.tn};
    for (std::size_t i = 0; i < kCountKeys.size(); ++i) {
        const auto it = seen.find(kCountKeys[i]);
        const auto v = it == seen.end() ? std::nullopt : text::parse_int(it->second);
        if (!v || *v < 0) throw Error(ErrorCode::MalformedRecord, std::string("report lacks a valid ") + kCountKeys[i]);
        *slots[i] = static_cast<std::size_t>(*v);
    }
    for (const char* key : kMetricKeys) {
        const auto it = seen.find(key);
        if (it == seen.end() || !text::parse_double(it->second)) {
            throw Error(ErrorCode::MalformedRecord, std::string("report lacks a valid ") + key);
        }
        parsed.metrics[key] = it->second;
    }
    if (seen.size() != kCountKeys.size() + kMetricKeys.size()) {
        throw Error(ErrorCode::MalformedRecord, "report has unknown keys");
    }
    // The printed metrics must be the ones the counts imply.
    const auto expected = printed_metrics(parsed.counts);
    if (expected != parsed.metrics) {
        throw Error(ErrorCode::MalformedRecord, "report metrics disagree with its counts");
    }
    return parsed;
}

}  // namespace ctvote::eval
