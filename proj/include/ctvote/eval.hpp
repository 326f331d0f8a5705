#pragma once

// Confusion counts, macro-F1 and stratified fold construction. COVID is the
// positive class; 0/0 ratios evaluate to 0.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

#include "ctvote/ct_ingest.hpp"

namespace ctvote::eval {

struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

struct Metrics {
    double precision_covid = 0.0;
    double recall_covid = 0.0;
    double f1_covid = 0.0;
    double f1_noncovid = 0.0;
    double macro_f1 = 0.0;
};

ConfusionMatrix confusion(const LabelMap& predicted, const LabelMap& truth);

Metrics macro_f1(const ConfusionMatrix& cm);

using FoldAssignment = std::map<std::string, std::size_t>;

// Per class, patients (in id order) are shuffled with the seeded generator and
// dealt round-robin; each class continues dealing where the previous one
// stopped so fold sizes stay within one of each other.
FoldAssignment stratified_folds(const LabelMap& labels, std::size_t k, std::uint64_t seed);

// `key=value` lines: tp, fp, fn, tn, precision_covid, recall_covid, f1_covid,
// f1_noncovid, macro_f1 (six decimals), then `meta.<key>=<value>` lines in key
// order.
std::string report(const ConfusionMatrix& cm, const std::map<std::string, std::string>& metadata = {});

struct ParsedReport {
    ConfusionMatrix counts;
    std::map<std::string, std::string> metrics;  // key -> printed value
    std::map<std::string, std::string> metadata;
};

ParsedReport parse_report(std::string_view text);

}  // namespace ctvote::eval
