#pragma once

#include <optional>
#include <string_view>

namespace ctvote {

// CT-level diagnosis. COVID is the positive class everywhere.
enum class Label { Covid, NonCovid };

constexpr std::string_view to_string(Label label) {
    return label == Label::Covid ? "COVID" : "NON_COVID";
}

constexpr std::optional<Label> parse_label(std::string_view text) {
    if (text == "COVID") return Label::Covid;
    if (text == "NON_COVID") return Label::NonCovid;
    return std::nullopt;
}

// Index used by the two-class heads: 0 = COVID, 1 = NON_COVID.
constexpr int class_index(Label label) { return label == Label::Covid ? 0 : 1; }
constexpr Label label_from_class(int index) { return index == 0 ? Label::Covid : Label::NonCovid; }

}  // namespace ctvote
