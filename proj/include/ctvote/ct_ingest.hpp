#pragma once

// Volume ingestion, HU windowing and the line-oriented file formats that
// connect the harness to externally run networks.

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctvote/flip_spec.hpp"
#include "ctvote/label.hpp"

namespace ctvote {

// Row-major grayscale image with intensities in [0,1].
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> data;

    Image() = default;
    Image(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), data(w * h, fill) {}

    double& at(std::size_t row, std::size_t col) { return data[row * width + col]; }
    double at(std::size_t row, std::size_t col) const { return data[row * width + col]; }

    bool empty() const { return data.empty(); }
    bool operator==(const Image&) const = default;
};

struct Volume {
    std::string patient_id;
    std::vector<Image> slices;
    std::optional<Label> label;

    std::size_t size() const { return slices.size(); }
};

// Raw Hounsfield-unit slice before windowing.
struct HuGrid {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> hu;
};

struct WindowSpec {
    double window = 350.0;  // HU width
    double level = 1150.0;  // HU center
};

using LabelMap = std::map<std::string, Label>;

// ---------------------------------------------------------------------------
// Volumes

// Loads one patient directory. Files with a .jpg/.jpeg/.png/.pgm extension are
// slices, ordered by natural filename sort; anything else is ignored. The
// patient id is the directory name.
Volume load_volume(const std::filesystem::path& dir, const LabelMap* labels = nullptr);

// The slice files load_volume would read, in load order, without decoding them.
std::vector<std::filesystem::path> list_slice_files(const std::filesystem::path& dir);

// Patient subdirectories of a data root, in natural order.
std::vector<std::filesystem::path> list_patient_dirs(const std::filesystem::path& root);

// out = clamp((hu - (level - window/2)) / window, 0, 1)
Image apply_window(const HuGrid& raw, const WindowSpec& spec);

// ---------------------------------------------------------------------------
// Labels / diagnosis files: one `patient_id,LABEL` per line.

LabelMap read_labels(const std::filesystem::path& file);
void write_labels(const LabelMap& labels, const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Prediction records

enum class RecordKind { Subvolume, Slice };

struct PredictionRecord {
    std::string patient_id;
    std::string model_id;
    RecordKind kind = RecordKind::Subvolume;
    std::optional<std::size_t> subvolume_start;
    std::optional<FlipSpec> flips;
    std::optional<std::size_t> slice_index;
    std::optional<Label> label;
    std::optional<double> confidence;
    std::optional<std::array<double, 3>> probs;  // (p_covid, p_pneumonia, p_healthy)

    bool operator==(const PredictionRecord&) const = default;

    static PredictionRecord subvolume(std::string patient, std::string model, std::size_t start,
                                      FlipSpec flips, Label label, double confidence);
    static PredictionRecord slice(std::string patient, std::string model, std::size_t index,
                                  std::array<double, 3> probs);
};

// Throws InvariantViolation if the record breaks the SUBVOLUME/SLICE contract.
void validate(const PredictionRecord& record);

// Rounds probabilities to the six-decimal grid of the file format. For SLICE
// records the largest component absorbs the rounding residual so the written
// vector still sums to exactly 1 in decimal.
PredictionRecord canonicalize(const PredictionRecord& record);

std::string format_record(const PredictionRecord& record);
PredictionRecord parse_record(std::string_view line, std::size_t line_number = 0);

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& file);
void write_predictions(const std::vector<PredictionRecord>& records,
                       const std::filesystem::path& file);

}  // namespace ctvote
