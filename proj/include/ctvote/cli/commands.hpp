#pragma once

// Batch commands behind the `ctvote` executable. Each returns a process exit
// code (0 ok, 2 when some patients failed and were skipped) and throws
// ctvote::Error for failures that stop the whole run.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "ctvote/aggregate.hpp"
#include "ctvote/ct_ingest.hpp"
#include "ctvote/heads.hpp"
#include "ctvote/predictor.hpp"

namespace ctvote::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

// Missing or contradictory flags; maps to kExitUsage.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    fs::path data_dir;
    fs::path labels_file;
    fs::path predictions_file;
    fs::path diagnosis_file;
    fs::path features_file;
    fs::path model_file;
    fs::path out;         // empty = stdout
    fs::path export_dir;  // ingest: re-emit slices as PNG directories

    aggregate::VoteThresholds thresholds;
    heads::HeadKind head = heads::HeadKind::LogReg;
    heads::TrainConfig train{.batch_size = 32};
    std::size_t folds_k = 5;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;

    std::string mode = "infer";               // plan: train | infer
    std::optional<std::size_t> target_len;    // plan: overrides 128 / 256
    std::optional<std::string> model_id;      // features: which model's SLICE records
    std::optional<std::size_t> resize;        // ingest: square resize before export

    // synth
    std::size_t n_covid = 100;
    std::size_t n_noncovid = 100;
    std::size_t min_slices = 40;
    std::size_t max_slices = 600;
    std::size_t models = 1;
    predictor::SyntheticPredictorConfig synthetic;
    fs::path labels_out;
};

int cmd_ingest(const RunConfig& cfg, std::ostream& log);
int cmd_plan(const RunConfig& cfg, std::ostream& log);
int cmd_vote(const RunConfig& cfg, std::ostream& log);
int cmd_features(const RunConfig& cfg, std::ostream& log);
int cmd_train_head(const RunConfig& cfg, std::ostream& log);
int cmd_predict_head(const RunConfig& cfg, std::ostream& log);
int cmd_folds(const RunConfig& cfg, std::ostream& log);
int cmd_eval(const RunConfig& cfg, std::ostream& log);
int cmd_synth(const RunConfig& cfg, std::ostream& log);

// ---------------------------------------------------------------------------
// Building blocks shared with the tests.

struct VoteOutcome {
    LabelMap diagnosis;
    std::map<std::string, std::string> failures;  // patient -> reason
};

// Pools every model's SUBVOLUME records per patient and applies the
// two-threshold vote. Patients with only SLICE records are failures.
VoteOutcome vote_predictions(const std::vector<PredictionRecord>& records, const aggregate::VoteThresholds& t);

struct FeatureSet {
    std::map<std::string, aggregate::FeatureMatrix> features;
    std::map<std::string, std::string> failures;
};

FeatureSet features_from_predictions(const std::vector<PredictionRecord>& records,
                                     const std::optional<std::string>& model_id);

// One line per patient: patient_id then 288 values at 17 significant digits.
void write_features(const std::map<std::string, aggregate::FeatureMatrix>& features, const fs::path& file);
std::map<std::string, aggregate::FeatureMatrix> read_features(const fs::path& file);

struct SyntheticCohort {
    std::vector<PredictionRecord> records;
    LabelMap labels;
    std::map<std::string, std::size_t> slice_counts;
};

// Patients synth_0000.. (COVID first), slice counts uniform in
// [min_slices, max_slices]; every model emits all TTA sub-volume records and
// one SLICE record per slice.
SyntheticCohort make_synthetic_cohort(const RunConfig& cfg);

}  // namespace ctvote::cli
