#include "ctvote/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "ctvote/error.hpp"
#include "ctvote/eval.hpp"
#include "ctvote/image_io.hpp"
#include "ctvote/preprocess.hpp"
#include "ctvote/rng.hpp"
#include "ctvote/sampling.hpp"
#include "ctvote/text.hpp"

namespace ctvote::cli {

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions escape only
// through fn's own handling; callers collect per-item results by index.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    }
}

// Output sink: a file when a path is given, stdout otherwise.
class Output {
public:
    explicit Output(const fs::path& path) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary | std::ios::trunc);
            if (!file_) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
        }
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
    void finish(const fs::path& path) {
        stream().flush();
        if (!stream()) throw Error(ErrorCode::IoFailure, "short write to " + (path.empty() ? "stdout" : path.string()));
    }

private:
    std::ofstream file_;
};

void write_label_lines(const LabelMap& labels, const fs::path& out) {
    Output sink(out);
    for (const auto& [id, label] : labels) sink.stream() << id << ',' << to_string(label) << '\n';
    sink.finish(out);
}

int report_failures(const std::map<std::string, std::string>& failures, std::ostream& log) {
    for (const auto& [patient, why] : failures) log << "error: patient " << patient << ": " << why << '\n';
    return failures.empty() ? kExitOk : kExitData;
}

void require_path(const fs::path& path, const char* flag) {
    if (path.empty()) throw UsageError(std::string("missing required ") + flag);
}

std::string with_context(const std::string& stage, const Error& e) { return stage + ": " + e.what(); }

}  // namespace

// ---------------------------------------------------------------------------
// Building blocks

VoteOutcome vote_predictions(const std::vector<PredictionRecord>& records, const aggregate::VoteThresholds& t) {
    std::map<std::string, std::map<std::string, std::vector<aggregate::Vote>>> pooled;
    std::set<std::string> patients;
    for (const auto& r : records) {
        patients.insert(r.patient_id);
        if (r.kind != RecordKind::Subvolume) continue;
        pooled[r.patient_id][r.model_id].push_back(aggregate::Vote{*r.label, *r.confidence});
    }
    VoteOutcome outcome;
    for (const auto& patient : patients) {
        const auto it = pooled.find(patient);
        if (it == pooled.end()) {
            outcome.failures[patient] = "EmptyPredictions: no SUBVOLUME records";
            continue;
        }
        try {
            outcome.diagnosis[patient] = aggregate::pool_ensemble(it->second, t);
        } catch (const Error& e) {
            outcome.failures[patient] = e.what();
        }
    }
    return outcome;
}

FeatureSet features_from_predictions(const std::vector<PredictionRecord>& records,
                                     const std::optional<std::string>& model_id) {
    std::set<std::string> slice_models;
    for (const auto& r : records) {
        if (r.kind == RecordKind::Slice) slice_models.insert(r.model_id);
    }
    std::string chosen;
    if (model_id) {
        chosen = *model_id;
    } else if (slice_models.size() == 1) {
        chosen = *slice_models.begin();
    } else if (slice_models.empty()) {
        throw Error(ErrorCode::MissingPrediction, "prediction file has no SLICE records");
    } else {
        throw Error(ErrorCode::MissingPrediction, "SLICE records from several models; choose one with --model-id");
    }
    const predictor::FileBackedPredictor source(records, chosen);
    FeatureSet out;
    for (const auto& patient : source.patients()) {
        try {
            const auto probs = source.predict_slices(predictor::VolumeKey{patient, 0, std::nullopt});
            out.features[patient] = aggregate::assemble_features(probs);
        } catch (const Error& e) {
            out.failures[patient] = e.what();
        }
    }
    return out;
}

void write_features(const std::map<std::string, aggregate::FeatureMatrix>& features, const fs::path& file) {
    Output sink(file);
    for (const auto& [patient, m] : features) {
        sink.stream() << patient;
        for (double v : m.flatten()) sink.stream() << ',' << text::exact(v);
        sink.stream() << '\n';
    }
    sink.finish(file);
}

std::map<std::string, aggregate::FeatureMatrix> read_features(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open features file " + file.string());
    std::map<std::string, aggregate::FeatureMatrix> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto fields = text::split(text::trim(line));
        const auto where = file.string() + ":" + std::to_string(line_no);
        if (fields.size() != aggregate::kFeatureSize + 1) {
            throw Error(ErrorCode::MalformedRecord, where + ": expected patient_id and 288 values");
        }
        std::vector<double> flat;
        flat.reserve(aggregate::kFeatureSize);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            const auto v = text::parse_double(fields[i]);
            if (!v) throw Error(ErrorCode::MalformedRecord, where + ": bad value '" + std::string(fields[i]) + "'");
            flat.push_back(*v);
        }
        if (!out.emplace(std::string(fields[0]), aggregate::FeatureMatrix::from_flat(flat)).second) {
            throw Error(ErrorCode::MalformedRecord, where + ": duplicate patient " + std::string(fields[0]));
        }
    }
    return out;
}

SyntheticCohort make_synthetic_cohort(const RunConfig& cfg) {
    if (cfg.n_covid + cfg.n_noncovid == 0) throw Error(ErrorCode::EmptyInput, "synthetic cohort needs patients");
    if (cfg.min_slices == 0 || cfg.min_slices > cfg.max_slices) {
        throw Error(ErrorCode::OutOfRange, "need 1 <= min-slices <= max-slices");
    }
    if (cfg.models == 0) throw Error(ErrorCode::OutOfRange, "need at least one model");

    SyntheticCohort cohort;
    rng::Engine eng(rng::derive(cfg.seed, 0x5157));
    const std::size_t total = cfg.n_covid + cfg.n_noncovid;
    for (std::size_t i = 0; i < total; ++i) {
        std::ostringstream id;
        id << "synth_" << std::setw(4) << std::setfill('0') << i;
        cohort.labels[id.str()] = i < cfg.n_covid ? Label::Covid : Label::NonCovid;
        cohort.slice_counts[id.str()] =
            cfg.min_slices + static_cast<std::size_t>(rng::uniform_below(eng, cfg.max_slices - cfg.min_slices + 1));
    }

    auto synthetic = cfg.synthetic;
    synthetic.seed = cfg.seed;
    for (std::size_t m = 0; m < cfg.models; ++m) {
        const predictor::SyntheticPredictor model(synthetic, "synthetic-" + std::to_string(m));
        for (const auto& [patient, label] : cohort.labels) {
            const predictor::VolumeKey key{patient, cohort.slice_counts.at(patient), label};
            for (const auto& plan : sampling::inference_subvolumes(key.slice_count)) {
                for (const auto& tta : sampling::tta_variants(plan)) {
                    const auto vote = model.predict_subvolume(key, tta);
                    cohort.records.push_back(PredictionRecord::subvolume(patient, model.model_id(), plan.start,
                                                                         tta.flips, vote.label, vote.confidence));
                }
            }
            const auto slices = model.predict_slices(key);
            for (std::size_t i = 0; i < slices.size(); ++i) {
                cohort.records.push_back(PredictionRecord::slice(patient, model.model_id(), i, slices[i]));
            }
        }
    }
    for (auto& r : cohort.records) r = canonicalize(r);
    return cohort;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_ingest(const RunConfig& cfg, std::ostream& log) {
    require_path(cfg.data_dir, "--data-dir");
    const auto dirs = list_patient_dirs(cfg.data_dir);
    LabelMap labels;
    if (!cfg.labels_file.empty()) labels = read_labels(cfg.labels_file);

    std::vector<std::string> lines(dirs.size());
    std::vector<std::string> errors(dirs.size());
    parallel_for(dirs.size(), cfg.jobs, [&](std::size_t i) {
        try {
            Volume vol = load_volume(dirs[i], labels.empty() ? nullptr : &labels);
            if (cfg.resize) vol = preprocess::resize_volume(vol, *cfg.resize, *cfg.resize);
            if (!cfg.export_dir.empty()) {
                const auto dest = cfg.export_dir / vol.patient_id;
                fs::create_directories(dest);
                for (std::size_t s = 0; s < vol.size(); ++s) {
                    image_io::write_png(vol.slices[s], dest / (std::to_string(s) + ".png"));
                }
            }
            std::ostringstream line;
            line << vol.patient_id << ',' << vol.size() << ',' << vol.slices.front().width << ','
                 << vol.slices.front().height << ',' << (vol.label ? to_string(*vol.label) : "");
            lines[i] = line.str();
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });

    std::map<std::string, std::string> failures;
    Output sink(cfg.out);
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        if (errors[i].empty()) {
            sink.stream() << lines[i] << '\n';
        } else {
            failures[dirs[i].filename().string()] = errors[i];
        }
    }
    sink.finish(cfg.out);
    return report_failures(failures, log);
}

int cmd_plan(const RunConfig& cfg, std::ostream& log) {
    require_path(cfg.data_dir, "--data-dir");
    if (cfg.mode != "train" && cfg.mode != "infer") {
        throw Error(ErrorCode::OutOfRange, "--mode must be train or infer, got '" + cfg.mode + "'");
    }
    const bool train = cfg.mode == "train";
    const std::size_t target = cfg.target_len.value_or(train ? sampling::kTrainLength : sampling::kInferenceLength);
    const auto dirs = list_patient_dirs(cfg.data_dir);

    std::vector<std::string> blocks(dirs.size());
    std::vector<std::string> errors(dirs.size());
    parallel_for(dirs.size(), cfg.jobs, [&](std::size_t i) {
        const std::string patient = dirs[i].filename().string();
        try {
            const std::size_t n = list_slice_files(dirs[i]).size();
            std::vector<sampling::SubVolumePlan> plans;
            if (train) {
                plans.push_back(sampling::train_sample(n, rng::derive(cfg.seed, rng::fnv1a(patient)), target));
            } else {
                plans = sampling::inference_subvolumes(n, target);
            }
            std::ostringstream out;
            for (const auto& p : plans) {
                out << patient << ',' << p.start << ',' << p.stride << ',' << p.pad_count << ',' << p.target_len << '\n';
            }
            blocks[i] = out.str();
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });

    std::map<std::string, std::string> failures;
    Output sink(cfg.out);
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        if (errors[i].empty()) {
            sink.stream() << blocks[i];
        } else {
            failures[dirs[i].filename().string()] = errors[i];
        }
    }
    sink.finish(cfg.out);
    return report_failures(failures, log);
}

int cmd_vote(const RunConfig& cfg, std::ostream& log) {
    require_path(cfg.predictions_file, "--predictions");
    const auto records = read_predictions(cfg.predictions_file);
    const auto outcome = vote_predictions(records, cfg.thresholds);
    write_label_lines(outcome.diagnosis, cfg.out);
    return report_failures(outcome.failures, log);
}

int cmd_features(const RunConfig& cfg, std::ostream& log) {
    require_path(cfg.predictions_file, "--predictions");
    const auto records = read_predictions(cfg.predictions_file);
    const auto set = features_from_predictions(records, cfg.model_id);
    write_features(set.features, cfg.out);
    return report_failures(set.failures, log);
}

int cmd_train_head(const RunConfig& cfg, std::ostream& log) {
    require_path(cfg.features_file, "--features");
    require_path(cfg.labels_file, "--labels");
    require_path(cfg.out, "--out");
    const auto features = read_features(cfg.features_file);
    const auto labels = read_labels(cfg.labels_file);

    std::vector<aggregate::FeatureMatrix> xs;
    std::vector<Label> ys;
    for (const auto& [patient, m] : features) {
        const auto it = labels.find(patient);
        if (it == labels.end()) throw Error(ErrorCode::KeyMismatch, "no label for patient " + patient);
        xs.push_back(m);
        ys.push_back(it->second);
    }
    auto train_cfg = cfg.train;
    train_cfg.seed = cfg.seed;
    const auto model = heads::train_head(xs, ys, cfg.head, train_cfg);
    heads::save_model(model, cfg.out);
    log << "trained " << heads::to_string(cfg.head) << " head on " << xs.size() << " patients\n";
    return kExitOk;
}

int cmd_predict_head(const RunConfig& cfg, std::ostream& /*log*/) {
    require_path(cfg.model_file, "--model");
    require_path(cfg.features_file, "--features");
    const auto model = heads::load_model(cfg.model_file);
    const auto features = read_features(cfg.features_file);
    LabelMap diagnosis;
    for (const auto& [patient, m] : features) diagnosis[patient] = heads::predict_label(model, m);
    write_label_lines(diagnosis, cfg.out);
    return kExitOk;
}

int cmd_folds(const RunConfig& cfg, std::ostream& /*log*/) {
    require_path(cfg.labels_file, "--labels");
    const auto folds = eval::stratified_folds(read_labels(cfg.labels_file), cfg.folds_k, cfg.seed);
    Output sink(cfg.out);
    for (const auto& [patient, fold] : folds) sink.stream() << patient << ',' << fold << '\n';
    sink.finish(cfg.out);
    return kExitOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& log) {
    require_path(cfg.labels_file, "--labels");
    const auto truth = read_labels(cfg.labels_file);
    std::map<std::string, std::string> meta;
    std::map<std::string, std::string> failures;
    LabelMap diagnosis;

    if (!cfg.diagnosis_file.empty()) {
        diagnosis = read_labels(cfg.diagnosis_file);
        meta["route"] = "diagnosis";
    } else {
        require_path(cfg.predictions_file, "--predictions or --diagnosis");
        const auto records = read_predictions(cfg.predictions_file);
        if (!cfg.model_file.empty()) {
            meta["route"] = "features";
            heads::HeadModel model;
            try {
                model = heads::load_model(cfg.model_file);
            } catch (const Error& e) {
                throw Error(e.code(), with_context("predict-head", e));
            }
            FeatureSet set;
            try {
                set = features_from_predictions(records, cfg.model_id);
            } catch (const Error& e) {
                throw Error(e.code(), with_context("features", e));
            }
            failures = set.failures;
            for (const auto& [patient, m] : set.features) diagnosis[patient] = heads::predict_label(model, m);
            meta["head"] = std::string(heads::to_string(model.kind));
        } else {
            meta["route"] = "vote";
            meta["t_noncovid"] = text::fixed(cfg.thresholds.t_noncovid);
            meta["t_all"] = text::fixed(cfg.thresholds.t_all);
            auto outcome = vote_predictions(records, cfg.thresholds);
            diagnosis = std::move(outcome.diagnosis);
            failures = std::move(outcome.failures);
        }
    }
    // Failed patients have no diagnosis, so confusion() rejects the run with KeyMismatch.
    for (const auto& [patient, why] : failures) log << "error: patient " << patient << ": " << why << '\n';
    eval::ConfusionMatrix cm;
    try {
        cm = eval::confusion(diagnosis, truth);
    } catch (const Error& e) {
        throw Error(e.code(), with_context("eval", e));
    }
    Output sink(cfg.out);
    sink.stream() << eval::report(cm, meta);
    sink.finish(cfg.out);
    return failures.empty() ? kExitOk : kExitData;
}

int cmd_synth(const RunConfig& cfg, std::ostream& log) {
    require_path(cfg.out, "--out");
    const auto cohort = make_synthetic_cohort(cfg);
    write_predictions(cohort.records, cfg.out);
    if (!cfg.labels_out.empty()) write_labels(cohort.labels, cfg.labels_out);
    log << "wrote " << cohort.records.size() << " records for " << cohort.labels.size() << " patients\n";
    return kExitOk;
}

}  // namespace ctvote::cli
