#include "ctvote/ct_ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ctvote/error.hpp"
#include "ctvote/image_io.hpp"
#include "ctvote/text.hpp"

namespace ctvote {

namespace fs = std::filesystem;

namespace {

constexpr double kProbSumTolerance = 1e-6;

bool valid_id(std::string_view id) {
    return !id.empty() && id.find_first_of(",\r\n") == std::string_view::npos && text::trim(id) == id;
}

double round6(double v) {
    const auto parsed = text::parse_double(text::fixed(v, 6));
    return parsed.value_or(v);
}

std::ofstream open_for_write(const fs::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + file.string() + " for writing");
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Volumes

std::vector<fs::path> list_slice_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw Error(ErrorCode::EmptyDirectory, dir.string() + " is not a directory");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && image_io::is_image_path(entry.path())) files.push_back(entry.path());
    }
    if (files.empty()) throw Error(ErrorCode::EmptyDirectory, dir.string() + " contains no slice images");

    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        return text::natural_less(a.filename().string(), b.filename().string());
    });
    return files;
}

Volume load_volume(const fs::path& dir, const LabelMap* labels) {
    const auto files = list_slice_files(dir);

    Volume vol;
    vol.patient_id = dir.filename().string();
    if (vol.patient_id.empty()) vol.patient_id = dir.parent_path().filename().string();
    vol.slices.reserve(files.size());
    for (const auto& file : files) {
        Image img = image_io::decode(file);
        if (!vol.slices.empty() &&
            (img.width != vol.slices.front().width || img.height != vol.slices.front().height)) {
            std::ostringstream msg;
            msg << file.string() << " is " << img.width << "x" << img.height << ", expected "
                << vol.slices.front().width << "x" << vol.slices.front().height;
            throw Error(ErrorCode::MixedDimensions, msg.str());
        }
        vol.slices.push_back(std::move(img));
    }
    if (labels) {
        if (auto it = labels->find(vol.patient_id); it != labels->end()) vol.label = it->second;
    }
    return vol;
}

std::vector<fs::path> list_patient_dirs(const fs::path& root) {
    if (!fs::is_directory(root)) {
        throw Error(ErrorCode::EmptyDirectory, root.string() + " is not a directory");
    }
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) dirs.push_back(entry.path());
    }
    if (dirs.empty()) throw Error(ErrorCode::EmptyDirectory, root.string() + " contains no patient directories");
    std::sort(dirs.begin(), dirs.end(), [](const fs::path& a, const fs::path& b) {
        return text::natural_less(a.filename().string(), b.filename().string());
    });
    return dirs;
}

Image apply_window(const HuGrid& raw, const WindowSpec& spec) {
    if (!(spec.window > 0.0)) {
        throw Error(ErrorCode::NonPositiveWindow, "window width must be > 0, got " + text::exact(spec.window));
    }
    Image out(raw.width, raw.height);
    const double low = spec.level - spec.window / 2.0;
    for (std::size_t i = 0; i < raw.hu.size() && i < out.data.size(); ++i) {
        out.data[i] = std::clamp((raw.hu[i] - low) / spec.window, 0.0, 1.0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Labels

LabelMap read_labels(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open labels file " + file.string());
    LabelMap labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto trimmed = text::trim(line);
        if (trimmed.empty()) continue;
        const auto fields = text::split(trimmed);
        const auto label = fields.size() == 2 ? parse_label(text::trim(fields[1])) : std::nullopt;
        if (!label || text::trim(fields[0]).empty()) {
            throw Error(ErrorCode::MalformedRecord,
                        file.string() + ":" + std::to_string(line_no) + ": expected patient_id,LABEL");
        }
        const std::string id(text::trim(fields[0]));
        if (!labels.emplace(id, *label).second) {
            throw Error(ErrorCode::MalformedRecord,
                        file.string() + ":" + std::to_string(line_no) + ": duplicate patient " + id);
        }
    }
    return labels;
}

void write_labels(const LabelMap& labels, const fs::path& file) {
    auto out = open_for_write(file);
    for (const auto& [id, label] : labels) {
        if (!valid_id(id)) throw Error(ErrorCode::InvariantViolation, "invalid patient id '" + id + "'");
        out << id << ',' << to_string(label) << '\n';
    }
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + file.string());
}

// ---------------------------------------------------------------------------
// Prediction records

PredictionRecord PredictionRecord::subvolume(std::string patient, std::string model, std::size_t start,
                                             FlipSpec flips, Label label, double confidence) {
    PredictionRecord r;
    r.patient_id = std::move(patient);
    r.model_id = std::move(model);
    r.kind = RecordKind::Subvolume;
    r.subvolume_start = start;
    r.flips = flips;
    r.label = label;
    r.confidence = confidence;
    return r;
}

PredictionRecord PredictionRecord::slice(std::string patient, std::string model, std::size_t index,
                                         std::array<double, 3> probs) {
    PredictionRecord r;
    r.patient_id = std::move(patient);
    r.model_id = std::move(model);
    r.kind = RecordKind::Slice;
    r.slice_index = index;
    r.probs = probs;
    return r;
}

void validate(const PredictionRecord& r) {
    const auto fail = [&](const std::string& why) {
        throw Error(ErrorCode::InvariantViolation, "record for '" + r.patient_id + "': " + why);
    };
    if (!valid_id(r.patient_id)) fail("invalid patient id");
    if (!valid_id(r.model_id)) fail("invalid model id");
    if (r.kind == RecordKind::Subvolume) {
        if (!r.subvolume_start || !r.flips || !r.label || !r.confidence) {
            fail("SUBVOLUME record needs start, flips, label and confidence");
        }
        if (r.probs || r.slice_index) fail("SUBVOLUME record must not carry probs or slice_index");
        if (!(*r.confidence >= 0.0 && *r.confidence <= 1.0)) fail("confidence outside [0,1]");
    } else {
        if (!r.slice_index || !r.probs) fail("SLICE record needs slice_index and probs");
        if (r.label || r.confidence || r.subvolume_start || r.flips) {
            fail("SLICE record must not carry label, confidence, start or flips");
        }
        double sum = 0.0;
        for (double p : *r.probs) {
            if (!(p >= 0.0 && p <= 1.0)) fail("probability outside [0,1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kProbSumTolerance) fail("probabilities sum to " + text::exact(sum));
    }
}

PredictionRecord canonicalize(const PredictionRecord& record) {
    validate(record);
    PredictionRecord out = record;
    if (out.confidence) out.confidence = round6(*out.confidence);
    if (out.probs) {
        auto& p = *out.probs;
        const auto largest = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        // Work in integer millionths so the residual is exact.
        std::array<long long, 3> micro{};
        long long others = 0;
        for (std::size_t c = 0; c < 3; ++c) {
            micro[c] = std::llround(round6(p[c]) * 1e6);
            if (c != largest) others += micro[c];
        }
        micro[largest] = std::max(0LL, 1000000LL - others);
        for (std::size_t c = 0; c < 3; ++c) p[c] = static_cast<double>(micro[c]) / 1e6;
    }
    return out;
}

std::string format_record(const PredictionRecord& record) {
    validate(record);
    const PredictionRecord r = canonicalize(record);
    std::string line = r.patient_id + ',' + r.model_id + ',';
    if (r.kind == RecordKind::Subvolume) {
        line += "SUBVOLUME,";
        line += std::to_string(*r.subvolume_start) + ',';
        line += r.flips->digits() + ',';
        line += std::string(to_string(*r.label)) + ',';
        line += text::fixed(*r.confidence, 6);
    } else {
        line += "SLICE,";
        line += std::to_string(*r.slice_index);
        for (double p : *r.probs) line += ',' + text::fixed(p, 6);
    }
    return line;
}

PredictionRecord parse_record(std::string_view line, std::size_t line_number) {
    const auto fail = [&](const std::string& why) -> PredictionRecord {
        throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_number) + ": " + why);
    };
    const auto fields = text::split(line);
    if (fields.size() != 7) return fail("expected 7 comma-separated fields, got " + std::to_string(fields.size()));
    const auto index = text::parse_int(fields[3]);
    if (!index || *index < 0) return fail("bad index field '" + std::string(fields[3]) + "'");

    PredictionRecord r;
    r.patient_id = std::string(fields[0]);
    r.model_id = std::string(fields[1]);
    if (fields[2] == "SUBVOLUME") {
        const auto flips = fields[4];
        if (flips.size() != 3 || flips.find_first_not_of("01") != std::string_view::npos) {
            return fail("flips must be three 0/1 digits");
        }
        const auto label = parse_label(fields[5]);
        if (!label) return fail("bad label '" + std::string(fields[5]) + "'");
        const auto conf = text::parse_double(fields[6]);
        if (!conf) return fail("bad confidence '" + std::string(fields[6]) + "'");
        r = PredictionRecord::subvolume(std::move(r.patient_id), std::move(r.model_id),
                                        static_cast<std::size_t>(*index),
                                        FlipSpec{flips[0] == '1', flips[1] == '1', flips[2] == '1'}, *label, *conf);
    } else if (fields[2] == "SLICE") {
        std::array<double, 3> probs{};
        for (std::size_t c = 0; c < 3; ++c) {
            const auto p = text::parse_double(fields[4 + c]);
            if (!p) return fail("bad probability '" + std::string(fields[4 + c]) + "'");
            probs[c] = *p;
        }
        r = PredictionRecord::slice(std::move(r.patient_id), std::move(r.model_id),
                                    static_cast<std::size_t>(*index), probs);
    } else {
        return fail("unknown record kind '" + std::string(fields[2]) + "'");
    }
    try {
        validate(r);
    } catch (const Error& e) {
        throw Error(ErrorCode::InvariantViolation, "line " + std::to_string(line_number) + ": " + e.what());
    }
    return r;
}

std::vector<PredictionRecord> read_predictions(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open prediction file " + file.string());
    std::vector<PredictionRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        records.push_back(parse_record(line, line_no));
    }
    return records;
}

void write_predictions(const std::vector<PredictionRecord>& records, const fs::path& file) {
    // Format everything first so an invalid record leaves no partial file behind.
    std::string body;
    for (const auto& r : records) {
        body += format_record(r);
        body += '\n';
    }
    auto out = open_for_write(file);
    out << body;
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + file.string());
}

}  // namespace ctvote
