#include <doctest.h>

#include <fstream>
#include <random>

#include "ctvote/ct_ingest.hpp"
#include "ctvote/error.hpp"
#include "ctvote/image_io.hpp"
#include "support.hpp"

using namespace ctvote;

namespace {

Image constant_image(std::size_t w, std::size_t h, double v) { return Image(w, h, v); }

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected ctvote::Error");
    return ErrorCode::IoFailure;
}

PredictionRecord random_record(std::mt19937_64& gen) {
    std::uniform_int_distribution<int> micro(0, 1000000);
    const std::string patient = "p" + std::to_string(gen() % 50);
    const std::string model = "m" + std::to_string(gen() % 4);
    if (gen() % 2 == 0) {
        const FlipSpec flips{gen() % 2 == 0, gen() % 2 == 0, gen() % 2 == 0};
        return PredictionRecord::subvolume(patient, model, gen() % 5, flips,
                                           gen() % 2 == 0 ? Label::Covid : Label::NonCovid, micro(gen) / 1e6);
    }
    const int a = micro(gen);
    const int b = std::uniform_int_distribution<int>(0, 1000000 - a)(gen);
    const int c = 1000000 - a - b;
    return PredictionRecord::slice(patient, model, gen() % 700, {a / 1e6, b / 1e6, c / 1e6});
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("load_volume orders slices by natural filename sort") {
    TempDir dir;
    const auto patient = dir / "patient_7";
    std::filesystem::create_directories(patient);
    image_io::write_pgm(constant_image(4, 3, 2 / 255.0), patient / "2.pgm");
    image_io::write_pgm(constant_image(4, 3, 10 / 255.0), patient / "10.pgm");
    image_io::write_pgm(constant_image(4, 3, 1 / 255.0), patient / "1.pgm");
    std::ofstream(patient / "notes.txt") << "ignored";

    LabelMap labels{{"patient_7", Label::Covid}};
    const Volume vol = load_volume(patient, &labels);
    CHECK(vol.patient_id == "patient_7");
    REQUIRE(vol.size() == 3);
    CHECK(vol.slices[0].data[0] == doctest::Approx(1 / 255.0));
    CHECK(vol.slices[1].data[0] == doctest::Approx(2 / 255.0));
    CHECK(vol.slices[2].data[0] == doctest::Approx(10 / 255.0));
    CHECK(vol.label == Label::Covid);
}

TEST_CASE("load_volume error paths") {
    TempDir dir;
    const auto empty = dir / "empty";
    std::filesystem::create_directories(empty);
    CHECK(code_of([&] { load_volume(empty); }) == ErrorCode::EmptyDirectory);

    const auto mixed = dir / "mixed";
    std::filesystem::create_directories(mixed);
    image_io::write_pgm(constant_image(4, 4, 0.5), mixed / "0.pgm");
    image_io::write_pgm(constant_image(5, 4, 0.5), mixed / "1.pgm");
    CHECK(code_of([&] { load_volume(mixed); }) == ErrorCode::MixedDimensions);

    const auto broken = dir / "broken";
    std::filesystem::create_directories(broken);
    std::ofstream(broken / "0.jpg") << "definitely not a jpeg";
    CHECK(code_of([&] { load_volume(broken); }) == ErrorCode::UndecodableImage);
    std::ofstream(broken / "0.png") << "nor a png";
    std::filesystem::remove(broken / "0.jpg");
    CHECK(code_of([&] { load_volume(broken); }) == ErrorCode::UndecodableImage);
}

TEST_CASE("8-bit decode maps p to p/255 for every codec") {
    TempDir dir;
    Image img(16, 2);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>(i * 8 % 256) / 255.0;
    image_io::write_pgm(img, dir / "a.pgm");
    image_io::write_png(img, dir / "a.png");
    CHECK(image_io::decode(dir / "a.pgm") == img);
    CHECK(image_io::decode(dir / "a.png") == img);

    // JPEG is lossy; a flat image survives exactly.
    const Image flat(16, 16, 128 / 255.0);
    image_io::write_jpeg(flat, dir / "a.jpg");
    const Image back = image_io::decode(dir / "a.jpg");
    CHECK(back.width == 16);
    CHECK(back.height == 16);
    for (double v : back.data) CHECK(v == doctest::Approx(128 / 255.0).epsilon(0.01));
}

TEST_CASE("a 700-slice 512x512 volume loads completely") {
    TempDir dir;
    const auto patient = dir / "big";
    std::filesystem::create_directories(patient);
    Image img(512, 512);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>(i % 256) / 255.0;
    for (int s = 0; s < 700; ++s) image_io::write_pgm(img, patient / (std::to_string(s) + ".pgm"));

    const Volume vol = load_volume(patient);
    REQUIRE(vol.size() == 700);
    double lo = 1.0, hi = 0.0;
    for (const auto& s : vol.slices) {
        REQUIRE(s.width == 512);
        REQUIRE(s.height == 512);
        for (double v : s.data) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
}

TEST_CASE("apply_window maps HU linearly and clamps") {
    const WindowSpec spec{350.0, 1150.0};
    HuGrid grid{5, 1, {1150.0, 1150.0 - 175.0, 1150.0 + 175.0, 1150.0 + 87.5, -2000.0}};
    const Image out = apply_window(grid, spec);
    CHECK(out.data[0] == 0.5);
    CHECK(out.data[1] == 0.0);
    CHECK(out.data[2] == 1.0);
    CHECK(out.data[3] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(out.data[4] == 0.0);

    CHECK(code_of([] { apply_window(HuGrid{1, 1, {0.0}}, WindowSpec{0.0, 0.0}); }) == ErrorCode::NonPositiveWindow);
    CHECK(code_of([] { apply_window(HuGrid{1, 1, {0.0}}, WindowSpec{-5.0, 0.0}); }) == ErrorCode::NonPositiveWindow);
}

TEST_CASE("apply_window is monotone and bounded") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> hu(-3000.0, 3000.0);
    std::uniform_real_distribution<double> width(1.0, 2000.0);
    for (int trial = 0; trial < 200; ++trial) {
        const WindowSpec spec{width(gen), hu(gen)};
        HuGrid grid{64, 1, {}};
        for (int i = 0; i < 64; ++i) grid.hu.push_back(hu(gen));
        std::sort(grid.hu.begin(), grid.hu.end());
        const Image out = apply_window(grid, spec);
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            CHECK(out.data[i] >= 0.0);
            CHECK(out.data[i] <= 1.0);
            if (i > 0) CHECK(out.data[i] >= out.data[i - 1]);
        }
    }
}

TEST_CASE("labels file round trip and errors") {
    TempDir dir;
    const LabelMap labels{{"a", Label::Covid}, {"b", Label::NonCovid}};
    write_labels(labels, dir / "labels.csv");
    CHECK(slurp(dir / "labels.csv") == "a,COVID\nb,NON_COVID\n");
    CHECK(read_labels(dir / "labels.csv") == labels);

    std::ofstream(dir / "bad.csv") << "a,MAYBE\n";
    CHECK(code_of([&] { read_labels(dir / "bad.csv"); }) == ErrorCode::MalformedRecord);
    std::ofstream(dir / "dup.csv") << "a,COVID\na,NON_COVID\n";
    CHECK(code_of([&] { read_labels(dir / "dup.csv"); }) == ErrorCode::MalformedRecord);
}

TEST_CASE("prediction lines have the fixed field order") {
    const auto sub = PredictionRecord::subvolume("p1", "fold2", 3, FlipSpec{true, false, true}, Label::NonCovid, 0.8);
    CHECK(format_record(sub) == "p1,fold2,SUBVOLUME,3,101,NON_COVID,0.800000");
    const auto sl = PredictionRecord::slice("p1", "fold2", 12, {0.25, 0.25, 0.5});
    CHECK(format_record(sl) == "p1,fold2,SLICE,12,0.250000,0.250000,0.500000");
}

TEST_CASE("read_predictions parses valid files and rejects bad lines") {
    TempDir dir;
    std::ofstream(dir / "ok.csv") << "p,m,SLICE,0,0.1,0.2,0.7\np,m,SLICE,1,0.3,0.3,0.4\np,m,SLICE,2,1,0,0\n";
    const auto records = read_predictions(dir / "ok.csv");
    REQUIRE(records.size() == 3);
    for (const auto& r : records) {
        const auto& p = *r.probs;
        CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-9));
    }

    std::ofstream(dir / "sum.csv") << "p,m,SLICE,0,0.5,0.5,0.5\n";
    CHECK(code_of([&] { read_predictions(dir / "sum.csv"); }) == ErrorCode::InvariantViolation);

    std::ofstream(dir / "short.csv") << "p,m,SLICE,0,0.5,0.5\n";
    try {
        read_predictions(dir / "short.csv");
        FAIL("expected MalformedRecord");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MalformedRecord);
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }

    std::ofstream(dir / "flips.csv") << "p,m,SUBVOLUME,0,1x1,COVID,0.5\n";
    CHECK(code_of([&] { read_predictions(dir / "flips.csv"); }) == ErrorCode::MalformedRecord);
    std::ofstream(dir / "conf.csv") << "p,m,SUBVOLUME,0,000,COVID,1.5\n";
    CHECK(code_of([&] { read_predictions(dir / "conf.csv"); }) == ErrorCode::InvariantViolation);
}

TEST_CASE("write_predictions canonical output") {
    TempDir dir;
    write_predictions({}, dir / "empty.csv");
    CHECK(slurp(dir / "empty.csv").empty());

    write_predictions({PredictionRecord::subvolume("p", "m", 0, {}, Label::Covid, 0.9)}, dir / "one.csv");
    CHECK(slurp(dir / "one.csv") == "p,m,SUBVOLUME,0,000,COVID,0.900000\n");

    auto bad = PredictionRecord::slice("p", "m", 0, {0.5, 0.5, 0.5});
    CHECK(code_of([&] { write_predictions({bad}, dir / "bad.csv"); }) == ErrorCode::InvariantViolation);
    auto comma = PredictionRecord::slice("p,q", "m", 0, {0.5, 0.25, 0.25});
    CHECK(code_of([&] { write_predictions({comma}, dir / "bad.csv"); }) == ErrorCode::InvariantViolation);
}

TEST_CASE("prediction round trip is the identity on canonical records") {
    TempDir dir;
    std::mt19937_64 gen(2024);
    std::vector<PredictionRecord> records;
    for (int i = 0; i < 1000; ++i) records.push_back(random_record(gen));
    write_predictions(records, dir / "a.csv");
    CHECK(read_predictions(dir / "a.csv") == records);
}

TEST_CASE("one canonicalization pass makes off-grid records byte-stable") {
    TempDir dir;
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<PredictionRecord> records;
    for (int i = 0; i < 500; ++i) {
        double a = u(gen), b = u(gen), c = u(gen);
        const double s = a + b + c;
        records.push_back(PredictionRecord::slice("p", "m", static_cast<std::size_t>(i), {a / s, b / s, c / s}));
        records.push_back(PredictionRecord::subvolume("p", "m", static_cast<std::size_t>(i), {}, Label::Covid, u(gen)));
    }
    write_predictions(records, dir / "first.csv");
    const auto reread = read_predictions(dir / "first.csv");
    write_predictions(reread, dir / "second.csv");
    CHECK(slurp(dir / "first.csv") == slurp(dir / "second.csv"));
    for (const auto& r : reread) {
        if (!r.probs) continue;
        const auto& p = *r.probs;
        CHECK(std::abs(p[0] + p[1] + p[2] - 1.0) <= 1e-9);
    }
}
