#include <doctest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "ctvote/text.hpp"

using namespace ctvote;

TEST_CASE("natural sort compares digit runs as integers") {
    std::vector<std::string> names{"2.jpg", "10.jpg", "1.jpg"};
    std::sort(names.begin(), names.end(), text::natural_less);
    CHECK(names == std::vector<std::string>{"1.jpg", "2.jpg", "10.jpg"});

    CHECK(text::natural_less("slice9", "slice10"));
    CHECK(text::natural_less("a", "a1"));
    CHECK_FALSE(text::natural_less("b1", "a2"));
    // numeric tie falls back to lexicographic order
    CHECK(text::natural_less("01.jpg", "1.jpg"));
    CHECK_FALSE(text::natural_less("1.jpg", "01.jpg"));
}

TEST_CASE("natural sort is a strict total order independent of input order") {
    std::mt19937 gen(7);
    const std::string alphabet = "0a1b.9";
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> names;
        for (int i = 0; i < 12; ++i) {
            std::string s;
            const int len = 1 + static_cast<int>(gen() % 5);
            for (int c = 0; c < len; ++c) s.push_back(alphabet[gen() % alphabet.size()]);
            names.push_back(s);
        }
        auto a = names;
        auto b = names;
        std::shuffle(b.begin(), b.end(), gen);
        std::sort(a.begin(), a.end(), text::natural_less);
        std::sort(b.begin(), b.end(), text::natural_less);
        CHECK(a == b);
        for (const auto& x : names) {
            CHECK_FALSE(text::natural_less(x, x));
            for (const auto& y : names) {
                if (x != y) CHECK(text::natural_less(x, y) != text::natural_less(y, x));
            }
        }
    }
}

TEST_CASE("fixed rounds exact ties half to even") {
    CHECK(text::fixed(0.0078125) == "0.007812");  // 2^-7, tie, keep even digit
    CHECK(text::fixed(0.0234375) == "0.023438");  // 3*2^-7, tie, round odd up
    CHECK(text::fixed(1.0) == "1.000000");
    CHECK(text::fixed(-1e-9) == "0.000000");
}

TEST_CASE("exact survives a text round trip") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> dist(-1e3, 1e3);
    for (int i = 0; i < 1000; ++i) {
        const double v = dist(gen);
        CHECK(*text::parse_double(text::exact(v)) == v);
    }
}
