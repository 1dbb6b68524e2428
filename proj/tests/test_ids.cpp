/* SPDX-License-Identifier: Apache-2.0 */
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "sbacore/ids.hpp"

using namespace sbacore;

TEST_CASE("classify_frequency band edges and examples") {
    CHECK(classify_frequency(3500) == FrBand::FR1);
    CHECK(classify_frequency(28000) == FrBand::FR2);
    CHECK(classify_frequency(10000) == FrBand::OutOfRange);

    // inclusive endpoints
    CHECK(classify_frequency(410) == FrBand::FR1);
    CHECK(classify_frequency(7125) == FrBand::FR1);
    CHECK(classify_frequency(24250) == FrBand::FR2);
    CHECK(classify_frequency(52600) == FrBand::FR2);
    CHECK(classify_frequency(409.999) == FrBand::OutOfRange);
    CHECK(classify_frequency(52600.001) == FrBand::OutOfRange);

    CHECK_THROWS_AS(classify_frequency(0), std::invalid_argument);
    CHECK_THROWS_AS(classify_frequency(-5), std::invalid_argument);
}

TEST_CASE("classify_frequency partitions the positive axis") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(0.001, 100000.0);
    for (int i = 0; i < 5000; ++i) {
        double f = d(rng);
        FrBand b = classify_frequency(f);
        bool in_fr1 = f >= kFr1LowMhz && f <= kFr1HighMhz;
        bool in_fr2 = f >= kFr2LowMhz && f <= kFr2HighMhz;
        if (in_fr1) CHECK(b == FrBand::FR1);
        else if (in_fr2) CHECK(b == FrBand::FR2);
        else CHECK(b == FrBand::OutOfRange);
    }
}

TEST_CASE("adjacent cell center distance is sqrt(3)*R") {
    CHECK(adjacent_cell_center_distance(1.0) == doctest::Approx(1.7320508075688772).epsilon(1e-12));
    // sqrt(3)*500 computed independently with extended precision
    CHECK(adjacent_cell_center_distance(500.0) ==
          doctest::Approx(866.0254037844386468).epsilon(1e-12));
    CHECK_THROWS_AS(adjacent_cell_center_distance(0.0), std::invalid_argument);
    CHECK_THROWS_AS(adjacent_cell_center_distance(-1.0), std::invalid_argument);
}

TEST_CASE("distance squared equals 3 r^2 over the stated range") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> expd(-3.0, 6.0);
    for (int i = 0; i < 2000; ++i) {
        double r = std::pow(10.0, expd(rng));
        double d = adjacent_cell_center_distance(r);
        CHECK(d * d == doctest::Approx(3.0 * r * r).epsilon(1e-9));
    }
}

TEST_CASE("propagation model frequency support") {
    CHECK(propagation_model_supports(PropagationModel::OkumuraHata, 900));
    CHECK_FALSE(propagation_model_supports(PropagationModel::OkumuraHata, 2600));
    CHECK(propagation_model_supports(PropagationModel::ItuRP529, 3500));
    CHECK(propagation_model_supports(PropagationModel::OkumuraHata, 150));
    CHECK(propagation_model_supports(PropagationModel::OkumuraHata, 1500));
    CHECK(propagation_model_supports(PropagationModel::Cost231WalfishIkegami, 800));
    CHECK(propagation_model_supports(PropagationModel::Cost231WalfishIkegami, 2000));
    CHECK_FALSE(propagation_model_supports(PropagationModel::Cost231WalfishIkegami, 2001));
    CHECK_THROWS_AS(propagation_model_supports(PropagationModel::ItuRP529, -1),
                    std::invalid_argument);
}

TEST_CASE("identifier construction constraints") {
    CHECK_THROWS(PlmnId::make("12", "01"));
    CHECK_THROWS(PlmnId::make("123", "1"));
    CHECK_THROWS(PlmnId::make("12a", "01"));
    CHECK_THROWS(Supi::make(PlmnId::make("001", "01"), "12345678"));    // 8 digits
    CHECK_THROWS(Supi::make(PlmnId::make("001", "001"), "123456789"));  // ambiguous rendering
    CHECK_THROWS(Snssai::make(256));
    CHECK_THROWS(Snssai::make(1, 0x1000000u));
    CHECK_THROWS(Dnn::make(""));
    CHECK_THROWS(Dnn::make("a..b"));
    CHECK_THROWS(Dnn::make(std::string(64, 'x')));
    CHECK(Dnn::make(std::string(63, 'x')).name.size() == 63);
}

TEST_CASE("identifier parse/format round-trips") {
    std::mt19937_64 rng(23);
    auto digits = [&](size_t n) {
        std::string s;
        for (size_t i = 0; i < n; ++i) s.push_back(static_cast<char>('0' + rng() % 10));
        return s;
    };
    for (int i = 0; i < 500; ++i) {
        size_t mnc_len = 2 + rng() % 2;
        size_t msin_len = (mnc_len == 3) ? 10 : 9 + rng() % 2;
        Supi s = Supi::make(PlmnId::make(digits(3), digits(mnc_len)), digits(msin_len));
        CHECK(Supi::parse(s.to_string()) == s);

        Snssai a = Snssai::make(static_cast<int>(rng() % 256),
                                (rng() % 2) ? std::optional<uint32_t>(rng() % 0x1000000u)
                                            : std::nullopt);
        CHECK(Snssai::parse(a.to_string()) == a);
    }
    CHECK(Supi::parse("imsi-001011234567890").to_string() == "imsi-001011234567890");
    CHECK(Snssai::parse("1-000001") == Snssai::make(1, 1));
    CHECK(Snssai::parse("7") == Snssai::make(7));
}
