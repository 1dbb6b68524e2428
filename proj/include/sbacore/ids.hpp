/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sbacore {

// Canonical text renderings (used in wire messages and scenario files):
//   PlmnId  "<mcc><mnc>"                 e.g. "00101"
//   Supi    "imsi-<mcc><mnc><msin>"      e.g. "imsi-001011234567890"
//   Snssai  "<sst>" or "<sst>-<sd hex6>" e.g. "1-000001"
//   Dnn     the dotted name itself
//
// A 15-digit IMSI body parses ambiguously (3+2+10 vs 3+3+9); parsing
// prefers the 2-digit MNC, and the constructor rejects the colliding
// combination (3-digit MNC with 9-digit MSIN) so that parse(format(x)) == x
// holds for every constructible Supi.

struct PlmnId {
    std::string mcc;  // exactly 3 decimal digits
    std::string mnc;  // 2 or 3 decimal digits

    bool operator==(const PlmnId&) const = default;

    std::string to_string() const { return mcc + mnc; }
    static PlmnId make(const std::string& mcc, const std::string& mnc);
};

struct Supi {
    PlmnId plmn;
    std::string msin;  // 9 or 10 decimal digits

    bool operator==(const Supi&) const = default;
    bool operator<(const Supi& o) const { return to_string() < o.to_string(); }

    std::string to_string() const { return "imsi-" + plmn.to_string() + msin; }
    static Supi make(PlmnId plmn, const std::string& msin);
    static Supi parse(const std::string& text);  // throws std::invalid_argument
};

struct Snssai {
    int sst = 0;                      // 0..255
    std::optional<uint32_t> sd;       // 24-bit when present

    bool operator==(const Snssai&) const = default;
    bool operator<(const Snssai& o) const {
        if (sst != o.sst) return sst < o.sst;
        return sd.value_or(0x1000000u) < o.sd.value_or(0x1000000u);
    }

    std::string to_string() const;
    static Snssai make(int sst, std::optional<uint32_t> sd = std::nullopt);
    static Snssai parse(const std::string& text);
};

struct Dnn {
    std::string name;  // non-empty dot-separated labels, each <= 63 chars

    bool operator==(const Dnn&) const = default;
    bool operator<(const Dnn& o) const { return name < o.name; }

    const std::string& to_string() const { return name; }
    static Dnn make(const std::string& name);
};

using NfInstanceId = std::string;

enum class FrBand { FR1, FR2, OutOfRange };

struct FrequencyRange {
    FrBand kind;
    double low_mhz;
    double high_mhz;
};

// Release-15 frequency ranges, endpoints inclusive.
inline constexpr double kFr1LowMhz = 410.0, kFr1HighMhz = 7125.0;
inline constexpr double kFr2LowMhz = 24250.0, kFr2HighMhz = 52600.0;

FrBand classify_frequency(double freq_mhz);  // throws on freq <= 0
const char* to_string(FrBand band);

// Hexagonal layout: centers of adjacent cells sit sqrt(3)*R apart.
double adjacent_cell_center_distance(double radius_m);  // throws on radius <= 0

enum class PropagationModel { OkumuraHata, Cost231WalfishIkegami, ItuRP529 };

bool propagation_model_supports(PropagationModel model, double freq_mhz);

}  // namespace sbacore
