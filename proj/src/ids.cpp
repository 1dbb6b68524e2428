/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/ids.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace sbacore {

namespace {

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    return true;
}

}  // namespace

PlmnId PlmnId::make(const std::string& mcc, const std::string& mnc) {
    if (!all_digits(mcc) || mcc.size() != 3)
        throw std::invalid_argument("PlmnId: mcc must be exactly 3 digits: '" + mcc + "'");
    if (!all_digits(mnc) || (mnc.size() != 2 && mnc.size() != 3))
        throw std::invalid_argument("PlmnId: mnc must be 2 or 3 digits: '" + mnc + "'");
    return PlmnId{mcc, mnc};
}

Supi Supi::make(PlmnId plmn, const std::string& msin) {
    if (!all_digits(msin) || (msin.size() != 9 && msin.size() != 10))
        throw std::invalid_argument("Supi: msin must be 9 or 10 digits");
    if (plmn.mnc.size() == 3 && msin.size() == 9)
        throw std::invalid_argument(
            "Supi: 3-digit mnc with 9-digit msin is not representable unambiguously "
            "in the imsi-<mcc><mnc><msin> rendering; use a 10-digit msin");
    return Supi{std::move(plmn), msin};
}

Supi Supi::parse(const std::string& text) {
    if (text.rfind("imsi-", 0) != 0)
        throw std::invalid_argument("Supi: expected 'imsi-' prefix: '" + text + "'");
    const std::string digits = text.substr(5);
    if (!all_digits(digits) || digits.size() < 14 || digits.size() > 16)
        throw std::invalid_argument("Supi: body must be 14-16 digits: '" + text + "'");
    const std::string mcc = digits.substr(0, 3);
    // 14 -> mnc2+msin9, 15 -> mnc2+msin10 (preferred reading), 16 -> mnc3+msin10
    size_t mnc_len = (digits.size() == 16) ? 3 : 2;
    const std::string mnc = digits.substr(3, mnc_len);
    const std::string msin = digits.substr(3 + mnc_len);
    return make(PlmnId::make(mcc, mnc), msin);
}

Snssai Snssai::make(int sst, std::optional<uint32_t> sd) {
    if (sst < 0 || sst > 255)
        throw std::invalid_argument("Snssai: sst out of range 0..255: " + std::to_string(sst));
    if (sd && *sd > 0xFFFFFFu)
        throw std::invalid_argument("Snssai: sd exceeds 24 bits");
    return Snssai{sst, sd};
}

std::string Snssai::to_string() const {
    if (!sd) return std::to_string(sst);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%d-%06x", sst, *sd);
    return buf;
}

Snssai Snssai::parse(const std::string& text) {
    size_t dash = text.find('-');
    try {
        if (dash == std::string::npos) return make(std::stoi(text));
        int sst = std::stoi(text.substr(0, dash));
        uint32_t sd = static_cast<uint32_t>(std::stoul(text.substr(dash + 1), nullptr, 16));
        return make(sst, sd);
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("Snssai: malformed '" + text + "'");
    }
}

Dnn Dnn::make(const std::string& name) {
    if (name.empty()) throw std::invalid_argument("Dnn: empty name");
    size_t start = 0;
    while (true) {
        size_t dot = name.find('.', start);
        size_t len = (dot == std::string::npos ? name.size() : dot) - start;
        if (len == 0 || len > 63)
            throw std::invalid_argument("Dnn: label length must be 1..63: '" + name + "'");
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return Dnn{name};
}

FrBand classify_frequency(double freq_mhz) {
    if (!(freq_mhz > 0))
        throw std::invalid_argument("classify_frequency: frequency must be positive");
    if (freq_mhz >= kFr1LowMhz && freq_mhz <= kFr1HighMhz) return FrBand::FR1;
    if (freq_mhz >= kFr2LowMhz && freq_mhz <= kFr2HighMhz) return FrBand::FR2;
    return FrBand::OutOfRange;
}

const char* to_string(FrBand band) {
    switch (band) {
        case FrBand::FR1: return "FR1";
        case FrBand::FR2: return "FR2";
        case FrBand::OutOfRange: return "OutOfRange";
    }
    return "?";
}

double adjacent_cell_center_distance(double radius_m) {
    if (!(radius_m > 0))
        throw std::invalid_argument("adjacent_cell_center_distance: radius must be positive");
    return std::sqrt(3.0) * radius_m;
}

bool propagation_model_supports(PropagationModel model, double freq_mhz) {
    if (!(freq_mhz > 0))
        throw std::invalid_argument("propagation_model_supports: frequency must be positive");
    switch (model) {
        case PropagationModel::OkumuraHata: return freq_mhz >= 150 && freq_mhz <= 1500;
        case PropagationModel::Cost231WalfishIkegami: return freq_mhz >= 800 && freq_mhz <= 2000;
        case PropagationModel::ItuRP529: return freq_mhz >= 700 && freq_mhz <= 3500;
    }
    return false;
}

}  // namespace sbacore
