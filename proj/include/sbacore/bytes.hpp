/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sbacore {

using Bytes = std::vector<uint8_t>;

std::string to_hex(const Bytes& data);
Bytes from_hex(const std::string& hex);  // throws std::invalid_argument

std::string to_base64(const Bytes& data);
Bytes from_base64(const std::string& text);  // throws std::invalid_argument

inline Bytes to_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }
inline std::string to_string(const Bytes& b) { return std::string(b.begin(), b.end()); }

void put_u32_be(Bytes& out, uint32_t v);
uint32_t get_u32_be(const uint8_t* p);

}  // namespace sbacore
