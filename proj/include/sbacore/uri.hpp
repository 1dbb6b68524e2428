/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <map>
#include <string>
#include <vector>

namespace sbacore {

// "/a/b/c?x=1" -> {"a","b","c"}
std::vector<std::string> split_path(const std::string& uri);

// "?a=1&b=two" -> {{"a","1"},{"b","two"}} (no percent-decoding; values are
// restricted to URL-safe characters by construction in this project)
std::map<std::string, std::string> parse_query(const std::string& uri);

}  // namespace sbacore
