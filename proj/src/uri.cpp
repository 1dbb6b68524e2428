/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/uri.hpp"

namespace sbacore {

std::vector<std::string> split_path(const std::string& uri) {
    std::string path = uri.substr(0, uri.find('?'));
    std::vector<std::string> out;
    size_t start = 0;
    while (start < path.size()) {
        if (path[start] == '/') {
            ++start;
            continue;
        }
        size_t end = path.find('/', start);
        if (end == std::string::npos) end = path.size();
        out.push_back(path.substr(start, end - start));
        start = end;
    }
    return out;
}

std::map<std::string, std::string> parse_query(const std::string& uri) {
    std::map<std::string, std::string> out;
    size_t q = uri.find('?');
    if (q == std::string::npos) return out;
    size_t start = q + 1;
    while (start < uri.size()) {
        size_t end = uri.find('&', start);
        if (end == std::string::npos) end = uri.size();
        std::string pair = uri.substr(start, end - start);
        size_t eq = pair.find('=');
        if (eq != std::string::npos)
            out[pair.substr(0, eq)] = pair.substr(eq + 1);
        else if (!pair.empty())
            out[pair] = "";
        start = end + 1;
    }
    return out;
}

}  // namespace sbacore
