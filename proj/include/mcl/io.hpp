// Minimal binary archive: JSON header plus named little-endian double blobs.
// Used for cohort checkpoints and deployment exports.
#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mcl/types.hpp"

namespace mcl {

inline void save_archive(const std::string& path, nlohmann::json meta,
                         const std::vector<std::pair<std::string, const Matd*>>& tensors) {
    nlohmann::json dir = nlohmann::json::array();
    for (const auto& [name, m] : tensors)
        dir.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
    meta["tensors"] = dir;
    const std::string header = meta.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_archive: cannot open " + path);
    out.write("MCLARCH1", 8);
    const uint64_t hlen = header.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& [name, m] : tensors) {
        // column-major storage written as-is; the directory fixes the shape
        out.write(reinterpret_cast<const char*>(m->data()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(m->size())));
    }
    if (!out) throw IoError("save_archive: write failed for " + path);
}

struct Archive {
    nlohmann::json meta;
    std::map<std::string, Matd> tensors;
};

inline Archive load_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_archive: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "MCLARCH1")
        throw IoError("load_archive: bad magic in " + path);
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string header(hlen, '\0');
    in.read(header.data(), static_cast<std::streamsize>(hlen));
    Archive a;
    a.meta = nlohmann::json::parse(header);
    for (const auto& entry : a.meta.at("tensors")) {
        const std::string name = entry.at("name");
        Matd m(entry.at("rows").get<Eigen::Index>(), entry.at("cols").get<Eigen::Index>());
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(m.size())));
        a.tensors[name] = std::move(m);
    }
    if (!in) throw IoError("load_archive: truncated archive " + path);
    return a;
}

}  // namespace mcl
