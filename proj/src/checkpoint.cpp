#include "lattn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace lattn {

namespace {

constexpr char kMagic[8] = {'L', 'A', 'T', 'T', 'N', 'C', 'K', 'P'};
constexpr uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params) {
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& [name, e] : params) {
        manifest.push_back({{"name", name},
                            {"shape", e.value.shape()},
                            {"dtype", "f64"},
                            {"frozen", e.frozen}});
    }
    const std::string manifest_bytes = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<uint64_t>(manifest_bytes.size()));
    out.write(manifest_bytes.data(), static_cast<std::streamsize>(manifest_bytes.size()));
    for (const auto& [name, e] : params) {
        const auto d = e.value.data();
        out.write(reinterpret_cast<const char*>(d.data()),
                  static_cast<std::streamsize>(d.size() * sizeof(double)));
    }
    if (!out) throw ValidationError("checkpoint write failed: " + path);
}

ParamStore load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint: " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ValidationError("not a checkpoint file (bad magic): " + path);
    }
    const uint32_t version = read_pod<uint32_t>(in);
    if (version != kVersion) {
        throw ValidationError("unsupported checkpoint version in " + path);
    }
    const uint64_t manifest_len = read_pod<uint64_t>(in);
    std::string manifest_bytes(manifest_len, '\0');
    in.read(manifest_bytes.data(), static_cast<std::streamsize>(manifest_len));
    if (!in) throw ValidationError("truncated checkpoint manifest: " + path);

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(manifest_bytes);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("bad checkpoint manifest: " + std::string(e.what()));
    }
    if (!manifest.is_array()) throw ValidationError("checkpoint manifest must be an array");

    ParamStore params;
    for (const auto& item : manifest) {
        const std::string name = item.at("name").get<std::string>();
        const auto shape = item.at("shape").get<std::vector<size_t>>();
        const std::string dtype = item.at("dtype").get<std::string>();
        const bool frozen = item.value("frozen", false);
        if (shape.empty() || shape.size() > 2) {
            throw ValidationError("checkpoint tensor " + name + " has unsupported rank");
        }
        Tensor t = shape.size() == 1 ? Tensor(shape[0]) : Tensor(shape[0], shape[1]);
        auto d = t.data();
        if (dtype == "f64") {
            in.read(reinterpret_cast<char*>(d.data()),
                    static_cast<std::streamsize>(d.size() * sizeof(double)));
        } else if (dtype == "f32") {
            std::vector<float> buf(d.size());
            in.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(buf.size() * sizeof(float)));
            for (size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(buf[i]);
        } else {
            throw ValidationError("checkpoint tensor " + name + " has unknown dtype " + dtype);
        }
        if (!in) throw ValidationError("truncated checkpoint buffer for " + name);
        params.add(name, std::move(t), frozen);
    }
    return params;
}

}  // namespace lattn
