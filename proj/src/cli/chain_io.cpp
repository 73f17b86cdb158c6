#include "wgf/chain_io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wgf/errors.hpp"

namespace wgf {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

void put_f64_le(std::string& out, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

double get_f64_le(const unsigned char* p) {
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

json tensor_entry(const std::string& name, std::size_t rows, std::size_t cols,
                  std::size_t offset) {
    return json{{"name", name}, {"rows", rows}, {"cols", cols}, {"offset", offset}};
}

// Appends a rows x cols tensor to the blob and records it in the manifest.
void emit(json& tensors, std::string& blob, const std::string& name,
          const double* data, std::size_t rows, std::size_t cols) {
    tensors.push_back(tensor_entry(name, rows, cols, blob.size()));
    for (std::size_t i = 0; i < rows * cols; ++i) put_f64_le(blob, data[i]);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorruptManifest("chain load: cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// json.hpp throws its own exceptions; funnel every access through these so
// a hand-edited manifest surfaces as CorruptManifest with the failing key.
const json& field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end())
        throw CorruptManifest(std::string("chain manifest: missing key '") + key + "'");
    return *it;
}

template <typename T>
T field_as(const json& j, const char* key) {
    try {
        return field(j, key).get<T>();
    } catch (const json::exception& e) {
        throw CorruptManifest(std::string("chain manifest: bad value for '") + key +
                              "': " + e.what());
    }
}

// Pulls one manifest-described tensor out of the blob, checking the recorded
// shape against the shape the step geometry dictates.
void take(const json& entry, const std::string& blob, double* out,
          std::size_t rows, std::size_t cols) {
    const auto r = field_as<std::size_t>(entry, "rows");
    const auto c = field_as<std::size_t>(entry, "cols");
    const auto off = field_as<std::size_t>(entry, "offset");
    const auto name = field_as<std::string>(entry, "name");
    if (r != rows || c != cols)
        throw CorruptManifest("chain manifest: tensor '" + name + "' is " +
                              std::to_string(r) + "x" + std::to_string(c) +
                              ", expected " + std::to_string(rows) + "x" +
                              std::to_string(cols));
    const std::size_t bytes = rows * cols * 8;
    if (off + bytes > blob.size())
        throw CorruptManifest("chain manifest: tensor '" + name +
                              "' runs past the blob");
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data()) + off;
    for (std::size_t i = 0; i < rows * cols; ++i) out[i] = get_f64_le(p + 8 * i);
}

}  // namespace

std::string fnv1a64_hex(const unsigned char* data, std::size_t n) {
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

Gaussian InitSpec::gaussian() const {
    if (kind != "gaussian")
        throw InvalidArgument("init spec: kind '" + kind +
                              "' cannot be reconstructed");
    return Gaussian(mean, cov);
}

void save_chain(const JkoChain& chain, const std::string& dir, const InitSpec* init) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::string blob;
    json steps = json::array();
    for (std::size_t k = 0; k < chain.steps.size(); ++k) {
        const IcnnParams& p = chain.steps[k];
        json tensors = json::array();
        for (std::size_t l = 0; l < p.layers(); ++l) {
            emit(tensors, blob, "A" + std::to_string(l), p.A[l].data(),
                 p.A[l].rows, p.A[l].cols);
            emit(tensors, blob, "b" + std::to_string(l), p.b[l].data(),
                 p.b[l].size(), 1);
        }
        for (std::size_t l = 0; l + 1 < p.layers(); ++l)
            emit(tensors, blob, "W" + std::to_string(l), p.W[l].data(),
                 p.W[l].rows, p.W[l].cols);
        emit(tensors, blob, "w_out", p.w_out.data(), p.w_out.size(), 1);
        steps.push_back({{"dim", p.dim},
                         {"widths", p.widths},
                         {"alpha", p.alpha},
                         {"tensors", std::move(tensors)}});
    }

    json manifest{
        {"format_version", kFormatVersion},
        {"endianness", "little"},
        {"h", chain.h},
        {"inv_beta", chain.inv_beta},
        {"blob",
         {{"file", "params.bin"},
          {"bytes", blob.size()},
          {"fnv1a64",
           fnv1a64_hex(reinterpret_cast<const unsigned char*>(blob.data()),
                       blob.size())}}},
        {"steps", std::move(steps)}};
    if (init) {
        json j{{"kind", init->kind}};
        if (init->kind == "gaussian") {
            j["mean"] = init->mean;
            j["cov"] = init->cov.a;
            j["dim"] = init->mean.size();
        }
        manifest["init"] = std::move(j);
    }

    {
        std::ofstream out(fs::path(dir) / "params.bin", std::ios::binary);
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!out) throw Error("chain save: writing params.bin failed");
    }
    {
        std::ofstream out(fs::path(dir) / "chain.json");
        out << manifest.dump(2) << '\n';
        if (!out) throw Error("chain save: writing chain.json failed");
    }
}

LoadedChain load_chain(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string text = read_file(fs::path(dir) / "chain.json");
    json manifest;
    try {
        manifest = json::parse(text);
    } catch (const json::exception& e) {
        throw CorruptManifest(std::string("chain manifest: not valid JSON: ") +
                              e.what());
    }

    const auto version = field_as<int>(manifest, "format_version");
    if (version != kFormatVersion)
        throw VersionMismatch("chain manifest: format_version " +
                              std::to_string(version) + ", this build reads " +
                              std::to_string(kFormatVersion));
    const auto endian = field_as<std::string>(manifest, "endianness");
    if (endian != "little")
        throw VersionMismatch("chain manifest: byte order '" + endian +
                              "' not supported");

    const json& blob_info = field(manifest, "blob");
    const auto blob_file = field_as<std::string>(blob_info, "file");
    const std::string blob = read_file(fs::path(dir) / blob_file);
    if (blob.size() != field_as<std::size_t>(blob_info, "bytes"))
        throw CorruptManifest("chain blob: " + std::to_string(blob.size()) +
                              " bytes on disk, manifest says " +
                              std::to_string(field_as<std::size_t>(blob_info, "bytes")));
    const std::string hash = fnv1a64_hex(
        reinterpret_cast<const unsigned char*>(blob.data()), blob.size());
    if (hash != field_as<std::string>(blob_info, "fnv1a64"))
        throw CorruptManifest("chain blob: hash " + hash + " != manifest " +
                              field_as<std::string>(blob_info, "fnv1a64"));

    LoadedChain out;
    out.chain.h = field_as<double>(manifest, "h");
    out.chain.inv_beta = field_as<double>(manifest, "inv_beta");
    for (const json& step : field(manifest, "steps")) {
        const auto dim = field_as<std::size_t>(step, "dim");
        const auto widths = field_as<std::vector<std::size_t>>(step, "widths");
        const auto alpha = field_as<double>(step, "alpha");
        IcnnParams p;
        try {
            p = icnn_zeroed(dim, widths, alpha);
        } catch (const Error& e) {
            throw CorruptManifest(std::string("chain manifest: bad step geometry: ") +
                                  e.what());
        }
        const json& tensors = field(step, "tensors");
        const std::size_t expect = 2 * p.layers() + (p.layers() - 1) + 1;
        if (tensors.size() != expect)
            throw CorruptManifest("chain manifest: step has " +
                                  std::to_string(tensors.size()) + " tensors, expected " +
                                  std::to_string(expect));
        std::size_t t = 0;
        for (std::size_t l = 0; l < p.layers(); ++l) {
            take(tensors[t++], blob, p.A[l].data(), p.A[l].rows, p.A[l].cols);
            take(tensors[t++], blob, p.b[l].data(), p.b[l].size(), 1);
        }
        for (std::size_t l = 0; l + 1 < p.layers(); ++l)
            take(tensors[t++], blob, p.W[l].data(), p.W[l].rows, p.W[l].cols);
        take(tensors[t++], blob, p.w_out.data(), p.w_out.size(), 1);
        out.chain.steps.push_back(std::move(p));
    }

    if (manifest.contains("init")) {
        const json& j = manifest["init"];
        InitSpec spec;
        spec.kind = field_as<std::string>(j, "kind");
        if (spec.kind == "gaussian") {
            spec.mean = field_as<Vec>(j, "mean");
            const auto dim = field_as<std::size_t>(j, "dim");
            const auto flat = field_as<Vec>(j, "cov");
            if (dim != spec.mean.size() || flat.size() != dim * dim)
                throw CorruptManifest("chain manifest: init mean/cov shapes differ");
            spec.cov = Mat(dim, dim);
            spec.cov.a = flat;
        }
        out.init = std::move(spec);
    }
    return out;
}

}  // namespace wgf
