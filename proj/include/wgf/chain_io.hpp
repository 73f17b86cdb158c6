#pragma once

#include <optional>
#include <string>

#include "wgf/jko.hpp"
#include "wgf/measures.hpp"

namespace wgf {

// Initial measure recorded alongside a saved chain. Only "gaussian" can be
// reconstructed into a sampler/density; any other kind is provenance text.
struct InitSpec {
    std::string kind = "gaussian";
    Vec mean;
    Mat cov;

    Gaussian gaussian() const;  // throws InvalidArgument unless kind == "gaussian"
};

struct LoadedChain {
    JkoChain chain;
    std::optional<InitSpec> init;
};

// On-disk layout: dir/chain.json (manifest: step shapes, tensor offsets, blob
// byte count and fnv1a64 hash) + dir/params.bin (all tensors concatenated as
// little-endian float64). load(save(c)) is bit-exact; the byte order is fixed,
// so the files move between platforms.
//
// Throws VersionMismatch on an unknown format_version or byte order, and
// CorruptManifest on missing files, malformed JSON, shape or offset
// inconsistencies, or a blob whose hash disagrees with the manifest.
void save_chain(const JkoChain& chain, const std::string& dir,
                const InitSpec* init = nullptr);
LoadedChain load_chain(const std::string& dir);

// Hash used for blob integrity and config fingerprints, as a 16-digit hex
// string. Integrity check, not tamper-proofing.
std::string fnv1a64_hex(const unsigned char* data, std::size_t n);

}  // namespace wgf
