#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "bovw/features.hpp"
#include "bovw/vocab.hpp"

namespace bovw {

// Lower-case hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

// Content hashes of the serialized artifacts; identical to hashing the files.
std::string fingerprint(const VocabularyTree& tree);
std::string fingerprint(const ScalerParams& scaler);

} // namespace bovw
