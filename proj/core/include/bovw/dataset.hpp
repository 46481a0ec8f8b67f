#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bovw/ingest.hpp"

namespace bovw {

struct DatasetEntry {
    std::string filename;  // relative to the dataset directory
    TextureClass label = TextureClass::A;
};

inline constexpr const char* kManifestName = "manifest.csv";

// One training patch, fully determined by (seed, label, index).
RgbFrame synth_patch(std::uint64_t seed, TextureClass label, int index, int size = 200);

// Writes per_class PNG patches for each of A, B, C3 plus manifest.csv
// ("filename,label" rows). Throws PreconditionError("empty dataset") when
// per_class <= 0 and IoError when the directory cannot be written.
std::vector<DatasetEntry> synth_dataset(const std::filesystem::path& out_dir, int per_class, std::uint64_t seed,
                                        int patch_size = 200);

// Throws FormatError naming the file for rows whose label is not A, B or C3.
std::vector<DatasetEntry> read_manifest(const std::filesystem::path& dataset_dir);

} // namespace bovw
