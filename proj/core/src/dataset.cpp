#include "bovw/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "bovw/errors.hpp"
#include "bovw/png_io.hpp"
#include "bovw/random.hpp"

namespace bovw {

RgbFrame synth_patch(std::uint64_t seed, TextureClass label, int index, int size) {
    const std::uint64_t patch_seed =
        mix64(seed ^ mix64(static_cast<std::uint64_t>(index) * 3 + static_cast<std::uint64_t>(label)));
    return decode_yuv422_to_rgb(synth_texture_frame(patch_seed, label, index, size, size));
}

std::vector<DatasetEntry> synth_dataset(const std::filesystem::path& out_dir, int per_class, std::uint64_t seed,
                                        int patch_size) {
    if (per_class <= 0) throw PreconditionError("empty dataset: per-class count must be positive");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) throw IoError(out_dir.string(), "cannot create dataset directory");

    std::vector<DatasetEntry> entries;
    for (TextureClass label : {TextureClass::A, TextureClass::B, TextureClass::C3}) {
        for (int i = 0; i < per_class; ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "%s_%05d.png", to_string(label).c_str(), i);
            write_png(out_dir / name, synth_patch(seed, label, i, patch_size));
            entries.push_back({name, label});
        }
    }
    const auto manifest = out_dir / kManifestName;
    std::ofstream out(manifest, std::ios::trunc);
    if (!out) throw IoError(manifest.string(), "cannot create manifest");
    out << "filename,label\n";
    for (const auto& e : entries) out << e.filename << ',' << to_string(e.label) << '\n';
    if (!out) throw IoError(manifest.string(), "write failed");
    return entries;
}

std::vector<DatasetEntry> read_manifest(const std::filesystem::path& dataset_dir) {
    const auto path = dataset_dir / kManifestName;
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot open manifest");
    std::vector<DatasetEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1 && line == "filename,label") continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 'filename,label'");
        }
        const std::string file = line.substr(0, comma);
        const std::string label = line.substr(comma + 1);
        const auto cls = parse_texture_class(label);
        if (!cls) {
            throw FormatError("label '" + label + "' of " + file +
                              " is outside the class list (A, B, C3)");
        }
        entries.push_back({file, *cls});
    }
    return entries;
}

} // namespace bovw
