#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "modfnn/dataset.hpp"

namespace modfnn {

// Binary tensor file: "FNB1", little-endian u32 {count, H, W}, count*H*W*3
// interleaved RGB bytes, then count little-endian u16 labels. Items are given
// ids "img000000", "img000001", ... in file order. label_count is max+1
// unless `label_count` is positive.
std::string encode_fnb(const LabeledDataset& ds);
LabeledDataset decode_fnb(std::string_view bytes, int label_count = 0);

// CSV manifest `id,filename,label` (header required) next to 64x64 RGB PNGs;
// filenames resolve relative to the manifest's directory.
LabeledDataset load_csv_manifest(const std::filesystem::path& manifest, int label_count = 0);

RgbImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);

// Dispatches on extension: ".csv" -> manifest, anything else -> FNB1.
LabeledDataset load_dataset(const std::filesystem::path& path, int label_count = 0);

// Featured batch cache: "FVB1", u32 {count, dim}, count*dim little-endian
// float32 (sample-major), then count u16 local labels. The cell index and ids
// are not part of the format and must be supplied by the caller.
std::string encode_fvb(const FeaturedBatch& fb);
FeaturedBatch decode_fvb(std::string_view bytes, const CellIndex& cell,
                         std::vector<std::string> ids = {});

// Directory of FVB1 caches plus `manifest.txt` and one `.ids` file per
// (module, submodule). Features are referenced by catalog name.
void save_featured_batches(const FeaturedBatchSet& set, const std::filesystem::path& dir);
FeaturedBatchSet load_featured_batches(const std::filesystem::path& dir);

}  // namespace modfnn
