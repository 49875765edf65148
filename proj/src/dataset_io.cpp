#include "modfnn/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <png.h>

#include "modfnn/error.hpp"
#include "modfnn/file_util.hpp"

namespace modfnn {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xffU));
  out.push_back(static_cast<char>(v >> 8));
}

class Reader {
 public:
  Reader(std::string_view bytes, const char* what) : bytes_(bytes), what_(what) {}

  void expect_magic(std::string_view magic) {
    if (take(magic.size()) != magic) throw DataError(std::string(what_) + ": bad magic");
  }
  std::uint32_t u32() {
    auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(s[static_cast<std::size_t>(i)]);
    return v;
  }
  std::uint16_t u16() {
    auto s = take(2);
    return static_cast<std::uint16_t>(static_cast<std::uint8_t>(s[0]) |
                                      (static_cast<std::uint8_t>(s[1]) << 8));
  }
  std::string_view take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw DataError(std::string(what_) + ": truncated file");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void expect_end() const {
    if (pos_ != bytes_.size()) throw DataError(std::string(what_) + ": trailing bytes");
  }

 private:
  std::string_view bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

std::string ordinal_id(std::size_t t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img%06zu", t);
  return buf;
}

int infer_label_count(const ItemBatch& items, int label_count) {
  if (label_count > 0) return label_count;
  int mx = -1;
  for (const auto& it : items) mx = std::max(mx, it.label);
  return mx + 1;
}

}  // namespace

std::string encode_fnb(const LabeledDataset& ds) {
  std::string out = "FNB1";
  const auto count = static_cast<std::uint32_t>(ds.items.size());
  const int h = ds.items.empty() ? 0 : ds.items.front().image.height();
  const int w = ds.items.empty() ? 0 : ds.items.front().image.width();
  put_u32(out, count);
  put_u32(out, static_cast<std::uint32_t>(h));
  put_u32(out, static_cast<std::uint32_t>(w));
  for (const auto& it : ds.items) {
    if (it.image.height() != h || it.image.width() != w)
      throw DimensionError("FNB1 requires equally sized images");
    const auto& px = it.image.pixels();
    out.append(reinterpret_cast<const char*>(px.data()), px.size());
  }
  for (const auto& it : ds.items) {
    if (it.label < 0 || it.label > 0xffff) throw DataError("label does not fit in u16");
    put_u16(out, static_cast<std::uint16_t>(it.label));
  }
  return out;
}

LabeledDataset decode_fnb(std::string_view bytes, int label_count) {
  Reader in(bytes, "FNB1");
  in.expect_magic("FNB1");
  const std::uint32_t count = in.u32();
  const auto h = static_cast<int>(in.u32());
  const auto w = static_cast<int>(in.u32());
  const std::size_t per = static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3;
  LabeledDataset ds;
  ds.items.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    auto px = in.take(per);
    ds.items.push_back({ordinal_id(t), RgbImage(h, w, std::vector<std::uint8_t>(px.begin(), px.end())), 0});
  }
  for (auto& it : ds.items) it.label = in.u16();
  in.expect_end();
  ds.label_count = infer_label_count(ds.items, label_count);
  ds.validate();
  return ds;
}

RgbImage read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw DataError("cannot read PNG " + path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DataError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  return RgbImage(static_cast<int>(image.height), static_cast<int>(image.width), std::move(buffer));
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels().data(), 0, nullptr))
    throw DataError("cannot write PNG " + path.string() + ": " + image.message);
}

LabeledDataset load_csv_manifest(const std::filesystem::path& manifest, int label_count) {
  std::istringstream in(read_file(manifest));
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty manifest " + manifest.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  if (line != "id,filename,label")
    throw DataError("manifest header must be `id,filename,label`");

  LabeledDataset ds;
  const auto base = manifest.parent_path();
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(','), c2 = line.rfind(',');
    if (c1 == std::string::npos || c1 == c2)
      throw DataError("manifest line " + std::to_string(lineno) + ": expected 3 columns");
    const std::string id = line.substr(0, c1);
    const std::string file = line.substr(c1 + 1, c2 - c1 - 1);
    int label = 0;
    try {
      std::size_t used = 0;
      label = std::stoi(line.substr(c2 + 1), &used);
      if (used != line.size() - c2 - 1) throw std::invalid_argument("tail");
    } catch (const std::exception&) {
      throw DataError("manifest line " + std::to_string(lineno) + ": bad label");
    }
    ds.items.push_back({id, read_png(base / file), label});
  }
  ds.label_count = infer_label_count(ds.items, label_count);
  ds.validate();
  return ds;
}

LabeledDataset load_dataset(const std::filesystem::path& path, int label_count) {
  if (path.extension() == ".csv") return load_csv_manifest(path, label_count);
  return decode_fnb(read_file(path), label_count);
}

std::string encode_fvb(const FeaturedBatch& fb) {
  static_assert(std::endian::native == std::endian::little, "FVB1 writer assumes little endian");
  std::string out = "FVB1";
  put_u32(out, static_cast<std::uint32_t>(fb.size()));
  put_u32(out, static_cast<std::uint32_t>(fb.dim()));
  for (std::size_t t = 0; t < fb.size(); ++t) {
    for (Eigen::Index d = 0; d < fb.dim(); ++d) {
      const auto f = static_cast<float>(fb.inputs(d, static_cast<Eigen::Index>(t)));
      put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  for (int label : fb.labels) put_u16(out, static_cast<std::uint16_t>(label));
  return out;
}

FeaturedBatch decode_fvb(std::string_view bytes, const CellIndex& cell,
                         std::vector<std::string> ids) {
  Reader in(bytes, "FVB1");
  in.expect_magic("FVB1");
  const std::uint32_t count = in.u32();
  const std::uint32_t dim = in.u32();
  FeaturedBatch fb;
  fb.cell = cell;
  fb.inputs.resize(dim, count);
  for (std::uint32_t t = 0; t < count; ++t)
    for (std::uint32_t d = 0; d < dim; ++d) fb.inputs(d, t) = std::bit_cast<float>(in.u32());
  fb.labels.resize(count);
  for (auto& l : fb.labels) l = in.u16();
  in.expect_end();
  if (ids.empty()) {
    for (std::uint32_t t = 0; t < count; ++t) ids.push_back(ordinal_id(t));
  } else if (ids.size() != count) {
    throw DataError("FVB1 id list does not match sample count");
  }
  fb.ids = std::move(ids);
  return fb;
}

namespace {

std::string cache_name(const CellIndex& c) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "f%02d_m%03d_s%02d.fvb", c.feature, c.module, c.submodule);
  return buf;
}

std::string ids_name(int module, int submodule) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "m%03d_s%02d.ids", module, submodule);
  return buf;
}

}  // namespace

void save_featured_batches(const FeaturedBatchSet& set, const std::filesystem::path& dir) {
  std::string manifest = "modfnn featured-batches v1\n";
  manifest += "labels = " + std::to_string(set.label_count) + "\n";
  manifest += "k = " + std::to_string(set.k) + "\n";
  manifest += "r = " + std::to_string(set.r) + "\n";
  manifest += "features =";
  for (const auto& f : set.features) manifest += " " + f.name;
  manifest += "\n";
  for (const auto& fb : set.cells) {
    const auto ids = ids_name(fb.cell.module, fb.cell.submodule);
    if (fb.cell.feature == 1) {
      std::string text;
      for (const auto& id : fb.ids) text += id + "\n";
      write_file_atomic(dir / ids, text);
    }
    write_file_atomic(dir / cache_name(fb.cell), encode_fvb(fb));
    manifest += "cell = " + std::to_string(fb.cell.feature) + " " + std::to_string(fb.cell.module) +
                " " + std::to_string(fb.cell.submodule) + " " + cache_name(fb.cell) + " " + ids + "\n";
  }
  write_file_atomic(dir / "manifest.txt", manifest);
}

FeaturedBatchSet load_featured_batches(const std::filesystem::path& dir) {
  std::istringstream in(read_file(dir / "manifest.txt"));
  std::string line;
  if (!std::getline(in, line) || line != "modfnn featured-batches v1")
    throw DataError("not a featured-batch manifest: " + (dir / "manifest.txt").string());
  FeaturedBatchSet set;
  std::vector<FeaturedBatch> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw DataError("bad batch manifest line: " + line);
    const std::string key = line.substr(0, eq);
    std::istringstream vs(line.substr(eq + 3));
    if (key == "labels") {
      vs >> set.label_count;
    } else if (key == "k") {
      vs >> set.k;
    } else if (key == "r") {
      vs >> set.r;
    } else if (key == "features") {
      std::string name;
      while (vs >> name) {
        const int idx = feature_index(name);
        if (idx < 0) throw DataError("batch manifest names unknown feature '" + name + "'");
        set.features.push_back(feature_catalog()[static_cast<std::size_t>(idx)]);
      }
    } else if (key == "cell") {
      CellIndex c;
      std::string cache, ids_file;
      if (!(vs >> c.feature >> c.module >> c.submodule >> cache >> ids_file))
        throw DataError("bad batch manifest cell: " + line);
      std::vector<std::string> ids;
      std::istringstream idin(read_file(dir / ids_file));
      for (std::string id; std::getline(idin, id);)
        if (!id.empty()) ids.push_back(id);
      cells.push_back(decode_fvb(read_file(dir / cache), c, std::move(ids)));
    }
  }
  if (set.k < 1 || set.r < 1 || set.label_count < 1 || set.features.empty())
    throw DataError("incomplete batch manifest");
  set.cells.resize(set.features.size() * static_cast<std::size_t>(set.k) * static_cast<std::size_t>(set.r));
  if (cells.size() != set.cells.size()) throw DataError("batch manifest is missing cells");
  for (auto& fb : cells) set.cells[set.index_of(fb.cell)] = std::move(fb);
  return set;
}

}  // namespace modfnn
