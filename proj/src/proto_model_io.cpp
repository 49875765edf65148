#include <cstdio>
#include <sstream>

#include "modfnn/decimal.hpp"
#include "modfnn/error.hpp"
#include "modfnn/file_util.hpp"
#include "modfnn/training.hpp"

namespace modfnn {
namespace {

std::string weight_file_name(const CellIndex& c) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "weights/f%02d_m%03d_s%02d.fnn", c.feature, c.module, c.submodule);
  return buf;
}

}  // namespace

std::string encode_manifest(const ProtoModel& model) {
  std::string out = "modfnn proto-model v1\n";
  out += "mode = " + to_string(model.mode) + "\n";
  out += "arch_tag = " + model.arch_tag + "\n";
  out += "arch = " + model.arch.to_string() + "\n";
  out += "features =";
  for (const auto& f : model.features) out += " " + f.name;
  out += "\n";
  out += "labels = " + std::to_string(model.label_count) + "\n";
  out += "k = " + std::to_string(model.k) + "\n";
  out += "r = " + std::to_string(model.r) + "\n";
  out += "decimals = " + std::to_string(model.decimals) + "\n";
  out += std::string("complete = ") + (model.complete() ? "true" : "false") + "\n";
  for (const auto& c : model.cells) {
    out += "cell = " + std::to_string(c.index.feature) + " " + std::to_string(c.index.module) + " " +
           std::to_string(c.index.submodule) + " " + weight_file_name(c.index) + " " +
           to_string(c.status) + " " + format_fixed(c.accuracy, 6) + " " + std::to_string(c.errors) +
           "\n";
  }
  return out;
}

void save_proto_model(const ProtoModel& model, const std::filesystem::path& dir) {
  if (model.decimals < 1) throw ConfigError("a proto-model must be quantized to be persisted");
  for (const auto& c : model.cells)
    write_file_atomic(dir / weight_file_name(c.index), encode_weights(c.params, model.decimals));
  write_file_atomic(dir / "manifest.txt", encode_manifest(model));
}

ProtoModel load_proto_model(const std::filesystem::path& dir) {
  std::istringstream in(read_file(dir / "manifest.txt"));
  std::string line;
  if (!std::getline(in, line) || line != "modfnn proto-model v1")
    throw DataError("not a proto-model manifest: " + (dir / "manifest.txt").string());

  ProtoModel model;
  std::vector<CellModel> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw DataError("bad manifest line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 3);
    std::istringstream vs(value);
    try {
      if (key == "mode") {
        model.mode = parse_training_mode(value);
      } else if (key == "arch_tag") {
        model.arch_tag = value;
      } else if (key == "arch") {
        model.arch = FnnArch::parse(value);
      } else if (key == "features") {
        std::string name;
        while (vs >> name) model.features.push_back(feature_by_name(name));
      } else if (key == "labels") {
        model.label_count = std::stoi(value);
      } else if (key == "k") {
        model.k = std::stoi(value);
      } else if (key == "r") {
        model.r = std::stoi(value);
      } else if (key == "decimals") {
        model.decimals = std::stoi(value);
      } else if (key == "cell") {
        CellModel c;
        std::string path, status, accuracy;
        if (!(vs >> c.index.feature >> c.index.module >> c.index.submodule >> path >> status >>
              accuracy >> c.errors))
          throw DataError("bad cell line: " + line);
        c.status = parse_cell_status(status);
        c.accuracy = parse_real(accuracy);
        c.params = decode_weights(read_file(dir / path));
        cells.push_back(std::move(c));
      }
    } catch (const std::invalid_argument&) {
      throw DataError("bad manifest value: " + line);
    } catch (const ConfigError& e) {
      throw DataError(std::string("manifest: ") + e.what());
    }
  }
  model.cells.resize(cells.size());
  for (auto& c : cells) {
    const std::size_t idx = model.index_of(c.index);
    if (idx >= model.cells.size() || !(c.params.arch == model.arch))
      throw DataError("manifest cell does not fit the model shape");
    model.cells[idx] = std::move(c);
  }
  return model;
}

}  // namespace modfnn
