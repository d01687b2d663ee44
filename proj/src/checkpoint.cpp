// SPDX-License-Identifier: Apache-2.0

#include "mcavd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <unordered_map>

#include "io_util.hpp"
#include "mcavd/model.hpp"
#include "mcavd/train.hpp"

namespace mcavd {

namespace {

using namespace ioutil;

constexpr char kMagic[4] = {'M', 'C', 'A', 'V'};
constexpr uint32_t kVersion = 1;

void put_block(std::ostream& out, const NamedBlock& block) {
  if (block.name.size() > 0xffff) throw ValueError("parameter name too long: " + block.name);
  put_u16(out, static_cast<uint16_t>(block.name.size()));
  out.write(block.name.data(), static_cast<std::streamsize>(block.name.size()));
  if (block.shape.size() > 0xff) throw ValueError("parameter rank too large: " + block.name);
  out.put(static_cast<char>(block.shape.size()));
  int64_t count = 1;
  for (int extent : block.shape) {
    put_u32(out, static_cast<uint32_t>(extent));
    count *= extent;
  }
  if (count != static_cast<int64_t>(block.data.size()))
    throw ShapeError("block " + block.name + " data does not match its extents");
  put_f32(out, block.data.data(), block.data.size());
}

NamedBlock get_block(std::istream& in) {
  NamedBlock block;
  const uint16_t name_len = get_u16(in, "block name length");
  block.name.resize(name_len);
  if (!in.read(block.name.data(), name_len)) throw FormatError("truncated block name");
  const int rank = in.get();
  if (rank < 0) throw FormatError("truncated block rank");
  int64_t count = 1;
  for (int i = 0; i < rank; ++i) {
    const uint32_t extent = get_u32(in, "block extent");
    block.shape.push_back(static_cast<int>(extent));
    count *= extent;
  }
  block.data.resize(static_cast<size_t>(count));
  get_f32(in, block.data.data(), block.data.size(), "block data for " + block.name);
  return block;
}

} // namespace

void write_checkpoint(const CheckpointFile& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  out.put(static_cast<char>(ckpt.variant_tag));
  put_u32(out, static_cast<uint32_t>(ckpt.config_json.size()));
  out.write(ckpt.config_json.data(), static_cast<std::streamsize>(ckpt.config_json.size()));
  put_u32(out, static_cast<uint32_t>(ckpt.params.size()));
  for (const auto& block : ckpt.params) put_block(out, block);
  out.put(ckpt.optimizer.has_value() ? 1 : 0);
  if (ckpt.optimizer.has_value()) {
    put_u64(out, ckpt.optimizer->step);
    for (const auto& block : ckpt.optimizer->first_moment) put_block(out, block);
    for (const auto& block : ckpt.optimizer->second_moment) put_block(out, block);
  }
  put_u32(out, ckpt.epoch);
  put_f64(out, ckpt.best_metric);
  if (!out) throw FormatError("short write to checkpoint: " + path);
}

CheckpointFile read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad magic in checkpoint: " + path);
  const uint32_t version = get_u32(in, "version");
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  CheckpointFile ckpt;
  const int tag = in.get();
  if (tag < 0) throw FormatError("truncated checkpoint variant tag");
  ckpt.variant_tag = static_cast<uint8_t>(tag);
  const uint32_t cfg_len = get_u32(in, "config length");
  ckpt.config_json.resize(cfg_len);
  if (!in.read(ckpt.config_json.data(), cfg_len)) throw FormatError("truncated checkpoint config");
  const uint32_t n_params = get_u32(in, "parameter count");
  ckpt.params.reserve(n_params);
  for (uint32_t i = 0; i < n_params; ++i) ckpt.params.push_back(get_block(in));
  const int has_opt = in.get();
  if (has_opt < 0) throw FormatError("truncated checkpoint optimizer flag");
  if (has_opt) {
    OptimizerBlocks opt;
    opt.step = get_u64(in, "optimizer step");
    for (uint32_t i = 0; i < n_params; ++i) opt.first_moment.push_back(get_block(in));
    for (uint32_t i = 0; i < n_params; ++i) opt.second_moment.push_back(get_block(in));
    ckpt.optimizer = std::move(opt);
  }
  ckpt.epoch = get_u32(in, "epoch");
  ckpt.best_metric = get_f64(in, "best metric");
  return ckpt;
}

void save_model_checkpoint(const DialogModel& model, const std::string& path,
                           const AdamState* optimizer, uint32_t epoch, double best_metric) {
  CheckpointFile ckpt;
  ckpt.variant_tag = static_cast<uint8_t>(model.config().variant);
  ckpt.config_json = model.config_json();
  for (const auto& [name, p] : model.params().entries())
    ckpt.params.push_back(NamedBlock{name, p.shape(), p.value()});
  if (optimizer != nullptr) ckpt.optimizer = optimizer->to_blocks(model.params());
  ckpt.epoch = epoch;
  ckpt.best_metric = best_metric;
  write_checkpoint(ckpt, path);
}

DialogModel load_model_checkpoint(const std::string& path, CheckpointFile* raw) {
  CheckpointFile ckpt = read_checkpoint(path);
  DialogModel model = DialogModel::from_config_json(ckpt.config_json);
  if (static_cast<uint8_t>(model.config().variant) != ckpt.variant_tag)
    throw FormatError("checkpoint variant tag disagrees with its config block");

  std::unordered_map<std::string, const NamedBlock*> by_name;
  for (const auto& block : ckpt.params) by_name[block.name] = &block;
  if (by_name.size() != model.params().size())
    throw FormatError("checkpoint holds " + std::to_string(by_name.size()) +
                      " parameter blocks, model expects " + std::to_string(model.params().size()));
  for (const auto& [name, p] : model.params().entries()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint is missing parameter " + name);
    if (it->second->shape != p.shape())
      throw FormatError("checkpoint parameter " + name + " has shape " +
                        shape_str(it->second->shape) + ", expected " + shape_str(p.shape()));
    p.value() = it->second->data;
  }
  if (raw != nullptr) *raw = std::move(ckpt);
  return model;
}

} // namespace mcavd
