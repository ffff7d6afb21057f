#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "navqa/rng.hpp"

namespace navqa {

using ParamId = int;

struct TensorInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Flat named parameter tensors with a parallel gradient buffer.
///
/// Values are held in double for arithmetic but are always representable as
/// 32-bit floats: initialization and every optimizer update round to float.
/// This makes a checkpoint (32-bit little-endian) an exact image of the
/// in-memory model.
class ParamStore {
 public:
  ParamId add(std::string name, std::vector<int> shape);

  std::size_t tensor_count() const { return tensors_.size(); }
  std::size_t total_count() const { return values_.size(); }
  const TensorInfo& info(ParamId id) const { return tensors_.at(static_cast<std::size_t>(id)); }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  std::optional<ParamId> find(std::string_view name) const;

  std::span<double> values(ParamId id);
  std::span<const double> values(ParamId id) const;
  std::span<double> grads(ParamId id);

  std::vector<double>& flat_values() { return values_; }
  const std::vector<double>& flat_values() const { return values_; }
  std::vector<double>& flat_grads() { return grads_; }
  const std::vector<double>& flat_grads() const { return grads_; }

  void init_uniform(Rng& rng, double lo, double hi);
  void zero_grad();
  void round_to_storage();
  static double to_storage(double v) { return static_cast<double>(static_cast<float>(v)); }

  bool same_layout(const ParamStore& other) const;
  bool all_finite() const;

 private:
  std::vector<TensorInfo> tensors_;
  std::vector<double> values_;
  std::vector<double> grads_;
};

/// Checkpoint = JSON manifest (names, shapes, offsets, model config) next to
/// a flat little-endian float32 array.
struct CheckpointManifest {
  std::string format = "navqa-checkpoint-1";
  std::string model;
  std::string variant;
  nlohmann::json config;
  std::string data_file;
  std::size_t total_count = 0;
};

/// Writes `<path>` (manifest) and `<path>.bin` (data); returns the data path.
std::filesystem::path save_checkpoint(const std::filesystem::path& manifest_path,
                                      const ParamStore& params, CheckpointManifest manifest);

struct LoadedCheckpoint {
  CheckpointManifest manifest;
  nlohmann::json tensors;
  std::vector<float> data;
};

LoadedCheckpoint read_checkpoint(const std::filesystem::path& manifest_path);
/// Copies checkpoint data into a store with matching layout; throws FormatError otherwise.
void load_into(const LoadedCheckpoint& ckpt, ParamStore& params);

std::vector<unsigned char> encode_float32_le(std::span<const double> values);
std::vector<float> decode_float32_le(std::span<const unsigned char> bytes);

}  // namespace navqa
