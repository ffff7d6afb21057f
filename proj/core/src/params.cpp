#include "navqa/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "navqa/error.hpp"
#include "navqa/serialization.hpp"

namespace navqa {

ParamId ParamStore::add(std::string name, std::vector<int> shape) {
  require(!find(name), ErrorCode::DimensionMismatch, "duplicate parameter " + name);
  std::size_t n = 1;
  for (int d : shape) {
    require(d > 0, ErrorCode::DimensionMismatch, "non-positive dimension in " + name);
    n *= static_cast<std::size_t>(d);
  }
  TensorInfo t{std::move(name), std::move(shape), values_.size(), n};
  values_.resize(values_.size() + n, 0.0);
  grads_.resize(values_.size(), 0.0);
  tensors_.push_back(std::move(t));
  return static_cast<ParamId>(tensors_.size() - 1);
}

std::optional<ParamId> ParamStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name == name) return static_cast<ParamId>(i);
  return std::nullopt;
}

std::span<double> ParamStore::values(ParamId id) {
  const auto& t = info(id);
  return std::span(values_).subspan(t.offset, t.size);
}

std::span<const double> ParamStore::values(ParamId id) const {
  const auto& t = info(id);
  return std::span(values_).subspan(t.offset, t.size);
}

std::span<double> ParamStore::grads(ParamId id) {
  const auto& t = info(id);
  return std::span(grads_).subspan(t.offset, t.size);
}

void ParamStore::init_uniform(Rng& rng, double lo, double hi) {
  for (auto& v : values_) v = to_storage(rng.uniform(lo, hi));
}

void ParamStore::zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

void ParamStore::round_to_storage() {
  for (auto& v : values_) v = to_storage(v);
}

bool ParamStore::same_layout(const ParamStore& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name != other.tensors_[i].name || tensors_[i].shape != other.tensors_[i].shape)
      return false;
  return true;
}

bool ParamStore::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

// --------------------------------------------------------------------------

std::vector<unsigned char> encode_float32_le(std::span<const double> values) {
  std::vector<unsigned char> out(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) out[i * 4 + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFF);
  }
  return out;
}

std::vector<float> decode_float32_le(std::span<const unsigned char> bytes) {
  require(bytes.size() % 4 == 0, ErrorCode::FormatError, "float32 payload length not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

std::filesystem::path save_checkpoint(const std::filesystem::path& manifest_path,
                                      const ParamStore& params, CheckpointManifest manifest) {
  auto data_path = manifest_path;
  data_path += ".bin";
  manifest.data_file = data_path.filename().string();
  manifest.total_count = params.total_count();
  Json tensors = Json::array();
  for (const auto& t : params.tensors())
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", t.offset}, {"size", t.size}});
  Json j{{"format", manifest.format},     {"model", manifest.model},
         {"variant", manifest.variant},   {"config", manifest.config},
         {"data_file", manifest.data_file}, {"total_count", manifest.total_count},
         {"tensors", tensors}};
  write_text_file(manifest_path, j.dump(2) + "\n");
  const auto bytes = encode_float32_le(params.flat_values());
  write_text_file(data_path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  return data_path;
}

LoadedCheckpoint read_checkpoint(const std::filesystem::path& manifest_path) {
  const Json j = read_json_file(manifest_path);
  LoadedCheckpoint out;
  try {
    out.manifest.format = j.at("format").get<std::string>();
    require(out.manifest.format == CheckpointManifest{}.format, ErrorCode::FormatError,
            "unsupported checkpoint format " + out.manifest.format);
    out.manifest.model = j.at("model").get<std::string>();
    out.manifest.variant = j.at("variant").get<std::string>();
    out.manifest.config = j.at("config");
    out.manifest.data_file = j.at("data_file").get<std::string>();
    out.manifest.total_count = j.at("total_count").get<std::size_t>();
    out.tensors = j.at("tensors");
  } catch (const Json::exception& e) {
    fail(ErrorCode::FormatError, manifest_path.string() + ": " + e.what());
  }
  const auto data_path = manifest_path.parent_path() / out.manifest.data_file;
  const auto text = read_text_file(data_path);
  out.data = decode_float32_le(
      std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
  require(out.data.size() == out.manifest.total_count, ErrorCode::FormatError,
          "checkpoint data size does not match manifest");
  return out;
}

void load_into(const LoadedCheckpoint& ckpt, ParamStore& params) {
  require(ckpt.tensors.size() == params.tensor_count(), ErrorCode::FormatError,
          "checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    const auto& t = params.info(static_cast<ParamId>(i));
    const auto& m = ckpt.tensors[i];
    require(m.at("name").get<std::string>() == t.name &&
                m.at("shape").get<std::vector<int>>() == t.shape &&
                m.at("offset").get<std::size_t>() == t.offset,
            ErrorCode::FormatError, "checkpoint layout mismatch at " + t.name);
  }
  require(ckpt.data.size() == params.total_count(), ErrorCode::FormatError,
          "checkpoint parameter count mismatch");
  auto& v = params.flat_values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(ckpt.data[i]);
}

}  // namespace navqa
