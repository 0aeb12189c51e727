#pragma once

// Checkpoint file, little-endian, version 1:
//
//   magic "CRSHCKPT" (8 bytes), u32 version
//   string config_json, string config_sha256
//   NormStats: u32 dim, f64[dim] accel_mean, f64[dim] accel_std,
//              u32 F, f64[F] feature_mean, f64[F] feature_std, f64 length_scale
//   string metadata_json
//   u64 parameter count, then per parameter:
//     string name, u64 rows, u64 cols, f64[rows*cols] values
//
// Strings are u32 length + bytes. Values round-trip bit-exactly.

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashsurr/error.hpp"
#include "crashsurr/mesh/features.hpp"
#include "crashsurr/nn/config.hpp"
#include "crashsurr/nn/model.hpp"
#include "crashsurr/util/bytes.hpp"
#include "crashsurr/util/hash.hpp"

namespace crashsurr::nn {

inline constexpr char kCheckpointMagic[] = "CRSHCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Surrogate model;
  NormStats stats;
  nlohmann::json metadata = nlohmann::json::object();
};

inline std::vector<std::uint8_t> encode_checkpoint(const Surrogate& model, const NormStats& stats,
                                                   const nlohmann::json& metadata = nlohmann::json::object()) {
  require(stats.fitted, ErrorKind::kNotFitted, "checkpoint: normalisation statistics are not fitted");
  util::ByteWriter w;
  w.put_bytes(kCheckpointMagic, 8);
  w.put(kCheckpointVersion);
  const auto cfg = model.config().to_json().dump();
  w.put_string(cfg);
  w.put_string(util::sha256_hex(cfg));
  w.put(static_cast<std::uint32_t>(stats.dim));
  w.put_all(stats.accel_mean);
  w.put_all(stats.accel_std);
  w.put(static_cast<std::uint32_t>(stats.feature_mean.size()));
  w.put_all(stats.feature_mean);
  w.put_all(stats.feature_std);
  w.put(stats.length_scale);
  w.put_string(metadata.dump());
  const auto& items = model.parameters().items();
  w.put(static_cast<std::uint64_t>(items.size()));
  for (const auto& p : items) {
    w.put_string(p.name);
    w.put(static_cast<std::uint64_t>(p.tensor.rows()));
    w.put(static_cast<std::uint64_t>(p.tensor.cols()));
    for (double v : p.tensor.values()) w.put(v);
  }
  return w.take();
}

inline Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes) {
  util::ByteReader r(std::move(bytes));
  r.expect_magic(kCheckpointMagic, 8);
  const auto version = r.get<std::uint32_t>();
  require(version == kCheckpointVersion, ErrorKind::kFormat,
          "unsupported checkpoint version " + std::to_string(version));
  const auto cfg_text = r.get_string();
  const auto cfg_hash = r.get_string();
  require(util::sha256_hex(cfg_text) == cfg_hash, ErrorKind::kFormat, "checkpoint config hash mismatch");

  Checkpoint ck;
  ck.model = Surrogate(ModelConfig::from_json(nlohmann::json::parse(cfg_text)));
  auto& st = ck.stats;
  st.dim = r.get<std::uint32_t>();
  st.accel_mean = r.get_many<double>(st.dim);
  st.accel_std = r.get_many<double>(st.dim);
  const auto fdim = r.get<std::uint32_t>();
  st.feature_mean = r.get_many<double>(fdim);
  st.feature_std = r.get_many<double>(fdim);
  st.length_scale = r.get<double>();
  st.fitted = true;
  ck.metadata = nlohmann::json::parse(r.get_string());

  const auto count = r.get<std::uint64_t>();
  auto& params = ck.model.parameters();
  require(count == params.items().size(), ErrorKind::kFormat, "checkpoint parameter count does not match config");
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name = r.get_string();
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    const auto* p = params.find(name);
    require(p != nullptr, ErrorKind::kFormat, "checkpoint parameter " + name + " unknown to the model");
    require(p->tensor.rows() == rows && p->tensor.cols() == cols, ErrorKind::kFormat,
            "checkpoint parameter " + name + " has the wrong shape");
    const auto values = r.get_many<double>(rows * cols);
    Tensor target = p->tensor;  // shares storage with the model parameter
    auto dst = target.mutable_values();
    std::copy(values.begin(), values.end(), dst.begin());
  }
  require(r.at_end(), ErrorKind::kFormat, "trailing bytes after checkpoint");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Surrogate& model, const NormStats& stats,
                            const nlohmann::json& metadata = nlohmann::json::object()) {
  util::write_file(path, encode_checkpoint(model, stats, metadata));
}

inline Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(util::read_file(path)); }

}  // namespace crashsurr::nn
