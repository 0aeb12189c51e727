#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "crashsurr/error.hpp"
#include "crashsurr/mesh/features.hpp"
#include "crashsurr/nn/attention.hpp"
#include "crashsurr/nn/layers.hpp"
#include "crashsurr/util/hash.hpp"

namespace crashsurr::nn {

enum class Family {
  kMgn,
  kTransolver,
  kMeshTransolver,
  kMeshTransolverContact,
  kGeoTransolver,
  kGeoFlare,
  kMeshGeoTransolver,
  kMeshGeoFlare,
};

inline constexpr std::array<Family, 8> kAllFamilies = {
    Family::kMgn,          Family::kTransolver, Family::kMeshTransolver,    Family::kMeshTransolverContact,
    Family::kGeoTransolver, Family::kGeoFlare,  Family::kMeshGeoTransolver, Family::kMeshGeoFlare};

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::kMgn: return "MGN";
    case Family::kTransolver: return "Transolver";
    case Family::kMeshTransolver: return "MeshTransolver";
    case Family::kMeshTransolverContact: return "MeshTransolver+Contact";
    case Family::kGeoTransolver: return "GeoTransolver";
    case Family::kGeoFlare: return "GeoFLARE";
    case Family::kMeshGeoTransolver: return "MeshGeoTransolver";
    case Family::kMeshGeoFlare: return "MeshGeoFLARE";
  }
  return "?";
}

inline Family parse_family(std::string_view name) {
  if (name == "MeshGraphNet") return Family::kMgn;
  for (auto f : kAllFamilies)
    if (family_name(f) == name) return f;
  throw Error(ErrorKind::kInvalidArgument, "unknown model family '" + std::string(name) + "'");
}

inline bool uses_mesh(Family f) {
  return f == Family::kMgn || f == Family::kMeshTransolver || f == Family::kMeshTransolverContact ||
         f == Family::kMeshGeoTransolver || f == Family::kMeshGeoFlare;
}

inline bool is_hybrid(Family f) { return uses_mesh(f) && f != Family::kMgn; }

inline bool is_geometry_aware(Family f) {
  return f == Family::kGeoTransolver || f == Family::kGeoFlare || f == Family::kMeshGeoTransolver ||
         f == Family::kMeshGeoFlare;
}

inline bool uses_flare(Family f) { return f == Family::kGeoFlare || f == Family::kMeshGeoFlare; }

inline bool default_contact(Family f) {
  return f == Family::kMeshTransolverContact || f == Family::kMeshGeoTransolver || f == Family::kMeshGeoFlare;
}

inline FeatureSet default_feature_set(Family f) {
  if (f == Family::kMgn) return FeatureSet::kMesh;
  return is_hybrid(f) ? FeatureSet::kHybrid : FeatureSet::kKinematic;
}

struct ModelConfig {
  Family family = Family::kMeshTransolver;
  std::size_t dim = 2;
  std::size_t static_dim = kStaticBaseDim;
  std::size_t hidden = 128;
  std::size_t tokens = 128;
  std::size_t heads = 4;
  std::size_t layers_pre = 1;
  std::size_t layers_attn = 6;
  std::size_t layers_post = 2;
  FeatureSet features = FeatureSet::kHybrid;
  bool sharpened = true;
  std::size_t flare_routes = 32;
  std::size_t geo_width = 16;
  bool contact_enabled = false;
  std::size_t contact_k = 32;
  // <= 0 means "derive from the graph" (three median edge lengths).
  double contact_radius = 0.0;
  double contact_alpha_init = 1e-3;
  Activation mesh_activation = Activation::kRelu;
  Activation attention_activation = Activation::kGelu;
  std::uint64_t seed = 0;

  std::size_t node_feature_dim() const { return crashsurr::node_feature_dim(features, dim, static_dim); }

  // Full-width defaults for a family.
  static ModelConfig for_family(Family f, std::size_t dim = 2) {
    ModelConfig c;
    c.family = f;
    c.dim = dim;
    c.features = default_feature_set(f);
    c.contact_enabled = default_contact(f);
    c.sharpened = f == Family::kMeshTransolver || f == Family::kMeshTransolverContact;
    c.contact_k = f == Family::kMeshTransolverContact ? 32 : 16;
    switch (f) {
      case Family::kMgn: c.layers_pre = 6; c.layers_attn = 0; c.layers_post = 0; break;
      case Family::kTransolver: c.layers_pre = 0; c.layers_attn = 6; c.layers_post = 0; break;
      case Family::kMeshTransolver:
      case Family::kMeshTransolverContact: c.layers_pre = 1; c.layers_attn = 6; c.layers_post = 2; break;
      case Family::kGeoTransolver:
      case Family::kGeoFlare: c.layers_pre = 0; c.layers_attn = 4; c.layers_post = 0; break;
      case Family::kMeshGeoTransolver:
      case Family::kMeshGeoFlare: c.layers_pre = 1; c.layers_attn = 4; c.layers_post = 2; break;
    }
    c.flare_routes = c.tokens / 4;
    return c;
  }

  // Reduced widths for single-core desk runs on the toy lattice: d_h = 32,
  // M = 16, one MPNN block before and after two attention blocks.
  static ModelConfig desk(Family f, std::size_t dim = 2) {
    auto c = for_family(f, dim);
    c.hidden = 32;
    c.tokens = 16;
    c.flare_routes = 4;
    c.contact_k = 8;
    if (is_hybrid(f)) {
      c.layers_pre = 1;
      c.layers_attn = 2;
      c.layers_post = 1;
    } else if (f == Family::kMgn) {
      c.layers_pre = 4;
    } else {
      c.layers_attn = 3;
    }
    return c;
  }

  void validate() const {
    require(dim == 2 || dim == 3, ErrorKind::kInvalidArgument, "model dim must be 2 or 3");
    require(hidden >= 1 && heads >= 1 && hidden % heads == 0, ErrorKind::kInvalidArgument,
            "hidden width must be a positive multiple of the head count");
    require(tokens >= 1, ErrorKind::kInvalidArgument, "token count must be >= 1");
    if (uses_flare(family)) require(flare_routes >= 1, ErrorKind::kInvalidArgument, "flare routes must be >= 1");
    if (is_hybrid(family)) {
      require(layers_pre >= 1 && layers_post >= 1, ErrorKind::kInvalidArgument,
              "hybrid families need at least one pre and one post MPNN block");
    } else if (family == Family::kMgn) {
      require(layers_attn == 0 && layers_pre + layers_post >= 1, ErrorKind::kInvalidArgument,
              "MGN has mesh blocks only");
    } else {
      require(layers_pre == 0 && layers_post == 0, ErrorKind::kInvalidArgument,
              "pure-attention families have no MPNN blocks");
    }
    if (contact_enabled) {
      require(is_hybrid(family), ErrorKind::kInvalidArgument, "contact block requires a hybrid family");
      require(contact_k >= 1, ErrorKind::kInvalidArgument, "contact k must be >= 1");
    }
  }

  nlohmann::json to_json() const {
    return {{"family", std::string(family_name(family))},
            {"dim", dim},
            {"static_dim", static_dim},
            {"hidden", hidden},
            {"tokens", tokens},
            {"heads", heads},
            {"layers_pre", layers_pre},
            {"layers_attn", layers_attn},
            {"layers_post", layers_post},
            {"features", static_cast<int>(features)},
            {"node_feature_dim", node_feature_dim()},
            {"sharpened", sharpened},
            {"flare_routes", flare_routes},
            {"geo_width", geo_width},
            {"contact_enabled", contact_enabled},
            {"contact_k", contact_k},
            {"contact_radius", contact_radius},
            {"contact_alpha_init", contact_alpha_init},
            {"mesh_activation", to_string(mesh_activation)},
            {"attention_activation", to_string(attention_activation)},
            {"seed", seed}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.family = parse_family(j.at("family").get<std::string>());
    c.dim = j.at("dim");
    c.static_dim = j.at("static_dim");
    c.hidden = j.at("hidden");
    c.tokens = j.at("tokens");
    c.heads = j.at("heads");
    c.layers_pre = j.at("layers_pre");
    c.layers_attn = j.at("layers_attn");
    c.layers_post = j.at("layers_post");
    c.features = static_cast<FeatureSet>(j.at("features").get<int>());
    c.sharpened = j.at("sharpened");
    c.flare_routes = j.at("flare_routes");
    c.geo_width = j.at("geo_width");
    c.contact_enabled = j.at("contact_enabled");
    c.contact_k = j.at("contact_k");
    c.contact_radius = j.at("contact_radius");
    c.contact_alpha_init = j.at("contact_alpha_init");
    c.mesh_activation = parse_activation(j.at("mesh_activation").get<std::string>());
    c.attention_activation = parse_activation(j.at("attention_activation").get<std::string>());
    c.seed = j.at("seed");
    return c;
  }

  std::string hash() const { return util::sha256_hex(to_json().dump()); }
};

}  // namespace crashsurr::nn
