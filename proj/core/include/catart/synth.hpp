#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "catart/dataset.hpp"
#include "catart/nn.hpp"

// Synthetic multi-domain implicit feedback. Users carry latent factors u
// (one independent draw per latent group); domain d has item factors v_j and
// a map M_d, and user i interacts with item j when
//   u_i . M_d v_j + noise_d * eps_ij
// clears a per-domain threshold calibrated to the density target. Every user
// is also given their best-scoring item so that no user is empty in a domain.

namespace catart::synth {

enum class MapKind {
  identity_like,    // I + jitter * G: domains sharing a group are related
  random,           // G: a fixed random view of the same user factors
  per_user_random,  // G_i drawn per user: no shared information at all
};

enum class LatentKind {
  gaussian,  // u ~ N(0, I), v ~ N(0, I / L)
  blocks,    // u = e_{i mod 2}, v = e_{j mod 2}: two user blocks x two item blocks
};

MapKind parse_map_kind(std::string_view name);
std::string_view to_string(MapKind kind);

struct DomainSpec {
  std::string name;
  int n_items = 500;
  double density = 0.02;
  double noise = 0.5;  // std of the additive score noise, in units of the score std
  MapKind map = MapKind::identity_like;
  double jitter = 0.3;
  int latent_group = 0;
};

struct WorldSpec {
  std::string scenario = "custom";
  int n_users = 2000;
  int latent_dim = 8;
  LatentKind latent = LatentKind::gaussian;
  std::vector<DomainSpec> domains;
  std::uint64_t seed = 0;

  /// Throws ConfigError on n_domains < 3, densities outside (0, 1], or
  /// non-positive sizes. Block worlds need latent_dim >= 2.
  void validate() const;
};

struct GroundTruth {
  std::vector<nn::Matrix> user_latents;  // per latent group, n_users x L
  std::vector<nn::Matrix> item_latents;  // per domain, n_items x L
  std::vector<nn::Matrix> maps;          // per domain, L x L (empty for per-user maps)
  std::vector<double> thresholds;
  std::vector<double> densities;  // realized
};

struct World {
  WorldSpec spec;
  data::RawStore raw;
  GroundTruth truth;
};

/// Deterministic in spec (including the seed). Throws GenerationError when the
/// realized density of a domain misses its target by more than 10%.
World generate(const WorldSpec& spec);

/// Presets: correlated-5, one-noise-domain, sparse-target, unrelated-pair and
/// separable. Throws ConfigError for any other name.
WorldSpec make_scenario(std::string_view name, std::uint64_t seed = 0);
std::vector<std::string> scenario_names();

/// Realized density of one domain: pairs / (n_users * n_items).
double density(const data::RawStore& raw, int domain);

/// Writes `<name>.tsv` per domain (`u<id><TAB>i<id>`, users ascending) and a
/// `truth.json` manifest of the spec, thresholds and densities.
void write_world(const World& world, const std::filesystem::path& dir);

/// Paths write_world() produces for the domain files, in domain order.
std::vector<std::filesystem::path> domain_files(const WorldSpec& spec, const std::filesystem::path& dir);

/// Linear CKA between two user tables matched by row: rotation invariant
/// similarity in [0, 1]. Near 0 for unrelated domains, near 1 for domains
/// that see the same user factors.
double embedding_alignment(const nn::Matrix& a, const nn::Matrix& b);

}  // namespace catart::synth
