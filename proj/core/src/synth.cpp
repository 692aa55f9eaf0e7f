#include "catart/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include <nlohmann/json.hpp>

#include "catart/errors.hpp"
#include "catart/rng.hpp"

namespace catart::synth {

namespace {

constexpr double kDensityTolerance = 0.10;

nn::Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double sd, Rng& rng) {
  nn::Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = sd * rng.normal();
  }
  return m;
}

nn::Matrix make_map(const DomainSpec& d, int dim, Rng& rng) {
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  switch (d.map) {
    case MapKind::identity_like:
      return nn::Matrix::Identity(dim, dim) + d.jitter * gaussian(dim, dim, sd, rng);
    case MapKind::random:
      return gaussian(dim, dim, sd, rng);
    case MapKind::per_user_random:
      return {};
  }
  return {};
}

// Users' view of domain d: row i is M_d u_i (or G_i u_i with per-user maps).
nn::Matrix mapped_users(const DomainSpec& d, const nn::Matrix& users, const nn::Matrix& map, Rng& rng) {
  if (d.map != MapKind::per_user_random) return users * map.transpose();
  const auto dim = users.cols();
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  nn::Matrix out(users.rows(), dim);
  for (Eigen::Index i = 0; i < users.rows(); ++i) {
    const nn::Matrix g = gaussian(dim, dim, sd, rng);
    out.row(i) = users.row(i) * g.transpose();
  }
  return out;
}

nn::Matrix block_latents(int n, int dim) {
  nn::Matrix m = nn::Matrix::Zero(n, dim);
  for (int i = 0; i < n; ++i) m(i, i % 2) = 1.0;
  return m;
}

struct Calibrated {
  std::vector<std::pair<int, int>> pairs;
  double threshold = 0.0;
};

// Keeps each user's best item, then the highest remaining scores until the
// density target is met (ties at the cut are all kept).
Calibrated calibrate(const nn::Matrix& scores, const DomainSpec& d, int domain) {
  const auto n_users = scores.rows();
  const auto n_items = scores.cols();
  const double cells = static_cast<double>(n_users) * static_cast<double>(n_items);
  const auto target = static_cast<long>(std::lround(d.density * cells));
  const long extra = target - static_cast<long>(n_users);
  if (extra < 0) {
    throw GenerationError("domain " + std::to_string(domain) + ": density " + std::to_string(d.density) +
                          " is below one interaction per user");
  }
  std::vector<char> chosen(static_cast<std::size_t>(scores.size()), 0);
  for (Eigen::Index u = 0; u < n_users; ++u) {
    Eigen::Index best = 0;
    scores.row(u).maxCoeff(&best);
    chosen[static_cast<std::size_t>(u * n_items + best)] = 1;
  }
  std::vector<double> rest;
  rest.reserve(static_cast<std::size_t>(scores.size() - n_users));
  for (Eigen::Index k = 0; k < scores.size(); ++k) {
    if (!chosen[static_cast<std::size_t>(k)]) rest.push_back(scores.data()[k]);
  }
  Calibrated out;
  if (extra == 0) {
    out.threshold = rest.empty() ? INFINITY : std::nextafter(*std::max_element(rest.begin(), rest.end()), INFINITY);
  } else if (static_cast<std::size_t>(extra) >= rest.size()) {
    out.threshold = -INFINITY;
  } else {
    auto nth = rest.begin() + (extra - 1);
    std::nth_element(rest.begin(), nth, rest.end(), std::greater<>());
    out.threshold = *nth;
  }
  for (Eigen::Index u = 0; u < n_users; ++u) {
    for (Eigen::Index j = 0; j < n_items; ++j) {
      const auto k = static_cast<std::size_t>(u * n_items + j);
      if (chosen[k] || scores(u, j) >= out.threshold) {
        out.pairs.emplace_back(static_cast<int>(u), static_cast<int>(j));
      }
    }
  }
  const double realized = static_cast<double>(out.pairs.size()) / cells;
  if (std::abs(realized - d.density) > kDensityTolerance * d.density) {
    throw GenerationError("domain " + std::to_string(domain) + ": realized density " + std::to_string(realized) +
                          " misses the target " + std::to_string(d.density) + " by more than 10%");
  }
  return out;
}

void write_matrix_tsv(const nn::Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw PipelineError("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "\t" : "") << m(r, c);
    out << '\n';
  }
}

DomainSpec domain(std::string name, double density, double noise, MapKind map, int group = 0) {
  DomainSpec d;
  d.name = std::move(name);
  d.density = density;
  d.noise = noise;
  d.map = map;
  d.latent_group = group;
  return d;
}

}  // namespace

MapKind parse_map_kind(std::string_view name) {
  if (name == "identity_like") return MapKind::identity_like;
  if (name == "random") return MapKind::random;
  if (name == "per_user_random") return MapKind::per_user_random;
  throw ConfigError("unknown map kind '" + std::string(name) + "'");
}

std::string_view to_string(MapKind kind) {
  switch (kind) {
    case MapKind::identity_like: return "identity_like";
    case MapKind::random: return "random";
    case MapKind::per_user_random: return "per_user_random";
  }
  return "?";
}

void WorldSpec::validate() const {
  if (n_users <= 0) throw ConfigError("n_users must be positive");
  if (latent_dim <= 0) throw ConfigError("latent_dim must be positive");
  if (latent == LatentKind::blocks && latent_dim < 2) throw ConfigError("block worlds need latent_dim >= 2");
  if (domains.size() < 3) throw ConfigError("a world needs at least 3 domains");
  for (const auto& d : domains) {
    if (d.n_items <= 0) throw ConfigError("domain '" + d.name + "' needs items");
    if (!(d.density > 0.0 && d.density <= 1.0)) throw ConfigError("domain '" + d.name + "' density must be in (0, 1]");
    if (d.noise < 0.0) throw ConfigError("noise must be >= 0");
    if (d.latent_group < 0) throw ConfigError("latent group must be >= 0");
  }
}

World generate(const WorldSpec& spec) {
  spec.validate();
  World world;
  world.spec = spec;
  world.raw.n_users = spec.n_users;
  const int dim = spec.latent_dim;

  int n_groups = 0;
  for (const auto& d : spec.domains) n_groups = std::max(n_groups, d.latent_group + 1);
  for (int g = 0; g < n_groups; ++g) {
    Rng rng(derive_seed(spec.seed, "synth.users", static_cast<std::uint64_t>(g)));
    world.truth.user_latents.push_back(spec.latent == LatentKind::blocks ? block_latents(spec.n_users, dim)
                                                                          : gaussian(spec.n_users, dim, 1.0, rng));
  }

  for (std::size_t di = 0; di < spec.domains.size(); ++di) {
    const auto& d = spec.domains[di];
    Rng rng(derive_seed(spec.seed, "synth.domain", di));
    nn::Matrix items = spec.latent == LatentKind::blocks
                           ? block_latents(d.n_items, dim)
                           : gaussian(d.n_items, dim, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
    nn::Matrix map = make_map(d, dim, rng);
    const auto& users = world.truth.user_latents[static_cast<std::size_t>(d.latent_group)];
    nn::Matrix scores = mapped_users(d, users, map, rng) * items.transpose();
    if (d.noise > 0.0) {
      for (Eigen::Index k = 0; k < scores.size(); ++k) scores.data()[k] += d.noise * rng.normal();
    }
    auto cal = calibrate(scores, d, static_cast<int>(di));
    data::RawDomain raw;
    raw.name = d.name;
    raw.n_items = d.n_items;
    raw.pairs = std::move(cal.pairs);
    world.truth.densities.push_back(static_cast<double>(raw.pairs.size()) /
                                    (static_cast<double>(spec.n_users) * d.n_items));
    world.truth.thresholds.push_back(1.0 / (1.0 + std::exp(-cal.threshold)));
    world.truth.item_latents.push_back(std::move(items));
    world.truth.maps.push_back(std::move(map));
    world.raw.domains.push_back(std::move(raw));
  }
  return world;
}

WorldSpec make_scenario(std::string_view name, std::uint64_t seed) {
  WorldSpec s;
  s.scenario = std::string(name);
  s.seed = seed;
  constexpr double kDensity = 0.02;
  constexpr double kNoise = 0.5;
  if (name == "correlated-5") {
    for (int d = 0; d < 5; ++d) s.domains.push_back(domain("domain" + std::to_string(d), kDensity, kNoise, MapKind::identity_like));
  } else if (name == "one-noise-domain") {
    for (int d = 0; d < 4; ++d) s.domains.push_back(domain("domain" + std::to_string(d), kDensity, kNoise, MapKind::identity_like));
    s.domains.push_back(domain("noise", kDensity, kNoise, MapKind::per_user_random));
  } else if (name == "sparse-target") {
    s.domains.push_back(domain("sparse", kDensity / 10.0, kNoise, MapKind::identity_like));
    for (int d = 1; d < 5; ++d) s.domains.push_back(domain("domain" + std::to_string(d), kDensity, kNoise, MapKind::identity_like));
  } else if (name == "unrelated-pair") {
    // two related pairs that share nothing with each other
    for (int d = 0; d < 4; ++d) {
      s.domains.push_back(domain("domain" + std::to_string(d), kDensity, kNoise, MapKind::identity_like, d / 2));
    }
  } else if (name == "separable") {
    s.n_users = 1000;
    s.latent = LatentKind::blocks;
    for (int d = 0; d < 3; ++d) {
      auto spec = domain("domain" + std::to_string(d), 0.5, 0.0, MapKind::identity_like);
      spec.n_items = 40;
      spec.jitter = 0.0;
      s.domains.push_back(spec);
    }
  } else {
    throw ConfigError("unknown scenario '" + std::string(name) + "'");
  }
  return s;
}

std::vector<std::string> scenario_names() {
  return {"correlated-5", "one-noise-domain", "sparse-target", "unrelated-pair", "separable"};
}

double density(const data::RawStore& raw, int domain) {
  const auto& d = raw.domains.at(static_cast<std::size_t>(domain));
  return static_cast<double>(d.pairs.size()) / (static_cast<double>(raw.n_users) * d.n_items);
}

std::vector<std::filesystem::path> domain_files(const WorldSpec& spec, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& d : spec.domains) out.push_back(dir / (d.name + ".tsv"));
  return out;
}

void write_world(const World& world, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto files = domain_files(world.spec, dir);
  for (std::size_t d = 0; d < files.size(); ++d) {
    auto pairs = world.raw.domains[d].pairs;
    std::sort(pairs.begin(), pairs.end());
    std::ofstream out(files[d]);
    if (!out) throw PipelineError("cannot write '" + files[d].string() + "'");
    for (const auto& [u, i] : pairs) out << 'u' << u << '\t' << 'i' << i << '\n';
  }
  for (std::size_t g = 0; g < world.truth.user_latents.size(); ++g) {
    write_matrix_tsv(world.truth.user_latents[g], dir / ("user_latents_" + std::to_string(g) + ".tsv"));
  }
  nlohmann::json j;
  j["scenario"] = world.spec.scenario;
  j["seed"] = world.spec.seed;
  j["n_users"] = world.spec.n_users;
  j["latent_dim"] = world.spec.latent_dim;
  j["latent"] = world.spec.latent == LatentKind::blocks ? "blocks" : "gaussian";
  for (std::size_t d = 0; d < world.spec.domains.size(); ++d) {
    const auto& ds = world.spec.domains[d];
    write_matrix_tsv(world.truth.item_latents[d], dir / ("item_latents_" + ds.name + ".tsv"));
    j["domains"].push_back({{"name", ds.name},
                            {"file", files[d].filename().string()},
                            {"n_items", ds.n_items},
                            {"density_target", ds.density},
                            {"density", world.truth.densities[d]},
                            {"threshold", world.truth.thresholds[d]},
                            {"noise", ds.noise},
                            {"map", to_string(ds.map)},
                            {"jitter", ds.jitter},
                            {"latent_group", ds.latent_group}});
  }
  std::ofstream out(dir / "truth.json");
  if (!out) throw PipelineError("cannot write ground truth manifest");
  out << j.dump(2) << '\n';
}

double embedding_alignment(const nn::Matrix& a, const nn::Matrix& b) {
  if (a.rows() != b.rows() || a.rows() < 2) throw ShapeError("alignment needs two tables with the same rows");
  const nn::Matrix x = a.rowwise() - a.colwise().mean();
  const nn::Matrix y = b.rowwise() - b.colwise().mean();
  const double cross = (x.transpose() * y).squaredNorm();
  const double self = (x.transpose() * x).norm() * (y.transpose() * y).norm();
  return self > 0.0 ? cross / self : 0.0;
}

}  // namespace catart::synth
