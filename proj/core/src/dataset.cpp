#include "catart/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "catart/errors.hpp"

namespace catart::data {

namespace {

std::vector<std::string_view> split_fields(std::string_view line, FileFormat format) {
  std::vector<std::string_view> out;
  if (format == FileFormat::csv) {
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      out.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    for (auto& f : out) {
      while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
      while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    }
    return out;
  }
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool is_blank_or_comment(std::string_view line) {
  for (const char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

int Vocabulary::intern(std::string_view external) {
  const std::string key(external);
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  const int id = static_cast<int>(names_.size());
  ids_.emplace(key, id);
  names_.push_back(key);
  return id;
}

std::optional<int> Vocabulary::find(std::string_view external) const {
  if (auto it = ids_.find(std::string(external)); it != ids_.end()) return it->second;
  return std::nullopt;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary '" + path.string() + "'");
  for (std::size_t i = 0; i < names_.size(); ++i) out << names_[i] << '\t' << i << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open vocabulary '" + path.string() + "'");
  Vocabulary v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("vocabulary line lacks a tab", line_no);
    int id = 0;
    try {
      id = std::stoi(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError("vocabulary id is not an integer", line_no);
    }
    if (id != v.size()) throw ParseError("vocabulary ids must be dense and in order", line_no);
    v.intern(std::string_view(line).substr(0, tab));
  }
  return v;
}

FileFormat parse_format(std::string_view name) {
  if (name == "tsv") return FileFormat::tsv;
  if (name == "csv") return FileFormat::csv;
  throw ConfigError("unknown interaction file format '" + std::string(name) + "'");
}

RawDomain load_domain(const std::filesystem::path& path, FileFormat format, Vocabulary& users,
                      Vocabulary& items, std::optional<std::size_t> per_user_cap) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open interaction file '" + path.string() + "'");
  RawDomain domain;
  domain.name = path.stem().string();
  std::set<std::pair<int, int>> seen;
  std::unordered_map<int, std::size_t> per_user;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto fields = split_fields(line, format);
    if (fields.size() < 2 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("expected 'user" + std::string(format == FileFormat::csv ? "," : "<TAB>") +
                           "item' in '" + path.string() + "'",
                       line_no);
    }
    const int u = users.intern(fields[0]);
    const int i = items.intern(fields[1]);
    if (!seen.emplace(u, i).second) continue;
    if (per_user_cap) {
      auto& n = per_user[u];
      if (n >= *per_user_cap) continue;
      ++n;
    }
    domain.pairs.emplace_back(u, i);
  }
  domain.n_items = items.size();
  return domain;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// InteractionStore

InteractionStore::InteractionStore(int n_users, std::vector<int> n_items)
    : n_users_(n_users), n_items_(std::move(n_items)) {
  if (n_users < 0) throw ConfigError("negative user count");
  lists_.resize(n_items_.size());
  for (auto& d : lists_) {
    d.resize(3);
    for (auto& s : d) s.resize(static_cast<std::size_t>(n_users));
  }
  sampleable_.resize(n_items_.size());
}

std::vector<int>& InteractionStore::list(int domain, Split split, int user) {
  return lists_.at(static_cast<std::size_t>(domain))
      .at(static_cast<std::size_t>(split))
      .at(static_cast<std::size_t>(user));
}

const std::vector<int>& InteractionStore::items(int domain, Split split, int user) const {
  return lists_.at(static_cast<std::size_t>(domain))
      .at(static_cast<std::size_t>(split))
      .at(static_cast<std::size_t>(user));
}

bool InteractionStore::contains(int domain, Split split, int user, int item) const {
  const auto& v = items(domain, split, user);
  return std::binary_search(v.begin(), v.end(), item);
}

std::size_t InteractionStore::count(int domain, Split split) const {
  std::size_t n = 0;
  for (const auto& v : lists_.at(static_cast<std::size_t>(domain)).at(static_cast<std::size_t>(split))) {
    n += v.size();
  }
  return n;
}

const std::vector<int>& InteractionStore::sampleable_users(int domain) const {
  return sampleable_.at(static_cast<std::size_t>(domain));
}

std::vector<int> InteractionStore::users_with(int domain, Split split) const {
  std::vector<int> out;
  for (int u = 0; u < n_users_; ++u) {
    if (!items(domain, split, u).empty()) out.push_back(u);
  }
  return out;
}

void InteractionStore::add(int domain, Split split, int user, int item) {
  if (domain < 0 || domain >= n_domains()) throw std::out_of_range("domain id out of range");
  if (user < 0 || user >= n_users_) throw std::out_of_range("user id out of range");
  if (item < 0 || item >= n_items(domain)) throw std::out_of_range("item id out of range");
  auto& v = list(domain, split, user);
  const auto it = std::lower_bound(v.begin(), v.end(), item);
  if (it == v.end() || *it != item) v.insert(it, item);
}

void InteractionStore::finalize() {
  for (int d = 0; d < n_domains(); ++d) {
    auto& users = sampleable_[static_cast<std::size_t>(d)];
    users.clear();
    for (int u = 0; u < n_users_; ++u) {
      const auto& tr = items(d, Split::train, u);
      const auto& va = items(d, Split::valid, u);
      const auto& te = items(d, Split::test, u);
      // a pair lives in at most one split
      for (const int i : va) {
        if (std::binary_search(tr.begin(), tr.end(), i)) {
          throw ConfigError("pair appears in both train and valid");
        }
      }
      for (const int i : te) {
        if (std::binary_search(tr.begin(), tr.end(), i) || std::binary_search(va.begin(), va.end(), i)) {
          throw ConfigError("pair appears in test and another split");
        }
      }
      if (tr.empty()) continue;
      if (static_cast<int>(tr.size()) >= n_items(d)) {
        spdlog::warn("domain {}: user {} owns every item; excluded from negative sampling", d, u);
        continue;
      }
      users.push_back(u);
    }
  }
}

SplitSizes split_sizes(std::size_t n, const SplitRatios& ratios) {
  if (n < 3) return {n, 0, 0};
  const auto valid = static_cast<std::size_t>(std::lround(static_cast<double>(n) * ratios.valid));
  const auto test = static_cast<std::size_t>(std::lround(static_cast<double>(n) * ratios.test));
  if (valid + test > n) return {0, valid, n - valid};
  return {n - valid - test, valid, test};
}

InteractionStore split(const RawStore& raw, const SplitRatios& ratios, std::uint64_t seed) {
  if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  std::vector<int> n_items;
  for (const auto& d : raw.domains) n_items.push_back(d.n_items);
  InteractionStore store(raw.n_users, n_items);

  for (std::size_t d = 0; d < raw.domains.size(); ++d) {
    std::vector<std::vector<int>> per_user(static_cast<std::size_t>(raw.n_users));
    for (const auto& [u, i] : raw.domains[d].pairs) {
      per_user.at(static_cast<std::size_t>(u)).push_back(i);
    }
    Rng rng(derive_seed(seed, "split", d));
    const int domain = static_cast<int>(d);
    for (int u = 0; u < raw.n_users; ++u) {
      auto& items = per_user[static_cast<std::size_t>(u)];
      if (items.empty()) continue;
      std::sort(items.begin(), items.end());
      items.erase(std::unique(items.begin(), items.end()), items.end());
      const SplitSizes sizes = split_sizes(items.size(), ratios);
      if (items.size() >= 3) shuffle(items, rng);
      for (std::size_t k = 0; k < items.size(); ++k) {
        const Split s = k < sizes.train                 ? Split::train
                        : k < sizes.train + sizes.valid ? Split::valid
                                                        : Split::test;
        store.add(domain, s, u, items[k]);
      }
    }
  }
  store.finalize();
  return store;
}

void save_split(const InteractionStore& store, int domain, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write split file '" + path.string() + "'");
  for (int u = 0; u < store.n_users(); ++u) {
    for (const Split s : {Split::train, Split::valid, Split::test}) {
      for (const int i : store.items(domain, s, u)) out << u << '\t' << i << '\t' << to_string(s) << '\n';
    }
  }
}

InteractionStore load_splits(int n_users, const std::vector<int>& n_items,
                             const std::vector<std::filesystem::path>& paths) {
  if (paths.size() != n_items.size()) throw ConfigError("one split file per domain is required");
  InteractionStore store(n_users, n_items);
  for (std::size_t d = 0; d < paths.size(); ++d) {
    std::ifstream in(paths[d]);
    if (!in) throw PipelineError("missing split file '" + paths[d].string() + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream fields(line);
      int u = -1;
      int i = -1;
      std::string s;
      if (!(fields >> u >> i >> s)) throw ParseError("malformed split line", line_no);
      Split split;
      if (s == "train") split = Split::train;
      else if (s == "valid") split = Split::valid;
      else if (s == "test") split = Split::test;
      else throw ParseError("unknown split '" + s + "'", line_no);
      try {
        store.add(static_cast<int>(d), split, u, i);
      } catch (const std::out_of_range&) {
        throw ParseError("id out of range in split file", line_no);
      }
    }
  }
  store.finalize();
  return store;
}

std::vector<BprTriplet> sample_batch(const InteractionStore& store, int domain,
                                     std::size_t batch_size, Rng& rng) {
  if (domain < 0 || domain >= store.n_domains()) throw std::out_of_range("domain id out of range");
  std::vector<BprTriplet> out;
  if (batch_size == 0) return out;
  const auto& users = store.sampleable_users(domain);
  if (users.empty()) throw ConfigError("domain " + std::to_string(domain) + " has no trainable users");
  const std::size_t n_items = static_cast<std::size_t>(store.n_items(domain));
  out.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const int u = users[rng.uniform_index(users.size())];
    const auto& pos = store.items(domain, Split::train, u);
    const int p = pos[rng.uniform_index(pos.size())];
    int n = 0;
    do {
      n = static_cast<int>(rng.uniform_index(n_items));
    } while (std::binary_search(pos.begin(), pos.end(), n));
    out.push_back({u, p, n, domain});
  }
  return out;
}

}  // namespace catart::data
