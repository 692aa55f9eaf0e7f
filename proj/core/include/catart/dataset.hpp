#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "catart/rng.hpp"

namespace catart::data {

/// Bidirectional map between external string ids and dense integer ids,
/// assigned in first-occurrence order.
class Vocabulary {
 public:
  int intern(std::string_view external);
  std::optional<int> find(std::string_view external) const;
  const std::string& external(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(names_.size()); }

  /// One `external_id<TAB>int_id` line per entry, in id order.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> names_;
};

enum class FileFormat { tsv, csv };

/// "tsv" or "csv"; anything else is a ConfigError.
FileFormat parse_format(std::string_view name);

/// Interactions of one domain with dense ids, deduplicated, in file order.
struct RawDomain {
  std::string name;
  int n_items = 0;
  std::vector<std::pair<int, int>> pairs;  // (user, item)
};

struct RawStore {
  int n_users = 0;
  std::vector<RawDomain> domains;
};

/// Reads `user<sep>item[<sep>ignored...]` lines. tsv splits on any run of
/// tabs or spaces, csv on commas. Blank lines and lines starting with '#'
/// are skipped. Users share one vocabulary across domains; items use the
/// per-domain vocabulary. With `per_user_cap`, a user's interactions past the
/// cap (in file order, after dedup) are dropped.
RawDomain load_domain(const std::filesystem::path& path, FileFormat format, Vocabulary& users,
                      Vocabulary& items, std::optional<std::size_t> per_user_cap = std::nullopt);

enum class Split { train = 0, valid = 1, test = 2 };
std::string_view to_string(Split s);

struct SplitRatios {
  double train = 0.7;
  double valid = 0.1;
  double test = 0.2;
};

/// Per-domain implicit feedback, split into train/valid/test per user.
/// Immutable once built; item lists are sorted ascending.
class InteractionStore {
 public:
  InteractionStore() = default;
  InteractionStore(int n_users, std::vector<int> n_items);

  int n_domains() const { return static_cast<int>(n_items_.size()); }
  int n_users() const { return n_users_; }
  int n_items(int domain) const { return n_items_.at(static_cast<std::size_t>(domain)); }
  const std::vector<int>& all_n_items() const { return n_items_; }

  const std::vector<int>& items(int domain, Split split, int user) const;
  bool contains(int domain, Split split, int user, int item) const;

  /// Number of (user, item) pairs in a split of a domain.
  std::size_t count(int domain, Split split) const;

  /// Users with at least one train item in `domain` who do not own every item.
  const std::vector<int>& sampleable_users(int domain) const;

  /// Users with at least one item of `split` in `domain`.
  std::vector<int> users_with(int domain, Split split) const;

  /// Inserts a pair; used while building. Keeps lists sorted.
  void add(int domain, Split split, int user, int item);
  /// Recomputes cached per-domain indices and checks every invariant.
  void finalize();

 private:
  std::vector<int>& list(int domain, Split split, int user);
  int n_users_ = 0;
  std::vector<int> n_items_;
  // lists_[domain][split][user]
  std::vector<std::vector<std::vector<std::vector<int>>>> lists_;
  std::vector<std::vector<int>> sampleable_;
};

/// Per user and domain: sort the user's items ascending; users with fewer than
/// 3 items keep everything in train. Otherwise shuffle with the domain's
/// stream Rng(derive_seed(seed, "split", domain)) (users visited in ascending
/// id), then take n_valid = round(n * valid), n_test = round(n * test) and the
/// remainder as train: train = first n_train of the shuffled order, valid the
/// next n_valid, test the rest. Ratios must be non-negative and sum to 1.
InteractionStore split(const RawStore& raw, const SplitRatios& ratios, std::uint64_t seed);

/// (n_train, n_valid, n_test) for a list of n items under the rounding rule.
struct SplitSizes {
  std::size_t train, valid, test;
};
SplitSizes split_sizes(std::size_t n, const SplitRatios& ratios);

/// Writes `user<TAB>item<TAB>split` lines for one domain.
void save_split(const InteractionStore& store, int domain, const std::filesystem::path& path);

/// Rebuilds a store from per-domain split files written by save_split.
InteractionStore load_splits(int n_users, const std::vector<int>& n_items,
                             const std::vector<std::filesystem::path>& paths);

struct BprTriplet {
  int user;
  int pos_item;
  int neg_item;
  int domain;
};

/// Users uniform over sampleable_users(domain); positive uniform over the
/// user's train items; negative uniform over items not in the user's train
/// set (rejection sampling). Valid/test items are eligible negatives.
std::vector<BprTriplet> sample_batch(const InteractionStore& store, int domain,
                                     std::size_t batch_size, Rng& rng);

}  // namespace catart::data
