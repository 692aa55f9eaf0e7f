#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "catart/dataset.hpp"
#include "catart/nn.hpp"

// All-ranking evaluation: every item of a domain is scored for each evaluated
// user, train (and, at test time, validation) positives are removed from the
// candidate list, and Precision/Recall/NDCG are read off the top of the
// ranking. Ties are broken by ascending item id.

namespace catart::eval {

/// Scores for `users` against every item of `domain`: users.size() x n_items.
using BlockScorer = std::function<nn::Matrix(int domain, std::span<const int> users)>;

/// Full ranking of items by descending score, ties by ascending id, skipping
/// every item present in any of the sorted `excluded` lists.
std::vector<int> rank_items(std::span<const double> scores,
                            std::initializer_list<std::span<const int>> excluded);

/// Same ordering as rank_items, truncated to the first k entries.
std::vector<int> top_k_items(std::span<const double> scores,
                             std::initializer_list<std::span<const int>> excluded, std::size_t k);

/// Ranks every item of `domain` for `user`, excluding the user's train and
/// validation items.
std::vector<int> rank_all(const BlockScorer& scorer, int user, int domain,
                          const data::InteractionStore& store);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

/// precision = |top-k ∩ test| / k, recall = |top-k ∩ test| / |test|.
/// `test` must be sorted. Throws std::invalid_argument when k < 1.
PrecisionRecall precision_recall_at_k(std::span<const int> ranked, std::span<const int> test, int k);

/// Binary-relevance NDCG: DCG = sum over hits at rank p <= k of 1/log2(p+1),
/// IDCG = sum_{p=1}^{min(k,|test|)} 1/log2(p+1).
double ndcg_at_k(std::span<const int> ranked, std::span<const int> test, int k);

enum class Metric { precision, recall, ndcg };
std::string_view to_string(Metric m);
Metric parse_metric(std::string_view name);

struct MetricCell {
  double precision = 0.0;
  double recall = 0.0;
  double ndcg = 0.0;

  double get(Metric m) const;
};

struct DomainMetrics {
  int domain = 0;
  std::size_t n_users = 0;
  std::vector<MetricCell> at_k;  // parallel to MetricReport::ks
};

/// Mean metrics per domain and cut-off over the evaluated users.
struct MetricReport {
  std::vector<int> ks{10, 20};
  std::vector<DomainMetrics> domains;
  std::map<std::string, std::string> metadata;

  const DomainMetrics& domain(int d) const;
  const MetricCell& cell(int d, int k) const;
};

/// Running per-domain sums, mergeable across workers.
class MetricAccumulator {
 public:
  MetricAccumulator(std::vector<int> domains, std::vector<int> ks);

  void add_user(int domain, std::span<const int> ranked, std::span<const int> test);
  /// Adds another accumulator's sums (same domains and ks).
  void merge(const MetricAccumulator& other);
  MetricReport finalize() const;

 private:
  std::size_t slot(int domain) const;
  std::vector<int> domains_;
  std::vector<int> ks_;
  std::vector<std::size_t> counts_;
  std::vector<std::vector<MetricCell>> sums_;
};

struct EvalOptions {
  std::vector<int> ks{10, 20};
  data::Split target = data::Split::test;
  std::size_t block_size = 256;
};

/// Evaluates users having at least one `target` item in each listed domain.
/// Candidates exclude train items, plus validation items when target is test.
MetricReport evaluate(const BlockScorer& scorer, const data::InteractionStore& store,
                      std::span<const int> domains, const EvalOptions& options = {});

/// Mean and population standard deviation over repeated runs.
struct AggregateReport {
  MetricReport mean;
  MetricReport stddev;
  std::size_t runs = 0;
};

AggregateReport aggregate(std::span<const MetricReport> runs);

struct TransferFlag {
  int domain = 0;
  Metric metric = Metric::ndcg;
  int k = 10;
  double candidate = 0.0;
  double baseline = 0.0;
};

/// Cells where candidate < baseline - epsilon. Restrict to one metric and/or
/// cut-off with `metric` / `k`. Throws ConfigError when the reports do not
/// cover the same domains and cut-offs.
std::vector<TransferFlag> negative_transfer_report(const MetricReport& candidate,
                                                   const MetricReport& baseline,
                                                   double epsilon = 0.0,
                                                   std::optional<Metric> metric = std::nullopt,
                                                   std::optional<int> k = std::nullopt);

/// `domain<TAB>k<TAB>precision<TAB>recall<TAB>ndcg<TAB>n_users` with a header.
void write_tsv(const MetricReport& report, std::ostream& out);
void write_tsv(const MetricReport& report, const std::filesystem::path& path);
MetricReport read_tsv(const std::filesystem::path& path);

/// Human-readable table in percent: one row per domain, columns
/// P@k, R@k, N@k for each k, cells "mean±std", and a trailing "v" marker on
/// cells flagged against `flags`.
void write_table(const AggregateReport& report, std::ostream& out,
                 std::span<const std::string> domain_names = {},
                 std::span<const TransferFlag> flags = {});

}  // namespace catart::eval
