#include "catart/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "catart/errors.hpp"

namespace catart::eval {

namespace {

bool excluded_item(int item, std::initializer_list<std::span<const int>> excluded) {
  for (const auto& list : excluded) {
    if (std::binary_search(list.begin(), list.end(), item)) return true;
  }
  return false;
}

std::vector<int> candidates(std::span<const double> scores,
                            std::initializer_list<std::span<const int>> excluded) {
  std::vector<int> items;
  items.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int item = static_cast<int>(i);
    if (!excluded_item(item, excluded)) items.push_back(item);
  }
  return items;
}

std::size_t hits_in_top(std::span<const int> ranked, std::span<const int> test, std::size_t k) {
  std::size_t hits = 0;
  const std::size_t n = std::min(k, ranked.size());
  for (std::size_t p = 0; p < n; ++p) {
    if (std::binary_search(test.begin(), test.end(), ranked[p])) ++hits;
  }
  return hits;
}

}  // namespace

std::vector<int> rank_items(std::span<const double> scores,
                            std::initializer_list<std::span<const int>> excluded) {
  std::vector<int> items = candidates(scores, excluded);
  std::stable_sort(items.begin(), items.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  return items;
}

std::vector<int> top_k_items(std::span<const double> scores,
                             std::initializer_list<std::span<const int>> excluded, std::size_t k) {
  std::vector<int> items = candidates(scores, excluded);
  const std::size_t n = std::min(k, items.size());
  // (score desc, id asc) is a strict total order, so partial_sort agrees with
  // the stable full sort on the prefix.
  std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n), items.end(),
                    [&](int a, int b) {
                      const double sa = scores[static_cast<std::size_t>(a)];
                      const double sb = scores[static_cast<std::size_t>(b)];
                      return sa > sb || (sa == sb && a < b);
                    });
  items.resize(n);
  return items;
}

std::vector<int> rank_all(const BlockScorer& scorer, int user, int domain,
                          const data::InteractionStore& store) {
  const int users[] = {user};
  const nn::Matrix scores = scorer(domain, users);
  nn::require_shape(scores, 1, store.n_items(domain), "rank_all scores");
  const auto& train = store.items(domain, data::Split::train, user);
  const auto& valid = store.items(domain, data::Split::valid, user);
  return rank_items(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
                    {train, valid});
}

PrecisionRecall precision_recall_at_k(std::span<const int> ranked, std::span<const int> test, int k) {
  if (k < 1) throw std::invalid_argument("precision/recall cut-off must be >= 1");
  if (test.empty()) return {};
  const auto hits = static_cast<double>(hits_in_top(ranked, test, static_cast<std::size_t>(k)));
  return {hits / static_cast<double>(k), hits / static_cast<double>(test.size())};
}

double ndcg_at_k(std::span<const int> ranked, std::span<const int> test, int k) {
  if (k < 1) throw std::invalid_argument("ndcg cut-off must be >= 1");
  if (test.empty()) return 0.0;
  double dcg = 0.0;
  const std::size_t n = std::min(static_cast<std::size_t>(k), ranked.size());
  for (std::size_t p = 0; p < n; ++p) {
    if (std::binary_search(test.begin(), test.end(), ranked[p])) {
      dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    }
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(static_cast<std::size_t>(k), test.size());
  for (std::size_t p = 0; p < ideal; ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  return dcg / idcg;
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::precision: return "precision";
    case Metric::recall: return "recall";
    case Metric::ndcg: return "ndcg";
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  if (name == "precision") return Metric::precision;
  if (name == "recall") return Metric::recall;
  if (name == "ndcg") return Metric::ndcg;
  throw ConfigError("unknown metric '" + std::string(name) + "'");
}

double MetricCell::get(Metric m) const {
  switch (m) {
    case Metric::precision: return precision;
    case Metric::recall: return recall;
    case Metric::ndcg: return ndcg;
  }
  return 0.0;
}

const DomainMetrics& MetricReport::domain(int d) const {
  for (const auto& dm : domains) {
    if (dm.domain == d) return dm;
  }
  throw std::out_of_range("report does not cover domain " + std::to_string(d));
}

const MetricCell& MetricReport::cell(int d, int k) const {
  const auto& dm = domain(d);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return dm.at_k.at(i);
  }
  throw std::out_of_range("report does not cover k=" + std::to_string(k));
}

// ---------------------------------------------------------------------------
// MetricAccumulator

MetricAccumulator::MetricAccumulator(std::vector<int> domains, std::vector<int> ks)
    : domains_(std::move(domains)), ks_(std::move(ks)) {
  for (const int k : ks_) {
    if (k < 1) throw ConfigError("metric cut-offs must be >= 1");
  }
  counts_.assign(domains_.size(), 0);
  sums_.assign(domains_.size(), std::vector<MetricCell>(ks_.size()));
}

std::size_t MetricAccumulator::slot(int domain) const {
  const auto it = std::find(domains_.begin(), domains_.end(), domain);
  if (it == domains_.end()) throw std::out_of_range("accumulator does not track this domain");
  return static_cast<std::size_t>(it - domains_.begin());
}

void MetricAccumulator::add_user(int domain, std::span<const int> ranked, std::span<const int> test) {
  const std::size_t s = slot(domain);
  ++counts_[s];
  for (std::size_t i = 0; i < ks_.size(); ++i) {
    const auto pr = precision_recall_at_k(ranked, test, ks_[i]);
    sums_[s][i].precision += pr.precision;
    sums_[s][i].recall += pr.recall;
    sums_[s][i].ndcg += ndcg_at_k(ranked, test, ks_[i]);
  }
}

void MetricAccumulator::merge(const MetricAccumulator& other) {
  if (other.domains_ != domains_ || other.ks_ != ks_) {
    throw ConfigError("cannot merge accumulators over different domains or cut-offs");
  }
  for (std::size_t s = 0; s < domains_.size(); ++s) {
    counts_[s] += other.counts_[s];
    for (std::size_t i = 0; i < ks_.size(); ++i) {
      sums_[s][i].precision += other.sums_[s][i].precision;
      sums_[s][i].recall += other.sums_[s][i].recall;
      sums_[s][i].ndcg += other.sums_[s][i].ndcg;
    }
  }
}

MetricReport MetricAccumulator::finalize() const {
  MetricReport r;
  r.ks = ks_;
  for (std::size_t s = 0; s < domains_.size(); ++s) {
    DomainMetrics dm;
    dm.domain = domains_[s];
    dm.n_users = counts_[s];
    dm.at_k.resize(ks_.size());
    if (counts_[s] > 0) {
      const double n = static_cast<double>(counts_[s]);
      for (std::size_t i = 0; i < ks_.size(); ++i) {
        dm.at_k[i] = {sums_[s][i].precision / n, sums_[s][i].recall / n, sums_[s][i].ndcg / n};
      }
    }
    r.domains.push_back(std::move(dm));
  }
  return r;
}

MetricReport evaluate(const BlockScorer& scorer, const data::InteractionStore& store,
                      std::span<const int> domains, const EvalOptions& options) {
  if (options.target == data::Split::train) throw ConfigError("cannot evaluate on the train split");
  MetricAccumulator acc(std::vector<int>(domains.begin(), domains.end()), options.ks);
  const std::size_t max_k = static_cast<std::size_t>(*std::max_element(options.ks.begin(), options.ks.end()));
  for (const int d : domains) {
    const std::vector<int> users = store.users_with(d, options.target);
    const std::size_t block = std::max<std::size_t>(1, options.block_size);
    for (std::size_t start = 0; start < users.size(); start += block) {
      const std::size_t len = std::min(block, users.size() - start);
      const std::span<const int> batch(users.data() + start, len);
      const nn::Matrix scores = scorer(d, batch);
      nn::require_shape(scores, static_cast<Eigen::Index>(len), store.n_items(d), "evaluation scores");
      for (std::size_t r = 0; r < len; ++r) {
        const int u = batch[r];
        const std::span<const double> row(scores.data() + static_cast<Eigen::Index>(r) * scores.cols(),
                                          static_cast<std::size_t>(scores.cols()));
        const auto& train = store.items(d, data::Split::train, u);
        std::vector<int> top;
        if (options.target == data::Split::test) {
          top = top_k_items(row, {train, store.items(d, data::Split::valid, u)}, max_k);
        } else {
          top = top_k_items(row, {train}, max_k);
        }
        acc.add_user(d, top, store.items(d, options.target, u));
      }
    }
  }
  return acc.finalize();
}

AggregateReport aggregate(std::span<const MetricReport> runs) {
  if (runs.empty()) throw ConfigError("nothing to aggregate");
  AggregateReport out;
  out.runs = runs.size();
  out.mean = runs.front();
  out.stddev = runs.front();
  out.mean.metadata.clear();
  out.stddev.metadata.clear();
  const double n = static_cast<double>(runs.size());
  for (std::size_t di = 0; di < out.mean.domains.size(); ++di) {
    for (std::size_t ki = 0; ki < out.mean.ks.size(); ++ki) {
      for (const Metric m : {Metric::precision, Metric::recall, Metric::ndcg}) {
        double sum = 0.0;
        for (const auto& r : runs) {
          if (r.ks != out.mean.ks || r.domains.size() != out.mean.domains.size() ||
              r.domains[di].domain != out.mean.domains[di].domain) {
            throw ConfigError("runs cover different domains or cut-offs");
          }
          sum += r.domains[di].at_k[ki].get(m);
        }
        const double mean = sum / n;
        double var = 0.0;
        for (const auto& r : runs) {
          const double dlt = r.domains[di].at_k[ki].get(m) - mean;
          var += dlt * dlt;
        }
        const double sd = std::sqrt(var / n);
        auto set = [m](MetricCell& c, double v) {
          if (m == Metric::precision) c.precision = v;
          else if (m == Metric::recall) c.recall = v;
          else c.ndcg = v;
        };
        set(out.mean.domains[di].at_k[ki], mean);
        set(out.stddev.domains[di].at_k[ki], sd);
      }
    }
  }
  return out;
}

std::vector<TransferFlag> negative_transfer_report(const MetricReport& candidate,
                                                   const MetricReport& baseline, double epsilon,
                                                   std::optional<Metric> metric, std::optional<int> k) {
  if (candidate.ks != baseline.ks || candidate.domains.size() != baseline.domains.size()) {
    throw ConfigError("reports cover different domains or cut-offs");
  }
  for (std::size_t i = 0; i < candidate.domains.size(); ++i) {
    if (candidate.domains[i].domain != baseline.domains[i].domain) {
      throw ConfigError("reports cover different domains");
    }
  }
  std::vector<TransferFlag> flags;
  for (std::size_t i = 0; i < candidate.domains.size(); ++i) {
    for (std::size_t ki = 0; ki < candidate.ks.size(); ++ki) {
      if (k && candidate.ks[ki] != *k) continue;
      for (const Metric m : {Metric::precision, Metric::recall, Metric::ndcg}) {
        if (metric && m != *metric) continue;
        const double c = candidate.domains[i].at_k[ki].get(m);
        const double b = baseline.domains[i].at_k[ki].get(m);
        if (c < b - epsilon) flags.push_back({candidate.domains[i].domain, m, candidate.ks[ki], c, b});
      }
    }
  }
  return flags;
}

void write_tsv(const MetricReport& report, std::ostream& out) {
  out << "domain\tk\tprecision\trecall\tndcg\tn_users\n";
  out << std::setprecision(17);
  for (const auto& dm : report.domains) {
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
      const auto& c = dm.at_k[i];
      out << dm.domain << '\t' << report.ks[i] << '\t' << c.precision << '\t' << c.recall << '\t'
          << c.ndcg << '\t' << dm.n_users << '\n';
    }
  }
}

void write_tsv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report '" + path.string() + "'");
  write_tsv(report, out);
}

MetricReport read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("cannot open report '" + path.string() + "'");
  std::string line;
  std::getline(in, line);  // header
  MetricReport r;
  r.ks.clear();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream f(line);
    int d = 0;
    int k = 0;
    MetricCell c;
    std::size_t n = 0;
    if (!(f >> d >> k >> c.precision >> c.recall >> c.ndcg >> n)) throw ParseError("bad report line", line_no);
    if (std::find(r.ks.begin(), r.ks.end(), k) == r.ks.end()) r.ks.push_back(k);
    auto it = std::find_if(r.domains.begin(), r.domains.end(), [d](const auto& x) { return x.domain == d; });
    if (it == r.domains.end()) {
      r.domains.push_back({d, n, {}});
      it = r.domains.end() - 1;
    }
    it->at_k.push_back(c);
  }
  for (const auto& dm : r.domains) {
    if (dm.at_k.size() != r.ks.size()) throw ParseError("report rows are not rectangular");
  }
  return r;
}

void write_table(const AggregateReport& report, std::ostream& out,
                 std::span<const std::string> domain_names, std::span<const TransferFlag> flags) {
  const auto& ks = report.mean.ks;
  std::ostringstream header;
  header << std::left << std::setw(12) << "Domain";
  for (const Metric m : {Metric::precision, Metric::recall, Metric::ndcg}) {
    for (const int k : ks) {
      const char tag = m == Metric::precision ? 'P' : m == Metric::recall ? 'R' : 'N';
      header << std::setw(16) << (std::string(1, tag) + "@" + std::to_string(k));
    }
  }
  out << header.str() << '\n';
  for (std::size_t di = 0; di < report.mean.domains.size(); ++di) {
    const int d = report.mean.domains[di].domain;
    const std::string name = static_cast<std::size_t>(d) < domain_names.size()
                                 ? domain_names[static_cast<std::size_t>(d)]
                                 : "domain_" + std::to_string(d);
    out << std::left << std::setw(12) << name;
    for (const Metric m : {Metric::precision, Metric::recall, Metric::ndcg}) {
      for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        std::ostringstream cell;
        cell << std::fixed << std::setprecision(2) << 100.0 * report.mean.domains[di].at_k[ki].get(m)
             << "±" << 100.0 * report.stddev.domains[di].at_k[ki].get(m);
        const bool flagged = std::any_of(flags.begin(), flags.end(), [&](const TransferFlag& f) {
          return f.domain == d && f.metric == m && f.k == ks[ki];
        });
        if (flagged) cell << 'v';
        // "±" is two bytes in UTF-8; pad by display width.
        std::string s = cell.str();
        const std::size_t width = s.size() - 1;
        out << s << std::string(width < 16 ? 16 - width : 1, ' ');
      }
    }
    out << '\n';
  }
  out << "(mean±std over " << report.runs << " run" << (report.runs == 1 ? "" : "s")
      << ", in %; v marks negative transfer against the baseline)\n";
}

}  // namespace catart::eval
