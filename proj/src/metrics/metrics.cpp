#include "relcap/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace relcap::metrics {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const Sentence& s, std::size_t n) {
  NgramCounts counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[Sentence(s.begin() + i, s.begin() + i + n)];
  return counts;
}

void check_corpus(const char* metric, const std::vector<Sentence>& candidates,
                  const std::vector<ReferenceSet>& references) {
  if (candidates.empty()) throw std::invalid_argument(std::string(metric) + ": empty candidate list");
  if (candidates.size() != references.size()) {
    throw std::invalid_argument(std::string(metric) + ": " + std::to_string(candidates.size()) + " candidates but " +
                                std::to_string(references.size()) + " reference sets");
  }
  for (const auto& refs : references) {
    if (refs.empty()) throw std::invalid_argument(std::string(metric) + ": example without references");
  }
}

}  // namespace

BleuResult bleu(const std::vector<Sentence>& candidates, const std::vector<ReferenceSet>& references,
                std::size_t max_n) {
  check_corpus("bleu", candidates, references);
  if (max_n == 0 || max_n > 4) throw std::invalid_argument("bleu: max_n must be in 1..4");
  std::array<double, 4> matched{}, total{};
  std::array<bool, 4> in_refs{};
  BleuResult result;
  for (std::size_t e = 0; e < candidates.size(); ++e) {
    const auto& cand = candidates[e];
    const auto& refs = references[e];
    result.candidate_length += cand.size();
    std::size_t closest = refs[0].size();
    for (const auto& r : refs) {
      const auto diff = [&](std::size_t len) { return len > cand.size() ? len - cand.size() : cand.size() - len; };
      if (diff(r.size()) < diff(closest) || (diff(r.size()) == diff(closest) && r.size() < closest)) closest = r.size();
    }
    result.reference_length += closest;
    for (std::size_t n = 1; n <= max_n; ++n) {
      NgramCounts max_ref;
      for (const auto& r : refs) {
        in_refs[n - 1] = in_refs[n - 1] || r.size() >= n;
        for (const auto& [g, c] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
      }
      for (const auto& [g, c] : ngrams(cand, n)) {
        const auto it = max_ref.find(g);
        matched[n - 1] += static_cast<double>(std::min(c, it == max_ref.end() ? std::size_t{0} : it->second));
        total[n - 1] += static_cast<double>(c);
      }
    }
  }
  const double c = static_cast<double>(result.candidate_length), r = static_cast<double>(result.reference_length);
  result.brevity_penalty = c == 0.0 ? 0.0 : (c < r ? std::exp(1.0 - r / c) : 1.0);
  double log_sum = 0.0;
  std::size_t orders = 0;
  bool zero = false;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const bool absent = total[n - 1] == 0.0 && !in_refs[n - 1];
    result.precision[n - 1] = total[n - 1] > 0.0 ? matched[n - 1] / total[n - 1] : (absent ? 1.0 : 0.0);
    zero = zero || result.precision[n - 1] == 0.0;
    if (!zero && !absent) {
      log_sum += std::log(result.precision[n - 1]);
      ++orders;
    }
    result.bleu[n - 1] =
        zero || orders == 0 ? 0.0 : result.brevity_penalty * std::exp(log_sum / static_cast<double>(orders));
  }
  return result;
}

std::size_t lcs_length(const Sentence& a, const Sentence& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_sentence(const Sentence& candidate, const ReferenceSet& references, double beta) {
  double best = 0.0;
  for (const auto& ref : references) {
    const auto lcs = static_cast<double>(lcs_length(candidate, ref));
    if (lcs == 0.0) continue;
    const double p = lcs / static_cast<double>(candidate.size());
    const double r = lcs / static_cast<double>(ref.size());
    const double f = (1.0 + beta * beta) * p * r / (r + beta * beta * p);
    best = std::max(best, f);
  }
  return best;
}

double rouge_l(const std::vector<Sentence>& candidates, const std::vector<ReferenceSet>& references, double beta) {
  check_corpus("rouge_l", candidates, references);
  double total = 0.0;
  for (std::size_t e = 0; e < candidates.size(); ++e) total += rouge_l_sentence(candidates[e], references[e], beta);
  return total / static_cast<double>(candidates.size());
}

CiderResult cider(const std::vector<Sentence>& candidates, const std::vector<ReferenceSet>& references) {
  check_corpus("cider", candidates, references);
  constexpr std::size_t kMaxN = 4;
  const std::size_t corpus = candidates.size();
  if (corpus < 2) throw std::invalid_argument("cider: degenerate corpus (needs at least 2 examples for idf)");

  // Document frequency of each n-gram over reference sets.
  std::array<std::map<std::vector<std::string>, std::size_t>, kMaxN> df;
  for (const auto& refs : references) {
    for (std::size_t n = 1; n <= kMaxN; ++n) {
      std::set<std::vector<std::string>> seen;
      for (const auto& r : refs) {
        for (const auto& [g, c] : ngrams(r, n)) seen.insert(g);
      }
      for (const auto& g : seen) ++df[n - 1][g];
    }
  }
  bool informative = false;
  for (const auto& table : df) {
    for (const auto& [g, count] : table) informative = informative || count < corpus;
  }
  if (!informative) throw std::invalid_argument("cider: degenerate corpus (every reference n-gram has zero idf)");

  const double log_corpus = std::log(static_cast<double>(corpus));
  auto tfidf = [&](const Sentence& s, std::size_t n) {
    std::map<std::vector<std::string>, double> vec;
    for (const auto& [g, c] : ngrams(s, n)) {
      const auto it = df[n - 1].find(g);
      const double doc_freq = it == df[n - 1].end() ? 1.0 : static_cast<double>(it->second);
      vec[g] = static_cast<double>(c) * (log_corpus - std::log(doc_freq));
    }
    return vec;
  };
  auto norm = [](const std::map<std::vector<std::string>, double>& v) {
    double s = 0.0;
    for (const auto& [g, x] : v) s += x * x;
    return std::sqrt(s);
  };

  CiderResult result;
  result.per_example.reserve(corpus);
  for (std::size_t e = 0; e < corpus; ++e) {
    double order_total = 0.0;
    std::size_t orders = 0;
    double example_total = 0.0;
    for (const auto& ref : references[e]) {
      order_total = 0.0;
      orders = 0;
      for (std::size_t n = 1; n <= kMaxN; ++n) {
        if (candidates[e].size() < n && ref.size() < n) continue;
        ++orders;
        const auto vc = tfidf(candidates[e], n);
        const auto vr = tfidf(ref, n);
        const double denom = norm(vc) * norm(vr);
        if (denom == 0.0) continue;
        double dot = 0.0;
        for (const auto& [g, x] : vc) {
          const auto it = vr.find(g);
          if (it != vr.end()) dot += x * it->second;
        }
        order_total += std::clamp(dot / denom, 0.0, 1.0);
      }
      example_total += orders == 0 ? 0.0 : order_total / static_cast<double>(orders);
    }
    const double score = 10.0 * example_total / static_cast<double>(references[e].size());
    result.per_example.push_back(score);
    result.score += score;
  }
  result.score /= static_cast<double>(corpus);
  return result;
}

double MetricReport::get(const std::string& name) const {
  if (name == "bleu1") return bleu1;
  if (name == "bleu2") return bleu2;
  if (name == "bleu3") return bleu3;
  if (name == "bleu4") return bleu4;
  if (name == "rougeL") return rouge_l;
  if (name == "cider") return cider;
  throw std::invalid_argument("unknown metric '" + name + "' (expected bleu1..bleu4|rougeL|cider)");
}

MetricReport score_corpus(const std::vector<Sentence>& candidates, const std::vector<ReferenceSet>& references) {
  MetricReport report;
  const auto b = bleu(candidates, references, 4);
  report.bleu1 = b.bleu[0];
  report.bleu2 = b.bleu[1];
  report.bleu3 = b.bleu[2];
  report.bleu4 = b.bleu[3];
  report.rouge_l = rouge_l(candidates, references);
  report.cider = cider(candidates, references).score;
  report.n_examples = candidates.size();
  return report;
}

nlohmann::json to_json(const MetricReport& r) {
  return nlohmann::json{{"bleu1", r.bleu1},     {"bleu2", r.bleu2}, {"bleu3", r.bleu3},
                        {"bleu4", r.bleu4},     {"rougeL", r.rouge_l}, {"cider", r.cider},
                        {"n_examples", r.n_examples}};
}

}  // namespace relcap::metrics
