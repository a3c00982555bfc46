#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

namespace relcap::metrics {

using Sentence = std::vector<std::string>;
using ReferenceSet = std::vector<Sentence>;

struct BleuResult {
  std::array<double, 4> bleu{};       // bleu[n-1] = BLEU-n
  std::array<double, 4> precision{};  // clipped corpus n-gram precisions
  double brevity_penalty = 1.0;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
};

// Corpus BLEU: clipped n-gram counts summed over the corpus, geometric mean
// of precisions 1..n, brevity penalty exp(1 - r/c) when c < r, where r sums
// each example's closest reference length (ties go to the shorter one). An
// order with no n-grams in any candidate or reference is left out of the
// mean. Otherwise any zero precision (including no candidate n-grams of that
// order) zeroes BLEU-n and every higher order.
BleuResult bleu(const std::vector<Sentence>& candidates, const std::vector<ReferenceSet>& references,
                std::size_t max_n = 4);

// LCS-based F-measure with beta = 1.2, max over references, mean over corpus.
double rouge_l(const std::vector<Sentence>& candidates, const std::vector<ReferenceSet>& references,
               double beta = 1.2);
double rouge_l_sentence(const Sentence& candidate, const ReferenceSet& references, double beta = 1.2);
std::size_t lcs_length(const Sentence& a, const Sentence& b);

// Plain CIDEr (no length penalty or count clipping). For n = 1..4, tf-idf
// vectors with idf = ln(|corpus| / df), df counted over reference sets; the
// per-order score is the mean cosine over references. Orders where neither
// sentence has an n-gram are skipped when averaging. Per-example score =
// 10 * mean over orders; corpus score = mean over examples.
struct CiderResult {
  double score = 0.0;
  std::vector<double> per_example;
};
CiderResult cider(const std::vector<Sentence>& candidates, const std::vector<ReferenceSet>& references);

struct MetricReport {
  double bleu1 = 0.0;
  double bleu2 = 0.0;
  double bleu3 = 0.0;
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double cider = 0.0;
  std::size_t n_examples = 0;

  double get(const std::string& name) const;  // bleu1..bleu4, rougeL, cider
};

MetricReport score_corpus(const std::vector<Sentence>& candidates, const std::vector<ReferenceSet>& references);

// {"bleu1".."bleu4", "rougeL", "cider", "n_examples"}
nlohmann::json to_json(const MetricReport& report);

}  // namespace relcap::metrics
