#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "relcap/data/tokenize.hpp"
#include "relcap/metrics/metrics.hpp"

namespace {

using namespace relcap::metrics;
using relcap::data::tokenize;

Sentence s(std::string_view text) { return tokenize(text); }

TEST(Bleu, IdenticalCorpusScoresOne) {
  const auto r = bleu({s("add a red circle"), s("swap the two shapes now")},
                      {{s("add a red circle")}, {s("swap the two shapes now")}});
  for (double b : r.bleu) EXPECT_DOUBLE_EQ(b, 1.0);
  EXPECT_DOUBLE_EQ(r.brevity_penalty, 1.0);
}

TEST(Bleu, ClippedUnigramsAndMissingBigrams) {
  const auto r = bleu({s("the the the the")}, {{s("the cat")}});
  EXPECT_DOUBLE_EQ(r.precision[0], 0.25);
  EXPECT_EQ(r.bleu[1], 0.0);
  EXPECT_EQ(r.bleu[2], 0.0);
  EXPECT_EQ(r.bleu[3], 0.0);
}

TEST(Bleu, BrevityPenaltyForHalfLengthCandidate) {
  const auto r = bleu({s("a b c")}, {{s("a b c d e f")}});
  EXPECT_DOUBLE_EQ(r.brevity_penalty, std::exp(-1.0));
  EXPECT_DOUBLE_EQ(r.bleu[0], std::exp(-1.0));
  EXPECT_DOUBLE_EQ(r.bleu[2], std::exp(-1.0));
  EXPECT_EQ(r.bleu[3], 0.0);  // a 3-word candidate has no 4-grams
}

TEST(Bleu, CorpusLevelCounts) {
  // p1 = 4/6, p2 = 2/4, p3 = 1/2, p4 = 0/1; c = 6, r = 4 + 3 = 7.
  const auto r = bleu({s("a b c d"), s("x y")}, {{s("a b c e")}, {s("x z w")}});
  const double bp = std::exp(1.0 - 7.0 / 6.0);
  EXPECT_NEAR(r.bleu[0], bp * (4.0 / 6.0), 1e-15);
  EXPECT_NEAR(r.bleu[1], bp * std::sqrt(4.0 / 6.0 * 0.5), 1e-15);
  EXPECT_NEAR(r.bleu[2], bp * std::cbrt(4.0 / 6.0 * 0.5 * 0.5), 1e-15);
  EXPECT_EQ(r.bleu[3], 0.0);
  EXPECT_EQ(r.candidate_length, 6u);
  EXPECT_EQ(r.reference_length, 7u);
}

TEST(Bleu, ClosestReferenceLengthTieGoesShorter) {
  const auto r = bleu({s("a b c d")}, {{s("a b c d e"), s("a b c")}});
  EXPECT_EQ(r.reference_length, 3u);
  EXPECT_DOUBLE_EQ(r.brevity_penalty, 1.0);
}

TEST(Bleu, ClosestReferenceNeverHurts) {
  const Sentence cand = s("move the square up");
  const auto single = bleu({cand}, {{s("move the blue square up now please")}});
  const auto multi = bleu({cand}, {{cand, s("move the blue square up now please")}});
  for (std::size_t n = 0; n < 4; ++n) EXPECT_GE(multi.bleu[n], single.bleu[n]);
}

TEST(Bleu, EmptyCorpusThrows) { EXPECT_THROW(bleu({}, {}), std::invalid_argument); }

TEST(RougeL, LcsExamples) {
  EXPECT_EQ(lcs_length(s("a b c"), s("a c b")), 2u);
  EXPECT_EQ(lcs_length(s("a b c d e"), s("x b y d z e")), 3u);
  EXPECT_EQ(lcs_length(s("a"), s("b")), 0u);
}

TEST(RougeL, IdenticalIsOne) { EXPECT_DOUBLE_EQ(rouge_l_sentence(s("a b c"), {s("a b c")}), 1.0); }

TEST(RougeL, SwappedTailIsTwoThirds) { EXPECT_NEAR(rouge_l_sentence(s("a b c"), {s("a c b")}), 2.0 / 3.0, 1e-15); }

TEST(RougeL, DisjointIsZero) { EXPECT_EQ(rouge_l_sentence(s("a b"), {s("c d")}), 0.0); }

TEST(RougeL, WeightedTowardRecall) {
  // LCS 2, P = 1, R = 1/2, beta^2 = 1.44: F = 2.44 * 0.5 / (0.5 + 1.44)
  EXPECT_NEAR(rouge_l_sentence(s("a b"), {s("a b c d")}), 2.44 * 0.5 / 1.94, 1e-15);
}

TEST(RougeL, MaxOverReferencesAndMeanOverCorpus) {
  EXPECT_DOUBLE_EQ(rouge_l_sentence(s("a b c"), {s("x y"), s("a b c")}), 1.0);
  EXPECT_NEAR(rouge_l({s("a b c"), s("a b")}, {{s("a b c")}, {s("c d")}}), 0.5, 1e-15);
}

TEST(Cider, IdenticalTwoWordSentencesScoreTen) {
  const auto r = cider({s("red circle"), s("blue square")}, {{s("red circle")}, {s("blue square")}});
  EXPECT_NEAR(r.score, 10.0, 1e-12);
  for (double e : r.per_example) EXPECT_NEAR(e, 10.0, 1e-12);
}

TEST(Cider, HandComputedPartialMatch) {
  // idf = ln 2 for every reference n-gram. Example 1: unigram cosine
  // {a, b} vs {a, c} = 1/2, bigram cosine "a b" vs "a c" = 0, orders 3-4
  // absent on both sides: 10 * (1/2 + 0) / 2 = 2.5. Example 2 matches: 10.
  const auto r = cider({s("a b"), s("d e")}, {{s("a c")}, {s("d e")}});
  ASSERT_EQ(r.per_example.size(), 2u);
  EXPECT_NEAR(r.per_example[0], 2.5, 1e-12);
  EXPECT_NEAR(r.per_example[1], 10.0, 1e-12);
  EXPECT_NEAR(r.score, 6.25, 1e-12);
}

TEST(Cider, NoSharedNgramScoresZero) {
  const auto r = cider({s("x y z"), s("d e")}, {{s("a b c")}, {s("d e")}});
  EXPECT_EQ(r.per_example[0], 0.0);
}

TEST(Cider, DegenerateCorporaThrow) {
  EXPECT_THROW(cider({s("a b")}, {{s("a b")}}), std::invalid_argument);
  EXPECT_THROW(cider({s("a b"), s("a b")}, {{s("a b")}, {s("a b")}}), std::invalid_argument);
}

TEST(Cider, ScoresStayInRange) {
  const auto r = cider({s("a a b"), s("c d c d"), s("e")}, {{s("a b"), s("a a")}, {s("c d")}, {s("f e"), s("e")}});
  for (double e : r.per_example) {
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 10.0 + 1e-12);
  }
}

struct Corpus {
  std::vector<Sentence> cands;
  std::vector<ReferenceSet> refs;
};

Corpus sample_corpus() {
  return {{s("add a red circle"), s("remove the blue square"), s("make it brighter"), s("swap two things")},
          {{s("add a red circle"), s("put a red circle in")},
           {s("remove the green square")},
           {s("brighten the image"), s("make the image brighter")},
           {s("swap the two shapes")}}};
}

TEST(Properties, PermutationInvariant) {
  const Corpus c = sample_corpus();
  Corpus p;
  for (std::size_t i : {2, 0, 3, 1}) {
    p.cands.push_back(c.cands[i]);
    p.refs.push_back(c.refs[i]);
  }
  const auto a = score_corpus(c.cands, c.refs), b = score_corpus(p.cands, p.refs);
  for (const char* name : {"bleu1", "bleu2", "bleu3", "bleu4", "rougeL", "cider"}) {
    EXPECT_NEAR(a.get(name), b.get(name), 1e-12) << name;
  }
}

TEST(Properties, AddingAnExactMatchNeverLowersScores) {
  Corpus c = sample_corpus();
  const auto before = score_corpus(c.cands, c.refs);
  c.cands.push_back(s("move the black triangle left"));
  c.refs.push_back({s("move the black triangle left")});
  const auto after = score_corpus(c.cands, c.refs);
  for (const char* name : {"bleu1", "bleu2", "bleu3", "bleu4", "rougeL"}) {
    EXPECT_GE(after.get(name), before.get(name)) << name;
  }
  // CIDEr idf changes with corpus size, so compare the earlier examples' mean
  // against the new all-match example instead.
  EXPECT_GE(cider(c.cands, c.refs).per_example.back(), before.cider);
}

TEST(Properties, ExtraReferenceNeverLowersRouge) {
  const Sentence cand = s("recolor the circle to blue");
  for (const auto& other : {s("change the circle to blue"), s("make the red circle blue")}) {
    EXPECT_GE(rouge_l_sentence(cand, {cand, other}), rouge_l_sentence(cand, {other}));
  }
}

TEST(Report, IdenticalCandidatesOnTwoExampleCorpus) {
  const auto r = score_corpus({s("red circle"), s("blue square")}, {{s("red circle")}, {s("blue square")}});
  EXPECT_DOUBLE_EQ(r.bleu4, 1.0);
  EXPECT_DOUBLE_EQ(r.rouge_l, 1.0);
  EXPECT_NEAR(r.cider, 10.0, 1e-12);
  const auto j = to_json(r);
  for (const char* key : {"bleu1", "bleu2", "bleu3", "bleu4", "rougeL", "cider", "n_examples"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["n_examples"], 2);
  EXPECT_THROW(r.get("meteor"), std::invalid_argument);
}

}  // namespace
