#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "helpers.hpp"
#include "metric_oracle.hpp"
#include "inferem/evalmetrics.hpp"

using namespace inferem;

TEST_SUITE("evalmetrics") {

TEST_CASE("emotion accuracy examples") {
  CHECK(emotion_accuracy(std::vector<int>{1, 2, 3, 4}, std::vector<int>{1, 2, 3, 0}) == 0.75);
  CHECK(emotion_accuracy(std::vector<int>{5, 5}, std::vector<int>{5, 5}) == 1.0);
  CHECK(emotion_accuracy(std::vector<int>{0, 1}, std::vector<int>{1, 0}) == 0.0);
  CHECK_THROWS_AS(emotion_accuracy(std::vector<int>{1}, std::vector<int>{1, 2}), MetricError);
  CHECK_THROWS_AS(emotion_accuracy(std::vector<int>{}, std::vector<int>{}), MetricError);
}

TEST_CASE("emotion accuracy ignores a consistent shuffle of pairs") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> cls(0, 4);
  std::vector<int> p(40), l(40);
  for (std::size_t i = 0; i < 40; ++i) {
    p[i] = cls(rng);
    l[i] = cls(rng);
  }
  const double base = emotion_accuracy(p, l);
  std::vector<std::size_t> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> ps, ls;
    for (std::size_t i : perm) {
      ps.push_back(p[i]);
      ls.push_back(l[i]);
    }
    CHECK(emotion_accuracy(ps, ls) == base);
  }
}

TEST_CASE("perplexity examples") {
  const double ln2 = std::log(2.0);
  CHECK(perplexity(std::vector<double>{ln2, ln2, ln2}) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(perplexity(std::vector<double>{0.0, std::log(4.0)}) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(perplexity(std::vector<double>{0.0}) == 1.0);
  CHECK_THROWS_AS(perplexity(std::vector<double>{}), MetricError);
}

TEST_CASE("perplexity depends only on the pooled tokens") {
  const auto f = oracle::random_metric_fixture(3);
  std::vector<double> pooled;
  for (const auto& r : f.nlls) pooled.insert(pooled.end(), r.begin(), r.end());
  const double base = perplexity(pooled);
  CHECK(std::abs(base - oracle::perplexity(f.nlls)) < 1e-10);
  std::reverse(pooled.begin(), pooled.end());
  CHECK(std::abs(perplexity(pooled) - base) < 1e-10 * base);
  // Regrouping into one response changes nothing.
  CHECK(std::abs(oracle::perplexity({pooled}) - base) < 1e-10 * base);
}

TEST_CASE("distinct-n examples") {
  const std::vector<std::vector<std::string>> iam{{"i", "am", "i"}};
  CHECK(distinct_n(iam, 1) == doctest::Approx(200.0 / 3.0).epsilon(1e-14));
  CHECK(distinct_n(iam, 1) == doctest::Approx(66.67).epsilon(1e-4));
  const std::vector<std::vector<int>> same{{7, 7, 7}, {7, 7}};
  CHECK(distinct_n(same, 1) == doctest::Approx(100.0 / 5.0).epsilon(1e-15));
  const std::vector<std::vector<int>> unique{{4, 5, 6}, {7, 8}};
  CHECK(distinct_n(unique, 1) == 100.0);
  CHECK(distinct_n(unique, 2) == 100.0);
}

TEST_CASE("distinct-n drops PAD and EOS tokens") {
  const std::vector<std::vector<int>> with{{4, 5, kEos, kPad}, {4, kEos}};
  const std::vector<std::vector<int>> without{{4, 5}, {4}};
  CHECK(distinct_n(with, 1) == distinct_n(without, 1));
  CHECK(distinct_n(with, 1) == doctest::Approx(200.0 / 3.0).epsilon(1e-14));
  const std::vector<std::vector<std::string>> text{{"a", "<eos>", "<pad>"}, {"a", "b"}};
  CHECK(distinct_n(text, 1) == doctest::Approx(200.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("distinct-n rejects corpora without n-grams and unsupported n") {
  const std::vector<std::vector<int>> singles{{4}, {kEos}, {}};
  CHECK(distinct_n(singles, 1) == 100.0);
  CHECK_THROWS_AS(distinct_n(singles, 2), MetricError);
  CHECK_THROWS_AS(distinct_n(std::vector<std::vector<int>>{}, 1), MetricError);
  CHECK_THROWS_AS(distinct_n(singles, 3), MetricError);
}

TEST_CASE("distinct-n on a two-response fixture matches a brute-force count") {
  const std::vector<std::vector<int>> two{{4, 5, 4, 5, 6}, {5, 6, 4, 5}};
  // Bigrams: 45 54 45 56 | 56 64 45 -> unique {45, 54, 56, 64} of 7.
  CHECK(distinct_n(two, 2) == doctest::Approx(400.0 / 7.0).epsilon(1e-15));
  CHECK(distinct_n(two, 2) == doctest::Approx(oracle::distinct_pooled(two, 2)).epsilon(1e-15));
  CHECK(distinct_n(two, 1) == doctest::Approx(oracle::distinct_pooled(two, 1)).epsilon(1e-15));
}

TEST_CASE("averaged distinct-n is the mean per-response ratio") {
  const std::vector<std::vector<int>> two{{4, 4}, {5, 6, 7, 5}, {kEos}};
  // Response ratios 1/2 and 3/4; the third has no unigram.
  CHECK(distinct_n(two, 1, DistinctMode::averaged) == doctest::Approx(62.5).epsilon(1e-15));
  CHECK(distinct_n(two, 1, DistinctMode::pooled) == doctest::Approx(400.0 / 6.0).epsilon(1e-15));
  CHECK(parse_distinct_mode("averaged") == DistinctMode::averaged);
  CHECK(parse_distinct_mode("pooled") == DistinctMode::pooled);
  CHECK_THROWS_AS(parse_distinct_mode("mean"), MetricError);
}

TEST_CASE("metrics match brute-force recomputation on random fixtures") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto f = oracle::random_metric_fixture(seed);
    CHECK(emotion_accuracy(f.predictions, f.labels) == oracle::accuracy(f.predictions, f.labels));
    std::vector<double> pooled;
    for (const auto& r : f.nlls) pooled.insert(pooled.end(), r.begin(), r.end());
    CHECK(std::abs(perplexity(pooled) - oracle::perplexity(f.nlls)) < 1e-10);
    for (int n : {1, 2}) {
      const double got = distinct_n(f.responses, n);
      CHECK(std::abs(got - oracle::distinct_pooled(f.responses, static_cast<std::size_t>(n))) < 1e-10);
      CHECK(got >= 0.0);
      CHECK(got <= 100.0);
    }
  }
}

TEST_CASE("report validation") {
  EvalReport r{0.5, 12.0, 3.0, 7.5, 10};
  CHECK_NOTHROW(r.validate());
  EvalReport bad = r;
  bad.emotion_accuracy = 1.5;
  CHECK_THROWS_AS(bad.validate(), MetricError);
  bad = r;
  bad.perplexity = std::nan("");
  CHECK_THROWS_AS(bad.validate(), MetricError);
  bad = r;
  bad.distinct2 = 101.0;
  CHECK_THROWS_AS(bad.validate(), MetricError);
}

TEST_CASE("report files parse back losslessly") {
  testing::TempDir dir("report");
  const EvalReport r{0.1234567890123456789, 31.26000000000001, 0.59, 2.6000000000000001, 7};
  write_report(dir.path() / "r.txt", r);
  CHECK(read_report(dir.path() / "r.txt") == r);

  const EvalReport third{1.0 / 3.0, std::exp(1.0), 100.0 / 7.0, 0.0, 1};
  write_report(dir.path() / "t.txt", third);
  CHECK(read_report(dir.path() / "t.txt") == third);

  {
    std::ofstream out(dir.path() / "partial.txt");
    out << "perplexity = 3\n";
  }
  CHECK_THROWS_AS(read_report(dir.path() / "partial.txt"), MetricError);
}

TEST_CASE("the console table lists the four columns in order") {
  std::ostringstream out;
  print_report_table(out, EvalReport{0.3998, 31.26, 0.59, 2.6, 100});
  const std::string s = out.str();
  const auto acc = s.find("Accuracy(%)"), ppl = s.find("Perplexity"), d1 = s.find("Distinct-1"),
             d2 = s.find("Distinct-2");
  REQUIRE(acc != std::string::npos);
  CHECK(acc < ppl);
  CHECK(ppl < d1);
  CHECK(d1 < d2);
  CHECK(s.find("39.98") != std::string::npos);
  CHECK(s.find("31.26") != std::string::npos);
}

}  // TEST_SUITE
