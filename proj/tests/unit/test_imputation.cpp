#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "biomass/errors.hpp"
#include "biomass/imputation.hpp"
#include "support.hpp"

using namespace biomass;
using testing::advanced;
using testing::basic;

namespace {

// Brute-force oracles: plain loops over the rows, no shared code.
std::pair<double, double> naive_mean(const std::vector<Sample>& s) {
  double w = 0, r = 0;
  int n = 0;
  for (const auto& x : s) {
    if (x.category != Category::Advanced || x.labels.clover_pct <= 0) continue;
    const double t = *x.labels.white_pct + *x.labels.red_pct;
    w += *x.labels.white_pct / t;
    r += *x.labels.red_pct / t;
    ++n;
  }
  return {w / n, r / n};
}

double naive_median(std::vector<double> v) {
  // selection by counting, not sorting
  const auto n = v.size();
  auto kth = [&](std::size_t k) {
    for (double c : v) {
      std::size_t less = 0, equal = 0;
      for (double d : v) {
        less += d < c;
        equal += d == c;
      }
      if (less <= k && k < less + equal) return c;
    }
    return v[0];
  };
  return n % 2 ? kth(n / 2) : (kth(n / 2 - 1) + kth(n / 2)) / 2;
}

std::pair<double, double> naive_median_fracs(const std::vector<Sample>& s) {
  std::vector<double> w, r;
  for (const auto& x : s) {
    if (x.category != Category::Advanced || x.labels.clover_pct <= 0) continue;
    const double t = *x.labels.white_pct + *x.labels.red_pct;
    w.push_back(*x.labels.white_pct / t);
    r.push_back(*x.labels.red_pct / t);
  }
  const double mw = naive_median(w), mr = naive_median(r);
  return {mw / (mw + mr), mr / (mw + mr)};
}

void check_hierarchy(const std::vector<Sample>& out) {
  for (const auto& s : out) {
    REQUIRE(s.labels.has_breakdown());
    CHECK(std::abs(*s.labels.white_pct + *s.labels.red_pct - s.labels.clover_pct) <= 1e-6);
    CHECK(*s.labels.white_pct >= 0);
    CHECK(*s.labels.red_pct >= -1e-12);
    CHECK(*s.labels.white_pct <= s.labels.clover_pct + 1e-12);
  }
}

void check_advanced_unchanged(const std::vector<Sample>& in, const std::vector<Sample>& out) {
  REQUIRE(in.size() == out.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i].category == Category::Advanced) CHECK(in[i] == out[i]);
  }
}

// Advanced rows with white_frac = 0.002 * grass, plus basic rows.
std::vector<Sample> planted(Rng& rng, std::size_t n_adv, std::size_t n_basic) {
  std::vector<Sample> s;
  for (std::size_t i = 0; i < n_adv + n_basic; ++i) {
    const double grass = rng.uniform(10, 80);
    const double clover = rng.uniform(5, 100 - grass - 1);
    const double weeds = 100 - grass - clover;
    const int season = 1 + static_cast<int>(rng.index(4));
    const auto id = "p" + std::to_string(i);
    if (i < n_adv) {
      const double wf = 0.002 * grass;
      s.push_back(advanced(id, grass, wf * clover, clover - wf * clover, weeds, season));
    } else {
      s.push_back(basic(id, grass, clover, weeds, season));
    }
  }
  return s;
}

}  // namespace

TEST_CASE("mean imputation hand example") {
  const std::vector<Sample> s{advanced("a", 50, 10, 10, 30), advanced("b", 50, 14, 6, 30),
                              basic("c", 50, 30, 20)};
  const auto f = mean_fractions(s);
  CHECK(f.white_frac == doctest::Approx(0.6).epsilon(1e-12));
  const auto out = impute_mean(s);
  CHECK(*out[2].labels.white_pct == doctest::Approx(18).epsilon(1e-12));
  CHECK(*out[2].labels.red_pct == doctest::Approx(12).epsilon(1e-12));
  check_advanced_unchanged(s, out);
}

TEST_CASE("median imputation hand examples") {
  {
    const std::vector<Sample> s{advanced("a", 50, 4, 16, 30), advanced("b", 50, 10, 10, 30),
                                advanced("c", 50, 16, 4, 30), basic("d", 40, 40, 20)};
    const auto out = impute_median(s);
    CHECK(*out[3].labels.white_pct == doctest::Approx(20).epsilon(1e-12));
    CHECK(*out[3].labels.red_pct == doctest::Approx(20).epsilon(1e-12));
  }
  {
    const std::vector<Sample> s{advanced("a", 50, 12, 8, 30), advanced("b", 50, 6, 4, 40),
                                advanced("c", 50, 18, 2, 30), basic("d", 30, 50, 20)};
    const auto out = impute_median(s);
    CHECK(*out[3].labels.white_pct == doctest::Approx(30).epsilon(1e-12));
    CHECK(*out[3].labels.red_pct == doctest::Approx(20).epsilon(1e-12));
  }
  {
    const std::vector<Sample> s{advanced("a", 50, 5, 15, 30), basic("d", 10, 80, 10)};
    const auto out = impute_median(s);
    CHECK(*out[1].labels.white_pct == doctest::Approx(20).epsilon(1e-12));
    CHECK(*out[1].labels.red_pct == doctest::Approx(60).epsilon(1e-12));
  }
}

TEST_CASE("median fractions sum to one") {
  // complementary per-sample fractions keep the two medians summing to one
  const std::vector<Sample> s{advanced("a", 50, 3, 7, 40), advanced("b", 50, 5, 5, 40),
                              advanced("c", 50, 6, 4, 40), advanced("d", 50, 9, 1, 40)};
  const auto f = median_fractions(s);
  CHECK(f.white_frac + f.red_frac == doctest::Approx(1).epsilon(1e-15));
  CHECK(f.white_frac == doctest::Approx(0.55).epsilon(1e-12));
}

TEST_CASE("zero clover and no-basic cases") {
  const std::vector<Sample> s{advanced("a", 50, 10, 10, 30), basic("z", 80, 0, 20)};
  for (auto out : {impute_mean(s), impute_median(s)}) {
    CHECK(*out[1].labels.white_pct == 0);
    CHECK(*out[1].labels.red_pct == 0);
  }
  const std::vector<Sample> only_adv{advanced("a", 50, 10, 10, 30), advanced("b", 50, 5, 15, 30)};
  CHECK(impute_mean(only_adv) == only_adv);
  CHECK(impute_median(only_adv) == only_adv);
  CHECK(impute_regression(only_adv, 3, 1) == only_adv);
}

TEST_CASE("advanced rows with zero clover are excluded from statistics") {
  const std::vector<Sample> s{advanced("a", 50, 10, 10, 30), advanced("b", 70, 0, 0, 30),
                              basic("c", 50, 30, 20)};
  CHECK(mean_fractions(s).white_frac == doctest::Approx(0.5));
}

TEST_CASE("no usable advanced sample is an error") {
  const std::vector<Sample> s{advanced("a", 70, 0, 0, 30), basic("c", 50, 30, 20)};
  CHECK_THROWS_AS(impute_mean(s), InputError);
  CHECK_THROWS_AS(impute_median(s), InputError);
  CHECK_THROWS_AS(impute_regression(s, 2, 0), InputError);
  CHECK_THROWS_AS(impute_regression(s, 0, 0), InputError);
}

TEST_CASE("mean and median match brute-force oracles on random datasets") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = testing::random_dataset(rng, 3 + rng.index(48));
    const auto [mw, mr] = naive_mean(s);
    const auto fm = mean_fractions(s);
    CHECK(std::abs(fm.white_frac - mw) <= 1e-9);
    CHECK(std::abs(fm.red_frac - mr) <= 1e-9);
    CHECK(std::abs(fm.white_frac + fm.red_frac - 1) <= 1e-12);
    const auto [dw, dr] = naive_median_fracs(s);
    const auto fd = median_fractions(s);
    CHECK(std::abs(fd.white_frac - dw) <= 1e-9);
    CHECK(std::abs(fd.red_frac - dr) <= 1e-9);

    const auto out_mean = impute_mean(s);
    const auto out_median = impute_median(s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i].category != Category::Basic) continue;
      CHECK(std::abs(*out_mean[i].labels.white_pct - mw * s[i].labels.clover_pct) <= 1e-9);
      CHECK(std::abs(*out_median[i].labels.red_pct - dr * s[i].labels.clover_pct) <= 1e-9);
    }
    check_hierarchy(out_mean);
    check_hierarchy(out_median);
    check_advanced_unchanged(s, out_mean);
    check_advanced_unchanged(s, out_median);
  }
}

TEST_CASE("regression recovers a planted linear relation") {
  Rng rng(77);
  const auto s = planted(rng, 30, 20);
  SUBCASE("complete-only fit is exact after one iteration") {
    const auto out = impute_regression(s, 1, 5, RegressionFitScope::CompleteOnly);
    for (std::size_t i = 30; i < s.size(); ++i) {
      const double wf = *out[i].labels.white_pct / out[i].labels.clover_pct;
      CHECK(std::abs(wf - 0.002 * s[i].labels.grass_pct) <= 1e-6);
    }
    check_hierarchy(out);
  }
  SUBCASE("chained fit converges to the same relation") {
    const auto out = impute_regression(s, 200, 5, RegressionFitScope::All);
    for (std::size_t i = 30; i < s.size(); ++i) {
      const double wf = *out[i].labels.white_pct / out[i].labels.clover_pct;
      CHECK(std::abs(wf - 0.002 * s[i].labels.grass_pct) <= 1e-6);
    }
    check_hierarchy(out);
    check_advanced_unchanged(s, out);
  }
}

TEST_CASE("regression coefficients predict in percent units") {
  Rng rng(78);
  const auto s = planted(rng, 25, 5);
  const auto r = impute_regression_detailed(s, 1, 1, RegressionFitScope::CompleteOnly);
  REQUIRE(r.fit.coefficients.size() == RegressionFit::names().size());
  for (const auto& x : s) {
    const auto& c = r.fit.coefficients;
    const double pred = c[0] + c[1] * x.labels.grass_pct + c[2] * x.labels.clover_pct +
                        c[3] * x.labels.weeds_pct + c[3 + x.harvest_season];
    CHECK(std::abs(pred - 0.002 * x.labels.grass_pct) <= 1e-6);
  }
}

TEST_CASE("constant advanced fractions give constant imputations regardless of seed") {
  Rng rng(79);
  auto s = planted(rng, 10, 10);
  for (std::size_t i = 0; i < 10; ++i) {
    s[i].labels.white_pct = s[i].labels.clover_pct / 2;
    s[i].labels.red_pct = s[i].labels.clover_pct / 2;
  }
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const auto out = impute_regression(s, 5, seed);
    for (std::size_t i = 10; i < s.size(); ++i) {
      CHECK(*out[i].labels.white_pct / out[i].labels.clover_pct == doctest::Approx(0.5).epsilon(1e-6));
    }
  }
}

TEST_CASE("regression is reproducible and keeps the hierarchy") {
  Rng rng(80);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = testing::random_dataset(rng, 10 + rng.index(40), 0.5);
    const auto a = impute_regression(s, 5, 123);
    CHECK(a == impute_regression(s, 5, 123));
    check_hierarchy(a);
    check_advanced_unchanged(s, a);
  }
}

TEST_CASE("impute dispatches and needs_imputation detects gaps") {
  Rng rng(81);
  const auto s = testing::random_dataset(rng, 20);
  CHECK(needs_imputation(s));
  for (auto v : {ImputationVariant::Mean, ImputationVariant::Median, ImputationVariant::Regression}) {
    ImputationMethod m;
    m.variant = v;
    CHECK_FALSE(needs_imputation(impute(s, m)));
  }
  CHECK(parse_imputation_variant("median") == ImputationVariant::Median);
  CHECK_THROWS_AS(parse_imputation_variant("mode"), InputError);
  CHECK(parse_fit_scope("complete_only") == RegressionFitScope::CompleteOnly);
  CHECK_THROWS_AS(parse_fit_scope("some"), InputError);
}
