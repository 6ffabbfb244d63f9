#include <doctest.h>

#include <random>

#include "copar/reconcile.hpp"

using namespace copar;

TEST_CASE("activity weights") {
  CHECK(compute_weight(0, 0, 3) == Rational(1, 3));
  CHECK(compute_weight(30, 60, 3) == Rational(31, 63));
  CHECK(compute_weight(10, 60, 3) == Rational(11, 63));
}

TEST_CASE("weight columns sum to one exactly") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<Amount> activity(-20, 200);
  std::uniform_int_distribution<std::size_t> nodes(1, 8);
  for (int i = 0; i < 400; ++i) {
    std::vector<Amount> col(nodes(rng));
    for (auto& ra : col) ra = activity(rng);
    auto w = column_weights(col, static_cast<int>(col.size()));
    Rational sum(0);
    for (const auto& wj : w) {
      CHECK(wj > Rational(0));
      sum += wj;
    }
    CHECK(sum == Rational(1));
  }
}

TEST_CASE("redistribution targets follow c*P*w") {
  Rational c = parse_decimal("1.1");
  CHECK(redistribute_entry(40, c, Rational(31, 63)) == 22);
  CHECK(redistribute_entry(40, c, Rational(21, 63)) == 15);
  // exact value is 484/63 = 7.68..., which rounds to 8
  CHECK(redistribute_entry(40, c, Rational(11, 63)) == 8);
}

TEST_CASE("redistribution sum stays within rounding slack of c*P") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<Amount> pool(0, 500);
  std::uniform_int_distribution<Amount> activity(0, 60);
  std::uniform_int_distribution<std::size_t> nodes(1, 6);
  for (int i = 0; i < 400; ++i) {
    Amount P = pool(rng);
    std::vector<Amount> col(nodes(rng));
    for (auto& ra : col) ra = activity(rng);
    Rational c(11, 10);
    auto targets = redistribute(P, CostBound(c), col);
    Rational sum(0);
    for (Amount t : targets) {
      CHECK(t >= 0);
      sum += Rational(t);
    }
    Rational slack = sum - c * Rational(P);
    if (slack < Rational(0)) slack = -slack;
    CHECK(slack * Rational(2) <= Rational(static_cast<Amount>(col.size())));
  }
}

TEST_CASE("staleness adjustment") {
  SUBCASE("allocations since the snapshot shrink the target") {
    auto r = stale_adjust(22, 36, 30);
    CHECK(r.T_new == 16);
    CHECK_FALSE(r.stopped);
  }
  SUBCASE("returns since the snapshot grow the target") {
    auto r = stale_adjust(7, 7, 10);
    CHECK(r.T_new == 10);
    CHECK_FALSE(r.stopped);
  }
  SUBCASE("negative result clamps to zero and stops the processor") {
    auto r = stale_adjust(7, 18, 10);
    CHECK(r.T_new == 0);
    CHECK(r.stopped);
  }
  SUBCASE("second worked value") {
    auto r = stale_adjust(15, 24, 20);
    CHECK(r.T_new == 11);
    CHECK_FALSE(r.stopped);
  }
  SUBCASE("idempotent when nothing moved") {
    for (Amount t : {0ll, 5ll, 40ll}) {
      auto r = stale_adjust(t, 12, 12);
      CHECK(r.T_new == t);
      auto again = stale_adjust(r.T_new, 12, 12);
      CHECK(again.T_new == r.T_new);
    }
  }
}

TEST_CASE("a net returner ends above its target") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<Amount> target(0, 50);
  for (int i = 0; i < 200; ++i) {
    Amount t = target(rng);
    Amount recorded = 20;
    Amount current = recorded - 1 - (i % 7);  // returned since snapshot
    auto r = stale_adjust(t, current, recorded);
    CHECK(r.T_new > t);
  }
}

TEST_CASE("additions grow P and re-split with current weights") {
  std::map<NodeId, std::vector<Amount>> ra{{1, {0}}, {2, {0}}, {3, {0}}};
  SUBCASE("uniform weights") {
    auto res = apply_addition(ResourceVector{40}, ResourceVector{20},
                              CostBound(parse_decimal("1.1")), ra);
    CHECK(res.P == ResourceVector{60});
    for (const auto& [j, t] : res.targets) CHECK(t == ResourceVector{22});
  }
  SUBCASE("zero addition matches plain redistribution") {
    auto res = apply_addition(ResourceVector{40}, ResourceVector{0},
                              CostBound(parse_decimal("1.1")), ra);
    CHECK(res.P == ResourceVector{40});
    auto plain = redistribute_all(ResourceVector{40}, CostBound(parse_decimal("1.1")), ra);
    CHECK(res.targets == plain);
  }
  SUBCASE("exact division") {
    auto res = apply_addition(ResourceVector{0}, ResourceVector{9}, CostBound(Rational(1)), ra);
    CHECK(res.P == ResourceVector{9});
    for (const auto& [j, t] : res.targets) CHECK(t == ResourceVector{3});
  }
  SUBCASE("negative additions are rejected") {
    CHECK_THROWS_AS(
        apply_addition(ResourceVector{10}, ResourceVector{-1}, CostBound(Rational(1)), ra),
        ProtocolError);
  }
}
