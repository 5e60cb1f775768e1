#include <doctest.h>

#include "crl/theory_checks.hpp"

using namespace crl;

TEST_CASE("comparison helpers") {
  CHECK(compare(1.0, Cmp::AtLeast, 1.0));
  CHECK_FALSE(compare(1.0, Cmp::Above, 1.0));
  CHECK(compare(0.05, Cmp::Below, 0.1));
  CHECK_FALSE(compare(NAN, Cmp::Below, 0.1));
}

TEST_CASE("negative controls pass only when the signal is absent") {
  CheckResult c;
  c.cmp = Cmp::AtLeast;
  c.threshold = 10.0;
  c.control = true;
  c.per_seed = {2.0, 4.0};
  CHECK(finish_check(c).passed);
  c.per_seed = {20.0, 30.0};
  CHECK_FALSE(finish_check(c).passed);
  c.per_seed = {NAN};
  CHECK_FALSE(finish_check(c).passed);
}

TEST_CASE("fast suite: lemma checks pass") {
  const auto results = run_suite("fast", SuiteOptions{});
  REQUIRE(results.size() == 2);
  CHECK(all_passed(results));
  const auto report = suite_report(results);
  CHECK(report.find("L1") != std::string::npos);
  CHECK(report.find("2/2 passed") != std::string::npos);
}

TEST_CASE("every theorem id has a registered case") {
  for (const char* id : {"T1", "T2", "T3", "T4", "Tdo-multi", "L1", "L4", "DegSel"}) {
    bool found = false;
    for (const auto& c : theorem_cases()) found = found || c.id == id;
    CHECK_MESSAGE(found, id);
  }
  CHECK_THROWS(run_suite("T9", SuiteOptions{}));
}
