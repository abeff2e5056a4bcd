#include <doctest.h>

#include <sstream>

#include "gpsm/dataset.hpp"
#include "gpsm/error.hpp"
#include "gpsm/simulation.hpp"

using gpsm::CsvSchema;
using gpsm::Dataset;
using gpsm::Index;

namespace {

CsvSchema schema() {
  CsvSchema s;
  s.treatment_column = "W";
  s.outcome_column = "Y";
  return s;
}

Dataset six_rows() {
  Eigen::MatrixXd x(6, 1);
  x << 10, 11, 12, 13, 14, 15;
  Eigen::VectorXd y(6);
  y << 0, 1, 2, 3, 4, 5;
  return Dataset(x, {1, 2, 1, 2, 1, 2}, y, {"x"}, 2);
}

}  // namespace

TEST_CASE("labels are coded by first appearance") {
  std::istringstream in("W,Y,x\nA,1,0.5\nB,2,1.5\nA,3,2.5\n");
  const Dataset d = gpsm::read_csv(in, schema());
  CHECK(d.levels() == 2);
  CHECK(d.treatment() == std::vector<int>{1, 2, 1});
  CHECK(d.level_labels() == std::vector<std::string>{"A", "B"});
  CHECK(d.covariate_names() == std::vector<std::string>{"x"});
}

TEST_CASE("non-finite outcome names the row and column") {
  std::istringstream in("W,Y,x\nA,1,0.5\nB,NaN,1.5\n");
  try {
    gpsm::read_csv(in, schema());
    FAIL("expected a data error");
  } catch (const gpsm::Error& e) {
    CHECK(e.kind() == gpsm::ErrorKind::Data);
    const std::string msg = e.what();
    CHECK(msg.find("Y") != std::string::npos);
    CHECK(msg.find("row 2") != std::string::npos);
  }
}

TEST_CASE("missing column is reported by name") {
  std::istringstream in("W,Y,x\nA,1,0.5\nB,2,1.5\n");
  CsvSchema s = schema();
  s.covariate_columns = {"x", "age"};
  try {
    gpsm::read_csv(in, s);
    FAIL("expected a data error");
  } catch (const gpsm::Error& e) {
    CHECK(std::string(e.what()).find("age") != std::string::npos);
  }
}

TEST_CASE("comment lines are skipped") {
  std::istringstream in("# produced elsewhere\nW,Y,x\nA,1,0.5\n# note\nB,2,1.5\n");
  const Dataset d = gpsm::read_csv(in, schema());
  CHECK(d.size() == 2);
}

TEST_CASE("a simulated draw round-trips through CSV") {
  const Dataset d = gpsm::generate(gpsm::design1(), 11);
  REQUIRE(d.size() == 1500);
  std::stringstream buf;
  gpsm::write_csv(d, buf);
  CsvSchema s;
  s.treatment_column = "treatment";
  s.outcome_column = "outcome";
  const Dataset back = gpsm::read_csv(buf, s);
  CHECK(back.covariates_without_intercept() == d.covariates_without_intercept());
  CHECK(back.outcome() == d.outcome());
  for (Index i = 0; i < d.size(); ++i) {
    CHECK(back.level_labels()[back.treatment()[i] - 1] == d.level_labels()[d.treatment()[i] - 1]);
  }
}

TEST_CASE("masks") {
  const Dataset d = six_rows();
  SUBCASE("all-true mask is the identity") {
    const Dataset same = gpsm::apply_mask(d, gpsm::UnitMask::all(d.size()));
    CHECK(same.covariates() == d.covariates());
    CHECK(same.treatment() == d.treatment());
    CHECK(same.outcome() == d.outcome());
  }
  SUBCASE("removing a whole arm is an error") {
    gpsm::UnitMask m{{true, false, true, false, true, false}};
    CHECK_THROWS_AS(gpsm::apply_mask(d, m), gpsm::Error);
  }
  SUBCASE("retained rows keep their order") {
    gpsm::UnitMask m{{true, false, true, false, true, false}};
    m.retained = {true, true, false, true, false, false};
    const Dataset sub = gpsm::apply_mask(d, m);
    REQUIRE(sub.size() == 3);
    CHECK(sub.outcome()[0] == 0);
    CHECK(sub.outcome()[1] == 1);
    CHECK(sub.outcome()[2] == 3);
    CHECK(gpsm::retained_counts(d, m) == std::vector<Index>{1, 2});
  }
}
