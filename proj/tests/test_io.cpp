#include <doctest.h>

#include <fstream>
#include <sstream>

#include "test_helpers.hpp"
#include "thermoprop/io.hpp"

using namespace thermoprop;
using namespace tp_test;

TEST_CASE("spec JSON round trip preserves every parameter") {
  std::mt19937_64 rng(101);
  RandomSpecOptions opt;
  opt.num_modules = 3;
  opt.quartic = true;
  opt.trainable_bias = true;
  const auto spec = random_spec(rng, opt);
  const Json j = spec_to_json(spec);
  const auto back = spec_from_json(j);

  CHECK(back.partition.input_dim == spec.partition.input_dim);
  CHECK(back.partition.module_sizes == spec.partition.module_sizes);
  CHECK((back.base.stiffness - spec.base.stiffness).norm() == 0.0);
  CHECK((back.base.quartic - spec.base.quartic).norm() == 0.0);
  REQUIRE(back.couplings.size() == spec.couplings.size());
  for (std::size_t c = 0; c < spec.couplings.size(); ++c) {
    CHECK((back.couplings[c].u - spec.couplings[c].u).norm() == 0.0);
    CHECK((back.couplings[c].v - spec.couplings[c].v).norm() == 0.0);
  }
  CHECK(back.train_v == spec.train_v);

  const Vec x = random_state(rng, spec.dim());
  CHECK(energy(back, x) == energy(spec, x));
}

namespace {
SubstrateSpec small_spec() {
  std::mt19937_64 rng(55);
  return random_spec(rng);
}
}  // namespace

TEST_CASE("seeded coupling form expands deterministically") {
  Json j = spec_to_json(small_spec());
  j["couplings"] = Json::array();
  j["couplings"].push_back({{"m", 0}, {"mp", 1}, {"k", 2}, {"seed", 77}, {"gain", 0.5}});
  const auto a = spec_from_json(j);
  const auto b = spec_from_json(j);
  CHECK((a.couplings[0].u - b.couplings[0].u).norm() == 0.0);
  CHECK((a.couplings[0].v - b.couplings[0].v).norm() == 0.0);
  CHECK(a.couplings[0].u.cols() == 2);
}

TEST_CASE("unknown keys are rejected") {
  Json j = spec_to_json(small_spec());
  j["extra_knob"] = 1.0;
  CHECK_THROWS_AS(spec_from_json(j), SpecError);
}

TEST_CASE("require_keys accepts subsets and names the offender") {
  Json j = {{"a", 1}, {"b", 2}};
  CHECK_NOTHROW(require_keys(j, {"a", "b", "c"}, "ctx"));
  try {
    require_keys(j, {"a"}, "ctx");
    FAIL("expected throw");
  } catch (const SpecError& e) {
    CHECK(std::string(e.what()).find("b") != std::string::npos);
  }
}

TEST_CASE("config hash is stable and key-order independent") {
  Json a = {{"x", 1}, {"y", {1.5, 2.5}}, {"s", "t"}};
  Json b;
  b["y"] = {1.5, 2.5};
  b["s"] = "t";
  b["x"] = 1;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  Json c = a;
  c["x"] = 2;
  CHECK(config_hash(c) != config_hash(a));
}

TEST_CASE("sweep record CSV layout") {
  std::vector<SweepRecord> recs = {
      {"e2", 0.01, 3, "bias", 1.25e-4, "deadbeef00000000"},
      {"e2", 0.02, 3, "bias", 5e-4, "deadbeef00000000"},
  };
  write_records_csv(recs, "/tmp/tp_records.csv");
  std::ifstream in("/tmp/tp_records.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "experiment_id,beta,seed,metric_name,metric_value,config_hash");
  std::getline(in, line);
  CHECK(line == "e2,0.01,3,bias,0.000125,deadbeef00000000");

  const Json j = records_to_json(recs);
  REQUIRE(j.is_array());
  CHECK(j.size() == 2);
  CHECK(j[0]["metric_value"] == 1.25e-4);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1e-300, -3.5, 12345.6789, 2e-3}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(1.0) == "1");
}

TEST_CASE("svg plot contains series data") {
  PlotSeries s;
  s.label = "bias";
  s.x = {1e-3, 1e-2, 1e-1};
  s.y = {1e-6, 1e-4, 1e-2};
  const std::string svg = render_svg_plot({s}, "scaling", true, true);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("bias") != std::string::npos);
  CHECK(svg.find("scaling") != std::string::npos);
  // identical inputs render identically
  CHECK(render_svg_plot({s}, "scaling", true, true) == svg);
}
