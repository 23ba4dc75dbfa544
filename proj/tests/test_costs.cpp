#include <doctest.h>

#include <stdexcept>

#include "thermoprop/costs.hpp"

using namespace thermoprop;

TEST_CASE("analog step energy formula") {
  PhysicalParams p;
  p.kb_t = 4.14e-21;
  p.lambda_star = 1.0;
  p.n_cells = 1;
  CHECK(analog_step_energy(p) == doctest::Approx(1.242e-20).epsilon(1e-12));

  p.lambda_star = 0.1;
  CHECK(analog_step_energy(p) == doctest::Approx(1.242e-19).epsilon(1e-12));

  p.n_cells = 1000;
  CHECK(analog_step_energy(p) ==
        doctest::Approx(1000 * 1.242e-19).epsilon(1e-12));
}

TEST_CASE("digital step energy formula") {
  PhysicalParams p;
  p.n_mac = 1e6;
  p.e_mac = 1e-11;
  CHECK(digital_step_energy(p) == doctest::Approx(1e-5).epsilon(1e-12));
  p.n_mac = 0;
  CHECK(digital_step_energy(p) == 0.0);
}

TEST_CASE("advantage ratio divides the two energies") {
  PhysicalParams p;
  p.n_cells = 100;
  p.lambda_star = 0.5;
  p.n_mac = 1e4;
  p.e_mac = 1e-12;
  const double a = analog_step_energy(p);
  const double d = digital_step_energy(p);
  const CostReport r = advantage_ratio(p);
  CHECK(r.analog_joules == doctest::Approx(a).epsilon(1e-12));
  CHECK(r.digital_joules == doctest::Approx(d).epsilon(1e-12));
  CHECK(r.advantage == doctest::Approx(d / a).epsilon(1e-12));
  CHECK(r.ratio == doctest::Approx(a / d).epsilon(1e-12));
  CHECK(r.per_cell_equilibration_joules ==
        doctest::Approx(p.kb_t / (2.0 * p.lambda_star)).epsilon(1e-12));
}

TEST_CASE("parameter validation") {
  PhysicalParams p;
  p.n_cells = 0;
  CHECK_THROWS_AS(analog_step_energy(p), std::invalid_argument);
  p.n_cells = 10;
  p.lambda_star = -1.0;
  CHECK_THROWS_AS(analog_step_energy(p), std::invalid_argument);
  p.lambda_star = 0.1;
  p.e_mac = -1.0;
  CHECK_THROWS_AS(digital_step_energy(p), std::invalid_argument);
}

TEST_CASE("matched mac count") {
  // one coupling between modules of size 3 and 5 with rank 2
  CHECK(matched_mac_count(2, {{3, 5}}) == 6 * 2 * (3 + 5));
  CHECK(matched_mac_count(1, {{4, 4}, {4, 4}}) == 6 * (8 + 8));
}

TEST_CASE("representative preset lands in the advantage band") {
  const PhysicalParams p = representative_params();
  const double adv = advantage_ratio(p).advantage;
  CHECK(adv >= 1e3);
  CHECK(adv <= 1e4);
}
