#include "doctest.h"
#include "random_graph.hpp"

using namespace surfer::testing;

TEST_CASE("random composite graphs match central finite differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    GraphGenerator gen(seed);
    RandomGraph g = gen.generate();
    const GradCheckResult r = check_graph(g);
    INFO("graph seed " << seed << " steps " << g.steps.size());
    CHECK(r.max_rel_error < 1e-4);
    worst = std::max(worst, r.max_rel_error);
  }
  MESSAGE("worst relative error " << worst);
}
