#include "rdmi/varinfl.hpp"

#include <stdexcept>

namespace rdmi {

namespace {

void check(const GroupCounts& g, bool need_n2) {
  if (g.n1 < 0.0 || g.n2 < 0.0 || g.n3 < 0.0)
    throw std::invalid_argument("varinfl: counts must be nonnegative");
  if (!(g.p1 > 0.0 && g.p1 < 1.0) || !(g.p2 > 0.0 && g.p2 < 1.0))
    throw std::invalid_argument("varinfl: probabilities must be in (0,1)");
  if (g.n1 + g.n2 + g.n3 <= 0.0) throw std::invalid_argument("varinfl: empty arm");
  if (need_n2 && g.n2 <= 0.0)
    throw std::invalid_argument("varinfl: n2 must be positive with missing data");
}

}  // namespace

double policy_proportion(const GroupCounts& g) {
  check(g, false);
  const double n = g.n1 + g.n2 + g.n3;
  return (g.n1 * g.p1 + (g.n2 + g.n3) * g.p2) / n;
}

double full_data_variance(const GroupCounts& g) {
  check(g, false);
  const double n = g.n1 + g.n2 + g.n3;
  return (g.n1 * g.p1 * (1.0 - g.p1) + (g.n2 + g.n3) * g.p2 * (1.0 - g.p2)) / (n * n);
}

double missing_data_variance(const GroupCounts& g) {
  check(g, g.n3 > 0.0);
  const double n = g.n1 + g.n2 + g.n3;
  const double tail = g.n3 > 0.0 ? g.n2 + 2.0 * g.n3 + g.n3 * g.n3 / g.n2 : g.n2;
  return (g.n1 * g.p1 * (1.0 - g.p1) + g.p2 * (1.0 - g.p2) * tail) / (n * n);
}

double relative_variance_increase(const GroupCounts& g) {
  check(g, true);
  if (g.n3 == 0.0) return 0.0;
  if (g.p1 == g.p2) {
    const double n = g.n1 + g.n2 + g.n3;
    return (g.n3 / n) * (1.0 + g.n3 / g.n2);
  }
  const double v2 = g.p2 * (1.0 - g.p2);
  return g.n3 * v2 * (1.0 + g.n3 / g.n2) /
         (g.n1 * g.p1 * (1.0 - g.p1) + v2 * (g.n2 + g.n3));
}

}  // namespace rdmi
