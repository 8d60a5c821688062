#pragma once

namespace rdmi {

// Planning quantities for a single-arm policy proportion split into
// on-treatment completers (n1, rate p1), retrieved dropouts observed at the
// endpoint (n2, rate p2), and IE patients missing at the endpoint (n3, rate p2).
struct GroupCounts {
  double n1 = 0.0;
  double n2 = 0.0;
  double n3 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
};

double policy_proportion(const GroupCounts& g);
double full_data_variance(const GroupCounts& g);
double missing_data_variance(const GroupCounts& g);
// (missing - full) / full; exact reduction (n3/n)(1 + n3/n2) when p1 == p2.
double relative_variance_increase(const GroupCounts& g);

}  // namespace rdmi
