#include <cmath>
#include <stdexcept>

#include "dwellcert/stability.hpp"

namespace dwellcert {

const char* to_string(SearchStatus s) {
  switch (s) {
    case SearchStatus::kConverged:
      return "converged";
    case SearchStatus::kHitCap:
      return "hit-cap";
    case SearchStatus::kSolverFailure:
      return "solver-failure";
  }
  return "?";
}

DwellTimeResult min_dwell_search(const LpvSystem& sys, Mode mode, const CertifyOptions& opt,
                                 const SearchOptions& search) {
  if (!uses_dwell(mode)) throw std::invalid_argument("dwell-time search needs a dwell-time mode");
  if (!(search.start > 0.0) || !(search.rel_tol > 0.0))
    throw std::invalid_argument("search start and tolerance must be positive");
  DwellTimeResult res;
  bool lower_from_failure = false;

  // True when T is certified; keeps the certificate of the smallest such T.
  auto probe = [&](double t) {
    CertifyResult r = certify(sys, mode, t, opt);
    res.log.push_back({t, r.outcome, r.stats});
    if (r.outcome != Outcome::kFeasible) return false;
    if (!res.certificate || t < res.certified) {
      res.certified = t;
      res.certificate = std::move(r.certificate);
    }
    return true;
  };
  auto mark_lower = [&](double t) {
    res.lower = t;
    lower_from_failure = res.log.back().outcome != Outcome::kInfeasible;
  };

  double t = search.start;
  if (probe(t)) {
    res.upper = t;
    res.lower = 0.0;
    while (t * 0.5 >= search.min_dwell) {
      t *= 0.5;
      if (probe(t)) {
        res.upper = t;
      } else {
        mark_lower(t);
        break;
      }
    }
    if (res.lower == 0.0) {
      res.status = SearchStatus::kConverged;
      return res;
    }
  } else {
    mark_lower(t);
    for (;;) {
      t *= 2.0;
      if (t > search.max_dwell) {
        res.status = SearchStatus::kHitCap;
        res.upper = 0.0;
        return res;
      }
      if (probe(t)) {
        res.upper = t;
        break;
      }
      mark_lower(t);
    }
  }

  while (res.upper - res.lower > search.rel_tol * res.upper) {
    const double mid = 0.5 * (res.lower + res.upper);
    if (probe(mid))
      res.upper = mid;
    else
      mark_lower(mid);
  }
  res.status = lower_from_failure ? SearchStatus::kSolverFailure : SearchStatus::kConverged;
  return res;
}

}  // namespace dwellcert
