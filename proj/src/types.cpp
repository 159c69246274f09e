#include "jointmix/types.hpp"

#include "jointmix/errors.hpp"
#include "jointmix/ordinal_model.hpp"

#include <cmath>
#include <set>
#include <utility>

namespace jointmix {

void validate(const ResponseSet& responses, int items, int levels) {
  std::set<std::pair<int, int>> seen;
  for (const auto& cell : responses.cells) {
    if (cell.item < 0 || cell.item >= items) {
      throw InputError("item index " + std::to_string(cell.item + 1) + " outside 1.." +
                       std::to_string(items));
    }
    if (cell.level < 0 || cell.level >= levels) {
      throw InputError("response level " + std::to_string(cell.level + 1) + " outside 1.." +
                       std::to_string(levels));
    }
    if (!seen.emplace(cell.item, cell.time).second) {
      throw InputError("more than one level recorded for item " + std::to_string(cell.item + 1) +
                       " at time index " + std::to_string(cell.time));
    }
  }
}

void validate(const SurvivalRecord& record) {
  if (!std::isfinite(record.time) || record.time <= 0.0) {
    throw InputError("survival time must be positive and finite");
  }
  if (record.event != 0 && record.event != 1) {
    throw InputError("event indicator must be 0 or 1");
  }
  if (!std::isfinite(record.covariate)) {
    throw InputError("covariate must be finite");
  }
}

void validate(const Dataset& data) {
  if (data.subjects.empty()) throw InputError("dataset has no subjects");
  if (data.levels < 2) throw InputError("need at least two response levels");
  if (data.items < 1) throw InputError("need at least one item");
  for (const auto& s : data.subjects) {
    try {
      validate(s.responses, data.items, data.levels);
      validate(s.survival);
    } catch (const InputError& e) {
      throw InputError("subject " + s.id + ": " + e.what());
    }
  }
}

void validate(const ModelParams& params, int levels, int items) {
  const int groups = params.groups();
  if (groups < 1) throw InputError("need at least one group");
  if (params.theta[0] != 0.0) throw InputError("theta[1] must be 0");
  if (!params.theta.allFinite()) throw InputError("non-finite group effect");
  if (params.pi.size() != groups) throw InputError("pi must have one entry per group");
  if ((params.pi.array() <= 0.0).any()) throw InputError("mixture weights must be positive");
  if (std::abs(params.pi.sum() - 1.0) > 1e-9) throw InputError("mixture weights must sum to 1");
  if (!std::isfinite(params.survival.delta0) || !std::isfinite(params.survival.delta1)) {
    throw InputError("non-finite survival coefficient");
  }
  validate(params.ordinal, levels, items);
}

Posterior prior_posterior(std::size_t subjects, const Eigen::VectorXd& pi) {
  Posterior post;
  post.gamma.resize(static_cast<Eigen::Index>(subjects), pi.size());
  for (Eigen::Index i = 0; i < post.gamma.rows(); ++i) post.gamma.row(i) = pi.transpose();
  return post;
}

}  // namespace jointmix
