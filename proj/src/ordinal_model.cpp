#include "jointmix/ordinal_model.hpp"

#include "jointmix/errors.hpp"

#include <cmath>

namespace jointmix {

namespace {

// Log-probabilities for one item, log-sum-exp with max subtraction.
void item_log_probs(double shift, const OrdinalParams& params, Eigen::Ref<Eigen::RowVectorXd> out) {
  const auto levels = params.a.size();
  double top = -INFINITY;
  for (Eigen::Index l = 0; l < levels; ++l) {
    out[l] = params.a[l] + params.phi[l] * shift;
    top = std::max(top, out[l]);
  }
  double total = 0.0;
  for (Eigen::Index l = 0; l < levels; ++l) total += std::exp(out[l] - top);
  out.array() -= top + std::log(total);
}

void check_effect(double group_effect) {
  if (!std::isfinite(group_effect)) throw InputError("non-finite group effect");
}

}  // namespace

void validate(const OrdinalParams& params, int levels, int items) {
  if (params.a.size() != levels || params.phi.size() != levels) {
    throw InputError("ordinal parameters a and phi must have length L = " +
                     std::to_string(levels));
  }
  if (params.b.size() != items) {
    throw InputError("item effects b must have length J = " + std::to_string(items));
  }
  if (!params.a.allFinite() || !params.phi.allFinite() || !params.b.allFinite()) {
    throw InputError("non-finite ordinal parameter");
  }
  if (params.a[0] != 0.0 || params.b[0] != 0.0) throw InputError("a[1] and b[1] must be 0");
  if (params.phi[0] != 0.0 || params.phi[levels - 1] != 1.0) {
    throw InputError("phi[1] must be 0 and phi[L] must be 1");
  }
  for (int l = 0; l + 1 < levels; ++l) {
    if (params.phi[l] > params.phi[l + 1]) throw InputError("phi must be nondecreasing");
  }
}

int ordinal_score_size(int levels, int items) {
  return (levels - 1) + (items - 1) + (levels - 2) + 1;
}

Eigen::VectorXd phi_from_free(const Eigen::VectorXd& u) {
  const auto levels = u.size() + 2;
  Eigen::VectorXd weight(levels - 1);
  for (Eigen::Index k = 0; k < u.size(); ++k) weight[k] = u[k];
  weight[levels - 2] = 0.0;
  // exp relative to the largest exponent keeps the ratio finite
  weight.array() = (weight.array() - weight.maxCoeff()).exp();
  const double total = weight.sum();
  Eigen::VectorXd phi(levels);
  phi[0] = 0.0;
  double running = 0.0;
  for (Eigen::Index l = 1; l < levels; ++l) {
    running += weight[l - 1];
    phi[l] = running / total;
  }
  phi[levels - 1] = 1.0;
  return phi;
}

Eigen::VectorXd free_from_phi(const Eigen::VectorXd& phi) {
  const auto levels = phi.size();
  if (levels < 2) throw InputError("phi needs at least two levels");
  const double last = phi[levels - 1] - phi[levels - 2];
  Eigen::VectorXd u(levels - 2);
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    const double step = phi[k + 1] - phi[k];
    if (!(step > 0.0) || !(last > 0.0)) {
      throw InputError("phi must be strictly increasing to map onto free coordinates");
    }
    u[k] = std::log(step / last);
  }
  return u;
}

Eigen::VectorXd category_probs(int item, double group_effect, const OrdinalParams& params) {
  if (item < 0 || item >= params.b.size()) {
    throw InputError("item index " + std::to_string(item + 1) + " out of range");
  }
  check_effect(group_effect);
  if (!params.a.allFinite() || !params.phi.allFinite() || !params.b.allFinite()) {
    throw InputError("non-finite ordinal parameter");
  }
  Eigen::RowVectorXd logp(params.a.size());
  item_log_probs(params.b[item] + group_effect, params, logp);
  return logp.transpose().array().exp();
}

Eigen::MatrixXd category_log_probs(double group_effect, const OrdinalParams& params) {
  Eigen::MatrixXd out(params.b.size(), params.a.size());
  Eigen::RowVectorXd row(params.a.size());
  for (Eigen::Index j = 0; j < params.b.size(); ++j) {
    item_log_probs(params.b[j] + group_effect, params, row);
    out.row(j) = row;
  }
  return out;
}

Eigen::MatrixXd response_counts(const ResponseSet& responses, int items, int levels) {
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(items, levels);
  for (const auto& cell : responses.cells) {
    if (cell.item < 0 || cell.item >= items || cell.level < 0 || cell.level >= levels) {
      throw InputError("response cell out of range");
    }
    counts(cell.item, cell.level) += 1.0;
  }
  return counts;
}

double ordinal_loglik(const Eigen::MatrixXd& counts, double group_effect,
                      const OrdinalParams& params) {
  check_effect(group_effect);
  return counts.cwiseProduct(category_log_probs(group_effect, params)).sum();
}

double ordinal_loglik(const ResponseSet& responses, double group_effect,
                      const OrdinalParams& params) {
  const auto items = static_cast<int>(params.b.size());
  const auto levels = static_cast<int>(params.a.size());
  return ordinal_loglik(response_counts(responses, items, levels), group_effect, params);
}

Eigen::VectorXd ordinal_score(const Eigen::MatrixXd& counts, double group_effect,
                              const OrdinalParams& params) {
  check_effect(group_effect);
  const auto items = params.b.size();
  const auto levels = params.a.size();
  const auto& phi = params.phi;
  const Eigen::Index a_at = 0;
  const Eigen::Index b_at = levels - 1;
  const Eigen::Index u_at = b_at + items - 1;
  const Eigen::Index theta_at = u_at + levels - 2;

  Eigen::VectorXd score = Eigen::VectorXd::Zero(theta_at + 1);
  Eigen::VectorXd d_phi = Eigen::VectorXd::Zero(levels);
  Eigen::RowVectorXd logp(levels);
  for (Eigen::Index j = 0; j < items; ++j) {
    const double total = counts.row(j).sum();
    if (total == 0.0) continue;
    const double shift = params.b[j] + group_effect;
    item_log_probs(shift, params, logp);
    const Eigen::RowVectorXd p = logp.array().exp();
    const double mean_phi = p.dot(phi);
    const double linear = counts.row(j).dot(phi) - total * mean_phi;
    for (Eigen::Index l = 1; l < levels; ++l) {
      const double resid = counts(j, l) - total * p[l];
      score[a_at + l - 1] += resid;
      d_phi[l] += resid * shift;
    }
    if (j > 0) score[b_at + j - 1] += linear;
    score[theta_at] += linear;
  }
  // chain rule: d phi_k / d u_m = (phi_m - phi_{m-1}) (1{k >= m} - phi_k)
  for (Eigen::Index m = 1; m + 1 < levels; ++m) {
    const double step = phi[m] - phi[m - 1];
    double acc = 0.0;
    for (Eigen::Index k = 1; k < levels; ++k) {
      acc += d_phi[k] * ((k >= m ? 1.0 : 0.0) - phi[k]);
    }
    score[u_at + m - 1] = step * acc;
  }
  return score;
}

Eigen::VectorXd ordinal_score(const ResponseSet& responses, double group_effect,
                              const OrdinalParams& params) {
  const auto items = static_cast<int>(params.b.size());
  const auto levels = static_cast<int>(params.a.size());
  return ordinal_score(response_counts(responses, items, levels), group_effect, params);
}

}  // namespace jointmix
