#include "jointmix/param_layout.hpp"

#include "jointmix/errors.hpp"
#include "jointmix/ordinal_model.hpp"

namespace jointmix {

ParamLayout::ParamLayout(int groups, int levels, int items)
    : groups_(groups), levels_(levels), items_(items) {
  if (groups < 1 || levels < 2 || items < 1) throw InputError("invalid model dimensions");
  size_ = (groups - 1) + (levels - 1) + (items - 1) + (levels - 2) + (groups >= 2 ? 1 : 0) + 1;
}

Eigen::VectorXd ParamLayout::pack(const ModelParams& params) const {
  Eigen::VectorXd x(size_);
  for (int r = 1; r < groups_; ++r) x[theta_index(r)] = params.theta[r];
  for (int l = 1; l < levels_; ++l) x[a_at() + l - 1] = params.ordinal.a[l];
  for (int j = 1; j < items_; ++j) x[b_at() + j - 1] = params.ordinal.b[j];
  x.segment(u_at(), levels_ - 2) = free_from_phi(params.ordinal.phi);
  if (groups_ >= 2) x[delta0_at()] = params.survival.delta0;
  x[delta1_at()] = params.survival.delta1;
  return x;
}

ModelParams ParamLayout::unpack(const Eigen::VectorXd& x, const ModelParams& base) const {
  ModelParams out = base;
  out.theta = Eigen::VectorXd::Zero(groups_);
  for (int r = 1; r < groups_; ++r) out.theta[r] = x[theta_index(r)];
  out.ordinal.a = Eigen::VectorXd::Zero(levels_);
  for (int l = 1; l < levels_; ++l) out.ordinal.a[l] = x[a_at() + l - 1];
  out.ordinal.b = Eigen::VectorXd::Zero(items_);
  for (int j = 1; j < items_; ++j) out.ordinal.b[j] = x[b_at() + j - 1];
  out.ordinal.phi = phi_from_free(x.segment(u_at(), levels_ - 2));
  if (groups_ >= 2) out.survival.delta0 = x[delta0_at()];
  out.survival.delta1 = x[delta1_at()];
  return out;
}

void ParamLayout::add_ordinal(int group, const Eigen::VectorXd& ordinal, double weight,
                              Eigen::Ref<Eigen::VectorXd> out) const {
  const int block = (levels_ - 1) + (items_ - 1) + (levels_ - 2);
  out.segment(a_at(), block) += weight * ordinal.head(block);
  if (group > 0) out[theta_index(group)] += weight * ordinal[block];
}

void ParamLayout::add_survival(const Eigen::VectorXd& survival,
                               Eigen::Ref<Eigen::VectorXd> out) const {
  for (int r = 1; r < groups_; ++r) out[theta_index(r)] += survival[r - 1];
  if (groups_ >= 2) out[delta0_at()] += survival[groups_ - 1];
  out[delta1_at()] += survival[survival.size() - 1];
}

std::vector<std::string> ParamLayout::names() const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(size_));
  for (int r = 2; r <= groups_; ++r) out.push_back("theta" + std::to_string(r));
  for (int l = 2; l <= levels_; ++l) out.push_back("a" + std::to_string(l));
  for (int j = 2; j <= items_; ++j) out.push_back("b" + std::to_string(j));
  for (int l = 2; l < levels_; ++l) out.push_back("u" + std::to_string(l));
  if (groups_ >= 2) out.emplace_back("delta0");
  out.emplace_back("delta1");
  return out;
}

}  // namespace jointmix
