#pragma once

#include "jointmix/types.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace jointmix {

// Free-coordinate layout of Theta shared by the optimizer, score vectors and
// the information matrix:
//
//   theta_2..theta_R | a_2..a_L | b_2..b_J | u_2..u_{L-1} | delta0 | delta1
//
// u are the unconstrained coordinates of the monotone category scores.
// delta0 is absent when R = 1.
class ParamLayout {
 public:
  ParamLayout(int groups, int levels, int items);

  int groups() const { return groups_; }
  int levels() const { return levels_; }
  int items() const { return items_; }
  int size() const { return size_; }

  int theta_at() const { return 0; }
  int a_at() const { return groups_ - 1; }
  int b_at() const { return a_at() + levels_ - 1; }
  int u_at() const { return b_at() + items_ - 1; }
  int delta0_at() const { return groups_ >= 2 ? u_at() + levels_ - 2 : -1; }
  int delta1_at() const { return size_ - 1; }

  // Index of theta_r in the free vector, -1 for the reference group.
  int theta_index(int group) const { return group == 0 ? -1 : group - 1; }

  Eigen::VectorXd pack(const ModelParams& params) const;
  // Writes the free coordinates into a copy of base (pi is left as in base).
  ModelParams unpack(const Eigen::VectorXd& x, const ModelParams& base) const;

  // Adds a per-group ordinal score (ordinal_score layout) into the full vector.
  void add_ordinal(int group, const Eigen::VectorXd& ordinal, double weight,
                   Eigen::Ref<Eigen::VectorXd> out) const;
  // Adds a survival score (survival_score_size layout) into the full vector.
  void add_survival(const Eigen::VectorXd& survival, Eigen::Ref<Eigen::VectorXd> out) const;

  std::vector<std::string> names() const;

 private:
  int groups_;
  int levels_;
  int items_;
  int size_;
};

}  // namespace jointmix
