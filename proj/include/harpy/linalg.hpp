#pragma once

#include <Eigen/Dense>

namespace harpy {

inline constexpr double kPinvRelativeCutoff = 1e-8;

/// Moore-Penrose pseudo-inverse with relative singular-value cutoff.
struct PseudoInverse {
  Eigen::MatrixXd pinv;
  int rank = 0;
  double sigma_max = 0.0;
  double sigma_min = 0.0;  // smallest singular value, truncated or not
};

inline PseudoInverse pseudo_inverse(const Eigen::MatrixXd& A,
                                    double rel_cutoff = kPinvRelativeCutoff) {
  PseudoInverse out;
  out.pinv = Eigen::MatrixXd::Zero(A.cols(), A.rows());
  if (A.size() == 0) return out;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  out.sigma_max = s[0];
  out.sigma_min = s[s.size() - 1];
  const double cutoff = rel_cutoff * s[0];
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > cutoff && s[i] > 0.0) {
      inv[i] = 1.0 / s[i];
      ++out.rank;
    }
  }
  out.pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  return out;
}

}  // namespace harpy
