#include "jaanet/losses.hpp"

namespace jaanet {

Eigen::VectorXd au_weights(const Eigen::VectorXd& rates) {
  if (rates.size() == 0) throw ZeroOccurrenceError("no occurrence rates available");
  for (Eigen::Index i = 0; i < rates.size(); ++i) {
    if (!(rates[i] > 0))
      throw ZeroOccurrenceError("AU at position " + std::to_string(i) +
                                " never occurs; smooth its rate or drop it");
    if (rates[i] > 1) throw std::domain_error("occurrence rate above 1");
  }
  const Eigen::VectorXd inv = rates.cwiseInverse();
  return inv / inv.sum();
}

}  // namespace jaanet
