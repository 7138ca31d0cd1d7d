#pragma once

#include <Eigen/Dense>

#include <vector>

namespace mashup {

// Classification samples, one row per example. Features are held in f64 for
// the compute path; checkpoint storage stays f32.
struct Dataset {
  Eigen::MatrixXd features;  // n x input_dim
  Eigen::VectorXi labels;    // n, values in [0, n_classes)

  Eigen::Index size() const { return features.rows(); }

  Dataset gather(const std::vector<int>& idx) const {
    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
    out.labels.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.features.row(static_cast<Eigen::Index>(i)) = features.row(idx[i]);
      out.labels[static_cast<Eigen::Index>(i)] = labels[idx[i]];
    }
    return out;
  }

  Dataset head(Eigen::Index n) const {
    Dataset out;
    out.features = features.topRows(n);
    out.labels = labels.head(n);
    return out;
  }
};

}  // namespace mashup
