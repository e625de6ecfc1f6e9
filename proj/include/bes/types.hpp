#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace bes {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

/// A real function on the nodes (length n) or, with several channels, an n x c matrix.
using NodeSignal = Vector;
/// A real function on the edges, indexed by canonical edge order (length m).
using EdgeSignal = Vector;

}  // namespace bes
