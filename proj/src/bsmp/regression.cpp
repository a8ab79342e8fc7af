#include "bsmp/regression.hpp"

#include "bsmp/errors.hpp"
#include "bsmp/parallel.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace bsmp {

void RegressionConfig::validate() const {
  if (degree < 0) throw ConfigError("regression degree must be nonnegative");
  if (!std::isfinite(ridge)) throw ConfigError("ridge must be finite");
}

std::size_t basis_size(int d, int degree) {
  // C(d + D, D) computed incrementally; exact for the small sizes used here.
  std::size_t value = 1;
  for (int j = 1; j <= degree; ++j) value = value * static_cast<std::size_t>(d + j) / static_cast<std::size_t>(j);
  return value;
}

namespace {

void enumerate_exponents(int vars, int degree, std::vector<std::vector<int>>& out) {
  // Graded order: total degree 0, 1, ..., degree; lexicographic within a degree.
  std::vector<int> current(static_cast<std::size_t>(vars), 0);
  for (int total = 0; total <= degree; ++total) {
    std::function<void(int, int)> place = [&](int var, int remaining) {
      if (var == vars - 1) {
        current[static_cast<std::size_t>(var)] = remaining;
        out.push_back(current);
        return;
      }
      for (int e = remaining; e >= 0; --e) {
        current[static_cast<std::size_t>(var)] = e;
        place(var + 1, remaining - e);
      }
    };
    if (vars == 0) {
      if (total == 0) out.emplace_back();
      continue;
    }
    place(0, total);
  }
}

}  // namespace

NodeRegression::NodeRegression(const Mat& features, const RegressionConfig& config)
    : dim_(static_cast<int>(features.cols())) {
  config.validate();
  const auto paths = features.rows();
  const std::size_t full = bsmp::basis_size(dim_, config.degree);
  if (full * 10 > static_cast<std::size_t>(paths)) {
    std::ostringstream os;
    os << "regression basis of size " << full << " needs at least " << full * 10
       << " paths, got " << paths;
    throw ConfigError(os.str());
  }

  mean_ = Vec::Zero(dim_);
  scale_ = Vec::Ones(dim_);
  for (int c = 0; c < dim_; ++c) {
    double sum = 0.0;
    for (Eigen::Index m = 0; m < paths; ++m) sum += features(m, c);
    const double mean = sum / static_cast<double>(paths);
    double sq = 0.0;
    for (Eigen::Index m = 0; m < paths; ++m) sq += (features(m, c) - mean) * (features(m, c) - mean);
    const double sd = std::sqrt(sq / static_cast<double>(paths));
    mean_[c] = mean;
    if (sd > 1e-14 * (1.0 + std::abs(mean))) {
      scale_[c] = sd;
      active_.push_back(c);
    }
  }
  max_degree_ = active_.empty() ? 0 : config.degree;
  enumerate_exponents(static_cast<int>(active_.size()), max_degree_, exponents_);

  const int p = basis_size();
  design_.resize(paths, p);
  parallel_chunks(static_cast<std::size_t>(paths), [&](std::size_t, std::size_t begin, std::size_t end) {
    Vec row(p), x(dim_);
    std::vector<double> scratch;
    for (std::size_t m = begin; m < end; ++m) {
      x = features.row(static_cast<Eigen::Index>(m)).transpose();
      basis_row(x.data(), row.data(), scratch);
      design_.row(static_cast<Eigen::Index>(m)) = row.transpose();
    }
  });

  const std::size_t chunks = chunk_count(static_cast<std::size_t>(paths));
  std::vector<Mat> partial(chunks, Mat::Zero(p, p));
  parallel_chunks(static_cast<std::size_t>(paths), [&](std::size_t c, std::size_t begin, std::size_t end) {
    const auto block = design_.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
    partial[c].noalias() = block.transpose() * block;
  });
  Mat normal = Mat::Zero(p, p);
  for (const auto& part : partial) normal += part;

  ridge_ = config.ridge >= 0.0 ? config.ridge : 1e-10 * normal.trace() / p;
  for (int j = 1; j < p; ++j) normal(j, j) += ridge_;

  solver_.compute(normal);
  const double rcond = solver_.info() == Eigen::Success ? solver_.rcond() : 0.0;
  if (!(rcond > 1e-15)) {
    std::ostringstream os;
    os << "singular normal equations after ridge (condition estimate " << (rcond > 0 ? 1.0 / rcond : INFINITY)
       << ", basis size " << p << ")";
    throw NumericalError(os.str());
  }
}

void NodeRegression::basis_row(const double* x, double* row, std::vector<double>& he) const {
  // Hermite values He_0..He_D per active coordinate.
  const std::size_t vars = active_.size();
  he.resize(vars * static_cast<std::size_t>(max_degree_ + 1));
  for (std::size_t a = 0; a < vars; ++a) {
    const int c = active_[a];
    const double u = (x[c] - mean_[c]) / scale_[c];
    double* h = he.data() + a * static_cast<std::size_t>(max_degree_ + 1);
    h[0] = 1.0;
    if (max_degree_ >= 1) h[1] = u;
    for (int k = 1; k < max_degree_; ++k) h[k + 1] = u * h[k] - k * h[k - 1];
  }
  for (std::size_t j = 0; j < exponents_.size(); ++j) {
    double value = 1.0;
    for (std::size_t a = 0; a < vars; ++a) {
      value *= he[a * static_cast<std::size_t>(max_degree_ + 1) + static_cast<std::size_t>(exponents_[j][a])];
    }
    row[j] = value;
  }
}

Mat NodeRegression::coefficients(const Mat& targets) const {
  if (targets.rows() != design_.rows()) throw ConfigError("regression targets have wrong path count");
  const auto paths = static_cast<std::size_t>(design_.rows());
  const std::size_t chunks = chunk_count(paths);
  std::vector<Mat> partial(chunks);
  parallel_chunks(paths, [&](std::size_t c, std::size_t begin, std::size_t end) {
    const auto rows = static_cast<Eigen::Index>(end - begin);
    partial[c].noalias() = design_.middleRows(static_cast<Eigen::Index>(begin), rows).transpose() *
                           targets.middleRows(static_cast<Eigen::Index>(begin), rows);
  });
  Mat rhs = Mat::Zero(design_.cols(), targets.cols());
  for (const auto& part : partial) rhs += part;
  return solver_.solve(rhs);
}

Mat NodeRegression::fitted(const Mat& targets) const {
  const Mat beta = coefficients(targets);
  Mat out(design_.rows(), targets.cols());
  parallel_chunks(static_cast<std::size_t>(design_.rows()), [&](std::size_t, std::size_t begin, std::size_t end) {
    const auto rows = static_cast<Eigen::Index>(end - begin);
    out.middleRows(static_cast<Eigen::Index>(begin), rows).noalias() =
        design_.middleRows(static_cast<Eigen::Index>(begin), rows) * beta;
  });
  return out;
}

Vec NodeRegression::evaluate(CVecRef feature, const Mat& coefficients) const {
  if (feature.size() != dim_) throw ConfigError("feature dimension mismatch");
  Vec row(basis_size());
  const Vec x = feature;
  std::vector<double> scratch;
  basis_row(x.data(), row.data(), scratch);
  return coefficients.transpose() * row;
}

Mat regress(const Mat& features, const Mat& targets, const RegressionConfig& config) {
  return NodeRegression(features, config).fitted(targets);
}

}  // namespace bsmp
