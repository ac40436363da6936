#include "mia/composition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mia/signals.hpp"

namespace mia::composition {

std::string_view to_string(Orientation o) {
  return o == Orientation::smaller_is_member ? "smaller_is_member" : "larger_is_member";
}

std::optional<Orientation> parse_orientation(std::string_view text) {
  if (text == "smaller_is_member") return Orientation::smaller_is_member;
  if (text == "larger_is_member") return Orientation::larger_is_member;
  return std::nullopt;
}

Orientation OrientationTable::default_for(std::string_view group) {
  if (group.rfind("rep_", 0) == 0) group.remove_prefix(4);
  if (group == signals::kCountBelow || group == signals::kCountBelowMean ||
      group == signals::kCountBelowPrevMean) {
    return Orientation::larger_is_member;
  }
  return Orientation::smaller_is_member;
}

OrientationTable OrientationTable::defaults(const std::vector<std::string>& groups) {
  std::map<std::string, Orientation> entries;
  for (const auto& g : groups) entries[g] = default_for(g);
  return OrientationTable(std::move(entries));
}

Orientation OrientationTable::at(const std::string& group) const {
  auto it = entries_.find(group);
  if (it == entries_.end()) throw ConfigError("no orientation for signal group '" + group + "'");
  return it->second;
}

double orient(double value, const std::string& group, const OrientationTable& table) {
  return table.at(group) == Orientation::smaller_is_member ? value : -value;
}

FeatureSet FeatureSet::from_names(std::vector<std::string> names) {
  FeatureSet fs;
  fs.groups.reserve(names.size());
  for (const auto& n : names) fs.groups.push_back(signals::feature_group(n));
  fs.names = std::move(names);
  return fs;
}

std::optional<double> median(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

// ---------------------------------------------------------------------------

double empirical_p_value(std::span<const double> sorted_pool, double v) {
  if (sorted_pool.empty()) throw PoolError("empirical p-value needs a non-empty reference pool");
  const auto below = std::upper_bound(sorted_pool.begin(), sorted_pool.end(), v) - sorted_pool.begin();
  return (static_cast<double>(below) + 1.0) / (static_cast<double>(sorted_pool.size()) + 1.0);
}

std::string_view to_string(Combiner c) {
  switch (c) {
    case Combiner::edgington: return "edgington";
    case Combiner::fisher: return "fisher";
    case Combiner::pearson: return "pearson";
    case Combiner::george: return "george";
  }
  return "edgington";
}

std::optional<Combiner> parse_combiner(std::string_view text) {
  for (auto c : {Combiner::edgington, Combiner::fisher, Combiner::pearson, Combiner::george}) {
    if (text == to_string(c)) return c;
  }
  return std::nullopt;
}

double combine_p_values(std::span<const double> ps, Combiner combiner) {
  if (ps.empty()) throw ConfigError("cannot combine an empty list of p-values");
  double acc = 0.0;
  for (double p : ps) {
    if (!(p > 0.0) || p > 1.0) throw DomainError("p-value outside (0, 1]: " + std::to_string(p));
    const double q = std::min(p, 1.0 - kPEpsilon);
    switch (combiner) {
      case Combiner::edgington: acc += p; break;
      case Combiner::fisher: acc += std::log(p); break;
      case Combiner::pearson: acc -= std::log1p(-q); break;
      case Combiner::george: acc += std::log(q) - std::log1p(-q); break;
    }
  }
  return acc;
}

PValueComposer::PValueComposer(FeatureSet features, std::vector<Orientation> orientation,
                               std::vector<std::vector<double>> pools, Combiner combiner)
    : features_(std::move(features)),
      orientation_(std::move(orientation)),
      pools_(std::move(pools)),
      combiner_(combiner) {
  if (orientation_.size() != features_.size() || pools_.size() != features_.size()) {
    throw ConfigError("composer features, orientations and pools must align");
  }
  impute_.reserve(pools_.size());
  for (std::size_t j = 0; j < pools_.size(); ++j) {
    if (pools_[j].empty()) {
      throw PoolError("reference pool for '" + features_.names[j] + "' is empty");
    }
    if (!std::is_sorted(pools_[j].begin(), pools_[j].end())) {
      throw ConfigError("reference pool for '" + features_.names[j] + "' is not sorted");
    }
    impute_.push_back(*median(pools_[j]));
  }
}

PValueComposer PValueComposer::fit(std::span<const FeatureRow> reference_rows,
                                   const FeatureSet& features, const OrientationTable& table,
                                   Combiner combiner) {
  if (features.size() == 0) throw ConfigError("composer needs at least one feature");
  std::vector<Orientation> orientation;
  std::vector<std::vector<double>> pools(features.size());
  for (std::size_t j = 0; j < features.size(); ++j) {
    orientation.push_back(table.at(features.groups[j]));
    const double sign = orientation.back() == Orientation::smaller_is_member ? 1.0 : -1.0;
    for (const auto& row : reference_rows) {
      if (row[j]) pools[j].push_back(sign * *row[j]);
    }
    std::sort(pools[j].begin(), pools[j].end());
  }
  return PValueComposer(features, std::move(orientation), std::move(pools), combiner);
}

std::vector<double> PValueComposer::p_values(std::span<const std::optional<double>> row) const {
  if (!fitted()) throw StateError("p-value composer is not fitted");
  if (row.size() != features_.size()) throw ConfigError("row does not match composer features");
  std::vector<double> ps(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double sign = orientation_[j] == Orientation::smaller_is_member ? 1.0 : -1.0;
    const double v = row[j] ? sign * *row[j] : impute_[j];
    ps[j] = empirical_p_value(pools_[j], v);
  }
  return ps;
}

// ---------------------------------------------------------------------------
// Group PCA

std::size_t GroupPCA::output_dim() const {
  std::size_t d = 0;
  for (const auto& g : groups) d += static_cast<std::size_t>(g.directions.cols());
  return d;
}

Eigen::MatrixXd GroupPCA::transform(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(output_dim()));
  Eigen::Index col = 0;
  for (const auto& g : groups) {
    Eigen::MatrixXd z(x.rows(), static_cast<Eigen::Index>(g.columns.size()));
    for (std::size_t k = 0; k < g.columns.size(); ++k) {
      z.col(static_cast<Eigen::Index>(k)) =
          (x.col(static_cast<Eigen::Index>(g.columns[k])).array() - g.mean[k]) / g.scale[k];
    }
    out.middleCols(col, g.directions.cols()) = z * g.directions;
    col += g.directions.cols();
  }
  return out;
}

FeatureSet GroupPCA::outputs() const {
  FeatureSet fs;
  for (const auto& g : groups) {
    for (Eigen::Index k = 0; k < g.directions.cols(); ++k) {
      fs.names.push_back(g.name + "_pc" + std::to_string(k + 1));
      fs.groups.push_back(g.name);
    }
  }
  return fs;
}

double captured_variance(const PcaGroup& group, std::size_t c) {
  const double total = std::accumulate(group.eigenvalues.begin(), group.eigenvalues.end(), 0.0);
  if (!(total > 0.0)) return 0.0;
  c = std::min(c, group.eigenvalues.size());
  const double top = std::accumulate(group.eigenvalues.begin(),
                                     group.eigenvalues.begin() + static_cast<std::ptrdiff_t>(c), 0.0);
  return top / total;
}

namespace {

void column_stats(const Eigen::VectorXd& col, double& mean, double& sd) {
  const double n = static_cast<double>(col.size());
  mean = col.mean();
  sd = n > 1 ? std::sqrt((col.array() - mean).square().sum() / (n - 1.0)) : 0.0;
}

bool has_variance(double mean, double sd) {
  return sd > 1e-12 * std::max(1.0, std::fabs(mean));
}

}  // namespace

GroupPCA fit_group_pca(const Eigen::MatrixXd& x, const FeatureSet& features, std::size_t c) {
  if (c == 0) throw ConfigError("group PCA needs at least one component");
  if (x.rows() < 2) throw TrainError("group PCA needs at least 2 records");
  if (static_cast<std::size_t>(x.cols()) != features.size()) {
    throw ConfigError("feature matrix width does not match the feature set");
  }

  GroupPCA pca;
  for (std::size_t j = 0; j < features.size(); ++j) {
    auto it = std::find_if(pca.groups.begin(), pca.groups.end(),
                           [&](const PcaGroup& g) { return g.name == features.groups[j]; });
    if (it == pca.groups.end()) {
      pca.groups.push_back({features.groups[j], {}, {}, {}, {}, {}});
      it = std::prev(pca.groups.end());
    }
    it->columns.push_back(j);
  }

  const double denom = static_cast<double>(x.rows() - 1);
  for (auto& g : pca.groups) {
    const std::size_t k = g.columns.size();
    if (c > k) {
      throw ConfigError("group '" + g.name + "' has " + std::to_string(k) + " features, fewer than " +
                        std::to_string(c) + " components");
    }
    Eigen::MatrixXd z(x.rows(), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
      double mean = 0.0;
      double sd = 0.0;
      column_stats(x.col(static_cast<Eigen::Index>(g.columns[i])), mean, sd);
      if (!has_variance(mean, sd)) sd = 1.0;
      g.mean.push_back(mean);
      g.scale.push_back(sd);
      z.col(static_cast<Eigen::Index>(i)) =
          (x.col(static_cast<Eigen::Index>(g.columns[i])).array() - mean) / sd;
    }
    const Eigen::MatrixXd cov = (z.transpose() * z) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericalError("eigendecomposition failed for '" + g.name + "'");

    // Eigen returns ascending order.
    const Eigen::VectorXd values = solver.eigenvalues();
    const Eigen::MatrixXd vectors = solver.eigenvectors();
    for (Eigen::Index i = values.size(); i-- > 0;) g.eigenvalues.push_back(std::max(0.0, values(i)));
    g.directions.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c));
    for (std::size_t comp = 0; comp < c; ++comp) {
      Eigen::VectorXd v = vectors.col(values.size() - 1 - static_cast<Eigen::Index>(comp));
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::fabs(v(i)) > 1e-12) {
          if (v(i) < 0) v = -v;
          break;
        }
      }
      g.directions.col(static_cast<Eigen::Index>(comp)) = v;
    }
  }
  return pca;
}

// ---------------------------------------------------------------------------
// Logistic regression

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double lr_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                    double b, double ridge) {
  const Eigen::VectorXd z = (x * w).array() + b;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double zi = z(i);
    const double softplus = std::max(zi, 0.0) + std::log1p(std::exp(-std::fabs(zi)));
    acc += softplus - y(i) * zi;
  }
  return acc / static_cast<double>(z.size()) + 0.5 * ridge * w.squaredNorm();
}

void lr_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                 double b, double ridge, Eigen::VectorXd& grad_w, double& grad_b) {
  const Eigen::VectorXd z = (x * w).array() + b;
  Eigen::VectorXd residual(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) residual(i) = sigmoid(z(i)) - y(i);
  const double n = static_cast<double>(z.size());
  grad_w = x.transpose() * residual / n + ridge * w;
  grad_b = residual.sum() / n;
}

LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LROptions& options) {
  if (x.rows() != y.size()) throw ConfigError("label count does not match row count");
  if (!(options.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (options.ridge < 0.0) throw ConfigError("ridge penalty must be non-negative");

  LogisticFit fit;
  fit.weights = Eigen::VectorXd::Zero(x.cols());
  fit.loss_history.reserve(options.epochs + 1);
  Eigen::VectorXd grad_w;
  double grad_b = 0.0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    fit.loss_history.push_back(lr_objective(x, y, fit.weights, fit.bias, options.ridge));
    lr_gradient(x, y, fit.weights, fit.bias, options.ridge, grad_w, grad_b);
    if (!grad_w.allFinite() || !std::isfinite(grad_b)) {
      throw NumericalError("non-finite gradient at epoch " + std::to_string(epoch));
    }
    fit.weights -= options.learning_rate * grad_w;
    fit.bias -= options.learning_rate * grad_b;
  }
  fit.loss_history.push_back(lr_objective(x, y, fit.weights, fit.bias, options.ridge));
  return fit;
}

namespace {

Eigen::RowVectorXd raw_row(const LRModel& model, std::span<const std::optional<double>> row) {
  if (row.size() != model.features.size()) throw ConfigError("row does not match model features");
  Eigen::RowVectorXd x(static_cast<Eigen::Index>(row.size()));
  for (std::size_t j = 0; j < row.size(); ++j) {
    x(static_cast<Eigen::Index>(j)) = row[j] ? *row[j] : model.impute[j];
  }
  return x;
}

}  // namespace

LRModel fit_lr(std::span<const FeatureRow> rows, std::span<const Label> labels,
               const FeatureSet& features, const LROptions& options) {
  if (rows.size() != labels.size()) throw ConfigError("label count does not match row count");
  if (features.size() == 0) throw TrainError("logistic regression needs at least one feature");

  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd y(n);
  std::size_t members = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto label = labels[static_cast<std::size_t>(i)];
    if (label == Label::unknown) throw TrainError("training records must be labelled");
    y(i) = label == Label::member ? 1.0 : 0.0;
    members += label == Label::member;
  }
  if (members == 0 || members == rows.size()) {
    throw TrainError("logistic regression needs both members and non-members");
  }

  LRModel model;
  model.features = features;
  model.options = options;
  for (std::size_t j = 0; j < features.size(); ++j) {
    std::vector<double> present;
    for (const auto& row : rows) {
      if (row[j]) present.push_back(*row[j]);
    }
    model.impute.push_back(median(std::move(present)).value_or(0.0));
  }

  Eigen::MatrixXd raw(n, static_cast<Eigen::Index>(features.size()));
  for (Eigen::Index i = 0; i < n; ++i) raw.row(i) = raw_row(model, rows[static_cast<std::size_t>(i)]);

  Eigen::MatrixXd transformed;
  FeatureSet dims;
  if (options.pca_components) {
    model.gpca = fit_group_pca(raw, features, *options.pca_components);
    transformed = model.gpca->transform(raw);
    dims = model.gpca->outputs();
  } else {
    transformed = std::move(raw);
    dims = features;
  }

  for (std::size_t j = 0; j < dims.size(); ++j) {
    double mean = 0.0;
    double sd = 0.0;
    column_stats(transformed.col(static_cast<Eigen::Index>(j)), mean, sd);
    if (!has_variance(mean, sd)) {
      model.dropped.push_back(dims.names[j]);
      continue;
    }
    model.kept.push_back(j);
    model.inputs.names.push_back(dims.names[j]);
    model.inputs.groups.push_back(dims.groups[j]);
    model.mean.push_back(mean);
    model.scale.push_back(sd);
  }
  if (model.kept.empty()) throw TrainError("every feature has zero variance on the attack set");

  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(model.kept.size()));
  for (std::size_t k = 0; k < model.kept.size(); ++k) {
    z.col(static_cast<Eigen::Index>(k)) =
        (transformed.col(static_cast<Eigen::Index>(model.kept[k])).array() - model.mean[k]) /
        model.scale[k];
  }

  auto fit = fit_logistic(z, y, options);
  model.weights.assign(fit.weights.data(), fit.weights.data() + fit.weights.size());
  model.bias = fit.bias;
  model.training_loss = std::move(fit.loss_history);
  model.fitted = true;
  return model;
}

Eigen::VectorXd lr_inputs(const LRModel& model, std::span<const std::optional<double>> row) {
  if (!model.fitted) throw StateError("logistic regression model is not fitted");
  const Eigen::RowVectorXd raw = raw_row(model, row);
  const Eigen::RowVectorXd transformed = model.gpca ? Eigen::RowVectorXd(model.gpca->transform(raw)) : raw;
  Eigen::VectorXd z(static_cast<Eigen::Index>(model.kept.size()));
  for (std::size_t k = 0; k < model.kept.size(); ++k) {
    z(static_cast<Eigen::Index>(k)) =
        (transformed(static_cast<Eigen::Index>(model.kept[k])) - model.mean[k]) / model.scale[k];
  }
  return z;
}

// ---------------------------------------------------------------------------

double score(const PValueComposer& model, std::span<const std::optional<double>> row) {
  const auto ps = model.p_values(row);
  return -combine_p_values(ps, model.combiner());
}

double score(const LRModel& model, std::span<const std::optional<double>> row) {
  const Eigen::VectorXd z = lr_inputs(model, row);
  const Eigen::Map<const Eigen::VectorXd> w(model.weights.data(),
                                            static_cast<Eigen::Index>(model.weights.size()));
  return sigmoid(w.dot(z) + model.bias);
}

double score(const AttackModel& model, std::span<const std::optional<double>> row) {
  return std::visit([&](const auto& m) { return score(m, row); }, model);
}

const FeatureSet& model_features(const AttackModel& model) {
  return std::visit(
      [](const auto& m) -> const FeatureSet& {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, PValueComposer>) {
          return m.features();
        } else {
          return m.features;
        }
      },
      model);
}

}  // namespace mia::composition
