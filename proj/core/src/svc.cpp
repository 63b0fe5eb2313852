#include "speccompact/svc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <nlohmann/json.hpp>

#include "speccompact/error.hpp"

namespace speccompact {

namespace {

constexpr double kTau = 1e-12;
// Above this many instances kernel rows are recomputed on demand instead of
// materializing the full n x n matrix (4096^2 doubles = 128 MiB).
constexpr std::size_t kDenseKernelLimit = 4096;

void check_dims(std::span<const double> x, std::span<const double> z) {
  if (x.size() != z.size()) {
    throw Error(ErrorCode::DimensionMismatch, "vectors of dimension " + std::to_string(x.size()) +
                                                  " and " + std::to_string(z.size()));
  }
}

double eval_unchecked(const KernelSpec& k, std::span<const double> x, std::span<const double> z) {
  double acc = 0.0;
  if (k.kind == KernelKind::Linear) {
    for (std::size_t d = 0; d < x.size(); ++d) acc += x[d] * z[d];
    return acc;
  }
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double diff = x[d] - z[d];
    acc += diff * diff;
  }
  return std::exp(-*k.gamma * acc);
}

// Unset RBF width resolves to 1 / (dim * Var(X)), the variance taken over
// every feature value; constant features fall back to 1 / dim.
KernelSpec resolve(const KernelSpec& k, const FeatureMatrix& x) {
  KernelSpec out = k;
  if (out.kind != KernelKind::Rbf || out.gamma) return out;
  const auto values = x.values();
  const double dim = static_cast<double>(std::max<std::size_t>(x.dim(), 1));
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(std::max<std::size_t>(values.size(), 1));
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(std::max<std::size_t>(values.size(), 1));
  out.gamma = var > 0.0 ? 1.0 / (dim * var) : 1.0 / dim;
  return out;
}

// Signed kernel rows Q_i[t] = y_i y_t K(x_i, x_t).
class QRows {
 public:
  QRows(const FeatureMatrix& x, std::span<const int> y, const KernelSpec& k)
      : x_(x), y_(y), k_(k), n_(x.rows()), dense_(n_ <= kDenseKernelLimit) {
    diag_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) diag_[i] = eval_unchecked(k_, x_.row(i), x_.row(i));
    if (dense_) {
      matrix_.resize(n_ * n_);
      for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t t = i; t < n_; ++t) {
          const double q = y_[i] * y_[t] * eval_unchecked(k_, x_.row(i), x_.row(t));
          matrix_[i * n_ + t] = q;
          matrix_[t * n_ + i] = q;
        }
      }
    } else {
      scratch_[0].resize(n_);
      scratch_[1].resize(n_);
    }
  }

  // `slot` selects one of two scratch buffers so rows i and j can be live at once.
  const double* row(std::size_t i, int slot) {
    if (dense_) return matrix_.data() + i * n_;
    auto& buf = scratch_[slot];
    for (std::size_t t = 0; t < n_; ++t) {
      buf[t] = y_[i] * y_[t] * eval_unchecked(k_, x_.row(i), x_.row(t));
    }
    return buf.data();
  }

  double diag(std::size_t i) const { return diag_[i]; }

 private:
  const FeatureMatrix& x_;
  std::span<const int> y_;
  KernelSpec k_;
  std::size_t n_;
  bool dense_;
  std::vector<double> diag_;
  std::vector<double> matrix_;
  std::vector<double> scratch_[2];
};

std::vector<int> signs_of(std::span<const Label> labels) {
  std::vector<int> y(labels.size());
  std::transform(labels.begin(), labels.end(), y.begin(), [](Label l) { return to_sign(l); });
  return y;
}

void check_training_input(const FeatureMatrix& x, std::span<const Label> labels) {
  if (x.rows() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(x.rows()) + " feature rows but " +
                                               std::to_string(labels.size()) + " labels");
  }
  if (x.dim() == 0) throw Error(ErrorCode::DimensionMismatch, "feature dimension is zero");
  if (x.rows() < 2) throw Error(ErrorCode::DegenerateLabels, "need at least two training points");
  const auto pos = std::count(labels.begin(), labels.end(), Label::Pass);
  if (pos == 0 || static_cast<std::size_t>(pos) == labels.size()) {
    throw Error(ErrorCode::DegenerateLabels, "training labels contain a single class");
  }
}

}  // namespace

void validate(const Hyperparams& hp) {
  if (!(hp.c > 0.0)) throw Error(ErrorCode::InvalidConfig, "c must be positive");
  if (!(hp.kkt_tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "kkt_tol must be positive");
  if (!(hp.epsilon >= 0.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must be nonnegative");
  if (hp.max_passes == 0) throw Error(ErrorCode::InvalidConfig, "max_passes must be positive");
  if (hp.kernel.kind == KernelKind::Rbf && hp.kernel.gamma && !(*hp.kernel.gamma > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "rbf gamma must be positive");
  }
}

double kernel_eval(const KernelSpec& k, std::span<const double> x, std::span<const double> z) {
  check_dims(x, z);
  if (k.kind == KernelKind::Rbf && !(k.gamma && *k.gamma > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "rbf kernel needs a positive gamma");
  }
  return eval_unchecked(k, x, z);
}

SolverState solve_dual(const FeatureMatrix& features, std::span<const Label> labels,
                       const Hyperparams& hp) {
  validate(hp);
  check_training_input(features, labels);

  const std::size_t n = features.rows();
  const double c = hp.c;
  const auto y = signs_of(labels);
  SolverState st;
  st.kernel = resolve(hp.kernel, features);
  QRows q(features, y, st.kernel);

  std::vector<double>& alpha = st.alphas;
  alpha.assign(n, 0.0);
  // Gradient of 1/2 a'Qa - e'a.
  std::vector<double> grad(n, -1.0);

  const std::size_t max_iter = hp.max_passes * n;
  auto up = [&](std::size_t t) { return y[t] > 0 ? alpha[t] < c : alpha[t] > 0.0; };
  auto low = [&](std::size_t t) { return y[t] > 0 ? alpha[t] > 0.0 : alpha[t] < c; };

  std::size_t iter = 0;
  for (;; ++iter) {
    // -y_t G_t = b - E_t, so the maximal violator in I_up has the smallest
    // error E_i, and the partner in I_low with the largest E_j maximizes
    // |E_i - E_j| over violating pairs.
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    st.kkt_gap = (i == n || j == n) ? 0.0 : gmax - gmin;
    if (i == n || j == n || st.kkt_gap < hp.kkt_tol) {
      st.converged = true;
      break;
    }
    if (iter >= max_iter) {
      st.converged = false;
      break;
    }

    const double* qi = q.row(i, 0);
    const double* qj = q.row(j, 1);
    const double old_ai = alpha[i];
    const double old_aj = alpha[j];

    if (y[i] != y[j]) {
      double quad = q.diag(i) + q.diag(j) + 2.0 * qi[j];
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = q.diag(i) + q.diag(j) - 2.0 * qi[j];
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }

    const double dai = alpha[i] - old_ai;
    const double daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) grad[t] += qi[t] * dai + qj[t] * daj;
  }
  st.iterations = iter;

  // rho = mean of y_t G_t over free vectors; midpoint of the feasible
  // interval when every alpha sits at a bound.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  st.bias = -rho;

  st.slacks.resize(n);
  double objective = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    // (Q a)_t = G_t + 1 and f(x_t) = y_t (Q a)_t + b.
    const double f = y[t] * (grad[t] + 1.0) + st.bias;
    st.slacks[t] = std::max(0.0, 1.0 - y[t] * f);
    objective += alpha[t] * (1.0 - grad[t]);
  }
  st.objective = 0.5 * objective;
  return st;
}

SvcModel train_svc(const FeatureMatrix& features, std::span<const Label> labels,
                   const Hyperparams& hp, std::uint64_t seed) {
  const SolverState st = solve_dual(features, labels, hp);
  SvcModel m;
  m.kernel = st.kernel;
  m.bias = st.bias;
  m.support_vectors = FeatureMatrix(features.dim());
  for (std::size_t t = 0; t < features.rows(); ++t) {
    if (st.alphas[t] > 0.0) {
      m.support_vectors.push_back(features.row(t));
      m.coefficients.push_back(st.alphas[t] * to_sign(labels[t]));
    }
  }
  m.meta.hyperparams = hp;
  m.meta.hyperparams.kernel = st.kernel;
  m.meta.n_train = features.rows();
  m.meta.n_positive = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::Pass));
  m.meta.dim = features.dim();
  m.meta.seed = seed;
  m.meta.iterations = st.iterations;
  m.meta.converged = st.converged;
  return m;
}

double decision_value(const SvcModel& m, std::span<const double> x) {
  if (x.size() != m.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "model expects dimension " + std::to_string(m.dim()) +
                                                  ", got " + std::to_string(x.size()));
  }
  double f = m.bias;
  for (std::size_t k = 0; k < m.coefficients.size(); ++k) {
    f += m.coefficients[k] * eval_unchecked(m.kernel, m.support_vectors.row(k), x);
  }
  return f;
}

Label predict(const SvcModel& m, std::span<const double> x) {
  return decision_value(m, x) >= 0.0 ? Label::Pass : Label::Fail;
}

double model_error(const SvcModel& m, std::span<const double> x, Label y) {
  return static_cast<double>(to_sign(y)) - decision_value(m, x);
}

double dual_objective(const FeatureMatrix& features, std::span<const Label> labels,
                      const KernelSpec& kernel, std::span<const double> alphas) {
  const auto k = resolve(kernel, features);
  const std::size_t n = features.rows();
  double linear = 0.0, quad = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    linear += alphas[a];
    for (std::size_t b = 0; b < n; ++b) {
      quad += alphas[a] * alphas[b] * to_sign(labels[a]) * to_sign(labels[b]) *
              eval_unchecked(k, features.row(a), features.row(b));
    }
  }
  return linear - 0.5 * quad;
}

void to_json(nlohmann::json& j, const Hyperparams& hp) {
  j = {{"kernel", hp.kernel.kind == KernelKind::Linear ? "linear" : "rbf"},
       {"c", hp.c},
       {"epsilon", hp.epsilon},
       {"kkt_tol", hp.kkt_tol},
       {"max_passes", hp.max_passes}};
  if (hp.kernel.gamma) j["gamma"] = *hp.kernel.gamma;
}

void from_json(const nlohmann::json& j, Hyperparams& hp) {
  hp = Hyperparams{};
  const auto kind = j.value("kernel", std::string("rbf"));
  if (kind == "linear") hp.kernel = KernelSpec::linear();
  else if (kind == "rbf") hp.kernel = KernelSpec::rbf();
  else throw Error(ErrorCode::InvalidConfig, "unknown kernel '" + kind + "'");
  if (j.contains("gamma") && !j["gamma"].is_null()) hp.kernel.gamma = j["gamma"].get<double>();
  hp.c = j.value("c", hp.c);
  hp.epsilon = j.value("epsilon", hp.epsilon);
  hp.kkt_tol = j.value("kkt_tol", hp.kkt_tol);
  hp.max_passes = j.value("max_passes", hp.max_passes);
  validate(hp);
}

void to_json(nlohmann::json& j, const SvcModel& m) {
  nlohmann::json svs = nlohmann::json::array();
  for (std::size_t k = 0; k < m.support_vectors.rows(); ++k) {
    const auto row = m.support_vectors.row(k);
    svs.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j = {{"kernel", m.kernel.kind == KernelKind::Linear ? "linear" : "rbf"},
       {"gamma", m.kernel.gamma ? nlohmann::json(*m.kernel.gamma) : nlohmann::json(nullptr)},
       {"c", m.meta.hyperparams.c},
       {"bias", m.bias},
       {"dim", m.dim()},
       {"support_vectors", std::move(svs)},
       {"coefficients", m.coefficients},
       {"meta",
        {{"hyperparams", m.meta.hyperparams},
         {"n_train", m.meta.n_train},
         {"n_positive", m.meta.n_positive},
         {"seed", m.meta.seed},
         {"iterations", m.meta.iterations},
         {"converged", m.meta.converged}}}};
}

void from_json(const nlohmann::json& j, SvcModel& m) {
  try {
    m = SvcModel{};
    const auto kind = j.at("kernel").get<std::string>();
    if (kind == "linear") m.kernel = KernelSpec::linear();
    else if (kind == "rbf") m.kernel = KernelSpec::rbf(j.at("gamma").get<double>());
    else throw Error(ErrorCode::ParseError, "unknown kernel '" + kind + "'");
    m.bias = j.at("bias").get<double>();
    m.coefficients = j.at("coefficients").get<std::vector<double>>();
    const auto& svs = j.at("support_vectors");
    const std::size_t dim = j.contains("dim") ? j["dim"].get<std::size_t>()
                            : svs.empty()     ? 0
                                              : svs.front().size();
    m.support_vectors = FeatureMatrix(dim);
    for (const auto& sv : svs) m.support_vectors.push_back(sv.get<std::vector<double>>());
    if (m.coefficients.size() != m.support_vectors.rows()) {
      throw Error(ErrorCode::ParseError, "coefficients and support vectors differ in length");
    }
    m.meta.dim = dim;
    if (j.contains("meta")) {
      const auto& meta = j["meta"];
      m.meta.hyperparams = meta.at("hyperparams").get<Hyperparams>();
      m.meta.n_train = meta.value("n_train", std::size_t{0});
      m.meta.n_positive = meta.value("n_positive", std::size_t{0});
      m.meta.seed = meta.value("seed", std::uint64_t{0});
      m.meta.iterations = meta.value("iterations", std::size_t{0});
      m.meta.converged = meta.value("converged", true);
    } else {
      m.meta.hyperparams.c = j.value("c", m.meta.hyperparams.c);
      m.meta.hyperparams.kernel = m.kernel;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("svc model: ") + e.what());
  }
}

}  // namespace speccompact
