#include "dnas/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dnas {

namespace {

constexpr double kPi = 3.14159265358979323846;

void standardize(Tensor& X) {
  int n = X.rows(), d = X.cols();
  for (int c = 0; c < d; ++c) {
    double mu = 0;
    for (int r = 0; r < n; ++r) mu += X.at(r, c);
    mu /= n;
    double var = 0;
    for (int r = 0; r < n; ++r) {
      double t = X.at(r, c) - mu;
      var += t * t;
    }
    var /= n;
    double sd = std::sqrt(std::max(var, 1e-12));
    for (int r = 0; r < n; ++r) X.at(r, c) = (X.at(r, c) - mu) / sd;
  }
}

Dataset make_moons(const DatasetSpec& spec, Rng& rng) {
  if (spec.classes != 2) throw std::runtime_error("moons: exactly two classes");
  int n0 = (spec.size + 1) / 2, n1 = spec.size - n0;
  Dataset d;
  d.classes = 2;
  d.X = Tensor({spec.size, 2});
  int row = 0;
  for (int i = 0; i < n0; ++i, ++row) {
    double t = kPi * i / std::max(1, n0 - 1);
    d.X.at(row, 0) = std::cos(t) + rng.normal(0, spec.noise);
    d.X.at(row, 1) = std::sin(t) + rng.normal(0, spec.noise);
    d.y.push_back(0);
  }
  for (int i = 0; i < n1; ++i, ++row) {
    double t = kPi * i / std::max(1, n1 - 1);
    d.X.at(row, 0) = 1.0 - std::cos(t) + rng.normal(0, spec.noise);
    d.X.at(row, 1) = 0.5 - std::sin(t) + rng.normal(0, spec.noise);
    d.y.push_back(1);
  }
  return d;
}

Dataset make_blobs(const DatasetSpec& spec, Rng& rng) {
  Dataset d;
  d.classes = spec.classes;
  d.X = Tensor({spec.size, 2});
  int row = 0;
  for (int c = 0; c < spec.classes; ++c) {
    int quota = spec.size / spec.classes + (c < spec.size % spec.classes ? 1 : 0);
    double angle = 2.0 * kPi * c / spec.classes;
    double cx = 4.0 * std::cos(angle), cy = 4.0 * std::sin(angle);
    for (int i = 0; i < quota; ++i, ++row) {
      d.X.at(row, 0) = cx + rng.normal(0, spec.noise);
      d.X.at(row, 1) = cy + rng.normal(0, spec.noise);
      d.y.push_back(c);
    }
  }
  return d;
}

Dataset make_spirals(const DatasetSpec& spec, Rng& rng) {
  Dataset d;
  d.classes = spec.classes;
  d.X = Tensor({spec.size, 2});
  int row = 0;
  for (int c = 0; c < spec.classes; ++c) {
    int quota = spec.size / spec.classes + (c < spec.size % spec.classes ? 1 : 0);
    double offset = 2.0 * kPi * c / spec.classes;
    for (int i = 0; i < quota; ++i, ++row) {
      double t = static_cast<double>(i) / std::max(1, quota - 1);
      double radius = 0.2 + 2.3 * t;
      double angle = offset + 1.75 * 2.0 * kPi * t;
      d.X.at(row, 0) = radius * std::cos(angle) + rng.normal(0, spec.noise);
      d.X.at(row, 1) = radius * std::sin(angle) + rng.normal(0, spec.noise);
      d.y.push_back(c);
    }
  }
  return d;
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec) {
  if (spec.size < 4) throw std::runtime_error("dataset: need at least 4 samples");
  if (spec.classes < 2) throw std::runtime_error("dataset: need at least 2 classes");
  if (spec.noise < 0) throw std::runtime_error("dataset: negative noise");
  Rng rng(spec.seed);
  Dataset d;
  if (spec.kind == "moons")
    d = make_moons(spec, rng);
  else if (spec.kind == "blobs")
    d = make_blobs(spec, rng);
  else if (spec.kind == "spirals")
    d = make_spirals(spec, rng);
  else
    throw std::runtime_error("dataset: unknown kind '" + spec.kind + "'");
  standardize(d.X);
  check_finite(d.X, "generate_dataset");
  return d;
}

Dataset subset(const Dataset& d, const std::vector<int>& idx) {
  Dataset out;
  out.classes = d.classes;
  out.X = Tensor({static_cast<int>(idx.size()), d.X.cols()});
  for (size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= d.size()) throw std::runtime_error("subset: index out of range");
    for (int c = 0; c < d.X.cols(); ++c) out.X.at(static_cast<int>(r), c) = d.X.at(idx[r], c);
    out.y.push_back(d.y[idx[r]]);
  }
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double test_fraction,
                                             uint64_t seed) {
  if (test_fraction < 0 || test_fraction >= 1)
    throw std::runtime_error("train_test_split: fraction must be in [0, 1)");
  std::vector<int> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  int n_test = static_cast<int>(d.size() * test_fraction);
  std::vector<int> test(idx.begin(), idx.begin() + n_test);
  std::vector<int> rest(idx.begin() + n_test, idx.end());
  return {subset(d, rest), subset(d, test)};
}

SplitIdx split_dataset(int n, const SchedulerConfig& sched, uint64_t seed) {
  sched.validate();
  long ratio = sched.step_ratio();
  long den = ratio + 1;
  if (n < den) throw std::runtime_error("split_dataset: dataset too small for this schedule");
  long n_train = static_cast<long>(n) * ratio / den;
  if (n_train < 1 || n_train >= n)
    throw std::runtime_error("split_dataset: degenerate split");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  SplitIdx out;
  out.train.assign(idx.begin(), idx.begin() + n_train);
  out.valid.assign(idx.begin() + n_train, idx.end());
  return out;
}

}  // namespace dnas
