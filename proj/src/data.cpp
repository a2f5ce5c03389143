#include "hmoe/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "hmoe/errors.hpp"
#include "hmoe/rng.hpp"

namespace hmoe {

Tensor Dataset::regression_targets() const {
  if (task != TaskKind::Regression) throw ContractError("dataset holds no regression targets");
  Tensor t({static_cast<int>(y_reg.size()), 1});
  for (size_t i = 0; i < y_reg.size(); ++i) t[static_cast<std::int64_t>(i)] = y_reg[i];
  return t;
}

Dataset subset(const Dataset& data, const std::vector<int>& indices) {
  Dataset out;
  out.task = data.task;
  out.num_classes = data.num_classes;
  out.num_domains = data.num_domains;
  if (indices.empty()) return out;
  const int dim = data.x.cols();
  out.x = Tensor({static_cast<int>(indices.size()), dim});
  for (size_t r = 0; r < indices.size(); ++r) {
    const int src = indices[r];
    for (int c = 0; c < dim; ++c) out.x.at(static_cast<int>(r), c) = data.x.at(src, c);
    if (!data.y_reg.empty()) out.y_reg.push_back(data.y_reg[static_cast<size_t>(src)]);
    if (!data.y_cls.empty()) out.y_cls.push_back(data.y_cls[static_cast<size_t>(src)]);
    if (!data.domain.empty()) out.domain.push_back(data.domain[static_cast<size_t>(src)]);
  }
  return out;
}

Dataset gen_toy_regression(std::uint64_t seed) {
  Rng rng(seed, "data");
  const double lo[3] = {0.0, 1.0, 2.0};
  const int counts[3] = {10, 20, 30};
  Dataset ds;
  ds.task = TaskKind::Regression;
  ds.num_domains = 3;
  const int n = counts[0] + counts[1] + counts[2];
  ds.x = Tensor({n, 1});
  int row = 0;
  for (int interval = 0; interval < 3; ++interval) {
    for (int i = 0; i < counts[interval]; ++i, ++row) {
      const double x = rng.uniform(lo[interval], lo[interval] + 0.5);
      ds.x.at(row, 0) = x;
      ds.y_reg.push_back(std::sin(4.0 * M_PI * x));
      ds.domain.push_back(interval);
    }
  }
  return ds;
}

Dataset gen_synthetic_domains(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.domains < 1 || spec.classes < 1 || spec.n_per < 1)
    throw ConfigError("synthetic dataset counts must be at least 1");
  if (spec.separation <= 0.0) throw ConfigError("synthetic separation must be positive");
  if (spec.dim < 2) throw ConfigError("synthetic input dimension must be at least 2");
  Rng rng(seed, "data");

  // Fixed random lift from the 2-D layout into the input space, scaled to
  // keep the lifted norm near the planar norm.
  std::vector<double> lift(static_cast<size_t>(2 * spec.dim));
  for (double& v : lift) v = rng.normal();
  const double lift_scale = std::sqrt(2.0 / spec.dim);
  for (int j = 0; j < spec.dim; ++j) {
    const double norm = std::hypot(lift[static_cast<size_t>(j)], lift[static_cast<size_t>(spec.dim + j)]);
    lift[static_cast<size_t>(j)] *= lift_scale / norm;
    lift[static_cast<size_t>(spec.dim + j)] *= lift_scale / norm;
  }

  // Domain centers on a circle; each domain rotates the shared class
  // constellation by d * pi / M. The separation factor shrinks the class
  // constellation and its blob noise relative to the fixed domain
  // spacing, so larger separation makes the domain structure dominate.
  const double domain_radius = 3.0;
  const double class_radius = domain_radius / spec.separation;
  const double sigma = class_radius / 4.0;

  Dataset ds;
  ds.task = TaskKind::Classification;
  ds.num_classes = spec.classes;
  ds.num_domains = spec.domains;
  const int n = spec.domains * spec.classes * spec.n_per;
  ds.x = Tensor({n, spec.dim});
  int row = 0;
  for (int d = 0; d < spec.domains; ++d) {
    const double domain_angle = 2.0 * M_PI * d / spec.domains;
    const double cx = domain_radius * std::cos(domain_angle);
    const double cy = domain_radius * std::sin(domain_angle);
    const double rot = M_PI * d / spec.domains;
    const double cr = std::cos(rot), sr = std::sin(rot);
    for (int c = 0; c < spec.classes; ++c) {
      const double class_angle = 2.0 * M_PI * c / spec.classes;
      const double bx = class_radius * std::cos(class_angle);
      const double by = class_radius * std::sin(class_angle);
      for (int i = 0; i < spec.n_per; ++i, ++row) {
        const double px = bx + sigma * rng.normal();
        const double py = by + sigma * rng.normal();
        const double gx = cx + cr * px - sr * py;
        const double gy = cy + sr * px + cr * py;
        for (int j = 0; j < spec.dim; ++j)
          ds.x.at(row, j) = gx * lift[static_cast<size_t>(j)] + gy * lift[static_cast<size_t>(spec.dim + j)];
        ds.y_cls.push_back(c);
        ds.domain.push_back(d);
      }
    }
  }
  return ds;
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& data, const SplitSpec& spec) {
  if (data.size() == 0) throw DataError("cannot split an empty dataset");
  if (spec.train_fraction <= 0.0 || spec.train_fraction > 1.0)
    throw ConfigError("train_fraction must lie in (0, 1]");
  Rng rng(spec.seed, "split");

  std::map<int, std::vector<int>> by_domain;
  for (int i = 0; i < data.size(); ++i)
    by_domain[data.domain.empty() ? 0 : data.domain[static_cast<size_t>(i)]].push_back(i);

  std::vector<int> train_idx, val_idx;
  for (auto& [d, idx] : by_domain) {
    rng.shuffle(idx);
    const int n_train = static_cast<int>(spec.train_fraction * static_cast<double>(idx.size()));
    std::vector<int> head(idx.begin(), idx.begin() + n_train);
    std::vector<int> tail(idx.begin() + n_train, idx.end());
    std::sort(head.begin(), head.end());
    std::sort(tail.begin(), tail.end());
    train_idx.insert(train_idx.end(), head.begin(), head.end());
    val_idx.insert(val_idx.end(), tail.begin(), tail.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  return {subset(data, train_idx), subset(data, val_idx)};
}

void save_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open dataset file for writing: " + path);
  const int dim = data.dim();
  for (int j = 0; j < dim; ++j) os << "x_" << j << ',';
  os << "y,d\n";
  char buf[40];
  for (int i = 0; i < data.size(); ++i) {
    for (int j = 0; j < dim; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.x.at(i, j));
      os << buf << ',';
    }
    if (data.task == TaskKind::Regression) {
      std::snprintf(buf, sizeof buf, "%.17g", data.y_reg[static_cast<size_t>(i)]);
      os << buf;
    } else {
      os << data.y_cls[static_cast<size_t>(i)];
    }
    os << ',' << (data.domain.empty() ? 0 : data.domain[static_cast<size_t>(i)]) << '\n';
  }
  if (!os) throw IoError("failed writing dataset file: " + path);
}

Dataset load_dataset_csv(const std::string& path, TaskKind task) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw DataError("dataset file is empty: " + path);

  std::vector<std::string> header;
  {
    std::istringstream in(line);
    std::string cell;
    while (std::getline(in, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header[header.size() - 2] != "y")
    throw DataError("dataset header must end with y,d or y");
  const bool has_domain = header.back() == "d";
  const int dim = static_cast<int>(header.size()) - (has_domain ? 2 : 1);
  if (dim < 1) throw DataError("dataset has no feature columns");

  std::vector<double> xs;
  Dataset ds;
  ds.task = task;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream in(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != static_cast<int>(header.size()))
      throw DataError("dataset row width does not match the header");
    for (int j = 0; j < dim; ++j) xs.push_back(std::strtod(cells[static_cast<size_t>(j)].c_str(), nullptr));
    const std::string& y = cells[static_cast<size_t>(dim)];
    if (task == TaskKind::Regression) {
      ds.y_reg.push_back(std::strtod(y.c_str(), nullptr));
    } else {
      const int cls = std::atoi(y.c_str());
      if (cls < 0) throw DataError("negative class index in dataset");
      ds.y_cls.push_back(cls);
      ds.num_classes = std::max(ds.num_classes, cls + 1);
    }
    if (has_domain) {
      const int d = std::atoi(cells.back().c_str());
      if (d < 0) throw DataError("negative domain index in dataset");
      ds.domain.push_back(d);
      ds.num_domains = std::max(ds.num_domains, d + 1);
    }
  }
  const int n = ds.size();
  if (n > 0) ds.x = Tensor({n, dim}, std::move(xs));
  return ds;
}

}  // namespace hmoe
