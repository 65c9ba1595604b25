#pragma once

// Plain CSV, numbers printed with std::to_chars so every double survives a
// write/read round trip bit for bit. No quoting: every field here is a
// number or a bare identifier.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "balms/counts.hpp"
#include "balms/dataset.hpp"
#include "balms/errors.hpp"
#include "balms/eval.hpp"
#include "balms/model.hpp"
#include "balms/train.hpp"

namespace balms::io {

inline std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  require_spec(ec == std::errc(), "fmt: double does not fit buffer");
  return std::string(buf, ptr);
}

inline std::string fmt(long v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require_spec(ec == std::errc() && ptr == s.data() + s.size(),
               "parse_double: bad field '" + std::string(s) + "'");
  return v;
}

inline long parse_long(std::string_view s) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require_spec(ec == std::errc() && ptr == s.data() + s.size(),
               "parse_long: bad field '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  require_spec(in.good(), "cannot open " + path.string());
  Table t;
  std::string line;
  require_spec(static_cast<bool>(std::getline(in, line)), "empty file " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    t.rows.push_back(split_line(line));
  }
  return t;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  require_spec(out.good(), "cannot write " + path.string());
  return out;
}

// label,f0,f1,...
inline void write_dataset(const std::filesystem::path& path, const datagen::Dataset& data) {
  data.validate();
  std::ofstream out = open_out(path);
  out << "label";
  for (int j = 0; j < data.d(); ++j) out << ",f" << j;
  out << "\n";
  for (long i = 0; i < data.n(); ++i) {
    out << data.y[i];
    for (int j = 0; j < data.d(); ++j) out << "," << fmt(data.x(i, j));
    out << "\n";
  }
}

inline datagen::Dataset read_dataset(const std::filesystem::path& path) {
  const Table t = read_table(path);
  require_spec(t.header.size() >= 2 && t.header[0] == "label",
               "dataset csv needs a label column and at least one feature");
  const long n = static_cast<long>(t.rows.size());
  require_spec(n >= 1, "dataset csv has no rows");
  const int d = static_cast<int>(t.header.size()) - 1;
  datagen::Dataset data;
  data.x.resize(n, d);
  data.y.resize(n);
  int kmax = 0;
  for (long i = 0; i < n; ++i) {
    const auto& row = t.rows[i];
    require_spec(static_cast<int>(row.size()) == d + 1, "dataset csv has a ragged row");
    data.y[i] = static_cast<int>(parse_long(row[0]));
    require_spec(data.y[i] >= 0, "dataset csv has a negative label");
    kmax = std::max(kmax, data.y[i] + 1);
    for (int j = 0; j < d; ++j) data.x(i, j) = parse_double(row[j + 1]);
  }
  std::vector<long> hist(kmax, 0);
  for (long i = 0; i < n; ++i) ++hist[data.y[i]];
  data.counts = datagen::ClassCounts{hist};
  data.validate();
  return data;
}

// class,count
inline void write_counts(const std::filesystem::path& path, const datagen::ClassCounts& counts) {
  counts.validate();
  std::ofstream out = open_out(path);
  out << "class,count\n";
  for (int j = 0; j < counts.k(); ++j) out << j << "," << counts.n[j] << "\n";
}

inline datagen::ClassCounts read_counts(const std::filesystem::path& path) {
  const Table t = read_table(path);
  require_spec(t.header == std::vector<std::string>{"class", "count"}, "counts csv header mismatch");
  std::vector<long> n(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    require_spec(t.rows[i].size() == 2, "counts csv has a ragged row");
    require_spec(parse_long(t.rows[i][0]) == static_cast<long>(i), "counts csv classes out of order");
    n[i] = parse_long(t.rows[i][1]);
  }
  datagen::ClassCounts counts{n};
  counts.validate();
  return counts;
}

// class,rate
inline void write_rates(const std::filesystem::path& path, const Vector& rates) {
  std::ofstream out = open_out(path);
  out << "class,rate\n";
  for (long j = 0; j < rates.size(); ++j) out << j << "," << fmt(rates[j]) << "\n";
}

inline Vector read_rates(const std::filesystem::path& path) {
  const Table t = read_table(path);
  require_spec(t.header == std::vector<std::string>{"class", "rate"}, "rates csv header mismatch");
  Vector rates(static_cast<long>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    require_spec(t.rows[i].size() == 2, "rates csv has a ragged row");
    rates[static_cast<long>(i)] = parse_double(t.rows[i][1]);
  }
  return rates;
}

// iter,lr,loss
inline void write_history(const std::filesystem::path& path,
                          const std::vector<train::HistoryRow>& rows) {
  std::ofstream out = open_out(path);
  out << "iter,lr,loss\n";
  for (const auto& r : rows) out << r.iter << "," << fmt(r.lr) << "," << fmt(r.loss) << "\n";
}

inline std::vector<train::HistoryRow> read_history(const std::filesystem::path& path) {
  const Table t = read_table(path);
  require_spec(t.header == std::vector<std::string>{"iter", "lr", "loss"},
               "history csv header mismatch");
  std::vector<train::HistoryRow> rows(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    require_spec(t.rows[i].size() == 3, "history csv has a ragged row");
    rows[i] = {parse_long(t.rows[i][0]), parse_double(t.rows[i][1]), parse_double(t.rows[i][2])};
  }
  return rows;
}

// iter,train_loss,meta_loss,rate_variance
inline void write_meta_history(const std::filesystem::path& path,
                               const std::vector<train::MetaHistoryRow>& rows) {
  std::ofstream out = open_out(path);
  out << "iter,train_loss,meta_loss,rate_variance\n";
  for (const auto& r : rows)
    out << r.iter << "," << fmt(r.train_loss) << "," << fmt(r.meta_loss) << ","
        << fmt(r.rate_variance) << "\n";
}

// metric,value; split metrics appear only when the split is non-empty
inline void write_report(const std::filesystem::path& path, const eval::EvalReport& rep) {
  std::ofstream out = open_out(path);
  out << "metric,value\n";
  out << "overall," << fmt(rep.overall) << "\n";
  if (rep.many) out << "many," << fmt(*rep.many) << "\n";
  if (rep.medium) out << "medium," << fmt(*rep.medium) << "\n";
  if (rep.few) out << "few," << fmt(*rep.few) << "\n";
  if (rep.p_y.size())
    out << "p_y_range," << fmt(rep.p_y.maxCoeff() - rep.p_y.minCoeff()) << "\n";
  out << "balanced_test," << (rep.balanced_test ? 1 : 0) << "\n";
}

// class,p_y
inline void write_py_marginal(const std::filesystem::path& path, const Vector& p_y) {
  std::ofstream out = open_out(path);
  out << "class,p_y\n";
  for (long j = 0; j < p_y.size(); ++j) out << j << "," << fmt(p_y[j]) << "\n";
}

// x,y,label over the probe grid
inline void write_boundary_grid(const std::filesystem::path& path,
                                const eval::BoundaryProbe& probe) {
  std::ofstream out = open_out(path);
  out << "x,y,label\n";
  for (int r = 0; r < probe.resolution; ++r)
    for (int c = 0; c < probe.resolution; ++c)
      out << fmt(probe.xs[c]) << "," << fmt(probe.ys[r]) << ","
          << probe.labels[static_cast<std::size_t>(r) * probe.resolution + c] << "\n";
}

// class_a,class_b,distance; nan distances serialized as empty fields
inline void write_pair_distances(const std::filesystem::path& path,
                                 const eval::BoundaryProbe& probe) {
  std::ofstream out = open_out(path);
  out << "class_a,class_b,distance\n";
  const int k = static_cast<int>(probe.pair_distance.rows());
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) {
      out << a << "," << b << ",";
      if (!std::isnan(probe.pair_distance(a, b))) out << fmt(probe.pair_distance(a, b));
      out << "\n";
    }
}

// name,rows,cols,v0,v1,... row-major; extractor layers first, then the head,
// then a frozen flag.
inline void write_model(const std::filesystem::path& path, const model::ModelParams& p) {
  std::ofstream out = open_out(path);
  out << "tensor,rows,cols,data\n";
  auto emit = [&](const std::string& name, const Matrix& m) {
    out << name << "," << m.rows() << "," << m.cols();
    for (long r = 0; r < m.rows(); ++r)
      for (long c = 0; c < m.cols(); ++c) out << "," << fmt(m(r, c));
    out << "\n";
  };
  for (std::size_t i = 0; i < p.extractor.size(); ++i) {
    emit("layer" + std::to_string(i) + ".w", p.extractor[i].w);
    emit("layer" + std::to_string(i) + ".b", p.extractor[i].b.transpose());
  }
  emit("head.w", p.w);
  emit("head.b", p.b.transpose());
  out << "frozen,1,1," << (p.frozen_extractor ? 1 : 0) << "\n";
}

inline model::ModelParams read_model(const std::filesystem::path& path) {
  const Table t = read_table(path);
  require_spec(t.header.size() == 4 && t.header[0] == "tensor", "model csv header mismatch");
  model::ModelParams p;
  bool saw_head_w = false, saw_head_b = false;
  for (const auto& row : t.rows) {
    require_spec(row.size() >= 4, "model csv has a short row");
    const std::string& name = row[0];
    const long rows = parse_long(row[1]);
    const long cols = parse_long(row[2]);
    require_spec(rows >= 1 && cols >= 1 &&
                     static_cast<long>(row.size()) == 3 + rows * cols,
                 "model csv row '" + name + "' has wrong cell count");
    Matrix m(rows, cols);
    long idx = 3;
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c) m(r, c) = parse_double(row[idx++]);
    if (name == "frozen") {
      p.frozen_extractor = m(0, 0) != 0.0;
    } else if (name == "head.w") {
      p.w = m;
      saw_head_w = true;
    } else if (name == "head.b") {
      require_spec(rows == 1, "model csv head.b must be one row");
      p.b = m.row(0).transpose();
      saw_head_b = true;
    } else if (name.rfind("layer", 0) == 0) {
      const bool is_w = name.size() > 2 && name.substr(name.size() - 2) == ".w";
      const std::size_t layer = static_cast<std::size_t>(
          parse_long(std::string_view(name).substr(5, name.size() - 7)));
      if (p.extractor.size() <= layer) p.extractor.resize(layer + 1);
      if (is_w)
        p.extractor[layer].w = m;
      else {
        require_spec(rows == 1, "model csv layer bias must be one row");
        p.extractor[layer].b = m.row(0).transpose();
      }
    } else {
      throw invalid_spec("model csv has unknown tensor '" + name + "'");
    }
  }
  require_spec(saw_head_w && saw_head_b, "model csv is missing the head");
  for (const auto& layer : p.extractor)
    require_spec(layer.w.size() > 0 && layer.b.size() == layer.w.rows(),
                 "model csv extractor layer incomplete");
  return p;
}

// name,overall,many,medium,few,p_y_range; absent splits become empty fields
struct AblationRow {
  std::string name;
  eval::EvalReport report;
};

inline void write_ablation(const std::filesystem::path& path,
                           const std::vector<AblationRow>& rows) {
  std::ofstream out = open_out(path);
  out << "name,overall,many,medium,few,p_y_range\n";
  for (const auto& r : rows) {
    out << r.name << "," << fmt(r.report.overall) << ",";
    if (r.report.many) out << fmt(*r.report.many);
    out << ",";
    if (r.report.medium) out << fmt(*r.report.medium);
    out << ",";
    if (r.report.few) out << fmt(*r.report.few);
    out << ",";
    if (r.report.p_y.size()) out << fmt(r.report.p_y.maxCoeff() - r.report.p_y.minCoeff());
    out << "\n";
  }
}

}  // namespace balms::io
