#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dlsn/errors.hpp"
#include "dlsn/model.hpp"
#include "dlsn/sampler.hpp"
#include "dlsn/simulate.hpp"

namespace dlsn {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "columnar files are little-endian");

inline constexpr const char* kFormatName = "dlsn-columnar";
inline constexpr int kFormatVersion = 1;

template <typename T> constexpr const char* dtype_name();
template <> constexpr const char* dtype_name<double>() { return "f64"; }
template <> constexpr const char* dtype_name<std::uint8_t>() { return "u8"; }
template <> constexpr const char* dtype_name<std::int64_t>() { return "i64"; }

/**
 * @brief Directory container: meta.json plus one raw little-endian file per column.
 *
 * meta.json holds {"format", "version", "kind", "columns": {name: {dtype, shape}},
 * "attrs": {...}}. Keys are sorted, so identical content gives identical bytes.
 */
class ColumnarWriter {
 public:
  ColumnarWriter(fs::path dir, std::string kind) : dir_(std::move(dir)) {
    meta_["format"] = kFormatName;
    meta_["version"] = kFormatVersion;
    meta_["kind"] = std::move(kind);
    meta_["columns"] = json::object();
    meta_["attrs"] = json::object();
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create directory " + dir_.string() + ": " + ec.message());
  }

  json& attrs() { return meta_["attrs"]; }

  template <typename T>
  void column(const std::string& name, const std::vector<T>& values, std::vector<std::size_t> shape) {
    std::size_t count = 1;
    for (auto s : shape) count *= s;
    if (count != values.size()) throw ConfigError("column " + name + ": shape does not match value count");
    std::ofstream out(dir_ / (name + ".bin"), std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir_ / (name + ".bin")).string());
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(T)));
    if (!out) throw DataError("write failed for column " + name);
    meta_["columns"][name] = {{"dtype", dtype_name<T>()}, {"shape", shape}};
  }

  /// Writes meta.json; call once all columns are in place.
  void finish() {
    std::ofstream out(dir_ / "meta.json", std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir_ / "meta.json").string());
    out << meta_.dump(1) << "\n";
  }

 private:
  fs::path dir_;
  json meta_;
};

class ColumnarReader {
 public:
  ColumnarReader(fs::path dir, const std::string& kind) : dir_(std::move(dir)) {
    std::ifstream in(dir_ / "meta.json");
    if (!in) throw DataError("missing " + (dir_ / "meta.json").string());
    try {
      meta_ = json::parse(in);
    } catch (const json::exception& e) {
      throw DataError((dir_ / "meta.json").string() + ": " + e.what());
    }
    if (meta_.value("format", "") != kFormatName) throw DataError(dir_.string() + " is not a " + kFormatName + " container");
    if (meta_.value("version", 0) != kFormatVersion) throw DataError(dir_.string() + ": unsupported format version");
    if (meta_.value("kind", "") != kind)
      throw DataError(dir_.string() + ": expected a '" + kind + "' container, found '" + meta_.value("kind", "") + "'");
  }

  const json& attrs() const { return meta_.at("attrs"); }

  bool has(const std::string& name) const { return meta_["columns"].contains(name); }

  std::vector<std::size_t> shape(const std::string& name) const {
    if (!has(name)) throw DataError(dir_.string() + ": missing column " + name);
    return meta_["columns"][name]["shape"].get<std::vector<std::size_t>>();
  }

  template <typename T>
  std::vector<T> column(const std::string& name, const std::vector<std::size_t>& expected_shape) const {
    if (!has(name)) throw DataError(dir_.string() + ": missing column " + name);
    const auto& c = meta_["columns"][name];
    if (c["dtype"] != dtype_name<T>()) throw DataError(dir_.string() + ": column " + name + " has the wrong dtype");
    if (shape(name) != expected_shape) throw DataError(dir_.string() + ": column " + name + " has an unexpected shape");
    std::size_t count = 1;
    for (auto s : expected_shape) count *= s;
    const fs::path file = dir_ / (name + ".bin");
    std::error_code ec;
    const auto bytes = fs::file_size(file, ec);
    if (ec || bytes != count * sizeof(T)) throw DataError(file.string() + ": size does not match its declared shape");
    std::vector<T> out(count);
    std::ifstream in(file, std::ios::binary);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw DataError("cannot read " + file.string());
    return out;
  }

 private:
  fs::path dir_;
  json meta_;
};

// ---------------------------------------------------------------------------
// Helpers between Eigen / Cube and flat columns

inline void append(std::vector<double>& out, const MatrixXd& m) {
  // row-major, so shape [rows, cols] reads naturally
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
}

inline MatrixXd take(const std::vector<double>& in, std::size_t& pos, Eigen::Index rows, Eigen::Index cols) {
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = in[pos++];
  return m;
}

inline std::vector<double> grid_values(const TimeGrid& g) { return g.times(); }

// ---------------------------------------------------------------------------
// NetworkSeries

inline void write_network(const fs::path& dir, const NetworkSeries& d, const std::vector<std::string>& bin_labels = {}) {
  ColumnarWriter w(dir, "network");
  w.attrs()["labels"] = d.labels();
  w.attrs()["grid"] = grid_values(d.grid());
  if (!bin_labels.empty()) w.attrs()["bin_labels"] = bin_labels;
  const std::vector<std::size_t> shape{d.times(), d.nodes(), d.nodes()};
  w.column("y", d.y_raw().raw(), shape);
  w.column("observed", d.observed_raw().raw(), shape);
  w.finish();
}

inline NetworkSeries read_network(const fs::path& dir) {
  ColumnarReader r(dir, "network");
  const auto labels = r.attrs().at("labels").get<std::vector<std::string>>();
  TimeGrid grid(r.attrs().at("grid").get<std::vector<double>>());
  NetworkSeries out(labels, grid);
  const std::vector<std::size_t> shape{grid.size(), labels.size(), labels.size()};
  const auto y = r.column<std::uint8_t>("y", shape);
  const auto obs = r.column<std::uint8_t>("observed", shape);
  std::size_t k = 0;
  for (std::size_t t = 0; t < grid.size(); ++t)
    for (std::size_t i = 0; i < labels.size(); ++i)
      for (std::size_t j = 0; j < labels.size(); ++j, ++k) {
        if (!obs[k]) continue;
        if (i == j) throw DataError(dir.string() + ": diagonal cell marked observed");
        out.set(i, j, t, y[k]);
      }
  return out;
}

inline std::vector<std::string> read_bin_labels(const fs::path& dir) {
  ColumnarReader r(dir, "network");
  if (!r.attrs().contains("bin_labels")) return {};
  return r.attrs().at("bin_labels").get<std::vector<std::string>>();
}

// ---------------------------------------------------------------------------
// CovariateSet

inline void write_covariates(const fs::path& dir, const CovariateSet& c, std::size_t nodes, std::size_t times) {
  ColumnarWriter w(dir, "covariates");
  w.attrs()["labels"] = c.labels;
  w.attrs()["nodes"] = nodes;
  w.attrs()["times"] = times;
  std::vector<double> z;
  for (const auto& cube : c.z) z.insert(z.end(), cube.raw().begin(), cube.raw().end());
  w.column("z", z, {c.count(), times, nodes, nodes});
  w.finish();
}

inline CovariateSet read_covariates(const fs::path& dir) {
  ColumnarReader r(dir, "covariates");
  CovariateSet out;
  out.labels = r.attrs().at("labels").get<std::vector<std::string>>();
  const auto v = r.attrs().at("nodes").get<std::size_t>();
  const auto n = r.attrs().at("times").get<std::size_t>();
  const auto z = r.column<double>("z", {out.labels.size(), n, v, v});
  const std::size_t block = n * v * v;
  for (std::size_t p = 0; p < out.labels.size(); ++p) {
    Cube<double> cube(v, n);
    std::copy(z.begin() + static_cast<std::ptrdiff_t>(p * block), z.begin() + static_cast<std::ptrdiff_t>((p + 1) * block),
              cube.raw().begin());
    out.z.push_back(std::move(cube));
  }
  return out;
}

// ---------------------------------------------------------------------------
// HyperConfig <-> json

inline json to_json_value(const HyperConfig& c) {
  return {{"h_star", c.h_star},     {"k_mu", c.k_mu},         {"k_beta", c.k_beta},
          {"k_ab", c.k_ab},         {"k_x", c.k_x},           {"rho_ab", c.rho_ab},
          {"rho_x", c.rho_x},       {"shrink_a", c.shrink_a}, {"iterations", c.iterations},
          {"burn_in", c.burn_in},   {"thin", c.thin},         {"seed", c.seed},
          {"variant", to_string(c.variant)}, {"missing", to_string(c.missing)}};
}

inline HyperConfig hyper_from_json(const json& j) {
  HyperConfig c;
  c.h_star = j.at("h_star").get<std::size_t>();
  c.k_mu = j.at("k_mu").get<double>();
  c.k_beta = j.at("k_beta").get<double>();
  c.k_ab = j.at("k_ab").get<double>();
  c.k_x = j.at("k_x").get<double>();
  c.rho_ab = j.at("rho_ab").get<double>();
  c.rho_x = j.at("rho_x").get<double>();
  c.shrink_a = j.at("shrink_a").get<double>();
  c.iterations = j.at("iterations").get<long>();
  c.burn_in = j.at("burn_in").get<long>();
  c.thin = j.at("thin").get<long>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.missing = parse_missing_policy(j.at("missing").get<std::string>());
  return c;
}

// ---------------------------------------------------------------------------
// Trace

/// Saved draws as columns with a leading draw axis. Timing is not persisted,
/// so identical runs give identical files.
inline void write_trace(const fs::path& dir, const Trace& t, const json& extra = json::object()) {
  if (t.draws.empty()) throw DomainError("trace holds no draws");
  const auto& f = t.draws.front();
  const std::size_t d = t.draws.size();
  const auto n = static_cast<std::size_t>(f.mu.size());
  const auto v = static_cast<std::size_t>(f.a.rows());
  const auto p = static_cast<std::size_t>(f.beta.rows());
  const auto h = static_cast<std::size_t>(f.tau.size());
  ColumnarWriter w(dir, "trace");
  w.attrs()["config"] = to_json_value(t.config);
  w.attrs()["labels"] = t.labels;
  w.attrs()["grid"] = grid_values(t.grid);
  json jit = json::array();
  for (const auto& [k, val] : t.jitter) jit.push_back({k, val});
  w.attrs()["jitter"] = jit;
  w.attrs()["dims"] = {{"draws", d}, {"times", n}, {"nodes", v}, {"covariates", p}, {"h", h}};
  for (const auto& [k, val] : extra.items()) w.attrs()[k] = val;

  std::vector<std::int64_t> iter;
  std::vector<double> mu, beta, a, b, xs, xr, tau, s2, pi;
  for (const auto& dr : t.draws) {
    iter.push_back(dr.iteration);
    mu.insert(mu.end(), dr.mu.data(), dr.mu.data() + dr.mu.size());
    append(beta, dr.beta);
    append(a, dr.a);
    append(b, dr.b);
    for (std::size_t i = 0; i < v; ++i) {
      append(xs, dr.xs.empty() ? MatrixXd(0, static_cast<Eigen::Index>(n)) : dr.xs[i]);
      append(xr, dr.xr.empty() ? MatrixXd(0, static_cast<Eigen::Index>(n)) : dr.xr[i]);
    }
    tau.insert(tau.end(), dr.tau.data(), dr.tau.data() + dr.tau.size());
    s2.push_back(dr.sigma2_eps);
    pi.insert(pi.end(), dr.pi.raw().begin(), dr.pi.raw().end());
  }
  w.column("iteration", iter, {d});
  w.column("mu", mu, {d, n});
  w.column("beta", beta, {d, p, n});
  w.column("a", a, {d, v, n});
  w.column("b", b, {d, v, n});
  w.column("xs", xs, {d, v, h, n});
  w.column("xr", xr, {d, v, h, n});
  w.column("tau", tau, {d, h});
  w.column("sigma2_eps", s2, {d});
  w.column("pi", pi, {d, n, v, v});
  w.finish();
}

inline Trace read_trace(const fs::path& dir, json* attrs_out = nullptr) {
  ColumnarReader r(dir, "trace");
  Trace t;
  t.config = hyper_from_json(r.attrs().at("config"));
  t.labels = r.attrs().at("labels").get<std::vector<std::string>>();
  t.grid = TimeGrid(r.attrs().at("grid").get<std::vector<double>>());
  for (const auto& e : r.attrs().at("jitter")) t.jitter.emplace_back(e.at(0).get<std::string>(), e.at(1).get<double>());
  const auto& dims = r.attrs().at("dims");
  const auto d = dims.at("draws").get<std::size_t>();
  const auto n = dims.at("times").get<std::size_t>();
  const auto v = dims.at("nodes").get<std::size_t>();
  const auto p = dims.at("covariates").get<std::size_t>();
  const auto h = dims.at("h").get<std::size_t>();
  if (v != t.labels.size() || n != t.grid.size()) throw DataError(dir.string() + ": trace dimensions disagree with labels");
  const auto iter = r.column<std::int64_t>("iteration", {d});
  const auto mu = r.column<double>("mu", {d, n});
  const auto beta = r.column<double>("beta", {d, p, n});
  const auto a = r.column<double>("a", {d, v, n});
  const auto b = r.column<double>("b", {d, v, n});
  const auto xs = r.column<double>("xs", {d, v, h, n});
  const auto xr = r.column<double>("xr", {d, v, h, n});
  const auto tau = r.column<double>("tau", {d, h});
  const auto s2 = r.column<double>("sigma2_eps", {d});
  const auto pi = r.column<double>("pi", {d, n, v, v});
  const auto ni = static_cast<Eigen::Index>(n);
  const auto vi = static_cast<Eigen::Index>(v);
  const auto hi = static_cast<Eigen::Index>(h);
  std::size_t pmu = 0, pbeta = 0, pa = 0, pb = 0, pxs = 0, pxr = 0, ptau = 0, ppi = 0;
  for (std::size_t k = 0; k < d; ++k) {
    Draw dr;
    dr.iteration = iter[k];
    dr.mu = take(mu, pmu, ni, 1);
    dr.beta = take(beta, pbeta, static_cast<Eigen::Index>(p), ni);
    dr.a = take(a, pa, vi, ni);
    dr.b = take(b, pb, vi, ni);
    for (std::size_t i = 0; i < v; ++i) {
      dr.xs.push_back(take(xs, pxs, hi, ni));
      dr.xr.push_back(take(xr, pxr, hi, ni));
    }
    dr.tau = take(tau, ptau, hi, 1);
    dr.sigma2_eps = s2[k];
    dr.pi = Cube<double>(v, n);
    std::copy(pi.begin() + static_cast<std::ptrdiff_t>(ppi), pi.begin() + static_cast<std::ptrdiff_t>(ppi + n * v * v),
              dr.pi.raw().begin());
    ppi += n * v * v;
    t.draws.push_back(std::move(dr));
  }
  if (attrs_out) *attrs_out = r.attrs();
  return t;
}

// ---------------------------------------------------------------------------
// GroundTruth

inline void write_truth(const fs::path& dir, const GroundTruth& g) {
  const std::size_t v = g.pi.nodes();
  const std::size_t n = g.pi.times();
  ColumnarWriter w(dir, "truth");
  w.attrs()["variant"] = to_string(g.variant);
  const std::vector<std::size_t> cube{n, v, v};
  w.column("predictor", g.predictor.raw(), cube);
  w.column("pi", g.pi.raw(), cube);
  if (g.lsmdn) {
    const auto& l = *g.lsmdn;
    const auto dims = static_cast<std::size_t>(l.positions.front().rows());
    w.attrs()["beta_in"] = l.beta_in;
    w.attrs()["beta_out"] = l.beta_out;
    std::vector<double> pos;
    for (const auto& m : l.positions) append(pos, m);
    w.column("positions", pos, {n, dims, v});
    w.column("radii", std::vector<double>(l.radii.data(), l.radii.data() + l.radii.size()), {v});
  } else {
    const auto& s = g.state;
    const auto p = static_cast<std::size_t>(s.beta.rows());
    const auto h = s.dims();
    std::vector<double> beta, a, b, xs, xr;
    append(beta, s.beta);
    append(a, s.a);
    append(b, s.b);
    for (std::size_t i = 0; i < v; ++i) {
      append(xs, s.xs[i]);
      append(xr, s.xr[i]);
    }
    w.column("mu", std::vector<double>(s.mu.data(), s.mu.data() + s.mu.size()), {n});
    w.column("beta", beta, {p, n});
    w.column("a", a, {v, n});
    w.column("b", b, {v, n});
    w.column("xs", xs, {v, h, n});
    w.column("xr", xr, {v, h, n});
  }
  w.finish();
}

inline GroundTruth read_truth(const fs::path& dir) {
  ColumnarReader r(dir, "truth");
  GroundTruth g;
  g.variant = parse_dgp_variant(r.attrs().at("variant").get<std::string>());
  const auto shape = r.shape("pi");
  if (shape.size() != 3) throw DataError(dir.string() + ": pi must be three-dimensional");
  const std::size_t n = shape[0], v = shape[1];
  g.predictor = Cube<double>(v, n);
  g.pi = Cube<double>(v, n);
  g.predictor.raw() = r.column<double>("predictor", {n, v, v});
  g.pi.raw() = r.column<double>("pi", {n, v, v});
  const auto vi = static_cast<Eigen::Index>(v);
  const auto ni = static_cast<Eigen::Index>(n);
  if (g.variant == DgpVariant::lsmdn) {
    LsmdnLatent l;
    l.beta_in = r.attrs().at("beta_in").get<double>();
    l.beta_out = r.attrs().at("beta_out").get<double>();
    const auto dims = r.shape("positions").at(1);
    const auto pos = r.column<double>("positions", {n, dims, v});
    std::size_t k = 0;
    for (std::size_t t = 0; t < n; ++t) l.positions.push_back(take(pos, k, static_cast<Eigen::Index>(dims), vi));
    const auto radii = r.column<double>("radii", {v});
    l.radii = Eigen::Map<const VectorXd>(radii.data(), vi);
    g.lsmdn = std::move(l);
    g.state = ModelState::zeros(v, n, 0, 0, Variant::naive);
    return g;
  }
  const auto p = r.shape("beta").at(0);
  const auto h = r.shape("xs").at(1);
  g.state = ModelState::zeros(v, n, p, h, Variant::dlsn);
  std::size_t k = 0;
  g.state.mu = take(r.column<double>("mu", {n}), k, ni, 1);
  k = 0;
  g.state.beta = take(r.column<double>("beta", {p, n}), k, static_cast<Eigen::Index>(p), ni);
  k = 0;
  g.state.a = take(r.column<double>("a", {v, n}), k, vi, ni);
  k = 0;
  g.state.b = take(r.column<double>("b", {v, n}), k, vi, ni);
  const auto xs = r.column<double>("xs", {v, h, n});
  const auto xr = r.column<double>("xr", {v, h, n});
  std::size_t ks = 0, kr = 0;
  for (std::size_t i = 0; i < v; ++i) {
    g.state.xs[i] = take(xs, ks, static_cast<Eigen::Index>(h), ni);
    g.state.xr[i] = take(xr, kr, static_cast<Eigen::Index>(h), ni);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Dataset directory: network/ and covariates/ (truth/ when simulated)

struct Dataset {
  NetworkSeries data;
  CovariateSet cov;
  std::vector<std::string> bin_labels;
};

inline void write_dataset(const fs::path& dir, const NetworkSeries& data, const CovariateSet& cov,
                          const std::vector<std::string>& bin_labels = {}) {
  write_network(dir / "network", data, bin_labels);
  write_covariates(dir / "covariates", cov, data.nodes(), data.times());
}

inline Dataset read_dataset(const fs::path& dir) {
  Dataset d{read_network(dir / "network"), {}, read_bin_labels(dir / "network")};
  if (fs::exists(dir / "covariates" / "meta.json")) d.cov = read_covariates(dir / "covariates");
  d.cov.validate(d.data.nodes(), d.data.times());
  return d;
}

}  // namespace dlsn
