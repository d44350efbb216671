#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "latred/error.hpp"
#include "latred/factorization.hpp"
#include "latred/gauss_moves.hpp"
#include "latred/harness.hpp"
#include "latred/lattice.hpp"
#include "latred/lll.hpp"
#include "latred/matrix.hpp"
#include "latred/policy.hpp"

namespace latred::io {

using json = nlohmann::json;

inline constexpr const char* kGenerator = "expm-uniform01";
inline constexpr const char* kNormalization = "trace";

// {"n": n, "rows": [[x, ...], ...]}, row-major.
inline json to_json(const RealMatrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(m.row(r));
  return {{"n", m.rows()}, {"rows", rows}};
}

// Integer entries are base-10 strings so no precision is lost.
inline json to_json(const IntMatrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c).str());
    rows.push_back(std::move(row));
  }
  return {{"n", m.rows()}, {"rows", rows}};
}

namespace detail {

inline std::size_t read_dimension(const json& j, std::size_t line) {
  if (!j.is_object() || !j.contains("n") || !j.contains("rows")) {
    throw ParseError("matrix object needs \"n\" and \"rows\"", line);
  }
  if (!j["n"].is_number_unsigned() || j["n"].get<std::size_t>() == 0) {
    throw ParseError("\"n\" must be a positive integer", line);
  }
  const std::size_t n = j["n"].get<std::size_t>();
  const json& rows = j["rows"];
  if (!rows.is_array() || rows.size() != n) throw ParseError("\"rows\" must hold n rows", line);
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != n) throw ParseError("every row must hold n entries", line);
  }
  return n;
}

inline BigInt parse_integer(const json& v, std::size_t line) {
  if (v.is_number_integer()) return BigInt(v.get<std::int64_t>());
  if (!v.is_string()) throw ParseError("integer entries must be base-10 strings", line);
  const std::string s = v.get<std::string>();
  const std::size_t start = (!s.empty() && (s[0] == '-' || s[0] == '+')) ? 1 : 0;
  if (s.size() == start || s.find_first_not_of("0123456789", start) != std::string::npos) {
    throw ParseError("'" + s + "' is not a base-10 integer", line);
  }
  return BigInt(s[0] == '+' ? s.substr(1) : s);
}

inline json parse_line(const std::string& text, std::size_t line) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line);
  }
}

}  // namespace detail

inline RealMatrix real_matrix_from_json(const json& j, std::size_t line = 0) {
  const std::size_t n = detail::read_dimension(j, line);
  RealMatrix m(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const json& v = j["rows"][r][c];
      if (!v.is_number()) throw ParseError("real entries must be numbers", line);
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

inline IntMatrix int_matrix_from_json(const json& j, std::size_t line = 0) {
  const std::size_t n = detail::read_dimension(j, line);
  IntMatrix m(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) m(r, c) = detail::parse_integer(j["rows"][r][c], line);
  return m;
}

// Dataset files: a header record followed by one matrix object per line.
struct DatasetHeader {
  std::size_t n = 0;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::string generator = kGenerator;
};

struct Dataset {
  DatasetHeader header;
  std::vector<RealMatrix> matrices;
};

inline void write_dataset(std::ostream& out, const DatasetHeader& h,
                          const std::vector<RealMatrix>& matrices) {
  out << json{{"n", h.n}, {"count", h.count}, {"seed", h.seed}, {"generator", h.generator}}.dump()
      << '\n';
  for (const auto& m : matrices) out << to_json(m).dump() << '\n';
}

// Reads a dataset; a missing header is tolerated (plain matrix lines).
// Errors carry 1-based line numbers.
inline Dataset read_dataset(std::istream& in) {
  Dataset d;
  std::string text;
  std::size_t line = 0;
  bool header_seen = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = detail::parse_line(text, line);
    if (j.is_object() && j.contains("generator")) {
      if (header_seen || !d.matrices.empty()) throw ParseError("unexpected header record", line);
      header_seen = true;
      try {
        d.header.n = j.at("n").get<std::size_t>();
        d.header.count = j.at("count").get<std::size_t>();
        d.header.seed = j.at("seed").get<std::uint64_t>();
        d.header.generator = j.at("generator").get<std::string>();
      } catch (const json::exception& e) {
        throw ParseError(std::string("bad header: ") + e.what(), line);
      }
      continue;
    }
    RealMatrix m = real_matrix_from_json(j, line);
    if (header_seen && m.rows() != d.header.n) {
      throw ParseError("matrix dimension differs from the header", line);
    }
    d.matrices.push_back(std::move(m));
  }
  if (!header_seen) {
    d.header.n = d.matrices.empty() ? 0 : d.matrices.front().rows();
    d.header.generator.clear();
  } else if (d.header.count != d.matrices.size()) {
    throw ParseError("header count " + std::to_string(d.header.count) + " but " +
                         std::to_string(d.matrices.size()) + " matrices",
                     line);
  }
  d.header.count = d.matrices.size();
  return d;
}

// Bases of a dataset, rejecting singular entries with their line position.
inline std::vector<Basis> to_bases(const Dataset& d) {
  std::vector<Basis> out;
  out.reserve(d.matrices.size());
  for (std::size_t k = 0; k < d.matrices.size(); ++k) {
    try {
      out.emplace_back(d.matrices[k]);
    } catch (const Error& e) {
      throw ParseError(std::string("matrix ") + std::to_string(k) + ": " + e.what(), 0);
    }
  }
  return out;
}

inline json to_json(const std::vector<SiegelViolation>& v) {
  json out = json::array();
  for (const auto& x : v) {
    out.push_back({{"condition", x.condition}, {"i", x.i}, {"j", x.j}, {"value", x.value}});
  }
  return out;
}

inline json to_json(const ExtendedGaussMove& m) {
  json a = json::array(), b = json::array();
  for (const auto& x : m.row_values()) a.push_back(x.str());
  for (const auto& x : m.col_values()) b.push_back(x.str());
  return {{"i", m.row_index()}, {"j", m.col_index()}, {"a", a}, {"b", b}};
}

inline json to_json(const MoveFactorization& f) {
  json moves = json::array();
  for (const auto& m : f.moves) moves.push_back(to_json(m));
  return {{"n", f.target.n()}, {"moves", moves}, {"target", to_json(f.target.matrix())}};
}

inline MoveFactorization factorization_from_json(const json& j) {
  try {
    const std::size_t n = j.at("n").get<std::size_t>();
    IntMatrix target = int_matrix_from_json(j.at("target"));
    if (target.rows() != n) throw ParseError("target dimension differs from \"n\"", 0);
    MoveFactorization f{{}, UnimodularMatrix(std::move(target))};
    for (const auto& m : j.at("moves")) {
      std::vector<BigInt> a, b;
      for (const auto& x : m.at("a")) a.push_back(detail::parse_integer(x, 0));
      for (const auto& x : m.at("b")) b.push_back(detail::parse_integer(x, 0));
      f.moves.emplace_back(n, m.at("i").get<std::size_t>(), m.at("j").get<std::size_t>(),
                           std::move(a), std::move(b));
    }
    return f;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad factorization: ") + e.what(), 0);
  }
}

inline json checkpoint_to_json(const PolicyParams& p, std::size_t n, std::uint64_t seed,
                               const TrainConfig* cfg = nullptr) {
  json tensors = json::object();
  for (const auto& t : p.tensors()) {
    tensors[t.name] = {{"shape", {t.value.shape.rows, t.value.shape.cols}}, {"data", t.value.data}};
  }
  json out = {{"n", n},
              {"L", p.config().layers},
              {"d", p.config().width},
              {"move_fill", to_string(p.config().move_fill)},
              {"tensors", tensors},
              {"seed", seed},
              {"normalization", kNormalization}};
  if (cfg) {
    out["optimizer"] = {{"name", cfg->optimizer},
                        {"learning_rate", cfg->learning_rate},
                        {"beta1", cfg->beta1},
                        {"beta2", cfg->beta2},
                        {"epsilon", cfg->epsilon}};
    out["temperature"] = cfg->temperature;
    out["loss_aggregation"] =
        cfg->aggregation == LossAggregation::mean_over_steps ? "mean_over_steps" : "final_step";
    out["batch_size"] = cfg->batch_size;
    out["epochs"] = cfg->epochs;
    out["k"] = cfg->k;
  }
  return out;
}

struct Checkpoint {
  PolicyParams params;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

inline Checkpoint checkpoint_from_json(const json& j) {
  try {
    PolicyConfig cfg;
    cfg.layers = j.at("L").get<std::size_t>();
    cfg.width = j.at("d").get<std::size_t>();
    cfg.move_fill = move_fill_from_string(j.at("move_fill").get<std::string>());
    if (j.value("normalization", std::string(kNormalization)) != kNormalization) {
      throw ParseError("unsupported normalization", 0);
    }
    // Tensor order is fixed by the architecture, not by the JSON key order.
    const PolicyParams layout = PolicyParams::initialize(cfg, 0);
    std::vector<NamedTensor> tensors;
    const json& tj = j.at("tensors");
    for (const auto& t : layout.tensors()) {
      if (!tj.contains(t.name)) throw ParseError("missing tensor '" + t.name + "'", 0);
      const json& e = tj.at(t.name);
      const auto shape = e.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2) throw ParseError("tensor '" + t.name + "' must be rank 2", 0);
      ad::Tensor v({shape[0], shape[1]}, e.at("data").get<std::vector<double>>());
      tensors.push_back({t.name, std::move(v)});
    }
    return {PolicyParams(cfg, std::move(tensors)), j.at("n").get<std::size_t>(),
            j.value("seed", std::uint64_t{0})};
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad checkpoint: ") + e.what(), 0);
  }
}

// Shortest round-trip decimal, so CSV values match the JSON values.
inline std::string format_double(double x) {
  json j = x;
  return j.dump();
}

inline void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "epoch,train_loss,test_mean_logdefect,test_std_logdefect,lll_mean_logdefect,"
         "lll_std_logdefect\n";
  for (const auto& p : curve) {
    out << p.epoch << ',' << format_double(p.train_loss) << ',';
    if (p.test) out << format_double(p.test->mean) << ',' << format_double(p.test->stddev);
    else out << ',';
    out << ',' << format_double(p.lll.mean) << ',' << format_double(p.lll.stddev) << '\n';
  }
}

inline json to_json(const Summary& s) {
  return {{"mean", s.mean}, {"std", s.stddev}, {"count", s.count}};
}

inline json to_json(const WorstSubset& s) {
  return {{"selected_by", s.selected_by},
          {"indices", s.indices},
          {"policy", to_json(s.policy)},
          {"lll", to_json(s.lll)}};
}

// Report JSON. Wall-clock timings are left out so reports stay
// byte-identical across runs; callers print them on the status stream.
inline json report_to_json(const EvalReport& r, const std::vector<WorstPReport>& worst) {
  json w = json::array();
  for (const auto& x : worst) {
    w.push_back({{"p", x.p}, {"size", x.size}, {"by_lll", to_json(x.by_lll)},
                 {"by_policy", to_json(x.by_policy)}});
  }
  return {{"n", r.n},
          {"k", r.k},
          {"seed", r.seed},
          {"count", r.policy.size()},
          {"per_matrix", {{"policy", r.policy}, {"lll", r.lll}, {"identity", r.identity}}},
          {"summary",
           {{"policy", to_json(r.policy_summary)},
            {"lll", to_json(r.lll_summary)},
            {"identity", to_json(r.identity_summary)}}},
          {"worst_p", w}};
}

}  // namespace latred::io
