// latred: lattice reduction workbench.
//
//   latred gen    --dim 4 --count 100 --seed 7 --out data.jsonl
//   latred defect --in data.jsonl
//   latred lll    --in data.jsonl --out reduced.jsonl --report lll.json
//   latred factor --in unimodular.jsonl --out moves.jsonl --verify
//   latred train  --dim 4 --epochs 200 --out-model model.json --out-curve curve.csv
//   latred eval   --model model.json --test-count 4000 --p 0.2 --out-report report.json
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "latred/latred.hpp"

namespace {

using latred::io::json;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kVerify = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VerificationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  if (const char* s = std::getenv("LATRED_SEED")) {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(s, &pos);
      if (pos == std::string(s).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("LATRED_SEED is not an unsigned integer: '") + s + "'");
  }
  return 0;
}

// Status stream: one JSON object per line on stderr.
void status(const json& record) { std::cerr << record.dump() << '\n'; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Output sink; "-" is standard output. Files are written in full or not at all.
class Output {
 public:
  explicit Output(std::string path) : path_(std::move(path)) {}
  std::ostream& stream() { return buffer_; }
  void commit() {
    if (path_ == "-") {
      std::cout << buffer_.str();
      std::cout.flush();
      return;
    }
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path_ + "'");
    out << buffer_.str();
    if (!out.flush()) throw DataError("write to '" + path_ + "' failed");
  }

 private:
  std::string path_;
  std::ostringstream buffer_;
};

// Fails early on unwritable paths, before any long computation.
void check_writable(const std::string& path) {
  if (path == "-") return;
  std::ofstream probe(path, std::ios::binary | std::ios::app);
  if (!probe) throw DataError("cannot write '" + path + "'");
}

latred::io::Dataset load_dataset(const std::string& path) {
  std::istringstream in(read_file(path));
  return latred::io::read_dataset(in);
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::size_t dim = 0;
  std::size_t count = 1;
  std::optional<std::uint64_t> seed;
  std::string out = "-";
};

int cmd_gen(const GenArgs& a) {
  if (a.dim < 2) throw UsageError("--dim must be at least 2");
  check_writable(a.out);
  const std::uint64_t seed = a.seed.value_or(default_seed());
  std::vector<latred::RealMatrix> mats;
  mats.reserve(a.count);
  for (std::size_t k = 0; k < a.count; ++k) {
    const std::uint64_t key = latred::stream_key({seed, std::uint64_t(latred::Stream::dataset), k});
    mats.push_back(latred::generate_basis(a.dim, key).matrix());
  }
  Output out(a.out);
  latred::io::write_dataset(out.stream(), {a.dim, a.count, seed, latred::io::kGenerator}, mats);
  out.commit();
  return kOk;
}

// ---------------------------------------------------------------- defect

struct DefectArgs {
  std::string in;
  std::string out = "-";
};

int cmd_defect(const DefectArgs& a) {
  const auto bases = latred::io::to_bases(load_dataset(a.in));
  Output out(a.out);
  for (std::size_t k = 0; k < bases.size(); ++k) {
    out.stream() << json{{"index", k},
                         {"defect", latred::orthogonality_defect(bases[k])},
                         {"log_defect", latred::log_defect(bases[k])}}
                        .dump()
                 << '\n';
  }
  out.commit();
  return kOk;
}

// ---------------------------------------------------------------- lll

struct LllArgs {
  std::string in;
  std::string out = "-";
  std::string report;
  double lovasz_delta = 0.75;
};

int cmd_lll(const LllArgs& a) {
  if (!(a.lovasz_delta > 0.25 && a.lovasz_delta <= 1.0)) {
    throw UsageError("--lovasz-delta must lie in (0.25, 1]");
  }
  const latred::io::Dataset data = load_dataset(a.in);
  const auto bases = latred::io::to_bases(data);
  const latred::LllParams params{a.lovasz_delta, 0};
  std::vector<latred::RealMatrix> reduced;
  json rows = json::array();
  bool certified = true;
  for (std::size_t k = 0; k < bases.size(); ++k) {
    const auto r = latred::lll_reduce(bases[k], params);
    const auto siegel = latred::is_siegel_reduced(r.reduced, params);
    const double after = latred::orthogonality_defect(r.reduced);
    const std::size_t n = bases[k].n();
    // The defect bound is proved for the classical parameter 3/4 only.
    const bool bounded = a.lovasz_delta < 0.75 || after <= latred::defect_bound(n) * (1 + 1e-6);
    certified = certified && siegel.reduced && bounded;
    rows.push_back({{"index", k},
                    {"defect_before", latred::orthogonality_defect(bases[k])},
                    {"defect_after", after},
                    {"log_defect_before", latred::log_defect(bases[k])},
                    {"log_defect_after", latred::log_defect(r.reduced)},
                    {"defect_bound", latred::defect_bound(n)},
                    {"iterations", r.iterations},
                    {"swaps", r.swaps},
                    {"size_reductions", r.size_reductions},
                    {"transform", latred::io::to_json(r.transform.matrix())},
                    {"siegel_reduced", siegel.reduced},
                    {"violations", latred::io::to_json(siegel.violations)}});
    reduced.push_back(r.reduced.matrix());
  }
  Output out(a.out);
  latred::io::write_dataset(out.stream(),
                            {data.header.n, reduced.size(), data.header.seed, data.header.generator},
                            reduced);
  out.commit();
  if (!a.report.empty()) {
    Output rep(a.report);
    rep.stream() << json{{"lovasz_delta", a.lovasz_delta}, {"matrices", rows}}.dump(1) << '\n';
    rep.commit();
  }
  if (!certified) throw VerificationFailure("an LLL output failed certification");
  return kOk;
}

// ---------------------------------------------------------------- factor

struct FactorArgs {
  std::string in;
  std::string out = "-";
  bool verify = false;
};

// Input: one integer matrix object per line (a single pretty-printed object
// is also accepted).
std::vector<std::pair<std::size_t, latred::IntMatrix>> load_integer_matrices(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<std::pair<std::size_t, latred::IntMatrix>> out;
  // Whole-file object first.
  try {
    const json j = json::parse(text);
    if (j.is_object()) {
      out.emplace_back(1, latred::io::int_matrix_from_json(j, 1));
      return out;
    }
  } catch (const json::parse_error&) {
  }
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw latred::ParseError(std::string("malformed JSON: ") + e.what(), no);
    }
    out.emplace_back(no, latred::io::int_matrix_from_json(j, no));
  }
  return out;
}

int cmd_factor(const FactorArgs& a) {
  const auto mats = load_integer_matrices(a.in);
  Output out(a.out);
  bool ok = true;
  for (const auto& [line, m] : mats) {
    latred::UnimodularMatrix u = [&, line = line] {
      try {
        return latred::UnimodularMatrix(m);
      } catch (const latred::Error& e) {
        throw latred::ParseError(e.what(), line);
      }
    }();
    if (u.det() != 1) {
      throw latred::ParseError(
          "determinant is -1; factor() accepts SL_n(Z) only, use the sign wrapper factor_signed()",
          line);
    }
    const latred::MoveFactorization f = latred::factor(u);
    const bool verified = !a.verify || latred::verify_factorization(f);
    ok = ok && verified;
    json j = latred::io::to_json(f);
    j["induction_moves"] = f.induction_moves;
    j["base_moves"] = f.base_moves;
    if (a.verify) j["verified"] = verified;
    out.stream() << j.dump() << '\n';
    status({{"event", "factor"}, {"line", line}, {"n", u.n()}, {"moves", f.moves.size()},
            {"verified", verified}});
  }
  out.commit();
  if (!ok) throw VerificationFailure("a factorization does not multiply back to its input");
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::size_t dim = 4;
  std::size_t epochs = 200;
  std::size_t k = 0;
  std::optional<std::uint64_t> seed;
  double lr = 1e-3;
  double temperature = 1.0;
  std::size_t batch_size = 50;
  std::size_t train_per_epoch = 1000;
  std::size_t test_count = 4000;
  std::size_t eval_every = 10;
  std::size_t eval_count = 0;
  std::size_t layers = 3;
  std::size_t width = 32;
  std::string move_fill = "row_col";
  std::string aggregation = "mean";
  std::string optimizer = "adam";
  std::string out_model;
  std::string out_curve;
};

int cmd_train(const TrainArgs& a) {
  if (a.dim < 2) throw UsageError("--dim must be at least 2");
  if (a.out_model.empty()) throw UsageError("--out-model is required");
  check_writable(a.out_model);
  if (!a.out_curve.empty()) check_writable(a.out_curve);
  const std::uint64_t seed = a.seed.value_or(default_seed());
  latred::DatasetSpec spec{a.dim, a.train_per_epoch, a.test_count, seed};
  latred::TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.k = a.k;
  cfg.learning_rate = a.lr;
  cfg.optimizer = a.optimizer;
  cfg.temperature = a.temperature;
  cfg.aggregation = a.aggregation == "final" ? latred::LossAggregation::final_step
                                             : latred::LossAggregation::mean_over_steps;
  cfg.batch_size = a.batch_size;
  cfg.eval_every = a.eval_every;
  cfg.eval_count = a.eval_count;
  cfg.seed = seed;
  cfg.policy = {a.layers, a.width, latred::move_fill_from_string(a.move_fill)};
  const auto result = latred::train(spec, cfg, [](const latred::CurvePoint& p) {
    json r = {{"event", "epoch"}, {"epoch", p.epoch}, {"train_loss", p.train_loss}};
    if (p.test) r["test_mean_logdefect"] = p.test->mean;
    status(r);
  });
  Output model(a.out_model);
  model.stream() << latred::io::checkpoint_to_json(result.params, a.dim, seed, &cfg).dump() << '\n';
  model.commit();
  if (!a.out_curve.empty()) {
    Output curve(a.out_curve);
    latred::io::write_curve_csv(curve.stream(), result.curve);
    curve.commit();
  }
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string model;
  std::string test;
  std::optional<std::size_t> dim;
  std::size_t test_count = 4000;
  std::optional<std::uint64_t> seed;
  std::size_t k = 0;
  std::vector<double> p;
  double temperature = 1.0;
  bool greedy = false;
  std::string out_report = "-";
};

int cmd_eval(const EvalArgs& a) {
  for (double p : a.p) {
    if (!(p > 0.0 && p <= 1.0)) throw UsageError("--p must lie in (0, 1]");
  }
  check_writable(a.out_report);
  const latred::io::Checkpoint ck = latred::io::checkpoint_from_json([&] {
    try {
      return json::parse(read_file(a.model));
    } catch (const json::parse_error& e) {
      throw latred::ParseError(std::string("malformed checkpoint: ") + e.what(), 0);
    }
  }());
  const std::uint64_t seed = a.seed.value_or(default_seed());
  std::vector<latred::Basis> tests;
  if (!a.test.empty()) {
    tests = latred::io::to_bases(load_dataset(a.test));
  } else {
    const std::size_t n = a.dim.value_or(ck.n);
    if (n < 2) throw UsageError("--dim must be at least 2");
    tests = latred::test_set({n, 0, a.test_count, seed});
  }
  if (tests.empty()) throw DataError("empty test set");
  const latred::PolicyOptions options{
      a.temperature, a.greedy ? latred::SampleMode::greedy : latred::SampleMode::stochastic};
  const latred::EvalReport report = latred::evaluate(ck.params, tests, a.k, seed, options);
  std::vector<latred::WorstPReport> worst;
  for (double p : a.p) worst.push_back(latred::worst_p_analysis(report, p));
  json doc = latred::io::report_to_json(report, worst);
  doc["mode"] = a.greedy ? "greedy" : "stochastic";
  Output out(a.out_report);
  out.stream() << doc.dump() << '\n';
  out.commit();
  status({{"event", "timing"},
          {"policy_seconds", report.policy_seconds},
          {"lll_seconds", report.lll_seconds}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice basis reduction workbench"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate random bases B = exp(A), A ~ U[0,1)");
  g->add_option("--dim", gen.dim, "Dimension n (>= 2)")->required();
  g->add_option("--count", gen.count, "Number of bases");
  g->add_option("--seed", gen.seed, "Seed (default: LATRED_SEED or 0)");
  g->add_option("--out", gen.out, "Output JSON-lines file, - for stdout");

  DefectArgs def;
  auto* d = app.add_subcommand("defect", "Orthogonality defect of every basis in a dataset");
  d->add_option("--in", def.in, "Input dataset")->required();
  d->add_option("--out", def.out, "Output JSON-lines file");

  LllArgs lll;
  auto* l = app.add_subcommand("lll", "LLL-reduce every basis in a dataset");
  l->add_option("--in", lll.in, "Input dataset")->required();
  l->add_option("--out", lll.out, "Reduced dataset");
  l->add_option("--report", lll.report, "Per-matrix report (JSON)");
  l->add_option("--lovasz-delta", lll.lovasz_delta, "Lovasz parameter in (1/4, 1]");

  FactorArgs fac;
  auto* f = app.add_subcommand("factor", "Factor SL_n(Z) matrices into extended Gauss moves");
  f->add_option("--in", fac.in, "Integer matrices, one JSON object per line")->required();
  f->add_option("--out", fac.out, "Factorizations, one JSON object per line");
  f->add_flag("--verify", fac.verify, "Check the exact product of every factorization");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the reduction policy");
  t->add_option("--dim", tr.dim, "Dimension n (>= 2)");
  t->add_option("--epochs", tr.epochs, "Epochs");
  t->add_option("--k", tr.k, "Moves per rollout (0: n)");
  t->add_option("--seed", tr.seed, "Seed (default: LATRED_SEED or 0)");
  t->add_option("--lr", tr.lr, "Learning rate")->check(CLI::NonNegativeNumber);
  t->add_option("--temperature", tr.temperature, "Gumbel-softmax temperature")->check(CLI::PositiveNumber);
  t->add_option("--batch-size", tr.batch_size, "Rollouts per optimizer step")->check(CLI::PositiveNumber);
  t->add_option("--train-per-epoch", tr.train_per_epoch, "Fresh training bases per epoch");
  t->add_option("--test-count", tr.test_count, "Frozen test-set size");
  t->add_option("--eval-every", tr.eval_every, "Test evaluation period in epochs (0: last only)");
  t->add_option("--eval-count", tr.eval_count, "Test matrices used for the curve (0: all)");
  t->add_option("--layers", tr.layers, "Message-passing layers");
  t->add_option("--width", tr.width, "Hidden width")->check(CLI::PositiveNumber);
  t->add_option("--move-fill", tr.move_fill, "row_col or single_entry")
      ->check(CLI::IsMember({"row_col", "single_entry"}));
  t->add_option("--aggregation", tr.aggregation, "Per-step loss aggregation: mean or final")
      ->check(CLI::IsMember({"mean", "final"}));
  t->add_option("--optimizer", tr.optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
  t->add_option("--out-model", tr.out_model, "Checkpoint JSON");
  t->add_option("--out-curve", tr.out_curve, "Training curve CSV");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a policy against LLL and no reduction");
  e->add_option("--model", ev.model, "Checkpoint JSON")->required();
  e->add_option("--test", ev.test, "Test dataset (default: the frozen generated test set)");
  e->add_option("--dim", ev.dim, "Dimension of the generated test set (default: checkpoint n)");
  e->add_option("--test-count", ev.test_count, "Size of the generated test set");
  e->add_option("--seed", ev.seed, "Seed (default: LATRED_SEED or 0)");
  e->add_option("--k", ev.k, "Moves per rollout (0: n)");
  e->add_option("--p", ev.p, "Worst-p fractions, repeatable");
  e->add_option("--temperature", ev.temperature, "Sampling temperature")->check(CLI::PositiveNumber);
  e->add_flag("--greedy", ev.greedy, "Most probable index and nearest rounding");
  e->add_option("--out-report", ev.out_report, "Report JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*d) return cmd_defect(def);
    if (*l) return cmd_lll(lll);
    if (*f) return cmd_factor(fac);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsage;
  } catch (const VerificationFailure& err) {
    std::cerr << "verification failed: " << err.what() << '\n';
    return kVerify;
  } catch (const DataError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kData;
  } catch (const latred::DivergenceError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kData;
  } catch (const latred::Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kData;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kData;
  }
  return kUsage;
}
