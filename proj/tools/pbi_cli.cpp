// pbi-cli: split, train, evaluate and sweep popularity-debiased graph
// recommenders. Talks to the library only through the C interface.

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pbi/pbi.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr const char* kLedgerVersion = "# pbi-ledger v1";
constexpr const char* kLedgerColumns = "run_id,strategy,w,alpha,k,f1,ndcg,map,pru,pri";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Throws for a failed library call. Bad arguments become usage errors when
// the caller says they came straight from the command line.
void check(pbi_status st, bool user_input = false) {
  if (st == PBI_OK) return;
  std::string msg = pbi_last_error();
  if (user_input && st == PBI_ERR_INVALID_ARGUMENT) throw UsageError(msg);
  throw RuntimeFailure(std::string(pbi_status_name(st)) + ": " + msg);
}

// RAII owners for the C handles.
struct GraphDeleter {
  void operator()(pbi_graph* g) const { pbi_graph_free(g); }
};
struct ConfigDeleter {
  void operator()(pbi_config* c) const { pbi_config_free(c); }
};
struct ModelDeleter {
  void operator()(pbi_model* m) const { pbi_model_free(m); }
};
using GraphPtr = std::unique_ptr<pbi_graph, GraphDeleter>;
using ConfigPtr = std::unique_ptr<pbi_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<pbi_model, ModelDeleter>;

std::string take_string(char* s) {
  std::string out = s ? s : "";
  pbi_string_free(s);
  return out;
}

pbi_graph_stats stats_of(const pbi_graph* g) {
  pbi_graph_stats st{};
  check(pbi_graph_stats_get(g, &st));
  return st;
}

std::pair<GraphPtr, GraphPtr> load_pair(const std::string& train, const std::string& test) {
  pbi_graph* a = nullptr;
  pbi_graph* b = nullptr;
  check(pbi_graph_load_pair(train.c_str(), test.c_str(), &a, &b));
  return {GraphPtr(a), GraphPtr(b)};
}

GraphPtr load_one(const std::string& path) {
  pbi_graph* g = nullptr;
  check(pbi_graph_load(path.c_str(), &g));
  return GraphPtr(g);
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + p.string());
  out << text;
  if (!out) throw RuntimeFailure("write failed: " + p.string());
}

// SHA-1 of "blob <size>\0<content>", the id git gives the same file.
std::string git_blob_hash(const fs::path& p) {
  const std::string body = read_file(p);
  const std::string header = "blob " + std::to_string(body.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), body.data(), body.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) {
    throw RuntimeFailure("sha1 failed for " + p.string());
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string new_run_id() {
  std::random_device rd;
  char suffix[9];
  std::snprintf(suffix, sizeof suffix, "%08x", static_cast<unsigned>(rd()));
  std::string ts = utc_now();
  ts.erase(std::remove_if(ts.begin(), ts.end(), [](char c) { return c == '-' || c == ':'; }),
           ts.end());
  return ts + "-" + suffix;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---- config flags ----

// Every config key is accepted as --key and, for keys with underscores,
// as --key-with-dashes. Values are applied after --config.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_file, "key=value config file")->check(CLI::ExistingFile);
    std::istringstream keys(pbi_config_keys());
    for (std::string key; std::getline(keys, key);) {
      if (key.empty()) continue;
      std::string names = "--" + key;
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      if (dashed != key) names += ",--" + dashed;
      cmd.add_option(names, values[key], "config: " + key);
    }
  }

  ConfigPtr build(const CLI::App& cmd) const {
    pbi_config* raw = nullptr;
    check(pbi_config_new(&raw));
    ConfigPtr cfg(raw);
    if (!config_file.empty()) check(pbi_config_load_file(cfg.get(), config_file.c_str()), true);
    for (const auto& [key, value] : values) {
      if (cmd.count("--" + key) == 0) continue;
      check(pbi_config_set(cfg.get(), key.c_str(), value.c_str()), true);
    }
    check(pbi_config_validate(cfg.get()), true);
    return cfg;
  }
};

std::string config_value(const pbi_config* cfg, const char* key) {
  char* v = nullptr;
  check(pbi_config_get(cfg, key, &v));
  return take_string(v);
}

json config_json(const pbi_config* cfg) {
  json j = json::object();
  std::istringstream keys(pbi_config_keys());
  for (std::string key; std::getline(keys, key);) {
    if (!key.empty()) j[key] = config_value(cfg, key.c_str());
  }
  return j;
}

// ---- ledger ----

std::mutex ledger_mutex;

void append_ledger(const fs::path& path, const std::string& row) {
  std::lock_guard lock(ledger_mutex);
  bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  if (!fresh) {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    if (first != kLedgerVersion) {
      throw RuntimeFailure(path.string() + ": not a ledger (expected header '" + kLedgerVersion +
                           "')");
    }
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw RuntimeFailure("cannot append to " + path.string());
  if (fresh) out << kLedgerVersion << '\n' << kLedgerColumns << '\n';
  out << row << '\n';
}

std::string csv_metric(const json& v) { return v.is_null() ? "" : fmt(v.get<double>()); }

// ---- split ----

struct SplitArgs {
  std::string input;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  std::string out_stem;
};

int run_split(const SplitArgs& a) {
  if (!(a.test_fraction > 0.0 && a.test_fraction < 1.0)) {
    throw UsageError("--test-fraction must lie in (0, 1), got " + fmt(a.test_fraction));
  }
  GraphPtr g = load_one(a.input);
  pbi_graph* tr = nullptr;
  pbi_graph* te = nullptr;
  check(pbi_graph_split(g.get(), a.test_fraction, a.seed, &tr, &te));
  GraphPtr train(tr), test(te);

  fs::path stem = a.out_stem;
  if (stem.empty()) {
    stem = fs::path(a.input);
    stem.replace_extension();
  }
  const std::string train_path = stem.string() + ".train.tsv";
  const std::string test_path = stem.string() + ".test.tsv";
  check(pbi_graph_write(train.get(), train_path.c_str()));
  check(pbi_graph_write(test.get(), test_path.c_str()));
  const auto st = stats_of(g.get());
  const json sidecar{{"seed", a.seed},
                     {"test_fraction", a.test_fraction},
                     {"n_train", stats_of(train.get()).num_edges},
                     {"n_test", stats_of(test.get()).num_edges}};
  write_file(stem.string() + ".split.json", sidecar.dump(2) + "\n");

  std::printf("users\titems\tinteractions\tdensity\n%llu\t%llu\t%llu\t%.3f%%\n",
              static_cast<unsigned long long>(st.num_users),
              static_cast<unsigned long long>(st.num_items),
              static_cast<unsigned long long>(st.num_edges), 100.0 * st.density);
  std::printf("train %s (%llu)\ntest  %s (%llu)\n", train_path.c_str(),
              static_cast<unsigned long long>(sidecar["n_train"].get<std::uint64_t>()),
              test_path.c_str(),
              static_cast<unsigned long long>(sidecar["n_test"].get<std::uint64_t>()));
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string train;
  std::string test;
  std::string out;
  bool dump_triples = false;
  bool overwrite = false;
  bool quiet = false;
};

struct TrainOutcome {
  std::string run_id;
  fs::path checkpoint;
};

TrainOutcome run_train(const TrainArgs& a, const pbi_config* cfg) {
  const fs::path dir = a.out;
  const fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path) && !a.overwrite) {
    throw RuntimeFailure(dir.string() + " already holds a run (pass --overwrite to replace it)");
  }
  fs::create_directories(dir);

  GraphPtr train;
  GraphPtr test;
  if (a.test.empty()) {
    train = load_one(a.train);
  } else {
    std::tie(train, test) = load_pair(a.train, a.test);
  }

  json manifest{{"run_id", new_run_id()},
                {"status", "running"},
                {"library_version", pbi_version()},
                {"config", config_json(cfg)},
                {"inputs", json::object()},
                {"started_at", utc_now()},
                {"finished_at", nullptr}};
  manifest["inputs"]["train"] = {{"path", fs::absolute(a.train).string()},
                                 {"sha1", git_blob_hash(a.train)}};
  if (!a.test.empty()) {
    manifest["inputs"]["test"] = {{"path", fs::absolute(a.test).string()},
                                  {"sha1", git_blob_hash(a.test)}};
  }
  const auto shape = stats_of(train.get());
  manifest["graph"] = {{"num_users", shape.num_users},
                       {"num_items", shape.num_items},
                       {"num_edges", shape.num_edges}};
  write_file(manifest_path, manifest.dump(2) + "\n");

  if (a.dump_triples) {
    check(pbi_dump_triples(train.get(), cfg, (dir / "triples.tsv").string().c_str()));
  }

  struct Sink {
    std::ofstream log;
    bool quiet;
  } sink{std::ofstream(dir / "epochs.jsonl", std::ios::trunc), a.quiet};
  if (!sink.log) throw RuntimeFailure("cannot write " + (dir / "epochs.jsonl").string());
  auto on_epoch = [](const char* line, void* user) {
    auto* s = static_cast<Sink*>(user);
    s->log << line << '\n';
    s->log.flush();
    if (!s->quiet) std::fprintf(stderr, "%s\n", line);
  };

  pbi_model* raw = nullptr;
  char* summary = nullptr;
  const pbi_status st = pbi_train(train.get(), nullptr, cfg, on_epoch, &sink, &raw, &summary);
  if (st != PBI_OK) {
    manifest["status"] = "failed";
    manifest["error"] = pbi_last_error();
    manifest["finished_at"] = utc_now();
    write_file(manifest_path, manifest.dump(2) + "\n");
    check(st);
  }
  ModelPtr model(raw);
  const fs::path ckpt = dir / "best.ckpt";
  check(pbi_model_save(model.get(), ckpt.string().c_str()));

  manifest["status"] = "finished";
  manifest["summary"] = json::parse(take_string(summary));
  manifest["checkpoint"] = {{"path", "best.ckpt"}, {"sha1", git_blob_hash(ckpt)}};
  manifest["finished_at"] = utc_now();
  write_file(manifest_path, manifest.dump(2) + "\n");
  return {manifest["run_id"].get<std::string>(), ckpt};
}

// ---- evaluate ----

struct EvalArgs {
  std::string checkpoint;
  std::string train;
  std::string test;
  unsigned k = 10;
  std::string ledger;
  std::string report;
  std::string manifest;  // defaults to manifest.json beside the checkpoint
};

json run_evaluate(const EvalArgs& a) {
  auto [train, test] = load_pair(a.train, a.test);
  pbi_model* raw = nullptr;
  check(pbi_model_load(a.checkpoint.c_str(), &raw));
  ModelPtr model(raw);

  json manifest;
  fs::path mpath = a.manifest.empty() ? fs::path(a.checkpoint).parent_path() / "manifest.json"
                                      : fs::path(a.manifest);
  if (fs::exists(mpath)) manifest = json::parse(read_file(mpath));
  const std::string run_id = manifest.value("run_id", fs::path(a.checkpoint).stem().string());

  char* out = nullptr;
  check(pbi_evaluate(model.get(), train.get(), test.get(), a.k, run_id.c_str(), &out));
  json report = json::parse(take_string(out));
  report["run_id"] = run_id;

  if (!a.report.empty()) write_file(a.report, report.dump(2) + "\n");
  if (!a.ledger.empty()) {
    const json cfg = manifest.value("config", json::object());
    std::string alpha = cfg.value("alpha", "");
    if (manifest.contains("summary")) alpha = std::to_string(manifest["summary"].value("alpha", 0u));
    const std::string row = run_id + "," + cfg.value("strategy", "") + "," + cfg.value("w", "") +
                            "," + alpha + "," + std::to_string(a.k) + "," +
                            csv_metric(report["f1"]) + "," + csv_metric(report["ndcg"]) + "," +
                            csv_metric(report["map"]) + "," + csv_metric(report["pru"]) + "," +
                            csv_metric(report["pri"]);
    append_ledger(a.ledger, row);
  }
  return report;
}

// ---- sweep ----

struct SweepArgs {
  std::string train;
  std::string test;
  std::string out;
  std::optional<std::string> w_grid;  // comma-separated, as given
  std::optional<std::string> alpha_top_grid;
  unsigned k = 10;
  unsigned jobs = 1;
};

struct Cell {
  std::size_t index = 0;
  double w = 0.0;
  double alpha_top = 0.0;
  fs::path dir;
  bool ok = false;
  std::string error;
  json report;
};

void write_curve(const fs::path& path, const std::string& x, const std::string& other,
                 std::vector<const Cell*> cells) {
  auto key = [&](const Cell* c, const std::string& name) {
    return name == "w" ? c->w : c->alpha_top;
  };
  std::stable_sort(cells.begin(), cells.end(), [&](const Cell* l, const Cell* r) {
    if (key(l, other) != key(r, other)) return key(l, other) < key(r, other);
    return key(l, x) < key(r, x);
  });
  std::ostringstream out;
  out << x << ',' << other << ",f1,ndcg,map,pru,pri\n";
  for (const Cell* c : cells) {
    if (!c->ok) continue;
    out << fmt(key(c, x)) << ',' << fmt(key(c, other)) << ',' << csv_metric(c->report["f1"])
        << ',' << csv_metric(c->report["ndcg"]) << ',' << csv_metric(c->report["map"]) << ','
        << csv_metric(c->report["pru"]) << ',' << csv_metric(c->report["pri"]) << '\n';
  }
  write_file(path, out.str());
}

std::vector<double> parse_grid(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    try {
      out.push_back(std::stod(item, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw UsageError(std::string(flag) + ": not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError(std::string(flag) + " is empty");
  return out;
}

int run_sweep(const SweepArgs& a, const pbi_config* base) {
  if (!a.w_grid && !a.alpha_top_grid) {
    throw UsageError("sweep needs --w-grid and/or --alpha-top-grid");
  }
  const std::vector<double> w_grid = a.w_grid ? parse_grid(*a.w_grid, "--w-grid") : std::vector<double>{};
  const std::vector<double> at_grid =
      a.alpha_top_grid ? parse_grid(*a.alpha_top_grid, "--alpha-top-grid") : std::vector<double>{};
  if (a.jobs < 1) throw UsageError("--jobs must be >= 1");
  const fs::path root = a.out;
  fs::create_directories(root);
  const fs::path ledger = root / "ledger.csv";
  if (fs::exists(ledger)) fs::remove(ledger);

  const std::vector<double> ws =
      w_grid.empty() ? std::vector<double>{std::stod(config_value(base, "w"))} : w_grid;
  const std::vector<double> alphas =
      at_grid.empty() ? std::vector<double>{std::stod(config_value(base, "alpha_top"))} : at_grid;
  std::vector<Cell> cells;
  for (double at : alphas) {
    for (double w : ws) {
      Cell c;
      c.index = cells.size();
      c.w = w;
      c.alpha_top = at;
      char name[64];
      std::snprintf(name, sizeof name, "cell-%03zu-w%s-at%s", c.index, fmt(w).c_str(),
                    fmt(at).c_str());
      c.dir = root / name;
      cells.push_back(c);
    }
  }

  char* base_text = nullptr;
  check(pbi_config_to_text(base, &base_text));
  const std::string base_cfg = take_string(base_text);

  auto run_cell = [&](Cell& c) {
    try {
      pbi_config* raw = nullptr;
      check(pbi_config_new(&raw));
      ConfigPtr cfg(raw);
      std::istringstream lines(base_cfg);
      for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        check(pbi_config_set(cfg.get(), line.substr(0, eq).c_str(), line.substr(eq + 1).c_str()));
      }
      check(pbi_config_set(cfg.get(), "w", fmt(c.w).c_str()), true);
      check(pbi_config_set(cfg.get(), "alpha_top", fmt(c.alpha_top).c_str()), true);
      check(pbi_config_validate(cfg.get()), true);
      TrainArgs ta{a.train, a.test, c.dir.string(), false, true, true};
      const auto outcome = run_train(ta, cfg.get());
      EvalArgs ea{outcome.checkpoint.string(), a.train, a.test, a.k, ledger.string(),
                  (c.dir / "report.json").string(), ""};
      c.report = run_evaluate(ea);
      c.ok = true;
    } catch (const std::exception& e) {
      c.error = e.what();
    }
    std::fprintf(stderr, "cell %zu (w=%s, alpha_top=%s): %s\n", c.index, fmt(c.w).c_str(),
                 fmt(c.alpha_top).c_str(), c.ok ? "ok" : c.error.c_str());
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i]);
  };
  const unsigned n = std::min<unsigned>(a.jobs, static_cast<unsigned>(cells.size()));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::ostringstream status;
  status << "cell,w,alpha_top,dir,status,error\n";
  std::size_t failed = 0;
  for (const auto& c : cells) {
    std::string err = c.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    status << c.index << ',' << fmt(c.w) << ',' << fmt(c.alpha_top) << ','
           << c.dir.filename().string() << ',' << (c.ok ? "ok" : "failed") << ',' << err << '\n';
    failed += c.ok ? 0 : 1;
  }
  write_file(root / "cells.csv", status.str());

  std::vector<const Cell*> ptrs;
  for (const auto& c : cells) ptrs.push_back(&c);
  if (!w_grid.empty()) write_curve(root / "curve_w.csv", "w", "alpha_top", ptrs);
  if (!at_grid.empty()) write_curve(root / "curve_alpha_top.csv", "alpha_top", "w", ptrs);

  std::printf("%zu cells, %zu failed; ledger %s\n", cells.size(), failed, ledger.c_str());
  return failed == 0 ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train and evaluate popularity-debiased graph recommenders"};
  app.require_subcommand(1);
  unsigned threads = 0;
  bool threads_set = false;
  app.add_option("--threads", threads, "worker threads (overrides PBI_THREADS; 0 = serial)")
      ->each([&](const std::string&) { threads_set = true; });

  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "user-wise random train/test holdout");
  split_cmd->add_option("--input", split.input, "edge list (user<TAB>item)")
      ->required()
      ->check(CLI::ExistingFile);
  split_cmd->add_option("--test-fraction", split.test_fraction, "share of each user's edges held out");
  split_cmd->add_option("--seed", split.seed);
  split_cmd->add_option("--out-stem", split.out_stem, "output prefix (default: input without extension)");

  TrainArgs train;
  ConfigFlags train_cfg;
  auto* train_cmd = app.add_subcommand("train", "train one model into a run directory");
  train_cmd->add_option("--train", train.train, "training edge list")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--test", train.test, "test edge list, loaded only to share its index space")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out, "run directory")->required();
  train_cmd->add_flag("--dump-triples", train.dump_triples, "also write epoch-0 triples to triples.tsv");
  train_cmd->add_flag("--overwrite", train.overwrite, "replace an existing run in --out");
  train_cmd->add_flag("--quiet", train.quiet, "do not echo epochs to stderr");
  train_cfg.attach(*train_cmd);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on a test split");
  eval_cmd->add_option("--checkpoint", eval.checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--train", eval.train)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--test", eval.test)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--k", eval.k, "cutoff for F1/NDCG/MAP")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--ledger", eval.ledger, "CSV ledger to append a row to");
  eval_cmd->add_option("--report", eval.report, "also write the JSON report here");
  eval_cmd->add_option("--manifest", eval.manifest, "run manifest (default: beside checkpoint)");

  SweepArgs sweep;
  ConfigFlags sweep_cfg;
  auto* sweep_cmd = app.add_subcommand("sweep", "grid over w and alpha_top");
  sweep_cmd->add_option("--train", sweep.train)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--test", sweep.test)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", sweep.out, "sweep directory")->required();
  sweep_cmd->add_option("--w-grid", sweep.w_grid, "comma-separated w values");
  sweep_cmd->add_option("--alpha-top-grid", sweep.alpha_top_grid, "comma-separated alpha_top values");
  sweep_cmd->add_option("--k", sweep.k)->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--jobs", sweep.jobs, "cells trained concurrently");
  sweep_cfg.attach(*sweep_cmd);

  std::string ckpt_path;
  auto* ckpt_cmd = app.add_subcommand("checkpoint", "checkpoint utilities");
  ckpt_cmd->require_subcommand(1);
  auto* inspect_cmd = ckpt_cmd->add_subcommand("inspect", "print a checkpoint header as JSON");
  inspect_cmd->add_option("path", ckpt_path)->required()->check(CLI::ExistingFile);

  std::string dump_train;
  std::string dump_out;
  ConfigFlags dump_cfg;
  auto* dump_cmd = app.add_subcommand("dump-triples", "write the epoch-0 training triples");
  dump_cmd->add_option("--train", dump_train)->required()->check(CLI::ExistingFile);
  dump_cmd->add_option("--out", dump_out)->required();
  dump_cfg.attach(*dump_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  if (threads_set) pbi_set_threads(threads);

  try {
    if (split_cmd->parsed()) return run_split(split);
    if (train_cmd->parsed()) {
      const auto cfg = train_cfg.build(*train_cmd);
      const auto outcome = run_train(train, cfg.get());
      std::printf("run %s: %s\n", outcome.run_id.c_str(), outcome.checkpoint.c_str());
      return 0;
    }
    if (eval_cmd->parsed()) {
      std::printf("%s\n", run_evaluate(eval).dump(2).c_str());
      return 0;
    }
    if (sweep_cmd->parsed()) {
      const auto cfg = sweep_cfg.build(*sweep_cmd);
      return run_sweep(sweep, cfg.get());
    }
    if (inspect_cmd->parsed()) {
      char* out = nullptr;
      check(pbi_checkpoint_inspect(ckpt_path.c_str(), &out));
      std::printf("%s\n", take_string(out).c_str());
      return 0;
    }
    if (dump_cmd->parsed()) {
      const auto cfg = dump_cfg.build(*dump_cmd);
      GraphPtr g = load_one(dump_train);
      check(pbi_dump_triples(g.get(), cfg.get(), dump_out.c_str()));
      return 0;
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
